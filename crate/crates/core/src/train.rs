//! Adam training loop with the annealed divergence schedule, and the line toy experiment.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{koch_snowflake, l_shape, sample_shape_boundary, BBox, PointCloud, Shape2D};
use crate::init::{initialize, InitConfig, InitScheme};
use crate::io::save_checkpoint;
use crate::losses::{DivPenalty, LossBatch, LossBreakdown, LossConfig, Schedule};
use crate::siren::{loss_gradients, Architecture, ParamBuffers, ParamGrad, SirenParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub iterations: usize,
    pub lr: f64,
    pub batch_surface: usize,
    pub batch_domain: usize,
    pub hidden_layers: usize,
    pub width: usize,
    pub seed: u64,
    /// Extra checkpoints every this fraction of training, on top of the phase boundaries.
    pub checkpoint_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 10_000,
            lr: 5e-5,
            batch_surface: 15_000,
            batch_domain: 15_000,
            hidden_layers: 4,
            width: 256,
            seed: 0,
            checkpoint_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    /// Four hidden layers of width 128 with 128 + 128 samples per iteration.
    pub fn desk_2d() -> Self {
        Self {
            batch_surface: 128,
            batch_domain: 128,
            width: 128,
            ..Self::default()
        }
    }

    /// Desk-scale 3D runs: four hidden layers of width 128, 256 + 256 samples, 5k iterations.
    pub fn desk_3d() -> Self {
        Self {
            iterations: 5_000,
            batch_surface: 256,
            batch_domain: 256,
            width: 128,
            ..Self::default()
        }
    }

    pub fn architecture(&self, input_dim: usize) -> Architecture {
        Architecture::uniform(input_dim, self.hidden_layers, self.width)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(Error::config("learning rate must be positive"));
        }
        if self.batch_surface == 0 || self.batch_domain == 0 {
            return Err(Error::config("batch sizes must be positive"));
        }
        if self.hidden_layers == 0 || self.width == 0 {
            return Err(Error::config("network needs at least one non-empty hidden layer"));
        }
        if !(self.checkpoint_fraction > 0.0 && self.checkpoint_fraction <= 1.0) {
            return Err(Error::config("checkpoint_fraction must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Bias-corrected Adam moments, flattened in checkpoint order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(param_count: usize) -> Self {
        Self {
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

pub fn adam_step(params: &mut SirenParams, grads: &ParamGrad, state: &mut AdamState, lr: f64) -> Result<()> {
    if state.m.len() != params.len_flat() || grads.len_flat() != params.len_flat() {
        return Err(Error::config("optimizer state does not match the parameters"));
    }
    if !grads.is_finite() {
        return Err(Error::numeric("parameter gradient", "non-finite entry before the Adam update"));
    }
    state.step += 1;
    let bc1 = 1.0 - state.beta1.powi(state.step as i32);
    let bc2 = 1.0 - state.beta2.powi(state.step as i32);
    let mut offset = 0;
    for (p, g) in params.buffers_mut().into_iter().zip(grads.buffers()) {
        let m = &mut state.m[offset..offset + p.len()];
        let v = &mut state.v[offset..offset + p.len()];
        for i in 0..p.len() {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            let mhat = m[i] / bc1;
            let vhat = v[i] / bc2;
            p[i] -= lr * mhat / (vhat.sqrt() + state.eps);
        }
        offset += p.len();
    }
    Ok(())
}

/// One row of the per-iteration metrics log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub iteration: usize,
    /// Training progress in `[0, 1)`.
    pub t: f64,
    pub loss: LossBreakdown,
}

pub fn write_log_csv(path: &Path, log: &[LogRow]) -> Result<()> {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "iteration,t,tau,div_weight,manifold,normal,eikonal,nonmanifold,divergence,curvature,total")?;
    for r in log {
        let l = &r.loss;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.iteration,
            r.t,
            l.tau,
            l.div_weight,
            l.manifold,
            opt(l.normal),
            l.eikonal,
            l.nonmanifold,
            l.divergence,
            opt(l.curvature),
            l.total
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Optional side effects of a training run.
#[derive(Default)]
pub struct TrainHooks<'a> {
    /// Directory receiving `checkpoint_NNNNNN.ckpt` files.
    pub checkpoint_dir: Option<PathBuf>,
    pub on_iteration: Option<Box<dyn FnMut(&LogRow) + 'a>>,
}

pub struct TrainOutcome {
    pub params: SirenParams,
    pub log: Vec<LogRow>,
    pub checkpoints: Vec<PathBuf>,
}

/// Iterations after which a checkpoint is written: start, the two schedule
/// boundaries, the end, and every `fraction` of the run.
pub fn checkpoint_iterations(iterations: usize, fraction: f64, loss: &LossConfig) -> Vec<usize> {
    let at = |t: f64| ((t * iterations as f64).round() as usize).min(iterations);
    let mut v = vec![0, at(loss.t0), at(loss.t1), iterations];
    let mut k = 1;
    while (k as f64) * fraction < 1.0 {
        v.push(at(k as f64 * fraction));
        k += 1;
    }
    v.sort_unstable();
    v.dedup();
    v
}

/// Fit a network to `cloud`, drawing fresh surface and domain batches each iteration.
pub fn train(
    cloud: &PointCloud,
    bbox: &BBox,
    config: &TrainConfig,
    loss: &LossConfig,
    init: &InitConfig,
    hooks: TrainHooks<'_>,
) -> Result<TrainOutcome> {
    config.validate()?;
    loss.validate()?;
    if loss.use_normals && loss.lambda_normal > 0.0 && cloud.normals.is_none() {
        return Err(Error::config("normal supervision requested but the cloud has no normals"));
    }
    if loss.use_curvature && loss.lambda_curv > 0.0 && cloud.curvatures.is_none() {
        return Err(Error::config("curvature supervision requested but the cloud has no curvatures"));
    }
    let params = initialize(&config.architecture(cloud.dim()), init)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let (b_s, b_u) = (config.batch_surface, config.batch_domain);
    optimize(params, config, loss, hooks, |rng| crate::geometry::sample_batches(cloud, bbox, b_s, b_u, rng), rng)
}

fn optimize<F>(
    mut params: SirenParams,
    config: &TrainConfig,
    loss: &LossConfig,
    hooks: TrainHooks<'_>,
    mut next_batch: F,
    mut rng: ChaCha8Rng,
) -> Result<TrainOutcome>
where
    F: FnMut(&mut ChaCha8Rng) -> Result<LossBatch>,
{
    let n = config.iterations;
    let marks = checkpoint_iterations(n, config.checkpoint_fraction, loss);
    let mut checkpoints = Vec::new();
    let mut adam = AdamState::new(params.len_flat());
    let mut log = Vec::with_capacity(n);
    let TrainHooks {
        checkpoint_dir,
        mut on_iteration,
    } = hooks;
    if let Some(dir) = &checkpoint_dir {
        fs::create_dir_all(dir)?;
    }
    let save = |params: &SirenParams, name: String, list: &mut Vec<PathBuf>| -> Result<()> {
        if let Some(dir) = &checkpoint_dir {
            let path = dir.join(name);
            save_checkpoint(&path, params, config.seed)?;
            list.push(path);
        }
        Ok(())
    };
    for it in 0..n {
        if marks.binary_search(&it).is_ok() {
            save(&params, format!("checkpoint_{it:06}.ckpt"), &mut checkpoints)?;
        }
        let t = it as f64 / n as f64;
        let batch = next_batch(&mut rng)?;
        let step = loss_gradients(&params, &batch, loss, t).and_then(|(breakdown, grads)| {
            adam_step(&mut params, &grads, &mut adam, config.lr).map(|_| breakdown)
        });
        let breakdown = match step {
            Ok(b) => b,
            Err(e @ Error::Numeric { .. }) => {
                save(&params, "checkpoint_last_good.ckpt".into(), &mut checkpoints)?;
                return Err(match e {
                    Error::Numeric { term, detail } => Error::numeric(term, format!("{detail} at iteration {it}")),
                    other => other,
                });
            }
            Err(e) => return Err(e),
        };
        let row = LogRow {
            iteration: it,
            t,
            loss: breakdown,
        };
        if let Some(cb) = on_iteration.as_mut() {
            cb(&row);
        }
        log.push(row);
    }
    save(&params, format!("checkpoint_{n:06}.ckpt"), &mut checkpoints)?;
    Ok(TrainOutcome {
        params,
        log,
        checkpoints,
    })
}

/// Training objective and initialization presets, one per ablation row.
/// Every `digs-*` preset changes a single ingredient of `digs`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Manifold, normal, eikonal and off-surface terms with standard init.
    Siren,
    /// As `siren` without normal supervision.
    SirenWoN,
    /// L1 divergence, linear annealing, multi-frequency geometric init.
    Digs,
    DigsNoDecay,
    DigsWoMfgi,
    DigsL2,
    /// Curvature supervision in place of the divergence term.
    DigsCurv,
}

impl Variant {
    pub fn loss_config(self) -> LossConfig {
        let digs = LossConfig::digs();
        match self {
            Variant::Siren => LossConfig::siren(),
            Variant::SirenWoN => LossConfig::siren_without_normals(),
            Variant::Digs | Variant::DigsWoMfgi => digs,
            Variant::DigsNoDecay => LossConfig {
                schedule: Schedule::None,
                ..digs
            },
            Variant::DigsL2 => LossConfig {
                div_penalty: DivPenalty::L2,
                ..digs
            },
            Variant::DigsCurv => LossConfig {
                lambda_div: 0.0,
                lambda_curv: 100.0,
                use_curvature: true,
                ..digs
            },
        }
    }

    pub fn init_scheme(self) -> InitScheme {
        match self {
            Variant::Siren | Variant::SirenWoN | Variant::DigsWoMfgi => InitScheme::Standard,
            _ => InitScheme::Mfgi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    Circle,
    L,
    Snowflake,
}

impl ShapeKind {
    /// A sphere-initialized network outputs `nu(raw) - r`, which cannot drop
    /// below `-r` until `raw` changes sign. Shapes are sized so their deepest
    /// interior point stays well above that floor for the default `r = 0.5`:
    /// polygons have their farthest boundary point at norm 0.5 and the circle
    /// has radius 0.25.
    pub fn shape(self, snowflake_level: usize) -> Result<Shape2D> {
        Ok(match self {
            ShapeKind::Circle => Shape2D::Circle { radius: 0.25 },
            ShapeKind::L => Shape2D::Polygon(l_shape().scaled_to_radius(0.5)),
            ShapeKind::Snowflake => Shape2D::Polygon(koch_snowflake(snowflake_level)?.scaled_to_radius(0.5)),
        })
    }
}

/// Boundary cloud and training box for a 2D shape.
pub fn shape_training_data(shape: &Shape2D, points: usize, seed: u64) -> Result<(PointCloud, BBox)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    Ok((sample_shape_boundary(shape, points, &mut rng)?, BBox::cube(2, 1.1)))
}

/// How the constraint points on `y = -1` and `y = 1` enter the toy objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ToyMode {
    /// All thirty points regress to their target `y`.
    TargetValues,
    /// Only `y = 0` points carry a value constraint; the others join the domain set.
    ZeroLine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToyConfig {
    pub grid_n: usize,
    pub use_div: bool,
    pub repetitions: usize,
    pub seed: u64,
    pub iterations: usize,
    pub lr: f64,
    pub hidden_layers: usize,
    pub width: usize,
    pub omega_0: f64,
    /// Grid sites drawn per iteration (the whole grid when it is smaller).
    pub batch: usize,
    pub points_per_line: usize,
    pub eval_resolution: usize,
    pub mode: ToyMode,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            grid_n: 200,
            use_div: true,
            repetitions: 20,
            seed: 0,
            iterations: 1500,
            lr: 1e-4,
            hidden_layers: 2,
            width: 128,
            omega_0: 30.0,
            batch: 256,
            points_per_line: 10,
            eval_resolution: 1000,
            mode: ToyMode::TargetValues,
        }
    }
}

/// Gradient statistics of one toy run over the evaluation grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToyRun {
    /// Mean of `|grad f|^2`.
    pub dirichlet: f64,
    pub grad_mean: f64,
    pub grad_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToySummary {
    pub runs: Vec<ToyRun>,
    /// `(mean, std)` over repetitions of each statistic.
    pub dirichlet: (f64, f64),
    pub grad_mean: (f64, f64),
    pub grad_std: (f64, f64),
}

fn mean_std(v: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = v.clone().count() as f64;
    let m = v.clone().sum::<f64>() / n;
    let var = v.map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, var.sqrt())
}

impl ToySummary {
    pub fn from_runs(runs: Vec<ToyRun>) -> Self {
        Self {
            dirichlet: mean_std(runs.iter().map(|r| r.dirichlet)),
            grad_mean: mean_std(runs.iter().map(|r| r.grad_mean)),
            grad_std: mean_std(runs.iter().map(|r| r.grad_std)),
            runs,
        }
    }
}

/// Lattice of `n x n` points covering `[0, 1] x [-1, 1]`, x fastest.
pub fn toy_grid(n: usize) -> Array2<f64> {
    let step = |i: usize, lo: f64, hi: f64| lo + (hi - lo) * i as f64 / (n - 1) as f64;
    Array2::from_shape_fn((n * n, 2), |(k, j)| {
        if j == 0 {
            step(k % n, 0.0, 1.0)
        } else {
            step(k / n, -1.0, 1.0)
        }
    })
}

/// Learn `f(x, y) = y` from sparse line constraints, with or without the
/// divergence penalty, and report gradient statistics per repetition.
/// Repetition `r` uses the same constraints and initialization whatever `use_div` is.
pub fn toy_line_experiment(config: &ToyConfig) -> Result<ToySummary> {
    if config.grid_n < 2 || config.repetitions == 0 || config.eval_resolution < 2 {
        return Err(Error::config("toy experiment needs grid_n >= 2, eval_resolution >= 2 and repetitions >= 1"));
    }
    let runs = (0..config.repetitions)
        .into_par_iter()
        .map(|r| toy_run(config, config.seed.wrapping_add(r as u64)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ToySummary::from_runs(runs))
}

pub fn toy_loss_config(use_div: bool) -> LossConfig {
    LossConfig {
        lambda_manifold: 3000.0,
        lambda_normal: 0.0,
        lambda_eikonal: 50.0,
        lambda_nonmanifold: 0.0,
        lambda_div: if use_div { 100.0 } else { 0.0 },
        lambda_curv: 0.0,
        schedule: Schedule::None,
        use_normals: false,
        use_curvature: false,
        ..LossConfig::digs()
    }
}

/// Train one toy network and evaluate it; returns the trained parameters too.
pub fn toy_train(config: &ToyConfig, seed: u64) -> Result<SirenParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = config.points_per_line;
    let mut constraints = Array2::zeros((3 * k, 2));
    let mut targets = vec![0.0; 3 * k];
    for (line, y) in [-1.0, 0.0, 1.0].into_iter().enumerate() {
        for i in 0..k {
            constraints[[line * k + i, 0]] = rng.gen_range(0.0..=1.0);
            constraints[[line * k + i, 1]] = y;
            targets[line * k + i] = y;
        }
    }
    let init = InitConfig {
        scheme: InitScheme::Standard,
        omega_0: config.omega_0,
        seed: rng.gen(),
        ..InitConfig::default()
    };
    let params = initialize(&Architecture::uniform(2, config.hidden_layers, config.width), &init)?;

    let grid = toy_grid(config.grid_n);
    let (surface, surface_targets, extra) = match config.mode {
        ToyMode::TargetValues => (constraints, targets, None),
        ToyMode::ZeroLine => {
            let zero = constraints.slice(ndarray::s![k..2 * k, ..]).to_owned();
            let others = ndarray::concatenate(
                ndarray::Axis(0),
                &[constraints.slice(ndarray::s![..k, ..]), constraints.slice(ndarray::s![2 * k.., ..])],
            )
            .expect("same width");
            (zero, vec![0.0; k], Some(others))
        }
    };
    let batch = config.batch.min(grid.nrows());
    let next = |rng: &mut ChaCha8Rng| -> Result<LossBatch> {
        let rows = if batch == grid.nrows() {
            (0..batch).collect()
        } else {
            index::sample(rng, grid.nrows(), batch).into_vec()
        };
        let mut domain = grid.select(ndarray::Axis(0), &rows);
        if let Some(e) = &extra {
            domain = ndarray::concatenate(ndarray::Axis(0), &[domain.view(), e.view()]).expect("same width");
        }
        let mut b = LossBatch::new(surface.clone(), domain);
        b.surface_targets = Some(surface_targets.clone());
        Ok(b)
    };
    let train_cfg = TrainConfig {
        iterations: config.iterations,
        lr: config.lr,
        hidden_layers: config.hidden_layers,
        width: config.width,
        seed,
        ..TrainConfig::desk_2d()
    };
    let out = optimize(params, &train_cfg, &toy_loss_config(config.use_div), TrainHooks::default(), next, rng)?;
    Ok(out.params)
}

fn toy_run(config: &ToyConfig, seed: u64) -> Result<ToyRun> {
    let params = toy_train(config, seed)?;
    let grid = toy_grid(config.eval_resolution);
    let chunks: Vec<_> = grid.axis_chunks_iter(ndarray::Axis(0), 4096).collect();
    // Per-chunk (sum |g|, sum |g|^2), merged in chunk order.
    let sums = chunks
        .par_iter()
        .map(|c| {
            let (_, grads) = params.forward_with_gradients(*c)?;
            Ok(grads.rows().into_iter().fold((0.0, 0.0), |(s1, s2), g| {
                let n2 = g.dot(&g);
                (s1 + n2.sqrt(), s2 + n2)
            }))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let (s1, s2) = sums.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = grid.nrows() as f64;
    let mean = s1 / n;
    Ok(ToyRun {
        dirichlet: s2 / n,
        grad_mean: mean,
        grad_std: (s2 / n - mean * mean).max(0.0).sqrt(),
    })
}
