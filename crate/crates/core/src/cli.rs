//! Command-line front end: argument parsing, run configuration, and the
//! artifacts each subcommand writes.

use std::fs;
use std::path::{Component, Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extract::{
    contour_components, eval_grid, marching_cubes, marching_squares, mesh_components, Contour2D, GridField,
};
use crate::field::{AnalyticField, ImplicitField, JetBatch};
use crate::geometry::{normalize_cloud, sample_shape_boundary, sample_sphere, BBox, PointCloud, Shape2D};
use crate::init::{initialize, nu, InitConfig, InitScheme};
use crate::io::{
    load_checkpoint, read_cloud, save_checkpoint, write_ply_mesh, write_segments_csv, Colormap, Raster,
};
use crate::losses::LossConfig;
use crate::metrics::{
    chamfer, dirichlet_energy, hausdorff, iou, sample_segments, sample_triangles, squared_chamfer, FieldStatistics,
    GradientStats, MetricReport,
};
use crate::siren::{Architecture, SirenParams};
use crate::train::{
    shape_training_data, train, write_log_csv, ShapeKind, ToyConfig, TrainConfig, TrainHooks, Variant,
};

/// Half-width of the cube every command extracts and evaluates in.
const BOX_HALF: f64 = 1.1;
/// Points drawn on each surface when comparing two of them.
const METRIC_SAMPLES: usize = 100_000;
/// Uniform box samples for IoU and field statistics.
const VOLUME_SAMPLES: usize = 100_000;

#[derive(Debug, Parser)]
#[command(name = "digs", version, about = "Divergence-guided sine-network SDF fitting")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON run configuration; flags given on the command line take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub iterations: Option<usize>,
    #[arg(long, global = true)]
    pub lr: Option<f64>,
    /// Grid cells along the shortest side of the extraction box.
    #[arg(long, global = true)]
    pub resolution: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub variant: Option<Variant>,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads; 1 implies deterministic mode.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Run single-threaded so every output is bit-reproducible.
    #[arg(long, global = true)]
    pub deterministic: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one of the built-in 2D shapes and render the field.
    Train2d {
        #[arg(long, value_enum, default_value = "circle")]
        shape: ShapeKind,
    },
    /// Fit a point cloud (.xyz, .ply, .csv) and extract a mesh.
    Train3d {
        cloud: PathBuf,
        /// Ground-truth cloud for the reported metrics.
        #[arg(long)]
        gt: Option<PathBuf>,
    },
    /// Line-constraint toy problem with and without the divergence term.
    Toy {
        /// Training grid side; both 20 and 200 when omitted.
        #[arg(long)]
        grid_n: Option<usize>,
        #[arg(long)]
        reps: Option<usize>,
    },
    /// Extract and score a checkpoint, or `analytic:circle:R` / `analytic:sphere:R`.
    Eval {
        checkpoint: String,
        /// `circle[:R]`, `l`, `snowflake[:LEVEL]`, `sphere[:R]`, or a cloud file.
        #[arg(long)]
        gt: String,
    },
    /// Measure the properties an initialization scheme is meant to have.
    InitCheck {
        #[arg(long, value_enum)]
        scheme: InitScheme,
        #[arg(long, default_value_t = 3)]
        dim: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Falls back to the desk-scale preset for 2D and the full preset for 3D.
    pub train: Option<TrainConfig>,
    /// Overrides the variant's loss preset when present.
    pub loss: Option<LossConfig>,
    /// Overrides the variant's initialization when present.
    pub init: Option<InitConfig>,
    pub variant: Variant,
    pub data: Option<PathBuf>,
    pub gt: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub deterministic: bool,
    pub seed: u64,
    /// Grid cells along the shortest box side; 256 in 2D and 128 in 3D when unset.
    pub resolution: Option<usize>,
    pub threads: Option<usize>,
    /// Boundary samples for 2D shapes.
    pub boundary_points: usize,
    pub snowflake_level: usize,
    pub toy: ToyConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            train: None,
            loss: None,
            init: None,
            variant: Variant::Digs,
            data: None,
            gt: None,
            out_dir: PathBuf::from("out"),
            deterministic: false,
            seed: 0,
            resolution: None,
            threads: None,
            boundary_points: 10_000,
            snowflake_level: 3,
            toy: ToyConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    /// Config file (if any) with command-line flags laid on top.
    pub fn resolve(args: &CommonArgs) -> Result<Self> {
        let mut cfg = match &args.config {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        if let Some(v) = args.variant {
            cfg.variant = v;
        }
        if let Some(s) = args.seed {
            cfg.seed = s;
        }
        if args.resolution.is_some() {
            cfg.resolution = args.resolution;
        }
        if let Some(d) = &args.out_dir {
            cfg.out_dir = d.clone();
        }
        if args.threads.is_some() {
            cfg.threads = args.threads;
        }
        cfg.deterministic |= args.deterministic;
        if let Some(n) = args.iterations {
            cfg.toy.iterations = n;
        }
        if let Some(lr) = args.lr {
            cfg.toy.lr = lr;
        }
        cfg.toy.seed = cfg.seed;
        if cfg.resolution.is_some_and(|r| r < 2) {
            return Err(Error::config("resolution must be at least 2"));
        }
        Ok(cfg)
    }

    pub fn train_config(&self, dim: usize, args: &CommonArgs) -> TrainConfig {
        let mut t = self.train.clone().unwrap_or_else(|| match dim {
            2 => TrainConfig::desk_2d(),
            _ => TrainConfig::default(),
        });
        apply_train_flags(&mut t, args, self.seed);
        t
    }

    pub fn resolution(&self, dim: usize) -> usize {
        self.resolution.unwrap_or(if dim == 2 { 256 } else { 128 })
    }

    pub fn loss_config(&self) -> LossConfig {
        self.loss.clone().unwrap_or_else(|| self.variant.loss_config())
    }

    pub fn init_config(&self) -> InitConfig {
        let mut init = self.init.clone().unwrap_or_else(|| InitConfig {
            scheme: self.variant.init_scheme(),
            ..InitConfig::default()
        });
        init.seed = self.seed;
        init
    }

    fn thread_count(&self) -> Option<usize> {
        if self.deterministic {
            Some(1)
        } else {
            self.threads
        }
    }
}

fn apply_train_flags(t: &mut TrainConfig, args: &CommonArgs, seed: u64) {
    if let Some(n) = args.iterations {
        t.iterations = n;
    }
    if let Some(lr) = args.lr {
        t.lr = lr;
    }
    t.seed = seed;
}

/// Output directory that refuses paths escaping it.
pub struct OutDir(PathBuf);

impl OutDir {
    pub fn create(path: &Path) -> Result<Self> {
        fs::create_dir_all(path)?;
        Ok(Self(path.to_path_buf()))
    }

    pub fn file(&self, name: &str) -> Result<PathBuf> {
        let rel = Path::new(name);
        if rel.components().any(|c| !matches!(c, Component::Normal(_))) {
            return Err(Error::config(format!("output name {name:?} leaves the output directory")));
        }
        Ok(self.0.join(rel))
    }

    pub fn path(&self) -> &Path {
        &self.0
    }
}

/// Parse `argv`, run the command, and map the outcome to a process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = RunConfig::resolve(&cli.common)?;
    let body = || -> Result<()> {
        match &cli.command {
            Command::Train2d { shape } => cmd_train2d(*shape, &cfg, &cli.common).map(|_| ()),
            Command::Train3d { cloud, gt } => {
                let gt = gt.as_ref().or(cfg.gt.as_ref());
                cmd_train3d(cloud, gt.map(|p| p.as_path()), &cfg, &cli.common).map(|_| ())
            }
            Command::Toy { grid_n, reps } => cmd_toy(*grid_n, *reps, &cfg),
            Command::Eval { checkpoint, gt } => cmd_eval(checkpoint, gt, &cfg).map(|_| ()),
            Command::InitCheck { scheme, dim } => cmd_init_check(*scheme, *dim, &cfg).map(|_| ()),
        }
    };
    match cfg.thread_count() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::config(format!("thread pool: {e}")))?
            .install(body),
        None => body(),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

/// Jets at every node of `grid`, in node order.
fn grid_jets(field: &dyn ImplicitField, grid: &GridField) -> Result<JetBatch> {
    let d = grid.dim();
    let n = grid.values.len();
    const CHUNK: usize = 4096;
    let parts = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let range = c * CHUNK..((c + 1) * CHUNK).min(n);
            let pts = Array2::from_shape_fn((range.len(), d), |(k, a)| grid.node_position(range.start + k)[a]);
            field.jets(pts.view())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut all = JetBatch::zeros(0, d);
    for p in &parts {
        all = JetBatch::concat(&all, p, p.role);
    }
    Ok(all)
}

fn contour_raster(grid: &GridField, contour: &Contour2D) -> Raster {
    let mut img = Raster::heatmap(&grid.values, grid.dims[0], grid.dims[1], Colormap::Diverging);
    let px = |v: ndarray::ArrayView1<'_, f64>| {
        [
            (v[0] - grid.origin[0]) / grid.spacing[0],
            (v[1] - grid.origin[1]) / grid.spacing[1],
        ]
    };
    for s in &contour.segments {
        img.draw_line(px(contour.vertices.row(s[0])), px(contour.vertices.row(s[1])), [0, 0, 0]);
    }
    img
}

#[derive(Debug, Clone, Serialize)]
pub struct Train2dSummary {
    pub shape: ShapeKind,
    pub variant: Variant,
    pub iterations: usize,
    pub metrics: MetricReport,
}

pub fn cmd_train2d(shape_kind: ShapeKind, cfg: &RunConfig, args: &CommonArgs) -> Result<Train2dSummary> {
    let out = OutDir::create(&cfg.out_dir)?;
    let shape = shape_kind.shape(cfg.snowflake_level)?;
    let (cloud, bbox) = shape_training_data(&shape, cfg.boundary_points, cfg.seed)?;
    let tc = cfg.train_config(2, args);
    let outcome = train(
        &cloud,
        &bbox,
        &tc,
        &cfg.loss_config(),
        &cfg.init_config(),
        TrainHooks {
            checkpoint_dir: Some(out.file("checkpoints")?),
            on_iteration: None,
        },
    )?;
    let params = outcome.params;
    save_checkpoint(&out.file("model.ckpt")?, &params, cfg.seed)?;
    write_log_csv(&out.file("loss.csv")?, &outcome.log)?;

    let grid = eval_grid(&params, &BBox::cube(2, BOX_HALF), cfg.resolution(2))?;
    let contour = marching_squares(&grid)?;
    write_segments_csv(&out.file("contour.csv")?, contour.vertices.view(), &contour.segments)?;
    contour_raster(&grid, &contour).write_ppm(&out.file("contour.ppm")?)?;

    let jets = grid_jets(&params, &grid)?;
    let (nx, ny) = (grid.dims[0], grid.dims[1]);
    Raster::heatmap(&grid.values, nx, ny, Colormap::Diverging).write_ppm(&out.file("sdf.ppm")?)?;
    let eik: Vec<f64> = (0..jets.len()).map(|k| (jets.grad_norm(k) - 1.0).abs()).collect();
    Raster::heatmap(&eik, nx, ny, Colormap::Sequential).write_ppm(&out.file("eikonal.ppm")?)?;
    let div: Vec<f64> = jets.laplacians.iter().map(|v| v.abs()).collect();
    Raster::heatmap(&div, nx, ny, Colormap::Sequential).write_ppm(&out.file("divergence.ppm")?)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(3);
    let metrics = score_2d(&params, &contour, &shape, &mut rng)?;
    let summary = Train2dSummary {
        shape: shape_kind,
        variant: cfg.variant,
        iterations: tc.iterations,
        metrics,
    };
    write_json(&out.file("metrics.json")?, &summary)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(summary)
}

fn score_2d(field: &dyn ImplicitField, contour: &Contour2D, shape: &Shape2D, rng: &mut ChaCha8Rng) -> Result<MetricReport> {
    let gt = sample_shape_boundary(shape, METRIC_SAMPLES, rng)?.points;
    let volume = BBox::cube(2, BOX_HALF).sample(VOLUME_SAMPLES, rng);
    let mut report = field_report(field, &volume)?;
    report.components = Some(contour_components(contour));
    report.iou = Some(iou(|p: &[f64]| shape.contains([p[0], p[1]]), field, volume.view())?);
    if !contour.segments.is_empty() {
        let pred = sample_segments(contour.vertices.view(), &contour.segments, METRIC_SAMPLES, rng)?;
        surface_metrics(&mut report, &pred, &gt)?;
    }
    Ok(report)
}

fn field_report(field: &dyn ImplicitField, volume: &Array2<f64>) -> Result<MetricReport> {
    let stats = GradientStats::over_points(field, volume)?;
    let jets = field.jets(volume.slice(ndarray::s![..volume.nrows().min(10_000), ..]))?;
    Ok(MetricReport {
        dirichlet: Some(dirichlet_energy(&jets)),
        field: Some(FieldStatistics::from(stats)),
        ..MetricReport::default()
    })
}

fn surface_metrics(report: &mut MetricReport, pred: &Array2<f64>, gt: &Array2<f64>) -> Result<()> {
    report.chamfer = Some(chamfer(pred.view(), gt.view())?);
    report.hausdorff = Some(hausdorff(pred.view(), gt.view())?);
    report.squared_chamfer = Some(squared_chamfer(pred.view(), gt.view())?);
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct Train3dSummary {
    pub grid_dims: Vec<usize>,
    pub vertices: usize,
    pub faces: usize,
    /// Against the input cloud.
    pub input: MetricReport,
    /// Against the ground-truth cloud, when one was given.
    pub gt: Option<MetricReport>,
}

pub fn cmd_train3d(cloud_path: &Path, gt_path: Option<&Path>, cfg: &RunConfig, args: &CommonArgs) -> Result<Train3dSummary> {
    let out = OutDir::create(&cfg.out_dir)?;
    let raw = read_cloud(cloud_path)?;
    if raw.dim() != 3 {
        return Err(Error::input("train3d expects a 3D cloud"));
    }
    let cloud = normalize_cloud(&raw)?;
    let tc = cfg.train_config(3, args);
    let bbox = BBox::cube(3, BOX_HALF);
    let outcome = train(
        &cloud,
        &bbox,
        &tc,
        &cfg.loss_config(),
        &cfg.init_config(),
        TrainHooks {
            checkpoint_dir: Some(out.file("checkpoints")?),
            on_iteration: None,
        },
    )?;
    let params = outcome.params;
    save_checkpoint(&out.file("model.ckpt")?, &params, cfg.seed)?;
    write_log_csv(&out.file("loss.csv")?, &outcome.log)?;

    let grid = eval_grid(&params, &bbox, cfg.resolution(3))?;
    let mesh = marching_cubes(&grid)?;
    write_ply_mesh(&out.file("mesh.ply")?, mesh.vertices.view(), &mesh.faces, None)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(3);
    let pred = if mesh.faces.is_empty() {
        None
    } else {
        Some(sample_triangles(mesh.vertices.view(), &mesh.faces, METRIC_SAMPLES, &mut rng)?)
    };
    let volume = bbox.sample(VOLUME_SAMPLES, &mut rng);
    let components = mesh_components(&mesh);
    let mut input = field_report(&params, &volume)?;
    input.components = Some(components);
    if let Some(p) = &pred {
        surface_metrics(&mut input, p, &cloud.points)?;
    }
    let gt = match gt_path {
        Some(path) => {
            let gt_cloud = read_cloud(path)?;
            let gt_points = normalize_with(&gt_cloud, &cloud)?;
            let mut report = MetricReport {
                components: Some(components),
                ..MetricReport::default()
            };
            if let Some(p) = &pred {
                surface_metrics(&mut report, p, &gt_points)?;
            }
            Some(report)
        }
        None => None,
    };
    let summary = Train3dSummary {
        grid_dims: grid.dims.clone(),
        vertices: mesh.vertices.nrows(),
        faces: mesh.faces.len(),
        input,
        gt,
    };
    write_json(&out.file("metrics.json")?, &summary)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(summary)
}

/// Map `other` into the normalized frame of `reference`.
fn normalize_with(other: &PointCloud, reference: &PointCloud) -> Result<Array2<f64>> {
    let norm = reference
        .normalization
        .as_ref()
        .ok_or_else(|| Error::Contract("reference cloud is not normalized".into()))?;
    if other.dim() != norm.centroid.len() {
        return Err(Error::input("ground-truth cloud dimension differs from the input"));
    }
    let centroid = Array1::from(norm.centroid.clone());
    Ok((&other.points - &centroid.insert_axis(Axis(0))) / norm.scale)
}

/// Table rows as `(label, grid)` pairs in output order.
pub const TOY_ROWS: [(&str, usize); 4] = [("A+C2", 20), ("A+C2+Div", 20), ("A+C2", 200), ("A+C2+Div", 200)];

pub const TOY_HEADER: &str =
    "loss,grid,dirichlet_mean,dirichlet_std,grad_mean_mean,grad_mean_std,grad_std_mean,grad_std_std";

pub fn cmd_toy(grid_n: Option<usize>, reps: Option<usize>, cfg: &RunConfig) -> Result<()> {
    let out = OutDir::create(&cfg.out_dir)?;
    let mut lines = vec![TOY_HEADER.to_string()];
    let mut runs = Vec::new();
    for (label, n) in TOY_ROWS {
        if grid_n.is_some_and(|g| g != n) {
            continue;
        }
        let toy = ToyConfig {
            grid_n: n,
            use_div: label.ends_with("Div"),
            repetitions: reps.unwrap_or(cfg.toy.repetitions),
            ..cfg.toy.clone()
        };
        let s = crate::train::toy_line_experiment(&toy)?;
        lines.push(format!(
            "{label},{n}x{n},{},{},{},{},{},{}",
            s.dirichlet.0, s.dirichlet.1, s.grad_mean.0, s.grad_mean.1, s.grad_std.0, s.grad_std.1
        ));
        runs.push(serde_json::json!({ "loss": label, "grid": n, "summary": s }));
    }
    if grid_n.is_some() && runs.is_empty() {
        return Err(Error::config("toy grid must be 20 or 200"));
    }
    fs::write(out.file("toy.csv")?, lines.join("\n") + "\n")?;
    write_json(&out.file("toy_runs.json")?, &runs)?;
    println!("{}", lines.join("\n"));
    Ok(())
}

enum GroundTruth {
    Shape(Shape2D),
    Sphere(f64),
    Cloud(Array2<f64>),
}

fn parse_gt(desc: &str) -> Result<GroundTruth> {
    let mut parts = desc.splitn(2, ':');
    let head = parts.next().unwrap_or_default();
    let arg = parts.next();
    let num = |default: f64| -> Result<f64> {
        arg.map_or(Ok(default), |a| a.parse().map_err(|_| Error::config(format!("bad number in {desc:?}"))))
    };
    Ok(match head {
        "circle" if arg.is_none() => GroundTruth::Shape(ShapeKind::Circle.shape(0)?),
        "circle" => GroundTruth::Shape(Shape2D::Circle { radius: num(0.0)? }),
        "l" => GroundTruth::Shape(ShapeKind::L.shape(0)?),
        "snowflake" => GroundTruth::Shape(ShapeKind::Snowflake.shape(num(3.0)? as usize)?),
        "sphere" => GroundTruth::Sphere(num(1.0)?),
        _ => GroundTruth::Cloud(read_cloud(Path::new(desc))?.points),
    })
}

enum Model {
    Network(SirenParams),
    Analytic(AnalyticField),
}

impl Model {
    fn field(&self) -> &dyn ImplicitField {
        match self {
            Model::Network(p) => p,
            Model::Analytic(a) => a,
        }
    }
}

fn load_model(desc: &str) -> Result<Model> {
    let Some(rest) = desc.strip_prefix("analytic:") else {
        return Ok(Model::Network(load_checkpoint(Path::new(desc))?.0));
    };
    let (kind, r) = rest.split_once(':').unwrap_or((rest, "1"));
    let r: f64 = r.parse().map_err(|_| Error::config(format!("bad radius in {desc:?}")))?;
    match kind {
        "circle" => Ok(Model::Analytic(AnalyticField::sphere(2, r))),
        "sphere" => Ok(Model::Analytic(AnalyticField::sphere(3, r))),
        _ => Err(Error::config(format!("unknown analytic field {kind:?}"))),
    }
}

pub fn cmd_eval(checkpoint: &str, gt: &str, cfg: &RunConfig) -> Result<MetricReport> {
    let out = OutDir::create(&cfg.out_dir)?;
    let model = load_model(checkpoint)?;
    let field = model.field();
    let dim = field.input_dim();
    let gt = parse_gt(gt)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(3);
    let bbox = BBox::cube(dim, BOX_HALF);
    let grid = eval_grid(field, &bbox, cfg.resolution(dim))?;
    let report = match (dim, gt) {
        (2, GroundTruth::Shape(shape)) => score_2d(field, &marching_squares(&grid)?, &shape, &mut rng)?,
        (3, GroundTruth::Sphere(r)) => {
            let gt_points = sample_sphere(METRIC_SAMPLES, r, &mut rng).points;
            let mut report = score_3d(field, &grid, &gt_points, &mut rng)?;
            let volume = bbox.sample(VOLUME_SAMPLES, &mut rng);
            report.iou = Some(iou(|p: &[f64]| p.iter().map(|v| v * v).sum::<f64>() < r * r, field, volume.view())?);
            report
        }
        (2, GroundTruth::Cloud(points)) if points.ncols() == 2 => {
            let contour = marching_squares(&grid)?;
            let volume = bbox.sample(VOLUME_SAMPLES, &mut rng);
            let mut report = field_report(field, &volume)?;
            report.components = Some(contour_components(&contour));
            if !contour.segments.is_empty() {
                let pred = sample_segments(contour.vertices.view(), &contour.segments, METRIC_SAMPLES, &mut rng)?;
                surface_metrics(&mut report, &pred, &points)?;
            }
            report
        }
        (3, GroundTruth::Cloud(points)) if points.ncols() == 3 => score_3d(field, &grid, &points, &mut rng)?,
        _ => return Err(Error::config("ground truth does not match the field dimension")),
    };
    write_json(&out.file("metrics.json")?, &report)?;
    println!("{}", report.to_json()?);
    Ok(report)
}

fn score_3d(field: &dyn ImplicitField, grid: &GridField, gt: &Array2<f64>, rng: &mut ChaCha8Rng) -> Result<MetricReport> {
    let mesh = marching_cubes(grid)?;
    let volume = BBox::cube(3, BOX_HALF).sample(VOLUME_SAMPLES, rng);
    let mut report = field_report(field, &volume)?;
    report.components = Some(mesh_components(&mesh));
    if !mesh.faces.is_empty() {
        let pred = sample_triangles(mesh.vertices.view(), &mesh.faces, METRIC_SAMPLES, rng)?;
        surface_metrics(&mut report, &pred, gt)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub name: String,
    pub value: f64,
    /// Human-readable acceptance condition on `value`.
    pub condition: String,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitReport {
    pub scheme: InitScheme,
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub checks: Vec<PropertyCheck>,
    pub pass: bool,
}

fn check(name: &str, value: f64, condition: &str, pass: bool) -> PropertyCheck {
    PropertyCheck {
        name: name.into(),
        value,
        condition: condition.into(),
        pass,
    }
}

/// `n` points uniform in the unit ball of dimension `d`.
pub fn sample_unit_ball<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Array2<f64> {
    let mut out = Array2::zeros((n, d));
    let mut k = 0;
    while k < n {
        let p: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if p.iter().map(|v| v * v).sum::<f64>() <= 1.0 {
            out.row_mut(k).assign(&Array1::from(p));
            k += 1;
        }
    }
    out
}

/// `|nu(raw(x)) - |x||` at each row of `points`, with `raw` the network before the output transform.
pub fn sphere_errors(params: &SirenParams, points: &Array2<f64>) -> Result<Vec<f64>> {
    let raw = SirenParams {
        apply_nu: false,
        ..params.clone()
    };
    let values = raw.forward(points.view())?;
    Ok(points
        .rows()
        .into_iter()
        .zip(values)
        .map(|(p, v)| (nu(v) - p.dot(&p).sqrt()).abs())
        .collect())
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Run the property suite for `scheme` on `hidden` layers with input dimension `dim`.
pub fn init_report(scheme: InitScheme, dim: usize, hidden: &[usize], seed: u64) -> Result<InitReport> {
    let arch = Architecture {
        input_dim: dim,
        hidden: hidden.to_vec(),
    };
    let config = InitConfig {
        scheme,
        perturb_std: 0.0,
        seed,
        ..InitConfig::default()
    };
    let params = initialize(&arch, &config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(4);
    let mut checks = Vec::new();
    match scheme {
        InitScheme::Standard => {
            let w = &params.layers[0].weight;
            let n = w.len() as f64;
            let mean = w.sum() / n;
            let std = (w.mapv(|v| (v - mean) * (v - mean)).sum() / n).sqrt();
            let unscaled = 1.0 / (dim as f64 * 3f64.sqrt());
            let ratio = std / unscaled;
            let ok = (ratio / config.omega_0 - 1.0).abs() <= 0.05;
            checks.push(check("first_layer_std_ratio", ratio, "within 5% of omega_0", ok));
        }
        InitScheme::Geometric | InitScheme::Mfgi => {
            let origin = params.forward(Array2::zeros((1, dim)).view())?[0];
            let err = (origin + config.sphere_radius).abs();
            let (cond, ok) = match scheme {
                InitScheme::Geometric => ("<= 1e-12", err <= 1e-12),
                _ => ("<= 0.05", err <= 0.05),
            };
            checks.push(check("origin_error", err, cond, ok));

            let ball = sample_unit_ball(10_000, dim, &mut rng);
            let errors = sphere_errors(&params, &ball)?;
            let max = errors.iter().copied().fold(0.0, f64::max);
            let med = median(errors);
            checks.push(check("sphere_error_median", med, "<= 0.05", med <= 0.05));
            checks.push(check("sphere_error_max", max, "<= 0.2", max <= 0.2));

            // Random layers only: the last hidden layer is the fixed quadratic one.
            let random = params.layers.len() - 1;
            for (i, layer) in params.layers[..random].iter().enumerate() {
                let w = &layer.weight;
                if scheme == InitScheme::Mfgi && i < 2 {
                    continue;
                }
                let mut sum = 0.0;
                for _ in 0..100 {
                    let mut x = Array1::from_shape_fn(w.ncols(), |_| rng.sample::<f64, _>(rand_distr::StandardNormal));
                    x /= x.dot(&x).sqrt();
                    let y = w.dot(&x);
                    sum += y.dot(&y).sqrt();
                }
                let gain = sum / 100.0;
                checks.push(check(
                    &format!("layer{i}_norm_gain"),
                    gain,
                    "in [0.9, 1.1]",
                    (0.9..=1.1).contains(&gain),
                ));
            }
            if scheme == InitScheme::Geometric {
                let frac = linear_fraction(&params, &ball.slice(ndarray::s![..1000, ..]).to_owned());
                checks.push(check("preact_below_half_fraction", frac, ">= 0.99", frac >= 0.99));
            }
            if dim == 2 {
                let grid = eval_grid(&params, &BBox::cube(2, BOX_HALF), 256)?;
                let contour = marching_squares(&grid)?;
                let comps = contour_components(&contour) as f64;
                checks.push(check("zero_set_components", comps, "== 1", comps == 1.0));
                let dev = contour
                    .vertices
                    .rows()
                    .into_iter()
                    .map(|v| (v.dot(&v).sqrt() - config.sphere_radius).abs())
                    .fold(0.0, f64::max);
                checks.push(check("zero_set_radius_deviation", dev, "<= 0.1", dev <= 0.1));
            }
        }
    }
    let pass = checks.iter().all(|c| c.pass);
    Ok(InitReport {
        scheme,
        input_dim: dim,
        hidden: hidden.to_vec(),
        checks,
        pass,
    })
}

/// Fraction of random-layer pre-activations with magnitude below 0.5.
fn linear_fraction(params: &SirenParams, points: &Array2<f64>) -> f64 {
    let mut h = points.t().to_owned();
    let (mut below, mut total) = (0usize, 0usize);
    for layer in &params.layers[..params.layers.len() - 1] {
        let a = layer.weight.dot(&h) + layer.bias.view().insert_axis(Axis(1));
        below += a.iter().filter(|v| v.abs() < 0.5).count();
        total += a.len();
        h = a.mapv(f64::sin);
    }
    below as f64 / total.max(1) as f64
}

pub fn cmd_init_check(scheme: InitScheme, dim: usize, cfg: &RunConfig) -> Result<InitReport> {
    let out = OutDir::create(&cfg.out_dir)?;
    let hidden = match &cfg.train {
        Some(t) => vec![t.width; t.hidden_layers],
        None => vec![128; 4],
    };
    let report = init_report(scheme, dim, &hidden, cfg.seed)?;
    write_json(&out.file("init_check.json")?, &report)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(report)
}
