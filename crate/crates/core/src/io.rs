//! File formats: point-cloud readers, PLY/CSV/PPM writers, and parameter checkpoints.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::siren::{ParamBuffers, SineLayer, SirenParams};

const CHECKPOINT_MAGIC: &[u8; 8] = b"DIGSCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Read a point cloud, picking the parser from the file extension
/// (`.xyz`, `.ply`, or `.csv` for 2D).
pub fn read_cloud(path: &Path) -> Result<PointCloud> {
    let text = fs::read_to_string(path)?;
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    match ext.as_str() {
        "xyz" | "txt" => parse_xyz(&text),
        "ply" => parse_ply(&text),
        "csv" => parse_csv2d(&text),
        other => Err(Error::input(format!("unsupported point cloud extension {other:?}"))),
    }
}

/// Whitespace-separated `x y z` or `x y z nx ny nz` rows. Blank lines and `#` comments are skipped.
pub fn parse_xyz(text: &str) -> Result<PointCloud> {
    let rows = numeric_rows(text.lines(), |l| l.split_whitespace().collect())?;
    cloud_from_rows(rows, 3)
}

/// `x,y` or `x,y,nx,ny` rows; a non-numeric first line is taken as a header.
pub fn parse_csv2d(text: &str) -> Result<PointCloud> {
    let mut lines = text.lines().peekable();
    if let Some(first) = lines.peek() {
        if first.split(',').next().is_some_and(|t| t.trim().parse::<f64>().is_err()) {
            lines.next();
        }
    }
    let rows = numeric_rows(lines, |l| l.split(',').collect())?;
    cloud_from_rows(rows, 2)
}

fn numeric_rows<'a, I, F>(lines: I, split: F) -> Result<Vec<Vec<f64>>>
where
    I: Iterator<Item = &'a str>,
    F: Fn(&'a str) -> Vec<&'a str>,
{
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = split(line)
            .into_iter()
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::input(format!("line {}: {e}", i + 1)))?;
        rows.push(row);
    }
    Ok(rows)
}

fn cloud_from_rows(rows: Vec<Vec<f64>>, dim: usize) -> Result<PointCloud> {
    if rows.is_empty() {
        return Err(Error::input("point cloud is empty"));
    }
    let width = rows[0].len();
    if width != dim && width != 2 * dim {
        return Err(Error::input(format!("expected {dim} or {} columns, found {width}", 2 * dim)));
    }
    if let Some(bad) = rows.iter().position(|r| r.len() != width) {
        return Err(Error::input(format!("row {} has {} columns, expected {width}", bad + 1, rows[bad].len())));
    }
    let n = rows.len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    if flat.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("point cloud contains non-finite values"));
    }
    let all = Array2::from_shape_vec((n, width), flat).expect("row widths checked");
    let mut cloud = PointCloud::new(all.slice(ndarray::s![.., ..dim]).to_owned());
    if width == 2 * dim {
        let mut normals = all.slice(ndarray::s![.., dim..]).to_owned();
        unit_rows(&mut normals)?;
        cloud.normals = Some(normals);
    }
    Ok(cloud)
}

fn unit_rows(normals: &mut Array2<f64>) -> Result<()> {
    for (i, mut row) in normals.rows_mut().into_iter().enumerate() {
        let norm = row.dot(&row).sqrt();
        if norm < 1e-12 {
            return Err(Error::input(format!("normal {} has zero length", i + 1)));
        }
        row.mapv_inplace(|v| v / norm);
    }
    Ok(())
}

/// ASCII PLY with a `vertex` element carrying `x y z` and optionally `nx ny nz`.
/// Other vertex properties and elements are ignored.
pub fn parse_ply(text: &str) -> Result<PointCloud> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(Error::input("missing ply magic"));
    }
    let mut vertex_count = None;
    let mut props: Vec<String> = Vec::new();
    let mut in_vertex = false;
    let mut skip_before = 0usize;
    loop {
        let line = lines.next().ok_or_else(|| Error::input("ply header not terminated"))?.trim();
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            ["format", fmt, ..] if *fmt != "ascii" => {
                return Err(Error::input(format!("only ascii ply is supported, found {fmt}")))
            }
            ["element", "vertex", n] => {
                vertex_count = Some(n.parse::<usize>().map_err(|e| Error::input(format!("vertex count: {e}")))?);
                in_vertex = true;
            }
            ["element", _, n] => {
                if vertex_count.is_none() {
                    skip_before += n.parse::<usize>().map_err(|e| Error::input(format!("element count: {e}")))?;
                }
                in_vertex = false;
            }
            ["property", "list", ..] if in_vertex => return Err(Error::input("list properties on vertices are not supported")),
            ["property", _, name] if in_vertex => props.push((*name).to_string()),
            ["end_header"] => break,
            _ => {}
        }
    }
    let n = vertex_count.ok_or_else(|| Error::input("ply has no vertex element"))?;
    let col = |name: &str| props.iter().position(|p| p == name);
    let xyz = ["x", "y", "z"].map(col);
    let nxyz = ["nx", "ny", "nz"].map(col);
    if xyz.iter().any(Option::is_none) {
        return Err(Error::input("ply vertices lack x/y/z"));
    }
    let has_normals = nxyz.iter().all(Option::is_some);
    let mut points = Array2::zeros((n, 3));
    let mut normals = Array2::zeros((n, 3));
    let mut data = lines.map(str::trim).filter(|l| !l.is_empty()).skip(skip_before);
    for i in 0..n {
        let line = data.next().ok_or_else(|| Error::input(format!("ply ends after {i} of {n} vertices")))?;
        let vals = line
            .split_whitespace()
            .map(str::parse::<f64>)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::input(format!("vertex {}: {e}", i + 1)))?;
        if vals.len() < props.len() {
            return Err(Error::input(format!("vertex {} has {} values, expected {}", i + 1, vals.len(), props.len())));
        }
        for a in 0..3 {
            points[[i, a]] = vals[xyz[a].expect("checked")];
            if has_normals {
                normals[[i, a]] = vals[nxyz[a].expect("checked")];
            }
        }
    }
    if points.iter().chain(normals.iter()).any(|v| !v.is_finite()) {
        return Err(Error::input("ply contains non-finite values"));
    }
    let mut cloud = PointCloud::new(points);
    if has_normals {
        unit_rows(&mut normals)?;
        cloud.normals = Some(normals);
    }
    Ok(cloud)
}

/// ASCII PLY triangle mesh, with an optional per-vertex `quality` scalar.
pub fn write_ply_mesh(path: &Path, vertices: ArrayView2<'_, f64>, faces: &[[usize; 3]], quality: Option<&[f64]>) -> Result<()> {
    if vertices.ncols() != 3 {
        return Err(Error::config("mesh vertices must be 3D"));
    }
    if let Some(q) = quality {
        if q.len() != vertices.nrows() {
            return Err(Error::config("quality length differs from vertex count"));
        }
    }
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "ply\nformat ascii 1.0\nelement vertex {}", vertices.nrows())?;
    writeln!(w, "property double x\nproperty double y\nproperty double z")?;
    if quality.is_some() {
        writeln!(w, "property double quality")?;
    }
    writeln!(w, "element face {}\nproperty list uchar int vertex_indices\nend_header", faces.len())?;
    for (i, v) in vertices.rows().into_iter().enumerate() {
        write!(w, "{} {} {}", v[0], v[1], v[2])?;
        if let Some(q) = quality {
            write!(w, " {}", q[i])?;
        }
        writeln!(w)?;
    }
    for f in faces {
        writeln!(w, "3 {} {} {}", f[0], f[1], f[2])?;
    }
    w.flush()?;
    Ok(())
}

/// One line segment per row: `x0,y0,x1,y1`.
pub fn write_segments_csv(path: &Path, vertices: ArrayView2<'_, f64>, segments: &[[usize; 2]]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "x0,y0,x1,y1")?;
    for s in segments {
        let (a, b) = (vertices.row(s[0]), vertices.row(s[1]));
        writeln!(w, "{},{},{},{}", a[0], a[1], b[0], b[1])?;
    }
    w.flush()?;
    Ok(())
}

/// Rows of comma-separated values under a header line.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{}", header.join(","))?;
    for r in rows {
        let cells: Vec<String> = r.iter().map(f64::to_string).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// 8-bit RGB image, rows top to bottom.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<[u8; 3]>,
}

/// Colormap for scalar heatmaps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Colormap {
    /// Blue (negative) through white to red (positive), symmetric around zero.
    Diverging,
    /// White (zero) to dark red (maximum).
    Sequential,
}

impl Raster {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            rgb: vec![[255; 3]; width * height],
        }
    }

    /// Heatmap of a row-major `nx x ny` grid (x fastest), flipped so +y is up.
    pub fn heatmap(values: &[f64], nx: usize, ny: usize, map: Colormap) -> Self {
        assert_eq!(values.len(), nx * ny, "heatmap size");
        let range = values.iter().filter(|v| v.is_finite()).fold(0.0f64, |m, v| m.max(v.abs()));
        let range = if range > 0.0 { range } else { 1.0 };
        let mut img = Raster::new(nx, ny);
        for j in 0..ny {
            for i in 0..nx {
                img.rgb[(ny - 1 - j) * nx + i] = colorize(values[j * nx + i] / range, map);
            }
        }
        img
    }

    /// Draw a segment given in pixel coordinates (y up), clipped to the image.
    pub fn draw_line(&mut self, a: [f64; 2], b: [f64; 2], color: [u8; 3]) {
        let steps = ((b[0] - a[0]).abs().max((b[1] - a[1]).abs()).ceil() as usize).max(1);
        for s in 0..=steps {
            let t = s as f64 / steps as f64;
            let x = (a[0] + t * (b[0] - a[0])).round();
            let y = (a[1] + t * (b[1] - a[1])).round();
            if x >= 0.0 && y >= 0.0 && (x as usize) < self.width && (y as usize) < self.height {
                let row = self.height - 1 - y as usize;
                self.rgb[row * self.width + x as usize] = color;
            }
        }
    }

    pub fn write_ppm(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(fs::File::create(path)?);
        write!(w, "P6\n{} {}\n255\n", self.width, self.height)?;
        for px in &self.rgb {
            w.write_all(px)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Map `v` in `[-1, 1]` (diverging) or `[0, 1]` (sequential) to RGB.
pub fn colorize(v: f64, map: Colormap) -> [u8; 3] {
    if !v.is_finite() {
        return [0, 0, 0];
    }
    let to8 = |x: f64| (x.clamp(0.0, 1.0) * 255.0).round() as u8;
    match map {
        Colormap::Diverging => {
            let v = v.clamp(-1.0, 1.0);
            if v >= 0.0 {
                [255, to8(1.0 - v), to8(1.0 - v)]
            } else {
                [to8(1.0 + v), to8(1.0 + v), 255]
            }
        }
        Colormap::Sequential => {
            let v = v.abs().clamp(0.0, 1.0);
            [to8(1.0 - 0.45 * v), to8(1.0 - v), to8(1.0 - v)]
        }
    }
}

/// JSON header stored ahead of the raw parameter arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub apply_nu: bool,
    pub sphere_radius: f64,
    pub seed: u64,
    pub param_count: usize,
}

/// Write `magic | u32 header length | JSON header | f64 LE parameters`.
/// Parameters are ordered per layer as W (row-major) then b, followed by the output weights and bias.
pub fn save_checkpoint(path: &Path, params: &SirenParams, seed: u64) -> Result<()> {
    let arch = params.architecture();
    let header = CheckpointHeader {
        format_version: CHECKPOINT_VERSION,
        input_dim: arch.input_dim,
        hidden: arch.hidden,
        apply_nu: params.apply_nu,
        sphere_radius: params.sphere_radius,
        seed,
        param_count: params.len_flat(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut bytes = Vec::with_capacity(12 + json.len() + 8 * header.param_count);
    bytes.extend_from_slice(CHECKPOINT_MAGIC);
    bytes.extend_from_slice(&(json.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&json);
    for v in params.to_flat() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    // Write then rename so an interrupted save never leaves a truncated file.
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, &bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(SirenParams, CheckpointHeader)> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_checkpoint(&bytes)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(SirenParams, CheckpointHeader)> {
    if bytes.len() < 12 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(Error::Version("not a checkpoint file".into()));
    }
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let body = bytes.get(12..12 + hlen).ok_or_else(|| Error::Version("truncated header".into()))?;
    let header: CheckpointHeader =
        serde_json::from_slice(body).map_err(|e| Error::Version(format!("unreadable header: {e}")))?;
    if header.format_version != CHECKPOINT_VERSION {
        return Err(Error::Version(format!(
            "format {} (expected {CHECKPOINT_VERSION})",
            header.format_version
        )));
    }
    let arch = crate::siren::Architecture {
        input_dim: header.input_dim,
        hidden: header.hidden.clone(),
    };
    arch.validate().map_err(|e| Error::Version(e.to_string()))?;
    if arch.param_count() != header.param_count {
        return Err(Error::Version(format!(
            "header declares {} parameters, architecture has {}",
            header.param_count,
            arch.param_count()
        )));
    }
    let data = &bytes[12 + hlen..];
    if data.len() != 8 * header.param_count {
        return Err(Error::Version(format!(
            "expected {} parameter bytes, found {}",
            8 * header.param_count,
            data.len()
        )));
    }
    let mut fan_in = arch.input_dim;
    let layers = arch
        .hidden
        .iter()
        .map(|&w| {
            let l = SineLayer {
                weight: Array2::zeros((w, fan_in)),
                bias: Array1::zeros(w),
            };
            fan_in = w;
            l
        })
        .collect();
    let mut params = SirenParams {
        layers,
        out_weight: Array1::zeros(fan_in),
        out_bias: 0.0,
        input_dim: arch.input_dim,
        apply_nu: header.apply_nu,
        sphere_radius: header.sphere_radius,
    };
    for (i, chunk) in data.chunks_exact(8).enumerate() {
        params.set_flat(i, f64::from_le_bytes(chunk.try_into().expect("8 bytes")));
    }
    Ok((params, header))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::init::{initialize, InitConfig};
    use crate::siren::Architecture;

    #[test]
    fn xyz_with_and_without_normals() {
        let c = parse_xyz("# comment\n0 0 0\n1 2 3\n").unwrap();
        assert_eq!(c.len(), 2);
        assert!(c.normals.is_none());
        let c = parse_xyz("0 0 0 0 0 2\n1 1 1 3 0 4\n").unwrap();
        let n = c.normals.unwrap();
        assert_eq!(n.row(0).to_vec(), vec![0.0, 0.0, 1.0]);
        assert!((n[[1, 0]] - 0.6).abs() < 1e-15 && (n[[1, 2]] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn malformed_inputs_are_input_errors() {
        for text in ["", "1 2\n", "1 2 3\n1 2\n", "1 2 x\n", "1 2 nan\n", "0 0 0 0 0 0\n"] {
            assert!(matches!(parse_xyz(text), Err(Error::Input(_))), "{text:?}");
        }
        assert!(matches!(parse_ply("plyx\n"), Err(Error::Input(_))));
    }

    #[test]
    fn csv_header_is_optional() {
        let a = parse_csv2d("x,y,nx,ny\n1,0,1,0\n0,1,0,1\n").unwrap();
        let b = parse_csv2d("1,0,1,0\n0,1,0,1\n").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.dim(), 2);
    }

    #[test]
    fn ply_reads_selected_properties() {
        let text = "ply\nformat ascii 1.0\ncomment x\nelement vertex 2\nproperty float x\nproperty float y\n\
                    property float z\nproperty float red\nproperty float nx\nproperty float ny\nproperty float nz\n\
                    element face 0\nproperty list uchar int vertex_indices\nend_header\n\
                    1 2 3 9 0 0 1\n4 5 6 9 1 0 0\n";
        let c = parse_ply(text).unwrap();
        assert_eq!(c.points.row(1).to_vec(), vec![4.0, 5.0, 6.0]);
        assert_eq!(c.normals.unwrap().row(0).to_vec(), vec![0.0, 0.0, 1.0]);
        assert!(parse_ply(&text.replace("ascii", "binary_little_endian")).is_err());
    }

    #[test]
    fn written_mesh_reads_back_as_vertices() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ply");
        let v = ndarray::array![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        write_ply_mesh(&path, v.view(), &[[0, 1, 2]], Some(&[0.1, 0.2, 0.3])).unwrap();
        let c = read_cloud(&path).unwrap();
        assert_eq!(c.points, v);
    }

    #[test]
    fn checkpoint_preserves_every_bit() {
        let arch = Architecture::uniform(3, 3, 7);
        let p = initialize(&arch, &InitConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.ckpt");
        save_checkpoint(&path, &p, 42).unwrap();
        let (q, h) = load_checkpoint(&path).unwrap();
        assert_eq!(p, q);
        assert_eq!(h.seed, 42);
        assert_eq!(h.param_count, arch.param_count());
    }

    #[test]
    fn checkpoint_mismatches_are_version_errors() {
        let arch = Architecture::uniform(2, 2, 4);
        let p = initialize(&arch, &InitConfig { scheme: crate::init::InitScheme::Standard, ..InitConfig::default() }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.ckpt");
        save_checkpoint(&path, &p, 0).unwrap();
        let good = fs::read(&path).unwrap();

        let mut truncated = good.clone();
        truncated.pop();
        assert!(matches!(decode_checkpoint(&truncated), Err(Error::Version(_))));

        let text = String::from_utf8_lossy(&good[12..]).into_owned();
        let bumped = text.replacen("\"format_version\":1", "\"format_version\":2", 1);
        let mut other = good[..12].to_vec();
        other.extend_from_slice(bumped.as_bytes());
        assert!(matches!(decode_checkpoint(&other), Err(Error::Version(_))));

        assert!(matches!(decode_checkpoint(b"NOTACKPT...."), Err(Error::Version(_))));
    }

    #[test]
    fn diverging_map_is_symmetric() {
        assert_eq!(colorize(0.0, Colormap::Diverging), [255, 255, 255]);
        let [r, g, b] = colorize(0.5, Colormap::Diverging);
        assert_eq!(colorize(-0.5, Colormap::Diverging), [b, g, r]);
    }

    #[test]
    fn ppm_has_expected_size() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.ppm");
        let mut img = Raster::heatmap(&[-1.0, 0.0, 0.5, 1.0, 2.0, -2.0], 3, 2, Colormap::Diverging);
        img.draw_line([0.0, 0.0], [2.0, 1.0], [0, 0, 0]);
        img.write_ppm(&path).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert!(bytes.starts_with(b"P6\n3 2\n255\n"));
        assert_eq!(bytes.len(), 11 + 18);
    }
}
