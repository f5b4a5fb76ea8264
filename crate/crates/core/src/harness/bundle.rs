use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use plotters::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::FeMesh;
use crate::solvers::SolveTrace;

/// Header of a flat little-endian `f64` array file.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayHeader {
    pub shape: Vec<usize>,
    /// Sample spacing per axis (mm for maps, seconds along time).
    pub spacing: Vec<f64>,
    /// `elements`, `nodes` or `series`.
    pub layout: String,
}

const MAGIC: &str = "qpat-array 1";

pub fn write_array(path: &Path, header: &ArrayHeader, data: &[f64]) -> Result<()> {
    let n: usize = header.shape.iter().product();
    if n != data.len() {
        return Err(Error::LengthMismatch {
            what: "array payload",
            expected: n,
            got: data.len(),
        });
    }
    let join = |v: Vec<String>| v.join(" ");
    let mut buf = Vec::with_capacity(128 + 8 * n);
    writeln!(buf, "{MAGIC}").unwrap();
    writeln!(buf, "dtype f64le").unwrap();
    writeln!(buf, "layout {}", header.layout).unwrap();
    writeln!(buf, "shape {}", join(header.shape.iter().map(|s| s.to_string()).collect())).unwrap();
    writeln!(buf, "spacing {}", join(header.spacing.iter().map(|s| format!("{s:e}")).collect())).unwrap();
    writeln!(buf, "end").unwrap();
    for v in data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn read_array(path: &Path) -> Result<(ArrayHeader, Vec<f64>)> {
    let bad = |reason: &str| Error::Format {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut header = ArrayHeader {
        shape: Vec::new(),
        spacing: Vec::new(),
        layout: String::new(),
    };
    let mut line = String::new();
    let mut first = true;
    loop {
        line.clear();
        if r.read_line(&mut line).map_err(|e| Error::io(path, e))? == 0 {
            return Err(bad("header ended early"));
        }
        let l = line.trim_end();
        if first {
            if l != MAGIC {
                return Err(bad("not a qpat array"));
            }
            first = false;
            continue;
        }
        if l == "end" {
            break;
        }
        let (key, rest) = l.split_once(' ').unwrap_or((l, ""));
        match key {
            "dtype" if rest == "f64le" => {}
            "dtype" => return Err(bad("unsupported dtype")),
            "layout" => header.layout = rest.to_string(),
            "shape" => {
                header.shape = rest
                    .split_whitespace()
                    .map(|s| s.parse().map_err(|_| bad("bad shape")))
                    .collect::<Result<_>>()?
            }
            "spacing" => {
                header.spacing = rest
                    .split_whitespace()
                    .map(|s| s.parse().map_err(|_| bad("bad spacing")))
                    .collect::<Result<_>>()?
            }
            _ => return Err(bad("unknown header key")),
        }
    }
    let n: usize = header.shape.iter().product();
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    if bytes.len() != 8 * n {
        return Err(bad("payload size does not match shape"));
    }
    let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((header, data))
}

/// Header for per-element values of a structured mesh.
pub fn element_header(mesh: &FeMesh) -> ArrayHeader {
    ArrayHeader {
        shape: vec![mesh.num_elements()],
        spacing: mesh.spacing().to_vec(),
        layout: "elements".into(),
    }
}

/// Nodal map on a grid domain, first axis fastest.
pub fn node_header(dims: &[usize], spacing: &[f64]) -> ArrayHeader {
    ArrayHeader {
        shape: dims.iter().rev().copied().collect(),
        spacing: spacing.iter().rev().copied().collect(),
        layout: "nodes".into(),
    }
}

/// Per-pixel image (mean over the simplices of a cell) of element values.
/// 3D meshes show the middle slice along the last axis. Returns
/// `(width, height, values)` with the first axis along the width.
pub fn cell_image(mesh: &FeMesh, values: &[f64]) -> (usize, usize, Vec<f64>) {
    let cells: Vec<usize> = mesh.node_dims().iter().map(|n| n - 1).collect();
    let per = mesh.elements_per_cell();
    let (w, h) = (cells[0], cells[1]);
    let offset = if cells.len() == 3 { (cells[2] / 2) * w * h } else { 0 };
    let img = (0..w * h)
        .map(|c| {
            let base = (offset + c) * per;
            values[base..base + per].iter().sum::<f64>() / per as f64
        })
        .collect();
    (w, h, img)
}

fn plot_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        reason: format!("plot rendering failed: {e}"),
    }
}

/// Line plot of one or more labelled series against iteration number.
pub fn plot_series(path: &Path, title: &str, y_label: &str, series: &[(&str, Vec<(f64, f64)>)], log_y: bool) -> Result<()> {
    let root = SVGBackend::new(path, (640, 420)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot_err(path, e))?;
    let pts = series.iter().flat_map(|(_, s)| s.iter());
    let xmax = pts.clone().map(|p| p.0).fold(1.0, f64::max);
    let tf = |v: f64| if log_y { v.max(f64::MIN_POSITIVE).log10() } else { v };
    let (mut ylo, mut yhi) = pts
        .map(|p| tf(p.1))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !ylo.is_finite() {
        (ylo, yhi) = (0.0, 1.0);
    }
    if yhi - ylo < 1e-12 {
        yhi = ylo + 1.0;
    }
    let pad = 0.05 * (yhi - ylo);
    let label = if log_y { format!("log10 {y_label}") } else { y_label.to_string() };
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(56)
        .build_cartesian_2d(0.0..xmax, (ylo - pad)..(yhi + pad))
        .map_err(|e| plot_err(path, e))?;
    chart
        .configure_mesh()
        .x_desc("outer iteration")
        .y_desc(label)
        .draw()
        .map_err(|e| plot_err(path, e))?;
    let colours = [RED, BLUE, GREEN, BLACK];
    for (k, (name, s)) in series.iter().enumerate() {
        let colour = colours[k % colours.len()];
        chart
            .draw_series(LineSeries::new(s.iter().map(|&(x, y)| (x, tf(y))), colour.stroke_width(2)))
            .map_err(|e| plot_err(path, e))?
            .label(*name)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], colour));
        chart
            .draw_series(s.iter().map(|&(x, y)| Circle::new((x, tf(y)), 3, colour.filled())))
            .map_err(|e| plot_err(path, e))?;
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| plot_err(path, e))?;
    root.present().map_err(|e| plot_err(path, e))
}

/// A panel of a heat-map figure: title and `(width, height, values)`.
pub type Panel = (String, (usize, usize, Vec<f64>));

fn heat_colour(t: f64) -> RGBColor {
    // piecewise-linear dark blue → cyan → yellow → dark red
    let stops = [(0.0, (0, 0, 128)), (0.35, (0, 200, 255)), (0.65, (255, 230, 0)), (1.0, (128, 0, 0))];
    let t = t.clamp(0.0, 1.0);
    for w in stops.windows(2) {
        let ((t0, a), (t1, b)) = (w[0], w[1]);
        if t <= t1 {
            let s = (t - t0) / (t1 - t0);
            let mix = |x: u8, y: u8| (x as f64 + s * (y as f64 - x as f64)).round() as u8;
            return RGBColor(mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2));
        }
    }
    RGBColor(128, 0, 0)
}

/// Rows of heat maps; every row shares one colour scale, printed in its
/// panel titles.
pub fn plot_maps(path: &Path, rows: &[Vec<Panel>]) -> Result<()> {
    let cols = rows.iter().map(|r| r.len()).max().unwrap_or(1);
    let size = 300u32;
    let root = SVGBackend::new(path, (size * cols as u32, (size + 20) * rows.len() as u32)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot_err(path, e))?;
    let areas = root.split_evenly((rows.len(), cols));
    for (r, row) in rows.iter().enumerate() {
        let all = row.iter().flat_map(|p| p.1 .2.iter().copied());
        let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        let span = if hi > lo { hi - lo } else { 1.0 };
        for (c, (title, (w, h, vals))) in row.iter().enumerate() {
            let area = &areas[r * cols + c];
            let caption = format!("{title} [{lo:.3}, {hi:.3}]");
            let mut chart = ChartBuilder::on(area)
                .caption(caption, ("sans-serif", 14))
                .margin(6)
                .build_cartesian_2d(0..*w, 0..*h)
                .map_err(|e| plot_err(path, e))?;
            chart
                .draw_series((0..w * h).map(|k| {
                    let (i, j) = (k % w, k / w);
                    let colour = heat_colour((vals[k] - lo) / span);
                    Rectangle::new([(i, j), (i + 1, j + 1)], colour.filled())
                }))
                .map_err(|e| plot_err(path, e))?;
        }
    }
    root.present().map_err(|e| plot_err(path, e))
}

/// Writes the trace CSV and the RE and ε plots of one run.
pub fn write_trace_outputs(dir: &Path, trace: &SolveTrace) -> Result<()> {
    let csv_path = dir.join("trace.csv");
    let file = std::fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    trace.write_csv(std::io::BufWriter::new(file))?;
    let acc: Vec<_> = trace.accepted().collect();
    let re_mu = acc.iter().map(|r| (r.iteration as f64, r.re_mu)).collect();
    let re_kappa = acc.iter().map(|r| (r.iteration as f64, r.re_kappa)).collect();
    plot_series(&dir.join("re.svg"), "relative error", "RE (%)", &[("mu", re_mu), ("kappa", re_kappa)], false)?;
    let eps = acc.iter().map(|r| (r.iteration as f64, r.epsilon)).collect();
    plot_series(&dir.join("epsilon.svg"), "data misfit", "epsilon", &[("epsilon", eps)], true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn array_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.f64");
        let h = ArrayHeader {
            shape: vec![2, 3],
            spacing: vec![0.5, 1e-8],
            layout: "series".into(),
        };
        let data = vec![1.0, -2.5, 3.0, f64::MIN_POSITIVE, 0.0, 1e300];
        write_array(&p, &h, &data).unwrap();
        let (h2, d2) = read_array(&p).unwrap();
        assert_eq!(h2, h);
        assert_eq!(d2, data);
        let mut bytes = std::fs::read(&p).unwrap();
        bytes.pop();
        std::fs::write(&p, bytes).unwrap();
        assert!(read_array(&p).unwrap_err().is_config_error());
    }

    #[test]
    fn cell_image_averages_pixel_halves() {
        let mesh = FeMesh::structured(&[3, 4], &[1.0, 1.0], &[0.0, 0.0]).unwrap();
        let vals: Vec<f64> = (0..mesh.num_elements()).map(|e| e as f64).collect();
        let (w, h, img) = cell_image(&mesh, &vals);
        assert_eq!((w, h), (2, 3));
        assert_eq!(img[0], 0.5);
        assert_eq!(img[5], 10.5);
    }

    #[test]
    fn plots_render() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.svg");
        plot_series(&p, "t", "y", &[("a", vec![(1.0, 2.0), (2.0, 1.0)])], true).unwrap();
        assert!(std::fs::read_to_string(&p).unwrap().contains("<svg"));
        let m = dir.path().join("m.svg");
        let panel = |v: f64| ("p".to_string(), (2, 2, vec![v, 1.0, 2.0, 3.0]));
        plot_maps(&m, &[vec![panel(0.0), panel(1.0)]]).unwrap();
        assert!(std::fs::metadata(&m).unwrap().len() > 100);
    }
}
