//! Prediction exporters: CSV in the loader's format and SVG stick figures.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::motion::MotionSequence;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const PANEL: f64 = 160.0;
pub const MARGIN: f64 = 12.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Svg,
}

/// Maps world `(x, y)` into one square panel per frame, laid out left to right.
///
/// All frames share one scale so motion between panels stays comparable;
/// the y axis points up.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SvgLayout {
    pub min_x: f64,
    pub min_y: f64,
    pub scale: f64,
    pub frames: usize,
}

impl SvgLayout {
    pub fn fit(points: impl IntoIterator<Item = (f64, f64)>, frames: usize) -> Self {
        let (mut lo_x, mut lo_y, mut hi_x, mut hi_y) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for (x, y) in points {
            lo_x = lo_x.min(x);
            lo_y = lo_y.min(y);
            hi_x = hi_x.max(x);
            hi_y = hi_y.max(y);
        }
        if !lo_x.is_finite() {
            (lo_x, lo_y, hi_x, hi_y) = (0.0, 0.0, 0.0, 0.0);
        }
        let span = (hi_x - lo_x).max(hi_y - lo_y);
        let scale = if span > 0.0 { (PANEL - 2.0 * MARGIN) / span } else { 1.0 };
        Self { min_x: lo_x, min_y: lo_y, scale, frames }
    }

    pub fn map(&self, frame: usize, x: f64, y: f64) -> (f64, f64) {
        let px = frame as f64 * PANEL + MARGIN + (x - self.min_x) * self.scale;
        let py = PANEL - MARGIN - (y - self.min_y) * self.scale;
        (px, py)
    }

    pub fn width(&self) -> f64 {
        self.frames as f64 * PANEL
    }
}

fn check_pose(t: &Tensor<f32>, what: &str) -> Result<(usize, usize)> {
    match *t.shape() {
        [n, frames, 3] => Ok((n, frames)),
        ref s => Err(Error::shape("export", format!("{what} must be [N, T, 3], got {s:?}"))),
    }
}

/// Renders prediction (solid) and optional ground truth (dashed) stick figures.
pub fn render_svg(pred: &Tensor<f32>, truth: Option<&Tensor<f32>>, edges: &[(usize, usize)]) -> Result<String> {
    let (n, frames) = check_pose(pred, "prediction")?;
    if let Some(t) = truth {
        if t.shape() != pred.shape() {
            return Err(Error::shapes("export", pred.shape(), t.shape()));
        }
    }
    if let Some(&(a, b)) = edges.iter().find(|&&(a, b)| a >= n || b >= n) {
        return Err(Error::Input(format!("edge ({a}, {b}) references a joint outside 0..{n}")));
    }
    let point = |t: &Tensor<f32>, j: usize, f: usize| {
        let i = (j * frames + f) * 3;
        (t.data()[i] as f64, t.data()[i + 1] as f64)
    };
    let all = std::iter::once(pred).chain(truth);
    let layout = SvgLayout::fit(
        all.flat_map(|t| (0..n).flat_map(move |j| (0..frames).map(move |f| (j, f))).map(move |(j, f)| point(t, j, f))),
        frames,
    );

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = layout.width(),
        h = PANEL
    )
    .expect("String write");
    let mut figure = |t: &Tensor<f32>, class: &str, stroke: &str, dash: &str| {
        writeln!(svg, r#"<g class="{class}" stroke="{stroke}" fill="{stroke}"{dash}>"#).expect("String write");
        for f in 0..frames {
            for &(a, b) in edges {
                let (x1, y1) = layout.map(f, point(t, a, f).0, point(t, a, f).1);
                let (x2, y2) = layout.map(f, point(t, b, f).0, point(t, b, f).1);
                writeln!(svg, r#"<line x1="{x1:.3}" y1="{y1:.3}" x2="{x2:.3}" y2="{y2:.3}" stroke-width="2"/>"#)
                    .expect("String write");
            }
            for j in 0..n {
                let (cx, cy) = layout.map(f, point(t, j, f).0, point(t, j, f).1);
                writeln!(svg, r#"<circle class="{class}-joint" cx="{cx:.3}" cy="{cy:.3}" r="3"/>"#).expect("String write");
            }
        }
        svg.push_str("</g>\n");
    };
    if let Some(t) = truth {
        figure(t, "truth", "#888888", r#" stroke-dasharray="4 3""#);
    }
    figure(pred, "pred", "#c0392b", "");
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Writes `pred` as CSV (same format the loader reads) or as an SVG strip.
pub fn export(
    pred: &Tensor<f32>,
    truth: Option<&Tensor<f32>>,
    format: ExportFormat,
    edges: &[(usize, usize)],
    fps: f64,
    path: impl AsRef<Path>,
) -> Result<()> {
    let body = match format {
        ExportFormat::Csv => {
            check_pose(pred, "prediction")?;
            MotionSequence::from_tensor(pred, fps)?.to_csv()
        }
        ExportFormat::Svg => render_svg(pred, truth, edges)?,
    };
    fs::write(path, body)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_edge_is_rejected() {
        let pred = Tensor::<f32>::zeros(&[2, 3, 3]);
        assert!(matches!(render_svg(&pred, None, &[(0, 2)]), Err(Error::Input(_))));
    }

    #[test]
    fn layout_uses_shared_scale() {
        let l = SvgLayout::fit([(0.0, 0.0), (10.0, 5.0)], 2);
        assert_eq!(l.map(0, 0.0, 0.0), (MARGIN, PANEL - MARGIN));
        assert_eq!(l.map(1, 10.0, 0.0), (PANEL + PANEL - MARGIN, PANEL - MARGIN));
    }
}
