//! Plain SVG output: scatter plots and heatmaps.
//!
//! Geometry, fixed so that output is stable byte for byte:
//! - phase heatmaps: 48 x 32 px cells, 70 px left margin, 40 px top, 50 px
//!   bottom, 110 px right (color bar). Columns are `gamma2`, rows `gamma3`
//!   with the largest value on top.
//! - matrix heatmaps: at most 200 x 200 blocks, each the mean of the entries it
//!   covers, drawn on a 600 x 600 px square.
//! - scatter plots: 500 x 500 px data area, equal scale on both axes.
//!
//! Colors: the diverging scale runs blue (negative) through white (0) to red
//! (positive) and is symmetric about 0; the sequential scale runs white to
//! dark blue over `[lo, hi]`. Missing cells are grey with a cross.

use std::fmt::Write;

use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ColorScale {
    /// symmetric about zero, `[-limit, limit]`
    Diverging { limit: f64 },
    Sequential { lo: f64, hi: f64 },
}

impl ColorScale {
    /// Diverging scale wide enough for every finite value (at least 1e-12).
    pub fn diverging_for(values: impl IntoIterator<Item = f64>) -> Self {
        let limit = values
            .into_iter()
            .filter(|v| v.is_finite())
            .fold(1e-12f64, |a, v| a.max(v.abs()));
        ColorScale::Diverging { limit }
    }

    pub fn color(&self, v: f64) -> String {
        match *self {
            ColorScale::Diverging { limit } => {
                let t = (v / limit).clamp(-1.0, 1.0);
                if t >= 0.0 {
                    rgb(lerp(255.0, 178.0, t), lerp(255.0, 24.0, t), lerp(255.0, 43.0, t))
                } else {
                    let t = -t;
                    rgb(lerp(255.0, 33.0, t), lerp(255.0, 102.0, t), lerp(255.0, 172.0, t))
                }
            }
            ColorScale::Sequential { lo, hi } => {
                let t = if hi > lo { ((v - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.0 };
                rgb(lerp(255.0, 8.0, t), lerp(255.0, 48.0, t), lerp(255.0, 107.0, t))
            }
        }
    }

    fn bounds(&self) -> (f64, f64) {
        match *self {
            ColorScale::Diverging { limit } => (-limit, limit),
            ColorScale::Sequential { lo, hi } => (lo, hi),
        }
    }
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

fn rgb(r: f64, g: f64, b: f64) -> String {
    format!("#{:02x}{:02x}{:02x}", r.round() as u8, g.round() as u8, b.round() as u8)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, w: f64, h: f64) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
}

/// Values on a `gamma2 x gamma3` grid, `values[i * ys.len() + j]` at `(xs[i], ys[j])`.
#[derive(Debug, Clone)]
pub struct Grid<'a> {
    pub xs: &'a [f64],
    pub ys: &'a [f64],
    pub values: &'a [Option<f64>],
}

const CELL_W: f64 = 48.0;
const CELL_H: f64 = 32.0;
const LEFT: f64 = 70.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const RIGHT: f64 = 110.0;

/// Position of `v` between the centres of the cells for the sorted `axis`,
/// extrapolated linearly beyond the ends.
fn axis_pos(axis: &[f64], v: f64) -> f64 {
    if axis.len() == 1 {
        return 0.0;
    }
    let k = axis
        .windows(2)
        .position(|w| v <= w[1])
        .unwrap_or(axis.len() - 2);
    k as f64 + (v - axis[k]) / (axis[k + 1] - axis[k])
}

/// Heatmap over the phase grid; `stars` are `(gamma2, gamma3)` points drawn on top.
pub fn phase_heatmap(grid: &Grid, scale: ColorScale, title: &str, stars: &[(f64, f64)]) -> String {
    let (nx, ny) = (grid.xs.len(), grid.ys.len());
    assert_eq!(grid.values.len(), nx * ny, "grid values do not match the axes");
    let w = LEFT + CELL_W * nx as f64 + RIGHT;
    let h = TOP + CELL_H * ny as f64 + BOTTOM;
    let mut s = String::new();
    header(&mut s, w, h);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title));
    for i in 0..nx {
        for j in 0..ny {
            let x = LEFT + CELL_W * i as f64;
            let y = TOP + CELL_H * (ny - 1 - j) as f64;
            match grid.values[i * ny + j] {
                Some(v) if v.is_finite() => {
                    let _ = writeln!(
                        s,
                        r#"<rect x="{x}" y="{y}" width="{CELL_W}" height="{CELL_H}" fill="{}"><title>{:.4}</title></rect>"#,
                        scale.color(v),
                        v
                    );
                }
                _ => {
                    let _ = writeln!(
                        s,
                        r##"<rect x="{x}" y="{y}" width="{CELL_W}" height="{CELL_H}" fill="#d0d0d0"/><path d="M{x} {y}l{CELL_W} {CELL_H}M{} {y}l-{CELL_W} {CELL_H}" stroke="#808080"/>"##,
                        x + CELL_W
                    );
                }
            }
        }
    }
    for (i, g) in grid.xs.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{g}</text>"#,
            LEFT + CELL_W * (i as f64 + 0.5),
            TOP + CELL_H * ny as f64 + 16.0
        );
    }
    for (j, g) in grid.ys.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{g}</text>"#,
            LEFT - 6.0,
            TOP + CELL_H * (ny as f64 - j as f64 - 0.5) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">gamma2</text>"#,
        LEFT + CELL_W * nx as f64 / 2.0,
        h - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">gamma3</text>"#,
        TOP + CELL_H * ny as f64 / 2.0,
        TOP + CELL_H * ny as f64 / 2.0
    );
    for &(g2, g3) in stars {
        let cx = LEFT + CELL_W * (axis_pos(grid.xs, g2) + 0.5);
        let cy = TOP + CELL_H * (ny as f64 - 0.5 - axis_pos(grid.ys, g3));
        let _ = writeln!(s, r##"<path d="{}" fill="#ffd700" stroke="black" stroke-width="0.8"/>"##, star_path(cx, cy, 7.0));
    }
    color_bar(&mut s, scale, LEFT + CELL_W * nx as f64 + 20.0, TOP, CELL_H * ny as f64);
    s.push_str("</svg>\n");
    s
}

fn star_path(cx: f64, cy: f64, r: f64) -> String {
    let mut d = String::new();
    for k in 0..10 {
        let rad = if k % 2 == 0 { r } else { r * 0.45 };
        let a = std::f64::consts::PI * (k as f64 / 5.0 - 0.5);
        let _ = write!(d, "{}{:.2} {:.2}", if k == 0 { "M" } else { "L" }, cx + rad * a.cos(), cy + rad * a.sin());
    }
    d.push('Z');
    d
}

fn color_bar(s: &mut String, scale: ColorScale, x: f64, y: f64, height: f64) {
    let steps = 32;
    let (lo, hi) = scale.bounds();
    let dh = height / steps as f64;
    for k in 0..steps {
        let v = hi - (hi - lo) * (k as f64 + 0.5) / steps as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{x}" y="{:.2}" width="16" height="{:.2}" fill="{}"/>"#,
            y + dh * k as f64,
            dh + 0.3,
            scale.color(v)
        );
    }
    for (v, yy) in [(hi, y + 4.0), (lo, y + height)] {
        let _ = writeln!(s, r#"<text x="{}" y="{yy}">{:.3}</text>"#, x + 22.0, v);
    }
}

/// Heatmap of a (cosine) matrix on the diverging scale `[-1, 1]`, averaged
/// down to at most 200 x 200 blocks.
pub fn matrix_heatmap(m: &Matrix, title: &str) -> String {
    const MAX_BLOCKS: usize = 200;
    const SIZE: f64 = 600.0;
    let (r, c) = m.shape();
    let br = r.clamp(1, MAX_BLOCKS);
    let bc = c.clamp(1, MAX_BLOCKS);
    let scale = ColorScale::Diverging { limit: 1.0 };
    let mut s = String::new();
    header(&mut s, SIZE + 140.0, SIZE + 60.0);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, SIZE / 2.0 + 20.0, escape(title));
    let (cw, ch) = (SIZE / bc as f64, SIZE / br as f64);
    for bi in 0..br {
        let (r0, r1) = (bi * r / br, ((bi + 1) * r / br).max(bi * r / br + 1).min(r));
        for bj in 0..bc {
            let (c0, c1) = (bj * c / bc, ((bj + 1) * c / bc).max(bj * c / bc + 1).min(c));
            if r0 >= r1 || c0 >= c1 {
                continue;
            }
            let mut sum = 0.0;
            for i in r0..r1 {
                sum += m.row(i)[c0..c1].iter().sum::<f64>();
            }
            let v = sum / ((r1 - r0) * (c1 - c0)) as f64;
            let _ = writeln!(
                s,
                r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="{}"/>"#,
                20.0 + cw * bj as f64,
                40.0 + ch * bi as f64,
                cw + 0.05,
                ch + 0.05,
                scale.color(v)
            );
        }
    }
    color_bar(&mut s, scale, SIZE + 40.0, 40.0, SIZE);
    s.push_str("</svg>\n");
    s
}

pub struct Series<'a> {
    pub label: &'a str,
    pub color: &'a str,
    pub points: &'a [(f64, f64)],
}

/// Scatter plot with equal scaling on both axes (directions stay undistorted)
/// and thin axes through the origin.
pub fn scatter(series: &[Series], title: &str, x_label: &str, y_label: &str) -> String {
    const SIZE: f64 = 500.0;
    const PAD: f64 = 60.0;
    let extent = series
        .iter()
        .flat_map(|s| s.points.iter())
        .filter(|p| p.0.is_finite() && p.1.is_finite())
        .fold(1e-12f64, |a, p| a.max(p.0.abs()).max(p.1.abs()))
        * 1.05;
    let map = |x: f64, y: f64| (PAD + SIZE * (x + extent) / (2.0 * extent), PAD + SIZE * (extent - y) / (2.0 * extent));
    let mut s = String::new();
    header(&mut s, SIZE + 2.0 * PAD + 100.0, SIZE + 2.0 * PAD);
    let _ = writeln!(s, r#"<text x="{}" y="30" text-anchor="middle" font-size="14">{}</text>"#, PAD + SIZE / 2.0, escape(title));
    let _ = writeln!(s, r##"<rect x="{PAD}" y="{PAD}" width="{SIZE}" height="{SIZE}" fill="none" stroke="#404040"/>"##);
    let (ox, oy) = map(0.0, 0.0);
    let _ = writeln!(
        s,
        r##"<path d="M{PAD} {oy:.2}h{SIZE}M{ox:.2} {PAD}v{SIZE}" stroke="#b0b0b0" stroke-dasharray="4 3"/>"##
    );
    for (k, ser) in series.iter().enumerate() {
        for &(x, y) in ser.points {
            if !(x.is_finite() && y.is_finite()) {
                continue;
            }
            let (px, py) = map(x, y);
            let _ = writeln!(s, r#"<circle cx="{px:.2}" cy="{py:.2}" r="2.5" fill="{}" fill-opacity="0.7"/>"#, ser.color);
        }
        let ly = PAD + 20.0 * k as f64 + 10.0;
        let _ = writeln!(s, r#"<circle cx="{}" cy="{ly}" r="4" fill="{}"/>"#, PAD + SIZE + 20.0, ser.color);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, PAD + SIZE + 30.0, ly + 4.0, escape(ser.label));
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        PAD + SIZE / 2.0,
        PAD + SIZE + 35.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{0}" text-anchor="middle" transform="rotate(-90 20 {0})">{1}</text>"#,
        PAD + SIZE / 2.0,
        escape(y_label)
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{:.3}</text>"#, PAD + SIZE, PAD + SIZE + 16.0, extent);
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn colors_hit_the_scale_ends() {
        let d = ColorScale::Diverging { limit: 2.0 };
        assert_eq!(d.color(0.0), "#ffffff");
        assert_eq!(d.color(2.0), "#b2182b");
        assert_eq!(d.color(-5.0), "#2166ac");
        let q = ColorScale::Sequential { lo: 0.0, hi: 1.0 };
        assert_eq!(q.color(0.0), "#ffffff");
        assert_eq!(q.color(1.0), "#08306b");
    }

    #[test]
    fn missing_cells_are_crossed() {
        let xs = [0.0, 0.5];
        let ys = [1.0];
        let vals = [Some(0.3), None];
        let svg = phase_heatmap(&Grid { xs: &xs, ys: &ys, values: &vals }, ColorScale::diverging_for([0.3]), "t", &[(0.25, 1.0)]);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("#d0d0d0").count(), 1);
        assert_eq!(svg.matches("#ffd700").count(), 1);
    }

    #[test]
    fn big_matrices_are_downsampled() {
        let m = Matrix::filled(450, 450, 1.0);
        let svg = matrix_heatmap(&m, "cos");
        let cells = svg.matches("<rect").count();
        // background + 200x200 blocks + 32 color bar steps
        assert_eq!(cells, 1 + 200 * 200 + 32);
    }

    #[test]
    fn star_positions_interpolate_between_centres() {
        assert_eq!(axis_pos(&[0.0, 1.0, 2.0], 1.5), 1.5);
        assert_eq!(axis_pos(&[0.0, 0.3, 0.6], 0.15), 0.5);
        assert_eq!(axis_pos(&[5.0], 5.0), 0.0);
    }
}
