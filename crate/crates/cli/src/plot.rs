//! SVG and CSV rendering of saved bundles.

use std::fmt::Write;

use chainset::convex::AffineSetSum;
use serde_json::Value;

use crate::bundle::ResultBundle;
use crate::CliError;

pub struct Style {
    pub size_px: f64,
    /// The viewport is `[-view, view]²`.
    pub view: f64,
    pub background: &'static str,
    pub axis: &'static str,
    pub fill: &'static str,
    pub fill_opacity: f64,
    pub stroke: &'static str,
    pub stroke_width: f64,
    pub point: &'static str,
    pub point_radius: f64,
    /// Half-length of the segment drawn for each subspace direction.
    pub far: f64,
}

pub const STYLE: Style = Style {
    size_px: 600.0,
    view: 3.0,
    background: "#ffffff",
    axis: "#b0b0b0",
    fill: "#4c72b0",
    fill_opacity: 0.35,
    stroke: "#1f3b73",
    stroke_width: 1.5,
    point: "#c44e52",
    point_radius: 2.0,
    far: 100.0,
};

/// What a bundle draws as.
#[derive(Debug, Clone, PartialEq)]
pub enum Figure {
    /// Closed polygon (possibly degenerate), already clipped to the viewport.
    Polygon(Vec<[f64; 2]>),
    Scatter(Vec<[f64; 2]>),
}

fn project(p: &[f64], axes: (usize, usize)) -> Result<[f64; 2], CliError> {
    match (p.get(axes.0), p.get(axes.1)) {
        (Some(&x), Some(&y)) => Ok([x, y]),
        _ => Err(CliError::NotPlottable(format!(
            "projection axes {},{} out of range for dimension {}",
            axes.0,
            axes.1,
            p.len()
        ))),
    }
}

fn axes_for(n: usize, project_axes: Option<(usize, usize)>) -> Result<(usize, usize), CliError> {
    match (n, project_axes) {
        (_, Some(a)) => Ok(a),
        (1, None) => Err(CliError::NotPlottable("1-dimensional state space".into())),
        (2, None) => Ok((0, 1)),
        (_, None) => Err(CliError::NotPlottable(format!("state dimension {n} > 2 needs --project"))),
    }
}

fn points(v: &Value, key: &str) -> Result<Vec<Vec<f64>>, CliError> {
    serde_json::from_value(v.get(key).cloned().unwrap_or(Value::Null))
        .map_err(|e| CliError::Parse(format!("bundle field `{key}`: {e}")))
}

fn hull(pts: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let v: Vec<Vec<f64>> = pts.iter().map(|p| p.to_vec()).collect();
    chainset::convex::convex_hull_2d(&v, 1e-12).iter().map(|p| [p[0], p[1]]).collect()
}

/// Sutherland–Hodgman clipping against the viewport square.
fn clip(poly: &[[f64; 2]], r: f64) -> Vec<[f64; 2]> {
    let planes: [(usize, f64); 4] = [(0, r), (0, -r), (1, r), (1, -r)];
    let mut out = poly.to_vec();
    for (axis, bound) in planes {
        if out.is_empty() {
            break;
        }
        let inside = |p: &[f64; 2]| if bound > 0.0 { p[axis] <= bound } else { p[axis] >= bound };
        let input = std::mem::take(&mut out);
        for i in 0..input.len() {
            let cur = input[i];
            let prev = input[(i + input.len() - 1) % input.len()];
            let cross = |a: [f64; 2], b: [f64; 2]| {
                let t = (bound - a[axis]) / (b[axis] - a[axis]);
                [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
            };
            match (inside(&prev), inside(&cur)) {
                (true, true) => out.push(cur),
                (true, false) => out.push(cross(prev, cur)),
                (false, true) => {
                    out.push(cross(prev, cur));
                    out.push(cur);
                }
                (false, false) => {}
            }
        }
    }
    out
}

fn set_figure(set: &AffineSetSum, axes: Option<(usize, usize)>) -> Result<Figure, CliError> {
    let n = set.ambient_dim();
    let axes = axes_for(n, axes)?;
    let base = set
        .ambient_vertices()
        .ok_or_else(|| CliError::NotPlottable("compact part has no vertex list".into()))?;
    let sub = set.subspace_matrix();
    let mut pts: Vec<Vec<f64>> = base;
    for j in 0..sub.ncols() {
        let dir: Vec<f64> = sub.column(j).iter().map(|x| x * STYLE.far).collect();
        pts = pts
            .iter()
            .flat_map(|p| {
                [
                    p.iter().zip(&dir).map(|(a, b)| a + b).collect::<Vec<f64>>(),
                    p.iter().zip(&dir).map(|(a, b)| a - b).collect(),
                ]
            })
            .collect();
    }
    let planar = pts.iter().map(|p| project(p, axes)).collect::<Result<Vec<_>, _>>()?;
    Ok(Figure::Polygon(clip(&hull(&planar), STYLE.view)))
}

pub fn figure(bundle: &ResultBundle, axes: Option<(usize, usize)>) -> Result<Figure, CliError> {
    let r = &bundle.result;
    let scatter = |key: &str| -> Result<Figure, CliError> {
        let pts = points(r, key)?;
        let n = pts.first().map_or(2, Vec::len);
        let axes = axes_for(n, axes)?;
        Ok(Figure::Scatter(pts.iter().map(|p| project(p, axes)).collect::<Result<_, _>>()?))
    };
    match bundle.command.as_str() {
        "chain-set" => {
            let set: AffineSetSum = serde_json::from_value(r.get("E").cloned().unwrap_or(Value::Null))
                .map_err(|e| CliError::Parse(format!("bundle field `E`: {e}")))?;
            set_figure(&set, axes)
        }
        "oracle" => scatter("component"),
        "poincare" => scatter("preimages"),
        other => Err(CliError::NotPlottable(format!("`{other}` bundles carry no planar data"))),
    }
}

fn px(v: f64, flip: bool) -> f64 {
    let s = STYLE.size_px / (2.0 * STYLE.view);
    if flip {
        (STYLE.view - v) * s
    } else {
        (v + STYLE.view) * s
    }
}

pub fn svg(fig: &Figure) -> String {
    let s = &STYLE;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{0}" height="{0}" viewBox="0 0 {0} {0}">"#,
        s.size_px
    );
    let _ = writeln!(out, r#"<rect width="{0}" height="{0}" fill="{1}"/>"#, s.size_px, s.background);
    let mid = s.size_px / 2.0;
    let _ = writeln!(
        out,
        r#"<path d="M0 {mid}H{0}M{mid} 0V{0}" stroke="{1}" stroke-width="1"/>"#,
        s.size_px, s.axis
    );
    match fig {
        Figure::Polygon(p) if !p.is_empty() => {
            let pts: Vec<String> = p
                .iter()
                .map(|q| format!("{:.3},{:.3}", px(q[0], false), px(q[1], true)))
                .collect();
            let _ = writeln!(
                out,
                r#"<polygon points="{}" fill="{}" fill-opacity="{}" stroke="{}" stroke-width="{}"/>"#,
                pts.join(" "),
                s.fill,
                s.fill_opacity,
                s.stroke,
                s.stroke_width
            );
        }
        Figure::Polygon(_) => {}
        Figure::Scatter(p) => {
            for q in p.iter().filter(|q| q[0].abs() <= s.view && q[1].abs() <= s.view) {
                let _ = writeln!(
                    out,
                    r#"<circle cx="{:.3}" cy="{:.3}" r="{}" fill="{}"/>"#,
                    px(q[0], false),
                    px(q[1], true),
                    s.point_radius,
                    s.point
                );
            }
        }
    }
    out.push_str("</svg>\n");
    out
}

pub fn csv(fig: &Figure) -> String {
    let pts = match fig {
        Figure::Polygon(p) | Figure::Scatter(p) => p,
    };
    let mut out = String::from("x,y\n");
    for p in pts {
        let _ = writeln!(out, "{},{}", p[0], p[1]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clipping_a_band() {
        let band = [[-100.0, -1.0], [100.0, -1.0], [100.0, 1.0], [-100.0, 1.0]];
        let c = clip(&band, 3.0);
        assert_eq!(hull(&c), hull(&[[-3.0, -1.0], [3.0, -1.0], [3.0, 1.0], [-3.0, 1.0]]));
    }

    #[test]
    fn inside_polygon_untouched() {
        let sq = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];
        assert_eq!(clip(&sq, 3.0), sq.to_vec());
    }

    #[test]
    fn pixel_mapping() {
        assert_eq!(px(-3.0, false), 0.0);
        assert_eq!(px(3.0, true), 0.0);
        assert_eq!(px(0.0, true), 300.0);
    }
}
