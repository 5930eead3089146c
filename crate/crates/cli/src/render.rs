use std::fmt::Write as _;

use ltlseq::envs::{GridEnv, ProductAction, TrajectoryRecord};
use serde::{Deserialize, Serialize};

use crate::failure::Failure;

/// One line of a trajectory dump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLine {
    pub task: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub record: TrajectoryRecord,
}

const CELL: f64 = 40.0;
const FLAT_PX: f64 = 480.0;
const LETTER_COLORS: [&str; 8] = ["#8dd3c7", "#ffffb3", "#bebada", "#fb8072", "#80b1d3", "#fdb462", "#b3de69", "#fccde5"];

fn point(s: &mut String, (x, y): (f64, f64)) {
    if !s.is_empty() {
        s.push(' ');
    }
    let _ = write!(s, "{x:.2},{y:.2}");
}

fn polyline(out: &mut String, pts: &str) {
    let _ = writeln!(out, r#"  <polyline class="path" points="{pts}" fill="none" stroke="black" stroke-width="2"/>"#);
}

/// SVG of the layout with the agent path. `env` must already hold the
/// layout the trajectory was recorded in.
pub fn render_svg(env: &GridEnv, records: &[TrajectoryRecord]) -> Result<String, Failure> {
    let n = env.size();
    for r in records {
        if r.row >= n || r.col >= n {
            return Err(Failure::Runtime(format!("trajectory cell ({}, {}) lies outside the {n}×{n} grid", r.row, r.col)));
        }
    }
    let (w, h) = match env {
        GridEnv::Letter(_) => (n as f64 * CELL, n as f64 * CELL),
        GridEnv::Flat(_) => (FLAT_PX, FLAT_PX),
    };
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(out, r#"  <rect width="{w}" height="{h}" fill="white"/>"#);
    let centre: Box<dyn Fn(usize, usize) -> (f64, f64)> = match env {
        GridEnv::Letter(lw) => {
            for r in 0..n {
                for c in 0..n {
                    let (x, y) = (c as f64 * CELL, r as f64 * CELL);
                    match lw.letter_at(r, c) {
                        Some(l) => {
                            let color = LETTER_COLORS[l % LETTER_COLORS.len()];
                            let _ = writeln!(out, r##"  <rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{color}" stroke="#999"/>"##);
                            let _ = writeln!(
                                out,
                                r#"  <text x="{}" y="{}" font-family="monospace" font-size="20" text-anchor="middle">{}</text>"#,
                                x + CELL / 2.0,
                                y + CELL / 2.0 + 7.0,
                                lw.alphabet().name(l)
                            );
                        }
                        None => {
                            let _ = writeln!(out, r##"  <rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="none" stroke="#ccc"/>"##);
                        }
                    }
                }
            }
            Box::new(|r, c| (c as f64 * CELL + CELL / 2.0, r as f64 * CELL + CELL / 2.0))
        }
        GridEnv::Flat(fw) => {
            let scale = FLAT_PX / 4.0;
            let to_px = move |(x, y): (f64, f64)| ((x + 2.0) * scale, (2.0 - y) * scale);
            let _ = writeln!(out, r##"  <rect width="{w}" height="{h}" fill="none" stroke="#999"/>"##);
            for region in &fw.config().regions {
                let (cx, cy) = to_px((region.center[0], region.center[1]));
                let _ = writeln!(
                    out,
                    r#"  <circle cx="{cx:.2}" cy="{cy:.2}" r="{:.2}" fill="{}" fill-opacity="0.5"/>"#,
                    region.radius * scale,
                    region.color
                );
            }
            let fw = fw.clone();
            Box::new(move |r, c| to_px(fw.cell_center(r, c)))
        }
    };

    let torus = matches!(env, GridEnv::Letter(_));
    let mut pts = String::new();
    for (i, r) in records.iter().enumerate() {
        if i == 0 {
            point(&mut pts, centre(r.row, r.col));
            continue;
        }
        if matches!(r.action, Some(ProductAction::Epsilon(_))) {
            continue;
        }
        let p = &records[i - 1];
        let (dr, dc) = (r.row as isize - p.row as isize, r.col as isize - p.col as isize);
        let wrap = |d: isize| -> Option<isize> {
            match d {
                d if d.abs() <= 1 => None,
                d if torus && d == n as isize - 1 => Some(-1),
                d if torus && d == -(n as isize - 1) => Some(1),
                _ => Some(0),
            }
        };
        let (wr, wc) = (wrap(dr), wrap(dc));
        if wr == Some(0) || wc == Some(0) {
            return Err(Failure::Runtime(format!("step {} jumps from ({}, {}) to ({}, {})", r.t, p.row, p.col, r.row, r.col)));
        }
        if wr.is_none() && wc.is_none() {
            point(&mut pts, centre(r.row, r.col));
            continue;
        }
        // leave through one edge and re-enter through the opposite one
        let (ur, uc) = (wr.unwrap_or(dr), wc.unwrap_or(dc));
        let (x0, y0) = centre(p.row, p.col);
        point(&mut pts, (x0 + uc as f64 * CELL / 2.0, y0 + ur as f64 * CELL / 2.0));
        polyline(&mut out, &pts);
        pts.clear();
        let (x1, y1) = centre(r.row, r.col);
        point(&mut pts, (x1 - uc as f64 * CELL / 2.0, y1 - ur as f64 * CELL / 2.0));
        point(&mut pts, (x1, y1));
    }
    if !pts.is_empty() {
        polyline(&mut out, &pts);
    }
    if let Some(first) = records.first() {
        let (x, y) = centre(first.row, first.col);
        let d = 9.0;
        let _ = writeln!(
            out,
            r#"  <polygon class="start" points="{x:.2},{:.2} {:.2},{y:.2} {x:.2},{:.2} {:.2},{y:.2}" fill="orange" stroke="black"/>"#,
            y - d,
            x + d,
            y + d,
            x - d
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ltlseq::envs::{EnvConfig, LetterWorldConfig};

    fn rec(t: usize, row: usize, col: usize) -> TrajectoryRecord {
        TrajectoryRecord {
            t,
            row,
            col,
            action: (t > 0).then_some(ProductAction::Env(0)),
            label: Vec::new(),
            q: 0,
            reward: 0.0,
        }
    }

    fn letter() -> GridEnv {
        let cfg = LetterWorldConfig { size: 5, num_letters: 4, copies_per_letter: 1, fixed_layout: true, ..Default::default() };
        EnvConfig::LetterWorld(cfg).build().unwrap()
    }

    fn vertices(svg: &str) -> Vec<usize> {
        svg.lines()
            .filter(|l| l.contains("<polyline"))
            .map(|l| l.split("points=\"").nth(1).unwrap().split('"').next().unwrap().split(' ').count())
            .collect()
    }

    #[test]
    fn empty_trajectory_is_layout_only() {
        let svg = render_svg(&letter(), &[]).unwrap();
        assert!(!svg.contains("<polyline"));
        assert!(!svg.contains("class=\"start\""));
        assert!(svg.contains("<text"));
    }

    #[test]
    fn three_steps_give_four_vertices() {
        let recs = [rec(0, 1, 1), rec(1, 1, 2), rec(2, 2, 2), rec(3, 2, 3)];
        let svg = render_svg(&letter(), &recs).unwrap();
        assert_eq!(vertices(&svg), vec![4]);
        assert!(svg.contains(r#"fill="orange""#));
    }

    #[test]
    fn wrap_is_two_segments() {
        let recs = [rec(0, 2, 3), rec(1, 2, 4), rec(2, 2, 0), rec(3, 3, 0)];
        let svg = render_svg(&letter(), &recs).unwrap();
        // exit at the right edge, re-entry from the left edge
        assert_eq!(vertices(&svg), vec![3, 3]);
        assert!(svg.contains("200.00,100.00"));
        assert!(svg.contains("0.00,100.00"));
    }

    #[test]
    fn mismatched_trajectory_is_rejected() {
        assert!(render_svg(&letter(), &[rec(0, 7, 0)]).is_err());
        assert!(render_svg(&letter(), &[rec(0, 0, 0), rec(1, 2, 2)]).is_err());
    }
}
