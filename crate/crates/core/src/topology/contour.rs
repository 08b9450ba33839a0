//! Zero contours of a gridded channel by marching squares.
//!
//! Corners are classified as positive when the value is strictly greater than
//! zero. Ambiguous (saddle) cells are resolved by the sign of the mean of the
//! four corners. Crossings on each edge are placed by linear interpolation.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::PhaseGrid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub points: Vec<[f64; 2]>,
    pub closed: bool,
}

impl Polyline {
    pub fn length(&self) -> f64 {
        let mut l: f64 = self.points.windows(2).map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1])).sum();
        if self.closed && self.points.len() > 1 {
            let (a, b) = (self.points[0], self.points[self.points.len() - 1]);
            l += (a[0] - b[0]).hypot(a[1] - b[1]);
        }
        l
    }

    /// Distance from `q` to the nearest segment.
    pub fn distance(&self, q: [f64; 2]) -> f64 {
        let n = self.points.len();
        if n == 1 {
            return (self.points[0][0] - q[0]).hypot(self.points[0][1] - q[1]);
        }
        let segs = if self.closed { n } else { n - 1 };
        (0..segs)
            .map(|i| {
                let (a, b) = (self.points[i], self.points[(i + 1) % n]);
                let d = [b[0] - a[0], b[1] - a[1]];
                let len2 = d[0] * d[0] + d[1] * d[1];
                let t = if len2 > 0.0 { (((q[0] - a[0]) * d[0] + (q[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
                (a[0] + t * d[0] - q[0]).hypot(a[1] + t * d[1] - q[1])
            })
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourSet {
    pub channel: String,
    pub polylines: Vec<Polyline>,
}

impl ContourSet {
    pub fn distance(&self, q: [f64; 2]) -> f64 {
        self.polylines.iter().map(|l| l.distance(q)).fold(f64::INFINITY, f64::min)
    }

    pub fn vertex_count(&self) -> usize {
        self.polylines.iter().map(|l| l.points.len()).sum()
    }
}

/// Edges are keyed by their lower-left grid node and orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum EdgeKey {
    /// From (i, j) to (i + 1, j).
    AlongX(usize, usize),
    /// From (i, j) to (i, j + 1).
    AlongP(usize, usize),
}

pub fn extract_zero_contours(grid: &PhaseGrid, channel: &str) -> Result<ContourSet> {
    let values = grid.channel(channel)?;
    let spec = grid.spec();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Precondition(format!("channel {channel} has non-finite values")));
    }
    let (nx, np) = (spec.n_x, spec.n_p);
    let v = |i: usize, j: usize| values[spec.index(i, j)];

    let point = |e: EdgeKey| -> [f64; 2] {
        let (a, b, ia, ja, ib, jb) = match e {
            EdgeKey::AlongX(i, j) => (v(i, j), v(i + 1, j), i, j, i + 1, j),
            EdgeKey::AlongP(i, j) => (v(i, j), v(i, j + 1), i, j, i, j + 1),
        };
        let t = if a == b { 0.5 } else { (a / (a - b)).clamp(0.0, 1.0) };
        [spec.x(ia) + t * (spec.x(ib) - spec.x(ia)), spec.p(ja) + t * (spec.p(jb) - spec.p(ja))]
    };

    let mut segments: Vec<(EdgeKey, EdgeKey)> = Vec::new();
    for i in 0..nx - 1 {
        for j in 0..np - 1 {
            // corners counter-clockwise from lower-left (x right, p up)
            let c = [v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1)];
            let pos = c.map(|z| z > 0.0);
            // edge e_k joins corner k and corner k+1
            let edges = [EdgeKey::AlongX(i, j), EdgeKey::AlongP(i + 1, j), EdgeKey::AlongX(i, j + 1), EdgeKey::AlongP(i, j)];
            let cut: Vec<usize> = (0..4).filter(|&k| pos[k] != pos[(k + 1) % 4]).collect();
            match cut.len() {
                0 => {}
                2 => segments.push((edges[cut[0]], edges[cut[1]])),
                4 => {
                    let centre_pos = c.iter().sum::<f64>() / 4.0 > 0.0;
                    // join edges around the corners whose sign differs from the centre
                    if pos[0] == centre_pos {
                        segments.push((edges[0], edges[1]));
                        segments.push((edges[2], edges[3]));
                    } else {
                        segments.push((edges[3], edges[0]));
                        segments.push((edges[1], edges[2]));
                    }
                }
                _ => unreachable!("a cycle has an even number of sign changes"),
            }
        }
    }

    let mut adjacency: HashMap<EdgeKey, Vec<usize>> = HashMap::new();
    for (s, (a, b)) in segments.iter().enumerate() {
        adjacency.entry(*a).or_default().push(s);
        adjacency.entry(*b).or_default().push(s);
    }
    let mut used = vec![false; segments.len()];
    let other = |s: usize, e: EdgeKey| if segments[s].0 == e { segments[s].1 } else { segments[s].0 };

    let walk = |start: usize, from: EdgeKey, used: &mut Vec<bool>| -> Vec<EdgeKey> {
        let mut keys = vec![from];
        let mut s = start;
        let mut at = from;
        loop {
            used[s] = true;
            let next = other(s, at);
            keys.push(next);
            at = next;
            match adjacency[&at].iter().find(|&&t| !used[t]) {
                Some(&t) => s = t,
                None => break,
            }
        }
        keys
    };

    let mut polylines = Vec::new();
    // open lines start at edges touched by a single segment (window boundary)
    let mut order: Vec<usize> = (0..segments.len()).collect();
    order.sort_by_key(|&s| {
        let (a, b) = segments[s];
        !(adjacency[&a].len() == 1 || adjacency[&b].len() == 1)
    });
    for s in order {
        if used[s] {
            continue;
        }
        let (a, b) = segments[s];
        let start = if adjacency[&b].len() == 1 && adjacency[&a].len() != 1 { b } else { a };
        let keys = walk(s, start, &mut used);
        let closed = keys.len() > 2 && keys[0] == keys[keys.len() - 1];
        let mut points: Vec<[f64; 2]> = keys.iter().map(|&k| point(k)).collect();
        if closed {
            points.pop();
        }
        polylines.push(Polyline { points, closed });
    }
    Ok(ContourSet { channel: channel.to_string(), polylines })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    fn grid_of(spec: GridSpec, f: impl Fn(f64, f64) -> f64) -> PhaseGrid {
        let mut values = vec![0.0; spec.len()];
        for i in 0..spec.n_x {
            for j in 0..spec.n_p {
                values[spec.index(i, j)] = f(spec.x(i), spec.p(j));
            }
        }
        let mut g = PhaseGrid::new(spec);
        g.insert("W", values).unwrap();
        g
    }

    #[test]
    fn circle_is_closed() {
        let spec = GridSpec::new(-2.0, 2.0, 81, -2.0, 2.0, 81).unwrap();
        let g = grid_of(spec, |x, p| 1.0 - x * x - p * p);
        let c = extract_zero_contours(&g, "W").unwrap();
        assert_eq!(c.polylines.len(), 1);
        let line = &c.polylines[0];
        assert!(line.closed);
        for q in &line.points {
            assert!((q[0].hypot(q[1]) - 1.0).abs() < 2e-3);
        }
        assert!((line.length() - std::f64::consts::TAU).abs() < 1e-2);
    }

    #[test]
    fn open_lines_touch_boundary() {
        let spec = GridSpec::new(-1.0, 1.0, 41, -1.0, 1.0, 41).unwrap();
        // two vertical lines x = ±0.33
        let g = grid_of(spec, |x, _| x * x - 0.33f64.powi(2));
        let c = extract_zero_contours(&g, "W").unwrap();
        assert_eq!(c.polylines.len(), 2);
        for l in &c.polylines {
            assert!(!l.closed);
            assert_eq!(l.points.len(), 41);
            for q in &l.points {
                assert!((q[0].abs() - 0.33).abs() < 1e-3);
            }
            let ends = [l.points[0][1], l.points[l.points.len() - 1][1]];
            assert!(ends.iter().all(|p| (p.abs() - 1.0).abs() < 1e-12));
        }
        assert!((c.distance([0.0, 0.0]) - 0.33).abs() < 1e-3);
    }

    #[test]
    fn saddle_cells_resolved_by_mean() {
        // x·p with a positive offset: the positive quadrants are joined
        let spec = GridSpec::new(-1.0, 1.0, 2, -1.0, 1.0, 2).unwrap();
        let g = grid_of(spec, |x, p| x * p + 0.1);
        let c = extract_zero_contours(&g, "W").unwrap();
        assert_eq!(c.polylines.len(), 2);
        // each segment cuts off one negative corner
        for l in &c.polylines {
            let mid = [(l.points[0][0] + l.points[1][0]) / 2.0, (l.points[0][1] + l.points[1][1]) / 2.0];
            assert!(mid[0] * mid[1] < 0.0);
        }
        let g = grid_of(spec, |x, p| x * p - 0.1);
        let c = extract_zero_contours(&g, "W").unwrap();
        for l in &c.polylines {
            let mid = [(l.points[0][0] + l.points[1][0]) / 2.0, (l.points[0][1] + l.points[1][1]) / 2.0];
            assert!(mid[0] * mid[1] > 0.0);
        }
    }

    #[test]
    fn two_rings_and_no_contour() {
        let spec = GridSpec::new(-3.0, 3.0, 121, -3.0, 3.0, 121).unwrap();
        let g = grid_of(spec, |x, p| {
            let r = x.hypot(p);
            (r - 1.0) * (r - 2.0)
        });
        let c = extract_zero_contours(&g, "W").unwrap();
        assert_eq!(c.polylines.len(), 2);
        assert!(c.polylines.iter().all(|l| l.closed));
        let flat = grid_of(spec, |_, _| 1.0);
        assert!(extract_zero_contours(&flat, "W").unwrap().polylines.is_empty());
        assert!(matches!(extract_zero_contours(&flat, "divw"), Err(Error::UnknownChannel(_))));
    }
}
