//! Moment polytopes presented as intersections of integer halfspaces
//! `<y, v_j> - lambda_j <= 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A bounded full-dimensional polytope in R^d (d = 1 or 2) given by outward
/// integer facet normals `v_j` and offsets `lambda_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polytope {
    pub normals: Vec<Vec<i64>>,
    pub offsets: Vec<f64>,
    bounding_box: Vec<[f64; 2]>,
}

impl Polytope {
    pub fn new(normals: Vec<Vec<i64>>, offsets: Vec<f64>) -> Result<Self> {
        if normals.is_empty() || normals.len() != offsets.len() {
            return Err(Error::InvalidPolytope(
                "normals and offsets must be nonempty and match".into(),
            ));
        }
        let dim = normals[0].len();
        if dim == 0 || dim > 2 || normals.iter().any(|v| v.len() != dim) {
            return Err(Error::InvalidPolytope("normals must all live in R^1 or R^2".into()));
        }
        let (bounding_box, inner) = match dim {
            1 => bounding_box_1d(&normals, &offsets)?,
            _ => bounding_box_2d(&normals, &offsets)?,
        };
        let p = Polytope {
            normals,
            offsets,
            bounding_box,
        };
        // nonempty interior: the vertex centroid must be strictly feasible
        if p.slack(&inner) <= 1e-12 {
            return Err(Error::InvalidPolytope("empty interior".into()));
        }
        Ok(p)
    }

    /// The interval `[lo, hi]` presented as `{y : y <= hi, -y <= -lo}`.
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Polytope::new(vec![vec![1], vec![-1]], vec![hi, -lo])
    }

    /// Axis-aligned box in R^2.
    pub fn rect(x: [f64; 2], y: [f64; 2]) -> Result<Self> {
        Polytope::new(
            vec![vec![1, 0], vec![-1, 0], vec![0, 1], vec![0, -1]],
            vec![x[1], -x[0], y[1], -y[0]],
        )
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.normals[0].len()
    }

    pub fn bounding_box(&self) -> &[[f64; 2]] {
        &self.bounding_box
    }

    /// Strict containment with margin: `<y, v_j> - lambda_j <= -margin` for all j.
    pub fn contains(&self, y: &[f64], margin: f64) -> bool {
        self.normals.iter().zip(&self.offsets).all(|(v, &l)| {
            let dot: f64 = v.iter().zip(y).map(|(&a, &b)| a as f64 * b).sum();
            dot - l <= -margin
        })
    }

    /// Signed distance-like slack: the smallest `lambda_j - <y, v_j>` scaled by
    /// the normal length. Positive inside, negative outside.
    pub fn slack(&self, y: &[f64]) -> f64 {
        self.normals
            .iter()
            .zip(&self.offsets)
            .map(|(v, &l)| {
                let dot: f64 = v.iter().zip(y).map(|(&a, &b)| a as f64 * b).sum();
                let norm: f64 = v.iter().map(|&a| (a as f64) * (a as f64)).sum::<f64>().sqrt();
                (l - dot) / norm
            })
            .fold(f64::INFINITY, f64::min)
    }
}

fn bounding_box_1d(normals: &[Vec<i64>], offsets: &[f64]) -> Result<(Vec<[f64; 2]>, Vec<f64>)> {
    let mut hi = f64::INFINITY;
    let mut lo = f64::NEG_INFINITY;
    for (v, &l) in normals.iter().zip(offsets) {
        let a = v[0];
        if a > 0 {
            hi = hi.min(l / a as f64);
        } else if a < 0 {
            lo = lo.max(l / a as f64);
        }
    }
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::InvalidPolytope("unbounded interval".into()));
    }
    if hi <= lo {
        return Err(Error::InvalidPolytope("empty interval".into()));
    }
    Ok((vec![[lo, hi]], vec![0.5 * (lo + hi)]))
}

fn bounding_box_2d(normals: &[Vec<i64>], offsets: &[f64]) -> Result<(Vec<[f64; 2]>, Vec<f64>)> {
    // Normals must positively span the plane for boundedness: the largest
    // angular gap between consecutive normal directions must be < pi.
    let mut angles: Vec<f64> = normals
        .iter()
        .map(|v| (v[1] as f64).atan2(v[0] as f64))
        .collect();
    angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut max_gap: f64 = 0.0;
    for i in 0..angles.len() {
        let next = if i + 1 == angles.len() {
            angles[0] + std::f64::consts::TAU
        } else {
            angles[i + 1]
        };
        max_gap = max_gap.max(next - angles[i]);
    }
    if max_gap >= std::f64::consts::PI - 1e-12 {
        return Err(Error::InvalidPolytope("normals do not positively span R^2 (unbounded)".into()));
    }

    // Vertices: pairwise facet intersections that satisfy all constraints.
    let mut vertices: Vec<[f64; 2]> = Vec::new();
    let m = normals.len();
    for i in 0..m {
        for j in i + 1..m {
            let (a, b) = (&normals[i], &normals[j]);
            let det = (a[0] * b[1] - a[1] * b[0]) as f64;
            if det.abs() < 1e-12 {
                continue;
            }
            let x = (offsets[i] * b[1] as f64 - a[1] as f64 * offsets[j]) / det;
            let y = (a[0] as f64 * offsets[j] - offsets[i] * b[0] as f64) / det;
            let pt = [x, y];
            let feasible = normals.iter().zip(offsets).all(|(v, &l)| {
                v[0] as f64 * x + v[1] as f64 * y - l <= 1e-9 * (1.0 + l.abs())
            });
            if feasible {
                vertices.push(pt);
            }
        }
    }
    if vertices.len() < 3 {
        return Err(Error::InvalidPolytope("fewer than 3 vertices".into()));
    }
    let mut bx = [f64::INFINITY, f64::NEG_INFINITY];
    let mut by = [f64::INFINITY, f64::NEG_INFINITY];
    for v in &vertices {
        bx = [bx[0].min(v[0]), bx[1].max(v[0])];
        by = [by[0].min(v[1]), by[1].max(v[1])];
    }
    if bx[1] - bx[0] < 1e-12 || by[1] - by[0] < 1e-12 {
        return Err(Error::InvalidPolytope("not full-dimensional".into()));
    }
    let centroid = vec![
        vertices.iter().map(|v| v[0]).sum::<f64>() / vertices.len() as f64,
        vertices.iter().map(|v| v[1]).sum::<f64>() / vertices.len() as f64,
    ];
    Ok((vec![[bx[0], bx[1]], [by[0], by[1]]], centroid))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_and_containment() {
        let p = Polytope::interval(0.0, 1.0).unwrap();
        assert!(p.contains(&[0.5], 0.0));
        assert!(!p.contains(&[1.5], 0.0));
        assert!((p.slack(&[0.25]) - 0.25).abs() < 1e-15);
        assert_eq!(p.bounding_box()[0], [0.0, 1.0]);
    }

    #[test]
    fn unit_square() {
        let p = Polytope::rect([-1.0, 1.0], [0.0, 2.0]).unwrap();
        assert_eq!(p.dim(), 2);
        assert!(p.contains(&[0.0, 1.0], 0.5));
        assert!(!p.contains(&[0.0, 2.5], 0.0));
    }

    #[test]
    fn rejects_unbounded() {
        // only upper bounds: unbounded below
        assert!(Polytope::new(vec![vec![1]], vec![1.0]).is_err());
        assert!(Polytope::new(vec![vec![1, 0], vec![0, 1], vec![-1, 0]], vec![1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn simplex_vertices() {
        // standard simplex y1 + y2 <= 1, y1 >= 0, y2 >= 0
        let p = Polytope::new(
            vec![vec![1, 1], vec![-1, 0], vec![0, -1]],
            vec![1.0, 0.0, 0.0],
        )
        .unwrap();
        assert_eq!(p.bounding_box(), &[[0.0, 1.0], [0.0, 1.0]]);
        assert!(p.contains(&[0.2, 0.2], 0.1));
    }
}
