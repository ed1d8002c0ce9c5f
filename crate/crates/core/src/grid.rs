//! Scalar functions sampled on uniform rectangular grids in one or two
//! dimensions, with the finite-difference calculus used throughout the crate.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One grid axis: `n` equally spaced nodes on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
            return Err(Error::InvalidGrid(format!("bad axis range [{lo}, {hi}]")));
        }
        if n < 4 {
            return Err(Error::InvalidGrid(format!(
                "axis needs at least 4 nodes, got {n}"
            )));
        }
        Ok(Axis { lo, hi, n })
    }

    #[inline]
    pub fn h(&self) -> f64 {
        (self.hi - self.lo) / (self.n - 1) as f64
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        self.lo + self.h() * i as f64
    }

    /// Cell index and barycentric offset of a point, clamped to valid cells.
    fn locate(&self, x: f64) -> (usize, f64) {
        let t = (x - self.lo) / self.h();
        let i = (t.floor() as isize).clamp(0, self.n as isize - 2) as usize;
        (i, t - i as f64)
    }
}

/// Default numerical tolerances. All scale-sensitive tolerances are relative;
/// they are multiplied by `max(1, sup |values|)` where they apply.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative slack allowed in discrete convexity margins.
    pub tol_cvx: f64,
    /// Newton residual target for gradient inversion.
    pub tol_newton: f64,
    /// Relative floor for Jacobian determinants in invertibility scans.
    pub tol_det: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tol_cvx: 1e-9,
            tol_newton: 1e-10,
            tol_det: 1e-6,
        }
    }
}

impl Tolerances {
    pub fn scaled(self, factor: f64) -> Self {
        Tolerances {
            tol_cvx: self.tol_cvx * factor,
            tol_newton: self.tol_newton * factor,
            tol_det: self.tol_det * factor,
        }
    }
}

/// A scalar function sampled on a uniform grid over a box in R^d, d = 1 or 2.
///
/// Values are stored row-major: in two dimensions `values[i0 * n1 + i1]`.
/// `convex_hint` records that the samples are known to be discretely convex
/// (second differences along the axes and the cell diagonals are
/// nonnegative up to tolerance); it is validated at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFn {
    axes: Vec<Axis>,
    values: Vec<f64>,
    convex_hint: bool,
}

impl GridFn {
    pub fn new(axes: Vec<Axis>, values: Vec<f64>) -> Result<Self> {
        let dim = axes.len();
        if dim == 0 || dim > 2 {
            return Err(Error::InvalidGrid(format!("dimension must be 1 or 2, got {dim}")));
        }
        let len: usize = axes.iter().map(|a| a.n).product();
        if values.len() != len {
            return Err(Error::InvalidGrid(format!(
                "value count {} does not match shape {:?}",
                values.len(),
                axes.iter().map(|a| a.n).collect::<Vec<_>>()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!("non-finite sample {v}")));
        }
        Ok(GridFn {
            axes,
            values,
            convex_hint: false,
        })
    }

    /// Construct and assert the discrete-convexity invariant.
    pub fn new_convex(axes: Vec<Axis>, values: Vec<f64>, tol: &Tolerances) -> Result<Self> {
        let mut f = GridFn::new(axes, values)?;
        let margin = f.discrete_convexity_margin();
        if margin < -tol.tol_cvx * f.value_scale() {
            return Err(Error::InvalidGrid(format!(
                "convex_hint set but discrete convexity fails (margin {margin:.3e})"
            )));
        }
        f.convex_hint = true;
        Ok(f)
    }

    /// Sample a closed-form function on the grid.
    pub fn sample(axes: Vec<Axis>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let mut g = GridFn::new(axes.clone(), vec![0.0; axes.iter().map(|a| a.n).product()])?;
        match g.dim() {
            1 => {
                for i in 0..axes[0].n {
                    g.values[i] = f(&[axes[0].node(i)]);
                }
            }
            _ => {
                let n1 = axes[1].n;
                for i0 in 0..axes[0].n {
                    for i1 in 0..n1 {
                        g.values[i0 * n1 + i1] = f(&[axes[0].node(i0), axes[1].node(i1)]);
                    }
                }
            }
        }
        if let Some(v) = g.values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!("non-finite sample {v}")));
        }
        Ok(g)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    #[inline]
    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    #[inline]
    pub fn axis(&self, k: usize) -> Axis {
        self.axes[k]
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        self.convex_hint = false;
        &mut self.values
    }

    #[inline]
    pub fn convex_hint(&self) -> bool {
        self.convex_hint
    }

    pub fn set_convex_hint(&mut self, hint: bool) {
        self.convex_hint = hint;
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.n).collect()
    }

    #[inline]
    pub fn at(&self, idx: &[usize]) -> f64 {
        match self.dim() {
            1 => self.values[idx[0]],
            _ => self.values[idx[0] * self.axes[1].n + idx[1]],
        }
    }

    pub fn value_scale(&self) -> f64 {
        self.values
            .iter()
            .fold(1.0_f64, |acc, v| acc.max(v.abs()))
    }

    /// Largest box strictly inside the domain by `cells` grid cells per side.
    pub fn interior_box(&self, cells: usize) -> Vec<[f64; 2]> {
        self.axes
            .iter()
            .map(|a| {
                let m = cells as f64 * a.h();
                [a.lo + m, a.hi - m]
            })
            .collect()
    }

    pub fn contains_with_margin(&self, x: &[f64], cells: usize) -> bool {
        x.len() == self.dim()
            && self.axes.iter().zip(x).all(|(a, &xi)| {
                let m = cells as f64 * a.h();
                // tiny slack so points sitting exactly on the margin pass
                xi >= a.lo + m - 1e-12 * (a.hi - a.lo) && xi <= a.hi - m + 1e-12 * (a.hi - a.lo)
            })
    }

    /// Multilinear interpolation of the sampled values.
    pub fn value_at(&self, x: &[f64]) -> Result<f64> {
        if !self.contains_with_margin(x, 0) {
            return Err(Error::OutsideInterior(x.to_vec()));
        }
        match self.dim() {
            1 => {
                let (i, t) = self.axes[0].locate(x[0]);
                Ok(self.values[i] * (1.0 - t) + self.values[i + 1] * t)
            }
            _ => {
                let (i0, t0) = self.axes[0].locate(x[0]);
                let (i1, t1) = self.axes[1].locate(x[1]);
                let n1 = self.axes[1].n;
                let v = |a: usize, b: usize| self.values[a * n1 + b];
                Ok(v(i0, i1) * (1.0 - t0) * (1.0 - t1)
                    + v(i0 + 1, i1) * t0 * (1.0 - t1)
                    + v(i0, i1 + 1) * (1.0 - t0) * t1
                    + v(i0 + 1, i1 + 1) * t0 * t1)
            }
        }
    }

    /// Central-difference partial derivative along `axis` at a grid node.
    /// Interior nodes use the O(h^2) central stencil; boundary nodes fall back
    /// to the second-order one-sided stencil.
    pub fn node_deriv(&self, idx: &[usize], axis: usize) -> f64 {
        let a = self.axes[axis];
        let h = a.h();
        let i = idx[axis];
        let shifted = |j: usize| {
            let mut id = idx.to_vec();
            id[axis] = j;
            self.at(&id)
        };
        if i == 0 {
            (-3.0 * shifted(0) + 4.0 * shifted(1) - shifted(2)) / (2.0 * h)
        } else if i == a.n - 1 {
            (3.0 * shifted(a.n - 1) - 4.0 * shifted(a.n - 2) + shifted(a.n - 3)) / (2.0 * h)
        } else {
            (shifted(i + 1) - shifted(i - 1)) / (2.0 * h)
        }
    }

    /// Central second difference along `axis` at an interior node, in
    /// second-derivative units.
    pub fn node_second(&self, idx: &[usize], axis: usize) -> f64 {
        let a = self.axes[axis];
        let h = a.h();
        let shifted = |j: usize| {
            let mut id = idx.to_vec();
            id[axis] = j;
            self.at(&id)
        };
        let i = idx[axis];
        (shifted(i + 1) - 2.0 * shifted(i) + shifted(i - 1)) / (h * h)
    }

    /// Mixed second difference at an interior node (two dimensions only).
    pub fn node_mixed(&self, idx: &[usize]) -> f64 {
        let (h0, h1) = (self.axes[0].h(), self.axes[1].h());
        let n1 = self.axes[1].n;
        let v = |a: usize, b: usize| self.values[a * n1 + b];
        let (i, j) = (idx[0], idx[1]);
        (v(i + 1, j + 1) - v(i + 1, j - 1) - v(i - 1, j + 1) + v(i - 1, j - 1)) / (4.0 * h0 * h1)
    }

    /// Minimum of the directional second differences (axes and diagonals)
    /// over all nodes where the stencil fits, in second-derivative units.
    pub fn discrete_convexity_margin(&self) -> f64 {
        let mut min = f64::INFINITY;
        match self.dim() {
            1 => {
                for i in 1..self.axes[0].n - 1 {
                    min = min.min(self.node_second(&[i], 0));
                }
            }
            _ => {
                let (n0, n1) = (self.axes[0].n, self.axes[1].n);
                let (h0, h1) = (self.axes[0].h(), self.axes[1].h());
                let v = |a: usize, b: usize| self.values[a * n1 + b];
                let diag = h0 * h0 + h1 * h1;
                for i in 1..n0 - 1 {
                    for j in 1..n1 - 1 {
                        min = min.min(self.node_second(&[i, j], 0));
                        min = min.min(self.node_second(&[i, j], 1));
                        let d1 = (v(i + 1, j + 1) - 2.0 * v(i, j) + v(i - 1, j - 1)) / diag;
                        let d2 = (v(i + 1, j - 1) - 2.0 * v(i, j) + v(i - 1, j + 1)) / diag;
                        min = min.min(d1).min(d2);
                    }
                }
            }
        }
        min
    }

    /// True when every second difference within `radius` nodes of `idx`
    /// (along each axis, clamped to the interior) exceeds `tol`. Used to
    /// keep differential checks away from flat or truncation-pinned cells.
    pub fn locally_strict(&self, idx: &[usize], radius: usize, tol: f64) -> bool {
        for axis in 0..self.dim() {
            let n = self.axes[axis].n;
            let lo = idx[axis].saturating_sub(radius).max(1);
            let hi = (idx[axis] + radius).min(n - 2);
            for i in lo..=hi {
                let mut probe = idx.to_vec();
                probe[axis] = i;
                if self.node_second(&probe, axis) <= tol {
                    return false;
                }
            }
        }
        true
    }

    /// Point version of [`GridFn::locally_strict`]: tests the nodes of the
    /// cell containing `x`.
    pub fn locally_strict_at(&self, x: &[f64], radius: usize, tol: f64) -> bool {
        let idx: Vec<usize> = (0..self.dim())
            .map(|k| self.axes[k].locate(x[k]).0)
            .collect();
        let mut shifted = idx.clone();
        if !self.locally_strict(&idx, radius, tol) {
            return false;
        }
        for k in 0..self.dim() {
            shifted[k] = (idx[k] + 1).min(self.axes[k].n - 2);
        }
        self.locally_strict(&shifted, radius, tol)
    }

    /// Per-axis range `[min, max]` of slopes between adjacent nodes. This is
    /// the closure of the discrete gradient range used for dual-domain checks.
    pub fn slope_range(&self, axis: usize) -> [f64; 2] {
        let h = self.axes[axis].h();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        match self.dim() {
            1 => {
                for i in 0..self.axes[0].n - 1 {
                    let s = (self.values[i + 1] - self.values[i]) / h;
                    lo = lo.min(s);
                    hi = hi.max(s);
                }
            }
            _ => {
                let (n0, n1) = (self.axes[0].n, self.axes[1].n);
                let v = |a: usize, b: usize| self.values[a * n1 + b];
                if axis == 0 {
                    for i in 0..n0 - 1 {
                        for j in 0..n1 {
                            let s = (v(i + 1, j) - v(i, j)) / h;
                            lo = lo.min(s);
                            hi = hi.max(s);
                        }
                    }
                } else {
                    for i in 0..n0 {
                        for j in 0..n1 - 1 {
                            let s = (v(i, j + 1) - v(i, j)) / h;
                            lo = lo.min(s);
                            hi = hi.max(s);
                        }
                    }
                }
            }
        }
        [lo, hi]
    }

    /// Nodewise linear combination `a*self + b*other` on a shared grid.
    pub fn lin_comb(&self, a: f64, other: &GridFn, b: f64) -> Result<GridFn> {
        if self.axes != other.axes {
            return Err(Error::InvalidGrid(
                "linear combination requires identical grids".into(),
            ));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        GridFn::new(self.axes.clone(), values)
    }

    /// Serialize as a JSON header line followed by a CSV body of
    /// `coordinates..., value` rows in row-major node order.
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        let boxes: Vec<[f64; 2]> = self.axes.iter().map(|a| [a.lo, a.hi]).collect();
        let hdr = serde_json::json!({
            "dim": self.dim(),
            "box": boxes,
            "shape": self.shape(),
            "convex_hint": self.convex_hint,
        });
        writeln!(w, "{hdr}")?;
        match self.dim() {
            1 => {
                writeln!(w, "x0,value")?;
                for i in 0..self.axes[0].n {
                    writeln!(w, "{},{}", fmt_g17(self.axes[0].node(i)), fmt_g17(self.values[i]))?;
                }
            }
            _ => {
                writeln!(w, "x0,x1,value")?;
                let n1 = self.axes[1].n;
                for i0 in 0..self.axes[0].n {
                    for i1 in 0..n1 {
                        writeln!(
                            w,
                            "{},{},{}",
                            fmt_g17(self.axes[0].node(i0)),
                            fmt_g17(self.axes[1].node(i1)),
                            fmt_g17(self.values[i0 * n1 + i1])
                        )?;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl BufRead) -> Result<GridFn> {
        let mut header = String::new();
        r.read_line(&mut header)?;
        let hdr: serde_json::Value = serde_json::from_str(header.trim())?;
        let dim = hdr["dim"]
            .as_u64()
            .ok_or_else(|| Error::InvalidGrid("missing dim in header".into()))? as usize;
        let boxes = hdr["box"]
            .as_array()
            .ok_or_else(|| Error::InvalidGrid("missing box in header".into()))?;
        let shape = hdr["shape"]
            .as_array()
            .ok_or_else(|| Error::InvalidGrid("missing shape in header".into()))?;
        if boxes.len() != dim || shape.len() != dim {
            return Err(Error::InvalidGrid("header dim mismatch".into()));
        }
        let mut axes = Vec::with_capacity(dim);
        for k in 0..dim {
            let lo = boxes[k][0].as_f64().unwrap_or(f64::NAN);
            let hi = boxes[k][1].as_f64().unwrap_or(f64::NAN);
            let n = shape[k].as_u64().unwrap_or(0) as usize;
            axes.push(Axis::new(lo, hi, n)?);
        }
        let expect: usize = axes.iter().map(|a| a.n).product();
        let mut values = Vec::with_capacity(expect);
        let mut line = String::new();
        r.read_line(&mut line)?; // column header
        loop {
            line.clear();
            if r.read_line(&mut line)? == 0 {
                break;
            }
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            let last = t
                .rsplit(',')
                .next()
                .ok_or_else(|| Error::InvalidGrid("bad csv row".into()))?;
            let v: f64 = last
                .parse()
                .map_err(|_| Error::InvalidGrid(format!("bad value `{last}`")))?;
            values.push(v);
        }
        if values.len() != expect {
            return Err(Error::InvalidGrid(format!(
                "expected {expect} rows, got {}",
                values.len()
            )));
        }
        let mut f = GridFn::new(axes, values)?;
        f.convex_hint = hdr["convex_hint"].as_bool().unwrap_or(false);
        Ok(f)
    }
}

/// Format a float with 17 significant digits for reproducible output.
pub fn fmt_g17(v: f64) -> String {
    format!("{v:.16e}")
}
