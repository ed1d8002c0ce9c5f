//! Grid-based convex analysis: discrete Legendre-Fenchel transforms,
//! convex envelopes via biconjugation, finite-difference gradients and
//! Hessians, convexity reports, and damped-Newton gradient inversion.
//!
//! The discrete conjugate g(y) = max_i [<x_i, y> - f(x_i)] is computed
//! axis by axis; each one-dimensional pass builds the lower convex hull of
//! the sampled graph and then merges the sorted hull slopes against the
//! sorted output nodes, so a full pass is linear in nodes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Axis, GridFn, Tolerances};

/// Result of scanning a sampled function for discrete convexity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    /// Smallest second difference (1-D) or smallest Hessian eigenvalue (2-D)
    /// over interior nodes, in second-derivative units.
    pub min_margin: f64,
    pub argmin_node: Vec<usize>,
    pub is_convex: bool,
    pub tol_used: f64,
}

/// Lower convex hull of the points `(x_i, f_i)` with `x` uniform ascending.
/// Returns the hull vertex indices. Collinear middle points are dropped.
fn lower_hull(x0: f64, h: f64, f: &[f64]) -> Vec<usize> {
    let m = f.len();
    let mut hull: Vec<usize> = Vec::with_capacity(m);
    for c in 0..m {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            // b lies strictly below chord a-c  <=>  cross > 0
            let xa = x0 + h * a as f64;
            let xb = x0 + h * b as f64;
            let xc = x0 + h * c as f64;
            let cross = (xb - xa) * (f[c] - f[a]) - (f[b] - f[a]) * (xc - xa);
            if cross > 0.0 {
                break;
            }
            hull.pop();
        }
        hull.push(c);
    }
    hull
}

/// One-dimensional discrete conjugate of the samples `f` at nodes
/// `x0 + i*h` onto the output nodes `y0 + j*hy`, written into `out`.
/// Argmax ties break toward the smaller x index.
fn conjugate_1d(x0: f64, h: f64, f: &[f64], y0: f64, hy: f64, out: &mut [f64]) {
    let hull = lower_hull(x0, h, f);
    let xv = |i: usize| x0 + h * i as f64;
    let mut k = 0usize;
    for (j, g) in out.iter_mut().enumerate() {
        let y = y0 + hy * j as f64;
        while k + 1 < hull.len() {
            let (a, b) = (hull[k], hull[k + 1]);
            let slope = (f[b] - f[a]) / (xv(b) - xv(a));
            if slope < y {
                k += 1;
            } else {
                break;
            }
        }
        let i = hull[k];
        *g = xv(i) * y - f[i];
    }
}

fn check_dual_coverage(f: &GridFn, dual_box: &[[f64; 2]]) -> Result<()> {
    for (axis, db) in dual_box.iter().enumerate().take(f.dim()) {
        let [lo, hi] = f.slope_range(axis);
        // second term absorbs the rounding noise of differencing large
        // values across a small cell
        let tol = 1e-9 * (1.0 + lo.abs().max(hi.abs()))
            + 32.0 * f64::EPSILON * f.value_scale() / f.axis(axis).h();
        let [dlo, dhi] = *db;
        if lo < dlo - tol {
            return Err(Error::DualDomainTooSmall {
                axis,
                value: lo,
                lo: dlo,
                hi: dhi,
            });
        }
        if hi > dhi + tol {
            return Err(Error::DualDomainTooSmall {
                axis,
                value: hi,
                lo: dlo,
                hi: dhi,
            });
        }
    }
    Ok(())
}

/// Discrete Legendre-Fenchel transform of `f` onto the grid given by
/// `dual_box` and `dual_shape`.
///
/// The dual box must cover the closure of the discrete gradient range of
/// `f` on every axis, otherwise the transform loses slope information and
/// an error is returned. The output always carries `convex_hint`:
/// conjugates are suprema of affine functions.
pub fn legendre_transform(
    f: &GridFn,
    dual_box: &[[f64; 2]],
    dual_shape: &[usize],
) -> Result<GridFn> {
    if dual_box.len() != f.dim() || dual_shape.len() != f.dim() {
        return Err(Error::InvalidGrid("dual box/shape dimension mismatch".into()));
    }
    check_dual_coverage(f, dual_box)?;
    let axes: Vec<Axis> = dual_box
        .iter()
        .zip(dual_shape)
        .map(|(b, &n)| Axis::new(b[0], b[1], n))
        .collect::<Result<_>>()?;

    let out = match f.dim() {
        1 => {
            let a = f.axis(0);
            let d = axes[0];
            let mut g = vec![0.0; d.n];
            conjugate_1d(a.lo, a.h(), f.values(), d.lo, d.h(), &mut g);
            g
        }
        _ => {
            let (a0, a1) = (f.axis(0), f.axis(1));
            let (d0, d1) = (axes[0], axes[1]);
            // pass 1: conjugate each x0-row in the x1 variable
            let mut mid = vec![0.0; a0.n * d1.n]; // mid[i0 * d1.n + j1]
            let mut row = vec![0.0; d1.n];
            for i0 in 0..a0.n {
                let src = &f.values()[i0 * a1.n..(i0 + 1) * a1.n];
                conjugate_1d(a1.lo, a1.h(), src, d1.lo, d1.h(), &mut row);
                mid[i0 * d1.n..(i0 + 1) * d1.n].copy_from_slice(&row);
            }
            // pass 2: for each y1-column conjugate -mid(., y1) in the x0 variable
            let mut g = vec![0.0; d0.n * d1.n];
            let mut col = vec![0.0; a0.n];
            let mut out_col = vec![0.0; d0.n];
            for j1 in 0..d1.n {
                for i0 in 0..a0.n {
                    col[i0] = -mid[i0 * d1.n + j1];
                }
                conjugate_1d(a0.lo, a0.h(), &col, d0.lo, d0.h(), &mut out_col);
                for j0 in 0..d0.n {
                    g[j0 * d1.n + j1] = out_col[j0];
                }
            }
            g
        }
    };
    let mut g = GridFn::new(axes, out)?;
    g.set_convex_hint(true);
    Ok(g)
}

/// Biconjugate f** on the original grid of `f`: the discrete convex
/// envelope. The intermediate dual grid covers the slope range of `f` at
/// twice the primal resolution.
pub fn biconjugate(f: &GridFn) -> Result<GridFn> {
    let dual_box: Vec<[f64; 2]> = (0..f.dim())
        .map(|k| {
            let [lo, hi] = f.slope_range(k);
            let width = f.axis(k).hi - f.axis(k).lo;
            // keep a minimum dual width so degenerate (near-affine) inputs
            // do not produce noise-dominated cells
            let pad = (1e-12 * (1.0 + lo.abs().max(hi.abs())))
                .max(1e-7 * f.value_scale() / width);
            [lo - pad, hi + pad]
        })
        .collect();
    // odd node counts place the midpoint of a symmetric slope range on the
    // grid, which keeps symmetric envelope flats exact
    let dual_shape: Vec<usize> = f.shape().iter().map(|&n| (2 * n + 1).max(9)).collect();
    let g = legendre_transform(f, &dual_box, &dual_shape)?;
    let orig_box: Vec<[f64; 2]> = f.axes().iter().map(|a| [a.lo, a.hi]).collect();
    legendre_transform(&g, &orig_box, &f.shape())
}

/// Central-difference gradient at a point at least one cell inside the box.
/// Nodal derivatives are interpolated multilinearly, so at a sampled kink of
/// a convex function the result is the midpoint of the one-sided slopes.
pub fn gradient(f: &GridFn, x: &[f64]) -> Result<Vec<f64>> {
    if !f.contains_with_margin(x, 1) {
        return Err(Error::OutsideInterior(x.to_vec()));
    }
    interp_nodal(f, x, |idx, axis| f.node_deriv(idx, axis))
}

/// Central second-difference Hessian at a point at least two cells inside
/// the box, returned in row-major order (`d*d` entries).
pub fn hessian(f: &GridFn, x: &[f64]) -> Result<Vec<f64>> {
    if !f.contains_with_margin(x, 2) {
        return Err(Error::OutsideInterior(x.to_vec()));
    }
    match f.dim() {
        1 => Ok(vec![interp_nodal(f, x, |idx, _| f.node_second(idx, 0))?[0]]),
        _ => {
            let h00 = interp_nodal(f, x, |idx, _| f.node_second(idx, 0))?[0];
            let h11 = interp_nodal(f, x, |idx, _| f.node_second(idx, 1))?[0];
            let h01 = interp_nodal(f, x, |idx, _| f.node_mixed(idx))?[0];
            Ok(vec![h00, h01, h01, h11])
        }
    }
}

/// Interpolate a nodal quantity multilinearly at `x`. The closure is
/// evaluated on the cell corners; callers guarantee the stencil fits.
fn interp_nodal(
    f: &GridFn,
    x: &[f64],
    nodal: impl Fn(&[usize], usize) -> f64,
) -> Result<Vec<f64>> {
    let dim = f.dim();
    let mut cells = Vec::with_capacity(dim);
    for (k, &xk) in x.iter().enumerate().take(dim) {
        let a = f.axis(k);
        let t = (xk - a.lo) / a.h();
        // keep interpolation corners at least one node off the boundary so
        // central stencils exist
        let i = (t.floor() as isize).clamp(1, a.n as isize - 3) as usize;
        cells.push((i, (t - i as f64).clamp(-1.0, 2.0)));
    }
    match dim {
        1 => {
            let (i, t) = cells[0];
            let g0 = nodal(&[i], 0);
            let g1 = nodal(&[i + 1], 0);
            Ok(vec![g0 * (1.0 - t) + g1 * t])
        }
        _ => {
            let (i0, t0) = cells[0];
            let (i1, t1) = cells[1];
            let mut out = Vec::with_capacity(dim);
            for axis in 0..dim {
                let v = |a: usize, b: usize| nodal(&[a, b], axis);
                out.push(
                    v(i0, i1) * (1.0 - t0) * (1.0 - t1)
                        + v(i0 + 1, i1) * t0 * (1.0 - t1)
                        + v(i0, i1 + 1) * (1.0 - t0) * t1
                        + v(i0 + 1, i1 + 1) * t0 * t1,
                );
            }
            // gradient callers read both components, scalar callers read [0]
            Ok(out)
        }
    }
}

/// Scan all interior nodes for the minimal Hessian eigenvalue.
pub fn convexity_report(f: &GridFn, tol: &Tolerances) -> Result<ConvexityReport> {
    if f.shape().iter().any(|&n| n < 5) {
        return Err(Error::GridTooCoarse(
            "convexity report requires at least 5 nodes per axis".into(),
        ));
    }
    let mut min = f64::INFINITY;
    let mut argmin = vec![0usize; f.dim()];
    match f.dim() {
        1 => {
            for i in 1..f.axis(0).n - 1 {
                let m = f.node_second(&[i], 0);
                if m < min {
                    min = m;
                    argmin = vec![i];
                }
            }
        }
        _ => {
            for i in 1..f.axis(0).n - 1 {
                for j in 1..f.axis(1).n - 1 {
                    let a = f.node_second(&[i, j], 0);
                    let b = f.node_second(&[i, j], 1);
                    let c = f.node_mixed(&[i, j]);
                    let mid = 0.5 * (a + b);
                    let rad = (0.25 * (a - b) * (a - b) + c * c).sqrt();
                    let m = mid - rad;
                    if m < min {
                        min = m;
                        argmin = vec![i, j];
                    }
                }
            }
        }
    }
    let tol_used = tol.tol_cvx * f.value_scale();
    Ok(ConvexityReport {
        min_margin: min,
        argmin_node: argmin,
        is_convex: min >= -tol_used,
        tol_used,
    })
}

/// Per-axis slope ranges of `f`, the closure of its discrete gradient range.
pub fn gradient_range(f: &GridFn) -> Vec<[f64; 2]> {
    (0..f.dim()).map(|k| f.slope_range(k)).collect()
}

/// Solve `grad f(x) = y` by damped Newton for strictly convex `f`.
///
/// The iteration starts from the grid node maximizing `<x, y> - f(x)` and
/// is kept one cell inside the box. The result satisfies
/// `|grad f(x) - y| <= tol_newton * scale`.
pub fn invert_gradient(f: &GridFn, y: &[f64], tol: &Tolerances) -> Result<Vec<f64>> {
    let dim = f.dim();
    if y.len() != dim {
        return Err(Error::InvalidArgument("gradient target dimension mismatch".into()));
    }
    let ranges = gradient_range(f);
    for k in 0..dim {
        let [lo, hi] = ranges[k];
        let slack = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
        if y[k] < lo - slack || y[k] > hi + slack {
            return Err(Error::GradientOutOfRange(y.to_vec()));
        }
    }

    // start at the discrete argmax of <x, y> - f(x)
    let mut best = f64::NEG_INFINITY;
    let mut x = vec![0.0; dim];
    let shape = f.shape();
    match dim {
        1 => {
            let a = f.axis(0);
            for i in 1..shape[0] - 1 {
                let xi = a.node(i);
                let v = xi * y[0] - f.values()[i];
                if v > best {
                    best = v;
                    x = vec![xi];
                }
            }
        }
        _ => {
            let (a0, a1) = (f.axis(0), f.axis(1));
            for i in 1..shape[0] - 1 {
                for j in 1..shape[1] - 1 {
                    let (xi, xj) = (a0.node(i), a1.node(j));
                    let v = xi * y[0] + xj * y[1] - f.values()[i * shape[1] + j];
                    if v > best {
                        best = v;
                        x = vec![xi, xj];
                    }
                }
            }
        }
    }

    let scale = 1.0 + y.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let target = tol.tol_newton * scale;
    let mut residual = res_norm(f, &x, y)?;
    for _ in 0..100 {
        if residual <= target {
            return Ok(x);
        }
        let g = gradient(f, &x)?;
        let hess = hessian(f, &x).or_else(|_| {
            // within one cell of the boundary: fall back to the nearest
            // two-cell interior point for the curvature estimate
            let clamped = clamp_interior(f, &x, 2);
            hessian(f, &clamped)
        })?;
        let r: Vec<f64> = g.iter().zip(y).map(|(a, b)| a - b).collect();
        let step = solve_spd(&hess, &r, dim)?;
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..60 {
            let cand: Vec<f64> = x.iter().zip(&step).map(|(xi, si)| xi - t * si).collect();
            let cand = clamp_interior(f, &cand, 1);
            let r_new = res_norm(f, &cand, y)?;
            if r_new < residual * (1.0 - 1e-4 * t) || r_new <= target {
                x = cand;
                residual = r_new;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    if residual <= target {
        Ok(x)
    } else {
        Err(Error::NewtonDiverged {
            steps: 100,
            residual,
        })
    }
}

fn res_norm(f: &GridFn, x: &[f64], y: &[f64]) -> Result<f64> {
    let g = gradient(f, x)?;
    Ok(g.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

fn clamp_interior(f: &GridFn, x: &[f64], cells: usize) -> Vec<f64> {
    x.iter()
        .enumerate()
        .map(|(k, &xi)| {
            let a = f.axis(k);
            let m = cells as f64 * a.h();
            xi.clamp(a.lo + m, a.hi - m)
        })
        .collect()
}

fn solve_spd(h: &[f64], r: &[f64], dim: usize) -> Result<Vec<f64>> {
    match dim {
        1 => {
            if h[0].abs() < 1e-300 {
                return Err(Error::NewtonDiverged {
                    steps: 0,
                    residual: f64::INFINITY,
                });
            }
            Ok(vec![r[0] / h[0]])
        }
        _ => {
            let det = h[0] * h[3] - h[1] * h[2];
            if det.abs() < 1e-300 {
                return Err(Error::NewtonDiverged {
                    steps: 0,
                    residual: f64::INFINITY,
                });
            }
            Ok(vec![
                (h[3] * r[0] - h[1] * r[1]) / det,
                (-h[2] * r[0] + h[0] * r[1]) / det,
            ])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_1d(lo: f64, hi: f64, n: usize, f: impl Fn(f64) -> f64) -> GridFn {
        GridFn::sample(vec![Axis::new(lo, hi, n).unwrap()], |x| f(x[0])).unwrap()
    }

    #[test]
    fn self_dual_quadratic() {
        let f = grid_1d(-2.0, 2.0, 401, |x| 0.5 * x * x);
        let g = legendre_transform(&f, &[[-2.0, 2.0]], &[401]).unwrap();
        let h = f.axis(0).h();
        let mut err: f64 = 0.0;
        for j in 0..401 {
            let y = g.axis(0).node(j);
            err = err.max((g.values()[j] - 0.5 * y * y).abs());
        }
        assert!(err <= 2.0 * h * h, "sup error {err}");
        assert!(g.convex_hint());
    }

    #[test]
    fn conjugate_of_zero_is_support_function() {
        let f = grid_1d(-1.0, 1.0, 101, |_| 0.0);
        let g = legendre_transform(&f, &[[-1.0, 1.0]], &[101]).unwrap();
        for j in 0..101 {
            let y = g.axis(0).node(j);
            assert!((g.values()[j] - y.abs()).abs() < 1e-14);
        }
    }

    #[test]
    fn quartic_conjugate_matches_brute_force() {
        // conjugate of x^4/4 is (3/4)|y|^{4/3}; check against a dense sup
        let n = 301;
        let f = grid_1d(-1.5, 1.5, n, |x| 0.25 * x.powi(4));
        let dual = [[-3.4, 3.4]];
        let g = legendre_transform(&f, &dual, &[n]).unwrap();
        // brute force over a 10x finer x-grid bounds the truth from above
        let fine = 10 * (n - 1) + 1;
        let mut sup_err: f64 = 0.0;
        for j in 0..n {
            let y = g.axis(0).node(j);
            let mut dense = f64::NEG_INFINITY;
            for i in 0..fine {
                let x = -1.5 + 3.0 * i as f64 / (fine - 1) as f64;
                dense = dense.max(x * y - 0.25 * x.powi(4));
            }
            if y.abs() <= 3.3 {
                // unconstrained maximizer y^{1/3} stays inside the box here
                let closed = 0.75 * y.abs().powf(4.0 / 3.0);
                assert!((dense - closed).abs() < 6e-3, "oracle drift {}", dense - closed);
            }
            sup_err = sup_err.max((g.values()[j] - dense).abs());
        }
        let h = f.axis(0).h();
        assert!(sup_err <= 3.4 * h, "sup err {sup_err}");
    }

    #[test]
    fn dual_domain_too_small_reports_offender() {
        let f = grid_1d(-2.0, 2.0, 101, |x| 0.5 * x * x);
        let err = legendre_transform(&f, &[[-1.0, 1.0]], &[101]).unwrap_err();
        match err {
            Error::DualDomainTooSmall { value, .. } => assert!(value.abs() > 1.9),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn biconjugate_fixes_convex_functions() {
        let f = grid_1d(-1.0, 1.0, 201, |x| x * x + 0.3 * x);
        let g = biconjugate(&f).unwrap();
        let h = f.axis(0).h();
        let mut err: f64 = 0.0;
        for (a, b) in f.values().iter().zip(g.values()) {
            err = err.max((a - b).abs());
            assert!(*b <= *a + 1e-12, "f** must sit below f");
        }
        assert!(err <= 2.0 * h * h, "sup err {err}");
    }

    #[test]
    fn biconjugate_of_constant_is_constant() {
        let f = grid_1d(-1.0, 1.0, 64, |_| 3.25);
        let g = biconjugate(&f).unwrap();
        for v in g.values() {
            assert!((v - 3.25).abs() < 1e-12);
        }
    }

    #[test]
    fn biconjugate_matches_lower_hull_oracle() {
        // double well: envelope has a flat segment at 0 across [-1, 1]
        let n = 401;
        let f = grid_1d(-2.0, 2.0, n, |x| {
            let a = (x + 1.0) * (x + 1.0);
            let b = (x - 1.0) * (x - 1.0);
            a.min(b)
        });
        let env = biconjugate(&f).unwrap();
        // oracle: evaluate the lower convex hull of the sampled graph
        let hull = lower_hull(-2.0, f.axis(0).h(), f.values());
        let xv = |i: usize| -2.0 + f.axis(0).h() * i as f64;
        let mut err: f64 = 0.0;
        for j in 0..n {
            let x = env.axis(0).node(j);
            // hull value at x by linear interpolation between hull vertices
            let mut k = 0;
            while k + 1 < hull.len() && xv(hull[k + 1]) < x - 1e-14 {
                k += 1;
            }
            let (a, b) = (hull[k], hull[(k + 1).min(hull.len() - 1)]);
            let hv = if a == b {
                f.values()[a]
            } else {
                let t = (x - xv(a)) / (xv(b) - xv(a));
                f.values()[a] * (1.0 - t) + f.values()[b] * t
            };
            err = err.max((env.values()[j] - hv).abs());
        }
        let h = f.axis(0).h();
        assert!(err <= 2.0 * h * h, "hull oracle err {err}");
        // flat segment value ~ 0 at the midpoint
        assert!(env.value_at(&[0.0]).unwrap().abs() < 2.0 * h * h);
        assert!((f.value_at(&[0.0]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn monotonicity_is_exact() {
        let f = grid_1d(-1.0, 1.0, 101, |x| x * x);
        let g = grid_1d(-1.0, 1.0, 101, |x| x * x + 0.1 + 0.05 * (3.0 * x).sin().abs());
        let fs = legendre_transform(&f, &[[-2.0, 2.0]], &[101]).unwrap();
        let gs = legendre_transform(&g, &[[-2.0, 2.0]], &[101]).unwrap();
        for (a, b) in fs.values().iter().zip(gs.values()) {
            assert!(a >= b);
        }
    }

    #[test]
    fn gradient_basics() {
        let f = grid_1d(-2.0, 2.0, 401, |x| 0.5 * x * x);
        let h = f.axis(0).h();
        let g = gradient(&f, &[0.5]).unwrap();
        assert!((g[0] - 0.5).abs() <= h * h);

        let kink = grid_1d(-1.0, 1.0, 201, |x| x.abs());
        let g0 = gradient(&kink, &[0.0]).unwrap();
        assert!(g0[0].abs() < 1e-14, "midpoint of the subdifferential at a kink");

        let f2 = GridFn::sample(
            vec![Axis::new(-2.0, 2.0, 201).unwrap(), Axis::new(-2.0, 2.0, 201).unwrap()],
            |x| x[0] * x[0] + 3.0 * x[1] * x[1],
        )
        .unwrap();
        let g2 = gradient(&f2, &[1.0, 1.0]).unwrap();
        assert!((g2[0] - 2.0).abs() < 1e-10);
        assert!((g2[1] - 6.0).abs() < 1e-10);
    }

    #[test]
    fn gradient_outside_margin_errors() {
        let f = grid_1d(-1.0, 1.0, 101, |x| x * x);
        assert!(gradient(&f, &[0.999]).is_err());
        assert!(hessian(&f, &[0.99]).is_err());
    }

    #[test]
    fn convexity_report_examples() {
        let tol = Tolerances::default();
        let f = grid_1d(0.0, 1.0, 101, |y| 0.5 * y * y);
        let rep = convexity_report(&f, &tol).unwrap();
        assert!((rep.min_margin - 1.0).abs() < 1e-9);
        assert!(rep.is_convex);

        let g = grid_1d(0.0, 1.0, 101, |y| -y * y);
        let rep = convexity_report(&g, &tol).unwrap();
        assert!((rep.min_margin + 2.0).abs() < 1e-9);
        assert!(!rep.is_convex);

        // u0 + s*udot0 with u0 = y^2, udot0 = -y^2 at s = 0.5
        let u0 = grid_1d(0.0, 1.0, 101, |y| y * y);
        let udot = grid_1d(0.0, 1.0, 101, |y| -y * y);
        let mix = u0.lin_comb(1.0, &udot, 0.5).unwrap();
        let rep = convexity_report(&mix, &tol).unwrap();
        assert!((rep.min_margin - 1.0).abs() < 1e-9);
    }

    #[test]
    fn report_rejects_coarse_grids() {
        let f = grid_1d(0.0, 1.0, 4, |y| y * y);
        assert!(matches!(convexity_report(&f, &Tolerances::default()), Err(Error::GridTooCoarse(_))));
    }

    #[test]
    fn invert_gradient_quadratic_and_logistic() {
        let tol = Tolerances::default();
        let f = grid_1d(-2.0, 2.0, 401, |x| 0.5 * x * x);
        let x = invert_gradient(&f, &[0.3], &tol).unwrap();
        assert!((x[0] - 0.3).abs() < 1e-8);

        let logi = grid_1d(-8.0, 8.0, 801, |x| (1.0 + x.exp()).ln());
        let x = invert_gradient(&logi, &[0.5], &tol).unwrap();
        assert!(x[0].abs() < 1e-6, "logistic gradient is 1/2 exactly at 0, got {}", x[0]);
    }

    #[test]
    fn invert_gradient_out_of_range() {
        let f = grid_1d(-1.0, 1.0, 101, |x| 0.5 * x * x);
        assert!(matches!(
            invert_gradient(&f, &[5.0], &Tolerances::default()),
            Err(Error::GradientOutOfRange(_))
        ));
    }

    #[test]
    fn invert_gradient_round_trip_random_quartic() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        let (a, b, c) = (
            0.5 + rng.gen::<f64>(),
            0.2 * rng.gen::<f64>(),
            0.5 * rng.gen::<f64>() - 0.25,
        );
        let f = grid_1d(-1.5, 1.5, 601, |x| {
            a * (x - c) * (x - c) + b * (x - c).powi(4)
        });
        let tol = Tolerances::default();
        let [lo, hi] = f.slope_range(0);
        for _ in 0..20 {
            let y = lo + (hi - lo) * (0.05 + 0.9 * rng.gen::<f64>());
            let x = invert_gradient(&f, &[y], &tol).unwrap();
            let g = gradient(&f, &x).unwrap();
            assert!((g[0] - y).abs() < 1e-8, "round trip residual {}", (g[0] - y).abs());
        }
    }

    #[test]
    fn gradient_duality_round_trip() {
        // grad(f*)(grad f(x)) = x within 5h
        let f = grid_1d(-8.0, 8.0, 801, |x| (1.0 + x.exp()).ln());
        let h = f.axis(0).h();
        let [lo, hi] = f.slope_range(0);
        let conj = legendre_transform(&f, &[[lo, hi]], &[801]).unwrap();
        for &x in &[-3.0, -1.0, 0.0, 0.7, 2.5] {
            let y = gradient(&f, &[x]).unwrap();
            let back = gradient(&conj, &[y[0]]).unwrap();
            assert!((back[0] - x).abs() <= 5.0 * h, "duality gap {}", (back[0] - x).abs());
        }
    }

    #[test]
    fn hessian_duality() {
        let f = grid_1d(-1.5, 1.5, 601, |x| 0.5 * x * x + 0.25 * x.powi(4));
        let [lo, hi] = f.slope_range(0);
        // keep the dual grid at the argmax staircase scale, otherwise the
        // conjugate's second differences degenerate cellwise
        let max_step = (1.0 + 3.0 * 1.5 * 1.5) * f.axis(0).h();
        let n_dual = ((hi - lo) / (1.1 * max_step)).floor() as usize + 1;
        let conj = legendre_transform(&f, &[[lo, hi]], &[n_dual]).unwrap();
        let h_dual = conj.axis(0).h();
        for &x in &[-0.8, -0.2, 0.4, 1.0] {
            let y = gradient(&f, &[x]).unwrap();
            let hf = hessian(&f, &[x]).unwrap()[0];
            let hg = hessian(&conj, &[y[0]]).unwrap()[0];
            assert!(
                (hf * hg - 1.0).abs() < 8.0 * h_dual,
                "product {} (h_dual {h_dual})",
                hf * hg
            );
        }
    }
}
