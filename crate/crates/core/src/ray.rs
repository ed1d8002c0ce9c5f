//! The Legendre-transform ray psi_L(s, x) = (u0 + s*udot0)*(x), slice
//! admissibility against the moment polytope, and the lift of the ray to a
//! relative potential on spacetime.

use serde::{Deserialize, Serialize};

use crate::cauchy::{convex_lifespan, CauchyData, Lifespan};
use crate::convex::legendre_transform;
use crate::error::{Error, Result};
use crate::grid::GridFn;
use crate::polytope::Polytope;

/// The Legendre ray: one convex slice per time in `s_grid`, the convex
/// lifespan of the data, and per-slice admissibility flags.
#[derive(Debug, Clone)]
pub struct RaySolution {
    pub data: CauchyData,
    pub s_grid: Vec<f64>,
    pub slices: Vec<GridFn>,
    pub lifespan: Lifespan,
    pub admissible: Vec<bool>,
}

impl RaySolution {
    pub fn x_box(&self) -> Vec<[f64; 2]> {
        self.slices[0].axes().iter().map(|a| [a.lo, a.hi]).collect()
    }

    pub fn slice_at(&self, k: usize) -> &GridFn {
        &self.slices[k]
    }
}

/// Thresholds for slice admissibility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityParams {
    /// Largest tolerated uncovered ball radius in P (default: two dual cells).
    pub ball_tol: f64,
    /// Largest tolerated interior flat region, as an x-length.
    pub flat_len_tol: f64,
    /// Collar around the boundary of P inside which flats are attributed to
    /// domain truncation rather than envelope formation.
    pub flat_collar: f64,
    /// Slopes closer than this are considered equal.
    pub slope_eq_tol: f64,
}

impl AdmissibilityParams {
    /// Defaults derived from the dual sampling grid and the slice box width.
    pub fn from_data(data: &CauchyData, x_width: f64) -> Self {
        let h_dual = data
            .u0
            .axes()
            .iter()
            .map(|a| a.h())
            .fold(0.0_f64, f64::max);
        let ball_tol = 2.0 * h_dual;
        AdmissibilityParams {
            ball_tol,
            flat_len_tol: 0.02 * x_width,
            flat_collar: 4.0 * ball_tol,
            slope_eq_tol: 1e-9,
        }
    }
}

/// Diagnostics of the admissibility test: strict convexity of the slice and
/// coverage of the polytope by its gradient range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub admissible: bool,
    pub strictly_convex: bool,
    pub covers_polytope: bool,
    /// Radius of the largest ball in P missed by the attained gradients.
    pub largest_uncovered_ball: f64,
    /// Largest flat x-length whose slope lies well inside P.
    pub largest_flat_interior: f64,
    /// Largest flat x-length anywhere, including truncation-pinned regions.
    pub largest_flat_any: f64,
}

/// Just the conjugate slices of u0 + s*udot0 on a fixed x-grid, without
/// lifespan or admissibility bookkeeping.
pub fn ray_slices(
    data: &CauchyData,
    s_grid: &[f64],
    x_box: &[[f64; 2]],
    x_shape: &[usize],
) -> Result<Vec<GridFn>> {
    validate_s_grid(s_grid)?;
    s_grid
        .iter()
        .map(|&s| legendre_transform(&data.us(s), x_box, x_shape))
        .collect()
}

/// Compute the Legendre ray on a fixed x-grid.
///
/// Each slice is the discrete conjugate of u0 + s*udot0; past the lifespan
/// this automatically equals the conjugate of the convex envelope, so no
/// separate envelope step is needed. Admissibility flags are evaluated per
/// slice on an adaptively refined x-grid (see [`admissible_slice_shape`]).
pub fn legendre_ray(
    data: &CauchyData,
    s_grid: &[f64],
    x_box: &[[f64; 2]],
    x_shape: &[usize],
) -> Result<RaySolution> {
    validate_s_grid(s_grid)?;
    let lifespan = convex_lifespan(data)?;
    let width = x_box.iter().map(|b| b[1] - b[0]).fold(0.0_f64, f64::max);
    let params = AdmissibilityParams::from_data(data, width);
    let mut slices = Vec::with_capacity(s_grid.len());
    let mut admissible = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        let us = data.us(s);
        let slice = legendre_transform(&us, x_box, x_shape)?;
        let fine_shape = admissible_slice_shape(&us, x_box, params.ball_tol);
        let fine = legendre_transform(&us, x_box, &fine_shape)?;
        let report = admissibility_check(&fine, &data.polytope, &params)?;
        admissible.push(report.admissible);
        slices.push(slice);
    }
    Ok(RaySolution {
        data: data.clone(),
        s_grid: s_grid.to_vec(),
        slices,
        lifespan,
        admissible,
    })
}

fn validate_s_grid(s_grid: &[f64]) -> Result<()> {
    if s_grid.is_empty() || s_grid[0] != 0.0 {
        return Err(Error::InvalidArgument("s_grid must start at 0".into()));
    }
    if s_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("s_grid must be strictly increasing".into()));
    }
    Ok(())
}

/// x-resolution needed so that smooth slices step their slopes by less than
/// the coverage tolerance: the slice curvature is bounded by the inverse of
/// the smallest Hessian eigenvalue of u0 + s*udot0.
pub fn admissible_slice_shape(us: &GridFn, x_box: &[[f64; 2]], ball_tol: f64) -> Vec<usize> {
    let margin = us.discrete_convexity_margin().abs().max(1e-3);
    x_box
        .iter()
        .map(|b| {
            let h = ball_tol * margin;
            let n = ((b[1] - b[0]) / h).ceil() as usize + 1;
            n.clamp(65, 100_001)
        })
        .collect()
}

/// Admissibility of a convex slice: the slice must be strictly convex away
/// from domain truncation, and its attained gradients must fill the moment
/// polytope up to the coverage tolerance.
pub fn admissibility_check(
    slice: &GridFn,
    polytope: &Polytope,
    params: &AdmissibilityParams,
) -> Result<AdmissibilityReport> {
    if slice.dim() != polytope.dim() {
        return Err(Error::InvalidArgument("slice/polytope dimension mismatch".into()));
    }
    match slice.dim() {
        1 => admissibility_1d(slice, polytope, params),
        _ => admissibility_2d(slice, polytope, params),
    }
}

fn admissibility_1d(
    slice: &GridFn,
    polytope: &Polytope,
    params: &AdmissibilityParams,
) -> Result<AdmissibilityReport> {
    let ax = slice.axis(0);
    let h = ax.h();
    let v = slice.values();
    let p_box = polytope.bounding_box()[0];
    let scale = 1.0 + p_box[0].abs().max(p_box[1].abs());
    let eq = params.slope_eq_tol * scale;

    // group consecutive equal cell slopes into levels with x-run lengths
    let mut levels: Vec<(f64, f64)> = Vec::new(); // (slope, x-length)
    for i in 0..ax.n - 1 {
        let m = (v[i + 1] - v[i]) / h;
        match levels.last_mut() {
            Some((slope, len)) if (m - *slope).abs() <= eq => *len += h,
            _ => levels.push((m, h)),
        }
    }

    let mut largest_flat_any = 0.0_f64;
    let mut largest_flat_interior = 0.0_f64;
    for &(slope, len) in &levels {
        if len <= h + 1e-15 {
            continue; // single cell, not a flat
        }
        largest_flat_any = largest_flat_any.max(len);
        let interior =
            slope >= p_box[0] + params.flat_collar && slope <= p_box[1] - params.flat_collar;
        if interior {
            largest_flat_interior = largest_flat_interior.max(len);
        }
    }

    // coverage: gaps between consecutive attained slopes plus edge gaps
    let mut ball = 0.0_f64;
    if let (Some(first), Some(last)) = (levels.first(), levels.last()) {
        ball = ball.max(0.5 * (first.0 - p_box[0]).max(0.0));
        ball = ball.max(0.5 * (p_box[1] - last.0).max(0.0));
    }
    for w in levels.windows(2) {
        ball = ball.max(0.5 * (w[1].0 - w[0].0));
    }

    let strictly_convex = largest_flat_interior <= params.flat_len_tol;
    let covers_polytope = ball <= params.ball_tol;
    Ok(AdmissibilityReport {
        admissible: strictly_convex && covers_polytope,
        strictly_convex,
        covers_polytope,
        largest_uncovered_ball: ball,
        largest_flat_interior,
        largest_flat_any,
    })
}

fn admissibility_2d(
    slice: &GridFn,
    polytope: &Polytope,
    params: &AdmissibilityParams,
) -> Result<AdmissibilityReport> {
    let (a0, a1) = (slice.axis(0), slice.axis(1));
    // gradient samples at interior nodes, decimated to a workable count
    let stride0 = ((a0.n - 2) / 160).max(1);
    let stride1 = ((a1.n - 2) / 160).max(1);
    let mut grads: Vec<[f64; 2]> = Vec::new();
    let mut i = 1;
    while i < a0.n - 1 {
        let mut j = 1;
        while j < a1.n - 1 {
            grads.push([
                slice.node_deriv(&[i, j], 0),
                slice.node_deriv(&[i, j], 1),
            ]);
            j += stride1;
        }
        i += stride0;
    }

    // probe P on a grid of its bounding box; largest uncovered ball radius
    let bb = polytope.bounding_box();
    let probes = 48usize;
    let mut ball = 0.0_f64;
    for pi in 0..=probes {
        for pj in 0..=probes {
            let y = [
                bb[0][0] + (bb[0][1] - bb[0][0]) * pi as f64 / probes as f64,
                bb[1][0] + (bb[1][1] - bb[1][0]) * pj as f64 / probes as f64,
            ];
            let slack = polytope.slack(&y);
            if slack <= 0.0 {
                continue;
            }
            let d = grads
                .iter()
                .map(|g| ((g[0] - y[0]).powi(2) + (g[1] - y[1]).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min);
            // a witness ball must fit inside P
            ball = ball.max(d.min(slack));
        }
    }

    // flats along axis lines
    let mut largest_flat_any = 0.0_f64;
    let mut largest_flat_interior = 0.0_f64;
    let scale = 1.0 + bb.iter().map(|b| b[1].abs().max(b[0].abs())).fold(0.0, f64::max);
    let eq = params.slope_eq_tol * scale;
    for axis in 0..2 {
        let (n_line, n_pos, h) = if axis == 0 {
            (a1.n, a0.n, a0.h())
        } else {
            (a0.n, a1.n, a1.h())
        };
        for line in (0..n_line).step_by(if axis == 0 { stride1 } else { stride0 }) {
            let mut run_len = 0.0;
            let mut prev: Option<f64> = None;
            for pos in 0..n_pos - 1 {
                let (ia, ib) = if axis == 0 {
                    ([pos, line], [pos + 1, line])
                } else {
                    ([line, pos], [line, pos + 1])
                };
                let m = (slice.at(&ib) - slice.at(&ia)) / h;
                if let Some(pm) = prev {
                    if (m - pm).abs() <= eq {
                        run_len += h;
                    } else {
                        run_len = 0.0;
                    }
                }
                if run_len > h + 1e-15 {
                    largest_flat_any = largest_flat_any.max(run_len);
                    // interior if the shared slope sits deep inside P on this axis
                    let g = if axis == 0 {
                        [m, slice.node_deriv(&[pos.clamp(1, a0.n - 2), line.clamp(1, a1.n - 2)], 1)]
                    } else {
                        [slice.node_deriv(&[line.clamp(1, a0.n - 2), pos.clamp(1, a1.n - 2)], 0), m]
                    };
                    if polytope.slack(&g) >= params.flat_collar {
                        largest_flat_interior = largest_flat_interior.max(run_len);
                    }
                }
                prev = Some(m);
            }
        }
    }

    let strictly_convex = largest_flat_interior <= params.flat_len_tol;
    let covers_polytope = ball <= params.ball_tol;
    Ok(AdmissibilityReport {
        admissible: strictly_convex && covers_polytope,
        strictly_convex,
        covers_polytope,
        largest_uncovered_ball: ball,
        largest_flat_interior,
        largest_flat_any,
    })
}

/// The relative potential of the ray on spacetime: phi(s, x) =
/// psi_L(s, x) - psi_L(0, x); identically zero at s = 0 and independent of
/// the torus angles by construction.
#[derive(Debug, Clone)]
pub struct LiftField {
    pub s_grid: Vec<f64>,
    pub slices: Vec<GridFn>,
}

pub fn hcma_lift(ray: &RaySolution) -> Result<LiftField> {
    if let Some((psi0, _)) = &ray.data.primal {
        // the slice box must contain the primal box so phi is defined there
        for (sa, pa) in ray.slices[0].axes().iter().zip(psi0.axes()) {
            if pa.lo < sa.lo - 1e-12 || pa.hi > sa.hi + 1e-12 {
                return Err(Error::WindowMismatch(
                    "ray slice box does not contain the primal psi0 box".into(),
                ));
            }
        }
    }
    let base = ray.slices[0].clone();
    let slices = ray
        .slices
        .iter()
        .map(|s| s.lin_comb(1.0, &base, -1.0))
        .collect::<Result<Vec<_>>>()?;
    Ok(LiftField {
        s_grid: ray.s_grid.clone(),
        slices,
    })
}
