//! Hamilton-Jacobi reduction of the ray problem: the Hamiltonian
//! F(sigma, xi) = sigma + udot0(xi), exact characteristic tracing, caustic
//! detection, the Hopf-Lax pointwise value, and residual verification of
//! candidate solutions.

use serde::{Deserialize, Serialize};

use crate::cauchy::CauchyData;
use crate::convex;
use crate::error::{Error, Result};
use crate::grid::GridFn;

/// Characteristics of the Hamilton-Jacobi equation, stored by their exact
/// affine data: momenta are constant in s, positions and values are affine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharStrip {
    pub seeds: Vec<Vec<f64>>,
    /// Constant momentum p_sigma = psidot0(seed).
    pub p_sigma: Vec<f64>,
    /// Constant momentum p_xi = grad psi0(seed).
    pub p_xi: Vec<Vec<f64>>,
    /// Leaf directions grad udot0(p_xi).
    pub directions: Vec<Vec<f64>>,
    /// Initial values psi0(seed).
    pub z0: Vec<f64>,
    pub s_grid: Vec<f64>,
    /// Seed mesh shape when the seeds form a structured 2-D mesh.
    pub mesh: Option<[usize; 2]>,
}

impl CharStrip {
    pub fn len(&self) -> usize {
        self.seeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seeds.is_empty()
    }

    /// Projected characteristic position x0 + s * grad udot0(p_xi).
    pub fn position(&self, seed: usize, s: f64) -> Vec<f64> {
        self.seeds[seed]
            .iter()
            .zip(&self.directions[seed])
            .map(|(x, w)| x + s * w)
            .collect()
    }

    /// Value along the characteristic:
    /// z(s) = psi0(x0) + s * (p_sigma + <grad udot0(p_xi), p_xi>).
    pub fn value(&self, seed: usize, s: f64) -> f64 {
        let dot: f64 = self.directions[seed]
            .iter()
            .zip(&self.p_xi[seed])
            .map(|(a, b)| a * b)
            .sum();
        self.z0[seed] + s * (self.p_sigma[seed] + dot)
    }
}

/// First intersection of the traced characteristics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausticReport {
    /// `f64::INFINITY` when no crossing occurs.
    pub first_crossing_s: f64,
    pub crossing_pair: [usize; 2],
    pub location: Vec<f64>,
    /// Largest gap between adjacent seeds: the detected time is exact for
    /// the seeded family and within this resolution of the true infimum.
    pub seed_resolution: f64,
}

/// The Hamiltonian of the reduced problem, F(sigma, xi) = sigma + udot0(xi).
/// Vanishes identically on the graph sigma = -udot0(xi).
pub fn hamiltonian(data: &CauchyData, sigma: f64, xi: &[f64]) -> Result<f64> {
    Ok(sigma + data.udot0.value_at(xi)?)
}

/// Trace characteristics through the seeds. The momenta are constant, so
/// the characteristic ODEs integrate exactly and no stepping is performed;
/// positions and values are affine in s.
pub fn trace_characteristics(
    data: &CauchyData,
    seeds: &[Vec<f64>],
    s_grid: &[f64],
) -> Result<CharStrip> {
    let mut strip = CharStrip {
        seeds: Vec::with_capacity(seeds.len()),
        p_sigma: Vec::with_capacity(seeds.len()),
        p_xi: Vec::with_capacity(seeds.len()),
        directions: Vec::with_capacity(seeds.len()),
        z0: Vec::with_capacity(seeds.len()),
        s_grid: s_grid.to_vec(),
        mesh: None,
    };
    for x0 in seeds {
        let p_xi = data.grad_psi0(x0)?;
        let p_sigma = -data.udot0.value_at(&p_xi)?;
        let w = convex::gradient(&data.udot0, &p_xi)?;
        let dot: f64 = x0.iter().zip(&p_xi).map(|(a, b)| a * b).sum();
        let z0 = dot - data.u0.value_at(&p_xi)?;
        strip.seeds.push(x0.clone());
        strip.p_sigma.push(p_sigma);
        strip.p_xi.push(p_xi);
        strip.directions.push(w);
        strip.z0.push(z0);
    }
    Ok(strip)
}

/// First pairwise crossing of the characteristic family.
///
/// In one dimension adjacent trajectories are affine, so the crossing time
/// of a pair is exact: s = (x0_j - x0_i) / (w_i - w_j). In two dimensions
/// the first sign change of the per-cell mesh Jacobian det(I + s*G) is
/// located through its quadratic roots.
pub fn caustic_time(strip: &CharStrip) -> Result<CausticReport> {
    if strip.len() < 2 {
        return Err(Error::InvalidArgument(
            "caustic detection needs at least 2 seeds".into(),
        ));
    }
    match strip.mesh {
        None => caustic_1d(strip),
        Some(shape) => caustic_mesh(strip, shape),
    }
}

fn caustic_1d(strip: &CharStrip) -> Result<CausticReport> {
    let mut order: Vec<usize> = (0..strip.len()).collect();
    order.sort_by(|&a, &b| strip.seeds[a][0].total_cmp(&strip.seeds[b][0]));
    let mut best = f64::INFINITY;
    let mut pair = [0usize, 0usize];
    let mut resolution = 0.0_f64;
    for w in order.windows(2) {
        let (i, j) = (w[0], w[1]);
        let dx = strip.seeds[j][0] - strip.seeds[i][0];
        resolution = resolution.max(dx);
        let dw = strip.directions[i][0] - strip.directions[j][0];
        if dw > 0.0 {
            let s = dx / dw;
            if s < best {
                best = s;
                pair = [i, j];
            }
        }
    }
    let location = if best.is_finite() {
        strip.position(pair[0], best)
    } else {
        Vec::new()
    };
    Ok(CausticReport {
        first_crossing_s: best,
        crossing_pair: pair,
        location,
        seed_resolution: resolution,
    })
}

fn caustic_mesh(strip: &CharStrip, shape: [usize; 2]) -> Result<CausticReport> {
    let [n0, n1] = shape;
    if n0 * n1 != strip.len() || n0 < 2 || n1 < 2 {
        return Err(Error::InvalidArgument(
            "mesh shape does not match seed count".into(),
        ));
    }
    let idx = |i: usize, j: usize| i * n1 + j;
    let mut best = f64::INFINITY;
    let mut pair = [0usize, 0usize];
    for i in 0..n0 - 1 {
        for j in 0..n1 - 1 {
            let a = idx(i, j);
            let b = idx(i + 1, j);
            let c = idx(i, j + 1);
            let h0 = strip.seeds[b][0] - strip.seeds[a][0];
            let h1 = strip.seeds[c][1] - strip.seeds[a][1];
            if h0.abs() < 1e-300 || h1.abs() < 1e-300 {
                continue;
            }
            // velocity gradient G from forward differences on the cell
            let g = [
                (strip.directions[b][0] - strip.directions[a][0]) / h0,
                (strip.directions[c][0] - strip.directions[a][0]) / h1,
                (strip.directions[b][1] - strip.directions[a][1]) / h0,
                (strip.directions[c][1] - strip.directions[a][1]) / h1,
            ];
            if let Some(s) = first_singular_time(&g) {
                if s < best {
                    best = s;
                    pair = [a, b];
                }
            }
        }
    }
    let location = if best.is_finite() {
        strip.position(pair[0], best)
    } else {
        Vec::new()
    };
    Ok(CausticReport {
        first_crossing_s: best,
        crossing_pair: pair,
        location,
    })
}

/// Smallest positive root of det(I + s G) = 1 + s tr(G) + s^2 det(G).
fn first_singular_time(g: &[f64; 4]) -> Option<f64> {
    let tr = g[0] + g[3];
    let det = g[0] * g[3] - g[1] * g[2];
    let candidates: Vec<f64> = if det.abs() < 1e-14 {
        if tr.abs() < 1e-300 {
            return None;
        }
        vec![-1.0 / tr]
    } else {
        let disc = tr * tr - 4.0 * det;
        if disc < 0.0 {
            return None;
        }
        let sq = disc.sqrt();
        vec![(-tr - sq) / (2.0 * det), (-tr + sq) / (2.0 * det)]
    };
    candidates
        .into_iter()
        .filter(|s| *s > 0.0)
        .fold(None, |acc: Option<f64>, s| Some(acc.map_or(s, |a| a.min(s))))
}

/// Pointwise Hopf-Lax value sup_y [<y, x> - u0(y) - s*udot0(y)] over the
/// dual grid nodes. Serves as the independent oracle for ray slices.
pub fn hopf_lax_value(data: &CauchyData, s: f64, x: &[f64]) -> f64 {
    let u0 = &data.u0;
    let ud = &data.udot0;
    let mut sup = f64::NEG_INFINITY;
    match u0.dim() {
        1 => {
            let ax = u0.axis(0);
            for i in 0..ax.n {
                let y = ax.node(i);
                sup = sup.max(x[0] * y - u0.values()[i] - s * ud.values()[i]);
            }
        }
        _ => {
            let (a0, a1) = (u0.axis(0), u0.axis(1));
            for i in 0..a0.n {
                for j in 0..a1.n {
                    let y0 = a0.node(i);
                    let y1 = a1.node(j);
                    let v = u0.values()[i * a1.n + j] + s * ud.values()[i * a1.n + j];
                    sup = sup.max(x[0] * y0 + x[1] * y1 - v);
                }
            }
        }
    }
    sup
}

/// Residual report of a candidate spacetime solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HjResidualReport {
    /// sup over unflagged interior samples of |d_s eta + udot0(grad_x eta)|.
    pub sup_residual: f64,
    /// Fraction of interior samples excluded as discretely flat.
    pub flagged_fraction: f64,
    pub samples: usize,
}

/// Evaluate |d_s eta + udot0(grad_x eta)| over interior nodes of a per-s
/// family of slices on a shared x-grid with uniform s spacing.
///
/// Nodes whose slice is discretely flat (second difference below
/// 10 * tol_cvx at the node) are flagged and excluded: there the classical
/// equation is not expected to hold pointwise. A spatial gradient escaping
/// the dual grid is an admissibility violation and is reported as an error.
pub fn hj_residual(
    s_grid: &[f64],
    slices: &[GridFn],
    data: &CauchyData,
) -> Result<HjResidualReport> {
    if s_grid.len() != slices.len() || s_grid.len() < 3 {
        return Err(Error::InvalidArgument(
            "need at least 3 slices with matching s_grid".into(),
        ));
    }
    let ds = s_grid[1] - s_grid[0];
    if s_grid
        .windows(2)
        .any(|w| ((w[1] - w[0]) - ds).abs() > 1e-9 * ds.max(1e-300))
    {
        return Err(Error::InvalidArgument(
            "hj_residual requires a uniform s_grid".into(),
        ));
    }
    for s in slices.windows(2) {
        if s[0].axes() != s[1].axes() {
            return Err(Error::InvalidGrid("slices must share the x-grid".into()));
        }
    }

    let flat_tol = 10.0 * data.tol.tol_cvx * slices[0].value_scale();
    let dual_box: Vec<[f64; 2]> = data.u0.axes().iter().map(|a| [a.lo, a.hi]).collect();

    let mut sup = 0.0_f64;
    let mut flagged = 0usize;
    let mut total = 0usize;
    let dim = slices[0].dim();
    let shape = slices[0].shape();

    let mut visit = |k: usize, idx: &[usize]| -> Result<()> {
        total += 1;
        let slice = &slices[k];
        // flat or truncation-pinned within two nodes in any of the three
        // slices entering the s-difference: flagged, not evaluated
        let strict = slices[k - 1].locally_strict(idx, 2, flat_tol)
            && slice.locally_strict(idx, 2, flat_tol)
            && slices[k + 1].locally_strict(idx, 2, flat_tol);
        if !strict {
            flagged += 1;
            return Ok(());
        }
        let mut grad = Vec::with_capacity(dim);
        for axis in 0..dim {
            grad.push(slice.node_deriv(idx, axis));
        }
        for (g, b) in grad.iter().zip(&dual_box) {
            if *g < b[0] - 1e-9 || *g > b[1] + 1e-9 {
                let point: Vec<f64> = idx
                    .iter()
                    .enumerate()
                    .map(|(a, &i)| slice.axis(a).node(i))
                    .collect();
                return Err(Error::GradientEscapesDual { point });
            }
        }
        let grad_clamped: Vec<f64> = grad
            .iter()
            .zip(&dual_box)
            .map(|(g, b)| g.clamp(b[0], b[1]))
            .collect();
        let dt = (slices[k + 1].at(idx) - slices[k - 1].at(idx)) / (2.0 * ds);
        let r = (dt + data.udot0.value_at(&grad_clamped)?).abs();
        sup = sup.max(r);
        Ok(())
    };

    // a 3-node boundary margin keeps stencils clear of box-edge pinning
    // too thin for the flatness filter to see
    for k in 1..s_grid.len() - 1 {
        match dim {
            1 => {
                for i in 3..shape[0] - 3 {
                    visit(k, &[i])?;
                }
            }
            _ => {
                for i in 3..shape[0] - 3 {
                    for j in 3..shape[1] - 3 {
                        visit(k, &[i, j])?;
                    }
                }
            }
        }
    }
    Ok(HjResidualReport {
        sup_residual: sup,
        flagged_fraction: flagged as f64 / total.max(1) as f64,
        samples: total,
    })
}
