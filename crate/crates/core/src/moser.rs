//! Moser maps of the complexified Hamiltonian flow on the open orbit:
//! f_s = grad(u0 + s*udot0) o (grad u0)^{-1}, their Jacobians and inverses,
//! the straight leaves they sweep out, and the conservation-law check
//! psidot_s o f_s = psidot_0 along a computed ray.

use serde::{Deserialize, Serialize};

use crate::cauchy::{convex_lifespan, CauchyData};
use crate::convex;
use crate::error::{Error, Result};
use crate::ray::RaySolution;

/// One evaluated flow sample: input point, image, Jacobian determinant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSample {
    pub x: Vec<f64>,
    pub image: Vec<f64>,
    pub jac_det: f64,
}

/// The Moser map at a fixed time, evaluated on a sample set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowMap {
    pub s: f64,
    pub samples: Vec<FlowSample>,
}

/// A leaf of the foliation: the straight line (s, base + s*direction).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaf {
    pub base: Vec<f64>,
    /// grad udot0(grad psi0(base)), constant along the leaf.
    pub direction: Vec<f64>,
    pub s_max: f64,
}

impl Leaf {
    pub fn position(&self, s: f64) -> Vec<f64> {
        self.base
            .iter()
            .zip(&self.direction)
            .map(|(x, w)| x + s * w)
            .collect()
    }
}

/// Evaluate the Moser map f_s(x) = x + s * grad udot0(grad psi0(x)).
/// Defined for every s >= 0; invertibility is a separate question.
pub fn moser_map(data: &CauchyData, s: f64, x: &[f64]) -> Result<Vec<f64>> {
    let y = data.grad_psi0(x)?;
    let w = convex::gradient(&data.udot0, &y)?;
    Ok(x.iter().zip(&w).map(|(xi, wi)| xi + s * wi).collect())
}

/// Jacobian determinant of f_s at x by central finite differences.
/// The dual Hessian composition det(H(u_s)) / det(H(u0)) is the
/// independent route used by tests.
pub fn jacobian_det(data: &CauchyData, s: f64, x: &[f64]) -> Result<f64> {
    let dim = data.u0.dim();
    let deltas: Vec<f64> = (0..dim)
        .map(|k| {
            let [lo, hi] = data.u0.slope_range(k);
            1e-3 * (hi - lo)
        })
        .collect();
    let mut jac = vec![0.0; dim * dim];
    for k in 0..dim {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[k] += deltas[k];
        xm[k] -= deltas[k];
        let fp = moser_map(data, s, &xp)?;
        let fm = moser_map(data, s, &xm)?;
        for r in 0..dim {
            jac[r * dim + k] = (fp[r] - fm[r]) / (2.0 * deltas[k]);
        }
    }
    Ok(match dim {
        1 => jac[0],
        _ => jac[0] * jac[3] - jac[1] * jac[2],
    })
}

/// Default sample sweep: images under grad u0 of a centered, strided subset
/// of interior dual nodes (the middle node is always included).
pub fn default_samples(data: &CauchyData, max_count: usize) -> Result<Vec<Vec<f64>>> {
    let u0 = &data.u0;
    let mut samples = Vec::new();
    match u0.dim() {
        1 => {
            let n = u0.axis(0).n;
            let mid = n / 2;
            let margin = 4usize;
            let stride = ((n - 2 * margin) / max_count.max(1)).max(1);
            let mut offsets: Vec<isize> = vec![0];
            let mut k = 1isize;
            loop {
                let step = k * stride as isize;
                let (a, b) = (mid as isize - step, mid as isize + step);
                if a < margin as isize && b >= (n - margin) as isize {
                    break;
                }
                if a >= margin as isize {
                    offsets.push(-step);
                }
                if b < (n - margin) as isize {
                    offsets.push(step);
                }
                k += 1;
            }
            for off in offsets {
                let i = (mid as isize + off) as usize;
                samples.push(vec![u0.node_deriv(&[i], 0)]);
            }
        }
        _ => {
            let (n0, n1) = (u0.axis(0).n, u0.axis(1).n);
            let per_axis = (max_count as f64).sqrt().ceil() as usize;
            let s0 = ((n0 - 8) / per_axis.max(1)).max(1);
            let s1 = ((n1 - 8) / per_axis.max(1)).max(1);
            let mut i = 4;
            while i < n0 - 4 {
                let mut j = 4;
                while j < n1 - 4 {
                    samples.push(vec![
                        u0.node_deriv(&[i, j], 0),
                        u0.node_deriv(&[i, j], 1),
                    ]);
                    j += s1;
                }
                i += s0;
            }
        }
    }
    Ok(samples)
}

/// Scan the default samples: true iff every Jacobian determinant stays
/// above the determinant floor. Agrees with s < convex lifespan away from
/// a small bracket around it.
pub fn invertibility_check(data: &CauchyData, s: f64) -> Result<(bool, f64)> {
    let samples = default_samples(data, 80)?;
    let mut min_det = f64::INFINITY;
    for x in &samples {
        let d = jacobian_det(data, s, x)?;
        min_det = min_det.min(d);
    }
    let floor = data.tol.tol_det;
    Ok((min_det > floor, min_det))
}

/// Evaluate f_s on a sample set, with Jacobians.
pub fn flow_map(data: &CauchyData, s: f64, xs: &[Vec<f64>]) -> Result<FlowMap> {
    let mut samples = Vec::with_capacity(xs.len());
    for x in xs {
        let image = moser_map(data, s, x)?;
        let jac_det = jacobian_det(data, s, x)?;
        samples.push(FlowSample {
            x: x.clone(),
            image,
            jac_det,
        });
    }
    Ok(FlowMap { s, samples })
}

/// Invert f_s through the dual gradients: x = grad u0((grad u_s)^{-1}(target)).
/// Only defined below the convex lifespan.
pub fn moser_inverse(data: &CauchyData, s: f64, target: &[f64]) -> Result<Vec<f64>> {
    let lifespan = convex_lifespan(data)?;
    if s >= lifespan.value {
        return Err(Error::MoserNotInvertible { s });
    }
    let us = data.us(s);
    let y = convex::invert_gradient(&us, target, &data.tol)?;
    convex::gradient(&data.u0, &y)
}

/// Straight leaves through the seeds.
pub fn leaves(data: &CauchyData, seeds: &[Vec<f64>], s_max: f64) -> Result<Vec<Leaf>> {
    seeds
        .iter()
        .map(|x0| {
            let y = data.grad_psi0(x0)?;
            let direction = convex::gradient(&data.udot0, &y)?;
            Ok(Leaf {
                base: x0.clone(),
                direction,
                s_max,
            })
        })
        .collect()
}

/// Conservation-law check along a computed ray.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConservationReport {
    /// sup over samples of |psidot_s(f_s(x)) - psidot_0(x)| with psidot_s
    /// from central s-differences of the ray slices.
    pub sup_error: f64,
    /// sup disagreement between the s-difference route and the dual route
    /// -udot0(grad_x psi_L) for psidot_s.
    pub route_gap: f64,
    pub samples: usize,
}

/// Verify psidot_s o f_s = psidot_0 on the interior of the ray.
///
/// psidot_s is computed two ways: central differences of the slices in s,
/// and -udot0 composed with the spatial gradient of the slice; both are
/// compared against psidot_0(x) = -udot0(grad psi0(x)).
pub fn conservation_check(ray: &RaySolution) -> Result<ConservationReport> {
    let data = &ray.data;
    let s_max = *ray.s_grid.last().unwrap();
    if s_max >= ray.lifespan.value {
        return Err(Error::MoserNotInvertible { s: s_max });
    }
    if ray.s_grid.len() < 3 {
        return Err(Error::InvalidArgument("need at least 3 s-slices".into()));
    }
    let ds = ray.s_grid[1] - ray.s_grid[0];
    if ray
        .s_grid
        .windows(2)
        .any(|w| ((w[1] - w[0]) - ds).abs() > 1e-9 * ds)
    {
        return Err(Error::InvalidArgument(
            "conservation check requires a uniform s_grid".into(),
        ));
    }

    // sample points parametrized by interior dual nodes: x = grad u0(y)
    let base_points = default_samples(data, 60)?;
    let dual_box: Vec<[f64; 2]> = data.u0.axes().iter().map(|a| [a.lo, a.hi]).collect();

    let flat_tol = 10.0 * data.tol.tol_cvx * ray.slices[0].value_scale();
    let mut sup = 0.0_f64;
    let mut gap = 0.0_f64;
    let mut used = 0usize;
    for k in 1..ray.s_grid.len() - 1 {
        let s = ray.s_grid[k];
        let slice = &ray.slices[k];
        for x in &base_points {
            let y = data.grad_psi0(x)?;
            let psidot0 = -data.udot0.value_at(&y)?;
            let w = convex::gradient(&data.udot0, &y)?;
            let image: Vec<f64> = x.iter().zip(&w).map(|(a, b)| a + s * b).collect();
            if !slice.contains_with_margin(&image, 1) {
                continue;
            }
            // the law is asserted where the slices genuinely resolve the
            // smooth solution: skip images near truncation-pinned cells in
            // any of the three slices entering the s-difference
            if !(ray.slices[k - 1].locally_strict_at(&image, 2, flat_tol)
                && slice.locally_strict_at(&image, 2, flat_tol)
                && ray.slices[k + 1].locally_strict_at(&image, 2, flat_tol))
            {
                continue;
            }
            // route 1: central s-difference of the slices, interpolated
            let up = ray.slices[k + 1].value_at(&image)?;
            let dn = ray.slices[k - 1].value_at(&image)?;
            let psidot_s = (up - dn) / (2.0 * ds);
            sup = sup.max((psidot_s - psidot0).abs());
            // route 2: -udot0(grad_x psi_L) at the same point
            let g = convex::gradient(slice, &image)?;
            let g_clamped: Vec<f64> = g
                .iter()
                .zip(&dual_box)
                .map(|(v, b)| v.clamp(b[0], b[1]))
                .collect();
            let dual_route = -data.udot0.value_at(&g_clamped)?;
            gap = gap.max((psidot_s - dual_route).abs());
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::InvalidArgument(
            "no flow samples stayed inside the slice grid".into(),
        ));
    }
    Ok(ConservationReport {
        sup_error: sup,
        route_gap: gap,
        samples: used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cauchy::PresetId;
    use crate::ray::legendre_ray;

    fn quadratic() -> CauchyData {
        CauchyData::preset(PresetId::Quadratic, 401).unwrap()
    }

    #[test]
    fn quadratic_flow_contracts_linearly() {
        // u0 = y^2, udot0 = -y^2 gives f_s(x) = (1 - s) x
        let data = quadratic();
        for &x in &[0.3, 0.9, 1.5] {
            for &s in &[0.0, 0.5, 1.0, 1.3] {
                let f = moser_map(&data, s, &[x]).unwrap();
                assert!(
                    (f[0] - (1.0 - s) * x).abs() < 1e-6,
                    "f_{s}({x}) = {} vs {}",
                    f[0],
                    (1.0 - s) * x
                );
            }
        }
    }

    #[test]
    fn identity_at_zero_and_for_constant_velocity() {
        let drift = CauchyData::preset(PresetId::Drift, 401).unwrap();
        for &x in &[-0.7, 0.0, 0.6] {
            let f0 = moser_map(&drift, 0.0, &[x]).unwrap();
            assert_eq!(f0[0], x, "f_0 is the identity exactly");
            let f3 = moser_map(&drift, 3.0, &[x]).unwrap();
            assert!((f3[0] - x).abs() < 1e-9, "constant velocity freezes the flow");
            assert!((jacobian_det(&drift, 3.0, &[x]).unwrap() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn two_evaluation_routes_agree() {
        let data = CauchyData::preset(PresetId::Logistic, 801).unwrap();
        let h = data.u0.axis(0).h();
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        for _ in 0..20 {
            let x = -2.0 + 4.0 * rng.gen::<f64>();
            let s = 1.5 * rng.gen::<f64>();
            let direct = moser_map(&data, s, &[x]).unwrap();
            // dual composition: grad u_s at the inverted moment point
            let y = data.grad_psi0(&[x]).unwrap();
            let us = data.us(s);
            let dual = convex::gradient(&us, &y).unwrap();
            assert!(
                (direct[0] - dual[0]).abs() <= 5.0 * h,
                "routes differ by {}",
                (direct[0] - dual[0]).abs()
            );
        }
    }

    #[test]
    fn jacobian_matches_closed_form_and_dual_route() {
        let data = quadratic();
        let d = jacobian_det(&data, 0.5, &[0.8]).unwrap();
        assert!((d - 0.5).abs() < 1e-6, "det = {d}");
        let d = jacobian_det(&data, 1.2, &[0.8]).unwrap();
        assert!((d + 0.2).abs() < 1e-6, "det = {d}");
        // dual route: det H(u_s) / det H(u0)
        let y = data.grad_psi0(&[0.8]).unwrap();
        let us = data.us(0.5);
        let hu = convex::hessian(&us, &y).unwrap()[0];
        let h0 = convex::hessian(&data.u0, &y).unwrap()[0];
        assert!((hu / h0 - 0.5).abs() < 1e-9);
    }

    #[test]
    fn invertibility_flips_at_lifespan() {
        let data = quadratic();
        let (ok, min_det) = invertibility_check(&data, 0.98).unwrap();
        assert!(ok, "min det {min_det} at s = 0.98");
        let (ok, min_det) = invertibility_check(&data, 1.02).unwrap();
        assert!(!ok, "min det {min_det} at s = 1.02");
    }

    #[test]
    fn quartic_invertibility_brackets_lifespan() {
        let data = CauchyData::preset(PresetId::Quartic, 401).unwrap();
        let t = convex_lifespan(&data).unwrap().value;
        assert!(invertibility_check(&data, 0.98 * t).unwrap().0);
        assert!(!invertibility_check(&data, 1.02 * t).unwrap().0);
    }

    #[test]
    fn inverse_round_trip() {
        let data = quadratic();
        // closed form: f_{1/2}^{-1}(0.25) = 0.5
        let x = moser_inverse(&data, 0.5, &[0.25]).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-6, "x = {}", x[0]);

        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        let h = data.u0.axis(0).h();
        for _ in 0..20 {
            let s = 0.8 * rng.gen::<f64>();
            // pick the target inside the (shrinking) range of grad u_s
            let y = 0.1 + 0.8 * rng.gen::<f64>();
            let target = 2.0 * (1.0 - s) * y;
            let x = moser_inverse(&data, s, &[target]).unwrap();
            let f = moser_map(&data, s, &x).unwrap();
            assert!((f[0] - target).abs() <= 5.0 * h, "round trip {}", (f[0] - target).abs());
        }
    }

    #[test]
    fn inverse_refuses_past_lifespan() {
        let data = quadratic();
        assert!(matches!(
            moser_inverse(&data, 1.5, &[0.2]),
            Err(Error::MoserNotInvertible { .. })
        ));
    }

    #[test]
    fn leaves_follow_the_flow() {
        let data = quadratic();
        let seeds: Vec<Vec<f64>> = vec![vec![0.4], vec![1.0], vec![1.6]];
        let ls = leaves(&data, &seeds, 0.9).unwrap();
        let h = data.u0.axis(0).h();
        for leaf in &ls {
            for &s in &[0.1, 0.4, 0.8] {
                let p = leaf.position(s);
                let f = moser_map(&data, s, &leaf.base).unwrap();
                assert!((p[0] - f[0]).abs() <= 5.0 * h);
            }
        }
    }

    #[test]
    fn group_law_fails_even_for_the_quadratic_preset() {
        // f_{s1+s2} != f_{s1} o f_{s2}: (1 - s1 - s2) x vs (1-s1)(1-s2) x
        let data = quadratic();
        let (s1, s2) = (0.3, 0.3);
        let mut worst = 0.0_f64;
        for &x in &[0.6, 1.0, 1.5, 1.9] {
            let once = moser_map(&data, s1 + s2, &[x]).unwrap();
            let inner = moser_map(&data, s2, &[x]).unwrap();
            let composed = moser_map(&data, s1, &inner).unwrap();
            worst = worst.max((once[0] - composed[0]).abs());
        }
        assert!(worst > 0.05, "group-law violation {worst}");
    }

    #[test]
    fn conservation_drift_is_exact() {
        let data = CauchyData::preset(PresetId::Drift, 401).unwrap();
        let s_grid: Vec<f64> = (0..21).map(|k| 0.05 * k as f64).collect();
        let ray = legendre_ray(&data, &s_grid, &[[-1.2, 1.2]], &[241]).unwrap();
        let rep = conservation_check(&ray).unwrap();
        assert!(rep.sup_error < 1e-10, "drift conservation {}", rep.sup_error);
    }

    #[test]
    fn conservation_quadratic_small_error() {
        // the s-derivative of the ray steepens like (1-s)^{-4} near the
        // lifespan, so the s-step must be fine for the central differences
        let data = quadratic();
        let s_grid: Vec<f64> = (0..=900).map(|k| 0.001 * k as f64).collect();
        let ray = legendre_ray(&data, &s_grid, &[[-2.0, 2.0]], &[401]).unwrap();
        let rep = conservation_check(&ray).unwrap();
        assert!(rep.sup_error < 1e-3, "conservation {}", rep.sup_error);
        assert!(rep.route_gap < 1e-2, "route gap {}", rep.route_gap);
    }

    #[test]
    fn conservation_refuses_past_lifespan() {
        let data = quadratic();
        let s_grid: Vec<f64> = (0..=30).map(|k| 0.05 * k as f64).collect();
        let ray = legendre_ray(&data, &s_grid, &[[-2.0, 2.0]], &[201]).unwrap();
        assert!(conservation_check(&ray).is_err());
    }
}
