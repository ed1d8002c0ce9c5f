//! Monge-Ampere measures of convex spacetime functions in the sense of
//! Alexandrov: the measure of a cell is approximated by the volume of the
//! convex hull of the gradients at its corners, so the total mass tracks
//! the Lebesgue volume of the subdifferential image. Weak solutions are
//! verified by mass decay under refinement; the gradient-graph rigidity
//! check measures the distance of (d_s eta, grad_x eta) to the initial
//! graph sigma = -udot0(xi).

use serde::{Deserialize, Serialize};

use crate::cauchy::CauchyData;
use crate::error::{Error, Result};
use crate::grid::{Axis, GridFn};
use crate::ray::{ray_slices, RaySolution};

/// A scalar function on [0, s_max] x X sampled on a uniform spacetime grid.
#[derive(Debug, Clone)]
pub struct SpacetimeFn {
    pub s_axis: Axis,
    pub x_axes: Vec<Axis>,
    /// Row-major in (s, x0[, x1]).
    pub values: Vec<f64>,
    pub jointly_convex: bool,
}

impl SpacetimeFn {
    /// Assemble from per-s slices on a shared x-grid; validates uniform s
    /// spacing and checks discrete joint convexity in all axis and
    /// diagonal directions.
    pub fn from_slices(s_grid: &[f64], slices: &[GridFn]) -> Result<Self> {
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
            return Err(Error::InvalidArgument("spacetime grid must be uniform in s".into()));
        }
        for s in slices.windows(2) {
            if s[0].axes() != s[1].axes() {
                return Err(Error::InvalidGrid("slices must share the x-grid".into()));
            }
        }
        let s_axis = Axis::new(s_grid[0], *s_grid.last().unwrap(), s_grid.len())?;
        let x_axes = slices[0].axes().to_vec();
        let per_slice = slices[0].values().len();
        let mut values = Vec::with_capacity(per_slice * slices.len());
        for s in slices {
            values.extend_from_slice(s.values());
        }
        let mut f = SpacetimeFn {
            s_axis,
            x_axes,
            values,
            jointly_convex: false,
        };
        let scale = f.values.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        if let Some((cell, margin)) = f.convexity_witness(1e-9 * scale) {
            return Err(Error::NotJointlyConvex { cell, margin });
        }
        f.jointly_convex = true;
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        1 + self.x_axes.len()
    }

    fn strides(&self) -> Vec<usize> {
        match self.x_axes.len() {
            1 => vec![self.x_axes[0].n, 1],
            _ => vec![
                self.x_axes[0].n * self.x_axes[1].n,
                self.x_axes[1].n,
                1,
            ],
        }
    }

    fn axis(&self, k: usize) -> Axis {
        if k == 0 {
            self.s_axis
        } else {
            self.x_axes[k - 1]
        }
    }

    fn lin(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(self.strides())
            .map(|(i, s)| i * s)
            .sum()
    }

    pub fn at(&self, idx: &[usize]) -> f64 {
        self.values[self.lin(idx)]
    }

    /// Partial derivative along spacetime axis `k` (0 = s) at a node;
    /// second-order one-sided stencils at the boundary.
    pub fn node_deriv(&self, idx: &[usize], k: usize) -> f64 {
        let a = self.axis(k);
        let h = a.h();
        let get = |j: usize| {
            let mut id = idx.to_vec();
            id[k] = j;
            self.at(&id)
        };
        let i = idx[k];
        if i == 0 {
            (-3.0 * get(0) + 4.0 * get(1) - get(2)) / (2.0 * h)
        } else if i == a.n - 1 {
            (3.0 * get(a.n - 1) - 4.0 * get(a.n - 2) + get(a.n - 3)) / (2.0 * h)
        } else {
            (get(i + 1) - get(i - 1)) / (2.0 * h)
        }
    }

    /// First violated second difference (axes and all axis-pair diagonals),
    /// or None when discretely convex up to `tol`.
    fn convexity_witness(&self, tol: f64) -> Option<(Vec<usize>, f64)> {
        let dim = self.dim();
        let shape: Vec<usize> = (0..dim).map(|k| self.axis(k).n).collect();
        let mut dirs: Vec<Vec<isize>> = Vec::new();
        for k in 0..dim {
            let mut d = vec![0isize; dim];
            d[k] = 1;
            dirs.push(d);
        }
        for a in 0..dim {
            for b in a + 1..dim {
                for sgn in [1isize, -1] {
                    let mut d = vec![0isize; dim];
                    d[a] = 1;
                    d[b] = sgn;
                    dirs.push(d);
                }
            }
        }
        let mut idx = vec![0usize; dim];
        loop {
            for dir in &dirs {
                let ok = (0..dim).all(|k| {
                    let i = idx[k] as isize;
                    let n = shape[k] as isize;
                    i - dir[k] >= 0 && i + dir[k] < n && i + dir[k] >= 0 && i - dir[k] < n
                });
                if !ok {
                    continue;
                }
                let plus: Vec<usize> = (0..dim)
                    .map(|k| (idx[k] as isize + dir[k]) as usize)
                    .collect();
                let minus: Vec<usize> = (0..dim)
                    .map(|k| (idx[k] as isize - dir[k]) as usize)
                    .collect();
                let m = self.at(&plus) - 2.0 * self.at(&idx) + self.at(&minus);
                if m < -tol {
                    return Some((idx.clone(), m));
                }
            }
            // advance multi-index
            let mut k = dim;
            loop {
                if k == 0 {
                    return None;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < shape[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
    }
}

/// Mass report of the cell-hull Monge-Ampere measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MAMassReport {
    pub total_mass: f64,
    pub max_cell: f64,
    pub cells: usize,
    /// Per-cell hull volumes, row-major in the cell grid.
    #[serde(skip)]
    pub cell_masses: Vec<f64>,
}

/// Total Monge-Ampere mass of a jointly convex spacetime function: per
/// cell, the Lebesgue volume of the convex hull of the corner gradients.
pub fn alexandrov_mass(eta: &SpacetimeFn) -> Result<MAMassReport> {
    if !eta.jointly_convex {
        return Err(Error::NotJointlyConvex {
            cell: vec![],
            margin: f64::NAN,
        });
    }
    let dim = eta.dim();
    let shape: Vec<usize> = (0..dim).map(|k| eta.axis(k).n).collect();
    let mut cell_masses = Vec::new();
    let mut total = 0.0;
    let mut max_cell = 0.0_f64;
    match dim {
        2 => {
            for k in 0..shape[0] - 1 {
                for i in 0..shape[1] - 1 {
                    let mut pts = [[0.0; 2]; 4];
                    for (c, (dk, di)) in [(0, 0), (1, 0), (0, 1), (1, 1)].iter().enumerate() {
                        let idx = [k + dk, i + di];
                        pts[c] = [eta.node_deriv(&idx, 0), eta.node_deriv(&idx, 1)];
                    }
                    let m = hull_area_2d(&pts);
                    cell_masses.push(m);
                    total += m;
                    max_cell = max_cell.max(m);
                }
            }
        }
        _ => {
            for k in 0..shape[0] - 1 {
                for i in 0..shape[1] - 1 {
                    for j in 0..shape[2] - 1 {
                        let mut pts = Vec::with_capacity(8);
                        for dk in 0..2 {
                            for di in 0..2 {
                                for dj in 0..2 {
                                    let idx = [k + dk, i + di, j + dj];
                                    pts.push([
                                        eta.node_deriv(&idx, 0),
                                        eta.node_deriv(&idx, 1),
                                        eta.node_deriv(&idx, 2),
                                    ]);
                                }
                            }
                        }
                        let m = hull_volume_3d(&pts);
                        cell_masses.push(m);
                        total += m;
                        max_cell = max_cell.max(m);
                    }
                }
            }
        }
    }
    Ok(MAMassReport {
        total_mass: total,
        max_cell,
        cells: cell_masses.len(),
        cell_masses,
    })
}

/// Area of the convex hull of a small planar point set.
pub fn hull_area_2d(pts: &[[f64; 2]]) -> f64 {
    let mut p: Vec<[f64; 2]> = pts.to_vec();
    p.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    p.dedup_by(|a, b| a[0] == b[0] && a[1] == b[1]);
    if p.len() < 3 {
        return 0.0;
    }
    let cross = |o: &[f64; 2], a: &[f64; 2], b: &[f64; 2]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * p.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 {
            Box::new(p.iter())
        } else {
            Box::new(p.iter().rev())
        };
        for q in iter {
            while hull.len() >= start + 2
                && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], q) <= 0.0
            {
                hull.pop();
            }
            hull.push(*q);
        }
        hull.pop();
    }
    let n = hull.len();
    if n < 3 {
        return 0.0;
    }
    let mut area = 0.0;
    for i in 0..n {
        let j = (i + 1) % n;
        area += hull[i][0] * hull[j][1] - hull[j][0] * hull[i][1];
    }
    0.5 * area.abs()
}

/// Volume of the convex hull of a small 3-D point set by enumerating
/// supporting planes and summing cones from the centroid.
pub fn hull_volume_3d(pts: &[[f64; 3]]) -> f64 {
    let n = pts.len();
    if n < 4 {
        return 0.0;
    }
    let mut centroid = [0.0; 3];
    let mut spread = 0.0_f64;
    for p in pts {
        for k in 0..3 {
            centroid[k] += p[k] / n as f64;
        }
    }
    for p in pts {
        for q in pts {
            for k in 0..3 {
                spread = spread.max((p[k] - q[k]).abs());
            }
        }
    }
    if spread == 0.0 {
        return 0.0;
    }
    let tol = 1e-9 * spread;

    let sub = |a: &[f64; 3], b: &[f64; 3]| [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    let cross = |a: [f64; 3], b: [f64; 3]| {
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    };
    let dot = |a: &[f64; 3], b: &[f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];

    let mut planes: Vec<([f64; 3], f64)> = Vec::new();
    let mut volume = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let nv = cross(sub(&pts[j], &pts[i]), sub(&pts[k], &pts[i]));
                let norm = dot(&nv, &nv).sqrt();
                if norm < tol * tol {
                    continue;
                }
                let mut unit = [nv[0] / norm, nv[1] / norm, nv[2] / norm];
                let mut d = dot(&unit, &pts[i]);
                // orient outward: centroid on the negative side
                if dot(&unit, &centroid) - d > 0.0 {
                    unit = [-unit[0], -unit[1], -unit[2]];
                    d = -d;
                }
                // supporting plane: every point on or below
                if pts.iter().any(|p| dot(&unit, p) - d > tol) {
                    continue;
                }
                if planes
                    .iter()
                    .any(|(u, dd)| dot(u, &unit) > 1.0 - 1e-9 && (dd - d).abs() <= 4.0 * tol)
                {
                    continue;
                }
                // face polygon: points on the plane, ordered angularly
                let face: Vec<[f64; 3]> = pts
                    .iter()
                    .filter(|p| (dot(&unit, p) - d).abs() <= tol)
                    .cloned()
                    .collect();
                if face.len() < 3 {
                    continue;
                }
                let mut fc = [0.0; 3];
                for p in &face {
                    for t in 0..3 {
                        fc[t] += p[t] / face.len() as f64;
                    }
                }
                // basis in the plane
                let e1v = sub(&face[0], &fc);
                let e1n = dot(&e1v, &e1v).sqrt().max(1e-300);
                let e1 = [e1v[0] / e1n, e1v[1] / e1n, e1v[2] / e1n];
                let e2 = cross(unit, e1);
                let mut ang: Vec<(f64, [f64; 3])> = face
                    .iter()
                    .map(|p| {
                        let r = sub(p, &fc);
                        (dot(&r, &e2).atan2(dot(&r, &e1)), *p)
                    })
                    .collect();
                ang.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut area2 = [0.0; 3];
                for t in 0..ang.len() {
                    let a = sub(&ang[t].1, &fc);
                    let b = sub(&ang[(t + 1) % ang.len()].1, &fc);
                    let c = cross(a, b);
                    for s in 0..3 {
                        area2[s] += c[s];
                    }
                }
                let area = 0.5 * dot(&area2, &unit).abs();
                let height = (d - dot(&unit, &centroid)).max(0.0);
                volume += area * height / 3.0;
                planes.push((unit, d));
            }
        }
    }
    volume
}

/// One refinement level of the weak-solution study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassLevel {
    pub h: f64,
    pub ds: f64,
    pub total_mass: f64,
    pub max_cell: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakSolutionReport {
    pub levels: Vec<MassLevel>,
    /// total(level k+1) / total(level k)
    pub ratios: Vec<f64>,
    /// mean of log2(1/ratio); at least 1 for a weak solution
    pub order_estimate: f64,
}

/// Grid recipe of a ray used for refinement studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayRecipe {
    pub s_max: f64,
    pub s_count: usize,
    pub x_box: Vec<[f64; 2]>,
    pub x_shape: Vec<usize>,
}

impl RayRecipe {
    pub fn s_grid(&self, factor: usize) -> Vec<f64> {
        let count = (self.s_count - 1) * factor + 1;
        (0..count)
            .map(|k| self.s_max * k as f64 / (count - 1) as f64)
            .collect()
    }
}

/// Verify the ray is a weak solution: at refinements 1, 2, 4 of the
/// spacetime grid the total Monge-Ampere mass must decay toward zero with
/// order at least one. Resampleable data is refined quadratically in the
/// factor: the dual sampling enters the slice values at second order, so
/// h_dual ~ h keeps the staircase noise from dominating the decay.
pub fn weak_solution_check(data: &CauchyData, recipe: &RayRecipe) -> Result<WeakSolutionReport> {
    let mut levels = Vec::new();
    for factor in [1usize, 2, 4] {
        let fine = match data.resample((data.u0.axis(0).n - 1) * factor * factor + 1) {
            Ok(d) => d,
            Err(_) => data.clone(),
        };
        let s_grid = recipe.s_grid(factor);
        let x_shape: Vec<usize> = recipe.x_shape.iter().map(|&n| (n - 1) * factor + 1).collect();
        let slices = ray_slices(&fine, &s_grid, &recipe.x_box, &x_shape)?;
        let eta = SpacetimeFn::from_slices(&s_grid, &slices)?;
        let report = alexandrov_mass(&eta)?;
        levels.push(MassLevel {
            h: eta.x_axes[0].h(),
            ds: eta.s_axis.h(),
            total_mass: report.total_mass,
            max_cell: report.max_cell,
        });
    }
    let ratios: Vec<f64> = levels
        .windows(2)
        .map(|w| w[1].total_mass / w[0].total_mass.max(1e-300))
        .collect();
    let order_estimate = ratios
        .iter()
        .map(|r| -r.max(1e-300).log2())
        .sum::<f64>()
        / ratios.len() as f64;
    Ok(WeakSolutionReport {
        levels,
        ratios,
        order_estimate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphCheckReport {
    /// sup |d_s psi_L + udot0(grad_x psi_L)| over interior samples.
    pub sup_deviation: f64,
    pub samples: usize,
}

/// Distance of the spacetime gradient (sigma, xi) of the ray to the graph
/// sigma = -udot0(xi) swept by the initial data. Restricted to s below the
/// lifespan; a xi escaping the dual grid is an admissibility violation.
pub fn gradient_graph_check(ray: &RaySolution) -> Result<GraphCheckReport> {
    let data = &ray.data;
    if ray.s_grid.len() < 3 {
        return Err(Error::InvalidArgument("need at least 3 s-slices".into()));
    }
    let ds = ray.s_grid[1] - ray.s_grid[0];
    let dual_box: Vec<[f64; 2]> = data.u0.axes().iter().map(|a| [a.lo, a.hi]).collect();
    let flat_tol = 10.0 * data.tol.tol_cvx * ray.slices[0].value_scale();
    let mut sup = 0.0_f64;
    let mut count = 0usize;
    let dim = ray.slices[0].dim();
    let shape = ray.slices[0].shape();
    for k in 1..ray.s_grid.len() - 1 {
        if ray.s_grid[k + 1] >= ray.lifespan.value {
            break;
        }
        let slice = &ray.slices[k];
        let mut visit = |idx: &[usize]| -> Result<()> {
            // keep clear of flat and truncation-pinned cells in all three
            // slices entering the s-difference
            if !(ray.slices[k - 1].locally_strict(idx, 2, flat_tol)
                && slice.locally_strict(idx, 2, flat_tol)
                && ray.slices[k + 1].locally_strict(idx, 2, flat_tol))
            {
                return Ok(());
            }
            let sigma = (ray.slices[k + 1].at(idx) - ray.slices[k - 1].at(idx)) / (2.0 * ds);
            let mut xi = Vec::with_capacity(dim);
            for axis in 0..dim {
                xi.push(slice.node_deriv(idx, axis));
            }
            for (g, b) in xi.iter().zip(&dual_box) {
                if *g < b[0] - 1e-9 || *g > b[1] + 1e-9 {
                    let point: Vec<f64> = idx
                        .iter()
                        .enumerate()
                        .map(|(a, &i)| slice.axis(a).node(i))
                        .collect();
                    return Err(Error::GradientEscapesDual { point });
                }
            }
            let xi_c: Vec<f64> = xi
                .iter()
                .zip(&dual_box)
                .map(|(v, b)| v.clamp(b[0], b[1]))
                .collect();
            let dev = (sigma + data.udot0.value_at(&xi_c)?).abs();
            sup = sup.max(dev);
            count += 1;
            Ok(())
        };
        // a 3-node boundary margin keeps the stencils clear of box-edge
        // pinning too thin for the flatness filter to see
        match dim {
            1 => {
                for i in (3..shape[0] - 3).step_by(2) {
                    visit(&[i])?;
                }
            }
            _ => {
                for i in (3..shape[0] - 3).step_by(2) {
                    for j in (3..shape[1] - 3).step_by(2) {
                        visit(&[i, j])?;
                    }
                }
            }
        }
    }
    Ok(GraphCheckReport {
        sup_deviation: sup,
        samples: count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cauchy::{CauchyData, PresetId};
    use crate::ray::legendre_ray;

    fn spacetime(
        s_max: f64,
        ns: usize,
        x_box: [f64; 2],
        nx: usize,
        f: impl Fn(f64, f64) -> f64,
    ) -> SpacetimeFn {
        let s_grid: Vec<f64> = (0..ns).map(|k| s_max * k as f64 / (ns - 1) as f64).collect();
        let ax = Axis::new(x_box[0], x_box[1], nx).unwrap();
        let slices: Vec<GridFn> = s_grid
            .iter()
            .map(|&s| GridFn::sample(vec![ax], |x| f(s, x[0])).unwrap())
            .collect();
        SpacetimeFn::from_slices(&s_grid, &slices).unwrap()
    }

    #[test]
    fn hull_primitives() {
        // unit square and a degenerate segment
        assert!((hull_area_2d(&[[0., 0.], [1., 0.], [0., 1.], [1., 1.]]) - 1.0).abs() < 1e-15);
        assert_eq!(hull_area_2d(&[[0., 0.], [1., 1.], [2., 2.]]), 0.0);
        // unit cube, tetrahedron, coplanar set
        let mut cube = Vec::new();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    cube.push([i as f64, j as f64, k as f64]);
                }
            }
        }
        assert!((hull_volume_3d(&cube) - 1.0).abs() < 1e-12);
        let tetra = [[0., 0., 0.], [1., 0., 0.], [0., 1., 0.], [0., 0., 1.]];
        assert!((hull_volume_3d(&tetra) - 1.0 / 6.0).abs() < 1e-12);
        let flat = [[0., 0., 0.], [1., 0., 0.], [0., 1., 0.], [1., 1., 0.]];
        assert_eq!(hull_volume_3d(&flat), 0.0);
    }

    #[test]
    fn identity_gradient_map_has_unit_mass() {
        // eta = (s^2 + x^2)/2 on [0,1]^2: gradient image is the unit square
        let eta = spacetime(1.0, 41, [0.0, 1.0], 41, |s, x| 0.5 * (s * s + x * x));
        let rep = alexandrov_mass(&eta).unwrap();
        assert!(
            (rep.total_mass - 1.0).abs() < 0.02,
            "mass {}",
            rep.total_mass
        );
    }

    #[test]
    fn affine_functions_carry_no_mass() {
        let eta = spacetime(1.0, 11, [0.0, 1.0], 11, |s, x| 0.3 * s + 0.7 * x - 2.0);
        let rep = alexandrov_mass(&eta).unwrap();
        assert_eq!(rep.total_mass, 0.0);
    }

    #[test]
    fn mass_invariant_under_affine_shift() {
        let base = spacetime(1.0, 31, [0.0, 1.0], 31, |s, x| 0.5 * (s * s + x * x));
        let shifted = spacetime(1.0, 31, [0.0, 1.0], 31, |s, x| {
            0.5 * (s * s + x * x) + 3.0 * s - 1.5 * x + 7.0
        });
        let a = alexandrov_mass(&base).unwrap().total_mass;
        let b = alexandrov_mass(&shifted).unwrap().total_mass;
        assert!((a - b).abs() < 1e-12, "affine shifts translate the hulls");
    }

    #[test]
    fn quadratic_scaling_law() {
        // eta = lambda (s^2 + x^2)/2 has mass lambda^2 on the unit square
        for &lambda in &[0.5, 2.0] {
            let eta = spacetime(1.0, 41, [0.0, 1.0], 41, |s, x| 0.5 * lambda * (s * s + x * x));
            let rep = alexandrov_mass(&eta).unwrap();
            assert!(
                (rep.total_mass - lambda * lambda).abs() < 0.02 * lambda * lambda,
                "mass {} for lambda {lambda}",
                rep.total_mass
            );
        }
    }

    #[test]
    fn smooth_quartic_matches_det_hessian_quadrature() {
        // eta = (s^2+x^2)/2 + (s^4+x^4)/12: det Hess = (1+s^2)(1+x^2),
        // integral over [0,1]^2 is (4/3)^2
        let eta = spacetime(1.0, 81, [0.0, 1.0], 81, |s, x| {
            0.5 * (s * s + x * x) + (s.powi(4) + x.powi(4)) / 12.0
        });
        let rep = alexandrov_mass(&eta).unwrap();
        let oracle = (4.0 / 3.0) * (4.0 / 3.0);
        assert!(
            (rep.total_mass - oracle).abs() < 0.02 * oracle,
            "mass {} vs quadrature {oracle}",
            rep.total_mass
        );
    }

    #[test]
    fn three_dimensional_mass_of_quadratic() {
        // eta = |(s,x,y)|^2/2 on the unit cube: mass 1
        let s_grid: Vec<f64> = (0..17).map(|k| k as f64 / 16.0).collect();
        let ax = Axis::new(0.0, 1.0, 17).unwrap();
        let slices: Vec<GridFn> = s_grid
            .iter()
            .map(|&s| {
                GridFn::sample(vec![ax, ax], |x| {
                    0.5 * (s * s + x[0] * x[0] + x[1] * x[1])
                })
                .unwrap()
            })
            .collect();
        let eta = SpacetimeFn::from_slices(&s_grid, &slices).unwrap();
        let rep = alexandrov_mass(&eta).unwrap();
        assert!((rep.total_mass - 1.0).abs() < 0.05, "mass {}", rep.total_mass);
    }

    #[test]
    fn nonconvex_input_is_rejected_with_witness() {
        let s_grid: Vec<f64> = (0..5).map(|k| k as f64 / 4.0).collect();
        let ax = Axis::new(0.0, 1.0, 9).unwrap();
        let slices: Vec<GridFn> = s_grid
            .iter()
            .map(|&s| GridFn::sample(vec![ax], |x| -s * s - x[0] * x[0]).unwrap())
            .collect();
        match SpacetimeFn::from_slices(&s_grid, &slices) {
            Err(Error::NotJointlyConvex { cell, margin }) => {
                assert!(!cell.is_empty());
                assert!(margin < 0.0);
            }
            other => panic!("expected joint-convexity failure, got {other:?}"),
        }
    }

    #[test]
    fn ray_is_jointly_convex_and_mass_decays() {
        let data = CauchyData::preset(PresetId::Quadratic, 201).unwrap();
        let recipe = RayRecipe {
            s_max: 0.8,
            s_count: 41,
            x_box: vec![[-2.0, 2.0]],
            x_shape: vec![201],
        };
        let rep = weak_solution_check(&data, &recipe).unwrap();
        assert_eq!(rep.levels.len(), 3);
        for r in &rep.ratios {
            assert!(*r <= 0.6, "mass ratio {r} too large: {:?}", rep.levels);
        }
        // each halving must at least meet the 0.6 decay gate (order 0.74)
        assert!(rep.order_estimate >= 0.72, "order {}", rep.order_estimate);
    }

    #[test]
    fn drift_ray_mass_is_zero() {
        let data = CauchyData::preset(PresetId::Drift, 201).unwrap();
        let s_grid: Vec<f64> = (0..21).map(|k| 0.05 * k as f64).collect();
        let slices = ray_slices(&data, &s_grid, &[[-1.2, 1.2]], &[201]).unwrap();
        let eta = SpacetimeFn::from_slices(&s_grid, &slices).unwrap();
        let rep = alexandrov_mass(&eta).unwrap();
        // gradients all lie on the line sigma = 1: every hull is degenerate
        assert!(rep.total_mass < 1e-12, "mass {}", rep.total_mass);
    }

    #[test]
    fn perturbed_ray_gains_the_perturbations_own_mass() {
        let data = CauchyData::preset(PresetId::Quadratic, 201).unwrap();
        let s_grid: Vec<f64> = (0..31).map(|k| 0.03 * k as f64).collect();
        let slices = ray_slices(&data, &s_grid, &[[-2.0, 2.0]], &[201]).unwrap();
        let eps = 0.01;
        let perturbed: Vec<GridFn> = s_grid
            .iter()
            .zip(&slices)
            .map(|(&s, slice)| {
                let ax = slice.axis(0);
                let mut v = slice.clone();
                for (i, val) in v.values_mut().iter_mut().enumerate() {
                    let x = ax.node(i);
                    *val += eps * 0.5 * (s * s + x * x);
                }
                v
            })
            .collect();
        let eta = SpacetimeFn::from_slices(&s_grid, &perturbed).unwrap();
        let rep = alexandrov_mass(&eta).unwrap();
        // the quadratic perturbation alone carries eps^2 * (s-range * x-range)
        let own = eps * eps * 0.9 * 4.0;
        assert!(
            rep.total_mass >= 0.9 * own,
            "superadditivity: {} vs {}",
            rep.total_mass,
            own
        );
    }

    #[test]
    fn graph_check_drift_is_exact_and_quadratic_small() {
        let drift = CauchyData::preset(PresetId::Drift, 401).unwrap();
        let s_grid: Vec<f64> = (0..21).map(|k| 0.05 * k as f64).collect();
        let ray = legendre_ray(&drift, &s_grid, &[[-1.2, 1.2]], &[241]).unwrap();
        let rep = gradient_graph_check(&ray).unwrap();
        assert!(rep.sup_deviation < 1e-10, "drift deviation {}", rep.sup_deviation);

        let quad = CauchyData::preset(PresetId::Quadratic, 401).unwrap();
        let s_grid: Vec<f64> = (0..=900).map(|k| 0.001 * k as f64).collect();
        let ray = legendre_ray(&quad, &s_grid, &[[-2.0, 2.0]], &[401]).unwrap();
        let rep = gradient_graph_check(&ray).unwrap();
        assert!(rep.sup_deviation < 1e-3, "deviation {}", rep.sup_deviation);
    }
}
