//! Toric Cauchy data in the symplectic-potential picture, conversion from
//! the Kahler-potential picture, the preset library, and the convex
//! lifespan of the data.

use serde::{Deserialize, Serialize};

use crate::convex::{self, convexity_report};
use crate::error::{Error, Result};
use crate::grid::{Axis, GridFn, Tolerances};
use crate::polytope::Polytope;

/// Built-in closed-form Cauchy data. All presets are one-dimensional.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PresetId {
    /// u0 = y^2, udot0 = -y^2 on P = [0, 1]. Lifespan 1; every leaf focuses
    /// at the same point, so the caustic is a single focus.
    Quadratic,
    /// u0 = y^2/2, udot0 = -1 on P = [-1, 1]. Pure drift: the ray is
    /// psi0 + s and the lifespan is infinite.
    Drift,
    /// u0 = y^2/2 + y^4/12, udot0 = -y^2/2 on P = [-1, 1]. Lifespan 1,
    /// attained at y = 0 only.
    Quartic,
    /// u0 = y ln y + (1-y) ln(1-y), udot0 = y(1-y) on P = [0, 1]. The primal
    /// potential is log(1 + e^x); lifespan 2.
    Logistic,
}

impl PresetId {
    pub fn all() -> [PresetId; 4] {
        [
            PresetId::Quadratic,
            PresetId::Drift,
            PresetId::Quartic,
            PresetId::Logistic,
        ]
    }

    pub fn parse(name: &str) -> Option<PresetId> {
        match name {
            "quadratic" => Some(PresetId::Quadratic),
            "drift" => Some(PresetId::Drift),
            "quartic" => Some(PresetId::Quartic),
            "logistic" => Some(PresetId::Logistic),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PresetId::Quadratic => "quadratic",
            PresetId::Drift => "drift",
            PresetId::Quartic => "quartic",
            PresetId::Logistic => "logistic",
        }
    }

    pub fn polytope(&self) -> Polytope {
        match self {
            PresetId::Quadratic | PresetId::Logistic => Polytope::interval(0.0, 1.0).unwrap(),
            PresetId::Drift | PresetId::Quartic => Polytope::interval(-1.0, 1.0).unwrap(),
        }
    }

    /// Sampling box for the symplectic potentials, held fixed across
    /// resolutions so refinement studies see a fixed problem.
    pub fn grid_box(&self) -> [f64; 2] {
        match self {
            PresetId::Quadratic => [0.0025, 0.9975],
            PresetId::Drift | PresetId::Quartic => [-0.995, 0.995],
            PresetId::Logistic => [0.004, 0.996],
        }
    }

    pub fn u0(&self, y: f64) -> f64 {
        match self {
            PresetId::Quadratic => y * y,
            PresetId::Drift => 0.5 * y * y,
            PresetId::Quartic => 0.5 * y * y + y.powi(4) / 12.0,
            PresetId::Logistic => y * y.ln() + (1.0 - y) * (1.0 - y).ln(),
        }
    }

    pub fn udot0(&self, y: f64) -> f64 {
        match self {
            PresetId::Quadratic => -y * y,
            PresetId::Drift => -1.0,
            PresetId::Quartic => -0.5 * y * y,
            PresetId::Logistic => y * (1.0 - y),
        }
    }

    /// Closed-form Kahler potential where one exists.
    pub fn psi0(&self, x: f64) -> Option<f64> {
        match self {
            PresetId::Quadratic => Some(0.25 * x * x),
            PresetId::Drift => Some(0.5 * x * x),
            PresetId::Logistic => Some((1.0 + x.exp()).ln()),
            PresetId::Quartic => None,
        }
    }

    pub fn psidot0(&self, x: f64) -> Option<f64> {
        match self {
            PresetId::Quadratic => Some(0.25 * x * x),
            PresetId::Drift => Some(1.0),
            PresetId::Logistic => {
                let s = 1.0 / (1.0 + (-x).exp());
                Some(-s * (1.0 - s))
            }
            PresetId::Quartic => None,
        }
    }

    /// Wide enough to hold the slopes of u0 + s*udot0 for s in [0, ~2.5T].
    pub fn default_x_box(&self) -> [f64; 2] {
        match self {
            PresetId::Quadratic => [-2.0, 2.0],
            PresetId::Drift => [-1.2, 1.2],
            PresetId::Quartic => [-1.6, 1.6],
            PresetId::Logistic => [-6.5, 6.5],
        }
    }

    /// Exact convex lifespan, for oracles and default s-grids.
    pub fn lifespan_hint(&self) -> f64 {
        match self {
            PresetId::Quadratic | PresetId::Quartic => 1.0,
            PresetId::Drift => f64::INFINITY,
            PresetId::Logistic => 2.0,
        }
    }
}

/// The Cauchy data of the ray problem in the dual (symplectic) picture:
/// a strictly convex `u0` and its initial velocity `udot0` sampled on a
/// shared grid strictly inside the moment polytope.
#[derive(Debug, Clone)]
pub struct CauchyData {
    pub polytope: Polytope,
    pub u0: GridFn,
    pub udot0: GridFn,
    /// Optional primal pair (psi0, psidot0) on an x-grid.
    pub primal: Option<(GridFn, GridFn)>,
    pub preset: Option<PresetId>,
    pub tol: Tolerances,
}

impl CauchyData {
    pub fn new(polytope: Polytope, u0: GridFn, udot0: GridFn, tol: Tolerances) -> Result<Self> {
        if u0.axes() != udot0.axes() {
            return Err(Error::InvalidGrid(
                "u0 and udot0 must share grid geometry".into(),
            ));
        }
        if u0.dim() != polytope.dim() {
            return Err(Error::InvalidGrid("data dimension must match polytope".into()));
        }
        // the sampling box must sit inside the interior of P: corners suffice
        for corner in box_corners(u0.axes()) {
            if !polytope.contains(&corner, 0.0) {
                return Err(Error::InvalidGrid(format!(
                    "grid corner {corner:?} is not inside the polytope"
                )));
            }
        }
        let rep = convexity_report(&u0, &tol)?;
        if rep.min_margin <= 0.0 {
            return Err(Error::NotStrictlyConvex {
                min_margin: rep.min_margin,
                argmin: rep.argmin_node,
            });
        }
        Ok(CauchyData {
            polytope,
            u0,
            udot0,
            primal: None,
            preset: None,
            tol,
        })
    }

    /// Sample a preset at `n` nodes per axis.
    pub fn preset(id: PresetId, n: usize) -> Result<Self> {
        let [lo, hi] = id.grid_box();
        let ax = Axis::new(lo, hi, n)?;
        let u0 = GridFn::sample(vec![ax], |y| id.u0(y[0]))?;
        let udot0 = GridFn::sample(vec![ax], |y| id.udot0(y[0]))?;
        let mut data = CauchyData::new(id.polytope(), u0, udot0, Tolerances::default())?;
        data.preset = Some(id);
        Ok(data)
    }

    /// Resample preset-backed data at a new resolution; tabulated data
    /// cannot be refined.
    pub fn resample(&self, n: usize) -> Result<Self> {
        match self.preset {
            Some(id) => {
                let mut d = CauchyData::preset(id, n)?;
                d.tol = self.tol;
                Ok(d)
            }
            None => Err(Error::InvalidArgument(
                "cannot resample tabulated Cauchy data".into(),
            )),
        }
    }

    /// The combined potential u0 + s*udot0.
    pub fn us(&self, s: f64) -> GridFn {
        self.u0.lin_comb(1.0, &self.udot0, s).expect("shared grids")
    }

    /// Moment-map inverse: the dual point y with grad u0(y) = x, which is
    /// grad psi0(x) by Legendre duality.
    pub fn grad_psi0(&self, x: &[f64]) -> Result<Vec<f64>> {
        convex::invert_gradient(&self.u0, x, &self.tol)
    }

    /// psi0(x) through the Legendre identity <x, y> - u0(y) at y = grad psi0(x).
    pub fn psi0_at(&self, x: &[f64]) -> Result<f64> {
        let y = self.grad_psi0(x)?;
        let dot: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        Ok(dot - self.u0.value_at(&y)?)
    }

    /// psidot0(x) = -udot0(grad psi0(x)).
    pub fn psidot0_at(&self, x: &[f64]) -> Result<f64> {
        let y = self.grad_psi0(x)?;
        Ok(-self.udot0.value_at(&y)?)
    }
}

fn box_corners(axes: &[Axis]) -> Vec<Vec<f64>> {
    match axes.len() {
        1 => vec![vec![axes[0].lo], vec![axes[0].hi]],
        _ => vec![
            vec![axes[0].lo, axes[1].lo],
            vec![axes[0].lo, axes[1].hi],
            vec![axes[0].hi, axes[1].lo],
            vec![axes[0].hi, axes[1].hi],
        ],
    }
}

/// Convert primal Cauchy data (psi0, psidot0) to the dual picture:
/// u0 = psi0* on a grid filling the discrete gradient range, and
/// udot0(y) = -psidot0(grad u0(y)).
pub fn to_symplectic(
    psi0: &GridFn,
    psidot0: &GridFn,
    polytope: &Polytope,
    tol: &Tolerances,
) -> Result<CauchyData> {
    if psi0.axes() != psidot0.axes() {
        return Err(Error::InvalidGrid(
            "psi0 and psidot0 must share grid geometry".into(),
        ));
    }
    let rep = convexity_report(psi0, tol)?;
    if rep.min_margin <= 0.0 {
        return Err(Error::NotStrictlyConvex {
            min_margin: rep.min_margin,
            argmin: rep.argmin_node,
        });
    }
    // the moment image must land strictly inside P
    let ranges = convex::gradient_range(psi0);
    for corner in range_corners(&ranges) {
        if !polytope.contains(&corner, 0.0) {
            return Err(Error::MomentImageViolatesPolytope { value: corner });
        }
    }
    let dual_box: Vec<[f64; 2]> = ranges.clone();
    // Size the dual grid so every dual cell crosses at least one argmax
    // switch of the conjugate; finer grids would produce exactly flat cells
    // and lose strict convexity of u0.
    let shape: Vec<usize> = (0..psi0.dim())
        .map(|k| {
            let step = max_slope_step(psi0, k).max(1e-300);
            let span = ranges[k][1] - ranges[k][0];
            let n = (span / (1.1 * step)).floor() as usize + 1;
            n.clamp(33, psi0.axis(k).n)
        })
        .collect();
    let u0 = convex::legendre_transform(psi0, &dual_box, &shape)?;

    // udot0(y) = -psidot0(grad u0(y)). The inverse moment map is computed
    // by Newton on the primal side (grad psi0(x) = y): psi0 is smooth on
    // its own grid, whereas differencing u0 amplifies the dual-edge blowup
    // of the symplectic potential.
    let axes = u0.axes().to_vec();
    let mut vals = vec![0.0; u0.values().len()];
    let invert = |y: &[f64], idx: &[usize]| -> Result<Vec<f64>> {
        match convex::invert_gradient(psi0, y, tol) {
            Ok(x) => Ok(x),
            // extreme dual nodes can sit at the very edge of the discrete
            // slope range; fall back to differencing u0 there
            Err(_) => Ok((0..u0.dim())
                .map(|k| clamp_to(psi0.axis(k), u0.node_deriv(idx, k)))
                .collect()),
        }
    };
    match u0.dim() {
        1 => {
            for (i, v) in vals.iter_mut().enumerate() {
                let y = axes[0].node(i);
                let x = invert(&[y], &[i])?;
                *v = -psidot0.value_at(&x)?;
            }
        }
        _ => {
            let n1 = axes[1].n;
            for i0 in 0..axes[0].n {
                for i1 in 0..n1 {
                    let y = [axes[0].node(i0), axes[1].node(i1)];
                    let x = invert(&y, &[i0, i1])?;
                    vals[i0 * n1 + i1] = -psidot0.value_at(&x)?;
                }
            }
        }
    }
    let udot0 = GridFn::new(axes, vals)?;
    let mut data = CauchyData::new(polytope.clone(), u0, udot0, *tol)?;
    data.primal = Some((psi0.clone(), psidot0.clone()));

    // round trip u0* must reproduce psi0 on its own grid
    let back = convex::legendre_transform(
        &data.u0,
        &psi0.axes().iter().map(|a| [a.lo, a.hi]).collect::<Vec<_>>(),
        &psi0.shape(),
    )?;
    let sup = back
        .values()
        .iter()
        .zip(psi0.values())
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    if sup > 1e-2 * psi0.value_scale() {
        return Err(Error::InvalidGrid(format!(
            "involution round trip failed: sup error {sup:.3e}"
        )));
    }
    Ok(data)
}

fn clamp_to(axis: Axis, x: f64) -> f64 {
    x.clamp(axis.lo, axis.hi)
}

/// Largest increment between consecutive adjacent-node slopes along `axis`,
/// i.e. the coarsest step of the conjugate's argmax staircase.
fn max_slope_step(f: &GridFn, axis: usize) -> f64 {
    let h = f.axis(axis).h();
    let mut max_step = 0.0_f64;
    let slope_at = |idx: &[usize], shift: usize| -> f64 {
        let mut a = idx.to_vec();
        let mut b = idx.to_vec();
        a[axis] = shift;
        b[axis] = shift + 1;
        (f.at(&b) - f.at(&a)) / h
    };
    match f.dim() {
        1 => {
            for i in 0..f.axis(0).n - 2 {
                max_step = max_step.max(slope_at(&[0], i + 1) - slope_at(&[0], i));
            }
        }
        _ => {
            let other = 1 - axis;
            for j in 0..f.axis(other).n {
                let mut idx = vec![0usize; 2];
                idx[other] = j;
                for i in 0..f.axis(axis).n - 2 {
                    max_step = max_step.max(slope_at(&idx, i + 1) - slope_at(&idx, i));
                }
            }
        }
    }
    max_step
}

fn range_corners(ranges: &[[f64; 2]]) -> Vec<Vec<f64>> {
    match ranges.len() {
        1 => vec![vec![ranges[0][0]], vec![ranges[0][1]]],
        _ => vec![
            vec![ranges[0][0], ranges[1][0]],
            vec![ranges[0][0], ranges[1][1]],
            vec![ranges[0][1], ranges[1][0]],
            vec![ranges[0][1], ranges[1][1]],
        ],
    }
}

/// The convex lifespan of the data and where it is attained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lifespan {
    /// `f64::INFINITY` when udot0 is convex, i.e. no obstruction exists.
    pub value: f64,
    pub argmin_node: Vec<usize>,
    pub argmin_point: Vec<f64>,
}

impl Lifespan {
    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

/// Largest s with u0 + s*udot0 still convex: at every interior node the
/// critical time of the Hessian pencil `H(u0) + s H(udot0)` is computed
/// (in one dimension -u0''/udot0'' where udot0'' < 0, otherwise through the
/// generalized eigenvalue problem) and the infimum over nodes is returned.
pub fn convex_lifespan(data: &CauchyData) -> Result<Lifespan> {
    let u0 = &data.u0;
    let udot = &data.udot0;
    let rep = convexity_report(u0, &data.tol)?;
    if rep.min_margin <= 0.0 {
        return Err(Error::NotStrictlyConvex {
            min_margin: rep.min_margin,
            argmin: rep.argmin_node,
        });
    }
    // second differences stay two cells off the boundary: symplectic
    // potentials of converted data can blow up toward the polytope edge
    let mut best = f64::INFINITY;
    let mut argmin = vec![0usize; u0.dim()];
    match u0.dim() {
        1 => {
            for i in 2..u0.axis(0).n - 2 {
                let a = u0.node_second(&[i], 0);
                let b = udot.node_second(&[i], 0);
                let s = if b >= -1e-12 * (1.0 + a.abs()) {
                    f64::INFINITY
                } else {
                    -a / b
                };
                if s < best {
                    best = s;
                    argmin = vec![i];
                }
            }
        }
        _ => {
            for i in 2..u0.axis(0).n - 2 {
                for j in 2..u0.axis(1).n - 2 {
                    let a = [
                        u0.node_second(&[i, j], 0),
                        u0.node_mixed(&[i, j]),
                        u0.node_mixed(&[i, j]),
                        u0.node_second(&[i, j], 1),
                    ];
                    let b = [
                        udot.node_second(&[i, j], 0),
                        udot.node_mixed(&[i, j]),
                        udot.node_mixed(&[i, j]),
                        udot.node_second(&[i, j], 1),
                    ];
                    let s = pencil_critical_time(&a, &b);
                    if s < best {
                        best = s;
                        argmin = vec![i, j];
                    }
                }
            }
        }
    }
    let argmin_point = argmin
        .iter()
        .enumerate()
        .map(|(k, &i)| u0.axis(k).node(i))
        .collect();
    Ok(Lifespan {
        value: best,
        argmin_node: argmin,
        argmin_point,
    })
}

/// sup { s >= 0 : A + sB >= 0 } for a 2x2 SPD matrix A: from the smaller
/// generalized eigenvalue mu of B v = mu A v, the critical time is -1/mu
/// when mu < 0 and infinity otherwise.
fn pencil_critical_time(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let det_a = a[0] * a[3] - a[1] * a[2];
    let det_b = b[0] * b[3] - b[1] * b[2];
    let mixed = b[0] * a[3] + b[3] * a[0] - b[1] * a[2] - b[2] * a[1];
    // det(B - mu A) = mu^2 det A - mu * mixed + det B
    let disc = mixed * mixed - 4.0 * det_a * det_b;
    if det_a <= 0.0 {
        // A not definite at this node; treat as immediately critical
        return 0.0;
    }
    let sq = disc.max(0.0).sqrt();
    let mu_min = (mixed - sq) / (2.0 * det_a);
    let scale = 1.0 + a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if mu_min >= -1e-12 * scale {
        f64::INFINITY
    } else {
        -1.0 / mu_min
    }
}
