//! Harmonic analysis on strips [0, T] x R discretized on a symmetric
//! t-window: the Dirichlet Poisson kernel, the two-boundary harmonic
//! extension in spectral form, the Dirichlet-to-Neumann multiplier
//! D coth(TD) and its companion D/sinh(TD), the Hilbert transform,
//! Paley-Wiener decay tests, and the leafwise boundary data of toric rays.
//!
//! Fourier convention: fhat(xi) = integral e^{-i t xi} f(t) dt, discretized
//! by dt-weighted FFT sums on the periodic window.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::cauchy::CauchyData;
use crate::convex;
use crate::error::{Error, Result};

/// Window taper applied before spectral operations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Taper {
    None,
    /// Cosine ramp on the outer `alpha` fraction of each half-window.
    Tukey { alpha: f64 },
}

impl Default for Taper {
    fn default() -> Self {
        Taper::Tukey { alpha: 0.1 }
    }
}

/// A real function sampled on the symmetric window [-L, L) at N equispaced
/// points, N a power of two (the right endpoint is the periodic wrap).
#[derive(Debug, Clone, PartialEq)]
pub struct LineFn {
    pub half_width: f64,
    pub values: Vec<f64>,
    pub taper: Taper,
}

impl LineFn {
    pub fn new(half_width: f64, values: Vec<f64>, taper: Taper) -> Result<Self> {
        let n = values.len();
        if n < 64 || !n.is_power_of_two() {
            return Err(Error::BadSampleCount(n));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::WindowMismatch(format!("bad half-width {half_width}")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::WindowMismatch("non-finite sample".into()));
        }
        Ok(LineFn {
            half_width,
            values,
            taper,
        })
    }

    pub fn sample(half_width: f64, n: usize, taper: Taper, f: impl Fn(f64) -> f64) -> Result<Self> {
        let dt = 2.0 * half_width / n as f64;
        let values = (0..n).map(|j| f(-half_width + dt * j as f64)).collect();
        LineFn::new(half_width, values, taper)
    }

    pub fn constant(half_width: f64, n: usize, c: f64) -> Result<Self> {
        LineFn::sample(half_width, n, Taper::None, |_| c)
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn dt(&self) -> f64 {
        2.0 * self.half_width / self.n() as f64
    }

    pub fn t_node(&self, j: usize) -> f64 {
        -self.half_width + self.dt() * j as f64
    }

    /// Largest resolvable frequency pi*N/(2L).
    pub fn nyquist(&self) -> f64 {
        std::f64::consts::PI * self.n() as f64 / (2.0 * self.half_width)
    }

    /// Signed frequency of FFT bin k.
    pub fn xi(&self, k: usize) -> f64 {
        let n = self.n();
        let ks = if k <= n / 2 { k as isize } else { k as isize - n as isize };
        std::f64::consts::PI * ks as f64 / self.half_width
    }

    pub fn taper_weight(&self, t: f64) -> f64 {
        match self.taper {
            Taper::None => 1.0,
            Taper::Tukey { alpha } => {
                let edge = (1.0 - alpha) * self.half_width;
                let a = t.abs();
                if a <= edge {
                    1.0
                } else {
                    let u = ((a - edge) / (alpha * self.half_width)).min(1.0);
                    0.5 * (1.0 + (std::f64::consts::PI * u).cos())
                }
            }
        }
    }

    pub fn tapered_values(&self) -> Vec<f64> {
        (0..self.n())
            .map(|j| self.values[j] * self.taper_weight(self.t_node(j)))
            .collect()
    }

    fn same_window(&self, other: &LineFn) -> Result<()> {
        if (self.half_width - other.half_width).abs() > 1e-12 || self.n() != other.n() {
            return Err(Error::WindowMismatch(format!(
                "windows differ: L={} N={} vs L={} N={}",
                self.half_width,
                self.n(),
                other.half_width,
                other.n()
            )));
        }
        Ok(())
    }
}

/// Discrete Fourier data of a windowed function: coefficients approximate
/// the integral transform at the grid frequencies (modulo an alternating
/// phase that cancels in every multiplier application).
#[derive(Debug, Clone)]
pub struct SpectralFn {
    pub xi: Vec<f64>,
    pub coeffs: Vec<Complex64>,
}

impl SpectralFn {
    /// Hermitian symmetry defect max |c(k) - conj(c(-k))|.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.coeffs.len();
        let mut worst = 0.0_f64;
        for k in 1..n / 2 {
            let d = self.coeffs[k] - self.coeffs[n - k].conj();
            worst = worst.max(d.norm());
        }
        worst
    }
}

fn fft_buf(values: &[f64]) -> Vec<Complex64> {
    values.iter().map(|&v| Complex64::new(v, 0.0)).collect()
}

fn run_fft(buf: &mut [Complex64], inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft = if inverse {
        planner.plan_fft_inverse(buf.len())
    } else {
        planner.plan_fft_forward(buf.len())
    };
    fft.process(buf);
}

/// dt-weighted spectrum of the tapered samples.
pub fn spectrum(f: &LineFn) -> SpectralFn {
    let mut buf = fft_buf(&f.tapered_values());
    run_fft(&mut buf, false);
    let dt = f.dt();
    let coeffs = buf.into_iter().map(|c| c * dt).collect();
    let xi = (0..f.n()).map(|k| f.xi(k)).collect();
    SpectralFn { xi, coeffs }
}

/// Apply a Fourier multiplier to the tapered samples. The symbol is forced
/// real at the Nyquist bin so real inputs map to real outputs; the output
/// carries no further taper.
pub fn apply_multiplier(f: &LineFn, symbol: impl Fn(f64) -> Complex64) -> Result<LineFn> {
    let n = f.n();
    let mut buf = fft_buf(&f.tapered_values());
    run_fft(&mut buf, false);
    for (k, c) in buf.iter_mut().enumerate() {
        let m = if k == n / 2 {
            Complex64::new(symbol(f.xi(k)).re, 0.0)
        } else {
            symbol(f.xi(k))
        };
        *c *= m;
    }
    run_fft(&mut buf, true);
    let scale = 1.0 / n as f64;
    LineFn::new(
        f.half_width,
        buf.into_iter().map(|c| c.re * scale).collect(),
        Taper::None,
    )
}

#[inline]
fn one_minus_exp_neg(x: f64) -> f64 {
    // 1 - exp(-x) without cancellation for small x
    -(-x).exp_m1()
}

/// Symbol of the strip Dirichlet-to-Neumann multiplier A_T = D coth(TD),
/// regularized at 0 by its limit 1/T.
pub fn symbol_dn(t_width: f64, xi: f64) -> f64 {
    let a = xi.abs();
    if a * t_width < 1e-12 {
        return 1.0 / t_width;
    }
    let em = one_minus_exp_neg(2.0 * t_width * a);
    a * (2.0 - em) / em
}

/// Symbol of D / sinh(TD), regularized at 0 by 1/T.
pub fn symbol_d_over_sinh(t_width: f64, xi: f64) -> f64 {
    let a = xi.abs();
    if a * t_width < 1e-12 {
        return 1.0 / t_width;
    }
    let em = one_minus_exp_neg(2.0 * t_width * a);
    2.0 * a * (-t_width * a).exp() / em
}

/// D coth(TD) applied to a boundary row.
pub fn multiplier_dn(f: &LineFn, t_width: f64) -> Result<LineFn> {
    apply_multiplier(f, |xi| Complex64::new(symbol_dn(t_width, xi), 0.0))
}

/// D / sinh(TD) applied to a boundary row.
pub fn multiplier_d_over_sinh(f: &LineFn, t_width: f64) -> Result<LineFn> {
    apply_multiplier(f, |xi| Complex64::new(symbol_d_over_sinh(t_width, xi), 0.0))
}

/// Hilbert transform with symbol -i sign(xi).
pub fn hilbert(f: &LineFn) -> Result<LineFn> {
    apply_multiplier(f, |xi| {
        if xi == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, -xi.signum())
        }
    })
}

/// Dirichlet Poisson kernel of the strip of the given width, evaluated at
/// interior coordinate s and boundary offset t:
/// P(s, t) = sin(pi s/W) / (cosh(pi t/W) - cos(pi s/W)) in rescaled
/// coordinates. Its half-window mass (1/2pi) integral is 1 - s/W.
pub fn poisson_kernel(s: f64, t: f64, width: f64) -> Result<f64> {
    if !(s > 0.0 && s < width) {
        return Err(Error::InvalidArgument(format!(
            "interior coordinate s={s} outside (0, {width})"
        )));
    }
    let rs = std::f64::consts::PI * s / width;
    let rt = std::f64::consts::PI * t / width;
    Ok(rs.sin() / (rt.cosh() - rs.cos()))
}

/// A sampled field on the strip: one t-row per entry of `s_grid`.
#[derive(Debug, Clone, PartialEq)]
pub struct StripField {
    pub s_grid: Vec<f64>,
    pub half_width: f64,
    pub rows: Vec<Vec<f64>>,
}

impl StripField {
    pub fn n(&self) -> usize {
        self.rows[0].len()
    }

    pub fn dt(&self) -> f64 {
        2.0 * self.half_width / self.n() as f64
    }

    pub fn t_node(&self, j: usize) -> f64 {
        -self.half_width + self.dt() * j as f64
    }

    pub fn row_as_line(&self, k: usize) -> Result<LineFn> {
        LineFn::new(self.half_width, self.rows[k].clone(), Taper::None)
    }

    /// Largest 5-point Laplacian residual over interior rows, restricted
    /// to the central fraction of the window. Requires a uniform s-grid.
    pub fn laplacian_residual(&self, central_fraction: f64) -> Result<f64> {
        if self.s_grid.len() < 3 {
            return Err(Error::InvalidArgument("need at least 3 rows".into()));
        }
        let ds = self.s_grid[1] - self.s_grid[0];
        if self
            .s_grid
            .windows(2)
            .any(|w| ((w[1] - w[0]) - ds).abs() > 1e-9 * ds)
        {
            return Err(Error::InvalidArgument("laplacian needs a uniform s-grid".into()));
        }
        let dt = self.dt();
        let n = self.n();
        let keep = ((n as f64) * central_fraction * 0.5) as usize;
        let mid = n / 2;
        let mut worst = 0.0_f64;
        for k in 1..self.s_grid.len() - 1 {
            for j in mid.saturating_sub(keep)..(mid + keep).min(n - 1) {
                if j == 0 {
                    continue;
                }
                let uss =
                    (self.rows[k + 1][j] - 2.0 * self.rows[k][j] + self.rows[k - 1][j]) / (ds * ds);
                let utt =
                    (self.rows[k][j + 1] - 2.0 * self.rows[k][j] + self.rows[k][j - 1]) / (dt * dt);
                worst = worst.max((uss + utt).abs());
            }
        }
        Ok(worst)
    }
}

/// Harmonic extension into the strip [0, T] from Dirichlet rows a (s = 0)
/// and b (s = T), through the spectral interpolation
/// uhat(s, xi) = sinh((T-s)xi)/sinh(T xi) ahat + sinh(s xi)/sinh(T xi) bhat.
pub fn widder_extend(a: &LineFn, b: &LineFn, t_width: f64, s_grid: &[f64]) -> Result<StripField> {
    a.same_window(b)?;
    if s_grid.is_empty() || s_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("s_grid must be increasing".into()));
    }
    if s_grid[0] < 0.0 || *s_grid.last().unwrap() > t_width + 1e-12 {
        return Err(Error::InvalidArgument("s_grid must lie inside [0, T]".into()));
    }
    let n = a.n();
    let mut fa = fft_buf(&a.tapered_values());
    let mut fb = fft_buf(&b.tapered_values());
    run_fft(&mut fa, false);
    run_fft(&mut fb, false);
    let mut rows = Vec::with_capacity(s_grid.len());
    let scale = 1.0 / n as f64;
    for &s in s_grid {
        let mut buf: Vec<Complex64> = (0..n)
            .map(|k| {
                let xi = a.xi(k).abs();
                let (ma, mb) = if xi * t_width < 1e-12 {
                    ((t_width - s) / t_width, s / t_width)
                } else {
                    let em = one_minus_exp_neg(2.0 * t_width * xi);
                    let ma = (-s * xi).exp() * one_minus_exp_neg(2.0 * (t_width - s) * xi) / em;
                    let mb = (-(t_width - s) * xi).exp() * one_minus_exp_neg(2.0 * s * xi) / em;
                    (ma, mb)
                };
                fa[k] * ma + fb[k] * mb
            })
            .collect();
        run_fft(&mut buf, true);
        rows.push(buf.into_iter().map(|c| c.re * scale).collect());
    }
    Ok(StripField {
        s_grid: s_grid.to_vec(),
        half_width: a.half_width,
        rows,
    })
}

/// Band selection for the Paley-Wiener decay fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PwBand {
    /// Fractions of the Nyquist frequency.
    NyquistFraction { lo: f64, hi: f64 },
    /// Absolute frequency bounds.
    Absolute { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PwConfig {
    pub band: PwBand,
    /// The fitted rate must exceed T by this relative margin (the strict
    /// inequality operationalizing little-o decay).
    pub margin: f64,
    /// Spectral floor below which bins are discarded.
    pub floor: f64,
}

impl Default for PwConfig {
    fn default() -> Self {
        PwConfig {
            band: PwBand::NyquistFraction { lo: 0.1, hi: 0.6 },
            margin: 0.02,
            floor: 1e-13,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PwReport {
    pub pass: bool,
    /// Fitted exponential decay rate of |fhat|; infinite for a spectrally
    /// zero input.
    pub fitted_rate: f64,
    pub band_used: [f64; 2],
    pub bins_used: usize,
    pub margin: f64,
}

/// Least-squares fit of log |fhat| over the configured band; membership in
/// the width-T Paley-Wiener class requires the fitted decay rate to exceed
/// T strictly (by the configured margin).
pub fn pw_test(f: &LineFn, t_width: f64, cfg: &PwConfig) -> Result<PwReport> {
    let spec = spectrum(f);
    let n = f.n();
    let mags: Vec<(f64, f64)> = (1..n / 2)
        .map(|k| (spec.xi[k], spec.coeffs[k].norm()))
        .collect();
    let peak = mags.iter().fold(0.0_f64, |m, (_, a)| m.max(*a));
    if peak < cfg.floor {
        // spectrally zero input belongs to every Paley-Wiener class
        return Ok(PwReport {
            pass: true,
            fitted_rate: f64::INFINITY,
            band_used: [0.0, 0.0],
            bins_used: 0,
            margin: cfg.margin,
        });
    }
    let (lo, hi) = match cfg.band {
        PwBand::NyquistFraction { lo, hi } => (lo * f.nyquist(), hi * f.nyquist()),
        PwBand::Absolute { lo, hi } => (lo, hi),
    };
    let pts: Vec<(f64, f64)> = mags
        .into_iter()
        .filter(|(xi, a)| *xi >= lo && *xi <= hi && *a >= cfg.floor)
        .map(|(xi, a)| (xi, a.ln()))
        .collect();
    if pts.len() < 4 {
        return Err(Error::InsufficientResolution);
    }
    let m = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    let rate = -slope;
    Ok(PwReport {
        pass: rate >= t_width * (1.0 + cfg.margin),
        fitted_rate: rate,
        band_used: [pts.first().unwrap().0, pts.last().unwrap().0],
        bins_used: pts.len(),
        margin: cfg.margin,
    })
}

/// Leafwise boundary data of a toric ray at a base point z.
#[derive(Debug, Clone)]
pub struct LeafSolution {
    /// The harmonic field chi(s, t) = psi0(z) + s * slope, constant in t.
    pub field: StripField,
    /// Neumann row q(t) = d_s chi(0, t).
    pub q: LineFn,
    /// Reference row p = q - (D/sinh TD) chi(T, .).
    pub p: LineFn,
    pub q_minus_p_mean: f64,
    /// max - min of q - p over the window; zero (to rounding) in the toric
    /// case, so the leafwise obstruction vanishes.
    pub q_minus_p_spread: f64,
    /// Set when the leaf degenerates to a point (grad udot0 vanishes at z).
    pub trivial_leaf: bool,
}

/// Solve the leafwise Cauchy problem along the leaf through z: the field is
/// linear in s and constant in t, with
/// chi(s) = <grad psi0(z), grad u_s(grad psi0(z))> - u_s(grad psi0(z)).
pub fn toric_leaf_solution(
    data: &CauchyData,
    z: &[f64],
    t_width: f64,
    s_grid: &[f64],
    half_window: f64,
    n_window: usize,
) -> Result<LeafSolution> {
    if s_grid.is_empty() || s_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("s_grid must be increasing".into()));
    }
    let y0 = data.grad_psi0(z)?;
    let w = convex::gradient(&data.udot0, &y0)?;
    let wscale = w.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let trivial_leaf = wscale < 1e-8;

    let psi0_z: f64 = z.iter().zip(&y0).map(|(a, b)| a * b).sum::<f64>()
        - data.u0.value_at(&y0)?;
    let slope: f64 = y0.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>()
        - data.udot0.value_at(&y0)?;

    let rows: Vec<Vec<f64>> = s_grid
        .iter()
        .map(|&s| vec![psi0_z + s * slope; n_window])
        .collect();
    let field = StripField {
        s_grid: s_grid.to_vec(),
        half_width: half_window,
        rows,
    };

    let q = LineFn::constant(half_window, n_window, slope)?;
    let chi_top = LineFn::constant(half_window, n_window, psi0_z + t_width * slope)?;
    let correction = multiplier_d_over_sinh(&chi_top, t_width)?;
    let p_values: Vec<f64> = q
        .values
        .iter()
        .zip(&correction.values)
        .map(|(a, b)| a - b)
        .collect();
    let p = LineFn::new(half_window, p_values, Taper::None)?;

    let diffs: Vec<f64> = q.values.iter().zip(&p.values).map(|(a, b)| a - b).collect();
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let spread = diffs.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v))
        - diffs.iter().fold(f64::INFINITY, |m, v| m.min(*v));

    Ok(LeafSolution {
        field,
        q,
        p,
        q_minus_p_mean: mean,
        q_minus_p_spread: spread,
        trivial_leaf,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cauchy::{CauchyData, PresetId};
    use std::f64::consts::PI;

    #[test]
    fn poisson_kernel_pointwise() {
        // P(pi/2, 0) = 1 and cosh decay at large offsets
        assert!((poisson_kernel(PI / 2.0, 0.0, PI).unwrap() - 1.0).abs() < 1e-15);
        assert!(poisson_kernel(PI / 2.0, 20.0, PI).unwrap() < 1e-7);
        assert!(poisson_kernel(-0.1, 0.0, PI).is_err());
        assert!(poisson_kernel(4.0, 0.0, PI).is_err());
    }

    #[test]
    fn poisson_kernel_mass_splits_between_boundaries() {
        // (1/2pi) integral P(s, t) dt = 1 - s/pi; Simpson oracle at s = pi/2
        let s = PI / 2.0;
        let (lo, hi, m) = (-60.0, 60.0, 48_000usize);
        let h = (hi - lo) / m as f64;
        let mut acc = 0.0;
        for j in 0..=m {
            let t = lo + h * j as f64;
            let wgt = if j == 0 || j == m {
                1.0
            } else if j % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += wgt * poisson_kernel(s, t, PI).unwrap();
        }
        let integral = acc * h / 3.0 / (2.0 * PI);
        assert!((integral - 0.5).abs() < 1e-6, "mass {integral}");
    }

    #[test]
    fn single_mode_widder_is_exact() {
        let (l, n, t_w) = (40.0, 512usize, 2.0);
        let xi0 = 4.0 * PI / l; // grid frequency, k = 4
        let a = LineFn::sample(l, n, Taper::None, |t| (xi0 * t).cos()).unwrap();
        let b = LineFn::constant(l, n, 0.0).unwrap();
        let s_grid = vec![0.0, 0.5, 1.3, 2.0];
        let field = widder_extend(&a, &b, t_w, &s_grid).unwrap();
        for (k, &s) in s_grid.iter().enumerate() {
            let factor = ((t_w - s) * xi0).sinh() / (t_w * xi0).sinh();
            for j in 0..n {
                let t = field.t_node(j);
                let expect = factor * (xi0 * t).cos();
                assert!(
                    (field.rows[k][j] - expect).abs() < 1e-8,
                    "mode error at s={s}, t={t}"
                );
            }
        }
    }

    #[test]
    fn widder_constant_boundaries() {
        let (l, n, t_w) = (40.0, 256usize, 1.5);
        let a = LineFn::constant(l, n, 1.0).unwrap();
        let b = LineFn::constant(l, n, 1.0).unwrap();
        let field = widder_extend(&a, &b, t_w, &[0.0, 0.7, 1.5]).unwrap();
        for row in &field.rows {
            for v in row {
                assert!((v - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn widder_linear_interpolant_and_harmonicity() {
        // a = 0, b = T: the harmonic interpolant is u(s, t) = s
        let (l, n, t_w) = (40.0, 512usize, 2.0);
        let a = LineFn::constant(l, n, 0.0).unwrap();
        let b = LineFn::sample(l, n, Taper::default(), |_| t_w).unwrap();
        let s_grid: Vec<f64> = (0..21).map(|k| t_w * k as f64 / 20.0).collect();
        let field = widder_extend(&a, &b, t_w, &s_grid).unwrap();
        let keep = n / 4; // central half-window
        for (k, &s) in s_grid.iter().enumerate() {
            for j in (n / 2 - keep)..(n / 2 + keep) {
                assert!(
                    (field.rows[k][j] - s).abs() < 1e-3,
                    "u(s={s}, t={}) = {}",
                    field.t_node(j),
                    field.rows[k][j]
                );
            }
        }
        // discrete 5-point residual of the spectral field is O((ds^2 +
        // dt^2) xi^4) over the taper's frequency content
        assert!(field.laplacian_residual(0.5).unwrap() < 1e-3);
        // boundary rows reproduce the (tapered) data
        for j in (n / 2 - keep)..(n / 2 + keep) {
            assert!((field.rows[0][j] - 0.0).abs() < 1e-12);
            assert!((field.rows[20][j] - t_w).abs() < 1e-12);
        }
    }

    #[test]
    fn window_mismatch_is_rejected() {
        let a = LineFn::constant(40.0, 256, 0.0).unwrap();
        let b = LineFn::constant(40.0, 512, 0.0).unwrap();
        assert!(matches!(
            widder_extend(&a, &b, 1.0, &[0.0, 1.0]),
            Err(Error::WindowMismatch(_))
        ));
    }

    #[test]
    fn bad_sample_counts_are_rejected() {
        assert!(matches!(
            LineFn::constant(1.0, 100, 0.0),
            Err(Error::BadSampleCount(100))
        ));
        assert!(matches!(
            LineFn::constant(1.0, 32, 0.0),
            Err(Error::BadSampleCount(32))
        ));
    }

    #[test]
    fn multiplier_eigenfunctions_are_exact() {
        let (l, n, t_w) = (40.0, 1024usize, 1.7);
        let xi0 = 6.0 * PI / l;
        let f = LineFn::sample(l, n, Taper::None, |t| (xi0 * t).cos()).unwrap();
        let g = multiplier_dn(&f, t_w).unwrap();
        let lambda = xi0 * (t_w * xi0).tanh().recip();
        for j in 0..n {
            let t = f.t_node(j);
            assert!(
                (g.values[j] - lambda * (xi0 * t).cos()).abs() < 1e-8,
                "dn eigenvalue"
            );
        }
        let g = multiplier_d_over_sinh(&f, t_w).unwrap();
        let lambda = xi0 / (t_w * xi0).sinh();
        for j in 0..n {
            let t = f.t_node(j);
            assert!((g.values[j] - lambda * (xi0 * t).cos()).abs() < 1e-8);
        }
    }

    #[test]
    fn hilbert_pairs_and_involution() {
        let (l, n) = (40.0, 1024usize);
        let xi0 = 5.0 * PI / l;
        let f = LineFn::sample(l, n, Taper::None, |t| (xi0 * t).cos()).unwrap();
        let hf = hilbert(&f).unwrap();
        for j in 0..n {
            let t = f.t_node(j);
            assert!((hf.values[j] - (xi0 * t).sin()).abs() < 1e-8, "cos -> sin");
        }
        // zero-mean input: H(Hf) = -f
        let hhf = hilbert(&hf).unwrap();
        for j in 0..n {
            assert!((hhf.values[j] + f.values[j]).abs() < 1e-8);
        }
    }

    #[test]
    fn hilbert_projects_onto_positive_frequencies() {
        // spectrum of f + i H f is twice the positive-frequency content
        let (l, n) = (40.0, 512usize);
        let f = LineFn::sample(l, n, Taper::None, |t| {
            (0.3 * t).cos() + 0.5 * (0.9 * t).sin() - 0.2 * (1.7 * t).cos()
        })
        .unwrap();
        let hf = hilbert(&f).unwrap();
        let sf = spectrum(&f);
        assert!(sf.hermitian_defect() < 1e-10);
        let mut buf: Vec<Complex64> = f
            .values
            .iter()
            .zip(&hf.values)
            .map(|(a, b)| Complex64::new(*a, *b))
            .collect();
        run_fft(&mut buf, false);
        let dt = f.dt();
        for (k, b) in buf.iter().enumerate().skip(1) {
            if k == n / 2 {
                continue; // Nyquist: the Hilbert symbol is zeroed there
            }
            let g = b * dt;
            let expect = if k < n / 2 {
                2.0 * sf.coeffs[k]
            } else {
                Complex64::new(0.0, 0.0)
            };
            assert!((g - expect).norm() < 1e-8, "bin {k}: {g} vs {expect}");
        }
    }

    #[test]
    fn neumann_data_identity_at_the_boundary() {
        // d_s of the extension at s = 0 equals -A_T a + (D/sinh TD) b
        let (l, n, t_w) = (40.0, 512usize, 1.4);
        let a = LineFn::sample(l, n, Taper::None, |t| (-t * t / 18.0).exp()).unwrap();
        let b = LineFn::sample(l, n, Taper::None, |t| 0.7 * (-(t - 3.0) * (t - 3.0) / 10.0).exp())
            .unwrap();
        let ds = 1e-4;
        let field = widder_extend(&a, &b, t_w, &[0.0, ds]).unwrap();
        let dn_a = multiplier_dn(&a, t_w).unwrap();
        let corr_b = multiplier_d_over_sinh(&b, t_w).unwrap();
        let keep = n / 4;
        for j in (n / 2 - keep)..(n / 2 + keep) {
            let one_sided = (field.rows[1][j] - field.rows[0][j]) / ds;
            let rhs = -dn_a.values[j] + corr_b.values[j];
            assert!(
                (one_sided - rhs).abs() < 1e-3,
                "boundary Neumann identity at j={j}: {one_sided} vs {rhs}"
            );
        }
    }

    #[test]
    fn pw_rates_of_closed_form_transforms() {
        let (l, n) = (80.0, 1024usize);
        let cfg = PwConfig {
            band: PwBand::Absolute { lo: 0.6, hi: 6.0 },
            ..PwConfig::default()
        };
        // fhat = e^{-2|xi|}
        let f = LineFn::sample(l, n, Taper::None, |t| (2.0 / PI) / (t * t + 4.0)).unwrap();
        let rep = pw_test(&f, 1.5, &cfg).unwrap();
        assert!(
            (rep.fitted_rate - 2.0).abs() < 0.1,
            "rate {} for the width-2 kernel",
            rep.fitted_rate
        );
        assert!(rep.pass, "must pass T = 1.5");
        let rep = pw_test(&f, 2.5, &cfg).unwrap();
        assert!(!rep.pass, "must fail T = 2.5");

        // fhat = pi e^{-|xi|}
        let g = LineFn::sample(l, n, Taper::None, |t| 1.0 / (1.0 + t * t)).unwrap();
        let rep = pw_test(&g, 2.0, &cfg).unwrap();
        assert!(!rep.pass);
        assert!((rep.fitted_rate - 1.0).abs() < 0.05, "rate {}", rep.fitted_rate);
        assert!(pw_test(&g, 0.5, &cfg).unwrap().pass);
    }

    #[test]
    fn gaussian_passes_every_width_and_rate_grows_with_band() {
        let (l, n) = (80.0, 1024usize);
        let f = LineFn::sample(l, n, Taper::None, |t| (-t * t / 2.0).exp()).unwrap();
        let narrow = PwConfig {
            band: PwBand::Absolute { lo: 0.5, hi: 3.0 },
            ..PwConfig::default()
        };
        let wide = PwConfig {
            band: PwBand::Absolute { lo: 0.5, hi: 6.0 },
            ..PwConfig::default()
        };
        let r1 = pw_test(&f, 1.0, &narrow).unwrap();
        let r2 = pw_test(&f, 1.0, &wide).unwrap();
        assert!(r2.fitted_rate > r1.fitted_rate, "super-exponential decay");
        for t_w in [0.5, 1.0, 1.5] {
            assert!(pw_test(&f, t_w, &narrow).unwrap().pass);
        }
    }

    #[test]
    fn pw_pass_is_monotone_in_width() {
        let (l, n) = (80.0, 1024usize);
        let cfg = PwConfig {
            band: PwBand::Absolute { lo: 0.6, hi: 6.0 },
            ..PwConfig::default()
        };
        let f = LineFn::sample(l, n, Taper::None, |t| (2.0 / PI) / (t * t + 4.0)).unwrap();
        let mut prev_pass = true;
        for k in 0..12 {
            let t_w = 0.25 * (k + 1) as f64;
            let pass = pw_test(&f, t_w, &cfg).unwrap().pass;
            assert!(!(pass && !prev_pass), "pass set must be downward closed in T");
            prev_pass = pass;
        }
    }

    #[test]
    fn pw_insufficient_resolution() {
        let (l, n) = (10.0, 64usize);
        // decays so fast every band bin is under the floor, but the
        // spectrum is not identically zero
        let f = LineFn::sample(l, n, Taper::None, |t| (-8.0 * t * t).exp()).unwrap();
        let cfg = PwConfig {
            band: PwBand::Absolute { lo: 9.0, hi: 10.0 },
            ..PwConfig::default()
        };
        assert!(matches!(
            pw_test(&f, 1.0, &cfg),
            Err(Error::InsufficientResolution)
        ));
    }

    #[test]
    fn toric_leaf_drift_field_is_affine_in_s() {
        let data = CauchyData::preset(PresetId::Drift, 401).unwrap();
        let s_grid: Vec<f64> = (0..9).map(|k| 0.25 * k as f64).collect();
        let sol = toric_leaf_solution(&data, &[0.4], 2.0, &s_grid, 40.0, 256).unwrap();
        // chi(s) = psi0(z) + s with psi0 = x^2/2, up to interpolation of u0
        for (k, &s) in s_grid.iter().enumerate() {
            for v in &sol.field.rows[k] {
                assert!((v - (0.08 + s)).abs() < 1e-5, "chi({s}) = {v}");
            }
        }
        // every drift leaf is stationary (grad udot0 = 0), hence flagged
        assert!(sol.trivial_leaf);
    }

    #[test]
    fn toric_leaf_quadratic_closed_form_and_vanishing_obstruction() {
        let data = CauchyData::preset(PresetId::Quadratic, 801).unwrap();
        let z = 0.5;
        let t_w = 1.5;
        let s_grid: Vec<f64> = (0..7).map(|k| 0.25 * k as f64).collect();
        let sol = toric_leaf_solution(&data, &[z], t_w, &s_grid, 40.0, 256).unwrap();
        // chi(s) = 0.0625 (1 - s) for u0 = y^2, udot0 = -y^2 at z = 0.5
        for (k, &s) in s_grid.iter().enumerate() {
            let expect = 0.0625 * (1.0 - s);
            assert!(
                (sol.field.rows[k][17] - expect).abs() < 1e-5,
                "chi({s}) = {} vs {expect}",
                sol.field.rows[k][17]
            );
        }
        // the obstruction row is constant and its centered version passes
        // the decay test at every width
        assert!(sol.q_minus_p_spread < 1e-10, "spread {}", sol.q_minus_p_spread);
        let centered: Vec<f64> = sol
            .q
            .values
            .iter()
            .zip(&sol.p.values)
            .map(|(a, b)| a - b - sol.q_minus_p_mean)
            .collect();
        let centered = LineFn::new(40.0, centered, Taper::None).unwrap();
        for t_w in [0.5, 1.5, 3.0] {
            let rep = pw_test(&centered, t_w, &PwConfig::default()).unwrap();
            assert!(rep.pass, "zero obstruction must pass T = {t_w}");
            assert!(rep.fitted_rate.is_infinite());
        }
        // linear-in-s fields are harmonic to rounding
        assert!(sol.field.laplacian_residual(0.8).unwrap() < 1e-9);
    }

    #[test]
    fn trivial_leaf_is_flagged_not_rejected() {
        // quartic udot0 = -y^2/2 has a critical point at y = 0, i.e. the
        // leaf through x = grad u0^{-1}(... ) with grad udot0 = 0
        let data = CauchyData::preset(PresetId::Quartic, 401).unwrap();
        let sol = toric_leaf_solution(&data, &[0.0], 1.0, &[0.0, 0.5], 40.0, 256).unwrap();
        assert!(sol.trivial_leaf);
    }
}
