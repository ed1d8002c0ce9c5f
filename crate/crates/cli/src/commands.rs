//! The five batch commands and their artifact/manifest emission.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::json;

use hrma_core::alexandrov::{gradient_graph_check, weak_solution_check, RayRecipe};
use hrma_core::cauchy::{convex_lifespan, CauchyData};
use hrma_core::convex::convexity_report;
use hrma_core::grid::{fmt_g17, GridFn};
use hrma_core::hj::{caustic_time, hj_residual, hopf_lax_value, trace_characteristics};
use hrma_core::moser::{conservation_check, flow_map, invertibility_check, leaves};
use hrma_core::ray::{hcma_lift, legendre_ray, RaySolution};
use hrma_core::strip::{
    hilbert, multiplier_d_over_sinh, multiplier_dn, pw_test, spectrum, toric_leaf_solution,
    LineFn, PwBand, PwConfig, Taper,
};

use crate::config::{CheckTolerances, ExperimentConfig};

pub const INFINITE_SENTINEL: &str = "infinite (no obstruction found)";

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub threshold: f64,
}

impl CheckResult {
    fn upper(name: &str, value: f64, threshold: f64) -> Self {
        CheckResult {
            name: name.into(),
            pass: value <= threshold,
            value,
            threshold,
        }
    }

    fn flag(name: &str, pass: bool) -> Self {
        CheckResult {
            name: name.into(),
            pass,
            value: if pass { 1.0 } else { 0.0 },
            threshold: 1.0,
        }
    }
}

/// Collects artifacts and checks for the manifest as a command runs.
pub struct Run {
    pub command: String,
    pub out_dir: PathBuf,
    pub config: ExperimentConfig,
    pub artifacts: Vec<String>,
    pub checks: Vec<CheckResult>,
    started: Instant,
}

impl Run {
    pub fn new(command: &str, out_dir: &Path, config: &ExperimentConfig) -> Result<Self> {
        fs::create_dir_all(out_dir)
            .with_context(|| format!("cannot create {}", out_dir.display()))?;
        Ok(Run {
            command: command.into(),
            out_dir: out_dir.into(),
            config: config.clone(),
            artifacts: Vec::new(),
            checks: Vec::new(),
            started: Instant::now(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.artifacts.push(name.to_string());
        self.out_dir.join(name)
    }

    pub fn write_json(&mut self, name: &str, value: &serde_json::Value) -> Result<()> {
        let path = self.path(name);
        let mut f = BufWriter::new(File::create(&path)?);
        serde_json::to_writer_pretty(&mut f, value)?;
        f.write_all(b"\n")?;
        Ok(())
    }

    pub fn write_text(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.path(name);
        fs::write(&path, body)?;
        Ok(())
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// Finalize: write manifest.json (listed as its own artifact).
    pub fn finish(mut self) -> Result<bool> {
        let all_pass = self.all_pass();
        self.artifacts.push("manifest.json".into());
        let manifest = json!({
            "tool_version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "config": self.config,
            "wall_clock_sec": self.started.elapsed().as_secs_f64(),
            "artifacts": self.artifacts,
            "checks": self.checks,
            "all_pass": all_pass,
        });
        let path = self.out_dir.join("manifest.json");
        let mut f = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut f, &manifest)?;
        f.write_all(b"\n")?;
        Ok(all_pass)
    }
}

fn finite_or_sentinel(v: f64) -> serde_json::Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(INFINITE_SENTINEL)
    }
}

pub fn cmd_lifespan(cfg: &ExperimentConfig, base: &Path, out: &Path, tol: CheckTolerances) -> Result<bool> {
    let mut run = Run::new("lifespan", out, cfg)?;
    let data = cfg.build_data(base)?;
    let lifespan = convex_lifespan(&data)?;
    let t = lifespan.value;

    if t.is_finite() {
        let below = convexity_report(&data.us(0.99 * t), &data.tol)?;
        let above = convexity_report(&data.us(1.01 * t), &data.tol)?;
        run.checks.push(CheckResult::flag(
            "lifespan_bracket",
            below.is_convex && !above.is_convex,
        ));
    } else {
        // no obstruction found up to the configured horizon
        let (s_grid, _, _) = cfg.ray_grids(&data)?;
        let horizon = *s_grid.last().unwrap();
        let rep = convexity_report(&data.us(horizon), &data.tol)?;
        run.checks.push(CheckResult::flag("no_obstruction_scan", rep.is_convex));
    }
    let _ = tol;

    run.write_json(
        "lifespan.json",
        &json!({
            "t_cvx": finite_or_sentinel(t),
            "argmin_node": lifespan.argmin_node,
            "argmin_point": lifespan.argmin_point,
        }),
    )?;
    run.finish()
}

fn write_slice(run: &mut Run, name: &str, slice: &GridFn) -> Result<()> {
    let path = run.path(name);
    let mut f = BufWriter::new(File::create(&path)?);
    slice.write_to(&mut f)?;
    Ok(())
}

pub fn cmd_ray(cfg: &ExperimentConfig, base: &Path, out: &Path, tol: CheckTolerances) -> Result<bool> {
    let mut run = Run::new("ray", out, cfg)?;
    let data = cfg.build_data(base)?;
    let (s_grid, x_box, x_shape) = cfg.ray_grids(&data)?;
    let ray = legendre_ray(&data, &s_grid, &x_box, &x_shape)?;

    // export a uniform subsample of slices plus the ray manifest (uniform
    // spacing so a later verify run can difference them in s)
    let stride = (s_grid.len() / 64).max(1);
    let mut files = Vec::new();
    for (k, slice) in ray.slices.iter().enumerate() {
        if k % stride != 0 {
            continue;
        }
        let name = format!("slice_{k:05}.grid");
        write_slice(&mut run, &name, slice)?;
        files.push(json!({"index": k, "s": s_grid[k], "file": name}));
    }
    run.write_json(
        "ray_manifest.json",
        &json!({
            "lifespan": finite_or_sentinel(ray.lifespan.value),
            "s_grid": ray.s_grid,
            "admissible": ray.admissible,
            "x_box": x_box,
            "x_shape": x_shape,
            "slices": files,
        }),
    )?;

    // relative potential export
    let lift = hcma_lift(&ray)?;
    let mut csv = String::from("s,x0,phi\n");
    let lift_stride = (s_grid.len() / 16).max(1);
    for (k, slice) in lift.slices.iter().enumerate() {
        if k % lift_stride != 0 {
            continue;
        }
        let ax = slice.axis(0);
        for i in (0..ax.n).step_by((ax.n / 128).max(1)) {
            csv.push_str(&format!(
                "{},{},{}\n",
                fmt_g17(s_grid[k]),
                fmt_g17(ax.node(i)),
                fmt_g17(slice.values()[i])
            ));
        }
    }
    run.write_text("lift.csv", &csv)?;

    // checks: the s = 0 slice is the pointwise sup at s = 0, and the
    // admissibility flags agree with the lifespan outside a 2% bracket
    let slice0 = &ray.slices[0];
    let mut sup0 = 0.0_f64;
    for i in (0..slice0.axis(0).n).step_by(7) {
        let x = slice0.axis(0).node(i);
        sup0 = sup0.max((slice0.values()[i] - hopf_lax_value(&data, 0.0, &[x])).abs());
    }
    run.checks.push(CheckResult::upper("slice0_matches_hopf_lax", sup0, 1e-12));
    let t = ray.lifespan.value;
    let consistent = ray
        .s_grid
        .iter()
        .zip(&ray.admissible)
        .filter(|(s, _)| **s < 0.98 * t || **s > 1.02 * t)
        .all(|(s, adm)| *adm == (*s < t));
    run.checks.push(CheckResult::flag("admissible_flags_consistent", consistent));
    let _ = tol;
    run.finish()
}

pub fn cmd_flow(cfg: &ExperimentConfig, base: &Path, out: &Path, tol: CheckTolerances) -> Result<bool> {
    let mut run = Run::new("flow", out, cfg)?;
    let data = cfg.build_data(base)?;
    let (s_grid, x_box, x_shape) = cfg.ray_grids(&data)?;
    let seeds = cfg.flow_seeds(&data)?;
    let s_max = *s_grid.last().unwrap();

    // leaves and characteristics
    let strip = trace_characteristics(&data, &seeds, &s_grid)?;
    let ls = leaves(&data, &seeds, s_max)?;
    let dim = data.u0.dim();

    let export_s: Vec<f64> = (0..17).map(|k| s_max * k as f64 / 16.0).collect();
    let mut leaf_csv = String::from(if dim == 1 {
        "seed_id,s,x0\n"
    } else {
        "seed_id,s,x0,x1\n"
    });
    for (id, leaf) in ls.iter().enumerate() {
        for &s in &export_s {
            let p = leaf.position(s);
            let coords: Vec<String> = p.iter().map(|v| fmt_g17(*v)).collect();
            leaf_csv.push_str(&format!("{id},{},{}\n", fmt_g17(s), coords.join(",")));
        }
    }
    run.write_text("leaves.csv", &leaf_csv)?;

    let mut char_csv = String::from(if dim == 1 {
        "seed_id,s,x0,z,p_sigma,p_xi0\n"
    } else {
        "seed_id,s,x0,x1,z,p_sigma,p_xi0,p_xi1\n"
    });
    for k in 0..strip.len() {
        for &s in &export_s {
            let x = strip.position(k, s);
            let z = strip.value(k, s);
            let xs: Vec<String> = x.iter().map(|v| fmt_g17(*v)).collect();
            let pxi: Vec<String> = strip.p_xi[k].iter().map(|v| fmt_g17(*v)).collect();
            char_csv.push_str(&format!(
                "{k},{},{},{},{},{}\n",
                fmt_g17(s),
                xs.join(","),
                fmt_g17(z),
                fmt_g17(strip.p_sigma[k]),
                pxi.join(",")
            ));
        }
    }
    run.write_text("characteristics.csv", &char_csv)?;

    // flow map samples at three times
    let mut fm_csv = String::from(if dim == 1 {
        "s,x_in0,x_out0,jac_det\n"
    } else {
        "s,x_in0,x_in1,x_out0,x_out1,jac_det\n"
    });
    for &s in &[s_max / 3.0, 2.0 * s_max / 3.0, s_max] {
        let fm = flow_map(&data, s, &seeds)?;
        for sample in &fm.samples {
            let xin: Vec<String> = sample.x.iter().map(|v| fmt_g17(*v)).collect();
            let xout: Vec<String> = sample.image.iter().map(|v| fmt_g17(*v)).collect();
            fm_csv.push_str(&format!(
                "{},{},{},{}\n",
                fmt_g17(s),
                xin.join(","),
                xout.join(","),
                fmt_g17(sample.jac_det)
            ));
        }
    }
    run.write_text("flow_map.csv", &fm_csv)?;

    // caustic report
    let caustic = caustic_time(&strip)?;
    run.write_json(
        "caustic.json",
        &json!({
            "first_crossing_s": finite_or_sentinel(caustic.first_crossing_s),
            "crossing_pair": caustic.crossing_pair,
            "location": caustic.location,
        }),
    )?;

    // conservation law on a sub-lifespan ray
    let lifespan = convex_lifespan(&data)?.value;
    let cons_s_max = if lifespan.is_finite() {
        (0.9 * lifespan).min(s_max)
    } else {
        s_max
    };
    let count = (s_grid.len() - 1).max(2);
    let cons_grid: Vec<f64> = (0..=count)
        .map(|k| cons_s_max * k as f64 / count as f64)
        .collect();
    let ray = legendre_ray(&data, &cons_grid, &x_box, &x_shape)?;
    let cons = conservation_check(&ray)?;
    run.write_json(
        "conservation.json",
        &json!({
            "sup_error": cons.sup_error,
            "route_gap": cons.route_gap,
            "samples": cons.samples,
            "s_max": cons_s_max,
        }),
    )?;

    // checks
    if lifespan.is_finite() {
        let rel = (caustic.first_crossing_s - lifespan).abs() / lifespan;
        run.checks.push(CheckResult::upper("caustic_vs_lifespan", rel, tol.caustic_rel));
        run.checks.push(CheckResult::flag(
            "invertibility_bracket",
            invertibility_check(&data, 0.98 * lifespan)?.0
                && !invertibility_check(&data, 1.02 * lifespan)?.0,
        ));
    } else {
        run.checks.push(CheckResult::flag(
            "no_caustic_for_convex_velocity",
            !caustic.first_crossing_s.is_finite(),
        ));
    }
    run.checks.push(CheckResult::upper(
        "conservation_sup_error",
        cons.sup_error,
        tol.conservation,
    ));
    // straight-line check of the exported leaves: affine in s by storage
    let mut affine_dev = 0.0_f64;
    for leaf in &ls {
        let p0 = leaf.position(0.0);
        let p1 = leaf.position(s_max);
        for &s in &export_s {
            let p = leaf.position(s);
            for d in 0..dim {
                let fit = p0[d] + (p1[d] - p0[d]) * s / s_max;
                affine_dev = affine_dev.max((p[d] - fit).abs());
            }
        }
    }
    run.checks.push(CheckResult::upper("leaf_affine_deviation", affine_dev, 1e-12));
    run.finish()
}

fn load_ray_from_manifest(data: &CauchyData, manifest: &Path) -> Result<RaySolution> {
    let text = fs::read_to_string(manifest)
        .with_context(|| format!("cannot read {}", manifest.display()))?;
    let v: serde_json::Value = serde_json::from_str(&text)?;
    let dir = manifest.parent().unwrap_or(Path::new("."));
    let s_grid_full: Vec<f64> = serde_json::from_value(v["s_grid"].clone())?;
    let mut s_grid = Vec::new();
    let mut slices = Vec::new();
    for entry in v["slices"]
        .as_array()
        .context("ray manifest has no slice list")?
    {
        let k = entry["index"].as_u64().context("slice index")? as usize;
        let name = entry["file"].as_str().context("slice file")?;
        let f = File::open(dir.join(name))?;
        slices.push(GridFn::read_from(&mut BufReader::new(f))?);
        s_grid.push(s_grid_full[k]);
    }
    let lifespan = convex_lifespan(data)?;
    let admissible = vec![true; slices.len()];
    Ok(RaySolution {
        data: data.clone(),
        s_grid,
        slices,
        lifespan,
        admissible,
    })
}

pub fn cmd_verify(cfg: &ExperimentConfig, base: &Path, out: &Path, tol: CheckTolerances) -> Result<bool> {
    let mut run = Run::new("verify", out, cfg)?;
    let data = cfg.build_data(base)?;
    let (s_grid, x_box, x_shape) = cfg.ray_grids(&data)?;
    let lifespan = convex_lifespan(&data)?.value;

    // weak-solution refinement study on its own (coarser) base grids
    let study_s_max = if lifespan.is_finite() {
        cfg.verify.s_fraction * lifespan
    } else {
        *s_grid.last().unwrap()
    };
    let recipe = RayRecipe {
        s_max: study_s_max,
        s_count: cfg.verify.s_count,
        x_box: x_box.clone(),
        x_shape: vec![cfg.verify.x_shape; data.u0.dim()],
    };
    let mass = weak_solution_check(&data, &recipe)?;
    run.write_json(
        "ma_report.json",
        &json!({
            "levels": mass.levels,
            "ratios": mass.ratios,
            "order_estimate": mass.order_estimate,
        }),
    )?;

    // ray under test: supplied or recomputed
    let sub_lifespan_grid: Vec<f64> = {
        let cap = if lifespan.is_finite() {
            (0.9 * lifespan).min(*s_grid.last().unwrap())
        } else {
            *s_grid.last().unwrap()
        };
        let count = s_grid.len() - 1;
        (0..=count).map(|k| cap * k as f64 / count as f64).collect()
    };
    let ray = match &cfg.ray_manifest {
        Some(path) => {
            let path = if path.is_absolute() {
                path.clone()
            } else {
                base.join(path)
            };
            load_ray_from_manifest(&data, &path)?
        }
        None => legendre_ray(&data, &sub_lifespan_grid, &x_box, &x_shape)?,
    };

    let graph = gradient_graph_check(&ray)?;
    run.write_json(
        "graph_check.json",
        &json!({
            "sup_deviation": graph.sup_deviation,
            "samples": graph.samples,
        }),
    )?;

    let residual = hj_residual(&ray.s_grid, &ray.slices, &data)?;
    run.write_json(
        "hj_residual.json",
        &json!({
            "sup_residual": residual.sup_residual,
            "flagged_fraction": residual.flagged_fraction,
            "samples": residual.samples,
        }),
    )?;

    for (k, r) in mass.ratios.iter().enumerate() {
        run.checks.push(CheckResult::upper(
            &format!("mass_ratio_{}", k + 1),
            if mass.levels[0].total_mass < 1e-12 {
                0.0 // exactly degenerate gradient graphs carry no mass
            } else {
                *r
            },
            tol.mass_ratio,
        ));
    }
    run.checks.push(CheckResult::upper(
        "graph_deviation",
        graph.sup_deviation,
        tol.graph_deviation,
    ));
    run.checks.push(CheckResult::upper(
        "hj_residual",
        residual.sup_residual,
        tol.hj_residual,
    ));
    run.finish()
}

pub fn cmd_obstruction(cfg: &ExperimentConfig, base: &Path, out: &Path, tol: CheckTolerances) -> Result<bool> {
    let mut run = Run::new("obstruction", out, cfg)?;
    let data = cfg.build_data(base)?;
    if data.u0.dim() != 1 {
        bail!("the obstruction command supports one-dimensional data");
    }
    let strip_cfg = &cfg.strip;
    let (l, n, t_w) = (strip_cfg.half_window, strip_cfg.window_n, strip_cfg.t_width);

    // leaf battery at the configured base points (default: three interior
    // points of the moment image)
    let points: Vec<Vec<f64>> = match &strip_cfg.leaf_points {
        Some(p) => p.clone(),
        None => {
            let nn = data.u0.axis(0).n;
            [nn / 4, nn / 2, 3 * nn / 4]
                .iter()
                .map(|&i| vec![data.u0.node_deriv(&[i], 0)])
                .collect()
        }
    };
    let s_grid: Vec<f64> = (0..9).map(|k| t_w * k as f64 / 8.0).collect();
    let mut leaf_reports = Vec::new();
    let mut max_spread = 0.0_f64;
    for z in &points {
        let sol = toric_leaf_solution(&data, z, t_w, &s_grid, l, n)?;
        max_spread = max_spread.max(sol.q_minus_p_spread);
        // centered obstruction must pass the decay test at the strip width
        let centered: Vec<f64> = sol
            .q
            .values
            .iter()
            .zip(&sol.p.values)
            .map(|(a, b)| a - b - sol.q_minus_p_mean)
            .collect();
        let centered = LineFn::new(l, centered, Taper::None)?;
        let pw = pw_test(&centered, t_w, &PwConfig::default())?;
        leaf_reports.push(json!({
            "z": z,
            "trivial_leaf": sol.trivial_leaf,
            "q_minus_p_mean": sol.q_minus_p_mean,
            "q_minus_p_spread": sol.q_minus_p_spread,
            "centered_pw_pass": pw.pass,
        }));
    }
    run.write_json("leaf_obstruction.json", &json!({ "leaves": leaf_reports }))?;

    // decay-rate battery: the width-2 kernel family and a Gaussian control
    let cfg_pw = PwConfig {
        band: PwBand::Absolute {
            lo: strip_cfg.pw_band[0],
            hi: strip_cfg.pw_band[1],
        },
        ..PwConfig::default()
    };
    let lorentz = LineFn::sample(l, n, Taper::None, |t| {
        (2.0 / std::f64::consts::PI) / (t * t + 4.0)
    })?;
    let gaussian = LineFn::sample(l, n, Taper::None, |t| (-t * t / 2.0).exp())?;

    // spectral dump of the kernel family input
    let spec = spectrum(&lorentz);
    let mut spec_csv = String::from("xi,re,im,log_abs\n");
    for k in 1..n / 2 {
        let c = spec.coeffs[k];
        spec_csv.push_str(&format!(
            "{},{},{},{}\n",
            fmt_g17(spec.xi[k]),
            fmt_g17(c.re),
            fmt_g17(c.im),
            fmt_g17(c.norm().max(1e-300).ln())
        ));
    }
    run.write_text("spectrum_kernel.csv", &spec_csv)?;

    let mut sweep = Vec::new();
    let mut transition = 0.0_f64;
    let mut gaussian_all_pass = true;
    for k in 0..=24 {
        let t_test = 0.1 + 0.1 * k as f64;
        let rep = pw_test(&lorentz, t_test, &cfg_pw)?;
        if rep.pass {
            transition = t_test;
        }
        let g = pw_test(&gaussian, t_test, &cfg_pw)?;
        gaussian_all_pass &= g.pass;
        sweep.push(json!({
            "t": t_test,
            "kernel": {"fitted_rate": rep.fitted_rate, "band": rep.band_used,
                        "pass": rep.pass, "margin": rep.margin},
            "gaussian_pass": g.pass,
        }));
    }
    let kernel_rate = pw_test(&lorentz, 1.0, &cfg_pw)?.fitted_rate;
    run.write_json(
        "pw_battery.json",
        &json!({
            "kernel_rate": kernel_rate,
            "pass_fail_transition": transition,
            "gaussian_all_pass": gaussian_all_pass,
            "sweep": sweep,
        }),
    )?;

    // multiplier identity checks at a grid frequency
    let xi0 = 6.0 * std::f64::consts::PI / l;
    let mode = LineFn::sample(l, n, Taper::None, |t| (xi0 * t).cos())?;
    let mut eig_err = 0.0_f64;
    let dn = multiplier_dn(&mode, t_w)?;
    let lam_dn = xi0 / (t_w * xi0).tanh();
    let ds = multiplier_d_over_sinh(&mode, t_w)?;
    let lam_ds = xi0 / (t_w * xi0).sinh();
    let hb = hilbert(&mode)?;
    for j in 0..n {
        let t = mode.t_node(j);
        eig_err = eig_err.max((dn.values[j] - lam_dn * (xi0 * t).cos()).abs());
        eig_err = eig_err.max((ds.values[j] - lam_ds * (xi0 * t).cos()).abs());
        eig_err = eig_err.max((hb.values[j] - (xi0 * t).sin()).abs());
    }
    run.write_json(
        "multiplier_checks.json",
        &json!({"eigenfunction_error": eig_err, "xi0": xi0}),
    )?;

    run.checks.push(CheckResult::upper(
        "leaf_obstruction_spread",
        max_spread,
        tol.obstruction_spread,
    ));
    run.checks.push(CheckResult::upper(
        "kernel_rate_error",
        (kernel_rate - 2.0).abs(),
        0.1,
    ));
    run.checks.push(CheckResult::upper(
        "transition_vs_kernel_width",
        (transition - 2.0).abs() / 2.0,
        0.05,
    ));
    run.checks.push(CheckResult::flag("gaussian_all_pass", gaussian_all_pass));
    run.checks.push(CheckResult::upper(
        "multiplier_eigen_error",
        eig_err,
        tol.eigenfunction,
    ));
    run.finish()
}
