//! Suite dispatch: each suite runs its checks, prints one line per check,
//! writes a JSON manifest plus CSV artifacts under `out_dir/<suite>/`, and
//! reports overall pass/fail.

use fracspde_core::analysis;
use fracspde_core::bernstein::log_grid;
use fracspde_core::config::ExperimentConfig;
use fracspde_core::fraccalc::TimeGrid;
use fracspde_core::grid::SpectralGrid;
use fracspde_core::kernel::{
    self, build_kernel_table, suggest_box, BoundSweep, KernelBound, Route,
};
use fracspde_core::noise::NoisePath;
use fracspde_core::report::{write_csv, EstimateReport, Manifest};
use fracspde_core::spde::{
    self, trig_basis, ForcingMode, LipMap, SpatialProfile, WhiteNoiseForcing,
};
use fracspde_core::{Error, Result};
use serde_json::{json, Value};
use std::path::PathBuf;

pub fn run(suite: &str, cfg: &ExperimentConfig) -> Result<bool> {
    let out_dir = PathBuf::from(&cfg.out_dir).join(suite);
    std::fs::create_dir_all(&out_dir)?;
    let (pass, body) = match suite {
        "kernel-table" => kernel_table(cfg, &out_dir)?,
        "verify-bounds" => verify_bounds(cfg, &out_dir)?,
        "simulate" => simulate(cfg, &out_dir)?,
        "regularity-report" => regularity_report(cfg, &out_dir)?,
        "sharp-report" => sharp_report(cfg, &out_dir)?,
        "picard" => picard(cfg, &out_dir)?,
        "whitenoise" => whitenoise(cfg, &out_dir)?,
        other => return Err(Error::UnknownName(format!("suite {other}"))),
    };
    let manifest = Manifest::new(cfg.hash(), cfg.seed, suite, pass, body);
    manifest.write(&out_dir.join("manifest.json"))?;
    println!("{suite}: {} (artifacts in {})", if pass { "PASS" } else { "FAIL" }, out_dir.display());
    Ok(pass)
}

fn print_report(r: &EstimateReport) {
    println!("  {}", r.one_line());
}

fn box_length(cfg: &ExperimentConfig) -> Result<f64> {
    if cfg.box_length > 0.0 {
        Ok(cfg.box_length)
    } else {
        suggest_box(&cfg.bernstein()?, cfg.t_end, cfg.points_per_axis)
    }
}

fn default_modes(cfg: &ExperimentConfig) -> Vec<ForcingMode> {
    (0..cfg.modes.max(1))
        .map(|k| ForcingMode::constant(trig_basis(k), 1.0, cfg.n_steps))
        .collect()
}

fn kernel_table(cfg: &ExperimentConfig, out: &PathBuf) -> Result<(bool, Value)> {
    let phi = cfg.bernstein()?;
    let params = cfg.frac_params()?;
    let times = [0.25 * cfg.t_end, 0.5 * cfg.t_end, cfg.t_end];
    let x_star = kernel::regime_scale(&phi, params.alpha, cfg.t_end)?;
    let mut xs = vec![0.0];
    xs.extend(log_grid(x_star * 1.0e-2, x_star * 1.0e2, 25));
    let fourier = build_kernel_table(&params, &phi, cfg.dim, &times, &xs, Route::Fourier)?;
    fourier.write_csv_file(&out.join("kernel_fourier.csv"))?;
    let mut pass = true;
    for (t, e) in times.iter().zip(&fourier.mass_rel_err) {
        let ok = *e <= cfg.tol.mass_rel;
        pass &= ok;
        println!(
            "  signed-mass residual at t = {t:.3}: {e:.3e} (tol {:.1e}) {}",
            cfg.tol.mass_rel,
            if ok { "PASS" } else { "FAIL" }
        );
    }
    // subordination route only exists for the plain kernel beta = alpha
    let mut sub_note = Value::Null;
    if params.gamma == 0.0 && (params.beta - params.alpha).abs() < 1.0e-12 {
        let sparse_xs: Vec<f64> = xs.iter().copied().step_by(5).collect();
        let sub =
            build_kernel_table(&params, &phi, cfg.dim, &[cfg.t_end], &sparse_xs, Route::Subordination)?;
        sub.write_csv_file(&out.join("kernel_subordination.csv"))?;
        let mut worst: f64 = 0.0;
        for (j, &x) in sparse_xs.iter().enumerate() {
            let qf = fourier.values[2][j * 5];
            let qs = sub.values[0][j];
            if qf.abs() > 1.0e-12 && x > 0.0 {
                worst = worst.max((qf - qs).abs() / qf.abs());
            }
        }
        let ok = worst <= cfg.tol.route_rel;
        pass &= ok;
        println!(
            "  route agreement (fourier vs subordination): worst rel {worst:.3e} {}",
            if ok { "PASS" } else { "FAIL" }
        );
        sub_note = json!({ "worst_route_rel": worst });
    }
    Ok((pass, json!({ "mass_rel_err": fourier.mass_rel_err, "subordination": sub_note })))
}

fn verify_bounds(cfg: &ExperimentConfig, out: &PathBuf) -> Result<(bool, Value)> {
    let phi = cfg.bernstein()?;
    let params = cfg.frac_params()?;
    let sweep = BoundSweep::default();
    let mut reports = Vec::new();
    reports.push(kernel::verify_p_bound(&phi, cfg.dim, &sweep, cfg.tol.drift)?);
    for gamma in [0.0, params.c1 / 2.0] {
        let p = params.with_gamma(gamma);
        for m in 0..=2usize {
            reports.push(kernel::verify_kernel_bound(
                &p,
                &phi,
                KernelBound::WholeRange,
                m,
                &sweep,
                cfg.tol.drift,
            )?);
            reports.push(kernel::verify_kernel_bound(
                &p,
                &phi,
                KernelBound::ResolvedTime,
                m,
                &sweep,
                cfg.tol.drift,
            )?);
        }
        let t_grid = log_grid(1.0e-2, 1.0e2, 5);
        reports.push(kernel::verify_mass_bound(&p, &phi, &t_grid, cfg.tol.drift)?);
    }
    let mut pass = true;
    let mut body = Vec::new();
    for r in &reports {
        print_report(r);
        r.write_samples_csv(&out.join(format!("{}.csv", r.id)), &["t", "x"])?;
        pass &= r.pass;
        body.push(serde_json::to_value(r).map_err(|e| Error::Config(e.to_string()))?);
    }
    Ok((pass, Value::Array(body)))
}

fn simulate(cfg: &ExperimentConfig, out: &PathBuf) -> Result<(bool, Value)> {
    let phi = cfg.bernstein()?;
    let params = cfg.frac_params()?;
    let len = box_length(cfg)?;
    let grid = SpectralGrid::new(cfg.dim, len, cfg.points_per_axis, &phi)?;
    let tgrid = TimeGrid::new(cfg.t_end, cfg.n_steps)?;
    let modes = default_modes(cfg);
    let path = NoisePath::generate(cfg.seed, modes.len(), cfg.n_steps, tgrid.dt());
    let field = spde::convolve_euler(&modes, &params, &grid, tgrid, &path)?;
    // CSV dump: t, x, u
    let xs = grid.axis_points();
    let mut rows = Vec::new();
    for (i, row) in field.values.iter().enumerate() {
        let t = tgrid.node(i);
        for (j, v) in row.iter().enumerate() {
            rows.push(vec![t, xs[j], *v]);
        }
    }
    write_csv(
        &out.join("field.csv"),
        &["t".into(), "x".into(), "u".into()],
        &rows,
    )?;
    println!(
        "  simulated {} steps x {} points (scheme {}, seed {})",
        cfg.n_steps, cfg.points_per_axis, field.scheme, field.seed
    );
    Ok((true, json!({ "box_length": len, "scheme": field.scheme })))
}

fn regularity_report(cfg: &ExperimentConfig, out: &PathBuf) -> Result<(bool, Value)> {
    let phi = cfg.bernstein()?;
    let params = cfg.frac_params()?;
    let len = box_length(cfg)?;
    let grid = SpectralGrid::new(cfg.dim, len, cfg.points_per_axis, &phi)?;
    let tgrid = TimeGrid::new(cfg.t_end, cfg.n_steps)?;
    let modes = default_modes(cfg);
    let mut pass = true;

    let p2 = analysis::verify_apriori_lp(
        &modes,
        &params,
        &phi,
        &grid,
        tgrid,
        2,
        cfg.n_samples,
        cfg.seed,
        cfg.tol.drift,
    )?;
    let (mc, exact, se) = p2.parseval_check.expect("p = 2 always cross-checks");
    let ok = (mc - exact).abs() <= 3.0 * se;
    pass &= ok;
    println!(
        "  p=2 Monte Carlo {mc:.6e} vs Parseval {exact:.6e} (3 SE = {:.2e}) {}",
        3.0 * se,
        if ok { "PASS" } else { "FAIL" }
    );
    print_report(&p2.estimate);
    pass &= p2.estimate.pass;

    let p4 = analysis::verify_apriori_lp(
        &modes,
        &params,
        &phi,
        &grid,
        tgrid,
        4,
        cfg.n_samples,
        cfg.seed,
        cfg.tol.drift,
    )?;
    print_report(&p4.estimate);
    pass &= p4.estimate.pass;

    let theta = analysis::verify_theta_smoothing(
        &modes,
        &params,
        &phi,
        &grid,
        cfg.t_end,
        cfg.n_steps,
        cfg.tol.drift,
    )?;
    print_report(&theta);
    pass &= theta.pass;

    let body = json!({
        "parseval": { "monte_carlo": mc, "exact": exact, "standard_error": se },
        "p2": p2.estimate,
        "p4": p4.estimate,
        "theta": theta,
    });
    p2.estimate.write_samples_csv(&out.join("p2_ratio.csv"), &["t"])?;
    p4.estimate.write_samples_csv(&out.join("p4_ratio.csv"), &["t"])?;
    Ok((pass, body))
}

fn sharp_report(cfg: &ExperimentConfig, out: &PathBuf) -> Result<(bool, Value)> {
    let phi = cfg.bernstein()?;
    let params = cfg.frac_params()?;
    if !(params.beta > 0.5) {
        return Err(Error::ParameterWindow(format!(
            "beta = {} outside the square-function regime 1/2 < beta < alpha + 1/2",
            params.beta
        )));
    }
    let len = box_length(cfg)?;
    let modes = vec![
        ForcingMode::constant(
            SpatialProfile::Bump { center: 0.5 * len, width: 0.1 * len },
            1.0,
            cfg.n_steps,
        ),
        ForcingMode::constant(trig_basis(1), 0.6, cfg.n_steps),
    ];
    let report = analysis::verify_sharp_maximal(
        &modes,
        &params,
        &phi,
        (cfg.points_per_axis.min(128), cfg.n_steps.min(64)),
        len,
        cfg.t_end,
        cfg.tol.drift,
    )?;
    print_report(&report);
    report.write_samples_csv(&out.join("sharp_ratio.csv"), &["t", "x"])?;
    let pass = report.pass;
    let body = serde_json::to_value(&report).map_err(|e| Error::Config(e.to_string()))?;
    Ok((pass, body))
}

fn picard(cfg: &ExperimentConfig, out: &PathBuf) -> Result<(bool, Value)> {
    let phi = cfg.bernstein()?;
    let params = cfg.frac_params()?;
    let len = box_length(cfg)?;
    let grid = SpectralGrid::new(cfg.dim, len, cfg.points_per_axis, &phi)?;
    let tgrid = TimeGrid::new(cfg.t_end, cfg.n_steps)?;
    let u0: Vec<f64> = grid
        .axis_points()
        .iter()
        .map(|&x| (-((x - 0.5 * len) / (0.1 * len)).powi(2)).exp())
        .collect();
    let g = vec![
        (LipMap::SinScaled { scale: 0.1 }, trig_basis(1)),
        (LipMap::Affine { scale: 0.1, offset: 0.5 }, trig_basis(2)),
    ];
    let path = NoisePath::generate(cfg.seed, g.len(), cfg.n_steps, tgrid.dt());
    let result = spde::picard_solve(
        LipMap::SinScaled { scale: 0.1 },
        &g,
        &u0,
        &params,
        &grid,
        tgrid,
        &path,
        10,
    )?;
    let mut pass = true;
    for (i, w) in result.diff_l2.windows(2).enumerate().skip(2) {
        if w[0] > 1.0e-14 {
            pass &= w[1] / w[0] <= 0.5;
        }
        let _ = i;
    }
    println!("  successive-difference L2 norms: {:?}", result.diff_l2);
    println!("  contraction from iterate 3 on: {}", if pass { "PASS" } else { "FAIL" });
    let rows: Vec<Vec<f64>> = result
        .diff_l2
        .iter()
        .enumerate()
        .map(|(i, d)| vec![i as f64 + 1.0, *d])
        .collect();
    write_csv(&out.join("picard_diffs.csv"), &["iterate".into(), "diff_l2".into()], &rows)?;
    Ok((pass, json!({ "diff_l2": result.diff_l2 })))
}

fn whitenoise(cfg: &ExperimentConfig, out: &PathBuf) -> Result<(bool, Value)> {
    let phi = cfg.bernstein()?;
    let params = cfg.frac_params()?;
    let len = box_length(cfg)?;
    let grid = SpectralGrid::new(cfg.dim, len, cfg.points_per_axis, &phi)?;
    let tgrid = TimeGrid::new(cfg.t_end, cfg.n_steps)?;
    let k = cfg.modes.max(2);
    let forcing: WhiteNoiseForcing =
        spde::white_noise_forcing(1.0, k, &params, &phi, cfg.dim, cfg.n_steps)?;
    let forcing2 = spde::white_noise_forcing(1.0, 2 * k, &params, &phi, cfg.dim, cfg.n_steps)?;
    let gamma = forcing.solution_regularity - 0.25;
    let m1 = spde::white_noise_second_moment(&forcing, &params, &phi, &grid, tgrid, gamma)?;
    let m2 = spde::white_noise_second_moment(&forcing2, &params, &phi, &grid, tgrid, gamma)?;
    let rel = (m2 - m1).abs() / m1.max(1.0e-300);
    let pass = rel <= cfg.tol.truncation_rel;
    println!(
        "  k0 = {:.4}, s > {:.4}, solution regularity {:.4}",
        forcing.k0, forcing.s_min, forcing.solution_regularity
    );
    println!(
        "  truncation stability K = {k} -> {}: second moment {m1:.6e} -> {m2:.6e} \
         (rel {rel:.3e}, tol {:.1e}) {}",
        2 * k,
        cfg.tol.truncation_rel,
        if pass { "PASS" } else { "FAIL" }
    );
    let body = json!({
        "k0": forcing.k0,
        "s_min": forcing.s_min,
        "solution_regularity": forcing.solution_regularity,
        "gamma_tested": gamma,
        "second_moment": { "k": m1, "2k": m2, "rel_change": rel },
    });
    write_csv(
        &out.join("truncation.csv"),
        &["modes".into(), "second_moment".into()],
        &[vec![k as f64, m1], vec![2.0 * k as f64, m2]],
    )?;
    Ok((pass, body))
}
