use std::path::PathBuf;

use platelab_core::carleman::{certify, linear_family, weight_from_profile, Certificate, WeightPair};
use platelab_core::evolution::{
    decay_fit, energy_trace, evolve_exact, evolve_midpoint_strided, smooth_data, uniform_times, EnergyTrace,
};
use platelab_core::spectra::{
    axis_distance_check, pencil_spectrum, sweep_with_spectrum, uniform_grid, weak_branch_trend, ResolventSolver,
    SigmaMethod, SpectrumReport,
};
use platelab_core::transmission::{
    imaginary_part_identity, interface_residuals, random_case_data, smooth_case_data, solve_resolvent, w_substitution,
    CaseGrid, RegionFields,
};
use platelab_core::{PlateModel, C64};
use serde_json::json;

use crate::config::{CaseData, RunConfig, SimulateMethod, WeightFamily};
use crate::output::{dat, num, Artifacts, Csv};
use crate::{verify, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Spectrum,
    Sweep,
    ResolventCase,
    Carleman,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Spectrum => "spectrum",
            Command::Sweep => "sweep",
            Command::ResolventCase => "resolvent-case",
            Command::Carleman => "carleman",
            Command::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub out: PathBuf,
    pub plot_data: bool,
    /// Overrides every seed in the configuration.
    pub seed: Option<u64>,
}

/// Result of a command that ran to completion.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub summary: String,
    pub artifacts: Artifacts,
    /// False only for a `verify` run with a failing property.
    pub passed: bool,
}

/// Runs `command` and commits its outputs to `options.out`.
///
/// Nothing is written unless the command completes.
pub fn run_command(command: Command, config: Option<&RunConfig>, options: &RunOptions) -> Result<Outcome, CliError> {
    let outcome = match command {
        Command::Verify => run_verify(options),
        other => {
            let config =
                config.ok_or_else(|| CliError::Config(vec![format!("`{}` requires --config", other.name())]))?;
            match other {
                Command::Simulate => simulate(config, options),
                Command::Spectrum => spectrum(config, options),
                Command::Sweep => sweep(config, options),
                Command::ResolventCase => resolvent_case(config, options),
                Command::Carleman => carleman(config, options),
                Command::Verify => unreachable!(),
            }
        }
    }?;
    outcome.artifacts.commit(&options.out)?;
    Ok(outcome)
}

fn build_model(config: &RunConfig) -> Result<PlateModel, CliError> {
    Ok(PlateModel::new(
        config.geometry,
        config.damping,
        config.discretization.n_modes,
    )?)
}

fn model_json(config: &RunConfig) -> serde_json::Value {
    let g = &config.geometry;
    json!({
        "dim": g.dim(),
        "lengths": match g.ly() { None => vec![g.lx()], Some(ly) => vec![g.lx(), ly] },
        "d": config.damping.coefficient(),
        "ell": config.damping.extent(),
        "n_modes": config.discretization.n_modes,
        "analog": g.dim() == 1,
    })
}

fn tag(config: &RunConfig) -> String {
    let analog = if config.geometry.dim() == 1 { " [1D analog]" } else { "" };
    format!(
        "N={} d={} ell={}{analog}",
        config.discretization.n_modes,
        num(config.damping.coefficient()),
        num(config.damping.extent())
    )
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values always serialize");
    s.push('\n');
    s
}

fn seed(configured: u64, options: &RunOptions) -> u64 {
    options.seed.unwrap_or(configured)
}

fn trace_csv(trace: &EnergyTrace) -> String {
    let mut csv = Csv::new(&["t", "energy", "dissipation_cum"]);
    for ((t, e), d) in trace.times.iter().zip(&trace.energy).zip(&trace.dissipation) {
        csv.row(&[num(*t), num(*e), num(*d)]);
    }
    csv.finish()
}

fn simulate(config: &RunConfig, options: &RunOptions) -> Result<Outcome, CliError> {
    let sim = &config.simulate;
    let model = build_model(config)?;
    let state = smooth_data(model.basis(), sim.k, seed(sim.seed, options))?;
    let trajectory = match sim.method {
        SimulateMethod::Exact => evolve_exact(&model, &state, &uniform_times(sim.t_final, sim.samples))?,
        SimulateMethod::Midpoint => {
            let steps = (sim.t_final / sim.dt).ceil().max(1.0);
            let stride = ((steps / sim.samples as f64).round() as usize).max(1);
            evolve_midpoint_strided(&model, &state, sim.dt, sim.t_final, stride)?
        }
    };
    let trace = energy_trace(&trajectory, &model)?;
    let fit = decay_fit(&trace, sim.k, sim.window)?;
    let e0 = trace.energy[0];
    let e_end = *trace.energy.last().expect("trace is nonempty");
    let d_end = *trace.dissipation.last().expect("trace is nonempty");
    let balance = if e0 > 0.0 { (e0 - e_end - d_end).abs() / e0 } else { 0.0 };
    let max_growth = trace.energy.iter().map(|e| e - e0).fold(f64::NEG_INFINITY, f64::max);

    let mut artifacts = Artifacts::default();
    artifacts.add("trace.csv", trace_csv(&trace));
    let method = match sim.method {
        SimulateMethod::Exact => "exact",
        SimulateMethod::Midpoint => "midpoint",
    };
    artifacts.add(
        "simulate.json",
        pretty(&json!({
            "model": model_json(config),
            "method": method,
            "dt": if sim.method == SimulateMethod::Midpoint { Some(sim.dt) } else { None },
            "t_final": sim.t_final,
            "k": sim.k,
            "seed": seed(sim.seed, options),
            "energy_initial": e0,
            "energy_final": e_end,
            "dissipation_final": d_end,
            "balance_relative_error": balance,
            "max_energy_increase": max_growth,
            "decay_fit": fit,
        })),
    );
    if options.plot_data {
        let rows = trace
            .times
            .iter()
            .zip(&trace.energy)
            .zip(&trace.dissipation)
            .map(|((t, e), d)| vec![*t, *e, *d]);
        artifacts.add("trace.dat", dat(&["t", "energy", "dissipation_cum"], rows));
    }
    let summary = format!(
        "simulate: {} method={method} E(0)={} E(T)={} exp_rate={} C_{}={}",
        tag(config),
        num(e0),
        num(e_end),
        num(fit.exp_rate),
        sim.k,
        num(fit.c_k)
    );
    Ok(Outcome {
        summary,
        artifacts,
        passed: true,
    })
}

fn spectrum_csv(report: &SpectrumReport) -> String {
    let mut csv = Csv::new(&["index", "re", "im", "branch"]);
    for (i, (z, b)) in report.eigenvalues.iter().zip(&report.branches).enumerate() {
        csv.row(&[i.to_string(), num(z.re), num(z.im), b.label().into()]);
    }
    csv.finish()
}

fn spectrum(config: &RunConfig, options: &RunOptions) -> Result<Outcome, CliError> {
    let model = build_model(config)?;
    let report = pencil_spectrum(&model, config.discretization.dense_cap)?;
    let (trend, weak) = weak_branch_trend(&report);
    let least = report.least_damped();
    let mut artifacts = Artifacts::default();
    artifacts.add("spectrum.csv", spectrum_csv(&report));
    artifacts.add(
        "spectrum.json",
        pretty(&json!({
            "model": model_json(config),
            "eigenvalue_count": report.eigenvalues.len(),
            "spectral_abscissa": report.spectral_abscissa,
            "axis_gap": report.axis_gap(),
            "least_damped": [least.re, least.im],
            "pairing_error": report.pairing_error,
            "conjugate_paired": report.conjugate_paired,
            "weak_branch_size": weak,
            "weak_branch_trend": trend,
        })),
    );
    if options.plot_data {
        artifacts.add(
            "spectrum.dat",
            dat(&["re", "im"], report.eigenvalues.iter().map(|z| vec![z.re, z.im])),
        );
    }
    let summary = format!(
        "spectrum: {} eigenvalues={} abscissa={} paired={}",
        tag(config),
        report.eigenvalues.len(),
        num(report.spectral_abscissa),
        report.conjugate_paired
    );
    Ok(Outcome {
        summary,
        artifacts,
        passed: true,
    })
}

fn sweep(config: &RunConfig, options: &RunOptions) -> Result<Outcome, CliError> {
    let sc = &config.sweep;
    let model = build_model(config)?;
    let n = model.n_modes();
    // the lower bound needs every eigenvalue, whatever the σ_min path
    let spectrum = pencil_spectrum(&model, n.max(config.discretization.dense_cap))?;
    let solver = ResolventSolver::for_model(&model);
    let grid = uniform_grid(sc.mu_min, sc.mu_max, sc.n_points);
    let result = sweep_with_spectrum(&solver, &spectrum, &grid)?;
    let diag = axis_distance_check(&spectrum, &result);
    let refined = if sc.refine {
        let fine = uniform_grid(sc.mu_min, sc.mu_max, 2 * sc.n_points - 1);
        let r = sweep_with_spectrum(&solver, &spectrum, &fine)?;
        Some(r.fit.slope)
    } else {
        None
    };
    let b = result.fit.slope;
    let relative_change = refined.map(|r| (r - b).abs() / b.abs().max(f64::MIN_POSITIVE));

    let mut csv = Csv::new(&["mu", "norm", "lower_bound"]);
    for ((m, r), lb) in result.mu.iter().zip(&result.norms).zip(&result.lower_bounds) {
        csv.row(&[num(*m), num(*r), num(*lb)]);
    }
    let mut artifacts = Artifacts::default();
    artifacts.add("sweep.csv", csv.finish());
    artifacts.add(
        "sweep.json",
        pretty(&json!({
            "model": model_json(config),
            "solver": match solver.method() { SigmaMethod::Dense => "dense", SigmaMethod::InverseIteration => "inverse_iteration" },
            "mu_min": sc.mu_min,
            "mu_max": sc.mu_max,
            "n_points": sc.n_points,
            "fit_intercept": result.fit.intercept,
            "fit_b": b,
            "fit_rms_residual": result.fit.rms_residual,
            "refined_b": refined,
            "refined_relative_change": relative_change,
            "diagnostics": diag,
        })),
    );
    if options.plot_data {
        let rows = result
            .mu
            .iter()
            .zip(&result.norms)
            .zip(&result.lower_bounds)
            .map(|((m, r), lb)| vec![*m, *r, *lb]);
        artifacts.add("sweep.dat", dat(&["mu", "norm", "lower_bound"], rows));
    }
    let summary = format!(
        "sweep: {} points={} b={} lower_bound_holds={} peak_mu={}",
        tag(config),
        sc.n_points,
        num(b),
        diag.lower_bound_holds,
        num(diag.peak_mu)
    );
    Ok(Outcome {
        summary,
        artifacts,
        passed: true,
    })
}

fn push_complex(csv: &mut Csv, prefix: &[String], kind: &str, z: C64) {
    let mut re = prefix.to_vec();
    re.extend([format!("{kind}_re"), num(z.re)]);
    csv.row(&re);
    let mut im = prefix.to_vec();
    im.extend([format!("{kind}_im"), num(z.im)]);
    csv.row(&im);
}

fn location(region: &str, p: [f64; 2], dim: usize) -> Vec<String> {
    let mut v = vec![region.to_string(), num(p[0])];
    if dim == 2 {
        v.push(num(p[1]));
    }
    v
}

fn region_rows(csv: &mut Csv, region: &str, fields: &RegionFields, dim: usize) {
    for k in 0..fields.points.len() {
        let loc = location(region, fields.points[k], dim);
        push_complex(csv, &loc, "w", fields.w[k]);
        push_complex(csv, &loc, "phi", fields.phi[k]);
        let mut row = loc.clone();
        row.extend(["residual_abs".to_string(), num(fields.residual[k].norm())]);
        csv.row(&row);
    }
}

fn resolvent_case(config: &RunConfig, options: &RunOptions) -> Result<Outcome, CliError> {
    let cc = &config.resolvent_case;
    let model = build_model(config)?;
    let n = model.n_modes();
    let dim = config.geometry.dim();
    let grid = CaseGrid::new(&model, config.discretization.grid)?;
    let base_seed = seed(cc.seed, options);
    let mut artifacts = Artifacts::default();
    let mut reports = Vec::new();
    let mut worst_identity: f64 = 0.0;
    for (i, &mu) in cc.mu.iter().enumerate() {
        let (f, g) = match cc.data {
            CaseData::Random => random_case_data(model.basis(), base_seed.wrapping_add(i as u64)),
            CaseData::Smooth => smooth_case_data(n),
        };
        let case = solve_resolvent(&model, &f, &g, mu)?.with_grid(grid.clone());
        let identity = imaginary_part_identity(&case, &model)?;
        let w = w_substitution(&case, &model)?;
        let interface = interface_residuals(&case, &model)?;
        worst_identity = worst_identity.max(identity.residual);

        let header: Vec<&str> = if dim == 2 {
            vec!["region", "x", "y", "kind", "value"]
        } else {
            vec!["region", "x", "kind", "value"]
        };
        let mut csv = Csv::new(&header);
        region_rows(&mut csv, "inner", &w.inner, dim);
        region_rows(&mut csv, "outer", &w.outer, dim);
        for (k, p) in interface.points.iter().enumerate() {
            let loc = location("interface", *p, dim);
            push_complex(&mut csv, &loc, "flux", interface.flux[k]);
            push_complex(&mut csv, &loc, "phi1", interface.phi1[k]);
            push_complex(&mut csv, &loc, "phi2", interface.phi2[k]);
        }
        artifacts.add(format!("case_{}.csv", num(mu)), csv.finish());
        if options.plot_data {
            let rows = w
                .inner
                .points
                .iter()
                .zip(&w.inner.residual)
                .map(|(p, r)| vec![p[0], p[1], r.norm()]);
            let rows = rows.chain(
                w.outer
                    .points
                    .iter()
                    .zip(&w.outer.residual)
                    .map(|(p, r)| vec![p[0], p[1], r.norm()]),
            );
            artifacts.add(format!("case_{}.dat", num(mu)), dat(&["x", "y", "residual_abs"], rows));
        }
        reports.push(json!({
            "mu": mu,
            "solve_residual": case.solve_residual,
            "round_trip_residual": case.round_trip_residual(&model),
            "first_line_residual": case.first_line_residual(model.basis()),
            "imaginary_part": identity,
            "w_max_residual_inner": w.inner.max_residual(),
            "w_max_residual_outer": w.outer.max_residual(),
            "w_projected_residual": w.projected_residual,
            "jump_value": interface.jump_value,
            "jump_normal": interface.jump_normal,
            "jump_laplacian": interface.jump_laplacian,
            "flux_rms": interface.flux_rms,
        }));
    }
    artifacts.add(
        "cases.json",
        pretty(&json!({
            "model": model_json(config),
            "data": match cc.data { CaseData::Random => "random", CaseData::Smooth => "smooth" },
            "seed": base_seed,
            "grid": config.discretization.grid,
            "cases": reports,
        })),
    );
    let summary = format!(
        "resolvent-case: {} cases={} max_identity_residual={}",
        tag(config),
        cc.mu.len(),
        num(worst_identity)
    );
    Ok(Outcome {
        summary,
        artifacts,
        passed: true,
    })
}

fn weight_pair(config: &RunConfig, beta: f64) -> Result<WeightPair, CliError> {
    let geometry = &config.carleman.geometry;
    Ok(match &config.carleman.family {
        WeightFamily::Linear => linear_family(geometry, beta)?,
        WeightFamily::Custom {
            psi_inner,
            psi_outer,
            beta_scale_inner,
            beta_scale_outer,
        } => WeightPair::new(
            weight_from_profile(*psi_inner, beta * beta_scale_inner, geometry.dim)?,
            weight_from_profile(*psi_outer, beta * beta_scale_outer, geometry.dim)?,
        )?,
    })
}

fn min_margin(c: &Certificate) -> Option<f64> {
    match (c.subellipticity_inner.margin, c.subellipticity_outer.margin) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    }
}

fn carleman(config: &RunConfig, options: &RunOptions) -> Result<Outcome, CliError> {
    let cc = &config.carleman;
    let mut text = String::new();
    let mut certs = Vec::new();
    for &beta in &cc.betas {
        let pair = weight_pair(config, beta)?;
        let cert = certify(&pair, &cc.geometry, cc.samples_per_axis, &cc.taus, cc.threshold)?;
        text.push_str(&cert.render());
        text.push('\n');
        certs.push(cert);
    }
    let margins: Vec<Option<f64>> = certs.iter().map(min_margin).collect();
    let monotone = margins.windows(2).all(|w| match (w[0], w[1]) {
        (Some(a), Some(b)) => b > a,
        _ => true,
    });
    let passed = certs.iter().filter(|c| c.passed).count();
    text.push_str(&format!(
        "margin strictly increasing in beta over {:?}: {}\n",
        cc.betas,
        if monotone { "yes" } else { "no" }
    ));
    let mut artifacts = Artifacts::default();
    artifacts.add("carleman.txt", text);
    artifacts.add(
        "carleman.json",
        pretty(&json!({
            "geometry": cc.geometry,
            "betas": cc.betas,
            "taus": cc.taus,
            "threshold": cc.threshold,
            "margin_monotone": monotone,
            "certificates": certs,
        })),
    );
    if options.plot_data {
        let rows = certs.iter().map(|c| {
            let ineq = c
                .conditions
                .get(platelab_core::carleman::INTERFACE_INEQUALITY)
                .map_or(f64::NAN, |m| m.value);
            vec![c.beta_outer, min_margin(c).unwrap_or(f64::NAN), ineq]
        });
        artifacts.add(
            "carleman.dat",
            dat(&["beta", "subellipticity_margin", "interface_margin"], rows),
        );
    }
    let analog = if cc.geometry.dim == 1 { " [1D analog]" } else { "" };
    let summary = format!(
        "carleman: certificates={} passed={} margin_monotone={}{analog}",
        certs.len(),
        passed,
        monotone
    );
    Ok(Outcome {
        summary,
        artifacts,
        passed: true,
    })
}

fn run_verify(options: &RunOptions) -> Result<Outcome, CliError> {
    let report = verify::run_suite(options.seed.unwrap_or(verify::DEFAULT_SEED))?;
    let mut artifacts = Artifacts::default();
    artifacts.add("verify.txt", report.render());
    let summary = format!("verify: {}/{} properties passed", report.passed(), report.checks.len());
    Ok(Outcome {
        summary,
        artifacts,
        passed: report.all_passed(),
    })
}
