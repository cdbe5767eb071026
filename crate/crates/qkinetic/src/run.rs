//! Subcommand bodies. Each writes its tables into the output directory and
//! returns diagnostics for the manifest.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use qkinetic_core::basis::{
    m_delta_axis_weight, m_delta_oracle_1d, overlap, phase_space_ratio, wavelet_1d, WaveletIndex,
};
use qkinetic_core::condensate::{
    convexity_gain_check, net_gain_nonequilibrium, BathKernels, CondensateModel, CondensateState,
    Equilibrium, OccupationProfile, RhoStatus, GROWTH_CEILING,
};
use qkinetic_core::consts::BOLTZMANN;
use qkinetic_core::kmc::{
    mean_occupation_rhs_all, simulate, stationary_exact, uniform_sample_times, ChannelTable,
    KmcProblem, KmcRun, ModeLattice, OccupationConfig, ShellTarget,
};
use qkinetic_core::meanfield::{
    be_field, be_occupations, fit_be, integrate_uu, uu_rhs, BathSpec, OccupationField, ReducedBath,
    UuOptions,
};
use qkinetic_core::quadrature::{uniform_breaks, GaussLegendre};
use qkinetic_core::regime::{regime_report_with, RegimeReport, Status};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{
    BasisPlan, CondensatePlan, KmcInitial, KmcPlan, LatticeSpec, RegimePlan, UuInitial, UuPlan,
};
use crate::error::{CliError, InModule};
use crate::output::{OutputDir, Row};

/// What a subcommand produced. `failure` is set when a self-check missed
/// its tolerance; outputs are still written.
#[derive(Debug)]
pub struct Outcome {
    pub diagnostics: Value,
    pub failure: Option<String>,
}

impl Outcome {
    fn ok(diagnostics: Value) -> Self {
        Self {
            diagnostics,
            failure: None,
        }
    }
}

fn lattice(
    spec: &LatticeSpec,
    module: &'static str,
) -> Result<(ModeLattice, ChannelTable), CliError> {
    let l = ModeLattice::cube(spec.box_length, spec.mass, spec.z_max).in_module(module)?;
    let t = ChannelTable::new(&l).in_module(module)?;
    Ok((l, t))
}

fn write_modes(out: &mut OutputDir, l: &ModeLattice) -> Result<(), CliError> {
    let rows: Vec<Vec<String>> = (0..l.len())
        .map(|i| {
            let z = l.mode(i);
            vec![
                i.to_string(),
                z[0].to_string(),
                z[1].to_string(),
                z[2].to_string(),
                l.energy(i).to_string(),
            ]
        })
        .collect();
    out.write_table("modes.csv", &["mode", "zx", "zy", "zz", "energy"], &rows)
}

pub fn kmc(
    plan: &KmcPlan,
    seed: u64,
    pool: &rayon::ThreadPool,
    out: &mut OutputDir,
) -> Result<Outcome, CliError> {
    let (l, t) = lattice(&plan.lattice, "kmc")?;
    let init = match &plan.initial {
        KmcInitial::PerMode(n) => OccupationConfig::uniform(&l, *n),
        KmcInitial::Occupations(list) => {
            OccupationConfig::new(&l, list.clone()).in_module("kmc")?
        }
    };
    // Solved first: a shell over the capacity guard should fail before the
    // trajectories run.
    let stationary = if plan.stationary {
        let shell = stationary_exact(&l, &t, ShellTarget::of(&init)).in_module("kmc")?;
        let dist = shell
            .distribution_from(&init)
            .expect("initial state lies on its shell");
        let rhs = mean_occupation_rhs_all(&dist, &t, plan.gamma);
        let rows: Vec<Row> = (0..l.len())
            .map(|m| {
                let mean = dist.iter().map(|(c, p)| p * f64::from(c.get(m))).sum();
                Row::scalar("mean_occupation", mean).indexed(m as i64)
            })
            .collect();
        Some((
            rows,
            json!({
                "shell_states": shell.len(),
                "components": shell.component_count(),
                "uniformity_deviation": shell.uniformity_deviation(),
                "detailed_balance_residual": shell.detailed_balance_residual(),
                "max_rhs": rhs.iter().map(|x| x.abs()).fold(0.0, f64::max),
            }),
        ))
    } else {
        None
    };
    let times = uniform_sample_times(plan.t_end, plan.samples);
    let problem = KmcProblem {
        lattice: &l,
        table: &t,
        gamma: plan.gamma,
        t_end: plan.t_end,
    };
    let runs: Vec<KmcRun> = pool
        .install(|| {
            (0..plan.trajectories)
                .into_par_iter()
                .map(|stream| simulate(problem, &init, seed, stream, &times))
                .collect::<Result<_, _>>()
        })
        .in_module("kmc")?;

    write_modes(out, &l)?;
    let mut rows = Vec::new();
    for run in &runs {
        for s in &run.samples {
            let at = |name, v: f64| Row::at(run.stream, s.time, name, v);
            rows.push(at("particles", s.particles as f64));
            rows.push(at("energy", s.energy as f64));
            for (axis, &p) in s.momentum.iter().enumerate() {
                rows.push(at("momentum", p as f64).indexed(axis as i64));
            }
            if let Some(n0) = s.condensate {
                rows.push(at("condensate", f64::from(n0)));
            }
            for (m, &n) in s.occupations.iter().enumerate() {
                rows.push(at("occupation", f64::from(n)).indexed(m as i64));
            }
        }
    }
    out.write_long("kmc.csv", &rows)?;

    let mut mean_rows = Vec::new();
    for (k, &time) in times.iter().enumerate() {
        for m in 0..l.len() {
            let sum: f64 = runs
                .iter()
                .map(|r| f64::from(r.samples[k].occupations[m]))
                .sum();
            mean_rows.push(Row {
                series: None,
                time: Some(time),
                observable: "mean_occupation",
                index: Some(m as i64),
                value: sum / runs.len() as f64,
            });
        }
    }
    out.write_long("kmc_mean.csv", &mean_rows)?;

    let mut diag = json!({
        "modes": l.len(),
        "channels": t.len(),
        "trajectories": runs.len(),
        "particles": init.particles(),
        "energy": init.energy(),
        "momentum": init.momentum(),
        "events": runs.iter().map(|r| r.events).collect::<Vec<_>>(),
        "absorbed": runs.iter().filter(|r| r.absorbed_at.is_some()).count(),
    });
    if let Some((rows, summary)) = stationary {
        out.write_long("stationary.csv", &rows)?;
        diag["stationary"] = summary;
    }
    Ok(Outcome::ok(diag))
}

pub fn uu(plan: &UuPlan, out: &mut OutputDir) -> Result<Outcome, CliError> {
    let (l, t) = lattice(&plan.lattice, "uu")?;
    let f0 = match &plan.initial {
        UuInitial::BoseEinstein { beta, mu } => be_field(
            &l,
            ReducedBath {
                beta: *beta,
                mu: *mu,
            }
            .to_bath(&l),
        )
        .in_module("uu")?,
        UuInitial::PerMode(v) => OccupationField::new(vec![*v; l.len()]).in_module("uu")?,
        UuInitial::Occupations(list) => OccupationField::new(list.clone()).in_module("uu")?,
    };
    if f0.len() != l.len() {
        return Err(CliError::Core {
            module: "uu",
            source: qkinetic_core::Error::LengthMismatch {
                expected: l.len(),
                found: f0.len(),
            },
        });
    }
    let times = uniform_sample_times(plan.t_end, plan.samples);
    let options = UuOptions {
        tolerance: plan.tolerance,
        ..UuOptions::default()
    };
    let run = integrate_uu(&f0, &l, &t, plan.gamma, plan.t_end, &times, options).in_module("uu")?;

    write_modes(out, &l)?;
    let mut rows = Vec::new();
    for s in &run.samples {
        rows.push(Row::at(0, s.time, "particles", s.particles));
        rows.push(Row::at(0, s.time, "energy", s.energy));
        for (m, &n) in s.field.iter().enumerate() {
            rows.push(Row::at(0, s.time, "occupation", n).indexed(m as i64));
        }
    }
    out.write_long("uu.csv", &rows)?;

    let last = run.last();
    let change = last
        .field
        .iter()
        .zip(f0.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let final_field = OccupationField::new(last.field.clone()).in_module("uu")?;
    let rhs = uu_rhs(&final_field, &t, plan.gamma);
    let fit = match fit_be(l.energies(), f0.particles(), f0.energy(&l)) {
        Ok(b) => {
            let target = be_occupations(l.energies(), b.beta, b.mu);
            let dev = last
                .field
                .iter()
                .zip(&target)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            json!({ "beta": b.beta, "mu": b.mu, "max_deviation": dev })
        }
        Err(e) => json!({ "error": e.to_string() }),
    };
    Ok(Outcome::ok(json!({
        "modes": l.len(),
        "channels": t.len(),
        "accepted_steps": run.accepted_steps,
        "rejected_steps": run.rejected_steps,
        "particle_drift": run.particle_drift,
        "energy_drift": run.energy_drift,
        "max_change_from_initial": change,
        "final_max_rhs": rhs.iter().map(|x| x.abs()).fold(0.0, f64::max),
        "bose_einstein_fit": fit,
    })))
}

pub fn condensate(plan: &CondensatePlan, out: &mut OutputDir) -> Result<Outcome, CliError> {
    let l = ModeLattice::cube(
        plan.lattice.box_length,
        plan.lattice.mass,
        plan.lattice.z_max,
    )
    .in_module("condensate")?;
    let kt = BOLTZMANN * plan.temperature;
    let bath = BathSpec::new(plan.temperature, plan.alpha * kt).in_module("condensate")?;
    let eta = plan.eta.map(|e| e * l.energy_quantum());
    let model =
        CondensateModel::new(&l, bath, plan.scattering_length, eta).in_module("condensate")?;
    let t_end = match plan.t_end {
        Some(t) => t,
        // e^{-30} leaves the relaxation well below the convergence test
        None if model.rho_slope() < 0.0 => 30.0 / -model.rho_slope(),
        // linear growth at 2C: run to twice the ceiling
        None => 2.0 * GROWTH_CEILING * model.g0 / (2.0 * model.gain_moment),
    };
    let times = uniform_sample_times(t_end, plan.samples);
    let rho = model
        .integrate_rho(plan.rho0, &times)
        .in_module("condensate")?;
    let state = CondensateState {
        phi: Complex64::new(plan.phi0.0, plan.phi0.1),
        rho_bar: plan.rho0,
    };
    let phi = model
        .integrate_phi(state, &times, plan.dissipation)
        .in_module("condensate")?;

    let mut rows = Vec::new();
    for &(time, r) in &rho.samples {
        rows.push(Row::at(0, time, "rho_bar", r));
    }
    for &(time, p) in &phi.samples {
        rows.push(Row::at(0, time, "phi_re", p.re));
        rows.push(Row::at(0, time, "phi_im", p.im));
        rows.push(Row::at(0, time, "phi_abs", p.norm()));
    }
    out.write_long("condensate.csv", &rows)?;

    let kernels = BathKernels::new(&l, bath, model.coupling, eta).in_module("condensate")?;
    let origin = kernels.at([0.0; 3]);
    let profile = Equilibrium { alpha: plan.alpha };
    let grid: Vec<f64> = (1..=40).map(|i| 0.25 * f64::from(i)).collect();
    let f: Vec<f64> = grid.iter().map(|&e| profile.log_ratio(e)).collect();
    let verdict = convexity_gain_check(&f, &grid)
        .in_module("condensate")?
        .verdict;
    let net = net_gain_nonequilibrium(
        &profile,
        plan.temperature,
        plan.lattice.mass,
        model.coupling,
    )
    .in_module("condensate")?;
    Ok(Outcome::ok(json!({
        "t_end": t_end,
        "g0": model.g0,
        "gain_moment": model.gain_moment,
        "gain_minus_loss": model.gain_minus_loss,
        "mean_field_frequency": model.mean_field_frequency,
        "rho_slope": model.rho_slope(),
        "rho_status": format!("{:?}", rho.status),
        "rho_stationary": rho.stationary,
        "ceiling_time": rho.ceiling_time,
        "converged": rho.status == RhoStatus::Converged,
        "kernels_at_origin": origin,
        "kms_residual": origin.kms_residual(),
        "net_gain": net,
        "convexity_verdict": format!("{verdict:?}"),
    })))
}

fn status_word(s: Status) -> &'static str {
    match s {
        Status::Satisfied => "satisfied",
        Status::Marginal => "marginal",
        Status::Violated => "violated",
    }
}

/// Human-readable report table.
pub fn regime_table(report: &RegimeReport) -> String {
    let mut s = String::new();
    let mut line = |k: &str, v: String| s.push_str(&format!("{k:<34} {v}\n"));
    line(
        "thermal wavelength lambda_T (m)",
        format!("{:.4e}", report.lambda_t),
    );
    line("mean free path (m)", format!("{:.4e}", report.lambda_mfp));
    line(
        "weak-condensation length xi (m)",
        format!("{:.4e}", report.xi),
    );
    line(
        "critical cell (a lmfp lT)^1/3 (m)",
        format!("{:.4e}", report.critical_cell_length),
    );
    line(
        "xi = l_c at density (1/m^3)",
        format!("{:.4e}", report.weak_condensation_density),
    );
    line("coupling u (J m^3)", format!("{:.4e}", report.coupling));
    s.push('\n');
    s.push_str(&format!(
        "{:<30} {:>12}  {:<8} {}\n",
        "condition", "ratio", "want", "status"
    ));
    let all = report
        .conditions
        .iter()
        .chain(std::iter::once(&report.weak_condensation_alternative));
    for c in all {
        let want = match c.want {
            qkinetic_core::regime::Want::MuchGreater => ">> 1",
            qkinetic_core::regime::Want::MuchLess => "<< 1",
            qkinetic_core::regime::Want::AtMost => "<= 1",
        };
        s.push_str(&format!(
            "{:<30} {:>12.4e}  {:<8} {}\n",
            c.name,
            c.ratio,
            want,
            status_word(c.status)
        ));
    }
    s.push_str(
        "\nweak_condensation reads the inequality as l_c <= xi; the alternative row reads it as l_c >> xi.\n",
    );
    s
}

pub fn regime(plan: &RegimePlan, out: &mut OutputDir) -> Result<Outcome, CliError> {
    let report = regime_report_with(plan.params, plan.threshold).in_module("regime")?;
    let mut rows = vec![
        Row::scalar("lambda_t", report.lambda_t),
        Row::scalar("lambda_mfp", report.lambda_mfp),
        Row::scalar("xi", report.xi),
        Row::scalar("k_diag", report.k_diag),
        Row::scalar("critical_cell_length", report.critical_cell_length),
        Row::scalar(
            "weak_condensation_density",
            report.weak_condensation_density,
        ),
        Row::scalar("coupling", report.coupling),
    ];
    for c in report
        .conditions
        .iter()
        .chain(std::iter::once(&report.weak_condensation_alternative))
    {
        rows.push(Row::scalar(c.name, c.ratio));
    }
    out.write_long("regime.csv", &rows)?;
    out.write_json("regime.json", &report)?;
    let table = regime_table(&report);
    let mut stdout = std::io::stdout().lock();
    // a closed pipe is not worth failing the run over
    let _ = stdout.write_all(table.as_bytes());
    Ok(Outcome::ok(json!({
        "all_pass": report.all_pass(),
        "statuses": report
            .conditions
            .iter()
            .map(|c| (c.name, status_word(c.status)))
            .collect::<std::collections::BTreeMap<_, _>>(),
    })))
}

const POSITION_TOLERANCE: f64 = 1e-3;
const WEIGHT_TOLERANCE: f64 = 0.02;

pub fn basis_check(
    plan: &BasisPlan,
    pool: &rayon::ThreadPool,
    out: &mut OutputDir,
) -> Result<Outcome, CliError> {
    let delta = PI / plan.cell_length;
    let labels: Vec<(i64, i64)> = (-1..=1)
        .flat_map(|j| (-1..=1).map(move |n| (j, n)))
        .collect();
    let half_range = 1000.0 / delta;
    let breaks = uniform_breaks(
        -half_range,
        half_range,
        (4.0 * half_range * delta / PI).ceil() as usize,
    );
    let nodes = GaussLegendre::new(16).mapped(&breaks);
    let pairs: Vec<((i64, i64), (i64, i64))> = labels
        .iter()
        .flat_map(|&a| labels.iter().map(move |&b| (a, b)))
        .collect();
    let results: Vec<(bool, f64)> = pool
        .install(|| {
            pairs
                .par_iter()
                .map(|&((ja, na), (jb, nb))| {
                    let ia = WaveletIndex::from_indices(delta, [ja, 0, 0], [na, 0, 0])?;
                    let ib = WaveletIndex::from_indices(delta, [jb, 0, 0], [nb, 0, 0])?;
                    let exact = overlap(&ia, &ib)?;
                    let expected = if (ja, na) == (jb, nb) { 1.0 } else { 0.0 };
                    let (ka, ra) = (ia.k()[0], ia.r()[0]);
                    let (kb, rb) = (ib.k()[0], ib.r()[0]);
                    let mut acc = Complex64::new(0.0, 0.0);
                    for &(x, w) in &nodes {
                        acc += wavelet_1d(ka, ra, x, delta)?.conj()
                            * wavelet_1d(kb, rb, x, delta)?
                            * w;
                    }
                    Ok((exact == Complex64::new(expected, 0.0), (acc - exact).norm()))
                })
                .collect::<Result<_, qkinetic_core::Error>>()
        })
        .in_module("basis")?;
    let exact_ok = results.iter().all(|r| r.0);
    let position_error = results.iter().map(|r| r.1).fold(0.0, f64::max);

    let scale = (delta / PI).powi(3);
    let mut rows = vec![
        Row::scalar("overlap_exact", if exact_ok { 1.0 } else { 0.0 }),
        Row::scalar("position_quadrature_error", position_error),
        Row::scalar(
            "phase_space_ratio",
            phase_space_ratio(delta).in_module("basis")?,
        ),
    ];
    let mut weight_error = 0.0f64;
    for q in -2..=2 {
        let est = m_delta_oracle_1d(q, delta).in_module("basis")?;
        let w = est.value / scale;
        weight_error = weight_error.max((w - m_delta_axis_weight(q)).abs() / (2.0 / 3.0));
        rows.push(Row::scalar("m_delta_weight", w).indexed(q));
    }
    out.write_long("basis.csv", &rows)?;

    let mut problems = Vec::new();
    if !exact_ok {
        problems.push("analytic overlaps are not exactly orthonormal".to_string());
    }
    if position_error > POSITION_TOLERANCE {
        problems.push(format!(
            "position quadrature error {position_error:e} > {POSITION_TOLERANCE}"
        ));
    }
    if weight_error > WEIGHT_TOLERANCE {
        problems.push(format!(
            "smearing weight error {weight_error:e} > {WEIGHT_TOLERANCE}"
        ));
    }
    Ok(Outcome {
        diagnostics: json!({
            "delta": delta,
            "pairs": pairs.len(),
            "overlap_exact": exact_ok,
            "position_quadrature_error": position_error,
            "m_delta_relative_error": weight_error,
        }),
        failure: (!problems.is_empty()).then(|| problems.join("; ")),
    })
}
