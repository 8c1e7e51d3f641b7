//! Scenario catalogue and runners.

use std::path::Path;

use super::config::Config;
use super::output::Table;
use super::CliError;
use crate::constants::PhysicalConstants;
use crate::ensemble::{
    echo_envelope, ensemble_scan, ramsey_envelope, AveragingMethod, EnsembleSpec, Initial, SequenceTiming,
};
use crate::fit::{self, EchoGuess, EchoKnown, FitResult, RabiGuess, RamseyGuess, RamseyKnown, TimeSeries};
use crate::propagator::{lightshift_profile, mixture_trace, FieldConfig, HamiltonianKind, HamiltonianSpec};
use crate::spin::{Populations, SpinSystem};
use crate::stirap::{chain_ground_state, eta_scan, simulate_stirap_trace, StirapParams};
use crate::units::{AngularFrequency, FieldGradient, MagneticField};

pub struct ScenarioDef {
    pub name: &'static str,
    pub summary: &'static str,
    pub required: &'static [&'static str],
    pub optional: &'static [&'static str],
}

const STIRAP_KEYS: &[&str] = &[
    "delta_t",
    "detuning",
    "eta",
    "gamma_e",
    "omega0_peak",
    "tau_pulse",
    "two_photon_detuning",
    "zeeman_comp",
    "zeeman_splitting",
];

const ENSEMBLE_OPTIONAL: &[&str] = &["b0", "g_j", "mass", "method", "p_init", "samples", "seed"];

pub const SCENARIOS: &[ScenarioDef] = &[
    ScenarioDef {
        name: "echo",
        summary: "spin-echo populations vs tau1 at fixed tau2",
        required: &["b1", "n_points", "sigma_z0", "t_axial", "tau1_max", "tau2"],
        optional: ENSEMBLE_OPTIONAL,
    },
    ScenarioDef {
        name: "echo-scan",
        summary: "spin-echo populations and envelope vs tau1 = tau2",
        required: &["b1", "n_points", "sigma_z0", "t_axial", "tau_sum_max"],
        optional: ENSEMBLE_OPTIONAL,
    },
    ScenarioDef {
        name: "fit-echo",
        summary: "fit B1^2*T_z and initial populations to a symmetric echo trace",
        required: &["b1_guess", "data", "sigma_z0", "t_axial_guess"],
        optional: &["b0", "b1", "g_j", "mass", "p_p2_guess", "t_axial"],
    },
    ScenarioDef {
        name: "fit-rabi",
        summary: "fit Rabi frequency and initial populations to a Rabi trace",
        required: &["data", "omega_guess"],
        optional: &["p_p1_guess", "p_p2_guess"],
    },
    ScenarioDef {
        name: "fit-ramsey",
        summary: "fit B1 and initial populations to a Ramsey trace",
        required: &["b1_guess", "data", "sigma_z0", "t_axial"],
        optional: &["b0", "g_j", "mass", "p_p2_guess"],
    },
    ScenarioDef {
        name: "fstirap-scan",
        summary: "fractional STIRAP final populations vs Stokes/pump ratio eta",
        required: &["eta_max", "n_points"],
        optional: &[
            "delta_t",
            "detuning",
            "gamma_e",
            "omega0_peak",
            "tau_pulse",
            "two_photon_detuning",
            "zeeman_comp",
            "zeeman_splitting",
        ],
    },
    ScenarioDef {
        name: "rabi",
        summary: "RF Rabi oscillation in the rotating frame (RWA)",
        required: &["n_points", "omega0", "omega_rabi"],
        optional: &["omega_rf", "p_init", "t_max", "theta_max", "tolerance"],
    },
    ScenarioDef {
        name: "rabi-lab",
        summary: "RF Rabi oscillation in the laboratory frame without RWA",
        required: &["n_points", "omega0", "omega_rabi", "t_max"],
        optional: &["omega_rf", "p_init", "tolerance"],
    },
    ScenarioDef {
        name: "ramsey",
        summary: "Ramsey populations and dephasing envelope vs tau1",
        required: &["b1", "n_points", "sigma_z0", "t_axial", "tau1_max"],
        optional: ENSEMBLE_OPTIONAL,
    },
    ScenarioDef {
        name: "stirap",
        summary: "STIRAP time trace in the |+2>..|0> chain",
        required: &["n_points"],
        optional: STIRAP_KEYS,
    },
    ScenarioDef {
        name: "two-level",
        summary: "Rabi oscillation with light-shifted lower sublevels",
        required: &["lightshift_m0", "n_points", "omega0", "omega_rabi", "t_max"],
        optional: &["omega_rf", "p_init", "tolerance"],
    },
];

pub fn find(name: &str) -> Option<&'static ScenarioDef> {
    SCENARIOS.iter().find(|s| s.name == name)
}

/// Alphabetized listing of scenarios with their keys.
pub fn listing() -> String {
    let mut defs: Vec<&ScenarioDef> = SCENARIOS.iter().collect();
    defs.sort_by_key(|d| d.name);
    let mut out = String::new();
    for d in defs {
        out.push_str(&format!("{:<14}{}\n", d.name, d.summary));
        out.push_str(&format!("{:<14}required: {}\n", "", d.required.join(", ")));
        if !d.optional.is_empty() {
            out.push_str(&format!("{:<14}optional: {}\n", "", d.optional.join(", ")));
        }
    }
    out
}

/// Command-line overrides.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub samples: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub table: Table,
    /// `key = value` lines (fit parameters).
    pub report: Vec<String>,
    pub warnings: Vec<String>,
}

impl RunOutput {
    fn table(table: Table) -> Self {
        RunOutput {
            table,
            report: Vec::new(),
            warnings: Vec::new(),
        }
    }
}

/// Validates the keys of `cfg` against its scenario and runs it. Relative
/// data paths resolve against `base_dir`.
pub fn run(cfg: &Config, overrides: Overrides, base_dir: &Path) -> Result<RunOutput, CliError> {
    let name = cfg.string("scenario")?;
    let def = find(name).ok_or_else(|| cfg.error("scenario", format!("unknown scenario `{name}`")))?;
    for key in cfg.keys() {
        if key != "scenario" && !def.required.contains(&key) && !def.optional.contains(&key) {
            return Err(cfg.error(key, format!("unknown key for scenario `{name}`")));
        }
    }
    for key in def.required {
        if !cfg.contains(key) {
            return Err(CliError::Config(format!("missing required key `{key}` for scenario `{name}`")));
        }
    }
    match def.name {
        "rabi" => run_rabi(cfg, HamiltonianKind::RotRwa),
        "rabi-lab" => run_rabi(cfg, HamiltonianKind::LabFull),
        "two-level" => run_two_level(cfg),
        "stirap" => run_stirap(cfg),
        "fstirap-scan" => run_fstirap_scan(cfg),
        "ramsey" | "echo" | "echo-scan" => run_ensemble(cfg, def.name, overrides),
        "fit-rabi" => run_fit_rabi(cfg, base_dir),
        "fit-ramsey" => run_fit_ramsey(cfg, base_dir),
        "fit-echo" => run_fit_echo(cfg, base_dir),
        _ => unreachable!("catalogue and dispatch agree"),
    }
}

fn n_points(cfg: &Config) -> Result<usize, CliError> {
    let n = cfg.integer("n_points")?;
    if n < 2 {
        return Err(cfg.error("n_points", "must be at least 2"));
    }
    usize::try_from(n).map_err(|_| cfg.error("n_points", "too large"))
}

fn grid(max: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| max * k as f64 / (n - 1) as f64).collect()
}

fn positive(cfg: &Config, key: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(cfg.error(key, "must be positive"))
    }
}

fn initial_populations(cfg: &Config) -> Result<Populations, CliError> {
    if !cfg.contains("p_init") {
        return Ok(Populations::from_raw(vec![1.0, 0.0, 0.0, 0.0, 0.0]));
    }
    let v = cfg.list("p_init")?;
    if v.len() != 5 {
        return Err(cfg.error("p_init", "needs five entries (m = +2 … −2)"));
    }
    Populations::new(v).map_err(|e| cfg.error("p_init", e))
}

fn tolerance(cfg: &Config) -> Result<f64, CliError> {
    let tol = cfg.number_or("tolerance", 1e-8)?;
    positive(cfg, "tolerance", tol)
}

fn rf_field(cfg: &Config) -> Result<FieldConfig, CliError> {
    let omega0 = cfg.frequency("omega0")?;
    let omega_rabi = cfg.frequency("omega_rabi")?;
    let mut field = FieldConfig::resonant(omega0, omega_rabi);
    if cfg.contains("omega_rf") {
        field = field.with_rf_frequency(cfg.frequency("omega_rf")?);
    }
    Ok(field)
}

fn population_rows(table: &mut Table, xs: &[f64], pops: &[Populations]) {
    for (x, p) in xs.iter().zip(pops) {
        let mut row = vec![*x];
        row.extend_from_slice(p.as_slice());
        table.push(row);
    }
}

fn run_rabi(cfg: &Config, kind: HamiltonianKind) -> Result<RunOutput, CliError> {
    let field = rf_field(cfg)?;
    let n = n_points(cfg)?;
    let initial = initial_populations(cfg)?;
    let tol = tolerance(cfg)?;
    let (label, xs, times) = match (cfg.contains("t_max"), cfg.contains("theta_max")) {
        (true, false) => {
            let t_max = positive(cfg, "t_max", cfg.time("t_max")?)?;
            let times = grid(t_max, n);
            ("t_us", times.iter().map(|t| t * 1e6).collect(), times)
        }
        (false, true) => {
            let theta_max = positive(cfg, "theta_max", cfg.number("theta_max")?)?;
            let om = positive(cfg, "omega_rabi", field.omega_rabi.rad_per_s())?;
            let thetas = grid(theta_max, n);
            // resonant rotation angle θ = Ωt/2
            let times = thetas.iter().map(|th| 2.0 * th / om).collect();
            ("theta", thetas, times)
        }
        _ => return Err(CliError::Config("exactly one of `t_max` or `theta_max` is required".into())),
    };
    let spec = HamiltonianSpec::new(kind, field)?;
    let pops = mixture_trace(&SpinSystem::spin2(), &spec, &initial, &times, tol)?;
    let mut table = Table::with_populations(label, &[]);
    population_rows(&mut table, &xs, &pops);
    Ok(RunOutput::table(table))
}

fn run_two_level(cfg: &Config) -> Result<RunOutput, CliError> {
    let field = rf_field(cfg)?;
    let shift = cfg.frequency("lightshift_m0")?;
    let t_max = positive(cfg, "t_max", cfg.time("t_max")?)?;
    let n = n_points(cfg)?;
    let initial = initial_populations(cfg)?;
    let tol = tolerance(cfg)?;
    let spec = HamiltonianSpec::with_light_shifts(field, lightshift_profile(shift))?;
    let times = grid(t_max, n);
    let pops = mixture_trace(&SpinSystem::spin2(), &spec, &initial, &times, tol)?;
    let mut table = Table::with_populations("t_us", &[]);
    let xs: Vec<f64> = times.iter().map(|t| t * 1e6).collect();
    population_rows(&mut table, &xs, &pops);
    Ok(RunOutput::table(table))
}

fn stirap_params(cfg: &Config) -> Result<StirapParams, CliError> {
    let mut p = StirapParams::default();
    let freq = |key: &str, slot: &mut AngularFrequency| -> Result<(), CliError> {
        if cfg.contains(key) {
            *slot = cfg.frequency(key)?;
        }
        Ok(())
    };
    freq("omega0_peak", &mut p.omega0_peak)?;
    freq("detuning", &mut p.detuning)?;
    freq("two_photon_detuning", &mut p.two_photon_detuning)?;
    freq("gamma_e", &mut p.gamma_e)?;
    freq("zeeman_splitting", &mut p.zeeman_splitting)?;
    if cfg.contains("tau_pulse") {
        p.tau_pulse = cfg.time("tau_pulse")?;
    }
    if cfg.contains("delta_t") {
        p.delta_t = cfg.time("delta_t")?;
    }
    if cfg.contains("eta") {
        p.eta = cfg.number("eta")?;
    }
    if cfg.contains("zeeman_comp") {
        p.zeeman_comp = cfg.boolean("zeeman_comp")?;
    }
    p.validate()?;
    Ok(p)
}

fn adiabatic_warning(p: &StirapParams) -> Vec<String> {
    if p.is_adiabatic() {
        Vec::new()
    } else {
        vec![format!(
            "omega0_peak * tau_pulse = {:.3} is below {}: transfer is not adiabatic",
            p.omega0_peak.rad_per_s() * p.tau_pulse,
            crate::stirap::ADIABATICITY_THRESHOLD
        )]
    }
}

fn run_stirap(cfg: &Config) -> Result<RunOutput, CliError> {
    let p = stirap_params(cfg)?;
    let n = n_points(cfg)?;
    let samples = simulate_stirap_trace(&p, &chain_ground_state(2)?, n)?;
    let mut table = Table::with_populations("t_us", &["survival"]);
    for s in samples {
        let g = s.ground.as_slice();
        table.push(vec![s.t * 1e6, g[0], g[1], g[2], 0.0, 0.0, s.survival]);
    }
    Ok(RunOutput {
        warnings: adiabatic_warning(&p),
        ..RunOutput::table(table)
    })
}

fn run_fstirap_scan(cfg: &Config) -> Result<RunOutput, CliError> {
    let p = stirap_params(cfg)?;
    let eta_max = cfg.number("eta_max")?;
    if eta_max < 0.0 {
        return Err(cfg.error("eta_max", "must be non-negative"));
    }
    let etas = grid(eta_max, n_points(cfg)?);
    let outcomes = eta_scan(&p, &etas)?;
    let mut table = Table::with_populations("eta", &["survival"]);
    for (eta, o) in etas.iter().zip(outcomes) {
        let g = o.ground_populations();
        table.push(vec![*eta, g[0], g[1], g[2], 0.0, 0.0, o.survival]);
    }
    Ok(RunOutput {
        warnings: adiabatic_warning(&p),
        ..RunOutput::table(table)
    })
}

fn constants(cfg: &Config) -> Result<PhysicalConstants, CliError> {
    if cfg.contains("g_j") {
        PhysicalConstants::with_g_j(cfg.number("g_j")?).map_err(|e| cfg.error("g_j", e))
    } else {
        Ok(PhysicalConstants::default())
    }
}

fn mass(cfg: &Config, consts: &PhysicalConstants) -> Result<f64, CliError> {
    if cfg.contains("mass") {
        positive(cfg, "mass", cfg.mass("mass")?)
    } else {
        Ok(consts.mass_ne20)
    }
}

fn bias(cfg: &Config) -> Result<MagneticField, CliError> {
    if cfg.contains("b0") {
        cfg.field("b0")
    } else {
        Ok(MagneticField::from_tesla(0.0))
    }
}

fn run_ensemble(cfg: &Config, which: &str, overrides: Overrides) -> Result<RunOutput, CliError> {
    let consts = constants(cfg)?;
    let field = FieldConfig::default()
        .with_bias(bias(cfg)?, &consts)
        .with_gradient(cfg.gradient("b1")?);
    let method = match cfg.raw("method").unwrap_or("analytic") {
        "analytic" => AveragingMethod::Analytic,
        "monte-carlo" => AveragingMethod::MonteCarlo,
        other => return Err(cfg.error("method", format!("`{other}` is not `analytic` or `monte-carlo`"))),
    };
    let samples = match overrides.samples {
        Some(s) => s,
        None if cfg.contains("samples") => {
            usize::try_from(cfg.integer("samples")?).map_err(|_| cfg.error("samples", "too large"))?
        }
        None => 100_000,
    };
    let seed = match overrides.seed {
        Some(s) => s,
        None if cfg.contains("seed") => cfg.integer("seed")?,
        None => 0,
    };
    let spec = EnsembleSpec {
        sigma_z0: positive(cfg, "sigma_z0", cfg.length("sigma_z0")?)?,
        t_axial: positive(cfg, "t_axial", cfg.temperature("t_axial")?)?,
        mass: mass(cfg, &consts)?,
        n_samples: samples,
        seed,
    };
    if samples == 0 {
        return Err(CliError::Config("`samples` must be at least 1".into()));
    }
    let n = n_points(cfg)?;
    let (label, xs, timings): (&str, Vec<f64>, Vec<SequenceTiming>) = match which {
        "ramsey" => {
            let ts = grid(cfg.time("tau1_max")?, n);
            ("tau1_us", ts.iter().map(|t| t * 1e6).collect(), ts.iter().map(|&t| SequenceTiming::ramsey(t)).collect())
        }
        "echo" => {
            let tau2 = cfg.time("tau2")?;
            let ts = grid(cfg.time("tau1_max")?, n);
            ("tau1_us", ts.iter().map(|t| t * 1e6).collect(), ts.iter().map(|&t| SequenceTiming::echo(t, tau2)).collect())
        }
        _ => {
            let ts = grid(cfg.time("tau_sum_max")? / 2.0, n);
            (
                "tau_tilde_us",
                ts.iter().map(|t| t * 1e6).collect(),
                ts.iter().map(|&t| SequenceTiming::echo(t, t)).collect(),
            )
        }
    };
    let initial = Initial::Mixture(initial_populations(cfg)?);
    let estimates = ensemble_scan(&SpinSystem::spin2(), &field, &consts, &spec, &timings, &initial, method)?;
    let mut table = Table::with_populations(label, &["envelope"]);
    let mut warnings = Vec::new();
    for ((x, t), e) in xs.iter().zip(&timings).zip(&estimates) {
        let env = if which == "ramsey" {
            ramsey_envelope(&field, &consts, &spec, t.tau1)
        } else {
            echo_envelope(&field, &consts, &spec, t.tau1, t.tau2)
        };
        let mut row = vec![*x];
        row.extend_from_slice(e.populations.as_slice());
        row.push(env);
        table.push(row);
    }
    if estimates.iter().any(|e| e.high_variance) {
        warnings.push(format!("Monte Carlo with {samples} samples: estimates have high variance"));
    }
    Ok(RunOutput {
        table,
        report: Vec::new(),
        warnings,
    })
}

fn load_series(cfg: &Config, base_dir: &Path, first: &str) -> Result<(Vec<f64>, TimeSeries), CliError> {
    let rel = cfg.string("data")?;
    let path = base_dir.join(rel);
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let (xs, rows) = super::output::read_population_table(&text, first)?;
    let times = xs.iter().map(|x| x * 1e-6).collect();
    let ts = TimeSeries::new(times, rows).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok((xs, ts))
}

fn fit_output(first: &str, xs: &[f64], curve: Vec<Populations>, r: &FitResult) -> RunOutput {
    let mut table = Table::with_populations(first, &[]);
    population_rows(&mut table, xs, &curve);
    let mut report: Vec<String> = r.params.iter().map(|(k, v)| format!("{k} = {v}")).collect();
    report.push(format!("residual_rms = {}", r.residual_rms));
    report.push(format!("converged = {}", r.converged));
    report.push(format!("n_evals = {}", r.n_evals));
    let warnings = r.diagnostic.iter().cloned().collect();
    RunOutput { table, report, warnings }
}

fn guess_or(cfg: &Config, key: &str, default: f64) -> Result<f64, CliError> {
    let v = cfg.number_or(key, default)?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(cfg.error(key, "must lie in [0, 1]"))
    }
}

fn run_fit_rabi(cfg: &Config, base_dir: &Path) -> Result<RunOutput, CliError> {
    let (xs, data) = load_series(cfg, base_dir, "t_us")?;
    let guess = RabiGuess {
        omega: cfg.frequency("omega_guess")?,
        p_plus2: guess_or(cfg, "p_p2_guess", 0.9)?,
        p_plus1: guess_or(cfg, "p_p1_guess", 0.1)?,
    };
    let r = fit::fit_rabi(&data, &guess)?;
    if r.params.is_empty() {
        return Ok(fit_output("t_us", &[], Vec::new(), &r));
    }
    let omega = AngularFrequency::from_khz(r.params["omega_khz"]);
    let curve = data
        .times()
        .iter()
        .map(|&t| fit::rabi_model(omega, r.params["p_p2"], r.params["p_p1"], t))
        .collect::<crate::Result<Vec<_>>>()?;
    Ok(fit_output("t_us", &xs, curve, &r))
}

fn run_fit_ramsey(cfg: &Config, base_dir: &Path) -> Result<RunOutput, CliError> {
    let (xs, data) = load_series(cfg, base_dir, "tau1_us")?;
    let consts = constants(cfg)?;
    let known = RamseyKnown {
        b0: bias(cfg)?,
        sigma_z0: positive(cfg, "sigma_z0", cfg.length("sigma_z0")?)?,
        t_axial: positive(cfg, "t_axial", cfg.temperature("t_axial")?)?,
        mass: mass(cfg, &consts)?,
        consts,
    };
    let guess = RamseyGuess {
        b1: cfg.gradient("b1_guess")?,
        p_plus2: guess_or(cfg, "p_p2_guess", 0.9)?,
    };
    let r = fit::fit_ramsey(&data, &known, &guess)?;
    if r.params.is_empty() {
        return Ok(fit_output("tau1_us", &[], Vec::new(), &r));
    }
    let curve = fit::ramsey_model(
        &known,
        FieldGradient::from_mg_per_mm(r.params["b1_mg_per_mm"]),
        r.params["p_p2"],
        data.times(),
    )?;
    Ok(fit_output("tau1_us", &xs, curve, &r))
}

fn run_fit_echo(cfg: &Config, base_dir: &Path) -> Result<RunOutput, CliError> {
    let (xs, data) = load_series(cfg, base_dir, "tau_tilde_us")?;
    let consts = constants(cfg)?;
    let m = mass(cfg, &consts)?;
    let known = EchoKnown {
        b0: bias(cfg)?,
        sigma_z0: positive(cfg, "sigma_z0", cfg.length("sigma_z0")?)?,
        mass: m,
        b1: if cfg.contains("b1") { Some(cfg.gradient("b1")?) } else { None },
        t_axial: if cfg.contains("t_axial") {
            Some(positive(cfg, "t_axial", cfg.temperature("t_axial")?)?)
        } else {
            None
        },
        consts,
    };
    let guess = EchoGuess::from_physical(
        cfg.gradient("b1_guess")?,
        positive(cfg, "t_axial_guess", cfg.temperature("t_axial_guess")?)?,
        m,
        guess_or(cfg, "p_p2_guess", 0.9)?,
        &consts,
    );
    let r = fit::fit_echo(&data, &known, &guess)?;
    if r.params.is_empty() {
        return Ok(fit_output("tau_tilde_us", &[], Vec::new(), &r));
    }
    let curve = fit::echo_model(r.params["kappa"], r.params["p_p2"], data.times())?;
    Ok(fit_output("tau_tilde_us", &xs, curve, &r))
}
