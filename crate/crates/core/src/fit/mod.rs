//! Least-squares fits of Rabi, Ramsey and echo population traces.
//!
//! Every fitter minimizes the (optionally weighted) sum of squared
//! population residuals over all m_J channels with a Nelder–Mead simplex,
//! started from five deterministic jittered guesses. The best start wins;
//! ties go to the lower start index.
//!
//! Initial populations are incoherent mixtures of sublevel eigenstates.
//! Mixture weights are mapped into the simplex by clamping, so reported
//! populations are always non-negative and sum to one.
//!
//! The echo decay at τ₁ = τ₂ = τ̃ depends on B₁ and T_z only through
//! κ = γ²B₁²k_BT_z/m, so [`fit_echo`] fits κ and reports B₁ or T_z only when
//! the other is supplied.

mod nelder_mead;

pub use nelder_mead::{minimize, Options as SimplexOptions, Outcome as SimplexOutcome};

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::constants::PhysicalConstants;
use crate::ensemble::{analytic_from_fourier, sequence_fourier, Initial, PhaseModel, SequenceKind, SequenceTiming};
use crate::error::{Error, Result};
use crate::propagator::FieldConfig;
use crate::rotations::{table1_populations, Angle};
use crate::spin::{Populations, SpinSystem};
use crate::units::{AngularFrequency, FieldGradient, MagneticField};

/// Minimum number of samples accepted by the fitters.
pub const MIN_SAMPLES: usize = 10;

const N_STARTS: usize = 5;

/// Time-resolved population measurements.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    times: Vec<f64>,
    populations: Vec<Vec<f64>>,
    weights: Option<Vec<f64>>,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>, populations: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() != populations.len() {
            return Err(Error::DimensionMismatch {
                expected: times.len(),
                found: populations.len(),
            });
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("sample times"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("times", "must be strictly increasing"));
        }
        if let Some(first) = populations.first() {
            let dim = first.len();
            for row in &populations {
                if row.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: row.len(),
                    });
                }
                if row.iter().any(|p| !p.is_finite()) {
                    return Err(Error::NonFinite("populations"));
                }
                if row.iter().sum::<f64>() > 1.0 + 1e-6 {
                    return Err(Error::param("populations", "row sums exceed 1"));
                }
            }
        }
        Ok(TimeSeries {
            times,
            populations,
            weights: None,
        })
    }

    /// Per-sample weights applied to every channel of that sample.
    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.times.len() {
            return Err(Error::DimensionMismatch {
                expected: self.times.len(),
                found: weights.len(),
            });
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || weights.iter().all(|w| *w == 0.0) {
            return Err(Error::param("weights", "must be non-negative, finite and not all zero"));
        }
        self.weights = Some(weights);
        Ok(self)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn populations(&self) -> &[Vec<f64>] {
        &self.populations
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.populations.first().map_or(0, Vec::len)
    }

    fn weight(&self, i: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[i])
    }

    fn total_weight(&self) -> f64 {
        self.weights.as_ref().map_or(self.len() as f64, |w| w.iter().sum())
    }

    /// Largest deviation of any entry from its channel mean.
    fn spread(&self) -> f64 {
        let dim = self.dim();
        let n = self.len() as f64;
        (0..dim)
            .map(|m| {
                let mean = self.populations.iter().map(|r| r[m]).sum::<f64>() / n;
                self.populations.iter().map(|r| (r[m] - mean).abs()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    fn check(&self, dim: usize) -> Result<()> {
        if self.len() < MIN_SAMPLES {
            return Err(Error::InsufficientData(format!(
                "{} samples, at least {MIN_SAMPLES} required",
                self.len()
            )));
        }
        if self.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: self.dim(),
            });
        }
        Ok(())
    }

    /// Σ w_i Σ_m (model − data)².
    fn ssr(&self, model: &[Vec<f64>]) -> f64 {
        self.populations
            .iter()
            .zip(model)
            .enumerate()
            .map(|(i, (d, m))| self.weight(i) * d.iter().zip(m).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
            .sum()
    }

    fn rms(&self, ssr: f64) -> f64 {
        (ssr / (self.total_weight() * self.dim() as f64)).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub params: BTreeMap<String, f64>,
    pub residual_rms: f64,
    pub converged: bool,
    pub n_evals: usize,
    /// Why a fit is not trustworthy, when it is not.
    pub diagnostic: Option<String>,
}

impl FitResult {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.params.get(name).copied()
    }
}

/// Deterministic multi-start driver: start 0 is the guess itself, the others
/// scale each coordinate by fixed factors.
fn multi_start<F>(objective: F, x0: &[f64], step: &[f64]) -> SimplexOutcome
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    const JITTER: [f64; N_STARTS] = [0.0, 0.07, -0.07, 0.15, -0.15];
    let outcomes: Vec<SimplexOutcome> = (0..N_STARTS)
        .into_par_iter()
        .map(|s| {
            let start: Vec<f64> = x0
                .iter()
                .enumerate()
                .map(|(i, x)| {
                    let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                    x * (1.0 + sign * JITTER[s])
                })
                .collect();
            minimize(&objective, &start, step, &SimplexOptions::default())
        })
        .collect();
    let total_evals: usize = outcomes.iter().map(|o| o.n_evals).sum();
    let mut best = outcomes
        .into_iter()
        .reduce(|a, b| if b.f < a.f { b } else { a })
        .expect("at least one start");
    best.n_evals = total_evals;
    best
}

fn weight(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

fn constant_trace(n_evals: usize, what: &str) -> FitResult {
    FitResult {
        params: BTreeMap::new(),
        residual_rms: 0.0,
        converged: false,
        n_evals,
        diagnostic: Some(format!("constant trace: {what} is not identifiable")),
    }
}

// ---------------------------------------------------------------- Rabi

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RabiGuess {
    pub omega: AngularFrequency,
    pub p_plus2: f64,
    pub p_plus1: f64,
}

/// Incoherent mixture of the closed-form rotation columns for |+2⟩, |+1⟩, |0⟩
/// at the resonant rotation angle θ = Ωt/2.
pub fn rabi_model(omega: AngularFrequency, p_plus2: f64, p_plus1: f64, t: f64) -> Result<Populations> {
    let theta = Angle::from_radians(omega.rad_per_s() * t / 2.0);
    let w0 = (1.0 - p_plus2 - p_plus1).max(0.0);
    let cols = [
        table1_populations(2, theta)?,
        table1_populations(1, theta)?,
        table1_populations(0, theta)?,
    ];
    Populations::mixture([(p_plus2, &cols[0]), (p_plus1, &cols[1]), (w0, &cols[2])])
}

fn rabi_weights(x: &[f64]) -> (f64, f64) {
    let p2 = weight(x[1]);
    let p1 = x[2].clamp(0.0, 1.0 - p2);
    (p2, p1)
}

/// Fits Ω and the initial |+2⟩, |+1⟩ populations (rest in |0⟩) to a
/// five-channel Rabi trace.
///
/// Parameters: `omega_khz` (Ω/2π), `p_p2`, `p_p1`, `p_0`.
pub fn fit_rabi(data: &TimeSeries, guess: &RabiGuess) -> Result<FitResult> {
    data.check(5)?;
    let om = guess.omega.rad_per_s();
    if !(om.is_finite() && om > 0.0) {
        return Err(Error::param("omega", "guess must be positive"));
    }
    let span = data.times[data.len() - 1] - data.times[0];
    if span * om < std::f64::consts::PI {
        return Err(Error::InsufficientData(format!(
            "trace spans {:.3e} s, less than half a Rabi period at the guessed Ω",
            span
        )));
    }
    if data.spread() < 1e-12 {
        return Ok(constant_trace(0, "the Rabi frequency"));
    }
    let model_at = |x: &[f64]| -> Vec<Vec<f64>> {
        let omega = AngularFrequency::from_khz(x[0].abs());
        let (p2, p1) = rabi_weights(x);
        data.times
            .iter()
            .map(|&t| {
                rabi_model(omega, p2, p1, t)
                    .map(Populations::into_vec)
                    .unwrap_or_else(|_| vec![f64::NAN; 5])
            })
            .collect()
    };
    let objective = |x: &[f64]| data.ssr(&model_at(x));
    let x0 = [guess.omega.khz(), guess.p_plus2, guess.p_plus1];
    let step = [0.02 * guess.omega.khz(), 0.05, 0.05];
    let best = multi_start(objective, &x0, &step);
    let (p2, p1) = rabi_weights(&best.x);
    let mut params = BTreeMap::new();
    params.insert("omega_khz".to_string(), best.x[0].abs());
    params.insert("p_p2".to_string(), p2);
    params.insert("p_p1".to_string(), p1);
    params.insert("p_0".to_string(), (1.0 - p2 - p1).max(0.0));
    Ok(FitResult {
        params,
        residual_rms: data.rms(best.f),
        converged: best.converged,
        n_evals: best.n_evals,
        diagnostic: (!best.converged).then(|| "simplex did not converge within the evaluation budget".to_string()),
    })
}

// ---------------------------------------------------------------- Ramsey

/// Quantities held fixed in a Ramsey fit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RamseyKnown {
    pub b0: MagneticField,
    pub sigma_z0: f64,
    pub t_axial: f64,
    pub mass: f64,
    pub consts: PhysicalConstants,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RamseyGuess {
    pub b1: FieldGradient,
    pub p_plus2: f64,
}

/// Analytic ensemble-averaged Ramsey populations for an initial mixture of
/// |+2⟩ (weight `p_plus2`) and |+1⟩.
pub fn ramsey_model(known: &RamseyKnown, b1: FieldGradient, p_plus2: f64, times: &[f64]) -> Result<Vec<Populations>> {
    let sys = SpinSystem::spin2();
    let weights = mixture_weights(p_plus2);
    let coeffs = sequence_fourier(&sys, SequenceKind::Ramsey, &Initial::Mixture(weights))?;
    let field = FieldConfig::default().with_bias(known.b0, &known.consts).with_gradient(b1);
    let sv = known.consts.velocity_variance(known.t_axial, known.mass);
    Ok(times
        .iter()
        .map(|&t| {
            let m = PhaseModel::new(&field, &known.consts, &SequenceTiming::ramsey(t));
            analytic_from_fourier(&coeffs, &m, known.sigma_z0, sv)
        })
        .collect())
}

fn mixture_weights(p_plus2: f64) -> Populations {
    let p2 = weight(p_plus2);
    Populations::from_raw(vec![p2, 1.0 - p2, 0.0, 0.0, 0.0])
}

/// Populations as a linear function of the mixture weight: the Fourier
/// coefficients of |+2⟩ and |+1⟩ separately.
struct MixtureFourier {
    plus2: Vec<Vec<C64>>,
    plus1: Vec<Vec<C64>>,
}

impl MixtureFourier {
    fn new(kind: SequenceKind) -> Result<Self> {
        let sys = SpinSystem::spin2();
        let basis = |k: usize| {
            let mut w = vec![0.0; 5];
            w[k] = 1.0;
            sequence_fourier(&sys, kind, &Initial::Mixture(Populations::from_raw(w)))
        };
        Ok(MixtureFourier {
            plus2: basis(0)?,
            plus1: basis(1)?,
        })
    }

    fn populations(&self, p2: f64, model: &PhaseModel, sigma_z: f64, sigma_v_sq: f64) -> Vec<f64> {
        let a = analytic_from_fourier(&self.plus2, model, sigma_z, sigma_v_sq);
        let b = analytic_from_fourier(&self.plus1, model, sigma_z, sigma_v_sq);
        a.as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(x, y)| p2 * x + (1.0 - p2) * y)
            .collect()
    }
}

/// 1/e time of exp(−½g²σ²τ²)·exp(−⅛g²σ_v²τ⁴) with g = γB₁.
fn ramsey_one_over_e(g: f64, sigma_z: f64, sigma_v_sq: f64) -> Option<f64> {
    let a = g * g * sigma_v_sq / 8.0;
    let b = g * g * sigma_z * sigma_z / 2.0;
    let u = if a > 0.0 {
        (-b + (b * b + 4.0 * a).sqrt()) / (2.0 * a)
    } else if b > 0.0 {
        1.0 / b
    } else {
        return None;
    };
    Some(u.sqrt())
}

/// Fits B₁ and the initial |+2⟩ weight (rest in |+1⟩) to a Ramsey trace
/// sampled at free-evolution times τ₁.
///
/// Parameters: `b1_mg_per_mm`, `p_p2`, `p_p1` and, for B₁ > 0, `tau_1e_us`
/// (the 1/e time of the dephasing envelope).
pub fn fit_ramsey(data: &TimeSeries, known: &RamseyKnown, guess: &RamseyGuess) -> Result<FitResult> {
    data.check(5)?;
    validate_known(known.sigma_z0, known.t_axial, known.mass)?;
    if data.spread() < 1e-12 {
        return Ok(constant_trace(0, "the field gradient"));
    }
    let basis = MixtureFourier::new(SequenceKind::Ramsey)?;
    let consts = known.consts;
    let sv = consts.velocity_variance(known.t_axial, known.mass);
    let base = FieldConfig::default().with_bias(known.b0, &consts);
    let model_at = |x: &[f64]| -> Vec<Vec<f64>> {
        let field = base.with_gradient(FieldGradient::from_mg_per_mm(x[0].abs()));
        let p2 = weight(x[1]);
        data.times
            .iter()
            .map(|&t| {
                let m = PhaseModel::new(&field, &consts, &SequenceTiming::ramsey(t));
                basis.populations(p2, &m, known.sigma_z0, sv)
            })
            .collect()
    };
    let objective = |x: &[f64]| data.ssr(&model_at(x));
    let b1_guess = guess.b1.mg_per_mm().abs().max(0.1);
    let best = multi_start(objective, &[b1_guess, guess.p_plus2], &[0.2 * b1_guess, 0.05]);
    let b1 = best.x[0].abs();
    let p2 = weight(best.x[1]);
    let mut params = BTreeMap::new();
    params.insert("b1_mg_per_mm".to_string(), b1);
    params.insert("p_p2".to_string(), p2);
    params.insert("p_p1".to_string(), 1.0 - p2);
    let g = consts.gradient_rate(FieldGradient::from_mg_per_mm(b1));
    if let Some(tau) = ramsey_one_over_e(g, known.sigma_z0, sv).filter(|t| t.is_finite()) {
        params.insert("tau_1e_us".to_string(), tau * 1e6);
    }
    Ok(FitResult {
        params,
        residual_rms: data.rms(best.f),
        converged: best.converged,
        n_evals: best.n_evals,
        diagnostic: (!best.converged).then(|| "simplex did not converge within the evaluation budget".to_string()),
    })
}

fn validate_known(sigma_z0: f64, t_axial: f64, mass: f64) -> Result<()> {
    for (name, v) in [("sigma_z0", sigma_z0), ("t_axial", t_axial), ("mass", mass)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::param(name, "must be positive"));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- echo

/// Quantities held fixed in an echo fit. Supplying one of `b1` or `t_axial`
/// lets the fit report the other.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EchoKnown {
    pub b0: MagneticField,
    pub sigma_z0: f64,
    pub mass: f64,
    pub b1: Option<FieldGradient>,
    pub t_axial: Option<f64>,
    pub consts: PhysicalConstants,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EchoGuess {
    /// κ = γ²B₁²k_BT_z/m in s⁻⁴.
    pub kappa: f64,
    pub p_plus2: f64,
}

impl EchoGuess {
    pub fn from_physical(b1: FieldGradient, t_axial: f64, mass: f64, p_plus2: f64, consts: &PhysicalConstants) -> Self {
        EchoGuess {
            kappa: echo_kappa(b1, t_axial, mass, consts),
            p_plus2,
        }
    }
}

/// κ = γ²B₁²k_BT_z/m, the only combination the symmetric echo depends on.
pub fn echo_kappa(b1: FieldGradient, t_axial: f64, mass: f64, consts: &PhysicalConstants) -> f64 {
    let g = consts.gradient_rate(b1);
    g * g * consts.velocity_variance(t_axial, mass)
}

/// Fit variable: κ in units of (10⁻⁴ s)⁻⁴.
const KAPPA_SCALE: f64 = 1e16;

/// Symmetric-echo phase model (τ₁ = τ₂ = τ̃) as a function of κ alone:
/// Φ = −γB₁v_zτ̃², so with σ_v² = 1 the v-coefficient is −√κ·τ̃².
/// The B₀ carrier cancels at τ₁ = τ₂.
fn symmetric_echo_model(kappa: f64, tt: f64) -> PhaseModel {
    PhaseModel {
        offset: 0.0,
        z_coeff: 0.0,
        v_coeff: -kappa.sqrt() * tt * tt,
    }
}

/// Symmetric-echo populations at τ̃ = `times` for κ and an initial mixture of
/// |+2⟩ (weight `p_plus2`) and |+1⟩.
pub fn echo_model(kappa: f64, p_plus2: f64, times: &[f64]) -> Result<Vec<Populations>> {
    if !(kappa.is_finite() && kappa >= 0.0) {
        return Err(Error::param("kappa", "must be non-negative"));
    }
    let basis = MixtureFourier::new(SequenceKind::Echo)?;
    let p2 = weight(p_plus2);
    times
        .iter()
        .map(|&tt| Ok(Populations::from_raw(basis.populations(p2, &symmetric_echo_model(kappa, tt), 0.0, 1.0))))
        .collect()
}

/// Fits κ and the initial |+2⟩ weight (rest in |+1⟩) to a symmetric echo
/// trace sampled at τ̃ = τ₁ = τ₂.
///
/// Parameters: `kappa` (s⁻⁴), `p_p2`, `p_p1`, plus `b1_mg_per_mm` when T_z
/// is known or `t_axial_mk` when B₁ is known.
pub fn fit_echo(data: &TimeSeries, known: &EchoKnown, guess: &EchoGuess) -> Result<FitResult> {
    data.check(5)?;
    if !(known.sigma_z0.is_finite() && known.sigma_z0 > 0.0) {
        return Err(Error::param("sigma_z0", "must be positive"));
    }
    if !(known.mass.is_finite() && known.mass > 0.0) {
        return Err(Error::param("mass", "must be positive"));
    }
    if data.spread() < 1e-9 {
        return Ok(constant_trace(0, "the product B₁²·T_z"));
    }
    let basis = MixtureFourier::new(SequenceKind::Echo)?;
    let model_at = |x: &[f64]| -> Vec<Vec<f64>> {
        let kappa = x[0].abs() * KAPPA_SCALE;
        let p2 = weight(x[1]);
        data.times
            .iter()
            .map(|&tt| basis.populations(p2, &symmetric_echo_model(kappa, tt), 0.0, 1.0))
            .collect()
    };
    let objective = |x: &[f64]| data.ssr(&model_at(x));
    let k_guess = (guess.kappa / KAPPA_SCALE).abs().max(1e-6);
    let best = multi_start(objective, &[k_guess, guess.p_plus2], &[0.3 * k_guess, 0.05]);
    let kappa = best.x[0].abs() * KAPPA_SCALE;
    let p2 = weight(best.x[1]);
    let mut params = BTreeMap::new();
    params.insert("kappa".to_string(), kappa);
    params.insert("p_p2".to_string(), p2);
    params.insert("p_p1".to_string(), 1.0 - p2);
    let consts = &known.consts;
    if let Some(t) = known.t_axial {
        let sv = consts.velocity_variance(t, known.mass);
        let g = (kappa / sv).sqrt();
        let b1 = FieldGradient::from_tesla_per_m(g / consts.gamma());
        params.insert("b1_mg_per_mm".to_string(), b1.mg_per_mm());
    }
    if let Some(b1) = known.b1 {
        let g = consts.gradient_rate(b1);
        let t = kappa * known.mass / (g * g * consts.k_b);
        params.insert("t_axial_mk".to_string(), t * 1e3);
    }
    let t_max = data.times[data.len() - 1];
    let mut diagnostic = (!best.converged).then(|| "simplex did not converge within the evaluation budget".to_string());
    let mut converged = best.converged;
    // contrast loss below 1e-4 over the whole trace: κ is not constrained
    if 0.5 * kappa * t_max.powi(4) < 1e-4 {
        converged = false;
        diagnostic = Some("no measurable echo decay: B₁²·T_z is not identifiable".to_string());
    }
    Ok(FitResult {
        params,
        residual_rms: data.rms(best.f),
        converged,
        n_evals: best.n_evals,
        diagnostic,
    })
}
