//! STIRAP and fractional STIRAP in the five-state chain
//! |+2⟩ – |e₂⟩ – |+1⟩ – |e₁⟩ – |0⟩.
//!
//! The pump (π) couples |+2⟩→|e₂⟩ and |+1⟩→|e₁⟩, the Stokes (σ⁺) couples
//! |+1⟩→|e₂⟩ and |0⟩→|e₁⟩, with |e_m⟩ = |J'=2, m'=m⟩. The π coupling
//! |0⟩→|J'=2, 0⟩ vanishes, so the chain ends at |0⟩.
//!
//! In the frame rotating with both optical fields the diagonal is
//! (0, Δ − iΓ/2, δ, Δ + δ − iΓ/2, 2δ), where δ is the two-photon detuning
//! between neighbouring ground sublevels (zero with Zeeman compensation and
//! no Doppler offset). Off-diagonals are ½·coupling·envelope.

mod clebsch;

pub use clebsch::clebsch_gordan;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::propagator::{integrate_state, Generator};
use crate::spin::{Populations, StateVector};
use crate::units::AngularFrequency;

/// Chain site indices.
pub const SITE_PLUS2: usize = 0;
pub const SITE_E2: usize = 1;
pub const SITE_PLUS1: usize = 2;
pub const SITE_E1: usize = 3;
pub const SITE_ZERO: usize = 4;
pub const CHAIN_DIM: usize = 5;

/// Below this Ω₀·τ the passage is flagged as non-adiabatic.
pub const ADIABATICITY_THRESHOLD: f64 = 10.0;

const DEFAULT_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StirapParams {
    pub omega0_peak: AngularFrequency,
    /// Gaussian 1/e half-width τ (s).
    pub tau_pulse: f64,
    /// Pump delay relative to the Stokes pulse (s); positive is counterintuitive order.
    pub delta_t: f64,
    /// Final Stokes/pump amplitude ratio; 0 for plain STIRAP.
    pub eta: f64,
    pub detuning: AngularFrequency,
    pub two_photon_detuning: AngularFrequency,
    pub gamma_e: AngularFrequency,
    /// Δ_S = Δ_P + ω₀ applied; otherwise the ground Zeeman splitting adds to δ.
    pub zeeman_comp: bool,
    pub zeeman_splitting: AngularFrequency,
}

impl Default for StirapParams {
    fn default() -> Self {
        StirapParams {
            omega0_peak: AngularFrequency::from_mhz(40.0),
            tau_pulse: 0.55e-6,
            delta_t: 0.7e-6,
            eta: 0.0,
            detuning: AngularFrequency::from_mhz(20.0),
            two_photon_detuning: AngularFrequency::ZERO,
            gamma_e: AngularFrequency::ZERO,
            zeeman_comp: true,
            zeeman_splitting: AngularFrequency::ZERO,
        }
    }
}

impl StirapParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.omega0_peak.rad_per_s(),
            self.tau_pulse,
            self.delta_t,
            self.eta,
            self.detuning.rad_per_s(),
            self.two_photon_detuning.rad_per_s(),
            self.gamma_e.rad_per_s(),
            self.zeeman_splitting.rad_per_s(),
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("STIRAP parameters"));
        }
        if self.tau_pulse <= 0.0 {
            return Err(Error::param("tau_pulse", "must be positive"));
        }
        if self.eta < 0.0 {
            return Err(Error::param("eta", "must be non-negative"));
        }
        if self.gamma_e.rad_per_s() < 0.0 {
            return Err(Error::param("gamma_e", "must be non-negative"));
        }
        Ok(())
    }

    /// Effective two-photon detuning between neighbouring ground sublevels.
    pub fn effective_two_photon_detuning(&self) -> f64 {
        let d = self.two_photon_detuning.rad_per_s();
        if self.zeeman_comp {
            d
        } else {
            d - self.zeeman_splitting.rad_per_s()
        }
    }

    pub fn is_adiabatic(&self) -> bool {
        self.omega0_peak.rad_per_s() * self.tau_pulse >= ADIABATICITY_THRESHOLD
    }

    /// Simulation window: ±4τ around the pulse pair.
    pub fn window(&self) -> (f64, f64) {
        let lo = self.delta_t.min(0.0) - 4.0 * self.tau_pulse;
        let hi = self.delta_t.max(0.0) + 4.0 * self.tau_pulse;
        (lo, hi)
    }
}

/// Stokes and pump Rabi frequencies at time `t`.
///
/// Stokes: Ω₀ e^{−t²/τ²} + η Ω₀ e^{−(t−δt)²/τ²}; pump: Ω₀ e^{−(t−δt)²/τ²}.
pub fn pulse_envelopes(p: &StirapParams, t: f64) -> (AngularFrequency, AngularFrequency) {
    let g = |x: f64| (-(x * x) / (p.tau_pulse * p.tau_pulse)).exp();
    let stokes = p.omega0_peak * (g(t) + p.eta * g(t - p.delta_t));
    let pump = p.omega0_peak * g(t - p.delta_t);
    (stokes, pump)
}

/// Relative couplings along the chain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChainCouplings {
    /// |+2⟩→|e₂⟩, |+1⟩→|e₁⟩
    pub pump: [f64; 2],
    /// |+1⟩→|e₂⟩, |0⟩→|e₁⟩
    pub stokes: [f64; 2],
}

impl ChainCouplings {
    pub fn new(pump: [f64; 2], stokes: [f64; 2]) -> Result<Self> {
        if pump.iter().chain(&stokes).any(|c| *c == 0.0 || !c.is_finite()) {
            return Err(Error::param("couplings", "all chain couplings must be finite and non-zero"));
        }
        Ok(ChainCouplings { pump, stokes })
    }

    /// Clebsch-Gordan couplings for π (pump) and σ⁺ (Stokes) on J=2 → J'=2.
    pub fn physical() -> Self {
        ChainCouplings {
            pump: [
                clebsch_gordan(2.0, 2.0, 1.0, 0.0, 2.0, 2.0),
                clebsch_gordan(2.0, 1.0, 1.0, 0.0, 2.0, 1.0),
            ],
            stokes: [
                clebsch_gordan(2.0, 1.0, 1.0, 1.0, 2.0, 2.0),
                clebsch_gordan(2.0, 0.0, 1.0, 1.0, 2.0, 1.0),
            ],
        }
    }
}

/// Time-dependent chain Hamiltonian.
pub struct StirapChain {
    params: StirapParams,
    couplings: ChainCouplings,
}

impl StirapChain {
    pub fn new(params: StirapParams, couplings: ChainCouplings) -> Result<Self> {
        params.validate()?;
        Ok(StirapChain { params, couplings })
    }
}

impl Generator for StirapChain {
    fn dim(&self) -> usize {
        CHAIN_DIM
    }

    fn hamiltonian(&self, t: f64) -> DMatrix<C64> {
        chain_hamiltonian(&self.params, &self.couplings, t)
    }

    fn is_hermitian(&self) -> bool {
        self.params.gamma_e.rad_per_s() == 0.0
    }

    fn max_step(&self) -> f64 {
        let p = &self.params;
        let c_max = self
            .couplings
            .pump
            .iter()
            .chain(&self.couplings.stokes)
            .fold(0.0f64, |a, c| a.max(c.abs()));
        let scale = p.omega0_peak.rad_per_s() * (1.0 + p.eta) * c_max
            + p.detuning.rad_per_s().abs()
            + 2.0 * p.effective_two_photon_detuning().abs()
            + p.gamma_e.rad_per_s();
        (0.2 / scale.max(1e-300)).min(p.tau_pulse / 20.0)
    }
}

/// H(t) of the five-state chain (rad/s).
pub fn chain_hamiltonian(p: &StirapParams, c: &ChainCouplings, t: f64) -> DMatrix<C64> {
    let (s, pump) = pulse_envelopes(p, t);
    let (s, pump) = (s.rad_per_s(), pump.rad_per_s());
    let delta = p.detuning.rad_per_s();
    let d2 = p.effective_two_photon_detuning();
    let half_gamma = p.gamma_e.rad_per_s() / 2.0;
    let mut h = DMatrix::<C64>::zeros(CHAIN_DIM, CHAIN_DIM);
    h[(SITE_E2, SITE_E2)] = C64::new(delta, -half_gamma);
    h[(SITE_PLUS1, SITE_PLUS1)] = C64::new(d2, 0.0);
    h[(SITE_E1, SITE_E1)] = C64::new(delta + d2, -half_gamma);
    h[(SITE_ZERO, SITE_ZERO)] = C64::new(2.0 * d2, 0.0);
    let mut set = |a: usize, b: usize, v: f64| {
        h[(a, b)] = C64::new(v, 0.0);
        h[(b, a)] = C64::new(v, 0.0);
    };
    set(SITE_E2, SITE_PLUS2, 0.5 * pump * c.pump[0]);
    set(SITE_E2, SITE_PLUS1, 0.5 * s * c.stokes[0]);
    set(SITE_E1, SITE_PLUS1, 0.5 * pump * c.pump[1]);
    set(SITE_E1, SITE_ZERO, 0.5 * s * c.stokes[1]);
    h
}

/// Ground-state chain vector for m ∈ {+2, +1, 0}.
pub fn chain_ground_state(m: i32) -> Result<StateVector> {
    let site = match m {
        2 => SITE_PLUS2,
        1 => SITE_PLUS1,
        0 => SITE_ZERO,
        _ => return Err(Error::param("m", format!("{m} is not part of the chain"))),
    };
    Ok(StateVector::basis(CHAIN_DIM, site))
}

/// Closed-form f-STIRAP populations (p₊₂, p₊₁, p₀) for Stokes/pump ratio η:
/// (3η⁴, 6η², 2) / (2 + 6η² + 3η⁴).
pub fn fstirap_populations_closed(eta: f64) -> Result<Populations> {
    if eta.is_nan() || eta < 0.0 {
        return Err(Error::param("eta", "must be non-negative"));
    }
    if eta.is_infinite() {
        return Ok(Populations::from_raw(vec![1.0, 0.0, 0.0]));
    }
    let e2 = eta * eta;
    let e4 = e2 * e2;
    let denom = 2.0 + 6.0 * e2 + 3.0 * e4;
    let p1 = 6.0 * e2 / denom;
    let p0 = 2.0 / denom;
    Ok(Populations::from_raw(vec![1.0 - p1 - p0, p1, p0]))
}

/// Instantaneous dark state for a Stokes/pump ratio η (support on |+2⟩,
/// |+1⟩, |0⟩). η = 0 gives the pump-only limit |0⟩.
pub fn dark_state(eta: f64, c: &ChainCouplings) -> StateVector {
    // rows e₂, e₁ of H·d = 0 with S = η P:
    // P a x₂ + S b x₁ = 0,  P c x₁ + S d x₀ = 0
    let [a, cc] = c.pump;
    let [b, d] = c.stokes;
    let mut amps = DVector::<C64>::zeros(CHAIN_DIM);
    amps[SITE_PLUS2] = C64::new(eta * eta, 0.0);
    amps[SITE_PLUS1] = C64::new(-a * eta / b, 0.0);
    amps[SITE_ZERO] = C64::new(a * cc / (b * d), 0.0);
    StateVector::normalized(amps).expect("dark state has non-zero |0> component")
}

#[derive(Clone, Debug, PartialEq)]
pub struct StirapOutcome {
    /// Final chain state, renormalized to the surviving atoms.
    pub final_state: StateVector,
    /// Final norm: fraction of atoms not lost through the excited states.
    pub survival: f64,
    /// Set when Ω₀·τ is below [`ADIABATICITY_THRESHOLD`].
    pub nonadiabatic: bool,
}

impl StirapOutcome {
    /// (p₊₂, p₊₁, p₀) relative to the ground-state population.
    pub fn ground_populations(&self) -> Populations {
        ground_populations(self.final_state.amplitudes())
    }

    /// All five chain-site populations of the renormalized state.
    pub fn chain_populations(&self) -> Populations {
        Populations::from_raw(self.final_state.amplitudes().iter().map(|c| c.norm_sqr()).collect())
    }
}

fn ground_populations(amps: &DVector<C64>) -> Populations {
    let g = [
        amps[SITE_PLUS2].norm_sqr(),
        amps[SITE_PLUS1].norm_sqr(),
        amps[SITE_ZERO].norm_sqr(),
    ];
    let total: f64 = g.iter().sum();
    Populations::from_raw(g.iter().map(|x| x / total).collect())
}

fn check_initial(initial: &StateVector) -> Result<()> {
    if initial.dim() != CHAIN_DIM {
        return Err(Error::DimensionMismatch {
            expected: CHAIN_DIM,
            found: initial.dim(),
        });
    }
    if (initial.norm_sqr() - 1.0).abs() > 1e-6 {
        return Err(Error::NotNormalized {
            norm_sqr: initial.norm_sqr(),
        });
    }
    Ok(())
}

/// Propagates the chain across the full pulse window with the physical
/// Clebsch-Gordan couplings.
pub fn simulate_stirap(p: &StirapParams, initial: &StateVector) -> Result<StirapOutcome> {
    simulate_stirap_with(p, &ChainCouplings::physical(), initial, DEFAULT_TOL)
}

pub fn simulate_stirap_with(
    p: &StirapParams,
    couplings: &ChainCouplings,
    initial: &StateVector,
    tol: f64,
) -> Result<StirapOutcome> {
    check_initial(initial)?;
    let chain = StirapChain::new(*p, *couplings)?;
    let (t0, t1) = p.window();
    let out = integrate_state(&chain, initial.amplitudes(), &[t0, t1], tol)?;
    let last = out.into_iter().last().expect("two samples");
    let survival = last.norm_squared();
    if !(survival > 0.0) {
        return Err(Error::NonFinite("STIRAP survival"));
    }
    if !p.is_adiabatic() {
        log::warn!(
            "Ω₀τ = {:.2} below {ADIABATICITY_THRESHOLD}: passage is not adiabatic",
            p.omega0_peak.rad_per_s() * p.tau_pulse
        );
    }
    Ok(StirapOutcome {
        final_state: StateVector::normalized(last)?,
        survival,
        nonadiabatic: !p.is_adiabatic(),
    })
}

/// One sample of a STIRAP time trace.
#[derive(Clone, Debug, PartialEq)]
pub struct StirapSample {
    pub t: f64,
    /// (p₊₂, p₊₁, p₀) relative to the ground-state population.
    pub ground: Populations,
    /// Total norm at `t`.
    pub survival: f64,
}

/// Time trace on `n_points` equally spaced samples across the window.
pub fn simulate_stirap_trace(p: &StirapParams, initial: &StateVector, n_points: usize) -> Result<Vec<StirapSample>> {
    check_initial(initial)?;
    if n_points < 2 {
        return Err(Error::param("n_points", "need at least two samples"));
    }
    let chain = StirapChain::new(*p, ChainCouplings::physical())?;
    let (t0, t1) = p.window();
    let times: Vec<f64> = (0..n_points)
        .map(|k| t0 + (t1 - t0) * k as f64 / (n_points - 1) as f64)
        .collect();
    let states = integrate_state(&chain, initial.amplitudes(), &times, DEFAULT_TOL)?;
    Ok(times
        .into_iter()
        .zip(states)
        .map(|(t, s)| StirapSample {
            t,
            ground: ground_populations(&s),
            survival: s.norm_squared(),
        })
        .collect())
}

/// Runs `simulate_stirap` from |+2⟩ for every η, in parallel, results in
/// input order.
pub fn eta_scan(p: &StirapParams, etas: &[f64]) -> Result<Vec<StirapOutcome>> {
    let start = chain_ground_state(2)?;
    etas.par_iter()
        .map(|&eta| simulate_stirap(&StirapParams { eta, ..*p }, &start))
        .collect()
}

/// Runs `simulate_stirap` from |+2⟩ for every pump delay δt.
pub fn delay_scan(p: &StirapParams, delays: &[f64]) -> Result<Vec<StirapOutcome>> {
    let start = chain_ground_state(2)?;
    delays
        .par_iter()
        .map(|&delta_t| simulate_stirap(&StirapParams { delta_t, ..*p }, &start))
        .collect()
}
