//! Ramsey and spin-echo sequences on single atoms and on a thermal ensemble
//! in a field B(z) = B₀ + B₁z.
//!
//! An atom starting at z₀ with axial velocity v_z accumulates a phase that is
//! affine in (z₀, v_z):
//!
//! * Ramsey: Φ(τ₁) = γB₀τ₁ + γB₁(z₀τ₁ + ½v_zτ₁²)
//! * echo:   Φ(τ₁, τ₂) = −γB₀(τ₂−τ₁) − γB₁z₀(τ₂−τ₁) + ½γB₁v_z[(τ₂−τ₁)² − 2τ₂²]
//!
//! Pulses are ideal rotations about x̃: the Ramsey sequence is
//! D_x(π/2) D_z(Φ) D_x(π/2), the echo sequence D_x(3π/2) D_z(Φ) D_x(π/2).
//!
//! For a spin-J state the sequence populations are trigonometric polynomials
//! of degree 2J in Φ. With z₀ ~ N(0, σ_z0²) and v_z ~ N(0, k_BT_z/m) each
//! harmonic e^{ikΦ} averages to e^{ikΦ̄}·exp(−½k²(a²σ_z0² + b²σ_v²)) where
//! a, b are the z₀ and v_z coefficients of Φ. The analytic average uses
//! that; the Monte Carlo average samples (z₀, v_z) directly.
//!
//! Monte Carlo seed contract: samples are split into chunks of
//! [`MC_CHUNK`] consecutive indices; chunk c draws from
//! `ChaCha8Rng::seed_from_u64(seed)` on stream c, z₀ then v_z per sample.
//! Chunk sums are reduced in chunk order, so results are bit-identical for
//! any worker count.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};
use crate::propagator::FieldConfig;
use crate::rotations::{rotation_operator, Angle, RotationAxis};
use crate::spin::{Populations, SpinSystem, StateVector};

/// Samples per Monte Carlo chunk (one RNG stream each).
pub const MC_CHUNK: usize = 1024;

/// Below this sample count Monte Carlo estimates are flagged.
pub const MIN_SAMPLES: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnsembleSpec {
    /// Initial axial spread σ_z0 (m).
    pub sigma_z0: f64,
    /// Axial temperature T_z (K).
    pub t_axial: f64,
    /// Atomic mass (kg).
    pub mass: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_z0.is_finite() && self.sigma_z0 > 0.0) {
            return Err(Error::param("sigma_z0", "must be positive"));
        }
        if !(self.t_axial.is_finite() && self.t_axial > 0.0) {
            return Err(Error::param("t_axial", "must be positive"));
        }
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(Error::param("mass", "must be positive"));
        }
        if self.n_samples == 0 {
            return Err(Error::param("n_samples", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SequenceKind {
    Ramsey,
    Echo,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SequenceTiming {
    pub tau1: f64,
    /// Zero for Ramsey.
    pub tau2: f64,
    pub kind: SequenceKind,
}

impl SequenceTiming {
    pub fn ramsey(tau1: f64) -> Self {
        SequenceTiming {
            tau1,
            tau2: 0.0,
            kind: SequenceKind::Ramsey,
        }
    }

    pub fn echo(tau1: f64, tau2: f64) -> Self {
        SequenceTiming {
            tau1,
            tau2,
            kind: SequenceKind::Echo,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau1.is_finite() && self.tau1 >= 0.0) {
            return Err(Error::param("tau1", "must be non-negative"));
        }
        if !(self.tau2.is_finite() && self.tau2 >= 0.0) {
            return Err(Error::param("tau2", "must be non-negative"));
        }
        Ok(())
    }
}

/// Φ = offset + z_coeff·z₀ + v_coeff·v_z (rad, rad/m, rad·s/m).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseModel {
    pub offset: f64,
    pub z_coeff: f64,
    pub v_coeff: f64,
}

impl PhaseModel {
    pub fn new(field: &FieldConfig, consts: &PhysicalConstants, timing: &SequenceTiming) -> Self {
        let w0 = consts.larmor(field.b0).rad_per_s();
        let g1 = consts.gradient_rate(field.b1);
        match timing.kind {
            SequenceKind::Ramsey => {
                let t = timing.tau1;
                PhaseModel {
                    offset: w0 * t,
                    z_coeff: g1 * t,
                    v_coeff: 0.5 * g1 * t * t,
                }
            }
            SequenceKind::Echo => {
                let d = timing.tau2 - timing.tau1;
                PhaseModel {
                    offset: -w0 * d,
                    z_coeff: -g1 * d,
                    v_coeff: 0.5 * g1 * (d * d - 2.0 * timing.tau2 * timing.tau2),
                }
            }
        }
    }

    pub fn phase(&self, z0: f64, vz: f64) -> f64 {
        self.offset + self.z_coeff * z0 + self.v_coeff * vz
    }

    /// |⟨e^{ikΦ}⟩| over the Gaussian (z₀, v_z) distribution.
    pub fn harmonic_damping(&self, k: f64, sigma_z: f64, sigma_v_sq: f64) -> f64 {
        let var = self.z_coeff * self.z_coeff * sigma_z * sigma_z + self.v_coeff * self.v_coeff * sigma_v_sq;
        (-0.5 * k * k * var).exp()
    }
}

pub fn phase_ramsey(field: &FieldConfig, consts: &PhysicalConstants, z0: f64, vz: f64, tau1: f64) -> Angle {
    Angle::from_radians(PhaseModel::new(field, consts, &SequenceTiming::ramsey(tau1)).phase(z0, vz))
}

pub fn phase_echo(field: &FieldConfig, consts: &PhysicalConstants, z0: f64, vz: f64, tau1: f64, tau2: f64) -> Angle {
    Angle::from_radians(PhaseModel::new(field, consts, &SequenceTiming::echo(tau1, tau2)).phase(z0, vz))
}

/// Precomputed pulse pair of a sequence acting on a set of initial states.
struct Sequence {
    m: Vec<f64>,
    /// Columns: first pulse applied to each initial component.
    prepared: DMatrix<C64>,
    weights: Vec<f64>,
    second: DMatrix<C64>,
}

impl Sequence {
    fn new(sys: &SpinSystem, kind: SequenceKind, components: &[(f64, DVector<C64>)]) -> Self {
        let first = rotation_operator(sys, RotationAxis::X, Angle::from_radians(PI / 2.0));
        let second_angle = match kind {
            SequenceKind::Ramsey => PI / 2.0,
            SequenceKind::Echo => 1.5 * PI,
        };
        let second = rotation_operator(sys, RotationAxis::X, Angle::from_radians(second_angle));
        let cols: Vec<DVector<C64>> = components.iter().map(|(_, v)| &first * v).collect();
        Sequence {
            m: sys.m_values(),
            prepared: DMatrix::from_columns(&cols),
            weights: components.iter().map(|(w, _)| *w).collect(),
            second,
        }
    }

    fn pure(sys: &SpinSystem, kind: SequenceKind, initial: &StateVector) -> Self {
        Sequence::new(sys, kind, &[(1.0, initial.amplitudes().clone())])
    }

    fn mixture(sys: &SpinSystem, kind: SequenceKind, weights: &Populations) -> Self {
        let comps: Vec<(f64, DVector<C64>)> = weights
            .as_slice()
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > 0.0)
            .map(|(k, w)| (*w, StateVector::basis(sys.dim(), k).into_amplitudes()))
            .collect();
        Sequence::new(sys, kind, &comps)
    }

    /// Adds the populations for phase `phi` to `out`.
    fn accumulate(&self, phi: f64, out: &mut [f64], scratch: &mut DVector<C64>) {
        let dim = self.m.len();
        for (c, w) in self.weights.iter().enumerate() {
            for r in 0..dim {
                scratch[r] = self.prepared[(r, c)] * C64::from_polar(1.0, -phi * self.m[r]);
            }
            for r in 0..dim {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..dim {
                    acc += self.second[(r, k)] * scratch[k];
                }
                out[r] += w * acc.norm_sqr();
            }
        }
    }

    fn populations(&self, phi: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.m.len()];
        let mut scratch = DVector::zeros(self.m.len());
        self.accumulate(phi, &mut out, &mut scratch);
        out
    }

    /// Fourier coefficients c_k, k = −2J…2J, of p_m(Φ) = Σ c_k e^{ikΦ}.
    fn fourier(&self) -> Vec<Vec<C64>> {
        let dim = self.m.len();
        let kmax = dim as i64 - 1;
        let n = 2 * kmax as usize + 2;
        let samples: Vec<Vec<f64>> = (0..n)
            .map(|s| self.populations(2.0 * PI * s as f64 / n as f64))
            .collect();
        (-kmax..=kmax)
            .map(|k| {
                (0..dim)
                    .map(|m| {
                        samples
                            .iter()
                            .enumerate()
                            .map(|(s, p)| {
                                C64::from_polar(p[m] / n as f64, -2.0 * PI * (k * s as i64) as f64 / n as f64)
                            })
                            .sum()
                    })
                    .collect()
            })
            .collect()
    }
}

/// Populations after the ideal pulse sequence with free-evolution phase `phi`.
pub fn single_atom_sequence(
    sys: &SpinSystem,
    initial: &StateVector,
    kind: SequenceKind,
    phi: Angle,
) -> Result<Populations> {
    check_state(sys, initial)?;
    Ok(Populations::from_raw(Sequence::pure(sys, kind, initial).populations(phi.radians())))
}

/// Gaussian position and velocity dephasing factor of a Ramsey sequence,
/// exp(−½γ²B₁²σ²τ₁²)·exp(−⅛γ²B₁²(k_BT_z/m)τ₁⁴).
pub fn ramsey_envelope(field: &FieldConfig, consts: &PhysicalConstants, spec: &EnsembleSpec, tau1: f64) -> f64 {
    let model = PhaseModel::new(field, consts, &SequenceTiming::ramsey(tau1));
    model.harmonic_damping(1.0, spec.sigma_z0, consts.velocity_variance(spec.t_axial, spec.mass))
}

/// Damped carrier cos(γB₀τ₁)·envelope.
pub fn ramsey_signal(field: &FieldConfig, consts: &PhysicalConstants, spec: &EnsembleSpec, tau1: f64) -> f64 {
    (consts.larmor(field.b0).rad_per_s() * tau1).cos() * ramsey_envelope(field, consts, spec, tau1)
}

/// Echo dephasing factor; at τ₁ = τ₂ = τ̃ it is exp(−½γ²B₁²(k_BT_z/m)τ̃⁴).
pub fn echo_envelope(field: &FieldConfig, consts: &PhysicalConstants, spec: &EnsembleSpec, tau1: f64, tau2: f64) -> f64 {
    let model = PhaseModel::new(field, consts, &SequenceTiming::echo(tau1, tau2));
    model.harmonic_damping(1.0, spec.sigma_z0, consts.velocity_variance(spec.t_axial, spec.mass))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AveragingMethod {
    Analytic,
    MonteCarlo,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleEstimate {
    pub populations: Populations,
    /// Standard error of each population (Monte Carlo only).
    pub std_error: Option<Vec<f64>>,
    /// Monte Carlo run with fewer than [`MIN_SAMPLES`] samples.
    pub high_variance: bool,
}

/// Initial condition of an ensemble average.
#[derive(Clone, Debug, PartialEq)]
pub enum Initial {
    Pure(StateVector),
    /// Incoherent mixture of sublevel eigenstates with these weights.
    Mixture(Populations),
}

fn check_state(sys: &SpinSystem, s: &StateVector) -> Result<()> {
    if s.dim() != sys.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            found: s.dim(),
        });
    }
    if (s.norm_sqr() - 1.0).abs() > crate::spin::NORM_TOLERANCE {
        return Err(Error::NotNormalized { norm_sqr: s.norm_sqr() });
    }
    Ok(())
}

fn build_sequence(sys: &SpinSystem, kind: SequenceKind, initial: &Initial) -> Result<Sequence> {
    match initial {
        Initial::Pure(s) => {
            check_state(sys, s)?;
            Ok(Sequence::pure(sys, kind, s))
        }
        Initial::Mixture(w) => {
            if w.len() != sys.dim() {
                return Err(Error::DimensionMismatch {
                    expected: sys.dim(),
                    found: w.len(),
                });
            }
            Ok(Sequence::mixture(sys, kind, w))
        }
    }
}

/// Fourier coefficients c_k, k = −2J…2J, of the sequence populations.
pub(crate) fn sequence_fourier(sys: &SpinSystem, kind: SequenceKind, initial: &Initial) -> Result<Vec<Vec<C64>>> {
    Ok(build_sequence(sys, kind, initial)?.fourier())
}

/// Ensemble-averaged populations for a single timing.
pub fn ensemble_average(
    sys: &SpinSystem,
    field: &FieldConfig,
    consts: &PhysicalConstants,
    spec: &EnsembleSpec,
    timing: &SequenceTiming,
    initial: &Initial,
    method: AveragingMethod,
) -> Result<EnsembleEstimate> {
    let mut out = ensemble_scan(sys, field, consts, spec, std::slice::from_ref(timing), initial, method)?;
    Ok(out.pop().expect("one timing"))
}

/// Ensemble averages for several timings of the same sequence kind. Monte
/// Carlo draws one set of (z₀, v_z) samples and evaluates it at every timing.
pub fn ensemble_scan(
    sys: &SpinSystem,
    field: &FieldConfig,
    consts: &PhysicalConstants,
    spec: &EnsembleSpec,
    timings: &[SequenceTiming],
    initial: &Initial,
    method: AveragingMethod,
) -> Result<Vec<EnsembleEstimate>> {
    spec.validate()?;
    field.validate()?;
    let Some(first) = timings.first() else {
        return Ok(Vec::new());
    };
    for t in timings {
        t.validate()?;
        if t.kind != first.kind {
            return Err(Error::param("timings", "all timings of a scan must share one sequence kind"));
        }
    }
    let seq = build_sequence(sys, first.kind, initial)?;
    let models: Vec<PhaseModel> = timings.iter().map(|t| PhaseModel::new(field, consts, t)).collect();
    let sigma_v_sq = consts.velocity_variance(spec.t_axial, spec.mass);
    match method {
        AveragingMethod::Analytic => {
            let coeffs = seq.fourier();
            Ok(models
                .iter()
                .map(|m| EnsembleEstimate {
                    populations: analytic_from_fourier(&coeffs, m, spec.sigma_z0, sigma_v_sq),
                    std_error: None,
                    high_variance: false,
                })
                .collect())
        }
        AveragingMethod::MonteCarlo => monte_carlo(&seq, &models, spec, sigma_v_sq),
    }
}

pub(crate) fn analytic_from_fourier(coeffs: &[Vec<C64>], model: &PhaseModel, sigma_z: f64, sigma_v_sq: f64) -> Populations {
    let kmax = (coeffs.len() as i64 - 1) / 2;
    let dim = coeffs[0].len();
    let mut p = vec![0.0; dim];
    for (idx, row) in coeffs.iter().enumerate() {
        let k = idx as i64 - kmax;
        let factor = C64::from_polar(
            model.harmonic_damping(k as f64, sigma_z, sigma_v_sq),
            k as f64 * model.offset,
        );
        for (pm, c) in p.iter_mut().zip(row) {
            *pm += (c * factor).re;
        }
    }
    Populations::from_raw(p)
}

struct ChunkSums {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

fn monte_carlo(seq: &Sequence, models: &[PhaseModel], spec: &EnsembleSpec, sigma_v_sq: f64) -> Result<Vec<EnsembleEstimate>> {
    let n = spec.n_samples;
    let dim = seq.m.len();
    let width = models.len() * dim;
    let z_dist = Normal::new(0.0, spec.sigma_z0).map_err(|e| Error::param("sigma_z0", e.to_string()))?;
    let v_dist = Normal::new(0.0, sigma_v_sq.sqrt()).map_err(|e| Error::param("t_axial", e.to_string()))?;
    let n_chunks = n.div_ceil(MC_CHUNK);
    let chunks: Vec<ChunkSums> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(c as u64);
            let count = MC_CHUNK.min(n - c * MC_CHUNK);
            let mut sums = ChunkSums {
                sum: vec![0.0; width],
                sum_sq: vec![0.0; width],
            };
            let mut pops = vec![0.0; dim];
            let mut scratch = DVector::zeros(dim);
            for _ in 0..count {
                let z0 = z_dist.sample(&mut rng);
                let vz = v_dist.sample(&mut rng);
                for (t, model) in models.iter().enumerate() {
                    pops.iter_mut().for_each(|x| *x = 0.0);
                    seq.accumulate(model.phase(z0, vz), &mut pops, &mut scratch);
                    for (m, p) in pops.iter().enumerate() {
                        sums.sum[t * dim + m] += p;
                        sums.sum_sq[t * dim + m] += p * p;
                    }
                }
            }
            sums
        })
        .collect();
    let mut sum = vec![0.0; width];
    let mut sum_sq = vec![0.0; width];
    for c in &chunks {
        for i in 0..width {
            sum[i] += c.sum[i];
            sum_sq[i] += c.sum_sq[i];
        }
    }
    let nf = n as f64;
    let high_variance = n < MIN_SAMPLES;
    if high_variance {
        log::warn!("Monte Carlo average with only {n} samples");
    }
    Ok((0..models.len())
        .map(|t| {
            let mean: Vec<f64> = (0..dim).map(|m| sum[t * dim + m] / nf).collect();
            let se: Vec<f64> = (0..dim)
                .map(|m| {
                    if n < 2 {
                        return f64::INFINITY;
                    }
                    let mu = mean[m];
                    let var = ((sum_sq[t * dim + m] - nf * mu * mu) / (nf - 1.0)).max(0.0);
                    (var / nf).sqrt()
                })
                .collect();
            EnsembleEstimate {
                populations: Populations::from_raw(mean),
                std_error: Some(se),
                high_variance,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rotations::equilibrium_populations;
    use crate::units::{FieldGradient, MagneticField};
    use proptest::prelude::*;

    fn consts() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    fn spec(t_axial: f64) -> EnsembleSpec {
        EnsembleSpec {
            sigma_z0: 0.73e-3,
            t_axial,
            mass: consts().mass_ne20,
            n_samples: 100_000,
            seed: 7,
        }
    }

    fn gradient(mg_per_mm: f64) -> FieldConfig {
        FieldConfig::default().with_gradient(FieldGradient::from_mg_per_mm(mg_per_mm))
    }

    fn top() -> Initial {
        Initial::Pure(StateVector::basis(5, 0))
    }

    /// Direct matrix-product oracle for the pulse sequences.
    fn oracle(kind: SequenceKind, psi: &StateVector, phi: f64) -> Vec<f64> {
        let sys = SpinSystem::spin2();
        let second = match kind {
            SequenceKind::Ramsey => PI / 2.0,
            SequenceKind::Echo => 1.5 * PI,
        };
        let u = rotation_operator(&sys, RotationAxis::X, Angle::from_radians(second))
            * rotation_operator(&sys, RotationAxis::Z, Angle::from_radians(phi))
            * rotation_operator(&sys, RotationAxis::X, Angle::from_radians(PI / 2.0));
        (u * psi.amplitudes()).iter().map(|c| c.norm_sqr()).collect()
    }

    #[test]
    fn ramsey_phase_values() {
        let c = consts();
        let f = gradient(4.5);
        let phi = phase_ramsey(&f, &c, 0.73e-3, 0.0, 32.5e-6).radians();
        let want = c.gradient_rate(f.b1) * 0.73e-3 * 32.5e-6;
        assert!((phi - want).abs() < 1e-12);
        assert!((phi - 1.41).abs() < 0.02, "{phi}");

        let b0 = FieldConfig::default().with_bias(MagneticField::from_milligauss(50.0), &c);
        let phi = phase_ramsey(&b0, &c, 1e-3, 0.3, 20e-6).radians();
        assert!((phi - c.larmor(b0.b0).rad_per_s() * 20e-6).abs() < 1e-9);

        // Φ(2τ) − 2Φ(τ) = γB₁v_zτ²
        let (vz, tau) = (0.21, 40e-6);
        let d = phase_ramsey(&f, &c, 0.4e-3, vz, 2.0 * tau).radians() - 2.0 * phase_ramsey(&f, &c, 0.4e-3, vz, tau).radians();
        assert!((d - c.gradient_rate(f.b1) * vz * tau * tau).abs() < 1e-12);
    }

    #[test]
    fn echo_phase_values() {
        let c = consts();
        let f = gradient(13.5);
        let g1 = c.gradient_rate(f.b1);
        assert_eq!(phase_echo(&f, &c, 0.5e-3, 0.0, 80e-6, 80e-6).radians(), 0.0);
        let tt = 95e-6;
        let phi = phase_echo(&f, &c, 0.5e-3, 0.3, tt, tt).radians();
        assert!((phi + g1 * 0.3 * tt * tt).abs() < 1e-12);
        let b0 = FieldConfig::default().with_bias(MagneticField::from_milligauss(20.0), &c);
        let phi = phase_echo(&b0, &c, 0.5e-3, 0.3, 30e-6, 50e-6).radians();
        assert!((phi + c.larmor(b0.b0).rad_per_s() * 20e-6).abs() < 1e-9);
    }

    #[test]
    fn sequence_examples() {
        let sys = SpinSystem::spin2();
        let p2 = StateVector::basis(5, 0);
        let p = single_atom_sequence(&sys, &p2, SequenceKind::Ramsey, Angle::from_radians(PI)).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-12);
        let p = single_atom_sequence(&sys, &p2, SequenceKind::Ramsey, Angle::from_radians(2.0 * PI)).unwrap();
        assert!((p[4] - 1.0).abs() < 1e-12);
        let p = single_atom_sequence(&sys, &p2, SequenceKind::Ramsey, Angle::from_radians(0.0)).unwrap();
        assert!((p[4] - 1.0).abs() < 1e-12);
        // D_x(3π/2)·D_x(π/2) = D_x(2π) = 1 on integer spin
        let p = single_atom_sequence(&sys, &p2, SequenceKind::Echo, Angle::from_radians(0.0)).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-12);
        assert_eq!(p.as_slice(), oracle(SequenceKind::Echo, &p2, 0.0).as_slice());
    }

    #[test]
    fn envelope_values() {
        let c = consts();
        let r = ramsey_envelope(&gradient(4.5), &c, &spec(0.2e-3), 32.5e-6);
        assert!((r * std::f64::consts::E - 1.0).abs() < 0.03, "{r}");
        assert_eq!(ramsey_envelope(&gradient(4.5), &c, &spec(0.2e-3), 0.0), 1.0);
        assert_eq!(ramsey_envelope(&gradient(0.0), &c, &spec(0.2e-3), 80e-6), 1.0);

        let e = echo_envelope(&gradient(13.5), &c, &spec(0.2e-3), 95e-6, 95e-6);
        assert!((e - 0.90).abs() < 0.01, "{e}");
        let e = echo_envelope(&gradient(13.5), &c, &spec(0.2e-3), 150e-6, 150e-6);
        assert!((e - 0.50).abs() < 0.02, "{e}");
        assert_eq!(echo_envelope(&gradient(13.5), &c, &spec(0.2e-3), 0.0, 0.0), 1.0);

        // τ̃⁴ law at τ₁ = τ₂
        let g1 = c.gradient_rate(gradient(13.5).b1);
        let sv = c.velocity_variance(0.2e-3, c.mass_ne20);
        let tt: f64 = 120e-6;
        let e = echo_envelope(&gradient(13.5), &c, &spec(0.2e-3), tt, tt);
        assert!((e - (-0.5 * g1 * g1 * sv * tt.powi(4)).exp()).abs() < 1e-14);
    }

    #[test]
    fn echo_unit_contrast_without_motion() {
        let c = consts();
        for b1 in [4.5, 13.5, 50.0] {
            for sz in [0.1e-3, 0.73e-3, 3e-3] {
                let s = EnsembleSpec {
                    sigma_z0: sz,
                    t_axial: 1e-30,
                    ..spec(0.2e-3)
                };
                let e = echo_envelope(&gradient(b1), &c, &s, 200e-6, 200e-6);
                assert!((e - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fourier_reconstructs_sequence() {
        let sys = SpinSystem::spin2();
        let psi = StateVector::normalized(DVector::from_vec(vec![
            C64::new(0.8, 0.1),
            C64::new(0.2, -0.3),
            C64::new(0.1, 0.0),
            C64::new(0.0, 0.2),
            C64::new(-0.1, 0.1),
        ]))
        .unwrap();
        for kind in [SequenceKind::Ramsey, SequenceKind::Echo] {
            let seq = Sequence::pure(&sys, kind, &psi);
            let coeffs = seq.fourier();
            for phi in [0.0, 0.37, 1.9, 4.4, -2.2] {
                let want = oracle(kind, &psi, phi);
                for m in 0..5 {
                    let got: f64 = coeffs
                        .iter()
                        .enumerate()
                        .map(|(i, row)| (row[m] * C64::from_polar(1.0, (i as f64 - 4.0) * phi)).re)
                        .sum();
                    assert!((got - want[m]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn ramsey_harmonics_limited_to_fourth_order() {
        // direct DFT of the single-atom signal over one period of γB₀
        let psi = StateVector::basis(5, 0);
        let n = 64;
        let samples: Vec<Vec<f64>> = (0..n)
            .map(|s| oracle(SequenceKind::Ramsey, &psi, 2.0 * PI * s as f64 / n as f64))
            .collect();
        for m in 0..5 {
            let mut seen_nonzero = false;
            for k in 0..n / 2 {
                let amp: C64 = samples
                    .iter()
                    .enumerate()
                    .map(|(s, p)| C64::from_polar(p[m] / n as f64, -2.0 * PI * (k * s) as f64 / n as f64))
                    .sum();
                if k > 4 {
                    assert!(amp.norm() < 1e-13, "m index {m} harmonic {k}: {}", amp.norm());
                } else if k > 0 && amp.norm() > 1e-6 {
                    seen_nonzero = true;
                }
            }
            assert!(seen_nonzero);
        }
    }

    #[test]
    fn long_ramsey_reaches_equilibrium() {
        let sys = SpinSystem::spin2();
        let e = ensemble_average(
            &sys,
            &gradient(4.5),
            &consts(),
            &spec(0.2e-3),
            &SequenceTiming::ramsey(400e-6),
            &top(),
            AveragingMethod::Analytic,
        )
        .unwrap();
        assert!(e.populations.max_abs_diff(&equilibrium_populations(&sys)) < 1e-6);
    }

    #[test]
    fn zero_time_ramsey_is_pi_pulse() {
        let sys = SpinSystem::spin2();
        let e = ensemble_average(
            &sys,
            &gradient(4.5),
            &consts(),
            &spec(0.2e-3),
            &SequenceTiming::ramsey(0.0),
            &top(),
            AveragingMethod::Analytic,
        )
        .unwrap();
        assert!((e.populations[4] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ramsey_envelope_strictly_decreasing() {
        let c = consts();
        let s = spec(0.2e-3);
        let vals: Vec<f64> = (0..200)
            .map(|k| ramsey_envelope(&gradient(4.5), &c, &s, k as f64 * 0.5e-6))
            .collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]));
    }

    fn mc_vs_analytic(kind: SequenceKind, b1: f64, t_axial: f64, times: &[f64]) {
        let sys = SpinSystem::spin2();
        let timings: Vec<SequenceTiming> = times
            .iter()
            .map(|&t| match kind {
                SequenceKind::Ramsey => SequenceTiming::ramsey(t),
                SequenceKind::Echo => SequenceTiming::echo(t, t),
            })
            .collect();
        let field = gradient(b1).with_bias(MagneticField::from_milligauss(2.0), &consts());
        let run = |m| ensemble_scan(&sys, &field, &consts(), &spec(t_axial), &timings, &top(), m).unwrap();
        let a = run(AveragingMethod::Analytic);
        let mc = run(AveragingMethod::MonteCarlo);
        for (ea, em) in a.iter().zip(&mc) {
            let se = em.std_error.as_ref().unwrap();
            for m in 0..5 {
                let d = (ea.populations[m] - em.populations[m]).abs();
                assert!(d <= 4.0 * se[m] + 1e-12, "{kind:?} m={m}: |Δ|={d} se={}", se[m]);
            }
        }
    }

    #[test]
    fn monte_carlo_agrees_with_analytic() {
        mc_vs_analytic(SequenceKind::Ramsey, 4.5, 0.2e-3, &[10e-6, 20e-6, 30e-6, 40e-6]);
        mc_vs_analytic(SequenceKind::Ramsey, 9.0, 0.5e-3, &[5e-6, 15e-6, 25e-6]);
        mc_vs_analytic(SequenceKind::Echo, 13.5, 0.2e-3, &[50e-6, 95e-6, 150e-6]);
        mc_vs_analytic(SequenceKind::Echo, 6.0, 1.0e-3, &[40e-6, 100e-6, 160e-6]);
    }

    #[test]
    fn monte_carlo_thread_invariant() {
        let sys = SpinSystem::spin2();
        let timings = [SequenceTiming::ramsey(15e-6), SequenceTiming::ramsey(35e-6)];
        let s = EnsembleSpec {
            n_samples: 5000,
            ..spec(0.2e-3)
        };
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    ensemble_scan(&sys, &gradient(4.5), &consts(), &s, &timings, &top(), AveragingMethod::MonteCarlo).unwrap()
                })
        };
        let one = run(1);
        assert_eq!(one, run(3));
        assert_eq!(one, run(8));
    }

    #[test]
    fn small_sample_flagged() {
        let sys = SpinSystem::spin2();
        let s = EnsembleSpec {
            n_samples: 50,
            ..spec(0.2e-3)
        };
        let e = ensemble_average(&sys, &gradient(4.5), &consts(), &s, &SequenceTiming::ramsey(1e-5), &top(), AveragingMethod::MonteCarlo).unwrap();
        assert!(e.high_variance);
    }

    #[test]
    fn mixture_is_weighted_sum() {
        let sys = SpinSystem::spin2();
        let w = Populations::new(vec![0.9, 0.1, 0.0, 0.0, 0.0]).unwrap();
        let t = SequenceTiming::ramsey(12e-6);
        let avg = |init: Initial| {
            ensemble_average(&sys, &gradient(4.5), &consts(), &spec(0.2e-3), &t, &init, AveragingMethod::Analytic)
                .unwrap()
                .populations
        };
        let mix = avg(Initial::Mixture(w));
        let a = avg(Initial::Pure(StateVector::basis(5, 0)));
        let b = avg(Initial::Pure(StateVector::basis(5, 1)));
        for m in 0..5 {
            assert!((mix[m] - (0.9 * a[m] + 0.1 * b[m])).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let sys = SpinSystem::spin2();
        let bad = EnsembleSpec {
            sigma_z0: 0.0,
            ..spec(0.2e-3)
        };
        let r = ensemble_average(&sys, &gradient(4.5), &consts(), &bad, &SequenceTiming::ramsey(1e-5), &top(), AveragingMethod::Analytic);
        assert!(r.is_err());
        let r = ensemble_scan(
            &sys,
            &gradient(4.5),
            &consts(),
            &spec(0.2e-3),
            &[SequenceTiming::ramsey(1e-5), SequenceTiming::echo(1e-5, 1e-5)],
            &top(),
            AveragingMethod::Analytic,
        );
        assert!(r.is_err());
        assert!(SequenceTiming::ramsey(-1.0).validate().is_err());
    }

    proptest! {
        #[test]
        fn sequence_matches_matrix_oracle(phi in -20.0f64..20.0, a in -1.0f64..1.0, b in -1.0f64..1.0, echo in any::<bool>()) {
            let sys = SpinSystem::spin2();
            let psi = StateVector::normalized(DVector::from_vec(vec![
                C64::new(1.0, 0.0), C64::new(a, b), C64::new(b, 0.0), C64::new(0.0, a), C64::new(0.3, 0.0),
            ])).unwrap();
            let kind = if echo { SequenceKind::Echo } else { SequenceKind::Ramsey };
            let got = single_atom_sequence(&sys, &psi, kind, Angle::from_radians(phi)).unwrap();
            let want = oracle(kind, &psi, phi);
            for m in 0..5 {
                prop_assert!((got[m] - want[m]).abs() < 1e-12);
            }
            prop_assert!((got.sum() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn analytic_average_sums_to_one(tau in 0.0f64..300e-6, b1 in 0.0f64..20.0, echo in any::<bool>()) {
            let sys = SpinSystem::spin2();
            let t = if echo { SequenceTiming::echo(tau, tau * 0.8) } else { SequenceTiming::ramsey(tau) };
            let e = ensemble_average(&sys, &gradient(b1), &consts(), &spec(0.2e-3), &t, &top(), AveragingMethod::Analytic).unwrap();
            prop_assert!((e.populations.sum() - 1.0).abs() < 1e-12);
            prop_assert!(e.populations.as_slice().iter().all(|p| *p > -1e-12));
        }
    }
}
