//! Time evolution of a spin in a bias field plus linearly polarized RF.
//!
//! Hamiltonians (rad/s, ħ = 1), with ω₀ the Larmor frequency, Ω the Rabi
//! frequency and ω the RF frequency:
//!
//! * `LabFull`: ω₀ J_z + Ω cos(ωt) J_x
//! * `RotFull`: (ω₀−ω) J_z + Ω/2 (1 + cos 2ωt) J_x − Ω/2 sin(2ωt) J_y
//! * `RotRwa`: (ω₀−ω) J_z + Ω/2 J_x
//! * `LabWithLightShift`: `LabFull` + diag(light shifts)
//!
//! The rotating frame turns about z at ω: |ψ_lab⟩ = exp(−iωt J_z) |ψ_rot⟩.
//! Populations are invariant under this transform.

mod classical;
mod integrator;
mod lightshift;

pub use classical::{evolve_classical, ClassicalSpin};
pub use integrator::{integrate, integrate_state, Generator};
pub use lightshift::{lightshift_profile, lightshift_vector, Polarization, Transition};


use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};
use crate::rotations::{rotation_operator, Angle, RotationAxis};
use crate::spin::{Populations, SpinSystem, StateVector};
use crate::units::{AngularFrequency, FieldGradient, MagneticField};

/// Static and RF field parameters.
///
/// `b0`/`b1` enter the free-precession phases of Ramsey and echo sequences;
/// `omega0` is the Larmor frequency used by the RF propagator. They are kept
/// independent because measured runs quote them separately;
/// [`FieldConfig::with_bias`] sets both consistently.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FieldConfig {
    pub b0: MagneticField,
    pub b1: FieldGradient,
    pub omega0: AngularFrequency,
    pub omega_rabi: AngularFrequency,
    pub omega_rf: AngularFrequency,
}

impl FieldConfig {
    /// Resonant drive (ω = ω₀) with the given Larmor and Rabi frequencies.
    pub fn resonant(omega0: AngularFrequency, omega_rabi: AngularFrequency) -> Self {
        FieldConfig {
            omega0,
            omega_rabi,
            omega_rf: omega0,
            ..Default::default()
        }
    }

    /// Sets B₀ and ω₀ = γB₀.
    pub fn with_bias(mut self, b0: MagneticField, consts: &PhysicalConstants) -> Self {
        self.b0 = b0;
        self.omega0 = consts.larmor(b0);
        self
    }

    pub fn with_gradient(mut self, b1: FieldGradient) -> Self {
        self.b1 = b1;
        self
    }

    /// Sets Ω = γ B_RF.
    pub fn with_rf_amplitude(mut self, b_rf: MagneticField, consts: &PhysicalConstants) -> Self {
        self.omega_rabi = consts.larmor(b_rf);
        self
    }

    pub fn with_rf_frequency(mut self, omega_rf: AngularFrequency) -> Self {
        self.omega_rf = omega_rf;
        self
    }

    /// Checks that Ω agrees with γ B_RF for a separately quoted amplitude.
    pub fn check_rf_amplitude(&self, b_rf: MagneticField, consts: &PhysicalConstants) -> Result<()> {
        let expected = consts.larmor(b_rf).rad_per_s();
        let got = self.omega_rabi.rad_per_s();
        if (expected - got).abs() > 1e-9 * expected.abs().max(got.abs()).max(1.0) {
            return Err(Error::param(
                "omega_rabi",
                format!("{got} rad/s inconsistent with γ·B_RF = {expected} rad/s"),
            ));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let values = [
            self.b0.tesla(),
            self.b1.tesla_per_m(),
            self.omega0.rad_per_s(),
            self.omega_rabi.rad_per_s(),
            self.omega_rf.rad_per_s(),
        ];
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field configuration"));
        }
        if self.b0.tesla() < 0.0 {
            return Err(Error::param("b0", "must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum HamiltonianKind {
    LabFull,
    RotFull,
    RotRwa,
    LabWithLightShift,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianSpec {
    kind: HamiltonianKind,
    field: FieldConfig,
    light_shifts: Option<Vec<AngularFrequency>>,
}

impl HamiltonianSpec {
    pub fn new(kind: HamiltonianKind, field: FieldConfig) -> Result<Self> {
        field.validate()?;
        Ok(HamiltonianSpec {
            kind,
            field,
            light_shifts: None,
        })
    }

    /// Lab-frame Hamiltonian with static diagonal AC-Stark shifts.
    pub fn with_light_shifts(field: FieldConfig, shifts: Vec<AngularFrequency>) -> Result<Self> {
        field.validate()?;
        if shifts.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("light shifts"));
        }
        Ok(HamiltonianSpec {
            kind: HamiltonianKind::LabWithLightShift,
            field,
            light_shifts: Some(shifts),
        })
    }

    pub fn kind(&self) -> HamiltonianKind {
        self.kind
    }

    pub fn field(&self) -> &FieldConfig {
        &self.field
    }

    pub fn light_shifts(&self) -> Option<&[AngularFrequency]> {
        self.light_shifts.as_deref()
    }

    /// Field vector b(t) with H = b·J, for the kinds linear in J.
    pub(crate) fn field_vector(&self, t: f64) -> Option<[f64; 3]> {
        let w0 = self.field.omega0.rad_per_s();
        let om = self.field.omega_rabi.rad_per_s();
        let w = self.field.omega_rf.rad_per_s();
        match self.kind {
            HamiltonianKind::LabFull => Some([om * (w * t).cos(), 0.0, w0]),
            HamiltonianKind::RotFull => Some([
                om / 2.0 * (1.0 + (2.0 * w * t).cos()),
                -om / 2.0 * (2.0 * w * t).sin(),
                w0 - w,
            ]),
            HamiltonianKind::RotRwa => Some([om / 2.0, 0.0, w0 - w]),
            HamiltonianKind::LabWithLightShift => None,
        }
    }

    fn is_time_independent(&self) -> bool {
        self.kind == HamiltonianKind::RotRwa || self.field.omega_rabi.rad_per_s() == 0.0
    }

    /// Step bound: a hundredth of the RF and Rabi periods, and 0.1 rad of
    /// phase at the largest energy scale.
    fn max_step(&self, j: f64) -> f64 {
        let w = self.field.omega_rf.rad_per_s().abs();
        let om = self.field.omega_rabi.rad_per_s().abs();
        let shift = self
            .light_shifts
            .iter()
            .flatten()
            .map(|s| s.rad_per_s().abs())
            .fold(0.0, f64::max);
        let scale = j * (self.field.omega0.rad_per_s().abs() + om) + shift + w;
        let mut h = f64::INFINITY;
        if w > 0.0 {
            h = h.min(0.01 * TAU / w);
        }
        if om > 0.0 {
            h = h.min(0.01 * TAU / om);
        }
        if scale > 0.0 {
            h = h.min(0.1 / scale);
        }
        if h.is_finite() {
            h
        } else {
            1.0
        }
    }
}

/// A [`HamiltonianSpec`] bound to a concrete spin system.
pub struct SpinHamiltonian {
    sys: SpinSystem,
    spec: HamiltonianSpec,
    shifts: Option<DMatrix<C64>>,
}

impl SpinHamiltonian {
    pub fn new(sys: SpinSystem, spec: HamiltonianSpec) -> Result<Self> {
        let shifts = match spec.light_shifts() {
            Some(s) => {
                if s.len() != sys.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: sys.dim(),
                        found: s.len(),
                    });
                }
                let diag = nalgebra::DVector::from_iterator(
                    s.len(),
                    s.iter().map(|x| C64::new(x.rad_per_s(), 0.0)),
                );
                Some(DMatrix::from_diagonal(&diag))
            }
            None => None,
        };
        Ok(SpinHamiltonian { sys, spec, shifts })
    }

    pub fn system(&self) -> &SpinSystem {
        &self.sys
    }
}

impl Generator for SpinHamiltonian {
    fn dim(&self) -> usize {
        self.sys.dim()
    }

    fn hamiltonian(&self, t: f64) -> DMatrix<C64> {
        let f = &self.spec.field;
        let w0 = f.omega0.rad_per_s();
        let om = f.omega_rabi.rad_per_s();
        let w = f.omega_rf.rad_per_s();
        match self.spec.kind {
            HamiltonianKind::LabWithLightShift => {
                let mut h = self.sys.jz() * C64::new(w0, 0.0) + self.sys.jx() * C64::new(om * (w * t).cos(), 0.0);
                if let Some(s) = &self.shifts {
                    h += s;
                }
                h
            }
            _ => {
                let [bx, by, bz] = self.spec.field_vector(t).expect("linear kind");
                self.sys.jx() * C64::new(bx, 0.0) + self.sys.jy() * C64::new(by, 0.0) + self.sys.jz() * C64::new(bz, 0.0)
            }
        }
    }

    fn is_time_independent(&self) -> bool {
        self.spec.is_time_independent()
    }

    fn max_step(&self) -> f64 {
        self.spec.max_step(self.sys.j())
    }
}

fn system_for(dim: usize) -> Result<SpinSystem> {
    if dim < 2 {
        return Err(Error::param("state", "dimension must be at least 2"));
    }
    SpinSystem::new((dim - 1) as f64 / 2.0)
}

/// Evolves `state` from `t0` to `t1` (seconds).
///
/// The step is halved until populations change by less than `tol`.
pub fn evolve_state(state: &StateVector, spec: &HamiltonianSpec, t0: f64, t1: f64, tol: f64) -> Result<StateVector> {
    if t1 < t0 {
        return Err(Error::param("t1", "must not precede t0"));
    }
    let mut trace = evolve_trace(state, spec, &[t0, t1], tol)?;
    Ok(trace.pop().expect("two samples"))
}

/// Evolves `state` through every time in `times` (non-decreasing, seconds).
pub fn evolve_trace(state: &StateVector, spec: &HamiltonianSpec, times: &[f64], tol: f64) -> Result<Vec<StateVector>> {
    let gen = SpinHamiltonian::new(system_for(state.dim())?, spec.clone())?;
    Ok(integrate_state(&gen, state.amplitudes(), times, tol)?
        .into_iter()
        .map(StateVector::from_amplitudes)
        .collect())
}

/// Full propagator U(t, t₀) at every sample time for a spin-`j` system.
pub fn propagator_trace(sys: &SpinSystem, spec: &HamiltonianSpec, times: &[f64], tol: f64) -> Result<Vec<DMatrix<C64>>> {
    let gen = SpinHamiltonian::new(sys.clone(), spec.clone())?;
    let id = DMatrix::identity(sys.dim(), sys.dim());
    integrate(&gen, &id, times, tol)
}

/// Populations of an incoherent mixture of basis states with weights
/// `initial`, propagated through `times`.
pub fn mixture_trace(
    sys: &SpinSystem,
    spec: &HamiltonianSpec,
    initial: &Populations,
    times: &[f64],
    tol: f64,
) -> Result<Vec<Populations>> {
    if initial.len() != sys.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            found: initial.len(),
        });
    }
    let us = propagator_trace(sys, spec, times, tol)?;
    Ok(us.iter().map(|u| mixture_populations(u, initial)).collect())
}

/// p_m = Σ_k w_k |U_{m,k}|².
pub fn mixture_populations(u: &DMatrix<C64>, weights: &Populations) -> Populations {
    let p = (0..u.nrows())
        .map(|m| {
            (0..u.ncols())
                .map(|k| weights[k] * u[(m, k)].norm_sqr())
                .sum::<f64>()
        })
        .collect();
    Populations::from_raw(p)
}

/// |ψ_lab(t)⟩ = exp(−iωt J_z) |ψ_rot(t)⟩.
pub fn to_lab_frame(sys: &SpinSystem, rotating: &StateVector, t: f64, omega_rf: AngularFrequency) -> StateVector {
    let u = rotation_operator(sys, RotationAxis::Z, Angle::from_radians(omega_rf.rad_per_s() * t));
    StateVector::from_amplitudes(u * rotating.amplitudes())
}

/// Inverse of [`to_lab_frame`].
pub fn to_rotating_frame(sys: &SpinSystem, lab: &StateVector, t: f64, omega_rf: AngularFrequency) -> StateVector {
    let u = rotation_operator(sys, RotationAxis::Z, Angle::from_radians(-omega_rf.rad_per_s() * t));
    StateVector::from_amplitudes(u * lab.amplitudes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rotations::table1_populations;
    use std::f64::consts::PI;

    fn top() -> StateVector {
        StateVector::basis(5, 0)
    }

    #[test]
    fn zero_rabi_leaves_eigenstate() {
        let field = FieldConfig::resonant(AngularFrequency::from_khz(800.0), AngularFrequency::ZERO);
        let spec = HamiltonianSpec::new(HamiltonianKind::LabFull, field).unwrap();
        let out = evolve_state(&top(), &spec, 0.0, 37e-6, 1e-10).unwrap();
        let p = out.populations().unwrap();
        assert!((p[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rwa_pi_pulse_inverts() {
        let om = AngularFrequency::from_khz(95.0);
        let field = FieldConfig::resonant(AngularFrequency::from_khz(800.0), om);
        let spec = HamiltonianSpec::new(HamiltonianKind::RotRwa, field).unwrap();
        // θ = Ωt/2 = π
        let t = 2.0 * PI / om.rad_per_s();
        assert!((t - 10.526e-6).abs() < 1e-9);
        let p = evolve_state(&top(), &spec, 0.0, t, 1e-10).unwrap().populations().unwrap();
        assert!((p[4] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn rwa_matches_table_for_all_initial_states() {
        let om = AngularFrequency::from_khz(95.0);
        let spec = HamiltonianSpec::new(
            HamiltonianKind::RotRwa,
            FieldConfig::resonant(AngularFrequency::from_khz(800.0), om),
        )
        .unwrap();
        let times: Vec<f64> = (0..50).map(|k| k as f64 * 0.5e-6).collect();
        let us = propagator_trace(&SpinSystem::spin2(), &spec, &times, 1e-10).unwrap();
        for (t, u) in times.iter().zip(&us) {
            for (col, m0) in [2, 1, 0, -1, -2].into_iter().enumerate() {
                let closed = table1_populations(m0, Angle::from_radians(om.rad_per_s() * t / 2.0)).unwrap();
                for row in 0..5 {
                    assert!((u[(row, col)].norm_sqr() - closed[row]).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn lab_and_rotating_agree_after_frame_transform() {
        let field = FieldConfig::resonant(AngularFrequency::from_khz(242.0), AngularFrequency::from_khz(160.0));
        let lab = HamiltonianSpec::new(HamiltonianKind::LabFull, field).unwrap();
        let rot = HamiltonianSpec::new(HamiltonianKind::RotFull, field).unwrap();
        let sys = SpinSystem::spin2();
        let psi0 = StateVector::normalized(nalgebra::DVector::from_vec(vec![
            C64::new(0.93f64.sqrt(), 0.0),
            C64::new(0.07f64.sqrt(), 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
        ]))
        .unwrap();
        let times: Vec<f64> = (0..=20).map(|k| k as f64 * 0.5e-6).collect();
        let a = evolve_trace(&psi0, &lab, &times, 1e-10).unwrap();
        let b = evolve_trace(&psi0, &rot, &times, 1e-10).unwrap();
        for ((t, la), ro) in times.iter().zip(&a).zip(&b) {
            let back = to_lab_frame(&sys, ro, *t, field.omega_rf);
            assert!((la.amplitudes() - back.amplitudes()).norm() < 1e-6);
            let rt = to_rotating_frame(&sys, &back, *t, field.omega_rf);
            assert!((rt.amplitudes() - ro.amplitudes()).norm() < 1e-12);
        }
    }

    #[test]
    fn norm_preserved_and_converged() {
        let field = FieldConfig::resonant(AngularFrequency::from_khz(242.0), AngularFrequency::from_khz(160.0));
        let spec = HamiltonianSpec::new(HamiltonianKind::LabFull, field).unwrap();
        let out = evolve_state(&top(), &spec, 0.0, 25e-6, 1e-8).unwrap();
        assert!((out.norm_sqr() - 1.0).abs() < 1e-9);
        // a much tighter tolerance moves populations by less than the looser one
        let fine = evolve_state(&top(), &spec, 0.0, 25e-6, 1e-11).unwrap();
        let d = out.populations().unwrap().max_abs_diff(&fine.populations().unwrap());
        assert!(d < 1e-8, "{d}");
    }

    #[test]
    fn rejects_reversed_interval_and_bad_shifts() {
        let field = FieldConfig::resonant(AngularFrequency::from_khz(100.0), AngularFrequency::from_khz(10.0));
        let spec = HamiltonianSpec::new(HamiltonianKind::LabFull, field).unwrap();
        assert!(evolve_state(&top(), &spec, 1e-6, 0.0, 1e-8).is_err());
        let bad = HamiltonianSpec::with_light_shifts(field, vec![AngularFrequency::ZERO; 3]).unwrap();
        assert!(matches!(
            evolve_state(&top(), &bad, 0.0, 1e-6, 1e-8),
            Err(Error::DimensionMismatch { .. })
        ));
        let nan = FieldConfig::resonant(AngularFrequency::from_rad_per_s(f64::NAN), AngularFrequency::ZERO);
        assert!(HamiltonianSpec::new(HamiltonianKind::LabFull, nan).is_err());
    }

    #[test]
    fn rf_amplitude_consistency() {
        let c = PhysicalConstants::default();
        let b_rf = MagneticField::from_milligauss(45.0);
        let f = FieldConfig::default().with_rf_amplitude(b_rf, &c);
        assert!(f.check_rf_amplitude(b_rf, &c).is_ok());
        let g = FieldConfig {
            omega_rabi: AngularFrequency::from_khz(1.0),
            ..f
        };
        assert!(g.check_rf_amplitude(b_rf, &c).is_err());
    }
}
