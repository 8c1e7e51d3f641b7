//! AC-Stark shifts of the J = 2 ground manifold from a far-detuned σ⁺ beam
//! on a J = 2 → J' = 1 transition.
//!
//! Adiabatic elimination of the excited level gives a static diagonal shift
//! |c_m|² Ω_L² / (4Δ) on every sublevel with a σ⁺ partner (m' = m + 1 ≤ 1),
//! i.e. m ∈ {0, −1, −2}; |+2⟩ and |+1⟩ are untouched.

use crate::error::{Error, Result};
use crate::stirap::clebsch_gordan;
use crate::units::AngularFrequency;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Polarization {
    SigmaPlus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Transition {
    /// J = 2 → J' = 1
    J2ToJ1,
}

/// Squared coupling factors |⟨2 m; 1 1 | 1 m+1⟩|² in basis order (+2 … −2).
fn sigma_plus_weights() -> [f64; 5] {
    let mut w = [0.0; 5];
    for (k, slot) in w.iter_mut().enumerate() {
        let m = 2.0 - k as f64;
        *slot = clebsch_gordan(2.0, m, 1.0, 1.0, 1.0, m + 1.0).powi(2);
    }
    w
}

/// Light shifts for Rabi frequency `omega_light` and detuning `detuning`.
pub fn lightshift_vector(
    omega_light: AngularFrequency,
    detuning: AngularFrequency,
    polarization: Polarization,
    transition: Transition,
) -> Result<Vec<AngularFrequency>> {
    let (Polarization::SigmaPlus, Transition::J2ToJ1) = (polarization, transition);
    let d = detuning.rad_per_s();
    if d == 0.0 || !d.is_finite() {
        return Err(Error::param("detuning", "must be finite and non-zero"));
    }
    let ol = omega_light.rad_per_s();
    Ok(sigma_plus_weights()
        .iter()
        .map(|w| AngularFrequency::from_rad_per_s(w * ol * ol / (4.0 * d)))
        .collect())
}

/// Shift pattern normalized so the |0⟩ shift equals `shift_m0` (signed).
pub fn lightshift_profile(shift_m0: AngularFrequency) -> Vec<AngularFrequency> {
    let w = sigma_plus_weights();
    w.iter().map(|x| shift_m0 * (x / w[2])).collect()
}
