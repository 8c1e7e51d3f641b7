//! Exact spin rotations and closed-form rotation populations.
//!
//! `D_axis(θ) = exp(−iθ J_axis)`. Rotations about y use the Wigner small-d
//! formula; rotations about x are obtained from it by conjugating with
//! `D_z(∓π/2)`; rotations about z are diagonal. With this convention a
//! positive rotation about x maps ⟨J⟩ = (0, 0, J) to (0, −J sin θ, J cos θ).

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::spin::{Populations, SpinSystem, StateVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RotationAxis {
    X,
    Y,
    Z,
}

/// Rotation angle in radians.
#[derive(Clone, Copy, Debug, Default, PartialEq, PartialOrd)]
pub struct Angle(f64);

impl Angle {
    pub const fn from_radians(value: f64) -> Self {
        Angle(value)
    }

    pub fn radians(self) -> f64 {
        self.0
    }
}

impl From<f64> for Angle {
    fn from(v: f64) -> Self {
        Angle(v)
    }
}

fn factorial(n: i64) -> f64 {
    debug_assert!(n >= 0);
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Wigner small-d matrix element d^j_{m'm}(β) = ⟨j m'| exp(−iβJ_y) |j m⟩,
/// with all quantum numbers given doubled.
fn wigner_small_d(twice_j: i64, twice_mp: i64, twice_m: i64, beta: f64) -> f64 {
    let jpmp = (twice_j + twice_mp) / 2;
    let jmmp = (twice_j - twice_mp) / 2;
    let jpm = (twice_j + twice_m) / 2;
    let jmm = (twice_j - twice_m) / 2;
    let mp_minus_m = (twice_mp - twice_m) / 2;
    let prefactor = (factorial(jpmp) * factorial(jmmp) * factorial(jpm) * factorial(jmm)).sqrt();
    let (c, s) = ((beta / 2.0).cos(), (beta / 2.0).sin());
    let s_min = 0.max(-mp_minus_m);
    let s_max = jpm.min(jmmp);
    let mut sum = 0.0;
    for k in s_min..=s_max {
        let sign = if (mp_minus_m + k).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        let denom = factorial(jpm - k) * factorial(k) * factorial(mp_minus_m + k) * factorial(jmmp - k);
        // 2j + m − m' − 2s
        let cos_pow = jpm + jmmp - 2 * k;
        let sin_pow = mp_minus_m + 2 * k;
        sum += sign / denom * c.powi(cos_pow as i32) * s.powi(sin_pow as i32);
    }
    prefactor * sum
}

fn rotation_y(sys: &SpinSystem, beta: f64) -> DMatrix<C64> {
    let tj = sys.twice_j() as i64;
    let dim = sys.dim();
    DMatrix::from_fn(dim, dim, |row, col| {
        let twice_mp = tj - 2 * row as i64;
        let twice_m = tj - 2 * col as i64;
        C64::new(wigner_small_d(tj, twice_mp, twice_m, beta), 0.0)
    })
}

fn rotation_z(sys: &SpinSystem, alpha: f64) -> DMatrix<C64> {
    let phases: Vec<C64> = sys
        .m_values()
        .into_iter()
        .map(|m| C64::from_polar(1.0, -alpha * m))
        .collect();
    DMatrix::from_diagonal(&nalgebra::DVector::from_vec(phases))
}

/// exp(−i θ n̂·J) for n̂ one of the frame axes.
pub fn rotation_operator(sys: &SpinSystem, axis: RotationAxis, angle: Angle) -> DMatrix<C64> {
    let theta = angle.radians();
    match axis {
        RotationAxis::Z => rotation_z(sys, theta),
        RotationAxis::Y => rotation_y(sys, theta),
        RotationAxis::X => {
            // D_x(θ) = D_z(−π/2) D_y(θ) D_z(π/2)
            let u = rotation_z(sys, -PI / 2.0);
            let ud = rotation_z(sys, PI / 2.0);
            u * rotation_y(sys, theta) * ud
        }
    }
}

/// Rotates `state` and returns the new state.
pub fn rotate(sys: &SpinSystem, state: &StateVector, axis: RotationAxis, angle: Angle) -> Result<StateVector> {
    if state.dim() != sys.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            found: state.dim(),
        });
    }
    Ok(StateVector::from_amplitudes(
        rotation_operator(sys, axis, angle) * state.amplitudes(),
    ))
}

/// Closed-form populations after rotating |m₀⟩ (spin 2) by θ about x̃.
///
/// Tabulated for m₀ ∈ {+2, +1, 0}; m₀ ∈ {−1, −2} follow from the reflection
/// symmetry p_m(−m₀, θ) = p_{−m}(m₀, θ).
pub fn table1_populations(initial_m: i32, theta: Angle) -> Result<Populations> {
    let th = theta.radians();
    let (c, s) = ((th / 2.0).cos(), (th / 2.0).sin());
    let (cf, sf) = (th.cos(), th.sin());
    let column = match initial_m.abs() {
        2 => [
            c.powi(8),
            4.0 * c.powi(6) * s.powi(2),
            3.0 / 8.0 * sf.powi(4),
            4.0 * c.powi(2) * s.powi(6),
            s.powi(8),
        ],
        1 => [
            4.0 * c.powi(6) * s.powi(2),
            c.powi(4) * (2.0 * cf - 1.0).powi(2),
            1.5 * cf.powi(2) * sf.powi(2),
            s.powi(4) * (2.0 * cf + 1.0).powi(2),
            4.0 * c.powi(2) * s.powi(6),
        ],
        0 => {
            let p0 = (1.0 + 3.0 * (2.0 * th).cos()).powi(2) / 16.0;
            let p1 = 1.5 * cf.powi(2) * sf.powi(2);
            let p2 = 3.0 / 8.0 * sf.powi(4);
            [p2, p1, p0, p1, p2]
        }
        _ => {
            return Err(Error::param(
                "initial_m",
                format!("{initial_m} is not a spin-2 projection"),
            ))
        }
    };
    let mut p = column.to_vec();
    if initial_m < 0 {
        p.reverse();
    }
    Ok(Populations::from_raw(p))
}

/// Two-level Rabi formula p₊₂(t) = p₊₂(0) cos²(Ωt/2) + p₊₁(0) sin²(Ωt/2).
///
/// Returns `(p₊₂, p₊₁)` with p₊₁ = p₊₂(0) + p₊₁(0) − p₊₂(t).
pub fn two_level_population(
    t: f64,
    omega: crate::units::AngularFrequency,
    p2_0: f64,
    p1_0: f64,
) -> Result<(f64, f64)> {
    if p2_0 < 0.0 || p1_0 < 0.0 {
        return Err(Error::param("initial populations", "must be non-negative"));
    }
    if p2_0 + p1_0 > 1.0 + 1e-12 {
        return Err(Error::param("initial populations", "sum exceeds 1"));
    }
    let half = omega.rad_per_s() * t / 2.0;
    let p2 = p2_0 * half.cos().powi(2) + p1_0 * half.sin().powi(2);
    Ok((p2, p2_0 + p1_0 - p2))
}

/// Populations of D_x(π/2) D_z(Φ) D_x(π/2) |ψ₀⟩.
pub(crate) fn ramsey_amplitudes(
    sys: &SpinSystem,
    half_pi: &DMatrix<C64>,
    initial: &StateVector,
    phi: f64,
) -> Vec<f64> {
    let mid = half_pi * initial.amplitudes();
    let phased = rotation_z(sys, phi) * mid;
    let out = half_pi * phased;
    out.iter().map(|c| c.norm_sqr()).collect()
}

/// Populations reached by a Ramsey sequence on |+J⟩ when the free-evolution
/// phase is uniformly distributed.
///
/// For spin 2 this is (35/128, 5/32, 9/64, 5/32, 35/128). For other J the
/// populations are a trigonometric polynomial of degree 2J in Φ, so the
/// average over 4J+2 equally spaced phases is exact.
pub fn equilibrium_populations(sys: &SpinSystem) -> Populations {
    if sys.twice_j() == 4 {
        return Populations::from_raw(vec![
            35.0 / 128.0,
            5.0 / 32.0,
            9.0 / 64.0,
            5.0 / 32.0,
            35.0 / 128.0,
        ]);
    }
    let n = 2 * sys.twice_j() as usize + 2;
    let half_pi = rotation_operator(sys, RotationAxis::X, Angle(PI / 2.0));
    let top = StateVector::basis(sys.dim(), 0);
    let mut acc = vec![0.0; sys.dim()];
    for k in 0..n {
        let phi = 2.0 * PI * k as f64 / n as f64;
        for (a, p) in acc.iter_mut().zip(ramsey_amplitudes(sys, &half_pi, &top, phi)) {
            *a += p / n as f64;
        }
    }
    Populations::from_raw(acc)
}
