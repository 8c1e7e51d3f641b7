//! Classical torque equation dJ/dt = b(t) × J.
//!
//! `b(t)` is the field vector of the linear Hamiltonian H = b·J, so the
//! expectation value ⟨J⟩ of the quantum solution obeys the same equation.
//! Each step is the exact rotation generated by the fourth-order Magnus
//! vector w = h/2 (b₁ + b₂) + (√3/12) h² (b₂ × b₁), hence |J| is conserved
//! to rounding.

use nalgebra::Vector3;

use super::HamiltonianSpec;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassicalSpin {
    pub jx: f64,
    pub jy: f64,
    pub jz: f64,
}

impl ClassicalSpin {
    pub fn new(jx: f64, jy: f64, jz: f64) -> Self {
        ClassicalSpin { jx, jy, jz }
    }

    pub fn norm(&self) -> f64 {
        self.vector().norm()
    }

    fn vector(&self) -> Vector3<f64> {
        Vector3::new(self.jx, self.jy, self.jz)
    }

    fn from_vector(v: Vector3<f64>) -> Self {
        ClassicalSpin::new(v.x, v.y, v.z)
    }
}

fn rodrigues(x: Vector3<f64>, w: Vector3<f64>) -> Vector3<f64> {
    let angle = w.norm();
    if angle == 0.0 {
        return x;
    }
    let k = w / angle;
    x * angle.cos() + k.cross(&x) * angle.sin() + k * k.dot(&x) * (1.0 - angle.cos())
}

fn run(spec: &HamiltonianSpec, j0: Vector3<f64>, t0: f64, t1: f64, n: usize) -> Vector3<f64> {
    let h = (t1 - t0) / n as f64;
    let off = 3f64.sqrt() / 6.0;
    let field = |t: f64| Vector3::from(spec.field_vector(t).expect("linear kind"));
    let mut j = j0;
    for k in 0..n {
        let t = t0 + k as f64 * h;
        let b1 = field(t + (0.5 - off) * h);
        let b2 = field(t + (0.5 + off) * h);
        let w = (b1 + b2) * (h / 2.0) + b2.cross(&b1) * (3f64.sqrt() / 12.0 * h * h);
        j = rodrigues(j, w);
    }
    j
}

/// Integrates the torque equation from `t0` to `t1`, halving the step until
/// no component changes by more than `tol`·|J|.
///
/// Only Hamiltonians linear in J have a classical counterpart; light-shifted
/// specs are rejected.
pub fn evolve_classical(spin: ClassicalSpin, spec: &HamiltonianSpec, t0: f64, t1: f64, tol: f64) -> Result<ClassicalSpin> {
    if spec.field_vector(t0).is_none() {
        return Err(Error::param("spec", "light-shifted Hamiltonians have no classical spin analogue"));
    }
    if t1 < t0 {
        return Err(Error::param("t1", "must not precede t0"));
    }
    if !(tol > 0.0) {
        return Err(Error::param("tol", "must be positive"));
    }
    let j0 = spin.vector();
    if t1 == t0 {
        return Ok(spin);
    }
    let scale = j0.norm().max(1e-300);
    let mut n = ((t1 - t0) / spec.max_step(1.0)).ceil().max(1.0) as usize;
    let mut prev = run(spec, j0, t0, t1, n);
    loop {
        n *= 2;
        if n > 1 << 26 {
            return Err(Error::StepUnderflow { tol, steps: n });
        }
        let cur = run(spec, j0, t0, t1, n);
        if !cur.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("classical spin"));
        }
        if (cur - prev).amax() / scale < tol {
            return Ok(ClassicalSpin::from_vector(cur));
        }
        prev = cur;
    }
}
