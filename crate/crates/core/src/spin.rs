//! Spin systems, pure states and measured populations.
//!
//! The basis order is m = +J, J−1, …, −J everywhere: index `k` holds
//! m = J − k.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Tolerance on Σ|c|² accepted by [`populations`].
pub const NORM_TOLERANCE: f64 = 1e-6;

/// Angular momentum J and its (2J+1)-dimensional operator matrices in units of ħ.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinSystem {
    twice_j: u32,
    jx: DMatrix<C64>,
    jy: DMatrix<C64>,
    jz: DMatrix<C64>,
}

/// Build the spin-`j` matrices. `j` must be a positive half-integer.
pub fn build_spin_system(j: f64) -> Result<SpinSystem> {
    SpinSystem::new(j)
}

impl SpinSystem {
    pub fn new(j: f64) -> Result<Self> {
        let twice = 2.0 * j;
        if !twice.is_finite() || twice < 1.0 || (twice - twice.round()).abs() > 1e-12 {
            return Err(Error::InvalidSpin(j));
        }
        Ok(Self::from_twice_j(twice.round() as u32))
    }

    /// The spin-2 system of the ³P₂ level.
    pub fn spin2() -> Self {
        Self::from_twice_j(4)
    }

    fn from_twice_j(twice_j: u32) -> Self {
        let dim = twice_j as usize + 1;
        let j = twice_j as f64 / 2.0;
        let mut jp = DMatrix::<C64>::zeros(dim, dim);
        let mut jz = DMatrix::<C64>::zeros(dim, dim);
        for k in 0..dim {
            let m = j - k as f64;
            jz[(k, k)] = C64::new(m, 0.0);
            // J+ |m⟩ = √(j(j+1) − m(m+1)) |m+1⟩, and |m+1⟩ sits at index k−1
            if k > 0 {
                jp[(k - 1, k)] = C64::new((j * (j + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
            }
        }
        let jm = jp.adjoint();
        let jx = (&jp + &jm) * C64::new(0.5, 0.0);
        let jy = (&jp - &jm) * C64::new(0.0, -0.5);
        SpinSystem {
            twice_j,
            jx,
            jy,
            jz,
        }
    }

    pub fn j(&self) -> f64 {
        self.twice_j as f64 / 2.0
    }

    pub fn twice_j(&self) -> u32 {
        self.twice_j
    }

    pub fn dim(&self) -> usize {
        self.twice_j as usize + 1
    }

    pub fn jx(&self) -> &DMatrix<C64> {
        &self.jx
    }

    pub fn jy(&self) -> &DMatrix<C64> {
        &self.jy
    }

    pub fn jz(&self) -> &DMatrix<C64> {
        &self.jz
    }

    /// Magnetic quantum numbers in basis order.
    pub fn m_values(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| self.j() - k as f64).collect()
    }

    /// Basis index of `m`, if `m` belongs to this multiplet.
    pub fn index_of(&self, m: f64) -> Option<usize> {
        let k = self.j() - m;
        if k < -1e-9 || (k - k.round()).abs() > 1e-9 {
            return None;
        }
        let k = k.round() as usize;
        (k < self.dim()).then_some(k)
    }
}

/// Pure state over the Zeeman basis.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amplitudes: DVector<C64>,
}

impl StateVector {
    /// Normalizes the given amplitudes; fails on a zero or non-finite vector.
    pub fn normalized(amplitudes: DVector<C64>) -> Result<Self> {
        let n = amplitudes.norm();
        if !n.is_finite() {
            return Err(Error::NonFinite("state amplitudes"));
        }
        if n == 0.0 {
            return Err(Error::NotNormalized { norm_sqr: 0.0 });
        }
        Ok(StateVector {
            amplitudes: amplitudes / C64::new(n, 0.0),
        })
    }

    /// Wraps amplitudes as-is. Used for intermediate results whose norm is
    /// meaningful (lossy propagation).
    pub fn from_amplitudes(amplitudes: DVector<C64>) -> Self {
        StateVector { amplitudes }
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut a = DVector::zeros(dim);
        a[index] = C64::new(1.0, 0.0);
        StateVector { amplitudes: a }
    }

    /// The eigenstate |m⟩ of `sys`.
    pub fn eigenstate(sys: &SpinSystem, m: f64) -> Result<Self> {
        let k = sys
            .index_of(m)
            .ok_or_else(|| Error::param("m", format!("{m} is not a projection of j = {}", sys.j())))?;
        Ok(Self::basis(sys.dim(), k))
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> DVector<C64> {
        self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.norm_squared()
    }

    /// ⟨ψ|A|ψ⟩ for a Hermitian operator.
    pub fn expectation(&self, op: &DMatrix<C64>) -> f64 {
        self.amplitudes.dotc(&(op * &self.amplitudes)).re
    }

    pub fn populations(&self) -> Result<Populations> {
        populations(self)
    }
}

/// Relative populations p_m = |⟨m|ψ⟩|².
#[derive(Clone, Debug, PartialEq)]
pub struct Populations {
    p: Vec<f64>,
}

/// p_m = |c_m|². Errors when |Σ|c|² − 1| exceeds [`NORM_TOLERANCE`].
pub fn populations(state: &StateVector) -> Result<Populations> {
    let norm_sqr = state.norm_sqr();
    if !norm_sqr.is_finite() {
        return Err(Error::NonFinite("state amplitudes"));
    }
    if (norm_sqr - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::NotNormalized { norm_sqr });
    }
    let p = state.amplitudes.iter().map(|c| c.norm_sqr() / norm_sqr).collect();
    Ok(Populations { p })
}

impl Populations {
    /// Validates Σp = 1 (to 1e-10) and clamps entries above −1e-12 to zero.
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("populations"));
        }
        if p.iter().any(|&x| x < -1e-12) {
            return Err(Error::param("populations", "negative entry"));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-10 {
            return Err(Error::param("populations", format!("sum is {sum}, expected 1")));
        }
        Ok(Populations {
            p: p.into_iter().map(|x| x.max(0.0)).collect(),
        })
    }

    /// Weighted sum of population vectors (incoherent mixture).
    pub fn mixture<'a>(parts: impl IntoIterator<Item = (f64, &'a Populations)>) -> Result<Self> {
        let mut acc: Vec<f64> = Vec::new();
        for (w, pops) in parts {
            if acc.is_empty() {
                acc = vec![0.0; pops.len()];
            }
            if pops.len() != acc.len() {
                return Err(Error::DimensionMismatch {
                    expected: acc.len(),
                    found: pops.len(),
                });
            }
            for (a, x) in acc.iter_mut().zip(pops.as_slice()) {
                *a += w * x;
            }
        }
        Populations::new(acc)
    }

    pub(crate) fn from_raw(p: Vec<f64>) -> Self {
        Populations {
            p: p.into_iter().map(|x| x.max(0.0)).collect(),
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.p
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.p.iter().sum()
    }

    /// Largest elementwise difference to `other`.
    pub fn max_abs_diff(&self, other: &Populations) -> f64 {
        self.p
            .iter()
            .zip(&other.p)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<usize> for Populations {
    type Output = f64;
    fn index(&self, k: usize) -> &f64 {
        &self.p[k]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn max_abs(m: &DMatrix<C64>) -> f64 {
        m.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn spin_half_is_pauli_over_two() {
        let s = build_spin_system(0.5).unwrap();
        let h = C64::new(0.5, 0.0);
        let z = C64::new(0.0, 0.0);
        assert_eq!(s.jx(), &DMatrix::from_row_slice(2, 2, &[z, h, h, z]));
        assert_eq!(s.jz()[(0, 0)], h);
        assert_eq!(s.jz()[(1, 1)], -h);
    }

    #[test]
    fn spin_two_jz_diagonal() {
        let s = SpinSystem::spin2();
        let diag: Vec<f64> = (0..5).map(|k| s.jz()[(k, k)].re).collect();
        assert_eq!(diag, vec![2.0, 1.0, 0.0, -1.0, -2.0]);
        assert_eq!(s.m_values(), diag);
        assert_eq!(s.index_of(-1.0), Some(3));
        assert_eq!(s.index_of(0.5), None);
        assert_eq!(s.index_of(3.0), None);
    }

    #[test]
    fn rejects_bad_j() {
        for j in [0.0, -1.0, 0.3, 1.25, f64::NAN] {
            assert!(build_spin_system(j).is_err(), "{j}");
        }
    }

    #[test]
    fn casimir_spin_two_is_six() {
        let s = SpinSystem::spin2();
        let c = s.jx() * s.jx() + s.jy() * s.jy() + s.jz() * s.jz();
        let diff = c - DMatrix::<C64>::identity(5, 5) * C64::new(6.0, 0.0);
        assert!(max_abs(&diff) < 1e-12);
    }

    #[test]
    fn populations_of_simple_states() {
        let s = SpinSystem::spin2();
        let p = StateVector::eigenstate(&s, 2.0).unwrap().populations().unwrap();
        assert_eq!(p.as_slice(), &[1.0, 0.0, 0.0, 0.0, 0.0]);

        let r = std::f64::consts::FRAC_1_SQRT_2;
        let cat = StateVector::from_amplitudes(DVector::from_vec(vec![
            C64::new(r, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(r, 0.0),
        ]));
        let p = populations(&cat).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[4] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn populations_rejects_unnormalized() {
        let st = StateVector::from_amplitudes(DVector::from_element(5, C64::new(1.0, 0.0)));
        assert!(matches!(populations(&st), Err(Error::NotNormalized { .. })));
        assert!(StateVector::normalized(DVector::zeros(3)).is_err());
    }

    #[test]
    fn populations_new_validates() {
        assert!(Populations::new(vec![0.5, 0.5]).is_ok());
        assert!(Populations::new(vec![0.5, 0.6]).is_err());
        assert!(Populations::new(vec![1.1, -0.1]).is_err());
        let p = Populations::new(vec![1.0 + 5e-13, -5e-13]).unwrap();
        assert_eq!(p[1], 0.0);
    }

    proptest! {
        #[test]
        fn commutators_and_casimir(twice_j in 1u32..=5) {
            let s = SpinSystem::new(twice_j as f64 / 2.0).unwrap();
            let j = s.j();
            let i = C64::new(0.0, 1.0);
            let comm = |a: &DMatrix<C64>, b: &DMatrix<C64>| a * b - b * a;
            prop_assert!(max_abs(&(comm(s.jx(), s.jy()) - s.jz() * i)) < 1e-12);
            prop_assert!(max_abs(&(comm(s.jy(), s.jz()) - s.jx() * i)) < 1e-12);
            prop_assert!(max_abs(&(comm(s.jz(), s.jx()) - s.jy() * i)) < 1e-12);
            let cas = s.jx() * s.jx() + s.jy() * s.jy() + s.jz() * s.jz();
            let id = DMatrix::<C64>::identity(s.dim(), s.dim()) * C64::new(j * (j + 1.0), 0.0);
            prop_assert!(max_abs(&(cas - id)) < 1e-12);
            for op in [s.jx(), s.jy(), s.jz()] {
                prop_assert!(max_abs(&(op - op.adjoint())) < 1e-15);
            }
        }

        #[test]
        fn populations_of_normalized_is_idempotent(
            re in proptest::collection::vec(-1.0f64..1.0, 5),
            im in proptest::collection::vec(-1.0f64..1.0, 5),
        ) {
            let amps = DVector::from_iterator(5, re.iter().zip(&im).map(|(&a, &b)| C64::new(a, b)));
            prop_assume!(amps.norm() > 1e-3);
            let st = StateVector::normalized(amps).unwrap();
            prop_assert!((st.norm_sqr() - 1.0).abs() < 1e-10);
            let p1 = populations(&st).unwrap();
            let again = StateVector::normalized(st.amplitudes().clone()).unwrap();
            let p2 = populations(&again).unwrap();
            prop_assert!(p1.max_abs_diff(&p2) < 1e-15);
            prop_assert!((p1.sum() - 1.0).abs() < 1e-10);
        }
    }
}
