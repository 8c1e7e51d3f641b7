use crate::error::{Error, Result};
use crate::units::{AngularFrequency, FieldGradient, MagneticField};

/// Bohr magneton, J/T (CODATA 2018).
pub const BOHR_MAGNETON: f64 = 9.274_010_078_3e-24;
/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Atomic mass unit, kg.
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
/// Mass of ²⁰Ne, kg.
pub const MASS_NE20: f64 = 19.992_440_176_2 * ATOMIC_MASS_UNIT;

/// Constants entering the magnetic coupling and the thermal velocity spread.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicalConstants {
    pub mu_b: f64,
    pub hbar: f64,
    pub k_b: f64,
    pub mass_ne20: f64,
    /// Landé factor; 3/2 for a pure-LS ³P₂ level.
    pub g_j: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        PhysicalConstants {
            mu_b: BOHR_MAGNETON,
            hbar: HBAR,
            k_b: BOLTZMANN,
            mass_ne20: MASS_NE20,
            g_j: 1.5,
        }
    }
}

impl PhysicalConstants {
    pub fn with_g_j(g_j: f64) -> Result<Self> {
        PhysicalConstants {
            g_j,
            ..Default::default()
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        let fields = [
            ("mu_b", self.mu_b),
            ("hbar", self.hbar),
            ("k_b", self.k_b),
            ("mass_ne20", self.mass_ne20),
            ("g_j", self.g_j),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        Ok(self)
    }

    /// Gyromagnetic ratio γ = g_J μ_B / ħ in rad/(s·T).
    pub fn gamma(&self) -> f64 {
        self.g_j * self.mu_b / self.hbar
    }

    /// Larmor frequency γB.
    pub fn larmor(&self, b: MagneticField) -> AngularFrequency {
        AngularFrequency::from_rad_per_s(self.gamma() * b.tesla())
    }

    /// γB₁ in rad/(s·m).
    pub fn gradient_rate(&self, b1: FieldGradient) -> f64 {
        self.gamma() * b1.tesla_per_m()
    }

    /// Variance k_B T / m of the 1-D Maxwell-Boltzmann velocity marginal, m²/s².
    pub fn velocity_variance(&self, temperature: f64, mass: f64) -> f64 {
        self.k_b * temperature / mass
    }
}
