//! Unit-carrying scalars.
//!
//! Everything is stored in SI internally (rad/s, T, T/m). Constructors and
//! accessors named after laboratory units (kHz, MHz, mG, mG/mm) do the
//! conversion, including the factor 2π between cyclic and angular frequency.

use std::f64::consts::TAU;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Angular frequency in rad/s.
#[derive(Clone, Copy, Debug, Default, PartialEq, PartialOrd)]
pub struct AngularFrequency(f64);

impl AngularFrequency {
    pub const ZERO: Self = AngularFrequency(0.0);

    pub const fn from_rad_per_s(value: f64) -> Self {
        AngularFrequency(value)
    }

    /// `f` in Hz (cyclic); stores 2π·f.
    pub fn from_hz(f: f64) -> Self {
        AngularFrequency(TAU * f)
    }

    pub fn from_khz(f: f64) -> Self {
        AngularFrequency(TAU * f * 1e3)
    }

    pub fn from_mhz(f: f64) -> Self {
        AngularFrequency(TAU * f * 1e6)
    }

    pub fn rad_per_s(self) -> f64 {
        self.0
    }

    pub fn hz(self) -> f64 {
        self.0 / TAU
    }

    pub fn khz(self) -> f64 {
        self.hz() * 1e-3
    }

    pub fn mhz(self) -> f64 {
        self.hz() * 1e-6
    }

    pub fn abs(self) -> Self {
        AngularFrequency(self.0.abs())
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }
}

impl fmt::Display for AngularFrequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "2π×{} kHz", self.khz())
    }
}

impl Add for AngularFrequency {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        AngularFrequency(self.0 + rhs.0)
    }
}

impl Sub for AngularFrequency {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        AngularFrequency(self.0 - rhs.0)
    }
}

impl Neg for AngularFrequency {
    type Output = Self;
    fn neg(self) -> Self {
        AngularFrequency(-self.0)
    }
}

impl Mul<f64> for AngularFrequency {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        AngularFrequency(self.0 * rhs)
    }
}

impl Div<f64> for AngularFrequency {
    type Output = Self;
    fn div(self, rhs: f64) -> Self {
        AngularFrequency(self.0 / rhs)
    }
}

/// Magnetic flux density in tesla.
#[derive(Clone, Copy, Debug, Default, PartialEq, PartialOrd)]
pub struct MagneticField(f64);

impl MagneticField {
    pub const ZERO: Self = MagneticField(0.0);

    pub const fn from_tesla(value: f64) -> Self {
        MagneticField(value)
    }

    pub fn from_gauss(value: f64) -> Self {
        MagneticField(value * 1e-4)
    }

    pub fn from_milligauss(value: f64) -> Self {
        MagneticField(value * 1e-7)
    }

    pub fn tesla(self) -> f64 {
        self.0
    }

    pub fn gauss(self) -> f64 {
        self.0 * 1e4
    }

    pub fn milligauss(self) -> f64 {
        self.0 * 1e7
    }
}

/// Field gradient along z in T/m.
#[derive(Clone, Copy, Debug, Default, PartialEq, PartialOrd)]
pub struct FieldGradient(f64);

impl FieldGradient {
    pub const ZERO: Self = FieldGradient(0.0);

    pub const fn from_tesla_per_m(value: f64) -> Self {
        FieldGradient(value)
    }

    /// 1 mG/mm = 1e-4 T/m.
    pub fn from_mg_per_mm(value: f64) -> Self {
        FieldGradient(value * 1e-4)
    }

    pub fn from_gauss_per_cm(value: f64) -> Self {
        FieldGradient(value * 1e-2)
    }

    pub fn tesla_per_m(self) -> f64 {
        self.0
    }

    pub fn mg_per_mm(self) -> f64 {
        self.0 * 1e4
    }
}
