//! Dipole-dipole coupling between a nearby Er³⁺/Eu³⁺ pair.
//!
//! The electric interaction shifts the Eu optical transition by
//!
//! ```text
//! Δν = Δμ_Er Δμ_Eu / (4π ε ε₀ h r³) · [(μ̂_Er·μ̂_Eu) − 3 (μ̂_Er·r̂)(μ̂_Eu·r̂)]
//! ```
//!
//! in ordinary frequency units (Hz). The magnetic comparison uses the same
//! angular bracket with prefactor μ₀ μ_Er μ_Eu / (4π h r³).
//!
//! Frequency convention: shifts are returned in Hz; everything that feeds the
//! Hamiltonian (Rabi frequencies, [`ConditionalDrive::delta_nu_rad_s`]) is in
//! rad/s. The conversion is always the explicit factor 2π.

use std::f64::consts::PI;

use thiserror::Error;

/// Planck constant, J·s.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Vacuum permittivity, F/m.
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
/// Vacuum permeability, N/A².
pub const VACUUM_PERMEABILITY: f64 = 1.256_637_062_12e-6;
/// Bohr magneton, J/T.
pub const BOHR_MAGNETON: f64 = 9.274_010_078_3e-24;
/// Nuclear magneton, J/T.
pub const NUCLEAR_MAGNETON: f64 = 5.050_783_746_1e-27;

/// Default relative dielectric constant. The value reproduces a 10 MHz shift
/// at 1 nm for the default dipole-moment differences.
pub const DEFAULT_EPSILON_REL: f64 = 9.2;

const UNIT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DipoleError {
    #[error("ion separation must be positive and finite (got {0} m)")]
    Separation(f64),
    #[error("orientation vector `{name}` is not a unit vector (norm {norm})")]
    NotUnit { name: &'static str, norm: f64 },
    #[error("relative dielectric constant must be >= 1 (got {0})")]
    Dielectric(f64),
    #[error("dipole shift must be positive for a conditional drive (got {0} Hz)")]
    NonPositiveShift(f64),
}

/// A 3-vector in Cartesian components.
pub type Vec3 = [f64; 3];

fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// Geometry and moments of an Er-Eu pair.
#[derive(Debug, Clone, PartialEq)]
pub struct IonPairConfig {
    /// Er permanent electric dipole-moment difference (excited − ground), C·m.
    pub delta_mu_er: f64,
    /// Eu permanent electric dipole-moment difference, C·m.
    pub delta_mu_eu: f64,
    /// Er magnetic moment, J/T.
    pub mu_er_mag: f64,
    /// Eu nuclear magnetic moment, J/T.
    pub mu_eu_mag: f64,
    /// Ion separation, m.
    pub separation_r: f64,
    pub unit_er: Vec3,
    pub unit_eu: Vec3,
    pub unit_r: Vec3,
    pub epsilon_rel: f64,
}

impl Default for IonPairConfig {
    /// Er:Eu:Y₂SiO₅ moments at 1 nm, both dipoles parallel and perpendicular
    /// to the separation (orientation factor +1).
    fn default() -> Self {
        Self {
            delta_mu_er: 0.84e-31,
            delta_mu_eu: 0.81e-31,
            mu_er_mag: 14.65 * BOHR_MAGNETON,
            mu_eu_mag: 3.42 * NUCLEAR_MAGNETON,
            separation_r: 1e-9,
            unit_er: [1.0, 0.0, 0.0],
            unit_eu: [1.0, 0.0, 0.0],
            unit_r: [0.0, 0.0, 1.0],
            epsilon_rel: DEFAULT_EPSILON_REL,
        }
    }
}

impl IonPairConfig {
    pub fn with_separation(mut self, r: f64) -> Self {
        self.separation_r = r;
        self
    }

    pub fn validate(&self) -> Result<(), DipoleError> {
        if !(self.separation_r > 0.0 && self.separation_r.is_finite()) {
            return Err(DipoleError::Separation(self.separation_r));
        }
        for (name, v) in [
            ("unit_er", &self.unit_er),
            ("unit_eu", &self.unit_eu),
            ("unit_r", &self.unit_r),
        ] {
            let n = norm(v);
            if (n - 1.0).abs() > UNIT_TOLERANCE {
                return Err(DipoleError::NotUnit { name, norm: n });
            }
        }
        if !(self.epsilon_rel >= 1.0) {
            return Err(DipoleError::Dielectric(self.epsilon_rel));
        }
        Ok(())
    }

    /// The angular bracket `(μ̂·μ̂′) − 3(μ̂·r̂)(μ̂′·r̂)`.
    pub fn orientation_factor(&self) -> f64 {
        dot(&self.unit_er, &self.unit_eu)
            - 3.0 * dot(&self.unit_er, &self.unit_r) * dot(&self.unit_eu, &self.unit_r)
    }
}

/// Electric dipole-dipole (Stark) shift of the Eu transition, Hz, signed.
pub fn stark_shift(pair: &IonPairConfig) -> Result<f64, DipoleError> {
    pair.validate()?;
    let r3 = pair.separation_r.powi(3);
    let prefactor = pair.delta_mu_er * pair.delta_mu_eu
        / (4.0 * PI * pair.epsilon_rel * VACUUM_PERMITTIVITY * PLANCK * r3);
    Ok(prefactor * pair.orientation_factor())
}

/// Magnetic dipole-dipole shift, Hz, signed.
pub fn magnetic_shift(pair: &IonPairConfig) -> Result<f64, DipoleError> {
    pair.validate()?;
    let r3 = pair.separation_r.powi(3);
    let prefactor =
        VACUUM_PERMEABILITY * pair.mu_er_mag * pair.mu_eu_mag / (4.0 * PI * PLANCK * r3);
    Ok(prefactor * pair.orientation_factor())
}

/// Relative dielectric constant for which [`stark_shift`] returns
/// `target_hz` in magnitude (everything else in `pair` held fixed).
pub fn calibrate_epsilon_rel(pair: &IonPairConfig, target_hz: f64) -> Result<f64, DipoleError> {
    let unit = IonPairConfig {
        epsilon_rel: 1.0,
        ..pair.clone()
    };
    let at_vacuum = stark_shift(&unit)?;
    Ok(at_vacuum.abs() / target_hz.abs())
}

/// Drive parameters for the effective-2π conditional gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalDrive {
    /// The dipole shift as an angular frequency, rad/s.
    pub delta_nu_rad_s: f64,
    /// Rabi frequency Ω = Δν/√3, rad/s.
    pub omega_rad_s: f64,
    /// Ω/2π, Hz.
    pub omega_hz: f64,
    /// Five π pulses: 5π/Ω, s.
    pub t_cnot: f64,
    /// Four π pulses: 4π/Ω, s.
    pub t_st: f64,
}

/// Rabi frequency and gate durations for a dipole shift given in Hz.
///
/// Ω is chosen so that `√(Δν² + Ω²) = 2Ω`: detuned pulses make a full 2π
/// rotation while resonant ones make a π rotation.
pub fn conditional_drive(delta_nu_hz: f64) -> Result<ConditionalDrive, DipoleError> {
    if !(delta_nu_hz > 0.0 && delta_nu_hz.is_finite()) {
        return Err(DipoleError::NonPositiveShift(delta_nu_hz));
    }
    let delta_nu_rad_s = 2.0 * PI * delta_nu_hz;
    let omega_rad_s = delta_nu_rad_s / 3f64.sqrt();
    Ok(ConditionalDrive {
        delta_nu_rad_s,
        omega_rad_s,
        omega_hz: delta_nu_hz / 3f64.sqrt(),
        t_cnot: 5.0 * PI / omega_rad_s,
        t_st: 4.0 * PI / omega_rad_s,
    })
}
