//! Purcell-enhanced emission from the Er³⁺ telecom transition and the
//! field/temperature dependence of the Er spin relaxation rate.

use std::f64::consts::PI;

use thiserror::Error;

use crate::dipole::BOHR_MAGNETON;

/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CavityError {
    #[error("{field} = {value} is outside its allowed range ({range})")]
    OutOfRange {
        field: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("optical T2 ({t2} s) exceeds 2·T1 ({two_t1} s)")]
    CoherenceBound { t2: f64, two_t1: f64 },
    #[error("photon profile needs a cavity with P > 0")]
    NoCavity,
    #[error("spin relaxation at T = 0 and B = 0 is undefined")]
    ZeroTemperatureZeroField,
}

fn check(field: &'static str, value: f64, ok: bool, range: &'static str) -> Result<(), CavityError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(CavityError::OutOfRange { field, value, range })
    }
}

/// Emitter and cavity parameters. Rates are angular (rad/s).
#[derive(Debug, Clone, PartialEq)]
pub struct CavityParams {
    /// Purcell factor; `None` means no cavity.
    pub purcell_p: Option<f64>,
    /// Excited-state decay rate γ = 1/T₁, rad/s.
    pub gamma_total: f64,
    /// Radiative decay rate γ_r, rad/s.
    pub gamma_rad: f64,
    /// Probability of spin-conserving spontaneous emission.
    pub beta: f64,
    /// Optical coherence time T₂, s.
    pub t2_opt: f64,
    /// Cavity cooperativity, used when `purcell_p` is absent.
    pub cooperativity: Option<f64>,
}

impl Default for CavityParams {
    /// Er³⁺:Y₂SiO₅ with P = 1000 and T₂ = 200 µs.
    fn default() -> Self {
        Self {
            purcell_p: Some(1000.0),
            gamma_total: 2.0 * PI * 14.0,
            gamma_rad: 2.0 * PI * 3.0,
            beta: 0.9,
            t2_opt: 200e-6,
            cooperativity: None,
        }
    }
}

/// Purcell factor from cooperativity: P = (γ/γ_r)·C.
pub fn purcell_from_cooperativity(cooperativity: f64, gamma_total: f64, gamma_rad: f64) -> f64 {
    gamma_total / gamma_rad * cooperativity
}

impl CavityParams {
    pub fn with_purcell(mut self, p: f64) -> Self {
        self.purcell_p = Some(p);
        self
    }

    pub fn without_cavity(mut self) -> Self {
        self.purcell_p = None;
        self.cooperativity = None;
        self
    }

    pub fn with_t2(mut self, t2: f64) -> Self {
        self.t2_opt = t2;
        self
    }

    /// T₁ = 1/γ, s.
    pub fn t1(&self) -> f64 {
        1.0 / self.gamma_total
    }

    /// Explicit Purcell factor, else the one implied by the cooperativity.
    pub fn effective_purcell(&self) -> Option<f64> {
        self.purcell_p.or_else(|| {
            self.cooperativity
                .map(|c| purcell_from_cooperativity(c, self.gamma_total, self.gamma_rad))
        })
    }

    pub fn validate(&self) -> Result<(), CavityError> {
        check("beta", self.beta, (0.0..=1.0).contains(&self.beta), "[0, 1]")?;
        check("gamma_total", self.gamma_total, self.gamma_total > 0.0, "> 0")?;
        check(
            "gamma_rad",
            self.gamma_rad,
            self.gamma_rad >= 0.0 && self.gamma_rad <= self.gamma_total,
            "[0, gamma_total]",
        )?;
        if let Some(p) = self.effective_purcell() {
            check("purcell_p", p, p >= 0.0, ">= 0")?;
        }
        check("t2_opt", self.t2_opt, self.t2_opt > 0.0, "> 0")?;
        let two_t1 = 2.0 * self.t1();
        if self.t2_opt > two_t1 * (1.0 + 1e-12) {
            return Err(CavityError::CoherenceBound {
                t2: self.t2_opt,
                two_t1,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantumEfficiency {
    /// Spin-conserving free-space quantum efficiency η = βγ_r/γ.
    pub eta: f64,
    /// Probability of emission into the cavity mode, ηP/(1+ηP).
    pub p: f64,
}

pub fn quantum_efficiency(cav: &CavityParams) -> Result<QuantumEfficiency, CavityError> {
    cav.validate()?;
    let eta = cav.beta * cav.gamma_rad / cav.gamma_total;
    let enhanced = eta * cav.effective_purcell().unwrap_or(0.0);
    Ok(QuantumEfficiency {
        eta,
        p: enhanced / (1.0 + enhanced),
    })
}

/// Single-photon indistinguishability I₁.
///
/// Without a cavity I₁ = T₂/2T₁; with one, I₁ = (1+ηP)/(ζ+1+ηP) where
/// ζ = 2T₁/T₂ − 1 is the pure-dephasing ratio.
pub fn indistinguishability(cav: &CavityParams) -> Result<f64, CavityError> {
    cav.validate()?;
    let t1 = cav.t1();
    match cav.effective_purcell() {
        None => Ok(cav.t2_opt / (2.0 * t1)),
        Some(purcell) => {
            let eta = cav.beta * cav.gamma_rad / cav.gamma_total;
            let zeta = (2.0 * t1 / cav.t2_opt - 1.0).max(0.0);
            let enhanced = 1.0 + eta * purcell;
            Ok(enhanced / (zeta + enhanced))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonProfile {
    /// Emitted-photon bandwidth Pγ/2π, Hz.
    pub bandwidth_hz: f64,
    /// Photon duration 1/(2π·bandwidth), s.
    pub duration_s: f64,
}

pub fn photon_profile(cav: &CavityParams) -> Result<PhotonProfile, CavityError> {
    cav.validate()?;
    let purcell = cav.effective_purcell().filter(|&p| p > 0.0).ok_or(CavityError::NoCavity)?;
    let bandwidth_hz = purcell * cav.gamma_total / (2.0 * PI);
    Ok(PhotonProfile {
        bandwidth_hz,
        duration_s: 1.0 / (2.0 * PI * bandwidth_hz),
    })
}

/// Direct-process spin relaxation model R(B) = R₀ + α_D g³ B⁵ coth(gμ_B B / 2kT).
#[derive(Debug, Clone, PartialEq)]
pub struct SpinRelaxationParams {
    /// Field-independent rate (cross-relaxation), 1/s.
    pub r0: f64,
    /// Anisotropic direct-process constant, 1/(s·T⁵); multiplies g³.
    pub alpha_d: f64,
    pub g_factor: f64,
    /// K.
    pub temperature: f64,
    /// T.
    pub field_b: f64,
}

/// Field-independent rate matching the 130 ms low-field Zeeman lifetime.
pub const DEFAULT_R0: f64 = 1.0 / 0.130;
/// Placeholder g factor along the 135° field direction.
pub const DEFAULT_G_FACTOR: f64 = 6.0;

impl Default for SpinRelaxationParams {
    /// 1 T, 20 mK, α_D calibrated to a 40 ms relaxation time.
    fn default() -> Self {
        let mut params = Self {
            r0: DEFAULT_R0,
            alpha_d: 0.0,
            g_factor: DEFAULT_G_FACTOR,
            temperature: 0.020,
            field_b: 1.0,
        };
        params.alpha_d = calibrate_alpha_d(&params, 0.040).expect("default anchor is valid");
        params
    }
}

impl SpinRelaxationParams {
    pub fn validate(&self) -> Result<(), CavityError> {
        check("r0", self.r0, self.r0 >= 0.0, ">= 0")?;
        check("alpha_d", self.alpha_d, self.alpha_d >= 0.0, ">= 0")?;
        check("g_factor", self.g_factor, self.g_factor >= 0.0, ">= 0")?;
        check("field_b", self.field_b, self.field_b >= 0.0, ">= 0")?;
        check("temperature", self.temperature, self.temperature >= 0.0, ">= 0")?;
        if self.temperature == 0.0 && self.field_b == 0.0 {
            return Err(CavityError::ZeroTemperatureZeroField);
        }
        Ok(())
    }

    /// B⁵·coth(gμ_B B/2kT), with the T→0 limit coth→1 and the B→0 limit 0.
    fn field_term(&self) -> f64 {
        let b = self.field_b;
        if b == 0.0 {
            return 0.0;
        }
        if self.temperature == 0.0 {
            return b.powi(5);
        }
        let x = self.g_factor * BOHR_MAGNETON * b / (2.0 * BOLTZMANN * self.temperature);
        let coth = if x > 20.0 {
            1.0
        } else if x < 1e-6 {
            1.0 / x + x / 3.0
        } else {
            1.0 / x.tanh()
        };
        b.powi(5) * coth
    }
}

/// Spin relaxation rate R, 1/s.
pub fn spin_relaxation_rate(params: &SpinRelaxationParams) -> Result<f64, CavityError> {
    params.validate()?;
    Ok(params.r0 + params.alpha_d * params.g_factor.powi(3) * params.field_term())
}

/// α_D such that 1/R equals `lifetime_s` at the field and temperature of
/// `params` (R₀ and g taken from `params`).
pub fn calibrate_alpha_d(params: &SpinRelaxationParams, lifetime_s: f64) -> Result<f64, CavityError> {
    let probe = SpinRelaxationParams {
        alpha_d: 0.0,
        ..params.clone()
    };
    probe.validate()?;
    check("lifetime_s", lifetime_s, lifetime_s > 0.0, "> 0")?;
    let target = 1.0 / lifetime_s;
    if target < probe.r0 {
        return Err(CavityError::OutOfRange {
            field: "lifetime_s",
            value: lifetime_s,
            range: "<= 1/r0",
        });
    }
    let denom = probe.g_factor.powi(3) * probe.field_term();
    check("field_b", probe.field_b, denom > 0.0, "> 0 for calibration")?;
    Ok((target - probe.r0) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantum_efficiency_values() {
        let cav = CavityParams::default().with_purcell(100.0);
        let qe = quantum_efficiency(&cav).unwrap();
        assert!((qe.eta - 0.19).abs() < 0.005);
        assert!((qe.p - 0.95).abs() < 0.002);
        let qe = quantum_efficiency(&cav.clone().with_purcell(1000.0)).unwrap();
        assert!((qe.p - 0.995).abs() < 0.002);
        assert_eq!(quantum_efficiency(&cav.with_purcell(0.0)).unwrap().p, 0.0);
    }

    #[test]
    fn efficiency_is_monotone_and_below_one() {
        let mut last = -1.0;
        for k in 0..60 {
            let p = 10f64.powf(k as f64 / 6.0 - 2.0);
            let qe = quantum_efficiency(&CavityParams::default().with_purcell(p)).unwrap();
            assert!(qe.p > last && qe.p < 1.0);
            last = qe.p;
        }
    }

    #[test]
    fn cooperativity_helper() {
        let cav = CavityParams {
            purcell_p: None,
            cooperativity: Some(300.0),
            ..Default::default()
        };
        assert!((cav.effective_purcell().unwrap() - 1400.0).abs() < 1e-9);
    }

    #[test]
    fn indistinguishability_values() {
        let base = CavityParams::default();
        let free = indistinguishability(&base.clone().without_cavity()).unwrap();
        assert!((free - 0.009).abs() < 0.001);
        let cases = [
            (1000.0, 200e-6, 0.63),
            (20000.0, 200e-6, 0.97),
            (100.0, 4e-3, 0.82),
            (1000.0, 4e-3, 0.98),
        ];
        for (p, t2, want) in cases {
            let i1 = indistinguishability(&base.clone().with_purcell(p).with_t2(t2)).unwrap();
            assert!((i1 - want).abs() < 0.01, "P={p} T2={t2}: {i1}");
        }
    }

    #[test]
    fn indistinguishability_limits() {
        let base = CavityParams::default();
        // ζ = 0 gives perfectly indistinguishable photons.
        let limit = base.clone().with_t2(2.0 * base.t1());
        assert!((indistinguishability(&limit).unwrap() - 1.0).abs() < 1e-12);
        // ηP ≪ 1 approaches the free-space value when ζ ≫ 1.
        let tiny = base.clone().with_purcell(1e-9).with_t2(20e-6);
        let free = indistinguishability(&tiny.clone().without_cavity()).unwrap();
        let with = indistinguishability(&tiny).unwrap();
        assert!(((with - free) / free).abs() < 2e-3);
        assert!(matches!(
            indistinguishability(&base.clone().with_t2(0.0)),
            Err(CavityError::OutOfRange { field: "t2_opt", .. })
        ));
        assert!(matches!(
            indistinguishability(&base.with_t2(1.0)),
            Err(CavityError::CoherenceBound { .. })
        ));
    }

    #[test]
    fn photon_profile_values() {
        let prof = photon_profile(&CavityParams::default()).unwrap();
        assert!((prof.bandwidth_hz - 14e3).abs() < 1e-6);
        assert!((prof.duration_s - 11.37e-6).abs() < 0.05e-6);
        let narrow = photon_profile(&CavityParams::default().with_purcell(100.0)).unwrap();
        assert!((narrow.bandwidth_hz - 1.4e3).abs() < 1e-6);
        let fast = photon_profile(&CavityParams::default().with_purcell(10000.0)).unwrap();
        assert!((fast.duration_s * 10.0 / prof.duration_s - 1.0).abs() < 1e-12);
        assert_eq!(
            photon_profile(&CavityParams::default().without_cavity()),
            Err(CavityError::NoCavity)
        );
    }

    #[test]
    fn spin_relaxation_limits() {
        let params = SpinRelaxationParams::default();
        let zero_field = SpinRelaxationParams {
            field_b: 0.0,
            ..params.clone()
        };
        assert_eq!(spin_relaxation_rate(&zero_field).unwrap(), params.r0);

        let cold = SpinRelaxationParams {
            temperature: 0.0,
            ..params.clone()
        };
        let saturated = params.r0 + params.alpha_d * params.g_factor.powi(3);
        assert!((spin_relaxation_rate(&cold).unwrap() - saturated).abs() < 1e-12 * saturated);

        let undefined = SpinRelaxationParams {
            temperature: 0.0,
            field_b: 0.0,
            ..params
        };
        assert_eq!(
            spin_relaxation_rate(&undefined),
            Err(CavityError::ZeroTemperatureZeroField)
        );
    }

    #[test]
    fn calibrated_anchor_reproduces_forty_ms() {
        let params = SpinRelaxationParams::default();
        let rate = spin_relaxation_rate(&params).unwrap();
        assert!((1.0 / rate - 0.040).abs() < 1e-12);
        // Independent inversion: at 20 mK and 1 T the coth factor is 1 to
        // double precision, so α_D g³ = 1/0.040 − R₀.
        let expected = (25.0 - DEFAULT_R0) / DEFAULT_G_FACTOR.powi(3);
        assert!((params.alpha_d - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn relaxation_is_monotone_in_field() {
        let base = SpinRelaxationParams {
            temperature: 2.0,
            ..Default::default()
        };
        let mut last = 0.0;
        for k in 0..50 {
            let b = 0.05 * k as f64;
            let r = spin_relaxation_rate(&SpinRelaxationParams {
                field_b: b,
                ..base.clone()
            })
            .unwrap();
            assert!(r >= last);
            last = r;
        }
    }
}
