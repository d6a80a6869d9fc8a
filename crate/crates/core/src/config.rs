//! Line-oriented `key = value` parameter files.
//!
//! `#` starts a comment, blank lines are ignored and every key may appear at
//! most once. Units are fixed per key (see [`KEYS`]); values carry no unit
//! suffix. Missing keys take the preset values. Frequencies are ordinary
//! frequencies in Hz and are converted to angular frequencies internally.

use crate::cavity::{self, CavityError, CavityParams, SpinRelaxationParams};
use crate::dipole::{self, DipoleError, IonPairConfig, Vec3};
use crate::gates::{GateError, GateParams};
use crate::lindblad::DissipationRates;
use crate::rates::{RatesError, RepeaterConfig};
use crate::angular;
use std::fmt::Write as _;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice")]
    Duplicate { line: usize, key: String },
    #[error("line {line}: `{key}`: {message}")]
    Value {
        line: usize,
        key: String,
        message: String,
    },
    #[error("repeater parameters: {0}")]
    Repeater(#[from] RatesError),
    #[error("gate parameters: {0}")]
    Gate(#[from] GateError),
    #[error("ion-pair parameters: {0}")]
    IonPair(#[from] DipoleError),
    #[error("cavity parameters: {0}")]
    Cavity(#[from] CavityError),
    #[error("`memory_dephasing_per_s` = {0} must be non-negative")]
    MemoryDephasing(f64),
}

/// Recognized keys with their units, in emission order.
pub const KEYS: &[(&str, &str)] = &[
    ("total_length_km", "km"),
    ("nesting_n", "integer ≥ 0"),
    ("channels_m", "integer ≥ 1"),
    ("p_emit", "probability"),
    ("eta_d", "probability"),
    ("l_att_km", "km"),
    ("fiber_speed_m_per_s", "m/s"),
    ("source_rate_hz", "Hz"),
    ("direct_includes_eta_d", "true | false"),
    ("memory_dephasing_per_s", "1/s"),
    ("delta_nu_hz", "Hz"),
    ("omega_hz", "Hz, default delta_nu_hz/√3"),
    ("epsilon_rad", "rad"),
    ("xi", "dimensionless"),
    ("gamma_er_up_hz", "Hz"),
    ("gamma_er_down_hz", "Hz"),
    ("gamma_eu_up_hz", "Hz"),
    ("gamma_eu_down_hz", "Hz"),
    ("gamma_star_er_hz", "Hz"),
    ("gamma_star_eu_hz", "Hz"),
    ("chi_er_hz", "Hz"),
    ("chi_eu_hz", "Hz"),
    ("delta_mu_er_cm", "C·m"),
    ("delta_mu_eu_cm", "C·m"),
    ("mu_er_bohr", "Bohr magnetons"),
    ("mu_eu_nuclear", "nuclear magnetons"),
    ("separation_nm", "nm"),
    ("epsilon_rel", "dimensionless"),
    ("unit_er", "x,y,z unit vector"),
    ("unit_eu", "x,y,z unit vector"),
    ("unit_r", "x,y,z unit vector"),
    ("purcell", "dimensionless or `none`"),
    ("cooperativity", "dimensionless or `none`"),
    ("gamma_total_hz", "Hz"),
    ("gamma_rad_hz", "Hz"),
    ("beta", "probability"),
    ("t2_opt_s", "s"),
    ("relax_r0_per_s", "1/s"),
    ("relax_alpha_d", "1/(s·T⁵), default calibrated to 40 ms at 1 T, 20 mK"),
    ("relax_g_factor", "dimensionless"),
    ("relax_temperature_k", "K"),
    ("relax_field_t", "T"),
];

/// Raw parameter values in file units.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub total_length_km: f64,
    pub nesting_n: u32,
    pub channels_m: u32,
    pub p_emit: f64,
    pub eta_d: f64,
    pub l_att_km: f64,
    pub fiber_speed_m_per_s: f64,
    pub source_rate_hz: f64,
    pub direct_includes_eta_d: bool,
    pub memory_dephasing_per_s: f64,
    pub delta_nu_hz: f64,
    pub omega_hz: Option<f64>,
    pub epsilon_rad: f64,
    pub xi: f64,
    pub gamma_er_up_hz: f64,
    pub gamma_er_down_hz: f64,
    pub gamma_eu_up_hz: f64,
    pub gamma_eu_down_hz: f64,
    pub gamma_star_er_hz: f64,
    pub gamma_star_eu_hz: f64,
    pub chi_er_hz: f64,
    pub chi_eu_hz: f64,
    pub delta_mu_er_cm: f64,
    pub delta_mu_eu_cm: f64,
    pub mu_er_bohr: f64,
    pub mu_eu_nuclear: f64,
    pub separation_nm: f64,
    pub epsilon_rel: f64,
    pub unit_er: Vec3,
    pub unit_eu: Vec3,
    pub unit_r: Vec3,
    pub purcell: Option<f64>,
    pub cooperativity: Option<f64>,
    pub gamma_total_hz: f64,
    pub gamma_rad_hz: f64,
    pub beta: f64,
    pub t2_opt_s: f64,
    pub relax_r0_per_s: f64,
    pub relax_alpha_d: Option<f64>,
    pub relax_g_factor: f64,
    pub relax_temperature_k: f64,
    pub relax_field_t: f64,
}

impl Default for Config {
    fn default() -> Self {
        let r = RepeaterConfig::default();
        let pair = IonPairConfig::default();
        Self {
            total_length_km: r.total_length_l,
            nesting_n: r.nesting_n,
            channels_m: r.channels_m,
            p_emit: r.p_emit,
            eta_d: r.eta_d,
            l_att_km: r.l_att,
            fiber_speed_m_per_s: r.fiber_speed_c,
            source_rate_hz: r.source_rate,
            direct_includes_eta_d: r.direct_includes_eta_d,
            memory_dephasing_per_s: 0.0,
            delta_nu_hz: 46e3,
            omega_hz: None,
            epsilon_rad: std::f64::consts::PI / 64.0,
            xi: 0.02,
            gamma_er_up_hz: 3.0,
            gamma_er_down_hz: 0.0,
            gamma_eu_up_hz: 1.3,
            gamma_eu_down_hz: 0.0,
            gamma_star_er_hz: 8.0,
            gamma_star_eu_hz: 19.0,
            chi_er_hz: 80.0,
            chi_eu_hz: 0.0,
            delta_mu_er_cm: pair.delta_mu_er,
            delta_mu_eu_cm: pair.delta_mu_eu,
            mu_er_bohr: 14.65,
            mu_eu_nuclear: 3.42,
            separation_nm: 1.0,
            epsilon_rel: pair.epsilon_rel,
            unit_er: pair.unit_er,
            unit_eu: pair.unit_eu,
            unit_r: pair.unit_r,
            purcell: Some(1000.0),
            cooperativity: None,
            gamma_total_hz: 14.0,
            gamma_rad_hz: 3.0,
            beta: 0.9,
            t2_opt_s: 200e-6,
            relax_r0_per_s: cavity::DEFAULT_R0,
            relax_alpha_d: None,
            relax_g_factor: cavity::DEFAULT_G_FACTOR,
            relax_temperature_k: 0.020,
            relax_field_t: 1.0,
        }
    }
}

/// Validated parameters in internal units.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    pub config: Config,
    pub repeater: RepeaterConfig,
    pub gates: GateParams,
    pub ion_pair: IonPairConfig,
    pub cavity: CavityParams,
    pub relaxation: SpinRelaxationParams,
}

fn value_err(line: usize, key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Value {
        line,
        key: key.to_string(),
        message: message.into(),
    }
}

fn parse_f64(line: usize, key: &str, v: &str) -> Result<f64, ConfigError> {
    let x = f64::from_str(v).map_err(|_| {
        value_err(line, key, format!("`{v}` is not a plain number (units are fixed per key)"))
    })?;
    if !x.is_finite() {
        return Err(value_err(line, key, "must be finite"));
    }
    Ok(x)
}

fn parse_opt(line: usize, key: &str, v: &str) -> Result<Option<f64>, ConfigError> {
    if v.eq_ignore_ascii_case("none") {
        Ok(None)
    } else {
        parse_f64(line, key, v).map(Some)
    }
}

fn parse_u32(line: usize, key: &str, v: &str) -> Result<u32, ConfigError> {
    u32::from_str(v).map_err(|_| value_err(line, key, format!("`{v}` is not a non-negative integer")))
}

fn parse_bool(line: usize, key: &str, v: &str) -> Result<bool, ConfigError> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(value_err(line, key, format!("`{v}` is not `true` or `false`"))),
    }
}

fn parse_vec3(line: usize, key: &str, v: &str) -> Result<Vec3, ConfigError> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(value_err(line, key, "expected three comma-separated components"));
    }
    let mut out = [0.0; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = parse_f64(line, key, p)?;
    }
    Ok(out)
}

impl Config {
    fn set(&mut self, line: usize, key: &str, v: &str) -> Result<(), ConfigError> {
        let f = |v: &str| parse_f64(line, key, v);
        match key {
            "total_length_km" => self.total_length_km = f(v)?,
            "nesting_n" => self.nesting_n = parse_u32(line, key, v)?,
            "channels_m" => self.channels_m = parse_u32(line, key, v)?,
            "p_emit" => self.p_emit = f(v)?,
            "eta_d" => self.eta_d = f(v)?,
            "l_att_km" => self.l_att_km = f(v)?,
            "fiber_speed_m_per_s" => self.fiber_speed_m_per_s = f(v)?,
            "source_rate_hz" => self.source_rate_hz = f(v)?,
            "direct_includes_eta_d" => self.direct_includes_eta_d = parse_bool(line, key, v)?,
            "memory_dephasing_per_s" => self.memory_dephasing_per_s = f(v)?,
            "delta_nu_hz" => self.delta_nu_hz = f(v)?,
            "omega_hz" => self.omega_hz = parse_opt(line, key, v)?,
            "epsilon_rad" => self.epsilon_rad = f(v)?,
            "xi" => self.xi = f(v)?,
            "gamma_er_up_hz" => self.gamma_er_up_hz = f(v)?,
            "gamma_er_down_hz" => self.gamma_er_down_hz = f(v)?,
            "gamma_eu_up_hz" => self.gamma_eu_up_hz = f(v)?,
            "gamma_eu_down_hz" => self.gamma_eu_down_hz = f(v)?,
            "gamma_star_er_hz" => self.gamma_star_er_hz = f(v)?,
            "gamma_star_eu_hz" => self.gamma_star_eu_hz = f(v)?,
            "chi_er_hz" => self.chi_er_hz = f(v)?,
            "chi_eu_hz" => self.chi_eu_hz = f(v)?,
            "delta_mu_er_cm" => self.delta_mu_er_cm = f(v)?,
            "delta_mu_eu_cm" => self.delta_mu_eu_cm = f(v)?,
            "mu_er_bohr" => self.mu_er_bohr = f(v)?,
            "mu_eu_nuclear" => self.mu_eu_nuclear = f(v)?,
            "separation_nm" => self.separation_nm = f(v)?,
            "epsilon_rel" => self.epsilon_rel = f(v)?,
            "unit_er" => self.unit_er = parse_vec3(line, key, v)?,
            "unit_eu" => self.unit_eu = parse_vec3(line, key, v)?,
            "unit_r" => self.unit_r = parse_vec3(line, key, v)?,
            "purcell" => self.purcell = parse_opt(line, key, v)?,
            "cooperativity" => self.cooperativity = parse_opt(line, key, v)?,
            "gamma_total_hz" => self.gamma_total_hz = f(v)?,
            "gamma_rad_hz" => self.gamma_rad_hz = f(v)?,
            "beta" => self.beta = f(v)?,
            "t2_opt_s" => self.t2_opt_s = f(v)?,
            "relax_r0_per_s" => self.relax_r0_per_s = f(v)?,
            "relax_alpha_d" => self.relax_alpha_d = parse_opt(line, key, v)?,
            "relax_g_factor" => self.relax_g_factor = f(v)?,
            "relax_temperature_k" => self.relax_temperature_k = f(v)?,
            "relax_field_t" => self.relax_field_t = f(v)?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    pub fn repeater(&self) -> RepeaterConfig {
        RepeaterConfig {
            total_length_l: self.total_length_km,
            nesting_n: self.nesting_n,
            channels_m: self.channels_m,
            p_emit: self.p_emit,
            eta_d: self.eta_d,
            l_att: self.l_att_km,
            fiber_speed_c: self.fiber_speed_m_per_s,
            source_rate: self.source_rate_hz,
            direct_includes_eta_d: self.direct_includes_eta_d,
        }
    }

    pub fn dissipation(&self) -> DissipationRates {
        DissipationRates {
            gamma_er_up: angular(self.gamma_er_up_hz),
            gamma_er_down: angular(self.gamma_er_down_hz),
            gamma_eu_up: angular(self.gamma_eu_up_hz),
            gamma_eu_down: angular(self.gamma_eu_down_hz),
            gamma_star_er: angular(self.gamma_star_er_hz),
            gamma_star_eu: angular(self.gamma_star_eu_hz),
            chi_er: angular(self.chi_er_hz),
            chi_eu: angular(self.chi_eu_hz),
        }
    }

    pub fn gate_params(&self) -> GateParams {
        let delta_nu = angular(self.delta_nu_hz);
        GateParams {
            delta_nu,
            omega: self
                .omega_hz
                .map(angular)
                .unwrap_or(delta_nu / 3f64.sqrt()),
            rates: self.dissipation(),
            epsilon: self.epsilon_rad,
            xi: self.xi,
        }
    }

    pub fn ion_pair(&self) -> IonPairConfig {
        IonPairConfig {
            delta_mu_er: self.delta_mu_er_cm,
            delta_mu_eu: self.delta_mu_eu_cm,
            mu_er_mag: self.mu_er_bohr * dipole::BOHR_MAGNETON,
            mu_eu_mag: self.mu_eu_nuclear * dipole::NUCLEAR_MAGNETON,
            separation_r: self.separation_nm * 1e-9,
            unit_er: self.unit_er,
            unit_eu: self.unit_eu,
            unit_r: self.unit_r,
            epsilon_rel: self.epsilon_rel,
        }
    }

    pub fn cavity(&self) -> CavityParams {
        CavityParams {
            purcell_p: self.purcell,
            gamma_total: angular(self.gamma_total_hz),
            gamma_rad: angular(self.gamma_rad_hz),
            beta: self.beta,
            t2_opt: self.t2_opt_s,
            cooperativity: self.cooperativity,
        }
    }

    pub fn relaxation(&self) -> Result<SpinRelaxationParams, CavityError> {
        let mut p = SpinRelaxationParams {
            r0: self.relax_r0_per_s,
            alpha_d: self.relax_alpha_d.unwrap_or(0.0),
            g_factor: self.relax_g_factor,
            temperature: self.relax_temperature_k,
            field_b: self.relax_field_t,
        };
        if self.relax_alpha_d.is_none() {
            let anchor = SpinRelaxationParams {
                temperature: 0.020,
                field_b: 1.0,
                ..p.clone()
            };
            p.alpha_d = cavity::calibrate_alpha_d(&anchor, 0.040)?;
        }
        Ok(p)
    }

    /// Converts and validates every parameter group.
    pub fn resolve(&self) -> Result<ParameterSet, ConfigError> {
        let repeater = self.repeater();
        repeater.validate()?;
        let gates = self.gate_params();
        gates.validate()?;
        let ion_pair = self.ion_pair();
        ion_pair.validate()?;
        let cavity = self.cavity();
        cavity.validate()?;
        let relaxation = self.relaxation()?;
        relaxation.validate()?;
        if !(self.memory_dephasing_per_s >= 0.0) {
            return Err(ConfigError::MemoryDephasing(self.memory_dephasing_per_s));
        }
        Ok(ParameterSet {
            config: self.clone(),
            repeater,
            gates,
            ion_pair,
            cavity,
            relaxation,
        })
    }

    /// Writes every key; re-parsing the output yields an identical config.
    pub fn emit(&self) -> String {
        let num = |x: f64| -> String {
            let a = x.abs();
            if a != 0.0 && !(1e-4..1e7).contains(&a) {
                format!("{x:e}")
            } else {
                format!("{x}")
            }
        };
        let opt = |x: Option<f64>| x.map(num).unwrap_or_else(|| "none".into());
        let vec = |v: &Vec3| format!("{},{},{}", num(v[0]), num(v[1]), num(v[2]));
        let values: Vec<String> = vec![
            num(self.total_length_km),
            self.nesting_n.to_string(),
            self.channels_m.to_string(),
            num(self.p_emit),
            num(self.eta_d),
            num(self.l_att_km),
            num(self.fiber_speed_m_per_s),
            num(self.source_rate_hz),
            self.direct_includes_eta_d.to_string(),
            num(self.memory_dephasing_per_s),
            num(self.delta_nu_hz),
            opt(self.omega_hz),
            num(self.epsilon_rad),
            num(self.xi),
            num(self.gamma_er_up_hz),
            num(self.gamma_er_down_hz),
            num(self.gamma_eu_up_hz),
            num(self.gamma_eu_down_hz),
            num(self.gamma_star_er_hz),
            num(self.gamma_star_eu_hz),
            num(self.chi_er_hz),
            num(self.chi_eu_hz),
            num(self.delta_mu_er_cm),
            num(self.delta_mu_eu_cm),
            num(self.mu_er_bohr),
            num(self.mu_eu_nuclear),
            num(self.separation_nm),
            num(self.epsilon_rel),
            vec(&self.unit_er),
            vec(&self.unit_eu),
            vec(&self.unit_r),
            opt(self.purcell),
            opt(self.cooperativity),
            num(self.gamma_total_hz),
            num(self.gamma_rad_hz),
            num(self.beta),
            num(self.t2_opt_s),
            num(self.relax_r0_per_s),
            opt(self.relax_alpha_d),
            num(self.relax_g_factor),
            num(self.relax_temperature_k),
            num(self.relax_field_t),
        ];
        debug_assert_eq!(values.len(), KEYS.len());
        let mut out = String::new();
        for ((key, unit), value) in KEYS.iter().zip(values) {
            let _ = writeln!(out, "# {unit}\n{key} = {value}");
        }
        out
    }
}

/// Parses a config file without validating parameter ranges.
pub fn parse_raw(text: &str) -> Result<Config, ConfigError> {
    let mut cfg = Config::default();
    let mut seen = std::collections::HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line,
            text: body.to_string(),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Syntax {
                line,
                text: body.to_string(),
            });
        }
        if !seen.insert(key.to_string()) {
            return Err(ConfigError::Duplicate {
                line,
                key: key.to_string(),
            });
        }
        cfg.set(line, key, value)?;
    }
    Ok(cfg)
}

/// Parses and validates a config file.
pub fn parse_config(text: &str) -> Result<ParameterSet, ConfigError> {
    parse_raw(text)?.resolve()
}
