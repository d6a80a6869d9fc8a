//! Analytic entanglement-distribution rates for a nested repeater chain and
//! the repeaterless baselines.
//!
//! With elementary link length `L₀ = L/2ⁿ`:
//!
//! ```text
//! p_t = ½ η_t² p² η_d²,   η_t = e^{−L₀/(2 L_att)}
//! p_m = p η_d,   p_s = p_m²
//! p₀  = (1/P_A + 1/P_B)⁻¹,   P_A = p_t,  P_B = p_t p_m²
//! ⟨T⟩ = (L₀/c) / (p_t p_m²)                      n = 0
//! ⟨T⟩ = (3/2)^{n−1} (L₀/c) / (p₀ p_sⁿ)           n ≥ 1
//! ```

use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RatesError {
    #[error("`{name}` = {value} must lie in [0, 1]")]
    Probability { name: &'static str, value: f64 },
    #[error("`{name}` = {value} must be positive")]
    NonPositive { name: &'static str, value: f64 },
    #[error("channel count must be at least 1")]
    Channels,
    #[error("nesting level {0} is too deep")]
    Nesting(u32),
    #[error("unknown scheme `{0}` (expected repeater, repeater_multiplexed, direct or plob)")]
    UnknownScheme(String),
    #[error("invalid search interval [{0}, {1}] km")]
    Interval(f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepeaterConfig {
    /// Total distance L, km.
    pub total_length_l: f64,
    pub nesting_n: u32,
    pub channels_m: u32,
    /// Probability that an excitation emits a photon into the cavity mode.
    pub p_emit: f64,
    /// Detector efficiency.
    pub eta_d: f64,
    /// Attenuation length, km.
    pub l_att: f64,
    /// Signal speed in fiber, m/s.
    pub fiber_speed_c: f64,
    /// Photon source rate of the direct and PLOB baselines, Hz.
    pub source_rate: f64,
    /// Whether the direct-transmission baseline carries one η_d factor.
    pub direct_includes_eta_d: bool,
}

impl Default for RepeaterConfig {
    fn default() -> Self {
        Self {
            total_length_l: 600.0,
            nesting_n: 3,
            channels_m: 1,
            p_emit: 0.9,
            eta_d: 0.9,
            l_att: 22.0,
            fiber_speed_c: 2e8,
            source_rate: 1e10,
            direct_includes_eta_d: true,
        }
    }
}

/// Deepest supported nesting level (2³⁰ elementary links).
pub const MAX_NESTING: u32 = 30;

impl RepeaterConfig {
    pub fn with_length(mut self, km: f64) -> Self {
        self.total_length_l = km;
        self
    }

    pub fn with_nesting(mut self, n: u32) -> Self {
        self.nesting_n = n;
        self
    }

    pub fn with_channels(mut self, m: u32) -> Self {
        self.channels_m = m;
        self
    }

    pub fn validate(&self) -> Result<(), RatesError> {
        for (name, value) in [("p_emit", self.p_emit), ("eta_d", self.eta_d)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(RatesError::Probability { name, value });
            }
        }
        for (name, value) in [
            ("total_length_l", self.total_length_l),
            ("l_att", self.l_att),
            ("fiber_speed_c", self.fiber_speed_c),
            ("source_rate", self.source_rate),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(RatesError::NonPositive { name, value });
            }
        }
        if self.channels_m < 1 {
            return Err(RatesError::Channels);
        }
        if self.nesting_n > MAX_NESTING {
            return Err(RatesError::Nesting(self.nesting_n));
        }
        Ok(())
    }

    /// Elementary link length L₀, km.
    pub fn elementary_length(&self) -> f64 {
        self.total_length_l / 2f64.powi(self.nesting_n as i32)
    }

    /// Heralding slot L₀/c, s.
    pub fn slot_time(&self) -> f64 {
        self.elementary_length() * 1e3 / self.fiber_speed_c
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuccessProbabilities {
    /// Heralded generation on one elementary link.
    pub p_t: f64,
    /// One optical readout.
    pub p_m: f64,
    /// Swap (two readouts).
    pub p_s: f64,
    /// Both links of a first-level pair, attempted one after the other.
    pub p_0: f64,
}

impl SuccessProbabilities {
    /// Generation followed by mapping on both ends: P_B = p_t p_m².
    pub fn p_link(&self) -> f64 {
        self.p_t * self.p_m * self.p_m
    }
}

pub fn success_probabilities(cfg: &RepeaterConfig) -> Result<SuccessProbabilities, RatesError> {
    cfg.validate()?;
    let l0 = cfg.elementary_length();
    let eta_t2 = (-l0 / cfg.l_att).exp();
    let p_t = 0.5 * eta_t2 * (cfg.p_emit * cfg.eta_d).powi(2);
    let p_m = cfg.p_emit * cfg.eta_d;
    let p_s = p_m * p_m;
    let pa = p_t;
    let pb = p_t * p_m * p_m;
    let p_0 = if pa > 0.0 && pb > 0.0 {
        1.0 / (1.0 / pa + 1.0 / pb)
    } else {
        0.0
    };
    Ok(SuccessProbabilities { p_t, p_m, p_s, p_0 })
}

/// Mean end-to-end distribution time, s. Infinite when a probability is 0.
pub fn expected_time(cfg: &RepeaterConfig) -> Result<f64, RatesError> {
    let p = success_probabilities(cfg)?;
    let slot = cfg.slot_time();
    let n = cfg.nesting_n;
    let t = if n == 0 {
        slot / p.p_link()
    } else {
        1.5f64.powi(n as i32 - 1) * slot / (p.p_0 * p.p_s.powi(n as i32))
    };
    Ok(t)
}

/// Per-slot end-to-end success probability used for multiplexing,
/// `P_t = (2/3)^{n−1} p₀ p_sⁿ` (and `p_t p_m²` for n = 0).
pub fn per_attempt_probability(cfg: &RepeaterConfig) -> Result<f64, RatesError> {
    let p = success_probabilities(cfg)?;
    let n = cfg.nesting_n;
    Ok(if n == 0 {
        p.p_link()
    } else {
        (2.0f64 / 3.0).powi(n as i32 - 1) * p.p_0 * p.p_s.powi(n as i32)
    })
}

/// Probability that at least one of `m` channels succeeds in a slot.
pub fn multiplexed_probability(p_single: f64, m: u32) -> f64 {
    if p_single >= 1.0 {
        return 1.0;
    }
    -f64::exp_m1(m as f64 * f64::ln_1p(-p_single))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Repeater,
    RepeaterMultiplexed,
    Direct,
    Plob,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [
        Scheme::Repeater,
        Scheme::RepeaterMultiplexed,
        Scheme::Direct,
        Scheme::Plob,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Repeater => "repeater",
            Scheme::RepeaterMultiplexed => "repeater_multiplexed",
            Scheme::Direct => "direct",
            Scheme::Plob => "plob",
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = RatesError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| RatesError::UnknownScheme(s.to_string()))
    }
}

/// Fiber transmissivity over the full distance.
pub fn transmissivity(cfg: &RepeaterConfig) -> f64 {
    (-cfg.total_length_l / cfg.l_att).exp()
}

/// Entanglement distribution rate of a scheme, Hz.
pub fn scheme_rate(cfg: &RepeaterConfig, scheme: Scheme) -> Result<f64, RatesError> {
    cfg.validate()?;
    Ok(match scheme {
        Scheme::Repeater => 1.0 / expected_time(cfg)?,
        Scheme::RepeaterMultiplexed => {
            multiplexed_probability(per_attempt_probability(cfg)?, cfg.channels_m) / cfg.slot_time()
        }
        Scheme::Direct => {
            let eta_d = if cfg.direct_includes_eta_d { cfg.eta_d } else { 1.0 };
            cfg.source_rate * transmissivity(cfg) * eta_d
        }
        // Channel uses at source_rate·ln 2 per second times −log₂(1−η).
        Scheme::Plob => -cfg.source_rate * f64::ln_1p(-transmissivity(cfg)),
    })
}

/// Distance (km) in `[lo, hi]` where the repeater rate overtakes direct
/// transmission, found by bisection on the log-ratio. `None` when the sign
/// does not change over the interval.
pub fn crossover_distance(
    cfg: &RepeaterConfig,
    scheme: Scheme,
    lo: f64,
    hi: f64,
) -> Result<Option<f64>, RatesError> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(RatesError::Interval(lo, hi));
    }
    let gap = |l: f64| -> Result<f64, RatesError> {
        let c = cfg.clone().with_length(l);
        Ok(scheme_rate(&c, scheme)?.ln() - scheme_rate(&c, Scheme::Direct)?.ln())
    };
    let (mut a, mut b) = (lo, hi);
    let (mut ga, gb) = (gap(a)?, gap(b)?);
    if ga.signum() == gb.signum() {
        return Ok(None);
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        let gm = gap(mid)?;
        if gm.signum() == ga.signum() {
            a = mid;
            ga = gm;
        } else {
            b = mid;
        }
        if b - a < 1e-9 * hi {
            break;
        }
    }
    Ok(Some(0.5 * (a + b)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lossless_limit() {
        let cfg = RepeaterConfig {
            p_emit: 1.0,
            eta_d: 1.0,
            l_att: 1e300,
            ..Default::default()
        };
        let p = success_probabilities(&cfg).unwrap();
        assert!((p.p_t - 0.5).abs() < 1e-12);
        assert_eq!((p.p_m, p.p_s), (1.0, 1.0));
        assert!((p.p_0 - 0.25).abs() < 1e-12);
    }

    #[test]
    fn nominal_chain_probabilities() {
        let p = success_probabilities(&RepeaterConfig::default()).unwrap();
        assert!((p.p_t - 1.0849e-2).abs() < 1e-5);
        assert!((p.p_m - 0.81).abs() < 1e-12);
        assert!((p.p_s - 0.6561).abs() < 1e-12);
        assert!((p.p_0 - 4.298e-3).abs() < 1e-6);
    }

    #[test]
    fn doubling_l0_scales_pt() {
        let a = RepeaterConfig::default().with_nesting(1);
        let b = a.clone().with_length(a.total_length_l * 2.0);
        let pa = success_probabilities(&a).unwrap().p_t;
        let pb = success_probabilities(&b).unwrap().p_t;
        let want = (-a.elementary_length() / a.l_att).exp();
        assert!((pb / pa - want).abs() < 1e-12);
    }

    #[test]
    fn expected_time_examples() {
        let t = expected_time(&RepeaterConfig::default()).unwrap();
        assert!((t - 0.695).abs() < 0.005, "{t}");
        let c1 = RepeaterConfig::default().with_nesting(1);
        let p = success_probabilities(&c1).unwrap();
        assert_eq!(expected_time(&c1).unwrap(), c1.slot_time() / (p.p_0 * p.p_s));
        // Unit probabilities, L₀/c = 1 ms.
        let unit = RepeaterConfig {
            total_length_l: 400.0,
            nesting_n: 1,
            p_emit: 1.0,
            eta_d: 1.0,
            l_att: 1e300,
            ..Default::default()
        };
        assert!((unit.slot_time() - 1e-3).abs() < 1e-15);
        assert!((expected_time(&unit).unwrap() - 4e-3).abs() < 1e-12);
    }

    #[test]
    fn multiplexing() {
        let single = RepeaterConfig::default();
        let m1 = scheme_rate(&single, Scheme::RepeaterMultiplexed).unwrap();
        let pt = per_attempt_probability(&single).unwrap();
        assert!((m1 - pt / single.slot_time()).abs() < 1e-12 * m1);
        let m100 = scheme_rate(&single.clone().with_channels(100), Scheme::RepeaterMultiplexed)
            .unwrap();
        assert!((m100 - 140.1).abs() < 0.5, "{m100}");
        let ratio = m100 / scheme_rate(&single, Scheme::Repeater).unwrap();
        assert!((90.0..=105.0).contains(&ratio), "{ratio}");
    }

    #[test]
    fn baselines() {
        let cfg = RepeaterConfig::default();
        let direct = scheme_rate(&cfg, Scheme::Direct).unwrap();
        assert!((direct - 1e10 * (-600.0f64 / 22.0).exp() * 0.9).abs() < 1e-12);
        let no_eta = RepeaterConfig {
            direct_includes_eta_d: false,
            ..cfg.clone()
        };
        assert!((scheme_rate(&no_eta, Scheme::Direct).unwrap() - 0.0143).abs() < 1e-4);
        let short = cfg.clone().with_length(10.0);
        let eta = (-10.0f64 / 22.0).exp();
        let plob = scheme_rate(&short, Scheme::Plob).unwrap();
        assert!((plob - 1e10 * std::f64::consts::LN_2 * -(1.0 - eta).log2()).abs() < 1e-3 * plob);
        // Small-η limit of the bound equals the lossless direct rate.
        assert!((scheme_rate(&cfg, Scheme::Plob).unwrap() / (direct / 0.9) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn crossover_in_window() {
        let cfg = RepeaterConfig::default();
        let x = crossover_distance(&cfg, Scheme::Repeater, 300.0, 600.0).unwrap().unwrap();
        assert!(x > 300.0 && x < 600.0);
        assert!(crossover_distance(&cfg, Scheme::Repeater, 700.0, 900.0).unwrap().is_none());
        assert!(crossover_distance(&cfg, Scheme::Repeater, 10.0, 5.0).is_err());
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert!("dlcz".parse::<Scheme>().is_err());
    }

    #[test]
    fn validation() {
        let bad = RepeaterConfig {
            eta_d: 1.2,
            ..Default::default()
        };
        assert!(matches!(bad.validate(), Err(RatesError::Probability { name: "eta_d", .. })));
        assert_eq!(
            RepeaterConfig::default().with_channels(0).validate(),
            Err(RatesError::Channels)
        );
        assert!(RepeaterConfig::default().with_length(0.0).validate().is_err());
    }

    proptest! {
        #[test]
        fn multiplexed_monotone_and_bounded(m in 1u32..500, l in 50.0f64..1500.0, n in 0u32..5) {
            let cfg = RepeaterConfig::default().with_length(l).with_nesting(n);
            let a = scheme_rate(&cfg.clone().with_channels(m), Scheme::RepeaterMultiplexed).unwrap();
            let b = scheme_rate(&cfg.clone().with_channels(m + 1), Scheme::RepeaterMultiplexed).unwrap();
            prop_assert!(b >= a);
            prop_assert!(b <= 1.0 / cfg.slot_time() * (1.0 + 1e-12));
        }

        #[test]
        fn small_pt_multiplexing_is_linear(m in 1u32..200, l in 400.0f64..1200.0) {
            let cfg = RepeaterConfig::default().with_length(l);
            let pt = per_attempt_probability(&cfg).unwrap();
            prop_assume!(m as f64 * pt < 0.1);
            let single = scheme_rate(&cfg, Scheme::RepeaterMultiplexed).unwrap();
            let multi = scheme_rate(&cfg.with_channels(m), Scheme::RepeaterMultiplexed).unwrap();
            prop_assert!((multi / (m as f64 * single) - 1.0).abs() < 0.05);
        }

        #[test]
        fn expected_time_increasing(l in 1.0f64..2000.0, dl in 1e-3f64..50.0, n in 0u32..6) {
            let cfg = RepeaterConfig::default().with_nesting(n);
            let a = expected_time(&cfg.clone().with_length(l)).unwrap();
            let b = expected_time(&cfg.clone().with_length(l + dl)).unwrap();
            prop_assert!(b > a);
            // Continuity: a tiny step changes the time by a tiny fraction.
            let c = expected_time(&cfg.with_length(l + 1e-9)).unwrap();
            prop_assert!((c / a - 1.0).abs() < 1e-6);
        }
    }
}
