//! Slotted Monte Carlo simulation of the nested repeater protocol.
//!
//! Time advances in heralding slots of `L₀/c`. A first-level block builds its
//! two elementary links one after the other: link A (generation, success
//! `p_t` per slot) and then link B (generation plus mapping into the Eu
//! memories, success `p_t p_m²`). Blocks at higher levels build both children
//! in parallel and wait for the slower one. Every swap succeeds with `p_s`;
//! a failed swap discards both inputs and the block starts over.
//!
//! With `channels_m > 1` each channel runs the whole chain independently with
//! per-slot success `P_t` and the trial ends at the first success on any
//! channel.
//!
//! Trial `i` of a run seeded with `s` draws from ChaCha8 seeded with `s` on
//! stream `i`, so results do not depend on scheduling.

use crate::exec::Execution;
use crate::gates::{closed_form_fidelity, GateKind, GateParams};
use crate::protocol::{self, Basis, BellFrame, BellLabel, MeasurementRecord, SwapResult};
use crate::rates::{self, RatesError, RepeaterConfig};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MonteCarloError {
    #[error("need at least {min} trials, got {got}")]
    TooFewTrials { got: usize, min: usize },
    #[error("per-slot success probability `{0}` is zero; the protocol never completes")]
    ZeroProbability(&'static str),
    #[error("probability `{name}` = {value} outside [0, 1]")]
    Probability { name: &'static str, value: f64 },
    #[error("half-factor check needs nesting level ≥ 2, got {0}")]
    Nesting(u32),
    #[error(transparent)]
    Rates(#[from] RatesError),
}

pub const MIN_TRIALS: usize = 100;

/// Identifies the random stream of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngPolicy {
    pub seed: u64,
    pub trial_index: u64,
}

impl RngPolicy {
    pub fn new(seed: u64, trial_index: u64) -> Self {
        Self { seed, trial_index }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.trial_index);
        rng
    }
}

/// Per-slot and per-operation success probabilities driving a trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotProbabilities {
    /// Link A: heralded generation.
    pub p_a: f64,
    /// Link B: generation followed by mapping on both ends.
    pub p_b: f64,
    /// Swap.
    pub p_s: f64,
    /// End-to-end per-slot success of one channel (multiplexed mode).
    pub p_chain: f64,
}

impl SlotProbabilities {
    pub fn from_config(cfg: &RepeaterConfig) -> Result<Self, MonteCarloError> {
        let p = rates::success_probabilities(cfg)?;
        Ok(Self {
            p_a: p.p_t,
            p_b: p.p_link(),
            p_s: p.p_s,
            p_chain: rates::per_attempt_probability(cfg)?,
        })
    }

    /// Every operation succeeds first time.
    pub fn certain() -> Self {
        Self {
            p_a: 1.0,
            p_b: 1.0,
            p_s: 1.0,
            p_chain: 1.0,
        }
    }

    fn validate(&self, multiplexed: bool) -> Result<(), MonteCarloError> {
        for (name, value) in [
            ("p_a", self.p_a),
            ("p_b", self.p_b),
            ("p_s", self.p_s),
            ("p_chain", self.p_chain),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(MonteCarloError::Probability { name, value });
            }
        }
        let needed: &[(&'static str, f64)] = if multiplexed {
            &[("p_chain", self.p_chain)]
        } else {
            &[("p_a", self.p_a), ("p_b", self.p_b), ("p_s", self.p_s)]
        };
        for &(name, value) in needed {
            if value == 0.0 {
                return Err(MonteCarloError::ZeroProbability(name));
            }
        }
        Ok(())
    }
}

/// Closed-form gate fidelities used for the end-to-end estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateFidelities {
    pub state_transfer: f64,
    pub cnot: f64,
    pub reverse_cnot: f64,
}

impl GateFidelities {
    pub fn from_params(params: &GateParams) -> Result<Self, crate::gates::GateError> {
        Ok(Self {
            state_transfer: closed_form_fidelity(GateKind::StateTransfer, params)?.fidelity,
            cnot: closed_form_fidelity(GateKind::Cnot, params)?.fidelity,
            reverse_cnot: closed_form_fidelity(GateKind::ReverseCnot, params)?.fidelity,
        })
    }

    pub fn perfect() -> Self {
        Self {
            state_transfer: 1.0,
            cnot: 1.0,
            reverse_cnot: 1.0,
        }
    }
}

impl Default for GateFidelities {
    fn default() -> Self {
        Self::from_params(&GateParams::nominal()).expect("preset gate parameters are valid")
    }
}

/// Everything a trial needs besides its random stream.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialModel {
    pub repeater: RepeaterConfig,
    pub probabilities: SlotProbabilities,
    pub gates: GateFidelities,
    /// Memory dephasing rate during waits, 1/s. Zero reproduces the
    /// rate analysis.
    pub memory_dephasing: f64,
}

impl TrialModel {
    pub fn new(cfg: &RepeaterConfig) -> Result<Self, MonteCarloError> {
        Ok(Self {
            repeater: cfg.clone(),
            probabilities: SlotProbabilities::from_config(cfg)?,
            gates: GateFidelities::default(),
            memory_dephasing: 0.0,
        })
    }

    pub fn with_probabilities(mut self, p: SlotProbabilities) -> Self {
        self.probabilities = p;
        self
    }

    fn multiplexed(&self) -> bool {
        self.repeater.channels_m > 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    /// Number of L₀/c slots until the end-to-end pair exists.
    pub slots_used: u64,
    /// `slots_used · L₀/c`, s.
    pub wall_time: f64,
    pub end_frame: BellFrame,
    pub fidelity_estimate: f64,
    /// Elementary links of the final successful attempt, left to right.
    pub elementary: Vec<BellFrame>,
    /// Swaps of the final successful attempt, in execution order.
    pub swaps: Vec<SwapResult>,
    /// Number of state-transfer gates in the final structure.
    pub mappings: u32,
    /// Swap failures that forced regeneration.
    pub swap_failures: u64,
}

struct Block {
    label: BellLabel,
    elementary: Vec<BellFrame>,
    swaps: Vec<SwapResult>,
    mappings: u32,
}

struct Sampler {
    a: Geometric,
    b: Geometric,
    p_s: f64,
}

impl Sampler {
    fn new(p: &SlotProbabilities) -> Self {
        Self {
            a: Geometric::new(p.p_a).expect("validated probability"),
            b: Geometric::new(p.p_b).expect("validated probability"),
            p_s: p.p_s,
        }
    }
}

/// Slots until success of a Bernoulli(p) attempt per slot (≥ 1).
fn slots(dist: &Geometric, rng: &mut ChaCha8Rng) -> u64 {
    dist.sample(rng).saturating_add(1)
}

fn bit(rng: &mut ChaCha8Rng) -> bool {
    rng.random::<bool>()
}

fn heralded_label(rng: &mut ChaCha8Rng) -> BellLabel {
    if bit(rng) {
        BellLabel::PsiPlus
    } else {
        BellLabel::PsiMinus
    }
}

/// Link mapped into the memories: heralded label plus two X readouts.
fn mapped_link(left: usize, rng: &mut ChaCha8Rng) -> BellFrame {
    let frame = BellFrame::new(heralded_label(rng), left, left + 1).expect("distinct nodes");
    let x = |node, rng: &mut ChaCha8Rng| {
        MeasurementRecord::new(node, Basis::X, protocol::spin_from_bit(bit(rng)))
    };
    let (m1, m2) = (x(left, rng), x(left + 1, rng));
    frame.mapped(&m1, &m2)
}

fn swap(node: usize, left: Block, right: Block, rng: &mut ChaCha8Rng) -> Block {
    let (m1, m2) = (bit(rng), bit(rng));
    let result = SwapResult::from_bits(node, m1, m2);
    let label = protocol::swap_labels(left.label, right.label, &result.m1, &result.m2)
        .expect("swap readouts use fixed bases");
    let mut elementary = left.elementary;
    elementary.extend(right.elementary);
    let mut swaps = left.swaps;
    swaps.extend(right.swaps);
    swaps.push(result);
    Block {
        label,
        elementary,
        swaps,
        mappings: left.mappings + right.mappings,
    }
}

/// Builds the block of `level` starting at node `start`; returns slots used.
fn build(
    level: u32,
    start: usize,
    s: &Sampler,
    rng: &mut ChaCha8Rng,
    failures: &mut u64,
) -> (u64, Block) {
    match level {
        0 => {
            let t = slots(&s.b, rng);
            let link = mapped_link(start, rng);
            (
                t,
                Block {
                    label: link.label,
                    elementary: vec![link],
                    swaps: Vec::new(),
                    mappings: 2,
                },
            )
        }
        1 => {
            let mut t = 0u64;
            loop {
                t += slots(&s.a, rng) + slots(&s.b, rng);
                if rng.random::<f64>() < s.p_s {
                    // A is the left link (kept in Er), B the right one (mapped).
                    let a = BellFrame::new(heralded_label(rng), start, start + 1)
                        .expect("distinct nodes");
                    let b = mapped_link(start + 1, rng);
                    let left = Block {
                        label: a.label,
                        elementary: vec![a],
                        swaps: Vec::new(),
                        mappings: 0,
                    };
                    let right = Block {
                        label: b.label,
                        elementary: vec![b],
                        swaps: Vec::new(),
                        mappings: 2,
                    };
                    return (t, swap(start + 1, left, right, rng));
                }
                *failures += 1;
            }
        }
        _ => {
            let half = 1usize << (level - 1);
            let mut t = 0u64;
            loop {
                let (tl, left) = build(level - 1, start, s, rng, failures);
                let (tr, right) = build(level - 1, start + half, s, rng, failures);
                t += tl.max(tr);
                if rng.random::<f64>() < s.p_s {
                    return (t, swap(start + half, left, right, rng));
                }
                *failures += 1;
            }
        }
    }
}

fn fidelity_estimate(model: &TrialModel, block: &Block, wall_time: f64) -> f64 {
    let g = &model.gates;
    let f = g.state_transfer.powi(block.mappings as i32)
        * (g.cnot * g.reverse_cnot).powi(block.swaps.len() as i32)
        * (-model.memory_dephasing * wall_time).exp();
    f.clamp(0.0, 1.0)
}

/// Runs one trial under a prepared model.
pub fn run_trial_with(model: &TrialModel, policy: RngPolicy) -> Result<TrialResult, MonteCarloError> {
    model.repeater.validate()?;
    let multiplexed = model.multiplexed();
    model.probabilities.validate(multiplexed)?;
    let mut rng = policy.rng();
    let mut failures = 0u64;
    let n = model.repeater.nesting_n;
    let (slots_used, block) = if multiplexed {
        let chain = Geometric::new(model.probabilities.p_chain).expect("validated probability");
        let t = (0..model.repeater.channels_m)
            .map(|_| slots(&chain, &mut rng))
            .min()
            .expect("at least one channel");
        let (_, block) = build(n, 0, &Sampler::new(&SlotProbabilities::certain()), &mut rng, &mut 0);
        (t, block)
    } else {
        build(n, 0, &Sampler::new(&model.probabilities), &mut rng, &mut failures)
    };
    let wall_time = slots_used as f64 * model.repeater.slot_time();
    let end_frame = BellFrame {
        label: block.label,
        corrections: Vec::new(),
        endpoints: (0, 1usize << n),
    };
    Ok(TrialResult {
        slots_used,
        wall_time,
        fidelity_estimate: fidelity_estimate(model, &block, wall_time),
        end_frame,
        mappings: block.mappings,
        elementary: block.elementary,
        swaps: block.swaps,
        swap_failures: failures,
    })
}

/// Runs one trial with closed-form gate fidelities at the preset parameters.
pub fn run_trial(cfg: &RepeaterConfig, policy: RngPolicy) -> Result<TrialResult, MonteCarloError> {
    run_trial_with(&TrialModel::new(cfg)?, policy)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEstimate {
    pub trials: usize,
    /// Sample mean of the distribution time, s.
    pub mean_time: f64,
    /// Standard error of the mean, s.
    pub std_err: f64,
    /// `1 / mean_time`, Hz.
    pub rate: f64,
    pub mean_slots: f64,
    pub mean_fidelity: f64,
}

/// Mean distribution time over independent trials.
pub fn estimate_rate_with(
    model: &TrialModel,
    trials: usize,
    seed: u64,
    exec: Execution,
) -> Result<RateEstimate, MonteCarloError> {
    if trials < MIN_TRIALS {
        return Err(MonteCarloError::TooFewTrials {
            got: trials,
            min: MIN_TRIALS,
        });
    }
    let results = exec.map_indexed(trials, |i| {
        run_trial_with(model, RngPolicy::new(seed, i as u64))
            .map(|r| (r.slots_used, r.fidelity_estimate))
    });
    let mut samples = Vec::with_capacity(trials);
    for r in results {
        samples.push(r?);
    }
    // Sequential reduction in trial order keeps sums bit-reproducible.
    let slot = model.repeater.slot_time();
    let n = trials as f64;
    let mean_slots = samples.iter().map(|s| s.0 as f64).sum::<f64>() / n;
    let var = samples
        .iter()
        .map(|s| (s.0 as f64 - mean_slots).powi(2))
        .sum::<f64>()
        / (n - 1.0);
    let mean_fidelity = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let mean_time = mean_slots * slot;
    Ok(RateEstimate {
        trials,
        mean_time,
        std_err: (var / n).sqrt() * slot,
        rate: 1.0 / mean_time,
        mean_slots,
        mean_fidelity,
    })
}

pub fn estimate_rate(
    cfg: &RepeaterConfig,
    trials: usize,
    seed: u64,
    exec: Execution,
) -> Result<RateEstimate, MonteCarloError> {
    estimate_rate_with(&TrialModel::new(cfg)?, trials, seed, exec)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfFactor {
    /// Child success probability per slot.
    pub p: f64,
    /// Measured E[max of two children] / E[one child].
    pub ratio: f64,
    /// Exact ratio `(3 − 2p)/(2 − p)` for geometric children.
    pub exact: f64,
    /// `ratio / 1.5 − 1`.
    pub deviation: f64,
}

/// Measures the waiting-time factor for two independent children that each
/// succeed with probability `p` per slot.
pub fn half_factor_with_probability(
    p: f64,
    trials: usize,
    seed: u64,
    exec: Execution,
) -> Result<HalfFactor, MonteCarloError> {
    if trials < MIN_TRIALS {
        return Err(MonteCarloError::TooFewTrials {
            got: trials,
            min: MIN_TRIALS,
        });
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(MonteCarloError::Probability {
            name: "p",
            value: p,
        });
    }
    let dist = Geometric::new(p).expect("checked probability");
    let draws = exec.map_indexed(trials, |i| {
        let mut rng = RngPolicy::new(seed, i as u64).rng();
        let a = slots(&dist, &mut rng);
        let b = slots(&dist, &mut rng);
        (a, a.max(b))
    });
    let single = draws.iter().map(|d| d.0 as f64).sum::<f64>();
    let both = draws.iter().map(|d| d.1 as f64).sum::<f64>();
    let ratio = both / single;
    Ok(HalfFactor {
        p,
        ratio,
        exact: (3.0 - 2.0 * p) / (2.0 - p),
        deviation: ratio / 1.5 - 1.0,
    })
}

/// Waiting-time factor for children of a level-2 block: each child is
/// modelled as a geometric wait with per-slot success `p₀ p_s`.
pub fn half_factor_check(
    cfg: &RepeaterConfig,
    trials: usize,
    seed: u64,
    exec: Execution,
) -> Result<HalfFactor, MonteCarloError> {
    if cfg.nesting_n < 2 {
        return Err(MonteCarloError::Nesting(cfg.nesting_n));
    }
    let p = rates::success_probabilities(cfg)?;
    half_factor_with_probability(p.p_0 * p.p_s, trials, seed, exec)
}
