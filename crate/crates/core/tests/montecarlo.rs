use ionrep::exec::Execution;
use ionrep::montecarlo::{self, RngPolicy, SlotProbabilities, TrialModel};
use ionrep::protocol::{propagate_frame, statevector_oracle, ErSide, OracleSwap};
use ionrep::rates::{self, RepeaterConfig};
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[test]
fn direct_link_slots_are_geometric() {
    let p = 0.15;
    let cfg = RepeaterConfig::default().with_nesting(0);
    let model = TrialModel::new(&cfg).unwrap().with_probabilities(SlotProbabilities {
        p_a: 1.0,
        p_b: p,
        p_s: 1.0,
        p_chain: 1.0,
    });
    let trials = 20_000u64;
    let bins = 20usize;
    let mut counts = vec![0u64; bins + 1];
    for i in 0..trials {
        let k = montecarlo::run_trial_with(&model, RngPolicy::new(3, i)).unwrap().slots_used as usize;
        counts[(k - 1).min(bins)] += 1;
    }
    let n = trials as f64;
    let mut stat = 0.0;
    for (k, &c) in counts.iter().enumerate() {
        let prob = if k < bins {
            p * (1.0 - p).powi(k as i32)
        } else {
            (1.0 - p).powi(bins as i32)
        };
        let e = n * prob;
        stat += (c as f64 - e).powi(2) / e;
    }
    let p_value = 1.0 - ChiSquared::new(bins as f64).unwrap().cdf(stat);
    assert!(p_value > 1e-3, "chi² = {stat:.1}, p = {p_value:e}");
}

#[test]
fn trial_frames_agree_with_propagation_and_oracle() {
    for n in 1..=2u32 {
        let cfg = RepeaterConfig::default().with_nesting(n);
        for i in 0..200 {
            let r = montecarlo::run_trial(&cfg, RngPolicy::new(11, i)).unwrap();
            assert_eq!(r.elementary.len(), 1 << n);
            assert_eq!(r.swaps.len(), (1 << n) - 1);
            let frame = propagate_frame(&r.elementary, &r.swaps).unwrap();
            assert_eq!(frame.label, r.end_frame.label);
            assert_eq!(frame.endpoints, r.end_frame.endpoints);
            let links: Vec<_> = r.elementary.iter().map(|f| f.label).collect();
            let swaps: Vec<_> = r
                .swaps
                .iter()
                .map(|s| OracleSwap {
                    junction: s.node,
                    m1: s.m1.bit(),
                    m2: s.m2.bit(),
                })
                .collect();
            assert_eq!(statevector_oracle(&links, &swaps, ErSide::Right).unwrap(), frame.label);
        }
    }
}

#[test]
fn std_err_shrinks_like_inverse_sqrt_trials() {
    let cfg = RepeaterConfig::default().with_nesting(1);
    let small = montecarlo::estimate_rate(&cfg, 1_000, 1, Execution::Parallel).unwrap();
    let large = montecarlo::estimate_rate(&cfg, 16_000, 1, Execution::Parallel).unwrap();
    let ratio = small.std_err / large.std_err;
    assert!((ratio / 4.0 - 1.0).abs() < 0.15, "ratio {ratio}");
    let analytic = rates::expected_time(&cfg).unwrap();
    assert!((large.mean_time - analytic).abs() < 4.0 * large.std_err);
}

#[test]
fn multiplexed_mean_slots_match_minimum_of_channels() {
    let cfg = RepeaterConfig::default().with_channels(50);
    let pt = rates::per_attempt_probability(&cfg).unwrap();
    let want = 1.0 / rates::multiplexed_probability(pt, 50);
    let est = montecarlo::estimate_rate(&cfg, 20_000, 4, Execution::Parallel).unwrap();
    assert!((est.mean_slots / want - 1.0).abs() < 0.03, "{} vs {want}", est.mean_slots);
}

#[test]
fn sequential_and_parallel_estimates_are_identical() {
    let cfg = RepeaterConfig::default().with_nesting(2);
    let a = montecarlo::estimate_rate(&cfg, 500, 8, Execution::Sequential).unwrap();
    let b = montecarlo::estimate_rate(&cfg, 500, 8, Execution::Parallel).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn every_trial_takes_at_least_one_slot(n in 0u32..=3, seed in any::<u64>(), i in 0u64..1000) {
        let cfg = RepeaterConfig::default().with_nesting(n).with_length(200.0);
        let r = montecarlo::run_trial(&cfg, RngPolicy::new(seed, i)).unwrap();
        prop_assert!(r.slots_used >= 1);
        prop_assert!(r.wall_time >= cfg.slot_time());
        prop_assert!(r.fidelity_estimate > 0.0 && r.fidelity_estimate <= 1.0);
    }
}
