use proptest::prelude::*;

use quake_recovery::harness::{auc, RecoveryCurve};
use quake_recovery::hazard::{pipe_failure_prob_ub, DamageState};
use quake_recovery::planner::{ocba_allocate, OcbaConfig, QEstimate};
use quake_recovery::rng::stream;
use quake_recovery::sim::{enumerate_actions, DamagedComponent};
use quake_recovery::{
    ComponentKind, HazardConfig, RecoverySim, RecoveryState, RepairModel, WaterNetwork,
};

fn network() -> &'static WaterNetwork {
    use std::sync::OnceLock;
    static NET: OnceLock<WaterNetwork> = OnceLock::new();
    NET.get_or_init(WaterNetwork::gilroy_default)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn repairing_never_reduces_service(
        operational in prop::collection::vec(any::<bool>(), 57),
        extra in 0usize..57,
    ) {
        let net = network();
        let before = net.served_population(&operational);
        let mut after = operational.clone();
        after[extra] = true;
        prop_assert!(net.served_population(&after) >= before);
        prop_assert!(before <= net.total_population());
    }

    #[test]
    fn pipe_bound_is_monotone_probability(
        k in 0.0f64..3.0, l in 0.0f64..20.0, pgv in 0.0f64..300.0,
        dk in 0.0f64..1.0, dl in 0.0f64..5.0, dv in 0.0f64..50.0,
    ) {
        let p = pipe_failure_prob_ub(k, l, pgv).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!(pipe_failure_prob_ub(k + dk, l, pgv).unwrap() >= p);
        prop_assert!(pipe_failure_prob_ub(k, l + dl, pgv).unwrap() >= p);
        prop_assert!(pipe_failure_prob_ub(k, l, pgv + dv).unwrap() >= p);
    }

    #[test]
    fn fragility_rows_are_consistent(im in 0.0f64..5.0, dim in 0.0f64..1.0) {
        let cfg = HazardConfig::default_scenario();
        for kind in [ComponentKind::Well, ComponentKind::BoosterPump, ComponentKind::Tank] {
            let row = cfg.fragility.row(kind).unwrap();
            let ex = row.exceedance(im);
            prop_assert!(ex.windows(2).all(|w| w[1] <= w[0]));
            let probs = row.state_probabilities(im);
            prop_assert!(probs.iter().all(|&p| p >= 0.0));
            prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let ex2 = row.exceedance(im + dim);
            prop_assert!(ex.iter().zip(&ex2).all(|(a, b)| b >= a));
        }
    }

    #[test]
    fn ocba_allocation_conserves_samples(
        samples in prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 2..12), 2..10),
        increment in 1u64..200,
    ) {
        let estimates: Vec<QEstimate> = samples
            .iter()
            .enumerate()
            .map(|(i, xs)| {
                let mut e = QEstimate::new(i);
                for &x in xs {
                    e.push(x);
                }
                e
            })
            .collect();
        let extra = ocba_allocate(&estimates, increment, &OcbaConfig::with_budget(0)).unwrap();
        prop_assert_eq!(extra.len(), estimates.len());
        prop_assert_eq!(extra.iter().sum::<u64>(), increment);
    }

    #[test]
    fn transitions_make_progress(seed in any::<u64>(), crews in 1usize..5, picks in prop::collection::vec(0usize..57, 1..10)) {
        let net = network();
        let sim = RecoverySim::new(net, RepairModel::default(), crews);
        let mut damaged: Vec<DamagedComponent> = Vec::new();
        for c in picks {
            if damaged.iter().any(|d| d.component == c) {
                continue;
            }
            damaged.push(DamagedComponent {
                component: c,
                state: DamageState::Extensive,
                expected_breaks: if net.component(c).kind.is_pipe() { 0.3 } else { 0.0 },
                residual_days: None,
            });
        }
        let mut state = RecoveryState { damaged, elapsed_days: 0.0 };
        let mut rng = stream(seed, &[]);
        let mut served = sim.served_population(&state);
        while !state.damaged.is_empty() {
            let actions = enumerate_actions(&state, crews, 8, &mut rng);
            prop_assert!(!actions.is_empty());
            let out = sim.simulate_transition(&state, &actions[0], &mut rng).unwrap();
            prop_assert!(out.next_state.elapsed_days > state.elapsed_days);
            prop_assert!(!out.completed.is_empty());
            prop_assert!(out.next_state.damaged.len() < state.damaged.len());
            prop_assert!(out.served_population >= served);
            prop_assert!(out.reward >= 0.0);
            served = out.served_population;
            state = out.next_state;
        }
        prop_assert_eq!(served, net.total_population());
    }

    #[test]
    fn auc_splits_additively(
        steps in prop::collection::vec((0.01f64..10.0, 0u64..1000), 1..8),
        h1 in 0.0f64..40.0, h2 in 0.0f64..40.0,
    ) {
        let mut t = 0.0;
        let mut v = 0;
        let mut points = vec![(0.0, 0)];
        for (dt, dv) in steps {
            t += dt;
            v += dv;
            points.push((t, v));
        }
        let c = RecoveryCurve { scenario_id: 0, planner: "p".into(), points };
        let (a, b) = if h1 <= h2 { (h1, h2) } else { (h2, h1) };
        prop_assert!(auc(&c, b) >= auc(&c, a));
        // Beyond the last point the curve holds its final value.
        let end = c.final_day();
        let tail = auc(&c, end + 3.0) - auc(&c, end);
        prop_assert!((tail - 3.0 * v as f64).abs() <= 1e-6 * (1.0 + tail.abs()));
    }
}
