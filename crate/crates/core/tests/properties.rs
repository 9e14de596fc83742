mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::scenario;
use sdn_evb::checker::safety_suite;
use sdn_evb::events::event_catalog;
use sdn_evb::refinement::ProjectionMap;
use sdn_evb::run::{scheduling_policy, simulate};
use sdn_evb::scenario::{PolicyName, Scenario};
use sdn_evb::state::{changed_fields, typing_invariants};
use sdn_evb::{GlobalState, RefinementLevel, System};

fn level() -> impl Strategy<Value = RefinementLevel> {
    prop::sample::select(RefinementLevel::ALL.to_vec())
}

fn scenarios() -> &'static [Scenario; 2] {
    static S: std::sync::OnceLock<[Scenario; 2]> = std::sync::OnceLock::new();
    S.get_or_init(|| [scenario("s1"), scenario("s2")])
}

/// A uniformly random walk, independent of the scheduler module.
fn walk(
    sys: &System,
    init: &GlobalState,
    seed: u64,
    len: usize,
) -> Vec<(String, GlobalState, GlobalState)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cur = init.clone();
    let mut out = Vec::new();
    for _ in 0..len {
        let enabled = sys.enabled(&cur);
        let Some(inst) = enabled.choose(&mut rng) else {
            break;
        };
        let next = sys.apply(&cur, inst).unwrap();
        out.push((inst.event.clone(), cur, next.clone()));
        cur = next;
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn steps_preserve_typing_and_safety(which in 0usize..2, level in level(), seed in any::<u64>()) {
        let sc = &scenarios()[which];
        let sys = System::new(&sc.model(level), level);
        let suite = safety_suite(&sys.model);
        for (_, _, t) in walk(&sys, &sc.initial_state(level), seed, 80) {
            prop_assert!(typing_invariants(&sys.model, &t).is_empty());
            for inv in &suite {
                prop_assert!((inv.predicate)(&t), "{}", inv.name);
            }
        }
    }

    #[test]
    fn steps_write_only_their_declared_fields(which in 0usize..2, level in level(), seed in any::<u64>()) {
        let sc = &scenarios()[which];
        let sys = System::new(&sc.model(level), level);
        let writes: BTreeMap<_, _> = event_catalog(level).into_iter().map(|r| (r.def.name, r.write_set)).collect();
        for (event, s, t) in walk(&sys, &sc.initial_state(level), seed, 80) {
            let changed = changed_fields(&s, &t);
            prop_assert!(changed.is_subset(&writes[event.as_str()]), "{event} changed {changed:?}");
        }
    }

    #[test]
    fn projection_commutes_with_steps(which in 0usize..2, level in level(), seed in any::<u64>()) {
        prop_assume!(level > RefinementLevel::L0);
        let sc = &scenarios()[which];
        let sys = System::new(&sc.model(level), level);
        let abs = System::new(&sc.model(RefinementLevel::L0), RefinementLevel::L0);
        let pm = ProjectionMap::new(level, RefinementLevel::L0).unwrap();
        prop_assert_eq!(pm.state(&sc.initial_state(level)), sc.initial_state(RefinementLevel::L0));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cur = sc.initial_state(level);
        for _ in 0..60 {
            let enabled = sys.enabled(&cur);
            let Some(inst) = enabled.choose(&mut rng) else { break };
            let next = sys.apply(&cur, inst).unwrap();
            let ai = pm.instance(inst).unwrap();
            prop_assert_eq!(abs.apply(&pm.state(&cur), &ai).unwrap(), pm.state(&next));
            prop_assert_eq!(pm.state(&pm.state(&next)), pm.state(&next));
            cur = next;
        }
    }

    #[test]
    fn seeded_simulation_is_reproducible(which in 0usize..2, level in level(), seed in any::<u64>(), priority in any::<bool>()) {
        let sc = &scenarios()[which];
        let sys = System::new(&sc.model(level), level);
        let policy = scheduling_policy(if priority { PolicyName::Priority } else { PolicyName::Seeded }, seed);
        let a = simulate(&sys, &sc.initial_state(level), policy, 50, false).unwrap();
        let b = simulate(&sys, &sc.initial_state(level), policy, 50, false).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.replay(&sys.model, &sys.catalogue).is_ok());
    }

    #[test]
    fn digests_separate_distinct_states(which in 0usize..2, seed in any::<u64>()) {
        let sc = &scenarios()[which];
        let sys = System::new(&sc.model(RefinementLevel::L2), RefinementLevel::L2);
        let steps = walk(&sys, &sc.initial_state(RefinementLevel::L2), seed, 40);
        for (_, s, t) in &steps {
            prop_assert_ne!(s.digest(), t.digest());
        }
    }
}
