use std::collections::HashSet;

use c3dsm_core::model::{
    candidate_triples, canonical_instances, enumerate_matchings, is_blocking, is_stable,
    mutual_top_triple, parse_instance, random_instance, reduce_by_triple, serialize_instance,
    stable_matchings,
};
use c3dsm_core::perm::permutations;
use c3dsm_core::{Group, Instance, Matching, Triple};
use proptest::prelude::*;
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Position of `target` in `agent`'s row, found by scanning.
fn scan_rank(inst: &Instance, g: Group, agent: usize, target: usize) -> usize {
    inst.row(g, agent)
        .iter()
        .position(|&x| x == target)
        .unwrap()
}

/// Stability by the definition: no triple in A x B x C with all three strict
/// preferences, ranks read by scanning rows.
fn stable_by_definition(inst: &Instance, m: &Matching) -> bool {
    let n = inst.n();
    let m_c = |c: usize| m.triples().into_iter().find(|t| t.c == c).unwrap().a;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let blocks = scan_rank(inst, Group::A, a, b)
                    < scan_rank(inst, Group::A, a, m.sigma()[a])
                    && scan_rank(inst, Group::B, b, c) < scan_rank(inst, Group::B, b, m.tau()[b])
                    && scan_rank(inst, Group::C, c, a) < scan_rank(inst, Group::C, c, m_c(c));
                if blocks {
                    return false;
                }
            }
        }
    }
    true
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn prefers_is_a_strict_total_order(n in 2usize..=6, seed in any::<u64>()) {
        let inst = random_instance(n, seed);
        for g in Group::ALL {
            for p in 0..n {
                for q in 0..n {
                    for r in 0..n {
                        if q == r { continue; }
                        let qr = inst.prefers(g, p, q, r).unwrap();
                        prop_assert_ne!(qr, inst.prefers(g, p, r, q).unwrap());
                        for s in 0..n {
                            if s == q || s == r { continue; }
                            if qr && inst.prefers(g, p, r, s).unwrap() {
                                prop_assert!(inst.prefers(g, p, q, s).unwrap());
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn text_format_roundtrips(n in 1usize..=7, seed in any::<u64>()) {
        let inst = random_instance(n, seed);
        prop_assert_eq!(parse_instance(&serialize_instance(&inst)).unwrap(), inst);
    }

    #[test]
    fn stability_scans_agree(seed in any::<u64>(), n in 3usize..=4) {
        let inst = random_instance(n, seed);
        for m in enumerate_matchings(n) {
            let by_candidates = !candidate_triples(&m).into_iter().any(|t| is_blocking(&inst, &m, t));
            let by_all = !(0..n * n * n)
                .map(|i| Triple::new(i / (n * n), (i / n) % n, i % n))
                .any(|t| is_blocking(&inst, &m, t));
            prop_assert_eq!(by_candidates, by_all);
            prop_assert_eq!(is_stable(&inst, &m), by_all);
        }
    }
}

#[test]
fn roundtrip_thousand_seeds() {
    for seed in 0..1000 {
        let inst = random_instance(2 + (seed as usize % 5), seed);
        assert_eq!(parse_instance(&serialize_instance(&inst)).unwrap(), inst);
    }
}

#[test]
fn stability_matches_definition_n3() {
    for seed in 0..100 {
        let inst = random_instance(3, seed);
        for m in enumerate_matchings(3) {
            assert_eq!(
                is_stable(&inst, &m),
                stable_by_definition(&inst, &m),
                "seed {seed} {m}"
            );
        }
    }
}

#[test]
fn candidate_set_size_exhaustive() {
    for n in 1..=4usize {
        let expected = n * n.saturating_sub(1) * n.saturating_sub(2);
        for m in enumerate_matchings(n) {
            let ts = candidate_triples(&m);
            assert_eq!(ts.len(), expected);
            // brute-force filter of all n^3 triples
            let filtered: Vec<Triple> = (0..n * n * n)
                .map(|i| Triple::new(i / (n * n), (i / n) % n, i % n))
                .filter(|t| {
                    t.b != m.partner(Group::A, t.a)
                        && t.c != m.partner(Group::B, t.b)
                        && t.a != m.partner(Group::C, t.c)
                })
                .collect();
            assert_eq!(ts, filtered);
        }
    }
}

#[test]
fn matchings_cover_every_agent_once() {
    let all: Vec<Matching> = enumerate_matchings(4).collect();
    assert_eq!(all.len(), 576);
    assert_eq!(all.iter().collect::<HashSet<_>>().len(), 576);
    for m in &all {
        let ts = m.triples();
        for g in Group::ALL {
            let agents: HashSet<usize> = ts.iter().map(|t| t.get(g)).collect();
            assert_eq!(agents.len(), 4);
        }
    }
}

#[test]
fn every_small_random_instance_has_a_stable_matching() {
    for seed in 0..1000 {
        let inst = random_instance(4, seed);
        assert!(!stable_matchings(&inst).unwrap().is_empty(), "seed {seed}");
    }
}

#[test]
fn canonical_n3_instances_have_two_stable_matchings_sampled() {
    for inst in canonical_instances(3).unwrap().step_by(211) {
        assert!(stable_matchings(&inst).unwrap().len() >= 2, "{inst}");
    }
}

#[test]
fn mutual_top_agrees_with_cube_scan() {
    for seed in 0..500 {
        let n = 2 + seed as usize % 4;
        let inst = random_instance(n, seed);
        let brute = (0..n * n * n)
            .map(|i| Triple::new(i / (n * n), (i / n) % n, i % n))
            .filter(|t| {
                inst.row(Group::A, t.a)[0] == t.b
                    && inst.row(Group::B, t.b)[0] == t.c
                    && inst.row(Group::C, t.c)[0] == t.a
            })
            .min();
        assert_eq!(mutual_top_triple(&inst), brute, "seed {seed}");
    }
}

#[test]
fn extension_by_mutual_top_triple_stays_stable() {
    let mut checked = 0;
    for n in 3..=4 {
        for seed in 0..400 {
            let inst = random_instance(n, seed);
            let Some(t) = mutual_top_triple(&inst) else {
                continue;
            };
            let reduced = reduce_by_triple(&inst, t).unwrap();
            let stable = stable_matchings(&reduced).unwrap();
            assert!(!stable.is_empty());
            for m in stable {
                let lifted = m.extend_with(t);
                assert!(is_stable(&inst, &lifted), "n={n} seed={seed} {lifted}");
                checked += 1;
            }
        }
    }
    assert!(checked > 100);
}

#[test]
fn unanimous_extension_example() {
    let inst = Instance::unanimous(4);
    let t = mutual_top_triple(&inst).unwrap();
    assert_eq!(t, Triple::new(0, 0, 0));
    let reduced = reduce_by_triple(&inst, t).unwrap();
    assert_eq!(reduced, Instance::unanimous(3));
    for m in stable_matchings(&reduced).unwrap() {
        assert!(is_stable(&inst, &m.extend_with(t)));
    }
}

#[test]
fn stable_count_invariant_under_relabeling() {
    let perms = permutations(3);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for seed in 0..200 {
        let inst = random_instance(3, seed);
        let base = stable_matchings(&inst).unwrap().len();
        let pa = perms.choose(&mut rng).unwrap();
        let pb = perms.choose(&mut rng).unwrap();
        let pc = perms.choose(&mut rng).unwrap();
        let relabeled = inst.relabel(pa, pb, pc);
        assert_eq!(
            stable_matchings(&relabeled).unwrap().len(),
            base,
            "seed {seed}"
        );
    }
}
