use proptest::prelude::*;
use ufhc::audit::{coverage_bound, window_coverage};
use ufhc::ctype::{bad_time_set, build_c_plus_1};
use ufhc::density::{natural_density_ratio, partial_weighted_density, restricted_ratios, SamplePlan};
use ufhc::experiment::ExperimentConfig;
use ufhc::forge::{build_block_weight, build_sparse_thick_set, geometric_schedule, BlockWeightInput};
use ufhc::furstenberg::{bounded_gaps_audit, difference_intersection, family_member, Family, FamilySpec};
use ufhc::{CPlus1Config, CTypeParams, Dyadic, IndexSet, SparseVector, TauRule, WeightSequence};

fn periodic_set() -> impl Strategy<Value = IndexSet> {
    (2u64..12).prop_flat_map(|m| {
        prop::collection::btree_set(0..m, 1..=m as usize)
            .prop_map(move |r| IndexSet::periodic(m, &r.into_iter().collect::<Vec<_>>()).unwrap())
    })
}

fn any_set() -> impl Strategy<Value = IndexSet> {
    prop_oneof![
        periodic_set(),
        prop::collection::vec(0u64..5_000, 0..60).prop_map(IndexSet::explicit),
        (1u64..40, 2u32..4).prop_map(|(c, e)| IndexSet::interval_union_polynomial(c, e, 0).unwrap()),
        (periodic_set(), 0u64..20).prop_map(|(s, k)| s.shifted(k)),
    ]
}

fn c_plus_1() -> impl Strategy<Value = CPlus1Config> {
    (1usize..=3, prop::sample::select(vec![2u64, 4]))
        .prop_flat_map(|(levels, d0)| {
            (
                Just(d0),
                prop::collection::vec(1u64..=3, levels - 1),
                prop::collection::vec(0.0f64..1.0, levels),
                prop::collection::vec(0u64..4, levels),
            )
        })
        .prop_map(|(d0, mults, fracs, tau)| {
            let mut big = vec![d0];
            for m in mults {
                big.push(big.last().unwrap() * 2 * m);
            }
            let delta = big
                .iter()
                .zip(&fracs)
                .map(|(&b, f)| (1 + ((b - 1) as f64 * f) as u64).min(b - 1))
                .collect();
            CPlus1Config { delta, big_delta: big, tau_rule: TauRule::Explicit(tau) }
        })
}

fn vector_in(lo: u64, hi: u64) -> impl Strategy<Value = SparseVector> {
    prop::collection::vec((lo..hi, -20i128..=20, -3i64..=3), 1..5)
        .prop_map(|e| SparseVector::from_entries(e.into_iter().map(|(k, m, x)| (k, Dyadic::new(m, x)))))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn count_in_range_matches_membership(set in any_set(), lo in 0u64..3_000, len in 0u64..3_000) {
        let hi = lo + len;
        let direct = (lo..=hi).filter(|&j| set.contains(j)).count() as u64;
        prop_assert_eq!(set.count_in_range(lo, hi), direct);
        prop_assert_eq!(set.members(lo, hi).count() as u64, direct);
    }

    #[test]
    fn ratios_monotone_under_inclusion(
        m in 2u64..10,
        picks in prop::collection::vec(any::<bool>(), 10),
        extra in prop::collection::vec(any::<bool>(), 10),
        alpha in 0.0f64..3.0,
    ) {
        let small: Vec<u64> = (0..m).filter(|&r| picks[r as usize]).collect();
        let big: Vec<u64> = (0..m).filter(|&r| picks[r as usize] || extra[r as usize]).collect();
        prop_assume!(!big.is_empty());
        let hs = [10u64, 99, 1_000, 5_000];
        let a = WeightSequence::power(alpha).unwrap();
        let lo = if small.is_empty() { IndexSet::empty() } else { IndexSet::periodic(m, &small).unwrap() };
        let hi = IndexSet::periodic(m, &big).unwrap();
        let (rl, rh) = (restricted_ratios(&a, &lo, 0, &hs).unwrap(), restricted_ratios(&a, &hi, 0, &hs).unwrap());
        for (x, y) in rl.iter().zip(&rh) {
            prop_assert!(x <= y);
        }
        for &n in &hs {
            prop_assert!(natural_density_ratio(&lo, n) <= natural_density_ratio(&hi, n));
        }
    }

    #[test]
    fn constant_one_gives_natural_ratio(set in any_set(), n in 0u64..20_000) {
        let r = partial_weighted_density(&WeightSequence::constant_one(), &set, n).unwrap();
        prop_assert!((r - natural_density_ratio(&set, n)).abs() <= 1e-12);
    }

    #[test]
    fn log_tables_reproduce_v(gaps in prop::collection::vec(1u64..400, 1..40), n in 1u64..20_000) {
        let mut k_seq = vec![1u64];
        for (p, g) in gaps.iter().enumerate() {
            k_seq.push(k_seq.last().unwrap() + g + p as u64 + 1);
        }
        let a = WeightSequence::block_recursive(k_seq.clone()).unwrap();
        let v = a.v_ratio(n).unwrap().value;
        let from_logs = (a.ln_weight(n).unwrap() - a.ln_prefix_sum(n - 1).unwrap()).exp();
        prop_assert!((v - from_logs).abs() <= 1e-10 * v.max(1.0));
        let p = k_seq.iter().filter(|&&k| k <= n).count().max(1);
        prop_assert_eq!(v, 1.0 / p as f64);
    }

    #[test]
    fn block_weight_class_and_growth(m in 2u64..6, delta in 0.1f64..0.4) {
        let sets = vec![IndexSet::evens(), IndexSet::multiples_of(m).unwrap()];
        let bw = build_block_weight(&BlockWeightInput::new(sets, vec![delta.min(1.0 / m as f64); 2]), 50_000).unwrap();
        prop_assert!(bw.class_audit(&Default::default()).passed);
        let ln1 = bw.weight.ln_weight(bw.k_seq[0]).unwrap();
        for (i, &k) in bw.k_seq.iter().enumerate().filter(|(_, &k)| k <= 50_000) {
            let p = (i + 1) as f64;
            prop_assert!(bw.weight.ln_weight(k).unwrap() >= p.ln() + ln1 - 1e-9);
        }
    }

    #[test]
    fn sparse_set_partial_density_below_terms(kmax in 3usize..10, first in 0.05f64..0.5) {
        let a = WeightSequence::power(1.0).unwrap();
        let sts = build_sparse_thick_set(&a, &geometric_schedule(first, 0.5, 0.0, kmax), 1 << 40).unwrap();
        for k in 1..=kmax as u64 {
            let lo = sts.n_seq[k as usize - 1];
            let hs: Vec<u64> = (lo..=lo + k).collect();
            let bound = sts.term_one[k as usize - 1] + sts.term_two[k as usize - 1];
            for r in restricted_ratios(&a, &sts.set, 0, &hs).unwrap() {
                prop_assert!(r <= bound + 1e-12, "k = {}: {} > {}", k, r, bound);
            }
        }
    }

    #[test]
    fn families_hereditary_upward(
        m in 2u64..8,
        picks in prop::collection::vec(any::<bool>(), 8),
        extra in prop::collection::vec(any::<bool>(), 8),
        delta in 0.05f64..0.9,
        n in 1u64..50,
    ) {
        let small: Vec<u64> = (0..m).filter(|&r| picks[r as usize]).collect();
        prop_assume!(!small.is_empty());
        let big: Vec<u64> = (0..m).filter(|&r| picks[r as usize] || extra[r as usize]).collect();
        let (lo, hi) = (IndexSet::periodic(m, &small).unwrap(), IndexSet::periodic(m, &big).unwrap());
        let families = [
            Family::Ud,
            Family::UBd,
            Family::UdA { weight: WeightSequence::power(1.0).unwrap() },
        ];
        for f in families {
            let spec = FamilySpec::new(f, delta, n).unwrap();
            if family_member(&spec, &lo, 2_000).unwrap().is_yes() {
                prop_assert!(family_member(&spec, &hi, 2_000).unwrap().is_yes());
            }
        }
        let ud = family_member(&FamilySpec::new(Family::Ud, delta, n).unwrap(), &lo, 2_000).unwrap();
        let one = Family::UdA { weight: WeightSequence::constant_one() };
        let ud_one = family_member(&FamilySpec::new(one, delta, n).unwrap(), &lo, 2_000).unwrap();
        prop_assert_eq!(ud.is_yes(), ud_one.is_yes());
    }

    #[test]
    fn difference_intersection_at_zero_is_identity(set in any_set(), h in 0u64..5_000) {
        let d = difference_intersection(&set, 0, h);
        prop_assert!(d.members(0, h).eq(set.members(0, h)));
    }

    #[test]
    fn max_gap_stable_under_doubling(set in periodic_set()) {
        let a = WeightSequence::power(1.0).unwrap();
        let delta = 0.9 * set.count_in_range(0, set.period().unwrap() - 1) as f64 / set.period().unwrap() as f64;
        let plan = |h| SamplePlan::log_spaced(1_000, h, 3).unwrap().with_tail(1_000).unwrap();
        let g1 = bounded_gaps_audit(&a, &set, delta, 60, &plan(20_000)).unwrap().max_gap;
        let g2 = bounded_gaps_audit(&a, &set, delta, 60, &plan(40_000)).unwrap().max_gap;
        prop_assert_eq!(g1, g2);
    }

    #[test]
    fn operator_is_lower_triangular(cfg in c_plus_1(), seed in any::<u64>()) {
        let t = build_c_plus_1(&cfg).unwrap();
        let k = seed % t.dimension();
        let y = t.apply(&SparseVector::basis(k)).unwrap();
        prop_assert!(y.max_index().is_some_and(|m| m <= k + 1));
        prop_assert!(!y.is_approximate());
    }

    #[test]
    fn block_cycle_norm_periodic(cfg in c_plus_1(), pick in any::<u64>(), j in 0u64..200, raw in vector_in(0, 1 << 20)) {
        let t = build_c_plus_1(&cfg).unwrap();
        let l = pick % t.num_blocks();
        let b = t.block(l).unwrap();
        let x = SparseVector::from_entries(raw.iter().map(|(k, v)| (b.start + k % b.len, v)));
        prop_assert_eq!(
            t.block_cycle_norm(l, &x, j).unwrap(),
            t.block_cycle_norm(l, &x, j + 2 * b.len).unwrap()
        );
    }

    #[test]
    fn window_coverage_below_bound(alpha in 0.3f64..2.5, period in 8u64..400, n in 0u64..4, j0 in 0u64..400) {
        prop_assume!(3 * n < period);
        let a = WeightSequence::power(alpha).unwrap();
        let c = window_coverage(&a, period, n, j0 % period, 6 * period).unwrap();
        prop_assert!(c.direct <= c.bound);
        prop_assert_eq!(c.bound, coverage_bound(&a, period, n).unwrap());
    }

    #[test]
    fn sparse_vector_json_round_trip(x in vector_in(0, u64::MAX)) {
        let back: SparseVector = serde_json::from_str(&serde_json::to_string(&x).unwrap()).unwrap();
        prop_assert_eq!(back, x);
    }

    #[test]
    fn params_json_round_trip(cfg in c_plus_1()) {
        let t = build_c_plus_1(&cfg).unwrap();
        let back: CTypeParams = serde_json::from_str(&serde_json::to_string(&t).unwrap()).unwrap();
        prop_assert_eq!(back.dimension(), t.dimension());
        prop_assert_eq!(back, t);
    }

    #[test]
    fn experiment_config_json_round_trip(set in any_set(), steps in 1u64..100, cfg in c_plus_1()) {
        let configs = [
            serde_json::json!({"command": "density", "set": set}),
            serde_json::json!({
                "command": "ctype-simulate",
                "params": build_c_plus_1(&cfg).unwrap(),
                "vector": SparseVector::basis(1),
                "steps": steps,
            }),
            serde_json::json!({"command": "equivalences"}),
            serde_json::json!({"command": "ctype-validate-params", "delta": cfg.delta, "tau_rule": "half-delta"}),
        ];
        for v in configs {
            let c: ExperimentConfig = serde_json::from_value(v).unwrap();
            let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
            prop_assert_eq!(back, c);
        }
    }
}

#[test]
fn wrapped_bad_arc_needs_the_window_before_zero() {
    let t = build_c_plus_1(&CPlus1Config {
        delta: vec![1, 4],
        big_delta: vec![2, 16],
        tau_rule: TauRule::Explicit(vec![0, 1]),
    })
    .unwrap();
    let b = t.block(1).unwrap();
    let r = bad_time_set(&t, &SparseVector::basis(b.start + 1), 1, 3 * b.len, None).unwrap();
    assert!(r.cyclic_inclusion);
    assert!(!r.strict_inclusion);
    assert!(r.bad_set.contains(0) && r.bad_set.contains(b.len - 1));
}
