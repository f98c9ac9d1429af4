//! Cross-module invariants of the inequality family, the behavior engines,
//! and the quantum layer.

use proptest::prelude::*;

use svetlichny_core::behaviors::{
    self, enumerate_bipartition_vertices, test_rng, Behavior, EnumerationCaps, Partition,
};
use svetlichny_core::bell_expr::{
    BellExpression, BoundModel, Bracket, Direction, Form, Term, TermPayload,
};
use svetlichny_core::quantum::{self, born_behavior, FourierSettings, PhaseSign, StateVector};

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 1 {
        return vec![vec![0]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for slot in 0..n {
            let mut q: Vec<usize> = p.iter().map(|&v| if v >= slot { v + 1 } else { v }).collect();
            q.push(slot);
            out.push(q);
        }
    }
    out
}

#[test]
fn smd_is_fixed_by_every_party_permutation() {
    for m in 2..=6usize {
        let perms = permutations(m);
        for d in 2..=5usize {
            let e = BellExpression::smd(m, d).unwrap();
            assert_eq!(e.terms().len(), 1 << m);
            // one term per inputs vector
            let mut seen: Vec<&[u8]> = e.terms().iter().map(|t| t.inputs.as_slice()).collect();
            seen.dedup();
            assert_eq!(seen.len(), 1 << m);
            for perm in &perms {
                assert_eq!(e.permute_parties(perm).unwrap(), e, "m={m} d={d} perm={perm:?}");
            }
        }
    }
}

#[test]
fn svetlichny_is_fixed_by_every_party_permutation() {
    for m in 2..=6usize {
        let e = BellExpression::svetlichny(m).unwrap();
        for perm in permutations(m) {
            assert_eq!(e.permute_parties(&perm).unwrap(), e);
        }
    }
}

#[test]
fn evaluate_is_linear_under_mixing() {
    let mut rng = test_rng(21);
    for e in [
        BellExpression::chsh(),
        BellExpression::cglmp(3).unwrap(),
        BellExpression::smd(3, 3).unwrap(),
    ] {
        for _ in 0..20 {
            let b1 = Behavior::<f64>::random_with(e.m(), e.d(), &mut rng);
            let b2 = Behavior::<f64>::random_with(e.m(), e.d(), &mut rng);
            let w: f64 = rand::Rng::gen(&mut rng);
            let mixed = behaviors::mix(w, &b1, &b2).unwrap();
            let lhs = e.evaluate(&mixed).unwrap();
            let rhs = w * e.evaluate(&b1).unwrap() + (1.0 - w) * e.evaluate(&b2).unwrap();
            assert!((lhs - rhs).abs() < 1e-12, "residual {}", (lhs - rhs).abs());
        }
    }
}

#[test]
fn tensor_contraction_agrees_with_term_evaluation() {
    let mut rng = test_rng(22);
    for e in [
        BellExpression::chsh(),
        BellExpression::cglmp(3).unwrap(),
        BellExpression::smd(3, 3).unwrap(),
    ] {
        let t = e.coefficient_tensor();
        for _ in 0..100 {
            let b = Behavior::<f64>::random_with(e.m(), e.d(), &mut rng);
            let via_terms = e.evaluate(&b).unwrap();
            let via_tensor = t.contract(&b).unwrap();
            assert!((via_terms - via_tensor).abs() < 1e-12);
        }
    }
}

fn fit_line(x1: f64, y1: f64, x2: f64, y2: f64) -> (f64, f64) {
    let slope = (y2 - y1) / (x2 - x1);
    (slope, y1 - slope * x1)
}

#[test]
fn smd_over_binary_outcomes_is_affinely_svetlichny() {
    let mut rng = test_rng(23);
    for m in 2..=4usize {
        let svet = BellExpression::svetlichny(m).unwrap();
        let smd = BellExpression::smd(m, 2).unwrap();
        let b1 = Behavior::<f64>::random_with(m, 2, &mut rng);
        let b2 = Behavior::<f64>::random_with(m, 2, &mut rng);
        let (x1, y1) = (svet.evaluate(&b1).unwrap(), smd.evaluate(&b1).unwrap());
        let (x2, y2) = (svet.evaluate(&b2).unwrap(), smd.evaluate(&b2).unwrap());
        let (slope, intercept) = fit_line(x1, y1, x2, y2);
        for _ in 0..100 {
            let b = Behavior::<f64>::random_with(m, 2, &mut rng);
            let x = svet.evaluate(&b).unwrap();
            let y = smd.evaluate(&b).unwrap();
            assert!((y - (slope * x + intercept)).abs() < 1e-12, "m={m}");
        }
    }
}

#[test]
fn correlator_to_bracket_is_one_affine_line() {
    let mut rng = test_rng(24);
    let e = BellExpression::svetlichny(3).unwrap();
    let (bracket, map) = e.to_bracket_form().unwrap();
    for _ in 0..100 {
        let b = Behavior::<f64>::random_with(3, 2, &mut rng);
        let x = e.evaluate(&b).unwrap();
        let y = bracket.evaluate(&b).unwrap();
        assert!((y - map.apply(x)).abs() < 1e-12);
    }
    // the affine image of the correlator bound lies within the bracket
    // expression's range over bipartition vertices
    let caps = EnumerationCaps::default();
    let smd = BellExpression::smd(3, 2).unwrap();
    let t = smd.coefficient_tensor();
    let (mut min, mut max) = (i64::MAX, i64::MIN);
    for p in Partition::enumerate(3) {
        for v in enumerate_bipartition_vertices(2, &p, &caps).unwrap() {
            let val = behaviors::deterministic_value(&t, &v);
            min = min.min(val);
            max = max.max(val);
        }
    }
    let image = map.apply(e.bound() as f64);
    assert!((min as f64) <= image && image <= max as f64, "{min} <= {image} <= {max}");
    assert_eq!(bracket.bound(), image.round() as i64);
    assert_eq!(bracket.direction(), Direction::Lower);
}

#[test]
fn average_games_have_algebraic_maximum_four() {
    // max over all deterministic assignments (jointly signaling pairs
    // included) of CHSH +- CHSH'
    let chsh = BellExpression::chsh().coefficient_tensor();
    let chsh_p = BellExpression::chsh().prime_map().coefficient_tensor();
    for sign in [1i64, -1] {
        let mut total = 0i64;
        for x in 0..4usize {
            let best = (0..4usize)
                .map(|a| chsh.at(x, a) + sign * chsh_p.at(x, a))
                .max()
                .unwrap();
            total += best;
        }
        assert_eq!(total, 4, "sign {sign}");
    }
}

#[test]
fn bipartition_vertices_never_violate_smd() {
    let caps = EnumerationCaps::default();
    for (m, d) in [(2usize, 2usize), (2, 3), (3, 2), (3, 3)] {
        let e = BellExpression::smd(m, d).unwrap();
        let t = e.coefficient_tensor();
        for p in Partition::enumerate(m) {
            for v in enumerate_bipartition_vertices(d, &p, &caps).unwrap() {
                // lower-direction bound: no vertex value below it, exactly
                let value = behaviors::deterministic_value(&t, &v);
                assert!(
                    value >= e.bound(),
                    "vertex of {} scores {value} < {}",
                    p.label(),
                    e.bound()
                );
            }
        }
    }
}

#[test]
fn best_response_matches_enumeration_on_every_partition() {
    let caps = EnumerationCaps::default();
    for d in [2usize, 3] {
        let e = BellExpression::smd(3, d).unwrap();
        let br = behaviors::bipartition_bound(&e, &caps).unwrap();
        let full = behaviors::bipartition_bound_by_enumeration(&e, &caps).unwrap();
        assert_eq!(br.value, full.value);
        for (a, b) in br.per_partition.iter().zip(&full.per_partition) {
            assert_eq!(a.value, b.value, "d={d} partition {}", a.partition.label());
        }
    }
}

#[test]
fn born_behaviors_are_normalized_and_no_signaling() {
    let mut rng = test_rng(25);
    for m in 2..=3usize {
        for d in 2..=3usize {
            for _ in 0..4 {
                let alphas: Vec<[f64; 2]> = (0..m)
                    .map(|_| {
                        [
                            rand::Rng::gen_range(&mut rng, -1.5..1.5),
                            rand::Rng::gen_range(&mut rng, -1.5..1.5),
                        ]
                    })
                    .collect();
                let state = if d == 3 && rand::Rng::gen_bool(&mut rng, 0.5) {
                    StateVector::gamma(m, rand::Rng::gen_range(&mut rng, 0.3..2.0)).unwrap()
                } else {
                    StateVector::ghz(m, d).unwrap()
                };
                let b = born_behavior(
                    &state,
                    &FourierSettings {
                        alphas,
                        sign: PhaseSign::Plus,
                    },
                )
                .unwrap();
                // construction re-checks normalization within 1e-12
                Behavior::<f64>::new(m, d, b.probs().to_vec()).unwrap();
                // marginals of one party do not depend on the others' inputs
                for party in 0..m {
                    for x1 in 0..1usize << m {
                        for x2 in 0..1usize << m {
                            let bit = 1 << (m - 1 - party);
                            if (x1 ^ x2) & bit != 0 {
                                continue;
                            }
                            let m1 = b.party_marginal(party, &bits_of(x1, m));
                            let m2 = b.party_marginal(party, &bits_of(x2, m));
                            for (p, q) in m1.iter().zip(&m2) {
                                assert!((p - q).abs() < 1e-10);
                            }
                        }
                    }
                }
            }
        }
    }
}

fn bits_of(x: usize, m: usize) -> Vec<u8> {
    (0..m).map(|j| ((x >> (m - 1 - j)) & 1) as u8).collect()
}

#[test]
fn quantum_scenarios_stay_inside_the_no_signaling_range() {
    // a quantum behavior can violate the bipartition bound but never the
    // algebraic range of the weights
    let e = BellExpression::smd(3, 3).unwrap();
    let s = quantum::paper_scenario(3, 3).unwrap();
    let b = quantum::scenario_behavior(&s).unwrap();
    let v = e.evaluate(&b).unwrap();
    assert!(v >= 0.0);
    assert!(behaviors::violation(&e, &b).unwrap() > 0.0);
}

// ---------------------------------------------------------------------------
// property-based checks
// ---------------------------------------------------------------------------

fn arb_expression() -> impl Strategy<Value = BellExpression> {
    (2usize..=4, any::<bool>())
        .prop_flat_map(|(m, correlator)| {
            let d = if correlator {
                Just(2usize).boxed()
            } else {
                (2usize..=4).boxed()
            };
            (Just(m), d, Just(correlator))
        })
        .prop_flat_map(|(m, d, correlator)| {
            // per inputs vector: absent, or (flag, offset); the flag is the
            // coefficient sign in correlator form and the star otherwise
            let payload = proptest::option::of((any::<bool>(), 0..d as i64));
            (
                Just(m),
                Just(d),
                Just(correlator),
                proptest::collection::vec(payload, 1usize << m),
                -8i64..=8,
            )
        })
        .prop_map(|(m, d, correlator, payloads, bound)| {
            let mut terms = Vec::new();
            for (x, p) in payloads.into_iter().enumerate() {
                let Some((flag, off)) = p else { continue };
                let inputs = bits_of(x, m);
                terms.push(if correlator {
                    Term::correlator(inputs, if flag { 1 } else { -1 })
                } else {
                    Term::bracket(inputs, Bracket::new(flag, off, d))
                });
            }
            if terms.is_empty() {
                terms.push(if correlator {
                    Term::correlator(vec![0; m], 1)
                } else {
                    Term::bracket(vec![0; m], Bracket::new(false, 0, d))
                });
            }
            let form = if correlator {
                Form::Correlator
            } else {
                Form::Bracket
            };
            BellExpression::new(m, d, form, terms, bound, Direction::Lower, BoundModel::Local)
                .expect("generated terms are valid")
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn expression_json_round_trips(e in arb_expression()) {
        let s = serde_json::to_string(&e).unwrap();
        let back: BellExpression = serde_json::from_str(&s).unwrap();
        prop_assert_eq!(back, e);
    }

    #[test]
    fn permuting_and_inverting_is_identity(e in arb_expression(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut rng = test_rng(seed);
        let mut perm: Vec<usize> = (0..e.m()).collect();
        perm.shuffle(&mut rng);
        let mut inverse = vec![0usize; e.m()];
        for (j, &p) in perm.iter().enumerate() {
            inverse[p] = j;
        }
        let round = e.permute_parties(&perm).unwrap().permute_parties(&inverse).unwrap();
        prop_assert_eq!(round, e);
    }

    #[test]
    fn brackets_stay_reduced_under_priming(star in any::<bool>(), off in 0i64..5, d in 2usize..=5) {
        let mut b = Bracket::new(star, off, d);
        for _ in 0..3 * d {
            b = b.primed(d);
            prop_assert!((b.offset() as usize) < d);
        }
    }

    #[test]
    fn evaluate_matches_tensor_on_random_expressions(e in arb_expression(), seed in any::<u64>()) {
        let mut rng = test_rng(seed);
        let b = Behavior::<f64>::random_with(e.m(), e.d(), &mut rng);
        let via_terms = e.evaluate(&b).unwrap();
        let via_tensor = e.coefficient_tensor().contract(&b).unwrap();
        prop_assert!((via_terms - via_tensor).abs() < 1e-12);
    }
}

#[test]
fn term_payload_shape_is_stable() {
    // the serialized term distinguishes forms by field presence
    let e = BellExpression::smd(3, 3).unwrap();
    for t in e.terms() {
        match t.payload {
            TermPayload::Bracket(b) => assert!((b.offset() as usize) < 3),
            TermPayload::Coeff(_) => panic!("smd terms are brackets"),
        }
    }
}
