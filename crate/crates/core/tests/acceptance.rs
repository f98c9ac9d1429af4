//! Acceptance suite: one test per criterion, each asserting the certified
//! value at its stated tolerance and runtime budget, and printing a PASS line
//! (visible with `cargo test --test acceptance -- --nocapture`).

use std::time::{Duration, Instant};

use svetlichny_core::behaviors::{
    self, enumerate_bipartition_vertices, mix, test_rng, Behavior, EnumerationCaps, Partition,
};
use svetlichny_core::bell_expr::{BellExpression, Bracket, Direction};
use svetlichny_core::polytope::{facet_check, PolytopeOptions};
use svetlichny_core::quantum::{
    self, critical_visibility, optimize_scenario_with, paper_scenario, quantum_value,
    scenario_behavior, OptimizeOptions, StateFamily,
};

const SQRT2: f64 = std::f64::consts::SQRT_2;

fn pass(name: &str, started: Instant, budget: Duration, detail: String) {
    let elapsed = started.elapsed();
    println!("PASS {name} [{elapsed:.2?}] {detail}");
    assert!(
        elapsed < budget,
        "{name} took {elapsed:?}, budget {budget:?}"
    );
}

/// 1. Bipartition bound of S_3: exhaustive enumeration over 3 x 1024 vertices
///    certifies 4 exactly; the best-response path agrees exactly. < 1 s.
#[test]
fn acceptance_1_svetlichny_bipartition_bound() {
    let started = Instant::now();
    let caps = EnumerationCaps::default();
    let e = BellExpression::svetlichny(3).unwrap();
    let mut scanned = 0u64;
    let t = e.coefficient_tensor();
    let mut best = i64::MIN;
    for p in Partition::enumerate(3) {
        for v in enumerate_bipartition_vertices(2, &p, &caps).unwrap() {
            scanned += 1;
            best = best.max(behaviors::deterministic_value(&t, &v));
        }
    }
    assert_eq!(scanned, 3 * 1024);
    assert_eq!(best, 4);
    let br = behaviors::bipartition_bound(&e, &caps).unwrap();
    assert_eq!(br.value, 4);
    for p in &br.per_partition {
        assert_eq!(p.value, 4);
    }
    pass(
        "criterion 1 (S_3 bipartition bound)",
        started,
        Duration::from_secs(1),
        format!("bound 4 over {scanned} vertices; best-response agrees"),
    );
}

/// 2. Bipartition bound of S_{3,3}: enumeration of all 177147 vertices
///    certifies 4 = 2(d-1) exactly. < 30 s.
#[test]
fn acceptance_2_smd33_bipartition_bound() {
    let started = Instant::now();
    let caps = EnumerationCaps::default();
    let e = BellExpression::smd(3, 3).unwrap();
    let full = behaviors::bipartition_bound_by_enumeration(&e, &caps).unwrap();
    assert_eq!(full.value, 4);
    let counted: u64 = Partition::enumerate(3)
        .iter()
        .map(|p| {
            enumerate_bipartition_vertices(3, p, &caps).unwrap().count() as u64
        })
        .sum();
    assert_eq!(counted, 177_147);
    pass(
        "criterion 2 (S_3,3 bipartition bound)",
        started,
        Duration::from_secs(30),
        format!("bound 4 = 2(d-1) over {counted} vertices"),
    );
}

/// 3. Bipartition bound of S_{4,3} via best-response decomposition:
///    8 = 2^(m-2) (d-1) exactly. < 5 min.
#[test]
fn acceptance_3_smd43_bipartition_bound() {
    let started = Instant::now();
    let caps = EnumerationCaps::default();
    let e = BellExpression::smd(4, 3).unwrap();
    let br = behaviors::bipartition_bound(&e, &caps).unwrap();
    assert_eq!(br.value, 8);
    assert_eq!(br.per_partition.len(), 7);
    for p in &br.per_partition {
        assert_eq!(p.value, 8, "partition {}", p.partition.label());
    }
    pass(
        "criterion 3 (S_4,3 bipartition bound)",
        started,
        Duration::from_secs(300),
        "bound 8 = 2^(m-2)(d-1) on all 7 partitions".into(),
    );
}

/// 4. Local bounds: CHSH -> 2 and CGLMP(3) -> 2, exactly, by enumeration. < 1 s.
#[test]
fn acceptance_4_local_bounds() {
    let started = Instant::now();
    let caps = EnumerationCaps::default();
    let chsh = behaviors::local_bound(&BellExpression::chsh(), &caps).unwrap();
    assert_eq!(chsh.value, 2);
    let cglmp = behaviors::local_bound(&BellExpression::cglmp(3).unwrap(), &caps).unwrap();
    assert_eq!(cglmp.value, 2);
    pass(
        "criterion 4 (local bounds)",
        started,
        Duration::from_secs(1),
        "CHSH -> 2, CGLMP(3) -> 2".into(),
    );
}

/// 5. Quantum values: 4 sqrt(2) within 1e-9; 1.0851 within 5e-4;
///    2.1703 within 5e-4. < 1 s.
#[test]
fn acceptance_5_quantum_values() {
    let started = Instant::now();
    let s3 = quantum_value(
        &BellExpression::svetlichny(3).unwrap(),
        &paper_scenario(3, 2).unwrap(),
    )
    .unwrap();
    assert!((s3 - 4.0 * SQRT2).abs() < 1e-9, "S_3 = {s3}");
    let s23 = quantum_value(
        &BellExpression::cglmp(3).unwrap(),
        &paper_scenario(2, 3).unwrap(),
    )
    .unwrap();
    assert!((s23 - 1.0851).abs() < 5e-4, "S_2,3 = {s23}");
    let s33 = quantum_value(
        &BellExpression::smd(3, 3).unwrap(),
        &paper_scenario(3, 3).unwrap(),
    )
    .unwrap();
    assert!((s33 - 2.1703).abs() < 5e-4, "S_3,3 = {s33}");
    pass(
        "criterion 5 (quantum values)",
        started,
        Duration::from_secs(1),
        format!("S_3 = {s3:.9}, S_2,3 = {s23:.6}, S_3,3 = {s33:.6}"),
    );
}

/// 6. Visibilities: 1/sqrt(2) within 1e-9; 0.6861 within 5e-4 for the m=2 and
///    m=3 qutrit scenarios; the optimized S_{4,3} scenario reaches a
///    visibility within 5e-4 of 0.6861. < 10 min including optimization.
#[test]
fn acceptance_6_visibilities() {
    let started = Instant::now();
    let w_svet = critical_visibility(
        &BellExpression::svetlichny(3).unwrap(),
        &paper_scenario(3, 2).unwrap(),
    )
    .unwrap();
    assert!((w_svet - 1.0 / SQRT2).abs() < 1e-9, "w = {w_svet}");

    let w2 = critical_visibility(
        &BellExpression::cglmp(3).unwrap(),
        &paper_scenario(2, 3).unwrap(),
    )
    .unwrap();
    assert!((w2 - 0.6861).abs() < 5e-4, "w_2,3 = {w2}");

    let w3 = critical_visibility(
        &BellExpression::smd(3, 3).unwrap(),
        &paper_scenario(3, 3).unwrap(),
    )
    .unwrap();
    assert!((w3 - 0.6861).abs() < 5e-4, "w_3,3 = {w3}");

    let e43 = BellExpression::smd(4, 3).unwrap();
    let opts = OptimizeOptions {
        restarts: 6,
        ..OptimizeOptions::default()
    };
    let (scenario, _) = optimize_scenario_with(&e43, StateFamily::Gamma, 20_260_810, &opts).unwrap();
    let w4 = critical_visibility(&e43, &scenario).unwrap();
    assert!((w4 - 0.6861).abs() < 5e-4, "optimized w_4,3 = {w4}");
    pass(
        "criterion 6 (visibilities)",
        started,
        Duration::from_secs(600),
        format!("w_svet = {w_svet:.9}, w_2,3 = {w2:.6}, w_3,3 = {w3:.6}, optimized w_4,3 = {w4:.6}"),
    );
}

/// 7. Facet verification with exact integer arithmetic: S_{3,2} and S_{3,3}
///    support facets of the bipartition polytope. < 10 min.
#[test]
fn acceptance_7_facets() {
    let started = Instant::now();
    let opts = PolytopeOptions::no_cache();
    let r32 = facet_check(&BellExpression::smd(3, 2).unwrap(), &opts).unwrap();
    assert!(r32.is_facet);
    assert_eq!(r32.polytope_dim, 50);
    assert_eq!(r32.saturating_rank, 49);
    let r33 = facet_check(&BellExpression::smd(3, 3).unwrap(), &opts).unwrap();
    assert!(r33.is_facet);
    assert_eq!(r33.polytope_dim, 196);
    assert_eq!(r33.saturating_rank, 195);
    pass(
        "criterion 7 (facet verification)",
        started,
        Duration::from_secs(600),
        format!(
            "S_3,2: dim {} rank {}; S_3,3: dim {} rank {}",
            r32.polytope_dim, r32.saturating_rank, r33.polytope_dim, r33.saturating_rank
        ),
    );
}

/// 8. Property suites: permutation symmetry (m <= 6, d <= 5), the bracket
///    pattern, affine equivalence with the correlator form (m <= 4), the
///    average-game algebraic maximum, linearity of evaluate, Born-rule
///    normalization and no-signaling, best-response vs enumeration equality.
#[test]
fn acceptance_8_property_suites() {
    let started = Instant::now();
    // permutation symmetry and the bracket pattern
    for m in 2..=6usize {
        for d in 2..=5usize {
            let e = BellExpression::smd(m, d).unwrap();
            let mut perm: Vec<usize> = (0..m).collect();
            perm.rotate_left(1);
            assert_eq!(e.permute_parties(&perm).unwrap(), e);
            perm.swap(0, m - 1);
            assert_eq!(e.permute_parties(&perm).unwrap(), e);
            for t in e.terms() {
                let unprimed = t.inputs.iter().filter(|&&b| b == 0).count();
                let mut expect = Bracket::new(false, -1, d);
                for _ in 0..unprimed {
                    expect = expect.primed(d);
                }
                match t.payload {
                    svetlichny_core::bell_expr::TermPayload::Bracket(b) => {
                        assert_eq!(b, expect)
                    }
                    _ => unreachable!(),
                }
            }
        }
    }

    // affine equivalence of S_{m,2} with the correlator Svetlichny form
    let mut rng = test_rng(81);
    for m in 2..=4usize {
        let svet = BellExpression::svetlichny(m).unwrap();
        let smd = BellExpression::smd(m, 2).unwrap();
        let b1 = Behavior::<f64>::random_with(m, 2, &mut rng);
        let b2 = Behavior::<f64>::random_with(m, 2, &mut rng);
        let (x1, x2) = (svet.evaluate(&b1).unwrap(), svet.evaluate(&b2).unwrap());
        let (y1, y2) = (smd.evaluate(&b1).unwrap(), smd.evaluate(&b2).unwrap());
        let slope = (y2 - y1) / (x2 - x1);
        let intercept = y1 - slope * x1;
        for _ in 0..50 {
            let b = Behavior::<f64>::random_with(m, 2, &mut rng);
            let x = svet.evaluate(&b).unwrap();
            let y = smd.evaluate(&b).unwrap();
            assert!((y - (slope * x + intercept)).abs() < 1e-12);
        }
    }

    // the average games CHSH +- CHSH' have algebraic maximum 4
    let chsh = BellExpression::chsh().coefficient_tensor();
    let chsh_p = BellExpression::chsh().prime_map().coefficient_tensor();
    for sign in [1i64, -1] {
        let total: i64 = (0..4usize)
            .map(|x| {
                (0..4usize)
                    .map(|a| chsh.at(x, a) + sign * chsh_p.at(x, a))
                    .max()
                    .unwrap()
            })
            .sum();
        assert_eq!(total, 4);
    }

    // linearity of evaluate
    let e = BellExpression::smd(3, 3).unwrap();
    for _ in 0..20 {
        let b1 = Behavior::<f64>::random_with(3, 3, &mut rng);
        let b2 = Behavior::<f64>::random_with(3, 3, &mut rng);
        let w: f64 = rand::Rng::gen(&mut rng);
        let mixed = mix(w, &b1, &b2).unwrap();
        let lhs = e.evaluate(&mixed).unwrap();
        let rhs = w * e.evaluate(&b1).unwrap() + (1.0 - w) * e.evaluate(&b2).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    // Born normalization and no-signaling on the built-in scenarios
    for (m, d) in [(2usize, 2usize), (3, 2), (2, 3), (3, 3), (4, 3)] {
        let b = scenario_behavior(&paper_scenario(m, d).unwrap()).unwrap();
        Behavior::<f64>::new(m, d, b.probs().to_vec()).unwrap();
        for party in 0..m {
            let zero = vec![0u8; m];
            let mut flipped = zero.clone();
            flipped[(party + 1) % m] = 1;
            let m1 = b.party_marginal(party, &zero);
            let m2 = b.party_marginal(party, &flipped);
            for (p, q) in m1.iter().zip(&m2) {
                assert!((p - q).abs() < 1e-10);
            }
        }
    }

    // best-response equals exhaustive enumeration on every m=3 partition
    let caps = EnumerationCaps::default();
    for d in [2usize, 3] {
        let e = BellExpression::smd(3, d).unwrap();
        let br = behaviors::bipartition_bound(&e, &caps).unwrap();
        let full = behaviors::bipartition_bound_by_enumeration(&e, &caps).unwrap();
        for (a, b) in br.per_partition.iter().zip(&full.per_partition) {
            assert_eq!(a.value, b.value);
        }
    }

    pass(
        "criterion 8 (property suites)",
        started,
        Duration::from_secs(600),
        "symmetry, bracket pattern, affine equivalence, average games, linearity, Born checks, best-response parity".into(),
    );
}

/// 9. Steering decomposition: conditioning the GHZ scenario on party 3's
///    sigma_x input gives two-party behaviors with CHSH = +-2 sqrt(2)
///    within 1e-9. < 1 s.
#[test]
fn acceptance_9_steering() {
    let started = Instant::now();
    let s = paper_scenario(3, 2).unwrap();
    let chsh = BellExpression::chsh();
    let mut values = Vec::new();
    for outcome in 0..2usize {
        let (p, cond) = quantum::conditional_behavior(&s, 2, 1, outcome).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
        let v = chsh.evaluate(&cond).unwrap();
        assert!((v.abs() - 2.0 * SQRT2).abs() < 1e-9, "outcome {outcome}: {v}");
        values.push(v);
    }
    assert!(values[0] * values[1] < 0.0, "opposite signs expected");
    pass(
        "criterion 9 (steering decomposition)",
        started,
        Duration::from_secs(1),
        format!("conditional CHSH = {:+.9}, {:+.9}", values[0], values[1]),
    );
}

/// The exhaustive certificate behind criteria 1-3: no enumerated vertex on
/// any partition beats the declared bounds (exact integer arithmetic).
#[test]
fn acceptance_bound_soundness() {
    let started = Instant::now();
    let caps = EnumerationCaps::default();
    for (m, d, e) in [
        (3usize, 2usize, BellExpression::svetlichny(3).unwrap()),
        (3, 3, BellExpression::smd(3, 3).unwrap()),
    ] {
        let t = e.coefficient_tensor();
        for p in Partition::enumerate(m) {
            for v in enumerate_bipartition_vertices(d, &p, &caps).unwrap() {
                let value = behaviors::deterministic_value(&t, &v);
                match e.direction() {
                    Direction::Upper => assert!(value <= e.bound()),
                    Direction::Lower => assert!(value >= e.bound()),
                }
            }
        }
    }
    pass(
        "bound soundness (supplement to criteria 1-3)",
        started,
        Duration::from_secs(60),
        "no vertex beats a declared bound".into(),
    );
}
