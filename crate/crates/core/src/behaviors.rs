//! Behavior tensors, deterministic strategy vertices of the local and
//! bipartition models, and exact bound certification by enumeration with
//! best-response decomposition.
//!
//! Layout, fixed for serialization and contraction: a behavior is a dense
//! vector indexed by `x_lin * d^m + a_lin`, input-major and outcome-minor,
//! party 0 most significant in both linearizations.

use serde::{Deserialize, Serialize};

use crate::bell_expr::{BellExpression, CoefficientTensor, Direction};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const SUM_TOL: f64 = 1e-12;

// ---------------------------------------------------------------------------
// index layout
// ---------------------------------------------------------------------------

/// Linear index of an input combination, party 0 most significant.
pub fn input_index(bits: &[u8]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
}

/// Inverse of [`input_index`].
pub fn input_bits(x_lin: usize, m: usize) -> Vec<u8> {
    (0..m).map(|j| ((x_lin >> (m - 1 - j)) & 1) as u8).collect()
}

/// Linear index of an outcome combination, party 0 most significant.
pub fn outcome_index(outs: &[usize], d: usize) -> usize {
    outs.iter().fold(0, |acc, &o| acc * d + o)
}

/// Inverse of [`outcome_index`].
pub fn outcome_digits(a_lin: usize, m: usize, d: usize) -> Vec<usize> {
    let mut digits = vec![0; m];
    let mut rest = a_lin;
    for j in (0..m).rev() {
        digits[j] = rest % d;
        rest /= d;
    }
    digits
}

/// Digit sum of every outcome index 0..d^m, used by bracket weights.
pub fn outcome_digit_sums(m: usize, d: usize) -> Vec<u32> {
    let n = d.pow(m as u32);
    let mut sums = vec![0u32; n];
    for a in 1..n {
        sums[a] = sums[a / d] + (a % d) as u32;
    }
    sums
}

// ---------------------------------------------------------------------------
// behaviors
// ---------------------------------------------------------------------------

/// Joint conditional probability tensor P(a_1..a_m | x_1..x_m).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Behavior<T> {
    m: usize,
    d: usize,
    probs: Vec<T>,
}

impl<T: Scalar> Behavior<T> {
    /// Validates entry range and per-input normalization (within 1e-12).
    pub fn new(m: usize, d: usize, probs: Vec<T>) -> Result<Behavior<T>> {
        if m == 0 || d < 2 {
            return Err(Error::invalid("behavior requires m >= 1 and d >= 2"));
        }
        let n_x = 1usize << m;
        let n_a = d.pow(m as u32);
        if probs.len() != n_x * n_a {
            return Err(Error::invalid(format!(
                "behavior tensor has {} entries, expected {}",
                probs.len(),
                n_x * n_a
            )));
        }
        for x in 0..n_x {
            let mut sum = 0.0;
            for a in 0..n_a {
                let p = probs[x * n_a + a].as_f64();
                if !(-SUM_TOL..=1.0 + SUM_TOL).contains(&p) {
                    return Err(Error::invalid(format!(
                        "probability {p} out of [0,1] at x={x}, a={a}"
                    )));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > SUM_TOL {
                return Err(Error::invalid(format!(
                    "outcome probabilities for input {x} sum to {sum}"
                )));
            }
        }
        Ok(Behavior { m, d, probs })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn outcome_count(&self) -> usize {
        self.d.pow(self.m as u32)
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn prob(&self, x_lin: usize, a_lin: usize) -> T {
        self.probs[x_lin * self.outcome_count() + a_lin]
    }

    /// Point-mass behavior of a bipartition vertex: P(a|x) = 1 iff each
    /// side's joint output matches its strategy at its joint input.
    pub fn from_vertex(v: &BipartitionVertex) -> Behavior<T> {
        let m = v.m();
        let d = v.d();
        let n_x = 1usize << m;
        let n_a = d.pow(m as u32);
        let mut probs = vec![T::zero(); n_x * n_a];
        let mut outs = vec![0usize; m];
        for x in 0..n_x {
            let bits = input_bits(x, m);
            v.outputs_into(&bits, &mut outs);
            probs[x * n_a + outcome_index(&outs, d)] = T::one();
        }
        Behavior { m, d, probs }
    }
}

impl<T: Scalar + num_traits::Float> Behavior<T> {
    /// P(a|x) = d^-m for all a, x.
    pub fn uniform(m: usize, d: usize) -> Result<Behavior<T>> {
        if m == 0 || d < 2 {
            return Err(Error::invalid("behavior requires m >= 1 and d >= 2"));
        }
        let n_x = 1usize << m;
        let n_a = d.pow(m as u32);
        let p = T::from_f64(1.0 / n_a as f64).unwrap();
        Ok(Behavior {
            m,
            d,
            probs: vec![p; n_x * n_a],
        })
    }

    /// Random behavior with each conditional row drawn from a normalized
    /// uniform sample.
    pub fn random_with(m: usize, d: usize, rng: &mut impl rand::Rng) -> Behavior<T> {
        let n_x = 1usize << m;
        let n_a = d.pow(m as u32);
        let mut probs = Vec::with_capacity(n_x * n_a);
        for _ in 0..n_x {
            let row: Vec<f64> = (0..n_a).map(|_| rng.gen::<f64>() + 1e-6).collect();
            let sum: f64 = row.iter().sum();
            probs.extend(row.iter().map(|p| T::from_f64(p / sum).unwrap()));
        }
        Behavior { m, d, probs }
    }

    /// Marginal distribution of one party's outcome at a full input
    /// combination.
    pub fn party_marginal(&self, party: usize, x_bits: &[u8]) -> Vec<T> {
        let x = input_index(x_bits);
        let mut marg = vec![T::zero(); self.d];
        for a in 0..self.outcome_count() {
            let digit = a / self.d.pow((self.m - 1 - party) as u32) % self.d;
            marg[digit] += self.prob(x, a);
        }
        marg
    }

    /// Conditions on one party's outcome for a fixed input of that party,
    /// returning the outcome's marginal probability (at the all-unprimed
    /// inputs of the others) and the (m-1)-party conditional behavior.
    pub fn condition_on(
        &self,
        party: usize,
        input_bit: u8,
        outcome: usize,
    ) -> Result<(T, Behavior<T>)> {
        if self.m < 2 {
            return Err(Error::invalid("conditioning requires m >= 2"));
        }
        if party >= self.m || input_bit > 1 || outcome >= self.d {
            return Err(Error::invalid("conditioning target out of range"));
        }
        let m_rest = self.m - 1;
        let n_x_rest = 1usize << m_rest;
        let n_a_rest = self.d.pow(m_rest as u32);
        let mut probs = Vec::with_capacity(n_x_rest * n_a_rest);
        let mut marginal = T::zero();
        for x_rest in 0..n_x_rest {
            let mut bits = input_bits(x_rest, m_rest);
            bits.insert(party, input_bit);
            let x = input_index(&bits);
            let mut norm = T::zero();
            let mut row = Vec::with_capacity(n_a_rest);
            for a_rest in 0..n_a_rest {
                let mut outs = outcome_digits(a_rest, m_rest, self.d);
                outs.insert(party, outcome);
                let p = self.prob(x, outcome_index(&outs, self.d));
                norm += p;
                row.push(p);
            }
            if norm.as_f64() < 1e-15 {
                return Err(Error::invalid(format!(
                    "conditioned outcome has zero probability at x={x}"
                )));
            }
            if x_rest == 0 {
                marginal = norm;
            }
            probs.extend(row.into_iter().map(|p| p / norm));
        }
        Ok((marginal, Behavior::new(m_rest, self.d, probs)?))
    }
}

/// Entrywise w * b1 + (1 - w) * b2.
pub fn mix<T: Scalar + num_traits::Float>(
    w: T,
    b1: &Behavior<T>,
    b2: &Behavior<T>,
) -> Result<Behavior<T>> {
    if b1.m != b2.m || b1.d != b2.d {
        return Err(Error::invalid("mix requires equal behavior shapes"));
    }
    if w < T::zero() || w > T::one() {
        return Err(Error::invalid("mixing weight must lie in [0, 1]"));
    }
    let probs = b1
        .probs
        .iter()
        .zip(&b2.probs)
        .map(|(&p, &q)| w * p + (T::one() - w) * q)
        .collect();
    Ok(Behavior {
        m: b1.m,
        d: b1.d,
        probs,
    })
}

/// Finite convex combination of behaviors (the extreme-point representation
/// of the models' lambda-integrals).
#[derive(Clone, Debug)]
pub struct ConvexMixture<T> {
    components: Vec<(T, Behavior<T>)>,
}

impl<T: Scalar + num_traits::Float> ConvexMixture<T> {
    pub fn new(components: Vec<(T, Behavior<T>)>) -> Result<ConvexMixture<T>> {
        if components.is_empty() {
            return Err(Error::invalid("mixture needs at least one component"));
        }
        let (m, d) = (components[0].1.m, components[0].1.d);
        let mut sum = 0.0;
        for (w, b) in &components {
            if b.m != m || b.d != d {
                return Err(Error::invalid("mixture components must share one shape"));
            }
            if w.as_f64() < -SUM_TOL {
                return Err(Error::invalid("mixture weights must be nonnegative"));
            }
            sum += w.as_f64();
        }
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::invalid(format!("mixture weights sum to {sum}")));
        }
        Ok(ConvexMixture { components })
    }

    pub fn components(&self) -> &[(T, Behavior<T>)] {
        &self.components
    }

    pub fn collapse(&self) -> Behavior<T> {
        let (m, d) = (self.components[0].1.m, self.components[0].1.d);
        let len = self.components[0].1.probs.len();
        let mut probs = vec![T::zero(); len];
        for (w, b) in &self.components {
            for (acc, &p) in probs.iter_mut().zip(&b.probs) {
                *acc += *w * p;
            }
        }
        Behavior { m, d, probs }
    }
}

// ---------------------------------------------------------------------------
// strategies and vertices
// ---------------------------------------------------------------------------

/// A fully local deterministic strategy: per party, one output for each of
/// its two inputs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalStrategy {
    pub outputs: Vec<[u32; 2]>,
}

impl LocalStrategy {
    /// Decodes strategy `index` (base d over 2m digits, party 0's unprimed
    /// output least significant).
    pub fn decode(index: u128, m: usize, d: usize) -> LocalStrategy {
        let mut rest = index;
        let outputs = (0..m)
            .map(|_| {
                let f0 = (rest % d as u128) as u32;
                rest /= d as u128;
                let f1 = (rest % d as u128) as u32;
                rest /= d as u128;
                [f0, f1]
            })
            .collect();
        LocalStrategy { outputs }
    }

    pub fn behavior<T: Scalar>(&self, d: usize) -> Behavior<T> {
        let m = self.outputs.len();
        let n_x = 1usize << m;
        let n_a = d.pow(m as u32);
        let mut probs = vec![T::zero(); n_x * n_a];
        for x in 0..n_x {
            let bits = input_bits(x, m);
            let outs: Vec<usize> = (0..m)
                .map(|j| self.outputs[j][bits[j] as usize] as usize)
                .collect();
            probs[x * n_a + outcome_index(&outs, d)] = T::one();
        }
        Behavior { m, d, probs }
    }
}

/// Number of fully local deterministic behaviors, d^(2m), saturating.
pub fn local_vertex_count(m: usize, d: usize) -> u128 {
    (d as u128).checked_pow(2 * m as u32).unwrap_or(u128::MAX)
}

/// Deterministic strategy of one group of parties; the map may depend on the
/// group's full joint input, so signaling within the group is representable.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupStrategy {
    group: Vec<usize>,
    d: usize,
    /// map[joint_input] = joint_output code (base d, first party of the
    /// group most significant)
    map: Vec<u32>,
}

impl GroupStrategy {
    pub fn new(group: Vec<usize>, d: usize, map: Vec<u32>) -> Result<GroupStrategy> {
        if group.is_empty() {
            return Err(Error::invalid("group must be nonempty"));
        }
        if group.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("group must be strictly ascending"));
        }
        if d < 2 {
            return Err(Error::invalid("d must be >= 2"));
        }
        let k = group.len();
        let n_in = 1usize << k;
        let n_out = d.pow(k as u32) as u32;
        if map.len() != n_in {
            return Err(Error::invalid(format!(
                "strategy map has {} entries, expected {n_in}",
                map.len()
            )));
        }
        if map.iter().any(|&o| o >= n_out) {
            return Err(Error::invalid("strategy output code out of range"));
        }
        Ok(GroupStrategy { group, d, map })
    }

    /// Strategy `index` in lexicographic order (all-zeros first): base d^k
    /// digits over the group's joint inputs, joint input 0 least significant.
    pub fn from_index(group: Vec<usize>, d: usize, index: u128) -> GroupStrategy {
        let k = group.len();
        let n_out = (d as u128).pow(k as u32);
        let mut rest = index;
        let map = (0..1usize << k)
            .map(|_| {
                let o = (rest % n_out) as u32;
                rest /= n_out;
                o
            })
            .collect();
        GroupStrategy { group, d, map }
    }

    pub fn group(&self) -> &[usize] {
        &self.group
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn map(&self) -> &[u32] {
        &self.map
    }

    /// Joint input of the group within a full input combination, first group
    /// party most significant.
    pub fn joint_input(&self, x_bits: &[u8]) -> usize {
        self.group
            .iter()
            .fold(0, |acc, &j| (acc << 1) | x_bits[j] as usize)
    }

    /// Writes this side's outputs into the full outcome slot array.
    pub fn outputs_into(&self, x_bits: &[u8], outs: &mut [usize]) {
        let k = self.group.len();
        let mut code = self.map[self.joint_input(x_bits)] as usize;
        for i in (0..k).rev() {
            outs[self.group[i]] = code % self.d;
            code /= self.d;
        }
    }
}

/// Number of deterministic strategies of a k-party group, (d^k)^(2^k),
/// saturating.
pub fn group_strategy_count(k: usize, d: usize) -> u128 {
    let base = (d as u128).checked_pow(k as u32);
    match base {
        Some(b) => b.checked_pow(1 << k as u32).unwrap_or(u128::MAX),
        None => u128::MAX,
    }
}

/// An unordered split of the parties into two nonempty groups; by convention
/// the left side contains party 0.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    left: Vec<usize>,
    right: Vec<usize>,
}

impl Partition {
    pub fn new(left: Vec<usize>, right: Vec<usize>) -> Result<Partition> {
        if left.is_empty() || right.is_empty() {
            return Err(Error::invalid("both sides of a partition must be nonempty"));
        }
        let m = left.len() + right.len();
        let mut seen = vec![false; m];
        for &j in left.iter().chain(&right) {
            if j >= m || seen[j] {
                return Err(Error::invalid("partition sides must tile 0..m"));
            }
            seen[j] = true;
        }
        let (mut left, mut right) = (left, right);
        left.sort_unstable();
        right.sort_unstable();
        if right.contains(&0) {
            std::mem::swap(&mut left, &mut right);
        }
        Ok(Partition { left, right })
    }

    /// All proper bipartitions of m parties, each exactly once (left side
    /// contains party 0), in ascending bitmask order.
    pub fn enumerate(m: usize) -> Vec<Partition> {
        let mut out = Vec::new();
        for mask in 1u32..((1 << m) - 1) {
            if mask & 1 == 0 {
                continue;
            }
            let left: Vec<usize> = (0..m).filter(|&j| mask >> j & 1 == 1).collect();
            let right: Vec<usize> = (0..m).filter(|&j| mask >> j & 1 == 0).collect();
            out.push(Partition { left, right });
        }
        out
    }

    pub fn left(&self) -> &[usize] {
        &self.left
    }

    pub fn right(&self) -> &[usize] {
        &self.right
    }

    pub fn m(&self) -> usize {
        self.left.len() + self.right.len()
    }

    /// Human label with 1-based parties, e.g. "1,2|3".
    pub fn label(&self) -> String {
        let side = |s: &[usize]| {
            s.iter()
                .map(|j| (j + 1).to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        format!("{}|{}", side(&self.left), side(&self.right))
    }

    /// Parses "1,2|3" (1-based) for a given party count.
    pub fn parse(s: &str, m: usize) -> Result<Partition> {
        let (a, b) = s
            .split_once('|')
            .ok_or_else(|| Error::invalid("partition must look like \"1,2|3\""))?;
        let side = |s: &str| -> Result<Vec<usize>> {
            s.split(',')
                .map(|tok| {
                    let v: usize = tok
                        .trim()
                        .parse()
                        .map_err(|_| Error::invalid(format!("bad party index {tok:?}")))?;
                    if v == 0 || v > m {
                        return Err(Error::invalid(format!("party {v} out of 1..={m}")));
                    }
                    Ok(v - 1)
                })
                .collect()
        };
        let p = Partition::new(side(a)?, side(b)?)?;
        if p.m() != m {
            return Err(Error::invalid(format!(
                "partition covers {} parties, expected {m}",
                p.m()
            )));
        }
        Ok(p)
    }
}

/// A pair of deterministic group strategies for one bipartition: an extreme
/// point of the bipartition model.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BipartitionVertex {
    left: GroupStrategy,
    right: GroupStrategy,
}

impl BipartitionVertex {
    pub fn new(left: GroupStrategy, right: GroupStrategy) -> Result<BipartitionVertex> {
        if left.d != right.d {
            return Err(Error::invalid("strategies must share one d"));
        }
        Partition::new(left.group.clone(), right.group.clone())?;
        Ok(BipartitionVertex { left, right })
    }

    pub fn m(&self) -> usize {
        self.left.group.len() + self.right.group.len()
    }

    pub fn d(&self) -> usize {
        self.left.d
    }

    pub fn partition(&self) -> Partition {
        Partition::new(self.left.group.clone(), self.right.group.clone())
            .expect("vertex sides form a partition")
    }

    pub fn left(&self) -> &GroupStrategy {
        &self.left
    }

    pub fn right(&self) -> &GroupStrategy {
        &self.right
    }

    pub fn outputs_into(&self, x_bits: &[u8], outs: &mut [usize]) {
        self.left.outputs_into(x_bits, outs);
        self.right.outputs_into(x_bits, outs);
    }

    /// The vertex behavior as a 0/1 vector in the fixed linear layout.
    pub fn indicator_vector(&self) -> Vec<i64> {
        Behavior::<i64>::from_vertex(self).probs
    }
}

// ---------------------------------------------------------------------------
// enumeration
// ---------------------------------------------------------------------------

/// Enumeration limits; exceeding one yields a resource-limit error naming the
/// required count.
#[derive(Clone, Copy, Debug)]
pub struct EnumerationCaps {
    pub max_vertices: u64,
}

impl Default for EnumerationCaps {
    fn default() -> Self {
        EnumerationCaps {
            max_vertices: 100_000_000,
        }
    }
}

impl EnumerationCaps {
    pub fn new(max_vertices: u64) -> EnumerationCaps {
        EnumerationCaps { max_vertices }
    }

    fn check(&self, required: u128) -> Result<()> {
        if required > u128::from(self.max_vertices) {
            return Err(Error::ResourceLimit {
                required,
                cap: self.max_vertices,
            });
        }
        Ok(())
    }
}

/// Streams all d^(2m) fully local deterministic behaviors, each exactly once.
pub fn enumerate_local_vertices(
    m: usize,
    d: usize,
    caps: &EnumerationCaps,
) -> Result<impl Iterator<Item = Behavior<i64>>> {
    let count = local_vertex_count(m, d);
    caps.check(count)?;
    Ok((0..count).map(move |i| LocalStrategy::decode(i, m, d).behavior::<i64>(d)))
}

/// Streams every pair of group strategies of one bipartition exactly once
/// (left side major).
pub fn enumerate_bipartition_vertices(
    d: usize,
    partition: &Partition,
    caps: &EnumerationCaps,
) -> Result<impl Iterator<Item = BipartitionVertex>> {
    let left_count = group_strategy_count(partition.left.len(), d);
    let right_count = group_strategy_count(partition.right.len(), d);
    let count = left_count.saturating_mul(right_count);
    caps.check(count)?;
    let (lg, rg) = (partition.left.clone(), partition.right.clone());
    Ok((0..count).map(move |i| {
        let left = GroupStrategy::from_index(lg.clone(), d, i / right_count);
        let right = GroupStrategy::from_index(rg.clone(), d, i % right_count);
        BipartitionVertex { left, right }
    }))
}

// ---------------------------------------------------------------------------
// exact values on deterministic points
// ---------------------------------------------------------------------------

/// Exact expression value on a fully local deterministic strategy.
pub fn local_strategy_value(t: &CoefficientTensor, s: &LocalStrategy) -> i64 {
    let m = s.outputs.len();
    let d = t.d();
    let mut total = 0i64;
    for x in 0..1usize << m {
        let mut a = 0usize;
        for (j, f) in s.outputs.iter().enumerate() {
            let bit = (x >> (m - 1 - j)) & 1;
            a = a * d + f[bit] as usize;
        }
        total += t.at(x, a);
    }
    total
}

/// Exact expression value on a bipartition vertex.
pub fn deterministic_value(t: &CoefficientTensor, v: &BipartitionVertex) -> i64 {
    let m = v.m();
    let d = v.d();
    let mut outs = vec![0usize; m];
    let mut total = 0i64;
    for x in 0..1usize << m {
        let bits = input_bits(x, m);
        v.outputs_into(&bits, &mut outs);
        total += t.at(x, outcome_index(&outs, d));
    }
    total
}

/// Signed margin beyond the bound in the violating direction; positive means
/// violation.
pub fn violation<T: Scalar>(e: &BellExpression, b: &Behavior<T>) -> Result<T> {
    let v = e.evaluate(b)?;
    let bound = T::from_weight(e.bound());
    Ok(match e.direction() {
        Direction::Upper => v - bound,
        Direction::Lower => bound - v,
    })
}

fn better(direction: Direction, candidate: i64, incumbent: i64) -> bool {
    match direction {
        Direction::Upper => candidate > incumbent,
        Direction::Lower => candidate < incumbent,
    }
}

// ---------------------------------------------------------------------------
// bound engines
// ---------------------------------------------------------------------------

/// Exact local-model optimum with one witnessing strategy.
#[derive(Clone, Debug, Serialize)]
pub struct LocalBound {
    pub value: i64,
    pub argmax: LocalStrategy,
}

/// Exact optimum of an expression over all fully local deterministic
/// behaviors (min for lower-bounded expressions, max for upper).
pub fn local_bound(e: &BellExpression, caps: &EnumerationCaps) -> Result<LocalBound> {
    let (m, d) = (e.m(), e.d());
    let count = local_vertex_count(m, d);
    caps.check(count)?;
    let t = e.coefficient_tensor();
    let mut best: Option<LocalBound> = None;
    for index in 0..count {
        let s = LocalStrategy::decode(index, m, d);
        let value = local_strategy_value(&t, &s);
        if best.as_ref().is_none_or(|b| better(e.direction(), value, b.value)) {
            best = Some(LocalBound { value, argmax: s });
        }
    }
    Ok(best.expect("at least one local strategy"))
}

/// One bipartition's exact optimum and a witnessing vertex.
#[derive(Clone, Debug)]
pub struct PartitionBound {
    pub partition: Partition,
    pub value: i64,
    pub argmax: BipartitionVertex,
}

/// Global bipartition-model optimum with the per-partition breakdown.
#[derive(Clone, Debug)]
pub struct BipartitionBound {
    pub value: i64,
    pub per_partition: Vec<PartitionBound>,
}

impl BipartitionBound {
    /// The first partition attaining the global optimum.
    pub fn witness(&self) -> &PartitionBound {
        self.per_partition
            .iter()
            .find(|p| p.value == self.value)
            .expect("some partition attains the optimum")
    }
}

/// Precomputed index tables for a best response: per full input combination
/// the responding side's joint input, plus its outcome place values.
struct ResponseTables {
    resp_joint: Vec<usize>,
    resp_place: Vec<usize>,
}

fn response_tables(m: usize, d: usize, resp: &[usize]) -> ResponseTables {
    let n_x = 1usize << m;
    let mut resp_joint = vec![0; n_x];
    for (x, joint) in resp_joint.iter_mut().enumerate() {
        let bits = input_bits(x, m);
        *joint = resp.iter().fold(0, |acc, &j| (acc << 1) | bits[j] as usize);
    }
    let resp_place = resp
        .iter()
        .map(|&j| d.pow((m - 1 - j) as u32))
        .collect();
    ResponseTables {
        resp_joint,
        resp_place,
    }
}

/// Best deterministic response of `responding` against a fixed strategy of
/// the complementary group: per joint input of the responding group, the
/// joint output optimizing the contracted tensor, ties broken toward the
/// lexicographically smallest output. Returns the strategy and the full
/// expression value. Exact by linearity.
pub fn best_response(
    e: &BellExpression,
    fixed: &GroupStrategy,
    responding: &[usize],
) -> Result<(GroupStrategy, i64)> {
    let mut resp: Vec<usize> = responding.to_vec();
    resp.sort_unstable();
    resp.dedup();
    if resp.len() != responding.len() {
        return Err(Error::invalid("responding group has duplicate parties"));
    }
    Partition::new(fixed.group.clone(), resp.clone())
        .map_err(|_| Error::invalid("fixed and responding groups must partition the parties"))?;
    if fixed.d != e.d() || fixed.group.len() + resp.len() != e.m() {
        return Err(Error::invalid("strategy shape does not match expression"));
    }
    let t = e.coefficient_tensor();
    Ok(best_response_inner(&t, e.direction(), fixed, &resp))
}

fn best_response_inner(
    t: &CoefficientTensor,
    direction: Direction,
    fixed: &GroupStrategy,
    resp: &[usize],
) -> (GroupStrategy, i64) {
    let m = fixed.group.len() + resp.len();
    let d = t.d();
    let tables = response_tables(m, d, resp);
    let n_x = 1usize << m;
    let r_k = resp.len();
    let r_inputs = 1usize << r_k;
    let r_outputs = d.pow(r_k as u32);

    // fixed side's contribution to the outcome index, per full input
    let mut fixed_part = vec![0usize; n_x];
    let mut outs = vec![0usize; m];
    for (x, part) in fixed_part.iter_mut().enumerate() {
        let bits = input_bits(x, m);
        outs.iter_mut().for_each(|o| *o = 0);
        fixed.outputs_into(&bits, &mut outs);
        *part = fixed.group.iter().fold(0, |acc, &j| {
            acc + outs[j] * d.pow((m - 1 - j) as u32)
        });
    }

    let mut map = vec![0u32; r_inputs];
    let mut total = 0i64;
    for (hin, slot) in map.iter_mut().enumerate() {
        let xs: Vec<usize> = (0..n_x).filter(|&x| tables.resp_joint[x] == hin).collect();
        let mut best_out = 0usize;
        let mut best_val = i64::MIN;
        for out in 0..r_outputs {
            // responding outcome digits placed at their party positions
            let mut add = 0usize;
            let mut code = out;
            for i in (0..r_k).rev() {
                add += (code % d) * tables.resp_place[i];
                code /= d;
            }
            let mut val = 0i64;
            for &x in &xs {
                val += t.at(x, fixed_part[x] + add);
            }
            let v_cmp = match direction {
                Direction::Upper => val,
                Direction::Lower => -val,
            };
            if best_val == i64::MIN || v_cmp > best_val {
                best_val = v_cmp;
                best_out = out;
            }
        }
        *slot = best_out as u32;
        total += match direction {
            Direction::Upper => best_val,
            Direction::Lower => -best_val,
        };
    }
    (
        GroupStrategy {
            group: resp.to_vec(),
            d,
            map,
        },
        total,
    )
}

fn partition_bound_best_response(
    t: &CoefficientTensor,
    direction: Direction,
    d: usize,
    p: &Partition,
    caps: &EnumerationCaps,
) -> Result<PartitionBound> {
    // enumerate the smaller side, best-respond with the larger
    let (small, large) = if group_strategy_count(p.left.len(), d)
        <= group_strategy_count(p.right.len(), d)
    {
        (p.left.clone(), p.right.clone())
    } else {
        (p.right.clone(), p.left.clone())
    };
    let count = group_strategy_count(small.len(), d);
    caps.check(count)?;
    let mut best: Option<PartitionBound> = None;
    for i in 0..count {
        let fixed = GroupStrategy::from_index(small.clone(), d, i);
        let (resp, value) = best_response_inner(t, direction, &fixed, &large);
        if best.as_ref().is_none_or(|b| better(direction, value, b.value)) {
            let (left, right) = if small.contains(&0) {
                (fixed.clone(), resp)
            } else {
                (resp, fixed.clone())
            };
            best = Some(PartitionBound {
                partition: p.clone(),
                value,
                argmax: BipartitionVertex { left, right },
            });
        }
    }
    Ok(best.expect("at least one strategy"))
}

fn collect_bipartition_bound(
    e: &BellExpression,
    per_partition: Vec<PartitionBound>,
) -> BipartitionBound {
    let value = per_partition
        .iter()
        .map(|p| p.value)
        .reduce(|a, b| if better(e.direction(), b, a) { b } else { a })
        .expect("at least one partition");
    BipartitionBound {
        value,
        per_partition,
    }
}

/// Exact optimum of the expression over the union of all proper bipartitions'
/// vertices, computed per partition by enumerating the smaller side and
/// best-responding with the larger side. Partitions run in parallel; the
/// merge is order-independent.
pub fn bipartition_bound(e: &BellExpression, caps: &EnumerationCaps) -> Result<BipartitionBound> {
    if e.m() < 2 {
        return Err(Error::invalid("bipartition bounds require m >= 2"));
    }
    let t = e.coefficient_tensor();
    let partitions = Partition::enumerate(e.m());
    use rayon::prelude::*;
    let per: Result<Vec<PartitionBound>> = partitions
        .par_iter()
        .map(|p| partition_bound_best_response(&t, e.direction(), e.d(), p, caps))
        .collect();
    Ok(collect_bipartition_bound(e, per?))
}

/// Same optimum by exhaustive enumeration of every vertex of every
/// partition; the certification cross-check for the best-response path.
pub fn bipartition_bound_by_enumeration(
    e: &BellExpression,
    caps: &EnumerationCaps,
) -> Result<BipartitionBound> {
    if e.m() < 2 {
        return Err(Error::invalid("bipartition bounds require m >= 2"));
    }
    let t = e.coefficient_tensor();
    let partitions = Partition::enumerate(e.m());
    use rayon::prelude::*;
    let per: Result<Vec<PartitionBound>> = partitions
        .par_iter()
        .map(|p| {
            let mut best: Option<PartitionBound> = None;
            for v in enumerate_bipartition_vertices(e.d(), p, caps)? {
                let value = deterministic_value(&t, &v);
                if best.as_ref().is_none_or(|b| better(e.direction(), value, b.value)) {
                    best = Some(PartitionBound {
                        partition: p.clone(),
                        value,
                        argmax: v,
                    });
                }
            }
            Ok(best.expect("at least one vertex"))
        })
        .collect();
    Ok(collect_bipartition_bound(e, per?))
}

#[doc(hidden)]
pub fn test_rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}
