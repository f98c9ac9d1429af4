//! Symbolic construction, transformation, and evaluation of the inequality
//! family, in both correlator (d = 2, outcomes valued (-1)^a) and bracket
//! (general d) forms.
//!
//! Conventions, fixed across the whole workspace:
//! - parties are indexed 0..m; input bit 1 means the primed setting;
//! - term order is lexicographic on the inputs vector, party 0 most
//!   significant;
//! - a bracket is stored as `(star, offset)` with the offset reduced mod d,
//!   and weights outcome combination `a` by `((-1)^star (sum a + offset)) mod d`;
//! - coefficients, offsets, and bounds are exact integers.

use serde::{Deserialize, Serialize};

use crate::behaviors::{self, Behavior};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest party count accepted by constructors. Keeps 2^m term lists and
/// 2^m * d^m tensors at sane sizes.
pub const MAX_PARTIES: usize = 16;
/// Largest outcome count accepted by constructors.
pub const MAX_OUTCOMES: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Form {
    Correlator,
    Bracket,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// expression >= bound
    Lower,
    /// expression <= bound
    Upper,
}

impl Direction {
    pub fn flipped(self) -> Direction {
        match self {
            Direction::Lower => Direction::Upper,
            Direction::Upper => Direction::Lower,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundModel {
    Local,
    Bipartition,
}

/// A bracket `[... + offset]` (star = false) or `[... + offset]*` (star =
/// true), where `[X] = sum_j j P(X = j mod d)` and `[X]* = [-X]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Bracket {
    star: bool,
    offset: u32,
}

impl Bracket {
    /// Builds a bracket, reducing the offset mod d.
    pub fn new(star: bool, offset: i64, d: usize) -> Bracket {
        Bracket {
            star,
            offset: offset.rem_euclid(d as i64) as u32,
        }
    }

    pub fn star(&self) -> bool {
        self.star
    }

    pub fn offset(&self) -> u32 {
        self.offset
    }

    /// The prime-map rule: `[...] -> [... + 1]*` and `[...]* -> [...]`.
    pub fn primed(&self, d: usize) -> Bracket {
        if self.star {
            Bracket::new(false, i64::from(self.offset), d)
        } else {
            Bracket::new(true, i64::from(self.offset) + 1, d)
        }
    }

    /// Weight of an outcome combination with digit sum `outcome_sum`.
    pub fn weight(&self, outcome_sum: u64, d: usize) -> i64 {
        let mut v = outcome_sum as i64 + i64::from(self.offset);
        if self.star {
            v = -v;
        }
        v.rem_euclid(d as i64)
    }
}

/// Payload of one term: a +-1 coefficient (correlator form) or a bracket.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TermPayload {
    Coeff(i64),
    Bracket(Bracket),
}

/// One term: the per-party input choice (bit 1 = primed) plus its payload.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Term {
    pub inputs: Vec<u8>,
    pub payload: TermPayload,
}

impl Term {
    pub fn correlator(inputs: Vec<u8>, coeff: i64) -> Term {
        Term {
            inputs,
            payload: TermPayload::Coeff(coeff),
        }
    }

    pub fn bracket(inputs: Vec<u8>, bracket: Bracket) -> Term {
        Term {
            inputs,
            payload: TermPayload::Bracket(bracket),
        }
    }

    /// Integer weight this term assigns to an outcome combination with digit
    /// sum `outcome_sum`.
    fn weight(&self, outcome_sum: u64, d: usize) -> i64 {
        match self.payload {
            TermPayload::Coeff(c) => {
                if outcome_sum % 2 == 1 {
                    -c
                } else {
                    c
                }
            }
            TermPayload::Bracket(b) => b.weight(outcome_sum, d),
        }
    }
}

/// A Bell expression of the family: a canonicalized term list plus its
/// directional bound against a given model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BellExpression {
    m: usize,
    d: usize,
    form: Form,
    terms: Vec<Term>,
    bound: i64,
    direction: Direction,
    bound_model: BoundModel,
}

/// The affine map relating a correlator expression to its bracket-form
/// counterpart: `bracket_value = slope * correlator_value + intercept`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct AffineMap {
    pub slope: f64,
    pub intercept: f64,
}

impl AffineMap {
    pub fn apply(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

impl BellExpression {
    /// Validates and canonicalizes: terms sorted lexicographically on inputs,
    /// duplicate correlator terms merged (zero coefficients dropped),
    /// duplicate bracket inputs rejected.
    pub fn new(
        m: usize,
        d: usize,
        form: Form,
        terms: Vec<Term>,
        bound: i64,
        direction: Direction,
        bound_model: BoundModel,
    ) -> Result<BellExpression> {
        if !(1..=MAX_PARTIES).contains(&m) {
            return Err(Error::invalid(format!(
                "party count m={m} outside supported range 1..={MAX_PARTIES}"
            )));
        }
        if !(2..=MAX_OUTCOMES).contains(&d) {
            return Err(Error::invalid(format!(
                "outcome count d={d} outside supported range 2..={MAX_OUTCOMES}"
            )));
        }
        if form == Form::Correlator && d != 2 {
            return Err(Error::invalid("correlator form requires d = 2"));
        }
        let mut canon: Vec<Term> = Vec::with_capacity(terms.len());
        for t in terms {
            if t.inputs.len() != m {
                return Err(Error::invalid(format!(
                    "term has {} inputs, expected {m}",
                    t.inputs.len()
                )));
            }
            if t.inputs.iter().any(|&b| b > 1) {
                return Err(Error::invalid("term inputs must be bits"));
            }
            let payload = match (form, t.payload) {
                (Form::Correlator, TermPayload::Coeff(c)) => TermPayload::Coeff(c),
                (Form::Bracket, TermPayload::Bracket(b)) => {
                    TermPayload::Bracket(Bracket::new(b.star, i64::from(b.offset), d))
                }
                _ => return Err(Error::invalid("term payload does not match expression form")),
            };
            canon.push(Term {
                inputs: t.inputs,
                payload,
            });
        }
        canon.sort_by(|a, b| a.inputs.cmp(&b.inputs));
        let mut merged: Vec<Term> = Vec::with_capacity(canon.len());
        for t in canon {
            match merged.last_mut() {
                Some(last) if last.inputs == t.inputs => match (&mut last.payload, t.payload) {
                    (TermPayload::Coeff(a), TermPayload::Coeff(b)) => *a += b,
                    _ => {
                        return Err(Error::invalid(
                            "duplicate bracket term for one inputs vector",
                        ))
                    }
                },
                _ => merged.push(t),
            }
        }
        merged.retain(|t| !matches!(t.payload, TermPayload::Coeff(0)));
        Ok(BellExpression {
            m,
            d,
            form,
            terms: merged,
            bound,
            direction,
            bound_model,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn form(&self) -> Form {
        self.form
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn bound(&self) -> i64 {
        self.bound
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn bound_model(&self) -> BoundModel {
        self.bound_model
    }

    /// Same expression with a different declared bound (for probing how
    /// non-tight bounds behave in facet checks).
    pub fn with_bound(&self, bound: i64) -> BellExpression {
        let mut e = self.clone();
        e.bound = bound;
        e
    }

    /// The CHSH polynomial a1a2 + a1a2' + a1'a2 - a1'a2' <= 2 (local).
    pub fn chsh() -> BellExpression {
        let terms = vec![
            Term::correlator(vec![0, 0], 1),
            Term::correlator(vec![0, 1], 1),
            Term::correlator(vec![1, 0], 1),
            Term::correlator(vec![1, 1], -1),
        ];
        BellExpression::new(2, 2, Form::Correlator, terms, 2, Direction::Upper, BoundModel::Local)
            .expect("CHSH construction is valid")
    }

    /// The m-party Svetlichny polynomial S_m <= 2^(m-1) (bipartition bound),
    /// built by the recursion S_m = S_{m-1} a_m' + S'_{m-1} a_m from CHSH.
    pub fn svetlichny(m: usize) -> Result<BellExpression> {
        if m < 2 {
            return Err(Error::invalid("svetlichny requires m >= 2"));
        }
        if m > MAX_PARTIES {
            return Err(Error::invalid(format!(
                "party count m={m} outside supported range 2..={MAX_PARTIES}"
            )));
        }
        let mut e = BellExpression::chsh();
        for _ in 3..=m {
            e = e.compose(&e.prime_map())?;
        }
        Ok(e)
    }

    /// The CGLMP expression S_{2,d} >= d - 1 (local bound):
    /// [a1+a2] + [a1+a2']* + [a1'+a2]* + [a1'+a2'-1].
    pub fn cglmp(d: usize) -> Result<BellExpression> {
        if d < 2 {
            return Err(Error::invalid("cglmp requires d >= 2"));
        }
        let terms = vec![
            Term::bracket(vec![0, 0], Bracket::new(false, 0, d)),
            Term::bracket(vec![0, 1], Bracket::new(true, 0, d)),
            Term::bracket(vec![1, 0], Bracket::new(true, 0, d)),
            Term::bracket(vec![1, 1], Bracket::new(false, -1, d)),
        ];
        BellExpression::new(
            2,
            d,
            Form::Bracket,
            terms,
            (d - 1) as i64,
            Direction::Lower,
            BoundModel::Local,
        )
    }

    /// The m-party, d-outcome family member S_{m,d} >= 2^(m-2) (d-1)
    /// (bipartition bound; local for m = 2), built by the recursion
    /// S_{m,d} = S_{m-1,d} a_m' + S'_{m-1,d} a_m from CGLMP.
    pub fn smd(m: usize, d: usize) -> Result<BellExpression> {
        if m < 2 {
            return Err(Error::invalid("smd requires m >= 2"));
        }
        if m > MAX_PARTIES {
            return Err(Error::invalid(format!(
                "party count m={m} outside supported range 2..={MAX_PARTIES}"
            )));
        }
        let mut e = BellExpression::cglmp(d)?;
        for _ in 3..=m {
            e = e.compose(&e.prime_map())?;
        }
        Ok(e)
    }

    /// The companion expression S': in bracket form every bracket is mapped
    /// by the rule `[...] -> [...+1]*`, `[...]* -> [...]`; in correlator form
    /// party 0's input is flipped (a1 -> a1', a1' -> -a1), negating the
    /// coefficient of terms where party 0 was primed.
    pub fn prime_map(&self) -> BellExpression {
        let terms = self
            .terms
            .iter()
            .map(|t| match t.payload {
                TermPayload::Bracket(b) => Term::bracket(t.inputs.clone(), b.primed(self.d)),
                TermPayload::Coeff(c) => {
                    let mut inputs = t.inputs.clone();
                    let was_primed = inputs[0] == 1;
                    inputs[0] ^= 1;
                    Term::correlator(inputs, if was_primed { -c } else { c })
                }
            })
            .collect();
        BellExpression::new(
            self.m,
            self.d,
            self.form,
            terms,
            self.bound,
            self.direction,
            self.bound_model,
        )
        .expect("prime map preserves validity")
    }

    /// Adds one party: each term of `self` gains the primed input of the new
    /// party, each term of `primed` the unprimed one. In bracket form the new
    /// outcome enters the sum inside the bracket; in correlator form the term
    /// is multiplied by the new party's outcome. The composed bound is the sum
    /// of the two bounds (doubling for the builders).
    pub fn compose(&self, primed: &BellExpression) -> Result<BellExpression> {
        if self.m != primed.m || self.d != primed.d || self.form != primed.form {
            return Err(Error::invalid(
                "compose requires identical m, d, and form on both expressions",
            ));
        }
        if self.direction != primed.direction {
            return Err(Error::invalid("compose requires identical directions"));
        }
        let mut terms = Vec::with_capacity(self.terms.len() + primed.terms.len());
        for t in &self.terms {
            let mut inputs = t.inputs.clone();
            inputs.push(1);
            terms.push(Term {
                inputs,
                payload: t.payload,
            });
        }
        for t in &primed.terms {
            let mut inputs = t.inputs.clone();
            inputs.push(0);
            terms.push(Term {
                inputs,
                payload: t.payload,
            });
        }
        BellExpression::new(
            self.m + 1,
            self.d,
            self.form,
            terms,
            self.bound + primed.bound,
            self.direction,
            BoundModel::Bipartition,
        )
    }

    /// Relabels parties: party j becomes party perm[j]. Payloads are
    /// unchanged; the term list is re-canonicalized.
    pub fn permute_parties(&self, perm: &[usize]) -> Result<BellExpression> {
        if perm.len() != self.m {
            return Err(Error::invalid("permutation length must equal party count"));
        }
        let mut seen = vec![false; self.m];
        for &p in perm {
            if p >= self.m || seen[p] {
                return Err(Error::invalid("not a permutation"));
            }
            seen[p] = true;
        }
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let mut inputs = vec![0u8; self.m];
                for (j, &bit) in t.inputs.iter().enumerate() {
                    inputs[perm[j]] = bit;
                }
                Term {
                    inputs,
                    payload: t.payload,
                }
            })
            .collect();
        BellExpression::new(
            self.m,
            self.d,
            self.form,
            terms,
            self.bound,
            self.direction,
            self.bound_model,
        )
    }

    /// Integer weight tensor c with `evaluate(e, P) = sum_{x,a} c(x,a) P(a|x)`
    /// for every behavior P; rows of inputs not present in the term list are
    /// zero.
    pub fn coefficient_tensor(&self) -> CoefficientTensor {
        let n_x = 1usize << self.m;
        let n_a = self.d.pow(self.m as u32);
        let sums = behaviors::outcome_digit_sums(self.m, self.d);
        let mut weights = vec![0i64; n_x * n_a];
        for t in &self.terms {
            let x = behaviors::input_index(&t.inputs);
            let row = &mut weights[x * n_a..(x + 1) * n_a];
            for (a, w) in row.iter_mut().enumerate() {
                *w += t.weight(u64::from(sums[a]), self.d);
            }
        }
        CoefficientTensor {
            m: self.m,
            d: self.d,
            weights,
        }
    }

    /// Term-by-term expectation of the expression under a behavior.
    pub fn evaluate<T: Scalar>(&self, b: &Behavior<T>) -> Result<T> {
        if b.m() != self.m || b.d() != self.d {
            return Err(Error::invalid(format!(
                "behavior shape ({}, {}) does not match expression ({}, {})",
                b.m(),
                b.d(),
                self.m,
                self.d
            )));
        }
        let sums = behaviors::outcome_digit_sums(self.m, self.d);
        let mut acc = T::zero();
        for t in &self.terms {
            let x = behaviors::input_index(&t.inputs);
            for (a, &s) in sums.iter().enumerate() {
                let w = t.weight(u64::from(s), self.d);
                if w != 0 {
                    acc += T::from_weight(w) * b.prob(x, a);
                }
            }
        }
        Ok(acc)
    }

    /// Converts a correlator expression to a bracket-form expression over the
    /// same terms, together with the affine map relating the two evaluations
    /// on every behavior. The map is fitted numerically on the uniform
    /// behavior and the first deterministic behavior with a nonvanishing
    /// correlator value; the mapped bound must come out integer.
    pub fn to_bracket_form(&self) -> Result<(BellExpression, AffineMap)> {
        if self.form != Form::Correlator {
            return Err(Error::invalid("to_bracket_form requires correlator form"));
        }
        if self.terms.is_empty() {
            return Err(Error::invalid("cannot convert an empty expression"));
        }
        let terms: Result<Vec<Term>> = self
            .terms
            .iter()
            .map(|t| match t.payload {
                TermPayload::Coeff(1) => Ok(Term::bracket(t.inputs.clone(), Bracket::new(false, 0, 2))),
                TermPayload::Coeff(-1) => {
                    Ok(Term::bracket(t.inputs.clone(), Bracket::new(false, 1, 2)))
                }
                _ => Err(Error::invalid(
                    "to_bracket_form requires +-1 coefficients",
                )),
            })
            .collect();
        let bracket = BellExpression::new(
            self.m,
            2,
            Form::Bracket,
            terms?,
            0,
            self.direction,
            self.bound_model,
        )?;

        let corr_t = self.coefficient_tensor();
        let brk_t = bracket.coefficient_tensor();
        let vc_unif = corr_t.uniform_value();
        let vb_unif = brk_t.uniform_value();
        let mut fit = None;
        for index in 0..behaviors::local_vertex_count(self.m, 2).min(1 << 20) {
            let s = behaviors::LocalStrategy::decode(index, self.m, 2);
            let vc = behaviors::local_strategy_value(&corr_t, &s) as f64;
            if vc != vc_unif {
                let vb = behaviors::local_strategy_value(&brk_t, &s) as f64;
                fit = Some(AffineMap {
                    slope: (vb - vb_unif) / (vc - vc_unif),
                    intercept: vb_unif - (vb - vb_unif) / (vc - vc_unif) * vc_unif,
                });
                break;
            }
        }
        let map = fit.ok_or_else(|| {
            Error::invalid("correlator expression vanishes on all deterministic behaviors")
        })?;

        let mapped = map.apply(self.bound as f64);
        if (mapped - mapped.round()).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "affine image of the bound is not an integer: {mapped}"
            )));
        }
        let direction = if map.slope < 0.0 {
            self.direction.flipped()
        } else {
            self.direction
        };
        let mut out = bracket;
        out.bound = mapped.round() as i64;
        out.direction = direction;
        Ok((out, map))
    }
}

impl std::fmt::Display for BellExpression {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (i, t) in self.terms.iter().enumerate() {
            match t.payload {
                TermPayload::Coeff(c) => {
                    if c < 0 {
                        write!(f, "{}", if i == 0 { "-" } else { " - " })?;
                    } else if i > 0 {
                        write!(f, " + ")?;
                    }
                    if c.abs() != 1 {
                        write!(f, "{}", c.abs())?;
                    }
                    for (j, &bit) in t.inputs.iter().enumerate() {
                        write!(f, "a{}{}", j + 1, if bit == 1 { "'" } else { "" })?;
                    }
                }
                TermPayload::Bracket(b) => {
                    if i > 0 {
                        write!(f, " + ")?;
                    }
                    write!(f, "[")?;
                    for (j, &bit) in t.inputs.iter().enumerate() {
                        if j > 0 {
                            write!(f, "+")?;
                        }
                        write!(f, "a{}{}", j + 1, if bit == 1 { "'" } else { "" })?;
                    }
                    let o = i64::from(b.offset);
                    let d = self.d as i64;
                    if o != 0 {
                        if 2 * o > d {
                            write!(f, "-{}", d - o)?;
                        } else {
                            write!(f, "+{o}")?;
                        }
                    }
                    write!(f, "]{}", if b.star { "*" } else { "" })?;
                }
            }
        }
        let rel = match self.direction {
            Direction::Lower => ">=",
            Direction::Upper => "<=",
        };
        write!(f, " {rel} {}", self.bound)
    }
}

/// Dense integer weight tensor of an expression, indexed by
/// `x_lin * d^m + a_lin` (input-major, outcome-minor, party 0 most
/// significant in both).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoefficientTensor {
    m: usize,
    d: usize,
    weights: Vec<i64>,
}

impl CoefficientTensor {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn outcome_count(&self) -> usize {
        self.d.pow(self.m as u32)
    }

    pub fn weights(&self) -> &[i64] {
        &self.weights
    }

    pub fn at(&self, x_lin: usize, a_lin: usize) -> i64 {
        self.weights[x_lin * self.outcome_count() + a_lin]
    }

    /// Contraction `sum_{x,a} c(x,a) P(a|x)`; agrees with
    /// `BellExpression::evaluate` on every behavior.
    pub fn contract<T: Scalar>(&self, b: &Behavior<T>) -> Result<T> {
        if b.m() != self.m || b.d() != self.d {
            return Err(Error::invalid("behavior shape does not match tensor"));
        }
        let mut acc = T::zero();
        for (i, &w) in self.weights.iter().enumerate() {
            if w != 0 {
                acc += T::from_weight(w) * b.probs()[i];
            }
        }
        Ok(acc)
    }

    /// Exact value on the uniform behavior, `sum c(x,a) / d^m`.
    pub fn uniform_value(&self) -> f64 {
        let total: i64 = self.weights.iter().sum();
        total as f64 / self.outcome_count() as f64
    }
}

// ---------------------------------------------------------------------------
// serde: the on-disk schema
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum TermJson {
    Bracket {
        inputs: Vec<u8>,
        star: bool,
        offset: u32,
    },
    Correlator {
        inputs: Vec<u8>,
        coeff: i64,
    },
}

#[derive(Serialize, Deserialize)]
struct ExpressionJson {
    m: usize,
    d: usize,
    form: Form,
    terms: Vec<TermJson>,
    bound: i64,
    direction: Direction,
    bound_model: BoundModel,
}

impl Serialize for BellExpression {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let terms = self
            .terms
            .iter()
            .map(|t| match t.payload {
                TermPayload::Coeff(c) => TermJson::Correlator {
                    inputs: t.inputs.clone(),
                    coeff: c,
                },
                TermPayload::Bracket(b) => TermJson::Bracket {
                    inputs: t.inputs.clone(),
                    star: b.star,
                    offset: b.offset,
                },
            })
            .collect();
        ExpressionJson {
            m: self.m,
            d: self.d,
            form: self.form,
            terms,
            bound: self.bound,
            direction: self.direction,
            bound_model: self.bound_model,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for BellExpression {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = ExpressionJson::deserialize(deserializer)?;
        let terms = raw
            .terms
            .into_iter()
            .map(|t| match t {
                TermJson::Correlator { inputs, coeff } => Term::correlator(inputs, coeff),
                TermJson::Bracket {
                    inputs,
                    star,
                    offset,
                } => Term::bracket(inputs, Bracket::new(star, i64::from(offset), raw.d.max(2))),
            })
            .collect();
        BellExpression::new(
            raw.m,
            raw.d,
            raw.form,
            terms,
            raw.bound,
            raw.direction,
            raw.bound_model,
        )
        .map_err(serde::de::Error::custom)
    }
}
