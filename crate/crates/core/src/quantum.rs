//! Dense complex linear algebra for diagonal multi-party states and
//! Fourier-transform measurement scenarios: Born-rule behaviors, quantum
//! values, critical visibilities, and derivative-free optimization of the
//! phase settings.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::behaviors::{self, Behavior};
use crate::bell_expr::BellExpression;
use crate::error::{Error, Result};

/// Global phase-convention toggle in the Fourier exponent. Frozen by
/// calibration against the reported quantum values; for the real-amplitude
/// GHZ/gamma states the opposite sign describes the conjugate basis and gives
/// identical behaviors.
pub const FOURIER_SIGN: PhaseSign = PhaseSign::Plus;

/// The partially entangled qutrit weight maximizing the CGLMP violation,
/// (sqrt(11) - sqrt(3)) / 2.
pub fn optimal_cglmp_gamma() -> f64 {
    (11f64.sqrt() - 3f64.sqrt()) / 2.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhaseSign {
    Plus,
    Minus,
}

impl PhaseSign {
    pub fn value(self) -> f64 {
        match self {
            PhaseSign::Plus => 1.0,
            PhaseSign::Minus => -1.0,
        }
    }
}

impl Serialize for PhaseSign {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_i8(match self {
            PhaseSign::Plus => 1,
            PhaseSign::Minus => -1,
        })
    }
}

impl<'de> Deserialize<'de> for PhaseSign {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match i8::deserialize(d)? {
            1 => Ok(PhaseSign::Plus),
            -1 => Ok(PhaseSign::Minus),
            other => Err(serde::de::Error::custom(format!(
                "sign must be 1 or -1, got {other}"
            ))),
        }
    }
}

// ---------------------------------------------------------------------------
// states
// ---------------------------------------------------------------------------

/// A normalized m-party state of local dimension d.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    m: usize,
    d: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn new(m: usize, d: usize, amps: Vec<Complex64>) -> Result<StateVector> {
        if m == 0 || d < 2 {
            return Err(Error::invalid("state requires m >= 1 and d >= 2"));
        }
        if amps.len() != d.pow(m as u32) {
            return Err(Error::invalid(format!(
                "state has {} amplitudes, expected {}",
                amps.len(),
                d.pow(m as u32)
            )));
        }
        let norm2: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm2 - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("state norm^2 = {norm2}, not 1")));
        }
        Ok(StateVector { m, d, amps })
    }

    /// (sum_v |v..v>) / sqrt(d).
    pub fn ghz(m: usize, d: usize) -> Result<StateVector> {
        if m < 2 || d < 2 {
            return Err(Error::invalid("ghz requires m >= 2 and d >= 2"));
        }
        let n = d.pow(m as u32);
        let mut amps = vec![Complex64::ZERO; n];
        let w = Complex64::new(1.0 / (d as f64).sqrt(), 0.0);
        for v in 0..d {
            amps[diagonal_index(v, m, d)] = w;
        }
        Ok(StateVector { m, d, amps })
    }

    /// (|0..0> + gamma |1..1> + |2..2>) / sqrt(2 + gamma^2), d = 3.
    pub fn gamma(m: usize, gamma: f64) -> Result<StateVector> {
        if m < 2 {
            return Err(Error::invalid("gamma state requires m >= 2"));
        }
        if !gamma.is_finite() || gamma <= 0.0 {
            return Err(Error::invalid("gamma must be a positive real"));
        }
        let d = 3usize;
        let n = d.pow(m as u32);
        let mut amps = vec![Complex64::ZERO; n];
        let norm = (2.0 + gamma * gamma).sqrt();
        for (v, w) in [1.0, gamma, 1.0].into_iter().enumerate() {
            amps[diagonal_index(v, m, d)] = Complex64::new(w / norm, 0.0);
        }
        Ok(StateVector { m, d, amps })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Entrywise complex conjugate (still normalized).
    pub fn conjugated(&self) -> StateVector {
        StateVector {
            m: self.m,
            d: self.d,
            amps: self.amps.iter().map(|a| a.conj()).collect(),
        }
    }
}

fn diagonal_index(v: usize, m: usize, d: usize) -> usize {
    (0..m).fold(0, |acc, _| acc * d + v)
}

// ---------------------------------------------------------------------------
// measurements
// ---------------------------------------------------------------------------

/// Per-party, per-input Fourier phases (alpha for the unprimed input, alpha'
/// for the primed one) plus the global exponent sign.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierSettings {
    pub alphas: Vec<[f64; 2]>,
    pub sign: PhaseSign,
}

impl FourierSettings {
    pub fn m(&self) -> usize {
        self.alphas.len()
    }
}

/// Fourier measurement basis: column u (the eigenvector of outcome u) has
/// entries d^{-1/2} exp(sign * 2*pi*i * v (alpha + u) / d), column-major.
pub fn fourier_basis(d: usize, alpha: f64, sign: PhaseSign) -> Vec<Complex64> {
    let mut cols = vec![Complex64::ZERO; d * d];
    let scale = 1.0 / (d as f64).sqrt();
    for u in 0..d {
        for v in 0..d {
            let phase = sign.value() * 2.0 * std::f64::consts::PI * v as f64 * (alpha + u as f64)
                / d as f64;
            cols[u * d + v] = Complex64::from_polar(scale, phase);
        }
    }
    cols
}

/// Born-rule behavior of a state under Fourier settings:
/// P(a|x) = |<a_1,x_1| ... <a_m,x_m| psi>|^2.
pub fn born_behavior(state: &StateVector, settings: &FourierSettings) -> Result<Behavior<f64>> {
    let (m, d) = (state.m, state.d);
    if settings.m() != m {
        return Err(Error::invalid("settings party count does not match state"));
    }
    let bases: Vec<[Vec<Complex64>; 2]> = settings
        .alphas
        .iter()
        .map(|&[a0, a1]| {
            [
                fourier_basis(d, a0, settings.sign),
                fourier_basis(d, a1, settings.sign),
            ]
        })
        .collect();
    let n_x = 1usize << m;
    let n_a = d.pow(m as u32);
    let mut probs = vec![0.0f64; n_x * n_a];
    let mut amp = vec![Complex64::ZERO; n_a];
    let mut v_digits = vec![0usize; m];
    for x in 0..n_x {
        let bits = behaviors::input_bits(x, m);
        amp.iter_mut().for_each(|a| *a = Complex64::ZERO);
        for (v, &psi) in state.amps.iter().enumerate() {
            if psi == Complex64::ZERO {
                continue;
            }
            let mut rest = v;
            for j in (0..m).rev() {
                v_digits[j] = rest % d;
                rest /= d;
            }
            let mut a_digits = vec![0usize; m];
            for (a, slot) in amp.iter_mut().enumerate() {
                let mut rest = a;
                for j in (0..m).rev() {
                    a_digits[j] = rest % d;
                    rest /= d;
                }
                let mut c = psi;
                for j in 0..m {
                    let basis = &bases[j][bits[j] as usize];
                    c *= basis[a_digits[j] * d + v_digits[j]].conj();
                }
                *slot += c;
            }
        }
        for (a, &c) in amp.iter().enumerate() {
            probs[x * n_a + a] = c.norm_sqr();
        }
    }
    Behavior::new(m, d, probs)
}

// ---------------------------------------------------------------------------
// scenarios
// ---------------------------------------------------------------------------

/// State family of a scenario file: GHZ or the d=3 gamma state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum StateSpec {
    Ghz,
    Gamma { gamma: f64 },
}

/// A full measurement scenario: state family plus Fourier phase settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantumScenario {
    m: usize,
    d: usize,
    state: StateSpec,
    alphas: Vec<[f64; 2]>,
    sign: PhaseSign,
}

impl QuantumScenario {
    pub fn new(
        m: usize,
        d: usize,
        state: StateSpec,
        alphas: Vec<[f64; 2]>,
        sign: PhaseSign,
    ) -> Result<QuantumScenario> {
        if alphas.len() != m {
            return Err(Error::invalid("one alpha pair per party is required"));
        }
        if let StateSpec::Gamma { .. } = state {
            if d != 3 {
                return Err(Error::invalid("the gamma state family has d = 3"));
            }
        }
        let s = QuantumScenario {
            m,
            d,
            state,
            alphas,
            sign,
        };
        s.state_vector()?;
        Ok(s)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn state(&self) -> StateSpec {
        self.state
    }

    pub fn alphas(&self) -> &[[f64; 2]] {
        &self.alphas
    }

    pub fn sign(&self) -> PhaseSign {
        self.sign
    }

    pub fn state_vector(&self) -> Result<StateVector> {
        match self.state {
            StateSpec::Ghz => StateVector::ghz(self.m, self.d),
            StateSpec::Gamma { gamma } => StateVector::gamma(self.m, gamma),
        }
    }

    pub fn settings(&self) -> FourierSettings {
        FourierSettings {
            alphas: self.alphas.clone(),
            sign: self.sign,
        }
    }
}

/// The Born-rule behavior of a scenario.
pub fn scenario_behavior(s: &QuantumScenario) -> Result<Behavior<f64>> {
    born_behavior(&s.state_vector()?, &s.settings())
}

/// Expression value on the scenario's behavior.
pub fn quantum_value(e: &BellExpression, s: &QuantumScenario) -> Result<f64> {
    if e.m() != s.m || e.d() != s.d {
        return Err(Error::invalid(format!(
            "scenario shape ({}, {}) does not match expression ({}, {})",
            s.m,
            s.d,
            e.m(),
            e.d()
        )));
    }
    e.evaluate(&scenario_behavior(s)?)
}

/// The unique w in (0, 1] at which mixing the scenario behavior with white
/// noise meets the bound, in closed form from linearity:
/// w = (bound - V_noise) / (V_q - V_noise).
pub fn critical_visibility(e: &BellExpression, s: &QuantumScenario) -> Result<f64> {
    let behavior = scenario_behavior(s)?;
    let margin = behaviors::violation(e, &behavior)?;
    if margin <= 0.0 {
        return Err(Error::NoViolation { violation: margin });
    }
    let v_q = e.evaluate(&behavior)?;
    let v_noise = e.evaluate(&Behavior::<f64>::uniform(e.m(), e.d())?)?;
    Ok((e.bound() as f64 - v_noise) / (v_q - v_noise))
}

/// Conditional behavior of the other parties after measuring `party` with
/// the given input and outcome; returns the outcome's marginal probability
/// and the reduced behavior. The steering view of the recursion.
pub fn conditional_behavior(
    s: &QuantumScenario,
    party: usize,
    input_bit: u8,
    outcome: usize,
) -> Result<(f64, Behavior<f64>)> {
    scenario_behavior(s)?.condition_on(party, input_bit, outcome)
}

/// Built-in scenarios reproducing the reported quantum values:
/// (2,2) CHSH 2*sqrt(2); (3,2) Svetlichny 4*sqrt(2); (2,3) CGLMP 1.0851;
/// (3,3) 2.1703; (4,3) 4.3406 (visibility 0.6861 in each d=3 case).
pub fn paper_scenario(m: usize, d: usize) -> Option<QuantumScenario> {
    let scenario = |state, alphas: Vec<[f64; 2]>| {
        QuantumScenario::new(alphas.len(), d, state, alphas, FOURIER_SIGN)
            .expect("built-in scenario is valid")
    };
    let g = optimal_cglmp_gamma();
    match (m, d) {
        (2, 2) => Some(scenario(StateSpec::Ghz, vec![[0.0, 0.5], [-0.25, 0.25]])),
        (3, 2) => Some(scenario(
            StateSpec::Ghz,
            vec![[0.0, 0.5], [-0.25, 0.25], [-0.5, 0.0]],
        )),
        (2, 3) => Some(scenario(
            StateSpec::Gamma { gamma: g },
            vec![[0.0, -0.5], [0.25, -0.25]],
        )),
        (3, 3) => Some(scenario(
            StateSpec::Gamma { gamma: g },
            vec![[0.0, -0.5], [0.25, -0.25], [0.5, 0.0]],
        )),
        (4, 3) => Some(scenario(
            StateSpec::Gamma { gamma: g },
            vec![[0.0, -0.5], [0.25, -0.25], [0.5, 0.0], [0.5, 0.0]],
        )),
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// optimizer
// ---------------------------------------------------------------------------

/// Family searched by the optimizer: GHZ (phases free) or the gamma state
/// (phases and gamma free, d = 3).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateFamily {
    Ghz,
    Gamma,
}

#[derive(Clone, Copy, Debug)]
pub struct OptimizeOptions {
    pub restarts: usize,
    /// coarse samples per coordinate before the golden-section refinement
    pub coarse_points: usize,
    /// stop when a full coordinate cycle improves by less than this
    pub tol: f64,
    pub max_cycles: usize,
    pub gamma_range: (f64, f64),
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            restarts: 10,
            coarse_points: 24,
            tol: 1e-10,
            max_cycles: 80,
            gamma_range: (0.05, 4.0),
        }
    }
}

struct Objective<'a> {
    e: &'a BellExpression,
    family: StateFamily,
    m: usize,
    d: usize,
}

impl Objective<'_> {
    fn n_params(&self) -> usize {
        2 * self.m + usize::from(self.family == StateFamily::Gamma)
    }

    fn scenario(&self, params: &[f64]) -> Result<QuantumScenario> {
        let alphas: Vec<[f64; 2]> = (0..self.m)
            .map(|j| [params[2 * j], params[2 * j + 1]])
            .collect();
        let state = match self.family {
            StateFamily::Ghz => StateSpec::Ghz,
            StateFamily::Gamma => StateSpec::Gamma {
                gamma: params[2 * self.m],
            },
        };
        QuantumScenario::new(self.m, self.d, state, alphas, FOURIER_SIGN)
    }

    /// Signed violation margin; the quantity being maximized.
    fn value(&self, params: &[f64]) -> f64 {
        let Ok(s) = self.scenario(params) else {
            return f64::NEG_INFINITY;
        };
        let Ok(b) = scenario_behavior(&s) else {
            return f64::NEG_INFINITY;
        };
        behaviors::violation(self.e, &b).unwrap_or(f64::NEG_INFINITY)
    }
}

fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

fn line_max(
    obj: &Objective<'_>,
    params: &mut [f64],
    i: usize,
    opts: &OptimizeOptions,
) -> f64 {
    let is_gamma = obj.family == StateFamily::Gamma && i == 2 * obj.m;
    let (lo, hi) = if is_gamma {
        opts.gamma_range
    } else {
        // phases are periodic with period d
        let half = obj.d as f64 / 2.0;
        (params[i] - half, params[i] + half)
    };
    let probe = |x: f64| {
        let mut p = params.to_vec();
        p[i] = x;
        obj.value(&p)
    };
    let n = opts.coarse_points.max(4);
    let step = (hi - lo) / n as f64;
    let mut best_x = params[i];
    let mut best_v = probe(best_x);
    for k in 0..=n {
        let x = lo + step * k as f64;
        let v = probe(x);
        if v > best_v {
            best_v = v;
            best_x = x;
        }
    }
    let (x, v) = golden_max(probe, best_x - step, best_x + step, 48);
    if v > best_v {
        best_x = x;
        best_v = v;
    }
    params[i] = best_x;
    best_v
}

fn descend(obj: &Objective<'_>, mut params: Vec<f64>, opts: &OptimizeOptions) -> (Vec<f64>, f64) {
    let mut best = obj.value(&params);
    for _ in 0..opts.max_cycles {
        let before = best;
        for i in 0..params.len() {
            let v = line_max(obj, &mut params, i, opts);
            if v > best {
                best = v;
            }
        }
        if best - before < opts.tol {
            break;
        }
    }
    (params, best)
}

/// Multi-start coordinate descent over the 2m phases (and gamma when free),
/// maximizing the violation of `e`. Deterministic given the seed; restarts
/// are independent and the result is their best, so the achieved value is
/// non-decreasing in the restart count. Returns the scenario and the
/// achieved expression value.
pub fn optimize_scenario(
    e: &BellExpression,
    family: StateFamily,
    seed: u64,
) -> Result<(QuantumScenario, f64)> {
    optimize_scenario_with(e, family, seed, &OptimizeOptions::default())
}

pub fn optimize_scenario_with(
    e: &BellExpression,
    family: StateFamily,
    seed: u64,
    opts: &OptimizeOptions,
) -> Result<(QuantumScenario, f64)> {
    use rand::Rng;
    use rand::SeedableRng;
    use rayon::prelude::*;

    if family == StateFamily::Gamma && e.d() != 3 {
        return Err(Error::invalid("the gamma family requires d = 3"));
    }
    if e.m() < 2 {
        return Err(Error::invalid("scenario optimization requires m >= 2"));
    }
    let obj = Objective {
        e,
        family,
        m: e.m(),
        d: e.d(),
    };
    let mut master = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let starts: Vec<Vec<f64>> = (0..opts.restarts.max(1))
        .map(|_| {
            let mut p: Vec<f64> = (0..2 * obj.m)
                .map(|_| master.gen_range(-(obj.d as f64) / 2.0..obj.d as f64 / 2.0))
                .collect();
            if family == StateFamily::Gamma {
                p.push(master.gen_range(0.2..2.0));
            }
            p
        })
        .collect();
    debug_assert!(starts.iter().all(|p| p.len() == obj.n_params()));

    let results: Vec<(Vec<f64>, f64)> = starts
        .into_par_iter()
        .map(|p| descend(&obj, p, opts))
        .collect();
    let (best_params, _) = results
        .into_iter()
        .reduce(|a, b| if b.1 > a.1 { b } else { a })
        .expect("at least one restart");
    let scenario = obj.scenario(&best_params)?;
    let value = quantum_value(e, &scenario)?;
    Ok((scenario, value))
}
