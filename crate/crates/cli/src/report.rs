//! Report shapes and rendering. JSON is the machine interface; the table
//! view renders the same report. Field order is fixed by struct order.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use svetlichny_core::behaviors::{Behavior, BipartitionBound, GroupStrategy, LocalBound};
use svetlichny_core::bell_expr::{BellExpression, Direction};
use svetlichny_core::polytope::FacetReport;
use svetlichny_core::quantum::QuantumScenario;

/// SHA-256 over the behavior's canonical bytes (m, d, then the probability
/// tensor as little-endian f64 bits in the fixed layout).
pub fn behavior_hash(b: &Behavior<f64>) -> String {
    let mut h = Sha256::new();
    h.update((b.m() as u64).to_le_bytes());
    h.update((b.d() as u64).to_le_bytes());
    for p in b.probs() {
        h.update(p.to_bits().to_le_bytes());
    }
    let digest = h.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

fn strategy_json(s: &GroupStrategy) -> serde_json::Value {
    json!({
        "group": s.group().iter().map(|j| j + 1).collect::<Vec<_>>(),
        "map": s.map(),
    })
}

#[derive(Serialize)]
pub struct BoundReport {
    pub bound: i64,
    pub model: String,
    pub per_partition: BTreeMap<String, i64>,
    pub argmax_vertex: serde_json::Value,
}

impl BoundReport {
    pub fn local(b: &LocalBound) -> BoundReport {
        BoundReport {
            bound: b.value,
            model: "local".into(),
            per_partition: BTreeMap::new(),
            argmax_vertex: json!({ "strategy": b.argmax.outputs }),
        }
    }

    pub fn bipartition(b: &BipartitionBound) -> BoundReport {
        let per_partition = b
            .per_partition
            .iter()
            .map(|p| (p.partition.label(), p.value))
            .collect();
        let w = b.witness();
        BoundReport {
            bound: b.value,
            model: "bipartition".into(),
            per_partition,
            argmax_vertex: json!({
                "partition": w.partition.label(),
                "strategies": [strategy_json(w.argmax.left()), strategy_json(w.argmax.right())],
            }),
        }
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("model: {}\n", self.model));
        out.push_str(&format!("bound: {}\n", self.bound));
        for (label, value) in &self.per_partition {
            out.push_str(&format!("  partition {label}: {value}\n"));
        }
        out.push_str(&format!("argmax vertex: {}\n", self.argmax_vertex));
        out
    }
}

#[derive(Serialize)]
pub struct QuantumReport {
    pub m: usize,
    pub d: usize,
    pub expression: String,
    pub scenario: QuantumScenario,
    pub value: f64,
    pub bound: i64,
    pub violation: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub visibility: Option<f64>,
    pub behavior_sha256: String,
}

impl QuantumReport {
    pub fn new(
        e: &BellExpression,
        scenario: QuantumScenario,
        behavior: &Behavior<f64>,
        value: f64,
        visibility: Option<f64>,
    ) -> QuantumReport {
        let violation = match e.direction() {
            Direction::Upper => value - e.bound() as f64,
            Direction::Lower => e.bound() as f64 - value,
        };
        QuantumReport {
            m: e.m(),
            d: e.d(),
            expression: e.to_string(),
            scenario,
            value,
            bound: e.bound(),
            violation,
            visibility,
            behavior_sha256: behavior_hash(behavior),
        }
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("expression: {}\n", self.expression));
        out.push_str(&format!("value: {:.12}\n", self.value));
        out.push_str(&format!("bound: {}\n", self.bound));
        out.push_str(&format!("violation: {:.12}\n", self.violation));
        if let Some(w) = self.visibility {
            out.push_str(&format!("critical visibility: {:.12}\n", w));
        }
        out.push_str(&format!("behavior sha256: {}\n", self.behavior_sha256));
        out
    }
}

pub fn facet_table(r: &FacetReport) -> String {
    let verdict = match (r.is_facet, &r.mode) {
        (true, _) => "facet confirmed",
        (false, svetlichny_core::polytope::FacetMode::Sampled) => "not confirmed (sampled)",
        (false, _) => "not a facet",
    };
    format!(
        "polytope dimension: {}\nsaturating rank: {}\nverdict: {}\nvertices scanned: {}\nsaturating vertices: {}\n",
        r.polytope_dim, r.saturating_rank, verdict, r.vertices_scanned, r.saturating_count
    )
}

pub fn expression_table(e: &BellExpression) -> String {
    format!(
        "family: m={}, d={}, {} form\n{}\nbound model: {}\nterms: {}\n",
        e.m(),
        e.d(),
        match e.form() {
            svetlichny_core::bell_expr::Form::Correlator => "correlator",
            svetlichny_core::bell_expr::Form::Bracket => "bracket",
        },
        e,
        match e.bound_model() {
            svetlichny_core::bell_expr::BoundModel::Local => "local",
            svetlichny_core::bell_expr::BoundModel::Bipartition => "bipartition",
        },
        e.terms().len(),
    )
}
