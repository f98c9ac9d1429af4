//! Exact affine-rank computation over vertex sets and facet verification of
//! the inequalities on the bipartition polytope.
//!
//! All rank arithmetic is exact: fraction-free integer elimination with gcd
//! normalization (vertices are 0/1 vectors, so entries stay small), checked
//! i128 intermediates, and no floating-point thresholds anywhere.

use std::path::{Path, PathBuf};

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::behaviors::{
    deterministic_value, enumerate_bipartition_vertices, BipartitionVertex, EnumerationCaps,
    GroupStrategy, Partition,
};
use crate::bell_expr::{BellExpression, Direction};
use crate::error::{Error, Result};

/// Environment variable overriding the polytope-dimension cache directory.
pub const CACHE_DIR_ENV: &str = "SVETLICHNY_CACHE_DIR";

// ---------------------------------------------------------------------------
// exact affine rank
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
struct Row<T> {
    pivot: usize,
    entries: Vec<T>,
}

/// Echelon storage: machine integers with checked arithmetic while entries
/// stay small, promoted to arbitrary precision the first time a reduction
/// would overflow. Structured (lexicographic) vertex streams never promote;
/// randomly ordered streams can.
#[derive(Clone, Debug)]
enum Echelon {
    Small(Vec<Row<i64>>),
    Big(Vec<Row<num_bigint::BigInt>>),
}

impl Default for Echelon {
    fn default() -> Self {
        Echelon::Small(Vec::new())
    }
}

/// Incremental affine basis of a streamed point set: an anchor vertex plus
/// difference vectors held in reduced integer echelon form. All arithmetic
/// is exact.
#[derive(Clone, Debug, Default)]
pub struct AffineBasis {
    anchor: Option<Vec<i64>>,
    rows: Echelon,
}

fn checked_axpy(target: &[i64], p: i64, q: i64, row: &[i64]) -> Result<Vec<i64>> {
    // p * target - q * row, exactly
    target
        .iter()
        .zip(row)
        .map(|(&t, &r)| {
            let a = (p as i128).checked_mul(t as i128).ok_or(Error::Overflow)?;
            let b = (q as i128).checked_mul(r as i128).ok_or(Error::Overflow)?;
            let v = a.checked_sub(b).ok_or(Error::Overflow)?;
            i64::try_from(v).map_err(|_| Error::Overflow)
        })
        .collect()
}

fn normalize_small(row: &mut [i64]) {
    let mut g: i64 = 0;
    for &v in row.iter() {
        g = g.gcd(&v);
        if g == 1 {
            break;
        }
    }
    if g > 1 {
        for v in row.iter_mut() {
            *v /= g;
        }
    }
    if let Some(&lead) = row.iter().find(|&&v| v != 0) {
        if lead < 0 {
            for v in row.iter_mut() {
                *v = -*v;
            }
        }
    }
}

fn big_axpy(
    target: &[num_bigint::BigInt],
    p: &num_bigint::BigInt,
    q: &num_bigint::BigInt,
    row: &[num_bigint::BigInt],
) -> Vec<num_bigint::BigInt> {
    target
        .iter()
        .zip(row)
        .map(|(t, r)| p * t - q * r)
        .collect()
}

fn normalize_big(row: &mut [num_bigint::BigInt]) {
    use num_traits::{Signed, Zero};
    let mut g = num_bigint::BigInt::zero();
    for v in row.iter() {
        g = g.gcd(v);
        if g == num_bigint::BigInt::from(1) {
            break;
        }
    }
    if g > num_bigint::BigInt::from(1) {
        for v in row.iter_mut() {
            *v = &*v / &g;
        }
    }
    if let Some(lead) = row.iter().find(|v| !v.is_zero()) {
        if lead.is_negative() {
            for v in row.iter_mut() {
                *v = -&*v;
            }
        }
    }
}

/// Reduces `diff` against small rows and, if independent, commits the new row
/// with back-reduction. Fails without mutating anything if i64 overflows.
fn insert_small(rows: &mut Vec<Row<i64>>, diff: &[i64]) -> Result<bool> {
    let mut diff = diff.to_vec();
    for row in rows.iter() {
        let q = diff[row.pivot];
        if q != 0 {
            let p = row.entries[row.pivot];
            diff = checked_axpy(&diff, p, q, &row.entries)?;
            // keep entries small: pivot products otherwise accumulate
            // multiplicatively across row touches
            normalize_small(&mut diff);
        }
    }
    let Some(pivot) = diff.iter().position(|&v| v != 0) else {
        return Ok(false);
    };
    normalize_small(&mut diff);
    // back-reduce existing rows; stage the results so an overflow midway
    // leaves the basis untouched
    let mut staged: Vec<Option<Vec<i64>>> = Vec::with_capacity(rows.len());
    for row in rows.iter() {
        let q = row.entries[pivot];
        if q != 0 {
            let p = diff[pivot];
            let mut reduced = checked_axpy(&row.entries, p, q, &diff)?;
            normalize_small(&mut reduced);
            staged.push(Some(reduced));
        } else {
            staged.push(None);
        }
    }
    for (row, replacement) in rows.iter_mut().zip(staged) {
        if let Some(entries) = replacement {
            row.entries = entries;
        }
    }
    let at = rows.partition_point(|r| r.pivot < pivot);
    rows.insert(at, Row { pivot, entries: diff });
    Ok(true)
}

fn insert_big(rows: &mut Vec<Row<num_bigint::BigInt>>, diff: &[i64]) -> bool {
    use num_traits::Zero;
    let mut diff: Vec<num_bigint::BigInt> =
        diff.iter().map(|&v| num_bigint::BigInt::from(v)).collect();
    for row in rows.iter() {
        if !diff[row.pivot].is_zero() {
            let p = row.entries[row.pivot].clone();
            let q = diff[row.pivot].clone();
            diff = big_axpy(&diff, &p, &q, &row.entries);
            normalize_big(&mut diff);
        }
    }
    let Some(pivot) = diff.iter().position(|v| !v.is_zero()) else {
        return false;
    };
    normalize_big(&mut diff);
    for row in rows.iter_mut() {
        if !row.entries[pivot].is_zero() {
            let p = diff[pivot].clone();
            let q = row.entries[pivot].clone();
            row.entries = big_axpy(&row.entries, &p, &q, &diff);
            normalize_big(&mut row.entries);
        }
    }
    let at = rows.partition_point(|r| r.pivot < pivot);
    rows.insert(at, Row { pivot, entries: diff });
    true
}

impl AffineBasis {
    pub fn new() -> AffineBasis {
        AffineBasis::default()
    }

    pub fn rank(&self) -> usize {
        match &self.rows {
            Echelon::Small(rows) => rows.len(),
            Echelon::Big(rows) => rows.len(),
        }
    }

    pub fn anchor(&self) -> Option<&[i64]> {
        self.anchor.as_deref()
    }

    fn promote(&mut self) {
        if let Echelon::Small(rows) = &self.rows {
            let big = rows
                .iter()
                .map(|r| Row {
                    pivot: r.pivot,
                    entries: r.entries.iter().map(|&v| num_bigint::BigInt::from(v)).collect(),
                })
                .collect();
            self.rows = Echelon::Big(big);
        }
    }

    /// Inserts a point; returns whether the affine rank increased.
    pub fn insert(&mut self, point: &[i64]) -> Result<bool> {
        let anchor = match &self.anchor {
            None => {
                self.anchor = Some(point.to_vec());
                return Ok(false);
            }
            Some(a) => a,
        };
        if point.len() != anchor.len() {
            return Err(Error::invalid(format!(
                "vector length {} does not match anchor length {}",
                point.len(),
                anchor.len()
            )));
        }
        let diff: Option<Vec<i64>> = point
            .iter()
            .zip(anchor)
            .map(|(p, a)| p.checked_sub(*a))
            .collect();
        let diff = diff.ok_or(Error::Overflow)?;
        match &mut self.rows {
            Echelon::Small(rows) => match insert_small(rows, &diff) {
                Ok(grew) => Ok(grew),
                Err(Error::Overflow) => {
                    self.promote();
                    let Echelon::Big(rows) = &mut self.rows else {
                        unreachable!()
                    };
                    Ok(insert_big(rows, &diff))
                }
                Err(e) => Err(e),
            },
            Echelon::Big(rows) => Ok(insert_big(rows, &diff)),
        }
    }
}

/// Affine rank (dimension of the affine hull) of a streamed vector set,
/// stopping early once the rank reaches `cap`.
pub fn affine_rank<I>(vectors: I, cap: usize) -> Result<AffineBasis>
where
    I: IntoIterator<Item = Vec<i64>>,
{
    let mut basis = AffineBasis::new();
    for v in vectors {
        basis.insert(&v)?;
        if basis.rank() >= cap {
            break;
        }
    }
    Ok(basis)
}

// ---------------------------------------------------------------------------
// polytope dimension
// ---------------------------------------------------------------------------

/// Options for the polytope computations: enumeration caps and the on-disk
/// location of the dimension cache.
#[derive(Clone, Debug)]
pub struct PolytopeOptions {
    pub caps: EnumerationCaps,
    pub cache_dir: Option<PathBuf>,
}

impl Default for PolytopeOptions {
    fn default() -> Self {
        PolytopeOptions {
            caps: EnumerationCaps::default(),
            cache_dir: default_cache_dir(),
        }
    }
}

impl PolytopeOptions {
    pub fn no_cache() -> PolytopeOptions {
        PolytopeOptions {
            caps: EnumerationCaps::default(),
            cache_dir: None,
        }
    }
}

/// `$SVETLICHNY_CACHE_DIR`, or a directory under the system temp dir.
pub fn default_cache_dir() -> Option<PathBuf> {
    match std::env::var_os(CACHE_DIR_ENV) {
        Some(dir) => Some(PathBuf::from(dir)),
        None => Some(std::env::temp_dir().join("svetlichny-dim-cache")),
    }
}

#[derive(Serialize, Deserialize)]
struct DimCacheEntry {
    m: usize,
    d: usize,
    dim: usize,
}

fn cache_path(dir: &Path, m: usize, d: usize) -> PathBuf {
    dir.join(format!("polytope_dim_m{m}_d{d}.json"))
}

fn read_cached_dim(dir: &Path, m: usize, d: usize) -> Option<usize> {
    let text = std::fs::read_to_string(cache_path(dir, m, d)).ok()?;
    let entry: DimCacheEntry = serde_json::from_str(&text).ok()?;
    (entry.m == m && entry.d == d).then_some(entry.dim)
}

fn write_cached_dim(dir: &Path, m: usize, d: usize, dim: usize) {
    // cache write failures only cost recomputation later
    if std::fs::create_dir_all(dir).is_ok() {
        let entry = DimCacheEntry { m, d, dim };
        let _ = std::fs::write(
            cache_path(dir, m, d),
            serde_json::to_string(&entry).expect("serializable"),
        );
    }
}

/// Ambient dimension of the normalized probability set, 2^m (d^m - 1).
pub fn ambient_dimension(m: usize, d: usize) -> usize {
    (1usize << m) * (d.pow(m as u32) - 1)
}

/// Streams the union, over all proper bipartitions, of the vertex behaviors
/// as 0/1 vectors in the fixed layout.
fn union_vertex_vectors(
    m: usize,
    d: usize,
    caps: &EnumerationCaps,
) -> Result<impl Iterator<Item = Vec<i64>>> {
    let partitions = Partition::enumerate(m);
    let mut streams = Vec::with_capacity(partitions.len());
    for p in &partitions {
        streams.push(enumerate_bipartition_vertices(d, p, caps)?);
    }
    Ok(streams.into_iter().flatten().map(|v| v.indicator_vector()))
}

/// Exact affine rank of the union over all bipartitions of the vertex
/// behaviors; cached on disk keyed by (m, d).
pub fn polytope_dimension(m: usize, d: usize, opts: &PolytopeOptions) -> Result<usize> {
    if m < 2 {
        return Err(Error::invalid("polytope dimension requires m >= 2"));
    }
    if let Some(dir) = &opts.cache_dir {
        if let Some(dim) = read_cached_dim(dir, m, d) {
            return Ok(dim);
        }
    }
    let basis = affine_rank(union_vertex_vectors(m, d, &opts.caps)?, ambient_dimension(m, d))?;
    let dim = basis.rank();
    if let Some(dir) = &opts.cache_dir {
        write_cached_dim(dir, m, d, dim);
    }
    Ok(dim)
}

// ---------------------------------------------------------------------------
// facet verification
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FacetMode {
    Exhaustive,
    Sampled,
}

/// Outcome of a facet check: the polytope dimension, the affine rank of the
/// bound-saturating vertices, and the verdict.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FacetReport {
    pub polytope_dim: usize,
    pub saturating_rank: usize,
    pub is_facet: bool,
    pub vertices_scanned: u64,
    pub saturating_count: u64,
    pub mode: FacetMode,
}

/// Verifies whether the expression's bound supports a facet of the
/// bipartition polytope: streams vertices, collects those attaining the bound
/// exactly, and compares their affine rank with polytope_dimension - 1.
/// Stops early once the facet rank target is reached. A vertex beating the
/// declared bound is an inconsistency error.
pub fn facet_check(e: &BellExpression, opts: &PolytopeOptions) -> Result<FacetReport> {
    let (m, d) = (e.m(), e.d());
    let dim = polytope_dimension(m, d, opts)?;
    let target = dim - 1;
    let tensor = e.coefficient_tensor();
    let mut basis = AffineBasis::new();
    let mut scanned = 0u64;
    let mut saturating = 0u64;
    'outer: for p in Partition::enumerate(m) {
        for v in enumerate_bipartition_vertices(d, &p, &opts.caps)? {
            scanned += 1;
            let value = deterministic_value(&tensor, &v);
            let beats = match e.direction() {
                Direction::Upper => value > e.bound(),
                Direction::Lower => value < e.bound(),
            };
            if beats {
                return Err(Error::Inconsistency(format!(
                    "vertex of partition {} attains {value}, beating the declared bound {}",
                    p.label(),
                    e.bound()
                )));
            }
            if value == e.bound() {
                saturating += 1;
                basis.insert(&v.indicator_vector())?;
                if basis.rank() >= target {
                    break 'outer;
                }
            }
        }
    }
    Ok(FacetReport {
        polytope_dim: dim,
        saturating_rank: basis.rank(),
        is_facet: basis.rank() == target,
        vertices_scanned: scanned,
        saturating_count: saturating,
        mode: FacetMode::Exhaustive,
    })
}

/// Randomized one-sided facet check for sizes where exhaustive enumeration is
/// out of reach (m = 4). Samples vertices uniformly; the reported dimension is
/// the sampled vertex rank, itself a lower-bound estimate. Confirms a facet
/// only if the saturating rank reaches that dimension minus one; it never
/// certifies "not a facet".
pub fn facet_check_sampled(
    e: &BellExpression,
    seed: u64,
    samples: u64,
    opts: &PolytopeOptions,
) -> Result<FacetReport> {
    use rand::Rng;
    use rand::SeedableRng;
    let (m, d) = (e.m(), e.d());
    let dim_hint = match &opts.cache_dir {
        Some(dir) => read_cached_dim(dir, m, d),
        None => None,
    };
    let tensor = e.coefficient_tensor();
    let partitions = Partition::enumerate(m);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut all_basis = AffineBasis::new();
    let mut sat_basis = AffineBasis::new();
    let mut scanned = 0u64;
    let mut saturating = 0u64;
    for _ in 0..samples {
        let p = &partitions[rng.gen_range(0..partitions.len())];
        let sample_side = |rng: &mut rand_chacha::ChaCha8Rng, group: &[usize]| {
            let count = crate::behaviors::group_strategy_count(group.len(), d);
            let idx = rng.gen_range(0..count);
            GroupStrategy::from_index(group.to_vec(), d, idx)
        };
        let left = sample_side(&mut rng, p.left());
        let right = sample_side(&mut rng, p.right());
        let v = BipartitionVertex::new(left, right).expect("sampled sides partition the parties");
        scanned += 1;
        let value = deterministic_value(&tensor, &v);
        let beats = match e.direction() {
            Direction::Upper => value > e.bound(),
            Direction::Lower => value < e.bound(),
        };
        if beats {
            return Err(Error::Inconsistency(format!(
                "sampled vertex attains {value}, beating the declared bound {}",
                e.bound()
            )));
        }
        let vec = v.indicator_vector();
        all_basis.insert(&vec)?;
        if value == e.bound() {
            saturating += 1;
            sat_basis.insert(&vec)?;
        }
        if let Some(dim) = dim_hint {
            if sat_basis.rank() + 1 >= dim && all_basis.rank() >= dim {
                break;
            }
        }
    }
    let dim = dim_hint.unwrap_or(all_basis.rank()).max(all_basis.rank());
    Ok(FacetReport {
        polytope_dim: dim,
        saturating_rank: sat_basis.rank(),
        is_facet: dim > 0 && sat_basis.rank() == dim - 1,
        vertices_scanned: scanned,
        saturating_count: saturating,
        mode: FacetMode::Sampled,
    })
}
