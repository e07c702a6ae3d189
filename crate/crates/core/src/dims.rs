//! Binarized predictor classes and exhaustive VC / graph dimension search.
//!
//! Behaviors are restricted to the searched domain and packed into `u64`
//! bitmasks, so domains are capped well below 64 points by
//! [`DimensionLimits`]. Searches go by increasing subset size and stop at the
//! first size with no shattered subset, since subsets of shattered sets are
//! shattered.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DomainPoint, Predictor, PredictorClass};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionLimits {
    /// Largest domain (or pair domain) for VC dimension.
    pub max_vc_domain: usize,
    /// Largest domain for graph dimension.
    pub max_graph_domain: usize,
    /// Largest value set for graph dimension.
    pub max_values: usize,
}

impl Default for DimensionLimits {
    fn default() -> Self {
        DimensionLimits {
            max_vc_domain: 20,
            max_graph_domain: 12,
            max_values: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Raw,
    Binarized { predictor: String, value: f64 },
}

/// A 0/1 hypothesis over the whole domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinaryHypothesis {
    table: Vec<bool>,
    provenance: Provenance,
}

impl BinaryHypothesis {
    pub fn raw(table: Vec<bool>) -> Self {
        BinaryHypothesis {
            table,
            provenance: Provenance::Raw,
        }
    }

    pub fn table(&self) -> &[bool] {
        &self.table
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    #[inline]
    pub fn eval(&self, x: DomainPoint) -> bool {
        self.table[x.index()]
    }
}

/// `x ↦ [h(x) = v]`.
pub fn binarize(h: &Predictor, v: f64) -> BinaryHypothesis {
    BinaryHypothesis {
        table: h.table().iter().map(|&p| p == v).collect(),
        provenance: Provenance::Binarized {
            predictor: h.name().to_string(),
            value: v,
        },
    }
}

/// The binarized class at `v`, as a set: hypotheses with equal tables are
/// kept once, first occurrence wins.
pub fn binarize_class(class: &PredictorClass, v: f64) -> Vec<BinaryHypothesis> {
    let mut out: Vec<BinaryHypothesis> = Vec::new();
    for h in class.iter() {
        let b = binarize(h, v);
        if !out.iter().any(|o| o.table == b.table) {
            out.push(b);
        }
    }
    out
}

/// `(x, y) ↦ [h_v(x) = 1 ∧ y = 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairFunction {
    source: BinaryHypothesis,
}

impl PairFunction {
    pub fn new(source: BinaryHypothesis) -> Self {
        PairFunction { source }
    }

    pub fn source(&self) -> &BinaryHypothesis {
        &self.source
    }

    #[inline]
    pub fn eval(&self, x: DomainPoint, y: u8) -> bool {
        y == 1 && self.source.eval(x)
    }
}

pub fn true_positive_class(class: &[BinaryHypothesis]) -> Vec<PairFunction> {
    class.iter().cloned().map(PairFunction::new).collect()
}

fn check_limit(what: &'static str, size: usize, limit: usize) -> Result<()> {
    if size > limit || size >= 64 {
        Err(Error::LimitExceeded {
            what,
            size,
            limit: limit.min(63),
        })
    } else {
        Ok(())
    }
}

/// Calls `f` on every `k`-subset of `0..n` (as a bitmask) until it returns true.
fn any_subset_of_size(n: usize, k: usize, mut f: impl FnMut(u64) -> bool) -> bool {
    if k == 0 {
        return f(0);
    }
    if k > n {
        return false;
    }
    let mut s: u64 = (1u64 << k) - 1;
    let limit = 1u64 << n;
    while s < limit {
        if f(s) {
            return true;
        }
        // Gosper's hack: next integer with the same popcount.
        let c = s & s.wrapping_neg();
        let r = s + c;
        s = (((r ^ s) >> 2) / c) | r;
    }
    false
}

fn shatters(behaviors: &[u64], subset: u64, scratch: &mut Vec<u64>) -> bool {
    scratch.clear();
    scratch.extend(behaviors.iter().map(|b| b & subset));
    scratch.sort_unstable();
    scratch.dedup();
    scratch.len() == 1usize << subset.count_ones()
}

/// VC dimension of a set of behaviors over `n` points.
pub(crate) fn vc_dimension_of_masks(behaviors: &[u64], n: usize) -> usize {
    let mut distinct = behaviors.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let mut scratch = Vec::with_capacity(distinct.len());
    let mut best = 0;
    for k in 1..=n {
        if (1usize << k) > distinct.len() {
            break;
        }
        if !any_subset_of_size(n, k, |s| shatters(&distinct, s, &mut scratch)) {
            break;
        }
        best = k;
    }
    best
}

fn mask_of(bits: impl Iterator<Item = bool>) -> u64 {
    bits.enumerate()
        .fold(0, |acc, (i, b)| acc | ((b as u64) << i))
}

/// Exact VC dimension of `class` restricted to `domain`.
pub fn vc_dimension(
    class: &[BinaryHypothesis],
    domain: &[DomainPoint],
    limits: &DimensionLimits,
) -> Result<usize> {
    if class.is_empty() {
        return Err(Error::InvalidModel("hypothesis class is empty".into()));
    }
    check_limit("domain", domain.len(), limits.max_vc_domain)?;
    let masks: Vec<u64> = class
        .iter()
        .map(|h| mask_of(domain.iter().map(|&x| h.eval(x))))
        .collect();
    Ok(vc_dimension_of_masks(&masks, domain.len()))
}

/// Every `(x, y)` with `x ∈ domain`, `y ∈ {0, 1}`.
pub fn pair_domain(domain: &[DomainPoint]) -> Vec<(DomainPoint, u8)> {
    domain.iter().flat_map(|&x| [(x, 0), (x, 1)]).collect()
}

/// Exact VC dimension of a true-positive class over a pair domain.
pub fn vc_dimension_pairs(
    class: &[PairFunction],
    pairs: &[(DomainPoint, u8)],
    limits: &DimensionLimits,
) -> Result<usize> {
    if class.is_empty() {
        return Err(Error::InvalidModel("hypothesis class is empty".into()));
    }
    check_limit("pair domain", pairs.len(), limits.max_vc_domain)?;
    let masks: Vec<u64> = class
        .iter()
        .map(|f| mask_of(pairs.iter().map(|&(x, y)| f.eval(x, y))))
        .collect();
    Ok(vc_dimension_of_masks(&masks, pairs.len()))
}

/// Predictions on `domain` as indices into `values`, one row per distinct behavior.
fn value_rows(
    class: &PredictorClass,
    domain: &[DomainPoint],
    values: &[f64],
) -> Result<Vec<Vec<u8>>> {
    let mut rows = Vec::with_capacity(class.len());
    for h in class.iter() {
        let row = domain
            .iter()
            .map(|&x| {
                let v = h.predict(x);
                values
                    .iter()
                    .position(|&y| y == v)
                    .map(|i| i as u8)
                    .ok_or_else(|| {
                        Error::InvalidModel(format!(
                            "predictor `{}` outputs {v}, not in the value set",
                            h.name()
                        ))
                    })
            })
            .collect::<Result<Vec<u8>>>()?;
        rows.push(row);
    }
    rows.sort_unstable();
    rows.dedup();
    Ok(rows)
}

fn g_shatters(
    rows: &[Vec<u8>],
    positions: &[usize],
    realized: &[Vec<u8>],
    seen: &mut Vec<bool>,
) -> bool {
    let k = positions.len();
    let target = 1usize << k;
    // Odometer over witness functions f: positions -> realized values.
    let mut digits = vec![0usize; k];
    loop {
        seen.clear();
        seen.resize(target, false);
        let mut covered = 0;
        for row in rows {
            let mut agree = 0usize;
            for (j, &p) in positions.iter().enumerate() {
                if row[p] == realized[p][digits[j]] {
                    agree |= 1 << j;
                }
            }
            if !seen[agree] {
                seen[agree] = true;
                covered += 1;
                if covered == target {
                    return true;
                }
            }
        }
        let mut j = 0;
        loop {
            if j == k {
                return false;
            }
            digits[j] += 1;
            if digits[j] < realized[positions[j]].len() {
                break;
            }
            digits[j] = 0;
            j += 1;
        }
    }
}

/// Exact graph dimension of `class` restricted to `domain`, predictions in `values`.
///
/// Witness values at each point range only over the values some predictor
/// realizes there: any other value leaves the full agreement set unrealized.
pub fn graph_dimension(
    class: &PredictorClass,
    domain: &[DomainPoint],
    values: &[f64],
    limits: &DimensionLimits,
) -> Result<usize> {
    check_limit("domain", domain.len(), limits.max_graph_domain)?;
    check_limit("value set", values.len(), limits.max_values)?;
    let rows = value_rows(class, domain, values)?;
    let n = domain.len();
    let realized: Vec<Vec<u8>> = (0..n)
        .map(|p| {
            let mut vs: Vec<u8> = rows.iter().map(|r| r[p]).collect();
            vs.sort_unstable();
            vs.dedup();
            vs
        })
        .collect();
    let mut seen = Vec::new();
    let mut positions = Vec::with_capacity(n);
    let mut best = 0;
    for k in 1..=n {
        if (1usize << k) > rows.len() {
            break;
        }
        let found = any_subset_of_size(n, k, |s| {
            positions.clear();
            positions.extend((0..n).filter(|&i| s >> i & 1 == 1));
            g_shatters(&rows, &positions, &realized, &mut seen)
        });
        if !found {
            break;
        }
        best = k;
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueDimension {
    pub value: f64,
    pub vc_dimension: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaGraphReport {
    pub graph_dimension: usize,
    pub per_value: Vec<ValueDimension>,
    /// `VCdim(H_v) ≤ d_G(H)` for every `v`.
    pub holds: bool,
}

/// Computes `d_G(H)` and `VCdim(H_v)` for every value and checks the latter
/// never exceeds the former.
pub fn check_lemma_graph(
    class: &PredictorClass,
    domain: &[DomainPoint],
    values: &[f64],
    limits: &DimensionLimits,
) -> Result<LemmaGraphReport> {
    let graph_dimension = graph_dimension(class, domain, values, limits)?;
    let per_value = values
        .iter()
        .map(|&v| {
            vc_dimension(&binarize_class(class, v), domain, limits).map(|d| ValueDimension {
                value: v,
                vc_dimension: d,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let holds = per_value
        .iter()
        .all(|pv| pv.vc_dimension <= graph_dimension);
    Ok(LemmaGraphReport {
        graph_dimension,
        per_value,
        holds,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaPhiReport {
    pub vc_binary: usize,
    pub vc_true_positive: usize,
    /// `VCdim(Φ) ≤ VCdim(H_v)`.
    pub holds: bool,
}

/// Compares the VC dimension of a binary class with that of its
/// true-positive class over `domain × {0, 1}`.
pub fn check_lemma_phi(
    class: &[BinaryHypothesis],
    domain: &[DomainPoint],
    limits: &DimensionLimits,
) -> Result<LemmaPhiReport> {
    let vc_binary = vc_dimension(class, domain, limits)?;
    let vc_true_positive =
        vc_dimension_pairs(&true_positive_class(class), &pair_domain(domain), limits)?;
    Ok(LemmaPhiReport {
        vc_binary,
        vc_true_positive,
        holds: vc_true_positive <= vc_binary,
    })
}
