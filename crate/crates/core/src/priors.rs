//! Priors over nomination profiles and their samplers.
//!
//! Node layout of the two structured constructions:
//! * `Duplicated`: originals keep indices `0..m`, the copy of `j` is `m + j`.
//!   Copies are sinks: they receive a mirror of every realised vote and cast
//!   none themselves.
//! * `BlockCorrelated { k }`: node `0` is `a`, node `1` is `b`, block `A` is
//!   `2..2 + 4k` and block `B` is `2 + 4k..2 + 8k`.

use std::collections::HashMap;
use std::path::Path;

use rand::{Rng, RngCore};
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::PriorError;
use crate::profile::{NodeId, NominationProfile};

/// Longest subset table row accepted for the general opinion poll model.
pub const SUBSET_TABLE_ROW_CAP: usize = 1 << 15;
/// Largest edge-matrix prior that [`Prior::sample_profile`] will densely sample.
pub const EDGE_MATRIX_DENSE_CAP: usize = 1 << 14;

const ROW_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetEntry {
    pub subset: Vec<NodeId>,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Prior {
    Uniform {
        m: usize,
        p: f64,
    },
    Popularity {
        #[serde(deserialize_with = "vector_source")]
        p: Vec<f64>,
    },
    /// Independent edges with per-edge probabilities; `q[i][j]` is the
    /// probability that `i` approves `j`.
    EdgeMatrix {
        #[serde(deserialize_with = "matrix_source")]
        q: Vec<Vec<f64>>,
    },
    /// Full opinion poll model: `rows[i]` is voter `i`'s distribution over
    /// approval sets.
    SubsetTable {
        rows: Vec<Vec<SubsetEntry>>,
    },
    Duplicated {
        base: Box<Prior>,
    },
    BlockCorrelated {
        k: usize,
    },
}

#[derive(Deserialize)]
#[serde(untagged)]
enum VectorSource {
    Inline(Vec<f64>),
    Csv { csv: String },
}

#[derive(Deserialize)]
#[serde(untagged)]
enum MatrixSource {
    Inline(Vec<Vec<f64>>),
    Csv { csv: String },
}

fn read_csv_rows(path: &str) -> Result<Vec<Vec<f64>>, PriorError> {
    let err = |reason: String| PriorError::Csv {
        path: path.to_string(),
        reason,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(Path::new(path))
        .map_err(|e| err(e.to_string()))?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| err(e.to_string()))?;
        let row = record
            .iter()
            .filter(|f| !f.is_empty())
            .map(|f| f.parse::<f64>().map_err(|e| err(format!("{f:?}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        if !row.is_empty() {
            rows.push(row);
        }
    }
    Ok(rows)
}

fn vector_source<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
    match VectorSource::deserialize(d)? {
        VectorSource::Inline(v) => Ok(v),
        VectorSource::Csv { csv } => read_csv_rows(&csv)
            .map(|rows| rows.into_iter().flatten().collect())
            .map_err(serde::de::Error::custom),
    }
}

fn matrix_source<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<f64>>, D::Error> {
    match MatrixSource::deserialize(d)? {
        MatrixSource::Inline(v) => Ok(v),
        MatrixSource::Csv { csv } => read_csv_rows(&csv).map_err(serde::de::Error::custom),
    }
}

fn check_prob(value: f64, context: impl FnOnce() -> String) -> Result<(), PriorError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(PriorError::BadProbability {
            context: context(),
            value,
        })
    }
}

impl Prior {
    pub fn uniform(m: usize, p: f64) -> Result<Self, PriorError> {
        let prior = Prior::Uniform { m, p };
        prior.validate()?;
        Ok(prior)
    }

    pub fn popularity(p: Vec<f64>) -> Result<Self, PriorError> {
        let prior = Prior::Popularity { p };
        prior.validate()?;
        Ok(prior)
    }

    pub fn edge_matrix(q: Vec<Vec<f64>>) -> Result<Self, PriorError> {
        let prior = Prior::EdgeMatrix { q };
        prior.validate()?;
        Ok(prior)
    }

    pub fn subset_table(rows: Vec<Vec<SubsetEntry>>) -> Result<Self, PriorError> {
        let prior = Prior::SubsetTable { rows };
        prior.validate()?;
        Ok(prior)
    }

    pub fn block_correlated(k: usize) -> Result<Self, PriorError> {
        let prior = Prior::BlockCorrelated { k };
        prior.validate()?;
        Ok(prior)
    }

    /// The twin construction: every node `j` gets a sink copy `j'` that
    /// receives a vote from `i` exactly when `j` does.
    pub fn duplicate(base: Prior) -> Result<Self, PriorError> {
        match base {
            Prior::Uniform { .. } | Prior::Popularity { .. } | Prior::EdgeMatrix { .. } => {
                base.validate()?;
                Ok(Prior::Duplicated {
                    base: Box::new(base),
                })
            }
            _ => Err(PriorError::UnsupportedBase),
        }
    }

    pub fn validate(&self) -> Result<(), PriorError> {
        match self {
            Prior::Uniform { m, p } => {
                if *m == 0 {
                    return Err(PriorError::Empty);
                }
                check_prob(*p, || "uniform p".into())
            }
            Prior::Popularity { p } => {
                if p.is_empty() {
                    return Err(PriorError::Empty);
                }
                for (j, &pj) in p.iter().enumerate() {
                    check_prob(pj, || format!("popularity p[{j}]"))?;
                }
                Ok(())
            }
            Prior::EdgeMatrix { q } => {
                let m = q.len();
                if m == 0 {
                    return Err(PriorError::Empty);
                }
                for (i, row) in q.iter().enumerate() {
                    if row.len() != m {
                        return Err(PriorError::BadMatrix(format!(
                            "row {i} has {} entries, expected {m}",
                            row.len()
                        )));
                    }
                    if row[i] != 0.0 {
                        return Err(PriorError::BadMatrix(format!("q[{i}][{i}] = {}", row[i])));
                    }
                    for (j, &v) in row.iter().enumerate() {
                        check_prob(v, || format!("q[{i}][{j}]"))?;
                    }
                }
                Ok(())
            }
            Prior::SubsetTable { rows } => {
                let m = rows.len();
                if m == 0 {
                    return Err(PriorError::Empty);
                }
                for (i, row) in rows.iter().enumerate() {
                    if row.len() > SUBSET_TABLE_ROW_CAP {
                        return Err(PriorError::TableTooLarge {
                            entries: row.len(),
                            cap: SUBSET_TABLE_ROW_CAP,
                        });
                    }
                    let mut sum = 0.0;
                    for entry in row {
                        check_prob(entry.prob, || format!("subset table row {i}"))?;
                        sum += entry.prob;
                        let mut seen = entry.subset.clone();
                        seen.sort_unstable();
                        seen.dedup();
                        if seen.len() != entry.subset.len() {
                            return Err(PriorError::BadSubset {
                                voter: i,
                                reason: "repeated candidate".into(),
                            });
                        }
                        if let Some(bad) = entry.subset.iter().find(|j| j.0 >= m || j.0 == i) {
                            return Err(PriorError::BadSubset {
                                voter: i,
                                reason: format!("candidate {bad} is out of range or the voter"),
                            });
                        }
                    }
                    if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                        return Err(PriorError::RowSum { voter: i, sum });
                    }
                }
                Ok(())
            }
            Prior::Duplicated { base } => match base.as_ref() {
                Prior::Uniform { .. } | Prior::Popularity { .. } | Prior::EdgeMatrix { .. } => {
                    base.validate()
                }
                _ => Err(PriorError::UnsupportedBase),
            },
            Prior::BlockCorrelated { k } => {
                if *k == 0 {
                    Err(PriorError::BadBlockScale)
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Number of nodes of the profiles this prior generates.
    pub fn m(&self) -> usize {
        match self {
            Prior::Uniform { m, .. } => *m,
            Prior::Popularity { p } => p.len(),
            Prior::EdgeMatrix { q } => q.len(),
            Prior::SubsetTable { rows } => rows.len(),
            Prior::Duplicated { base } => 2 * base.m(),
            Prior::BlockCorrelated { k } => 8 * k + 2,
        }
    }

    /// Exact `E[d_j(x)]` for every node.
    pub fn expected_in_degrees(&self) -> Vec<f64> {
        match self {
            Prior::Uniform { m, p } => vec![(*m as f64 - 1.0) * p; *m],
            Prior::Popularity { p } => {
                let n = p.len() as f64 - 1.0;
                p.iter().map(|pj| n * pj).collect()
            }
            Prior::EdgeMatrix { q } => {
                let m = q.len();
                (0..m).map(|j| q.iter().map(|row| row[j]).sum()).collect()
            }
            Prior::SubsetTable { rows } => {
                let mut e = vec![0.0; rows.len()];
                for row in rows {
                    for entry in row {
                        for j in &entry.subset {
                            e[j.0] += entry.prob;
                        }
                    }
                }
                e
            }
            Prior::Duplicated { base } => {
                let mut e = base.expected_in_degrees();
                e.extend_from_within(..);
                e
            }
            Prior::BlockCorrelated { k } => {
                let mut e = vec![0.0; 8 * k + 2];
                e[0] = 2.0 * *k as f64;
                e[1] = 2.0 * *k as f64;
                e
            }
        }
    }

    /// Per-node popularity for independent-popularity priors.
    pub fn popularities(&self) -> Option<Vec<f64>> {
        match self {
            Prior::Uniform { m, p } => Some(vec![*p; *m]),
            Prior::Popularity { p } => Some(p.clone()),
            _ => None,
        }
    }

    /// Draws one profile exactly from the prior.
    pub fn sample_profile<R: RngCore + ?Sized>(
        &self,
        rng: &mut R,
    ) -> Result<NominationProfile, PriorError> {
        let mut sampler = DenseSampler::default();
        sampler.sample(self, rng)
    }

    /// Draws the in-degree vector only, with edges revealed on demand.
    pub fn sample_lazy<R: RngCore + ?Sized>(&self, rng: &mut R) -> Result<LazySample, PriorError> {
        let p = self.popularities().ok_or(PriorError::NotPopularity)?;
        let n = p.len() as u64 - 1;
        let totals = p.iter().map(|&pj| sample_binomial(rng, n, pj) as u32).collect();
        Ok(LazySample::new(totals))
    }
}

/// `Bin(n, p)` draw. At `p = 1/2` this is an exact popcount of fair bits.
pub(crate) fn sample_binomial<R: RngCore + ?Sized>(rng: &mut R, n: u64, p: f64) -> u64 {
    if p <= 0.0 || n == 0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    if p == 0.5 {
        let mut left = n;
        let mut count = 0u64;
        while left >= 64 {
            count += rng.next_u64().count_ones() as u64;
            left -= 64;
        }
        if left > 0 {
            count += (rng.next_u64() & ((1u64 << left) - 1)).count_ones() as u64;
        }
        return count;
    }
    Binomial::new(n, p).expect("validated probability").sample(rng)
}

/// Scratch buffers reused across dense samples.
#[derive(Default)]
pub(crate) struct DenseSampler {
    chosen: Vec<u64>,
    row: Vec<u64>,
}

impl DenseSampler {
    pub(crate) fn sample<R: RngCore + ?Sized>(
        &mut self,
        prior: &Prior,
        rng: &mut R,
    ) -> Result<NominationProfile, PriorError> {
        match prior {
            Prior::Uniform { m, p } => self.popularity_profile(*m, |_| *p, rng),
            Prior::Popularity { p } => self.popularity_profile(p.len(), |j| p[j], rng),
            Prior::EdgeMatrix { q } => {
                let m = q.len();
                if m > EDGE_MATRIX_DENSE_CAP {
                    return Err(PriorError::TooLargeForDense {
                        m,
                        cap: EDGE_MATRIX_DENSE_CAP,
                    });
                }
                let mut profile = NominationProfile::empty(m).map_err(|_| PriorError::Empty)?;
                for (i, row) in q.iter().enumerate() {
                    for (j, &qij) in row.iter().enumerate() {
                        if i != j && qij > 0.0 && (qij >= 1.0 || rng.random_bool(qij)) {
                            profile.insert_raw(i, j);
                        }
                    }
                }
                Ok(profile)
            }
            Prior::SubsetTable { rows } => {
                let mut profile =
                    NominationProfile::empty(rows.len()).map_err(|_| PriorError::Empty)?;
                for (i, row) in rows.iter().enumerate() {
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    // Fall back to the last positive entry when rounding leaves
                    // the cumulative sum just below u.
                    let mut pick = row.iter().rposition(|e| e.prob > 0.0);
                    for (idx, entry) in row.iter().enumerate() {
                        acc += entry.prob;
                        if u < acc {
                            pick = Some(idx);
                            break;
                        }
                    }
                    if let Some(idx) = pick {
                        for j in &row[idx].subset {
                            profile.insert_raw(i, j.0);
                        }
                    }
                }
                Ok(profile)
            }
            Prior::Duplicated { base } => {
                let original = self.sample(base, rng)?;
                let m = original.m();
                let mut profile = NominationProfile::empty(2 * m).map_err(|_| PriorError::Empty)?;
                for (i, j) in original.edges() {
                    profile.insert_raw(i, j);
                    profile.insert_raw(i, m + j);
                }
                Ok(profile)
            }
            Prior::BlockCorrelated { k } => {
                let k = *k;
                let mut profile =
                    NominationProfile::empty(8 * k + 2).map_err(|_| PriorError::Empty)?;
                if rng.random_bool(0.5) {
                    for v in 2..2 + 4 * k {
                        profile.insert_raw(v, 0);
                    }
                }
                if rng.random_bool(0.5) {
                    for v in 2 + 4 * k..2 + 8 * k {
                        profile.insert_raw(v, 1);
                    }
                }
                Ok(profile)
            }
        }
    }

    /// Binomial total per target, then a uniform voter subset of that size.
    fn popularity_profile<R: RngCore + ?Sized>(
        &mut self,
        m: usize,
        p: impl Fn(usize) -> f64,
        rng: &mut R,
    ) -> Result<NominationProfile, PriorError> {
        let mut profile = NominationProfile::empty(m).map_err(|_| PriorError::Empty)?;
        let n = m - 1;
        let words = profile.words();
        for j in 0..m {
            let d = sample_binomial(rng, n as u64, p(j)) as usize;
            if d == 0 {
                continue;
            }
            sample_subset(rng, n, d, &mut self.chosen);
            skip_position(&self.chosen, j, words, &mut self.row);
            profile.set_incoming_row(j, &self.row);
        }
        Ok(profile)
    }
}

/// Uniform `k`-subset of `0..n` as a bitset, via Floyd's algorithm on the
/// smaller of the subset and its complement. Integer draws only.
fn sample_subset<R: RngCore + ?Sized>(rng: &mut R, n: usize, k: usize, out: &mut Vec<u64>) {
    let words = n.div_ceil(64);
    out.clear();
    out.resize(words, 0);
    let complement = k > n / 2;
    let pick = if complement { n - k } else { k };
    for i in (n - pick)..n {
        let r = rng.random_range(0..=i as u32) as usize;
        let (w, b) = (r / 64, 1u64 << (r % 64));
        if out[w] & b != 0 {
            out[i / 64] |= 1u64 << (i % 64);
        } else {
            out[w] |= b;
        }
    }
    if complement {
        for w in out.iter_mut() {
            *w = !*w;
        }
        if !n.is_multiple_of(64) {
            out[words - 1] &= (1u64 << (n % 64)) - 1;
        }
    }
}

/// Maps a bitset over `0..n` (voters other than `j`, in order) onto node
/// indices `0..n+1` by inserting a zero bit at position `j`.
fn skip_position(src: &[u64], j: usize, words: usize, out: &mut Vec<u64>) {
    out.clear();
    out.resize(words, 0);
    let mut carry = 0u64;
    for w in 0..words {
        let cur = src.get(w).copied().unwrap_or(0);
        let shifted = (cur << 1) | carry;
        carry = cur >> 63;
        let lo = w * 64;
        // Bits strictly below j keep their place; the rest move up by one.
        let keep_mask = if j <= lo {
            0
        } else if j >= lo + 64 {
            u64::MAX
        } else {
            (1u64 << (j - lo)) - 1
        };
        let jbit = if j >= lo && j < lo + 64 {
            1u64 << (j - lo)
        } else {
            0
        };
        out[w] = (cur & keep_mask) | (shifted & !keep_mask & !jbit);
    }
}

/// In-degree totals of a popularity sample with individual votes drawn only
/// when somebody asks for them.
///
/// Conditioned on `totals[j]`, the voters of `j` are a uniform subset of that
/// size among the other `m - 1` nodes; revealing voters one at a time with
/// probability `remaining positives / remaining voters` reproduces exactly
/// that law.
#[derive(Debug, Clone)]
pub struct LazySample {
    totals: Vec<u32>,
    revealed: HashMap<(u32, u32), bool>,
    revealed_count: Vec<u32>,
    revealed_positive: Vec<u32>,
}

impl LazySample {
    pub fn new(totals: Vec<u32>) -> Self {
        let m = totals.len();
        assert!(
            totals.iter().all(|&t| (t as usize) < m.max(1)),
            "totals exceed m - 1"
        );
        Self {
            totals,
            revealed: HashMap::new(),
            revealed_count: vec![0; m],
            revealed_positive: vec![0; m],
        }
    }

    pub fn m(&self) -> usize {
        self.totals.len()
    }

    pub fn totals(&self) -> &[u32] {
        &self.totals
    }

    pub fn total(&self, j: usize) -> usize {
        self.totals[j] as usize
    }

    pub fn reveals(&self) -> usize {
        self.revealed.len()
    }

    /// The indicator `x_ij` (does `i` approve `j`), drawn on first request.
    pub fn reveal_edge<R: RngCore + ?Sized>(
        &mut self,
        i: NodeId,
        j: NodeId,
        rng: &mut R,
    ) -> Result<bool, PriorError> {
        let m = self.m();
        for node in [i, j] {
            if node.0 >= m {
                return Err(PriorError::NodeOutOfRange { node, m });
            }
        }
        if i == j {
            return Err(PriorError::SelfLoop(i));
        }
        let key = (i.0 as u32, j.0 as u32);
        if let Some(&x) = self.revealed.get(&key) {
            return Ok(x);
        }
        let target = j.0;
        let remaining = (m - 1) as u32 - self.revealed_count[target];
        let positives = self.totals[target] - self.revealed_positive[target];
        debug_assert!(positives <= remaining);
        let x = rng.random_range(0..remaining) < positives;
        self.revealed_count[target] += 1;
        self.revealed_positive[target] += x as u32;
        self.revealed.insert(key, x);
        Ok(x)
    }

    /// Reveals every edge and returns the full profile.
    pub fn into_profile<R: RngCore + ?Sized>(
        mut self,
        rng: &mut R,
    ) -> Result<NominationProfile, PriorError> {
        let m = self.m();
        let mut edges = Vec::new();
        for j in 0..m {
            for i in 0..m {
                if i != j && self.reveal_edge(NodeId(i), NodeId(j), rng)? {
                    edges.push((i, j));
                }
            }
        }
        NominationProfile::new(m, &edges).map_err(|_| PriorError::Empty)
    }
}
