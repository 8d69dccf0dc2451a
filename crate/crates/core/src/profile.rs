//! Nomination profiles: directed graphs without self-loops over `m` nodes.
//!
//! Each node keeps a bitset of its in-neighbours, so a degree restricted to
//! `N \ S` is the row popcount minus the members of `S` that point at the
//! node. The beats relation only ever excludes two or three nodes, which
//! makes every comparison O(1) once degrees are cached.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ProfileError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl From<usize> for NodeId {
    fn from(i: usize) -> Self {
        NodeId(i)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct NominationProfile {
    m: usize,
    words: usize,
    /// Row `j` (length `words`) holds the in-neighbours of `j`.
    incoming: Vec<u64>,
    degrees: Vec<u32>,
}

impl fmt::Debug for NominationProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NominationProfile")
            .field("m", &self.m)
            .field("edges", &self.edges())
            .finish()
    }
}

#[inline]
fn words_for(m: usize) -> usize {
    m.div_ceil(64)
}

impl NominationProfile {
    /// Builds a profile from an explicit edge list, rejecting self-loops,
    /// out-of-range endpoints and repeated edges.
    pub fn new(m: usize, edges: &[(usize, usize)]) -> Result<Self, ProfileError> {
        let mut p = Self::empty(m)?;
        for &(s, t) in edges {
            if s >= m || t >= m {
                return Err(ProfileError::EdgeOutOfRange {
                    voter: NodeId(s),
                    candidate: NodeId(t),
                    m,
                });
            }
            if s == t {
                return Err(ProfileError::SelfLoop(NodeId(s)));
            }
            if p.has_edge_raw(s, t) {
                return Err(ProfileError::DuplicateEdge {
                    voter: NodeId(s),
                    candidate: NodeId(t),
                });
            }
            p.insert_raw(s, t);
        }
        Ok(p)
    }

    pub fn empty(m: usize) -> Result<Self, ProfileError> {
        if m == 0 {
            return Err(ProfileError::NoNodes);
        }
        let words = words_for(m);
        Ok(Self {
            m,
            words,
            incoming: vec![0; m * words],
            degrees: vec![0; m],
        })
    }

    /// Profile where node `i` approves the targets encoded in `masks[i]`.
    ///
    /// Bit `b` of a mask refers to the `b`-th node of `[0, m) \ {i}` in
    /// increasing order, so every mask below `2^(m-1)` is a valid ballot.
    pub fn from_out_masks(m: usize, masks: &[u64]) -> Result<Self, ProfileError> {
        assert_eq!(masks.len(), m, "one ballot mask per node");
        let mut p = Self::empty(m)?;
        for (i, &mask) in masks.iter().enumerate() {
            p.set_out_mask(i, mask);
        }
        Ok(p)
    }

    /// Adds the ballot `mask` (see [`from_out_masks`](Self::from_out_masks))
    /// for voter `i`, which must currently cast no votes.
    pub(crate) fn set_out_mask(&mut self, i: usize, mask: u64) {
        let mut bits = mask;
        while bits != 0 {
            let b = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            let target = if b < i { b } else { b + 1 };
            debug_assert!(target < self.m);
            self.insert_raw(i, target);
        }
    }

    #[inline]
    pub(crate) fn insert_raw(&mut self, source: usize, target: usize) {
        let w = target * self.words + source / 64;
        let bit = 1u64 << (source % 64);
        debug_assert!(self.incoming[w] & bit == 0);
        self.incoming[w] |= bit;
        self.degrees[target] += 1;
    }

    #[inline]
    pub(crate) fn remove_raw(&mut self, source: usize, target: usize) {
        let w = target * self.words + source / 64;
        let bit = 1u64 << (source % 64);
        debug_assert!(self.incoming[w] & bit != 0);
        self.incoming[w] &= !bit;
        self.degrees[target] -= 1;
    }

    /// Overwrites row `target` with the given in-neighbour words.
    pub(crate) fn set_incoming_row(&mut self, target: usize, row: &[u64]) {
        debug_assert_eq!(row.len(), self.words);
        debug_assert!(row[target / 64] & (1u64 << (target % 64)) == 0);
        let dst = &mut self.incoming[target * self.words..(target + 1) * self.words];
        dst.copy_from_slice(row);
        self.degrees[target] = row.iter().map(|w| w.count_ones()).sum();
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub(crate) fn words(&self) -> usize {
        self.words
    }

    #[inline]
    pub(crate) fn incoming_row(&self, target: usize) -> &[u64] {
        &self.incoming[target * self.words..(target + 1) * self.words]
    }

    #[inline]
    fn has_edge_raw(&self, source: usize, target: usize) -> bool {
        self.incoming[target * self.words + source / 64] >> (source % 64) & 1 == 1
    }

    pub fn has_edge(&self, source: NodeId, target: NodeId) -> bool {
        source.0 < self.m && target.0 < self.m && self.has_edge_raw(source.0, target.0)
    }

    fn check(&self, node: NodeId) -> Result<(), ProfileError> {
        if node.0 < self.m {
            Ok(())
        } else {
            Err(ProfileError::NodeOutOfRange { node, m: self.m })
        }
    }

    /// Unrestricted in-degree `d_j(x)`.
    #[inline]
    pub fn degree(&self, j: NodeId) -> usize {
        self.degrees[j.0] as usize
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.degrees.iter().map(|&d| d as usize).collect()
    }

    /// In-degree of `j` counting only voters outside `exclude`.
    pub fn in_degree(&self, j: NodeId, exclude: &[NodeId]) -> Result<usize, ProfileError> {
        self.check(j)?;
        for &e in exclude {
            self.check(e)?;
        }
        let mut d = self.degrees[j.0] as usize;
        for (idx, &e) in exclude.iter().enumerate() {
            if exclude[..idx].contains(&e) {
                continue;
            }
            if e != j && self.has_edge_raw(e.0, j.0) {
                d -= 1;
            }
        }
        Ok(d)
    }

    /// Degree of `j` ignoring votes from the (distinct) nodes `a` and `b`.
    #[inline]
    fn degree_without2(&self, j: usize, a: usize, b: usize) -> usize {
        self.degrees[j] as usize
            - (a != j && self.has_edge_raw(a, j)) as usize
            - (b != j && b != a && self.has_edge_raw(b, j)) as usize
    }

    pub fn max_in_degree(&self) -> (usize, Vec<NodeId>) {
        let delta = self.max_degree();
        let argmax = (0..self.m)
            .filter(|&j| self.degrees[j] as usize == delta)
            .map(NodeId)
            .collect();
        (delta, argmax)
    }

    #[inline]
    pub fn max_degree(&self) -> usize {
        self.degrees.iter().copied().max().unwrap_or(0) as usize
    }

    /// Whether `k` beats `j` when `t` is the default node.
    pub fn beats(&self, k: NodeId, j: NodeId, t: NodeId) -> Result<bool, ProfileError> {
        self.check(k)?;
        self.check(j)?;
        self.check(t)?;
        if k == j {
            return Err(ProfileError::SameNode(k));
        }
        Ok(self.beats_unchecked(k.0, j.0, t.0))
    }

    /// Beats relation without range checks; `k != j` is required.
    ///
    /// Non-default pair: compare on `N \ {j, k, t}`. With the default as
    /// either side the exclusion set shrinks to the pair itself. Votes from
    /// `k` to itself never exist, so excluding `k` from `k`'s count is free.
    #[inline]
    pub(crate) fn beats_unchecked(&self, k: usize, j: usize, t: usize) -> bool {
        debug_assert_ne!(k, j);
        // Excluding {j, k, t} from k's in-neighbours only drops j and t.
        let dk = self.degree_without2(k, j, t);
        let dj = self.degree_without2(j, k, t);
        dk > dj
    }

    /// `Δ(x) - d_w(x)`.
    pub fn additive_gap(&self, w: NodeId) -> usize {
        self.max_degree() - self.degree(w)
    }

    pub fn out_edges(&self, i: NodeId) -> Vec<NodeId> {
        (0..self.m)
            .filter(|&j| j != i.0 && self.has_edge_raw(i.0, j))
            .map(NodeId)
            .collect()
    }

    /// All edges, sorted lexicographically by (source, target).
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.degrees.iter().map(|&d| d as usize).sum());
        for j in 0..self.m {
            let row = self.incoming_row(j);
            for (w, &word) in row.iter().enumerate() {
                let mut bits = word;
                while bits != 0 {
                    let b = bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    out.push((w * 64 + b, j));
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Copy of this profile with voter `i`'s ballot replaced by `targets`.
    pub fn with_out_edges(&self, i: NodeId, targets: &[NodeId]) -> Result<Self, ProfileError> {
        self.check(i)?;
        let mut p = self.clone();
        for j in 0..self.m {
            if j != i.0 && p.has_edge_raw(i.0, j) {
                p.remove_raw(i.0, j);
            }
        }
        for &t in targets {
            p.check(t)?;
            if t == i {
                return Err(ProfileError::SelfLoop(i));
            }
            if p.has_edge_raw(i.0, t.0) {
                return Err(ProfileError::DuplicateEdge { voter: i, candidate: t });
            }
            p.insert_raw(i.0, t.0);
        }
        Ok(p)
    }

    /// Replaces voter `i`'s ballot by `mask` in place (mask layout as in
    /// [`from_out_masks`](Self::from_out_masks)).
    pub(crate) fn replace_out_mask(&mut self, i: usize, mask: u64) {
        for j in 0..self.m {
            if j != i && self.has_edge_raw(i, j) {
                self.remove_raw(i, j);
            }
        }
        self.set_out_mask(i, mask);
    }

    /// Ballot of voter `i` in mask form.
    pub(crate) fn out_mask(&self, i: usize) -> u64 {
        let mut mask = 0u64;
        for j in 0..self.m {
            if j != i && self.has_edge_raw(i, j) {
                let b = if j < i { j } else { j - 1 };
                mask |= 1 << b;
            }
        }
        mask
    }
}

#[derive(Serialize, Deserialize)]
struct ProfileJson {
    m: usize,
    edges: Vec<[usize; 2]>,
}

impl Serialize for NominationProfile {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ProfileJson {
            m: self.m,
            edges: self.edges().into_iter().map(|(a, b)| [a, b]).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for NominationProfile {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = ProfileJson::deserialize(d)?;
        let edges: Vec<(usize, usize)> = raw.edges.iter().map(|e| (e[0], e[1])).collect();
        NominationProfile::new(raw.m, &edges).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(i: usize) -> NodeId {
        NodeId(i)
    }

    #[test]
    fn construction_and_degrees() {
        let p = NominationProfile::new(3, &[]).unwrap();
        assert_eq!(p.degrees(), vec![0, 0, 0]);
        let p = NominationProfile::new(3, &[(0, 1), (2, 1)]).unwrap();
        assert_eq!(p.degree(n(1)), 2);
    }

    #[test]
    fn construction_errors_are_distinct() {
        assert_eq!(
            NominationProfile::new(2, &[(0, 0)]),
            Err(ProfileError::SelfLoop(n(0)))
        );
        assert!(matches!(
            NominationProfile::new(2, &[(0, 2)]),
            Err(ProfileError::EdgeOutOfRange { .. })
        ));
        assert_eq!(
            NominationProfile::new(3, &[(0, 1), (0, 1)]),
            Err(ProfileError::DuplicateEdge { voter: n(0), candidate: n(1) })
        );
        assert_eq!(NominationProfile::new(0, &[]), Err(ProfileError::NoNodes));
    }

    #[test]
    fn restricted_in_degree() {
        let p = NominationProfile::new(4, &[(0, 2), (1, 2), (3, 2)]).unwrap();
        assert_eq!(p.in_degree(n(2), &[]).unwrap(), 3);
        assert_eq!(p.in_degree(n(2), &[n(3)]).unwrap(), 2);
        assert_eq!(p.in_degree(n(2), &[n(0), n(1), n(3)]).unwrap(), 0);
        assert_eq!(p.in_degree(n(2), &[n(3), n(3)]).unwrap(), 2);
        assert!(matches!(
            p.in_degree(n(4), &[]),
            Err(ProfileError::NodeOutOfRange { .. })
        ));
    }

    #[test]
    fn maximum_degree_and_ties() {
        let p = NominationProfile::empty(3).unwrap();
        assert_eq!(p.max_in_degree(), (0, vec![n(0), n(1), n(2)]));
        let p = NominationProfile::new(4, &[(0, 2), (1, 2), (3, 2)]).unwrap();
        assert_eq!(p.max_in_degree(), (3, vec![n(2)]));
        let p = NominationProfile::new(4, &[(0, 1), (2, 1), (0, 3), (2, 3)]).unwrap();
        assert_eq!(p.max_in_degree(), (2, vec![n(1), n(3)]));
    }

    #[test]
    fn beats_cases() {
        let p = NominationProfile::new(4, &[(1, 0), (2, 0), (3, 0)]).unwrap();
        assert!(p.beats(n(0), n(1), n(3)).unwrap());
        assert!(p.beats(n(0), n(3), n(3)).unwrap());
        let p = NominationProfile::new(4, &[(0, 2), (1, 2), (3, 2), (0, 1)]).unwrap();
        assert!(!p.beats(n(2), n(1), n(3)).unwrap());
        assert_eq!(p.beats(n(1), n(1), n(3)), Err(ProfileError::SameNode(n(1))));
    }

    #[test]
    fn gap() {
        let p = NominationProfile::new(3, &[(1, 0)]).unwrap();
        assert_eq!(p.additive_gap(n(0)), 0);
        assert_eq!(p.additive_gap(n(2)), 1);
        let p = NominationProfile::new(4, &[(0, 2), (1, 2), (3, 2)]).unwrap();
        assert_eq!(p.additive_gap(n(0)), 3);
    }

    #[test]
    fn json_is_canonical() {
        let p = NominationProfile::new(3, &[(2, 1), (0, 1), (1, 0)]).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"m":3,"edges":[[0,1],[1,0],[2,1]]}"#);
        let back: NominationProfile = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        assert!(serde_json::from_str::<NominationProfile>(r#"{"m":2,"edges":[[1,1]]}"#).is_err());
    }

    #[test]
    fn masks_round_trip() {
        let p = NominationProfile::from_out_masks(4, &[0b101, 0b011, 0, 0b111]).unwrap();
        // node 0 -> {1, 3}; node 1 -> {0, 2}; node 3 -> {0, 1, 2}
        assert_eq!(p.out_edges(n(0)), vec![n(1), n(3)]);
        assert_eq!(p.out_edges(n(1)), vec![n(0), n(2)]);
        assert_eq!(p.out_edges(n(3)), vec![n(0), n(1), n(2)]);
        for i in 0..4 {
            let mut q = p.clone();
            let mask = q.out_mask(i);
            q.replace_out_mask(i, mask);
            assert_eq!(q, p);
        }
        let q = p.with_out_edges(n(3), &[]).unwrap();
        assert_eq!(q.out_mask(3), 0);
        assert_eq!(q.degree(n(0)), 1);
    }
}
