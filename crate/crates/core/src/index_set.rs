//! Subsets of ℕ with closed-form counting.
//!
//! Every representation answers `contains`, `count_le` and ordered member
//! enumeration without materialising the set. `count_in_range` is always
//! `count_le(hi) - count_le(lo - 1)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the left endpoints `n_k` of an interval union `∪_k [n_k, n_k + k]`
/// are produced. Intervals are numbered from `k = 1`.
#[derive(Debug, Clone, PartialEq)]
enum Generator {
    /// Finitely many intervals with the listed left endpoints.
    Explicit(Vec<u64>),
    /// `n_k = offset + coeff · k^exponent` for every `k ≥ 1`.
    Polynomial { coeff: u64, exponent: u32, offset: u64 },
}

impl Generator {
    /// Left endpoint of interval `k` (`k ≥ 1`), saturating at `u64::MAX`.
    fn start(&self, k: u64) -> Option<u64> {
        match self {
            Generator::Explicit(starts) => starts.get(k as usize - 1).copied(),
            Generator::Polynomial {
                coeff,
                exponent,
                offset,
            } => {
                let p = (k as u128)
                    .checked_pow(*exponent)
                    .and_then(|p| p.checked_mul(*coeff as u128))
                    .and_then(|p| p.checked_add(*offset as u128))
                    .unwrap_or(u128::MAX);
                Some(p.min(u64::MAX as u128) as u64)
            }
        }
    }

    fn len(&self) -> Option<u64> {
        match self {
            Generator::Explicit(starts) => Some(starts.len() as u64),
            Generator::Polynomial { .. } => None,
        }
    }

    /// Largest `k` with `n_k ≤ x`, or 0 when no interval starts at or before `x`.
    fn last_start_at_or_before(&self, x: u64) -> u64 {
        match self {
            Generator::Explicit(starts) => starts.partition_point(|&s| s <= x) as u64,
            Generator::Polynomial { .. } => {
                if self.start(1).unwrap() > x {
                    return 0;
                }
                // n_k ≥ k², so k ≤ 2^32 covers the whole u64 range.
                let (mut lo, mut hi) = (1u64, 1u64 << 32);
                while lo < hi {
                    let mid = lo + (hi - lo).div_ceil(2);
                    if self.start(mid).unwrap() <= x {
                        lo = mid;
                    } else {
                        hi = mid - 1;
                    }
                }
                lo
            }
        }
    }
}

/// Number of elements in the first `m` intervals `[n_k, n_k + k]`, `k = 1..=m`.
fn full_interval_mass(m: u64) -> u64 {
    m * (m + 1) / 2 + m
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    Empty,
    All,
    Explicit(Vec<u64>),
    Periodic {
        modulus: u64,
        mask: Vec<bool>,
        residue_count: u64,
        start: u64,
        prefix: Vec<u64>,
    },
    Intervals(Generator),
    Shift { inner: Box<IndexSet>, by: u64 },
}

/// A subset `A ⊆ ℕ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SetSpec", into = "SetSpec")]
pub struct IndexSet {
    repr: Repr,
}

/// JSON description of an [`IndexSet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SetSpec {
    Empty,
    All,
    Explicit {
        members: Vec<u64>,
    },
    /// `prefix ∪ {j ≥ start : j mod modulus ∈ residues}`; prefix members must be `< start`.
    Periodic {
        modulus: u64,
        residues: Vec<u64>,
        #[serde(default)]
        start: u64,
        #[serde(default)]
        prefix: Vec<u64>,
    },
    /// `∪_{k≥1} [n_k, n_k + k]` with the listed `n_k`.
    IntervalUnion {
        starts: Vec<u64>,
    },
    /// `∪_{k≥1} [n_k, n_k + k]` with `n_k = offset + coeff · k^exponent`.
    IntervalUnionPolynomial {
        coeff: u64,
        exponent: u32,
        #[serde(default)]
        offset: u64,
    },
    /// `inner − by = {j : j + by ∈ inner}`.
    Shift {
        inner: Box<SetSpec>,
        by: u64,
    },
}

impl TryFrom<SetSpec> for IndexSet {
    type Error = Error;

    fn try_from(spec: SetSpec) -> Result<Self> {
        match spec {
            SetSpec::Empty => Ok(IndexSet::empty()),
            SetSpec::All => Ok(IndexSet::all()),
            SetSpec::Explicit { members } => Ok(IndexSet::explicit(members)),
            SetSpec::Periodic {
                modulus,
                residues,
                start,
                prefix,
            } => IndexSet::eventually_periodic(prefix, start, modulus, &residues),
            SetSpec::IntervalUnion { starts } => IndexSet::interval_union(starts),
            SetSpec::IntervalUnionPolynomial {
                coeff,
                exponent,
                offset,
            } => IndexSet::interval_union_polynomial(coeff, exponent, offset),
            SetSpec::Shift { inner, by } => Ok(IndexSet::try_from(*inner)?.shifted(by)),
        }
    }
}

impl From<IndexSet> for SetSpec {
    fn from(set: IndexSet) -> Self {
        match set.repr {
            Repr::Empty => SetSpec::Empty,
            Repr::All => SetSpec::All,
            Repr::Explicit(members) => SetSpec::Explicit { members },
            Repr::Periodic {
                modulus,
                mask,
                start,
                prefix,
                ..
            } => SetSpec::Periodic {
                modulus,
                residues: (0..modulus).filter(|&r| mask[r as usize]).collect(),
                start,
                prefix,
            },
            Repr::Intervals(Generator::Explicit(starts)) => SetSpec::IntervalUnion { starts },
            Repr::Intervals(Generator::Polynomial {
                coeff,
                exponent,
                offset,
            }) => SetSpec::IntervalUnionPolynomial {
                coeff,
                exponent,
                offset,
            },
            Repr::Shift { inner, by } => SetSpec::Shift {
                inner: Box::new((*inner).into()),
                by,
            },
        }
    }
}

impl IndexSet {
    pub fn empty() -> Self {
        IndexSet { repr: Repr::Empty }
    }

    /// ℕ itself.
    pub fn all() -> Self {
        IndexSet { repr: Repr::All }
    }

    /// A finite set; input order and duplicates do not matter.
    pub fn explicit(mut members: Vec<u64>) -> Self {
        members.sort_unstable();
        members.dedup();
        IndexSet {
            repr: Repr::Explicit(members),
        }
    }

    /// `{j : j mod modulus ∈ residues}`.
    pub fn periodic(modulus: u64, residues: &[u64]) -> Result<Self> {
        IndexSet::eventually_periodic(Vec::new(), 0, modulus, residues)
    }

    pub fn multiples_of(q: u64) -> Result<Self> {
        IndexSet::periodic(q, &[0])
    }

    pub fn evens() -> Self {
        IndexSet::periodic(2, &[0]).expect("valid residue class")
    }

    pub fn eventually_periodic(
        prefix: Vec<u64>,
        start: u64,
        modulus: u64,
        residues: &[u64],
    ) -> Result<Self> {
        if modulus == 0 {
            return Err(Error::domain("periodic set needs modulus >= 1"));
        }
        if modulus > 1 << 24 {
            return Err(Error::domain("periodic set modulus above 2^24"));
        }
        let mut mask = vec![false; modulus as usize];
        for &r in residues {
            if r >= modulus {
                return Err(Error::domain(format!(
                    "residue {r} is not below modulus {modulus}"
                )));
            }
            mask[r as usize] = true;
        }
        let mut prefix = prefix;
        prefix.sort_unstable();
        prefix.dedup();
        if let Some(&p) = prefix.last() {
            if p >= start {
                return Err(Error::domain(format!(
                    "prefix member {p} must lie below the periodic start {start}"
                )));
            }
        }
        let residue_count = mask.iter().filter(|&&b| b).count() as u64;
        Ok(IndexSet {
            repr: Repr::Periodic {
                modulus,
                mask,
                residue_count,
                start,
                prefix,
            },
        })
    }

    /// `∪_{k=1}^{K} [n_k, n_k + k]` for `starts = (n_1, …, n_K)`; requires
    /// `n_{k+1} > n_k + k`.
    pub fn interval_union(starts: Vec<u64>) -> Result<Self> {
        for (i, w) in starts.windows(2).enumerate() {
            let k = i as u64 + 1;
            if w[1] <= w[0] + k {
                return Err(Error::domain(format!(
                    "interval starts must satisfy n_(k+1) > n_k + k; fails at k = {k}"
                )));
            }
        }
        Ok(IndexSet {
            repr: Repr::Intervals(Generator::Explicit(starts)),
        })
    }

    /// Unbounded interval union with `n_k = offset + coeff · k^exponent`.
    pub fn interval_union_polynomial(coeff: u64, exponent: u32, offset: u64) -> Result<Self> {
        if coeff == 0 || exponent < 2 {
            return Err(Error::domain(
                "polynomial interval starts need coeff >= 1 and exponent >= 2",
            ));
        }
        Ok(IndexSet {
            repr: Repr::Intervals(Generator::Polynomial {
                coeff,
                exponent,
                offset,
            }),
        })
    }

    /// `A − k = {j : j + k ∈ A}`.
    pub fn shifted(&self, by: u64) -> Self {
        if by == 0 {
            return self.clone();
        }
        match &self.repr {
            Repr::Empty | Repr::All => self.clone(),
            Repr::Shift { inner, by: b } => IndexSet {
                repr: Repr::Shift {
                    inner: inner.clone(),
                    by: b + by,
                },
            },
            _ => IndexSet {
                repr: Repr::Shift {
                    inner: Box::new(self.clone()),
                    by,
                },
            },
        }
    }

    pub fn contains(&self, j: u64) -> bool {
        match &self.repr {
            Repr::Empty => false,
            Repr::All => true,
            Repr::Explicit(m) => m.binary_search(&j).is_ok(),
            Repr::Periodic {
                modulus,
                mask,
                start,
                prefix,
                ..
            } => {
                if j < *start {
                    prefix.binary_search(&j).is_ok()
                } else {
                    mask[(j % modulus) as usize]
                }
            }
            Repr::Intervals(g) => {
                let k = g.last_start_at_or_before(j);
                k > 0 && j <= g.start(k).unwrap().saturating_add(k)
            }
            Repr::Shift { inner, by } => match j.checked_add(*by) {
                Some(x) => inner.contains(x),
                None => false,
            },
        }
    }

    /// `#(A ∩ [0, x])`.
    pub fn count_le(&self, x: u64) -> u64 {
        match &self.repr {
            Repr::Empty => 0,
            Repr::All => x.saturating_add(1),
            Repr::Explicit(m) => m.partition_point(|&v| v <= x) as u64,
            Repr::Periodic {
                modulus,
                mask,
                residue_count,
                start,
                prefix,
            } => {
                let from_prefix = prefix.partition_point(|&v| v <= x) as u64;
                if x < *start {
                    return from_prefix;
                }
                let up_to = |y: u64| -> u64 {
                    let full = y / modulus;
                    let rem = (y % modulus) as usize;
                    full * residue_count + mask[..=rem].iter().filter(|&&b| b).count() as u64
                };
                let below_start = if *start == 0 { 0 } else { up_to(start - 1) };
                from_prefix + up_to(x) - below_start
            }
            Repr::Intervals(g) => {
                let k = g.last_start_at_or_before(x);
                if k == 0 {
                    return 0;
                }
                let nk = g.start(k).unwrap();
                full_interval_mass(k - 1) + (x.min(nk.saturating_add(k)) - nk + 1)
            }
            Repr::Shift { inner, by } => {
                let hi = inner.count_le(x.saturating_add(*by));
                let lo = inner.count_le(*by - 1);
                hi - lo
            }
        }
    }

    /// `#(A ∩ [lo, hi])`; zero when `lo > hi`.
    pub fn count_in_range(&self, lo: u64, hi: u64) -> u64 {
        if lo > hi {
            return 0;
        }
        let below = if lo == 0 { 0 } else { self.count_le(lo - 1) };
        self.count_le(hi) - below
    }

    /// Members of `A ∩ [lo, hi]` in increasing order.
    pub fn members(&self, lo: u64, hi: u64) -> Box<dyn Iterator<Item = u64> + '_> {
        if lo > hi {
            return Box::new(std::iter::empty());
        }
        match &self.repr {
            Repr::Empty => Box::new(std::iter::empty()),
            Repr::All => Box::new(lo..=hi),
            Repr::Explicit(m) => {
                let a = m.partition_point(|&v| v < lo);
                let b = m.partition_point(|&v| v <= hi);
                Box::new(m[a..b].iter().copied())
            }
            Repr::Periodic {
                modulus,
                mask,
                start,
                prefix,
                ..
            } => {
                let a = prefix.partition_point(|&v| v < lo);
                let b = prefix.partition_point(|&v| v <= hi);
                let head = prefix[a..b].iter().copied();
                let from = lo.max(*start);
                let q = *modulus;
                let tail = (from..=hi)
                    .take(if from > hi { 0 } else { usize::MAX })
                    .filter(move |j| mask[(j % q) as usize]);
                Box::new(head.chain(tail))
            }
            Repr::Intervals(g) => {
                let first = g.last_start_at_or_before(lo).max(1);
                let limit = g.len();
                let iter = (first..)
                    .take_while(move |&k| limit.is_none_or(|n| k <= n))
                    .map(move |k| (g.start(k).unwrap(), k))
                    .take_while(move |&(s, _)| s <= hi)
                    .flat_map(move |(s, k)| {
                        let a = s.max(lo);
                        let b = s.saturating_add(k).min(hi);
                        a..=b
                    })
                    .filter(move |&j| j >= lo);
                Box::new(iter)
            }
            Repr::Shift { inner, by } => {
                let by = *by;
                Box::new(
                    inner
                        .members(lo.saturating_add(by), hi.saturating_add(by))
                        .map(move |j| j - by),
                )
            }
        }
    }

    /// Left endpoints of an interval union, when this set is one.
    pub fn interval_starts(&self, up_to_k: u64) -> Option<Vec<u64>> {
        match &self.repr {
            Repr::Intervals(g) => {
                let n = g.len().map_or(up_to_k, |n| n.min(up_to_k));
                Some((1..=n).map(|k| g.start(k).unwrap()).collect())
            }
            _ => None,
        }
    }

    /// A finite set, or the truncation to `[0, horizon]` otherwise.
    pub fn truncated(&self, horizon: u64) -> IndexSet {
        IndexSet::explicit(self.members(0, horizon).collect())
    }

    /// The period when the set is eventually periodic.
    pub fn period(&self) -> Option<u64> {
        match &self.repr {
            Repr::Empty | Repr::All => Some(1),
            Repr::Periodic { modulus, .. } => Some(*modulus),
            Repr::Shift { inner, .. } => inner.period(),
            _ => None,
        }
    }

    /// `(start, q)` such that membership of `j ≥ start` depends only on `j mod q`.
    pub fn periodic_from(&self) -> Option<(u64, u64)> {
        match &self.repr {
            Repr::Empty | Repr::All => Some((0, 1)),
            Repr::Periodic { modulus, start, .. } => Some((*start, *modulus)),
            Repr::Shift { inner, by } => inner
                .periodic_from()
                .map(|(s, q)| (s.saturating_sub(*by), q)),
            _ => None,
        }
    }

    pub fn spec(&self) -> SetSpec {
        self.clone().into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_count(set: &IndexSet, lo: u64, hi: u64) -> u64 {
        (lo..=hi).filter(|&j| set.contains(j)).count() as u64
    }

    fn corpus() -> Vec<IndexSet> {
        vec![
            IndexSet::empty(),
            IndexSet::all(),
            IndexSet::evens(),
            IndexSet::multiples_of(3).unwrap(),
            IndexSet::periodic(5, &[0, 1, 2]).unwrap(),
            IndexSet::eventually_periodic(vec![1, 4, 6], 10, 7, &[2, 3]).unwrap(),
            IndexSet::explicit(vec![9, 3, 3, 100, 57]),
            IndexSet::interval_union(vec![5, 9, 20, 40]).unwrap(),
            IndexSet::interval_union_polynomial(1, 3, 2).unwrap(),
            IndexSet::periodic(5, &[0, 1, 2]).unwrap().shifted(3),
            IndexSet::interval_union_polynomial(2, 2, 0).unwrap().shifted(7),
        ]
    }

    #[test]
    fn count_matches_membership_loop() {
        for set in corpus() {
            for (lo, hi) in [(0, 0), (0, 200), (3, 97), (50, 49), (1000, 3000)] {
                assert_eq!(
                    set.count_in_range(lo, hi),
                    brute_count(&set, lo, hi),
                    "{set:?} on [{lo}, {hi}]"
                );
            }
        }
    }

    #[test]
    fn members_agree_with_contains() {
        for set in corpus() {
            let listed: Vec<u64> = set.members(13, 700).collect();
            let brute: Vec<u64> = (13..=700).filter(|&j| set.contains(j)).collect();
            assert_eq!(listed, brute, "{set:?}");
        }
    }

    #[test]
    fn interval_union_layout() {
        let set = IndexSet::interval_union(vec![2, 5, 9]).unwrap();
        let members: Vec<u64> = set.members(0, 100).collect();
        assert_eq!(members, vec![2, 3, 5, 6, 7, 9, 10, 11, 12]);
        assert!(IndexSet::interval_union(vec![2, 3]).is_err());
    }

    #[test]
    fn shift_is_preimage_under_translation() {
        let a = IndexSet::explicit(vec![0, 4, 9]);
        let s = a.shifted(4);
        assert_eq!(s.members(0, 20).collect::<Vec<_>>(), vec![0, 5]);
        assert_eq!(s.shifted(1).members(0, 20).collect::<Vec<_>>(), vec![4]);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(IndexSet::periodic(0, &[]).is_err());
        assert!(IndexSet::periodic(3, &[3]).is_err());
        assert!(IndexSet::eventually_periodic(vec![12], 10, 3, &[0]).is_err());
        assert!(IndexSet::interval_union_polynomial(1, 1, 0).is_err());
    }

    #[test]
    fn json_description_round_trips() {
        for set in corpus() {
            let text = serde_json::to_string(&set).unwrap();
            let back: IndexSet = serde_json::from_str(&text).unwrap();
            assert_eq!(back, set);
        }
        let parsed: IndexSet =
            serde_json::from_str(r#"{"kind":"periodic","modulus":2,"residues":[0]}"#).unwrap();
        assert_eq!(parsed, IndexSet::evens());
    }
}
