//! Finitely supported vectors with dyadic coefficients.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dyadic::{Dyadic, Rounded, WireMantissa, MAX_MANTISSA_BITS};

/// A finitely supported vector `Σ x_k e_k`.
///
/// Zero coefficients are never stored. Arithmetic is exact until a mantissa
/// would exceed [`MAX_MANTISSA_BITS`]; from then on results are rounded and
/// the vector is flagged approximate.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSparse", into = "RawSparse")]
pub struct SparseVector {
    entries: BTreeMap<u64, Dyadic>,
    approximate: bool,
}

#[derive(Serialize, Deserialize)]
struct RawSparse {
    entries: Vec<(u64, WireMantissa, i64)>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    approximate: bool,
}

impl From<SparseVector> for RawSparse {
    fn from(x: SparseVector) -> Self {
        RawSparse {
            entries: x
                .entries
                .iter()
                .map(|(&k, d)| (k, d.mantissa().into(), d.exponent()))
                .collect(),
            approximate: x.approximate,
        }
    }
}

impl TryFrom<RawSparse> for SparseVector {
    type Error = String;

    fn try_from(raw: RawSparse) -> Result<Self, Self::Error> {
        let mut x = SparseVector::new();
        for (k, m, e) in raw.entries {
            if x.entries.contains_key(&k) {
                return Err(format!("index {k} listed twice"));
            }
            x.add_at(k, Dyadic::new(m.try_into()?, e));
        }
        x.approximate |= raw.approximate;
        Ok(x)
    }
}

impl SparseVector {
    pub fn new() -> Self {
        SparseVector::default()
    }

    /// The basis vector `e_k`.
    pub fn basis(k: u64) -> Self {
        let mut x = SparseVector::new();
        x.entries.insert(k, Dyadic::from_int(1));
        x
    }

    pub fn from_entries(entries: impl IntoIterator<Item = (u64, Dyadic)>) -> Self {
        let mut x = SparseVector::new();
        for (k, v) in entries {
            x.add_at(k, v);
        }
        x
    }

    pub fn get(&self, k: u64) -> Dyadic {
        self.entries.get(&k).copied().unwrap_or_default()
    }

    /// `x_k += v`, rounding if the exact sum does not fit.
    pub fn add_at(&mut self, k: u64, v: Dyadic) {
        if v.is_zero() {
            return;
        }
        let cur = self.get(k);
        let Rounded { value, exact } = cur.add_capped(&v, MAX_MANTISSA_BITS);
        self.approximate |= !exact;
        if value.is_zero() {
            self.entries.remove(&k);
        } else {
            self.entries.insert(k, value);
        }
    }

    pub fn mark_approximate(&mut self) {
        self.approximate = true;
    }

    pub fn is_approximate(&self) -> bool {
        self.approximate
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, Dyadic)> + '_ {
        self.entries.iter().map(|(&k, &v)| (k, v))
    }

    pub fn support(&self) -> impl Iterator<Item = u64> + '_ {
        self.entries.keys().copied()
    }

    pub fn max_index(&self) -> Option<u64> {
        self.entries.keys().next_back().copied()
    }

    /// Entries with index in `[lo, hi)`.
    pub fn restrict(&self, lo: u64, hi: u64) -> SparseVector {
        SparseVector {
            entries: self
                .entries
                .range(lo..hi)
                .map(|(&k, &v)| (k, v))
                .collect(),
            approximate: self.approximate,
        }
    }

    /// Every coefficient multiplied by `2^shift` (exact).
    pub fn scale_pow2(&self, shift: i64) -> SparseVector {
        SparseVector {
            entries: self
                .entries
                .iter()
                .map(|(&k, v)| (k, v.mul_pow2(shift)))
                .collect(),
            approximate: self.approximate,
        }
    }

    /// `‖x‖₁`; `exact` is false when either the vector is approximate or the
    /// sum had to be rounded.
    pub fn norm_l1(&self) -> Rounded {
        let mut mags: Vec<Dyadic> = self.entries.values().map(|v| v.abs()).collect();
        mags.sort_by_key(|d| d.exponent());
        let mut exact = !self.approximate;
        let mut acc = Dyadic::default();
        for m in mags {
            let r = acc.add_capped(&m, MAX_MANTISSA_BITS);
            exact &= r.exact;
            acc = r.value;
        }
        Rounded { value: acc, exact }
    }

    /// `x − y`.
    pub fn sub(&self, other: &SparseVector) -> SparseVector {
        let mut out = self.clone();
        out.approximate |= other.approximate;
        for (k, v) in other.iter() {
            out.add_at(k, -v);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(m: i128, e: i64) -> Dyadic {
        Dyadic::new(m, e)
    }

    #[test]
    fn zeros_are_dropped() {
        let mut x = SparseVector::basis(3);
        x.add_at(3, d(-1, 0));
        assert!(x.is_zero());
        let y = SparseVector::from_entries([(1, d(0, 0)), (2, d(3, -1))]);
        assert_eq!(y.support().collect::<Vec<_>>(), vec![2]);
    }

    #[test]
    fn exact_norm() {
        let x = SparseVector::from_entries([(0, d(1, -3)), (5, d(-3, 2)), (9, d(1, 0))]);
        let n = x.norm_l1();
        assert!(n.exact);
        assert_eq!(n.value, d(105, -3));
    }

    #[test]
    fn wide_spread_is_flagged() {
        let x = SparseVector::from_entries([(0, d(1, 0)), (1, d(1, -400))]);
        let n = x.norm_l1();
        assert!(!n.exact);
        assert_eq!(n.value, d(1, 0));
    }

    #[test]
    fn triples_round_trip() {
        let x = SparseVector::from_entries([(4, d(5, -7)), (0, d(-1, 3))]);
        let text = serde_json::to_string(&x).unwrap();
        assert_eq!(text, r#"{"entries":[[0,-1,3],[4,5,-7]]}"#);
        let back: SparseVector = serde_json::from_str(&text).unwrap();
        assert_eq!(back, x);
        assert!(serde_json::from_str::<SparseVector>(r#"{"entries":[[1,1,0],[1,3,0]]}"#).is_err());
        let wide = SparseVector::from_entries([(2, d((1 << 100) + 1, -3))]);
        let text = serde_json::to_string(&wide).unwrap();
        assert_eq!(text, r#"{"entries":[[2,"1267650600228229401496703205377",-3]]}"#);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(serde_json::from_value::<SparseVector>(v).unwrap(), wide);
    }

    #[test]
    fn restrict_partitions_norm() {
        let x = SparseVector::from_entries((0..20).map(|k| (k, d(k as i128 + 1, -(k as i64)))));
        let parts = [(0, 5), (5, 12), (12, 20)];
        let total: Dyadic = parts
            .iter()
            .map(|&(lo, hi)| x.restrict(lo, hi).norm_l1().value)
            .sum();
        assert_eq!(total, x.norm_l1().value);
    }
}
