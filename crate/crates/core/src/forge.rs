//! Constructions: power weights, block-recursive weights that see Banach
//! density up to a factor `e`, sparse thick sets of zero weighted density,
//! and a backward-shift orbit supported on such a set.

use serde::{Deserialize, Serialize};

use crate::density::{banach_window_count, class_s_audit, restricted_ratios, ClassSConfig};
use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::index_set::IndexSet;
use crate::report::AuditReport;
use crate::sparse::SparseVector;
use crate::weight::WeightSequence;

/// `a_0 = 1`, `a_n = n^α`.
pub fn build_power_weight(alpha: f64) -> Result<WeightSequence> {
    WeightSequence::power(alpha)
}

/// Sets `A_n` with targets `δ_n` for [`build_block_weight`].
///
/// Block `p` is assigned to set `(p − 1) mod sets.len()`, so every set owns
/// infinitely many blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockWeightInput {
    pub sets: Vec<IndexSet>,
    pub deltas: Vec<f64>,
    /// Block starts `k_1 < k_2 < …`; chosen greedily when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_seq: Option<Vec<u64>>,
}

impl BlockWeightInput {
    pub fn new(sets: Vec<IndexSet>, deltas: Vec<f64>) -> Self {
        BlockWeightInput {
            sets,
            deltas,
            k_seq: None,
        }
    }

    /// Index of the set that block `p ≥ 1` serves.
    pub fn class_of(&self, p: u64) -> usize {
        ((p - 1) % self.sets.len() as u64) as usize
    }
}

/// `0.9 ×` the window estimate `b_N / N` of the upper Banach density. The
/// estimate is a lower bound, so the suggestion stays below the true value.
pub fn suggest_delta(set: &IndexSet, window: u64, scan_horizon: u64) -> Result<f64> {
    let b = banach_window_count(set, window, scan_horizon)?;
    Ok(0.9 * b as f64 / window as f64)
}

/// `#(A ∩ [k, k+p)) ≥ p·δ`.
fn block_is_dense(set: &IndexSet, k: u64, p: u64, delta: f64) -> bool {
    set.count_in_range(k, k + p - 1) as f64 >= p as f64 * delta
}

/// A weight built by [`build_block_weight`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockWeight {
    pub weight: WeightSequence,
    pub k_seq: Vec<u64>,
    pub horizon: u64,
    pub input: BlockWeightInput,
}

/// Along the blocks serving one set: the ratio of that set at the last index
/// of each block window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsequenceHit {
    pub p: u64,
    pub horizon: u64,
    pub ratio: f64,
}

impl BlockWeight {
    /// Ratios of `A_n` at `N = k_p + p − 1` for the blocks `p` serving `A_n`
    /// that end within the horizon.
    pub fn subsequence_hits(&self, n: usize) -> Result<Vec<SubsequenceHit>> {
        let mut ps: Vec<(u64, u64)> = Vec::new();
        for (i, &k) in self.k_seq.iter().enumerate() {
            let p = i as u64 + 1;
            let end = k + p - 1;
            if self.input.class_of(p) == n && end <= self.horizon {
                ps.push((p, end));
            }
        }
        let horizons: Vec<u64> = ps.iter().map(|&(_, h)| h).collect();
        let ratios = restricted_ratios(&self.weight, &self.input.sets[n], 0, &horizons)?;
        Ok(ps
            .into_iter()
            .zip(ratios)
            .map(|((p, horizon), ratio)| SubsequenceHit { p, horizon, ratio })
            .collect())
    }

    pub fn class_audit(&self, cfg: &ClassSConfig) -> AuditReport {
        class_s_audit(&self.weight, self.horizon, cfg)
    }
}

fn validate_block_input(input: &BlockWeightInput, horizon: u64) -> Result<()> {
    if input.sets.is_empty() {
        return Err(Error::domain("at least one set is required"));
    }
    if input.sets.len() != input.deltas.len() {
        return Err(Error::domain(format!(
            "{} sets but {} targets",
            input.sets.len(),
            input.deltas.len()
        )));
    }
    if let Some(i) = input.deltas.iter().position(|d| !(*d > 0.0 && *d <= 1.0)) {
        return Err(Error::domain(format!(
            "target for set {i} must lie in (0, 1], got {}",
            input.deltas[i]
        )));
    }
    let window = horizon.clamp(1, 1024);
    for (i, set) in input.sets.iter().enumerate() {
        if banach_window_count(set, window, horizon.max(window))? == 0 {
            return Err(Error::construction(format!(
                "set {i} has zero estimated Banach density (window {window}, horizon {horizon})"
            )));
        }
    }
    Ok(())
}

/// Smallest block starts satisfying both conditions, up to the horizon.
fn greedy_k_seq(input: &BlockWeightInput, horizon: u64) -> Result<Vec<u64>> {
    let mut ks: Vec<u64> = Vec::new();
    let mut lo = 1u64;
    for p in 1u64.. {
        let n = input.class_of(p);
        let (set, delta) = (&input.sets[n], input.deltas[n]);
        let Some(k) = (lo..=horizon).find(|&k| block_is_dense(set, k, p, delta)) else {
            break;
        };
        ks.push(k);
        lo = k + p + 1;
    }
    if ks.is_empty() {
        return Err(Error::domain(format!(
            "no admissible k_1 below the horizon {horizon}"
        )));
    }
    Ok(ks)
}

/// The weight `a_0 = 1`, `a_j = S_{j−1}/p` on `[k_p, k_{p+1})`.
///
/// Verified before returning: `k_{p+1} > k_p + p`, the density condition on
/// every block, `v_k = 1/p` exactly on each block, `a_{k_p} = a_{k_p − 1}` and
/// monotonicity of `a` on `[0, horizon]`.
pub fn build_block_weight(input: &BlockWeightInput, horizon: u64) -> Result<BlockWeight> {
    validate_block_input(input, horizon)?;
    let k_seq = match &input.k_seq {
        Some(ks) => {
            if ks.is_empty() || ks[0] == 0 {
                return Err(Error::domain("k_seq must start at k_1 >= 1"));
            }
            if ks[0] > horizon {
                return Err(Error::domain(format!(
                    "horizon {horizon} is below k_1 = {}",
                    ks[0]
                )));
            }
            for (i, w) in ks.windows(2).enumerate() {
                let p = i as u64 + 1;
                if w[1] <= w[0] + p {
                    return Err(Error::construction(format!(
                        "k_(p+1) > k_p + p fails at p = {p}"
                    )));
                }
            }
            for (i, &k) in ks.iter().enumerate() {
                let p = i as u64 + 1;
                if k > horizon {
                    break;
                }
                let n = input.class_of(p);
                if !block_is_dense(&input.sets[n], k, p, input.deltas[n]) {
                    return Err(Error::construction(format!(
                        "block density condition fails for (n, p) = ({n}, {p}): \
                         #(A_n ∩ [{k}, {})) = {} < {p} · {}",
                        k + p,
                        input.sets[n].count_in_range(k, k + p - 1),
                        input.deltas[n]
                    )));
                }
            }
            ks.clone()
        }
        None => greedy_k_seq(input, horizon)?,
    };
    let weight = WeightSequence::block_recursive(k_seq.clone())?;
    weight.ensure(horizon)?;

    let mut p = 1u64;
    for j in 1..=horizon {
        while (p as usize) < k_seq.len() && k_seq[p as usize] <= j {
            p += 1;
        }
        if weight.v_ratio(j)?.value != 1.0 / p as f64 {
            return Err(Error::construction(format!("v_{j} differs from 1/{p}")));
        }
        let step = weight.ln_weight_step(j)?;
        if step < -1e-12 {
            return Err(Error::construction(format!("a_{j} < a_{}", j - 1)));
        }
    }
    for (i, &k) in k_seq.iter().enumerate().skip(1) {
        if k <= horizon && weight.ln_weight_step(k)?.abs() > 1e-12 {
            return Err(Error::construction(format!(
                "a_(k_p) differs from a_(k_p - 1) at p = {}",
                i + 1
            )));
        }
    }
    Ok(BlockWeight {
        weight,
        k_seq,
        horizon,
        input: input.clone(),
    })
}

/// `∪_{k≥1} [n_k, n_k + k]` chosen so that both halves of the weighted
/// ratio bound stay below `ε_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseThickSet {
    pub n_seq: Vec<u64>,
    pub set: IndexSet,
    pub eps_schedule: Vec<f64>,
    /// Achieved mass of the earlier intervals over `S_{n_k}`.
    pub term_one: Vec<f64>,
    /// Achieved `(k+1) / (1 + 1/v_{n_k})`.
    pub term_two: Vec<f64>,
}

impl SparseThickSet {
    pub fn kmax(&self) -> u64 {
        self.n_seq.len() as u64
    }

    /// Last index of interval `k` (`k ≥ 1`).
    pub fn interval_end(&self, k: u64) -> u64 {
        self.n_seq[k as usize - 1] + k
    }
}

/// `ε_k = first · ratio^(k−1)`, floored.
pub fn geometric_schedule(first: f64, ratio: f64, floor: f64, kmax: usize) -> Vec<f64> {
    (0..kmax)
        .map(|i| (first * ratio.powi(i as i32)).max(floor))
        .collect()
}

/// Greedy smallest `n_k > n_{k−1} + (k−1)` with
/// `Σ_{j<k} Σ_{l≤j} a_{n_j+l} / S_{n_k} ≤ ε_k` and
/// `(k+1) / (1 + 1/v_{n_k}) ≤ ε_k`.
///
/// Both quantities are non-increasing in `n_k` for admissible weights, which
/// the search relies on.
pub fn build_sparse_thick_set(
    a: &WeightSequence,
    eps: &[f64],
    index_cap: u64,
) -> Result<SparseThickSet> {
    if eps.is_empty() {
        return Err(Error::domain("epsilon schedule must not be empty"));
    }
    if let Some(i) = eps.iter().position(|e| !(*e > 0.0)) {
        return Err(Error::domain(format!("epsilon {i} is not positive")));
    }
    if eps.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::domain("epsilon schedule must be non-increasing"));
    }
    let mut n_seq: Vec<u64> = Vec::new();
    let (mut t1, mut t2) = (Vec::new(), Vec::new());
    let mut mass = 0.0f64;
    for (i, &e) in eps.iter().enumerate() {
        let k = i as u64 + 1;
        let lo = n_seq.last().map_or(1, |&n| n + k);
        let terms = |n: u64| -> Result<(f64, f64)> {
            let one = mass / a.prefix_sum(n)?;
            let v = a.v_ratio(n)?.value;
            Ok((one, (k + 1) as f64 / (1.0 + 1.0 / v)))
        };
        let ok = |n: u64| -> Result<bool> {
            let (x, y) = terms(n)?;
            Ok(x <= e && y <= e)
        };
        let limit = index_cap.min(a.last_index().unwrap_or(u64::MAX));
        if lo > limit {
            return Err(Error::Resource {
                what: format!("interval start n_{k}"),
                cap: limit,
                achieved: f64::NAN,
            });
        }
        let mut hi = lo;
        let mut step = 1u64;
        while !ok(hi)? {
            if hi == limit {
                let (x, y) = terms(hi)?;
                return Err(Error::Resource {
                    what: format!("interval start n_{k} for epsilon {e}"),
                    cap: limit,
                    achieved: x.max(y),
                });
            }
            hi = (hi + step).min(limit);
            step *= 2;
        }
        let mut left = hi.saturating_sub(step / 2).max(lo);
        let mut right = hi;
        while left < right {
            let mid = left + (right - left) / 2;
            if ok(mid)? {
                right = mid;
            } else {
                left = mid + 1;
            }
        }
        let n = right;
        let (x, y) = terms(n)?;
        n_seq.push(n);
        t1.push(x);
        t2.push(y);
        for l in 0..=k {
            mass += a.weight(n + l)?;
        }
    }
    Ok(SparseThickSet {
        set: IndexSet::interval_union(n_seq.clone())?,
        n_seq,
        eps_schedule: eps.to_vec(),
        term_one: t1,
        term_two: t2,
    })
}

/// A vector supported on a sparse thick set whose `(2B)`-orbit comes close
/// to each target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftDemo {
    pub x: SparseVector,
    /// `(target index i from 1, interval k, shift n_k)`.
    pub placements: Vec<(usize, u64, u64)>,
    /// `‖(2B)^{n_k} x − t_i‖₁` per target.
    pub errors: Vec<Dyadic>,
    /// Whether every error is below `2^{−i}`.
    pub within_tolerance: bool,
    /// Whether `{j : 2^j |x_j| ≥ 1/2}` lies inside the set.
    pub inclusion_holds: bool,
    /// All norms above were computed without rounding.
    pub exact: bool,
}

/// `(2B)^j x`, where `B` is the backward shift `(Bx)_m = x_{m+1}`.
pub fn doubled_backward_shift_pow(x: &SparseVector, j: u64) -> SparseVector {
    SparseVector::from_entries(
        x.iter()
            .filter(|&(k, _)| k >= j)
            .map(|(k, v)| (k - j, v.mul_pow2(j as i64))),
    )
}

/// Places `2^{−n_k} t_i` at the start of interval `k`, using the first
/// interval long enough for each target in turn, then checks every target
/// exactly.
pub fn shift_demo_vector(sts: &SparseThickSet, targets: &[SparseVector]) -> Result<ShiftDemo> {
    let mut x = SparseVector::new();
    let mut placements = Vec::new();
    let mut next_k = 1u64;
    for (i, t) in targets.iter().enumerate() {
        let need = t.max_index().unwrap_or(0);
        let k = (next_k.max(need)..=sts.kmax()).next().ok_or_else(|| {
            Error::construction(format!(
                "no interval left that can host target {} (support up to {need})",
                i + 1
            ))
        })?;
        let n = sts.n_seq[k as usize - 1];
        for (m, v) in t.iter() {
            x.add_at(n + m, v.mul_pow2(-(n as i64)));
        }
        placements.push((i + 1, k, n));
        next_k = k + 1;
    }
    let mut errors = Vec::new();
    let mut within = true;
    let mut exact = !x.is_approximate();
    for (&(i, _, n), t) in placements.iter().zip(targets) {
        let diff = doubled_backward_shift_pow(&x, n).sub(t);
        let norm = diff.norm_l1();
        exact &= norm.exact;
        within &= norm.value < Dyadic::pow2(-(i as i64));
        errors.push(norm.value);
    }
    let half = Dyadic::pow2(-1);
    let inclusion_holds = x
        .iter()
        .filter(|&(j, v)| v.abs().mul_pow2(j as i64) >= half)
        .all(|(j, _)| sts.set.contains(j));
    Ok(ShiftDemo {
        x,
        placements,
        errors,
        within_tolerance: within,
        inclusion_holds,
        exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::partial_weighted_density;

    #[test]
    fn power_weight_rejects_nonpositive() {
        assert!(build_power_weight(0.0).is_err());
        assert!(build_power_weight(-1.0).is_err());
        assert!(build_power_weight(1.0).is_ok());
    }

    #[test]
    fn first_interval_for_linear_weight() {
        let a = WeightSequence::power(1.0).unwrap();
        let s = build_sparse_thick_set(&a, &[0.5], 1 << 20).unwrap();
        assert_eq!(s.n_seq, vec![7]);
        let r = partial_weighted_density(&a, &s.set, 8).unwrap();
        assert!((r - 15.0 / 37.0).abs() < 1e-15);
        assert!(r <= 0.5);
    }

    #[test]
    fn impossible_schedule_is_a_resource_error() {
        let a = WeightSequence::power(1.0).unwrap();
        let err = build_sparse_thick_set(&a, &[1e-9], 1000).unwrap_err();
        assert!(matches!(err, Error::Resource { cap: 1000, .. }));
    }

    #[test]
    fn greedy_blocks_on_small_instance() {
        let input = BlockWeightInput::new(vec![IndexSet::evens()], vec![0.5]);
        let b = build_block_weight(&input, 200).unwrap();
        assert_eq!(&b.k_seq[..4], &[2, 4, 8, 12]);
        for w in b.k_seq.windows(2).enumerate() {
            assert!(w.1[1] > w.1[0] + w.0 as u64 + 1);
        }
    }

    #[test]
    fn supplied_k_seq_is_checked() {
        let mut input = BlockWeightInput::new(vec![IndexSet::evens()], vec![0.5]);
        input.k_seq = Some(vec![1, 3]);
        let err = build_block_weight(&input, 50).unwrap_err();
        assert!(err.to_string().contains("(n, p) = (0, 1)"), "{err}");
        input.k_seq = Some(vec![2, 3]);
        assert!(build_block_weight(&input, 50).is_err());
        input.k_seq = Some(vec![60]);
        assert!(matches!(build_block_weight(&input, 50), Err(Error::Domain(_))));
    }

    #[test]
    fn zero_density_set_is_flagged() {
        let input = BlockWeightInput::new(vec![IndexSet::evens(), IndexSet::empty()], vec![0.3, 0.3]);
        let err = build_block_weight(&input, 500).unwrap_err();
        assert!(err.to_string().contains("set 1 has zero"), "{err}");
    }

    #[test]
    fn single_target_demo() {
        let a = WeightSequence::power(1.0).unwrap();
        let s = build_sparse_thick_set(&a, &geometric_schedule(0.5, 0.5, 0.0, 4), 1 << 20).unwrap();
        let d = shift_demo_vector(&s, &[SparseVector::basis(0)]).unwrap();
        assert_eq!(d.x.len(), 1);
        assert_eq!(d.x.get(7), Dyadic::pow2(-7));
        assert!(d.errors[0].is_zero());
        assert!(d.within_tolerance && d.inclusion_holds && d.exact);
        let empty = shift_demo_vector(&s, &[]).unwrap();
        assert!(empty.x.is_zero());
    }
}
