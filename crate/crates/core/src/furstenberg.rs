//! Family predicates, difference sets and syndeticity audits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{ratios_by, restricted_ratios, SamplePlan, AUDIT_TOLERANCE};
use crate::error::{Error, Result};
use crate::index_set::IndexSet;
use crate::report::{AuditReport, Check};
use crate::weight::WeightSequence;

/// Which counting ratio a family thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// `#(A ∩ [0, N]) / (N + 1)` for some `N ≥ n`.
    Ud,
    /// `#(A ∩ [m, m + n]) / (n + 1)` for some `m ≥ 0`.
    #[serde(rename = "uBd")]
    UBd,
    /// `Σ_{j≤N} a_j 1_A(j) / S_N` for some `N ≥ n`.
    UdA { weight: WeightSequence },
}

/// The family `𝒜_{δ,n}`: sets whose ratio exceeds `δ` at some admissible
/// position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    #[serde(flatten)]
    pub family: Family,
    pub delta: f64,
    pub n: u64,
}

impl FamilySpec {
    pub fn new(family: Family, delta: f64, n: u64) -> Result<Self> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::domain(format!("delta must lie in (0, 1], got {delta}")));
        }
        Ok(FamilySpec { family, delta, n })
    }
}

/// Outcome of a bounded search. `Yes` is definitive; the other verdict only
/// speaks about positions up to `bound`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Verdict {
    /// `witness` is `N` (ud, ud_a) or the window start `m` (uBd).
    Yes { witness: u64, ratio: f64 },
    NotFoundBelowBound { bound: u64, best: f64 },
}

impl Verdict {
    pub fn is_yes(&self) -> bool {
        matches!(self, Verdict::Yes { .. })
    }
}

pub fn family_member(spec: &FamilySpec, set: &IndexSet, search_bound: u64) -> Result<Verdict> {
    if search_bound < spec.n {
        return Err(Error::domain(format!(
            "search bound {search_bound} is below n = {}",
            spec.n
        )));
    }
    let delta = spec.delta;
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::domain(format!("delta must lie in (0, 1], got {delta}")));
    }
    let mut best = 0.0f64;
    match &spec.family {
        Family::Ud => {
            let mut count = if spec.n == 0 { 0 } else { set.count_le(spec.n - 1) };
            for big_n in spec.n..=search_bound {
                count += set.contains(big_n) as u64;
                let r = count as f64 / (big_n + 1) as f64;
                if r > delta {
                    return Ok(Verdict::Yes {
                        witness: big_n,
                        ratio: r,
                    });
                }
                best = best.max(r);
            }
        }
        Family::UBd => {
            let len = spec.n + 1;
            let mut count = set.count_in_range(0, spec.n);
            for m in 0..=search_bound {
                if m > 0 {
                    count -= set.contains(m - 1) as u64;
                    count += set.contains(m + spec.n) as u64;
                }
                let r = count as f64 / len as f64;
                if r > delta {
                    return Ok(Verdict::Yes { witness: m, ratio: r });
                }
                best = best.max(r);
            }
        }
        Family::UdA { weight } => {
            let mut scan = weight.scan(0, search_bound)?;
            let mut members = set.members(0, search_bound).peekable();
            for big_n in 0..=search_bound {
                let r = scan.push(members.next_if_eq(&big_n).is_some());
                if big_n >= spec.n {
                    if r > delta {
                        return Ok(Verdict::Yes {
                            witness: big_n,
                            ratio: r,
                        });
                    }
                    best = best.max(r);
                }
            }
        }
    }
    Ok(Verdict::NotFoundBelowBound {
        bound: search_bound,
        best,
    })
}

/// `{j ≤ horizon : j ∈ A and j + k ∈ A}` as an explicit set.
pub fn difference_intersection(set: &IndexSet, k: u64, horizon: u64) -> IndexSet {
    IndexSet::explicit(
        set.members(0, horizon)
            .filter(|&j| set.contains(j + k))
            .collect(),
    )
}

/// Settings for [`shift_density_audit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShiftAuditConfig {
    /// Allowed gap between the two limsup estimates.
    pub tolerance: f64,
    /// Start of the restricted sum in the lower sandwich bound.
    pub n0: u64,
}

impl Default for ShiftAuditConfig {
    fn default() -> Self {
        ShiftAuditConfig {
            tolerance: 0.01,
            n0: 2,
        }
    }
}

/// Compares the profiles of `A` and `A − k`, and checks at every sampled
/// horizon `N`, for each unit step `B → B − 1` on the way from `A` to `A − k`:
///
/// * `ratio(B − 1)(N) ≤ ratio(B)(N) + v_{N+1}`;
/// * `ratio(B − 1)(N) ≥ Σ_{j=n0+1}^{N} a_j 1_B(j) / S_N / (1 + v_{n0})`.
pub fn shift_density_audit(
    a: &WeightSequence,
    set: &IndexSet,
    k: u64,
    plan: &SamplePlan,
    cfg: &ShiftAuditConfig,
) -> Result<AuditReport> {
    let mut report = AuditReport::new("shift-density");
    let hs = plan.horizons();
    let h = plan.max_horizon();
    if hs[0] <= cfg.n0 {
        return Err(Error::domain("sampled horizons must exceed n0"));
    }
    a.ensure(h + 1)?;
    let tail = |r: &[f64]| {
        hs.iter()
            .zip(r)
            .filter(|(&n, _)| n >= plan.tail_start())
            .map(|(_, &x)| x)
            .fold(f64::NEG_INFINITY, f64::max)
    };

    let mut current = restricted_ratios(a, set, 0, hs)?;
    let base_max = tail(&current);
    let v_n0 = if cfg.n0 == 0 { 1.0 } else { a.v_ratio(cfg.n0)?.value };
    let mut upper_worst = f64::NEG_INFINITY;
    let mut lower_worst = f64::NEG_INFINITY;
    for s in 0..k {
        let b = set.shifted(s);
        let next = restricted_ratios(a, &b.shifted(1), 0, hs)?;
        let restricted = restricted_ratios(a, &b, cfg.n0 + 1, hs)?;
        for (i, &n) in hs.iter().enumerate() {
            let v_next = a.v_ratio(n + 1)?.value;
            upper_worst = upper_worst.max(next[i] - current[i] - v_next);
            lower_worst = lower_worst.max(restricted[i] / (1.0 + v_n0) - next[i]);
        }
        current = next;
    }
    let shifted_max = tail(&current);
    let gap = (base_max - shifted_max).abs();
    report.push(
        Check::new("limsup-agreement", gap <= cfg.tolerance)
            .value(gap)
            .threshold(cfg.tolerance)
            .horizon(h)
            .detail(format!("k = {k}")),
    );
    if k > 0 {
        report.push(
            Check::new("upper-sandwich", upper_worst <= AUDIT_TOLERANCE)
                .value(upper_worst)
                .threshold(0.0)
                .horizon(h),
        );
        report.push(
            Check::new("lower-sandwich", lower_worst <= AUDIT_TOLERANCE)
                .value(lower_worst)
                .threshold(0.0)
                .horizon(h)
                .detail(format!("n0 = {}", cfg.n0)),
        );
    }
    report.data = serde_json::json!({
        "k": k,
        "estimate": base_max,
        "shifted_estimate": shifted_max,
    });
    Ok(report)
}

/// Estimated return-time set `𝒦` and its gaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub set: IndexSet,
    pub horizon: u64,
    pub kmax: u64,
    pub delta: f64,
    /// `δ² / 2`.
    pub threshold: f64,
    /// Limsup estimate of `A` itself.
    pub density_estimate: f64,
    /// `(d − δ²/2) / (d² − δ²/2)` with `d` the estimate above, when the
    /// denominator is positive.
    pub r_bound: Option<f64>,
    /// Members of the estimated `𝒦` in `[0, kmax]`.
    pub members: Vec<u64>,
    /// Largest difference of consecutive members.
    pub max_gap: Option<u64>,
    /// Members `k` followed by a gap equal to `max_gap`.
    pub gap_positions: Vec<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// `𝒦 = {k ≤ kmax : d̄_a-estimate(A ∩ (A − k)) > δ²/2}`.
pub fn bounded_gaps_audit(
    a: &WeightSequence,
    set: &IndexSet,
    delta: f64,
    kmax: u64,
    plan: &SamplePlan,
) -> Result<GapReport> {
    let hs = plan.horizons();
    let tail_max = |r: Vec<f64>| {
        hs.iter()
            .zip(r)
            .filter(|(&n, _)| n >= plan.tail_start())
            .map(|(_, x)| x)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let d = tail_max(restricted_ratios(a, set, 0, hs)?);
    let mut warnings = Vec::new();
    if d <= delta {
        warnings.push(format!(
            "precondition: density estimate {d} does not exceed delta {delta}"
        ));
    }
    let threshold = delta * delta / 2.0;
    a.ensure(plan.max_horizon())?;
    let estimates: Vec<f64> = (0..=kmax)
        .into_par_iter()
        .map(|k| {
            ratios_by(a, 0, hs, |j| set.contains(j) && set.contains(j + k)).map(tail_max)
        })
        .collect::<Result<_>>()?;
    let members: Vec<u64> = (0..=kmax)
        .filter(|&k| estimates[k as usize] > threshold)
        .collect();
    let max_gap = members.windows(2).map(|w| w[1] - w[0]).max();
    let gap_positions = match max_gap {
        Some(g) => members
            .windows(2)
            .filter(|w| w[1] - w[0] == g)
            .map(|w| w[0])
            .collect(),
        None => Vec::new(),
    };
    let denom = d * d - threshold;
    Ok(GapReport {
        set: set.clone(),
        horizon: plan.max_horizon(),
        kmax,
        delta,
        threshold,
        density_estimate: d,
        r_bound: (denom > 0.0).then(|| (d - threshold) / denom),
        members,
        max_gap,
        gap_positions,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ud_examples() {
        let spec = FamilySpec::new(Family::Ud, 0.4, 0).unwrap();
        assert!(family_member(&spec, &IndexSet::evens(), 100).unwrap().is_yes());
        assert!(!family_member(&spec, &IndexSet::empty(), 100).unwrap().is_yes());
        let spec = FamilySpec::new(Family::Ud, 0.4, 1).unwrap();
        assert_eq!(
            family_member(&spec, &IndexSet::evens(), 100).unwrap(),
            Verdict::Yes {
                witness: 1,
                ratio: 0.5
            }
        );
    }

    #[test]
    fn ubd_inside_an_interval() {
        let starts = vec![1, 10, 30, 60, 100, 150, 210, 280, 360, 450];
        let spec = FamilySpec::new(Family::UBd, 0.9, 9).unwrap();
        let set = IndexSet::interval_union(starts.clone()).unwrap();
        let v = family_member(&spec, &set, 500).unwrap();
        assert!(matches!(v, Verdict::Yes { ratio, .. } if ratio > 0.9));
        let short = IndexSet::interval_union(starts[..8].to_vec()).unwrap();
        assert!(!family_member(&spec, &short, 500).unwrap().is_yes());
    }

    #[test]
    fn difference_sets() {
        let ev = IndexSet::evens();
        assert_eq!(difference_intersection(&ev, 2, 50), ev.truncated(50));
        assert_eq!(difference_intersection(&ev, 1, 50), IndexSet::empty().truncated(50));
        let m3 = IndexSet::multiples_of(3).unwrap();
        assert_eq!(difference_intersection(&m3, 6, 90), m3.truncated(90));
        assert_eq!(difference_intersection(&m3, 0, 90), m3.truncated(90));
    }

    #[test]
    fn shift_zero_is_exact() {
        let plan = SamplePlan::new(vec![100, 1000]).unwrap();
        let a = WeightSequence::power(1.0).unwrap();
        let r = shift_density_audit(&a, &IndexSet::evens(), 0, &plan, &Default::default()).unwrap();
        assert!(r.passed);
        assert_eq!(r.check("limsup-agreement").unwrap().value, Some(0.0));
    }

    #[test]
    fn gaps_of_evens() {
        let plan = SamplePlan::new(vec![5_000, 10_000, 20_000]).unwrap();
        let a = WeightSequence::power(1.0).unwrap();
        let g = bounded_gaps_audit(&a, &IndexSet::evens(), 0.4, 40, &plan).unwrap();
        assert_eq!(g.members, (0..=40).step_by(2).collect::<Vec<_>>());
        assert_eq!(g.max_gap, Some(2));
        let g = bounded_gaps_audit(&a, &IndexSet::all(), 0.9, 30, &plan).unwrap();
        assert_eq!(g.max_gap, Some(1));
        assert_eq!(g.members.len(), 31);
    }

    #[test]
    fn spec_json_shape() {
        let spec: FamilySpec = serde_json::from_str(
            r#"{"family":"ud_a","weight":{"kind":"power","alpha":1.0},"delta":0.3,"n":100}"#,
        )
        .unwrap();
        assert!(matches!(spec.family, Family::UdA { .. }));
        let spec: FamilySpec =
            serde_json::from_str(r#"{"family":"uBd","delta":0.3,"n":10}"#).unwrap();
        assert_eq!(spec.family, Family::UBd);
    }
}
