//! Finite-horizon weighted, natural and Banach densities.
//!
//! Nothing here computes a true limsup. Profiles sample counting ratios at
//! declared horizons and report running extrema over a declared tail; Banach
//! window counts only scan finitely many window positions and are therefore
//! lower bounds.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index_set::IndexSet;
use crate::report::{AuditReport, Check};
use crate::weight::WeightSequence;

/// Default absolute tolerance for floating comparisons in audits.
pub const AUDIT_TOLERANCE: f64 = 1e-9;

/// Strictly increasing horizons plus the first horizon of the tail over
/// which running extrema are taken.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    horizons: Vec<u64>,
    #[serde(default)]
    tail_start: u64,
}

impl SamplePlan {
    pub fn new(horizons: Vec<u64>) -> Result<Self> {
        if horizons.is_empty() {
            return Err(Error::domain("sample plan needs at least one horizon"));
        }
        if horizons.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("horizons must be strictly increasing"));
        }
        Ok(SamplePlan {
            horizons,
            tail_start: 0,
        })
    }

    /// About `per_decade` logarithmically spaced horizons in `[lo, hi]`,
    /// always including both ends.
    pub fn log_spaced(lo: u64, hi: u64, per_decade: u32) -> Result<Self> {
        if lo == 0 || hi < lo || per_decade == 0 {
            return Err(Error::domain("log-spaced plan needs 1 <= lo <= hi and per_decade >= 1"));
        }
        let step = 10f64.powf(1.0 / per_decade as f64);
        let mut hs = vec![lo];
        let mut x = lo as f64;
        loop {
            x *= step;
            let h = x.round() as u64;
            if h >= hi {
                break;
            }
            if h > *hs.last().unwrap() {
                hs.push(h);
            }
        }
        if *hs.last().unwrap() != hi {
            hs.push(hi);
        }
        SamplePlan::new(hs)
    }

    /// Restrict running extrema to horizons `>= tail_start`.
    pub fn with_tail(mut self, tail_start: u64) -> Result<Self> {
        if tail_start > *self.horizons.last().unwrap() {
            return Err(Error::domain("tail starts after the last horizon"));
        }
        self.tail_start = tail_start;
        Ok(self)
    }

    pub fn horizons(&self) -> &[u64] {
        &self.horizons
    }

    pub fn tail_start(&self) -> u64 {
        self.tail_start
    }

    pub fn max_horizon(&self) -> u64 {
        *self.horizons.last().unwrap()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub horizon: u64,
    pub ratio: f64,
}

/// Sampled ratios with running extrema over the plan's tail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityProfile {
    pub samples: Vec<Sample>,
    pub tail_start: u64,
    /// Max over tail samples: the limsup estimate.
    pub running_max: f64,
    /// Min over tail samples: the liminf estimate.
    pub running_min: f64,
}

impl DensityProfile {
    fn from_samples(samples: Vec<Sample>, tail_start: u64) -> Self {
        let tail = samples.iter().filter(|s| s.horizon >= tail_start);
        let (lo, hi) = tail.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
            (lo.min(s.ratio), hi.max(s.ratio))
        });
        DensityProfile {
            samples,
            tail_start,
            running_max: hi,
            running_min: lo,
        }
    }

    pub fn last(&self) -> Sample {
        *self.samples.last().expect("profiles are never empty")
    }

    /// CSV with columns `horizon,ratio`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::domain(format!("csv output failed: {e}"));
        w.write_record(["horizon", "ratio"]).map_err(io)?;
        for s in &self.samples {
            w.serialize((s.horizon, s.ratio)).map_err(io)?;
        }
        w.flush()
            .map_err(|e| Error::domain(format!("csv output failed: {e}")))?;
        Ok(())
    }
}

/// Ratios `Σ_{j=start}^{N} a_j 1_A(j) / S_N` at each of the increasing
/// `horizons` (all `>= start`).
pub fn restricted_ratios(
    a: &WeightSequence,
    set: &IndexSet,
    start: u64,
    horizons: &[u64],
) -> Result<Vec<f64>> {
    let end = horizons.last().copied().unwrap_or(start);
    let mut members = set.members(start, end).peekable();
    ratios_by(a, start, horizons, |n| members.next_if_eq(&n).is_some())
}

/// Like [`restricted_ratios`] with membership given by a predicate, which
/// is called once for each index in `start..=max(horizons)`, in order.
pub fn ratios_by(
    a: &WeightSequence,
    start: u64,
    horizons: &[u64],
    mut member: impl FnMut(u64) -> bool,
) -> Result<Vec<f64>> {
    let Some(&end) = horizons.last() else {
        return Ok(Vec::new());
    };
    if horizons.first().is_some_and(|&h| h < start) {
        return Err(Error::domain("horizons must not precede the scan start"));
    }
    let mut scan = a.scan(start, end)?;
    let mut out = Vec::with_capacity(horizons.len());
    let mut targets = horizons.iter().peekable();
    for n in start..=end {
        let r = scan.push(member(n));
        while targets.next_if_eq(&&n).is_some() {
            out.push(r);
        }
    }
    Ok(out)
}

/// `Σ_{j≤N} a_j 1_A(j) / Σ_{j≤N} a_j`.
pub fn partial_weighted_density(a: &WeightSequence, set: &IndexSet, n: u64) -> Result<f64> {
    Ok(restricted_ratios(a, set, 0, &[n])?[0])
}

/// `#(A ∩ [0, N]) / (N + 1)`.
pub fn natural_density_ratio(set: &IndexSet, n: u64) -> f64 {
    set.count_le(n) as f64 / (n + 1) as f64
}

pub fn upper_density_profile(
    a: &WeightSequence,
    set: &IndexSet,
    plan: &SamplePlan,
) -> Result<DensityProfile> {
    let ratios = restricted_ratios(a, set, 0, plan.horizons())?;
    let samples = plan
        .horizons()
        .iter()
        .zip(ratios)
        .map(|(&horizon, ratio)| Sample { horizon, ratio })
        .collect();
    Ok(DensityProfile::from_samples(samples, plan.tail_start()))
}

/// Natural density profile; exact integer counts, no scan.
pub fn natural_density_profile(set: &IndexSet, plan: &SamplePlan) -> DensityProfile {
    let samples = plan
        .horizons()
        .iter()
        .map(|&horizon| Sample {
            horizon,
            ratio: natural_density_ratio(set, horizon),
        })
        .collect();
    DensityProfile::from_samples(samples, plan.tail_start())
}

/// `max_{0≤k≤H−N} #(A ∩ [k+1, k+N])`, a lower bound for
/// `b_N = limsup_k #(A ∩ [k+1, k+N])`.
pub fn banach_window_count(set: &IndexSet, window: u64, scan_horizon: u64) -> Result<u64> {
    if window == 0 {
        return Err(Error::domain("window length must be at least 1"));
    }
    if scan_horizon < window {
        return Err(Error::domain(format!(
            "scan horizon {scan_horizon} is shorter than the window {window}"
        )));
    }
    let mut last_k = scan_horizon - window;
    if let Some((start, q)) = set.periodic_from() {
        last_k = last_k.min(start + q);
    }
    let mut count = set.count_in_range(1, window);
    let mut best = count;
    for k in 1..=last_k {
        if best == window {
            break;
        }
        if set.contains(k) {
            count -= 1;
        }
        if set.contains(k + window) {
            count += 1;
        }
        best = best.max(count);
    }
    Ok(best)
}

/// Samples `b_N / N` for each window length; `running_max` estimates the
/// upper Banach density from below.
pub fn banach_density_profile(
    set: &IndexSet,
    windows: &[u64],
    scan_horizon: u64,
) -> Result<DensityProfile> {
    if windows.is_empty() {
        return Err(Error::domain("at least one window length is required"));
    }
    if windows.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("window lengths must be strictly increasing"));
    }
    let counts: Vec<u64> = windows
        .par_iter()
        .map(|&n| banach_window_count(set, n, scan_horizon))
        .collect::<Result<_>>()?;
    let samples = windows
        .iter()
        .zip(counts)
        .map(|(&n, c)| Sample {
            horizon: n,
            ratio: c as f64 / n as f64,
        })
        .collect();
    Ok(DensityProfile::from_samples(samples, 0))
}

/// Finite proxies for membership in the class of admissible weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassSConfig {
    /// `a_horizon` must reach this (proxy for `a_n → ∞`).
    pub growth_threshold: f64,
    /// `v_horizon` must not exceed this (proxy for `v_n → 0`).
    pub v_bound: f64,
    /// `v_n ≤ v_{n-1}` is checked for `n > tail_start`.
    pub tail_start: u64,
    pub tolerance: f64,
}

impl Default for ClassSConfig {
    fn default() -> Self {
        ClassSConfig {
            growth_threshold: 10.0,
            v_bound: 0.1,
            tail_start: 2,
            tolerance: AUDIT_TOLERANCE,
        }
    }
}

pub fn class_s_audit(a: &WeightSequence, horizon: u64, cfg: &ClassSConfig) -> AuditReport {
    let mut report = AuditReport::new("class-s");
    if horizon < 10 {
        report.warn(format!("horizon {horizon} is below 10; proxies are weak"));
    }
    if let Err(e) = a.ensure(horizon) {
        report.push(Check::new("evaluable", false).horizon(horizon).detail(e.to_string()));
        return report;
    }
    let tol = cfg.tolerance;

    let first_drop = (1..=horizon).find(|&n| a.ln_weight_step(n).unwrap() < -tol);
    report.push(
        Check::new("non-decreasing", first_drop.is_none())
            .horizon(horizon)
            .detail(first_drop.map_or(String::new(), |n| format!("a_{n} < a_{}", n - 1))),
    );

    let top = a.ln_weight(horizon).unwrap();
    report.push(
        Check::new("growth", top >= cfg.growth_threshold.ln() - tol)
            .value(top.exp())
            .threshold(cfg.growth_threshold)
            .horizon(horizon),
    );

    let from = cfg.tail_start.max(1) + 1;
    let first_rise = (from..=horizon).find(|&n| {
        a.v_ratio(n).unwrap().value > a.v_ratio(n - 1).unwrap().value + tol
    });
    report.push(
        Check::new("v-non-increasing", first_rise.is_none())
            .horizon(horizon)
            .detail(match first_rise {
                Some(n) => format!("v_{n} > v_{} (checked from n = {from})", n - 1),
                None => format!("checked from n = {from}"),
            }),
    );

    let v_top = a.v_ratio(horizon).unwrap().value;
    report.push(
        Check::new("v-small", v_top <= cfg.v_bound + tol)
            .value(v_top)
            .threshold(cfg.v_bound)
            .horizon(horizon),
    );
    report
}

/// Checks `d̲_b ≤ d̲_a` and `d̄_a ≤ d̄_b` on sampled profiles, for weights
/// where `a_n / b_n` decreases to zero.
pub fn density_ordering_audit(
    a: &WeightSequence,
    b: &WeightSequence,
    set: &IndexSet,
    plan: &SamplePlan,
    tolerance: f64,
) -> Result<AuditReport> {
    let mut report = AuditReport::new("density-ordering");
    let h = plan.max_horizon();
    a.ensure(h)?;
    b.ensure(h)?;
    let rise = (1..=h).find(|&n| {
        a.ln_weight_step(n).unwrap() > b.ln_weight_step(n).unwrap() + AUDIT_TOLERANCE
    });
    let strict = (1..=h).any(|n| {
        a.ln_weight_step(n).unwrap() < b.ln_weight_step(n).unwrap() - AUDIT_TOLERANCE
    });
    match rise {
        Some(n) => report.warn(format!(
            "precondition: a_n/b_n increases at n = {n}; ordering is not guaranteed"
        )),
        None if !strict => report.warn("precondition: a_n/b_n is constant on the checked range"),
        None => {}
    }

    let pa = upper_density_profile(a, set, plan)?;
    let pb = upper_density_profile(b, set, plan)?;
    report.push(
        Check::new("lower-chain", pb.running_min <= pa.running_min + tolerance)
            .value(pb.running_min - pa.running_min)
            .threshold(tolerance)
            .horizon(h),
    );
    report.push(
        Check::new("upper-chain", pa.running_max <= pb.running_max + tolerance)
            .value(pa.running_max - pb.running_max)
            .threshold(tolerance)
            .horizon(h),
    );
    report.data = serde_json::json!({
        "precondition_holds": rise.is_none(),
        "a": { "running_min": pa.running_min, "running_max": pa.running_max },
        "b": { "running_min": pb.running_min, "running_max": pb.running_max },
    });
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_partial_densities() {
        let one = WeightSequence::constant_one();
        let m3 = IndexSet::multiples_of(3).unwrap();
        assert_eq!(partial_weighted_density(&one, &m3, 8).unwrap(), 1.0 / 3.0);
        let lin = WeightSequence::power(1.0).unwrap();
        let r = partial_weighted_density(&lin, &IndexSet::evens(), 4).unwrap();
        assert!((r - 7.0 / 11.0).abs() < 1e-15);
        assert_eq!(partial_weighted_density(&lin, &IndexSet::empty(), 40).unwrap(), 0.0);
    }

    #[test]
    fn banach_counts() {
        assert_eq!(banach_window_count(&IndexSet::evens(), 10, 10).unwrap(), 5);
        assert_eq!(banach_window_count(&IndexSet::evens(), 10, 1_000_000).unwrap(), 5);
        assert_eq!(banach_window_count(&IndexSet::all(), 7, 100).unwrap(), 7);
        let u = IndexSet::interval_union(vec![3, 10, 20, 40, 60]).unwrap();
        assert_eq!(banach_window_count(&u, 5, 100).unwrap(), 5);
        assert_eq!(banach_window_count(&u, 7, 100).unwrap(), 6);
        assert!(banach_window_count(&u, 0, 100).is_err());
    }

    #[test]
    fn profiles_and_csv() {
        let plan = SamplePlan::new(vec![10, 100, 1000]).unwrap();
        let p = upper_density_profile(&WeightSequence::constant_one(), &IndexSet::all(), &plan)
            .unwrap();
        assert!(p.samples.iter().all(|s| s.ratio == 1.0));
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "horizon,ratio\n10,1.0\n100,1.0\n1000,1.0\n");
        assert!(SamplePlan::new(vec![]).is_err());
        assert!(SamplePlan::new(vec![3, 3]).is_err());
        let b = banach_density_profile(&IndexSet::evens(), &[2, 4, 10], 100).unwrap();
        assert!(b.samples.iter().all(|s| s.ratio == 0.5));
    }

    #[test]
    fn class_s_examples() {
        let cfg = ClassSConfig::default();
        let sqrt = WeightSequence::power(0.5).unwrap();
        assert!(class_s_audit(&sqrt, 10_000, &cfg).passed);
        let geo = WeightSequence::geometric(2.0).unwrap();
        let r = class_s_audit(&geo, 100, &cfg);
        assert!(!r.passed);
        assert!(!r.check("v-small").unwrap().passed);
        let one = WeightSequence::constant_one();
        let r = class_s_audit(&one, 1000, &cfg);
        assert!(!r.check("growth").unwrap().passed);
    }

    #[test]
    fn log_spaced_plan_hits_ends() {
        let p = SamplePlan::log_spaced(1000, 1_000_000, 4).unwrap();
        assert_eq!(p.horizons()[0], 1000);
        assert_eq!(p.max_horizon(), 1_000_000);
        assert!(p.horizons().len() >= 12);
    }
}
