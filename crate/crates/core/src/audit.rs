//! End-to-end audits: window coverage margins for `C₊,₁` operators and the
//! density inequalities behind the hypercyclicity equivalences.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ctype::{
    bad_time_set, build_c_plus_1, validate_chaos_params, CPlus1Config, CTypeParams,
};
use crate::density::{
    banach_window_count, class_s_audit, natural_density_profile, restricted_ratios,
    upper_density_profile, ClassSConfig, SamplePlan,
};
use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::forge::{build_block_weight, build_sparse_thick_set, geometric_schedule, BlockWeightInput};
use crate::index_set::IndexSet;
use crate::report::{AuditReport, Check};
use crate::sparse::SparseVector;
use crate::weight::{WeightSequence, WeightSpec};

/// Weighted share of `∪_r [rN + j0, rN + j0 + 2n]` and its analytic bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub period: u64,
    pub n: u64,
    pub j0: u64,
    pub s_max: u64,
    /// `max_{N−n ≤ s ≤ s_max}` of the weighted ratio of the windows up to `s`.
    pub direct: f64,
    pub argmax: u64,
    /// `2 − 2/Π_{j=N−3n}^{N−n}(1+v_j) + (2n+1)/N`.
    pub bound: f64,
}

/// `2 − 2/Π_{j=N−3n}^{N−n}(1+v_j) + (2n+1)/N`; the product is taken as
/// infinite when `N − 3n < 1`.
pub fn coverage_bound(a: &WeightSequence, period: u64, n: u64) -> Result<f64> {
    if n >= period {
        return Err(Error::domain(format!("need n < N (n = {n}, N = {period})")));
    }
    let tail = (2 * n + 1) as f64 / period as f64;
    if period < 3 * n + 1 {
        return Ok(2.0 + tail);
    }
    let mut log_prod = 0.0;
    for j in period - 3 * n..=period - n {
        log_prod += a.v_ratio(j)?.value.ln_1p();
    }
    Ok(-2.0 * (-log_prod).exp_m1() + tail)
}

/// Windows `[rN + j0, rN + j0 + 2n]` meeting `[0, s_max]`, merged.
fn windows(period: u64, n: u64, j0: u64, s_max: u64) -> Vec<(u64, u64)> {
    if 2 * n + 1 >= period {
        return if j0 <= s_max { vec![(j0, u64::MAX)] } else { Vec::new() };
    }
    (0..)
        .map(|r| (r * period + j0, r * period + j0 + 2 * n))
        .take_while(|&(lo, _)| lo <= s_max)
        .collect()
}

fn window_ratio(a: &WeightSequence, wins: &[(u64, u64)], s: u64) -> Result<f64> {
    let mut total = 0.0;
    for &(lo, hi) in wins {
        if lo > s {
            break;
        }
        total += a.mass_ratio(lo, hi.min(s), s)?;
    }
    Ok(total)
}

pub fn window_coverage(
    a: &WeightSequence,
    period: u64,
    n: u64,
    j0: u64,
    s_max: u64,
) -> Result<Coverage> {
    if j0 >= period {
        return Err(Error::domain(format!("need j0 < N (j0 = {j0}, N = {period})")));
    }
    let bound = coverage_bound(a, period, n)?;
    let s_min = period - n;
    if s_max < s_min {
        return Err(Error::domain(format!("need s_max >= N - n = {s_min}")));
    }
    let wins = windows(period, n, j0, s_max);
    // The ratio rises inside windows and falls outside, so the sup over
    // s is attained at s_min, at a window end, or at s_max.
    let mut cands = vec![s_min, s_max];
    cands.extend(
        wins.iter()
            .map(|&(_, hi)| hi)
            .filter(|&hi| hi >= s_min && hi <= s_max),
    );
    let mut best = (f64::NEG_INFINITY, s_min);
    for s in cands {
        let r = window_ratio(a, &wins, s)?;
        if r > best.0 {
            best = (r, s);
        }
    }
    Ok(Coverage {
        period,
        n,
        j0,
        s_max,
        direct: best.0,
        argmax: best.1,
        bound,
    })
}

/// `Δ⁽⁰⁾ = max(2, δ⁽⁰⁾+1)` and `Δ⁽ᵏ⁾ = 2 Δ⁽ᵏ⁻¹⁾ m_k` with the least `m_k`
/// giving `δ⁽ᵏ⁾ < Δ⁽ᵏ⁾` and a coverage-bound margin of at least
/// `max(target, previous margin)`.
pub fn generate_big_delta(a: &WeightSequence, delta: &[u64], target: f64) -> Result<Vec<u64>> {
    if delta.is_empty() {
        return Err(Error::domain("delta must not be empty"));
    }
    if !(target < 1.0) {
        return Err(Error::domain("margin target must be below 1"));
    }
    let mut out = vec![2.max(delta[0] + 1)];
    let mut prev_margin = f64::NEG_INFINITY;
    for k in 1..delta.len() {
        let base = 2 * out[k - 1];
        let want = target.max(prev_margin);
        let good = |m: u64| -> Result<bool> {
            let big = base * m;
            Ok(big > delta[k] && 1.0 - coverage_bound(a, big, delta[k])? >= want)
        };
        let mut hi = 1u64;
        while !good(hi)? {
            hi = hi.checked_mul(2).filter(|h| base.checked_mul(*h).is_some()).ok_or_else(|| {
                Error::construction(format!("no Delta at k = {k} reaches margin {want}"))
            })?;
        }
        let mut lo = hi / 2;
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if good(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let big = base * hi;
        prev_margin = 1.0 - coverage_bound(a, big, delta[k])?;
        out.push(big);
    }
    Ok(out)
}

/// One row of the margins table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginRow {
    pub k: usize,
    pub delta: u64,
    #[serde(rename = "Delta")]
    pub big_delta: u64,
    #[serde(rename = "N_l")]
    pub n_l: u64,
    pub margin_direct: f64,
    pub margin_bound: f64,
}

pub fn write_margins_csv<W: Write>(rows: &[MarginRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::domain(format!("csv: {e}")))?;
    }
    w.flush().map_err(|e| Error::domain(format!("csv: {e}")))?;
    Ok(())
}

fn default_target() -> f64 {
    0.9
}
fn default_j0_sample() -> usize {
    64
}
fn default_exhaustive() -> u64 {
    10_000
}
fn default_s_factor() -> u64 {
    8
}
fn default_class_horizon() -> u64 {
    100_000
}
fn default_bad_time_cap() -> u64 {
    1 << 13
}
fn default_oracle_cap() -> u64 {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosAuditConfig {
    pub weight: WeightSpec,
    /// `Δ` is generated when left empty.
    pub params: CPlus1Config,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kmax: Option<usize>,
    #[serde(default = "default_target")]
    pub margin_target: f64,
    #[serde(default = "default_j0_sample")]
    pub j0_sample: usize,
    /// Sweep every `j0 < Δ` up to this block length.
    #[serde(default = "default_exhaustive")]
    pub exhaustive_limit: u64,
    #[serde(default = "default_s_factor")]
    pub s_max_factor: u64,
    #[serde(default = "default_class_horizon")]
    pub class_s_horizon: u64,
    /// Longest block whose bad-time set is enumerated.
    #[serde(default = "default_bad_time_cap")]
    pub bad_time_cap: u64,
    /// Small instance checked against brute-force iteration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_fixture: Option<CPlus1Config>,
    #[serde(default = "default_oracle_cap")]
    pub oracle_cap: u64,
}

impl ChaosAuditConfig {
    pub fn new(weight: WeightSpec, params: CPlus1Config) -> Self {
        ChaosAuditConfig {
            weight,
            params,
            kmax: None,
            margin_target: default_target(),
            j0_sample: default_j0_sample(),
            exhaustive_limit: default_exhaustive(),
            s_max_factor: default_s_factor(),
            class_s_horizon: default_class_horizon(),
            bad_time_cap: default_bad_time_cap(),
            oracle_fixture: None,
            oracle_cap: default_oracle_cap(),
        }
    }
}

/// `j0` values swept for block length `big`.
pub fn j0_sweep(big: u64, sample: usize, exhaustive_limit: u64) -> Vec<u64> {
    if big <= exhaustive_limit {
        (0..big).collect()
    } else {
        let m = sample.max(1) as u128;
        let mut v: Vec<u64> = (0..m)
            .map(|i| ((2 * i + 1) * big as u128 / (2 * m)) as u64)
            .collect();
        v.dedup();
        v
    }
}

/// Test vectors supported on block `l`.
pub fn block_probes(t: &CTypeParams, l: u64) -> Result<Vec<SparseVector>> {
    let b = t.block(l)?;
    let top = b.end() - 1;
    let mid = b.start + b.last_non_unit();
    let full = SparseVector::from_entries(
        (0..b.len).map(|i| (b.start + i, Dyadic::pow2(-((i % 5) as i64)))),
    );
    let signed = SparseVector::from_entries((0..b.len).step_by(3).map(|i| {
        let c = Dyadic::from_int(1 + (i % 7) as i64);
        (b.start + i, if i % 2 == 1 { -c } else { c })
    }));
    Ok(vec![
        SparseVector::basis(b.start),
        SparseVector::basis(mid),
        SparseVector::basis(top),
        full,
        signed,
    ])
}

/// `{j ≤ J : ‖P_l T^j P_l x‖ < X_l / 2}` by iterating `T`.
pub fn brute_bad_set(t: &CTypeParams, x: &SparseVector, l: u64, horizon: u64) -> Result<Vec<u64>> {
    let half = t.x_scale(x, l)?.value.mul_pow2(-1);
    let mut y = t.project(x, l)?;
    let mut out = Vec::new();
    for j in 0..=horizon {
        if t.project(&y, l)?.norm_l1().value < half {
            out.push(j);
        }
        if j < horizon {
            y = t.apply(&y)?;
        }
    }
    Ok(out)
}

fn fact_inclusion(t: &CTypeParams, l: u64, oracle: bool) -> Result<(bool, bool, bool, serde_json::Value)> {
    let b = t.block(l)?;
    let horizon = 2 * b.len;
    let mut cyclic = true;
    let mut strict = true;
    let mut matches = true;
    let mut rows = Vec::new();
    for x in block_probes(t, l)? {
        let r = bad_time_set(t, &x, l, horizon, None)?;
        cyclic &= r.cyclic_inclusion && r.exact;
        strict &= r.strict_inclusion;
        let brute_ok = if oracle {
            let brute = brute_bad_set(t, &x, l, horizon)?;
            let closed: Vec<u64> = r.bad_set.members(0, horizon).collect();
            brute == closed
        } else {
            true
        };
        matches &= brute_ok;
        rows.push(serde_json::json!({
            "support": x.len(),
            "bad_residues": r.bad_residues.len(),
            "j0": r.j0,
            "window_width": r.window_width,
            "cyclic_inclusion": r.cyclic_inclusion,
            "strict_inclusion": r.strict_inclusion,
            "oracle_match": brute_ok,
        }));
    }
    Ok((cyclic, strict, matches, serde_json::Value::Array(rows)))
}

/// Four stages: parameter chain, coverage margins per level, bad-time
/// window inclusion, and margin monotonicity.
pub fn chaos_not_ufhca_audit(cfg: &ChaosAuditConfig) -> Result<AuditReport> {
    let mut report = AuditReport::new("chaos-not-ufhca");
    let a = WeightSequence::from_spec(cfg.weight.clone())?;
    let mut params = cfg.params.clone();
    let generated = params.big_delta.is_empty();
    if generated {
        params.big_delta = generate_big_delta(&a, &params.delta, cfg.margin_target)?;
    }
    let levels = params.delta.len();
    let kmax = cfg.kmax.unwrap_or(levels.saturating_sub(1));
    if kmax == 0 || kmax >= levels || params.big_delta.len() != levels {
        return Err(Error::domain(format!(
            "kmax = {kmax} needs 1 <= kmax < {levels} and {levels} Delta values"
        )));
    }
    let tau = params.tau()?;
    let mut failing = Vec::new();

    let class = class_s_audit(&a, cfg.class_s_horizon, &ClassSConfig::default());
    if !class.passed {
        failing.push("class-s");
    }
    report.absorb("class-s", class);

    let chain = validate_chaos_params(&params.delta, &tau, Some(&params.big_delta), kmax);
    if !chain.passed {
        failing.push("params");
    }
    report.absorb("params", chain);

    let mut rows = Vec::new();
    let mut cells_ok = true;
    let mut worst_cell: Option<Coverage> = None;
    for k in 1..=kmax {
        let (big, n) = (params.big_delta[k], params.delta[k]);
        if n >= big {
            cells_ok = false;
            continue;
        }
        let s_max = big.saturating_mul(cfg.s_max_factor).max(big - n);
        a.ensure(s_max)?;
        let cells: Vec<Coverage> = j0_sweep(big, cfg.j0_sample, cfg.exhaustive_limit)
            .into_par_iter()
            .map(|j0| window_coverage(&a, big, n, j0, s_max))
            .collect::<Result<_>>()?;
        let bound = cells[0].bound;
        let mut max_direct = f64::NEG_INFINITY;
        for c in &cells {
            max_direct = max_direct.max(c.direct);
            if c.direct > c.bound {
                cells_ok = false;
                if worst_cell.is_none_or(|w| c.direct - c.bound > w.direct - w.bound) {
                    worst_cell = Some(*c);
                }
            }
        }
        report.push(
            Check::new(format!("coverage/k={k}"), cells.iter().all(|c| c.direct <= c.bound))
                .value(max_direct)
                .threshold(bound)
                .horizon(s_max)
                .detail(format!("{} values of j0, N = {big}, n = {n}", cells.len())),
        );
        rows.push(MarginRow {
            k,
            delta: n,
            big_delta: big,
            n_l: big - n,
            margin_direct: 1.0 - max_direct,
            margin_bound: 1.0 - bound,
        });
    }
    if !cells_ok {
        failing.push("coverage");
    }

    let mut stage3 = serde_json::Map::new();
    let mut inclusion_ok = true;
    match build_c_plus_1(&params) {
        Ok(t) => {
            for k in 1..=kmax {
                let l = 1u64 << (k - 1);
                if params.big_delta[k] > cfg.bad_time_cap {
                    stage3.insert(format!("k={k}"), serde_json::json!("skipped: block longer than cap"));
                    continue;
                }
                let (cyc, strict, _, rows3) = fact_inclusion(&t, l, false)?;
                inclusion_ok &= cyc;
                report.push(
                    Check::new(format!("window-inclusion/k={k}"), cyc)
                        .horizon(2 * params.big_delta[k])
                        .detail(format!("block {l}; windows with r >= 0 only: {strict}")),
                );
                stage3.insert(format!("k={k}"), rows3);
            }
        }
        Err(e) => {
            inclusion_ok = false;
            report.push(Check::new("window-inclusion", false).detail(e.to_string()));
        }
    }
    if let Some(small) = &cfg.oracle_fixture {
        let t = build_c_plus_1(small)?;
        let mut all = true;
        let mut tested = 0u64;
        for l in 0..t.num_blocks() {
            let b = t.block(l)?;
            if b.len > cfg.oracle_cap {
                continue;
            }
            let (cyc, _, matched, rows3) = fact_inclusion(&t, l, true)?;
            all &= cyc && matched;
            tested += 1;
            stage3.insert(format!("oracle/block={l}"), rows3);
        }
        inclusion_ok &= all;
        report.push(
            Check::new("bad-set-oracle", all && tested > 0)
                .value(tested as f64)
                .detail("closed-form bad sets equal brute-force iteration and fit the windows"),
        );
    }
    if !inclusion_ok {
        failing.push("window-inclusion");
    }

    let direct_mono = rows.windows(2).all(|w| w[1].margin_direct >= w[0].margin_direct);
    let bound_mono = rows.windows(2).all(|w| w[1].margin_bound >= w[0].margin_bound);
    let last = rows.last().map_or(f64::NEG_INFINITY, |r| r.margin_bound);
    report.push(Check::new("margins-non-decreasing", direct_mono && bound_mono).horizon(kmax as u64));
    report.push(
        Check::new("margin-target", last >= cfg.margin_target)
            .value(last)
            .threshold(cfg.margin_target)
            .horizon(kmax as u64),
    );
    if !(direct_mono && bound_mono && last >= cfg.margin_target) {
        failing.push("margins");
    }

    report.data = serde_json::json!({
        "delta": params.delta,
        "Delta": params.big_delta,
        "tau": tau,
        "generated_Delta": generated,
        "margins": rows,
        "worst_cell": worst_cell,
        "window_inclusion": stage3,
        "failing_stages": failing,
    });
    Ok(report)
}

fn default_alphas() -> Vec<f64> {
    vec![0.5, 1.0, 2.0]
}
fn default_eq_horizon() -> u64 {
    1_000_000
}
fn default_chain_tol() -> f64 {
    0.05
}
fn default_banach_tol() -> f64 {
    0.02
}
fn default_prop3_delta() -> f64 {
    0.3
}
fn default_prop3_horizon() -> u64 {
    200_000
}
fn default_min_hits() -> usize {
    8
}
fn default_sparse_kmax() -> usize {
    12
}
fn default_sparse_from() -> u64 {
    7
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalencesConfig {
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_eq_horizon")]
    pub horizon: u64,
    #[serde(default = "default_chain_tol")]
    pub chain_tol: f64,
    #[serde(default = "default_banach_tol")]
    pub banach_tol: f64,
    #[serde(default = "default_prop3_delta")]
    pub prop3_delta: f64,
    #[serde(default = "default_prop3_horizon")]
    pub prop3_horizon: u64,
    #[serde(default = "default_min_hits")]
    pub min_hits: usize,
    #[serde(default = "default_sparse_kmax")]
    pub sparse_kmax: usize,
    /// Separation is checked at interval ends with `k` beyond this.
    #[serde(default = "default_sparse_from")]
    pub sparse_from: u64,
}

impl Default for EquivalencesConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

/// The sparse thick set for `a_n = n` with `ε_k = 2^{−k}`.
pub fn sparse_fixture(kmax: usize) -> Result<crate::forge::SparseThickSet> {
    let a = WeightSequence::power(1.0)?;
    build_sparse_thick_set(&a, &geometric_schedule(0.5, 0.5, 0.0, kmax), 1 << 40)
}

/// Periodic corpus with exact upper Banach densities.
pub fn periodic_corpus() -> Vec<(&'static str, IndexSet, f64)> {
    vec![
        ("evens", IndexSet::evens(), 0.5),
        ("multiples-of-3", IndexSet::multiples_of(3).expect("valid modulus"), 1.0 / 3.0),
        ("mod5-012", IndexSet::periodic(5, &[0, 1, 2]).expect("valid residues"), 0.6),
    ]
}

pub fn equivalences_audit(cfg: &EquivalencesConfig) -> Result<AuditReport> {
    let mut report = AuditReport::new("equivalences");
    let sparse = sparse_fixture(cfg.sparse_kmax)?;
    let mut corpus = periodic_corpus();
    corpus.push(("sparse-thick", sparse.set.clone(), 1.0));
    let plan = SamplePlan::log_spaced(1_000, cfg.horizon, 4)?.with_tail(1_000)?;
    let mut table = Vec::new();
    for &alpha in &cfg.alphas {
        let a = WeightSequence::power(alpha)?;
        for (name, set, bd) in &corpus {
            let d = natural_density_profile(set, &plan).running_max;
            let da = upper_density_profile(&a, set, &plan)?.running_max;
            let lower = d <= da + cfg.chain_tol;
            let upper = da <= (1.0 + alpha) * d + cfg.chain_tol;
            report.push(
                Check::new(format!("chain/alpha={alpha}/{name}"), lower && upper)
                    .value(da)
                    .threshold((1.0 + alpha) * d + cfg.chain_tol)
                    .horizon(cfg.horizon)
                    .detail(format!("natural estimate {d}")),
            );
            report.push(
                Check::new(format!("banach/alpha={alpha}/{name}"), da <= bd + cfg.banach_tol)
                    .value(da)
                    .threshold(bd + cfg.banach_tol)
                    .horizon(cfg.horizon),
            );
            table.push(serde_json::json!({"alpha": alpha, "set": name, "d": d, "d_a": da, "Bd": bd}));
        }
    }

    let sets: Vec<IndexSet> = periodic_corpus().into_iter().map(|(_, s, _)| s).collect();
    let m = sets.len();
    let bw = build_block_weight(
        &BlockWeightInput::new(sets, vec![cfg.prop3_delta; m]),
        cfg.prop3_horizon,
    )?;
    report.absorb("block-weight/class-s", bw.class_audit(&ClassSConfig::default()));
    let floor = cfg.prop3_delta / std::f64::consts::E - cfg.chain_tol;
    for i in 0..m {
        let hits = bw.subsequence_hits(i)?;
        let worst = hits.iter().map(|h| h.ratio).fold(f64::INFINITY, f64::min);
        report.push(
            Check::new(format!("factor-e/set={i}"), hits.len() >= cfg.min_hits && worst >= floor)
                .value(worst)
                .threshold(floor)
                .horizon(bw.horizon)
                .detail(format!("{} subsequence hits", hits.len())),
        );
    }

    let kmax = sparse.kmax();
    let last = sparse.interval_end(kmax);
    let count = banach_window_count(&sparse.set, kmax + 1, last + 1)?;
    report.push(
        Check::new("separation/banach-window", count == kmax + 1)
            .value(count as f64 / (kmax + 1) as f64)
            .threshold(1.0)
            .horizon(last),
    );
    let a1 = WeightSequence::power(1.0)?;
    let checkpoints: Vec<u64> = (cfg.sparse_from + 1..=kmax).map(|k| sparse.interval_end(k)).collect();
    let ratios = restricted_ratios(&a1, &sparse.set, 0, &checkpoints)?;
    let worst = ratios.iter().copied().fold(0.0, f64::max);
    report.push(
        Check::new("separation/weighted-density", worst <= cfg.banach_tol)
            .value(worst)
            .threshold(cfg.banach_tol)
            .horizon(last)
            .detail(format!("{} checkpoints beyond k = {}", checkpoints.len(), cfg.sparse_from)),
    );
    report.data = serde_json::json!({
        "densities": table,
        "k_seq_len": bw.k_seq.len(),
        "sparse_starts": sparse.n_seq,
    });
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_example() {
        let a = WeightSequence::power(1.0).unwrap();
        let b = coverage_bound(&a, 1000, 5).unwrap();
        let mut prod = 1.0;
        for j in 985..=995u64 {
            let j = j as f64;
            prod *= 1.0 + j / (1.0 + j * (j - 1.0) / 2.0);
        }
        let oracle = 2.0 - 2.0 / prod + 11.0 / 1000.0;
        assert!((b - oracle).abs() < 1e-12, "{b} vs {oracle}");
        assert!(b < 0.06);
    }

    #[test]
    fn direct_below_bound() {
        let a = WeightSequence::power(1.0).unwrap();
        for &(big, n) in &[(50u64, 0u64), (50, 3), (200, 10), (64, 40)] {
            for j0 in (0..big).step_by(7) {
                let c = window_coverage(&a, big, n, j0, 8 * big).unwrap();
                assert!(c.direct <= c.bound, "{c:?}");
                assert!(c.direct > 0.0);
            }
        }
    }

    #[test]
    fn direct_matches_scan() {
        let a = WeightSequence::power(2.0).unwrap();
        let (big, n, j0) = (40u64, 3u64, 17u64);
        let s_max = 8 * big;
        let c = window_coverage(&a, big, n, j0, s_max).unwrap();
        let set = IndexSet::explicit(
            (0..=s_max).filter(|&j| j >= j0 && (j - j0) % big <= 2 * n).collect(),
        );
        let hs: Vec<u64> = (big - n..=s_max).collect();
        let r = restricted_ratios(&a, &set, 0, &hs).unwrap();
        let m = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!((m - c.direct).abs() < 1e-12);
    }

    #[test]
    fn sweep_shapes() {
        assert_eq!(j0_sweep(5, 64, 10), vec![0, 1, 2, 3, 4]);
        let s = j0_sweep(1 << 20, 64, 10_000);
        assert_eq!(s.len(), 64);
        assert!(s.windows(2).all(|w| w[0] < w[1]) && *s.last().unwrap() < 1 << 20);
    }
}
