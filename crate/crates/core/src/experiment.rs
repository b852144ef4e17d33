//! Serializable experiment descriptions and their runners.
//!
//! Every experiment is deterministic: the same [`ExperimentConfig`] always
//! produces the same report apart from the timestamp.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::audit::{
    chaos_not_ufhca_audit, equivalences_audit, write_margins_csv, ChaosAuditConfig,
    EquivalencesConfig, MarginRow,
};
use crate::ctype::{validate_chaos_params, CTypeParams, TauRule, CPlus1Config, build_c_plus_1};
use crate::density::{
    banach_window_count, natural_density_profile, upper_density_profile, ClassSConfig, SamplePlan,
};
use crate::error::{Error, Result};
use crate::forge::{
    build_block_weight, build_sparse_thick_set, geometric_schedule, shift_demo_vector,
    BlockWeightInput,
};
use crate::furstenberg::{family_member, FamilySpec};
use crate::index_set::IndexSet;
use crate::report::{AuditReport, Check};
use crate::sparse::SparseVector;
use crate::weight::{WeightSequence, WeightSpec};

/// Horizons as an explicit list or a log-spaced range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Horizons {
    List(Vec<u64>),
    LogSpaced { lo: u64, hi: u64, per_decade: u32 },
}

impl Default for Horizons {
    fn default() -> Self {
        Horizons::LogSpaced {
            lo: 1_000,
            hi: 1_000_000,
            per_decade: 4,
        }
    }
}

impl Horizons {
    pub fn plan(&self, tail_start: Option<u64>) -> Result<SamplePlan> {
        let plan = match self {
            Horizons::List(v) => SamplePlan::new(v.clone())?,
            Horizons::LogSpaced { lo, hi, per_decade } => SamplePlan::log_spaced(*lo, *hi, *per_decade)?,
        };
        let tail = tail_start.unwrap_or(plan.horizons()[0]);
        plan.with_tail(tail)
    }
}

fn power_one() -> WeightSpec {
    WeightSpec::Power { alpha: 1.0 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityConfig {
    #[serde(default = "power_one")]
    pub weight: WeightSpec,
    pub set: IndexSet,
    #[serde(default)]
    pub horizons: Horizons,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_start: Option<u64>,
    /// Also estimate the upper Banach density with this window length.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub banach_window: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limsup_at_most: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limsup_at_least: Option<f64>,
}

fn default_prop3_horizon() -> u64 {
    200_000
}
fn default_min_hits() -> usize {
    8
}
fn default_tolerance() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildProp3Config {
    pub input: BlockWeightInput,
    #[serde(default = "default_prop3_horizon")]
    pub horizon: u64,
    #[serde(default = "default_min_hits")]
    pub min_hits: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

/// `ε_k = first · ratio^(k−1)`, floored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsSchedule {
    pub first: f64,
    pub ratio: f64,
    #[serde(default)]
    pub floor: f64,
}

impl Default for EpsSchedule {
    fn default() -> Self {
        EpsSchedule {
            first: 0.5,
            ratio: 0.5,
            floor: 0.0,
        }
    }
}

fn default_kmax() -> usize {
    12
}
fn default_index_cap() -> u64 {
    1 << 40
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseSetConfig {
    #[serde(default = "power_one")]
    pub weight: WeightSpec,
    #[serde(default)]
    pub eps: EpsSchedule,
    #[serde(default = "default_kmax")]
    pub kmax: usize,
    /// Largest admissible interval start.
    #[serde(default = "default_index_cap")]
    pub index_cap: u64,
    /// Targets for the doubled backward shift orbit.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub demo_targets: Vec<SparseVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FurstenbergConfig {
    pub family: FamilySpec,
    pub set: IndexSet,
    pub bound: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub params: CTypeParams,
    pub vector: SparseVector,
    pub steps: u64,
    /// Compare `‖P_l T^j P_l x‖` with the closed form along the orbit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block: Option<u64>,
    /// Search for the least `m ≤ bound` with `T^m x = x`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period_bound: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidateParamsConfig {
    pub delta: Vec<u64>,
    pub tau_rule: TauRule,
    #[serde(rename = "Delta", default, skip_serializing_if = "Option::is_none")]
    pub big_delta: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kmax: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum ExperimentConfig {
    Density(DensityConfig),
    BuildProp3(BuildProp3Config),
    SparseSet(SparseSetConfig),
    FurstenbergCheck(FurstenbergConfig),
    CtypeSimulate(SimulateConfig),
    CtypeValidateParams(ValidateParamsConfig),
    ChaosNotUfhca(ChaosAuditConfig),
    Equivalences(EquivalencesConfig),
}

impl ExperimentConfig {
    pub fn command(&self) -> &'static str {
        match self {
            ExperimentConfig::Density(_) => "density",
            ExperimentConfig::BuildProp3(_) => "build-prop3",
            ExperimentConfig::SparseSet(_) => "sparse-set",
            ExperimentConfig::FurstenbergCheck(_) => "furstenberg-check",
            ExperimentConfig::CtypeSimulate(_) => "ctype-simulate",
            ExperimentConfig::CtypeValidateParams(_) => "ctype-validate-params",
            ExperimentConfig::ChaosNotUfhca(_) => "chaos-not-ufhca",
            ExperimentConfig::Equivalences(_) => "equivalences",
        }
    }
}

/// A named CSV table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub csv: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub report: AuditReport,
    pub tables: Vec<Table>,
}

fn csv_table<T: Serialize>(name: &str, rows: &[T]) -> Result<Table> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::domain(format!("csv: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::domain(format!("csv: {e}")))?;
    Ok(Table {
        name: name.into(),
        csv: String::from_utf8(bytes).expect("csv output is utf-8"),
    })
}

/// Runs an experiment. The report carries the SHA-256 of the config's
/// canonical JSON and a timestamp.
pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    let started = Instant::now();
    let mut out = match cfg {
        ExperimentConfig::Density(c) => run_density(c)?,
        ExperimentConfig::BuildProp3(c) => run_build_prop3(c)?,
        ExperimentConfig::SparseSet(c) => run_sparse_set(c)?,
        ExperimentConfig::FurstenbergCheck(c) => run_furstenberg(c)?,
        ExperimentConfig::CtypeSimulate(c) => run_simulate(c)?,
        ExperimentConfig::CtypeValidateParams(c) => run_validate(c)?,
        ExperimentConfig::ChaosNotUfhca(c) => {
            let report = chaos_not_ufhca_audit(c)?;
            let rows: Vec<MarginRow> = serde_json::from_value(report.data["margins"].clone())
                .map_err(|e| Error::domain(e.to_string()))?;
            let mut buf = Vec::new();
            write_margins_csv(&rows, &mut buf)?;
            Outcome {
                report,
                tables: vec![Table {
                    name: "margins".into(),
                    csv: String::from_utf8(buf).expect("csv output is utf-8"),
                }],
            }
        }
        ExperimentConfig::Equivalences(c) => Outcome {
            report: equivalences_audit(c)?,
            tables: Vec::new(),
        },
    };
    let canonical = serde_json::to_vec(cfg).map_err(|e| Error::domain(e.to_string()))?;
    out.report = out.report.clone().with_config_hash(&canonical);
    out.report.stamp(started);
    Ok(out)
}

fn run_density(c: &DensityConfig) -> Result<Outcome> {
    let a = WeightSequence::from_spec(c.weight.clone())?;
    let plan = c.horizons.plan(c.tail_start)?;
    let weighted = upper_density_profile(&a, &c.set, &plan)?;
    let natural = natural_density_profile(&c.set, &plan);
    let mut report = AuditReport::new("density");
    let h = plan.max_horizon();
    if let Some(max) = c.limsup_at_most {
        report.push(
            Check::new("limsup-at-most", weighted.running_max <= max)
                .value(weighted.running_max)
                .threshold(max)
                .horizon(h),
        );
    }
    if let Some(min) = c.limsup_at_least {
        report.push(
            Check::new("limsup-at-least", weighted.running_max >= min)
                .value(weighted.running_max)
                .threshold(min)
                .horizon(h),
        );
    }
    let banach = match c.banach_window {
        Some(w) => Some(banach_window_count(&c.set, w, h)? as f64 / w as f64),
        None => None,
    };
    report.data = serde_json::json!({
        "horizon": h,
        "tail_start": plan.tail_start(),
        "weighted": {"limsup": weighted.running_max, "liminf": weighted.running_min, "last": weighted.last().ratio},
        "natural": {"limsup": natural.running_max, "liminf": natural.running_min, "last": natural.last().ratio},
        "banach_window": c.banach_window,
        "banach_estimate": banach,
    });
    let mut buf = Vec::new();
    weighted.write_csv(&mut buf)?;
    Ok(Outcome {
        report,
        tables: vec![Table {
            name: "profile".into(),
            csv: String::from_utf8(buf).expect("csv output is utf-8"),
        }],
    })
}

#[derive(Serialize)]
struct HitRow {
    set: usize,
    p: u64,
    horizon: u64,
    ratio: f64,
}

fn run_build_prop3(c: &BuildProp3Config) -> Result<Outcome> {
    let bw = build_block_weight(&c.input, c.horizon)?;
    let mut report = AuditReport::new("build-prop3");
    report.absorb("class-s", bw.class_audit(&ClassSConfig::default()));
    let mut rows = Vec::new();
    for (i, &delta) in c.input.deltas.iter().enumerate() {
        let hits = bw.subsequence_hits(i)?;
        let floor = delta / std::f64::consts::E - c.tolerance;
        let worst = hits.iter().map(|h| h.ratio).fold(f64::INFINITY, f64::min);
        report.push(
            Check::new(format!("factor-e/set={i}"), hits.len() >= c.min_hits && worst >= floor)
                .value(worst)
                .threshold(floor)
                .horizon(bw.horizon)
                .detail(format!("{} subsequence hits", hits.len())),
        );
        rows.extend(hits.into_iter().map(|h| HitRow {
            set: i,
            p: h.p,
            horizon: h.horizon,
            ratio: h.ratio,
        }));
    }
    report.data = serde_json::json!({ "k_seq": bw.k_seq, "horizon": bw.horizon });
    Ok(Outcome {
        report,
        tables: vec![csv_table("hits", &rows)?],
    })
}

#[derive(Serialize)]
struct IntervalRow {
    k: u64,
    n_k: u64,
    end: u64,
    eps: f64,
    term_one: f64,
    term_two: f64,
}

fn run_sparse_set(c: &SparseSetConfig) -> Result<Outcome> {
    let a = WeightSequence::from_spec(c.weight.clone())?;
    let eps = geometric_schedule(c.eps.first, c.eps.ratio, c.eps.floor, c.kmax);
    let sts = build_sparse_thick_set(&a, &eps, c.index_cap)?;
    let mut report = AuditReport::new("sparse-set");
    let kmax = sts.kmax();
    let last = sts.interval_end(kmax);
    let count = banach_window_count(&sts.set, kmax + 1, last + 1)?;
    report.push(
        Check::new("banach-window", count == kmax + 1)
            .value(count as f64 / (kmax + 1) as f64)
            .threshold(1.0)
            .horizon(last),
    );
    let within = sts
        .term_one
        .iter()
        .zip(&sts.term_two)
        .zip(&eps)
        .all(|((x, y), e)| x <= e && y <= e);
    report.push(Check::new("terms-below-eps", within).horizon(last));
    let mut demo = serde_json::Value::Null;
    if !c.demo_targets.is_empty() {
        let d = shift_demo_vector(&sts, &c.demo_targets)?;
        report.push(Check::new("demo-within-tolerance", d.within_tolerance && d.exact));
        report.push(Check::new("demo-support-inclusion", d.inclusion_holds));
        demo = serde_json::to_value(&d).map_err(|e| Error::domain(e.to_string()))?;
    }
    let rows: Vec<IntervalRow> = (1..=kmax)
        .map(|k| {
            let i = k as usize - 1;
            IntervalRow {
                k,
                n_k: sts.n_seq[i],
                end: sts.interval_end(k),
                eps: eps[i],
                term_one: sts.term_one[i],
                term_two: sts.term_two[i],
            }
        })
        .collect();
    report.data = serde_json::json!({ "n_seq": sts.n_seq, "demo": demo });
    Ok(Outcome {
        report,
        tables: vec![csv_table("intervals", &rows)?],
    })
}

fn run_furstenberg(c: &FurstenbergConfig) -> Result<Outcome> {
    let verdict = family_member(&c.family, &c.set, c.bound)?;
    let mut report = AuditReport::new("furstenberg-check");
    report.push(
        Check::new("membership", verdict.is_yes())
            .horizon(c.bound)
            .threshold(c.family.delta),
    );
    report.data = serde_json::to_value(&verdict).map_err(|e| Error::domain(e.to_string()))?;
    Ok(Outcome {
        report,
        tables: Vec::new(),
    })
}

#[derive(Serialize)]
struct OrbitRow {
    j: u64,
    support: usize,
    l1_norm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    block_norm: Option<f64>,
}

fn run_simulate(c: &SimulateConfig) -> Result<Outcome> {
    let t = &c.params;
    let mut report = AuditReport::new("ctype-simulate");
    report.absorb("params", t.validate());
    let mut y = c.vector.clone();
    let mut local = c.block.map(|l| t.project(&c.vector, l)).transpose()?;
    let mut closed_ok = true;
    let mut rows = Vec::new();
    let mut period = None;
    let steps = c.steps.max(c.period_bound.unwrap_or(0));
    let closure = t.phi_closure(&c.vector)?;
    let mut closure_ok = true;
    for j in 0..=steps {
        if j <= c.steps {
            let block_norm = match (c.block, &local) {
                (Some(l), Some(z)) => {
                    let brute = t.project(z, l)?.norm_l1().value;
                    closed_ok &= t.block_cycle_norm(l, &c.vector, j)?.value == brute;
                    Some(brute.to_f64())
                }
                _ => None,
            };
            rows.push(OrbitRow {
                j,
                support: y.len(),
                l1_norm: y.norm_l1().value.to_f64(),
                block_norm,
            });
        }
        if j > 0 && period.is_none() && c.period_bound.is_some_and(|b| j <= b) && y == c.vector {
            period = Some(j);
        }
        if j == steps {
            break;
        }
        y = t.apply(&y)?;
        for k in y.support() {
            closure_ok &= closure.contains(&t.block_of(k)?.index);
        }
        if let Some(z) = local.as_mut() {
            *z = t.apply(z)?;
        }
    }
    report.push(Check::new("exact", !y.is_approximate()).horizon(steps));
    report.push(Check::new("support-in-phi-closure", closure_ok).horizon(steps));
    if c.block.is_some() {
        report.push(Check::new("closed-form-block-norm", closed_ok).horizon(c.steps));
    }
    if let Some(b) = c.period_bound {
        report.push(
            Check::new("periodic", period.is_some())
                .horizon(b)
                .value(period.map_or(f64::NAN, |p| p as f64)),
        );
    }
    report.data = serde_json::json!({ "period": period, "final": y });
    Ok(Outcome {
        report,
        tables: vec![csv_table("orbit", &rows)?],
    })
}

fn run_validate(c: &ValidateParamsConfig) -> Result<Outcome> {
    let cfg = CPlus1Config {
        delta: c.delta.clone(),
        big_delta: c.big_delta.clone().unwrap_or_default(),
        tau_rule: c.tau_rule.clone(),
    };
    let tau = cfg.tau()?;
    let kmax = c.kmax.unwrap_or(c.delta.len().saturating_sub(1));
    let mut report = validate_chaos_params(&c.delta, &tau, c.big_delta.as_deref(), kmax);
    if c.big_delta.is_some() {
        match build_c_plus_1(&cfg) {
            Ok(t) => report.absorb("operator", t.validate()),
            Err(e) => report.push(Check::new("operator/build", false).detail(e.to_string())),
        }
    }
    report.name = "ctype-validate-params".into();
    report.data = serde_json::json!({ "tau": tau, "kmax": kmax });
    Ok(Outcome {
        report,
        tables: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_set_profile_is_zero() {
        let cfg = ExperimentConfig::Density(DensityConfig {
            weight: power_one(),
            set: IndexSet::empty(),
            horizons: Horizons::List(vec![10, 100]),
            tail_start: None,
            banach_window: None,
            limsup_at_most: Some(0.0),
            limsup_at_least: None,
        });
        let out = run(&cfg).unwrap();
        assert!(out.report.passed);
        assert_eq!(out.tables[0].csv, "horizon,ratio\n10,0.0\n100,0.0\n");
    }

    #[test]
    fn tagged_json() {
        let text = r#"{"command":"ctype-validate-params","delta":[1,10,36],"tau_rule":"half-delta"}"#;
        let cfg: ExperimentConfig = serde_json::from_str(text).unwrap();
        let out = run(&cfg).unwrap();
        assert!(out.report.passed, "{:#?}", out.report);
        assert!(out.report.config_hash.is_some());
    }
}
