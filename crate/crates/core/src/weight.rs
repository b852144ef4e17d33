//! Positive weight sequences `a = (a_n)` with cached prefix sums.
//!
//! Three storage modes back a [`WeightSequence`]:
//!
//! * unit weights need no table at all;
//! * closed-form polynomial-size weights keep `a_n` and a compensated prefix
//!   sum `S_n` in plain `f64`;
//! * fast-growing weights keep `v_n = a_n / S_{n-1}` and `ln S_n`, so nothing
//!   overflows however large `S_n` becomes.
//!
//! Tables are filled on demand and shared between clones.

use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tables never grow past this many entries.
pub const DEFAULT_TABLE_CAP: u64 = 1 << 25;

/// Power weights with exponents above this are stored in log form.
const LINEAR_POWER_LIMIT: f64 = 16.0;

/// JSON description of a [`WeightSequence`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WeightSpec {
    /// `a_n = 1`.
    ConstantOne,
    /// `a_0 = 1`, `a_n = n^alpha` for `n ≥ 1`.
    Power { alpha: f64 },
    /// `a_0 = 1` and `a_j = S_{j-1} / p` for `j ∈ [k_p, k_{p+1})`, with
    /// `k_seq = (k_1, k_2, …)`. Indices below `k_1` use `p = 1`; indices past
    /// the last listed `k_p` keep the last `p`.
    BlockRecursive { k_seq: Vec<u64> },
    /// `a_n = ratio^n`.
    Geometric { ratio: f64 },
    /// Explicit finite table `a_0, …, a_{len-1}`.
    Tabulated { values: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Unit,
    Linear,
    Log,
}

#[derive(Debug, Clone)]
struct Tables {
    mode: Mode,
    /// `a_n` (linear mode).
    a: Vec<f64>,
    /// `S_n` (linear mode).
    s: Vec<f64>,
    /// Kahan compensation carried from the last prefix sum.
    s_comp: f64,
    /// `v_n`, with `v[0]` unused (log mode).
    v: Vec<f64>,
    /// `ln S_n` (log mode).
    log_s: Vec<f64>,
}

impl Tables {
    fn len(&self) -> u64 {
        match self.mode {
            Mode::Unit => u64::MAX,
            Mode::Linear => self.a.len() as u64,
            Mode::Log => self.log_s.len() as u64,
        }
    }
}

/// `v_n(a)` at a given index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VRatio {
    pub n: u64,
    pub value: f64,
}

/// A positive weight sequence.
#[derive(Debug, Serialize, Deserialize)]
#[serde(try_from = "WeightSpec", into = "WeightSpec")]
pub struct WeightSequence {
    spec: WeightSpec,
    cap: u64,
    tables: RwLock<Arc<Tables>>,
}

impl Clone for WeightSequence {
    fn clone(&self) -> Self {
        WeightSequence {
            spec: self.spec.clone(),
            cap: self.cap,
            tables: RwLock::new(self.snapshot()),
        }
    }
}

impl PartialEq for WeightSequence {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

impl TryFrom<WeightSpec> for WeightSequence {
    type Error = Error;

    fn try_from(spec: WeightSpec) -> Result<Self> {
        WeightSequence::from_spec(spec)
    }
}

impl From<WeightSequence> for WeightSpec {
    fn from(w: WeightSequence) -> Self {
        w.spec
    }
}

fn kahan_add(sum: f64, comp: f64, x: f64) -> (f64, f64) {
    let y = x - comp;
    let t = sum + y;
    (t, (t - sum) - y)
}

impl WeightSequence {
    pub fn from_spec(spec: WeightSpec) -> Result<Self> {
        let mode = match &spec {
            WeightSpec::ConstantOne => Mode::Unit,
            WeightSpec::Power { alpha } => {
                if !(alpha.is_finite() && *alpha > 0.0) {
                    return Err(Error::domain(format!(
                        "power weight needs a finite exponent alpha > 0, got {alpha}"
                    )));
                }
                if *alpha <= LINEAR_POWER_LIMIT {
                    Mode::Linear
                } else {
                    Mode::Log
                }
            }
            WeightSpec::BlockRecursive { k_seq } => {
                if k_seq.is_empty() || k_seq[0] == 0 {
                    return Err(Error::domain("block-recursive weight needs k_1 >= 1"));
                }
                if k_seq.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::domain("k_seq must be strictly increasing"));
                }
                Mode::Log
            }
            WeightSpec::Geometric { ratio } => {
                if !(ratio.is_finite() && *ratio > 0.0) {
                    return Err(Error::domain(format!(
                        "geometric weight needs a finite ratio > 0, got {ratio}"
                    )));
                }
                if *ratio == 1.0 {
                    Mode::Unit
                } else {
                    Mode::Log
                }
            }
            WeightSpec::Tabulated { values } => {
                if values.is_empty() {
                    return Err(Error::domain("tabulated weight needs at least one value"));
                }
                if let Some(i) = values.iter().position(|x| !(x.is_finite() && *x > 0.0)) {
                    return Err(Error::domain(format!(
                        "tabulated weight must be finite and positive; index {i} is {}",
                        values[i]
                    )));
                }
                Mode::Linear
            }
        };
        let tables = Tables {
            mode,
            a: Vec::new(),
            s: Vec::new(),
            s_comp: 0.0,
            v: Vec::new(),
            log_s: Vec::new(),
        };
        Ok(WeightSequence {
            spec,
            cap: DEFAULT_TABLE_CAP,
            tables: RwLock::new(Arc::new(tables)),
        })
    }

    pub fn constant_one() -> Self {
        WeightSequence::from_spec(WeightSpec::ConstantOne).expect("always valid")
    }

    pub fn power(alpha: f64) -> Result<Self> {
        WeightSequence::from_spec(WeightSpec::Power { alpha })
    }

    pub fn geometric(ratio: f64) -> Result<Self> {
        WeightSequence::from_spec(WeightSpec::Geometric { ratio })
    }

    pub fn tabulated(values: Vec<f64>) -> Result<Self> {
        WeightSequence::from_spec(WeightSpec::Tabulated { values })
    }

    pub fn block_recursive(k_seq: Vec<u64>) -> Result<Self> {
        WeightSequence::from_spec(WeightSpec::BlockRecursive { k_seq })
    }

    /// Change the table size cap (default [`DEFAULT_TABLE_CAP`]).
    pub fn with_table_cap(mut self, cap: u64) -> Self {
        self.cap = cap;
        self
    }

    pub fn spec(&self) -> &WeightSpec {
        &self.spec
    }

    pub fn kind_name(&self) -> &'static str {
        match self.spec {
            WeightSpec::ConstantOne => "constant-one",
            WeightSpec::Power { .. } => "power",
            WeightSpec::BlockRecursive { .. } => "block-recursive",
            WeightSpec::Geometric { .. } => "geometric",
            WeightSpec::Tabulated { .. } => "tabulated",
        }
    }

    /// Largest index at which the sequence is defined, if finite.
    pub fn last_index(&self) -> Option<u64> {
        match &self.spec {
            WeightSpec::Tabulated { values } => Some(values.len() as u64 - 1),
            _ => None,
        }
    }

    fn snapshot(&self) -> Arc<Tables> {
        self.tables.read().expect("weight table lock").clone()
    }

    /// Tables covering at least `[0, n]`.
    fn tables_to(&self, n: u64) -> Result<Arc<Tables>> {
        let current = self.snapshot();
        if current.len() > n {
            return Ok(current);
        }
        if let Some(last) = self.last_index() {
            if n > last {
                return Err(Error::domain(format!(
                    "tabulated weight is defined on [0, {last}], index {n} requested"
                )));
            }
        }
        if n >= self.cap {
            return Err(Error::Resource {
                what: format!("weight table for index {n}"),
                cap: self.cap,
                achieved: current.len() as f64,
            });
        }
        let mut guard = self.tables.write().expect("weight table lock");
        if guard.len() > n {
            return Ok(guard.clone());
        }
        let target = (n + 1)
            .max(guard.len().saturating_mul(2))
            .max(1024)
            .min(self.cap)
            .min(self.last_index().map_or(u64::MAX, |l| l + 1));
        let mut next = (**guard).clone();
        self.extend(&mut next, target);
        *guard = Arc::new(next);
        Ok(guard.clone())
    }

    fn extend(&self, t: &mut Tables, target: u64) {
        let target = target as usize;
        match t.mode {
            Mode::Unit => {}
            Mode::Linear => {
                t.a.reserve(target - t.a.len());
                t.s.reserve(target - t.s.len());
                for n in t.a.len()..target {
                    let a = self.linear_weight(n as u64);
                    let (sum, comp) = match t.s.last() {
                        None => (a, 0.0),
                        Some(&prev) => kahan_add(prev, t.s_comp, a),
                    };
                    t.a.push(a);
                    t.s.push(sum);
                    t.s_comp = comp;
                }
            }
            Mode::Log => {
                t.v.reserve(target - t.v.len());
                t.log_s.reserve(target - t.log_s.len());
                if t.log_s.is_empty() {
                    t.v.push(f64::NAN);
                    t.log_s.push(0.0);
                }
                for n in t.log_s.len()..target {
                    let prev = *t.log_s.last().unwrap();
                    let v = self.log_mode_v(n as u64, prev);
                    t.v.push(v);
                    t.log_s.push(prev + v.ln_1p());
                }
            }
        }
    }

    fn linear_weight(&self, n: u64) -> f64 {
        match &self.spec {
            WeightSpec::Power { alpha } => {
                if n == 0 {
                    1.0
                } else {
                    (n as f64).powf(*alpha)
                }
            }
            WeightSpec::Tabulated { values } => values[n as usize],
            _ => 1.0,
        }
    }

    /// `v_n` for log-mode kinds, `n ≥ 1`, given `ln S_{n-1}`. Every log-mode
    /// kind has `a_0 = 1`.
    fn log_mode_v(&self, n: u64, log_s_prev: f64) -> f64 {
        match &self.spec {
            WeightSpec::Power { alpha } => (alpha * (n as f64).ln() - log_s_prev).exp(),
            WeightSpec::BlockRecursive { k_seq } => {
                let p = k_seq.partition_point(|&k| k <= n).max(1);
                1.0 / p as f64
            }
            WeightSpec::Geometric { ratio } => {
                let lr = ratio.ln();
                let x = n as f64 * lr;
                if *ratio > 1.0 {
                    (ratio - 1.0) / -(-x).exp_m1()
                } else {
                    (1.0 - ratio) * x.exp() / -x.exp_m1()
                }
            }
            _ => unreachable!("linear-mode kind in log table"),
        }
    }

    /// Make sure `[0, n]` is evaluable.
    pub fn ensure(&self, n: u64) -> Result<()> {
        self.tables_to(n).map(|_| ())
    }

    /// `a_n`; may be `+inf` for fast-growing kinds, see [`WeightSequence::ln_weight`].
    pub fn weight(&self, n: u64) -> Result<f64> {
        let t = self.tables_to(n)?;
        Ok(match t.mode {
            Mode::Unit => 1.0,
            Mode::Linear => t.a[n as usize],
            Mode::Log => self.ln_weight_in(&t, n).exp(),
        })
    }

    fn ln_weight_in(&self, t: &Tables, n: u64) -> f64 {
        match t.mode {
            Mode::Unit => 0.0,
            Mode::Linear => t.a[n as usize].ln(),
            Mode::Log => {
                if n == 0 {
                    0.0
                } else {
                    t.log_s[n as usize - 1] + t.v[n as usize].ln()
                }
            }
        }
    }

    pub fn ln_weight(&self, n: u64) -> Result<f64> {
        let t = self.tables_to(n)?;
        Ok(self.ln_weight_in(&t, n))
    }

    /// `ln(a_n / a_{n-1})` for `n ≥ 1`, computed without forming either weight.
    pub fn ln_weight_step(&self, n: u64) -> Result<f64> {
        if n == 0 {
            return Err(Error::domain("weight step needs n >= 1"));
        }
        let t = self.tables_to(n)?;
        let i = n as usize;
        Ok(match t.mode {
            Mode::Unit => 0.0,
            Mode::Linear => (t.a[i] / t.a[i - 1]).ln(),
            Mode::Log => {
                if n == 1 {
                    t.v[1].ln()
                } else {
                    t.v[i - 1].ln_1p() + (t.v[i] / t.v[i - 1]).ln()
                }
            }
        })
    }

    /// `S_n = Σ_{j≤n} a_j`; may be `+inf` for fast-growing kinds.
    pub fn prefix_sum(&self, n: u64) -> Result<f64> {
        let t = self.tables_to(n)?;
        Ok(match t.mode {
            Mode::Unit => (n + 1) as f64,
            Mode::Linear => t.s[n as usize],
            Mode::Log => t.log_s[n as usize].exp(),
        })
    }

    /// `ln S_n`.
    pub fn ln_prefix_sum(&self, n: u64) -> Result<f64> {
        let t = self.tables_to(n)?;
        Ok(match t.mode {
            Mode::Unit => ((n + 1) as f64).ln(),
            Mode::Linear => t.s[n as usize].ln(),
            Mode::Log => t.log_s[n as usize],
        })
    }

    /// `v_n(a) = a_n / Σ_{j<n} a_j`.
    pub fn v_ratio(&self, n: u64) -> Result<VRatio> {
        if n == 0 {
            return Err(Error::domain("v_0 is undefined: the denominator is an empty sum"));
        }
        let t = self.tables_to(n)?;
        let i = n as usize;
        let value = match t.mode {
            Mode::Unit => 1.0 / n as f64,
            Mode::Linear => t.a[i] / t.s[i - 1],
            Mode::Log => t.v[i],
        };
        Ok(VRatio { n, value })
    }

    /// `Σ_{j=lo}^{hi} a_j / S_s` for `lo ≤ hi ≤ s`.
    pub fn mass_ratio(&self, lo: u64, hi: u64, s: u64) -> Result<f64> {
        if lo > hi {
            return Ok(0.0);
        }
        debug_assert!(hi <= s);
        let t = self.tables_to(s)?;
        Ok(match t.mode {
            Mode::Unit => (hi - lo + 1) as f64 / (s + 1) as f64,
            Mode::Linear => {
                let total = t.s[s as usize];
                if hi - lo < 64 {
                    t.a[lo as usize..=hi as usize].iter().sum::<f64>() / total
                } else {
                    let below = if lo == 0 { 0.0 } else { t.s[lo as usize - 1] };
                    (t.s[hi as usize] - below) / total
                }
            }
            Mode::Log => {
                let top = t.log_s[hi as usize] - t.log_s[s as usize];
                if lo == 0 {
                    top.exp()
                } else {
                    let gap = t.log_s[lo as usize - 1] - t.log_s[hi as usize];
                    top.exp() * -gap.exp_m1()
                }
            }
        })
    }

    /// Incremental scan of `Σ_{j=start}^{N} a_j 1_A(j) / S_N` for
    /// `N = start, start+1, …, end`.
    pub fn scan(&self, start: u64, end: u64) -> Result<RatioScan> {
        let tables = self.tables_to(end)?;
        Ok(RatioScan {
            tables,
            next: start,
            end,
            count: 0,
            num: 0.0,
            comp: 0.0,
            ratio: 0.0,
        })
    }
}

/// State of a weighted counting ratio scan; see [`WeightSequence::scan`].
#[derive(Debug, Clone)]
pub struct RatioScan {
    tables: Arc<Tables>,
    next: u64,
    end: u64,
    count: u64,
    num: f64,
    comp: f64,
    ratio: f64,
}

impl RatioScan {
    /// Index the next [`RatioScan::push`] will account for.
    pub fn next_index(&self) -> u64 {
        self.next
    }

    /// Feed membership of the next index and return the updated ratio.
    pub fn push(&mut self, member: bool) -> f64 {
        assert!(self.next <= self.end, "scan ran past its evaluated range");
        let n = self.next as usize;
        let t = &self.tables;
        self.ratio = match t.mode {
            Mode::Unit => {
                self.count += member as u64;
                self.count as f64 / (n + 1) as f64
            }
            Mode::Linear => {
                if member {
                    let (s, c) = kahan_add(self.num, self.comp, t.a[n]);
                    self.num = s;
                    self.comp = c;
                }
                self.num / t.s[n]
            }
            Mode::Log => {
                if n == 0 {
                    member as u64 as f64
                } else {
                    let v = t.v[n];
                    let add = if member { v } else { 0.0 };
                    (self.ratio + add) / (1.0 + v)
                }
            }
        };
        self.next += 1;
        self.ratio
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn v_ratio_small_cases() {
        let one = WeightSequence::constant_one();
        assert_eq!(one.v_ratio(5).unwrap().value, 1.0 / 5.0);
        let lin = WeightSequence::power(1.0).unwrap();
        assert!(close(lin.v_ratio(4).unwrap().value, 4.0 / 7.0, 1e-15));
        assert!(close(lin.v_ratio(10).unwrap().value, 10.0 / 46.0, 1e-15));
        let sq = WeightSequence::power(2.0).unwrap();
        assert!(close(sq.v_ratio(2).unwrap().value, 2.0, 1e-15));
        assert_eq!(one.v_ratio(1).unwrap().value, 1.0);
        assert!(matches!(one.v_ratio(0), Err(Error::Domain(_))));
    }

    #[test]
    fn log_mode_power_matches_linear_mode() {
        let lin = WeightSequence::power(3.0).unwrap();
        assert_eq!(lin.tables_to(0).unwrap().mode, Mode::Linear);
        let log = WeightSequence::power(17.0).unwrap();
        assert_eq!(log.tables_to(0).unwrap().mode, Mode::Log);
        for n in [1, 2, 10, 500] {
            let direct: f64 = (1..=n).map(|j: u64| (j as f64).powi(17)).sum::<f64>() + 1.0;
            assert!(close(log.prefix_sum(n).unwrap(), direct, 1e-11), "n = {n}");
        }
    }

    #[test]
    fn block_recursive_has_exact_v() {
        let w = WeightSequence::block_recursive(vec![2, 5, 9, 14]).unwrap();
        let expect = [(1, 1.0), (2, 1.0), (4, 1.0), (5, 0.5), (8, 0.5), (9, 1.0 / 3.0), (20, 0.25)];
        for (n, v) in expect {
            assert_eq!(w.v_ratio(n).unwrap().value, v, "n = {n}");
        }
        for n in [5u64, 9, 14] {
            assert!(w.ln_weight_step(n).unwrap().abs() < 1e-14);
        }
        assert!(close(w.ln_weight_step(7).unwrap(), 1.5f64.ln(), 1e-14));
    }

    #[test]
    fn geometric_prefix_sums() {
        let g = WeightSequence::geometric(2.0).unwrap();
        assert!(close(g.prefix_sum(10).unwrap(), 2047.0, 1e-13));
        assert!(close(g.v_ratio(10).unwrap().value, 1024.0 / 1023.0, 1e-13));
        let h = WeightSequence::geometric(0.5).unwrap();
        assert!(close(h.prefix_sum(3).unwrap(), 1.875, 1e-13));
    }

    #[test]
    fn scan_three_modes() {
        let evens = |j: u64| j % 2 == 0;
        for w in [
            WeightSequence::constant_one(),
            WeightSequence::power(1.0).unwrap(),
            WeightSequence::power(20.0).unwrap(),
            WeightSequence::geometric(1.5).unwrap(),
        ] {
            let mut scan = w.scan(0, 40).unwrap();
            for n in 0..=40u64 {
                let r = scan.push(evens(n));
                let num: f64 = (0..=n).filter(|&j| evens(j)).map(|j| w.weight(j).unwrap()).sum();
                assert!(close(r, num / w.prefix_sum(n).unwrap(), 1e-12), "{} at {n}", w.kind_name());
            }
        }
    }

    #[test]
    fn mass_ratio_agrees_with_direct_sum() {
        for w in [
            WeightSequence::power(1.0).unwrap(),
            WeightSequence::block_recursive(vec![1, 3, 6, 10, 15]).unwrap(),
        ] {
            let total = w.prefix_sum(300).unwrap();
            for (lo, hi) in [(0, 0), (3, 9), (0, 250), (100, 300)] {
                let direct: f64 = (lo..=hi).map(|j| w.weight(j).unwrap()).sum();
                assert!(close(w.mass_ratio(lo, hi, 300).unwrap(), direct / total, 1e-11));
            }
        }
    }

    #[test]
    fn tabulated_bounds_and_cap() {
        let t = WeightSequence::tabulated(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(t.prefix_sum(2).unwrap(), 6.0);
        assert!(t.weight(3).is_err());
        assert!(WeightSequence::tabulated(vec![1.0, 0.0]).is_err());
        let capped = WeightSequence::power(1.0).unwrap().with_table_cap(100);
        assert!(matches!(capped.weight(100), Err(Error::Resource { .. })));
    }

    #[test]
    fn json_round_trip() {
        let w = WeightSequence::power(0.5).unwrap();
        let text = serde_json::to_string(&w).unwrap();
        assert_eq!(text, r#"{"kind":"power","alpha":0.5}"#);
        let back: WeightSequence = serde_json::from_str(&text).unwrap();
        assert_eq!(back, w);
        assert!(serde_json::from_str::<WeightSequence>(r#"{"kind":"power","alpha":-1}"#).is_err());
    }
}
