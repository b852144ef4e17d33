//! C-type operators `T_{v,w,φ,b}` on finitely supported vectors.
//!
//! Basis indices are grouped into blocks `[b_n, b_{n+1})`. Inside a block `T`
//! is a weighted forward shift; the top of block `n` is sent to
//! `v_n e_{b_φ(n)} − (Π_{j=b_n+1}^{b_{n+1}−1} w_j)^{−1} e_{b_n}` (just the second
//! term for `n = 0`). All weights are signed powers of two, so every
//! coefficient stays an exact dyadic rational.
//!
//! Mass that leaves block `l` only reaches blocks `< l`, so the compression
//! `P_l T P_l` is a signed weighted cyclic shift of period dividing `2·len`,
//! and `‖P_l T^j P_l x‖` has a closed form that never iterates.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dyadic::{Dyadic, Rounded, MAX_MANTISSA_BITS};
use crate::error::{Error, Result};
use crate::index_set::IndexSet;
use crate::report::{AuditReport, Check};
use crate::sparse::SparseVector;

/// How `τ⁽ᵏ⁾` is obtained.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TauRule {
    /// `τ⁽ᵏ⁾ = δ⁽ᵏ⁾ / 2`, which must be an integer for `k ≥ 1`.
    HalfDelta,
    Explicit(Vec<u64>),
}

/// Level data `(δ⁽ᵏ⁾, Δ⁽ᵏ⁾, τ⁽ᵏ⁾)` for `k = 0..=K`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CPlus1Config {
    pub delta: Vec<u64>,
    #[serde(rename = "Delta", default)]
    pub big_delta: Vec<u64>,
    pub tau_rule: TauRule,
}

impl CPlus1Config {
    /// Resolved `τ`; entry 0 is never used by the operator.
    pub fn tau(&self) -> Result<Vec<u64>> {
        match &self.tau_rule {
            TauRule::HalfDelta => {
                if let Some(k) = (1..self.delta.len()).find(|&k| self.delta[k] % 2 == 1) {
                    return Err(Error::construction(format!(
                        "tau = delta/2 is not an integer at k = {k} (delta = {})",
                        self.delta[k]
                    )));
                }
                Ok(self.delta.iter().map(|d| d / 2).collect())
            }
            TauRule::Explicit(t) => {
                if t.len() != self.delta.len() {
                    return Err(Error::construction(format!(
                        "{} tau values for {} levels",
                        t.len(),
                        self.delta.len()
                    )));
                }
                Ok(t.clone())
            }
        }
    }
}

/// One block of an explicitly listed operator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplicitBlock {
    pub len: u64,
    /// `w_{b_n+1}, …, w_{b_n+len−1}`.
    pub weights: Vec<Dyadic>,
    /// Ignored for block 0.
    pub v: Dyadic,
    pub phi: u64,
}

/// JSON form of [`CTypeParams`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ParamsSpec {
    Explicit { blocks: Vec<ExplicitBlock> },
    CPlus1(CPlus1Config),
}

#[derive(Debug, Clone)]
enum Repr {
    Explicit {
        blocks: Vec<ExplicitBlock>,
        starts: Vec<u64>,
        prefix: Vec<Arc<[Dyadic]>>,
    },
    CPlus1 {
        cfg: CPlus1Config,
        tau: Vec<u64>,
        /// `level_start[k] = b_{2^{k−1}}` for `k ≥ 1`, `level_start[0] = 0`.
        level_start: Vec<u64>,
    },
}

/// Parameters `(v, w, φ, b)` of a C-type operator with finitely many blocks.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "ParamsSpec", into = "ParamsSpec")]
pub struct CTypeParams {
    repr: Repr,
}

impl PartialEq for CTypeParams {
    fn eq(&self, other: &Self) -> bool {
        self.spec() == other.spec()
    }
}

impl TryFrom<ParamsSpec> for CTypeParams {
    type Error = Error;

    fn try_from(spec: ParamsSpec) -> Result<Self> {
        match spec {
            ParamsSpec::Explicit { blocks } => CTypeParams::explicit(blocks),
            ParamsSpec::CPlus1(cfg) => build_c_plus_1(&cfg),
        }
    }
}

impl From<CTypeParams> for ParamsSpec {
    fn from(p: CTypeParams) -> Self {
        p.spec()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    /// `w_i = 2` for `1 ≤ i ≤ δ`, `1` after.
    TwoValued { delta: u64 },
    Explicit {
        weights: Vec<Dyadic>,
        /// `prefix[r] = Π_{i=1}^{r} w_i`.
        prefix: Arc<[Dyadic]>,
    },
}

/// One block `[start, start + len)` with its data.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub index: u64,
    pub start: u64,
    pub len: u64,
    pub v: Dyadic,
    pub phi: u64,
    shape: Shape,
}

/// `±2^{−e}` for `±2^e`.
fn inverse_pow2(d: Dyadic) -> Dyadic {
    debug_assert!(d.is_signed_power_of_two());
    let one = Dyadic::pow2(-d.exponent());
    if d.is_negative() {
        -one
    } else {
        one
    }
}

impl Block {
    pub fn end(&self) -> u64 {
        self.start + self.len
    }

    /// `w_{start+i}` for `1 ≤ i < len`.
    pub fn weight(&self, i: u64) -> Dyadic {
        debug_assert!(i >= 1 && i < self.len);
        match &self.shape {
            Shape::TwoValued { delta } => Dyadic::from_int(if i <= *delta { 2 } else { 1 }),
            Shape::Explicit { weights, .. } => weights[i as usize - 1],
        }
    }

    /// `W(r) = Π_{i=1}^{r} w_{start+i}`, `W(0) = 1`.
    pub fn prefix(&self, r: u64) -> Dyadic {
        debug_assert!(r < self.len);
        match &self.shape {
            Shape::TwoValued { delta } => Dyadic::pow2(r.min(*delta) as i64),
            Shape::Explicit { prefix, .. } => prefix[r as usize],
        }
    }

    /// `Π_{j=b_n+1}^{b_{n+1}−1} w_j`.
    pub fn product(&self) -> Dyadic {
        self.prefix(self.len - 1)
    }

    /// Last `i` with `|w_{start+i}| ≠ 1`, or 0 when there is none.
    pub fn last_non_unit(&self) -> u64 {
        match &self.shape {
            Shape::TwoValued { delta } => (*delta).min(self.len - 1),
            Shape::Explicit { weights, .. } => weights
                .iter()
                .rposition(|w| w.abs() != Dyadic::from_int(1))
                .map_or(0, |i| i as u64 + 1),
        }
    }

    /// `C^j e_{start+i} = sign · factor · e_{start+r}` for the compression
    /// `C = P_n T P_n`; returns `(r, signed factor)`.
    pub fn cycle_image(&self, i: u64, j: u64) -> (u64, Dyadic) {
        let len = self.len as u128;
        let t = i as u128 + j as u128;
        let q = t / len;
        let r = (t % len) as u64;
        let ratio = self.prefix(r) * inverse_pow2(self.prefix(i));
        (r, if q % 2 == 1 { -ratio } else { ratio })
    }
}

fn level_of(n: u64) -> usize {
    (64 - n.leading_zeros()) as usize
}

impl CTypeParams {
    pub fn explicit(blocks: Vec<ExplicitBlock>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::construction("at least one block is required"));
        }
        let mut starts = Vec::with_capacity(blocks.len() + 1);
        let mut prefix = Vec::with_capacity(blocks.len());
        let mut b = 0u64;
        for (n, blk) in blocks.iter().enumerate() {
            if blk.len == 0 {
                return Err(Error::construction(format!("block {n} is empty")));
            }
            if blk.weights.len() as u64 != blk.len - 1 {
                return Err(Error::construction(format!(
                    "block {n} has length {} but {} weights (need len - 1)",
                    blk.len,
                    blk.weights.len()
                )));
            }
            if let Some(i) = blk.weights.iter().position(|w| !w.is_signed_power_of_two()) {
                return Err(Error::construction(format!(
                    "weight {} of block {n} is not a signed power of two",
                    i + 1
                )));
            }
            if n == 0 {
                if blk.phi != 0 {
                    return Err(Error::construction("phi(0) must be 0"));
                }
            } else {
                if blk.phi >= n as u64 {
                    return Err(Error::construction(format!("phi({n}) = {} is not below {n}", blk.phi)));
                }
                if blk.v.is_zero() {
                    return Err(Error::construction(format!("v_{n} must be non-zero")));
                }
                let target = blocks[blk.phi as usize].len;
                if blk.len % (2 * target) != 0 {
                    return Err(Error::construction(format!(
                        "block {n}: length {} is not a multiple of 2 * {target}",
                        blk.len
                    )));
                }
            }
            let mut p = vec![Dyadic::from_int(1)];
            for w in &blk.weights {
                let last = *p.last().unwrap();
                p.push(last * *w);
            }
            prefix.push(Arc::from(p));
            starts.push(b);
            b = b
                .checked_add(blk.len)
                .ok_or_else(|| Error::construction("block starts overflow u64"))?;
        }
        starts.push(b);
        Ok(CTypeParams {
            repr: Repr::Explicit {
                blocks,
                starts,
                prefix,
            },
        })
    }

    pub fn spec(&self) -> ParamsSpec {
        match &self.repr {
            Repr::Explicit { blocks, .. } => ParamsSpec::Explicit {
                blocks: blocks.clone(),
            },
            Repr::CPlus1 { cfg, .. } => ParamsSpec::CPlus1(cfg.clone()),
        }
    }

    pub fn c_plus_1_config(&self) -> Option<&CPlus1Config> {
        match &self.repr {
            Repr::CPlus1 { cfg, .. } => Some(cfg),
            _ => None,
        }
    }

    pub fn num_blocks(&self) -> u64 {
        match &self.repr {
            Repr::Explicit { blocks, .. } => blocks.len() as u64,
            Repr::CPlus1 { cfg, .. } => 1u64 << (cfg.delta.len() - 1),
        }
    }

    /// `b_{num_blocks}`: indices at or above this are outside the model.
    pub fn dimension(&self) -> u64 {
        match &self.repr {
            Repr::Explicit { starts, .. } => *starts.last().unwrap(),
            Repr::CPlus1 {
                cfg, level_start, ..
            } => {
                let k = cfg.delta.len() - 1;
                if k == 0 {
                    cfg.big_delta[0]
                } else {
                    level_start[k] + (1u64 << (k - 1)) * cfg.big_delta[k]
                }
            }
        }
    }

    /// Level `k` of block `n` for generated parameters.
    pub fn level(&self, n: u64) -> Option<usize> {
        match &self.repr {
            Repr::CPlus1 { .. } => Some(level_of(n)),
            _ => None,
        }
    }

    pub fn block(&self, n: u64) -> Result<Block> {
        if n >= self.num_blocks() {
            return Err(Error::domain(format!(
                "block {n} is outside the {} modelled blocks",
                self.num_blocks()
            )));
        }
        Ok(match &self.repr {
            Repr::Explicit {
                blocks,
                starts,
                prefix,
            } => {
                let blk = &blocks[n as usize];
                Block {
                    index: n,
                    start: starts[n as usize],
                    len: blk.len,
                    v: if n == 0 { Dyadic::default() } else { blk.v },
                    phi: blk.phi,
                    shape: Shape::Explicit {
                        weights: blk.weights.clone(),
                        prefix: prefix[n as usize].clone(),
                    },
                }
            }
            Repr::CPlus1 {
                cfg,
                tau,
                level_start,
            } => {
                let k = level_of(n);
                let (start, phi) = if k == 0 {
                    (0, 0)
                } else {
                    let first = 1u64 << (k - 1);
                    (level_start[k] + (n - first) * cfg.big_delta[k], n - first)
                };
                Block {
                    index: n,
                    start,
                    len: cfg.big_delta[k],
                    v: if k == 0 {
                        Dyadic::default()
                    } else {
                        Dyadic::pow2(-(tau[k] as i64))
                    },
                    phi,
                    shape: Shape::TwoValued {
                        delta: cfg.delta[k],
                    },
                }
            }
        })
    }

    /// The block containing basis index `idx`.
    pub fn block_of(&self, idx: u64) -> Result<Block> {
        if idx >= self.dimension() {
            return Err(Error::domain(format!(
                "basis index {idx} lies beyond the last modelled block (dimension {})",
                self.dimension()
            )));
        }
        let n = match &self.repr {
            Repr::Explicit { starts, .. } => starts.partition_point(|&s| s <= idx) as u64 - 1,
            Repr::CPlus1 {
                cfg, level_start, ..
            } => {
                if idx < cfg.big_delta[0] {
                    0
                } else {
                    let k = level_start.partition_point(|&s| s <= idx) - 1;
                    (1u64 << (k - 1)) + (idx - level_start[k]) / cfg.big_delta[k]
                }
            }
        };
        self.block(n)
    }

    /// `T x`.
    pub fn apply(&self, x: &SparseVector) -> Result<SparseVector> {
        let mut out = SparseVector::new();
        if x.is_approximate() {
            out.mark_approximate();
        }
        let mut cur: Option<Block> = None;
        for (k, c) in x.iter() {
            if cur.as_ref().is_none_or(|b| k >= b.end()) {
                cur = Some(self.block_of(k)?);
            }
            let b = cur.as_ref().unwrap();
            let i = k - b.start;
            if i + 1 < b.len {
                out.add_at(k + 1, c * b.weight(i + 1));
            } else {
                if b.index > 0 {
                    let target = self.block(b.phi)?.start;
                    let r = c.mul_capped(&b.v, MAX_MANTISSA_BITS);
                    if !r.exact {
                        out.mark_approximate();
                    }
                    out.add_at(target, r.value);
                }
                out.add_at(b.start, -(c * inverse_pow2(b.product())));
            }
        }
        Ok(out)
    }

    /// Blocks touched by `x` and everything they can reach under `φ`.
    pub fn phi_closure(&self, x: &SparseVector) -> Result<BTreeSet<u64>> {
        let mut seen = BTreeSet::new();
        let mut cur: Option<Block> = None;
        for k in x.support() {
            if cur.as_ref().is_none_or(|b| k >= b.end()) {
                cur = Some(self.block_of(k)?);
            }
            let mut n = cur.as_ref().unwrap().index;
            while seen.insert(n) && n > 0 {
                n = self.block(n)?.phi;
            }
        }
        Ok(seen)
    }

    /// `T^j x`. Panics if the support ever leaves the `φ`-closure of the
    /// blocks touched by `x`.
    pub fn iterate(&self, x: &SparseVector, j: u64) -> Result<SparseVector> {
        let closure = self.phi_closure(x)?;
        let mut y = x.clone();
        for _ in 0..j {
            y = self.apply(&y)?;
            for k in y.support() {
                let n = self.block_of(k)?.index;
                assert!(
                    closure.contains(&n),
                    "support reached block {n} outside the phi-closure of the start vector"
                );
            }
        }
        Ok(y)
    }

    /// `P_n x`.
    pub fn project(&self, x: &SparseVector, n: u64) -> Result<SparseVector> {
        let b = self.block(n)?;
        Ok(x.restrict(b.start, b.end()))
    }

    /// `‖P_l T^j P_l x‖₁` in time linear in the support of `P_l x`.
    pub fn block_cycle_norm(&self, l: u64, x: &SparseVector, j: u64) -> Result<Rounded> {
        let b = self.block(l)?;
        let mut exact = !x.is_approximate();
        let mut acc = Dyadic::default();
        for (k, c) in x.restrict(b.start, b.end()).iter() {
            let (_, f) = b.cycle_image(k - b.start, j);
            let r = acc.add_capped(&(c * f).abs(), MAX_MANTISSA_BITS);
            exact &= r.exact;
            acc = r.value;
        }
        Ok(Rounded { value: acc, exact })
    }

    /// `X_l = ‖Σ_k (Π_{s=k+1}^{b_{l+1}−1} w_s) x_k e_k‖₁` over block `l`.
    pub fn x_scale(&self, x: &SparseVector, l: u64) -> Result<Rounded> {
        let b = self.block(l)?;
        let p = b.product();
        let mut exact = !x.is_approximate();
        let mut acc = Dyadic::default();
        for (k, c) in x.restrict(b.start, b.end()).iter() {
            let tail = p * inverse_pow2(b.prefix(k - b.start));
            let r = acc.add_capped(&(c * tail).abs(), MAX_MANTISSA_BITS);
            exact &= r.exact;
            acc = r.value;
        }
        Ok(Rounded { value: acc, exact })
    }

    /// Structural checks on the evaluated range.
    pub fn validate(&self) -> AuditReport {
        let mut report = AuditReport::new("ctype-params");
        let nb = self.num_blocks();
        let mut phi_ok = true;
        let mut multiple_ok = true;
        let mut v_sum = 0.0f64;
        let mut min_product = f64::INFINITY;
        let mut preimages = vec![0u64; nb as usize];
        for n in 0..nb {
            let Ok(b) = self.block(n) else {
                phi_ok = false;
                continue;
            };
            min_product = min_product.min(b.product().abs().to_f64());
            if n == 0 {
                phi_ok &= b.phi == 0;
                continue;
            }
            phi_ok &= b.phi < n;
            preimages[b.phi as usize] += 1;
            v_sum += b.v.abs().to_f64();
            if let Ok(t) = self.block(b.phi) {
                multiple_ok &= b.len % (2 * t.len) == 0;
            }
        }
        report.push(Check::new("phi-below", phi_ok).horizon(nb));
        report.push(Check::new("block-multiple", multiple_ok).horizon(nb));
        report.push(
            Check::new("v-summable", v_sum.is_finite())
                .value(v_sum)
                .horizon(nb)
                .detail("sum of |v_n| over modelled blocks"),
        );
        report.push(
            Check::new("block-product-bounded-below", min_product > 0.0)
                .value(min_product)
                .horizon(nb),
        );
        let lonely = (1..nb / 2).filter(|&n| preimages[n as usize] == 0).count();
        report.push(
            Check::new("phi-preimages", lonely == 0)
                .value(lonely as f64)
                .horizon(nb)
                .detail("blocks n in [1, N/2) with empty phi-preimage inside the modelled range"),
        );
        report
    }
}

/// `C₊,₁` parameters: level `k` covers blocks `n ∈ [2^{k−1}, 2^k)` with
/// `v_n = 2^{−τ⁽ᵏ⁾}`, length `Δ⁽ᵏ⁾`, weight `2` on the first `δ⁽ᵏ⁾` positions
/// and `φ(n) = n − 2^{k−1}`. Block 0 uses the level-0 data.
pub fn build_c_plus_1(cfg: &CPlus1Config) -> Result<CTypeParams> {
    let levels = cfg.delta.len();
    if levels == 0 {
        return Err(Error::construction("at least one level is required"));
    }
    if cfg.big_delta.len() != levels {
        return Err(Error::construction(format!(
            "{levels} delta values but {} Delta values",
            cfg.big_delta.len()
        )));
    }
    if levels > 40 {
        return Err(Error::construction("more than 40 levels would need 2^39 blocks"));
    }
    let tau = cfg.tau()?;
    for k in 0..levels {
        if cfg.delta[k] >= cfg.big_delta[k] {
            return Err(Error::construction(format!(
                "delta must be below Delta at k = {k} ({} >= {})",
                cfg.delta[k], cfg.big_delta[k]
            )));
        }
        for j in 0..k {
            if cfg.big_delta[k] % (2 * cfg.big_delta[j]) != 0 {
                return Err(Error::construction(format!(
                    "Delta at k = {k} ({}) is not a multiple of 2 * Delta at j = {j} ({})",
                    cfg.big_delta[k], cfg.big_delta[j]
                )));
            }
        }
    }
    let mut level_start = vec![0u64; levels];
    if levels > 1 {
        level_start[1] = cfg.big_delta[0];
        for k in 2..levels {
            let span = (1u64 << (k - 2))
                .checked_mul(cfg.big_delta[k - 1])
                .and_then(|s| s.checked_add(level_start[k - 1]))
                .ok_or_else(|| Error::construction(format!("block starts overflow at k = {k}")))?;
            level_start[k] = span;
        }
        let k = levels - 1;
        (1u64 << (k - 1))
            .checked_mul(cfg.big_delta[k])
            .and_then(|s| s.checked_add(level_start[k]))
            .ok_or_else(|| Error::construction("dimension overflows u64"))?;
    }
    Ok(CTypeParams {
        repr: Repr::CPlus1 {
            cfg: cfg.clone(),
            tau,
            level_start,
        },
    })
}

/// Bad times `{j ≤ J : ‖P_l T^j P_l x‖ < threshold}` and the window
/// structure they must fit in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BadTimeReport {
    pub block: u64,
    /// Block length `L`; the bad set is `L`-periodic.
    pub period: u64,
    pub x_scale: Dyadic,
    pub threshold: Dyadic,
    pub horizon: u64,
    pub bad_residues: Vec<u64>,
    pub bad_set: IndexSet,
    /// `k_0`: last position with a non-unit weight.
    pub k0: u64,
    /// `k_1 = L`.
    pub k1: u64,
    /// `2 (L − (k_1 − k_0))`.
    pub window_width: u64,
    pub j0: Option<u64>,
    /// Every bad residue lies in the cyclic arc `[j0, j0 + width] mod L`,
    /// i.e. the windows `[rL + j0, rL + j0 + width]` for `r ∈ ℤ` cover the bad set.
    pub cyclic_inclusion: bool,
    /// Same with `r ≥ 0` only.
    pub strict_inclusion: bool,
    pub exact: bool,
}

/// Largest block length the bad-time scan will enumerate.
pub const BAD_TIME_PERIOD_CAP: u64 = 1 << 22;

pub fn bad_time_set(
    t: &CTypeParams,
    x: &SparseVector,
    l: u64,
    horizon: u64,
    threshold: Option<Dyadic>,
) -> Result<BadTimeReport> {
    let b = t.block(l)?;
    if b.len > BAD_TIME_PERIOD_CAP {
        return Err(Error::Resource {
            what: format!("bad-time scan of block {l}"),
            cap: BAD_TIME_PERIOD_CAP,
            achieved: b.len as f64,
        });
    }
    let xs = t.x_scale(x, l)?;
    let threshold = threshold.unwrap_or(xs.value.mul_pow2(-1));
    let mut exact = xs.exact;
    let mut residues = Vec::new();
    for j in 0..b.len {
        let n = t.block_cycle_norm(l, x, j)?;
        exact &= n.exact;
        if n.value < threshold {
            residues.push(j);
        }
    }
    let period = b.len;
    let bad: Vec<u64> = (0..=horizon)
        .filter(|j| residues.binary_search(&(j % period)).is_ok())
        .collect();
    let k0 = b.last_non_unit();
    let k1 = period;
    let width = 2 * (period - (k1 - k0));
    let j0 = match residues.len() {
        0 => Some(0),
        m => {
            let mut best = (residues[0] + period - residues[m - 1], 0usize);
            for i in 1..m {
                best = best.max((residues[i] - residues[i - 1], i));
            }
            let start = residues[best.1];
            residues
                .iter()
                .all(|&r| (r + period - start) % period <= width)
                .then_some(start)
        }
    };
    let (cyclic, strict) = match j0 {
        Some(s) => (
            true,
            bad.iter().all(|&j| j >= s && (j - s) % period <= width),
        ),
        None => (false, false),
    };
    Ok(BadTimeReport {
        block: l,
        period,
        x_scale: xs.value,
        threshold,
        horizon,
        bad_residues: residues,
        bad_set: IndexSet::explicit(bad),
        k0,
        k1,
        window_width: width,
        j0,
        cyclic_inclusion: cyclic,
        strict_inclusion: strict,
        exact,
    })
}

/// `C = 1/4`, `β_l = 4 · 2^{δ⁽ᵏ⁻¹⁾ − τ⁽ᵏ⁾}`, `N_l = Δ⁽ᵏ⁾ − δ⁽ᵏ⁾` for
/// `l ∈ [2^{k−1}, 2^k)`, with `p = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditScales {
    pub l: u64,
    pub level: usize,
    pub c: Dyadic,
    pub beta: Dyadic,
    pub n_l: u64,
}

pub fn audit_scales(cfg: &CPlus1Config, l: u64) -> Result<AuditScales> {
    if l == 0 {
        return Err(Error::domain("scales are defined for blocks l >= 1"));
    }
    let k = level_of(l);
    if k >= cfg.delta.len() {
        return Err(Error::domain(format!("block {l} needs level {k}, beyond the data")));
    }
    let tau = cfg.tau()?;
    let e = cfg.delta[k - 1] as i64 - tau[k] as i64;
    Ok(AuditScales {
        l,
        level: k,
        c: Dyadic::pow2(-2),
        beta: Dyadic::pow2(2 + e),
        n_l: cfg.big_delta[k] - cfg.delta[k],
    })
}

/// Parameter-chain checks for `k = 1..=kmax` (`p = 1`).
pub fn validate_chaos_params(
    delta: &[u64],
    tau: &[u64],
    big_delta: Option<&[u64]>,
    kmax: usize,
) -> AuditReport {
    let mut report = AuditReport::new("chaos-params");
    let horizon = kmax as u64;
    if delta.len() < kmax + 1 || tau.len() < kmax + 1 {
        report.push(
            Check::new("lengths", false)
                .horizon(horizon)
                .detail(format!("need {} levels of delta and tau", kmax + 1)),
        );
        return report;
    }
    let d = |k: usize| delta[k] as i128;
    let t = |k: usize| tau[k] as i128;

    let decay_fail = (1..=kmax).find(|&k| 2 * d(k - 1) - d(k) > -8 * k as i128);
    let worst = (1..=kmax)
        .map(|k| 2 * d(k - 1) - d(k) + 8 * k as i128)
        .max()
        .unwrap_or(0);
    report.push(
        Check::new("level-gap-decay", decay_fail.is_none())
            .value(worst as f64)
            .threshold(0.0)
            .horizon(horizon)
            .detail(match decay_fail {
                Some(k) => format!("2^(delta_(k-1) - delta_k / 2) > 4^(-2k) at k = {k}"),
                None => "max over k of 2 delta_(k-1) - delta_k + 8k".into(),
            }),
    );

    let half_gap = |k: usize| d(k) - 2 * d(k - 1);
    let hg_fail = (2..=kmax).find(|&k| half_gap(k) <= half_gap(k - 1));
    report.push(
        Check::new("half-gap-increasing", hg_fail.is_none())
            .horizon(horizon)
            .detail(hg_fail.map_or(String::new(), |k| format!("fails at k = {k}"))),
    );

    let tau_fail = (1..=kmax).find(|&k| 2 * t(k) != d(k));
    report.push(
        Check::new("tau-half-delta", tau_fail.is_none())
            .horizon(horizon)
            .detail(tau_fail.map_or(String::new(), |k| format!("2 tau != delta at k = {k}"))),
    );

    let from = kmax.div_ceil(2).max(1);
    let ratio = (from..=kmax)
        .filter(|&k| delta[k] > 0)
        .map(|k| tau[k] as f64 / delta[k] as f64)
        .fold(0.0f64, f64::max);
    report.push(
        Check::new("tau-ratio-below-one", ratio < 1.0)
            .value(ratio)
            .threshold(1.0)
            .horizon(horizon)
            .detail(format!("max of tau/delta over k in [{from}, {kmax}]")),
    );

    let exps: Vec<i128> = (1..=kmax).map(|k| d(k - 1) - t(k)).collect();
    let (sum, within) = if exps.iter().all(|e| e % 2 == 0) {
        let mut acc = Dyadic::default();
        let mut exact = true;
        for (i, e) in exps.iter().enumerate() {
            let term = Dyadic::pow2((i as i128 + 1 + e / 2) as i64);
            let r = acc.add_capped(&term, MAX_MANTISSA_BITS);
            exact &= r.exact;
            acc = r.value;
        }
        let within = if exact {
            acc <= Dyadic::from_int(1)
        } else {
            acc.to_f64() <= 1.0
        };
        (acc.to_f64(), within)
    } else {
        let s: f64 = exps
            .iter()
            .enumerate()
            .map(|(i, &e)| 2f64.powf(i as f64 + 1.0 + e as f64 / 2.0))
            .sum();
        (s, s <= 1.0)
    };
    report.push(
        Check::new("summability", within)
            .value(sum)
            .threshold(1.0)
            .horizon(horizon)
            .detail("sum over k of 2^k 2^((delta_(k-1) - tau_k) / 2)"),
    );

    let mono_fail = (2..=kmax).find(|&k| exps[k - 1] > exps[k - 2]);
    report.push(
        Check::new("beta-non-increasing", mono_fail.is_none())
            .horizon(horizon)
            .detail(mono_fail.map_or(String::new(), |k| {
                format!("2^(delta_(k-1) - tau_k) increases at k = {k}")
            })),
    );

    let chaos_fail = (2..=kmax).find(|&k| d(k) - t(k) <= d(k - 1) - t(k - 1));
    let last_gap = d(kmax) - t(kmax);
    report.push(
        Check::new(
            "chaos-proxy",
            chaos_fail.is_none() && (kmax < 1 || last_gap > 0),
        )
        .value(last_gap as f64)
        .horizon(horizon)
        .detail(match chaos_fail {
            Some(k) => format!("delta - tau does not increase at k = {k}"),
            None => "delta - tau strictly increasing".into(),
        }),
    );

    if let Some(bd) = big_delta {
        let mut msg = String::new();
        let mut ok = bd.len() > kmax;
        if ok {
            'outer: for k in 0..=kmax {
                if delta[k] >= bd[k] {
                    ok = false;
                    msg = format!("delta >= Delta at k = {k}");
                    break;
                }
                for j in 0..k {
                    if bd[k] % (2 * bd[j]) != 0 {
                        ok = false;
                        msg = format!("Delta at k = {k} is not a multiple of 2 Delta at j = {j}");
                        break 'outer;
                    }
                }
            }
        } else {
            msg = format!("need {} Delta values", kmax + 1);
        }
        report.push(Check::new("block-multiple", ok).horizon(horizon).detail(msg));
    } else {
        report.warn("Delta not supplied; block-multiple condition not checked");
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(delta: &[u64], big: &[u64]) -> CPlus1Config {
        CPlus1Config {
            delta: delta.to_vec(),
            big_delta: big.to_vec(),
            tau_rule: TauRule::Explicit(vec![1; delta.len()]),
        }
    }

    #[test]
    fn two_level_layout() {
        let t = build_c_plus_1(&cfg(&[1, 2], &[2, 8])).unwrap();
        assert_eq!(t.num_blocks(), 2);
        let starts: Vec<u64> = (0..2).map(|n| t.block(n).unwrap().start).collect();
        assert_eq!(starts, vec![0, 2]);
        assert_eq!(t.dimension(), 10);
        let b1 = t.block(1).unwrap();
        let w: Vec<i64> = (1..8).map(|i| b1.weight(i).to_f64() as i64).collect();
        assert_eq!(w, vec![2, 2, 1, 1, 1, 1, 1]);
    }

    #[test]
    fn three_level_phi() {
        let t = build_c_plus_1(&cfg(&[1, 2, 3], &[2, 8, 16])).unwrap();
        assert_eq!(t.block(2).unwrap().phi, 0);
        assert_eq!(t.block(3).unwrap().phi, 1);
        assert_eq!(t.block(3).unwrap().start, 2 + 8 + 16);
        assert_eq!(t.block_of(27).unwrap().index, 3);
        assert!(t.block_of(t.dimension()).is_err());
    }

    #[test]
    fn multiple_condition_names_k() {
        let err = build_c_plus_1(&cfg(&[1, 2, 3], &[2, 8, 12])).unwrap_err();
        assert!(err.to_string().contains("k = 2"), "{err}");
        assert!(build_c_plus_1(&cfg(&[2], &[2])).is_err());
    }

    #[test]
    fn apply_cases() {
        let t = build_c_plus_1(&cfg(&[1, 2], &[2, 8])).unwrap();
        // top of block 0: -(w_1)^{-1} e_0 with w_1 = 2
        let y = t.apply(&SparseVector::basis(1)).unwrap();
        assert_eq!(y, SparseVector::from_entries([(0, Dyadic::new(-1, -1))]));
        // interior start of block 1
        let y = t.apply(&SparseVector::basis(2)).unwrap();
        assert_eq!(y, SparseVector::from_entries([(3, Dyadic::from_int(2))]));
        // top of block 1: v_1 e_0 - 2^{-2} e_2
        let y = t.apply(&SparseVector::basis(9)).unwrap();
        assert_eq!(
            y,
            SparseVector::from_entries([(0, Dyadic::pow2(-1)), (2, Dyadic::new(-1, -2))])
        );
        assert!(t.apply(&SparseVector::new()).unwrap().is_zero());
    }

    #[test]
    fn block_zero_has_period_twice_its_length() {
        let t = build_c_plus_1(&cfg(&[1, 2], &[2, 8])).unwrap();
        let e0 = SparseVector::basis(0);
        assert_eq!(t.iterate(&e0, 4).unwrap(), e0);
        assert_ne!(t.iterate(&e0, 2).unwrap(), e0);
    }

    #[test]
    fn closed_form_matches_iteration() {
        let t = build_c_plus_1(&cfg(&[1, 2, 3], &[2, 8, 16])).unwrap();
        let x = SparseVector::from_entries([
            (10, Dyadic::from_int(3)),
            (13, Dyadic::new(-5, -2)),
            (25, Dyadic::from_int(1)),
        ]);
        for j in 0..64 {
            let brute = t.project(&t.iterate(&t.project(&x, 2).unwrap(), j).unwrap(), 2).unwrap();
            assert_eq!(t.block_cycle_norm(2, &x, j).unwrap().value, brute.norm_l1().value, "j = {j}");
        }
    }

    #[test]
    fn x_scale_cases() {
        let t = build_c_plus_1(&cfg(&[1, 2], &[2, 8])).unwrap();
        assert_eq!(t.x_scale(&SparseVector::basis(2), 1).unwrap().value, Dyadic::from_int(4));
        assert_eq!(t.x_scale(&SparseVector::basis(9), 1).unwrap().value, Dyadic::from_int(1));
        assert!(t.x_scale(&SparseVector::basis(0), 1).unwrap().value.is_zero());
    }

    #[test]
    fn chain_example_passes() {
        let mut delta = vec![1u64];
        for k in 1..=6 {
            delta.push(2 * delta[k - 1] + 8 * k as u64);
        }
        assert_eq!(delta, vec![1, 10, 36, 96, 224, 488, 1024]);
        let tau: Vec<u64> = delta.iter().map(|d| d / 2).collect();
        let r = validate_chaos_params(&delta, &tau, None, 6);
        assert!(r.passed, "{r:#?}");
        let s = r.check("summability").unwrap().value.unwrap();
        assert_eq!(s, 1.0 - 2f64.powi(-6));
        let r = validate_chaos_params(&delta, &delta, None, 6);
        assert!(!r.check("chaos-proxy").unwrap().passed);
    }

    #[test]
    fn params_json() {
        let text = r#"{"kind":"c-plus1","delta":[1,2],"Delta":[2,8],"tau_rule":{"explicit":[1,1]}}"#;
        let p: CTypeParams = serde_json::from_str(text).unwrap();
        assert_eq!(p.dimension(), 10);
        let half: CPlus1Config =
            serde_json::from_str(r#"{"delta":[1,10],"Delta":[2,16],"tau_rule":"half-delta"}"#).unwrap();
        assert_eq!(half.tau().unwrap(), vec![0, 5]);
    }
}
