//! Coupling machinery: composed tails `h_n^k`, monotone envelopes, the
//! decomposition weights `α_j`, and the law of the coupling time
//! `S = X_1 + … + X_τ`.
//!
//! The increments follow
//!
//! `P(X_1 ≥ ℓ) = r̂(ℓ - n_0)`,
//! `P(X_{j+1} ≥ ℓ | X_1, …, X_j) = ĥ^{k + X_1 + … + X_{j-1}}_{X_j}(ℓ - n_0)`,
//!
//! with `τ` geometric of parameter `θ` and independent of the `X_j`, and
//! `ĥ(0) = 1` by convention. The conditional law depends on the partial sum
//! before the last step and on the last step, so the exact computation runs
//! over states `(s, x) = (S_j, X_j)`.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partitions::MC_SHARDS;
use crate::rng;
use crate::tail::{parse_tail_csv, TailLabel, TailTable, TABLE_TOL};

/// `K_1`, `K_2` from the expansion data `(K, λ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KConstants {
    pub k1: f64,
    pub k2: f64,
    /// `K = 0`: the strict inequality for `K_2` cannot hold.
    pub degenerate: bool,
}

/// `K_2 = 2K / (1 - 1/λ)`, `K_1 = K + K_2/λ`.
pub fn derive_k_constants(k: f64, lambda: f64) -> Result<KConstants> {
    if !(lambda > 1.0) || !lambda.is_finite() {
        return Err(Error::Param(format!("expansion factor lambda = {lambda} must exceed 1")));
    }
    if !(k >= 0.0) || !k.is_finite() {
        return Err(Error::Param(format!("distortion constant K = {k} must be finite and nonnegative")));
    }
    let k2 = 2.0 * k / (1.0 - 1.0 / lambda);
    Ok(KConstants { k1: k + k2 / lambda, k2, degenerate: k == 0.0 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingConstants {
    pub theta: f64,
    pub n0: usize,
    #[serde(rename = "K")]
    pub k: f64,
    pub lambda: f64,
    #[serde(rename = "K1")]
    pub k1: f64,
    #[serde(rename = "K2")]
    pub k2: f64,
    pub diam_x: f64,
    /// `2 exp(K_2 diam X)`.
    pub c_h: f64,
    pub delta0: f64,
}

impl CouplingConstants {
    pub fn new(theta: f64, n0: usize, k: f64, lambda: f64, diam_x: f64, delta0: f64) -> Result<Self> {
        if !(theta > 0.0 && theta <= 0.5) {
            return Err(Error::Param(format!("theta = {theta} must lie in (0, 1/2]")));
        }
        if !(diam_x > 0.0) || !diam_x.is_finite() {
            return Err(Error::Param(format!("diam X = {diam_x} must be positive")));
        }
        if !(delta0 > 0.0 && delta0 <= 1.0) {
            return Err(Error::Param(format!("delta0 = {delta0} must lie in (0, 1]")));
        }
        let kc = derive_k_constants(k, lambda)?;
        let c_h = 2.0 * (kc.k2 * diam_x).exp();
        if !c_h.is_finite() {
            return Err(Error::Param(format!("C_h overflows for K2 = {}, diam X = {diam_x}", kc.k2)));
        }
        Ok(CouplingConstants { theta, n0, k, lambda, k1: kc.k1, k2: kc.k2, diam_x, c_h, delta0 })
    }

    /// `K = 0`, `λ = 2`, `diam X = 1`, `δ_0 = 1`, hence `C_h = 2`.
    pub fn synthetic(theta: f64, n0: usize) -> Result<Self> {
        Self::new(theta, n0, 0.0, 2.0, 1.0, 1.0)
    }
}

/// The tails `h^j`, `j ≥ k`.
#[derive(Debug, Clone, PartialEq)]
pub enum HFamily {
    /// The same table for every `j`.
    Uniform(TailTable),
    /// `tables[i]` is `h^{first + i}`.
    Indexed { first: usize, tables: Vec<TailTable> },
}

impl HFamily {
    /// `h^j(m)`, with `h^j(0) = 0` as in the composed sums.
    #[inline]
    pub fn value(&self, j: usize, m: usize) -> Result<f64> {
        if m == 0 {
            return Ok(0.0);
        }
        let t = self.table(j)?;
        t.values()
            .get(m)
            .copied()
            .ok_or_else(|| Error::Horizon(format!("h^{j} is tabulated to depth {}, need {m}", t.n_max())))
    }

    pub fn table(&self, j: usize) -> Result<&TailTable> {
        match self {
            HFamily::Uniform(t) => Ok(t),
            HFamily::Indexed { first, tables } => {
                if j < *first || j - first >= tables.len() {
                    return Err(Error::Horizon(format!(
                        "h^{j} not tabulated (have j = {first}..{})",
                        first + tables.len()
                    )));
                }
                Ok(&tables[j - first])
            }
        }
    }

    /// Largest `J` with `h^{k..=k+J}` all tabulated, and their common depth.
    fn extent(&self, k: usize) -> (usize, usize) {
        match self {
            HFamily::Uniform(t) => (usize::MAX, t.n_max()),
            HFamily::Indexed { first, tables } => {
                if k < *first || k - first >= tables.len() {
                    return (0, 0);
                }
                let rest = &tables[k - first..];
                (rest.len() - 1, rest.iter().map(TailTable::n_max).min().unwrap_or(0))
            }
        }
    }
}

/// Tail data of a coupling model, with the declared polynomial bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct TailFamily {
    pub k: usize,
    pub r: TailTable,
    pub h: HFamily,
    pub beta: f64,
    pub beta_prime: f64,
    pub c_beta: f64,
    pub c_beta_prime: f64,
    /// `theta[i] = Θ_{i+1}`; the last entry extends to all larger `j`, an
    /// empty vector means `Θ ≡ 0`.
    pub theta: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Relative slack when checking declared bounds on tabulated values.
const BOUND_SLACK: f64 = 1e-12;

fn bound(c: f64, beta: f64, n: usize, shift: f64) -> f64 {
    c * (n as f64 - shift).max(1.0).powf(-beta)
}

impl TailFamily {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        k: usize,
        r: TailTable,
        h: HFamily,
        beta: f64,
        beta_prime: f64,
        c_beta: f64,
        c_beta_prime: f64,
        theta: Vec<f64>,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::Param("base index k must be at least 1".into()));
        }
        if !(beta > 1.0) || !(beta_prime > 0.0 && beta_prime <= beta) {
            return Err(Error::Param(format!("need 0 < beta' <= beta and beta > 1, got beta = {beta}, beta' = {beta_prime}")));
        }
        if !(c_beta >= 1.0) || !(c_beta_prime >= 1.0) {
            return Err(Error::Param(format!("need C_beta, C'_beta >= 1, got {c_beta}, {c_beta_prime}")));
        }
        if let Some(&t) = theta.iter().find(|&&t| !(0.0..1.0).contains(&t)) {
            return Err(Error::Param(format!("Theta_j = {t} outside [0, 1)")));
        }
        let mut fam = TailFamily { k, r, h, beta, beta_prime, c_beta, c_beta_prime, theta, warnings: Vec::new() };
        let max_theta = fam.theta.iter().copied().fold(0.0, f64::max);
        if max_theta > 0.2 {
            fam.warnings.push(format!("max Theta_j = {max_theta} exceeds 0.2; the tail bound for S may not apply"));
        }
        fam.verify_bounds()?;
        Ok(fam)
    }

    /// `Θ_j`.
    pub fn theta_at(&self, j: usize) -> f64 {
        match self.theta.len() {
            0 => 0.0,
            len => self.theta[(j.max(1) - 1).min(len - 1)],
        }
    }

    /// `Θ_k* = sup_{j ≥ k} Θ_j`.
    pub fn theta_star(&self) -> f64 {
        if self.theta.is_empty() {
            return 0.0;
        }
        let from = (self.k - 1).min(self.theta.len() - 1);
        self.theta[from..].iter().copied().fold(0.0, f64::max)
    }

    fn verify_bounds(&self) -> Result<()> {
        let shift_k = self.theta_at(self.k) * self.k as f64;
        for (n, &v) in self.r.values().iter().enumerate().skip(1) {
            let b = bound(self.c_beta_prime, self.beta_prime, n, shift_k);
            if v > b * (1.0 + BOUND_SLACK) {
                return Err(Error::Param(format!("r({n}) = {v} exceeds the declared bound {b}")));
            }
        }
        let check = |j: usize, t: &TailTable, shift: f64| -> Result<()> {
            for (n, &v) in t.values().iter().enumerate().skip(1) {
                let b = bound(self.c_beta, self.beta, n, shift);
                if v > b * (1.0 + BOUND_SLACK) {
                    return Err(Error::Param(format!("h^{j}({n}) = {v} exceeds the declared bound {b}")));
                }
            }
            Ok(())
        };
        match &self.h {
            HFamily::Uniform(t) => {
                // the bound is loosest where Θ_j j is largest, so the smallest shift decides
                let depth = t.n_max();
                let shift = (self.k..=self.k + depth)
                    .map(|j| self.theta_at(j) * j as f64)
                    .fold(f64::INFINITY, f64::min);
                check(self.k, t, shift)
            }
            HFamily::Indexed { first, tables } => {
                for (i, t) in tables.iter().enumerate() {
                    let j = first + i;
                    check(j, t, self.theta_at(j) * j as f64)?;
                }
                Ok(())
            }
        }
    }
}

/// `r̂(n) = min{1, r(1), …, r(n)}` for `r[i] = r(i + 1)`; the result holds
/// `r̂(0) = 1, r̂(1), …`.
pub fn hat_envelope(r: &[f64]) -> Result<TailTable> {
    let mut out = Vec::with_capacity(r.len() + 1);
    out.push(1.0);
    let mut run = 1.0f64;
    for (i, &v) in r.iter().enumerate() {
        if !(v >= 0.0) {
            return Err(Error::Param(format!("r({}) = {v} is negative or NaN", i + 1)));
        }
        run = run.min(v);
        out.push(run);
    }
    TailTable::new(TailLabel::R, 1, out)
}

/// Envelope of a table whose entry `n` holds `r(n)`; entry 0 is ignored.
pub fn hat_of(t: &TailTable) -> Result<TailTable> {
    let vals = t.values();
    let hat = hat_envelope(vals.get(1..).unwrap_or(&[]))?;
    TailTable::new(t.label, t.k, hat.values().to_vec())
}

/// `h_n^k` and its envelope `ĥ_n^k` on `ℓ = 0..=horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComposedTail {
    /// `raw[ℓ] = C_h Σ_{i=0}^{n} h^{k+i}(n + ℓ - i)` with `h(0) = 0`.
    pub raw: Vec<f64>,
    pub hat: TailTable,
}

/// `h_n^k(ℓ) = C_h (h^k(n + ℓ) + h^{k+1}(n + ℓ - 1) + … + h^{k+n}(ℓ))`.
pub fn compose_tail(h: &HFamily, c_h: f64, k: usize, n: usize, horizon: usize) -> Result<ComposedTail> {
    let mut raw = Vec::with_capacity(horizon + 1);
    for l in 0..=horizon {
        let mut acc = 0.0;
        for i in 0..=n {
            acc += h.value(k + i, n + l - i)?;
        }
        raw.push(c_h * acc);
    }
    let hat = hat_envelope(&raw[1..])?;
    Ok(ComposedTail { raw, hat: TailTable::new(TailLabel::R, k, hat.values().to_vec())? })
}

/// `α_j = r̂(j - n_0) - r̂(j + 1 - n_0)` for `j = n_0 + 1..=j_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaWeights {
    pub n0: usize,
    /// `alpha[i] = α_{n_0 + 1 + i}`.
    pub alpha: Vec<f64>,
    /// `r̂(j_max + 1 - n_0)`, the mass not assigned to any listed `j`.
    pub residual: f64,
}

impl AlphaWeights {
    pub fn j_max(&self) -> usize {
        self.n0 + self.alpha.len()
    }

    /// `α_j`, zero outside the listed range.
    pub fn get(&self, j: usize) -> f64 {
        if j <= self.n0 {
            return 0.0;
        }
        self.alpha.get(j - self.n0 - 1).copied().unwrap_or(0.0)
    }
}

pub fn alpha_weights(r_hat: &TailTable, n0: usize, j_max: usize) -> Result<AlphaWeights> {
    let r1 = r_hat.get(1)?;
    if (r1 - 1.0).abs() > 1e-12 {
        return Err(Error::NotNormalized(r1));
    }
    if j_max <= n0 {
        return Err(Error::Param(format!("j_max = {j_max} must exceed n0 = {n0}")));
    }
    let last = r_hat.get(j_max + 1 - n0)?;
    let alpha = (n0 + 1..=j_max).map(|j| r_hat[j - n0] - r_hat[j + 1 - n0]).collect();
    Ok(AlphaWeights { n0, alpha, residual: last })
}

/// `2 Σ_{j > n} α_j`, counting the residual mass beyond `j_max`.
pub fn memory_loss_bound(alpha: &AlphaWeights, n: usize) -> f64 {
    let from = if n < alpha.n0 { 0 } else { n - alpha.n0 };
    let tail: f64 = alpha.alpha.iter().skip(from).rev().sum();
    2.0 * (tail + alpha.residual)
}

/// A fully specified law of `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingModel {
    pub constants: CouplingConstants,
    pub k: usize,
    /// `r̂`, with `r̂(0) = 1`.
    pub r_hat: TailTable,
    pub h: HFamily,
    /// Largest `n_max` the tabulated tails support.
    pub horizon: usize,
}

impl CouplingModel {
    pub fn new(constants: CouplingConstants, family: &TailFamily) -> Result<Self> {
        let r_hat = hat_of(&family.r)?;
        let (extent, depth) = family.h.extent(family.k);
        let horizon = r_hat.n_max().min(depth).min(extent);
        Ok(CouplingModel { constants, k: family.k, r_hat, h: family.h.clone(), horizon })
    }

    /// `ĥ^{k+s-x}_x` on `0..=depth`, the conditional tail of the next
    /// increment (shifted by `n_0`) from state `(s, x)`.
    pub fn conditional_tail(&self, s: usize, x: usize, depth: usize) -> Result<TailTable> {
        if x > s {
            return Err(Error::Param(format!("last increment {x} exceeds partial sum {s}")));
        }
        Ok(compose_tail(&self.h, self.constants.c_h, self.k + s - x, x, depth)?.hat)
    }

    fn require_horizon(&self, n_max: usize) -> Result<()> {
        if n_max > self.horizon {
            return Err(Error::Horizon(format!(
                "tails are tabulated to n = {}, the law of S is requested to n = {n_max}",
                self.horizon
            )));
        }
        Ok(())
    }
}

/// Exact `P(S ≥ n)` for `n = 0..=n_max`.
///
/// `w(s, x) = Σ_j P(τ ≥ j, S_j = s, X_j = x)` is propagated in increasing `s`.
/// Every path with `S ≥ n` crosses level `n` in exactly one step, so
/// `P(S ≥ n) = P(X_1 ≥ n) + (1 - θ) Σ_{s < n} w(s, x) P(X' ≥ n - s | s, x)`,
/// a sum of nonnegative terms. There is no truncation in `τ`: all paths that
/// stay below `n_max` are enumerated.
pub fn s_tail_dp(model: &CouplingModel, n_max: usize) -> Result<TailTable> {
    model.require_horizon(n_max)?;
    let CouplingConstants { theta, n0, c_h, .. } = model.constants;
    let k = model.k;
    let keep = 1.0 - theta;

    // diagonal prefix sums: diag[t][i] = Σ_{i' < i} h^{k+i'}(t - i'), i = 0..=t+1,
    // so that h_x^{k+s-x}(m) = C_h (diag[s+m][s+1] - diag[s+m][s-x])
    let mut offset = Vec::with_capacity(n_max + 2);
    let mut size = 0usize;
    for t in 0..=n_max {
        offset.push(size);
        size += t + 2;
    }
    let mut diag = vec![0.0f64; size];
    for t in 0..=n_max {
        let row = &mut diag[offset[t]..offset[t] + t + 2];
        let mut acc = 0.0;
        for i in 0..=t {
            acc += model.h.value(k + i, t - i)?;
            row[i + 1] = acc;
        }
    }
    let composed = |s: usize, x: usize, m: usize| -> f64 {
        let row = offset[s + m];
        (c_h * (diag[row + s + 1] - diag[row + s - x])).max(0.0)
    };

    let mut tail = vec![0.0f64; n_max + 1];
    tail[0] = 1.0;
    // w[s][x], s < n_max, x ≤ s
    let mut w: Vec<Vec<f64>> = (0..n_max).map(|s| vec![0.0; s + 1]).collect();
    let r_hat = model.r_hat.values();
    for (n, t) in tail.iter_mut().enumerate().skip(1) {
        *t += if n <= n0 { 1.0 } else { r_hat[n - n0] };
    }
    for y in n0..n_max {
        w[y][y] += r_hat[y - n0] - r_hat[y + 1 - n0];
    }

    let mut hh = vec![0.0f64; n_max + 2];
    for s in 0..n_max {
        // envelope ĥ on m = 0..=n_max - s
        let depth = n_max - s;
        let fill = |x: usize, hh: &mut [f64]| {
            hh[0] = 1.0;
            let mut run = 1.0f64;
            for m in 1..=depth {
                run = run.min(composed(s, x, m));
                hh[m] = run;
            }
        };
        // states with x > 0 first; x = 0 can only be fed from the same level
        let xs: Vec<usize> = (1..=s).rev().chain(std::iter::once(0)).collect();
        for x in xs {
            if x > 0 && x < n0 {
                continue;
            }
            let mut c = keep * w[s][x];
            if c == 0.0 {
                continue;
            }
            fill(x, &mut hh);
            if x == 0 {
                // n_0 = 0 lets the chain stay at (s, 0); sum the loop in closed form
                let stay = if n0 == 0 { keep * (hh[0] - hh[1]) } else { 0.0 };
                c /= 1.0 - stay;
                w[s][0] /= 1.0 - stay;
            }
            for n in s + 1..=n_max {
                let d = n - s;
                tail[n] += c * if d <= n0 { 1.0 } else { hh[d - n0] };
            }
            for m in 0..depth {
                let y = n0 + m;
                if s + y >= n_max {
                    break;
                }
                if y == 0 {
                    if x > 0 {
                        w[s][0] += c * (hh[0] - hh[1]);
                    }
                    continue;
                }
                w[s + y][y] += c * (hh[m] - hh[m + 1]);
            }
        }
    }
    let vals: Vec<f64> = tail.into_iter().map(|v| v.min(1.0)).collect();
    TailTable::new(TailLabel::STail, k, vals)
}

/// Monte Carlo estimate of `P(S ≥ n)` with binomial standard errors.
///
/// Increments are drawn by inverse transform, scanning `ĥ` from its
/// definition as a direct sum over `h^j`; paths stop once `S ≥ n_max`.
pub fn s_tail_mc(model: &CouplingModel, n_max: usize, samples: usize, seed: u64) -> Result<TailTable> {
    model.require_horizon(n_max)?;
    if samples < 10_000 {
        return Err(Error::Param(format!("at least 10000 samples are required, got {samples}")));
    }
    let CouplingConstants { theta, n0, c_h, .. } = model.constants;
    let k = model.k;
    let r_hat = model.r_hat.values();
    let log_keep = (1.0 - theta).ln();
    let per = samples / MC_SHARDS as usize;
    let extra = samples % MC_SHARDS as usize;

    // the largest m ≤ limit with ĥ(m) > u, with ĥ(m) = min(1, min_{m' ≤ m} f(m'))
    let scan = |u: f64, limit: usize, f: &dyn Fn(usize) -> Result<f64>| -> Result<usize> {
        let mut run = 1.0f64;
        for m in 1..=limit {
            run = run.min(f(m)?);
            if run <= u {
                return Ok(m - 1);
            }
        }
        Ok(limit)
    };

    let hist = (0..MC_SHARDS)
        .into_par_iter()
        .map(|shard| -> Result<Vec<u64>> {
            let mut r = rng::shard_stream(seed, "coupling/s_tail_mc", shard);
            let mut next = move || rng::unit_f64(rand::RngCore::next_u64(&mut r));
            let count = per + usize::from((shard as usize) < extra);
            let mut h = vec![0u64; n_max + 1];
            for _ in 0..count {
                // τ = 1 + ⌊ln U / ln(1 - θ)⌋ with U uniform on (0, 1]
                let u = 1.0 - next();
                let tau = 1.0 + (u.ln() / log_keep).floor();
                let tau = if tau >= usize::MAX as f64 { usize::MAX } else { tau as usize };
                let (mut s, mut x) = (0usize, 0usize);
                for j in 1..=tau {
                    if s >= n_max {
                        break;
                    }
                    let limit = n_max - s - n0.min(n_max - s);
                    let u = next();
                    let m = if j == 1 {
                        scan(u, limit, &|m| Ok(r_hat[m]))?
                    } else {
                        let base = k + s - x;
                        let last = x;
                        scan(u, limit, &|m| {
                            let mut acc = 0.0;
                            for i in 0..=last {
                                acc += model.h.value(base + i, last + m - i)?;
                            }
                            Ok(c_h * acc)
                        })?
                    };
                    x = n0 + m;
                    s += x;
                }
                h[s.min(n_max)] += 1;
            }
            Ok(h)
        })
        .try_reduce(
            || vec![0u64; n_max + 1],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(p, q)| *p += q);
                Ok(a)
            },
        )?;
    let total = samples as f64;
    let mut ge = vec![0u64; n_max + 1];
    let mut acc = 0u64;
    for n in (0..=n_max).rev() {
        acc += hist[n];
        ge[n] = acc;
    }
    let values: Vec<f64> = ge.iter().map(|&c| c as f64 / total).collect();
    let stderr = values.iter().map(|&p| (p * (1.0 - p) / total).sqrt()).collect();
    TailTable::with_stderr(TailLabel::STail, k, values, stderr)
}

/// Outcome of [`check_stail_bound`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StailBound {
    /// `ratio[n] = n^{β'} P(S ≥ n) / (Θ* k + 1)^{β'}`, `ratio[0] = 0`.
    pub ratio: Vec<f64>,
    pub sup_ratio: f64,
    pub argmax_n: usize,
    /// The supremum is attained at `n ≤ n_max / 2`.
    pub plateau: bool,
    /// The ratio does not increase after `argmax_n`.
    pub nonincreasing_after_max: bool,
}

pub fn check_stail_bound(table: &TailTable, beta_prime: f64, theta_star: f64, k: usize) -> StailBound {
    let scale = (theta_star * k as f64 + 1.0).powf(beta_prime);
    let vals = table.values();
    let mut ratio = vec![0.0; vals.len()];
    let (mut sup, mut arg) = (f64::NEG_INFINITY, 0usize);
    for n in 1..vals.len() {
        ratio[n] = (n as f64).powf(beta_prime) * vals[n] / scale;
        if ratio[n] > sup {
            sup = ratio[n];
            arg = n;
        }
    }
    let n_max = table.n_max();
    let nonincreasing = ratio[arg.max(1)..].windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    StailBound {
        ratio,
        sup_ratio: sup.max(0.0),
        argmax_n: arg,
        plateau: arg <= n_max / 2,
        nonincreasing_after_max: nonincreasing,
    }
}

/// Built-in tail families for tests and experiments.
///
/// * `power`: `h^j(m) = min(1, m^{-β})`, `r(m) = min(1, m^{-β'})`.
/// * `shifted`: `h^j(m) = (1 ∨ (m - Θ_j j))^{-β}`, `r(m) = (1 ∨ (m - Θ_k k))^{-β'}`.
/// * `zero`: `h^j ≡ 0`, `r(m) = 0` for `m ≥ 1`, which makes every `X_j = n_0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticForm {
    Power,
    Shifted,
    Zero,
}

impl std::str::FromStr for SyntheticForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "power" => Ok(SyntheticForm::Power),
            "shifted" => Ok(SyntheticForm::Shifted),
            "zero" => Ok(SyntheticForm::Zero),
            other => Err(Error::Config(format!("unknown synthetic tail form '{other}'"))),
        }
    }
}

fn power_table(label: TailLabel, k: usize, beta: f64, shift: f64, depth: usize) -> Result<TailTable> {
    let vals = (0..=depth).map(|m| if m == 0 { 1.0 } else { (m as f64 - shift).max(1.0).powf(-beta) }).collect();
    TailTable::new(label, k, vals)
}

/// `(r, h)` of a synthetic family, tabulated for `j = k..=k+depth` to `depth`.
pub fn synthetic_tails(
    form: SyntheticForm,
    k: usize,
    beta: f64,
    beta_prime: f64,
    theta: &[f64],
    depth: usize,
) -> Result<(TailTable, HFamily)> {
    let theta_at = |j: usize| match theta.len() {
        0 => 0.0,
        len => theta[(j.max(1) - 1).min(len - 1)],
    };
    match form {
        SyntheticForm::Power => Ok((
            power_table(TailLabel::R, k, beta_prime, 0.0, depth)?,
            HFamily::Uniform(power_table(TailLabel::HK, k, beta, 0.0, depth)?),
        )),
        SyntheticForm::Shifted => {
            let r = power_table(TailLabel::R, k, beta_prime, theta_at(k) * k as f64, depth)?;
            let tables = (k..=k + depth)
                .map(|j| power_table(TailLabel::HK, j, beta, theta_at(j) * j as f64, depth))
                .collect::<Result<_>>()?;
            Ok((r, HFamily::Indexed { first: k, tables }))
        }
        SyntheticForm::Zero => {
            let mut r = vec![0.0; depth + 1];
            r[0] = 1.0;
            Ok((TailTable::new(TailLabel::R, k, r.clone())?, HFamily::Uniform(TailTable::new(TailLabel::HK, k, r)?)))
        }
    }
}

fn default_theta() -> f64 {
    0.25
}
fn default_n0() -> usize {
    1
}
fn default_one() -> f64 {
    1.0
}
fn default_k() -> usize {
    1
}
fn default_lambda() -> f64 {
    2.0
}

/// JSON model configuration. Unknown keys are rejected.
///
/// `tails` is `"synthetic:<form>"` or `"file:<path>"` (a tails CSV, used for
/// every `h^j`); `r_tails` optionally gives `r` separately and defaults to
/// `tails`. Relative paths are resolved against the config's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "default_n0")]
    pub n0: usize,
    pub beta: f64,
    pub beta_prime: f64,
    #[serde(rename = "C_beta", default = "default_one")]
    pub c_beta: f64,
    #[serde(rename = "C_beta_prime", default)]
    pub c_beta_prime: Option<f64>,
    #[serde(rename = "Theta", default)]
    pub theta_seq: Vec<f64>,
    pub tails: String,
    #[serde(default)]
    pub r_tails: Option<String>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(rename = "K", default)]
    pub k_const: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(rename = "diam_X", default = "default_one")]
    pub diam_x: f64,
    #[serde(default = "default_one")]
    pub delta0: f64,
}

enum TailSource {
    Synthetic(SyntheticForm),
    File(std::path::PathBuf),
}

fn parse_source(src: &str, dir: &Path) -> Result<TailSource> {
    if let Some(form) = src.strip_prefix("synthetic:") {
        return Ok(TailSource::Synthetic(form.parse()?));
    }
    if let Some(p) = src.strip_prefix("file:") {
        let p = Path::new(p);
        return Ok(TailSource::File(if p.is_absolute() { p.to_path_buf() } else { dir.join(p) }));
    }
    Err(Error::Config(format!("tails must be 'synthetic:<form>' or 'file:<path>', got '{src}'")))
}

fn read_tail_file(path: &Path, label: TailLabel, k: usize) -> Result<TailTable> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let (vals, _) = parse_tail_csv(&text)?;
    TailTable::new(label, k, vals)
}

impl ModelConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("line {}: {e}", e.line())))
    }

    /// The constants, the tail family and the model, with synthetic tails
    /// tabulated to `depth`.
    pub fn build(&self, depth: usize, dir: &Path) -> Result<(TailFamily, CouplingModel)> {
        let constants = CouplingConstants::new(self.theta, self.n0, self.k_const, self.lambda, self.diam_x, self.delta0)?;
        let (r, h) = match parse_source(&self.tails, dir)? {
            TailSource::Synthetic(form) => synthetic_tails(form, self.k, self.beta, self.beta_prime, &self.theta_seq, depth)?,
            TailSource::File(p) => {
                let t = read_tail_file(&p, TailLabel::HK, self.k)?;
                let r = TailTable::new(TailLabel::R, self.k, t.values().to_vec())?;
                (r, HFamily::Uniform(t))
            }
        };
        let r = match &self.r_tails {
            None => r,
            Some(src) => match parse_source(src, dir)? {
                TailSource::Synthetic(form) => {
                    synthetic_tails(form, self.k, self.beta, self.beta_prime, &self.theta_seq, depth)?.0
                }
                TailSource::File(p) => read_tail_file(&p, TailLabel::R, self.k)?,
            },
        };
        let family = TailFamily::new(
            self.k,
            r,
            h,
            self.beta,
            self.beta_prime,
            self.c_beta,
            self.c_beta_prime.unwrap_or(self.c_beta),
            self.theta_seq.clone(),
        )?;
        let mut family = family;
        if constants.k == 0.0 {
            family.warnings.push("K = 0: K1 = K2 = 0 and C_h = 2".into());
        }
        let model = CouplingModel::new(constants, &family)?;
        Ok((family, model))
    }
}

/// Largest z-score between an exact tail and a Monte Carlo estimate from
/// `samples` draws, over `n` in `range` with exact value at least `floor`.
///
/// The standard error is the binomial one at the exact probability,
/// `sqrt(p (1 - p) / samples)`. The plug-in error of the estimate itself
/// collapses when only a handful of samples reach `n`.
pub fn max_z_score(exact: &TailTable, mc: &TailTable, samples: usize, floor: f64) -> f64 {
    let n = exact.len().min(mc.len());
    (0..n)
        .filter(|&i| exact[i] >= floor)
        .map(|i| {
            let p = exact[i];
            let se = (p * (1.0 - p) / samples as f64).sqrt();
            let d = (p - mc[i]).abs();
            if se > 0.0 {
                d / se
            } else if d <= 1e-15 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max)
}

/// Check that a tail table is nonincreasing within [`TABLE_TOL`].
pub fn is_nonincreasing(t: &[f64]) -> bool {
    t.windows(2).all(|w| w[1] <= w[0] + TABLE_TOL)
}
