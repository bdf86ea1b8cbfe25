//! Return-time partitions of nonstationary compositions and their tails.
//!
//! Every partition is generated by pulling a reference point back through
//! inverse branches. Writing `v_n(k)` for the `n`-fold pullback starting at
//! time `k`, all recursions have the form `v_n(k) = step(T_k, v_{n-1}(k+1))`,
//! so for a general sequence the table is triangular (`O(n_max²)` solves);
//! periodic sequences need only `O(period · n_max)`.
//!
//! Recursions run in coordinates measuring the distance to the neutral fixed
//! point, so tails keep full relative precision even when they are `10⁻¹²`.
//!
//! Reference sets: `Y = [1/2, 1]` for LSV/Cui, `Y_k = (-1/(2γ_k), 1/(2γ_k))` for
//! Pikovsky, `Y = (-1/4, 0)` for the Grossmann–Horner instance.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::{lsv_left_inverse, pikovsky_gap, Family, MapParams};
use crate::rng;
use crate::sequences::ParamSequence;
use crate::tail::{TailLabel, TailTable};

/// Base measure of a return-time tail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailBase {
    /// Normalized Lebesgue measure on the reference set `Y_k`.
    #[serde(rename = "m_k", alias = "mk")]
    Mk,
    /// Normalized Lebesgue measure on the whole state interval.
    Lebesgue,
}

impl std::str::FromStr for TailBase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "m_k" | "mk" => Ok(TailBase::Mk),
            "lebesgue" => Ok(TailBase::Lebesgue),
            other => Err(Error::Param(format!("unknown tail base '{other}'"))),
        }
    }
}

/// The reference set `Y` of the map `params` (an interval, closed or open).
pub fn reference_set(params: &MapParams) -> (f64, f64) {
    match params.family {
        Family::Lsv | Family::Cui => (0.5, 1.0),
        Family::Pikovsky => {
            let c = 1.0 / (2.0 * params.gamma);
            (-c, c)
        }
        Family::GrossmannHorner => (-0.25, 0.0),
    }
}

fn in_reference_set(params: &MapParams, x: f64) -> bool {
    match params.family {
        Family::Lsv | Family::Cui => x >= 0.5,
        Family::Pikovsky => x.abs() < 1.0 / (2.0 * params.gamma),
        Family::GrossmannHorner => x > -0.25 && x <= 0.0,
    }
}

/// Family-specific endpoint arrays, all indexed by `n = 0..=n_max`.
#[derive(Debug, Clone, PartialEq)]
pub enum EndpointData {
    /// `x[n] = x_n(k)`, `y_offset[n] = y_n(k) - 1/2` with `y_0 = y_1 = 1`.
    /// Cells: `[x_{n+1}, x_n]` and `[y_{n+1}, y_n]` for `n ≥ 1`.
    Lsv { x: Vec<f64>, y_offset: Vec<f64> },
    /// `x_plus[n] = x_n⁺(k)`, `gap[n] = 1 - x_n⁺(k)`; `Δ_n⁺ = (x_n⁺, x_{n+1}⁺)`.
    /// `delta_gap[n] = |d_n|` for `n ≥ 1` where `δ_n⁻(k) = (d_n, d_{n+1})`,
    /// `d_1 = -1/(2γ_k)`; `delta_gap[0] = 1`. The left side is the mirror image.
    Pikovsky { x_plus: Vec<f64>, gap: Vec<f64>, delta_gap: Vec<f64> },
    /// `u[n] = 1 + x_n⁻` with `Δ_n⁻ = (x_{n+1}⁻, x_n⁻)` and `Δ_n⁺ = -Δ_n⁻`;
    /// `delta[n] = e_n` with `δ_n⁻ = (e_n, e_{n+1})`, `e_1 = -1/4`;
    /// `delta1[n] = f_n` with `δ_{1,n}⁻ = (f_{n+1}, f_n)`, `f_1 = -9/64`.
    /// Right-hand cells are mirror images. `delta[0]`, `delta1[0]` are unused.
    /// `u` has one extra entry, `u[n_max + 1]`.
    GrossmannHorner { u: Vec<f64>, delta: Vec<f64>, delta1: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionEndpoints {
    pub family: Family,
    pub k: usize,
    /// `Y_k`.
    pub reference: (f64, f64),
    pub data: EndpointData,
}

impl PartitionEndpoints {
    pub fn n_max(&self) -> usize {
        match &self.data {
            EndpointData::Lsv { x, .. } => x.len() - 1,
            EndpointData::Pikovsky { x_plus, .. } => x_plus.len() - 1,
            EndpointData::GrossmannHorner { u, .. } => u.len() - 2,
        }
    }
}

/// `v_n(k)` and `v_n(k+1)` for `n = 0..=n_max`, where `v_0 ≡ v0` and
/// `v_n(j) = step(T_j, v_{n-1}(j+1))`.
fn backward_pair<F>(seq: &ParamSequence, k: usize, n_max: usize, v0: f64, step: F) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: Fn(&MapParams, f64) -> Result<f64> + Sync,
{
    let mut at_k = Vec::with_capacity(n_max + 1);
    let mut at_k1 = Vec::with_capacity(n_max + 1);
    if let Some(p) = seq.period() {
        let params: Vec<MapParams> = (0..p).map(|j| seq.param_at(k + j)).collect::<Result<_>>()?;
        let mut cur = vec![v0; p];
        at_k.push(v0);
        at_k1.push(v0);
        for _ in 1..=n_max {
            cur = (0..p).map(|j| step(&params[j], cur[(j + 1) % p])).collect::<Result<_>>()?;
            at_k.push(cur[0]);
            at_k1.push(cur[1 % p]);
        }
        return Ok((at_k, at_k1));
    }
    // triangular table: level m holds v_m(k + j) for j = 0..=n_max + 1 - m
    let params: Vec<MapParams> = (0..=n_max + 1).map(|j| seq.param_at(k + j)).collect::<Result<_>>()?;
    let mut cur = vec![v0; n_max + 2];
    at_k.push(v0);
    at_k1.push(v0);
    for _ in 1..=n_max {
        let len = cur.len() - 1;
        cur = if len >= 4096 {
            (0..len).into_par_iter().map(|j| step(&params[j], cur[j + 1])).collect::<Result<_>>()?
        } else {
            (0..len).map(|j| step(&params[j], cur[j + 1])).collect::<Result<_>>()?
        };
        at_k.push(cur[0]);
        at_k1.push(cur[1]);
    }
    Ok((at_k, at_k1))
}

fn require_family(seq: &ParamSequence, ok: &[Family], op: &str) -> Result<()> {
    if ok.contains(&seq.family()) {
        Ok(())
    } else {
        Err(Error::Param(format!("{op} does not apply to the {} family", seq.family().name())))
    }
}

/// `x_n(k) = g_k ⋯ g_{k+n-1}(1)` and `y_n(k) = h_k(x_{n-1}(k+1))` for LSV/Cui.
pub fn lsv_preimage_points(seq: &ParamSequence, k: usize, n_max: usize) -> Result<PartitionEndpoints> {
    require_family(seq, &[Family::Lsv, Family::Cui], "lsv_preimage_points")?;
    let (x, x_next) = backward_pair(seq, k, n_max, 1.0, |p, v| lsv_left_inverse(p.gamma, v))?;
    let pk = seq.param_at(k)?;
    // h(v) - 1/2 = v^{1/β} / 2
    let mut y_offset = Vec::with_capacity(n_max + 1);
    y_offset.push(0.5);
    for n in 1..=n_max {
        y_offset.push(0.5 * x_next[n - 1].powf(1.0 / pk.beta));
    }
    Ok(PartitionEndpoints { family: seq.family(), k, reference: reference_set(&pk), data: EndpointData::Lsv { x, y_offset } })
}

/// Pikovsky endpoints `x_n⁺(k) = g_{k,+} ⋯ g_{k+n-1,+}(0)` and the `δ` cells.
pub fn pikovsky_endpoints(seq: &ParamSequence, k: usize, n_max: usize) -> Result<PartitionEndpoints> {
    require_family(seq, &[Family::Pikovsky], "pikovsky_endpoints")?;
    // 1 - g_+(y) = gap(γ, 1 - y) for y ≥ 0, so the distances to 1 recurse directly
    let (gap, gap_next) = backward_pair(seq, k, n_max, 1.0, |p, s| Ok(pikovsky_gap(p.gamma, s)))?;
    let pk = seq.param_at(k)?;
    let g = pk.gamma;
    let x_plus = gap.iter().map(|s| 1.0 - s).collect();
    // d_n = g_{k,-}(x⁺_{n-1}(k+1)) = -(1 - x⁺_{n-1}(k+1))^γ / (2γ)
    let mut delta_gap = Vec::with_capacity(n_max + 1);
    delta_gap.push(1.0);
    for n in 1..=n_max {
        delta_gap.push(gap_next[n - 1].powf(g) / (2.0 * g));
    }
    Ok(PartitionEndpoints {
        family: Family::Pikovsky,
        k,
        reference: reference_set(&pk),
        data: EndpointData::Pikovsky { x_plus, gap, delta_gap },
    })
}

/// Endpoints for the Grossmann–Horner instance `T(x) = 1 - 2 sqrt|x|`.
///
/// With `g_∓(y) = ∓(1 - y)²/4`, the distance `u = 1 + x` of the left cells to
/// the neutral point obeys `u_{n+1} = u_n - u_n²/4`, `u_0 = 1`.
pub fn gh_endpoints(seq: &ParamSequence, k: usize, n_max: usize) -> Result<PartitionEndpoints> {
    require_family(seq, &[Family::GrossmannHorner], "gh_endpoints")?;
    let pk = seq.param_at(k)?;
    pk.validate()?;
    let mut u = Vec::with_capacity(n_max + 2);
    u.push(1.0);
    for n in 0..=n_max {
        let v: f64 = u[n];
        u.push(v - 0.25 * v * v);
    }
    let mut delta = vec![f64::NAN];
    let mut delta1 = vec![f64::NAN];
    for n in 1..=n_max {
        let w = 0.25 * u[n - 1] * u[n - 1];
        delta.push(-w);
        // f_n = g_-(-e_n) = -(1 - w)² / 4
        delta1.push(-0.25 * (1.0 - w) * (1.0 - w));
    }
    Ok(PartitionEndpoints {
        family: Family::GrossmannHorner,
        k,
        reference: reference_set(&pk),
        data: EndpointData::GrossmannHorner { u, delta, delta1 },
    })
}

/// Endpoints for whatever family `seq` carries.
pub fn endpoints(seq: &ParamSequence, k: usize, n_max: usize) -> Result<PartitionEndpoints> {
    if k == 0 {
        return Err(Error::Param("start index k must be at least 1".into()));
    }
    match seq.family() {
        Family::Lsv | Family::Cui => lsv_preimage_points(seq, k, n_max),
        Family::Pikovsky => pikovsky_endpoints(seq, k, n_max),
        Family::GrossmannHorner => gh_endpoints(seq, k, n_max),
    }
}

/// Tail `t(n)` of the return time `τ_k` for `n = 0..=n_max`, from endpoint lengths.
pub fn tail_from_endpoints(ep: &PartitionEndpoints, base: TailBase, seq: &ParamSequence) -> Result<TailTable> {
    let n_max = ep.n_max();
    let pk = seq.param_at(ep.k)?;
    let mut t = vec![1.0; n_max + 1];
    match (&ep.data, base) {
        (EndpointData::Lsv { y_offset, .. }, TailBase::Mk) => {
            // {τ ≥ n} ∩ Y = [1/2, y_n]
            for n in 1..=n_max {
                t[n] = 2.0 * y_offset[n];
            }
        }
        (EndpointData::Lsv { x, y_offset }, TailBase::Lebesgue) => {
            for n in 1..=n_max {
                t[n] = x[n] + y_offset[n];
            }
        }
        (EndpointData::Pikovsky { delta_gap, .. }, TailBase::Mk) => {
            let half = 1.0 / (2.0 * pk.gamma);
            for n in 1..=n_max {
                t[n] = delta_gap[n] / half;
            }
        }
        (EndpointData::Pikovsky { gap, delta_gap, .. }, TailBase::Lebesgue) => {
            // (|∪Δ⁺| + |∪Δ⁻| + |∪δ⁺| + |∪δ⁻|) / 2
            for n in 1..=n_max {
                t[n] = gap[n] + delta_gap[n];
            }
        }
        (EndpointData::GrossmannHorner { u, .. }, _) => {
            let (vals, _) = gh_tail_values(u, n_max, base);
            t = vals;
        }
    }
    let label = match base {
        TailBase::Mk => TailLabel::HK,
        TailBase::Lebesgue => TailLabel::Lebesgue,
    };
    TailTable::new(label, ep.k, t)
}

/// Return-time tail of the Grossmann–Horner instance.
///
/// The cells `δ_{1,n}` alone do not resolve the return time on `δ_1`: the
/// sub-cell `δ_{1,1}` is mapped into `Δ_0⁺`, which contains a repelling fixed
/// point, so orbits can spend several steps in `X₊` before they reach `Y`.
/// We therefore tabulate exact hitting sets. With `A_n ⊂ X₊` the points whose
/// first entry into `Y` happens at time `≥ n`,
///
/// `A_1 = X₊`, `A_n = (1 - u_n, 1) ∪ g₊(A_{n-1})`,
///
/// and `{τ ≥ n} = (-1, -1 + u_n) ∪ A_n ∪ g₋(A_{n-1})` for `n ≥ 2`. Each `A_n` is
/// a list of intervals stored by their distances `(c, d)` to `1` and their
/// length, so no length is formed by cancellation. `g₊` contracts by at least
/// `1/2`; pieces shorter than `1e-15` times the current scale are dropped, and
/// the dropped mass (at most twice the length at the time of dropping) is
/// returned as the second component.
fn gh_tail_values(u: &[f64], n_max: usize, base: TailBase) -> (Vec<f64>, f64) {
    #[derive(Clone, Copy)]
    struct Piece {
        c: f64,
        d: f64,
        len: f64,
    }
    let mut t = vec![1.0; n_max + 1];
    let mut truncated = 0.0f64;
    // A_1 = (0, 1)
    let mut a = vec![Piece { c: 1.0, d: 0.0, len: 1.0 }];
    for n in 2..=n_max {
        // |g₋(A_{n-1})| uses (1-a)² - (1-b)² = len (c + d)
        let y_part: f64 = a.iter().map(|p| 0.25 * p.len * (p.c + p.d)).sum();
        let cut = 1e-15 * u[n] * u[n];
        let mut next = Vec::with_capacity(a.len() + 1);
        next.push(Piece { c: u[n], d: 0.0, len: u[n] });
        for p in &a {
            let q = Piece { c: 1.0 - 0.25 * p.d * p.d, d: 1.0 - 0.25 * p.c * p.c, len: 0.25 * p.len * (p.c + p.d) };
            if q.len < cut {
                truncated += 2.0 * q.len;
            } else {
                next.push(q);
            }
        }
        a = next;
        let a_len: f64 = a.iter().map(|p| p.len).sum();
        t[n] = match base {
            TailBase::Mk => y_part / 0.25,
            TailBase::Lebesgue => 0.5 * (u[n] + a_len + y_part),
        };
    }
    (t, truncated)
}

/// Grossmann–Horner tail together with the mass dropped by truncation.
pub fn gh_hitting_tail(n_max: usize, base: TailBase) -> Result<(TailTable, f64)> {
    let seq = ParamSequence::constant(MapParams::grossmann_horner())?;
    let ep = gh_endpoints(&seq, 1, n_max)?;
    let EndpointData::GrossmannHorner { u, .. } = &ep.data else { unreachable!() };
    let (t, truncated) = gh_tail_values(u, n_max, base);
    let label = match base {
        TailBase::Mk => TailLabel::HK,
        TailBase::Lebesgue => TailLabel::Lebesgue,
    };
    Ok((TailTable::new(label, 1, t)?, truncated))
}

/// `m_k(τ_k ≥ n)` or `λ(τ_k ≥ n)` for `n = 0..=n_max`.
pub fn return_time_tail(seq: &ParamSequence, k: usize, n_max: usize, base: TailBase) -> Result<TailTable> {
    let ep = endpoints(seq, k, n_max)?;
    tail_from_endpoints(&ep, base, seq)
}

/// Number of Monte Carlo shards; fixed so results do not depend on thread count.
pub const MC_SHARDS: u64 = 64;

/// Monte Carlo estimate of the return-time tail by forward iteration of
/// points drawn from the base measure, with binomial standard errors.
pub fn return_time_tail_mc(
    seq: &ParamSequence,
    k: usize,
    n_max: usize,
    base: TailBase,
    samples: usize,
    seed: u64,
) -> Result<TailTable> {
    if samples < 1000 {
        return Err(Error::Param("at least 1000 samples are required".into()));
    }
    if k == 0 {
        return Err(Error::Param("start index k must be at least 1".into()));
    }
    let params: Vec<MapParams> = (0..=n_max).map(|j| seq.param_at(k + j)).collect::<Result<_>>()?;
    for p in &params {
        p.validate()?;
    }
    let (lo, hi) = match base {
        TailBase::Mk => reference_set(&params[0]),
        TailBase::Lebesgue => params[0].state_interval(),
    };
    let per = samples / MC_SHARDS as usize;
    let extra = samples % MC_SHARDS as usize;
    // hist[n] = number of samples with τ = n (n_max + 1 collects τ > n_max)
    let hist = (0..MC_SHARDS)
        .into_par_iter()
        .map(|shard| -> Result<Vec<u64>> {
            let mut r = rng::shard_stream(seed, "partitions/return_time_tail_mc", shard);
            let count = per + usize::from((shard as usize) < extra);
            let mut h = vec![0u64; n_max + 2];
            for _ in 0..count {
                let mut x = lo + (hi - lo) * rng::unit_f64(rand::RngCore::next_u64(&mut r));
                let mut tau = n_max + 1;
                for n in 1..=n_max {
                    x = match params[n - 1].eval_map(x) {
                        Ok(y) => y,
                        // only reachable from the exact singular point, a null set
                        Err(Error::SingularPoint { .. }) => params[n - 1].family.branch_boundary(),
                        Err(e) => return Err(e),
                    };
                    if in_reference_set(&params[n], x) {
                        tau = n;
                        break;
                    }
                }
                h[tau] += 1;
            }
            Ok(h)
        })
        .try_reduce(
            || vec![0u64; n_max + 2],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )?;
    let total = samples as f64;
    // t(n) = #(τ ≥ n) / N, and τ ≥ 1 always
    let mut ge = vec![0u64; n_max + 2];
    let mut acc = 0u64;
    for n in (1..=n_max + 1).rev() {
        acc += hist[n];
        ge[n] = acc;
    }
    ge[0] = acc;
    let values: Vec<f64> = ge[..=n_max].iter().map(|&c| c as f64 / total).collect();
    let stderr = values.iter().map(|&p| (p * (1.0 - p) / total).sqrt()).collect();
    let label = match base {
        TailBase::Mk => TailLabel::HK,
        TailBase::Lebesgue => TailLabel::Lebesgue,
    };
    TailTable::with_stderr(label, k, values, stderr)
}

/// Least-squares fit of `log t = intercept + slope · log n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Ordinary least-squares standard error of the slope (0 for two points).
    pub slope_stderr: f64,
}

/// Fit a power law to `(n, t)` pairs; all `n` and `t` must be positive.
pub fn fit_log_log(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    if points.len() < 2 {
        return Err(Error::Param("need at least two points to fit".into()));
    }
    if let Some(&(n, v)) = points.iter().find(|(n, t)| !(*t > 0.0) || !(*n > 0.0)) {
        return Err(Error::NonPositiveValue { n: n as usize, value: v });
    }
    let m = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Param("fit window has a single abscissa".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    let ss_res = (syy - slope * sxy).max(0.0);
    let slope_stderr = if points.len() > 2 { (ss_res / (m - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(PowerLawFit { slope, intercept, r_squared, slope_stderr })
}

/// Fit `t(n)` over `n_min ≤ n ≤ n_max`.
pub fn fit_power_law(table: &TailTable, n_min: usize, n_max: usize) -> Result<PowerLawFit> {
    if n_min == 0 || n_min >= n_max {
        return Err(Error::Param(format!("invalid fit window [{n_min}, {n_max}]")));
    }
    if n_max > table.n_max() {
        return Err(Error::Depth { requested: n_max, available: table.n_max() });
    }
    let vals = table.values();
    if let Some(n) = (n_min..=n_max).find(|&n| !(vals[n] > 0.0)) {
        return Err(Error::NonPositiveValue { n, value: vals[n] });
    }
    let pts: Vec<(f64, f64)> = (n_min..=n_max).map(|n| (n as f64, vals[n])).collect();
    fit_log_log(&pts)
}

/// Default window: the middle two decades of `[10, n_max]` (all of it if shorter).
pub fn default_fit_window(n_max: usize) -> (usize, usize) {
    let lo = 10usize.min(n_max.saturating_sub(1)).max(1);
    let (l, h) = ((lo as f64).log10(), (n_max as f64).log10());
    if h - l <= 2.0 {
        return (lo, n_max);
    }
    let c = 0.5 * (l + h);
    let a = 10f64.powf(c - 1.0).round() as usize;
    let b = (10f64.powf(c + 1.0).round() as usize).min(n_max);
    (a.max(lo), b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lsv(g: f64) -> ParamSequence {
        ParamSequence::constant(MapParams::lsv(g)).unwrap()
    }

    fn pik(g: f64) -> ParamSequence {
        ParamSequence::constant(MapParams::pikovsky(g)).unwrap()
    }

    fn gh() -> ParamSequence {
        ParamSequence::constant(MapParams::grossmann_horner()).unwrap()
    }

    fn iid_lsv(seed: u64) -> ParamSequence {
        ParamSequence::iid(vec![MapParams::lsv(0.3), MapParams::lsv(0.7)], vec![0.5, 0.5], seed).unwrap()
    }

    #[test]
    fn lsv_first_points() {
        for seq in [lsv(0.5), iid_lsv(1), ParamSequence::periodic(vec![MapParams::cui(0.4, 2.0)]).unwrap()] {
            let ep = lsv_preimage_points(&seq, 3, 50).unwrap();
            let EndpointData::Lsv { x, y_offset } = &ep.data else { panic!() };
            assert_eq!(x[0], 1.0);
            assert_eq!(x[1], 0.5);
            assert_eq!(0.5 + y_offset[1], 1.0);
            assert!(x.windows(2).all(|w| w[1] < w[0]));
            assert!(y_offset[1..].windows(2).all(|w| w[1] < w[0]));
        }
    }

    #[test]
    fn lsv_points_match_direct_composition() {
        // oracle: apply the inverse branches one by one through the public map API
        let seq = iid_lsv(9);
        let ep = lsv_preimage_points(&seq, 2, 40).unwrap();
        let EndpointData::Lsv { x, .. } = &ep.data else { panic!() };
        for n in [1usize, 5, 17, 40] {
            let mut v = 1.0;
            for j in (2..2 + n).rev() {
                v = seq.param_at(j).unwrap().inverse_branch(crate::maps::BranchId::Left, v).unwrap();
            }
            assert!((v - x[n]).abs() <= 1e-14 * v, "n = {n}");
        }
    }

    #[test]
    fn lsv_x_slope() {
        let ep = lsv_preimage_points(&lsv(0.5), 1, 10_000).unwrap();
        let EndpointData::Lsv { x, .. } = ep.data else { panic!() };
        let t = TailTable::new(TailLabel::R, 1, x).unwrap();
        let fit = fit_power_law(&t, 1000, 10_000).unwrap();
        assert!((fit.slope + 2.0).abs() < 0.05, "{fit:?}");
    }

    #[test]
    fn tail_consistency_lsv() {
        // cell sum versus endpoint formula
        let seq = iid_lsv(4);
        let ep = lsv_preimage_points(&seq, 1, 200).unwrap();
        let t = tail_from_endpoints(&ep, TailBase::Mk, &seq).unwrap();
        let EndpointData::Lsv { y_offset, .. } = &ep.data else { panic!() };
        for n in 1..200 {
            // cells [y_{ℓ+1}, y_ℓ] for ℓ ≥ n, plus the unresolved remainder [1/2, y_200]
            let cells: f64 = (n..200).map(|l| y_offset[l] - y_offset[l + 1]).sum::<f64>() + y_offset[200];
            assert!((2.0 * cells - t[n]).abs() <= 1e-12, "n = {n}");
        }
        assert_eq!(t[1], 1.0);
    }

    #[test]
    fn shift_identity() {
        let seq = iid_lsv(17);
        for k in [2, 5, 11] {
            let a = return_time_tail(&seq, k, 300, TailBase::Mk).unwrap();
            let b = return_time_tail(&seq.shifted(k - 1), 1, 300, TailBase::Mk).unwrap();
            assert_eq!(a.values(), b.values());
        }
    }

    #[test]
    fn periodic_shortcut_matches_triangle() {
        let cycle = vec![MapParams::lsv(0.5), MapParams::lsv(0.8), MapParams::lsv(0.2)];
        let periodic = ParamSequence::periodic(cycle.clone()).unwrap();
        let explicit = ParamSequence::explicit(cycle.iter().cycle().take(400).copied().collect()).unwrap();
        let a = return_time_tail(&periodic, 2, 300, TailBase::Lebesgue).unwrap();
        let b = return_time_tail(&explicit, 2, 300, TailBase::Lebesgue).unwrap();
        for n in 0..=300 {
            assert!((a[n] - b[n]).abs() <= 1e-15 * b[n].max(1e-300), "n = {n}");
        }
    }

    #[test]
    fn monotone_domination() {
        let a = return_time_tail(&lsv(0.3), 1, 2000, TailBase::Mk).unwrap();
        let b = return_time_tail(&lsv(0.7), 1, 2000, TailBase::Mk).unwrap();
        for n in 2..=2000 {
            assert!(a[n] <= b[n], "n = {n}");
        }
    }

    #[test]
    fn every_tail_starts_at_one() {
        for seq in [lsv(0.5), pik(2.0), gh(), iid_lsv(3)] {
            for base in [TailBase::Mk, TailBase::Lebesgue] {
                let t = return_time_tail(&seq, 1, 100, base).unwrap();
                assert_eq!(t[0], 1.0);
                assert!((t[1] - 1.0).abs() < 1e-15, "{:?} {base:?}", seq.family());
            }
        }
    }

    #[test]
    fn lsv_tail_slope() {
        let t = return_time_tail(&lsv(0.5), 1, 10_000, TailBase::Mk).unwrap();
        let fit = fit_power_law(&t, 100, 10_000).unwrap();
        // m_k tail is x_{n-1}, order n^{-1/γ}
        assert!((fit.slope + 2.0).abs() < 0.1, "{fit:?}");
        let t = return_time_tail(&lsv(0.5), 1, 10_000, TailBase::Lebesgue).unwrap();
        let fit = fit_power_law(&t, 100, 10_000).unwrap();
        assert!((fit.slope + 2.0).abs() < 0.1, "{fit:?}");
    }

    #[test]
    fn pikovsky_endpoints_examples() {
        let seq = ParamSequence::periodic(vec![MapParams::pikovsky(1.5), MapParams::pikovsky(2.5)]).unwrap();
        let ep = pikovsky_endpoints(&seq, 1, 100).unwrap();
        let EndpointData::Pikovsky { x_plus, delta_gap, .. } = &ep.data else { panic!() };
        assert_eq!(x_plus[0], 0.0);
        assert!((x_plus[1] - 1.0 / 3.0).abs() < 1e-15);
        assert!(x_plus.windows(2).all(|w| w[1] > w[0] && w[1] < 1.0));
        assert!((delta_gap[1] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(ep.reference, (-1.0 / 3.0, 1.0 / 3.0));
        // δ endpoints are pullbacks of Δ endpoints of the shifted sequence
        let next = pikovsky_endpoints(&seq, 2, 100).unwrap();
        let EndpointData::Pikovsky { x_plus: xn, .. } = &next.data else { panic!() };
        for n in 1..100 {
            let d = seq.param_at(1).unwrap().inverse_branch(crate::maps::BranchId::Left, xn[n - 1]).unwrap();
            assert!((d + delta_gap[n]).abs() < 1e-15, "n = {n}");
        }
    }

    #[test]
    fn pikovsky_gap_slope() {
        let ep = pikovsky_endpoints(&pik(2.0), 1, 5000).unwrap();
        let EndpointData::Pikovsky { gap, .. } = ep.data else { panic!() };
        let t = TailTable::new(TailLabel::R, 1, gap).unwrap();
        let fit = fit_power_law(&t, 500, 5000).unwrap();
        assert!((fit.slope + 1.0).abs() < 0.05, "{fit:?}");
    }

    #[test]
    fn gh_endpoints_examples() {
        let ep = gh_endpoints(&gh(), 1, 5000).unwrap();
        assert_eq!(ep.reference, (-0.25, 0.0));
        let EndpointData::GrossmannHorner { u, delta, delta1 } = &ep.data else { panic!() };
        assert_eq!(u[1], 0.75); // x_1⁻ = g_-(0) = -1/4
        assert_eq!(delta[1], -0.25);
        assert_eq!(delta1[1], -9.0 / 64.0);
        assert!(u.windows(2).all(|w| w[1] < w[0] && w[1] > 0.0));
        // partition property: Δ cells up to depth n cover all but 2 u_{n+1}
        let covered: f64 = (1..=5000).map(|n| 2.0 * (u[n] - u[n + 1])).sum::<f64>() + 2.0 * 0.25;
        assert!((2.0 - covered - 2.0 * u[5001]).abs() < 1e-12);
        assert!(u[5001] < 1e-3);
        // the concrete map sends each cell into the next one down
        let p = MapParams::grossmann_horner();
        for n in 2..50 {
            let x = -1.0 + u[n];
            assert!((p.eval_map(x).unwrap() - (-1.0 + u[n - 1])).abs() < 1e-14);
            assert!((p.eval_map(delta[n]).unwrap() - (1.0 - u[n - 1])).abs() < 1e-14);
        }
    }

    #[test]
    fn gh_tail_slopes() {
        let mk = return_time_tail(&gh(), 1, 10_000, TailBase::Mk).unwrap();
        let fit = fit_power_law(&mk, 100, 10_000).unwrap();
        assert!((fit.slope + 2.0).abs() < 0.1, "{fit:?}");
        let leb = return_time_tail(&gh(), 1, 10_000, TailBase::Lebesgue).unwrap();
        let fit = fit_power_law(&leb, 100, 10_000).unwrap();
        assert!((fit.slope + 1.0).abs() < 0.1, "{fit:?}");
    }

    #[test]
    fn mc_full_return_toy() {
        // Lebesgue base on the GH map: points of Δ_1^± return at n = 1 exactly
        let t = return_time_tail_mc(&gh(), 1, 5, TailBase::Mk, 1000, 1).unwrap();
        assert_eq!(t[0], 1.0);
        assert_eq!(t[1], 1.0);
        // with base m_k no point of Y returns at n = 1
        assert_eq!(t[2], 1.0);
    }

    fn max_z(exact: &TailTable, mc: &TailTable, samples: f64) -> f64 {
        (1..=exact.n_max())
            .filter(|&n| exact[n] >= 10.0 / samples)
            .map(|n| {
                let s = (exact[n] * (1.0 - exact[n]) / samples).sqrt();
                (mc[n] - exact[n]).abs() / s
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn mc_agrees_with_exact_lsv() {
        let seq = lsv(0.5);
        let exact = return_time_tail(&seq, 1, 300, TailBase::Mk).unwrap();
        let a = return_time_tail_mc(&seq, 1, 300, TailBase::Mk, 20_000, 1).unwrap();
        let b = return_time_tail_mc(&seq, 1, 300, TailBase::Mk, 20_000, 2).unwrap();
        assert_ne!(a.values(), b.values());
        assert!(max_z(&exact, &a, 20_000.0) <= 4.0);
        assert!(max_z(&exact, &b, 20_000.0) <= 4.0);
    }

    #[test]
    fn mc_agrees_with_exact_nonstationary() {
        let seq = iid_lsv(5);
        let exact = return_time_tail(&seq, 3, 200, TailBase::Lebesgue).unwrap();
        let mc = return_time_tail_mc(&seq, 3, 200, TailBase::Lebesgue, 20_000, 8).unwrap();
        assert!(max_z(&exact, &mc, 20_000.0) <= 4.0);
        let seq = ParamSequence::periodic(vec![MapParams::pikovsky(1.5), MapParams::pikovsky(2.5)]).unwrap();
        for base in [TailBase::Mk, TailBase::Lebesgue] {
            let exact = return_time_tail(&seq, 2, 200, base).unwrap();
            let mc = return_time_tail_mc(&seq, 2, 200, base, 20_000, 8).unwrap();
            assert!(max_z(&exact, &mc, 20_000.0) <= 4.0, "{base:?}");
        }
        for base in [TailBase::Mk, TailBase::Lebesgue] {
            let exact = return_time_tail(&gh(), 1, 200, base).unwrap();
            let mc = return_time_tail_mc(&gh(), 1, 200, base, 20_000, 8).unwrap();
            assert!(max_z(&exact, &mc, 20_000.0) <= 4.0, "{base:?}");
        }
    }

    #[test]
    fn mc_is_reproducible() {
        let a = return_time_tail_mc(&pik(2.0), 1, 50, TailBase::Mk, 5000, 3).unwrap();
        let b = return_time_tail_mc(&pik(2.0), 1, 50, TailBase::Mk, 5000, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fit_examples() {
        let exact = |f: &dyn Fn(f64) -> f64| {
            TailTable::new(TailLabel::R, 1, (0..=1000).map(|n| f((n as f64).max(1.0)).min(1.0)).collect()).unwrap()
        };
        let fit = fit_power_law(&exact(&|n| n.powi(-2)), 10, 1000).unwrap();
        assert!((fit.slope + 2.0).abs() < 1e-12 && (fit.r_squared - 1.0).abs() < 1e-12);
        let fit = fit_power_law(&exact(&|n| 5.0 * n.powf(-1.3)), 10, 1000).unwrap();
        assert!((fit.slope + 1.3).abs() < 1e-12);
        assert!((fit.intercept - 5f64.ln()).abs() < 1e-10);
        let wobbly = TailTable::new(
            TailLabel::MixingMass,
            1,
            (0..=1000).map(|n| { let x = (n as f64).max(1.0); (x.powi(-2) * (1.0 + 0.1 * x.sin())).min(1.0) }).collect(),
        )
        .unwrap();
        let fit = fit_power_law(&wobbly, 10, 1000).unwrap();
        assert!((-2.05..=-1.95).contains(&fit.slope), "{fit:?}");
        let zero = TailTable::new(TailLabel::R, 1, vec![1.0, 0.5, 0.0, 0.0]).unwrap();
        assert!(matches!(fit_power_law(&zero, 1, 3), Err(Error::NonPositiveValue { n: 2, .. })));
    }

    #[test]
    fn default_window() {
        assert_eq!(default_fit_window(100), (10, 100));
        assert_eq!(default_fit_window(100_000), (100, 10_000));
        let (a, b) = default_fit_window(2000);
        assert!(a >= 10 && b <= 2000 && a < b);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn tails_are_valid_tables(seed in 0u64..1000, k in 1usize..20) {
            let t = return_time_tail(&iid_lsv(seed), k, 150, TailBase::Mk).unwrap();
            prop_assert!(t.values().windows(2).all(|w| w[1] <= w[0]));
            prop_assert!(t.values().iter().all(|&v| v > 0.0 && v <= 1.0));
        }

        #[test]
        fn pikovsky_endpoints_mirror(gamma in 1.1f64..2.9) {
            let ep = pikovsky_endpoints(&pik(gamma), 1, 50).unwrap();
            let EndpointData::Pikovsky { x_plus, .. } = &ep.data else { unreachable!() };
            let p = MapParams::pikovsky(gamma);
            for n in 1..50 {
                let right = p.eval_map(x_plus[n + 1]).unwrap();
                let left = p.eval_map(-x_plus[n + 1]).unwrap();
                prop_assert!((right + left).abs() < 1e-12);
                prop_assert!((right - x_plus[n]).abs() < 1e-12);
            }
        }
    }
}
