//! Transfer operators on piecewise-constant densities.
//!
//! A density is stored as `N` cell averages on a uniform grid. One step of the
//! transfer operator is computed exactly for such densities: the mass that
//! output cell `J` receives is `Σ_b μ(g_b(J))`, and `g_b(J)` is the interval
//! between the preimages of the two edges of `J`, so the cell mass is a
//! difference of the (piecewise linear) distribution function of the input at
//! two points. The resulting operator is a Markov operator on cell averages:
//! it conserves mass and contracts total variation up to rounding.
//!
//! Edge preimages depend only on `(params, grid)` and are cached.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::{BranchId, Family, MapParams};
use crate::partitions::reference_set;
use crate::sequences::ParamSequence;
use crate::tail::{TailLabel, TailTable};

pub const MIN_CELLS: usize = 1 << 10;
pub const MAX_CELLS: usize = 1 << 20;

/// Tolerance on the mass of a probability density.
pub const MASS_TOL: f64 = 1e-10;

/// Piecewise-constant density on `N` equal cells of a closed interval.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    lo: f64,
    hi: f64,
    values: Vec<f64>,
    mass: f64,
}

fn check_cells(n: usize) -> Result<()> {
    if !n.is_power_of_two() || !(MIN_CELLS..=MAX_CELLS).contains(&n) {
        return Err(Error::Param(format!("cell count {n} must be a power of two in [2^10, 2^20]")));
    }
    Ok(())
}

impl GridDensity {
    pub fn from_values(interval: (f64, f64), values: Vec<f64>) -> Result<Self> {
        check_cells(values.len())?;
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::Param(format!("cell {i} has invalid value {v}")));
        }
        Ok(Self::from_raw(interval, values))
    }

    fn from_raw(interval: (f64, f64), values: Vec<f64>) -> Self {
        let h = (interval.1 - interval.0) / values.len() as f64;
        let mass = h * values.iter().sum::<f64>();
        GridDensity { lo: interval.0, hi: interval.1, values, mass }
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn cells(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn cell_width(&self) -> f64 {
        (self.hi - self.lo) / self.values.len() as f64
    }

    /// Left edge of cell `i` (`i = N` gives the right end of the interval).
    pub fn edge(&self, i: usize) -> f64 {
        if i == self.values.len() {
            self.hi
        } else {
            self.lo + i as f64 * self.cell_width()
        }
    }

    pub fn midpoint(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.cell_width()
    }

    /// Rescale to unit mass.
    pub fn normalized(mut self) -> Result<Self> {
        if !(self.mass > 0.0) {
            return Err(Error::Param("cannot normalize a density with zero mass".into()));
        }
        let s = 1.0 / self.mass;
        self.values.iter_mut().for_each(|v| *v *= s);
        Ok(Self::from_raw((self.lo, self.hi), self.values))
    }

    /// `∫_a^b f`, exact for the piecewise-constant density.
    pub fn integrate(&self, a: f64, b: f64) -> f64 {
        let cdf = Cdf::new(self);
        cdf.at(b.min(self.hi)) - cdf.at(a.max(self.lo))
    }
}

/// Distribution function of a grid density.
struct Cdf<'a> {
    lo: f64,
    inv_h: f64,
    h: f64,
    values: &'a [f64],
    cum: Vec<f64>,
}

impl<'a> Cdf<'a> {
    fn new(f: &'a GridDensity) -> Self {
        let h = f.cell_width();
        let mut cum = Vec::with_capacity(f.values.len() + 1);
        let mut acc = 0.0;
        cum.push(0.0);
        for &v in &f.values {
            acc += v * h;
            cum.push(acc);
        }
        Cdf { lo: f.lo, inv_h: 1.0 / h, h, values: &f.values, cum }
    }

    #[inline]
    fn at(&self, x: f64) -> f64 {
        let n = self.values.len();
        let t = (x - self.lo) * self.inv_h;
        if t <= 0.0 {
            return 0.0;
        }
        let i = t as usize;
        if i >= n {
            return self.cum[n];
        }
        let offset = x - (self.lo + i as f64 * self.h);
        self.cum[i] + offset.max(0.0) * self.values[i]
    }
}

/// Initial densities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DensityKind {
    Uniform,
    /// `1 + ½ sgn(c) |c|^exponent` with `c = cos(2πu)` (profile 0) or
    /// `c = sin(2πu)` (profile 1), `u` the relative position in the interval.
    /// Hölder continuous with the given exponent, bounded below by `1/2`.
    Holder { exponent: f64, profile: u32 },
    /// `c x^{-β/2}` on `(0, 1]`; lies in the cone `C_*(β)`.
    ConeSample { beta: f64 },
}

/// Build a normalized density of the given kind on `interval` with `cells` cells.
pub fn make_density(kind: DensityKind, interval: (f64, f64), cells: usize) -> Result<GridDensity> {
    check_cells(cells)?;
    let (lo, hi) = interval;
    let h = (hi - lo) / cells as f64;
    let values: Vec<f64> = match kind {
        DensityKind::Uniform => vec![1.0; cells],
        DensityKind::Holder { exponent, profile } => {
            if !(exponent > 0.0 && exponent <= 1.0) {
                return Err(Error::Param("Hölder exponent must lie in (0, 1]".into()));
            }
            let trig: fn(f64) -> f64 = match profile {
                0 => f64::cos,
                1 => f64::sin,
                other => return Err(Error::Param(format!("unknown Hölder profile {other}"))),
            };
            let f = |x: f64| {
                let c = trig(2.0 * std::f64::consts::PI * (x - lo) / (hi - lo));
                1.0 + 0.5 * c.signum() * c.abs().powf(exponent)
            };
            // cell averages by 8-point Gauss-Legendre; normalization below is exact
            (0..cells).map(|i| gauss_average(&f, lo + i as f64 * h, h)).collect()
        }
        DensityKind::ConeSample { beta } => {
            if !(beta > 0.0 && beta < 1.0) {
                return Err(Error::Param("cone exponent must lie in (0, 1)".into()));
            }
            if lo != 0.0 {
                return Err(Error::Param("cone densities live on [0, 1]".into()));
            }
            // exact cell averages of x^{-p}
            let p = beta / 2.0;
            (0..cells)
                .map(|i| {
                    let a = lo + i as f64 * h;
                    let b = a + h;
                    (b.powf(1.0 - p) - a.powf(1.0 - p)) / ((1.0 - p) * h)
                })
                .collect()
        }
    };
    GridDensity::from_raw(interval, values).normalized()
}

/// Normalized indicator density of `[a, b]`, with exact partial-cell weights.
pub fn indicator_density(interval: (f64, f64), cells: usize, a: f64, b: f64) -> Result<GridDensity> {
    check_cells(cells)?;
    let (lo, hi) = interval;
    if !(a < b && a >= lo && b <= hi) {
        return Err(Error::Param(format!("indicator support [{a}, {b}] not inside [{lo}, {hi}]")));
    }
    let h = (hi - lo) / cells as f64;
    let values = (0..cells)
        .map(|i| {
            let c0 = lo + i as f64 * h;
            let c1 = c0 + h;
            (c1.min(b) - c0.max(a)).max(0.0) / h
        })
        .collect();
    GridDensity::from_raw(interval, values).normalized()
}

const GL8: [(f64, f64); 4] = [
    (0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_5),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_3),
];

fn gauss_average(f: &impl Fn(f64) -> f64, a: f64, h: f64) -> f64 {
    let c = a + 0.5 * h;
    let r = 0.5 * h;
    0.5 * GL8.iter().map(|&(x, w)| w * (f(c - r * x) + f(c + r * x))).sum::<f64>()
}

/// Outcome of [`cone_membership`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeReport {
    pub nonnegative: bool,
    pub decreasing: bool,
    pub weighted_increasing: bool,
    pub pointwise_bound: bool,
    /// Largest violation of each condition (0 when it holds).
    pub worst_negative: f64,
    pub worst_increase: f64,
    pub worst_weighted_decrease: f64,
    pub worst_bound_excess: f64,
    /// Set when `a_β ≤ 2^β (β + 2)`.
    pub warning: Option<String>,
}

impl ConeReport {
    pub fn all_pass(&self) -> bool {
        self.nonnegative && self.decreasing && self.weighted_increasing && self.pointwise_bound
    }
}

/// Check the cone conditions on cell averages of a density on `[0, 1]`.
///
/// Each condition is a necessary condition for the cell averages of a cone
/// member, so the comparisons carry one cell width of slack:
/// `x^{β+1} f` increasing is tested as `a_{i+2}^{β+1} v_{i+1} ≥ a_i^{β+1} v_i`
/// (edges `a_i`), and the bound as `v_i ≤ a_β ∫f · avg_cell(x^{-β})`.
pub fn cone_membership(f: &GridDensity, beta: f64, a_beta: f64) -> Result<ConeReport> {
    if f.lo != 0.0 || f.hi != 1.0 {
        return Err(Error::Param("cone membership is defined for densities on [0, 1]".into()));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Param("beta must lie in (0,1)".into()));
    }
    let v = &f.values;
    let n = v.len();
    let h = f.cell_width();
    let rel = 1e-12;
    let worst_negative = v.iter().fold(0.0f64, |w, &x| w.max(-x));
    let worst_increase = v.windows(2).fold(0.0f64, |w, p| w.max(p[1] - p[0] - rel * p[0].abs()));
    let mut worst_weighted_decrease = 0.0f64;
    for i in 0..n - 1 {
        let left = f.edge(i).powf(beta + 1.0) * v[i];
        let right = f.edge(i + 2).powf(beta + 1.0) * v[i + 1];
        worst_weighted_decrease = worst_weighted_decrease.max(left - right - rel * left.abs());
    }
    let total = f.mass;
    let mut worst_bound_excess = 0.0f64;
    for i in 0..n {
        let (a, b) = (f.edge(i), f.edge(i + 1));
        let avg = (b.powf(1.0 - beta) - a.powf(1.0 - beta)) / ((1.0 - beta) * h);
        let bound = a_beta * total * avg;
        worst_bound_excess = worst_bound_excess.max(v[i] - bound - rel * bound);
    }
    let threshold = 2f64.powf(beta) * (beta + 2.0);
    let warning = (a_beta <= threshold).then(|| format!("a_beta = {a_beta} does not exceed 2^beta (beta + 2) = {threshold}"));
    Ok(ConeReport {
        nonnegative: worst_negative <= 0.0,
        decreasing: worst_increase <= 0.0,
        weighted_increasing: worst_weighted_decrease <= 0.0,
        pointwise_bound: worst_bound_excess <= 0.0,
        worst_negative,
        worst_increase,
        worst_weighted_decrease,
        worst_bound_excess,
        warning,
    })
}

/// Preimages of the grid edges under both inverse branches.
#[derive(Debug)]
struct Preimages {
    left: Vec<f64>,
    right: Vec<f64>,
}

type CacheKey = (Family, u64, u64, u64, u64, u64, usize);

const CACHE_CAPACITY: usize = 64;

fn preimage_cache() -> &'static Mutex<HashMap<CacheKey, Arc<Preimages>>> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, Arc<Preimages>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn preimages(params: &MapParams, interval: (f64, f64), cells: usize) -> Result<Arc<Preimages>> {
    let key = (
        params.family,
        params.gamma.to_bits(),
        params.beta.to_bits(),
        params.eta.to_bits(),
        interval.0.to_bits(),
        interval.1.to_bits(),
        cells,
    );
    if let Some(p) = preimage_cache().lock().expect("poisoned lock").get(&key) {
        return Ok(Arc::clone(p));
    }
    let h = (interval.1 - interval.0) / cells as f64;
    let edges: Vec<f64> = (0..=cells)
        .map(|i| if i == cells { interval.1 } else { interval.0 + i as f64 * h })
        .collect();
    let solve = |branch: BranchId| -> Result<Vec<f64>> {
        edges.par_iter().map(|&y| params.inverse_branch(branch, y)).collect()
    };
    let pre = Arc::new(Preimages { left: solve(BranchId::Left)?, right: solve(BranchId::Right)? });
    let mut cache = preimage_cache().lock().expect("poisoned lock");
    if cache.len() >= CACHE_CAPACITY {
        cache.clear();
    }
    cache.insert(key, Arc::clone(&pre));
    Ok(pre)
}

/// One step of the transfer operator of `params`.
pub fn push_density(params: &MapParams, f: &GridDensity) -> Result<GridDensity> {
    params.validate()?;
    if (f.lo, f.hi) != params.state_interval() {
        return Err(Error::ShapeMismatch(format!(
            "density lives on [{}, {}] but the map acts on {:?}",
            f.lo,
            f.hi,
            params.state_interval()
        )));
    }
    let n = f.cells();
    let pre = preimages(params, (f.lo, f.hi), n)?;
    let cdf = Cdf::new(f);
    let fl: Vec<f64> = pre.left.par_iter().map(|&x| cdf.at(x)).collect();
    let fr: Vec<f64> = pre.right.par_iter().map(|&x| cdf.at(x)).collect();
    let inv_h = 1.0 / f.cell_width();
    let values: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|j| ((fl[j + 1] - fl[j]).abs() + (fr[j + 1] - fr[j]).abs()) * inv_h)
        .collect();
    Ok(GridDensity::from_raw((f.lo, f.hi), values))
}

/// Push `f` through `T_1, …, T_n` of `seq`.
pub fn evolve(seq: &ParamSequence, f: &GridDensity, n: usize) -> Result<GridDensity> {
    let mut cur = f.clone();
    for k in 1..=n {
        cur = push_density(&seq.param_at(k)?, &cur)?;
    }
    Ok(cur)
}

/// `½ ∫ |f - g|`.
pub fn tv_distance(f: &GridDensity, g: &GridDensity) -> Result<f64> {
    if f.cells() != g.cells() || f.interval() != g.interval() {
        return Err(Error::ShapeMismatch(format!(
            "densities on {} and {} cells over {:?} and {:?}",
            f.cells(),
            g.cells(),
            f.interval(),
            g.interval()
        )));
    }
    let s: f64 = f.values.iter().zip(&g.values).map(|(a, b)| (a - b).abs()).sum();
    Ok(0.5 * f.cell_width() * s)
}

/// `tv(evolve(f, n), evolve(g, n))` for `n = 0..=n_max`.
pub fn memory_loss_curve(seq: &ParamSequence, f: &GridDensity, g: &GridDensity, n_max: usize) -> Result<TailTable> {
    for d in [f, g] {
        if (d.mass - 1.0).abs() > MASS_TOL {
            return Err(Error::Param(format!("density has mass {}, expected 1", d.mass)));
        }
    }
    let mut a = f.clone();
    let mut b = g.clone();
    let mut values = Vec::with_capacity(n_max + 1);
    values.push(tv_distance(&a, &b)?);
    for k in 1..=n_max {
        let p = seq.param_at(k)?;
        a = push_density(&p, &a)?;
        b = push_density(&p, &b)?;
        values.push(tv_distance(&a, &b)?);
    }
    TailTable::new(TailLabel::MemoryLoss, 1, values)
}

/// `((T_{k,k+n-1})_* m_k)(Y_{k+n})` for `n = 0..=n_max`, where `m_k` is the
/// normalized Lebesgue measure on the reference set `Y_k`.
pub fn mixing_mass(seq: &ParamSequence, k: usize, n_max: usize, cells: usize) -> Result<TailTable> {
    let p = seq.param_at(k)?;
    let interval = p.state_interval();
    let (a, b) = reference_set(&p);
    let mut f = indicator_density(interval, cells, a, b)?;
    let mut values = Vec::with_capacity(n_max + 1);
    values.push(f.integrate(a, b).min(1.0));
    for n in 1..=n_max {
        f = push_density(&seq.param_at(k + n - 1)?, &f)?;
        let (a, b) = reference_set(&seq.param_at(k + n)?);
        values.push(f.integrate(a, b).clamp(0.0, 1.0 + 1e-12));
    }
    TailTable::new(TailLabel::MixingMass, k, values)
}

/// Minimum of a mixing table over `n_start..=n_max` and where it is attained.
pub fn mixing_floor(table: &TailTable, n_start: usize) -> Result<(f64, usize)> {
    let vals = table.values();
    if n_start >= vals.len() {
        return Err(Error::Depth { requested: n_start, available: table.n_max() });
    }
    let (i, v) = vals[n_start..]
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty range");
    Ok((*v, n_start + i))
}
