//! Time-dependent parameter sequences `(T_k)_{k ≥ 1}` and the statistics of
//! "good" maps (those with `γ_k ≤ threshold`) along them.

use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::{Family, MapParams};
use crate::rng::IndexedUniform;
use crate::tail::{TailLabel, TailTable};

/// How the sequence is generated.
#[derive(Debug, Clone, PartialEq)]
pub enum SequenceKind {
    /// A finite list; indexing past its end is an error.
    Explicit(Vec<MapParams>),
    /// `T_k = cycle[(k - 1) mod len]`.
    Periodic(Vec<MapParams>),
    /// i.i.d. draws from `support` with probabilities `probs`.
    Iid { support: Vec<MapParams>, probs: Vec<f64>, seed: u64 },
    /// Markov chain on `support`; `initial` defaults to the stationary law.
    Markov { support: Vec<MapParams>, transition: Vec<Vec<f64>>, initial: Vec<f64>, seed: u64 },
}

#[derive(Debug)]
struct Inner {
    kind: SequenceKind,
    family: Family,
    draws: Option<IndexedUniform>,
    // Markov state indices for k = 1, 2, …; append-only.
    markov_prefix: RwLock<Vec<usize>>,
}

/// A parameter sequence. Cloning is cheap; clones share the sampled prefix.
#[derive(Debug, Clone)]
pub struct ParamSequence {
    inner: Arc<Inner>,
    offset: usize,
}

const ROW_TOL: f64 = 1e-12;

impl ParamSequence {
    pub fn new(kind: SequenceKind) -> Result<Self> {
        let (family, draws) = match &kind {
            SequenceKind::Explicit(list) | SequenceKind::Periodic(list) => {
                if list.is_empty() {
                    return Err(Error::Config("sequence must be non-empty".into()));
                }
                (common_family(list)?, None)
            }
            SequenceKind::Iid { support, probs, seed } => {
                let fam = common_family(support)?;
                check_law(probs, support.len(), "probs")?;
                (fam, Some(IndexedUniform::new(*seed, "sequence/iid")))
            }
            SequenceKind::Markov { support, transition, initial, seed } => {
                let fam = common_family(support)?;
                if transition.len() != support.len() {
                    return Err(Error::Config("transition matrix must be square over the support".into()));
                }
                for row in transition {
                    check_law(row, support.len(), "transition row")?;
                }
                check_law(initial, support.len(), "initial law")?;
                (fam, Some(IndexedUniform::new(*seed, "sequence/markov")))
            }
        };
        Ok(ParamSequence {
            inner: Arc::new(Inner { kind, family, draws, markov_prefix: RwLock::new(Vec::new()) }),
            offset: 0,
        })
    }

    /// Constant sequence `T_k = params`.
    pub fn constant(params: MapParams) -> Result<Self> {
        Self::new(SequenceKind::Periodic(vec![params]))
    }

    pub fn periodic(cycle: Vec<MapParams>) -> Result<Self> {
        Self::new(SequenceKind::Periodic(cycle))
    }

    pub fn explicit(list: Vec<MapParams>) -> Result<Self> {
        Self::new(SequenceKind::Explicit(list))
    }

    pub fn iid(support: Vec<MapParams>, probs: Vec<f64>, seed: u64) -> Result<Self> {
        Self::new(SequenceKind::Iid { support, probs, seed })
    }

    /// Markov sequence started from the stationary law of `transition`.
    pub fn markov(support: Vec<MapParams>, transition: Vec<Vec<f64>>, seed: u64) -> Result<Self> {
        let initial = stationary_law(&transition)?;
        Self::new(SequenceKind::Markov { support, transition, initial, seed })
    }

    pub fn family(&self) -> Family {
        self.inner.family
    }

    pub fn kind(&self) -> &SequenceKind {
        &self.inner.kind
    }

    /// The sequence `k ↦ T_{k + by}`.
    pub fn shifted(&self, by: usize) -> Self {
        ParamSequence { inner: Arc::clone(&self.inner), offset: self.offset + by }
    }

    /// Number of terms available, if finite.
    pub fn len(&self) -> Option<usize> {
        match &self.inner.kind {
            SequenceKind::Explicit(list) => Some(list.len().saturating_sub(self.offset)),
            _ => None,
        }
    }

    /// Smallest `p` with `T_{k+p} = T_k` for all `k`, when known structurally.
    pub fn period(&self) -> Option<usize> {
        match &self.inner.kind {
            SequenceKind::Periodic(cycle) => {
                // a constant cycle has period 1 whatever its length
                if cycle.iter().all(|p| *p == cycle[0]) {
                    Some(1)
                } else {
                    Some(cycle.len())
                }
            }
            SequenceKind::Explicit(list) if list.len() == 1 => None,
            SequenceKind::Iid { support, .. } | SequenceKind::Markov { support, .. }
                if support.iter().all(|p| *p == support[0]) =>
            {
                Some(1)
            }
            _ => None,
        }
    }

    /// `T_k` for `k ≥ 1`.
    pub fn param_at(&self, k: usize) -> Result<MapParams> {
        if k == 0 {
            return Err(Error::Param("sequence index starts at 1".into()));
        }
        let idx = k + self.offset;
        match &self.inner.kind {
            SequenceKind::Explicit(list) => list
                .get(idx - 1)
                .copied()
                .ok_or(Error::Index { index: k, len: list.len().saturating_sub(self.offset) }),
            SequenceKind::Periodic(cycle) => Ok(cycle[(idx - 1) % cycle.len()]),
            SequenceKind::Iid { support, probs, .. } => {
                let u = self.draws().uniform_at(idx);
                Ok(support[sample_index(probs, u)])
            }
            SequenceKind::Markov { support, .. } => Ok(support[self.markov_state(idx)]),
        }
    }

    /// `γ_k`.
    pub fn gamma_at(&self, k: usize) -> Result<f64> {
        Ok(self.param_at(k)?.gamma)
    }

    fn draws(&self) -> &IndexedUniform {
        self.inner.draws.as_ref().expect("random sequence carries a draw stream")
    }

    fn markov_state(&self, idx: usize) -> usize {
        {
            let prefix = self.inner.markov_prefix.read().expect("poisoned lock");
            if let Some(&s) = prefix.get(idx - 1) {
                return s;
            }
        }
        let SequenceKind::Markov { transition, initial, .. } = &self.inner.kind else {
            unreachable!()
        };
        let mut prefix = self.inner.markov_prefix.write().expect("poisoned lock");
        while prefix.len() < idx {
            let j = prefix.len() + 1;
            let u = self.draws().uniform_at(j);
            let next = match prefix.last() {
                None => sample_index(initial, u),
                Some(&prev) => sample_index(&transition[prev], u),
            };
            prefix.push(next);
        }
        prefix[idx - 1]
    }
}

fn common_family(list: &[MapParams]) -> Result<Family> {
    let Some(first) = list.first() else {
        return Err(Error::Config("support must be non-empty".into()));
    };
    for p in list {
        if p.family != first.family {
            return Err(Error::Config("all sequence entries must share one family".into()));
        }
        p.validate()?;
    }
    Ok(first.family)
}

fn check_law(p: &[f64], n: usize, what: &str) -> Result<()> {
    if p.len() != n {
        return Err(Error::Config(format!("{what} has {} entries, expected {n}", p.len())));
    }
    if p.iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::Config(format!("{what} has a negative entry")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > ROW_TOL {
        return Err(Error::Config(format!("{what} sums to {s}, not 1")));
    }
    Ok(())
}

fn sample_index(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // u fell in the rounding gap at the top; take the last atom with mass
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

/// Stationary law `π P = π` of a stochastic matrix, by Gaussian elimination on
/// `(Pᵀ - I) π = 0` with the last equation replaced by `Σ π = 1`.
pub fn stationary_law(transition: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = transition.len();
    if n == 0 || transition.iter().any(|r| r.len() != n) {
        return Err(Error::Config("transition matrix must be square and non-empty".into()));
    }
    let mut a = vec![vec![0.0; n + 1]; n];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = transition[j][i] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..n {
        a[n - 1][j] = 1.0;
    }
    a[n - 1][n] = 1.0;
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap();
        if a[piv][col].abs() < 1e-14 {
            return Err(Error::Config("transition matrix has no unique stationary law".into()));
        }
        a.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..=n {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
    }
    let mut pi: Vec<f64> = (0..n).map(|i| (a[i][n] / a[i][i]).max(0.0)).collect();
    let s: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|v| *v /= s);
    Ok(pi)
}

/// `#{k ≤ j ≤ k + len - 1 : γ_j ≤ threshold}`.
pub fn good_count(seq: &ParamSequence, k: usize, len: usize, threshold: f64) -> Result<usize> {
    let mut count = 0;
    for j in k..k + len {
        if seq.gamma_at(j)? <= threshold {
            count += 1;
        }
    }
    Ok(count)
}

/// Prefix counts `c[n] = good_count(seq, 1, n, threshold)` for `n = 0..=n_max`.
pub fn good_prefix_counts(seq: &ParamSequence, threshold: f64, n_max: usize) -> Result<Vec<usize>> {
    let mut counts = Vec::with_capacity(n_max + 1);
    counts.push(0);
    let mut c = 0;
    for j in 1..=n_max {
        if seq.gamma_at(j)? <= threshold {
            c += 1;
        }
        counts.push(c);
    }
    Ok(counts)
}

/// Empirical frequency parameters: for all `n_start ≤ n ≤ n_max`,
/// `good_count(1, n) / n ∈ [a(1 - κ), a(1 + κ)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyEstimate {
    pub a: f64,
    pub kappa: f64,
    pub n_start: usize,
}

/// Tightest `(a, κ, N)` with `N ≤ n_max / 2` (smallest `κ`, then smallest `N`).
pub fn check_frequency(seq: &ParamSequence, threshold: f64, n_max: usize) -> Result<FrequencyEstimate> {
    if n_max < 10 {
        return Err(Error::Param("n_max must be at least 10".into()));
    }
    let counts = good_prefix_counts(seq, threshold, n_max)?;
    if counts[n_max] == 0 {
        return Err(Error::NoGoodMaps { threshold, n: n_max });
    }
    let ratio = |n: usize| counts[n] as f64 / n as f64;
    // suffix extrema of the ratio over [N, n_max]
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut best: Option<FrequencyEstimate> = None;
    for n in (1..=n_max).rev() {
        let r = ratio(n);
        lo = lo.min(r);
        hi = hi.max(r);
        if n > n_max / 2 {
            continue;
        }
        let a = 0.5 * (lo + hi);
        let kappa = if a > 0.0 { (hi - lo) / (hi + lo) } else { f64::INFINITY };
        if best.map_or(true, |b| kappa <= b.kappa) {
            best = Some(FrequencyEstimate { a, kappa, n_start: n });
        }
    }
    Ok(best.expect("n_max >= 10 leaves at least one candidate"))
}

/// Deviation profile `Θ_n = |good_count(1, n)/n - b|` and its running supremum.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaProfile {
    /// `Θ_n` for `n = 1..=n_max` (index 0 is unused and set to `Θ*_1`).
    pub theta: Vec<f64>,
    /// `Θ*_j = sup_{j ≤ ℓ ≤ n_max} Θ_ℓ`: a tabulated-range supremum, not the
    /// supremum over the infinite tail.
    pub sup_tail: TailTable,
}

pub fn theta_profile(seq: &ParamSequence, threshold: f64, b: f64, n_max: usize) -> Result<ThetaProfile> {
    if !(b > 0.0 && b <= 1.0) {
        return Err(Error::Param("b must lie in (0, 1]".into()));
    }
    let counts = good_prefix_counts(seq, threshold, n_max)?;
    let mut theta = vec![0.0; n_max + 1];
    for n in 1..=n_max {
        theta[n] = (counts[n] as f64 / n as f64 - b).abs();
    }
    let mut sup = vec![0.0; n_max + 1];
    let mut run: f64 = 0.0;
    for n in (1..=n_max).rev() {
        run = run.max(theta[n]);
        sup[n] = run;
    }
    sup[0] = run;
    theta[0] = run;
    Ok(ThetaProfile { theta, sup_tail: TailTable::new(TailLabel::Theta, 1, sup)? })
}

/// One support entry of a JSON sequence config: either a bare `γ` or an object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamEntry {
    Gamma(f64),
    Full {
        gamma: f64,
        #[serde(default)]
        beta: Option<f64>,
    },
}

/// JSON sequence configuration. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceConfig {
    pub kind: String,
    pub family: Family,
    #[serde(default)]
    pub support: Option<Vec<ParamEntry>>,
    #[serde(default)]
    pub probs: Option<Vec<f64>>,
    #[serde(default)]
    pub transition: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub initial: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub cycle: Option<Vec<ParamEntry>>,
    /// Default `β` for Cui entries given as bare numbers.
    #[serde(default)]
    pub beta: Option<f64>,
}

impl SequenceConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("line {}: {e}", e.line())))
    }

    fn entries(&self, list: &[ParamEntry]) -> Vec<MapParams> {
        list.iter()
            .map(|e| {
                let (gamma, beta) = match *e {
                    ParamEntry::Gamma(g) => (g, None),
                    ParamEntry::Full { gamma, beta } => (gamma, beta),
                };
                let mut p = MapParams::new(self.family, gamma);
                if self.family == Family::Cui {
                    p.beta = beta.or(self.beta).unwrap_or(1.0);
                }
                p
            })
            .collect()
    }

    fn require<'a, T>(field: &'a Option<T>, name: &str, kind: &str) -> Result<&'a T> {
        field.as_ref().ok_or_else(|| Error::Config(format!("kind '{kind}' requires '{name}'")))
    }

    pub fn build(&self) -> Result<ParamSequence> {
        let kind = self.kind.as_str();
        match kind {
            "explicit" => {
                let list = Self::require(&self.support, "support", kind)?;
                ParamSequence::explicit(self.entries(list))
            }
            "periodic" => {
                let list = Self::require(&self.cycle, "cycle", kind)?;
                ParamSequence::periodic(self.entries(list))
            }
            "iid" => {
                let list = Self::require(&self.support, "support", kind)?;
                let probs = Self::require(&self.probs, "probs", kind)?.clone();
                let seed = *Self::require(&self.seed, "seed", kind)?;
                ParamSequence::iid(self.entries(list), probs, seed)
            }
            "markov" => {
                let list = Self::require(&self.support, "support", kind)?;
                let transition = Self::require(&self.transition, "transition", kind)?.clone();
                let seed = *Self::require(&self.seed, "seed", kind)?;
                let initial = match &self.initial {
                    Some(v) => v.clone(),
                    None => stationary_law(&transition)?,
                };
                ParamSequence::new(SequenceKind::Markov { support: self.entries(list), transition, initial, seed })
            }
            other => Err(Error::Config(format!("unknown sequence kind '{other}'"))),
        }
    }
}
