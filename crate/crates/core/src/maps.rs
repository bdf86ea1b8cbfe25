//! The four intermittent map families and their inverse branches.
//!
//! * LSV: `T(x) = x(1 + 2^γ x^γ)` on `[0, 1/2)`, `2x - 1` on `[1/2, 1]`, `γ ∈ (0, 1)`.
//! * Cui: LSV left branch, right branch `2^β (x - 1/2)^β`, `β ≥ 1`.
//! * Pikovsky: odd map on `[-1, 1]` given implicitly on `(0, 1]` by
//!   `x = (1 + T)^γ / (2γ)` for `x ≤ 1/(2γ)` and `x = T + (1 - T)^γ / (2γ)` otherwise,
//!   `γ ∈ (1, 3)`. Neutral fixed points at `±1`, infinite slope at `0`.
//! * Grossmann–Horner (one concrete member): `T(x) = 1 - 2 sqrt|x|` on `[-1, 1]`,
//!   i.e. `b = 2`, `η = 1/2`, and `x ± a|x ∓ 1|^γ` near `∓1` with `a = 1/4`, `γ = 2`.
//!   Both branches send `±1` to the neutral fixed point `-1`.
//!
//! State intervals are closed. The interior boundary point (`1/2` or `0`) belongs
//! to the right branch; evaluating Pikovsky or Grossmann–Horner at `0` is an error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roots;

/// Map family tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Lsv,
    Cui,
    Pikovsky,
    #[serde(alias = "gh")]
    GrossmannHorner,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Lsv => "lsv",
            Family::Cui => "cui",
            Family::Pikovsky => "pikovsky",
            Family::GrossmannHorner => "grossmann_horner",
        }
    }

    /// Closed state interval `[a, b]`.
    pub fn state_interval(self) -> (f64, f64) {
        match self {
            Family::Lsv | Family::Cui => (0.0, 1.0),
            Family::Pikovsky | Family::GrossmannHorner => (-1.0, 1.0),
        }
    }

    /// Location of the neutral fixed points.
    pub fn neutral_points(self) -> &'static [f64] {
        match self {
            Family::Lsv | Family::Cui => &[0.0],
            Family::Pikovsky => &[-1.0, 1.0],
            Family::GrossmannHorner => &[-1.0],
        }
    }

    /// Point separating the two branches.
    pub fn branch_boundary(self) -> f64 {
        match self {
            Family::Lsv | Family::Cui => 0.5,
            Family::Pikovsky | Family::GrossmannHorner => 0.0,
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lsv" => Ok(Family::Lsv),
            "cui" => Ok(Family::Cui),
            "pikovsky" => Ok(Family::Pikovsky),
            "gh" | "grossmann_horner" | "grossmann-horner" => Ok(Family::GrossmannHorner),
            other => Err(Error::Param(format!("unknown family '{other}'"))),
        }
    }
}

/// One of the two surjective branches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BranchId {
    Left,
    Right,
}

/// Parameters of a single map `T_k`.
///
/// `beta` is only meaningful for Cui maps and `eta` only for Grossmann–Horner;
/// the constructors fill in the fixed values for the other families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapParams {
    pub family: Family,
    pub gamma: f64,
    #[serde(default = "one")]
    pub beta: f64,
    #[serde(default = "half")]
    pub eta: f64,
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

/// Result of [`MapParams::validate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Validation {
    /// Cui only: whether the map has an absolutely continuous invariant
    /// probability measure (`γβ < 1`).
    pub has_acip: Option<bool>,
}

const GH_GAMMA: f64 = 2.0;
const GH_ETA: f64 = 0.5;

impl MapParams {
    pub fn lsv(gamma: f64) -> Self {
        MapParams { family: Family::Lsv, gamma, beta: 1.0, eta: 0.5 }
    }

    pub fn cui(gamma: f64, beta: f64) -> Self {
        MapParams { family: Family::Cui, gamma, beta, eta: 0.5 }
    }

    pub fn pikovsky(gamma: f64) -> Self {
        MapParams { family: Family::Pikovsky, gamma, beta: 1.0, eta: 0.5 }
    }

    /// The concrete Grossmann–Horner map `1 - 2 sqrt|x|`.
    pub fn grossmann_horner() -> Self {
        MapParams { family: Family::GrossmannHorner, gamma: GH_GAMMA, beta: 1.0, eta: GH_ETA }
    }

    /// Build parameters for `family` with intermittency `gamma`.
    ///
    /// Grossmann–Horner ignores `gamma` unless it differs from the fixed instance,
    /// in which case validation will reject it.
    pub fn new(family: Family, gamma: f64) -> Self {
        match family {
            Family::Lsv => Self::lsv(gamma),
            Family::Cui => Self::cui(gamma, 1.0),
            Family::Pikovsky => Self::pikovsky(gamma),
            Family::GrossmannHorner => MapParams { gamma, ..Self::grossmann_horner() },
        }
    }

    pub fn validate(&self) -> Result<Validation> {
        let g = self.gamma;
        match self.family {
            Family::Lsv => {
                if !(g > 0.0 && g < 1.0) {
                    return Err(Error::Param("gamma must lie in (0,1)".into()));
                }
                Ok(Validation { has_acip: None })
            }
            Family::Cui => {
                if !(g > 0.0 && g < 1.0) {
                    return Err(Error::Param("gamma must lie in (0,1)".into()));
                }
                if !(self.beta >= 1.0) || !self.beta.is_finite() {
                    return Err(Error::Param("beta must be >= 1".into()));
                }
                Ok(Validation { has_acip: Some(g * self.beta < 1.0) })
            }
            Family::Pikovsky => {
                if !(g > 1.0 && g < 3.0) {
                    return Err(Error::Param("gamma must lie in (1,3)".into()));
                }
                Ok(Validation { has_acip: None })
            }
            Family::GrossmannHorner => {
                if g != GH_GAMMA {
                    return Err(Error::Param("gamma must equal 2 for the Grossmann-Horner instance".into()));
                }
                if self.eta != GH_ETA {
                    return Err(Error::Param("eta must equal 1/2 for the Grossmann-Horner instance".into()));
                }
                Ok(Validation { has_acip: None })
            }
        }
    }

    pub fn state_interval(&self) -> (f64, f64) {
        self.family.state_interval()
    }

    /// Branch containing `x`; the interior boundary point goes to the right.
    pub fn branch_of(&self, x: f64) -> BranchId {
        if x < self.family.branch_boundary() {
            BranchId::Left
        } else {
            BranchId::Right
        }
    }

    fn check_domain(&self, x: f64) -> Result<()> {
        let (a, b) = self.state_interval();
        if !(x >= a && x <= b) {
            return Err(Error::Domain { x, what: format!("state interval [{a}, {b}]") });
        }
        Ok(())
    }

    /// `T(x)`.
    pub fn eval_map(&self, x: f64) -> Result<f64> {
        self.check_domain(x)?;
        match self.family {
            Family::Lsv | Family::Cui => {
                if x < 0.5 {
                    Ok(lsv_left(self.gamma, x))
                } else if self.family == Family::Lsv {
                    Ok(2.0 * x - 1.0)
                } else {
                    Ok((2.0 * x - 1.0).powf(self.beta))
                }
            }
            Family::Pikovsky => {
                if x == 0.0 {
                    return Err(singular(x, "jump discontinuity"));
                }
                let t = pikovsky_forward(self.gamma, x.abs())?;
                Ok(if x < 0.0 { -t } else { t })
            }
            Family::GrossmannHorner => {
                if x == 0.0 {
                    return Err(singular(x, "infinite derivative"));
                }
                Ok(1.0 - 2.0 * x.abs().sqrt())
            }
        }
    }

    /// Signed derivative `T'(x)`.
    pub fn derivative(&self, x: f64) -> Result<f64> {
        self.check_domain(x)?;
        let g = self.gamma;
        match self.family {
            Family::Lsv | Family::Cui => {
                if x == 0.5 {
                    return Err(singular(x, "one-sided derivatives differ at the branch boundary"));
                }
                if x < 0.5 {
                    Ok(1.0 + (1.0 + g) * (2.0 * x).powf(g))
                } else if self.family == Family::Lsv {
                    Ok(2.0)
                } else {
                    let b = self.beta;
                    Ok(2.0 * b * (2.0 * x - 1.0).powf(b - 1.0))
                }
            }
            Family::Pikovsky => {
                if x == 0.0 {
                    return Err(singular(x, "infinite derivative"));
                }
                let t = pikovsky_forward(g, x.abs())?;
                // dx/dT on the explicit inverse branch
                let dxdt = if t <= 0.0 {
                    0.5 * (1.0 + t).powf(g - 1.0)
                } else {
                    1.0 - 0.5 * (1.0 - t).powf(g - 1.0)
                };
                Ok(1.0 / dxdt)
            }
            Family::GrossmannHorner => {
                if x == 0.0 {
                    return Err(singular(x, "infinite derivative"));
                }
                Ok(-x.signum() / x.abs().sqrt())
            }
        }
    }

    /// Image of a branch (closed interval).
    pub fn branch_image(&self, _branch: BranchId) -> (f64, f64) {
        self.state_interval()
    }

    /// Domain of a branch, as a closed interval (endpoints may be excluded points).
    pub fn branch_domain(&self, branch: BranchId) -> (f64, f64) {
        let (a, b) = self.state_interval();
        let c = self.family.branch_boundary();
        match branch {
            BranchId::Left => (a, c),
            BranchId::Right => (c, b),
        }
    }

    /// The inverse of `T` restricted to `branch`, evaluated at `y`.
    pub fn inverse_branch(&self, branch: BranchId, y: f64) -> Result<f64> {
        let (a, b) = self.branch_image(branch);
        if !(y >= a && y <= b) {
            return Err(Error::Domain { x: y, what: format!("branch image [{a}, {b}]") });
        }
        let g = self.gamma;
        match (self.family, branch) {
            (Family::Lsv | Family::Cui, BranchId::Left) => lsv_left_inverse(g, y),
            (Family::Lsv, BranchId::Right) => Ok(0.5 * (y + 1.0)),
            (Family::Cui, BranchId::Right) => Ok(0.5 * (1.0 + y.powf(1.0 / self.beta))),
            (Family::Pikovsky, BranchId::Right) => Ok(pikovsky_inverse_plus(g, y)),
            (Family::Pikovsky, BranchId::Left) => Ok(-pikovsky_inverse_plus(g, -y)),
            (Family::GrossmannHorner, BranchId::Right) => Ok(0.25 * (1.0 - y) * (1.0 - y)),
            (Family::GrossmannHorner, BranchId::Left) => Ok(-0.25 * (1.0 - y) * (1.0 - y)),
        }
    }

    /// `|d/dy inverse_branch(branch, y)|`, the transfer-operator weight.
    pub fn inverse_branch_derivative(&self, branch: BranchId, y: f64) -> Result<f64> {
        let (a, b) = self.branch_image(branch);
        if !(y >= a && y <= b) {
            return Err(Error::Domain { x: y, what: format!("branch image [{a}, {b}]") });
        }
        let g = self.gamma;
        match (self.family, branch) {
            (Family::Lsv | Family::Cui, BranchId::Left) => {
                let x = lsv_left_inverse(g, y)?;
                Ok(1.0 / (1.0 + (1.0 + g) * (2.0 * x).powf(g)))
            }
            (Family::Lsv, BranchId::Right) => Ok(0.5),
            (Family::Cui, BranchId::Right) => {
                let b = self.beta;
                if b > 1.0 && y == 0.0 {
                    return Err(singular(0.5, "critical point of the right branch"));
                }
                Ok(y.powf(1.0 / b - 1.0) / (2.0 * b))
            }
            (Family::Pikovsky, _) => {
                let s = if branch == BranchId::Right { y } else { -y };
                if s == -1.0 {
                    return Err(singular(0.0, "infinite derivative"));
                }
                Ok(pikovsky_inverse_plus_slope(g, s))
            }
            (Family::GrossmannHorner, _) => {
                if y == 1.0 {
                    return Err(singular(0.0, "infinite derivative"));
                }
                Ok(0.5 * (1.0 - y))
            }
        }
    }
}

fn singular(x: f64, reason: &str) -> Error {
    Error::SingularPoint { x, reason: reason.to_string() }
}

/// LSV left branch `x(1 + (2x)^γ)`.
#[inline]
pub(crate) fn lsv_left(gamma: f64, x: f64) -> f64 {
    x * (1.0 + (2.0 * x).powf(gamma))
}

/// Inverse of the LSV left branch on `[0, 1]`.
///
/// The root lies in `[y / (1 + (2y)^γ), min(y, 1/2)]`, a bracket tight enough
/// that a handful of Newton steps reach full relative precision even for
/// `y` near the neutral fixed point.
pub(crate) fn lsv_left_inverse(gamma: f64, y: f64) -> Result<f64> {
    if y <= 0.0 {
        return Ok(0.0);
    }
    if y >= 1.0 {
        return Ok(0.5);
    }
    let c = 2f64.powf(gamma);
    let lo = y / (1.0 + (2.0 * y).powf(gamma));
    let hi = y.min(0.5);
    let f = |x: f64| x + c * x.powf(1.0 + gamma) - y;
    // the bracket is exact in real arithmetic; rounding can close it
    if f(lo) >= 0.0 {
        return Ok(lo);
    }
    if f(hi) <= 0.0 {
        return Ok(hi);
    }
    roots::safeguarded_newton(
        f,
        |x| 1.0 + (1.0 + gamma) * c * x.powf(gamma),
        lo,
        hi,
        lo,
        4.0 * f64::EPSILON,
        80,
    )
}

/// Right Pikovsky inverse branch `g₊ : [-1, 1] → [0, 1]`.
#[inline]
pub(crate) fn pikovsky_inverse_plus(gamma: f64, y: f64) -> f64 {
    if y <= 0.0 {
        (1.0 + y).powf(gamma) / (2.0 * gamma)
    } else {
        y + (1.0 - y).powf(gamma) / (2.0 * gamma)
    }
}

#[inline]
fn pikovsky_inverse_plus_slope(gamma: f64, y: f64) -> f64 {
    if y <= 0.0 {
        0.5 * (1.0 + y).powf(gamma - 1.0)
    } else {
        1.0 - 0.5 * (1.0 - y).powf(gamma - 1.0)
    }
}

/// `1 - g₊(y)` in terms of `s = 1 - y ∈ [0, 1]`: `s - s^γ/(2γ)`.
#[inline]
pub(crate) fn pikovsky_gap(gamma: f64, s: f64) -> f64 {
    s - s.powf(gamma) / (2.0 * gamma)
}

/// Forward Pikovsky map on `(0, 1]`.
///
/// The first piece inverts in closed form. On the second piece we solve
/// `s - s^γ/(2γ) = 1 - x` for `s = 1 - T` (shifted coordinates near the neutral
/// fixed point): bisection to width 1e-14, then at most five Newton steps.
fn pikovsky_forward(gamma: f64, x: f64) -> Result<f64> {
    let corner = 1.0 / (2.0 * gamma);
    if x <= corner {
        return Ok(((2.0 * gamma * x).powf(1.0 / gamma) - 1.0).min(0.0));
    }
    let u = 1.0 - x;
    if u <= 0.0 {
        return Ok(1.0);
    }
    // s - s^γ/(2γ) is increasing with slope in [1/2, 1], so s ∈ [u, 2u].
    let f = |s: f64| pikovsky_gap(gamma, s) - u;
    let (lo, hi) = roots::bisect(f, u, (2.0 * u).min(1.0), 1e-14)?;
    let s = roots::safeguarded_newton(
        f,
        |s| 1.0 - 0.5 * s.powf(gamma - 1.0),
        lo,
        hi,
        0.5 * (lo + hi),
        f64::EPSILON,
        5,
    )?;
    Ok(1.0 - s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn all_families() -> Vec<MapParams> {
        vec![
            MapParams::lsv(0.5),
            MapParams::lsv(0.9),
            MapParams::cui(0.6, 2.0),
            MapParams::pikovsky(1.5),
            MapParams::pikovsky(2.0),
            MapParams::pikovsky(2.8),
            MapParams::grossmann_horner(),
        ]
    }

    #[test]
    fn eval_examples() {
        let lsv = MapParams::lsv(0.5);
        assert_abs_diff_eq!(lsv.eval_map(0.75).unwrap(), 0.5, epsilon = 1e-15);
        assert_eq!(lsv.eval_map(0.0).unwrap(), 0.0);
        let pik = MapParams::pikovsky(1.5);
        assert_abs_diff_eq!(pik.eval_map(1.0 / 3.0).unwrap(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(pik.eval_map(1.0).unwrap(), 1.0, epsilon = 1e-15);
        let gh = MapParams::grossmann_horner();
        assert_abs_diff_eq!(gh.eval_map(0.25).unwrap(), 0.0, epsilon = 1e-15);
        // parametric form x = (1 - T)^2 / 4
        let t = gh.eval_map(0.25).unwrap();
        assert_abs_diff_eq!(0.25 * (1.0 - t) * (1.0 - t), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn eval_errors() {
        assert!(matches!(MapParams::lsv(0.5).eval_map(1.5), Err(Error::Domain { .. })));
        assert!(matches!(MapParams::pikovsky(1.5).eval_map(0.0), Err(Error::SingularPoint { .. })));
        assert!(matches!(
            MapParams::grossmann_horner().eval_map(0.0),
            Err(Error::SingularPoint { .. })
        ));
        assert!(matches!(MapParams::pikovsky(1.5).eval_map(-1.2), Err(Error::Domain { .. })));
    }

    #[test]
    fn derivative_examples() {
        let lsv = MapParams::lsv(0.5);
        assert_abs_diff_eq!(lsv.derivative(1e-14).unwrap(), 1.0, epsilon = 1e-6);
        assert!(lsv.derivative(0.5).is_err());
        let pik = MapParams::pikovsky(1.5);
        assert_abs_diff_eq!(pik.derivative(1.0 / 3.0).unwrap(), 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(pik.derivative(1.0 - 1e-12).unwrap(), 1.0, epsilon = 1e-5);
        assert!(pik.derivative(0.0).is_err());
    }

    #[test]
    fn derivative_matches_finite_differences() {
        for p in all_families() {
            let (a, b) = p.state_interval();
            for i in 1..40 {
                let x = a + (b - a) * (i as f64 + 0.37) / 41.0;
                if x.abs() < 1e-3 || (x - 0.5).abs() < 1e-3 {
                    continue;
                }
                let h = 1e-6;
                let fd = (p.eval_map(x + h).unwrap() - p.eval_map(x - h).unwrap()) / (2.0 * h);
                let d = p.derivative(x).unwrap();
                assert!((fd - d).abs() <= 1e-4 * d.abs().max(1.0), "{p:?} x={x} fd={fd} d={d}");
            }
        }
    }

    #[test]
    fn inverse_branch_examples() {
        let lsv = MapParams::lsv(0.5);
        assert_eq!(lsv.inverse_branch(BranchId::Right, 0.0).unwrap(), 0.5);
        for g in [0.1, 0.5, 0.99] {
            assert_eq!(MapParams::lsv(g).inverse_branch(BranchId::Left, 1.0).unwrap(), 0.5);
        }
        let pik = MapParams::pikovsky(1.5);
        assert_abs_diff_eq!(pik.inverse_branch(BranchId::Right, 0.0).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
        for y in [0.4, -0.4] {
            let l = pik.inverse_branch(BranchId::Left, y).unwrap();
            let r = pik.inverse_branch(BranchId::Right, -y).unwrap();
            assert_abs_diff_eq!(l, -r, epsilon = 1e-15);
        }
        assert!(matches!(lsv.inverse_branch(BranchId::Left, 1.1), Err(Error::Domain { .. })));
    }

    #[test]
    fn inverse_branch_derivative_examples() {
        for g in [0.2, 0.5, 0.8] {
            let p = MapParams::lsv(g);
            for y in [0.0, 0.3, 1.0] {
                assert_eq!(p.inverse_branch_derivative(BranchId::Right, y).unwrap(), 0.5);
            }
        }
        let pik = MapParams::pikovsky(1.5);
        assert_abs_diff_eq!(pik.inverse_branch_derivative(BranchId::Right, 0.0).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(
            pik.inverse_branch_derivative(BranchId::Right, 1.0 - 1e-12).unwrap(),
            1.0,
            epsilon = 1e-5
        );
        assert!(pik.inverse_branch_derivative(BranchId::Right, -1.0).is_err());
        assert!(MapParams::cui(0.5, 2.0).inverse_branch_derivative(BranchId::Right, 0.0).is_err());
    }

    #[test]
    fn inverse_derivative_is_reciprocal_of_forward_derivative() {
        for p in all_families() {
            for branch in [BranchId::Left, BranchId::Right] {
                for i in 1..50 {
                    let y = -1.0 + 2.0 * i as f64 / 50.0;
                    let (lo, hi) = p.branch_image(branch);
                    if y <= lo || y >= hi {
                        continue;
                    }
                    let x = p.inverse_branch(branch, y).unwrap();
                    if x == p.family.branch_boundary() || x.abs() < 1e-12 {
                        continue;
                    }
                    let w = p.inverse_branch_derivative(branch, y).unwrap();
                    let d = p.derivative(x).unwrap();
                    assert!((w - 1.0 / d.abs()).abs() < 1e-9, "{p:?} {branch:?} y={y}");
                }
            }
        }
    }

    #[test]
    fn validate_examples() {
        assert_eq!(MapParams::lsv(0.5).validate().unwrap().has_acip, None);
        match MapParams::pikovsky(3.5).validate() {
            Err(Error::Param(msg)) => assert_eq!(msg, "gamma must lie in (1,3)"),
            other => panic!("{other:?}"),
        }
        assert_eq!(MapParams::cui(0.6, 2.0).validate().unwrap().has_acip, Some(false));
        assert_eq!(MapParams::cui(0.4, 2.0).validate().unwrap().has_acip, Some(true));
        assert!(MapParams::lsv(1.0).validate().is_err());
        assert!(MapParams::cui(0.5, 0.5).validate().is_err());
        assert!(MapParams::grossmann_horner().validate().is_ok());
        assert!(MapParams::new(Family::GrossmannHorner, 1.5).validate().is_err());
    }

    #[test]
    fn round_trip_grid() {
        // 10^3 uniformly spaced y per branch per family
        for p in all_families() {
            for branch in [BranchId::Left, BranchId::Right] {
                let (lo, hi) = p.branch_image(branch);
                for i in 0..1000 {
                    let y = lo + (hi - lo) * (i as f64 + 0.5) / 1000.0;
                    let x = p.inverse_branch(branch, y).unwrap();
                    assert_eq!(p.branch_of(x), branch, "{p:?} y={y} x={x}");
                    let back = p.eval_map(x).unwrap();
                    assert!((back - y).abs() <= 1e-10, "{p:?} {branch:?} y={y} back={back}");
                }
            }
        }
    }

    #[test]
    fn expansion_and_neutral_points() {
        for p in all_families() {
            if p.family == Family::Cui {
                continue; // the Cui right branch contracts near its critical point
            }
            let (a, b) = p.state_interval();
            for i in 0..=2000 {
                let x = a + (b - a) * i as f64 / 2000.0;
                let Ok(d) = p.derivative(x) else { continue };
                // x = 1 is not fixed for Grossmann-Horner but has slope -1 (it maps onto -1)
                let neutral = p.family.neutral_points().iter().any(|&q| (q - x).abs() < 1e-12)
                    || (p.family == Family::GrossmannHorner && x == 1.0);
                if neutral {
                    assert!((d.abs() - 1.0).abs() < 1e-9, "{p:?} x={x} d={d}");
                } else {
                    assert!(d.abs() > 1.0, "{p:?} x={x} d={d}");
                }
            }
        }
    }

    #[test]
    fn branch_monotonicity() {
        for p in all_families() {
            for branch in [BranchId::Left, BranchId::Right] {
                let (lo, hi) = p.branch_domain(branch);
                let xs: Vec<f64> = (1..500).map(|i| lo + (hi - lo) * i as f64 / 500.0).collect();
                let ys: Vec<f64> = xs.iter().map(|&x| p.eval_map(x).unwrap()).collect();
                let inc = ys.windows(2).all(|w| w[1] > w[0]);
                let dec = ys.windows(2).all(|w| w[1] < w[0]);
                match (p.family, branch) {
                    (Family::GrossmannHorner, BranchId::Right) => assert!(dec),
                    _ => assert!(inc, "{p:?} {branch:?}"),
                }
            }
        }
    }

    proptest! {
        #[test]
        fn pikovsky_is_odd(gamma in 1.05f64..2.95, x in 1e-9f64..1.0) {
            let p = MapParams::pikovsky(gamma);
            let a = p.eval_map(x).unwrap();
            let b = p.eval_map(-x).unwrap();
            prop_assert!((a + b).abs() <= 1e-12);
        }

        #[test]
        fn grossmann_horner_is_even(x in 1e-12f64..1.0) {
            let p = MapParams::grossmann_horner();
            prop_assert_eq!(p.eval_map(x).unwrap(), p.eval_map(-x).unwrap());
        }

        #[test]
        fn pikovsky_implicit_relation(gamma in 1.05f64..2.95, x in 1e-9f64..=1.0) {
            let t = MapParams::pikovsky(gamma).eval_map(x).unwrap();
            let residual = x - pikovsky_inverse_plus(gamma, t);
            prop_assert!(residual.abs() <= 1e-14, "residual {}", residual);
        }

        #[test]
        fn lsv_left_inverse_relative_precision(gamma in 0.05f64..0.95, e in -30.0f64..0.0) {
            let y = 10f64.powf(e);
            let x = lsv_left_inverse(gamma, y).unwrap();
            prop_assert!(((lsv_left(gamma, x) - y) / y).abs() < 1e-14);
        }
    }
}
