//! Training-error bounds for boosted chains, probabilistic trees and nested trees.
//!
//! `F(T, ρ) = ∏_{t=0}^{T-1} (t+ρ)/(t+1) = Γ(T+ρ) / (Γ(T+1) Γ(ρ)) = 1/(T·B(T, ρ))`
//! is the bound of a greedily grown tree with `T` inner nodes whose nodes
//! each satisfy `Z_{s+} + Z_{s-} <= ρ`. It is defined for every real `T >= 1`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::specfun::{digamma_unchecked, ln_gamma_ratio, ln_gamma_unchecked};

fn check_rho(rho: f64) -> Result<()> {
    if (0.0..1.0).contains(&rho) {
        Ok(())
    } else {
        Err(domain(format!("rho must lie in [0, 1), got {rho}")))
    }
}

fn check_rho_open(rho: f64) -> Result<()> {
    if rho > 0.0 && rho < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("rho must lie in (0, 1), got {rho}")))
    }
}

fn check_size(t: f64) -> Result<()> {
    if t.is_finite() && t >= 1.0 {
        Ok(())
    } else {
        Err(domain(format!("tree size must be a finite real >= 1, got {t}")))
    }
}

/// Per-stage factor `ρ = sqrt(1 − 4ε²)` for a weak learner with edge `ε`.
pub fn rho_from_epsilon(epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon <= 0.5) {
        return Err(domain(format!("epsilon must lie in (0, 1/2], got {epsilon}")));
    }
    Ok((1.0 - 4.0 * epsilon * epsilon).max(0.0).sqrt())
}

/// Inverse of [`rho_from_epsilon`].
pub fn epsilon_from_rho(rho: f64) -> Result<f64> {
    check_rho(rho)?;
    Ok(0.5 * (1.0 - rho * rho).sqrt())
}

/// Boosted-chain bound `ρ^T`.
pub fn bound_adaboost(t: u64, rho: f64) -> Result<f64> {
    if t == 0 {
        return Err(domain("number of rounds must be >= 1"));
    }
    check_rho(rho)?;
    Ok(rho.powf(t as f64))
}

pub(crate) fn bound_f_unchecked(t: f64, rho: f64) -> f64 {
    if rho == 0.0 {
        return 0.0;
    }
    (ln_gamma_ratio(t, rho, 1.0) - ln_gamma_unchecked(rho)).exp()
}

/// Tree bound `F(T, ρ)` for real `T >= 1`, `ρ ∈ [0, 1)`.
pub fn bound_f(t: f64, rho: f64) -> Result<f64> {
    check_size(t)?;
    check_rho(rho)?;
    Ok(bound_f_unchecked(t, rho))
}

/// Large-`T` approximation `T^{ρ−1} / Γ(ρ)`.
pub fn bound_f_asymptotic(t: f64, rho: f64) -> Result<f64> {
    check_size(t)?;
    check_rho_open(rho)?;
    Ok(((rho - 1.0) * t.ln() - ln_gamma_unchecked(rho)).exp())
}

/// Tree of trees: `T/T1` outer nodes, each a tree of `T1` weak classifiers.
pub fn bound_nested(t: u64, t1: f64, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    let total = t as f64;
    if !(t1 >= 1.0 && t1 <= total) {
        return Err(domain(format!("inner size must lie in [1, {t}], got {t1}")));
    }
    Ok(bound_f_unchecked(total / t1, bound_f_unchecked(t1, rho)))
}

/// Composition `F(T_L, … F(T_2, F(T_1, ρ)))`, innermost size first.
pub fn bound_nested_sizes(sizes: &[f64], rho: f64) -> Result<f64> {
    check_rho(rho)?;
    let mut value = rho;
    for &size in sizes {
        check_size(size)?;
        value = bound_f_unchecked(size, value);
    }
    Ok(value)
}

/// Iso-sized nesting: `L` levels, each tree of size `T^{1/L}`.
pub fn bound_iso_nested(t: u64, levels: u32, rho: f64) -> Result<f64> {
    if t == 0 || levels == 0 {
        return Err(domain("T and L must both be >= 1"));
    }
    check_rho(rho)?;
    let size = (t as f64).powf(1.0 / levels as f64);
    let mut value = rho;
    for _ in 0..levels {
        value = bound_f_unchecked(size, value);
    }
    Ok(value)
}

/// 2-matryoshka bound: `log2(T)` applications of `x ↦ x(1+x)/2` to `ρ`.
pub fn bound_m2(t: u64, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    if t == 0 || !t.is_power_of_two() {
        return Err(domain(format!("M2 requires T to be a power of two, got {t}")));
    }
    let mut value = rho;
    for _ in 0..t.trailing_zeros() {
        value = 0.5 * value * (1.0 + value);
    }
    Ok(value)
}

/// `∂F/∂T = −F(T,ρ) (1/T + ψ(T) − ψ(T+ρ))`.
pub fn df_dt(t: f64, rho: f64) -> Result<f64> {
    check_size(t)?;
    check_rho_open(rho)?;
    let f = bound_f_unchecked(t, rho);
    Ok(-f * (1.0 / t + digamma_unchecked(t) - digamma_unchecked(t + rho)))
}

/// `∂F/∂ρ = −F(T,ρ) (ψ(ρ) − ψ(T+ρ))`.
pub fn df_drho(t: f64, rho: f64) -> Result<f64> {
    check_size(t)?;
    check_rho_open(rho)?;
    let f = bound_f_unchecked(t, rho);
    Ok(-f * (digamma_unchecked(rho) - digamma_unchecked(t + rho)))
}

/// Decrease rate per node of a tree whose nodes are copies of a subtree with
/// bound `c` and `t` nodes: `(c/t)(γ + ψ(c) + 1/c − 1)`.
///
/// `γ` is taken as `−ψ(1)` from the same digamma routine so the rate vanishes
/// exactly at `c = 1`.
pub fn rate_matryoshka(c: f64, t: f64) -> Result<f64> {
    if !(c > 0.0 && c <= 1.0) {
        return Err(domain(format!("subtree bound must lie in (0, 1], got {c}")));
    }
    check_size(t)?;
    let gamma = -digamma_unchecked(1.0);
    Ok((c / t) * (gamma + digamma_unchecked(c) + 1.0 / c - 1.0))
}

/// Central-difference decrease rate `(C(T+1) − C(T−1)) / 2`.
pub fn rate_simple(c_prev: f64, c_next: f64) -> f64 {
    (c_next - c_prev) / 2.0
}

/// A labelled sequence of `(T, bound)` points, strictly increasing in `T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCurve {
    pub label: String,
    points: Vec<(f64, f64)>,
}

impl BoundCurve {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Result<Self> {
        for w in points.windows(2) {
            if w[1].0.partial_cmp(&w[0].0) != Some(std::cmp::Ordering::Greater) {
                return Err(Error::Domain("curve sizes must be strictly increasing".into()));
            }
        }
        if let Some(&(t, b)) = points.iter().find(|(t, b)| t.is_nan() || *t <= 0.0 || !(0.0..=1.0).contains(b)) {
            return Err(Error::Domain(format!("invalid curve point ({t}, {b})")));
        }
        Ok(BoundCurve { label: label.into(), points })
    }

    /// Samples `f` at the given sizes.
    pub fn sample<F>(label: impl Into<String>, sizes: &[f64], f: F) -> Result<Self>
    where
        F: Fn(f64) -> Result<f64>,
    {
        let points = sizes
            .iter()
            .map(|&t| f(t).map(|b| (t, b)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(label, points)
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // independent oracle: the running product ∏_{t<T} (t+ρ)/(t+1)
    fn product(t: u64, rho: f64) -> f64 {
        (0..t).map(|i| (i as f64 + rho) / (i as f64 + 1.0)).product()
    }

    const PAPER_RHOS: [f64; 5] = [31.0 / 32.0, 7.0 / 8.0, 3.0 / 4.0, 0.5, 0.25];

    #[test]
    fn rho_examples() {
        assert_eq!(rho_from_epsilon(0.5).unwrap(), 0.0);
        assert!((rho_from_epsilon(1e-9).unwrap() - 1.0).abs() < 1e-15);
        assert!((rho_from_epsilon(0.124).unwrap() - 31.0 / 32.0).abs() < 1e-4);
        let eps = epsilon_from_rho(31.0 / 32.0).unwrap();
        assert!((eps - 0.12402).abs() < 1e-5);
        assert_relative_eq!(rho_from_epsilon(eps).unwrap(), 31.0 / 32.0, max_relative = 1e-14);
        assert!(rho_from_epsilon(0.0).is_err());
        assert!(rho_from_epsilon(0.51).is_err());
    }

    #[test]
    fn adaboost_examples() {
        assert_eq!(bound_adaboost(1, 0.5).unwrap(), 0.5);
        assert_eq!(bound_adaboost(3, 0.5).unwrap(), 0.125);
        let mut prod = 1.0;
        for _ in 0..10 {
            prod *= 31.0 / 32.0;
        }
        assert_relative_eq!(bound_adaboost(10, 31.0 / 32.0).unwrap(), prod, max_relative = 1e-14);
        assert!((prod - 0.72798).abs() < 1e-5);
        assert!(bound_adaboost(0, 0.5).is_err());
    }

    #[test]
    fn f_examples() {
        assert_relative_eq!(bound_f(1.0, 0.5).unwrap(), 0.5, max_relative = 1e-14);
        assert_relative_eq!(bound_f(2.0, 31.0 / 32.0).unwrap(), 1953.0 / 2048.0, max_relative = 1e-14);
        assert_relative_eq!(bound_f(4.0, 0.5).unwrap(), 35.0 / 128.0, max_relative = 1e-14);
        assert_eq!(bound_f(5.0, 0.0).unwrap(), 0.0);
        assert!(bound_f(0.5, 0.5).is_err());
        assert!(bound_f(2.0, 1.0).is_err());
    }

    #[test]
    fn f_closed_form_matches_product() {
        for &rho in PAPER_RHOS.iter().chain(&[0.1, 0.3, 0.7, 0.9]) {
            let mut prod = 1.0;
            for t in 1..=2048u64 {
                prod *= (t as f64 - 1.0 + rho) / t as f64;
                let f = bound_f(t as f64, rho).unwrap();
                assert!(((f - prod) / prod).abs() <= 1e-12, "T={t} rho={rho}: {f} vs {prod}");
            }
        }
    }

    #[test]
    fn asymptotic_examples() {
        for t in [1.0, 10.0, 1e4] {
            assert!((bound_f_asymptotic(t, 1.0 - 1e-12).unwrap() - 1.0).abs() < 1e-9);
        }
        let expected = 0.1 / std::f64::consts::PI.sqrt();
        assert_relative_eq!(bound_f_asymptotic(100.0, 0.5).unwrap(), expected, max_relative = 1e-13);
        assert!((expected - 0.056419).abs() < 1e-6);
        let exact = product(1000, 0.5);
        let asym = bound_f_asymptotic(1000.0, 0.5).unwrap();
        assert!(((asym - exact) / exact).abs() <= 1e-3);
        assert!(bound_f_asymptotic(10.0, 0.0).is_err());
    }

    #[test]
    fn nested_examples() {
        let flat = bound_f(16.0, 0.5).unwrap();
        assert_relative_eq!(bound_nested(16, 1.0, 0.5).unwrap(), flat, max_relative = 1e-12);
        assert_relative_eq!(bound_nested(16, 16.0, 0.5).unwrap(), flat, max_relative = 1e-12);
        let inner = product(4, 0.5);
        assert_eq!(inner, 0.2734375);
        let expected = product(4, inner);
        assert!((expected - 0.10797).abs() < 1e-5);
        assert_relative_eq!(bound_nested(16, 4.0, 0.5).unwrap(), expected, max_relative = 1e-12);
        assert!(bound_nested(16, 0.5, 0.5).is_err());
        assert!(bound_nested(16, 17.0, 0.5).is_err());
    }

    #[test]
    fn iso_nested_examples() {
        for &t in &[1u64, 7, 64, 1000] {
            assert_relative_eq!(
                bound_iso_nested(t, 1, 0.3).unwrap(),
                bound_f(t as f64, 0.3).unwrap(),
                max_relative = 1e-14
            );
        }
        assert_relative_eq!(bound_iso_nested(4, 2, 0.5).unwrap(), 0.2578125, max_relative = 1e-13);
        let mut prev = f64::INFINITY;
        for l in 1..=10 {
            let v = bound_iso_nested(1024, l, 31.0 / 32.0).unwrap();
            assert!(v < prev, "L={l}");
            prev = v;
        }
        assert_relative_eq!(
            bound_nested_sizes(&[4.0, 4.0], 0.5).unwrap(),
            bound_nested(16, 4.0, 0.5).unwrap(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn m2_examples() {
        for &rho in &PAPER_RHOS {
            assert_eq!(bound_m2(1, rho).unwrap(), rho);
            assert_relative_eq!(bound_m2(2, rho).unwrap(), rho * (1.0 + rho) / 2.0, max_relative = 1e-15);
        }
        assert_eq!(bound_m2(4, 0.5).unwrap(), 0.2578125);
        assert!(bound_m2(6, 0.5).is_err());
        assert!(bound_m2(0, 0.5).is_err());
        let m8 = bound_m2(8, 0.75).unwrap();
        assert_relative_eq!(m8, 0.419_401_288_032_531_74, max_relative = 1e-14);
    }

    #[test]
    fn m2_recursion_is_exact() {
        for &rho in &PAPER_RHOS {
            let mut t = 1;
            while t <= 1024 {
                let lhs = bound_m2(2 * t, rho).unwrap();
                let rhs = bound_m2(2, bound_m2(t, rho).unwrap()).unwrap();
                assert_eq!(lhs, rhs);
                t *= 2;
            }
        }
    }

    #[test]
    fn bound_ordering() {
        for &rho in &PAPER_RHOS {
            for k in 1..=10 {
                let t = 1u64 << k;
                let a = bound_adaboost(t, rho).unwrap();
                let m = bound_m2(t, rho).unwrap();
                let f = bound_f(t as f64, rho).unwrap();
                assert!(a <= m + 1e-12 && m <= f + 1e-12);
                if t >= 4 && rho >= 0.5 {
                    assert!(a < m && m < f, "rho={rho} T={t}");
                }
            }
        }
    }

    #[test]
    fn tree_of_trees_interior_improvement() {
        let rho = 31.0 / 32.0;
        for &t in &[64u64, 256, 1024] {
            let flat = bound_f(t as f64, rho).unwrap();
            let mut best = (f64::INFINITY, 0u64);
            for t1 in (2..t).filter(|d| t % d == 0) {
                let v = bound_nested(t, t1 as f64, rho).unwrap();
                assert!(v < flat);
                if v < best.0 {
                    best = (v, t1);
                }
            }
            let root = (t as f64).sqrt();
            assert!(best.1 as f64 >= root / 2.0 && best.1 as f64 <= root * 2.0);
        }
    }

    #[test]
    fn monotonicity() {
        for &rho in &[0.1, 0.5, 0.9] {
            let mut prev = f64::INFINITY;
            for i in 0..200 {
                let t = 1.0 + i as f64 * 0.37;
                let v = bound_f(t, rho).unwrap();
                assert!(v < prev);
                prev = v;
            }
        }
        for &t in &[1.5, 4.0, 100.0] {
            let mut prev = -1.0;
            for i in 0..100 {
                let rho = i as f64 / 100.0;
                let v = bound_f(t, rho).unwrap();
                assert!(v > prev);
                prev = v;
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-5;
        let (t, rho) = (4.0, 0.75);
        let fd_t = (bound_f(t + h, rho).unwrap() - bound_f(t - h, rho).unwrap()) / (2.0 * h);
        let fd_r = (bound_f(t, rho + h).unwrap() - bound_f(t, rho - h).unwrap()) / (2.0 * h);
        assert_relative_eq!(df_dt(t, rho).unwrap(), fd_t, max_relative = 1e-6);
        assert_relative_eq!(df_drho(t, rho).unwrap(), fd_r, max_relative = 1e-6);
    }

    #[test]
    fn derivative_signs_and_limits() {
        for &rho in &[0.05, 0.3, 0.6, 0.95] {
            for &t in &[1.0, 1.5, 3.0, 50.0, 1000.0] {
                assert!(df_dt(t, rho).unwrap() < 0.0);
                if t > 1.0 {
                    assert!(df_drho(t, rho).unwrap() > 0.0);
                }
            }
            assert_relative_eq!(df_drho(1.0, rho).unwrap(), 1.0, max_relative = 1e-12);
        }
        for &t in &[1.0, 5.0, 100.0] {
            assert!(df_dt(t, 1.0 - 1e-12).unwrap().abs() < 1e-9);
        }
    }

    #[test]
    fn rate_examples() {
        assert_eq!(rate_matryoshka(1.0, 1.0).unwrap(), 0.0);
        for t in [2.0, 7.5, 1000.0] {
            assert_eq!(rate_matryoshka(1.0, t).unwrap(), 0.0);
        }
        let v = rate_matryoshka(0.5, 2.0).unwrap();
        let oracle = 0.25 * (0.577_215_664_9 - 1.963_510_026_0 + 2.0 - 1.0);
        assert!((v - oracle).abs() < 1e-9);
        assert!((v + 0.09657).abs() < 1e-5);
        assert!(rate_matryoshka(0.0, 1.0).is_err());
        assert!(rate_matryoshka(1.5, 1.0).is_err());

        assert_eq!(rate_simple(1.0, 1.0), 0.0);
        assert_relative_eq!(rate_simple(0.5, 0.3125), -0.09375);
        assert_relative_eq!(rate_simple(0.4, 0.2), -0.1, max_relative = 1e-15);
    }

    #[test]
    fn curve_validation() {
        assert!(BoundCurve::new("ok", vec![(1.0, 0.5), (2.0, 0.4)]).is_ok());
        assert!(BoundCurve::new("unsorted", vec![(2.0, 0.5), (1.0, 0.4)]).is_err());
        assert!(BoundCurve::new("range", vec![(1.0, 1.5)]).is_err());
        let c = BoundCurve::sample("F", &[1.0, 2.0, 4.0], |t| bound_f(t, 0.5)).unwrap();
        assert_eq!(c.points().len(), 3);
    }
}
