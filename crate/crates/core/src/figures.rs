//! Plot-ready bound tables.

use serde::Serialize;

use crate::bounds::{
    bound_adaboost, bound_f, bound_iso_nested, bound_m2, bound_nested, bound_nested_sizes, rate_matryoshka,
    rate_simple,
};
use crate::error::{Error, Result};

/// `ρ` values of the comparison figure, largest first.
pub const FIGURE_RHOS: [f64; 5] = [31.0 / 32.0, 7.0 / 8.0, 3.0 / 4.0, 1.0 / 2.0, 1.0 / 4.0];

/// `ρ` used by the nesting sweeps (`ε ≈ 0.12`).
pub const NESTING_RHO: f64 = 31.0 / 32.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    AdaboostVsTreeVsM2,
    TreeOfTrees,
    NestingLevels,
}

impl std::str::FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adaboost-vs-tree-vs-m2" | "a" => Ok(Figure::AdaboostVsTreeVsM2),
            "tree-of-trees" | "b" => Ok(Figure::TreeOfTrees),
            "nesting-levels" | "c" => Ok(Figure::NestingLevels),
            other => Err(Error::Config(format!(
                "unknown figure `{other}`; expected adaboost-vs-tree-vs-m2, tree-of-trees or nesting-levels"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub rho: f64,
    #[serde(rename = "T")]
    pub t: u64,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "rho^T")]
    pub rho_pow_t: f64,
    #[serde(rename = "M2")]
    pub m2: f64,
}

/// `F`, `ρ^T` and `M₂` at `T = 1, 2, 4, …, max_t`.
pub fn adaboost_vs_tree_vs_m2(rhos: &[f64], max_t: u64) -> Result<Vec<ComparisonRow>> {
    let mut rows = Vec::new();
    for &rho in rhos {
        let mut t = 1;
        while t <= max_t {
            rows.push(ComparisonRow {
                rho,
                t,
                f: bound_f(t as f64, rho)?,
                rho_pow_t: bound_adaboost(t, rho)?,
                m2: bound_m2(t, rho)?,
            });
            t *= 2;
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NestedRow {
    #[serde(rename = "T")]
    pub t: u64,
    #[serde(rename = "T1")]
    pub t1: f64,
    pub bound: f64,
    /// `T1` divides `T`.
    pub integer: bool,
}

/// Inner tree size `T1` swept over `[1, T]` in `points` geometric steps, plus every divisor of `T`.
pub fn tree_of_trees(sizes: &[u64], rho: f64, points: usize) -> Result<Vec<NestedRow>> {
    if points < 2 {
        return Err(Error::Config("the sweep needs at least two points".into()));
    }
    let mut rows = Vec::new();
    for &t in sizes {
        let mut t1s: Vec<(f64, bool)> = (0..points)
            .map(|k| ((t as f64).powf(k as f64 / (points - 1) as f64), false))
            .collect();
        t1s.extend((1..=t).filter(|d| t % d == 0).map(|d| (d as f64, true)));
        t1s.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        t1s.dedup_by(|b, a| {
            let same = (a.0 - b.0).abs() <= 1e-9 * a.0;
            a.1 |= same && b.1;
            same
        });
        for (t1, integer) in t1s {
            let t1 = t1.clamp(1.0, t as f64);
            rows.push(NestedRow { t, t1, bound: bound_nested(t, t1, rho)?, integer });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelRow {
    #[serde(rename = "T")]
    pub t: u64,
    #[serde(rename = "L")]
    pub l: u32,
    /// Every level of size `T^{1/L}`.
    pub iso: f64,
    /// Power-of-two level sizes as even as possible, smallest innermost.
    pub integer: f64,
}

/// Split of `2^k` into `l` power-of-two factors, smallest first.
pub fn integer_level_sizes(k: u32, l: u32) -> Vec<f64> {
    (0..l).map(|i| 2f64.powi((k / l + u32::from(i >= l - k % l)) as i32)).collect()
}

/// Iso-nested bound for `L = 1..log2 T` at each power-of-two `T`.
pub fn nesting_levels(sizes: &[u64], rho: f64) -> Result<Vec<LevelRow>> {
    let mut rows = Vec::new();
    for &t in sizes {
        if !t.is_power_of_two() || t < 2 {
            return Err(Error::Config(format!("nesting sweep needs a power of two >= 2, got {t}")));
        }
        let k = t.trailing_zeros();
        for l in 1..=k {
            rows.push(LevelRow {
                t,
                l,
                iso: bound_iso_nested(t, l, rho)?,
                integer: bound_nested_sizes(&integer_level_sizes(k, l), rho)?,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateRow {
    pub rho: f64,
    #[serde(rename = "T")]
    pub t: u64,
    #[serde(rename = "C")]
    pub c: f64,
    pub rate_simple: f64,
    pub rate_matryoshka: f64,
}

/// Both decrease rates along the tight trajectory `C(T) = F(T, ρ)`, with `C(0) = 1`.
pub fn rates_report(rhos: &[f64], max_t: u64) -> Result<Vec<RateRow>> {
    let c = |t: u64, rho: f64| if t == 0 { Ok(1.0) } else { bound_f(t as f64, rho) };
    let mut rows = Vec::new();
    for &rho in rhos {
        for t in 1..=max_t {
            let now = c(t, rho)?;
            let simple = rate_simple(c(t - 1, rho)?, c(t + 1, rho)?);
            let matryoshka = if now > 0.0 { rate_matryoshka(now, t as f64)? } else { 0.0 };
            rows.push(RateRow { rho, t, c: now, rate_simple: simple, rate_matryoshka: matryoshka });
        }
    }
    Ok(rows)
}
