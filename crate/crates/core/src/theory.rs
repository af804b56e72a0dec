//! Generalization bound of hybrid models, evaluated in log domain.
//!
//! `B(ε, C) = C^M + C̄^M + |Hc|·[(C̄e^{-ε} + C)^M − C^M] + |Hs|·[(Ce^{-ε} + C̄)^M − C̄^M]`
//! where `C` is the transparency and `C̄ = 1 − C`. Both brackets are
//! non-negative, so each is evaluated as a log-difference.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    /// `ln |Hc|`
    pub log_hc: f64,
    /// `ln |Hs|`
    pub log_hs: f64,
    pub m: u64,
}

impl BoundParams {
    pub fn new(log_hc: f64, log_hs: f64, m: u64) -> Result<Self> {
        if !(log_hs >= 0.0 && log_hc.is_finite() && log_hs <= log_hc) {
            return Err(Error::Config(format!(
                "need 0 <= ln|Hs| <= ln|Hc| < inf, got ln|Hs|={log_hs}, ln|Hc|={log_hc}"
            )));
        }
        if m == 0 {
            return Err(Error::Config("sample count must be >= 1".into()));
        }
        Ok(BoundParams { log_hc, log_hs, m })
    }

    /// `|Hc| = n · |Hs|`
    pub fn with_ratio(log_hs: f64, n: f64, m: u64) -> Result<Self> {
        BoundParams::new(log_hs + n.ln(), log_hs, m)
    }
}

/// `ln(1 − e^x)` for `x ≤ 0`.
fn log1mexp(x: f64) -> f64 {
    if x > -std::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

fn logsumexp(xs: &[f64]) -> f64 {
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + xs.iter().map(|x| (x - hi).exp()).sum::<f64>().ln()
}

fn ln_pow(x: f64, m: f64) -> f64 {
    if x == 0.0 {
        f64::NEG_INFINITY
    } else {
        m * x.ln()
    }
}

/// `ln(a^M − b^M)` with `a = 1 − w(1 − e^{-ε})` and `b = 1 − w`.
fn log_bracket(w: f64, eps: f64, m: f64) -> f64 {
    if w == 0.0 {
        return f64::NEG_INFINITY;
    }
    let ln_a = (-w * (-(-eps).exp_m1())).ln_1p();
    let b = 1.0 - w;
    if b == 0.0 {
        return m * ln_a;
    }
    m * ln_a + log1mexp(m * (b.ln() - ln_a))
}

/// `ln B(ε, C) − shift`.
fn log_bound_shifted(eps: f64, c: f64, p: &BoundParams, shift: f64) -> f64 {
    let m = p.m as f64;
    let cbar = 1.0 - c;
    logsumexp(&[
        ln_pow(c, m) - shift,
        ln_pow(cbar, m) - shift,
        p.log_hc - shift + log_bracket(cbar, eps, m),
        p.log_hs - shift + log_bracket(c, eps, m),
    ])
}

pub fn log_bound_b(eps: f64, c: f64, p: &BoundParams) -> f64 {
    log_bound_shifted(eps, c, p, 0.0)
}

/// The bound itself (may exceed 1, and overflows to infinity for huge spaces;
/// use [`log_bound_b`] there).
pub fn bound_b(eps: f64, c: f64, p: &BoundParams) -> f64 {
    log_bound_b(eps, c, p).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureRule {
    Trapezoid,
    Simpson,
}

/// Composite rule on `nodes` points uniform in `ln ε` over `[ε_min, 1]`; the
/// sliver `(0, ε_min]` is added as a rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quadrature {
    pub rule: QuadratureRule,
    pub nodes: usize,
    pub eps_min: f64,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature {
            rule: QuadratureRule::Trapezoid,
            nodes: 4096,
            eps_min: 1e-12,
        }
    }
}

/// `ln(AUC / |Hs|)`.
pub fn log_normalized_auc(c: f64, p: &BoundParams, q: &Quadrature) -> Result<f64> {
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::Config(format!("transparency must lie in [0, 1], got {c}")));
    }
    if q.nodes < 64 || !(q.eps_min > 0.0 && q.eps_min < 1.0) {
        return Err(Error::Config(format!("invalid quadrature {q:?}")));
    }
    let n = if q.rule == QuadratureRule::Simpson && q.nodes.is_multiple_of(2) {
        q.nodes + 1
    } else {
        q.nodes
    };
    let lo = q.eps_min.ln();
    let h = -lo / (n - 1) as f64;
    let mut terms = Vec::with_capacity(n + 1);
    for k in 0..n {
        let u = lo + h * k as f64;
        let eps = if k == n - 1 { 1.0 } else { u.exp() };
        let w: f64 = match q.rule {
            QuadratureRule::Trapezoid if k == 0 || k == n - 1 => 0.5,
            QuadratureRule::Trapezoid => 1.0,
            QuadratureRule::Simpson if k == 0 || k == n - 1 => 1.0 / 3.0,
            QuadratureRule::Simpson if k % 2 == 1 => 4.0 / 3.0,
            QuadratureRule::Simpson => 2.0 / 3.0,
        };
        // dε = ε du
        terms.push(w.ln() + h.ln() + u + log_bound_shifted(eps, c, p, p.log_hs));
    }
    terms.push(lo + log_bound_shifted(q.eps_min, c, p, p.log_hs));
    Ok(logsumexp(&terms))
}

/// `∫₀¹ B(ε, C) dε / |Hs|`.
pub fn normalized_auc(c: f64, p: &BoundParams, q: &Quadrature) -> Result<f64> {
    Ok(log_normalized_auc(c, p, q)?.exp())
}

/// Relative change of the normalized AUC when the node count is doubled.
pub fn auc_convergence(c: f64, p: &BoundParams, q: &Quadrature) -> Result<f64> {
    let a = log_normalized_auc(c, p, q)?;
    let fine = Quadrature {
        nodes: 2 * q.nodes,
        ..*q
    };
    let b = log_normalized_auc(c, p, &fine)?;
    Ok((b - a).exp_m1().abs())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AucSweep {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub argmin: usize,
    pub interior: bool,
}

impl AucSweep {
    pub fn argmin_transparency(&self) -> f64 {
        self.grid[self.argmin]
    }
}

/// `0.015, 0.020, ..., 0.995`.
pub fn default_grid() -> Vec<f64> {
    (0..197).map(|i| (15 + 5 * i) as f64 / 1000.0).collect()
}

pub fn sweet_spot_sweep(p: &BoundParams, grid: &[f64], q: &Quadrature) -> Result<AucSweep> {
    if grid.is_empty() || grid.iter().any(|&c| !(c > 0.0 && c < 1.0)) || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("transparency grid must be strictly increasing within (0, 1)".into()));
    }
    let logs: Vec<f64> = grid
        .par_iter()
        .map(|&c| log_normalized_auc(c, p, q))
        .collect::<Result<_>>()?;
    let argmin = logs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    Ok(AucSweep {
        grid: grid.to_vec(),
        values: logs.iter().map(|l| l.exp()).collect(),
        argmin,
        interior: argmin != 0 && argmin != grid.len() - 1,
    })
}

/// `ln |Hs|` for binary decision trees of the given depth with a distinct
/// feature per level: `2^d ln 2 + Σ_{l<d} 2^l ln(n − l)`.
pub fn tree_space_size(depth: u32, n_features: u64) -> Result<f64> {
    if depth == 0 || n_features < depth as u64 {
        return Err(Error::Config(format!(
            "need depth >= 1 and at least one feature per level, got depth {depth} with {n_features} features"
        )));
    }
    let leaves = 2f64.powi(depth as i32);
    let splits: f64 = (0..depth).map(|l| 2f64.powi(l as i32) * ((n_features - l as u64) as f64).ln()).sum();
    Ok(leaves * std::f64::consts::LN_2 + splits)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(hc: f64, hs: f64, m: u64) -> BoundParams {
        BoundParams::new(hc.ln(), hs.ln(), m).unwrap()
    }

    /// `ln(1 + e^y)`
    fn softplus(y: f64) -> f64 {
        if y > 0.0 {
            y + (-y).exp().ln_1p()
        } else {
            y.exp().ln_1p()
        }
    }

    #[test]
    fn trivial_bounds_at_the_extremes() {
        let p = params(1e30, 1e10, 200);
        for eps in [0.01, 0.3, 1.0] {
            // comparing logs to 1e-9 is a 1e-9 relative check on B
            let want = softplus(1e30f64.ln() - eps * 200.0);
            assert!((log_bound_b(eps, 0.0, &p) - want).abs() < 1e-9);
            let want = softplus(1e10f64.ln() - eps * 200.0);
            assert!((log_bound_b(eps, 1.0, &p) - want).abs() < 1e-9);
        }
    }

    #[test]
    fn small_value_example() {
        let b = bound_b(1.0, 0.5, &params(4.0, 2.0, 3));
        let e = (-1f64).exp();
        let a = 0.5 * e + 0.5;
        let want = 0.125 + 0.125 + 4.0 * (a.powi(3) - 0.125) + 2.0 * (a.powi(3) - 0.125);
        assert!((b - want).abs() < 1e-12);
        assert!((b - 1.41958).abs() < 1e-5);
    }

    #[test]
    fn unit_spaces_integrate_in_closed_form() {
        let p = params(1.0, 1.0, 1);
        let want = 2.0 - (-1f64).exp();
        let simpson = Quadrature {
            rule: QuadratureRule::Simpson,
            ..Default::default()
        };
        for c in [0.0, 0.3, 1.0] {
            let auc = normalized_auc(c, &p, &Quadrature::default()).unwrap();
            assert!((auc - 1.63212).abs() < 1e-5, "{c}: {auc}");
            let auc = normalized_auc(c, &p, &simpson).unwrap();
            assert!((auc - want).abs() < 1e-9, "{c}: {auc}");
        }
    }

    #[test]
    fn simpson_agrees_with_trapezoid() {
        let p = BoundParams::with_ratio(3.11e18f64.ln(), 100.0, 5000).unwrap();
        let q = Quadrature::default();
        let s = Quadrature {
            rule: QuadratureRule::Simpson,
            ..q
        };
        for c in [0.1, 0.5, 0.9] {
            let a = normalized_auc(c, &p, &q).unwrap();
            let b = normalized_auc(c, &p, &s).unwrap();
            assert!(((a - b) / a).abs() < 1e-6);
        }
    }

    #[test]
    fn tree_space_examples() {
        let ln = tree_space_size(3, 200).unwrap();
        assert!((ln.exp() / 3.11e18 - 1.0).abs() < 0.005);
        let direct = 256f64.ln() + 200f64.ln() + 2.0 * 199f64.ln() + 4.0 * 198f64.ln();
        assert!((ln - direct).abs() < 1e-12);
        assert!((tree_space_size(1, 200).unwrap().exp() - 800.0).abs() < 1e-9);
        assert!((tree_space_size(1, 1).unwrap().exp() - 4.0).abs() < 1e-12);
        assert!(tree_space_size(0, 5).is_err());
        assert!(tree_space_size(3, 2).is_err());
    }

    #[test]
    fn invalid_inputs() {
        assert!(BoundParams::new(1.0, 2.0, 10).is_err());
        assert!(BoundParams::new(2.0, 1.0, 0).is_err());
        let p = params(4.0, 2.0, 3);
        assert!(normalized_auc(1.5, &p, &Quadrature::default()).is_err());
        assert!(sweet_spot_sweep(&p, &[0.5, 0.4], &Quadrature::default()).is_err());
        assert_eq!(default_grid().len(), 197);
    }
}
