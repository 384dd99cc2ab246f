//! Closed-form checks on MASTER's stationarity tests and regret bound.
//!
//! All quantities use ln for the confidence term ln(T/δ) and log₂ inside
//! n̂ = log₂T + 1. Horizons up to 10¹⁶ are handled in log space.

use serde::Serialize;

use crate::master::RhoForm;

fn nhat(horizon: f64) -> f64 {
    horizon.log2() + 1.0
}

fn rho_at(form: RhoForm, arms: usize, horizon: f64, delta: f64) -> f64 {
    let floor = 1.0 / horizon.sqrt();
    match form {
        RhoForm::InverseSqrt => floor,
        RhoForm::MabSqrtALog => {
            let scale = arms as f64 * (horizon / delta).ln();
            (scale / horizon).sqrt().min(1.0).max(floor)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub horizon: f64,
    pub delta: f64,
    pub rho_form: RhoForm,
    pub test1_min_threshold: f64,
    pub test2_min_threshold: f64,
    pub test1_feasible: bool,
    pub test2_feasible: bool,
}

/// Smallest thresholds the two tests can ever present: both are minimised
/// at the longest interval, where ρ(T) is smallest. The statistics never
/// exceed 1, so a minimum above 1 means the test can never fire.
pub fn min_test_thresholds(horizon: f64, delta: f64, form: RhoForm, arms: usize) -> FeasibilityReport {
    let base = nhat(horizon) * (horizon / delta).ln() * rho_at(form, arms, horizon, delta);
    let t1 = 54.0 * base;
    let t2 = 18.0 * base;
    FeasibilityReport {
        horizon,
        delta,
        rho_form: form,
        test1_min_threshold: t1,
        test2_min_threshold: t2,
        test1_feasible: t1 <= 1.0,
        test2_feasible: t2 <= 1.0,
    }
}

/// √T / (54 (log₂T + 1)) − ln T; the tests become crossable for some δ < 1
/// only where this is positive.
pub fn feasibility_margin(horizon: f64) -> f64 {
    horizon.sqrt() / (54.0 * nhat(horizon)) - horizon.ln()
}

/// Smallest δ for which the tests can be crossed at horizon T:
/// T·exp(−√T / (54 (log₂T + 1))).
pub fn delta_lower_bound(horizon: f64) -> f64 {
    (-feasibility_margin(horizon)).exp()
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64, tolerance: f64) -> f64 {
    let increasing = f(hi) > f(lo);
    for _ in 0..200 {
        if hi - lo <= tolerance {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == increasing {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Continuous root of [`feasibility_margin`] above the small-T region.
pub fn feasibility_root(tolerance: f64) -> f64 {
    bisect(1e8, 1e10, feasibility_margin, tolerance)
}

/// Horizon below which no δ < 1 lets either test fire: the integer part of
/// the continuous root of [`feasibility_margin`].
pub fn min_feasible_horizon(tolerance: f64) -> u64 {
    let root = feasibility_root(tolerance.min(1e-3));
    let mut t = root.floor() as u64;
    // Settle rounding of the continuous root against the exact margin.
    while feasibility_margin(t as f64) > 0.0 {
        t -= 1;
    }
    while feasibility_margin((t + 1) as f64) <= 0.0 {
        t += 1;
    }
    t
}

fn ln_bd(horizon: f64) -> f64 {
    let l = horizon.ln();
    24f64.ln() + nhat(horizon).ln() + l.ln() + 0.5 * l + (1.0 + 15.0 * l).ln()
}

/// Lower bound on MASTER's dynamic-regret bound:
/// 24 (log₂T + 1) ln T √T (1 + 15 ln T).
pub fn bd_bound(horizon: f64) -> f64 {
    ln_bd(horizon).exp()
}

/// ln B_D(T) − ln T: positive while the bound is vacuous.
pub fn bd_excess(horizon: f64) -> f64 {
    ln_bd(horizon) - horizon.ln()
}

/// Smallest integer T with B_D(T) ≤ T.
pub fn bd_crossover(tolerance: f64) -> u64 {
    let root = bisect(1e13, 1e16, bd_excess, tolerance.min(1e-3) * 1e13);
    let mut t = root.floor() as u64;
    while bd_excess(t as f64) <= 0.0 {
        t -= 1;
    }
    while bd_excess(t as f64) > 0.0 {
        t += 1;
    }
    t
}

#[derive(Debug, Clone, Serialize)]
pub struct TheoryReport {
    pub feasibility: FeasibilityReport,
    pub delta_lower_bound: f64,
    pub min_feasible_horizon: u64,
    pub bd_bound: f64,
    pub bd_trivial: bool,
    pub bd_crossover: u64,
}

pub fn report(horizon: f64, delta: f64, form: RhoForm, arms: usize) -> TheoryReport {
    let bd = bd_bound(horizon);
    TheoryReport {
        feasibility: min_test_thresholds(horizon, delta, form, arms),
        delta_lower_bound: delta_lower_bound(horizon),
        min_feasible_horizon: min_feasible_horizon(1e-6),
        bd_bound: bd,
        bd_trivial: bd > horizon,
        bd_crossover: bd_crossover(1e-6),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn thresholds_at_1e5() {
        let r = min_test_thresholds(1e5, 1e-5, RhoForm::InverseSqrt, 5);
        assert!((r.test1_min_threshold - 69.2).abs() < 0.1, "{}", r.test1_min_threshold);
        assert!((r.test2_min_threshold - 23.1).abs() < 0.05);
        assert!(!r.test1_feasible && !r.test2_feasible);
        assert_relative_eq!(r.test1_min_threshold / r.test2_min_threshold, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn thresholds_near_the_boundary() {
        let r = min_test_thresholds(2e9, 0.999, RhoForm::InverseSqrt, 5);
        assert!(r.test1_min_threshold < 1.0);
        // Consistent with the minimum horizon: the bound on δ is already below 1.
        assert!(delta_lower_bound(2e9) < 1.0);
    }

    #[test]
    fn delta_bound_values() {
        let b = delta_lower_bound(1e6);
        let expected = 1e6 * (-(1000.0 / (54.0 * (1e6f64.log2() + 1.0)))).exp();
        assert_relative_eq!(b, expected, max_relative = 1e-12);
        assert!((b - 4.13e5).abs() < 0.01e5);
        assert!(delta_lower_bound(1e10) < delta_lower_bound(1e9));
        assert_relative_eq!(delta_lower_bound(1_246_257_461.0), 1.0, max_relative = 1e-3);
    }

    #[test]
    fn margin_brackets_the_root() {
        assert!(feasibility_margin(1e8) < 0.0);
        assert!(feasibility_margin(1e10) > 0.0);
        assert!(feasibility_margin(1.246e9).abs() < 1e-2);
    }

    #[test]
    fn min_horizon_constant() {
        let t = min_feasible_horizon(1e-6);
        assert_eq!(t, 1_246_257_461);
        // The root lies between T* and T* + 1.
        assert!(delta_lower_bound(t as f64) > 1.0 && delta_lower_bound(t as f64) <= 1.0 + 1e-6);
        assert!(delta_lower_bound((t + 1) as f64) < 1.0);
        assert!(delta_lower_bound((t - 1) as f64) > 1.0);
    }

    #[test]
    fn bd_values() {
        let b = bd_bound(1e5);
        assert!((b / 2.67e8 - 1.0).abs() < 0.01, "{b}");
        assert!(b > 1e5);
        let grid = [1e3, 1e5, 1e8, 1e12, 1e15];
        assert!(grid.windows(2).all(|w| bd_bound(w[1]) > bd_bound(w[0])));
        let ratio = bd_bound(409_189_687_210_680.0) / 409_189_687_210_680.0;
        assert!((0.999..=1.001).contains(&ratio));
        assert!(bd_bound(1e14) > 1e14);
        assert!(bd_bound(1e15) < 1e15);
    }

    #[test]
    fn bd_crossover_constant() {
        let t = bd_crossover(1e-6);
        assert!(t.abs_diff(409_189_687_210_680) <= 10, "{t}");
    }

    #[test]
    fn finite_up_to_1e16() {
        for t in [2.0, 1e3, 1e9, 1e12, 1e16] {
            assert!(bd_bound(t).is_finite());
            assert!(delta_lower_bound(t).is_finite());
            let r = min_test_thresholds(t, 1.0 / t, RhoForm::MabSqrtALog, 5);
            assert!(r.test1_min_threshold.is_finite());
        }
    }
}
