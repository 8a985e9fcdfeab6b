//! Numerical checks of the parameter conditions behind the marking and the
//! marginal sampler.
//!
//! Degrees may be astronomically large (`d = 2^25` and beyond), so every
//! inequality is compared in the log2 domain with `d` given as `log2 d`.

use serde::Serialize;
use thiserror::Error;

use crate::marking::MarkingParams;

/// Grid points used by the monotonicity check.
pub const MONOTONICITY_GRID: usize = 10_000;
/// Equality tolerance in log2 space for non-strict inequalities.
pub const LOG_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
#[error("binary entropy is defined on [0, 1], got {0}")]
pub struct EntropyDomainError(pub f64);

/// `h(x) = −x log2 x − (1−x) log2(1−x)`, with `h(0) = h(1) = 0`.
pub fn binary_entropy(x: f64) -> Result<f64, EntropyDomainError> {
    if !(0.0..=1.0).contains(&x) {
        return Err(EntropyDomainError(x));
    }
    let term = |p: f64| if p > 0.0 { -p * p.log2() } else { 0.0 };
    Ok(term(x) + term(1.0 - x))
}

/// Entropy clamped into its domain; arguments here come from parameters
/// already known to be in range, up to rounding.
fn h(x: f64) -> f64 {
    binary_entropy(x.clamp(0.0, 1.0)).expect("clamped")
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionCheck {
    pub name: String,
    pub pass: bool,
    /// Right side minus left side (log2 units where the check is done in
    /// log2); positive means room to spare.
    pub slack: f64,
}

impl ConditionCheck {
    fn le(name: &str, lhs: f64, rhs: f64) -> Self {
        ConditionCheck {
            name: name.to_string(),
            pass: lhs <= rhs + LOG_TOLERANCE,
            slack: rhs - lhs,
        }
    }

    fn lt(name: &str, lhs: f64, rhs: f64) -> Self {
        ConditionCheck {
            name: name.to_string(),
            pass: lhs < rhs,
            slack: rhs - lhs,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionsReport {
    pub k: u64,
    pub log2_d: f64,
    pub checks: Vec<ConditionCheck>,
    pub all_pass: bool,
}

impl ConditionsReport {
    fn new(k: u64, log2_d: f64, checks: Vec<ConditionCheck>) -> Self {
        let all_pass = checks.iter().all(|c| c.pass);
        ConditionsReport {
            k,
            log2_d,
            checks,
            all_pass,
        }
    }

    pub fn get(&self, name: &str) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// `f(δ) = (β2 − δ) − h((β2 − δ)/(1 − δ))·(1 − δ)`.
pub fn monotonicity_fn(beta2: f64, delta: f64) -> f64 {
    (beta2 - delta) - h((beta2 - delta) / (1.0 - delta)) * (1.0 - delta)
}

/// Samples the sign of the derivative of [`monotonicity_fn`] by forward
/// differences on `points` evenly spaced points of `[0, β1]`.
pub fn monotonicity_check(beta1: f64, beta2: f64, points: usize) -> ConditionCheck {
    let step = beta1 / (points - 1) as f64;
    let mut worst = f64::NEG_INFINITY;
    let mut prev = monotonicity_fn(beta2, 0.0);
    for i in 1..points {
        let cur = monotonicity_fn(beta2, step * i as f64);
        worst = worst.max((cur - prev) / step);
        prev = cur;
    }
    ConditionCheck {
        name: "f decreasing on [0, beta1]".into(),
        pass: worst < 0.0,
        slack: -worst,
    }
}

/// The conditions the marking construction needs at clause width `k` and
/// degree `2^log2_d`.
pub fn check_conditions_marking(k: u64, log2_d: f64, p: &MarkingParams) -> ConditionsReport {
    ConditionsReport::new(k, log2_d, marking_checks(k, log2_d, p))
}

fn marking_checks(k: u64, log2_d: f64, p: &MarkingParams) -> Vec<ConditionCheck> {
    let kf = k as f64;
    let (a, b1, b2) = (p.alpha, p.beta1, p.beta2);
    let mut out = Vec::new();

    let ordered = 0.5 < b1 && b1 < b2 && b2 < 1.0 - a;
    out.push(ConditionCheck {
        name: "1/2 < beta1 < beta2 < 1 - alpha".into(),
        pass: ordered,
        slack: (b1 - 0.5).min(b2 - b1).min(1.0 - a - b2),
    });
    out.push(ConditionCheck {
        name: "4 alpha < 2(1 - beta2) < 1 - beta1".into(),
        pass: 4.0 * a < 2.0 * (1.0 - b2) && 2.0 * (1.0 - b2) < 1.0 - b1,
        slack: (2.0 * (1.0 - b2) - 4.0 * a).min((1.0 - b1) - 2.0 * (1.0 - b2)),
    });

    let lhs = 4.0 + 4.0 * kf.log2() + 5.0 * log2_d; // log2(16 k^4 d^5)
    out.push(ConditionCheck::le(
        "16 k^4 d^5 <= 2^((beta1 - h(1 - beta1)) k)",
        lhs,
        (b1 - h(1.0 - b1)) * kf,
    ));
    out.push(ConditionCheck::le(
        "16 k^4 d^5 <= 2^((beta2 - beta1) k - h((beta2 - beta1)/(1 - beta1)) (1 - beta1) k)",
        lhs,
        (b2 - b1) * kf - h((b2 - b1) / (1.0 - b1)) * (1.0 - b1) * kf,
    ));
    out.push(monotonicity_check(b1, b2, MONOTONICITY_GRID));

    // log2(2e(kd + 1))
    let kd_plus_one = log2_add_one(kf.log2() + log2_d);
    out.push(ConditionCheck::lt(
        "2e(kd + 1) < 2^((1 - h(alpha/(1 - beta2))) (1 - beta2) k)",
        1.0 + std::f64::consts::E.log2() + kd_plus_one,
        (1.0 - h(a / (1.0 - b2))) * (1.0 - b2) * kf,
    ));
    out
}

/// `log2(2^x + 1)` without overflow.
fn log2_add_one(x: f64) -> f64 {
    if x > 60.0 {
        x + (1.0 + (-x).exp2()).log2()
    } else {
        (x.exp2() + 1.0).log2()
    }
}

/// `θ = 1 − ½ exp(2edk / 2^{αk})`, which may be very negative.
pub fn theta_value(k: u64, log2_d: f64, alpha: f64) -> f64 {
    let kf = k as f64;
    let log2_x = 1.0 + std::f64::consts::E.log2() + log2_d + kf.log2() - alpha * kf;
    1.0 - 0.5 * log2_x.exp2().exp()
}

/// The conditions the marginal sampler needs, at the given `α`.
pub fn sampler_checks(k: u64, log2_d: f64, alpha: f64) -> Vec<ConditionCheck> {
    let kf = k as f64;
    let e = std::f64::consts::E;
    let mut out = Vec::new();
    // log2(k 2^{-αk} (dk)^5 4) vs log2(1/(150 e^3))
    out.push(ConditionCheck::le(
        "k 2^(-alpha k) (dk)^5 4 <= 1/(150 e^3)",
        kf.log2() - alpha * kf + 5.0 * (log2_d + kf.log2()) + 2.0,
        -(150.0f64.log2() + 3.0 * e.log2()),
    ));
    let theta = theta_value(k, log2_d, alpha);
    out.push(ConditionCheck {
        name: "theta = 1 - exp(2edk / 2^(alpha k))/2 >= 0.4".into(),
        pass: theta >= 0.4,
        slack: theta - 0.4,
    });
    out.push(ConditionCheck::le(
        "36 e d^3 k^4 0.6^(alpha k) <= 1/2",
        36.0f64.log2() + e.log2() + 3.0 * log2_d + 4.0 * kf.log2() + alpha * kf * 0.6f64.log2(),
        -1.0,
    ));
    // log2 of the left side: −1/(48 d k^4) + log2(e)·(2d²/α)/2^{αk}
    let first = -(-(48.0f64.log2() + log2_d + 4.0 * kf.log2())).exp2();
    let second = e.log2() * (1.0 + 2.0 * log2_d - alpha.log2() - alpha * kf).exp2();
    out.push(ConditionCheck::le(
        "2^(-1/(48 d k^4)) e^((2 d^2/alpha) / 2^(alpha k)) <= 0.9",
        first + second,
        0.9f64.log2(),
    ));
    out.push(ConditionCheck::le(
        "d <= 2^(alpha k / 4)",
        log2_d,
        alpha * kf / 4.0,
    ));
    out
}

/// Every condition, marking and sampler, in one report.
pub fn check_all(k: u64, log2_d: f64, p: &MarkingParams) -> ConditionsReport {
    let mut checks = marking_checks(k, log2_d, p);
    checks.extend(sampler_checks(k, log2_d, p.alpha));
    ConditionsReport::new(k, log2_d, checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn asymptotic() -> MarkingParams {
        MarkingParams::asymptotic()
    }

    #[test]
    fn entropy_values() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        // −0.11 log2 0.11 − 0.89 log2 0.89
        let direct = -0.11 * 0.11f64.log2() - 0.89 * 0.89f64.log2();
        assert!((binary_entropy(0.11).unwrap() - direct).abs() < 1e-15);
        assert!((direct - 0.499_915_958).abs() < 1e-6);
        assert!(binary_entropy(1.5).is_err());
        assert!(binary_entropy(-0.1).is_err());
    }

    /// Closed form of the derivative: `f'(δ) = −log2(2y)`, `y = (β2−δ)/(1−δ)`,
    /// so `f` decreases exactly where `y > 1/2`, i.e. `δ < 2β2 − 1`.
    #[test]
    fn monotonicity_matches_closed_form() {
        let c = monotonicity_check(0.778, 0.96, MONOTONICITY_GRID);
        assert!(c.pass);
        let deriv = |d: f64| -(2.0 * (0.96 - d) / (1.0 - d)).log2();
        assert!((0..=100).all(|i| deriv(0.778 * i as f64 / 100.0) < 0.0));
        // slack is the smallest |f'|, attained at δ = β1
        assert!((c.slack - (-deriv(0.778))).abs() < 1e-3, "slack {}", c.slack);
        // past 2β2 − 1 the function turns upward
        assert!(!monotonicity_check(0.95, 0.96, MONOTONICITY_GRID).pass);
    }

    #[test]
    fn asymptotic_constants_at_k_ten_thousand() {
        let r = check_all(10_000, 25.0, &asymptotic());
        let pass = |name: &str| r.get(name).unwrap().pass;
        assert!(pass("1/2 < beta1 < beta2 < 1 - alpha"));
        assert!(pass("4 alpha < 2(1 - beta2) < 1 - beta1"));
        assert!(pass("f decreasing on [0, beta1]"));
        assert!(pass("theta = 1 - exp(2edk / 2^(alpha k))/2 >= 0.4"));
        assert!(pass("d <= 2^(alpha k / 4)"));
        assert!(pass(
            "16 k^4 d^5 <= 2^((beta2 - beta1) k - h((beta2 - beta1)/(1 - beta1)) (1 - beta1) k)"
        ));
        // these hold only for far larger k
        assert!(!pass("16 k^4 d^5 <= 2^((beta1 - h(1 - beta1)) k)"));
        assert!(!pass("2e(kd + 1) < 2^((1 - h(alpha/(1 - beta2))) (1 - beta2) k)"));
        assert!(!pass("k 2^(-alpha k) (dk)^5 4 <= 1/(150 e^3)"));
        assert!(!pass("36 e d^3 k^4 0.6^(alpha k) <= 1/2"));
        // the left side tends to 1 as k grows, so this one never holds
        assert!(!pass("2^(-1/(48 d k^4)) e^((2 d^2/alpha) / 2^(alpha k)) <= 0.9"));
        assert!(!r.all_pass);
        // log2(16 k^4 d^5) = 4 + 4 log2(1e4) + 125
        let c = r.get("16 k^4 d^5 <= 2^((beta1 - h(1 - beta1)) k)").unwrap();
        let lhs = 4.0 + 4.0 * 10_000f64.log2() + 125.0;
        let rhs = (0.778 - binary_entropy(0.222).unwrap()) * 10_000.0;
        assert!((c.slack - (rhs - lhs)).abs() < 1e-9);
    }

    #[test]
    fn marking_conditions_hold_for_large_k() {
        let k = 200_000;
        let r = check_conditions_marking(k, k as f64 / 400.0, &asymptotic());
        assert!(r.all_pass, "{r:#?}");
        let r = check_all(k, k as f64 / 400.0, &asymptotic());
        let failing: Vec<&str> = r
            .checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name.as_str())
            .collect();
        assert_eq!(
            failing,
            vec!["2^(-1/(48 d k^4)) e^((2 d^2/alpha) / 2^(alpha k)) <= 0.9"]
        );
    }

    #[test]
    fn small_k_fails() {
        let r = check_conditions_marking(3, 1.0, &asymptotic());
        assert!(r.checks.iter().any(|c| !c.pass));
        let mut equal = asymptotic();
        equal.beta2 = equal.beta1;
        let r = check_conditions_marking(10_000, 25.0, &equal);
        assert!(!r.get("1/2 < beta1 < beta2 < 1 - alpha").unwrap().pass);
    }

    #[test]
    fn degree_bound_passes_at_equality() {
        let alpha = 1.0 / 75.0;
        let k = 3000;
        let at = alpha * k as f64 / 4.0;
        let checks = sampler_checks(k, at, alpha);
        let c = checks.iter().find(|c| c.name == "d <= 2^(alpha k / 4)").unwrap();
        assert!(c.pass);
        let checks = sampler_checks(k, at + 1e-6, alpha);
        assert!(
            !checks
                .iter()
                .find(|c| c.name == "d <= 2^(alpha k / 4)")
                .unwrap()
                .pass
        );
    }

    #[test]
    fn theta_values() {
        // 1 − ½ e^{2e·2·3/2}
        let direct = 1.0 - 0.5 * (2.0 * std::f64::consts::E * 2.0 * 3.0 / 2.0).exp();
        assert!((theta_value(3, 1.0, 1.0 / 3.0) - direct).abs() < 1e-9 * direct.abs());
        assert!(direct < 0.0);
        // at k = 400, d = 2 the exponent is about 108, far from valid
        assert!(theta_value(400, 1.0, 1.0 / 75.0) < 0.0);
        // approaches 1/2 from below along d = 2^{k/400}
        let t1 = theta_value(2_000, 5.0, 1.0 / 75.0);
        let t2 = theta_value(4_000, 10.0, 1.0 / 75.0);
        assert!(t1 < t2 && t2 < 0.5 && 0.5 - t2 < 1e-8, "{t1} {t2}");
    }
}
