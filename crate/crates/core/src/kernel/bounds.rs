//! Closed-form bounds and the boundary-coefficient assumption check.

use serde::Serialize;

use crate::profile::ReactionProfile;

/// A positive quantity carried in log domain; `value` is present when it is
/// representable as a finite `f64`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogBound {
    pub ln: f64,
    pub value: Option<f64>,
}

impl LogBound {
    pub fn from_ln(ln: f64) -> Self {
        let v = ln.exp();
        LogBound {
            ln,
            value: v.is_finite().then_some(v),
        }
    }
}

/// Bound (2λ̄/ε)·e^{4λ̄/ε} on the sup of the direct kernel.
pub fn kernel_sup_bound(lambda_bar: f64, eps: f64) -> LogBound {
    if lambda_bar <= 0.0 {
        return LogBound {
            ln: f64::NEG_INFINITY,
            value: Some(0.0),
        };
    }
    LogBound::from_ln((2.0 * lambda_bar / eps).ln() + 4.0 * lambda_bar / eps)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Ok,
    /// Violated; the design is still run but its stability argument does not apply.
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub pass: bool,
    /// q − λ_max/(2ε) − 1/2
    pub margin: f64,
    pub lambda_max: f64,
    pub severity: Severity,
}

/// Checks q > λ_max/(2ε) + 1/2.
pub fn check_assumption1(profile: &ReactionProfile, q: f64, eps: f64) -> AssumptionReport {
    let lambda_max = profile.lambda_max();
    let margin = q - lambda_max / (2.0 * eps) - 0.5;
    let pass = margin > 0.0;
    AssumptionReport {
        pass,
        margin,
        lambda_max,
        severity: if pass { Severity::Ok } else { Severity::Warning },
    }
}
