//! Worst-case security bounds under detector efficiency mismatch.
//!
//! When Eve can steer the two detector efficiencies separately, the error
//! rate Bob measures understates the error rate he would see with ideal
//! detectors: in the worst case Eve times erroneous qubits so they land on
//! the less efficient detector. The bound here relates the two through the
//! worst-case efficiency ratio `eta`, feeds the corrected rate into the
//! one-way privacy-amplification formula `R = 1 - 2 h(delta)`, and
//! classifies `(eta, measured QBER)` points into Secure / NotProven /
//! Insecure regions.

use std::sync::OnceLock;

use thiserror::Error;

use crate::analytics::{self, binary_entropy, AttackEfficiencies};

/// Rounded one-way BB84 error threshold, used for the linear
/// `QBER < 0.11 * eta` rule of thumb. The exact zero of the
/// privacy-amplification rate is [`pa_rate_zero`].
pub const QBER_THRESHOLD_APPROX: f64 = 0.11;

#[derive(Debug, Error, PartialEq)]
pub enum SecurityError {
    #[error("bound undefined at total mismatch with zero measured QBER")]
    UndefinedBound,
    #[error("mixture weights must be positive and sum to 1")]
    BadWeights,
    #[error("pooled arrival probability is zero")]
    NoArrivals,
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Measured QBER that a worst-case eavesdropper can hide an actual error
/// rate `delta` behind, given mismatch `eta`:
/// `eta * delta / (1 + eta * delta - delta)`.
pub fn worst_case_qber(delta: f64, eta: f64) -> f64 {
    eta * delta / (1.0 + eta * delta - delta)
}

/// Worst-case actual error rate consistent with a measured QBER:
/// `QBER / (eta + (1 - eta) * QBER)`. Inverse of [`worst_case_qber`] in
/// `delta`. This, not the measured QBER, sets the privacy-amplification
/// requirement.
pub fn actual_delta(measured_qber: f64, eta: f64) -> Result<f64, SecurityError> {
    if !(0.0..1.0).contains(&measured_qber) {
        return Err(SecurityError::InvalidInput(format!(
            "measured_qber {measured_qber} outside [0, 1)"
        )));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(SecurityError::InvalidInput(format!(
            "eta {eta} outside [0, 1]"
        )));
    }
    let denom = eta + (1.0 - eta) * measured_qber;
    if denom == 0.0 {
        // eta = 0 and QBER = 0: any actual error rate is consistent.
        return Err(SecurityError::UndefinedBound);
    }
    Ok(measured_qber / denom)
}

/// Key rate available after one-way privacy amplification at actual error
/// rate `delta`: `1 - 2 h(delta)`. Negative means no key.
pub fn pa_rate(delta: f64) -> f64 {
    1.0 - 2.0 * binary_entropy(delta)
}

/// The error rate at which [`pa_rate`] crosses zero, located once by
/// bisection to 1e-9 rather than hard-coding the rounded 0.11.
pub fn pa_rate_zero() -> f64 {
    static ZERO: OnceLock<f64> = OnceLock::new();
    *ZERO.get_or_init(|| {
        let mut lo = 0.0;
        let mut hi = 0.5;
        while hi - lo > 1e-9 {
            let mid = 0.5 * (lo + hi);
            if pa_rate(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    })
}

/// Exact worst-case QBER budget at mismatch `eta`: the largest measured
/// QBER for which the corrected error rate still allows a positive key
/// rate.
pub fn exact_qber_budget(eta: f64) -> f64 {
    worst_case_qber(pa_rate_zero(), eta)
}

/// The linear approximation of the budget, `0.11 * eta`.
pub fn approx_qber_budget(eta: f64) -> f64 {
    QBER_THRESHOLD_APPROX * eta
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SecurityRegion {
    /// Positive key rate after mismatch-corrected privacy amplification.
    Secure,
    /// No security proof applies, but the intercept-resend attack cannot
    /// reproduce the observation either.
    NotProven,
    /// The symmetric intercept-resend attack explains the measured QBER
    /// outright.
    Insecure,
}

impl SecurityRegion {
    pub fn label(self) -> &'static str {
        match self {
            SecurityRegion::Secure => "Secure",
            SecurityRegion::NotProven => "NotProven",
            SecurityRegion::Insecure => "Insecure",
        }
    }
}

/// Security verdict for one `(eta, measured QBER)` operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecurityAssessment {
    pub eta: f64,
    pub measured_qber: f64,
    /// Worst-case actual error rate; `None` only at the undefined corner
    /// `eta = 0, QBER = 0`.
    pub delta: Option<f64>,
    /// Privacy-amplified rate at `delta`.
    pub rate: Option<f64>,
    pub region: SecurityRegion,
}

/// Classify an operating point. The measured QBER is assumed to already
/// exclude dark-count contributions. Boundary points go to the more
/// pessimistic region: a QBER equal to the attack curve is Insecure, and a
/// corrected `delta` equal to the rate zero is NotProven.
pub fn classify(eta: f64, measured_qber: f64) -> Result<SecurityAssessment, SecurityError> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(SecurityError::InvalidInput(format!(
            "eta {eta} outside [0, 1]"
        )));
    }
    if !(0.0..=1.0).contains(&measured_qber) {
        return Err(SecurityError::InvalidInput(format!(
            "measured_qber {measured_qber} outside [0, 1]"
        )));
    }

    let attack_qber = analytics::symmetric_curve_point(eta).qber;
    let delta = if measured_qber < 1.0 {
        match actual_delta(measured_qber, eta) {
            Ok(d) => Some(d),
            Err(SecurityError::UndefinedBound) => None,
            Err(e) => return Err(e),
        }
    } else {
        Some(1.0)
    };
    let rate = delta.map(pa_rate);

    let region = if measured_qber >= attack_qber {
        SecurityRegion::Insecure
    } else {
        // Not Insecure implies eta > 0 and measured_qber < 1, so delta is set.
        let d = delta.expect("delta defined away from the (0, 0) corner");
        if d < pa_rate_zero() {
            SecurityRegion::Secure
        } else {
            SecurityRegion::NotProven
        }
    };

    Ok(SecurityAssessment {
        eta,
        measured_qber,
        delta,
        rate,
        region,
    })
}

/// QBER of an attack that mixes several timings: per-timing error and
/// arrival probabilities are pooled before dividing, and the result can
/// never undercut the best single timing.
pub fn mixture_qber(components: &[(f64, AttackEfficiencies)]) -> Result<f64, SecurityError> {
    if components.is_empty() {
        return Err(SecurityError::BadWeights);
    }
    let mut weight_sum = 0.0;
    let mut pooled_errors = 0.0;
    let mut pooled_arrivals = 0.0;
    for &(w, e) in components {
        if !(w.is_finite() && w > 0.0) {
            return Err(SecurityError::BadWeights);
        }
        weight_sum += w;
        pooled_errors += w * (2.0 * e.eta0_at_t1 + 2.0 * e.eta1_at_t0) / 8.0;
        pooled_arrivals += w * analytics::p_arrive(&e);
    }
    if (weight_sum - 1.0).abs() > 1e-9 {
        return Err(SecurityError::BadWeights);
    }
    if pooled_arrivals <= 0.0 {
        return Err(SecurityError::NoArrivals);
    }
    Ok(pooled_errors / pooled_arrivals)
}
