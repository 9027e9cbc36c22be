//! Detector-efficiency-mismatch attack modeling for BB84 quantum key
//! distribution.
//!
//! Gated single-photon detectors are sensitive only inside a short detection
//! window, and the windows of the 0 and 1 detectors in a receiver are never
//! perfectly aligned. An eavesdropper who retimes pulses can therefore skew
//! which detector is able to fire, mount an intercept-resend attack whose
//! errors are partially hidden, and force the legitimate parties to apply
//! extra privacy amplification. This crate models that attack surface end to
//! end:
//!
//! - [`curves`] — time-dependent efficiency curves, measured-data ingestion,
//!   the worst-case mismatch parameter, and the jitter countermeasure.
//! - [`analytics`] — closed-form arrival probability, QBER, and mutual
//!   informations for the intercept-resend faked-states attack.
//! - [`attack`] — Eve's faked-state construction, Bob's click model, the
//!   exhaustive outcome enumeration, and an equal-rate attack optimizer.
//! - [`security`] — worst-case actual-vs-measured error-rate bound, the
//!   privacy-amplification rate, and the security region classifier.
//! - [`montecarlo`] — a deterministic pulse-level simulator that must agree
//!   statistically with the closed forms.
//! - [`qnd`] — a discretized time-bin single-photon simulator for the
//!   nondemolition timing measurement.

pub mod analytics;
pub mod attack;
pub mod curves;
pub mod montecarlo;
pub mod qnd;
pub mod security;

mod rng;
