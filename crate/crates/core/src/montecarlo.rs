//! Pulse-level BB84 simulation, with and without the timing attack.
//!
//! The simulator exists to check the closed forms, not to replace them: the
//! same click model drives both, so statistical agreement between [`run`]
//! and [`crate::analytics`] validates the protocol bookkeeping (sifting,
//! dark counts, double clicks, Eve's record) rather than restating one
//! formula twice.
//!
//! Per-pulse randomness comes from a counter-based generator keyed by
//! `(seed, pulse index)`, so a run is bit-reproducible for a fixed seed no
//! matter how the pulse range is chunked across threads. Statistics are
//! merged by plain integer addition, which is associative and commutative.

use rayon::prelude::*;
use thiserror::Error;

use crate::analytics::AttackTiming;
use crate::attack::{self, Basis, FakedState, PhotonModel};
use crate::curves::DetectorPair;
use crate::rng::PulseRng;

/// Upper end of the brightness interval searched by
/// [`brightness_to_match_rate`].
pub const BRIGHTNESS_SEARCH_MAX: f64 = 1e4;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid config: {field}: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error(
        "target rate {target:.6e} unachievable: maximum on the brightness search interval is {max_achievable:.6e}"
    )]
    UnachievableRate { target: f64, max_achievable: f64 },
    #[error("brightness matching requires an attack plan in the config")]
    NoAttackPlan,
}

/// What Alice's source emits per pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Source {
    /// Exactly one photon per pulse.
    SinglePhoton,
    /// Coherent pulse; the channel attenuates the mean photon number.
    Coherent { mean_photons: f64 },
}

/// How Bob resolves gates in which both detectors fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DoubleClickPolicy {
    /// Assign a uniformly random bit and keep the event.
    RandomAssign,
    /// Drop the event from the key (it still counts as a detection).
    Discard,
}

/// Eve's resend schedule: the two timings plus a brightness per timing.
/// Brightness 1 resends exact single photons.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackPlan {
    pub timing: AttackTiming,
    pub mu_t0: f64,
    pub mu_t1: f64,
}

impl AttackPlan {
    pub fn single_photon(timing: AttackTiming) -> Self {
        Self {
            timing,
            mu_t0: 1.0,
            mu_t1: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_pulses: u64,
    pub seed: u64,
    pub pair: DetectorPair,
    /// Channel survival probability without the attack. Eve intercepts at
    /// the source and resends at Bob's doorstep, so an active attack
    /// bypasses it.
    pub channel_transmittance: f64,
    pub source: Source,
    pub attack: Option<AttackPlan>,
    /// Arrival time of honest pulses, normally the curve overlap center.
    pub nominal_arrival_time_ns: f64,
    pub double_click_policy: DoubleClickPolicy,
}

impl SimConfig {
    fn validate(&self) -> Result<(), SimError> {
        let bad =
            |field: &'static str, reason: String| Err(SimError::InvalidConfig { field, reason });
        if self.n_pulses == 0 {
            return bad("n_pulses", "must be positive".into());
        }
        if !(self.channel_transmittance > 0.0 && self.channel_transmittance <= 1.0) {
            return bad(
                "channel_transmittance",
                format!("{} outside (0, 1]", self.channel_transmittance),
            );
        }
        if let Source::Coherent { mean_photons } = self.source {
            if !(mean_photons.is_finite() && mean_photons >= 0.0) {
                return bad(
                    "source.mean_photons",
                    format!("{mean_photons} must be >= 0"),
                );
            }
        }
        if !self.nominal_arrival_time_ns.is_finite() {
            return bad("nominal_arrival_time_ns", "must be finite".into());
        }
        if let Some(plan) = &self.attack {
            for (field, mu) in [("attack.mu_t0", plan.mu_t0), ("attack.mu_t1", plan.mu_t1)] {
                if !(mu.is_finite() && mu >= 0.0) {
                    return bad(field, format!("{mu} must be >= 0"));
                }
            }
            if !(plan.timing.t0_ns.is_finite() && plan.timing.t1_ns.is_finite()) {
                return bad("attack.timing", "must be finite".into());
            }
        }
        for (field, d) in [
            ("pair.dark0", self.pair.dark0),
            ("pair.dark1", self.pair.dark1),
        ] {
            if !(d.is_finite() && (0.0..1.0).contains(&d)) {
                return bad(field, format!("{d} outside [0, 1)"));
            }
        }
        Ok(())
    }
}

/// Detector outcome of one gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateOutcome {
    Nothing,
    Click0,
    Click1,
    Double,
}

impl GateOutcome {
    pub const ALL: [GateOutcome; 4] = [
        GateOutcome::Nothing,
        GateOutcome::Click0,
        GateOutcome::Click1,
        GateOutcome::Double,
    ];

    pub fn index(self) -> usize {
        match self {
            GateOutcome::Nothing => 0,
            GateOutcome::Click0 => 1,
            GateOutcome::Click1 => 2,
            GateOutcome::Double => 3,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            GateOutcome::Nothing => "none",
            GateOutcome::Click0 => "click0",
            GateOutcome::Click1 => "click1",
            GateOutcome::Double => "double",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct Counts {
    basis_matches: u64,
    sifted: u64,
    kept: u64,
    errors: u64,
    clicks0: u64,
    clicks1: u64,
    double_clicks: u64,
    coincidences: [[u64; 4]; 2],
    eve_kept: u64,
    eve_agree: u64,
}

impl Counts {
    fn merge(mut self, other: Self) -> Self {
        self.basis_matches += other.basis_matches;
        self.sifted += other.sifted;
        self.kept += other.kept;
        self.errors += other.errors;
        self.clicks0 += other.clicks0;
        self.clicks1 += other.clicks1;
        self.double_clicks += other.double_clicks;
        for b in 0..2 {
            for o in 0..4 {
                self.coincidences[b][o] += other.coincidences[b][o];
            }
        }
        self.eve_kept += other.eve_kept;
        self.eve_agree += other.eve_agree;
        self
    }
}

/// Aggregated results of a simulation run.
///
/// `sent >= basis_matches >= sifted >= kept >= errors`. "Sifted" counts
/// basis-matched gates with at least one click; "kept" additionally requires
/// that the gate produced a bit (double clicks are dropped under
/// [`DoubleClickPolicy::Discard`]).
#[derive(Debug, Clone, PartialEq)]
pub struct SimStats {
    pub sent: u64,
    pub basis_matches: u64,
    pub sifted: u64,
    pub kept: u64,
    pub errors: u64,
    pub clicks0: u64,
    pub clicks1: u64,
    pub double_clicks: u64,
    /// Gate outcome counts keyed by Bob's basis (Z, X) and
    /// [`GateOutcome::index`], over all pulses.
    pub coincidences: [[u64; 4]; 2],
    /// Empirical error fraction of kept bits.
    pub qber: f64,
    /// Binomial standard error of `qber`.
    pub qber_std_err: f64,
    /// Raw per-pulse click rate of each detector.
    pub click_rate0: f64,
    pub click_rate1: f64,
    /// Fraction of kept bits on which Eve's record matches Alice's; present
    /// only when the attack is active.
    pub eve_alice_agreement: Option<f64>,
}

/// Run the simulation. Deterministic for a fixed seed, independent of
/// worker count and chunking.
pub fn run(config: &SimConfig) -> Result<SimStats, SimError> {
    config.validate()?;
    let counts = (0..config.n_pulses)
        .into_par_iter()
        .fold(Counts::default, |acc, i| {
            acc.merge(simulate_pulse(config, i))
        })
        .reduce(Counts::default, Counts::merge);
    Ok(finish(config, counts))
}

fn simulate_pulse(config: &SimConfig, index: u64) -> Counts {
    let mut rng = PulseRng::for_pulse(config.seed, index);
    let mut c = Counts::default();

    let alice_basis = if rng.coin() { Basis::Z } else { Basis::X };
    let alice_bit = rng.coin() as u8;

    // (pulse at Bob, click model, Eve's record)
    let (pulse, model, eve_bit): (Option<FakedState>, PhotonModel, Option<u8>) =
        match &config.attack {
            Some(plan) => {
                let eve_basis = if rng.coin() { Basis::Z } else { Basis::X };
                let eve_coin = rng.coin() as u8;
                let eve_bit = if eve_basis == alice_basis {
                    alice_bit
                } else {
                    eve_coin
                };
                let mut f = attack::faked_state_for(eve_basis, eve_bit, plan.timing);
                f.brightness = if eve_bit == 0 { plan.mu_t0 } else { plan.mu_t1 };
                let model = if f.brightness == 1.0 {
                    PhotonModel::SinglePhoton
                } else {
                    PhotonModel::Coherent
                };
                (Some(f), model, Some(eve_bit))
            }
            None => {
                // Honest pulses ride the same click model as faked states: a
                // genuine BB84 state is the faked state carrying Alice's own
                // basis and bit at the nominal arrival time.
                let state = |brightness: f64| FakedState {
                    basis: alice_basis,
                    bit: alice_bit,
                    timing_ns: config.nominal_arrival_time_ns,
                    brightness,
                };
                match config.source {
                    Source::SinglePhoton => {
                        let survives = rng.bernoulli(config.channel_transmittance);
                        (
                            survives.then(|| state(1.0)),
                            PhotonModel::SinglePhoton,
                            None,
                        )
                    }
                    Source::Coherent { mean_photons } => (
                        Some(state(mean_photons * config.channel_transmittance)),
                        PhotonModel::Coherent,
                        None,
                    ),
                }
            }
        };

    let bob_basis = if rng.coin() { Basis::Z } else { Basis::X };

    let (mut click0, mut click1) = match &pulse {
        Some(f) => {
            let probs = attack::bob_click_probs_with_model(f, bob_basis, &config.pair, model);
            match model {
                PhotonModel::SinglePhoton => {
                    // One photon: the outcomes are mutually exclusive.
                    let u = rng.next_f64();
                    if u < probs.p0 {
                        (true, false)
                    } else if u < probs.p0 + probs.p1 {
                        (false, true)
                    } else {
                        (false, false)
                    }
                }
                _ => (rng.bernoulli(probs.p0), rng.bernoulli(probs.p1)),
            }
        }
        None => (false, false),
    };

    // Dark counts fire independently of the light.
    click0 |= rng.bernoulli(config.pair.dark0);
    click1 |= rng.bernoulli(config.pair.dark1);

    c.clicks0 += click0 as u64;
    c.clicks1 += click1 as u64;
    let outcome = match (click0, click1) {
        (false, false) => GateOutcome::Nothing,
        (true, false) => GateOutcome::Click0,
        (false, true) => GateOutcome::Click1,
        (true, true) => GateOutcome::Double,
    };
    let basis_idx = match bob_basis {
        Basis::Z => 0,
        Basis::X => 1,
    };
    c.coincidences[basis_idx][outcome.index()] += 1;
    if outcome == GateOutcome::Double {
        c.double_clicks += 1;
    }

    let bob_bit: Option<u8> = match outcome {
        GateOutcome::Click0 => Some(0),
        GateOutcome::Click1 => Some(1),
        GateOutcome::Double => match config.double_click_policy {
            DoubleClickPolicy::RandomAssign => Some(rng.coin() as u8),
            DoubleClickPolicy::Discard => None,
        },
        GateOutcome::Nothing => None,
    };

    if bob_basis == alice_basis {
        c.basis_matches += 1;
        if outcome != GateOutcome::Nothing {
            c.sifted += 1;
            if let Some(b) = bob_bit {
                c.kept += 1;
                if b != alice_bit {
                    c.errors += 1;
                }
                if let Some(eb) = eve_bit {
                    c.eve_kept += 1;
                    if eb == alice_bit {
                        c.eve_agree += 1;
                    }
                }
            }
        }
    }
    c
}

fn finish(config: &SimConfig, c: Counts) -> SimStats {
    let sent = config.n_pulses;
    let qber = if c.kept > 0 {
        c.errors as f64 / c.kept as f64
    } else {
        0.0
    };
    let qber_std_err = if c.kept > 0 {
        (qber * (1.0 - qber) / c.kept as f64).sqrt()
    } else {
        0.0
    };
    SimStats {
        sent,
        basis_matches: c.basis_matches,
        sifted: c.sifted,
        kept: c.kept,
        errors: c.errors,
        clicks0: c.clicks0,
        clicks1: c.clicks1,
        double_clicks: c.double_clicks,
        coincidences: c.coincidences,
        qber,
        qber_std_err,
        click_rate0: c.clicks0 as f64 / sent as f64,
        click_rate1: c.clicks1 as f64 / sent as f64,
        eve_alice_agreement: config.attack.as_ref().map(|_| {
            if c.eve_kept > 0 {
                c.eve_agree as f64 / c.eve_kept as f64
            } else {
                0.0
            }
        }),
    }
}

/// Expected probability (coherent model) that a resend at `timing_ns`
/// carrying `resent_bit` produces at least one photon click in a sifted
/// round. Half the sifted rounds see the resend in its own basis (all light
/// on the resent bit's detector), half in the conjugate basis (50/50
/// split). Dark counts are excluded: Eve cannot steer them and they load
/// the comparison on both sides equally.
pub fn resend_detection_rate(pair: &DetectorPair, timing_ns: f64, resent_bit: u8, mu: f64) -> f64 {
    let eta0 = pair.curve0.eval(timing_ns);
    let eta1 = pair.curve1.eval(timing_ns);
    let eta_own = if resent_bit == 0 { eta0 } else { eta1 };
    let split = 1.0 - (-mu * 0.5 * (eta0 + eta1)).exp();
    let eigen = 1.0 - (-mu * eta_own).exp();
    0.5 * split + 0.5 * eigen
}

/// Brightness Eve needs per timing so that the attacked sifted detection
/// rate matches `target_rate`, to 1e-6 relative, by bisection of
/// [`resend_detection_rate`] over `[0, BRIGHTNESS_SEARCH_MAX]`.
///
/// Returns `(mu_t0, mu_t1)`; a resend at `t0` carries bit 1 and a resend at
/// `t1` carries bit 0.
pub fn brightness_to_match_rate(
    config: &SimConfig,
    target_rate: f64,
) -> Result<(f64, f64), SimError> {
    config.validate()?;
    let plan = config.attack.as_ref().ok_or(SimError::NoAttackPlan)?;
    if !(target_rate.is_finite() && target_rate > 0.0 && target_rate < 1.0) {
        return Err(SimError::InvalidConfig {
            field: "target_rate",
            reason: format!("{target_rate} outside (0, 1)"),
        });
    }

    let solve = |timing_ns: f64, resent_bit: u8| -> Result<f64, SimError> {
        let rate = |mu: f64| resend_detection_rate(&config.pair, timing_ns, resent_bit, mu);
        let max_achievable = rate(BRIGHTNESS_SEARCH_MAX);
        if target_rate > max_achievable {
            return Err(SimError::UnachievableRate {
                target: target_rate,
                max_achievable,
            });
        }
        let (mut lo, mut hi) = (0.0, BRIGHTNESS_SEARCH_MAX);
        let mut mid = 0.5 * (lo + hi);
        for _ in 0..200 {
            mid = 0.5 * (lo + hi);
            let r = rate(mid);
            if ((r - target_rate) / target_rate).abs() <= 1e-6 {
                break;
            }
            if r < target_rate {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(mid)
    };

    Ok((solve(plan.timing.t0_ns, 1)?, solve(plan.timing.t1_ns, 0)?))
}
