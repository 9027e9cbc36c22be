//! Eve's faked-states intercept-resend strategy.
//!
//! Eve measures each of Alice's pulses in a random basis, then resends the
//! opposite bit in the opposite basis, timed so that the detector that would
//! register the "wrong" bit is suppressed. If Bob picks the basis Eve did
//! not measure in, the resent state is an eigenstate of his measurement and
//! all light lands on the timing-suppressed detector — the round is either
//! lost or (rarely) an error. If Bob picks Eve's basis, the round survives
//! sifting and the interferometer splits the light 50/50, with the correct
//! detector's click dominating because of the timing.
//!
//! [`enumerate_table`] brute-forces every (Alice, Eve, Bob) combination and
//! aggregates the same quantities the closed forms in [`crate::analytics`]
//! produce; the two must agree to near machine precision, which is what the
//! oracle-equivalence tests check. [`optimize_equal_rates`] searches timing
//! and brightness grids for the lowest-QBER attack that keeps Bob's 0 and 1
//! detection rates balanced.

use thiserror::Error;

use crate::analytics::{
    shannon_entropy_bits, AttackEfficiencies, AttackTiming, EveOutcome, InfoReport,
};
use crate::curves::{DetectorPair, EfficiencyCurve};

/// Relative tolerance on the sifted detection-rate balance: a receiver
/// watching its 0/1 rates would flag anything beyond this.
pub const EQUAL_RATE_REL_TOL: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("timing and brightness grids must be nonempty")]
    EmptyGrid,
    #[error("every grid point yields zero detection rate")]
    NoDetections,
    #[error(
        "no grid point satisfies the equal-rate constraint; closest: \
         t0={:.6} t1={:.6} mu0={:.4} mu1={:.4} rate0={:.6e} rate1={:.6e} qber={:.6}",
        best.timing.t0_ns, best.timing.t1_ns, best.mu_t0, best.mu_t1,
        best.rate0, best.rate1, best.qber
    )]
    NoFeasiblePoint { best: Box<EqualRateAttack> },
}

/// BB84 preparation/measurement basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Basis {
    Z,
    X,
}

impl Basis {
    pub const BOTH: [Basis; 2] = [Basis::Z, Basis::X];

    /// The conjugate basis.
    pub fn opposite(self) -> Basis {
        match self {
            Basis::Z => Basis::X,
            Basis::X => Basis::Z,
        }
    }
}

/// A basis together with a bit value: one of the four BB84 states, also used
/// for Eve's measurement record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasisBit {
    pub basis: Basis,
    pub bit: u8,
}

impl BasisBit {
    pub const ALL: [BasisBit; 4] = [
        BasisBit {
            basis: Basis::Z,
            bit: 0,
        },
        BasisBit {
            basis: Basis::Z,
            bit: 1,
        },
        BasisBit {
            basis: Basis::X,
            bit: 0,
        },
        BasisBit {
            basis: Basis::X,
            bit: 1,
        },
    ];

    fn eve_outcome(self) -> EveOutcome {
        match (self.basis, self.bit) {
            (Basis::Z, 0) => EveOutcome::Z0,
            (Basis::Z, _) => EveOutcome::Z1,
            (Basis::X, 0) => EveOutcome::X0,
            (Basis::X, _) => EveOutcome::X1,
        }
    }
}

/// The pulse Eve resends: state, arrival timing, and brightness.
///
/// A brightness of exactly 1 denotes the single-photon idealization, where
/// the two detectors' click outcomes are mutually exclusive. Any other value
/// is treated as the mean photon number of a coherent pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FakedState {
    pub basis: Basis,
    pub bit: u8,
    pub timing_ns: f64,
    pub brightness: f64,
}

/// Eve's resend rule: the opposite bit in the opposite basis, at the timing
/// that suppresses the opposite bit's detector. In the sifted rounds the
/// surviving clicks then reproduce the bit Eve measured.
pub fn faked_state_for(eve_basis: Basis, eve_bit: u8, timing: AttackTiming) -> FakedState {
    debug_assert!(eve_bit <= 1);
    FakedState {
        basis: eve_basis.opposite(),
        bit: 1 - eve_bit,
        timing_ns: if eve_bit == 0 {
            timing.t0_ns
        } else {
            timing.t1_ns
        },
        brightness: 1.0,
    }
}

/// Click probabilities of Bob's two detectors for one incoming pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClickProbs {
    pub p0: f64,
    pub p1: f64,
}

impl ClickProbs {
    pub fn total(&self) -> f64 {
        self.p0 + self.p1
    }
}

/// Photon-statistics model for the click probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhotonModel {
    /// Exactly one photon; outcomes are mutually exclusive and
    /// `p_b = split_b * eta_b`.
    SinglePhoton,
    /// Coherent pulse of mean photon number `brightness`;
    /// `p_b = 1 - exp(-mu * split_b * eta_b)`, detectors independent.
    Coherent,
    /// Number state with `round(brightness)` photons;
    /// `p_b = 1 - (1 - split_b * eta_b)^n`.
    Fock,
}

/// Fraction of the pulse reaching each detector, set by the interference of
/// the faked state with Bob's basis choice: an eigenstate sends everything
/// to its own bit's detector, a conjugate-basis pulse splits 50/50.
fn split_fractions(f: &FakedState, bob_basis: Basis) -> (f64, f64) {
    if bob_basis == f.basis {
        if f.bit == 0 {
            (1.0, 0.0)
        } else {
            (0.0, 1.0)
        }
    } else {
        (0.5, 0.5)
    }
}

/// Click probabilities for a faked (or genuine) state at Bob's receiver,
/// before dark counts. Brightness 1 selects the single-photon model, any
/// other value the coherent model.
pub fn bob_click_probs(f: &FakedState, bob_basis: Basis, pair: &DetectorPair) -> ClickProbs {
    let model = if f.brightness == 1.0 {
        PhotonModel::SinglePhoton
    } else {
        PhotonModel::Coherent
    };
    bob_click_probs_with_model(f, bob_basis, pair, model)
}

/// As [`bob_click_probs`] with an explicit photon-statistics model.
pub fn bob_click_probs_with_model(
    f: &FakedState,
    bob_basis: Basis,
    pair: &DetectorPair,
    model: PhotonModel,
) -> ClickProbs {
    debug_assert!(f.brightness >= 0.0);
    let (s0, s1) = split_fractions(f, bob_basis);
    let eta0 = pair.curve0.eval(f.timing_ns);
    let eta1 = pair.curve1.eval(f.timing_ns);
    let click = |s: f64, eta: f64| -> f64 {
        match model {
            PhotonModel::SinglePhoton => s * eta,
            PhotonModel::Coherent => 1.0 - (-f.brightness * s * eta).exp(),
            PhotonModel::Fock => {
                let n = f.brightness.round().max(0.0) as u32;
                1.0 - (1.0 - s * eta).powi(n as i32)
            }
        }
    };
    ClickProbs {
        p0: click(s0, eta0),
        p1: click(s1, eta1),
    }
}

/// One joint configuration of the enumeration: Alice's state, Eve's
/// measurement record, Bob's basis, and the conditional outcome
/// probabilities of the resent pulse.
#[derive(Debug, Clone, PartialEq)]
pub struct EnumerationRow {
    pub alice: BasisBit,
    pub eve: BasisBit,
    pub bob_basis: Basis,
    /// Probability of this (alice, eve, bob) configuration occurring.
    pub weight: f64,
    pub resent: FakedState,
    pub p_click0: f64,
    pub p_click1: f64,
    pub p_lost: f64,
    /// Whether sifting keeps this configuration (Alice's basis == Bob's).
    pub sifted: bool,
}

/// Exact brute force over every (Alice, Eve, Bob) combination.
#[derive(Debug, Clone, PartialEq)]
pub struct EnumerationResult {
    pub rows: Vec<EnumerationRow>,
    pub p_arrive: f64,
    pub qber: f64,
    pub report: InfoReport,
}

/// Enumerate the attack exactly: Alice's four states, Eve's basis choice and
/// measurement outcome (her own basis reads Alice's bit, the conjugate basis
/// gives a fair coin), Bob's basis, and the single-photon click
/// probabilities of the resent state. Aggregates arrival probability, QBER,
/// and the full information tables; serves as the independent oracle for
/// [`crate::analytics`].
pub fn enumerate_table(pair: &DetectorPair, timing: AttackTiming) -> EnumerationResult {
    let mut rows = Vec::with_capacity(32);
    for alice in BasisBit::ALL {
        for eve in BasisBit::ALL {
            // Eve's outcome distribution given Alice's state.
            let eve_weight = if eve.basis == alice.basis {
                if eve.bit == alice.bit {
                    0.5
                } else {
                    0.0
                }
            } else {
                0.25
            };
            let resent = faked_state_for(eve.basis, eve.bit, timing);
            for bob_basis in Basis::BOTH {
                let clicks = bob_click_probs(&resent, bob_basis, pair);
                rows.push(EnumerationRow {
                    alice,
                    eve,
                    bob_basis,
                    weight: 0.25 * eve_weight * 0.5,
                    resent,
                    p_click0: clicks.p0,
                    p_click1: clicks.p1,
                    p_lost: 1.0 - clicks.total(),
                    sifted: bob_basis == alice.basis,
                });
            }
        }
    }

    // Aggregates over sifted rows. Sifting keeps half the weight.
    let mut arrive_mass = 0.0;
    let mut error_mass = 0.0;
    for row in rows.iter().filter(|r| r.sifted) {
        arrive_mass += row.weight * (row.p_click0 + row.p_click1);
        let wrong = if row.alice.bit == 0 {
            row.p_click1
        } else {
            row.p_click0
        };
        error_mass += row.weight * wrong;
    }
    let p_arrive = arrive_mass / 0.5;
    let qber = if arrive_mass > 0.0 {
        error_mass / arrive_mass
    } else {
        0.0
    };

    // Information tables from the Z-sifted joint masses (the X-sifted ones
    // are identical by the basis symmetry of the strategy).
    let mut joint_ae = [[0.0; 4]; 2]; // [alice bit][eve outcome] detection mass
    let mut joint_ab = [[0.0; 2]; 2]; // [alice bit][bob bit]
    let mut z_mass = 0.0;
    for row in rows
        .iter()
        .filter(|r| r.sifted && r.alice.basis == Basis::Z && r.bob_basis == Basis::Z)
    {
        let a = row.alice.bit as usize;
        let arrived = row.weight * (row.p_click0 + row.p_click1);
        z_mass += arrived;
        joint_ae[a][row.eve.eve_outcome().index()] += arrived;
        joint_ab[a][0] += row.weight * row.p_click0;
        joint_ab[a][1] += row.weight * row.p_click1;
    }

    let report = report_from_joints(&joint_ae, &joint_ab, z_mass, p_arrive, qber);
    EnumerationResult {
        rows,
        p_arrive,
        qber,
        report,
    }
}

/// Enumeration driven directly by the four attack efficiencies, through
/// synthetic two-point curves that take exactly those values at the two
/// timings. Used to cross-check the closed forms on arbitrary efficiency
/// quadruples.
pub fn enumerate_from_efficiencies(e: &AttackEfficiencies) -> EnumerationResult {
    let timing = AttackTiming {
        t0_ns: 0.0,
        t1_ns: 1.0,
    };
    let pair = DetectorPair::noiseless(
        EfficiencyCurve::tabulated(vec![(0.0, e.eta0_at_t0), (1.0, e.eta0_at_t1)])
            .expect("efficiencies must be in [0, 1]"),
        EfficiencyCurve::tabulated(vec![(0.0, e.eta1_at_t0), (1.0, e.eta1_at_t1)])
            .expect("efficiencies must be in [0, 1]"),
    );
    enumerate_table(&pair, timing)
}

fn report_from_joints(
    joint_ae: &[[f64; 4]; 2],
    joint_ab: &[[f64; 2]; 2],
    total_mass: f64,
    p_arrive: f64,
    qber: f64,
) -> InfoReport {
    let mut p_alice = [0.0; 2];
    let mut p_eve_given_alice = [[0.0; 4]; 2];
    let mut p_bob_given_alice = [[0.0; 2]; 2];
    if total_mass > 0.0 {
        for a in 0..2 {
            let mass_a: f64 = joint_ae[a].iter().sum();
            p_alice[a] = mass_a / total_mass;
            if mass_a > 0.0 {
                for k in 0..4 {
                    p_eve_given_alice[a][k] = joint_ae[a][k] / mass_a;
                }
                for b in 0..2 {
                    p_bob_given_alice[a][b] = joint_ab[a][b] / mass_a;
                }
            }
        }
    }

    let mut p_eve = [0.0; 4];
    for k in 0..4 {
        p_eve[k] = p_alice[0] * p_eve_given_alice[0][k] + p_alice[1] * p_eve_given_alice[1][k];
    }
    let mut p_alice_given_eve = [[0.0; 2]; 4];
    for k in 0..4 {
        if p_eve[k] > 0.0 {
            for a in 0..2 {
                p_alice_given_eve[k][a] = p_alice[a] * p_eve_given_alice[a][k] / p_eve[k];
            }
        }
    }

    let h_alice = shannon_entropy_bits(&p_alice);
    let mut h_alice_given_eve = 0.0;
    for a in 0..2 {
        for k in 0..4 {
            let joint = p_alice[a] * p_eve_given_alice[a][k];
            if joint > 0.0 {
                h_alice_given_eve -= joint * p_alice_given_eve[k][a].log2();
            }
        }
    }

    let mut p_bob = [0.0; 2];
    for b in 0..2 {
        p_bob[b] = p_alice[0] * p_bob_given_alice[0][b] + p_alice[1] * p_bob_given_alice[1][b];
    }
    let mut h_alice_given_bob = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            let joint = p_alice[a] * p_bob_given_alice[a][b];
            if joint > 0.0 {
                h_alice_given_bob -= joint * (joint / p_bob[b]).log2();
            }
        }
    }

    InfoReport {
        p_arrive,
        qber,
        h_alice,
        h_alice_given_eve,
        info_alice_eve: (h_alice - h_alice_given_eve).max(0.0),
        info_alice_bob: (h_alice - h_alice_given_bob).max(0.0),
        p_alice,
        p_eve_given_alice,
        p_eve,
        p_alice_given_eve,
        p_bob_given_alice,
    }
}

/// Result of the equal-rate attack search.
#[derive(Debug, Clone, PartialEq)]
pub struct EqualRateAttack {
    pub timing: AttackTiming,
    /// Brightness of the pulses Eve resends at `t0` (after detecting a 0).
    pub mu_t0: f64,
    /// Brightness of the pulses resent at `t1`.
    pub mu_t1: f64,
    pub qber: f64,
    /// Per-sifted-pulse probability that Bob registers a 0.
    pub rate0: f64,
    /// Per-sifted-pulse probability that Bob registers a 1.
    pub rate1: f64,
}

/// Expected per-sifted-pulse bit rates and error rate of the attack.
///
/// The sifted rounds fall into four resend configurations with fixed
/// weights: Eve measured in Alice's basis and resends a conjugate-basis
/// state (weight 1/4 per timing, Alice's bit known to Eve), or she measured
/// in the conjugate basis and resends an eigenstate of the sifted basis
/// (weight 1/4 per timing, Alice's bit a fair coin). Double clicks in the
/// coherent model are assigned a uniformly random bit, matching the
/// simulator's default policy in expectation. Dark counts are excluded;
/// they are outside Eve's control and load both detectors alike.
pub fn sifted_bit_rates(
    pair: &DetectorPair,
    timing: AttackTiming,
    mu_t0: f64,
    mu_t1: f64,
) -> (f64, f64, f64) {
    let bob = Basis::Z;
    let configs = [
        // (state, weight, error weighting: Some(alice bit) or None for coin)
        (
            FakedState {
                basis: Basis::X,
                bit: 1,
                timing_ns: timing.t0_ns,
                brightness: mu_t0,
            },
            Some(0),
        ),
        (
            FakedState {
                basis: Basis::X,
                bit: 0,
                timing_ns: timing.t1_ns,
                brightness: mu_t1,
            },
            Some(1),
        ),
        (
            FakedState {
                basis: Basis::Z,
                bit: 1,
                timing_ns: timing.t0_ns,
                brightness: mu_t0,
            },
            None,
        ),
        (
            FakedState {
                basis: Basis::Z,
                bit: 0,
                timing_ns: timing.t1_ns,
                brightness: mu_t1,
            },
            None,
        ),
    ];
    let mut rate0 = 0.0;
    let mut rate1 = 0.0;
    let mut errors = 0.0;
    for (state, alice_bit) in configs {
        let (b0, b1) = assigned_bit_probs(&state, bob, pair);
        rate0 += 0.25 * b0;
        rate1 += 0.25 * b1;
        errors += match alice_bit {
            Some(0) => 0.25 * b1,
            Some(_) => 0.25 * b0,
            None => 0.125 * (b0 + b1),
        };
    }
    (rate0, rate1, errors)
}

/// Probability that the pulse is registered as each bit value, resolving
/// coherent-model double clicks by a fair coin.
fn assigned_bit_probs(f: &FakedState, bob_basis: Basis, pair: &DetectorPair) -> (f64, f64) {
    let c = bob_click_probs(f, bob_basis, pair);
    if f.brightness == 1.0 {
        (c.p0, c.p1)
    } else {
        let both = c.p0 * c.p1;
        (c.p0 - 0.5 * both, c.p1 - 0.5 * both)
    }
}

/// Grid search over `(t0, t1, mu0, mu1)` minimizing the attack QBER subject
/// to the equal-rate constraint `|rate0 - rate1| <= 1e-3 * (rate0 + rate1)`.
/// Ties are broken lexicographically on `(t0, t1, mu0, mu1)` in grid order,
/// so the result does not depend on how the search is partitioned.
pub fn optimize_equal_rates(
    pair: &DetectorPair,
    t_grid: &[f64],
    mu_grid: &[f64],
) -> Result<EqualRateAttack, AttackError> {
    if t_grid.is_empty() || mu_grid.is_empty() {
        return Err(AttackError::EmptyGrid);
    }
    let mut best: Option<EqualRateAttack> = None;
    let mut closest: Option<(f64, EqualRateAttack)> = None;
    for &t0 in t_grid {
        for &t1 in t_grid {
            let timing = AttackTiming {
                t0_ns: t0,
                t1_ns: t1,
            };
            for &mu0 in mu_grid {
                for &mu1 in mu_grid {
                    let (rate0, rate1, errors) = sifted_bit_rates(pair, timing, mu0, mu1);
                    let total = rate0 + rate1;
                    if total <= 0.0 {
                        continue;
                    }
                    let candidate = EqualRateAttack {
                        timing,
                        mu_t0: mu0,
                        mu_t1: mu1,
                        qber: errors / total,
                        rate0,
                        rate1,
                    };
                    let imbalance = (rate0 - rate1).abs() / total;
                    if imbalance <= EQUAL_RATE_REL_TOL {
                        if best.as_ref().is_none_or(|b| candidate.qber < b.qber) {
                            best = Some(candidate);
                        }
                    } else if closest.as_ref().is_none_or(|(i, _)| imbalance < *i) {
                        closest = Some((imbalance, candidate));
                    }
                }
            }
        }
    }
    match (best, closest) {
        (Some(b), _) => Ok(b),
        (None, Some((_, c))) => Err(AttackError::NoFeasiblePoint { best: Box::new(c) }),
        (None, None) => Err(AttackError::NoDetections),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::{self, AttackEfficiencies};

    const TIMING: AttackTiming = AttackTiming {
        t0_ns: 0.0,
        t1_ns: 1.0,
    };

    /// Pair whose four attack efficiencies are distinct, so pattern tests
    /// cannot pass by accident: e00=0.17, e10=0.06, e01=0.09, e11=0.23.
    fn distinct_pair() -> DetectorPair {
        DetectorPair::noiseless(
            EfficiencyCurve::tabulated(vec![(0.0, 0.17), (1.0, 0.09)]).unwrap(),
            EfficiencyCurve::tabulated(vec![(0.0, 0.06), (1.0, 0.23)]).unwrap(),
        )
    }

    #[test]
    fn resend_rule() {
        let f = faked_state_for(Basis::Z, 0, TIMING);
        assert_eq!((f.basis, f.bit, f.timing_ns), (Basis::X, 1, 0.0));
        let f = faked_state_for(Basis::X, 1, TIMING);
        assert_eq!((f.basis, f.bit, f.timing_ns), (Basis::Z, 0, 1.0));
        let f = faked_state_for(Basis::Z, 1, TIMING);
        assert_eq!((f.basis, f.bit, f.timing_ns), (Basis::X, 0, 1.0));
        assert_eq!(f.brightness, 1.0);
    }

    #[test]
    fn click_probs_follow_the_outcome_table() {
        let pair = distinct_pair();
        // Conjugate basis: 50/50 split over both detectors at the resend time.
        let f = faked_state_for(Basis::Z, 0, TIMING);
        let c = bob_click_probs(&f, Basis::Z, &pair);
        assert!((c.p0 - 0.5 * 0.17).abs() < 1e-15);
        assert!((c.p1 - 0.5 * 0.06).abs() < 1e-15);
        // Same basis as the faked state: an eigenstate, all light to its bit.
        let c = bob_click_probs(&f, Basis::X, &pair);
        assert_eq!(c.p0, 0.0);
        assert!((c.p1 - 0.06).abs() < 1e-15);
        // Eve saw X1, resends Z0 at t1; in the Z basis only detector 0 can fire.
        let f = faked_state_for(Basis::X, 1, TIMING);
        let c = bob_click_probs(&f, Basis::Z, &pair);
        assert!((c.p0 - 0.09).abs() < 1e-15);
        assert_eq!(c.p1, 0.0);
    }

    /// The full 24-entry outcome pattern, for each of Alice's four states.
    #[test]
    fn outcome_table_pattern_all_alice_choices() {
        let pair = distinct_pair();
        let (e00, e10, e01, e11) = (0.17, 0.06, 0.09, 0.23);
        let result = enumerate_table(&pair, TIMING);

        // The resent state depends only on Eve's record; Alice's choice
        // enters through the row weights, not the outcome pattern.
        let expect = |eve: BasisBit, bob: Basis| -> (f64, f64) {
            // Eve resends at t_{her bit}; the efficiencies at that time:
            let (n0, n1) = if eve.bit == 0 { (e00, e10) } else { (e01, e11) };
            if bob == eve.basis.opposite() {
                // Bob sees the faked state's own basis: eigenstate of 1-bit.
                if eve.bit == 0 {
                    (0.0, n1)
                } else {
                    (n0, 0.0)
                }
            } else {
                (0.5 * n0, 0.5 * n1)
            }
        };

        let mut checked = 0;
        for row in &result.rows {
            if row.weight == 0.0 {
                continue; // same-basis wrong-bit records cannot occur
            }
            let (p0, p1) = expect(row.eve, row.bob_basis);
            assert!((row.p_click0 - p0).abs() < 1e-15, "row {row:?}");
            assert!((row.p_click1 - p1).abs() < 1e-15, "row {row:?}");
            assert!((row.p_lost - (1.0 - p0 - p1)).abs() < 1e-15);
            checked += 1;
        }
        // 4 alice states x 3 possible eve outcomes x 2 bob bases.
        assert_eq!(checked, 24);
    }

    #[test]
    fn rows_are_probability_distributions() {
        let result = enumerate_table(&distinct_pair(), TIMING);
        assert_eq!(result.rows.len(), 32);
        for row in &result.rows {
            assert!((row.p_click0 + row.p_click1 + row.p_lost - 1.0).abs() < 1e-12);
            assert!(row.p_click0 >= 0.0 && row.p_click1 >= 0.0 && row.p_lost >= 0.0);
        }
        let total_weight: f64 = result.rows.iter().map(|r| r.weight).sum();
        assert!((total_weight - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unit_efficiencies_arrive_always_and_err_half() {
        let r = enumerate_from_efficiencies(&AttackEfficiencies::new(1.0, 1.0, 1.0, 1.0));
        assert!((r.p_arrive - 1.0).abs() < 1e-15);
        assert!((r.qber - 0.5).abs() < 1e-15);
    }

    #[test]
    fn total_mismatch_copies_the_key() {
        let r = enumerate_from_efficiencies(&AttackEfficiencies::new(1.0, 0.0, 0.0, 1.0));
        assert_eq!(r.qber, 0.0);
        // Every kept bit has Eve's record equal to Alice's bit.
        assert_eq!(r.report.p_eve_given_alice[0], [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(r.report.p_eve_given_alice[1], [0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn aggregates_match_closed_forms() {
        let e = AttackEfficiencies::new(0.1, 0.01, 0.01, 0.1);
        let r = enumerate_from_efficiencies(&e);
        assert!((r.qber - 0.04 / 0.26).abs() < 1e-15);
        assert!((r.qber - analytics::qber_attack(&e).unwrap()).abs() < 1e-15);
        assert!((r.p_arrive - analytics::p_arrive(&e)).abs() < 1e-15);

        let report = analytics::info_report(&e).unwrap();
        assert!((r.report.h_alice_given_eve - report.h_alice_given_eve).abs() < 1e-12);
        assert!((r.report.info_alice_eve - report.info_alice_eve).abs() < 1e-12);
        assert!((r.report.info_alice_bob - report.info_alice_bob).abs() < 1e-12);
    }

    #[test]
    fn coherent_model_is_linear_at_small_brightness() {
        let pair = distinct_pair();
        let mu = 1e-6;
        for bob in Basis::BOTH {
            let f = FakedState {
                basis: Basis::X,
                bit: 1,
                timing_ns: 0.0,
                brightness: mu,
            };
            let c = bob_click_probs(&f, bob, &pair);
            let (s0, s1) = split_fractions(&f, bob);
            assert!((c.p0 / mu - s0 * 0.17).abs() < 1e-5);
            assert!((c.p1 / mu - s1 * 0.06).abs() < 1e-5);
        }
    }

    #[test]
    fn fock_one_matches_single_photon() {
        let pair = distinct_pair();
        let f = FakedState {
            basis: Basis::Z,
            bit: 1,
            timing_ns: 1.0,
            brightness: 1.0,
        };
        for bob in Basis::BOTH {
            let single = bob_click_probs_with_model(&f, bob, &pair, PhotonModel::SinglePhoton);
            let fock = bob_click_probs_with_model(&f, bob, &pair, PhotonModel::Fock);
            assert!((single.p0 - fock.p0).abs() < 1e-15);
            assert!((single.p1 - fock.p1).abs() < 1e-15);
        }
    }

    /// Mirror-symmetric pair: detector 1's curve is detector 0's reflected
    /// about t = 0.
    fn mirrored_pair() -> DetectorPair {
        DetectorPair::noiseless(
            EfficiencyCurve::gate(-0.25, 1.0, 0.1, 0.5).unwrap(),
            EfficiencyCurve::gate(0.25, 1.0, 0.1, 0.5).unwrap(),
        )
    }

    #[test]
    fn optimizer_exploits_mirror_symmetry() {
        let pair = mirrored_pair();
        let t_grid: Vec<f64> = (-6..=6).map(|k| k as f64 * 0.1).collect();
        let best = optimize_equal_rates(&pair, &t_grid, &[1.0]).unwrap();
        assert!(
            (best.timing.t0_ns + best.timing.t1_ns).abs() < 1e-12,
            "expected mirrored timings, got {:?}",
            best.timing
        );
        assert_eq!(best.rate0, best.rate1);
        // The achieved QBER is the symmetric-case value at the achieved ratio.
        let e = analytics::attack_efficiencies(&pair, best.timing);
        let eta = e.eta1_at_t0 / e.eta0_at_t0;
        let expected = analytics::symmetric_curve_point(eta).qber;
        assert!((best.qber - expected).abs() < 1e-12);
    }

    #[test]
    fn optimizer_finds_zero_qber_for_total_mismatch() {
        let pair = DetectorPair::noiseless(
            EfficiencyCurve::tabulated(vec![(-2.0, 0.9), (-1.0, 0.9)]).unwrap(),
            EfficiencyCurve::tabulated(vec![(1.0, 0.9), (2.0, 0.9)]).unwrap(),
        );
        let best = optimize_equal_rates(&pair, &[-1.5, 1.5], &[1.0]).unwrap();
        assert_eq!(best.qber, 0.0);
        assert_eq!(best.rate0, best.rate1);
    }

    #[test]
    fn optimizer_brightens_the_weak_detector_side() {
        // Detector 1 peaks at twice detector 0's efficiency, so t0 resends
        // (which produce 0 clicks) need extra brightness.
        let pair = DetectorPair::noiseless(
            EfficiencyCurve::gate(-0.25, 1.0, 0.1, 0.25).unwrap(),
            EfficiencyCurve::gate(0.25, 1.0, 0.1, 0.5).unwrap(),
        );
        let t_grid: Vec<f64> = (-6..=6).map(|k| k as f64 * 0.1).collect();
        let mu_grid = [0.5, 1.0, 1.5, 2.0, 3.0];
        let best = optimize_equal_rates(&pair, &t_grid, &mu_grid).unwrap();
        assert!(
            best.mu_t0 > best.mu_t1,
            "expected brighter t0 pulses: {best:?}"
        );
    }

    #[test]
    fn optimizer_reports_infeasibility() {
        // Detector 1 is dead everywhere: rates can never balance.
        let pair = DetectorPair::noiseless(
            EfficiencyCurve::gate(0.0, 2.0, 0.1, 0.5).unwrap(),
            EfficiencyCurve::tabulated(vec![(-10.0, 0.0), (10.0, 0.0)]).unwrap(),
        );
        match optimize_equal_rates(&pair, &[-0.5, 0.0, 0.5], &[1.0]) {
            Err(AttackError::NoFeasiblePoint { best }) => {
                assert!(best.rate1 == 0.0 && best.rate0 > 0.0);
            }
            other => panic!("expected NoFeasiblePoint, got {other:?}"),
        }
        assert!(matches!(
            optimize_equal_rates(&pair, &[], &[1.0]),
            Err(AttackError::EmptyGrid)
        ));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn quads() -> impl Strategy<Value = AttackEfficiencies> {
            (1e-6f64..=1.0, 1e-6f64..=1.0, 1e-6f64..=1.0, 1e-6f64..=1.0)
                .prop_map(|(a, b, c, d)| AttackEfficiencies::new(a, b, c, d))
        }

        proptest! {
            #[test]
            fn enumeration_agrees_with_closed_forms(e in quads()) {
                let enumerated = enumerate_from_efficiencies(&e);
                let report = analytics::info_report(&e).unwrap();
                prop_assert!((enumerated.p_arrive - analytics::p_arrive(&e)).abs() < 1e-12);
                prop_assert!((enumerated.qber - report.qber).abs() < 1e-12);
                prop_assert!((enumerated.report.h_alice - report.h_alice).abs() < 1e-12);
                prop_assert!(
                    (enumerated.report.h_alice_given_eve - report.h_alice_given_eve).abs() < 1e-12
                );
                for a in 0..2 {
                    for k in 0..4 {
                        prop_assert!(
                            (enumerated.report.p_eve_given_alice[a][k]
                                - report.p_eve_given_alice[a][k]).abs() < 1e-12
                        );
                    }
                    for b in 0..2 {
                        prop_assert!(
                            (enumerated.report.p_bob_given_alice[a][b]
                                - report.p_bob_given_alice[a][b]).abs() < 1e-12
                        );
                    }
                }
            }

            #[test]
            fn single_photon_click_probs_sum_below_one(
                e in quads(),
                bit in 0u8..2,
                same_basis in proptest::bool::ANY,
            ) {
                let pair = DetectorPair::noiseless(
                    EfficiencyCurve::tabulated(vec![(0.0, e.eta0_at_t0), (1.0, e.eta0_at_t1)]).unwrap(),
                    EfficiencyCurve::tabulated(vec![(0.0, e.eta1_at_t0), (1.0, e.eta1_at_t1)]).unwrap(),
                );
                let f = FakedState { basis: Basis::Z, bit, timing_ns: 0.0, brightness: 1.0 };
                let bob = if same_basis { Basis::Z } else { Basis::X };
                let c = bob_click_probs(&f, bob, &pair);
                prop_assert!(c.total() <= 1.0 + 1e-15);
            }
        }
    }
}
