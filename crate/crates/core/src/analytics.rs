//! Closed-form efficiency figures for the intercept-resend faked-states
//! attack.
//!
//! Once Eve fixes two resend timings, everything about the attack is
//! determined by four numbers: each detector's efficiency at each timing
//! ([`AttackEfficiencies`]). This module evaluates the arrival probability,
//! the QBER, and the Alice-Eve / Alice-Bob mutual informations as functions
//! of those four numbers, plus the one-parameter symmetric special case in
//! which both informations depend only on the normalized efficiency of the
//! blinded detector.
//!
//! All formulas are conditioned on sifted events (Alice's and Bob's bases
//! agree). Entropies are in bits.

use thiserror::Error;

use crate::curves::DetectorPair;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AnalyticsError {
    #[error("no arrivals: all four attack efficiencies are zero")]
    NoArrivals,
}

/// Eve's two resend timings: `t0` suppresses detector 1 (small
/// `eta1(t0)/eta0(t0)`), `t1` suppresses detector 0. Nothing stops a caller
/// from choosing badly; the figures just come out poor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackTiming {
    pub t0_ns: f64,
    pub t1_ns: f64,
}

/// The four detector efficiencies that fully parameterize the attack.
///
/// Field names are `eta<detector>_at_<timing>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackEfficiencies {
    pub eta0_at_t0: f64,
    pub eta1_at_t0: f64,
    pub eta0_at_t1: f64,
    pub eta1_at_t1: f64,
}

impl AttackEfficiencies {
    pub fn new(eta0_at_t0: f64, eta1_at_t0: f64, eta0_at_t1: f64, eta1_at_t1: f64) -> Self {
        Self {
            eta0_at_t0,
            eta1_at_t0,
            eta0_at_t1,
            eta1_at_t1,
        }
    }

    /// The symmetric special case: unit efficiency for the favored detector
    /// at each timing, `eta` for the suppressed one.
    pub fn symmetric(eta: f64) -> Self {
        Self::new(1.0, eta, eta, 1.0)
    }

    /// Arrival mass (times 4) for sifted rounds in which Alice sent bit 0.
    fn arrival_mass_bit0(&self) -> f64 {
        self.eta0_at_t0 + self.eta0_at_t1 + 2.0 * self.eta1_at_t0
    }

    /// Arrival mass (times 4) for sifted rounds in which Alice sent bit 1.
    fn arrival_mass_bit1(&self) -> f64 {
        self.eta1_at_t1 + self.eta1_at_t0 + 2.0 * self.eta0_at_t1
    }
}

/// Evaluate the four attack efficiencies from a detector pair and a timing
/// choice.
pub fn attack_efficiencies(pair: &DetectorPair, timing: AttackTiming) -> AttackEfficiencies {
    AttackEfficiencies {
        eta0_at_t0: pair.curve0.eval(timing.t0_ns),
        eta1_at_t0: pair.curve1.eval(timing.t0_ns),
        eta0_at_t1: pair.curve0.eval(timing.t1_ns),
        eta1_at_t1: pair.curve1.eval(timing.t1_ns),
    }
}

/// Probability that the pulse arrives at Bob in a sifted round, given that
/// Alice sent bit 0 (either basis; the attack treats the bases
/// symmetrically).
pub fn p_arrive_given_z0(e: &AttackEfficiencies) -> f64 {
    e.arrival_mass_bit0() / 4.0
}

/// Arrival probability in sifted rounds, averaged over Alice's four
/// state choices.
pub fn p_arrive(e: &AttackEfficiencies) -> f64 {
    (e.eta0_at_t0 + 3.0 * e.eta0_at_t1 + 3.0 * e.eta1_at_t0 + e.eta1_at_t1) / 8.0
}

/// QBER of the attack: probability that a sifted, detected bit disagrees
/// with Alice's, conditioned on detection.
pub fn qber_attack(e: &AttackEfficiencies) -> Result<f64, AnalyticsError> {
    let total = e.arrival_mass_bit0() + e.arrival_mass_bit1();
    if total <= 0.0 {
        return Err(AnalyticsError::NoArrivals);
    }
    Ok((2.0 * e.eta0_at_t1 + 2.0 * e.eta1_at_t0) / total)
}

/// Eve's measurement record after basis reveal, for the information
/// bookkeeping: her basis choice and the bit she detected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EveOutcome {
    Z0,
    Z1,
    X0,
    X1,
}

impl EveOutcome {
    pub const ALL: [EveOutcome; 4] = [
        EveOutcome::Z0,
        EveOutcome::Z1,
        EveOutcome::X0,
        EveOutcome::X1,
    ];

    pub fn index(self) -> usize {
        match self {
            EveOutcome::Z0 => 0,
            EveOutcome::Z1 => 1,
            EveOutcome::X0 => 2,
            EveOutcome::X1 => 3,
        }
    }
}

/// Probability tables and information figures of the attack, conditioned on
/// sifted, detected rounds with Alice and Bob in the same basis.
///
/// Conditional tables are indexed `[conditioning value][outcome]`; Eve's
/// outcomes are ordered per [`EveOutcome::index`]. A conditional row whose
/// conditioning event has zero probability is all zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoReport {
    pub p_arrive: f64,
    pub qber: f64,
    pub h_alice: f64,
    pub h_alice_given_eve: f64,
    pub info_alice_eve: f64,
    pub info_alice_bob: f64,
    pub p_alice: [f64; 2],
    pub p_eve_given_alice: [[f64; 4]; 2],
    pub p_eve: [f64; 4],
    pub p_alice_given_eve: [[f64; 2]; 4],
    pub p_bob_given_alice: [[f64; 2]; 2],
}

/// Full information bookkeeping for the attack.
///
/// Builds Alice's marginal from the per-bit arrival masses, Eve's
/// conditionals from the outcome table (the bit-1 row follows from the bit-0
/// row by exchanging detector roles and flipping Eve's outcomes), applies
/// Bayes' rule for `P(A|E)`, and evaluates both mutual informations. The
/// conditional entropy `H(A|E)` must equal the QBER; the oracle-equivalence
/// tests check that identity to 1e-12.
pub fn info_report(e: &AttackEfficiencies) -> Result<InfoReport, AnalyticsError> {
    let arr0 = e.arrival_mass_bit0();
    let arr1 = e.arrival_mass_bit1();
    let total = arr0 + arr1;
    if total <= 0.0 {
        return Err(AnalyticsError::NoArrivals);
    }

    let p_alice = [arr0 / total, arr1 / total];

    // Eve outcome masses given Alice's bit, normalized by the arrival mass.
    // Given bit 0: same-basis detection keeps her record equal to Alice's
    // bit; wrong-basis records X0/X1 arrive weighted by the efficiency of
    // the detector their resend leaves open.
    let p_eve_given_alice = [
        row_or_zero(
            arr0,
            [e.eta0_at_t0 + e.eta1_at_t0, 0.0, e.eta1_at_t0, e.eta0_at_t1],
        ),
        row_or_zero(
            arr1,
            [0.0, e.eta1_at_t1 + e.eta0_at_t1, e.eta1_at_t0, e.eta0_at_t1],
        ),
    ];

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

    // Bob's conditional bit distribution among detected sifted rounds.
    let p_bob_given_alice = [
        row_or_zero(arr0, [e.eta0_at_t0 + e.eta0_at_t1, 2.0 * e.eta1_at_t0]),
        row_or_zero(arr1, [2.0 * e.eta0_at_t1, e.eta1_at_t1 + e.eta1_at_t0]),
    ];
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

    let qber = qber_attack(e)?;
    Ok(InfoReport {
        p_arrive: p_arrive(e),
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
    })
}

fn row_or_zero<const N: usize>(mass: f64, numerators: [f64; N]) -> [f64; N] {
    if mass > 0.0 {
        numerators.map(|x| x / mass)
    } else {
        [0.0; N]
    }
}

/// One point of the symmetric-case trade-off curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetricPoint {
    pub eta: f64,
    pub qber: f64,
    pub info_alice_bob: f64,
    pub info_alice_eve: f64,
}

/// The symmetric special case, where every figure depends only on the
/// normalized efficiency `eta` of the blinded detector:
/// `qber = 2*eta / (1 + 3*eta)`, `I(A:B) = 1 - h(qber)`,
/// `I(A:E) = 1 - qber`.
pub fn symmetric_curve_point(eta: f64) -> SymmetricPoint {
    debug_assert!((0.0..=1.0).contains(&eta), "eta {eta} outside [0, 1]");
    let qber = 2.0 * eta / (1.0 + 3.0 * eta);
    SymmetricPoint {
        eta,
        qber,
        info_alice_bob: 1.0 - binary_entropy(qber),
        info_alice_eve: 1.0 - qber,
    }
}

/// Binary Shannon entropy in bits, with `0*log(0) = 0`.
pub fn binary_entropy(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
}

/// Shannon entropy in bits of a probability vector, skipping zero entries.
pub fn shannon_entropy_bits(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.log2()).sum()
}
