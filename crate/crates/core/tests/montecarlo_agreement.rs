//! Statistical agreement between the pulse simulator and the closed-form
//! attack figures: across a spread of detector geometries and timing
//! choices, the empirical QBER and arrival probability must sit within four
//! binomial standard errors of the analytic values.

use qkd_mismatch::analytics::{self, AttackTiming};
use qkd_mismatch::curves::{DetectorPair, EfficiencyCurve};
use qkd_mismatch::montecarlo::{self, AttackPlan, DoubleClickPolicy, SimConfig, Source};

struct Scenario {
    name: &'static str,
    pair: DetectorPair,
    timing: AttackTiming,
}

fn gate(center: f64, plateau: f64, edge: f64, peak: f64) -> EfficiencyCurve {
    EfficiencyCurve::gate(center, plateau, edge, peak).unwrap()
}

fn table(samples: &[(f64, f64)]) -> EfficiencyCurve {
    EfficiencyCurve::tabulated(samples.to_vec()).unwrap()
}

fn scenarios() -> Vec<Scenario> {
    let shifted = |shift: f64, t: f64, name: &'static str| Scenario {
        name,
        pair: DetectorPair::noiseless(
            gate(-shift / 2.0, 1.0, 0.1, 0.5),
            gate(shift / 2.0, 1.0, 0.1, 0.5),
        ),
        timing: AttackTiming {
            t0_ns: -t,
            t1_ns: t,
        },
    };
    vec![
        shifted(0.5, 0.6, "mirrored gates, deep edges"),
        shifted(0.5, 0.4, "mirrored gates, shallow edges"),
        shifted(0.3, 0.55, "mild shift"),
        shifted(0.8, 0.75, "strong shift"),
        Scenario {
            name: "asymmetric peaks",
            pair: DetectorPair::noiseless(gate(-0.25, 1.0, 0.08, 0.3), gate(0.25, 1.2, 0.12, 0.5)),
            timing: AttackTiming {
                t0_ns: -0.55,
                t1_ns: 0.6,
            },
        },
        Scenario {
            name: "tabulated ratio third",
            pair: DetectorPair::noiseless(
                table(&[(-1.0, 0.9), (1.0, 0.3)]),
                table(&[(-1.0, 0.3), (1.0, 0.9)]),
            ),
            timing: AttackTiming {
                t0_ns: -1.0,
                t1_ns: 1.0,
            },
        },
        Scenario {
            name: "tabulated uneven",
            pair: DetectorPair::noiseless(
                table(&[(-1.0, 0.7), (0.0, 0.5), (1.0, 0.1)]),
                table(&[(-1.0, 0.2), (0.0, 0.5), (1.0, 0.6)]),
            ),
            timing: AttackTiming {
                t0_ns: -0.5,
                t1_ns: 0.75,
            },
        },
        Scenario {
            name: "low efficiency",
            pair: DetectorPair::noiseless(gate(-0.2, 0.8, 0.1, 0.08), gate(0.2, 0.8, 0.1, 0.08)),
            timing: AttackTiming {
                t0_ns: -0.5,
                t1_ns: 0.5,
            },
        },
        Scenario {
            name: "badly chosen timings",
            pair: DetectorPair::noiseless(gate(-0.25, 1.0, 0.1, 0.5), gate(0.25, 1.0, 0.1, 0.5)),
            // Timings favoring the wrong detectors: Eve hurts herself, the
            // simulator must still agree with the formulas.
            timing: AttackTiming {
                t0_ns: 0.6,
                t1_ns: -0.6,
            },
        },
        Scenario {
            name: "total mismatch",
            pair: DetectorPair::noiseless(
                table(&[(-2.0, 0.9), (-1.0, 0.9)]),
                table(&[(1.0, 0.9), (2.0, 0.9)]),
            ),
            timing: AttackTiming {
                t0_ns: -1.5,
                t1_ns: 1.5,
            },
        },
    ]
}

#[test]
fn attacked_runs_agree_with_closed_forms_within_four_sigma() {
    for (index, scenario) in scenarios().into_iter().enumerate() {
        let e = analytics::attack_efficiencies(&scenario.pair, scenario.timing);
        let expected_qber = analytics::qber_attack(&e).unwrap();
        let expected_arrive = analytics::p_arrive(&e);

        let config = SimConfig {
            n_pulses: 1_000_000,
            seed: 0xBEE5 + index as u64,
            pair: scenario.pair,
            channel_transmittance: 1.0,
            source: Source::SinglePhoton,
            attack: Some(AttackPlan::single_photon(scenario.timing)),
            nominal_arrival_time_ns: 0.0,
            double_click_policy: DoubleClickPolicy::RandomAssign,
        };
        let stats = montecarlo::run(&config).unwrap();

        let arrive = stats.sifted as f64 / stats.basis_matches as f64;
        let sigma_arrive =
            (expected_arrive * (1.0 - expected_arrive) / stats.basis_matches as f64).sqrt();
        assert!(
            (arrive - expected_arrive).abs() <= 4.0 * sigma_arrive,
            "{}: arrival {arrive} vs {expected_arrive} (sigma {sigma_arrive})",
            scenario.name
        );

        let sigma_qber = (expected_qber * (1.0 - expected_qber) / stats.kept as f64).sqrt();
        assert!(
            (stats.qber - expected_qber).abs() <= 4.0 * sigma_qber,
            "{}: qber {} vs {expected_qber} (sigma {sigma_qber}, kept {})",
            scenario.name,
            stats.qber,
            stats.kept
        );

        // Markov ordering, empirically: Eve's record can only be better
        // than Bob's.
        let eve = stats.eve_alice_agreement.unwrap();
        assert!(
            eve + 1e-12 >= 1.0 - stats.qber,
            "{}: eve agreement {eve} below bob agreement {}",
            scenario.name,
            1.0 - stats.qber
        );
    }
}

#[test]
fn honest_runs_detect_at_the_curve_rate() {
    // Without the attack, the sifted detection rate is the channel times the
    // nominal-time efficiency of the correct detector, averaged over bits.
    let pair = DetectorPair::noiseless(gate(-0.25, 1.0, 0.1, 0.5), gate(0.25, 1.0, 0.1, 0.5));
    let eta0 = pair.curve0.eval(0.0);
    let eta1 = pair.curve1.eval(0.0);
    for transmittance in [1.0, 0.25] {
        let config = SimConfig {
            n_pulses: 1_000_000,
            seed: 99,
            pair: pair.clone(),
            channel_transmittance: transmittance,
            source: Source::SinglePhoton,
            attack: None,
            nominal_arrival_time_ns: 0.0,
            double_click_policy: DoubleClickPolicy::RandomAssign,
        };
        let stats = montecarlo::run(&config).unwrap();
        let expected = transmittance * 0.5 * (eta0 + eta1);
        let rate = stats.sifted as f64 / stats.basis_matches as f64;
        let sigma = (expected * (1.0 - expected) / stats.basis_matches as f64).sqrt();
        assert!(
            (rate - expected).abs() <= 4.0 * sigma,
            "transmittance {transmittance}: rate {rate} vs {expected}"
        );
        assert_eq!(stats.errors, 0);
    }
}
