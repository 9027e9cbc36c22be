//! TOML configuration for the `simulate` command.
//!
//! Every optional key has a documented default (see the README); unknown
//! keys are hard errors, because a silently ignored typo in a security
//! study invalidates its conclusions. Exactly one curve source must be
//! given: either `detectors.curve_file` (both detectors from one CSV file)
//! or both inline parametric gates `detectors.curve0` / `detectors.curve1`.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use qkd_mismatch::analytics::AttackTiming;
use qkd_mismatch::curves::{read_curve_pair_file, DetectorPair, EfficiencyCurve};
use qkd_mismatch::montecarlo::{AttackPlan, DoubleClickPolicy, SimConfig, Source};

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimFileConfig {
    #[serde(default = "default_n_pulses")]
    n_pulses: u64,
    #[serde(default = "default_seed")]
    seed: u64,
    #[serde(default = "default_transmittance")]
    channel_transmittance: f64,
    #[serde(default)]
    nominal_arrival_time_ns: f64,
    #[serde(default)]
    source: SourceConfig,
    #[serde(default)]
    double_click_policy: PolicyConfig,
    detectors: Option<DetectorsConfig>,
    attack: Option<AttackConfig>,
}

fn default_n_pulses() -> u64 {
    1_000_000
}

fn default_seed() -> u64 {
    1
}

fn default_transmittance() -> f64 {
    1.0
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind")]
enum SourceConfig {
    #[default]
    #[serde(rename = "single-photon")]
    SinglePhoton,
    #[serde(rename = "coherent")]
    Coherent { mean_photons: f64 },
}

#[derive(Debug, Default, Deserialize)]
enum PolicyConfig {
    #[default]
    #[serde(rename = "random-assign")]
    RandomAssign,
    #[serde(rename = "discard")]
    Discard,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DetectorsConfig {
    #[serde(default)]
    dark0: f64,
    #[serde(default)]
    dark1: f64,
    curve_file: Option<PathBuf>,
    curve0: Option<GateConfig>,
    curve1: Option<GateConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GateConfig {
    center_ns: f64,
    plateau_width_ns: f64,
    edge_scale_ns: f64,
    peak_efficiency: f64,
}

impl GateConfig {
    fn build(&self, field: &str) -> Result<EfficiencyCurve, CliError> {
        EfficiencyCurve::gate(
            self.center_ns,
            self.plateau_width_ns,
            self.edge_scale_ns,
            self.peak_efficiency,
        )
        .map_err(|e| CliError::Usage(format!("{field}: {e}")))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AttackConfig {
    t0_ns: f64,
    t1_ns: f64,
    #[serde(default = "default_mu")]
    mu_t0: f64,
    #[serde(default = "default_mu")]
    mu_t1: f64,
}

fn default_mu() -> f64 {
    1.0
}

/// Parse a simulation config file and resolve it into a [`SimConfig`].
/// Curve file paths are taken relative to the config file's directory.
pub fn load_sim_config(path: &Path) -> Result<SimConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let parsed: SimFileConfig =
        toml::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;

    let detectors = parsed
        .detectors
        .ok_or_else(|| CliError::Usage("detectors: section is required".into()))?;

    let pair = match (&detectors.curve_file, &detectors.curve0, &detectors.curve1) {
        (Some(file), None, None) => {
            let resolved = path
                .parent()
                .map_or_else(|| file.clone(), |dir| dir.join(file));
            let (c0, c1) = read_curve_pair_file(&resolved)
                .map_err(|e| CliError::Data(format!("{}: {e}", resolved.display())))?;
            DetectorPair::new(c0, c1, detectors.dark0, detectors.dark1)
        }
        (None, Some(g0), Some(g1)) => DetectorPair::new(
            g0.build("detectors.curve0")?,
            g1.build("detectors.curve1")?,
            detectors.dark0,
            detectors.dark1,
        ),
        _ => {
            return Err(CliError::Usage(
                "detectors: give exactly one curve source: either curve_file, \
                 or both curve0 and curve1"
                    .into(),
            ))
        }
    }
    .map_err(|e| CliError::Usage(format!("detectors: {e}")))?;

    Ok(SimConfig {
        n_pulses: parsed.n_pulses,
        seed: parsed.seed,
        pair,
        channel_transmittance: parsed.channel_transmittance,
        source: match parsed.source {
            SourceConfig::SinglePhoton => Source::SinglePhoton,
            SourceConfig::Coherent { mean_photons } => Source::Coherent { mean_photons },
        },
        attack: parsed.attack.map(|a| AttackPlan {
            timing: AttackTiming {
                t0_ns: a.t0_ns,
                t1_ns: a.t1_ns,
            },
            mu_t0: a.mu_t0,
            mu_t1: a.mu_t1,
        }),
        nominal_arrival_time_ns: parsed.nominal_arrival_time_ns,
        double_click_policy: match parsed.double_click_policy {
            PolicyConfig::RandomAssign => DoubleClickPolicy::RandomAssign,
            PolicyConfig::Discard => DoubleClickPolicy::Discard,
        },
    })
}
