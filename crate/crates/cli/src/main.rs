//! Command-line front end for the detector-mismatch attack toolkit.
//!
//! Subcommands: `sweep-eta` (symmetric-attack trade-off curve),
//! `security-region` (region map over an eta/QBER grid), `audit`
//! (characterize a measured curve pair), `simulate` (pulse-level run from a
//! TOML config), and `qnd` (nondemolition timing measurement demo). Every
//! command takes `--out` (default stdout) and `--format {csv, summary}`.
//!
//! Exit codes: 0 success, 2 usage or validation error, 3 data or parse
//! error, 4 infeasible computation.

mod config;
mod report;

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use qkd_mismatch::analytics::symmetric_curve_point;
use qkd_mismatch::curves::{
    mismatch_eta_with_step, read_curve_pair_file, BlindedDetector, CurveError, DetectorPair,
    DEFAULT_RATIO_FLOOR, DEFAULT_SCAN_STEP_NS,
};
use qkd_mismatch::montecarlo::{self, GateOutcome};
use qkd_mismatch::qnd::{self, TimeGrid};
use qkd_mismatch::security;

use report::{sig9, sig9_opt, Format, Report, Table};

#[derive(Debug)]
enum CliError {
    /// Bad arguments or configuration values; exit 2.
    Usage(String),
    /// Unreadable or unparsable data; exit 3.
    Data(String),
    /// Well-posed request with no feasible answer; exit 4.
    Infeasible(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Infeasible(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Infeasible(m) => f.write_str(m),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "qkd-mismatch",
    version,
    about = "Detector-efficiency-mismatch attack analytics for BB84"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct OutputArgs {
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Emit the symmetric-attack trade-off curve over a range of normalized
    /// efficiencies: QBER, I(A:B), and I(A:E) per eta.
    SweepEta {
        /// Lower end of the eta range.
        #[arg(long, default_value_t = 0.0)]
        from: f64,
        /// Upper end of the eta range.
        #[arg(long, default_value_t = 1.0)]
        to: f64,
        /// Number of grid points (inclusive of both ends).
        #[arg(long, default_value_t = 101)]
        steps: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Classify a grid of (eta, measured QBER) operating points into
    /// Secure / NotProven / Insecure.
    SecurityRegion {
        #[arg(long, default_value_t = 0.0)]
        eta_from: f64,
        #[arg(long, default_value_t = 1.0)]
        eta_to: f64,
        #[arg(long, default_value_t = 51)]
        eta_steps: usize,
        #[arg(long, default_value_t = 0.0)]
        qber_from: f64,
        #[arg(long, default_value_t = 0.5)]
        qber_to: f64,
        #[arg(long, default_value_t = 51)]
        qber_steps: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Characterize a measured detector-curve file: worst-case mismatch,
    /// QBER budgets, and optionally the corrected error rate for a measured
    /// QBER.
    Audit {
        /// Curve CSV file (processed `t_ns,eta0,eta1` or raw counting form).
        #[arg(long)]
        curves: PathBuf,
        /// Relative efficiency floor for the mismatch scan.
        #[arg(long, default_value_t = DEFAULT_RATIO_FLOOR)]
        floor: f64,
        /// Scan step in ns.
        #[arg(long, default_value_t = DEFAULT_SCAN_STEP_NS)]
        step: f64,
        /// Estimated dark-count contribution to the measured QBER; it is
        /// subtracted before classification (dark counts are not under an
        /// eavesdropper's control).
        #[arg(long, default_value_t = 0.0)]
        dark_qber: f64,
        /// Measured QBER to audit against the bound.
        #[arg(long)]
        measured_qber: Option<f64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run the pulse-level simulator from a TOML config file.
    Simulate {
        /// Config file path.
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Demonstrate the nondemolition timing measurement on a time-bin
    /// qubit: per-interval probabilities and the recovered phase.
    Qnd {
        /// Encoded relative phase in degrees (protocol values: 0, 90, 180, 270).
        #[arg(long, default_value_t = 0.0)]
        phase: f64,
        /// Timing resolution in ns; must be a multiple of the bin width.
        #[arg(long, default_value_t = 0.05)]
        resolution: f64,
        /// Number of grid bins.
        #[arg(long, default_value_t = 1280)]
        bins: usize,
        /// Grid bin width in ns.
        #[arg(long, default_value_t = 0.0025)]
        dt: f64,
        /// Pulse separation in ns; must be a multiple of the bin width.
        #[arg(long, default_value_t = 2.0)]
        tau: f64,
        /// Grid start time in ns.
        #[arg(long, default_value_t = 0.0)]
        t_start: f64,
        /// Center of the early pulse in ns.
        #[arg(long, default_value_t = 0.5)]
        t0: f64,
        /// Pulse bandwidth in 1/ns (pulse duration is its inverse).
        #[arg(long, default_value_t = 20.0)]
        bandwidth: f64,
        /// Carrier frequency in rad/ns.
        #[arg(long, default_value_t = 1.2e6)]
        omega0: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = dispatch(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn open_output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, CliError> {
    match path {
        Some(p) => {
            let file =
                File::create(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
            Ok(Box::new(BufWriter::new(file)))
        }
        None => Ok(Box::new(std::io::stdout().lock())),
    }
}

fn write_failed(e: std::io::Error) -> CliError {
    CliError::Data(format!("writing output: {e}"))
}

fn grid_points(from: f64, to: f64, steps: usize) -> Vec<f64> {
    if steps == 1 {
        return vec![from];
    }
    (0..steps)
        .map(|i| from + i as f64 * (to - from) / (steps - 1) as f64)
        .collect()
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::SweepEta {
            from,
            to,
            steps,
            output,
        } => cmd_sweep_eta(from, to, steps, &output),
        Command::SecurityRegion {
            eta_from,
            eta_to,
            eta_steps,
            qber_from,
            qber_to,
            qber_steps,
            output,
        } => cmd_security_region(
            (eta_from, eta_to, eta_steps),
            (qber_from, qber_to, qber_steps),
            &output,
        ),
        Command::Audit {
            curves,
            floor,
            step,
            dark_qber,
            measured_qber,
            output,
        } => cmd_audit(&curves, floor, step, dark_qber, measured_qber, &output),
        Command::Simulate { config, output } => cmd_simulate(&config, &output),
        Command::Qnd {
            phase,
            resolution,
            bins,
            dt,
            tau,
            t_start,
            t0,
            bandwidth,
            omega0,
            output,
        } => cmd_qnd(
            phase, resolution, bins, dt, tau, t_start, t0, bandwidth, omega0, &output,
        ),
    }
}

fn cmd_sweep_eta(from: f64, to: f64, steps: usize, output: &OutputArgs) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&from) || !(0.0..=1.0).contains(&to) || from >= to {
        return Err(CliError::Usage(format!(
            "eta range [{from}, {to}] must satisfy 0 <= from < to <= 1"
        )));
    }
    if steps < 2 {
        return Err(CliError::Usage(format!("steps {steps} must be at least 2")));
    }
    let mut table = Table::new(vec!["eta", "qber", "i_ab", "i_ae"]);
    for eta in grid_points(from, to, steps) {
        let p = symmetric_curve_point(eta);
        table.push(vec![
            sig9(eta),
            sig9(p.qber),
            sig9(p.info_alice_bob),
            sig9(p.info_alice_eve),
        ]);
    }
    let mut w = open_output(&output.out)?;
    table.write(output.format, &mut w).map_err(write_failed)
}

fn cmd_security_region(
    (eta_from, eta_to, eta_steps): (f64, f64, usize),
    (qber_from, qber_to, qber_steps): (f64, f64, usize),
    output: &OutputArgs,
) -> Result<(), CliError> {
    for (name, lo, hi) in [("eta", eta_from, eta_to), ("qber", qber_from, qber_to)] {
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
            return Err(CliError::Usage(format!(
                "{name} range [{lo}, {hi}] must lie in [0, 1] with from <= to"
            )));
        }
    }
    if eta_steps == 0 || qber_steps == 0 {
        return Err(CliError::Usage("grid steps must be positive".into()));
    }
    let mut table = Table::new(vec!["eta", "qber", "region", "delta", "rate"]);
    for eta in grid_points(eta_from, eta_to, eta_steps) {
        for qber in grid_points(qber_from, qber_to, qber_steps) {
            let a = security::classify(eta, qber).map_err(|e| CliError::Usage(e.to_string()))?;
            table.push(vec![
                sig9(eta),
                sig9(qber),
                a.region.label().into(),
                sig9_opt(a.delta),
                sig9_opt(a.rate),
            ]);
        }
    }
    let mut w = open_output(&output.out)?;
    table.write(output.format, &mut w).map_err(write_failed)
}

fn cmd_audit(
    curves: &Path,
    floor: f64,
    step: f64,
    dark_qber: f64,
    measured_qber: Option<f64>,
    output: &OutputArgs,
) -> Result<(), CliError> {
    if !(dark_qber.is_finite() && (0.0..1.0).contains(&dark_qber)) {
        return Err(CliError::Usage(format!(
            "dark_qber {dark_qber} outside [0, 1)"
        )));
    }
    if let Some(q) = measured_qber {
        if !(q.is_finite() && (0.0..1.0).contains(&q)) {
            return Err(CliError::Usage(format!("measured_qber {q} outside [0, 1)")));
        }
    }
    let (c0, c1) = read_curve_pair_file(curves)
        .map_err(|e| CliError::Data(format!("{}: {e}", curves.display())))?;
    let pair = DetectorPair::noiseless(c0, c1);
    let domain = pair.support();
    let mismatch = mismatch_eta_with_step(&pair, domain, floor, step).map_err(|e| match e {
        CurveError::BelowFloorEverywhere => CliError::Infeasible(e.to_string()),
        other => CliError::Usage(other.to_string()),
    })?;

    let mut report = Report::new();
    report.push("eta", sig9(mismatch.eta));
    report.push("t_min_ns", sig9(mismatch.t_min_ns));
    report.push(
        "blinded_detector",
        match mismatch.blinded {
            BlindedDetector::Zero => "0",
            BlindedDetector::One => "1",
        },
    );
    report.push("floor_threshold", sig9(mismatch.threshold));
    report.push(
        "total_mismatch",
        if mismatch.eta == 0.0 { "true" } else { "false" },
    );
    report.push(
        "qber_budget_exact",
        sig9(security::exact_qber_budget(mismatch.eta)),
    );
    report.push(
        "qber_budget_approx_0.11eta",
        sig9(security::approx_qber_budget(mismatch.eta)),
    );
    report.push("pa_rate_zero_delta", sig9(security::pa_rate_zero()));

    if let Some(q) = measured_qber {
        let net = (q - dark_qber).max(0.0);
        let assessment =
            security::classify(mismatch.eta, net).map_err(|e| CliError::Usage(e.to_string()))?;
        report.push("measured_qber", sig9(q));
        report.push("dark_qber", sig9(dark_qber));
        report.push("net_qber", sig9(net));
        report.push("actual_delta", sig9_opt(assessment.delta));
        report.push("pa_rate", sig9_opt(assessment.rate));
        report.push("region", assessment.region.label());
    }

    let mut w = open_output(&output.out)?;
    report.write(output.format, &mut w).map_err(write_failed)
}

fn cmd_simulate(config_path: &Path, output: &OutputArgs) -> Result<(), CliError> {
    let config = config::load_sim_config(config_path)?;
    let stats = montecarlo::run(&config).map_err(|e| CliError::Usage(e.to_string()))?;

    let mut report = Report::new();
    report.push("sent", stats.sent.to_string());
    report.push("basis_matches", stats.basis_matches.to_string());
    report.push("sifted", stats.sifted.to_string());
    report.push("kept", stats.kept.to_string());
    report.push("errors", stats.errors.to_string());
    report.push("qber", sig9(stats.qber));
    report.push("qber_std_err", sig9(stats.qber_std_err));
    report.push("clicks0", stats.clicks0.to_string());
    report.push("clicks1", stats.clicks1.to_string());
    report.push("click_rate0", sig9(stats.click_rate0));
    report.push("click_rate1", sig9(stats.click_rate1));
    report.push("double_clicks", stats.double_clicks.to_string());
    for (b, basis) in ["z", "x"].iter().enumerate() {
        for outcome in GateOutcome::ALL {
            let key = coincidence_key(basis, outcome);
            report.push(key, stats.coincidences[b][outcome.index()].to_string());
        }
    }
    report.push("eve_alice_agreement", sig9_opt(stats.eve_alice_agreement));

    let mut w = open_output(&output.out)?;
    report.write(output.format, &mut w).map_err(write_failed)
}

fn coincidence_key(basis: &str, outcome: GateOutcome) -> &'static str {
    match (basis, outcome) {
        ("z", GateOutcome::Nothing) => "coincidence_z_none",
        ("z", GateOutcome::Click0) => "coincidence_z_click0",
        ("z", GateOutcome::Click1) => "coincidence_z_click1",
        ("z", GateOutcome::Double) => "coincidence_z_double",
        ("x", GateOutcome::Nothing) => "coincidence_x_none",
        ("x", GateOutcome::Click0) => "coincidence_x_click0",
        ("x", GateOutcome::Click1) => "coincidence_x_click1",
        (_, GateOutcome::Double) => "coincidence_x_double",
        _ => unreachable!(),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_qnd(
    phase: f64,
    resolution: f64,
    bins: usize,
    dt: f64,
    tau: f64,
    t_start: f64,
    t0: f64,
    bandwidth: f64,
    omega0: f64,
    output: &OutputArgs,
) -> Result<(), CliError> {
    let usage = |e: qnd::QndError| CliError::Usage(e.to_string());
    let grid = TimeGrid::new(t_start, dt, bins, tau).map_err(usage)?;
    let state = qnd::make_qubit_state(phase, t0, grid, omega0, bandwidth).map_err(usage)?;
    let intervals = qnd::interval_count(&grid, resolution).map_err(usage)?;

    let mut table = Table::new(vec![
        "interval",
        "t_lo_ns",
        "t_hi_ns",
        "probability",
        "recovered_phase_deg",
    ]);
    let mut total = 0.0;
    for i in 0..intervals {
        let (p, collapsed) = qnd::project_timing(&state, i, resolution).map_err(usage)?;
        total += p;
        let recovered = collapsed
            .as_ref()
            .and_then(|c| qnd::recovered_phase_deg(c).ok());
        let (lo, hi) = qnd::interval_bounds(&grid, i, resolution);
        table.push(vec![
            i.to_string(),
            sig9(lo),
            sig9(hi),
            sig9(p),
            sig9_opt(recovered),
        ]);
    }

    let mut w = open_output(&output.out)?;
    table.write(output.format, &mut w).map_err(write_failed)?;
    if output.format == Format::Summary {
        writeln!(w, "total probability: {}", sig9(total)).map_err(write_failed)?;
        writeln!(w, "constructed phase: {}", sig9(phase.rem_euclid(360.0)))
            .map_err(write_failed)?;
    }
    Ok(())
}
