//! Time-dependent detector efficiency curves.
//!
//! A gated avalanche photodiode is sensitive to an incoming photon only
//! inside a few-nanosecond detection window. A BB84 receiver has one such
//! curve per bit value, and manufacturing tolerances guarantee the two are
//! never perfectly aligned. Everything downstream consumes detector behavior
//! through the types here: [`EfficiencyCurve`] for a single detector,
//! [`DetectorPair`] for a receiver, [`mismatch_eta`] for the worst-case
//! efficiency ratio that drives the security bound, and [`jitter_smear`] for
//! the random-jitter countermeasure.
//!
//! Times are in nanoseconds throughout; efficiencies are probabilities in
//! `[0, 1]`.

use std::io::Read;
use std::path::Path;

use thiserror::Error;

/// Default relative floor for the mismatch scan: time samples where both
/// efficiencies are below `floor * global_peak` are excluded. The near-zero
/// tails of real curves are dark-count territory, where the efficiency ratio
/// is 0/0 noise rather than something an eavesdropper can exploit.
pub const DEFAULT_RATIO_FLOOR: f64 = 1e-4;

/// Default scan step for the mismatch minimization, in ns. Timing attacks
/// exploit sub-100-ps features, so the scan has to resolve them.
pub const DEFAULT_SCAN_STEP_NS: f64 = 1e-3;

/// How far past the plateau a parametric gate is considered to extend, in
/// units of the edge scale. A logistic edge at 40 scale lengths is below
/// 1e-17 of peak, which is negligible against every tolerance used here.
const GATE_SUPPORT_EDGE_SCALES: f64 = 40.0;

/// Errors from curve construction and curve scans.
#[derive(Debug, Error)]
pub enum CurveError {
    #[error("sample times must be strictly increasing (row {row})")]
    NonIncreasingTimes { row: usize },
    #[error("negative counts (row {row})")]
    NegativeCounts { row: usize },
    #[error("gate counts must be positive (row {row})")]
    NonPositiveGates { row: usize },
    #[error("efficiency {value} outside [0, 1] (row {row})")]
    EfficiencyOutOfRange { row: usize, value: f64 },
    #[error("a tabulated curve needs at least two samples")]
    TooFewSamples,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("curves below floor everywhere")]
    BelowFloorEverywhere,
    #[error("scan domain is empty")]
    EmptyDomain,
}

/// Errors from reading curve data files.
#[derive(Debug, Error)]
pub enum CurveFileError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error(
        "unrecognized header: expected `t_ns,eta0,eta1` or \
         `t_ns,counts0,gates0,counts1,gates1,dark0,dark_gates0,dark1,dark_gates1`"
    )]
    BadHeader,
    #[error(transparent)]
    Curve(#[from] CurveError),
}

/// Time-dependent detector efficiency, either a parametric flat-top gate or
/// a table of measured samples with linear interpolation.
///
/// Invariants enforced at construction: `eval` stays in `[0, 1]` everywhere,
/// and tabulated sample times are strictly increasing. Outside a tabulated
/// curve's sampled range the efficiency is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyCurve {
    repr: CurveRepr,
}

#[derive(Debug, Clone, PartialEq)]
enum CurveRepr {
    /// Product of a rising and a falling logistic edge, scaled by the peak
    /// efficiency. Matches the smooth-rise/fall shapes of gated APDs with
    /// four parameters.
    Gate {
        center_ns: f64,
        plateau_width_ns: f64,
        edge_scale_ns: f64,
        peak_efficiency: f64,
    },
    /// Piecewise-linear samples `(t_ns, eta)`.
    Table { samples: Vec<(f64, f64)> },
}

/// One row of a raw detector characterization run: photon counts over a
/// number of gates, with a matching dark-count measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawSample {
    pub t_ns: f64,
    pub counts: f64,
    pub gates: f64,
    pub dark_counts: f64,
    pub dark_gates: f64,
}

impl EfficiencyCurve {
    /// Parametric flat-top gate: logistic rise at `center - plateau/2`,
    /// logistic fall at `center + plateau/2`, scaled by `peak_efficiency`.
    pub fn gate(
        center_ns: f64,
        plateau_width_ns: f64,
        edge_scale_ns: f64,
        peak_efficiency: f64,
    ) -> Result<Self, CurveError> {
        if !center_ns.is_finite() {
            return Err(CurveError::InvalidParameter(
                "gate center must be finite".into(),
            ));
        }
        if !(plateau_width_ns.is_finite() && plateau_width_ns > 0.0) {
            return Err(CurveError::InvalidParameter(
                "plateau width must be positive".into(),
            ));
        }
        if !(edge_scale_ns.is_finite() && edge_scale_ns > 0.0) {
            return Err(CurveError::InvalidParameter(
                "edge scale must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&peak_efficiency) {
            return Err(CurveError::InvalidParameter(format!(
                "peak efficiency {peak_efficiency} outside [0, 1]"
            )));
        }
        Ok(Self {
            repr: CurveRepr::Gate {
                center_ns,
                plateau_width_ns,
                edge_scale_ns,
                peak_efficiency,
            },
        })
    }

    /// Tabulated curve from `(t_ns, eta)` samples. Times must be strictly
    /// increasing and efficiencies in `[0, 1]`.
    pub fn tabulated(samples: Vec<(f64, f64)>) -> Result<Self, CurveError> {
        if samples.len() < 2 {
            return Err(CurveError::TooFewSamples);
        }
        for (row, &(t, eta)) in samples.iter().enumerate() {
            if !t.is_finite() {
                return Err(CurveError::InvalidParameter(format!(
                    "non-finite time in row {row}"
                )));
            }
            if !(0.0..=1.0).contains(&eta) {
                return Err(CurveError::EfficiencyOutOfRange { row, value: eta });
            }
            if row > 0 && t <= samples[row - 1].0 {
                return Err(CurveError::NonIncreasingTimes { row });
            }
        }
        Ok(Self {
            repr: CurveRepr::Table { samples },
        })
    }

    /// Build a tabulated curve from raw counting rows with the calibration
    /// factor left at 1. Dark counts are subtracted per row and the result
    /// clamped at zero: `eta_i = max(0, counts/gates - dark_counts/dark_gates)`.
    pub fn from_samples(rows: &[RawSample]) -> Result<Self, CurveError> {
        Self::from_samples_scaled(rows, 1.0)
    }

    /// As [`EfficiencyCurve::from_samples`], with every subtracted efficiency
    /// multiplied by `calibration` before validation.
    pub fn from_samples_scaled(rows: &[RawSample], calibration: f64) -> Result<Self, CurveError> {
        if !(calibration.is_finite() && calibration > 0.0) {
            return Err(CurveError::InvalidParameter(format!(
                "calibration factor {calibration} must be positive"
            )));
        }
        let mut samples = Vec::with_capacity(rows.len());
        for (row, r) in rows.iter().enumerate() {
            if r.counts < 0.0 || r.dark_counts < 0.0 {
                return Err(CurveError::NegativeCounts { row });
            }
            if r.gates <= 0.0 || r.dark_gates <= 0.0 {
                return Err(CurveError::NonPositiveGates { row });
            }
            let eta = calibration * (r.counts / r.gates - r.dark_counts / r.dark_gates).max(0.0);
            if eta > 1.0 {
                return Err(CurveError::EfficiencyOutOfRange { row, value: eta });
            }
            samples.push((r.t_ns, eta));
        }
        Self::tabulated(samples)
    }

    /// Efficiency at time `t_ns`. Always in `[0, 1]`.
    pub fn eval(&self, t_ns: f64) -> f64 {
        let eta = match &self.repr {
            CurveRepr::Gate {
                center_ns,
                plateau_width_ns,
                edge_scale_ns,
                peak_efficiency,
            } => {
                let rise = logistic((t_ns - (center_ns - plateau_width_ns / 2.0)) / edge_scale_ns);
                let fall = logistic(((center_ns + plateau_width_ns / 2.0) - t_ns) / edge_scale_ns);
                peak_efficiency * rise * fall
            }
            CurveRepr::Table { samples } => {
                let first = samples[0];
                let last = samples[samples.len() - 1];
                if t_ns < first.0 || t_ns > last.0 {
                    0.0
                } else {
                    // Index of the first sample time > t, so the segment is
                    // [idx-1, idx]; t == first.0 maps onto the first segment.
                    let idx = samples
                        .partition_point(|&(ts, _)| ts <= t_ns)
                        .max(1)
                        .min(samples.len() - 1);
                    let (t0, y0) = samples[idx - 1];
                    let (t1, y1) = samples[idx];
                    let w = (t_ns - t0) / (t1 - t0);
                    // This form is exact at both endpoints.
                    y0 * (1.0 - w) + y1 * w
                }
            }
        };
        eta.clamp(0.0, 1.0)
    }

    /// Interval outside which the curve is (numerically) zero.
    pub fn support(&self) -> (f64, f64) {
        match &self.repr {
            CurveRepr::Gate {
                center_ns,
                plateau_width_ns,
                edge_scale_ns,
                ..
            } => {
                let margin = plateau_width_ns / 2.0 + GATE_SUPPORT_EDGE_SCALES * edge_scale_ns;
                (center_ns - margin, center_ns + margin)
            }
            CurveRepr::Table { samples } => (samples[0].0, samples[samples.len() - 1].0),
        }
    }

    /// The same curve translated by `dt_ns` (positive = later).
    pub fn shifted(&self, dt_ns: f64) -> Self {
        let repr = match &self.repr {
            CurveRepr::Gate {
                center_ns,
                plateau_width_ns,
                edge_scale_ns,
                peak_efficiency,
            } => CurveRepr::Gate {
                center_ns: center_ns + dt_ns,
                plateau_width_ns: *plateau_width_ns,
                edge_scale_ns: *edge_scale_ns,
                peak_efficiency: *peak_efficiency,
            },
            CurveRepr::Table { samples } => CurveRepr::Table {
                samples: samples.iter().map(|&(t, eta)| (t + dt_ns, eta)).collect(),
            },
        };
        Self { repr }
    }
}

#[inline]
fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// A receiver's two detectors: efficiency curve and per-gate dark-count
/// probability for each bit value.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorPair {
    pub curve0: EfficiencyCurve,
    pub curve1: EfficiencyCurve,
    pub dark0: f64,
    pub dark1: f64,
}

impl DetectorPair {
    pub fn new(
        curve0: EfficiencyCurve,
        curve1: EfficiencyCurve,
        dark0: f64,
        dark1: f64,
    ) -> Result<Self, CurveError> {
        for (name, d) in [("dark0", dark0), ("dark1", dark1)] {
            if !(d.is_finite() && (0.0..1.0).contains(&d)) {
                return Err(CurveError::InvalidParameter(format!(
                    "{name} = {d} outside [0, 1)"
                )));
            }
        }
        Ok(Self {
            curve0,
            curve1,
            dark0,
            dark1,
        })
    }

    /// Pair without dark counts.
    pub fn noiseless(curve0: EfficiencyCurve, curve1: EfficiencyCurve) -> Self {
        Self {
            curve0,
            curve1,
            dark0: 0.0,
            dark1: 0.0,
        }
    }

    /// Efficiency of detector `bit` (0 or 1) at time `t_ns`.
    pub fn eta(&self, bit: u8, t_ns: f64) -> f64 {
        match bit {
            0 => self.curve0.eval(t_ns),
            _ => self.curve1.eval(t_ns),
        }
    }

    /// The pair with detector roles exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            curve0: self.curve1.clone(),
            curve1: self.curve0.clone(),
            dark0: self.dark1,
            dark1: self.dark0,
        }
    }

    /// Union of the two curve supports.
    pub fn support(&self) -> (f64, f64) {
        let (a0, b0) = self.curve0.support();
        let (a1, b1) = self.curve1.support();
        (a0.min(a1), b0.max(b1))
    }
}

/// Random timing jitter added to detector synchronization to smear the
/// curves and lower the mismatch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JitterDistribution {
    pub kind: JitterKind,
    /// Standard deviation (gaussian) or half-width (uniform), in ns.
    pub scale_ns: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JitterKind {
    Gaussian,
    Uniform,
}

impl JitterDistribution {
    pub fn gaussian(scale_ns: f64) -> Result<Self, CurveError> {
        Self::new(JitterKind::Gaussian, scale_ns)
    }

    pub fn uniform(scale_ns: f64) -> Result<Self, CurveError> {
        Self::new(JitterKind::Uniform, scale_ns)
    }

    pub fn new(kind: JitterKind, scale_ns: f64) -> Result<Self, CurveError> {
        if !(scale_ns.is_finite() && scale_ns > 0.0) {
            return Err(CurveError::InvalidParameter(format!(
                "jitter scale {scale_ns} must be positive"
            )));
        }
        Ok(Self { kind, scale_ns })
    }

    /// Probability density at offset `u_ns`.
    fn density(&self, u_ns: f64) -> f64 {
        match self.kind {
            JitterKind::Gaussian => {
                let s = self.scale_ns;
                (-u_ns * u_ns / (2.0 * s * s)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
            }
            JitterKind::Uniform => {
                if u_ns.abs() <= self.scale_ns {
                    0.5 / self.scale_ns
                } else {
                    0.0
                }
            }
        }
    }

    /// Half-width beyond which the density is treated as zero.
    fn cutoff(&self) -> f64 {
        match self.kind {
            JitterKind::Gaussian => 5.0 * self.scale_ns,
            JitterKind::Uniform => self.scale_ns,
        }
    }
}

/// Which detector's efficiency forms the numerator of the minimizing ratio,
/// i.e. the detector an attacker would suppress at the reported time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlindedDetector {
    Zero,
    One,
}

/// Result of the worst-case mismatch scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MismatchReport {
    /// Worst-case efficiency ratio in `[0, 1]`; 1 means perfectly matched
    /// curves, 0 means some admissible time fully blinds one detector.
    pub eta: f64,
    /// Earliest time attaining the minimum.
    pub t_min_ns: f64,
    /// Detector suppressed at `t_min_ns`.
    pub blinded: BlindedDetector,
    /// Absolute efficiency threshold that was applied (`floor * global peak`).
    pub threshold: f64,
}

/// Worst-case detector efficiency mismatch over `domain`, with the default
/// 1-ps scan step:
///
/// `eta = min( min_t eta1(t)/eta0(t), min_t eta0(t)/eta1(t) )`
///
/// The minimization is restricted to times where at least one detector is at
/// or above `floor` times the global peak efficiency, so that dead tails
/// where the ratio is 0/0 noise do not drive the result. Ties are broken
/// toward the earliest time, and toward suppressing detector 1 when both
/// directions attain the same ratio.
pub fn mismatch_eta(
    pair: &DetectorPair,
    domain: (f64, f64),
    floor: f64,
) -> Result<MismatchReport, CurveError> {
    mismatch_eta_with_step(pair, domain, floor, DEFAULT_SCAN_STEP_NS)
}

/// As [`mismatch_eta`] with an explicit scan step.
pub fn mismatch_eta_with_step(
    pair: &DetectorPair,
    domain: (f64, f64),
    floor: f64,
    step_ns: f64,
) -> Result<MismatchReport, CurveError> {
    let (lo, hi) = domain;
    if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
        return Err(CurveError::EmptyDomain);
    }
    if !(floor.is_finite() && floor > 0.0) {
        return Err(CurveError::InvalidParameter(format!(
            "floor {floor} must be positive"
        )));
    }
    if !(step_ns.is_finite() && step_ns > 0.0) {
        return Err(CurveError::InvalidParameter(format!(
            "step {step_ns} must be positive"
        )));
    }

    let n = ((hi - lo) / step_ns).ceil() as usize;
    let times = (0..=n).map(|i| (lo + i as f64 * step_ns).min(hi));
    let values: Vec<(f64, f64, f64)> = times
        .map(|t| (t, pair.curve0.eval(t), pair.curve1.eval(t)))
        .collect();

    let peak = values
        .iter()
        .map(|&(_, e0, e1)| e0.max(e1))
        .fold(0.0, f64::max);
    let threshold = floor * peak;
    if peak == 0.0 {
        return Err(CurveError::BelowFloorEverywhere);
    }

    let mut best: Option<(f64, f64, BlindedDetector)> = None;
    let mut admissible = false;
    for &(t, e0, e1) in &values {
        if e0.max(e1) < threshold {
            continue;
        }
        admissible = true;
        // Ratio with detector 1 in the numerator first: on exact ties the
        // report blames detector 1, matching the scan order below.
        for (ratio, blinded) in [
            (e0 > 0.0)
                .then(|| e1 / e0)
                .map(|r| (r, BlindedDetector::One)),
            (e1 > 0.0)
                .then(|| e0 / e1)
                .map(|r| (r, BlindedDetector::Zero)),
        ]
        .into_iter()
        .flatten()
        {
            if best.is_none_or(|(b, _, _)| ratio < b) {
                best = Some((ratio, t, blinded));
            }
        }
    }
    if !admissible {
        return Err(CurveError::BelowFloorEverywhere);
    }
    let (eta, t_min_ns, blinded) = best.expect("admissible point always yields a ratio");
    Ok(MismatchReport {
        eta: eta.min(1.0),
        t_min_ns,
        blinded,
        threshold,
    })
}

/// Worst-case mismatch as a function of a relative translation of detector
/// 1's curve. Demonstrates, on concrete pairs, that shifting the curves
/// relative to one another does not eliminate a large mismatch.
///
/// The scan domain at each shift is the union of the two curve supports.
pub fn eta_vs_shift(
    pair: &DetectorPair,
    shifts: &[f64],
    floor: f64,
) -> Result<Vec<(f64, f64)>, CurveError> {
    shifts
        .iter()
        .map(|&shift| {
            let shifted = DetectorPair {
                curve0: pair.curve0.clone(),
                curve1: pair.curve1.shifted(shift),
                dark0: pair.dark0,
                dark1: pair.dark1,
            };
            let report = mismatch_eta(&shifted, shifted.support(), floor)?;
            Ok((shift, report.eta))
        })
        .collect()
}

/// Convolve a curve with a jitter density by direct quadrature on a uniform
/// grid, returning a tabulated curve. The output support extends the input
/// support by five jitter scales on each side.
///
/// The discrete kernel is renormalized to unit mass, so the transform
/// conserves the curve's integral up to the sampling of the output.
pub fn jitter_smear(
    curve: &EfficiencyCurve,
    jitter: JitterDistribution,
    grid_step_ns: f64,
) -> Result<EfficiencyCurve, CurveError> {
    if !(grid_step_ns.is_finite() && grid_step_ns > 0.0) {
        return Err(CurveError::InvalidParameter(format!(
            "grid step {grid_step_ns} must be positive"
        )));
    }

    // Symmetric kernel sample offsets j*step for |j| <= m, so a vanishing
    // jitter scale degenerates to the identity kernel.
    let m = (jitter.cutoff() / grid_step_ns).ceil() as i64;
    let mut weights = Vec::with_capacity(2 * m as usize + 1);
    let mut total = 0.0;
    for j in -m..=m {
        let w = jitter.density(j as f64 * grid_step_ns);
        total += w;
        weights.push(w);
    }
    // total > 0: the density at offset 0 is positive for both kinds.
    let norm = 1.0 / (total * grid_step_ns);

    let (lo, hi) = curve.support();
    let out_lo = lo - 5.0 * jitter.scale_ns;
    let out_hi = hi + 5.0 * jitter.scale_ns;
    let n = ((out_hi - out_lo) / grid_step_ns).ceil() as usize;

    let samples: Vec<(f64, f64)> = (0..=n)
        .map(|k| {
            let t = out_lo + k as f64 * grid_step_ns;
            let mut acc = 0.0;
            for (idx, w) in weights.iter().enumerate() {
                if *w == 0.0 {
                    continue;
                }
                let u = (idx as i64 - m) as f64 * grid_step_ns;
                acc += w * curve.eval(t - u);
            }
            (t, (acc * norm * grid_step_ns).clamp(0.0, 1.0))
        })
        .collect();

    EfficiencyCurve::tabulated(samples)
}

const PROCESSED_HEADER: [&str; 3] = ["t_ns", "eta0", "eta1"];
const RAW_HEADER: [&str; 9] = [
    "t_ns",
    "counts0",
    "gates0",
    "counts1",
    "gates1",
    "dark0",
    "dark_gates0",
    "dark1",
    "dark_gates1",
];

/// Read a curve pair from a CSV file. See [`read_curve_pair`].
pub fn read_curve_pair_file(
    path: &Path,
) -> Result<(EfficiencyCurve, EfficiencyCurve), CurveFileError> {
    let file = std::fs::File::open(path)?;
    read_curve_pair(file)
}

/// Read a curve pair from CSV text. Two layouts are accepted, distinguished
/// by the header row:
///
/// - processed: `t_ns,eta0,eta1`
/// - raw: `t_ns,counts0,gates0,counts1,gates1,dark0,dark_gates0,dark1,dark_gates1`
///
/// Raw rows are dark-subtracted per detector exactly as
/// [`EfficiencyCurve::from_samples`] does. Lines starting with `#` are
/// ignored.
pub fn read_curve_pair<R: Read>(
    reader: R,
) -> Result<(EfficiencyCurve, EfficiencyCurve), CurveFileError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .has_headers(true)
        .from_reader(reader);

    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_error(&e))?
        .iter()
        .map(|h| h.to_string())
        .collect();

    if headers == PROCESSED_HEADER {
        let mut s0 = Vec::new();
        let mut s1 = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| csv_error(&e))?;
            let line = record.position().map_or(0, |p| p.line());
            let fields = parse_fields::<3>(&record, line)?;
            s0.push((fields[0], fields[1]));
            s1.push((fields[0], fields[2]));
        }
        Ok((
            EfficiencyCurve::tabulated(s0)?,
            EfficiencyCurve::tabulated(s1)?,
        ))
    } else if headers == RAW_HEADER {
        let mut r0 = Vec::new();
        let mut r1 = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| csv_error(&e))?;
            let line = record.position().map_or(0, |p| p.line());
            let f = parse_fields::<9>(&record, line)?;
            r0.push(RawSample {
                t_ns: f[0],
                counts: f[1],
                gates: f[2],
                dark_counts: f[5],
                dark_gates: f[6],
            });
            r1.push(RawSample {
                t_ns: f[0],
                counts: f[3],
                gates: f[4],
                dark_counts: f[7],
                dark_gates: f[8],
            });
        }
        Ok((
            EfficiencyCurve::from_samples(&r0)?,
            EfficiencyCurve::from_samples(&r1)?,
        ))
    } else {
        Err(CurveFileError::BadHeader)
    }
}

fn parse_fields<const N: usize>(
    record: &csv::StringRecord,
    line: u64,
) -> Result<[f64; N], CurveFileError> {
    if record.len() != N {
        return Err(CurveFileError::Parse {
            line,
            message: format!("expected {N} fields, found {}", record.len()),
        });
    }
    let mut out = [0.0; N];
    for (i, field) in record.iter().enumerate() {
        out[i] = field.parse::<f64>().map_err(|_| CurveFileError::Parse {
            line,
            message: format!("field {} (`{field}`) is not a number", i + 1),
        })?;
    }
    Ok(out)
}

fn csv_error(e: &csv::Error) -> CurveFileError {
    let line = match e.position() {
        Some(p) => p.line(),
        None => 0,
    };
    CurveFileError::Parse {
        line,
        message: e.to_string(),
    }
}
