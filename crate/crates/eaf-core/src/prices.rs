//! Ingestion, alignment, synthesis, and discretization of day-ahead and
//! real-time price series at 5-minute resolution.
//!
//! CSV files carry a `timestamp,price` header with ISO-8601 UTC timestamps
//! and $/MWh prices (negative prices permitted). Hourly day-ahead files are
//! accepted and expanded by repeating each hourly value across its twelve
//! 5-minute steps; gaps of up to three steps at the native resolution are
//! filled by linear interpolation, anything longer is an error.

use chrono::{DateTime, Duration, NaiveDateTime, Utc};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;
use thiserror::Error;

pub const STEP_MINUTES: i64 = 5;
pub const STEPS_PER_HOUR: usize = 12;
pub const STEPS_PER_DAY: usize = 288;

/// Largest run of missing native-resolution steps that interpolation may
/// fill silently; longer gaps indicate data problems.
pub const MAX_INTERP_STEPS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Market {
    DayAhead,
    RealTime,
}

impl Market {
    pub fn as_str(&self) -> &'static str {
        match self {
            Market::DayAhead => "DAP",
            Market::RealTime => "RTP",
        }
    }
}

/// A gap-free price series on the 5-minute grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    pub start: DateTime<Utc>,
    pub values: Vec<f64>,
    pub market: Market,
}

impl PriceSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn timestamp(&self, index: usize) -> DateTime<Utc> {
        self.start + Duration::minutes(STEP_MINUTES * index as i64)
    }

    pub fn end(&self) -> DateTime<Utc> {
        self.timestamp(self.len())
    }

    /// Mean of the 12-step hour containing `t` (shorter at a trailing
    /// partial hour).
    pub fn hour_mean(&self, t: usize) -> f64 {
        let from = (t / STEPS_PER_HOUR) * STEPS_PER_HOUR;
        let to = (from + STEPS_PER_HOUR).min(self.len());
        let span = &self.values[from..to];
        span.iter().sum::<f64>() / span.len() as f64
    }

    /// Sub-series covering `[from, to)` steps.
    pub fn slice(&self, from: usize, to: usize) -> PriceSeries {
        PriceSeries {
            start: self.timestamp(from),
            values: self.values[from..to].to_vec(),
            market: self.market,
        }
    }

    /// Chronological split at `fraction` of the length, rounded down to a
    /// whole day so both parts start at midnight of the synthetic epoch.
    pub fn split_days(&self, fraction: f64) -> (PriceSeries, PriceSeries) {
        let days = self.len() / STEPS_PER_DAY;
        let head_days = ((days as f64 * fraction).floor() as usize).clamp(0, days);
        let cut = head_days * STEPS_PER_DAY;
        (self.slice(0, cut), self.slice(cut, self.len()))
    }
}

#[derive(Debug, Error)]
pub enum PriceError {
    #[error("i/o error reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: duplicate timestamp {ts}")]
    DuplicateTimestamp { line: usize, ts: String },
    #[error("gap of {steps} steps at {at} exceeds the {MAX_INTERP_STEPS}-step interpolation limit")]
    GapTooLarge { at: String, steps: usize },
    #[error("unsupported native resolution of {minutes} minutes (expected 5 or 60)")]
    UnsupportedResolution { minutes: i64 },
    #[error("file {path} contains no data rows")]
    EmptyFile { path: String },
    #[error("series do not overlap")]
    EmptyOverlap,
    #[error("insufficient training data: {got} steps, need at least {need}")]
    InsufficientData { got: usize, need: usize },
    #[error("step {t} outside series of length {len}")]
    OutOfRange { t: usize, len: usize },
}

/// What `load_price_csv` did to produce a gap-free series.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadReport {
    pub rows_read: usize,
    /// (first missing step index, run length) for each interpolated gap,
    /// indices on the native-resolution grid.
    pub interpolated: Vec<(usize, usize)>,
    /// True when an hourly file was expanded to the 5-minute grid.
    pub expanded_from_hourly: bool,
}

fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(naive.and_utc());
        }
    }
    None
}

/// Load a `timestamp,price` CSV into a gap-free 5-minute series.
pub fn load_price_csv(path: &Path, market: Market) -> Result<(PriceSeries, LoadReport), PriceError> {
    let text = std::fs::read_to_string(path).map_err(|source| PriceError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_price_csv(&text, market, &path.display().to_string())
}

fn parse_price_csv(
    text: &str,
    market: Market,
    path: &str,
) -> Result<(PriceSeries, LoadReport), PriceError> {
    let mut rows: Vec<(DateTime<Utc>, f64, usize)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if lineno == 0 && line.to_ascii_lowercase().starts_with("timestamp") {
            continue;
        }
        let (ts_raw, price_raw) = line.split_once(',').ok_or_else(|| PriceError::Parse {
            line: lineno + 1,
            msg: "expected 'timestamp,price'".into(),
        })?;
        let ts = parse_timestamp(ts_raw.trim()).ok_or_else(|| PriceError::Parse {
            line: lineno + 1,
            msg: format!("unparseable timestamp '{}'", ts_raw.trim()),
        })?;
        let price: f64 = price_raw.trim().parse().map_err(|_| PriceError::Parse {
            line: lineno + 1,
            msg: format!("unparseable price '{}'", price_raw.trim()),
        })?;
        rows.push((ts, price, lineno + 1));
    }
    if rows.is_empty() {
        return Err(PriceError::EmptyFile { path: path.into() });
    }
    rows.sort_by_key(|&(ts, _, _)| ts);
    for pair in rows.windows(2) {
        if pair[0].0 == pair[1].0 {
            return Err(PriceError::DuplicateTimestamp {
                line: pair[1].2,
                ts: pair[1].0.to_rfc3339(),
            });
        }
    }

    // Native resolution: the smallest spacing present, 5-minute or hourly.
    let native_min = rows
        .windows(2)
        .map(|p| (p[1].0 - p[0].0).num_minutes())
        .min()
        .unwrap_or(STEP_MINUTES);
    if native_min != STEP_MINUTES && native_min != 60 {
        return Err(PriceError::UnsupportedResolution {
            minutes: native_min,
        });
    }

    let mut values: Vec<f64> = Vec::with_capacity(rows.len());
    let mut report = LoadReport {
        rows_read: rows.len(),
        ..LoadReport::default()
    };
    values.push(rows[0].1);
    for pair in rows.windows(2) {
        let delta = (pair[1].0 - pair[0].0).num_minutes();
        if delta % native_min != 0 {
            return Err(PriceError::Parse {
                line: pair[1].2,
                msg: format!(
                    "timestamp off the {native_min}-minute grid (spacing {delta} minutes)"
                ),
            });
        }
        let missing = (delta / native_min - 1) as usize;
        if missing > MAX_INTERP_STEPS {
            return Err(PriceError::GapTooLarge {
                at: pair[0].0.to_rfc3339(),
                steps: missing,
            });
        }
        if missing > 0 {
            report.interpolated.push((values.len(), missing));
            let (a, b) = (pair[0].1, pair[1].1);
            for k in 1..=missing {
                values.push(a + (b - a) * k as f64 / (missing + 1) as f64);
            }
        }
        values.push(pair[1].1);
    }

    if native_min == 60 {
        report.expanded_from_hourly = true;
        values = values
            .iter()
            .flat_map(|&v| std::iter::repeat(v).take(STEPS_PER_HOUR))
            .collect();
    }

    Ok((
        PriceSeries {
            start: rows[0].0,
            values,
            market,
        },
        report,
    ))
}

/// Truncate both series to their common time range.
pub fn align_series(
    dap: &PriceSeries,
    rtp: &PriceSeries,
) -> Result<(PriceSeries, PriceSeries), PriceError> {
    let start = dap.start.max(rtp.start);
    let end = dap.end().min(rtp.end());
    if end <= start {
        return Err(PriceError::EmptyOverlap);
    }
    let steps = ((end - start).num_minutes() / STEP_MINUTES) as usize;
    let dap_from = ((start - dap.start).num_minutes() / STEP_MINUTES) as usize;
    let rtp_from = ((start - rtp.start).num_minutes() / STEP_MINUTES) as usize;
    Ok((
        dap.slice(dap_from, dap_from + steps),
        rtp.slice(rtp_from, rtp_from + steps),
    ))
}

/// Parameters of the synthetic price generator. The defaults are fixed so
/// acceptance experiments are reproducible without proprietary data.
#[derive(Debug, Clone)]
pub struct SynthProfile {
    /// Daily mean of the day-ahead shape ($/MWh).
    pub mean: f64,
    /// Daily amplitude: trough = mean - amplitude, peak = mean + amplitude.
    pub amplitude: f64,
    /// Hour of the daily trough and peak.
    pub trough_hour: f64,
    pub peak_hour: f64,
    /// Weekend modulation: amplitude scale and mean shift on Sat/Sun.
    pub weekend_amplitude_factor: f64,
    pub weekend_mean_shift: f64,
    /// AR(1) innovation stddev and persistence of the real-time residual.
    pub ar_sigma: f64,
    pub ar_phi: f64,
    /// Expected positive real-time spikes per day and their size range.
    pub spikes_per_day: f64,
    pub spike_min: f64,
    pub spike_max: f64,
}

impl Default for SynthProfile {
    fn default() -> Self {
        Self {
            mean: 40.0,
            amplitude: 25.0,
            trough_hour: 3.0,
            peak_hour: 18.0,
            weekend_amplitude_factor: 0.85,
            weekend_mean_shift: -4.0,
            ar_sigma: 8.0,
            ar_phi: 0.8,
            spikes_per_day: 2.0,
            spike_min: 100.0,
            spike_max: 300.0,
        }
    }
}

impl SynthProfile {
    /// Smooth daily shape in [-1, 1]: -1 at the trough hour rising to +1
    /// at the peak hour, cosine-interpolated both ways.
    fn shape(&self, hour: f64) -> f64 {
        let rise = (self.peak_hour - self.trough_hour).rem_euclid(24.0);
        let fall = 24.0 - rise;
        let since_trough = (hour - self.trough_hour).rem_euclid(24.0);
        if since_trough <= rise {
            -(std::f64::consts::PI * since_trough / rise).cos()
        } else {
            (std::f64::consts::PI * (since_trough - rise) / fall).cos()
        }
    }
}

/// Synthetic epoch: a fixed Monday midnight so weekday effects are
/// deterministic.
pub fn synth_epoch() -> DateTime<Utc> {
    DateTime::parse_from_rfc3339("2023-01-02T00:00:00Z")
        .expect("valid epoch")
        .with_timezone(&Utc)
}

/// Generate `days` of day-ahead and real-time prices. Deterministic per
/// seed: DAP is the hourly daily shape with weekend modulation, repeated
/// across each hour's twelve steps; RTP adds AR(1) noise and rare positive
/// spikes on the 5-minute grid.
pub fn synth_prices(seed: u64, days: usize, profile: &SynthProfile) -> (PriceSeries, PriceSeries) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let steps = days * STEPS_PER_DAY;
    let mut dap = Vec::with_capacity(steps);
    for day in 0..days {
        let weekend = day % 7 >= 5; // epoch is a Monday
        let (amp, shift) = if weekend {
            (
                profile.amplitude * profile.weekend_amplitude_factor,
                profile.weekend_mean_shift,
            )
        } else {
            (profile.amplitude, 0.0)
        };
        for hour in 0..24 {
            let value = profile.mean + shift + amp * profile.shape(hour as f64 + 0.5);
            for _ in 0..STEPS_PER_HOUR {
                dap.push(value);
            }
        }
    }

    let spike_p = profile.spikes_per_day / STEPS_PER_DAY as f64;
    let mut rtp = Vec::with_capacity(steps);
    let mut ar = 0.0_f64;
    for &base in &dap {
        // Box-Muller from two uniforms; drawn every step for determinism.
        let u1: f64 = rng.random::<f64>().max(1e-12);
        let u2: f64 = rng.random();
        let normal = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        ar = profile.ar_phi * ar + profile.ar_sigma * normal;
        let spike_draw: f64 = rng.random();
        let spike = if spike_draw < spike_p {
            profile.spike_min + (profile.spike_max - profile.spike_min) * rng.random::<f64>()
        } else {
            0.0
        };
        rtp.push(base + ar + spike);
    }

    let start = synth_epoch();
    (
        PriceSeries {
            start,
            values: dap,
            market: Market::DayAhead,
        },
        PriceSeries {
            start,
            values: rtp,
            market: Market::RealTime,
        },
    )
}

/// Discretizer mapping a day-ahead series position to one of 15 buckets:
/// five quantile levels of the hourly mean times three short-term trends.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceBucketizer {
    /// 20/40/60/80th percentiles of hourly-mean DAP on the training data.
    pub level_thresholds: [f64; 4],
    /// Trend threshold: a quarter of the stddev of hour-over-hour change.
    pub trend_threshold: f64,
}

pub const BUCKET_COUNT: usize = 15;

fn percentile(sorted: &[f64], p: f64) -> f64 {
    // Linear interpolation between closest ranks.
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let rank = p * (n - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Fit the bucketizer on at least seven days of training day-ahead prices.
pub fn fit_bucketizer(training_dap: &PriceSeries) -> Result<PriceBucketizer, PriceError> {
    let need = 7 * STEPS_PER_DAY;
    if training_dap.len() < need {
        return Err(PriceError::InsufficientData {
            got: training_dap.len(),
            need,
        });
    }
    let hours = training_dap.len() / STEPS_PER_HOUR;
    let means: Vec<f64> = (0..hours)
        .map(|h| training_dap.hour_mean(h * STEPS_PER_HOUR))
        .collect();
    let mut sorted = means.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let level_thresholds = [
        percentile(&sorted, 0.2),
        percentile(&sorted, 0.4),
        percentile(&sorted, 0.6),
        percentile(&sorted, 0.8),
    ];
    let diffs: Vec<f64> = means.windows(2).map(|p| p[1] - p[0]).collect();
    let mean_diff = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let var = diffs
        .iter()
        .map(|d| (d - mean_diff).powi(2))
        .sum::<f64>()
        / (diffs.len() - 1).max(1) as f64;
    Ok(PriceBucketizer {
        level_thresholds,
        trend_threshold: 0.25 * var.sqrt(),
    })
}

impl PriceBucketizer {
    /// Bucket index `3 * level + trend` for step `t` of `dap`.
    pub fn bucketize(&self, dap: &PriceSeries, t: usize) -> Result<usize, PriceError> {
        if t >= dap.len() {
            return Err(PriceError::OutOfRange { t, len: dap.len() });
        }
        let current = dap.hour_mean(t);
        let level = self
            .level_thresholds
            .iter()
            .filter(|&&thr| current > thr)
            .count();
        let next_hour_start = (t / STEPS_PER_HOUR + 1) * STEPS_PER_HOUR;
        let trend = if next_hour_start >= dap.len() {
            1 // final hour: no forward information
        } else {
            let next = dap.hour_mean(next_hour_start);
            if next < current - self.trend_threshold {
                0
            } else if next > current + self.trend_threshold {
                2
            } else {
                1
            }
        };
        Ok(3 * level + trend)
    }
}

/// Write a series as `timestamp,price` CSV.
pub fn write_price_csv(series: &PriceSeries, path: &Path) -> Result<(), PriceError> {
    let mut out = String::with_capacity(series.len() * 32);
    out.push_str("timestamp,price\n");
    for (i, v) in series.values.iter().enumerate() {
        out.push_str(&format!(
            "{},{v:.6}\n",
            series.timestamp(i).format("%Y-%m-%dT%H:%M:%SZ")
        ));
    }
    std::fs::write(path, out).map_err(|source| PriceError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv_day() -> String {
        let mut s = String::from("timestamp,price\n");
        let start = synth_epoch();
        for i in 0..288 {
            s.push_str(&format!(
                "{},{}\n",
                (start + Duration::minutes(5 * i)).format("%Y-%m-%dT%H:%M:%SZ"),
                30.0 + i as f64 * 0.1
            ));
        }
        s
    }

    #[test]
    fn well_formed_day_loads_fully() {
        let (series, report) = parse_price_csv(&csv_day(), Market::RealTime, "mem").unwrap();
        assert_eq!(series.len(), 288);
        assert!(report.interpolated.is_empty());
        assert!(!report.expanded_from_hourly);
    }

    #[test]
    fn single_missing_row_is_interpolated() {
        let mut lines: Vec<String> = csv_day().lines().map(String::from).collect();
        lines.remove(10); // drop one row
        let text = lines.join("\n");
        let (series, report) = parse_price_csv(&text, Market::RealTime, "mem").unwrap();
        assert_eq!(series.len(), 288);
        assert_eq!(report.interpolated.len(), 1);
        // Interpolated value is the average of its neighbours.
        let flagged = report.interpolated[0].0;
        let expect = (series.values[flagged - 1] + series.values[flagged + 1]) / 2.0;
        assert!((series.values[flagged] - expect).abs() < 1e-12);
    }

    #[test]
    fn six_hour_gap_is_an_error() {
        let mut lines: Vec<String> = csv_day().lines().map(String::from).collect();
        lines.drain(20..20 + 72); // 6 hours of rows
        let text = lines.join("\n");
        match parse_price_csv(&text, Market::RealTime, "mem") {
            Err(PriceError::GapTooLarge { steps, .. }) => assert_eq!(steps, 72),
            other => panic!("expected gap error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_timestamps_are_rejected() {
        let mut text = csv_day();
        text.push_str("2023-01-02T00:00:00Z,99\n");
        assert!(matches!(
            parse_price_csv(&text, Market::RealTime, "mem"),
            Err(PriceError::DuplicateTimestamp { .. })
        ));
    }

    #[test]
    fn hourly_files_expand_by_repetition() {
        let mut s = String::from("timestamp,price\n");
        let start = synth_epoch();
        for h in 0..24 {
            s.push_str(&format!(
                "{},{}\n",
                (start + Duration::hours(h)).format("%Y-%m-%dT%H:%M:%SZ"),
                h as f64
            ));
        }
        let (series, report) = parse_price_csv(&s, Market::DayAhead, "mem").unwrap();
        assert!(report.expanded_from_hourly);
        assert_eq!(series.len(), 288);
        assert_eq!(series.values[0], 0.0);
        assert_eq!(series.values[11], 0.0);
        assert_eq!(series.values[12], 1.0);
    }

    #[test]
    fn align_clips_to_common_range() {
        let (dap, rtp) = synth_prices(3, 3, &SynthProfile::default());
        let dap_long = dap.slice(0, 3 * STEPS_PER_DAY);
        let rtp_short = rtp.slice(STEPS_PER_DAY, 2 * STEPS_PER_DAY);
        let (a, b) = align_series(&dap_long, &rtp_short).unwrap();
        assert_eq!(a.len(), b.len());
        assert_eq!(a.len(), STEPS_PER_DAY);
        assert_eq!(a.start, b.start);

        let disjoint = rtp.slice(2 * STEPS_PER_DAY, 3 * STEPS_PER_DAY);
        let early = dap.slice(0, STEPS_PER_DAY);
        assert!(matches!(
            align_series(&early, &disjoint),
            Err(PriceError::EmptyOverlap)
        ));
    }

    #[test]
    fn synth_day_spans_the_documented_range() {
        let (dap, rtp) = synth_prices(7, 1, &SynthProfile::default());
        assert_eq!(dap.len(), 288);
        assert_eq!(rtp.len(), 288);
        let min = dap.values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = dap.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!((min - 15.0).abs() < 1.0, "min {min}");
        assert!((max - 65.0).abs() < 1.0, "max {max}");
    }

    #[test]
    fn synth_is_deterministic_and_flat_without_noise() {
        let p = SynthProfile::default();
        let (d1, r1) = synth_prices(42, 2, &p);
        let (d2, r2) = synth_prices(42, 2, &p);
        assert_eq!(d1, d2);
        assert_eq!(r1, r2);

        let flat = SynthProfile {
            amplitude: 0.0,
            ar_sigma: 0.0,
            spikes_per_day: 0.0,
            weekend_amplitude_factor: 1.0,
            weekend_mean_shift: 0.0,
            ..p
        };
        let (d, r) = synth_prices(1, 1, &flat);
        assert!(d.values.iter().all(|&v| (v - 40.0).abs() < 1e-12));
        assert!(r.values.iter().all(|&v| (v - 40.0).abs() < 1e-12));
    }

    #[test]
    fn bucketizer_fit_and_encoding() {
        let (dap, _) = synth_prices(7, 365, &SynthProfile::default());
        let b = fit_bucketizer(&dap).unwrap();
        assert!(b
            .level_thresholds
            .windows(2)
            .all(|p| p[0] < p[1]));

        // Constant series: degenerate thresholds, level 0, trend 1.
        let flat = PriceSeries {
            start: synth_epoch(),
            values: vec![25.0; 14 * STEPS_PER_DAY],
            market: Market::DayAhead,
        };
        let fb = fit_bucketizer(&flat).unwrap();
        assert_eq!(fb.bucketize(&flat, 100).unwrap(), 1);

        // One day is not enough to fit.
        let (short, _) = synth_prices(7, 1, &SynthProfile::default());
        assert!(matches!(
            fit_bucketizer(&short),
            Err(PriceError::InsufficientData { .. })
        ));
    }

    #[test]
    fn bucket_extremes_and_final_hour() {
        let b = PriceBucketizer {
            level_thresholds: [20.0, 30.0, 40.0, 50.0],
            trend_threshold: 2.0,
        };
        // Two hours: current 60 (above all), next higher by > threshold.
        let mut values = vec![60.0; 12];
        values.extend(vec![70.0; 12]);
        let s = PriceSeries {
            start: synth_epoch(),
            values,
            market: Market::DayAhead,
        };
        assert_eq!(b.bucketize(&s, 0).unwrap(), 3 * 4 + 2);
        // Final hour forces trend 1.
        assert_eq!(b.bucketize(&s, 12).unwrap(), 3 * 4 + 1);
        assert!(matches!(
            b.bucketize(&s, 24),
            Err(PriceError::OutOfRange { .. })
        ));
    }

    #[test]
    fn bucket_totality_over_random_series() {
        let (dap, _) = synth_prices(11, 30, &SynthProfile::default());
        let b = fit_bucketizer(&dap).unwrap();
        for t in 0..dap.len() {
            let z = b.bucketize(&dap, t).unwrap();
            assert!(z < BUCKET_COUNT);
        }
    }
}
