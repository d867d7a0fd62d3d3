//! Field maps, revival statistics, light-cone diagnostics and the bound
//! photon cloud.
//!
//! Field intensities use the same convention as [`crate::analytic`]:
//! `⟨E⁻E⁺⟩(x) = Σ_{n,m} √(n+1) √(m+1) cos[2πx(n+1)] cos[2πx(m+1)] ⟨a_n† a_m⟩`
//! in units of `ħ ω_c / (ε_0 A L)`.

use std::f64::consts::PI;

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::analytic::{self, mode_profile, Branch};
use crate::error::{invalid, Result};
use crate::linalg::{CompensatedComplexSum, CompensatedSum};
use crate::model::ModelParams;
use crate::series::{csv_float, Source};

/// `n` evenly spaced points from `a` to `b` inclusive.
pub fn uniform_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// `‖a - b‖₂ / ‖b‖₂`.
pub fn relative_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: CompensatedSum = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).collect();
    let den: CompensatedSum = b.iter().map(|y| y * y).collect();
    (num.value() / den.value()).sqrt()
}

fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    let mut acc = CompensatedSum::new();
    for k in 1..xs.len() {
        acc.add(0.5 * (xs[k] - xs[k - 1]) * (ys[k] + ys[k - 1]));
    }
    acc.value()
}

/// Field intensity on a space-time grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldMap {
    pub x_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    /// `amplitude[t][x]`
    pub amplitude: Vec<Vec<f64>>,
    pub source: Source,
}

impl FieldMap {
    pub fn max(&self) -> f64 {
        self.amplitude.iter().flatten().cloned().fold(0.0, f64::max)
    }

    /// Long format `x,t,amplitude`, time-major.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,t,amplitude\n");
        for (t, row) in self.t_grid.iter().zip(&self.amplitude) {
            for (x, a) in self.x_grid.iter().zip(row) {
                out.push_str(&format!("{},{},{}\n", csv_float(*x), csv_float(*t), csv_float(*a)));
            }
        }
        out
    }

    /// Nearest grid index to `x`.
    pub fn x_index(&self, x: f64) -> usize {
        nearest(&self.x_grid, x)
    }

    pub fn t_index(&self, t: f64) -> usize {
        nearest(&self.t_grid, t)
    }

    /// Time of the largest intensity at the grid point nearest `x`, within `window`.
    pub fn peak_time(&self, x: f64, window: (f64, f64)) -> Option<f64> {
        let ix = self.x_index(x);
        self.t_grid
            .iter()
            .zip(&self.amplitude)
            .filter(|(t, _)| **t > window.0 && **t < window.1)
            .max_by(|a, b| a.1[ix].total_cmp(&b.1[ix]))
            .map(|(t, _)| *t)
    }
}

fn nearest(grid: &[f64], v: f64) -> usize {
    let mut best = 0;
    for (k, g) in grid.iter().enumerate() {
        if (g - v).abs() < (grid[best] - v).abs() {
            best = k;
        }
    }
    best
}

fn check_grid(x_grid: &[f64]) -> Result<()> {
    if let Some(x) = x_grid.iter().find(|x| !(-0.5 - 1e-12..=0.5 + 1e-12).contains(*x)) {
        return Err(invalid(format!("position x = {x} outside [-1/2, 1/2]")));
    }
    Ok(())
}

/// Intensity profile of one star-basis correlation matrix `⟨a_n† a_m⟩`.
pub fn field_profile(corr: &Mat<C64>, x_grid: &[f64]) -> Result<Vec<f64>> {
    check_grid(x_grid)?;
    if corr.nrows() != corr.ncols() {
        return Err(invalid("correlation matrix must be square"));
    }
    let m = corr.nrows();
    Ok(x_grid
        .iter()
        .map(|&x| {
            let w: Vec<f64> = (0..m).map(|n| ((n + 1) as f64).sqrt() * mode_profile(n, x)).collect();
            let mut acc = CompensatedComplexSum::default();
            for n in 0..m {
                for k in 0..m {
                    acc.add(corr[(n, k)] * (w[n] * w[k]));
                }
            }
            acc.value().re
        })
        .collect())
}

/// Field map from star-basis correlations sampled on `t_grid`.
pub fn field_map_from_correlations(
    corrs: &[Mat<C64>],
    t_grid: &[f64],
    x_grid: &[f64],
    source: Source,
) -> Result<FieldMap> {
    if corrs.len() != t_grid.len() {
        return Err(invalid(format!("{} correlation matrices for {} times", corrs.len(), t_grid.len())));
    }
    if corrs.windows(2).any(|w| w[0].nrows() != w[1].nrows()) {
        return Err(invalid("correlation matrices differ in size"));
    }
    let amplitude = corrs.iter().map(|c| field_profile(c, x_grid)).collect::<Result<Vec<_>>>()?;
    Ok(FieldMap { x_grid: x_grid.to_vec(), t_grid: t_grid.to_vec(), amplitude, source })
}

/// Closed-form field map of the coupling-only solution.
pub fn analytic_field_map(params: &ModelParams, x_grid: &[f64], t_grid: &[f64]) -> Result<FieldMap> {
    check_grid(x_grid)?;
    let amplitude = t_grid
        .iter()
        .map(|&t| x_grid.iter().map(|&x| analytic::field_amplitude(x, t, params)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok(FieldMap { x_grid: x_grid.to_vec(), t_grid: t_grid.to_vec(), amplitude, source: Source::Analytic })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RevivalReport {
    pub peak_times: Vec<f64>,
    pub peak_heights: Vec<f64>,
    pub prominences: Vec<f64>,
    /// Full width at half prominence.
    pub peak_widths: Vec<f64>,
    /// Mean over the middle half of each roundtrip.
    pub plateau: f64,
}

fn crossing(t0: f64, v0: f64, t1: f64, v1: f64, level: f64) -> f64 {
    if v1 == v0 {
        return t0;
    }
    t0 + (level - v0) * (t1 - t0) / (v1 - v0)
}

/// Local maxima with prominence at least `min_prominence`.
pub fn detect_revivals(times: &[f64], values: &[f64], roundtrip: f64, min_prominence: f64) -> Result<RevivalReport> {
    if times.len() != values.len() || times.len() < 3 {
        return Err(invalid("revival detection needs matching series of at least 3 samples"));
    }
    if times[times.len() - 1] - times[0] < 2.0 * roundtrip {
        return Err(invalid("series must cover at least two roundtrips"));
    }
    let mut plateau = CompensatedSum::new();
    let mut count = 0usize;
    for (t, v) in times.iter().zip(values) {
        let phase = (t / roundtrip).fract();
        if (0.25..=0.75).contains(&phase) {
            plateau.add(*v);
            count += 1;
        }
    }
    let mut report = RevivalReport { plateau: if count > 0 { plateau.value() / count as f64 } else { f64::NAN }, ..Default::default() };
    let n = values.len();
    for i in 1..n - 1 {
        if !(values[i] > values[i - 1] && values[i] >= values[i + 1]) {
            continue;
        }
        let h = values[i];
        let mut left = i;
        let mut left_min = h;
        while left > 0 && values[left - 1] <= h {
            left -= 1;
            left_min = left_min.min(values[left]);
        }
        let mut right = i;
        let mut right_min = h;
        while right + 1 < n && values[right + 1] <= h {
            right += 1;
            right_min = right_min.min(values[right]);
        }
        let prominence = h - left_min.max(right_min);
        if prominence < min_prominence {
            continue;
        }
        let level = h - 0.5 * prominence;
        let mut a = i;
        while a > 0 && values[a - 1] > level {
            a -= 1;
        }
        let t_left = if a > 0 { crossing(times[a - 1], values[a - 1], times[a], values[a], level) } else { times[0] };
        let mut b = i;
        while b + 1 < n && values[b + 1] > level {
            b += 1;
        }
        let t_right = if b + 1 < n { crossing(times[b], values[b], times[b + 1], values[b + 1], level) } else { times[n - 1] };
        report.peak_times.push(times[i]);
        report.peak_heights.push(h);
        report.prominences.push(prominence);
        report.peak_widths.push(t_right - t_left);
    }
    Ok(report)
}

/// Grid and thresholds of the light-cone analysis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CausalityConfig {
    pub x_points: usize,
    pub t_points: usize,
    /// Upper end of the time window, `[0, t_max]`.
    pub t_max: f64,
    /// Front threshold as a fraction of the map maximum.
    pub threshold: f64,
    /// Window used to fit the front speed.
    pub fit_window: (f64, f64),
}

impl Default for CausalityConfig {
    fn default() -> Self {
        Self { x_points: 401, t_points: 301, t_max: PI, threshold: 0.01, fit_window: (0.2 * PI, 0.9 * PI) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CausalityReport {
    pub mode_count: usize,
    pub front_times: Vec<f64>,
    pub front_positions: Vec<f64>,
    pub front_speed: f64,
    pub light_speed: f64,
    /// `∫∫_{|x| > ct} signal dx dt`
    pub leakage: f64,
    /// `∫∫ signal dx dt` over the whole window.
    pub total_signal: f64,
    pub leakage_fraction: f64,
}

/// Light-cone analysis of the branch-distinguishing signal
/// `(⟨E⟩_+ - ⟨E⟩_-)²` built from the Hermitian field in each branch.
/// `plus[t][x]`, `minus[t][x]`.
pub fn causality_from_fields(
    plus: &[Vec<f64>],
    minus: &[Vec<f64>],
    x_grid: &[f64],
    t_grid: &[f64],
    light_speed: f64,
    mode_count: usize,
    config: &CausalityConfig,
) -> Result<CausalityReport> {
    if plus.len() != t_grid.len() || minus.len() != t_grid.len() {
        return Err(invalid("branch fields must cover the time grid"));
    }
    if plus.iter().chain(minus).any(|r| r.len() != x_grid.len()) {
        return Err(invalid("branch fields must cover the position grid"));
    }
    let signal: Vec<Vec<f64>> = plus
        .iter()
        .zip(minus)
        .map(|(p, m)| p.iter().zip(m).map(|(a, b)| (a - b) * (a - b)).collect())
        .collect();
    let peak = signal.iter().flatten().cloned().fold(0.0, f64::max);
    let cut = config.threshold * peak;
    let front_positions: Vec<f64> = signal
        .iter()
        .map(|row| {
            x_grid.iter().zip(row).filter(|(_, s)| **s > cut).map(|(x, _)| x.abs()).fold(0.0, f64::max)
        })
        .collect();

    let (mut st, mut sx, mut stt, mut stx, mut n) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (t, x) in t_grid.iter().zip(&front_positions) {
        if *t > config.fit_window.0 && *t < config.fit_window.1 {
            st += t;
            sx += x;
            stt += t * t;
            stx += t * x;
            n += 1.0;
        }
    }
    let front_speed = if n >= 2.0 { (n * stx - st * sx) / (n * stt - st * st) } else { f64::NAN };

    let outside: Vec<f64> = t_grid
        .iter()
        .zip(&signal)
        .map(|(t, row)| {
            let masked: Vec<f64> =
                x_grid.iter().zip(row).map(|(x, s)| if x.abs() > light_speed * t { *s } else { 0.0 }).collect();
            trapezoid(x_grid, &masked)
        })
        .collect();
    let inside: Vec<f64> = signal.iter().map(|row| trapezoid(x_grid, row)).collect();
    let leakage = trapezoid(t_grid, &outside).max(0.0);
    let total_signal = trapezoid(t_grid, &inside);
    Ok(CausalityReport {
        mode_count,
        front_times: t_grid.to_vec(),
        front_positions,
        front_speed,
        light_speed,
        leakage,
        total_signal,
        leakage_fraction: if total_signal > 0.0 { leakage / total_signal } else { 0.0 },
    })
}

/// Light-cone analysis on the closed-form mean fields of both branches.
pub fn causality_analysis(params: &ModelParams, config: &CausalityConfig) -> Result<CausalityReport> {
    let x_grid = uniform_grid(-0.5, 0.5, config.x_points);
    let t_grid = uniform_grid(0.0, config.t_max, config.t_points);
    let field = |branch| {
        t_grid
            .iter()
            .map(|&t| {
                x_grid.iter().map(|&x| analytic::hermitian_field(x, t, branch, params)).collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()
    };
    let plus = field(Branch::Plus)?;
    let minus = field(Branch::Minus)?;
    let c = params.omega_c / (2.0 * PI);
    causality_from_fields(&plus, &minus, &x_grid, &t_grid, c, params.mode_count, config)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CausalitySweep {
    pub reports: Vec<CausalityReport>,
    pub single_mode: CausalityReport,
    /// Leakage fraction strictly decreasing along the swept mode counts.
    pub strictly_decreasing: bool,
}

pub fn causality_sweep(params: &ModelParams, mode_counts: &[usize], config: &CausalityConfig) -> Result<CausalitySweep> {
    let reports = mode_counts
        .iter()
        .map(|&m| causality_analysis(&params.with_modes(m), config))
        .collect::<Result<Vec<_>>>()?;
    let single_mode = causality_analysis(&params.with_modes(1), config)?;
    let strictly_decreasing = reports.windows(2).all(|w| w[1].leakage_fraction < w[0].leakage_fraction);
    Ok(CausalitySweep { reports, single_mode, strictly_decreasing })
}

/// Input to the bound-cloud extraction.
pub enum CloudSource<'a> {
    /// Star-basis ground-state correlations.
    Correlations(&'a Mat<C64>),
    /// Map of a stationary state; rows are averaged.
    Map(&'a FieldMap),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CloudProfile {
    pub x_grid: Vec<f64>,
    pub amplitude: Vec<f64>,
}

impl CloudProfile {
    /// Position of the largest intensity.
    pub fn peak_position(&self) -> f64 {
        let k = (0..self.amplitude.len()).max_by(|&a, &b| self.amplitude[a].total_cmp(&self.amplitude[b])).unwrap_or(0);
        self.x_grid[k]
    }
}

pub fn ground_cloud_extract(source: CloudSource<'_>, x_grid: &[f64]) -> Result<CloudProfile> {
    let amplitude = match source {
        CloudSource::Correlations(c) => field_profile(c, x_grid)?,
        CloudSource::Map(map) => {
            if map.x_grid != x_grid {
                return Err(invalid("map grid differs from the requested grid"));
            }
            if map.amplitude.is_empty() {
                return Err(invalid("empty field map"));
            }
            let rows = map.amplitude.len() as f64;
            (0..x_grid.len())
                .map(|k| map.amplitude.iter().map(|r| r[k]).collect::<CompensatedSum>().value() / rows)
                .collect()
        }
    };
    Ok(CloudProfile { x_grid: x_grid.to_vec(), amplitude })
}

/// Time-independent term `(g/ω_c)² [Σ_n cos 2πx(n+1)]²` on a grid.
pub fn analytic_cloud(params: &ModelParams, x_grid: &[f64]) -> Result<CloudProfile> {
    let amplitude = x_grid.iter().map(|&x| analytic::bound_field(x, params)).collect::<Result<Vec<_>>>()?;
    Ok(CloudProfile { x_grid: x_grid.to_vec(), amplitude })
}

/// Emitter disturbance caused by the returning wavefront.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceReport {
    /// Mean population over `[0.35, 0.65]` roundtrips.
    pub plateau: f64,
    /// Largest deviation from the plateau within `[0.35, 0.65]` roundtrips.
    pub quiet_deviation: f64,
    /// Largest deviation within `[0.9, 1.1]` roundtrips.
    pub return_deviation: f64,
}

impl DisturbanceReport {
    pub fn detected(&self, factor: f64) -> bool {
        self.return_deviation >= factor * self.quiet_deviation
    }
}

pub fn population_disturbance(times: &[f64], values: &[f64], roundtrip: f64) -> Result<DisturbanceReport> {
    let window = |a: f64, b: f64| -> Vec<f64> {
        times.iter().zip(values).filter(|(t, _)| **t >= a * roundtrip && **t <= b * roundtrip).map(|(_, v)| *v).collect()
    };
    let quiet = window(0.35, 0.65);
    let ret = window(0.9, 1.1);
    if quiet.is_empty() || ret.is_empty() {
        return Err(invalid("series must cover 0.35 to 1.1 roundtrips"));
    }
    let plateau = quiet.iter().sum::<f64>() / quiet.len() as f64;
    let dev = |v: &[f64]| v.iter().map(|x| (x - plateau).abs()).fold(0.0, f64::max);
    Ok(DisturbanceReport { plateau, quiet_deviation: dev(&quiet), return_deviation: dev(&ret) })
}
