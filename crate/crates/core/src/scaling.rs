//! Log-log fits over epsilon ladders, area-trend verdicts, and the Monte
//! Carlo Riesz energy.

use std::fmt;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::geometry::Point;
use crate::ifs::IfsSystem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderRow {
    pub eps: f64,
    pub box_count: u64,
    pub area: f64,
}

impl LadderRow {
    pub fn new(eps: f64, box_count: u64) -> Self {
        LadderRow { eps, box_count, area: eps * eps * box_count as f64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingLadder {
    rows: Vec<LadderRow>,
}

impl ScalingLadder {
    pub fn new(rows: Vec<LadderRow>) -> Result<Self> {
        for w in rows.windows(2) {
            if !(w[1].eps < w[0].eps) {
                return domain("ladder eps must be strictly decreasing");
            }
        }
        if rows.iter().any(|r| !(r.eps > 0.0)) {
            return domain("ladder eps must be positive");
        }
        Ok(ScalingLadder { rows })
    }

    pub fn from_counts(pairs: &[(f64, u64)]) -> Result<Self> {
        Self::new(pairs.iter().map(|&(e, n)| LadderRow::new(e, n)).collect())
    }

    /// Rows with explicit areas, for synthetic area trends.
    pub fn from_areas(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            pairs
                .iter()
                .map(|&(e, a)| LadderRow { eps: e, box_count: (a / (e * e)).round() as u64, area: a })
                .collect(),
        )
    }

    pub fn rows(&self) -> &[LadderRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("eps,box_count,area\n");
        for r in &self.rows {
            let _ = writeln!(out, "{:?},{},{:?}", r.eps, r.box_count, r.area);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        let mut header = false;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            if !header {
                header = true;
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            let bad = |m: &str| Error::Parse { line: i + 1, msg: m.to_string() };
            if f.len() != 3 {
                return Err(bad("expected eps,box_count,area"));
            }
            rows.push(LadderRow {
                eps: f[0].trim().parse().map_err(|_| bad("bad eps"))?,
                box_count: f[1].trim().parse().map_err(|_| bad("bad box_count"))?,
                area: f[2].trim().parse().map_err(|_| bad("bad area"))?,
            });
        }
        Self::new(rows)
    }
}

/// Rows dropped from each end of a ladder before fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitWindow {
    pub drop_coarse: usize,
    pub drop_fine: usize,
}

impl Default for FitWindow {
    fn default() -> Self {
        FitWindow { drop_coarse: 1, drop_fine: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// First and last ladder indices used.
    pub window: (usize, usize),
}

impl DimFit {
    pub fn to_csv(&self) -> String {
        format!(
            "slope,intercept,r2,window\n{:?},{:?},{:?},{}-{}\n",
            self.slope, self.intercept, self.r_squared, self.window.0, self.window.1
        )
    }
}

/// Ordinary least squares `y = slope x + intercept`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) } else { 1.0 };
    (slope, intercept, r2)
}

fn window_range(len: usize, w: FitWindow) -> Result<(usize, usize)> {
    if len < 3 {
        return domain(format!("need at least 3 ladder rows, got {len}"));
    }
    let first = w.drop_coarse;
    let last = len.checked_sub(1 + w.drop_fine).filter(|&l| l > first);
    match last {
        Some(l) => Ok((first, l)),
        None => domain(format!("fit window {w:?} leaves fewer than 2 of {len} rows")),
    }
}

pub fn fit_box_dimension(ladder: &ScalingLadder) -> Result<DimFit> {
    fit_box_dimension_window(ladder, FitWindow::default())
}

/// Slope of `log N` against `log(1/eps)` over the window.
pub fn fit_box_dimension_window(ladder: &ScalingLadder, w: FitWindow) -> Result<DimFit> {
    let (first, last) = window_range(ladder.len(), w)?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, r) in ladder.rows[first..=last].iter().enumerate() {
        if r.box_count == 0 {
            log::warn!("ladder row {} has zero boxes; excluded from fit", first + i);
            continue;
        }
        xs.push(-r.eps.ln());
        ys.push((r.box_count as f64).ln());
    }
    if xs.len() < 2 {
        return domain("fewer than 2 usable rows after excluding empty ones");
    }
    let (slope, intercept, r_squared) = least_squares(&xs, &ys);
    Ok(DimFit { slope, intercept, r_squared, window: (first, last) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Positive,
    Zero,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Positive => "positive",
            Verdict::Zero => "zero",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrendThresholds {
    pub tau_pos: f64,
    pub tau_zero: f64,
    pub window: FitWindow,
}

impl Default for TrendThresholds {
    fn default() -> Self {
        TrendThresholds { tau_pos: 0.1, tau_zero: 0.15, window: FitWindow::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendVerdict {
    pub verdict: Verdict,
    /// `|A_last - A_prev| / A_prev`.
    pub last_change: f64,
    /// Fitted exponent in `area ~ eps^beta`.
    pub beta: f64,
    pub r_squared: f64,
    /// Area decreases strictly from each rung to the next.
    pub strictly_decreasing: bool,
    pub thresholds: TrendThresholds,
}

pub fn classify_area_trend(ladder: &ScalingLadder) -> Result<TrendVerdict> {
    classify_area_trend_with(ladder, TrendThresholds::default())
}

/// Positive when the final area change is below `tau_pos`; otherwise zero
/// when the fitted decay exponent exceeds `tau_zero`; otherwise
/// inconclusive.
pub fn classify_area_trend_with(ladder: &ScalingLadder, t: TrendThresholds) -> Result<TrendVerdict> {
    let rows = ladder.rows();
    if rows.len() < 4 {
        return domain(format!("need at least 4 ladder rows, got {}", rows.len()));
    }
    let (first, last) = window_range(rows.len(), t.window)?;
    let (prev, fin) = (rows[rows.len() - 2].area, rows[rows.len() - 1].area);
    let last_change = if prev > 0.0 { (fin - prev).abs() / prev } else { f64::INFINITY };
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for r in &rows[first..=last] {
        if r.area > 0.0 {
            xs.push(r.eps.ln());
            ys.push(r.area.ln());
        }
    }
    if xs.len() < 2 {
        return domain("fewer than 2 rows with positive area");
    }
    let (beta, _, r_squared) = least_squares(&xs, &ys);
    let verdict = if last_change < t.tau_pos {
        Verdict::Positive
    } else if beta > t.tau_zero {
        Verdict::Zero
    } else {
        Verdict::Inconclusive
    };
    let strictly_decreasing = rows.windows(2).all(|w| w[1].area < w[0].area);
    Ok(TrendVerdict { verdict, last_change, beta, r_squared, strictly_decreasing, thresholds: t })
}

/// Source of i.i.d. points from a probability measure.
pub trait PointSampler: Sync {
    fn sample(&self, rng: &mut ChaCha8Rng) -> Point;
}

/// Uniform measure on `[a, b] x {0}`.
#[derive(Debug, Clone, Copy)]
pub struct UniformInterval {
    pub a: f64,
    pub b: f64,
}

impl PointSampler for UniformInterval {
    fn sample(&self, rng: &mut ChaCha8Rng) -> Point {
        Point::new(self.a + (self.b - self.a) * rng.random::<f64>(), 0.0)
    }
}

/// Natural self-similar measure of an equal-ratio IFS: each map is chosen
/// with probability `1/N`, digits drawn until the cylinder is below float
/// resolution.
#[derive(Debug, Clone)]
pub struct IfsMeasure {
    translations: Vec<Point>,
    ratio: f64,
    digits: u32,
    anchor: Point,
}

impl IfsMeasure {
    pub fn new(system: &IfsSystem) -> Result<Self> {
        let ratio = system
            .common_ratio()
            .ok_or_else(|| Error::Unsupported("natural measure needs equal ratios".into()))?;
        let translations: Vec<Point> = system.maps().iter().map(|m| m.translation()).collect();
        let (_, side) = system.bounding_square()?;
        let scale = side.max(1e-300);
        let digits = ((1e-17f64.ln() - scale.ln()) / ratio.ln()).ceil().max(1.0) as u32;
        // fixed point of the first map lies in the attractor
        let anchor = translations[0] * (1.0 / (1.0 - ratio));
        Ok(IfsMeasure { translations, ratio, digits, anchor })
    }
}

impl PointSampler for IfsMeasure {
    fn sample(&self, rng: &mut ChaCha8Rng) -> Point {
        let n = self.translations.len();
        let mut p = Point::ORIGIN;
        let mut scale = 1.0;
        for _ in 0..self.digits {
            p = p + self.translations[rng.random_range(0..n)] * scale;
            scale *= self.ratio;
        }
        p + self.anchor * scale
    }
}

const ENERGY_BATCH: u64 = 8192;

/// Monte Carlo mean of `|x - y|^(-s)` over independent pairs. Batches use
/// disjoint ChaCha streams, so the value is independent of thread count.
pub fn riesz_energy_mc(sampler: &dyn PointSampler, s: f64, pairs: u64, seed: u64) -> Result<f64> {
    riesz_energy_streams(sampler, s, pairs, seed, 0)
}

fn riesz_energy_streams(sampler: &dyn PointSampler, s: f64, pairs: u64, seed: u64, stream0: u64) -> Result<f64> {
    if !(s > 0.0 && s < 2.0) {
        return domain(format!("energy exponent {s} not in (0,2)"));
    }
    if pairs == 0 {
        return domain("pairs must be at least 1");
    }
    let batches = pairs.div_ceil(ENERGY_BATCH);
    let total: f64 = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream0 + b);
            let n = ENERGY_BATCH.min(pairs - b * ENERGY_BATCH);
            let mut acc = 0.0;
            for _ in 0..n {
                let d = loop {
                    let d = sampler.sample(&mut rng).dist(sampler.sample(&mut rng));
                    if d >= 1e-15 {
                        break d;
                    }
                };
                acc += d.powf(-s);
            }
            acc
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    Ok(total / pairs as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyDivergence {
    pub small: f64,
    pub large: f64,
    pub ratio: f64,
    pub diverging: bool,
}

/// Compares the estimate at `pairs` with one at `4 pairs` drawn from
/// separate streams; a ratio above 1.5 flags divergence.
pub fn energy_divergence(sampler: &dyn PointSampler, s: f64, pairs: u64, seed: u64) -> Result<EnergyDivergence> {
    let small = riesz_energy_streams(sampler, s, pairs, seed, 0)?;
    let offset = pairs.div_ceil(ENERGY_BATCH);
    let large = riesz_energy_streams(sampler, s, 4 * pairs, seed, offset)?;
    let ratio = large / small;
    Ok(EnergyDivergence { small, large, ratio, diverging: ratio > 1.5 })
}
