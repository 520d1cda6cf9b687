//! End-to-end experiments driven by a TOML config: sumset ladders,
//! projection ladders, Monte Carlo circles, slice-map audits and the
//! counterexample IFS builder.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::angle::{predict_sumset, AngleKind, ThetaSpec};
use crate::curves::{polygon_ntheta, sample_curve, CurveSpec};
use crate::error::{Error, Result};
use crate::geometry::{Angle, Point, Rect};
use crate::ifs::{
    cantor_intervals, four_corner_cover, ifs_cover, similarity_dimension, theorem084_ifs, verify_ssc, BoxCover,
    CounterexampleMode, CounterexampleOptions, IfsSystem,
};
use crate::projection::{
    count_growth_exponent, ladder_csv, projected_dimension, projection_ladder, rung, ProjectionRung, STABLE_TOL,
};
use crate::raster::{area_estimate, box_count, interior_probe, minkowski_raster, random_circle_mc, RasterOptions};
use crate::rational::{Real, Q};
use crate::scaling::{
    classify_area_trend_with, fit_box_dimension_window, DimFit, FitWindow, LadderRow, ScalingLadder, TrendThresholds,
    TrendVerdict,
};
use crate::slice::{
    circular_wedge_constant, lipschitz_audit, phi_alpha, psi_x, tau_inverse, tau_map, transversality_audit,
    AdmissiblePair, Branch, PolarAboutX, TransversalityOptions,
};

pub const DEFAULT_SEED: u64 = 1;

/// Environment variable that overrides the output directory.
pub const OUT_DIR_ENV: &str = "FRACTAL_SUMSET_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SetSpec {
    FourCorner { gamma: String },
    Cantor { gamma: String },
    IfsFile { path: PathBuf },
}

impl Default for SetSpec {
    fn default() -> Self {
        SetSpec::FourCorner { gamma: "1/4".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CurveConfig {
    Circle { center: [f64; 2], radius: f64 },
    Ntheta { angle: String },
    Polyline { vertices: Vec<[f64; 2]> },
    Polynomial { coeffs: Vec<f64>, domain: [f64; 2] },
}

impl Default for CurveConfig {
    fn default() -> Self {
        CurveConfig::Circle { center: [0.0, 0.0], radius: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LadderConfig {
    pub eps_start: f64,
    pub eps_stop: f64,
    pub eps_factor: f64,
    /// Curve sample gap as a fraction of eps.
    pub gap_fraction: f64,
    /// Fixed cover depth; by default the shallowest depth with side <= eps.
    pub depth: Option<u32>,
    /// `[xmin, ymin, xmax, ymax]`.
    pub window: Option<[f64; 4]>,
    pub max_cells: Option<u64>,
    pub write_pgm: bool,
}

impl Default for LadderConfig {
    fn default() -> Self {
        LadderConfig {
            eps_start: 1.0 / 16.0,
            eps_stop: 1.0 / 1024.0,
            eps_factor: 2.0,
            gap_fraction: 0.5,
            depth: None,
            window: None,
            max_cells: None,
            write_pgm: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectionConfig {
    pub angles: Vec<String>,
    pub max_depth: u32,
    pub probe_eps: f64,
    pub probe_rho: f64,
    pub probe_depth: u32,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        ProjectionConfig {
            angles: vec!["sqrt(2)".into(), "1/1".into(), "1/2".into()],
            max_depth: 8,
            probe_eps: 1.0 / 512.0,
            probe_rho: 1.0 / 32.0,
            probe_depth: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum McTarget {
    Disk,
    Set,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub target: McTarget,
    pub trials: u64,
    pub radius: f64,
    pub window: [f64; 4],
    /// Cover depths for the set target.
    pub depths: Vec<u32>,
    /// Box side of the disk target.
    pub disk_side: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            target: McTarget::Disk,
            trials: 100_000,
            radius: 1.0,
            window: [-2.0, -2.0, 2.0, 2.0],
            depths: vec![4, 6],
            disk_side: 1.0 / 256.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditConfig {
    pub psi_samples: u64,
    pub slack: f64,
    pub pairs: u64,
    pub lambda_grid: usize,
    pub refine: usize,
    pub roundtrip_pairs: u64,
    pub lipschitz_pairs: u64,
    pub tau: f64,
    pub wedge_samples: u64,
    /// Curve for the transversality audit.
    pub curve: CurveConfig,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            psi_samples: 100_000,
            slack: 1e-9,
            pairs: 1000,
            lambda_grid: 256,
            refine: 4,
            roundtrip_pairs: 1000,
            lipschitz_pairs: 10_000,
            tau: 0.1,
            wedge_samples: 20_000,
            curve: CurveConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IfsBuildConfig {
    pub angles: Vec<String>,
    pub lambda: String,
    /// `a-prime` or `b-prime`.
    pub mode: String,
    pub maps: Option<usize>,
    pub lattice_step: Option<String>,
    pub max_attempts: u64,
    pub ssc_depth: u32,
    /// Projection ladder depths `first..=last`.
    pub ladder_depths: [u32; 2],
}

impl Default for IfsBuildConfig {
    fn default() -> Self {
        IfsBuildConfig {
            angles: vec!["1/2".into()],
            lambda: "3/10".into(),
            mode: "a-prime".into(),
            maps: Some(4),
            lattice_step: None,
            max_attempts: 2_000_000,
            ssc_depth: 3,
            ladder_depths: [2, 6],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub set: SetSpec,
    pub curve: CurveConfig,
    pub ladder: LadderConfig,
    pub fit: FitWindow,
    pub thresholds: TrendThresholds,
    pub projection: ProjectionConfig,
    pub mc: McConfig,
    pub audit: AuditConfig,
    pub ifs_build: IfsBuildConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: DEFAULT_SEED,
            out_dir: None,
            set: SetSpec::default(),
            curve: CurveConfig::default(),
            ladder: LadderConfig::default(),
            fit: FitWindow::default(),
            thresholds: TrendThresholds::default(),
            projection: ProjectionConfig::default(),
            mc: McConfig::default(),
            audit: AuditConfig::default(),
            ifs_build: IfsBuildConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the serialized config with the output directory removed.
    pub fn hash(&self) -> Result<String> {
        let mut c = self.clone();
        c.out_dir = None;
        Ok(hex::encode(Sha256::digest(c.to_toml()?.as_bytes())))
    }

    /// Output directory: env override, then config, then `out`.
    pub fn resolved_out_dir(&self) -> PathBuf {
        if let Some(v) = std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()) {
            return PathBuf::from(v);
        }
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    /// Eps values from `eps_start` down to `eps_stop`.
    pub fn eps_ladder(&self) -> Result<Vec<f64>> {
        let l = &self.ladder;
        if !(l.eps_start > 0.0 && l.eps_stop > 0.0 && l.eps_factor > 1.0) {
            return Err(Error::Config("need eps_start, eps_stop > 0 and eps_factor > 1".into()));
        }
        let mut out = Vec::new();
        let mut e = l.eps_start;
        while e >= l.eps_stop * (1.0 - 1e-9) {
            out.push(e);
            e /= l.eps_factor;
        }
        if out.len() < 4 {
            return Err(Error::Config(format!("eps ladder has {} rungs, need at least 4", out.len())));
        }
        Ok(out)
    }

    fn check_files(&self) -> Result<()> {
        if let SetSpec::IfsFile { path } = &self.set {
            if !path.exists() {
                return Err(Error::Config(format!("IFS file {} does not exist", path.display())));
            }
        }
        Ok(())
    }
}

/// Parses `p/q` (tangent), `sqrt(k)` (tangent `sqrt k`) or `rad:x`.
pub fn parse_angle(s: &str) -> Result<Angle> {
    let t = s.trim();
    let bad = || Error::Config(format!("cannot parse angle {s:?}"));
    if let Some(r) = t.strip_prefix("rad:") {
        return r.trim().parse::<f64>().map(Angle::Radians).map_err(|_| bad());
    }
    if let Some(inner) = t.strip_prefix("sqrt(").and_then(|r| r.strip_suffix(')')) {
        let k: f64 = inner.trim().parse().map_err(|_| bad())?;
        if !(k > 0.0) {
            return Err(bad());
        }
        return Ok(Angle::Radians(k.sqrt().atan()));
    }
    let (p, q) = match t.split_once('/') {
        Some((p, q)) => (p.trim().parse::<i64>().map_err(|_| bad())?, q.trim().parse::<i64>().map_err(|_| bad())?),
        None => (t.parse::<i64>().map_err(|_| bad())?, 1),
    };
    if q == 0 {
        return Err(bad());
    }
    Ok(Angle::from_tan(p, q))
}

fn parse_gamma(s: &str) -> Result<Real> {
    Real::parse(s).ok_or_else(|| Error::Config(format!("cannot parse {s:?} as a number")))
}

fn angle_label(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' { c } else { '_' }).collect()
}

/// Writes through a temporary file in the same directory and renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Files written by one experiment and its plain-text summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub summary: String,
    /// False when a hard bound was violated (audit only).
    pub ok: bool,
}

struct Writer {
    dir: PathBuf,
    stamp: String,
    files: Vec<PathBuf>,
}

impl Writer {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let dir = cfg.resolved_out_dir();
        fs::create_dir_all(&dir)?;
        Ok(Writer { dir, stamp: format!("# config_hash={} seed={}\n", cfg.hash()?, cfg.seed), files: Vec::new() })
    }

    fn csv(&mut self, name: &str, body: &str) -> Result<()> {
        self.raw(name, format!("{}{body}", self.stamp).as_bytes())
    }

    fn raw(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let p = self.dir.join(name);
        write_atomic(&p, bytes)?;
        self.files.push(p);
        Ok(())
    }

    fn finish(mut self, summary: String, ok: bool) -> Result<Report> {
        let text = format!("{}{summary}", self.stamp.trim_start_matches("# "));
        self.raw("summary.txt", text.as_bytes())?;
        Ok(Report { out_dir: self.dir, files: self.files, summary: text, ok })
    }
}

fn build_set(set: &SetSpec) -> Result<(Box<dyn Fn(u32) -> Result<BoxCover>>, f64)> {
    match set {
        SetSpec::FourCorner { gamma } => {
            let g = parse_gamma(gamma)?;
            Ok((Box::new(move |n| four_corner_cover(g, n)), g.value()))
        }
        SetSpec::Cantor { gamma } => {
            let g = parse_gamma(gamma)?;
            Ok((Box::new(move |n| cantor_intervals(g, n)), g.value()))
        }
        SetSpec::IfsFile { path } => {
            let text = fs::read_to_string(path)?;
            let sys = IfsSystem::from_text(&text)?;
            let ratio = sys.maps().iter().map(|m| m.ratio()).fold(0.0, f64::max);
            Ok((Box::new(move |n| ifs_cover(&sys, n)), ratio))
        }
    }
}

pub fn build_curve(c: &CurveConfig) -> Result<CurveSpec> {
    match c {
        CurveConfig::Circle { center, radius } => CurveSpec::circle(Point::new(center[0], center[1]), *radius),
        CurveConfig::Ntheta { angle } => Ok(polygon_ntheta(parse_angle(angle)?.radians())),
        CurveConfig::Polyline { vertices } => {
            CurveSpec::polyline(vertices.iter().map(|v| Point::new(v[0], v[1])).collect())
        }
        CurveConfig::Polynomial { coeffs, domain } => CurveSpec::polynomial_graph(coeffs.clone(), (domain[0], domain[1])),
    }
}

/// Shallowest depth whose cover side `ratio^n` is at most `eps`.
pub fn depth_for(ratio: f64, eps: f64) -> u32 {
    if !(ratio > 0.0 && ratio < 1.0) || eps >= 1.0 {
        return 0;
    }
    let n = (eps.ln() / ratio.ln() - 1e-9).ceil();
    n.max(0.0) as u32
}

fn window_of(w: &Option<[f64; 4]>) -> Option<Rect> {
    w.map(|w| Rect::new(Point::new(w[0], w[1]), Point::new(w[2], w[3])))
}

/// Prediction for the configured set and curve, when one is known.
pub fn sumset_prediction(set: &SetSpec, curve: &CurveConfig) -> String {
    let SetSpec::FourCorner { gamma } = set else { return "none".into() };
    let Ok(g) = parse_gamma(gamma) else { return "none".into() };
    match curve {
        CurveConfig::Circle { .. } => {
            let quarter = Q::new(1, 4);
            let cmp = match g.exact() {
                Some(q) => q.cmp(&quarter),
                None => g.value().total_cmp(&0.25),
            };
            match cmp {
                std::cmp::Ordering::Less => {
                    format!("dim={:.5},measure-zero", 1.0 - 2.0 * 2f64.ln() / g.value().ln())
                }
                std::cmp::Ordering::Equal => "dim=2,measure-zero".into(),
                std::cmp::Ordering::Greater if g.value() >= 1.0 / 3.0 => "measure-positive,interior-nonempty".into(),
                std::cmp::Ordering::Greater => "measure-positive".into(),
            }
        }
        CurveConfig::Ntheta { angle } if g.exact() == Some(Q::new(1, 4)) => match parse_angle(angle) {
            Ok(a) => angle_prediction(a).map(|(_, s)| s).unwrap_or_else(|_| "none".into()),
            Err(_) => "none".into(),
        },
        _ => "none".into(),
    }
}

fn angle_prediction(a: Angle) -> Result<(AngleKind, String)> {
    let spec = match a {
        Angle::Rational { p, q } => ThetaSpec::Rational { p, q },
        Angle::Radians(v) => ThetaSpec::Irrational { value: v },
    };
    let p = predict_sumset(spec)?;
    Ok((p.class, p.summary().to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SumsetOutcome {
    pub ladder: ScalingLadder,
    pub depths: Vec<u32>,
    pub fit: DimFit,
    pub verdict: TrendVerdict,
    pub prediction: String,
}

/// Rasterizes set + curve on every rung of the eps ladder and fits.
pub fn sumset_ladder(cfg: &ExperimentConfig) -> Result<(SumsetOutcome, Vec<crate::raster::GridRaster>)> {
    cfg.check_files()?;
    let eps = cfg.eps_ladder()?;
    let (cover_at, ratio) = build_set(&cfg.set)?;
    let curve = build_curve(&cfg.curve)?;
    let opts = RasterOptions { window: window_of(&cfg.ladder.window), max_cells: cfg.ladder.max_cells.map(u128::from) };
    let mut rows = Vec::new();
    let mut depths = Vec::new();
    let mut rasters = Vec::new();
    for &e in &eps {
        let n = cfg.ladder.depth.unwrap_or_else(|| depth_for(ratio, e));
        let cover = cover_at(n)?;
        let sample = sample_curve(&curve, e * cfg.ladder.gap_fraction)?;
        let r = minkowski_raster(&cover, &sample, e, &opts)?;
        log::info!("eps={e:e} depth={n} boxes={}", box_count(&r));
        rows.push(LadderRow { eps: e, box_count: box_count(&r), area: area_estimate(&r) });
        depths.push(n);
        rasters.push(r);
    }
    let ladder = ScalingLadder::new(rows)?;
    let fit = fit_box_dimension_window(&ladder, cfg.fit)?;
    let verdict = classify_area_trend_with(&ladder, cfg.thresholds)?;
    let prediction = sumset_prediction(&cfg.set, &cfg.curve);
    Ok((SumsetOutcome { ladder, depths, fit, verdict, prediction }, rasters))
}

pub fn run_sumset_experiment(cfg: &ExperimentConfig) -> Result<Report> {
    let (out, rasters) = sumset_ladder(cfg)?;
    let mut w = Writer::new(cfg)?;
    w.csv("ladder.csv", &out.ladder.to_csv())?;
    w.csv("fit.csv", &out.fit.to_csv())?;
    let v = &out.verdict;
    w.csv(
        "verdict.csv",
        &format!(
            "verdict,last_change,beta,r2,strictly_decreasing,prediction\n{},{:?},{:?},{:?},{},{}\n",
            v.verdict, v.last_change, v.beta, v.r_squared, v.strictly_decreasing, out.prediction
        ),
    )?;
    if cfg.ladder.write_pgm {
        for (k, r) in rasters.iter().enumerate() {
            w.raw(&format!("raster_{k:02}.pgm"), &r.to_pgm())?;
        }
    }
    let mut s = String::new();
    for (row, n) in out.ladder.rows().iter().zip(&out.depths) {
        let _ = writeln!(s, "eps={:e} depth={n} box_count={} area={:.6}", row.eps, row.box_count, row.area);
    }
    let _ = writeln!(s, "slope={:.4} r2={:.4}", out.fit.slope, out.fit.r_squared);
    let _ = writeln!(s, "measured: verdict={} last_change={:.4} beta={:.4}", v.verdict, v.last_change, v.beta);
    let _ = writeln!(s, "predicted: {}", out.prediction);
    w.finish(s, true)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AngleOutcome {
    pub label: String,
    pub angle: Angle,
    pub class: AngleKind,
    pub prediction: String,
    pub rungs: Vec<ProjectionRung>,
    /// Relative decrease of total length over the last four depths.
    pub length_decrease: f64,
    pub growth_exponent: Option<f64>,
    pub projected_dimension: Option<f64>,
    pub length_stable: bool,
    pub probe: Option<Point>,
}

/// Projection ladder of `C(gamma)` at one angle, plus an interior probe of
/// the rasterized `C(gamma) + N_theta`.
pub fn projection_outcome(cfg: &ExperimentConfig, label: &str) -> Result<AngleOutcome> {
    let SetSpec::FourCorner { gamma } = &cfg.set else {
        return Err(Error::Config("projection experiments need a four-corner set".into()));
    };
    let g = parse_gamma(gamma)?;
    let angle = parse_angle(label)?;
    let (class, prediction) = angle_prediction(angle)?;
    let pc = &cfg.projection;
    let rungs = projection_ladder(g, angle, pc.max_depth)?;
    let last = rungs.last().ok_or_else(|| Error::Config("empty projection ladder".into()))?;
    let back = &rungs[rungs.len().saturating_sub(5)];
    let length_decrease = 1.0 - last.total_length / back.total_length;
    let prev = &rungs[rungs.len().saturating_sub(2)];
    let length_stable = (last.total_length - prev.total_length).abs() <= STABLE_TOL * prev.total_length;
    let tail = &rungs[1.min(rungs.len() - 1)..];
    let growth_exponent = count_growth_exponent(tail);
    let projected_dimension = projected_dimension(tail);
    let cover = four_corner_cover(g, pc.probe_depth)?;
    let sample = sample_curve(&polygon_ntheta(angle.radians()), pc.probe_eps / 2.0)?;
    let raster = minkowski_raster(&cover, &sample, pc.probe_eps, &RasterOptions::default())?;
    let probe = interior_probe(&raster, pc.probe_rho)?;
    Ok(AngleOutcome {
        label: label.to_string(),
        angle,
        class,
        prediction,
        rungs,
        length_decrease,
        growth_exponent,
        projected_dimension,
        length_stable,
        probe,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_else(|| "nan".into())
}

pub fn run_projection_experiment(cfg: &ExperimentConfig) -> Result<Report> {
    let mut w = Writer::new(cfg)?;
    let mut table = String::from(
        "angle,class,prediction,final_length,length_decrease,growth_exponent,projected_dim,length_stable,probe_hit\n",
    );
    let mut s = String::new();
    for label in &cfg.projection.angles {
        let o = projection_outcome(cfg, label)?;
        let tag = angle_label(label);
        w.csv(&format!("projection_{tag}.csv"), &ladder_csv(&o.rungs))?;
        let fin = o.rungs.last().map(|r| r.total_length).unwrap_or(0.0);
        let _ = writeln!(
            table,
            "{},{},{},{:?},{:?},{},{},{},{}",
            tag,
            o.class,
            o.prediction,
            fin,
            o.length_decrease,
            opt(o.growth_exponent),
            opt(o.projected_dimension),
            o.length_stable,
            o.probe.is_some()
        );
        let _ = writeln!(
            s,
            "angle {label} ({}): predicted {}; final length {fin:.6}, decrease {:.3}, growth {}, probe {}",
            o.class,
            o.prediction,
            o.length_decrease,
            opt(o.growth_exponent),
            match o.probe {
                Some(p) => format!("hit at ({:.4}, {:.4})", p.x, p.y),
                None => "no hit".into(),
            }
        );
    }
    w.csv("projection_summary.csv", &table)?;
    w.finish(s, true)
}

#[derive(Debug, Clone, PartialEq)]
pub struct McOutcome {
    pub target: String,
    pub depth: Option<u32>,
    pub estimate: crate::raster::McEstimate,
}

pub fn mc_outcomes(cfg: &ExperimentConfig) -> Result<Vec<McOutcome>> {
    let m = &cfg.mc;
    let [x0, y0, x1, y1] = m.window;
    let window = Rect::new(Point::new(x0, y0), Point::new(x1, y1));
    match m.target {
        McTarget::Disk => {
            let cover = BoxCover::disk(Point::ORIGIN, 1.0, m.disk_side)?;
            let estimate = random_circle_mc(&cover, window, m.radius, m.trials, cfg.seed)?;
            Ok(vec![McOutcome { target: "disk".into(), depth: None, estimate }])
        }
        McTarget::Set => {
            let (cover_at, _) = build_set(&cfg.set)?;
            m.depths
                .iter()
                .map(|&n| {
                    let estimate = random_circle_mc(&cover_at(n)?, window, m.radius, m.trials, cfg.seed)?;
                    Ok(McOutcome { target: "set".into(), depth: Some(n), estimate })
                })
                .collect()
        }
    }
}

pub fn run_mc_circle(cfg: &ExperimentConfig) -> Result<Report> {
    let outs = mc_outcomes(cfg)?;
    let mut w = Writer::new(cfg)?;
    let mut csv = String::from("target,depth,seed,trials,hits,p_hat,ci95\n");
    let mut s = String::new();
    for o in &outs {
        let e = &o.estimate;
        let d = o.depth.map(|d| d.to_string()).unwrap_or_default();
        let _ = writeln!(csv, "{},{d},{},{},{},{:?},{:?}", o.target, cfg.seed, e.trials, e.hits, e.p_hat, e.ci95_halfwidth);
        let _ = writeln!(s, "{} depth={d}: p_hat={:.5} +/- {:.5}", o.target, e.p_hat, e.ci95_halfwidth);
    }
    w.csv("mc.csv", &csv)?;
    w.finish(s, true)
}

/// One line of the audit table.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditCheck {
    pub quantity: String,
    pub value: f64,
    pub samples: u64,
    pub pass: bool,
}

fn random_pair(rng: &mut ChaCha8Rng, tau: f64) -> AdmissiblePair {
    let x = Point::new(rng.random::<f64>(), rng.random::<f64>());
    let d = tau + (1.0 - 2.0 * tau) * (1e-6 + (1.0 - 2e-6) * rng.random::<f64>());
    AdmissiblePair::with_margin(x, x.x + d, tau).expect("sampled inside the margin")
}

/// Runs every slice-map check; `pass` is false on any bound violation.
pub fn audit_checks(cfg: &ExperimentConfig) -> Result<Vec<AuditCheck>> {
    let a = &cfg.audit;
    let seed = cfg.seed;
    let mut out = Vec::new();
    for b in Branch::ALL {
        let r = lipschitz_audit(b, a.psi_samples, seed, a.slack);
        let name = match b {
            Branch::Plus => "psi_bound_plus",
            Branch::Minus => "psi_bound_minus",
            Branch::InversePlus => "psi_bound_inverse_plus",
            Branch::InverseMinus => "psi_bound_inverse_minus",
        };
        out.push(AuditCheck { quantity: name.into(), value: r.violations as f64, samples: r.samples, pass: r.violations == 0 });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut radius_err = 0.0f64;
    for _ in 0..a.roundtrip_pairs {
        let u = PolarAboutX {
            center: Point::new(rng.random(), rng.random()),
            r: rng.random::<f64>(),
            phi: crate::slice::normalize_angle(std::f64::consts::PI * (2.0 * rng.random::<f64>() - 1.0)),
        };
        radius_err = radius_err.max((psi_x(&u)?.r - u.r).abs());
    }
    out.push(AuditCheck { quantity: "psi_radius_error".into(), value: radius_err, samples: a.roundtrip_pairs, pass: radius_err <= 1e-15 });

    let mut tau_err = 0.0f64;
    let mut h_err = 0.0f64;
    for _ in 0..a.roundtrip_pairs {
        let p = random_pair(&mut rng, 0.0);
        let (x, th) = tau_map(&p);
        let back = tau_inverse(x, th)?;
        tau_err = tau_err.max((back.alpha() - p.alpha()).abs()).max(back.x().dist(p.x()));
        let q = random_pair(&mut rng, a.tau);
        let h = crate::slice::h_map(&q)?;
        h_err = h_err.max((h.y - (phi_alpha(&q).y - 1.0)).abs());
    }
    out.push(AuditCheck { quantity: "tau_roundtrip_error".into(), value: tau_err, samples: a.roundtrip_pairs, pass: tau_err <= 1e-12 });
    out.push(AuditCheck { quantity: "h_offset_error".into(), value: h_err, samples: a.roundtrip_pairs, pass: h_err <= 1e-15 });

    let lip_bound = 1.0 + 1.0 / (1.0 - (1.0 - a.tau).powi(2)).sqrt();
    let mut lip = 0.0f64;
    for _ in 0..a.lipschitz_pairs {
        let p = random_pair(&mut rng, a.tau);
        let lo = p.alpha() - (1.0 - a.tau);
        let hi = p.alpha() - a.tau;
        let x2 = Point::new(lo + (hi - lo) * rng.random::<f64>(), rng.random::<f64>());
        let q = AdmissiblePair::with_margin(x2, p.alpha(), 0.0)?;
        let d = p.x().dist(x2);
        if d > 0.0 {
            lip = lip.max(phi_alpha(&p).dist(phi_alpha(&q)) / d);
        }
    }
    out.push(AuditCheck { quantity: "phi_lipschitz_ratio".into(), value: lip, samples: a.lipschitz_pairs, pass: lip <= lip_bound + 1e-9 });

    let base = AdmissiblePair::with_margin(Point::new(0.3, 0.4), 0.8, a.tau)?;
    let k_coarse = circular_wedge_constant(&base, 0.05, 0.05, a.wedge_samples, seed)?;
    let k_fine = circular_wedge_constant(&base, 0.0125, 0.0125, a.wedge_samples, seed)?;
    let k_ok = k_coarse.is_finite() && k_fine.is_finite() && k_fine <= 2.0 * k_coarse && k_coarse <= 2.0 * k_fine;
    out.push(AuditCheck { quantity: "wedge_constant_coarse".into(), value: k_coarse, samples: a.wedge_samples, pass: k_ok });
    out.push(AuditCheck { quantity: "wedge_constant_fine".into(), value: k_fine, samples: a.wedge_samples, pass: k_ok });

    let curve = build_curve(&a.curve)?;
    let topt = TransversalityOptions { lambda_grid: a.lambda_grid, ..Default::default() };
    match transversality_audit(&curve, a.pairs, topt, seed) {
        Ok(coarse) => {
            let fine_opts = TransversalityOptions { lambda_grid: a.lambda_grid * a.refine, ..topt };
            let fine = transversality_audit(&curve, a.pairs, fine_opts, seed)?;
            let finite = coarse.h1_const.is_finite() && coarse.h2_const.is_finite() && fine.h2_const.is_finite();
            let change = fine.h2_const.max(coarse.h2_const) / fine.h2_const.min(coarse.h2_const);
            out.push(AuditCheck { quantity: "h1_const".into(), value: coarse.h1_const, samples: coarse.pairs_used, pass: finite });
            out.push(AuditCheck { quantity: "h2_const".into(), value: coarse.h2_const, samples: coarse.pairs_used, pass: finite });
            out.push(AuditCheck { quantity: "h2_const_refined".into(), value: fine.h2_const, samples: fine.pairs_used, pass: finite });
            out.push(AuditCheck { quantity: "h2_refine_change".into(), value: change, samples: fine.pairs_used, pass: change < 2.0 });
        }
        Err(Error::Domain(msg)) => {
            log::warn!("transversality audit refused the curve: {msg}");
            out.push(AuditCheck { quantity: "transversality_domain_error".into(), value: f64::NAN, samples: 0, pass: true });
        }
        Err(e) => return Err(e),
    }
    Ok(out)
}

pub fn run_audit(cfg: &ExperimentConfig) -> Result<Report> {
    let checks = audit_checks(cfg)?;
    let mut w = Writer::new(cfg)?;
    let mut csv = String::from("quantity,value,samples,seed\n");
    let mut s = String::new();
    for c in &checks {
        let _ = writeln!(csv, "{},{:?},{},{}", c.quantity, c.value, c.samples, cfg.seed);
        let _ = writeln!(s, "{} {} = {:e}", if c.pass { "PASS" } else { "FAIL" }, c.quantity, c.value);
    }
    w.csv("audit.csv", &csv)?;
    let ok = checks.iter().all(|c| c.pass);
    w.finish(s, ok)
}

#[derive(Debug, Clone)]
pub struct IfsBuildOutcome {
    pub system: IfsSystem,
    pub pairs: Vec<(usize, usize)>,
    pub attempts: u64,
    pub mode: CounterexampleMode,
    pub angles: Vec<Angle>,
    pub similarity_dimension: f64,
    pub ssc: bool,
    /// Projection ladders at each designated angle.
    pub ladders: Vec<Vec<ProjectionRung>>,
    /// Box-count slope of the set plus a unit segment perpendicular to the
    /// first angle.
    pub sumset_dimension: Option<f64>,
}

pub fn parse_mode(s: &str) -> Result<CounterexampleMode> {
    match s.trim().to_ascii_lowercase().replace(['\'', '_', '′'], "-").as_str() {
        "a-prime" | "a-" | "a" => Ok(CounterexampleMode::APrime),
        "b-prime" | "b-" | "b" => Ok(CounterexampleMode::BPrime),
        _ => Err(Error::Config(format!("unknown mode {s:?}, expected a-prime or b-prime"))),
    }
}

pub fn ifs_build_outcome(cfg: &ExperimentConfig) -> Result<IfsBuildOutcome> {
    let b = &cfg.ifs_build;
    let angles = b.angles.iter().map(|s| parse_angle(s)).collect::<Result<Vec<_>>>()?;
    let lambda = parse_gamma(&b.lambda)?;
    let mode = parse_mode(&b.mode)?;
    let lattice_step = match &b.lattice_step {
        Some(s) => Some(parse_gamma(s)?.exact().ok_or_else(|| Error::Config("lattice step must be rational".into()))?),
        None => None,
    };
    let opts = CounterexampleOptions { maps: b.maps, lattice_step, max_attempts: b.max_attempts, seed: cfg.seed };
    let ce = theorem084_ifs(&angles, lambda, mode, &opts)?;
    let sys = &ce.system;
    let dim = similarity_dimension(sys)?;
    let ssc = verify_ssc(sys, b.ssc_depth)?;
    let [d0, d1] = b.ladder_depths;
    let ladders = angles
        .iter()
        .map(|&a| (d0..=d1).map(|n| Ok(rung(&ifs_cover(sys, n)?, a))).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let sumset_dimension = match mode {
        CounterexampleMode::BPrime => Some(segment_sumset_slope(cfg, sys, angles[0])?),
        CounterexampleMode::APrime => None,
    };
    Ok(IfsBuildOutcome {
        system: ce.system,
        pairs: ce.pairs,
        attempts: ce.attempts,
        mode,
        angles,
        similarity_dimension: dim,
        ssc,
        ladders,
        sumset_dimension,
    })
}

/// Box-count slope of `A + I` over the configured eps ladder, with `I` a
/// unit segment perpendicular to `angle`.
fn segment_sumset_slope(cfg: &ExperimentConfig, sys: &IfsSystem, angle: Angle) -> Result<f64> {
    let ratio = sys.common_ratio().ok_or_else(|| Error::Config("mixed ratios".into()))?;
    let u = angle.unit();
    let dir = Point::new(-u.y, u.x);
    let seg = CurveSpec::polyline(vec![Point::ORIGIN, dir])?;
    let mut rows = Vec::new();
    for e in cfg.eps_ladder()? {
        let cover = ifs_cover(sys, depth_for(ratio, e))?;
        let sample = sample_curve(&seg, e * cfg.ladder.gap_fraction)?;
        let r = minkowski_raster(&cover, &sample, e, &RasterOptions::default())?;
        rows.push((e, box_count(&r)));
    }
    Ok(fit_box_dimension_window(&ScalingLadder::from_counts(&rows)?, cfg.fit)?.slope)
}

pub fn run_ifs_build(cfg: &ExperimentConfig) -> Result<Report> {
    let o = ifs_build_outcome(cfg)?;
    let mut w = Writer::new(cfg)?;
    w.raw("ifs.txt", o.system.to_text().as_bytes())?;
    let mut pairs = String::from("angle,first,second\n");
    for (a, (i, j)) in cfg.ifs_build.angles.iter().zip(&o.pairs) {
        let _ = writeln!(pairs, "{},{i},{j}", angle_label(a));
    }
    w.csv("pairs.csv", &pairs)?;
    let mut s = String::new();
    let _ = writeln!(s, "maps={} attempts={}", o.system.len(), o.attempts);
    let _ = writeln!(s, "similarity_dimension={:.6} ssc={}", o.similarity_dimension, o.ssc);
    for (label, l) in cfg.ifs_build.angles.iter().zip(&o.ladders) {
        w.csv(&format!("projection_{}.csv", angle_label(label)), &ladder_csv(l))?;
        if let (Some(f), Some(g)) = (l.first(), l.last()) {
            let _ = writeln!(s, "angle {label}: length {:.6} -> {:.6}", f.total_length, g.total_length);
        }
    }
    if let Some(d) = o.sumset_dimension {
        let _ = writeln!(s, "sumset_dimension_estimate={d:.4} bound={:.4}", 1.0 + o.similarity_dimension);
    }
    w.finish(s, true)
}
