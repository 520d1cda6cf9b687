//! Slice maps onto vertical lines, the polar map `Psi_x`, wedge densities,
//! and empirical audits of their Lipschitz and transversality bounds.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curves::{curvature_class, CurvatureClass, CurveSpec};
use crate::error::{domain, Error, Result};
use crate::geometry::Point;
use crate::ifs::BoxCover;

/// A point `x` and a vertical line `x = alpha` met by the upper half of
/// the unit circle about `x`, optionally with margin `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissiblePair {
    x: Point,
    alpha: f64,
    tau: f64,
}

impl AdmissiblePair {
    pub fn new(x: Point, alpha: f64) -> Result<Self> {
        Self::with_margin(x, alpha, 0.0)
    }

    pub fn with_margin(x: Point, alpha: f64, tau: f64) -> Result<Self> {
        let d = alpha - x.x;
        if !(tau >= 0.0 && tau < 0.5) {
            return domain(format!("margin tau = {tau} must lie in [0, 1/2)"));
        }
        if !(d > tau) {
            return domain(format!("alpha - x1 = {d} must exceed {tau}"));
        }
        if !(d < 1.0 - tau) {
            return domain(format!("alpha - x1 = {d} must be below {}", 1.0 - tau));
        }
        Ok(AdmissiblePair { x, alpha, tau })
    }

    pub fn x(&self) -> Point {
        self.x
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    fn offset(&self) -> f64 {
        self.alpha - self.x.x
    }
}

/// Upper intersection of `x + S^1` with the line `x = alpha`.
pub fn phi_alpha(pair: &AdmissiblePair) -> Point {
    let d = pair.offset();
    Point::new(pair.alpha, pair.x.y + (1.0 - d * d).sqrt())
}

pub fn theta_of(pair: &AdmissiblePair) -> f64 {
    pair.offset().acos() + FRAC_PI_2
}

pub fn tau_map(pair: &AdmissiblePair) -> (Point, f64) {
    (pair.x, theta_of(pair))
}

pub fn tau_inverse(x: Point, theta: f64) -> Result<AdmissiblePair> {
    if !(theta > FRAC_PI_2 && theta < PI) {
        return domain(format!("theta = {theta} outside (pi/2, pi)"));
    }
    AdmissiblePair::new(x, x.x + (theta - FRAC_PI_2).cos())
}

/// `(alpha - arcsin(alpha - x1), x2 + sqrt(1 - (alpha - x1)^2) - 1)`.
pub fn h_map(pair: &AdmissiblePair) -> Result<Point> {
    if !(pair.tau > 0.0) {
        return domain("h_map needs a pair with positive margin");
    }
    let d = pair.offset();
    Ok(Point::new(pair.alpha - d.asin(), pair.x.y + (1.0 - d * d).sqrt() - 1.0))
}

/// `f'(x) + (alpha - x) / sqrt(1 - (alpha - x)^2)`.
pub fn varphi_derivative(fprime: f64, alpha_minus_x: f64) -> Result<f64> {
    let d = alpha_minus_x;
    if !(d > 0.0 && d < 1.0) {
        return domain(format!("alpha - x = {d} outside (0, 1)"));
    }
    Ok(fprime + d / (1.0 - d * d).sqrt())
}

/// Polar coordinates about `center`, angle in `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarAboutX {
    pub center: Point,
    pub r: f64,
    pub phi: f64,
}

impl PolarAboutX {
    pub fn of(center: Point, y: Point) -> Self {
        let d = y - center;
        PolarAboutX { center, r: d.norm(), phi: normalize_angle(d.angle()) }
    }

    pub fn point(&self) -> Point {
        self.center + Point::from_polar(self.r, self.phi)
    }

    /// In the closed upper half `phi in [0, pi)`.
    pub fn upper(&self) -> bool {
        self.phi >= 0.0 && self.phi < PI
    }
}

/// Maps an angle into `(-pi, pi]`.
pub fn normalize_angle(a: f64) -> f64 {
    let t = (a + PI).rem_euclid(2.0 * PI) - PI;
    if t <= -PI {
        t + 2.0 * PI
    } else {
        t
    }
}

/// Branch selector for `Psi_x` and its inverses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    Plus,
    Minus,
    InversePlus,
    InverseMinus,
}

impl Branch {
    pub const ALL: [Branch; 4] = [Branch::Plus, Branch::Minus, Branch::InversePlus, Branch::InverseMinus];

    /// Angle shift applied at radius `r`.
    fn shift(self, r: f64) -> f64 {
        let s = (r / 2.0).asin();
        match self {
            Branch::Plus | Branch::InverseMinus => -s,
            Branch::Minus | Branch::InversePlus => s,
        }
    }

    /// Angular domain `[lo, lo + pi)` of the branch at radius `r`.
    pub fn domain_start(self, r: f64) -> f64 {
        let s = (r / 2.0).asin();
        match self {
            Branch::Plus => 0.0,
            Branch::Minus => -PI,
            Branch::InversePlus => -s,
            Branch::InverseMinus => -PI + s,
        }
    }

    fn contains(self, u: &PolarAboutX) -> bool {
        let lo = self.domain_start(u.r);
        // angle relative to the branch start, in [0, 2 pi)
        let rel = (u.phi - lo).rem_euclid(2.0 * PI);
        rel < PI
    }
}

fn check_radius(u: &PolarAboutX) -> Result<()> {
    if !(u.r >= 0.0 && u.r <= 1.0) {
        return domain(format!("radius {} outside [0, 1]", u.r));
    }
    Ok(())
}

/// Rotates toward the tangent circle: `phi - arcsin(r/2)` on the upper half,
/// `phi + arcsin(r/2)` on the lower half. Radius is unchanged.
pub fn psi_x(u: &PolarAboutX) -> Result<PolarAboutX> {
    check_radius(u)?;
    if u.r == 0.0 {
        return Ok(*u);
    }
    let branch = if u.upper() { Branch::Plus } else { Branch::Minus };
    Ok(apply_branch(branch, u))
}

fn apply_branch(branch: Branch, u: &PolarAboutX) -> PolarAboutX {
    PolarAboutX { center: u.center, r: u.r, phi: normalize_angle(u.phi + branch.shift(u.r)) }
}

/// `|F(y1) - F(y2)| / |y1 - y2|` for the chosen branch `F`.
pub fn psi_ratio(y1: &PolarAboutX, y2: &PolarAboutX, branch: Branch) -> Result<f64> {
    check_radius(y1)?;
    check_radius(y2)?;
    if y1.center != y2.center {
        return domain("points use different centers");
    }
    let (p1, p2) = (y1.point(), y2.point());
    let d = p1.dist(p2);
    if d == 0.0 {
        return domain("coincident points");
    }
    for y in [y1, y2] {
        if !branch.contains(y) {
            return domain(format!("angle {} outside the {branch:?} domain", y.phi));
        }
    }
    let (f1, f2) = (apply_branch(branch, y1).point(), apply_branch(branch, y2).point());
    Ok(f1.dist(f2) / d)
}

/// `1 + 1.4 r + (2/3) r^2`.
pub fn lipschitz_bound(r2: f64) -> f64 {
    1.0 + 1.4 * r2 + 2.0 / 3.0 * r2 * r2
}

/// Wedge about `x` of radius `r` over the angles `I` and `I - pi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WedgeSpec {
    pub x: Point,
    pub interval: (f64, f64),
    pub r: f64,
}

impl WedgeSpec {
    pub fn new(x: Point, interval: (f64, f64), r: f64) -> Result<Self> {
        let (a, b) = interval;
        if !(a > 0.0 && b < PI && a < b) {
            return domain(format!("wedge interval [{a}, {b}] must be a nondegenerate part of (0, pi)"));
        }
        if !(r > 0.0 && r <= 1.0) {
            return domain(format!("wedge radius {r} outside (0, 1]"));
        }
        Ok(WedgeSpec { x, interval, r })
    }

    pub fn width(&self) -> f64 {
        self.interval.1 - self.interval.0
    }

    fn angle_in(&self, phi: f64) -> bool {
        let (a, b) = self.interval;
        (phi >= a && phi <= b) || (phi + PI >= a && phi + PI <= b)
    }

    pub fn contains(&self, y: Point) -> bool {
        let u = PolarAboutX::of(self.x, y);
        u.r <= self.r && (u.r == 0.0 || self.angle_in(u.phi))
    }

    /// Membership in the image of the wedge under the two branches of
    /// `Psi_x`.
    pub fn circular_contains(&self, y: Point) -> bool {
        let u = PolarAboutX::of(self.x, y);
        if u.r > self.r {
            return false;
        }
        if u.r == 0.0 {
            return true;
        }
        [(Branch::InversePlus, true), (Branch::InverseMinus, false)].iter().any(|&(b, upper)| {
            b.contains(&u) && {
                let pre = apply_branch(b, &u);
                pre.upper() == upper && self.angle_in(pre.phi)
            }
        })
    }
}

fn length_in(cover: &BoxCover, inside: impl Fn(Point) -> bool + Sync) -> f64 {
    let s = cover.side();
    let half = Point::new(s / 2.0, if cover.dim() == crate::ifs::CoverDim::One { 0.0 } else { s / 2.0 });
    let n = (0..cover.len()).into_par_iter().filter(|&i| inside(cover.corner(i) + half)).count();
    n as f64 * s
}

fn check_resolution(cover: &BoxCover, wedge: &WedgeSpec) -> Result<()> {
    if wedge.r < 3.0 * cover.side() {
        return domain(format!("wedge radius {} below 3 x cover side {}", wedge.r, cover.side()));
    }
    Ok(())
}

/// Cover-length proxy for `H^1(E cap W) / (2 r |I|)`.
pub fn wedge_density(cover: &BoxCover, wedge: &WedgeSpec) -> Result<f64> {
    check_resolution(cover, wedge)?;
    Ok(length_in(cover, |p| wedge.contains(p)) / (2.0 * wedge.r * wedge.width()))
}

/// Same proxy over the circular wedge.
pub fn circular_wedge_density(cover: &BoxCover, wedge: &WedgeSpec) -> Result<f64> {
    check_resolution(cover, wedge)?;
    Ok(length_in(cover, |p| wedge.circular_contains(p)) / (2.0 * wedge.r * wedge.width()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchAudit {
    pub branch: Branch,
    pub samples: u64,
    pub violations: u64,
    /// Largest `ratio^2 - bound` seen.
    pub max_excess: f64,
    pub max_ratio: f64,
}

/// Draws `samples` pairs in the branch domain about a random center (half
/// of them close pairs) and counts `ratio^2 >= bound + slack`.
pub fn lipschitz_audit(branch: Branch, samples: u64, seed: u64, slack: f64) -> BranchAudit {
    const CHUNK: u64 = 4096;
    let chunks = samples.div_ceil(CHUNK);
    let parts: Vec<(u64, f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k);
            let n = CHUNK.min(samples - k * CHUNK);
            let mut viol = 0u64;
            let mut excess = f64::NEG_INFINITY;
            let mut max_ratio = 0.0f64;
            let center = Point::new(rng.random::<f64>(), rng.random::<f64>());
            let mut done = 0;
            while done < n {
                let (y1, y2) = sample_pair(branch, center, &mut rng, done % 2 == 1);
                let Ok(ratio) = psi_ratio(&y1, &y2, branch) else { continue };
                done += 1;
                let e = ratio * ratio - lipschitz_bound(y1.r.max(y2.r));
                if e >= slack {
                    viol += 1;
                }
                excess = excess.max(e);
                max_ratio = max_ratio.max(ratio);
            }
            (viol, excess, max_ratio)
        })
        .collect();
    let violations = parts.iter().map(|p| p.0).sum();
    let max_excess = parts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let max_ratio = parts.iter().map(|p| p.2).fold(0.0, f64::max);
    BranchAudit { branch, samples, violations, max_excess, max_ratio }
}

fn sample_pair(branch: Branch, center: Point, rng: &mut ChaCha8Rng, close: bool) -> (PolarAboutX, PolarAboutX) {
    let draw = |rng: &mut ChaCha8Rng, r: f64| {
        let lo = branch.domain_start(r);
        // stay strictly inside [lo, lo + pi)
        let phi = lo + rng.random::<f64>() * PI * (1.0 - 1e-12);
        PolarAboutX { center, r, phi: normalize_angle(phi) }
    };
    let r1 = rng.random::<f64>().max(1e-9);
    let y1 = draw(rng, r1);
    if !close {
        let r2 = rng.random::<f64>().max(1e-9);
        return (y1, draw(rng, r2));
    }
    let scale = 10f64.powf(-1.0 - 6.0 * rng.random::<f64>());
    let r2 = (r1 + scale * (2.0 * rng.random::<f64>() - 1.0)).clamp(1e-9, 1.0);
    let phi2 = y1.phi + scale * (2.0 * rng.random::<f64>() - 1.0);
    (y1, PolarAboutX { center, r: r2, phi: normalize_angle(phi2) })
}

/// Empirical constant `K` with `|Phi(x) - Phi(z)| <= K r |I|` over points
/// `z` of the circular wedge about `x` whose angles are centred on
/// `theta(x, alpha)`.
pub fn circular_wedge_constant(pair: &AdmissiblePair, r: f64, width: f64, samples: u64, seed: u64) -> Result<f64> {
    let theta = theta_of(pair);
    let wedge = WedgeSpec::new(pair.x, (theta - width / 2.0, theta + width / 2.0), r)?;
    let base = phi_alpha(pair);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let rho = r * rng.random::<f64>().sqrt();
        let upper = rng.random::<bool>();
        let ang = wedge.interval.0 + width * rng.random::<f64>();
        let pre = PolarAboutX { center: pair.x, r: rho, phi: if upper { ang } else { normalize_angle(ang - PI) } };
        let z = psi_x(&pre)?.point();
        let zp = AdmissiblePair::new(z, pair.alpha)?;
        worst = worst.max(phi_alpha(&zp).dist(base));
    }
    Ok(worst / (r * width))
}

/// A short arc `t -> gamma(t)`, placed so that its starting tangent has
/// angle `3 pi / 4` and it crosses the x-axis at its parameter midpoint.
pub struct PlacedArc {
    eval: Box<dyn Fn(f64) -> Point + Send + Sync>,
    t0: f64,
    t1: f64,
    rotation: f64,
    shift: Point,
}

impl PlacedArc {
    pub fn point(&self, t: f64) -> Point {
        (self.eval)(t).rotate(self.rotation) + self.shift
    }

    /// Parameter at which the arc translated by `a` meets `y = lambda`,
    /// by bisection on the (monotone) height.
    fn crossing(&self, a: Point, lambda: f64) -> Option<f64> {
        let h = |t: f64| self.point(t).y + a.y - lambda;
        let (mut lo, mut hi) = (self.t0, self.t1);
        let (hl, hh) = (h(lo), h(hi));
        if hl.signum() == hh.signum() {
            return None;
        }
        let up = hh > hl;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if (h(mid) > 0.0) == up {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }

    /// `Phi_lambda(a)`: the x-coordinate where `a + arc` meets `y = lambda`.
    pub fn slice(&self, a: Point, lambda: f64) -> Option<f64> {
        self.crossing(a, lambda).map(|t| self.point(t).x + a.x)
    }

    /// Height range of the middle third of the arc.
    pub fn middle_third_heights(&self) -> (f64, f64) {
        let dt = self.t1 - self.t0;
        let (ya, yb) = (self.point(self.t0 + dt / 3.0).y, self.point(self.t0 + 2.0 * dt / 3.0).y);
        (ya.min(yb), ya.max(yb))
    }
}

/// Builds the placed arc of length about `len` from a curved spec.
pub fn place_arc(curve: &CurveSpec, len: f64) -> Result<PlacedArc> {
    if curvature_class(curve) != CurvatureClass::NonvanishingCurvature {
        return domain("transversality needs a curve that is not piecewise linear");
    }
    let (eval, t0, t1, tangent): (Box<dyn Fn(f64) -> Point + Send + Sync>, f64, f64, f64) = match curve {
        CurveSpec::Circle { center, radius } => {
            let (c, r) = (*center, *radius);
            let dt = len / r;
            (Box::new(move |t| c + Point::from_polar(r, t)), 0.0, dt, FRAC_PI_2)
        }
        CurveSpec::Graph(g) => {
            let f = g.f.clone();
            let (a, b) = g.domain;
            // start where the second difference is largest
            let n = 512;
            let hstep = (b - a) / n as f64;
            let x0 = (1..n)
                .map(|k| a + k as f64 * hstep)
                .max_by(|&x, &y| {
                    let d2 = |u: f64| ((f)(u + hstep) - 2.0 * (f)(u) + (f)(u - hstep)).abs();
                    d2(x).total_cmp(&d2(y))
                })
                .unwrap();
            let slope = (g.df)(x0);
            let dx = len / (1.0 + slope * slope).sqrt();
            let (x0, x1) = if x0 + dx <= b { (x0, x0 + dx) } else { ((b - dx).max(a), b) };
            let fx = g.f.clone();
            (Box::new(move |t| Point::new(t, (fx)(t))), x0, x1, (g.df)(x0).atan())
        }
        _ => return domain("transversality audit supports circles and graphs"),
    };
    let rotation = 3.0 * FRAC_PI_4 - tangent;
    let mid = eval(0.5 * (t0 + t1)).rotate(rotation);
    let shift = Point::new(-mid.x, -mid.y);
    Ok(PlacedArc { eval, t0, t1, rotation, shift })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransversalityOptions {
    /// Arc length of the sub-curve.
    pub arc_length: f64,
    /// Ball radius as a fraction of the arc length (must be below 1/100).
    pub ball_fraction: f64,
    /// Number of lambda grid points.
    pub lambda_grid: usize,
    /// Number of halvings in the `r` ladder.
    pub r_steps: u32,
}

impl Default for TransversalityOptions {
    fn default() -> Self {
        TransversalityOptions { arc_length: 0.2, ball_fraction: 0.009, lambda_grid: 256, r_steps: 8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransversalityReport {
    pub h1_const: f64,
    pub h2_const: f64,
    pub pairs_used: u64,
    pub pairs_skipped: u64,
    pub lambda0: f64,
    pub ball_radius: f64,
}

/// Empirical H1 and H2 constants for the slice family `Phi_lambda`,
/// `lambda in [0, lambda0]`, over random pairs in the ball `B(0, h)`.
pub fn transversality_audit(
    curve: &CurveSpec,
    pairs: u64,
    opts: TransversalityOptions,
    seed: u64,
) -> Result<TransversalityReport> {
    if pairs == 0 {
        return domain("pairs must be at least 1");
    }
    if !(opts.ball_fraction > 0.0 && opts.ball_fraction < 0.01) {
        return domain("ball radius must be below 1/100 of the arc length");
    }
    if opts.lambda_grid < 2 {
        return domain("lambda grid needs at least 2 points");
    }
    let arc = place_arc(curve, opts.arc_length)?;
    let h = opts.ball_fraction * opts.arc_length;
    let (ylo, yhi) = arc.middle_third_heights();
    // U = [0, lambda0] inside the middle-third heights for every shift in B
    let lambda0 = 0.9 * (yhi - h);
    if !(ylo + h < 0.0 && lambda0 > 0.0) {
        return Err(Error::Domain("middle third of the arc does not straddle the x-axis".into()));
    }
    let m = opts.lambda_grid;
    let step = lambda0 / m as f64;
    let grid: Vec<f64> = (0..m).map(|i| (i as f64 + 0.5) * step).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = Vec::with_capacity(pairs as usize);
    let in_ball = |rng: &mut ChaCha8Rng| loop {
        let p = Point::new(2.0 * rng.random::<f64>() - 1.0, 2.0 * rng.random::<f64>() - 1.0);
        if p.norm() < 1.0 {
            return p * h;
        }
    };
    for _ in 0..pairs {
        let a = in_ball(&mut rng);
        let b = in_ball(&mut rng);
        pts.push((a, b));
    }
    let results: Vec<Option<(f64, f64)>> = pts
        .par_iter()
        .map(|&(a, b)| {
            let dab = a.dist(b);
            if dab == 0.0 {
                return None;
            }
            let diffs: Vec<f64> = grid
                .iter()
                .map(|&l| match (arc.slice(a, l), arc.slice(b, l)) {
                    (Some(x), Some(y)) => (x - y).abs(),
                    _ => f64::INFINITY,
                })
                .collect();
            let h1 = diffs.iter().filter(|d| d.is_finite()).fold(0.0f64, |m, d| m.max(d / dab));
            let h2 = (0..=opts.r_steps)
                .map(|k| {
                    let r = dab * 0.5f64.powi(k as i32);
                    let count = diffs.iter().filter(|&&d| d < r).count();
                    count as f64 * step * dab / r
                })
                .fold(0.0f64, f64::max);
            Some((h1, h2))
        })
        .collect();
    let used: Vec<(f64, f64)> = results.iter().flatten().copied().collect();
    Ok(TransversalityReport {
        h1_const: used.iter().map(|u| u.0).fold(0.0, f64::max),
        h2_const: used.iter().map(|u| u.1).fold(0.0, f64::max),
        pairs_used: used.len() as u64,
        pairs_skipped: pairs - used.len() as u64,
        lambda0,
        ball_radius: h,
    })
}
