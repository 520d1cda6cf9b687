//! Self-similar sets generated by equal-ratio homotheties, represented by
//! their depth-n cylinder covers.
//!
//! Covers of systems with rational parameters are generated in exact integer
//! arithmetic over a common denominator; floats only appear when the cover
//! is rasterized or when a parameter was given as a float.

use std::cmp::Ordering;
use std::fmt::Write as _;

use num_integer::Integer;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::geometry::{Angle, Point, Rect};
use crate::rational::{parse_real, to_f64, Real, Q};

/// Default cap on the number of boxes a cover may hold.
pub const DEFAULT_MAX_BOXES: u128 = 1 << 24;

const PAR_THRESHOLD: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoverDim {
    One,
    Two,
}

/// `x -> ratio * x + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homothety2 {
    ratio: f64,
    translation: Point,
}

impl Homothety2 {
    pub fn new(ratio: f64, translation: Point) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return domain(format!("homothety ratio {ratio} not in (0,1)"));
        }
        if !translation.x.is_finite() || !translation.y.is_finite() {
            return domain("non-finite translation");
        }
        Ok(Homothety2 { ratio, translation })
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn translation(&self) -> Point {
        self.translation
    }

    pub fn apply(&self, p: Point) -> Point {
        p * self.ratio + self.translation
    }
}

/// Exact parameters of an equal-ratio system. Coordinates are measured in
/// multiples of `unit` (1 for ordinary systems, `1/|(q,p)|` for systems
/// projected onto a rational direction).
#[derive(Debug, Clone, PartialEq)]
pub struct ExactIfs {
    pub ratio: Q,
    pub translations: Vec<[Q; 2]>,
    pub unit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IfsSystem {
    maps: Vec<Homothety2>,
    common_ratio: Option<f64>,
    dim: CoverDim,
    exact: Option<ExactIfs>,
}

impl IfsSystem {
    pub fn new(maps: Vec<Homothety2>) -> Result<Self> {
        Self::with_dim(maps, CoverDim::Two)
    }

    pub fn with_dim(maps: Vec<Homothety2>, dim: CoverDim) -> Result<Self> {
        if maps.is_empty() {
            return domain("IFS needs at least one map");
        }
        if dim == CoverDim::One && maps.iter().any(|m| m.translation.y != 0.0) {
            return domain("1-D system with nonzero y translation");
        }
        let r0 = maps[0].ratio;
        let common_ratio = maps.iter().all(|m| m.ratio == r0).then_some(r0);
        Ok(IfsSystem { maps, common_ratio, dim, exact: None })
    }

    /// Builds an equal-ratio system from exact rational parameters.
    pub fn from_exact(ratio: Q, translations: Vec<[Q; 2]>, dim: CoverDim) -> Result<Self> {
        Self::from_exact_with_unit(ratio, translations, dim, 1.0)
    }

    fn from_exact_with_unit(ratio: Q, translations: Vec<[Q; 2]>, dim: CoverDim, unit: f64) -> Result<Self> {
        let r = to_f64(ratio);
        let maps = translations
            .iter()
            .map(|t| Homothety2::new(r, Point::new(to_f64(t[0]) * unit, to_f64(t[1]) * unit)))
            .collect::<Result<Vec<_>>>()?;
        let mut sys = Self::with_dim(maps, dim)?;
        sys.exact = Some(ExactIfs { ratio, translations, unit });
        Ok(sys)
    }

    /// `{gamma x, gamma x + (1 - gamma)}` on the line.
    pub fn symmetric_cantor(gamma: Real) -> Result<Self> {
        check_gamma(gamma)?;
        match gamma {
            Real::Exact(g) => {
                let one = Q::from_integer(1);
                let z = Q::from_integer(0);
                Self::from_exact(g, vec![[z, z], [one - g, z]], CoverDim::One)
            }
            Real::Float(g) => Self::with_dim(
                vec![Homothety2::new(g, Point::ORIGIN)?, Homothety2::new(g, Point::new(1.0 - g, 0.0))?],
                CoverDim::One,
            ),
        }
    }

    /// The product system generating `C_gamma x C_gamma`.
    pub fn four_corner(gamma: Real) -> Result<Self> {
        check_gamma(gamma)?;
        match gamma {
            Real::Exact(g) => {
                let z = Q::from_integer(0);
                let o = Q::from_integer(1) - g;
                Self::from_exact(g, vec![[z, z], [z, o], [o, z], [o, o]], CoverDim::Two)
            }
            Real::Float(g) => {
                let o = 1.0 - g;
                let maps = [(0.0, 0.0), (0.0, o), (o, 0.0), (o, o)]
                    .iter()
                    .map(|&(x, y)| Homothety2::new(g, Point::new(x, y)))
                    .collect::<Result<Vec<_>>>()?;
                Self::new(maps)
            }
        }
    }

    pub fn maps(&self) -> &[Homothety2] {
        &self.maps
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn common_ratio(&self) -> Option<f64> {
        self.common_ratio
    }

    pub fn dim(&self) -> CoverDim {
        self.dim
    }

    pub fn exact(&self) -> Option<&ExactIfs> {
        self.exact.as_ref()
    }

    fn require_ratio(&self) -> Result<f64> {
        self.common_ratio
            .ok_or_else(|| Error::Unsupported("maps have different contraction ratios".into()))
    }

    /// Lower-left corner and side of the smallest square anchored at the
    /// translation minima that every map sends into itself.
    pub fn bounding_square(&self) -> Result<(Point, f64)> {
        let r = self.require_ratio()?;
        let (lo, hi) = translation_extent(&self.maps);
        let ext = (hi.x - lo.x).max(hi.y - lo.y);
        Ok((lo * (1.0 / (1.0 - r)), ext / (1.0 - r)))
    }

    /// Number of pairwise distinct maps.
    pub fn distinct_map_count(&self) -> usize {
        if let Some(ex) = &self.exact {
            let mut t = ex.translations.clone();
            t.sort();
            t.dedup();
            return t.len();
        }
        let mut t: Vec<(f64, f64, f64)> =
            self.maps.iter().map(|m| (m.ratio, m.translation.x, m.translation.y)).collect();
        t.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
        t.dedup();
        t.len()
    }

    /// One map per line: `ratio tx ty`. Exact systems are written as
    /// rationals so that they read back exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if self.dim == CoverDim::One {
            out.push_str("# dim=1\n");
        }
        match &self.exact {
            Some(ex) if ex.unit == 1.0 => {
                for t in &ex.translations {
                    let _ = writeln!(
                        out,
                        "{} {} {}",
                        Real::Exact(ex.ratio),
                        Real::Exact(t[0]),
                        Real::Exact(t[1])
                    );
                }
            }
            _ => {
                for m in &self.maps {
                    let _ = writeln!(out, "{:?} {:?} {:?}", m.ratio, m.translation.x, m.translation.y);
                }
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut dim = CoverDim::Two;
        let mut rows: Vec<[(f64, Option<Q>); 3]> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(c) = line.strip_prefix('#') {
                if c.trim().replace(' ', "") == "dim=1" {
                    dim = CoverDim::One;
                }
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 3 {
                return Err(Error::Parse { line: i + 1, msg: format!("expected `ratio tx ty`, got {line:?}") });
            }
            let mut row = [(0.0, None); 3];
            for (k, tok) in toks.iter().enumerate() {
                row[k] = parse_real(tok)
                    .ok_or_else(|| Error::Parse { line: i + 1, msg: format!("bad number {tok:?}") })?;
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Parse { line: 0, msg: "no maps".into() });
        }
        let all_exact = rows.iter().all(|r| r.iter().all(|c| c.1.is_some()));
        let same_ratio = rows.iter().all(|r| r[0].1 == rows[0][0].1);
        if all_exact && same_ratio {
            let ratio = rows[0][0].1.unwrap();
            if !(ratio > Q::from_integer(0) && ratio < Q::from_integer(1)) {
                return domain(format!("ratio {ratio} not in (0,1)"));
            }
            let tr = rows.iter().map(|r| [r[1].1.unwrap(), r[2].1.unwrap()]).collect();
            return Self::from_exact(ratio, tr, dim);
        }
        let maps = rows
            .iter()
            .map(|r| Homothety2::new(r[0].0, Point::new(r[1].0, r[2].0)))
            .collect::<Result<Vec<_>>>()?;
        Self::with_dim(maps, dim)
    }
}

fn check_gamma(gamma: Real) -> Result<()> {
    let g = gamma.value();
    if !(g > 0.0 && g <= 0.5) {
        return domain(format!("gamma {g} outside (0, 1/2]"));
    }
    Ok(())
}

fn translation_extent(maps: &[Homothety2]) -> (Point, Point) {
    let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for m in maps {
        lo.x = lo.x.min(m.translation.x);
        lo.y = lo.y.min(m.translation.y);
        hi.x = hi.x.max(m.translation.x);
        hi.y = hi.y.max(m.translation.y);
    }
    (lo, hi)
}

/// Box coordinates. Exact covers store integer numerators over a common
/// denominator; the real coordinate is `numerator / denom * unit`.
#[derive(Debug, Clone, PartialEq)]
pub enum Coords {
    Exact { denom: i64, side: i64, unit: f64, corners: Vec<[i64; 2]> },
    Float { side: f64, corners: Vec<Point> },
}

/// A depth-tagged set of equal squares (intervals in 1-D, with `y = 0`)
/// given by their lower-left corners.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxCover {
    dim: CoverDim,
    depth: u32,
    coords: Coords,
}

impl BoxCover {
    pub fn from_corners(dim: CoverDim, depth: u32, side: f64, mut corners: Vec<Point>) -> Result<Self> {
        if !(side >= 0.0 && side.is_finite()) {
            return domain(format!("box side {side} must be finite and nonnegative"));
        }
        if dim == CoverDim::One {
            for c in corners.iter_mut() {
                c.y = 0.0;
            }
        }
        sort_points(&mut corners);
        Ok(BoxCover { dim, depth, coords: Coords::Float { side, corners } })
    }

    /// A single box.
    pub fn single(corner: Point, side: f64) -> Result<Self> {
        Self::from_corners(CoverDim::Two, 0, side, vec![corner])
    }

    /// Grid squares of the given side meeting the closed disk.
    pub fn disk(center: Point, radius: f64, side: f64) -> Result<Self> {
        if !(radius > 0.0 && side > 0.0) {
            return domain("disk cover needs positive radius and side");
        }
        let n = (radius / side).ceil() as i64 + 1;
        let mut corners = Vec::new();
        for i in -n..n {
            for j in -n..n {
                let c = Point::new(center.x + i as f64 * side, center.y + j as f64 * side);
                if Rect::from_corner(c, side, side).min_dist(center) <= radius {
                    corners.push(c);
                }
            }
        }
        Self::from_corners(CoverDim::Two, 0, side, corners)
    }

    /// Squares of the given side centred at points spaced `side` apart
    /// along the segment `[a, b]`.
    pub fn segment(a: Point, b: Point, side: f64) -> Result<Self> {
        if !(side > 0.0) {
            return domain("segment cover needs positive side");
        }
        let len = a.dist(b);
        let n = (len / side).round().max(1.0) as usize;
        let half = Point::new(side / 2.0, side / 2.0);
        let corners = (0..n)
            .map(|k| {
                let t = (k as f64 + 0.5) / n as f64;
                a + (b - a) * t - half
            })
            .collect();
        Self::from_corners(CoverDim::Two, 0, side, corners)
    }

    pub fn dim(&self) -> CoverDim {
        self.dim
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn coords(&self) -> &Coords {
        &self.coords
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.coords, Coords::Exact { .. })
    }

    pub fn len(&self) -> usize {
        match &self.coords {
            Coords::Exact { corners, .. } => corners.len(),
            Coords::Float { corners, .. } => corners.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn side(&self) -> f64 {
        match &self.coords {
            Coords::Exact { denom, side, unit, .. } => *side as f64 / *denom as f64 * unit,
            Coords::Float { side, .. } => *side,
        }
    }

    pub fn corner(&self, i: usize) -> Point {
        match &self.coords {
            Coords::Exact { denom, unit, corners, .. } => {
                let s = unit / *denom as f64;
                Point::new(corners[i][0] as f64 * s, corners[i][1] as f64 * s)
            }
            Coords::Float { corners, .. } => corners[i],
        }
    }

    pub fn corners(&self) -> Vec<Point> {
        (0..self.len()).map(|i| self.corner(i)).collect()
    }

    pub fn rect(&self, i: usize) -> Rect {
        let s = self.side();
        let h = if self.dim == CoverDim::One { 0.0 } else { s };
        Rect::from_corner(self.corner(i), s, h)
    }

    pub fn bbox(&self) -> Option<Rect> {
        (0..self.len()).map(|i| self.rect(i)).reduce(|a, b| a.union(&b))
    }

    /// Sum of box lengths (1-D) or areas (2-D), ignoring overlaps.
    pub fn total_measure(&self) -> f64 {
        let s = self.side();
        match self.dim {
            CoverDim::One => s * self.len() as f64,
            CoverDim::Two => s * s * self.len() as f64,
        }
    }

    pub fn translate(&self, v: Point) -> BoxCover {
        let corners = self.corners().into_iter().map(|c| c + v).collect();
        BoxCover { dim: self.dim, depth: self.depth, coords: Coords::Float { side: self.side(), corners } }
    }

    /// CSV with header `x,y,side`.
    pub fn to_csv(&self) -> String {
        let s = self.side();
        let mut out = String::from("x,y,side\n");
        for i in 0..self.len() {
            let c = self.corner(i);
            let _ = writeln!(out, "{:?},{:?},{:?}", c.x, c.y, s);
        }
        out
    }
}

fn sort_points(v: &mut [Point]) {
    v.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
}

fn check_cap(n_maps: usize, depth: u32, cap: u128) -> Result<()> {
    let boxes = (n_maps as u128).checked_pow(depth).unwrap_or(u128::MAX);
    if boxes > cap {
        return Err(Error::DepthCap { boxes, cap });
    }
    Ok(())
}

/// Level-`depth` intervals of `C_gamma`.
pub fn cantor_intervals(gamma: Real, depth: u32) -> Result<BoxCover> {
    ifs_cover(&IfsSystem::symmetric_cantor(gamma)?, depth)
}

/// Level-`depth` squares of `C_gamma x C_gamma`.
pub fn four_corner_cover(gamma: Real, depth: u32) -> Result<BoxCover> {
    ifs_cover(&IfsSystem::four_corner(gamma)?, depth)
}

/// Images of the bounding square under all length-`depth` compositions,
/// deduplicated and sorted.
pub fn ifs_cover(system: &IfsSystem, depth: u32) -> Result<BoxCover> {
    ifs_cover_capped(system, depth, DEFAULT_MAX_BOXES)
}

pub fn ifs_cover_capped(system: &IfsSystem, depth: u32, cap: u128) -> Result<BoxCover> {
    let r = system.require_ratio()?;
    check_cap(system.len(), depth, cap)?;
    if let Some(ex) = &system.exact {
        if let Some(cover) = exact_cover(ex, system.dim, depth) {
            return Ok(cover);
        }
    }
    let (ll, side) = system.bounding_square()?;
    let corners = float_levels(system, vec![ll], depth);
    let side = side * r.powi(depth as i32);
    let mut cover = BoxCover::from_corners(system.dim, depth, side, corners)?;
    if let Coords::Float { corners, .. } = &mut cover.coords {
        corners.dedup();
    }
    Ok(cover)
}

/// Cover of a 1-D system started from an explicit initial interval instead
/// of the system's own bounding interval.
pub fn ifs_cover_from(system: &IfsSystem, depth: u32, start: f64, length: f64) -> Result<BoxCover> {
    let r = system.require_ratio()?;
    check_cap(system.len(), depth, DEFAULT_MAX_BOXES)?;
    let corners = float_levels(system, vec![Point::new(start, 0.0)], depth);
    let mut cover = BoxCover::from_corners(system.dim, depth, length * r.powi(depth as i32), corners)?;
    if let Coords::Float { corners, .. } = &mut cover.coords {
        corners.dedup();
    }
    Ok(cover)
}

fn float_levels(system: &IfsSystem, mut level: Vec<Point>, depth: u32) -> Vec<Point> {
    for _ in 0..depth {
        level = apply_all(system.maps(), &level);
    }
    level
}

fn apply_all(maps: &[Homothety2], level: &[Point]) -> Vec<Point> {
    if level.len() * maps.len() >= PAR_THRESHOLD {
        maps.par_iter().flat_map_iter(|m| level.iter().map(move |&p| m.apply(p))).collect()
    } else {
        maps.iter().flat_map(|m| level.iter().map(move |&p| m.apply(p))).collect()
    }
}

/// Integer parameters of an exact system: ratio `a/b`, translations
/// `c_i / d`, and the bounding square `(m b, ext b)` over `d (b - a)`.
struct IntSystem {
    a: i128,
    b: i128,
    c: Vec<[i128; 2]>,
    denom0: i128,
    ll0: [i128; 2],
    side0: i128,
}

impl IntSystem {
    fn new(ex: &ExactIfs) -> IntSystem {
        let a = *ex.ratio.numer() as i128;
        let b = *ex.ratio.denom() as i128;
        let d = ex
            .translations
            .iter()
            .flat_map(|t| t.iter())
            .fold(1i128, |acc, q| acc.lcm(&(*q.denom() as i128)));
        let c: Vec<[i128; 2]> = ex
            .translations
            .iter()
            .map(|t| [0, 1].map(|k| *t[k].numer() as i128 * (d / *t[k].denom() as i128)))
            .collect();
        let lo = [0, 1].map(|k| c.iter().map(|v| v[k]).min().unwrap());
        let hi = [0, 1].map(|k| c.iter().map(|v| v[k]).max().unwrap());
        let ext = (hi[0] - lo[0]).max(hi[1] - lo[1]);
        IntSystem { a, b, denom0: d * (b - a), ll0: lo.map(|m| m * b), side0: ext * b, c }
    }

    /// Denominator at `depth`, or `None` when coordinates may leave i64.
    fn denom_at(&self, depth: u32) -> Option<i128> {
        let den = self.denom0.checked_mul(self.b.checked_pow(depth)?)?;
        // corners lie in the bounding square: |coord| <= |ll| + side in units of denom0
        let reach = self.ll0.iter().map(|v| v.abs()).max().unwrap() + self.side0 + self.denom0;
        let bound = reach.checked_mul(self.b.checked_pow(depth)?)?;
        let limit = (i64::MAX / 4) as i128;
        (den <= limit && bound <= limit).then_some(den)
    }

    /// Numerators at level `k` from level `k - 1`, grouped by outermost map.
    fn step(&self, level: &[[i64; 2]], k: u32) -> Vec<[i64; 2]> {
        let bk = self.b.pow(k);
        let (a, b) = (self.a as i64, self.b);
        let shifts: Vec<[i64; 2]> =
            self.c.iter().map(|ci| [0, 1].map(|j| (ci[j] * (b - self.a) * bk) as i64)).collect();
        let map = |s: &[i64; 2], p: &[i64; 2]| [s[0] + a * p[0], s[1] + a * p[1]];
        if level.len() * shifts.len() >= PAR_THRESHOLD {
            shifts.par_iter().flat_map_iter(|s| level.iter().map(move |p| map(s, p))).collect()
        } else {
            shifts.iter().flat_map(|s| level.iter().map(move |p| map(s, p))).collect()
        }
    }
}

fn exact_cover(ex: &ExactIfs, dim: CoverDim, depth: u32) -> Option<BoxCover> {
    let sys = IntSystem::new(ex);
    let denom = sys.denom_at(depth)?;
    let mut level = vec![[sys.ll0[0] as i64, sys.ll0[1] as i64]];
    for k in 1..=depth {
        level = sys.step(&level, k);
    }
    let side = sys.a.pow(depth) * sys.side0;
    let mut corners = level;
    if dim == CoverDim::One {
        for c in corners.iter_mut() {
            c[1] = 0;
        }
    }
    if corners.len() >= PAR_THRESHOLD {
        corners.par_sort_unstable();
    } else {
        corners.sort_unstable();
    }
    corners.dedup();
    // reduce the common denominator
    let mut g = denom.gcd(&side);
    for c in &corners {
        if g == 1 {
            break;
        }
        g = g.gcd(&(c[0] as i128)).gcd(&(c[1] as i128));
    }
    if g > 1 {
        let g64 = g as i64;
        for c in corners.iter_mut() {
            c[0] /= g64;
            c[1] /= g64;
        }
    }
    Some(BoxCover {
        dim,
        depth,
        coords: Coords::Exact { denom: (denom / g) as i64, side: (side / g) as i64, unit: ex.unit, corners },
    })
}

/// `log N / -log lambda`.
pub fn similarity_dimension(system: &IfsSystem) -> Result<f64> {
    let r = system.require_ratio()?;
    Ok((system.len() as f64).ln() / -r.ln())
}

/// Checks that depth-`depth` boxes descending from distinct first-level
/// maps have pairwise disjoint interiors. Shared boundaries are allowed.
pub fn verify_ssc(system: &IfsSystem, depth: u32) -> Result<bool> {
    if depth == 0 {
        return domain("verify_ssc needs depth >= 1");
    }
    let r = system.require_ratio()?;
    check_cap(system.len(), depth, DEFAULT_MAX_BOXES)?;
    let one_d = system.dim == CoverDim::One;

    // Exact integer path when available.
    if let Some(ex) = &system.exact {
        let sys = IntSystem::new(ex);
        if sys.denom_at(depth).is_some() {
            let mut level = vec![[sys.ll0[0] as i64, sys.ll0[1] as i64]];
            for k in 1..depth {
                level = sys.step(&level, k);
            }
            let side = (sys.a.pow(depth) * sys.side0) as i64;
            let per_branch = level.len();
            let all = sys.step(&level, depth);
            let boxes: Vec<([i64; 2], usize)> =
                all.into_iter().enumerate().map(|(i, c)| (c, i / per_branch)).collect();
            return Ok(!branches_overlap(boxes, side, one_d));
        }
    }

    let (ll, side0) = system.bounding_square()?;
    let inner = float_levels(system, vec![ll], depth - 1);
    let side = side0 * r.powi(depth as i32);
    let boxes: Vec<([f64; 2], usize)> = system
        .maps()
        .iter()
        .enumerate()
        .flat_map(|(b, m)| inner.iter().map(move |&p| (m.apply(p), b)))
        .map(|(p, b)| ([p.x, p.y], b))
        .collect();
    Ok(!branches_overlap(boxes, side, one_d))
}

fn branches_overlap<T>(mut boxes: Vec<([T; 2], usize)>, side: T, one_d: bool) -> bool
where
    T: Copy + PartialOrd + std::ops::Add<Output = T> + Default,
{
    boxes.sort_by(|a, b| a.0[0].partial_cmp(&b.0[0]).unwrap_or(Ordering::Equal));
    let degenerate = side <= T::default();
    let overlaps = |lo1: T, lo2: T| {
        if degenerate {
            lo1 == lo2
        } else {
            lo1 < lo2 + side && lo2 < lo1 + side
        }
    };
    let mut active: Vec<usize> = Vec::new();
    for i in 0..boxes.len() {
        let (ci, bi) = boxes[i];
        active.retain(|&j| {
            let cj = boxes[j].0;
            if degenerate {
                cj[0] == ci[0]
            } else {
                cj[0] + side > ci[0]
            }
        });
        for &j in &active {
            let (cj, bj) = boxes[j];
            if bj != bi && overlaps(ci[0], cj[0]) && (one_d || overlaps(ci[1], cj[1])) {
                return true;
            }
        }
        active.push(i);
    }
    false
}

/// Projects every translation onto the direction of `angle`, keeping the
/// ratios and any duplicate maps. Rational directions of exact systems stay
/// exact, in units of `1/|(q,p)|`.
pub fn projected_ifs(system: &IfsSystem, angle: Angle) -> Result<IfsSystem> {
    system.require_ratio()?;
    if let (Some(ex), Some((q, p))) = (&system.exact, angle.integer_direction()) {
        let (qq, pq) = (Q::from_integer(q), Q::from_integer(p));
        let z = Q::from_integer(0);
        let tr = ex.translations.iter().map(|t| [qq * t[0] + pq * t[1], z]).collect();
        let unit = ex.unit / (q as f64).hypot(p as f64);
        return IfsSystem::from_exact_with_unit(ex.ratio, tr, CoverDim::One, unit);
    }
    let u = angle.unit();
    let maps = system
        .maps()
        .iter()
        .map(|m| Homothety2::new(m.ratio, Point::new(m.translation.dot(u), 0.0)))
        .collect::<Result<Vec<_>>>()?;
    IfsSystem::with_dim(maps, CoverDim::One)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CounterexampleMode {
    /// `lambda in (1/N, 1/(N-1))`: dimension above one, null projections.
    APrime,
    /// `lambda in (0, 1/N)`: dimension deficit of the sumset.
    BPrime,
}

#[derive(Debug, Clone)]
pub struct CounterexampleOptions {
    /// Number of maps; defaults to `2n` (at least 4 in mode a').
    pub maps: Option<usize>,
    /// Lattice step for translations; defaults to `1/(4N)`.
    pub lattice_step: Option<Q>,
    pub max_attempts: u64,
    pub seed: u64,
}

impl Default for CounterexampleOptions {
    fn default() -> Self {
        CounterexampleOptions { maps: None, lattice_step: None, max_attempts: 2_000_000, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct Counterexample {
    pub system: IfsSystem,
    /// For each angle, the indices of the two maps whose translations have
    /// equal projection onto that angle.
    pub pairs: Vec<(usize, usize)>,
    pub attempts: u64,
}

/// Equal-ratio SSC system with one designated pair of maps per angle whose
/// translations project to the same point, found by a seeded search over a
/// lattice of translations inside `[0, 1 - lambda]^2`.
pub fn theorem084_ifs(
    angles: &[Angle],
    lambda: Real,
    mode: CounterexampleMode,
    opts: &CounterexampleOptions,
) -> Result<Counterexample> {
    let n_angles = angles.len();
    if n_angles == 0 {
        return domain("at least one angle required");
    }
    let min_maps = match mode {
        CounterexampleMode::APrime => (2 * n_angles).max(4),
        CounterexampleMode::BPrime => 2 * n_angles,
    };
    let n = opts.maps.unwrap_or(min_maps);
    if n < 2 * n_angles {
        return domain(format!("{n} maps cannot hold {n_angles} designated pairs"));
    }
    let lam = lambda.value();
    let nf = n as f64;
    match mode {
        CounterexampleMode::APrime if !(lam > 1.0 / nf && lam < 1.0 / (nf - 1.0)) => {
            return domain(format!("mode a' needs lambda in (1/{n}, 1/{}), got {lam}", n - 1));
        }
        CounterexampleMode::BPrime if !(lam > 0.0 && lam < 1.0 / nf) => {
            return domain(format!("mode b' needs lambda in (0, 1/{n}), got {lam}"));
        }
        _ => {}
    }
    let step = opts.lattice_step.unwrap_or_else(|| Q::new(1, 4 * n as i64));
    let step_f = to_f64(step);
    if step_f <= 0.0 {
        return domain("lattice step must be positive");
    }
    let kmax = ((1.0 - lam) / step_f + 1e-12).floor() as i64;

    // Pair offsets along the direction perpendicular to each angle.
    let perps: Vec<PairOffset> = angles.iter().map(|a| PairOffset::new(*a)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut lattice: Vec<(i64, i64)> = (0..=kmax).flat_map(|i| (0..=kmax).map(move |j| (i, j))).collect();
    lattice.shuffle(&mut rng);
    let max_off = (1.0 / step_f).ceil() as i64;
    let mut offsets: Vec<i64> = (1..=max_off).flat_map(|k| [k, -k]).collect();
    offsets.shuffle(&mut rng);

    let mut search = Search {
        lam,
        step: step_f,
        n_pairs: n_angles,
        n_maps: n,
        lattice: &lattice,
        offsets: &offsets,
        perps: &perps,
        placed: Vec::with_capacity(n),
        attempts: 0,
        max_attempts: opts.max_attempts,
    };
    if !search.place(0)? {
        return Err(Error::ConstructionFailed {
            attempts: search.attempts,
            reason: "no lattice assignment satisfies strong separation".into(),
        });
    }
    let attempts = search.attempts;
    let placed = search.placed;

    let exact = lambda.exact().filter(|_| perps.iter().all(|p| p.exact.is_some()));
    let system = match exact {
        Some(lq) => {
            let tr = placed
                .iter()
                .map(|pl| {
                    let mut t = [step * Q::from_integer(pl.lattice.0), step * Q::from_integer(pl.lattice.1)];
                    if let Some((pi, k)) = pl.offset {
                        let (dx, dy) = perps[pi].exact.unwrap();
                        t[0] += step * Q::from_integer(k * dx);
                        t[1] += step * Q::from_integer(k * dy);
                    }
                    t
                })
                .collect();
            IfsSystem::from_exact(lq, tr, CoverDim::Two)?
        }
        None => IfsSystem::new(
            placed.iter().map(|pl| Homothety2::new(lam, pl.pos)).collect::<Result<Vec<_>>>()?,
        )?,
    };
    let pairs = (0..n_angles).map(|i| (2 * i, 2 * i + 1)).collect();
    Ok(Counterexample { system, pairs, attempts })
}

struct PairOffset {
    /// Unit perpendicular scaled so that lattice multiples stay exact.
    exact: Option<(i64, i64)>,
    vec: Point,
}

impl PairOffset {
    fn new(a: Angle) -> PairOffset {
        match a.integer_direction() {
            Some((q, p)) => {
                let g = q.gcd(&p).max(1);
                let (dx, dy) = (-p / g, q / g);
                PairOffset { exact: Some((dx, dy)), vec: Point::new(dx as f64, dy as f64) }
            }
            None => {
                let u = a.unit();
                PairOffset { exact: None, vec: Point::new(-u.y, u.x) }
            }
        }
    }
}

struct Placed {
    lattice: (i64, i64),
    offset: Option<(usize, i64)>,
    pos: Point,
}

struct Search<'a> {
    lam: f64,
    step: f64,
    n_pairs: usize,
    n_maps: usize,
    lattice: &'a [(i64, i64)],
    offsets: &'a [i64],
    perps: &'a [PairOffset],
    placed: Vec<Placed>,
    attempts: u64,
    max_attempts: u64,
}

impl Search<'_> {
    fn fits(&self, p: Point) -> bool {
        let eps = 1e-12;
        let hi = 1.0 - self.lam + eps;
        p.x >= -eps && p.y >= -eps && p.x <= hi && p.y <= hi
    }

    fn clear(&self, p: Point) -> bool {
        // closed squares strictly apart
        let sep = self.lam + 1e-12;
        self.placed.iter().all(|q| (q.pos.x - p.x).abs() >= sep || (q.pos.y - p.y).abs() >= sep)
    }

    fn tick(&mut self) -> Result<()> {
        self.attempts += 1;
        if self.attempts > self.max_attempts {
            return Err(Error::ConstructionFailed {
                attempts: self.attempts - 1,
                reason: "attempt budget exhausted".into(),
            });
        }
        Ok(())
    }

    fn place(&mut self, slot: usize) -> Result<bool> {
        if slot == self.n_maps {
            return Ok(true);
        }
        let lattice = self.lattice;
        if slot < 2 * self.n_pairs {
            // slots come in pairs; the odd slot is placed together with the even one
            let pi = slot / 2;
            for &(i, j) in lattice {
                let p1 = Point::new(i as f64 * self.step, j as f64 * self.step);
                self.tick()?;
                if !self.clear(p1) {
                    continue;
                }
                for &k in self.offsets {
                    self.tick()?;
                    let p2 = p1 + self.perps[pi].vec * (k as f64 * self.step);
                    if !self.fits(p2) || !self.clear(p2) || (p1.x - p2.x).abs().max((p1.y - p2.y).abs()) < self.lam + 1e-12 {
                        continue;
                    }
                    self.placed.push(Placed { lattice: (i, j), offset: None, pos: p1 });
                    self.placed.push(Placed { lattice: (i, j), offset: Some((pi, k)), pos: p2 });
                    if self.place(slot + 2)? {
                        return Ok(true);
                    }
                    self.placed.truncate(slot);
                }
            }
            Ok(false)
        } else {
            for &(i, j) in lattice {
                self.tick()?;
                let p = Point::new(i as f64 * self.step, j as f64 * self.step);
                if !self.clear(p) {
                    continue;
                }
                self.placed.push(Placed { lattice: (i, j), offset: None, pos: p });
                if self.place(slot + 1)? {
                    return Ok(true);
                }
                self.placed.pop();
            }
            Ok(false)
        }
    }
}
