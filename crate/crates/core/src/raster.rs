//! Occupancy grids for `A + Gamma`, and the random-circle Monte Carlo.

use std::fmt::Write as _;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::curves::CurveSample;
use crate::error::{domain, Error, Result};
use crate::geometry::{Point, Rect};
use crate::ifs::BoxCover;

pub const DEFAULT_MAX_CELLS: u128 = 1 << 26;

/// Boolean grid anchored at `window.min`; cell `(i, j)` is
/// `[x0 + i eps, x0 + (i+1) eps] x [y0 + j eps, y0 + (j+1) eps]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRaster {
    window: Rect,
    eps: f64,
    nx: usize,
    ny: usize,
    bits: Vec<u64>,
    slack: f64,
}

impl GridRaster {
    pub fn empty(window: Rect, eps: f64) -> Result<Self> {
        Self::empty_capped(window, eps, DEFAULT_MAX_CELLS)
    }

    pub fn empty_capped(window: Rect, eps: f64, max_cells: u128) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return domain(format!("eps {eps} must be positive"));
        }
        if !(window.width() > 0.0 && window.height() > 0.0) {
            return domain("window must have positive extent");
        }
        let nx = grid_len(window.width(), eps);
        let ny = grid_len(window.height(), eps);
        let cells = nx as u128 * ny as u128;
        if cells > max_cells {
            return Err(Error::GridTooLarge { cells, cap: max_cells });
        }
        let words = (nx * ny).div_ceil(64);
        Ok(GridRaster { window, eps, nx, ny, bits: vec![0; words], slack: eps * std::f64::consts::SQRT_2 })
    }

    /// Grid whose cell `(i, j)` is occupied iff `f(center)` holds.
    pub fn from_fn(window: Rect, eps: f64, f: impl Fn(Point) -> bool) -> Result<Self> {
        let mut g = Self::empty(window, eps)?;
        for j in 0..g.ny {
            for i in 0..g.nx {
                if f(g.cell_center(i, j)) {
                    g.set(i, j);
                }
            }
        }
        Ok(g)
    }

    pub fn window(&self) -> Rect {
        self.window
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    /// Every occupied cell lies within this distance of a point of the
    /// sumset being rasterized.
    pub fn slack(&self) -> f64 {
        self.slack
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        let k = j * self.nx + i;
        self.bits[k / 64] >> (k % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, j: usize) {
        let k = j * self.nx + i;
        self.bits[k / 64] |= 1 << (k % 64);
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Point {
        Point::new(
            self.window.min.x + (i as f64 + 0.5) * self.eps,
            self.window.min.y + (j as f64 + 0.5) * self.eps,
        )
    }

    pub fn cell_rect(&self, i: usize, j: usize) -> Rect {
        let c = Point::new(self.window.min.x + i as f64 * self.eps, self.window.min.y + j as f64 * self.eps);
        Rect::from_corner(c, self.eps, self.eps)
    }

    /// Cell containing `p`, if inside the window.
    pub fn cell_of(&self, p: Point) -> Option<(usize, usize)> {
        let fx = ((p.x - self.window.min.x) / self.eps).floor();
        let fy = ((p.y - self.window.min.y) / self.eps).floor();
        if fx < 0.0 || fy < 0.0 {
            return None;
        }
        let (i, j) = (fx as usize, fy as usize);
        (i < self.nx && j < self.ny).then_some((i, j))
    }

    /// Row-major iterator over occupied cells.
    pub fn occupied(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let nx = self.nx;
        self.bits.iter().enumerate().flat_map(move |(w, &word)| {
            let mut rest = word;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let b = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(w * 64 + b)
            })
            .map(move |k| (k % nx, k / nx))
        })
    }

    /// Binary PGM, top row first; 255 marks an occupied cell.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.nx, self.ny).into_bytes();
        out.reserve(self.nx * self.ny);
        for j in (0..self.ny).rev() {
            for i in 0..self.nx {
                out.push(if self.get(i, j) { 255 } else { 0 });
            }
        }
        out
    }
}

fn grid_len(extent: f64, eps: f64) -> usize {
    let n = (extent / eps).ceil();
    // absorb rounding when the extent is an exact multiple of eps
    let n = if ((n - 1.0) * eps - extent).abs() <= 1e-12 * extent.abs().max(1.0) { n - 1.0 } else { n };
    (n as usize).max(1)
}

/// Cells `[lo, hi]` along one axis that a closed interval `[a, b]` meets,
/// not counting a cell touched only at its left edge by `b`.
fn span(a: f64, b: f64, origin: f64, eps: f64, n: usize) -> Option<(usize, usize)> {
    let fa = ((a - origin) / eps).floor();
    let fb = ((b - origin) / eps).ceil() - 1.0;
    let fb = fb.max(fa);
    if fb < 0.0 || fa >= n as f64 {
        return None;
    }
    Some((fa.max(0.0) as usize, (fb as usize).min(n - 1)))
}

#[derive(Debug, Clone, Default)]
pub struct RasterOptions {
    pub window: Option<Rect>,
    pub max_cells: Option<u128>,
}

/// Window used when none is given: bounding box of `cover + sample`,
/// widened by the sample's Hausdorff bound and padded by `2 eps`.
pub fn auto_window(cover: &BoxCover, sample: &CurveSample, eps: f64) -> Result<Rect> {
    let cb = cover.bbox().ok_or_else(|| Error::Domain("empty cover".into()))?;
    let sb = sample.bbox().ok_or_else(|| Error::Domain("empty curve sample".into()))?;
    let r = Rect::new(cb.min + sb.min, cb.max + sb.max);
    Ok(r.pad(sample.hausdorff_bound + 2.0 * eps))
}

/// Marks every cell meeting `box + g` dilated by the sample's Hausdorff
/// bound, over all boxes and sample points `g`.
pub fn minkowski_raster(cover: &BoxCover, sample: &CurveSample, eps: f64, opts: &RasterOptions) -> Result<GridRaster> {
    if !(eps > 0.0 && eps.is_finite()) {
        return domain(format!("eps {eps} must be positive"));
    }
    if cover.is_empty() {
        return domain("empty cover");
    }
    if sample.points.is_empty() {
        return domain("empty curve sample");
    }
    if cover.side() > eps {
        log::warn!("cover side {} exceeds eps {eps}; raster will be coarse", cover.side());
    }
    if sample.max_gap > eps {
        log::warn!("sample gap {} exceeds eps {eps}", sample.max_gap);
    }
    let window = match opts.window {
        Some(w) => w,
        None => auto_window(cover, sample, eps)?,
    };
    let mut grid = GridRaster::empty_capped(window, eps, opts.max_cells.unwrap_or(DEFAULT_MAX_CELLS))?;
    let h = sample.hausdorff_bound;
    let s = cover.side();
    let sh = if cover.dim() == crate::ifs::CoverDim::One { 0.0 } else { s };
    let (nx, ny) = (grid.nx, grid.ny);
    let (ox, oy) = (window.min.x, window.min.y);
    let bits: Vec<AtomicU64> = grid.bits.iter().map(|_| AtomicU64::new(0)).collect();
    let corners = cover.corners();
    corners.par_iter().for_each(|c| {
        for g in &sample.points {
            let x0 = c.x + g.x - h;
            let y0 = c.y + g.y - h;
            let Some((i0, i1)) = span(x0, x0 + s + 2.0 * h, ox, eps, nx) else { continue };
            let Some((j0, j1)) = span(y0, y0 + sh + 2.0 * h, oy, eps, ny) else { continue };
            for j in j0..=j1 {
                set_range(&bits, j * nx + i0, j * nx + i1);
            }
        }
    });
    grid.bits = bits.into_iter().map(AtomicU64::into_inner).collect();
    grid.slack = (s + h + eps) * std::f64::consts::SQRT_2;
    Ok(grid)
}

fn set_range(bits: &[AtomicU64], lo: usize, hi: usize) {
    let (wl, wh) = (lo / 64, hi / 64);
    for w in wl..=wh {
        let a = if w == wl { lo % 64 } else { 0 };
        let b = if w == wh { hi % 64 } else { 63 };
        let mask = if b - a == 63 { u64::MAX } else { ((1u64 << (b - a + 1)) - 1) << a };
        if bits[w].load(Ordering::Relaxed) & mask != mask {
            bits[w].fetch_or(mask, Ordering::Relaxed);
        }
    }
}

pub fn box_count(raster: &GridRaster) -> u64 {
    raster.bits.iter().map(|w| w.count_ones() as u64).sum()
}

pub fn area_estimate(raster: &GridRaster) -> f64 {
    raster.eps * raster.eps * box_count(raster) as f64
}

/// A cell center whose closed `rho`-disk meets only occupied cells of the
/// window. Of all such centers, the one nearest the window center is
/// returned.
pub fn interior_probe(raster: &GridRaster, rho: f64) -> Result<Option<Point>> {
    let eps = raster.eps;
    if !(rho >= 3.0 * eps) {
        return domain(format!("rho {rho} below 3 eps = {}", 3.0 * eps));
    }
    // half-widths of the disk's cell footprint per row offset
    let reach = (rho / eps + 0.5).floor() as usize;
    let spans: Vec<(usize, usize)> = (0..=reach)
        .filter_map(|dy| {
            let vy = (dy as f64 * eps - eps / 2.0).max(0.0);
            (vy <= rho).then(|| (dy, ((rho * rho - vy * vy).sqrt() / eps + 0.5).floor() as usize))
        })
        .collect();
    let reach_y = spans.last().map(|s| s.0).unwrap_or(0);
    let reach_x = spans.iter().map(|s| s.1).max().unwrap_or(0);
    let (nx, ny) = (raster.nx, raster.ny);
    if nx <= 2 * reach_x || ny <= 2 * reach_y {
        return Ok(None);
    }
    let fits = |i: usize, j: usize| {
        raster.get(i, j)
            && spans
                .iter()
                .all(|&(dy, w)| raster.row_full(j + dy, i - w, i + w) && raster.row_full(j - dy, i - w, i + w))
    };
    // rows in order of distance from the middle row, columns outward from the
    // middle column; stop once no closer candidate can remain
    let (ic, jc) = (nx as f64 / 2.0 - 0.5, ny as f64 / 2.0 - 0.5);
    let mut rows: Vec<usize> = (reach_y..ny - reach_y).collect();
    rows.sort_by(|a, b| (*a as f64 - jc).abs().total_cmp(&(*b as f64 - jc).abs()).then(a.cmp(b)));
    let mut cols: Vec<usize> = (reach_x..nx - reach_x).collect();
    cols.sort_by(|a, b| (*a as f64 - ic).abs().total_cmp(&(*b as f64 - ic).abs()).then(a.cmp(b)));
    let mut best: Option<(f64, usize, usize)> = None;
    for &j in &rows {
        let dj = j as f64 - jc;
        if best.is_some_and(|b| dj * dj >= b.0) {
            break;
        }
        for &i in &cols {
            let di = i as f64 - ic;
            let d2 = di * di + dj * dj;
            if best.is_some_and(|b| d2 >= b.0) {
                break;
            }
            if fits(i, j) {
                best = Some((d2, i, j));
                break;
            }
        }
    }
    Ok(best.map(|(_, i, j)| raster.cell_center(i, j)))
}

impl GridRaster {
    fn row_full(&self, j: usize, i0: usize, i1: usize) -> bool {
        let (lo, hi) = (j * self.nx + i0, j * self.nx + i1);
        let (wl, wh) = (lo / 64, hi / 64);
        (wl..=wh).all(|w| {
            let a = if w == wl { lo % 64 } else { 0 };
            let b = if w == wh { hi % 64 } else { 63 };
            let mask = if b - a == 63 { u64::MAX } else { ((1u64 << (b - a + 1)) - 1) << a };
            self.bits[w] & mask == mask
        })
    }
}

/// Exports `eps,box_count,area` for one raster.
pub fn summary_csv(rows: &[(f64, u64, f64)]) -> String {
    let mut out = String::from("eps,box_count,area\n");
    for (e, n, a) in rows {
        let _ = writeln!(out, "{e:?},{n},{a:?}");
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub hits: u64,
    pub trials: u64,
    pub p_hat: f64,
    pub ci95_halfwidth: f64,
}

impl McEstimate {
    pub fn new(hits: u64, trials: u64) -> Self {
        let p = hits as f64 / trials as f64;
        McEstimate { hits, trials, p_hat: p, ci95_halfwidth: 1.96 * (p * (1.0 - p) / trials as f64).sqrt() }
    }

    pub fn to_csv(&self, seed: u64) -> String {
        format!(
            "seed,trials,hits,p_hat,ci95\n{seed},{},{},{:?},{:?}\n",
            self.trials, self.hits, self.p_hat, self.ci95_halfwidth
        )
    }
}

/// Bounding-volume tree over the boxes of a cover, answering "does the
/// circle of radius r about c meet any box".
pub struct BoxTree {
    nodes: Vec<Node>,
    rects: Vec<Rect>,
}

struct Node {
    bbox: Rect,
    start: usize,
    end: usize,
    children: Option<(usize, usize)>,
}

const LEAF: usize = 8;

impl BoxTree {
    pub fn new(cover: &BoxCover) -> Self {
        let mut rects: Vec<Rect> = (0..cover.len()).map(|i| cover.rect(i)).collect();
        if let Some(bb) = cover.bbox() {
            let (w, h) = (bb.width().max(1e-300), bb.height().max(1e-300));
            let key = |r: &Rect| {
                let c = r.center();
                let qx = (((c.x - bb.min.x) / w) * 65535.0) as u32;
                let qy = (((c.y - bb.min.y) / h) * 65535.0) as u32;
                morton(qx, qy)
            };
            rects.sort_by_cached_key(key);
        }
        let mut tree = BoxTree { nodes: Vec::new(), rects };
        if !tree.rects.is_empty() {
            tree.build(0, tree.rects.len());
        }
        tree
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let bbox = self.rects[start..end].iter().copied().reduce(|a, b| a.union(&b)).unwrap();
        let id = self.nodes.len();
        self.nodes.push(Node { bbox, start, end, children: None });
        if end - start > LEAF {
            let mid = (start + end) / 2;
            let l = self.build(start, mid);
            let r = self.build(mid, end);
            self.nodes[id].children = Some((l, r));
        }
        id
    }

    pub fn circle_hits(&self, c: Point, r: f64) -> bool {
        if self.nodes.is_empty() {
            return false;
        }
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let n = &self.nodes[id];
            if !n.bbox.meets_circle(c, r) {
                continue;
            }
            match n.children {
                Some((a, b)) => {
                    stack.push(a);
                    stack.push(b);
                }
                None => {
                    if self.rects[n.start..n.end].iter().any(|b| b.meets_circle(c, r)) {
                        return true;
                    }
                }
            }
        }
        false
    }
}

fn morton(x: u32, y: u32) -> u64 {
    fn spread(v: u32) -> u64 {
        let mut v = v as u64 & 0xffff_ffff;
        v = (v | (v << 16)) & 0x0000_ffff_0000_ffff;
        v = (v | (v << 8)) & 0x00ff_00ff_00ff_00ff;
        v = (v | (v << 4)) & 0x0f0f_0f0f_0f0f_0f0f;
        v = (v | (v << 2)) & 0x3333_3333_3333_3333;
        v = (v | (v << 1)) & 0x5555_5555_5555_5555;
        v
    }
    spread(x) | (spread(y) << 1)
}

const MC_CHUNK: u64 = 4096;

/// Fraction of uniformly drawn centers in `window` whose circle of the
/// given radius meets some box of the cover. Trials are split into fixed
/// chunks, each drawn from its own ChaCha stream, so the result does not
/// depend on thread count.
pub fn random_circle_mc(cover: &BoxCover, window: Rect, radius: f64, trials: u64, seed: u64) -> Result<McEstimate> {
    if trials == 0 {
        return domain("trials must be at least 1");
    }
    if !(radius > 0.0) {
        return domain("radius must be positive");
    }
    let tree = BoxTree::new(cover);
    let chunks = trials.div_ceil(MC_CHUNK);
    let hits: u64 = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k);
            let n = MC_CHUNK.min(trials - k * MC_CHUNK);
            (0..n)
                .filter(|_| {
                    let c = Point::new(
                        window.min.x + rng.random::<f64>() * window.width(),
                        window.min.y + rng.random::<f64>() * window.height(),
                    );
                    tree.circle_hits(c, radius)
                })
                .count() as u64
        })
        .sum();
    Ok(McEstimate::new(hits, trials))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::{polygon_ntheta, sample_curve, CurveSpec};
    use crate::ifs::four_corner_cover;
    use crate::rational::{Real, Q};

    fn unit() -> Rect {
        Rect::new(Point::ORIGIN, Point::new(1.0, 1.0))
    }

    #[test]
    fn full_square() {
        let g = GridRaster::from_fn(unit(), 0.125, |_| true).unwrap();
        assert_eq!(g.dims(), (8, 8));
        assert_eq!(box_count(&g), 64);
        assert_eq!(area_estimate(&g), 1.0);
        let e = GridRaster::empty(unit(), 0.125).unwrap();
        assert_eq!(box_count(&e), 0);
        assert_eq!(interior_probe(&e, 0.4).unwrap(), None);
        let mut one = e.clone();
        one.set(3, 5);
        assert_eq!(box_count(&one), 1);
        assert_eq!(one.occupied().collect::<Vec<_>>(), vec![(3, 5)]);
    }

    #[test]
    fn half_filled() {
        let g = GridRaster::from_fn(unit(), 1.0 / 16.0, |p| p.x < 0.5).unwrap();
        assert_eq!(area_estimate(&g), 0.5);
    }

    #[test]
    fn point_plus_circle_is_annulus() {
        let eps = 1.0 / 64.0;
        let cover = BoxCover::single(Point::ORIGIN, 0.0).unwrap();
        let s = sample_curve(&CurveSpec::unit_circle(), eps / 2.0).unwrap();
        let g = minkowski_raster(&cover, &s, eps, &RasterOptions::default()).unwrap();
        let n = box_count(&g);
        // cells meeting the exact circle, and cells meeting its slack band
        let mut inner = 0u64;
        let mut outer = 0u64;
        let (nx, ny) = g.dims();
        for j in 0..ny {
            for i in 0..nx {
                let r = g.cell_rect(i, j);
                if r.meets_circle(Point::ORIGIN, 1.0) {
                    inner += 1;
                }
                let (lo, hi) = (r.min_dist(Point::ORIGIN), r.max_dist(Point::ORIGIN));
                if lo <= 1.0 + g.slack() && hi >= 1.0 - g.slack() {
                    outer += 1;
                }
            }
        }
        assert!(inner <= n && n <= outer, "{inner} <= {n} <= {outer}");
        // a curve of length L meets about (4/pi) L / eps cells
        let expect = 8.0 / eps;
        assert!((n as f64 - expect).abs() < 0.4 * expect, "{n} vs {expect}");
        assert!(interior_probe(&g, 3.0 * eps).unwrap().is_none());
    }

    #[test]
    fn square_covers_its_block() {
        let eps = 0.125;
        let cover = BoxCover::single(Point::ORIGIN, 1.0).unwrap();
        let through_origin = CurveSpec::circle(Point::new(1.0, 0.0), 1.0).unwrap();
        let s = sample_curve(&through_origin, eps / 2.0).unwrap();
        let w = Rect::new(Point::new(-2.0, -2.0), Point::new(3.0, 3.0));
        let g = minkowski_raster(&cover, &s, eps, &RasterOptions { window: Some(w), ..Default::default() }).unwrap();
        let (i0, j0) = g.cell_of(Point::new(0.01, 0.01)).unwrap();
        for j in j0..j0 + 8 {
            for i in i0..i0 + 8 {
                assert!(g.get(i, j));
            }
        }
    }

    #[test]
    fn four_corner_plus_square_matches_union() {
        let eps = 1.0 / 32.0;
        let cover = four_corner_cover(Real::Exact(Q::new(1, 4)), 1).unwrap();
        let s = sample_curve(&polygon_ntheta(0.0), eps / 2.0).unwrap();
        let w = Rect::new(Point::new(-0.5, -0.5), Point::new(2.5, 2.5));
        let opts = RasterOptions { window: Some(w), ..Default::default() };
        let g = minkowski_raster(&cover, &s, eps, &opts).unwrap();
        // brute force: each translated perimeter, dilated by the box and the sampling bound
        let mut u = GridRaster::empty(w, eps).unwrap();
        for c in cover.corners() {
            let one = BoxCover::single(c, cover.side()).unwrap();
            let gi = minkowski_raster(&one, &s, eps, &opts).unwrap();
            for (i, j) in gi.occupied() {
                u.set(i, j);
            }
        }
        assert_eq!(g, GridRaster { slack: g.slack, ..u });
    }

    #[test]
    fn probe_finds_disk_interior() {
        let eps = 1.0 / 64.0;
        let w = Rect::new(Point::new(-1.5, -1.5), Point::new(1.5, 1.5));
        let g = GridRaster::from_fn(w, eps, |p| p.norm() <= 1.0).unwrap();
        let p = interior_probe(&g, 0.1).unwrap().expect("disk interior");
        assert!(p.norm() <= 0.9 - 0.1 + eps);
        let ring = GridRaster::from_fn(w, eps, |p| (p.norm() - 1.0).abs() < 0.05).unwrap();
        assert!(interior_probe(&ring, 0.1).unwrap().is_none());
        assert!(interior_probe(&g, 2.0 * eps).is_err());
    }

    #[test]
    fn mc_unit_disk() {
        let cover = BoxCover::disk(Point::ORIGIN, 1.0, 1.0 / 256.0).unwrap();
        let w = Rect::new(Point::new(-2.0, -2.0), Point::new(2.0, 2.0));
        let est = random_circle_mc(&cover, w, 1.0, 20_000, 7).unwrap();
        let want = std::f64::consts::PI / 4.0;
        assert!((est.p_hat - want).abs() < 3.0 * est.ci95_halfwidth + 0.01);
        assert_eq!(est, random_circle_mc(&cover, w, 1.0, 20_000, 7).unwrap());
        assert!(random_circle_mc(&cover, w, 1.0, 0, 7).is_err());
    }

    #[test]
    fn mc_point_target_small() {
        let cover = BoxCover::single(Point::ORIGIN, 1e-6).unwrap();
        let w = Rect::new(Point::new(-2.0, -2.0), Point::new(2.0, 2.0));
        let est = random_circle_mc(&cover, w, 1.0, 10_000, 1).unwrap();
        assert!(est.p_hat < 0.001);
    }

    #[test]
    fn pgm_header() {
        let g = GridRaster::from_fn(unit(), 0.25, |p| p.y > 0.5).unwrap();
        let pgm = g.to_pgm();
        assert!(pgm.starts_with(b"P5\n4 4\n255\n"));
        assert_eq!(pgm.len(), 11 + 16);
        assert_eq!(pgm[11], 255);
        assert_eq!(pgm[11 + 15], 0);
    }
}
