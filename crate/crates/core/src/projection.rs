//! Orthogonal projections of box covers as interval unions, and the
//! polygon-sumset report built on them.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::curves::CurveSpec;
use crate::error::{domain, Result};
use crate::geometry::{Angle, Rect};
use crate::ifs::{four_corner_cover, BoxCover, CoverDim, Coords};
use crate::rational::Real;
use crate::scaling::least_squares;

/// Merge tolerance for float endpoints.
pub const MERGE_TOL: f64 = 1e-12;

/// Integer endpoints of an exact union; real value is `n / denom * unit`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactIntervals {
    pub denom: i64,
    pub unit: f64,
    pub ends: Vec<(i128, i128)>,
}

/// Sorted, pairwise separated closed intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalUnion {
    intervals: Vec<(f64, f64)>,
    total_length: f64,
    exact: Option<ExactIntervals>,
}

impl IntervalUnion {
    /// Merges arbitrary closed intervals; touching or overlapping ones (within
    /// `MERGE_TOL`) are joined.
    pub fn from_intervals(mut v: Vec<(f64, f64)>) -> Self {
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(v.len());
        for (a, b) in v {
            match out.last_mut() {
                Some(last) if a <= last.1 + MERGE_TOL => last.1 = last.1.max(b),
                _ => out.push((a, b)),
            }
        }
        let total_length = out.iter().map(|(a, b)| b - a).sum();
        IntervalUnion { intervals: out, total_length, exact: None }
    }

    fn from_exact(mut v: Vec<(i128, i128)>, denom: i64, unit: f64) -> Self {
        v.sort_unstable();
        let mut out: Vec<(i128, i128)> = Vec::with_capacity(v.len());
        for (a, b) in v {
            match out.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => out.push((a, b)),
            }
        }
        let scale = unit / denom as f64;
        let total: i128 = out.iter().map(|(a, b)| b - a).sum();
        let intervals = out.iter().map(|&(a, b)| (a as f64 * scale, b as f64 * scale)).collect();
        IntervalUnion {
            intervals,
            total_length: total as f64 * scale,
            exact: Some(ExactIntervals { denom, unit, ends: out }),
        }
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn exact(&self) -> Option<&ExactIntervals> {
        self.exact.as_ref()
    }

    pub fn longest(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).fold(0.0, f64::max)
    }

    /// Number of `delta`-grid cells (anchored at 0) meeting the union.
    pub fn grid_count(&self, delta: f64) -> u64 {
        let mut count = 0u64;
        let mut last: Option<i64> = None;
        for &(a, b) in &self.intervals {
            let lo = (a / delta).floor() as i64;
            let hi = ((b / delta).ceil() as i64 - 1).max(lo);
            let lo = match last {
                Some(l) if lo <= l => l + 1,
                _ => lo,
            };
            if hi >= lo {
                count += (hi - lo + 1) as u64;
                last = Some(hi);
            }
        }
        count
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("left,right\n");
        for (a, b) in &self.intervals {
            let _ = writeln!(out, "{a:?},{b:?}");
        }
        out
    }
}

/// Projection of every box onto the direction of `angle`, merged. Exact
/// covers projected onto a rational direction keep integer endpoints.
pub fn project_cover(cover: &BoxCover, angle: Angle) -> IntervalUnion {
    if let (Coords::Exact { denom, side, unit, corners }, Some((q, p))) = (cover.coords(), angle.integer_direction()) {
        let (q, p) = (q as i128, p as i128);
        let s = *side as i128;
        let (lo_off, len) = match cover.dim() {
            CoverDim::Two => (s * (q.min(0) + p.min(0)), s * (q.abs() + p.abs())),
            CoverDim::One => (s * q.min(0), s * q.abs()),
        };
        let v = corners
            .iter()
            .map(|c| {
                let a = q * c[0] as i128 + p * c[1] as i128 + lo_off;
                (a, a + len)
            })
            .collect();
        let norm = (q as f64).hypot(p as f64);
        return IntervalUnion::from_exact(v, *denom, unit / norm);
    }
    let rects: Vec<Rect> = (0..cover.len()).map(|i| cover.rect(i)).collect();
    project_rects(&rects, angle)
}

/// Float projection of arbitrary rectangles.
pub fn project_rects(rects: &[Rect], angle: Angle) -> IntervalUnion {
    let u = angle.unit();
    let v = rects
        .iter()
        .map(|r| {
            let a = r.min.x * u.x + r.min.y * u.y;
            let w = r.width() * u.x;
            let h = r.height() * u.y;
            (a + w.min(0.0) + h.min(0.0), a + w.max(0.0) + h.max(0.0))
        })
        .collect();
    IntervalUnion::from_intervals(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionRung {
    pub depth: u32,
    pub total_length: f64,
    pub interval_count: usize,
    /// Length of one projected box at this depth.
    pub box_length: f64,
    pub longest: f64,
}

/// Projection of `C(gamma) x C(gamma)` at depths `1..=max_depth`.
pub fn projection_ladder(gamma: Real, angle: Angle, max_depth: u32) -> Result<Vec<ProjectionRung>> {
    if max_depth < 1 {
        return domain("max_depth must be at least 1");
    }
    (1..=max_depth)
        .map(|n| {
            let cover = four_corner_cover(gamma, n)?;
            Ok(rung(&cover, angle))
        })
        .collect()
}

pub fn rung(cover: &BoxCover, angle: Angle) -> ProjectionRung {
    let u = project_cover(cover, angle);
    let d = angle.unit();
    let s = cover.side();
    let box_length = match cover.dim() {
        CoverDim::Two => s * (d.x.abs() + d.y.abs()),
        CoverDim::One => s * d.x.abs(),
    };
    ProjectionRung {
        depth: cover.depth(),
        total_length: u.total_length(),
        interval_count: u.len(),
        box_length,
        longest: u.longest(),
    }
}

pub fn ladder_csv(rungs: &[ProjectionRung]) -> String {
    let mut out = String::from("depth,length,count\n");
    for r in rungs {
        let _ = writeln!(out, "{},{:?},{}", r.depth, r.total_length, r.interval_count);
    }
    out
}

/// Growth rate of the interval count: slope of `log count` per unit depth.
pub fn count_growth_exponent(rungs: &[ProjectionRung]) -> Option<f64> {
    if rungs.len() < 2 {
        return None;
    }
    let xs: Vec<f64> = rungs.iter().map(|r| r.depth as f64).collect();
    let ys: Vec<f64> = rungs.iter().map(|r| (r.interval_count as f64).ln()).collect();
    Some(least_squares(&xs, &ys).0)
}

/// Dimension estimate of a projection from a ladder: slope of
/// `log(length / box_length)` against `log(1 / box_length)`.
pub fn projected_dimension(rungs: &[ProjectionRung]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rungs
        .iter()
        .filter(|r| r.total_length > 0.0 && r.box_length > 0.0)
        .map(|r| (-r.box_length.ln(), (r.total_length / r.box_length).ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    Some(least_squares(&xs, &ys).0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideReport {
    /// Side direction, reduced to `[0, pi)`.
    pub alpha: f64,
    /// Direction the side projects onto, `alpha + pi/2`.
    pub alpha_perp: f64,
    pub rungs: Vec<ProjectionRung>,
    pub final_length: f64,
    pub dimension: f64,
    pub length_stable: bool,
    pub contains_interval: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolygonReport {
    pub sides: Vec<SideReport>,
    pub measure_positive: bool,
    pub interior_nonempty: bool,
    pub dimension: f64,
}

/// Relative final-step change below which a projection length counts as
/// stable.
pub const STABLE_TOL: f64 = 0.1;

/// Reduces `A + polygon` to projections of `A` onto the perpendiculars of
/// the polygon's sides. `covers` are successive covers of `A`, coarse to
/// fine. With a single cover, `A` is taken to be the union of its boxes.
pub fn polygon_sumset_report(covers: &[BoxCover], polygon: &CurveSpec) -> Result<PolygonReport> {
    let Some(alphas) = polygon.side_angles() else {
        return domain("polygon_sumset_report needs a polygonal curve");
    };
    if alphas.is_empty() {
        return domain("polygon has no sides of positive length");
    }
    side_reports(covers, alphas.iter().map(|&a| (a, Angle::Radians(a).perpendicular())).collect())
}

/// [`polygon_sumset_report`] for `N_theta`, keeping both projection
/// directions `theta + pi/2` and `theta` exact when `tan theta` is rational.
pub fn ntheta_sumset_report(covers: &[BoxCover], theta: Angle) -> Result<PolygonReport> {
    let t = theta.radians();
    let sides = vec![
        (t.rem_euclid(PI), theta.perpendicular()),
        ((t + FRAC_PI_2).rem_euclid(PI), theta),
    ];
    side_reports(covers, sides)
}

fn side_reports(covers: &[BoxCover], sides: Vec<(f64, Angle)>) -> Result<PolygonReport> {
    if covers.is_empty() {
        return domain("at least one cover required");
    }
    let sides: Vec<SideReport> = sides
        .into_iter()
        .map(|(alpha, perp)| {
            let rungs: Vec<ProjectionRung> = covers.iter().map(|c| rung(c, perp)).collect();
            let last = *rungs.last().unwrap();
            let (length_stable, contains_interval, dimension) = if rungs.len() == 1 {
                let pos = last.total_length > 0.0;
                (pos, pos, if pos { 1.0 } else { 0.0 })
            } else {
                let prev = rungs[rungs.len() - 2];
                let stable = prev.total_length > 0.0
                    && (last.total_length - prev.total_length).abs() / prev.total_length < STABLE_TOL;
                // a component that does not shrink with the boxes
                let persists =
                    last.longest > last.box_length && last.longest >= 0.5 * prev.longest;
                (stable, persists, projected_dimension(&rungs).unwrap_or(0.0).clamp(0.0, 1.0))
            };
            SideReport {
                alpha,
                alpha_perp: perp.reduced(),
                final_length: last.total_length,
                rungs,
                dimension,
                length_stable,
                contains_interval,
            }
        })
        .collect();
    let measure_positive = sides.iter().any(|s| s.length_stable);
    let interior_nonempty = sides.iter().any(|s| s.contains_interval);
    let dimension = 1.0 + sides.iter().map(|s| s.dimension).fold(0.0, f64::max);
    Ok(PolygonReport { sides, measure_positive, interior_nonempty, dimension })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use crate::rational::Q;

    fn q(n: i64, d: i64) -> Real {
        Real::Exact(Q::new(n, d))
    }

    #[test]
    fn unit_square_projects_to_unit_interval() {
        let c = BoxCover::single(Point::ORIGIN, 1.0).unwrap();
        let u = project_cover(&c, Angle::Radians(0.0));
        assert_eq!(u.intervals(), &[(0.0, 1.0)]);
        assert_eq!(u.total_length(), 1.0);
    }

    #[test]
    fn four_corner_projection() {
        let c = four_corner_cover(q(1, 4), 1).unwrap();
        let u = project_cover(&c, Angle::from_tan(0, 1));
        assert!(u.exact().is_some());
        assert_eq!(u.intervals(), &[(0.0, 0.25), (0.75, 1.0)]);
        assert_eq!(u.total_length(), 0.5);
        for n in 1..=6 {
            let u = project_cover(&four_corner_cover(q(1, 4), n).unwrap(), Angle::from_tan(0, 1));
            assert_eq!(u.total_length(), 0.5f64.powi(n as i32));
        }
    }

    #[test]
    fn big_angle_fills_interval() {
        let ladder = projection_ladder(q(1, 4), Angle::from_tan(1, 2), 5).unwrap();
        for r in &ladder {
            assert_eq!(r.interval_count, 1);
            assert!((r.total_length - 3.0 / 5f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn small_angle_three_to_the_n() {
        let ladder = projection_ladder(q(1, 4), Angle::from_tan(1, 1), 6).unwrap();
        let e = count_growth_exponent(&ladder).unwrap();
        assert!(e < 0.95 * 4f64.ln(), "{e}");
    }

    #[test]
    fn grid_count_of_union() {
        let u = IntervalUnion::from_intervals(vec![(0.0, 0.25), (0.75, 1.0), (0.2, 0.3)]);
        assert_eq!(u.len(), 2);
        assert_eq!(u.grid_count(0.25), 3);
        assert_eq!(u.grid_count(0.125), 5);
    }

    #[test]
    fn reports() {
        let sq = BoxCover::single(Point::ORIGIN, 1.0).unwrap();
        let r = polygon_sumset_report(&[sq], &crate::curves::polygon_ntheta(0.4)).unwrap();
        assert!(r.measure_positive && r.interior_nonempty);
        assert_eq!(r.dimension, 2.0);
        let covers: Vec<BoxCover> = (1..=6).map(|n| four_corner_cover(q(1, 4), n).unwrap()).collect();
        let r = ntheta_sumset_report(&covers, Angle::from_tan(0, 1)).unwrap();
        assert!(!r.measure_positive && !r.interior_nonempty);
        for s in &r.sides {
            assert!((s.final_length - 0.5f64.powi(6)).abs() < 1e-12);
        }
        assert!((r.dimension - 1.5).abs() < 1e-9);
        let pt = BoxCover::single(Point::ORIGIN, 0.0).unwrap();
        assert!(polygon_sumset_report(&[pt], &CurveSpec::unit_circle()).is_err());
    }

    #[test]
    fn horizontal_segment_with_vertical_side() {
        let seg = BoxCover::segment(Point::new(0.0, 0.0), Point::new(1.0, 0.0), 1.0 / 64.0).unwrap();
        let poly = CurveSpec::polyline(vec![Point::new(0.0, 0.0), Point::new(0.0, 1.0)]).unwrap();
        let r = polygon_sumset_report(&[seg], &poly).unwrap();
        assert!(r.measure_positive);
        assert!((r.sides[0].final_length - 1.0).abs() < 1e-9);
    }
}
