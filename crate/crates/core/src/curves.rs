//! Summand curves and their sampling with guaranteed spacing.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{domain, Result};
use crate::geometry::Point;

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// The graph of `f` over `[a, b]` with `|f'| <= c_bound` on that interval.
#[derive(Clone)]
pub struct Graph {
    pub name: String,
    pub f: RealFn,
    pub df: RealFn,
    pub domain: (f64, f64),
    pub c_bound: f64,
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Graph")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("c_bound", &self.c_bound)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum CurveSpec {
    Circle { center: Point, radius: f64 },
    /// Perimeter of `[0,1]^2` rotated by `theta` about the origin.
    PolygonNtheta { theta: f64 },
    Graph(Graph),
    Polyline { vertices: Vec<Point> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurvatureClass {
    NonvanishingCurvature,
    PiecewiseLinear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveSample {
    pub points: Vec<Point>,
    /// Upper bound on the distance between consecutive points.
    pub max_gap: f64,
    /// Every point of the curve lies within this distance of a sample.
    pub hausdorff_bound: f64,
}

impl CurveSample {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y\n");
        for p in &self.points {
            let _ = writeln!(out, "{:?},{:?}", p.x, p.y);
        }
        out
    }

    pub fn bbox(&self) -> Option<crate::geometry::Rect> {
        let mut it = self.points.iter();
        let first = *it.next()?;
        let mut r = crate::geometry::Rect::new(first, first);
        for &p in it {
            r = r.union(&crate::geometry::Rect::new(p, p));
        }
        Some(r)
    }
}

impl CurveSpec {
    pub fn circle(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return domain(format!("circle radius {radius} must be positive"));
        }
        Ok(CurveSpec::Circle { center, radius })
    }

    pub fn unit_circle() -> Self {
        CurveSpec::Circle { center: Point::ORIGIN, radius: 1.0 }
    }

    pub fn polyline(vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() < 2 {
            return domain("polyline needs at least two vertices");
        }
        Ok(CurveSpec::Polyline { vertices })
    }

    /// Graph of `f` on `[a, b]`. `c_bound` must dominate `|f'|` there; this
    /// is spot-checked on a grid.
    pub fn graph(name: impl Into<String>, f: RealFn, df: RealFn, domain_ab: (f64, f64), c_bound: f64) -> Result<Self> {
        let (a, b) = domain_ab;
        if !(a < b && a.is_finite() && b.is_finite()) {
            return domain(format!("graph domain [{a}, {b}] is empty"));
        }
        if !(c_bound > 0.0 && c_bound.is_finite()) {
            return domain("graph derivative bound must be positive");
        }
        for k in 0..=256 {
            let x = a + (b - a) * k as f64 / 256.0;
            let d = df(x);
            if !d.is_finite() || d.abs() > c_bound {
                return domain(format!("|f'({x})| = {} exceeds bound {c_bound}", d.abs()));
            }
        }
        Ok(CurveSpec::Graph(Graph { name: name.into(), f, df, domain: domain_ab, c_bound }))
    }

    /// Graph of the polynomial `sum coeffs[k] x^k` on `[a, b]`.
    pub fn polynomial_graph(coeffs: Vec<f64>, domain_ab: (f64, f64)) -> Result<Self> {
        if coeffs.is_empty() {
            return domain("polynomial needs at least one coefficient");
        }
        let dcoeffs: Vec<f64> = coeffs.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect();
        let name = format!("poly{coeffs:?}");
        let (a, b) = domain_ab;
        let bound = (0..=1024)
            .map(|k| horner(&dcoeffs, a + (b - a) * k as f64 / 1024.0).abs())
            .fold(0.0f64, f64::max);
        let c = (bound * 1.01).max(1e-9);
        let f: RealFn = Arc::new(move |x| horner(&coeffs, x));
        let df: RealFn = Arc::new(move |x| horner(&dcoeffs, x));
        Self::graph(name, f, df, domain_ab, c)
    }

    pub fn polygon_vertices(&self) -> Option<Vec<Point>> {
        match self {
            CurveSpec::PolygonNtheta { theta } => Some(ntheta_vertices(*theta).to_vec()),
            CurveSpec::Polyline { vertices } => Some(vertices.clone()),
            _ => None,
        }
    }

    /// Distinct side directions reduced to `[0, pi)`, in order of first
    /// appearance. `None` for curved kinds.
    pub fn side_angles(&self) -> Option<Vec<f64>> {
        match self {
            CurveSpec::PolygonNtheta { theta } => Some(side_angles(*theta).to_vec()),
            CurveSpec::Polyline { vertices } => {
                let mut out: Vec<f64> = Vec::new();
                for w in vertices.windows(2) {
                    let d = w[1] - w[0];
                    if d.norm() == 0.0 {
                        continue;
                    }
                    let a = d.angle().rem_euclid(PI);
                    let a = if PI - a < 1e-12 { 0.0 } else { a };
                    if !out.iter().any(|&b| (a - b).abs() < 1e-12) {
                        out.push(a);
                    }
                }
                Some(out)
            }
            _ => None,
        }
    }

    /// Bounds on `(f, f')` for graphs: whether `1/C < f' < C` holds on the
    /// sampled grid.
    pub fn graph_slope_bounds_hold(&self) -> Option<bool> {
        match self {
            CurveSpec::Graph(g) => {
                let (a, b) = g.domain;
                Some((0..=256).all(|k| {
                    let d = (g.df)(a + (b - a) * k as f64 / 256.0);
                    d > 1.0 / g.c_bound && d < g.c_bound
                }))
            }
            _ => None,
        }
    }
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
}

/// Vertices of `N_theta`, counterclockwise from the origin.
pub fn ntheta_vertices(theta: f64) -> [Point; 4] {
    [Point::ORIGIN, Point::new(1.0, 0.0), Point::new(1.0, 1.0), Point::new(0.0, 1.0)].map(|p| p.rotate(theta))
}

pub fn polygon_ntheta(theta: f64) -> CurveSpec {
    CurveSpec::PolygonNtheta { theta }
}

/// `{theta, theta + pi/2}` reduced modulo pi.
pub fn side_angles(theta: f64) -> [f64; 2] {
    [theta.rem_euclid(PI), (theta + FRAC_PI_2).rem_euclid(PI)]
}

pub fn sample_curve(spec: &CurveSpec, gap: f64) -> Result<CurveSample> {
    if !(gap > 0.0 && gap.is_finite()) {
        return domain(format!("sampling gap {gap} must be positive"));
    }
    match spec {
        CurveSpec::Circle { center, radius } => {
            let n = ((TAU * radius / gap).ceil() as usize).max(4);
            let step = TAU / n as f64;
            let points = (0..n).map(|k| *center + Point::from_polar(*radius, k as f64 * step)).collect();
            let arc = radius * step;
            Ok(CurveSample { points, max_gap: 2.0 * radius * (step / 2.0).sin(), hausdorff_bound: arc / 2.0 })
        }
        CurveSpec::PolygonNtheta { theta } => {
            let mut v = ntheta_vertices(*theta).to_vec();
            v.push(v[0]);
            Ok(sample_polyline(&v, gap, true))
        }
        CurveSpec::Polyline { vertices } => Ok(sample_polyline(vertices, gap, false)),
        CurveSpec::Graph(g) => {
            let (a, b) = g.domain;
            let dx_max = gap / (1.0 + g.c_bound * g.c_bound).sqrt();
            let n = ((b - a) / dx_max).ceil().max(1.0) as usize;
            let dx = (b - a) / n as f64;
            let points: Vec<Point> = (0..=n)
                .map(|k| {
                    let x = if k == n { b } else { a + k as f64 * dx };
                    Point::new(x, (g.f)(x))
                })
                .collect();
            let arc = dx * (1.0 + g.c_bound * g.c_bound).sqrt();
            let max_gap = points.windows(2).map(|w| w[0].dist(w[1])).fold(0.0, f64::max);
            Ok(CurveSample { points, max_gap, hausdorff_bound: arc / 2.0 })
        }
    }
}

fn sample_polyline(vertices: &[Point], gap: f64, closed: bool) -> CurveSample {
    let mut points = Vec::new();
    let mut longest_step = 0.0f64;
    for w in vertices.windows(2) {
        let len = w[0].dist(w[1]);
        let n = ((len / gap).ceil() as usize).max(1);
        longest_step = longest_step.max(len / n as f64);
        for k in 0..n {
            points.push(w[0] + (w[1] - w[0]) * (k as f64 / n as f64));
        }
    }
    if !closed {
        points.push(*vertices.last().unwrap());
    }
    CurveSample { points, max_gap: longest_step, hausdorff_bound: longest_step / 2.0 }
}

/// Grid used for the numeric curvature test of graphs.
#[derive(Debug, Clone, Copy)]
pub struct CurvatureTest {
    pub threshold: f64,
    pub min_fraction: f64,
    pub grid: usize,
}

impl Default for CurvatureTest {
    fn default() -> Self {
        CurvatureTest { threshold: 0.01, min_fraction: 0.05, grid: 200 }
    }
}

pub fn curvature_class(spec: &CurveSpec) -> CurvatureClass {
    curvature_class_with(spec, CurvatureTest::default())
}

pub fn curvature_class_with(spec: &CurveSpec, test: CurvatureTest) -> CurvatureClass {
    match spec {
        CurveSpec::Circle { .. } => CurvatureClass::NonvanishingCurvature,
        CurveSpec::PolygonNtheta { .. } | CurveSpec::Polyline { .. } => CurvatureClass::PiecewiseLinear,
        CurveSpec::Graph(g) => {
            let (a, b) = g.domain;
            let n = test.grid.max(3);
            let h = (b - a) / n as f64;
            let curved = (1..n)
                .filter(|&k| {
                    let x = a + k as f64 * h;
                    let d2 = ((g.f)(x + h) - 2.0 * (g.f)(x) + (g.f)(x - h)) / (h * h);
                    d2.abs() > test.threshold
                })
                .count();
            if curved as f64 >= test.min_fraction * (n - 1) as f64 {
                CurvatureClass::NonvanishingCurvature
            } else {
                CurvatureClass::PiecewiseLinear
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_quarter_gap() {
        let s = sample_curve(&CurveSpec::unit_circle(), FRAC_PI_2).unwrap();
        assert!(s.points.len() >= 4);
        for p in &s.points {
            assert!((p.norm() - 1.0).abs() < 1e-12);
        }
        assert!(s.max_gap <= FRAC_PI_2);
    }

    #[test]
    fn square_perimeter_samples() {
        let s = sample_curve(&polygon_ntheta(0.0), 0.5).unwrap();
        assert!(s.points.len() >= 8);
        assert!(s.max_gap <= 0.5);
    }

    #[test]
    fn diagonal_graph() {
        let spec = CurveSpec::polynomial_graph(vec![0.0, 1.0], (0.0, 0.125)).unwrap();
        let s = sample_curve(&spec, 0.1).unwrap();
        assert!(s.points.len() >= 2);
        for p in &s.points {
            assert!((p.x - p.y).abs() < 1e-15);
        }
    }

    #[test]
    fn bad_gap() {
        assert!(sample_curve(&CurveSpec::unit_circle(), 0.0).is_err());
        assert!(sample_curve(&CurveSpec::unit_circle(), -1.0).is_err());
    }

    #[test]
    fn diamond() {
        let v = ntheta_vertices(std::f64::consts::FRAC_PI_4);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!(v[1].dist(Point::new(h, h)) < 1e-15);
        assert!(v[3].dist(Point::new(-h, h)) < 1e-15);
        let a = side_angles(std::f64::consts::FRAC_PI_4);
        assert!((a[0] - PI / 4.0).abs() < 1e-15 && (a[1] - 3.0 * PI / 4.0).abs() < 1e-15);
        let sa = polygon_ntheta(0.3).side_angles().unwrap();
        assert_eq!(sa.len(), 2);
    }

    #[test]
    fn curvature_classes() {
        assert_eq!(curvature_class(&CurveSpec::unit_circle()), CurvatureClass::NonvanishingCurvature);
        assert_eq!(curvature_class(&polygon_ntheta(1.0)), CurvatureClass::PiecewiseLinear);
        let par = CurveSpec::polynomial_graph(vec![0.0, 0.0, 1.0], (0.0, 1.0)).unwrap();
        assert_eq!(curvature_class(&par), CurvatureClass::NonvanishingCurvature);
        let line = CurveSpec::polynomial_graph(vec![0.2, 0.7], (0.0, 1.0)).unwrap();
        assert_eq!(curvature_class(&line), CurvatureClass::PiecewiseLinear);
    }

    #[test]
    fn graph_bounds_checked() {
        let f: RealFn = Arc::new(|x| x * x);
        let df: RealFn = Arc::new(|x| 2.0 * x);
        assert!(CurveSpec::graph("sq", f.clone(), df.clone(), (0.0, 1.0), 1.5).is_err());
        let g = CurveSpec::graph("sq", f, df, (0.0, 1.0), 2.5).unwrap();
        // f'(0) = 0 violates the strict lower bound
        assert_eq!(g.graph_slope_bounds_hold(), Some(false));
    }
}
