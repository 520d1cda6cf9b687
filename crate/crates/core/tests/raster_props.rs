use fractal_sumset::curves::{polygon_ntheta, sample_curve, CurveSpec};
use fractal_sumset::geometry::{Point, Rect};
use fractal_sumset::ifs::{four_corner_cover, BoxCover};
use fractal_sumset::raster::{auto_window, box_count, minkowski_raster, random_circle_mc, RasterOptions};
use fractal_sumset::rational::{Real, Q};
use proptest::prelude::*;

fn quarter() -> Real {
    Real::Exact(Q::new(1, 4))
}

#[test]
fn finer_cover_never_adds_cells() {
    let eps = 1.0 / 64.0;
    let sample = sample_curve(&CurveSpec::unit_circle(), eps / 2.0).unwrap();
    for g in [quarter(), Real::Exact(Q::new(1, 3)), Real::Float(0.2)] {
        let coarse = four_corner_cover(g, 0).unwrap();
        let window = auto_window(&coarse, &sample, eps).unwrap();
        let opts = RasterOptions { window: Some(window), max_cells: None };
        let mut prev = u64::MAX;
        for n in 0..=4 {
            let r = minkowski_raster(&four_corner_cover(g, n).unwrap(), &sample, eps, &opts).unwrap();
            let c = box_count(&r);
            assert!(c <= prev, "depth {n}: {c} > {prev}");
            prev = c;
        }
    }
}

#[test]
fn raster_sandwich() {
    let eps = 1.0 / 16.0;
    let cover = four_corner_cover(quarter(), 2).unwrap();
    for curve in [CurveSpec::unit_circle(), polygon_ntheta(0.4)] {
        let sample = sample_curve(&curve, eps / 2.0).unwrap();
        let r = minkowski_raster(&cover, &sample, eps, &RasterOptions::default()).unwrap();
        for i in 0..cover.len() {
            let rect = cover.rect(i);
            let pts = [rect.min, rect.max, rect.center(), Point::new(rect.min.x, rect.max.y)];
            for g in &sample.points {
                for a in pts {
                    let (ci, cj) = r.cell_of(a + *g).expect("sum point inside window");
                    assert!(r.get(ci, cj));
                }
            }
        }
        for (i, j) in r.occupied() {
            let c = r.cell_center(i, j);
            let d = (0..cover.len())
                .flat_map(|k| sample.points.iter().map(move |g| (k, *g)))
                .map(|(k, g)| cover.rect(k).translate(g).min_dist(c))
                .fold(f64::INFINITY, f64::min);
            assert!(d <= r.slack(), "cell ({i},{j}) at distance {d} > {}", r.slack());
        }
    }
}

proptest! {
    #[test]
    fn dyadic_translation_keeps_count(kx in -64i32..64, ky in -64i32..64) {
        let eps = 1.0 / 32.0;
        let v = Point::new(kx as f64 / 16.0, ky as f64 / 16.0);
        let cover = four_corner_cover(quarter(), 3).unwrap();
        let sample = sample_curve(&CurveSpec::unit_circle(), eps / 2.0).unwrap();
        let w = auto_window(&cover, &sample, eps).unwrap();
        let base = minkowski_raster(&cover, &sample, eps, &RasterOptions { window: Some(w), max_cells: None }).unwrap();
        let moved = minkowski_raster(
            &cover.translate(v),
            &sample,
            eps,
            &RasterOptions { window: Some(w.translate(v)), max_cells: None },
        )
        .unwrap();
        prop_assert_eq!(box_count(&base), box_count(&moved));
    }
}

#[test]
fn mc_is_seed_deterministic() {
    let cover = four_corner_cover(quarter(), 4).unwrap();
    let w = Rect::new(Point::new(-1.5, -1.5), Point::new(2.5, 2.5));
    let a = random_circle_mc(&cover, w, 1.0, 30_000, 11).unwrap();
    let b = random_circle_mc(&cover, w, 1.0, 30_000, 11).unwrap();
    let c = random_circle_mc(&cover, w, 1.0, 30_000, 12).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.hits, c.hits);
}

#[test]
fn mc_unit_disk_matches_area_ratio() {
    let cover = BoxCover::disk(Point::ORIGIN, 1.0, 1.0 / 256.0).unwrap();
    let w = Rect::new(Point::new(-2.0, -2.0), Point::new(2.0, 2.0));
    let e = random_circle_mc(&cover, w, 1.0, 100_000, 1).unwrap();
    assert!((e.p_hat - std::f64::consts::FRAC_PI_4).abs() <= 3.0 * e.ci95_halfwidth, "{e:?}");
}
