use fractal_sumset::curves::{polygon_ntheta, sample_curve};
use fractal_sumset::geometry::{Angle, Point, Rect};
use fractal_sumset::ifs::{four_corner_cover, ifs_cover, BoxCover, CoverDim, IfsSystem};
use fractal_sumset::projection::{ntheta_sumset_report, project_cover, project_rects};
use fractal_sumset::raster::{box_count, minkowski_raster, RasterOptions};
use fractal_sumset::rational::{Real, Q};
use fractal_sumset::scaling::{fit_box_dimension, ScalingLadder};

fn angle_grid() -> Vec<Angle> {
    let mut v: Vec<Angle> = (0..24).map(|k| Angle::Radians(k as f64 * std::f64::consts::PI / 24.0 + 0.013)).collect();
    v.extend([Angle::from_tan(1, 1), Angle::from_tan(1, 2), Angle::from_tan(2, 1), Angle::from_tan(1, 4), Angle::from_tan(0, 1)]);
    v
}

fn box_interval(cover: &BoxCover, i: usize, a: Angle) -> (f64, f64) {
    project_rects(&[cover.rect(i)], a).intervals()[0]
}

#[test]
fn union_length_at_most_sum_with_equality_iff_disjoint() {
    for g in [Real::Exact(Q::new(1, 4)), Real::Exact(Q::new(1, 5)), Real::Float(0.3)] {
        for n in 1..=3 {
            let cover = four_corner_cover(g, n).unwrap();
            for a in angle_grid() {
                let total = project_cover(&cover, a).total_length();
                let ivs: Vec<(f64, f64)> = (0..cover.len()).map(|i| box_interval(&cover, i, a)).collect();
                let sum: f64 = ivs.iter().map(|(l, r)| r - l).sum();
                let mut overlap = false;
                for i in 0..ivs.len() {
                    for j in i + 1..ivs.len() {
                        if ivs[i].0.max(ivs[j].0) < ivs[i].1.min(ivs[j].1) - 1e-12 {
                            overlap = true;
                        }
                    }
                }
                assert!(total <= sum + 1e-12, "{a} n={n}");
                assert_eq!((sum - total).abs() <= 1e-12, !overlap, "{a} n={n}: total {total} sum {sum}");
            }
        }
    }
}

#[test]
fn rotated_boxes_project_consistently() {
    let cover = four_corner_cover(Real::Exact(Q::new(1, 4)), 3).unwrap();
    for a in angle_grid() {
        let t = a.radians();
        let rotated: Vec<Rect> = (0..cover.len())
            .map(|i| {
                let r = cover.rect(i);
                let pts = [r.min, r.max, Point::new(r.min.x, r.max.y), Point::new(r.max.x, r.min.y)].map(|p| p.rotate(-t));
                let lo = Point::new(pts.iter().map(|p| p.x).fold(f64::INFINITY, f64::min), pts.iter().map(|p| p.y).fold(f64::INFINITY, f64::min));
                let hi = Point::new(pts.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max), pts.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max));
                Rect::new(lo, hi)
            })
            .collect();
        let direct = project_cover(&cover, a).total_length();
        let via = project_rects(&rotated, Angle::Radians(0.0)).total_length();
        assert!((direct - via).abs() < 1e-9, "{a}: {direct} vs {via}");
    }
}

/// Product of a two-map and a three-map Cantor set, both with ratio 1/4.
fn product_set() -> IfsSystem {
    let xs = [Q::new(0, 1), Q::new(3, 4)];
    let ys = [Q::new(0, 1), Q::new(3, 8), Q::new(3, 4)];
    let t = xs.iter().flat_map(|&x| ys.iter().map(move |&y| [x, y])).collect();
    IfsSystem::from_exact(Q::new(1, 4), t, CoverDim::Two).unwrap()
}

#[test]
fn side_projections_predict_sumset_dimension() {
    let sys = product_set();
    let expect = 1.0 + 3f64.ln() / 4f64.ln();
    let covers: Vec<BoxCover> = (2..=7).map(|n| ifs_cover(&sys, n).unwrap()).collect();
    let rep = ntheta_sumset_report(&covers, Angle::from_tan(0, 1)).unwrap();
    assert!((rep.dimension - expect).abs() < 0.1, "report {} vs {expect}", rep.dimension);

    // independent route: box-counting slope of the rasterized sum
    let square = polygon_ntheta(0.0);
    let mut rows = Vec::new();
    for k in 3..=9 {
        let eps = 0.5f64.powi(k);
        let depth = (k as u32).div_ceil(2);
        let sample = sample_curve(&square, eps / 2.0).unwrap();
        let r = minkowski_raster(&ifs_cover(&sys, depth).unwrap(), &sample, eps, &RasterOptions::default()).unwrap();
        rows.push((eps, box_count(&r)));
    }
    let slope = fit_box_dimension(&ScalingLadder::from_counts(&rows).unwrap()).unwrap().slope;
    assert!((slope - expect).abs() < 0.1, "raster slope {slope} vs {expect}");
}
