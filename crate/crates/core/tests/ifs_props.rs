use fractal_sumset::geometry::{Angle, Point};
use fractal_sumset::ifs::{
    cantor_intervals, four_corner_cover, ifs_cover, ifs_cover_from, projected_ifs, theorem084_ifs, verify_ssc,
    BoxCover, CounterexampleMode, CounterexampleOptions, CoverDim, Coords, Homothety2, IfsSystem,
};
use fractal_sumset::projection::project_rects;
use fractal_sumset::rational::{Real, Q};
use proptest::prelude::*;

fn exact(n: i64, d: i64) -> Real {
    Real::Exact(Q::new(n, d))
}

fn contained(fine: &BoxCover, coarse: &BoxCover) -> bool {
    let tol = 1e-12;
    (0..fine.len()).all(|i| {
        let f = fine.rect(i);
        (0..coarse.len()).any(|j| {
            let c = coarse.rect(j);
            f.min.x >= c.min.x - tol && f.min.y >= c.min.y - tol && f.max.x <= c.max.x + tol && f.max.y <= c.max.y + tol
        })
    })
}

#[test]
fn refinement_is_nested() {
    let systems = [
        IfsSystem::four_corner(exact(1, 4)).unwrap(),
        IfsSystem::four_corner(Real::Float(0.3)).unwrap(),
        IfsSystem::symmetric_cantor(exact(1, 3)).unwrap(),
        IfsSystem::new(vec![
            Homothety2::new(0.4, Point::new(0.0, 0.0)).unwrap(),
            Homothety2::new(0.4, Point::new(0.6, 0.1)).unwrap(),
            Homothety2::new(0.4, Point::new(0.2, 0.6)).unwrap(),
        ])
        .unwrap(),
    ];
    for s in &systems {
        for n in 0..4 {
            let a = ifs_cover(s, n).unwrap();
            let b = ifs_cover(s, n + 1).unwrap();
            assert!(contained(&b, &a), "depth {n}");
        }
    }
}

fn sorted_intervals(mut v: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    v.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
    v
}

#[test]
fn projection_commutes_with_covering() {
    let sys = IfsSystem::four_corner(exact(1, 4)).unwrap();
    let angles = [
        Angle::Radians(0.0),
        Angle::Radians(0.3),
        Angle::Radians(1.1),
        Angle::Radians(2.5),
        Angle::from_tan(1, 2),
        Angle::from_tan(3, 1),
        Angle::from_tan(-1, 2),
    ];
    for a in angles {
        let proj = projected_ifs(&sys, a).unwrap();
        let u = a.unit();
        // projection of the unit square
        let ends = [0.0, u.x, u.y, u.x + u.y];
        let lo = ends.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ends.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for n in 1..=3 {
            let cover = four_corner_cover(exact(1, 4), n).unwrap();
            let direct: Vec<(f64, f64)> = (0..cover.len())
                .map(|i| project_rects(&[cover.rect(i)], a).intervals()[0])
                .collect();
            let line = ifs_cover_from(&proj, n, lo, hi - lo).unwrap();
            let via: Vec<(f64, f64)> = (0..line.len()).map(|i| {
                let r = line.rect(i);
                (r.min.x, r.max.x)
            }).collect();
            let (d, v) = (sorted_intervals(direct), sorted_intervals(via));
            assert_eq!(d.len(), v.len(), "{a} depth {n}");
            for (x, y) in d.iter().zip(&v) {
                assert!((x.0 - y.0).abs() < 1e-12 && (x.1 - y.1).abs() < 1e-12, "{a} depth {n}: {x:?} vs {y:?}");
            }
        }
    }
}

proptest! {
    #[test]
    fn cantor_length_is_power(num in 1i64..10, den in 3i64..40, n in 0u32..7) {
        prop_assume!(2 * num < den);
        let g = Q::new(num, den);
        let c = cantor_intervals(Real::Exact(g), n).unwrap();
        // exact integer arithmetic on the stored corners
        let Coords::Exact { denom, side, corners, .. } = c.coords() else { panic!("expected exact cover") };
        let total = Q::new(*side * corners.len() as i64, *denom);
        let two_g = g * 2;
        prop_assert_eq!(total, (0..n).fold(Q::from_integer(1), |acc, _| acc * two_g));
    }

    #[test]
    fn four_corner_count(num in 1i64..5, den in 5i64..30, n in 0u32..6) {
        prop_assume!(2 * num < den);
        let c = four_corner_cover(exact(num, den), n).unwrap();
        prop_assert_eq!(c.len(), 4usize.pow(n));
    }

    #[test]
    fn float_four_corner_count(g in 0.05f64..0.45, n in 0u32..6) {
        let c = four_corner_cover(Real::Float(g), n).unwrap();
        prop_assert_eq!(c.len(), 4usize.pow(n));
        prop_assert!((c.total_measure() - (4.0 * g * g).powi(n as i32)).abs() < 1e-9);
    }
}

#[test]
fn designated_pairs_share_projection_exactly() {
    let cases: Vec<(Vec<Angle>, Real, CounterexampleMode, Option<usize>)> = vec![
        (vec![Angle::from_tan(1, 2)], exact(3, 10), CounterexampleMode::APrime, Some(4)),
        (vec![Angle::from_tan(1, 1)], exact(2, 5), CounterexampleMode::BPrime, None),
        (vec![Angle::from_tan(0, 1), Angle::from_tan(1, 0)], exact(1, 5), CounterexampleMode::BPrime, None),
        (vec![Angle::from_tan(2, 3), Angle::from_tan(-1, 4)], exact(1, 6), CounterexampleMode::BPrime, None),
    ];
    for (angles, lambda, mode, maps) in cases {
        let opts = CounterexampleOptions { maps, seed: 3, ..Default::default() };
        let ce = theorem084_ifs(&angles, lambda, mode, &opts).unwrap();
        let ex = ce.system.exact().expect("rational input stays exact");
        for (a, &(i, j)) in angles.iter().zip(&ce.pairs) {
            let (q, p) = a.integer_direction().unwrap();
            let (q, p) = (Q::from_integer(q), Q::from_integer(p));
            let proj = |t: &[Q; 2]| q * t[0] + p * t[1];
            assert_eq!(proj(&ex.translations[i]), proj(&ex.translations[j]));
            assert_ne!(ex.translations[i], ex.translations[j]);
        }
        assert!(verify_ssc(&ce.system, 3).unwrap());
        assert_eq!(ce.system.dim(), CoverDim::Two);
    }
}
