use proptest::prelude::*;

use subriemann::ccdist::{DistanceSolver, SolverOptions};
use subriemann::grid::BoxRegion;
use subriemann::library;
use subriemann::nilpotent::{dilate, Grading};
use subriemann::perimeter::{surface_estimator, SetRep};
use subriemann::q;
use subriemann::structure::SubRiemannianStructure;

fn solver(s: &SubRiemannianStructure) -> DistanceSolver {
    DistanceSolver::new(s, SolverOptions::default()).unwrap()
}

fn example(k: usize) -> SubRiemannianStructure {
    [library::heisenberg(), library::singruppo(), library::grushin()][k].clone()
}

fn point(n: usize, h: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-h..h, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn distance_is_symmetric(k in 0usize..3, x in point(3, 0.6), y in point(3, 0.6)) {
        let s = example(k);
        let n = s.dim();
        let d = solver(&s);
        let a = d.distance(&x[..n], &y[..n]).unwrap();
        let b = d.distance(&y[..n], &x[..n]).unwrap();
        prop_assert!(a.converged && b.converged);
        prop_assert!((a.value - b.value).abs() <= 0.02 * a.value.max(b.value), "{} {}", a.value, b.value);
    }

    #[test]
    fn distance_triangle_inequality(k in 0usize..3, x in point(3, 0.6), y in point(3, 0.6), z in point(3, 0.6)) {
        let s = example(k);
        let n = s.dim();
        let d = solver(&s);
        let v = |a: &[f64], b: &[f64]| d.distance(&a[..n], &b[..n]).unwrap().value;
        let xz = v(&x, &z);
        prop_assert!(xz <= (v(&x, &y) + v(&y, &z)) * 1.03, "{}", xz);
    }

    #[test]
    fn distance_path_and_refinement(k in 0usize..3, x in point(3, 0.6), y in point(3, 0.6)) {
        let s = example(k);
        let n = s.dim();
        let r = solver(&s).distance(&x[..n], &y[..n]).unwrap();
        prop_assert!(r.value >= 0.0);
        let v2 = r.value * r.value;
        prop_assert!(v2 <= r.path.action * (1.0 + 1e-12) && r.path.action <= v2 * (1.0 + 1e-6));
        prop_assert!(r.path.length() <= r.value * (1.0 + 1e-12));
        for w in r.refinements.windows(2) {
            prop_assert!(w[1].1 <= w[0].1 * 1.005, "{:?}", r.refinements);
        }
    }

    #[test]
    fn heisenberg_distance_is_homogeneous(z in point(3, 0.8), lambda in 0.3f64..2.0) {
        let s = library::heisenberg();
        let g = Grading::new(vec![1, 1, 2]).unwrap();
        let d = solver(&s);
        let o = [0.0; 3];
        let a = d.distance(&o, &z).unwrap().value;
        let b = d.distance(&o, &dilate(&z, &g, lambda).unwrap()).unwrap().value;
        prop_assert!((b - lambda * a).abs() <= 0.02 * lambda * a, "{} {}", a, b);
    }
}

#[test]
fn distance_vanishes_on_the_diagonal() {
    let s = library::heisenberg();
    let r = solver(&s).distance(&[0.2, -0.1, 0.3], &[0.2, -0.1, 0.3]).unwrap();
    assert_eq!(r.value, 0.0);
}

fn level(a: i64, b: i64, c: i64) -> String {
    format!("{a}/4*x1 + {b}/4*x2 - 1/8*x2^2 + {c}/10")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn perimeter_bounds_and_superadditivity(a in 1i64..=4, b in -4i64..=4, c in -2i64..=2) {
        let s = library::grushin();
        let bounds = BoxRegion::cube(2, 1.0);
        let set = SetRep::parse(&level(a, b, c), bounds, 128).unwrap();
        let whole = surface_estimator(&s, &set, None).unwrap();
        prop_assert!(whole.total_variation >= 0.0);
        for (p, v) in whole.per_field.iter().zip(&whole.per_field_variation) {
            prop_assert!(p.abs() <= whole.total_variation + 1e-12);
            prop_assert!(p.abs() <= v + 1e-12);
        }
        let left = BoxRegion::new(vec![-1.0, -1.0], vec![0.0, 1.0]).unwrap();
        let right = BoxRegion::new(vec![0.0, -1.0], vec![1.0, 1.0]).unwrap();
        let split = surface_estimator(&s, &set, Some(&left)).unwrap().total_variation
            + surface_estimator(&s, &set, Some(&right)).unwrap().total_variation;
        prop_assert!((split - whole.total_variation).abs() <= 0.02 * whole.total_variation.max(1e-9));
    }

    #[test]
    fn perimeter_is_frame_rotation_invariant(a in 1i64..=4, b in -4i64..=4, c in -2i64..=2) {
        let s = library::grushin();
        let rot = vec![vec![q(3, 5), q(-4, 5)], vec![q(4, 5), q(3, 5)]];
        let r = s.recombine(&rot).unwrap();
        let set = SetRep::parse(&level(a, b, c), BoxRegion::cube(2, 1.0), 128).unwrap();
        let tv = surface_estimator(&s, &set, None).unwrap().total_variation;
        let tr = surface_estimator(&r, &set, None).unwrap().total_variation;
        prop_assert!((tv - tr).abs() <= 0.02 * tv.max(1e-9), "{} {}", tv, tr);
    }
}
