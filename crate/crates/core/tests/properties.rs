use proptest::prelude::*;

use subriemann::blowup::rescale_set;
use subriemann::carnot::{group_law_from_flows, law_invariants, vertical_halfspace, GroupOp};
use subriemann::grid::{BoxRegion, Grid, GridFunction};
use subriemann::library;
use subriemann::metric::{frame_kernel, min_norm_controls, quadratic_form};
use subriemann::nilpotent::{dilate, dilate_field, remainder_rescale, truncate, Grading};
use subriemann::perimeter::SetRep;
use subriemann::poly::{Monomial, Polynomial};
use subriemann::structure::{growth_vector, point_flag, FlagOptions, SubRiemannianStructure};
use subriemann::vectorfield::{
    flow, lie_bracket, pair_distributional, Bump, FlowOptions, NumericField, PolyVectorField, TestFunction,
    VolumeWeight,
};
use subriemann::{q, PolyField, Rational};

fn poly(n: usize, max_deg: u32, max_terms: usize) -> impl Strategy<Value = Polynomial<Rational>> {
    prop::collection::vec(
        (prop::collection::vec(0..=max_deg, n), -4i64..=4, 1i64..=3),
        0..=max_terms,
    )
    .prop_map(move |terms| {
        Polynomial::from_terms(terms.into_iter().filter(|(e, _, _)| e.iter().sum::<u32>() <= max_deg).map(
            |(e, a, b)| (Monomial::new(e), q(a, b)),
        ))
    })
}

fn field(n: usize, max_deg: u32) -> impl Strategy<Value = PolyField> {
    prop::collection::vec(poly(n, max_deg, 3), n).prop_map(PolyVectorField::new)
}

fn triple(max_deg: u32) -> impl Strategy<Value = (PolyField, PolyField, PolyField)> {
    (2usize..=4).prop_flat_map(move |n| (field(n, max_deg), field(n, max_deg), field(n, max_deg)))
}

fn br(a: &PolyField, b: &PolyField) -> PolyField {
    lie_bracket(a, b).unwrap()
}

fn rotation(m: usize) -> Vec<Vec<Rational>> {
    (0..m)
        .map(|i| {
            (0..m)
                .map(|j| match (i, j) {
                    (0, 0) | (1, 1) => q(3, 5),
                    (0, 1) => q(-4, 5),
                    (1, 0) => q(4, 5),
                    _ if i == j => q(1, 1),
                    _ => q(0, 1),
                })
                .collect()
        })
        .collect()
}

fn polynomial_examples() -> Vec<SubRiemannianStructure> {
    vec![
        library::heisenberg(),
        library::grushin(),
        library::grushin_alpha(2).unwrap(),
        library::singruppo(),
        library::contact_corank1(2).unwrap(),
    ]
}

fn point(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n)
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bracket_is_bilinear_antisymmetric_and_jacobi((a, b, c) in triple(3), s in -3i64..=3) {
        let k = q(s, 2);
        prop_assert_eq!(br(&a, &b), br(&b, &a).scale(&q(-1, 1)));
        prop_assert!(br(&a, &a).is_zero());
        prop_assert_eq!(br(&a.scale(&k).add(&b).unwrap(), &c), br(&a, &c).scale(&k).add(&br(&b, &c)).unwrap());
        let jacobi = br(&a, &br(&b, &c)).add(&br(&b, &br(&c, &a))).unwrap().add(&br(&c, &br(&a, &b))).unwrap();
        prop_assert!(jacobi.is_zero());
    }

    #[test]
    fn growth_invariant_under_permutation_and_rotation(k in 0usize..5, x in point(5)) {
        let s = &polynomial_examples()[k];
        let x = &x[..s.dim()];
        let g = growth_vector(s, x, 1e-9).unwrap();
        let mut perm: Vec<usize> = (0..s.rank()).collect();
        perm.reverse();
        prop_assert_eq!(growth_vector(&s.permuted(&perm).unwrap(), x, 1e-9).unwrap(), g.clone());
        prop_assert_eq!(growth_vector(&s.recombine(&rotation(s.rank())).unwrap(), x, 1e-9).unwrap(), g);
    }

    #[test]
    fn homogeneous_dimension_matches_growth(k in 0usize..5, x in point(5)) {
        let s = &polynomial_examples()[k];
        let f = point_flag(s, &x[..s.dim()], &FlagOptions::default()).unwrap();
        let from_weights: u32 = f.weights.iter().sum();
        let from_growth: usize = f.growth.iter().enumerate().map(|(i, &n)| (i + 1) * (n - if i == 0 { 0 } else { f.growth[i - 1] })).sum();
        prop_assert_eq!(f.homogeneous_dimension, from_weights);
        prop_assert_eq!(f.homogeneous_dimension as usize, from_growth);
        prop_assert_eq!(f.weights[0], 1);
        prop_assert!(f.weights.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn contact_growth_is_constant(k in 1usize..=3, x in point(7)) {
        let s = library::contact_corank1(k).unwrap();
        let n = s.dim();
        prop_assert_eq!(growth_vector(&s, &x[..n], 1e-9).unwrap(), vec![n - 1, n]);
    }

    #[test]
    fn metric_parallelogram_and_frame_invariance(
        k in 0usize..5, x in point(5), c1 in point(4), c2 in point(4),
    ) {
        let s = &polynomial_examples()[k];
        let (n, m) = (s.dim(), s.rank());
        let x = &x[..n];
        let frame = s.numeric::<f64>();
        let mut v = vec![0.0; n];
        let mut w = vec![0.0; n];
        frame.combine(x, &c1[..m], &mut v);
        frame.combine(x, &c2[..m], &mut w);
        let g = |u: &[f64]| quadratic_form(s, x, u, 1e-8).unwrap().value.finite().unwrap();
        let sum: Vec<f64> = v.iter().zip(&w).map(|(a, b)| a + b).collect();
        let dif: Vec<f64> = v.iter().zip(&w).map(|(a, b)| a - b).collect();
        let lhs = g(&sum) + g(&dif);
        let rhs = 2.0 * g(&v) + 2.0 * g(&w);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.max(1e-12), "{} {}", lhs, rhs);

        let rotated = s.recombine(&rotation(m)).unwrap();
        let gr = quadratic_form(&rotated, x, &v, 1e-8).unwrap().value.finite().unwrap();
        prop_assert!((gr - g(&v)).abs() <= 1e-9 * g(&v).max(1e-12));
    }

    #[test]
    fn minimal_controls_are_orthogonal_to_kernel(x2 in -1.0f64..1.0, c in point(2), on_axis in any::<bool>()) {
        let s = library::grushin();
        let x = [if on_axis { 0.0 } else { 0.3 }, x2];
        let mut v = vec![0.0; 2];
        s.numeric::<f64>().combine(&x, &c, &mut v);
        let p = min_norm_controls(&s, &x, &v, 1e-8).unwrap();
        let kernel = frame_kernel::<f64>(&s, &x);
        prop_assert_eq!(kernel.len(), usize::from(on_axis));
        for k in kernel {
            let dot: f64 = p.iter().zip(&k).map(|(a, b)| a * b).sum();
            prop_assert!(dot.abs() <= 1e-9);
        }
    }

    #[test]
    fn truncation_is_exact_and_homogeneous(k in 0usize..5, r in 1i64..=9, extra in field(3, 3)) {
        let mut s = polynomial_examples()[k].clone();
        let g = Grading::at_origin(&s).unwrap();
        if s.dim() == 3 && g.weights() == [1, 1, 2] {
            // Add a remainder of order ≥ 0 to the first field.
            let mut rem = Vec::new();
            for (j, p) in extra.components().iter().enumerate() {
                rem.push(Polynomial::from_terms(p.terms().filter(|(m, _)| {
                    subriemann::nilpotent::monomial_field_order(m, j, &g) >= 0
                }).map(|(m, c)| (m.clone(), c.clone()))));
            }
            let mut frame = s.poly_frame().unwrap();
            frame[0] = frame[0].add(&PolyVectorField::new(rem)).unwrap();
            s = SubRiemannianStructure::from_poly("perturbed", frame).unwrap();
        }
        let na = truncate(&s, &g).unwrap();
        prop_assert_eq!(na.reconstruct(), s.poly_frame().unwrap());
        let inv = q(1, r);
        for xh in &na.truncated {
            prop_assert_eq!(dilate_field(xh, &g, &inv).unwrap().scale(&q(r, 1)), xh.clone());
        }
        for rem in &na.remainders {
            let y = remainder_rescale(rem, &g, &inv).unwrap();
            for (a, b) in y.components().iter().zip(rem.components()) {
                for (m, c) in a.terms() {
                    let orig = b.coefficient(m).cloned().unwrap();
                    prop_assert!(c.clone() * c.clone() <= orig.clone() * orig * inv.clone() * inv.clone());
                }
            }
        }
    }

    #[test]
    fn dilations_compose(z in point(3), a in 0.1f64..3.0, b in 0.1f64..3.0) {
        let g = Grading::new(vec![1, 1, 2]).unwrap();
        let lhs = dilate(&dilate(&z, &g, a).unwrap(), &g, b).unwrap();
        let rhs = dilate(&z, &g, a * b).unwrap();
        prop_assert!(max_diff(&lhs, &rhs) <= 1e-12);
    }

    #[test]
    fn group_law_invariants(k in 0usize..3, seed in 0u64..1000) {
        let s = [library::heisenberg(), library::singruppo(), library::contact_corank1(2).unwrap()][k].clone();
        let na = truncate(&s, &Grading::at_origin(&s).unwrap()).unwrap();
        let law = group_law_from_flows(&na).unwrap();
        prop_assert!(law_invariants(&law, &na.grading, 5, seed).unwrap().max() <= 1e-8);
    }

    #[test]
    fn heisenberg_law_is_bch(x in point(3), y in point(3)) {
        let s = library::heisenberg();
        let na = truncate(&s, &Grading::at_origin(&s).unwrap()).unwrap();
        let law = group_law_from_flows(&na).unwrap();
        let z = law.op(&x, &y);
        let bch = [x[0] + y[0], x[1] + y[1], x[2] + y[2] + 0.5 * (x[0] * y[1] - x[1] * y[0])];
        prop_assert!(max_diff(&z, &bch) <= 1e-8);
    }

    #[test]
    fn vertical_halfspace_is_vertical_and_dilation_invariant(theta in 0.0f64..6.28, z in point(3), t in -1.0f64..1.0, r in 0.05f64..1.0) {
        let s = library::heisenberg();
        let na = truncate(&s, &Grading::at_origin(&s).unwrap()).unwrap();
        let f = vertical_halfspace(&[theta.cos(), theta.sin()], &na).unwrap();
        let shifted = [z[0], z[1], z[2] + t];
        prop_assert_eq!(f.indicator(&z), f.indicator(&shifted));
        let set = SetRep::from_poly(f.level_polynomial(), BoxRegion::cube(3, 1.0), 16).unwrap();
        let blown = rescale_set(&set, &[0.0; 3], &na.grading, r).unwrap();
        let lv = blown.value(&z);
        let lz = set.value(&z);
        prop_assert!((lv - r * lz).abs() <= 1e-9, "{} {}", lv, lz);
    }
}

fn flow_field(n: usize) -> impl Strategy<Value = PolyField> {
    field(n, 2).prop_map(|f| f.scale(&q(1, 4)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn flow_semigroup((x, x0) in (2usize..=3).prop_flat_map(|n| (flow_field(n), prop::collection::vec(-1.0f64..1.0, n))),
                      s in -0.3f64..0.3, t in -0.3f64..0.3) {
        let nf = NumericField::new(&x.to_expr());
        let opts = FlowOptions::default();
        let mid = flow(&nf, &x0, s, &opts).unwrap().endpoint;
        let two = flow(&nf, &mid, t, &opts).unwrap().endpoint;
        let one = flow(&nf, &x0, s + t, &opts).unwrap().endpoint;
        prop_assert!(max_diff(&two, &one) <= 1e-8);
    }

    #[test]
    fn liouville_expansion((x, x0) in (2usize..=3).prop_flat_map(|n| (flow_field(n), prop::collection::vec(-1.0f64..1.0, n)))) {
        let nf = NumericField::new(&x.to_expr());
        let div: f64 = {
            let d = x.euclidean_divergence().to_real::<f64>();
            d.eval(&x0)
        };
        let err = |t: f64| (flow(&nf, &x0, t, &FlowOptions::default()).unwrap().jacobian - 1.0 - t * div).abs();
        let c = (err(0.025) / 0.025f64.powi(2)).max(err(0.05) / 0.05f64.powi(2));
        prop_assert!(err(0.1) <= 8.0 * c * 0.01 + 1e-10, "{} {}", err(0.1), c);
    }
}

struct Sum(Bump, Bump);

impl TestFunction for Sum {
    fn value(&self, x: &[f64]) -> f64 {
        self.0.value(x) + self.1.value(x)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let mut tmp = vec![0.0; x.len()];
        self.0.gradient(x, out);
        self.1.gradient(x, &mut tmp);
        for (o, t) in out.iter_mut().zip(&tmp) {
            *o += t;
        }
    }

    fn support(&self) -> BoxRegion {
        let (a, b) = (self.0.support(), self.1.support());
        BoxRegion {
            lo: a.lo.iter().zip(&b.lo).map(|(x, y)| x.min(*y)).collect(),
            hi: a.hi.iter().zip(&b.hi).map(|(x, y)| x.max(*y)).collect(),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pairing_is_linear(
        cx in -0.3f64..0.3, cy in -0.3f64..0.3, a in -2.0f64..2.0, b in -2.0f64..2.0, shift in -0.5f64..0.5,
    ) {
        let x = library::grushin().frame()[1].clone();
        let grid = Grid::uniform(BoxRegion::cube(2, 1.0), 48);
        let u1 = grid.sample(|p| if p[0] + p[1] < shift { 1.0 } else { 0.0 });
        let u2 = grid.sample(|p| p[0] * p[1] + 1.0);
        let combo = GridFunction::new(grid.clone(), u1.values.iter().zip(&u2.values).map(|(p, r)| a * p + b * r).collect()).unwrap();
        let w = VolumeWeight::default();
        let phi = Bump::polynomial(vec![cx, cy], vec![0.5, 0.5]);
        let psi = Bump::smooth(vec![-cy, cx], vec![0.4, 0.6]);
        let pair = |u: &GridFunction, f: &dyn TestFunction| pair_distributional(&x, u, f, &w).unwrap();
        let lhs = pair(&combo, &phi);
        let rhs = a * pair(&u1, &phi) + b * pair(&u2, &phi);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
        let lhs = pair(&u1, &Sum(phi.clone().scaled(a), psi.clone()));
        let rhs = a * pair(&u1, &phi) + pair(&u1, &psi);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
    }
}
