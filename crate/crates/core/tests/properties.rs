use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use pifm::analytics::{
    commutativity_gap, comparison_strategies, gaussian_barycenter_oracle, pifm_transport_cost, GaussianSpec, Metric,
};
use pifm::field::{forward, jvp, lie_residual, AnalyticField, ModelConfig, ModelParams};
use pifm::geometry::{apply_map, PointCloud, RngStream, ShapeSpec, StreamId};
use pifm::inference::{all_axis_orders, generate, Integrator, Strategy as Route};
use pifm::training::{cond_mu, pi_loss, Sample};
use pifm::transport::{
    assignment_cost, free_support_barycenter, sinkhorn, sliced_w2, solve_assignment, squared_cost_matrix, w2_exact,
    BarycenterOptions, CoupledTuple, DenseMatrix,
};

fn cloud(d: usize, n: usize) -> impl Strategy<Value = PointCloud> {
    prop::collection::vec(-5.0..5.0f64, d * n).prop_map(move |c| PointCloud::new(d, c).unwrap())
}

fn int_cloud(d: usize, n: usize) -> impl Strategy<Value = PointCloud> {
    prop::collection::vec(-20i32..20, d * n)
        .prop_map(move |c| PointCloud::new(d, c.into_iter().map(f64::from).collect()).unwrap())
}

fn int_matrix(d: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-4i32..4, d * d).prop_map(move |v| DMatrix::from_iterator(d, d, v.into_iter().map(f64::from)))
}

fn brute_min(c: &DenseMatrix) -> f64 {
    let n = c.nrows();
    let mut best = f64::INFINITY;
    for p in all_axis_orders(n) {
        best = best.min(assignment_cost(c, &p));
    }
    best
}

fn permuted(c: &PointCloud, perm: &[usize]) -> PointCloud {
    c.select(perm)
}

fn shape() -> impl Strategy<Value = ShapeSpec> {
    prop_oneof![
        (-3.0..3.0f64, 0.1..2.0f64).prop_map(|(c, r)| ShapeSpec::disc(vec![c, -c], r)),
        (-3.0..3.0f64, 0.1..2.0f64).prop_map(|(c, h)| ShapeSpec::square(vec![c, 1.0], h)),
        (-3.0..3.0f64, 0.1..2.0f64).prop_map(|(m, v)| ShapeSpec::isotropic(vec![m, m], v)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn sampling_is_deterministic_with_unit_weights(s in shape(), n in 1usize..200, seed in any::<u64>()) {
        let a = s.sample(n, &mut RngStream::new(seed, StreamId::Data)).unwrap();
        let b = s.sample(n, &mut RngStream::new(seed, StreamId::Data)).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!((a.weights().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn apply_map_composes(x in int_cloud(2, 12), a in int_matrix(2), b in int_matrix(2)) {
        let zero = [0.0, 0.0];
        let twice = apply_map(&apply_map(&x, &a, &zero).unwrap(), &b, &zero).unwrap();
        let once = apply_map(&x, &(&b * &a), &zero).unwrap();
        prop_assert_eq!(twice.coords(), once.coords());
    }

    #[test]
    fn assignment_matches_exhaustive_search(n in 1usize..=7, vals in prop::collection::vec(0.0..10.0f64, 49)) {
        let c = DenseMatrix::from_fn(n, n, |i, j| vals[i * 7 + j]);
        let perm = solve_assignment(&c).unwrap();
        prop_assert!((assignment_cost(&c, &perm) - brute_min(&c)).abs() < 1e-9);
    }

    #[test]
    fn w2_is_a_metric(x in cloud(2, 10), y in cloud(2, 10), z in cloud(2, 10)) {
        let (xy, yx) = (w2_exact(&x, &y).unwrap(), w2_exact(&y, &x).unwrap());
        prop_assert!((xy - yx).abs() < 1e-9);
        let (xz, zy) = (w2_exact(&x, &z).unwrap(), w2_exact(&z, &y).unwrap());
        prop_assert!(xy <= xz + zy + 1e-9);
        prop_assert!(w2_exact(&x, &x).unwrap() < 1e-12);
    }

    #[test]
    fn w2_ignores_point_order(x in cloud(2, 9), y in cloud(2, 9), seed in any::<u64>()) {
        let mut rng = RngStream::new(seed, StreamId::Oracle);
        let (px, py) = (rng.permutation(9), rng.permutation(9));
        let base = w2_exact(&x, &y).unwrap();
        let shuffled = w2_exact(&permuted(&x, &px), &permuted(&y, &py)).unwrap();
        prop_assert!((base - shuffled).abs() < 1e-9);
    }

    #[test]
    fn sinkhorn_marginals_within_reported_error(x in cloud(2, 6), y in cloud(2, 8)) {
        let c = squared_cost_matrix(&x, &y).unwrap();
        let r = sinkhorn(&c, x.weights(), y.weights(), 1.0, 2000, 1e-10).unwrap();
        let mut row_err = 0.0;
        for (i, &a) in x.weights().iter().enumerate() {
            row_err += ((0..8).map(|j| r.plan[(i, j)]).sum::<f64>() - a).abs();
        }
        prop_assert!(row_err <= r.marginal_error + 1e-12);
        for (j, &b) in y.weights().iter().enumerate() {
            prop_assert!(((0..6).map(|i| r.plan[(i, j)]).sum::<f64>() - b).abs() < 1e-9);
        }
    }

    #[test]
    fn barycenter_objective_never_increases(a in cloud(2, 16), b in cloud(2, 16), l in 0.0..1.0f64) {
        let (_, report) = free_support_barycenter(&[a, b], &[l, 1.0 - l], &BarycenterOptions::default()).unwrap();
        for w in report.objective.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9, "{:?}", report.objective);
        }
    }

    #[test]
    fn gaussian_oracle_mean_is_affine(p in (0.0..1.0f64, 0.0..1.0f64), q in (-1.0..2.0f64, -1.0..2.0f64), k in 0u32..=8) {
        let spec = GaussianSpec {
            means: vec![vec![0.0, 0.0], vec![4.0, 0.0], vec![0.0, 4.0]],
            cov: vec![vec![0.25, 0.0], vec![0.0, 0.25]],
        };
        let a = f64::from(k) / 8.0;
        let (p, q) = ([p.0, p.1], [q.0, q.1]);
        let mix = [a * p[0] + (1.0 - a) * q[0], a * p[1] + (1.0 - a) * q[1]];
        let (mp, _) = gaussian_barycenter_oracle(&spec, &p).unwrap();
        let (mq, _) = gaussian_barycenter_oracle(&spec, &q).unwrap();
        let (mm, _) = gaussian_barycenter_oracle(&spec, &mix).unwrap();
        for c in 0..2 {
            prop_assert!((mm[c] - (a * mp[c] + (1.0 - a) * mq[c])).abs() < 1e-12);
        }
    }

    #[test]
    fn transport_cost_matches_pairwise_form(a in cloud(2, 5), b in cloud(2, 5), c in cloud(2, 5), t in (0.0..1.0f64, 0.0..1.0f64)) {
        // Weighted variance about the weighted mean equals ½ Σ_ij w_i w_j ‖p_i − p_j‖².
        let t = [t.0, t.1];
        let got = pifm_transport_cost(&a, &[b.clone(), c.clone()], &t).unwrap();
        let w = [1.0 - t[0] - t[1], t[0], t[1]];
        let mut want = 0.0;
        for k in 0..5 {
            let p = [a.point(k), b.point(k), c.point(k)];
            for i in 0..3 {
                for j in 0..3 {
                    let sq: f64 = p[i].iter().zip(p[j]).map(|(u, v)| (u - v) * (u - v)).sum();
                    want += 0.5 * w[i] * w[j] * sq;
                }
            }
        }
        want /= 5.0;
        prop_assert!((got - want).abs() < 1e-9 * want.abs().max(1.0));
    }

    #[test]
    fn transport_cost_is_quadratic(a in cloud(2, 4), b in cloud(2, 4), c in cloud(2, 4), probe in (-1.0..2.0f64, -1.0..2.0f64)) {
        let pts = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (0.5, 0.0), (0.0, 0.5), (0.5, 0.5)];
        let imgs = [b, c];
        let cost = |t: f64, s: f64| pifm_transport_cost(&a, &imgs, &[t, s]).unwrap();
        let basis = |t: f64, s: f64| [1.0, t, s, t * t, t * s, s * s];
        let m = DMatrix::from_fn(6, 6, |r, k| basis(pts[r].0, pts[r].1)[k]);
        let rhs = DVector::from_iterator(6, pts.iter().map(|&(t, s)| cost(t, s)));
        let coef = m.lu().solve(&rhs).unwrap();
        let fit: f64 = basis(probe.0, probe.1).iter().zip(coef.iter()).map(|(u, v)| u * v).sum();
        let got = cost(probe.0, probe.1);
        prop_assert!((fit - got).abs() < 1e-8 * got.abs().max(1.0), "{fit} vs {got}");
    }

    #[test]
    fn boundary_conditions_of_conditional_mean(a in prop::collection::vec(-5.0..5.0f64, 2), b1 in prop::collection::vec(-5.0..5.0f64, 2), b2 in prop::collection::vec(-5.0..5.0f64, 2)) {
        let z = CoupledTuple { a: a.clone(), b: vec![b1.clone(), b2.clone()] };
        prop_assert_eq!(cond_mu(&z, &[0.0, 0.0]), a);
        prop_assert_eq!(cond_mu(&z, &[1.0, 0.0]), b1);
        prop_assert_eq!(cond_mu(&z, &[0.0, 1.0]), b2);
    }

    #[test]
    fn constant_fields_commute(c1 in prop::collection::vec(-3.0..3.0f64, 2), c2 in prop::collection::vec(-3.0..3.0f64, 2), x in cloud(2, 20), t in (0.0..1.5f64, 0.0..1.5f64)) {
        let f = AnalyticField::constant(vec![c1, c2]).unwrap();
        prop_assert_eq!(lie_residual(&f, 0, 1, x.point(0), &[t.0, t.1]).unwrap(), vec![0.0, 0.0]);
        let report = commutativity_gap(&f, &x, &[t.0, t.1], 16, Metric::Exact, None, 0).unwrap();
        prop_assert!(report.max_gap < 1e-9, "{}", report.max_gap);
    }

    #[test]
    fn euler_is_exact_on_constant_fields(c in prop::collection::vec(-3.0..3.0f64, 4), x in cloud(2, 5), steps in 1usize..60, t in (0.0..2.0f64, 0.0..2.0f64)) {
        let f = AnalyticField::constant(vec![c[..2].to_vec(), c[2..].to_vec()]).unwrap();
        for s in comparison_strategies(&[t.0, t.1]).unwrap() {
            let end = generate(&f, &x, &s, steps, Integrator::Euler).unwrap();
            for (e, p) in end.points().zip(x.points()) {
                for k in 0..2 {
                    let want = p[k] + t.0 * c[k] + t.1 * c[2 + k];
                    prop_assert!((e[k] - want).abs() < 1e-12 * want.abs().max(1.0));
                }
            }
        }
    }
}

#[test]
fn jvp_matches_finite_differences_over_100_draws() {
    let mut rng = RngStream::new(21, StreamId::Oracle);
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let n = 1 + k % 3;
        let mut cfg = ModelConfig::new(n, 2, 4 + k % 13, 1 + k % 3);
        cfg.fourier_features = k % 2;
        let m = ModelParams::init(cfg, &mut RngStream::keyed(21, StreamId::Params, k as u32)).unwrap();
        let x: Vec<f64> = (0..2).map(|_| rng.normal()).collect();
        let t: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
        let dx: Vec<f64> = (0..2).map(|_| rng.normal()).collect();
        let dt: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let tan = jvp(&m, &x, &t, &dx, &dt).unwrap();
        let h = 1e-5;
        let at = |s: f64| {
            let xs: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + s * b).collect();
            let ts: Vec<f64> = t.iter().zip(&dt).map(|(a, b)| a + s * b).collect();
            forward(&m, &xs, &ts).unwrap().as_slice().to_vec()
        };
        let (up, dn) = (at(h), at(-h));
        let num = tan.as_slice().iter().zip(up.iter().zip(&dn)).map(|(g, (u, d))| {
            let fd = (u - d) / (2.0 * h);
            (g - fd) * (g - fd)
        });
        let err = num.sum::<f64>().sqrt() / tan.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-8);
        worst = worst.max(err);
    }
    assert!(worst < 1e-5, "worst relative error {worst}");
}

#[test]
fn pi_loss_vanishes_for_constant_heads() {
    let cfg = ModelConfig::new(3, 2, 6, 2);
    let mut m = ModelParams::init(cfg, &mut RngStream::new(4, StreamId::Params)).unwrap();
    // Zero head weights leave each head equal to its bias.
    for h in m.head_blocks().to_vec() {
        m.theta_mut()[h.w..h.b].iter_mut().for_each(|v| *v = 0.0);
    }
    let mut rng = RngStream::new(5, StreamId::Noise);
    let batch: Vec<Sample> = (0..4)
        .map(|_| Sample {
            x: vec![rng.normal(), rng.normal()],
            t: vec![rng.uniform(), rng.uniform(), rng.uniform()],
            target: (0..6).map(|_| rng.normal()).collect(),
        })
        .collect();
    assert_eq!(pi_loss(&m, &batch).unwrap().0, 0.0);
}

#[test]
fn sliced_is_below_exact_with_slack() {
    let mut rng = RngStream::new(8, StreamId::Oracle);
    for (a, b) in [
        (ShapeSpec::disc(vec![0.0, 0.0], 1.0), ShapeSpec::square(vec![2.0, 1.0], 0.5)),
        (ShapeSpec::isotropic(vec![0.0, 0.0], 1.0), ShapeSpec::isotropic(vec![0.0, 0.0], 0.25)),
    ] {
        let x = a.sample(256, &mut rng).unwrap();
        let y = b.sample(256, &mut rng).unwrap();
        let exact = w2_exact(&x, &y).unwrap();
        let sliced = sliced_w2(&x, &y, 256, &mut rng).unwrap();
        assert!(sliced <= 1.2 * exact, "sliced {sliced} exact {exact}");
    }
}

#[test]
fn orderings_are_enumerated() {
    for (n, count) in [(1, 1), (2, 2), (3, 6), (4, 24)] {
        let orders = all_axis_orders(n);
        assert_eq!(orders.len(), count);
        let mut sorted = orders.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), count);
    }
    let s = comparison_strategies(&[1.0, 1.0]).unwrap();
    assert!(s.iter().any(|s| matches!(s, Route::Diagonal { .. })));
}
