mod support;

use approx::assert_abs_diff_eq;
use nalgebra::DMatrix;
use rand::Rng;
use reachtube::fit::{
    default_shapes, fit, fit_ball_radius, fit_ball_volume, fit_ellipsoid_fixed,
    fit_ellipsoid_logdet, fit_zonotope, FitConfig, FitResult, Geometry, LogdetMode, ShapeKind,
    TieBreak,
};
use reachtube::{Error, PNorm, PerturbationModel, SizeProxy, Trajectory, TrajectoryBatch, TubeParams};
use support::{batch_1d, batch_static, random_batch, rng};

const TOL: f64 = 1e-8;

fn centers(t: &TubeParams) -> &Vec<Vec<f64>> {
    match t {
        TubeParams::Ball { centers, .. }
        | TubeParams::EllipsoidFixed { centers, .. }
        | TubeParams::Zonotope { centers, .. } => centers,
        TubeParams::EllipsoidLogdet { .. } => panic!("no centers"),
    }
}

fn radius(r: &FitResult, k: usize) -> f64 {
    match &r.tube {
        TubeParams::Ball { radii, .. } => radii[k],
        _ => panic!("not a ball"),
    }
}

#[test]
fn single_trajectory_is_covered_for_free() {
    let b = TrajectoryBatch::new(vec![Trajectory::new(vec![
        vec![0.5, -1.0],
        vec![0.7, -0.2],
        vec![1.5, 0.0],
    ])
    .unwrap()])
    .unwrap();
    for cfg in [
        FitConfig::ball(PNorm::L2, 3.0),
        FitConfig::ball(PNorm::L1, 3.0),
        FitConfig::ball(PNorm::Inf, 0.1),
        FitConfig::ball_volume(PNorm::L2, 3.0),
        FitConfig::ellipsoid_fixed(vec![DMatrix::identity(2, 2)], 3.0),
        FitConfig::zonotope(vec![DMatrix::identity(2, 2)], 3.0),
    ] {
        let r = fit(&b, &cfg).unwrap();
        // The area objective is quadratic in r, so an objective accurate to
        // ~1e-8 only pins r (and the centers) down to ~sqrt(1e-8 / π).
        let eps = if cfg.proxy == SizeProxy::BallVolume { 1e-4 } else { 1e-6 };
        for k in 0..3 {
            for l in 0..2 {
                assert_abs_diff_eq!(centers(&r.tube)[k][l], b.get(0).state(k)[l], epsilon = eps);
            }
            assert_abs_diff_eq!(r.tube.size_proxy(k, cfg.proxy).unwrap(), 0.0, epsilon = 1e-6);
        }
        assert!(r.slacks[0] <= 1e-6);
    }
}

#[test]
fn two_points_large_rho_covers_both() {
    let b = batch_1d(&[-1.0, 1.0]);
    let r = fit_ball_radius(&b, &FitConfig::ball(PNorm::L2, 10.0)).unwrap();
    assert_abs_diff_eq!(radius(&r, 0), 1.0, epsilon = 1e-6);
    assert_abs_diff_eq!(centers(&r.tube)[0][0], 0.0, epsilon = 1e-6);
    assert!(r.slacks.iter().all(|s| s.abs() <= 1e-6));
    assert_abs_diff_eq!(r.objective_value, 1.0, epsilon = 1e-6);
}

#[test]
fn two_points_small_rho_pays_slack() {
    let b = batch_1d(&[-1.0, 1.0]);
    let r = fit_ball_radius(&b, &FitConfig::ball(PNorm::L2, 0.25)).unwrap();
    assert_abs_diff_eq!(radius(&r, 0), 0.0, epsilon = 1e-6);
    assert_abs_diff_eq!(r.slacks[0], 1.0, epsilon = 1e-6);
    assert_abs_diff_eq!(r.slacks[1], 1.0, epsilon = 1e-6);
    assert_abs_diff_eq!(r.objective_value, 0.5, epsilon = 1e-6);
    // Every c in [−1, 1] is optimal; the tie-break picks the minimum norm.
    assert!(matches!(r.diagnostics.tie_break, TieBreak::Applied { .. }));
    assert_abs_diff_eq!(centers(&r.tube)[0][0], 0.0, epsilon = 1e-5);
}

#[test]
fn perturbation_box_inflates_the_radius() {
    let b = batch_1d(&[-1.0, 1.0]);
    let cfg = FitConfig::ball(PNorm::L2, 10.0)
        .with_perturbation(PerturbationModel::uniform_box(1, 0.1).unwrap());
    let r = fit_ball_radius(&b, &cfg).unwrap();
    assert_abs_diff_eq!(radius(&r, 0), 1.1, epsilon = 1e-6);
}

#[test]
fn volume_in_one_dimension_halves_rho() {
    let b = batch_1d(&[-1.0, 0.2, 1.0, 3.0]);
    for rho in [0.1, 0.3, 0.6, 2.0] {
        let vol = fit_ball_volume(&b, &FitConfig::ball_volume(PNorm::L2, rho)).unwrap();
        let rad = fit_ball_radius(&b, &FitConfig::ball(PNorm::L2, rho / 2.0)).unwrap();
        assert_abs_diff_eq!(radius(&vol, 0), radius(&rad, 0), epsilon = 1e-5);
        assert_abs_diff_eq!(centers(&vol.tube)[0][0], centers(&rad.tube)[0][0], epsilon = 1e-5);
    }
}

#[test]
fn volume_matches_enclosing_circle_grid() {
    let pts = [vec![0.0, 0.0], vec![2.0, 0.0], vec![0.5, 1.5]];
    let b = batch_static(&pts);
    let r = fit_ball_volume(&b, &FitConfig::ball_volume(PNorm::L2, 1e3)).unwrap();
    // Dense grid over centers; the radius is the farthest point.
    let mut best = f64::INFINITY;
    let steps = 1500;
    for a in 0..=steps {
        for c in 0..=steps {
            let x = -0.5 + 3.0 * a as f64 / steps as f64;
            let y = -1.0 + 3.0 * c as f64 / steps as f64;
            let rad = pts
                .iter()
                .map(|p| ((p[0] - x).powi(2) + (p[1] - y).powi(2)).sqrt())
                .fold(0.0, f64::max);
            best = best.min(std::f64::consts::PI * rad * rad);
        }
    }
    assert!((r.objective_value - best).abs() <= 1e-3, "{} vs {best}", r.objective_value);
}

#[test]
fn fixed_ellipsoid_scale_example() {
    let b = batch_static(&[vec![-1.0, 0.0], vec![1.0, 0.0]]);
    let h = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 1.0]));
    let r = fit_ellipsoid_fixed(&b, &FitConfig::ellipsoid_fixed(vec![h], 100.0)).unwrap();
    assert_abs_diff_eq!(r.tube.size_proxy(0, SizeProxy::Scale).unwrap(), 2.0, epsilon = 1e-6);
    assert_abs_diff_eq!(centers(&r.tube)[0][0], 0.0, epsilon = 1e-6);
    assert_abs_diff_eq!(centers(&r.tube)[0][1], 0.0, epsilon = 1e-6);
}

#[test]
fn fixed_ellipsoid_rejects_indefinite_shape() {
    let b = batch_static(&[vec![-1.0, 0.0], vec![1.0, 0.0]]);
    let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
    assert!(fit(&b, &FitConfig::ellipsoid_fixed(vec![h], 1.0)).is_err());
}

#[test]
fn logdet_interval_example() {
    let b = batch_1d(&[-1.0, 1.0]);
    let r = fit_ellipsoid_logdet(&b, &FitConfig::ellipsoid_logdet(100.0)).unwrap();
    let TubeParams::EllipsoidLogdet { matrices, offsets } = &r.tube else {
        panic!()
    };
    assert_abs_diff_eq!(matrices[0][(0, 0)], 1.0, epsilon = 1e-5);
    assert_abs_diff_eq!(offsets[0][0], 0.0, epsilon = 1e-5);
    assert!(r.slacks.iter().all(|s| *s <= 1e-6));
}

#[test]
fn logdet_symmetric_data_has_zero_offset() {
    let b = batch_static(&[
        vec![1.0, 0.5],
        vec![-1.0, -0.5],
        vec![0.3, -2.0],
        vec![-0.3, 2.0],
    ]);
    let r = fit(&b, &FitConfig::ellipsoid_logdet(5.0)).unwrap();
    let TubeParams::EllipsoidLogdet { offsets, .. } = &r.tube else {
        panic!()
    };
    assert!(offsets[0].iter().all(|b| b.abs() < 1e-5), "{offsets:?}");
}

#[test]
fn logdet_degenerate_axis_is_reported() {
    let b = batch_static(&[vec![1.0, 2.0], vec![-1.0, 2.0], vec![0.5, 2.0]]);
    let err = fit(&b, &FitConfig::ellipsoid_logdet(1.0)).unwrap_err();
    assert_eq!(err, Error::Unbounded { k: 0, axis: 1 });
}

#[test]
fn logdet_full_mode_is_refused() {
    let b = batch_1d(&[-1.0, 1.0]);
    let mut cfg = FitConfig::ellipsoid_logdet(1.0);
    cfg.geometry = Geometry::EllipsoidLogdet {
        mode: LogdetMode::Full,
    };
    assert!(matches!(fit(&b, &cfg), Err(Error::Config(_))));
}

#[test]
fn zonotope_interval_and_box_examples() {
    let b = batch_1d(&[-1.0, 1.0]);
    let r = fit_zonotope(&b, &FitConfig::zonotope(vec![DMatrix::identity(1, 1)], 10.0)).unwrap();
    assert_abs_diff_eq!(centers(&r.tube)[0][0], 0.0, epsilon = 1e-6);
    assert_abs_diff_eq!(r.tube.size_proxy(0, SizeProxy::HalfwidthSum).unwrap(), 1.0, epsilon = 1e-6);

    let corners = [
        vec![1.0, 1.0],
        vec![1.0, -1.0],
        vec![-1.0, 1.0],
        vec![-1.0, -1.0],
    ];
    let r = fit_zonotope(
        &batch_static(&corners),
        &FitConfig::zonotope(vec![DMatrix::identity(2, 2)], 100.0),
    )
    .unwrap();
    let TubeParams::Zonotope {
        centers, half_widths, ..
    } = &r.tube
    else {
        panic!()
    };
    for l in 0..2 {
        assert_abs_diff_eq!(centers[0][l], 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(half_widths[0][l], 1.0, epsilon = 1e-6);
    }
}

#[test]
fn zonotope_rejects_rank_deficient_generators() {
    let b = batch_static(&[vec![-1.0, 0.0], vec![1.0, 0.0]]);
    let g = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
    assert!(fit(&b, &FitConfig::zonotope(vec![g], 1.0)).is_err());
}

#[test]
fn mismatched_proxy_or_entry_point_is_refused() {
    let b = batch_1d(&[-1.0, 1.0]);
    let cfg = FitConfig::ball(PNorm::L2, 1.0).with_proxy(SizeProxy::Scale);
    assert!(matches!(fit(&b, &cfg), Err(Error::Config(_))));
    assert!(fit_zonotope(&b, &FitConfig::ball(PNorm::L2, 1.0)).is_err());
    assert!(fit(&b, &FitConfig::ball(PNorm::L2, 0.0)).is_err());
    assert!(fit(&b, &FitConfig::ball(PNorm::L2, -1.0)).is_err());
}

#[test]
fn default_shapes_whiten_isotropic_data() {
    let mut g = rng(11);
    let sigma = 0.4;
    let normal = rand_distr::Normal::new(0.0, sigma).unwrap();
    let pts: Vec<Vec<f64>> = (0..10_000)
        .map(|_| vec![g.sample(normal), g.sample(normal)])
        .collect();
    let s = default_shapes(&batch_static(&pts), ShapeKind::Ellipsoid).unwrap();
    let h = &s.matrices[0];
    let target = DMatrix::identity(2, 2) / sigma;
    assert!((h - &target).amax() <= 0.1 / sigma, "{h}");
}

#[test]
fn default_shapes_drive_a_fit() {
    let b = random_batch(&mut rng(5), 12, 3, 2);
    let e = fit(&b, &FitConfig::ellipsoid_fixed(vec![], 2.0)).unwrap();
    assert!(e.diagnostics.notes.is_empty());
    let z = fit(&b, &FitConfig::zonotope(vec![], 2.0)).unwrap();
    let TubeParams::Zonotope { generators, .. } = &z.tube else {
        panic!()
    };
    assert_eq!(generators[0].shape(), (2, 4));
}

fn configs(n: usize, rho: f64, shapes: &[DMatrix<f64>], gens: &[DMatrix<f64>]) -> Vec<FitConfig> {
    let mut v = vec![
        FitConfig::ball(PNorm::L1, rho),
        FitConfig::ball(PNorm::L2, rho),
        FitConfig::ball(PNorm::Inf, rho),
        FitConfig::ellipsoid_fixed(shapes.to_vec(), rho),
        FitConfig::ellipsoid_logdet(rho),
        FitConfig::zonotope(gens.to_vec(), rho),
    ];
    if n <= 2 {
        v.push(FitConfig::ball_volume(PNorm::L2, rho));
    }
    v
}

fn random_spd(g: &mut rand_chacha::ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| g.random_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(n, n) * 0.5
}

fn random_generators(g: &mut rand_chacha::ChaCha8Rng, n: usize, m: usize) -> DMatrix<f64> {
    let mut gm = DMatrix::from_fn(n, m, |_, _| g.random_range(-1.0..1.0));
    for l in 0..n {
        gm[(l, l)] += 2.0;
    }
    gm
}

#[test]
fn fitted_objective_matches_barrier_oracle() {
    let mut g = rng(2024);
    for case in 0..12 {
        let n = 1 + case % 2;
        let steps = 1 + case % 3;
        let count = 1 + g.random_range(1..4);
        let b = random_batch(&mut g, count, steps, n);
        let shapes = vec![random_spd(&mut g, n)];
        let gens = vec![random_generators(&mut g, n, n + 1)];
        let rho = [0.1, 0.4, 1.0, 5.0][case % 4];
        let gamma = if case % 3 == 0 { 0.05 } else { 0.0 };
        for cfg in configs(n, rho, &shapes, &gens) {
            let cfg = cfg.with_perturbation(PerturbationModel::uniform_box(n, gamma).unwrap());
            let r = fit(&b, &cfg).unwrap();
            let oracle = support::fit_oracle::objective(&b, &cfg);
            assert!(
                (r.objective_value - oracle).abs() <= 1e-6 * oracle.abs().max(1.0),
                "case {case} {}: fit {} oracle {oracle}",
                cfg.geometry.name(),
                r.objective_value
            );
        }
    }
}

#[test]
fn slack_complementarity_and_robust_feasibility() {
    let mut g = rng(99);
    let b = random_batch(&mut g, 8, 3, 2);
    let model = PerturbationModel::uniform_box(2, 0.05).unwrap();
    let shapes = vec![random_spd(&mut g, 2)];
    let gens = vec![random_generators(&mut g, 2, 4)];
    for cfg in configs(2, 0.3, &shapes, &gens) {
        let cfg = cfg.with_perturbation(model.clone());
        let r = fit(&b, &cfg).unwrap();
        for (i, x) in b.iter().enumerate() {
            let mut worst = f64::NEG_INFINITY;
            for k in 0..x.len() {
                for v in model.vertices(x.state(k)).unwrap() {
                    let m = r.tube.margin(k, &v).unwrap();
                    assert!(m <= r.slacks[i] + 10.0 * TOL);
                    worst = worst.max(m);
                }
            }
            assert!((r.slacks[i] - worst.max(0.0)).abs() <= 10.0 * TOL);
            assert!(r.slacks[i] >= -TOL);
        }
    }
}

#[test]
fn scalarization_is_monotone_in_rho() {
    let mut g = rng(3);
    let b = random_batch(&mut g, 10, 2, 2);
    let shapes = vec![random_spd(&mut g, 2)];
    let gens = vec![random_generators(&mut g, 2, 3)];
    let rhos = [0.05, 0.2, 0.5, 1.0, 5.0];
    for base in configs(2, 1.0, &shapes, &gens) {
        let fits: Vec<FitResult> = rhos
            .iter()
            .map(|&rho| fit(&b, &base.clone().with_rho(rho)).unwrap())
            .collect();
        for w in fits.windows(2) {
            let tol = 1e-6 * w[1].size_total().abs().max(1.0);
            assert!(w[0].size_total() <= w[1].size_total() + tol, "{}", base.geometry.name());
            assert!(w[0].slack_total() >= w[1].slack_total() - 1e-6, "{}", base.geometry.name());
        }
    }
}

#[test]
fn hard_constraint_limit_covers_every_vertex() {
    let mut g = rng(8);
    let b = random_batch(&mut g, 10, 3, 2);
    let model = PerturbationModel::uniform_box(2, 0.03).unwrap();
    let shapes = vec![random_spd(&mut g, 2)];
    let gens = vec![random_generators(&mut g, 2, 4)];
    for cfg in configs(2, 1e6, &shapes, &gens) {
        let cfg = cfg.with_perturbation(model.clone());
        let r = fit(&b, &cfg).unwrap();
        assert!(r.slack_total() <= 1e-4, "{}: {}", cfg.geometry.name(), r.slack_total());
    }
}

#[test]
fn identity_ellipsoid_equals_euclidean_ball() {
    let mut g = rng(21);
    for _ in 0..5 {
        let b = random_batch(&mut g, 6, 3, 2);
        let rho = g.random_range(0.1..3.0);
        let ball = fit(&b, &FitConfig::ball(PNorm::L2, rho)).unwrap();
        let ell = fit(&b, &FitConfig::ellipsoid_fixed(vec![DMatrix::identity(2, 2)], rho)).unwrap();
        assert!((ball.objective_value - ell.objective_value).abs() <= 2.0 * TOL);
    }
}

#[test]
fn fits_are_deterministic() {
    let b = random_batch(&mut rng(4), 9, 3, 2);
    let cfg = FitConfig::zonotope(vec![], 0.7)
        .with_perturbation(PerturbationModel::uniform_box(2, 0.02).unwrap());
    assert_eq!(fit(&b, &cfg).unwrap(), fit(&b, &cfg).unwrap());
}

#[test]
fn oversized_programs_are_refused() {
    let b = batch_1d(&[0.0, 1.0]);
    let offsets: Vec<Vec<f64>> = (0..6_000_000).map(|i| vec![if i == 0 { 0.0 } else { 1e-3 }]).collect();
    let model = PerturbationModel {
        kind: reachtube::PerturbationKind::VertexList { offsets },
        radius: 1e-3,
    };
    let err = fit(&b, &FitConfig::ball(PNorm::L2, 1.0).with_perturbation(model)).unwrap_err();
    assert!(matches!(err, Error::Config(_)));
}
