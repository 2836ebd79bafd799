use bbis::bridges::{proposal_log_density, sample_ensemble, scale_bridge};
use bbis::field::{generate_perlin_field, quadratic_distance_field, GridSpec};
use bbis::likelihood::{bbis_interval_logdensity, em_track_loglik, LikelihoodConfig, NodeSpec, TrackLikelihood};
use bbis::model::{grad_log_rsf, RsfModel};
use bbis::oracle::{OracleCase, OuParams};
use bbis::{Field, Model, Point, Track};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn landscape() -> Vec<Field> {
    let grid = GridSpec::square(100.0, 201).unwrap();
    vec![
        generate_perlin_field(1, 0.05, grid).unwrap(),
        generate_perlin_field(2, 0.05, grid).unwrap(),
        quadratic_distance_field(Point::new(0.0, 0.0)),
    ]
}

fn random_point(rng: &mut ChaCha8Rng, w: f64) -> Point {
    Point::new(rng.random_range(-w..w), rng.random_range(-w..w))
}

fn gaussian_logdensity(x: Point, mean: Point, var: f64) -> f64 {
    -(2.0 * std::f64::consts::PI * var).ln() - (x - mean).norm_sq() / (2.0 * var)
}

/// Euler-Maruyama step density from the per-covariate gradient.
fn em_oracle(model: &Model, y: Point, x: Point, dt: f64) -> f64 {
    let var = model.gamma_sq() * dt;
    gaussian_logdensity(x, y + grad_log_rsf(model, y) * (var / 2.0), var)
}

/// Straightforward importance-sampling estimate: build each scaled bridge,
/// score it under the Euler-Maruyama chain, divide by the proposal density.
fn bbis_oracle(model: &Model, y: Point, x: Point, dt: f64, n: usize, m: usize, seed: u64) -> f64 {
    let h = dt / (n + 1) as f64;
    let ens = sample_ensemble::<f64>(m, n, h, seed).unwrap();
    let gamma = model.gamma_sq().sqrt();
    let weights: Vec<f64> = (0..m)
        .map(|j| {
            let mut path = vec![y];
            path.extend(scale_bridge(&ens, j, y, x, gamma).unwrap());
            path.push(x);
            let chain: f64 = path.windows(2).map(|w| em_oracle(model, w[0], w[1], h)).sum();
            chain - proposal_log_density(&ens, j, gamma).unwrap()
        })
        .collect();
    let top = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    top + (weights.iter().map(|w| (w - top).exp()).sum::<f64>() / m as f64).ln()
}

fn two_point(y: Point, x: Point, dt: f64) -> Track<f64> {
    Track::new(vec![0.0, dt], vec![y, x]).unwrap()
}

#[test]
fn zero_nodes_is_euler_maruyama() {
    let fields = landscape();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let beta = vec![rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-0.2..0.0)];
        let model = RsfModel::new(fields.clone(), beta, rng.random_range(0.5..10.0)).unwrap();
        let y = random_point(&mut rng, 60.0);
        let x = y + random_point(&mut rng, 3.0);
        let dt = rng.random_range(0.05..2.0);
        let config = LikelihoodConfig::fixed(0, rng.random_range(1..20), rng.random());
        let lik = TrackLikelihood::new(two_point(y, x, dt), config).unwrap();
        let got = lik.loglik(&model).unwrap();
        let expected = em_oracle(&model, y, x, dt);
        assert!((got - expected).abs() < 1e-12 * expected.abs().max(1.0), "{got} vs {expected}");
    }
}

#[test]
fn matches_a_direct_importance_sampler() {
    let fields = landscape();
    let model = RsfModel::new(fields, vec![4.0, 2.0, -0.1], 5.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for (n, m) in [(1, 3), (9, 20), (49, 50)] {
        for _ in 0..5 {
            let y = random_point(&mut rng, 40.0);
            let x = y + random_point(&mut rng, 2.0);
            let dt = rng.random_range(0.2..1.5);
            let seed = rng.random();
            let ens = sample_ensemble::<f64>(m, n, dt / (n + 1) as f64, seed).unwrap();
            let got = bbis_interval_logdensity(&model, y, x, dt, &ens).unwrap();
            let expected = bbis_oracle(&model, y, x, dt, n, m, seed);
            assert!((got - expected).abs() < 1e-9, "N = {n}: {got} vs {expected}");
        }
    }
}

#[test]
fn rescaled_ensembles_give_the_same_estimate() {
    // a TargetStep ensemble drawn at h = 0.01 serves an interval with
    // dt / (N + 1) = 0.0102; Brownian scaling makes it the same bridges
    let fields = landscape();
    let model = RsfModel::new(fields, vec![4.0, 2.0, -0.1], 5.0).unwrap();
    let (y, x, dt) = (Point::new(3.0, -4.0), Point::new(4.5, -2.0), 1.02);
    let config = LikelihoodConfig::target_step(0.01, 30, 77);
    let lik = TrackLikelihood::new(two_point(y, x, dt), config).unwrap();
    assert_eq!(lik.ensembles()[0].node_count(), 101);
    let expected = bbis_oracle(&model, y, x, dt, 101, 30, 77);
    assert!((lik.loglik(&model).unwrap() - expected).abs() < 1e-9);
}

#[test]
fn zero_drift_is_exact_for_every_bridge_count() {
    let model = OracleCase::Brownian.model::<f64>();
    let pairs = OracleCase::Brownian.sample_intervals(100, 1.0, 4).unwrap();
    for m in [1, 5, 50] {
        let ens = sample_ensemble::<f64>(m, 20, 1.0 / 21.0, 9).unwrap();
        for &(y, x) in &pairs {
            let exact = gaussian_logdensity(x, y, 5.0);
            let got = bbis_interval_logdensity(&model, y, x, 1.0, &ens).unwrap();
            assert!((got - exact).abs() < 1e-6, "M = {m}: {got} vs {exact}");
        }
    }
}

/// OU transition density written out from the SDE solution.
fn ou_exact(theta: f64, gamma_sq: f64, y: Point, x: Point, dt: f64) -> f64 {
    let mean = y * (-theta * dt).exp();
    let var = gamma_sq / (2.0 * theta) * (1.0 - (-2.0 * theta * dt).exp());
    gaussian_logdensity(x, mean, var)
}

#[test]
fn converges_to_the_ou_density_as_nodes_grow() {
    let case = OracleCase::OrnsteinUhlenbeck;
    let model = case.model::<f64>();
    let pairs = case.sample_intervals(40, 1.0, 5).unwrap();
    let mean_error = |n: usize| {
        let ens = sample_ensemble::<f64>(200, n, 1.0 / (n + 1) as f64, 13).unwrap();
        pairs
            .iter()
            .map(|&(y, x)| {
                (bbis_interval_logdensity(&model, y, x, 1.0, &ens).unwrap() - ou_exact(0.5, 5.0, y, x, 1.0)).abs()
            })
            .sum::<f64>()
            / pairs.len() as f64
    };
    let coarse = mean_error(1);
    let fine = mean_error(50);
    assert!(fine < coarse, "N = 50 error {fine} not below N = 1 error {coarse}");
    assert!(fine < 0.05, "N = 50 error {fine}");
}

#[test]
fn estimator_variance_shrinks_like_one_over_m() {
    let case = OracleCase::OrnsteinUhlenbeck;
    let model = case.model::<f64>();
    let (y, x) = (Point::new(2.0, -1.0), Point::new(0.5, 1.5));
    let spread = |m: usize| {
        let values: Vec<f64> = (0..300u64)
            .map(|s| {
                let ens = sample_ensemble::<f64>(m, 20, 1.0 / 21.0, 1000 + s).unwrap();
                bbis_interval_logdensity(&model, y, x, 1.0, &ens).unwrap()
            })
            .collect();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64
    };
    let ratio = spread(10) / spread(40);
    assert!((2.5..6.5).contains(&ratio), "variance ratio {ratio}, expected about 4");
}

#[test]
fn log_likelihood_is_additive_over_track_pieces() {
    let fields = landscape();
    let model = RsfModel::new(fields, vec![4.0, 2.0, -0.1], 5.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut points = vec![Point::new(1.0, 1.0)];
    for _ in 0..30 {
        let last = *points.last().unwrap();
        points.push(last + random_point(&mut rng, 2.0));
    }
    let track = Track::new((0..31).map(|k| k as f64 * 0.5).collect(), points).unwrap();
    let config = LikelihoodConfig::fixed(9, 25, 3);
    let whole = TrackLikelihood::new(track.clone(), config.clone()).unwrap().loglik(&model).unwrap();
    let head = TrackLikelihood::new(track.slice(0, 13).unwrap(), config.clone()).unwrap().loglik(&model).unwrap();
    let tail = TrackLikelihood::new(track.slice(12, 31).unwrap(), config).unwrap().loglik(&model).unwrap();
    assert!((whole - head - tail).abs() < 1e-9 * whole.abs());

    let em = em_track_loglik(&model, &track);
    let by_hand: f64 = track.steps().map(|(y, x, dt)| em_oracle(&model, y, x, dt)).sum();
    assert!((em - by_hand).abs() < 1e-9 * em.abs());
}

#[test]
fn initial_density_term_is_optional() {
    let fields = landscape();
    let model = RsfModel::new(fields, vec![4.0, 2.0, -0.1], 5.0).unwrap();
    let track = Track::new(vec![0.0, 1.0, 2.0], vec![Point::new(5.0, 5.0), Point::new(6.0, 4.0), Point::new(6.5, 3.0)])
        .unwrap();
    let mut config = LikelihoodConfig::fixed(9, 10, 1);
    let without = TrackLikelihood::new(track.clone(), config.clone()).unwrap().loglik(&model).unwrap();
    config.include_initial_density = true;
    let with = TrackLikelihood::new(track, config).unwrap().loglik(&model).unwrap();
    let expected = model.log_rsf_unnormalized(Point::new(5.0, 5.0));
    assert!((with - without - expected).abs() < 1e-10);
}

#[test]
fn common_random_numbers_make_the_surface_smooth() {
    let fields = landscape();
    let model = RsfModel::new(fields, vec![4.0, 2.0, -0.1], 5.0).unwrap();
    let track = bbis::simulator::simulate_track(&model, Point::new(0.0, 0.0), 0.01, 5000, 8).unwrap();
    let obs = bbis::simulator::thin_track(&track, 100).unwrap();
    let lik = TrackLikelihood::new(obs, LikelihoodConfig::target_step(0.01, 20, 4)).unwrap();
    let at = |b1: f64| lik.loglik(&model.with_params(vec![b1, 2.0, -0.1], 5.0).unwrap()).unwrap();
    let slope = |eps: f64| (at(4.0 + eps) - at(4.0 - eps)) / (2.0 * eps);
    let (coarse, fine) = (slope(1e-3), slope(1e-4));
    assert!((coarse - fine).abs() < 1e-3 * coarse.abs().max(1.0), "{coarse} vs {fine}");
    assert_eq!(at(3.7), at(3.7));
}

#[test]
fn node_counts_follow_the_target_step() {
    let config = LikelihoodConfig::target_step(0.01, 5, 1);
    assert_eq!(config.nodes_for(1.0), 99);
    assert_eq!(config.nodes_for(0.1), 9);
    assert_eq!(config.nodes_for(0.05), 4);
    assert_eq!(config.nodes_for(0.015), 1);
    assert_eq!(LikelihoodConfig::<f64> { nodes: NodeSpec::Fixed(7), ..config }.nodes_for(3.0), 7);

    let track = Track::new(
        vec![0.0, 0.1, 1.1, 1.2],
        vec![Point::zero(), Point::new(0.1, 0.0), Point::new(1.0, 1.0), Point::new(1.0, 1.2)],
    )
    .unwrap();
    let lik = TrackLikelihood::new(track, config).unwrap();
    let counts: Vec<usize> = lik.ensembles().iter().map(|e| e.node_count()).collect();
    assert_eq!(counts, vec![9, 99]);
}

#[test]
fn ou_reduction_matches_the_quadratic_model() {
    let model = OracleCase::OrnsteinUhlenbeck.model::<f64>();
    let p = OuParams::from_quadratic_model(model.beta()[0], Point::zero(), model.gamma_sq()).unwrap();
    assert!((p.theta - 0.5).abs() < 1e-15);
    let (y, x) = (Point::new(1.0, 2.0), Point::new(-0.5, 1.0));
    let exact = OracleCase::OrnsteinUhlenbeck.exact_logdensity(y, x, 0.7).unwrap();
    assert!((exact - ou_exact(0.5, 5.0, y, x, 0.7)).abs() < 1e-12);
}

#[test]
fn single_precision_likelihood_tracks_double() {
    let grid = GridSpec::<f32>::square(100.0, 201).unwrap();
    let fields32 = vec![
        generate_perlin_field(1, 0.05f32, grid).unwrap(),
        quadratic_distance_field(bbis::Point2::new(0.0f32, 0.0)),
    ];
    let model32 = RsfModel::new(fields32, vec![4.0f32, -0.1], 5.0).unwrap();
    let fields64 = vec![landscape().remove(0), quadratic_distance_field(Point::new(0.0, 0.0))];
    let model64 = RsfModel::new(fields64, vec![4.0, -0.1], 5.0).unwrap();
    let fine = bbis::simulator::simulate_track(&model64, Point::new(1.0, 1.0), 0.01, 2000, 2).unwrap();
    let obs64 = bbis::simulator::thin_track(&fine, 100).unwrap();
    let obs32 = Track::new(
        obs64.times().iter().map(|&t| t as f32).collect(),
        obs64.points().iter().map(|p| bbis::Point2::new(p.x as f32, p.y as f32)).collect(),
    )
    .unwrap();
    let l64 = TrackLikelihood::new(obs64, LikelihoodConfig::fixed(19, 10, 3)).unwrap().loglik(&model64).unwrap();
    let l32 = TrackLikelihood::new(obs32, LikelihoodConfig::fixed(19, 10, 3)).unwrap().loglik(&model32).unwrap();
    assert!(((l32 as f64) - l64).abs() < 1e-3 * l64.abs(), "{l32} vs {l64}");
}
