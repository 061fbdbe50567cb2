//! Cross-module checks: smoothing error against known noise, recovery of the
//! confounding coefficient function, score/quadrature agreement, and cluster
//! recovery on the bundled geometry.

use funscan::adjust::{self, AdjustmentMode, AdjustOptions};
use funscan::fda::{self, BasisSystem};
use funscan::geo;
use funscan::glm::{self, Dataset, Family};
use funscan::scan::{self, MonteCarloResult, Sidedness};
use funscan::sim::{self, SimulationConfig};
use ndarray::Array1;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    cov / (va * vb).sqrt()
}

/// Composite Simpson on [lo, hi] with `panels` even subintervals.
fn simpson(lo: f64, hi: f64, panels: usize, f: impl Fn(f64) -> f64) -> f64 {
    assert!(panels.is_multiple_of(2));
    let h = (hi - lo) / panels as f64;
    let mut acc = f(lo) + f(hi);
    for k in 1..panels {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + h * k as f64);
    }
    acc * h / 3.0
}

#[test]
fn smoothing_residuals_match_observation_noise() {
    let config = SimulationConfig::desk_scale();
    let geometry = sim::bundled_geometry();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let data = sim::generate_dataset(&config, &geometry, 1.0, sim::effect_scale(), &mut rng);

    let basis = BasisSystem::bspline((0.0, 21.0), 3, 13).unwrap();
    let k = basis.dimension();
    let coefficients = fda::smooth_series(&data.series, &basis).unwrap();

    let mut sum_sq = 0.0;
    let mut df = 0.0;
    for (i, series) in data.series.iter().enumerate() {
        for (&t, &v) in series.times.iter().zip(&series.values) {
            let phi = basis.eval(t).unwrap();
            let fitted: f64 = (0..k).map(|j| coefficients[[i, j]] * phi[j]).sum();
            sum_sq += (v - fitted).powi(2);
        }
        df += (series.times.len() - k) as f64;
    }
    let residual_var = sum_sq / df;
    let noise_var = config.noise_sd * config.noise_sd;
    let ratio = residual_var / noise_var;
    assert!(
        (0.9..1.2).contains(&ratio),
        "residual variance {residual_var:.5} vs noise variance {noise_var:.5}"
    );
}

#[test]
fn fitted_coefficient_function_tracks_generating_shape() {
    let config = SimulationConfig::desk_scale();
    let geometry = sim::bundled_geometry();
    let pops = Array1::from_vec(geometry.populations.clone());
    // The coefficient function is only identified where the curves vary:
    // every generated curve vanishes outside the union of the tent supports
    // [1, 17], so recovery is judged there. On the full interval the
    // estimate stays positively correlated but is capped by that blind spot.
    let grid: Vec<f64> = (0..=160).map(|j| 1.0 + 16.0 * j as f64 / 160.0).collect();
    let truth: Vec<f64> = grid.iter().map(|&t| sim::coefficient_shape(t)).collect();
    let full_grid: Vec<f64> = (0..=210).map(|j| 21.0 * j as f64 / 210.0).collect();
    let full_truth: Vec<f64> = full_grid.iter().map(|&t| sim::coefficient_shape(t)).collect();

    let mut correlations = Vec::new();
    let mut full_correlations = Vec::new();
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let data = sim::generate_dataset(&config, &geometry, 1.0, sim::effect_scale(), &mut rng);
        let model = adjust::build_adjusted_model(
            &data.y,
            Some(&pops),
            None,
            Some(&data.series),
            AdjustmentMode::Functional,
            &AdjustOptions::default(),
        )
        .unwrap();
        let fit = glm::fit_null(&model.dataset, Family::Poisson, model.truncation).unwrap();
        assert!(fit.converged);
        assert!(fit.truncation >= 1, "AIC should keep at least one component");

        let block = model.functional.as_ref().unwrap();
        let curve = glm::parameter_function(&fit, &block.design, &block.basis, &grid).unwrap();
        let estimate: Vec<f64> = curve.iter().map(|&(_, v)| v).collect();
        correlations.push(pearson(&estimate, &truth));
        let full = glm::parameter_function(&fit, &block.design, &block.basis, &full_grid).unwrap();
        let full_estimate: Vec<f64> = full.iter().map(|&(_, v)| v).collect();
        full_correlations.push(pearson(&full_estimate, &full_truth));
    }

    correlations.sort_by(|a, b| a.total_cmp(b));
    assert!(
        correlations[2] > 0.8,
        "median correlation with the generating shape too low: {correlations:?}"
    );
    assert!(correlations[0] > 0.7, "worst-case correlation: {correlations:?}");
    assert!(
        full_correlations.iter().all(|&r| r > 0.5),
        "full-domain correlation should stay clearly positive: {full_correlations:?}"
    );
}

#[test]
fn parameter_function_matches_eigenbasis_and_quadrature() {
    let config = SimulationConfig::desk_scale();
    let geometry = sim::bundled_geometry();
    let pops = Array1::from_vec(geometry.populations.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let data = sim::generate_dataset(&config, &geometry, 1.0, sim::effect_scale(), &mut rng);
    let model = adjust::build_adjusted_model(
        &data.y,
        Some(&pops),
        None,
        Some(&data.series),
        AdjustmentMode::Functional,
        &AdjustOptions::default(),
    )
    .unwrap();
    let block = model.functional.as_ref().unwrap();
    let (basis, design) = (&block.basis, &block.design);
    let k = design.dimension();
    let grid: Vec<f64> = (0..=84).map(|j| 21.0 * j as f64 / 84.0).collect();

    // truncation 0: the parameter function is identically zero
    let null0 = glm::fit_null(&model.dataset, Family::Poisson, 0).unwrap();
    for (_, v) in glm::parameter_function(&null0, design, basis, &grid).unwrap() {
        assert_eq!(v, 0.0);
    }

    // unit coefficient on one component reproduces that eigenfunction
    let mut unit = null0.clone();
    unit.truncation = 1;
    unit.theta = Array1::from_vec(vec![1.0]);
    for &(t, v) in &glm::parameter_function(&unit, design, basis, &grid).unwrap() {
        let phi1 = fda::eigenfunction_eval(design, basis, 0, t).unwrap();
        assert!((v - phi1).abs() < 1e-12);
    }

    // quadrature of (centered curve) x (fitted function) equals the score form
    let fit = glm::fit_null(&model.dataset, Family::Poisson, model.truncation).unwrap();
    assert!(fit.truncation >= 1);
    let centered = design.scores.dot(&design.harmonics.t()); // n x K basis coords
    let mut theta_coef = Array1::<f64>::zeros(k);
    for j in 0..fit.truncation {
        theta_coef = theta_coef + design.harmonics.column(j).mapv(|v| v * fit.theta[j]);
    }
    for i in (0..geometry.n()).step_by(17) {
        let quad = simpson(0.0, 21.0, 16_800, |t| {
            let phi = basis.eval(t).unwrap();
            let x: f64 = (0..k).map(|j| centered[[i, j]] * phi[j]).sum();
            let th: f64 = (0..k).map(|j| theta_coef[j] * phi[j]).sum();
            x * th
        });
        let score_form: f64 = (0..fit.truncation)
            .map(|j| design.scores[[i, j]] * fit.theta[j])
            .sum();
        assert!(
            (quad - score_form).abs() < 1e-6 * (1.0 + score_form.abs()),
            "location {i}: quadrature {quad} vs score form {score_form}"
        );
    }
}

#[test]
fn bundled_geometry_distances_and_window_bounds() {
    let geometry = sim::bundled_geometry();
    let n = geometry.n();
    assert_eq!(n, 94);
    let distances = geo::distance_matrix(&geometry.locations).unwrap();
    for i in 0..n {
        assert_eq!(distances[[i, i]], 0.0);
        for j in 0..n {
            let dx = geometry.locations[i].x - geometry.locations[j].x;
            let dy = geometry.locations[i].y - geometry.locations[j].y;
            let brute = (dx * dx + dy * dy).sqrt();
            assert!((distances[[i, j]] - brute).abs() <= 1e-12 * (1.0 + brute));
            assert_eq!(distances[[i, j]], distances[[j, i]]);
        }
    }

    let windows = geo::enumerate_windows(&distances, 0.5).unwrap();
    assert!(windows.len() <= n * (n / 2));
    let mut singletons = 0;
    for w in &windows {
        assert!(w.len() <= n / 2);
        if w.len() == 1 {
            singletons += 1;
        }
    }
    assert_eq!(singletons, n, "every location is its own singleton window");
}

#[test]
fn planted_cluster_is_recovered_without_adjustment() {
    let config = SimulationConfig::desk_scale();
    let geometry = sim::bundled_geometry();
    let distances = geo::distance_matrix(&geometry.locations).unwrap();
    let windows = geo::enumerate_windows(&distances, config.max_fraction).unwrap();
    let pops = Array1::from_vec(geometry.populations.clone());

    let mut hits = 0;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
        let data = sim::generate_dataset(&config, &geometry, 4.0, sim::effect_scale(), &mut rng);
        let ds = Dataset {
            y: data.y.clone(),
            populations: Some(pops.clone()),
            scalar_covariates: None,
            scores: None,
            eigenvalues: None,
        };
        let nf = glm::fit_null(&ds, Family::Poisson, 0).unwrap();
        let result = scan::run_scan(&ds, Family::Poisson, &windows, &nf, Sidedness::Both).unwrap();
        let mlc = &windows[result.mlc.unwrap()];
        if config.true_cluster.iter().any(|&i| mlc.contains(i)) {
            hits += 1;
        }
    }
    assert!(hits >= 9, "most likely cluster missed the planted one: {hits}/10");
}

#[test]
fn p_value_floor_is_one_over_m_plus_one() {
    let mc = MonteCarloResult {
        lambdas: (0..999).map(|i| i as f64 * 1e-3).collect(),
        warnings: 0,
    };
    assert_eq!(mc.p_value(2.0), 0.001);
    assert_eq!(mc.p_value(f64::NEG_INFINITY), 1.0);
}
