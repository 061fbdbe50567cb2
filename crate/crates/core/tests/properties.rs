//! Property suites: randomized invariants for window enumeration, FPCA,
//! null fits, and the scan layer.

use funscan::fda::{self, BasisSystem};
use funscan::geo::{self, Location};
use funscan::glm::{self, Dataset, Family};
use funscan::scan::{self, Sidedness};
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use std::collections::HashSet;

fn locations_from_grid(points: &[(u8, u8)]) -> Vec<Location> {
    points
        .iter()
        .enumerate()
        .map(|(i, &(gx, gy))| Location::new(format!("u{i}"), f64::from(gx), f64::from(gy)))
        .collect()
}

fn distinct_grid_points() -> impl Strategy<Value = Vec<(u8, u8)>> {
    proptest::collection::vec((0u8..24, 0u8..24), 2..18).prop_map(|mut pts| {
        pts.sort_unstable();
        pts.dedup();
        pts
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn windows_are_closed_balls_deduplicated_and_capped(points in distinct_grid_points()) {
        prop_assume!(points.len() >= 2);
        let locations = locations_from_grid(&points);
        let n = locations.len();
        let distances = geo::distance_matrix(&locations).unwrap();
        let windows = geo::enumerate_windows(&distances, 0.5).unwrap();
        let cap = ((n as f64) * 0.5).floor() as usize;

        let mut seen = HashSet::new();
        let mut singletons = HashSet::new();
        for w in &windows {
            prop_assert!(!w.members.is_empty());
            prop_assert!(w.members.len() <= cap.max(1));
            // closed ball: membership is exactly distance <= radius
            for j in 0..n {
                let inside = distances[[w.center, j]] <= w.radius;
                prop_assert_eq!(inside, w.contains(j),
                    "center {} radius {} location {}", w.center, w.radius, j);
            }
            prop_assert!(seen.insert(w.members.clone()), "duplicate member set");
            if w.members.len() == 1 {
                singletons.insert(w.members[0]);
            }
        }
        // distinct coordinates: every location is its own singleton window
        prop_assert_eq!(singletons.len(), n);
    }

    #[test]
    fn fpca_orthonormality_reconstruction_inertia(
        raw in proptest::collection::vec(
            proptest::collection::vec(-3.0f64..3.0, 5),
            4..10,
        )
    ) {
        let n = raw.len();
        let basis = BasisSystem::bspline((0.0, 1.0), 3, 3).unwrap(); // K = 5
        let k = basis.dimension();
        prop_assert_eq!(k, 5);
        let a = Array2::from_shape_fn((n, k), |(i, j)| raw[i][j]);
        let gram = fda::gram_matrix(&basis);
        let design = match fda::functional_pca(&a, &gram) {
            Ok(d) => d,
            // all-identical rows carry no variation; nothing to check
            Err(_) => return Ok(()),
        };

        // V' Psi V = I
        let vt_psi_v = design.harmonics.t().dot(&gram).dot(&design.harmonics);
        for r in 0..k {
            for c in 0..k {
                let expect = if r == c { 1.0 } else { 0.0 };
                prop_assert!((vt_psi_v[[r, c]] - expect).abs() < 1e-8);
            }
        }

        // eigenvalues nonincreasing and nonnegative
        for j in 1..k {
            prop_assert!(design.eigenvalues[j] <= design.eigenvalues[j - 1] + 1e-12);
            prop_assert!(design.eigenvalues[j] >= -1e-12);
        }

        // full reconstruction at quadrature nodes
        let reconstructed = design.scores.dot(&design.harmonics.t());
        for i in 0..n {
            for t in [0.0, 0.21, 0.5, 0.84, 1.0] {
                let phi = basis.eval(t).unwrap();
                let centered: f64 = (0..k).map(|j| (a[[i, j]] - design.mean_coefficients[j]) * phi[j]).sum();
                let rebuilt: f64 = (0..k).map(|j| reconstructed[[i, j]] * phi[j]).sum();
                prop_assert!((centered - rebuilt).abs() < 1e-6);
            }
        }

        // cumulative inertia is monotone and reaches 1
        if let Ok(inertia) = design.cumulative_inertia() {
            for j in 1..k {
                prop_assert!(inertia[j] >= inertia[j - 1] - 1e-12);
            }
            prop_assert!((inertia[k - 1] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn null_fit_scores_and_intercept_identity(
        counts in proptest::collection::vec(0u32..40, 8..30),
        pop_seeds in proptest::collection::vec(1u32..100, 8..30),
        covariate in proptest::collection::vec(-1.0f64..1.0, 8..30),
    ) {
        let n = counts.len().min(pop_seeds.len()).min(covariate.len());
        prop_assume!(n >= 8);
        let y = Array1::from_iter(counts[..n].iter().map(|&c| f64::from(c)));
        prop_assume!(y.sum() > 0.0);
        let pops = Array1::from_iter(pop_seeds[..n].iter().map(|&p| 50.0 + f64::from(p) * 10.0));
        let z = Array2::from_shape_fn((n, 1), |(i, _)| covariate[i]);
        let ds = Dataset {
            y: y.clone(),
            populations: Some(pops.clone()),
            scalar_covariates: Some(z.clone()),
            scores: None,
            eigenvalues: None,
        };
        let fit = match glm::fit_null(&ds, Family::Poisson, 0) {
            Ok(f) => f,
            Err(_) => return Ok(()), // degenerate draw
        };
        prop_assume!(fit.converged);

        // score equations at the optimum
        let resid = &y - &fit.fitted;
        let tol = 1e-6 * y.sum();
        prop_assert!(resid.sum().abs() <= tol);
        let score_z: f64 = (0..n).map(|i| z[[i, 0]] * resid[i]).sum();
        prop_assert!(score_z.abs() <= tol);

        // explicit-intercept identity over adjusted populations
        let adjusted = fit.adjusted_populations.as_ref().unwrap();
        let rel = (fit.alpha.exp() * adjusted.sum() - y.sum()).abs() / y.sum();
        prop_assert!(rel < 1e-8);
    }

    #[test]
    fn scan_statistics_nonnegative_max_and_shift_invariant(
        counts in proptest::collection::vec(0u32..25, 4..14),
        pop_seeds in proptest::collection::vec(1u32..60, 4..14),
        shift in -1.5f64..1.5,
    ) {
        let n = counts.len().min(pop_seeds.len());
        prop_assume!(n >= 4);
        let y = Array1::from_iter(counts[..n].iter().map(|&c| f64::from(c)));
        prop_assume!(y.sum() > 0.0);
        let pops = Array1::from_iter(pop_seeds[..n].iter().map(|&p| 5.0 + f64::from(p)));
        // a simple line of locations gives a valid window collection
        let locations: Vec<Location> = (0..n)
            .map(|i| Location::new(format!("u{i}"), i as f64, 0.0))
            .collect();
        let distances = geo::distance_matrix(&locations).unwrap();
        let windows = geo::enumerate_windows(&distances, 0.5).unwrap();

        let ds = Dataset {
            y: y.clone(),
            populations: Some(pops.clone()),
            scalar_covariates: None,
            scores: None,
            eigenvalues: None,
        };
        let nf = glm::fit_null(&ds, Family::Poisson, 0).unwrap();
        let result = scan::run_scan(&ds, Family::Poisson, &windows, &nf, Sidedness::Both).unwrap();

        let mut max = 0.0f64;
        for fit in &result.fits {
            prop_assert!(fit.llr >= 0.0);
            prop_assert!(fit.llr.is_finite());
            max = max.max(fit.llr);
        }
        prop_assert!((result.lambda - max).abs() < 1e-12);
        prop_assert!(result.mlc.is_some());

        // scaling all adjusted populations by exp(shift) changes nothing
        let adjusted = nf.adjusted_populations.as_ref().unwrap();
        let scaled = adjusted.mapv(|v| v * shift.exp());
        for (k, w) in windows.iter().enumerate() {
            let base = scan::poisson_window_fit(w, &y, adjusted).unwrap();
            let moved = scan::poisson_window_fit(w, &y, &scaled).unwrap();
            prop_assert!((base.llr - moved.llr).abs() < 1e-8, "window {k}");
            if base.delta.is_finite() {
                prop_assert!((base.delta - moved.delta).abs() < 1e-8);
            } else {
                prop_assert_eq!(base.delta, moved.delta);
            }
        }
    }
}
