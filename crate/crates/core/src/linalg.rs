//! Internal dense linear-algebra helpers shared across modules: conversions
//! between the public `ndarray` types and `nalgebra`, symmetric
//! eigendecomposition with deterministic ordering, symmetric matrix square
//! roots, Gauss-Legendre rules, and linear solvers.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2};

pub(crate) fn to_nalgebra(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub(crate) fn to_nalgebra_vec(v: &Array1<f64>) -> DVector<f64> {
    DVector::from_iterator(v.len(), v.iter().copied())
}

pub(crate) fn to_ndarray_vec(v: &DVector<f64>) -> Array1<f64> {
    Array1::from_iter(v.iter().copied())
}

/// Eigendecomposition of a symmetric matrix, eigenvalues sorted descending,
/// eigenvectors as matching columns. Signs are not normalized here.
pub(crate) struct SymEigen {
    pub values: Array1<f64>,
    pub vectors: Array2<f64>,
}

pub(crate) fn sym_eigen(a: &Array2<f64>) -> SymEigen {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let decomp = nalgebra::SymmetricEigen::new(to_nalgebra(a));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        decomp.eigenvalues[j]
            .partial_cmp(&decomp.eigenvalues[i])
            .expect("symmetric eigenvalues are finite")
            .then(i.cmp(&j))
    });
    let values = Array1::from_iter(order.iter().map(|&i| decomp.eigenvalues[i]));
    let vectors = Array2::from_shape_fn((n, n), |(r, c)| decomp.eigenvectors[(r, order[c])]);
    SymEigen { values, vectors }
}

/// Symmetric square root and inverse square root of a positive definite
/// matrix. Fails with the smallest eigenvalue when the matrix is numerically
/// singular relative to `rel_floor` (smallest <= rel_floor * largest).
#[derive(Debug)]
pub(crate) struct SymRoots {
    pub sqrt: Array2<f64>,
    pub inv_sqrt: Array2<f64>,
}

pub(crate) fn sym_sqrt(a: &Array2<f64>, rel_floor: f64) -> Result<SymRoots, f64> {
    let eig = sym_eigen(a);
    let n = a.nrows();
    let max = eig.values[0];
    let min = eig.values[n - 1];
    if !(min > rel_floor * max && min > 0.0) {
        return Err(min);
    }
    let mut sqrt = Array2::zeros((n, n));
    let mut inv_sqrt = Array2::zeros((n, n));
    for (r, c) in itertools_pairs(n) {
        let mut s = 0.0;
        let mut si = 0.0;
        for k in 0..n {
            let prod = eig.vectors[[r, k]] * eig.vectors[[c, k]];
            let root = eig.values[k].sqrt();
            s += prod * root;
            si += prod / root;
        }
        sqrt[[r, c]] = s;
        sqrt[[c, r]] = s;
        inv_sqrt[[r, c]] = si;
        inv_sqrt[[c, r]] = si;
    }
    Ok(SymRoots { sqrt, inv_sqrt })
}

fn itertools_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |r| (r..n).map(move |c| (r, c)))
}

/// Nodes and weights of the q-point Gauss-Legendre rule on [-1, 1],
/// nodes ascending. Exact for polynomials of degree <= 2q - 1.
pub(crate) fn gauss_legendre(q: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(q >= 1, "quadrature order must be at least 1");
    let mut nodes = vec![0.0; q];
    let mut weights = vec![0.0; q];
    for i in 0..(q + 1) / 2 {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (q as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(q, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        if q % 2 == 1 && i == q / 2 {
            x = 0.0;
        }
        let (_, d) = legendre_with_derivative(q, x);
        let w = 2.0 / ((1.0 - x * x) * d * d);
        nodes[i] = -x;
        nodes[q - 1 - i] = x;
        weights[i] = w;
        weights[q - 1 - i] = w;
    }
    (nodes, weights)
}

/// (P_q(x), P_q'(x)) by the three-term recurrence.
fn legendre_with_derivative(q: usize, x: f64) -> (f64, f64) {
    if q == 0 {
        return (1.0, 0.0);
    }
    let mut prev = 1.0;
    let mut cur = x;
    for k in 2..=q {
        let next = ((2 * k - 1) as f64 * x * cur - (k - 1) as f64 * prev) / k as f64;
        prev = cur;
        cur = next;
    }
    let deriv = q as f64 * (x * cur - prev) / (x * x - 1.0);
    (cur, deriv)
}

/// Solve the symmetric positive (semi)definite system `a * x = b`,
/// preferring Cholesky and falling back to LU with partial pivoting.
pub(crate) fn solve_sym(a: DMatrix<f64>, b: DVector<f64>) -> Option<DVector<f64>> {
    if let Some(chol) = a.clone().cholesky() {
        return Some(chol.solve(&b));
    }
    a.lu().solve(&b)
}

/// Minimum-norm least-squares solution of `x * beta = y` via SVD.
/// Returns None when the design is rank deficient relative to `rel_tol`.
pub(crate) fn least_squares(x: &Array2<f64>, y: &Array1<f64>, rel_tol: f64) -> Option<Array1<f64>> {
    let design = to_nalgebra(x);
    let rhs = to_nalgebra_vec(y);
    let svd = design.svd(true, true);
    let max_sv = svd.singular_values.max();
    if svd.singular_values.iter().any(|&s| s <= rel_tol * max_sv) {
        return None;
    }
    let sol = svd.solve(&rhs, 0.0).ok()?;
    Some(to_ndarray_vec(&sol.column(0).into_owned()))
}

/// splitmix64-style seed derivation: a fixed, platform-independent mapping
/// from (base seed, stream index) to an independent child seed.
pub(crate) fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for q in 1..=12 {
            let (nodes, weights) = gauss_legendre(q);
            assert_eq!(nodes.len(), q);
            // integrate x^d over [-1,1] for every exactly-representable degree
            for d in 0..=(2 * q - 1) {
                let quad: f64 = nodes
                    .iter()
                    .zip(&weights)
                    .map(|(x, w)| w * x.powi(d as i32))
                    .sum();
                let exact = if d % 2 == 1 { 0.0 } else { 2.0 / (d as f64 + 1.0) };
                assert_abs_diff_eq!(quad, exact, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn gauss_legendre_nodes_ascending_and_symmetric() {
        let (nodes, weights) = gauss_legendre(7);
        for pair in nodes.windows(2) {
            assert!(pair[0] < pair[1]);
        }
        for i in 0..7 {
            assert_abs_diff_eq!(nodes[i], -nodes[6 - i], epsilon = 1e-15);
            assert_abs_diff_eq!(weights[i], weights[6 - i], epsilon = 1e-15);
        }
        assert_eq!(nodes[3], 0.0);
    }

    #[test]
    fn sym_eigen_recovers_known_spectrum() {
        // eigenvalues of [[2,1],[1,2]] are 3 and 1
        let a = array![[2.0, 1.0], [1.0, 2.0]];
        let eig = sym_eigen(&a);
        assert_abs_diff_eq!(eig.values[0], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(eig.values[1], 1.0, epsilon = 1e-12);
        // reconstruct: Q diag(v) Q' = A
        for r in 0..2 {
            for c in 0..2 {
                let rec: f64 = (0..2)
                    .map(|k| eig.vectors[[r, k]] * eig.values[k] * eig.vectors[[c, k]])
                    .sum();
                assert_abs_diff_eq!(rec, a[[r, c]], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn sym_sqrt_roundtrip() {
        let a = array![[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 2.0]];
        let roots = sym_sqrt(&a, 1e-12).expect("positive definite");
        let square = roots.sqrt.dot(&roots.sqrt);
        let ident = roots.sqrt.dot(&roots.inv_sqrt);
        for r in 0..3 {
            for c in 0..3 {
                assert_abs_diff_eq!(square[[r, c]], a[[r, c]], epsilon = 1e-12);
                let expect = if r == c { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(ident[[r, c]], expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn sym_sqrt_rejects_singular() {
        let a = array![[1.0, 1.0], [1.0, 1.0]];
        let err = sym_sqrt(&a, 1e-12).expect_err("rank one");
        assert!(err.abs() < 1e-12);
    }

    #[test]
    fn least_squares_matches_normal_equations() {
        let x = array![[1.0, 0.0], [1.0, 1.0], [1.0, 2.0], [1.0, 3.0]];
        let y = array![1.0, 3.0, 5.0, 7.0];
        let beta = least_squares(&x, &y, 1e-12).expect("full rank");
        assert_abs_diff_eq!(beta[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(beta[1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn least_squares_detects_rank_deficiency() {
        let x = array![[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]];
        let y = array![1.0, 2.0, 3.0];
        assert!(least_squares(&x, &y, 1e-12).is_none());
    }

    #[test]
    fn derive_seed_is_stable_and_spreads() {
        let a = derive_seed(42, 0);
        let b = derive_seed(42, 1);
        let c = derive_seed(43, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, derive_seed(42, 0));
    }
}
