//! Thin, non-generic wrapper over a sparse LU factorization, kept in its own
//! crate so the heavy generic code is compiled once.

use faer::sparse::linalg::solvers::SpSolver;
use faer::sparse::SparseColMat;
use faer::Col;

/// Solve `Aᵀ x = b` for a square matrix given as `(row, col, value)`
/// triplets; duplicate entries are summed.
pub fn solve_transpose(n: usize, triplets: &[(usize, usize, f64)], rhs: &[f64]) -> Result<Vec<f64>, String> {
    if rhs.len() != n {
        return Err(format!("right-hand side has {} entries, matrix is {n}x{n}", rhs.len()));
    }
    let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, triplets).map_err(|e| format!("{e:?}"))?;
    // faer panics instead of erroring on an exactly zero numeric pivot
    let lu = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| mat.sp_lu()))
        .map_err(|_| "matrix is numerically singular".to_string())?
        .map_err(|e| format!("{e:?}"))?;
    let mut x = Col::<f64>::from_fn(n, |i| rhs[i]);
    lu.solve_transpose_in_place(x.as_mut());
    Ok((0..n).map(|i| x.read(i)).collect())
}
