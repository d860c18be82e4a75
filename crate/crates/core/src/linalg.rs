//! Small dense helpers shared by the geometric modules.

use nalgebra::{DMatrix, DVector};

/// Orthonormalizes `vectors` in order with two passes of modified
/// Gram-Schmidt, dropping any vector whose residual falls below `tol`.
pub fn gram_schmidt(vectors: &[DVector<f64>], tol: f64) -> Vec<DVector<f64>> {
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &out {
                let d = q.dot(&w);
                w.axpy(-d, q, 1.0);
            }
        }
        let norm = w.norm();
        if norm > tol {
            out.push(w / norm);
        }
    }
    out
}

/// Orthogonal projection of `v` onto the span of the orthonormal `basis`.
pub fn project(v: &DVector<f64>, basis: &[DVector<f64>]) -> DVector<f64> {
    let mut out = DVector::zeros(v.len());
    for q in basis {
        out.axpy(q.dot(v), q, 1.0);
    }
    out
}

/// Orthonormal basis of the orthogonal complement of the orthonormal
/// family `basis` inside `R^dim`, built greedily from standard basis
/// vectors.
pub fn complement(basis: &[DVector<f64>], dim: usize) -> Vec<DVector<f64>> {
    let mut all: Vec<DVector<f64>> = basis.to_vec();
    let mut out = Vec::new();
    while all.len() < dim {
        let mut best: Option<(f64, DVector<f64>)> = None;
        for k in 0..dim {
            let mut e = DVector::zeros(dim);
            e[k] = 1.0;
            let r = &e - project(&e, &all);
            let n = r.norm();
            if best.as_ref().is_none_or(|(bn, _)| n > *bn) {
                best = Some((n, r));
            }
        }
        let (_, r) = best.expect("dim > 0");
        let q = gram_schmidt(&[r], 0.0).pop().expect("nonzero residual");
        let q = &q - project(&q, &all);
        let q = q.normalize();
        all.push(q.clone());
        out.push(q);
    }
    out
}

/// Stacks vectors as the columns of a matrix.
pub fn columns(vectors: &[DVector<f64>], rows: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows, vectors.len());
    for (j, v) in vectors.iter().enumerate() {
        m.set_column(j, v);
    }
    m
}

/// Symmetric eigen-decomposition with eigenvalues in ascending order and
/// matching eigenvector columns.
pub fn sym_eigen_sorted(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(m.nrows(), m.ncols());
    for (j, &i) in order.iter().enumerate() {
        vecs.set_column(j, &eig.eigenvectors.column(i));
    }
    (values, vecs)
}
