//! Small dense linear-algebra helpers shared by the solver modules.
//!
//! Everything here operates on matrices of single-digit dimension, so clarity
//! and determinism win over asymptotics. Eigendecompositions are normalized to
//! a fixed ordering and sign convention so that downstream constructions are
//! reproducible across runs.

use nalgebra::{DMatrix, DVector};

/// Eigenvalues in descending order with matching eigenvector columns.
/// Each eigenvector is sign-normalized so its first entry of non-negligible
/// magnitude is positive.
pub fn sym_eig_desc(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "square matrix required");
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let sym = nalgebra::SymmetricEigen::new(symmetrize(a));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sym.eigenvalues[j].total_cmp(&sym.eigenvalues[i]));
    let mut values = Vec::with_capacity(n);
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &idx) in order.iter().enumerate() {
        values.push(sym.eigenvalues[idx]);
        let mut v: DVector<f64> = sym.eigenvectors.column(idx).into();
        fix_sign(&mut v);
        vectors.set_column(col, &v);
    }
    (values, vectors)
}

/// Eigenvalues in ascending order (the natural order for inertia counts).
pub fn sym_eig_asc(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let (mut values, vectors) = sym_eig_desc(a);
    values.reverse();
    let n = vectors.ncols();
    let mut flipped = DMatrix::zeros(n, n);
    for col in 0..n {
        flipped.set_column(col, &vectors.column(n - 1 - col).into_owned());
    }
    (values, flipped)
}

fn fix_sign(v: &mut DVector<f64>) {
    let lead = v.iter().find(|x| x.abs() > 1e-8).copied().unwrap_or(0.0);
    if lead < 0.0 {
        v.neg_mut();
    }
}

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

pub fn is_symmetric(a: &DMatrix<f64>, tol: f64) -> bool {
    if a.nrows() != a.ncols() {
        return false;
    }
    let scale = a.amax().max(1.0);
    for i in 0..a.nrows() {
        for j in (i + 1)..a.ncols() {
            if (a[(i, j)] - a[(j, i)]).abs() > tol * scale {
                return false;
            }
        }
    }
    true
}

/// Orthogonal `u` with `uᵀ v = ‖v‖ e₁`, built from a Householder reflection.
///
/// The reflection target is chosen on the side of `v₁` that avoids
/// cancellation; a sign flip on the first coordinate then makes the mapped
/// leading entry `+‖v‖`. A zero vector maps to the identity.
pub fn rotation_to_e1(v: &DVector<f64>) -> DMatrix<f64> {
    let n = v.len();
    let norm = v.norm();
    if norm == 0.0 {
        return DMatrix::identity(n, n);
    }
    // w = v + sign(v₁)‖v‖e₁ keeps the leading entry additions same-signed.
    let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
    let mut w = v.clone();
    w[0] += sign * norm;
    let ww = w.norm_squared();
    let mut h = DMatrix::identity(n, n);
    if ww > 0.0 {
        h -= (&w * w.transpose()) * (2.0 / ww);
    }
    // h v = -sign‖v‖e₁; flip column 1 of h so that uᵀ v = +‖v‖e₁.
    let mut u = h;
    if sign > 0.0 {
        for i in 0..n {
            u[(i, 0)] = -u[(i, 0)];
        }
    }
    u
}

/// Columns spanning the orthogonal complement of `span(vs)` in dimension `n`.
pub fn orthogonal_complement(vs: &[DVector<f64>], n: usize) -> DMatrix<f64> {
    let mut gram = DMatrix::zeros(n, n);
    for v in vs {
        assert_eq!(v.len(), n);
        gram += v * v.transpose();
    }
    let (values, vectors) = sym_eig_desc(&gram);
    let scale = values.first().copied().unwrap_or(0.0).max(1.0);
    let keep: Vec<usize> = (0..n).filter(|&i| values[i] <= 1e-12 * scale).collect();
    let mut basis = DMatrix::zeros(n, keep.len());
    for (col, &i) in keep.iter().enumerate() {
        basis.set_column(col, &vectors.column(i).into_owned());
    }
    basis
}

/// Largest quadratic-form violation of `‖aᵀa − I‖` per entry.
pub fn orthogonality_defect(a: &DMatrix<f64>) -> f64 {
    let gram = a.transpose() * a;
    let mut defect = 0.0_f64;
    for i in 0..gram.nrows() {
        for j in 0..gram.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            defect = defect.max((gram[(i, j)] - target).abs());
        }
    }
    defect
}

/// Clamp tiny negative eigenvalues so the matrix is numerically PSD.
pub fn psd_project(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (values, vectors) = sym_eig_desc(a);
    let n = a.nrows();
    let mut out = DMatrix::zeros(n, n);
    for (i, &val) in values.iter().enumerate() {
        if val > 0.0 {
            let v = vectors.column(i);
            out += v * v.transpose() * val;
        }
    }
    out
}

pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    let (values, _) = sym_eig_desc(a);
    values.last().copied().unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vecd(xs: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(xs)
    }

    #[test]
    fn rotation_maps_to_first_axis() {
        for v in [
            vecd(&[1.0, 0.0, 0.0]),
            vecd(&[1.0, 1.0, 0.0]),
            vecd(&[-3.0, 4.0, 12.0]),
            vecd(&[1.0, 1e-14, 0.0]),
            vecd(&[-1.0, 1e-14, 2e-15]),
        ] {
            let u = rotation_to_e1(&v);
            assert!(orthogonality_defect(&u) < 1e-13);
            let mapped = u.transpose() * &v;
            assert!((mapped[0] - v.norm()).abs() < 1e-12 * (1.0 + v.norm()));
            for i in 1..v.len() {
                assert!(mapped[i].abs() < 1e-12 * (1.0 + v.norm()));
            }
        }
    }

    #[test]
    fn rotation_of_zero_is_identity() {
        let u = rotation_to_e1(&vecd(&[0.0, 0.0]));
        assert_eq!(u, DMatrix::identity(2, 2));
    }

    #[test]
    fn eig_sorted_and_reconstructs() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 1.0]);
        let (values, vectors) = sym_eig_desc(&a);
        assert!(values.windows(2).all(|w| w[0] >= w[1]));
        let mut rebuilt = DMatrix::zeros(3, 3);
        for (i, &val) in values.iter().enumerate() {
            let v = vectors.column(i);
            rebuilt += v * v.transpose() * val;
        }
        assert!((rebuilt - a).amax() < 1e-12);
    }

    #[test]
    fn complement_is_orthogonal_to_span() {
        let vs = vec![vecd(&[1.0, 0.0, 0.0, 0.0]), vecd(&[1.0, 1.0, 0.0, 0.0])];
        let basis = orthogonal_complement(&vs, 4);
        assert_eq!(basis.ncols(), 2);
        for v in &vs {
            let proj = basis.transpose() * v;
            assert!(proj.amax() < 1e-10);
        }
        assert!(orthogonality_defect(&basis) < 1e-12);
    }
}
