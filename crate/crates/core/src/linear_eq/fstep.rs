//! Solvers for the precoder normal equation `A F B + c F = C` with `c > 0`.

use nalgebra::linalg::Schur;

use crate::error::{Error, Result};
use crate::linalg::{kron, unvec, vec_of, CMat, C64};

/// Dense route: `vec(A F B) = (Bᵀ ⊗ A) vec(F)`, so
/// `vec(F) = (Bᵀ ⊗ A + c I)⁻¹ vec(C)`.
pub fn solve_kron(a: &CMat, b: &CMat, c: f64, rhs: &CMat) -> Result<CMat> {
    check_shapes(a, b, rhs)?;
    let (p, q) = rhs.shape();
    let mut sys = kron(&b.transpose(), a);
    for i in 0..p * q {
        sys[(i, i)] += C64::new(c, 0.0);
    }
    let sol = sys
        .lu()
        .solve(&vec_of(rhs))
        .ok_or_else(|| Error::Singular { context: "f_step (kron)", reason: "Kronecker system is singular".into() })?;
    Ok(unvec(&sol, p, q))
}

/// Bartels–Stewart for the generalized equation `A F B + c F = C`.
///
/// With complex Schur forms `A = P T_A P^H` and `B = Q T_B Q^H`, the
/// substitution `Y = P^H F Q` gives `T_A Y T_B + c Y = P^H C Q`, whose
/// columns are found left to right from triangular systems
/// `(t_jj T_A + c I) y_j = d_j - T_A Σ_{k<j} t_kj y_k`.
pub fn solve_bartels_stewart(a: &CMat, b: &CMat, c: f64, rhs: &CMat) -> Result<CMat> {
    check_shapes(a, b, rhs)?;
    let (p_dim, q_dim) = rhs.shape();
    let (p, ta) = schur(a)?;
    let (q, tb) = schur(b)?;
    let d = p.adjoint() * rhs * &q;

    let mut y = CMat::zeros(p_dim, q_dim);
    let cc = C64::new(c, 0.0);
    for j in 0..q_dim {
        // acc = Σ_{k<j} t_kj y_k
        let mut acc = nalgebra::DVector::<C64>::zeros(p_dim);
        for k in 0..j {
            let t = tb[(k, j)];
            if t != C64::new(0.0, 0.0) {
                acc.axpy(t, &y.column(k), C64::new(1.0, 0.0));
            }
        }
        let mut r = d.column(j) - &ta * acc;
        let tjj = tb[(j, j)];
        // back substitution with the upper triangular (tjj T_A + c I)
        for i in (0..p_dim).rev() {
            let mut s = r[i];
            for l in i + 1..p_dim {
                s -= tjj * ta[(i, l)] * r[l];
            }
            let diag = tjj * ta[(i, i)] + cc;
            if diag.norm() <= f64::EPSILON * c.max(1.0) {
                return Err(Error::Singular {
                    context: "f_step (bartels-stewart)",
                    reason: format!("zero pivot at ({i}, {j})"),
                });
            }
            r[i] = s / diag;
        }
        y.set_column(j, &r);
    }
    Ok(&p * y * q.adjoint())
}

fn schur(m: &CMat) -> Result<(CMat, CMat)> {
    let n = m.nrows();
    let s = Schur::try_new(m.clone(), f64::EPSILON, 100 * n.max(10))
        .ok_or_else(|| Error::Numerical("Schur decomposition did not converge".into()))?;
    let (q, mut t) = s.unpack();
    // Strictly lower part is round-off; the solver relies on exact triangularity.
    for j in 0..n {
        for i in j + 1..n {
            t[(i, j)] = C64::new(0.0, 0.0);
        }
    }
    Ok((q, t))
}

fn check_shapes(a: &CMat, b: &CMat, rhs: &CMat) -> Result<()> {
    if !a.is_square() || !b.is_square() {
        return Err(Error::dim("f_step", "square A and B", format!("{:?}, {:?}", a.shape(), b.shape())));
    }
    if rhs.shape() != (a.nrows(), b.nrows()) {
        return Err(Error::dim("f_step (C)", format!("{}x{}", a.nrows(), b.nrows()), format!("{:?}", rhs.shape())));
    }
    Ok(())
}

/// `‖A F B + c F - C‖_F`.
pub fn normal_equation_residual(a: &CMat, b: &CMat, c: f64, rhs: &CMat, f: &CMat) -> f64 {
    (a * f * b + f * C64::new(c, 0.0) - rhs).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{complex_gaussian, rel_diff};
    use crate::seed;

    #[test]
    fn both_routes_agree_on_general_matrices() {
        let mut rng = seed::rng(42);
        for (p, q) in [(1, 1), (3, 4), (5, 2), (6, 6)] {
            let a = complex_gaussian(p, p, 1.0, &mut rng);
            let b = complex_gaussian(q, q, 1.0, &mut rng);
            let rhs = complex_gaussian(p, q, 1.0, &mut rng);
            let c = 7.5;
            let f1 = solve_kron(&a, &b, c, &rhs).unwrap();
            let f2 = solve_bartels_stewart(&a, &b, c, &rhs).unwrap();
            assert!(rel_diff(&f1, &f2) < 1e-9, "{p}x{q}: {}", rel_diff(&f1, &f2));
            assert!(normal_equation_residual(&a, &b, c, &rhs, &f2) <= 1e-9 * rhs.norm());
        }
    }

    #[test]
    fn zero_a_collapses_to_scaling() {
        let mut rng = seed::rng(1);
        let rhs = complex_gaussian(3, 2, 1.0, &mut rng);
        let b = complex_gaussian(2, 2, 1.0, &mut rng);
        let f = solve_bartels_stewart(&CMat::zeros(3, 3), &b, 4.0, &rhs).unwrap();
        assert!(rel_diff(&f, &(&rhs / C64::new(4.0, 0.0))) < 1e-14);
    }

    #[test]
    fn shape_errors() {
        let a = CMat::identity(2, 2);
        assert!(solve_kron(&a, &a, 1.0, &CMat::zeros(3, 2)).is_err());
        assert!(solve_bartels_stewart(&CMat::zeros(2, 3), &a, 1.0, &CMat::zeros(2, 2)).is_err());
    }
}
