//! Sylvester equation `A X + X B = C`.
//!
//! The main path is Bartels–Stewart on complex Schur forms of `A` and `B`.
//! For systems with both sides of dimension at most [`KRON_FALLBACK_DIM`]
//! the dense Kronecker formulation is used when the Schur path fails.

use super::{
    check_finite, check_square, complex_schur, hermitian_eigen, kron, max_abs, max_abs_diff,
    solve_lu, CMat, CVec, Schur, C64,
};
use crate::error::{Error, Result};

pub const KRON_FALLBACK_DIM: usize = 12;
const RESIDUAL_TOL: f64 = 1e-8;

pub fn solve_sylvester(a: &CMat, b: &CMat, c: &CMat) -> Result<CMat> {
    let m = check_square(a)?;
    let n = check_square(b)?;
    if c.nrows() != m || c.ncols() != n {
        return Err(Error::Dimension(format!(
            "Sylvester: A is {m}x{m}, B is {n}x{n}, C is {}x{}",
            c.nrows(),
            c.ncols()
        )));
    }
    match SylvesterOperator::new(a, b) {
        Ok(op) => op.solve(c),
        Err(e) if m.max(n) > KRON_FALLBACK_DIM => Err(e),
        Err(_) => kron_checked(a, b, c),
    }
}

fn kron_checked(a: &CMat, b: &CMat, c: &CMat) -> Result<CMat> {
    let cnorm = c.norm();
    if cnorm == 0.0 {
        return Ok(CMat::zeros(c.nrows(), c.ncols()));
    }
    let x = solve_sylvester_kron(a, b, c)?;
    let r = (a * &x + &x * b - c).norm() / cnorm;
    if r <= RESIDUAL_TOL {
        Ok(x)
    } else {
        Err(Error::Sylvester { residual: r })
    }
}

/// Schur form that takes the eigendecomposition route for Hermitian input
/// (whose Schur form is diagonal).
pub fn schur_form(a: &CMat) -> Result<Schur> {
    let scale = max_abs(a);
    if scale > 0.0 && max_abs_diff(a, &a.adjoint()) <= 1e-13 * scale {
        let (vals, vecs) = hermitian_eigen(a)?;
        let t = CMat::from_diagonal(&CVec::from_iterator(
            vals.len(),
            vals.iter().map(|&v| C64::new(v, 0.0)),
        ));
        return Ok(Schur { q: vecs, t });
    }
    complex_schur(a)
}

/// `X ↦ A X + X B` with both Schur forms computed once, for repeated
/// right-hand sides.
#[derive(Debug, Clone)]
pub struct SylvesterOperator {
    a: CMat,
    b: CMat,
    sa: Schur,
    sb: Schur,
}

impl SylvesterOperator {
    pub fn new(a: &CMat, b: &CMat) -> Result<Self> {
        check_square(a)?;
        check_square(b)?;
        check_finite(a)?;
        check_finite(b)?;
        Ok(Self {
            a: a.clone(),
            b: b.clone(),
            sa: schur_form(a)?,
            sb: schur_form(b)?,
        })
    }

    /// Like [`SylvesterOperator::new`] with a precomputed Schur form of `A`.
    pub fn with_left(a: &CMat, sa: Schur, b: &CMat) -> Result<Self> {
        check_square(b)?;
        check_finite(b)?;
        if sa.t.shape() != a.shape() {
            return Err(Error::Dimension("Schur factor does not match A".into()));
        }
        Ok(Self {
            a: a.clone(),
            b: b.clone(),
            sa,
            sb: schur_form(b)?,
        })
    }

    /// Solves `A X + X B = C`, checking the relative residual.
    pub fn solve(&self, c: &CMat) -> Result<CMat> {
        let (m, n) = (self.a.nrows(), self.b.nrows());
        if c.shape() != (m, n) {
            return Err(Error::Dimension(format!(
                "Sylvester: expected a {m}x{n} right-hand side, got {}x{}",
                c.nrows(),
                c.ncols()
            )));
        }
        check_finite(c)?;
        let cnorm = c.norm();
        if cnorm == 0.0 {
            return Ok(CMat::zeros(m, n));
        }
        let residual = |x: &CMat| (&self.a * x + x * &self.b - c).norm() / cnorm;
        let attempt = back_substitute(&self.sa, &self.sb, c).map(|x| {
            let r = residual(&x);
            (x, r)
        });
        match attempt {
            Ok((x, r)) if r <= RESIDUAL_TOL => Ok(x),
            Ok((_, r)) if m.max(n) > KRON_FALLBACK_DIM => Err(Error::Sylvester { residual: r }),
            Err(e) if m.max(n) > KRON_FALLBACK_DIM => Err(e),
            _ => kron_checked(&self.a, &self.b, c),
        }
    }
}

fn back_substitute(sa: &Schur, sb: &Schur, c: &CMat) -> Result<CMat> {
    let (m, n) = (sa.t.nrows(), sb.t.nrows());
    // T_A Y + Y T_B = F with Y = Q_Aᴴ X Q_B.
    let f = sa.q.adjoint() * c * &sb.q;
    let ta = &sa.t;
    let tb = &sb.t;
    let mut y = CMat::zeros(m, n);
    let scale = ta.norm() + tb.norm();
    for j in 0..n {
        let mut rhs: Vec<C64> = (0..m).map(|i| f[(i, j)]).collect();
        for l in 0..j {
            let t = tb[(l, j)];
            if t != C64::new(0.0, 0.0) {
                for (i, r) in rhs.iter_mut().enumerate() {
                    *r -= y[(i, l)] * t;
                }
            }
        }
        let shift = tb[(j, j)];
        for i in (0..m).rev() {
            let mut s = rhs[i];
            for l in i + 1..m {
                s -= ta[(i, l)] * y[(l, j)];
            }
            let d = ta[(i, i)] + shift;
            if d.norm() <= f64::EPSILON * scale {
                return Err(Error::Singular(
                    "Sylvester operator has a (near) zero eigenvalue".into(),
                ));
            }
            y[(i, j)] = s / d;
        }
    }
    let x = &sa.q * y * sb.q.adjoint();
    check_finite(&x)?;
    Ok(x)
}

#[cfg(test)]
fn bartels_stewart(a: &CMat, b: &CMat, c: &CMat) -> Result<CMat> {
    back_substitute(&complex_schur(a)?, &complex_schur(b)?, c)
}

/// Dense solve of `(Iₙ ⊗ A + Bᵀ ⊗ I_m) vec(X) = vec(C)`.
pub fn solve_sylvester_kron(a: &CMat, b: &CMat, c: &CMat) -> Result<CMat> {
    let m = check_square(a)?;
    let n = check_square(b)?;
    if c.nrows() != m || c.ncols() != n {
        return Err(Error::Dimension(format!(
            "Sylvester: A is {m}x{m}, B is {n}x{n}, C is {}x{}",
            c.nrows(),
            c.ncols()
        )));
    }
    let op = kron(&CMat::identity(n, n), a) + kron(&b.transpose(), &CMat::identity(m, m));
    let rhs = CMat::from_column_slice(m * n, 1, c.as_slice());
    let v = solve_lu(&op, &rhs)?;
    Ok(CMat::from_column_slice(m, n, v.as_slice()))
}
