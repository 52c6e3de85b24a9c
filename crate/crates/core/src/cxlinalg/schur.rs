//! Complex Schur decomposition `A = Q T Qᴴ` by Householder reduction to
//! Hessenberg form followed by single-shift QR sweeps with Givens rotations.

use super::{check_finite, check_square, CMat, C64, ZERO};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Schur {
    /// Unitary factor.
    pub q: CMat,
    /// Upper-triangular factor; its diagonal holds the eigenvalues.
    pub t: CMat,
}

pub fn complex_schur(a: &CMat) -> Result<Schur> {
    let n = check_square(a)?;
    check_finite(a)?;
    let mut h = a.clone();
    let mut q = CMat::identity(n, n);
    hessenberg(&mut h, &mut q);
    qr_sweeps(&mut h, &mut q)?;
    for j in 0..n {
        for i in j + 1..n {
            h[(i, j)] = ZERO;
        }
    }
    Ok(Schur { q, t: h })
}

fn hessenberg(h: &mut CMat, q: &mut CMat) {
    let n = h.nrows();
    if n < 3 {
        return;
    }
    for k in 0..n - 2 {
        let len = n - k - 1;
        let mut v: Vec<C64> = (0..len).map(|i| h[(k + 1 + i, k)]).collect();
        let xnorm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if xnorm == 0.0 {
            continue;
        }
        let phase = if v[0].norm() > 0.0 {
            v[0] / v[0].norm()
        } else {
            C64::new(1.0, 0.0)
        };
        let alpha = -phase * xnorm;
        v[0] -= alpha;
        let vnorm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        for z in v.iter_mut() {
            *z /= vnorm;
        }
        // H <- (I - 2vvᴴ) H on rows k+1..n.
        for j in 0..n {
            let mut s = ZERO;
            for i in 0..len {
                s += v[i].conj() * h[(k + 1 + i, j)];
            }
            s *= 2.0;
            for i in 0..len {
                h[(k + 1 + i, j)] -= v[i] * s;
            }
        }
        // H <- H (I - 2vvᴴ) and Q <- Q (I - 2vvᴴ) on columns k+1..n.
        for m in [&mut *h, &mut *q] {
            for r in 0..n {
                let mut s = ZERO;
                for i in 0..len {
                    s += m[(r, k + 1 + i)] * v[i];
                }
                s *= 2.0;
                for i in 0..len {
                    m[(r, k + 1 + i)] -= s * v[i].conj();
                }
            }
        }
        for i in k + 2..n {
            h[(i, k)] = ZERO;
        }
    }
}

/// Rotation `[[a*, b*], [-b, a]]` mapping `(x, y)` to `(r, 0)`.
fn givens(x: C64, y: C64) -> (C64, C64) {
    let r = (x.norm_sqr() + y.norm_sqr()).sqrt();
    if r == 0.0 {
        (C64::new(1.0, 0.0), ZERO)
    } else {
        (x / r, y / r)
    }
}

fn wilkinson_shift(a: C64, b: C64, c: C64, d: C64) -> C64 {
    let half = (a - d) * 0.5;
    let disc = (half * half + b * c).sqrt();
    let mid = (a + d) * 0.5;
    let (m1, m2) = (mid + disc, mid - disc);
    if (m1 - d).norm() <= (m2 - d).norm() {
        m1
    } else {
        m2
    }
}

fn qr_sweeps(h: &mut CMat, q: &mut CMat) -> Result<()> {
    let n = h.nrows();
    if n < 2 {
        return Ok(());
    }
    let hnorm = h.norm().max(f64::MIN_POSITIVE);
    let max_sweeps = 30 * n;
    let mut sweeps = 0usize;
    let mut since_deflation = 0usize;
    let mut hi = n - 1;
    let mut rots: Vec<(C64, C64)> = Vec::with_capacity(n);
    while hi > 0 {
        let mut l = hi;
        while l > 0 {
            let mut s = h[(l - 1, l - 1)].norm() + h[(l, l)].norm();
            if s == 0.0 {
                s = hnorm;
            }
            if h[(l, l - 1)].norm() <= 1e-14 * s {
                h[(l, l - 1)] = ZERO;
                break;
            }
            l -= 1;
        }
        if l == hi {
            hi -= 1;
            since_deflation = 0;
            continue;
        }
        sweeps += 1;
        since_deflation += 1;
        if sweeps > max_sweeps {
            return Err(Error::SchurNoConvergence { sweeps: max_sweeps });
        }
        let mu = if since_deflation % 11 == 10 {
            h[(hi, hi)] + C64::new(0.75, 0.5) * h[(hi, hi - 1)].norm()
        } else {
            wilkinson_shift(
                h[(hi - 1, hi - 1)],
                h[(hi - 1, hi)],
                h[(hi, hi - 1)],
                h[(hi, hi)],
            )
        };
        for i in l..=hi {
            h[(i, i)] -= mu;
        }
        rots.clear();
        for k in l..hi {
            let (a, b) = givens(h[(k, k)], h[(k + 1, k)]);
            for j in k..n {
                let (x, y) = (h[(k, j)], h[(k + 1, j)]);
                h[(k, j)] = a.conj() * x + b.conj() * y;
                h[(k + 1, j)] = -b * x + a * y;
            }
            h[(k + 1, k)] = ZERO;
            rots.push((a, b));
        }
        for (idx, &(a, b)) in rots.iter().enumerate() {
            let k = l + idx;
            for r in 0..=k + 1 {
                let (x, y) = (h[(r, k)], h[(r, k + 1)]);
                h[(r, k)] = x * a + y * b;
                h[(r, k + 1)] = -x * b.conj() + y * a.conj();
            }
            for r in 0..n {
                let (x, y) = (q[(r, k)], q[(r, k + 1)]);
                q[(r, k)] = x * a + y * b;
                q[(r, k + 1)] = -x * b.conj() + y * a.conj();
            }
        }
        for i in l..=hi {
            h[(i, i)] += mu;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cxlinalg::{max_abs_diff, rng_for, standard_cn};

    #[test]
    fn reconstructs_and_is_triangular() {
        let mut rng = rng_for(3, 0);
        for n in [1usize, 2, 3, 5, 8, 17, 40] {
            let a = standard_cn(&mut rng, n, n);
            let s = complex_schur(&a).unwrap();
            let back = &s.q * &s.t * s.q.adjoint();
            assert!(max_abs_diff(&back, &a) < 1e-11 * n as f64, "n={n}");
            let qq = s.q.adjoint() * &s.q;
            assert!(max_abs_diff(&qq, &CMat::identity(n, n)) < 1e-12 * n as f64);
            for j in 0..n {
                for i in j + 1..n {
                    assert_eq!(s.t[(i, j)], ZERO);
                }
            }
        }
    }

    #[test]
    fn handles_already_triangular_and_zero() {
        let z = CMat::zeros(4, 4);
        let s = complex_schur(&z).unwrap();
        assert!(max_abs_diff(&s.t, &z) == 0.0);
        let d = CMat::from_diagonal(&crate::cxlinalg::CVec::from_vec(vec![
            C64::new(1.0, 0.0),
            C64::new(2.0, 0.0),
            C64::new(3.0, 1.0),
        ]));
        let s = complex_schur(&d).unwrap();
        assert!(max_abs_diff(&(&s.q * &s.t * s.q.adjoint()), &d) < 1e-14);
    }

    #[test]
    fn permutation_matrix_with_unimodular_spectrum() {
        // Cyclic shift: eigenvalues on the unit circle, a classic stall case.
        let n = 6;
        let p = CMat::from_fn(n, n, |i, j| {
            if (i + 1) % n == j {
                C64::new(1.0, 0.0)
            } else {
                ZERO
            }
        });
        let s = complex_schur(&p).unwrap();
        assert!(max_abs_diff(&(&s.q * &s.t * s.q.adjoint()), &p) < 1e-12);
        for i in 0..n {
            assert!((s.t[(i, i)].norm() - 1.0).abs() < 1e-12);
        }
    }
}
