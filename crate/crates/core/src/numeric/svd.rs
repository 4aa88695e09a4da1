//! Truncated SVD by one-sided (Hestenes) Jacobi rotations.
//!
//! Columns of a working copy of `A` are rotated pairwise until mutually
//! orthogonal; the same rotations accumulated on the identity give `V`.
//! Complex pairs are first phase-aligned so the rotation itself is real.

use super::{DenseMatrix, C64};
use crate::{Error, Result};

pub const SVD_MAX_SWEEPS: usize = 60;

/// Relative orthogonality target for a column pair.
const PAIR_TOL: f64 = 1e-15;
/// Off-diagonal floor relative to `||A||_F`.
const OFFDIAG_TOL: f64 = 1e-12;

/// Thin factors of `A ~ U diag(s) V^H`.
#[derive(Debug, Clone)]
pub struct Svd {
    /// `rows x r`, orthonormal columns.
    pub u: DenseMatrix,
    /// Non-increasing, non-negative.
    pub s: Vec<f64>,
    /// `cols x r`, orthonormal columns.
    pub v: DenseMatrix,
}

impl Svd {
    /// `U diag(s) V^H`.
    pub fn reconstruct(&self) -> DenseMatrix {
        let (m, n, r) = (self.u.rows(), self.v.rows(), self.s.len());
        DenseMatrix::from_fn(m, n, |i, j| {
            (0..r).fold(C64::new(0.0, 0.0), |acc, k| acc + self.u.get(i, k) * self.s[k] * self.v.get(j, k).conj())
        })
    }
}

/// Rank-`r` truncated SVD of `a`.
pub fn truncated_svd(a: &DenseMatrix, r: usize) -> Result<Svd> {
    let (m, n) = (a.rows(), a.cols());
    if r == 0 || r > m.min(n) {
        return Err(Error::InvalidArgument(format!("rank {r} out of range for a {m}x{n} matrix")));
    }
    if m < n {
        // A^H = U' S V'^H  =>  A = V' S U'^H
        let t = truncated_svd(&a.conj_transpose(), r)?;
        return Ok(Svd { u: t.v, s: t.s, v: t.u });
    }

    // Column-major working copies.
    let mut cols: Vec<Vec<C64>> = (0..n).map(|j| a.column(j)).collect();
    let mut vcols: Vec<Vec<C64>> = (0..n)
        .map(|j| {
            let mut e = vec![C64::new(0.0, 0.0); n];
            e[j] = C64::new(1.0, 0.0);
            e
        })
        .collect();
    let floor = (OFFDIAG_TOL * a.frobenius_norm()).powi(2);

    let mut converged = false;
    for _sweep in 0..SVD_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let alpha: f64 = cols[p].iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = cols[q].iter().map(|z| z.norm_sqr()).sum();
                let gamma: C64 = cols[p].iter().zip(&cols[q]).map(|(x, y)| x.conj() * y).sum();
                let g = gamma.norm();
                if g <= floor || g <= PAIR_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = gamma / g; // e^{i phi}
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                // Rotate (a_p, e^{-i phi} a_q).
                rotate_pair(&mut cols, p, q, phase.conj(), c, s);
                rotate_pair(&mut vcols, p, q, phase.conj(), c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence { sweeps: SVD_MAX_SWEEPS });
    }

    let mut sigma: Vec<(f64, usize)> =
        cols.iter().enumerate().map(|(j, c)| (c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt(), j)).collect();
    sigma.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));

    let tiny = f64::EPSILON * a.frobenius_norm().max(f64::MIN_POSITIVE) * (m.max(n) as f64);
    let mut ucols: Vec<Vec<C64>> = Vec::with_capacity(r);
    let mut chosen_v: Vec<Vec<C64>> = Vec::with_capacity(r);
    let mut s = Vec::with_capacity(r);
    for &(sv, j) in sigma.iter().take(r) {
        if sv > tiny {
            ucols.push(cols[j].iter().map(|z| z / sv).collect());
            s.push(sv);
        } else {
            ucols.push(orthonormal_complement(&ucols, m));
            s.push(0.0);
        }
        chosen_v.push(vcols[j].clone());
    }

    Ok(Svd {
        u: DenseMatrix::from_columns(m, &ucols)?.into_complex(),
        s,
        v: DenseMatrix::from_columns(n, &chosen_v)?.into_complex(),
    })
}

fn rotate_pair(cols: &mut [Vec<C64>], p: usize, q: usize, phase: C64, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(q);
    let (cp, cq) = (&mut left[p], &mut right[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let yq = *y * phase;
        let xp = *x;
        *x = xp * c - yq * s;
        *y = xp * s + yq * c;
    }
}

/// A unit vector orthogonal to every vector in `basis` (Gram-Schmidt over e_k).
fn orthonormal_complement(basis: &[Vec<C64>], m: usize) -> Vec<C64> {
    for k in 0..m {
        let mut v = vec![C64::new(0.0, 0.0); m];
        v[k] = C64::new(1.0, 0.0);
        for _ in 0..2 {
            for b in basis {
                let proj: C64 = b.iter().zip(&v).map(|(x, y)| x.conj() * y).sum();
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= proj * bi;
                }
            }
        }
        let nrm = super::norm2(&v);
        if nrm > 0.5 {
            return v.into_iter().map(|z| z / nrm).collect();
        }
    }
    unreachable!("fewer than m vectors always leave a complement")
}
