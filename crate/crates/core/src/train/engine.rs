//! Full-matrix forward pass and hand-written reverse mode through the
//! factor chain.
//!
//! Activations are `rN x N` row-major: row `i` holds coordinate `i` of every
//! column of `Sᵀ I_N`, so each operation streams over contiguous batches.

use std::collections::HashMap;

use super::model::{BPProductModel, Layout};
use crate::numeric::{DenseMatrix, C64};
use crate::perm::{elementary_indices, ElementaryPermKind, RelaxedPermutationStack};
use crate::{Error, Result};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Loss terms at one parameter point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    /// `data + entropy_weight * entropy`.
    pub loss: f64,
    /// `(1/N^2) ||T - model||_F^2`.
    pub data: f64,
    pub entropy: f64,
    pub rmse: f64,
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Perm { kind: ElementaryPermKind, chunk: usize, p: f64, logit: usize },
    Butterfly { module: usize, level: usize, offset: usize },
}

/// Forward and inverse index maps keyed by (kind, chunk, size).
type IndexMaps = HashMap<(ElementaryPermKind, usize, usize), (Vec<usize>, Vec<usize>)>;

/// Reusable buffers for repeated evaluations of models of one shape.
#[derive(Debug, Default)]
pub struct Workspace {
    acts: Vec<Vec<C64>>,
    grad: Vec<C64>,
    grad_next: Vec<C64>,
    maps: IndexMaps,
}

impl Workspace {
    pub fn new() -> Self {
        Self::default()
    }

    fn map(&mut self, kind: ElementaryPermKind, n: usize, chunk: usize) {
        self.maps.entry((kind, n, chunk)).or_insert_with(|| {
            let fwd = elementary_indices(kind, n, chunk).expect("valid chunk");
            let mut inv = vec![0; n];
            for (i, &s) in fwd.iter().enumerate() {
                inv[s] = i;
            }
            (fwd, inv)
        });
    }

    /// Loss of `model` against `target`; when `grad` is given it receives
    /// `d loss / d params_flat`.
    pub fn evaluate(
        &mut self,
        model: &BPProductModel,
        target: &DenseMatrix,
        entropy_weight: f64,
        grad: Option<&mut [f64]>,
    ) -> Result<Evaluation> {
        let n = model.size();
        if target.rows() != n || target.cols() != n {
            return Err(Error::dims(format!("{n}x{n}"), format!("{}x{}", target.rows(), target.cols())));
        }
        let layout = model.layout();
        if let Some(g) = &grad {
            if g.len() != layout.len {
                return Err(Error::dims(layout.len, g.len()));
            }
        }
        let ops = build_ops(model, &layout);
        let dim = model.inner_size();
        self.ensure_maps(&ops, dim);
        let total = dim * n;

        if self.acts.len() < ops.len() + 1 {
            self.acts.resize_with(ops.len() + 1, Vec::new);
        }
        for a in &mut self.acts[..=ops.len()] {
            a.clear();
            a.resize(total, ZERO);
        }
        for i in 0..n {
            self.acts[0][i * n + i] = C64::new(1.0, 0.0);
        }

        for (t, op) in ops.iter().enumerate() {
            let (head, tail) = self.acts.split_at_mut(t + 1);
            let x = &head[t];
            let y = &mut tail[0];
            match *op {
                Op::Perm { kind, chunk, p, .. } => {
                    let (src, _) = self.maps.get(&(kind, dim, chunk)).expect("built above");
                    perm_forward(x, y, src, p, n);
                }
                Op::Butterfly { module, level, .. } => {
                    let lvl = &model.modules[module].butterfly.levels()[level];
                    butterfly_forward(x, y, lvl.diagonals(), n);
                }
            }
        }

        let out = &self.acts[ops.len()][..n * n];
        let scale = 1.0 / (n * n) as f64;
        let mut data = 0.0;
        for (z, t) in out.iter().zip(target.entries()) {
            let d = if model.post_real_part { C64::new(z.re, 0.0) - t } else { z - t };
            data += d.norm_sqr();
        }
        data *= scale;
        let entropy = if entropy_weight != 0.0 { model.entropy() } else { 0.0 };
        let eval = Evaluation { loss: data + entropy_weight * entropy, data, entropy, rmse: data.sqrt() };

        let Some(grad) = grad else {
            return Ok(eval);
        };
        grad.iter_mut().for_each(|g| *g = 0.0);

        self.grad.clear();
        self.grad.resize(total, ZERO);
        for (g, (z, t)) in self.grad.iter_mut().zip(out.iter().zip(target.entries())) {
            *g =
                if model.post_real_part { C64::new(2.0 * scale * (z.re - t.re), 0.0) } else { (z - t) * (2.0 * scale) };
        }
        self.grad_next.clear();
        self.grad_next.resize(total, ZERO);

        let real = layout.width == 1;
        for (t, op) in ops.iter().enumerate().rev() {
            let x = &self.acts[t];
            match *op {
                Op::Perm { kind, chunk, p, logit } => {
                    let (src, inv) = self.maps.get(&(kind, dim, chunk)).expect("built in forward");
                    let dp = perm_backward(x, &self.grad, &mut self.grad_next, src, inv, p, n);
                    grad[logit] += dp * p * (1.0 - p);
                }
                Op::Butterfly { module, level, offset } => {
                    let lvl = &model.modules[module].butterfly.levels()[level];
                    let half = lvl.half();
                    let mut acc = vec![ZERO; 4 * half];
                    butterfly_backward(x, &self.grad, &mut self.grad_next, lvl.diagonals(), &mut acc, n);
                    for (q, a) in acc.iter().enumerate() {
                        if real {
                            grad[offset + q] += a.re;
                        } else {
                            grad[offset + 2 * q] += a.re;
                            grad[offset + 2 * q + 1] += a.im;
                        }
                    }
                }
            }
            std::mem::swap(&mut self.grad, &mut self.grad_next);
        }

        if entropy_weight != 0.0 {
            let mut add = |stack: &RelaxedPermutationStack, off: usize| {
                for (s, lvl) in stack.stored_levels().iter().enumerate() {
                    for (c, &l) in lvl.logits.iter().enumerate() {
                        let p = crate::perm::sigmoid(l);
                        grad[off + 3 * s + c] += entropy_weight * (-l * p * (1.0 - p));
                    }
                }
            };
            for (m, ml) in model.modules.iter().zip(&layout.modules) {
                add(&m.permutation, ml.logits);
            }
            if let (Some(p), Some(off)) = (&model.extra_permutation, layout.extra_logits) {
                add(p, off);
            }
        }
        Ok(eval)
    }

    fn ensure_maps(&mut self, ops: &[Op], dim: usize) {
        for op in ops {
            if let Op::Perm { kind, chunk, .. } = *op {
                self.map(kind, dim, chunk);
            }
        }
    }
}

/// Flat op list in application order. Chunk-2 permutation levels and
/// choices with probability exactly 0 are skipped (both are the identity and
/// contribute zero gradient).
fn build_ops(model: &BPProductModel, layout: &Layout) -> Vec<Op> {
    let mut ops = Vec::new();
    let push_perm = |ops: &mut Vec<Op>, stack: &RelaxedPermutationStack, off: usize| {
        for k in 0..stack.depth() {
            let chunk = stack.chunk(k);
            if chunk == 2 {
                continue;
            }
            let lvl = stack.level(k);
            let base = off + 3 * stack.storage_index(k);
            for kind in ElementaryPermKind::ALL {
                let p = crate::perm::sigmoid(lvl.logits[kind.index()]);
                if p == 0.0 {
                    continue;
                }
                ops.push(Op::Perm { kind, chunk, p, logit: base + kind.index() });
            }
        }
    };
    if let (Some(p), Some(off)) = (&model.extra_permutation, layout.extra_logits) {
        push_perm(&mut ops, p, off);
    }
    for (q, (m, ml)) in model.modules.iter().zip(&layout.modules).enumerate().rev() {
        push_perm(&mut ops, &m.permutation, ml.logits);
        for (j, &offset) in ml.levels.iter().enumerate() {
            ops.push(Op::Butterfly { module: q, level: j, offset });
        }
    }
    ops
}

fn perm_forward(x: &[C64], y: &mut [C64], src: &[usize], p: f64, b: usize) {
    let q = 1.0 - p;
    for (i, &s) in src.iter().enumerate() {
        let yi = &mut y[i * b..(i + 1) * b];
        let xi = &x[i * b..(i + 1) * b];
        let xs = &x[s * b..(s + 1) * b];
        if p == 1.0 {
            yi.copy_from_slice(xs);
        } else {
            for ((o, a), c) in yi.iter_mut().zip(xi).zip(xs) {
                *o = a * q + c * p;
            }
        }
    }
}

/// Returns `d loss / d p`; writes the input adjoint to `gx`.
fn perm_backward(x: &[C64], gy: &[C64], gx: &mut [C64], src: &[usize], inv: &[usize], p: f64, b: usize) -> f64 {
    let q = 1.0 - p;
    let mut dp = 0.0;
    for (i, (&s, &t)) in src.iter().zip(inv).enumerate() {
        let gyi = &gy[i * b..(i + 1) * b];
        let gyt = &gy[t * b..(t + 1) * b];
        let xi = &x[i * b..(i + 1) * b];
        let xs = &x[s * b..(s + 1) * b];
        let gxi = &mut gx[i * b..(i + 1) * b];
        for c in 0..b {
            gxi[c] = gyi[c] * q + gyt[c] * p;
            let d = xs[c] - xi[c];
            dp += gyi[c].re * d.re + gyi[c].im * d.im;
        }
    }
    dp
}

fn butterfly_forward(x: &[C64], y: &mut [C64], d: &[Vec<C64>; 4], b: usize) {
    let half = d[0].len();
    let n = x.len() / b;
    for base in (0..n).step_by(2 * half) {
        #[allow(clippy::needless_range_loop)]
        for i in 0..half {
            let (t, u) = (base + i, base + i + half);
            let (d1, d2, d3, d4) = (d[0][i], d[1][i], d[2][i], d[3][i]);
            let xt = &x[t * b..(t + 1) * b];
            let xu = &x[u * b..(u + 1) * b];
            let (ylo, yhi) = y.split_at_mut(u * b);
            let yt = &mut ylo[t * b..(t + 1) * b];
            let yu = &mut yhi[..b];
            for c in 0..b {
                let (a, e) = (xt[c], xu[c]);
                yt[c] = d1 * a + d2 * e;
                yu[c] = d3 * a + d4 * e;
            }
        }
    }
}

/// Accumulates `acc = [dD1, dD2, dD3, dD4]` (each `half` long) and writes the input adjoint.
fn butterfly_backward(x: &[C64], gy: &[C64], gx: &mut [C64], d: &[Vec<C64>; 4], acc: &mut [C64], b: usize) {
    let half = d[0].len();
    let n = x.len() / b;
    for base in (0..n).step_by(2 * half) {
        for i in 0..half {
            let (t, u) = (base + i, base + i + half);
            let (c1, c2, c3, c4) = (d[0][i].conj(), d[1][i].conj(), d[2][i].conj(), d[3][i].conj());
            let xt = &x[t * b..(t + 1) * b];
            let xu = &x[u * b..(u + 1) * b];
            let gt = &gy[t * b..(t + 1) * b];
            let gu = &gy[u * b..(u + 1) * b];
            let (glo, ghi) = gx.split_at_mut(u * b);
            let gxt = &mut glo[t * b..(t + 1) * b];
            let gxu = &mut ghi[..b];
            let (mut a1, mut a2, mut a3, mut a4) = (ZERO, ZERO, ZERO, ZERO);
            for c in 0..b {
                let (p, q) = (gt[c], gu[c]);
                let (xa, xb) = (xt[c].conj(), xu[c].conj());
                gxt[c] = c1 * p + c3 * q;
                gxu[c] = c2 * p + c4 * q;
                a1 += p * xa;
                a2 += p * xb;
                a3 += q * xa;
                a4 += q * xb;
            }
            acc[i] += a1;
            acc[half + i] += a2;
            acc[2 * half + i] += a3;
            acc[3 * half + i] += a4;
        }
    }
}

/// Convenience wrapper: loss and flat gradient in one call.
pub fn loss_and_gradient(
    model: &BPProductModel,
    target: &DenseMatrix,
    entropy_weight: f64,
) -> Result<(Evaluation, Vec<f64>)> {
    let mut ws = Workspace::new();
    let mut g = vec![0.0; model.flat_len()];
    let e = ws.evaluate(model, target, entropy_weight, Some(&mut g))?;
    Ok((e, g))
}

/// Loss only.
pub fn objective(model: &BPProductModel, target: &DenseMatrix, entropy_weight: f64) -> Result<f64> {
    Ok(Workspace::new().evaluate(model, target, entropy_weight, None)?.loss)
}

/// Central finite-difference gradient of [`objective`].
pub fn finite_difference_gradient(
    model: &BPProductModel,
    target: &DenseMatrix,
    entropy_weight: f64,
    step: f64,
) -> Result<Vec<f64>> {
    let mut ws = Workspace::new();
    let theta = model.params_flat();
    let mut probe = model.clone();
    let mut out = Vec::with_capacity(theta.len());
    let mut t = theta.clone();
    for i in 0..theta.len() {
        t[i] = theta[i] + step;
        probe.set_params_flat(&t)?;
        let fp = ws.evaluate(&probe, target, entropy_weight, None)?.loss;
        t[i] = theta[i] - step;
        probe.set_params_flat(&t)?;
        let fm = ws.evaluate(&probe, target, entropy_weight, None)?.loss;
        t[i] = theta[i];
        out.push((fp - fm) / (2.0 * step));
    }
    Ok(out)
}

/// Worst disagreement between analytic and central-difference gradients.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GradCheck {
    pub max_abs_error: f64,
    /// `max_i |a_i - f_i| / max(max_i |a_i|, max_i |f_i|)`: every coordinate's
    /// error relative to the gradient's scale.
    pub max_rel_error: f64,
    /// `max_i |a_i - f_i| / max(|a_i|, |f_i|)` over coordinates at least 1% of
    /// the gradient's scale (diagnostic only).
    pub max_coord_rel_error: f64,
    pub params: usize,
}

pub fn gradient_check(
    model: &BPProductModel,
    target: &DenseMatrix,
    entropy_weight: f64,
    step: f64,
) -> Result<GradCheck> {
    let (_, analytic) = loss_and_gradient(model, target, entropy_weight)?;
    let numeric = finite_difference_gradient(model, target, entropy_weight, step)?;
    let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let scale = inf(&analytic).max(inf(&numeric)).max(f64::MIN_POSITIVE);
    let mut max_abs: f64 = 0.0;
    let mut max_coord: f64 = 0.0;
    for (a, f) in analytic.iter().zip(&numeric) {
        let d = (a - f).abs();
        max_abs = max_abs.max(d);
        let m = a.abs().max(f.abs());
        if m >= 1e-2 * scale {
            max_coord = max_coord.max(d / m);
        }
    }
    Ok(GradCheck {
        max_abs_error: max_abs,
        max_rel_error: max_abs / scale,
        max_coord_rel_error: max_coord,
        params: analytic.len(),
    })
}
