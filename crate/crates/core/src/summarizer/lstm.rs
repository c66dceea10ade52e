//! Masked, batched LSTM over time-major sequences.
//!
//! Buffers are laid out `[position][batch][feature]`. Masked (padding) rows
//! hold their previous state and emit zeros, so a padded sequence behaves
//! exactly like the unpadded one.

use crate::linalg::{gemm_nn, gemm_nt, gemm_tn};
use crate::scalar::Real;

use super::model::LstmLayout;

pub(crate) fn sigmoid<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

pub(crate) struct LstmCache<T> {
    steps: usize,
    batch: usize,
    reverse: bool,
    /// Activated gates per processing step, `[step][batch][4H]`.
    gates: Vec<T>,
    /// States before/after each step: index `k` is the state before step `k`.
    h: Vec<T>,
    c: Vec<T>,
    tanh_c: Vec<T>,
}

impl<T: Real> LstmCache<T> {
    fn position(&self, k: usize) -> usize {
        if self.reverse {
            self.steps - 1 - k
        } else {
            k
        }
    }

    /// Hidden and cell state after the last step, `[batch][H]` each.
    pub fn final_state(&self, hidden: usize) -> (&[T], &[T]) {
        let bh = self.batch * hidden;
        let s = self.steps;
        (&self.h[s * bh..(s + 1) * bh], &self.c[s * bh..(s + 1) * bh])
    }
}

/// Runs one LSTM over `steps` positions. `mask[p * batch + b]` marks real
/// tokens. Returns the per-position outputs and the cache for backprop.
#[allow(clippy::too_many_arguments)]
pub(crate) fn forward<T: Real>(
    params: &[T],
    lay: &LstmLayout,
    x: &[T],
    mask: &[bool],
    steps: usize,
    batch: usize,
    reverse: bool,
    init: Option<(&[T], &[T])>,
) -> (Vec<T>, LstmCache<T>) {
    let (n_in, h) = (lay.input, lay.hidden);
    let g4 = 4 * h;
    let bh = batch * h;
    let (wx, wh, bias) = (&params[lay.wx.clone()], &params[lay.wh.clone()], &params[lay.b.clone()]);
    let mut xw = vec![T::zero(); steps * batch * g4];
    gemm_nn(steps * batch, n_in, g4, x, wx, &mut xw);

    let mut cache = LstmCache {
        steps,
        batch,
        reverse,
        gates: vec![T::zero(); steps * batch * g4],
        h: vec![T::zero(); (steps + 1) * bh],
        c: vec![T::zero(); (steps + 1) * bh],
        tanh_c: vec![T::zero(); steps * bh],
    };
    if let Some((h0, c0)) = init {
        cache.h[..bh].copy_from_slice(h0);
        cache.c[..bh].copy_from_slice(c0);
    }
    let mut out = vec![T::zero(); steps * bh];
    for k in 0..steps {
        let p = cache.position(k);
        let mut pre = xw[p * batch * g4..(p + 1) * batch * g4].to_vec();
        for row in pre.chunks_mut(g4) {
            row.iter_mut().zip(bias).for_each(|(v, &b)| *v += b);
        }
        let (prev, next) = cache.h.split_at_mut((k + 1) * bh);
        let h_prev = &prev[k * bh..];
        gemm_nn(batch, h, g4, h_prev, wh, &mut pre);
        let h_next = &mut next[..bh];
        let (cprev, cnext) = cache.c.split_at_mut((k + 1) * bh);
        let c_prev = &cprev[k * bh..];
        let c_next = &mut cnext[..bh];
        for b in 0..batch {
            let hp = &h_prev[b * h..(b + 1) * h];
            let cp = &c_prev[b * h..(b + 1) * h];
            if !mask[p * batch + b] {
                h_next[b * h..(b + 1) * h].copy_from_slice(hp);
                c_next[b * h..(b + 1) * h].copy_from_slice(cp);
                continue;
            }
            let g = &mut cache.gates[(k * batch + b) * g4..(k * batch + b + 1) * g4];
            let pr = &pre[b * g4..(b + 1) * g4];
            for j in 0..h {
                let i_g = sigmoid(pr[j]);
                let f_g = sigmoid(pr[h + j]);
                let g_g = pr[2 * h + j].tanh();
                let o_g = sigmoid(pr[3 * h + j]);
                g[j] = i_g;
                g[h + j] = f_g;
                g[2 * h + j] = g_g;
                g[3 * h + j] = o_g;
                let c = f_g * cp[j] + i_g * g_g;
                let tc = c.tanh();
                c_next[b * h + j] = c;
                cache.tanh_c[k * bh + b * h + j] = tc;
                let hv = o_g * tc;
                h_next[b * h + j] = hv;
                out[p * bh + b * h + j] = hv;
            }
        }
    }
    (out, cache)
}

pub(crate) struct LstmGrads<T> {
    /// Gradient w.r.t. the inputs, `[position][batch][input]`.
    pub dx: Vec<T>,
    pub dh0: Vec<T>,
    pub dc0: Vec<T>,
}

/// Backprop through [`forward`]. `d_out` is the gradient of the outputs
/// (position-indexed); `d_final` the gradient of the final `(h, c)`.
/// Parameter gradients accumulate into `grad` at the layout's offsets.
#[allow(clippy::too_many_arguments)]
pub(crate) fn backward<T: Real>(
    params: &[T],
    lay: &LstmLayout,
    x: &[T],
    mask: &[bool],
    cache: &LstmCache<T>,
    d_out: &[T],
    d_final: Option<(&[T], &[T])>,
    grad: &mut [T],
) -> LstmGrads<T> {
    let (n_in, h) = (lay.input, lay.hidden);
    let g4 = 4 * h;
    let (steps, batch) = (cache.steps, cache.batch);
    let bh = batch * h;
    let wh = &params[lay.wh.clone()];
    let mut dpre_all = vec![T::zero(); steps * batch * g4];
    let (mut dh_next, mut dc_next) = match d_final {
        Some((dh, dc)) => (dh.to_vec(), dc.to_vec()),
        None => (vec![T::zero(); bh], vec![T::zero(); bh]),
    };
    let mut gwh = vec![T::zero(); h * g4];
    let mut gb = vec![T::zero(); g4];
    for k in (0..steps).rev() {
        let p = cache.position(k);
        let c_prev = &cache.c[k * bh..(k + 1) * bh];
        let h_prev = &cache.h[k * bh..(k + 1) * bh];
        let dpre = &mut dpre_all[p * batch * g4..(p + 1) * batch * g4];
        let mut dh_prev = vec![T::zero(); bh];
        let mut dc_prev = vec![T::zero(); bh];
        for b in 0..batch {
            let r = b * h..(b + 1) * h;
            if !mask[p * batch + b] {
                dh_prev[r.clone()].copy_from_slice(&dh_next[r.clone()]);
                dc_prev[r.clone()].copy_from_slice(&dc_next[r]);
                continue;
            }
            let g = &cache.gates[(k * batch + b) * g4..(k * batch + b + 1) * g4];
            let dp = &mut dpre[b * g4..(b + 1) * g4];
            for j in 0..h {
                let dh = dh_next[b * h + j] + d_out[p * bh + b * h + j];
                let (i_g, f_g, g_g, o_g) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
                let tc = cache.tanh_c[k * bh + b * h + j];
                let dc = dc_next[b * h + j] + dh * o_g * (T::one() - tc * tc);
                dp[j] = dc * g_g * i_g * (T::one() - i_g);
                dp[h + j] = dc * c_prev[b * h + j] * f_g * (T::one() - f_g);
                dp[2 * h + j] = dc * i_g * (T::one() - g_g * g_g);
                dp[3 * h + j] = dh * tc * o_g * (T::one() - o_g);
                dc_prev[b * h + j] = dc * f_g;
            }
        }
        gemm_nt(batch, g4, h, dpre, wh, &mut dh_prev);
        gemm_tn(h, batch, g4, h_prev, dpre, &mut gwh);
        for row in dpre.chunks(g4) {
            gb.iter_mut().zip(row).for_each(|(a, &v)| *a += v);
        }
        dh_next = dh_prev;
        dc_next = dc_prev;
    }
    let mut gwx = vec![T::zero(); n_in * g4];
    gemm_tn(n_in, steps * batch, g4, x, &dpre_all, &mut gwx);
    let mut dx = vec![T::zero(); steps * batch * n_in];
    gemm_nt(steps * batch, g4, n_in, &dpre_all, &params[lay.wx.clone()], &mut dx);
    for (dst, src) in [(lay.wx.clone(), gwx), (lay.wh.clone(), gwh), (lay.b.clone(), gb)] {
        grad[dst].iter_mut().zip(src).for_each(|(a, v)| *a += v);
    }
    LstmGrads { dx, dh0: dh_next, dc0: dc_next }
}
