//! Teacher-forced forward pass, loss, backprop and greedy decoding.

use crate::error::{Error, Result};
use crate::features::{EOS, PAD, SOS};
use crate::linalg::{dot, gemm_nn, gemm_nt, gemm_tn};
use crate::scalar::{CompensatedSum, Real};

use super::lstm::{self, LstmCache};
use super::model::Seq2SeqModel;

/// One training example: source ids and target ids (ending in EOS).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeqPair {
    pub src: Vec<usize>,
    pub tgt: Vec<usize>,
}

impl SeqPair {
    pub fn new(src: Vec<usize>, tgt: Vec<usize>) -> Self {
        Self { src, tgt }
    }
}

/// Loss summed over real target positions plus their count.
#[derive(Debug, Clone, Copy, Default)]
pub struct LossSum {
    pub total: f64,
    pub tokens: usize,
}

impl LossSum {
    pub fn mean(&self) -> f64 {
        if self.tokens == 0 {
            0.0
        } else {
            self.total / self.tokens as f64
        }
    }
}

/// Per-pair view of a teacher-forced pass (real positions only).
#[derive(Debug, Clone)]
pub struct ForwardOutput<T> {
    /// Mean negative log-likelihood over all real target positions.
    pub loss: f64,
    /// `[pair][step][vocab]`
    pub logits: Vec<Vec<Vec<T>>>,
    /// `[pair][step][source position]`
    pub attention: Vec<Vec<Vec<T>>>,
    /// Per-pair mean loss.
    pub pair_losses: Vec<f64>,
}

struct Encoded<T> {
    steps: usize,
    batch: usize,
    mask: Vec<bool>,
    /// Input to each layer, `[layer]` of `[pos][batch][in]`.
    inputs: Vec<Vec<T>>,
    /// `[layer][direction]`
    caches: Vec<Vec<LstmCache<T>>>,
    /// Top-layer outputs, `[pos][batch][D]`.
    out: Vec<T>,
    /// Concatenated final states of the top layer, `[batch][D]`.
    final_h: Vec<T>,
    final_c: Vec<T>,
    /// Attention keys `out · W_k`, `[pos][batch][H]`.
    keys: Vec<T>,
}

struct Decoded<T> {
    steps: usize,
    mask: Vec<bool>,
    ids_in: Vec<usize>,
    x: Vec<T>,
    cache: LstmCache<T>,
    out: Vec<T>,
    /// `[step][batch][src pos]`
    attn: Vec<T>,
    /// `[step][batch][2H]` as `[context; h]`
    z: Vec<T>,
    logits: Vec<T>,
    gold: Vec<usize>,
}

fn col_sums_into<T: Real>(m: &[T], width: usize, out: &mut [T]) {
    for row in m.chunks(width) {
        out.iter_mut().zip(row).for_each(|(a, &v)| *a += v);
    }
}

/// Softmax of `xs` restricted to `valid`; masked entries get exactly zero.
fn masked_softmax<T: Real>(xs: &mut [T], valid: impl Fn(usize) -> bool) {
    let mut max = T::neg_infinity();
    for (s, &v) in xs.iter().enumerate() {
        if valid(s) && v > max {
            max = v;
        }
    }
    let mut sum = T::zero();
    for (s, v) in xs.iter_mut().enumerate() {
        if valid(s) {
            *v = (*v - max).exp();
            sum += *v;
        } else {
            *v = T::zero();
        }
    }
    xs.iter_mut().for_each(|v| *v /= sum);
}

impl<T: Real> Seq2SeqModel<T> {
    fn embed(&self, table: std::ops::Range<usize>, ids: &[usize], mask: &[bool]) -> Vec<T> {
        let e = self.dims.embed;
        let table = &self.params[table];
        let mut x = vec![T::zero(); ids.len() * e];
        for (n, (&id, &m)) in ids.iter().zip(mask).enumerate() {
            if m {
                x[n * e..(n + 1) * e].copy_from_slice(&table[id * e..(id + 1) * e]);
            }
        }
        x
    }

    fn encode(&self, srcs: &[&[usize]]) -> Encoded<T> {
        let batch = srcs.len();
        let steps = srcs.iter().map(|s| s.len()).max().unwrap_or(0);
        let mut ids = vec![PAD; steps * batch];
        for (b, s) in srcs.iter().enumerate() {
            for (p, &id) in s.iter().enumerate() {
                ids[p * batch + b] = id;
            }
        }
        let mask: Vec<bool> = ids.iter().map(|&id| id != PAD).collect();
        let (h, d) = (self.dims.hidden, self.dims.encoder_width());
        let mut x = self.embed(self.layout.src_emb.clone(), &ids, &mask);
        let mut inputs = Vec::new();
        let mut caches = Vec::new();
        let mut final_h = Vec::new();
        let mut final_c = Vec::new();
        for layer in &self.layout.encoder {
            let mut out = vec![T::zero(); steps * batch * d];
            let mut layer_caches = Vec::new();
            final_h = vec![T::zero(); batch * d];
            final_c = vec![T::zero(); batch * d];
            for (dir, lay) in layer.iter().enumerate() {
                let (o, cache) = lstm::forward(&self.params, lay, &x, &mask, steps, batch, dir == 1, None);
                for n in 0..steps * batch {
                    out[n * d + dir * h..n * d + (dir + 1) * h].copy_from_slice(&o[n * h..(n + 1) * h]);
                }
                let (fh, fc) = cache.final_state(h);
                for b in 0..batch {
                    final_h[b * d + dir * h..b * d + (dir + 1) * h].copy_from_slice(&fh[b * h..(b + 1) * h]);
                    final_c[b * d + dir * h..b * d + (dir + 1) * h].copy_from_slice(&fc[b * h..(b + 1) * h]);
                }
                layer_caches.push(cache);
            }
            inputs.push(std::mem::replace(&mut x, out));
            caches.push(layer_caches);
        }
        let mut keys = vec![T::zero(); steps * batch * h];
        gemm_nn(steps * batch, d, h, &x, &self.params[self.layout.attn_k.clone()], &mut keys);
        Encoded { steps, batch, mask, inputs, caches, out: x, final_h, final_c, keys }
    }

    fn bridge(&self, enc: &Encoded<T>) -> (Vec<T>, Vec<T>) {
        let (h, d, batch) = (self.dims.hidden, self.dims.encoder_width(), enc.batch);
        let l = &self.layout;
        let mut h0 = vec![T::zero(); batch * h];
        for b in 0..batch {
            h0[b * h..(b + 1) * h].copy_from_slice(&self.params[l.bridge_h_b.clone()]);
        }
        let mut c0 = vec![T::zero(); batch * h];
        for b in 0..batch {
            c0[b * h..(b + 1) * h].copy_from_slice(&self.params[l.bridge_c_b.clone()]);
        }
        gemm_nn(batch, d, h, &enc.final_h, &self.params[l.bridge_h_w.clone()], &mut h0);
        gemm_nn(batch, d, h, &enc.final_c, &self.params[l.bridge_c_w.clone()], &mut c0);
        (h0, c0)
    }

    /// Attention and output projection for decoder states `dec_h`
    /// (`[step][batch][H]`). Fills `attn` and `z` and returns the logits.
    fn attend(&self, enc: &Encoded<T>, dec_h: &[T], dec_mask: &[bool], steps: usize, attn: &mut [T], z: &mut [T]) -> Vec<T> {
        let (h, batch, s_len) = (self.dims.hidden, enc.batch, enc.steps);
        let scale = T::one() / T::lit(h as f64).sqrt();
        for t in 0..steps {
            for b in 0..batch {
                if !dec_mask[t * batch + b] {
                    continue;
                }
                let q = &dec_h[(t * batch + b) * h..(t * batch + b + 1) * h];
                let a = &mut attn[(t * batch + b) * s_len..(t * batch + b + 1) * s_len];
                for (s, av) in a.iter_mut().enumerate() {
                    if enc.mask[s * batch + b] {
                        *av = dot(q, &enc.keys[(s * batch + b) * h..(s * batch + b + 1) * h]) * scale;
                    }
                }
                masked_softmax(a, |s| enc.mask[s * batch + b]);
                let zrow = &mut z[(t * batch + b) * 2 * h..(t * batch + b + 1) * 2 * h];
                let (ctx, hq) = zrow.split_at_mut(h);
                for (s, &av) in a.iter().enumerate() {
                    if av != T::zero() {
                        let k = &enc.keys[(s * batch + b) * h..(s * batch + b + 1) * h];
                        ctx.iter_mut().zip(k).for_each(|(c, &kv)| *c += av * kv);
                    }
                }
                hq.copy_from_slice(q);
            }
        }
        let v = self.v_tgt;
        let mut logits = vec![T::zero(); steps * batch * v];
        for r in 0..steps * batch {
            logits[r * v..(r + 1) * v].copy_from_slice(&self.params[self.layout.out_b.clone()]);
        }
        gemm_nn(steps * batch, 2 * h, v, z, &self.params[self.layout.out_w.clone()], &mut logits);
        logits
    }

    fn decode_teacher_forced(&self, enc: &Encoded<T>, tgts: &[&[usize]]) -> Decoded<T> {
        let batch = enc.batch;
        let h = self.dims.hidden;
        let steps = tgts.iter().map(|t| t.len()).max().unwrap_or(0);
        let mut ids_in = vec![PAD; steps * batch];
        let mut gold = vec![PAD; steps * batch];
        for (b, t) in tgts.iter().enumerate() {
            for (p, &id) in t.iter().enumerate() {
                gold[p * batch + b] = id;
                ids_in[p * batch + b] = if p == 0 { SOS } else { t[p - 1] };
            }
        }
        let mask: Vec<bool> = gold.iter().map(|&id| id != PAD).collect();
        let x = self.embed(self.layout.tgt_emb.clone(), &ids_in, &mask);
        let (h0, c0) = self.bridge(enc);
        let (out, cache) = lstm::forward(&self.params, &self.layout.decoder, &x, &mask, steps, batch, false, Some((&h0, &c0)));
        let mut attn = vec![T::zero(); steps * batch * enc.steps];
        let mut z = vec![T::zero(); steps * batch * 2 * h];
        let logits = self.attend(enc, &out, &mask, steps, &mut attn, &mut z);
        Decoded { steps, mask, ids_in, x, cache, out, attn, z, logits, gold }
    }

    fn validate_batch(&self, batch: &[&SeqPair]) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        for p in batch {
            self.check_ids(&p.src, &p.tgt)?;
            if p.src.iter().all(|&id| id == PAD) {
                return Err(Error::invalid("source sequence has no tokens"));
            }
            if p.tgt.iter().all(|&id| id == PAD) {
                return Err(Error::invalid("target sequence has no tokens"));
            }
        }
        Ok(())
    }

    /// Per-position losses (`f64`) for real positions, in `[step][batch]`
    /// order; masked positions hold `None`.
    fn position_losses(&self, dec: &Decoded<T>, batch: usize) -> Vec<Option<f64>> {
        let v = self.v_tgt;
        (0..dec.steps * batch)
            .map(|r| {
                if !dec.mask[r] {
                    return None;
                }
                let row = &dec.logits[r * v..(r + 1) * v];
                let max = row.iter().fold(T::neg_infinity(), |m, &x| m.max(x));
                let lse = row.iter().map(|&x| (x - max).exp()).sum::<T>().ln() + max;
                Some((lse - row[dec.gold[r]]).as_f64())
            })
            .collect()
    }

    /// Loss of a batch without gradients.
    pub fn batch_loss(&self, batch: &[&SeqPair]) -> Result<LossSum> {
        self.validate_batch(batch)?;
        let srcs: Vec<&[usize]> = batch.iter().map(|p| p.src.as_slice()).collect();
        let tgts: Vec<&[usize]> = batch.iter().map(|p| p.tgt.as_slice()).collect();
        let enc = self.encode(&srcs);
        let dec = self.decode_teacher_forced(&enc, &tgts);
        let mut sum = CompensatedSum::default();
        let mut tokens = 0;
        for l in self.position_losses(&dec, batch.len()).into_iter().flatten() {
            sum.add(l);
            tokens += 1;
        }
        Ok(LossSum { total: sum.value(), tokens })
    }

    /// Token-weighted mean loss over `pairs`, evaluated in chunks.
    pub fn evaluate_loss(&self, pairs: &[SeqPair], batch_size: usize) -> Result<f64> {
        let mut sum = CompensatedSum::default();
        let mut tokens = 0;
        for chunk in pairs.chunks(batch_size.max(1)) {
            let refs: Vec<&SeqPair> = chunk.iter().collect();
            let l = self.batch_loss(&refs)?;
            sum.add(l.total);
            tokens += l.tokens;
        }
        Ok(if tokens == 0 { 0.0 } else { sum.value() / tokens as f64 })
    }

    /// Teacher-forced pass exposing logits and attention weights.
    pub fn forward_teacher_forced(&self, pairs: &[SeqPair]) -> Result<ForwardOutput<T>> {
        let batch: Vec<&SeqPair> = pairs.iter().collect();
        self.validate_batch(&batch)?;
        let srcs: Vec<&[usize]> = batch.iter().map(|p| p.src.as_slice()).collect();
        let tgts: Vec<&[usize]> = batch.iter().map(|p| p.tgt.as_slice()).collect();
        let enc = self.encode(&srcs);
        let dec = self.decode_teacher_forced(&enc, &tgts);
        let n = batch.len();
        let v = self.v_tgt;
        let losses = self.position_losses(&dec, n);
        let mut total = CompensatedSum::default();
        let mut tokens = 0;
        let mut out = ForwardOutput { loss: 0.0, logits: vec![Vec::new(); n], attention: vec![Vec::new(); n], pair_losses: Vec::new() };
        let mut pair_sums = vec![CompensatedSum::default(); n];
        let mut pair_tokens = vec![0usize; n];
        for t in 0..dec.steps {
            for b in 0..n {
                let r = t * n + b;
                if let Some(l) = losses[r] {
                    total.add(l);
                    tokens += 1;
                    pair_sums[b].add(l);
                    pair_tokens[b] += 1;
                    out.logits[b].push(dec.logits[r * v..(r + 1) * v].to_vec());
                    out.attention[b].push(dec.attn[r * enc.steps..r * enc.steps + batch[b].src.len()].to_vec());
                }
            }
        }
        out.loss = total.value() / tokens as f64;
        out.pair_losses = pair_sums.iter().zip(&pair_tokens).map(|(s, &c)| s.value() / c as f64).collect();
        Ok(out)
    }

    /// Mean loss over the batch and its gradient w.r.t. all parameters.
    pub fn loss_and_grad(&self, batch: &[&SeqPair]) -> Result<(LossSum, Vec<T>)> {
        self.validate_batch(batch)?;
        let n = batch.len();
        let (h, d, v, e) = (self.dims.hidden, self.dims.encoder_width(), self.v_tgt, self.dims.embed);
        let lay = &self.layout;
        let srcs: Vec<&[usize]> = batch.iter().map(|p| p.src.as_slice()).collect();
        let tgts: Vec<&[usize]> = batch.iter().map(|p| p.tgt.as_slice()).collect();
        let enc = self.encode(&srcs);
        let dec = self.decode_teacher_forced(&enc, &tgts);
        let losses = self.position_losses(&dec, n);
        let mut sum = CompensatedSum::default();
        let mut tokens = 0usize;
        for l in losses.iter().flatten() {
            sum.add(*l);
            tokens += 1;
        }
        let inv = T::one() / T::lit(tokens as f64);
        let mut grad = vec![T::zero(); self.params.len()];

        // output layer
        let rows = dec.steps * n;
        let mut dlogits = vec![T::zero(); rows * v];
        for r in 0..rows {
            if !dec.mask[r] {
                continue;
            }
            let row = &dec.logits[r * v..(r + 1) * v];
            let max = row.iter().fold(T::neg_infinity(), |m, &x| m.max(x));
            let dl = &mut dlogits[r * v..(r + 1) * v];
            let mut z = T::zero();
            for (o, &x) in dl.iter_mut().zip(row) {
                *o = (x - max).exp();
                z += *o;
            }
            dl.iter_mut().for_each(|o| *o = *o / z * inv);
            dl[dec.gold[r]] -= inv;
        }
        gemm_tn(2 * h, rows, v, &dec.z, &dlogits, &mut grad[lay.out_w.clone()]);
        col_sums_into(&dlogits, v, &mut grad[lay.out_b.clone()]);
        let mut dz = vec![T::zero(); rows * 2 * h];
        gemm_nt(rows, v, 2 * h, &dlogits, &self.params[lay.out_w.clone()], &mut dz);

        // attention
        let s_len = enc.steps;
        let scale = T::one() / T::lit(h as f64).sqrt();
        let mut dkeys = vec![T::zero(); s_len * n * h];
        let mut ddec = vec![T::zero(); rows * h];
        let mut da = vec![T::zero(); s_len];
        for t in 0..dec.steps {
            for b in 0..n {
                let r = t * n + b;
                if !dec.mask[r] {
                    continue;
                }
                let a = &dec.attn[r * s_len..(r + 1) * s_len];
                let dctx = &dz[r * 2 * h..r * 2 * h + h];
                let q = &dec.out[r * h..(r + 1) * h];
                let dq = &mut ddec[r * h..(r + 1) * h];
                dq.copy_from_slice(&dz[r * 2 * h + h..(r + 1) * 2 * h]);
                let mut weighted = T::zero();
                for s in 0..s_len {
                    da[s] = T::zero();
                    if a[s] == T::zero() {
                        continue;
                    }
                    let k = &enc.keys[(s * n + b) * h..(s * n + b + 1) * h];
                    da[s] = dot(dctx, k);
                    weighted += a[s] * da[s];
                    let dk = &mut dkeys[(s * n + b) * h..(s * n + b + 1) * h];
                    dk.iter_mut().zip(dctx).for_each(|(g, &c)| *g += a[s] * c);
                }
                for s in 0..s_len {
                    if a[s] == T::zero() {
                        continue;
                    }
                    let dscore = a[s] * (da[s] - weighted) * scale;
                    let k = &enc.keys[(s * n + b) * h..(s * n + b + 1) * h];
                    dq.iter_mut().zip(k).for_each(|(g, &kv)| *g += dscore * kv);
                    let dk = &mut dkeys[(s * n + b) * h..(s * n + b + 1) * h];
                    dk.iter_mut().zip(q).for_each(|(g, &qv)| *g += dscore * qv);
                }
            }
        }

        // decoder
        let dg = lstm::backward(&self.params, &lay.decoder, &dec.x, &dec.mask, &dec.cache, &ddec, None, &mut grad);
        {
            let temb = &mut grad[lay.tgt_emb.clone()];
            for (r, &id) in dec.ids_in.iter().enumerate() {
                if dec.mask[r] {
                    temb[id * e..(id + 1) * e].iter_mut().zip(&dg.dx[r * e..(r + 1) * e]).for_each(|(g, &x)| *g += x);
                }
            }
        }

        // bridge
        gemm_tn(d, n, h, &enc.final_h, &dg.dh0, &mut grad[lay.bridge_h_w.clone()]);
        col_sums_into(&dg.dh0, h, &mut grad[lay.bridge_h_b.clone()]);
        gemm_tn(d, n, h, &enc.final_c, &dg.dc0, &mut grad[lay.bridge_c_w.clone()]);
        col_sums_into(&dg.dc0, h, &mut grad[lay.bridge_c_b.clone()]);
        let mut dfinal_h = vec![T::zero(); n * d];
        gemm_nt(n, h, d, &dg.dh0, &self.params[lay.bridge_h_w.clone()], &mut dfinal_h);
        let mut dfinal_c = vec![T::zero(); n * d];
        gemm_nt(n, h, d, &dg.dc0, &self.params[lay.bridge_c_w.clone()], &mut dfinal_c);

        // keys
        gemm_tn(d, s_len * n, h, &enc.out, &dkeys, &mut grad[lay.attn_k.clone()]);
        let mut dout = vec![T::zero(); s_len * n * d];
        gemm_nt(s_len * n, h, d, &dkeys, &self.params[lay.attn_k.clone()], &mut dout);

        // encoder, top layer first
        let n_layers = lay.encoder.len();
        for l in (0..n_layers).rev() {
            let x = &enc.inputs[l];
            let n_in = lay.encoder[l][0].input;
            let mut dx = vec![T::zero(); s_len * n * n_in];
            for (dir, llay) in lay.encoder[l].iter().enumerate() {
                let cols = dir * h..(dir + 1) * h;
                let mut d_dir = vec![T::zero(); s_len * n * h];
                for r in 0..s_len * n {
                    d_dir[r * h..(r + 1) * h].copy_from_slice(&dout[r * d + cols.start..r * d + cols.end]);
                }
                let fin = if l + 1 == n_layers {
                    let mut fh = vec![T::zero(); n * h];
                    let mut fc = vec![T::zero(); n * h];
                    for b in 0..n {
                        fh[b * h..(b + 1) * h].copy_from_slice(&dfinal_h[b * d + cols.start..b * d + cols.end]);
                        fc[b * h..(b + 1) * h].copy_from_slice(&dfinal_c[b * d + cols.start..b * d + cols.end]);
                    }
                    Some((fh, fc))
                } else {
                    None
                };
                let g = lstm::backward(
                    &self.params,
                    llay,
                    x,
                    &enc.mask,
                    &enc.caches[l][dir],
                    &d_dir,
                    fin.as_ref().map(|(a, b)| (a.as_slice(), b.as_slice())),
                    &mut grad,
                );
                dx.iter_mut().zip(&g.dx).for_each(|(a, &b)| *a += b);
            }
            dout = dx;
        }
        let semb = &mut grad[lay.src_emb.clone()];
        let mut ids = vec![PAD; s_len * n];
        for (b, s) in srcs.iter().enumerate() {
            for (p, &id) in s.iter().enumerate() {
                ids[p * n + b] = id;
            }
        }
        for (r, &id) in ids.iter().enumerate() {
            if enc.mask[r] {
                semb[id * e..(id + 1) * e].iter_mut().zip(&dout[r * e..(r + 1) * e]).for_each(|(g, &x)| *g += x);
            }
        }
        Ok((LossSum { total: sum.value(), tokens }, grad))
    }

    /// Greedy decoding from SOS: argmax at each step (ties to the lowest id),
    /// stopping at EOS (not emitted) or after `max_len` tokens.
    pub fn greedy_decode(&self, src: &[usize], max_len: usize) -> Result<Vec<usize>> {
        if max_len == 0 {
            return Ok(Vec::new());
        }
        self.check_ids(src, &[])?;
        if src.iter().all(|&id| id == PAD) {
            return Err(Error::invalid("source sequence has no tokens"));
        }
        let enc = self.encode(&[src]);
        let (h0, c0) = self.bridge(&enc);
        let h = self.dims.hidden;
        let (mut hs, mut cs) = (h0, c0);
        let mut prev = SOS;
        let mut out = Vec::new();
        let mask = [true];
        while out.len() < max_len {
            let x = self.embed(self.layout.tgt_emb.clone(), &[prev], &mask);
            let (o, cache) = lstm::forward(&self.params, &self.layout.decoder, &x, &mask, 1, 1, false, Some((&hs, &cs)));
            let (fh, fc) = cache.final_state(h);
            hs = fh.to_vec();
            cs = fc.to_vec();
            let mut attn = vec![T::zero(); enc.steps];
            let mut z = vec![T::zero(); 2 * h];
            let logits = self.attend(&enc, &o, &mask, 1, &mut attn, &mut z);
            let mut best = 0;
            for (i, &l) in logits.iter().enumerate() {
                if l > logits[best] {
                    best = i;
                }
            }
            if best == EOS {
                break;
            }
            out.push(best);
            prev = best;
        }
        Ok(out)
    }
}

/// Deterministic toy corpus for memorization runs: `n` pairs of random
/// source sequences (10 to `max_src` tokens) and targets of 1 to `max_tgt`
/// tokens followed by EOS. Returns the pairs and the two vocabulary sizes.
pub fn toy_corpus(n: usize, max_src: usize, max_tgt: usize, seed: u64) -> (Vec<SeqPair>, usize, usize) {
    let (src_words, tgt_words) = (150usize, 40usize);
    let specials = 4;
    let mut rng = crate::rng::SplitMix64::new(seed);
    let pairs = (0..n)
        .map(|_| {
            let sl = 10.min(max_src) + rng.index(max_src.saturating_sub(10) + 1);
            let tl = 1 + rng.index(max_tgt.max(1));
            let src = (0..sl).map(|_| specials + rng.index(src_words)).collect();
            let mut tgt: Vec<usize> = (0..tl).map(|_| specials + rng.index(tgt_words)).collect();
            tgt.push(EOS);
            SeqPair { src, tgt }
        })
        .collect();
    (pairs, specials + src_words, specials + tgt_words)
}
