//! Pre-LN transformer encoder with a weight-tied LM head, forward and
//! backward by hand.
//!
//! Block: `x + Drop(Attn(LN1(x)))`, then `x + Drop(FFN(LN2(x)))` with
//! `FFN(a) = W2 gelu(W1 a + b1) + b2` (tanh GELU). PAD positions are never
//! attention keys, so they cannot influence non-PAD rows. Keys carry no
//! bias: it would shift every score of a query equally and cancel in the
//! softmax. The top state at
//! the mask position passes through a final layer norm and is scored
//! against the token embeddings plus a vocabulary bias.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::TransformerConfig;
use crate::corpus::vocab::{self, MASK, PAD, SEP};
use crate::error::{Error, Result};
use crate::numcore::ops::{
    add_acc, affine, argmax, argmax_where, dot, masked_softmax, matvec, matvec_t, matvec_t_acc,
    outer_acc, softmax_cross_entropy,
};
use crate::numcore::{Grads, ParamId, ParamStore, Tensor};
use crate::train::TokenStats;

const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

#[derive(Clone, Copy, Debug)]
struct LayerNormParams {
    gain: ParamId,
    bias: ParamId,
}

#[derive(Clone, Copy, Debug)]
struct BlockParams {
    ln1: LayerNormParams,
    q_w: ParamId,
    q_b: ParamId,
    k_w: ParamId,
    v_w: ParamId,
    v_b: ParamId,
    o_w: ParamId,
    o_b: ParamId,
    ln2: LayerNormParams,
    w1: ParamId,
    b1: ParamId,
    w2: ParamId,
    b2: ParamId,
}

#[derive(Clone, Debug)]
pub struct MaskedLmModel {
    config: TransformerConfig,
    params: ParamStore,
    tok_embed: ParamId,
    pos_embed: ParamId,
    blocks: Vec<BlockParams>,
    final_ln: LayerNormParams,
    lm_bias: ParamId,
}

struct LnCache {
    xhat: Vec<f64>,
    inv_std: f64,
}

type Rows = Vec<Vec<f64>>;

struct BlockTrace {
    ln1: Vec<LnCache>,
    a: Rows,
    q: Rows,
    k: Rows,
    v: Rows,
    /// `[head][query][key]`, zero on PAD keys.
    probs: Vec<Rows>,
    cat: Rows,
    drop_attn: Option<Rows>,
    ln2: Vec<LnCache>,
    b: Rows,
    pre: Rows,
    act: Rows,
    drop_ffn: Option<Rows>,
}

struct EncodeTrace {
    ids: Vec<usize>,
    drop_embed: Option<Rows>,
    blocks: Vec<BlockTrace>,
    out: Rows,
}

struct ForwardTrace {
    enc: EncodeTrace,
    mask_position: usize,
    final_ln: LnCache,
    h: Vec<f64>,
    logits: Vec<f64>,
}

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + 0.044715 * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}

fn layer_norm(x: &[f64], gain: &[f64], bias: &[f64]) -> (Vec<f64>, LnCache) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let inv_std = 1.0 / (var + LN_EPS).sqrt();
    let xhat: Vec<f64> = x.iter().map(|v| (v - mean) * inv_std).collect();
    let y = xhat
        .iter()
        .zip(gain)
        .zip(bias)
        .map(|((xh, g), b)| xh * g + b)
        .collect();
    (y, LnCache { xhat, inv_std })
}

fn dropout_mask(rng: &mut ChaCha8Rng, rows: usize, cols: usize, rate: f64) -> Rows {
    let keep = 1.0 / (1.0 - rate);
    (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
                .collect()
        })
        .collect()
}

fn apply_mask(rows: &mut Rows, mask: &Option<Rows>) {
    if let Some(m) = mask {
        for (r, mr) in rows.iter_mut().zip(m) {
            r.iter_mut().zip(mr).for_each(|(v, k)| *v *= k);
        }
    }
}

fn is_zero(v: &[f64]) -> bool {
    v.iter().all(|&x| x == 0.0)
}

impl MaskedLmModel {
    pub fn new(config: TransformerConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let (v, h, f) = (config.vocab_size, config.hidden, config.ffn_dim);
        let tok_embed = params.add("embed.tokens", Tensor::uniform(&[v, h], 0.1, &mut rng))?;
        let pos_embed = params.add(
            "embed.positions",
            Tensor::uniform(&[config.max_len, h], 0.1, &mut rng),
        )?;
        let layer_norm_params =
            |params: &mut ParamStore, prefix: &str| -> Result<LayerNormParams> {
                let mut gain = Tensor::zeros(&[h]);
                gain.fill(1.0);
                Ok(LayerNormParams {
                    gain: params.add(format!("{prefix}.gain"), gain)?,
                    bias: params.add(format!("{prefix}.bias"), Tensor::zeros(&[h]))?,
                })
            };
        let mut blocks = Vec::with_capacity(config.layers);
        for l in 0..config.layers {
            let p = format!("layer{l}");
            let ln1 = layer_norm_params(&mut params, &format!("{p}.ln1"))?;
            let q_w = params.add(format!("{p}.attn.q.w"), Tensor::glorot(h, h, &mut rng))?;
            let q_b = params.add(format!("{p}.attn.q.b"), Tensor::zeros(&[h]))?;
            let k_w = params.add(format!("{p}.attn.k.w"), Tensor::glorot(h, h, &mut rng))?;
            let v_w = params.add(format!("{p}.attn.v.w"), Tensor::glorot(h, h, &mut rng))?;
            let v_b = params.add(format!("{p}.attn.v.b"), Tensor::zeros(&[h]))?;
            let o_w = params.add(format!("{p}.attn.o.w"), Tensor::glorot(h, h, &mut rng))?;
            let o_b = params.add(format!("{p}.attn.o.b"), Tensor::zeros(&[h]))?;
            let ln2 = layer_norm_params(&mut params, &format!("{p}.ln2"))?;
            let w1 = params.add(format!("{p}.ffn.w1"), Tensor::glorot(f, h, &mut rng))?;
            let b1 = params.add(format!("{p}.ffn.b1"), Tensor::zeros(&[f]))?;
            let w2 = params.add(format!("{p}.ffn.w2"), Tensor::glorot(h, f, &mut rng))?;
            let b2 = params.add(format!("{p}.ffn.b2"), Tensor::zeros(&[h]))?;
            blocks.push(BlockParams {
                ln1,
                q_w,
                q_b,
                k_w,
                v_w,
                v_b,
                o_w,
                o_b,
                ln2,
                w1,
                b1,
                w2,
                b2,
            });
        }
        let final_ln = layer_norm_params(&mut params, "final_ln")?;
        let lm_bias = params.add("lm_head.bias", Tensor::zeros(&[v]))?;
        Ok(MaskedLmModel {
            config,
            params,
            tok_embed,
            pos_embed,
            blocks,
            final_ln,
            lm_bias,
        })
    }

    pub fn config(&self) -> &TransformerConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    fn check_ids(&self, ids: &[usize]) -> Result<()> {
        if ids.is_empty() {
            return Err(Error::invalid("empty context"));
        }
        if ids.len() > self.config.max_len {
            return Err(Error::invalid(format!(
                "context has {} tokens, maximum is {}",
                ids.len(),
                self.config.max_len
            )));
        }
        if let Some(&id) = ids.iter().find(|&&id| id >= self.config.vocab_size) {
            return Err(Error::OutOfRange {
                id,
                size: self.config.vocab_size,
            });
        }
        if ids.iter().all(|&id| id == PAD) {
            return Err(Error::invalid("context is all PAD"));
        }
        Ok(())
    }

    fn noise_rng(&self, noise_seed: Option<u64>) -> Option<ChaCha8Rng> {
        match noise_seed {
            Some(seed) if self.config.dropout > 0.0 => Some(ChaCha8Rng::seed_from_u64(seed)),
            _ => None,
        }
    }

    fn ln_forward(&self, ln: LayerNormParams, x: &[f64]) -> (Vec<f64>, LnCache) {
        layer_norm(
            x,
            self.params.value(ln.gain).data(),
            self.params.value(ln.bias).data(),
        )
    }

    /// Adds `∂/∂x` into `dx` and the gain/bias gradients into `grads`.
    fn ln_backward(
        &self,
        ln: LayerNormParams,
        cache: &LnCache,
        dy: &[f64],
        grads: &mut Grads,
        dx: &mut [f64],
    ) {
        let gain = self.params.value(ln.gain).data();
        let dgain = grads.get_mut(ln.gain).data_mut();
        for ((g, d), xh) in dgain.iter_mut().zip(dy).zip(&cache.xhat) {
            *g += d * xh;
        }
        add_acc(grads.get_mut(ln.bias).data_mut(), dy);
        let n = dy.len() as f64;
        let dxhat: Vec<f64> = dy.iter().zip(gain).map(|(d, g)| d * g).collect();
        let mean_d = dxhat.iter().sum::<f64>() / n;
        let mean_dx = dot(&dxhat, &cache.xhat) / n;
        for ((o, d), xh) in dx.iter_mut().zip(&dxhat).zip(&cache.xhat) {
            *o += cache.inv_std * (d - mean_d - xh * mean_dx);
        }
    }

    fn block_forward(
        &self,
        bp: &BlockParams,
        x: &[Vec<f64>],
        allowed: &[bool],
        rng: &mut Option<ChaCha8Rng>,
    ) -> Result<(Rows, BlockTrace)> {
        let p = &self.params;
        let t = x.len();
        let (heads, dh) = (self.config.heads, self.config.head_dim());
        let scale = 1.0 / (dh as f64).sqrt();
        let (a, ln1): (Rows, Vec<LnCache>) = x.iter().map(|r| self.ln_forward(bp.ln1, r)).unzip();
        let q: Rows = a
            .iter()
            .map(|r| affine(p.value(bp.q_w), p.value(bp.q_b), r))
            .collect();
        let k: Rows = a.iter().map(|r| matvec(p.value(bp.k_w), r)).collect();
        let v: Rows = a
            .iter()
            .map(|r| affine(p.value(bp.v_w), p.value(bp.v_b), r))
            .collect();
        let mut probs = Vec::with_capacity(heads);
        let mut cat = vec![vec![0.0; self.config.hidden]; t];
        for hd in 0..heads {
            let r = hd * dh..(hd + 1) * dh;
            let mut head_probs = Vec::with_capacity(t);
            for i in 0..t {
                let scores: Vec<f64> = (0..t)
                    .map(|j| scale * dot(&q[i][r.clone()], &k[j][r.clone()]))
                    .collect();
                let w = masked_softmax(&scores, allowed)
                    .ok_or_else(|| Error::invalid("no attendable positions"))?;
                for (j, &pj) in w.iter().enumerate() {
                    if pj != 0.0 {
                        for (c, vv) in cat[i][r.clone()].iter_mut().zip(&v[j][r.clone()]) {
                            *c += pj * vv;
                        }
                    }
                }
                head_probs.push(w);
            }
            probs.push(head_probs);
        }
        let mut y: Rows = cat
            .iter()
            .map(|r| affine(p.value(bp.o_w), p.value(bp.o_b), r))
            .collect();
        let drop_attn = rng
            .as_mut()
            .map(|g| dropout_mask(g, t, self.config.hidden, self.config.dropout));
        apply_mask(&mut y, &drop_attn);
        let mid: Rows = x
            .iter()
            .zip(&y)
            .map(|(xi, yi)| xi.iter().zip(yi).map(|(a, b)| a + b).collect())
            .collect();
        let (b, ln2): (Rows, Vec<LnCache>) = mid.iter().map(|r| self.ln_forward(bp.ln2, r)).unzip();
        let pre: Rows = b
            .iter()
            .map(|r| affine(p.value(bp.w1), p.value(bp.b1), r))
            .collect();
        let act: Rows = pre
            .iter()
            .map(|r| r.iter().map(|&z| gelu(z)).collect())
            .collect();
        let mut f: Rows = act
            .iter()
            .map(|r| affine(p.value(bp.w2), p.value(bp.b2), r))
            .collect();
        let drop_ffn = rng
            .as_mut()
            .map(|g| dropout_mask(g, t, self.config.hidden, self.config.dropout));
        apply_mask(&mut f, &drop_ffn);
        let out = mid
            .iter()
            .zip(&f)
            .map(|(m, fi)| m.iter().zip(fi).map(|(a, b)| a + b).collect())
            .collect();
        Ok((
            out,
            BlockTrace {
                ln1,
                a,
                q,
                k,
                v,
                probs,
                cat,
                drop_attn,
                ln2,
                b,
                pre,
                act,
                drop_ffn,
            },
        ))
    }

    fn block_backward(
        &self,
        bp: &BlockParams,
        tr: &BlockTrace,
        dout: &[Vec<f64>],
        grads: &mut Grads,
    ) -> Rows {
        let p = &self.params;
        let t = dout.len();
        let hidden = self.config.hidden;
        let (heads, dh) = (self.config.heads, self.config.head_dim());
        let scale = 1.0 / (dh as f64).sqrt();

        let mut dmid = dout.to_vec();
        for i in 0..t {
            let mut df = dout[i].clone();
            if let Some(m) = &tr.drop_ffn {
                df.iter_mut().zip(&m[i]).for_each(|(d, k)| *d *= k);
            }
            if is_zero(&df) {
                continue;
            }
            outer_acc(grads.get_mut(bp.w2), &df, &tr.act[i]);
            add_acc(grads.get_mut(bp.b2).data_mut(), &df);
            let dact = matvec_t(p.value(bp.w2), &df);
            let dpre: Vec<f64> = dact
                .iter()
                .zip(&tr.pre[i])
                .map(|(d, &z)| d * gelu_grad(z))
                .collect();
            outer_acc(grads.get_mut(bp.w1), &dpre, &tr.b[i]);
            add_acc(grads.get_mut(bp.b1).data_mut(), &dpre);
            let db = matvec_t(p.value(bp.w1), &dpre);
            self.ln_backward(bp.ln2, &tr.ln2[i], &db, grads, &mut dmid[i]);
        }

        let mut dx = dmid.clone();
        let mut dq = vec![vec![0.0; hidden]; t];
        let mut dk = vec![vec![0.0; hidden]; t];
        let mut dv = vec![vec![0.0; hidden]; t];
        for i in 0..t {
            let mut dy = dmid[i].clone();
            if let Some(m) = &tr.drop_attn {
                dy.iter_mut().zip(&m[i]).for_each(|(d, k)| *d *= k);
            }
            if is_zero(&dy) {
                continue;
            }
            outer_acc(grads.get_mut(bp.o_w), &dy, &tr.cat[i]);
            add_acc(grads.get_mut(bp.o_b).data_mut(), &dy);
            let dcat = matvec_t(p.value(bp.o_w), &dy);
            for hd in 0..heads {
                let r = hd * dh..(hd + 1) * dh;
                let w = &tr.probs[hd][i];
                let dc = &dcat[r.clone()];
                let dp: Vec<f64> = (0..t)
                    .map(|j| {
                        if w[j] == 0.0 {
                            0.0
                        } else {
                            dot(dc, &tr.v[j][r.clone()])
                        }
                    })
                    .collect();
                let avg = dot(w, &dp);
                for j in 0..t {
                    if w[j] == 0.0 {
                        continue;
                    }
                    for (d, c) in dv[j][r.clone()].iter_mut().zip(dc) {
                        *d += w[j] * c;
                    }
                    let ds = w[j] * (dp[j] - avg) * scale;
                    for (d, kk) in dq[i][r.clone()].iter_mut().zip(&tr.k[j][r.clone()]) {
                        *d += ds * kk;
                    }
                    for (d, qq) in dk[j][r.clone()].iter_mut().zip(&tr.q[i][r.clone()]) {
                        *d += ds * qq;
                    }
                }
            }
        }
        for j in 0..t {
            if is_zero(&dq[j]) && is_zero(&dk[j]) && is_zero(&dv[j]) {
                continue;
            }
            let mut da = vec![0.0; hidden];
            for (w_id, b_id, d) in [
                (bp.q_w, Some(bp.q_b), &dq[j]),
                (bp.k_w, None, &dk[j]),
                (bp.v_w, Some(bp.v_b), &dv[j]),
            ] {
                outer_acc(grads.get_mut(w_id), d, &tr.a[j]);
                if let Some(b_id) = b_id {
                    add_acc(grads.get_mut(b_id).data_mut(), d);
                }
                matvec_t_acc(p.value(w_id), d, &mut da);
            }
            self.ln_backward(bp.ln1, &tr.ln1[j], &da, grads, &mut dx[j]);
        }
        dx
    }

    fn encode(&self, ids: &[usize], noise_seed: Option<u64>) -> Result<EncodeTrace> {
        self.check_ids(ids)?;
        let mut rng = self.noise_rng(noise_seed);
        let emb = self.params.value(self.tok_embed);
        let pos = self.params.value(self.pos_embed);
        let mut x: Rows = ids
            .iter()
            .enumerate()
            .map(|(t, &id)| {
                emb.row(id)
                    .iter()
                    .zip(pos.row(t))
                    .map(|(a, b)| a + b)
                    .collect()
            })
            .collect();
        let drop_embed = rng
            .as_mut()
            .map(|g| dropout_mask(g, ids.len(), self.config.hidden, self.config.dropout));
        apply_mask(&mut x, &drop_embed);
        let allowed: Vec<bool> = ids.iter().map(|&id| id != PAD).collect();
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for bp in &self.blocks {
            let (next, tr) = self.block_forward(bp, &x, &allowed, &mut rng)?;
            blocks.push(tr);
            x = next;
        }
        Ok(EncodeTrace {
            ids: ids.to_vec(),
            drop_embed,
            blocks,
            out: x,
        })
    }

    fn forward(
        &self,
        ids: &[usize],
        mask_position: usize,
        noise_seed: Option<u64>,
    ) -> Result<ForwardTrace> {
        if mask_position >= ids.len() {
            return Err(Error::invalid(format!(
                "mask position {mask_position} outside context of length {}",
                ids.len()
            )));
        }
        if ids[mask_position] != MASK {
            return Err(Error::invalid(format!(
                "no [MASK] token at position {mask_position}"
            )));
        }
        let enc = self.encode(ids, noise_seed)?;
        let (h, final_ln) = self.ln_forward(self.final_ln, &enc.out[mask_position]);
        let mut logits = matvec(self.params.value(self.tok_embed), &h);
        add_acc(&mut logits, self.params.value(self.lm_bias).data());
        Ok(ForwardTrace {
            enc,
            mask_position,
            final_ln,
            h,
            logits,
        })
    }

    fn backward(&self, tr: &ForwardTrace, dlogits: &[f64], grads: &mut Grads) {
        let hidden = self.config.hidden;
        outer_acc(grads.get_mut(self.tok_embed), dlogits, &tr.h);
        add_acc(grads.get_mut(self.lm_bias).data_mut(), dlogits);
        let dh = matvec_t(self.params.value(self.tok_embed), dlogits);
        let t = tr.enc.ids.len();
        let mut dx = vec![vec![0.0; hidden]; t];
        self.ln_backward(
            self.final_ln,
            &tr.final_ln,
            &dh,
            grads,
            &mut dx[tr.mask_position],
        );
        self.encode_backward(&tr.enc, dx, grads);
    }

    fn encode_backward(&self, enc: &EncodeTrace, mut dx: Rows, grads: &mut Grads) {
        for (bp, bt) in self.blocks.iter().zip(&enc.blocks).rev() {
            dx = self.block_backward(bp, bt, &dx, grads);
        }
        apply_mask(&mut dx, &enc.drop_embed);
        for (t, (&id, d)) in enc.ids.iter().zip(&dx).enumerate() {
            add_acc(grads.get_mut(self.tok_embed).row_mut(id), d);
            add_acc(grads.get_mut(self.pos_embed).row_mut(t), d);
        }
    }

    /// LM-head logits at `mask_position` (no dropout).
    pub fn forward_mask_logits(&self, context: &[usize], mask_position: usize) -> Result<Vec<f64>> {
        Ok(self.forward(context, mask_position, None)?.logits)
    }

    /// Self-attention probabilities of every layer and head, each a
    /// `[T, T]` tensor whose rows sum to one with zero mass on PAD keys.
    pub fn self_attention(&self, context: &[usize]) -> Result<Vec<Vec<Tensor>>> {
        let enc = self.encode(context, None)?;
        let t = context.len();
        enc.blocks
            .into_iter()
            .map(|b| {
                b.probs
                    .into_iter()
                    .map(|rows| Tensor::from_vec(&[t, t], rows.into_iter().flatten().collect()))
                    .collect()
            })
            .collect()
    }

    /// Cross entropy of `target` at the mask. With `grads`, the gradient is
    /// added in. `noise_seed` enables dropout when the config has any.
    pub fn example_loss(
        &self,
        context: &[usize],
        mask_position: usize,
        target: usize,
        noise_seed: Option<u64>,
        grads: Option<&mut Grads>,
    ) -> Result<TokenStats> {
        let tr = self.forward(context, mask_position, noise_seed)?;
        let (loss, dlogits) = softmax_cross_entropy(&tr.logits, target)?;
        if let Some(g) = grads {
            self.backward(&tr, &dlogits, g);
        }
        Ok(TokenStats {
            loss_sum: loss,
            correct: usize::from(argmax(&tr.logits) == target),
            count: 1,
        })
    }

    /// Greedy choice at the mask among ordinary tokens and SEP.
    pub fn predict_mask(&self, context: &[usize], mask_position: usize) -> Result<usize> {
        let logits = self.forward_mask_logits(context, mask_position)?;
        Ok(argmax_where(&logits, |id| id == SEP || !vocab::is_special(id)).unwrap_or(SEP))
    }

    /// `Σ probe ⊙ block_layer(inputs)` with keys restricted to `allowed`.
    /// With `grads`, adds the block's parameter gradients and returns the
    /// input gradient as well. Diagnostic entry point for gradient checks.
    pub fn block_probe(
        &self,
        layer: usize,
        inputs: &[Vec<f64>],
        allowed: &[bool],
        probe: &[Vec<f64>],
        grads: Option<&mut Grads>,
    ) -> Result<(f64, Option<Rows>)> {
        let bp = self
            .blocks
            .get(layer)
            .ok_or_else(|| Error::invalid(format!("no layer {layer}")))?;
        if inputs.len() != allowed.len() || inputs.len() != probe.len() {
            return Err(Error::shape(
                "block_probe: inputs, mask and probe lengths differ",
            ));
        }
        if inputs
            .iter()
            .chain(probe)
            .any(|r| r.len() != self.config.hidden)
        {
            return Err(Error::shape(
                "block_probe: row width differs from hidden size",
            ));
        }
        let (out, tr) = self.block_forward(bp, inputs, allowed, &mut None)?;
        let value = out.iter().zip(probe).map(|(o, p)| dot(o, p)).sum();
        let dx = grads.map(|g| self.block_backward(bp, &tr, probe, g));
        Ok((value, dx))
    }

    /// Random perturbation of every parameter; test helper for moving away
    /// from the structured initialization.
    pub fn jitter(&mut self, scale: f64, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in self.params.iter_mut() {
            for v in p.value.data_mut() {
                *v += rng.gen_range(-scale..=scale);
            }
        }
    }

    #[cfg(test)]
    pub(crate) fn lm_bias_id(&self) -> ParamId {
        self.lm_bias
    }

    #[cfg(test)]
    pub(crate) fn token_embedding_id(&self) -> ParamId {
        self.tok_embed
    }
}
