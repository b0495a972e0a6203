//! BiLSTM encoder, additive attention and LSTM decoder with hand-derived
//! gradients.
//!
//! Encoder layer `l` runs a forward and a backward LSTM over the non-PAD
//! source tokens; the top layer's concatenated states are the annotations
//! `h_j`. The decoder at step `t` attends with its previous top state `s`
//! (`e_j = v·tanh(W s + U h_j)`), feeds `[embedding(y_{t-1}); context]` to
//! its first layer and projects `[s_t; context]` to the vocabulary. Decoder
//! initial hidden states are `tanh(B_l [fwd_last; bwd_first] + b_l)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::Seq2SeqConfig;
use crate::corpus::vocab::{self, END, PAD, START};
use crate::error::{Error, Result};
use crate::numcore::ops::{
    add_acc, affine, argmax, argmax_where, dot, masked_softmax, matvec, matvec_t, matvec_t_acc,
    outer_acc, softmax_cross_entropy,
};
use crate::numcore::{Grads, LstmCell, LstmStep, ParamId, ParamStore, Tensor};
use crate::train::TokenStats;

#[derive(Clone, Debug)]
pub struct Seq2SeqModel {
    config: Seq2SeqConfig,
    params: ParamStore,
    src_embed: ParamId,
    tgt_embed: ParamId,
    enc_fwd: Vec<LstmCell>,
    enc_bwd: Vec<LstmCell>,
    bridge_w: Vec<ParamId>,
    bridge_b: Vec<ParamId>,
    dec: Vec<LstmCell>,
    att_w: ParamId,
    att_u: ParamId,
    att_v: ParamId,
    out_w: ParamId,
    out_b: ParamId,
}

/// Encoder output over the full (possibly padded) source.
#[derive(Clone, Debug, PartialEq)]
pub struct Annotations {
    /// `[T, 2·encoder_cells]`; PAD rows are zero.
    pub states: Tensor,
    /// `true` where the source token is PAD.
    pub pad_mask: Vec<bool>,
}

struct EncoderTrace {
    ids: Vec<usize>,
    /// Per layer: forward steps in time order, backward steps in reverse order.
    layers: Vec<(Vec<LstmStep>, Vec<LstmStep>)>,
    top: Vec<Vec<f64>>,
    keys: Vec<Vec<f64>>,
    summary: Vec<f64>,
}

struct AttnTrace {
    query: Vec<f64>,
    activations: Vec<Vec<f64>>,
    weights: Vec<f64>,
    context: Vec<f64>,
}

struct DecoderStep {
    input_id: usize,
    attn: AttnTrace,
    cells: Vec<LstmStep>,
    out_in: Vec<f64>,
    logits: Vec<f64>,
}

struct DecoderState {
    h: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
}

impl Seq2SeqModel {
    pub fn new(config: Seq2SeqConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ParamStore::new();
        let c = &config;
        let ann = c.annotation_dim();
        let embed = |rng: &mut ChaCha8Rng| Tensor::uniform(&[c.vocab_size, c.embed_dim], 0.1, rng);
        let src_embed = p.add("encoder.embedding", embed(&mut rng))?;
        let tgt_embed = p.add("decoder.embedding", embed(&mut rng))?;
        let mut enc_fwd = Vec::new();
        let mut enc_bwd = Vec::new();
        for l in 0..c.encoder_layers {
            let input = if l == 0 { c.embed_dim } else { ann };
            enc_fwd.push(LstmCell::register(
                &mut p,
                &format!("encoder.l{l}.fwd"),
                input,
                c.encoder_cells,
                &mut rng,
            )?);
            enc_bwd.push(LstmCell::register(
                &mut p,
                &format!("encoder.l{l}.bwd"),
                input,
                c.encoder_cells,
                &mut rng,
            )?);
        }
        let mut bridge_w = Vec::new();
        let mut bridge_b = Vec::new();
        let mut dec = Vec::new();
        for l in 0..c.decoder_layers {
            bridge_w.push(p.add(
                format!("bridge.l{l}.w"),
                Tensor::glorot(c.decoder_cells, ann, &mut rng),
            )?);
            bridge_b.push(p.add(format!("bridge.l{l}.b"), Tensor::zeros(&[c.decoder_cells]))?);
            let input = if l == 0 {
                c.embed_dim + ann
            } else {
                c.decoder_cells
            };
            dec.push(LstmCell::register(
                &mut p,
                &format!("decoder.l{l}"),
                input,
                c.decoder_cells,
                &mut rng,
            )?);
        }
        let att_w = p.add(
            "attention.w",
            Tensor::glorot(c.attention_dim, c.decoder_cells, &mut rng),
        )?;
        let att_u = p.add(
            "attention.u",
            Tensor::glorot(c.attention_dim, ann, &mut rng),
        )?;
        let v_limit = (6.0 / (c.attention_dim + 1) as f64).sqrt();
        let att_v = p.add(
            "attention.v",
            Tensor::uniform(&[c.attention_dim], v_limit, &mut rng),
        )?;
        let out_w = p.add(
            "output.w",
            Tensor::glorot(c.vocab_size, c.decoder_cells + ann, &mut rng),
        )?;
        let out_b = p.add("output.b", Tensor::zeros(&[c.vocab_size]))?;
        Ok(Seq2SeqModel {
            config,
            params: p,
            src_embed,
            tgt_embed,
            enc_fwd,
            enc_bwd,
            bridge_w,
            bridge_b,
            dec,
            att_w,
            att_u,
            att_v,
            out_w,
            out_b,
        })
    }

    pub fn config(&self) -> &Seq2SeqConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    fn check_ids(&self, ids: &[usize]) -> Result<()> {
        match ids.iter().find(|&&id| id >= self.config.vocab_size) {
            Some(&id) => Err(Error::OutOfRange {
                id,
                size: self.config.vocab_size,
            }),
            None => Ok(()),
        }
    }

    fn encode_trace(&self, source_ids: &[usize]) -> Result<EncoderTrace> {
        if source_ids.len() > self.config.max_source_len {
            return Err(Error::invalid(format!(
                "source has {} tokens, limit {}",
                source_ids.len(),
                self.config.max_source_len
            )));
        }
        self.check_ids(source_ids)?;
        let p = &self.params;
        let ids: Vec<usize> = source_ids.iter().copied().filter(|&id| id != PAD).collect();
        let n = ids.len();
        let h = self.config.encoder_cells;
        let emb = p.value(self.src_embed);
        let mut inputs: Vec<Vec<f64>> = ids.iter().map(|&id| emb.row(id).to_vec()).collect();
        let mut layers = Vec::with_capacity(self.config.encoder_layers);
        for (fwd, bwd) in self.enc_fwd.iter().zip(&self.enc_bwd) {
            let f_steps = fwd.run(p, &inputs)?;
            let rev: Vec<Vec<f64>> = inputs.iter().rev().cloned().collect();
            let b_steps = bwd.run(p, &rev)?;
            inputs = (0..n)
                .map(|j| {
                    let mut v = f_steps[j].h.clone();
                    v.extend_from_slice(&b_steps[n - 1 - j].h);
                    v
                })
                .collect();
            layers.push((f_steps, b_steps));
        }
        let top = inputs;
        let u = p.value(self.att_u);
        let keys = top.iter().map(|a| matvec(u, a)).collect();
        let mut summary = vec![0.0; 2 * h];
        if n > 0 {
            summary[..h].copy_from_slice(&top[n - 1][..h]);
            summary[h..].copy_from_slice(&top[0][h..]);
        }
        Ok(EncoderTrace {
            ids,
            layers,
            top,
            keys,
            summary,
        })
    }

    /// Bidirectional encoding of `source_ids`. PAD tokens are skipped by the
    /// recurrences and get zero rows flagged in `pad_mask`.
    pub fn encode(&self, source_ids: &[usize]) -> Result<Annotations> {
        let trace = self.encode_trace(source_ids)?;
        let dim = self.config.annotation_dim();
        let mut states = vec![0.0; source_ids.len().max(1) * dim];
        let mut k = 0;
        for (j, &id) in source_ids.iter().enumerate() {
            if id != PAD {
                states[j * dim..(j + 1) * dim].copy_from_slice(&trace.top[k]);
                k += 1;
            }
        }
        Ok(Annotations {
            states: Tensor::from_vec(&[source_ids.len().max(1), dim], states)?,
            pad_mask: source_ids.iter().map(|&id| id == PAD).collect(),
        })
    }

    fn attend_trace(
        &self,
        query: &[f64],
        keys: &[Vec<f64>],
        values: &[Vec<f64>],
        mask: &[bool],
    ) -> Result<AttnTrace> {
        let p = &self.params;
        let ws = matvec(p.value(self.att_w), query);
        let v = p.value(self.att_v).data();
        let activations: Vec<Vec<f64>> = keys
            .iter()
            .map(|k| ws.iter().zip(k).map(|(a, b)| (a + b).tanh()).collect())
            .collect();
        let scores: Vec<f64> = activations.iter().map(|a| dot(v, a)).collect();
        let allowed: Vec<bool> = mask.iter().map(|m| !m).collect();
        let weights = masked_softmax(&scores, &allowed)
            .ok_or_else(|| Error::invalid("attention over an all-PAD source"))?;
        let mut context = vec![0.0; self.config.annotation_dim()];
        for (w, val) in weights.iter().zip(values) {
            if *w != 0.0 {
                for (c, x) in context.iter_mut().zip(val) {
                    *c += w * x;
                }
            }
        }
        Ok(AttnTrace {
            query: query.to_vec(),
            activations,
            weights,
            context,
        })
    }

    /// Additive attention of `decoder_state` over `annotations`; PAD
    /// positions receive exactly zero weight.
    pub fn attend(
        &self,
        decoder_state: &[f64],
        annotations: &Annotations,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        if decoder_state.len() != self.config.decoder_cells
            || annotations.states.cols() != self.config.annotation_dim()
        {
            return Err(Error::shape(
                "attention inputs do not match the model configuration",
            ));
        }
        let values: Vec<Vec<f64>> = (0..annotations.states.rows())
            .map(|j| annotations.states.row(j).to_vec())
            .collect();
        let u = self.params.value(self.att_u);
        let keys: Vec<Vec<f64>> = values.iter().map(|a| matvec(u, a)).collect();
        let t = self.attend_trace(decoder_state, &keys, &values, &annotations.pad_mask)?;
        Ok((t.context, t.weights))
    }

    /// Gradient of attention w.r.t. its query, keys and values, with
    /// `W`/`v` gradients accumulated into `grads`.
    fn attend_backward(
        &self,
        t: &AttnTrace,
        d_context: &[f64],
        values: &[Vec<f64>],
        d_keys: &mut [Vec<f64>],
        d_values: &mut [Vec<f64>],
        grads: &mut Grads,
    ) -> Vec<f64> {
        let p = &self.params;
        let v = p.value(self.att_v).data();
        let d_w: Vec<f64> = values.iter().map(|val| dot(d_context, val)).collect();
        let mean: f64 = t.weights.iter().zip(&d_w).map(|(w, d)| w * d).sum();
        let mut d_ws = vec![0.0; self.config.attention_dim];
        for j in 0..values.len() {
            let w = t.weights[j];
            if w == 0.0 {
                continue;
            }
            for (dv, dc) in d_values[j].iter_mut().zip(d_context) {
                *dv += w * dc;
            }
            let de = w * (d_w[j] - mean);
            let a = &t.activations[j];
            let gv = grads.get_mut(self.att_v).data_mut();
            for k in 0..a.len() {
                gv[k] += de * a[k];
                let d_pre = de * v[k] * (1.0 - a[k] * a[k]);
                d_ws[k] += d_pre;
                d_keys[j][k] += d_pre;
            }
        }
        outer_acc(grads.get_mut(self.att_w), &d_ws, &t.query);
        matvec_t(p.value(self.att_w), &d_ws)
    }

    fn initial_state(&self, summary: &[f64]) -> DecoderState {
        let p = &self.params;
        let h = self
            .bridge_w
            .iter()
            .zip(&self.bridge_b)
            .map(|(w, b)| {
                affine(p.value(*w), p.value(*b), summary)
                    .into_iter()
                    .map(f64::tanh)
                    .collect()
            })
            .collect();
        let c = vec![vec![0.0; self.config.decoder_cells]; self.config.decoder_layers];
        DecoderState { h, c }
    }

    fn decoder_step(
        &self,
        enc: &EncoderTrace,
        state: &mut DecoderState,
        input_id: usize,
    ) -> Result<DecoderStep> {
        let p = &self.params;
        let mask = vec![false; enc.top.len()];
        let query = state.h.last().expect("decoder has layers").clone();
        let attn = self.attend_trace(&query, &enc.keys, &enc.top, &mask)?;
        let mut x = p.value(self.tgt_embed).row(input_id).to_vec();
        x.extend_from_slice(&attn.context);
        let mut cells = Vec::with_capacity(self.dec.len());
        for (l, cell) in self.dec.iter().enumerate() {
            let step = cell.forward(p, &x, &state.h[l], &state.c[l])?;
            state.h[l].clone_from(&step.h);
            state.c[l].clone_from(&step.c);
            x = step.h.clone();
            cells.push(step);
        }
        let mut out_in = x;
        out_in.extend_from_slice(&attn.context);
        let logits = affine(p.value(self.out_w), p.value(self.out_b), &out_in);
        Ok(DecoderStep {
            input_id,
            attn,
            cells,
            out_in,
            logits,
        })
    }

    /// Teacher-forced pass over one `(source, START … END)` pair. With
    /// `grads`, the gradient of the summed token loss is accumulated.
    pub fn example_loss(
        &self,
        source: &[usize],
        target: &[usize],
        grads: Option<&mut Grads>,
    ) -> Result<TokenStats> {
        let target: Vec<usize> = target.iter().copied().filter(|&id| id != PAD).collect();
        if target.len() < 2 || target[0] != START {
            return Err(Error::invalid(
                "target must start with START and contain a gold token",
            ));
        }
        if target.len() > self.config.max_target_len {
            return Err(Error::invalid(format!(
                "target has {} tokens, limit {}",
                target.len(),
                self.config.max_target_len
            )));
        }
        self.check_ids(&target)?;
        let enc = self.encode_trace(source)?;
        if enc.ids.is_empty() {
            return Err(Error::invalid("empty source"));
        }
        let h0 = self.initial_state(&enc.summary);
        let mut state = DecoderState {
            h: h0.h.clone(),
            c: h0.c,
        };
        let mut steps = Vec::with_capacity(target.len() - 1);
        let mut stats = TokenStats::default();
        let mut d_logits = Vec::with_capacity(target.len() - 1);
        for t in 0..target.len() - 1 {
            let step = self.decoder_step(&enc, &mut state, target[t])?;
            let (loss, dl) = softmax_cross_entropy(&step.logits, target[t + 1])?;
            stats.loss_sum += loss;
            stats.count += 1;
            if argmax(&step.logits) == target[t + 1] {
                stats.correct += 1;
            }
            d_logits.push(dl);
            steps.push(step);
        }
        if let Some(grads) = grads {
            self.backward(&enc, &h0.h, &steps, &d_logits, grads);
        }
        Ok(stats)
    }

    fn backward(
        &self,
        enc: &EncoderTrace,
        h0: &[Vec<f64>],
        steps: &[DecoderStep],
        d_logits: &[Vec<f64>],
        grads: &mut Grads,
    ) {
        let p = &self.params;
        let cfg = &self.config;
        let n = enc.top.len();
        let dec_dim = cfg.decoder_cells;
        let n_layers = self.dec.len();
        let mut carry_dh = vec![vec![0.0; dec_dim]; n_layers];
        let mut carry_dc = vec![vec![0.0; dec_dim]; n_layers];
        let mut d_query_next = vec![0.0; dec_dim];
        let mut d_keys = vec![vec![0.0; cfg.attention_dim]; n];
        let mut d_top = vec![vec![0.0; cfg.annotation_dim()]; n];

        for (step, dl) in steps.iter().zip(d_logits).rev() {
            outer_acc(grads.get_mut(self.out_w), dl, &step.out_in);
            add_acc(grads.get_mut(self.out_b).data_mut(), dl);
            let d_out_in = matvec_t(p.value(self.out_w), dl);
            let mut d_ctx = d_out_in[dec_dim..].to_vec();
            let mut d_from_above: Vec<f64> = d_out_in[..dec_dim].to_vec();
            add_acc(&mut d_from_above, &d_query_next);
            for l in (0..n_layers).rev() {
                let mut dh = carry_dh[l].clone();
                add_acc(&mut dh, &d_from_above);
                let g = self.dec[l].backward(p, &step.cells[l], &dh, &carry_dc[l], grads);
                carry_dh[l] = g.dh_prev;
                carry_dc[l] = g.dc_prev;
                d_from_above = g.dx;
            }
            let e = cfg.embed_dim;
            add_acc(
                grads.get_mut(self.tgt_embed).row_mut(step.input_id),
                &d_from_above[..e],
            );
            add_acc(&mut d_ctx, &d_from_above[e..]);
            d_query_next =
                self.attend_backward(&step.attn, &d_ctx, &enc.top, &mut d_keys, &mut d_top, grads);
        }

        // initial decoder states; the top layer's also served as the first query
        let mut d_summary = vec![0.0; cfg.annotation_dim()];
        for l in 0..n_layers {
            let mut dh = carry_dh[l].clone();
            if l == n_layers - 1 {
                add_acc(&mut dh, &d_query_next);
            }
            let d_pre: Vec<f64> = dh
                .iter()
                .zip(&h0[l])
                .map(|(d, h)| d * (1.0 - h * h))
                .collect();
            outer_acc(grads.get_mut(self.bridge_w[l]), &d_pre, &enc.summary);
            add_acc(grads.get_mut(self.bridge_b[l]).data_mut(), &d_pre);
            matvec_t_acc(p.value(self.bridge_w[l]), &d_pre, &mut d_summary);
        }
        let h = cfg.encoder_cells;
        add_acc(&mut d_top[n - 1][..h], &d_summary[..h]);
        add_acc(&mut d_top[0][h..], &d_summary[h..]);

        let u = p.value(self.att_u);
        for j in 0..n {
            outer_acc(grads.get_mut(self.att_u), &d_keys[j], &enc.top[j]);
            matvec_t_acc(u, &d_keys[j], &mut d_top[j]);
        }
        self.encoder_backward(enc, d_top, grads);
    }

    fn encoder_backward(&self, enc: &EncoderTrace, d_top: Vec<Vec<f64>>, grads: &mut Grads) {
        let p = &self.params;
        let n = enc.top.len();
        let h = self.config.encoder_cells;
        let mut d_out = d_top;
        for (l, (f_steps, b_steps)) in enc.layers.iter().enumerate().rev() {
            let d_f: Vec<Vec<f64>> = d_out.iter().map(|d| d[..h].to_vec()).collect();
            let d_b_rev: Vec<Vec<f64>> = (0..n).map(|k| d_out[n - 1 - k][h..].to_vec()).collect();
            let dx_f = self.enc_fwd[l].run_backward(p, f_steps, &d_f, grads);
            let dx_b = self.enc_bwd[l].run_backward(p, b_steps, &d_b_rev, grads);
            d_out = (0..n)
                .map(|j| {
                    let mut d = dx_f[j].clone();
                    add_acc(&mut d, &dx_b[n - 1 - j]);
                    d
                })
                .collect();
        }
        let g = grads.get_mut(self.src_embed);
        for (&id, d) in enc.ids.iter().zip(&d_out) {
            add_acc(g.row_mut(id), d);
        }
    }

    /// Parameter gradients of `d_context · attend(query, encode(source)).context`
    /// for a fixed query, through the attention block and the encoder.
    pub fn attention_gradients(
        &self,
        source_ids: &[usize],
        query: &[f64],
        d_context: &[f64],
    ) -> Result<Grads> {
        let enc = self.encode_trace(source_ids)?;
        let mask = vec![false; enc.top.len()];
        let t = self.attend_trace(query, &enc.keys, &enc.top, &mask)?;
        let mut grads = self.params.new_grads();
        let n = enc.top.len();
        let mut d_keys = vec![vec![0.0; self.config.attention_dim]; n];
        let mut d_top = vec![vec![0.0; self.config.annotation_dim()]; n];
        self.attend_backward(&t, d_context, &enc.top, &mut d_keys, &mut d_top, &mut grads);
        let u = self.params.value(self.att_u);
        for j in 0..n {
            outer_acc(grads.get_mut(self.att_u), &d_keys[j], &enc.top[j]);
            matvec_t_acc(u, &d_keys[j], &mut d_top[j]);
        }
        self.encoder_backward(&enc, d_top, &mut grads);
        Ok(grads)
    }

    /// Greedy decoding from START; stops at END or after `max_len` tokens.
    /// Only END and non-special tokens can be emitted; END is not returned.
    pub fn greedy_decode(&self, source_ids: &[usize], max_len: usize) -> Result<Vec<usize>> {
        Ok(self.greedy_decode_traced(source_ids, max_len)?.0)
    }

    /// [`Seq2SeqModel::greedy_decode`] plus the attention weights of every step.
    pub fn greedy_decode_traced(
        &self,
        source_ids: &[usize],
        max_len: usize,
    ) -> Result<(Vec<usize>, Vec<Vec<f64>>)> {
        let enc = self.encode_trace(source_ids)?;
        if enc.ids.is_empty() {
            return Ok((Vec::new(), Vec::new()));
        }
        let mut state = self.initial_state(&enc.summary);
        let mut out = Vec::new();
        let mut weights = Vec::new();
        let mut input = START;
        while out.len() < max_len {
            let step = self.decoder_step(&enc, &mut state, input)?;
            weights.push(step.attn.weights.clone());
            let next =
                argmax_where(&step.logits, |id| id == END || !vocab::is_special(id)).unwrap_or(END);
            if next == END {
                break;
            }
            out.push(next);
            input = next;
        }
        Ok((out, weights))
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
    pub(crate) fn output_bias_id(&self) -> ParamId {
        self.out_b
    }

    #[cfg(test)]
    pub(crate) fn output_weight_id(&self) -> ParamId {
        self.out_w
    }
}
