//! Standard LSTM cell (forget gate, no peepholes) with an analytic backward
//! pass. Gate rows are stacked `[input, forget, candidate, output]`.

use rand::Rng;

use super::ops::{add_acc, matvec, matvec_t_acc, outer_acc, sigmoid};
use super::{Grads, ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct LstmCell {
    pub w_x: ParamId,
    pub w_h: ParamId,
    pub bias: ParamId,
    pub input_dim: usize,
    pub hidden_dim: usize,
}

/// Everything the backward pass needs from one forward step.
#[derive(Clone, Debug)]
pub struct LstmStep {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    tanh_c: Vec<f64>,
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

/// Gradients flowing out of one backward step.
#[derive(Clone, Debug)]
pub struct LstmStepGrad {
    pub dx: Vec<f64>,
    pub dh_prev: Vec<f64>,
    pub dc_prev: Vec<f64>,
}

impl LstmCell {
    /// Registers `{prefix}.w_x`, `{prefix}.w_h`, `{prefix}.bias`. Weights are
    /// Glorot-uniform, biases zero except the forget gate at +1.
    pub fn register<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        input_dim: usize,
        hidden_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let w_x = store.add(
            format!("{prefix}.w_x"),
            Tensor::glorot(4 * hidden_dim, input_dim, rng),
        )?;
        let w_h = store.add(
            format!("{prefix}.w_h"),
            Tensor::glorot(4 * hidden_dim, hidden_dim, rng),
        )?;
        let mut b = Tensor::zeros(&[4 * hidden_dim]);
        b.data_mut()[hidden_dim..2 * hidden_dim].fill(1.0);
        let bias = store.add(format!("{prefix}.bias"), b)?;
        Ok(LstmCell {
            w_x,
            w_h,
            bias,
            input_dim,
            hidden_dim,
        })
    }

    pub fn forward(
        &self,
        store: &ParamStore,
        x: &[f64],
        h_prev: &[f64],
        c_prev: &[f64],
    ) -> Result<LstmStep> {
        let hd = self.hidden_dim;
        if x.len() != self.input_dim || h_prev.len() != hd || c_prev.len() != hd {
            return Err(Error::shape(format!(
                "lstm cell expects x[{}], h[{hd}], c[{hd}]; got x[{}], h[{}], c[{}]",
                self.input_dim,
                x.len(),
                h_prev.len(),
                c_prev.len()
            )));
        }
        let mut z = matvec(store.value(self.w_x), x);
        add_acc(&mut z, &matvec(store.value(self.w_h), h_prev));
        add_acc(&mut z, store.value(self.bias).data());

        let i: Vec<f64> = z[..hd].iter().map(|&v| sigmoid(v)).collect();
        let f: Vec<f64> = z[hd..2 * hd].iter().map(|&v| sigmoid(v)).collect();
        let g: Vec<f64> = z[2 * hd..3 * hd].iter().map(|&v| v.tanh()).collect();
        let o: Vec<f64> = z[3 * hd..].iter().map(|&v| sigmoid(v)).collect();
        let c: Vec<f64> = (0..hd).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
        let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
        let h: Vec<f64> = (0..hd).map(|k| o[k] * tanh_c[k]).collect();
        Ok(LstmStep {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            c_prev: c_prev.to_vec(),
            i,
            f,
            g,
            o,
            tanh_c,
            h,
            c,
        })
    }

    /// Backpropagate `dh`, `dc` (gradients w.r.t. this step's outputs) and
    /// accumulate weight gradients into `grads`.
    pub fn backward(
        &self,
        store: &ParamStore,
        step: &LstmStep,
        dh: &[f64],
        dc: &[f64],
        grads: &mut Grads,
    ) -> LstmStepGrad {
        let hd = self.hidden_dim;
        let mut dz = vec![0.0; 4 * hd];
        let mut dc_prev = vec![0.0; hd];
        for k in 0..hd {
            let do_ = dh[k] * step.tanh_c[k];
            let dc_total = dc[k] + dh[k] * step.o[k] * (1.0 - step.tanh_c[k] * step.tanh_c[k]);
            let di = dc_total * step.g[k];
            let df = dc_total * step.c_prev[k];
            let dg = dc_total * step.i[k];
            dc_prev[k] = dc_total * step.f[k];
            dz[k] = di * step.i[k] * (1.0 - step.i[k]);
            dz[hd + k] = df * step.f[k] * (1.0 - step.f[k]);
            dz[2 * hd + k] = dg * (1.0 - step.g[k] * step.g[k]);
            dz[3 * hd + k] = do_ * step.o[k] * (1.0 - step.o[k]);
        }
        outer_acc(grads.get_mut(self.w_x), &dz, &step.x);
        outer_acc(grads.get_mut(self.w_h), &dz, &step.h_prev);
        add_acc(grads.get_mut(self.bias).data_mut(), &dz);

        let mut dx = vec![0.0; self.input_dim];
        matvec_t_acc(store.value(self.w_x), &dz, &mut dx);
        let mut dh_prev = vec![0.0; hd];
        matvec_t_acc(store.value(self.w_h), &dz, &mut dh_prev);
        LstmStepGrad {
            dx,
            dh_prev,
            dc_prev,
        }
    }

    /// Run over a sequence from zero state, returning every step.
    pub fn run(&self, store: &ParamStore, inputs: &[Vec<f64>]) -> Result<Vec<LstmStep>> {
        let mut h = vec![0.0; self.hidden_dim];
        let mut c = vec![0.0; self.hidden_dim];
        let mut steps = Vec::with_capacity(inputs.len());
        for x in inputs {
            let step = self.forward(store, x, &h, &c)?;
            h.clone_from(&step.h);
            c.clone_from(&step.c);
            steps.push(step);
        }
        Ok(steps)
    }

    /// Backpropagation through time for [`LstmCell::run`]. `d_outputs[t]` is
    /// the loss gradient w.r.t. `steps[t].h`; returns gradients w.r.t. inputs.
    pub fn run_backward(
        &self,
        store: &ParamStore,
        steps: &[LstmStep],
        d_outputs: &[Vec<f64>],
        grads: &mut Grads,
    ) -> Vec<Vec<f64>> {
        let hd = self.hidden_dim;
        let mut dh_next = vec![0.0; hd];
        let mut dc_next = vec![0.0; hd];
        let mut dxs = vec![Vec::new(); steps.len()];
        for t in (0..steps.len()).rev() {
            let mut dh = d_outputs[t].clone();
            add_acc(&mut dh, &dh_next);
            let g = self.backward(store, &steps[t], &dh, &dc_next, grads);
            dh_next = g.dh_prev;
            dc_next = g.dc_prev;
            dxs[t] = g.dx;
        }
        dxs
    }
}
