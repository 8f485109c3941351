use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::NnError;
use crate::error::ContractError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub params: Vec<f64>,
}

/// Activations of every layer for one batch; `acts[0]` is the input.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub acts: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.acts.last().expect("at least the input")
    }
}

impl Mlp {
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2 && sizes.iter().all(|&s| s > 0));
        let n = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        Self {
            sizes: sizes.to_vec(),
            params: vec![0.0; n],
        }
    }

    /// Xavier-uniform weights, zero biases.
    pub fn xavier(sizes: &[usize], rng: &mut impl Rng) -> Self {
        let mut m = Self::zeros(sizes);
        for l in 0..m.layers() {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let (w, _) = m.layer_ranges(l);
            for p in &mut m.params[w] {
                *p = rng.random_range(-a..a);
            }
        }
        m
    }

    pub fn layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("sizes nonempty")
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// Index ranges of layer `l`'s weights and biases within `params`.
    pub fn layer_ranges(&self, l: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let off: usize = self.sizes[..=l]
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum();
        let (i, o) = (self.sizes[l], self.sizes[l + 1]);
        (off..off + i * o, off + i * o..off + i * o + o)
    }

    pub fn zero_layer(&mut self, l: usize) {
        let (w, b) = self.layer_ranges(l);
        self.params[w].fill(0.0);
        self.params[b].fill(0.0);
    }

    pub fn weights(&self, l: usize) -> ArrayView2<'_, f64> {
        let (w, _) = self.layer_ranges(l);
        ArrayView2::from_shape((self.sizes[l + 1], self.sizes[l]), &self.params[w])
            .expect("layer shape")
    }

    pub fn bias(&self, l: usize) -> ArrayView1<'_, f64> {
        let (_, b) = self.layer_ranges(l);
        ArrayView1::from(&self.params[b])
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<(), ContractError> {
        if x.ncols() != self.input_dim() {
            return Err(ContractError::new(format!(
                "input dimension mismatch: expected {}, got {}",
                self.input_dim(),
                x.ncols()
            )));
        }
        Ok(())
    }

    fn layer_forward(&self, l: usize, x: ArrayView2<f64>) -> Result<Array2<f64>, NnError> {
        let mut z = x.dot(&self.weights(l).t());
        z += &self.bias(l);
        if l + 1 < self.layers() {
            z.mapv_inplace(f64::tanh);
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(NnError::NonFinite { layer: l });
        }
        Ok(z)
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>, NnError> {
        self.check_input(&x)?;
        let mut h = self.layer_forward(0, x)?;
        for l in 1..self.layers() {
            h = self.layer_forward(l, h.view())?;
        }
        Ok(h)
    }

    pub fn forward_cached(&self, x: ArrayView2<f64>) -> Result<ForwardCache, NnError> {
        self.check_input(&x)?;
        let mut acts = Vec::with_capacity(self.sizes.len());
        acts.push(x.to_owned());
        for l in 0..self.layers() {
            let h = self.layer_forward(l, acts[l].view())?;
            acts.push(h);
        }
        Ok(ForwardCache { acts })
    }

    /// Reverse pass for a loss whose gradient with respect to the network
    /// output is `dout`. Any batch reduction is already folded into `dout`.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        dout: ArrayView2<f64>,
    ) -> Result<Vec<f64>, NnError> {
        let mut grads = vec![0.0; self.params.len()];
        self.backward_into(cache, dout, &mut grads)?;
        Ok(grads)
    }

    /// Like [`Mlp::backward`] but accumulates into `grads`.
    pub fn backward_into(
        &self,
        cache: &ForwardCache,
        dout: ArrayView2<f64>,
        grads: &mut [f64],
    ) -> Result<(), NnError> {
        let out = cache.output();
        if dout.dim() != out.dim() || grads.len() != self.params.len() {
            return Err(ContractError::new(format!(
                "gradient shape mismatch: expected {:?}, got {:?}",
                out.dim(),
                dout.dim()
            ))
            .into());
        }
        let mut delta = dout.to_owned();
        for l in (0..self.layers()).rev() {
            if delta.iter().any(|v| !v.is_finite()) {
                return Err(NnError::NonFinite { layer: l });
            }
            let input = &cache.acts[l];
            let gw = delta.t().dot(input);
            let gb = delta.sum_axis(Axis(0));
            let (wr, br) = self.layer_ranges(l);
            for (g, v) in grads[wr].iter_mut().zip(gw.iter()) {
                *g += v;
            }
            for (g, v) in grads[br].iter_mut().zip(gb.iter()) {
                *g += v;
            }
            if l > 0 {
                let mut prev = delta.dot(&self.weights(l));
                ndarray::Zip::from(&mut prev)
                    .and(input)
                    .for_each(|d, &h| *d *= 1.0 - h * h);
                delta = prev;
            }
        }
        Ok(())
    }
}
