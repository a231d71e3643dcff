use serde::{Deserialize, Serialize};

use crate::error::{HyveError, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction. Moment buffers are created on the first step.
#[derive(Clone, Debug)]
pub struct Adam {
    params: AdamParams,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(params: AdamParams) -> Self {
        Adam {
            params,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Updates `params[i]` with learning rate `lrs[i]`; a rate of `None`
    /// leaves the tensor and its moments untouched.
    pub fn step(
        &mut self,
        params: &mut [&mut Tensor],
        grads: &[&Tensor],
        lrs: &[Option<f64>],
    ) -> Result<()> {
        if params.len() != grads.len() || params.len() != lrs.len() {
            return Err(HyveError::Dimension(format!(
                "adam: {} params, {} grads, {} rates",
                params.len(),
                grads.len(),
                lrs.len()
            )));
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.numel()]).collect();
            self.v = self.m.clone();
        }
        if self.m.len() != params.len() {
            return Err(HyveError::Dimension(
                "adam: parameter list changed between steps".into(),
            ));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() || self.m[i].len() != p.numel() {
                return Err(HyveError::Dimension(format!(
                    "adam: parameter {i} {:?} vs gradient {:?}",
                    p.shape(),
                    g.shape()
                )));
            }
        }
        self.t += 1;
        let AdamParams { beta1, beta2, eps } = self.params;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        for (i, p) in params.iter_mut().enumerate() {
            let Some(lr) = lrs[i] else { continue };
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for ((w, &g), (mi, vi)) in p
                .data_mut()
                .iter_mut()
                .zip(grads[i].data())
                .zip(m.iter_mut().zip(v.iter_mut()))
            {
                *mi = beta1 * *mi + (1.0 - beta1) * g;
                *vi = beta2 * *vi + (1.0 - beta2) * g * g;
                *w -= lr * (*mi / c1) / ((*vi / c2).sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_keeps_parameters() {
        let mut p = Tensor::new(vec![3], vec![1.0, -2.0, 0.5]).unwrap();
        let before = p.clone();
        let g = Tensor::zeros(&[3]);
        let mut adam = Adam::new(AdamParams::default());
        for _ in 0..5 {
            adam.step(&mut [&mut p], &[&g], &[Some(1e-3)]).unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn constant_gradient_steps_approach_learning_rate() {
        let mut p = Tensor::scalar(0.0);
        let g = Tensor::scalar(0.37);
        let mut adam = Adam::new(AdamParams::default());
        let mut prev = 0.0;
        for step in 1..=200 {
            adam.step(&mut [&mut p], &[&g], &[Some(1e-3)]).unwrap();
            let now = p.data()[0];
            // m̂ = g and v̂ = g² exactly, so each step is lr·g/(|g|+ε).
            let expected = 1e-3 * 0.37 / (0.37 + 1e-8);
            assert!(((prev - now) - expected).abs() < 1e-15, "step {step}");
            prev = now;
        }
    }

    #[test]
    fn frozen_entries_are_untouched() {
        let mut a = Tensor::scalar(1.0);
        let mut b = Tensor::scalar(1.0);
        let g = Tensor::scalar(1.0);
        let mut adam = Adam::new(AdamParams::default());
        adam.step(&mut [&mut a, &mut b], &[&g, &g], &[None, Some(0.1)])
            .unwrap();
        assert_eq!(a.data()[0], 1.0);
        assert!(b.data()[0] < 1.0);
    }
}
