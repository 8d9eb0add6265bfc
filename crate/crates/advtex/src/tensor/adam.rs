//! Persistent optimizable parameters and the Adam update.

use crate::error::{Error, Result};

/// A parameter tensor that persists across optimization steps.
///
/// Per step it is copied onto a [`super::Graph`] as a leaf, gradients are
/// pulled back after `backward`, and [`adam_step`] applies the update.
#[derive(Debug, Clone)]
pub struct Param {
    pub data: Vec<f32>,
    pub shape: Vec<usize>,
    pub grad: Option<Vec<f32>>,
}

impl Param {
    pub fn new(data: Vec<f32>, shape: &[usize]) -> Self {
        assert_eq!(
            data.len(),
            shape.iter().product::<usize>(),
            "param data does not match shape"
        );
        Param {
            data,
            shape: shape.to_vec(),
            grad: None,
        }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::new(vec![0.0; shape.iter().product()], shape)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Adds `g` into the parameter's gradient accumulator.
    pub fn accumulate_grad(&mut self, g: &[f32]) {
        assert_eq!(g.len(), self.data.len(), "gradient length mismatch");
        match &mut self.grad {
            Some(acc) => {
                for (a, b) in acc.iter_mut().zip(g) {
                    *a += b;
                }
            }
            None => self.grad = Some(g.to_vec()),
        }
    }
}

/// Adam moment buffers plus hyperparameters for one parameter tensor.
#[derive(Debug, Clone)]
pub struct AdamState {
    first_moment: Vec<f32>,
    second_moment: Vec<f32>,
    step_count: u64,
    pub learning_rate: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub epsilon: f32,
}

impl AdamState {
    /// beta1 = 0.5 keeps batch-size-1 adversarial training stable; beta2 and
    /// epsilon are the usual defaults.
    pub fn new(learning_rate: f32, param_len: usize) -> Self {
        AdamState {
            first_moment: vec![0.0; param_len],
            second_moment: vec![0.0; param_len],
            step_count: 0,
            learning_rate,
            beta1: 0.5,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn with_betas(mut self, beta1: f32, beta2: f32) -> Self {
        self.beta1 = beta1;
        self.beta2 = beta2;
        self
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }
}

/// One Adam update with bias correction. Clears the gradient and increments
/// the step count.
pub fn adam_step(param: &mut Param, state: &mut AdamState) -> Result<()> {
    let grad = param.grad.take().ok_or_else(|| {
        Error::invalid_argument("adam_step", "parameter has no gradient populated")
    })?;
    if grad.len() != param.data.len()
        || state.first_moment.len() != param.data.len()
        || state.second_moment.len() != param.data.len()
    {
        return Err(Error::shape(
            "adam_step",
            format!(
                "param len {} vs grad {} vs moments {}/{}",
                param.data.len(),
                grad.len(),
                state.first_moment.len(),
                state.second_moment.len()
            ),
        ));
    }

    state.step_count += 1;
    let t = state.step_count as f64;
    let b1 = state.beta1 as f64;
    let b2 = state.beta2 as f64;
    let corr1 = (1.0 - b1.powf(t)) as f32;
    let corr2 = (1.0 - b2.powf(t)) as f32;

    update_kernel(
        &mut param.data,
        &grad,
        &mut state.first_moment,
        &mut state.second_moment,
        state.beta1,
        state.beta2,
        corr1,
        corr2,
        state.learning_rate,
        state.epsilon,
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn update_kernel(
    data: &mut [f32],
    grad: &[f32],
    m: &mut [f32],
    v: &mut [f32],
    beta1: f32,
    beta2: f32,
    corr1: f32,
    corr2: f32,
    lr: f32,
    eps: f32,
) {
    #[cfg(target_arch = "x86_64")]
    {
        if is_x86_feature_detected!("avx2") && is_x86_feature_detected!("fma") {
            // plain loop compiled with wide ops (vsqrtps etc.)
            #[target_feature(enable = "avx2,fma")]
            #[allow(clippy::too_many_arguments)]
            unsafe fn wide(
                data: &mut [f32],
                grad: &[f32],
                m: &mut [f32],
                v: &mut [f32],
                beta1: f32,
                beta2: f32,
                corr1: f32,
                corr2: f32,
                lr: f32,
                eps: f32,
            ) {
                for i in 0..data.len() {
                    let g = grad[i];
                    let mi = beta1 * m[i] + (1.0 - beta1) * g;
                    let vi = beta2 * v[i] + (1.0 - beta2) * g * g;
                    m[i] = mi;
                    v[i] = vi;
                    data[i] -= lr * (mi / corr1) / ((vi / corr2).sqrt() + eps);
                }
            }
            unsafe { wide(data, grad, m, v, beta1, beta2, corr1, corr2, lr, eps) };
            return;
        }
    }
    for i in 0..data.len() {
        let g = grad[i];
        let mi = beta1 * m[i] + (1.0 - beta1) * g;
        let vi = beta2 * v[i] + (1.0 - beta2) * g * g;
        m[i] = mi;
        v[i] = vi;
        data[i] -= lr * (mi / corr1) / ((vi / corr2).sqrt() + eps);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Scalar reference of the Adam recurrence.
    fn adam_reference(p0: f32, grads: &[f32], lr: f32, b1: f32, b2: f32, eps: f32) -> f32 {
        let (mut p, mut m, mut v) = (p0, 0.0f32, 0.0f32);
        for (t, &g) in grads.iter().enumerate() {
            let t = (t + 1) as f64;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let m_hat = m / (1.0 - (b1 as f64).powf(t)) as f32;
            let v_hat = v / (1.0 - (b2 as f64).powf(t)) as f32;
            p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        p
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut p = Param::new(vec![0.3, -0.7], &[2]);
        let mut s = AdamState::new(1e-3, 2);
        p.grad = Some(vec![0.0, 0.0]);
        adam_step(&mut p, &mut s).unwrap();
        assert_eq!(p.data, vec![0.3, -0.7]);
        assert_eq!(s.step_count(), 1);
        assert!(p.grad.is_none());
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // With constant gradient g, the bias-corrected first step is
        // -lr * g / (|g| + eps), magnitude ~ lr.
        let mut p = Param::new(vec![1.0], &[1]);
        let mut s = AdamState::new(1e-3, 1);
        p.grad = Some(vec![0.25]);
        adam_step(&mut p, &mut s).unwrap();
        let expected = 1.0 - 1e-3 * 0.25 / (0.25 + 1e-8);
        assert!((p.data[0] - expected).abs() < 1e-9, "{} vs {expected}", p.data[0]);
        assert!((p.data[0] - (1.0 - 1e-3)).abs() < 1e-6);
    }

    #[test]
    fn two_steps_match_scalar_recurrence() {
        let grads = [0.4f32, 0.4];
        let mut p = Param::new(vec![0.1], &[1]);
        let mut s = AdamState::new(1e-2, 1);
        for &g in &grads {
            p.grad = Some(vec![g]);
            adam_step(&mut p, &mut s).unwrap();
        }
        let expected = adam_reference(0.1, &grads, 1e-2, 0.5, 0.999, 1e-8);
        assert_eq!(p.data[0], expected);
    }

    #[test]
    fn zero_learning_rate_is_a_noop_on_parameters() {
        let mut p = Param::new(vec![0.5, 0.25, -1.0], &[3]);
        let mut s = AdamState::new(0.0, 3);
        p.grad = Some(vec![1.0, -2.0, 3.0]);
        adam_step(&mut p, &mut s).unwrap();
        assert_eq!(p.data, vec![0.5, 0.25, -1.0]);
    }

    #[test]
    fn missing_gradient_is_rejected() {
        let mut p = Param::new(vec![0.0], &[1]);
        let mut s = AdamState::new(1e-3, 1);
        assert!(adam_step(&mut p, &mut s).is_err());
    }
}
