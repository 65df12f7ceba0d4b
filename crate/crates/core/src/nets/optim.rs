use alloc::vec::Vec;

use crate::config::{ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON, SGD_MOMENTUM};
use crate::error::Result;
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OptimizerKind {
    #[default]
    Adam,
    SgdMomentum,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            epsilon: ADAM_EPSILON,
        }
    }
}

/// `v = momentum * v + g; p -= lr * v`.
pub fn sgd_momentum_step(
    param: &mut Matrix,
    grad: &Matrix,
    velocity: &mut Matrix,
    lr: f64,
    momentum: f64,
) -> Result<()> {
    param.same_shape(grad, "sgd_momentum_step")?;
    velocity.same_shape(grad, "sgd_momentum_step")?;
    for ((p, &g), v) in param
        .as_mut_slice()
        .iter_mut()
        .zip(grad.as_slice())
        .zip(velocity.as_mut_slice())
    {
        *v = momentum * *v + g;
        *p -= lr * *v;
    }
    Ok(())
}

/// Bias-corrected Adam update; `t` is the 1-based step count.
pub fn adam_step(
    param: &mut Matrix,
    grad: &Matrix,
    m: &mut Matrix,
    v: &mut Matrix,
    t: u64,
    lr: f64,
    cfg: &AdamConfig,
) -> Result<()> {
    param.same_shape(grad, "adam_step")?;
    m.same_shape(grad, "adam_step")?;
    v.same_shape(grad, "adam_step")?;
    let c1 = 1.0 - libm::pow(cfg.beta1, t as f64);
    let c2 = 1.0 - libm::pow(cfg.beta2, t as f64);
    let iter = param
        .as_mut_slice()
        .iter_mut()
        .zip(grad.as_slice())
        .zip(m.as_mut_slice().iter_mut().zip(v.as_mut_slice()));
    for ((p, &g), (m, v)) in iter {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (libm::sqrt(v_hat) + cfg.epsilon);
    }
    Ok(())
}

/// Per-parameter optimizer state, created lazily on the first step.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub adam: AdamConfig,
    pub momentum: f64,
    step: u64,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Self {
        Self {
            kind,
            learning_rate,
            adam: AdamConfig::default(),
            momentum: SGD_MOMENTUM,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Update `params` in place. Parameters with no gradient (not reachable
    /// from the loss) are left untouched and their state is not advanced.
    pub fn step(&mut self, params: &mut [&mut Matrix], grads: &[Option<Matrix>]) -> Result<()> {
        if self.first.is_empty() {
            self.first = params
                .iter()
                .map(|p| Matrix::zeros(p.rows(), p.cols()))
                .collect();
            self.second = self.first.clone();
        }
        self.step += 1;
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let Some(g) = g else { continue };
            match self.kind {
                OptimizerKind::SgdMomentum => {
                    sgd_momentum_step(p, g, &mut self.first[i], self.learning_rate, self.momentum)?
                }
                OptimizerKind::Adam => adam_step(
                    p,
                    g,
                    &mut self.first[i],
                    &mut self.second[i],
                    self.step,
                    self.learning_rate,
                    &self.adam,
                )?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_sgd_step_is_plain_gradient_step() {
        let mut p = Matrix::row_vector(&[1.0, -2.0]);
        let g = Matrix::row_vector(&[0.5, 0.25]);
        let mut v = Matrix::zeros(1, 2);
        sgd_momentum_step(&mut p, &g, &mut v, 0.1, 0.9).unwrap();
        assert_eq!(p.as_slice(), &[1.0 - 0.1 * 0.5, -2.0 - 0.1 * 0.25]);
    }

    #[test]
    fn zero_gradient_from_fresh_state_is_a_no_op() {
        // with zero moments a zero gradient is a no-op for both rules
        let mut p = Matrix::row_vector(&[0.3, 0.7]);
        let before = p.clone();
        let zero = Matrix::zeros(1, 2);
        let mut opt = Optimizer::new(OptimizerKind::Adam, 1e-3);
        for _ in 0..3 {
            opt.step(&mut [&mut p], &[Some(zero.clone())]).unwrap();
        }
        assert_eq!(p, before);
        let mut opt = Optimizer::new(OptimizerKind::SgdMomentum, 1e-3);
        opt.step(&mut [&mut p], &[Some(zero.clone())]).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn adam_single_step_by_hand() {
        // p = (1, -1), g = (0.2, -0.4), lr = 0.01, t = 1
        let mut p = Matrix::row_vector(&[1.0, -1.0]);
        let g = Matrix::row_vector(&[0.2, -0.4]);
        let (mut m, mut v) = (Matrix::zeros(1, 2), Matrix::zeros(1, 2));
        adam_step(&mut p, &g, &mut m, &mut v, 1, 0.01, &AdamConfig::default()).unwrap();
        // m = 0.1 g, v = 0.001 g^2; m_hat = g, v_hat = g^2
        let expect = |p0: f64, g: f64| p0 - 0.01 * g / (libm::fabs(g) + 1e-8);
        assert!((p[(0, 0)] - expect(1.0, 0.2)).abs() < 1e-15);
        assert!((p[(0, 1)] - expect(-1.0, -0.4)).abs() < 1e-15);
        assert!((m[(0, 0)] - 0.02).abs() < 1e-15);
        assert!((v[(0, 1)] - 0.001 * 0.16).abs() < 1e-18);
    }

    #[test]
    fn adam_two_steps_by_hand() {
        let mut p = Matrix::row_vector(&[0.5, 0.5]);
        let (mut m, mut v) = (Matrix::zeros(1, 2), Matrix::zeros(1, 2));
        let cfg = AdamConfig::default();
        let g1 = Matrix::row_vector(&[1.0, -0.5]);
        let g2 = Matrix::row_vector(&[0.5, 0.5]);
        adam_step(&mut p, &g1, &mut m, &mut v, 1, 0.1, &cfg).unwrap();
        adam_step(&mut p, &g2, &mut m, &mut v, 2, 0.1, &cfg).unwrap();

        let mut expected = [0.5, 0.5];
        for (k, e) in expected.iter_mut().enumerate() {
            let (a, b) = (g1.as_slice()[k], g2.as_slice()[k]);
            let m1 = 0.1 * a;
            let v1 = 0.001 * a * a;
            *e -= 0.1 * (m1 / 0.1) / (libm::sqrt(v1 / 0.001) + 1e-8);
            let m2 = 0.9 * m1 + 0.1 * b;
            let v2 = 0.999 * v1 + 0.001 * b * b;
            *e -= 0.1 * (m2 / (1.0 - 0.81)) / (libm::sqrt(v2 / (1.0 - 0.999 * 0.999)) + 1e-8);
        }
        assert!((p[(0, 0)] - expected[0]).abs() < 1e-14);
        assert!((p[(0, 1)] - expected[1]).abs() < 1e-14);
    }

    #[test]
    fn missing_gradient_leaves_param_bit_identical() {
        let mut a = Matrix::row_vector(&[0.1, 0.2]);
        let mut b = Matrix::row_vector(&[0.3]);
        let b0 = b.clone();
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.5);
        opt.step(
            &mut [&mut a, &mut b],
            &[Some(Matrix::row_vector(&[1.0, 1.0])), None],
        )
        .unwrap();
        assert_eq!(b, b0);
        assert_ne!(a, Matrix::row_vector(&[0.1, 0.2]));
    }
}
