use super::layers::Parameter;
use super::matrix::Matrix;

/// Adam with bias correction and no weight decay.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    /// Applies one update from each parameter's `grad`.
    pub fn step(&mut self, params: &mut [&mut Parameter]) {
        if self.first.is_empty() {
            self.first = params.iter().map(|p| Matrix::zeros(p.value.rows(), p.value.cols())).collect();
            self.second = self.first.clone();
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for ((p, m), v) in params.iter_mut().zip(&mut self.first).zip(&mut self.second) {
            let grads = p.grad.as_slice().to_vec();
            let values = p.value.as_mut_slice();
            for (i, g) in grads.into_iter().enumerate() {
                let mi = &mut m.as_mut_slice()[i];
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * g;
                let vi = &mut v.as_mut_slice()[i];
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * g * g;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                values[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_a_quadratic() {
        let mut p = Parameter::new(Matrix::row_vector(vec![3.0, -2.0]));
        let mut opt = Adam::new(0.1);
        for _ in 0..500 {
            let g: Vec<f64> = p.value.as_slice().iter().map(|x| 2.0 * x).collect();
            p.grad = Matrix::row_vector(g);
            opt.step(&mut [&mut p]);
        }
        assert!(p.value.as_slice().iter().all(|x| x.abs() < 1e-2));
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = Parameter::new(Matrix::row_vector(vec![1.0]));
        p.grad = Matrix::row_vector(vec![0.3]);
        let mut opt = Adam::new(0.01);
        opt.step(&mut [&mut p]);
        assert!((p.value.get(0, 0) - 0.99).abs() < 1e-9);
    }
}
