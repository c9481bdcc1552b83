//! Adam with bias correction and inverse-time learning-rate decay.

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr_init: f64,
    pub decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Number of updates applied so far.
    pub step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(n: usize, lr_init: f64, decay: f64) -> Self {
        Self {
            lr_init,
            decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    /// `lr_init / (1 + decay * i)` for iteration index `i`.
    pub fn learning_rate(&self, i: u64) -> f64 {
        self.lr_init / (1.0 + self.decay * i as f64)
    }

    /// Applies one update. Returns `false` and leaves everything untouched
    /// when the gradient has a non-finite entry.
    pub fn update(&mut self, params: &mut [f64], grad: &[f64]) -> bool {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        if grad.iter().any(|g| !g.is_finite()) {
            return false;
        }
        let lr = self.learning_rate(self.step);
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step as i32);
        let c2 = 1.0 - self.beta2.powi(self.step as i32);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_values() {
        let a = Adam::new(1, 6.25e-4, 1.25e-4);
        assert_eq!(a.learning_rate(0), 6.25e-4);
        assert!((a.learning_rate(8000) - 3.125e-4).abs() < 1e-18);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut a = Adam::new(4, 1e-3, 0.0);
        let mut p = vec![1.0, -2.0, 0.5, 3.0];
        let g = [0.3, -7.0, 1e-3, 0.0];
        let before = p.clone();
        assert!(a.update(&mut p, &g));
        for i in 0..3 {
            let d = before[i] - p[i];
            assert!(d.abs() <= 1e-3 * (1.0 + 1e-8));
            assert!(d.abs() > 0.99e-3);
            assert_eq!(d.signum(), g[i].signum());
        }
        assert_eq!(p[3], 3.0);
    }

    #[test]
    fn non_finite_gradient_is_skipped() {
        let mut a = Adam::new(2, 1e-3, 0.0);
        let mut p = vec![1.0, 2.0];
        assert!(!a.update(&mut p, &[f64::NAN, 1.0]));
        assert_eq!(p, vec![1.0, 2.0]);
        assert_eq!(a.step, 0);
    }

    #[test]
    fn minimizes_quadratic() {
        let mut a = Adam::new(2, 0.05, 0.0);
        let mut p = vec![3.0, -4.0];
        for _ in 0..2000 {
            let g = [2.0 * p[0], 20.0 * p[1]];
            a.update(&mut p, &g);
        }
        assert!(p[0].abs() < 1e-2 && p[1].abs() < 1e-2, "{p:?}");
    }
}
