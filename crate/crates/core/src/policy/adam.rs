//! Adam optimiser over a flat parameter vector.

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One descent step `θ ← θ - lr · m̂ / (sqrt(v̂) + eps)` on the loss
    /// gradient `grad`.
    pub fn step(&mut self, theta: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powf(self.t as f64);
        let c2 = 1.0 - b2.powf(self.t as f64);
        // fold the bias corrections into the step size
        let lr_t = self.lr * c2.sqrt() / c1;
        let eps_t = self.eps * c2.sqrt();
        for (((p, g), m), v) in theta.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr_t * *m / (v.sqrt() + eps_t);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        let mut a = Adam::new(3, 0.1);
        let mut th = vec![1.0, 1.0, 1.0];
        a.step(&mut th, &[2.0, -5.0, 0.0]);
        assert!((th[0] - 0.9).abs() < 1e-9);
        assert!((th[1] - 1.1).abs() < 1e-9);
        assert_eq!(th[2], 1.0);
    }

    #[test]
    fn matches_textbook_form() {
        let mut a = Adam::new(1, 0.01);
        let mut th = vec![0.3];
        let (mut m, mut v, mut p) = (0.0f64, 0.0f64, 0.3f64);
        for t in 1..50 {
            let g = 2.0 * p - 1.0;
            a.step(&mut th, &[g]);
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            p -= 0.01 * mh / (vh.sqrt() + 1e-8);
            assert!((th[0] - p).abs() < 1e-12);
        }
    }

    #[test]
    fn minimises_quadratic() {
        let mut a = Adam::new(2, 0.05);
        let mut th = vec![3.0, -2.0];
        for _ in 0..2000 {
            let g = vec![2.0 * (th[0] - 1.0), 2.0 * (th[1] + 0.5)];
            a.step(&mut th, &g);
        }
        assert!((th[0] - 1.0).abs() < 1e-3 && (th[1] + 0.5).abs() < 1e-3);
    }
}
