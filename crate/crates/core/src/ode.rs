//! Classical fixed-step fourth-order Runge–Kutta.

/// Scratch buffers for repeated RK4 steps on a system of fixed dimension.
#[derive(Debug, Clone)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        Self {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.k1.len()
    }

    /// Advance `x` from `t` to `t + h` in place. `rhs(t, x, dxdt)` writes the
    /// derivative; an error from it aborts the step and leaves `x` untouched.
    pub fn step<E, F>(&mut self, mut rhs: F, t: f64, x: &mut [f64], h: f64) -> Result<(), E>
    where
        F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), E>,
    {
        debug_assert_eq!(x.len(), self.dim());
        let half = 0.5 * h;

        rhs(t, x, &mut self.k1)?;
        for ((t_i, &x_i), &k) in self.tmp.iter_mut().zip(x.iter()).zip(&self.k1) {
            *t_i = x_i + half * k;
        }
        rhs(t + half, &self.tmp, &mut self.k2)?;
        for ((t_i, &x_i), &k) in self.tmp.iter_mut().zip(x.iter()).zip(&self.k2) {
            *t_i = x_i + half * k;
        }
        rhs(t + half, &self.tmp, &mut self.k3)?;
        for ((t_i, &x_i), &k) in self.tmp.iter_mut().zip(x.iter()).zip(&self.k3) {
            *t_i = x_i + h * k;
        }
        rhs(t + h, &self.tmp, &mut self.k4)?;

        let sixth = h / 6.0;
        for (i, x_i) in x.iter_mut().enumerate() {
            *x_i += sixth * (self.k1[i] + 2.0 * (self.k2[i] + self.k3[i]) + self.k4[i]);
        }
        Ok(())
    }

    /// Integrate over `[t0, t0 + duration]` with `substeps` equal steps.
    pub fn integrate<E, F>(&mut self, mut rhs: F, t0: f64, x: &mut [f64], duration: f64, substeps: usize) -> Result<(), E>
    where
        F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), E>,
    {
        let h = duration / substeps as f64;
        for k in 0..substeps {
            self.step(&mut rhs, t0 + k as f64 * h, x, h)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    #[test]
    fn exponential_decay_order_four() {
        let rhs = |_t: f64, x: &[f64], d: &mut [f64]| -> Result<(), Infallible> {
            d[0] = -x[0];
            Ok(())
        };
        let mut rk = Rk4::new(1);
        let err = |h: f64| {
            let mut x = [1.0];
            Rk4::new(1).step(rhs, 0.0, &mut x, h).unwrap();
            (x[0] - (-h).exp()).abs()
        };
        // local error is O(h^5): halving h divides it by ~32
        let ratio = err(0.2) / err(0.1);
        assert!((ratio - 32.0).abs() < 2.0, "ratio {ratio}");
        let mut x = [1.0];
        rk.integrate(rhs, 0.0, &mut x, 1.0, 100).unwrap();
        assert!((x[0] - (-1.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn zero_step_is_identity() {
        let rhs = |_t: f64, x: &[f64], d: &mut [f64]| -> Result<(), Infallible> {
            d[0] = x[1];
            d[1] = -x[0];
            Ok(())
        };
        let mut x = [0.3, -0.7];
        Rk4::new(2).step(rhs, 0.0, &mut x, 0.0).unwrap();
        assert_eq!(x, [0.3, -0.7]);
    }
}
