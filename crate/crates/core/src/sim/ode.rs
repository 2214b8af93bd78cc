//! Classical fixed-step fourth-order Runge-Kutta.

/// Scratch space for one RK4 step of a system of dimension `dim`.
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

    /// Advances `y` in place from `x` to `x + h`. `rhs(x, y, dydx)` fills the
    /// derivative and may abort the step.
    pub fn step<E, F>(&mut self, x: f64, y: &mut [f64], h: f64, rhs: &mut F) -> Result<(), E>
    where
        F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), E>,
    {
        let n = y.len();
        rhs(x, y, &mut self.k1)?;
        for i in 0..n {
            self.tmp[i] = y[i] + 0.5 * h * self.k1[i];
        }
        rhs(x + 0.5 * h, &self.tmp, &mut self.k2)?;
        for i in 0..n {
            self.tmp[i] = y[i] + 0.5 * h * self.k2[i];
        }
        rhs(x + 0.5 * h, &self.tmp, &mut self.k3)?;
        for i in 0..n {
            self.tmp[i] = y[i] + h * self.k3[i];
        }
        rhs(x + h, &self.tmp, &mut self.k4)?;
        for i in 0..n {
            y[i] += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn integrate(h: f64) -> f64 {
        // y' = y, y(0) = 1
        let mut y = [1.0];
        let mut rk = Rk4::new(1);
        let n = (2.0 / h).round() as usize;
        for k in 0..n {
            rk.step::<(), _>(k as f64 * h, &mut y, h, &mut |_, y, d| {
                d[0] = y[0];
                Ok(())
            })
            .unwrap();
        }
        y[0]
    }

    #[test]
    fn fourth_order_convergence() {
        let exact = 2f64.exp();
        let e1 = (integrate(0.1) - exact).abs();
        let e2 = (integrate(0.05) - exact).abs();
        let ratio = e1 / e2;
        assert!(ratio > 14.0 && ratio < 18.0, "ratio {ratio}");
    }

    #[test]
    fn rhs_error_aborts_step() {
        let mut y = [1.0];
        let before = y;
        let r = Rk4::new(1).step(0.0, &mut y, 0.1, &mut |_, _, _| Err("stop"));
        assert_eq!(r, Err("stop"));
        assert_eq!(y, before);
    }
}
