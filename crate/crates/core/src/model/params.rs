use super::ModelError;

/// Parameters of the perturbation family `u_n + v_n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationParams {
    /// Gevrey exponent, `> 1`.
    pub alpha: f64,
    /// Decay rate of the flat factor, `> 0`.
    pub lambda: f64,
    /// Amplitude exponent, `> 0`.
    pub a: f64,
    /// Family index, `>= 1`.
    pub n: u32,
}

impl PerturbationParams {
    pub fn new(alpha: f64, lambda: f64, a: f64, n: u32) -> Result<Self, ModelError> {
        let params = PerturbationParams { alpha, lambda, a, n };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.alpha > 1.0) || !self.alpha.is_finite() {
            return Err(ModelError::InvalidParams(format!(
                "alpha must be finite and > 1, got {}",
                self.alpha
            )));
        }
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(ModelError::InvalidParams(format!(
                "lambda must be finite and > 0, got {}",
                self.lambda
            )));
        }
        if !(self.a > 0.0) || !self.a.is_finite() {
            return Err(ModelError::InvalidParams(format!(
                "a must be finite and > 0, got {}",
                self.a
            )));
        }
        if self.n == 0 {
            return Err(ModelError::InvalidParams("n must be >= 1".into()));
        }
        Ok(())
    }

    /// Same parameters with a different family index.
    pub fn with_n(&self, n: u32) -> Self {
        PerturbationParams { n, ..*self }
    }

    /// `n^{-a}`.
    pub fn amplitude(&self) -> f64 {
        (self.n as f64).powf(-self.a)
    }

    /// Support half-width `w = 1/(8 n^{a/2})` of the bump.
    pub fn half_width(&self) -> f64 {
        1.0 / (8.0 * (self.n as f64).powf(self.a / 2.0))
    }

    /// `p = 1/(α-1)`.
    pub fn flat_exponent(&self) -> f64 {
        1.0 / (self.alpha - 1.0)
    }

    /// Closed-form peak `v_n(1/2) = n^{-a} exp(-2√2 λ w^{-p})`.
    pub fn bump_peak(&self) -> f64 {
        let w = self.half_width();
        self.amplitude()
            * (-2.0 * std::f64::consts::SQRT_2 * self.lambda * w.powf(-self.flat_exponent())).exp()
    }
}

impl Default for PerturbationParams {
    fn default() -> Self {
        PerturbationParams {
            alpha: 2.0,
            lambda: 1.0,
            a: 1.0,
            n: 4,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_params() {
        assert!(PerturbationParams::new(1.0, 1.0, 1.0, 1).is_err());
        assert!(PerturbationParams::new(2.0, 0.0, 1.0, 1).is_err());
        assert!(PerturbationParams::new(2.0, 1.0, -1.0, 1).is_err());
        assert!(PerturbationParams::new(2.0, 1.0, 1.0, 0).is_err());
        assert!(PerturbationParams::new(f64::NAN, 1.0, 1.0, 1).is_err());
    }

    #[test]
    fn half_width_in_range() {
        for n in 1..200 {
            let w = PerturbationParams::new(2.0, 1.0, 0.7, n).unwrap().half_width();
            assert!(w > 0.0 && w <= 0.125);
        }
        let p = PerturbationParams::new(2.0, 1.0, 1.0, 4).unwrap();
        assert_eq!(p.half_width(), 1.0 / 16.0);
    }
}
