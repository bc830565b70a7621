//! Small scalar helpers shared across modules.

/// Inverse hyperbolic sine, odd by construction and accurate near zero.
pub fn argsh(x: f64) -> f64 {
    if x < 0.0 {
        return -argsh(-x);
    }
    if x > 1e150 {
        return std::f64::consts::LN_2 + x.ln();
    }
    let s = (1.0 + x * x).sqrt();
    (x + x * x / (1.0 + s)).ln_1p()
}

/// Inverse hyperbolic cosine on `[1, ∞)`; NaN below 1.
pub fn argch(x: f64) -> f64 {
    if x < 1.0 {
        return f64::NAN;
    }
    if x > 1e150 {
        return std::f64::consts::LN_2 + x.ln();
    }
    let y = x - 1.0;
    (y + (y * (x + 1.0)).sqrt()).ln_1p()
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Upper tail `P(N > x)` without cancellation for large `x`.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}
