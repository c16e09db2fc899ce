//! Univariate least squares in one streaming pass.

use serde::Serialize;

/// Running means and co-moments (Welford-style updates).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct OlsAccumulator {
    n: usize,
    mean_x: f64,
    mean_y: f64,
    sxx: f64,
    syy: f64,
    sxy: f64,
}

impl OlsAccumulator {
    pub fn push(&mut self, x: f64, y: f64) {
        self.n += 1;
        let n = self.n as f64;
        let dx = x - self.mean_x;
        let dy = y - self.mean_y;
        self.mean_x += dx / n;
        self.mean_y += dy / n;
        self.sxx += dx * (x - self.mean_x);
        self.syy += dy * (y - self.mean_y);
        self.sxy += dx * (y - self.mean_y);
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegressionReport {
    pub feature: String,
    pub horizon_ms: i64,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub r_squared: Option<f64>,
    /// Standard error of `beta`.
    pub beta_se: Option<f64>,
    pub samples: usize,
    /// Pairs dropped because either side was undefined.
    pub excluded: usize,
}

impl RegressionReport {
    pub fn from_accumulator(feature: &str, horizon_ms: i64, acc: &OlsAccumulator, excluded: usize) -> Self {
        let mut r = RegressionReport {
            feature: feature.to_string(),
            horizon_ms,
            alpha: None,
            beta: None,
            r_squared: None,
            beta_se: None,
            samples: acc.n,
            excluded,
        };
        if acc.n < 3 || acc.sxx <= 0.0 {
            return r;
        }
        let beta = acc.sxy / acc.sxx;
        r.beta = Some(beta);
        r.alpha = Some(acc.mean_y - beta * acc.mean_x);
        let ssr = (acc.syy - beta * acc.sxy).max(0.0);
        r.beta_se = Some((ssr / (acc.n as f64 - 2.0) / acc.sxx).sqrt());
        if acc.syy > 0.0 {
            r.r_squared = Some((1.0 - ssr / acc.syy).clamp(0.0, 1.0));
        }
        r
    }
}

/// Fits `y = alpha + beta * x` over the pairs where both values are defined.
pub fn evaluate_predictor(
    feature: &str,
    horizon_ms: i64,
    samples: impl IntoIterator<Item = (Option<f64>, Option<f64>)>,
) -> RegressionReport {
    let mut acc = OlsAccumulator::default();
    let mut excluded = 0;
    for pair in samples {
        match pair {
            (Some(x), Some(y)) if x.is_finite() && y.is_finite() => acc.push(x, y),
            _ => excluded += 1,
        }
    }
    RegressionReport::from_accumulator(feature, horizon_ms, &acc, excluded)
}
