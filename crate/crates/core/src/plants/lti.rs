//! Strictly proper SISO transfer functions realized in controllable canonical
//! form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Polynomial coefficients, highest power first.
pub fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Monic polynomial `∏ (s − r)` for real roots `r`.
pub fn poly_from_roots(roots: &[f64]) -> Vec<f64> {
    roots.iter().fold(vec![1.0], |p, &r| poly_mul(&p, &[1.0, -r]))
}

/// Evaluates a highest-power-first polynomial (Horner).
pub fn poly_eval(p: &[f64], s: f64) -> f64 {
    p.iter().fold(0.0, |acc, &c| acc * s + c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferFunction {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
}

impl TransferFunction {
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Result<Self> {
        let num: Vec<f64> = num.into_iter().skip_while(|&c| c == 0.0).collect();
        let den: Vec<f64> = den.into_iter().skip_while(|&c| c == 0.0).collect();
        if den.is_empty() {
            return Err(Error::config("transfer function denominator is zero"));
        }
        if num.len() >= den.len() {
            return Err(Error::config("transfer function must be strictly proper"));
        }
        Ok(Self { num, den })
    }

    pub fn from_roots(gain: f64, zeros: &[f64], poles: &[f64]) -> Result<Self> {
        let num: Vec<f64> = poly_from_roots(zeros).into_iter().map(|c| c * gain).collect();
        Self::new(num, poly_from_roots(poles))
    }

    pub fn dc_gain(&self) -> f64 {
        poly_eval(&self.num, 0.0) / poly_eval(&self.den, 0.0)
    }

    pub fn order(&self) -> usize {
        self.den.len() - 1
    }
}

/// `ẋ = A x + B u`, `y = C x` with `A` the companion matrix of the
/// denominator. States are `x₁ … x_n` with `ẋ_i = x_{i+1}` and
/// `ẋ_n = −a₀x₁ − … − a_{n−1}x_n + u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalRealization {
    /// Monic denominator coefficients, lowest power first: `a₀ … a_{n−1}`.
    pub a: Vec<f64>,
    /// Output row, lowest power first: `b₀ … b_{n−1}` scaled by the
    /// denominator's leading coefficient.
    pub c: Vec<f64>,
}

impl CanonicalRealization {
    pub fn from_tf(tf: &TransferFunction) -> Self {
        let n = tf.order();
        let lead = tf.den[0];
        let a: Vec<f64> = tf.den.iter().rev().take(n).map(|&x| x / lead).collect();
        let mut c = vec![0.0; n];
        for (i, &b) in tf.num.iter().rev().enumerate() {
            c[i] = b / lead;
        }
        Self { a, c }
    }

    pub fn order(&self) -> usize {
        self.a.len()
    }

    pub fn derivative(&self, x: &[f64], u: f64, dx: &mut [f64]) {
        let n = self.a.len();
        for i in 0..n - 1 {
            dx[i] = x[i + 1];
        }
        dx[n - 1] = u - self.a.iter().zip(x).map(|(a, x)| a * x).sum::<f64>();
    }

    pub fn output(&self, x: &[f64]) -> f64 {
        self.c.iter().zip(x).map(|(c, x)| c * x).sum()
    }
}
