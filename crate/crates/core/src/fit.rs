//! Least-squares polynomial fits, used to characterise how the minimum
//! bounds grow with step size.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PolyFit {
    /// Coefficients, constant term first.
    pub coeffs: Vec<f64>,
    pub r_squared: f64,
}

impl PolyFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }
}

/// Fits `y ≈ Σ c_i x^i`, `i ≤ degree`, by Householder QR.
pub fn polyfit(x: &[f64], y: &[f64], degree: usize) -> Result<PolyFit> {
    let n = x.len();
    let m = degree + 1;
    if n != y.len() {
        return Err(Error::domain("x and y lengths differ"));
    }
    if n < m {
        return Err(Error::domain(format!(
            "degree {degree} fit needs at least {m} points"
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::domain("fit data must be finite"));
    }
    // column-major Vandermonde
    let mut a: Vec<Vec<f64>> = (0..m)
        .map(|j| x.iter().map(|v| v.powi(j as i32)).collect())
        .collect();
    let mut b = y.to_vec();
    for j in 0..m {
        let norm = a[j][j..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Unidentifiable(
                "fit design matrix is rank deficient".into(),
            ));
        }
        let alpha = if a[j][j] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = a[j][j..].to_vec();
        v[0] -= alpha;
        let vv: f64 = v.iter().map(|t| t * t).sum();
        for col in a.iter_mut().skip(j) {
            let d: f64 = v.iter().zip(&col[j..]).map(|(p, q)| p * q).sum::<f64>() * 2.0 / vv;
            for (c, vi) in col[j..].iter_mut().zip(&v) {
                *c -= d * vi;
            }
        }
        let d: f64 = v.iter().zip(&b[j..]).map(|(p, q)| p * q).sum::<f64>() * 2.0 / vv;
        for (c, vi) in b[j..].iter_mut().zip(&v) {
            *c -= d * vi;
        }
    }
    let mut coeffs = vec![0.0; m];
    for i in (0..m).rev() {
        let s: f64 = (i + 1..m).map(|j| a[j][i] * coeffs[j]).sum();
        if a[i][i].abs() <= 1e-13 * a[0][0].abs() {
            return Err(Error::Unidentifiable(
                "fit design matrix is rank deficient".into(),
            ));
        }
        coeffs[i] = (b[i] - s) / a[i][i];
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let fit = PolyFit {
        coeffs,
        r_squared: 1.0,
    };
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| (yi - fit.eval(*xi)).powi(2))
        .sum();
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    Ok(PolyFit { r_squared, ..fit })
}
