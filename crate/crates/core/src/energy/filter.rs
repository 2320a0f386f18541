use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use super::CurrentTrace;

/// Transfer-function coefficients, `a[0] == 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct IirCoeffs {
    pub b: Vec<f64>,
    pub a: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FilterError {
    #[error("order must be at least 1")]
    ZeroOrder,
    #[error("cutoff {fc_hz} Hz must lie strictly between 0 and Nyquist ({nyquist_hz} Hz)")]
    Cutoff { fc_hz: f64, nyquist_hz: f64 },
}

/// Expands `prod (z - r_i)` into coefficients of descending powers.
fn poly_from_roots(roots: &[Complex64]) -> Vec<Complex64> {
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for &r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
        for (i, &ci) in c.iter().enumerate() {
            next[i] += ci;
            next[i + 1] -= ci * r;
        }
        c = next;
    }
    c
}

/// Digital Butterworth low-pass by bilinear transform of the analog
/// prototype, with the cutoff prewarped so `|H(fc)| = 1/sqrt(2)`.
pub fn butterworth_lowpass(order: usize, fc_hz: f64, fs_hz: f64) -> Result<IirCoeffs, FilterError> {
    if order == 0 {
        return Err(FilterError::ZeroOrder);
    }
    let nyquist_hz = fs_hz / 2.0;
    if !(fc_hz > 0.0 && fc_hz < nyquist_hz) {
        return Err(FilterError::Cutoff { fc_hz, nyquist_hz });
    }
    let k = 2.0 * fs_hz;
    let wc = k * (PI * fc_hz / fs_hz).tan();
    let n = order as f64;
    let z_poles: Vec<Complex64> = (1..=order)
        .map(|i| {
            let theta = PI * (2.0 * i as f64 + n - 1.0) / (2.0 * n);
            let s = Complex64::from_polar(wc, theta);
            (k + s) / (k - s)
        })
        .collect();
    let a: Vec<f64> = poly_from_roots(&z_poles).iter().map(|c| c.re).collect();
    let zeros = vec![Complex64::new(-1.0, 0.0); order];
    let b_unit: Vec<f64> = poly_from_roots(&zeros).iter().map(|c| c.re).collect();
    let gain = a.iter().sum::<f64>() / b_unit.iter().sum::<f64>();
    let b = b_unit.iter().map(|v| v * gain).collect();
    Ok(IirCoeffs { b, a })
}

/// `H(e^{jw})` at `f_hz`.
pub fn frequency_response(c: &IirCoeffs, f_hz: f64, fs_hz: f64) -> Complex64 {
    let z_inv = Complex64::from_polar(1.0, -2.0 * PI * f_hz / fs_hz);
    let eval = |p: &[f64]| p.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &v| acc * z_inv + v);
    eval(&c.b) / eval(&c.a)
}

/// Direct-form I difference equation from zero initial state.
pub fn apply_filter(c: &IirCoeffs, x: &CurrentTrace) -> CurrentTrace {
    let mut y = vec![0.0; x.samples.len()];
    for n in 0..y.len() {
        let mut acc = 0.0;
        for (k, &bk) in c.b.iter().enumerate() {
            if n >= k {
                acc += bk * x.samples[n - k];
            }
        }
        for (k, &ak) in c.a.iter().enumerate().skip(1) {
            if n >= k {
                acc -= ak * y[n - k];
            }
        }
        y[n] = acc / c.a[0];
    }
    x.map(y)
}

/// Schur-Cohn test: all roots of `a` strictly inside the unit circle.
pub fn is_stable(a: &[f64]) -> bool {
    let mut p: Vec<f64> = a.to_vec();
    while p.len() > 1 {
        let lead = p[0];
        if lead == 0.0 {
            return false;
        }
        let k = p[p.len() - 1] / lead;
        if !(k.abs() < 1.0) {
            return false;
        }
        let m = p.len() - 1;
        p = (0..m).map(|i| (p[i] - k * p[m - i]) / (1.0 - k * k)).collect();
    }
    true
}

/// Roots of `a` (descending powers) by Durand-Kerner iteration.
pub fn poles(a: &[f64]) -> Vec<Complex64> {
    let n = a.len().saturating_sub(1);
    if n == 0 {
        return Vec::new();
    }
    let monic: Vec<f64> = a.iter().map(|v| v / a[0]).collect();
    let eval = |z: Complex64| monic.iter().fold(Complex64::new(0.0, 0.0), |acc, &v| acc * z + v);
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..n).map(|i| seed.powu(i as u32)).collect();
    for _ in 0..500 {
        let mut delta = 0.0f64;
        for i in 0..n {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..n {
                if i != j {
                    denom *= roots[i] - roots[j];
                }
            }
            let step = eval(roots[i]) / denom;
            roots[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-14 {
            break;
        }
    }
    roots
}
