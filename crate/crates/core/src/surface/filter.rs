//! Second-order Butterworth sections applied forward and backward.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use thiserror::Error;

/// Shortest signal the zero-phase filter accepts.
pub const MIN_SAMPLES: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum FilterError {
    #[error("signal has {0} samples, need at least 10")]
    TooShort(usize),
    #[error("sample rate {fs} Hz is below four times the {fc} Hz cutoff")]
    RateTooLow { fs: f64, fc: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    /// Denominator with `a0` normalized to 1.
    pub a: [f64; 2],
}

impl Biquad {
    fn design(fc: f64, fs: f64, high: bool) -> Result<Self, FilterError> {
        if !(fs >= 4.0 * fc) || fc <= 0.0 {
            return Err(FilterError::RateTooLow { fs, fc });
        }
        let w0 = 2.0 * PI * fc / fs;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 * FRAC_1_SQRT_2);
        let a0 = 1.0 + alpha;
        let b = if high {
            [(1.0 + cos) / 2.0, -(1.0 + cos), (1.0 + cos) / 2.0]
        } else {
            [(1.0 - cos) / 2.0, 1.0 - cos, (1.0 - cos) / 2.0]
        };
        Ok(Self {
            b: [b[0] / a0, b[1] / a0, b[2] / a0],
            a: [-2.0 * cos / a0, (1.0 - alpha) / a0],
        })
    }

    pub fn highpass(fc: f64, fs: f64) -> Result<Self, FilterError> {
        Self::design(fc, fs, true)
    }

    pub fn lowpass(fc: f64, fs: f64) -> Result<Self, FilterError> {
        Self::design(fc, fs, false)
    }

    /// Filter state that makes a constant unit input a steady state.
    fn steady_state(&self) -> [f64; 2] {
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        let g = (b0 + b1 + b2) / (1.0 + a1 + a2);
        let z2 = b2 - a2 * g;
        [b1 - a1 * g + z2, z2]
    }

    /// Direct form II transposed, starting from state `z`.
    fn run(&self, x: &[f64], mut z: [f64; 2]) -> Vec<f64> {
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        x.iter()
            .map(|&xi| {
                let y = b0 * xi + z[0];
                z[0] = b1 * xi - a1 * y + z[1];
                z[1] = b2 * xi - a2 * y;
                y
            })
            .collect()
    }

    /// Single causal pass from rest.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        self.run(x, [0.0, 0.0])
    }

    /// Zero-phase forward-backward filtering with odd reflection padding and
    /// steady-state initial conditions.
    pub fn filtfilt(&self, x: &[f64], padlen: usize) -> Result<Vec<f64>, FilterError> {
        let n = x.len();
        if n < MIN_SAMPLES {
            return Err(FilterError::TooShort(n));
        }
        let pad = padlen.clamp(1, n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

        let zi = self.steady_state();
        let scaled = |v: f64| [zi[0] * v, zi[1] * v];
        let mut y = self.run(&ext, scaled(ext[0]));
        y.reverse();
        let mut y = self.run(&y, scaled(y[0]));
        y.reverse();
        Ok(y[pad..pad + n].to_vec())
    }
}

/// Padding long enough to cover a few time constants of the cutoff.
pub fn default_padlen(fc: f64, fs: f64) -> usize {
    ((3.0 * fs / fc).ceil() as usize).max(9)
}

pub fn highpass(x: &[f64], fc: f64, fs: f64) -> Result<Vec<f64>, FilterError> {
    Biquad::highpass(fc, fs)?.filtfilt(x, default_padlen(fc, fs))
}

pub fn lowpass(x: &[f64], fc: f64, fs: f64) -> Result<Vec<f64>, FilterError> {
    Biquad::lowpass(fc, fs)?.filtfilt(x, default_padlen(fc, fs))
}

/// Median sample rate of a timestamp series.
pub fn sample_rate(t: &[f64]) -> Option<f64> {
    let dts: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).filter(|d| *d > 0.0).collect();
    crate::series::median(&dts).map(|d| 1.0 / d)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FS: f64 = 100.0;

    fn tone(f: f64, secs: f64) -> Vec<f64> {
        (0..(secs * FS) as usize)
            .map(|i| (2.0 * PI * f * i as f64 / FS).sin())
            .collect()
    }

    /// Sinusoid amplitude from the RMS of the middle half (whole periods).
    fn mid_amplitude(y: &[f64]) -> f64 {
        let n = y.len();
        let mid = &y[n / 4..3 * n / 4];
        (2.0 * mid.iter().map(|v| v * v).sum::<f64>() / mid.len() as f64).sqrt()
    }

    /// Forward-backward power gain of the bilinear Butterworth high-pass.
    fn hp_gain(f: f64, fc: f64) -> f64 {
        let r = (PI * fc / FS).tan() / (PI * f / FS).tan();
        1.0 / (1.0 + r.powi(4))
    }

    #[test]
    fn removes_gravity() {
        let y = highpass(&vec![9.81; 500], 1.0, FS).unwrap();
        assert!(y.iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn passes_ten_hertz() {
        let y = highpass(&tone(10.0, 10.0), 1.0, FS).unwrap();
        let a = mid_amplitude(&y);
        assert!((a - 1.0).abs() < 0.05, "{a}");
        assert!((a - hp_gain(10.0, 1.0)).abs() < 0.01);
    }

    #[test]
    fn stops_tenth_hertz() {
        let y = highpass(&tone(0.1, 60.0), 1.0, FS).unwrap();
        let a = mid_amplitude(&y);
        assert!(a < 0.05, "{a}");
        assert!(a <= hp_gain(0.1, 1.0) + 1e-3);
    }

    #[test]
    fn lowpass_dc_gain_is_one() {
        let y = lowpass(&vec![2.5; 100], 3.0, FS).unwrap();
        assert!(y.iter().all(|v| (v - 2.5).abs() < 1e-9));
    }

    #[test]
    fn short_signal_rejected() {
        assert_eq!(highpass(&[1.0; 9], 1.0, FS), Err(FilterError::TooShort(9)));
        assert!(matches!(highpass(&[1.0; 20], 30.0, FS), Err(FilterError::RateTooLow { .. })));
    }

    #[test]
    fn causal_pass_matches_difference_equation() {
        let f = Biquad::lowpass(3.0, FS).unwrap();
        let x: Vec<f64> = (0..50).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let y = f.filter(&x);
        let mut oracle = vec![0.0; x.len()];
        for n in 0..x.len() {
            let xm = |k: usize| if n >= k { x[n - k] } else { 0.0 };
            let ym = |k: usize| if n >= k { oracle[n - k] } else { 0.0 };
            oracle[n] = f.b[0] * x[n] + f.b[1] * xm(1) + f.b[2] * xm(2) - f.a[0] * ym(1) - f.a[1] * ym(2);
        }
        for (a, b) in y.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
