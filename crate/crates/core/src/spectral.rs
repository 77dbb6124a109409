//! FFT helpers on the periodic grid.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub(crate) struct Spectral {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Angular wavenumbers in FFT order.
    pub k: Vec<f64>,
    scratch: Vec<Complex64>,
}

impl Spectral {
    pub fn new(sites: usize, length: f64) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(sites);
        let inverse = planner.plan_fft_inverse(sites);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            forward,
            inverse,
            k: wavenumbers(sites, length),
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        }
    }

    pub fn forward(&mut self, buf: &mut [Complex64]) {
        self.forward.process_with_scratch(buf, &mut self.scratch);
    }

    /// Normalized inverse transform.
    pub fn inverse(&mut self, buf: &mut [Complex64]) {
        self.inverse.process_with_scratch(buf, &mut self.scratch);
        let norm = 1.0 / buf.len() as f64;
        buf.iter_mut().for_each(|z| *z *= norm);
    }

    /// Spectral first derivative. The Nyquist mode is dropped for even sizes.
    pub fn derivative(&mut self, values: &[Complex64]) -> Vec<Complex64> {
        let n = values.len();
        let mut buf = values.to_vec();
        self.forward(&mut buf);
        for (m, z) in buf.iter_mut().enumerate() {
            if n.is_multiple_of(2) && m == n / 2 {
                *z = Complex64::new(0.0, 0.0);
            } else {
                *z *= Complex64::new(0.0, self.k[m]);
            }
        }
        self.inverse(&mut buf);
        buf
    }

    /// Spectral second derivative, Nyquist mode included.
    pub fn second_derivative(&mut self, values: &[Complex64]) -> Vec<Complex64> {
        let mut buf = values.to_vec();
        self.forward(&mut buf);
        for (z, k) in buf.iter_mut().zip(&self.k) {
            *z *= -k * k;
        }
        self.inverse(&mut buf);
        buf
    }

    /// Σ_j |∂f|²_j evaluated through Parseval, consistent with the e^{-ik²t} propagator.
    pub fn gradient_sq_sum(&mut self, values: &[Complex64]) -> f64 {
        let mut buf = values.to_vec();
        self.forward(&mut buf);
        let n = buf.len() as f64;
        buf.iter()
            .zip(&self.k)
            .map(|(z, k)| k * k * z.norm_sqr())
            .sum::<f64>()
            / n
    }
}

pub(crate) fn wavenumbers(sites: usize, length: f64) -> Vec<f64> {
    let dk = 2.0 * PI / length;
    (0..sites)
        .map(|m| {
            if m <= sites / 2 {
                m as f64 * dk
            } else {
                (m as f64 - sites as f64) * dk
            }
        })
        .collect()
}
