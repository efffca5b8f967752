//! Thin wrapper over `rustfft` for real-valued sequences of a fixed length.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Forward/inverse plans for one sequence length.
pub struct SpectralEngine {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl SpectralEngine {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            len,
            forward,
            inverse,
            scratch: vec![Complex64::default(); scratch_len],
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Full complex spectrum of a real sequence.
    pub fn forward(&mut self, values: &[f64], out: &mut Vec<Complex64>) {
        debug_assert_eq!(values.len(), self.len);
        out.clear();
        out.extend(values.iter().map(|&v| Complex64::new(v, 0.0)));
        self.forward.process_with_scratch(out, &mut self.scratch);
    }

    /// Inverse transform, normalized by `1/len`, keeping the real part.
    ///
    /// The spectrum is consumed as scratch space.
    pub fn inverse_real(&mut self, spectrum: &mut [Complex64], out: &mut Vec<f64>) {
        debug_assert_eq!(spectrum.len(), self.len);
        self.inverse.process_with_scratch(spectrum, &mut self.scratch);
        let norm = 1.0 / self.len as f64;
        out.clear();
        out.extend(spectrum.iter().map(|c| c.re * norm));
    }

    /// Amplitude spectrum `|X_k|` over all `len` bins.
    pub fn amplitudes(&mut self, values: &[f64], buf: &mut Vec<Complex64>) -> Vec<f64> {
        self.forward(values, buf);
        buf.iter().map(|c| c.norm_sqr().sqrt()).collect()
    }
}

/// Make `spectrum` the transform of a real sequence: DC and Nyquist bins real,
/// bin `len - k` the conjugate of bin `k`.
pub fn enforce_hermitian(spectrum: &mut [Complex64]) {
    let n = spectrum.len();
    if n == 0 {
        return;
    }
    spectrum[0].im = 0.0;
    if n.is_multiple_of(2) {
        spectrum[n / 2].im = 0.0;
    }
    for k in 1..n.div_ceil(2) {
        spectrum[n - k] = spectrum[k].conj();
    }
}

/// Frequency index of bin `k` folded onto `0..=len/2`.
pub fn folded_index(k: usize, len: usize) -> usize {
    k.min(len - k)
}
