//! Chirp-Z transform by Bluestein's convolution.

use num_complex::Complex64;

use crate::fft;

/// `X_k = Σ_n x_n·A^{−n}·W^{nk}` for `k = 0..k_out`, i.e. the z-transform of
/// `x` on the contour `z_k = A·W^{−k}`.
///
/// `A = 1, W = e^{−j2π/N}` gives the DFT of length N. Bluestein's identity
/// `nk = (n² + k² − (k − n)²)/2` turns the sum into one linear convolution,
/// evaluated with FFTs of a power-of-two size ≥ `len + k_out − 1`.
pub fn czt(x: &[Complex64], k_out: usize, w: Complex64, a: Complex64) -> Vec<Complex64> {
    CztPlan::new(x.len(), k_out, w, a).apply(x)
}

/// Precomputed chirps and kernel spectrum for repeated CZTs of one shape.
#[derive(Debug, Clone)]
pub struct CztPlan {
    len: usize,
    k_out: usize,
    size: usize,
    pre: Vec<Complex64>,
    kernel: Vec<Complex64>,
    post: Vec<Complex64>,
}

impl CztPlan {
    pub fn new(len: usize, k_out: usize, w: Complex64, a: Complex64) -> Self {
        let ln_w = w.ln();
        let ln_a = a.ln();
        // W^{e/2} for integer e = i², computed from ln W for accuracy at large i.
        let chirp = |i: i64| ((i * i) as f64 * 0.5 * ln_w).exp();
        let size = (len + k_out).saturating_sub(1).max(1).next_power_of_two();
        let pre = (0..len).map(|i| (-(i as f64) * ln_a).exp() * chirp(i as i64)).collect();
        // v_j = W^{−j²/2} for j ∈ (−len, k_out), stored circularly.
        let mut kernel = vec![Complex64::new(0.0, 0.0); size];
        for (j, v) in kernel.iter_mut().enumerate().take(k_out) {
            *v = chirp(j as i64).inv();
        }
        for j in 1..len {
            kernel[size - j] = chirp(j as i64).inv();
        }
        fft::fft_inplace(&mut kernel);
        let scale = 1.0 / size as f64;
        let post = (0..k_out).map(|k| chirp(k as i64) * scale).collect();
        Self {
            len,
            k_out,
            size,
            pre,
            kernel,
            post,
        }
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.len, "CZT plan built for a different input length");
        if self.len == 0 || self.k_out == 0 {
            return vec![Complex64::new(0.0, 0.0); self.k_out];
        }
        let mut u = vec![Complex64::new(0.0, 0.0); self.size];
        for ((ui, xi), p) in u.iter_mut().zip(x).zip(&self.pre) {
            *ui = xi * p;
        }
        fft::fft_inplace(&mut u);
        for (a, b) in u.iter_mut().zip(&self.kernel) {
            *a *= b;
        }
        fft::ifft_inplace(&mut u);
        u.truncate(self.k_out);
        for (v, p) in u.iter_mut().zip(&self.post) {
            *v *= p;
        }
        u
    }
}
