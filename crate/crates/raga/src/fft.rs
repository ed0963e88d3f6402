//! Iterative radix-2 FFT over `num_complex::Complex<f64>`.
//!
//! Small power-of-two sizes only (frame lengths), in-place
//! Cooley-Tukey with precomputable twiddles left implicit.

use num_complex::Complex;
use std::f64::consts::PI;

/// In-place forward FFT. `buf.len()` must be a power of two.
pub fn fft(buf: &mut [Complex<f64>]) {
    let n = buf.len();
    assert!(n.is_power_of_two(), "fft length must be a power of two");
    if n <= 1 {
        return;
    }

    // bit-reversal permutation
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = (i.reverse_bits() >> (usize::BITS - bits)) as usize;
        if j > i {
            buf.swap(i, j);
        }
    }

    let mut len = 2;
    while len <= n {
        let ang = -2.0 * PI / len as f64;
        let wlen = Complex::new(ang.cos(), ang.sin());
        for chunk in buf.chunks_mut(len) {
            let mut w = Complex::new(1.0, 0.0);
            let half = len / 2;
            for k in 0..half {
                let u = chunk[k];
                let v = chunk[k + half] * w;
                chunk[k] = u + v;
                chunk[k + half] = u - v;
                w *= wlen;
            }
        }
        len <<= 1;
    }
}

/// FFT of a real signal, returning the full complex spectrum.
pub fn fft_real(signal: &[f64]) -> Vec<Complex<f64>> {
    let mut buf: Vec<Complex<f64>> = signal.iter().map(|&x| Complex::new(x, 0.0)).collect();
    fft(&mut buf);
    buf
}

/// Naive O(n^2) DFT. Test oracle for the FFT; kept in the library so
/// acceptance checks can compare the two routes directly.
pub fn naive_dft(signal: &[Complex<f64>]) -> Vec<Complex<f64>> {
    let n = signal.len();
    let mut out = vec![Complex::new(0.0, 0.0); n];
    for (k, o) in out.iter_mut().enumerate() {
        let mut acc = Complex::new(0.0, 0.0);
        for (t, &x) in signal.iter().enumerate() {
            let ang = -2.0 * PI * (k * t) as f64 / n as f64;
            acc += x * Complex::new(ang.cos(), ang.sin());
        }
        *o = acc;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn max_rel_err(got: &[Complex<f64>], want: &[Complex<f64>]) -> f64 {
        let scale = want.iter().map(|c| c.norm()).fold(0.0f64, f64::max).max(1e-30);
        got.iter()
            .zip(want)
            .map(|(g, w)| (g - w).norm() / scale)
            .fold(0.0, f64::max)
    }

    #[test]
    fn matches_naive_dft_across_sizes() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let mut n = 2usize;
        while n <= 1024 {
            let sig: Vec<Complex<f64>> = (0..n)
                .map(|_| Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let want = naive_dft(&sig);
            let mut got = sig.clone();
            fft(&mut got);
            assert!(
                max_rel_err(&got, &want) <= 1e-9,
                "fft/dft mismatch at n={n}"
            );
            n <<= 1;
        }
    }

    #[test]
    fn impulse_gives_flat_spectrum() {
        let mut sig = vec![0.0; 16];
        sig[0] = 1.0;
        let spec = fft_real(&sig);
        for c in spec {
            assert!((c.re - 1.0).abs() < 1e-12 && c.im.abs() < 1e-12);
        }
    }

    #[test]
    fn pure_tone_peaks_at_its_bin() {
        let n = 256;
        let k0 = 19;
        let sig: Vec<f64> = (0..n)
            .map(|t| (2.0 * PI * k0 as f64 * t as f64 / n as f64).cos())
            .collect();
        let spec = fft_real(&sig);
        let argmax = (0..n / 2)
            .max_by(|&a, &b| spec[a].norm().total_cmp(&spec[b].norm()))
            .unwrap();
        assert_eq!(argmax, k0);
    }
}
