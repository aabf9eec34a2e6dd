//! Iterative radix-2 complex FFT in `f64`.

use std::f64::consts::PI;

/// In-place forward DFT `X[k] = sum_n x[n] e^{-2 pi i k n / N}`.
/// `re.len()` must be a power of two and equal `im.len()`.
pub fn fft_in_place(re: &mut [f64], im: &mut [f64]) {
    let n = re.len();
    assert_eq!(n, im.len(), "real and imaginary parts differ in length");
    assert!(n.is_power_of_two(), "FFT size {n} is not a power of two");
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) };
        if j > i {
            re.swap(i, j);
            im.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let ang = -2.0 * PI / len as f64;
        let half = len / 2;
        let twiddles: Vec<(f64, f64)> = (0..half).map(|k| ((ang * k as f64).cos(), (ang * k as f64).sin())).collect();
        for start in (0..n).step_by(len) {
            for (k, &(wr, wi)) in twiddles.iter().enumerate() {
                let (a, b) = (start + k, start + k + half);
                let tr = re[b] * wr - im[b] * wi;
                let ti = re[b] * wi + im[b] * wr;
                re[b] = re[a] - tr;
                im[b] = im[a] - ti;
                re[a] += tr;
                im[a] += ti;
            }
        }
        len *= 2;
    }
}

/// Magnitudes of bins `0..=N/2` of a real signal.
pub fn rfft_magnitude(x: &[f64]) -> Vec<f64> {
    let mut re = x.to_vec();
    let mut im = vec![0.0; x.len()];
    fft_in_place(&mut re, &mut im);
    (0..=x.len() / 2).map(|k| re[k].hypot(im[k])).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::GaussianStream;

    #[test]
    fn matches_naive_dft() {
        let g = GaussianStream::new(4);
        for n in [1usize, 2, 8, 64] {
            let x: Vec<f64> = (0..n).map(|i| g.normal(i as u64)).collect();
            let mut re = x.clone();
            let mut im = vec![0.0; n];
            fft_in_place(&mut re, &mut im);
            for k in 0..n {
                let (mut sr, mut si) = (0.0, 0.0);
                for (j, &v) in x.iter().enumerate() {
                    let a = -2.0 * PI * (k * j) as f64 / n as f64;
                    sr += v * a.cos();
                    si += v * a.sin();
                }
                assert!((re[k] - sr).abs() < 1e-9 && (im[k] - si).abs() < 1e-9, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn impulse_has_flat_spectrum() {
        let mut x = vec![0.0; 16];
        x[0] = 1.0;
        assert!(rfft_magnitude(&x).iter().all(|&m| (m - 1.0).abs() < 1e-12));
    }
}
