//! Complex FFT for arbitrary lengths.
//!
//! Power-of-two sizes use an iterative radix-2 transform; every other size
//! goes through Bluestein's chirp-z reformulation on a padded power-of-two
//! convolution. The forward transform is unnormalized, the inverse divides
//! by the length.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::Complex;
#[allow(unused_imports)] // inherent methods take over when std is linked
use num_traits::Float;

type C64 = Complex<f64>;

#[derive(Debug, Clone)]
pub(crate) struct Fft {
    len: usize,
    kind: Kind,
}

#[derive(Debug, Clone)]
enum Kind {
    Radix2(Radix2),
    Bluestein {
        inner: Radix2,
        chirp: Vec<C64>,
        kernel_spectrum: Vec<C64>,
    },
}

#[derive(Debug, Clone)]
struct Radix2 {
    len: usize,
    twiddles: Vec<C64>,
}

fn unit(angle: f64) -> C64 {
    C64::new(angle.cos(), angle.sin())
}

impl Radix2 {
    fn new(len: usize) -> Self {
        debug_assert!(len.is_power_of_two());
        let twiddles = (0..len / 2).map(|k| unit(-2.0 * PI * k as f64 / len as f64)).collect();
        Self { len, twiddles }
    }

    fn forward(&self, buf: &mut [C64]) {
        let n = self.len;
        if n <= 1 {
            return;
        }
        let bits = n.trailing_zeros();
        for i in 0..n {
            let j = i.reverse_bits() >> (usize::BITS - bits);
            if j > i {
                buf.swap(i, j);
            }
        }
        let mut size = 2;
        while size <= n {
            let half = size / 2;
            let stride = n / size;
            for start in (0..n).step_by(size) {
                for k in 0..half {
                    let w = self.twiddles[k * stride];
                    let a = buf[start + k];
                    let b = buf[start + k + half] * w;
                    buf[start + k] = a + b;
                    buf[start + k + half] = a - b;
                }
            }
            size *= 2;
        }
    }

    fn inverse_unscaled(&self, buf: &mut [C64]) {
        for v in buf.iter_mut() {
            *v = v.conj();
        }
        self.forward(buf);
        for v in buf.iter_mut() {
            *v = v.conj();
        }
    }
}

impl Fft {
    pub(crate) fn new(len: usize) -> Self {
        assert!(len > 0, "FFT length must be positive");
        if len.is_power_of_two() {
            return Self {
                len,
                kind: Kind::Radix2(Radix2::new(len)),
            };
        }
        let conv_len = (2 * len - 1).next_power_of_two();
        let inner = Radix2::new(conv_len);
        // k^2 is reduced modulo 2n before scaling so large indices keep full precision.
        let two_n = 2 * len as u128;
        let chirp: Vec<C64> = (0..len)
            .map(|k| {
                let k2 = (k as u128 * k as u128) % two_n;
                unit(-PI * k2 as f64 / len as f64)
            })
            .collect();
        let mut kernel = vec![C64::new(0.0, 0.0); conv_len];
        kernel[0] = chirp[0].conj();
        for k in 1..len {
            kernel[k] = chirp[k].conj();
            kernel[conv_len - k] = chirp[k].conj();
        }
        inner.forward(&mut kernel);
        Self {
            len,
            kind: Kind::Bluestein {
                inner,
                chirp,
                kernel_spectrum: kernel,
            },
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.len
    }

    pub(crate) fn forward(&self, buf: &mut [C64]) {
        assert_eq!(buf.len(), self.len);
        match &self.kind {
            Kind::Radix2(r) => r.forward(buf),
            Kind::Bluestein {
                inner,
                chirp,
                kernel_spectrum,
            } => {
                let m = inner.len;
                let mut work = vec![C64::new(0.0, 0.0); m];
                for (k, (w, x)) in work.iter_mut().zip(buf.iter()).enumerate() {
                    *w = *x * chirp[k];
                }
                inner.forward(&mut work);
                for (w, k) in work.iter_mut().zip(kernel_spectrum) {
                    *w *= k;
                }
                inner.inverse_unscaled(&mut work);
                let scale = 1.0 / m as f64;
                for (k, out) in buf.iter_mut().enumerate() {
                    *out = work[k] * chirp[k] * scale;
                }
            }
        }
    }

    pub(crate) fn inverse(&self, buf: &mut [C64]) {
        for v in buf.iter_mut() {
            *v = v.conj();
        }
        self.forward(buf);
        let scale = 1.0 / self.len as f64;
        for v in buf.iter_mut() {
            *v = v.conj() * scale;
        }
    }
}
