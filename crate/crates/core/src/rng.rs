//! Seeded, platform-independent random numbers.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::num;
use crate::symlin::{Mat, SymMat};

pub struct Rng {
    inner: ChaCha8Rng,
    spare: Option<f64>,
}

impl Rng {
    pub fn seeded(seed: u64) -> Self {
        Rng {
            inner: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Uniform on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.inner.next_u64() % n as u64) as usize
    }

    /// Standard normal via Box-Muller.
    pub fn normal(&mut self) -> f64 {
        if let Some(v) = self.spare.take() {
            return v;
        }
        let u1 = loop {
            let u = self.uniform();
            if u > 0.0 {
                break u;
            }
        };
        let u2 = self.uniform();
        let r = num::sqrt(-2.0 * num::ln(u1));
        let t = 2.0 * core::f64::consts::PI * u2;
        self.spare = Some(r * libm::sin(t));
        r * num::cos(t)
    }

    pub fn normal_vec(&mut self, n: usize) -> alloc::vec::Vec<f64> {
        (0..n).map(|_| self.normal()).collect()
    }

    pub fn unit_vec(&mut self, n: usize) -> alloc::vec::Vec<f64> {
        loop {
            let mut v = self.normal_vec(n);
            let nv = num::norm2(&v);
            if nv > 1e-12 {
                v.iter_mut().for_each(|x| *x /= nv);
                return v;
            }
        }
    }

    /// Symmetric matrix with i.i.d. standard normal upper triangle.
    pub fn sym(&mut self, m: usize) -> SymMat {
        let mut a = Mat::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let v = self.normal();
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        SymMat::from_mat_unchecked(a)
    }

    /// Haar-ish random orthogonal matrix (Gram-Schmidt of a Gaussian matrix).
    pub fn orthogonal(&mut self, m: usize) -> Mat {
        let mut q = Mat::zeros(m, m);
        let mut j = 0;
        while j < m {
            let mut v = self.normal_vec(m);
            for k in (0..j).chain(0..j) {
                let c: f64 = (0..m).map(|i| q[(i, k)] * v[i]).sum();
                for (i, vi) in v.iter_mut().enumerate() {
                    *vi -= c * q[(i, k)];
                }
            }
            let nv = num::norm2(&v);
            if nv < 1e-8 {
                continue;
            }
            for (i, vi) in v.iter().enumerate() {
                q[(i, j)] = vi / nv;
            }
            j += 1;
        }
        q
    }
}
