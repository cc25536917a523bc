//! Real banded matrices and their LU factorization with partial pivoting.
//!
//! Every linear operator in this crate is banded once complex fields are
//! split into interleaved `(re, im)` pairs: the radial Laplacian is
//! tridiagonal, and its 2x2 real-block form has half-bandwidth 2 or 3.

use crate::error::{Error, Result};

/// Square band matrix with `kl` sub- and `ku` super-diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    // row-major, row i holds columns i-kl ..= i+ku
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        BandMatrix {
            n,
            kl,
            ku,
            data: vec![0.0; n * (kl + ku + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn lower(&self) -> usize {
        self.kl
    }

    pub fn upper(&self) -> usize {
        self.ku
    }

    #[inline]
    fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.kl >= i && j <= i + self.ku
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i < self.n && j < self.n && self.in_band(i, j) {
            self.data[i * (self.kl + self.ku + 1) + j + self.kl - i]
        } else {
            0.0
        }
    }

    /// Panics if `(i, j)` lies outside the band.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(i < self.n && j < self.n && self.in_band(i, j), "({i}, {j}) outside band");
        let w = self.kl + self.ku + 1;
        self.data[i * w + j + self.kl - i] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(i < self.n && j < self.n && self.in_band(i, j), "({i}, {j}) outside band");
        let w = self.kl + self.ku + 1;
        self.data[i * w + j + self.kl - i] += v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let w = self.kl + self.ku + 1;
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi)
                    .map(|j| self.data[i * w + j + self.kl - i] * x[j])
                    .sum()
            })
            .collect()
    }

    pub fn factor(&self) -> Result<BandLu> {
        BandLu::new(self)
    }
}

/// LU factors `P A = L U` of a band matrix. `U` gains `kl` extra
/// super-diagonals of fill from row interchanges.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    // width of stored rows: columns i-kl ..= i+kl+ku
    width: usize,
    rows: Vec<f64>,
    piv: Vec<usize>,
}

impl BandLu {
    pub fn new(a: &BandMatrix) -> Result<Self> {
        let n = a.n;
        let kl = a.kl;
        let ku = a.ku;
        let width = 2 * kl + ku + 1;
        let mut rows = vec![0.0; n * width];
        for i in 0..n {
            let lo = i.saturating_sub(kl);
            let hi = (i + ku).min(n.saturating_sub(1));
            for j in lo..=hi {
                rows[i * width + j + kl - i] = a.get(i, j);
            }
        }
        let idx = |i: usize, j: usize| i * width + j + kl - i;
        let mut piv = vec![0; n];
        let scale = rows.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = rows[idx(k, k)].abs();
            for i in k + 1..=last_row {
                let v = rows[idx(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            piv[k] = p;
            if best == 0.0 || best <= scale * f64::EPSILON * 1e-6 {
                return Err(Error::SingularMatrix(k));
            }
            let last_col = (k + kl + ku).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    rows.swap(idx(k, j), idx(p, j));
                }
            }
            let pivot = rows[idx(k, k)];
            for i in k + 1..=last_row {
                let l = rows[idx(i, k)] / pivot;
                rows[idx(i, k)] = l;
                if l != 0.0 {
                    for j in k + 1..=last_col {
                        rows[idx(i, j)] -= l * rows[idx(k, j)];
                    }
                }
            }
        }
        Ok(BandLu {
            n,
            kl,
            width,
            rows,
            piv,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let kl = self.kl;
        let w = self.width;
        let idx = |i: usize, j: usize| i * w + j + kl - i;
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                for i in k + 1..=(k + kl).min(n - 1) {
                    b[i] -= self.rows[idx(i, k)] * bk;
                }
            }
        }
        let ku_fill = w - kl - 1;
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..=(i + ku_fill).min(n - 1) {
                s -= self.rows[idx(i, j)] * b[j];
            }
            b[i] = s / self.rows[idx(i, i)];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_band(n: usize, kl: usize, ku: usize, rng: &mut ChaCha8Rng) -> BandMatrix {
        let mut a = BandMatrix::zeros(n, kl, ku);
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                a.set(i, j, rng.gen_range(-1.0..1.0));
            }
        }
        a
    }

    #[test]
    fn solves_random_band_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(n, kl, ku) in &[(1, 0, 0), (5, 1, 1), (40, 2, 2), (37, 3, 3), (50, 1, 3), (30, 4, 0)] {
            let a = random_band(n, kl, ku, &mut rng);
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b = a.matvec(&x);
            let lu = a.factor().unwrap();
            let y = lu.solve(&b);
            let err = x.iter().zip(&y).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
            assert!(err < 1e-8, "n={n} kl={kl} ku={ku} err={err}");
        }
    }

    #[test]
    fn pivoting_handles_zero_diagonal() {
        // [[0, 1], [1, 0]] needs a row swap
        let mut a = BandMatrix::zeros(2, 1, 1);
        a.set(0, 1, 1.0);
        a.set(1, 0, 1.0);
        let x = a.factor().unwrap().solve(&[3.0, 4.0]);
        assert_eq!(x, vec![4.0, 3.0]);
    }

    #[test]
    fn singular_is_reported() {
        let mut a = BandMatrix::zeros(3, 1, 1);
        a.set(0, 0, 1.0);
        a.set(1, 1, 0.0);
        a.set(2, 2, 1.0);
        assert!(matches!(a.factor(), Err(Error::SingularMatrix(1))));
    }

    #[test]
    fn compares_with_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 25;
        let a = random_band(n, 2, 3, &mut rng);
        let dense = nalgebra::DMatrix::from_fn(n, n, |i, j| a.get(i, j));
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let xd = dense.lu().solve(&nalgebra::DVector::from_vec(b.clone())).unwrap();
        let x = a.factor().unwrap().solve(&b);
        for i in 0..n {
            assert!((x[i] - xd[i]).abs() < 1e-9);
        }
    }
}
