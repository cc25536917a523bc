//! Symmetric tridiagonal pencils `A x = mu B x` with `B` diagonal and positive.
//!
//! Eigenvalues are located by bisection on the inertia of `A - sigma B`
//! (Sylvester's law for definite pencils); eigenvectors come from
//! shift-invert iteration at the located shift with full B-orthogonal
//! reorthogonalization against previously accepted vectors. A dense
//! `nalgebra` path is kept for small problems as an independent check.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::banded::BandMatrix;
use crate::error::{Error, Result};

/// Largest problem size accepted by the dense oracle.
pub const DENSE_LIMIT: usize = 512;

#[derive(Debug, Clone)]
pub struct TridiagPencil {
    diag: Vec<f64>,
    off: Vec<f64>,
    mass: Vec<f64>,
}

/// One eigenpair of a pencil; `vector` is B-normalized.
#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub value: f64,
    pub vector: Vec<f64>,
}

impl TridiagPencil {
    pub fn new(diag: Vec<f64>, off: Vec<f64>, mass: Vec<f64>) -> Result<Self> {
        let n = diag.len();
        if n == 0 || off.len() + 1 != n || mass.len() != n {
            return Err(Error::BadParameter("inconsistent pencil dimensions".into()));
        }
        if mass.iter().any(|&b| !(b > 0.0 && b.is_finite())) {
            return Err(Error::BadParameter("pencil mass must be positive".into()));
        }
        Ok(TridiagPencil { diag, off, mass })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Number of eigenvalues strictly below `sigma`.
    pub fn count_below(&self, sigma: f64) -> usize {
        let n = self.dim();
        let tiny = f64::MIN_POSITIVE.sqrt();
        let mut count = 0;
        let mut d = 0.0;
        for i in 0..n {
            let mut di = self.diag[i] - sigma * self.mass[i];
            if i > 0 {
                di -= self.off[i - 1] * self.off[i - 1] / d;
            }
            if di == 0.0 {
                di = -tiny;
            }
            if di < 0.0 {
                count += 1;
            }
            d = di;
        }
        count
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.dim();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let c = self.diag[i] / self.mass[i];
            let mut r = 0.0;
            if i > 0 {
                r += self.off[i - 1].abs() / (self.mass[i - 1] * self.mass[i]).sqrt();
            }
            if i + 1 < n {
                r += self.off[i].abs() / (self.mass[i] * self.mass[i + 1]).sqrt();
            }
            lo = lo.min(c - r);
            hi = hi.max(c + r);
        }
        let pad = 1e-12 * lo.abs().max(hi.abs()).max(1.0);
        (lo - pad, hi + pad)
    }

    /// The `j`-th smallest eigenvalue (0-based), to working precision.
    pub fn eigenvalue(&self, j: usize) -> Result<f64> {
        if j >= self.dim() {
            return Err(Error::BadParameter(format!(
                "eigenvalue index {j} exceeds dimension {}",
                self.dim()
            )));
        }
        let (mut lo, mut hi) = self.gershgorin();
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if hi - lo <= 4.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
                break;
            }
            if self.count_below(mid) > j {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    fn shifted(&self, sigma: f64) -> BandMatrix {
        let n = self.dim();
        let mut a = BandMatrix::zeros(n, 1, 1);
        for i in 0..n {
            a.set(i, i, self.diag[i] - sigma * self.mass[i]);
            if i + 1 < n {
                a.set(i, i + 1, self.off[i]);
                a.set(i + 1, i, self.off[i]);
            }
        }
        a
    }

    pub fn apply_a(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.off[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.off[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    fn b_dot(&self, x: &[f64], y: &[f64]) -> f64 {
        self.mass.iter().zip(x).zip(y).map(|((b, a), c)| b * a * c).sum()
    }

    /// Relative residual `||A x - mu B x||_{B^{-1}} / ||x||_B`.
    pub fn residual(&self, mu: f64, x: &[f64]) -> f64 {
        let ax = self.apply_a(x);
        let num: f64 = ax
            .iter()
            .zip(x)
            .zip(&self.mass)
            .map(|((a, v), b)| {
                let r = a - mu * b * v;
                r * r / b
            })
            .sum();
        num.sqrt() / self.b_dot(x, x).sqrt()
    }

    /// Eigenpairs with indices `first..first+count` (ascending), B-orthonormal.
    pub fn eigenpairs(&self, first: usize, count: usize) -> Result<Vec<Eigenpair>> {
        let n = self.dim();
        if first + count > n {
            return Err(Error::BadParameter(format!(
                "requested eigenpairs {}..{} of a {n}-dimensional problem",
                first,
                first + count
            )));
        }
        let mut out: Vec<Eigenpair> = Vec::with_capacity(count);
        for j in first..first + count {
            let mu = self.eigenvalue(j)?;
            let vector = self.inverse_iteration(mu, j, &out)?;
            let ax = self.apply_a(&vector);
            let value = vector.iter().zip(&ax).map(|(a, b)| a * b).sum::<f64>();
            out.push(Eigenpair { value, vector });
        }
        Ok(out)
    }

    fn inverse_iteration(&self, mu: f64, j: usize, previous: &[Eigenpair]) -> Result<Vec<f64>> {
        let n = self.dim();
        let scale = mu.abs().max(1.0);
        let mut sigma = mu;
        let mut lu = None;
        for attempt in 0..8 {
            match self.shifted(sigma).factor() {
                Ok(f) => {
                    lu = Some(f);
                    break;
                }
                Err(_) => sigma = mu + scale * 1e-14 * 10f64.powi(attempt),
            }
        }
        let lu = lu.ok_or(Error::SingularMatrix(j))?;
        let mut x: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.5 * ((i as f64 + 1.0) * (j as f64 + 1.3)).sin())
            .collect();
        let mut last_res = f64::INFINITY;
        for it in 0..12 {
            let mut y: Vec<f64> = x.iter().zip(&self.mass).map(|(a, b)| a * b).collect();
            lu.solve_in_place(&mut y);
            for _ in 0..2 {
                for p in previous {
                    let c = self.b_dot(&y, &p.vector);
                    for (yi, pi) in y.iter_mut().zip(&p.vector) {
                        *yi -= c * pi;
                    }
                }
            }
            let nrm = self.b_dot(&y, &y).sqrt();
            if !(nrm.is_finite() && nrm > 0.0) {
                return Err(Error::SingularMatrix(j));
            }
            x = y.into_iter().map(|v| v / nrm).collect();
            let res = self.residual(mu, &x);
            if it >= 2 && (res < 1e-13 * scale || res >= 0.5 * last_res) {
                break;
            }
            last_res = res;
        }
        // sign: largest-magnitude entry positive
        let imax = (0..n)
            .max_by(|&a, &b| x[a].abs().total_cmp(&x[b].abs()))
            .unwrap_or(0);
        if x[imax] < 0.0 {
            x.iter_mut().for_each(|v| *v = -*v);
        }
        Ok(x)
    }

    /// Dense eigenvalues of `B^{-1/2} A B^{-1/2}` (ascending), for `n <= DENSE_LIMIT`.
    pub fn dense_eigenvalues(&self) -> Result<Vec<f64>> {
        let n = self.dim();
        check_dense(n)?;
        let s: Vec<f64> = self.mass.iter().map(|b| 1.0 / b.sqrt()).collect();
        let m = DMatrix::from_fn(n, n, |i, j| {
            let a = if i == j {
                self.diag[i]
            } else if i + 1 == j {
                self.off[i]
            } else if j + 1 == i {
                self.off[j]
            } else {
                0.0
            };
            a * s[i] * s[j]
        });
        let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        Ok(ev)
    }

    /// Dense eigenvalues of `B^{1/2} A^{-1} B^{1/2}` (descending), i.e. the
    /// reciprocals `1/mu`. Well conditioned when `B` has tiny entries; needs
    /// `A` positive definite.
    pub fn dense_inverse_eigenvalues(&self) -> Result<Vec<f64>> {
        let n = self.dim();
        check_dense(n)?;
        let a = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                self.diag[i]
            } else if i + 1 == j {
                self.off[i]
            } else if j + 1 == i {
                self.off[j]
            } else {
                0.0
            }
        });
        let chol = a
            .cholesky()
            .ok_or_else(|| Error::BadParameter("A is not positive definite".into()))?;
        let ainv = chol.inverse();
        let s: Vec<f64> = self.mass.iter().map(|b| b.sqrt()).collect();
        let c = DMatrix::from_fn(n, n, |i, j| s[i] * ainv[(i, j)] * s[j]);
        let mut ev: Vec<f64> = SymmetricEigen::new(c).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        Ok(ev)
    }
}

fn check_dense(n: usize) -> Result<()> {
    if n > DENSE_LIMIT {
        return Err(Error::BadParameter(format!(
            "dense oracle limited to {DENSE_LIMIT} points, got {n}"
        )));
    }
    Ok(())
}
