//! Conservative finite-volume discretization of the radial Laplacian
//! `u'' + (N-1)/r u'` with zero flux at the origin and a Dirichlet wall at
//! `rmax` (ghost value `u_{M+1} = -u_M`).
//!
//! Written as `-Lap = C^{-1} S` with `C` the diagonal of shell measures and
//! `S` a symmetric tridiagonal stiffness matrix, so the operator is
//! self-adjoint in the node-weighted inner product.

use num_complex::Complex64;

use crate::banded::BandMatrix;
use crate::error::{Error, Result};
use crate::field::RealRadialField;
use crate::grid::RadialGrid;
use crate::params::DomainKind;

/// Discrete `-Lap` on one grid.
#[derive(Debug, Clone)]
pub struct RadialLaplacian {
    h2: f64,
    // face coefficients r^{N-1}, faces 0..=M
    face: Vec<f64>,
    cell: Vec<f64>,
    diag: Vec<f64>,
    off: Vec<f64>,
}

pub fn assemble_laplacian(grid: &RadialGrid) -> RadialLaplacian {
    let m = grid.points();
    let h2 = grid.spacing() * grid.spacing();
    let face = grid.face().to_vec();
    let mut diag = vec![0.0; m];
    let mut off = vec![0.0; m - 1];
    for i in 0..m {
        diag[i] = (face[i] + face[i + 1]) / h2;
        if i + 1 < m {
            off[i] = -face[i + 1] / h2;
        }
    }
    // ghost u_{M+1} = -u_M doubles the wall flux
    diag[m - 1] += face[m] / h2;
    RadialLaplacian {
        h2,
        face,
        cell: grid.cell().to_vec(),
        diag,
        off,
    }
}

impl RadialLaplacian {
    pub fn points(&self) -> usize {
        self.cell.len()
    }

    /// Diagonal of the symmetric stiffness matrix `S`.
    pub fn stiffness_diag(&self) -> &[f64] {
        &self.diag
    }

    /// Off-diagonal of `S` (entry `(i, i+1)`).
    pub fn stiffness_off(&self) -> &[f64] {
        &self.off
    }

    /// Shell measures `C` (node weights divided by `|S^{N-1}| h`).
    pub fn mass(&self) -> &[f64] {
        &self.cell
    }

    #[inline]
    fn flux_form(&self, u: &[f64], i: usize) -> f64 {
        let m = u.len();
        let right = if i + 1 < m {
            self.face[i + 1] * (u[i + 1] - u[i])
        } else {
            self.face[m] * (-2.0 * u[i])
        };
        let left = if i > 0 {
            self.face[i] * (u[i] - u[i - 1])
        } else {
            0.0
        };
        -(right - left) / (self.h2 * self.cell[i])
    }

    /// `-Lap u` with the boundary conditions built in.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        assert_eq!(u.len(), self.points());
        (0..u.len()).map(|i| self.flux_form(u, i)).collect()
    }

    pub fn apply_complex(&self, u: &[Complex64]) -> Vec<Complex64> {
        let re: Vec<f64> = u.iter().map(|z| z.re).collect();
        let im: Vec<f64> = u.iter().map(|z| z.im).collect();
        self.apply(&re)
            .into_iter()
            .zip(self.apply(&im))
            .map(|(a, b)| Complex64::new(a, b))
            .collect()
    }

    pub fn apply_field(&self, u: &RealRadialField) -> RealRadialField {
        RealRadialField::with_key(u.grid_key(), self.apply(u.values()))
            .expect("length checked by apply")
    }

    /// Raw interior stencil: `-Lap u` at nodes `1..M-1` (0-based) using only
    /// sampled neighbours, no boundary condition. Entries 0 and M-1 are NaN.
    pub fn apply_raw(&self, u: &[f64]) -> Vec<f64> {
        let m = u.len();
        assert_eq!(m, self.points());
        let mut out = vec![f64::NAN; m];
        for i in 1..m - 1 {
            out[i] = self.flux_form(u, i);
        }
        out
    }

    /// Band form of `-Lap + diag(shift)` acting on node values.
    pub fn band(&self, shift: &[f64]) -> BandMatrix {
        let m = self.points();
        let mut a = BandMatrix::zeros(m, 1, 1);
        for i in 0..m {
            a.set(i, i, self.diag[i] / self.cell[i] + shift[i]);
            if i + 1 < m {
                a.set(i, i + 1, self.off[i] / self.cell[i]);
                a.set(i + 1, i, self.off[i] / self.cell[i + 1]);
            }
        }
        a
    }

    /// Symmetric tridiagonal `S + C diag(potential)`, returned as `(diag, off)`.
    pub fn symmetric_with_potential(&self, potential: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let diag = self
            .diag
            .iter()
            .zip(&self.cell)
            .zip(potential)
            .map(|((d, c), p)| d + c * p)
            .collect();
        (diag, self.off.clone())
    }
}

fn tridiag(diag: &[f64], off: &[f64]) -> BandMatrix {
    let m = diag.len();
    let mut a = BandMatrix::zeros(m, 1, 1);
    for i in 0..m {
        a.set(i, i, diag[i]);
        if i + 1 < m {
            a.set(i, i + 1, off[i]);
            a.set(i + 1, i, off[i]);
        }
    }
    a
}

/// First Dirichlet eigenvalue of the discrete `-Lap` on the unit ball, by
/// inverse power iteration to relative tolerance `1e-10`.
pub fn dirichlet_lambda1(grid: &RadialGrid) -> Result<f64> {
    if grid.domain() != DomainKind::UnitBall {
        return Err(Error::WrongDomain(
            "the Dirichlet eigenvalue is defined for the unit ball".into(),
        ));
    }
    let lap = assemble_laplacian(grid);
    let lu = tridiag(&lap.diag, &lap.off).factor()?;
    let mass = lap.mass();
    let mut x = vec![1.0; lap.points()];
    let mut lambda = f64::INFINITY;
    for _ in 0..1000 {
        let mut y: Vec<f64> = x.iter().zip(mass).map(|(a, c)| a * c).collect();
        lu.solve_in_place(&mut y);
        let sy = lap.apply(&y);
        let num: f64 = y.iter().zip(&sy).zip(mass).map(|((a, b), c)| a * b * c).sum();
        let den: f64 = y.iter().zip(mass).map(|(a, c)| a * a * c).sum();
        let next = num / den;
        let scale = den.sqrt();
        x = y.into_iter().map(|v| v / scale).collect();
        let converged = (next - lambda).abs() <= 1e-10 * next.abs() * 1e-2;
        lambda = next;
        if converged {
            return Ok(lambda);
        }
    }
    Err(Error::NonConvergence {
        iterations: 1000,
        residual: f64::NAN,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    // j_{0,1}, first zero of the Bessel function J_0
    const J01: f64 = 2.404_825_557_695_773;

    #[test]
    fn exact_on_quadratics() {
        for dim in 1..=3 {
            for &m in &[50, 100, 200] {
                let g = RadialGrid::new(DomainKind::UnitBall, dim, m, 1.0).unwrap();
                let lap = assemble_laplacian(&g);
                let u: Vec<f64> = g.nodes().iter().map(|r| 1.0 - r * r).collect();
                let lu = lap.apply(&u);
                for (i, v) in lu.iter().enumerate().take(m - 1) {
                    assert!(
                        (v - 2.0 * dim as f64).abs() < 1e-9,
                        "N={dim} M={m} node {i}: {v}"
                    );
                }
            }
        }
    }

    #[test]
    fn self_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for dim in 1..=3 {
            let g = RadialGrid::new(DomainKind::WholeSpace, dim, 120, 6.0).unwrap();
            let lap = assemble_laplacian(&g);
            let w = g.weights();
            for _ in 0..5 {
                let u: Vec<f64> = (0..120).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let v: Vec<f64> = (0..120).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let a: f64 = lap.apply(&u).iter().zip(&v).zip(w).map(|((x, y), w)| x * y * w).sum();
                let b: f64 = lap.apply(&v).iter().zip(&u).zip(w).map(|((x, y), w)| x * y * w).sum();
                let nu: f64 = u.iter().zip(w).map(|(x, w)| x * x * w).sum::<f64>().sqrt();
                let nv: f64 = v.iter().zip(w).map(|(x, w)| x * x * w).sum::<f64>().sqrt();
                assert!((a - b).abs() <= 1e-12 * nu * nv * lap.diag[0].abs().max(1.0));
            }
        }
    }

    #[test]
    fn positive_definite() {
        let g = RadialGrid::new(DomainKind::UnitBall, 2, 40, 1.0).unwrap();
        let lap = assemble_laplacian(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let u: Vec<f64> = (0..40).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let q: f64 = lap.apply(&u).iter().zip(&u).zip(g.weights()).map(|((a, b), w)| a * b * w).sum();
            assert!(q > 0.0);
        }
    }

    #[test]
    fn band_matches_apply() {
        let g = RadialGrid::new(DomainKind::UnitBall, 3, 30, 1.0).unwrap();
        let lap = assemble_laplacian(&g);
        let u: Vec<f64> = g.nodes().iter().map(|r| (3.0 * r).sin() + 0.2).collect();
        let shift = vec![0.5; 30];
        let a = lap.band(&shift).matvec(&u);
        let b = lap.apply(&u);
        for i in 0..30 {
            assert!((a[i] - b[i] - 0.5 * u[i]).abs() < 1e-9 * (1.0 + b[i].abs()));
        }
    }

    fn eig_errors(dim: usize, exact: f64) -> Vec<f64> {
        [50, 100, 200, 400]
            .iter()
            .map(|&m| {
                let g = RadialGrid::new(DomainKind::UnitBall, dim, m, 1.0).unwrap();
                (dirichlet_lambda1(&g).unwrap() - exact).abs()
            })
            .collect()
    }

    #[test]
    fn dirichlet_eigenvalues_converge_at_second_order() {
        for (dim, exact) in [(1, PI * PI / 4.0), (2, J01 * J01), (3, PI * PI)] {
            let errs = eig_errors(dim, exact);
            assert!(errs[0] < 0.05 * exact, "N={dim} {errs:?}");
            for w in errs.windows(2) {
                let ratio = w[0] / w[1];
                assert!((3.5..=4.5).contains(&ratio), "N={dim} ratio {ratio} {errs:?}");
            }
        }
    }

    #[test]
    fn dirichlet_needs_ball() {
        let g = RadialGrid::new(DomainKind::WholeSpace, 1, 50, 5.0).unwrap();
        assert!(matches!(dirichlet_lambda1(&g), Err(Error::WrongDomain(_))));
    }
}
