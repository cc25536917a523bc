//! Linearization of the ground-state equation at `U`.
//!
//! `L v = L+ Re v + i L- Im v` with
//! `L+ = rho - Lap - (alpha+1) U^alpha` and `L- = rho - Lap - U^alpha`, and the
//! compact operator `K = (alpha+1)(rho - Lap)^{-1} U^alpha`.

use num_complex::Complex64;
use serde::Serialize;

use crate::banded::BandLu;
use crate::eigen::{Eigenpair, TridiagPencil};
use crate::error::{Error, Result};
use crate::field::{weighted_dot, weighted_norm, ComplexRadialField, RealRadialField};
use crate::grid::RadialGrid;
use crate::ground_state::GroundState;
use crate::laplacian::{assemble_laplacian, RadialLaplacian};
use crate::params::{sphere_measure, DomainKind};

/// Singular values below this count as numerical kernel.
pub const KERNEL_THRESHOLD: f64 = 1e-6;

/// Schrodinger-type operator `rho - Lap + potential` on one grid.
#[derive(Debug, Clone)]
pub struct RadialOperator {
    grid: RadialGrid,
    lap: RadialLaplacian,
    // rho plus the multiplicative part
    potential: Vec<f64>,
}

impl RadialOperator {
    fn new(grid: &RadialGrid, potential: Vec<f64>) -> Self {
        RadialOperator {
            grid: grid.clone(),
            lap: assemble_laplacian(grid),
            potential,
        }
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    /// Total zeroth-order coefficient (including `rho`).
    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.lap
            .apply(v)
            .into_iter()
            .zip(v)
            .zip(&self.potential)
            .map(|((l, x), p)| l + p * x)
            .collect()
    }

    pub fn apply_field(&self, v: &RealRadialField) -> Result<RealRadialField> {
        if v.grid_key() != self.grid.key() {
            return Err(Error::FieldGridMismatch);
        }
        RealRadialField::new(&self.grid, self.apply(v.values()))
    }

    /// Raw stencil without boundary condition; entries 0 and M-1 are NaN.
    pub fn apply_raw(&self, v: &[f64]) -> Vec<f64> {
        self.lap
            .apply_raw(v)
            .into_iter()
            .zip(v)
            .zip(&self.potential)
            .map(|((l, x), p)| l + p * x)
            .collect()
    }

    /// Generalized symmetric pencil `(S + C diag(potential), C)`.
    pub fn pencil(&self) -> Result<TridiagPencil> {
        let (diag, off) = self.lap.symmetric_with_potential(&self.potential);
        TridiagPencil::new(diag, off, self.lap.mass().to_vec())
    }

    pub fn factor(&self) -> Result<BandLu> {
        self.lap.band(&self.potential).factor()
    }
}

fn check_ground(u: &GroundState) -> Result<()> {
    if u.u.grid_key() != u.grid.key() {
        return Err(Error::FieldGridMismatch);
    }
    Ok(())
}

pub fn assemble_l_plus(u: &GroundState) -> RadialOperator {
    let p = &u.params;
    let pot = u
        .values()
        .iter()
        .map(|v| p.rho - (p.alpha + 1.0) * v.abs().powf(p.alpha))
        .collect();
    RadialOperator::new(&u.grid, pot)
}

pub fn assemble_l_minus(u: &GroundState) -> RadialOperator {
    let p = &u.params;
    let pot = u
        .values()
        .iter()
        .map(|v| p.rho - v.abs().powf(p.alpha))
        .collect();
    RadialOperator::new(&u.grid, pot)
}

/// `L v = L+ Re v + i L- Im v`.
pub fn apply_l(v: &ComplexRadialField, u: &GroundState) -> Result<ComplexRadialField> {
    check_ground(u)?;
    if v.grid_key() != u.grid.key() {
        return Err(Error::FieldGridMismatch);
    }
    let re: Vec<f64> = v.values().iter().map(|z| z.re).collect();
    let im: Vec<f64> = v.values().iter().map(|z| z.im).collect();
    let a = assemble_l_plus(u).apply(&re);
    let b = assemble_l_minus(u).apply(&im);
    ComplexRadialField::new(
        &u.grid,
        a.into_iter().zip(b).map(|(x, y)| Complex64::new(x, y)).collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OperatorTag {
    K,
    LPlus,
    LMinus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Normalization {
    /// `sum w U^alpha phi^2 = 1`
    Sigma,
    /// `sum w phi^2 = 1`
    Weighted,
}

/// Eigenpairs of one operator. `K` values descend, `L+-` values ascend.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub operator: OperatorTag,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<RealRadialField>,
    pub normalization: Normalization,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `||A phi_j - lambda_j phi_j|| / ||phi_j||` for each pair, in the weighted norm.
    pub fn residuals(&self, u: &GroundState) -> Result<Vec<f64>> {
        let w = u.grid.weights();
        match self.operator {
            OperatorTag::LPlus | OperatorTag::LMinus => {
                let op = if self.operator == OperatorTag::LPlus {
                    assemble_l_plus(u)
                } else {
                    assemble_l_minus(u)
                };
                Ok(self
                    .eigenvalues
                    .iter()
                    .zip(&self.eigenvectors)
                    .map(|(l, phi)| {
                        let r: Vec<f64> = op
                            .apply(phi.values())
                            .iter()
                            .zip(phi.values())
                            .map(|(a, x)| a - l * x)
                            .collect();
                        weighted_norm(w, &r) / weighted_norm(w, phi.values())
                    })
                    .collect())
            }
            OperatorTag::K => {
                let op = ShiftedLaplacian::new(u)?;
                Ok(self
                    .eigenvalues
                    .iter()
                    .zip(&self.eigenvectors)
                    .map(|(l, phi)| {
                        let kphi = op.apply_k(phi.values());
                        let r: Vec<f64> = kphi.iter().zip(phi.values()).map(|(a, x)| a - l * x).collect();
                        weighted_norm(w, &r) / weighted_norm(w, phi.values())
                    })
                    .collect())
            }
        }
    }

    /// Largest deviation of the Gram matrix from the identity in the tagged product.
    pub fn orthonormality_defect(&self, u: &GroundState) -> f64 {
        let w = u.grid.weights();
        let weight: Vec<f64> = match self.normalization {
            Normalization::Weighted => w.to_vec(),
            Normalization::Sigma => w
                .iter()
                .zip(u.values())
                .map(|(w, v)| w * v.abs().powf(u.params.alpha))
                .collect(),
        };
        let mut worst: f64 = 0.0;
        for (i, a) in self.eigenvectors.iter().enumerate() {
            for (j, b) in self.eigenvectors.iter().enumerate().skip(i) {
                let g = weighted_dot(&weight, a.values(), b.values());
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }

    /// CSV with header `j,lambda`, `j` counted from 1.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("j,lambda\n");
        for (j, l) in self.eigenvalues.iter().enumerate() {
            s.push_str(&format!("{},{:.16e}\n", j + 1, l));
        }
        s
    }
}

/// `(rho - Lap)` with its factorization, used to apply `K`.
struct ShiftedLaplacian {
    lu: BandLu,
    sigma: Vec<f64>,
    alpha: f64,
}

impl ShiftedLaplacian {
    fn new(u: &GroundState) -> Result<Self> {
        let lap = assemble_laplacian(&u.grid);
        let lu = lap.band(&vec![u.params.rho; u.grid.points()]).factor()?;
        Ok(ShiftedLaplacian {
            lu,
            sigma: u.sigma(),
            alpha: u.params.alpha,
        })
    }

    fn apply_k(&self, v: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = v
            .iter()
            .zip(&self.sigma)
            .map(|(x, s)| (self.alpha + 1.0) * s * x)
            .collect();
        self.lu.solve_in_place(&mut y);
        y
    }
}

fn check_count(k: usize, grid: &RadialGrid) -> Result<()> {
    if k == 0 || k > grid.points() {
        return Err(Error::BadParameter(format!(
            "requested {k} eigenpairs on a grid with {} points",
            grid.points()
        )));
    }
    Ok(())
}

/// Pencil `(S + rho C, (alpha+1) C U^alpha)` whose eigenvalues are `1/lambda_j(K)`.
pub fn k_pencil(u: &GroundState) -> Result<TridiagPencil> {
    check_ground(u)?;
    let lap = assemble_laplacian(&u.grid);
    let (diag, off) = lap.symmetric_with_potential(&vec![u.params.rho; u.grid.points()]);
    let a = u.params.alpha;
    let mass = lap
        .mass()
        .iter()
        .zip(u.values())
        .map(|(c, v)| (a + 1.0) * c * v.abs().powf(a))
        .collect();
    TridiagPencil::new(diag, off, mass)
}

/// Top `k` eigenpairs of `K`, from the generalized problem
/// `(alpha+1) U^alpha phi = lambda (rho - Lap) phi`.
pub fn spectrum_k(u: &GroundState, k: usize) -> Result<Spectrum> {
    check_ground(u)?;
    check_count(k, &u.grid)?;
    let pencil = k_pencil(u)?;
    let pairs = pencil.eigenpairs(0, k)?;
    // B-normalized means sum C (alpha+1) U^alpha x^2 = 1; convert to the sigma product
    let scale = ((u.params.alpha + 1.0) / (sphere_measure(u.grid.dim()) * u.grid.spacing())).sqrt();
    pack(u, OperatorTag::K, Normalization::Sigma, pairs, scale, |mu| 1.0 / mu)
}

fn pack(
    u: &GroundState,
    operator: OperatorTag,
    normalization: Normalization,
    pairs: Vec<Eigenpair>,
    scale: f64,
    value: impl Fn(f64) -> f64,
) -> Result<Spectrum> {
    let mut eigenvalues = Vec::with_capacity(pairs.len());
    let mut eigenvectors = Vec::with_capacity(pairs.len());
    for p in pairs {
        eigenvalues.push(value(p.value));
        eigenvectors.push(RealRadialField::new(
            &u.grid,
            p.vector.into_iter().map(|x| x * scale).collect(),
        )?);
    }
    Ok(Spectrum {
        operator,
        eigenvalues,
        eigenvectors,
        normalization,
    })
}

fn bottom(u: &GroundState, op: RadialOperator, tag: OperatorTag, k: usize) -> Result<Spectrum> {
    check_ground(u)?;
    check_count(k, &u.grid)?;
    let pairs = op.pencil()?.eigenpairs(0, k)?;
    let scale = 1.0 / (sphere_measure(u.grid.dim()) * u.grid.spacing()).sqrt();
    pack(u, tag, Normalization::Weighted, pairs, scale, |mu| mu)
}

/// Lowest `k` eigenpairs of `L+`.
pub fn eigs_l_plus(u: &GroundState, k: usize) -> Result<Spectrum> {
    bottom(u, assemble_l_plus(u), OperatorTag::LPlus, k)
}

/// Lowest `k` eigenpairs of `L-`.
pub fn eigs_l_minus(u: &GroundState, k: usize) -> Result<Spectrum> {
    bottom(u, assemble_l_minus(u), OperatorTag::LMinus, k)
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelReport {
    /// Smallest `|lambda(L+)|`.
    pub sigma_min_lplus: f64,
    /// Eigenvalue of `L-` closest to zero.
    pub lminus_smallest: f64,
    /// Its eigenvector, weighted-normalized.
    #[serde(skip)]
    pub lminus_vector: RealRadialField,
    /// The two smallest singular values of the real-block `L`.
    pub singular_values: [f64; 2],
    /// sigma-alignment of the near-null direction with `iU`, in `[0, 1]`.
    pub kernel_alignment: f64,
    pub kernel_dim_estimate: usize,
    /// `||L- U|| / ||U||`.
    pub lminus_residual: f64,
}

/// Eigenpairs whose values straddle zero: the `before` pairs below 0 and
/// `after` pairs above.
fn near_zero(op: &RadialOperator, before: usize, after: usize) -> Result<(usize, Vec<Eigenpair>)> {
    let pencil = op.pencil()?;
    let n = pencil.dim();
    let c = pencil.count_below(0.0);
    let first = c.saturating_sub(before);
    let last = (c + after).min(n);
    Ok((first, pencil.eigenpairs(first, last - first)?))
}

/// Singular-value picture of `L` on `(Re v, Im v)`; since `L` is block
/// diagonal and self-adjoint, its singular values are `|lambda(L+)|` and
/// `|lambda(L-)|`.
pub fn kernel_diagnostics(u: &GroundState) -> Result<KernelReport> {
    check_ground(u)?;
    let lp = assemble_l_plus(u);
    let lm = assemble_l_minus(u);
    let count_kernel = |op: &RadialOperator| -> Result<usize> {
        let p = op.pencil()?;
        Ok(p.count_below(KERNEL_THRESHOLD) - p.count_below(-KERNEL_THRESHOLD))
    };
    let kernel_dim_estimate = count_kernel(&lp)? + count_kernel(&lm)?;

    let (_, plus) = near_zero(&lp, 1, 2)?;
    let (_, minus) = near_zero(&lm, 1, 2)?;
    let mut singular: Vec<(f64, bool, usize)> = plus
        .iter()
        .enumerate()
        .map(|(i, p)| (p.value.abs(), true, i))
        .chain(minus.iter().enumerate().map(|(i, p)| (p.value.abs(), false, i)))
        .collect();
    singular.sort_by(|a, b| a.0.total_cmp(&b.0));
    let sigma_min_lplus = plus.iter().map(|p| p.value.abs()).fold(f64::INFINITY, f64::min);
    let lm_best = minus
        .iter()
        .min_by(|a, b| a.value.abs().total_cmp(&b.value.abs()))
        .expect("L- has eigenvalues");
    let scale = 1.0 / (sphere_measure(u.grid.dim()) * u.grid.spacing()).sqrt();
    let lminus_vector = RealRadialField::new(&u.grid, lm_best.vector.iter().map(|x| x * scale).collect())?;

    let (_, from_plus, idx) = singular[0];
    let kernel_alignment = if from_plus {
        0.0
    } else {
        sigma_alignment(&minus[idx].vector, u.values(), u)
    };

    let w = u.grid.weights();
    let lminus_residual = weighted_norm(w, &lm.apply(u.values())) / weighted_norm(w, u.values());

    Ok(KernelReport {
        sigma_min_lplus,
        lminus_smallest: lm_best.value,
        lminus_vector,
        singular_values: [singular[0].0, singular[1].0],
        kernel_alignment,
        kernel_dim_estimate,
        lminus_residual,
    })
}

/// `|<a, b>_sigma| / (||a||_sigma ||b||_sigma)`.
pub fn sigma_alignment(a: &[f64], b: &[f64], u: &GroundState) -> f64 {
    let weight: Vec<f64> = u
        .grid
        .weights()
        .iter()
        .zip(u.values())
        .map(|(w, v)| w * v.abs().powf(u.params.alpha))
        .collect();
    let ab = weighted_dot(&weight, a, b);
    ab.abs() / (weighted_norm(&weight, a) * weighted_norm(&weight, b))
}

/// `r U'(r)` at the nodes by central differences. The ghost below the first
/// node is its even mirror image; the ghost past the last node is the quartic
/// extrapolation of the last five samples, so no boundary condition on `U` is
/// assumed at `rmax`.
pub fn radial_derivative_times_r(values: &[f64], grid: &RadialGrid) -> Vec<f64> {
    let m = values.len();
    let h = grid.spacing();
    let ghost_hi = 5.0 * values[m - 1] - 10.0 * values[m - 2] + 10.0 * values[m - 3] - 5.0 * values[m - 4]
        + values[m - 5];
    let at = |i: isize| -> f64 {
        if i < 0 {
            values[(-i - 1) as usize]
        } else if i as usize >= m {
            ghost_hi
        } else {
            values[i as usize]
        }
    };
    grid.nodes()
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let i = i as isize;
            r * (at(i + 1) - at(i - 1)) / (2.0 * h)
        })
        .collect()
}

/// Pointwise differential identities satisfied by `U`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Identity {
    /// `L+ (U + alpha/2 r U') = -alpha U`, whole space with `rho = 1`.
    EtaWhole,
    /// `L+ (2U + alpha r U') = -2 rho alpha U`, any domain and `rho`.
    EtaBall,
    /// `L+ (r U') = 2 U^{alpha+1}` at `rho = 0`.
    Pohozaev,
}

impl Identity {
    pub fn name(&self) -> &'static str {
        match self {
            Identity::EtaWhole => "eta_whole",
            Identity::EtaBall => "eta_ball",
            Identity::Pohozaev => "pohozaev",
        }
    }
}

/// Relative residual of `identity` over interior nodes, using the raw `L+`
/// stencil (no boundary condition) on the differenced test function.
pub fn identity_residual(u: &GroundState, identity: Identity) -> Result<f64> {
    check_ground(u)?;
    let p = &u.params;
    let a = p.alpha;
    let vals = u.values();
    let ru = radial_derivative_times_r(vals, &u.grid);
    let (test, rhs): (Vec<f64>, Vec<f64>) = match identity {
        Identity::EtaWhole => {
            if p.domain != DomainKind::WholeSpace {
                return Err(Error::WrongDomain("this form of eta is the whole-space one".into()));
            }
            if (p.rho - 1.0).abs() > 1e-12 {
                return Err(Error::WrongNormalization(format!(
                    "the whole-space eta identity needs rho = 1, got {}",
                    p.rho
                )));
            }
            (
                vals.iter().zip(&ru).map(|(v, d)| v + 0.5 * a * d).collect(),
                vals.iter().map(|v| -a * v).collect(),
            )
        }
        Identity::EtaBall => (
            vals.iter().zip(&ru).map(|(v, d)| 2.0 * v + a * d).collect(),
            vals.iter().map(|v| -2.0 * p.rho * a * v).collect(),
        ),
        Identity::Pohozaev => {
            if p.domain != DomainKind::UnitBall {
                return Err(Error::WrongDomain("the Pohozaev check runs on the ball".into()));
            }
            if p.rho != 0.0 {
                return Err(Error::WrongNormalization(format!(
                    "the Pohozaev identity check needs rho = 0, got {}",
                    p.rho
                )));
            }
            (ru, vals.iter().map(|v| 2.0 * v.abs().powf(a + 1.0)).collect())
        }
    };
    let lp = assemble_l_plus(u);
    let applied = lp.apply_raw(&test);
    let m = vals.len();
    let w = &u.grid.weights()[1..m - 1];
    let diff: Vec<f64> = (1..m - 1).map(|i| applied[i] - rhs[i]).collect();
    let rhs_in = &rhs[1..m - 1];
    let mut denom = weighted_norm(w, rhs_in);
    if denom == 0.0 {
        // rho = 0 on the ball: the identity is L+ eta = 0, compare with the size of one term
        let term: Vec<f64> = (1..m - 1)
            .map(|i| (a + 1.0) * vals[i].abs().powf(a) * test[i])
            .collect();
        denom = weighted_norm(w, &term);
    }
    Ok(weighted_norm(w, &diff) / denom)
}

/// `L+ eta = -alpha U` on the whole space (`rho = 1`), or `L+ eta = -2 rho alpha U` on the ball.
pub fn eta_identity_residual(u: &GroundState) -> Result<f64> {
    match u.params.domain {
        DomainKind::WholeSpace => identity_residual(u, Identity::EtaWhole),
        DomainKind::UnitBall => identity_residual(u, Identity::EtaBall),
    }
}

/// `L+ (r U') = 2 U^{alpha+1}` on the ball with `rho = 0`.
pub fn pohozaev_identity_residual(u: &GroundState) -> Result<f64> {
    identity_residual(u, Identity::Pohozaev)
}

/// Observed orders `log2(e_k / e_{k+1})` for a sequence of residuals on
/// successively doubled grids.
pub fn convergence_orders(residuals: &[f64]) -> Vec<f64> {
    residuals
        .windows(2)
        .map(|w| (w[0] / w[1]).log2())
        .collect()
}
