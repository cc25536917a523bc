//! The positive radial solution `U` of `rho u - Lap u = |u|^alpha u`.
//!
//! Two independent routes: damped Newton on the discrete equation, and
//! constrained minimization of `int rho u^2 + |grad u|^2` on the sphere
//! `int |u|^{alpha+2} = 1` followed by rescaling.

use num_complex::Complex64;

use crate::banded::BandLu;
use crate::error::{Error, Result};
use crate::field::{weighted_dot, weighted_norm, ComplexRadialField, RealRadialField};
use crate::grid::RadialGrid;
use crate::laplacian::{assemble_laplacian, dirichlet_lambda1, RadialLaplacian};
use crate::params::{DomainKind, ProblemParams};

/// Target relative residual of the Newton solve.
pub const NEWTON_TOL: f64 = 1e-10;
pub const NEWTON_MAX_ITER: usize = 200;
pub const MIN_MAX_ITER: usize = 10_000;

const AMPLITUDES: [f64; 5] = [0.5, 1.0, 2.0, 4.0, 8.0];

/// Best relative residual reachable in double precision on a grid of spacing
/// `h`: rounding each node value perturbs `-Lap u` by roughly `eps |u| / h^2`.
pub fn rounding_floor(h: f64) -> f64 {
    2e-14 / (h * h)
}

#[derive(Debug, Clone)]
pub struct GroundState {
    pub u: RealRadialField,
    pub params: ProblemParams,
    pub grid: RadialGrid,
    /// `||rho U - Lap U - U^{alpha+1}|| / ||U||` in the weighted norm.
    pub residual_norm: f64,
    pub energy: f64,
    /// Newton (or minimization) iterations used.
    pub iterations: usize,
}

impl GroundState {
    /// Wraps an existing sampled field, recomputing residual and energy.
    pub fn from_field(u: RealRadialField, params: ProblemParams, grid: RadialGrid) -> Result<Self> {
        check_grid(&params, &grid)?;
        if u.grid_key() != grid.key() {
            return Err(Error::FieldGridMismatch);
        }
        let lap = assemble_laplacian(&grid);
        let residual_norm = relative_residual(&lap, &grid, &params, u.values());
        let energy = energy(&u.to_complex(), &params, &grid)?;
        Ok(GroundState {
            u,
            params,
            grid,
            residual_norm,
            energy,
            iterations: 0,
        })
    }

    pub fn values(&self) -> &[f64] {
        self.u.values()
    }

    /// Value at the innermost node.
    pub fn peak(&self) -> f64 {
        self.u.values()[0]
    }

    pub fn l2_norm(&self) -> f64 {
        weighted_norm(self.grid.weights(), self.u.values())
    }

    /// `U^alpha` at the nodes.
    pub fn sigma(&self) -> Vec<f64> {
        self.u
            .values()
            .iter()
            .map(|v| v.abs().powf(self.params.alpha))
            .collect()
    }
}

fn check_grid(params: &ProblemParams, grid: &RadialGrid) -> Result<()> {
    params.validate()?;
    if grid.domain() != params.domain || grid.dim() != params.dim {
        return Err(Error::BadParameter(format!(
            "grid ({} N={}) does not match parameters ({} N={})",
            grid.domain(),
            grid.dim(),
            params.domain,
            params.dim
        )));
    }
    Ok(())
}

fn nonlinearity(u: f64, alpha: f64) -> f64 {
    u.abs().powf(alpha) * u
}

fn equation(lap: &RadialLaplacian, params: &ProblemParams, u: &[f64]) -> Vec<f64> {
    lap.apply(u)
        .into_iter()
        .zip(u)
        .map(|(l, &v)| params.rho * v + l - nonlinearity(v, params.alpha))
        .collect()
}

fn relative_residual(lap: &RadialLaplacian, grid: &RadialGrid, params: &ProblemParams, u: &[f64]) -> f64 {
    let g = equation(lap, params, u);
    let w = grid.weights();
    weighted_norm(w, &g) / weighted_norm(w, u).max(f64::MIN_POSITIVE)
}

/// Relative residual of `rho u - Lap u - |u|^alpha u` for an arbitrary field.
pub fn ground_state_residual(u: &RealRadialField, params: &ProblemParams, grid: &RadialGrid) -> Result<f64> {
    check_grid(params, grid)?;
    if u.grid_key() != grid.key() {
        return Err(Error::FieldGridMismatch);
    }
    Ok(relative_residual(&assemble_laplacian(grid), grid, params, u.values()))
}

/// `E(u) = rho/2 int |u|^2 + 1/2 int |grad u|^2 - 1/(alpha+2) int |u|^{alpha+2}`,
/// with the gradient term taken as `<-Lap u, u>` of the assembled operator.
pub fn energy(u: &ComplexRadialField, params: &ProblemParams, grid: &RadialGrid) -> Result<f64> {
    if u.grid_key() != grid.key() {
        return Err(Error::FieldGridMismatch);
    }
    let lap = assemble_laplacian(grid);
    let lu = lap.apply_complex(u.values());
    let a = params.alpha;
    let mut e = 0.0;
    for ((z, l), w) in u.values().iter().zip(&lu).zip(grid.weights()) {
        let m2 = z.norm_sqr();
        let grad = l.re * z.re + l.im * z.im;
        e += w * (0.5 * params.rho * m2 + 0.5 * grad - m2.powf(0.5 * a + 1.0) / (a + 2.0));
    }
    Ok(e)
}

/// Amplitude units for the initial-guess scan. On the ball the size of `U` is
/// governed by `rho + lambda_1` rather than `rho`, so that scale is tried first.
fn amplitude_scales(params: &ProblemParams, grid: &RadialGrid) -> Result<Vec<f64>> {
    let inv = 1.0 / params.alpha;
    match params.domain {
        DomainKind::WholeSpace => Ok(vec![params.rho.powf(inv)]),
        DomainKind::UnitBall => {
            let lambda1 = dirichlet_lambda1(grid)?;
            let mut scales = vec![(params.rho + lambda1).powf(inv)];
            if params.rho > 0.0 {
                scales.push(params.rho.powf(inv));
            }
            Ok(scales)
        }
    }
}

struct NewtonSolver<'a> {
    params: &'a ProblemParams,
    grid: &'a RadialGrid,
    lap: RadialLaplacian,
    precond: BandLu,
}

impl<'a> NewtonSolver<'a> {
    fn new(params: &'a ProblemParams, grid: &'a RadialGrid) -> Result<Self> {
        let lap = assemble_laplacian(grid);
        let precond = lap.band(&vec![params.rho; grid.points()]).factor()?;
        Ok(NewtonSolver {
            params,
            grid,
            lap,
            precond,
        })
    }

    /// `||(rho - Lap)^{-1} G(u)|| / ||u||`, the line-search merit. The plain
    /// residual is dominated by the stiff part of the spectrum far from the root.
    fn merit(&self, u: &[f64]) -> f64 {
        let mut g = equation(&self.lap, self.params, u);
        self.precond.solve_in_place(&mut g);
        let w = self.grid.weights();
        weighted_norm(w, &g) / weighted_norm(w, u).max(f64::MIN_POSITIVE)
    }

    fn residual(&self, u: &[f64]) -> f64 {
        relative_residual(&self.lap, self.grid, self.params, u)
    }

    fn solve(&self, mut u: Vec<f64>) -> Result<(Vec<f64>, usize)> {
        let p = self.params;
        let floor = rounding_floor(self.grid.spacing()).max(NEWTON_TOL);
        let mut merit = self.merit(&u);
        for it in 0..NEWTON_MAX_ITER {
            let res = self.residual(&u);
            if res <= NEWTON_TOL {
                return Ok((u, it));
            }
            let shift: Vec<f64> = u
                .iter()
                .map(|v| p.rho - (p.alpha + 1.0) * v.abs().powf(p.alpha))
                .collect();
            let jac = match self.lap.band(&shift).factor() {
                Ok(j) => j,
                Err(_) => {
                    return Err(Error::NonConvergence {
                        iterations: it,
                        residual: res,
                    })
                }
            };
            let mut step: Vec<f64> = equation(&self.lap, p, &u).into_iter().map(|g| -g).collect();
            jac.solve_in_place(&mut step);
            let mut t = 1.0;
            let mut accepted = None;
            while t > 1e-9 {
                let trial: Vec<f64> = u.iter().zip(&step).map(|(a, d)| a + t * d).collect();
                let m = self.merit(&trial);
                if m < merit {
                    accepted = Some((trial, m));
                    break;
                }
                t *= 0.5;
            }
            match accepted {
                Some((trial, m)) => {
                    let stalled = m > 0.5 * merit;
                    u = trial;
                    merit = m;
                    if u.iter().fold(0.0_f64, |a, v| a.max(v.abs())) < 1e-6 {
                        return Err(Error::NonConvergence {
                            iterations: it + 1,
                            residual: self.residual(&u),
                        });
                    }
                    let res = self.residual(&u);
                    if res <= NEWTON_TOL || (stalled && res <= floor) {
                        return Ok((u, it + 1));
                    }
                }
                None => {
                    if res <= floor {
                        return Ok((u, it));
                    }
                    return Err(Error::NonConvergence {
                        iterations: it,
                        residual: res,
                    });
                }
            }
        }
        Err(Error::NonConvergence {
            iterations: NEWTON_MAX_ITER,
            residual: self.residual(&u),
        })
    }
}

/// Damped Newton solve for the positive radial ground state.
///
/// Without `init`, Gaussians `A exp(-r^2)` are scanned over the amplitudes
/// `{0.5, 1, 2, 4, 8} rho^{1/alpha}` (on the ball, first in units of
/// `(rho + lambda_1)^{1/alpha}`) and the one with the smallest merit is used;
/// if that solve fails, the next scale or the width `exp(-rho r^2)` is tried,
/// and finally the constrained-minimization route seeds the Newton solve.
pub fn solve_ground_state(
    params: &ProblemParams,
    grid: &RadialGrid,
    init: Option<&RealRadialField>,
) -> Result<GroundState> {
    check_grid(params, grid)?;
    if params.domain == DomainKind::UnitBall {
        let lambda1 = dirichlet_lambda1(grid)?;
        if params.rho <= -lambda1 {
            return Err(Error::BadParameter(format!(
                "ball problems need rho > -lambda_1 = {:.6}",
                -lambda1
            )));
        }
    }
    let solver = NewtonSolver::new(params, grid)?;
    let (u, iterations) = match init {
        Some(f) => {
            if f.grid_key() != grid.key() {
                return Err(Error::FieldGridMismatch);
            }
            solver.solve(f.values().to_vec())?
        }
        None => {
            let mut widths = vec![1.0];
            if params.domain == DomainKind::WholeSpace {
                widths.push(params.rho);
            }
            widths.push(params.rho.max(1.0));
            let mut attempts = Vec::new();
            for width in widths {
                for scale in amplitude_scales(params, grid)? {
                    if !attempts.contains(&(width, scale)) {
                        attempts.push((width, scale));
                    }
                }
            }
            let mut last_err = None;
            let mut found = None;
            for &(width, scale) in &attempts {
                let guess = AMPLITUDES
                    .iter()
                    .map(|a| {
                        let g: Vec<f64> = grid
                            .nodes()
                            .iter()
                            .map(|r| a * scale * (-width * r * r).exp())
                            .collect();
                        (solver.merit(&g), g)
                    })
                    .min_by(|a, b| a.0.total_cmp(&b.0))
                    .map(|(_, g)| g)
                    .expect("non-empty scan");
                match solver.solve(guess) {
                    Ok((u, it)) if u.iter().all(|&v| v > 0.0) => {
                        found = Some((u, it));
                        break;
                    }
                    Ok((u, _)) => {
                        last_err = Some(Error::NegativeSolution {
                            min_value: u.iter().copied().fold(f64::INFINITY, f64::min),
                        })
                    }
                    Err(e) => last_err = Some(e),
                }
            }
            if found.is_none() {
                // globally convergent but slow; only needed near the critical exponent
                if let Ok(min) = solve_constrained_min(params, grid) {
                    if let Ok((u, it)) = solver.solve(min.ground.u.into_values()) {
                        found = Some((u, it));
                    }
                }
            }
            match found {
                Some(x) => x,
                None => return Err(last_err.expect("at least one attempt")),
            }
        }
    };
    let min_value = u.iter().copied().fold(f64::INFINITY, f64::min);
    if min_value <= 0.0 {
        return Err(Error::NegativeSolution { min_value });
    }
    let residual_norm = solver.residual(&u);
    let field = RealRadialField::new(grid, u)?;
    let energy = energy(&field.to_complex(), params, grid)?;
    Ok(GroundState {
        u: field,
        params: *params,
        grid: grid.clone(),
        residual_norm,
        energy,
        iterations,
    })
}

/// Cubic Lagrange interpolation of nodal data at radius `r`, using the even
/// reflection across the origin and the odd (Dirichlet) reflection across `rmax`.
pub fn interpolate_cubic(values: &[f64], grid: &RadialGrid, r: f64) -> f64 {
    let m = values.len() as isize;
    let h = grid.spacing();
    let sample = |i: isize| -> f64 {
        if i < 0 {
            values[(-i - 1) as usize]
        } else if i >= m {
            let j = 2 * m - 1 - i;
            if j < 0 {
                0.0
            } else {
                -values[j as usize]
            }
        } else {
            values[i as usize]
        }
    };
    let s = r.abs() / h - 0.5;
    let base = s.floor() as isize;
    let t = s - base as f64;
    let p = [sample(base - 1), sample(base), sample(base + 1), sample(base + 2)];
    // Lagrange weights on nodes -1, 0, 1, 2
    let w = [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ];
    p.iter().zip(&w).map(|(a, b)| a * b).sum()
}

/// Maps the `rho = 1` whole-space ground state to `rho_new` through
/// `U_rho(r) = rho^{1/alpha} U_1(sqrt(rho) r)` on a grid with the same number
/// of points and `rmax / sqrt(rho_new)`.
pub fn rescale_rho(base: &GroundState, rho_new: f64) -> Result<GroundState> {
    if base.params.domain != DomainKind::WholeSpace {
        return Err(Error::WrongDomain(
            "the ball problem does not rescale in rho".into(),
        ));
    }
    if (base.params.rho - 1.0).abs() > 1e-12 {
        return Err(Error::WrongNormalization(format!(
            "rescaling starts from rho = 1, got rho = {}",
            base.params.rho
        )));
    }
    if !(rho_new.is_finite() && rho_new > 0.0) {
        return Err(Error::BadParameter(format!(
            "rho_new must be positive, got {rho_new}"
        )));
    }
    let params = base.params.with_rho(rho_new)?;
    let sqrt_rho = rho_new.sqrt();
    let grid = base
        .grid
        .with_points(base.grid.points())
        .and_then(|g| RadialGrid::new(g.domain(), g.dim(), g.points(), g.rmax() / sqrt_rho))?;
    let amp = rho_new.powf(1.0 / params.alpha);
    let values: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|&r| amp * interpolate_cubic(base.u.values(), &base.grid, sqrt_rho * r))
        .collect();
    let u = RealRadialField::new(&grid, values)?;
    GroundState::from_field(u, params, grid).map(|mut g| {
        g.iterations = base.iterations;
        g
    })
}

/// Result of the constrained-minimization route.
#[derive(Debug, Clone)]
pub struct ConstrainedMinimum {
    /// Minimizer with `int |u|^{alpha+2} = 1`.
    pub normalized: RealRadialField,
    /// Attained minimum of `int rho u^2 + |grad u|^2`, the Lagrange multiplier.
    pub multiplier: f64,
    /// `multiplier^{1/alpha}` times the minimizer.
    pub ground: GroundState,
}

fn constraint_normalize(u: &mut [f64], w: &[f64], alpha: f64) {
    let c: f64 = u
        .iter()
        .zip(w)
        .map(|(v, w)| w * v.abs().powf(alpha + 2.0))
        .sum();
    let s = c.powf(-1.0 / (alpha + 2.0));
    u.iter_mut().for_each(|v| *v = (*v * s).abs());
}

/// Minimizes `Q(u) = int rho u^2 + |grad u|^2` over `int |u|^{alpha+2} = 1`.
///
/// Projected gradient descent in the `(rho - Lap)` metric: the preconditioned
/// gradient of `Q - m C` is `u - Q(u) (rho - Lap)^{-1}(|u|^alpha u)`; after
/// each step the iterate is mapped back to the constraint set and to `|u|`.
pub fn solve_constrained_min(params: &ProblemParams, grid: &RadialGrid) -> Result<ConstrainedMinimum> {
    solve_constrained_min_with_step(params, grid, 1.0)
}

pub fn solve_constrained_min_with_step(
    params: &ProblemParams,
    grid: &RadialGrid,
    step: f64,
) -> Result<ConstrainedMinimum> {
    check_grid(params, grid)?;
    if !(step > 0.0 && step <= 2.0) {
        return Err(Error::BadParameter(format!("step {step} outside (0, 2]")));
    }
    let lap = assemble_laplacian(grid);
    let n = grid.points();
    let precond = lap.band(&vec![params.rho; n]).factor()?;
    let w = grid.weights();
    let alpha = params.alpha;
    let quad = |u: &[f64]| -> f64 {
        let lu = lap.apply(u);
        u.iter()
            .zip(&lu)
            .zip(w)
            .map(|((v, l), w)| w * v * (params.rho * v + l))
            .sum()
    };
    let mut u: Vec<f64> = grid.nodes().iter().map(|r| (-r * r).exp()).collect();
    constraint_normalize(&mut u, w, alpha);
    let mut converged = false;
    let mut change = f64::INFINITY;
    let mut iterations = 0;
    for it in 0..MIN_MAX_ITER {
        let q = quad(&u);
        let mut v: Vec<f64> = u.iter().map(|&x| nonlinearity(x, alpha)).collect();
        precond.solve_in_place(&mut v);
        let mut next: Vec<f64> = u
            .iter()
            .zip(&v)
            .map(|(x, y)| x - step * (x - q * y))
            .collect();
        constraint_normalize(&mut next, w, alpha);
        let scale = next.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
        change = u
            .iter()
            .zip(&next)
            .fold(0.0_f64, |a, (x, y)| a.max((x - y).abs()))
            / scale;
        u = next;
        iterations = it + 1;
        if change <= 1e-14 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            iterations,
            residual: change,
        });
    }
    let multiplier = quad(&u);
    let k = multiplier.powf(1.0 / alpha);
    let scaled: Vec<f64> = u.iter().map(|x| k * x).collect();
    let normalized = RealRadialField::new(grid, u)?;
    let mut ground = GroundState::from_field(RealRadialField::new(grid, scaled)?, *params, grid.clone())?;
    ground.iterations = iterations;
    Ok(ConstrainedMinimum {
        normalized,
        multiplier,
        ground,
    })
}

/// `int |u|^{alpha+2}` by quadrature.
pub fn lp_integral(u: &RealRadialField, alpha: f64, grid: &RadialGrid) -> f64 {
    u.values()
        .iter()
        .zip(grid.weights())
        .map(|(v, w)| w * v.abs().powf(alpha + 2.0))
        .sum()
}

/// Directional derivative of the energy, `<E'(u), v>` for real `u`, `v`.
pub fn energy_gradient_dot(u: &[f64], v: &[f64], params: &ProblemParams, grid: &RadialGrid) -> f64 {
    let lap = assemble_laplacian(grid);
    let g = equation(&lap, params, u);
    weighted_dot(grid.weights(), &g, v)
}

pub(crate) fn complex_nonlinearity(z: Complex64, alpha: f64) -> Complex64 {
    let m = z.norm();
    if m == 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        z * m.powf(alpha)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::real_norm;
    use crate::grid::build_grid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn whole(dim: usize, alpha: f64, rho: f64) -> ProblemParams {
        ProblemParams::new(DomainKind::WholeSpace, dim, alpha, rho, 0.0).unwrap()
    }

    fn ball(dim: usize, alpha: f64, rho: f64) -> ProblemParams {
        ProblemParams::new(DomainKind::UnitBall, dim, alpha, rho, 0.0).unwrap()
    }

    /// Closed-form 1-D soliton `((alpha+2) rho / 2)^{1/alpha} sech^{2/alpha}(alpha sqrt(rho) x / 2)`.
    fn soliton(alpha: f64, rho: f64, x: f64) -> f64 {
        ((alpha + 2.0) * rho / 2.0).powf(1.0 / alpha)
            * (1.0 / (alpha * rho.sqrt() * x / 2.0).cosh()).powf(2.0 / alpha)
    }

    #[test]
    fn soliton_formula_solves_the_ode() {
        // finite-difference substitution check of the closed form itself
        for &alpha in &[1.0, 2.0, 3.0] {
            for &rho in &[0.25, 1.0, 4.0] {
                let h = 1e-4;
                for &x in &[0.1, 0.7, 1.5, 3.0] {
                    let u = soliton(alpha, rho, x);
                    let upp = (soliton(alpha, rho, x + h) - 2.0 * u + soliton(alpha, rho, x - h)) / (h * h);
                    let r = rho * u - upp - u.powf(alpha + 1.0);
                    assert!(r.abs() < 1e-5, "alpha={alpha} rho={rho} x={x} r={r}");
                }
            }
        }
    }

    #[test]
    fn newton_converges_to_sech_at_second_order() {
        let p = whole(1, 2.0, 1.0);
        let errs: Vec<f64> = [750, 1500, 3000]
            .iter()
            .map(|&m| {
                let g = build_grid(&p, m, Some(15.0)).unwrap();
                let gs = solve_ground_state(&p, &g, None).unwrap();
                assert!(gs.residual_norm <= NEWTON_TOL);
                gs.u.values()
                    .iter()
                    .zip(g.nodes())
                    .map(|(u, &r)| (u - soliton(2.0, 1.0, r)).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((3.7..=4.3).contains(&ratio), "{errs:?}");
        }
        // Richardson in h^2 removes the leading error
        assert!(errs[2] < 4e-6);
    }

    #[test]
    fn richardson_extrapolated_match_with_sech() {
        // cell-centred grids nest under tripling: coarse node i = fine node 3i+1
        let p = whole(1, 2.0, 1.0);
        let coarse = solve_ground_state(&p, &build_grid(&p, 1000, Some(15.0)).unwrap(), None).unwrap();
        let fine = solve_ground_state(&p, &build_grid(&p, 3000, Some(15.0)).unwrap(), None).unwrap();
        let mut err: f64 = 0.0;
        for (i, &r) in coarse.grid.nodes().iter().enumerate() {
            let extrap = (9.0 * fine.values()[3 * i + 1] - coarse.values()[i]) / 8.0;
            err = err.max((extrap - soliton(2.0, 1.0, r)).abs());
        }
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn scaling_oracle_rho_four() {
        let p = whole(1, 2.0, 4.0);
        let g = build_grid(&p, 1500, None).unwrap();
        let gs = solve_ground_state(&p, &g, None).unwrap();
        assert!((gs.peak() - 2.0 * 2f64.sqrt()).abs() < 1e-3);
        // half width halves relative to rho = 1
        let half = |gs: &GroundState| {
            let target = gs.peak() / 2.0;
            let i = gs.values().iter().position(|&v| v < target).unwrap();
            gs.grid.nodes()[i]
        };
        let p1 = whole(1, 2.0, 1.0);
        let gs1 = solve_ground_state(&p1, &build_grid(&p1, 1500, None).unwrap(), None).unwrap();
        let ratio = half(&gs1) / half(&gs);
        assert!((ratio - 2.0).abs() < 0.03, "{ratio}");
    }

    #[test]
    fn rejects_nonpositive_rho_on_whole_space() {
        assert!(matches!(
            ProblemParams::new(DomainKind::WholeSpace, 1, 2.0, -0.5, 0.0),
            Err(Error::BadParameter(_))
        ));
    }

    #[test]
    fn ground_state_invariants_on_both_domains() {
        for p in [whole(1, 2.0, 1.0), whole(2, 2.0, 1.0), whole(3, 2.0, 1.0), whole(3, 1.0, 1.0)] {
            let g = build_grid(&p, 1000, None).unwrap();
            let gs = solve_ground_state(&p, &g, None).unwrap();
            assert!(gs.residual_norm <= NEWTON_TOL, "{p:?} {}", gs.residual_norm);
            assert!(gs.values().iter().all(|&v| v > 0.0));
            assert!(gs.values().windows(2).all(|w| w[1] < w[0]));
            assert!(gs.energy > 0.0);
            // exponential decay
            assert!(*gs.values().last().unwrap() <= 1e-8 * gs.peak());
        }
        for p in [ball(1, 2.0, 1.0), ball(2, 2.0, 0.0), ball(3, 2.0, 1.0), ball(3, 1.0, -3.0)] {
            let g = build_grid(&p, 400, None).unwrap();
            let gs = solve_ground_state(&p, &g, None).unwrap();
            assert!(gs.residual_norm <= NEWTON_TOL, "{p:?} {}", gs.residual_norm);
            assert!(gs.values().windows(2).all(|w| w[1] < w[0]));
            assert!(gs.energy > 0.0);
            // wall slope, ghost value -U_M gives U'(1) ~ -2 U_M / h < 0
            let n = gs.values().len();
            let slope = (0.0 - gs.values()[n - 1]) / (0.5 * g.spacing());
            assert!(slope < 0.0);
        }
    }

    #[test]
    fn log_decay_is_concave() {
        let p = whole(1, 2.0, 1.0);
        let g = build_grid(&p, 1500, None).unwrap();
        let gs = solve_ground_state(&p, &g, None).unwrap();
        let logs: Vec<f64> = gs.values().iter().map(|v| v.ln()).collect();
        let start = g.nodes().iter().position(|&r| r >= 2.0).unwrap();
        for i in start + 1..logs.len() - 1 {
            assert!(logs[i] < logs[i - 1]);
            assert!(logs[i + 1] - 2.0 * logs[i] + logs[i - 1] <= 1e-9, "node {i}");
        }
    }

    #[test]
    fn energy_basics() {
        let p = whole(1, 2.0, 1.0);
        let g = build_grid(&p, 1500, None).unwrap();
        assert_eq!(energy(&ComplexRadialField::zeros(&g), &p, &g).unwrap(), 0.0);
        let gs = solve_ground_state(&p, &g, None).unwrap();
        assert!(gs.energy > 0.0);
        // E'(U) = 0 by central differences
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..5 {
            let v: Vec<f64> = g.nodes().iter().map(|r| rng.gen_range(-1.0..1.0) * (-r * r / 8.0).exp()).collect();
            let eps = 1e-5;
            let plus: Vec<f64> = gs.values().iter().zip(&v).map(|(a, b)| a + eps * b).collect();
            let minus: Vec<f64> = gs.values().iter().zip(&v).map(|(a, b)| a - eps * b).collect();
            let ep = energy(&RealRadialField::new(&g, plus).unwrap().to_complex(), &p, &g).unwrap();
            let em = energy(&RealRadialField::new(&g, minus).unwrap().to_complex(), &p, &g).unwrap();
            let vf = RealRadialField::new(&g, v.clone()).unwrap();
            let nv = real_norm(&vf, &g).unwrap();
            assert!(((ep - em) / (2.0 * eps)).abs() <= 1e-6 * nv);
            assert!(energy_gradient_dot(gs.values(), &v, &p, &g).abs() <= 1e-8 * nv);
        }
    }

    #[test]
    fn rescale_identity_and_scaling() {
        let p = whole(1, 2.0, 1.0);
        let g = build_grid(&p, 1500, Some(15.0)).unwrap();
        let gs = solve_ground_state(&p, &g, None).unwrap();
        let same = rescale_rho(&gs, 1.0).unwrap();
        let diff = same.values().iter().zip(gs.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff <= 1e-10);
        let four = rescale_rho(&gs, 4.0).unwrap();
        assert!((four.peak() - 2.0 * gs.peak()).abs() < 1e-12);
        assert!(four.residual_norm <= 1e-6);
        assert!((four.grid.rmax() - 7.5).abs() < 1e-12);
        assert!(matches!(rescale_rho(&gs, 0.0), Err(Error::BadParameter(_))));
        let b = ball(1, 2.0, 1.0);
        let gb = solve_ground_state(&b, &build_grid(&b, 100, None).unwrap(), None).unwrap();
        assert!(matches!(rescale_rho(&gb, 2.0), Err(Error::WrongDomain(_))));
    }

    #[test]
    fn cubic_interpolation_is_exact_on_cubics() {
        let g = RadialGrid::new(DomainKind::UnitBall, 1, 40, 1.0).unwrap();
        let f = |r: f64| 1.0 + 0.5 * r * r - 0.3 * r.powi(3);
        let vals: Vec<f64> = g.nodes().iter().map(|&r| f(r)).collect();
        for &r in &[0.1, 0.33, 0.5, 0.77, 0.9] {
            assert!((interpolate_cubic(&vals, &g, r) - f(r)).abs() < 1e-12);
        }
        for (i, &r) in g.nodes().iter().enumerate() {
            assert!((interpolate_cubic(&vals, &g, r) - vals[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn minimization_route_agrees_with_newton() {
        for p in [whole(1, 2.0, 1.0), ball(3, 2.0, 1.0)] {
            let g = build_grid(&p, 600, None).unwrap();
            let newton = solve_ground_state(&p, &g, None).unwrap();
            let min = solve_constrained_min(&p, &g).unwrap();
            assert!((lp_integral(&min.normalized, p.alpha, &g) - 1.0).abs() <= 1e-10);
            assert!(min.normalized.values().windows(2).all(|w| w[1] < w[0]));
            let scale = newton.peak();
            let diff = newton
                .values()
                .iter()
                .zip(min.ground.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(diff <= 1e-6 * scale, "{p:?} {diff}");
        }
    }

    #[test]
    fn zero_initial_guess_is_rejected() {
        let p = ball(2, 2.0, 1.0);
        let g = build_grid(&p, 64, None).unwrap();
        let zero = RealRadialField::zeros(&g);
        assert!(solve_ground_state(&p, &g, Some(&zero)).is_err());
    }
}
