//! Branch of standing waves `phi = e^{i omega t} u` parameterized by `gamma`.
//!
//! The stationary equation `i omega u + e^{i theta}(rho u - Lap u) = e^{i gamma}|u|^alpha u`
//! is solved in the rotated form
//!
//! `F(gamma, omega, u) = rho u - Lap u - e^{i(gamma - theta)}|u|^alpha u + i omega e^{-i theta} u`,
//!
//! so `|F|` is the residual of the original equation. Starting from
//! `(theta, 0, U e^{i beta})`, the branch is followed in `gamma` with Newton
//! corrections on the system `F = 0` bordered by the phase condition
//! `(u, i u_ref) = 0`.

use num_complex::Complex64;

use crate::banded::{BandLu, BandMatrix};
use crate::error::{Error, Result};
use crate::field::{weighted_cnorm, ComplexRadialField};
use crate::grid::RadialGrid;
use crate::ground_state::{complex_nonlinearity, rounding_floor, GroundState};
use crate::laplacian::{assemble_laplacian, RadialLaplacian};
use crate::params::{check_angle, ProblemParams};

pub const CORRECT_TOL: f64 = 1e-10;
pub const CORRECT_MAX_ITER: usize = 50;
/// Accepted path points satisfy `||F|| / ||u|| <= POINT_TOL`.
pub const POINT_TOL: f64 = 1e-8;
pub const MIN_STEP: f64 = 1e-5;
pub const MAX_STEP: f64 = 0.05;
/// Corrections that converge within this many iterations count as easy.
const EASY_ITERATIONS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationPoint {
    pub gamma: f64,
    pub omega: f64,
    pub u: ComplexRadialField,
    /// `||F(gamma, omega, u)|| / ||u||`.
    pub residual: f64,
    /// Newton iterations spent on this point.
    pub iterations: usize,
}

impl ContinuationPoint {
    pub fn new(gamma: f64, omega: f64, u: ComplexRadialField) -> Self {
        ContinuationPoint {
            gamma,
            omega,
            u,
            residual: f64::NAN,
            iterations: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationPath {
    pub theta: f64,
    pub beta: f64,
    /// Parameters with `theta` set.
    pub params: ProblemParams,
    pub grid: RadialGrid,
    /// The real ground state the path starts from.
    pub ground: crate::field::RealRadialField,
    pub points: Vec<ContinuationPoint>,
}

impl ContinuationPath {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn last(&self) -> Option<&ContinuationPoint> {
        self.points.last()
    }

    /// CSV with header `gamma,omega,residual,l2norm,peak`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("gamma,omega,residual,l2norm,peak\n");
        let w = self.grid.weights();
        for p in &self.points {
            s.push_str(&format!(
                "{:.16e},{:.16e},{:.6e},{:.16e},{:.16e}\n",
                p.gamma,
                p.omega,
                p.residual,
                weighted_cnorm(w, p.u.values()),
                p.u.max_abs()
            ));
        }
        s
    }
}

fn check_field(u: &ComplexRadialField, grid: &RadialGrid) -> Result<()> {
    if u.grid_key() != grid.key() {
        return Err(Error::FieldGridMismatch);
    }
    Ok(())
}

fn rotation(angle: f64) -> Complex64 {
    Complex64::from_polar(1.0, angle)
}

fn evaluate_with(
    lap: &RadialLaplacian,
    gamma: f64,
    omega: f64,
    u: &[Complex64],
    params: &ProblemParams,
) -> Vec<Complex64> {
    let c = rotation(gamma - params.theta);
    let z = Complex64::i() * omega * rotation(-params.theta);
    lap.apply_complex(u)
        .into_iter()
        .zip(u)
        .map(|(l, &v)| params.rho * v + l - c * complex_nonlinearity(v, params.alpha) + z * v)
        .collect()
}

/// `F(gamma, omega, u)`.
pub fn evaluate_f(
    gamma: f64,
    omega: f64,
    u: &ComplexRadialField,
    params: &ProblemParams,
    grid: &RadialGrid,
) -> Result<ComplexRadialField> {
    check_angle("gamma", gamma)?;
    check_field(u, grid)?;
    let lap = assemble_laplacian(grid);
    ComplexRadialField::new(grid, evaluate_with(&lap, gamma, omega, u.values(), params))
}

/// `||F|| / ||u||` in the weighted norm.
pub fn relative_residual(
    gamma: f64,
    omega: f64,
    u: &ComplexRadialField,
    params: &ProblemParams,
    grid: &RadialGrid,
) -> Result<f64> {
    let f = evaluate_f(gamma, omega, u, params, grid)?;
    let w = grid.weights();
    Ok(weighted_cnorm(w, f.values()) / weighted_cnorm(w, u.values()).max(f64::MIN_POSITIVE))
}

fn to_real(u: &[Complex64]) -> Vec<f64> {
    u.iter().flat_map(|z| [z.re, z.im]).collect()
}

fn to_complex(x: &[f64]) -> Vec<Complex64> {
    x.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect()
}

/// Derivative of `F` at `(gamma, omega, u)` as a real-linear operator on
/// `(mu, v)`, stored with interleaved real and imaginary parts.
#[derive(Debug, Clone)]
pub struct Jacobian {
    grid: RadialGrid,
    band: BandMatrix,
    domega: Vec<Complex64>,
}

impl Jacobian {
    /// `dF/du v`.
    pub fn apply(&self, v: &ComplexRadialField) -> Result<ComplexRadialField> {
        check_field(v, &self.grid)?;
        ComplexRadialField::new(&self.grid, to_complex(&self.band.matvec(&to_real(v.values()))))
    }

    /// `dF/domega mu + dF/du v`.
    pub fn apply_full(&self, mu: f64, v: &ComplexRadialField) -> Result<ComplexRadialField> {
        let mut out = self.apply(v)?;
        for (o, d) in out.values_mut().iter_mut().zip(&self.domega) {
            *o += d * mu;
        }
        Ok(out)
    }

    /// `dF/domega = i e^{-i theta} u`.
    pub fn domega(&self) -> ComplexRadialField {
        ComplexRadialField::new(&self.grid, self.domega.clone()).expect("same grid")
    }

    /// Interleaved `2M x 2M` band matrix of `dF/du`.
    pub fn band(&self) -> &BandMatrix {
        &self.band
    }
}

fn assemble_jacobian(
    lap: &RadialLaplacian,
    grid: &RadialGrid,
    gamma: f64,
    omega: f64,
    u: &[Complex64],
    params: &ProblemParams,
) -> Jacobian {
    let m = u.len();
    let node = lap.band(&vec![params.rho; m]);
    let mut band = BandMatrix::zeros(2 * m, 2, 2);
    for i in 0..m {
        for j in i.saturating_sub(1)..(i + 2).min(m) {
            let a = node.get(i, j);
            band.set(2 * i, 2 * j, a);
            band.set(2 * i + 1, 2 * j + 1, a);
        }
    }
    let c = rotation(gamma - params.theta);
    let z = Complex64::i() * omega * rotation(-params.theta);
    let alpha = params.alpha;
    for (i, v) in u.iter().enumerate() {
        let (p, q) = (v.re, v.im);
        let m2 = v.norm_sqr();
        // derivative of |u|^alpha u: |u|^alpha I + alpha |u|^{alpha-2} [p q]^T [p q]
        let nmat = if m2 == 0.0 {
            [[0.0, 0.0], [0.0, 0.0]]
        } else {
            let a = m2.powf(0.5 * alpha);
            let b = alpha * m2.powf(0.5 * alpha - 1.0);
            [[a + b * p * p, b * p * q], [b * p * q, a + b * q * q]]
        };
        let rot = [[c.re, -c.im], [c.im, c.re]];
        for r in 0..2 {
            for s in 0..2 {
                let prod = rot[r][0] * nmat[0][s] + rot[r][1] * nmat[1][s];
                band.add(2 * i + r, 2 * i + s, -prod);
            }
        }
        band.add(2 * i, 2 * i, z.re);
        band.add(2 * i, 2 * i + 1, -z.im);
        band.add(2 * i + 1, 2 * i, z.im);
        band.add(2 * i + 1, 2 * i + 1, z.re);
    }
    let e = Complex64::i() * rotation(-params.theta);
    Jacobian {
        grid: grid.clone(),
        band,
        domega: u.iter().map(|v| e * v).collect(),
    }
}

/// Derivative of `F` at `(gamma, omega, u)`.
pub fn jacobian(
    gamma: f64,
    omega: f64,
    u: &ComplexRadialField,
    params: &ProblemParams,
    grid: &RadialGrid,
) -> Result<Jacobian> {
    check_angle("gamma", gamma)?;
    check_field(u, grid)?;
    let lap = assemble_laplacian(grid);
    Ok(assemble_jacobian(&lap, grid, gamma, omega, u.values(), params))
}

/// Splits `f` into a multiple of `dF/domega` at the base point and a part
/// orthogonal to `iU`: returns `mu` and `f + i e^{-i theta} U mu`.
pub fn mu_projection(
    f: &ComplexRadialField,
    ground: &GroundState,
    theta: f64,
) -> Result<(f64, ComplexRadialField)> {
    check_field(f, &ground.grid)?;
    let cos = theta.cos();
    if cos.abs() < 1e-12 {
        return Err(Error::BadParameter(format!("cos(theta) vanishes at theta = {theta}")));
    }
    let w = ground.grid.weights();
    let uu = ground.values();
    let norm2: f64 = uu.iter().zip(w).map(|(v, w)| w * v * v).sum();
    let proj: f64 = f
        .values()
        .iter()
        .zip(uu)
        .zip(w)
        .map(|((z, v), w)| w * z.im * v)
        .sum();
    let mu = -proj / (cos * norm2);
    let e = Complex64::i() * rotation(-theta) * mu;
    let values = f.values().iter().zip(uu).map(|(z, v)| z + e * v).collect();
    Ok((mu, ComplexRadialField::new(&ground.grid, values)?))
}

/// Row of the phase condition `(v, i u_ref) / ||u_ref||^2` in interleaved form.
fn phase_row(grid: &RadialGrid, phase_ref: &ComplexRadialField) -> Result<Vec<f64>> {
    check_field(phase_ref, grid)?;
    let w = grid.weights();
    let n2: f64 = weighted_cnorm(w, phase_ref.values()).powi(2);
    if !(n2 > 0.0 && n2.is_finite()) {
        return Err(Error::BadParameter("phase reference must be nonzero".into()));
    }
    // Re(v conj(i r)) = -a Im r + b Re r
    Ok(phase_ref
        .values()
        .iter()
        .zip(w)
        .flat_map(|(r, w)| [-w * r.im / n2, w * r.re / n2])
        .collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solver for `[J f; c^T 0] (x, y) = (r, g)`.
///
/// `J` is singular along the phase direction on the branch, so it is
/// factored after a rank-one diagonal shift at the entry where that direction
/// is largest; the shift is removed again through a second scalar unknown.
struct BorderedSolver<'a> {
    jac: &'a BandMatrix,
    lu: BandLu,
    f: Vec<f64>,
    c: Vec<f64>,
    k: usize,
    shift: f64,
    xf: Vec<f64>,
    xe: Vec<f64>,
}

impl<'a> BorderedSolver<'a> {
    fn new(jac: &'a Jacobian, c: Vec<f64>) -> Result<Self> {
        let band = &jac.band;
        let n = band.dim();
        let k = (0..n)
            .max_by(|&a, &b| c[a].abs().total_cmp(&c[b].abs()))
            .expect("non-empty");
        let shift = (0..n).map(|i| band.get(i, i).abs()).fold(0.0, f64::max);
        let mut shifted = band.clone();
        shifted.add(k, k, shift);
        let lu = shifted.factor().map_err(|_| Error::SingularBorderedSystem)?;
        let f = to_real(&jac.domega);
        let xf = lu.solve(&f);
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        let xe = lu.solve(&e);
        Ok(BorderedSolver {
            jac: band,
            lu,
            f,
            c,
            k,
            shift,
            xf,
            xe,
        })
    }

    fn solve_once(&self, r: &[f64], g: f64) -> Result<(Vec<f64>, f64)> {
        let xr = self.lu.solve(r);
        let s = self.shift;
        let k = self.k;
        // x = xr - y xf + s t xe with t = x_k and c.x = g
        let a11 = -dot(&self.c, &self.xf);
        let a12 = s * dot(&self.c, &self.xe);
        let b1 = g - dot(&self.c, &xr);
        let a21 = -self.xf[k];
        let a22 = s * self.xe[k] - 1.0;
        let b2 = -xr[k];
        let det = a11 * a22 - a12 * a21;
        let scale = (a11.abs() + a12.abs()) * (a21.abs() + a22.abs());
        if !(det.abs() > 1e-13 * scale) || !det.is_finite() {
            return Err(Error::SingularBorderedSystem);
        }
        let y = (b1 * a22 - a12 * b2) / det;
        let t = (a11 * b2 - a21 * b1) / det;
        let x = xr
            .iter()
            .zip(&self.xf)
            .zip(&self.xe)
            .map(|((a, b), c)| a - y * b + s * t * c)
            .collect();
        Ok((x, y))
    }

    fn solve(&self, r: &[f64], g: f64) -> Result<(Vec<f64>, f64)> {
        let (mut x, mut y) = self.solve_once(r, g)?;
        for _ in 0..2 {
            let jx = self.jac.matvec(&x);
            let res: Vec<f64> = jx
                .iter()
                .zip(&self.f)
                .zip(r)
                .map(|((a, b), c)| c - a - y * b)
                .collect();
            let gres = g - dot(&self.c, &x);
            let (dx, dy) = self.solve_once(&res, gres)?;
            x.iter_mut().zip(&dx).for_each(|(a, b)| *a += b);
            y += dy;
        }
        if x.iter().any(|v| !v.is_finite()) || !y.is_finite() {
            return Err(Error::SingularBorderedSystem);
        }
        Ok((x, y))
    }
}

/// Newton correction of `(omega, u)` at fixed `gamma`, subject to
/// `(u, i phase_ref) = 0`.
pub fn newton_correct(
    guess: &ContinuationPoint,
    params: &ProblemParams,
    grid: &RadialGrid,
    phase_ref: &ComplexRadialField,
) -> Result<ContinuationPoint> {
    check_angle("gamma", guess.gamma)?;
    check_field(&guess.u, grid)?;
    let c = phase_row(grid, phase_ref)?;
    let lap = assemble_laplacian(grid);
    let w = grid.weights();
    let gamma = guess.gamma;
    let residual_of = |omega: f64, u: &[Complex64]| -> (Vec<Complex64>, f64) {
        let f = evaluate_with(&lap, gamma, omega, u, params);
        let r = weighted_cnorm(w, &f) / weighted_cnorm(w, u).max(f64::MIN_POSITIVE);
        (f, r)
    };
    let floor = rounding_floor(grid.spacing()).max(CORRECT_TOL);
    let mut u = guess.u.values().to_vec();
    let mut omega = guess.omega;
    if !u.iter().all(|z| z.re.is_finite() && z.im.is_finite()) || !omega.is_finite() {
        return Err(Error::BadParameter("guess is not finite".into()));
    }
    let (mut f, mut res) = residual_of(omega, &u);
    let mut iterations = 0;
    while res > CORRECT_TOL {
        if iterations == CORRECT_MAX_ITER {
            if res <= floor {
                break;
            }
            return Err(Error::NonConvergence {
                iterations,
                residual: res,
            });
        }
        iterations += 1;
        let jac = assemble_jacobian(&lap, grid, gamma, omega, &u, params);
        let solver = BorderedSolver::new(&jac, c.clone())?;
        let rhs: Vec<f64> = to_real(&f).into_iter().map(|v| -v).collect();
        let g = -dot(&c, &to_real(&u));
        let (dx, dw) = solver.solve(&rhs, g)?;
        let du = to_complex(&dx);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..6 {
            let trial: Vec<Complex64> = u.iter().zip(&du).map(|(a, b)| a + b * t).collect();
            let (tf, tr) = residual_of(omega + t * dw, &trial);
            if tr < res {
                u = trial;
                omega += t * dw;
                f = tf;
                res = tr;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            if res <= floor {
                break;
            }
            return Err(Error::NonConvergence {
                iterations,
                residual: res,
            });
        }
    }
    Ok(ContinuationPoint {
        gamma,
        omega,
        u: ComplexRadialField::new(grid, u)?,
        residual: res,
        iterations,
    })
}

/// `d omega / d gamma` along the branch at a converged point, from the
/// bordered system with right-hand side `-dF/dgamma = i e^{i(gamma-theta)}|u|^alpha u`.
pub fn domega_dgamma(
    point: &ContinuationPoint,
    params: &ProblemParams,
    grid: &RadialGrid,
    phase_ref: &ComplexRadialField,
) -> Result<f64> {
    check_angle("gamma", point.gamma)?;
    check_field(&point.u, grid)?;
    if point.u.max_abs() == 0.0 {
        return Err(Error::BadParameter("the zero field has no branch slope".into()));
    }
    let c = phase_row(grid, phase_ref)?;
    let jac = jacobian(point.gamma, point.omega, &point.u, params, grid)?;
    let solver = BorderedSolver::new(&jac, c)?;
    let e = Complex64::i() * rotation(point.gamma - params.theta);
    let rhs: Vec<Complex64> = point
        .u
        .values()
        .iter()
        .map(|&v| e * complex_nonlinearity(v, params.alpha))
        .collect();
    let (_, dw) = solver.solve(&to_real(&rhs), 0.0)?;
    Ok(dw)
}

/// Options for [`continue_path`].
#[derive(Debug, Clone, Copy)]
pub struct PathOptions {
    pub step0: f64,
    pub min_step: f64,
    pub max_step: f64,
}

impl Default for PathOptions {
    fn default() -> Self {
        PathOptions {
            step0: 0.01,
            min_step: MIN_STEP,
            max_step: MAX_STEP,
        }
    }
}

/// Follows the branch from `(theta, 0, U e^{i beta})` to `gamma_target`.
///
/// Secant predictor (trivial predictor for the first step), Newton corrector,
/// step halved on failure and doubled after three easy corrections, kept in
/// `[1e-5, 0.05]`. A step below the minimum ends the run with
/// [`Error::StepUnderflow`] carrying the points computed so far.
pub fn continue_path(
    ground: &GroundState,
    theta: f64,
    beta: f64,
    gamma_target: f64,
    step0: f64,
) -> Result<ContinuationPath> {
    continue_path_with(
        ground,
        theta,
        beta,
        gamma_target,
        PathOptions {
            step0,
            ..PathOptions::default()
        },
    )
}

pub fn continue_path_with(
    ground: &GroundState,
    theta: f64,
    beta: f64,
    gamma_target: f64,
    opts: PathOptions,
) -> Result<ContinuationPath> {
    check_angle("theta", theta)?;
    if check_angle("gamma", gamma_target).is_err() {
        return Err(Error::TargetOutsideRange(gamma_target));
    }
    if !(opts.step0 > 0.0 && opts.step0.is_finite()) {
        return Err(Error::BadParameter(format!("step must be positive, got {}", opts.step0)));
    }
    if !beta.is_finite() {
        return Err(Error::BadParameter("beta must be finite".into()));
    }
    let params = ground.params.with_theta(theta)?;
    let grid = &ground.grid;
    let start_u = ground.u.to_complex().scale(rotation(beta));
    let start = newton_correct(&ContinuationPoint::new(theta, 0.0, start_u.clone()), &params, grid, &start_u)?;
    let mut path = ContinuationPath {
        theta,
        beta,
        params,
        grid: grid.clone(),
        ground: ground.u.clone(),
        points: vec![start],
    };
    let direction = (gamma_target - theta).signum();
    let mut step = opts.step0.clamp(opts.min_step, opts.max_step);
    let mut easy = 0;
    loop {
        let cur = path.points.last().expect("path has a start point");
        let remaining = (gamma_target - cur.gamma).abs();
        if remaining <= 1e-14 {
            break;
        }
        let h = step.min(remaining);
        let gamma = if h == remaining {
            gamma_target
        } else {
            cur.gamma + direction * h
        };
        let guess = match path.points.len() {
            1 => ContinuationPoint::new(gamma, cur.omega, cur.u.clone()),
            n => {
                let prev = &path.points[n - 2];
                let s = (gamma - cur.gamma) / (cur.gamma - prev.gamma);
                let u = cur
                    .u
                    .values()
                    .iter()
                    .zip(prev.u.values())
                    .map(|(a, b)| a + (a - b) * s)
                    .collect();
                ContinuationPoint::new(
                    gamma,
                    cur.omega + (cur.omega - prev.omega) * s,
                    ComplexRadialField::new(grid, u)?,
                )
            }
        };
        match newton_correct(&guess, &path.params, grid, &cur.u) {
            Ok(p) if p.residual <= POINT_TOL => {
                log::debug!("gamma = {:.6} omega = {:.6e} its = {}", p.gamma, p.omega, p.iterations);
                if p.iterations <= EASY_ITERATIONS {
                    easy += 1;
                    if easy >= 3 {
                        step = (2.0 * step).min(opts.max_step);
                        easy = 0;
                    }
                } else {
                    easy = 0;
                }
                path.points.push(p);
            }
            Ok(_) | Err(Error::NonConvergence { .. }) | Err(Error::SingularBorderedSystem) => {
                easy = 0;
                step *= 0.5;
                if step < opts.min_step {
                    let gamma = path.points.last().map(|p| p.gamma).unwrap_or(theta);
                    let points = path.points.len();
                    return Err(Error::StepUnderflow {
                        gamma,
                        points,
                        partial: Box::new(path),
                    });
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{inner_product, norm, RealRadialField};
    use crate::grid::build_grid;
    use crate::ground_state::solve_ground_state;
    use crate::params::DomainKind;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ground(domain: DomainKind, dim: usize, m: usize) -> GroundState {
        let p = ProblemParams::new(domain, dim, 2.0, 1.0, 0.0).unwrap();
        let g = build_grid(&p, m, None).unwrap();
        solve_ground_state(&p, &g, None).unwrap()
    }

    fn random_field(grid: &RadialGrid, rng: &mut ChaCha8Rng) -> ComplexRadialField {
        ComplexRadialField::new(
            grid,
            grid.nodes()
                .iter()
                .map(|r| {
                    let env = (-r * r / 4.0).exp();
                    Complex64::new(rng.gen_range(-1.0..1.0) * env, rng.gen_range(-1.0..1.0) * env)
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn f_vanishes_at_the_base_point() {
        let u = ground(DomainKind::WholeSpace, 1, 600);
        for &(theta, beta) in &[(0.0, 0.0), (0.3, 1.0), (-0.7, 2.5)] {
            let p = u.params.with_theta(theta).unwrap();
            let uc = u.u.to_complex().scale(rotation(beta));
            let r = relative_residual(theta, 0.0, &uc, &p, &u.grid).unwrap();
            assert!(r <= u.residual_norm + rounding_floor(u.grid.spacing()), "{r}");
        }
    }

    #[test]
    fn f_at_doubled_ground_state() {
        let u = ground(DomainKind::UnitBall, 2, 200);
        let two = u.u.to_complex().scale(Complex64::new(2.0, 0.0));
        let f = evaluate_f(0.0, 0.0, &two, &u.params, &u.grid).unwrap();
        let tol = 2.0 * u.residual_norm * u.l2_norm();
        let diff: Vec<Complex64> = f
            .values()
            .iter()
            .zip(u.values())
            .map(|(z, v)| z - Complex64::new(-6.0 * v.powi(3), 0.0))
            .collect();
        assert!(weighted_cnorm(u.grid.weights(), &diff) <= tol + 1e-12);
    }

    #[test]
    fn rejects_gamma_out_of_range() {
        let u = ground(DomainKind::UnitBall, 1, 50);
        let uc = u.u.to_complex();
        assert!(matches!(evaluate_f(1.6, 0.0, &uc, &u.params, &u.grid), Err(Error::BadParameter(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn f_is_phase_equivariant(seed in 0u64..1000, beta in -3.0f64..3.0, gamma in -1.5f64..1.5, omega in -2.0f64..2.0) {
            let g = RadialGrid::new(DomainKind::WholeSpace, 2, 40, 6.0).unwrap();
            let p = ProblemParams::new(DomainKind::WholeSpace, 2, 2.0, 1.0, 0.4).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = random_field(&g, &mut rng);
            let e = rotation(beta);
            let a = evaluate_f(gamma, omega, &u.scale(e), &p, &g).unwrap();
            let b = evaluate_f(gamma, omega, &u, &p, &g).unwrap().scale(e);
            let scale = b.max_abs().max(1.0);
            for (x, y) in a.values().iter().zip(b.values()) {
                prop_assert!((x - y).norm() <= 1e-14 * scale * 10.0);
            }
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let u = ground(DomainKind::WholeSpace, 1, 300);
        let p = u.params.with_theta(0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let base = u.u.to_complex().scale(Complex64::new(0.9, 0.2));
        let (gamma, omega) = (0.45, 0.1);
        let jac = jacobian(gamma, omega, &base, &p, &u.grid).unwrap();
        let eps = 1e-5;
        for _ in 0..10 {
            let v = random_field(&u.grid, &mut rng);
            let plus = base.add(&v.scale(Complex64::new(eps, 0.0))).unwrap();
            let minus = base.sub(&v.scale(Complex64::new(eps, 0.0))).unwrap();
            let fd = evaluate_f(gamma, omega, &plus, &p, &u.grid)
                .unwrap()
                .sub(&evaluate_f(gamma, omega, &minus, &p, &u.grid).unwrap())
                .unwrap()
                .scale(Complex64::new(0.5 / eps, 0.0));
            let jv = jac.apply(&v).unwrap();
            let err = norm(&fd.sub(&jv).unwrap(), &u.grid).unwrap();
            assert!(err <= 1e-6 * norm(&v, &u.grid).unwrap(), "{err}");
        }
        // omega column
        let fo = evaluate_f(gamma, omega + eps, &base, &p, &u.grid)
            .unwrap()
            .sub(&evaluate_f(gamma, omega - eps, &base, &p, &u.grid).unwrap())
            .unwrap()
            .scale(Complex64::new(0.5 / eps, 0.0));
        let err = norm(&fo.sub(&jac.domega()).unwrap(), &u.grid).unwrap();
        assert!(err <= 1e-8 * norm(&base, &u.grid).unwrap());
    }

    #[test]
    fn jacobian_at_base_is_the_linearization() {
        let u = ground(DomainKind::UnitBall, 3, 200);
        let jac = jacobian(0.0, 0.0, &u.u.to_complex(), &u.params, &u.grid).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let v = random_field(&u.grid, &mut rng);
        let a = jac.apply(&v).unwrap();
        let b = crate::linearized::apply_l(&v, &u).unwrap();
        let err = norm(&a.sub(&b).unwrap(), &u.grid).unwrap();
        assert!(err <= 1e-12 * norm(&b, &u.grid).unwrap());
        // conjugation identity at beta != 0
        let beta = 0.8;
        let e = rotation(beta);
        let p = u.params.with_theta(0.4).unwrap();
        let rot = jacobian(0.4, 0.0, &u.u.to_complex().scale(e), &p, &u.grid).unwrap();
        let plain = jacobian(0.4, 0.0, &u.u.to_complex(), &p, &u.grid).unwrap();
        let mu = 0.37;
        let lhs = rot.apply_full(mu, &v).unwrap();
        let rhs = plain.apply_full(mu, &v.scale(e.conj())).unwrap().scale(e);
        let err = norm(&lhs.sub(&rhs).unwrap(), &u.grid).unwrap();
        assert!(err <= 1e-12 * norm(&lhs, &u.grid).unwrap());
    }

    #[test]
    fn mu_projection_examples() {
        let u = ground(DomainKind::UnitBall, 2, 200);
        let iu = u.u.to_complex().scale(Complex64::i());
        let (mu, ft) = mu_projection(&iu, &u, 0.0).unwrap();
        assert!((mu + 1.0).abs() < 1e-14);
        assert!(ft.max_abs() < 1e-14 * u.peak());
        let theta = 0.6;
        let (mu, ft) = mu_projection(&iu, &u, theta).unwrap();
        assert!((mu + 1.0 / theta.cos()).abs() < 1e-13);
        for (z, v) in ft.values().iter().zip(u.values()) {
            assert!((z.re + theta.tan() * v).abs() < 1e-12 * u.peak());
            assert!(z.im.abs() < 1e-12 * u.peak());
        }
        let real = RealRadialField::from_fn(&u.grid, |r| 1.0 - r).to_complex();
        let (mu, ft) = mu_projection(&real, &u, 0.3).unwrap();
        assert_eq!(mu, 0.0);
        assert_eq!(ft, real);
        assert!(matches!(
            mu_projection(&real, &u, std::f64::consts::FRAC_PI_2),
            Err(Error::BadParameter(_))
        ));
    }

    #[test]
    fn mu_projection_orthogonality() {
        let u = ground(DomainKind::WholeSpace, 2, 200);
        let iu = u.u.to_complex().scale(Complex64::i());
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..100 {
            let f = random_field(&u.grid, &mut rng);
            let theta = rng.gen_range(-1.5..1.5);
            let (_, ft) = mu_projection(&f, &u, theta).unwrap();
            let ip = inner_product(&ft, &iu, &u.grid).unwrap();
            let scale = norm(&f, &u.grid).unwrap() * u.l2_norm() / theta.cos();
            assert!(ip.abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn newton_recovers_perturbed_start() {
        let u = ground(DomainKind::WholeSpace, 1, 600);
        let p = u.params.with_theta(0.3).unwrap();
        let beta = 0.7;
        let start = u.u.to_complex().scale(rotation(beta));
        let exact = newton_correct(&ContinuationPoint::new(0.3, 0.0, start.clone()), &p, &u.grid, &start).unwrap();
        assert_eq!(exact.iterations, 0);
        assert_eq!(exact.u, start);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noisy = ComplexRadialField::new(
            &u.grid,
            start
                .values()
                .iter()
                .map(|z| z + Complex64::new(rng.gen_range(-1e-3..1e-3), rng.gen_range(-1e-3..1e-3)))
                .collect(),
        )
        .unwrap();
        let back = newton_correct(&ContinuationPoint::new(0.3, 0.02, noisy), &p, &u.grid, &start).unwrap();
        assert!(back.residual <= CORRECT_TOL);
        assert!(back.omega.abs() <= 1e-8);
        let err = back.u.sub(&start).unwrap().max_abs();
        assert!(err <= 1e-8 * u.peak(), "{err}");
        let zero = ComplexRadialField::zeros(&u.grid);
        assert!(matches!(
            newton_correct(&ContinuationPoint::new(0.3, 0.0, start.clone()), &p, &u.grid, &zero),
            Err(Error::BadParameter(_))
        ));
    }

    #[test]
    fn single_point_path() {
        let u = ground(DomainKind::WholeSpace, 1, 400);
        let path = continue_path(&u, 0.3, 0.0, 0.3, 0.01).unwrap();
        assert_eq!(path.len(), 1);
        assert_eq!(path.points[0].omega, 0.0);
        assert_eq!(path.points[0].u, u.u.to_complex());
        assert!(matches!(continue_path(&u, 0.3, 0.0, 1.6, 0.01), Err(Error::TargetOutsideRange(_))));
    }

    #[test]
    fn path_slope_and_symmetry() {
        let u = ground(DomainKind::WholeSpace, 1, 600);
        let path = continue_path(&u, 0.3, 0.0, 0.6, 0.01).unwrap();
        assert!((path.last().unwrap().gamma - 0.6).abs() < 1e-14);
        assert!(path.points.windows(2).all(|w| w[1].gamma > w[0].gamma));
        let mut max_slope: f64 = 0.0;
        let slopes: Vec<f64> = path
            .points
            .iter()
            .map(|pt| domega_dgamma(pt, &path.params, &u.grid, &pt.u).unwrap())
            .collect();
        for s in &slopes {
            max_slope = max_slope.max(s.abs());
        }
        for (w, s) in path.points.windows(2).zip(&slopes) {
            assert!(w[0].residual <= POINT_TOL);
            assert!((w[1].omega - w[0].omega).abs() <= 2.0 * max_slope * (w[1].gamma - w[0].gamma), "{s}");
        }
        // base-point slope: int U^{alpha+2} / (cos theta ||U||^2)
        let w = u.grid.weights();
        let p4: f64 = u.values().iter().zip(w).map(|(v, w)| w * v.powi(4)).sum();
        let exact = p4 / (0.3f64.cos() * u.l2_norm().powi(2));
        assert!((slopes[0] - exact).abs() <= 1e-8 * exact);
        // conjugate branch has the same slope
        let mirrored = continue_path(&u, -0.3, 0.0, -0.35, 0.01).unwrap();
        let s = domega_dgamma(&mirrored.points[0], &mirrored.params, &u.grid, &mirrored.points[0].u).unwrap();
        assert!((s - slopes[0]).abs() <= 1e-10 * exact);
        for pt in &mirrored.points {
            let twin = newton_correct(
                &ContinuationPoint::new(-pt.gamma, -pt.omega, pt.u.conj()),
                &path.params,
                &u.grid,
                &pt.u.conj(),
            )
            .unwrap();
            assert!((twin.omega + pt.omega).abs() < 1e-10);
        }
    }

    #[test]
    fn slope_rejects_zero_field() {
        let u = ground(DomainKind::UnitBall, 1, 50);
        let zero = ContinuationPoint::new(0.0, 0.0, ComplexRadialField::zeros(&u.grid));
        assert!(matches!(
            domega_dgamma(&zero, &u.params, &u.grid, &u.u.to_complex()),
            Err(Error::BadParameter(_))
        ));
    }
}
