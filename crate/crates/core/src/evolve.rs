//! Time integration of `phi_t + e^{i theta}(rho phi - Lap phi) = e^{i gamma}|phi|^alpha phi`.
//!
//! Crank-Nicolson on the linear part, with the nonlinearity evaluated
//! explicitly at a predicted midpoint:
//!
//! ```text
//! (I + dt/2 A) phi*      = (I - dt/2 A) phi_n + dt e^{i gamma} N(phi_n)
//! (I + dt/2 A) phi_{n+1} = (I - dt/2 A) phi_n + dt e^{i gamma} N((phi_n + phi*)/2)
//! ```
//!
//! with `A = e^{i theta}(rho - Lap)` and `N(phi) = |phi|^alpha phi`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::banded::{BandLu, BandMatrix};
use crate::continuation::ContinuationPoint;
use crate::error::{Error, Result};
use crate::field::{weighted_cnorm, ComplexRadialField};
use crate::grid::RadialGrid;
use crate::ground_state::{complex_nonlinearity, energy};
use crate::laplacian::{assemble_laplacian, RadialLaplacian};
use crate::params::ProblemParams;

/// Runs stop when the norm grows past this multiple of the initial norm.
pub const BLOWUP_FACTOR: f64 = 1e6;
/// Target number of samples per trajectory.
pub const SAMPLES: f64 = 100.0;

/// Nonlinear phase of the defocusing problem paired with `gamma`.
pub fn defocusing(gamma: f64) -> f64 {
    gamma + PI
}

/// Factored one-step map for fixed `dt`, `gamma` and parameters.
#[derive(Debug, Clone)]
pub struct Stepper {
    grid: RadialGrid,
    lap: RadialLaplacian,
    lu: BandLu,
    dt: f64,
    rho: f64,
    alpha: f64,
    rot_theta: Complex64,
    rot_gamma: Complex64,
    nonlinear: bool,
}

impl Stepper {
    pub fn new(params: &ProblemParams, grid: &RadialGrid, dt: f64, gamma: f64) -> Result<Self> {
        params.validate()?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::BadParameter(format!("time step must be positive, got {dt}")));
        }
        if !gamma.is_finite() {
            return Err(Error::BadParameter("gamma must be finite".into()));
        }
        if params.theta.cos() <= 0.0 {
            return Err(Error::BadParameter("cos(theta) must be positive".into()));
        }
        let lap = assemble_laplacian(grid);
        let m = grid.points();
        let node = lap.band(&vec![params.rho; m]);
        let rot_theta = Complex64::from_polar(1.0, params.theta);
        let rot = [[rot_theta.re, -rot_theta.im], [rot_theta.im, rot_theta.re]];
        let mut band = BandMatrix::zeros(2 * m, 3, 3);
        for i in 0..m {
            for j in i.saturating_sub(1)..(i + 2).min(m) {
                let b = node.get(i, j);
                for r in 0..2 {
                    for s in 0..2 {
                        band.set(2 * i + r, 2 * j + s, 0.5 * dt * rot[r][s] * b);
                    }
                }
            }
            band.add(2 * i, 2 * i, 1.0);
            band.add(2 * i + 1, 2 * i + 1, 1.0);
        }
        Ok(Stepper {
            grid: grid.clone(),
            lap,
            lu: band.factor()?,
            dt,
            rho: params.rho,
            alpha: params.alpha,
            rot_theta,
            rot_gamma: Complex64::from_polar(1.0, gamma),
            nonlinear: true,
        })
    }

    /// Drops the nonlinear term, leaving the linear Crank-Nicolson scheme.
    pub fn linear_only(mut self) -> Self {
        self.nonlinear = false;
        self
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn solve(&self, rhs: Vec<Complex64>) -> Vec<Complex64> {
        let mut x: Vec<f64> = rhs.iter().flat_map(|z| [z.re, z.im]).collect();
        self.lu.solve_in_place(&mut x);
        x.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect()
    }

    fn forcing(&self, phi: &[Complex64]) -> Vec<Complex64> {
        if !self.nonlinear {
            return vec![Complex64::new(0.0, 0.0); phi.len()];
        }
        phi.iter()
            .map(|&z| self.rot_gamma * complex_nonlinearity(z, self.alpha))
            .collect()
    }

    /// Advances nodal values by one step.
    pub fn advance(&self, phi: &[Complex64]) -> Vec<Complex64> {
        let h = 0.5 * self.dt;
        let lp = self.lap.apply_complex(phi);
        let explicit: Vec<Complex64> = phi
            .iter()
            .zip(&lp)
            .map(|(&z, &l)| z - self.rot_theta * (self.rho * z + l) * h)
            .collect();
        if !self.nonlinear {
            return self.solve(explicit);
        }
        let n0 = self.forcing(phi);
        let pred = self.solve(
            explicit
                .iter()
                .zip(&n0)
                .map(|(e, n)| e + n * self.dt)
                .collect(),
        );
        let mid: Vec<Complex64> = phi.iter().zip(&pred).map(|(a, b)| (a + b) * 0.5).collect();
        let n1 = self.forcing(&mid);
        self.solve(
            explicit
                .iter()
                .zip(&n1)
                .map(|(e, n)| e + n * self.dt)
                .collect(),
        )
    }

    pub fn step(&self, phi: &ComplexRadialField) -> Result<ComplexRadialField> {
        if phi.grid_key() != self.grid.key() {
            return Err(Error::FieldGridMismatch);
        }
        ComplexRadialField::new(&self.grid, self.advance(phi.values()))
    }
}

/// One time step of size `dt`.
pub fn step(
    phi: &ComplexRadialField,
    dt: f64,
    gamma: f64,
    params: &ProblemParams,
    grid: &RadialGrid,
) -> Result<ComplexRadialField> {
    Stepper::new(params, grid, dt, gamma)?.step(phi)
}

#[derive(Debug, Clone)]
pub struct TrajectorySummary {
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    /// `||phi(t) - e^{i omega t} u|| / ||u||`, present when a reference point was given.
    pub drift: Option<Vec<f64>>,
    /// Energy of the focusing problem at each sample.
    pub energies: Vec<f64>,
    pub final_field: ComplexRadialField,
}

impl TrajectorySummary {
    pub fn max_drift(&self) -> Option<f64> {
        self.drift
            .as_ref()
            .map(|d| d.iter().copied().fold(0.0, f64::max))
    }

    /// True when no sampled norm exceeds its predecessor by more than
    /// `rel_tol` relative.
    pub fn monotone_decay(&self, rel_tol: f64) -> bool {
        self.norms
            .windows(2)
            .all(|w| w[1] <= w[0] * (1.0 + rel_tol))
    }

    /// CSV with header `t,l2norm,drift` (`nan` drift without a reference).
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,l2norm,drift\n");
        for (k, (t, n)) in self.times.iter().zip(&self.norms).enumerate() {
            let d = self.drift.as_ref().map(|d| d[k]).unwrap_or(f64::NAN);
            s.push_str(&format!("{:.16e},{:.16e},{:.6e}\n", t, n, d));
        }
        s
    }
}

/// Options for [`evolve_with`].
#[derive(Debug, Clone, Copy)]
pub struct EvolveOptions {
    /// Disables the nonlinear term.
    pub linear_only: bool,
}

/// Integrates from `phi0` to time `t_final`, sampling every
/// `max(1, floor(t_final / (100 dt)))` steps and at the final time.
pub fn evolve(
    phi0: &ComplexRadialField,
    t_final: f64,
    dt: f64,
    gamma: f64,
    params: &ProblemParams,
    grid: &RadialGrid,
    reference: Option<&ContinuationPoint>,
) -> Result<TrajectorySummary> {
    evolve_with(
        phi0,
        t_final,
        dt,
        gamma,
        params,
        grid,
        reference,
        EvolveOptions { linear_only: false },
    )
}

#[allow(clippy::too_many_arguments)]
pub fn evolve_with(
    phi0: &ComplexRadialField,
    t_final: f64,
    dt: f64,
    gamma: f64,
    params: &ProblemParams,
    grid: &RadialGrid,
    reference: Option<&ContinuationPoint>,
    opts: EvolveOptions,
) -> Result<TrajectorySummary> {
    if phi0.grid_key() != grid.key() {
        return Err(Error::FieldGridMismatch);
    }
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(Error::BadParameter(format!("final time must be nonnegative, got {t_final}")));
    }
    let mut stepper = Stepper::new(params, grid, dt, gamma)?;
    if opts.linear_only {
        stepper = stepper.linear_only();
    }
    if let Some(r) = reference {
        if r.u.grid_key() != grid.key() {
            return Err(Error::FieldGridMismatch);
        }
    }
    let w = grid.weights();
    let steps = (t_final / dt).round() as usize;
    let stride = ((t_final / (SAMPLES * dt)).floor() as usize).max(1);
    let ref_norm = reference.map(|r| weighted_cnorm(w, r.u.values()));
    let norm0 = weighted_cnorm(w, phi0.values());

    let mut out = TrajectorySummary {
        times: Vec::new(),
        norms: Vec::new(),
        drift: reference.map(|_| Vec::new()),
        energies: Vec::new(),
        final_field: phi0.clone(),
    };
    let sample = |k: usize, phi: &[Complex64], out: &mut TrajectorySummary| -> Result<()> {
        let t = k as f64 * dt;
        out.times.push(t);
        out.norms.push(weighted_cnorm(w, phi));
        if let (Some(r), Some(d), Some(rn)) = (reference, out.drift.as_mut(), ref_norm) {
            let rot = Complex64::from_polar(1.0, r.omega * t);
            let diff: Vec<Complex64> = phi.iter().zip(r.u.values()).map(|(a, b)| a - rot * b).collect();
            d.push(weighted_cnorm(w, &diff) / rn);
        }
        let field = ComplexRadialField::new(grid, phi.to_vec())?;
        out.energies.push(energy(&field, params, grid)?);
        Ok(())
    };

    let mut phi = phi0.values().to_vec();
    sample(0, &phi, &mut out)?;
    for k in 1..=steps {
        phi = stepper.advance(&phi);
        let n = weighted_cnorm(w, &phi);
        if !n.is_finite() || n > BLOWUP_FACTOR * norm0 {
            return Err(Error::NumericalBlowup { time: k as f64 * dt });
        }
        if k % stride == 0 || k == steps {
            sample(k, &phi, &mut out)?;
        }
    }
    out.final_field = ComplexRadialField::new(grid, phi)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::continuation::continue_path;
    use crate::eigen::TridiagPencil;
    use crate::grid::build_grid;
    use crate::ground_state::solve_ground_state;
    use crate::params::{sphere_measure, DomainKind};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dirichlet_mode(grid: &RadialGrid, k: usize) -> (f64, ComplexRadialField) {
        let lap = assemble_laplacian(grid);
        let (d, o) = lap.symmetric_with_potential(&vec![0.0; grid.points()]);
        let pencil = TridiagPencil::new(d, o, lap.mass().to_vec()).unwrap();
        let pair = pencil.eigenpairs(k, 1).unwrap().remove(0);
        let s = 1.0 / (sphere_measure(grid.dim()) * grid.spacing()).sqrt();
        let v = pair.vector.iter().map(|x| Complex64::new(x * s, 0.0)).collect();
        (pair.value, ComplexRadialField::new(grid, v).unwrap())
    }

    fn linear_mode_error(dt: f64) -> f64 {
        let p = ProblemParams::new(DomainKind::UnitBall, 2, 2.0, 1.0, 0.5).unwrap();
        let g = build_grid(&p, 100, None).unwrap();
        let (lambda, psi) = dirichlet_mode(&g, 1);
        let t = 0.05;
        let traj = evolve_with(&psi, t, dt, 0.0, &p, &g, None, EvolveOptions { linear_only: true }).unwrap();
        let decay = (-Complex64::from_polar(1.0, 0.5) * (1.0 + lambda) * t).exp();
        let exact = psi.scale(decay);
        let d = traj.final_field.sub(&exact).unwrap();
        weighted_cnorm(g.weights(), d.values()) / weighted_cnorm(g.weights(), exact.values())
    }

    #[test]
    fn linear_modes_at_second_order() {
        let errs: Vec<f64> = [1e-3, 5e-4, 2.5e-4].iter().map(|&dt| linear_mode_error(dt)).collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((3.5..=4.5).contains(&ratio), "{errs:?}");
        }
    }

    #[test]
    fn ground_state_is_stationary() {
        let p = ProblemParams::new(DomainKind::UnitBall, 2, 2.0, 1.0, 0.2).unwrap();
        let g = build_grid(&p, 200, None).unwrap();
        let u = solve_ground_state(&p, &g, None).unwrap();
        let reference = ContinuationPoint::new(0.2, 0.0, u.u.to_complex());
        let traj = evolve(&u.u.to_complex(), 0.1, 1e-4, 0.2, &p, &g, Some(&reference)).unwrap();
        assert!(traj.max_drift().unwrap() <= 1e-6);
        assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(traj.times[0], 0.0);
        assert!((traj.times.last().unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_steps() {
        let p = ProblemParams::new(DomainKind::UnitBall, 1, 2.0, 1.0, 0.0).unwrap();
        let g = build_grid(&p, 20, None).unwrap();
        let z = ComplexRadialField::zeros(&g);
        assert!(matches!(step(&z, 0.0, 0.0, &p, &g), Err(Error::BadParameter(_))));
        assert!(matches!(step(&z, -1e-3, 0.0, &p, &g), Err(Error::BadParameter(_))));
    }

    #[test]
    fn zero_stays_zero() {
        let p = ProblemParams::new(DomainKind::WholeSpace, 1, 2.0, 1.0, 0.3).unwrap();
        let g = build_grid(&p, 100, None).unwrap();
        let z = ComplexRadialField::zeros(&g);
        let traj = evolve(&z, 0.1, 1e-3, 0.4, &p, &g, None).unwrap();
        assert!(traj.norms.iter().all(|&n| n == 0.0));
        assert_eq!(traj.final_field, z);
        assert_eq!(traj.times.len(), 101);
    }

    #[test]
    fn standing_wave_drift_is_small() {
        let p = ProblemParams::new(DomainKind::WholeSpace, 1, 2.0, 1.0, 0.3).unwrap();
        let g = build_grid(&p, 600, None).unwrap();
        let u = solve_ground_state(&p, &g, None).unwrap();
        let path = continue_path(&u, 0.3, 0.0, 0.45, 0.05).unwrap();
        let pt = path.last().unwrap();
        let traj = evolve(&pt.u, 0.2, 1e-3, pt.gamma, &path.params, &g, Some(pt)).unwrap();
        assert!(traj.max_drift().unwrap() <= 1e-3);
    }

    #[test]
    fn defocusing_norm_decays() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for &theta in &[0.0, 0.5] {
            let p = ProblemParams::new(DomainKind::WholeSpace, 1, 2.0, 1.0, theta).unwrap();
            let g = build_grid(&p, 300, None).unwrap();
            for _ in 0..3 {
                let (a, b, c) = (rng.gen_range(0.5..3.0), rng.gen_range(-2.0..2.0), rng.gen_range(0.2..2.0));
                let phi = ComplexRadialField::new(
                    &g,
                    g.nodes()
                        .iter()
                        .map(|r| Complex64::new(a, b) * (-c * r * r).exp())
                        .collect(),
                )
                .unwrap();
                let gamma = defocusing(rng.gen_range(-1.4..1.4));
                let traj = evolve(&phi, 0.5, 1e-3, gamma, &p, &g, None).unwrap();
                assert!(traj.monotone_decay(1e-12));
            }
        }
    }

    #[test]
    fn gradient_flow_energy_decreases() {
        let p = ProblemParams::new(DomainKind::WholeSpace, 1, 2.0, 1.0, 0.0).unwrap();
        let g = build_grid(&p, 300, None).unwrap();
        let phi = ComplexRadialField::new(
            &g,
            g.nodes().iter().map(|r| Complex64::new(1.2 * (-r * r / 2.0).exp(), 0.0)).collect(),
        )
        .unwrap();
        let traj = evolve(&phi, 1.0, 1e-3, 0.0, &p, &g, None).unwrap();
        for w in traj.energies.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * w[0].abs());
        }
    }
}
