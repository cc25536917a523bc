use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laplacian::dirichlet_lambda1;
use crate::params::{sphere_measure, DomainKind, ProblemParams};

/// Smallest admissible number of grid cells.
pub const MIN_POINTS: usize = 8;

/// Identity of a grid; fields remember the key of the grid they were sampled on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridKey {
    pub domain: DomainKind,
    pub dim: usize,
    pub points: usize,
    rmax_bits: u64,
}

impl GridKey {
    pub fn rmax(&self) -> f64 {
        f64::from_bits(self.rmax_bits)
    }
}

/// Cell-centred radial mesh on `[0, rmax]`.
///
/// Nodes sit at `r_i = (i - 1/2) h`. Each node owns the spherical shell between
/// its two faces; `weights[i]` is the measure of that shell, which is the
/// midpoint rule `|S^{N-1}| r_i^{N-1} h` up to `O(h^3)` per cell (exact for N <= 2).
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    domain: DomainKind,
    dim: usize,
    rmax: f64,
    h: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    // shell measure divided by |S^{N-1}| h, equals r_i^{N-1} for N <= 2
    cell: Vec<f64>,
    // r^{N-1} at faces 0..=M; the inner face carries zero flux
    face: Vec<f64>,
}

impl RadialGrid {
    /// Builds the mesh without checking any physical parameter.
    pub fn new(domain: DomainKind, dim: usize, points: usize, rmax: f64) -> Result<Self> {
        if points < MIN_POINTS {
            return Err(Error::GridTooCoarse {
                points,
                min: MIN_POINTS,
            });
        }
        if dim < 1 {
            return Err(Error::BadParameter("dimension N must be >= 1".into()));
        }
        let rmax = match domain {
            DomainKind::UnitBall => 1.0,
            DomainKind::WholeSpace => {
                if !(rmax.is_finite() && rmax > 0.0) {
                    return Err(Error::BadParameter(format!(
                        "rmax must be positive, got {rmax}"
                    )));
                }
                rmax
            }
        };
        let h = rmax / points as f64;
        let nodes: Vec<f64> = (0..points).map(|i| (i as f64 + 0.5) * h).collect();
        let faces: Vec<f64> = (0..=points).map(|i| i as f64 * h).collect();
        let n = dim as i32;
        let cell: Vec<f64> = (0..points)
            .map(|i| {
                if dim <= 2 {
                    nodes[i].powi(n - 1)
                } else {
                    (faces[i + 1].powi(n) - faces[i].powi(n)) / (dim as f64 * h)
                }
            })
            .collect();
        let mut face: Vec<f64> = faces.iter().map(|r| r.powi(n - 1)).collect();
        face[0] = 0.0;
        let omega = sphere_measure(dim);
        let weights = cell.iter().map(|c| omega * c * h).collect();
        Ok(RadialGrid {
            domain,
            dim,
            rmax,
            h,
            nodes,
            weights,
            cell,
            face,
        })
    }

    pub fn domain(&self) -> DomainKind {
        self.domain
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> usize {
        self.nodes.len()
    }

    pub fn rmax(&self) -> f64 {
        self.rmax
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub(crate) fn cell(&self) -> &[f64] {
        &self.cell
    }

    pub(crate) fn face(&self) -> &[f64] {
        &self.face
    }

    pub fn key(&self) -> GridKey {
        GridKey {
            domain: self.domain,
            dim: self.dim,
            points: self.points(),
            rmax_bits: self.rmax.to_bits(),
        }
    }

    /// Same geometry with a different number of cells.
    pub fn with_points(&self, points: usize) -> Result<Self> {
        RadialGrid::new(self.domain, self.dim, points, self.rmax)
    }
}

/// Default truncation radius for whole-space problems.
pub fn default_rmax(rho: f64) -> f64 {
    (15.0 / rho.sqrt()).max(15.0)
}

/// Builds a grid for `params` and checks the grid-dependent admissibility
/// condition `rho > -lambda_1` on the ball.
pub fn build_grid(params: &ProblemParams, points: usize, rmax: Option<f64>) -> Result<RadialGrid> {
    params.validate()?;
    let rmax = match params.domain {
        DomainKind::UnitBall => 1.0,
        DomainKind::WholeSpace => rmax.unwrap_or_else(|| default_rmax(params.rho)),
    };
    let grid = RadialGrid::new(params.domain, params.dim, points, rmax)?;
    if params.domain == DomainKind::UnitBall {
        let lambda1 = dirichlet_lambda1(&grid)?;
        if params.rho <= -lambda1 {
            return Err(Error::BadParameter(format!(
                "ball problems need rho > -lambda_1 = {:.6}, got rho = {}",
                -lambda1, params.rho
            )));
        }
    }
    Ok(grid)
}
