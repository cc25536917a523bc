use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{GridKey, RadialGrid};

/// Real samples at the nodes of one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RealRadialField {
    grid: GridKey,
    values: Vec<f64>,
}

/// Complex samples at the nodes of one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexRadialField {
    grid: GridKey,
    values: Vec<Complex64>,
}

impl RealRadialField {
    pub fn new(grid: &RadialGrid, values: Vec<f64>) -> Result<Self> {
        Self::with_key(grid.key(), values)
    }

    pub fn with_key(grid: GridKey, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.points {
            return Err(Error::BadParameter(format!(
                "field has {} values, grid has {} points",
                values.len(),
                grid.points
            )));
        }
        Ok(RealRadialField { grid, values })
    }

    pub fn zeros(grid: &RadialGrid) -> Self {
        RealRadialField {
            grid: grid.key(),
            values: vec![0.0; grid.points()],
        }
    }

    pub fn from_fn(grid: &RadialGrid, f: impl Fn(f64) -> f64) -> Self {
        RealRadialField {
            grid: grid.key(),
            values: grid.nodes().iter().map(|&r| f(r)).collect(),
        }
    }

    pub fn grid_key(&self) -> GridKey {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        RealRadialField {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn to_complex(&self) -> ComplexRadialField {
        ComplexRadialField {
            grid: self.grid,
            values: self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub(crate) fn check_same(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::FieldGridMismatch);
        }
        Ok(())
    }
}

impl ComplexRadialField {
    pub fn new(grid: &RadialGrid, values: Vec<Complex64>) -> Result<Self> {
        Self::with_key(grid.key(), values)
    }

    pub fn with_key(grid: GridKey, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.points {
            return Err(Error::BadParameter(format!(
                "field has {} values, grid has {} points",
                values.len(),
                grid.points
            )));
        }
        Ok(ComplexRadialField { grid, values })
    }

    pub fn zeros(grid: &RadialGrid) -> Self {
        ComplexRadialField {
            grid: grid.key(),
            values: vec![Complex64::new(0.0, 0.0); grid.points()],
        }
    }

    pub fn grid_key(&self) -> GridKey {
        self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn re(&self) -> RealRadialField {
        RealRadialField {
            grid: self.grid,
            values: self.values.iter().map(|z| z.re).collect(),
        }
    }

    pub fn im(&self) -> RealRadialField {
        RealRadialField {
            grid: self.grid,
            values: self.values.iter().map(|z| z.im).collect(),
        }
    }

    pub fn from_parts(re: &RealRadialField, im: &RealRadialField) -> Result<Self> {
        re.check_same(im)?;
        Ok(ComplexRadialField {
            grid: re.grid,
            values: re
                .values
                .iter()
                .zip(&im.values)
                .map(|(&a, &b)| Complex64::new(a, b))
                .collect(),
        })
    }

    /// Multiplies every value by `z`.
    pub fn scale(&self, z: Complex64) -> Self {
        ComplexRadialField {
            grid: self.grid,
            values: self.values.iter().map(|v| v * z).collect(),
        }
    }

    pub fn conj(&self) -> Self {
        ComplexRadialField {
            grid: self.grid,
            values: self.values.iter().map(|v| v.conj()).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(ComplexRadialField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(ComplexRadialField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub(crate) fn check_same(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::FieldGridMismatch);
        }
        Ok(())
    }
}

fn check_grid(key: GridKey, grid: &RadialGrid) -> Result<()> {
    if key != grid.key() {
        return Err(Error::FieldGridMismatch);
    }
    Ok(())
}

/// Real scalar product `Re sum_i w_i u_i conj(v_i)` on the grid.
pub fn inner_product(u: &ComplexRadialField, v: &ComplexRadialField, grid: &RadialGrid) -> Result<f64> {
    u.check_same(v)?;
    check_grid(u.grid, grid)?;
    Ok(u.values
        .iter()
        .zip(&v.values)
        .zip(grid.weights())
        .map(|((a, b), w)| w * (a.re * b.re + a.im * b.im))
        .sum())
}

/// Quadrature of `u v` with the node weights.
pub fn real_inner_product(u: &RealRadialField, v: &RealRadialField, grid: &RadialGrid) -> Result<f64> {
    u.check_same(v)?;
    check_grid(u.grid, grid)?;
    Ok(weighted_dot(grid.weights(), &u.values, &v.values))
}

/// `sum_i w_i U_i^alpha u_i v_i`.
pub fn weighted_inner_product_sigma(
    u: &RealRadialField,
    v: &RealRadialField,
    ground: &RealRadialField,
    alpha: f64,
    grid: &RadialGrid,
) -> Result<f64> {
    u.check_same(v)?;
    u.check_same(ground)?;
    check_grid(u.grid, grid)?;
    Ok(u.values
        .iter()
        .zip(&v.values)
        .zip(&ground.values)
        .zip(grid.weights())
        .map(|(((a, b), g), w)| w * g.abs().powf(alpha) * a * b)
        .sum())
}

pub fn norm(u: &ComplexRadialField, grid: &RadialGrid) -> Result<f64> {
    Ok(inner_product(u, u, grid)?.sqrt())
}

pub fn real_norm(u: &RealRadialField, grid: &RadialGrid) -> Result<f64> {
    Ok(real_inner_product(u, u, grid)?.sqrt())
}

pub(crate) fn weighted_dot(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    w.iter().zip(a).zip(b).map(|((w, a), b)| w * a * b).sum()
}

pub(crate) fn weighted_norm(w: &[f64], a: &[f64]) -> f64 {
    weighted_dot(w, a, a).sqrt()
}

pub(crate) fn weighted_cnorm(w: &[f64], a: &[Complex64]) -> f64 {
    w.iter().zip(a).map(|(w, z)| w * z.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::DomainKind;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn unit_ball_volume() {
        let g = RadialGrid::new(DomainKind::UnitBall, 3, 200, 1.0).unwrap();
        let one = RealRadialField::from_fn(&g, |_| 1.0).to_complex();
        let v = inner_product(&one, &one, &g).unwrap();
        assert!((v - 4.0 * PI / 3.0).abs() < 4.0 * PI / 3.0 * g.spacing().powi(2));
    }

    #[test]
    fn sech_norm() {
        // ||sqrt(2) sech||^2 over the real line is 4
        let g = RadialGrid::new(DomainKind::WholeSpace, 1, 3000, 15.0).unwrap();
        let u = RealRadialField::from_fn(&g, |r| 2f64.sqrt() / r.cosh()).to_complex();
        let v = inner_product(&u, &u, &g).unwrap();
        assert!((v - 4.0).abs() < 1e-6, "{v}");
    }

    #[test]
    fn zero_sigma_weight() {
        let g = RadialGrid::new(DomainKind::UnitBall, 2, 32, 1.0).unwrap();
        let u = RealRadialField::from_fn(&g, |r| 1.0 + r);
        let zero = RealRadialField::zeros(&g);
        assert_eq!(weighted_inner_product_sigma(&u, &u, &zero, 2.0, &g).unwrap(), 0.0);
    }

    #[test]
    fn mismatched_grids() {
        let g1 = RadialGrid::new(DomainKind::UnitBall, 2, 32, 1.0).unwrap();
        let g2 = RadialGrid::new(DomainKind::UnitBall, 2, 33, 1.0).unwrap();
        let a = ComplexRadialField::zeros(&g1);
        let b = ComplexRadialField::zeros(&g2);
        assert_eq!(inner_product(&a, &b, &g1), Err(Error::FieldGridMismatch));
        assert_eq!(inner_product(&a, &a, &g2), Err(Error::FieldGridMismatch));
        assert!(RealRadialField::new(&g1, vec![0.0; 5]).is_err());
    }

    proptest! {
        #[test]
        fn real_part_product_properties(
            vals in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0, -10.0f64..10.0, -10.0f64..10.0), 16),
            s in -3.0f64..3.0,
        ) {
            let g = RadialGrid::new(DomainKind::UnitBall, 3, 16, 1.0).unwrap();
            let u = ComplexRadialField::new(&g, vals.iter().map(|t| Complex64::new(t.0, t.1)).collect()).unwrap();
            let v = ComplexRadialField::new(&g, vals.iter().map(|t| Complex64::new(t.2, t.3)).collect()).unwrap();
            let iu = u.scale(Complex64::i());
            // (v, iv) = 0 exactly
            prop_assert_eq!(inner_product(&u, &iu, &g).unwrap(), 0.0);
            let uv = inner_product(&u, &v, &g).unwrap();
            let vu = inner_product(&v, &u, &g).unwrap();
            prop_assert!((uv - vu).abs() <= 1e-12 * (1.0 + uv.abs()));
            let su = u.scale(Complex64::new(s, 0.0));
            let suv = inner_product(&su, &v, &g).unwrap();
            prop_assert!((suv - s * uv).abs() <= 1e-10 * (1.0 + uv.abs()));
        }
    }
}
