use std::sync::OnceLock;

use cglwaves::field::{inner_product, norm, ComplexRadialField};
use cglwaves::ground_state::{energy, rescale_rho, solve_ground_state, GroundState};
use cglwaves::laplacian::assemble_laplacian;
use cglwaves::linearized::assemble_l_minus;
use cglwaves::params::{DomainKind, ProblemParams};
use cglwaves::{build_grid, grid::RadialGrid};
use num_complex::Complex64;
use proptest::prelude::*;

fn domain() -> impl Strategy<Value = DomainKind> {
    prop_oneof![Just(DomainKind::WholeSpace), Just(DomainKind::UnitBall)]
}

fn grid_and_vectors() -> impl Strategy<Value = (RadialGrid, Vec<f64>, Vec<f64>)> {
    (domain(), 1usize..=3, 8usize..60).prop_flat_map(|(d, n, m)| {
        let grid = RadialGrid::new(d, n, m, 6.0).unwrap();
        (
            Just(grid),
            prop::collection::vec(-1.0f64..1.0, m),
            prop::collection::vec(-1.0f64..1.0, m),
        )
    })
}

fn dot_w(a: &[f64], b: &[f64], grid: &RadialGrid) -> f64 {
    a.iter().zip(b).zip(grid.weights()).map(|((x, y), w)| x * y * w).sum()
}

fn sech_state() -> &'static GroundState {
    static U: OnceLock<GroundState> = OnceLock::new();
    U.get_or_init(|| {
        let p = ProblemParams::new(DomainKind::WholeSpace, 1, 2.0, 1.0, 0.0).unwrap();
        let g = build_grid(&p, 1200, Some(15.0)).unwrap();
        solve_ground_state(&p, &g, None).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn negative_laplacian_is_symmetric_and_positive((grid, u, v) in grid_and_vectors()) {
        let lap = assemble_laplacian(&grid);
        let (au, av) = (lap.apply(&u), lap.apply(&v));
        let scale = dot_w(&au, &au, &grid).sqrt() * dot_w(&v, &v, &grid).sqrt();
        prop_assert!((dot_w(&au, &v, &grid) - dot_w(&u, &av, &grid)).abs() <= 1e-12 * scale.max(1.0));
        prop_assert!(dot_w(&au, &u, &grid) > 0.0);
    }

    #[test]
    fn phase_rotation_preserves_norm_and_energy((grid, u, v) in grid_and_vectors(), beta in -4.0f64..4.0) {
        let values: Vec<Complex64> = u.iter().zip(&v).map(|(&a, &b)| Complex64::new(a, b)).collect();
        let f = ComplexRadialField::new(&grid, values).unwrap();
        let g = f.scale(Complex64::from_polar(1.0, beta));
        let p = ProblemParams::new(grid.domain(), grid.dim(), 2.0, 1.0, 0.0).unwrap();
        prop_assert!((norm(&f, &grid).unwrap() - norm(&g, &grid).unwrap()).abs() <= 1e-13);
        let (ef, eg) = (energy(&f, &p, &grid).unwrap(), energy(&g, &p, &grid).unwrap());
        prop_assert!((ef - eg).abs() <= 1e-12 * ef.abs().max(1.0));
        // the real inner product of a field with i times itself vanishes
        let i_f = f.scale(Complex64::i());
        prop_assert!(inner_product(&f, &i_f, &grid).unwrap().abs() <= 1e-14);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn rho_rescaling_scales_peak_and_width(rho in 0.25f64..4.0) {
        let base = sech_state();
        let scaled = rescale_rho(base, rho).unwrap();
        prop_assert!((scaled.grid.rmax() - 15.0 / rho.sqrt()).abs() <= 1e-12);
        let peak = base.peak() * rho.sqrt();
        prop_assert!((scaled.peak() - peak).abs() <= 1e-6 * peak);
    }
}

#[test]
fn l_minus_annihilates_the_ground_state() {
    let u = sech_state();
    let lm = assemble_l_minus(u);
    let r = lm.apply(u.values());
    let rel = dot_w(&r, &r, &u.grid).sqrt() / dot_w(u.values(), u.values(), &u.grid).sqrt();
    assert!(rel <= 1e-9, "{rel:e}");
}
