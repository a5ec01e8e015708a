use isofit_core::mixtures::{equally_spaced, MixtureModel};
use isofit_core::ParameterVector;
use proptest::collection::vec;
use proptest::prelude::*;

fn pv(v: Vec<f64>) -> ParameterVector {
    ParameterVector::new(v).unwrap()
}

/// Composite trapezoid rule.
fn trapezoid(t: &[f64], y: &[f64]) -> f64 {
    t.windows(2)
        .zip(y.windows(2))
        .map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1]))
        .sum()
}

proptest! {
    #[test]
    fn signals_are_non_negative(xi in vec(1e-3f64..6.0, 8), shapes in vec(1.0f64..10.0, 2), scales in vec(0.05f64..2.0, 2)) {
        let grid = equally_spaced(0.0, 15.0, 151);
        let g = MixtureModel::gaussian(4).unwrap().evaluate(&pv(xi), &grid).unwrap();
        prop_assert!(g.iter().all(|v| *v >= 0.0 && v.is_finite()));
        let gamma = pv(vec![shapes[0], scales[0], shapes[1], scales[1]]);
        let r = MixtureModel::GammaMixture.evaluate(&gamma, &grid).unwrap();
        prop_assert!(r.iter().all(|v| *v >= 0.0 && v.is_finite()));
    }

    #[test]
    fn gaussian_mass_is_the_weight_sum(eta in vec(0.0f64..=1.0, 2), nu in vec(0.5f64..8.0, 2)) {
        // Oracle: each unit-variance component integrates to its weight.
        let xi: Vec<f64> = eta.iter().zip(&nu).flat_map(|(e, n)| [e * n, (1.0 - e) * n]).collect();
        let grid = equally_spaced(-20.0, 30.0, 20_001);
        let r = MixtureModel::gaussian(2).unwrap().evaluate(&pv(xi), &grid).unwrap();
        prop_assert!((trapezoid(&grid, &r) - eta.iter().sum::<f64>()).abs() < 1e-6);
    }

    #[test]
    fn component_order_does_not_matter(xi in vec(1e-3f64..6.0, 8), rot in 1usize..4) {
        let grid = equally_spaced(-4.0, 15.0, 100);
        let model = MixtureModel::gaussian(4).unwrap();
        let mut swapped = xi.clone();
        swapped.rotate_left(2 * rot);
        let a = model.evaluate(&pv(xi), &grid).unwrap();
        let b = model.evaluate(&pv(swapped), &grid).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-14 * x.abs().max(1e-300));
        }
        let gamma = [2.0, 0.5, 4.0, 0.75];
        let g1 = MixtureModel::GammaMixture.evaluate(&pv(gamma.to_vec()), &grid[25..]).unwrap();
        let g2 = MixtureModel::GammaMixture.evaluate(&pv(vec![4.0, 0.75, 2.0, 0.5]), &grid[25..]).unwrap();
        for (x, y) in g1.iter().zip(&g2) {
            prop_assert!((x - y).abs() <= 1e-15 * x.abs().max(1e-300));
        }
    }
}

#[test]
fn gamma_mass_is_two() {
    // Two unweighted densities; each integrates to one.
    let grid = equally_spaced(0.0, 30.0, 300_001);
    let r = MixtureModel::GammaMixture
        .evaluate(&pv(vec![4.0, 0.75, 2.0, 0.25]), &grid)
        .unwrap();
    let mass = trapezoid(&grid, &r);
    assert!((mass - 2.0).abs() < 1e-6, "{mass}");
}

#[test]
fn evaluation_is_deterministic() {
    let grid = equally_spaced(-4.0, 15.0, 100);
    let xi = pv(vec![1.0 / 6.0, 5.0 / 6.0, 2.5, 2.5, 16.0 / 3.0, 8.0 / 3.0, 9.0, 3.0]);
    let model = MixtureModel::gaussian(4).unwrap();
    let a = model.evaluate(&xi, &grid).unwrap();
    let b = model.evaluate(&xi, &grid).unwrap();
    assert_eq!(
        a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
}

#[test]
fn gamma_evaluate_matches_scalar_signal() {
    let grid = equally_spaced(0.0, 10.0, 200);
    let xi = pv(vec![4.0, 0.75, 2.0, 0.25]);
    let v = MixtureModel::GammaMixture.evaluate(&xi, &grid).unwrap();
    for (t, r) in grid.iter().zip(&v) {
        assert_eq!(*r, MixtureModel::GammaMixture.signal(&xi, *t).unwrap());
    }
}
