use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qsocp::experiment::fit_power_law;
use qsocp::jordan::{arw, jordan_frame, jordan_product_block, quadratic_rep, spectral};
use qsocp::newton;
use qsocp::quantum::simulate_tomography;
use qsocp::{BlockVector, ConeStructure};

fn block(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, 1..=max_len)
}

fn interior_block(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    (block(max_len), 0.01..5.0f64).prop_map(|(mut v, margin)| {
        let bar: f64 = v[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
        v[0] = bar + margin;
        v
    })
}

fn unit(k: usize) -> DVector<f64> {
    let mut e = DVector::zeros(k);
    e[0] = 1.0;
    e
}

fn tol(v: &[f64]) -> f64 {
    1e-10 * (1.0 + v.iter().map(|x| x * x).sum::<f64>())
}

proptest! {
    #[test]
    fn arrow_matrix_applies_the_jordan_product(x in block(9), seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s: Vec<f64> = (0..x.len()).map(|_| rng.random_range(-5.0..5.0)).collect();
        let mut prod = vec![0.0; x.len()];
        jordan_product_block(&x, &s, &mut prod);
        let via = arw(&x) * DVector::from_column_slice(&s);
        prop_assert!((via - DVector::from_vec(prod)).norm() <= tol(&x) * (1.0 + s.iter().map(|v| v.abs()).sum::<f64>()));
        prop_assert!((arw(&x) * unit(x.len()) - DVector::from_column_slice(&x)).norm() <= tol(&x));
    }

    #[test]
    fn jordan_product_commutes(x in block(8), y in block(8)) {
        let k = x.len().min(y.len());
        let (x, y) = (&x[..k], &y[..k]);
        let (mut a, mut b) = (vec![0.0; k], vec![0.0; k]);
        jordan_product_block(x, y, &mut a);
        jordan_product_block(y, x, &mut b);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn quadratic_rep_maps_identity_to_square(x in block(9)) {
        let mut sq = vec![0.0; x.len()];
        jordan_product_block(&x, &x, &mut sq);
        let qe = quadratic_rep(&x) * unit(x.len());
        prop_assert!((qe - DVector::from_vec(sq)).norm() <= tol(&x) * (1.0 + tol(&x)));
        let q = quadratic_rep(&x);
        prop_assert!((&q - q.transpose()).amax() == 0.0);
    }

    #[test]
    fn spectral_decomposition_reconstructs(x in block(9)) {
        let (l1, l2) = spectral(&x);
        prop_assert!(l1 <= l2);
        let (c1, c2) = jordan_frame(&x);
        let rebuilt = DVector::from_vec(c1) * l1 + DVector::from_vec(c2) * l2;
        prop_assert!((rebuilt - DVector::from_column_slice(&x)).norm() <= tol(&x));
    }

    #[test]
    fn sqrt_is_interior_and_squares_back(x in interior_block(7)) {
        let s = Arc::new(ConeStructure::new(vec![x.len() - 1]).unwrap());
        let v = BlockVector::from_slice(s, &x).unwrap();
        let w = v.sqrt().unwrap();
        prop_assert!(w.is_interior());
        let back = w.jordan_product(&w).unwrap();
        prop_assert!((back.values() - v.values()).norm() <= 1e-10 * (1.0 + v.norm()));
    }

    #[test]
    fn max_step_stays_in_closed_cone(x in interior_block(7), d in block(7)) {
        let k = x.len().min(d.len());
        let s = Arc::new(ConeStructure::new(vec![k - 1]).unwrap());
        let mut xs = x[..k].to_vec();
        let bar: f64 = xs[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
        xs[0] = xs[0].max(bar + 0.01);
        let xv = BlockVector::from_slice(s.clone(), &xs).unwrap();
        let dv = BlockVector::from_slice(s, &d[..k]).unwrap();
        let a = xv.max_step(&dv).unwrap();
        prop_assert!(a > 0.0);
        if a.is_finite() {
            let inside = xv.axpy(0.999 * a, &dv).unwrap();
            prop_assert!(inside.is_interior());
            let edge = xv.axpy(a, &dv).unwrap();
            prop_assert!(edge.min_eigenvalue() <= 1e-8 * (1.0 + xv.norm() + a * dv.norm()));
        } else {
            prop_assert!(xv.axpy(1e6, &dv).unwrap().is_interior());
        }
    }

    #[test]
    fn zeta_is_at_least_one(seed in any::<u64>(), rows in 1usize..8, cols in 1usize..8) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0));
        prop_assume!(m.amax() > 0.0);
        prop_assert!(newton::zeta(&m).unwrap() >= 1.0 - 1e-12);
    }

    #[test]
    fn tomography_respects_its_bound(
        v in prop::collection::vec(-100.0..100.0f64, 1..20),
        delta in 0.0..0.9f64,
        norm_delta in 0.0..0.9f64,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = DVector::from_vec(v);
        let hat = simulate_tomography(&v, delta, norm_delta, &mut rng);
        prop_assert!((&hat - &v).norm() <= 2.0 * delta * v.norm());
    }

    #[test]
    fn power_law_exponent_is_scale_equivariant(
        ys in prop::collection::vec(0.1..100.0f64, 4..12),
        cx in 0.1..10.0f64,
        cy in 0.1..10.0f64,
    ) {
        let pts: Vec<(f64, f64)> = ys.iter().enumerate().map(|(i, &y)| ((i + 1) as f64, y)).collect();
        let base = fit_power_law(&pts).unwrap();
        let scaled: Vec<(f64, f64)> = pts.iter().map(|&(x, y)| (cx * x, cy * y)).collect();
        let fit = fit_power_law(&scaled).unwrap();
        prop_assert!((fit.b - base.b).abs() <= 1e-9 * (1.0 + base.b.abs()));
        let expected_a = cy * base.a * cx.powf(-base.b);
        prop_assert!((fit.a - expected_a).abs() <= 1e-8 * expected_a);
    }
}
