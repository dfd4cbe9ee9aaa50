use super::*;
use approx::assert_relative_eq;
use proptest::prelude::*;

fn v(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

fn dip_metric() -> FnMetric<impl Fn(&DVector<f64>, &DVector<f64>) -> DMatrix<f64>> {
    FnMetric::new(|c: &DVector<f64>, _: &DVector<f64>| DMatrix::from_diagonal(&v(&[1.0 + c[1] * c[1], 1.0])))
}

#[test]
fn euclidean_energy_is_squared_distance() {
    let m = ConstantMetric(DMatrix::identity(3, 3));
    let (a, b) = (v(&[0.3, -1.0, 2.0]), v(&[1.0, 1.0, -0.5]));
    let p = Path::straight(&a, &b, 7).unwrap();
    assert_relative_eq!(energy(&m, &p, &a), (&b - &a).norm_squared(), epsilon = 1e-12);
    let two = ConstantMetric(DMatrix::identity(2, 2) * 2.0);
    let p = Path::straight(&v(&[0.0, 0.0]), &v(&[1.0, 0.0]), 5).unwrap();
    assert_relative_eq!(energy(&two, &p, &v(&[0.0, 0.0])), 2.0, epsilon = 1e-12);
}

#[test]
fn scalar_energy_matches_fine_quadrature() {
    let m = FnMetric::new(|c: &DVector<f64>, _: &DVector<f64>| DMatrix::from_element(1, 1, 1.0 + c[0] * c[0]));
    let p = Path::straight(&v(&[0.0]), &v(&[1.0]), 64).unwrap();
    let k = 1_000_000;
    let fine: f64 = (0..k)
        .map(|i| {
            let s = (i as f64 + 0.5) / k as f64;
            1.0 + s * s
        })
        .sum::<f64>()
        / k as f64;
    assert_relative_eq!(energy(&m, &p, &v(&[0.0])), fine, max_relative = 1e-4);
}

#[test]
fn constant_metric_returns_straight_line_immediately() {
    let m = ConstantMetric(DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]));
    let g = solve_geodesic(&m, &v(&[0.0, 0.0]), &v(&[1.0, 2.0]), &v(&[-1.0, 0.5]), &GeodesicOptions::default()).unwrap();
    assert_eq!(g.iterations, 0);
    assert!(g.converged);
    assert_eq!(g.path, Path::straight(&v(&[1.0, 2.0]), &v(&[-1.0, 0.5]), 32).unwrap());
}

#[test]
fn degenerate_endpoints_give_zero_energy() {
    let g = solve_geodesic(&dip_metric(), &v(&[0.0, 0.0]), &v(&[0.4, 0.2]), &v(&[0.4, 0.2]), &GeodesicOptions::default()).unwrap();
    assert_eq!(g.energy, 0.0);
    assert_eq!(g.iterations, 0);
    assert!(g.path.nodes().iter().all(|n| n == &v(&[0.4, 0.2])));
}

#[test]
fn one_dimensional_paths_stay_on_the_segment() {
    let m = FnMetric::new(|c: &DVector<f64>, _: &DVector<f64>| DMatrix::from_element(1, 1, 1.0 + c[0].sin().powi(2)));
    let g = solve_geodesic(&m, &v(&[0.0]), &v(&[-0.5]), &v(&[2.0]), &GeodesicOptions::default()).unwrap();
    assert!(g.converged, "{}", g.gradient_norm);
    assert!(g.gradient_norm <= 1e-8);
    let nodes = g.path.nodes();
    assert!(nodes.windows(2).all(|w| w[1][0] >= w[0][0]));
    assert!(nodes.iter().all(|c| (-0.5..=2.0).contains(&c[0])));
}

#[test]
fn curved_metric_beats_straight_line_and_brute_force() {
    let m = dip_metric();
    let x = v(&[0.0, 0.0]);
    let (a, b) = (v(&[-1.0, 1.0]), v(&[1.0, 1.0]));
    let opts = GeodesicOptions {
        segments: 3,
        ..Default::default()
    };
    let g = solve_geodesic(&m, &x, &a, &b, &opts).unwrap();
    let straight = energy(&m, &Path::straight(&a, &b, 3).unwrap(), &x);
    assert!(g.energy < straight - 1e-3);
    // coarse search over both interior nodes
    let grid: Vec<f64> = (0..=16).map(|i| -1.2 + 2.4 * i as f64 / 16.0).collect();
    let mut best = f64::INFINITY;
    for &p1 in &grid {
        for &q1 in &grid {
            for &p2 in &grid {
                for &q2 in &grid {
                    let p = Path::new(vec![a.clone(), v(&[p1, q1]), v(&[p2, q2]), b.clone()]).unwrap();
                    best = best.min(energy(&m, &p, &x));
                }
            }
        }
    }
    assert!(g.energy <= best + 1e-12, "solver {} brute {}", g.energy, best);

    let flat_case = FnMetric::new(|c: &DVector<f64>, _: &DVector<f64>| DMatrix::from_diagonal(&v(&[1.0, 1.0 + c[0] * c[0]])));
    let g = solve_geodesic(&flat_case, &x, &v(&[-1.0, 0.0]), &v(&[1.0, 0.0]), &GeodesicOptions::default()).unwrap();
    let straight = energy(&flat_case, &Path::straight(&v(&[-1.0, 0.0]), &v(&[1.0, 0.0]), 32).unwrap(), &x);
    assert!(g.energy <= straight + 1e-12);
}

#[test]
fn energy_converges_under_refinement() {
    let x = v(&[0.0, 0.0]);
    let (a, b) = (v(&[-1.0, 1.0]), v(&[1.0, 0.7]));
    let e = |n| {
        let opts = GeodesicOptions {
            segments: n,
            max_iterations: 5000,
            ..Default::default()
        };
        solve_geodesic(&dip_metric(), &x, &a, &b, &opts).unwrap().energy
    };
    let (e64, e128) = (e(64), e(128));
    assert!((e64 - e128).abs() <= 1e-3 * e128);
}

#[test]
fn paths_write_csv() {
    let p = Path::straight(&v(&[0.0, 1.0]), &v(&[1.0, 1.0]), 2).unwrap();
    let mut out = Vec::new();
    p.write_csv(&mut out).unwrap();
    assert_eq!(String::from_utf8(out).unwrap(), "s,c1,c2\n0,0,1\n0.5,0.5,1\n1,1,1\n");
    assert!(matches!(Path::new(vec![v(&[1.0])]), Err(GeodesicError::TooShort)));
    assert!(matches!(Path::straight(&v(&[1.0]), &v(&[1.0, 2.0]), 3), Err(GeodesicError::Dimension(1, 2))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn solver_never_increases_energy_and_pins_endpoints(
        a in prop::collection::vec(-1.5f64..1.5, 2),
        b in prop::collection::vec(-1.5f64..1.5, 2),
    ) {
        let (a, b) = (v(&a), v(&b));
        let x = v(&[0.0, 0.0]);
        let opts = GeodesicOptions { segments: 16, ..Default::default() };
        let g = solve_geodesic(&dip_metric(), &x, &a, &b, &opts).unwrap();
        let straight = energy(&dip_metric(), &Path::straight(&a, &b, 16).unwrap(), &x);
        prop_assert!(g.energy <= straight + 1e-12);
        prop_assert_eq!(g.path.start(), &a);
        prop_assert_eq!(g.path.end(), &b);
        let back = solve_geodesic(&dip_metric(), &x, &b, &a, &opts).unwrap();
        prop_assert!((back.energy - g.energy).abs() <= 1e-9 * (1.0 + g.energy));
        for (p, q) in back.path.nodes().iter().zip(g.path.reversed().nodes()) {
            prop_assert!((p - q).amax() <= 1e-5);
        }
    }
}
