use std::f64::consts::PI;

use cvtele::bell::{
    bell_project_direct, bell_project_operator, outcome_averaged_bob, outcome_density, quadrature_eigenvector,
    quadrature_eigenvector_series, sample_outcome, BellModes, GridSpec, HomodyneSetting, MeasurementOutcome,
    OutcomeSampler,
};
use cvtele::fock::{self, BasisSpec, FockVector, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn joint(input: &FockVector, r: f64, n: usize) -> FockVector {
    let ab = BasisSpec::new(n, ["A", "B"]).unwrap();
    input.tensor(&fock::epr_state_truncated(&ab, 0, 1, r).unwrap().value).unwrap()
}

fn coherent(n: usize, beta: C64) -> FockVector {
    fock::coherent(&BasisSpec::single(n, "V").unwrap(), 0, beta).unwrap().value
}

#[test]
fn hermite_and_series_agree() {
    for &chi in &[-4.0, -1.3, 0.0, 0.7, 2.5, 5.0, 9.0, -12.0, 15.5] {
        for &theta in &[0.0, 0.4, PI / 2.0] {
            let a = quadrature_eigenvector(chi, theta, 60).unwrap();
            let b = quadrature_eigenvector_series(chi, theta, 60).unwrap();
            for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
                assert!((x - y).norm() <= 1e-10, "chi {chi} theta {theta}: {x} vs {y}");
            }
        }
    }
}

#[test]
fn eigenrelation_holds_below_the_top_levels() {
    let n = 60;
    for &chi in &[-3.0, -1.0, 0.0, 2.0, 3.0] {
        for &theta in &[0.0, 1.1] {
            let v = quadrature_eigenvector(chi, theta, n).unwrap();
            let a = v.amplitudes();
            for k in 0..=n - 10 {
                // (c e^{−iθ} + c† e^{iθ}) |χ⟩ at level k
                let mut lhs = C64::new(0.0, 0.0);
                lhs += a[k + 1] * ((k + 1) as f64).sqrt() * C64::from_polar(1.0, -theta);
                if k > 0 {
                    lhs += a[k - 1] * (k as f64).sqrt() * C64::from_polar(1.0, theta);
                }
                assert!((lhs - a[k] * chi).norm() <= 1e-6);
            }
        }
    }
}

fn resolution_of_identity(half_width: f64, pts: usize, levels: usize) -> f64 {
    let h = 2.0 * half_width / (pts - 1) as f64;
    let mut m = vec![vec![C64::new(0.0, 0.0); levels]; levels];
    for k in 0..pts {
        let chi = -half_width + k as f64 * h;
        let w = if k == 0 || k == pts - 1 { 0.5 * h } else { h };
        let v = quadrature_eigenvector(chi, 0.3, 60).unwrap();
        let a = v.amplitudes();
        for i in 0..levels {
            for j in 0..levels {
                m[i][j] += a[i] * a[j].conj() * w;
            }
        }
    }
    let mut worst = 0.0f64;
    for (i, row) in m.iter().enumerate() {
        for (j, z) in row.iter().enumerate() {
            let expected = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((z - C64::new(expected, 0.0)).norm());
        }
    }
    worst
}

#[test]
fn completeness_on_low_levels() {
    // Level n extends to its turning point √(4n+2); [−8, 8] holds the
    // levels whose tails beyond ±8 are negligible.
    assert!(resolution_of_identity(8.0, 400, 6) <= 1e-4);
    assert!(resolution_of_identity(12.0, 600, 20) <= 1e-4);
}

#[test]
fn vacuum_projection_is_gaussian() {
    let n = 40;
    let b = BasisSpec::new(n, ["V", "A", "B"]).unwrap();
    let vac = fock::vacuum(&b);
    for &cp in &[0.0, 1.0, -1.0, 2.0, -2.0] {
        for &cm in &[0.0, 1.0, -1.0, 2.0, -2.0] {
            let o = MeasurementOutcome::new(cp, cm);
            let bob = bell_project_direct(&vac, &o, HomodyneSetting::default()).unwrap();
            let p = bob.norm_sqr();
            let expected = (-(cp * cp + cm * cm) / 2.0).exp() / (2.0 * PI);
            assert!((p - expected).abs() <= 1e-8);
            assert!(bob.amplitudes()[1..].iter().all(|z| z.norm() < 1e-14));
        }
    }
}

#[test]
fn routes_agree_on_coherent_input() {
    let n = 40;
    let psi = joint(&coherent(n, C64::new(0.5, 0.0)), 0.8, n);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    use rand::Rng;
    for _ in 0..20 {
        let o = MeasurementOutcome::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let d = bell_project_direct(&psi, &o, HomodyneSetting::default()).unwrap();
        let op = bell_project_operator(&psi, &o, HomodyneSetting::default()).unwrap();
        let ov = d.normalized().unwrap().fidelity(&op.normalized().unwrap()).unwrap();
        assert!(ov >= 1.0 - 1e-8, "overlap {ov}");
        let rel = (d.norm_sqr() - op.norm_sqr()).abs() / d.norm_sqr();
        assert!(rel <= 1e-6, "density rel err {rel}");
    }
}

#[test]
fn operator_route_rejects_other_phases() {
    let b = BasisSpec::new(4, ["V", "A", "B"]).unwrap();
    let s = HomodyneSetting {
        theta_plus: 0.2,
        theta_minus: 1.0,
    };
    let err = bell_project_operator(&fock::vacuum(&b), &MeasurementOutcome::new(0.0, 0.0), s).unwrap_err();
    assert!(matches!(err, cvtele::Error::Unsupported(_)));
}

#[test]
fn unentangled_resource_leaves_bob_in_vacuum() {
    let n = 20;
    let inputs = [
        coherent(n, C64::new(0.7, -0.4)),
        fock::fock_state(&BasisSpec::single(n, "V").unwrap(), 0, 1).unwrap(),
    ];
    for input in &inputs {
        let psi = joint(input, 0.0, n);
        for &(cp, cm) in &[(0.0, 0.0), (1.2, -0.7), (-2.0, 2.0)] {
            let o = MeasurementOutcome::new(cp, cm);
            let bob = bell_project_operator(&psi, &o, HomodyneSetting::default()).unwrap();
            assert!(bob.amplitudes()[1..].iter().all(|z| z.norm() < 1e-14));
        }
    }
}

#[test]
fn density_normalizes_and_is_nonnegative() {
    let n = 30;
    let psi = joint(&coherent(n, C64::new(0.5, 0.0)), 0.8, n);
    let grid = outcome_density(&psi, &GridSpec::default()).unwrap();
    assert!(grid.deficit.abs() <= 1e-3, "deficit {}", grid.deficit);
    assert!(grid.density.iter().all(|&p| p >= 0.0));
}

#[test]
fn vacuum_density_grid_is_standard_gaussian() {
    let b = BasisSpec::new(10, ["V", "A", "B"]).unwrap();
    let grid = outcome_density(&fock::vacuum(&b), &GridSpec::default()).unwrap();
    for (cp, cm, p) in grid.cells() {
        let expected = (-(cp * cp + cm * cm) / 2.0).exp() / (2.0 * PI);
        assert!((p - expected).abs() <= 1e-6);
    }
    assert!(grid.deficit.abs() <= 1e-6);
}

#[test]
fn density_symmetric_for_real_symmetric_states() {
    let n = 20;
    let b = BasisSpec::new(n, ["V"]).unwrap();
    let psi = joint(&fock::vacuum(&b), 0.6, n);
    let grid = outcome_density(&psi, &GridSpec::default()).unwrap();
    let m = grid.axis.n_points;
    for i in 0..m {
        for j in 0..m {
            let p = grid.value(i, j);
            assert!((p - grid.value(m - 1 - i, j)).abs() <= 1e-12);
            assert!((p - grid.value(i, m - 1 - j)).abs() <= 1e-12);
        }
    }
}

#[test]
fn product_resource_density_is_shifted_gaussian() {
    let n = 30;
    let beta = C64::new(0.6, -0.3);
    let psi = joint(&coherent(n, beta), 0.0, n);
    // α = (χ₊ + iχ₋)/√2 is centred on β*, so χ₋ is centred on −√2 Im β.
    let (mp, mm) = (2f64.sqrt() * beta.re, -(2f64.sqrt()) * beta.im);
    for &(cp, cm) in &[(0.0, 0.0), (0.8, -0.4), (-1.5, 1.0), (2.0, 2.0)] {
        let bob = bell_project_direct(&psi, &MeasurementOutcome::new(cp, cm), HomodyneSetting::default()).unwrap();
        let expected = (-((cp - mp).powi(2) + (cm - mm).powi(2)) / 2.0).exp() / (2.0 * PI);
        assert!((bob.norm_sqr() - expected).abs() <= 1e-6);
    }
}

#[test]
fn outcome_averaged_bob_equals_reduced_state() {
    let n = 24;
    let psi = joint(&coherent(n, C64::new(0.5, 0.0)), 0.8, n);
    let grid = outcome_density(&psi, &GridSpec::default()).unwrap();
    let avg = outcome_averaged_bob(std::slice::from_ref(&psi), BellModes::default(), HomodyneSetting::default(), &grid.axis)
        .unwrap();
    let reduced = psi.partial_trace(&[2]).unwrap();
    let d = avg.trace_distance(&reduced).unwrap();
    assert!(d <= 1e-4, "trace distance {d}");
}

#[test]
fn sampler_is_deterministic_and_standard_normal_on_vacuum() {
    let b = BasisSpec::new(6, ["V", "A", "B"]).unwrap();
    let grid = outcome_density(&fock::vacuum(&b), &GridSpec::default()).unwrap();
    assert_eq!(sample_outcome(&grid, 42).unwrap(), sample_outcome(&grid, 42).unwrap());

    let sampler = OutcomeSampler::new(&grid).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 100_000;
    let xs: Vec<f64> = (0..n).map(|_| sampler.sample(&mut rng).chi_plus).collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    assert!(mean.abs() <= 0.02, "mean {mean}");
    assert!((var - 1.0).abs() <= 0.03, "var {var}");
}
