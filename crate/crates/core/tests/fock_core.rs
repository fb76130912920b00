use cvtele::fock::{self, BasisSpec, DensityOperator, FockVector, ModeOperator, Normalization, C64};

fn single(n: usize) -> BasisSpec {
    BasisSpec::single(n, "A").unwrap()
}

fn coherent(n: usize, beta: C64) -> FockVector {
    fock::coherent(&single(n), 0, beta).unwrap().value
}

fn pseudo_random_state(basis: &BasisSpec, seed: u64, levels: usize) -> FockVector {
    // Support kept on occupations < levels in every mode.
    let mut x = seed;
    let amps = (0..basis.dim())
        .map(|i| {
            if basis.occupations(i).iter().any(|&o| o >= levels) {
                return C64::new(0.0, 0.0);
            }
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let a = ((x >> 33) as f64 / (1u64 << 31) as f64) - 0.5;
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let b = ((x >> 33) as f64 / (1u64 << 31) as f64) - 0.5;
            C64::new(a, b)
        })
        .collect();
    FockVector::new(basis.clone(), amps, Normalization::Unnormalized)
        .unwrap()
        .normalized()
        .unwrap()
}

#[test]
fn vacuum_examples() {
    let v = fock::vacuum(&single(5));
    let expected = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    for (z, e) in v.amplitudes().iter().zip(expected) {
        assert_eq!(*z, C64::new(e, 0.0));
    }
    assert!((v.overlap(&v).unwrap() - C64::new(1.0, 0.0)).norm() < 1e-15);
    assert_eq!(v.mean_total_number(), 0.0);
}

#[test]
fn coherent_overlap_closed_form() {
    let z = coherent(40, C64::new(0.0, 0.0))
        .overlap(&coherent(40, C64::new(1.0, 0.0)))
        .unwrap();
    assert!((z.norm() - (-0.5f64).exp()).abs() < 1e-10);
    assert!((z.norm() - 0.606531).abs() < 1e-6);
}

#[test]
fn displacement_examples() {
    let n = 30;
    let psi = coherent(n, C64::new(0.3, -0.6));
    let same = fock::displace(&psi, 0, C64::new(0.0, 0.0)).unwrap().value;
    assert!((same.fidelity(&psi).unwrap() - 1.0).abs() < 1e-14);

    for beta in [C64::new(1.0, 0.0), C64::new(0.6, 0.8), C64::new(-0.3, 0.2)] {
        let d = fock::displace(&fock::vacuum(&single(n)), 0, beta).unwrap().value;
        assert!(d.fidelity(&coherent(n, beta)).unwrap() >= 1.0 - 1e-8);
        let back = fock::displace(&fock::displace(&psi, 0, beta).unwrap().value, 0, -beta).unwrap().value;
        assert!(back.fidelity(&psi).unwrap() >= 1.0 - 1e-8);
    }
}

#[test]
fn epr_coefficients_match_closed_form() {
    let b = BasisSpec::new(40, ["A", "B"]).unwrap();
    for r in [0.25f64, 0.5, 1.0, 1.5] {
        // At r = 1.5 the weight above N = 40 is ~3e-4, so the checked
        // constructor asks for the cutoff it names.
        let psi = match fock::epr_state(&b, 0, 1, r) {
            Ok(psi) => psi,
            Err(cvtele::Error::CutoffTooSmall { required, .. }) => {
                assert_eq!(r, 1.5);
                let big = BasisSpec::new(required, ["A", "B"]).unwrap();
                fock::epr_state(&big, 0, 1, r).unwrap()
            }
            Err(e) => panic!("{e}"),
        };
        for m in 0..=40 {
            let expected = (-r.tanh()).powi(m as i32) / r.cosh();
            assert!((psi.amplitude(&[m, m]) - C64::new(expected, 0.0)).norm() <= 1e-12);
        }
    }
    let psi = fock::epr_state(&b, 0, 1, 1.0).unwrap();
    assert!((psi.amplitude(&[0, 0]).re - 0.648054).abs() < 1e-6);
    assert!((psi.amplitude(&[1, 1]).re + 0.493554).abs() < 1e-6);
    assert!((psi.norm_sqr() - 1.0).abs() <= 1e-9);
    let zero = fock::epr_state(&b, 0, 1, 0.0).unwrap();
    assert_eq!(zero.amplitude(&[0, 0]), C64::new(1.0, 0.0));
}

#[test]
fn two_mode_squeeze_matches_epr_and_inverts() {
    let b = BasisSpec::new(30, ["A", "B"]).unwrap();
    let s = fock::two_mode_squeeze(&fock::vacuum(&b), 0, 1, 0.5).unwrap().value;
    let epr = fock::epr_state(&b, 0, 1, 0.5).unwrap();
    assert!(s.fidelity(&epr).unwrap() >= 1.0 - 1e-8);

    let psi = pseudo_random_state(&b, 3, 3);
    let same = fock::two_mode_squeeze(&psi, 0, 1, 0.0).unwrap().value;
    assert!((same.fidelity(&psi).unwrap() - 1.0).abs() < 1e-14);
    let there = fock::two_mode_squeeze(&psi, 0, 1, 0.5).unwrap().value;
    let back = fock::two_mode_squeeze(&there, 0, 1, -0.5).unwrap().value;
    assert!(back.fidelity(&psi).unwrap() >= 1.0 - 1e-6);
}

#[test]
fn beamsplitter_examples() {
    let b = BasisSpec::new(6, ["A", "B"]).unwrap();
    let psi = pseudo_random_state(&b, 11, 4);
    let same = fock::beamsplitter(&psi, 0, 1, 1.0, 0.3).unwrap();
    assert!((same.fidelity(&psi).unwrap() - 1.0).abs() < 1e-14);

    // |1,0⟩ → (|1,0⟩ − e^{−iφ}|0,1⟩)/√2
    let phi = 0.7;
    let one = fock::fock_state(&b, 0, 1).unwrap();
    let out = fock::beamsplitter(&one, 0, 1, 0.5, phi).unwrap();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    assert!((out.amplitude(&[1, 0]) - C64::new(h, 0.0)).norm() < 1e-12);
    assert!((out.amplitude(&[0, 1]) + C64::from_polar(h, -phi)).norm() < 1e-12);

    let mixed = fock::beamsplitter(&psi, 0, 1, 0.37, 1.9).unwrap();
    assert!((mixed.mean_total_number() - psi.mean_total_number()).abs() <= 1e-10);
}

#[test]
fn fidelity_examples() {
    let n = 30;
    let psi = coherent(n, C64::new(0.4, 0.1));
    assert!((psi.fidelity(&psi).unwrap() - 1.0).abs() < 1e-14);
    let f = fock::vacuum(&single(n)).fidelity(&coherent(n, C64::new(1.0, 0.0))).unwrap();
    assert!((f - (-1f64).exp()).abs() < 1e-10);
    let mixed = DensityOperator::maximally_mixed(single(1));
    assert!((mixed.fidelity(&fock::vacuum(&single(1))).unwrap() - 0.5).abs() < 1e-15);
}

#[test]
fn partial_trace_examples() {
    let b = BasisSpec::new(40, ["A", "B"]).unwrap();
    let vac = fock::vacuum(&b).partial_trace(&[0]).unwrap();
    assert!((vac.matrix()[(0, 0)].re - 1.0).abs() < 1e-15);
    assert!((vac.trace() - 1.0).abs() < 1e-15);

    let r = 1.0f64;
    let rho = fock::epr_state(&b, 0, 1, r).unwrap().partial_trace(&[0]).unwrap();
    let lambda = r.tanh().powi(2);
    for (n, p) in rho.populations().iter().enumerate().take(20) {
        assert!((p - (1.0 - lambda) * lambda.powi(n as i32)).abs() < 1e-12);
    }
    assert!((rho.purity() - 1.0 / (2.0 * r).cosh()).abs() < 1e-9);
    assert!((rho.trace() - 1.0).abs() < 1e-9);
}

#[test]
fn tensor_then_partial_trace_recovers_factor() {
    let a = pseudo_random_state(&single(5), 1, 6);
    let b = pseudo_random_state(&BasisSpec::single(5, "B").unwrap(), 2, 6);
    let rho = a.tensor(&b).unwrap().partial_trace(&[0]).unwrap();
    assert!((rho.matrix() - a.to_density().matrix()).iter().all(|z| z.norm() < 1e-12));
}

#[test]
fn number_operator_is_exact() {
    let b = single(7);
    let n = ModeOperator::number(&b, 0).unwrap().local_matrix();
    for i in 0..8 {
        for j in 0..8 {
            let expected = if i == j { i as f64 } else { 0.0 };
            assert_eq!(n[(i, j)], C64::new(expected, 0.0));
        }
    }
}

#[test]
fn unitary_constructors_preserve_norm_for_low_tail_states() {
    let b = BasisSpec::new(25, ["A", "B"]).unwrap();
    let psi = pseudo_random_state(&b, 5, 5);
    let d = fock::displace(&psi, 1, C64::new(0.4, 0.2)).unwrap();
    assert!(d.lost_weight <= 1e-6);
    let s = fock::two_mode_squeeze(&psi, 0, 1, 0.3).unwrap();
    assert!(s.lost_weight <= 1e-6);
    let bs = fock::beamsplitter(&psi, 0, 1, 0.3, 0.2).unwrap();
    assert!((bs.norm_sqr() - 1.0).abs() <= 1e-10);
}
