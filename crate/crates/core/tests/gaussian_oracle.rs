use cvtele::channel::prepare_epr_lossy;
use cvtele::fock::{self, BasisSpec, C64};
use cvtele::gaussian::{
    average_fidelity_coherent, lossy_epr, teleport_conditional, teleport_fidelity_coherent, GaussianState, Homodyne,
    SqueezedThermal, TeleportSetup,
};

fn closed_form(r: f64) -> f64 {
    1.0 / (1.0 + (-2.0 * r).exp())
}

#[test]
fn unit_gain_fidelity_matches_closed_form() {
    assert!((teleport_fidelity_coherent(0.0, 1.0, 1.0).unwrap() - 0.5).abs() < 1e-12);
    assert!((teleport_fidelity_coherent(1.0, 1.0, 1.0).unwrap() - 0.880797).abs() < 1e-6);
    for r in [0.25, 0.5, 1.5, 2.0, 3.0] {
        let f = teleport_fidelity_coherent(r, 1.0, 1.0).unwrap();
        assert!((f - closed_form(r)).abs() < 1e-12, "r = {r}: {f}");
    }
}

#[test]
fn averaged_fidelity_is_independent_of_input_amplitude() {
    let setup = TeleportSetup::ideal(0.8);
    let betas = [
        C64::new(0.0, 0.0),
        C64::new(0.5, 0.0),
        C64::new(0.5, 0.3),
        C64::new(-1.2, 0.7),
        C64::new(0.0, -2.0),
    ];
    let f: Vec<f64> = betas.iter().map(|&b| average_fidelity_coherent(&setup, b).unwrap()).collect();
    let spread = f.iter().cloned().fold(f64::MIN, f64::max) - f.iter().cloned().fold(f64::MAX, f64::min);
    assert!(spread <= 1e-10, "{f:?}");
}

#[test]
fn conditional_covariance_is_independent_of_outcome() {
    let setup = TeleportSetup::ideal(0.8);
    let input = GaussianState::coherent(C64::new(0.4, -0.1));
    let covs: Vec<_> = [(0.0, 0.0), (1.0, -0.5), (-2.0, 0.3), (0.7, 2.2), (3.0, 3.0)]
        .iter()
        .map(|&(p, m)| teleport_conditional(&setup, &input, p, m).unwrap().state.unwrap().cov().clone())
        .collect();
    for c in &covs[1..] {
        assert!((c - &covs[0]).abs().max() <= 1e-10);
    }
}

#[test]
fn fidelity_degrades_with_resource_loss() {
    let mut last = teleport_fidelity_coherent(1.0, 1.0, 1.0).unwrap();
    for eta in [0.9, 0.7, 0.5, 0.3, 0.0] {
        let f = teleport_fidelity_coherent(1.0, 1.0, eta).unwrap();
        assert!(f <= last + 1e-15);
        last = f;
    }
    assert!((last - 0.5).abs() < 1e-12);
}

#[test]
fn strong_epr_conditioning_copies_the_measured_quadrature() {
    let chi = 0.7;
    for r in [1.0, 2.0, 4.0] {
        let c = GaussianState::epr(r).unwrap().condition_on_homodyne(0, 0.0, chi).unwrap();
        let b = c.state.unwrap();
        // ⟨X_AX_B⟩ = −sinh 2r, so the conditional mean is −χ tanh 2r.
        assert!((b.mean()[0] + chi * (2.0 * r).tanh()).abs() < 1e-12);
    }
}

#[test]
fn sequential_conditioning_equals_joint() {
    let s = GaussianState::coherent(C64::new(0.3, 0.2))
        .tensor(&GaussianState::epr(0.7).unwrap())
        .apply(&cvtele::gaussian::SymplecticOp::beamsplitter(3, 0, 1, 0.5, 0.4).unwrap())
        .unwrap();
    let first = s.condition_on_homodyne(0, 0.3, 0.9).unwrap();
    // Mode 1 of the original is mode 0 of the remainder.
    let second = first.state.unwrap().condition_on_homodyne(0, 1.9, -0.4).unwrap();
    let joint = s
        .condition_on_homodyne_joint(&[
            Homodyne { mode: 0, theta: 0.3, chi: 0.9 },
            Homodyne { mode: 1, theta: 1.9, chi: -0.4 },
        ])
        .unwrap();
    let (a, b) = (second.state.unwrap(), joint.state.unwrap());
    assert!((a.mean() - b.mean()).abs().max() < 1e-12);
    assert!((a.cov() - b.cov()).abs().max() < 1e-12);
    assert!((first.density * second.density - joint.density).abs() < 1e-12);
}

#[test]
fn epr_moments_match_fock_engine() {
    let basis = BasisSpec::new(40, ["A", "B"]).unwrap();
    let psi = fock::epr_state(&basis, 0, 1, 0.5).unwrap();
    let m = psi.quadrature_moments();
    let g = GaussianState::epr(0.5).unwrap();
    assert!((&m.cov - g.cov()).abs().max() < 1e-6);
    assert!(m.mean.iter().all(|x| x.abs() < 1e-12));
}

#[test]
fn lossy_epr_purity_matches_fock_kraus_route() {
    let (r, eta) = (0.5, 0.7);
    let g = lossy_epr(r, eta, eta).unwrap();
    let rho = prepare_epr_lossy(30, r, eta, eta).unwrap();
    let red_fock = rho.partial_trace(&[0]).unwrap().purity();
    let red_gauss = g.reduced(&[0]).unwrap().purity();
    assert!((red_fock - red_gauss).abs() < 1e-6, "{red_fock} vs {red_gauss}");
    assert!((red_gauss - 1.0 / (eta * (2.0 * r).cosh() + 1.0 - eta)).abs() < 1e-12);
    assert!((rho.purity() - g.purity()).abs() < 1e-6);
}

#[test]
fn squeezed_thermal_mapping_matches_kraus_route() {
    let (r, eta) = (0.5, 0.5);
    let g = lossy_epr(r, eta, eta).unwrap();
    let st = SqueezedThermal::from_state(&g).unwrap();
    let oracle = st.to_fock(30, 60).unwrap();
    let kraus = prepare_epr_lossy(30, r, eta, eta).unwrap();
    let d = kraus.trace_distance(&oracle).unwrap();
    assert!(d <= 1e-6, "trace distance {d}");
}

#[test]
fn squeezed_thermal_mapping_asymmetric_losses() {
    let (r, ea, eb) = (0.6, 0.9, 0.4);
    let st = SqueezedThermal::from_state(&lossy_epr(r, ea, eb).unwrap()).unwrap();
    let oracle = st.to_fock(30, 70).unwrap();
    let kraus = prepare_epr_lossy(30, r, ea, eb).unwrap();
    assert!(kraus.trace_distance(&oracle).unwrap() <= 1e-6);
}
