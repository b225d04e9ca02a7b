mod common;

use nalgebra::DMatrix;
use rand::Rng;

use stabsens::fdbase::{fd_gradient, fd_sens_entry, fd_sens_matrix, FDConfig};
use stabsens::sdpcore::{build_sdp, solve_sdp_with, SolveOptions, StabilityCertificate, DEFAULT_EPS, MIN_TOL};
use stabsens::senscore::{assemble_g, sens_matrix, sens_params, KKTPoint};
use stabsens::sysmodel::{Mode, ParametricJacobian};

fn refined(j: &DMatrix<f64>) -> StabilityCertificate {
    solve_sdp_with(&build_sdp(j, DEFAULT_EPS).unwrap(), &SolveOptions::refined(1e-8)).unwrap()
}

#[test]
fn matches_the_lyapunov_closed_form() {
    for (n, seed) in [(5, 1), (5, 2), (10, 3), (10, 4)] {
        let j = common::oscillatory(n, seed);
        let r = sens_matrix(&refined(&j), &j).unwrap();
        assert!(!r.degenerate);
        let got = r.d_eta_d_j.unwrap();
        let want = common::closed_form_gradient(&j);
        assert!(
            (&got - &want).amax() <= 1e-7 * want.amax().max(1.0),
            "n={n} seed={seed}"
        );
    }
}

#[test]
fn five_by_five_matches_central_differences() {
    let j = common::oscillatory(5, 21);
    let analytic = sens_matrix(&refined(&j), &j).unwrap().d_eta_d_j.unwrap();
    let fd = fd_sens_matrix(&j, &FDConfig::oracle(), DEFAULT_EPS, MIN_TOL)
        .unwrap()
        .d_eta_d_j
        .unwrap();
    for (a, o) in analytic.iter().zip(fd.iter()) {
        assert!(common::relative_error(*a, *o) <= 1e-4, "{a} vs {o}");
    }
    let one = fd_sens_entry(&j, 2, 4, &FDConfig::oracle(), DEFAULT_EPS, MIN_TOL).unwrap();
    assert!(common::relative_error(analytic[(2, 4)], one.value) <= 1e-4);
}

#[test]
fn two_mode_family_matches_central_differences_in_d() {
    let mut rng = common::rng(5);
    let modes = (0..2)
        .map(|k| Mode {
            name: format!("m{k}"),
            m: common::uniform(&mut rng, 5, 5, 0.3),
            lo: -1.0,
            hi: 1.0,
        })
        .collect();
    let mut pj = ParametricJacobian::new(common::oscillatory(5, 8), modes).unwrap();
    pj.set_current(&[0.3, -0.2]).unwrap();
    let cert = refined(&pj.jacobian_at(pj.current()).unwrap());
    let analytic = sens_params(&cert, &pj).unwrap().param_values().unwrap();
    let fd = fd_gradient(&pj, pj.current(), &FDConfig::oracle(), DEFAULT_EPS, MIN_TOL, None).unwrap();
    for (a, o) in analytic.iter().zip(&fd.values) {
        assert!(common::relative_error(*a, *o) <= 1e-4, "{a} vs {o}");
    }
}

#[test]
fn zero_mode_has_zero_sensitivity() {
    let j0 = common::oscillatory(4, 9);
    let modes = vec![
        Mode {
            name: "zero".into(),
            m: DMatrix::zeros(4, 4),
            lo: 0.0,
            hi: 1.0,
        },
        Mode {
            name: "diag".into(),
            m: -DMatrix::identity(4, 4),
            lo: 0.0,
            hi: 1.0,
        },
    ];
    let pj = ParametricJacobian::new(j0, modes).unwrap();
    let cert = refined(&pj.jacobian_at(pj.current()).unwrap());
    let v = sens_params(&cert, &pj).unwrap().param_values().unwrap();
    assert_eq!(v[0], 0.0);
    // A shift J − sI lowers η by 2s·⟨Λ₁, Φ⟩, and Tr Λ₁ = 1 with Φ ⪯ I.
    assert!(v[1] < 0.0 && v[1] >= -2.0 - 1e-9, "{}", v[1]);
    let fd = fd_gradient(&pj, pj.current(), &FDConfig::oracle(), DEFAULT_EPS, MIN_TOL, None).unwrap();
    assert!(
        common::relative_error(v[1], fd.values[1]) <= 1e-4,
        "{} vs {}",
        v[1],
        fd.values[1]
    );
}

/// Random dense stable matrices of small size, keeping those whose KKT
/// system is well conditioned.
#[test]
fn gradient_check_over_random_systems() {
    let mut checked = 0;
    for seed in 0..50u64 {
        let n = 2 + seed as usize % 7;
        let mut rng = common::rng(900 + seed);
        let a = common::uniform(&mut rng, n, n, 1.0);
        let shift = common::spectral_abscissa(&a) + 0.1 + rng.random::<f64>();
        let j = a - DMatrix::identity(n, n) * shift;
        let cert = refined(&j);
        let Ok(r) = sens_matrix(&cert, &j) else { continue };
        if r.degenerate || r.cond_estimate.unwrap() >= 1e9 {
            continue;
        }
        let analytic = r.d_eta_d_j.unwrap();
        let fd = fd_sens_matrix(&j, &FDConfig::oracle(), DEFAULT_EPS, MIN_TOL)
            .unwrap()
            .d_eta_d_j
            .unwrap();
        for (x, o) in analytic.iter().zip(fd.iter()) {
            assert!(common::relative_error(*x, *o) <= 1e-4, "seed {seed}: {x} vs {o}");
        }
        checked += 1;
    }
    assert!(checked >= 10, "only {checked} well-conditioned instances");
}

#[test]
fn complementarity_vanishes_at_the_optimum() {
    for seed in 0..5u64 {
        let j = common::oscillatory(4, 40 + seed);
        let cert = refined(&j);
        let pt = KKTPoint::from_certificate(&cert, &j).unwrap();
        let g = assemble_g(&pt).unwrap();
        assert!(g.rows(pt.m(), pt.len() - pt.m()).amax() <= 1e-7);
    }
}
