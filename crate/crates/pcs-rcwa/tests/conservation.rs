//! Energy bookkeeping, symmetry and regime properties of the solver.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pcs_rcwa::{
    solve, solve_two_sided, solve_with, CrystalSpec, Factorization, IndexModel,
    PlaneWaveExcitation, Polarization, SolveOptions, Truncation,
};

fn patterned(im_n: f64) -> CrystalSpec {
    CrystalSpec {
        im_n,
        ..CrystalSpec::default_pcs()
    }
}

#[test]
fn lossless_energy_conservation_random_points() {
    let spec = patterned(0.0);
    let trunc = Truncation { n: 3 };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let g = 2.0 * std::f64::consts::PI / spec.lattice;
    for _ in 0..25 {
        let lambda = rng.random_range(950.0..1250.0) * 1e-9;
        let k_x = rng.random_range(-0.35..0.35) * g;
        let pol = if rng.random_bool(0.5) {
            Polarization::S
        } else {
            Polarization::P
        };
        let exc = PlaneWaveExcitation {
            wavelength: lambda,
            k_x,
            polarization: pol,
        };
        let res = solve(&spec, &exc, &trunc).unwrap();
        assert!(
            (res.r_total + res.t_total - 1.0).abs() < 1e-6,
            "lambda {:.1} nm k_x {:.3} g pol {pol:?}: R+T-1 = {:e}",
            lambda * 1e9,
            k_x / g,
            res.r_total + res.t_total - 1.0
        );
    }
}

#[test]
fn absorbing_slab_is_passive() {
    let trunc = Truncation { n: 3 };
    for im_n in [1e-5, 1e-4, 1e-3] {
        let spec = patterned(im_n);
        let exc = PlaneWaveExcitation {
            wavelength: 1139e-9,
            k_x: 0.0,
            polarization: Polarization::S,
        };
        let res = solve(&spec, &exc, &trunc).unwrap();
        assert!(res.r_total + res.t_total < 1.0);
        assert!(res.s00.is_passive(1e-9), "Im(n) = {im_n}");
    }
}

#[test]
fn zeroth_order_two_port_is_passive_for_random_crystals() {
    let trunc = Truncation { n: 2 };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..12 {
        let lattice = rng.random_range(700.0..950.0) * 1e-9;
        let spec = CrystalSpec {
            lattice,
            hole_radius: rng.random_range(0.1..0.45) * lattice,
            thickness: rng.random_range(120.0..300.0) * 1e-9,
            index_model: IndexModel::Constant {
                n: rng.random_range(1.6..2.4),
            },
            im_n: rng.random_range(0.0..1e-4),
            n_ambient: 1.0,
        };
        let exc = PlaneWaveExcitation {
            wavelength: rng.random_range(1.05..1.45) * lattice,
            k_x: rng.random_range(-0.3..0.3) * 2.0 * std::f64::consts::PI / lattice,
            polarization: Polarization::S,
        };
        let res = solve(&spec, &exc, &trunc).unwrap();
        assert!(
            res.s00.is_passive(1e-9),
            "spec {spec:?}: |r+t| = {}, |r-t| = {}",
            (res.s00.r + res.s00.t).norm(),
            (res.s00.r - res.s00.t).norm()
        );
    }
}

#[test]
fn c4v_symmetry_at_normal_incidence() {
    let spec = patterned(0.0);
    let trunc = Truncation { n: 3 };
    for lambda_nm in [1010.0, 1090.0, 1139.0, 1210.0] {
        let s = solve(
            &spec,
            &PlaneWaveExcitation {
                wavelength: lambda_nm * 1e-9,
                k_x: 0.0,
                polarization: Polarization::S,
            },
            &trunc,
        )
        .unwrap();
        let p = solve(
            &spec,
            &PlaneWaveExcitation {
                wavelength: lambda_nm * 1e-9,
                k_x: 0.0,
                polarization: Polarization::P,
            },
            &trunc,
        )
        .unwrap();
        assert!(
            (s.s00.r - p.s00.r).norm() < 1e-8 && (s.s00.t - p.s00.t).norm() < 1e-8,
            "lambda = {lambda_nm} nm: s {:?} vs p {:?}",
            s.s00,
            p.s00
        );
        assert!((s.r_total - p.r_total).abs() < 1e-8);
    }
}

#[test]
fn two_sided_illumination_is_symmetric() {
    let spec = patterned(5e-5);
    let trunc = Truncation { n: 3 };
    let exc = PlaneWaveExcitation {
        wavelength: 1120e-9,
        k_x: 0.12 * 2.0 * std::f64::consts::PI / spec.lattice,
        polarization: Polarization::P,
    };
    let (left, right) = solve_two_sided(&spec, &exc, &trunc, &SolveOptions::default()).unwrap();
    assert!((left.s00.r - right.s00.r).norm() < 1e-8);
    assert!((left.s00.t - right.s00.t).norm() < 1e-8);
    assert!((left.r_total - right.r_total).abs() < 1e-8);
}

#[test]
fn sub_diffraction_orders_carry_no_far_field_power() {
    let spec = patterned(0.0);
    let trunc = Truncation { n: 3 };
    let g = 2.0 * std::f64::consts::PI / spec.lattice;
    let k_x = 0.1 * g;
    let sin_theta = |lambda: f64| k_x * lambda / (2.0 * std::f64::consts::PI);
    let lambda = 1150e-9;
    assert!(lambda > spec.lattice * (1.0 + sin_theta(lambda)));
    let res = solve(
        &spec,
        &PlaneWaveExcitation {
            wavelength: lambda,
            k_x,
            polarization: Polarization::S,
        },
        &trunc,
    )
    .unwrap();
    assert_eq!(res.diagnostics.propagating_ambient_orders, 1);
    for order in &res.per_order {
        if order.m != 0 || order.n != 0 {
            assert_eq!(order.reflected, 0.0);
            assert_eq!(order.transmitted, 0.0);
            assert!(!order.propagating);
        }
    }
}

#[test]
fn diffracted_regime_is_detected_and_conserves_energy() {
    let spec = patterned(0.0);
    let trunc = Truncation { n: 3 };
    // below lattice * (1 + sin theta): the -1 order radiates
    let g = 2.0 * std::f64::consts::PI / spec.lattice;
    let exc = PlaneWaveExcitation {
        wavelength: 960e-9,
        k_x: 0.3 * g,
        polarization: Polarization::S,
    };
    let res = solve(&spec, &exc, &trunc).unwrap();
    assert!(res.diagnostics.propagating_ambient_orders > 1);
    assert!((res.r_total + res.t_total - 1.0).abs() < 1e-6);
    let diffracted: f64 = res
        .per_order
        .iter()
        .filter(|o| o.m != 0 || o.n != 0)
        .map(|o| o.reflected + o.transmitted)
        .sum();
    assert!(diffracted > 0.0);
}

#[test]
fn laurent_and_inverse_rule_agree_off_resonance() {
    // both factorizations converge to the same physics; compare away from
    // the guided resonance where truncation shifts cannot amplify the
    // difference
    let spec = patterned(0.0);
    let exc = PlaneWaveExcitation {
        wavelength: 1250e-9,
        k_x: 0.0,
        polarization: Polarization::S,
    };
    let li_low = solve_with(
        &spec,
        &exc,
        &Truncation { n: 5 },
        &SolveOptions {
            factorization: Factorization::LiInverseRule,
            ..SolveOptions::default()
        },
    )
    .unwrap();
    let laurent_high = solve_with(
        &spec,
        &exc,
        &Truncation { n: 8 },
        &SolveOptions {
            factorization: Factorization::Laurent,
            ..SolveOptions::default()
        },
    )
    .unwrap();
    assert!(
        (li_low.s00.t - laurent_high.s00.t).norm() < 5e-3,
        "Li(5) t00 = {:?}, Laurent(8) t00 = {:?}",
        li_low.s00.t,
        laurent_high.s00.t
    );
}

#[test]
fn rayleigh_anomaly_is_reported() {
    let spec = patterned(0.0);
    // normal incidence: the +-1 orders cross into propagation exactly at
    // lambda = lattice
    let exc = PlaneWaveExcitation {
        wavelength: spec.lattice * (1.0 + 1e-15),
        k_x: 0.0,
        polarization: Polarization::S,
    };
    match solve(&spec, &exc, &Truncation { n: 2 }) {
        Err(pcs_rcwa::RcwaError::SingularBoundary { .. }) => {}
        other => panic!("expected SingularBoundary, got {other:?}"),
    }
}
