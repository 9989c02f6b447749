use chainlab::potential::*;

fn carbon() -> ForceFieldParams {
    rescale_physical(&PhysicalParams::CARBON).unwrap().params
}

/// Plain pairwise sum written out from the energy definition.
fn brute_energy(points: &[[f64; 2]], periodic: bool, a: f64, b: f64, c: f64) -> f64 {
    let n = points.len();
    let d2 = |i: usize, j: usize| {
        let dx = points[i][0] - points[j][0];
        let dy = points[i][1] - points[j][1];
        dx * dx + dy * dy
    };
    let u = |x: f64| x - 2.0 * x.sqrt();
    let w = |x: f64| b / x.powi(6) - a / x.powi(3) + c / x.sqrt();
    let mut e = 0.0;
    for j in 0..n - 1 {
        e += u(d2(j, j + 1));
    }
    if periodic {
        e += u(d2(n - 1, 0));
    }
    for j in 0..n {
        for k in j + 1..n {
            e += w(d2(j, k));
        }
    }
    e
}

#[test]
fn bond_potential_values() {
    let t = bond_potential(1.0).unwrap();
    assert_eq!((t.value, t.d1, t.d2), (-1.0, 0.0, 0.5));
    let t = bond_potential(4.0).unwrap();
    assert_eq!((t.value, t.d1, t.d2), (0.0, 0.5, 0.0625));
    assert!(bond_potential(0.0).is_err());
    assert!(bond_potential(-1.0).is_err());
}

#[test]
fn nonbond_potential_values() {
    let p = ForceFieldParams::new(0.1, 40.0, 0.0).unwrap();
    assert!((nonbond_potential(1.0, &p).unwrap().value - 39.9).abs() < 1e-14);
    assert!((nonbond_potential(4.0, &p).unwrap().value - 0.008203125).abs() < 1e-16);
    let z = nonbond_potential(2.7, &ForceFieldParams::zero()).unwrap();
    assert_eq!((z.value, z.d1, z.d2), (0.0, 0.0, 0.0));
    assert!(nonbond_potential(0.0, &p).is_err());
}

#[test]
fn nonbond_limits() {
    let p = ForceFieldParams::new(0.3, 20.0, 0.2).unwrap();
    let near = nonbond_potential(1e-6, &p).unwrap();
    assert!(near.value > 1e30 && near.d1 < -1e30);
    let far = nonbond_potential(1e6, &p).unwrap();
    assert!(far.value.abs() < 1e-3 && far.d1.abs() < 1e-9);
}

#[test]
fn small_energies() {
    let m = ChainModel::new(2, Boundary::Neumann, ForceFieldParams::zero()).unwrap();
    let c = Configuration::new(&[[-0.5, 0.0], [0.5, 0.0]]).unwrap();
    assert_eq!(total_energy(&m, &c).unwrap(), -1.0);

    let m = ChainModel::new(3, Boundary::Periodic, ForceFieldParams::zero()).unwrap();
    let h = 3f64.sqrt() / 2.0;
    let c = Configuration::new(&[[0.0, 0.0], [1.0, 0.0], [0.5, h]]).unwrap();
    assert!((total_energy(&m, &c).unwrap() + 3.0).abs() < 1e-14);
}

#[test]
fn carbon_energy_matches_pairwise_sum() {
    let p = carbon();
    let pts: Vec<[f64; 2]> = (0..6).map(|j| [j as f64 - 2.5, 0.0]).collect();
    let m = ChainModel::new(6, Boundary::Neumann, p).unwrap();
    let e = total_energy(&m, &Configuration::new(&pts).unwrap()).unwrap();
    let oracle = brute_energy(&pts, false, p.attraction, p.repulsion, p.coulomb);
    assert!(((e - oracle) / oracle).abs() < 1e-12, "{e} vs {oracle}");

    let pts: Vec<[f64; 2]> = (0..7)
        .map(|j| {
            let t = j as f64 * 0.9 + 0.1 * (j * j) as f64;
            [1.3 * t.cos() + 0.05 * j as f64, 1.1 * t.sin()]
        })
        .collect();
    let p = ForceFieldParams::new(0.4, 12.0, 0.3).unwrap();
    let m = ChainModel::new(7, Boundary::Periodic, p).unwrap();
    let e = total_energy(&m, &Configuration::new(&pts).unwrap()).unwrap();
    let oracle = brute_energy(&pts, true, 0.4, 12.0, 0.3);
    assert!(((e - oracle) / oracle).abs() < 1e-12);
}

#[test]
fn hessian_annihilates_translations_and_is_symmetric() {
    let p = ForceFieldParams::new(0.2, 30.0, 0.1).unwrap();
    let m = ChainModel::new(5, Boundary::Periodic, p).unwrap();
    let pts = [[0.0, 0.0], [1.1, 0.1], [1.6, 1.0], [0.7, 1.7], [-0.3, 0.9]];
    let h = hessian(&m, &Configuration::new(&pts).unwrap()).unwrap();
    assert_eq!(h, h.transpose());
    let scale = h.amax();
    for axis in 0..2 {
        let t: Vec<f64> = (0..10).map(|i| if i % 2 == axis { 1.0 } else { 0.0 }).collect();
        let ht = &h * nalgebra::DVector::from_vec(t);
        assert!(ht.amax() <= 1e-13 * scale);
    }
}

#[test]
fn carbon_rescaling() {
    let r = rescale_physical(&PhysicalParams::CARBON).unwrap();
    assert!((0.10..=0.11).contains(&r.params.attraction));
    assert!((40.0..=41.0).contains(&r.params.repulsion));
    assert_eq!(r.params.coulomb, 0.0);
    // 40-digit evaluation of 4 eps sigma^6 / (k b^8) and 4 eps sigma^12 / (k b^14).
    assert!((r.params.attraction - 0.1059549333973291774).abs() < 1e-15);
    assert!((r.params.repulsion - 40.35239676222421349).abs() < 1e-12);
    assert!((r.omega - (255224.0f64 / 12.0).sqrt()).abs() < 1e-12);
    assert_eq!(r.length_scale, 0.13);
}

#[test]
fn invalid_inputs() {
    assert!(ForceFieldParams::new(-0.1, 1.0, 0.0).is_err());
    assert!(ForceFieldParams::new(f64::NAN, 1.0, 0.0).is_err());
    assert!(!ForceFieldParams::new(2.0, 1.0, 0.0).unwrap().in_sweep_box());
    assert!(ChainModel::new(1, Boundary::Neumann, ForceFieldParams::zero()).is_err());
    assert!(ChainModel::new(2, Boundary::Periodic, ForceFieldParams::zero()).is_err());
    let mut bad = PhysicalParams::CARBON;
    bad.sigma = 0.0;
    assert!(rescale_physical(&bad).is_err());
    bad = PhysicalParams::CARBON;
    bad.charge = -1.0;
    assert!(rescale_physical(&bad).is_err());
}

#[test]
fn configurations() {
    let c = Configuration::new(&[[1.0, 2.0], [2.0, 2.0]]).unwrap();
    assert_eq!(c.as_slice(), &[-0.5, 0.0, 0.5, 0.0]);
    assert_eq!(c.min_pair_distance(), 1.0);
    let hex: Vec<[f64; 2]> = (0..6)
        .map(|j| {
            let t = j as f64 * std::f64::consts::PI / 3.0;
            [t.cos(), t.sin()]
        })
        .collect();
    assert!((Configuration::new(&hex).unwrap().min_pair_distance() - 1.0).abs() < 1e-15);
    assert_eq!(min_pair_distance(&[0.3, 0.3, 0.3, 0.3]), 0.0);
    assert!(Configuration::new(&[[0.0, 0.0], [0.0, 0.0]]).is_err());
    let m = ChainModel::new(2, Boundary::Neumann, ForceFieldParams::zero()).unwrap();
    assert!(m.energy(&[0.0, 0.0, 0.0, 0.0]).is_err());
}
