use chainlab::equilibria::*;
use chainlab::potential::*;
use chainlab::Error;

fn carbon() -> ForceFieldParams {
    rescale_physical(&PhysicalParams::CARBON).unwrap().params
}

fn w(x: f64, p: &ForceFieldParams) -> f64 {
    p.repulsion / x.powi(6) - p.attraction / x.powi(3) + p.coulomb / x.sqrt()
}

fn w_prime(x: f64, p: &ForceFieldParams) -> f64 {
    -6.0 * p.repulsion / x.powi(7) + 3.0 * p.attraction / x.powi(4) - 0.5 * p.coulomb / x.powf(1.5)
}

/// Energy of the regular polygon as a function of its radius.
fn polygon_energy(n: usize, a: f64, p: &ForceFieldParams) -> f64 {
    let chord = |k: usize| 2.0 * a * (k as f64 * std::f64::consts::PI / n as f64).sin();
    let d = chord(1);
    let mut e = n as f64 * (d * d - 2.0 * d);
    for k in 1..n {
        let c = chord(k);
        e += 0.5 * n as f64 * w(c * c, p);
    }
    e
}

/// Energy of a collinear chain with positions `xs`.
fn chain_energy(xs: &[f64], p: &ForceFieldParams) -> f64 {
    let mut e = 0.0;
    for j in 0..xs.len() {
        for k in j + 1..xs.len() {
            let d = (xs[k] - xs[j]).abs();
            if k == j + 1 {
                e += d * d - 2.0 * d;
            }
            e += w(d * d, p);
        }
    }
    e
}

fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-7 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Parabolic polish of a 1-D minimizer with step `h`.
fn parabolic_step(f: &impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    let (fm, f0, fp) = (f(x - h), f(x), f(x + h));
    x - h * (fp - fm) / (2.0 * (fp - 2.0 * f0 + fm))
}

#[test]
fn zero_coupling_closed_forms() {
    let z = ForceFieldParams::zero();
    for n in 3..=10 {
        let m = ChainModel::new(n, Boundary::Periodic, z).unwrap();
        let roots = circular_radius(&m, RingScan::default(), 1e-13).unwrap();
        assert_eq!(roots.len(), 1);
        let expected = 1.0 / (2.0 * (std::f64::consts::PI / n as f64).sin());
        assert!((roots[0].radius - expected).abs() < 1e-10, "n = {n}");

        let m = ChainModel::new(n, Boundary::Neumann, z).unwrap();
        let c = collinear_equilibrium(&m, NewtonOptions::default()).unwrap();
        assert!((c.half_length() - (n as f64 - 1.0) / 2.0).abs() < 1e-10);
        let xs = c.positions();
        assert!(xs.windows(2).all(|p| (p[1] - p[0] - 1.0).abs() < 1e-10));
    }
    let m = ChainModel::new(4, Boundary::Periodic, z).unwrap();
    let r = solve_equilibrium(&m, NewtonOptions::default()).unwrap();
    assert!((r.size_metric() - 0.5f64.sqrt()).abs() < 1e-10);
}

#[test]
fn ring_residual_identity_at_roots() {
    for (n, p) in [
        (6, carbon()),
        (9, carbon()),
        (5, ForceFieldParams::new(0.3, 10.0, 0.2).unwrap()),
        (8, ForceFieldParams::new(0.9, 70.0, 0.0).unwrap()),
    ] {
        let m = ChainModel::new(n, Boundary::Periodic, p).unwrap();
        for root in circular_radius(&m, RingScan::default(), 1e-12).unwrap() {
            let a = root.radius;
            let s = |k: usize| 2.0 * (k as f64 * std::f64::consts::PI / n as f64).sin();
            let x1 = a * a * s(1) * s(1);
            let mut total = 2.0 * (1.0 - 1.0 / x1.sqrt()) * s(1) * s(1);
            for k in 1..n {
                total += w_prime(a * a * s(k) * s(k), &p) * s(k) * s(k);
            }
            assert!(total.abs() < 1e-10, "n = {n}, a = {a}: {total}");
            let check = verify_equilibrium(&m, &root.configuration(), 1e-9);
            assert!(check.passed, "{check:?}");
        }
    }
}

#[test]
fn carbon_ring_radius_minimizes_polygon_energy() {
    let p = carbon();
    for n in [6usize, 7, 10] {
        let m = ChainModel::new(n, Boundary::Periodic, p).unwrap();
        let ring = match solve_equilibrium(&m, NewtonOptions::default()).unwrap() {
            Equilibrium::Ring(r) => r,
            other => panic!("{other:?}"),
        };
        let f = |a: f64| polygon_energy(n, a, &p);
        let guess = 1.0 / (2.0 * (std::f64::consts::PI / n as f64).sin());
        let mut a = golden_section(f, 0.7 * guess, 2.5 * guess);
        for _ in 0..3 {
            a = parabolic_step(&f, a, 1e-5);
        }
        assert!((ring.radius - a).abs() < 1e-8, "n = {n}: {} vs {a}", ring.radius);
        let e = total_energy(&m, &ring.configuration()).unwrap();
        assert!(((e - f(a)) / e).abs() < 1e-12);
    }
}

#[test]
fn carbon_chain_matches_coordinate_descent() {
    let p = carbon();
    for n in [5usize, 6] {
        let m = ChainModel::new(n, Boundary::Neumann, p).unwrap();
        let eq = collinear_equilibrium(&m, NewtonOptions::default()).unwrap();
        assert!(eq.residual <= 1e-10);

        // Free half coordinates; the other half mirrors them.
        let odd = n % 2 == 1;
        let mut half: Vec<f64> = (0..n / 2)
            .map(|k| if odd { k as f64 + 1.0 } else { k as f64 + 0.5 })
            .collect();
        let expand = |h: &[f64]| -> Vec<f64> {
            let mut xs: Vec<f64> = h.iter().rev().map(|v| -v).collect();
            if odd {
                xs.push(0.0);
            }
            xs.extend_from_slice(h);
            xs
        };
        for sweep in 0..5000 {
            let h = if sweep < 50 { 1e-4 } else { 1e-5 };
            let before = half.clone();
            for i in 0..half.len() {
                let f = |v: f64| {
                    let mut h = half.clone();
                    h[i] = v;
                    chain_energy(&expand(&h), &p)
                };
                half[i] = parabolic_step(&f, half[i], h);
            }
            let moved = half.iter().zip(&before).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if sweep > 50 && moved < 1e-13 {
                break;
            }
        }
        let ours = eq.positions();
        let oracle = expand(&half);
        for (a, b) in ours.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-8, "n = {n}: {ours:?} vs {oracle:?}");
        }
        let e = total_energy(&m, &eq.configuration()).unwrap();
        assert!(((e - chain_energy(&ours, &p)) / e).abs() < 1e-12);
    }
}

#[test]
fn odd_chain_keeps_center_particle() {
    let m = ChainModel::new(7, Boundary::Neumann, carbon()).unwrap();
    let eq = collinear_equilibrium(&m, NewtonOptions::default()).unwrap();
    assert_eq!(eq.half_positions.len(), 4);
    assert_eq!(eq.half_positions[0], 0.0);
    let xs = eq.positions();
    assert_eq!(xs.len(), 7);
    for j in 0..7 {
        assert!((xs[j] + xs[6 - j]).abs() < 1e-15);
    }
}

#[test]
fn newton_energy_trace_is_monotone() {
    for (a, b) in [(0.1, 40.0), (0.8, 5.0), (0.0, 100.0), (1.0, 100.0)] {
        let p = ForceFieldParams::new(a, b, 0.0).unwrap();
        let m = ChainModel::new(8, Boundary::Neumann, p).unwrap();
        let eq = collinear_equilibrium(&m, NewtonOptions::default()).unwrap();
        assert!(eq.energy_trace.windows(2).all(|w| w[1] <= w[0] + 1e-14));
        assert_eq!(eq.energy_trace.len(), eq.iterations + 1);
    }
}

#[test]
fn failures_are_reported() {
    let m = ChainModel::new(6, Boundary::Periodic, carbon()).unwrap();
    let scan = RingScan { a_min: 2.0, a_max: 3.0, points: 20 };
    assert!(matches!(circular_radius(&m, scan, 1e-10), Err(Error::NoBracket { .. })));

    let wrong = CircularEquilibrium::new(6, 1.2).configuration();
    let check = verify_equilibrium(&m, &wrong, 1e-8);
    assert!(!check.passed && check.residual > 1e-3);

    let open = ChainModel::new(6, Boundary::Neumann, carbon()).unwrap();
    assert!(matches!(circular_radius(&open, RingScan::default(), 1e-10), Err(Error::InvalidModel(_))));
    assert!(matches!(collinear_equilibrium(&m, NewtonOptions::default()), Err(Error::InvalidModel(_))));

    let tight = NewtonOptions { tol: 1e-10, max_iter: 1 };
    let big = ChainModel::new(10, Boundary::Neumann, ForceFieldParams::new(1.0, 100.0, 0.0).unwrap()).unwrap();
    match collinear_equilibrium(&big, tight) {
        Err(Error::NonConvergence { last_iterate, .. }) => assert_eq!(last_iterate.len(), 5),
        other => panic!("{other:?}"),
    }
}

#[test]
fn chord_factors() {
    for n in 3..12usize {
        for k in 1..n as i64 {
            let s = chord_factor(n, k);
            assert!((s - chord_factor(n, n as i64 - k)).abs() < 1e-14);
            assert!((s + chord_factor(n, -k)).abs() < 1e-15);
            let s1 = chord_factor(n, 1);
            let t = (k as f64 * std::f64::consts::PI / n as f64).cos();
            let c = 2.0 * (std::f64::consts::PI / n as f64).cos();
            // s_{k+1} + s_{k-1} = 2 cos(π/n)-type recurrence
            let lhs = chord_factor(n, k + 1) + chord_factor(n, k - 1);
            assert!((lhs - c * s).abs() < 1e-13, "{lhs} {}", c * s);
            assert!(s1 > 0.0 && t.abs() <= 1.0);
        }
    }
    assert!((chord_factor(6, 1) - 1.0).abs() < 1e-15);
    assert!((chord_factor(4, 1) - 2f64.sqrt()).abs() < 1e-15);
}
