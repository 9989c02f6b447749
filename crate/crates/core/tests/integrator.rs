use chainlab::equilibria::*;
use chainlab::integrator::*;
use chainlab::potential::*;
use std::f64::consts::PI;

fn dimer() -> ChainModel {
    ChainModel::new(2, Boundary::Neumann, ForceFieldParams::zero()).unwrap()
}

fn stretched_dimer(delta: f64) -> PhaseState {
    let h = 0.5 * (1.0 + delta);
    PhaseState::at_rest(vec![-h, 0.0, h, 0.0])
}

/// Carbon ring of four with a non-symmetric kick.
fn kicked_ring() -> (ChainModel, PhaseState) {
    let p = rescale_physical(&PhysicalParams::CARBON).unwrap().params;
    let m = ChainModel::new(4, Boundary::Periodic, p).unwrap();
    let eq = match solve_equilibrium(&m, NewtonOptions::default()).unwrap() {
        Equilibrium::Ring(r) => r,
        _ => unreachable!(),
    };
    let mut x = eq.coords();
    x[0] += 0.03;
    x[3] -= 0.02;
    let v = vec![0.1, -0.2, 0.05, 0.1, -0.15, 0.1, 0.0, 0.0];
    (m, PhaseState::new(x, v, 0.0))
}

fn run(m: &ChainModel, s: &PhaseState, dt: f64, t: f64, scheme: Scheme) -> PhaseState {
    let opts = IntegrateOptions { scheme, ..Default::default() };
    integrate_with(s.clone(), dt, t, m, &mut [], opts).unwrap().final_state
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn dimer_period_is_pi() {
    let m = dimer();
    let s = stretched_dimer(0.3);
    for scheme in [Scheme::Verlet, Scheme::Yoshida4, Scheme::Rk4] {
        let end = run(&m, &s, 1e-4, PI, scheme);
        assert!(distance(&end.positions, &s.positions) < 1e-7, "{scheme:?}");
        assert!(end.speed() < 1e-7);
        let half = run(&m, &s, 1e-4, PI / 2.0, scheme);
        // separation 1 + δ cos 2t
        assert!(((half.positions[2] - half.positions[0]) - 0.7).abs() < 1e-7);
    }
}

#[test]
fn convergence_orders() {
    let (m, s) = kicked_ring();
    let t = 1.0;
    let reference = run(&m, &s, 1e-4, t, Scheme::Yoshida4);
    for (scheme, order, dt) in [(Scheme::Verlet, 2.0, 1e-2), (Scheme::Yoshida4, 4.0, 2e-2), (Scheme::Rk4, 4.0, 2e-2)] {
        let e1 = distance(&run(&m, &s, dt, t, scheme).positions, &reference.positions);
        let e2 = distance(&run(&m, &s, dt / 2.0, t, scheme).positions, &reference.positions);
        let observed = (e1 / e2).log2();
        assert!((observed - order).abs() < 0.5, "{scheme:?}: {observed}");
    }
}

#[test]
fn symplectic_schemes_are_reversible() {
    let (m, s) = kicked_ring();
    for scheme in [Scheme::Verlet, Scheme::Yoshida4] {
        let mut fwd = run(&m, &s, 1e-3, 2.0, scheme);
        fwd.velocities.iter_mut().for_each(|v| *v = -*v);
        fwd.time = 0.0;
        let mut back = run(&m, &fwd, 1e-3, 2.0, scheme);
        back.velocities.iter_mut().for_each(|v| *v = -*v);
        assert!(distance(&back.positions, &s.positions) < 1e-9);
        assert!(distance(&back.velocities, &s.velocities) < 1e-9);
    }
}

#[test]
fn momentum_is_conserved() {
    let (m, s) = kicked_ring();
    let p0 = s.momentum();
    for scheme in [Scheme::Verlet, Scheme::Yoshida4, Scheme::Rk4] {
        let p = run(&m, &s, 1e-2, 3.0, scheme).momentum();
        assert!((p[0] - p0[0]).abs() < 1e-12 && (p[1] - p0[1]).abs() < 1e-12);
    }
}

#[test]
fn verlet_energy_error_is_second_order() {
    let (m, s) = kicked_ring();
    let drift = |dt: f64| {
        let mut log = EnergyLog::default();
        integrate(s.clone(), dt, 2.0, &m, &mut [&mut log]).unwrap();
        log.max_deviation()
    };
    let ratio = drift(1e-2) / drift(5e-3);
    assert!((ratio.log2() - 2.0).abs() < 0.3, "{ratio}");
    let summary = integrate(s.clone(), 1e-3, 2.0, &m, &mut []).unwrap();
    assert!(((summary.final_energy - summary.initial_energy) / summary.initial_energy).abs() < 1e-5);
    assert_eq!(summary.steps, 2000);
}

#[test]
fn brake_instants_every_quarter_period() {
    let m = dimer();
    let mut rec = StateRecorder::default();
    let opts = IntegrateOptions { scheme: Scheme::Yoshida4, stride: 10, ..Default::default() };
    integrate_with(stretched_dimer(0.2), 1e-3, 2.0 * PI + 0.1, &m, &mut [&mut rec], opts).unwrap();
    let events = detect_brake_instants(&rec.states, &m, Scheme::Yoshida4).unwrap();
    assert_eq!(events.len(), 5);
    for (j, e) in events.iter().enumerate() {
        assert!((e.time - j as f64 * PI / 2.0).abs() < 1e-6, "{j}: {}", e.time);
        assert!(e.min_speed < 1e-6);
    }
    let first = detect_brake_instant(&rec.states[1..], &m, Scheme::Yoshida4).unwrap().unwrap();
    assert!((first.time - PI / 2.0).abs() < 1e-6);
}

#[test]
fn rotating_dimer_never_brakes() {
    let m = dimer();
    let s = PhaseState::new(vec![-0.5, 0.0, 0.5, 0.0], vec![0.0, -0.3, 0.0, 0.3], 0.0);
    let mut rec = StateRecorder::default();
    integrate(s, 1e-3, 5.0, &m, &mut [&mut rec]).unwrap();
    assert!(rec.states.iter().all(|s| s.speed() > 0.1));
    let events = detect_brake_instants(&rec.states, &m, Scheme::Verlet).unwrap();
    assert!(events.iter().all(|e| e.min_speed > 0.1));
}

#[test]
fn csv_dump_rows() {
    let (m, s) = kicked_ring();
    let mut dump = CsvDump::new(Vec::new());
    let opts = IntegrateOptions { stride: 5, ..Default::default() };
    integrate_with(s, 1e-2, 0.5, &m, &mut [&mut dump], opts).unwrap();
    let text = String::from_utf8(dump.into_inner()).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), csv_header(4));
    let rows: Vec<_> = lines.collect();
    assert_eq!(rows.len(), 11);
    assert!(rows.iter().all(|r| r.split(',').count() == 18));
    assert!(csv_header(4).starts_with("t,x1,y1,x2,y2"));
}

#[test]
fn default_step_scales_with_frequency() {
    assert!(default_dt(10.0) < default_dt(1.0));
    assert!(default_dt(2.0) > 0.0);
}
