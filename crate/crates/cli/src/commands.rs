use chainlab::equilibria::{circular_radius, solve_equilibrium, verify_equilibrium, Equilibrium, RingScan};
use chainlab::integrator::{integrate_with, CsvDump, IntegrateOptions, PhaseState, Scheme, TRAJECTORY_GUARD};
use chainlab::orbits::{mode_seeds, run_branches, Branch, Corrector, ModeSeed, OrbitSettings};
use chainlab::potential::{rescale_physical, Boundary, ChainModel, ForceFieldParams, PhysicalParams};
use chainlab::spectra::{equilibrium_spectrum, negative_count_table, ModeClass, SpectralReport};
use chainlab::sweep::{sweep as run_sweep, Axis, SweepGrid};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::format::{Format, Sink, Table};

const REFERENCE: &str = include_str!("../data/carbon_table.csv");

fn model_json(cfg: &RunConfig, model: &ChainModel) -> Value {
    let p = model.params;
    let mut v = json!({
        "n": model.n,
        "boundary": model.boundary.to_string(),
        "A": p.attraction,
        "B": p.repulsion,
        "C": p.coulomb,
    });
    if let Some((phys, r)) = &cfg.rescaling {
        v["physical"] = json!({
            "epsilon": phys.epsilon,
            "sigma": phys.sigma,
            "b": phys.bond_length,
            "k": phys.stiffness,
            "q": phys.charge,
            "m": phys.mass,
            "omega": r.omega,
            "length_scale": r.length_scale,
        });
    }
    v
}

fn model_rows(sink: &Sink, model: &ChainModel) -> Vec<(String, String)> {
    let p = model.params;
    vec![
        ("n".into(), model.n.to_string()),
        ("boundary".into(), model.boundary.to_string()),
        ("A".into(), sink.num(p.attraction)),
        ("B".into(), sink.num(p.repulsion)),
        ("C".into(), sink.num(p.coulomb)),
    ]
}

fn key_value(rows: Vec<(String, String)>) -> Table {
    let mut t = Table::new(&["key", "value"]);
    for (k, v) in rows {
        t.push(vec![k, v]);
    }
    t
}

fn kind(eq: &Equilibrium) -> &'static str {
    match eq {
        Equilibrium::Collinear(_) => "collinear",
        Equilibrium::Ring(_) => "ring",
    }
}

fn metric_name(boundary: Boundary) -> &'static str {
    match boundary {
        Boundary::Neumann => "half_length",
        Boundary::Periodic => "radius",
    }
}

pub fn equilibrium(cfg: &RunConfig) -> Result<(), CliError> {
    let model = cfg.model()?;
    let eq = solve_equilibrium(&model, cfg.newton)?;
    let coords = eq.coords();
    let check = verify_equilibrium(&model, &eq.configuration(), cfg.newton.tol);
    let energy = model.energy(&coords)?;
    let roots = match model.boundary {
        Boundary::Periodic => circular_radius(&model, RingScan::default(), cfg.newton.tol)?
            .into_iter()
            .map(|r| Ok((r.radius, r.residual, model.energy(&r.coords())?)))
            .collect::<chainlab::Result<Vec<_>>>()?,
        Boundary::Neumann => Vec::new(),
    };
    let selected = |radius: f64| eq.size_metric() == radius;
    let iterations = match &eq {
        Equilibrium::Collinear(c) => c.iterations,
        Equilibrium::Ring(_) => 0,
    };
    let metric = metric_name(model.boundary);

    let mut sink = cfg.sink.clone();
    match sink.format {
        Format::Csv => {
            let mut rows = model_rows(&sink, &model);
            rows.extend([
                ("kind".into(), kind(&eq).into()),
                (metric.into(), sink.num(eq.size_metric())),
                ("gradient_residual".into(), sink.num(check.residual)),
                ("energy".into(), sink.num(energy)),
                ("iterations".into(), iterations.to_string()),
            ]);
            sink.csv("equilibrium_summary.csv", &key_value(rows))?;
            let mut pos = Table::new(&["particle", "x", "y"]);
            for (j, p) in coords.chunks(2).enumerate() {
                pos.push(vec![(j + 1).to_string(), sink.num(p[0]), sink.num(p[1])]);
            }
            sink.csv("equilibrium.csv", &pos)?;
            if !roots.is_empty() {
                let mut t = Table::new(&["radius", "residual", "energy", "selected"]);
                for &(a, r, e) in &roots {
                    t.push(vec![sink.num(a), sink.num(r), sink.num(e), selected(a).to_string()]);
                }
                sink.csv("ring_roots.csv", &t)?;
            }
        }
        Format::Json => {
            let mut doc = json!({
                "command": "equilibrium",
                "model": model_json(cfg, &model),
                "kind": kind(&eq),
                "size_metric": eq.size_metric(),
                "gradient_residual": check.residual,
                "energy": energy,
                "iterations": iterations,
                "positions": coords.chunks(2).map(|p| vec![p[0], p[1]]).collect::<Vec<_>>(),
            });
            doc[metric] = json!(eq.size_metric());
            if !roots.is_empty() {
                doc["ring_roots"] = roots
                    .iter()
                    .map(|&(a, r, e)| json!({"radius": a, "residual": r, "energy": e, "selected": selected(a)}))
                    .collect();
            }
            sink.json("equilibrium.json", doc)?;
        }
    }
    println!(
        "{} equilibrium, n = {}: {metric} = {}, gradient residual {:.3e}",
        kind(&eq),
        model.n,
        sink.num(eq.size_metric()),
        check.residual
    );
    Ok(())
}

fn class_name(c: ModeClass) -> &'static str {
    match c {
        ModeClass::Negative => "negative",
        ModeClass::Zero => "zero",
        ModeClass::Positive => "positive",
    }
}

fn spectrum_json(r: &SpectralReport) -> Value {
    json!({
        "eigenvalues": r.eigenvalues.iter().enumerate().map(|(i, &v)| json!({
            "index": i + 1,
            "eigenvalue": v,
            "class": class_name(r.classes[i]),
            "block": r.provenance[i].map(|b| b.to_string()),
            "kernel_residual": r.kernel_residuals[i],
        })).collect::<Vec<_>>(),
        "negative_count": r.negative_count,
        "zero_count": r.zero_count,
        "positive_count": r.positive_count,
        "hessian_norm": r.hessian_norm,
        "block_mismatch": r.block_mismatch,
        "candidates": r.candidates.iter().map(|c| json!({
            "nu": c.nu,
            "lambda": c.lambda,
            "block": c.block.map(|b| b.to_string()),
            "multiplicity": c.multiplicity,
            "nonresonant": c.nonresonant,
        })).collect::<Vec<_>>(),
    })
}

pub fn spectrum(cfg: &RunConfig) -> Result<(), CliError> {
    let model = cfg.model()?;
    let eq = solve_equilibrium(&model, cfg.newton)?;
    let r = equilibrium_spectrum(&model, &eq)?;
    let mut sink = cfg.sink.clone();
    match sink.format {
        Format::Csv => {
            let mut t = Table::new(&["index", "eigenvalue", "class", "block", "kernel_residual"]);
            for (i, &v) in r.eigenvalues.iter().enumerate() {
                t.push(vec![
                    (i + 1).to_string(),
                    sink.num(v),
                    class_name(r.classes[i]).into(),
                    r.provenance[i].map(|b| b.to_string()).unwrap_or_default(),
                    sink.num(r.kernel_residuals[i]),
                ]);
            }
            sink.csv("spectrum.csv", &t)?;
            let mut c = Table::new(&["nu", "lambda", "block", "multiplicity", "nonresonant"]);
            for cand in &r.candidates {
                c.push(vec![
                    sink.num(cand.nu),
                    sink.num(cand.lambda),
                    cand.block.map(|b| b.to_string()).unwrap_or_default(),
                    cand.multiplicity.to_string(),
                    cand.nonresonant.to_string(),
                ]);
            }
            sink.csv("candidates.csv", &c)?;
            let mut rows = model_rows(&sink, &model);
            rows.extend([
                ("size_metric".into(), sink.num(eq.size_metric())),
                ("negative_count".into(), r.negative_count.to_string()),
                ("zero_count".into(), r.zero_count.to_string()),
                ("positive_count".into(), r.positive_count.to_string()),
                ("hessian_norm".into(), sink.num(r.hessian_norm)),
                ("block_mismatch".into(), r.block_mismatch.map(|m| sink.num(m)).unwrap_or_default()),
            ]);
            sink.csv("spectrum_summary.csv", &key_value(rows))?;
        }
        Format::Json => {
            let mut doc = spectrum_json(&r);
            doc["command"] = json!("spectrum");
            doc["model"] = model_json(cfg, &model);
            doc["size_metric"] = json!(eq.size_metric());
            sink.json("spectrum.json", doc)?;
        }
    }
    println!(
        "{} equilibrium, n = {}: {} negative, {} zero, {} positive eigenvalues",
        kind(&eq),
        model.n,
        r.negative_count,
        r.zero_count,
        r.positive_count
    );
    Ok(())
}

pub fn sweep(cfg: &RunConfig) -> Result<(), CliError> {
    let n = cfg.n.ok_or_else(|| CliError::Config("missing --n".into()))?;
    let boundary = cfg.boundary.ok_or_else(|| CliError::Config("missing --boundary".into()))?;
    let mut grid = SweepGrid::default();
    if let Some(a) = cfg.get::<Axis>("grid_a")? {
        grid.a = a;
    }
    if let Some(b) = cfg.get::<Axis>("grid_b")? {
        grid.b = b;
    }
    let coulomb = cfg.params.map_or(0.0, |p| p.coulomb);
    // Validates n and the boundary before the grid runs.
    ChainModel::new(n, boundary, ForceFieldParams::new(0.0, 0.0, coulomb)?)?;
    let cells = run_sweep(n, boundary, coulomb, &grid, cfg.newton);
    let failed = cells.iter().filter(|c| !c.ok()).count();

    let mut sink = cfg.sink.clone();
    match sink.format {
        Format::Csv => {
            let mut t = Table::new(&["A", "B", "size_metric", "negative_count", "status"]);
            for c in &cells {
                t.push(vec![
                    sink.num(c.a),
                    sink.num(c.b),
                    sink.num(c.size_metric),
                    c.negative_count.map(|k| k.to_string()).unwrap_or_default(),
                    c.status().into(),
                ]);
            }
            sink.csv("sweep.csv", &t)?;
        }
        Format::Json => {
            let doc = json!({
                "command": "sweep",
                "n": n,
                "boundary": boundary.to_string(),
                "C": coulomb,
                "size_metric": metric_name(boundary),
                "grid": {"A": grid.a.to_string(), "B": grid.b.to_string()},
                "failed_cells": failed,
                "cells": cells.iter().map(|c| json!({
                    "A": c.a,
                    "B": c.b,
                    "size_metric": if c.size_metric.is_finite() { json!(c.size_metric) } else { json!("NaN") },
                    "negative_count": c.negative_count,
                    "status": c.status(),
                })).collect::<Vec<_>>(),
            });
            sink.json("sweep.json", doc)?;
        }
    }
    println!("sweep n = {n} {boundary}: {} cells, {failed} failed", cells.len());
    Ok(())
}

struct Reference {
    eigenvalues: Vec<(Boundary, usize, f64)>,
    counts: Vec<(Boundary, usize, usize)>,
}

fn reference() -> Result<Reference, CliError> {
    let mut r = Reference {
        eigenvalues: Vec::new(),
        counts: Vec::new(),
    };
    let bad = |line: &str| CliError::Io(format!("malformed reference line '{line}'"));
    for line in REFERENCE.lines().skip_while(|l| l.starts_with('#')).skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(bad(line));
        }
        let boundary: Boundary = f[1].parse().map_err(|_| bad(line))?;
        let key: usize = f[2].parse().map_err(|_| bad(line))?;
        match f[0] {
            "eigenvalue" => r.eigenvalues.push((boundary, key, f[3].parse().map_err(|_| bad(line))?)),
            "count" => r.counts.push((boundary, key, f[3].parse().map_err(|_| bad(line))?)),
            _ => return Err(bad(line)),
        }
    }
    Ok(r)
}

/// Relative tolerance for eigenvalues of magnitude at least `1e-2`;
/// smaller ones only need the same sign and order of magnitude.
const EIGEN_TOL: f64 = 0.05;

fn eigen_pass(computed: f64, reference: f64) -> bool {
    if reference.abs() >= 1e-2 {
        ((computed - reference) / reference).abs() <= EIGEN_TOL
    } else {
        computed.signum() == reference.signum() && (computed / reference).abs().log10().abs() <= 1.0
    }
}

/// Nonzero eigenvalues by decreasing magnitude, the order of the reference table.
fn nonzero_by_magnitude(r: &SpectralReport) -> Vec<f64> {
    let mut v: Vec<f64> = r
        .eigenvalues
        .iter()
        .zip(&r.classes)
        .filter(|(_, c)| **c != ModeClass::Zero)
        .map(|(v, _)| *v)
        .collect();
    v.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
    v
}

pub fn carbon_table(cfg: &RunConfig) -> Result<(), CliError> {
    let refs = reference()?;
    let exact = rescale_physical(&PhysicalParams::CARBON)?.params;
    let choices = [("rounded", ForceFieldParams::new(0.1, 40.0, 0.0)?), ("exact", exact)];

    let mut eigen_rows = Vec::new();
    let mut count_rows = Vec::new();
    for (name, params) in choices {
        for boundary in [Boundary::Neumann, Boundary::Periodic] {
            let model = ChainModel::new(6, boundary, params)?;
            let eq = solve_equilibrium(&model, cfg.newton)?;
            let computed = nonzero_by_magnitude(&equilibrium_spectrum(&model, &eq)?);
            for &(b, i, value) in refs.eigenvalues.iter().filter(|e| e.0 == boundary) {
                let c = computed.get(i - 1).copied().unwrap_or(f64::NAN);
                eigen_rows.push((name, b, i, c, value, ((c - value) / value).abs(), eigen_pass(c, value)));
            }
        }
        let table = negative_count_table(params, 3..=11)?;
        for &(b, n, expected) in &refs.counts {
            let row = table
                .iter()
                .find(|r| r.n == n)
                .ok_or_else(|| CliError::Numerical(format!("count table lacks n = {n}")))?;
            let c = match b {
                Boundary::Neumann => row.collinear,
                Boundary::Periodic => row.ring,
            };
            count_rows.push((name, b, n, c, expected, c == expected));
        }
    }

    let mut sink = cfg.sink.clone();
    match sink.format {
        Format::Csv => {
            let mut t = Table::new(&["params", "boundary", "index", "computed", "reference", "rel_error", "pass"]);
            for &(name, b, i, c, r, e, ok) in &eigen_rows {
                t.push(vec![
                    name.into(),
                    b.to_string(),
                    i.to_string(),
                    sink.num(c),
                    sink.num(r),
                    sink.num(e),
                    ok.to_string(),
                ]);
            }
            sink.csv("carbon_eigenvalues.csv", &t)?;
            let mut t = Table::new(&["params", "boundary", "n", "computed", "reference", "pass"]);
            for &(name, b, n, c, r, ok) in &count_rows {
                t.push(vec![name.into(), b.to_string(), n.to_string(), c.to_string(), r.to_string(), ok.to_string()]);
            }
            sink.csv("carbon_counts.csv", &t)?;
        }
        Format::Json => {
            let doc = json!({
                "command": "carbon-table",
                "params": choices.iter().map(|(name, p)| json!({
                    "name": name, "A": p.attraction, "B": p.repulsion, "C": p.coulomb,
                })).collect::<Vec<_>>(),
                "eigenvalue_tolerance": EIGEN_TOL,
                "eigenvalues": eigen_rows.iter().map(|&(name, b, i, c, r, e, ok)| json!({
                    "params": name, "boundary": b.to_string(), "index": i,
                    "computed": c, "reference": r, "rel_error": e, "pass": ok,
                })).collect::<Vec<_>>(),
                "counts": count_rows.iter().map(|&(name, b, n, c, r, ok)| json!({
                    "params": name, "boundary": b.to_string(), "n": n,
                    "computed": c, "reference": r, "pass": ok,
                })).collect::<Vec<_>>(),
            });
            sink.json("carbon_table.json", doc)?;
        }
    }
    let passed = |v: &[bool]| v.iter().filter(|&&x| x).count();
    let e: Vec<bool> = eigen_rows.iter().map(|r| r.6).collect();
    let c: Vec<bool> = count_rows.iter().map(|r| r.5).collect();
    println!("eigenvalues: {}/{} within tolerance", passed(&e), e.len());
    println!("negative counts: {}/{} exact", passed(&c), c.len());
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SeedChoice {
    All,
    Block(usize),
}

impl std::str::FromStr for SeedChoice {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        if s.eq_ignore_ascii_case("all") {
            Ok(SeedChoice::All)
        } else {
            s.parse().map(SeedChoice::Block).map_err(|_| ())
        }
    }
}

enum Outcome {
    Branch(Branch),
    Skipped(String),
    Failed(String),
}

fn branch_name(index: usize, seed: Option<&ModeSeed>) -> String {
    match seed {
        Some(s) => format!("branch_{index:02}_{}", s.class),
        None => format!("branch_{index:02}"),
    }
}

fn dump_trajectory(model: &ChainModel, branch: &Branch) -> Result<String, CliError> {
    let orbit = &branch.orbits[0];
    let steps = 2 * orbit.steps.max(16);
    let period = orbit.period();
    let mut dump = CsvDump::new(Vec::new());
    let opts = IntegrateOptions {
        scheme: Scheme::Yoshida4,
        stride: (steps / 256).max(1),
        guard: TRAJECTORY_GUARD,
    };
    let start = PhaseState::at_rest(orbit.initial_positions.as_slice().to_vec());
    integrate_with(start, period / steps as f64, period, model, &mut [&mut dump], opts)?;
    String::from_utf8(dump.into_inner()).map_err(|e| CliError::Io(e.to_string()))
}

pub fn orbit(cfg: &RunConfig) -> Result<(), CliError> {
    let model = cfg.model()?;
    let choice: SeedChoice = cfg
        .command_str("seed")
        .map(|s| s.parse().map_err(|_| CliError::Config(format!("--seed expects a block index or 'all', got '{s}'"))))
        .transpose()?
        .unwrap_or(SeedChoice::All);
    let eq = solve_equilibrium(&model, cfg.newton)?;
    let report = equilibrium_spectrum(&model, &eq)?;

    let mut settings = OrbitSettings::for_report(&report);
    if let Some(eps) = cfg.get::<f64>("amplitude")? {
        settings.epsilon = eps;
    }
    if let Some(tol) = cfg.get::<f64>("shoot_tol")? {
        settings.shoot.tol = tol;
    }
    let limits = &mut settings.continuation.limits;
    if let Some(v) = cfg.get("max_steps")? {
        limits.max_steps = v;
    }
    if let Some(v) = cfg.get("max_amplitude")? {
        limits.max_amplitude = v;
    }
    if let Some(v) = cfg.get("max_period")? {
        limits.max_period = v;
    }
    if let Some(c) = cfg.command_str("corrector") {
        settings.continuation.corrector = match c.to_ascii_lowercase().as_str() {
            "pin" | "amplitude" => Corrector::AmplitudePin,
            "arclength" => Corrector::Arclength,
            other => return Err(CliError::Config(format!("unknown corrector '{other}' (expected pin or arclength)"))),
        };
    }
    if !(settings.epsilon > 0.0 && settings.shoot.tol > 0.0) {
        return Err(CliError::Config("amplitude and shoot-tol must be positive".into()));
    }
    let dump = cfg.get::<bool>("dump_trajectory")?.unwrap_or(false);

    let seeds = mode_seeds(&model, &eq.coords(), &report);
    let wanted = |s: &ModeSeed| match choice {
        SeedChoice::All => true,
        SeedChoice::Block(k) => s.class.k == k,
    };
    let mut runnable = Vec::new();
    let mut rows: Vec<(usize, Option<ModeSeed>, Outcome)> = Vec::new();
    for (i, (_, seed)) in seeds.into_iter().enumerate() {
        match seed {
            Ok(s) if wanted(&s) => runnable.push((i + 1, s)),
            Ok(_) => {}
            Err(e) if choice == SeedChoice::All => {
                let outcome = match e {
                    chainlab::Error::Resonant { .. } => Outcome::Skipped(e.to_string()),
                    other => Outcome::Failed(other.to_string()),
                };
                rows.push((i + 1, None, outcome));
            }
            Err(_) => {}
        }
    }
    if runnable.is_empty() && rows.is_empty() {
        return Err(CliError::Config(match choice {
            SeedChoice::Block(k) => format!("no seedable bifurcation candidate in block k = {k}"),
            SeedChoice::All => "the equilibrium has no positive eigenvalues to seed from".into(),
        }));
    }
    let only: Vec<ModeSeed> = runnable.iter().map(|(_, s)| s.clone()).collect();
    let results = run_branches(&model, &only, &report, &settings);
    for ((i, s), res) in runnable.into_iter().zip(results) {
        let outcome = match res {
            Ok(b) => Outcome::Branch(b),
            Err(e) => Outcome::Failed(e.to_string()),
        };
        rows.push((i, Some(s), outcome));
    }
    rows.sort_by_key(|r| r.0);

    let nu_of = |i: usize| report.candidates[i - 1].nu;
    let mut sink = cfg.sink.clone();
    let mut failures = 0;
    let mut summary = Table::new(&[
        "index",
        "nu",
        "lambda",
        "block",
        "symmetry",
        "label",
        "orbits",
        "termination",
        "returned_to",
        "status",
    ]);
    let mut branch_docs = Vec::new();
    for (i, seed, outcome) in &rows {
        let cand = &report.candidates[i - 1];
        let name = branch_name(*i, seed.as_ref());
        let (status, branch) = match outcome {
            Outcome::Branch(b) => ("ok".to_string(), Some(b)),
            Outcome::Skipped(m) => (format!("skipped: {m}"), None),
            Outcome::Failed(m) => {
                failures += 1;
                (format!("failed: {m}"), None)
            }
        };
        match (&outcome, seed) {
            (Outcome::Branch(b), Some(s)) => {
                println!(
                    "{name}: nu = {}, {} orbits, {}",
                    sink.num(s.nu()),
                    b.orbits.len(),
                    b.termination.as_str()
                );
            }
            _ => eprintln!("{name}: nu = {}: {status}", sink.num(nu_of(*i))),
        }
        summary.push(vec![
            i.to_string(),
            sink.num(cand.nu),
            sink.num(cand.lambda),
            cand.block.map(|b| b.to_string()).unwrap_or_default(),
            seed.as_ref().map(|s| s.class.to_string()).unwrap_or_default(),
            branch.and_then(|b| b.label).unwrap_or_default().into(),
            branch.map_or(0, |b| b.orbits.len()).to_string(),
            branch.map(|b| b.termination.as_str()).unwrap_or_default().into(),
            branch.and_then(|b| b.returned_to).map(|v| sink.num(v)).unwrap_or_default(),
            status.clone(),
        ]);
        let Some(b) = branch else {
            branch_docs.push(json!({"index": i, "nu": cand.nu, "lambda": cand.lambda, "status": status}));
            continue;
        };
        let last = b.orbits.len() - 1;
        match sink.format {
            Format::Csv => {
                let mut t = Table::new(&["step", "amplitude", "half_period", "energy", "termination"]);
                let mut header = vec!["step".to_string(), "half_period".to_string()];
                header.extend((1..=model.n).flat_map(|j| [format!("x{j}"), format!("y{j}")]));
                let mut ic = Table::with_header(header);
                for (k, o) in b.orbits.iter().enumerate() {
                    t.push(vec![
                        k.to_string(),
                        sink.num(o.amplitude),
                        sink.num(o.half_period),
                        sink.num(o.energy),
                        if k == last { b.termination.as_str().into() } else { String::new() },
                    ]);
                    let mut row = vec![k.to_string(), sink.num(o.half_period)];
                    row.extend(o.initial_positions.as_slice().iter().map(|&x| sink.num(x)));
                    ic.push(row);
                }
                sink.csv(&format!("{name}.csv"), &t)?;
                sink.csv(&format!("{name}_orbits.csv"), &ic)?;
            }
            Format::Json => {
                branch_docs.push(json!({
                    "index": i,
                    "nu": cand.nu,
                    "lambda": cand.lambda,
                    "block": cand.block.map(|b| b.to_string()),
                    "symmetry": b.symmetry.to_string(),
                    "label": b.label,
                    "termination": b.termination.as_str(),
                    "returned_to": b.returned_to,
                    "last_failure": b.last_failure,
                    "status": status,
                    "orbits": b.orbits.iter().enumerate().map(|(k, o)| json!({
                        "step": k,
                        "amplitude": o.amplitude,
                        "half_period": o.half_period,
                        "energy": o.energy,
                        "residual": o.residual,
                        "positions": o.initial_positions.as_slice(),
                    })).collect::<Vec<_>>(),
                }));
            }
        }
        if dump {
            sink.raw(&format!("{name}_trajectory.csv"), &dump_trajectory(&model, b)?)?;
        }
    }
    match sink.format {
        Format::Csv => sink.csv("branches.csv", &summary)?,
        Format::Json => {
            let doc = json!({
                "command": "orbit",
                "model": model_json(cfg, &model),
                "size_metric": eq.size_metric(),
                "seed_amplitude": settings.epsilon,
                "shoot_tol": settings.shoot.tol,
                "corrector": match settings.continuation.corrector {
                    Corrector::AmplitudePin => "pin",
                    Corrector::Arclength => "arclength",
                },
                "limits": {
                    "max_steps": settings.continuation.limits.max_steps,
                    "max_amplitude": settings.continuation.limits.max_amplitude,
                    "max_period": settings.continuation.limits.max_period,
                },
                "branches": branch_docs,
            });
            sink.json("orbit.json", doc)?;
        }
    }
    if failures > 0 {
        return Err(CliError::Numerical(format!("{failures} branch(es) failed")));
    }
    Ok(())
}
