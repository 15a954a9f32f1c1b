//! The acceptance criteria, one line each. Runs without the test harness so
//! the lines always show; exits nonzero if any criterion fails.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vflow::{cmd_certify, cmd_convergence, cmd_simulate, load_scenario, parse_scenario_in, Scenario, Setup};
use vflow_core::certify::{bounds_check, certify_all, declared_trace_bound, scale_momentum_after, Clause};
use vflow_core::dynamics::{run, RunOptions, RunOutcome};
use vflow_core::fields::{PeriodicGrid, ScalarField, VectorField};
use vflow_core::flowmap::{transport_density, transport_indicator_grid, CharacteristicConfig, VelocitySegment};
use vflow_core::interface::{compatibility_residual, first_variation, MarkerCurve};
use vflow_core::rheology::{DissipationPotential, SymTensor2};
use vflow_core::thermo::PressureLaw;
use vflow_core::Error;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn load(name: &str) -> (Scenario, Setup, PathBuf) {
    load_scenario(&scenarios().join(format!("{name}.toml"))).unwrap()
}

fn rebuild(s: &Scenario, base: &Path) -> Setup {
    let text = s.emit();
    parse_scenario_in(&text, base).unwrap().1
}

fn simulate(s: &Scenario, setup: Setup) -> RunOutcome {
    let opts = RunOptions { snapshot_every: s.output.snapshot_every, rho_bounds: Some(setup.rho_bounds) };
    run(&setup.model, &setup.config, setup.initial, opts)
}

fn within(elapsed: Duration, limit: f64) -> Result<(), String> {
    if elapsed.as_secs_f64() < limit {
        Ok(())
    } else {
        Err(format!("took {:.1} s, limit {limit} s", elapsed.as_secs_f64()))
    }
}

fn families() -> Vec<(&'static str, DissipationPotential)> {
    let q = |mu, l| DissipationPotential::quadratic(mu, l).unwrap();
    let p = |mu, a, l| DissipationPotential::power_law_with_trace(mu, a, l).unwrap();
    vec![
        ("quadratic", q(1.0, 0.5)),
        ("power", p(0.5, 1.5, 0.0)),
        ("power+trace", p(0.8, 3.0, 0.2)),
        ("trace_bounded", DissipationPotential::trace_bounded(q(1.0, 0.3), 1.0).unwrap()),
        ("dev_cap", DissipationPotential::dev_cap(p(0.5, 2.5, 0.4), 1.5).unwrap()),
        (
            "trace_bounded(dev_cap)",
            DissipationPotential::trace_bounded(DissipationPotential::dev_cap(p(0.05, 1.5, 0.02), 2.0).unwrap(), 1.0)
                .unwrap(),
        ),
    ]
}

fn tensor(rng: &mut ChaCha8Rng, r: f64) -> SymTensor2 {
    SymTensor2::new(rng.random_range(-r..r), rng.random_range(-r..r), rng.random_range(-r..r))
}

fn sub(a: &SymTensor2, b: &SymTensor2) -> SymTensor2 {
    SymTensor2::new(a.xx - b.xx, a.xy - b.xy, a.yy - b.yy)
}

fn add(a: &SymTensor2, b: &SymTensor2) -> SymTensor2 {
    SymTensor2::new(a.xx + b.xx, a.xy + b.xy, a.yy + b.yy)
}

const EPS_LIST: [f64; 4] = [1.0, 0.1, 0.01, 1e-3];

fn fenchel_young() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_any, mut worst_sub) = (f64::INFINITY, 0.0f64);
    let mut finite = 0;
    for (name, f) in families() {
        for i in 0..10_000 {
            let d = tensor(&mut rng, 2.0);
            let p = f.prox(&d, EPS_LIST[i % 4]).map_err(|e| e.to_string())?;
            let gap = f.fenchel_gap(&p.minimizer, &p.stress).map_err(|e| format!("{name}: {e}"))?;
            if gap.is_nan() || gap > 1e-8 {
                return Err(format!("{name}: subgradient gap {gap:e} at d {d:?}"));
            }
            worst_sub = worst_sub.max(gap);
            let s = tensor(&mut rng, 3.0);
            let gap = match f.fenchel_gap(&d, &s) {
                Ok(g) => g,
                Err(Error::InfiniteOperand(_)) => continue,
                Err(e) => return Err(format!("{name}: {e}")),
            };
            finite += 1;
            if gap < -1e-10 {
                return Err(format!("{name}: gap {gap:e} at d {d:?}, s {s:?}"));
            }
            worst_any = worst_any.min(gap);
        }
    }
    within(start.elapsed(), 5.0)?;
    Ok(format!("min gap {worst_any:.2e} over {finite} finite pairs, max subgradient gap {worst_sub:.2e}"))
}

fn moreau_envelope() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mu, lambda) = (1.3, 0.7);
    let quad = DissipationPotential::quadratic(mu, lambda).unwrap();
    let mut closed = 0.0f64;
    for _ in 0..1000 {
        let d = tensor(&mut rng, 2.0);
        for eps in EPS_LIST {
            let exact = mu / (2.0 * (1.0 + eps * mu)) * d.dev_norm_sq()
                + lambda / (2.0 * (1.0 + 2.0 * eps * lambda)) * d.trace().powi(2);
            let got = quad.prox(&d, eps).unwrap().envelope_value;
            closed = closed.max((got - exact).abs() / exact.max(1.0));
        }
    }
    if closed > 1e-10 {
        return Err(format!("quadratic closed form off by {closed:e}"));
    }
    let mut worst_grad = 0.0f64;
    for (name, f) in families() {
        for i in 0..1000 {
            let d = tensor(&mut rng, 2.0);
            let fd = f.eval(&d);
            let env: Vec<f64> = EPS_LIST.iter().map(|&e| f.prox(&d, e).unwrap().envelope_value).collect();
            if env.iter().any(|&e| e > fd + 1e-12 * fd.abs().max(1.0) || e.is_nan()) {
                return Err(format!("{name}: envelope {env:?} above F = {fd} at {d:?}"));
            }
            if env.windows(2).any(|w| w[1] < w[0] - 1e-12 * w[0].abs().max(1.0)) {
                return Err(format!("{name}: envelope {env:?} not increasing as eps falls at {d:?}"));
            }
            let eps = EPS_LIST[i % 4];
            let dir = tensor(&mut rng, 1.0);
            let dir = dir.scale(1.0 / dir.norm());
            let h = 1e-6;
            let value = |t: f64| f.prox(&add(&d, &dir.scale(t)), eps).unwrap().envelope_value;
            let numeric = (value(h) - value(-h)) / (2.0 * h);
            let stress = f.prox(&d, eps).unwrap().stress;
            let analytic = stress.dot(&dir);
            let rel = (numeric - analytic).abs() / stress.norm().max(1.0);
            worst_grad = worst_grad.max(rel);
        }
    }
    if worst_grad > 1e-6 {
        return Err(format!("envelope gradient off by {worst_grad:e} relative"));
    }
    within(start.elapsed(), 10.0)?;
    Ok(format!("closed form {closed:.1e}, gradient {worst_grad:.1e}"))
}

fn prox_nonexpansive() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = f64::NEG_INFINITY;
    for (name, f) in families() {
        for i in 0..1000 {
            let eps = EPS_LIST[i % 4];
            let (a, b) = (tensor(&mut rng, 3.0), tensor(&mut rng, 3.0));
            let pa = f.prox(&a, eps).unwrap().minimizer;
            let pb = f.prox(&b, eps).unwrap().minimizer;
            let excess = sub(&pa, &pb).norm() - sub(&a, &b).norm();
            if excess > 1e-12 {
                return Err(format!("{name}: expands by {excess:e}"));
            }
            worst = worst.max(excess);
        }
    }
    Ok(format!("largest |prox a - prox b| - |a - b| = {worst:.2e}"))
}

fn pressure_potential_ode() -> Outcome {
    let rho: Vec<f64> = (0..40).map(|i| 0.2 + 0.1 * i as f64).collect();
    let p: Vec<f64> = rho.iter().map(|r| 0.8 * r + 0.3 * r * r).collect();
    let laws =
        [("isothermal", PressureLaw::isothermal(1.7).unwrap()), ("table", PressureLaw::tabulated(rho, p).unwrap())];
    let mut worst = 0.0f64;
    for (name, law) in laws {
        for i in 0..1000 {
            let r = 0.25 + 3.6 * i as f64 / 999.0;
            let h = 1e-5 * r;
            let dp = (law.pressure_potential(r + h).unwrap() - law.pressure_potential(r - h).unwrap()) / (2.0 * h);
            let p = law.pressure(r).unwrap();
            let resid = (dp * r - law.pressure_potential(r).unwrap() - p).abs() / p.max(1.0);
            if resid > 1e-6 {
                return Err(format!("{name} at {r}: residual {resid:e}"));
            }
            worst = worst.max(resid);
        }
    }
    Ok(format!("largest scaled residual {worst:.2e}"))
}

fn transport_fidelity() -> Outcome {
    let start = Instant::now();
    let g = PeriodicGrid::new(128).unwrap();
    let (dt, steps) = (1e-3, 100);
    let profile = |p: [f64; 2]| {
        1.0 + 0.2 * (2.0 * PI * p[0]).sin() * (2.0 * PI * p[1]).cos() + 0.1 * (4.0 * PI * (p[0] + p[1])).cos()
    };
    let u = [0.3, -0.2];
    let seg = VelocitySegment::frozen(0.0, 1.0, VectorField::from_fn(g, |_| u));
    let chars = CharacteristicConfig::for_grid(&g).with_speed(seg.max_speed(), dt);
    let mut rho = ScalarField::from_fn(g, profile);
    let mass0 = rho.integrate();
    for k in 0..steps {
        rho = transport_density(&rho, &seg, k as f64 * dt, dt, &chars).map_err(|e| e.to_string())?;
    }
    let t = steps as f64 * dt;
    let exact = ScalarField::from_fn(g, |p| profile([p[0] - u[0] * t, p[1] - u[1] * t]));
    let l1 = rho.l1_distance(&exact);
    let drift = (rho.integrate() / mass0 - 1.0).abs();

    // One node right and two down per step.
    let h = g.h();
    let shift = [1i64, -2];
    let v = [shift[0] as f64 * h / dt, shift[1] as f64 * h / dt];
    let seg = VelocitySegment::frozen(0.0, 1.0, VectorField::from_fn(g, |_| v));
    let chars = CharacteristicConfig::for_grid(&g).with_speed(seg.max_speed(), dt);
    let circle = MarkerCurve::circle([0.4, 0.6], 0.2, 256, 2.0 * PI * 0.2 / 256.0).unwrap();
    let chi0 = circle.rasterize(&g);
    let mut chi = chi0.clone();
    for k in 0..steps {
        chi = transport_indicator_grid(&chi, &seg, k as f64 * dt, dt, &chars).map_err(|e| e.to_string())?;
    }
    let n = g.n() as i64;
    let mismatched = (0..g.len())
        .filter(|&i| {
            let (ix, iy) = ((i / g.n()) as i64, (i % g.n()) as i64);
            let j = g.wrapped_index(ix - shift[0] * steps as i64 % n, iy - shift[1] * steps as i64 % n);
            chi.values()[i] != chi0.values()[j]
        })
        .count();
    if l1 > 1e-3 || drift > 1e-6 || mismatched > 0 {
        return Err(format!("L1 {l1:.2e}, mass drift {drift:.2e}, {mismatched} indicator nodes off"));
    }
    within(start.elapsed(), 30.0)?;
    Ok(format!("density L1 {l1:.2e}, mass drift {drift:.2e}, indicator exact"))
}

fn density_envelope() -> Outcome {
    let (mut s, _, base) = load("bingham");
    s.initial.velocity.x = vec![[1.0, 0.0, 0.15, 0.0]];
    let setup = rebuild(&s, &base);
    if setup.config.eps != 1e-3 {
        return Err(format!("eps is {}", setup.config.eps));
    }
    let bounds = setup.rho_bounds;
    let out = simulate(&s, setup);
    if let Some(e) = out.stop {
        return Err(e.to_string());
    }
    let dbar = declared_trace_bound(&out.trajectory).ok_or("no declared trace bound")?;
    let report = bounds_check(&out.trajectory, Some(dbar), bounds.0, bounds.1);
    let margin = report.divergence_margin.unwrap_or(f64::NAN);
    let max_div = 1.05 * dbar - margin;
    if !report.pass() {
        return Err(format!("{} violations, first {:?}", report.violations.len(), report.violations[0]));
    }
    Ok(format!("dbar {dbar}, max |div u| {max_div:.3}, density within the envelope at every node"))
}

fn interface_geometry() -> Outcome {
    let r: f64 = 0.25;
    let c = MarkerCurve::circle([0.5, 0.5], r, 512, 2.0 * PI * r / 512.0).unwrap();
    let exact = 2.0 * PI * r;
    let perimeter_err = (c.perimeter() / exact - 1.0).abs();
    let v = c.varifold();
    let identity = first_variation(&v, |_| [[1.0, 0.0], [0.0, 1.0]]);
    let identity_err = (identity / c.perimeter() - 1.0).abs();
    // phi(y) = |y|^2 y about the centre; minus the curvature integral is 2 pi r^3.
    let radial = first_variation(&v, |x| {
        let y = [x[0] - 0.5, x[1] - 0.5];
        let n2 = y[0] * y[0] + y[1] * y[1];
        let mut g = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                g[a][b] = 2.0 * y[a] * y[b] + if a == b { n2 } else { 0.0 };
            }
        }
        g
    });
    let radial_err = (radial / (2.0 * PI * r.powi(3)) - 1.0).abs();
    let phi = |x: [f64; 2]| [(2.0 * PI * x[0]).sin() + 0.3, (2.0 * PI * x[1]).cos() * x[0]];
    let compat = compatibility_residual(&v, &c, phi).abs();
    let line = format!(
        "perimeter {perimeter_err:.1e}, identity {identity_err:.1e}, curvature {radial_err:.1e}, compatibility {compat:.1e}"
    );
    if perimeter_err <= 1e-3 && identity_err <= 5e-3 && radial_err <= 1e-2 && compat <= 1e-10 {
        Ok(line)
    } else {
        Err(line)
    }
}

fn energy_inequality() -> Outcome {
    let start = Instant::now();
    let (s, setup, base) = load("shear");
    if s.grid.n != 128 || s.time.dt != 1e-3 || s.time.t_end != 0.2 || s.solver.kappa != 0.0 {
        return Err("shear scenario is not the n=128, dt=1e-3, t_end=0.2, kappa=0 run".into());
    }
    let mu = match s.phase1.potential {
        vflow::scenario::PotentialSpec::Quadratic { mu, .. } => mu,
        _ => return Err("shear scenario is not Newtonian".into()),
    };
    let positive = |out: &RunOutcome| out.diagnostics.iter().fold(0.0f64, |m, d| m.max(d.balance_residual));
    let coarse = simulate(&s, setup);
    let e0 = coarse.diagnostics[0].kinetic + coarse.diagnostics[0].internal;
    let mut half = s.clone();
    half.time.dt /= 2.0;
    half.output.snapshot_every *= 2;
    let fine = simulate(&half, rebuild(&half, &base));
    let (pc, pf) = (positive(&coarse), positive(&fine));
    let kin: Vec<f64> = coarse.diagnostics.iter().map(|d| d.kinetic).collect();
    let t = coarse.final_state.time;
    let rate = -(kin.last().unwrap() / kin[0]).ln() / t;
    let analytic = mu * (2.0 * PI).powi(2);
    let line = format!(
        "positive part {:.2e} E(0), ratio under dt/2 {:.2}, decay rate {rate:.4} vs {analytic:.4}",
        pc / e0,
        pc / pf
    );
    within(start.elapsed(), 60.0)?;
    if pc <= 1e-3 * e0 && pc / pf >= 1.5 && (rate / analytic - 1.0).abs() <= 0.1 {
        Ok(line)
    } else {
        Err(line)
    }
}

fn certification() -> Outcome {
    let start = Instant::now();
    let mut parts = Vec::new();
    let (shear, setup, _) = load("shear");
    let shear_run = simulate(&shear, setup).trajectory;
    let (bubble, _, base) = load("bubble");
    let mut flat = bubble.clone();
    flat.solver.kappa = 0.0;
    flat.initial.density = vflow::scenario::DensitySpec::Constant { value: 1.0 };
    let runs = [
        ("shear", shear.output.seed, shear_run.clone()),
        ("bubble kappa=0", flat.output.seed, simulate(&flat, rebuild(&flat, &base)).trajectory),
        ("bubble kappa=0.01", bubble.output.seed, simulate(&bubble, rebuild(&bubble, &base)).trajectory),
    ];
    for (name, seed, traj) in &runs {
        let report = certify_all(traj, 50, *seed).map_err(|e| e.to_string())?;
        if !report.verdict {
            return Err(format!("{name} fails: {:?}", report.failing_clauses()));
        }
        parts.push(format!("{name} pass"));
    }
    let t_end = shear_run.snapshots.last().unwrap().time;
    let kicked = scale_momentum_after(&shear_run, t_end / 2.0, 1.1);
    let report = certify_all(&kicked, 50, shear.output.seed).map_err(|e| e.to_string())?;
    if report.verdict || !report.failing_clauses().contains(&Clause::MomentumEnergy) {
        return Err(format!("kicked shear: verdict {}, failing {:?}", report.verdict, report.failing_clauses()));
    }
    parts.push(format!("kicked shear fails citing {:?}", report.failing_clauses()));
    within(start.elapsed(), 120.0)?;
    Ok(parts.join(", "))
}

fn refinement_orders() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut parts = Vec::new();
    let mut ok = true;
    // The shear study starts from a 32-point grid so its third level stays at 128.
    let (mut shear, _, _) = load("shear");
    shear.grid.n = 32;
    shear.solver.band = Some(8);
    shear.time.dt = 4e-3;
    let shear_path = dir.path().join("shear32.toml");
    fs::write(&shear_path, shear.emit()).unwrap();
    for (name, path) in [("translation", scenarios().join("translation.toml")), ("shear", shear_path)] {
        let report = cmd_convergence(&path, 3, Some(dir.path())).map_err(|e| e.to_string())?;
        let labels = ["transport", "mass", "energy"];
        let shown: Vec<String> = report
            .orders
            .iter()
            .zip(labels)
            .map(|(o, l)| match o {
                Some(v) => {
                    ok &= *v >= 1.0;
                    format!("{l} {v:.4}")
                }
                None => format!("{l} floor"),
            })
            .collect();
        parts.push(format!("{name}: {}", shown.join(" ")));
    }
    let line = parts.join("; ");
    if ok {
        Ok(line)
    } else {
        Err(line)
    }
}

fn determinism() -> Outcome {
    let mut names = Vec::new();
    for entry in fs::read_dir(scenarios()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            names.push(path);
        }
    }
    names.sort();
    for path in &names {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        for d in [&a, &b] {
            cmd_simulate(path, Some(d.path())).map_err(|e| e.to_string())?;
            cmd_certify(d.path(), 10, None).map_err(|e| e.to_string())?;
        }
        for f in ["manifest.toml", "report.txt", "report.csv"] {
            if fs::read(a.path().join(f)).unwrap() != fs::read(b.path().join(f)).unwrap() {
                return Err(format!("{} differs for {}", f, path.display()));
            }
        }
    }
    Ok(format!("{} scenarios, manifests and reports bit-identical", names.len()))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("Fenchel-Young", fenchel_young),
        ("Moreau envelope", moreau_envelope),
        ("prox nonexpansive", prox_nonexpansive),
        ("pressure potential ODE", pressure_potential_ode),
        ("transport fidelity", transport_fidelity),
        ("density envelope", density_envelope),
        ("interface geometry", interface_geometry),
        ("energy inequality", energy_inequality),
        ("certification", certification),
        ("refinement orders", refinement_orders),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} {name}: pass ({detail}; {secs:.1} s)", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({detail}; {secs:.1} s)", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
