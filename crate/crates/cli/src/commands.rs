//! The four commands, callable as library functions.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use vflow_core::certify::{certify_all, max_scalar_residuals, ResidualReport};
use vflow_core::dynamics::{run, RunOptions};
use vflow_core::rheology::{DissipationPotential, SymTensor2};
use vflow_core::Error;

use crate::scenario::{load_scenario, parse_scenario_in, InterfaceSpec, PotentialSpec, Scenario};
use crate::series::{load_series, write_atomic, write_series, Manifest};
use crate::{CliError, ParseError, EXIT_CERTIFY_FAIL, EXIT_NUMERIC, EXIT_OK, EXIT_TOPOLOGY};

#[derive(Debug, Clone)]
pub struct SimulateOutcome {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
    pub stop: Option<Error>,
}

impl SimulateOutcome {
    pub fn exit_code(&self) -> i32 {
        match &self.stop {
            None => EXIT_OK,
            Some(Error::SelfIntersection { .. }) => EXIT_TOPOLOGY,
            Some(_) => EXIT_NUMERIC,
        }
    }
}

/// Runs a scenario and writes its series to `out`, or to the scenario's
/// output directory (relative to the working directory).
pub fn cmd_simulate(scenario_path: &Path, out: Option<&Path>) -> Result<SimulateOutcome, CliError> {
    let (scenario, setup, base) = load_scenario(scenario_path)?;
    let out_dir = out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(&scenario.output.dir));
    let opts = RunOptions { snapshot_every: scenario.output.snapshot_every, rho_bounds: Some(setup.rho_bounds) };
    let outcome = run(&setup.model, &setup.config, setup.initial, opts);
    let manifest = write_series(&out_dir, &scenario.with_absolute_paths(&base), &outcome)?;
    Ok(SimulateOutcome { out_dir, manifest, stop: outcome.stop })
}

#[derive(Debug, Clone)]
pub struct CertifyOutcome {
    pub report: ResidualReport,
    pub text_path: PathBuf,
    pub csv_path: PathBuf,
}

impl CertifyOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.report.verdict {
            EXIT_OK
        } else {
            EXIT_CERTIFY_FAIL
        }
    }
}

/// Certifies a stored series; `seed` defaults to the scenario's. Reports go
/// next to the manifest.
pub fn cmd_certify(manifest: &Path, n_tests: usize, seed: Option<u64>) -> Result<CertifyOutcome, CliError> {
    let series = load_series(manifest)?;
    let seed = seed.unwrap_or(series.scenario.output.seed);
    let report = certify_all(&series.trajectory, n_tests, seed)?;
    let text_path = series.dir.join("report.txt");
    let csv_path = series.dir.join("report.csv");
    write_atomic(&text_path, report.to_text().as_bytes())?;
    write_atomic(&csv_path, report.to_csv().as_bytes())?;
    Ok(CertifyOutcome { report, text_path, csv_path })
}

/// Scalar tests per level of a convergence study.
pub const CONVERGENCE_TESTS: usize = 8;
/// Residuals at or below this are roundoff and excluded from order fits.
pub const RESIDUAL_FLOOR: f64 = 1e-10;

/// The scenario with grid, band, marker count and time step refined by `2^level`.
/// Snapshots stay every `snapshot_every` steps, so their spacing shrinks too.
pub fn refine(s: &Scenario, level: u32) -> Scenario {
    let f = 1usize << level;
    let mut r = s.clone();
    r.grid.n *= f;
    r.time.dt /= f as f64;
    r.solver.band = s.solver.band.map(|b| b * f);
    r.initial.interface = s.initial.interface.clone().map(|i| match i {
        InterfaceSpec::Circle { center, radius, markers } => {
            InterfaceSpec::Circle { center, radius, markers: markers.map(|m| m * f) }
        }
        InterfaceSpec::Ellipse { center, semi_axes, angle, markers } => {
            InterfaceSpec::Ellipse { center, semi_axes, angle, markers: markers.map(|m| m * f) }
        }
        InterfaceSpec::Polygon { points, spacing } => {
            InterfaceSpec::Polygon { points, spacing: spacing.map(|h| h / f as f64) }
        }
    });
    r
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelRow {
    pub level: u32,
    pub n: usize,
    pub h: f64,
    pub dt: f64,
    pub transport: f64,
    pub mass: f64,
    /// Largest positive part of the energy balance residual.
    pub energy_positive: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub rows: Vec<LevelRow>,
    /// Fitted orders for transport, mass and energy; `None` when the
    /// residual sits at the floor on all but at most one level.
    pub orders: [Option<f64>; 3],
    pub csv_path: PathBuf,
}

impl ConvergenceReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("level,n,h,dt,transport,mass,energy_positive\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{:e},{:e},{:e},{:e},{:e}",
                r.level, r.n, r.h, r.dt, r.transport, r.mass, r.energy_positive
            );
        }
        let o = |v: Option<f64>| v.map_or("floor".to_string(), |v| format!("{v:.4}"));
        let _ = writeln!(s, "order,,,,{},{},{}", o(self.orders[0]), o(self.orders[1]), o(self.orders[2]));
        s
    }
}

/// Least-squares slope of `log r` against `log h` over values above the floor.
pub fn fitted_order(h: &[f64], r: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        h.iter().zip(r).filter(|p| *p.1 > RESIDUAL_FLOOR).map(|(h, r)| (h.ln(), r.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (sx / m, sy / m);
    let (num, den) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + (p.0 - mx) * (p.1 - my), a.1 + (p.0 - mx).powi(2)));
    Some(num / den)
}

/// Runs the scenario at `levels` successive refinements and fits orders of
/// the transport and mass residuals and the energy excess in `h`. The CSV
/// goes to `out`, default the scenario's output directory.
pub fn cmd_convergence(scenario_path: &Path, levels: u32, out: Option<&Path>) -> Result<ConvergenceReport, CliError> {
    if levels == 0 {
        return Err(CliError::Usage("convergence needs at least one level".into()));
    }
    let (scenario, _, base) = load_scenario(scenario_path)?;
    let cutoff = (scenario.band() / 2).max(1);
    let mut rows = Vec::new();
    for level in 0..levels {
        let s = refine(&scenario, level);
        let text = s.emit();
        let setup = s.setup(&text, &base)?;
        let opts = RunOptions { snapshot_every: s.output.snapshot_every, rho_bounds: Some(setup.rho_bounds) };
        let outcome = run(&setup.model, &setup.config, setup.initial, opts);
        if let Some(e) = outcome.stop {
            return Err(e.into());
        }
        let (transport, mass) = max_scalar_residuals(&outcome.trajectory, CONVERGENCE_TESTS, s.output.seed, cutoff)?;
        let energy_positive = outcome.diagnostics.iter().fold(0.0f64, |m, d| m.max(d.balance_residual));
        rows.push(LevelRow {
            level,
            n: s.grid.n,
            h: 1.0 / s.grid.n as f64,
            dt: s.time.dt,
            transport,
            mass,
            energy_positive,
        });
    }
    let h: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let col = |f: fn(&LevelRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    let orders = [
        fitted_order(&h, &col(|r| r.transport)),
        fitted_order(&h, &col(|r| r.mass)),
        fitted_order(&h, &col(|r| r.energy_positive)),
    ];
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(&scenario.output.dir));
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let csv_path = dir.join("convergence.csv");
    let report = ConvergenceReport { rows, orders, csv_path };
    write_atomic(&report.csv_path, report.to_csv().as_bytes())?;
    Ok(report)
}

/// Default regularization parameters of the prox table.
pub const DEFAULT_EPS_LIST: [f64; 4] = [1.0, 0.1, 0.01, 1e-3];

/// A potential from a scenario file (its phase `phase`) or from inline TOML
/// such as `{ kind = "quadratic", mu = 1.0 }`.
pub fn resolve_potential(source: &str, phase: u8) -> Result<PotentialSpec, CliError> {
    let path = Path::new(source);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let (s, _) = parse_scenario_in(&text, base)?;
        return Ok(match phase {
            2 => s.phase2_spec().potential.clone(),
            _ => s.phase1.potential.clone(),
        });
    }
    #[derive(serde::Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Wrapper {
        potential: PotentialSpec,
    }
    let direct = toml::from_str::<PotentialSpec>(source);
    let spec = match direct {
        Ok(p) => p,
        Err(_) => {
            toml::from_str::<Wrapper>(&format!("potential = {source}"))
                .map_err(|e| ParseError { line: 1, message: e.message().to_string() })?
                .potential
        }
    };
    spec.build().map_err(|e| ParseError { line: 1, message: e.to_string() })?;
    Ok(spec)
}

/// Sample directions: isotropic, normal deviatoric and shear, each of unit norm.
const DIRECTIONS: [SymTensor2; 3] = [
    SymTensor2::new(std::f64::consts::FRAC_1_SQRT_2, 0.0, std::f64::consts::FRAC_1_SQRT_2),
    SymTensor2::new(std::f64::consts::FRAC_1_SQRT_2, 0.0, -std::f64::consts::FRAC_1_SQRT_2),
    SymTensor2::new(0.0, std::f64::consts::FRAC_1_SQRT_2, 0.0),
];

fn num(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else {
        format!("{v:e}")
    }
}

/// CSV of `F`, the envelope `F^eps` and the regularized stress norm at
/// `samples + 1` magnitudes in `[0, max]` along three directions.
pub fn cmd_prox_table(
    potential: &DissipationPotential,
    eps: &[f64],
    samples: usize,
    max: f64,
) -> Result<String, CliError> {
    if eps.is_empty() || samples == 0 || !(max.is_finite() && max > 0.0) {
        return Err(CliError::Usage("prox-table needs eps values, samples >= 1 and max > 0".into()));
    }
    let mut s = String::from("d_xx,d_xy,d_yy,eps,F,F_eps,stress_norm\n");
    for dir in DIRECTIONS {
        for k in 0..=samples {
            let d = dir.scale(max * k as f64 / samples as f64);
            let f = potential.eval(&d);
            for &e in eps {
                let p = potential.prox(&d, e)?;
                let _ = writeln!(
                    s,
                    "{:e},{:e},{:e},{:e},{},{:e},{:e}",
                    d.xx,
                    d.xy,
                    d.yy,
                    e,
                    num(f),
                    p.envelope_value,
                    p.stress.norm()
                );
            }
        }
    }
    Ok(s)
}
