//! Scenario files: TOML with fixed sections, validated on parse.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use vflow_core::dynamics::{Model, Region, SimState, StepConfig, DEFAULT_EPS, DEFAULT_HYPER_ORDER};
use vflow_core::fields::{PeriodicGrid, ScalarField, VectorField};
use vflow_core::interface::MarkerCurve;
use vflow_core::rheology::{DissipationPotential, MixturePotential, Phase};
use vflow_core::thermo::{MixturePressure, PressureLaw};

use crate::ParseError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub grid: GridSpec,
    pub time: TimeSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    pub phase1: PhaseSpec,
    /// Defaults to the first phase.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase2: Option<PhaseSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixture: Option<MixtureSpec>,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub bounds: BoundsSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub dt: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    /// Galerkin band; `n / 4` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band: Option<usize>,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_hyper_order")]
    pub hyper_order: u32,
    /// Hyperviscosity; scaled to the band when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default)]
    pub kappa: f64,
}

fn default_eps() -> f64 {
    DEFAULT_EPS
}

fn default_hyper_order() -> u32 {
    DEFAULT_HYPER_ORDER
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec { band: None, eps: DEFAULT_EPS, hyper_order: DEFAULT_HYPER_ORDER, delta: None, kappa: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSpec {
    pub potential: PotentialSpec,
    pub pressure: PressureSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    Quadratic {
        mu: f64,
        #[serde(default)]
        lambda: f64,
    },
    Power {
        mu: f64,
        alpha: f64,
        #[serde(default)]
        lambda: f64,
    },
    TraceBounded {
        dbar: f64,
        inner: Box<PotentialSpec>,
    },
    DevCap {
        radius: f64,
        inner: Box<PotentialSpec>,
    },
}

impl PotentialSpec {
    pub fn build(&self) -> vflow_core::Result<DissipationPotential> {
        match self {
            PotentialSpec::Quadratic { mu, lambda } => DissipationPotential::quadratic(*mu, *lambda),
            PotentialSpec::Power { mu, alpha, lambda } => {
                DissipationPotential::power_law_with_trace(*mu, *alpha, *lambda)
            }
            PotentialSpec::TraceBounded { dbar, inner } => DissipationPotential::trace_bounded(inner.build()?, *dbar),
            PotentialSpec::DevCap { radius, inner } => DissipationPotential::dev_cap(inner.build()?, *radius),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PressureSpec {
    Isothermal {
        a: f64,
    },
    /// Two-column CSV `rho, p`, relative to the scenario file.
    Table {
        file: String,
    },
}

impl PressureSpec {
    pub fn build(&self, base: &Path) -> Result<PressureLaw, String> {
        match self {
            PressureSpec::Isothermal { a } => PressureLaw::isothermal(*a).map_err(|e| e.to_string()),
            PressureSpec::Table { file } => {
                let path = base.join(file);
                let mut reader = csv::ReaderBuilder::new()
                    .has_headers(false)
                    .comment(Some(b'#'))
                    .trim(csv::Trim::All)
                    .from_path(&path)
                    .map_err(|e| format!("pressure table {}: {e}", path.display()))?;
                let (mut rho, mut p) = (Vec::new(), Vec::new());
                for (i, rec) in reader.records().enumerate() {
                    let rec = rec.map_err(|e| format!("pressure table {}: {e}", path.display()))?;
                    let parse = |j: usize| -> Result<f64, String> {
                        rec.get(j).and_then(|s| s.parse().ok()).ok_or_else(|| {
                            format!("pressure table {} row {}: expected two numbers", path.display(), i + 1)
                        })
                    };
                    rho.push(parse(0)?);
                    p.push(parse(1)?);
                }
                PressureLaw::tabulated(rho, p).map_err(|e| e.to_string())
            }
        }
    }

    fn absolute(&self, base: &Path) -> PressureSpec {
        match self {
            PressureSpec::Table { file } => {
                let path = base.join(file);
                let path = path.canonicalize().unwrap_or(path);
                PressureSpec::Table { file: path.to_string_lossy().into_owned() }
            }
            other => other.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSpec {
    pub comparability: f64,
}

/// A real Fourier mode `[kx, ky, a, b]` contributing
/// `a cos(2 pi k.x) + b sin(2 pi k.x)`.
pub type Mode = [f64; 4];

fn mode_sum(modes: &[Mode], p: [f64; 2]) -> f64 {
    modes
        .iter()
        .map(|m| {
            let arg = 2.0 * PI * (m[0] * p[0] + m[1] * p[1]);
            m[2] * arg.cos() + m[3] * arg.sin()
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensitySpec {
    Constant {
        value: f64,
    },
    Modes {
        mean: f64,
        #[serde(default)]
        modes: Vec<Mode>,
    },
    /// Constant in each phase, following the initial indicator.
    Phases {
        phase1: f64,
        phase2: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VelocitySpec {
    #[serde(default)]
    pub x: Vec<Mode>,
    #[serde(default)]
    pub y: Vec<Mode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InterfaceSpec {
    Circle {
        center: [f64; 2],
        radius: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        markers: Option<usize>,
    },
    Ellipse {
        center: [f64; 2],
        semi_axes: [f64; 2],
        #[serde(default)]
        angle: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        markers: Option<usize>,
    },
    Polygon {
        points: Vec<[f64; 2]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        spacing: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    #[serde(default = "default_density")]
    pub density: DensitySpec,
    #[serde(default)]
    pub velocity: VelocitySpec,
    /// Encloses phase one; without it the whole torus holds `phase`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interface: Option<InterfaceSpec>,
    #[serde(default = "default_phase")]
    pub phase: u8,
}

fn default_density() -> DensitySpec {
    DensitySpec::Constant { value: 1.0 }
}

fn default_phase() -> u8 {
    1
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec { density: default_density(), velocity: VelocitySpec::default(), interface: None, phase: 1 }
    }
}

/// Declared density bounds; the initial extrema when absent.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_hi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_dir")]
    pub dir: String,
    #[serde(default = "default_every")]
    pub snapshot_every: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_dir() -> String {
    "out".into()
}

fn default_every() -> usize {
    1
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { dir: default_dir(), snapshot_every: 1, seed: 0 }
    }
}

/// Everything a run needs, built from a validated scenario.
#[derive(Debug, Clone)]
pub struct Setup {
    pub model: Model,
    pub config: StepConfig,
    pub initial: SimState,
    pub rho_bounds: (f64, f64),
}

/// Line (1-based) of `key` in `[section]`, else of the section header, else 1.
fn line_of(text: &str, section: &str, key: &str) -> usize {
    let mut current = String::new();
    let mut header = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().trim_matches(['[', ']']).trim().to_string();
            if current == section && header.is_none() {
                header = Some(i + 1);
            }
            continue;
        }
        let in_section = current == section || current.starts_with(&format!("{section}."));
        if in_section && !key.is_empty() {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return i + 1;
                }
            }
        }
    }
    header.unwrap_or(1)
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

struct Checker<'a> {
    text: &'a str,
}

impl Checker<'_> {
    fn fail(&self, section: &str, key: &str, message: impl Into<String>) -> ParseError {
        ParseError { line: line_of(self.text, section, key), message: message.into() }
    }

    fn ensure(&self, ok: bool, section: &str, key: &str, message: impl FnOnce() -> String) -> Result<(), ParseError> {
        if ok {
            Ok(())
        } else {
            Err(self.fail(section, key, message()))
        }
    }
}

impl Scenario {
    pub fn phase2_spec(&self) -> &PhaseSpec {
        self.phase2.as_ref().unwrap_or(&self.phase1)
    }

    pub fn band(&self) -> usize {
        self.solver.band.unwrap_or(self.grid.n / 4)
    }

    /// Canonical text; `parse(emit(s)) == s`.
    pub fn emit(&self) -> String {
        toml::to_string(self).expect("scenarios serialize")
    }

    /// Copy with table pressure files made absolute against `base`.
    pub fn with_absolute_paths(&self, base: &Path) -> Scenario {
        let mut s = self.clone();
        s.phase1.pressure = s.phase1.pressure.absolute(base);
        if let Some(p) = &mut s.phase2 {
            p.pressure = p.pressure.absolute(base);
        }
        s
    }

    pub fn model(&self, base: &Path) -> Result<Model, String> {
        let f1 = self.phase1.potential.build().map_err(|e| e.to_string())?;
        let f2 = self.phase2_spec().potential.build().map_err(|e| e.to_string())?;
        let mut potentials = MixturePotential::new(f1, f2);
        if let Some(m) = &self.mixture {
            potentials = potentials.with_comparability(m.comparability).map_err(|e| e.to_string())?;
        }
        let p1 = self.phase1.pressure.build(base)?;
        let p2 = self.phase2_spec().pressure.build(base)?;
        Ok(Model { potentials, pressures: MixturePressure::new(p1, p2) })
    }

    pub fn step_config(&self) -> StepConfig {
        let band = self.band();
        let mut cfg = StepConfig::new(self.time.dt, band, self.time.t_end);
        cfg.eps = self.solver.eps;
        cfg.hyper_order = self.solver.hyper_order;
        cfg.delta = self.solver.delta.unwrap_or_else(|| StepConfig::default_delta(band, self.solver.hyper_order));
        cfg.kappa = self.solver.kappa;
        cfg
    }

    pub fn curve(&self, grid: &PeriodicGrid) -> vflow_core::Result<Option<MarkerCurve>> {
        let spacing = 0.5 * grid.h();
        let count =
            |perimeter: f64, markers: Option<usize>| markers.unwrap_or(((perimeter / spacing).ceil() as usize).max(16));
        Ok(match &self.initial.interface {
            None => None,
            Some(InterfaceSpec::Circle { center, radius, markers }) => {
                let m = count(2.0 * PI * radius, *markers);
                Some(MarkerCurve::circle(*center, *radius, m, 2.0 * PI * radius / m as f64)?)
            }
            Some(InterfaceSpec::Ellipse { center, semi_axes, angle, markers }) => {
                let [a, b] = *semi_axes;
                // Ramanujan's perimeter approximation sets the marker count.
                let perimeter = PI * (3.0 * (a + b) - ((3.0 * a + b) * (a + 3.0 * b)).sqrt());
                let m = count(perimeter, *markers);
                Some(MarkerCurve::ellipse(*center, a, b, *angle, m, perimeter / m as f64)?)
            }
            Some(InterfaceSpec::Polygon { points, spacing: s }) => {
                Some(MarkerCurve::polygon(points, s.unwrap_or(spacing))?)
            }
        })
    }

    pub fn initial_density(&self, grid: PeriodicGrid, chi: &ScalarField) -> ScalarField {
        match &self.initial.density {
            DensitySpec::Constant { value } => ScalarField::constant(grid, *value),
            DensitySpec::Modes { mean, modes } => ScalarField::from_fn(grid, |p| mean + mode_sum(modes, p)),
            DensitySpec::Phases { phase1, phase2 } => chi.map(|c| phase2 + (phase1 - phase2) * c),
        }
    }

    pub fn initial_velocity(&self, grid: PeriodicGrid) -> VectorField {
        let v = &self.initial.velocity;
        VectorField::from_fn(grid, |p| [mode_sum(&v.x, p), mode_sum(&v.y, p)])
    }

    /// Validates every parameter against `text` (for line numbers) and
    /// builds the run setup; pressure tables resolve against `base`.
    pub fn setup(&self, text: &str, base: &Path) -> Result<Setup, ParseError> {
        let c = Checker { text };
        let grid = PeriodicGrid::new(self.grid.n).map_err(|e| c.fail("grid", "n", e.to_string()))?;
        let t = &self.time;
        c.ensure(t.dt > 0.0 && t.dt.is_finite(), "time", "dt", || format!("dt must be positive, got {}", t.dt))?;
        c.ensure(t.t_end >= 0.0 && t.t_end.is_finite(), "time", "t_end", || {
            format!("t_end must be nonnegative, got {}", t.t_end)
        })?;
        let s = &self.solver;
        let band = self.band();
        c.ensure(band >= 1 && 3 * band <= self.grid.n, "solver", "band", || {
            format!("band must lie in [1, n/3] = [1, {}], got {band}", self.grid.n / 3)
        })?;
        c.ensure(s.eps > 0.0 && s.eps.is_finite(), "solver", "eps", || format!("eps must be positive, got {}", s.eps))?;
        if let Some(d) = s.delta {
            c.ensure(d >= 0.0 && d.is_finite(), "solver", "delta", || format!("delta must be nonnegative, got {d}"))?;
        }
        c.ensure(s.hyper_order >= 5, "solver", "hyper_order", || {
            format!("hyper_order must be at least 5, got {}", s.hyper_order)
        })?;
        c.ensure(s.kappa >= 0.0 && s.kappa.is_finite(), "solver", "kappa", || {
            format!("kappa must be nonnegative, got {}", s.kappa)
        })?;
        let phases: [(&str, &PhaseSpec); 2] = [("phase1", &self.phase1), ("phase2", self.phase2_spec())];
        for (name, p) in phases {
            let name = if name == "phase2" && self.phase2.is_none() { "phase1" } else { name };
            p.potential.build().map_err(|e| c.fail(name, "potential", format!("{name} potential: {e}")))?;
            p.pressure.build(base).map_err(|e| c.fail(name, "pressure", format!("{name} pressure: {e}")))?;
        }
        let model = self.model(base).map_err(|e| c.fail("mixture", "comparability", e))?;
        c.ensure(self.initial.phase == 1 || self.initial.phase == 2, "initial", "phase", || {
            format!("phase must be 1 or 2, got {}", self.initial.phase)
        })?;
        for (key, modes) in [
            (
                "density",
                match &self.initial.density {
                    DensitySpec::Modes { modes, .. } => modes.as_slice(),
                    DensitySpec::Constant { .. } | DensitySpec::Phases { .. } => &[],
                },
            ),
            ("velocity", &self.initial.velocity.x),
            ("velocity", &self.initial.velocity.y),
        ] {
            for m in modes {
                c.ensure(
                    m.iter().all(|v| v.is_finite()) && m[0].fract() == 0.0 && m[1].fract() == 0.0,
                    "initial",
                    key,
                    || format!("mode {m:?} needs integer wavenumbers and finite amplitudes"),
                )?;
            }
        }
        let curve = self.curve(&grid).map_err(|e| {
            let msg = match e {
                vflow_core::Error::SelfIntersection { .. } => "initial interface has a self-intersection".to_string(),
                other => format!("initial interface: {other}"),
            };
            c.fail("initial", "interface", msg)
        })?;
        let chi = match &curve {
            Some(c) => c.rasterize(&grid),
            None => ScalarField::constant(grid, if self.initial.phase == 1 { 1.0 } else { 0.0 }),
        };
        let rho = self.initial_density(grid, &chi);
        c.ensure(rho.min() > 0.0, "initial", "density", || {
            format!("initial density must be positive, min is {}", rho.min())
        })?;
        let lo = self.bounds.rho_lo.unwrap_or(rho.min());
        let hi = self.bounds.rho_hi.unwrap_or(rho.max());
        c.ensure(lo > 0.0 && lo <= hi, "bounds", "rho_lo", || format!("need 0 < rho_lo <= rho_hi, got {lo}, {hi}"))?;
        c.ensure(rho.min() >= lo && rho.max() <= hi, "initial", "density", || {
            format!("initial density range [{}, {}] leaves [{lo}, {hi}]", rho.min(), rho.max())
        })?;
        c.ensure(self.output.snapshot_every >= 1, "output", "snapshot_every", || {
            "snapshot_every must be at least 1".into()
        })?;
        let config = self.step_config();
        config.validate(&grid).map_err(|e| c.fail("solver", "", e.to_string()))?;
        let region = match curve {
            Some(curve) => Region::Curve(curve),
            None => Region::Uniform(if self.initial.phase == 1 { Phase::One } else { Phase::Two }),
        };
        let initial = SimState::new(&model, &config, rho, self.initial_velocity(grid), region)
            .map_err(|e| c.fail("initial", "", e.to_string()))?;
        Ok(Setup { model, config, initial, rho_bounds: (lo, hi) })
    }
}

/// Parses and fully validates a scenario; `base` resolves pressure tables.
pub fn parse_scenario_in(text: &str, base: &Path) -> Result<(Scenario, Setup), ParseError> {
    let scenario: Scenario = toml::from_str(text).map_err(|e| ParseError {
        line: e.span().map_or(1, |s| line_of_offset(text, s.start)),
        message: e.message().to_string(),
    })?;
    let setup = scenario.setup(text, base)?;
    Ok((scenario, setup))
}

/// [`parse_scenario_in`] relative to the working directory.
pub fn parse_scenario(text: &str) -> Result<Scenario, ParseError> {
    parse_scenario_in(text, Path::new(".")).map(|(s, _)| s)
}

pub fn load_scenario(path: &Path) -> Result<(Scenario, Setup, PathBuf), crate::CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| crate::CliError::io(path, e))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let (s, setup) = parse_scenario_in(&text, &base)?;
    Ok((s, setup, base))
}
