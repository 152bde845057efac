//! The `cdt` command line: JSON scenario configs in, CSV/JSON data and a run
//! manifest out, plus gnuplot scripts for the produced files.
//!
//! Physics parameters must be given explicitly; only numerical knobs (step
//! sizes, sampling) have defaults. All outputs are computed in memory and
//! written only after the run succeeds.

use std::f64::consts::PI;
use std::fs;
use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::effective::j0_roots;
use crate::error::{CdtError, Result};
use crate::floquet::{self, FloquetOptions, ModeSampling, DEFAULT_STEPS_PER_PERIOD};
use crate::integrator::evolve;
use crate::model::{DriveSpec, LatticeModel, Mask, StateVector};
use crate::protocols::{self, Direction};
use crate::waveguide::{self, Grid, PropagationOptions, WaveguideArray, DEFAULT_DX, DEFAULT_DZ};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Default integration step: this many steps per drive period.
const STEPS_PER_PERIOD: f64 = 2000.0;
/// Default integration step for undriven runs, in units of `1 / max coupling`.
const STATIC_STEP: f64 = 1e-3;

#[derive(Debug, Parser)]
#[command(name = "cdt", version, about = "Selective coherent destruction of tunneling: scenario runner")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario config and write its outputs.
    Run {
        config: PathBuf,
        /// Output directory (overrides the config's `output_path`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for scan points.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Write a gnuplot script next to an output file.
    Plot {
        csv: PathBuf,
        #[arg(long, value_enum)]
        kind: PlotKind,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    /// Populations or modal powers against time or distance.
    Trajectory,
    /// Quasienergies against the drive ratio.
    Scan,
    /// `|phi|^2` over `(x, z)` from a snapshot CSV or a binary raster.
    Heatmap,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Evolve,
    FloquetScan,
    Motor,
    Splitter,
    Waveguide,
    Extract,
}

impl ScenarioKind {
    fn key(self) -> &'static str {
        match self {
            ScenarioKind::Evolve => "evolve",
            ScenarioKind::FloquetScan => "floquet_scan",
            ScenarioKind::Motor => "motor",
            ScenarioKind::Splitter => "splitter",
            ScenarioKind::Waveguide => "waveguide",
            ScenarioKind::Extract => "extract",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub n_sites: usize,
    pub omega_coupling: f64,
    pub v_coupling: f64,
}

impl ModelConfig {
    fn build(&self) -> Result<LatticeModel> {
        LatticeModel::new(self.n_sites, self.omega_coupling, self.v_coupling)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveConfig {
    pub mask: Mask,
    pub amplitude: f64,
    pub frequency: f64,
    #[serde(default)]
    pub phase_origin: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveConfig {
    pub model: ModelConfig,
    pub drive: DriveConfig,
    /// One-based.
    pub initial_site: usize,
    pub t_end: f64,
    #[serde(default)]
    pub t_start: Option<f64>,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub sample_every: Option<usize>,
    #[serde(default)]
    pub write_amplitudes: Option<bool>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FloquetScanConfig {
    pub model: ModelConfig,
    pub mask: Mask,
    pub frequency: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub n_ratios: usize,
    /// Also write the Floquet modes at this ratio.
    #[serde(default)]
    pub modes_at: Option<f64>,
    #[serde(default)]
    pub steps_per_period: Option<usize>,
    #[serde(default)]
    pub sampling: Option<ModeSampling>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotorConfig {
    pub model: ModelConfig,
    pub amplitude: f64,
    pub frequency: f64,
    /// One-based.
    pub start_site: usize,
    pub direction: Direction,
    pub n_hops: usize,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub sample_every: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitterConfig {
    pub model: ModelConfig,
    pub amplitude: f64,
    pub frequency: f64,
    /// One-based.
    pub center_site: usize,
    pub n_stages: usize,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub sample_every: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayConfig {
    pub m_half: usize,
    pub spacing: f64,
    pub width: f64,
    pub contrast: f64,
    pub mod_depth: f64,
    pub mod_frequency: f64,
    /// Flags for guides `-M..=M`.
    pub mask: Mask,
}

impl ArrayConfig {
    fn build(&self) -> Result<WaveguideArray> {
        WaveguideArray::new(
            self.m_half,
            self.spacing,
            self.width,
            self.contrast,
            self.mod_depth,
            self.mod_frequency,
            self.mask.clone(),
        )
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveguideConfig {
    pub array: ArrayConfig,
    /// Guide index in `-M..=M`.
    pub input_guide: i64,
    pub z_max: f64,
    #[serde(default)]
    pub dx: Option<f64>,
    #[serde(default)]
    pub dz: Option<f64>,
    #[serde(default)]
    pub record_every: Option<usize>,
    #[serde(default)]
    pub snapshot_every: Option<usize>,
    #[serde(default)]
    pub raster: Option<bool>,
    #[serde(default)]
    pub sponge: Option<bool>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractConfig {
    pub array: ArrayConfig,
    #[serde(default)]
    pub dx: Option<f64>,
}

/// One parsed scenario: the kind block and where its outputs go.
#[derive(Clone, Debug)]
pub struct ScenarioConfig {
    pub output_path: Option<PathBuf>,
    pub scenario: Scenario,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Evolve(EvolveConfig),
    FloquetScan(FloquetScanConfig),
    Motor(MotorConfig),
    Splitter(SplitterConfig),
    Waveguide(WaveguideConfig),
    Extract(ExtractConfig),
}

impl Scenario {
    pub fn kind(&self) -> ScenarioKind {
        match self {
            Scenario::Evolve(_) => ScenarioKind::Evolve,
            Scenario::FloquetScan(_) => ScenarioKind::FloquetScan,
            Scenario::Motor(_) => ScenarioKind::Motor,
            Scenario::Splitter(_) => ScenarioKind::Splitter,
            Scenario::Waveguide(_) => ScenarioKind::Waveguide,
            Scenario::Extract(_) => ScenarioKind::Extract,
        }
    }
}

fn block<T: for<'de> Deserialize<'de>>(key: &str, v: Value) -> Result<T> {
    serde_json::from_value(v).map_err(|e| CdtError::config(key, e.to_string()))
}

impl ScenarioConfig {
    /// Parses a config: `{"kind": k, "<k>": {...}, "output_path": optional}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| CdtError::config("<root>", e.to_string()))?;
        let Value::Object(mut map) = value else {
            return Err(CdtError::config("<root>", "expected a JSON object"));
        };
        let kind: ScenarioKind = match map.remove("kind") {
            Some(k) => block("kind", k)?,
            None => return Err(CdtError::config("kind", "missing field `kind`")),
        };
        let output_path = match map.remove("output_path") {
            Some(Value::String(s)) => Some(PathBuf::from(s)),
            Some(_) => return Err(CdtError::config("output_path", "expected a string")),
            None => None,
        };
        let key = kind.key();
        let body = map
            .remove(key)
            .ok_or_else(|| CdtError::config(key, format!("missing `{key}` block for kind `{key}`")))?;
        if let Some(extra) = map.keys().next() {
            return Err(CdtError::config(extra, "unexpected key; exactly one kind block is allowed"));
        }
        let scenario = match kind {
            ScenarioKind::Evolve => Scenario::Evolve(block(key, body)?),
            ScenarioKind::FloquetScan => Scenario::FloquetScan(block(key, body)?),
            ScenarioKind::Motor => Scenario::Motor(block(key, body)?),
            ScenarioKind::Splitter => Scenario::Splitter(block(key, body)?),
            ScenarioKind::Waveguide => Scenario::Waveguide(block(key, body)?),
            ScenarioKind::Extract => Scenario::Extract(block(key, body)?),
        };
        Ok(ScenarioConfig { output_path, scenario })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// In-memory results of a run.
#[derive(Clone, Debug, Default)]
pub struct RunOutput {
    /// `(file name, contents)` in write order.
    pub files: Vec<(String, Vec<u8>)>,
    /// Defaults and derived values the run actually used.
    pub numerics: serde_json::Map<String, Value>,
    pub summary: Value,
}

impl RunOutput {
    fn file(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    fn numeric(&mut self, key: &str, v: impl Serialize) {
        self.numerics.insert(key.to_string(), json!(v));
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_slice())
    }
}

fn csv<F>(write: F) -> Result<Vec<u8>>
where
    F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
{
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

fn one_based(name: &str, site: usize, n: usize) -> Result<usize> {
    if site == 0 || site > n {
        return Err(CdtError::config(name, format!("site {site} outside 1..={n}")));
    }
    Ok(site - 1)
}

fn default_dt(model: &LatticeModel, frequency: f64) -> f64 {
    let scale = model.omega_coupling().abs().max(model.v_coupling().abs()).max(1e-12);
    let static_dt = STATIC_STEP / scale;
    if frequency > 0.0 {
        (2.0 * PI / frequency / STEPS_PER_PERIOD).min(static_dt)
    } else {
        static_dt
    }
}

fn run_evolve(c: &EvolveConfig, out: &mut RunOutput) -> Result<()> {
    let model = c.model.build()?;
    let drive = DriveSpec::new(c.drive.mask.clone(), c.drive.amplitude, c.drive.frequency)?
        .with_phase_origin(c.drive.phase_origin.unwrap_or(0.0));
    drive.check_model(&model)?;
    let psi0 = StateVector::localized(model.n_sites(), one_based("evolve.initial_site", c.initial_site, model.n_sites())?)?;
    let dt = c.dt.unwrap_or_else(|| default_dt(&model, c.drive.frequency));
    let every = c.sample_every.unwrap_or(10);
    let t0 = c.t_start.unwrap_or(0.0);
    out.numeric("dt", dt);
    out.numeric("sample_every", every);
    out.numeric("t_start", t0);
    let traj = evolve(&model, &drive, &psi0, t0, c.t_end, dt, every)?;
    out.file("populations.csv", csv(|w| traj.write_population_csv(w))?);
    if c.write_amplitudes.unwrap_or(false) {
        out.file("amplitudes.csv", csv(|w| traj.write_amplitude_csv(w))?);
    }
    let mins: Vec<f64> = (0..traj.n_sites()).map(|j| traj.site_series(j).into_iter().fold(1.0, f64::min)).collect();
    out.summary = json!({
        "norm_drift": traj.norm_drift(),
        "final_populations": traj.final_populations(),
        "min_populations": mins,
    });
    Ok(())
}

fn run_scan(c: &FloquetScanConfig, out: &mut RunOutput) -> Result<()> {
    let model = c.model.build()?;
    if c.mask.len() != model.n_sites() {
        return Err(CdtError::config("floquet_scan.mask", format!("length {} != n_sites {}", c.mask.len(), model.n_sites())));
    }
    if !(c.frequency.is_finite() && c.frequency > 0.0) {
        return Err(CdtError::config("floquet_scan.frequency", "must be positive"));
    }
    if !(c.ratio_max >= c.ratio_min) {
        return Err(CdtError::config("floquet_scan.ratio_max", "must be >= ratio_min"));
    }
    if c.n_ratios == 0 {
        return Err(CdtError::config("floquet_scan.n_ratios", "must be at least 1"));
    }
    let opts = FloquetOptions {
        steps_per_period: c.steps_per_period.unwrap_or(DEFAULT_STEPS_PER_PERIOD),
        sampling: c.sampling.unwrap_or_default(),
    };
    out.numeric("steps_per_period", opts.steps_per_period);
    out.numeric("sampling", opts.sampling);
    let ratios = floquet::ratio_grid(c.ratio_min, c.ratio_max, c.n_ratios);
    let scan = floquet::quasienergy_scan(&model, &c.mask, c.frequency, &ratios, &opts)?;
    out.file("quasienergies.csv", csv(|w| scan.write_csv(w))?);
    let mut summary = json!({ "rows": scan.rows.len() });
    if let Some(r) = c.modes_at {
        let drive = DriveSpec::new(c.mask.clone(), r * c.frequency, c.frequency)?;
        let res = floquet::analyze(&model, &drive, &opts)?;
        out.file("modes.csv", csv(|w| floquet::write_mode_csv(&res, w))?);
        summary["modes_quasienergies"] = json!(res.quasienergies);
        summary["degenerate"] = json!(res.degenerate);
    }
    out.summary = summary;
    Ok(())
}

fn run_motor(c: &MotorConfig, out: &mut RunOutput) -> Result<()> {
    let model = c.model.build()?;
    let start = one_based("motor.start_site", c.start_site, model.n_sites())?;
    let schedule =
        protocols::motor_schedule(model.n_sites(), start, c.direction, c.n_hops, model.omega_coupling(), c.amplitude, c.frequency)?;
    let dt = c.dt.unwrap_or_else(|| default_dt(&model, c.frequency));
    let every = c.sample_every.unwrap_or(10);
    out.numeric("dt", dt);
    out.numeric("sample_every", every);
    let end = match c.direction {
        Direction::Right => start + c.n_hops,
        Direction::Left => start - c.n_hops,
    };
    let report = protocols::run_protocol(&model, &schedule, &StateVector::localized(model.n_sites(), start)?, &[end], dt, every)?;
    let traj = &report.trajectory;
    out.file("populations.csv", csv(|w| traj.write_population_csv(w))?);
    out.summary = json!({
        "target_site": end + 1,
        "report": report.summary(),
        "hop_fidelities": protocols::hop_fidelities(traj, &schedule, c.direction),
        "segment_leakage": protocols::segment_leakage(traj, &schedule),
        "segment_peak_excursion": protocols::segment_peak_excursion(traj, &schedule),
    });
    out.file("report.json", serde_json::to_vec_pretty(&out.summary)?);
    Ok(())
}

fn run_splitter(c: &SplitterConfig, out: &mut RunOutput) -> Result<()> {
    let model = c.model.build()?;
    let center = one_based("splitter.center_site", c.center_site, model.n_sites())?;
    let schedule = protocols::splitter_schedule(
        model.n_sites(),
        center,
        model.omega_coupling(),
        model.v_coupling(),
        c.amplitude,
        c.frequency,
        c.n_stages,
    )?;
    let dt = c.dt.unwrap_or_else(|| default_dt(&model, c.frequency));
    let every = c.sample_every.unwrap_or(10);
    out.numeric("dt", dt);
    out.numeric("sample_every", every);
    let edges = [center - c.n_stages - 1, center + c.n_stages + 1];
    let report = protocols::run_protocol(&model, &schedule, &StateVector::localized(model.n_sites(), center)?, &edges, dt, every)?;
    let traj = &report.trajectory;
    let stage0 = schedule.segments()[0].end;
    let center_after = traj.sample_at(stage0).map(|k| traj.populations()[k][center]);
    out.file("populations.csv", csv(|w| traj.write_population_csv(w))?);
    out.summary = json!({
        "edge_sites": [edges[0] + 1, edges[1] + 1],
        "edge_populations": [traj.final_populations()[edges[0]], traj.final_populations()[edges[1]]],
        "center_after_stage0": center_after,
        "report": report.summary(),
    });
    out.file("report.json", serde_json::to_vec_pretty(&out.summary)?);
    Ok(())
}

fn run_waveguide(c: &WaveguideConfig, out: &mut RunOutput) -> Result<()> {
    let array = c.array.build()?;
    let k = array.position(c.input_guide).map_err(|e| CdtError::config("waveguide.input_guide", e.to_string()))?;
    let dx = c.dx.unwrap_or(DEFAULT_DX);
    let dz = c.dz.unwrap_or(DEFAULT_DZ);
    let grid = Grid::with_steps(&array, c.z_max, dx, dz)?;
    let opts = PropagationOptions {
        record_every: c.record_every.unwrap_or(10),
        snapshot_every: c.snapshot_every,
        sponge: c.sponge.unwrap_or(false),
    };
    out.numeric("grid", &grid);
    out.numeric("options", &opts);
    let input = waveguide::wannier_mode_on(&array, k, &grid)?;
    let prop = waveguide::propagate(&array, &input.to_field(), &grid, &opts)?;
    out.file("modal.csv", csv(|w| prop.write_modal_csv(w))?);
    if opts.snapshot_every.is_some() {
        if c.raster.unwrap_or(false) {
            let mut raw = Vec::new();
            let header = prop.write_raster(&mut raw)?;
            out.file("field.bin", raw);
            out.file("field.json", serde_json::to_vec_pretty(&header)?);
        } else {
            out.file("field.csv", csv(|w| prop.write_snapshot_csv(w))?);
        }
    }
    let mins: Vec<f64> = (0..array.n_guides()).map(|g| prop.guide_series(g).into_iter().fold(1.0, f64::min)).collect();
    let maxs: Vec<f64> = (0..array.n_guides()).map(|g| prop.guide_series(g).into_iter().fold(0.0, f64::max)).collect();
    out.summary = json!({
        "guides": array.guides(),
        "min_modal_power": mins,
        "max_modal_power": maxs,
        "norm_drift": prop.norm_drift,
        "beta0": input.beta0,
    });
    Ok(())
}

fn run_extract(c: &ExtractConfig, out: &mut RunOutput) -> Result<()> {
    let array = c.array.build()?;
    let dx = c.dx.unwrap_or(DEFAULT_DX);
    out.numeric("dx", dx);
    let couplings = waveguide::extract_couplings_with(&array, dx)?;
    let mode = waveguide::wannier_mode(&array, array.guides()[0])?;
    let a_eff = waveguide::effective_drive_amplitude(&array)?;
    let ratio = if array.mod_frequency() > 0.0 { Some(a_eff / array.mod_frequency()) } else { None };
    out.summary = json!({
        "omega_ext": couplings.omega,
        "v_ext": couplings.v,
        "beta0": mode.beta0,
        "beat_length": PI / (2.0 * couplings.omega),
        "a_eff": a_eff,
        "a_eff_over_omega": ratio,
    });
    out.file("couplings.json", serde_json::to_vec_pretty(&out.summary)?);
    Ok(())
}

/// Runs a scenario entirely in memory.
pub fn execute(config: &ScenarioConfig) -> Result<RunOutput> {
    let mut out = RunOutput::default();
    match &config.scenario {
        Scenario::Evolve(c) => run_evolve(c, &mut out)?,
        Scenario::FloquetScan(c) => run_scan(c, &mut out)?,
        Scenario::Motor(c) => run_motor(c, &mut out)?,
        Scenario::Splitter(c) => run_splitter(c, &mut out)?,
        Scenario::Waveguide(c) => run_waveguide(c, &mut out)?,
        Scenario::Extract(c) => run_extract(c, &mut out)?,
    }
    Ok(out)
}

/// Runs a config and writes its outputs plus `manifest.json` into `out_dir`.
/// Nothing is written if the run fails.
pub fn run(config_path: &Path, out_dir: Option<&Path>, jobs: Option<usize>) -> Result<PathBuf> {
    let config = ScenarioConfig::from_file(config_path)?;
    let dir = out_dir
        .map(Path::to_path_buf)
        .or_else(|| config.output_path.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let started = Instant::now();
    let output = match jobs {
        Some(0) => return Err(CdtError::invalid("jobs", "must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CdtError::invalid("jobs", e.to_string()))?
            .install(|| execute(&config))?,
        None => execute(&config)?,
    };
    let wall = started.elapsed().as_secs_f64();

    let manifest = json!({
        "tool": "cdt",
        "version": env!("CARGO_PKG_VERSION"),
        "config_file": config_path.display().to_string(),
        "kind": config.scenario.kind(),
        "parameters": config.scenario,
        "numerics": output.numerics,
        "jobs": jobs,
        "outputs": output.files.iter().map(|(n, _)| n).collect::<Vec<_>>(),
        "summary": output.summary,
        "wall_time_s": wall,
    });
    fs::create_dir_all(&dir)?;
    for (name, bytes) in &output.files {
        fs::write(dir.join(name), bytes)?;
    }
    fs::write(dir.join("manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(dir)
}

fn header_columns(path: &Path) -> Result<Vec<String>> {
    let file = fs::File::open(path)?;
    let mut line = String::new();
    std::io::BufReader::new(file).read_line(&mut line)?;
    let cols: Vec<String> = line.trim_end().split(',').map(str::to_string).collect();
    if cols.len() < 2 {
        return Err(CdtError::invalid("csv", format!("{} has no data columns", path.display())));
    }
    Ok(cols)
}

/// Scripts sit next to their data, so they refer to it by file name.
fn quoted(path: &Path) -> String {
    let name = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
    format!("'{}'", name.replace('\'', "''"))
}

/// Builds a gnuplot script for `data`.
pub fn plot_script(data: &Path, kind: PlotKind) -> Result<String> {
    let file = quoted(data);
    let mut s = String::from("set datafile separator ','\nset key outside right\n");
    match kind {
        PlotKind::Trajectory => {
            let cols = header_columns(data)?;
            s += &format!("set xlabel '{}'\nset ylabel 'population'\nset yrange [0:1.05]\n", cols[0]);
            let series: Vec<String> = cols
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, name)| format!("{file} using 1:{} skip 1 with lines title '{name}'", i + 1))
                .collect();
            s += &format!("plot {}\n", series.join(", \\\n     "));
        }
        PlotKind::Scan => {
            let cols = header_columns(data)?;
            let root = j0_roots(1)[0];
            s += "set xlabel 'A/omega'\nset ylabel 'quasienergy'\n";
            s += &format!("set arrow from {root}, graph 0 to {root}, graph 1 nohead dashtype 2\n");
            let series: Vec<String> = (2..=cols.len())
                .map(|i| format!("{file} using 1:{i} skip 1 with points pointtype 7 pointsize 0.3 title '{}'", cols[i - 1]))
                .collect();
            s += &format!("plot {}\n", series.join(", \\\n     "));
        }
        PlotKind::Heatmap => {
            s += "set xlabel 'x'\nset ylabel 'z'\nset view map\nunset key\n";
            if data.extension().is_some_and(|e| e == "bin") {
                let sidecar = data.with_extension("json");
                let header: waveguide::RasterHeader = serde_json::from_str(&fs::read_to_string(&sidecar)?)?;
                let dx = (header.x_max - header.x_min) / (header.nx.max(2) - 1) as f64;
                let dz = header.z_max / (header.nz.max(2) - 1) as f64;
                s = String::from("set xlabel 'x'\nset ylabel 'z'\nunset key\n");
                s += &format!(
                    "plot {file} binary array=({},{}) format='%float64' dx={dx} dy={dz} origin=({},0) with image\n",
                    header.nx, header.nz, header.x_min
                );
            } else {
                header_columns(data)?;
                s += &format!("plot {file} using 2:1:3 skip 1 with image\n");
            }
        }
    }
    Ok(s)
}

/// Writes the script to `data` with a `.gp` extension.
pub fn plot(data: &Path, kind: PlotKind) -> Result<PathBuf> {
    if !data.exists() {
        return Err(CdtError::invalid("csv", format!("{} does not exist", data.display())));
    }
    let script = plot_script(data, kind)?;
    let target = data.with_extension("gp");
    fs::write(&target, script)?;
    Ok(target)
}

pub fn exit_code(err: &CdtError) -> i32 {
    match err {
        e if e.is_numerical() => EXIT_NUMERICAL,
        CdtError::Io(e) if e.kind() != std::io::ErrorKind::NotFound => EXIT_IO,
        _ => EXIT_VALIDATION,
    }
}

/// Entry point of the `cdt` binary; returns the process exit code.
pub fn main_with(cli: Cli) -> i32 {
    let result = match &cli.command {
        Command::Run { config, out, jobs } => run(config, out.as_deref(), *jobs).map(|dir| {
            println!("wrote {}", dir.display());
        }),
        Command::Plot { csv, kind } => plot(csv, *kind).map(|p| println!("wrote {}", p.display())),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_frequency_names_key() {
        let text = r#"{"kind":"evolve","evolve":{"model":{"n_sites":3,"omega_coupling":1,"v_coupling":0.2},
            "drive":{"mask":[1,0,0],"amplitude":24.05},"initial_site":1,"t_end":1}}"#;
        let err = ScenarioConfig::from_json(text).unwrap_err();
        assert!(err.to_string().contains("frequency"), "{err}");
        assert_eq!(exit_code(&err), EXIT_VALIDATION);
    }

    #[test]
    fn exactly_one_block() {
        let text = r#"{"kind":"extract","extract":{"array":{"m_half":1,"spacing":3.2,"width":0.3,"contrast":2.78,
            "mod_depth":0,"mod_frequency":0,"mask":[0,0,0]}},"motor":{}}"#;
        assert!(matches!(ScenarioConfig::from_json(text), Err(CdtError::Config { key, .. }) if key == "motor"));
        assert!(ScenarioConfig::from_json(r#"{"evolve":{}}"#).is_err());
        assert!(ScenarioConfig::from_json(r#"{"kind":"motor"}"#).is_err());
        assert!(ScenarioConfig::from_json(r#"{"kind":"teleport","teleport":{}}"#).is_err());
    }

    #[test]
    fn unknown_field_rejected() {
        let text = r#"{"kind":"evolve","evolve":{"model":{"n_sites":3,"omega_coupling":1,"v_coupling":0.2,"gamma":1},
            "drive":{"mask":[1,0,0],"amplitude":24.05,"frequency":10},"initial_site":1,"t_end":1}}"#;
        assert!(ScenarioConfig::from_json(text).unwrap_err().to_string().contains("gamma"));
    }

    #[test]
    fn evolve_in_memory() {
        let text = r#"{"kind":"evolve","evolve":{"model":{"n_sites":3,"omega_coupling":1,"v_coupling":0.2},
            "drive":{"mask":[1,0,0],"amplitude":24.05,"frequency":10},"initial_site":4,"t_end":1}}"#;
        let cfg = ScenarioConfig::from_json(text).unwrap();
        assert_eq!(exit_code(&execute(&cfg).unwrap_err()), EXIT_VALIDATION);
        let ok = ScenarioConfig::from_json(&text.replace("\"initial_site\":4", "\"initial_site\":1")).unwrap();
        let out = execute(&ok).unwrap();
        let body = std::str::from_utf8(out.get("populations.csv").unwrap()).unwrap();
        assert!(body.starts_with("t,P_1,P_2,P_3\n0,1,0,0\n"));
        assert!(out.numerics.contains_key("dt"));
    }

    #[test]
    fn guard_failures_map_to_three() {
        assert_eq!(exit_code(&CdtError::NormDrift { drift: 1.0, limit: 1e-6 }), EXIT_NUMERICAL);
        assert_eq!(exit_code(&CdtError::StepTooCoarse { dt: 1.0, limit: 0.1 }), EXIT_VALIDATION);
    }
}
