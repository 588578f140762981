//! Flat `section.key = value` configuration.
//!
//! Lines are `key = value`; `#` starts a comment. Every key must be known,
//! may appear once, and is echoed back with the value actually used, so
//! defaults are never silent. Tabulated drive profiles point to a two-column
//! CSV file (s, value) resolved relative to the config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use qpo_core::noise::BbMode;
use qpo_core::{BbRegularization, DriveSpec, InitialState, MomentOptions, PhysicalParams, Profile, Simulation, TimeGrid};

use crate::error::CliError;

/// Keys that may appear outside the drive sections.
const KEYS: &[&str] = &[
    "system.mass",
    "system.omega0",
    "units.hbar",
    "units.kb",
    "bath.gamma",
    "bath.cutoff",
    "bath.beta",
    "radiation.enabled",
    "radiation.tau",
    "radiation.cutoff",
    "radiation.beta",
    "initial.kind",
    "initial.mean_q",
    "initial.mean_p",
    "initial.sqq",
    "initial.spp",
    "grid.t_max",
    "grid.n_steps",
    "grid.snapshots",
    "numerics.matsubara_tol",
    "numerics.matsubara_terms",
    "numerics.bb_window",
    "numerics.bb_mode",
    "numerics.printed_qq",
    "numerics.printed_sign",
    "output.dir",
    "output.prefix",
    "output.density",
    "output.density_points",
    "output.density_extent",
    "output.fundamentals",
];

const DRIVES: &[&str] = &["drive.parametric", "drive.laser"];
const PROFILE_KEYS: &[&str] = &["kind", "amplitude", "frequency", "phase", "center", "width", "carrier", "file"];

fn known(key: &str) -> bool {
    if KEYS.contains(&key) {
        return true;
    }
    DRIVES.iter().any(|d| key.strip_prefix(d).and_then(|r| r.strip_prefix('.')).is_some_and(|r| PROFILE_KEYS.contains(&r)))
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

/// One key as it entered the run.
#[derive(Debug, Clone, PartialEq)]
pub struct EchoEntry {
    pub key: String,
    pub value: String,
    /// `None` when the default was taken.
    pub line: Option<usize>,
}

/// Typed access to the parsed entries that records every lookup.
pub struct Reader {
    entries: BTreeMap<String, Entry>,
    echo: BTreeMap<String, EchoEntry>,
}

impl Reader {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((k, v)) = body.split_once('=') else {
                return Err(CliError::Config(format!("line {line}: expected `key = value`, got `{body}`")));
            };
            let (k, v) = (k.trim(), v.trim());
            if !known(k) {
                return Err(CliError::Config(format!("line {line}: unknown key `{k}`")));
            }
            if v.is_empty() {
                return Err(CliError::Config(format!("line {line}: key `{k}` has no value")));
            }
            if let Some(prev) = entries.get(k) {
                return Err(CliError::Config(format!("line {line}: duplicate key `{k}` (first set on line {})", prev.line)));
            }
            entries.insert(k.to_string(), Entry { value: v.to_string(), line });
        }
        Ok(Reader { entries, echo: BTreeMap::new() })
    }

    fn record(&mut self, key: &str, value: String, line: Option<usize>) {
        self.echo.insert(key.to_string(), EchoEntry { key: key.to_string(), value, line });
    }

    fn typed<T: std::str::FromStr>(&mut self, key: &str, default: Option<T>, show: impl Fn(&T) -> String) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key).cloned() {
            Some(e) => {
                let v = e.value.parse::<T>().map_err(|err| CliError::Config(format!("line {}: key `{key}`: {err} (`{}`)", e.line, e.value)))?;
                self.record(key, e.value, Some(e.line));
                Ok(v)
            }
            None => match default {
                Some(d) => {
                    self.record(key, show(&d), None);
                    Ok(d)
                }
                None => Err(CliError::Config(format!("missing required key `{key}`"))),
            },
        }
    }

    pub fn f64(&mut self, key: &str, default: Option<f64>) -> Result<f64, CliError> {
        self.typed(key, default, |v| format!("{v:?}"))
    }

    pub fn usize(&mut self, key: &str, default: Option<usize>) -> Result<usize, CliError> {
        self.typed(key, default, |v| v.to_string())
    }

    pub fn bool(&mut self, key: &str, default: Option<bool>) -> Result<bool, CliError> {
        self.typed(key, default, |v| v.to_string())
    }

    pub fn string(&mut self, key: &str, default: Option<&str>) -> Result<String, CliError> {
        self.typed(key, default.map(str::to_string), |v| v.clone())
    }

    pub fn optional_usize(&mut self, key: &str) -> Result<Option<usize>, CliError> {
        if self.entries.contains_key(key) {
            self.usize(key, None).map(Some)
        } else {
            Ok(None)
        }
    }

    fn line_of(&self, key: &str) -> Option<usize> {
        self.entries.get(key).map(|e| e.line)
    }

    /// Keys present in the file that no lookup touched.
    pub fn unused(&self) -> Vec<String> {
        self.entries
            .iter()
            .filter(|(k, _)| !self.echo.contains_key(*k))
            .map(|(k, e)| format!("line {}: key `{k}` is not used by this configuration", e.line))
            .collect()
    }

    pub fn echo(&self) -> Vec<EchoEntry> {
        self.echo.values().cloned().collect()
    }
}

/// Which snapshots get a density-matrix dump.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityDump {
    None,
    Last,
    All,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub prefix: String,
    pub density: DensityDump,
    pub density_points: usize,
    /// half-width of the dump grid in standard deviations
    pub density_extent: f64,
    pub fundamentals: bool,
}

/// Everything a subcommand needs from one config file.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub simulation: Simulation,
    pub output: OutputSpec,
    pub echo: Vec<EchoEntry>,
    pub warnings: Vec<String>,
}

fn read_profile_file(path: &Path, key: &str, line: Option<usize>) -> Result<Vec<(f64, f64)>, CliError> {
    let at = line.map(|l| format!("line {l}: ")).unwrap_or_default();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Config(format!("{at}key `{key}`: cannot read {}: {e}", path.display())))?;
    let mut knots = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let cell = |j: usize| -> Result<f64, CliError> {
            let s = rec.get(j).ok_or_else(|| CliError::Config(format!("{} row {}: expected two columns", path.display(), i + 1)))?;
            s.parse().map_err(|_| CliError::Config(format!("{} row {}: `{s}` is not a number", path.display(), i + 1)))
        };
        if i == 0 && rec.get(0).is_some_and(|s| s.parse::<f64>().is_err()) {
            continue;
        }
        knots.push((cell(0)?, cell(1)?));
    }
    Ok(knots)
}

fn profile(r: &mut Reader, prefix: &str, base: &Path) -> Result<Profile, CliError> {
    let key = |k: &str| format!("{prefix}.{k}");
    let kind = r.string(&key("kind"), Some("zero"))?;
    let prof = match kind.as_str() {
        "zero" => Profile::Zero,
        "harmonic" => Profile::Harmonic {
            amplitude: r.f64(&key("amplitude"), None)?,
            frequency: r.f64(&key("frequency"), None)?,
            phase: r.f64(&key("phase"), Some(0.0))?,
        },
        "gaussian" => Profile::GaussianPulse {
            amplitude: r.f64(&key("amplitude"), None)?,
            center: r.f64(&key("center"), None)?,
            width: r.f64(&key("width"), None)?,
            carrier: r.f64(&key("carrier"), None)?,
            phase: r.f64(&key("phase"), Some(0.0))?,
        },
        "tabulated" => {
            let k = key("file");
            let file = r.string(&k, None)?;
            let knots = read_profile_file(&base.join(&file), &k, r.line_of(&k))?;
            Profile::tabulated(knots).map_err(|e| CliError::Config(format!("{}: {e}", base.join(file).display())))?
        }
        other => {
            let line = r.line_of(&key("kind")).unwrap_or(0);
            return Err(CliError::Config(format!(
                "line {line}: key `{}`: unknown profile kind `{other}` (expected zero, harmonic, gaussian or tabulated)",
                key("kind")
            )));
        }
    };
    Ok(prof)
}

fn choice<'a>(r: &Reader, key: &str, got: &str, allowed: &[&'a str]) -> Result<&'a str, CliError> {
    allowed.iter().copied().find(|a| *a == got).ok_or_else(|| {
        let line = r.line_of(key).map(|l| format!("line {l}: ")).unwrap_or_default();
        CliError::Config(format!("{line}key `{key}`: expected one of {}, got `{got}`", allowed.join(", ")))
    })
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_text(&text, &base)
    }

    /// Parses `text`; relative paths resolve against `base`.
    pub fn from_text(text: &str, base: &Path) -> Result<Self, CliError> {
        let mut r = Reader::parse(text)?;
        let bb_enabled = r.bool("radiation.enabled", Some(false))?;
        let defaults = PhysicalParams::default();
        let params = PhysicalParams {
            m: r.f64("system.mass", Some(1.0))?,
            omega0: r.f64("system.omega0", None)?,
            hbar: r.f64("units.hbar", Some(1.0))?,
            kb: r.f64("units.kb", Some(1.0))?,
            gamma_tb: r.f64("bath.gamma", None)?,
            omega_cut_tb: r.f64("bath.cutoff", None)?,
            beta_tb: r.f64("bath.beta", None)?,
            bb_enabled,
            tau_bb: if bb_enabled { r.f64("radiation.tau", None)? } else { defaults.tau_bb },
            omega_cut_bb: if bb_enabled { r.f64("radiation.cutoff", None)? } else { defaults.omega_cut_bb },
            beta_bb: if bb_enabled { r.f64("radiation.beta", None)? } else { defaults.beta_bb },
        };
        let drive = DriveSpec { omega_p2: profile(&mut r, "drive.parametric", base)?, e_laser: profile(&mut r, "drive.laser", base)? };

        let kind = r.string("initial.kind", Some("correlated"))?;
        let initial = match choice(&r, "initial.kind", &kind, &["correlated", "factorized"])? {
            "factorized" => InitialState::Factorized {
                mean_q: r.f64("initial.mean_q", Some(0.0))?,
                mean_p: r.f64("initial.mean_p", Some(0.0))?,
                sqq: r.f64("initial.sqq", None)?,
                spp: r.f64("initial.spp", None)?,
            },
            _ => InitialState::Correlated,
        };

        let t_max = r.f64("grid.t_max", None)?;
        let n_steps = r.usize("grid.n_steps", None)?;
        let count = r.usize("grid.snapshots", Some(n_steps.min(100)))?;
        let grid = TimeGrid::new(t_max, n_steps).map_err(|e| CliError::Config(e.to_string()))?;
        let count = count.clamp(1, n_steps);
        let grid = grid.with_snapshots((0..=count).map(|k| k * n_steps / count).collect()).map_err(|e| CliError::Config(e.to_string()))?;

        let matsubara_tol = r.f64("numerics.matsubara_tol", Some(1e-10))?;
        let matsubara_terms = r.optional_usize("numerics.matsubara_terms")?;
        let mut bb = BbRegularization::default();
        if bb_enabled {
            bb.window_factor = r.f64("numerics.bb_window", Some(bb.window_factor))?;
            let mode = r.string("numerics.bb_mode", Some("window"))?;
            bb.mode = match choice(&r, "numerics.bb_mode", &mode, &["window", "once_subtracted"])? {
                "once_subtracted" => BbMode::OnceSubtracted,
                _ => BbMode::Window,
            };
        }
        let options = MomentOptions {
            printed_qq: r.bool("numerics.printed_qq", Some(false))?,
            printed_sign: r.bool("numerics.printed_sign", Some(false))?,
        };

        let dir = r.string("output.dir", Some("."))?;
        let prefix = r.string("output.prefix", Some("run"))?;
        let density = r.string("output.density", Some("none"))?;
        let density = match choice(&r, "output.density", &density, &["none", "last", "all"])? {
            "last" => DensityDump::Last,
            "all" => DensityDump::All,
            _ => DensityDump::None,
        };
        let (density_points, density_extent) = if density == DensityDump::None {
            (0, 0.0)
        } else {
            (r.usize("output.density_points", Some(41))?, r.f64("output.density_extent", Some(4.0))?)
        };
        let output = OutputSpec { dir: base.join(dir), prefix, density, density_points, density_extent, fundamentals: r.bool("output.fundamentals", Some(false))? };

        let mut simulation = Simulation::new(params, drive, grid);
        simulation.initial = initial;
        simulation.bb = bb;
        simulation.options = options;
        simulation.matsubara_tol = matsubara_tol;
        simulation.matsubara_terms = matsubara_terms;

        let mut warnings = r.unused();
        if let Some(w) = simulation.grid.resolution_warning(&simulation.params, &simulation.drive) {
            warnings.push(w);
        }
        Ok(RunConfig { simulation, output, echo: r.echo(), warnings })
    }
}
