//! Experiment configuration: JSON file plus command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, ensure, Context, Result};
use ftl_particles::{InitialDatum, Mode, VelocityModel};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::io;

/// `lwr`, `glwr:<gamma>` or `table:<path>`.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Lwr,
    Glwr { gamma: f64 },
    Table(PathBuf),
}

impl FromStr for ModelSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "lwr" {
            return Ok(ModelSpec::Lwr);
        }
        if let Some(g) = s.strip_prefix("glwr:") {
            let gamma: f64 = g.parse().with_context(|| format!("bad gamma in model spec `{s}`"))?;
            return Ok(ModelSpec::Glwr { gamma });
        }
        if let Some(p) = s.strip_prefix("table:") {
            ensure!(!p.is_empty(), "empty table path in model spec `{s}`");
            return Ok(ModelSpec::Table(PathBuf::from(p)));
        }
        bail!("unknown model `{s}` (expected lwr, glwr:<gamma> or table:<path>)")
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::Lwr => f.write_str("lwr"),
            ModelSpec::Glwr { gamma } => write!(f, "glwr:{gamma}"),
            ModelSpec::Table(p) => write!(f, "table:{}", p.display()),
        }
    }
}

impl ModelSpec {
    pub fn load(&self) -> Result<VelocityModel> {
        Ok(match self {
            ModelSpec::Lwr => VelocityModel::Lwr,
            ModelSpec::Glwr { gamma } => VelocityModel::generalized_lwr(1.0, *gamma)?,
            ModelSpec::Table(p) => io::read_velocity_table(p)?,
        })
    }
}

/// `ic-paper` (0.4 on `[-1, 0]`, 0.8 on `[0, 1]`) or a density CSV path.
#[derive(Debug, Clone, PartialEq)]
pub enum DatumSpec {
    Builtin,
    Csv(PathBuf),
}

impl FromStr for DatumSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        ensure!(!s.is_empty(), "empty datum spec");
        Ok(if s == "ic-paper" { DatumSpec::Builtin } else { DatumSpec::Csv(PathBuf::from(s)) })
    }
}

impl fmt::Display for DatumSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatumSpec::Builtin => f.write_str("ic-paper"),
            DatumSpec::Csv(p) => write!(f, "{}", p.display()),
        }
    }
}

impl DatumSpec {
    pub fn load(&self) -> Result<InitialDatum> {
        Ok(match self {
            DatumSpec::Builtin => InitialDatum::riemann_pair(),
            DatumSpec::Csv(p) => InitialDatum::from_density(io::read_density_csv(p)?)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModeSpec(pub Mode);

impl FromStr for ModeSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "anchored" => Ok(ModeSpec(Mode::Anchored)),
            "phantom" => Ok(ModeSpec(Mode::Phantom)),
            _ => bail!("unknown mode `{s}` (expected anchored or phantom)"),
        }
    }
}

impl fmt::Display for ModeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self.0 {
            Mode::Anchored => "anchored",
            Mode::Phantom => "phantom",
        })
    }
}

macro_rules! string_serde {
    ($($t:ty),*) => {$(
        impl Serialize for $t {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }
        impl<'de> Deserialize<'de> for $t {
            fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    )*};
}
string_serde!(ModelSpec, DatumSpec, ModeSpec);

/// Space-time bump `B((t - t_center) / t_width) B((x - x_center) / x_width)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpSpec {
    pub t_center: f64,
    pub t_width: f64,
    pub x_center: f64,
    pub x_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub datum: DatumSpec,
    pub mode: ModeSpec,
    pub n: usize,
    pub n_list: Vec<usize>,
    pub t_end: f64,
    /// Output times; empty means ten evenly spaced times up to `t_end`.
    pub snapshots: Vec<f64>,
    pub rtol: f64,
    pub atol: f64,
    pub delta_rho: f64,
    /// Window of the L1 error in `converge`.
    pub error_window: [f64; 2],
    pub entropy_k: Vec<f64>,
    /// Test functions for the entropy residual; empty means automatic.
    pub bumps: Vec<BumpSpec>,
    pub out: PathBuf,
    /// Worker threads for `converge`; 0 uses all cores.
    pub jobs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: ModelSpec::Lwr,
            datum: DatumSpec::Builtin,
            mode: ModeSpec(Mode::Anchored),
            n: 200,
            n_list: vec![50, 100, 200, 400, 1000],
            t_end: 0.5,
            snapshots: Vec::new(),
            rtol: 1e-6,
            atol: 1e-9,
            delta_rho: 1e-3,
            error_window: [-2.0, 2.0],
            entropy_k: vec![0.0, 0.2, 0.6, 1.0],
            bumps: Vec::new(),
            out: PathBuf::from("out"),
            jobs: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    /// Checks every field and fills in the derived defaults.
    pub fn resolve(mut self) -> Result<Self> {
        ensure!(self.n >= 3, "n must be at least 3 (got {})", self.n);
        if let Some(&bad) = self.n_list.iter().find(|&&n| n < 3) {
            bail!("every entry of n_list must be at least 3 (got {bad})");
        }
        ensure!(self.t_end.is_finite() && self.t_end > 0.0, "t_end must be positive (got {})", self.t_end);
        ensure!(self.rtol > 0.0 && self.atol > 0.0, "rtol and atol must be positive");
        ensure!(self.delta_rho > 0.0, "delta_rho must be positive (got {})", self.delta_rho);
        let [a, b] = self.error_window;
        ensure!(a < b, "error_window must satisfy a < b (got [{a}, {b}])");
        if let ModelSpec::Table(p) = &self.model {
            ensure!(p.is_file(), "velocity table {} does not exist", p.display());
        }
        if let DatumSpec::Csv(p) = &self.datum {
            ensure!(p.is_file(), "datum file {} does not exist", p.display());
        }
        if let Some(&k) = self.entropy_k.iter().find(|k| !(**k >= 0.0)) {
            bail!("entropy constants must be nonnegative (got {k})");
        }
        if self.snapshots.is_empty() {
            self.snapshots = (1..=10).map(|k| self.t_end * k as f64 / 10.0).collect();
        }
        if let Some(&t) = self.snapshots.iter().find(|&&t| !(t > 0.0 && t <= self.t_end)) {
            bail!("snapshot time {t} outside (0, t_end = {}]", self.t_end);
        }
        self.snapshots.sort_by(f64::total_cmp);
        self.snapshots.dedup();
        if self.bumps.is_empty() {
            self.bumps = self.default_bumps()?;
        }
        for b in &self.bumps {
            ensure!(
                b.t_width > 0.0 && b.x_width > 0.0,
                "bump widths must be positive (got t_width {}, x_width {})",
                b.t_width,
                b.x_width
            );
            ensure!(
                b.t_center - b.t_width >= 0.0 && b.t_center + b.t_width <= self.t_end,
                "bump time support [{}, {}] must lie in [0, t_end = {}]",
                b.t_center - b.t_width,
                b.t_center + b.t_width,
                self.t_end
            );
        }
        Ok(self)
    }

    /// Five bumps centred at mid-time, spread over the support at that time.
    fn default_bumps(&self) -> Result<Vec<BumpSpec>> {
        let model = self.model.load()?;
        let datum = self.datum.load()?;
        let (lo, hi) = datum.support();
        use ftl_particles::Velocity;
        let tc = 0.5 * self.t_end;
        let left = lo + model.v(datum.sup()).min(0.0) * tc;
        let right = hi + model.v_max() * tc;
        let width = right - left;
        Ok((1..=5)
            .map(|j| BumpSpec {
                t_center: tc,
                t_width: 0.8 * tc,
                x_center: left + width * j as f64 / 6.0,
                x_width: width / 6.0,
            })
            .collect())
    }
}

/// Values given on the command line; `None` keeps the file or default value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub model: Option<ModelSpec>,
    pub datum: Option<DatumSpec>,
    pub mode: Option<ModeSpec>,
    pub n: Option<usize>,
    pub n_list: Option<Vec<usize>>,
    pub t_end: Option<f64>,
    pub snapshots: Option<Vec<f64>>,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub delta_rho: Option<f64>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
}

impl Overrides {
    pub fn apply(self, mut c: ExperimentConfig) -> ExperimentConfig {
        macro_rules! set {
            ($($f:ident),*) => {$( if let Some(v) = self.$f { c.$f = v; } )*};
        }
        set!(model, datum, mode, n, n_list, t_end, snapshots, rtol, atol, delta_rho, out, jobs);
        c
    }
}
