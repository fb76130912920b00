use std::path::{Path, PathBuf};

use cvtele::bell::GridSpec;
use cvtele::channel::{
    transfer_efficiency, validate_regime, GammaProfile, PhysicalConfig, RegimeOptions, RegimeReport,
    DEFAULT_REGIME_RATIO,
};
use cvtele::protocol::{AverageMode, ProtocolConfig, SweepAxis};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const OUT_DIR_ENV: &str = "CVTELE_OUT_DIR";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeSpec {
    Given([f64; 2]),
    Sampled,
}

impl Default for OutcomeSpec {
    fn default() -> Self {
        OutcomeSpec::Given([0.0, 0.0])
    }
}

fn default_ratio() -> f64 {
    DEFAULT_REGIME_RATIO
}

/// Physical parameters of the atom-cavity stations. With `interaction_time`
/// set, every transfer efficiency of the protocol is replaced by
/// η = 1 − exp(−2∫Γ) at that time (in the time unit of `params.units`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsBlock {
    pub params: PhysicalConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interaction_time: Option<f64>,
    #[serde(default = "default_ratio")]
    pub ratio: f64,
    #[serde(default)]
    pub allow_violation: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Output directory; falls back to $CVTELE_OUT_DIR, then ".".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

fn default_sweep() -> SweepAxis {
    SweepAxis::R(Vec::new())
}

fn default_average() -> AverageMode {
    AverageMode::GridExact
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub protocol: ProtocolConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub physics: Option<PhysicsBlock>,
    #[serde(default)]
    pub outcome: OutcomeSpec,
    #[serde(default = "default_average")]
    pub average: AverageMode,
    #[serde(default = "default_sweep")]
    pub sweep: SweepAxis,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub verbosity: u8,
}

/// Command-line values that take precedence over the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub r: Option<f64>,
    pub gain: Option<f64>,
    pub cutoff: Option<usize>,
    pub grid_l: Option<f64>,
    pub grid_n: Option<usize>,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
    pub r_list: Option<Vec<f64>>,
    pub verbose: u8,
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

impl RunConfig {
    pub fn load(path: &Path, o: &Overrides) -> Result<Self, CliError> {
        let mut c: RunConfig = read_json(path)?;
        c.apply(o);
        c.protocol.validate().map_err(CliError::from_core)?;
        Ok(c)
    }

    fn apply(&mut self, o: &Overrides) {
        let p = &mut self.protocol;
        if let Some(v) = o.seed {
            p.seed = v;
        }
        if let Some(v) = o.r {
            p.r = v;
        }
        if let Some(v) = o.gain {
            p.gain = v;
        }
        if let Some(v) = o.cutoff {
            p.cutoff = v;
        }
        if let Some(v) = o.grid_l {
            p.grid = GridSpec { half_width: v, ..p.grid };
        }
        if let Some(v) = o.grid_n {
            p.grid = GridSpec { n_points: v, ..p.grid };
        }
        if let Some(v) = o.format {
            self.output.format = v;
        }
        if let Some(v) = &o.out {
            self.output.dir = Some(v.clone());
        }
        if let Some(v) = &o.r_list {
            self.sweep = SweepAxis::R(v.clone());
        }
        self.verbosity = self.verbosity.max(o.verbose);
    }

    /// Output directory after applying the environment fallback; recorded
    /// in the resolved config.
    pub fn resolve_out_dir(&mut self) -> PathBuf {
        let dir = self
            .output
            .dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));
        self.output.dir = Some(dir.clone());
        dir
    }

    /// Runs the regime checks and applies physics-derived efficiencies.
    pub fn apply_physics(&mut self) -> Result<Option<PhysicsSummary>, CliError> {
        let Some(block) = &self.physics else {
            return Ok(None);
        };
        let params = block.params.resolve();
        let report = validate_regime(&params, block.ratio).map_err(CliError::from_core)?;
        let opts = RegimeOptions {
            ratio: block.ratio,
            allow_violation: block.allow_violation,
        };
        let profile = GammaProfile::from_physics(&params, opts).map_err(CliError::from_core)?;
        let efficiency = block.interaction_time.map(|t| {
            let eta = transfer_efficiency(&profile, block.params.units.time_to_seconds(t));
            let p = &mut self.protocol;
            p.eta_write = eta;
            p.eta_read = eta;
            p.eta_epr_a = eta;
            p.eta_epr_b = eta;
            eta
        });
        self.protocol.validate().map_err(CliError::from_core)?;
        Ok(Some(PhysicsSummary {
            report,
            override_used: profile.override_used(),
            efficiency,
        }))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PhysicsSummary {
    pub report: RegimeReport,
    pub override_used: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub efficiency: Option<f64>,
}

/// Comma-separated numbers; the empty string is the empty list.
#[derive(Clone, Debug, PartialEq)]
pub struct FloatList(pub Vec<f64>);

pub fn parse_list(s: &str) -> Result<FloatList, String> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|e| format!("bad number {t:?}: {e}")))
        .collect::<Result<_, _>>()
        .map(FloatList)
}
