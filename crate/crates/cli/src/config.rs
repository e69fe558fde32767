//! Experiment configuration: TOML ingestion, presets and validation.
//!
//! A config file is a preset (optional) plus overrides:
//!
//! ```toml
//! preset = "fig8"
//! trials = 10
//! seed = 7
//!
//! [network]
//! n_bs = 3
//! n_ms = 3
//! bs_antennas = 2
//! ms_antennas = 1
//! power_db = 5.0     # or `power` in linear units
//! backhaul = 2.0
//!
//! [channel]
//! kind = "fading"    # or "wyner" with `g`
//! alpha_db = 0.0
//!
//! [sweep]
//! variable = "C"
//! values = [1, 2, 4, 8]
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cran_core::model::NetworkConfig;
use cran_core::optimizer::{Compression, Mode};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ChannelModel {
    /// Circular Wyner model with inter-cell gain `g`.
    Wyner { g: f64 },
    /// Rayleigh fading, inter-cell gain `alpha` given in dB.
    Fading { alpha_db: f64 },
}

impl ChannelModel {
    pub fn is_random(&self) -> bool {
        matches!(self, Self::Fading { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepVar {
    C,
    P,
    Alpha,
    Gamma,
    G,
}

impl SweepVar {
    pub fn name(&self) -> &'static str {
        match self {
            Self::C => "C",
            Self::P => "P",
            Self::Alpha => "alpha",
            Self::Gamma => "gamma",
            Self::G => "g",
        }
    }

    /// Whether a larger value only relaxes the problem, so solutions at a
    /// smaller value remain feasible.
    pub fn relaxes_upward(&self) -> bool {
        matches!(self, Self::C | Self::P)
    }
}

impl FromStr for SweepVar {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "C" | "c" => Self::C,
            "P" | "p" => Self::P,
            "alpha" => Self::Alpha,
            "gamma" => Self::Gamma,
            "g" => Self::G,
            _ => return Err(format!("unknown sweep variable `{s}` (expected C, P, alpha, gamma or g)")),
        })
    }
}

impl fmt::Display for SweepVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub var: SweepVar,
    pub values: Vec<f64>,
}

impl FromStr for Sweep {
    type Err = String;

    /// Parses `var=v1,v2,...`.
    fn from_str(s: &str) -> Result<Self, String> {
        let (var, values) = s
            .split_once('=')
            .ok_or_else(|| format!("sweep `{s}` must look like var=v1,v2,..."))?;
        let var = var.trim().parse()?;
        let values = values
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|e| format!("sweep value `{v}`: {e}")))
            .collect::<Result<_, _>>()?;
        Ok(Self { var, values })
    }
}

/// A scheme as named in the config, with the optimizer mode it runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Scheme {
    pub label: String,
    pub mode: Mode,
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        use Compression::*;
        let mode = match s {
            "joint-multivariate" | "linear-multivariate" => Mode::Joint(Multivariate),
            "joint-independent" | "linear-independent" => Mode::Joint(Independent),
            "separate-multivariate" => Mode::Separate(Multivariate),
            "separate-independent" => Mode::Separate(Independent),
            "dpc-multivariate" => Mode::Dpc(Multivariate),
            "dpc-independent" => Mode::Dpc(Independent),
            "full-cooperation" => Mode::FullCooperation,
            _ => return Err(format!("unknown scheme `{s}`")),
        };
        Ok(Self { label: s.to_string(), mode })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub n_bs: usize,
    pub n_ms: usize,
    pub bs_antennas: usize,
    pub ms_antennas: usize,
    /// Per-BS power budget, linear.
    pub power: f64,
    pub backhaul: f64,
}

impl Network {
    pub fn build(&self) -> Result<NetworkConfig, cran_core::Error> {
        NetworkConfig::uniform(self.n_bs, self.n_ms, self.bs_antennas, self.ms_antennas, self.power, self.backhaul)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Preset name, or "custom".
    pub name: String,
    pub network: Network,
    pub channel: ChannelModel,
    pub sweep: Option<Sweep>,
    pub schemes: Vec<Scheme>,
    /// Adds a `cutset` row, `min(R_full, sum_i C_i)`, per sweep point and trial.
    pub cutset: bool,
    pub trials: u64,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

pub const PRESETS: [&str; 6] = ["fig3", "fig5", "fig6", "fig7", "fig8", "fig9"];

pub const DEFAULT_TRIALS: u64 = 50;

fn schemes(names: &[&str]) -> Vec<Scheme> {
    names.iter().map(|s| s.parse().expect("preset scheme")).collect()
}

const LADDER: [&str; 4] = [
    "joint-multivariate",
    "joint-independent",
    "separate-multivariate",
    "separate-independent",
];

fn steps(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|i| lo + step * i as f64).collect()
}

impl ExperimentConfig {
    /// Three cells with one MS each, two BS antennas, P = 5 dB, C = 2,
    /// alpha = 0 dB, the four linear schemes.
    pub fn base() -> Self {
        Self {
            name: "custom".into(),
            network: Network {
                n_bs: 3,
                n_ms: 3,
                bs_antennas: 2,
                ms_antennas: 1,
                power: db_to_linear(5.0),
                backhaul: 2.0,
            },
            channel: ChannelModel::Fading { alpha_db: 0.0 },
            sweep: None,
            schemes: schemes(&LADDER),
            cutset: false,
            trials: DEFAULT_TRIALS,
            seed: 0,
            out: None,
        }
    }

    pub fn preset(name: &str) -> Result<Self, CliError> {
        let mut c = Self::base();
        c.name = name.to_string();
        match name {
            "fig3" => {
                c.network.bs_antennas = 1;
                c.network.power = db_to_linear(20.0);
                c.channel = ChannelModel::Wyner { g: 0.5 };
                c.sweep = Some(Sweep { var: SweepVar::C, values: steps(0.0, 6.0, 1.0) });
                c.schemes = schemes(&[
                    "linear-independent",
                    "linear-multivariate",
                    "dpc-independent",
                    "dpc-multivariate",
                ]);
            }
            "fig5" => {
                let mut g = steps(0.1, 0.9, 0.1);
                g.push(0.95);
                c.sweep = Some(Sweep { var: SweepVar::Gamma, values: g });
                c.schemes = schemes(&["separate-multivariate", "separate-independent"]);
            }
            "fig6" => {
                c.sweep = Some(Sweep { var: SweepVar::P, values: steps(0.0, 30.0, 5.0) });
                c.cutset = true;
            }
            "fig7" => {
                c.sweep = Some(Sweep { var: SweepVar::P, values: steps(0.0, 30.0, 5.0) });
                c.schemes = schemes(&[
                    "joint-multivariate",
                    "joint-independent",
                    "dpc-multivariate",
                    "dpc-independent",
                ]);
            }
            "fig8" => {
                c.sweep = Some(Sweep { var: SweepVar::C, values: steps(1.0, 8.0, 1.0) });
                c.cutset = true;
            }
            "fig9" => {
                c.sweep = Some(Sweep { var: SweepVar::Alpha, values: steps(-20.0, 0.0, 5.0) });
            }
            _ => {
                return Err(CliError::Config(format!(
                    "preset: unknown preset `{name}` (expected one of {})",
                    PRESETS.join(", ")
                )))
            }
        }
        Ok(c)
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        raw.resolve()
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        let n = &self.network;
        if self.schemes.is_empty() {
            return bad("schemes: list must not be empty".into());
        }
        if self.trials == 0 {
            return bad("trials: must be at least 1".into());
        }
        if self.seed.checked_add(self.trials - 1).is_none() {
            return bad("seed: seed + trials overflows".into());
        }
        for (key, v) in [("network.n_bs", n.n_bs), ("network.n_ms", n.n_ms)] {
            if v == 0 {
                return bad(format!("{key}: must be at least 1"));
            }
        }
        for (key, v) in [("network.bs_antennas", n.bs_antennas), ("network.ms_antennas", n.ms_antennas)] {
            if v == 0 {
                return bad(format!("{key}: must be at least 1"));
            }
        }
        if !(n.power.is_finite() && n.power > 0.0) {
            return bad(format!("network.power: {} must be positive and finite", n.power));
        }
        if !(n.backhaul.is_finite() && n.backhaul >= 0.0) {
            return bad(format!("network.backhaul: {} must be nonnegative and finite", n.backhaul));
        }
        match self.channel {
            ChannelModel::Wyner { g } => {
                if !(0.0..=1.0).contains(&g) {
                    return bad(format!("channel.g: {g} must lie in [0, 1]"));
                }
                if n.bs_antennas != 1 || n.ms_antennas != 1 || n.n_bs != n.n_ms {
                    return bad("channel.kind: wyner needs single-antenna nodes and n_ms = n_bs".into());
                }
            }
            ChannelModel::Fading { alpha_db } => {
                if !alpha_db.is_finite() {
                    return bad("channel.alpha_db: must be finite".into());
                }
            }
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return bad("sweep.values: list must not be empty".into());
            }
            if let Some(v) = s.values.iter().find(|v| !v.is_finite()) {
                return bad(format!("sweep.values: {v} is not finite"));
            }
            let check = |ok: bool, what: &str| if ok { Ok(()) } else { bad(format!("sweep.values: {what}")) };
            match s.var {
                SweepVar::C => check(s.values.iter().all(|&v| v >= 0.0), "backhaul must be nonnegative")?,
                SweepVar::P => {}
                SweepVar::Alpha => check(self.channel.is_random(), "alpha sweeps need channel.kind = \"fading\"")?,
                SweepVar::G => {
                    check(!self.channel.is_random(), "g sweeps need channel.kind = \"wyner\"")?;
                    check(s.values.iter().all(|v| (0.0..=1.0).contains(v)), "g must lie in [0, 1]")?;
                }
                SweepVar::Gamma => {
                    check(s.values.iter().all(|&v| v > 0.0 && v < 1.0), "gamma must lie in (0, 1)")?;
                    if let Some(s) = self.schemes.iter().find(|s| !matches!(s.mode, Mode::Separate(_))) {
                        return bad(format!("schemes: `{}` has no power split; gamma sweeps take separate-* schemes", s.label));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNetwork {
    n_bs: Option<usize>,
    n_ms: Option<usize>,
    bs_antennas: Option<usize>,
    ms_antennas: Option<usize>,
    power_db: Option<f64>,
    power: Option<f64>,
    backhaul: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    variable: String,
    values: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    preset: Option<String>,
    network: Option<RawNetwork>,
    channel: Option<ChannelModel>,
    sweep: Option<RawSweep>,
    schemes: Option<Vec<String>>,
    cutset: Option<bool>,
    trials: Option<u64>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    /// Scheme for `solve`.
    scheme: Option<String>,
}

impl RawConfig {
    fn resolve(self) -> Result<ExperimentConfig, CliError> {
        let err = |m: String| CliError::Config(m);
        let mut c = match &self.preset {
            Some(p) => ExperimentConfig::preset(p)?,
            None => ExperimentConfig::base(),
        };
        if let Some(n) = self.network {
            let net = &mut c.network;
            net.n_bs = n.n_bs.unwrap_or(net.n_bs);
            net.n_ms = n.n_ms.unwrap_or(net.n_ms);
            net.bs_antennas = n.bs_antennas.unwrap_or(net.bs_antennas);
            net.ms_antennas = n.ms_antennas.unwrap_or(net.ms_antennas);
            net.backhaul = n.backhaul.unwrap_or(net.backhaul);
            match (n.power_db, n.power) {
                (Some(_), Some(_)) => return Err(err("network.power: give either power_db or power, not both".into())),
                (Some(db), None) => net.power = db_to_linear(db),
                (None, Some(p)) => net.power = p,
                (None, None) => {}
            }
        }
        if let Some(ch) = self.channel {
            c.channel = ch;
        }
        if let Some(s) = self.sweep {
            let var = s.variable.parse().map_err(|e| err(format!("sweep.variable: {e}")))?;
            c.sweep = Some(Sweep { var, values: s.values });
        }
        match (self.schemes, self.scheme) {
            (Some(_), Some(_)) => return Err(err("scheme: give either scheme or schemes, not both".into())),
            (Some(list), None) => {
                c.schemes = list
                    .iter()
                    .map(|s| s.parse().map_err(|e| err(format!("schemes: {e}"))))
                    .collect::<Result<_, _>>()?;
            }
            (None, Some(s)) => c.schemes = vec![s.parse().map_err(|e| err(format!("scheme: {e}")))?],
            (None, None) => {}
        }
        c.cutset = self.cutset.unwrap_or(c.cutset);
        c.trials = self.trials.unwrap_or(c.trials);
        c.seed = self.seed.unwrap_or(c.seed);
        c.out = self.out.or(c.out);
        c.validate()?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_is_valid() {
        for p in PRESETS {
            let c = ExperimentConfig::preset(p).unwrap();
            c.validate().unwrap();
            assert_eq!(c.trials, DEFAULT_TRIALS);
        }
    }

    #[test]
    fn power_is_converted_from_db() {
        let c = ExperimentConfig::from_toml("[network]\npower_db = 20.0\n").unwrap();
        assert!((c.network.power - 100.0).abs() < 1e-12);
        let c = ExperimentConfig::from_toml("[network]\npower = 3.0\n").unwrap();
        assert_eq!(c.network.power, 3.0);
    }

    #[test]
    fn preset_fields_can_be_overridden() {
        let c = ExperimentConfig::from_toml(
            "preset = \"fig8\"\ntrials = 2\n[sweep]\nvariable = \"C\"\nvalues = [1, 3]\n",
        )
        .unwrap();
        assert_eq!(c.name, "fig8");
        assert_eq!(c.trials, 2);
        assert_eq!(c.sweep.unwrap().values, vec![1.0, 3.0]);
        assert!(c.cutset);
    }

    #[test]
    fn diagnostics_name_the_key() {
        let msg = |t: &str| ExperimentConfig::from_toml(t).unwrap_err().to_string();
        assert!(msg("[network]\npowr_db = 5\n").contains("powr_db"));
        assert!(msg("trials = 0\n").contains("trials"));
        assert!(msg("[network]\nn_bs = \"three\"\n").contains("n_bs"));
        assert!(msg("schemes = []\n").contains("schemes"));
        assert!(msg("schemes = [\"joint-magic\"]\n").contains("joint-magic"));
        assert!(msg("[channel]\nkind = \"wyner\"\ng = 0.5\n").contains("channel.kind"));
        assert!(msg("[sweep]\nvariable = \"gamma\"\nvalues = [0.5]\n").contains("schemes"));
        assert!(msg("[network]\npower = 1.0\npower_db = 0.0\n").contains("network.power"));
    }

    #[test]
    fn sweep_flag_syntax() {
        let s: Sweep = "alpha=-20,-10,0".parse().unwrap();
        assert_eq!(s.var, SweepVar::Alpha);
        assert_eq!(s.values, vec![-20.0, -10.0, 0.0]);
        assert!("C".parse::<Sweep>().is_err());
        assert!("Q=1".parse::<Sweep>().is_err());
    }

    #[test]
    fn linear_aliases_map_to_joint() {
        let s: Scheme = "linear-independent".parse().unwrap();
        assert_eq!(s.mode, Mode::Joint(Compression::Independent));
        assert_eq!(s.label, "linear-independent");
    }
}
