//! Flat `key = value` run configuration.
//!
//! Lines are UTF-8, `#` starts a comment, blank lines are ignored. Unknown
//! keys and repeated keys are rejected so typos never pass silently.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ftn_core::channel::{ebn0_for_ber, ChannelModel};
use ftn_core::coding::BpKernel;
use ftn_core::detector::Window;
use ftn_core::modem::Constellation;
use ftn_core::neural::{LrStage, TrainConfig};
use ftn_core::waveform::FtnConfig;

use crate::scenario::Scenario;

/// Target BER that fixes the default training SNR.
pub const TRAIN_TARGET_BER: f64 = 2e-4;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice")]
    DuplicateKey { line: usize, key: String },
    #[error("invalid value for `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

impl ConfigError {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// The offending key, when there is one.
    pub fn field(&self) -> Option<&str> {
        match self {
            Self::Syntax { .. } => None,
            Self::UnknownKey { key, .. } | Self::DuplicateKey { key, .. } => Some(key),
            Self::Invalid { field, .. } => Some(field),
        }
    }
}

impl From<ftn_core::Error> for ConfigError {
    fn from(e: ftn_core::Error) -> Self {
        match e {
            ftn_core::Error::InvalidConfig { field, reason } => Self::invalid(field, reason),
            other => Self::invalid("config", other.to_string()),
        }
    }
}

/// Everything a `train`, `ber` or `joint` run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub ftn: FtnConfig,
    /// Half-length `K` of the ISI tap vector.
    pub isi_half_len: usize,
    pub order_bits: usize,
    pub channel_model: ChannelModel,
    pub window: Window,
    pub train: TrainConfig,
    /// Training Eb/N0; `None` means the Nyquist Eb/N0 at BER 2e-4.
    pub train_eb_n0_db: Option<f64>,
    pub scenario: Scenario,
    pub snr_list: Vec<f64>,
    pub min_errors: u64,
    pub max_bits: u64,
    /// Data symbols per simulated burst (uncoded scenarios).
    pub block_symbols: usize,
    /// FDE block length `N_f`.
    pub fde_block: usize,
    /// BCJR memory; `None` picks the default for the constellation.
    pub map_memory: Option<usize>,
    pub polar_n: usize,
    pub polar_k: usize,
    pub polar_design_snr_db: f64,
    pub bp_iterations: usize,
    /// BP check-node kernel; `None` uses the scenario's default.
    pub bp_kernel: Option<BpKernel>,
    /// Codewords per simulated burst (coded scenarios).
    pub codewords_per_block: usize,
    pub weights: Option<PathBuf>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            ftn: FtnConfig::default(),
            isi_half_len: 16,
            order_bits: 2,
            channel_model: ChannelModel::Waveform,
            window: Window::default(),
            train: TrainConfig::default(),
            train_eb_n0_db: None,
            scenario: Scenario::UncodedDl,
            snr_list: vec![4.0, 6.0, 8.0],
            min_errors: 200,
            max_bits: 20_000_000,
            block_symbols: 4096,
            fde_block: 1024,
            map_memory: None,
            polar_n: 1024,
            polar_k: 512,
            polar_design_snr_db: 1.0,
            bp_iterations: 50,
            bp_kernel: None,
            codewords_per_block: 8,
            weights: None,
            seed: 1,
        }
    }
}

const KEYS: &[&str] = &[
    "tau",
    "beta",
    "span_symbols",
    "oversampling",
    "symbol_energy",
    "isi_half_len",
    "order_bits",
    "channel_model",
    "window_len",
    "window_step",
    "symbols_total",
    "batch_size",
    "epochs",
    "lr_schedule",
    "train_eb_n0_db",
    "scenario",
    "snr_list",
    "min_errors",
    "max_bits",
    "block_symbols",
    "fde_block",
    "map_memory",
    "polar_n",
    "polar_k",
    "polar_design_snr_db",
    "bp_iterations",
    "bp_kernel",
    "codewords_per_block",
    "weights",
    "seed",
];

fn parse_num<T: FromStr>(field: &str, v: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    v.parse::<T>()
        .map_err(|e| ConfigError::invalid(field, format!("`{v}`: {e}")))
}

/// Parses `4, 6.5, 8` style lists.
pub fn parse_f64_list(field: &str, v: &str) -> Result<Vec<f64>, ConfigError> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num::<f64>(field, s))
        .collect()
}

fn parse_model(v: &str) -> Result<ChannelModel, ConfigError> {
    match v {
        "waveform" => Ok(ChannelModel::Waveform),
        "symbol-rate" | "symbol_rate" => Ok(ChannelModel::SymbolRate),
        _ => Err(ConfigError::invalid(
            "channel_model",
            format!("`{v}` is not waveform or symbol-rate"),
        )),
    }
}

fn parse_kernel(v: &str) -> Result<BpKernel, ConfigError> {
    match v {
        "min-sum" | "min_sum" => Ok(BpKernel::ScaledMinSum),
        "box-plus" | "box_plus" => Ok(BpKernel::BoxPlus),
        _ => Err(ConfigError::invalid(
            "bp_kernel",
            format!("`{v}` is not min-sum or box-plus"),
        )),
    }
}

/// Parses `0:1e-3, 0.6:2e-4, 0.85:4e-5`.
fn parse_schedule(v: &str) -> Result<[LrStage; 3], ConfigError> {
    let stages: Vec<LrStage> = v
        .split(',')
        .map(|s| {
            let (f, r) = s
                .trim()
                .split_once(':')
                .ok_or_else(|| ConfigError::invalid("lr_schedule", "stages are `fraction:rate`"))?;
            Ok(LrStage {
                from_fraction: parse_num("lr_schedule", f.trim())?,
                rate: parse_num("lr_schedule", r.trim())?,
            })
        })
        .collect::<Result<_, ConfigError>>()?;
    stages
        .try_into()
        .map_err(|_| ConfigError::invalid("lr_schedule", "exactly three stages are required"))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut seen: HashMap<String, usize> = HashMap::new();
        let mut cfg = Self::default();
        let mut window_len = cfg.window.len;
        let mut window_step = cfg.window.step;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(ConfigError::Syntax { line });
            }
            if !KEYS.contains(&key) {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                });
            }
            if seen.insert(key.to_string(), line).is_some() {
                return Err(ConfigError::DuplicateKey {
                    line,
                    key: key.to_string(),
                });
            }
            match key {
                "tau" => cfg.ftn.tau = parse_num(key, value)?,
                "beta" => cfg.ftn.beta = parse_num(key, value)?,
                "span_symbols" => cfg.ftn.span_symbols = parse_num(key, value)?,
                "oversampling" => cfg.ftn.oversampling = parse_num(key, value)?,
                "symbol_energy" => cfg.ftn.symbol_energy = parse_num(key, value)?,
                "isi_half_len" => cfg.isi_half_len = parse_num(key, value)?,
                "order_bits" => cfg.order_bits = parse_num(key, value)?,
                "channel_model" => cfg.channel_model = parse_model(value)?,
                "window_len" => window_len = parse_num(key, value)?,
                "window_step" => window_step = parse_num(key, value)?,
                "symbols_total" => cfg.train.symbols_total = parse_num::<f64>(key, value)? as usize,
                "batch_size" => cfg.train.batch_size = parse_num(key, value)?,
                "epochs" => cfg.train.epochs = parse_num(key, value)?,
                "lr_schedule" => cfg.train.lr_schedule = parse_schedule(value)?,
                "train_eb_n0_db" => cfg.train_eb_n0_db = Some(parse_num(key, value)?),
                "scenario" => {
                    cfg.scenario = value
                        .parse()
                        .map_err(|_| ConfigError::invalid(key, format!("unknown scenario `{value}`")))?
                }
                "snr_list" => cfg.snr_list = parse_f64_list(key, value)?,
                "min_errors" => cfg.min_errors = parse_num(key, value)?,
                "max_bits" => cfg.max_bits = parse_num::<f64>(key, value)? as u64,
                "block_symbols" => cfg.block_symbols = parse_num(key, value)?,
                "fde_block" => cfg.fde_block = parse_num(key, value)?,
                "map_memory" => cfg.map_memory = Some(parse_num(key, value)?),
                "polar_n" => cfg.polar_n = parse_num(key, value)?,
                "polar_k" => cfg.polar_k = parse_num(key, value)?,
                "polar_design_snr_db" => cfg.polar_design_snr_db = parse_num(key, value)?,
                "bp_iterations" => cfg.bp_iterations = parse_num(key, value)?,
                "bp_kernel" => cfg.bp_kernel = Some(parse_kernel(value)?),
                "codewords_per_block" => cfg.codewords_per_block = parse_num(key, value)?,
                "weights" => cfg.weights = Some(PathBuf::from(value)),
                "seed" => cfg.seed = parse_num(key, value)?,
                _ => unreachable!("key list and match arms agree"),
            }
        }
        cfg.window = Window {
            len: window_len,
            step: window_step,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, crate::HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| crate::HarnessError::io(path, e))?;
        Ok(Self::parse(&text)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.ftn.validate()?;
        if self.isi_half_len == 0 {
            return Err(ConfigError::invalid("isi_half_len", "must be at least 1"));
        }
        Constellation::<f64>::new(self.order_bits).map_err(|_| {
            ConfigError::invalid(
                "order_bits",
                format!("{} is not 1 or an even number up to 12", self.order_bits),
            )
        })?;
        Window::new(self.window.len, self.window.step).map_err(|e| match e {
            ftn_core::Error::InvalidConfig { reason, .. } => ConfigError::invalid("window_len", reason),
            other => ConfigError::invalid("window_len", other.to_string()),
        })?;
        self.train.validate()?;
        if self.train.symbols_total < self.window.len {
            return Err(ConfigError::invalid("symbols_total", "fewer symbols than one window"));
        }
        if let Some(db) = self.train_eb_n0_db {
            if !db.is_finite() {
                return Err(ConfigError::invalid("train_eb_n0_db", "must be finite"));
            }
        }
        if self.snr_list.is_empty() {
            return Err(ConfigError::invalid("snr_list", "must not be empty"));
        }
        if self.snr_list.iter().any(|v| !v.is_finite()) || self.snr_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ConfigError::invalid(
                "snr_list",
                "must be finite and strictly increasing",
            ));
        }
        if self.min_errors == 0 {
            return Err(ConfigError::invalid("min_errors", "must be positive"));
        }
        if self.max_bits == 0 {
            return Err(ConfigError::invalid("max_bits", "must be positive"));
        }
        if self.block_symbols < self.window.len {
            return Err(ConfigError::invalid("block_symbols", "must hold at least one window"));
        }
        if !self.fde_block.is_power_of_two() || self.fde_block <= 2 * self.isi_half_len {
            return Err(ConfigError::invalid(
                "fde_block",
                "must be a power of two longer than 2K",
            ));
        }
        if self.map_memory == Some(0) {
            return Err(ConfigError::invalid("map_memory", "must be at least 1"));
        }
        if !self.polar_n.is_power_of_two() || self.polar_n < 2 {
            return Err(ConfigError::invalid("polar_n", "must be a power of two"));
        }
        if self.polar_k == 0 || self.polar_k >= self.polar_n {
            return Err(ConfigError::invalid("polar_k", "need 0 < polar_k < polar_n"));
        }
        if !self.polar_n.is_multiple_of(self.order_bits) {
            return Err(ConfigError::invalid("polar_n", "must be a multiple of order_bits"));
        }
        if self.bp_iterations == 0 {
            return Err(ConfigError::invalid("bp_iterations", "must be positive"));
        }
        if self.codewords_per_block == 0 {
            return Err(ConfigError::invalid("codewords_per_block", "must be positive"));
        }
        Ok(())
    }

    pub fn constellation(&self) -> Constellation<f64> {
        Constellation::new(self.order_bits).expect("validated order")
    }

    /// Training Eb/N0, defaulting to the Nyquist Eb/N0 at BER 2e-4.
    pub fn training_eb_n0_db(&self) -> f64 {
        self.train_eb_n0_db
            .unwrap_or_else(|| ebn0_for_ber(&self.constellation(), TRAIN_TARGET_BER))
    }

    pub fn code_rate(&self) -> f64 {
        self.polar_k as f64 / self.polar_n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        assert!(RunConfig::default().validate().is_ok());
    }

    #[test]
    fn parses_keys_and_comments() {
        let cfg = RunConfig::parse(
            "# comment\n tau = 0.7 \nbeta=0.3 # trailing\n\nsnr_list = 2, 4,6\nscenario = uncoded-fde\nlr_schedule = 0:1e-3, 0.5:1e-4, 0.9:1e-5\nsymbols_total = 1e5\n",
        )
        .unwrap();
        assert_eq!(cfg.ftn.tau, 0.7);
        assert_eq!(cfg.ftn.beta, 0.3);
        assert_eq!(cfg.snr_list, vec![2.0, 4.0, 6.0]);
        assert_eq!(cfg.scenario, Scenario::UncodedFde);
        assert_eq!(cfg.train.lr_schedule[1].from_fraction, 0.5);
        assert_eq!(cfg.train.symbols_total, 100_000);
    }

    #[test]
    fn rejections_name_the_field() {
        let e = RunConfig::parse("tau = 1.2").unwrap_err();
        assert_eq!(e.field(), Some("tau"));
        let e = RunConfig::parse("snr_list = 4, 2").unwrap_err();
        assert_eq!(e.field(), Some("snr_list"));
        let e = RunConfig::parse("taw = 0.8").unwrap_err();
        assert_eq!(
            e,
            ConfigError::UnknownKey {
                line: 1,
                key: "taw".into()
            }
        );
        let e = RunConfig::parse("tau = 0.8\ntau = 0.7").unwrap_err();
        assert_eq!(e.field(), Some("tau"));
        assert_eq!(
            RunConfig::parse("just words").unwrap_err(),
            ConfigError::Syntax { line: 1 }
        );
        assert_eq!(
            RunConfig::parse("order_bits = 3").unwrap_err().field(),
            Some("order_bits")
        );
        assert_eq!(RunConfig::parse("epochs = 0").unwrap_err().field(), Some("epochs"));
    }

    #[test]
    fn default_training_snr_matches_qpsk_anchor() {
        let db = RunConfig::default().training_eb_n0_db();
        assert!((db - 7.9).abs() < 0.1, "{db}");
    }
}
