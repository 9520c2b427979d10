use std::fmt;
use std::str::FromStr;

use crate::error::{DweError, Result};
use crate::model::{ChannelMode, NegativeScaling};

pub const DEFAULT_DIM: usize = 300;
pub const DEFAULT_LR: f64 = 0.05;
pub const DEFAULT_BATCH_SIZE: usize = 4096;
pub const DEFAULT_N_MIN: usize = 3;
pub const DEFAULT_N_MAX: usize = 6;
pub const DEFAULT_WINDOW: usize = 5;
pub const DEFAULT_NEGATIVES: usize = 5;
pub const DEFAULT_ALPHA: f64 = 1.0;
pub const DEFAULT_EPOCHS: usize = 5;
pub const DEFAULT_MIN_COUNT: u64 = 5;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_EPS: f64 = 1e-8;

/// Execution strategy for gradient computation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ExecMode {
    /// Single worker; runs are bit-reproducible for a fixed seed.
    #[default]
    Deterministic,
    /// `threads` workers compute gradients over slices of each batch; a single
    /// reducer applies the update.
    Hogwild { threads: usize },
}

impl fmt::Display for ExecMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExecMode::Deterministic => f.write_str("deterministic"),
            ExecMode::Hogwild { threads } => write!(f, "hogwild:{threads}"),
        }
    }
}

impl FromStr for ExecMode {
    type Err = DweError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "deterministic" {
            return Ok(ExecMode::Deterministic);
        }
        s.strip_prefix("hogwild:")
            .and_then(|t| t.parse().ok())
            .map(|threads| ExecMode::Hogwild { threads })
            .ok_or_else(|| DweError::Config(format!("bad execution mode {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingConfig {
    pub dim: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub n_min: usize,
    pub n_max: usize,
    pub window: usize,
    pub negatives: usize,
    pub alpha: f64,
    pub epochs: usize,
    pub min_count: u64,
    pub seed: u64,
    pub mode: ExecMode,
    pub eps: f64,
    pub channels: ChannelMode,
    /// Frequent-word subsampling threshold; off when `None`.
    pub subsample: Option<f64>,
    pub negative_scaling: NegativeScaling,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            dim: DEFAULT_DIM,
            lr: DEFAULT_LR,
            batch_size: DEFAULT_BATCH_SIZE,
            n_min: DEFAULT_N_MIN,
            n_max: DEFAULT_N_MAX,
            window: DEFAULT_WINDOW,
            negatives: DEFAULT_NEGATIVES,
            alpha: DEFAULT_ALPHA,
            epochs: DEFAULT_EPOCHS,
            min_count: DEFAULT_MIN_COUNT,
            seed: DEFAULT_SEED,
            mode: ExecMode::Deterministic,
            eps: DEFAULT_EPS,
            channels: ChannelMode::Dual,
            subsample: None,
            negative_scaling: NegativeScaling::Sum,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(DweError::Config(m));
        if self.dim == 0 || self.batch_size == 0 || self.window == 0 || self.negatives == 0 || self.min_count == 0 {
            return bad("dim, batch_size, window, negatives and min_count must be positive".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) || !(self.eps > 0.0 && self.eps.is_finite()) {
            return bad(format!("lr and eps must be positive, got {} and {}", self.lr, self.eps));
        }
        if self.n_min == 0 || self.n_min > self.n_max {
            return bad(format!("invalid n-gram range {}..={}", self.n_min, self.n_max));
        }
        if self.n_max > 255 {
            return bad("n_max must fit in a byte".into());
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha must lie in [0, 1], got {}", self.alpha));
        }
        if let ExecMode::Hogwild { threads: 0 } = self.mode {
            return bad("hogwild mode needs at least one thread".into());
        }
        if let Some(t) = self.subsample {
            if !(t > 0.0 && t.is_finite()) {
                return bad(format!("subsample threshold must be positive, got {t}"));
            }
        }
        Ok(())
    }

    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            s.push_str(k);
            s.push('=');
            s.push_str(&v);
            s.push('\n');
        };
        put("dim", self.dim.to_string());
        put("lr", self.lr.to_string());
        put("batch_size", self.batch_size.to_string());
        put("n_min", self.n_min.to_string());
        put("n_max", self.n_max.to_string());
        put("window", self.window.to_string());
        put("negatives", self.negatives.to_string());
        put("alpha", self.alpha.to_string());
        put("epochs", self.epochs.to_string());
        put("min_count", self.min_count.to_string());
        put("seed", self.seed.to_string());
        put("mode", self.mode.to_string());
        put("eps", self.eps.to_string());
        put("channels", self.channels.to_string());
        put(
            "subsample",
            self.subsample.map_or_else(|| "off".into(), |t| t.to_string()),
        );
        put("negative_scaling", self.negative_scaling.to_string());
        s
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        const WHAT: &str = "config";
        let mut c = TrainingConfig::default();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| DweError::parse(WHAT, i + 1, "expected key=value"))?;
            let err = |e: String| DweError::parse(WHAT, i + 1, format!("bad value for {k}: {v:?} ({e})"));
            match k {
                "dim" => c.dim = num(v).map_err(err)?,
                "lr" => c.lr = num(v).map_err(err)?,
                "batch_size" => c.batch_size = num(v).map_err(err)?,
                "n_min" => c.n_min = num(v).map_err(err)?,
                "n_max" => c.n_max = num(v).map_err(err)?,
                "window" => c.window = num(v).map_err(err)?,
                "negatives" => c.negatives = num(v).map_err(err)?,
                "alpha" => c.alpha = num(v).map_err(err)?,
                "epochs" => c.epochs = num(v).map_err(err)?,
                "min_count" => c.min_count = num(v).map_err(err)?,
                "seed" => c.seed = num(v).map_err(err)?,
                "mode" => {
                    c.mode = v
                        .parse()
                        .map_err(|e: DweError| DweError::parse(WHAT, i + 1, e.to_string()))?
                }
                "eps" => c.eps = num(v).map_err(err)?,
                "channels" => {
                    c.channels = v
                        .parse()
                        .map_err(|e: DweError| DweError::parse(WHAT, i + 1, e.to_string()))?
                }
                "subsample" => c.subsample = if v == "off" { None } else { Some(num(v).map_err(err)?) },
                "negative_scaling" => {
                    c.negative_scaling = v
                        .parse()
                        .map_err(|e: DweError| DweError::parse(WHAT, i + 1, e.to_string()))?
                }
                _ => return Err(DweError::parse(WHAT, i + 1, format!("unknown key {k:?}"))),
            }
        }
        Ok(c)
    }

    /// Fails when `self` cannot continue training a model built with `stored`.
    pub fn check_resumable(&self, stored: &TrainingConfig) -> Result<()> {
        let mut diffs = Vec::new();
        if self.dim != stored.dim {
            diffs.push(format!("dim {} vs checkpoint {}", self.dim, stored.dim));
        }
        if (self.n_min, self.n_max) != (stored.n_min, stored.n_max) {
            diffs.push(format!(
                "n-gram range {}..={} vs checkpoint {}..={}",
                self.n_min, self.n_max, stored.n_min, stored.n_max
            ));
        }
        if self.channels != stored.channels {
            diffs.push(format!("channels {} vs checkpoint {}", self.channels, stored.channels));
        }
        if diffs.is_empty() {
            Ok(())
        } else {
            Err(DweError::ConfigMismatch(diffs.join("; ")))
        }
    }
}

fn num<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    v.parse().map_err(|e: T::Err| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_reported_hyperparameters() {
        let c = TrainingConfig::default();
        assert_eq!((c.dim, c.batch_size, c.n_min, c.n_max), (300, 4096, 3, 6));
        assert_eq!(c.lr, 0.05);
        assert_eq!(c.alpha, 1.0);
        assert_eq!(c.subsample, None);
        c.validate().unwrap();
    }

    #[test]
    fn kv_round_trip() {
        let c = TrainingConfig {
            lr: 0.1 + 0.2,
            subsample: Some(1e-4),
            mode: ExecMode::Hogwild { threads: 4 },
            channels: ChannelMode::StrokeOnly,
            ..TrainingConfig::default()
        };
        let text = c.to_kv();
        assert_eq!(TrainingConfig::from_kv(&text).unwrap(), c);
        assert_eq!(TrainingConfig::from_kv(&text).unwrap().to_kv(), text);
        assert!(TrainingConfig::from_kv("bogus=1\n").is_err());
        assert!(TrainingConfig::from_kv("dim=x\n").is_err());
    }

    #[test]
    fn validation_rejects_bad_values() {
        let ok = TrainingConfig::default();
        for broken in [
            TrainingConfig { dim: 0, ..ok.clone() },
            TrainingConfig {
                n_min: 5,
                n_max: 4,
                ..ok.clone()
            },
            TrainingConfig { lr: 0.0, ..ok.clone() },
            TrainingConfig {
                alpha: 1.5,
                ..ok.clone()
            },
            TrainingConfig {
                mode: ExecMode::Hogwild { threads: 0 },
                ..ok.clone()
            },
            TrainingConfig {
                subsample: Some(-1.0),
                ..ok.clone()
            },
        ] {
            assert!(broken.validate().is_err(), "{broken:?}");
        }
    }

    #[test]
    fn resume_requires_matching_dimension() {
        let stored = TrainingConfig {
            dim: 8,
            ..Default::default()
        };
        let err = TrainingConfig::default().check_resumable(&stored).unwrap_err();
        assert!(matches!(err, DweError::ConfigMismatch(_)));
        let fine = TrainingConfig {
            dim: 8,
            epochs: 9,
            lr: 0.1,
            ..Default::default()
        };
        fine.check_resumable(&stored).unwrap();
    }
}
