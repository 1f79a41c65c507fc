//! Run configuration: every analysis threshold in one place, loadable from a
//! `key = value` file and overridable per flag.

use std::fmt;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("invalid {key}: {msg}")]
    Invalid { key: &'static str, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Which validity filter runs first on the cohort sensing times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FilterOrder {
    /// Misses (>= max_st_ms) removed first, IQR outliers on the remainder.
    #[default]
    MissFirst,
    /// IQR outliers on the raw set first, then the miss rule.
    IqrFirst,
}

impl FilterOrder {
    pub fn as_str(self) -> &'static str {
        match self {
            FilterOrder::MissFirst => "miss_first",
            FilterOrder::IqrFirst => "iqr_first",
        }
    }

    pub fn parse(s: &str) -> Option<FilterOrder> {
        match s {
            "miss_first" => Some(FilterOrder::MissFirst),
            "iqr_first" => Some(FilterOrder::IqrFirst),
            _ => None,
        }
    }
}

impl fmt::Display for FilterOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Consecutive detection frames required to accept hazard onset.
    pub debounce_frames: usize,
    /// Minimum detector confidence for a box to count.
    pub conf_min: f64,
    /// Dilation of target boxes in the gaze hit test, pixels.
    pub gaze_radius_px: f64,
    /// Longest gaze dropout that is held forward, milliseconds.
    pub max_gap_ms: i64,
    /// Sensing times at or above this are misses, milliseconds.
    pub max_st_ms: f64,
    /// Outlier rule: drop values above q3 + iqr_k * IQR.
    pub iqr_k: f64,
    /// Confidence level of the Tukey intervals.
    pub conf_level: f64,
    /// Significance threshold applied to the linear-model terms.
    pub glm_alpha: f64,
    /// Timestamp resolution feeding the Type B uncertainty, milliseconds.
    pub resolution_ms: f64,
    pub filter_order: FilterOrder,
    /// Seed for synthetic generation.
    pub seed: u64,
    /// Default input path (subcommand flags take precedence).
    pub input: Option<String>,
    /// Default output path (subcommand flags take precedence).
    pub output: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            debounce_frames: 2,
            conf_min: 0.25,
            gaze_radius_px: 0.0,
            max_gap_ms: 100,
            max_st_ms: 500.0,
            iqr_k: 3.0,
            conf_level: 0.95,
            glm_alpha: 0.001,
            resolution_ms: 20.0,
            filter_order: FilterOrder::MissFirst,
            seed: 0,
            input: None,
            output: None,
        }
    }
}

impl RunConfig {
    pub fn event_config(&self) -> crate::events::EventConfig {
        crate::events::EventConfig {
            debounce_frames: self.debounce_frames,
            conf_min: self.conf_min,
            gaze_radius_px: self.gaze_radius_px,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |key: &'static str, v: f64| {
            if v > 0.0 {
                Ok(())
            } else {
                Err(ConfigError::Invalid {
                    key,
                    msg: format!("must be positive, got {v}"),
                })
            }
        };
        if self.debounce_frames == 0 {
            return Err(ConfigError::Invalid {
                key: "debounce_frames",
                msg: "must be at least 1".into(),
            });
        }
        if !(0.0..=1.0).contains(&self.conf_min) {
            return Err(ConfigError::Invalid {
                key: "conf_min",
                msg: format!("must be in [0, 1], got {}", self.conf_min),
            });
        }
        if self.gaze_radius_px < 0.0 {
            return Err(ConfigError::Invalid {
                key: "gaze_radius_px",
                msg: "must be non-negative".into(),
            });
        }
        if self.max_gap_ms < 0 {
            return Err(ConfigError::Invalid {
                key: "max_gap_ms",
                msg: "must be non-negative".into(),
            });
        }
        positive("max_st_ms", self.max_st_ms)?;
        positive("iqr_k", self.iqr_k)?;
        positive("resolution_ms", self.resolution_ms)?;
        for (key, v) in [("conf_level", self.conf_level), ("glm_alpha", self.glm_alpha)] {
            if !(0.0 < v && v < 1.0) {
                return Err(ConfigError::Invalid {
                    key,
                    msg: format!("must be in (0, 1), got {v}"),
                });
            }
        }
        Ok(())
    }

    /// Serializes to the `key = value` file format. Numbers use the shortest
    /// representation that parses back to the same value, so a load of the
    /// output reproduces the config exactly.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("debounce_frames = {}\n", self.debounce_frames));
        out.push_str(&format!("conf_min = {}\n", self.conf_min));
        out.push_str(&format!("gaze_radius_px = {}\n", self.gaze_radius_px));
        out.push_str(&format!("max_gap_ms = {}\n", self.max_gap_ms));
        out.push_str(&format!("max_st_ms = {}\n", self.max_st_ms));
        out.push_str(&format!("iqr_k = {}\n", self.iqr_k));
        out.push_str(&format!("conf_level = {}\n", self.conf_level));
        out.push_str(&format!("glm_alpha = {}\n", self.glm_alpha));
        out.push_str(&format!("resolution_ms = {}\n", self.resolution_ms));
        out.push_str(&format!("filter_order = {}\n", self.filter_order));
        out.push_str(&format!("seed = {}\n", self.seed));
        if let Some(input) = &self.input {
            out.push_str(&format!("input = {input}\n"));
        }
        if let Some(output) = &self.output {
            out.push_str(&format!("output = {output}\n"));
        }
        out
    }

    pub fn from_file(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_str_named(&text, &path.display().to_string())
    }

    pub fn from_str_named(text: &str, path: &str) -> Result<RunConfig, ConfigError> {
        let mut cfg = RunConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |msg: String| ConfigError::Parse {
                path: path.to_string(),
                line: idx + 1,
                msg,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| parse_err("expected `key = value`".into()))?;
            let key = key.trim();
            let value = value.trim();
            let bad = |what: &str| parse_err(format!("bad {what} `{value}`"));
            match key {
                "debounce_frames" => cfg.debounce_frames = value.parse().map_err(|_| bad(key))?,
                "conf_min" => cfg.conf_min = value.parse().map_err(|_| bad(key))?,
                "gaze_radius_px" => cfg.gaze_radius_px = value.parse().map_err(|_| bad(key))?,
                "max_gap_ms" => cfg.max_gap_ms = value.parse().map_err(|_| bad(key))?,
                "max_st_ms" => cfg.max_st_ms = value.parse().map_err(|_| bad(key))?,
                "iqr_k" => cfg.iqr_k = value.parse().map_err(|_| bad(key))?,
                "conf_level" => cfg.conf_level = value.parse().map_err(|_| bad(key))?,
                "glm_alpha" => cfg.glm_alpha = value.parse().map_err(|_| bad(key))?,
                "resolution_ms" => cfg.resolution_ms = value.parse().map_err(|_| bad(key))?,
                "filter_order" => {
                    cfg.filter_order = FilterOrder::parse(value)
                        .ok_or_else(|| bad("filter_order (miss_first or iqr_first)"))?
                }
                "seed" => cfg.seed = value.parse().map_err(|_| bad(key))?,
                "input" => cfg.input = Some(value.to_string()),
                "output" => cfg.output = Some(value.to_string()),
                other => return Err(parse_err(format!("unknown key `{other}`"))),
            }
        }
        cfg.validate().map_err(|e| ConfigError::Parse {
            path: path.to_string(),
            line: 0,
            msg: e.to_string(),
        })?;
        Ok(cfg)
    }
}
