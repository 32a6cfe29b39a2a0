//! Pipeline configuration shared by the command-line tools. Defaults pin the
//! reference processing settings: 10 ms windows, 0.5 confidence floor,
//! NMS IoU 0.4, evaluation IoU {0.5, 0.7}, 25 px minimum height and the
//! 71/15/14 train/val/test ratio, so a bare invocation reproduces them.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pseudolabel::Alignment;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How a polarity grid becomes an 8-bit frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    /// Soft mapping centered at 128.
    Sigmoid,
    /// 255 wherever any event fired, else 0.
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub window_duration_us: u64,
    pub representation: Representation,
    pub confidence_threshold: f64,
    pub nms_iou: f64,
    pub eval_iou: Vec<f64>,
    pub min_height_px: f64,
    /// Train/val/test proportions; only ratios matter.
    pub split_ratios: [f64; 3],
    pub alignment: Alignment,
}

impl Default for PipelineConfig {
    fn default() -> PipelineConfig {
        PipelineConfig {
            window_duration_us: 10_000,
            representation: Representation::Sigmoid,
            confidence_threshold: 0.5,
            nms_iou: 0.4,
            eval_iou: vec![0.5, 0.7],
            min_height_px: 25.0,
            split_ratios: [71.0, 15.0, 14.0],
            alignment: Alignment::Preceding,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if self.window_duration_us == 0 {
            return Err(ConfigError::Invalid(
                "window_duration_us must be positive".into(),
            ));
        }
        if !unit(self.confidence_threshold) {
            return Err(ConfigError::Invalid(format!(
                "confidence_threshold {} outside [0,1]",
                self.confidence_threshold
            )));
        }
        if !unit(self.nms_iou) {
            return Err(ConfigError::Invalid(format!(
                "nms_iou {} outside [0,1]",
                self.nms_iou
            )));
        }
        if self.eval_iou.is_empty() || self.eval_iou.iter().any(|v| !unit(*v)) {
            return Err(ConfigError::Invalid(
                "eval_iou must be a non-empty list in [0,1]".into(),
            ));
        }
        if !(self.min_height_px.is_finite() && self.min_height_px >= 0.0) {
            return Err(ConfigError::Invalid(format!(
                "min_height_px {} must be non-negative",
                self.min_height_px
            )));
        }
        if self
            .split_ratios
            .iter()
            .any(|r| !(r.is_finite() && *r > 0.0))
        {
            return Err(ConfigError::Invalid(
                "split_ratios must all be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<PipelineConfig, ConfigError> {
        let cfg: PipelineConfig =
            serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<PipelineConfig, ConfigError> {
        PipelineConfig::from_json(&fs::read_to_string(path)?)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Writes the effective configuration next to a command's outputs.
    pub fn echo_into(&self, dir: &Path) -> Result<(), ConfigError> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("config.json"), self.to_json_pretty() + "\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_round_trip() {
        let cfg = PipelineConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.window_duration_us, 10_000);
        assert_eq!(cfg.confidence_threshold, 0.5);
        assert_eq!(cfg.nms_iou, 0.4);
        assert_eq!(cfg.eval_iou, vec![0.5, 0.7]);
        assert_eq!(cfg.min_height_px, 25.0);
        assert_eq!(cfg.split_ratios, [71.0, 15.0, 14.0]);
        assert_eq!(cfg.alignment, Alignment::Preceding);
        assert_eq!(cfg.representation, Representation::Sigmoid);
        let back = PipelineConfig::from_json(&cfg.to_json_pretty()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_json_fills_defaults() {
        let cfg = PipelineConfig::from_json(r#"{"representation": "binary"}"#).unwrap();
        assert_eq!(cfg.representation, Representation::Binary);
        assert_eq!(cfg.window_duration_us, 10_000);
    }

    #[test]
    fn bad_values_are_rejected() {
        for text in [
            r#"{"window_duration_us": 0}"#,
            r#"{"confidence_threshold": 1.5}"#,
            r#"{"nms_iou": -0.1}"#,
            r#"{"eval_iou": []}"#,
            r#"{"min_height_px": -2.0}"#,
            r#"{"split_ratios": [0.0, 15.0, 14.0]}"#,
            r#"{"representation": "heatmap"}"#,
        ] {
            assert!(PipelineConfig::from_json(text).is_err(), "accepted {text}");
        }
    }

    #[test]
    fn echo_writes_config_json() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("run");
        PipelineConfig::default().echo_into(&out).unwrap();
        let text = std::fs::read_to_string(out.join("config.json")).unwrap();
        let back = PipelineConfig::from_json(&text).unwrap();
        assert_eq!(back, PipelineConfig::default());
    }
}
