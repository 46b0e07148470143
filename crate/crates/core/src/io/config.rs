//! TOML run configuration.
//!
//! ```toml
//! [codec]
//! method = "mgar"        # regression | csl | dcl-binary | dcl-gray | mgar
//! c_theta = 3            # default depends on the method
//! window_size = 6.0      # csl only
//! fit = "square"         # linear | sigmoid | square | exp
//!
//! [loss]
//! weights = [2.0, 2.0, 5.0, 2.0, 0.5]
//!
//! [eval]
//! thresholds = [0.5, 0.75, 0.85]
//! mode = "voc12"         # voc07 | voc12
//! nms_threshold = 0.1
//!
//! [paths]                # relative to the config file
//! ground_truth = "labels/"
//! detections = "dets.json"
//! output = "report.json"
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::codec::{CodecConfig, FitFunction, Method};
use crate::error::{Error, Result};
use crate::eval::{default_thresholds, ApMode};
use crate::loss::LossWeights;

pub const DEFAULT_NMS_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunPaths {
    pub ground_truth: Option<PathBuf>,
    pub detections: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub codec: CodecConfig,
    pub loss_weights: LossWeights,
    pub thresholds: Vec<f64>,
    pub nms_threshold: f64,
    pub mode: ApMode,
    pub paths: RunPaths,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            codec: CodecConfig::default_for(Method::Mgar),
            loss_weights: LossWeights::default(),
            thresholds: default_thresholds(),
            nms_threshold: DEFAULT_NMS_THRESHOLD,
            mode: ApMode::Voc12,
            paths: RunPaths::default(),
        }
    }
}

const KNOWN_KEYS: &[(&str, &[&str])] = &[
    ("codec", &["method", "c_theta", "window_size", "fit"]),
    ("loss", &["weights"]),
    ("eval", &["thresholds", "mode", "nms_threshold"]),
    ("paths", &["ground_truth", "detections", "output"]),
];

#[derive(Deserialize, Default)]
struct RawConfig {
    #[serde(default)]
    codec: RawCodec,
    #[serde(default)]
    loss: RawLoss,
    #[serde(default)]
    eval: RawEval,
    #[serde(default)]
    paths: RawPaths,
}

#[derive(Deserialize, Default)]
struct RawCodec {
    method: Option<String>,
    c_theta: Option<i64>,
    window_size: Option<f64>,
    fit: Option<String>,
}

#[derive(Deserialize, Default)]
struct RawLoss {
    weights: Option<Vec<f64>>,
}

#[derive(Deserialize, Default)]
struct RawEval {
    thresholds: Option<Vec<f64>>,
    mode: Option<String>,
    nms_threshold: Option<f64>,
}

#[derive(Deserialize, Default)]
struct RawPaths {
    ground_truth: Option<PathBuf>,
    detections: Option<PathBuf>,
    output: Option<PathBuf>,
}

fn unknown_keys(table: &toml::Table) -> Vec<String> {
    let mut unknown = Vec::new();
    for (key, value) in table {
        match KNOWN_KEYS.iter().find(|(k, _)| k == key) {
            None => unknown.push(key.clone()),
            Some((_, fields)) => match value.as_table() {
                Some(sub) => unknown.extend(
                    sub.keys()
                        .filter(|f| !fields.contains(&f.as_str()))
                        .map(|f| format!("{key}.{f}")),
                ),
                None => unknown.push(key.clone()),
            },
        }
    }
    unknown
}

fn field_error(field: &str, e: impl std::fmt::Display) -> Error {
    Error::Config(format!("{field}: {e}"))
}

impl RunConfig {
    /// Parses TOML text; relative paths resolve against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e| Error::Config(format!("{e}")))?;
        let unknown = unknown_keys(&table);
        if !unknown.is_empty() {
            return Err(Error::Config(format!(
                "unknown keys: {}",
                unknown.join(", ")
            )));
        }
        let raw: RawConfig = table
            .try_into()
            .map_err(|e| Error::Config(format!("{e}")))?;
        let mut cfg = RunConfig::default();

        let method = match raw.codec.method {
            Some(m) => m
                .parse::<Method>()
                .map_err(|e| field_error("codec.method", e))?,
            None => Method::Mgar,
        };
        let c_theta = match raw.codec.c_theta {
            Some(c) => u32::try_from(c).map_err(|_| {
                field_error(
                    "codec.c_theta",
                    format!("expected a positive integer, got {c}"),
                )
            })?,
            None => method.default_c_theta(),
        };
        let mut codec =
            CodecConfig::new(method, c_theta).map_err(|e| field_error("codec.c_theta", e))?;
        if let Some(w) = raw.codec.window_size {
            codec = codec
                .with_window(w)
                .map_err(|e| field_error("codec.window_size", e))?;
        }
        if let Some(f) = raw.codec.fit {
            codec = codec.with_fit(
                f.parse::<FitFunction>()
                    .map_err(|e| field_error("codec.fit", e))?,
            );
        }
        cfg.codec = codec;

        if let Some(w) = raw.loss.weights {
            let arr: [f64; 5] = w.as_slice().try_into().map_err(|_| {
                field_error(
                    "loss.weights",
                    format!("expected 5 weights, got {}", w.len()),
                )
            })?;
            cfg.loss_weights = LossWeights::new(arr).map_err(|e| field_error("loss.weights", e))?;
        }

        if let Some(t) = raw.eval.thresholds {
            if t.is_empty() || t.iter().any(|x| !(*x > 0.0 && *x <= 1.0)) {
                return Err(field_error(
                    "eval.thresholds",
                    "expected a non-empty list of values in (0, 1]",
                ));
            }
            cfg.thresholds = t;
        }
        if let Some(m) = raw.eval.mode {
            cfg.mode = m.parse().map_err(|e| field_error("eval.mode", e))?;
        }
        if let Some(n) = raw.eval.nms_threshold {
            if !(0.0..=1.0).contains(&n) {
                return Err(field_error(
                    "eval.nms_threshold",
                    format!("expected a value in [0, 1], got {n}"),
                ));
            }
            cfg.nms_threshold = n;
        }

        let resolve = |p: PathBuf| if p.is_absolute() { p } else { base_dir.join(p) };
        cfg.paths = RunPaths {
            ground_truth: raw.paths.ground_truth.map(resolve),
            detections: raw.paths.detections.map(resolve),
            output: raw.paths.output.map(resolve),
        };
        for (field, p) in [
            ("paths.ground_truth", &cfg.paths.ground_truth),
            ("paths.detections", &cfg.paths.detections),
        ] {
            if let Some(p) = p {
                if !p.exists() {
                    return Err(field_error(
                        field,
                        format!("{} does not exist", p.display()),
                    ));
                }
            }
        }
        if let Some(out) = &cfg.paths.output {
            let parent = out
                .parent()
                .filter(|p| !p.as_os_str().is_empty())
                .unwrap_or(Path::new("."));
            if !parent.is_dir() {
                return Err(field_error(
                    "paths.output",
                    format!("directory {} does not exist", parent.display()),
                ));
            }
        }
        Ok(cfg)
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    RunConfig::from_toml_str(&text, base)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<RunConfig> {
        RunConfig::from_toml_str(s, Path::new("."))
    }

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = parse("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.codec.method(), Method::Mgar);
        assert_eq!(cfg.codec.c_theta(), 3);
        assert_eq!(cfg.codec.fit(), FitFunction::Square);
        assert_eq!(cfg.loss_weights.as_array(), [2.0, 2.0, 5.0, 2.0, 0.5]);
        assert_eq!(cfg.thresholds.len(), 10);
        assert_eq!(cfg.nms_threshold, 0.1);
        assert_eq!(cfg.mode, ApMode::Voc12);
    }

    #[test]
    fn full_override() {
        let cfg = parse(
            r#"
            [codec]
            method = "csl"
            window_size = 4.5
            fit = "linear"
            [loss]
            weights = [1.0, 1.0, 1.0, 1.0, 1.0]
            [eval]
            thresholds = [0.5, 0.7]
            mode = "voc07"
            nms_threshold = 0.3
            "#,
        )
        .unwrap();
        assert_eq!(cfg.codec.method(), Method::Csl);
        assert_eq!(cfg.codec.c_theta(), 180);
        assert_eq!(cfg.codec.window_size(), 4.5);
        assert_eq!(cfg.codec.fit(), FitFunction::Linear);
        assert_eq!(cfg.loss_weights.as_array(), [1.0; 5]);
        assert_eq!(cfg.thresholds, vec![0.5, 0.7]);
        assert_eq!(cfg.mode, ApMode::Voc07);
        assert_eq!(cfg.nms_threshold, 0.3);
    }

    #[test]
    fn unknown_keys_are_listed() {
        let err =
            parse("extra = 1\n[codec]\nmethod = \"mgar\"\ncolour = 2\n[eval]\nthreshold = 0.5\n")
                .unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("extra") && msg.contains("codec.colour") && msg.contains("eval.threshold"),
            "{msg}"
        );
    }

    #[test]
    fn mgar_divisibility() {
        let err = parse("[codec]\nmethod = \"mgar\"\nc_theta = 7\n").unwrap_err();
        assert!(err.to_string().contains("divide 180"), "{err}");
    }

    #[test]
    fn invalid_values_name_domain() {
        assert!(parse("[eval]\nmode = \"coco\"\n")
            .unwrap_err()
            .to_string()
            .contains("voc07 or voc12"));
        assert!(parse("[eval]\nnms_threshold = 2.0\n").is_err());
        assert!(parse("[loss]\nweights = [1.0]\n").is_err());
        assert!(parse("[codec]\nc_theta = -3\n").is_err());
    }

    #[test]
    fn missing_input_path() {
        let err = parse("[paths]\nground_truth = \"/no/such/dir\"\n").unwrap_err();
        assert!(err.to_string().contains("paths.ground_truth"));
    }
}
