//! Run configuration: a JSON file, patched by `--dotted.path value` flags.

use std::path::{Path, PathBuf};

use beatosc::beat_analysis::DesignSpec;
use beatosc::compensator::CompensatorParams;
use beatosc::time_sim::SimConfig;
use beatosc::CircuitParams;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Environment variable naming the output directory when neither the
/// command line nor the config sets one.
pub const OUT_DIR_ENV: &str = "BEATOSC_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    #[default]
    Both,
}

impl Format {
    pub fn csv(self) -> bool {
        self != Format::Json
    }

    pub fn json(self) -> bool {
        self != Format::Csv
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepOverride {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub f_b_min: f64,
    pub f_b_max: f64,
    pub points_per_decade: usize,
    pub overrides: Vec<SweepOverride>,
    /// Also run the full harmonic solve at each point.
    pub full_solve: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            f_b_min: 1e3,
            f_b_max: 90e3,
            points_per_decade: 50,
            overrides: Vec::new(),
            full_solve: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub circuit: CircuitParams,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub compensators: Option<CompensatorParams>,
    #[serde(default)]
    pub design: Option<DesignSpec>,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

impl RunConfig {
    /// Flag, then config, then environment, then `./out`.
    pub fn output_dir(&self, flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_path_buf)
            .or_else(|| self.output_dir.clone())
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}

/// Pulls `--a.b value` and `--a.b=value` pairs out of `args`, leaving the
/// rest for the regular parser.
pub fn split_overrides(args: Vec<String>) -> Result<(Vec<String>, Vec<(String, String)>), String> {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let Some(body) = arg.strip_prefix("--").filter(|b| b.contains('.') && !b.starts_with('.')) else {
            rest.push(arg);
            continue;
        };
        if let Some((path, value)) = body.split_once('=') {
            overrides.push((path.to_string(), value.to_string()));
        } else {
            let value = it.next().ok_or_else(|| format!("flag --{body} needs a value"))?;
            overrides.push((body.to_string(), value));
        }
    }
    Ok((rest, overrides))
}

/// Sets the field at a dotted path, creating intermediate objects. The
/// value is read as JSON when it parses, otherwise as a string.
pub fn apply_override(doc: &mut Value, path: &str, raw: &str) -> Result<(), String> {
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    let mut parts = path.split('.').peekable();
    while let Some(part) = parts.next() {
        if part.is_empty() {
            return Err(format!("empty segment in override path `{path}`"));
        }
        let obj = match node {
            Value::Object(map) => map,
            Value::Null => {
                *node = Value::Object(Default::default());
                node.as_object_mut().unwrap()
            }
            _ => return Err(format!("override path `{path}` runs through a non-object at `{part}`")),
        };
        if parts.peek().is_none() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj.entry(part.to_string()).or_insert(Value::Null);
    }
    Ok(())
}

pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<RunConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut doc: Value =
        serde_json::from_str(&text).map_err(|e| format!("{} is not valid JSON: {e}", path.display()))?;
    for (p, v) in overrides {
        apply_override(&mut doc, p, v)?;
    }
    serde_json::from_value(doc).map_err(|e| format!("config {}: {e}", path.display()))
}
