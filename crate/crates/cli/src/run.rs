//! Run directories, manifests and config files.

use std::fmt;
use std::fs;
use std::hash::Hasher;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use fnv::FnvHasher;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const OUTPUT_DIR_ENV: &str = "SAD_OUTPUT_DIR";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Bad flags, bad config keys and other mistakes the user can fix by
/// changing the invocation.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(UsageError(msg.into()).into())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: PathBuf,
    /// FNV-1a 64-bit hash of the file content, hex encoded.
    pub fnv64: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    /// Every argument after defaults and the config file were applied.
    pub args: Value,
    pub inputs: Vec<InputDigest>,
    /// Output files, relative to the run directory.
    pub artifacts: Vec<String>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }

    /// Fails if an input changed since the manifest was written.
    pub fn verify_inputs(&self) -> Result<()> {
        for input in &self.inputs {
            let now = digest_file(&input.path)?;
            if now.fnv64 != input.fnv64 {
                return Err(sad_core::SadError::ShapeMismatch(format!(
                    "{} changed since the run (digest {} now {})",
                    input.path.display(),
                    input.fnv64,
                    now.fnv64
                ))
                .into());
            }
        }
        Ok(())
    }
}

pub fn digest_file(path: &Path) -> Result<InputDigest> {
    let mut file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut hasher = FnvHasher::default();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.write(&buf[..n]);
    }
    Ok(InputDigest {
        path: path.to_path_buf(),
        fnv64: format!("{:016x}", hasher.finish()),
    })
}

/// Absolute form of an input path so manifests replay from any directory.
pub fn absolute(path: &Path) -> Result<PathBuf> {
    fs::canonicalize(path).with_context(|| format!("input {}", path.display()))
}

/// Base directory for runs: the environment variable wins over the flag.
pub fn output_base(flag: Option<&Path>) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => flag.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("runs")),
    }
}

pub struct RunDir {
    pub path: PathBuf,
}

impl RunDir {
    /// Creates `<base>/<command>-<seed>-<unix millis>`, adding a counter
    /// when two runs land on the same millisecond.
    pub fn create(base: &Path, command: &str, seed: u64) -> Result<Self> {
        fs::create_dir_all(base).with_context(|| format!("creating {}", base.display()))?;
        let millis = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis())
            .unwrap_or(0);
        let stem = format!("{command}-{seed}-{millis}");
        for attempt in 0.. {
            let name = if attempt == 0 { stem.clone() } else { format!("{stem}-{attempt}") };
            let path = base.join(name);
            match fs::create_dir(&path) {
                Ok(()) => return Ok(RunDir { path }),
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
                Err(e) => return Err(e).with_context(|| format!("creating {}", path.display())),
            }
        }
        unreachable!()
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<()> {
        let path = self.file(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
    }

    pub fn write_manifest(&self, manifest: &RunManifest) -> Result<()> {
        let mut text = serde_json::to_string_pretty(manifest)?;
        text.push('\n');
        self.write(MANIFEST_FILE, &text)
    }
}

/// Applies a flat `key = value` file on top of serialized arguments.
/// Values are read with the type the key already has.
pub fn apply_config(args: &mut Value, text: &str) -> Result<()> {
    let map = match args.as_object_mut() {
        Some(m) => m,
        None => return usage("arguments are not a key/value map"),
    };
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return usage(format!("config line {}: expected key=value, found {line:?}", n + 1));
        };
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        let Some(slot) = map.get_mut(&key) else {
            return usage(format!("config line {}: unknown key {key:?}", n + 1));
        };
        *slot = match parse_like(slot, value) {
            Some(v) => v,
            None => return usage(format!("config line {}: bad value {value:?} for {key}", n + 1)),
        };
    }
    Ok(())
}

fn parse_scalar(value: &str) -> Value {
    if let Ok(v) = value.parse::<u64>() {
        return Value::from(v);
    }
    if let Ok(v) = value.parse::<i64>() {
        return Value::from(v);
    }
    if let Ok(v) = value.parse::<f64>() {
        if let Some(n) = serde_json::Number::from_f64(v) {
            return Value::Number(n);
        }
    }
    if let Ok(v) = value.parse::<bool>() {
        return Value::Bool(v);
    }
    Value::String(value.to_string())
}

fn parse_like(current: &Value, value: &str) -> Option<Value> {
    match current {
        Value::Bool(_) => value.parse::<bool>().ok().map(Value::Bool),
        Value::Number(_) => match parse_scalar(value) {
            v @ Value::Number(_) => Some(v),
            _ => None,
        },
        Value::String(_) => Some(Value::String(value.to_string())),
        Value::Array(_) => Some(Value::Array(
            value
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(parse_scalar)
                .collect(),
        )),
        Value::Null => Some(parse_scalar(value)),
        Value::Object(_) => None,
    }
}
