//! Result files: a JSON envelope carrying the resolved configuration and
//! library version, plus plain CSV tables.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

#[derive(Debug, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub command: String,
    pub version: String,
    pub config: RunConfig,
    pub result: T,
}

pub fn result_path(dir: &Path, command: &str, kernel: &str, ext: &str) -> PathBuf {
    dir.join(format!("{command}-{kernel}.{ext}"))
}

pub fn write_json<T: Serialize>(dir: &Path, command: &str, config: &RunConfig, result: &T) -> anyhow::Result<PathBuf> {
    let env = Envelope {
        command: command.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        result,
    };
    let path = result_path(dir, command, &config.kernel, "json");
    fs::write(&path, serde_json::to_string_pretty(&env)? + "\n")?;
    Ok(path)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> anyhow::Result<Envelope<T>> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn write_csv(path: &Path, header: &str, rows: &[String]) -> anyhow::Result<()> {
    let mut text = String::from(header);
    text.push('\n');
    for r in rows {
        text.push_str(r);
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn num(x: f64) -> String {
    format!("{x:.17e}")
}
