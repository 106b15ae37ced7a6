//! Run manifest: resolved config, input and output hashes, seed and timing.
//!
//! Everything except the `wall_clock` block is a function of the config,
//! the input bytes and the seed.

use super::{unix_seconds, Member, RunConfig, RunInputs, RunResults};
use crate::pulse::CO2_PER_C;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::io::Read;
use std::path::Path;
use std::time::{Duration, SystemTime};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct FileHash {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct WallClock {
    pub started_unix_s: f64,
    pub finished_unix_s: f64,
    pub elapsed_s: f64,
    pub threads: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: RunConfig,
    pub inputs: Vec<FileHash>,
    pub seed: u64,
    pub ecs_draws: Vec<f64>,
    pub members: Vec<Member>,
    pub urban_threshold: f64,
    pub scenario_axis: String,
    /// tCO₂ per tC used to convert the pulse.
    pub co2_per_c: f64,
    pub warnings: Vec<String>,
    pub outputs: Vec<FileHash>,
    pub wall_clock: Option<WallClock>,
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let mut file = std::fs::File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

impl RunManifest {
    pub fn new(config: &RunConfig, inputs: &RunInputs, results: &RunResults, seed: u64, ecs_draws: &[f64]) -> std::io::Result<Self> {
        let hashes = config
            .input_files()
            .into_iter()
            .map(|(role, path)| {
                Ok(FileHash {
                    role: role.to_string(),
                    path: path.display().to_string(),
                    sha256: sha256_file(path)?,
                })
            })
            .collect::<std::io::Result<Vec<_>>>()?;
        Ok(Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            config: config.clone(),
            inputs: hashes,
            seed,
            ecs_draws: ecs_draws.to_vec(),
            members: results.members.clone(),
            urban_threshold: inputs.urban_threshold,
            scenario_axis: inputs.scenario.axis().to_string(),
            co2_per_c: CO2_PER_C,
            warnings: results.warnings.clone(),
            outputs: Vec::new(),
            wall_clock: None,
        })
    }

    pub fn record_outputs(&mut self, dir: &Path, names: &[String]) -> std::io::Result<()> {
        for name in names {
            self.outputs.push(FileHash {
                role: "report".to_string(),
                path: name.clone(),
                sha256: sha256_file(&dir.join(name))?,
            });
        }
        Ok(())
    }

    pub fn finish(&mut self, started: SystemTime, elapsed: Duration, threads: usize) {
        let started_unix_s = unix_seconds(started);
        self.wall_clock = Some(WallClock {
            started_unix_s,
            finished_unix_s: started_unix_s + elapsed.as_secs_f64(),
            elapsed_s: elapsed.as_secs_f64(),
            threads,
        });
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        text.push('\n');
        std::fs::write(path, text)
    }
}
