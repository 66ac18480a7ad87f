use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use nfp_core::store;

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_files(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

/// SHA-256 of a file, or of every file under a directory in path order.
pub fn digest_path(path: &Path) -> anyhow::Result<String> {
    let mut h = Sha256::new();
    if path.is_dir() {
        let mut files = Vec::new();
        collect_files(path, &mut files)
            .map_err(|e| nfp_core::Error::Io { path: path.to_path_buf(), source: e })?;
        files.sort();
        for f in files {
            let rel = f.strip_prefix(path).unwrap_or(&f);
            h.update(rel.to_string_lossy().as_bytes());
            h.update([0]);
            h.update(read(&f)?);
        }
    } else {
        h.update(read(path)?);
    }
    Ok(hex(&h.finalize()))
}

fn read(path: &Path) -> anyhow::Result<Vec<u8>> {
    Ok(fs::read(path).map_err(|e| nfp_core::Error::Io { path: path.to_path_buf(), source: e })?)
}

#[derive(Serialize)]
struct RunConfig<'a, C: Serialize> {
    subcommand: &'a str,
    seed: u64,
    threads: usize,
    command: &'a C,
}

#[derive(Serialize)]
struct RunManifest<'a, C: Serialize> {
    tool_version: &'static str,
    config: RunConfig<'a, C>,
    inputs: &'a BTreeMap<String, String>,
    outputs: &'a [String],
    duration_ms: u128,
}

/// Inputs, outputs and timing of one subcommand run.
pub struct RunLog {
    name: &'static str,
    seed: u64,
    threads: usize,
    started: Instant,
    inputs: BTreeMap<String, String>,
    outputs: Vec<String>,
}

impl RunLog {
    pub fn new(name: &'static str, seed: u64, threads: usize) -> Self {
        RunLog {
            name,
            seed,
            threads,
            started: Instant::now(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> anyhow::Result<()> {
        let digest = digest_path(path)?;
        self.inputs.insert(path.display().to_string(), digest);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    /// Write `<name>.run_config.json` and `<name>.run_manifest.json` to `dir`.
    /// The config file depends only on the arguments; the manifest adds
    /// digests, outputs and wall time.
    pub fn finish<C: Serialize>(mut self, dir: &Path, command: &C) -> anyhow::Result<()> {
        let config_path = dir.join(format!("{}.run_config.json", self.name));
        let manifest_path = dir.join(format!("{}.run_manifest.json", self.name));
        self.output(&config_path);
        let config = RunConfig {
            subcommand: self.name,
            seed: self.seed,
            threads: self.threads,
            command,
        };
        store::write_json(&config_path, &config)?;
        let manifest = RunManifest {
            tool_version: env!("CARGO_PKG_VERSION"),
            config,
            inputs: &self.inputs,
            outputs: &self.outputs,
            duration_ms: self.started.elapsed().as_millis(),
        };
        store::write_json(&manifest_path, &manifest)?;
        log::info!(
            "{} finished in {} ms; {} output file(s)",
            self.name,
            manifest.duration_ms,
            self.outputs.len()
        );
        Ok(())
    }
}
