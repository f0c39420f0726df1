//! Run directories: `manifest.json` first, then the CSV artifacts.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use spme_core::{McEstimate, MoserLadder, ProblemSpec, RunConfig};

#[derive(Debug, Serialize)]
pub struct LadderSummary {
    pub mu_conj: f64,
    pub gamma_bar: f64,
    pub delta: f64,
    pub n0: usize,
    pub kappa: f64,
    pub theta: f64,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_path: String,
    /// SHA-256 of the configuration file bytes.
    pub spec_hash: String,
    pub seed: u64,
    pub threads: usize,
    pub config: RunConfig,
    pub ladder: Option<LadderSummary>,
    pub started_unix: u64,
    pub finished_unix: Option<u64>,
    pub status: &'static str,
    pub error: Option<String>,
    pub files: Vec<String>,
}

pub fn spec_hash(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

pub fn ladder_summary(spec: &ProblemSpec) -> Option<LadderSummary> {
    let l = MoserLadder::from_params(spec.dim(), spec.m_tilde(), spec.mu, spec.alpha).ok()?;
    Some(LadderSummary {
        mu_conj: l.mu_conj,
        gamma_bar: l.gamma_bar,
        delta: l.delta,
        n0: l.n0,
        kappa: l.kappa,
        theta: l.theta,
    })
}

pub struct RunDir {
    pub path: PathBuf,
    manifest: RunManifest,
}

impl RunDir {
    /// Creates `<root>/<command>-<hash>-s<seed>` and writes the manifest.
    pub fn create(root: &Path, command: &str, config_path: &Path, bytes: &[u8], config: RunConfig, seed: u64, threads: usize) -> Result<Self> {
        let hash = spec_hash(bytes);
        let path = root.join(format!("{command}-{}-s{seed}", &hash[..12]));
        fs::create_dir_all(&path).with_context(|| format!("creating {}", path.display()))?;
        let ladder = config.problem().ok().and_then(|s| ladder_summary(&s));
        let dir = RunDir {
            path,
            manifest: RunManifest {
                tool: "spme-lab",
                version: env!("CARGO_PKG_VERSION"),
                command: command.to_string(),
                config_path: config_path.display().to_string(),
                spec_hash: hash,
                seed,
                threads,
                config,
                ladder,
                started_unix: now(),
                finished_unix: None,
                status: "running",
                error: None,
                files: Vec::new(),
            },
        };
        dir.write_manifest()?;
        Ok(dir)
    }

    fn write_manifest(&self) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.manifest)?;
        fs::write(self.path.join("manifest.json"), text + "\n")?;
        Ok(())
    }

    /// Writes an artifact and lists it in the manifest.
    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<()> {
        fs::write(self.path.join(name), contents).with_context(|| format!("writing {name}"))?;
        self.manifest.files.push(name.to_string());
        self.write_manifest()
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        self.manifest.status = "complete";
        self.manifest.finished_unix = Some(now());
        self.write_manifest()?;
        Ok(self.path)
    }

    /// Marks the run as failed; files already written are partial.
    pub fn fail(mut self, err: &anyhow::Error) -> Result<()> {
        self.manifest.status = "failed";
        self.manifest.error = Some(format!("{err:#}"));
        self.manifest.finished_unix = Some(now());
        self.write_manifest()
    }
}

/// One row of `estimates.csv`.
pub struct EstimateRow<'a> {
    pub param: &'a str,
    pub value: f64,
    pub estimate: &'a McEstimate,
}

/// `param,value,statistic,alpha,samples,mean,stderr,ci_low,ci_high,seed,ratio`
/// with `ratio = mean / min(mean)` over the rows.
pub fn estimates_csv(rows: &[EstimateRow]) -> Vec<u8> {
    let min = rows.iter().map(|r| r.estimate.mean).fold(f64::INFINITY, f64::min);
    let mut out = Vec::new();
    writeln!(out, "param,value,statistic,alpha,samples,mean,stderr,ci_low,ci_high,seed,ratio").unwrap();
    for r in rows {
        let e = r.estimate;
        let ratio = if min > 0.0 { e.mean / min } else { f64::NAN };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.param, r.value, e.statistic, e.alpha, e.samples, e.mean, e.stderr, e.ci_low, e.ci_high, e.seed, ratio
        )
        .unwrap();
    }
    out
}

/// `path,param,value,statistic` with the per-path samples.
pub fn paths_csv(rows: &[EstimateRow]) -> Vec<u8> {
    let mut out = Vec::new();
    writeln!(out, "path,param,value,sample").unwrap();
    for r in rows {
        for (i, v) in r.estimate.values.iter().enumerate() {
            writeln!(out, "{i},{},{},{v}", r.param, r.value).unwrap();
        }
    }
    out
}
