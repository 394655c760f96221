use std::path::{Path, PathBuf};
use std::time::Instant;

use idcenter::io::meta_path;
use idcenter::ErrorKind;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// Provenance record written next to every command's output.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command_line: Vec<String>,
    pub parameters: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub duration_seconds: f64,
}

pub struct Recorder {
    start: Instant,
    parameters: serde_json::Value,
    inputs: Vec<InputDigest>,
}

impl Recorder {
    pub fn new(parameters: serde_json::Value) -> Self {
        Self {
            start: Instant::now(),
            parameters,
            inputs: Vec::new(),
        }
    }

    /// Digests `path` and, when present, its metadata sidecar.
    pub fn input(&mut self, path: &Path) -> anyhow::Result<()> {
        self.digest(path)?;
        let meta = meta_path(path);
        if meta.exists() {
            self.digest(&meta)?;
        }
        Ok(())
    }

    fn digest(&mut self, path: &Path) -> anyhow::Result<()> {
        let bytes = std::fs::read(path).map_err(|e| idcenter::Error::Io {
            path: path.to_owned(),
            source: e,
        })?;
        self.inputs.push(InputDigest {
            path: path.to_owned(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        Ok(())
    }

    pub fn finish(self) -> RunManifest {
        RunManifest {
            tool: "idcenter",
            version: env!("CARGO_PKG_VERSION"),
            command_line: std::env::args().collect(),
            parameters: self.parameters,
            inputs: self.inputs,
            duration_seconds: self.start.elapsed().as_secs_f64(),
        }
    }
}

/// `path` with `suffix` appended to the full file name.
pub fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<idcenter::Error>().map(idcenter::Error::kind) {
        Some(ErrorKind::Usage) => 1,
        Some(ErrorKind::Numerical) => 3,
        Some(ErrorKind::Data) | None => 2,
    }
}
