use serde::Serialize;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use crate::config::RunConfig;

/// What was run, with enough to reproduce it.
#[derive(Debug, Serialize)]
pub struct RunRecord<'a> {
    pub command: &'a str,
    pub args: Vec<String>,
    pub config_hash: String,
    pub seed: u64,
    pub started: String,
    pub nerboot_version: &'static str,
    pub provenance: String,
    pub config: &'a RunConfig,
}

/// `<runs_dir>/<UTC timestamp>-<first 12 hex digits of the config hash>`,
/// unless `explicit` names the directory.
pub fn run_dir(cfg: &RunConfig, hash: &str, explicit: Option<&Path>) -> PathBuf {
    match explicit {
        Some(p) => p.to_path_buf(),
        None => {
            let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%3fZ");
            cfg.runs_dir().join(format!("{stamp}-{}", &hash[..12]))
        }
    }
}

pub fn write_record(dir: &Path, record: &RunRecord) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)?;
    let json = serde_json::to_string_pretty(record)?;
    std::fs::write(dir.join("run.json"), json)?;
    Ok(())
}

/// Log sink that writes to stderr and, once a run directory exists, to
/// `run.log` inside it.
#[derive(Clone, Default)]
pub struct LogSink {
    file: Arc<Mutex<Option<File>>>,
}

impl LogSink {
    pub fn attach(&self, path: &Path) -> std::io::Result<()> {
        let f = File::create(path)?;
        *self.file.lock().unwrap_or_else(|e| e.into_inner()) = Some(f);
        Ok(())
    }
}

impl Write for LogSink {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        std::io::stderr().write_all(buf)?;
        if let Some(f) = self.file.lock().unwrap_or_else(|e| e.into_inner()).as_mut() {
            f.write_all(buf)?;
        }
        Ok(buf.len())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        if let Some(f) = self.file.lock().unwrap_or_else(|e| e.into_inner()).as_mut() {
            f.flush()?;
        }
        std::io::stderr().flush()
    }
}

pub fn init_logging(sink: LogSink) {
    let env = env_logger::Env::new().filter_or("NERBOOT_LOG", "info");
    let _ = env_logger::Builder::from_env(env)
        .target(env_logger::Target::Pipe(Box::new(sink)))
        .format_timestamp_secs()
        .try_init();
}
