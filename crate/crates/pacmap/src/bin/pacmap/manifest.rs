//! Run manifests: a key=value echo of every flag, serialized alongside each
//! output artifact so runs can be reproduced.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

pub struct Manifest {
    entries: Vec<(String, String)>,
    started: Instant,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        let mut m = Self {
            entries: Vec::new(),
            started: Instant::now(),
        };
        m.push("format", "1");
        m.push("command", command);
        m.push("version", env!("CARGO_PKG_VERSION"));
        m
    }

    pub fn push(&mut self, key: &str, value: impl std::fmt::Display) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    /// Writes `<artifact>.manifest` next to the artifact, appending the
    /// elapsed wall-clock time.
    pub fn write_alongside(mut self, artifact: &Path) -> std::io::Result<()> {
        self.push("wall_time_s", format!("{:.3}", self.started.elapsed().as_secs_f64()));
        let mut path = artifact.as_os_str().to_owned();
        path.push(".manifest");
        let mut file = std::fs::File::create(path)?;
        for (k, v) in &self.entries {
            writeln!(file, "{k}={v}")?;
        }
        Ok(())
    }
}
