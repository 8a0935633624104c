//! On-disk artifacts of a run: per-round checkpoints, the per-ant stats CSV
//! and the final `best.json`.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::{AntRecord, RunConfig, SearchObserver, SearchState};
use crate::space::{ArchitectureDescriptor, SearchSpace};

pub const STATS_FILE: &str = "stats.csv";
pub const BEST_FILE: &str = "best.json";
pub const SWEEP_FILE: &str = "sweep.csv";

pub fn checkpoint_path(dir: &Path, round: usize) -> PathBuf {
    dir.join(format!("checkpoint_round_{round}.json"))
}

/// Checkpoint with the highest round number in `dir`.
pub fn latest_checkpoint(dir: &Path) -> io::Result<Option<PathBuf>> {
    let mut best: Option<(usize, PathBuf)> = None;
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let round = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("checkpoint_round_"))
            .and_then(|n| n.strip_suffix(".json"))
            .and_then(|n| n.parse::<usize>().ok());
        if let Some(round) = round {
            if best.as_ref().is_none_or(|(r, _)| round > *r) {
                best = Some((round, path));
            }
        }
    }
    Ok(best.map(|(_, p)| p))
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("json.tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(tmp, path)
}

/// Observer that streams stats rows and writes one checkpoint per round.
pub struct RunDirectory {
    dir: PathBuf,
    stats: csv::Writer<File>,
}

impl RunDirectory {
    /// Opens `dir` for output, creating it if needed. An existing
    /// `stats.csv` is appended to without repeating the header.
    pub fn open(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        let path = dir.join(STATS_FILE);
        let existing = path.exists() && fs::metadata(&path)?.len() > 0;
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        let stats = csv::WriterBuilder::new()
            .has_headers(!existing)
            .from_writer(file);
        Ok(Self {
            dir: dir.to_path_buf(),
            stats,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

impl SearchObserver for RunDirectory {
    fn on_ant(&mut self, record: &AntRecord) -> Result<(), String> {
        self.stats.serialize(record).map_err(|e| e.to_string())?;
        self.stats.flush().map_err(|e| e.to_string())
    }

    fn on_round(&mut self, state: &SearchState) -> Result<(), String> {
        write_atomic(
            &checkpoint_path(&self.dir, state.round),
            state.to_json().as_bytes(),
        )
        .map_err(|e| e.to_string())
    }
}

/// Contents of `best.json`: enough to reproduce and inspect the winner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BestReport {
    pub descriptor: ArchitectureDescriptor,
    pub architecture: String,
    pub score: f64,
    pub evaluations: u64,
    pub seed: u64,
    pub config: RunConfig,
}

impl BestReport {
    /// Builds the report from a finished state. `None` before the first
    /// round completes.
    pub fn from_state(state: &SearchState, space: &SearchSpace) -> Option<Self> {
        let best = state.incumbent.as_ref()?;
        Some(Self {
            architecture: best
                .descriptor
                .canonical_string(space)
                .unwrap_or_else(|_| best.descriptor.prefix_key(best.descriptor.len())),
            descriptor: best.descriptor.clone(),
            score: best.accuracy().unwrap_or(0.0),
            evaluations: state.evaluations,
            seed: state.config.seed,
            config: state.config.clone(),
        })
    }

    pub fn write(&self, dir: &Path) -> io::Result<()> {
        let text = serde_json::to_string_pretty(self).expect("report serializes");
        write_atomic(&dir.join(BEST_FILE), text.as_bytes())
    }
}
