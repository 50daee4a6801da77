//! Runs a directory of scenarios and compares each exit code with the one
//! the scenario declares.

use std::fs;
use std::path::{Path, PathBuf};

use crate::config::parse_config;
use crate::run::{run_scenario, CliError, RunOptions};

#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub name: String,
    pub exit_code: i32,
    pub expected: Option<i32>,
    pub message: String,
}

impl CorpusEntry {
    /// Matches the declared exit code; scenarios without one must pass.
    pub fn as_expected(&self) -> bool {
        self.exit_code == self.expected.unwrap_or(0)
    }
}

/// `*.toml` files in `dir`, sorted by name.
pub fn scenario_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let io = |source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    files.sort();
    Ok(files)
}

fn run_one(path: &Path, out: &Path) -> CorpusEntry {
    let name = path.file_stem().map_or("scenario".into(), |s| s.to_string_lossy().into_owned());
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(source) => {
            let e = CliError::Io {
                path: path.to_path_buf(),
                source,
            };
            return CorpusEntry {
                name,
                exit_code: e.exit_code(),
                expected: None,
                message: e.to_string(),
            };
        }
    };
    let cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(d) => {
            let e = CliError::Config(d);
            return CorpusEntry {
                name,
                exit_code: e.exit_code(),
                expected: None,
                message: e.to_string(),
            };
        }
    };
    // scenarios already run concurrently, so each battery stays sequential
    let mut opts = RunOptions::new(out.join(&name));
    opts.workers = 1;
    match run_scenario(&cfg, &opts) {
        Ok(rep) => CorpusEntry {
            name,
            exit_code: rep.exit_code,
            expected: cfg.expect_exit,
            message: rep.summary_lines().join("; "),
        },
        Err(e) => CorpusEntry {
            name,
            exit_code: e.exit_code(),
            expected: cfg.expect_exit,
            message: e.to_string(),
        },
    }
}

/// Runs every scenario in `dir` on up to `workers` threads, writing each
/// into `out/<file stem>/`. Results are in file-name order.
pub fn run_corpus(dir: &Path, out: &Path, workers: usize) -> Result<Vec<CorpusEntry>, CliError> {
    let files = scenario_files(dir)?;
    Ok(nhp_core::map_ordered(&files, workers, |_, path| run_one(path, out)))
}
