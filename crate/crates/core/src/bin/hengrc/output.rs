//! Staged artifact writing. Nothing touches the output directory until every
//! artifact of a run has been produced in memory.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn record_input(path: &Path) -> io::Result<FileRecord> {
    let bytes = fs::read(path)?;
    Ok(FileRecord {
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
        bytes: bytes.len() as u64,
    })
}

#[derive(Default)]
pub struct Staged {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Staged {
    pub fn add(&mut self, path: PathBuf, bytes: Vec<u8>) {
        self.files.push((path, bytes));
    }

    pub fn records(&self) -> Vec<FileRecord> {
        self.files
            .iter()
            .map(|(p, b)| FileRecord {
                path: p.display().to_string(),
                sha256: sha256_hex(b),
                bytes: b.len() as u64,
            })
            .collect()
    }

    pub fn paths(&self) -> impl Iterator<Item = &Path> {
        self.files.iter().map(|(p, _)| p.as_path())
    }

    /// Writes every file through a temporary sibling and renames it into
    /// place. On failure the files already placed are removed again.
    pub fn commit(self) -> io::Result<()> {
        let mut placed: Vec<PathBuf> = Vec::new();
        let result = (|| {
            for (path, bytes) in &self.files {
                if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                    fs::create_dir_all(dir)?;
                }
                let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
                let tmp = path.with_file_name(format!(".{name}.{}.tmp", std::process::id()));
                if let Err(e) = fs::write(&tmp, bytes).and_then(|_| fs::rename(&tmp, path)) {
                    let _ = fs::remove_file(&tmp);
                    return Err(e);
                }
                placed.push(path.clone());
            }
            Ok(())
        })();
        if result.is_err() {
            for p in placed {
                let _ = fs::remove_file(p);
            }
        }
        result
    }
}
