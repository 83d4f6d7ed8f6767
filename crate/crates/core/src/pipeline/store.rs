use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

const STATE_FILE: &str = "state.json";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
}

/// A run directory: write-once JSON artifacts plus one mutable state file.
#[derive(Debug, Clone)]
pub struct RunDir {
    root: PathBuf,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

impl RunDir {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(io_err(&root))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Stores `value` as `{stem}.{n}.json` under the smallest unused `n` and
    /// returns the artifact name. Existing artifacts are never rewritten.
    pub fn put<T: Serialize>(&self, stem: &str, value: &T) -> Result<String, StoreError> {
        let text = serde_json::to_string_pretty(value).map_err(|source| StoreError::Json { path: self.path(stem), source })?;
        if let Some(parent) = self.path(stem).parent() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        for n in 0.. {
            let name = format!("{stem}.{n}.json");
            let path = self.path(&name);
            match OpenOptions::new().write(true).create_new(true).open(&path) {
                Ok(mut f) => {
                    f.write_all(text.as_bytes()).map_err(io_err(&path))?;
                    return Ok(name);
                }
                Err(e) if e.kind() == io::ErrorKind::AlreadyExists => continue,
                Err(e) => return Err(StoreError::Io { path, source: e }),
            }
        }
        unreachable!("artifact numbering is unbounded")
    }

    pub fn get<T: DeserializeOwned>(&self, name: &str) -> Result<T, StoreError> {
        let path = self.path(name);
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        serde_json::from_str(&text).map_err(|source| StoreError::Json { path, source })
    }

    /// Replaces a plain output file such as a report.
    pub fn write(&self, name: &str, text: &str) -> Result<(), StoreError> {
        let path = self.path(name);
        let tmp = self.path(&format!("{name}.tmp"));
        fs::write(&tmp, text).map_err(io_err(&tmp))?;
        fs::rename(&tmp, &path).map_err(io_err(&path))
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), StoreError> {
        let text = serde_json::to_string_pretty(value).map_err(|source| StoreError::Json { path: self.path(name), source })?;
        self.write(name, &text)
    }

    pub fn save_state<T: Serialize>(&self, state: &T) -> Result<(), StoreError> {
        self.write_json(STATE_FILE, state)
    }

    pub fn load_state<T: DeserializeOwned>(&self) -> Result<Option<T>, StoreError> {
        if !self.path(STATE_FILE).exists() {
            return Ok(None);
        }
        self.get(STATE_FILE).map(Some)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn artifacts_are_never_overwritten() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = RunDir::create(tmp.path()).unwrap();
        let a = dir.put("intents/0/ir", &1).unwrap();
        let b = dir.put("intents/0/ir", &2).unwrap();
        assert_eq!((a.as_str(), b.as_str()), ("intents/0/ir.0.json", "intents/0/ir.1.json"));
        assert_eq!(dir.get::<i32>(&a).unwrap(), 1);
        assert_eq!(dir.get::<i32>(&b).unwrap(), 2);
    }

    #[test]
    fn state_round_trips() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = RunDir::create(tmp.path()).unwrap();
        assert_eq!(dir.load_state::<Vec<u8>>().unwrap(), None);
        dir.save_state(&vec![1u8, 2]).unwrap();
        dir.save_state(&vec![3u8]).unwrap();
        assert_eq!(dir.load_state::<Vec<u8>>().unwrap(), Some(vec![3]));
    }
}
