use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use super::{CompletionRecord, GatewayError};

/// Append-only line-delimited store of [`CompletionRecord`]s.
///
/// The whole file is indexed on open; the latest record for a key wins. A
/// line that fails to parse is skipped and remembered in
/// [`corrupt_lines`](Self::corrupt_lines) rather than poisoning the file.
pub struct CompletionCache {
    path: PathBuf,
    index: RwLock<HashMap<String, CompletionRecord>>,
    writer: Mutex<File>,
    corrupt: Vec<GatewayError>,
}

impl CompletionCache {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let path = path.as_ref().to_path_buf();
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(io_err(&path))?;
        }
        let mut index = HashMap::new();
        let mut corrupt = Vec::new();
        if path.exists() {
            let reader = BufReader::new(File::open(&path).map_err(io_err(&path))?);
            for (i, line) in reader.lines().enumerate() {
                let line = line.map_err(io_err(&path))?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<CompletionRecord>(&line) {
                    Ok(record) => {
                        index.insert(record.request_key.clone(), record);
                    }
                    Err(e) => corrupt.push(GatewayError::CacheCorrupt {
                        line: i + 1,
                        reason: e.to_string(),
                    }),
                }
            }
        }
        let writer = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io_err(&path))?;
        Ok(Self {
            path,
            index: RwLock::new(index),
            writer: Mutex::new(writer),
            corrupt,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn corrupt_lines(&self) -> &[GatewayError] {
        &self.corrupt
    }

    /// Errors with the first corrupt line, if any.
    pub fn verify(&self) -> Result<(), GatewayError> {
        match self.corrupt.first() {
            Some(e) => Err(e.clone()),
            None => Ok(()),
        }
    }

    pub fn len(&self) -> usize {
        self.index.read().expect("cache index lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, key: &str) -> Option<CompletionRecord> {
        self.index.read().expect("cache index lock").get(key).cloned()
    }

    pub fn put(&self, record: &CompletionRecord) -> Result<(), GatewayError> {
        let mut line = serde_json::to_string(record).map_err(|e| GatewayError::Io(e.to_string()))?;
        line.push('\n');
        {
            let mut writer = self.writer.lock().expect("cache writer lock");
            writer.write_all(line.as_bytes()).map_err(io_err(&self.path))?;
            writer.flush().map_err(io_err(&self.path))?;
        }
        self.index
            .write()
            .expect("cache index lock")
            .insert(record.request_key.clone(), record.clone());
        Ok(())
    }

    /// Truncates the backing file and empties the index.
    pub fn clear(&self) -> Result<(), GatewayError> {
        let writer = self.writer.lock().expect("cache writer lock");
        writer.set_len(0).map_err(io_err(&self.path))?;
        self.index.write().expect("cache index lock").clear();
        Ok(())
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> GatewayError + '_ {
    move |e| GatewayError::Io(format!("{}: {e}", path.display()))
}
