use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use crate::error::Result;
use crate::protocol::EnrollmentRecord;

/// Directory of `<record_id hex>.pufr` files.
///
/// Writes go through a temporary file and a rename, so readers never see a
/// partially written record.
#[derive(Debug)]
pub struct RecordStore {
    dir: PathBuf,
    lock: RwLock<()>,
}

impl RecordStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            lock: RwLock::new(()),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, record_id: &[u8; 16]) -> PathBuf {
        self.dir.join(format!("{}.pufr", hex::encode(record_id)))
    }

    pub fn put(&self, record: &EnrollmentRecord) -> Result<()> {
        let _guard = self.lock.write().unwrap_or_else(|e| e.into_inner());
        let path = self.path_for(&record.record_id);
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        fs::write(&tmp, record.to_bytes())?;
        fs::rename(&tmp, &path)?;
        Ok(())
    }

    /// `Ok(None)` when no record has that id.
    pub fn get(&self, record_id: &[u8; 16]) -> Result<Option<EnrollmentRecord>> {
        let _guard = self.lock.read().unwrap_or_else(|e| e.into_inner());
        let bytes = match fs::read(self.path_for(record_id)) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        Ok(Some(EnrollmentRecord::from_bytes(&bytes)?))
    }

    /// Ids of all stored records, sorted.
    pub fn list(&self) -> Result<Vec<[u8; 16]>> {
        let _guard = self.lock.read().unwrap_or_else(|e| e.into_inner());
        let mut ids = Vec::new();
        for entry in fs::read_dir(&self.dir)? {
            let name = entry?.file_name();
            let Some(stem) = name.to_str().and_then(|n| n.strip_suffix(".pufr")) else {
                continue;
            };
            let mut id = [0u8; 16];
            if hex::decode_to_slice(stem, &mut id).is_ok() {
                ids.push(id);
            }
        }
        ids.sort();
        Ok(ids)
    }
}
