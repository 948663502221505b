//! Little-endian binary helpers for index snapshot files.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub(crate) struct SnapshotWriter {
    path: PathBuf,
    inner: BufWriter<File>,
}

impl SnapshotWriter {
    pub fn create(path: &Path, magic: &[u8; 8], version: u32) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = SnapshotWriter {
            path: path.to_path_buf(),
            inner: BufWriter::new(file),
        };
        w.bytes(magic)?;
        w.u32(version)?;
        Ok(w)
    }

    fn bytes(&mut self, b: &[u8]) -> Result<()> {
        self.inner.write_all(b).map_err(|e| Error::io(&self.path, e))
    }

    pub fn u32(&mut self, v: u32) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    pub fn u64(&mut self, v: u64) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    pub fn f32(&mut self, v: f32) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    pub fn f64(&mut self, v: f64) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    pub fn str(&mut self, s: &str) -> Result<()> {
        self.u32(s.len() as u32)?;
        self.bytes(s.as_bytes())
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub(crate) struct SnapshotReader {
    path: PathBuf,
    inner: BufReader<File>,
}

impl SnapshotReader {
    pub fn open(path: &Path, magic: &[u8; 8], version: u32) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = SnapshotReader {
            path: path.to_path_buf(),
            inner: BufReader::new(file),
        };
        let mut found = [0u8; 8];
        r.fill(&mut found)?;
        if &found != magic {
            return Err(r.bad("unrecognized file header"));
        }
        let v = r.u32()?;
        if v != version {
            return Err(r.bad(&format!("unsupported version {v} (expected {version})")));
        }
        Ok(r)
    }

    pub fn bad(&self, message: &str) -> Error {
        Error::Snapshot {
            path: self.path.clone(),
            message: message.to_string(),
        }
    }

    fn fill(&mut self, buf: &mut [u8]) -> Result<()> {
        self.inner
            .read_exact(buf)
            .map_err(|e| self.bad(&format!("truncated: {e}")))
    }

    pub fn u32(&mut self) -> Result<u32> {
        let mut b = [0u8; 4];
        self.fill(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    pub fn u64(&mut self) -> Result<u64> {
        let mut b = [0u8; 8];
        self.fill(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }

    pub fn f32(&mut self) -> Result<f32> {
        let mut b = [0u8; 4];
        self.fill(&mut b)?;
        Ok(f32::from_le_bytes(b))
    }

    pub fn f64(&mut self) -> Result<f64> {
        let mut b = [0u8; 8];
        self.fill(&mut b)?;
        Ok(f64::from_le_bytes(b))
    }

    pub fn str(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let mut buf = vec![0u8; len];
        self.fill(&mut buf)?;
        String::from_utf8(buf).map_err(|_| self.bad("invalid utf-8 string"))
    }

    /// Fails unless the file has been consumed exactly.
    pub fn expect_eof(mut self) -> Result<()> {
        let mut probe = [0u8; 1];
        match self.inner.read(&mut probe) {
            Ok(0) => Ok(()),
            Ok(_) => Err(self.bad("trailing bytes")),
            Err(e) => Err(Error::io(&self.path, e)),
        }
    }
}
