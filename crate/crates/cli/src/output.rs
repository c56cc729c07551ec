//! CSV artifacts. Each file starts with a `#` comment line carrying the
//! configuration hash, the seed and the program version, then a header row.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

#[derive(Debug, Clone)]
pub struct Provenance {
    pub experiment: Option<String>,
    pub config_sha256: String,
    pub seed: u64,
}

impl Provenance {
    pub fn new(config_bytes: &[u8], seed: u64) -> Self {
        Self {
            experiment: None,
            config_sha256: hex::encode(Sha256::digest(config_bytes)),
            seed,
        }
    }

    pub fn with_experiment(mut self, experiment: Option<String>) -> Self {
        self.experiment = experiment;
        self
    }

    fn comment(&self) -> String {
        let experiment = self
            .experiment
            .as_ref()
            .map(|e| format!("experiment={e} "))
            .unwrap_or_default();
        format!(
            "# {experiment}config_sha256={} seed={} version={}",
            self.config_sha256,
            self.seed,
            env!("CARGO_PKG_VERSION")
        )
    }
}

pub struct OutputDir {
    dir: PathBuf,
    provenance: Provenance,
}

impl OutputDir {
    pub fn create(dir: &Path, provenance: Provenance) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            provenance,
        })
    }

    pub fn write<R, I>(&self, name: &str, header: &[&str], rows: R) -> io::Result<PathBuf>
    where
        R: IntoIterator<Item = I>,
        I: IntoIterator<Item = String>,
    {
        let path = self.dir.join(name);
        let mut file = BufWriter::new(File::create(&path)?);
        writeln!(file, "{}", self.provenance.comment())?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(path)
    }
}

/// Round-trippable, platform-independent float formatting.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}
