use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use oneshot_core::experiments::{Checkpoint, RatePoint, StateStats};
use oneshot_core::objective::OptState;
use oneshot_core::optim::IterRecord;
use serde::Serialize;

/// Output directory; created on first use.
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn new(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self { root })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn csv(&self, name: &str) -> Result<csv::Writer<File>> {
        let p = self.path(name);
        csv::Writer::from_path(&p).with_context(|| format!("creating {}", p.display()))
    }

    pub fn json(&self, name: &str, value: &impl Serialize) -> Result<PathBuf> {
        let p = self.path(name);
        let mut w = BufWriter::new(File::create(&p).with_context(|| format!("creating {}", p.display()))?);
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(p)
    }

    pub fn rate_curve(&self, name: &str, points: &[RatePoint]) -> Result<PathBuf> {
        let mut w = self.csv(name)?;
        w.write_record(["abscissa", "squared_error_control", "squared_error_theta"])?;
        for p in points {
            w.serialize((p.abscissa, p.squared_error_control, p.squared_error_theta))?;
        }
        w.flush()?;
        Ok(self.path(name))
    }

    pub fn checkpoints(&self, name: &str, rows: &[Checkpoint]) -> Result<PathBuf> {
        let mut w = self.csv(name)?;
        for c in rows {
            w.serialize(c)?;
        }
        w.flush()?;
        Ok(self.path(name))
    }

    /// The iteration log; `distance` is empty when no reference was given.
    pub fn penalty_log(&self, name: &str, log: &[IterRecord]) -> Result<PathBuf> {
        let mut w = self.csv(name)?;
        w.write_record(["k", "beta", "lambda", "objective", "distance"])?;
        for r in log {
            w.serialize((r.k, r.beta, r.lambda, r.objective, r.distance))?;
        }
        w.flush()?;
        Ok(self.path(name))
    }

    pub fn state_stats(&self, name: &str, st: &StateStats) -> Result<PathBuf> {
        let mut w = self.csv(name)?;
        w.write_record(["x1", "x2", "mean", "std_dev"])?;
        for ((p, m), s) in st.coordinates.iter().zip(&st.mean).zip(&st.std_dev) {
            w.serialize((p[0], p[1], m, s))?;
        }
        w.flush()?;
        Ok(self.path(name))
    }

    pub fn state(&self, name: &str, x: &OptState, flattening: &str) -> Result<PathBuf> {
        self.json(name, &StateFile::new(x, flattening))
    }
}

/// `θ` and `z` with the layout of `θ` spelled out.
#[derive(Debug, Serialize, serde::Deserialize, PartialEq)]
pub struct StateFile {
    pub flattening: String,
    pub n_dof: usize,
    pub param_count: usize,
    pub z: Vec<f64>,
    pub theta: Vec<f64>,
}

impl StateFile {
    pub fn new(x: &OptState, flattening: &str) -> Self {
        Self {
            flattening: flattening.to_string(),
            n_dof: x.z.len(),
            param_count: x.theta.len(),
            z: x.z.clone(),
            theta: x.theta.clone(),
        }
    }
}

pub fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}
