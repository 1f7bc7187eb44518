//! On-disk layout of a training run.
//!
//! ```text
//! <run>/manifest.json
//! <run>/epochs.jsonl            one EpochLog per line
//! <run>/summary.json
//! <run>/samples-epoch-{t}.csv
//! <run>/snapshots/{role}-{id}.json
//! ```

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::data::{write_samples_csv, CoverageReport, Prng};
use crate::do_loop::{EpochLog, EpochView, Observer};
use crate::error::{Error, Result};
use crate::meta_game::MixedStrategy;
use crate::neural::{NetworkSnapshot, Role};
use crate::oracles::sample_generator_mixture;
use crate::scalar::Scalar;

pub const MANIFEST: &str = "manifest.json";
pub const EPOCHS: &str = "epochs.jsonl";
pub const SUMMARY: &str = "summary.json";
pub const SNAPSHOTS: &str = "snapshots";

pub fn samples_file(t: usize) -> String {
    format!("samples-epoch-{t}.csv")
}

/// Final state of a run, enough to rebuild the generator mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    /// `converged`, `max_epochs` or `completed` (fixed-budget baselines).
    pub status: String,
    pub variant: String,
    pub epochs: usize,
    pub generator_updates: usize,
    /// Equilibrium value; absent for baselines without a meta-game.
    pub value: Option<f64>,
    pub support_g: Vec<u64>,
    pub support_d: Vec<u64>,
    pub sigma_g: Vec<f64>,
    pub sigma_d: Vec<f64>,
    pub modes_recovered: Option<usize>,
    pub coverage: Option<CoverageReport>,
}

/// Writer for a run directory; also persists snapshots as an [`Observer`].
#[derive(Debug)]
pub struct RunDir {
    root: PathBuf,
    epochs: BufWriter<File>,
    /// Write mixture samples every this many epochs (0 disables).
    pub samples_every: usize,
    pub samples: usize,
    pub sample_seed: u64,
}

impl RunDir {
    /// Creates the directory. An existing non-empty directory is an error
    /// unless `force`, in which case it is replaced.
    pub fn create(root: &Path, force: bool) -> Result<Self> {
        if root.exists() && fs::read_dir(root)?.next().is_some() {
            if !force {
                return Err(Error::Config(format!(
                    "{} already exists and is not empty",
                    root.display()
                )));
            }
            fs::remove_dir_all(root)?;
        }
        fs::create_dir_all(root.join(SNAPSHOTS))?;
        let epochs = BufWriter::new(File::create(root.join(EPOCHS))?);
        Ok(Self {
            root: root.to_path_buf(),
            epochs,
            samples_every: 0,
            samples: 512,
            sample_seed: 0,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write_manifest<M: Serialize>(&self, manifest: &M) -> Result<()> {
        write_json(&self.root.join(MANIFEST), manifest)
    }

    pub fn write_summary(&mut self, summary: &Summary) -> Result<()> {
        self.epochs.flush()?;
        write_json(&self.root.join(SUMMARY), summary)
    }

    /// Writes `n` samples of the generator mixture to
    /// `samples-epoch-{t}.csv`.
    pub fn write_samples<T: Scalar>(
        &self,
        t: usize,
        generators: &[NetworkSnapshot<T>],
        sigma_g: &MixedStrategy<T>,
    ) -> Result<()> {
        let mut rng = Prng::seed_from_u64(self.sample_seed ^ t as u64);
        let xs = sample_generator_mixture(generators, sigma_g, self.samples, &mut rng)?;
        let mut w = BufWriter::new(File::create(self.root.join(samples_file(t)))?);
        write_samples_csv(&mut w, xs.view(), None)?;
        w.flush()?;
        Ok(())
    }

    /// Appends one line to `epochs.jsonl`.
    pub fn log_epoch(&mut self, log: &EpochLog) -> Result<()> {
        serde_json::to_writer(&mut self.epochs, log)?;
        self.epochs.write_all(b"\n")?;
        self.epochs.flush()?;
        Ok(())
    }
}

fn write_json<V: Serialize>(path: &Path, value: &V) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Makes `dir` hold exactly the given snapshots and returns the number of
/// snapshot files present afterwards.
pub fn sync_snapshot_dir<T: Scalar>(dir: &Path, keep: &[&NetworkSnapshot<T>]) -> Result<usize> {
    let wanted: BTreeSet<String> = keep.iter().map(|s| s.file_name()).collect();
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.ends_with(".json") && !wanted.contains(&name) {
            fs::remove_file(entry.path())?;
        }
    }
    for snap in keep {
        let path = dir.join(snap.file_name());
        if !path.exists() {
            snap.save(&path)?;
        }
    }
    count_snapshots(dir)
}

pub fn count_snapshots(dir: &Path) -> Result<usize> {
    let mut n = 0;
    for entry in fs::read_dir(dir)? {
        if entry?.file_name().to_string_lossy().ends_with(".json") {
            n += 1;
        }
    }
    Ok(n)
}

impl<T: Scalar> Observer<T> for RunDir {
    fn sync_snapshots(
        &mut self,
        generators: &[NetworkSnapshot<T>],
        discriminators: &[NetworkSnapshot<T>],
    ) -> Result<usize> {
        let keep: Vec<&NetworkSnapshot<T>> = generators.iter().chain(discriminators).collect();
        sync_snapshot_dir(&self.root.join(SNAPSHOTS), &keep)
    }

    fn on_epoch(&mut self, view: &EpochView<'_, T>) -> Result<()> {
        self.log_epoch(view.log)?;
        let t = view.log.t;
        if self.samples_every > 0 && (t.is_multiple_of(self.samples_every) || view.log.converged) {
            self.write_samples(t, view.generators, &view.solution.sigma_g)?;
        }
        Ok(())
    }
}

/// A finished run read back from disk.
#[derive(Debug, Clone)]
pub struct LoadedRun<T: Scalar> {
    pub summary: Summary,
    pub generators: Vec<NetworkSnapshot<T>>,
    pub sigma_g: MixedStrategy<T>,
}

/// Reads `summary.json` and the generator snapshots it names.
pub fn load_run<T: Scalar>(root: &Path) -> Result<LoadedRun<T>> {
    let summary: Summary = serde_json::from_slice(&fs::read(root.join(SUMMARY))?)?;
    let generators = summary
        .support_g
        .iter()
        .map(|&id| {
            let snap =
                NetworkSnapshot::load(&root.join(SNAPSHOTS).join(NetworkSnapshot::<T>::file_name_for(Role::Generator, id)))?;
            snap.expect_role(Role::Generator)?;
            Ok(snap)
        })
        .collect::<Result<Vec<_>>>()?;
    let sigma_g = MixedStrategy::new(summary.sigma_g.iter().map(|&p| T::of(p)).collect())?;
    if sigma_g.len() != generators.len() {
        return Err(Error::Dimension(format!(
            "summary lists {} generators but {} probabilities",
            generators.len(),
            sigma_g.len()
        )));
    }
    Ok(LoadedRun {
        summary,
        generators,
        sigma_g,
    })
}

/// Reads every line of `epochs.jsonl`.
pub fn read_epochs(root: &Path) -> Result<Vec<EpochLog>> {
    fs::read_to_string(root.join(EPOCHS))?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}
