//! On-disk cache of kinetic solutions keyed by a hash of the inputs that determine them.

use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use topochaos::kinetic::io::{read_solution, write_solution};
use topochaos::kinetic::KineticSolution;
use topochaos::particle::InitialLawSpec;
use topochaos::topo::KernelSpec;

use crate::config::{ExperimentConfig, KineticConfig};
use crate::error::Result;

#[derive(Serialize)]
struct KineticKey<'a> {
    kernel: &'a KernelSpec,
    initial: &'a InitialLawSpec,
    grid: &'a KineticConfig,
    horizon: f64,
}

/// Hex SHA-256 of the canonical JSON of the kernel, initial law, grid and horizon.
pub fn cache_key(cfg: &ExperimentConfig) -> String {
    let key = KineticKey {
        kernel: &cfg.kernel,
        initial: &cfg.initial,
        grid: &cfg.kinetic,
        horizon: cfg.horizon,
    };
    let json = serde_json::to_vec(&key).expect("key serializes");
    Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheStatus {
    Hit,
    Miss,
}

#[derive(Debug, Clone)]
pub struct KineticCache {
    dir: PathBuf,
}

impl KineticCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        KineticCache { dir: dir.into() }
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("kinetic-{key}.bin"))
    }

    pub fn load(&self, key: &str) -> Result<Option<KineticSolution>> {
        let path = self.path_for(key);
        if !path.exists() {
            return Ok(None);
        }
        let file = std::fs::File::open(&path)?;
        Ok(Some(read_solution(BufReader::new(file))?))
    }

    pub fn store(&self, key: &str, sol: &KineticSolution) -> Result<()> {
        std::fs::create_dir_all(&self.dir)?;
        let tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        {
            let mut w = BufWriter::new(tmp.as_file());
            write_solution(sol, &mut w)?;
            std::io::Write::flush(&mut w)?;
        }
        tmp.persist(self.path_for(key)).map_err(|e| e.error)?;
        Ok(())
    }

    pub fn get_or_solve(
        &self,
        key: &str,
        solve: impl FnOnce() -> Result<KineticSolution>,
    ) -> Result<(KineticSolution, CacheStatus)> {
        if let Some(sol) = self.load(key)? {
            return Ok((sol, CacheStatus::Hit));
        }
        let sol = solve()?;
        self.store(key, &sol)?;
        Ok((sol, CacheStatus::Miss))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_ignores_trial_settings_but_not_grid() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.trials = 3;
        b.seed = 1;
        b.n_list = vec![8, 16];
        assert_eq!(cache_key(&a), cache_key(&b));
        b.kinetic.nx = 256;
        assert_ne!(cache_key(&a), cache_key(&b));
        assert_eq!(cache_key(&a).len(), 64);
    }
}
