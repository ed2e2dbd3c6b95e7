//! Flat `key = value` run configuration.
//!
//! The format is a plain text file of dotted keys, one per line; `#` starts
//! a comment. Unknown keys are rejected. The resolved configuration (all
//! defaults filled in) is echoed into the output directory and hashed; the
//! hash gates stage re-execution.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub mesh_nx: usize,
    pub mesh_ny: usize,
    pub element_order: u32,
    pub prior_alpha: f64,
    pub prior_beta: f64,
    pub prior_gamma: Option<f64>,
    pub prior_mean: f64,
    pub truth_formula: String,
    pub truth_amplitude: f64,
    pub truth_offset: f64,
    pub truth_sharpness: f64,
    pub obs_grid: usize,
    pub obs_radius: f64,
    pub obs_noise_pct: f64,
    pub sur_r_in: usize,
    pub sur_r_out: usize,
    pub sur_layers: usize,
    pub sur_layer_rank: usize,
    pub sur_lr: f64,
    pub sur_batch: usize,
    pub sur_epochs_per_stage: usize,
    pub sur_n_train: usize,
    pub sur_seed: u64,
    pub sur_basis_samples: usize,
    pub sur_oversample: usize,
    pub sur_n_test: usize,
    pub sur_heldout_frac: f64,
    pub mcmc_beta_pcn: f64,
    pub mcmc_n_chains: usize,
    pub mcmc_n_steps: usize,
    pub mcmc_thin: usize,
    pub mcmc_burn_in_frac: f64,
    pub mcmc_seed: u64,
    pub bound_n_mc: usize,
    pub bound_sigma_inflation: f64,
    pub bound_seeds: usize,
}

/// Stream indices carved out of the master seed. Chains use
/// `STREAM_CHAIN_BASE + chain_index` so that runs with different maps see
/// matched proposal streams.
pub mod streams {
    pub const DATA_NOISE: u64 = 2;
    pub const TRAINING: u64 = 3;
    pub const BASIS: u64 = 4;
    pub const OPTIMIZER: u64 = 6;
    pub const TEST: u64 = 7;
    pub const BOUND: u64 = 8;
    pub const CHAIN_BASE: u64 = 1000;
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config `{}`", path.display()))?;
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("config line {} is not `key = value`: `{raw}`", lineno + 1);
            };
            let prev = map.insert(key.trim().to_string(), value.trim().to_string());
            if prev.is_some() {
                bail!("duplicate config key `{}`", key.trim());
            }
        }
        let mut cfg = Self::from_map(&mut map)?;
        if !map.is_empty() {
            let unknown: Vec<&String> = map.keys().collect();
            bail!("unknown config keys: {unknown:?}");
        }
        if let Ok(seed) = std::env::var("OPCORRECT_SEED") {
            let seed: u64 = seed
                .parse()
                .context("OPCORRECT_SEED must be an unsigned integer")?;
            cfg.seed = seed;
            cfg.sur_seed = seed;
            cfg.mcmc_seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn from_map(map: &mut BTreeMap<String, String>) -> Result<Self> {
        fn take<T: std::str::FromStr>(
            map: &mut BTreeMap<String, String>,
            key: &str,
            default: T,
        ) -> Result<T>
        where
            T::Err: std::fmt::Display,
        {
            match map.remove(key) {
                None => Ok(default),
                Some(raw) => raw
                    .parse()
                    .map_err(|e| anyhow::anyhow!("config key `{key}`: {e}")),
            }
        }
        let seed: u64 = take(map, "seed", 0)?;
        let gamma = match map.remove("prior.gamma") {
            None => None,
            Some(raw) => Some(raw.parse().context("config key `prior.gamma`")?),
        };
        Ok(Self {
            seed,
            output_dir: PathBuf::from(take(map, "output.dir", "runs/desk".to_string())?),
            mesh_nx: take(map, "mesh.nx", 32)?,
            mesh_ny: take(map, "mesh.ny", 32)?,
            element_order: take(map, "element_order", 1)?,
            prior_alpha: take(map, "prior.alpha", 0.08)?,
            prior_beta: take(map, "prior.beta", 2.0)?,
            prior_gamma: gamma,
            prior_mean: take(map, "prior.mean", 0.0)?,
            truth_formula: take(map, "truth.formula", "rosenbrock".to_string())?,
            truth_amplitude: take(map, "truth.amplitude", 1.5)?,
            truth_offset: take(map, "truth.offset", -0.5)?,
            truth_sharpness: take(map, "truth.sharpness", 25.0)?,
            obs_grid: take(map, "observation.grid", 10)?,
            obs_radius: take(map, "observation.radius", 0.04)?,
            obs_noise_pct: take(map, "observation.noise_pct", 0.01)?,
            sur_r_in: take(map, "surrogate.r_in", 20)?,
            sur_r_out: take(map, "surrogate.r_out", 20)?,
            sur_layers: take(map, "surrogate.layers", 10)?,
            sur_layer_rank: take(map, "surrogate.layer_rank", 10)?,
            sur_lr: take(map, "surrogate.lr", 1e-3)?,
            sur_batch: take(map, "surrogate.batch", 32)?,
            sur_epochs_per_stage: take(map, "surrogate.epochs_per_stage", 100)?,
            sur_n_train: take(map, "surrogate.n_train", 512)?,
            sur_seed: take(map, "surrogate.seed", seed)?,
            sur_basis_samples: take(map, "surrogate.basis_samples", 32)?,
            sur_oversample: take(map, "surrogate.oversample", 10)?,
            sur_n_test: take(map, "surrogate.n_test", 512)?,
            sur_heldout_frac: take(map, "surrogate.heldout_frac", 0.1)?,
            mcmc_beta_pcn: take(map, "mcmc.beta_pcn", 0.03)?,
            mcmc_n_chains: take(map, "mcmc.n_chains", 2)?,
            mcmc_n_steps: take(map, "mcmc.n_steps", 20_000)?,
            mcmc_thin: take(map, "mcmc.thin", 10)?,
            mcmc_burn_in_frac: take(map, "mcmc.burn_in_frac", 0.25)?,
            mcmc_seed: take(map, "mcmc.seed", seed)?,
            bound_n_mc: take(map, "bound.n_mc", 500)?,
            bound_sigma_inflation: take(map, "bound.sigma_inflation", 100.0)?,
            bound_seeds: take(map, "bound.seeds", 3)?,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.element_order != 1 {
            bail!("element_order is reserved; only 1 is implemented");
        }
        if self.mesh_nx < 2 || self.mesh_ny < 2 {
            bail!("mesh must have at least 2 cells per side");
        }
        if !(self.prior_alpha > 0.0) || !(self.prior_beta > 0.0) {
            bail!("prior hyperparameters must be positive");
        }
        if self.truth_formula != "rosenbrock" {
            bail!("unknown truth formula `{}`", self.truth_formula);
        }
        if !(self.obs_noise_pct > 0.0) {
            bail!("observation.noise_pct must be positive");
        }
        if self.sur_batch == 0 || self.sur_batch > self.sur_n_train {
            bail!("surrogate.batch must be in [1, n_train]");
        }
        if self.sur_layers < 2 {
            bail!("surrogate.layers must be at least 2");
        }
        if !(0.0 < self.mcmc_beta_pcn && self.mcmc_beta_pcn < 1.0) {
            bail!("mcmc.beta_pcn must lie in (0, 1)");
        }
        if self.mcmc_thin == 0 || self.mcmc_n_steps % self.mcmc_thin != 0 {
            bail!("mcmc.n_steps must be a positive multiple of mcmc.thin");
        }
        if !(0.0..1.0).contains(&self.mcmc_burn_in_frac) {
            bail!("mcmc.burn_in_frac must be in [0, 1)");
        }
        if self.bound_n_mc < 100 {
            bail!("bound.n_mc must be at least 100");
        }
        Ok(())
    }

    /// Canonical resolved text (defaults filled, keys sorted by section).
    pub fn resolved_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        kv("seed", self.seed.to_string());
        kv("output.dir", self.output_dir.display().to_string());
        kv("mesh.nx", self.mesh_nx.to_string());
        kv("mesh.ny", self.mesh_ny.to_string());
        kv("element_order", self.element_order.to_string());
        kv("prior.alpha", format!("{:e}", self.prior_alpha));
        kv("prior.beta", format!("{:e}", self.prior_beta));
        if let Some(g) = self.prior_gamma {
            kv("prior.gamma", format!("{g:e}"));
        }
        kv("prior.mean", format!("{:e}", self.prior_mean));
        kv("truth.formula", self.truth_formula.clone());
        kv("truth.amplitude", format!("{:e}", self.truth_amplitude));
        kv("truth.offset", format!("{:e}", self.truth_offset));
        kv("truth.sharpness", format!("{:e}", self.truth_sharpness));
        kv("observation.grid", self.obs_grid.to_string());
        kv("observation.radius", format!("{:e}", self.obs_radius));
        kv("observation.noise_pct", format!("{:e}", self.obs_noise_pct));
        kv("surrogate.r_in", self.sur_r_in.to_string());
        kv("surrogate.r_out", self.sur_r_out.to_string());
        kv("surrogate.layers", self.sur_layers.to_string());
        kv("surrogate.layer_rank", self.sur_layer_rank.to_string());
        kv("surrogate.lr", format!("{:e}", self.sur_lr));
        kv("surrogate.batch", self.sur_batch.to_string());
        kv(
            "surrogate.epochs_per_stage",
            self.sur_epochs_per_stage.to_string(),
        );
        kv("surrogate.n_train", self.sur_n_train.to_string());
        kv("surrogate.seed", self.sur_seed.to_string());
        kv("surrogate.basis_samples", self.sur_basis_samples.to_string());
        kv("surrogate.oversample", self.sur_oversample.to_string());
        kv("surrogate.n_test", self.sur_n_test.to_string());
        kv("surrogate.heldout_frac", format!("{:e}", self.sur_heldout_frac));
        kv("mcmc.beta_pcn", format!("{:e}", self.mcmc_beta_pcn));
        kv("mcmc.n_chains", self.mcmc_n_chains.to_string());
        kv("mcmc.n_steps", self.mcmc_n_steps.to_string());
        kv("mcmc.thin", self.mcmc_thin.to_string());
        kv("mcmc.burn_in_frac", format!("{:e}", self.mcmc_burn_in_frac));
        kv("mcmc.seed", self.mcmc_seed.to_string());
        kv("bound.n_mc", self.bound_n_mc.to_string());
        kv("bound.sigma_inflation", format!("{:e}", self.bound_sigma_inflation));
        kv("bound.seeds", self.bound_seeds.to_string());
        s
    }

    pub fn config_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let digest = Sha256::digest(self.resolved_text().as_bytes());
        let mut hex = String::with_capacity(64);
        for b in digest {
            hex.push_str(&format!("{b:02x}"));
        }
        hex
    }

    /// Synthetic truth field values at `(x, y)`: a bounded bump shaped by a
    /// Rosenbrock valley over `[-2,2] x [-1,3]`.
    pub fn truth_value(&self, x: f64, y: f64) -> f64 {
        let a = 4.0 * x - 2.0;
        let b = 4.0 * y - 1.0;
        let ros = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        self.truth_amplitude * (-ros / self.truth_sharpness).exp() + self.truth_offset
    }
}
