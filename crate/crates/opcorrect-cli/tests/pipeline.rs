//! End-to-end exercise of the command-line pipeline on a small mesh:
//! every stage runs in order, rasters come out, chain files are
//! byte-reproducible, and missing artifacts fail with the producing
//! subcommand named.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_opcorrect")
}

struct Runner {
    config: PathBuf,
}

impl Runner {
    fn run(&self, args: &[&str]) -> std::process::Output {
        Command::new(bin())
            .arg("--config")
            .arg(&self.config)
            .args(args)
            .output()
            .expect("spawning opcorrect")
    }

    fn ok(&self, args: &[&str]) {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "`opcorrect {args:?}` failed:\nstdout: {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

fn write_config(dir: &Path, out_dir: &Path) -> PathBuf {
    let config = dir.join("pipeline.cfg");
    let text = format!(
        "seed = 11\n\
         output.dir = {}\n\
         mesh.nx = 16\n\
         mesh.ny = 16\n\
         surrogate.r_in = 10\n\
         surrogate.r_out = 10\n\
         surrogate.layers = 4\n\
         surrogate.layer_rank = 5\n\
         surrogate.n_train = 128\n\
         surrogate.batch = 32\n\
         surrogate.epochs_per_stage = 30\n\
         surrogate.basis_samples = 12\n\
         surrogate.oversample = 8\n\
         surrogate.n_test = 32\n\
         mcmc.beta_pcn = 0.1\n\
         mcmc.n_chains = 2\n\
         mcmc.n_steps = 2000\n\
         mcmc.thin = 10\n\
         bound.n_mc = 100\n\
         bound.seeds = 1\n",
        out_dir.display()
    );
    std::fs::write(&config, text).unwrap();
    config
}

#[test]
fn full_pipeline_produces_posterior_rasters() {
    let base = std::env::temp_dir().join("opcorrect_pipeline_test");
    let _ = std::fs::remove_dir_all(&base);
    std::fs::create_dir_all(&base).unwrap();
    let out_dir = base.join("run");
    let runner = Runner {
        config: write_config(&base, &out_dir),
    };

    runner.ok(&["gen-truth"]);
    runner.ok(&["gen-data"]);
    runner.ok(&["gen-training"]);
    runner.ok(&["compute-bases"]);
    runner.ok(&["train"]);
    runner.ok(&["eval-accuracy"]);
    for map in ["model", "no", "ecno"] {
        runner.ok(&["mcmc", "--map", map]);
        runner.ok(&["posterior-mean", "--map", map]);
        let field = out_dir.join(format!("mean_kappa_{map}.ff"));
        let raster = out_dir.join(format!("mean_kappa_{map}.pgm"));
        runner.ok(&[
            "render",
            "--field",
            field.to_str().unwrap(),
            "--out",
            raster.to_str().unwrap(),
        ]);
        assert!(raster.exists(), "missing raster for {map}");
        let bytes = std::fs::read(&raster).unwrap();
        assert!(bytes.starts_with(b"P5\n17 17\n255\n"));
    }
    runner.ok(&["report", "speedup"]);
    runner.ok(&["report", "bound"]);

    // the manifest records every completed stage
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap())
            .unwrap();
    for stage in [
        "gen-truth",
        "gen-data",
        "gen-training",
        "compute-bases",
        "train",
        "eval-accuracy",
        "mcmc-model",
        "mcmc-no",
        "mcmc-ecno",
        "posterior-mean-model",
    ] {
        assert!(
            manifest["stages"].get(stage).is_some(),
            "manifest missing stage {stage}"
        );
    }
    let speedup = std::fs::read_to_string(out_dir.join("speedup.csv")).unwrap();
    assert!(speedup.starts_with(
        "mode,n_train,offline_units,online_units,observed,asymptotic,wall_observed"
    ));

    // idempotence: a completed stage is a no-op without --force
    let out = runner.run(&["train"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("up to date"));

    // determinism: forced re-run reproduces the chain bytes
    let chain = out_dir.join("chain_model_00.chain");
    let before = std::fs::read(&chain).unwrap();
    runner.ok(&["--force", "mcmc", "--map", "model"]);
    let after = std::fs::read(&chain).unwrap();
    assert_eq!(before, after, "chain file changed across identical runs");
}

#[test]
fn mcmc_without_a_trained_surrogate_names_the_producer() {
    let base = std::env::temp_dir().join("opcorrect_pipeline_missing");
    let _ = std::fs::remove_dir_all(&base);
    std::fs::create_dir_all(&base).unwrap();
    let out_dir = base.join("run");
    let runner = Runner {
        config: write_config(&base, &out_dir),
    };
    runner.ok(&["gen-truth"]);
    runner.ok(&["gen-data"]);

    let out = runner.run(&["mcmc", "--map", "no"]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("train"),
        "error must name the producing subcommand, got: {stderr}"
    );
}

#[test]
fn unknown_config_key_is_rejected() {
    let base = std::env::temp_dir().join("opcorrect_pipeline_badcfg");
    let _ = std::fs::remove_dir_all(&base);
    std::fs::create_dir_all(&base).unwrap();
    let config = base.join("bad.cfg");
    std::fs::write(&config, "mesh.nx = 8\nnot.a.key = 1\n").unwrap();
    let out = Command::new(bin())
        .args(["--config", config.to_str().unwrap(), "gen-truth"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}
