//! Subcommand implementations.
//!
//! Every stage writes its artifacts plus a `<stage>.meta.json` record and
//! updates `manifest.json`. A stage whose recorded config hash matches the
//! current one (and whose artifacts still exist) is skipped unless `--force`
//! is given.

use std::io::Write;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use opcorrect_core::bayes::{
    estimate_bound_and_kl, pcn_sample, posterior_mean, CorrectedMap, EvalCounters,
    GaussianPotential, ModelMap, StateMap, SurrogateMap, Transform,
};
use opcorrect_core::costing::{
    asymptotic_speedup, calibrate, observed_speedup, observed_wall_speedup, CostLedger,
    SpeedupMode,
};
use opcorrect_core::fem::{FieldRole, NodalField};
use opcorrect_core::io::{read_chain, read_dipnet, read_fefield, render_field, write_chain,
    write_dipnet, write_fefield};
use opcorrect_core::reaction_diffusion::{NEWTON_MAX_ITERS, NEWTON_RTOL};
use opcorrect_core::rng::RngStream;
use opcorrect_core::surrogate::{
    compute_derivative_basis_with_solutions, compute_pod, generalization_accuracy, train_adaptive,
    ArchConfig, ReducedBasis, ResNetSurrogate, StateNorm, TrainingSet,
};

use crate::config::{streams, RunConfig};
use crate::context::Desk;
use crate::meta::{RunDir, StageMeta};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum MapKind {
    Model,
    No,
    Ecno,
}

impl MapKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MapKind::Model => "model",
            MapKind::No => "no",
            MapKind::Ecno => "ecno",
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct DataArtifact {
    y_star: Vec<f64>,
    sigma: f64,
    radius: f64,
    growth_steps: u32,
}

fn counters_map(c: &EvalCounters) -> std::collections::BTreeMap<String, u64> {
    let mut m = std::collections::BTreeMap::new();
    m.insert("forward_solves".into(), c.forward_solves);
    m.insert("newton_iters".into(), c.newton_iters);
    m.insert("linear_solves".into(), c.linear_solves);
    m.insert("surrogate_evals".into(), c.surrogate_evals);
    m.insert("correction_solves".into(), c.correction_solves);
    m
}

fn counters_from_map(m: &std::collections::BTreeMap<String, u64>) -> EvalCounters {
    EvalCounters {
        forward_solves: *m.get("forward_solves").unwrap_or(&0),
        newton_iters: *m.get("newton_iters").unwrap_or(&0),
        linear_solves: *m.get("linear_solves").unwrap_or(&0),
        surrogate_evals: *m.get("surrogate_evals").unwrap_or(&0),
        correction_solves: *m.get("correction_solves").unwrap_or(&0),
    }
}

pub fn gen_truth(cfg: &RunConfig, run: &RunDir, force: bool) -> Result<()> {
    if !force && run.stage_is_current("gen-truth") {
        println!("gen-truth: up to date");
        return Ok(());
    }
    let t0 = Instant::now();
    let desk = Desk::build(cfg)?;
    let truth = NodalField::from_fn(&desk.mesh, FieldRole::Parameter, |x, y| {
        cfg.truth_value(x, y)
    });
    write_fefield(&run.path("truth_m.ff"), cfg.mesh_nx, cfg.mesh_ny, &truth)?;
    let mut meta = StageMeta::new("gen-truth", &run.config_hash);
    meta.wall_secs = t0.elapsed().as_secs_f64();
    meta.artifacts = vec!["truth_m.ff".into()];
    run.record_stage("gen-truth", meta)?;
    println!("gen-truth: wrote truth_m.ff");
    Ok(())
}

pub fn gen_data(cfg: &RunConfig, run: &RunDir, force: bool) -> Result<()> {
    if !force && run.stage_is_current("gen-data") {
        println!("gen-data: up to date");
        return Ok(());
    }
    let t0 = Instant::now();
    let truth_path = run.require("truth_m.ff", "gen-truth")?;
    let (_, _, truth) = read_fefield(&truth_path)?;
    let desk = Desk::build(cfg)?;

    let mut rng = RngStream::new(cfg.seed, streams::DATA_NOISE);
    let (y_star, sigma) = opcorrect_core::bayes::make_synthetic_data(
        &desk.obs,
        &desk.model,
        &truth,
        cfg.obs_noise_pct,
        &mut rng,
    )?;
    let sol = desk
        .model
        .solve_forward(&truth, NEWTON_RTOL, NEWTON_MAX_ITERS)?;
    write_fefield(&run.path("u_star.ff"), cfg.mesh_nx, cfg.mesh_ny, &sol.u)?;
    let data = DataArtifact {
        y_star,
        sigma,
        radius: desk.obs.radius,
        growth_steps: desk.obs.growth_steps,
    };
    std::fs::write(run.path("data.json"), serde_json::to_string_pretty(&data)?)?;

    let mut meta = StageMeta::new("gen-data", &run.config_hash)
        .seed("data_noise", cfg.seed);
    meta.extras.insert("sigma".into(), sigma);
    meta.wall_secs = t0.elapsed().as_secs_f64();
    meta.artifacts = vec!["data.json".into(), "u_star.ff".into()];
    run.record_stage("gen-data", meta)?;
    println!("gen-data: sigma = {sigma:.6e}");
    Ok(())
}

fn load_data(run: &RunDir) -> Result<DataArtifact> {
    let path = run.require("data.json", "gen-data")?;
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Draw prior samples sequentially from one stream, then solve in parallel.
fn sample_and_solve(
    desk: &Desk,
    n: usize,
    rng: &mut RngStream,
) -> Result<(Vec<(NodalField, NodalField)>, EvalCounters)> {
    use rayon::prelude::*;
    let ms: Vec<NodalField> = (0..n)
        .map(|_| desk.prior.sample(rng))
        .collect::<opcorrect_core::Result<_>>()?;
    let solved: Vec<(NodalField, NodalField, u64)> = ms
        .into_par_iter()
        .map(|m| {
            let sol = desk.model.solve_forward(&m, NEWTON_RTOL, NEWTON_MAX_ITERS)?;
            Ok((m, sol.u, sol.newton_iters as u64))
        })
        .collect::<opcorrect_core::Result<_>>()?;
    let mut counters = EvalCounters::default();
    let pairs = solved
        .into_iter()
        .map(|(m, u, iters)| {
            counters.forward_solves += 1;
            counters.newton_iters += iters;
            counters.linear_solves += iters;
            (m, u)
        })
        .collect();
    Ok((pairs, counters))
}

fn write_pairs(run: &RunDir, dir: &str, cfg: &RunConfig, pairs: &[(NodalField, NodalField)]) -> Result<Vec<String>> {
    std::fs::create_dir_all(run.path(dir))?;
    let mut artifacts = Vec::new();
    for (i, (m, u)) in pairs.iter().enumerate() {
        let m_name = format!("{dir}/m_{i:04}.ff");
        let u_name = format!("{dir}/u_{i:04}.ff");
        write_fefield(&run.path(&m_name), cfg.mesh_nx, cfg.mesh_ny, m)?;
        write_fefield(&run.path(&u_name), cfg.mesh_nx, cfg.mesh_ny, u)?;
        artifacts.push(m_name);
        artifacts.push(u_name);
    }
    Ok(artifacts)
}

fn read_pairs(run: &RunDir, dir: &str, n: usize, producer: &str) -> Result<Vec<(NodalField, NodalField)>> {
    let mut pairs = Vec::with_capacity(n);
    for i in 0..n {
        let m_path = run.require(&format!("{dir}/m_{i:04}.ff"), producer)?;
        let u_path = run.require(&format!("{dir}/u_{i:04}.ff"), producer)?;
        let (_, _, m) = read_fefield(&m_path)?;
        let (_, _, u) = read_fefield(&u_path)?;
        pairs.push((m, u));
    }
    Ok(pairs)
}

pub fn gen_training(cfg: &RunConfig, run: &RunDir, force: bool) -> Result<()> {
    if !force && run.stage_is_current("gen-training") {
        println!("gen-training: up to date");
        return Ok(());
    }
    let t0 = Instant::now();
    let desk = Desk::build(cfg)?;
    let mut rng = RngStream::new(cfg.seed, streams::TRAINING);
    let (pairs, counters) = sample_and_solve(&desk, cfg.sur_n_train, &mut rng)?;
    let artifacts = write_pairs(run, "training", cfg, &pairs)?;

    let mut meta = StageMeta::new("gen-training", &run.config_hash).seed("training", cfg.seed);
    meta.counters = counters_map(&counters);
    meta.wall_secs = t0.elapsed().as_secs_f64();
    meta.artifacts = artifacts;
    run.record_stage("gen-training", meta)?;
    println!(
        "gen-training: {} snapshots, {} Newton iterations",
        cfg.sur_n_train, counters.newton_iters
    );
    Ok(())
}

pub fn compute_bases(cfg: &RunConfig, run: &RunDir, force: bool) -> Result<()> {
    if !force && run.stage_is_current("compute-bases") {
        println!("compute-bases: up to date");
        return Ok(());
    }
    let t0 = Instant::now();
    let desk = Desk::build(cfg)?;
    let pairs = read_pairs(run, "training", cfg.sur_n_train, "gen-training")?;

    let snapshots: Vec<NodalField> = pairs.iter().map(|(_, u)| u.clone()).collect();
    let pod = compute_pod(&snapshots, &desk.mass, cfg.sur_r_out)
        .context("output basis (POD)")?;

    // derivative basis at the leading training samples: their forward
    // solutions are already paid for
    let n_basis = cfg.sur_basis_samples.min(pairs.len());
    let mut rng = RngStream::new(cfg.sur_seed, streams::BASIS);
    let derivative = compute_derivative_basis_with_solutions(
        &desk.model,
        &pairs[..n_basis],
        cfg.sur_r_in,
        cfg.sur_oversample,
        &mut rng,
    )
    .context("derivative-informed input basis")?;
    let basis_solves = derivative.linearized_solves;

    let mut basis = ReducedBasis::new(derivative, pod, desk.prior.mean().clone());
    let train_ms: Vec<NodalField> = pairs.iter().map(|(m, _)| m.clone()).collect();
    basis.fit_input_scales(&desk.mass, &train_ms)?;

    // bases-only artifact: an empty network predicts the POD mean
    let net = ResNetSurrogate::new(
        cfg.sur_r_in,
        cfg.sur_r_out,
        cfg.sur_layer_rank,
        0,
        &mut rng,
    );
    write_dipnet(&run.path("bases.dipnet"), &basis, &net)?;

    let mut meta = StageMeta::new("compute-bases", &run.config_hash).seed("basis", cfg.sur_seed);
    meta.counters.insert("basis_linearized_solves".into(), basis_solves);
    meta.wall_secs = t0.elapsed().as_secs_f64();
    meta.artifacts = vec!["bases.dipnet".into()];
    run.record_stage("compute-bases", meta)?;
    println!("compute-bases: {basis_solves} linearized solves");
    Ok(())
}

pub fn train(cfg: &RunConfig, run: &RunDir, force: bool) -> Result<()> {
    if !force && run.stage_is_current("train") {
        println!("train: up to date");
        return Ok(());
    }
    let t0 = Instant::now();
    let desk = Desk::build(cfg)?;
    let bases_path = run.require("bases.dipnet", "compute-bases")?;
    let (basis, _) = read_dipnet(&bases_path, desk.n_nodes(), desk.n_nodes())?;
    let pairs = read_pairs(run, "training", cfg.sur_n_train, "gen-training")?;

    let inputs: Vec<Vec<f64>> = pairs
        .iter()
        .map(|(m, _)| basis.encode_input(&desk.mass, m))
        .collect::<opcorrect_core::Result<_>>()?;
    let outputs: Vec<Vec<f64>> = pairs
        .iter()
        .map(|(_, u)| basis.encode_output(&desk.mass, u))
        .collect::<opcorrect_core::Result<_>>()?;

    let mut rng = RngStream::new(cfg.sur_seed, streams::OPTIMIZER);
    let training = TrainingSet::with_heldout(inputs, outputs, cfg.sur_heldout_frac, &mut rng)?;
    let arch = ArchConfig {
        r_in: cfg.sur_r_in,
        r_out: cfg.sur_r_out,
        layer_rank: cfg.sur_layer_rank,
        layers: cfg.sur_layers,
        lr: cfg.sur_lr,
        batch: cfg.sur_batch,
        epochs_per_stage: cfg.sur_epochs_per_stage,
    };
    let outcome = train_adaptive(&training, &arch, &mut rng)?;

    write_dipnet(&run.path("surrogate.dipnet"), &basis, &outcome.net)?;
    let mut log = std::io::BufWriter::new(std::fs::File::create(run.path("training_log.csv"))?);
    writeln!(log, "stage,epoch,train_mse,heldout_mse")?;
    for r in &outcome.log {
        writeln!(log, "{},{},{:e},{:e}", r.stage, r.epoch, r.train_mse, r.heldout_mse)?;
    }
    log.flush()?;

    let mut meta = StageMeta::new("train", &run.config_hash).seed("optimizer", cfg.sur_seed);
    meta.extras
        .insert("best_heldout_mse".into(), outcome.best_heldout_mse);
    meta.wall_secs = t0.elapsed().as_secs_f64();
    meta.artifacts = vec!["surrogate.dipnet".into(), "training_log.csv".into()];
    run.record_stage("train", meta)?;
    println!(
        "train: best held-out mse {:.3e} in {:.1}s",
        outcome.best_heldout_mse,
        t0.elapsed().as_secs_f64()
    );
    Ok(())
}

pub fn eval_accuracy(cfg: &RunConfig, run: &RunDir, force: bool) -> Result<()> {
    if !force && run.stage_is_current("eval-accuracy") {
        println!("eval-accuracy: up to date");
        return Ok(());
    }
    let t0 = Instant::now();
    let desk = Desk::build(cfg)?;
    let sur_path = run.require("surrogate.dipnet", "train")?;
    let (basis, net) = read_dipnet(&sur_path, desk.n_nodes(), desk.n_nodes())?;

    let mut rng = RngStream::new(cfg.seed, streams::TEST);
    let (test_pairs, counters) = sample_and_solve(&desk, cfg.sur_n_test, &mut rng)?;
    let test_ms: Vec<NodalField> = test_pairs.iter().map(|(m, _)| m.clone()).collect();
    // the test set is generated in order, so the oracle replays the cached
    // solutions positionally
    let cached_oracle = |pairs: &[(NodalField, NodalField)]| {
        let mut next = 0usize;
        let us: Vec<NodalField> = pairs.iter().map(|(_, u)| u.clone()).collect();
        move |_m: &NodalField| -> opcorrect_core::Result<NodalField> {
            let u = us[next].clone();
            next += 1;
            Ok(u)
        }
    };

    let mut raw_map = |m: &NodalField| basis.predict(&net, &desk.mass, m);
    let raw = generalization_accuracy(
        &mut raw_map,
        &mut cached_oracle(&test_pairs),
        &test_ms,
        &desk.mass,
        &desk.stiffness,
        StateNorm::L2,
    )?;
    let mut corrected_map = |m: &NodalField| {
        let p = basis.predict(&net, &desk.mass, m)?;
        Ok(desk.model.error_correct(&p, m)?.0)
    };
    let corrected = generalization_accuracy(
        &mut corrected_map,
        &mut cached_oracle(&test_pairs),
        &test_ms,
        &desk.mass,
        &desk.stiffness,
        StateNorm::L2,
    )?;

    let mut csv = std::io::BufWriter::new(std::fs::File::create(run.path("accuracy.csv"))?);
    writeln!(csv, "map,norm,n_test,accuracy")?;
    writeln!(csv, "no,l2,{},{raw:.6}", cfg.sur_n_test)?;
    writeln!(csv, "ecno,l2,{},{corrected:.6}", cfg.sur_n_test)?;
    csv.flush()?;

    let mut meta = StageMeta::new("eval-accuracy", &run.config_hash).seed("test", cfg.seed);
    meta.counters = counters_map(&counters);
    meta.extras.insert("accuracy_no".into(), raw);
    meta.extras.insert("accuracy_ecno".into(), corrected);
    meta.wall_secs = t0.elapsed().as_secs_f64();
    meta.artifacts = vec!["accuracy.csv".into()];
    run.record_stage("eval-accuracy", meta)?;
    println!("eval-accuracy: raw {raw:.2}%, corrected {corrected:.2}%");
    Ok(())
}

pub fn mcmc(cfg: &RunConfig, run: &RunDir, map: MapKind, force: bool) -> Result<()> {
    let stage = format!("mcmc-{}", map.as_str());
    if !force && run.stage_is_current(&stage) {
        println!("{stage}: up to date");
        return Ok(());
    }
    let t0 = Instant::now();
    let desk = Desk::build(cfg)?;
    let data = load_data(run)?;
    let obs = desk.obs.clone().with_noise(data.sigma);

    let surrogate = match map {
        MapKind::Model => None,
        MapKind::No | MapKind::Ecno => {
            let path = run.require("surrogate.dipnet", "train")?;
            Some(read_dipnet(&path, desk.n_nodes(), desk.n_nodes())?)
        }
    };
    let state_map: Box<dyn StateMap> = match (map, &surrogate) {
        (MapKind::Model, _) => Box::new(ModelMap {
            model: &desk.model,
            tol: NEWTON_RTOL,
            max_newton: NEWTON_MAX_ITERS,
        }),
        (MapKind::No, Some((basis, net))) => Box::new(SurrogateMap {
            basis,
            net,
            mass: &desk.mass,
        }),
        (MapKind::Ecno, Some((basis, net))) => Box::new(CorrectedMap {
            basis,
            net,
            mass: &desk.mass,
            model: &desk.model,
        }),
        _ => unreachable!(),
    };
    let potential = GaussianPotential {
        y_star: &data.y_star,
        obs: &obs,
        map: state_map.as_ref(),
    };

    use rayon::prelude::*;
    let chains: Vec<opcorrect_core::bayes::ChainRecord> = (0..cfg.mcmc_n_chains)
        .into_par_iter()
        .map(|i| {
            let stream = streams::CHAIN_BASE + i as u64;
            let mut rng = RngStream::new(cfg.mcmc_seed, stream);
            let init = desk.prior.sample(&mut rng)?;
            pcn_sample(
                &potential,
                &desk.prior,
                cfg.mcmc_beta_pcn,
                cfg.mcmc_n_steps,
                cfg.mcmc_thin,
                rng,
                init,
            )
        })
        .collect::<opcorrect_core::Result<_>>()?;

    let mut artifacts = Vec::new();
    let mut metrics = std::io::BufWriter::new(std::fs::File::create(
        run.path(&format!("metrics_{}.csv", map.as_str())),
    )?);
    writeln!(metrics, "chain,step,phi,accepted")?;
    let mut counters = EvalCounters::default();
    let mut accept_acc = 0.0;
    for (i, chain) in chains.iter().enumerate() {
        let name = format!("chain_{}_{i:02}.chain", map.as_str());
        write_chain(&run.path(&name), chain)?;
        artifacts.push(name);
        for (step, (phi, acc)) in chain
            .potentials
            .iter()
            .zip(&chain.accept_flags)
            .enumerate()
        {
            writeln!(metrics, "{i},{step},{phi:e},{}", *acc as u8)?;
        }
        counters.merge(&chain.counters);
        accept_acc += chain.acceptance_rate();
    }
    metrics.flush()?;
    artifacts.push(format!("metrics_{}.csv", map.as_str()));
    let acceptance = accept_acc / chains.len() as f64;

    let mut meta = StageMeta::new(&stage, &run.config_hash).seed("mcmc", cfg.mcmc_seed);
    meta.counters = counters_map(&counters);
    meta.extras.insert("acceptance_rate".into(), acceptance);
    meta.wall_secs = t0.elapsed().as_secs_f64();
    meta.artifacts = artifacts;
    run.record_stage(&stage, meta)?;
    println!(
        "{stage}: {} chains x {} steps, acceptance {acceptance:.3}",
        cfg.mcmc_n_chains, cfg.mcmc_n_steps
    );
    Ok(())
}

pub fn posterior_mean_cmd(cfg: &RunConfig, run: &RunDir, map: MapKind, force: bool) -> Result<()> {
    let stage = format!("posterior-mean-{}", map.as_str());
    if !force && run.stage_is_current(&stage) {
        println!("{stage}: up to date");
        return Ok(());
    }
    let t0 = Instant::now();
    let desk = Desk::build(cfg)?;
    let mut chains = Vec::new();
    for i in 0..cfg.mcmc_n_chains {
        let name = format!("chain_{}_{i:02}.chain", map.as_str());
        let path = run.require(&name, &format!("mcmc --map {}", map.as_str()))?;
        chains.push(read_chain(&path, desk.n_nodes())?);
    }
    let mean = posterior_mean(&chains, cfg.mcmc_burn_in_frac, Transform::Exp)?;
    let name = format!("mean_kappa_{}.ff", map.as_str());
    write_fefield(&run.path(&name), cfg.mesh_nx, cfg.mesh_ny, &mean)?;

    let mut meta = StageMeta::new(&stage, &run.config_hash);
    meta.wall_secs = t0.elapsed().as_secs_f64();
    meta.artifacts = vec![name.clone()];
    run.record_stage(&stage, meta)?;
    println!("{stage}: wrote {name}");
    Ok(())
}

pub fn report_speedup(cfg: &RunConfig, run: &RunDir) -> Result<()> {
    let desk = Desk::build(cfg)?;
    let sur_path = run.require("surrogate.dipnet", "train")?;
    let (basis, net) = read_dipnet(&sur_path, desk.n_nodes(), desk.n_nodes())?;

    let model_meta = run.stage_meta("mcmc-model")?;
    let training_meta = run.stage_meta("gen-training")?;
    let bases_meta = run.stage_meta("compute-bases")?;
    let train_meta = run.stage_meta("train")?;

    let offline_newton = *training_meta.counters.get("newton_iters").unwrap_or(&0);
    let offline_basis = *bases_meta
        .counters
        .get("basis_linearized_solves")
        .unwrap_or(&0);

    let calib = calibrate(
        &desk.model,
        &basis,
        &net,
        &desk.mass,
        desk.prior.mean(),
        100,
    )?;

    let model_ledger = CostLedger {
        online: counters_from_map(&model_meta.counters),
        online_wall_secs: model_meta.wall_secs,
        n_chain: (cfg.mcmc_n_chains * cfg.mcmc_n_steps) as u64,
        ..Default::default()
    };

    let mut csv = std::io::BufWriter::new(std::fs::File::create(run.path("speedup.csv"))?);
    writeln!(
        csv,
        "mode,n_train,offline_units,online_units,observed,asymptotic,wall_observed"
    )?;
    for map in [MapKind::No, MapKind::Ecno] {
        let meta = run.stage_meta(&format!("mcmc-{}", map.as_str()))?;
        let ledger = CostLedger {
            offline_training_newton_iters: offline_newton,
            offline_basis_solves: offline_basis,
            offline_training_wall_secs: train_meta.wall_secs,
            online: counters_from_map(&meta.counters),
            online_wall_secs: meta.wall_secs,
            n_chain: (cfg.mcmc_n_chains * cfg.mcmc_n_steps) as u64,
        };
        let observed = observed_speedup(&model_ledger, &ledger, &calib);
        let wall = observed_wall_speedup(&model_ledger, &ledger);
        let mode = match map {
            MapKind::No => SpeedupMode::No,
            MapKind::Ecno => SpeedupMode::Ecno,
            MapKind::Model => unreachable!(),
        };
        let asym = asymptotic_speedup(&model_ledger, &calib, mode)?;
        let asym_str = asym
            .units
            .map(|u| format!("{u:.4}"))
            .unwrap_or_else(|| "unbounded".to_string());
        writeln!(
            csv,
            "{},{},{:.1},{:.1},{:.4},{asym_str},{wall:.4}",
            map.as_str(),
            cfg.sur_n_train,
            ledger.offline_units(),
            ledger.online_units(&calib),
            observed
        )?;
    }
    csv.flush()?;
    println!("report speedup: wrote speedup.csv");
    Ok(())
}

pub fn report_bound(cfg: &RunConfig, run: &RunDir) -> Result<()> {
    let desk = Desk::build(cfg)?;
    let data = load_data(run)?;
    let obs = desk
        .obs
        .clone()
        .with_noise(data.sigma * cfg.bound_sigma_inflation);
    let sur_path = run.require("surrogate.dipnet", "train")?;
    let (basis, net) = read_dipnet(&sur_path, desk.n_nodes(), desk.n_nodes())?;

    let model_map = ModelMap {
        model: &desk.model,
        tol: NEWTON_RTOL,
        max_newton: NEWTON_MAX_ITERS,
    };
    let surrogate_map = SurrogateMap {
        basis: &basis,
        net: &net,
        mass: &desk.mass,
    };

    let mut csv = std::io::BufWriter::new(std::fs::File::create(run.path("bound.csv"))?);
    writeln!(
        csv,
        "seed,c1,c2_1,c2_q,c3,c_l,c_b,c_b_tilde,e_norm,c_bip,bound_value,kl,kl_se,ess"
    )?;
    for k in 0..cfg.bound_seeds {
        let mut rng = RngStream::new(cfg.seed + k as u64, streams::BOUND);
        let (constants, kl) = estimate_bound_and_kl(
            &obs,
            &data.y_star,
            &model_map,
            &surrogate_map,
            &desk.prior,
            &desk.mass,
            cfg.bound_n_mc,
            &mut rng,
        )?;
        writeln!(
            csv,
            "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:.1}",
            cfg.seed + k as u64,
            constants.c1,
            constants.c2_1,
            constants.c2_q,
            constants.c3,
            constants.c_l,
            constants.c_b,
            constants.c_b_tilde,
            constants.e_norm,
            constants.c_bip,
            constants.bound_value,
            kl.kl,
            kl.std_error,
            kl.ess
        )?;
        if !kl.reliable {
            eprintln!("report bound: seed {k}: effective sample size {:.1} < 10, estimate unreliable", kl.ess);
        }
    }
    csv.flush()?;
    println!("report bound: wrote bound.csv");
    Ok(())
}

pub fn render(field_path: &std::path::Path, out_path: &std::path::Path) -> Result<()> {
    let (nx, ny, field) = read_fefield(field_path)?;
    let info = render_field(&field, nx, ny, out_path)?;
    if info.degenerate {
        eprintln!("render: field is constant; wrote mid-gray raster");
    }
    println!(
        "render: {} -> {} ({}x{}, range [{:.3e}, {:.3e}])",
        field_path.display(),
        out_path.display(),
        info.width,
        info.height,
        info.min,
        info.max
    );
    Ok(())
}

pub fn ensure_thread_pool(jobs: Option<usize>) -> Result<()> {
    if let Some(n) = jobs {
        if n == 0 {
            bail!("--jobs must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .ok();
    }
    Ok(())
}
