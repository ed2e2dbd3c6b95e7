//! `CHAIN v1`: pCN sample stream.
//!
//! Header: `CHAIN v1 <n_kept> <thin> <beta> <seed>`. Payload: the kept
//! samples as concatenated raw `FEFIELD` payloads (`n_kept * n_nodes`
//! little-endian f64), then the per-step potentials (`n_kept * thin` f64),
//! then the per-step accept flags (`n_kept * thin` bytes, 0/1). The total
//! step count must be an exact multiple of `thin`. Solve counters travel in
//! the run metadata, not in the chain file.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{format_err, read_f64s, read_header_line, write_f64s, FileResult};
use crate::bayes::{ChainRecord, EvalCounters};
use crate::fem::{FieldRole, NodalField};

pub fn write_chain(path: &Path, record: &ChainRecord) -> FileResult<()> {
    if record.n_steps() != record.samples.len() * record.thin {
        return Err(format_err(
            "chain steps must be an exact multiple of the thinning interval",
        ));
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(
        w,
        "CHAIN v1 {} {} {} {}",
        record.samples.len(),
        record.thin,
        record.beta_pcn,
        record.seed
    )?;
    for s in &record.samples {
        write_f64s(&mut w, s.values())?;
    }
    write_f64s(&mut w, &record.potentials)?;
    let flags: Vec<u8> = record.accept_flags.iter().map(|&a| a as u8).collect();
    w.write_all(&flags)?;
    w.flush()?;
    Ok(())
}

pub fn read_chain(path: &Path, n_nodes: usize) -> FileResult<ChainRecord> {
    let mut r = BufReader::new(File::open(path)?);
    let header = read_header_line(&mut r)?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 6 || parts[0] != "CHAIN" || parts[1] != "v1" {
        return Err(format_err(format!("not a CHAIN v1 header: `{header}`")));
    }
    let n_kept: usize = parts[2].parse().map_err(|_| format_err("bad n_kept"))?;
    let thin: usize = parts[3].parse().map_err(|_| format_err("bad thin"))?;
    let beta: f64 = parts[4].parse().map_err(|_| format_err("bad beta"))?;
    let seed: u64 = parts[5].parse().map_err(|_| format_err("bad seed"))?;
    if thin == 0 {
        return Err(format_err("thin must be positive"));
    }

    let mut samples = Vec::with_capacity(n_kept);
    for _ in 0..n_kept {
        let values = read_f64s(&mut r, n_nodes)?;
        samples.push(NodalField::new(values, FieldRole::Parameter)?);
    }
    let n_steps = n_kept * thin;
    let potentials = read_f64s(&mut r, n_steps)?;
    let mut flags = vec![0u8; n_steps];
    r.read_exact(&mut flags)?;

    Ok(ChainRecord {
        samples,
        potentials,
        accept_flags: flags.into_iter().map(|b| b != 0).collect(),
        beta_pcn: beta,
        thin,
        seed,
        stream: 0,
        counters: EvalCounters::default(),
        failed_evals: 0,
    })
}
