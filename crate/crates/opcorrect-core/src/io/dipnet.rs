//! `DIPNET v1`: trained surrogate artifact.
//!
//! Header: `DIPNET v1 <r_in> <r_out> <n_layers> <layer_rank>`.
//! Payload (little-endian f64, in this order; `d_m`/`d_u` come from the
//! mesh the caller supplies on read):
//!
//! 1. input basis, `d_m * r_in`, column-major
//! 2. input whitening scales, `r_in`
//! 3. input center field, `d_m`
//! 4. input eigenvalues, `r_in`
//! 5. output basis, `d_u * r_out`, column-major
//! 6. output mean field, `d_u`
//! 7. output eigenvalues, `r_out`
//! 8. network parameters in the flat order of
//!    [`ResNetSurrogate::to_params`]: input weight (column-major), input
//!    bias, then per layer `U`, `V`, `b`, then output weight, output bias.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;

use super::{format_err, read_f64s, read_header_line, write_f64s, FileResult};
use crate::fem::{FieldRole, NodalField};
use crate::rng::RngStream;
use crate::surrogate::{DerivativeBasis, PodResult, ReducedBasis, ResNetSurrogate};

pub fn write_dipnet(path: &Path, basis: &ReducedBasis, net: &ResNetSurrogate) -> FileResult<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(
        w,
        "DIPNET v1 {} {} {} {}",
        net.r_in,
        net.r_out,
        net.n_layers(),
        net.layer_rank
    )?;
    write_f64s(&mut w, basis.input_basis.as_slice())?;
    write_f64s(&mut w, &basis.input_scales)?;
    write_f64s(&mut w, basis.input_center.values())?;
    write_f64s(&mut w, &basis.input_eigenvalues)?;
    write_f64s(&mut w, basis.output_basis.as_slice())?;
    write_f64s(&mut w, basis.output_mean.values())?;
    write_f64s(&mut w, &basis.output_eigenvalues)?;
    write_f64s(&mut w, &net.to_params())?;
    w.flush()?;
    Ok(())
}

pub fn read_dipnet(
    path: &Path,
    d_m: usize,
    d_u: usize,
) -> FileResult<(ReducedBasis, ResNetSurrogate)> {
    let mut r = BufReader::new(File::open(path)?);
    let header = read_header_line(&mut r)?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 6 || parts[0] != "DIPNET" || parts[1] != "v1" {
        return Err(format_err(format!("not a DIPNET v1 header: `{header}`")));
    }
    let parse = |s: &str, what: &str| -> FileResult<usize> {
        s.parse().map_err(|_| format_err(format!("bad {what}")))
    };
    let r_in = parse(parts[2], "r_in")?;
    let r_out = parse(parts[3], "r_out")?;
    let n_layers = parse(parts[4], "n_layers")?;
    let layer_rank = parse(parts[5], "layer_rank")?;

    let input_basis = DMatrix::from_column_slice(d_m, r_in, &read_f64s(&mut r, d_m * r_in)?);
    let input_scales = read_f64s(&mut r, r_in)?;
    let input_center = NodalField::new(read_f64s(&mut r, d_m)?, FieldRole::Parameter)?;
    let input_eigenvalues = read_f64s(&mut r, r_in)?;
    let output_basis = DMatrix::from_column_slice(d_u, r_out, &read_f64s(&mut r, d_u * r_out)?);
    let output_mean = NodalField::new(read_f64s(&mut r, d_u)?, FieldRole::State)?;
    let output_eigenvalues = read_f64s(&mut r, r_out)?;

    let mut basis = ReducedBasis::new(
        DerivativeBasis {
            basis: input_basis,
            eigenvalues: input_eigenvalues,
            linearized_solves: 0,
        },
        PodResult {
            basis: output_basis,
            mean: output_mean,
            eigenvalues: output_eigenvalues,
            truncation_error: 0.0,
        },
        input_center,
    );
    basis.input_scales = input_scales;

    // architecture from the header; weights from the payload
    let mut net = ResNetSurrogate::new(r_in, r_out, layer_rank, n_layers, &mut RngStream::new(0, 0));
    let params = read_f64s(&mut r, net.n_params())?;
    net.set_params(&params)?;
    Ok((basis, net))
}
