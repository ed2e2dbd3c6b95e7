//! `FEFIELD v1`: one ASCII header line
//! `FEFIELD v1 <nx> <ny> <n_nodes> <role>` followed by `n_nodes`
//! little-endian 64-bit floats.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use super::{format_err, read_f64s, read_header_line, write_f64s, FileResult};
use crate::fem::{FieldRole, NodalField};

pub fn write_fefield(path: &Path, nx: usize, ny: usize, field: &NodalField) -> FileResult<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(
        w,
        "FEFIELD v1 {} {} {} {}",
        nx,
        ny,
        field.len(),
        field.role().as_str()
    )?;
    write_f64s(&mut w, field.values())?;
    w.flush()?;
    Ok(())
}

pub fn read_fefield(path: &Path) -> FileResult<(usize, usize, NodalField)> {
    let mut r = BufReader::new(File::open(path)?);
    let header = read_header_line(&mut r)?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 6 || parts[0] != "FEFIELD" || parts[1] != "v1" {
        return Err(format_err(format!("not a FEFIELD v1 header: `{header}`")));
    }
    let nx: usize = parts[2].parse().map_err(|_| format_err("bad nx"))?;
    let ny: usize = parts[3].parse().map_err(|_| format_err("bad ny"))?;
    let n: usize = parts[4].parse().map_err(|_| format_err("bad n_nodes"))?;
    let role = FieldRole::parse(parts[5])?;
    if n != (nx + 1) * (ny + 1) {
        return Err(format_err("n_nodes inconsistent with mesh dimensions"));
    }
    let values = read_f64s(&mut r, n)?;
    Ok((nx, ny, NodalField::new(values, role)?))
}
