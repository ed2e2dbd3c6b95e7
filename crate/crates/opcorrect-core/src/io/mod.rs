//! On-disk artifact formats.
//!
//! All formats share one style: a single ASCII header line, then raw
//! little-endian 64-bit floats. See each submodule for the exact layout.

mod chain;
mod dipnet;
mod fefield;
mod pgm;

pub use chain::{read_chain, write_chain};
pub use dipnet::{read_dipnet, write_dipnet};
pub use fefield::{read_fefield, write_fefield};
pub use pgm::{render_field, RenderInfo};

/// File format and I/O failures.
#[derive(Debug, thiserror::Error)]
pub enum FileError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad file format: {0}")]
    Format(String),
    #[error(transparent)]
    Core(#[from] crate::error::Error),
}

pub type FileResult<T> = std::result::Result<T, FileError>;

pub(crate) fn format_err(msg: impl Into<String>) -> FileError {
    FileError::Format(msg.into())
}

pub(crate) fn write_f64s<W: std::io::Write>(w: &mut W, values: &[f64]) -> FileResult<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub(crate) fn read_f64s<R: std::io::Read>(r: &mut R, n: usize) -> FileResult<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub(crate) fn read_header_line<R: std::io::BufRead>(r: &mut R) -> FileResult<String> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    if !line.ends_with('\n') {
        return Err(format_err("missing header newline"));
    }
    Ok(line.trim_end().to_string())
}
