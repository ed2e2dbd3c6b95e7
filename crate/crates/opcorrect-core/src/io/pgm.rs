//! Grayscale raster output of nodal fields.
//!
//! Fields on the structured mesh resample directly onto the
//! `(nx+1) x (ny+1)` node lattice, linearly mapped to `[0, 255]`, and are
//! written as binary PGM (P5) with the top of the domain as the top image
//! row. A sidecar text file `<path>.txt` records the value range so the
//! raster is invertible; constant fields render mid-gray and are flagged
//! degenerate.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{format_err, FileResult};
use crate::fem::NodalField;

#[derive(Debug, Clone, PartialEq)]
pub struct RenderInfo {
    pub min: f64,
    pub max: f64,
    pub degenerate: bool,
    pub width: usize,
    pub height: usize,
}

pub fn render_field(
    field: &NodalField,
    nx: usize,
    ny: usize,
    path: &Path,
) -> FileResult<RenderInfo> {
    let (w, h) = (nx + 1, ny + 1);
    if field.len() != w * h {
        return Err(format_err("field length does not match raster dimensions"));
    }
    let min = field.values().iter().copied().fold(f64::INFINITY, f64::min);
    let max = field
        .values()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let degenerate = !(max > min);

    let mut out = BufWriter::new(File::create(path)?);
    write!(out, "P5\n{w} {h}\n255\n")?;
    let mut pixels = Vec::with_capacity(w * h);
    for row in 0..h {
        let j = ny - row; // image row 0 is the top edge y = 1
        for i in 0..w {
            let v = field.values()[j * w + i];
            let p = if degenerate {
                128u8
            } else {
                (255.0 * (v - min) / (max - min)).round().clamp(0.0, 255.0) as u8
            };
            pixels.push(p);
        }
    }
    out.write_all(&pixels)?;
    out.flush()?;

    let info = RenderInfo {
        min,
        max,
        degenerate,
        width: w,
        height: h,
    };
    let sidecar = path.with_extension(format!(
        "{}txt",
        path.extension()
            .map(|e| format!("{}.", e.to_string_lossy()))
            .unwrap_or_default()
    ));
    std::fs::write(
        &sidecar,
        format!(
            "min = {:e}\nmax = {:e}\ndegenerate = {}\nwidth = {}\nheight = {}\n",
            info.min, info.max, info.degenerate, info.width, info.height
        ),
    )?;
    Ok(info)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{build_unit_square_mesh, FieldRole};

    fn read_pgm(path: &Path) -> (usize, usize, Vec<u8>) {
        let bytes = std::fs::read(path).unwrap();
        let header_end = bytes
            .windows(4)
            .position(|w| w == b"255\n")
            .map(|p| p + 4)
            .unwrap();
        let header = std::str::from_utf8(&bytes[..header_end]).unwrap();
        let mut it = header.split_whitespace();
        assert_eq!(it.next(), Some("P5"));
        let w: usize = it.next().unwrap().parse().unwrap();
        let h: usize = it.next().unwrap().parse().unwrap();
        (w, h, bytes[header_end..].to_vec())
    }

    #[test]
    fn vertical_gradient_maps_top_row_to_white() {
        let mesh = build_unit_square_mesh(4, 4).unwrap();
        let f = NodalField::from_fn(&mesh, FieldRole::State, |_, y| y);
        let dir = std::env::temp_dir().join("pgm_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("grad.pgm");
        let info = render_field(&f, 4, 4, &path).unwrap();
        assert!(!info.degenerate);
        let (w, h, px) = read_pgm(&path);
        assert_eq!((w, h), (5, 5));
        assert!(px[..5].iter().all(|&p| p == 255), "top row white");
        assert!(px[w * (h - 1)..].iter().all(|&p| p == 0), "bottom row black");
    }

    #[test]
    fn constant_field_is_mid_gray_and_flagged() {
        let mesh = build_unit_square_mesh(3, 3).unwrap();
        let f = NodalField::constant(mesh.n_nodes(), 7.0, FieldRole::State);
        let dir = std::env::temp_dir().join("pgm_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("const.pgm");
        let info = render_field(&f, 3, 3, &path).unwrap();
        assert!(info.degenerate);
        let (_, _, px) = read_pgm(&path);
        assert!(px.iter().all(|&p| p == 128));
        let sidecar = std::fs::read_to_string(dir.join("const.pgm.txt")).unwrap();
        assert!(sidecar.contains("degenerate = true"));
    }

    #[test]
    fn raster_dimensions_match_the_lattice() {
        let mesh = build_unit_square_mesh(6, 3).unwrap();
        let f = NodalField::from_fn(&mesh, FieldRole::State, |x, y| x * y);
        let dir = std::env::temp_dir().join("pgm_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("dims.pgm");
        let info = render_field(&f, 6, 3, &path).unwrap();
        assert_eq!((info.width, info.height), (7, 4));
        let (w, h, px) = read_pgm(&path);
        assert_eq!((w, h), (7, 4));
        assert_eq!(px.len(), 28);
    }
}
