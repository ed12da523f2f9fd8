//! Binary field container, CSV export and PGM images.
//!
//! Container layout, little-endian: magic `HWFD`, `u16` version, `u8` kind
//! (0 real, 1 complex), `u8` padding, center `(f64, f64)`, half edge `f64`,
//! `u64` nodes per side, then the values row by row (`j` outer), complex
//! values as `(re, im)` pairs.

use std::io::{self, Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use num_complex::Complex64;
use thiserror::Error;

use super::{Field, FieldError, FieldValue, Grid, RasterSet, RealField, Square};

const MAGIC: &[u8; 4] = b"HWFD";
const VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum FieldIoError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("malformed field container: {0}")]
    Format(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}

pub fn write_container<T: FieldValue, W: Write>(f: &Field<T>, mut w: W) -> io::Result<()> {
    let g = f.grid();
    w.write_all(MAGIC)?;
    w.write_u16::<LittleEndian>(VERSION)?;
    w.write_u8(T::KIND)?;
    w.write_u8(0)?;
    w.write_f64::<LittleEndian>(g.square().center.re)?;
    w.write_f64::<LittleEndian>(g.square().center.im)?;
    w.write_f64::<LittleEndian>(g.square().half_edge)?;
    w.write_u64::<LittleEndian>(g.n() as u64)?;
    for v in f.values() {
        let (re, im) = v.parts();
        w.write_f64::<LittleEndian>(re)?;
        if T::KIND == 1 {
            w.write_f64::<LittleEndian>(im)?;
        }
    }
    w.flush()
}

pub fn read_container<T: FieldValue, R: Read>(mut r: R) -> Result<Field<T>, FieldIoError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(FieldIoError::Format(format!("bad magic {magic:?}")));
    }
    let version = r.read_u16::<LittleEndian>()?;
    if version != VERSION {
        return Err(FieldIoError::Format(format!("unsupported version {version}")));
    }
    let kind = r.read_u8()?;
    if kind != T::KIND {
        return Err(FieldIoError::Format(format!("container holds kind {kind}, expected {}", T::KIND)));
    }
    r.read_u8()?;
    let center = Complex64::new(r.read_f64::<LittleEndian>()?, r.read_f64::<LittleEndian>()?);
    let half_edge = r.read_f64::<LittleEndian>()?;
    let n = r.read_u64::<LittleEndian>()?;
    let n = usize::try_from(n).ok().filter(|&n| n.checked_mul(n).is_some()).ok_or_else(|| FieldIoError::Format(format!("n = {n}")))?;
    let grid = Grid::new(Square::new(center, half_edge)?, n)?;
    let mut values = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        let re = r.read_f64::<LittleEndian>()?;
        let im = if kind == 1 { r.read_f64::<LittleEndian>()? } else { 0.0 };
        values.push(T::from_parts(re, im));
    }
    Ok(Field::from_values(grid, values)?)
}

/// Rows `x,y,re,im`, one per node in container order.
pub fn write_csv<T: FieldValue, W: Write>(f: &Field<T>, w: W) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["x", "y", "re", "im"])?;
    for (k, v) in f.values().iter().enumerate() {
        let z = f.grid().node_at(k);
        let (re, im) = v.parts();
        out.serialize((z.re, z.im, re, im))?;
    }
    out.flush()?;
    Ok(())
}

/// Binary PGM with the top image row at the largest `y`.
fn write_pgm<W: Write>(n: usize, pixel: impl Fn(usize, usize) -> u8, mut w: W) -> io::Result<()> {
    write!(w, "P5\n{n} {n}\n255\n")?;
    let mut row = vec![0u8; n];
    for j in (0..n).rev() {
        for (i, p) in row.iter_mut().enumerate() {
            *p = pixel(i, j);
        }
        w.write_all(&row)?;
    }
    w.flush()
}

/// Members are 255, the rest 0.
pub fn raster_pgm<W: Write>(s: &RasterSet, w: W) -> io::Result<()> {
    write_pgm(s.grid().n(), |i, j| if s.get(i, j) { 255 } else { 0 }, w)
}

/// Grey levels linear in the value between the field's min and max.
pub fn heatmap_pgm<W: Write>(f: &RealField, w: W) -> io::Result<()> {
    let lo = f.values().iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = f.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    write_pgm(f.grid().n(), |i, j| (255.0 * (f.at(i, j) - lo) / span).round() as u8, w)
}
