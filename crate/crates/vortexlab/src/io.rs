//! Field snapshot formats shared by the solvers.
//!
//! Binary layout (little endian): magic `VLF1`, nx: u64, ny: u64,
//! x0: f64, y0: f64, h: f64, time: f64, nx·ny values as f64, then nx·ny mask
//! bytes (0/1). Values are row-major with x fastest.

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::lattice::{Lattice, ScalarField2D};
use std::io::{Read, Write};

const MAGIC: &[u8; 4] = b"VLF1";

pub fn write_field_binary<W: Write>(w: &mut W, f: &ScalarField2D) -> std::io::Result<()> {
    let l = &f.lattice;
    w.write_all(MAGIC)?;
    w.write_all(&(l.nx as u64).to_le_bytes())?;
    w.write_all(&(l.ny as u64).to_le_bytes())?;
    for v in [l.origin.x, l.origin.y, l.h, f.time] {
        w.write_all(&v.to_le_bytes())?;
    }
    for v in &f.values {
        w.write_all(&v.to_le_bytes())?;
    }
    let mask: Vec<u8> = f.mask.iter().map(|&m| m as u8).collect();
    w.write_all(&mask)
}

pub fn read_field_binary<R: Read>(r: &mut R) -> Result<ScalarField2D> {
    let io = |e: std::io::Error| Error::InvalidInput(format!("field read: {e}"));
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != MAGIC {
        return Err(Error::InvalidInput("not a field snapshot".into()));
    }
    let mut b8 = [0u8; 8];
    let mut next_u64 = |r: &mut R| -> Result<u64> {
        r.read_exact(&mut b8).map_err(io)?;
        Ok(u64::from_le_bytes(b8))
    };
    let nx = next_u64(r)? as usize;
    let ny = next_u64(r)? as usize;
    let mut f = [0.0f64; 4];
    for v in f.iter_mut() {
        *v = f64::from_bits(next_u64(r)?);
    }
    let lattice = Lattice::new(nx, ny, Vec2::new(f[0], f[1]), f[2])?;
    let mut values = vec![0.0; lattice.len()];
    for v in values.iter_mut() {
        *v = f64::from_bits(next_u64(r)?);
    }
    let mut mask = vec![0u8; lattice.len()];
    r.read_exact(&mut mask).map_err(io)?;
    Ok(ScalarField2D {
        lattice,
        mask: mask.into_iter().map(|m| m != 0).collect(),
        values,
        time: f[3],
    })
}

/// `x,y,value` rows over the mask.
pub fn write_field_csv<W: Write>(w: &mut W, f: &ScalarField2D) -> std::io::Result<()> {
    writeln!(w, "x,y,value")?;
    for k in 0..f.lattice.len() {
        if f.mask[k] {
            let p = f.lattice.node_at(k);
            writeln!(w, "{},{},{}", p.x, p.y, f.values[k])?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Shape;

    #[test]
    fn binary_round_trip() {
        let shape = Shape::unit_disk();
        let lat = Lattice::covering(&shape, 10).unwrap();
        let mut f = ScalarField2D::from_fn(lat, lat.mask_for(&shape), |p| p.x - 3.0 * p.y);
        f.time = 0.25;
        let mut buf = Vec::new();
        write_field_binary(&mut buf, &f).unwrap();
        let g = read_field_binary(&mut buf.as_slice()).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn csv_has_header_and_masked_rows() {
        let shape = Shape::square(1.0);
        let lat = Lattice::covering(&shape, 4).unwrap();
        let f = ScalarField2D::from_fn(lat, lat.mask_for(&shape), |_| 1.0);
        let mut buf = Vec::new();
        write_field_csv(&mut buf, &f).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("x,y,value\n"));
        assert_eq!(s.lines().count(), 1 + 9);
    }
}
