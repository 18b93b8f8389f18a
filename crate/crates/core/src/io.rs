//! Binary field container and CSV export.
//!
//! Container layout (all little-endian 64-bit words): the magic `PRFD0001`,
//! then nx, ny as u64, then Y, grading tag (0 = uniform, 1 = exponential),
//! grading beta, dt and the lambda metadata as f64, then row-major f64
//! values. Profiles are stored as fields with ny = 1.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{build_grid, Field, Grading, Grid, GridSpec, Profile};

const MAGIC: &[u8; 8] = b"PRFD0001";

fn grading_tag(g: Grading) -> (u64, f64) {
    match g {
        Grading::Uniform => (0, 0.0),
        Grading::Exponential { beta } => (1, beta),
    }
}

fn grading_from(tag: u64, beta: f64) -> Result<Grading> {
    match tag {
        0 => Ok(Grading::Uniform),
        1 => Ok(Grading::Exponential { beta }),
        other => Err(Error::Format(format!("unknown grading tag {other}"))),
    }
}

/// Writes a field (lambda_meta is free metadata, e.g. a weight exponent the
/// values were produced with).
pub fn write_field(path: &Path, field: &Field, lambda_meta: f64) -> Result<()> {
    let spec = field.grid().spec;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(spec.nx as u64).to_le_bytes())?;
    w.write_all(&(spec.ny as u64).to_le_bytes())?;
    w.write_all(&spec.y_max.to_le_bytes())?;
    let (tag, beta) = grading_tag(spec.grading);
    w.write_all(&tag.to_le_bytes())?;
    w.write_all(&beta.to_le_bytes())?;
    w.write_all(&spec.dt.to_le_bytes())?;
    w.write_all(&lambda_meta.to_le_bytes())?;
    for i in 0..spec.nx {
        for j in 0..spec.ny {
            w.write_all(&field.values()[[i, j]].to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads a field back; the grid is rebuilt from the stored spec.
pub fn read_field(path: &Path) -> Result<(Field, f64)> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic in {}", path.display())));
    }
    let mut u64buf = [0u8; 8];
    let mut read_u64 = |r: &mut dyn Read| -> Result<u64> {
        r.read_exact(&mut u64buf)?;
        Ok(u64::from_le_bytes(u64buf))
    };
    let nx = read_u64(&mut r)? as usize;
    let ny = read_u64(&mut r)? as usize;
    let mut f64buf = [0u8; 8];
    let mut read_f64 = |r: &mut dyn Read| -> Result<f64> {
        r.read_exact(&mut f64buf)?;
        Ok(f64::from_le_bytes(f64buf))
    };
    let y_max = read_f64(&mut r)?;
    let tag = {
        let mut b = [0u8; 8];
        r.read_exact(&mut b)?;
        u64::from_le_bytes(b)
    };
    let beta = read_f64(&mut r)?;
    let dt = read_f64(&mut r)?;
    let lambda_meta = read_f64(&mut r)?;
    let grading = grading_from(tag, beta)?;

    // Profiles travel as ny = 1 slabs outside the Grid validity range.
    let values = {
        let mut vals = ndarray::Array2::zeros((nx, ny));
        for i in 0..nx {
            for j in 0..ny {
                vals[[i, j]] = read_f64(&mut r)?;
            }
        }
        vals
    };
    let grid = build_grid(GridSpec { nx, ny, y_max, dt, grading })?;
    Ok((Field::from_array(&grid, values), lambda_meta))
}

// Profiles get their own tiny format: magic `PRPT0001`, nx, then values.
const PROFILE_MAGIC: &[u8; 8] = b"PRPT0001";

pub fn write_profile(path: &Path, profile: &Profile) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(PROFILE_MAGIC)?;
    w.write_all(&(profile.values().len() as u64).to_le_bytes())?;
    for v in profile.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_profile(path: &Path, grid: &Arc<Grid>) -> Result<Profile> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != PROFILE_MAGIC {
        return Err(Error::Format(format!("bad profile magic in {}", path.display())));
    }
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    let n = u64::from_le_bytes(b) as usize;
    if n != grid.nx() {
        return Err(Error::Format(format!(
            "profile length {n} does not match grid nx = {}",
            grid.nx()
        )));
    }
    let mut vals = Vec::with_capacity(n);
    for _ in 0..n {
        r.read_exact(&mut b)?;
        vals.push(f64::from_le_bytes(b));
    }
    Ok(Profile::from_values(grid, vals))
}

/// CSV export (x, y, value) for plotting.
pub fn write_field_csv(path: &Path, field: &Field) -> Result<()> {
    let grid = field.grid();
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "x,y,value")?;
    for i in 0..grid.nx() {
        for j in 0..grid.ny() {
            writeln!(w, "{},{},{}", grid.x[i], grid.y[j], field.values()[[i, j]])?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    #[test]
    fn field_container_round_trips_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let g = build_grid(GridSpec::exponential(8, 33, 12.0, 2e-3, 1.5)).unwrap();
        let f = Field::from_fn(&g, |x, y| (x * 7.3).sin() * (1.0 + y).powf(-2.2));
        let path = dir.path().join("field.bin");
        write_field(&path, &f, 1.25).unwrap();
        let (back, lambda) = read_field(&path).unwrap();
        assert_eq!(lambda, 1.25);
        assert_eq!(back.grid().spec, g.spec);
        for i in 0..g.nx() {
            for j in 0..g.ny() {
                assert_eq!(back.values()[[i, j]], f.values()[[i, j]]);
            }
        }
    }

    #[test]
    fn profile_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let g = build_grid(GridSpec::uniform(16, 9, 5.0, 1e-3)).unwrap();
        let p = Profile::from_fn(&g, |x| 1.0 + 0.3 * (x * 2.0).cos());
        let path = dir.path().join("profile.bin");
        write_profile(&path, &p).unwrap();
        let back = read_profile(&path, &g).unwrap();
        assert_eq!(back.values(), p.values());
    }

    #[test]
    fn bad_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.bin");
        std::fs::write(&path, b"NOTMAGIC----------------").unwrap();
        assert!(matches!(read_field(&path), Err(Error::Format(_))));
    }
}
