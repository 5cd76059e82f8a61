//! Field snapshots, CSV export and trajectory output.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::grid::{Field, Grid, GridSpec};

pub const MAGIC: &[u8; 4] = b"BDF1";
pub const HEADER_LEN: usize = 32;

/// Encodes a field as `BDF1` bytes: magic, `d` and `N` as u32, a reserved
/// zero u32, then `L` and `t` as f64, followed by the values (all
/// little-endian, row-major).
pub fn encode_field(field: &Field, t: f64) -> Vec<u8> {
    let g = field.grid();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * field.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(g.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(g.n() as u32).to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    out.extend_from_slice(&g.half_width().to_le_bytes());
    out.extend_from_slice(&t.to_le_bytes());
    for v in field.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_field(bytes: &[u8], path: &Path) -> Result<(Field, f64)> {
    let bad = |reason: String| Error::Snapshot {
        path: path.to_path_buf(),
        reason,
    };
    if bytes.len() < HEADER_LEN {
        return Err(bad(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[0..4] != MAGIC {
        return Err(bad("bad magic".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let (dim, n) = (u32_at(4) as usize, u32_at(8) as usize);
    let (half_width, t) = (f64_at(16), f64_at(24));
    let grid = Grid::new(GridSpec::new(dim, half_width, n)).map_err(|e| bad(e.to_string()))?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != 8 * grid.len() {
        return Err(bad(format!(
            "expected {} data bytes, found {}",
            8 * grid.len(),
            body.len()
        )));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let field = Field::from_values(grid, values).map_err(|e| bad(e.to_string()))?;
    Ok((field, t))
}

pub fn write_field(path: &Path, field: &Field, t: f64) -> Result<()> {
    write_atomic(path, &encode_field(field, t))
}

pub fn read_field(path: &Path) -> Result<(Field, f64)> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    decode_field(&bytes, path)
}

fn partial_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".partial");
    PathBuf::from(s)
}

/// Writes `bytes` to `path.partial`, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = partial_path(path);
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// CSV writer that keeps the file at `<path>.partial` until `finish`.
/// Every row is written whole and flushed.
pub struct CsvWriter {
    path: PathBuf,
    tmp: PathBuf,
    out: BufWriter<File>,
}

impl CsvWriter {
    pub fn create(path: &Path, header: &str) -> Result<Self> {
        let tmp = partial_path(path);
        let mut w = Self {
            path: path.to_path_buf(),
            out: BufWriter::new(File::create(&tmp)?),
            tmp,
        };
        w.row(header)?;
        Ok(w)
    }

    pub fn row(&mut self, line: &str) -> Result<()> {
        self.out.write_all(format!("{line}\n").as_bytes())?;
        self.out.flush()?;
        Ok(())
    }

    pub fn finish(self) -> Result<PathBuf> {
        let file = self.out.into_inner().map_err(|e| e.into_error())?;
        file.sync_all()?;
        fs::rename(&self.tmp, &self.path)?;
        Ok(self.path)
    }
}

pub fn write_csv(path: &Path, header: &str, rows: &[String]) -> Result<PathBuf> {
    let mut w = CsvWriter::create(path, header)?;
    for r in rows {
        w.row(r)?;
    }
    w.finish()
}

/// `index,x,value` export of a 1D field.
pub fn write_field_csv(path: &Path, field: &Field) -> Result<PathBuf> {
    let g = field.grid();
    if g.dim() != 1 {
        return Err(Error::InvalidParameter(format!(
            "CSV export is 1D only, field has d={}",
            g.dim()
        )));
    }
    let rows: Vec<String> = field
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| format!("{i},{:e},{v:e}", g.coord(i)))
        .collect();
    write_csv(path, "index,x,value", &rows)
}

/// Writes `u_NNNNN.bdf`/`v_NNNNN.bdf` per snapshot and `manifest.csv`
/// (`step,t,dt,mass_u,mass_v,max_p`; `dt` is the last step taken before the
/// snapshot).
pub fn export_trajectory(dir: &Path, traj: &Trajectory, gamma: f64) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut manifest = CsvWriter::create(&dir.join("manifest.csv"), "step,t,dt,mass_u,mass_v,max_p")?;
    for (k, s) in traj.snapshots.iter().enumerate() {
        write_field(&dir.join(format!("u_{k:05}.bdf")), &s.u, s.t)?;
        write_field(&dir.join(format!("v_{k:05}.bdf")), &s.v, s.t)?;
        let step = traj.snapshot_steps[k];
        let dt = if step == 0 { 0.0 } else { traj.steps[step - 1].dt };
        let max_p = s.pressure(gamma)?.max();
        manifest.row(&format!(
            "{step},{:e},{dt:e},{:e},{:e},{max_p:e}",
            s.t,
            s.u.integral(),
            s.v.integral()
        ))?;
    }
    manifest.finish()?;
    Ok(())
}
