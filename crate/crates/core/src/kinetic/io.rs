//! CSV and binary persistence of grid densities.

use std::io::{Read, Write};

use super::grid::{GridDensity, PhaseGrid};
use super::solver::{KineticSolution, MassLog};
use crate::{Error, Result};

const DENSITY_MAGIC: &[u8; 8] = b"TCGRID01";
const SOLUTION_MAGIC: &[u8; 8] = b"TCSOLN01";

/// `f_t{t}.csv` with the time printed to six decimals.
pub fn snapshot_file_name(t: f64) -> String {
    format!("f_t{t:.6}.csv")
}

/// Header row `nx,nv,v_max,t`, one data row, then `nx` rows of `nv` values.
pub fn write_csv<W: Write>(f: &GridDensity, writer: W) -> Result<()> {
    let mut out = csv::WriterBuilder::new().flexible(true).from_writer(writer);
    out.write_record(["nx", "nv", "v_max", "t"])?;
    out.write_record(&[
        f.grid.nx.to_string(),
        f.grid.nv.to_string(),
        f.grid.v_max.to_string(),
        f.t.to_string(),
    ])?;
    for i in 0..f.grid.nx {
        out.write_record(f.row(i).iter().map(f64::to_string))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(reader: R) -> Result<GridDensity> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).has_headers(true).from_reader(reader);
    let mut records = rdr.records();
    let bad = |what: &str| Error::Schema(format!("grid density csv: {what}"));
    let head = records.next().ok_or_else(|| bad("missing dimensions row"))??;
    let field = |k: usize| -> Result<f64> {
        head.get(k)
            .and_then(|s| s.parse::<f64>().ok())
            .ok_or_else(|| bad("malformed dimensions row"))
    };
    let grid = PhaseGrid::new(field(0)? as usize, field(1)? as usize, field(2)?)?;
    let t = field(3)?;
    let mut values = Vec::with_capacity(grid.cells());
    for rec in records {
        let rec = rec?;
        if rec.len() != grid.nv {
            return Err(bad("row length differs from nv"));
        }
        for s in rec.iter() {
            values.push(s.parse::<f64>().map_err(|_| bad("non-numeric value"))?);
        }
    }
    GridDensity::new(grid, t, values)
}

fn put_u64(out: &mut Vec<u8>, x: u64) {
    out.extend_from_slice(&x.to_le_bytes());
}

fn put_f64(out: &mut Vec<u8>, x: f64) {
    out.extend_from_slice(&x.to_le_bytes());
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Schema("truncated binary grid data".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

fn encode_density(f: &GridDensity, out: &mut Vec<u8>) {
    put_u64(out, f.grid.nx as u64);
    put_u64(out, f.grid.nv as u64);
    put_f64(out, f.grid.v_max);
    put_f64(out, f.t);
    for &v in &f.values {
        put_f64(out, v);
    }
}

fn decode_density(c: &mut Cursor<'_>) -> Result<GridDensity> {
    let nx = c.u64()? as usize;
    let nv = c.u64()? as usize;
    let grid = PhaseGrid::new(nx, nv, c.f64()?)?;
    let t = c.f64()?;
    let values = (0..grid.cells()).map(|_| c.f64()).collect::<Result<Vec<_>>>()?;
    GridDensity::new(grid, t, values)
}

fn check_magic(c: &mut Cursor<'_>, magic: &[u8; 8]) -> Result<()> {
    if c.take(8)? != magic {
        return Err(Error::Schema(format!(
            "expected binary header {}",
            String::from_utf8_lossy(magic)
        )));
    }
    Ok(())
}

/// Little-endian: magic, nx, nv, v_max, t, values.
pub fn write_binary<W: Write>(f: &GridDensity, mut writer: W) -> Result<()> {
    let mut out = DENSITY_MAGIC.to_vec();
    encode_density(f, &mut out);
    writer.write_all(&out)?;
    Ok(())
}

pub fn read_binary<R: Read>(mut reader: R) -> Result<GridDensity> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    let mut c = Cursor { bytes: &bytes, pos: 0 };
    check_magic(&mut c, DENSITY_MAGIC)?;
    decode_density(&mut c)
}

pub fn write_solution<W: Write>(sol: &KineticSolution, mut writer: W) -> Result<()> {
    let mut out = SOLUTION_MAGIC.to_vec();
    put_u64(&mut out, sol.log.steps as u64);
    put_f64(&mut out, sol.log.max_step_drift);
    put_f64(&mut out, sol.log.cumulative_drift);
    put_u64(&mut out, sol.frames.len() as u64);
    for f in &sol.frames {
        encode_density(f, &mut out);
    }
    writer.write_all(&out)?;
    Ok(())
}

pub fn read_solution<R: Read>(mut reader: R) -> Result<KineticSolution> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    let mut c = Cursor { bytes: &bytes, pos: 0 };
    check_magic(&mut c, SOLUTION_MAGIC)?;
    let log = MassLog {
        steps: c.u64()? as usize,
        max_step_drift: c.f64()?,
        cumulative_drift: c.f64()?,
    };
    let count = c.u64()? as usize;
    let frames = (0..count).map(|_| decode_density(&mut c)).collect::<Result<Vec<_>>>()?;
    if c.pos != bytes.len() {
        return Err(Error::Schema("trailing bytes after kinetic solution".into()));
    }
    Ok(KineticSolution { frames, log })
}
