//! The NSSF1 field container.
//!
//! ```text
//! 0..4    magic "NSSF"
//! 4       version (1)
//! 5       flags: bit0 pressure, bit1..3 periodic x/y/z
//! 6..22   u32 LE nx, ny, nz, nt
//! 22..86  f64 LE x0, x1, y0, y1, z0, z1, t_a, t_b
//! 86..    f64 LE payload, time > component (u1, u2, u3[, P]) > z > y > x
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nssl_core::{Grid, SampledField};

pub const MAGIC: &[u8; 4] = b"NSSF";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 86;

const FLAG_PRESSURE: u8 = 1;
const FLAG_KNOWN: u8 = 0b1111;

#[derive(Debug, thiserror::Error)]
pub enum NssfError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed NSSF1 at byte {offset}: {reason}")]
    Format { offset: usize, reason: String },
    #[error(transparent)]
    Field(#[from] nssl_core::Error),
}

fn malformed(offset: usize, reason: impl Into<String>) -> NssfError {
    NssfError::Format { offset, reason: reason.into() }
}

pub fn encode(field: &SampledField) -> Vec<u8> {
    let g = field.grid();
    let m = g.nodes_per_slice();
    let comps = if field.has_pressure() { 4 } else { 3 };
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * comps * m * g.nt);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    let mut flags = if field.has_pressure() { FLAG_PRESSURE } else { 0 };
    for a in 0..3 {
        if g.periodic[a] {
            flags |= 2 << a;
        }
    }
    out.push(flags);
    for n in [g.dims[0], g.dims[1], g.dims[2], g.nt] {
        out.extend_from_slice(&(n as u32).to_le_bytes());
    }
    for a in 0..3 {
        out.extend_from_slice(&g.lower[a].to_le_bytes());
        out.extend_from_slice(&g.upper[a].to_le_bytes());
    }
    out.extend_from_slice(&g.time.0.to_le_bytes());
    out.extend_from_slice(&g.time.1.to_le_bytes());
    for kt in 0..g.nt {
        for c in 0..3 {
            for v in field.component(kt, c) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        if let Some(p) = field.pressure_slice(kt) {
            for v in p {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

fn u32_at(b: &[u8], off: usize) -> u32 {
    u32::from_le_bytes(b[off..off + 4].try_into().unwrap())
}

fn f64_at(b: &[u8], off: usize) -> f64 {
    f64::from_le_bytes(b[off..off + 8].try_into().unwrap())
}

pub fn decode(bytes: &[u8]) -> Result<SampledField, NssfError> {
    if bytes.len() < HEADER_LEN {
        return Err(malformed(bytes.len(), format!("header needs {HEADER_LEN} bytes, file has {}", bytes.len())));
    }
    if &bytes[0..4] != MAGIC {
        return Err(malformed(0, format!("bad magic {:?}", &bytes[0..4])));
    }
    if bytes[4] != VERSION {
        return Err(malformed(4, format!("unsupported version {}", bytes[4])));
    }
    let flags = bytes[5];
    if flags & !FLAG_KNOWN != 0 {
        return Err(malformed(5, format!("unknown flag bits {flags:#010b}")));
    }
    let mut dims = [0usize; 4];
    for (a, d) in dims.iter_mut().enumerate() {
        let off = 6 + 4 * a;
        *d = u32_at(bytes, off) as usize;
        if *d < 2 {
            return Err(malformed(off, format!("dimension {a} is {d}, need >= 2")));
        }
    }
    let vals: Vec<f64> = (0..8).map(|a| f64_at(bytes, 22 + 8 * a)).collect();
    let lower = [vals[0], vals[2], vals[4]];
    let upper = [vals[1], vals[3], vals[5]];
    let periodic = [flags & 2 != 0, flags & 4 != 0, flags & 8 != 0];
    let grid = Grid::new([dims[0], dims[1], dims[2]], dims[3], lower, upper, (vals[6], vals[7]), periodic)
        .map_err(|e| malformed(22, e.to_string()))?;

    let with_p = flags & FLAG_PRESSURE != 0;
    let comps = if with_p { 4 } else { 3 };
    let m = grid.nodes_per_slice();
    let expected = m
        .checked_mul(comps * grid.nt * 8)
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(|| malformed(6, "dimensions overflow"))?;
    if bytes.len() != expected {
        return Err(malformed(
            bytes.len().min(expected),
            format!("payload size mismatch: expected {expected} bytes in total, found {}", bytes.len()),
        ));
    }
    let mut velocity = Vec::with_capacity(3 * m * grid.nt);
    let mut pressure = with_p.then(|| Vec::with_capacity(m * grid.nt));
    let mut off = HEADER_LEN;
    for _ in 0..grid.nt {
        for c in 0..comps {
            for _ in 0..m {
                let v = f64_at(bytes, off);
                if !v.is_finite() {
                    return Err(malformed(off, format!("non-finite value {v}")));
                }
                if c < 3 {
                    velocity.push(v);
                } else if let Some(p) = pressure.as_mut() {
                    p.push(v);
                }
                off += 8;
            }
        }
    }
    Ok(SampledField::new(grid, velocity, pressure)?)
}

pub fn write_field<W: Write>(mut w: W, field: &SampledField) -> Result<(), NssfError> {
    w.write_all(&encode(field))?;
    w.flush()?;
    Ok(())
}

pub fn read_field<R: Read>(mut r: R) -> Result<SampledField, NssfError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    decode(&bytes)
}

pub fn save(path: &Path, field: &SampledField) -> Result<(), NssfError> {
    write_field(BufWriter::new(File::create(path)?), field)
}

pub fn load(path: &Path) -> Result<SampledField, NssfError> {
    read_field(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(with_p: bool) -> SampledField {
        let g = Grid::new([3, 4, 2], 3, [0.0, -1.0, 2.0], [1.0, 1.0, 3.0], (0.5, 1.5), [true, false, true]).unwrap();
        SampledField::from_fn(g, with_p, |t, x| ([x[0] + t, x[1] * 2.0, -x[2]], t * x[0])).unwrap()
    }

    #[test]
    fn header_layout() {
        let b = encode(&sample(true));
        assert_eq!(&b[..4], b"NSSF");
        assert_eq!(b[4], 1);
        assert_eq!(b[5], 0b1011);
        assert_eq!(u32_at(&b, 6), 3);
        assert_eq!(u32_at(&b, 18), 3);
        assert_eq!(f64_at(&b, 22 + 8 * 2), -1.0);
        assert_eq!(f64_at(&b, 78), 1.5);
        assert_eq!(b.len(), HEADER_LEN + 8 * 4 * 24 * 3);
        // first payload value is u1 at t_a, node (0,0,0)
        assert_eq!(f64_at(&b, HEADER_LEN), 0.5);
        // pressure block of the first slice follows the three velocity blocks
        assert_eq!(f64_at(&b, HEADER_LEN + 8 * 3 * 24), 0.0);
    }

    #[test]
    fn round_trip() {
        for with_p in [false, true] {
            let f = sample(with_p);
            assert_eq!(decode(&encode(&f)).unwrap(), f);
        }
    }

    #[test]
    fn structured_errors() {
        let good = encode(&sample(false));
        let off = |b: &[u8]| match decode(b) {
            Err(NssfError::Format { offset, .. }) => offset,
            other => panic!("{other:?}"),
        };
        let mut b = good.clone();
        b[0] = b'X';
        assert_eq!(off(&b), 0);
        let mut b = good.clone();
        b[4] = 2;
        assert_eq!(off(&b), 4);
        let mut b = good.clone();
        b[5] |= 0x80;
        assert_eq!(off(&b), 5);
        let mut b = good.clone();
        b[10..14].copy_from_slice(&1u32.to_le_bytes());
        assert_eq!(off(&b), 10);
        assert_eq!(off(&good[..good.len() - 8]), good.len() - 8);
        assert_eq!(off(&good[..40]), 40);
        let mut b = good.clone();
        b.extend_from_slice(&[0; 8]);
        assert_eq!(off(&b), good.len());
        let mut b = good.clone();
        b[HEADER_LEN + 16..HEADER_LEN + 24].copy_from_slice(&f64::NAN.to_le_bytes());
        assert_eq!(off(&b), HEADER_LEN + 16);
    }
}
