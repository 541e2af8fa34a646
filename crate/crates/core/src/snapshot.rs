//! Binary field snapshots.
//!
//! Layout, all little-endian: the 6-byte magic `ADMHD1`, then `u32 n`,
//! `u32 padded_n`, `u32` number of scalar component arrays, `f64 t`. Each
//! component follows as the cube `k ∈ [−K, K]³` (`K = n/2 − 1`) in
//! lexicographic order, each coefficient stored as `re, im` pairs of `f64`.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::mhd_model::MhdState;
use crate::spectral_field::{GridSpec, SpectralScalarField, SpectralVectorField};

pub const MAGIC: &[u8; 6] = b"ADMHD1";

/// Component count of a saved `(w, B)` state.
pub const STATE_FIELDS: u32 = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotHeader {
    pub grid: GridSpec,
    pub fields: u32,
    pub t: f64,
}

fn cube(grid: GridSpec) -> impl Iterator<Item = [i64; 3]> {
    let k = grid.k_axis_max();
    (-k..=k).flat_map(move |a| (-k..=k).flat_map(move |b| (-k..=k).map(move |c| [a, b, c])))
}

fn write_header<W: Write>(out: &mut W, h: &SnapshotHeader) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&(h.grid.n_per_axis() as u32).to_le_bytes())?;
    out.write_all(&(h.grid.padded_n() as u32).to_le_bytes())?;
    out.write_all(&h.fields.to_le_bytes())?;
    out.write_all(&h.t.to_le_bytes())?;
    Ok(())
}

fn read_array<const L: usize, R: Read>(input: &mut R) -> Result<[u8; L]> {
    let mut buf = [0u8; L];
    input
        .read_exact(&mut buf)
        .map_err(|e| Error::Snapshot(format!("truncated snapshot: {e}")))?;
    Ok(buf)
}

pub fn read_header<R: Read>(input: &mut R) -> Result<SnapshotHeader> {
    if &read_array::<6, _>(input)? != MAGIC {
        return Err(Error::Snapshot("bad magic".into()));
    }
    let n = u32::from_le_bytes(read_array(input)?) as usize;
    let padded = u32::from_le_bytes(read_array(input)?) as usize;
    let fields = u32::from_le_bytes(read_array(input)?);
    let t = f64::from_le_bytes(read_array(input)?);
    let grid = GridSpec::new(n, padded).map_err(|e| Error::Snapshot(format!("invalid grid: {e}")))?;
    Ok(SnapshotHeader { grid, fields, t })
}

fn write_component<W: Write>(out: &mut W, grid: GridSpec, get: impl Fn([i64; 3]) -> Complex64) -> Result<()> {
    for k in cube(grid) {
        let c = get(k);
        out.write_all(&c.re.to_le_bytes())?;
        out.write_all(&c.im.to_le_bytes())?;
    }
    Ok(())
}

fn read_component<R: Read>(input: &mut R, grid: GridSpec, dst: &mut [Complex64]) -> Result<()> {
    for k in cube(grid) {
        let re = f64::from_le_bytes(read_array(input)?);
        let im = f64::from_le_bytes(read_array(input)?);
        if let Some(i) = grid.index(k) {
            dst[i] = Complex64::new(re, im);
        }
    }
    Ok(())
}

fn check_grid(found: GridSpec, expected: Option<GridSpec>) -> Result<()> {
    match expected {
        Some(g) if g != found => Err(Error::Snapshot(format!(
            "grid mismatch: snapshot has n={} padded_n={}, expected n={} padded_n={}",
            found.n_per_axis(),
            found.padded_n(),
            g.n_per_axis(),
            g.padded_n()
        ))),
        _ => Ok(()),
    }
}

pub fn write_state<W: Write>(mut out: W, state: &MhdState) -> Result<()> {
    let grid = state.grid();
    write_header(&mut out, &SnapshotHeader { grid, fields: STATE_FIELDS, t: state.t })?;
    for f in [&state.w, &state.b] {
        for c in 0..3 {
            write_component(&mut out, grid, |k| f.get(k)[c])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a `(w, B)` snapshot; `expected` rejects any other grid.
pub fn read_state<R: Read>(mut input: R, expected: Option<GridSpec>) -> Result<MhdState> {
    let h = read_header(&mut input)?;
    check_grid(h.grid, expected)?;
    if h.fields != STATE_FIELDS {
        return Err(Error::Snapshot(format!("expected {STATE_FIELDS} components, found {}", h.fields)));
    }
    let len = h.grid.mode_count();
    let read_vec = |input: &mut R| -> Result<SpectralVectorField> {
        let mut comps: [Vec<Complex64>; 3] = std::array::from_fn(|_| vec![Complex64::default(); len]);
        for comp in comps.iter_mut() {
            read_component(input, h.grid, comp)?;
        }
        let coeffs = (0..len).map(|i| [comps[0][i], comps[1][i], comps[2][i]]).collect();
        SpectralVectorField::from_coeffs(h.grid, coeffs)
    };
    let w = read_vec(&mut input)?;
    let b = read_vec(&mut input)?;
    Ok(MhdState { w, b, t: h.t })
}

pub fn write_scalar<W: Write>(mut out: W, field: &SpectralScalarField, t: f64) -> Result<()> {
    let grid = field.grid();
    write_header(&mut out, &SnapshotHeader { grid, fields: 1, t })?;
    write_component(&mut out, grid, |k| field.get(k))?;
    out.flush()?;
    Ok(())
}

pub fn read_scalar<R: Read>(mut input: R, expected: Option<GridSpec>) -> Result<(SpectralScalarField, f64)> {
    let h = read_header(&mut input)?;
    check_grid(h.grid, expected)?;
    if h.fields != 1 {
        return Err(Error::Snapshot(format!("expected 1 component, found {}", h.fields)));
    }
    let mut coeffs = vec![Complex64::default(); h.grid.mode_count()];
    read_component(&mut input, h.grid, &mut coeffs)?;
    Ok((SpectralScalarField::from_coeffs(h.grid, coeffs)?, h.t))
}

pub fn save_state(path: &Path, state: &MhdState) -> Result<()> {
    write_state(std::io::BufWriter::new(std::fs::File::create(path)?), state)
}

pub fn load_state(path: &Path, expected: Option<GridSpec>) -> Result<MhdState> {
    read_state(std::io::BufReader::new(std::fs::File::open(path)?), expected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initial::random_solenoidal;

    fn state(g: GridSpec) -> MhdState {
        MhdState { w: random_solenoidal(g, 1, -1.0, (1.0, 4.0), 1.0), b: random_solenoidal(g, 2, 0.0, (1.0, 3.0), 0.3), t: 0.25 }
    }

    #[test]
    fn state_round_trip_is_bit_identical() {
        let g = GridSpec::with_default_padding(8).unwrap();
        let s = state(g);
        let mut buf = Vec::new();
        write_state(&mut buf, &s).unwrap();
        assert_eq!(buf.len(), 6 + 12 + 8 + 6 * 7usize.pow(3) * 16);
        assert_eq!(read_state(buf.as_slice(), Some(g)).unwrap(), s);
    }

    #[test]
    fn header_layout() {
        let g = GridSpec::new(8, 16).unwrap();
        let mut buf = Vec::new();
        write_state(&mut buf, &MhdState::zeros(g)).unwrap();
        assert_eq!(&buf[..6], b"ADMHD1");
        assert_eq!(&buf[6..10], &8u32.to_le_bytes());
        assert_eq!(&buf[10..14], &16u32.to_le_bytes());
        assert_eq!(&buf[14..18], &6u32.to_le_bytes());
        assert_eq!(&buf[18..26], &0f64.to_le_bytes());
    }

    #[test]
    fn rejects_mismatch_and_garbage() {
        let g = GridSpec::with_default_padding(8).unwrap();
        let mut buf = Vec::new();
        write_state(&mut buf, &state(g)).unwrap();
        let other = GridSpec::with_default_padding(6).unwrap();
        assert!(matches!(read_state(buf.as_slice(), Some(other)), Err(Error::Snapshot(_))));
        assert!(matches!(read_state(&buf[..100], Some(g)), Err(Error::Snapshot(_))));
        assert!(matches!(read_scalar(buf.as_slice(), Some(g)), Err(Error::Snapshot(_))));
        buf[0] = b'X';
        assert!(matches!(read_state(buf.as_slice(), None), Err(Error::Snapshot(_))));
    }

    #[test]
    fn scalar_round_trip() {
        let g = GridSpec::with_default_padding(6).unwrap();
        let mut c = vec![Complex64::default(); g.mode_count()];
        c[g.index([1, 0, 2]).unwrap()] = Complex64::new(0.5, -1.0);
        c[g.index([-1, 0, -2]).unwrap()] = Complex64::new(0.5, 1.0);
        let f = SpectralScalarField::from_coeffs(g, c).unwrap();
        let mut buf = Vec::new();
        write_scalar(&mut buf, &f, 1.5).unwrap();
        let (back, t) = read_scalar(buf.as_slice(), Some(g)).unwrap();
        assert_eq!(back, f);
        assert_eq!(t, 1.5);
    }
}
