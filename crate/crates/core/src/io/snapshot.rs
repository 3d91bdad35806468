//! Binary snapshots: a fixed header followed by little-endian `f64` samples.
//!
//! ```text
//! "ALFV" | version u32 | n u64 | L f64 | mu f64 | t f64 | field count u64 | payload
//! ```
//!
//! Fields are stored as `z+` (3 components), `z-` (3), `phi+` (3), `phi-` (3),
//! each in x1-fastest order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::characteristics::LabelFields;
use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::mhd::ElsasserState;
use crate::spectral::Grid;

pub const MAGIC: &[u8; 4] = b"ALFV";
pub const VERSION: u32 = 1;
pub const FIELD_COUNT: u64 = 12;

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub n: usize,
    pub half_length: f64,
    pub mu: f64,
    pub t: f64,
    pub fields: Vec<ScalarField>,
}

impl Snapshot {
    pub fn from_state(state: &ElsasserState, labels: &LabelFields, half_length: f64, mu: f64) -> Self {
        let mut fields: Vec<ScalarField> = Vec::with_capacity(FIELD_COUNT as usize);
        fields.extend(state.z_plus.comps.iter().cloned());
        fields.extend(state.z_minus.comps.iter().cloned());
        for s in &labels.phi {
            fields.extend(s.iter().cloned());
        }
        Self { n: state.n(), half_length, mu, t: state.t, fields }
    }

    pub fn state(&self) -> ElsasserState {
        let f = &self.fields;
        ElsasserState {
            t: self.t,
            z_plus: VectorField::new(f[0].clone(), f[1].clone(), f[2].clone()),
            z_minus: VectorField::new(f[3].clone(), f[4].clone(), f[5].clone()),
        }
    }

    /// Labels rebuilt from the stored residuals with weight offset `r`.
    pub fn labels(&self, grid: &Grid, r: f64) -> LabelFields {
        let mut l = LabelFields::initial(grid, r);
        l.t = self.t;
        let f = &self.fields;
        l.phi = [
            [f[6].clone(), f[7].clone(), f[8].clone()],
            [f[9].clone(), f[10].clone(), f[11].clone()],
        ];
        l.compute_weights(grid, r);
        l
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.n as u64).to_le_bytes())?;
        w.write_all(&self.half_length.to_le_bytes())?;
        w.write_all(&self.mu.to_le_bytes())?;
        w.write_all(&self.t.to_le_bytes())?;
        w.write_all(&(self.fields.len() as u64).to_le_bytes())?;
        for f in &self.fields {
            let mut buf = Vec::with_capacity(8 * f.as_slice().len());
            for v in f.as_slice() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mismatch = |msg: String| Error::HeaderMismatch { path: path.to_path_buf(), msg };
        let mut r = BufReader::new(File::open(path)?);
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        const HEADER: usize = 4 + 4 + 8 * 5;
        if bytes.len() < HEADER {
            return Err(mismatch(format!("file too short ({} bytes)", bytes.len())));
        }
        if &bytes[0..4] != MAGIC {
            return Err(mismatch("bad magic".into()));
        }
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(mismatch(format!("unsupported version {version}")));
        }
        let n = u64_at(8) as usize;
        let half_length = f64_at(16);
        let mu = f64_at(24);
        let t = f64_at(32);
        let count = u64_at(40);
        if count != FIELD_COUNT {
            return Err(mismatch(format!("expected {FIELD_COUNT} fields, header says {count}")));
        }
        let len = n.checked_pow(3).ok_or_else(|| mismatch(format!("grid size {n} overflows")))?;
        let expect = HEADER + 8 * len * count as usize;
        if bytes.len() != expect {
            return Err(mismatch(format!("payload length {} does not match header ({expect})", bytes.len())));
        }
        let fields = (0..count as usize)
            .map(|k| {
                let base = HEADER + 8 * len * k;
                ScalarField::from_vec(n, (0..len).map(|i| f64_at(base + 8 * i)).collect())
            })
            .collect();
        Ok(Self { n, half_length, mu, t, fields })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let g = Grid::new(8, 2.5).unwrap();
        let mut labels = LabelFields::initial(&g, 100.0);
        labels.phi[1][2] = g.sample(|a, b, c| (a * 1.3).sin() + b * c * 1e-17);
        let state = ElsasserState {
            t: 0.1 + 0.2,
            z_plus: VectorField::new(g.sample(|a, _, _| a.cos() / 3.0), g.sample(|_, b, _| -b), ScalarField::zeros(8)),
            z_minus: VectorField::new(ScalarField::constant(8, f64::MIN_POSITIVE), ScalarField::zeros(8), g.sample(|_, _, c| c.exp())),
        };
        let snap = Snapshot::from_state(&state, &labels, 2.5, 0.3);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.alfv");
        snap.write(&p).unwrap();
        let back = Snapshot::read(&p).unwrap();
        assert_eq!(back, snap);
        assert_eq!(back.state(), state);
        assert_eq!(back.labels(&g, 100.0).phi, labels.phi);
        assert_eq!(std::fs::metadata(&p).unwrap().len(), 48 + 8 * 512 * 12);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.alfv");
        std::fs::write(&p, b"ALFV\x01\0\0\0short").unwrap();
        assert!(matches!(Snapshot::read(&p), Err(Error::HeaderMismatch { .. })));
        let g = Grid::new(8, 1.0).unwrap();
        let snap = Snapshot::from_state(&ElsasserState::zeros(8), &LabelFields::initial(&g, 100.0), 1.0, 0.5);
        let mut bytes = Vec::new();
        snap.write_to(&mut bytes).unwrap();
        bytes.pop();
        std::fs::write(&p, &bytes).unwrap();
        assert!(matches!(Snapshot::read(&p), Err(Error::HeaderMismatch { .. })));
        bytes[0] = b'X';
        std::fs::write(&p, &bytes).unwrap();
        assert!(matches!(Snapshot::read(&p), Err(Error::HeaderMismatch { .. })));
        assert!(matches!(Snapshot::read(&dir.path().join("missing")), Err(Error::Io(_))));
    }
}
