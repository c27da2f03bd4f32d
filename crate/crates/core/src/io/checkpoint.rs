use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"PFEM";

/// Restart state in global DoF numbering.
///
/// Layout, little-endian: magic `PFEM`, u32 version, u64 step, f64 time,
/// f64 time step, u64 scheme length and UTF-8 bytes, u64 velocity length and
/// f64 values, u64 pressure length and f64 values.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub step: u64,
    pub t: f64,
    pub dt: f64,
    pub scheme: String,
    pub u: Vec<f64>,
    pub p: Vec<f64>,
}

fn put_vec<W: Write>(w: &mut W, v: &[f64]) -> std::io::Result<()> {
    w.write_all(&(v.len() as u64).to_le_bytes())?;
    for x in v {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn take<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}

fn take_len<R: Read>(r: &mut R) -> Result<usize> {
    let n = u64::from_le_bytes(take(r)?);
    // Guards the allocation below against corrupt lengths.
    usize::try_from(n)
        .ok()
        .filter(|&n| n < 1 << 40)
        .ok_or_else(|| Error::Config(format!("checkpoint length {n} is implausible")))
}

fn take_vec<R: Read>(r: &mut R) -> Result<Vec<f64>> {
    let n = take_len(r)?;
    let mut bytes = Vec::new();
    r.take(8 * n as u64).read_to_end(&mut bytes)?;
    if bytes.len() != 8 * n {
        return Err(Error::Config("checkpoint is truncated".into()));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
}

impl Checkpoint {
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        w.write_all(&self.step.to_le_bytes())?;
        w.write_all(&self.t.to_le_bytes())?;
        w.write_all(&self.dt.to_le_bytes())?;
        w.write_all(&(self.scheme.len() as u64).to_le_bytes())?;
        w.write_all(self.scheme.as_bytes())?;
        put_vec(&mut w, &self.u)?;
        put_vec(&mut w, &self.p)?;
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        if &take::<4, _>(&mut r)? != MAGIC {
            return Err(Error::Config("not a checkpoint file".into()));
        }
        let version = u32::from_le_bytes(take(&mut r)?);
        if version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!("unsupported checkpoint version {version}")));
        }
        let step = u64::from_le_bytes(take(&mut r)?);
        let t = f64::from_le_bytes(take(&mut r)?);
        let dt = f64::from_le_bytes(take(&mut r)?);
        let n = take_len(&mut r)?;
        let mut name = Vec::new();
        (&mut r).take(n as u64).read_to_end(&mut name)?;
        if name.len() != n {
            return Err(Error::Config("checkpoint is truncated".into()));
        }
        let scheme = String::from_utf8(name).map_err(|_| Error::Config("checkpoint scheme is not UTF-8".into()))?;
        let u = take_vec(&mut r)?;
        let p = take_vec(&mut r)?;
        if r.read(&mut [0u8; 1])? != 0 {
            return Err(Error::Config("trailing bytes after checkpoint".into()));
        }
        Ok(Checkpoint { step, t, dt, scheme, u, p })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(48 + self.scheme.len() + 8 * (self.u.len() + self.p.len()));
        self.write(&mut out).expect("writing to memory");
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read(BufReader::new(File::open(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> Checkpoint {
        Checkpoint {
            step: 17,
            t: 0.85,
            dt: 0.05,
            scheme: "yosida2".into(),
            u: vec![1.0, -0.0, f64::MIN_POSITIVE, 1e300],
            p: vec![f64::NAN, 2.5],
        }
    }

    #[test]
    fn layout() {
        let b = sample().to_bytes();
        assert_eq!(&b[..4], b"PFEM");
        assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(b[8..16].try_into().unwrap()), 17);
        assert_eq!(b.len(), 4 + 4 + 8 + 8 + 8 + 8 + 7 + 8 + 32 + 8 + 16);
    }

    #[test]
    fn round_trip_is_bitwise() {
        let c = sample();
        let back = Checkpoint::read(c.to_bytes().as_slice()).unwrap();
        assert_eq!(back.to_bytes(), c.to_bytes());
        assert!(back.p[0].is_nan());
        assert_eq!(back.u[1].to_bits(), (-0.0f64).to_bits());
    }

    #[test]
    fn corrupt_input_is_rejected() {
        let b = sample().to_bytes();
        assert!(Checkpoint::read(&b[..b.len() - 1]).is_err());
        let mut extra = b.clone();
        extra.push(0);
        assert!(Checkpoint::read(extra.as_slice()).is_err());
        let mut magic = b.clone();
        magic[0] = b'X';
        assert!(Checkpoint::read(magic.as_slice()).is_err());
        let mut ver = b;
        ver[4] = 9;
        assert!(Checkpoint::read(ver.as_slice()).is_err());
    }

    proptest! {
        #[test]
        fn arbitrary_payload_round_trips(
            step in any::<u64>(), t in any::<f64>(), dt in any::<f64>(), scheme in ".{0,12}",
            u in prop::collection::vec(any::<f64>(), 0..40), p in prop::collection::vec(any::<f64>(), 0..20),
        ) {
            let c = Checkpoint { step, t, dt, scheme, u, p };
            let bytes = c.to_bytes();
            prop_assert_eq!(Checkpoint::read(bytes.as_slice()).unwrap().to_bytes(), bytes);
        }
    }
}
