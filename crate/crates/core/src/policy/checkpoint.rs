//! Binary checkpoint of policy parameters.
//!
//! Layout (little endian): magic `CAMDPPOL`, format version (u32), input
//! count, two hidden sizes and action count (u32 each), feature-scaling code
//! (u8), training seed (u64), parameter count (u64), then the parameters as
//! f64.

use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use super::mlp::{Architecture, FeatureScaling, PolicyParams, N_ACTIONS, N_INPUTS};

const MAGIC: &[u8; 8] = b"CAMDPPOL";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed parameter file: {0}")]
    MalformedParams(String),
    #[error("architecture mismatch: expected hidden {expected:?}, found {found:?}")]
    ShapeMismatch { expected: [usize; 2], found: [usize; 2] },
}

/// A loaded checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: PolicyParams,
    pub seed: u64,
}

pub fn write_params<W: Write>(params: &PolicyParams, seed: u64, mut w: W) -> std::io::Result<()> {
    let [h1, h2] = params.arch.hidden;
    w.write_all(MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    for n in [N_INPUTS, h1, h2, N_ACTIONS] {
        w.write_all(&(n as u32).to_le_bytes())?;
    }
    w.write_all(&[params.arch.features.code()])?;
    w.write_all(&seed.to_le_bytes())?;
    w.write_all(&(params.theta.len() as u64).to_le_bytes())?;
    for v in &params.theta {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()
}

pub fn save_params(params: &PolicyParams, seed: u64, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
    let f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_params(params, seed, f)?;
    Ok(())
}

fn take<const N: usize>(r: &mut impl Read, what: &str) -> Result<[u8; N], CheckpointError> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => CheckpointError::MalformedParams(format!("truncated while reading {what}")),
        _ => CheckpointError::Io(e),
    })?;
    Ok(b)
}

/// Reads a checkpoint; with `expected` set, the hidden sizes must match.
pub fn read_params<R: Read>(mut r: R, expected: Option<[usize; 2]>) -> Result<Checkpoint, CheckpointError> {
    if &take::<8>(&mut r, "magic")? != MAGIC {
        return Err(CheckpointError::MalformedParams("bad magic".into()));
    }
    let version = u32::from_le_bytes(take(&mut r, "version")?);
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::MalformedParams(format!("unsupported version {version}")));
    }
    let mut dims = [0usize; 4];
    for d in &mut dims {
        *d = u32::from_le_bytes(take(&mut r, "shape")?) as usize;
    }
    let [n_in, h1, h2, n_out] = dims;
    if n_in != N_INPUTS || n_out != N_ACTIONS || h1 == 0 || h2 == 0 {
        return Err(CheckpointError::MalformedParams(format!("unsupported shape {dims:?}")));
    }
    if let Some(e) = expected {
        if e != [h1, h2] {
            return Err(CheckpointError::ShapeMismatch { expected: e, found: [h1, h2] });
        }
    }
    let [code] = take::<1>(&mut r, "feature scaling")?;
    let features = FeatureScaling::from_code(code)
        .ok_or_else(|| CheckpointError::MalformedParams(format!("unknown feature scaling {code}")))?;
    let seed = u64::from_le_bytes(take(&mut r, "seed")?);
    let n = u64::from_le_bytes(take(&mut r, "parameter count")?) as usize;
    let arch = Architecture { hidden: [h1, h2], features };
    if n != arch.n_params() {
        return Err(CheckpointError::MalformedParams(format!("expected {} parameters, header says {n}", arch.n_params())));
    }
    let mut theta = Vec::with_capacity(n);
    for _ in 0..n {
        theta.push(f64::from_le_bytes(take(&mut r, "parameters")?));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(CheckpointError::MalformedParams("trailing bytes".into()));
    }
    let params = PolicyParams { arch, theta };
    if !params.is_finite() {
        return Err(CheckpointError::MalformedParams("non-finite parameter".into()));
    }
    Ok(Checkpoint { params, seed })
}

pub fn load_params(path: impl AsRef<Path>, expected: Option<[usize; 2]>) -> Result<Checkpoint, CheckpointError> {
    read_params(std::io::BufReader::new(std::fs::File::open(path)?), expected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simenv::MdpState;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params() -> PolicyParams {
        PolicyParams::init(Architecture::default(), &mut ChaCha8Rng::seed_from_u64(4))
    }

    #[test]
    fn round_trip_is_exact() {
        let p = params();
        let mut buf = Vec::new();
        write_params(&p, 77, &mut buf).unwrap();
        let c = read_params(buf.as_slice(), Some([64, 128])).unwrap();
        assert_eq!(c.seed, 77);
        assert_eq!(c.params, p);
        let s = MdpState { d_m: 0.3, sigma_t: 2.0, moved: false, k: 5 };
        assert_eq!(p.forward(&s)[1].to_bits(), c.params.forward(&s)[1].to_bits());
    }

    #[test]
    fn truncated_is_malformed() {
        let mut buf = Vec::new();
        write_params(&params(), 0, &mut buf).unwrap();
        for cut in [0, 5, 30, buf.len() - 1] {
            let r = read_params(&buf[..cut], None);
            assert!(matches!(r, Err(CheckpointError::MalformedParams(_))), "cut {cut}");
        }
    }

    #[test]
    fn shape_mismatch() {
        let mut buf = Vec::new();
        write_params(&params(), 0, &mut buf).unwrap();
        let r = read_params(buf.as_slice(), Some([32, 64]));
        assert!(matches!(r, Err(CheckpointError::ShapeMismatch { expected: [32, 64], found: [64, 128] })));
    }
}
