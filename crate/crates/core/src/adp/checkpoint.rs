//! Versioned binary learner checkpoints.
//!
//! Layout (little-endian):
//!
//! ```text
//! "ELCK"  u16 version  u16 flags  u32 dim
//! f64 λ  f64 β  u32 depth  f64 ε  u32 max_trajectories  f64 γ
//! u64 rng seed  u64 epoch  u64 steps
//! dim × f64 Θ,  dim × f64 z,  dim² × f64 P (column-major)
//! ```
//!
//! Flag bit 1 marks a learner that searches the full action set.

use nalgebra::{DMatrix, DVector};

use super::{Hyperparams, LearnerState};
use crate::action_space::ActionSource;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"ELCK";
const VERSION: u16 = 1;
/// Largest dimension a checkpoint may declare.
const MAX_DIM: u32 = 4096;
const FULL_SOURCE: u16 = 1;

/// A learner plus the cursor of the random stream that feeds it.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub learner: LearnerState,
    pub rng_seed: u64,
    /// Next decision epoch (the stream id of the next week).
    pub epoch: u64,
}

pub fn encode_checkpoint(ck: &Checkpoint) -> Vec<u8> {
    let l = &ck.learner;
    let dim = l.dim();
    let mut out = Vec::with_capacity(76 + 8 * dim * (dim + 2));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let flags = match l.hyper.source {
        ActionSource::Full => FULL_SOURCE,
        ActionSource::Reduced => 0,
    };
    out.extend_from_slice(&flags.to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    out.extend_from_slice(&l.hyper.lambda.to_le_bytes());
    out.extend_from_slice(&l.hyper.beta.to_le_bytes());
    out.extend_from_slice(&l.hyper.depth.to_le_bytes());
    out.extend_from_slice(&l.hyper.epsilon.to_le_bytes());
    out.extend_from_slice(&l.hyper.max_trajectories.to_le_bytes());
    out.extend_from_slice(&l.gamma.to_le_bytes());
    out.extend_from_slice(&ck.rng_seed.to_le_bytes());
    out.extend_from_slice(&ck.epoch.to_le_bytes());
    out.extend_from_slice(&l.steps.to_le_bytes());
    for x in l.theta.iter().chain(l.z.iter()).chain(l.p.iter()) {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

fn take<'a>(buf: &mut &'a [u8], n: usize) -> Result<&'a [u8]> {
    if buf.len() < n {
        return Err(Error::Decode("truncated checkpoint".into()));
    }
    let (head, tail) = buf.split_at(n);
    *buf = tail;
    Ok(head)
}

macro_rules! read {
    ($buf:expr, $t:ty) => {
        <$t>::from_le_bytes(take($buf, std::mem::size_of::<$t>())?.try_into().unwrap())
    };
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let buf = &mut &bytes[..];
    if take(buf, 4)? != MAGIC {
        return Err(Error::Decode("bad checkpoint magic".into()));
    }
    let version = read!(buf, u16);
    if version != VERSION {
        return Err(Error::Decode(format!("unsupported checkpoint version {version}")));
    }
    let flags = read!(buf, u16);
    if flags & !FULL_SOURCE != 0 {
        return Err(Error::Decode(format!("unknown checkpoint flags {flags:#x}")));
    }
    let dim = read!(buf, u32);
    if dim > MAX_DIM {
        return Err(Error::Decode(format!("dimension {dim} exceeds {MAX_DIM}")));
    }
    let hyper = Hyperparams {
        lambda: read!(buf, f64),
        beta: read!(buf, f64),
        depth: read!(buf, u32),
        epsilon: read!(buf, f64),
        max_trajectories: read!(buf, u32),
        source: if flags & FULL_SOURCE != 0 {
            ActionSource::Full
        } else {
            ActionSource::Reduced
        },
    };
    let gamma = read!(buf, f64);
    let rng_seed = read!(buf, u64);
    let epoch = read!(buf, u64);
    let steps = read!(buf, u64);
    let dim = dim as usize;
    let floats = dim * (dim + 2);
    if buf.len() != floats * 8 {
        return Err(Error::Decode(format!(
            "expected {} payload bytes, found {}",
            floats * 8,
            buf.len()
        )));
    }
    let mut learner = LearnerState::new(dim, hyper, gamma)
        .map_err(|e| Error::Decode(format!("invalid learner parameters: {e}")))?;
    let mut vals = Vec::with_capacity(floats);
    for _ in 0..floats {
        let x = read!(buf, f64);
        if !x.is_finite() {
            return Err(Error::Decode("non-finite learner entry".into()));
        }
        vals.push(x);
    }
    learner.theta = DVector::from_column_slice(&vals[..dim]);
    learner.z = DVector::from_column_slice(&vals[dim..2 * dim]);
    learner.p = DMatrix::from_column_slice(dim, dim, &vals[2 * dim..]);
    learner.steps = steps;
    Ok(Checkpoint {
        learner,
        rng_seed,
        epoch,
    })
}
