//! Versioned little-endian binary checkpoint:
//!
//! ```text
//! magic "HFMMCKPT" | version u32 | kind u8 | metadata (u32 len + UTF-8 JSON)
//! | layers u32 | sizes u32 x layers | params u64 + f64 x n
//! | adam: lr beta1 beta2 eps f64, t u64, m f64 x n, v f64 x n
//! | rng: seed [u8; 32], stream u64, word_pos u128
//! ```

use super::{Adam, Mlp};
use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 8] = b"HFMMCKPT";
const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrainerKind {
    Dqn = 0,
    Ppo = 1,
}

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub kind: TrainerKind,
    /// Free-form JSON, e.g. the observation schema the net was trained on.
    pub metadata: String,
    pub net: Mlp,
    pub optimizer: Adam,
    pub rng: ChaCha8Rng,
}

impl PartialEq for Checkpoint {
    fn eq(&self, o: &Self) -> bool {
        self.kind == o.kind
            && self.metadata == o.metadata
            && self.net == o.net
            && self.optimizer == o.optimizer
            && self.rng.get_seed() == o.rng.get_seed()
            && self.rng.get_stream() == o.rng.get_stream()
            && self.rng.get_word_pos() == o.rng.get_word_pos()
    }
}

fn f64s<W: Write>(w: &mut W, v: &[f64]) -> std::io::Result<()> {
    v.iter().try_for_each(|x| w.write_f64::<LE>(*x))
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> std::io::Result<Vec<f64>> {
    (0..n).map(|_| r.read_f64::<LE>()).collect()
}

impl Checkpoint {
    pub fn write<W: Write>(&self, mut w: W) -> Result<(), CheckpointError> {
        w.write_all(MAGIC)?;
        w.write_u32::<LE>(VERSION)?;
        w.write_u8(self.kind as u8)?;
        w.write_u32::<LE>(self.metadata.len() as u32)?;
        w.write_all(self.metadata.as_bytes())?;
        let sizes = self.net.sizes();
        w.write_u32::<LE>(sizes.len() as u32)?;
        for s in sizes {
            w.write_u32::<LE>(*s as u32)?;
        }
        w.write_u64::<LE>(self.net.param_count() as u64)?;
        f64s(&mut w, self.net.params())?;
        let a = &self.optimizer;
        f64s(&mut w, &[a.lr, a.beta1, a.beta2, a.eps])?;
        w.write_u64::<LE>(a.t)?;
        f64s(&mut w, &a.m)?;
        f64s(&mut w, &a.v)?;
        w.write_all(&self.rng.get_seed())?;
        w.write_u64::<LE>(self.rng.get_stream())?;
        w.write_u128::<LE>(self.rng.get_word_pos())?;
        w.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self, CheckpointError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = r.read_u32::<LE>()?;
        if version != VERSION {
            return Err(CheckpointError::Version(version));
        }
        let kind = match r.read_u8()? {
            0 => TrainerKind::Dqn,
            1 => TrainerKind::Ppo,
            k => return Err(CheckpointError::Corrupt(format!("trainer kind {k}"))),
        };
        let meta_len = r.read_u32::<LE>()? as usize;
        let mut meta = vec![0u8; meta_len];
        r.read_exact(&mut meta)?;
        let metadata = String::from_utf8(meta).map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
        let layers = r.read_u32::<LE>()? as usize;
        if layers > 64 {
            return Err(CheckpointError::Corrupt(format!("{layers} layers")));
        }
        let sizes = (0..layers)
            .map(|_| r.read_u32::<LE>().map(|s| s as usize))
            .collect::<Result<Vec<_>, _>>()?;
        let n = r.read_u64::<LE>()? as usize;
        let params = read_f64s(&mut r, n)?;
        let net = Mlp::from_parts(sizes, params).map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
        let h = read_f64s(&mut r, 4)?;
        let t = r.read_u64::<LE>()?;
        let optimizer = Adam {
            lr: h[0],
            beta1: h[1],
            beta2: h[2],
            eps: h[3],
            t,
            m: read_f64s(&mut r, n)?,
            v: read_f64s(&mut r, n)?,
        };
        let mut seed = [0u8; 32];
        r.read_exact(&mut seed)?;
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(r.read_u64::<LE>()?);
        rng.set_word_pos(r.read_u128::<LE>()?);
        Ok(Checkpoint {
            kind,
            metadata,
            net,
            optimizer,
            rng,
        })
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
        let f = std::fs::File::create(path)?;
        self.write(std::io::BufWriter::new(f))
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self, CheckpointError> {
        let f = std::fs::File::open(path)?;
        Self::read(std::io::BufReader::new(f))
    }
}
