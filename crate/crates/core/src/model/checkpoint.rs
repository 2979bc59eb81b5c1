//! Checkpoint file: magic, version, a JSON header holding the model config
//! and vocabulary, then every tensor as a name, an element count and raw
//! little-endian f64 values, in declaration order.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::params::ModelParams;
use super::vocab::Vocabulary;
use super::ModelConfig;

const MAGIC: &[u8; 8] = b"SSPTCKPT";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub vocab: Vocabulary,
    pub params: ModelParams,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    vocab: Vec<String>,
}

fn format_err(reason: impl Into<String>) -> Error {
    Error::Format { what: "checkpoint", reason: reason.into() }
}

pub fn save_checkpoint<W: Write>(ckpt: &Checkpoint, mut w: W) -> Result<()> {
    let header = serde_json::to_vec(&Header { config: ckpt.config.clone(), vocab: ckpt.vocab.tokens().to_vec() })?;
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    w.write_u64::<LittleEndian>(header.len() as u64)?;
    w.write_all(&header)?;
    let tensors = ckpt.params.tensors();
    w.write_u32::<LittleEndian>(tensors.len() as u32)?;
    for (name, values) in tensors {
        w.write_u32::<LittleEndian>(name.len() as u32)?;
        w.write_all(name.as_bytes())?;
        w.write_u64::<LittleEndian>(values.len() as u64)?;
        for &x in values {
            w.write_f64::<LittleEndian>(x)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint<R: Read>(mut r: R) -> Result<Checkpoint> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(format_err("bad magic"));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != VERSION {
        return Err(format_err(format!("unsupported version {version}")));
    }
    let len = r.read_u64::<LittleEndian>()?;
    let mut header = Vec::new();
    r.by_ref().take(len).read_to_end(&mut header)?;
    if header.len() as u64 != len {
        return Err(format_err("truncated header"));
    }
    let header: Header = serde_json::from_slice(&header)?;
    header.config.validate()?;
    let vocab = Vocabulary::from_tokens(header.vocab.iter().skip(super::SPECIALS.len()).cloned());
    if vocab.tokens() != header.vocab.as_slice() {
        return Err(format_err("vocabulary does not start with the reserved specials"));
    }
    let mut params = ModelParams::new(&header.config, vocab.len());
    let count = r.read_u32::<LittleEndian>()? as usize;
    let mut slots = params.tensors_mut();
    if count != slots.len() {
        return Err(format_err(format!("expected {} tensors, found {count}", slots.len())));
    }
    for (expected, values) in slots.iter_mut() {
        let name_len = r.read_u32::<LittleEndian>()? as usize;
        if name_len > 256 {
            return Err(format_err("tensor name too long"));
        }
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        if name != expected.as_bytes() {
            return Err(format_err(format!("expected tensor {expected}, found {}", String::from_utf8_lossy(&name))));
        }
        let n = r.read_u64::<LittleEndian>()? as usize;
        if n != values.len() {
            return Err(format_err(format!("tensor {expected}: expected {} values, found {n}", values.len())));
        }
        r.read_f64_into::<LittleEndian>(values)?;
    }
    drop(slots);
    if !params.all_finite() {
        return Err(Error::NonFinite("checkpoint parameters".into()));
    }
    Ok(Checkpoint { config: header.config, vocab, params })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample(answerability: bool) -> Checkpoint {
        let config = ModelConfig { hidden_dim: 8, layers: 2, heads: 2, ffn_dim: 16, max_seq: 12, answerability, ..Default::default() };
        let vocab = Vocabulary::from_tokens(["alpha", "beta", "gamma"].map(String::from));
        let params = ModelParams::init(&config, vocab.len(), &mut ChaCha8Rng::seed_from_u64(4));
        Checkpoint { config, vocab, params }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for head in [false, true] {
            let c = sample(head);
            let mut buf = Vec::new();
            save_checkpoint(&c, &mut buf).unwrap();
            let back = load_checkpoint(buf.as_slice()).unwrap();
            assert_eq!(back, c);
            assert_eq!(back.params.digest(), c.params.digest());
            let mut again = Vec::new();
            save_checkpoint(&back, &mut again).unwrap();
            assert_eq!(buf, again);
        }
    }

    #[test]
    fn rejects_damage() {
        let mut buf = Vec::new();
        save_checkpoint(&sample(false), &mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(load_checkpoint(bad.as_slice()), Err(Error::Format { .. })));
        assert!(load_checkpoint(&buf[..buf.len() - 3]).is_err());
    }
}
