//! Model + optimizer checkpoints.
//!
//! Little-endian layout, sharing its header shape with the feature format:
//!
//! ```text
//! "SRCK" | version u16 | flags u16 (0) | D u32 | H1 u32
//! dropout f64 | lr f64 | beta1 f64 | beta2 f64 | epsilon f64 | step u64
//! params   f64 x N    (W1 row-major, b1, W2, b2)
//! moment1  f64 x N
//! moment2  f64 x N
//! ```

use std::fs;
use std::path::Path;

use super::{AdamConfig, AdamState, Model};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SRCK";
pub const CHECKPOINT_VERSION: u16 = 1;

pub fn encode_checkpoint(model: &Model, adam: &AdamState) -> Result<Vec<u8>> {
    let n = model.num_params();
    if adam.first_moment.len() != n || adam.second_moment.len() != n {
        return Err(Error::Shape("optimizer state does not match model".into()));
    }
    let d = u32::try_from(model.input_dim()).map_err(|_| Error::Shape("D too large".into()))?;
    let h = u32::try_from(model.hidden_width()).map_err(|_| Error::Shape("H1 too large".into()))?;

    let mut out = Vec::with_capacity(16 + 48 + 24 * n);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(&d.to_le_bytes());
    out.extend_from_slice(&h.to_le_bytes());
    let c = adam.config;
    for v in [
        model.dropout_rate,
        c.learning_rate,
        c.beta1,
        c.beta2,
        c.epsilon,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&adam.step.to_le_bytes());
    let blocks = model.param_blocks();
    let params = blocks.iter().flat_map(|b| b.iter());
    for v in params.chain(&adam.first_moment).chain(&adam.second_moment) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    ctx: &'a str,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::parse(self.ctx, "truncated checkpoint"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
}

pub fn decode_checkpoint(bytes: &[u8], ctx: &str) -> Result<(Model, AdamState)> {
    let mut c = Cursor { bytes, pos: 0, ctx };
    if c.take(4)? != CHECKPOINT_MAGIC {
        return Err(Error::parse(ctx, "bad magic, expected SRCK"));
    }
    let version = c.u16()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::parse(
            ctx,
            format!("unsupported checkpoint version {version}"),
        ));
    }
    let flags = c.u16()?;
    if flags != 0 {
        return Err(Error::parse(ctx, format!("unknown flags {flags:#06x}")));
    }
    let d = c.u32()? as usize;
    let h = c.u32()? as usize;
    if d == 0 || h == 0 {
        return Err(Error::parse(ctx, format!("invalid dims D={d}, H1={h}")));
    }
    let dropout_rate = c.f64()?;
    let config = AdamConfig {
        learning_rate: c.f64()?,
        beta1: c.f64()?,
        beta2: c.f64()?,
        epsilon: c.f64()?,
    };
    let step = c.u64()?;
    let n = d * h + 2 * h + 1;
    let params = c.f64s(n)?;
    let first_moment = c.f64s(n)?;
    let second_moment = c.f64s(n)?;
    if c.pos != bytes.len() {
        return Err(Error::parse(ctx, "trailing bytes after checkpoint"));
    }

    let mut model = Model {
        w1: Matrix::zeros(d, h),
        b1: vec![0.0; h],
        w2: vec![0.0; h],
        b2: 0.0,
        dropout_rate,
    };
    model.set_params(&params)?;
    if !model.is_finite() {
        return Err(Error::parse(ctx, "non-finite parameter"));
    }
    Ok((
        model,
        AdamState {
            config,
            first_moment,
            second_moment,
            step,
        },
    ))
}

pub fn save_checkpoint(model: &Model, adam: &AdamState, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_checkpoint(model, adam)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(Model, AdamState)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{init_model, Gradients};
    use crate::rng::RngHandle;

    fn trained_pair() -> (Model, AdamState) {
        let mut model = init_model(3, 4, 0.25, RngHandle::new(4)).unwrap();
        let mut adam = AdamState::new(&model, AdamConfig::default());
        let mut g = Gradients::zeros_like(&model);
        g.w1.as_mut_slice()
            .iter_mut()
            .enumerate()
            .for_each(|(i, v)| *v = i as f64 * 0.1 - 0.3);
        g.b2 = 0.7;
        adam.apply(&mut model, &g).unwrap();
        (model, adam)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let (model, adam) = trained_pair();
        let bytes = encode_checkpoint(&model, &adam).unwrap();
        assert_eq!(bytes.len(), 16 + 48 + 3 * 8 * model.num_params());
        let (m2, a2) = decode_checkpoint(&bytes, "t").unwrap();
        assert_eq!(encode_checkpoint(&m2, &a2).unwrap(), bytes);
        assert_eq!(m2, model);
        assert_eq!(a2, adam);
    }

    #[test]
    fn rejects_corruption() {
        let (model, adam) = trained_pair();
        let bytes = encode_checkpoint(&model, &adam).unwrap();
        assert!(decode_checkpoint(&bytes[..bytes.len() - 1], "t").is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_checkpoint(&extra, "t").is_err());
        let mut magic = bytes;
        magic[0] = b'X';
        assert!(decode_checkpoint(&magic, "t").is_err());
    }

    #[test]
    fn disk_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("model.srck");
        let (model, adam) = trained_pair();
        save_checkpoint(&model, &adam, &p).unwrap();
        assert_eq!(load_checkpoint(&p).unwrap(), (model, adam));
    }
}
