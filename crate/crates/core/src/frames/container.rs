//! BPNF: little-endian sparse frame container.
//!
//! ```text
//! "BPNF" | version u16 | width u16 | height u16 | n_frames u32 | seed u64
//! per frame: count u16, then count × (x u16, y u16)
//! ```

use std::io::{Read, Write};

use super::FrameStack;
use crate::error::{Error, Result};

pub const BPNF_MAGIC: [u8; 4] = *b"BPNF";
pub const BPNF_VERSION: u16 = 1;

pub fn write_bpnf<W: Write>(stack: &FrameStack, mut out: W) -> Result<()> {
    let n = u32::try_from(stack.frames.len())
        .map_err(|_| Error::Container(format!("{} frames exceed the u32 limit", stack.frames.len())))?;
    let mut buf = Vec::with_capacity(22 + stack.total_hits() * 4 + stack.frames.len() * 2);
    buf.extend_from_slice(&BPNF_MAGIC);
    buf.extend_from_slice(&BPNF_VERSION.to_le_bytes());
    buf.extend_from_slice(&stack.width.to_le_bytes());
    buf.extend_from_slice(&stack.height.to_le_bytes());
    buf.extend_from_slice(&n.to_le_bytes());
    buf.extend_from_slice(&stack.seed.to_le_bytes());
    let w = stack.width as u32;
    let limit = w * stack.height as u32;
    for (f, frame) in stack.frames.iter().enumerate() {
        let count = u16::try_from(frame.len())
            .map_err(|_| Error::Container(format!("frame {f} has {} hits, limit is 65535", frame.len())))?;
        buf.extend_from_slice(&count.to_le_bytes());
        for &p in frame {
            if p >= limit {
                return Err(Error::Container(format!("frame {f}: pixel {p} outside the sensor")));
            }
            buf.extend_from_slice(&((p % w) as u16).to_le_bytes());
            buf.extend_from_slice(&((p / w) as u16).to_le_bytes());
        }
    }
    out.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl Cursor<'_> {
    fn take<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let end = self.at + N;
        let chunk = self
            .bytes
            .get(self.at..end)
            .ok_or_else(|| Error::Container(format!("truncated at byte {} reading {what}", self.at)))?;
        self.at = end;
        Ok(chunk.try_into().expect("length checked"))
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        self.take::<2>(what).map(u16::from_le_bytes)
    }
}

pub fn read_bpnf<R: Read>(mut input: R) -> Result<FrameStack> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let mut c = Cursor { bytes: &bytes, at: 0 };
    if c.take::<4>("magic")? != BPNF_MAGIC {
        return Err(Error::Container("bad magic".into()));
    }
    let version = c.u16("version")?;
    if version != BPNF_VERSION {
        return Err(Error::Container(format!("unsupported version {version}")));
    }
    let width = c.u16("width")?;
    let height = c.u16("height")?;
    let n = u32::from_le_bytes(c.take::<4>("frame count")?) as usize;
    let seed = u64::from_le_bytes(c.take::<8>("seed")?);
    let mut frames = Vec::with_capacity(n.min(bytes.len() / 2));
    for f in 0..n {
        let count = c.u16("hit count")? as usize;
        let mut frame = Vec::with_capacity(count);
        for _ in 0..count {
            let x = c.u16("x")?;
            let y = c.u16("y")?;
            if x >= width || y >= height {
                return Err(Error::Container(format!("frame {f}: pixel ({x}, {y}) outside the sensor")));
            }
            frame.push(y as u32 * width as u32 + x as u32);
        }
        frame.sort_unstable();
        frame.dedup();
        frames.push(frame);
    }
    if c.at != bytes.len() {
        return Err(Error::Container(format!("{} trailing bytes", bytes.len() - c.at)));
    }
    Ok(FrameStack {
        width,
        height,
        seed,
        frames,
        detector: None,
    })
}
