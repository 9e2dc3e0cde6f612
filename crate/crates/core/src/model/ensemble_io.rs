//! Flat binary storage for channel ensembles.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic   b"LGCH"
//! version u32 (= 1)
//! count   u32  number of matrices
//! rows    u32
//! cols    u32
//! data    count * rows * cols * 2 f64, row-major, (re, im) interleaved
//! ```

use std::io::{self, Read, Write};

use super::{ComplexMatrix, C64};

const MAGIC: &[u8; 4] = b"LGCH";
const VERSION: u32 = 1;

pub fn write_channel_ensemble<W: Write>(mut w: W, channels: &[ComplexMatrix]) -> io::Result<()> {
    let (rows, cols) = channels.first().map(|h| h.shape()).unwrap_or((0, 0));
    if channels.iter().any(|h| h.shape() != (rows, cols)) {
        return Err(io::Error::new(
            io::ErrorKind::InvalidInput,
            "all channels in an ensemble must share one shape",
        ));
    }
    let header = |v: usize| {
        u32::try_from(v)
            .map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "dimension exceeds u32"))
    };
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&header(channels.len())?.to_le_bytes())?;
    w.write_all(&header(rows)?.to_le_bytes())?;
    w.write_all(&header(cols)?.to_le_bytes())?;
    for h in channels {
        for i in 0..rows {
            for j in 0..cols {
                let c = h[(i, j)];
                w.write_all(&c.re.to_le_bytes())?;
                w.write_all(&c.im.to_le_bytes())?;
            }
        }
    }
    w.flush()
}

fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> io::Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn read_channel_ensemble<R: Read>(mut r: R) -> io::Result<Vec<ComplexMatrix>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            "bad channel ensemble magic",
        ));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("unsupported channel ensemble version {version}"),
        ));
    }
    let count = read_u32(&mut r)? as usize;
    let rows = read_u32(&mut r)? as usize;
    let cols = read_u32(&mut r)? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut h = ComplexMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                let re = read_f64(&mut r)?;
                let im = read_f64(&mut r)?;
                h[(i, j)] = C64::new(re, im);
            }
        }
        out.push(h);
    }
    Ok(out)
}
