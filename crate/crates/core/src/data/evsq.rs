//! EVSQ event files, little-endian:
//!
//! ```text
//! "EVSQ" | version u16 | L u32 | C u32 | label u16
//!   [label == 0xFFFF: K u16, f32 × K]
//! raster: ceil(L·C / 8) bytes, row-major, LSB first, zero padding
//! ```
//!
//! Label `0xFFFE` marks an unlabelled sequence.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use super::{EventSequence, Label, SeqMeta};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"EVSQ";
pub const VERSION: u16 = 1;
pub const SOFT_LABEL: u16 = 0xFFFF;
pub const NO_LABEL: u16 = 0xFFFE;

pub fn write_evsq(seq: &EventSequence, mut w: impl Write) -> Result<()> {
    seq.validate()?;
    let (l, c) = seq.raster.dim();
    let l32 = u32::try_from(l).map_err(|_| Error::input("sequence too long for EVSQ"))?;
    let c32 = u32::try_from(c).map_err(|_| Error::input("too many channels for EVSQ"))?;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&l32.to_le_bytes())?;
    w.write_all(&c32.to_le_bytes())?;
    match &seq.label {
        None => w.write_all(&NO_LABEL.to_le_bytes())?,
        Some(Label::Class(k)) if *k >= NO_LABEL => {
            return Err(Error::input(format!("class index {k} collides with a reserved label code")))
        }
        Some(Label::Class(k)) => w.write_all(&k.to_le_bytes())?,
        Some(Label::Soft(p)) => {
            let k = u16::try_from(p.len()).map_err(|_| Error::input("soft label too long"))?;
            w.write_all(&SOFT_LABEL.to_le_bytes())?;
            w.write_all(&k.to_le_bytes())?;
            for v in p {
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    let mut bytes = vec![0u8; (l * c).div_ceil(8)];
    for (i, &v) in seq.raster.iter().enumerate() {
        if v != 0 {
            bytes[i / 8] |= 1 << (i % 8);
        }
    }
    w.write_all(&bytes)?;
    Ok(())
}

fn take<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(|e| Error::format(format!("truncated EVSQ header: {e}")))?;
    Ok(b)
}

pub fn read_evsq(mut r: impl Read) -> Result<EventSequence> {
    if &take::<4>(&mut r)? != MAGIC {
        return Err(Error::format("bad EVSQ magic"));
    }
    let version = u16::from_le_bytes(take(&mut r)?);
    if version != VERSION {
        return Err(Error::format(format!("unsupported EVSQ version {version}")));
    }
    let l = u32::from_le_bytes(take(&mut r)?) as usize;
    let c = u32::from_le_bytes(take(&mut r)?) as usize;
    if l == 0 || c == 0 {
        return Err(Error::format("EVSQ raster must have L > 0 and C > 0"));
    }
    let label = match u16::from_le_bytes(take(&mut r)?) {
        NO_LABEL => None,
        SOFT_LABEL => {
            let k = u16::from_le_bytes(take(&mut r)?) as usize;
            let p = (0..k).map(|_| Ok(f32::from_le_bytes(take(&mut r)?))).collect::<Result<Vec<_>>>()?;
            Some(Label::Soft(p))
        }
        k => Some(Label::Class(k)),
    };
    let n = l.checked_mul(c).ok_or_else(|| Error::format("EVSQ raster size overflows"))?;
    let mut bytes = vec![0u8; n.div_ceil(8)];
    r.read_exact(&mut bytes).map_err(|e| Error::format(format!("truncated EVSQ raster: {e}")))?;
    if n % 8 != 0 && bytes[n / 8] >> (n % 8) != 0 {
        return Err(Error::format("nonzero EVSQ padding bits"));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::format("trailing bytes after EVSQ raster"));
    }
    let raster = Array2::from_shape_fn((l, c), |(k, j)| {
        let i = k * c + j;
        (bytes[i / 8] >> (i % 8)) & 1
    });
    Ok(EventSequence { raster, label, meta: SeqMeta { source_id: String::new(), original_length: l } })
}

pub fn write_evsq_file(seq: &EventSequence, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_evsq(seq, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn read_evsq_file(path: impl AsRef<Path>) -> Result<EventSequence> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)?;
    let mut seq = read_evsq(bytes.as_slice())?;
    seq.meta.source_id = path.display().to_string();
    Ok(seq)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let mut r = Array2::zeros((3, 3));
        r[[0, 0]] = 1;
        r[[2, 2]] = 1;
        let seq = EventSequence::new(r, Some(Label::Class(5))).unwrap();
        let mut buf = Vec::new();
        write_evsq(&seq, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"EVSQ");
        assert_eq!(&buf[4..6], &[1, 0]);
        assert_eq!(&buf[6..10], &[3, 0, 0, 0]);
        assert_eq!(&buf[14..16], &[5, 0]);
        // bits 0 and 8
        assert_eq!(&buf[16..], &[0b0000_0001, 0b0000_0001]);
        assert_eq!(read_evsq(buf.as_slice()).unwrap(), seq);
    }

    #[test]
    fn soft_and_missing_labels() {
        let r = Array2::from_shape_fn((5, 3), |(k, c)| u8::from(k == c));
        for label in [None, Some(Label::Soft(vec![0.25, 0.75]))] {
            let seq = EventSequence::new(r.clone(), label).unwrap();
            let mut buf = Vec::new();
            write_evsq(&seq, &mut buf).unwrap();
            assert_eq!(read_evsq(buf.as_slice()).unwrap(), seq);
        }
    }

    #[test]
    fn corrupt_input_is_rejected() {
        let seq = EventSequence::new(Array2::ones((3, 3)), None).unwrap();
        let mut buf = Vec::new();
        write_evsq(&seq, &mut buf).unwrap();
        assert!(read_evsq(&buf[..buf.len() - 1]).is_err());
        let mut extra = buf.clone();
        extra.push(0);
        assert!(read_evsq(extra.as_slice()).is_err());
        let mut pad = buf.clone();
        *pad.last_mut().unwrap() |= 0x80;
        assert!(read_evsq(pad.as_slice()).is_err());
        let mut magic = buf;
        magic[0] = b'X';
        assert!(read_evsq(magic.as_slice()).is_err());
    }
}
