//! HSIC binary cube format, little-endian:
//!
//! ```text
//! offset  size  field
//!      0     4  magic "HSIC"
//!      4     4  version (1)
//!      8     4  height
//!     12     4  width
//!     16     4  bands
//!     20     4  classes
//!     24     4  dtype code (1 = f32)
//!     28     4  label flag (0 = none, 1 = present)
//!     32     …  height·width·bands f32 values, row-major (row, col, band)
//!      …     …  height·width i32 labels, row-major, when the flag is set
//! ```

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::hsi::HsiCube;

pub const MAGIC: [u8; 4] = *b"HSIC";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 32;
pub const DTYPE_F32: u32 = 1;

pub fn write_cube(cube: &HsiCube, mut out: impl Write) -> Result<()> {
    let mut buf = Vec::with_capacity(HEADER_LEN + 4 * cube.values().len());
    buf.extend_from_slice(&MAGIC);
    for v in [
        VERSION,
        dim(cube.height())?,
        dim(cube.width())?,
        dim(cube.bands())?,
        cube.classes(),
        DTYPE_F32,
        u32::from(cube.labels().is_some()),
    ] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for v in cube.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    if let Some(labels) = cube.labels() {
        for &l in labels {
            let l = i32::try_from(l).map_err(|_| Error::Format(format!("label {l} does not fit in i32")))?;
            buf.extend_from_slice(&l.to_le_bytes());
        }
    }
    out.write_all(&buf)?;
    Ok(())
}

fn dim(v: usize) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Format(format!("extent {v} does not fit in u32")))
}

pub fn read_cube(mut input: impl Read) -> Result<HsiCube> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    parse(&bytes)
}

fn parse(bytes: &[u8]) -> Result<HsiCube> {
    if bytes.len() < 4 {
        return Err(Error::Truncated(format!("{} bytes, header needs {HEADER_LEN}", bytes.len())));
    }
    let found: [u8; 4] = bytes[..4].try_into().unwrap();
    if found != MAGIC {
        return Err(Error::BadMagic { expected: MAGIC, found });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated(format!("{} bytes, header needs {HEADER_LEN}", bytes.len())));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().unwrap());
    let (version, h, w, b, classes, dtype, flag) = (word(1), word(2), word(3), word(4), word(5), word(6), word(7));
    if version != VERSION {
        return Err(Error::Format(format!("unsupported HSIC version {version}")));
    }
    if dtype != DTYPE_F32 {
        return Err(Error::Format(format!("unsupported dtype code {dtype}")));
    }
    if flag > 1 {
        return Err(Error::Format(format!("invalid label flag {flag}")));
    }
    let (h, w, b) = (h as usize, w as usize, b as usize);
    let payload = &bytes[HEADER_LEN..];
    if !payload.len().is_multiple_of(4) {
        return Err(Error::Truncated(format!(
            "payload of {} bytes ends inside a value",
            payload.len()
        )));
    }
    let n_values = h * w * b;
    let n_labels = if flag == 1 { h * w } else { 0 };
    let declared = n_values + n_labels;
    if payload.len() / 4 != declared {
        return Err(Error::SizeMismatch {
            declared,
            actual: payload.len() / 4,
        });
    }
    let words = payload.chunks_exact(4).map(|c| c.try_into().unwrap());
    let values: Vec<f32> = words.clone().take(n_values).map(f32::from_le_bytes).collect();
    let labels = if flag == 1 {
        let labels = words
            .skip(n_values)
            .map(i32::from_le_bytes)
            .map(|l| u32::try_from(l).map_err(|_| Error::Format(format!("negative label {l}"))))
            .collect::<Result<Vec<u32>>>()?;
        Some(labels)
    } else {
        None
    };
    HsiCube::new(h, w, b, classes, values, labels)
}

pub fn save_cube(cube: &HsiCube, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_cube(cube, std::io::BufWriter::new(file))
}

pub fn load_cube(path: impl AsRef<Path>) -> Result<HsiCube> {
    parse(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(h: u32, w: u32, b: u32, flag: u32) -> Vec<u8> {
        let mut v = MAGIC.to_vec();
        for x in [VERSION, h, w, b, 3, DTYPE_F32, flag] {
            v.extend_from_slice(&x.to_le_bytes());
        }
        v
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let values: Vec<f32> = (0..7 * 5 * 4).map(|i| (i as f32 * 0.37).sin() * 1e3).collect();
        let labels: Vec<u32> = (0..35).map(|i| i % 4).collect();
        let cube = HsiCube::new(7, 5, 4, 3, values, Some(labels)).unwrap();
        let mut buf = Vec::new();
        write_cube(&cube, &mut buf).unwrap();
        assert_eq!(buf.len(), HEADER_LEN + 4 * 140 + 4 * 35);
        let back = read_cube(&buf[..]).unwrap();
        assert_eq!(back, cube);
        let bits = |c: &HsiCube| c.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&cube));
    }

    #[test]
    fn unlabeled_variant_round_trips() {
        let cube = HsiCube::new(2, 3, 2, 0, vec![0.5; 12], None).unwrap();
        let mut buf = Vec::new();
        write_cube(&cube, &mut buf).unwrap();
        assert_eq!(buf.len(), HEADER_LEN + 48);
        assert_eq!(read_cube(&buf[..]).unwrap(), cube);
    }

    #[test]
    fn wrong_magic() {
        let mut bytes = header(1, 1, 1, 0);
        bytes[0] = b'X';
        bytes.extend_from_slice(&0f32.to_le_bytes());
        assert!(matches!(read_cube(&bytes[..]), Err(Error::BadMagic { .. })));
    }

    #[test]
    fn declared_size_disagrees_with_payload() {
        let mut bytes = header(10, 10, 8, 0);
        bytes.extend(std::iter::repeat_n(0u8, 700 * 4));
        match read_cube(&bytes[..]) {
            Err(Error::SizeMismatch { declared, actual }) => {
                assert_eq!((declared, actual), (800, 700));
            }
            other => panic!("expected size mismatch, got {other:?}"),
        }
    }

    #[test]
    fn truncated_payload_and_header() {
        let mut bytes = header(1, 1, 2, 0);
        bytes.extend_from_slice(&[0u8; 6]);
        assert!(matches!(read_cube(&bytes[..]), Err(Error::Truncated(_))));
        assert!(matches!(read_cube(&header(1, 1, 1, 0)[..20]), Err(Error::Truncated(_))));
    }
}
