//! Binary PPM (P6) rendering of class maps.

use std::io::Write;

use crate::error::Result;

/// Colors for classes 1..=16; class `c` uses entry `(c − 1) mod 16` and
/// class 0 is black.
pub const PALETTE: [[u8; 3]; 16] = [
    [230, 25, 75],
    [60, 180, 75],
    [255, 225, 25],
    [0, 130, 200],
    [245, 130, 48],
    [145, 30, 180],
    [70, 240, 240],
    [240, 50, 230],
    [210, 245, 60],
    [250, 190, 212],
    [0, 128, 128],
    [220, 190, 255],
    [170, 110, 40],
    [255, 250, 200],
    [128, 0, 0],
    [170, 255, 195],
];

pub fn class_color(class: u32) -> [u8; 3] {
    match class {
        0 => [0, 0, 0],
        c => PALETTE[((c - 1) % 16) as usize],
    }
}

/// Encodes a row-major `height × width` class map as P6 bytes.
pub fn encode_class_map(map: &[u32], height: usize, width: usize) -> Vec<u8> {
    assert_eq!(map.len(), height * width, "class map size");
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.reserve(3 * map.len());
    for &c in map {
        out.extend_from_slice(&class_color(c));
    }
    out
}

pub fn write_class_map(map: &[u32], height: usize, width: usize, mut out: impl Write) -> Result<()> {
    out.write_all(&encode_class_map(map, height, width))?;
    Ok(())
}
