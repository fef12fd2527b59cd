use std::io::Write;
use std::path::Path;

use crate::error::Result;
use crate::matrix::DenseMatrix;

/// Binary greyscale PGM (P5, maxval 255). Values map linearly from
/// `[lo, hi]` to `[0, 255]` and are clamped outside that range.
pub fn encode_pgm(m: &DenseMatrix, lo: f64, hi: f64) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", m.cols(), m.rows()).into_bytes();
    let span = if hi > lo { hi - lo } else { 1.0 };
    out.extend(
        m.as_slice()
            .iter()
            .map(|&v| (255.0 * ((v - lo) / span)).round().clamp(0.0, 255.0) as u8),
    );
    out
}

pub fn write_pgm(m: &DenseMatrix, lo: f64, hi: f64, path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode_pgm(m, lo, hi))?;
    Ok(())
}
