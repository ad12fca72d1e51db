use super::{check_unit, reflect_index, FloatImage, Image, CHANNELS};
use crate::error::Result;

/// Classical block-boundary smoothing.
///
/// For every 8×8 grid line, the two pixels adjacent to it (`p` left/above,
/// `q` right/below) are replaced by `(1-s)·v + s·lowpass(v)` where lowpass is
/// the `[1, 2, 1] / 4` filter across the boundary. Vertical boundaries are
/// filtered first, then horizontal ones on that result. No other pixel moves.
pub fn deblock(img: &Image, strength: f64) -> Result<Image> {
    check_unit("strength", strength)?;
    if strength == 0.0 {
        return Ok(img.clone());
    }
    let src = img.to_float();
    let (w, h) = (src.width, src.height);

    let mut pass1 = src.clone();
    for xb in (8..w).step_by(8) {
        let p0 = reflect_index(xb as isize - 2, w);
        let q1 = reflect_index(xb as isize + 1, w);
        for y in 0..h {
            for c in 0..CHANNELS {
                let (a, p, q, b) = (src.at(p0, y, c), src.at(xb - 1, y, c), src.at(xb, y, c), src.at(q1, y, c));
                *pass1.at_mut(xb - 1, y, c) = blend(p, (a + 2.0 * p + q) / 4.0, strength);
                *pass1.at_mut(xb, y, c) = blend(q, (p + 2.0 * q + b) / 4.0, strength);
            }
        }
    }

    let mut pass2: FloatImage = pass1.clone();
    for yb in (8..h).step_by(8) {
        let p0 = reflect_index(yb as isize - 2, h);
        let q1 = reflect_index(yb as isize + 1, h);
        for x in 0..w {
            for c in 0..CHANNELS {
                let (a, p, q, b) = (pass1.at(x, p0, c), pass1.at(x, yb - 1, c), pass1.at(x, yb, c), pass1.at(x, q1, c));
                *pass2.at_mut(x, yb - 1, c) = blend(p, (a + 2.0 * p + q) / 4.0, strength);
                *pass2.at_mut(x, yb, c) = blend(q, (p + 2.0 * q + b) / 4.0, strength);
            }
        }
    }
    Ok(pass2.quantize())
}

#[inline]
fn blend(v: f64, filtered: f64, s: f64) -> f64 {
    (1.0 - s) * v + s * filtered
}
