use crate::error::{Error, Result};
use crate::image::BinaryMask;

/// One 3×3 (8-connected) binary dilation.
pub fn dilate_3x3(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    BinaryMask::from_fn(w, h, |x, y| {
        let (x0, x1) = (x.saturating_sub(1), (x + 1).min(w - 1));
        let (y0, y1) = (y.saturating_sub(1), (y + 1).min(h - 1));
        (y0..=y1).any(|yy| (x0..=x1).any(|xx| mask.get(xx, yy)))
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dilation {
    pub mask: BinaryMask,
    pub iterations: usize,
    /// The image filled up before the area could double.
    pub saturated: bool,
}

/// Repeats 3×3 dilation until the area is at least twice the input's or the
/// whole image is covered.
pub fn dilate_to_double_area(mask: &BinaryMask) -> Result<Dilation> {
    let original = mask.count();
    if original == 0 {
        return Err(Error::invalid("cannot dilate an empty mask"));
    }
    let total = mask.width() * mask.height();
    let mut current = mask.clone();
    let mut iterations = 0;
    loop {
        let area = current.count();
        if area >= 2 * original {
            return Ok(Dilation { mask: current, iterations, saturated: false });
        }
        if area == total {
            return Ok(Dilation { mask: current, iterations, saturated: true });
        }
        current = dilate_3x3(&current);
        iterations += 1;
    }
}
