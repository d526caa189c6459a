use crate::error::Result;
use crate::field::ScalarField;

/// Pixel accuracy and Dice overlap of two binary masks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    pub dice: f64,
}

/// Compares two masks, each binarized as `value > level`.
pub fn compare_masks(pred: &ScalarField, truth: &ScalarField, level: f64) -> Result<Metrics> {
    pred.check_shape(truth)?;
    let (mut agree, mut inter, mut na, mut nb) = (0usize, 0usize, 0usize, 0usize);
    for (&p, &t) in pred.values().iter().zip(truth.values()) {
        let (a, b) = (p > level, t > level);
        agree += usize::from(a == b);
        inter += usize::from(a && b);
        na += usize::from(a);
        nb += usize::from(b);
    }
    let dice = if na + nb == 0 {
        1.0
    } else {
        2.0 * inter as f64 / (na + nb) as f64
    };
    Ok(Metrics {
        accuracy: agree as f64 / pred.len() as f64,
        dice,
    })
}
