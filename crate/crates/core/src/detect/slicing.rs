//! Scheduled soft and hard decision operators on 4-QAM.

use crate::frame::{SymbolVector, C64, QAM4_AMPLITUDE};

fn clamp_axis(a: f64, d: f64) -> f64 {
    if a.abs() >= d * QAM4_AMPLITUDE {
        if a < 0.0 {
            -QAM4_AMPLITUDE
        } else {
            QAM4_AMPLITUDE
        }
    } else {
        a
    }
}

/// Per-axis clamp: components with magnitude at least `d * A` snap to
/// `sign * A`, smaller ones pass through. `d = 0` is the hard decision.
pub fn soft_value(u: C64, d: f64) -> C64 {
    C64::new(clamp_axis(u.re, d), clamp_axis(u.im, d))
}

pub fn slice_soft(u: &SymbolVector, d: f64) -> SymbolVector {
    SymbolVector {
        values: u.values.iter().map(|&v| soft_value(v, d)).collect(),
        domain: u.domain,
    }
}

pub fn slice_hard(u: &SymbolVector) -> SymbolVector {
    slice_soft(u, 0.0)
}

pub(crate) fn slice_into(u: &[C64], d: f64, out: &mut [C64]) {
    for (o, &v) in out.iter_mut().zip(u) {
        *o = soft_value(v, d);
    }
}
