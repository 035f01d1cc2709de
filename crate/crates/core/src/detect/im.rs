//! Relaxed fixed-point detection of SEFDM self-interference and its
//! Aitken-type (MNL) acceleration.
//!
//! With `u0 = P z / s` and `C = P A_mf / s` (`s` the mean diagonal magnitude
//! of the matched-filter operator, `P` removing the phase of each diagonal
//! entry, which is the identity on AWGN) each iteration does
//!
//! ```text
//! x   = G(u[k-1], d_k)             clamp toward the 4-QAM grid
//! u[k] = lambda * (u0 - C x) + x
//! ```
//!
//! with `d_k = 0` in hard mode and `d_k = 1 - k / eta` in soft mode. The
//! final estimate is the hard decision of `u[eta]`.

use nalgebra::{DMatrix, DVector};

use super::slicing::{slice_hard, slice_into};
use super::{DetectorConfig, DetectorOutcome, SliceMode};
use crate::error::{Error, Result};
use crate::frame::{SymbolVector, C64};
use crate::linkmap::EffectiveChannel;

/// Iterates above this norm are reported as divergence.
pub const DIVERGENCE_NORM: f64 = 1e3;

/// Iterates combined per MNL step.
pub const MNL_WINDOW: usize = 4;

/// MNL extrapolation over four successive values of one component.
///
/// `s1 = x3 + x1 - 2 x2`, `s0 = x2 + x0 - 2 x1`; the branch with the larger
/// denominator is used (`s1` when `|s0| <= |s1|`). A chosen denominator below
/// `epsilon` in magnitude returns `x3`.
pub fn mnl_accelerate(x0: C64, x1: C64, x2: C64, x3: C64, epsilon: f64) -> C64 {
    let s1 = x3 + x1 - 2.0 * x2;
    let s0 = x2 + x0 - 2.0 * x1;
    let (num, den) = if s0.norm() <= s1.norm() {
        (x3 * x1 - x2 * x2, s1)
    } else {
        (x2 * x0 - x1 * x1, s0)
    };
    if den.norm() < epsilon {
        x3
    } else {
        num / den
    }
}

/// Result of a run of [`fixed_point`].
#[derive(Debug, Clone)]
pub struct Iteration {
    pub last: Vec<C64>,
    /// `|| u[eta] - u[eta - 1] ||`.
    pub residual: f64,
    pub iterations: usize,
    /// `u[0] ..= u[eta]` when requested, after any MNL replacement.
    pub history: Vec<Vec<C64>>,
}

/// Runs `eta` steps of `u[k] = step(k, u[k-1])`, optionally replacing every
/// fourth iterate with its per-component MNL extrapolation over the four
/// iterates produced since the previous replacement.
pub fn fixed_point<F>(
    u0: Vec<C64>,
    eta: usize,
    mnl_epsilon: Option<f64>,
    keep_history: bool,
    mut step: F,
) -> Result<Iteration>
where
    F: FnMut(usize, &[C64]) -> Vec<C64>,
{
    let mut history = Vec::new();
    if keep_history {
        history.push(u0.clone());
    }
    let mut window: Vec<Vec<C64>> = Vec::with_capacity(MNL_WINDOW);
    let mut prev = u0;
    let mut residual = 0.0;
    for k in 1..=eta {
        let mut next = step(k, &prev);
        check_norm(&next, k)?;
        if let Some(eps) = mnl_epsilon {
            window.push(next.clone());
            if window.len() == MNL_WINDOW {
                for (i, v) in next.iter_mut().enumerate() {
                    *v =
                        mnl_accelerate(window[0][i], window[1][i], window[2][i], window[3][i], eps);
                }
                window.clear();
                check_norm(&next, k)?;
            }
        }
        residual = next
            .iter()
            .zip(&prev)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if keep_history {
            history.push(next.clone());
        }
        prev = next;
    }
    Ok(Iteration {
        last: prev,
        residual,
        iterations: eta,
        history,
    })
}

fn check_norm(u: &[C64], iteration: usize) -> Result<()> {
    let norm = u.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if norm.is_nan() || norm > DIVERGENCE_NORM {
        return Err(Error::Divergence { iteration, norm });
    }
    Ok(())
}

/// IM output together with the iterate history.
#[derive(Debug, Clone)]
pub struct ImTrace {
    pub outcome: DetectorOutcome,
    pub history: Vec<Vec<C64>>,
}

/// `conj(D_kk) / |D_kk|` per row, or 1 where the diagonal vanishes.
fn diagonal_phases(a: &DMatrix<C64>) -> Vec<C64> {
    (0..a.nrows())
        .map(|k| {
            let d = a[(k, k)];
            let m = d.norm();
            if m > f64::MIN_POSITIVE {
                d.conj() / m
            } else {
                C64::new(1.0, 0.0)
            }
        })
        .collect()
}

pub(crate) fn run_im(
    z: &[C64],
    eff: &EffectiveChannel,
    cfg: &DetectorConfig,
    mnl: bool,
    keep_history: bool,
) -> Result<(DetectorOutcome, Vec<Vec<C64>>)> {
    let n = eff.n_data();
    if z.len() != n {
        return Err(Error::shape("matched-filter symbols", n, z.len()));
    }
    let scale = eff.diag_scale;
    let rot = diagonal_phases(&eff.matrix_mf);
    let mut c_hat: DMatrix<C64> = &eff.matrix_mf / C64::new(scale, 0.0);
    for (k, r) in rot.iter().enumerate() {
        c_hat.row_mut(k).iter_mut().for_each(|v| *v *= r);
    }
    let u0: Vec<C64> = z.iter().zip(&rot).map(|(v, r)| v * r / scale).collect();
    let lambda = cfg.lambda;
    let eta = cfg.eta;
    let mode = cfg.mode;
    let mut sliced = DVector::<C64>::zeros(n);
    let mut cs = DVector::<C64>::zeros(n);
    let u0_ref = u0.clone();
    let it = fixed_point(
        u0,
        eta,
        mnl.then_some(cfg.mnl_epsilon),
        keep_history,
        |k, prev| {
            let d = match mode {
                SliceMode::Hard => 0.0,
                SliceMode::Soft => 1.0 - k as f64 / eta as f64,
            };
            slice_into(prev, d, sliced.as_mut_slice());
            cs.gemv(C64::new(1.0, 0.0), &c_hat, &sliced, C64::new(0.0, 0.0));
            u0_ref
                .iter()
                .zip(cs.iter())
                .zip(sliced.iter())
                .map(|((a, b), x)| (a - b) * lambda + x)
                .collect()
        },
    )?;
    let symbols = slice_hard(&SymbolVector::data(it.last));
    Ok((
        DetectorOutcome {
            symbols,
            iterations_used: it.iterations,
            sd_nodes_visited: 0,
            residual: it.residual,
            truncated: false,
        },
        it.history,
    ))
}

/// Plain IM (MNL off regardless of `cfg.mnl_enabled`), with history.
pub fn im_detect(
    z: &SymbolVector,
    eff: &EffectiveChannel,
    cfg: &DetectorConfig,
) -> Result<ImTrace> {
    cfg.validate()?;
    let (outcome, history) = run_im(&z.values, eff, cfg, false, true)?;
    Ok(ImTrace { outcome, history })
}

/// IM with MNL acceleration.
pub fn im_mnl_detect(
    z: &SymbolVector,
    eff: &EffectiveChannel,
    cfg: &DetectorConfig,
) -> Result<DetectorOutcome> {
    cfg.validate()?;
    Ok(run_im(&z.values, eff, cfg, true, false)?.0)
}
