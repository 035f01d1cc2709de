//! Regularized sphere decoding over 4-QAM and an exhaustive reference.
//!
//! The complex problem `min ||y - A s||^2 + rho ||s||^2` is split into real
//! coordinates (`[Re s0, Im s0, Re s1, ...]`), each taking values `+-A`. The
//! ridge term is folded in by stacking `sqrt(rho) I` under `A`; on 4-QAM it
//! is constant, so it changes the conditioning of the triangular factor but
//! not the minimizer.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::frame::{C64, QAM4_AMPLITUDE};
use crate::linkmap::EffectiveChannel;

/// Largest `N_d` the exhaustive search accepts (`4^8` candidates).
pub const ML_ORACLE_LIMIT: usize = 8;

#[derive(Debug, Clone)]
pub struct SdOutcome {
    pub symbols: Vec<C64>,
    /// Candidates whose partial metric was evaluated.
    pub nodes: u64,
    pub truncated: bool,
    /// Regularized metric of `symbols`, up to the constant dropped by QR.
    pub radius_sq: f64,
    /// Squared radius after each accepted leaf, in order.
    pub accepted: Vec<f64>,
}

struct Search<'a> {
    r: &'a DMatrix<f64>,
    y: &'a DVector<f64>,
    current: Vec<f64>,
    best: Option<Vec<f64>>,
    radius_sq: f64,
    nodes: u64,
    max_nodes: u64,
    truncated: bool,
    accepted: Vec<f64>,
}

impl Search<'_> {
    fn descend(&mut self, level: usize, partial: f64) {
        let dim = self.current.len();
        let mut acc = self.y[level];
        for l in level + 1..dim {
            acc -= self.r[(level, l)] * self.current[l];
        }
        let rii = self.r[(level, level)];
        let centre = acc / rii;
        let order = if centre >= 0.0 {
            [QAM4_AMPLITUDE, -QAM4_AMPLITUDE]
        } else {
            [-QAM4_AMPLITUDE, QAM4_AMPLITUDE]
        };
        for cand in order {
            if self.nodes >= self.max_nodes {
                self.truncated = true;
                return;
            }
            self.nodes += 1;
            let e = acc - rii * cand;
            let metric = partial + e * e;
            if metric >= self.radius_sq {
                // The other candidate is farther from the centre.
                break;
            }
            self.current[level] = cand;
            if level == 0 {
                self.radius_sq = metric;
                self.accepted.push(metric);
                self.best = Some(self.current.clone());
            } else {
                self.descend(level - 1, metric);
            }
            if self.truncated {
                return;
            }
        }
    }
}

fn to_real(s: &[C64]) -> Vec<f64> {
    s.iter().flat_map(|v| [v.re, v.im]).collect()
}

fn to_complex(x: &[f64]) -> Vec<C64> {
    x.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect()
}

/// Depth-first Schnorr-Euchner search. With `init` the radius starts at the
/// metric of `init` (which is returned if nothing better is found);
/// otherwise it starts unbounded.
pub fn reg_sphere_decode(
    y_obs: &[C64],
    eff: &EffectiveChannel,
    rho: f64,
    max_nodes: u64,
    init: Option<&[C64]>,
) -> Result<SdOutcome> {
    let a = &eff.matrix_obs;
    let (m, n) = a.shape();
    if y_obs.len() != m {
        return Err(Error::shape("observation", m, y_obs.len()));
    }
    if !(rho.is_finite() && rho >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "regularization must be >= 0, got {rho}"
        )));
    }
    if let Some(s) = init {
        if s.len() != n {
            return Err(Error::shape("initial estimate", n, s.len()));
        }
    }
    let dim = 2 * n;
    let rows = 2 * m + dim;
    let mut h = DMatrix::<f64>::zeros(rows, dim);
    for i in 0..m {
        for k in 0..n {
            let v = a[(i, k)];
            h[(2 * i, 2 * k)] = v.re;
            h[(2 * i, 2 * k + 1)] = -v.im;
            h[(2 * i + 1, 2 * k)] = v.im;
            h[(2 * i + 1, 2 * k + 1)] = v.re;
        }
    }
    let sr = rho.sqrt();
    for j in 0..dim {
        h[(2 * m + j, j)] = sr;
    }
    let mut y = DVector::<f64>::zeros(rows);
    for (i, v) in y_obs.iter().enumerate() {
        y[2 * i] = v.re;
        y[2 * i + 1] = v.im;
    }
    let qr = h.qr();
    let r = qr.r();
    let y_hat = qr.q().transpose() * &y;

    let reduced_metric = |x: &[f64]| -> f64 {
        let xv = DVector::from_column_slice(x);
        (&y_hat - &r * xv).norm_squared()
    };
    let (radius_sq, best) = match init {
        Some(s) => {
            let x = to_real(s);
            (reduced_metric(&x), Some(x))
        }
        None => (f64::INFINITY, None),
    };
    let mut search = Search {
        r: &r,
        y: &y_hat,
        current: vec![0.0; dim],
        best,
        radius_sq,
        nodes: 0,
        max_nodes,
        truncated: false,
        accepted: Vec::new(),
    };
    if dim > 0 {
        search.descend(dim - 1, 0.0);
    }
    let best = search.best.unwrap_or_else(|| vec![QAM4_AMPLITUDE; dim]);
    Ok(SdOutcome {
        symbols: to_complex(&best),
        nodes: search.nodes,
        truncated: search.truncated,
        radius_sq: search.radius_sq,
        accepted: search.accepted,
    })
}

/// `||y - A s||^2 + rho ||s||^2` evaluated directly.
pub fn regularized_metric(y_obs: &[C64], a: &DMatrix<C64>, s: &[C64], rho: f64) -> f64 {
    let sv = DVector::from_column_slice(s);
    let resid = DVector::from_column_slice(y_obs) - a * &sv;
    resid.norm_squared() + rho * sv.norm_squared()
}

/// Exhaustive minimization of the regularized metric over `4^N_d` vectors.
pub fn ml_oracle(y_obs: &[C64], eff: &EffectiveChannel, rho: f64) -> Result<Vec<C64>> {
    let a = &eff.matrix_obs;
    let (m, n) = a.shape();
    if n > ML_ORACLE_LIMIT {
        return Err(Error::OracleTooLarge {
            n,
            limit: ML_ORACLE_LIMIT,
        });
    }
    if y_obs.len() != m {
        return Err(Error::shape("observation", m, y_obs.len()));
    }
    let amp = QAM4_AMPLITUDE;
    let points = [
        C64::new(amp, amp),
        C64::new(-amp, amp),
        C64::new(amp, -amp),
        C64::new(-amp, -amp),
    ];
    let mut best = Vec::new();
    let mut best_metric = f64::INFINITY;
    let mut s = vec![points[0]; n];
    for code in 0..(1usize << (2 * n)) {
        for (k, v) in s.iter_mut().enumerate() {
            *v = points[(code >> (2 * k)) & 3];
        }
        let metric = regularized_metric(y_obs, a, &s, rho);
        if metric < best_metric {
            best_metric = metric;
            best = s.clone();
        }
    }
    Ok(best)
}
