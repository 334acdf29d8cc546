//! Endpoint classification at +∞.
//!
//! Square-summability cannot be decided from finitely many terms, so the
//! number of ℓ²_W solutions is read off the eigenvalues of the partial Gram
//! matrix G(T) = Σ_{t ≤ T} R(Φ)* W R(Φ) of the fundamental matrix as the
//! horizon T doubles: eigenvalues that settle (or sit at the rounding floor
//! of the largest one) belong to square-summable directions, eigenvalues that
//! keep multiplying belong to divergent ones.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{herm_eigen, CMat, C64, I};
use crate::model::SystemCoefficients;
use crate::solution::FundamentalMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseKind {
    LimitCircle,
    LimitPoint,
    Intermediate,
}

impl CaseKind {
    pub fn from_index(n: usize, d: usize) -> Option<CaseKind> {
        if d == 2 * n {
            Some(CaseKind::LimitCircle)
        } else if d == n {
            Some(CaseKind::LimitPoint)
        } else if n < d && d < 2 * n {
            Some(CaseKind::Intermediate)
        } else {
            None
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ClassifyOptions {
    /// Largest t₀ tried when looking for a definiteness window.
    pub max_window: i64,
    /// Relative threshold for positive definiteness of the Gram matrix.
    pub definiteness_tol: f64,
    /// First horizon length (steps from a).
    pub initial_length: i64,
    /// Horizon cap (steps from a).
    pub cap: i64,
    /// Relative increment below which a Gram eigenvalue has settled.
    pub stable_tol: f64,
    /// Ratio above which a Gram eigenvalue counts as divergent.
    pub growth_ratio: f64,
    /// Eigenvalues below noise_factor·eps·2n·λ_max are rounding noise.
    pub noise_factor: f64,
    /// Stop doubling once the largest Gram eigenvalue exceeds this.
    pub overflow_at: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            max_window: 4096,
            definiteness_tol: 1e-10,
            initial_length: 16,
            cap: 1 << 14,
            stable_tol: 1e-6,
            growth_ratio: 1.5,
            noise_factor: 1e3,
            overflow_at: 1e200,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DefinitenessWindow {
    pub s0: i64,
    pub t0: i64,
    pub min_eig: f64,
}

/// Smallest t₀ with Σ_{t=a}^{t₀} R(Φ)*(t,0) W(t) R(Φ)(t,0) positive definite.
pub fn find_definiteness(sys: &SystemCoefficients, opts: &ClassifyOptions) -> Result<DefinitenessWindow> {
    let a = sys.start();
    let m = 2 * sys.n();
    let mut phi = FundamentalMatrix::new(sys, C64::new(0.0, 0.0));
    let mut g = CMat::zeros(m, m);
    for t0 in a..=a + opts.max_window {
        let r = phi.r_trace(t0)?;
        g += &r.adjoint_mul(&sys.weight(t0).matmul(&r));
        if g.is_zero() {
            continue;
        }
        let eig = herm_eigen(&g.hermitian_part(), 1e-14)?;
        let max = eig.values[m - 1];
        let min = eig.values[0];
        if min > opts.definiteness_tol * max {
            return Ok(DefinitenessWindow { s0: a, t0, min_eig: min });
        }
    }
    Err(Error::DefinitenessNotFound { max_window: a + opts.max_window })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum GramTrend {
    /// Settled under doubling.
    Bounded,
    /// Indistinguishable from rounding noise of the dominant direction.
    Noise,
    Divergent,
    Undecided,
}

#[derive(Clone, Debug, Serialize)]
pub struct GramSnapshot {
    pub horizon: i64,
    pub eigenvalues: Vec<f64>,
    /// Diagonal of the Gram matrix: partial norms² of the probe columns.
    pub probe_norms: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct L2Count {
    pub lambda: [f64; 2],
    pub count: usize,
    pub trends: Vec<GramTrend>,
    pub snapshots: Vec<GramSnapshot>,
    /// W vanished identically on the final doubling window.
    pub weight_vanishes: bool,
}

fn trends(prev: &[f64], cur: &[f64], dim: usize, opts: &ClassifyOptions) -> Vec<GramTrend> {
    let max = cur.last().copied().unwrap_or(0.0);
    let floor = opts.noise_factor * f64::EPSILON * dim as f64 * max;
    prev.iter()
        .zip(cur)
        .map(|(&p, &c)| {
            if c <= floor {
                GramTrend::Noise
            } else if (c - p).abs() <= opts.stable_tol * c {
                GramTrend::Bounded
            } else if p > 0.0 && c / p >= opts.growth_ratio {
                GramTrend::Divergent
            } else {
                GramTrend::Undecided
            }
        })
        .collect()
}

/// Number of linearly independent ℓ²_W solutions of (1.1_λ).
pub fn count_l2_solutions(sys: &SystemCoefficients, lambda: C64, opts: &ClassifyOptions) -> Result<L2Count> {
    let a = sys.start();
    let m = 2 * sys.n();
    let mut phi = FundamentalMatrix::new(sys, lambda);
    let mut g = CMat::zeros(m, m);
    let mut t = a;
    let mut len = opts.initial_length.max(1);
    let mut snapshots: Vec<GramSnapshot> = Vec::new();
    let mut last_decided: Option<usize> = None;
    let mut last_trends = Vec::new();
    loop {
        let horizon = a + len - 1;
        let mut window_zero = true;
        while t <= horizon {
            let w = sys.weight(t);
            if !w.is_zero() {
                window_zero = false;
                let r = phi.r_trace(t)?;
                g += &r.adjoint_mul(&w.matmul(&r));
            }
            t += 1;
        }
        let eig = herm_eigen(&g.hermitian_part(), 1e-14)?;
        let snap = GramSnapshot {
            horizon,
            eigenvalues: eig.values.clone(),
            probe_norms: (0..m).map(|i| g[(i, i)].re).collect(),
        };
        let max = snap.eigenvalues[m - 1];
        if let Some(prev) = snapshots.last() {
            let tr = trends(&prev.eigenvalues, &snap.eigenvalues, m, opts);
            let decided = !tr.contains(&GramTrend::Undecided);
            let count = tr.iter().filter(|x| matches!(x, GramTrend::Bounded | GramTrend::Noise)).count();
            snapshots.push(snap);
            if window_zero && decided {
                return Ok(L2Count {
                    lambda: [lambda.re, lambda.im],
                    count,
                    trends: tr,
                    snapshots,
                    weight_vanishes: true,
                });
            }
            if decided && last_decided == Some(count) {
                return Ok(L2Count {
                    lambda: [lambda.re, lambda.im],
                    count,
                    trends: tr,
                    snapshots,
                    weight_vanishes: false,
                });
            }
            last_decided = if decided { Some(count) } else { None };
            last_trends = tr;
        } else {
            snapshots.push(snap);
        }
        if max > opts.overflow_at || 2 * len > opts.cap {
            return Err(Error::ClassificationAmbiguous(format!(
                "λ = {}{:+}i: Gram eigenvalues did not separate by horizon {} (trends {:?}, largest {:.3e})",
                lambda.re, lambda.im, horizon, last_trends, max
            )));
        }
        len *= 2;
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CaseLabel {
    pub kind: CaseKind,
    pub n: usize,
    pub d: usize,
    pub finite_dim_space: bool,
    pub definiteness: DefinitenessWindow,
    pub plus: L2Count,
    pub minus: L2Count,
}

/// Deficiency index from the probes λ = ±i and the resulting case.
pub fn classify(sys: &SystemCoefficients, opts: &ClassifyOptions) -> Result<CaseLabel> {
    let definiteness = find_definiteness(sys, opts)?;
    let (plus, minus) = rayon::join(|| count_l2_solutions(sys, I, opts), || count_l2_solutions(sys, -I, opts));
    let (plus, minus) = (plus?, minus?);
    if plus.count != minus.count {
        return Err(Error::NoSelfAdjointExtension { d_plus: plus.count, d_minus: minus.count });
    }
    let n = sys.n();
    let d = plus.count;
    let kind = CaseKind::from_index(n, d).ok_or_else(|| {
        Error::ClassificationAmbiguous(format!(
            "{d} square-summable solutions found, expected between {n} and {}",
            2 * n
        ))
    })?;
    let finite_dim_space = plus.weight_vanishes && minus.weight_vanishes;
    if finite_dim_space && kind != CaseKind::LimitCircle {
        return Err(Error::InternalConsistency(format!(
            "weight has finite support but only {d} of {} solutions were found square-summable",
            2 * n
        )));
    }
    Ok(CaseLabel { kind, n, d, finite_dim_space, definiteness, plus, minus })
}

/// The intermediate case needs a real λ₀ with exactly d square-summable solutions.
pub fn check_real_point(sys: &SystemCoefficients, lambda0: f64, d: usize, opts: &ClassifyOptions) -> Result<L2Count> {
    let count = count_l2_solutions(sys, C64::new(lambda0, 0.0), opts)?;
    if count.count != d {
        return Err(Error::Precondition(format!(
            "λ₀ = {lambda0} has {} square-summable solutions, the deficiency index is {d}",
            count.count
        )));
    }
    Ok(count)
}
