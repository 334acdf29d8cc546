//! Resolvents, Green data, eigenvalues of regular problems, truncation error
//! bounds and the approximation driver.
//!
//! Everything is expressed through the fundamental matrix Φ(·, z) with
//! Φ(a, z) = I: a solution of J Δy = (P + zW) R(y) − W R(g) is
//!
//!   y(t) = Φ(t, z) [ y(a) + J S(t) ],   S(t) = Σ_{s<t} R(Φ)*(s, z̄) W(s) R(g)(s),
//!
//! and the boundary data only decide y(a).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::CaseKind;
use crate::error::{Error, Result};
use crate::extension::{RegularBC, SseDescriptor};
use crate::matrix::{fro_norm, herm_eigen, vdot, vec_norm, CMat, Lu, C64, I, ZERO};
use crate::model::{apply_l, apply_r, HamSequence, SystemCoefficients};
use crate::solution::{solution_tails, transfer_tails, FundamentalMatrix, TailOptions};

// ---------------------------------------------------------------------------
// Helpers
// ---------------------------------------------------------------------------

/// W(s) R(g)(s) for s = a … last, skipping zero terms.
fn forcing(sys: &SystemCoefficients, g: &HamSequence, last: i64) -> Vec<(i64, Vec<C64>)> {
    let a = sys.start();
    let mut out = Vec::new();
    for s in a..=last.min(g.end()) {
        let n = sys.n();
        let next = g.get_or_zero(s + 1);
        let now = g.get_or_zero(s);
        let rg: Vec<C64> = next[..n].iter().chain(&now[n..]).copied().collect();
        let w = sys.weight(s);
        if w.is_zero() {
            continue;
        }
        let f = w.mat_vec(&rg);
        if f.iter().any(|x| *x != ZERO) {
            out.push((s, f));
        }
    }
    out
}

fn check_dim(sys: &SystemCoefficients, g: &HamSequence) -> Result<()> {
    if g.dim() != 2 * sys.n() {
        return Err(Error::Dimension(format!("g has dimension {}, system needs {}", g.dim(), 2 * sys.n())));
    }
    Ok(())
}

fn sub(x: &[C64], y: &[C64]) -> Vec<C64> {
    x.iter().zip(y).map(|(p, q)| p - q).collect()
}

fn add_into(x: &mut [C64], y: &[C64]) {
    for (p, q) in x.iter_mut().zip(y) {
        *p += q;
    }
}

/// Σ_{t ∈ range} R(y)* W R(y).
pub fn weighted_norm2(sys: &SystemCoefficients, y: &HamSequence, range: std::ops::RangeInclusive<i64>) -> Result<f64> {
    let mut s = 0.0;
    for t in range {
        let w = sys.weight(t);
        if w.is_zero() {
            continue;
        }
        let r = apply_r(y, t)?;
        s += vdot(&r, &w.mat_vec(&r)).re;
    }
    Ok(s)
}

/// Weighted norm² of g over its whole stored stretch (zero beyond it).
pub fn sequence_norm2(sys: &SystemCoefficients, g: &HamSequence) -> f64 {
    let mut s = 0.0;
    let n = sys.n();
    for t in sys.start()..=g.end() {
        let next = g.get_or_zero(t + 1);
        let now = g.get_or_zero(t);
        let r: Vec<C64> = next[..n].iter().chain(&now[n..]).copied().collect();
        s += vdot(&r, &sys.weight(t).mat_vec(&r)).re;
    }
    s
}

/// max_t ‖L(y)(t) − W(t) R(z y − g)(t)‖ over `range`.
pub fn defining_residual(
    sys: &SystemCoefficients,
    y: &HamSequence,
    g: &HamSequence,
    z: C64,
    range: std::ops::RangeInclusive<i64>,
) -> Result<f64> {
    let n = sys.n();
    let mut worst = 0.0f64;
    for t in range {
        let ly = apply_l(sys, y, t)?;
        let ry = apply_r(y, t)?;
        let next = g.get_or_zero(t + 1);
        let now = g.get_or_zero(t);
        let rg: Vec<C64> = next[..n].iter().chain(&now[n..]).copied().collect();
        let v: Vec<C64> = ry.iter().zip(&rg).map(|(p, q)| z * p - q).collect();
        let rhs = sys.weight(t).mat_vec(&v);
        worst = worst.max(vec_norm(&sub(&ly, &rhs)));
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// Green data
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GreenKind {
    Regular { b: i64 },
    SingularLcc { horizon: i64 },
}

/// Limit matrix K and the kernel matrices of
///   G(t, s, z) = Φ(t, z) M R(Φ)*(s, z̄) for s < t,  Φ(t, z) N R(Φ)*(s, z̄) for s ≥ t.
#[derive(Clone, Debug, Serialize)]
pub struct GreenData {
    pub z: [f64; 2],
    pub kind: GreenKind,
    pub k: CMat,
    pub n_kernel: CMat,
    /// Stored as N + J, so M − N = J holds exactly.
    pub m_kernel: CMat,
    /// Last relative increment of the K-limit (0 for regular data).
    pub residual: f64,
    /// Smallest/largest pivot modulus of the boundary solve.
    pub pivot_ratio: f64,
}

fn green_from_k(z: C64, kind: GreenKind, m: &CMat, k: CMat, residual: f64) -> Result<(GreenData, Lu)> {
    let n = m.rows() / 2;
    let j = CMat::j(n);
    let lhs = m - &k;
    let lu = Lu::factor(&lhs)?;
    if lu.is_singular() {
        return Err(Error::z_eigen(z, "the boundary matrix P − QΦ(b+1, z) is singular"));
    }
    let n_kernel = lu.solve(&k.matmul(&j))?;
    let m_kernel = &n_kernel + &j;
    let pivot_ratio = lu.pivot_ratio();
    Ok((GreenData { z: [z.re, z.im], kind, k, n_kernel, m_kernel, residual, pivot_ratio }, lu))
}

// ---------------------------------------------------------------------------
// Regular resolvent
// ---------------------------------------------------------------------------

/// (zI − H)⁻¹ for the regular problem on [a, b] with P y(a) − Q y(b+1) = 0.
#[derive(Clone, Debug)]
pub struct RegularResolvent {
    sys: SystemCoefficients,
    pub bc: RegularBC,
    pub z: C64,
    /// Φ(t, z), t = a … b+1.
    phi: Vec<CMat>,
    /// R(Φ)(s, z̄), s = a … b.
    r_phi_bar: Vec<CMat>,
    lu: Lu,
    pub green: GreenData,
}

impl RegularResolvent {
    pub fn new(sys: &SystemCoefficients, bc: &RegularBC, z: C64) -> Result<Self> {
        let a = sys.start();
        let b = bc.b;
        if b < a {
            return Err(Error::Precondition(format!("truncation point b = {b} lies before a = {a}")));
        }
        if bc.n() != sys.n() {
            return Err(Error::Dimension("boundary matrices do not match the system".into()));
        }
        let mut fz = FundamentalMatrix::new(sys, z);
        fz.extend_to(b + 1)?;
        let phi: Vec<CMat> = (a..=b + 1).map(|t| fz.get(t)).collect::<Result<_>>()?;
        let r_phi_bar = if z.im == 0.0 {
            (a..=b).map(|s| fz.r_trace(s)).collect::<Result<Vec<_>>>()?
        } else {
            let mut fb = FundamentalMatrix::new(sys, z.conj());
            (a..=b).map(|s| fb.r_trace(s)).collect::<Result<Vec<_>>>()?
        };
        let k = bc.q.matmul(&phi[(b + 1 - a) as usize]);
        let (green, lu) = green_from_k(z, GreenKind::Regular { b }, &bc.p, k, 0.0)?;
        Ok(RegularResolvent { sys: sys.clone(), bc: bc.clone(), z, phi, r_phi_bar, lu, green })
    }

    pub fn b(&self) -> i64 {
        self.bc.b
    }

    fn idx(&self, t: i64) -> usize {
        (t - self.sys.start()) as usize
    }

    /// Variation of constants with y(a) from the boundary solve.
    pub fn apply(&self, g: &HamSequence) -> Result<HamSequence> {
        check_dim(&self.sys, g)?;
        let a = self.sys.start();
        let b = self.b();
        let m = 2 * self.sys.n();
        let j = CMat::j(self.sys.n());
        let f = forcing(&self.sys, g, b);
        // S(t) for t = a … b+1.
        let mut s_at = vec![vec![ZERO; m]; (b - a + 2) as usize];
        let mut acc = vec![ZERO; m];
        let mut fi = f.iter().peekable();
        for t in a..=b {
            s_at[self.idx(t)] = acc.clone();
            if let Some((s, fs)) = fi.peek() {
                if *s == t {
                    add_into(&mut acc, &self.r_phi_bar[self.idx(t)].adjoint().mat_vec(fs));
                    fi.next();
                }
            }
        }
        s_at[self.idx(b + 1)] = acc.clone();
        let rhs = self.green.k.matmul(&j).mat_vec(&acc);
        let ya = self.lu.solve_vec(&rhs)?;
        let values = (a..=b + 1)
            .map(|t| {
                let mut u = j.mat_vec(&s_at[self.idx(t)]);
                add_into(&mut u, &ya);
                self.phi[self.idx(t)].mat_vec(&u)
            })
            .collect();
        Ok(HamSequence { start: a, values })
    }

    /// Σ_s G_r(t, s, z) W(s) R(g)(s) with the stored kernel matrices.
    pub fn apply_kernel(&self, g: &HamSequence) -> Result<HamSequence> {
        check_dim(&self.sys, g)?;
        let a = self.sys.start();
        let b = self.b();
        let m = 2 * self.sys.n();
        let f = forcing(&self.sys, g, b);
        let len = (b - a + 2) as usize;
        // contributions c(s) = R(Φ)*(s, z̄) f(s)
        let mut c = vec![vec![ZERO; m]; len];
        for (s, fs) in &f {
            c[self.idx(*s)] = self.r_phi_bar[self.idx(*s)].adjoint().mat_vec(fs);
        }
        // before(t) = Σ_{s<t} c(s), from_t(t) = Σ_{t ≤ s ≤ b} c(s), each summed on its own.
        let mut before = vec![vec![ZERO; m]; len];
        for i in 1..len {
            let mut v = before[i - 1].clone();
            add_into(&mut v, &c[i - 1]);
            before[i] = v;
        }
        let mut from = vec![vec![ZERO; m]; len];
        for i in (0..len - 1).rev() {
            let mut v = from[i + 1].clone();
            add_into(&mut v, &c[i]);
            from[i] = v;
        }
        let values = (0..len)
            .map(|i| {
                let mut u = self.green.m_kernel.mat_vec(&before[i]);
                add_into(&mut u, &self.green.n_kernel.mat_vec(&from[i]));
                self.phi[i].mat_vec(&u)
            })
            .collect();
        Ok(HamSequence { start: a, values })
    }
}

/// (zI − H)⁻¹ g for the regular problem (variation of constants).
pub fn regular_resolvent(sys: &SystemCoefficients, bc: &RegularBC, z: C64, g: &HamSequence) -> Result<HamSequence> {
    RegularResolvent::new(sys, bc, z)?.apply(g)
}

/// Green data of the regular problem at z.
pub fn green_kernel_regular(sys: &SystemCoefficients, bc: &RegularBC, z: C64) -> Result<GreenData> {
    Ok(RegularResolvent::new(sys, bc, z)?.green)
}

// ---------------------------------------------------------------------------
// Singular resolvent, limit-circle case
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LimitOptions {
    /// Relative Cauchy tolerance on the K-limit.
    pub tol: f64,
    /// Horizon cap (steps from a).
    pub cap: i64,
}

impl Default for LimitOptions {
    fn default() -> Self {
        LimitOptions { tol: 1e-12, cap: 1 << 16 }
    }
}

/// K = lim N Θ*(t) J Φ(t, z) and the kernel matrices N₀, M₀.
pub fn green_singular_lcc(desc: &SseDescriptor, z: C64, opts: LimitOptions) -> Result<GreenData> {
    if desc.kind != CaseKind::LimitCircle {
        return Err(Error::Precondition("the singular resolvent is only available in the limit-circle case".into()));
    }
    let sys = desc.system();
    let n = sys.n();
    let j = CMat::j(n);
    let nm = desc.n_mat.as_ref().unwrap();
    let a = sys.start();
    if z.im == 0.0 && z.re == desc.lambda_frame {
        // Φ(·, λ_f) = Θ and Θ* J Θ = J for every t.
        return Ok(green_from_k(z, GreenKind::SingularLcc { horizon: a }, &desc.m, nm.matmul(&j), 0.0)?.0);
    }
    let mut phi = FundamentalMatrix::new(sys, z);
    let mut eval = |t: i64| -> Result<CMat> {
        let th = desc.theta_at(t)?;
        Ok(nm.matmul(&th.adjoint()).matmul(&j).matmul(&phi.at(t)?))
    };
    let mut len = 32.max(2 * (desc.t0 - a + 1));
    let mut prev = eval(a + len)?;
    loop {
        len *= 2;
        if len > opts.cap {
            return Err(Error::TailDivergence {
                quantity: "limit matrix K",
                horizon: a + len / 2,
                increment: f64::NAN,
            });
        }
        let cur = eval(a + len)?;
        let inc = fro_norm(&(&cur - &prev)) / fro_norm(&cur).max(1.0);
        if inc <= opts.tol {
            return Ok(green_from_k(z, GreenKind::SingularLcc { horizon: a + len }, &desc.m, cur, inc)?.0);
        }
        prev = cur;
    }
}

/// y = (zI − H₁)⁻¹ g on the half line, for g of finite support.
pub struct SingularResolvent {
    sys: SystemCoefficients,
    pub z: C64,
    pub green: GreenData,
    phi: FundamentalMatrix,
    /// S(t) for t = a … last+1, S(t) = Σ_{s<t} R(Φ)*(s, z̄) f(s); constant afterwards.
    prefix: Vec<Vec<C64>>,
}

impl SingularResolvent {
    pub fn new(desc: &SseDescriptor, z: C64, g: &HamSequence, opts: LimitOptions) -> Result<Self> {
        let sys = desc.system().clone();
        check_dim(&sys, g)?;
        let green = green_singular_lcc(desc, z, opts)?;
        let a = sys.start();
        let m = 2 * sys.n();
        let last = g.end().max(a);
        let f = forcing(&sys, g, last);
        let mut fb = FundamentalMatrix::new(&sys, z.conj());
        let mut prefix = vec![vec![ZERO; m]];
        let mut acc = vec![ZERO; m];
        let mut fi = f.iter().peekable();
        for t in a..=last {
            if let Some((s, fs)) = fi.peek() {
                if *s == t {
                    add_into(&mut acc, &fb.r_trace(t)?.adjoint().mat_vec(fs));
                    fi.next();
                }
            }
            prefix.push(acc.clone());
        }
        Ok(SingularResolvent { phi: FundamentalMatrix::new(&sys, z), sys, z, green, prefix })
    }

    fn s_at(&self, t: i64) -> &[C64] {
        let i = ((t - self.sys.start()).max(0) as usize).min(self.prefix.len() - 1);
        &self.prefix[i]
    }

    /// y(t) = Φ(t)[M₀ S(t) + N₀ (S(∞) − S(t))].
    pub fn value(&mut self, t: i64) -> Result<Vec<C64>> {
        let st = self.s_at(t).to_vec();
        let total = self.prefix.last().unwrap();
        let rest = sub(total, &st);
        let mut u = self.green.m_kernel.mat_vec(&st);
        add_into(&mut u, &self.green.n_kernel.mat_vec(&rest));
        Ok(self.phi.at(t)?.mat_vec(&u))
    }

    /// y on [a, end].
    pub fn sequence(&mut self, end: i64) -> Result<HamSequence> {
        let a = self.sys.start();
        let values = (a..=end).map(|t| self.value(t)).collect::<Result<_>>()?;
        Ok(HamSequence { start: a, values })
    }

    /// Σ_{t ≥ start} R(y)* W R(y) for each start, by horizon doubling.
    pub fn tail_norms2(&mut self, starts: &[i64], opts: TailOptions) -> Result<Vec<f64>> {
        let a = self.sys.start();
        let sys = self.sys.clone();
        let mut cur: Option<(i64, Vec<C64>)> = None;
        let (sums, _, _) = crate::solution::accumulate_tails(a, starts, opts, "singular resolvent tail", |t| {
            let now = match cur.take() {
                Some((s, v)) if s == t => v,
                _ => self.value(t)?,
            };
            let next = self.value(t + 1)?;
            let n = sys.n();
            let r: Vec<C64> = next[..n].iter().chain(&now[n..]).copied().collect();
            let v = vdot(&r, &sys.weight(t).mat_vec(&r));
            cur = Some((t + 1, next));
            Ok(CMat::scalar(v))
        })?;
        Ok(sums.iter().map(|m| m[(0, 0)].re).collect())
    }
}

/// (zI − H₁)⁻¹ g on [a, end] in the limit-circle case.
pub fn singular_resolvent_lcc(
    desc: &SseDescriptor,
    z: C64,
    g: &HamSequence,
    end: i64,
    opts: LimitOptions,
) -> Result<HamSequence> {
    SingularResolvent::new(desc, z, g, opts)?.sequence(end)
}

// ---------------------------------------------------------------------------
// Resolvent defect
// ---------------------------------------------------------------------------

/// δ_r = δ_r1 + δ_r2 for one g and one truncation, with the a-priori bound.
#[derive(Clone, Debug, Serialize)]
pub struct DefectSample {
    pub b: i64,
    pub sample: usize,
    pub delta: f64,
    pub delta1: f64,
    pub delta2: f64,
    /// η(r)‖g‖²
    pub bound: f64,
    pub eta: f64,
    pub g_norm2: f64,
    pub m_r: f64,
    pub n_r: f64,
}

/// η(r) = 12n²[9α₀²(z)α₀²(z̄)(m_r² + n_r²) + n₀²α₀²(z)α_r(z̄) + 6(m₀² + n₀²)α₀²(z̄)α_r(z)].
#[allow(clippy::too_many_arguments)]
pub fn eta(
    n: usize,
    alpha0_z: f64,
    alpha0_zbar: f64,
    alpha_r_z: f64,
    alpha_r_zbar: f64,
    m0: f64,
    n0: f64,
    m_r: f64,
    n_r: f64,
) -> f64 {
    let n2 = (n * n) as f64;
    let a2z = alpha0_z * alpha0_z;
    let a2zb = alpha0_zbar * alpha0_zbar;
    12.0 * n2
        * (9.0 * a2z * a2zb * (m_r * m_r + n_r * n_r)
            + n0 * n0 * a2z * alpha_r_zbar
            + 6.0 * (m0 * m0 + n0 * n0) * a2zb * alpha_r_z)
}

/// Defects of the induced regular resolvents along `b_list` for several g.
pub fn defect_study(
    desc: &SseDescriptor,
    z: C64,
    gs: &[HamSequence],
    b_list: &[i64],
    limit: LimitOptions,
    tails: TailOptions,
) -> Result<Vec<DefectSample>> {
    if z.im == 0.0 {
        return Err(Error::Precondition("defects are sampled at a non-real z".into()));
    }
    if b_list.is_empty() || gs.is_empty() {
        return Ok(Vec::new());
    }
    let sys = desc.system();
    let n = sys.n();
    let green = green_singular_lcc(desc, z, limit)?;
    let mut pz = FundamentalMatrix::new(sys, z);
    let mut pzb = FundamentalMatrix::new(sys, z.conj());
    let tz = solution_tails(sys, &mut pz, b_list, tails)?;
    let tzb = solution_tails(sys, &mut pzb, b_list, tails)?;
    let m0 = fro_norm(&green.m_kernel);
    let n0 = fro_norm(&green.n_kernel);
    let mut out = Vec::new();
    let mut singular: Vec<SingularResolvent> =
        gs.iter().map(|g| SingularResolvent::new(desc, z, g, limit)).collect::<Result<_>>()?;
    let starts: Vec<i64> = b_list.iter().map(|b| b + 1).collect();
    let tails_per_g: Vec<Vec<f64>> =
        singular.iter_mut().map(|s| s.tail_norms2(&starts, tails)).collect::<Result<_>>()?;
    for (r, &b) in b_list.iter().enumerate() {
        let bc = desc.induce_regular(b)?;
        let reg = RegularResolvent::new(sys, &bc, z)?;
        let m_r = fro_norm(&(&green.m_kernel - &reg.green.m_kernel));
        let n_r = fro_norm(&(&green.n_kernel - &reg.green.n_kernel));
        let e = eta(n, tz.alpha0, tzb.alpha0, tz.alpha_r[r], tzb.alpha_r[r], m0, n0, m_r, n_r);
        for (k, g) in gs.iter().enumerate() {
            let yr = reg.apply(g)?;
            let ys = singular[k].sequence(b + 1)?;
            let diff = HamSequence {
                start: yr.start,
                values: yr.values.iter().zip(&ys.values).map(|(p, q)| sub(q, p)).collect(),
            };
            let delta1 = weighted_norm2(sys, &diff, sys.start()..=b)?;
            let delta2 = tails_per_g[k][r];
            let g_norm2 = sequence_norm2(sys, g);
            out.push(DefectSample {
                b,
                sample: k,
                delta: delta1 + delta2,
                delta1,
                delta2,
                bound: e * g_norm2,
                eta: e,
                g_norm2,
                m_r,
                n_r,
            });
        }
    }
    Ok(out)
}

/// (δ_r, δ_r1, δ_r2) for one truncation point.
pub fn resolvent_defect(desc: &SseDescriptor, b: i64, z: C64, g: &HamSequence, tol: f64) -> Result<(f64, f64, f64)> {
    let limit = LimitOptions { tol: tol.min(1e-12), ..Default::default() };
    let tails = TailOptions { tol, ..Default::default() };
    let s = defect_study(desc, z, std::slice::from_ref(g), &[b], limit, tails)?;
    Ok((s[0].delta, s[0].delta1, s[0].delta2))
}

/// Random test vectors supported on [a, last] (deterministic in `seed`).
pub fn random_sequences(sys: &SystemCoefficients, last: i64, count: usize, seed: u64) -> Vec<HamSequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = 2 * sys.n();
    (0..count)
        .map(|_| {
            HamSequence::from_fn(sys.start(), last, |_| {
                (0..m).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Eigenvalues of a regular problem
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EigenOptions {
    /// First shift tried; the search continues with μ ∓ 1, μ ± 3, …
    /// When unset, the frame of an induced boundary condition is used (else 0).
    pub shift: Option<f64>,
    pub max_shift_tries: usize,
    /// Smallest acceptable pivot ratio of the boundary solve at the shift.
    pub min_pivot_ratio: f64,
    /// Eigenvalues θ of the compressed resolvent with |θ| ≤ theta_floor·max|θ| count as 0.
    pub theta_floor: f64,
    /// Relative resolution for multiplicities (times max(1, |λ|)).
    pub cluster_tol: f64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions { shift: None, max_shift_tries: 16, min_pivot_ratio: 1e-8, theta_floor: 1e-11, cluster_tol: 1e-8 }
    }
}

/// One weight direction: R(e)(t) = v/√ω, zero R-trace elsewhere.
#[derive(Clone, Debug)]
struct BasisElement {
    t: i64,
    v: Vec<C64>,
    omega: f64,
}

/// Orthonormal basis of L²_W on [a, b] from per-t eigenpairs of W(t).
fn weight_basis(sys: &SystemCoefficients, b: i64) -> Result<(Vec<BasisElement>, usize)> {
    let m = 2 * sys.n();
    let mut out = Vec::new();
    let mut dropped = 0;
    for t in sys.start()..=b {
        let w = sys.weight(t);
        if w.is_zero() {
            dropped += m;
            continue;
        }
        let eig = herm_eigen(&w.hermitian_part(), 1e-15)?;
        let max = eig.values.iter().cloned().fold(0.0, f64::max);
        let floor = (crate::matrix::PIVOT_FACTOR * f64::EPSILON * max).max(f64::MIN_POSITIVE);
        for (i, &om) in eig.values.iter().enumerate() {
            if om > floor {
                out.push(BasisElement { t, v: eig.vectors.column(i), omega: om });
            } else {
                dropped += 1;
            }
        }
    }
    Ok((out, dropped))
}

/// Compressed resolvent S_ij = ⟨(μI − H)⁻¹ e_j, e_i⟩.
fn compressed_resolvent(res: &RegularResolvent, basis: &[BasisElement]) -> Result<CMat> {
    let sys = &res.sys;
    let n = sys.n();
    let m2 = 2 * n;
    let k = basis.len();
    let j = CMat::j(n);
    // h_j = J R(Φ)*(t_j, z̄) f_j with f_j = √ω_j v_j
    let mut h = CMat::zeros(m2, k);
    for (c, e) in basis.iter().enumerate() {
        let f: Vec<C64> = e.v.iter().map(|x| x * e.omega.sqrt()).collect();
        let col = j.mat_vec(&res.r_phi_bar[res.idx(e.t)].adjoint().mat_vec(&f));
        h.set_column(c, &col);
    }
    // y_j(a) = (P − K)⁻¹ K h_j
    let ya = res.lu.solve(&res.green.k.matmul(&h))?;
    let mut s = CMat::zeros(k, k);
    for (i, ei) in basis.iter().enumerate() {
        let ti = ei.t;
        let phi_next = &res.phi[res.idx(ti + 1)];
        let phi_now = &res.phi[res.idx(ti)];
        let top = phi_next.block(0, 0, n, m2);
        let bot = phi_now.block(n, 0, n, m2);
        let top_c = top.matmul(&ya);
        let bot_c = bot.matmul(&ya);
        let top_h = top.matmul(&h);
        let bot_h = bot.matmul(&h);
        let wv: Vec<C64> = ei.v.iter().map(|x| x * ei.omega.sqrt()).collect();
        for (c, ej) in basis.iter().enumerate() {
            let mut r = vec![ZERO; m2];
            for q in 0..n {
                r[q] = top_c[(q, c)];
                r[n + q] = bot_c[(q, c)];
                if ej.t <= ti {
                    r[q] += top_h[(q, c)];
                }
                if ej.t < ti {
                    r[n + q] += bot_h[(q, c)];
                }
            }
            s[(i, c)] = vdot(&wv, &r);
        }
    }
    Ok(s)
}

/// Real eigenvalues of a regular problem, indexed around 0.
#[derive(Clone, Debug, Serialize)]
pub struct EigenList {
    pub b: i64,
    /// Shift μ of the compressed resolvent (μI − H)⁻¹.
    pub mu: f64,
    /// All retained eigenvalues, ascending, repeated by multiplicity.
    pub values: Vec<f64>,
    /// λ₋₁ ≥ λ₋₂ ≥ … (closest to 0 first).
    pub negative: Vec<f64>,
    /// λ₁ ≤ λ₂ ≤ …
    pub positive: Vec<f64>,
    /// Values within the cluster resolution of 0; they get no index.
    pub near_zero: Vec<f64>,
    /// (value, multiplicity)
    pub clusters: Vec<(f64, usize)>,
    /// |θ| at or below this was treated as the zero cluster.
    pub theta_threshold: f64,
    /// Size of that zero cluster (multivalued part and unresolved far eigenvalues).
    pub discarded: usize,
    pub basis_size: usize,
    /// Weight directions that carry no mass.
    pub weight_null: usize,
    /// ‖S − S*‖ / ‖S‖
    pub hermitian_residual: f64,
    pub cluster_tol: f64,
}

impl EigenList {
    /// λ_k with the signed index convention (k ≠ 0).
    pub fn get(&self, k: i64) -> Option<f64> {
        match k {
            0 => None,
            k if k > 0 => self.positive.get(k as usize - 1).copied(),
            k => self.negative.get((-k) as usize - 1).copied(),
        }
    }

    pub fn count_in(&self, lo: f64, hi: f64) -> usize {
        self.values.iter().filter(|v| **v >= lo && **v <= hi).count()
    }
}

fn cluster(values: &[f64], tol: f64) -> Vec<(f64, usize)> {
    let mut out: Vec<(f64, usize, f64)> = Vec::new(); // (sum, count, last)
    for &v in values {
        match out.last_mut() {
            Some((sum, count, last)) if (v - *last).abs() <= tol * v.abs().max(1.0) => {
                *sum += v;
                *count += 1;
                *last = v;
            }
            _ => out.push((v, 1, v)),
        }
    }
    out.into_iter().map(|(s, c, _)| (s / c as f64, c)).collect()
}

/// Eigenvalues of the regular problem by compressing (μI − H)⁻¹ onto an
/// orthonormal basis of L²_W on [a, b] and solving one Hermitian eigenproblem.
pub fn eigenvalues_regular(sys: &SystemCoefficients, bc: &RegularBC, opts: &EigenOptions) -> Result<EigenList> {
    let b = bc.b;
    let (basis, weight_null) = weight_basis(sys, b)?;
    let start = opts.shift.or(bc.frame).unwrap_or(0.0);
    let mut chosen = None;
    for attempt in 0..opts.max_shift_tries {
        let off = if attempt == 0 {
            0.0
        } else {
            let k = attempt.div_ceil(2);
            let mag = (2 * k - 1) as f64;
            if attempt % 2 == 1 {
                -mag
            } else {
                mag
            }
        };
        let mu = start + off;
        match RegularResolvent::new(sys, bc, C64::new(mu, 0.0)) {
            Ok(r) if r.green.pivot_ratio >= opts.min_pivot_ratio => {
                chosen = Some(r);
                break;
            }
            Ok(_) | Err(Error::ZIsEigenvalue { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    let res = chosen.ok_or(Error::ShiftSearchFailed { tries: opts.max_shift_tries })?;
    let mu = res.z.re;
    let empty = |theta_threshold: f64, hermitian_residual: f64, discarded: usize| EigenList {
        b,
        mu,
        values: Vec::new(),
        negative: Vec::new(),
        positive: Vec::new(),
        near_zero: Vec::new(),
        clusters: Vec::new(),
        theta_threshold,
        discarded,
        basis_size: basis.len(),
        weight_null,
        hermitian_residual,
        cluster_tol: opts.cluster_tol,
    };
    if basis.is_empty() {
        return Ok(empty(0.0, 0.0, 0));
    }
    let s = compressed_resolvent(&res, &basis)?;
    let norm = fro_norm(&s);
    let herm_res = if norm > 0.0 { fro_norm(&(&s - &s.adjoint())) / norm } else { 0.0 };
    if herm_res > 1e-9 {
        return Err(Error::InternalConsistency(format!(
            "compressed resolvent is not Hermitian (relative residual {herm_res:.3e})"
        )));
    }
    let eig = herm_eigen(&s.hermitian_part(), 1e-15)?;
    let max = eig.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let threshold = opts.theta_floor * max;
    let mut values: Vec<f64> = eig.values.iter().filter(|th| th.abs() > threshold).map(|th| mu - 1.0 / th).collect();
    let discarded = eig.values.len() - values.len();
    values.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut list = empty(threshold, herm_res, discarded);
    list.clusters = cluster(&values, opts.cluster_tol);
    for &v in &values {
        if v.abs() <= opts.cluster_tol {
            list.near_zero.push(v);
        } else if v > 0.0 {
            list.positive.push(v);
        } else {
            list.negative.push(v);
        }
    }
    list.negative.reverse();
    list.values = values;
    Ok(list)
}

// ---------------------------------------------------------------------------
// Determinant scan
// ---------------------------------------------------------------------------

/// |det(P − QΦ(b+1, λ))| divided by the product of its row norms (one row per
/// boundary condition, so the normalization does not depend on how each
/// condition is scaled).
pub fn boundary_determinant(sys: &SystemCoefficients, bc: &RegularBC, lambda: f64) -> Result<f64> {
    let mut phi = FundamentalMatrix::new(sys, C64::new(lambda, 0.0));
    let x = &bc.p - &bc.q.matmul(&phi.at(bc.b + 1)?);
    let mut scale = 1.0;
    for r in 0..x.rows() {
        let nrm = vec_norm(x.row(r));
        if nrm == 0.0 {
            return Ok(0.0);
        }
        scale *= nrm;
    }
    Ok(crate::matrix::det(&x)?.norm() / scale)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct OracleOptions {
    pub step: f64,
    /// Refined minima above this (normalized determinant) are rejected.
    pub reject: f64,
    pub width: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions { step: 1e-3, reject: 1e-6, width: 1e-10 }
    }
}

/// Roots of the boundary determinant in [lo, hi]: grid scan plus golden-section
/// refinement of every strict local minimum.  Roots closer than a grid step
/// can be missed, and multiplicities are not reported.
pub fn eigen_oracle(
    sys: &SystemCoefficients,
    bc: &RegularBC,
    lo: f64,
    hi: f64,
    opts: &OracleOptions,
) -> Result<Vec<f64>> {
    if (sys.start()..=bc.b).all(|t| sys.weight(t).is_zero()) || hi <= lo {
        return Ok(Vec::new());
    }
    let steps = ((hi - lo) / opts.step).ceil().max(2.0) as usize;
    let h = (hi - lo) / steps as f64;
    let xs: Vec<f64> = (0..=steps).map(|i| lo + i as f64 * h).collect();
    let ds: Vec<f64> = xs.par_iter().map(|&x| boundary_determinant(sys, bc, x)).collect::<Result<_>>()?;
    let f = |x: f64| boundary_determinant(sys, bc, x);
    let mut roots = Vec::new();
    for i in 0..=steps {
        let left = if i > 0 { ds[i - 1] } else { f64::INFINITY };
        let right = if i < steps { ds[i + 1] } else { f64::INFINITY };
        let strict = ds[i] < left || ds[i] < right;
        if !(ds[i] <= left && ds[i] <= right && strict) {
            continue;
        }
        let (mut x0, mut x1) = (xs[i] - h, xs[i] + h);
        let gr = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = x1 - gr * (x1 - x0);
        let mut d = x0 + gr * (x1 - x0);
        let (mut fc, mut fd) = (f(c)?, f(d)?);
        // The bracket cannot shrink below the float spacing near x.
        let width = opts.width.max(8.0 * f64::EPSILON * xs[i].abs());
        while x1 - x0 > width {
            if fc < fd {
                x1 = d;
                d = c;
                fd = fc;
                c = x1 - gr * (x1 - x0);
                fc = f(c)?;
            } else {
                x0 = c;
                c = d;
                fc = fd;
                d = x0 + gr * (x1 - x0);
                fd = f(d)?;
            }
        }
        let x = 0.5 * (x0 + x1);
        if x >= lo - h
            && x <= hi + h
            && f(x)? <= opts.reject
            && roots.last().is_none_or(|r: &f64| (x - r).abs() > 2.0 * width)
        {
            roots.push(x);
        }
    }
    Ok(roots)
}

/// Determinant root nearest to each of `values`, searched in a window of half
/// the distance to the neighbouring distinct values.  Unlike a global scan
/// this stays affordable when the values spread over many orders of magnitude.
pub fn oracle_near(
    sys: &SystemCoefficients,
    bc: &RegularBC,
    values: &[f64],
    opts: &OracleOptions,
) -> Result<Vec<Option<f64>>> {
    let distinct: Vec<f64> = cluster(values, 1e-8).into_iter().map(|(v, _)| v).collect();
    let found: Vec<Option<f64>> = distinct
        .par_iter()
        .enumerate()
        .map(|(i, &v)| {
            let scale = v.abs().max(1.0);
            let left = if i > 0 { v - distinct[i - 1] } else { f64::INFINITY };
            let right = if i + 1 < distinct.len() { distinct[i + 1] - v } else { f64::INFINITY };
            let mut h = 0.5 * left.min(right);
            if !h.is_finite() {
                h = 0.1 * scale;
            }
            let h = h.max(1e-6 * scale);
            let o = OracleOptions { step: h / 16.0, ..*opts };
            let roots = eigen_oracle(sys, bc, v - h, v + h, &o)?;
            Ok(roots.into_iter().min_by(|x, y| (x - v).abs().total_cmp(&(y - v).abs())))
        })
        .collect::<Result<_>>()?;
    Ok(values
        .iter()
        .map(|v| {
            let i = distinct
                .iter()
                .enumerate()
                .min_by(|x, y| (x.1 - v).abs().total_cmp(&(y.1 - v).abs()))
                .map(|(i, _)| i)?;
            found[i]
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Error bounds
// ---------------------------------------------------------------------------

/// The a-priori bound |μ_k^{(r)} − μ_k| ≤ e_r for μ = −1/λ (limit-circle case).
#[derive(Clone, Debug, Serialize)]
pub struct ErrorBound {
    pub b: Vec<i64>,
    pub e: Vec<f64>,
    pub eps: Vec<f64>,
    pub alpha0: f64,
    pub m0: f64,
    pub n0: f64,
    /// ‖E(a)‖² + ‖E(a)B(a)‖² + n
    pub initial_factor: f64,
    /// Constant multiplying ε_r^{1/2}.
    pub constant: f64,
}

/// e_r = 2√3 n α₀ [(6m₀² + 7n₀²)(‖E(a)‖² + ‖E(a)B(a)‖² + n)]^{1/2} ε_r^{1/2}.
pub fn error_bound(
    desc: &SseDescriptor,
    b_list: &[i64],
    tails: TailOptions,
    limit: LimitOptions,
) -> Result<ErrorBound> {
    if desc.kind != CaseKind::LimitCircle {
        return Err(Error::Precondition("the truncation error bound needs the limit-circle case".into()));
    }
    let framed = if desc.lambda_frame == 0.0 { desc.clone() } else { desc.reframed(0.0, limit.tol, limit.cap)? };
    let sys = framed.system();
    let n = sys.n();
    let j = CMat::j(n);
    let nm = framed.n_mat.as_ref().unwrap();
    let lhs = &framed.m - &nm.matmul(&j);
    let lu = Lu::factor(&lhs)?;
    if lu.is_singular() {
        return Err(Error::ZeroInSpectrum);
    }
    let green = green_singular_lcc(&framed, ZERO, limit)?;
    let m0 = fro_norm(&green.m_kernel);
    let n0 = fro_norm(&green.n_kernel);
    let mut phi = FundamentalMatrix::new(sys, ZERO);
    let sums = solution_tails(sys, &mut phi, &[], tails)?;
    let (d, _, _) = transfer_tails(sys, b_list, tails)?;
    let eps: Vec<f64> = d.iter().map(fro_norm).collect();
    let e_a = sys.e_matrix(sys.start())?;
    let eb = e_a.matmul(&sys.blocks(sys.start()).b);
    let initial_factor = fro_norm(&e_a).powi(2) + fro_norm(&eb).powi(2) + n as f64;
    let constant =
        2.0 * 3f64.sqrt() * n as f64 * sums.alpha0 * ((6.0 * m0 * m0 + 7.0 * n0 * n0) * initial_factor).sqrt();
    Ok(ErrorBound {
        b: b_list.to_vec(),
        e: eps.iter().map(|x| constant * x.sqrt()).collect(),
        eps,
        alpha0: sums.alpha0,
        m0,
        n0,
        initial_factor,
        constant,
    })
}

/// |λ|² e / (1 − |λ| e), or None while 1 − |λ| e ≤ 0.
pub fn eigenvalue_bound(lambda: f64, e: f64) -> Option<f64> {
    let den = 1.0 - lambda.abs() * e;
    if den > 0.0 {
        Some(lambda * lambda * e / den)
    } else {
        None
    }
}

/// (bound at λ_k^{(r)}, bound at the best available estimate of λ_k).
pub fn eigenvalue_bounds(lambda_r: f64, lambda_best: f64, e: f64) -> (Option<f64>, Option<f64>) {
    (eigenvalue_bound(lambda_r, e), eigenvalue_bound(lambda_best, e))
}

/// Σ |λ_k|⁻² over the computed eigenvalues.
pub fn hs_tail_check(list: &EigenList) -> f64 {
    list.positive.iter().chain(&list.negative).map(|l| 1.0 / (l * l)).sum()
}

// ---------------------------------------------------------------------------
// Approximation driver
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub enum Verdict {
    Converged,
    InclusionOnly,
    Unresolved,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ApproxOptions {
    pub eigen: EigenOptions,
    /// Trajectories are kept for 1 ≤ |k| ≤ max_index.
    pub max_index: usize,
    /// Successive relative gap below which a trajectory counts as converged.
    pub converge_tol: f64,
    pub tails: TailOptionsDef,
    pub limit: LimitOptions,
    /// Cross-check each run with the determinant scan.
    pub oracle: bool,
    pub oracle_opts: OracleOptions,
    /// Number of random g for the defect table (limit-circle only).
    pub defect_samples: usize,
    pub defect_z: [f64; 2],
    pub seed: u64,
    /// Global spectral shift s already applied to the system; reported values are λ + s.
    pub spectral_shift: f64,
}

/// Serializable mirror of [`TailOptions`].
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TailOptionsDef {
    pub tol: f64,
    pub cap: i64,
}

impl From<TailOptionsDef> for TailOptions {
    fn from(t: TailOptionsDef) -> Self {
        TailOptions { tol: t.tol, cap: t.cap }
    }
}

impl Default for ApproxOptions {
    fn default() -> Self {
        let t = TailOptions::default();
        ApproxOptions {
            eigen: EigenOptions::default(),
            max_index: 3,
            converge_tol: 1e-6,
            tails: TailOptionsDef { tol: t.tol, cap: t.cap },
            limit: LimitOptions::default(),
            oracle: false,
            oracle_opts: OracleOptions::default(),
            defect_samples: 0,
            defect_z: [0.0, 1.0],
            seed: 1,
            spectral_shift: 0.0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunRecord {
    pub r: usize,
    pub b: i64,
    pub eigen: Option<EigenList>,
    /// Oracle root nearest to each indexed eigenvalue, as (k, root).
    pub oracle: Vec<(i64, f64)>,
    pub hs_sum: Option<f64>,
    pub e: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrajectoryPoint {
    pub r: usize,
    pub b: i64,
    pub k: i64,
    /// λ_k^{(r)} in the original frame.
    pub lambda: f64,
    pub e: Option<f64>,
    pub bound_a: Option<f64>,
    pub bound_b: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub k: i64,
    pub points: Vec<TrajectoryPoint>,
    pub verdict: Verdict,
    /// |λ^{(R)} − λ^{(R−1)}| for the last two runs.
    pub last_gap: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ApproximationReport {
    pub kind: CaseKind,
    pub schedule: Vec<i64>,
    pub runs: Vec<RunRecord>,
    pub trajectories: Vec<Trajectory>,
    pub bound: Option<ErrorBound>,
    pub bound_error: Option<String>,
    pub defects: Vec<DefectSample>,
    pub defect_error: Option<String>,
    pub spectral_shift: f64,
    pub converge_tol: f64,
}

fn oracle_matches(
    sys: &SystemCoefficients,
    bc: &RegularBC,
    list: &EigenList,
    max_index: usize,
    opts: &OracleOptions,
) -> Result<Vec<(i64, f64)>> {
    let ks: Vec<i64> = (1..=max_index as i64).flat_map(|k| [-k, k]).filter(|k| list.get(*k).is_some()).collect();
    if ks.is_empty() {
        return Ok(Vec::new());
    }
    let vals: Vec<f64> = ks.iter().map(|k| list.get(*k).unwrap()).collect();
    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let pad = 0.05 * (hi - lo).max(lo.abs().max(hi.abs())).max(1e-3);
    let mut sorted = list.values.clone();
    sorted.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * y.abs().max(1.0));
    let gap = sorted.windows(2).map(|w| w[1] - w[0]).filter(|g| *g > 0.0).fold(f64::INFINITY, f64::min);
    let step = opts.step.min(gap / 8.0).max(1e-7);
    let o = OracleOptions { step, ..*opts };
    let roots = eigen_oracle(sys, bc, lo - pad, hi + pad, &o)?;
    Ok(ks
        .iter()
        .zip(&vals)
        .filter_map(|(k, v)| {
            roots.iter().min_by(|x, y| (*x - v).abs().partial_cmp(&(*y - v).abs()).unwrap()).map(|r| (*k, *r))
        })
        .collect())
}

/// Induced regular problems along `schedule`, their eigenvalues, trajectories
/// by signed index and, in the limit-circle case, error bounds and defects.
pub fn approximate(desc: &SseDescriptor, schedule: &[i64], opts: &ApproxOptions) -> Result<ApproximationReport> {
    if schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition("the schedule b_r must be strictly increasing".into()));
    }
    if let Some(b) = schedule.iter().find(|b| **b <= desc.t0) {
        return Err(Error::Precondition(format!(
            "truncation point {b} does not exceed the definiteness endpoint t₀ = {}",
            desc.t0
        )));
    }
    let sys = desc.system();
    let lcc = desc.kind == CaseKind::LimitCircle;
    let tails: TailOptions = opts.tails.into();
    let mut report = ApproximationReport {
        kind: desc.kind,
        schedule: schedule.to_vec(),
        runs: Vec::new(),
        trajectories: Vec::new(),
        bound: None,
        bound_error: None,
        defects: Vec::new(),
        defect_error: None,
        spectral_shift: opts.spectral_shift,
        converge_tol: opts.converge_tol,
    };
    if schedule.is_empty() {
        return Ok(report);
    }
    // Fill the shared frame caches once, before the parallel section.
    if desc.kind == CaseKind::Intermediate {
        desc.psi1_at(schedule[schedule.len() - 1] + 1)?;
    } else {
        desc.theta_at(schedule[schedule.len() - 1] + 1)?;
    }
    let (bound, runs) = rayon::join(
        || if lcc { Some(error_bound(desc, schedule, tails, opts.limit)) } else { None },
        || {
            schedule
                .par_iter()
                .enumerate()
                .map(|(r, &b)| {
                    let mut rec =
                        RunRecord { r, b, eigen: None, oracle: Vec::new(), hs_sum: None, e: None, error: None };
                    let out = desc.induce_regular(b).and_then(|bc| {
                        let list = eigenvalues_regular(sys, &bc, &opts.eigen)?;
                        let oracle = if opts.oracle {
                            oracle_matches(sys, &bc, &list, opts.max_index, &opts.oracle_opts)?
                        } else {
                            Vec::new()
                        };
                        Ok((list, oracle))
                    });
                    match out {
                        Ok((list, oracle)) => {
                            rec.hs_sum = Some(hs_tail_check(&list));
                            rec.eigen = Some(list);
                            rec.oracle = oracle;
                        }
                        Err(e) => rec.error = Some(e.to_string()),
                    }
                    rec
                })
                .collect::<Vec<_>>()
        },
    );
    let mut runs = runs;
    match bound {
        Some(Ok(bd)) => {
            for rec in runs.iter_mut() {
                rec.e = Some(bd.e[rec.r]);
            }
            report.bound = Some(bd);
        }
        Some(Err(e)) => report.bound_error = Some(e.to_string()),
        None => {}
    }
    if lcc && opts.defect_samples > 0 {
        let last = sys.start() + (schedule[0] - sys.start()).min(24);
        let gs = random_sequences(sys, last, opts.defect_samples, opts.seed);
        let z = C64::new(opts.defect_z[0], opts.defect_z[1]);
        match defect_study(desc, z, &gs, schedule, opts.limit, tails) {
            Ok(d) => report.defects = d,
            Err(e) => report.defect_error = Some(e.to_string()),
        }
    }
    // Trajectories by signed index.
    let s = opts.spectral_shift;
    for k in (1..=opts.max_index as i64).flat_map(|k| [-k, k]) {
        let available: Vec<(usize, f64)> =
            runs.iter().filter_map(|rec| rec.eigen.as_ref().and_then(|l| l.get(k)).map(|v| (rec.r, v))).collect();
        if available.is_empty() {
            continue;
        }
        let best = available.last().unwrap().1;
        let points: Vec<TrajectoryPoint> = available
            .iter()
            .map(|&(r, v)| {
                let e = runs[r].e;
                let (ba, bb) = match e {
                    Some(e) => eigenvalue_bounds(v, best, e),
                    None => (None, None),
                };
                TrajectoryPoint { r, b: schedule[r], k, lambda: v + s, e, bound_a: ba, bound_b: bb }
            })
            .collect();
        let last_gap = if points.len() >= 2 {
            let n = points.len();
            Some((points[n - 1].lambda - points[n - 2].lambda).abs())
        } else {
            None
        };
        let verdict = if !lcc {
            Verdict::InclusionOnly
        } else {
            match last_gap {
                Some(g) if g <= opts.converge_tol * (best + s).abs().max(1.0) => Verdict::Converged,
                _ => Verdict::Unresolved,
            }
        };
        report.trajectories.push(Trajectory { k, points, verdict, last_gap });
    }
    report.runs = runs;
    Ok(report)
}

/// i, the default probe point for defects.
pub const DEFAULT_Z: C64 = I;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{second_order, Profile, SecondOrderParams};

    fn dirichlet8() -> (SystemCoefficients, RegularBC) {
        let p =
            SecondOrderParams { p: Profile::Constant(1.0), q: Profile::Constant(0.0), w: Profile::Constant(1.0), a: 0 };
        (second_order(&p, "dir8"), RegularBC::dirichlet(1, 8))
    }

    #[test]
    fn clustering_merges_close_values() {
        let c = cluster(&[1.0, 1.0 + 1e-10, 2.0], 1e-8);
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].1, 2);
    }

    #[test]
    fn bound_arithmetic() {
        assert_eq!(eigenvalue_bound(3.0, 0.0), Some(0.0));
        assert!((eigenvalue_bound(1.0, 0.1).unwrap() - 0.1 / 0.9).abs() < 1e-15);
        assert_eq!(eigenvalue_bound(20.0, 0.1), None);
    }

    #[test]
    fn zero_forcing_gives_zero_solution() {
        let (sys, bc) = dirichlet8();
        let g = HamSequence::zeros(0, 9, 2);
        let y = regular_resolvent(&sys, &bc, C64::new(-1.0, 0.0), &g).unwrap();
        assert_eq!(y.max_norm(), 0.0);
    }

    #[test]
    fn basis_skips_null_directions() {
        let (sys, _) = dirichlet8();
        let (basis, null) = weight_basis(&sys, 8).unwrap();
        assert_eq!(basis.len(), 9);
        assert_eq!(null, 9);
    }
}
