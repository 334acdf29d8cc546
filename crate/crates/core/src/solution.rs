//! Initial value problems, fundamental matrices and weighted sums.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::{fro_norm, vdot, vec_norm, CMat, C64, ONE, ZERO};
use crate::model::{apply_l, apply_r, HamSequence, SystemCoefficients};

/// Above this column norm the fundamental matrix rescales and keeps a log factor.
const RESCALE_AT: f64 = 1e150;

/// Coefficients at one t, with (I − A)⁻¹ already formed.
#[derive(Clone, Debug)]
pub struct StepData {
    pub t: i64,
    n: usize,
    e: CMat,
    b: CMat,
    c: CMat,
    i_minus_a_adj: CMat,
    w1: CMat,
    w2: CMat,
}

impl StepData {
    pub fn new(sys: &SystemCoefficients, t: i64) -> Result<Self> {
        let n = sys.n();
        let bl = sys.blocks(t);
        let e = sys.e_matrix(t)?;
        Ok(StepData {
            t,
            n,
            e,
            i_minus_a_adj: &CMat::identity(n) - &bl.a.adjoint(),
            b: bl.b,
            c: bl.c,
            w1: bl.w1,
            w2: bl.w2,
        })
    }

    /// y(t) ↦ y(t+1) for (1.1_λ).
    pub fn step(&self, lambda: C64, y: &[C64]) -> Vec<C64> {
        self.step_forced(lambda, y, None)
    }

    /// One step of J Δy = (P + zW) R(y) − f, f = (f₁, f₂).
    pub fn step_forced(&self, z: C64, y: &[C64], f: Option<&[C64]>) -> Vec<C64> {
        let n = self.n;
        let (y1, y2) = y.split_at(n);
        let bz = &self.b + &self.w2.scale(z);
        let cz = &self.c - &self.w1.scale(z);
        let mut rhs: Vec<C64> = y1.iter().zip(bz.mat_vec(y2)).map(|(a, b)| a + b).collect();
        if let Some(f) = f {
            for (r, fi) in rhs.iter_mut().zip(&f[n..]) {
                *r -= fi;
            }
        }
        let y1n = self.e.mat_vec(&rhs);
        let mut y2n: Vec<C64> =
            self.i_minus_a_adj.mat_vec(y2).into_iter().zip(cz.mat_vec(&y1n)).map(|(a, b)| a + b).collect();
        if let Some(f) = f {
            for (r, fi) in y2n.iter_mut().zip(&f[..n]) {
                *r += fi;
            }
        }
        y1n.into_iter().chain(y2n).collect()
    }

    /// Column-wise step of a 2n×k matrix of initial data.
    pub fn step_matrix(&self, lambda: C64, y: &CMat) -> CMat {
        let n = self.n;
        let k = y.cols();
        let y1 = y.block(0, 0, n, k);
        let y2 = y.block(n, 0, n, k);
        let bz = &self.b + &self.w2.scale(lambda);
        let cz = &self.c - &self.w1.scale(lambda);
        let y1n = self.e.matmul(&(&y1 + &bz.matmul(&y2)));
        let y2n = &self.i_minus_a_adj.matmul(&y2) + &cz.matmul(&y1n);
        CMat::vstack(&[&y1n, &y2n])
    }
}

/// y(t+1) from y(t) for (1.1_λ).
pub fn step(sys: &SystemCoefficients, lambda: C64, y: &[C64], t: i64) -> Result<Vec<C64>> {
    check_dim(sys, y.len())?;
    Ok(StepData::new(sys, t)?.step(lambda, y))
}

/// y(t+1) for L(y) = W R(z y) − f at t, where f = W(t)R(g)(t).
pub fn step_forced(sys: &SystemCoefficients, z: C64, y: &[C64], f: &[C64], t: i64) -> Result<Vec<C64>> {
    check_dim(sys, y.len())?;
    Ok(StepData::new(sys, t)?.step_forced(z, y, Some(f)))
}

fn check_dim(sys: &SystemCoefficients, len: usize) -> Result<()> {
    if len != 2 * sys.n() {
        return Err(Error::Dimension(format!("vector of length {len}, system needs {}", 2 * sys.n())));
    }
    Ok(())
}

/// The solution of (1.1_λ) with y(a) = y0, on [a, end].
pub fn solve_ivp(sys: &SystemCoefficients, lambda: C64, y0: &[C64], end: i64) -> Result<HamSequence> {
    check_dim(sys, y0.len())?;
    let mut values = vec![y0.to_vec()];
    for t in sys.start()..end {
        let next = StepData::new(sys, t)?.step(lambda, values.last().unwrap());
        values.push(next);
    }
    Ok(HamSequence { start: sys.start(), values })
}

// ---------------------------------------------------------------------------
// Fundamental matrix
// ---------------------------------------------------------------------------

/// Φ(t, λ) with Φ(a, λ) = I, cached for t = a … horizon.
///
/// Stored values may be column-rescaled: Φ(t) = stored(t)·diag(exp(log_scale(t))).
#[derive(Clone, Debug)]
pub struct FundamentalMatrix {
    sys: SystemCoefficients,
    lambda: C64,
    values: Vec<CMat>,
    log_scales: Vec<Vec<f64>>,
}

impl FundamentalMatrix {
    pub fn new(sys: &SystemCoefficients, lambda: C64) -> Self {
        let m = 2 * sys.n();
        FundamentalMatrix { sys: sys.clone(), lambda, values: vec![CMat::identity(m)], log_scales: vec![vec![0.0; m]] }
    }

    pub fn lambda(&self) -> C64 {
        self.lambda
    }

    pub fn system(&self) -> &SystemCoefficients {
        &self.sys
    }

    pub fn start(&self) -> i64 {
        self.sys.start()
    }

    pub fn horizon(&self) -> i64 {
        self.start() + self.values.len() as i64 - 1
    }

    pub fn extend_to(&mut self, horizon: i64) -> Result<()> {
        while self.horizon() < horizon {
            let t = self.horizon();
            let data = StepData::new(&self.sys, t)?;
            let mut next = data.step_matrix(self.lambda, self.values.last().unwrap());
            let mut scales = self.log_scales.last().unwrap().clone();
            for (j, scale) in scales.iter_mut().enumerate() {
                let norm = vec_norm(&next.column(j));
                if norm > RESCALE_AT {
                    let col: Vec<C64> = next.column(j).iter().map(|z| z / norm).collect();
                    next.set_column(j, &col);
                    *scale += norm.ln();
                }
            }
            if !next.is_finite() {
                return Err(Error::InternalConsistency(format!("fundamental matrix overflowed at t = {}", t + 1)));
            }
            self.values.push(next);
            self.log_scales.push(scales);
        }
        Ok(())
    }

    fn index(&self, t: i64) -> Result<usize> {
        if t < self.start() {
            return Err(Error::OutOfRange { t, start: self.start(), end: self.horizon() });
        }
        Ok((t - self.start()) as usize)
    }

    /// Φ(t, λ), extending the cache if needed.
    pub fn at(&mut self, t: i64) -> Result<CMat> {
        self.extend_to(t)?;
        self.get(t)
    }

    /// Φ(t, λ) from the cache only.
    pub fn get(&self, t: i64) -> Result<CMat> {
        let i = self.index(t)?;
        let v = self.values.get(i).ok_or(Error::OutOfRange { t, start: self.start(), end: self.horizon() })?;
        let s = &self.log_scales[i];
        if s.iter().all(|x| *x == 0.0) {
            return Ok(v.clone());
        }
        let mut out = v.clone();
        for (j, log_scale) in s.iter().enumerate() {
            let f = log_scale.exp();
            let col: Vec<C64> = out.column(j).iter().map(|z| z * f).collect();
            out.set_column(j, &col);
        }
        Ok(out)
    }

    /// Stored (possibly rescaled) value and its per-column log factors.
    pub fn scaled(&self, t: i64) -> Result<(&CMat, &[f64])> {
        let i = self.index(t)?;
        match self.values.get(i) {
            Some(v) => Ok((v, &self.log_scales[i])),
            None => Err(Error::OutOfRange { t, start: self.start(), end: self.horizon() }),
        }
    }

    pub fn is_rescaled(&self) -> bool {
        self.log_scales.last().unwrap().iter().any(|s| *s != 0.0)
    }

    /// R(Φ)(t) = [Φ₁(t+1); Φ₂(t)] (top rows at t+1, bottom rows at t).
    pub fn r_trace(&mut self, t: i64) -> Result<CMat> {
        self.extend_to(t + 1)?;
        let n = self.sys.n();
        let now = self.get(t)?;
        let next = self.get(t + 1)?;
        let mut r = now;
        for i in 0..n {
            for j in 0..2 * n {
                r[(i, j)] = next[(i, j)];
            }
        }
        Ok(r)
    }

    /// Column j as a sequence on [a, end].
    pub fn column(&mut self, j: usize, end: i64) -> Result<HamSequence> {
        self.extend_to(end)?;
        let values = (self.start()..=end).map(|t| self.get(t).map(|m| m.column(j))).collect::<Result<_>>()?;
        Ok(HamSequence { start: self.start(), values })
    }
}

/// Φ(·, λ) up to `horizon`.
pub fn fundamental(sys: &SystemCoefficients, lambda: C64, horizon: i64) -> Result<FundamentalMatrix> {
    if horizon < sys.start() {
        return Err(Error::OutOfRange { t: horizon, start: sys.start(), end: i64::MAX });
    }
    let mut phi = FundamentalMatrix::new(sys, lambda);
    phi.extend_to(horizon)?;
    Ok(phi)
}

// ---------------------------------------------------------------------------
// Forms
// ---------------------------------------------------------------------------

/// ⟨x, y⟩ = Σ_{t ∈ range} R(y)*(t) W(t) R(x)(t).
pub fn weighted_inner(
    sys: &SystemCoefficients,
    x: &HamSequence,
    y: &HamSequence,
    range: std::ops::RangeInclusive<i64>,
) -> Result<C64> {
    let mut s = ZERO;
    for t in range {
        let rx = apply_r(x, t)?;
        let ry = apply_r(y, t)?;
        s += vdot(&ry, &sys.weight(t).mat_vec(&rx));
    }
    Ok(s)
}

/// (x, y)(t) = y*(t) J x(t).
pub fn bform(x: &HamSequence, y: &HamSequence, t: i64) -> Result<C64> {
    let xv = x.get(t)?;
    let yv = y.get(t)?;
    Ok(bform_vec(xv, yv))
}

pub fn bform_vec(x: &[C64], y: &[C64]) -> C64 {
    let n = x.len() / 2;
    // J x = (−x₂, x₁)
    let jx: Vec<C64> = x[n..].iter().map(|z| -z).chain(x[..n].iter().copied()).collect();
    vdot(y, &jx)
}

/// Mismatch in the Lagrange identity
///   Σ_{t=s}^{k} [R(y)* L(x) − L(y)* R(x)](t) = (x, y)(k+1) − (x, y)(s),
/// for L(x) = W R(f), L(y) = W R(g).  Both premises are checked first.
pub fn lagrange_residual(
    sys: &SystemCoefficients,
    x: &HamSequence,
    f: &HamSequence,
    y: &HamSequence,
    g: &HamSequence,
    s: i64,
    k: i64,
) -> Result<f64> {
    let mut lhs = ZERO;
    let mut scale = 0.0f64;
    for t in s..=k {
        let lx = apply_l(sys, x, t)?;
        let ly = apply_l(sys, y, t)?;
        let w = sys.weight(t);
        let wf = w.mat_vec(&apply_r(f, t)?);
        let wg = w.mat_vec(&apply_r(g, t)?);
        let rx = apply_r(x, t)?;
        let ry = apply_r(y, t)?;
        let px = vec_norm(&lx).max(vec_norm(&wf)).max(vec_norm(&rx));
        let py = vec_norm(&ly).max(vec_norm(&wg)).max(vec_norm(&ry));
        let rel = |a: &[C64], b: &[C64], sc: f64| {
            let d: Vec<C64> = a.iter().zip(b).map(|(p, q)| p - q).collect();
            vec_norm(&d) / sc.max(1.0)
        };
        let (ex, ey) = (rel(&lx, &wf, px), rel(&ly, &wg, py));
        if ex > 1e-8 || ey > 1e-8 {
            return Err(Error::Precondition(format!(
                "L(x) = WR(f) / L(y) = WR(g) fail at t = {t} (relative residuals {ex:.3e}, {ey:.3e})"
            )));
        }
        scale = scale.max(px * vec_norm(&ry)).max(py * vec_norm(&rx));
        lhs += vdot(&ry, &lx) - vdot(&ly, &rx);
    }
    let rhs = bform(x, y, k + 1)? - bform(x, y, s)?;
    Ok((lhs - rhs).norm())
}

/// U(t) with R(y)(t+1) = U(t) R(y)(t) for solutions of (1.1₀).
pub fn transfer_u(sys: &SystemCoefficients, t: i64) -> Result<CMat> {
    let n = sys.n();
    let now = sys.blocks(t);
    let next = sys.blocks(t + 1);
    let e1 = sys.e_matrix(t + 1)?;
    let ima = &CMat::identity(n) - &now.a.adjoint();
    let e1b1 = e1.matmul(&next.b);
    let top_left = &e1 + &e1b1.matmul(&now.c);
    let top_right = e1b1.matmul(&ima);
    let mut u = CMat::zeros(2 * n, 2 * n);
    u.set_block(0, 0, &top_left);
    u.set_block(0, n, &top_right);
    u.set_block(n, 0, &now.c);
    u.set_block(n, n, &ima);
    Ok(u)
}

/// R(y)(a) = [[E(a), E(a)B(a)], [0, I]] y(a) for solutions of (1.1₀).
pub fn initial_r_map(sys: &SystemCoefficients) -> Result<CMat> {
    let n = sys.n();
    let a = sys.start();
    let e = sys.e_matrix(a)?;
    let eb = e.matmul(&sys.blocks(a).b);
    let mut m = CMat::zeros(2 * n, 2 * n);
    m.set_block(0, 0, &e);
    m.set_block(0, n, &eb);
    m.set_block(n, n, &CMat::identity(n));
    Ok(m)
}

// ---------------------------------------------------------------------------
// Tail sums
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, Serialize)]
pub struct TailOptions {
    /// Relative Cauchy tolerance on the last doubled window.
    pub tol: f64,
    /// Hard limit on the horizon, measured in steps from a.
    pub cap: i64,
}

impl Default for TailOptions {
    fn default() -> Self {
        TailOptions { tol: 1e-11, cap: 1 << 18 }
    }
}

/// Σ_{t ≥ start_k} term(t) for several starts, by horizon doubling.
///
/// `term` is called once for each t in increasing order from the smallest
/// start.  Each tail is summed on its own (no differences of large partial
/// sums), so tiny tails keep their relative accuracy.
pub(crate) fn accumulate_tails(
    a: i64,
    starts: &[i64],
    opts: TailOptions,
    quantity: &'static str,
    mut term: impl FnMut(i64) -> Result<CMat>,
) -> Result<(Vec<CMat>, i64, f64)> {
    if starts.is_empty() {
        return Ok((Vec::new(), a, 0.0));
    }
    let first = *starts.iter().min().unwrap();
    let last = *starts.iter().max().unwrap();
    let mut sums: Vec<Option<CMat>> = vec![None; starts.len()];
    let mut t = first;
    let mut len = (2 * (last - a + 1)).max(32);
    let mut horizon = a + len - 1;
    let mut add = |t: i64, sums: &mut Vec<Option<CMat>>, window: &mut Vec<Option<CMat>>| -> Result<()> {
        let x = term(t)?;
        for (k, &s) in starts.iter().enumerate() {
            if t >= s {
                match &mut sums[k] {
                    Some(acc) => *acc += &x,
                    None => sums[k] = Some(x.clone()),
                }
                match &mut window[k] {
                    Some(acc) => *acc += &x,
                    None => window[k] = Some(x.clone()),
                }
            }
        }
        Ok(())
    };
    let mut window: Vec<Option<CMat>> = vec![None; starts.len()];
    while t <= horizon {
        add(t, &mut sums, &mut window)?;
        t += 1;
    }
    loop {
        len *= 2;
        if len > opts.cap {
            let inc = window.iter().flatten().map(fro_norm).fold(0.0, f64::max);
            return Err(Error::TailDivergence { quantity, horizon, increment: inc });
        }
        horizon = a + len - 1;
        window = vec![None; starts.len()];
        while t <= horizon {
            add(t, &mut sums, &mut window)?;
            t += 1;
        }
        let mut worst = 0.0f64;
        let mut ok = true;
        for k in 0..starts.len() {
            let inc = window[k].as_ref().map_or(0.0, fro_norm);
            let tot = sums[k].as_ref().map_or(0.0, fro_norm);
            worst = worst.max(if tot > 0.0 { inc / tot } else { 0.0 });
            if inc > opts.tol * tot.max(f64::MIN_POSITIVE) {
                ok = false;
            }
        }
        if ok {
            let dim = sums.iter().flatten().next().map(|m| m.rows()).unwrap_or(0);
            let out = sums.into_iter().map(|s| s.unwrap_or_else(|| CMat::zeros(dim, dim))).collect();
            return Ok((out, horizon, worst));
        }
    }
}

/// Σ_{t ≥ start} R(Φ)*(t) W(t) R(Φ)(t) for each start.
pub fn gram_tails(
    sys: &SystemCoefficients,
    phi: &mut FundamentalMatrix,
    starts: &[i64],
    opts: TailOptions,
) -> Result<(Vec<CMat>, i64, f64)> {
    accumulate_tails(sys.start(), starts, opts, "solution Gram", |t| {
        let r = phi.r_trace(t)?;
        Ok(r.adjoint_mul(&sys.weight(t).matmul(&r)))
    })
}

/// Tail constants of the Φ(·, z) columns and of the transfer products.
#[derive(Clone, Debug, Serialize)]
pub struct TailSums {
    /// max_i ‖φ_i‖ (a norm, not its square).
    pub alpha0: f64,
    /// max_i Σ_{t > b_r} R(φ_i)* W R(φ_i).
    pub alpha_r: Vec<f64>,
    /// ‖D_r‖ with D_r = Σ_{t ≥ b_r} V*(t) W(t+1) V(t); empty unless requested.
    pub eps_r: Vec<f64>,
    pub horizon: i64,
    /// Largest relative increment over the final window.
    pub residual: f64,
}

/// α₀ and α_r(z) of the columns of `phi`.
pub fn solution_tails(
    sys: &SystemCoefficients,
    phi: &mut FundamentalMatrix,
    b_list: &[i64],
    opts: TailOptions,
) -> Result<TailSums> {
    let mut starts = vec![sys.start()];
    starts.extend(b_list.iter().map(|b| b + 1));
    let (sums, horizon, residual) = gram_tails(sys, phi, &starts, opts)?;
    let max_diag = |m: &CMat| (0..m.rows()).map(|i| m[(i, i)].re).fold(0.0, f64::max);
    Ok(TailSums {
        alpha0: max_diag(&sums[0]).sqrt(),
        alpha_r: sums[1..].iter().map(max_diag).collect(),
        eps_r: Vec::new(),
        horizon,
        residual,
    })
}

/// D_r = Σ_{t ≥ b_r} V*(t) W(t+1) V(t), V(t) = U(t)⋯U(a).
pub fn transfer_tails(sys: &SystemCoefficients, b_list: &[i64], opts: TailOptions) -> Result<(Vec<CMat>, i64, f64)> {
    let a = sys.start();
    let mut v = CMat::identity(2 * sys.n());
    let mut at = a - 1; // v = V(at)
    accumulate_tails(a, b_list, opts, "transfer tail D_r", |t| {
        while at < t {
            at += 1;
            v = transfer_u(sys, at)?.matmul(&v);
        }
        Ok(v.adjoint_mul(&sys.weight(t + 1).matmul(&v)))
    })
}

/// α₀, α_r from the columns of Φ(·, λ) and ε_r = ‖D_r‖ (λ = 0 dynamics).
pub fn tail_quantities(
    sys: &SystemCoefficients,
    phi: &mut FundamentalMatrix,
    b_list: &[i64],
    opts: TailOptions,
) -> Result<TailSums> {
    let mut sums = solution_tails(sys, phi, b_list, opts)?;
    let (d, horizon, residual) = transfer_tails(sys, b_list, opts)?;
    sums.eps_r = d.iter().map(fro_norm).collect();
    sums.horizon = sums.horizon.max(horizon);
    sums.residual = sums.residual.max(residual);
    Ok(sums)
}

/// Symplectic defect ‖Φ*(t, λ̄) J Φ(t, λ) − J‖.
pub fn symplectic_defect(phi: &CMat, phi_conj: &CMat, n: usize) -> f64 {
    let j = CMat::j(n);
    fro_norm(&(&phi_conj.adjoint_mul(&j.matmul(phi)) - &j))
}

/// Unit vector e_i in dimension m.
pub fn unit(m: usize, i: usize) -> Vec<C64> {
    (0..m).map(|k| if k == i { ONE } else { ZERO }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ex_lcc, ex_lpc, zero_system};

    #[test]
    fn zero_system_is_identity_dynamics() {
        let sys = zero_system(2, 0);
        let y = vec![C64::new(1.0, 2.0), ZERO, ONE, C64::new(-3.0, 0.0)];
        assert_eq!(step(&sys, ZERO, &y, 0).unwrap(), y);
        let mut phi = fundamental(&sys, C64::new(0.3, 1.0), 10).unwrap();
        assert_eq!(phi.at(7).unwrap(), CMat::identity(4));
        assert_eq!(transfer_u(&sys, 3).unwrap(), CMat::identity(4));
    }

    #[test]
    fn lpc_linear_growth() {
        let sys = ex_lpc();
        let y = solve_ivp(&sys, ZERO, &[ZERO, ONE], 20).unwrap();
        for t in 0..=20 {
            assert!((y.get(t).unwrap()[0] - C64::new(t as f64, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn lcc_fundamental_columns_at_zero() {
        let sys = ex_lcc();
        let mut phi = fundamental(&sys, ZERO, 30).unwrap();
        for t in 0..=30 {
            let m = phi.at(t).unwrap();
            assert!((m[(0, 0)] - ONE).norm() < 1e-12);
            assert!((m[(0, 1)] - C64::new(t as f64, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn bform_examples() {
        let x = HamSequence::new(0, vec![vec![ONE, ZERO]]).unwrap();
        let y = HamSequence::new(0, vec![vec![ZERO, ONE]]).unwrap();
        assert_eq!(bform(&x, &y, 0).unwrap(), ONE);
        let v = vec![C64::new(0.3, -1.0), C64::new(2.0, 0.5)];
        let w = bform_vec(&v, &v);
        assert!((w + w.conj()).norm() < 1e-15);
    }

    #[test]
    fn weighted_norm_of_constant_lcc_solution() {
        let sys = ex_lcc();
        let z1 = solve_ivp(&sys, ZERO, &[ONE, ZERO], 80).unwrap();
        let s = weighted_inner(&sys, &z1, &z1, 0..=78).unwrap();
        assert!((s.re - 2.0).abs() < 1e-12 && s.im == 0.0);
    }

    #[test]
    fn transfer_matches_step() {
        let sys = ex_lcc();
        let y = solve_ivp(&sys, ZERO, &[C64::new(0.4, 0.1), C64::new(-1.0, 2.0)], 12).unwrap();
        for t in 0..10 {
            let u = transfer_u(&sys, t).unwrap();
            let pred = u.mat_vec(&apply_r(&y, t).unwrap());
            let got = apply_r(&y, t + 1).unwrap();
            let d: Vec<C64> = pred.iter().zip(&got).map(|(a, b)| a - b).collect();
            assert!(vec_norm(&d) < 1e-12);
        }
        let a0 = initial_r_map(&sys).unwrap().mat_vec(y.get(0).unwrap());
        let r0 = apply_r(&y, 0).unwrap();
        assert!(vec_norm(&a0.iter().zip(&r0).map(|(a, b)| a - b).collect::<Vec<_>>()) < 1e-14);
    }

    #[test]
    fn empty_tail_beyond_support() {
        let sys = crate::model::second_order(
            &crate::model::SecondOrderParams {
                p: crate::model::Profile::Constant(1.0),
                q: crate::model::Profile::Constant(0.0),
                w: crate::model::Profile::Shaped(crate::model::Shape::Table { values: vec![1.0; 6], then: 0.0 }),
                a: 0,
            },
            "finite",
        );
        let mut phi = FundamentalMatrix::new(&sys, ZERO);
        let tails = tail_quantities(&sys, &mut phi, &[8, 12], TailOptions::default()).unwrap();
        assert_eq!(tails.alpha_r, vec![0.0, 0.0]);
        assert_eq!(tails.eps_r, vec![0.0, 0.0]);
        assert!(tails.alpha0 > 0.0);
    }
}
