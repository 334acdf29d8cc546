//! Self-adjoint extensions and the boundary conditions they induce on
//! truncated intervals [a, b].
//!
//! An extension is described by boundary matrices acting on y(a) and on the
//! boundary values at +∞ of y against a reference frame of solutions: the
//! fundamental matrix Θ(·, λ_f) in the limit-circle and limit-point cases, a
//! normalized basis Ψ of square-summable solutions in the intermediate case.
//! The boundary values at +∞ are never needed explicitly: on [a, b] they are
//! replaced by the same forms evaluated at b + 1.

use std::sync::{Arc, Mutex};

use serde::Serialize;

use crate::classify::{find_definiteness, CaseKind, ClassifyOptions};
use crate::error::{Error, Result};
use crate::matrix::{diag_skew_hermitian, fro_norm, rank, vec_norm, CMat, C64, ZERO};
use crate::model::{HamSequence, SystemCoefficients};
use crate::solution::FundamentalMatrix;

/// Relative tolerance for rank and symplectic identities of boundary data.
pub const BC_TOL: f64 = 1e-10;

// ---------------------------------------------------------------------------
// Regular boundary conditions
// ---------------------------------------------------------------------------

/// P y(a) − Q y(b+1) = 0 on [a, b].
#[derive(Clone, Debug, Serialize)]
pub struct RegularBC {
    pub b: i64,
    pub p: CMat,
    pub q: CMat,
    /// Case of the extension this was induced from, if any.
    pub parent: Option<CaseKind>,
    /// Real frame point of the parent extension; the boundary data are built
    /// from solutions at this λ, so resolvents there are best conditioned.
    pub frame: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BcReport {
    pub rank: usize,
    /// ‖PJP* − QJQ*‖
    pub symplectic_residual: f64,
    pub scale: f64,
}

impl RegularBC {
    /// Checked constructor.
    pub fn new(b: i64, p: CMat, q: CMat) -> Result<Self> {
        let bc = RegularBC { b, p, q, parent: None, frame: None };
        bc.verify()?;
        Ok(bc)
    }

    /// y₁(a) = 0 and y₁(b+1) = 0.
    pub fn dirichlet(n: usize, b: i64) -> Self {
        let mut p = CMat::zeros(2 * n, 2 * n);
        let mut q = CMat::zeros(2 * n, 2 * n);
        for i in 0..n {
            p[(i, i)] = C64::new(1.0, 0.0);
            q[(n + i, i)] = C64::new(1.0, 0.0);
        }
        RegularBC { b, p, q, parent: None, frame: None }
    }

    pub fn n(&self) -> usize {
        self.p.rows() / 2
    }

    pub fn report(&self) -> BcReport {
        let n = self.n();
        let j = CMat::j(n);
        let pjp = self.p.matmul(&j).matmul(&self.p.adjoint());
        let qjq = self.q.matmul(&j).matmul(&self.q.adjoint());
        let scale = 1.0f64.max(fro_norm(&self.p).powi(2)).max(fro_norm(&self.q).powi(2));
        BcReport {
            rank: rank(&CMat::hstack(&[&self.p, &self.q]), BC_TOL),
            symplectic_residual: fro_norm(&(&pjp - &qjq)),
            scale,
        }
    }

    /// rank(P, Q) = 2n and PJP* = QJQ*.
    pub fn verify(&self) -> Result<BcReport> {
        let n = self.n();
        if self.p.shape() != (2 * n, 2 * n) || self.q.shape() != (2 * n, 2 * n) {
            return Err(Error::InvalidBoundaryCondition("P and Q must both be 2n×2n".into()));
        }
        let r = self.report();
        if r.rank != 2 * n {
            return Err(Error::InvalidBoundaryCondition(format!("rank(P, Q) = {} ≠ {}", r.rank, 2 * n)));
        }
        if r.symplectic_residual > 1e-9 * r.scale {
            return Err(Error::InvalidBoundaryCondition(format!("‖PJP* − QJQ*‖ = {:.3e}", r.symplectic_residual)));
        }
        Ok(r)
    }
}

/// ‖P y(a) − Q y(b+1)‖.
pub fn boundary_residual(bc: &RegularBC, y: &HamSequence) -> Result<f64> {
    let ya = y.get(y.start)?;
    let yb = y.get(bc.b + 1)?;
    let d: Vec<C64> = bc.p.mat_vec(ya).iter().zip(bc.q.mat_vec(yb)).map(|(x, z)| x - z).collect();
    Ok(vec_norm(&d))
}

// ---------------------------------------------------------------------------
// Square-summable basis for the intermediate case
// ---------------------------------------------------------------------------

/// Backward step: y(t) from y(t+1) for (1.1_λ), exact inverse of `StepData::step`.
fn step_back(sys: &SystemCoefficients, lambda: C64, t: i64, y_next: &CMat) -> Result<CMat> {
    let n = sys.n();
    let bl = sys.blocks(t);
    let k = y_next.cols();
    let y1n = y_next.block(0, 0, n, k);
    let y2n = y_next.block(n, 0, n, k);
    let ima = &CMat::identity(n) - &bl.a;
    let ima_adj = ima.adjoint();
    let cz = &bl.c - &bl.w1.scale(lambda);
    let bz = &bl.b + &bl.w2.scale(lambda);
    let y2 = crate::matrix::lu_solve(&ima_adj, &(&y2n - &cz.matmul(&y1n))).map_err(|_| Error::AssumptionViolated {
        t,
        assumption: "A1",
        detail: "I − A*(t) is singular".into(),
    })?;
    let y1 = &ima.matmul(&y1n) - &bz.matmul(&y2);
    Ok(CMat::vstack(&[&y1, &y2]))
}

/// Thin QR by modified Gram–Schmidt with one reorthogonalization pass.
fn thin_qr(y: &CMat) -> (CMat, CMat) {
    let (m, k) = y.shape();
    let mut q = y.clone();
    let mut r = CMat::zeros(k, k);
    for j in 0..k {
        let mut v = q.column(j);
        for _pass in 0..2 {
            for i in 0..j {
                let qi = q.column(i);
                let h = crate::matrix::vdot(&qi, &v);
                r[(i, j)] += h;
                for (x, qv) in v.iter_mut().zip(&qi) {
                    *x -= h * qv;
                }
            }
        }
        let norm = vec_norm(&v);
        r[(j, j)] = C64::new(norm, 0.0);
        let v: Vec<C64> = if norm > 0.0 { v.iter().map(|x| x / norm).collect() } else { vec![ZERO; m] };
        q.set_column(j, &v);
    }
    (q, r)
}

/// Square-summable solutions ψ₁ … ψ_d at a real λ₀, normalized so that
/// ((ψ_i, ψ_j)(a)) = diag(Λ, 0) with Λ diagonal and invertible, plus
/// initial data of a completion ψ_{d+1} … ψ_{2n}.
///
/// The ℓ² subspace is the dominant subspace of the backward recursion, so it
/// is obtained by QR-stabilized backward iteration from a far horizon; the
/// solutions themselves are then Q(t)G(t) with G(t+1) = R(t)⁻¹G(t), which
/// never forms a growing solution explicitly.
#[derive(Clone, Debug)]
pub struct PsiBasis {
    sys: SystemCoefficients,
    pub lambda0: f64,
    pub d: usize,
    pub n: usize,
    /// Diagonal of Λ, length 2d − 2n.
    pub lam: Vec<C64>,
    /// Ψ₁(a), 2n×d.
    psi_a: CMat,
    /// ψ_{d+1}(a) … ψ_{2n}(a).
    completion: CMat,
    /// Ψ₁(t) for t = a … trusted.
    values: Vec<CMat>,
}

struct BackwardSweep {
    q: Vec<CMat>,
    g: Vec<CMat>,
}

fn backward_sweep(sys: &SystemCoefficients, lambda0: f64, d: usize, trusted: i64) -> Result<BackwardSweep> {
    let a = sys.start();
    let m = 2 * sys.n();
    let far = a + 2 * (trusted - a) + 64;
    let lam = C64::new(lambda0, 0.0);
    // Fixed, well-spread start; any subspace not deficient in the ℓ² directions works.
    let start = CMat::from_fn(m, d, |i, j| C64::new((1.0 + 0.7 * i as f64 + 1.3 * j as f64).cos(), 0.0));
    let (mut q, _) = thin_qr(&start);
    let len = (far - a) as usize;
    let mut qs = vec![CMat::zeros(0, 0); len + 1];
    let mut rs = vec![CMat::zeros(0, 0); len];
    qs[len] = q.clone();
    for t in (a..far).rev() {
        let y = step_back(sys, lam, t, &q)?;
        let (qt, rt) = thin_qr(&y);
        q = qt;
        let i = (t - a) as usize;
        qs[i] = q.clone();
        rs[i] = rt;
    }
    let keep = (trusted - a) as usize + 1;
    let mut g = Vec::with_capacity(keep);
    g.push(CMat::identity(d));
    for i in 0..keep - 1 {
        let next = crate::matrix::lu_solve(&rs[i], &g[i])?;
        g.push(next);
    }
    qs.truncate(keep);
    Ok(BackwardSweep { q: qs, g })
}

impl PsiBasis {
    pub fn build(sys: &SystemCoefficients, lambda0: f64, d: usize, trusted: i64) -> Result<Self> {
        let n = sys.n();
        if d <= n || d >= 2 * n {
            return Err(Error::Precondition(format!("a Ψ basis needs n < d < 2n (n = {n}, d = {d})")));
        }
        let a = sys.start();
        let trusted = trusted.max(a + 1);
        let sweep = backward_sweep(sys, lambda0, d, trusted)?;
        let psi_tilde_a = sweep.q[0].matmul(&sweep.g[0]);
        let mut s = psi_tilde_a.adjoint_mul(&CMat::j(n).matmul(&psi_tilde_a));
        // Entries at rounding level are exact zeros of the form; keeping them
        // would leak non-decaying components into the decaying columns.
        let floor = 1e-12 * fro_norm(&s);
        for i in 0..d {
            for k in 0..d {
                if s[(i, k)].norm() <= floor {
                    s[(i, k)] = ZERO;
                }
            }
        }
        let (u, dmat) = diag_skew_hermitian(&s, 1e-9)?;
        let lam: Vec<C64> = (0..d).map(|i| dmat[(i, i)]).take_while(|z| *z != ZERO).collect();
        if lam.len() != 2 * d - 2 * n {
            return Err(Error::InternalConsistency(format!(
                "rank of Ψ̃₁*JΨ̃₁ is {}, expected 2d − 2n = {}",
                lam.len(),
                2 * d - 2 * n
            )));
        }
        let values: Vec<CMat> = sweep.q.iter().zip(&sweep.g).map(|(q, g)| q.matmul(g).matmul(&u)).collect();
        let psi_a = values[0].clone();
        // Completion: orthonormal complement of span Ψ₁(a).
        let m = 2 * n;
        let proj = &CMat::identity(m)
            - &psi_a.matmul(&crate::matrix::inverse(&psi_a.adjoint_mul(&psi_a))?).matmul(&psi_a.adjoint());
        let mut cols: Vec<Vec<C64>> = Vec::new();
        for j in 0..m {
            if cols.len() == m - d {
                break;
            }
            let mut v = proj.column(j);
            for c in &cols {
                let h = crate::matrix::vdot(c, &v);
                for (x, y) in v.iter_mut().zip(c) {
                    *x -= h * y;
                }
            }
            let norm = vec_norm(&v);
            if norm > 1e-6 {
                cols.push(v.iter().map(|x| x / norm).collect());
            }
        }
        let mut completion = CMat::zeros(m, m - d);
        for (j, c) in cols.iter().enumerate() {
            completion.set_column(j, c);
        }
        Ok(PsiBasis { sys: sys.clone(), lambda0, d, n, lam, psi_a, completion, values })
    }

    pub fn trusted(&self) -> i64 {
        self.sys.start() + self.values.len() as i64 - 1
    }

    /// Makes Ψ₁(t) available up to `t`, recomputing the sweep on a longer range.
    pub fn ensure(&mut self, t: i64) -> Result<()> {
        if t <= self.trusted() {
            return Ok(());
        }
        let a = self.sys.start();
        let trusted = t.max(a + 2 * (self.trusted() - a));
        let sweep = backward_sweep(&self.sys, self.lambda0, self.d, trusted)?;
        // Same subspace, new basis: Ψ₁(a) = Q'(a)·X.
        let x = sweep.q[0].adjoint_mul(&self.psi_a);
        self.values = sweep.q.iter().zip(&sweep.g).map(|(q, g)| q.matmul(g).matmul(&x)).collect();
        Ok(())
    }

    /// Ψ₁(t) (2n×d).
    pub fn psi1(&mut self, t: i64) -> Result<CMat> {
        self.ensure(t)?;
        let a = self.sys.start();
        if t < a {
            return Err(Error::OutOfRange { t, start: a, end: self.trusted() });
        }
        Ok(self.values[(t - a) as usize].clone())
    }

    pub fn psi1_at_a(&self) -> &CMat {
        &self.psi_a
    }

    /// Full Ψ(a) = (ψ₁ … ψ_{2n})(a).
    pub fn full_at_a(&self) -> CMat {
        CMat::hstack(&[&self.psi_a, &self.completion])
    }

    /// Λ as a matrix.
    pub fn lambda_block(&self) -> CMat {
        CMat::diag(&self.lam)
    }

    /// ((ψ_i, ψ_j)(t))_{i,j ≤ d}.
    pub fn form_matrix(&mut self, t: i64) -> Result<CMat> {
        let p = self.psi1(t)?;
        let j = CMat::j(self.n);
        // (ψ_i, ψ_j) = ψ_j* J ψ_i, i.e. the transpose of Ψ₁* J Ψ₁.
        Ok(p.adjoint_mul(&j.matmul(&p)).transpose())
    }
}

// ---------------------------------------------------------------------------
// Extension descriptors
// ---------------------------------------------------------------------------

/// A self-adjoint extension H₁ of the minimal relation.
#[derive(Clone, Debug)]
pub struct SseDescriptor {
    pub kind: CaseKind,
    /// 2n×2n (limit-circle), n×2n (limit-point), d×2n (intermediate).
    pub m: CMat,
    /// 2n×2n (limit-circle), d×(2d − 2n) (intermediate).
    pub n_mat: Option<CMat>,
    /// n×2n right-endpoint matrix (limit-point).
    pub aux_n: Option<CMat>,
    pub lambda_frame: f64,
    /// Right end of the definiteness window; truncations must exceed it.
    pub t0: i64,
    sys: SystemCoefficients,
    theta: Arc<Mutex<FundamentalMatrix>>,
    psi: Option<Arc<Mutex<PsiBasis>>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SseReport {
    pub kind: CaseKind,
    pub rank: usize,
    /// ‖MJM* − NJN*‖ (limit-circle), ‖MJM*‖ (limit-point), ‖MJM* − NΛᵀN*‖ (intermediate).
    pub residual: f64,
    /// ‖aux_N J aux_N*‖ (limit-point only).
    pub aux_residual: Option<f64>,
}

impl SseDescriptor {
    fn base(sys: &SystemCoefficients, kind: CaseKind, m: CMat, lambda_frame: f64) -> Result<Self> {
        let t0 = find_definiteness(sys, &ClassifyOptions::default())?.t0;
        Ok(SseDescriptor {
            kind,
            m,
            n_mat: None,
            aux_n: None,
            lambda_frame,
            t0,
            sys: sys.clone(),
            theta: Arc::new(Mutex::new(FundamentalMatrix::new(sys, C64::new(lambda_frame, 0.0)))),
            psi: None,
        })
    }

    /// M y(a) = N (y, θ_j)(+∞), frame Θ(·, λ_f).
    pub fn limit_circle(sys: &SystemCoefficients, m: CMat, n: CMat, lambda_frame: f64) -> Result<Self> {
        let mut d = Self::base(sys, CaseKind::LimitCircle, m, lambda_frame)?;
        d.n_mat = Some(n);
        d.validate()?;
        Ok(d)
    }

    /// M y(a) = 0; `aux_n` defaults to M.
    pub fn limit_point(sys: &SystemCoefficients, m: CMat, aux_n: Option<CMat>, lambda_frame: f64) -> Result<Self> {
        let mut d = Self::base(sys, CaseKind::LimitPoint, m.clone(), lambda_frame)?;
        d.aux_n = Some(aux_n.unwrap_or(m));
        d.validate()?;
        Ok(d)
    }

    /// M y(a) = N ((y, ψ_i)(+∞))_{i ≤ 2d−2n}.
    pub fn intermediate(sys: &SystemCoefficients, m: CMat, n: CMat, psi: PsiBasis) -> Result<Self> {
        let mut d = Self::base(sys, CaseKind::Intermediate, m, psi.lambda0)?;
        d.n_mat = Some(n);
        d.psi = Some(Arc::new(Mutex::new(psi)));
        d.validate()?;
        Ok(d)
    }

    /// The intermediate extension with M = Ψ₁*(a)J* and N = [I; 0].
    pub fn intermediate_natural(sys: &SystemCoefficients, psi: PsiBasis) -> Result<Self> {
        let n = sys.n();
        let d = psi.d;
        let m = psi.psi1_at_a().adjoint_mul(&CMat::j(n).adjoint());
        let k = 2 * d - 2 * n;
        let mut nm = CMat::zeros(d, k);
        for i in 0..k {
            nm[(i, i)] = C64::new(1.0, 0.0);
        }
        Self::intermediate(sys, m, nm, psi)
    }

    /// Recomputes t₀ with non-default definiteness options.
    pub fn with_definiteness(mut self, opts: &ClassifyOptions) -> Result<Self> {
        self.t0 = find_definiteness(&self.sys, opts)?.t0;
        Ok(self)
    }

    pub fn system(&self) -> &SystemCoefficients {
        &self.sys
    }

    pub fn n(&self) -> usize {
        self.sys.n()
    }

    /// Θ(t, λ_f).
    pub fn theta_at(&self, t: i64) -> Result<CMat> {
        self.theta.lock().expect("frame lock").at(t)
    }

    /// Ψ₁(t) (intermediate only).
    pub fn psi1_at(&self, t: i64) -> Result<CMat> {
        match &self.psi {
            Some(p) => p.lock().expect("frame lock").psi1(t),
            None => Err(Error::Precondition("descriptor has no Ψ frame".into())),
        }
    }

    pub fn psi_basis(&self) -> Option<PsiBasis> {
        self.psi.as_ref().map(|p| p.lock().expect("frame lock").clone())
    }

    /// Case-appropriate rank and symplectic conditions.
    pub fn validate(&self) -> Result<SseReport> {
        validate_sse(self)
    }

    /// Boundary condition on [a, b] induced by this extension.
    pub fn induce_regular(&self, b: i64) -> Result<RegularBC> {
        induce_regular(self, b)
    }

    /// The same extension described in the frame Θ(·, s).
    ///
    /// (y, Θ_f)(+∞) = C (y, Θ_s)(+∞) with C = lim −Θ_f*(t) J Θ_s(t) J, so N
    /// becomes N·C.  The limit is taken by horizon doubling.
    pub fn reframed(&self, s: f64, tol: f64, cap: i64) -> Result<SseDescriptor> {
        if self.kind != CaseKind::LimitCircle {
            return Err(Error::Precondition("re-framing is only defined for limit-circle extensions".into()));
        }
        if s == self.lambda_frame {
            return Ok(self.clone());
        }
        let n = self.n();
        let j = CMat::j(n);
        let mut th_s = FundamentalMatrix::new(&self.sys, C64::new(s, 0.0));
        let a = self.sys.start();
        let mut t = a + 32.max(2 * (self.t0 - a + 1));
        let eval = |t: i64, th_s: &mut FundamentalMatrix| -> Result<CMat> {
            let tf = self.theta_at(t)?;
            let ts = th_s.at(t)?;
            Ok(-&tf.adjoint_mul(&j.matmul(&ts)).matmul(&j))
        };
        let mut prev = eval(t, &mut th_s)?;
        loop {
            let next_t = a + 2 * (t - a);
            if next_t - a > cap {
                return Err(Error::TailDivergence { quantity: "frame change", horizon: t, increment: f64::NAN });
            }
            let cur = eval(next_t, &mut th_s)?;
            let inc = fro_norm(&(&cur - &prev));
            t = next_t;
            if inc <= tol * fro_norm(&cur).max(1.0) {
                let mut out = SseDescriptor::base(&self.sys, CaseKind::LimitCircle, self.m.clone(), s)?;
                out.n_mat = Some(self.n_mat.as_ref().unwrap().matmul(&cur));
                out.validate()?;
                return Ok(out);
            }
            prev = cur;
        }
    }
}

pub fn validate_sse(desc: &SseDescriptor) -> Result<SseReport> {
    let n = desc.n();
    let j = CMat::j(n);
    let form = |x: &CMat| x.matmul(&j).matmul(&x.adjoint());
    match desc.kind {
        CaseKind::LimitCircle => {
            let nm = desc.n_mat.as_ref().ok_or_else(|| Error::InvalidBoundaryCondition("N is missing".into()))?;
            if desc.m.shape() != (2 * n, 2 * n) || nm.shape() != (2 * n, 2 * n) {
                return Err(Error::InvalidBoundaryCondition("limit-circle M and N must be 2n×2n".into()));
            }
            let r = rank(&CMat::hstack(&[&desc.m, nm]), BC_TOL);
            let residual = fro_norm(&(&form(&desc.m) - &form(nm)));
            let scale = 1.0f64.max(fro_norm(&desc.m).powi(2)).max(fro_norm(nm).powi(2));
            if r != 2 * n {
                return Err(Error::InvalidBoundaryCondition(format!("rank(M, N) = {r} ≠ {}", 2 * n)));
            }
            if residual > BC_TOL * scale {
                return Err(Error::InvalidBoundaryCondition(format!("‖MJM* − NJN*‖ = {residual:.3e}")));
            }
            Ok(SseReport { kind: desc.kind, rank: r, residual, aux_residual: None })
        }
        CaseKind::LimitPoint => {
            if desc.m.shape() != (n, 2 * n) {
                return Err(Error::InvalidBoundaryCondition("limit-point M must be n×2n".into()));
            }
            let r = rank(&desc.m, BC_TOL);
            let residual = fro_norm(&form(&desc.m));
            if r != n {
                return Err(Error::InvalidBoundaryCondition(format!("rank M = {r} ≠ {n}")));
            }
            if residual > BC_TOL * 1.0f64.max(fro_norm(&desc.m).powi(2)) {
                return Err(Error::InvalidBoundaryCondition(format!("‖MJM*‖ = {residual:.3e}")));
            }
            let aux = desc.aux_n.as_ref().ok_or_else(|| Error::InvalidBoundaryCondition("aux_N is missing".into()))?;
            if aux.shape() != (n, 2 * n) || rank(aux, BC_TOL) != n {
                return Err(Error::InvalidBoundaryCondition("aux_N must be n×2n of rank n".into()));
            }
            let aux_residual = fro_norm(&form(aux));
            if aux_residual > BC_TOL * 1.0f64.max(fro_norm(aux).powi(2)) {
                return Err(Error::InvalidBoundaryCondition(format!("‖aux_N J aux_N*‖ = {aux_residual:.3e}")));
            }
            Ok(SseReport { kind: desc.kind, rank: r, residual, aux_residual: Some(aux_residual) })
        }
        CaseKind::Intermediate => {
            let psi = desc.psi_basis().ok_or_else(|| Error::InvalidBoundaryCondition("Ψ frame is missing".into()))?;
            let d = psi.d;
            let nm = desc.n_mat.as_ref().ok_or_else(|| Error::InvalidBoundaryCondition("N is missing".into()))?;
            if desc.m.shape() != (d, 2 * n) || nm.shape() != (d, 2 * d - 2 * n) {
                return Err(Error::InvalidBoundaryCondition(format!(
                    "intermediate M must be {d}×{} and N {d}×{}",
                    2 * n,
                    2 * d - 2 * n
                )));
            }
            let r = rank(&CMat::hstack(&[&desc.m, nm]), BC_TOL);
            let rhs = nm.matmul(&psi.lambda_block().transpose()).matmul(&nm.adjoint());
            let residual = fro_norm(&(&form(&desc.m) - &rhs));
            let scale = 1.0f64.max(fro_norm(&desc.m).powi(2)).max(fro_norm(nm).powi(2));
            if r != d {
                return Err(Error::InvalidBoundaryCondition(format!("rank(M, N) = {r} ≠ d = {d}")));
            }
            if residual > BC_TOL * scale {
                return Err(Error::InvalidBoundaryCondition(format!("‖MJM* − NΛᵀN*‖ = {residual:.3e}")));
            }
            Ok(SseReport { kind: desc.kind, rank: r, residual, aux_residual: None })
        }
    }
}

/// (P, Q) on [a, b] for the induced regular extension.
pub fn induce_regular(desc: &SseDescriptor, b: i64) -> Result<RegularBC> {
    if b <= desc.t0 {
        return Err(Error::Precondition(format!(
            "truncation point b = {b} must exceed the definiteness endpoint t₀ = {}",
            desc.t0
        )));
    }
    let n = desc.n();
    let j = CMat::j(n);
    let (p, q) = match desc.kind {
        CaseKind::LimitCircle => {
            let th = desc.theta_at(b + 1)?;
            let q = desc.n_mat.as_ref().unwrap().matmul(&th.adjoint()).matmul(&j);
            (desc.m.clone(), q)
        }
        CaseKind::LimitPoint => {
            let th = desc.theta_at(b + 1)?;
            let p = CMat::vstack(&[&desc.m, &CMat::zeros(n, 2 * n)]);
            let sel = CMat::vstack(&[&CMat::zeros(n, 2 * n), desc.aux_n.as_ref().unwrap()]);
            let q = -&sel.matmul(&th.adjoint()).matmul(&j);
            (p, q)
        }
        CaseKind::Intermediate => {
            let psi1 = desc.psi1_at(b + 1)?;
            let d = psi1.cols();
            let k = 2 * d - 2 * n;
            let nm = desc.n_mat.as_ref().unwrap();
            // [N 0; 0 I_{2n−d}] acting on the first d rows of Ψ*(b+1)J.
            let mut x = CMat::zeros(2 * n, d);
            x.set_block(0, 0, nm);
            for i in 0..2 * n - d {
                x[(d + i, k + i)] = C64::new(1.0, 0.0);
            }
            let p = CMat::vstack(&[&desc.m, &CMat::zeros(2 * n - d, 2 * n)]);
            let mut q = x.matmul(&psi1.adjoint()).matmul(&j);
            // Rows (y, ψ_i)(b+1) = 0 for decaying ψ_i are tiny but carry no P
            // part, so rescaling them gives the same condition.
            for i in d..2 * n {
                let norm = vec_norm(q.row(i));
                if norm > 0.0 {
                    for c in 0..2 * n {
                        q[(i, c)] /= norm;
                    }
                }
            }
            (p, q)
        }
    };
    let bc = RegularBC { b, p, q, parent: Some(desc.kind), frame: Some(desc.lambda_frame) };
    bc.verify()?;
    Ok(bc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ex_lcc, ex_lpc, zero_system};
    use crate::solution::StepData;

    #[test]
    fn lcc_identity_data_is_valid() {
        let sys = ex_lcc();
        let d = SseDescriptor::limit_circle(&sys, CMat::identity(2), CMat::identity(2), 0.0).unwrap();
        assert_eq!(d.validate().unwrap().rank, 2);
    }

    #[test]
    fn lcc_with_zero_n_is_rejected() {
        let r = SseDescriptor::limit_circle(&ex_lcc(), CMat::identity(2), CMat::zeros(2, 2), 0.0);
        assert!(matches!(r, Err(Error::InvalidBoundaryCondition(_))));
    }

    #[test]
    fn lpc_dirichlet_is_valid() {
        let m = CMat::from_real(&[&[1.0, 0.0]]);
        let d = SseDescriptor::limit_point(&ex_lpc(), m, None, 0.0).unwrap();
        let bc = d.induce_regular(20).unwrap();
        assert_eq!(bc.report().rank, 2);
    }

    #[test]
    fn identity_frame_gives_q_equal_j() {
        // Zero coefficients: Θ ≡ I, so Q = J.  A weight is needed for a definiteness window.
        let sys = crate::model::SystemCoefficients::new(1, 0, crate::model::TailTag::Unknown, "w-only", |t| {
            let mut bl = crate::model::Blocks::zeros(1);
            if t == 0 {
                bl.w1 = crate::model::scalar_block(1.0);
                bl.w2 = crate::model::scalar_block(1.0);
            }
            bl
        });
        let d = SseDescriptor::limit_circle(&sys, CMat::identity(2), CMat::identity(2), 0.0).unwrap();
        let bc = d.induce_regular(5).unwrap();
        assert_eq!(bc.p, CMat::identity(2));
        assert_eq!(bc.q, CMat::j(1));
        let _ = zero_system(1, 0);
    }

    #[test]
    fn truncation_must_pass_window() {
        let d = SseDescriptor::limit_circle(&ex_lcc(), CMat::identity(2), CMat::identity(2), 0.0).unwrap();
        assert!(matches!(d.induce_regular(d.t0), Err(Error::Precondition(_))));
    }

    #[test]
    fn dirichlet_bc_invariants() {
        let bc = RegularBC::dirichlet(1, 8);
        bc.verify().unwrap();
        let y = HamSequence::zeros(0, 9, 2);
        assert_eq!(boundary_residual(&bc, &y).unwrap(), 0.0);
    }

    #[test]
    fn qr_reconstructs() {
        let y = CMat::from_fn(4, 2, |i, j| C64::new((i + 2 * j) as f64, 1.0 - j as f64));
        let (q, r) = thin_qr(&y);
        assert!(fro_norm(&(&q.matmul(&r) - &y)) < 1e-12);
        assert!(fro_norm(&(&q.adjoint_mul(&q) - &CMat::identity(2))) < 1e-14);
    }

    #[test]
    fn backward_step_inverts_forward() {
        let sys = ex_lcc();
        let y = CMat::from_fn(2, 2, |i, j| C64::new(1.0 + i as f64, j as f64 - 0.5));
        let lam = C64::new(0.4, 0.0);
        let fwd = StepData::new(&sys, 3).unwrap().step_matrix(lam, &y);
        let back = step_back(&sys, lam, 3, &fwd).unwrap();
        assert!(fro_norm(&(&back - &y)) < 1e-14);
    }
}
