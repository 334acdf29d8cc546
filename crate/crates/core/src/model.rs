//! Coefficient data of the Hamiltonian system
//!
//!   J Δy(t) = (P(t) + λ W(t)) R(y)(t),   t ≥ a,
//!
//! with P = [[−C, A*], [A, B]], W = diag(W₁, W₂) and the partial right shift
//! R(y)(t) = (y₁(t+1), y₂(t)).  Coefficients are supplied by a total function
//! of t so that infinite tails need no storage.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::matrix::{fro_norm, herm_eigen, vdot, CMat, C64, ZERO};

/// The five n×n coefficient blocks at one t.
#[derive(Clone, Debug, PartialEq)]
pub struct Blocks {
    pub a: CMat,
    pub b: CMat,
    pub c: CMat,
    pub w1: CMat,
    pub w2: CMat,
}

impl Blocks {
    pub fn zeros(n: usize) -> Self {
        let z = CMat::zeros(n, n);
        Blocks { a: z.clone(), b: z.clone(), c: z.clone(), w1: z.clone(), w2: z }
    }

    pub fn weight_is_zero(&self) -> bool {
        self.w1.is_zero() && self.w2.is_zero()
    }
}

/// What is known analytically about t ↦ W(t) for large t.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailTag {
    Unknown,
    /// W(t) = 0 for t > last.
    FiniteSupport {
        last: i64,
    },
    /// W decays like ratio^t.
    Geometric {
        ratio: f64,
    },
    /// Coefficients are eventually constant.
    Constant,
}

pub type Provider = Arc<dyn Fn(i64) -> Blocks + Send + Sync>;

/// Half-line coefficient data (n, a, t ↦ A, B, C, W₁, W₂).
#[derive(Clone)]
pub struct SystemCoefficients {
    n: usize,
    a: i64,
    provider: Provider,
    tail: TailTag,
    label: String,
}

impl fmt::Debug for SystemCoefficients {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemCoefficients")
            .field("label", &self.label)
            .field("n", &self.n)
            .field("a", &self.a)
            .field("tail", &self.tail)
            .finish()
    }
}

impl SystemCoefficients {
    pub fn new(
        n: usize,
        a: i64,
        tail: TailTag,
        label: impl Into<String>,
        provider: impl Fn(i64) -> Blocks + Send + Sync + 'static,
    ) -> Self {
        SystemCoefficients { n, a, provider: Arc::new(provider), tail, label: label.into() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn start(&self) -> i64 {
        self.a
    }

    pub fn tail(&self) -> &TailTag {
        &self.tail
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn blocks(&self, t: i64) -> Blocks {
        (self.provider)(t)
    }

    /// P(t) = [[−C, A*], [A, B]].
    pub fn p_matrix(&self, t: i64) -> CMat {
        let bl = self.blocks(t);
        let n = self.n;
        let mut p = CMat::zeros(2 * n, 2 * n);
        p.set_block(0, 0, &-&bl.c);
        p.set_block(0, n, &bl.a.adjoint());
        p.set_block(n, 0, &bl.a);
        p.set_block(n, n, &bl.b);
        p
    }

    /// W(t) = diag(W₁, W₂).
    pub fn weight(&self, t: i64) -> CMat {
        let bl = self.blocks(t);
        CMat::block_diag(&bl.w1, &bl.w2)
    }

    pub fn j(&self) -> CMat {
        CMat::j(self.n)
    }

    /// E(t) = (I − A(t))⁻¹.
    pub fn e_matrix(&self, t: i64) -> Result<CMat> {
        let bl = self.blocks(t);
        let m = &CMat::identity(self.n) - &bl.a;
        crate::matrix::inverse(&m).map_err(|_| Error::AssumptionViolated {
            t,
            assumption: "A1",
            detail: "I − A(t) is singular".into(),
        })
    }

    /// The system with λ replaced by λ + s, i.e. C − sW₁ and B + sW₂.
    pub fn shifted(&self, s: f64) -> SystemCoefficients {
        if s == 0.0 {
            return self.clone();
        }
        let inner = self.provider.clone();
        let sc = C64::new(s, 0.0);
        SystemCoefficients {
            n: self.n,
            a: self.a,
            tail: self.tail.clone(),
            label: format!("{} (shift {s})", self.label),
            provider: Arc::new(move |t| {
                let mut bl = inner(t);
                bl.c = &bl.c - &bl.w1.scale(sc);
                bl.b = &bl.b + &bl.w2.scale(sc);
                bl
            }),
        }
    }

    /// Block-diagonal sum: y = (y₁ˢ, y₁ᵒ, y₂ˢ, y₂ᵒ).
    pub fn direct_sum(&self, other: &SystemCoefficients) -> Result<SystemCoefficients> {
        if self.a != other.a {
            return Err(Error::MalformedParams(format!(
                "direct sum needs a common start (got {} and {})",
                self.a, other.a
            )));
        }
        let (p, q) = (self.provider.clone(), other.provider.clone());
        let tail = match (&self.tail, &other.tail) {
            (TailTag::FiniteSupport { last: l1 }, TailTag::FiniteSupport { last: l2 }) => {
                TailTag::FiniteSupport { last: (*l1).max(*l2) }
            }
            (x, y) if x == y => x.clone(),
            _ => TailTag::Unknown,
        };
        Ok(SystemCoefficients {
            n: self.n + other.n,
            a: self.a,
            tail,
            label: format!("{} ⊕ {}", self.label, other.label),
            provider: Arc::new(move |t| {
                let (x, y) = (p(t), q(t));
                Blocks {
                    a: CMat::block_diag(&x.a, &y.a),
                    b: CMat::block_diag(&x.b, &y.b),
                    c: CMat::block_diag(&x.c, &y.c),
                    w1: CMat::block_diag(&x.w1, &y.w1),
                    w2: CMat::block_diag(&x.w2, &y.w2),
                }
            }),
        })
    }

    /// Checks Hermitian B, C, semidefinite W₁, W₂ and invertible I − A on `range`.
    pub fn validate(&self, range: std::ops::RangeInclusive<i64>, tol: f64) -> Result<ValidationReport> {
        if *range.start() < self.a {
            return Err(Error::OutOfRange { t: *range.start(), start: self.a, end: i64::MAX });
        }
        let n = self.n;
        let mut rows = Vec::new();
        for t in range {
            let bl = self.blocks(t);
            for (name, m) in [("A", &bl.a), ("B", &bl.b), ("C", &bl.c), ("W1", &bl.w1), ("W2", &bl.w2)] {
                if m.shape() != (n, n) || !m.is_finite() {
                    return Err(Error::AssumptionViolated {
                        t,
                        assumption: "coefficients",
                        detail: format!("{name} is not a finite {n}×{n} matrix"),
                    });
                }
            }
            let herm = |m: &CMat| fro_norm(&(m - &m.adjoint()));
            let herm_b = herm(&bl.b);
            let herm_c = herm(&bl.c);
            let scale_bc = 1.0f64.max(fro_norm(&bl.b)).max(fro_norm(&bl.c));
            if herm_b > tol * scale_bc || herm_c > tol * scale_bc {
                return Err(Error::AssumptionViolated {
                    t,
                    assumption: "Hermitian P",
                    detail: format!("‖B − B*‖ = {herm_b:.3e}, ‖C − C*‖ = {herm_c:.3e}"),
                });
            }
            let min_eig = |m: &CMat| -> Result<f64> {
                let h = m.hermitian_part();
                if fro_norm(&(m - &h)) > tol * 1.0f64.max(fro_norm(m)) {
                    return Ok(f64::NEG_INFINITY);
                }
                Ok(herm_eigen(&h, 1e-14)?.values[0])
            };
            let min_w1 = min_eig(&bl.w1)?;
            let min_w2 = min_eig(&bl.w2)?;
            let w_scale = 1.0f64.max(fro_norm(&bl.w1)).max(fro_norm(&bl.w2));
            if min_w1 < -tol * w_scale || min_w2 < -tol * w_scale {
                return Err(Error::AssumptionViolated {
                    t,
                    assumption: "W ≥ 0",
                    detail: format!("min eig W1 = {min_w1:.3e}, W2 = {min_w2:.3e}"),
                });
            }
            let ia = &CMat::identity(n) - &bl.a;
            let gram = ia.adjoint_mul(&ia);
            let sigma_min = herm_eigen(&gram.hermitian_part(), 1e-14)?.values[0].max(0.0).sqrt();
            if sigma_min <= 1e3 * f64::EPSILON * 1.0f64.max(fro_norm(&ia)) {
                return Err(Error::AssumptionViolated {
                    t,
                    assumption: "A1",
                    detail: format!("I − A(t) is singular (σ_min = {sigma_min:.3e})"),
                });
            }
            rows.push(ValidationRow { t, herm_b, herm_c, min_w1, min_w2, sigma_min });
        }
        Ok(ValidationReport { rows })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationRow {
    pub t: i64,
    pub herm_b: f64,
    pub herm_c: f64,
    pub min_w1: f64,
    pub min_w2: f64,
    pub sigma_min: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub rows: Vec<ValidationRow>,
}

// ---------------------------------------------------------------------------
// Sequences and the operators R, L
// ---------------------------------------------------------------------------

/// Finite stretch y(start), …, y(end) of 2n-vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HamSequence {
    pub start: i64,
    pub values: Vec<Vec<C64>>,
}

impl HamSequence {
    pub fn new(start: i64, values: Vec<Vec<C64>>) -> Result<Self> {
        let dim = values.first().map(|v| v.len()).ok_or_else(|| Error::Dimension("empty sequence".into()))?;
        if dim == 0 || dim % 2 != 0 || values.iter().any(|v| v.len() != dim) {
            return Err(Error::Dimension("sequence entries must share one even length".into()));
        }
        Ok(HamSequence { start, values })
    }

    pub fn zeros(start: i64, end: i64, dim: usize) -> Self {
        HamSequence { start, values: vec![vec![ZERO; dim]; (end - start + 1).max(1) as usize] }
    }

    pub fn from_fn(start: i64, end: i64, mut f: impl FnMut(i64) -> Vec<C64>) -> Self {
        HamSequence { start, values: (start..=end).map(&mut f).collect() }
    }

    pub fn end(&self) -> i64 {
        self.start + self.values.len() as i64 - 1
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn get(&self, t: i64) -> Result<&[C64]> {
        if t < self.start || t > self.end() {
            return Err(Error::OutOfRange { t, start: self.start, end: self.end() });
        }
        Ok(&self.values[(t - self.start) as usize])
    }

    /// Value at t, or zero outside the stored stretch.
    pub fn get_or_zero(&self, t: i64) -> Vec<C64> {
        self.get(t).map(|v| v.to_vec()).unwrap_or_else(|_| vec![ZERO; self.dim()])
    }

    pub fn scale(&self, s: C64) -> HamSequence {
        HamSequence {
            start: self.start,
            values: self.values.iter().map(|v| v.iter().map(|x| x * s).collect()).collect(),
        }
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().map(|v| crate::matrix::vec_norm(v)).fold(0.0, f64::max)
    }
}

/// R(y)(t) = (y₁(t+1), y₂(t)).
pub fn apply_r(y: &HamSequence, t: i64) -> Result<Vec<C64>> {
    let n = y.dim() / 2;
    let now = y.get(t)?;
    let next = y.get(t + 1)?;
    Ok(next[..n].iter().chain(&now[n..]).copied().collect())
}

/// L(y)(t) = J Δy(t) − P(t) R(y)(t).
pub fn apply_l(sys: &SystemCoefficients, y: &HamSequence, t: i64) -> Result<Vec<C64>> {
    let n = sys.n();
    if y.dim() != 2 * n {
        return Err(Error::Dimension(format!("sequence has dimension {}, system needs {}", y.dim(), 2 * n)));
    }
    let ry = apply_r(y, t)?;
    let now = y.get(t)?;
    let next = y.get(t + 1)?;
    let dy: Vec<C64> = next.iter().zip(now).map(|(a, b)| a - b).collect();
    let jdy = sys.j().mat_vec(&dy);
    let pr = sys.p_matrix(t).mat_vec(&ry);
    Ok(jdy.iter().zip(&pr).map(|(a, b)| a - b).collect())
}

/// W(t)·v for a 2n-vector v.
pub fn weight_apply(sys: &SystemCoefficients, t: i64, v: &[C64]) -> Vec<C64> {
    sys.weight(t).mat_vec(v)
}

/// v* W(t) u.
pub fn weight_form(sys: &SystemCoefficients, t: i64, u: &[C64], v: &[C64]) -> C64 {
    vdot(v, &weight_apply(sys, t, u))
}

// ---------------------------------------------------------------------------
// Builtin families
// ---------------------------------------------------------------------------

/// A scalar coefficient profile t ↦ value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Profile {
    Constant(f64),
    Shaped(Shape),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Constant(f64),
    /// scale · ratio^(t − a)
    Geometric {
        scale: f64,
        ratio: f64,
    },
    /// values[t − a] on the table, `then` afterwards.
    Table {
        values: Vec<f64>,
        #[serde(default)]
        then: f64,
    },
}

impl Profile {
    pub fn value(&self, t: i64, a: i64) -> f64 {
        match self {
            Profile::Constant(v) | Profile::Shaped(Shape::Constant(v)) => *v,
            Profile::Shaped(Shape::Geometric { scale, ratio }) => scale * ratio.powf((t - a) as f64),
            Profile::Shaped(Shape::Table { values, then }) => {
                let i = t - a;
                if i >= 0 && (i as usize) < values.len() {
                    values[i as usize]
                } else {
                    *then
                }
            }
        }
    }

    fn tail(&self, a: i64) -> TailTag {
        match self {
            Profile::Constant(_) | Profile::Shaped(Shape::Constant(_)) => TailTag::Constant,
            Profile::Shaped(Shape::Geometric { ratio, .. }) => TailTag::Geometric { ratio: *ratio },
            Profile::Shaped(Shape::Table { values, then }) => {
                if *then == 0.0 {
                    TailTag::FiniteSupport { last: a + values.len() as i64 - 1 }
                } else {
                    TailTag::Constant
                }
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SecondOrderParams {
    pub p: Profile,
    pub q: Profile,
    pub w: Profile,
    #[serde(default)]
    pub a: i64,
}

/// −Δ(p(t)Δz(t−1)) + q(t)z(t) = λw(t)z(t) as an n = 1 system.
///
/// With y₁(t) = z(t−1) and y₂(t) = p(t)Δz(t−1) the blocks are A = 0,
/// B = 1/p, C = q, W₁ = w, W₂ = 0; then R(y)(t) = (z(t), p(t)Δz(t−1)) and the
/// weighted norm is Σ w(t)|z(t)|².
pub fn second_order(params: &SecondOrderParams, label: &str) -> SystemCoefficients {
    let prm = params.clone();
    let a = prm.a;
    let tail = params.w.tail(a);
    SystemCoefficients::new(1, a, tail, label, move |t| {
        let r = |x: f64| CMat::scalar(C64::new(x, 0.0));
        Blocks {
            a: CMat::zeros(1, 1),
            b: r(1.0 / prm.p.value(t, a)),
            c: r(prm.q.value(t, a)),
            w1: r(prm.w.value(t, a)),
            w2: CMat::zeros(1, 1),
        }
    })
}

/// p ≡ 1, q ≡ 0, w(t) = 2⁻ᵗ on t ≥ 0: limit-circle at +∞.
pub fn ex_lcc() -> SystemCoefficients {
    let params = SecondOrderParams {
        p: Profile::Constant(1.0),
        q: Profile::Constant(0.0),
        w: Profile::Shaped(Shape::Geometric { scale: 1.0, ratio: 0.5 }),
        a: 0,
    };
    second_order(&params, "ex-lcc")
}

/// p ≡ 1, q ≡ 0, w ≡ 1 on t ≥ 0: limit-point at +∞.
pub fn ex_lpc() -> SystemCoefficients {
    let params =
        SecondOrderParams { p: Profile::Constant(1.0), q: Profile::Constant(0.0), w: Profile::Constant(1.0), a: 0 };
    second_order(&params, "ex-lpc")
}

/// ex-lcc ⊕ ex-lpc: n = 2, deficiency index 3.
pub fn ex_mid() -> SystemCoefficients {
    let mut s = ex_lcc().direct_sum(&ex_lpc()).expect("common start");
    s.label = "ex-mid".into();
    s
}

/// Coefficient table plus a rule for t past the last row.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoefficientTable {
    pub n: usize,
    pub a: i64,
    pub rows: Vec<TableRow>,
    pub tail: TableTail,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TableRow {
    pub t: i64,
    #[serde(rename = "A")]
    pub a: CMat,
    #[serde(rename = "B")]
    pub b: CMat,
    #[serde(rename = "C")]
    pub c: CMat,
    #[serde(rename = "W1")]
    pub w1: CMat,
    #[serde(rename = "W2")]
    pub w2: CMat,
}

/// `constant` repeats the last row; `geometric` repeats A, B, C of the last
/// row and multiplies its W₁, W₂ by ratio^(t − t_last).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TableTail {
    Constant,
    Geometric { ratio: f64 },
}

pub fn table_with_tail(table: &CoefficientTable, label: &str) -> Result<SystemCoefficients> {
    let n = table.n;
    if table.rows.is_empty() {
        return Err(Error::MalformedParams("coefficient table has no rows".into()));
    }
    for (i, row) in table.rows.iter().enumerate() {
        if row.t != table.a + i as i64 {
            return Err(Error::MalformedParams(format!(
                "table rows must be consecutive from a = {} (row {i} has t = {})",
                table.a, row.t
            )));
        }
        for m in [&row.a, &row.b, &row.c, &row.w1, &row.w2] {
            if m.shape() != (n, n) {
                return Err(Error::MalformedParams(format!("row t = {} has a block that is not {n}×{n}", row.t)));
            }
        }
    }
    let rows: Vec<Blocks> = table
        .rows
        .iter()
        .map(|r| Blocks { a: r.a.clone(), b: r.b.clone(), c: r.c.clone(), w1: r.w1.clone(), w2: r.w2.clone() })
        .collect();
    let last_t = table.a + rows.len() as i64 - 1;
    let a = table.a;
    let tail_rule = table.tail.clone();
    let last_w_zero = rows.last().map(|b| b.weight_is_zero()).unwrap_or(true);
    let tail = match &tail_rule {
        TableTail::Constant if last_w_zero => {
            let last = rows.iter().rposition(|b| !b.weight_is_zero()).map(|i| a + i as i64).unwrap_or(a - 1);
            TailTag::FiniteSupport { last }
        }
        TableTail::Constant => TailTag::Constant,
        TableTail::Geometric { ratio } => TailTag::Geometric { ratio: *ratio },
    };
    Ok(SystemCoefficients::new(n, a, tail, label, move |t| {
        let idx = (t - a).max(0);
        if t <= last_t {
            return rows[idx as usize].clone();
        }
        let last = rows.last().unwrap().clone();
        match tail_rule {
            TableTail::Constant => last,
            TableTail::Geometric { ratio } => {
                let f = C64::new(ratio.powf((t - last_t) as f64), 0.0);
                Blocks { w1: last.w1.scale(f), w2: last.w2.scale(f), ..last }
            }
        }
    }))
}

/// Reference to a system in a configuration document.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SystemSpec {
    pub builtin: String,
    #[serde(default)]
    pub params: Value,
}

/// Builds a named system.  Besides `second_order`, `direct_sum` and
/// `table_with_tail` the reference systems `ex-lcc`, `ex-lpc` and `ex-mid`
/// are available by name.
///
/// * `second_order`: `{"p": profile, "q": profile, "w": profile, "a": int}`
/// * `direct_sum`: `{"first": spec, "second": spec}`
/// * `table_with_tail`: `{"path": file}` or an inline table document
pub fn builtin(name: &str, params: &Value) -> Result<SystemCoefficients> {
    match name {
        "ex-lcc" => Ok(ex_lcc()),
        "ex-lpc" => Ok(ex_lpc()),
        "ex-mid" => Ok(ex_mid()),
        "second_order" => {
            let p: SecondOrderParams = serde_json::from_value(params.clone())
                .map_err(|e| Error::MalformedParams(format!("second_order: {e}")))?;
            Ok(second_order(&p, "second_order"))
        }
        "direct_sum" => {
            #[derive(Deserialize)]
            struct Pair {
                first: SystemSpec,
                second: SystemSpec,
            }
            let pair: Pair = serde_json::from_value(params.clone())
                .map_err(|e| Error::MalformedParams(format!("direct_sum: {e}")))?;
            let x = builtin(&pair.first.builtin, &pair.first.params)?;
            let y = builtin(&pair.second.builtin, &pair.second.params)?;
            x.direct_sum(&y)
        }
        "table_with_tail" => {
            let table: CoefficientTable = match params.get("path").and_then(Value::as_str) {
                Some(path) => load_table(Path::new(path))?,
                None => serde_json::from_value(params.clone())
                    .map_err(|e| Error::MalformedParams(format!("table_with_tail: {e}")))?,
            };
            table_with_tail(&table, "table_with_tail")
        }
        other => Err(Error::UnknownBuiltin(other.to_string())),
    }
}

pub fn load_table(path: &Path) -> Result<CoefficientTable> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::MalformedParams(format!("{}: {e}", path.display())))
}

/// Zero blocks everywhere; Φ(t, λ) ≡ I.
pub fn zero_system(n: usize, a: i64) -> SystemCoefficients {
    SystemCoefficients::new(n, a, TailTag::FiniteSupport { last: a - 1 }, "zero", move |_| Blocks::zeros(n))
}

/// Scalar helper for building 1×1 blocks.
pub fn scalar_block(x: f64) -> CMat {
    CMat::scalar(C64::new(x, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq_real(start: i64, vals: &[[f64; 2]]) -> HamSequence {
        HamSequence::new(start, vals.iter().map(|v| vec![C64::new(v[0], 0.0), C64::new(v[1], 0.0)]).collect()).unwrap()
    }

    #[test]
    fn valid_and_invalid_scalar_systems() {
        let ok = SystemCoefficients::new(1, 0, TailTag::Constant, "ok", |_| Blocks {
            b: scalar_block(1.0),
            w1: scalar_block(1.0),
            ..Blocks::zeros(1)
        });
        assert!(ok.validate(0..=5, 1e-12).is_ok());

        let singular = SystemCoefficients::new(1, 0, TailTag::Constant, "A=1", |_| Blocks {
            a: scalar_block(1.0),
            ..Blocks::zeros(1)
        });
        match singular.validate(3..=3, 1e-12) {
            Err(Error::AssumptionViolated { t, assumption, .. }) => {
                assert_eq!((t, assumption), (3, "A1"));
            }
            other => panic!("expected A1 violation, got {other:?}"),
        }

        let negative = SystemCoefficients::new(1, 0, TailTag::Constant, "W1=-1", |_| Blocks {
            w1: scalar_block(-1.0),
            ..Blocks::zeros(1)
        });
        assert!(matches!(negative.validate(0..=0, 1e-12), Err(Error::AssumptionViolated { assumption: "W ≥ 0", .. })));
    }

    #[test]
    fn p_matrix_layout() {
        let z = zero_system(2, 0);
        assert!(z.p_matrix(0).is_zero());
        let s = SystemCoefficients::new(1, 0, TailTag::Constant, "A=i", |_| Blocks {
            a: CMat::scalar(C64::new(0.0, 1.0)),
            ..Blocks::zeros(1)
        });
        let p = s.p_matrix(0);
        assert_eq!(p[(0, 1)], C64::new(0.0, -1.0));
        assert_eq!(p[(1, 0)], C64::new(0.0, 1.0));
        assert_eq!(p, p.adjoint());
    }

    #[test]
    fn right_shift_examples() {
        let c = seq_real(0, &[[2.0, 3.0]; 4]);
        let r = apply_r(&c, 1).unwrap();
        assert_eq!(r, vec![C64::new(2.0, 0.0), C64::new(3.0, 0.0)]);

        let lin = seq_real(0, &[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]]);
        assert_eq!(apply_r(&lin, 2).unwrap()[0], C64::new(3.0, 0.0));

        let alt = seq_real(0, &[[1.0, -1.0], [-1.0, 1.0], [1.0, -1.0]]);
        assert_eq!(apply_r(&alt, 0).unwrap(), vec![C64::new(-1.0, 0.0), C64::new(-1.0, 0.0)]);
        assert!(matches!(apply_r(&alt, 2), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn l_of_zero_is_zero() {
        let sys = ex_lcc();
        let y = HamSequence::zeros(0, 5, 2);
        for t in 0..5 {
            assert!(apply_l(&sys, &y, t).unwrap().iter().all(|z| *z == ZERO));
        }
    }

    #[test]
    fn builtin_dispatch() {
        assert_eq!(builtin("ex-mid", &Value::Null).unwrap().n(), 2);
        assert!(matches!(builtin("nope", &Value::Null), Err(Error::UnknownBuiltin(_))));
        let bad = serde_json::json!({"p": 1.0});
        assert!(matches!(builtin("second_order", &bad), Err(Error::MalformedParams(_))));
        let geo = serde_json::json!({"p": 1.0, "q": 0.0, "w": {"geometric": {"scale": 1.0, "ratio": 0.5}}});
        let s = builtin("second_order", &geo).unwrap();
        assert_eq!(s.blocks(3).w1[(0, 0)].re, 0.125);
        assert_eq!(s.tail(), &TailTag::Geometric { ratio: 0.5 });
    }

    #[test]
    fn table_rows_and_tails() {
        let doc = serde_json::json!({
            "n": 1, "a": 0,
            "rows": [
                {"t": 0, "A": [[[0.0,0.0]]], "B": [[[1.0,0.0]]], "C": [[[0.0,0.0]]], "W1": [[[1.0,0.0]]], "W2": [[[0.0,0.0]]]},
                {"t": 1, "A": [[[0.0,0.0]]], "B": [[[1.0,0.0]]], "C": [[[0.5,0.0]]], "W1": [[[2.0,0.0]]], "W2": [[[0.0,0.0]]]}
            ],
            "tail": {"kind": "geometric", "ratio": 0.5}
        });
        let s = builtin("table_with_tail", &doc).unwrap();
        assert_eq!(s.blocks(1).c[(0, 0)].re, 0.5);
        assert_eq!(s.blocks(3).w1[(0, 0)].re, 0.5);
        assert_eq!(s.blocks(3).c[(0, 0)].re, 0.5);
    }

    #[test]
    fn shift_moves_lambda() {
        let s = ex_lpc().shifted(2.0);
        assert_eq!(s.blocks(4).c[(0, 0)].re, -2.0);
    }
}
