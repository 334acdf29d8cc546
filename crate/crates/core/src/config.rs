//! JSON run descriptions.
//!
//! A run names a system (builtin family or coefficient table), optionally
//! fixes the endpoint case, describes the self-adjoint extension, and lists
//! the truncation schedule and tolerances.  Matrices are nested arrays of
//! `[re, im]` pairs.  Relative file paths are resolved against the directory
//! of the configuration file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::classify::{classify, CaseKind, CaseLabel, ClassifyOptions};
use crate::error::{Error, Result};
use crate::extension::{PsiBasis, RegularBC, SseDescriptor};
use crate::matrix::{CMat, C64};
use crate::model::{builtin, load_table, table_with_tail, HamSequence, SystemCoefficients};
use crate::solution::TailOptions;
use crate::spectral::{ApproxOptions, EigenOptions, LimitOptions, OracleOptions, TailOptionsDef};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SystemSource {
    /// `{"table": "coefficients.json"}`
    Table { table: PathBuf },
    /// `{"builtin": "second_order", "params": {...}}`
    Builtin {
        builtin: String,
        #[serde(default)]
        params: Value,
    },
}

/// Explicit list or b_k = round(b₀·factor^k), k = 0 … count−1.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Schedule {
    List(Vec<i64>),
    Geometric { b0: i64, factor: f64, count: usize },
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule::List(Vec::new())
    }
}

impl Schedule {
    pub fn points(&self) -> Result<Vec<i64>> {
        let pts = match self {
            Schedule::List(v) => v.clone(),
            Schedule::Geometric { b0, factor, count } => {
                if !(factor.is_finite() && *factor > 1.0) {
                    return Err(Error::MalformedParams(format!("schedule factor must exceed 1 (got {factor})")));
                }
                (0..*count).map(|k| (*b0 as f64 * factor.powi(k as i32)).round() as i64).collect()
            }
        };
        if pts.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::MalformedParams(format!("schedule must be strictly increasing (got {pts:?})")));
        }
        Ok(pts)
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtensionSpec {
    #[serde(rename = "M", default)]
    pub m: Option<CMat>,
    #[serde(rename = "N", default)]
    pub n: Option<CMat>,
    #[serde(rename = "aux_N", default)]
    pub aux_n: Option<CMat>,
    /// Real frame λ for the limit-circle boundary functionals.
    #[serde(default)]
    pub frame: f64,
    /// Real point with exactly d square-summable solutions (intermediate case).
    #[serde(default)]
    pub lambda0: Option<f64>,
    /// Deficiency index when the case is fixed to intermediate without M.
    #[serde(default)]
    pub d: Option<usize>,
    /// Last t at which the Ψ basis is tabulated (default: last b + 1).
    #[serde(default)]
    pub trusted: Option<i64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Relative Cauchy tolerance for tail sums and limits.
    pub tail: f64,
    pub tail_cap: i64,
    /// Relative tolerance for merging eigenvalues into clusters.
    pub cluster: f64,
    /// Relative eigenvalue floor of the Gram matrix for the definiteness window.
    pub definiteness: f64,
    /// Successive relative gap below which a trajectory counts as converged.
    pub converge: f64,
    /// Hermiticity / semidefiniteness tolerance for coefficient validation.
    pub validation: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let t = TailOptions::default();
        Tolerances {
            tail: t.tol,
            tail_cap: t.cap,
            cluster: EigenOptions::default().cluster_tol,
            definiteness: ClassifyOptions::default().definiteness_tol,
            converge: 1e-6,
            validation: 1e-10,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Emit {
    pub csv: bool,
    pub json: bool,
    pub svg: bool,
}

impl Default for Emit {
    fn default() -> Self {
        Emit { csv: true, json: true, svg: true }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegularBcChoice {
    /// Boundary conditions induced by the extension.
    #[default]
    Induced,
    /// y₁(a) = 0, y₁(b+1) = 0.
    Dirichlet,
}

/// Forcing term for the resolvent command.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolventSpec {
    #[serde(default = "default_z")]
    pub z: [f64; 2],
    /// Path of a sequence document `{"start": a, "values": [[[re,im], …], …]}`.
    #[serde(default)]
    pub g_file: Option<PathBuf>,
    /// Inline sequence document.
    #[serde(default)]
    pub g: Option<HamSequence>,
    /// Last t of the reported solution (limit-circle case).
    #[serde(default)]
    pub end: Option<i64>,
}

fn default_z() -> [f64; 2] {
    [0.0, 1.0]
}

fn default_max_index() -> usize {
    3
}

fn default_seed() -> u64 {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemSource,
    /// Skips classification when set.
    #[serde(default)]
    pub case: Option<CaseKind>,
    #[serde(default)]
    pub extension: ExtensionSpec,
    #[serde(default)]
    pub schedule: Schedule,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Spectral shift s: the computation runs on λ − s and reports λ.
    #[serde(default)]
    pub shift: f64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub emit: Emit,
    #[serde(default = "default_max_index")]
    pub max_index: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub defect_samples: usize,
    #[serde(default = "default_z")]
    pub defect_z: [f64; 2],
    #[serde(default)]
    pub regular_bc: RegularBcChoice,
    #[serde(default)]
    pub oracle: bool,
    #[serde(default)]
    pub resolvent: Option<ResolventSpec>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// The case and deficiency index a run works with.
#[derive(Clone, Debug, Serialize)]
pub struct CaseChoice {
    pub kind: CaseKind,
    pub d: usize,
    /// Present when the case was determined by classification.
    pub label: Option<CaseLabel>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json(&text, &base).map_err(|e| match e {
            Error::MalformedParams(m) => Error::MalformedParams(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = serde_json::from_str(text)?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<()> {
        let t = &self.tolerances;
        for (name, v) in [
            ("tail", t.tail),
            ("cluster", t.cluster),
            ("definiteness", t.definiteness),
            ("converge", t.converge),
            ("validation", t.validation),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::MalformedParams(format!("tolerance '{name}' must be positive (got {v})")));
            }
        }
        if t.tail_cap <= 0 {
            return Err(Error::MalformedParams("tolerance 'tail_cap' must be positive".into()));
        }
        if !self.shift.is_finite() || !self.extension.frame.is_finite() {
            return Err(Error::MalformedParams("shift and frame must be finite".into()));
        }
        self.schedule.points()?;
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn schedule(&self) -> Result<Vec<i64>> {
        self.schedule.points()
    }

    /// The system as described, without the spectral shift.
    pub fn system(&self) -> Result<SystemCoefficients> {
        match &self.system {
            SystemSource::Table { table } => {
                let path = self.resolve(table);
                let label = path.file_stem().and_then(|s| s.to_str()).unwrap_or("table").to_string();
                table_with_tail(&load_table(&path)?, &label)
            }
            SystemSource::Builtin { builtin: name, params } => {
                let mut params = params.clone();
                // Table paths inside builtin parameters are config-relative too.
                if let Some(Value::String(p)) = params.get("path") {
                    let full = self.resolve(Path::new(p));
                    params["path"] = Value::String(full.to_string_lossy().into_owned());
                }
                builtin(name, &params)
            }
        }
    }

    pub fn classify_options(&self) -> ClassifyOptions {
        ClassifyOptions { definiteness_tol: self.tolerances.definiteness, ..Default::default() }
    }

    pub fn tail_options(&self) -> TailOptions {
        TailOptions { tol: self.tolerances.tail, cap: self.tolerances.tail_cap }
    }

    pub fn limit_options(&self) -> LimitOptions {
        LimitOptions::default()
    }

    pub fn eigen_options(&self) -> EigenOptions {
        EigenOptions { cluster_tol: self.tolerances.cluster, ..Default::default() }
    }

    pub fn approx_options(&self) -> ApproxOptions {
        ApproxOptions {
            eigen: self.eigen_options(),
            max_index: self.max_index,
            converge_tol: self.tolerances.converge,
            tails: TailOptionsDef { tol: self.tolerances.tail, cap: self.tolerances.tail_cap },
            limit: self.limit_options(),
            oracle: self.oracle,
            oracle_opts: OracleOptions::default(),
            defect_samples: self.defect_samples,
            defect_z: [self.defect_z[0] - self.shift, self.defect_z[1]],
            seed: self.seed,
            spectral_shift: self.shift,
        }
    }

    /// Case override, or classification of `sys`.
    pub fn resolve_case(&self, sys: &SystemCoefficients) -> Result<CaseChoice> {
        let n = sys.n();
        match self.case {
            Some(CaseKind::LimitCircle) => Ok(CaseChoice { kind: CaseKind::LimitCircle, d: 2 * n, label: None }),
            Some(CaseKind::LimitPoint) => Ok(CaseChoice { kind: CaseKind::LimitPoint, d: n, label: None }),
            Some(CaseKind::Intermediate) => {
                let d = self.extension.d.or(self.extension.m.as_ref().map(|m| m.rows())).ok_or_else(|| {
                    Error::MalformedParams("intermediate case needs extension.d or extension.M".into())
                })?;
                Ok(CaseChoice { kind: CaseKind::Intermediate, d, label: None })
            }
            None => {
                let label = classify(sys, &self.classify_options())?;
                Ok(CaseChoice { kind: label.kind, d: label.d, label: Some(label) })
            }
        }
    }

    /// The extension on the shifted system; frames move with the shift.
    pub fn descriptor(&self, sys: &SystemCoefficients, case: &CaseChoice) -> Result<SseDescriptor> {
        let n = sys.n();
        let s = self.shift;
        let shifted = sys.shifted(s);
        let ext = &self.extension;
        let desc = match case.kind {
            CaseKind::LimitCircle => {
                let m = ext.m.clone().unwrap_or_else(|| CMat::identity(2 * n));
                let nm = ext.n.clone().unwrap_or_else(|| CMat::identity(2 * n));
                SseDescriptor::limit_circle(&shifted, m, nm, ext.frame - s)?
            }
            CaseKind::LimitPoint => {
                let m = ext.m.clone().unwrap_or_else(|| {
                    let mut m = CMat::zeros(n, 2 * n);
                    for i in 0..n {
                        m[(i, i)] = C64::new(1.0, 0.0);
                    }
                    m
                });
                SseDescriptor::limit_point(&shifted, m, ext.aux_n.clone(), ext.frame - s)?
            }
            CaseKind::Intermediate => {
                let lambda0 = ext
                    .lambda0
                    .ok_or_else(|| Error::MalformedParams("intermediate case needs extension.lambda0".into()))?;
                let last = self.schedule()?.last().copied().unwrap_or(sys.start() + 64);
                let trusted = ext.trusted.unwrap_or(last + 1);
                let psi = PsiBasis::build(&shifted, lambda0 - s, case.d, trusted)?;
                match (&ext.m, &ext.n) {
                    (Some(m), Some(nm)) => SseDescriptor::intermediate(&shifted, m.clone(), nm.clone(), psi)?,
                    (None, None) => SseDescriptor::intermediate_natural(&shifted, psi)?,
                    _ => {
                        return Err(Error::MalformedParams(
                            "intermediate extension needs both M and N, or neither".into(),
                        ))
                    }
                }
            }
        };
        if self.tolerances.definiteness != ClassifyOptions::default().definiteness_tol {
            return desc.with_definiteness(&self.classify_options());
        }
        Ok(desc)
    }

    /// Boundary conditions of the truncation at b (on the shifted system).
    pub fn regular_bc(&self, desc: &SseDescriptor, b: i64) -> Result<RegularBC> {
        match self.regular_bc {
            RegularBcChoice::Induced => desc.induce_regular(b),
            RegularBcChoice::Dirichlet => Ok(RegularBC::dirichlet(desc.n(), b)),
        }
    }

    /// Shifted system and boundary conditions of the truncation at b. The
    /// Dirichlet choice needs no extension, so nothing is classified.
    pub fn truncation(&self, sys: &SystemCoefficients, b: i64) -> Result<(SystemCoefficients, RegularBC)> {
        match self.regular_bc {
            RegularBcChoice::Dirichlet => Ok((sys.shifted(self.shift), RegularBC::dirichlet(sys.n(), b))),
            RegularBcChoice::Induced => {
                let case = self.resolve_case(sys)?;
                let desc = self.descriptor(sys, &case)?;
                let bc = desc.induce_regular(b)?;
                Ok((desc.system().clone(), bc))
            }
        }
    }

    /// Forcing sequence of the resolvent command.
    pub fn forcing(&self, sys: &SystemCoefficients) -> Result<HamSequence> {
        let spec = self
            .resolvent
            .as_ref()
            .ok_or_else(|| Error::MalformedParams("the resolvent command needs a 'resolvent' section".into()))?;
        let g = match (&spec.g, &spec.g_file) {
            (Some(g), None) => g.clone(),
            (None, Some(p)) => {
                let path = self.resolve(p);
                let text = std::fs::read_to_string(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                serde_json::from_str(&text).map_err(|e| Error::MalformedParams(format!("{}: {e}", path.display())))?
            }
            _ => return Err(Error::MalformedParams("resolvent needs exactly one of 'g' and 'g_file'".into())),
        };
        let g = HamSequence::new(g.start, g.values)?;
        if g.dim() != 2 * sys.n() {
            return Err(Error::Dimension(format!(
                "g has entries of length {}, the system needs {}",
                g.dim(),
                2 * sys.n()
            )));
        }
        if g.start < sys.start() {
            return Err(Error::MalformedParams(format!("g starts at {} before a = {}", g.start, sys.start())));
        }
        Ok(g)
    }

    pub fn out_dir(&self, cli: Option<&Path>) -> PathBuf {
        match (cli, &self.out) {
            (Some(p), _) => p.to_path_buf(),
            (None, Some(p)) => self.resolve(p),
            (None, None) => self.base_dir.join("out"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_schedule() {
        let s = Schedule::Geometric { b0: 15, factor: 2.0, count: 4 };
        assert_eq!(s.points().unwrap(), vec![15, 30, 60, 120]);
        assert!(Schedule::List(vec![30, 15]).points().is_err());
    }

    #[test]
    fn minimal_config_parses() {
        let cfg =
            RunConfig::from_json(r#"{"system": {"builtin": "ex-lcc"}, "schedule": [15, 30]}"#, Path::new(".")).unwrap();
        assert!(cfg.emit.csv && cfg.emit.svg);
        assert_eq!(cfg.max_index, 3);
        assert!(cfg.system().is_ok());
    }

    #[test]
    fn nonpositive_tolerance_is_rejected() {
        let r =
            RunConfig::from_json(r#"{"system": {"builtin": "ex-lcc"}, "tolerances": {"cluster": 0}}"#, Path::new("."));
        assert!(matches!(r, Err(Error::MalformedParams(_))));
    }
}
