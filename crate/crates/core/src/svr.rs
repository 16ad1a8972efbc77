//! Epsilon-insensitive support vector regression.
//!
//! Training solves the standard dual over the stacked variables
//! `beta = [alpha; alpha*]` with `Q_st = z_s z_t K(s mod n, t mod n)`, where
//! `z = +1` for the `alpha` half and `-1` for the `alpha*` half:
//!
//! ```text
//! min  ½ betaᵀ Q beta + pᵀ beta,   p = [eps - y; eps + y]
//! s.t. zᵀ beta = 0,   0 <= beta <= C
//! ```
//!
//! The solver is SMO with second-order working-set selection. The model keeps
//! only rows with a nonzero `alpha - alpha*`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::timeseries::SupervisedDataset;

const TAU: f64 = 1e-12;

pub const DEFAULT_TOL: f64 = 1e-4;
pub const DEFAULT_MAX_ITER: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SvrError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("training data contains non-finite values")]
    NonFinite,
    #[error("need at least 2 training rows, got {0}")]
    TooFewRows(usize),
    #[error("no convergence after {iterations} iterations (max KKT violation {max_violation:e})")]
    NoConvergence {
        iterations: usize,
        max_violation: f64,
    },
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Linear,
    Rbf,
}

impl std::fmt::Display for KernelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            KernelKind::Linear => "Linear",
            KernelKind::Rbf => "RBF",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    Linear,
    Rbf { gamma: f64 },
}

impl KernelSpec {
    pub fn kind(&self) -> KernelKind {
        match self {
            KernelSpec::Linear => KernelKind::Linear,
            KernelSpec::Rbf { .. } => KernelKind::Rbf,
        }
    }

    pub fn gamma(&self) -> Option<f64> {
        match self {
            KernelSpec::Linear => None,
            KernelSpec::Rbf { gamma } => Some(*gamma),
        }
    }

    fn eval_unchecked(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            KernelSpec::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            KernelSpec::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
        }
    }
}

/// `dot(a, b)` for linear, `exp(-gamma * |a - b|²)` for RBF.
pub fn kernel_eval(spec: &KernelSpec, a: &[f64], b: &[f64]) -> Result<f64, SvrError> {
    if a.len() != b.len() {
        return Err(SvrError::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(spec.eval_unchecked(a, b))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvrHyperParams {
    pub c: f64,
    pub epsilon: f64,
    pub kernel: KernelSpec,
}

impl SvrHyperParams {
    pub fn validate(&self) -> Result<(), SvrError> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(SvrError::InvalidHyperParams(format!("C = {} must be > 0", self.c)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(SvrError::InvalidHyperParams(format!(
                "epsilon = {} must be >= 0",
                self.epsilon
            )));
        }
        if let KernelSpec::Rbf { gamma } = self.kernel {
            if !(gamma > 0.0 && gamma.is_finite()) {
                return Err(SvrError::InvalidHyperParams(format!("gamma = {gamma} must be > 0")));
            }
        }
        Ok(())
    }
}

impl std::fmt::Display for SvrHyperParams {
    /// `C:1.5, epsilon: 0.1, gamma: 0.1, kernel: RBF`
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "C:{}, epsilon: {}", self.c, self.epsilon)?;
        if let Some(g) = self.kernel.gamma() {
            write!(f, ", gamma: {g}")?;
        }
        write!(f, ", kernel: {}", self.kernel.kind())
    }
}

/// Flat serialized form shared by models and reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperParamsRecord {
    pub kernel: KernelKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub gamma: Option<f64>,
    #[serde(rename = "C")]
    pub c: f64,
    pub epsilon: f64,
}

impl From<SvrHyperParams> for HyperParamsRecord {
    fn from(hp: SvrHyperParams) -> Self {
        Self {
            kernel: hp.kernel.kind(),
            gamma: hp.kernel.gamma(),
            c: hp.c,
            epsilon: hp.epsilon,
        }
    }
}

impl TryFrom<HyperParamsRecord> for SvrHyperParams {
    type Error = SvrError;

    fn try_from(r: HyperParamsRecord) -> Result<Self, SvrError> {
        let kernel = match (r.kernel, r.gamma) {
            (KernelKind::Linear, _) => KernelSpec::Linear,
            (KernelKind::Rbf, Some(gamma)) => KernelSpec::Rbf { gamma },
            (KernelKind::Rbf, None) => {
                return Err(SvrError::InvalidHyperParams("rbf kernel needs gamma".into()))
            }
        };
        let hp = SvrHyperParams {
            c: r.c,
            epsilon: r.epsilon,
            kernel,
        };
        hp.validate()?;
        Ok(hp)
    }
}

/// Solver stopping rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// What the solver reported when it stopped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverDiagnostics {
    pub iterations: usize,
    /// Maximal KKT violation `m(beta) - M(beta)` at exit.
    pub max_violation: f64,
    /// Dual objective in maximization form.
    pub dual_objective: f64,
}

/// A trained epsilon-SVR.
#[derive(Debug, Clone, PartialEq)]
pub struct SvrModel {
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha - alpha*` per support vector.
    pub dual_coeffs: Vec<f64>,
    pub bias: f64,
    pub hyper: SvrHyperParams,
    pub n_features: usize,
    pub feature_names: Vec<String>,
    /// Present on freshly trained models only; not serialized.
    pub diagnostics: Option<SolverDiagnostics>,
}

impl SvrModel {
    pub fn kernel(&self) -> KernelSpec {
        self.hyper.kernel
    }

    /// `sum_i coeff_i K(sv_i, x) + bias`, without a length check.
    pub(crate) fn decision(&self, x: &[f64]) -> f64 {
        let kernel = self.hyper.kernel;
        self.support_vectors
            .iter()
            .zip(&self.dual_coeffs)
            .map(|(sv, c)| c * kernel.eval_unchecked(sv, x))
            .sum::<f64>()
            + self.bias
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64, SvrError> {
        if x.len() != self.n_features {
            return Err(SvrError::DimensionMismatch {
                expected: self.n_features,
                got: x.len(),
            });
        }
        Ok(self.decision(x))
    }

    pub fn predict_batch(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>, SvrError> {
        rows.iter().map(|r| self.predict(r)).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ModelRecord::from(self)).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelFormatError> {
        let record: ModelRecord = serde_json::from_str(text)?;
        record.try_into()
    }
}

#[derive(Debug, Error)]
pub enum ModelFormatError {
    #[error("model json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("model json: {0}")]
    Invalid(String),
    #[error(transparent)]
    Params(#[from] SvrError),
}

/// On-disk model layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelRecord {
    kernel: KernelKind,
    gamma: Option<f64>,
    #[serde(rename = "C")]
    c: f64,
    epsilon: f64,
    support_vectors: Vec<Vec<f64>>,
    dual_coeffs: Vec<f64>,
    bias: f64,
    feature_names: Vec<String>,
}

impl From<&SvrModel> for ModelRecord {
    fn from(m: &SvrModel) -> Self {
        Self {
            kernel: m.hyper.kernel.kind(),
            gamma: m.hyper.kernel.gamma(),
            c: m.hyper.c,
            epsilon: m.hyper.epsilon,
            support_vectors: m.support_vectors.clone(),
            dual_coeffs: m.dual_coeffs.clone(),
            bias: m.bias,
            feature_names: m.feature_names.clone(),
        }
    }
}

impl TryFrom<ModelRecord> for SvrModel {
    type Error = ModelFormatError;

    fn try_from(r: ModelRecord) -> Result<Self, ModelFormatError> {
        let hyper = SvrHyperParams::try_from(HyperParamsRecord {
            kernel: r.kernel,
            gamma: r.gamma,
            c: r.c,
            epsilon: r.epsilon,
        })?;
        let n_features = r.feature_names.len();
        if r.support_vectors.len() != r.dual_coeffs.len() {
            return Err(ModelFormatError::Invalid(
                "support_vectors and dual_coeffs differ in length".into(),
            ));
        }
        if r.support_vectors.iter().any(|sv| sv.len() != n_features) {
            return Err(ModelFormatError::Invalid(
                "support vector length differs from feature_names".into(),
            ));
        }
        if r.dual_coeffs.iter().any(|c| c.abs() > hyper.c) {
            return Err(ModelFormatError::Invalid("dual coefficient outside [-C, C]".into()));
        }
        Ok(Self {
            support_vectors: r.support_vectors,
            dual_coeffs: r.dual_coeffs,
            bias: r.bias,
            hyper,
            n_features,
            feature_names: r.feature_names,
            diagnostics: None,
        })
    }
}

/// Trains on a supervised dataset; feature names travel with the model.
pub fn train_svr(
    train: &SupervisedDataset,
    hp: &SvrHyperParams,
    opts: &SolverOptions,
) -> Result<SvrModel, SvrError> {
    let mut model = fit(&train.x, &train.y, hp, opts)?;
    model.feature_names = train.feature_names.clone();
    Ok(model)
}

/// Trains on a raw design matrix. Feature names are left empty.
pub fn fit(
    x: &[Vec<f64>],
    y: &[f64],
    hp: &SvrHyperParams,
    opts: &SolverOptions,
) -> Result<SvrModel, SvrError> {
    hp.validate()?;
    let n = y.len();
    if n < 2 {
        return Err(SvrError::TooFewRows(n));
    }
    if x.len() != n {
        return Err(SvrError::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    let d = x[0].len();
    if let Some(bad) = x.iter().find(|r| r.len() != d) {
        return Err(SvrError::DimensionMismatch {
            expected: d,
            got: bad.len(),
        });
    }
    if y.iter().chain(x.iter().flatten()).any(|v| !v.is_finite()) {
        return Err(SvrError::NonFinite);
    }

    let gram = gram_matrix(&hp.kernel, x);
    let mut solver = Smo::new(&gram, y, hp.c, hp.epsilon);
    let outcome = solver.solve(opts)?;

    let mut support_vectors = Vec::new();
    let mut dual_coeffs = Vec::new();
    for i in 0..n {
        let theta = solver.alpha[i] - solver.alpha[i + n];
        if theta != 0.0 {
            support_vectors.push(x[i].clone());
            dual_coeffs.push(theta);
        }
    }
    Ok(SvrModel {
        support_vectors,
        dual_coeffs,
        bias: -solver.rho(),
        hyper: *hp,
        n_features: d,
        feature_names: Vec::new(),
        diagnostics: Some(outcome),
    })
}

/// Dense kernel matrix of the training rows.
pub fn gram_matrix(kernel: &KernelSpec, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut k = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let v = kernel.eval_unchecked(&x[i], &x[j]);
            k[i][j] = v;
            k[j][i] = v;
        }
    }
    k
}

struct Smo<'a> {
    gram: &'a [Vec<f64>],
    n: usize,
    c: f64,
    /// `[alpha; alpha*]`
    alpha: Vec<f64>,
    /// Gradient of the minimization objective.
    grad: Vec<f64>,
    p: Vec<f64>,
}

impl<'a> Smo<'a> {
    fn new(gram: &'a [Vec<f64>], y: &[f64], c: f64, epsilon: f64) -> Self {
        let n = y.len();
        let p: Vec<f64> = y
            .iter()
            .map(|&v| epsilon - v)
            .chain(y.iter().map(|&v| epsilon + v))
            .collect();
        Self {
            gram,
            n,
            c,
            alpha: vec![0.0; 2 * n],
            grad: p.clone(),
            p,
        }
    }

    fn sign(&self, t: usize) -> f64 {
        if t < self.n {
            1.0
        } else {
            -1.0
        }
    }

    fn q(&self, s: usize, t: usize) -> f64 {
        self.sign(s) * self.sign(t) * self.gram[s % self.n][t % self.n]
    }

    fn qd(&self, t: usize) -> f64 {
        self.gram[t % self.n][t % self.n]
    }

    fn at_upper(&self, t: usize) -> bool {
        self.alpha[t] >= self.c
    }

    fn at_lower(&self, t: usize) -> bool {
        self.alpha[t] <= 0.0
    }

    /// Second-order working-set selection. Returns the pair to update (if any)
    /// and the maximal KKT violation `m(beta) - M(beta)`.
    fn select(&self) -> (Option<(usize, usize)>, f64) {
        let l = 2 * self.n;
        let mut gmax = f64::NEG_INFINITY;
        let mut i = None;
        for t in 0..l {
            if t < self.n {
                if !self.at_upper(t) && -self.grad[t] >= gmax {
                    gmax = -self.grad[t];
                    i = Some(t);
                }
            } else if !self.at_lower(t) && self.grad[t] >= gmax {
                gmax = self.grad[t];
                i = Some(t);
            }
        }

        let mut gmax2 = f64::NEG_INFINITY;
        let mut j = None;
        let mut obj_min = f64::INFINITY;
        for t in 0..l {
            let Some(i) = i else { break };
            let si = self.sign(i);
            if t < self.n {
                if !self.at_lower(t) {
                    let grad_diff = gmax + self.grad[t];
                    gmax2 = gmax2.max(self.grad[t]);
                    if grad_diff > 0.0 {
                        let quad = self.qd(i) + self.qd(t) - 2.0 * si * self.q(i, t);
                        let obj = -(grad_diff * grad_diff) / if quad > 0.0 { quad } else { TAU };
                        if obj <= obj_min {
                            obj_min = obj;
                            j = Some(t);
                        }
                    }
                }
            } else if !self.at_upper(t) {
                let grad_diff = gmax - self.grad[t];
                gmax2 = gmax2.max(-self.grad[t]);
                if grad_diff > 0.0 {
                    let quad = self.qd(i) + self.qd(t) + 2.0 * si * self.q(i, t);
                    let obj = -(grad_diff * grad_diff) / if quad > 0.0 { quad } else { TAU };
                    if obj <= obj_min {
                        obj_min = obj;
                        j = Some(t);
                    }
                }
            }
        }

        let violation = gmax + gmax2;
        let violation = if violation.is_finite() { violation.max(0.0) } else { 0.0 };
        (i.zip(j), violation)
    }

    fn solve(&mut self, opts: &SolverOptions) -> Result<SolverDiagnostics, SvrError> {
        let c = self.c;
        let l = 2 * self.n;
        let mut iterations = 0;
        loop {
            let (pair, violation) = self.select();
            let (i, j) = match pair {
                Some(pair) if violation >= opts.tol => pair,
                _ => {
                    return Ok(SolverDiagnostics {
                        iterations,
                        max_violation: violation,
                        dual_objective: -self.objective(),
                    })
                }
            };
            if iterations >= opts.max_iter {
                return Err(SvrError::NoConvergence {
                    iterations,
                    max_violation: violation,
                });
            }
            iterations += 1;

            let qij = self.q(i, j);
            let (old_i, old_j) = (self.alpha[i], self.alpha[j]);
            let (mut ai, mut aj) = (old_i, old_j);
            if self.sign(i) != self.sign(j) {
                let mut quad = self.qd(i) + self.qd(j) + 2.0 * qij;
                if quad <= 0.0 {
                    quad = TAU;
                }
                let delta = (-self.grad[i] - self.grad[j]) / quad;
                let diff = ai - aj;
                ai += delta;
                aj += delta;
                if diff > 0.0 {
                    if aj < 0.0 {
                        aj = 0.0;
                        ai = diff;
                    }
                } else if ai < 0.0 {
                    ai = 0.0;
                    aj = -diff;
                }
                if diff > 0.0 {
                    if ai > c {
                        ai = c;
                        aj = c - diff;
                    }
                } else if aj > c {
                    aj = c;
                    ai = c + diff;
                }
            } else {
                let mut quad = self.qd(i) + self.qd(j) - 2.0 * qij;
                if quad <= 0.0 {
                    quad = TAU;
                }
                let delta = (self.grad[i] - self.grad[j]) / quad;
                let sum = ai + aj;
                ai -= delta;
                aj += delta;
                if sum > c {
                    if ai > c {
                        ai = c;
                        aj = sum - c;
                    }
                } else if aj < 0.0 {
                    aj = 0.0;
                    ai = sum;
                }
                if sum > c {
                    if aj > c {
                        aj = c;
                        ai = sum - c;
                    }
                } else if ai < 0.0 {
                    ai = 0.0;
                    aj = sum;
                }
            }
            self.alpha[i] = ai;
            self.alpha[j] = aj;

            let (di, dj) = (ai - old_i, aj - old_j);
            for t in 0..l {
                self.grad[t] += self.q(i, t) * di + self.q(j, t) * dj;
            }
        }
    }

    /// `½ betaᵀ Q beta + pᵀ beta`, using `grad = Q beta + p`.
    fn objective(&self) -> f64 {
        self.alpha
            .iter()
            .zip(self.grad.iter().zip(&self.p))
            .map(|(a, (g, p))| 0.5 * a * (g + p))
            .sum()
    }

    /// Offset `rho` with `f(x) = sum theta K - rho`: mean of `z G` over free
    /// variables, else the midpoint of the feasible interval.
    fn rho(&self) -> f64 {
        let mut ub = f64::INFINITY;
        let mut lb = f64::NEG_INFINITY;
        let mut free = 0usize;
        let mut sum_free = 0.0;
        for t in 0..2 * self.n {
            let z = self.sign(t);
            let yg = z * self.grad[t];
            if self.at_upper(t) {
                if z < 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else if self.at_lower(t) {
                if z > 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                free += 1;
                sum_free += yg;
            }
        }
        if free > 0 {
            sum_free / free as f64
        } else {
            (ub + lb) / 2.0
        }
    }
}

/// Dual objective (maximization form) of a coefficient vector `theta = alpha -
/// alpha*` whose split satisfies `alpha * alpha* = 0`:
/// `-½ thetaᵀ K theta - eps |theta|_1 + yᵀ theta`.
pub fn dual_objective(gram: &[Vec<f64>], y: &[f64], theta: &[f64], epsilon: f64) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += theta[i] * gram[i][j] * theta[j];
        }
    }
    let l1: f64 = theta.iter().map(|t| t.abs()).sum();
    let lin: f64 = y.iter().zip(theta).map(|(a, b)| a * b).sum();
    -0.5 * quad - epsilon * l1 + lin
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn line_data() -> (Vec<Vec<f64>>, Vec<f64>) {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![f64::from(i)]).collect();
        let y = x.iter().map(|r| 2.0 * r[0] + 1.0).collect();
        (x, y)
    }

    #[test]
    fn kernel_examples() {
        let rbf = KernelSpec::Rbf { gamma: 0.5 };
        assert_eq!(kernel_eval(&rbf, &[1.0, -3.0], &[1.0, -3.0]).unwrap(), 1.0);
        assert_eq!(kernel_eval(&KernelSpec::Linear, &[1.0, 2.0], &[3.0, 4.0]).unwrap(), 11.0);
        assert_abs_diff_eq!(kernel_eval(&rbf, &[0.0], &[2.0]).unwrap(), (-2.0f64).exp());
        assert_abs_diff_eq!(kernel_eval(&rbf, &[0.0], &[2.0]).unwrap(), 0.135335, epsilon = 1e-6);
        assert!(matches!(
            kernel_eval(&rbf, &[0.0], &[1.0, 2.0]),
            Err(SvrError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn fits_a_line() {
        let (x, y) = line_data();
        let hp = SvrHyperParams {
            c: 10.0,
            epsilon: 0.01,
            kernel: KernelSpec::Linear,
        };
        let model = fit(&x, &y, &hp, &SolverOptions::default()).unwrap();
        for (row, target) in x.iter().zip(&y) {
            assert!((model.predict(row).unwrap() - target).abs() < 0.02);
        }
        let sum: f64 = model.dual_coeffs.iter().sum();
        assert!(sum.abs() < 1e-8);
        assert!(model.dual_coeffs.iter().all(|c| c.abs() <= hp.c));
    }

    #[test]
    fn flat_target_gives_constant_model() {
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![f64::from(i), f64::from(i * i)]).collect();
        let y = vec![3.5; 6];
        for kernel in [KernelSpec::Linear, KernelSpec::Rbf { gamma: 0.3 }] {
            for epsilon in [0.0, 0.2] {
                let hp = SvrHyperParams { c: 1.0, epsilon, kernel };
                let m = fit(&x, &y, &hp, &SolverOptions::default()).unwrap();
                assert!(m.dual_coeffs.is_empty());
                assert_abs_diff_eq!(m.bias, 3.5, epsilon = 1e-12);
                assert_abs_diff_eq!(m.predict(&[100.0, -4.0]).unwrap(), 3.5, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let hp = SvrHyperParams {
            c: 1.0,
            epsilon: 0.1,
            kernel: KernelSpec::Linear,
        };
        assert_eq!(
            fit(&[vec![1.0]], &[1.0], &hp, &SolverOptions::default()),
            Err(SvrError::TooFewRows(1))
        );
        assert_eq!(
            fit(&[vec![1.0], vec![f64::NAN]], &[1.0, 2.0], &hp, &SolverOptions::default()),
            Err(SvrError::NonFinite)
        );
        let bad = SvrHyperParams { c: 0.0, ..hp };
        assert!(matches!(
            fit(&[vec![1.0], vec![2.0]], &[1.0, 2.0], &bad, &SolverOptions::default()),
            Err(SvrError::InvalidHyperParams(_))
        ));
    }

    #[test]
    fn iteration_cap_reports_violation() {
        let (x, y) = line_data();
        let hp = SvrHyperParams {
            c: 10.0,
            epsilon: 0.01,
            kernel: KernelSpec::Rbf { gamma: 0.1 },
        };
        let opts = SolverOptions { tol: 1e-12, max_iter: 2 };
        match fit(&x, &y, &hp, &opts) {
            Err(SvrError::NoConvergence {
                iterations,
                max_violation,
            }) => {
                assert_eq!(iterations, 2);
                assert!(max_violation > 0.0);
            }
            other => panic!("expected NoConvergence, got {other:?}"),
        }
    }

    #[test]
    fn constant_model_and_dimension_check() {
        let m = SvrModel {
            support_vectors: vec![],
            dual_coeffs: vec![],
            bias: 2.25,
            hyper: SvrHyperParams {
                c: 1.0,
                epsilon: 0.1,
                kernel: KernelSpec::Linear,
            },
            n_features: 2,
            feature_names: vec!["a".into(), "b".into()],
            diagnostics: None,
        };
        assert_eq!(m.predict(&[5.0, -1.0]).unwrap(), 2.25);
        assert_eq!(
            m.predict(&[5.0]),
            Err(SvrError::DimensionMismatch { expected: 2, got: 1 })
        );
    }

    #[test]
    fn json_round_trip_is_exact() {
        let (x, y) = line_data();
        let hp = SvrHyperParams {
            c: 2.5,
            epsilon: 0.1,
            kernel: KernelSpec::Rbf { gamma: 0.1 },
        };
        let mut m = fit(&x, &y, &hp, &SolverOptions::default()).unwrap();
        m.feature_names = vec!["x (t-1)".into()];
        let text = m.to_json();
        let back = SvrModel::from_json(&text).unwrap();
        assert_eq!(back.support_vectors, m.support_vectors);
        assert_eq!(back.dual_coeffs, m.dual_coeffs);
        assert_eq!(back.bias.to_bits(), m.bias.to_bits());
        assert_eq!(back.hyper, m.hyper);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        for key in ["kernel", "gamma", "C", "epsilon", "support_vectors", "dual_coeffs", "bias", "feature_names"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }

    #[test]
    fn hyperparams_display_matches_report_style() {
        let hp = SvrHyperParams {
            c: 1.5,
            epsilon: 0.1,
            kernel: KernelSpec::Rbf { gamma: 0.1 },
        };
        assert_eq!(hp.to_string(), "C:1.5, epsilon: 0.1, gamma: 0.1, kernel: RBF");
    }
}
