//! Propensity scores, subclassification and subclass-weighted effect estimators.
//!
//! Propensity scores and subclass boundaries come from all of File A and are
//! then frozen. Estimates on any linked subset recompute the subclass weights
//! `lambda_j = n_j / n` from the linked units actually present.

use std::collections::BTreeMap;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::records::RecordId;

pub const IRLS_MAX_ITER: usize = 100;
pub const IRLS_TOL: f64 = 1e-8;
pub const RIDGE: f64 = 1e-6;
/// Relative tolerance for treating a regression column as aliased.
const ALIAS_TOL: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CausalError {
    #[error("treatment has no variation: {treated} treated, {control} control")]
    SingleArm { treated: usize, control: usize },
    #[error("covariate matrix rows disagree: {0}")]
    Shape(String),
    #[error("IRLS did not converge after {iterations} iterations (gradient norm {gradient_norm:e})")]
    NonConvergence { iterations: usize, gradient_norm: f64 },
    #[error("fitted propensity scores reach 0 or 1 (complete separation)")]
    Separation,
    #[error("cannot form {requested} subclasses: {reason}")]
    Subclassing { requested: usize, reason: String },
    #[error("subclass {class} has {n_control} control and {n_treated} treated units; at least {min} of each required")]
    Ineligible {
        class: usize,
        n_control: usize,
        n_treated: usize,
        min: usize,
    },
    #[error("subclass {class} has {n} units; regression needs more than {needed}")]
    TooFewForRegression { class: usize, n: usize, needed: usize },
    #[error("subclass {class}: treatment indicator is collinear with the other regressors")]
    Singular { class: usize },
    #[error("unit assigned to subclass {class} but only {n_classes} exist")]
    UnknownSubclass { class: usize, n_classes: usize },
    #[error("no units to estimate from")]
    Empty,
}

/// Logistic-regression propensity model (intercept first).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropensityModel {
    pub coefficients: Vec<f64>,
    pub scores: Vec<f64>,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Set when the weighted normal equations were singular and a small
    /// ridge penalty was added.
    pub ridge: bool,
}

impl PropensityModel {
    /// Propensity score for a new covariate vector.
    pub fn predict(&self, x: &[f64]) -> f64 {
        let eta = self.coefficients[0] + self.coefficients[1..].iter().zip(x).map(|(b, v)| b * v).sum::<f64>();
        logistic(eta)
    }
}

pub fn logistic(eta: f64) -> f64 {
    1.0 / (1.0 + (-eta).exp())
}

/// `log(1 + exp(x))` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn design_matrix(x: &[Vec<f64>]) -> Result<DMatrix<f64>, CausalError> {
    let p = x.first().map_or(0, Vec::len);
    if let Some(row) = x.iter().position(|r| r.len() != p) {
        return Err(CausalError::Shape(format!(
            "row {row} has {} covariates, expected {p}",
            x[row].len()
        )));
    }
    Ok(DMatrix::from_fn(
        x.len(),
        p + 1,
        |i, j| if j == 0 { 1.0 } else { x[i][j - 1] },
    ))
}

/// Bernoulli log-likelihood of a logistic model.
pub fn log_likelihood(x: &[Vec<f64>], treated: &[bool], beta: &[f64]) -> f64 {
    x.iter()
        .zip(treated)
        .map(|(row, &w)| {
            let eta = beta[0] + beta[1..].iter().zip(row).map(|(b, v)| b * v).sum::<f64>();
            if w {
                -softplus(-eta)
            } else {
                -softplus(eta)
            }
        })
        .sum()
}

fn loglik_eta(eta: &DVector<f64>, w: &DVector<f64>) -> f64 {
    eta.iter().zip(w.iter()).map(|(&e, &t)| t * e - softplus(e)).sum()
}

/// Fits `P(w = 1 | x)` by iteratively reweighted least squares with
/// step-halving, falling back to a small ridge when the weighted normal
/// equations are singular.
pub fn fit_propensity(x: &[Vec<f64>], treated: &[bool]) -> Result<PropensityModel, CausalError> {
    if x.len() != treated.len() {
        return Err(CausalError::Shape(format!(
            "{} covariate rows but {} treatment values",
            x.len(),
            treated.len()
        )));
    }
    let n_treated = treated.iter().filter(|&&t| t).count();
    let n_control = treated.len() - n_treated;
    if n_treated == 0 || n_control == 0 {
        return Err(CausalError::SingleArm {
            treated: n_treated,
            control: n_control,
        });
    }
    let design = design_matrix(x)?;
    let k = design.ncols();
    let w = DVector::from_iterator(treated.len(), treated.iter().map(|&t| if t { 1.0 } else { 0.0 }));
    let mut beta = DVector::<f64>::zeros(k);
    let mut eta = &design * &beta;
    let mut ll = loglik_eta(&eta, &w);
    let mut ridge = false;
    let mut gradient_norm = f64::INFINITY;

    for iter in 0..=IRLS_MAX_ITER {
        let p = eta.map(logistic);
        let gradient = design.tr_mul(&(&w - &p));
        gradient_norm = gradient.norm();
        if gradient_norm < IRLS_TOL {
            let scores: Vec<f64> = p.iter().copied().collect();
            if scores.iter().any(|&s| s <= 0.0 || s >= 1.0) {
                return Err(CausalError::Separation);
            }
            return Ok(PropensityModel {
                coefficients: beta.iter().copied().collect(),
                scores,
                iterations: iter,
                gradient_norm,
                ridge,
            });
        }
        if iter == IRLS_MAX_ITER {
            break;
        }
        let weights = p.map(|v| v * (1.0 - v));
        let weighted = DMatrix::from_fn(design.nrows(), k, |i, j| design[(i, j)] * weights[i]);
        let mut hessian = design.tr_mul(&weighted);
        let step = match hessian.clone().cholesky() {
            Some(ch) => ch.solve(&gradient),
            None => {
                ridge = true;
                for d in 0..k {
                    hessian[(d, d)] += RIDGE;
                }
                match hessian.cholesky() {
                    Some(ch) => ch.solve(&gradient),
                    None => {
                        return Err(CausalError::NonConvergence {
                            iterations: iter,
                            gradient_norm,
                        })
                    }
                }
            }
        };
        // Step-halving until the likelihood does not decrease. Changes below
        // the rounding noise of the summed log-likelihood do not count as a
        // decrease: near the optimum the true gain of a Newton step is far
        // smaller than that noise.
        let slack = 1e-12 * (1.0 + ll.abs());
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let candidate = &beta + &step * scale;
            let cand_eta = &design * &candidate;
            let cand_ll = loglik_eta(&cand_eta, &w);
            if cand_ll >= ll - slack {
                beta = candidate;
                eta = cand_eta;
                ll = cand_ll;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Err(CausalError::NonConvergence {
        iterations: IRLS_MAX_ITER,
        gradient_norm,
    })
}

/// Sample quantile with linear interpolation between order statistics
/// (`(n - 1) * q` positioning). `sorted` must be ascending.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubclassConfig {
    pub subclasses: usize,
    /// Minimum treated and minimum control records per subclass in File A.
    pub min_per_arm: usize,
}

impl Default for SubclassConfig {
    fn default() -> Self {
        SubclassConfig {
            subclasses: 5,
            min_per_arm: 2,
        }
    }
}

/// Propensity-score strata. Class `j` (0-based) holds scores in
/// `(boundaries[j-1], boundaries[j]]`, with the outer classes unbounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subclassification {
    pub boundaries: Vec<f64>,
    pub assignment: BTreeMap<RecordId, usize>,
    /// Number of subclasses asked for before any reduction.
    pub requested: usize,
}

impl Subclassification {
    pub fn from_boundaries(boundaries: Vec<f64>) -> Self {
        let requested = boundaries.len() + 1;
        Subclassification {
            boundaries,
            assignment: BTreeMap::new(),
            requested,
        }
    }

    /// A single class holding everything.
    pub fn single() -> Self {
        Subclassification::from_boundaries(Vec::new())
    }

    pub fn num_classes(&self) -> usize {
        self.boundaries.len() + 1
    }

    pub fn classify(&self, score: f64) -> usize {
        self.boundaries.partition_point(|&b| b < score)
    }

    pub fn class_of(&self, id: RecordId) -> Option<usize> {
        self.assignment.get(&id).copied()
    }
}

/// Splits records at equally spaced propensity quantiles, dropping to fewer
/// subclasses whenever boundaries coincide or a subclass lacks
/// `min_per_arm` treated or control records.
pub fn build_subclasses(
    ids: &[RecordId],
    scores: &[f64],
    treated: &[bool],
    cfg: &SubclassConfig,
) -> Result<Subclassification, CausalError> {
    if ids.len() != scores.len() || ids.len() != treated.len() {
        return Err(CausalError::Shape("ids, scores and treatment differ in length".into()));
    }
    if cfg.subclasses < 2 {
        return Err(CausalError::Subclassing {
            requested: cfg.subclasses,
            reason: "at least two subclasses are required".into(),
        });
    }
    if ids.is_empty() {
        return Err(CausalError::Empty);
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);

    for j in (2..=cfg.subclasses).rev() {
        let boundaries: Vec<f64> = (1..j).map(|k| quantile_sorted(&sorted, k as f64 / j as f64)).collect();
        if boundaries.windows(2).any(|w| w[0] >= w[1]) {
            continue;
        }
        let sub = Subclassification::from_boundaries(boundaries);
        let mut counts = vec![[0usize; 2]; j];
        for (&s, &t) in scores.iter().zip(treated) {
            counts[sub.classify(s)][t as usize] += 1;
        }
        let ok = counts
            .iter()
            .all(|c| c[0] + c[1] > 0 && c[0] >= cfg.min_per_arm && c[1] >= cfg.min_per_arm);
        if !ok {
            continue;
        }
        let assignment = ids.iter().zip(scores).map(|(&id, &s)| (id, sub.classify(s))).collect();
        return Ok(Subclassification {
            assignment,
            requested: cfg.subclasses,
            ..sub
        });
    }
    Err(CausalError::Subclassing {
        requested: cfg.subclasses,
        reason: format!(
            "even two subclasses cannot hold {} treated and {} control records each",
            cfg.min_per_arm, cfg.min_per_arm
        ),
    })
}

/// A File A record joined to the outcome of its linked File B record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkedUnit {
    pub a_id: RecordId,
    pub b_id: RecordId,
    pub covariates: Vec<f64>,
    pub treated: bool,
    pub outcome: f64,
    pub subclass: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDetail {
    pub class: usize,
    pub n_control: usize,
    pub n_treated: usize,
    pub weight: f64,
    /// Difference in means, or the treatment coefficient for the regression estimator.
    pub effect: f64,
    pub effect_var: f64,
    pub s2_control: Option<f64>,
    pub s2_treated: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectEstimate {
    pub tau_hat: f64,
    pub var_hat: f64,
    /// Populated subclasses only.
    pub classes: Vec<ClassDetail>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    /// Subclass differences in means.
    Dim,
    /// Within-subclass OLS of the outcome on covariates and treatment.
    Regression,
}

impl FromStr for EstimatorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dim" => Ok(EstimatorKind::Dim),
            "regression" => Ok(EstimatorKind::Regression),
            other => Err(format!("unknown estimator `{other}` (expected dim or regression)")),
        }
    }
}

impl EstimatorKind {
    pub fn estimate(self, units: &[LinkedUnit], sub: &Subclassification) -> Result<EffectEstimate, CausalError> {
        match self {
            EstimatorKind::Dim => estimate_effect(units, sub),
            EstimatorKind::Regression => estimate_effect_regression(units, sub),
        }
    }
}

fn group_by_class(
    units: &[LinkedUnit],
    n_classes: usize,
    class_of: impl Fn(&LinkedUnit) -> usize,
) -> Result<Vec<Vec<&LinkedUnit>>, CausalError> {
    let mut groups: Vec<Vec<&LinkedUnit>> = vec![Vec::new(); n_classes];
    for u in units {
        let class = class_of(u);
        groups
            .get_mut(class)
            .ok_or(CausalError::UnknownSubclass { class, n_classes })?
            .push(u);
    }
    Ok(groups)
}

/// Mean and (n - 1)-denominator variance. Values are summed in ascending
/// order so the result depends only on the multiset of outcomes.
fn mean_var(values: &mut [f64]) -> (f64, f64) {
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (mean, ss / (n - 1.0))
}

fn combine(mut classes: Vec<ClassDetail>) -> EffectEstimate {
    let n: usize = classes.iter().map(|c| c.n_control + c.n_treated).sum();
    let mut tau_hat = 0.0;
    let mut var_hat = 0.0;
    for c in &mut classes {
        c.weight = (c.n_control + c.n_treated) as f64 / n as f64;
        tau_hat += c.weight * c.effect;
        var_hat += c.weight * c.weight * c.effect_var;
    }
    EffectEstimate {
        tau_hat,
        var_hat,
        classes,
    }
}

fn difference_in_means(
    units: &[LinkedUnit],
    n_classes: usize,
    class_of: impl Fn(&LinkedUnit) -> usize,
) -> Result<EffectEstimate, CausalError> {
    if units.is_empty() {
        return Err(CausalError::Empty);
    }
    let groups = group_by_class(units, n_classes, class_of)?;
    let mut classes = Vec::new();
    for (class, members) in groups.iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        let mut control: Vec<f64> = members.iter().filter(|u| !u.treated).map(|u| u.outcome).collect();
        let mut treated: Vec<f64> = members.iter().filter(|u| u.treated).map(|u| u.outcome).collect();
        if control.len() < 2 || treated.len() < 2 {
            return Err(CausalError::Ineligible {
                class,
                n_control: control.len(),
                n_treated: treated.len(),
                min: 2,
            });
        }
        let (m0, s0) = mean_var(&mut control);
        let (m1, s1) = mean_var(&mut treated);
        classes.push(ClassDetail {
            class,
            n_control: control.len(),
            n_treated: treated.len(),
            weight: 0.0,
            effect: m1 - m0,
            effect_var: s0 / control.len() as f64 + s1 / treated.len() as f64,
            s2_control: Some(s0),
            s2_treated: Some(s1),
        });
    }
    Ok(combine(classes))
}

/// Subclass-weighted difference in means and its variance
/// `sum lambda_j^2 (s0^2 / n0 + s1^2 / n1)`.
///
/// Every populated subclass needs at least two treated and two control units.
pub fn estimate_effect(units: &[LinkedUnit], sub: &Subclassification) -> Result<EffectEstimate, CausalError> {
    difference_in_means(units, sub.num_classes(), |u| u.subclass)
}

/// Difference in marginal means with its two-sample variance: the
/// subclassified estimator with one all-encompassing class.
pub fn marginal_effect(units: &[LinkedUnit]) -> Result<EffectEstimate, CausalError> {
    difference_in_means(units, 1, |_| 0)
}

/// Result of one within-subclass least-squares fit.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    /// Coefficients of the retained columns, in design order.
    pub coefficients: Vec<f64>,
    /// Which design columns were kept (aliased covariates are dropped).
    pub retained: Vec<usize>,
    pub residual_var: f64,
    /// Estimated variance of the last retained coefficient.
    pub last_coef_var: f64,
}

/// Greedy column screening: keeps a column unless it is numerically a
/// linear combination of the columns already kept.
fn screen_columns(x: &DMatrix<f64>) -> Vec<usize> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut kept = Vec::new();
    for j in 0..x.ncols() {
        let col = x.column(j).clone_owned();
        let norm = col.norm();
        if norm == 0.0 {
            continue;
        }
        let mut r = col.clone();
        for _ in 0..2 {
            for q in &basis {
                let proj = q.dot(&r);
                r -= q * proj;
            }
        }
        let rn = r.norm();
        if rn > ALIAS_TOL * norm {
            basis.push(r / rn);
            kept.push(j);
        }
    }
    kept
}

/// OLS via Householder QR on the screened design. The last design column is
/// the one whose coefficient variance is reported; `None` if it was aliased.
pub fn ols_last_coefficient(x: &DMatrix<f64>, y: &DVector<f64>) -> Option<OlsFit> {
    let retained = screen_columns(x);
    let last = x.ncols() - 1;
    if retained.last() != Some(&last) {
        return None;
    }
    let xr = x.select_columns(&retained);
    let (n, k) = xr.shape();
    if n <= k {
        return None;
    }
    let qr = xr.clone().qr();
    let r = qr.r();
    let qty = qr.q().tr_mul(y);
    let beta = r.solve_upper_triangular(&qty)?;
    let resid = y - &xr * &beta;
    let residual_var = resid.norm_squared() / (n - k) as f64;
    let r_inv = r.try_inverse()?;
    // (X'X)^-1 = R^-1 R^-T, so its last diagonal entry is the squared norm
    // of the last row of R^-1.
    let last_coef_var = residual_var * r_inv.row(k - 1).norm_squared();
    Some(OlsFit {
        coefficients: beta.iter().copied().collect(),
        retained,
        residual_var,
        last_coef_var,
    })
}

/// Subclass-weighted treatment coefficients from per-subclass OLS of the
/// outcome on an intercept, all covariates and the treatment indicator.
///
/// Covariates that are constant (or collinear) within a subclass are
/// dropped from that subclass's regression.
pub fn estimate_effect_regression(
    units: &[LinkedUnit],
    sub: &Subclassification,
) -> Result<EffectEstimate, CausalError> {
    if units.is_empty() {
        return Err(CausalError::Empty);
    }
    let p = units[0].covariates.len();
    let groups = group_by_class(units, sub.num_classes(), |u| u.subclass)?;
    let mut classes = Vec::new();
    for (class, members) in groups.iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        let n = members.len();
        if n <= p + 2 {
            return Err(CausalError::TooFewForRegression {
                class,
                n,
                needed: p + 2,
            });
        }
        let x = DMatrix::from_fn(n, p + 2, |i, j| match j {
            0 => 1.0,
            j if j <= p => members[i].covariates[j - 1],
            _ => {
                if members[i].treated {
                    1.0
                } else {
                    0.0
                }
            }
        });
        let y = DVector::from_iterator(n, members.iter().map(|u| u.outcome));
        let fit = ols_last_coefficient(&x, &y).ok_or(CausalError::Singular { class })?;
        let n_treated = members.iter().filter(|u| u.treated).count();
        classes.push(ClassDetail {
            class,
            n_control: n - n_treated,
            n_treated,
            weight: 0.0,
            effect: *fit.coefficients.last().expect("treatment column retained"),
            effect_var: fit.last_coef_var,
            s2_control: None,
            s2_treated: None,
        });
    }
    Ok(combine(classes))
}

/// Per-subclass inputs to the approximate expected variance of the
/// subclassified estimator under a mixture of correct and incorrect links.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectedVarianceClass {
    /// Probability that a link in this subclass is correct.
    pub p_correct: f64,
    /// Outcome variance among correct links, control and treated.
    pub s2_control: f64,
    pub s2_treated: f64,
    /// Outcome variance among incorrect links, control and treated.
    pub sigma2_control: f64,
    pub sigma2_treated: f64,
    /// Outcome means among correct links.
    pub mu_control: f64,
    pub mu_treated: f64,
    /// Outcome means among incorrect links.
    pub mu_err_control: f64,
    pub mu_err_treated: f64,
    pub n_control: f64,
    pub n_treated: f64,
}

impl ExpectedVarianceClass {
    /// Approximate `E[var-hat(tau_j)]` for this subclass.
    pub fn expected_variance(&self) -> f64 {
        let p = self.p_correct;
        let correct = p * (self.s2_control / self.n_control + self.s2_treated / self.n_treated);
        let incorrect = (1.0 - p) * (self.sigma2_control / self.n_control + self.sigma2_treated / self.n_treated);
        let shift0 = (self.mu_control - self.mu_err_control) / self.n_control;
        let shift1 = (self.mu_treated - self.mu_err_treated) / self.n_treated;
        let penalty = (shift0 * shift0 + shift1 * shift1) * p * (1.0 - p);
        correct + incorrect + penalty
    }
}

/// `sum_j lambda_j^2 E[var-hat(tau_j)]`.
pub fn expected_variance_approx(classes: &[ExpectedVarianceClass], weights: &[f64]) -> f64 {
    classes
        .iter()
        .zip(weights)
        .map(|(c, &l)| l * l * c.expected_variance())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(treated: bool, outcome: f64, subclass: usize) -> LinkedUnit {
        LinkedUnit {
            a_id: 0,
            b_id: 0,
            covariates: vec![],
            treated,
            outcome,
            subclass,
        }
    }

    #[test]
    fn intercept_only_balanced() {
        let x = vec![vec![]; 100];
        let w: Vec<bool> = (0..100).map(|i| i < 50).collect();
        let m = fit_propensity(&x, &w).unwrap();
        assert!(m.coefficients[0].abs() < 1e-12);
        assert!(m.scores.iter().all(|&s| (s - 0.5).abs() < 1e-12));
    }

    #[test]
    fn intercept_only_quarter() {
        let x = vec![vec![]; 100];
        let w: Vec<bool> = (0..100).map(|i| i < 25).collect();
        let m = fit_propensity(&x, &w).unwrap();
        assert!((m.coefficients[0] - (1.0f64 / 3.0).ln()).abs() < 1e-10);
        assert!(m.scores.iter().all(|&s| (s - 0.25).abs() < 1e-10));
        assert!(m.gradient_norm < IRLS_TOL);
    }

    #[test]
    fn single_arm_is_an_error() {
        let x = vec![vec![1.0]; 5];
        assert!(matches!(
            fit_propensity(&x, &[true; 5]),
            Err(CausalError::SingleArm { treated: 5, control: 0 })
        ));
    }

    #[test]
    fn separation_is_reported() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let w: Vec<bool> = (0..20).map(|i| i >= 10).collect();
        assert!(fit_propensity(&x, &w).is_err());
    }

    #[test]
    fn ridge_fallback_on_collinear_covariates() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![(i % 7) as f64, 2.0 * (i % 7) as f64]).collect();
        let w: Vec<bool> = (0..40).map(|i| (i * 3) % 5 < 2).collect();
        let m = fit_propensity(&x, &w).unwrap();
        assert!(m.ridge);
    }

    #[test]
    fn quintiles_of_ten_scores() {
        let ids: Vec<RecordId> = (1..=10).collect();
        let scores: Vec<f64> = (1..=10).map(|v| v as f64 / 11.0).collect();
        let treated: Vec<bool> = (0..10).map(|i| i % 2 == 0).collect();
        let cfg = SubclassConfig {
            subclasses: 5,
            min_per_arm: 1,
        };
        let sub = build_subclasses(&ids, &scores, &treated, &cfg).unwrap();
        assert_eq!(sub.num_classes(), 5);
        let mut sizes = [0; 5];
        for c in sub.assignment.values() {
            sizes[*c] += 1;
        }
        assert_eq!(sizes, [2; 5]);
        assert_eq!(sub.class_of(1), Some(0));
        assert_eq!(sub.class_of(10), Some(4));
    }

    #[test]
    fn heavy_ties_reduce_subclass_count() {
        let ids: Vec<RecordId> = (0..20).collect();
        let scores: Vec<f64> = (0..20)
            .map(|i| if i < 14 { 0.3 } else { 0.3 + i as f64 / 100.0 })
            .collect();
        let treated: Vec<bool> = (0..20).map(|i| i % 2 == 0).collect();
        let sub = build_subclasses(&ids, &scores, &treated, &SubclassConfig::default()).unwrap();
        assert!(sub.num_classes() < 5);
        assert!(sub.boundaries.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn impossible_subclassing() {
        let ids: Vec<RecordId> = (0..3).collect();
        let err = build_subclasses(&ids, &[0.1, 0.2, 0.3], &[true, false, true], &SubclassConfig::default());
        assert!(matches!(err, Err(CausalError::Subclassing { .. })));
    }

    #[test]
    fn one_class_hand_example() {
        let units = vec![
            unit(true, 12.0, 0),
            unit(true, 14.0, 0),
            unit(false, 1.0, 0),
            unit(false, 3.0, 0),
        ];
        let est = estimate_effect(&units, &Subclassification::single()).unwrap();
        assert_eq!(est.tau_hat, 11.0);
        assert_eq!(est.var_hat, 2.0);
        let marg = marginal_effect(&units).unwrap();
        assert_eq!(marg, est);
    }

    #[test]
    fn two_class_weighted_average() {
        // Class 0: 4 units with effect 2; class 1: 6 units with effect 5.
        let mut units = vec![
            unit(true, 3.0, 0),
            unit(true, 5.0, 0),
            unit(false, 1.0, 0),
            unit(false, 3.0, 0),
        ];
        units.extend([
            unit(true, 6.0, 1),
            unit(true, 7.0, 1),
            unit(true, 8.0, 1),
            unit(false, 1.0, 1),
            unit(false, 2.0, 1),
            unit(false, 3.0, 1),
        ]);
        let est = estimate_effect(&units, &Subclassification::from_boundaries(vec![0.5])).unwrap();
        assert!((est.classes[0].weight - 0.4).abs() < 1e-15);
        assert!((est.tau_hat - 3.8).abs() < 1e-12);
    }

    #[test]
    fn constant_outcomes() {
        let units: Vec<_> = (0..6).map(|i| unit(i % 2 == 0, 4.2, 0)).collect();
        let est = estimate_effect(&units, &Subclassification::single()).unwrap();
        assert_eq!(est.tau_hat, 0.0);
        assert_eq!(est.var_hat, 0.0);
    }

    #[test]
    fn empty_subclass_is_skipped_and_weights_renormalize() {
        let units = vec![
            unit(true, 1.0, 2),
            unit(true, 2.0, 2),
            unit(false, 0.0, 2),
            unit(false, 1.0, 2),
        ];
        let est = estimate_effect(&units, &Subclassification::from_boundaries(vec![0.2, 0.4])).unwrap();
        assert_eq!(est.classes.len(), 1);
        assert_eq!(est.classes[0].weight, 1.0);
    }

    #[test]
    fn thin_arm_is_ineligible() {
        let units = vec![unit(true, 1.0, 0), unit(true, 2.0, 0), unit(false, 0.0, 0)];
        assert!(matches!(
            estimate_effect(&units, &Subclassification::single()),
            Err(CausalError::Ineligible { n_control: 1, .. })
        ));
    }

    #[test]
    fn regression_with_constant_covariates_is_difference_in_means() {
        let mut units: Vec<LinkedUnit> = [
            (true, 5.0),
            (true, 7.0),
            (true, 6.0),
            (false, 1.0),
            (false, 2.0),
            (false, 4.5),
        ]
        .iter()
        .map(|&(t, y)| unit(t, y, 0))
        .collect();
        for u in &mut units {
            u.covariates = vec![3.0, -1.0];
        }
        let sub = Subclassification::single();
        let reg = estimate_effect_regression(&units, &sub).unwrap();
        let dim = estimate_effect(&units, &sub).unwrap();
        assert!((reg.tau_hat - dim.tau_hat).abs() < 1e-12);
    }

    #[test]
    fn regression_singular_treatment() {
        let units: Vec<LinkedUnit> = (0..6)
            .map(|i| LinkedUnit {
                covariates: vec![i as f64],
                ..unit(true, i as f64, 0)
            })
            .collect();
        assert!(matches!(
            estimate_effect_regression(&units, &Subclassification::single()),
            Err(CausalError::Singular { class: 0 })
        ));
    }

    #[test]
    fn expected_variance_limits() {
        let base = ExpectedVarianceClass {
            p_correct: 1.0,
            s2_control: 4.0,
            s2_treated: 9.0,
            sigma2_control: 100.0,
            sigma2_treated: 400.0,
            mu_control: 10.0,
            mu_treated: 60.0,
            mu_err_control: 30.0,
            mu_err_treated: 20.0,
            n_control: 4.0,
            n_treated: 3.0,
        };
        let weights = [0.25, 0.75];
        let all_correct = expected_variance_approx(&[base, base], &weights);
        let expect = (0.25f64.powi(2) + 0.75f64.powi(2)) * (4.0 / 4.0 + 9.0 / 3.0);
        assert!((all_correct - expect).abs() < 1e-12);

        let wrong = ExpectedVarianceClass { p_correct: 0.0, ..base };
        let v = expected_variance_approx(&[wrong], &[1.0]);
        assert!((v - (100.0 / 4.0 + 400.0 / 3.0)).abs() < 1e-12);
    }
}
