//! Nested candidate link sets and the three threshold stopping rules.
//!
//! `L_0` holds the certainty links (every field agrees). The remaining top
//! links are appended one at a time in descending score order, giving
//! `L_0 ⊆ L_1 ⊆ … ⊆ L_L`. Each set is evaluated with frozen propensity
//! subclasses and a rule picks one:
//!
//! * MEV — smallest estimated variance.
//! * ETSR — smallest estimated variance among sets whose estimate lies
//!   within `k` standard errors of the `L_0` estimate.
//! * MEDOV — smallest variance of the raw difference in means; the
//!   subclassified estimate of the chosen set is reported.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::causal::{marginal_effect, EstimatorKind, LinkedUnit, Subclassification};
use crate::linkage::{ranking_order, ScoredPair};
use crate::records::{RecordA, RecordB, RecordId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SelectionError {
    #[error("{rule}: no candidate set is eligible")]
    NoEligible { rule: Rule },
    #[error("ETSR: the certainty set L_0 is not estimable, so there is no anchor")]
    NoAnchor,
    #[error("tether k must be positive and finite, got {0}")]
    InvalidTether(f64),
    #[error("linked pair references unknown record {side} {id}")]
    UnknownRecord { side: &'static str, id: RecordId },
    #[error("File A record {0} has no subclass")]
    Unclassified(RecordId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Rule {
    #[serde(rename = "MEV")]
    Mev,
    #[serde(rename = "ETSR")]
    Etsr,
    #[serde(rename = "MEDOV")]
    Medov,
}

impl Rule {
    pub const ALL: [Rule; 3] = [Rule::Mev, Rule::Etsr, Rule::Medov];

    pub fn name(self) -> &'static str {
        match self {
            Rule::Mev => "MEV",
            Rule::Etsr => "ETSR",
            Rule::Medov => "MEDOV",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Rule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mev" => Ok(Rule::Mev),
            "etsr" => Ok(Rule::Etsr),
            "medov" => Ok(Rule::Medov),
            _ => Err(format!("unknown rule `{s}` (expected mev, etsr or medov)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TetherConfig {
    pub k: f64,
}

impl Default for TetherConfig {
    fn default() -> Self {
        TetherConfig { k: 0.5 }
    }
}

impl TetherConfig {
    pub fn new(k: f64) -> Result<Self, SelectionError> {
        if k > 0.0 && k.is_finite() {
            Ok(TetherConfig { k })
        } else {
            Err(SelectionError::InvalidTether(k))
        }
    }
}

/// Certainty links plus the ordered tail of remaining top links.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSequence {
    pub l0: Vec<ScoredPair>,
    pub tail: Vec<ScoredPair>,
    pub floor: f64,
}

/// Splits per-record top links into `L_0` and a descending-score tail.
/// Ties in score are broken by File A id, then File B id.
pub fn build_candidate_sequence(pairs: &[ScoredPair], l0: &[ScoredPair], floor: f64) -> CandidateSequence {
    let certain: HashSet<(RecordId, RecordId)> = l0.iter().map(ScoredPair::key).collect();
    let mut l0 = l0.to_vec();
    l0.sort_by(ranking_order);
    let mut tail: Vec<ScoredPair> = pairs
        .iter()
        .filter(|p| !certain.contains(&p.key()) && p.score >= floor)
        .copied()
        .collect();
    tail.sort_by(ranking_order);
    CandidateSequence { l0, tail, floor }
}

impl CandidateSequence {
    /// Largest rank `L`; valid ranks are `0..=L`.
    pub fn max_h(&self) -> usize {
        self.tail.len()
    }

    /// Size of `L_h`.
    pub fn set_size(&self, h: usize) -> usize {
        self.l0.len() + h
    }

    pub fn set(&self, h: usize) -> impl Iterator<Item = &ScoredPair> {
        self.l0.iter().chain(&self.tail[..h])
    }

    /// Score of the last pair added to reach `L_h`; for `h = 0`, the lowest
    /// certainty-link score (`None` when `L_0` is empty).
    pub fn threshold(&self, h: usize) -> Option<f64> {
        if h == 0 {
            self.l0.iter().map(|p| p.score).min_by(f64::total_cmp)
        } else {
            Some(self.tail[h - 1].score)
        }
    }

    /// Joins every pair in `L_L` to its records, `L_0` first then the tail
    /// in order, so `L_h` is the prefix of length `set_size(h)`.
    pub fn units(
        &self,
        a: &[RecordA],
        b: &[RecordB],
        sub: &Subclassification,
    ) -> Result<Vec<LinkedUnit>, SelectionError> {
        let a_by_id: HashMap<RecordId, &RecordA> = a.iter().map(|r| (r.id, r)).collect();
        let b_by_id: HashMap<RecordId, &RecordB> = b.iter().map(|r| (r.id, r)).collect();
        self.set(self.max_h())
            .map(|p| {
                let ra = a_by_id
                    .get(&p.a_id)
                    .ok_or(SelectionError::UnknownRecord { side: "A", id: p.a_id })?;
                let rb = b_by_id
                    .get(&p.b_id)
                    .ok_or(SelectionError::UnknownRecord { side: "B", id: p.b_id })?;
                let subclass = sub.class_of(p.a_id).ok_or(SelectionError::Unclassified(p.a_id))?;
                Ok(LinkedUnit {
                    a_id: p.a_id,
                    b_id: p.b_id,
                    covariates: ra.covariates.clone(),
                    treated: ra.treated,
                    outcome: rb.outcome,
                    subclass,
                })
            })
            .collect()
    }
}

/// Estimates for one candidate set `L_h`. `None` marks a set on which the
/// estimator is undefined (a subclass or arm too small).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderPoint {
    pub h: usize,
    pub n_links: usize,
    pub threshold: Option<f64>,
    pub tau_hat: Option<f64>,
    pub var_hat: Option<f64>,
    pub marginal_tau: Option<f64>,
    pub marginal_var: Option<f64>,
}

impl LadderPoint {
    pub fn eligible(&self) -> bool {
        self.tau_hat.is_some() && self.var_hat.is_some()
    }
}

/// Evaluates the subclassified and marginal estimators on every `L_h`,
/// recomputing subclass weights from the linked units each time.
/// `units` must come from [`CandidateSequence::units`].
pub fn evaluate_ladder(
    seq: &CandidateSequence,
    units: &[LinkedUnit],
    estimator: EstimatorKind,
    sub: &Subclassification,
) -> Vec<LadderPoint> {
    assert_eq!(
        units.len(),
        seq.set_size(seq.max_h()),
        "units do not match the candidate sequence"
    );
    (0..=seq.max_h())
        .into_par_iter()
        .map(|h| {
            let set = &units[..seq.set_size(h)];
            let est = estimator.estimate(set, sub).ok();
            let marg = marginal_effect(set).ok();
            LadderPoint {
                h,
                n_links: set.len(),
                threshold: seq.threshold(h),
                tau_hat: est.as_ref().map(|e| e.tau_hat),
                var_hat: est.as_ref().map(|e| e.var_hat),
                marginal_tau: marg.as_ref().map(|e| e.tau_hat),
                marginal_var: marg.as_ref().map(|e| e.var_hat),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub h: usize,
    pub criterion: Option<f64>,
    pub eligible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub rule: Rule,
    pub h: usize,
    pub n_links: usize,
    pub threshold: Option<f64>,
    pub criterion: f64,
    pub tau_hat: f64,
    pub var_hat: f64,
    /// ETSR's closed acceptance interval.
    pub band: Option<(f64, f64)>,
    pub trace: Vec<TracePoint>,
}

/// Index of the smallest criterion among eligible points; ties go to the
/// smaller `h`.
fn argmin(trace: &[TracePoint]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, t) in trace.iter().enumerate() {
        if !t.eligible {
            continue;
        }
        let c = t.criterion.expect("eligible points carry a criterion");
        if best.is_none_or(|(_, b)| c < b) {
            best = Some((i, c));
        }
    }
    best.map(|(i, _)| i)
}

fn finish(
    rule: Rule,
    points: &[LadderPoint],
    trace: Vec<TracePoint>,
    band: Option<(f64, f64)>,
) -> Result<Selection, SelectionError> {
    let i = argmin(&trace).ok_or(SelectionError::NoEligible { rule })?;
    let p = &points[i];
    Ok(Selection {
        rule,
        h: p.h,
        n_links: p.n_links,
        threshold: p.threshold,
        criterion: trace[i].criterion.expect("chosen point is eligible"),
        tau_hat: p.tau_hat.expect("chosen point is estimable"),
        var_hat: p.var_hat.expect("chosen point is estimable"),
        band,
        trace,
    })
}

pub fn select_mev(points: &[LadderPoint]) -> Result<Selection, SelectionError> {
    let trace = points
        .iter()
        .map(|p| TracePoint {
            h: p.h,
            criterion: p.var_hat,
            eligible: p.eligible(),
        })
        .collect();
    finish(Rule::Mev, points, trace, None)
}

/// The anchor is the first point, which must be `L_0`.
pub fn select_etsr(points: &[LadderPoint], tether: &TetherConfig) -> Result<Selection, SelectionError> {
    let anchor = points
        .first()
        .filter(|p| p.h == 0 && p.eligible())
        .ok_or(SelectionError::NoAnchor)?;
    let (tau0, var0) = (anchor.tau_hat.unwrap(), anchor.var_hat.unwrap());
    let half = tether.k * var0.sqrt();
    let band = (tau0 - half, tau0 + half);
    let trace = points
        .iter()
        .map(|p| {
            let inside = p.h == 0 || p.tau_hat.is_some_and(|t| band.0 <= t && t <= band.1);
            TracePoint {
                h: p.h,
                criterion: p.var_hat,
                eligible: p.eligible() && inside,
            }
        })
        .collect();
    finish(Rule::Etsr, points, trace, Some(band))
}

/// Minimises the marginal (single-class) variance over sets on which both
/// the marginal and the subclassified estimators are defined.
pub fn select_medov(points: &[LadderPoint]) -> Result<Selection, SelectionError> {
    let trace = points
        .iter()
        .map(|p| TracePoint {
            h: p.h,
            criterion: p.marginal_var,
            eligible: p.marginal_var.is_some() && p.eligible(),
        })
        .collect();
    finish(Rule::Medov, points, trace, None)
}

pub fn select(rule: Rule, points: &[LadderPoint], tether: &TetherConfig) -> Result<Selection, SelectionError> {
    match rule {
        Rule::Mev => select_mev(points),
        Rule::Etsr => select_etsr(points, tether),
        Rule::Medov => select_medov(points),
    }
}
