//! Monte Carlo experiments: generate → link → subclassify → select →
//! estimate, repeated over independent replications and summarised.
//!
//! Replications draw from their own random streams, so the results are the
//! same whether they run serially or in parallel.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::causal::{
    build_subclasses, fit_propensity, marginal_effect, EstimatorKind, ExpectedVarianceClass, LinkedUnit,
    PropensityModel, SubclassConfig, Subclassification,
};
use crate::linkage::{
    known_links, link, link_quality, link_rate_at, LinkQualityRow, LinkageConfig, ScorerKind, TruthTable,
};
use crate::records::{Field, RecordA, RecordB, RecordId};
use crate::rng::{stream, Purpose};
use crate::selection::{
    build_candidate_sequence, evaluate_ladder, select, select_etsr, LadderPoint, Rule, TetherConfig,
};
use crate::simgen::{
    generate_corpus, generate_dataset, Corpus, CorpusConfig, GroundTruth, ScenarioConfig, SimError, TypoModel,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("replication {replication}: {message}")]
    Replication { replication: u64, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    pub fn is_config(&self) -> bool {
        matches!(self, HarnessError::Config(_) | HarnessError::Sim(SimError::Config(_)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub corpus: CorpusConfig,
    pub scenario: ScenarioConfig,
    pub linkage: LinkageConfig,
    pub subclass: SubclassConfig,
    pub estimator: EstimatorKind,
    pub rules: Vec<Rule>,
    pub tether: TetherConfig,
    /// Extra ETSR tethers evaluated on every replication.
    pub etsr_sweep: Vec<f64>,
    pub replications: usize,
    pub seed: u64,
    /// Worker threads; 0 uses rayon's default.
    pub jobs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            corpus: CorpusConfig::default(),
            scenario: ScenarioConfig::default(),
            linkage: LinkageConfig::default(),
            subclass: SubclassConfig::default(),
            estimator: EstimatorKind::Dim,
            rules: Rule::ALL.to_vec(),
            tether: TetherConfig::default(),
            etsr_sweep: Vec::new(),
            replications: 100,
            seed: 20240101,
            jobs: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        self.corpus.validate()?;
        self.scenario.validate()?;
        if self.replications == 0 {
            return Err(HarnessError::Config("replications must be at least 1".into()));
        }
        if self.subclass.subclasses < 2 {
            return Err(HarnessError::Config("subclasses must be at least 2".into()));
        }
        if !(self.linkage.theta_m > 0.0 && self.linkage.theta_m < 1.0) {
            return Err(HarnessError::Config(format!(
                "theta_m {} outside (0, 1)",
                self.linkage.theta_m
            )));
        }
        TetherConfig::new(self.tether.k).map_err(|e| HarnessError::Config(e.to_string()))?;
        for &k in &self.etsr_sweep {
            TetherConfig::new(k).map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// Parses the flat TOML experiment format; see [`ExperimentFile`].
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let file: ExperimentFile = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        file.into_config()
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_toml(&text)
    }
}

/// Flat key/value experiment file. Every key is optional; missing keys take
/// the defaults of [`ExperimentConfig`].
///
/// ```toml
/// replications = 100
/// seed = 7
/// scenario = "linear"   # linear | linear-highR2 | nonlinear
/// tau = 50.0
/// sigma = 10.0
/// scorer = "fs"         # fs | avg-jw
/// estimator = "dim"     # dim | regression
/// rules = ["mev", "etsr", "medov"]
/// etsr_k = 0.5
/// etsr_sweep = [0.1, 0.5, 1.0, 2.0, 3.0]
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub replications: Option<usize>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub n_persons: Option<usize>,
    pub n_duplicates: Option<usize>,
    pub n_a: Option<usize>,
    pub n_b: Option<usize>,
    pub first_name_zipf: Option<f64>,
    pub last_name_zipf: Option<f64>,
    pub year_min: Option<i32>,
    pub year_max: Option<i32>,
    pub typo_substitution: Option<f64>,
    pub typo_transposition: Option<f64>,
    pub typo_insertion: Option<f64>,
    pub typo_deletion: Option<f64>,
    pub typo_max_edits: Option<usize>,
    pub typo_digit_swap: Option<f64>,
    pub typo_off_by_one: Option<f64>,
    pub typo_replace: Option<f64>,
    /// `0` removes the per-record field cap.
    pub typo_max_fields: Option<usize>,
    pub scenario: Option<String>,
    pub tau: Option<f64>,
    pub sigma: Option<f64>,
    pub scorer: Option<String>,
    pub theta_m: Option<f64>,
    pub jw_cutoff: Option<f64>,
    pub floor: Option<f64>,
    pub block_field: Option<String>,
    pub subclasses: Option<usize>,
    pub min_per_arm: Option<usize>,
    pub estimator: Option<String>,
    pub rules: Option<Vec<String>>,
    pub etsr_k: Option<f64>,
    pub etsr_sweep: Option<Vec<f64>>,
}

impl ExperimentFile {
    pub fn into_config(self) -> Result<ExperimentConfig, HarnessError> {
        let d = ExperimentConfig::default();
        let t = d.corpus.typo;
        let cfg_err = HarnessError::Config;
        let typo = TypoModel {
            substitution: self.typo_substitution.unwrap_or(t.substitution),
            transposition: self.typo_transposition.unwrap_or(t.transposition),
            insertion: self.typo_insertion.unwrap_or(t.insertion),
            deletion: self.typo_deletion.unwrap_or(t.deletion),
            max_edits: self.typo_max_edits.unwrap_or(t.max_edits),
            digit_swap: self.typo_digit_swap.unwrap_or(t.digit_swap),
            off_by_one: self.typo_off_by_one.unwrap_or(t.off_by_one),
            replace: self.typo_replace.unwrap_or(t.replace),
            max_fields: match self.typo_max_fields {
                Some(0) => None,
                Some(n) => Some(n),
                None => t.max_fields,
            },
        };
        let corpus = CorpusConfig {
            n_persons: self.n_persons.unwrap_or(d.corpus.n_persons),
            n_duplicates: self.n_duplicates.unwrap_or(d.corpus.n_duplicates),
            n_a: self.n_a.unwrap_or(d.corpus.n_a),
            n_b: self.n_b.unwrap_or(d.corpus.n_b),
            typo,
            first_name_zipf: self.first_name_zipf.unwrap_or(d.corpus.first_name_zipf),
            last_name_zipf: self.last_name_zipf.unwrap_or(d.corpus.last_name_zipf),
            year_min: self.year_min.unwrap_or(d.corpus.year_min),
            year_max: self.year_max.unwrap_or(d.corpus.year_max),
        };
        let scenario = ScenarioConfig {
            scenario: match self.scenario {
                Some(s) => s.parse().map_err(cfg_err)?,
                None => d.scenario.scenario,
            },
            tau: self.tau.unwrap_or(d.scenario.tau),
            sigma: self.sigma.unwrap_or(d.scenario.sigma),
        };
        let scorer: ScorerKind = match self.scorer {
            Some(s) => s.parse().map_err(cfg_err)?,
            None => d.linkage.scorer,
        };
        let block_field: Field = match self.block_field {
            Some(s) => s
                .parse()
                .map_err(|e: crate::records::RecordsError| cfg_err(e.to_string()))?,
            None => d.linkage.block_field,
        };
        let linkage = LinkageConfig {
            scorer,
            theta_m: self.theta_m.unwrap_or(d.linkage.theta_m),
            jw_cutoff: self.jw_cutoff.unwrap_or(d.linkage.jw_cutoff),
            floor: self.floor,
            block_field,
            jaro: d.linkage.jaro,
        };
        let subclass = SubclassConfig {
            subclasses: self.subclasses.unwrap_or(d.subclass.subclasses),
            min_per_arm: self.min_per_arm.unwrap_or(d.subclass.min_per_arm),
        };
        let estimator = match self.estimator {
            Some(s) => s.parse().map_err(cfg_err)?,
            None => d.estimator,
        };
        let rules = match self.rules {
            Some(list) => list
                .iter()
                .map(|r| r.parse())
                .collect::<Result<Vec<Rule>, _>>()
                .map_err(cfg_err)?,
            None => d.rules,
        };
        let cfg = ExperimentConfig {
            corpus,
            scenario,
            linkage,
            subclass,
            estimator,
            rules,
            tether: TetherConfig {
                k: self.etsr_k.unwrap_or(d.tether.k),
            },
            etsr_sweep: self.etsr_sweep.unwrap_or_default(),
            replications: self.replications.unwrap_or(d.replications),
            seed: self.seed.unwrap_or(d.seed),
            jobs: self.jobs.unwrap_or(d.jobs),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    Perfect,
    Known,
    #[serde(rename = "MEV")]
    Mev,
    #[serde(rename = "ETSR")]
    Etsr,
    #[serde(rename = "MEDOV")]
    Medov,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Perfect => "Perfect",
            Method::Known => "Known",
            Method::Mev => "MEV",
            Method::Etsr => "ETSR",
            Method::Medov => "MEDOV",
        }
    }
}

impl From<Rule> for Method {
    fn from(r: Rule) -> Self {
        match r {
            Rule::Mev => Method::Mev,
            Rule::Etsr => Method::Etsr,
            Rule::Medov => Method::Medov,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Counts of links by how a false link relates to the record it displaced:
/// whether the File B record's true person falls in the same subclass and
/// has the same treatment as the File A record it was linked to.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Taxonomy {
    pub true_links: usize,
    pub same_class_same_treatment: usize,
    pub same_class_other_treatment: usize,
    pub other_class_same_treatment: usize,
    pub other_class_other_treatment: usize,
}

impl Taxonomy {
    pub fn false_links(&self) -> usize {
        self.same_class_same_treatment
            + self.same_class_other_treatment
            + self.other_class_same_treatment
            + self.other_class_other_treatment
    }

    pub fn total(&self) -> usize {
        self.true_links + self.false_links()
    }
}

/// Classifies each linked unit as a true link or one of four kinds of false
/// link. A File B record whose person is absent from File A is placed using
/// that person's simulated covariates and the fitted propensity model.
pub fn error_taxonomy(
    units: &[LinkedUnit],
    truth: &GroundTruth,
    sub: &Subclassification,
    model: &PropensityModel,
) -> Taxonomy {
    let mut t = Taxonomy::default();
    for u in units {
        let Some(person) = truth.unit_of_b(u.b_id) else {
            continue;
        };
        if person.a_id == Some(u.a_id) {
            t.true_links += 1;
            continue;
        }
        let (class, treated) = match person.a_id.and_then(|a| sub.class_of(a)) {
            Some(c) => (c, person.covariates.treated),
            None => {
                let score = model.predict(&[person.covariates.x1, person.covariates.x2]);
                (sub.classify(score), person.covariates.treated)
            }
        };
        match (class == u.subclass, treated == u.treated) {
            (true, true) => t.same_class_same_treatment += 1,
            (true, false) => t.same_class_other_treatment += 1,
            (false, true) => t.other_class_same_treatment += 1,
            (false, false) => t.other_class_other_treatment += 1,
        }
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: Method,
    pub tau_hat: f64,
    pub var_hat: f64,
    pub threshold: Option<f64>,
    /// Ladder rank of the chosen set (`None` for Perfect).
    pub h: Option<usize>,
    pub n_links: usize,
    pub taxonomy: Taxonomy,
}

/// One step of the candidate ladder with the approximate expected variance
/// computed from the known truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub h: usize,
    pub n_links: usize,
    pub threshold: Option<f64>,
    pub tau_hat: Option<f64>,
    pub var_hat: Option<f64>,
    pub marginal_tau: Option<f64>,
    pub marginal_var: Option<f64>,
    pub expected_var: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub k: f64,
    pub h: usize,
    pub tau_hat: f64,
    pub anchor_tau: f64,
    pub anchor_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub replication: u64,
    pub methods: Vec<MethodResult>,
    /// Difference in marginal means on the true links.
    pub perfect_marginal: f64,
    pub subclasses: usize,
    pub link_quality: Vec<LinkQualityRow>,
    pub trace: Vec<TraceRow>,
    pub etsr_sweep: Vec<SweepEntry>,
}

impl RunResult {
    pub fn method(&self, m: Method) -> Option<&MethodResult> {
        self.methods.iter().find(|r| r.method == m)
    }
}

fn join_units(
    pairs: impl IntoIterator<Item = (RecordId, RecordId)>,
    a: &std::collections::HashMap<RecordId, &RecordA>,
    b: &std::collections::HashMap<RecordId, &RecordB>,
    sub: &Subclassification,
) -> Vec<LinkedUnit> {
    pairs
        .into_iter()
        .map(|(ai, bi)| {
            let ra = a[&ai];
            LinkedUnit {
                a_id: ai,
                b_id: bi,
                covariates: ra.covariates.clone(),
                treated: ra.treated,
                outcome: b[&bi].outcome,
                subclass: sub.class_of(ai).expect("every File A record is classified"),
            }
        })
        .collect()
}

fn mean_var_pop(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n)
}

/// Approximate expected variance of the subclassified estimator on a
/// linked set, from the truth: per subclass, the share of correct links and
/// the outcome moments among correct and incorrect links in each arm.
pub fn expected_variance_diagnostic(units: &[LinkedUnit], truth: &GroundTruth, n_classes: usize) -> Option<f64> {
    #[derive(Default, Clone)]
    struct Arm {
        good: Vec<f64>,
        bad: Vec<f64>,
    }
    let mut arms = vec![[Arm::default(), Arm::default()]; n_classes];
    for u in units {
        let correct = truth.unit_of_a(u.a_id).and_then(|p| p.b_id) == Some(u.b_id);
        let arm = &mut arms[u.subclass][u.treated as usize];
        if correct {
            arm.good.push(u.outcome);
        } else {
            arm.bad.push(u.outcome);
        }
    }
    let n_total = units.len() as f64;
    let mut classes = Vec::new();
    let mut weights = Vec::new();
    for [c0, c1] in &arms {
        let n0 = c0.good.len() + c0.bad.len();
        let n1 = c1.good.len() + c1.bad.len();
        if n0 + n1 == 0 {
            continue;
        }
        if n0 < 2 || n1 < 2 {
            return None;
        }
        let good = c0.good.len() + c1.good.len();
        let (mu0, s0) = mean_var_pop(&c0.good);
        let (mu1, s1) = mean_var_pop(&c1.good);
        let (mh0, sh0) = if c0.bad.is_empty() {
            (mu0, 0.0)
        } else {
            mean_var_pop(&c0.bad)
        };
        let (mh1, sh1) = if c1.bad.is_empty() {
            (mu1, 0.0)
        } else {
            mean_var_pop(&c1.bad)
        };
        classes.push(ExpectedVarianceClass {
            p_correct: good as f64 / (n0 + n1) as f64,
            s2_control: s0,
            s2_treated: s1,
            sigma2_control: sh0,
            sigma2_treated: sh1,
            mu_control: mu0,
            mu_treated: mu1,
            mu_err_control: mh0,
            mu_err_treated: mh1,
            n_control: n0 as f64,
            n_treated: n1 as f64,
        });
        weights.push((n0 + n1) as f64 / n_total);
    }
    Some(crate::causal::expected_variance_approx(&classes, &weights))
}

fn rep_err(replication: u64) -> impl Fn(String) -> HarnessError {
    move |message| HarnessError::Replication { replication, message }
}

/// The experiment-wide corpus, drawn from the master seed.
pub fn experiment_corpus(cfg: &ExperimentConfig) -> Result<Corpus, HarnessError> {
    Ok(generate_corpus(
        &cfg.corpus,
        &mut stream(cfg.seed, None, Purpose::Corpus),
    )?)
}

/// Runs the full pipeline on one replication of the corpus.
pub fn run_replication(cfg: &ExperimentConfig, corpus: &Corpus, replication: u64) -> Result<RunResult, HarnessError> {
    let err = rep_err(replication);
    let data = generate_dataset(corpus, &cfg.corpus, &cfg.scenario, cfg.seed, replication)?;
    let (a, b, truth) = (&data.file_a, &data.file_b, &data.truth);

    let linked = link(a, b, &cfg.linkage).map_err(|e| err(e.to_string()))?;
    let x: Vec<Vec<f64>> = a.iter().map(|r| r.covariates.clone()).collect();
    let w: Vec<bool> = a.iter().map(|r| r.treated).collect();
    let model = fit_propensity(&x, &w).map_err(|e| err(e.to_string()))?;
    let ids: Vec<RecordId> = a.iter().map(|r| r.id).collect();
    let sub = build_subclasses(&ids, &model.scores, &w, &cfg.subclass).map_err(|e| err(e.to_string()))?;

    let a_by_id = a.iter().map(|r| (r.id, r)).collect();
    let b_by_id = b.iter().map(|r| (r.id, r)).collect();
    let estimate = |units: &[LinkedUnit]| cfg.estimator.estimate(units, &sub).map_err(|e| err(e.to_string()));

    let mut methods = Vec::new();
    let perfect = join_units(truth.links.iter().copied(), &a_by_id, &b_by_id, &sub);
    let est = estimate(&perfect)?;
    let perfect_marginal = marginal_effect(&perfect).map_err(|e| err(e.to_string()))?.tau_hat;
    methods.push(MethodResult {
        method: Method::Perfect,
        tau_hat: est.tau_hat,
        var_hat: est.var_hat,
        threshold: None,
        h: None,
        n_links: perfect.len(),
        taxonomy: error_taxonomy(&perfect, truth, &sub, &model),
    });

    let l0 = known_links(&linked.pairs);
    let seq = build_candidate_sequence(&linked.pairs, &l0, cfg.linkage.floor());
    let units = seq.units(a, b, &sub).map_err(|e| err(e.to_string()))?;
    let ladder = evaluate_ladder(&seq, &units, cfg.estimator, &sub);
    let known = &ladder[0];
    let (Some(tk), Some(vk)) = (known.tau_hat, known.var_hat) else {
        return Err(err("the known-link set is not estimable".into()));
    };
    methods.push(MethodResult {
        method: Method::Known,
        tau_hat: tk,
        var_hat: vk,
        threshold: known.threshold,
        h: Some(0),
        n_links: known.n_links,
        taxonomy: error_taxonomy(&units[..known.n_links], truth, &sub, &model),
    });
    for &rule in &cfg.rules {
        let s = select(rule, &ladder, &cfg.tether).map_err(|e| err(e.to_string()))?;
        methods.push(MethodResult {
            method: rule.into(),
            tau_hat: s.tau_hat,
            var_hat: s.var_hat,
            threshold: s.threshold,
            h: Some(s.h),
            n_links: s.n_links,
            taxonomy: error_taxonomy(&units[..s.n_links], truth, &sub, &model),
        });
    }

    let mut etsr_sweep = Vec::new();
    for &k in &cfg.etsr_sweep {
        let tether = TetherConfig::new(k).map_err(|e| err(e.to_string()))?;
        let s = select_etsr(&ladder, &tether).map_err(|e| err(e.to_string()))?;
        etsr_sweep.push(SweepEntry {
            k,
            h: s.h,
            tau_hat: s.tau_hat,
            anchor_tau: tk,
            anchor_se: vk.sqrt(),
        });
    }

    let table = TruthTable::new(ids.iter().copied(), truth.links.iter().copied());
    let quality = link_quality(&linked.pairs, &table).map_err(|e| err(e.to_string()))?;
    let trace = ladder
        .iter()
        .map(|p: &LadderPoint| TraceRow {
            h: p.h,
            n_links: p.n_links,
            threshold: p.threshold,
            tau_hat: p.tau_hat,
            var_hat: p.var_hat,
            marginal_tau: p.marginal_tau,
            marginal_var: p.marginal_var,
            expected_var: expected_variance_diagnostic(&units[..p.n_links], truth, sub.num_classes()),
        })
        .collect();

    Ok(RunResult {
        replication,
        methods,
        perfect_marginal,
        subclasses: sub.num_classes(),
        link_quality: quality,
        trace,
        etsr_sweep,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub mean_tau: f64,
    /// Empirical variance across replications (divisor R).
    pub var_tau: f64,
    pub avg_var_hat: f64,
    pub mse: f64,
    pub avg_threshold: Option<f64>,
    pub avg_n_links: f64,
    /// Mean over replications of each run's link rate (percent) at the
    /// average threshold.
    pub link_rate_at_avg_threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub tau: f64,
    pub replications: usize,
    pub methods: Vec<MethodSummary>,
    /// Mean difference in marginal means on the true links.
    pub marginal_mean: f64,
}

impl RunSummary {
    pub fn method(&self, m: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|s| s.method == m)
    }
}

/// Aggregates per-method results. Variances use divisor `R`, so
/// `mse = var_tau + (mean_tau - tau)^2` and a single replication has zero
/// variance.
pub fn summarize(results: &[RunResult], tau: f64) -> RunSummary {
    let r = results.len() as f64;
    let mut order: Vec<Method> = Vec::new();
    for res in results {
        for m in &res.methods {
            if !order.contains(&m.method) {
                order.push(m.method);
            }
        }
    }
    let methods = order
        .into_iter()
        .map(|method| {
            let rows: Vec<&MethodResult> = results.iter().filter_map(|res| res.method(method)).collect();
            let n = rows.len() as f64;
            let taus: Vec<f64> = rows.iter().map(|m| m.tau_hat).collect();
            let (mean_tau, var_tau) = mean_var_pop(&taus);
            let mse = taus.iter().map(|t| (t - tau) * (t - tau)).sum::<f64>() / n;
            let thresholds: Vec<f64> = rows.iter().filter_map(|m| m.threshold).collect();
            let avg_threshold =
                (thresholds.len() == rows.len() && !rows.is_empty()).then(|| thresholds.iter().sum::<f64>() / n);
            let link_rate_at_avg_threshold = avg_threshold.and_then(|t| {
                let rates: Vec<f64> = results
                    .iter()
                    .filter_map(|res| link_rate_at(&res.link_quality, t))
                    .collect();
                (!rates.is_empty()).then(|| rates.iter().sum::<f64>() / rates.len() as f64)
            });
            MethodSummary {
                method,
                mean_tau,
                var_tau,
                avg_var_hat: rows.iter().map(|m| m.var_hat).sum::<f64>() / n,
                mse,
                avg_threshold,
                avg_n_links: rows.iter().map(|m| m.n_links as f64).sum::<f64>() / n,
                link_rate_at_avg_threshold,
            }
        })
        .collect();
    RunSummary {
        tau,
        replications: results.len(),
        methods,
        marginal_mean: results.iter().map(|res| res.perfect_marginal).sum::<f64>() / r,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub results: Vec<RunResult>,
    pub summary: RunSummary,
}

/// Runs every replication (in parallel when `jobs != 1`) and summarises.
/// Any failed replication aborts the experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Experiment, HarnessError> {
    cfg.validate()?;
    let corpus = experiment_corpus(cfg)?;
    let run = || -> Result<Vec<RunResult>, HarnessError> {
        (0..cfg.replications as u64)
            .into_par_iter()
            .map(|r| run_replication(cfg, &corpus, r))
            .collect()
    };
    let results = if cfg.jobs == 0 {
        run()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| HarnessError::Config(e.to_string()))?
            .install(run)?
    };
    let summary = summarize(&results, cfg.scenario.tau);
    Ok(Experiment {
        config: cfg.clone(),
        results,
        summary,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>, HarnessError> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
}

/// Writes `summary.json`, `summary.csv`, `runs.csv`, `link_quality.csv`
/// (first replication), `link_quality_all.csv`, `traces.csv` and, when a
/// sweep was run, `etsr_sweep.csv` into `dir`.
pub fn emit_tables(exp: &Experiment, dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)?;
    let mut json = BufWriter::new(File::create(dir.join("summary.json"))?);
    serde_json::to_writer_pretty(&mut json, &exp.summary)?;
    writeln!(json)?;
    json.flush()?;

    let mut w = csv_writer(&dir.join("summary.csv"))?;
    w.write_record(["method", "mean_tau", "var_tau", "avg_var_hat", "mse", "avg_h"])?;
    for m in &exp.summary.methods {
        w.write_record([
            m.method.name().to_string(),
            m.mean_tau.to_string(),
            m.var_tau.to_string(),
            m.avg_var_hat.to_string(),
            m.mse.to_string(),
            opt(m.avg_threshold),
        ])?;
    }
    w.flush()?;

    let mut w = csv_writer(&dir.join("runs.csv"))?;
    w.write_record([
        "replication",
        "method",
        "tau_hat",
        "var_hat",
        "threshold",
        "h",
        "n_links",
    ])?;
    for r in &exp.results {
        for m in &r.methods {
            w.write_record([
                r.replication.to_string(),
                m.method.name().to_string(),
                m.tau_hat.to_string(),
                m.var_hat.to_string(),
                opt(m.threshold),
                m.h.map(|h| h.to_string()).unwrap_or_default(),
                m.n_links.to_string(),
            ])?;
        }
    }
    w.flush()?;

    if let Some(first) = exp.results.first() {
        let mut w = csv_writer(&dir.join("link_quality.csv"))?;
        w.write_record(["threshold", "link_rate", "units", "duplicates"])?;
        for q in &first.link_quality {
            w.write_record([
                q.threshold.to_string(),
                q.link_rate.to_string(),
                q.units.to_string(),
                q.duplicates.to_string(),
            ])?;
        }
        w.flush()?;
    }

    let mut w = csv_writer(&dir.join("link_quality_all.csv"))?;
    w.write_record(["replication", "threshold", "link_rate", "units", "duplicates"])?;
    for r in &exp.results {
        for q in &r.link_quality {
            w.write_record([
                r.replication.to_string(),
                q.threshold.to_string(),
                q.link_rate.to_string(),
                q.units.to_string(),
                q.duplicates.to_string(),
            ])?;
        }
    }
    w.flush()?;

    let mut w = csv_writer(&dir.join("traces.csv"))?;
    w.write_record([
        "replication",
        "h",
        "n_links",
        "threshold",
        "tau_hat",
        "var_hat",
        "marginal_tau",
        "marginal_var",
        "expected_var",
    ])?;
    for r in &exp.results {
        for t in &r.trace {
            w.write_record([
                r.replication.to_string(),
                t.h.to_string(),
                t.n_links.to_string(),
                opt(t.threshold),
                opt(t.tau_hat),
                opt(t.var_hat),
                opt(t.marginal_tau),
                opt(t.marginal_var),
                opt(t.expected_var),
            ])?;
        }
    }
    w.flush()?;

    if exp.results.iter().any(|r| !r.etsr_sweep.is_empty()) {
        let mut w = csv_writer(&dir.join("etsr_sweep.csv"))?;
        w.write_record(["replication", "k", "h", "tau_hat", "anchor_tau", "anchor_se"])?;
        for r in &exp.results {
            for s in &r.etsr_sweep {
                w.write_record([
                    r.replication.to_string(),
                    s.k.to_string(),
                    s.h.to_string(),
                    s.tau_hat.to_string(),
                    s.anchor_tau.to_string(),
                    s.anchor_se.to_string(),
                ])?;
            }
        }
        w.flush()?;
    }
    Ok(())
}
