//! Pairwise comparison, Fellegi-Sunter scoring and top-link extraction.
//!
//! The pipeline is: block the two files, build a comparison vector for every
//! candidate pair, estimate the u-probabilities from those vectors, score
//! each pair, then keep the best-scoring File B candidate for every File A
//! record. File B records may be reused by several File A records.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::records::{BlockIndex, Field, LinkingFields, RecordA, RecordB, RecordId};
use crate::similarity::{dichotomize, jaro_winkler_chars, JaroConfig};

/// Lower clamp for u-probabilities (upper clamp is `1 - U_PROB_EPS`).
pub const U_PROB_EPS: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum LinkageError {
    #[error("no candidate pairs: blocking produced an empty comparison space")]
    NoCandidatePairs,
    #[error("parameter vectors have length {m} and {u}, comparison vectors have {f}")]
    Dimension { m: usize, u: usize, f: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("File A id {0} is not covered by the truth table")]
    MissingTruth(RecordId),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Comparison {
    /// Jaro-Winkler similarity dichotomized at `cutoff` (agree iff score > cutoff).
    JaroWinkler { cutoff: f64 },
    /// Exact equality of the raw values.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub field: Field,
    pub comparison: Comparison,
}

impl FieldSpec {
    /// First and last name through dichotomized Jaro-Winkler, birth month
    /// and day through exact agreement.
    pub fn standard(jw_cutoff: f64) -> Vec<FieldSpec> {
        vec![
            FieldSpec {
                field: Field::FirstName,
                comparison: Comparison::JaroWinkler { cutoff: jw_cutoff },
            },
            FieldSpec {
                field: Field::LastName,
                comparison: Comparison::JaroWinkler { cutoff: jw_cutoff },
            },
            FieldSpec {
                field: Field::BirthMonth,
                comparison: Comparison::Exact,
            },
            FieldSpec {
                field: Field::BirthDay,
                comparison: Comparison::Exact,
            },
        ]
    }
}

/// Field value as seen by string comparators: names verbatim, month and day
/// as zero-padded two-digit strings.
pub fn comparison_text<R: LinkingFields + ?Sized>(field: Field, r: &R) -> String {
    match field {
        Field::FirstName => r.first_name().to_string(),
        Field::LastName => r.last_name().to_string(),
        Field::BirthMonth => format!("{:02}", r.birth_month()),
        Field::BirthDay => format!("{:02}", r.birth_day()),
        Field::BirthYear => r.birth_year().to_string(),
    }
}

/// Per-field agreement bits for one record pair (at most 32 fields).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ComparisonVector {
    mask: u32,
    len: u8,
}

impl ComparisonVector {
    pub fn from_bits(bits: &[bool]) -> Self {
        assert!(bits.len() <= 32, "at most 32 comparison fields");
        let mask = bits
            .iter()
            .enumerate()
            .fold(0u32, |m, (i, &b)| if b { m | (1 << i) } else { m });
        ComparisonVector {
            mask,
            len: bits.len() as u8,
        }
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, f: usize) -> bool {
        debug_assert!(f < self.len());
        self.mask & (1 << f) != 0
    }

    pub fn bits(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len()).map(move |f| self.get(f))
    }

    pub fn all_agree(&self) -> bool {
        self.mask.count_ones() as usize == self.len()
    }

    pub fn with(&self, f: usize, value: bool) -> Self {
        let mask = if value {
            self.mask | (1 << f)
        } else {
            self.mask & !(1 << f)
        };
        ComparisonVector { mask, len: self.len }
    }
}

impl fmt::Display for ComparisonVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.bits() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for ComparisonVector {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(format!("bad gamma bit `{other}`")),
            })
            .collect::<Result<Vec<_>, _>>()?;
        if bits.len() > 32 {
            return Err("more than 32 gamma bits".into());
        }
        Ok(ComparisonVector::from_bits(&bits))
    }
}

/// Compares one pair field by field.
pub fn compare_pair<A, B>(a: &A, b: &B, spec: &[FieldSpec], jaro: &JaroConfig) -> ComparisonVector
where
    A: LinkingFields + ?Sized,
    B: LinkingFields + ?Sized,
{
    let bits: Vec<bool> = spec
        .iter()
        .map(|fs| match fs.comparison {
            Comparison::Exact => fs.field.raw_value(a) == fs.field.raw_value(b),
            Comparison::JaroWinkler { cutoff } => {
                let x: Vec<char> = comparison_text(fs.field, a).chars().collect();
                let y: Vec<char> = comparison_text(fs.field, b).chars().collect();
                dichotomize(jaro_winkler_chars(&x, &y, jaro), cutoff)
            }
        })
        .collect();
    ComparisonVector::from_bits(&bits)
}

/// Agreement frequency per field over all candidate pairs, clamped to
/// `[U_PROB_EPS, 1 - U_PROB_EPS]`.
pub fn estimate_u_probs<'a, I>(vectors: I, n_fields: usize) -> Result<Vec<f64>, LinkageError>
where
    I: IntoIterator<Item = &'a ComparisonVector>,
{
    let mut agree = vec![0u64; n_fields];
    let mut total = 0u64;
    for v in vectors {
        if v.len() != n_fields {
            return Err(LinkageError::Dimension {
                m: n_fields,
                u: n_fields,
                f: v.len(),
            });
        }
        total += 1;
        for (f, count) in agree.iter_mut().enumerate() {
            if v.get(f) {
                *count += 1;
            }
        }
    }
    if total == 0 {
        return Err(LinkageError::NoCandidatePairs);
    }
    Ok(agree
        .into_iter()
        .map(|c| (c as f64 / total as f64).clamp(U_PROB_EPS, 1.0 - U_PROB_EPS))
        .collect())
}

/// m- and u-probabilities of the two-class mixture, one entry per field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FsParameters {
    pub theta_m: Vec<f64>,
    pub theta_u: Vec<f64>,
}

impl FsParameters {
    pub fn new(theta_m: Vec<f64>, theta_u: Vec<f64>) -> Result<Self, LinkageError> {
        if theta_m.len() != theta_u.len() {
            return Err(LinkageError::Dimension {
                m: theta_m.len(),
                u: theta_u.len(),
                f: theta_m.len(),
            });
        }
        for (f, (&m, &u)) in theta_m.iter().zip(&theta_u).enumerate() {
            if !(m > 0.0 && m < 1.0 && u > 0.0 && u < 1.0) {
                return Err(LinkageError::InvalidParameter(format!(
                    "field {f}: theta_m = {m}, theta_u = {u} must lie in (0, 1)"
                )));
            }
        }
        let params = FsParameters { theta_m, theta_u };
        for f in params.non_monotone_fields() {
            log::warn!(
                "field {f}: theta_u = {} >= theta_m = {}; agreement lowers the score",
                params.theta_u[f],
                params.theta_m[f]
            );
        }
        Ok(params)
    }

    /// Same m-probability for every field.
    pub fn with_constant_m(theta_m: f64, theta_u: Vec<f64>) -> Result<Self, LinkageError> {
        FsParameters::new(vec![theta_m; theta_u.len()], theta_u)
    }

    pub fn n_fields(&self) -> usize {
        self.theta_m.len()
    }

    /// Fields violating `theta_u < theta_m`.
    pub fn non_monotone_fields(&self) -> Vec<usize> {
        (0..self.n_fields())
            .filter(|&f| self.theta_u[f] >= self.theta_m[f])
            .collect()
    }

    /// `(agreement weight, disagreement weight)` per field, in bits.
    pub fn weights(&self) -> Vec<(f64, f64)> {
        self.theta_m
            .iter()
            .zip(&self.theta_u)
            .map(|(&m, &u)| ((m / u).log2(), ((1.0 - m) / (1.0 - u)).log2()))
            .collect()
    }

    /// `P(gamma | link)` under conditional independence.
    pub fn m_prob(&self, gamma: &ComparisonVector) -> f64 {
        product(&self.theta_m, gamma)
    }

    /// `P(gamma | non-link)` under conditional independence.
    pub fn u_prob(&self, gamma: &ComparisonVector) -> f64 {
        product(&self.theta_u, gamma)
    }
}

fn product(theta: &[f64], gamma: &ComparisonVector) -> f64 {
    theta
        .iter()
        .enumerate()
        .map(|(f, &t)| if gamma.get(f) { t } else { 1.0 - t })
        .product()
}

/// Linking score: the base-2 log likelihood ratio of the comparison vector,
/// summed field by field.
pub fn fs_score(gamma: &ComparisonVector, params: &FsParameters) -> f64 {
    debug_assert_eq!(gamma.len(), params.n_fields());
    let mut s = 0.0;
    for f in 0..params.n_fields() {
        let (m, u) = (params.theta_m[f], params.theta_u[f]);
        s += if gamma.get(f) {
            (m / u).log2()
        } else {
            ((1.0 - m) / (1.0 - u)).log2()
        };
    }
    s
}

/// Mean Jaro-Winkler similarity over first name, last name, birth month and
/// birth day (dates compared as two-digit strings).
pub fn avg_jw_score<A, B>(a: &A, b: &B, jaro: &JaroConfig) -> f64
where
    A: LinkingFields + ?Sized,
    B: LinkingFields + ?Sized,
{
    const FIELDS: [Field; 4] = [Field::FirstName, Field::LastName, Field::BirthMonth, Field::BirthDay];
    FIELDS
        .iter()
        .map(|&f| {
            let x: Vec<char> = comparison_text(f, a).chars().collect();
            let y: Vec<char> = comparison_text(f, b).chars().collect();
            jaro_winkler_chars(&x, &y, jaro)
        })
        .sum::<f64>()
        / 4.0
}

/// A File A record's chosen File B candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredPair {
    pub a_id: RecordId,
    pub b_id: RecordId,
    pub score: f64,
    pub comparison: ComparisonVector,
}

impl ScoredPair {
    pub fn key(&self) -> (RecordId, RecordId) {
        (self.a_id, self.b_id)
    }
}

/// Descending score; ties by smaller File A id, then smaller File B id.
pub fn ranking_order(x: &ScoredPair, y: &ScoredPair) -> Ordering {
    y.score
        .total_cmp(&x.score)
        .then(x.a_id.cmp(&y.a_id))
        .then(x.b_id.cmp(&y.b_id))
}

/// Best File B candidate per File A record, keeping only scores `>= floor`.
///
/// `scorer(i, j)` scores File A position `i` against File B position `j`.
/// Among equal best scores the smaller File B id wins. The result is sorted
/// by [`ranking_order`].
pub fn top_links<F>(index: &BlockIndex, a: &[RecordA], b: &[RecordB], mut scorer: F, floor: f64) -> Vec<ScoredPair>
where
    F: FnMut(usize, usize) -> (f64, ComparisonVector),
{
    let mut out = Vec::new();
    for blk in index.blocks.values() {
        for &i in &blk.a {
            let mut best: Option<ScoredPair> = None;
            for &j in &blk.b {
                let (score, comparison) = scorer(i, j);
                let cand = ScoredPair {
                    a_id: a[i].id,
                    b_id: b[j].id,
                    score,
                    comparison,
                };
                best = match best {
                    None => Some(cand),
                    Some(cur) => {
                        if cand.score > cur.score || (cand.score == cur.score && cand.b_id < cur.b_id) {
                            Some(cand)
                        } else {
                            Some(cur)
                        }
                    }
                };
            }
            if let Some(p) = best.filter(|p| p.score >= floor) {
                out.push(p);
            }
        }
    }
    out.sort_by(ranking_order);
    out
}

/// Pairs whose comparison vector agrees on every field.
pub fn known_links(pairs: &[ScoredPair]) -> Vec<ScoredPair> {
    pairs.iter().filter(|p| p.comparison.all_agree()).copied().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScorerKind {
    /// Dichotomized comparisons scored by the log2 likelihood ratio.
    Fs,
    /// Mean of the per-field Jaro-Winkler similarities.
    AvgJw,
}

impl ScorerKind {
    pub fn default_floor(self) -> f64 {
        match self {
            ScorerKind::Fs => 0.0,
            ScorerKind::AvgJw => 0.8,
        }
    }
}

impl FromStr for ScorerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fs" => Ok(ScorerKind::Fs),
            "avg-jw" | "avg_jw" => Ok(ScorerKind::AvgJw),
            other => Err(format!("unknown scorer `{other}` (expected fs or avg-jw)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkageConfig {
    pub scorer: ScorerKind,
    pub theta_m: f64,
    pub jw_cutoff: f64,
    /// Minimum score for a pair to be a possible link; scorer default when `None`.
    pub floor: Option<f64>,
    pub block_field: Field,
    pub jaro: JaroConfig,
}

impl Default for LinkageConfig {
    fn default() -> Self {
        LinkageConfig {
            scorer: ScorerKind::Fs,
            theta_m: 0.95,
            jw_cutoff: 0.95,
            floor: None,
            block_field: Field::BirthYear,
            jaro: JaroConfig::default(),
        }
    }
}

impl LinkageConfig {
    pub fn floor(&self) -> f64 {
        self.floor.unwrap_or_else(|| self.scorer.default_floor())
    }

    pub fn field_specs(&self) -> Vec<FieldSpec> {
        FieldSpec::standard(self.jw_cutoff)
    }
}

#[derive(Debug, Clone)]
pub struct LinkOutput {
    /// Top link per File A record, in [`ranking_order`].
    pub pairs: Vec<ScoredPair>,
    /// Estimated parameters when the FS scorer was used.
    pub params: Option<FsParameters>,
    pub candidate_pairs: usize,
}

/// Pre-split field text for every record, so the inner loop does not allocate.
struct FieldText {
    texts: Vec<Vec<Vec<char>>>,
}

impl FieldText {
    fn new<R: LinkingFields>(records: &[R], fields: &[Field]) -> Self {
        FieldText {
            texts: records
                .iter()
                .map(|r| {
                    fields
                        .iter()
                        .map(|&f| comparison_text(f, r).chars().collect())
                        .collect()
                })
                .collect(),
        }
    }

    fn get(&self, record: usize, field: usize) -> &[char] {
        &self.texts[record][field]
    }
}

/// Runs blocking, comparison, scoring and top-link extraction.
pub fn link(a: &[RecordA], b: &[RecordB], cfg: &LinkageConfig) -> Result<LinkOutput, LinkageError> {
    if !(0.0..=1.0).contains(&cfg.jw_cutoff) {
        return Err(LinkageError::InvalidParameter(format!(
            "jw_cutoff {} outside [0, 1]",
            cfg.jw_cutoff
        )));
    }
    cfg.jaro.validate().map_err(LinkageError::InvalidParameter)?;
    let index = BlockIndex::build(a, b, cfg.block_field);
    let specs = cfg.field_specs();
    let fields: Vec<Field> = specs.iter().map(|s| s.field).collect();
    let text_a = FieldText::new(a, &fields);
    let text_b = FieldText::new(b, &fields);
    let jaro = cfg.jaro;

    let compare = |i: usize, j: usize| -> ComparisonVector {
        let mut v = ComparisonVector {
            mask: 0,
            len: specs.len() as u8,
        };
        for (f, spec) in specs.iter().enumerate() {
            let agree = match spec.comparison {
                Comparison::Exact => text_a.get(i, f) == text_b.get(j, f),
                Comparison::JaroWinkler { cutoff } => {
                    dichotomize(jaro_winkler_chars(text_a.get(i, f), text_b.get(j, f), &jaro), cutoff)
                }
            };
            if agree {
                v.mask |= 1 << f;
            }
        }
        v
    };

    let n_pairs = index.pair_count();
    if n_pairs == 0 {
        return Err(LinkageError::NoCandidatePairs);
    }

    match cfg.scorer {
        ScorerKind::Fs => {
            // Comparison vectors are computed once and reused for scoring.
            // A pair's slot is its block's base offset plus its row-major
            // position inside the block.
            let mut a_slot = vec![0usize; a.len()];
            let mut b_pos = vec![0usize; b.len()];
            let mut base = 0usize;
            for blk in index.blocks.values() {
                for (r, &i) in blk.a.iter().enumerate() {
                    a_slot[i] = base + r * blk.b.len();
                }
                for (c, &j) in blk.b.iter().enumerate() {
                    b_pos[j] = c;
                }
                base += blk.pair_count();
            }
            let mut cache = vec![ComparisonVector { mask: 0, len: 0 }; n_pairs];
            for (i, j) in index.candidate_pairs() {
                cache[a_slot[i] + b_pos[j]] = compare(i, j);
            }
            let theta_u = estimate_u_probs(&cache, specs.len())?;
            let params = FsParameters::with_constant_m(cfg.theta_m, theta_u)?;
            let weights = params.weights();
            let pairs = top_links(
                &index,
                a,
                b,
                |i, j| {
                    let v = cache[a_slot[i] + b_pos[j]];
                    let s = weights
                        .iter()
                        .enumerate()
                        .map(|(f, &(agree, disagree))| if v.get(f) { agree } else { disagree })
                        .sum::<f64>();
                    (s, v)
                },
                cfg.floor(),
            );
            Ok(LinkOutput {
                pairs,
                params: Some(params),
                candidate_pairs: n_pairs,
            })
        }
        ScorerKind::AvgJw => {
            let pairs = top_links(
                &index,
                a,
                b,
                |i, j| {
                    let s = (0..4)
                        .map(|f| jaro_winkler_chars(text_a.get(i, f), text_b.get(j, f), &jaro))
                        .sum::<f64>()
                        / 4.0;
                    (s, compare(i, j))
                },
                cfg.floor(),
            );
            Ok(LinkOutput {
                pairs,
                params: None,
                candidate_pairs: n_pairs,
            })
        }
    }
}

/// True links for the File A records that have one, plus the full set of
/// File A ids the table speaks for.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TruthTable {
    links: HashMap<RecordId, RecordId>,
    covered: HashSet<RecordId>,
}

impl TruthTable {
    pub fn new(
        a_ids: impl IntoIterator<Item = RecordId>,
        links: impl IntoIterator<Item = (RecordId, RecordId)>,
    ) -> Self {
        let mut covered: HashSet<RecordId> = a_ids.into_iter().collect();
        let links: HashMap<_, _> = links.into_iter().collect();
        covered.extend(links.keys().copied());
        TruthTable { links, covered }
    }

    pub fn is_true_link(&self, a_id: RecordId, b_id: RecordId) -> bool {
        self.links.get(&a_id) == Some(&b_id)
    }

    pub fn true_partner(&self, a_id: RecordId) -> Option<RecordId> {
        self.links.get(&a_id).copied()
    }

    pub fn covers(&self, a_id: RecordId) -> bool {
        self.covered.contains(&a_id)
    }

    /// True links sorted by File A id.
    pub fn links(&self) -> Vec<(RecordId, RecordId)> {
        let mut v: Vec<_> = self.links.iter().map(|(&a, &b)| (a, b)).collect();
        v.sort_unstable();
        v
    }
}

/// One row of the link-quality table: everything scoring at least `threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkQualityRow {
    pub threshold: f64,
    /// Percentage of retained pairs that are true links.
    pub link_rate: f64,
    pub units: usize,
    /// Non-unique appearances of File B records: sum over b of max(0, uses - 1).
    pub duplicates: usize,
}

/// Link quality at every distinct score, in ascending threshold order.
pub fn link_quality(pairs: &[ScoredPair], truth: &TruthTable) -> Result<Vec<LinkQualityRow>, LinkageError> {
    let mut sorted: Vec<ScoredPair> = pairs.to_vec();
    sorted.sort_by(ranking_order);
    let mut uses: HashMap<RecordId, usize> = HashMap::new();
    let (mut correct, mut duplicates) = (0usize, 0usize);
    let mut rows = Vec::new();
    for (k, p) in sorted.iter().enumerate() {
        if !truth.covers(p.a_id) {
            return Err(LinkageError::MissingTruth(p.a_id));
        }
        if truth.is_true_link(p.a_id, p.b_id) {
            correct += 1;
        }
        let u = uses.entry(p.b_id).or_insert(0);
        *u += 1;
        if *u > 1 {
            duplicates += 1;
        }
        let group_ends = sorted.get(k + 1).is_none_or(|q| q.score != p.score);
        if group_ends {
            let units = k + 1;
            rows.push(LinkQualityRow {
                threshold: p.score,
                link_rate: 100.0 * correct as f64 / units as f64,
                units,
                duplicates,
            });
        }
    }
    rows.reverse();
    Ok(rows)
}

/// Link rate (percent) of the retained set `{score >= threshold}`; `None`
/// when nothing is retained.
pub fn link_rate_at(rows: &[LinkQualityRow], threshold: f64) -> Option<f64> {
    rows.iter().find(|r| r.threshold >= threshold).map(|r| r.link_rate)
}

/// Writes scored pairs as `a_id,b_id,score,gamma_bits`.
pub fn write_scored_pairs<W: Write>(out: W, pairs: &[ScoredPair]) -> Result<(), LinkageError> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["a_id", "b_id", "score", "gamma_bits"])?;
    for p in pairs {
        wtr.write_record([
            p.a_id.to_string(),
            p.b_id.to_string(),
            p.score.to_string(),
            p.comparison.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_scored_pairs<R: Read>(input: R) -> Result<Vec<ScoredPair>, LinkageError> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let bad = |message: String| LinkageError::Parse { line, message };
        if row.len() != 4 {
            return Err(bad(format!("expected 4 fields, found {}", row.len())));
        }
        out.push(ScoredPair {
            a_id: row[0].trim().parse().map_err(|e| bad(format!("a_id: {e}")))?,
            b_id: row[1].trim().parse().map_err(|e| bad(format!("b_id: {e}")))?,
            score: row[2].trim().parse().map_err(|e| bad(format!("score: {e}")))?,
            comparison: row[3].trim().parse().map_err(bad)?,
        });
    }
    Ok(out)
}
