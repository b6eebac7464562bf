//! Synthetic two-file corpus with corrupted duplicates, plus simulated
//! treatment, covariates and outcomes.
//!
//! A corpus is a fixed population of distinct identities, some of which
//! have a corrupted duplicate. Each replication splits it into File A (every
//! duplicated identity plus a random sample of the rest) and File B (the
//! corrupted duplicates plus other identities), then draws fresh
//! `(w, x1, x2, y)` for every person involved.

pub mod names;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::records::{Field, RecordA, RecordB, RecordId};
use crate::rng::{stream, Purpose};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("name pool exhausted: only {generated} of {requested} distinct identities could be drawn")]
    PoolExhausted { generated: usize, requested: usize },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Per-field corruption probabilities for duplicate records.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypoModel {
    pub substitution: f64,
    pub transposition: f64,
    pub insertion: f64,
    pub deletion: f64,
    /// Cap on name edits per field.
    pub max_edits: usize,
    /// Swap the two digits of a month or day (`18` → `81`).
    pub digit_swap: f64,
    /// Shift a month or day by one.
    pub off_by_one: f64,
    /// Replace a month or day with another valid value.
    pub replace: f64,
    /// Most fields corrupted per record; `None` lets every field be hit
    /// independently. Fields are visited in random order and corruption
    /// stops once the cap is reached.
    pub max_fields: Option<usize>,
}

impl Default for TypoModel {
    fn default() -> Self {
        TypoModel {
            substitution: 0.13,
            transposition: 0.07,
            insertion: 0.05,
            deletion: 0.05,
            max_edits: 2,
            digit_swap: 0.06,
            off_by_one: 0.08,
            replace: 0.03,
            max_fields: Some(1),
        }
    }
}

impl TypoModel {
    pub fn none() -> Self {
        TypoModel {
            substitution: 0.0,
            transposition: 0.0,
            insertion: 0.0,
            deletion: 0.0,
            max_edits: 0,
            digit_swap: 0.0,
            off_by_one: 0.0,
            replace: 0.0,
            max_fields: None,
        }
    }

    fn validate(&self) -> Result<(), SimError> {
        let probs = [
            ("substitution", self.substitution),
            ("transposition", self.transposition),
            ("insertion", self.insertion),
            ("deletion", self.deletion),
            ("digit_swap", self.digit_swap),
            ("off_by_one", self.off_by_one),
            ("replace", self.replace),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(SimError::Config(format!("{name} probability {p} outside [0, 1]")));
            }
        }
        if self.digit_swap + self.off_by_one + self.replace > 1.0 {
            return Err(SimError::Config("date corruption probabilities sum above 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub n_persons: usize,
    pub n_duplicates: usize,
    pub n_a: usize,
    pub n_b: usize,
    pub typo: TypoModel,
    /// Zipf exponents for name frequencies (rank `k` has weight `k^-s`).
    pub first_name_zipf: f64,
    pub last_name_zipf: f64,
    pub year_min: i32,
    pub year_max: i32,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            n_persons: 9000,
            n_duplicates: 1000,
            n_a: 2000,
            n_b: 8000,
            typo: TypoModel::default(),
            first_name_zipf: 0.6,
            last_name_zipf: 0.6,
            year_min: 1920,
            year_max: 2009,
        }
    }
}

impl CorpusConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        self.typo.validate()?;
        if self.n_duplicates > self.n_persons {
            return Err(SimError::Config("n_duplicates exceeds n_persons".into()));
        }
        if self.n_duplicates > self.n_a || self.n_duplicates > self.n_b {
            return Err(SimError::Config("n_duplicates must not exceed n_a or n_b".into()));
        }
        if self.n_a + self.n_b > self.n_persons + self.n_duplicates {
            return Err(SimError::Config(format!(
                "n_a + n_b = {} exceeds n_persons + n_duplicates = {}",
                self.n_a + self.n_b,
                self.n_persons + self.n_duplicates
            )));
        }
        if self.year_min > self.year_max {
            return Err(SimError::Config("year_min exceeds year_max".into()));
        }
        for s in [self.first_name_zipf, self.last_name_zipf] {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(SimError::Config(format!(
                    "Zipf exponent {s} must be a non-negative number"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Identity {
    pub first_name: String,
    pub last_name: String,
    pub birth_month: u32,
    pub birth_day: u32,
    pub birth_year: i32,
}

/// One field changed while corrupting a duplicate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldEdit {
    pub field: Field,
    pub original: String,
    pub corrupted: String,
    pub edits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Duplicate {
    /// Index into [`Corpus::persons`].
    pub person: usize,
    pub record: Identity,
    pub edits: Vec<FieldEdit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub persons: Vec<Identity>,
    pub duplicates: Vec<Duplicate>,
}

const DAYS_IN_MONTH: [u32; 12] = [31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31];

fn zipf_index(n: usize, s: f64) -> WeightedIndex<f64> {
    WeightedIndex::new((1..=n).map(|k| (k as f64).powf(-s))).expect("non-empty positive weights")
}

/// Draws `n_persons` distinct identities and corrupted copies of
/// `n_duplicates` of them.
pub fn generate_corpus<R: Rng + ?Sized>(cfg: &CorpusConfig, rng: &mut R) -> Result<Corpus, SimError> {
    cfg.validate()?;
    let first = zipf_index(names::FIRST_NAMES.len(), cfg.first_name_zipf);
    let last = zipf_index(names::LAST_NAMES.len(), cfg.last_name_zipf);
    let mut seen = HashSet::with_capacity(cfg.n_persons);
    let mut persons = Vec::with_capacity(cfg.n_persons);
    while persons.len() < cfg.n_persons {
        let mut fresh = None;
        for _ in 0..100 {
            let month = rng.random_range(1..=12u32);
            let id = Identity {
                first_name: names::FIRST_NAMES[first.sample(rng)].to_string(),
                last_name: names::LAST_NAMES[last.sample(rng)].to_string(),
                birth_month: month,
                birth_day: rng.random_range(1..=DAYS_IN_MONTH[month as usize - 1]),
                birth_year: rng.random_range(cfg.year_min..=cfg.year_max),
            };
            if seen.insert(id.clone()) {
                fresh = Some(id);
                break;
            }
        }
        match fresh {
            Some(id) => persons.push(id),
            None => {
                return Err(SimError::PoolExhausted {
                    generated: persons.len(),
                    requested: cfg.n_persons,
                })
            }
        }
    }
    let mut order: Vec<usize> = (0..cfg.n_persons).collect();
    order.shuffle(rng);
    let mut chosen = order[..cfg.n_duplicates].to_vec();
    chosen.sort_unstable();
    let duplicates = chosen
        .into_iter()
        .map(|person| {
            let (record, edits) = inject_errors(&persons[person], &cfg.typo, rng);
            Duplicate { person, record, edits }
        })
        .collect();
    Ok(Corpus { persons, duplicates })
}

fn random_letter<R: Rng + ?Sized>(rng: &mut R) -> char {
    (b'A' + rng.random_range(0..26u8)) as char
}

/// Applies up to `max_edits` random edits to a name and returns the result
/// with the number of edits made.
pub fn corrupt_name<R: Rng + ?Sized>(name: &str, typo: &TypoModel, rng: &mut R) -> (String, usize) {
    let mut chars: Vec<char> = name.chars().collect();
    let mut edits = 0;
    if edits < typo.max_edits && !chars.is_empty() && rng.random_bool(typo.substitution) {
        let i = rng.random_range(0..chars.len());
        let mut c = random_letter(rng);
        while c == chars[i] {
            c = random_letter(rng);
        }
        chars[i] = c;
        edits += 1;
    }
    if edits < typo.max_edits && rng.random_bool(typo.transposition) {
        let spots: Vec<usize> = (1..chars.len()).filter(|&i| chars[i - 1] != chars[i]).collect();
        if !spots.is_empty() {
            let i = spots[rng.random_range(0..spots.len())];
            chars.swap(i - 1, i);
            edits += 1;
        }
    }
    if edits < typo.max_edits && rng.random_bool(typo.insertion) {
        let i = rng.random_range(0..=chars.len());
        chars.insert(i, random_letter(rng));
        edits += 1;
    }
    if edits < typo.max_edits && chars.len() > 1 && rng.random_bool(typo.deletion) {
        let i = rng.random_range(0..chars.len());
        chars.remove(i);
        edits += 1;
    }
    (chars.into_iter().collect(), edits)
}

/// Corrupts a month (`max = 12`) or day (`max = 31`) with at most one edit.
/// A digit swap acts on the zero-padded two-digit form (`18` → `81`,
/// `07` → `70`) and leaves values with equal digits unchanged.
pub fn corrupt_date_part<R: Rng + ?Sized>(value: u32, max: u32, typo: &TypoModel, rng: &mut R) -> u32 {
    let u: f64 = rng.random();
    if u < typo.digit_swap {
        (value % 10) * 10 + value / 10
    } else if u < typo.digit_swap + typo.off_by_one {
        if value <= 1 || (value < max && rng.random_bool(0.5)) {
            value + 1
        } else {
            value - 1
        }
    } else if u < typo.digit_swap + typo.off_by_one + typo.replace {
        let mut v = rng.random_range(1..=max);
        while v == value {
            v = rng.random_range(1..=max);
        }
        v
    } else {
        value
    }
}

/// Produces a corrupted copy of an identity. Birth year is never changed so
/// true duplicates always share a block. Under a field cap only edits that
/// actually change a value count towards it.
pub fn inject_errors<R: Rng + ?Sized>(record: &Identity, typo: &TypoModel, rng: &mut R) -> (Identity, Vec<FieldEdit>) {
    let mut out = record.clone();
    let mut log = Vec::new();
    let mut fields = [Field::FirstName, Field::LastName, Field::BirthMonth, Field::BirthDay];
    if typo.max_fields.is_some() {
        fields.shuffle(rng);
    }
    for field in fields {
        if typo.max_fields.is_some_and(|cap| log.len() >= cap) {
            break;
        }
        let (original, corrupted, edits) = match field {
            Field::FirstName => {
                let (s, e) = corrupt_name(&record.first_name, typo, rng);
                out.first_name = s.clone();
                (record.first_name.clone(), s, e)
            }
            Field::LastName => {
                let (s, e) = corrupt_name(&record.last_name, typo, rng);
                out.last_name = s.clone();
                (record.last_name.clone(), s, e)
            }
            Field::BirthMonth => {
                out.birth_month = corrupt_date_part(record.birth_month, 12, typo, rng);
                (record.birth_month.to_string(), out.birth_month.to_string(), 1)
            }
            _ => {
                out.birth_day = corrupt_date_part(record.birth_day, 31, typo, rng);
                (record.birth_day.to_string(), out.birth_day.to_string(), 1)
            }
        };
        if original != corrupted {
            log.push(FieldEdit {
                field,
                original,
                corrupted,
                edits,
            });
        }
    }
    (out, log)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// `5 + 5 x1 + 3 x2`
    Linear,
    /// `5 + 15 x1 - 7 x2`
    #[serde(rename = "linear-highR2")]
    LinearHighR2,
    /// `5 + 0.2 x1^2 + exp(0.7 x2)`
    Nonlinear,
}

impl Scenario {
    /// Outcome under control, before noise.
    pub fn response(self, x1: f64, x2: f64) -> f64 {
        match self {
            Scenario::Linear => 5.0 + 5.0 * x1 + 3.0 * x2,
            Scenario::LinearHighR2 => 5.0 + 15.0 * x1 - 7.0 * x2,
            Scenario::Nonlinear => 5.0 + 0.2 * x1 * x1 + (0.7 * x2).exp(),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Linear => "linear",
            Scenario::LinearHighR2 => "linear-highR2",
            Scenario::Nonlinear => "nonlinear",
        })
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(Scenario::Linear),
            "linear-highr2" | "linear-high-r2" => Ok(Scenario::LinearHighR2),
            "nonlinear" => Ok(Scenario::Nonlinear),
            _ => Err(format!(
                "unknown scenario `{s}` (expected linear, linear-highR2 or nonlinear)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub tau: f64,
    /// Outcome noise standard deviation; zero gives noiseless outcomes.
    pub sigma: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            scenario: Scenario::Linear,
            tau: 50.0,
            sigma: 10.0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(SimError::Config(format!(
                "sigma must be non-negative, got {}",
                self.sigma
            )));
        }
        if !self.tau.is_finite() {
            return Err(SimError::Config("tau must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Covariates {
    pub treated: bool,
    pub x1: f64,
    pub x2: f64,
}

/// `w ~ Bernoulli(0.5)`, `x1 | w ~ Poisson(8 - 3w)`, `x2 | w ~ Normal(-w, 3)`.
pub fn generate_covariates_treatment<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<Covariates> {
    let pois = [Poisson::new(8.0).unwrap(), Poisson::new(5.0).unwrap()];
    let norm = [Normal::new(0.0, 3.0).unwrap(), Normal::new(-1.0, 3.0).unwrap()];
    (0..n)
        .map(|_| {
            let treated = rng.random_bool(0.5);
            let w = treated as usize;
            let x1 = pois[w].sample(rng);
            let x2 = norm[w].sample(rng);
            Covariates { treated, x1, x2 }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub y0: f64,
    pub y1: f64,
    pub y: f64,
}

/// Draws one outcome; the noise is shared by both potential outcomes so
/// `y1 = y0 + tau` (up to rounding).
pub fn generate_outcome<R: Rng + ?Sized>(scn: &ScenarioConfig, cov: &Covariates, rng: &mut R) -> Outcome {
    let eps = if scn.sigma > 0.0 {
        Normal::new(0.0, scn.sigma).expect("validated sigma").sample(rng)
    } else {
        0.0
    };
    let y0 = scn.scenario.response(cov.x1, cov.x2) + eps;
    let y1 = y0 + scn.tau;
    Outcome {
        y0,
        y1,
        y: if cov.treated { y1 } else { y0 },
    }
}

/// Everything known about one simulated person in a replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitTruth {
    pub person: usize,
    pub a_id: Option<RecordId>,
    pub b_id: Option<RecordId>,
    pub covariates: Covariates,
    pub outcome: Outcome,
}

/// A corruption-log row keyed by the File B record it affected.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptionEntry {
    pub b_id: RecordId,
    pub field: Field,
    pub original: String,
    pub corrupted: String,
    pub edits: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// True `(a_id, b_id)` pairs, ascending by `a_id`.
    pub links: Vec<(RecordId, RecordId)>,
    pub corruption_log: Vec<CorruptionEntry>,
    /// One entry per person appearing in either file, ascending by person.
    pub units: Vec<UnitTruth>,
    by_a: HashMap<RecordId, usize>,
    by_b: HashMap<RecordId, usize>,
}

impl GroundTruth {
    pub fn new(links: Vec<(RecordId, RecordId)>, corruption_log: Vec<CorruptionEntry>, units: Vec<UnitTruth>) -> Self {
        let by_a = units
            .iter()
            .enumerate()
            .filter_map(|(i, u)| u.a_id.map(|id| (id, i)))
            .collect();
        let by_b = units
            .iter()
            .enumerate()
            .filter_map(|(i, u)| u.b_id.map(|id| (id, i)))
            .collect();
        GroundTruth {
            links,
            corruption_log,
            units,
            by_a,
            by_b,
        }
    }

    pub fn unit_of_a(&self, a_id: RecordId) -> Option<&UnitTruth> {
        self.by_a.get(&a_id).map(|&i| &self.units[i])
    }

    pub fn unit_of_b(&self, b_id: RecordId) -> Option<&UnitTruth> {
        self.by_b.get(&b_id).map(|&i| &self.units[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub file_a: Vec<RecordA>,
    pub file_b: Vec<RecordB>,
    pub truth: GroundTruth,
}

/// Splits the corpus into two files and simulates treatment, covariates and
/// outcomes for one replication. Record ids are `1..=n` in shuffled order.
pub fn generate_dataset(
    corpus: &Corpus,
    cfg: &CorpusConfig,
    scn: &ScenarioConfig,
    master_seed: u64,
    replication: u64,
) -> Result<Dataset, SimError> {
    cfg.validate()?;
    scn.validate()?;
    if corpus.persons.len() != cfg.n_persons || corpus.duplicates.len() != cfg.n_duplicates {
        return Err(SimError::Config("corpus does not match its configuration".into()));
    }
    let mut split_rng = stream(master_seed, Some(replication), Purpose::Split);
    let dup_set: HashSet<usize> = corpus.duplicates.iter().map(|d| d.person).collect();
    let mut singles: Vec<usize> = (0..cfg.n_persons).filter(|p| !dup_set.contains(p)).collect();
    singles.shuffle(&mut split_rng);
    let a_only = cfg.n_a - cfg.n_duplicates;
    let b_only = cfg.n_b - cfg.n_duplicates;

    // (person, duplicate index) for each record; File B uses the corrupted copy.
    let mut a_rows: Vec<usize> = corpus
        .duplicates
        .iter()
        .map(|d| d.person)
        .chain(singles[..a_only].iter().copied())
        .collect();
    let mut b_rows: Vec<(usize, Option<usize>)> = (0..corpus.duplicates.len())
        .map(|k| (corpus.duplicates[k].person, Some(k)))
        .chain(singles[a_only..a_only + b_only].iter().map(|&p| (p, None)))
        .collect();
    a_rows.shuffle(&mut split_rng);
    b_rows.shuffle(&mut split_rng);

    let mut a_id_of: HashMap<usize, RecordId> = HashMap::with_capacity(a_rows.len());
    for (k, &p) in a_rows.iter().enumerate() {
        a_id_of.insert(p, k as RecordId + 1);
    }
    let mut b_id_of: HashMap<usize, RecordId> = HashMap::with_capacity(b_rows.len());
    for (k, &(p, _)) in b_rows.iter().enumerate() {
        b_id_of.insert(p, k as RecordId + 1);
    }

    let mut involved: Vec<usize> = a_id_of.keys().chain(b_id_of.keys()).copied().collect();
    involved.sort_unstable();
    involved.dedup();
    let mut cov_rng = stream(master_seed, Some(replication), Purpose::Covariates);
    let mut out_rng = stream(master_seed, Some(replication), Purpose::Outcome);
    let covs = generate_covariates_treatment(involved.len(), &mut cov_rng);
    let units: Vec<UnitTruth> = involved
        .iter()
        .zip(covs)
        .map(|(&person, covariates)| UnitTruth {
            person,
            a_id: a_id_of.get(&person).copied(),
            b_id: b_id_of.get(&person).copied(),
            covariates,
            outcome: generate_outcome(scn, &covariates, &mut out_rng),
        })
        .collect();
    let unit_index: HashMap<usize, usize> = involved.iter().enumerate().map(|(i, &p)| (p, i)).collect();

    let file_a = a_rows
        .iter()
        .map(|&p| {
            let id = &corpus.persons[p];
            let u = &units[unit_index[&p]];
            RecordA {
                id: a_id_of[&p],
                first_name: id.first_name.clone(),
                last_name: id.last_name.clone(),
                birth_month: id.birth_month,
                birth_day: id.birth_day,
                birth_year: id.birth_year,
                covariates: vec![u.covariates.x1, u.covariates.x2],
                treated: u.covariates.treated,
            }
        })
        .collect();
    let file_b = b_rows
        .iter()
        .map(|&(p, dup)| {
            let id = dup.map_or(&corpus.persons[p], |k| &corpus.duplicates[k].record);
            RecordB {
                id: b_id_of[&p],
                first_name: id.first_name.clone(),
                last_name: id.last_name.clone(),
                birth_month: id.birth_month,
                birth_day: id.birth_day,
                birth_year: id.birth_year,
                outcome: units[unit_index[&p]].outcome.y,
            }
        })
        .collect();

    let mut links: Vec<(RecordId, RecordId)> = corpus
        .duplicates
        .iter()
        .map(|d| (a_id_of[&d.person], b_id_of[&d.person]))
        .collect();
    links.sort_unstable();
    let mut corruption_log: Vec<CorruptionEntry> = corpus
        .duplicates
        .iter()
        .flat_map(|d| {
            let b_id = b_id_of[&d.person];
            d.edits.iter().map(move |e| CorruptionEntry {
                b_id,
                field: e.field,
                original: e.original.clone(),
                corrupted: e.corrupted.clone(),
                edits: e.edits,
            })
        })
        .collect();
    corruption_log.sort_by_key(|e| e.b_id);

    Ok(Dataset {
        file_a,
        file_b,
        truth: GroundTruth::new(links, corruption_log, units),
    })
}

/// Corpus and first replication from a single seed.
pub fn simulate(cfg: &CorpusConfig, scn: &ScenarioConfig, seed: u64) -> Result<(Corpus, Dataset), SimError> {
    let corpus = generate_corpus(cfg, &mut stream(seed, None, Purpose::Corpus))?;
    let data = generate_dataset(&corpus, cfg, scn, seed, 0)?;
    Ok((corpus, data))
}

pub fn write_truth<W: Write>(out: W, links: &[(RecordId, RecordId)]) -> Result<(), SimError> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["a_id", "b_id"])?;
    for (a, b) in links {
        wtr.write_record([a.to_string(), b.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads an `a_id,b_id` link table as written by [`write_truth`].
pub fn read_truth<R: std::io::Read>(input: R) -> Result<Vec<(RecordId, RecordId)>, SimError> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let (a, b): (RecordId, RecordId) = row?;
        out.push((a, b));
    }
    Ok(out)
}

pub fn write_corruption_log<W: Write>(out: W, log: &[CorruptionEntry]) -> Result<(), SimError> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["b_id", "field", "original", "corrupted", "edits"])?;
    for e in log {
        wtr.write_record([
            e.b_id.to_string(),
            e.field.name().to_string(),
            e.original.clone(),
            e.corrupted.clone(),
            e.edits.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
