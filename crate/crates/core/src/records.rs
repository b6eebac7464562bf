//! File A / File B data model, CSV ingestion and the blocking index.
//!
//! File A carries covariates and a binary treatment, File B carries the
//! outcome. Both share the linking fields (names and birth date). Names are
//! stored uppercased so every downstream comparison is case-insensitive.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type RecordId = u64;

#[derive(Debug, Error)]
pub enum RecordsError {
    #[error("line {line}: column `{column}`: {message}")]
    Parse { line: u64, column: String, message: String },
    #[error("line {line}: duplicate id {id}")]
    DuplicateId { line: u64, id: RecordId },
    #[error("bad header: {0}")]
    Header(String),
    #[error("unknown blocking field `{0}`")]
    UnknownField(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A covariate/treatment record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordA {
    pub id: RecordId,
    pub first_name: String,
    pub last_name: String,
    pub birth_month: u32,
    pub birth_day: u32,
    pub birth_year: i32,
    pub covariates: Vec<f64>,
    pub treated: bool,
}

/// An outcome record.
///
/// Birth month and day are not range-checked here: corrupted duplicates can
/// carry values such as day 81 after a digit swap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordB {
    pub id: RecordId,
    pub first_name: String,
    pub last_name: String,
    pub birth_month: u32,
    pub birth_day: u32,
    pub birth_year: i32,
    pub outcome: f64,
}

/// Read-only view over the linking fields shared by both files.
pub trait LinkingFields {
    fn id(&self) -> RecordId;
    fn first_name(&self) -> &str;
    fn last_name(&self) -> &str;
    fn birth_month(&self) -> u32;
    fn birth_day(&self) -> u32;
    fn birth_year(&self) -> i32;
}

macro_rules! impl_linking_fields {
    ($t:ty) => {
        impl LinkingFields for $t {
            fn id(&self) -> RecordId {
                self.id
            }
            fn first_name(&self) -> &str {
                &self.first_name
            }
            fn last_name(&self) -> &str {
                &self.last_name
            }
            fn birth_month(&self) -> u32 {
                self.birth_month
            }
            fn birth_day(&self) -> u32 {
                self.birth_day
            }
            fn birth_year(&self) -> i32 {
                self.birth_year
            }
        }
    };
}

impl_linking_fields!(RecordA);
impl_linking_fields!(RecordB);

/// A linking field by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    FirstName,
    LastName,
    BirthMonth,
    BirthDay,
    BirthYear,
}

impl Field {
    pub fn name(self) -> &'static str {
        match self {
            Field::FirstName => "first_name",
            Field::LastName => "last_name",
            Field::BirthMonth => "birth_month",
            Field::BirthDay => "birth_day",
            Field::BirthYear => "birth_year",
        }
    }

    /// Raw value of this field as text. Dates are not padded.
    pub fn raw_value<R: LinkingFields + ?Sized>(self, r: &R) -> String {
        match self {
            Field::FirstName => r.first_name().to_string(),
            Field::LastName => r.last_name().to_string(),
            Field::BirthMonth => r.birth_month().to_string(),
            Field::BirthDay => r.birth_day().to_string(),
            Field::BirthYear => r.birth_year().to_string(),
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Field {
    type Err = RecordsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "first_name" => Ok(Field::FirstName),
            "last_name" => Ok(Field::LastName),
            "birth_month" => Ok(Field::BirthMonth),
            "birth_day" => Ok(Field::BirthDay),
            "birth_year" => Ok(Field::BirthYear),
            other => Err(RecordsError::UnknownField(other.to_string())),
        }
    }
}

const IDENTITY_COLUMNS: [&str; 6] = [
    "id",
    "first_name",
    "last_name",
    "birth_month",
    "birth_day",
    "birth_year",
];

fn check_identity_header(header: &csv::StringRecord) -> Result<(), RecordsError> {
    for (i, expected) in IDENTITY_COLUMNS.iter().enumerate() {
        match header.get(i) {
            Some(got) if got.trim() == *expected => {}
            Some(got) => {
                return Err(RecordsError::Header(format!(
                    "column {} should be `{expected}`, found `{got}`",
                    i + 1
                )))
            }
            None => return Err(RecordsError::Header(format!("missing column `{expected}`"))),
        }
    }
    Ok(())
}

fn field<'r>(row: &'r csv::StringRecord, idx: usize, column: &str, line: u64) -> Result<&'r str, RecordsError> {
    row.get(idx).map(str::trim).ok_or_else(|| RecordsError::Parse {
        line,
        column: column.to_string(),
        message: "missing value".to_string(),
    })
}

fn parse_num<T: FromStr>(row: &csv::StringRecord, idx: usize, column: &str, line: u64) -> Result<T, RecordsError>
where
    T::Err: fmt::Display,
{
    let raw = field(row, idx, column, line)?;
    raw.parse::<T>().map_err(|e| RecordsError::Parse {
        line,
        column: column.to_string(),
        message: format!("cannot parse `{raw}`: {e}"),
    })
}

struct Identity {
    id: RecordId,
    first_name: String,
    last_name: String,
    birth_month: u32,
    birth_day: u32,
    birth_year: i32,
}

fn parse_identity(row: &csv::StringRecord, line: u64) -> Result<Identity, RecordsError> {
    Ok(Identity {
        id: parse_num(row, 0, "id", line)?,
        first_name: field(row, 1, "first_name", line)?.to_uppercase(),
        last_name: field(row, 2, "last_name", line)?.to_uppercase(),
        birth_month: parse_num(row, 3, "birth_month", line)?,
        birth_day: parse_num(row, 4, "birth_day", line)?,
        birth_year: parse_num(row, 5, "birth_year", line)?,
    })
}

fn line_of(row: &csv::StringRecord) -> u64 {
    row.position().map(|p| p.line()).unwrap_or(0)
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input)
}

/// Parses File A from any reader. See [`parse_file_a`].
pub fn read_file_a<R: Read>(input: R) -> Result<Vec<RecordA>, RecordsError> {
    let mut rdr = reader(input);
    let header = rdr.headers()?.clone();
    check_identity_header(&header)?;
    let n_cols = header.len();
    if n_cols < IDENTITY_COLUMNS.len() + 1 || header.get(n_cols - 1).map(str::trim) != Some("w") {
        return Err(RecordsError::Header("last column must be `w`".into()));
    }
    let covariate_names: Vec<String> = (IDENTITY_COLUMNS.len()..n_cols - 1)
        .map(|i| header[i].trim().to_string())
        .collect();

    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = line_of(&row);
        if row.len() != n_cols {
            return Err(RecordsError::Parse {
                line,
                column: "*".into(),
                message: format!("expected {n_cols} fields, found {}", row.len()),
            });
        }
        let ident = parse_identity(&row, line)?;
        if !(1..=12).contains(&ident.birth_month) {
            return Err(RecordsError::Parse {
                line,
                column: "birth_month".into(),
                message: format!("{} outside 1-12", ident.birth_month),
            });
        }
        if !(1..=31).contains(&ident.birth_day) {
            return Err(RecordsError::Parse {
                line,
                column: "birth_day".into(),
                message: format!("{} outside 1-31", ident.birth_day),
            });
        }
        let covariates = covariate_names
            .iter()
            .enumerate()
            .map(|(k, name)| parse_num::<f64>(&row, IDENTITY_COLUMNS.len() + k, name, line))
            .collect::<Result<Vec<_>, _>>()?;
        let treated = match field(&row, n_cols - 1, "w", line)? {
            "0" => false,
            "1" => true,
            other => {
                return Err(RecordsError::Parse {
                    line,
                    column: "w".into(),
                    message: format!("treatment must be 0 or 1, found `{other}`"),
                })
            }
        };
        if !seen.insert(ident.id) {
            return Err(RecordsError::DuplicateId { line, id: ident.id });
        }
        out.push(RecordA {
            id: ident.id,
            first_name: ident.first_name,
            last_name: ident.last_name,
            birth_month: ident.birth_month,
            birth_day: ident.birth_day,
            birth_year: ident.birth_year,
            covariates,
            treated,
        });
    }
    Ok(out)
}

/// Parses File B from any reader. See [`parse_file_b`].
pub fn read_file_b<R: Read>(input: R) -> Result<Vec<RecordB>, RecordsError> {
    let mut rdr = reader(input);
    let header = rdr.headers()?.clone();
    check_identity_header(&header)?;
    if header.len() != 7 || header.get(6).map(str::trim) != Some("y") {
        return Err(RecordsError::Header("expected 7 columns ending in `y`".into()));
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = line_of(&row);
        if row.len() != 7 {
            return Err(RecordsError::Parse {
                line,
                column: "*".into(),
                message: format!("expected 7 fields, found {}", row.len()),
            });
        }
        let ident = parse_identity(&row, line)?;
        let outcome: f64 = parse_num(&row, 6, "y", line)?;
        if !seen.insert(ident.id) {
            return Err(RecordsError::DuplicateId { line, id: ident.id });
        }
        out.push(RecordB {
            id: ident.id,
            first_name: ident.first_name,
            last_name: ident.last_name,
            birth_month: ident.birth_month,
            birth_day: ident.birth_day,
            birth_year: ident.birth_year,
            outcome,
        });
    }
    Ok(out)
}

pub fn parse_file_a(path: impl AsRef<Path>) -> Result<Vec<RecordA>, RecordsError> {
    read_file_a(std::fs::File::open(path)?)
}

pub fn parse_file_b(path: impl AsRef<Path>) -> Result<Vec<RecordB>, RecordsError> {
    read_file_b(std::fs::File::open(path)?)
}

/// Writes File A. The number of covariate columns is taken from the first
/// record (zero when the collection is empty).
pub fn write_file_a<W: Write>(out: W, records: &[RecordA]) -> Result<(), RecordsError> {
    let p = records.first().map_or(0, |r| r.covariates.len());
    let mut wtr = csv::Writer::from_writer(out);
    let mut header: Vec<String> = IDENTITY_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend((1..=p).map(|k| format!("x{k}")));
    header.push("w".into());
    wtr.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.id.to_string(),
            r.first_name.clone(),
            r.last_name.clone(),
            r.birth_month.to_string(),
            r.birth_day.to_string(),
            r.birth_year.to_string(),
        ];
        row.extend(r.covariates.iter().map(|x| x.to_string()));
        row.push(if r.treated { "1" } else { "0" }.into());
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_file_b<W: Write>(out: W, records: &[RecordB]) -> Result<(), RecordsError> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(IDENTITY_COLUMNS.iter().chain(std::iter::once(&"y")))?;
    for r in records {
        wtr.write_record([
            r.id.to_string(),
            r.first_name.clone(),
            r.last_name.clone(),
            r.birth_month.to_string(),
            r.birth_day.to_string(),
            r.birth_year.to_string(),
            r.outcome.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// One block: positions into the File A and File B collections.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Block {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
}

impl Block {
    pub fn pair_count(&self) -> usize {
        self.a.len() * self.b.len()
    }
}

/// Exact-equality blocking on a single field.
///
/// Blocks hold positions (not ids) into the slices the index was built from;
/// use [`BlockIndex::ids`] to recover ids.
#[derive(Debug, Clone)]
pub struct BlockIndex {
    pub field: Field,
    pub blocks: BTreeMap<String, Block>,
}

impl BlockIndex {
    pub fn build(a: &[RecordA], b: &[RecordB], field: Field) -> Self {
        let mut blocks: BTreeMap<String, Block> = BTreeMap::new();
        for (i, r) in a.iter().enumerate() {
            blocks.entry(field.raw_value(r)).or_default().a.push(i);
        }
        for (i, r) in b.iter().enumerate() {
            blocks.entry(field.raw_value(r)).or_default().b.push(i);
        }
        BlockIndex { field, blocks }
    }

    /// Number of candidate pairs across all blocks.
    pub fn pair_count(&self) -> usize {
        self.blocks.values().map(Block::pair_count).sum()
    }

    /// `(File A ids, File B ids)` for a block key.
    pub fn ids(&self, key: &str, a: &[RecordA], b: &[RecordB]) -> Option<(Vec<RecordId>, Vec<RecordId>)> {
        self.blocks.get(key).map(|blk| {
            (
                blk.a.iter().map(|&i| a[i].id).collect(),
                blk.b.iter().map(|&i| b[i].id).collect(),
            )
        })
    }

    /// All candidate pairs as positions, block by block.
    pub fn candidate_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.blocks
            .values()
            .flat_map(|blk| blk.a.iter().flat_map(move |&i| blk.b.iter().map(move |&j| (i, j))))
    }
}

/// Builds a block index from a field name such as `"birth_year"`.
pub fn build_blocks(a: &[RecordA], b: &[RecordB], field: &str) -> Result<BlockIndex, RecordsError> {
    Ok(BlockIndex::build(a, b, field.parse()?))
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER_A: &str = "id,first_name,last_name,birth_month,birth_day,birth_year,x1,x2,w\n";

    fn rec_a(id: RecordId, year: i32) -> RecordA {
        RecordA {
            id,
            first_name: "ANNA".into(),
            last_name: "MEIER".into(),
            birth_month: 1,
            birth_day: 2,
            birth_year: year,
            covariates: vec![1.0],
            treated: false,
        }
    }

    fn rec_b(id: RecordId, year: i32) -> RecordB {
        RecordB {
            id,
            first_name: "ANNA".into(),
            last_name: "MEIER".into(),
            birth_month: 1,
            birth_day: 2,
            birth_year: year,
            outcome: 0.5,
        }
    }

    #[test]
    fn single_row_file_a() {
        let text = format!("{HEADER_A}7,anna,Meier,3,14,1950,2,-1.5,1\n");
        let recs = read_file_a(text.as_bytes()).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].id, 7);
        assert_eq!(recs[0].first_name, "ANNA");
        assert_eq!(recs[0].last_name, "MEIER");
        assert_eq!(recs[0].covariates, vec![2.0, -1.5]);
        assert!(recs[0].treated);
    }

    #[test]
    fn treatment_outside_binary_is_rejected() {
        let text = format!("{HEADER_A}1,A,B,1,1,1950,0,0,0\n2,A,B,1,1,1950,0,0,2\n");
        let err = read_file_a(text.as_bytes()).unwrap_err();
        match err {
            RecordsError::Parse { line, column, .. } => {
                assert_eq!(line, 3);
                assert_eq!(column, "w");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn duplicate_id_is_rejected() {
        let text = format!("{HEADER_A}1,A,B,1,1,1950,0,0,0\n1,C,D,1,1,1950,0,0,1\n");
        assert!(matches!(
            read_file_a(text.as_bytes()),
            Err(RecordsError::DuplicateId { id: 1, line: 3 })
        ));
    }

    #[test]
    fn month_out_of_range_is_rejected() {
        let text = format!("{HEADER_A}1,A,B,13,1,1950,0,0,0\n");
        assert!(matches!(read_file_a(text.as_bytes()), Err(RecordsError::Parse { .. })));
    }

    #[test]
    fn empty_file_b_body() {
        let text = "id,first_name,last_name,birth_month,birth_day,birth_year,y\n";
        assert!(read_file_b(text.as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn non_numeric_outcome_is_rejected() {
        let text = "id,first_name,last_name,birth_month,birth_day,birth_year,y\n1,A,B,1,1,1950,abc\n";
        let err = read_file_b(text.as_bytes()).unwrap_err();
        assert!(matches!(err, RecordsError::Parse { ref column, .. } if column == "y"));
    }

    #[test]
    fn file_b_accepts_corrupted_days() {
        let text = "id,first_name,last_name,birth_month,birth_day,birth_year,y\n1,A,B,11,81,1994,3.5\n";
        assert_eq!(read_file_b(text.as_bytes()).unwrap()[0].birth_day, 81);
    }

    #[test]
    fn blocks_by_birth_year() {
        let a = vec![rec_a(1, 1900), rec_a(2, 1950)];
        let b = vec![rec_b(10, 1950)];
        let idx = build_blocks(&a, &b, "birth_year").unwrap();
        assert_eq!(idx.blocks.len(), 2);
        assert_eq!(idx.ids("1950", &a, &b), Some((vec![2], vec![10])));
        assert_eq!(idx.ids("1900", &a, &b), Some((vec![1], vec![])));
        assert_eq!(idx.pair_count(), 1);
    }

    #[test]
    fn single_block_when_all_share_year() {
        let a: Vec<_> = (0..4).map(|i| rec_a(i, 1960)).collect();
        let b: Vec<_> = (0..7).map(|i| rec_b(i, 1960)).collect();
        let idx = BlockIndex::build(&a, &b, Field::BirthYear);
        assert_eq!(idx.blocks.len(), 1);
        assert_eq!(idx.pair_count(), 28);
        assert_eq!(idx.candidate_pairs().count(), 28);
    }

    #[test]
    fn unknown_block_field() {
        assert!(matches!(
            build_blocks(&[], &[], "zip"),
            Err(RecordsError::UnknownField(f)) if f == "zip"
        ));
    }
}
