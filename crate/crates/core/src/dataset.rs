//! Dictionary-encoded columnar tables.
//!
//! Every cell is ingested as a string and replaced by its rank in the sorted
//! set of distinct strings of its column, so codes compare exactly like the
//! raw values do. Empty cells are kept as the empty string, which sorts
//! before every other value.

use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Raw value stored for a missing (empty) cell.
pub const MISSING: &str = "";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    n: usize,
    columns: Vec<Vec<u32>>,
    dictionaries: Vec<Vec<String>>,
    names: Option<Vec<String>>,
}

impl Dataset {
    /// Loads a CSV file. Quoting follows RFC 4180.
    pub fn load_csv(path: impl AsRef<Path>, has_header: bool) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::read_csv(file, has_header)
    }

    pub fn read_csv<R: io::Read>(reader: R, has_header: bool) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(reader);

        let mut names = None;
        let mut width = None;
        let mut columns: Vec<Vec<String>> = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            match width {
                None => {
                    width = Some(record.len());
                    columns = vec![Vec::new(); record.len()];
                    if has_header {
                        names = Some(record.iter().map(str::to_owned).collect());
                        continue;
                    }
                }
                Some(expected) if expected != record.len() => {
                    return Err(Error::RaggedRow {
                        line,
                        expected,
                        found: record.len(),
                    });
                }
                Some(_) => {}
            }
            for (col, field) in columns.iter_mut().zip(record.iter()) {
                col.push(field.to_owned());
            }
        }
        Self::from_columns(columns, names)
    }

    /// Builds a dataset from row-major string cells.
    pub fn from_rows<S: AsRef<str>>(rows: &[Vec<S>], names: Option<Vec<String>>) -> Result<Self> {
        let m = rows.first().map(Vec::len).ok_or(Error::EmptyInput)?;
        let mut columns = vec![Vec::with_capacity(rows.len()); m];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::RaggedRow {
                    line: i as u64 + 1,
                    expected: m,
                    found: row.len(),
                });
            }
            for (col, cell) in columns.iter_mut().zip(row) {
                col.push(cell.as_ref().to_owned());
            }
        }
        Self::from_columns(columns, names)
    }

    /// Builds a dataset from column-major string cells.
    pub fn from_columns(columns: Vec<Vec<String>>, names: Option<Vec<String>>) -> Result<Self> {
        let n = columns.first().map_or(0, Vec::len);
        if n == 0 || columns.is_empty() {
            return Err(Error::EmptyInput);
        }
        if let Some(bad) = columns.iter().position(|c| c.len() != n) {
            return Err(Error::InvalidParameter(format!(
                "column {bad} has {} cells, expected {n}",
                columns[bad].len()
            )));
        }
        if let Some(names) = &names {
            if names.len() != columns.len() {
                return Err(Error::InvalidParameter(format!(
                    "{} column names for {} columns",
                    names.len(),
                    columns.len()
                )));
            }
        }
        let (codes, dictionaries) = columns.iter().map(|c| encode_column(c)).unzip();
        Ok(Self {
            n,
            columns: codes,
            dictionaries,
            names,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, k: usize) -> &[u32] {
        &self.columns[k]
    }

    pub fn dictionary(&self, k: usize) -> &[String] {
        &self.dictionaries[k]
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    /// Column name from the header, or `c{k}` when there was none.
    pub fn column_name(&self, k: usize) -> String {
        match &self.names {
            Some(names) => names[k].clone(),
            None => format!("c{k}"),
        }
    }

    pub fn code(&self, row: usize, col: usize) -> u32 {
        self.columns[col][row]
    }

    pub fn decode(&self, row: usize, col: usize) -> &str {
        &self.dictionaries[col][self.columns[col][row] as usize]
    }

    pub fn row_codes(&self, row: usize) -> Vec<u32> {
        self.columns.iter().map(|c| c[row]).collect()
    }

    /// Codes at the columns of `attrs`, in `attrs` order, for each requested row.
    pub fn project(&self, rows: &[usize], attrs: &AttributeSet) -> Result<Vec<Vec<u32>>> {
        self.check_attrs(attrs)?;
        rows.iter()
            .map(|&r| {
                self.check_row(r)?;
                Ok(attrs.iter().map(|k| self.columns[k][r]).collect())
            })
            .collect()
    }

    /// Copies the full code vectors of `rows` into a standalone row-major block.
    pub fn gather(&self, rows: &[usize]) -> Result<SampleRows> {
        let m = self.n_cols();
        let mut codes = Vec::with_capacity(rows.len() * m);
        for &r in rows {
            self.check_row(r)?;
            codes.extend(self.columns.iter().map(|c| c[r]));
        }
        Ok(SampleRows {
            m,
            source: rows.to_vec(),
            codes,
        })
    }

    pub fn write_csv<W: io::Write>(&self, writer: W, header: bool) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        if header {
            let names: Vec<String> = (0..self.n_cols()).map(|k| self.column_name(k)).collect();
            wtr.write_record(&names)?;
        }
        let mut row = Vec::with_capacity(self.n_cols());
        for r in 0..self.n {
            row.clear();
            row.extend((0..self.n_cols()).map(|k| self.decode(r, k)));
            wtr.write_record(&row)?;
        }
        wtr.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }

    pub(crate) fn check_row(&self, r: usize) -> Result<()> {
        if r >= self.n {
            return Err(Error::RowOutOfRange {
                index: r,
                rows: self.n,
            });
        }
        Ok(())
    }

    pub(crate) fn check_attrs(&self, attrs: &AttributeSet) -> Result<()> {
        attrs.check_bound(self.n_cols())
    }
}

fn encode_column(values: &[String]) -> (Vec<u32>, Vec<String>) {
    let mut dict: Vec<&str> = values.iter().map(String::as_str).collect();
    dict.sort_unstable();
    dict.dedup();
    let codes = values
        .iter()
        .map(|v| dict.binary_search(&v.as_str()).expect("value present in its own dictionary") as u32)
        .collect();
    (codes, dict.into_iter().map(str::to_owned).collect())
}

/// A subset of column indices, kept sorted and duplicate free.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AttributeSet(Vec<usize>);

impl AttributeSet {
    pub fn new(indices: impl IntoIterator<Item = usize>, m: usize) -> Result<Self> {
        let mut v: Vec<usize> = indices.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        let set = Self(v);
        set.check_bound(m)?;
        Ok(set)
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn full(m: usize) -> Self {
        Self((0..m).collect())
    }

    pub fn singleton(k: usize) -> Self {
        Self(vec![k])
    }

    /// Bit `k` of `mask` selects column `k`.
    pub fn from_mask(mask: u64) -> Self {
        Self((0..64).filter(|k| mask >> k & 1 == 1).collect())
    }

    pub fn mask(&self) -> u64 {
        self.0.iter().fold(0, |acc, &k| acc | 1 << k)
    }

    /// Parses a comma list of column names or 0-based indices. Names win
    /// over indices when a header column is literally called `3`.
    pub fn parse(spec: &str, names: Option<&[String]>, m: usize) -> Result<Self> {
        let mut idx = Vec::new();
        for token in spec.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let by_name = names.and_then(|ns| ns.iter().position(|n| n == token));
            match by_name.or_else(|| token.parse::<usize>().ok()) {
                Some(k) if k < m => idx.push(k),
                Some(k) => return Err(Error::ColumnOutOfRange { index: k, columns: m }),
                None => return Err(Error::UnknownColumn(token.to_owned())),
            }
        }
        Self::new(idx, m)
    }

    pub fn with(&self, k: usize) -> Self {
        let mut v = self.0.clone();
        if let Err(pos) = v.binary_search(&k) {
            v.insert(pos, k);
        }
        Self(v)
    }

    pub fn contains(&self, k: usize) -> bool {
        self.0.binary_search(&k).is_ok()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub(crate) fn check_bound(&self, m: usize) -> Result<()> {
        match self.0.last() {
            Some(&k) if k >= m => Err(Error::ColumnOutOfRange { index: k, columns: m }),
            _ => Ok(()),
        }
    }
}

/// Full code vectors of a set of rows, stored row-major so a sketch can
/// answer queries without the dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRows {
    m: usize,
    source: Vec<usize>,
    codes: Vec<u32>,
}

impl SampleRows {
    pub fn new(m: usize, source: Vec<usize>, codes: Vec<u32>) -> Result<Self> {
        if codes.len() != source.len() * m {
            return Err(Error::InvalidParameter(format!(
                "{} codes for {} rows of width {m}",
                codes.len(),
                source.len()
            )));
        }
        Ok(Self { m, source, codes })
    }

    /// Re-checks the shape invariant, e.g. after deserializing.
    pub(crate) fn validate(&self) -> Result<()> {
        if self.codes.len() != self.source.len() * self.m {
            return Err(Error::SketchFormat(format!(
                "{} codes for {} rows of width {}",
                self.codes.len(),
                self.source.len(),
                self.m
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }

    pub fn n_cols(&self) -> usize {
        self.m
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.codes[i * self.m..(i + 1) * self.m]
    }

    pub fn code(&self, i: usize, k: usize) -> u32 {
        self.codes[i * self.m + k]
    }

    /// Dataset row index the `i`-th sampled row was copied from.
    pub fn source_row(&self, i: usize) -> usize {
        self.source[i]
    }

    pub fn source_rows(&self) -> &[usize] {
        &self.source
    }

    /// True when rows `i` and `j` agree on every column of `attrs`.
    pub fn agree_on(&self, i: usize, j: usize, attrs: &AttributeSet) -> bool {
        let (a, b) = (self.row(i), self.row(j));
        attrs.iter().all(|k| a[k] == b[k])
    }
}
