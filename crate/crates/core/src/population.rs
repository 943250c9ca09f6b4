//! Finite populations, sample memberships and their CSV encoding.
//!
//! The on-disk layout is a header-bearing UTF-8 CSV:
//!
//! ```text
//! id,y[,sampled][,row,col][,x1,x2,...]
//! ```
//!
//! `sampled` is 0/1. Every column that is not one of the reserved names is a
//! covariate, in header order, unless a [`Schema`] says otherwise.

use std::collections::HashSet;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::summation;

/// Integer grid coordinates of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub row: u32,
    pub col: u32,
}

impl Cell {
    pub fn new(row: u32, col: u32) -> Self {
        Self { row, col }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Unit {
    pub id: String,
    pub y: f64,
    pub covariates: Vec<f64>,
    pub cell: Option<Cell>,
}

impl Unit {
    pub fn new(id: impl Into<String>, y: f64) -> Self {
        Self {
            id: id.into(),
            y,
            covariates: Vec::new(),
            cell: None,
        }
    }

    pub fn with_covariates(mut self, covariates: Vec<f64>) -> Self {
        self.covariates = covariates;
        self
    }

    pub fn with_cell(mut self, row: u32, col: u32) -> Self {
        self.cell = Some(Cell::new(row, col));
        self
    }
}

/// An immutable finite population of `N >= 1` units.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    units: Vec<Unit>,
    covariate_names: Vec<String>,
}

impl Population {
    /// Rejects duplicate ids and non-finite or ragged unit data.
    pub fn new(units: Vec<Unit>, covariate_names: Vec<String>) -> Result<Self> {
        if units.is_empty() {
            return Err(Error::EmptyPopulation);
        }
        let dim = covariate_names.len();
        let mut seen = HashSet::with_capacity(units.len());
        for unit in &units {
            if !seen.insert(unit.id.as_str()) {
                return Err(Error::DuplicateId(unit.id.clone()));
            }
            if !unit.y.is_finite() {
                return Err(Error::NonFinite {
                    id: unit.id.clone(),
                    value: unit.y,
                });
            }
            if unit.covariates.len() != dim {
                return Err(Error::CovariateDimension {
                    id: unit.id.clone(),
                    expected: dim,
                    found: unit.covariates.len(),
                });
            }
            if let Some(&bad) = unit.covariates.iter().find(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    id: unit.id.clone(),
                    value: bad,
                });
            }
        }
        Ok(Self {
            units,
            covariate_names,
        })
    }

    /// Population from bare study-variable values, ids `"0"`, `"1"`, ...
    pub fn from_values(values: &[f64]) -> Result<Self> {
        let units = values
            .iter()
            .enumerate()
            .map(|(i, &y)| Unit::new(i.to_string(), y))
            .collect();
        Self::new(units, Vec::new())
    }

    pub fn units(&self) -> &[Unit] {
        &self.units
    }

    pub fn unit(&self, index: usize) -> &Unit {
        &self.units[index]
    }

    /// Population size `N`.
    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn y(&self, index: usize) -> f64 {
        self.units[index].y
    }

    pub fn y_values(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        self.units.iter().map(|u| u.y)
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn covariate_dim(&self) -> usize {
        self.covariate_names.len()
    }

    pub fn has_covariates(&self) -> bool {
        !self.covariate_names.is_empty()
    }

    pub fn is_gridded(&self) -> bool {
        self.units.iter().all(|u| u.cell.is_some())
    }

    /// Fails with [`Error::NonBinary`] on the first unit whose y is not 0 or 1.
    pub fn require_binary(&self) -> Result<()> {
        match self.units.iter().find(|u| u.y != 0.0 && u.y != 1.0) {
            Some(u) => Err(Error::NonBinary {
                id: u.id.clone(),
                value: u.y,
            }),
            None => Ok(()),
        }
    }

    /// Number of units with y = 1. Only meaningful for binary populations.
    pub fn count_ones(&self) -> usize {
        self.units.iter().filter(|u| u.y == 1.0).count()
    }
}

/// Inclusion indicator `R` aligned with a population's unit order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SampleMembership {
    flags: Vec<bool>,
    n: usize,
}

impl SampleMembership {
    pub fn from_flags(flags: Vec<bool>) -> Self {
        let n = flags.iter().filter(|&&f| f).count();
        Self { flags, n }
    }

    /// Membership of size `indices.len()` over `len` units. Duplicate or
    /// out-of-range indices are rejected.
    pub fn from_indices(len: usize, indices: &[usize]) -> Result<Self> {
        let mut flags = vec![false; len];
        for &i in indices {
            match flags.get_mut(i) {
                Some(slot) if !*slot => *slot = true,
                Some(_) => return Err(Error::invalid(format!("index {i} selected twice"))),
                None => {
                    return Err(Error::invalid(format!(
                        "index {i} out of range for {len} units"
                    )))
                }
            }
        }
        Ok(Self {
            flags,
            n: indices.len(),
        })
    }

    pub fn census(len: usize) -> Self {
        Self {
            flags: vec![true; len],
            n: len,
        }
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    /// Population size this membership is aligned to.
    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    /// Sample size `n`.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn contains(&self, index: usize) -> bool {
        self.flags[index]
    }

    pub fn sampled_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.flags
            .iter()
            .enumerate()
            .filter_map(|(i, &f)| f.then_some(i))
    }

    pub(crate) fn check_aligned(&self, pop: &Population) -> Result<()> {
        if self.len() != pop.len() {
            return Err(Error::LengthMismatch {
                expected: pop.len(),
                found: self.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationStats {
    pub n_units: usize,
    pub mean: f64,
    /// Population (divide-by-N) standard deviation.
    pub sd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub n: usize,
    pub mean: f64,
}

pub fn population_stats(pop: &Population) -> PopulationStats {
    let n = pop.len() as f64;
    let mean = summation::sum(pop.y_values()) / n;
    let ss = summation::sum(pop.y_values().map(|y| (y - mean) * (y - mean)));
    PopulationStats {
        n_units: pop.len(),
        mean,
        sd: (ss / n).sqrt(),
    }
}

pub fn sample_stats(pop: &Population, membership: &SampleMembership) -> Result<SampleStats> {
    membership.check_aligned(pop)?;
    if membership.n() == 0 {
        return Err(Error::EmptySample);
    }
    let total = summation::sum(membership.sampled_indices().map(|i| pop.y(i)));
    Ok(SampleStats {
        n: membership.n(),
        mean: total / membership.n() as f64,
    })
}

/// Column mapping for [`load_population`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    pub id: String,
    pub y: String,
    pub sampled: String,
    pub row: String,
    pub col: String,
    /// Explicit covariate columns. `None` takes every non-reserved column.
    pub covariates: Option<Vec<String>>,
}

impl Default for Schema {
    fn default() -> Self {
        Self {
            id: "id".into(),
            y: "y".into(),
            sampled: "sampled".into(),
            row: "row".into(),
            col: "col".into(),
            covariates: None,
        }
    }
}

/// A parsed population, with the membership if the table carried `sampled`.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedPopulation {
    pub population: Population,
    pub membership: Option<SampleMembership>,
}

fn parse_field<T: std::str::FromStr>(raw: &str, line: u64, column: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    raw.trim().parse::<T>().map_err(|e| Error::Parse {
        line,
        column: column.to_string(),
        message: format!("cannot parse `{raw}`: {e}"),
    })
}

pub fn load_population<R: Read>(source: R, schema: &Schema) -> Result<LoadedPopulation> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);

    let id_idx = find(&schema.id).ok_or_else(|| Error::MissingColumn(schema.id.clone()))?;
    let y_idx = find(&schema.y).ok_or_else(|| Error::MissingColumn(schema.y.clone()))?;
    let sampled_idx = find(&schema.sampled);
    let row_idx = find(&schema.row);
    let col_idx = find(&schema.col);
    let cell_idx = match (row_idx, col_idx) {
        (Some(r), Some(c)) => Some((r, c)),
        (None, None) => None,
        (Some(_), None) => return Err(Error::MissingColumn(schema.col.clone())),
        (None, Some(_)) => return Err(Error::MissingColumn(schema.row.clone())),
    };

    let (covariate_names, covariate_idx): (Vec<String>, Vec<usize>) = match &schema.covariates {
        Some(names) => {
            let mut idx = Vec::with_capacity(names.len());
            for name in names {
                idx.push(find(name).ok_or_else(|| Error::MissingColumn(name.clone()))?);
            }
            (names.clone(), idx)
        }
        None => {
            let reserved: Vec<usize> = [Some(id_idx), Some(y_idx), sampled_idx, row_idx, col_idx]
                .into_iter()
                .flatten()
                .collect();
            headers
                .iter()
                .enumerate()
                .filter(|(i, _)| !reserved.contains(i))
                .map(|(i, h)| (h.trim().to_string(), i))
                .unzip()
        }
    };

    let width = headers.len();
    let mut units = Vec::new();
    let mut flags = sampled_idx.map(|_| Vec::new());
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != width {
            return Err(Error::RaggedRow {
                line,
                expected: width,
                found: record.len(),
            });
        }
        let id = record[id_idx].trim().to_string();
        let y: f64 = parse_field(&record[y_idx], line, &schema.y)?;
        if !y.is_finite() {
            return Err(Error::Parse {
                line,
                column: schema.y.clone(),
                message: format!("non-finite value `{}`", &record[y_idx]),
            });
        }
        let covariates = covariate_idx
            .iter()
            .zip(&covariate_names)
            .map(|(&i, name)| parse_field::<f64>(&record[i], line, name))
            .collect::<Result<Vec<_>>>()?;
        let cell = match cell_idx {
            Some((r, c)) if !record[r].trim().is_empty() || !record[c].trim().is_empty() => {
                Some(Cell::new(
                    parse_field(&record[r], line, &schema.row)?,
                    parse_field(&record[c], line, &schema.col)?,
                ))
            }
            _ => None,
        };
        if let (Some(flags), Some(s)) = (flags.as_mut(), sampled_idx) {
            match record[s].trim() {
                "0" => flags.push(false),
                "1" => flags.push(true),
                other => {
                    return Err(Error::Parse {
                        line,
                        column: schema.sampled.clone(),
                        message: format!("sampled must be 0 or 1, found `{other}`"),
                    })
                }
            }
        }
        units.push(Unit {
            id,
            y,
            covariates,
            cell,
        });
    }
    if units.is_empty() {
        return Err(Error::EmptyTable);
    }
    let population = Population::new(units, covariate_names)?;
    Ok(LoadedPopulation {
        population,
        membership: flags.map(SampleMembership::from_flags),
    })
}

/// Writes the canonical CSV encoding. Floats use Rust's shortest
/// round-tripping representation, so reloading is bit-exact.
pub fn write_population<W: Write>(
    sink: W,
    pop: &Population,
    membership: Option<&SampleMembership>,
) -> Result<()> {
    if let Some(m) = membership {
        m.check_aligned(pop)?;
    }
    let gridded = pop.units().iter().any(|u| u.cell.is_some());
    let mut writer = csv::Writer::from_writer(sink);
    let mut header = vec!["id".to_string(), "y".to_string()];
    if membership.is_some() {
        header.push("sampled".into());
    }
    if gridded {
        header.push("row".into());
        header.push("col".into());
    }
    header.extend(pop.covariate_names().iter().cloned());
    writer.write_record(&header)?;

    let mut record = Vec::with_capacity(header.len());
    for (i, unit) in pop.units().iter().enumerate() {
        record.clear();
        record.push(unit.id.clone());
        record.push(unit.y.to_string());
        if let Some(m) = membership {
            record.push(if m.contains(i) { "1" } else { "0" }.to_string());
        }
        if gridded {
            match unit.cell {
                Some(c) => {
                    record.push(c.row.to_string());
                    record.push(c.col.to_string());
                }
                None => {
                    record.push(String::new());
                    record.push(String::new());
                }
            }
        }
        record.extend(unit.covariates.iter().map(|v| v.to_string()));
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Writes an `id,sampled` table in population order.
pub fn write_membership<W: Write>(
    sink: W,
    pop: &Population,
    membership: &SampleMembership,
) -> Result<()> {
    membership.check_aligned(pop)?;
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(["id", "sampled"])?;
    for (i, unit) in pop.units().iter().enumerate() {
        writer.write_record([
            unit.id.as_str(),
            if membership.contains(i) { "1" } else { "0" },
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads an `id,sampled` table and aligns it with `pop`. Every unit must
/// appear exactly once.
pub fn load_membership<R: Read>(source: R, pop: &Population) -> Result<SampleMembership> {
    let mut reader = csv::Reader::from_reader(source);
    let headers = reader.headers()?.clone();
    let id_idx = headers
        .iter()
        .position(|h| h.trim() == "id")
        .ok_or_else(|| Error::MissingColumn("id".into()))?;
    let s_idx = headers
        .iter()
        .position(|h| h.trim() == "sampled")
        .ok_or_else(|| Error::MissingColumn("sampled".into()))?;
    let index: std::collections::HashMap<&str, usize> = pop
        .units()
        .iter()
        .enumerate()
        .map(|(i, u)| (u.id.as_str(), i))
        .collect();
    let mut flags: Vec<Option<bool>> = vec![None; pop.len()];
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let id = record.get(id_idx).unwrap_or("").trim();
        let &i = index.get(id).ok_or_else(|| Error::Parse {
            line,
            column: "id".into(),
            message: format!("unknown unit id `{id}`"),
        })?;
        let value = match record.get(s_idx).map(str::trim) {
            Some("0") => false,
            Some("1") => true,
            other => {
                return Err(Error::Parse {
                    line,
                    column: "sampled".into(),
                    message: format!("sampled must be 0 or 1, found `{}`", other.unwrap_or("")),
                })
            }
        };
        if flags[i].replace(value).is_some() {
            return Err(Error::DuplicateId(id.to_string()));
        }
    }
    if let Some(missing) = flags.iter().position(Option::is_none) {
        return Err(Error::invalid(format!(
            "membership table has no row for unit `{}`",
            pop.unit(missing).id
        )));
    }
    Ok(SampleMembership::from_flags(
        flags.into_iter().map(|f| f.unwrap_or(false)).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str) -> Result<LoadedPopulation> {
        load_population(text.as_bytes(), &Schema::default())
    }

    #[test]
    fn loads_four_row_table_with_membership() {
        let loaded = load("id,y,sampled\nA,1,1\nB,1,1\nC,0,0\nD,0,0\n").unwrap();
        assert_eq!(loaded.population.len(), 4);
        let m = loaded.membership.unwrap();
        assert_eq!(m.n(), 2);
        assert_eq!(m.flags(), &[true, true, false, false]);
        let ids: Vec<_> = loaded
            .population
            .units()
            .iter()
            .map(|u| u.id.as_str())
            .collect();
        assert_eq!(ids, ["A", "B", "C", "D"]);
    }

    #[test]
    fn duplicate_id_is_rejected() {
        let err = load("id,y\nA,1\nA,0\n").unwrap_err();
        assert!(err.to_string().contains("duplicate unit id"), "{err}");
    }

    #[test]
    fn non_numeric_y_is_rejected() {
        assert!(matches!(load("id,y\nA,abc\n"), Err(Error::Parse { .. })));
        assert!(matches!(load("id,y\nA,NaN\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let err = load("id,y,x1,x2\nA,1,0.5,0.1\nB,0,0.2\n").unwrap_err();
        assert!(matches!(
            err,
            Error::RaggedRow {
                expected: 4,
                found: 3,
                ..
            }
        ));
    }

    #[test]
    fn sampled_must_be_zero_or_one() {
        assert!(matches!(
            load("id,y,sampled\nA,1,2\n"),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn empty_table_is_rejected() {
        assert!(matches!(load("id,y\n"), Err(Error::EmptyTable)));
    }

    #[test]
    fn missing_y_column() {
        assert!(matches!(load("id,z\nA,1\n"), Err(Error::MissingColumn(c)) if c == "y"));
    }

    #[test]
    fn covariates_and_cells_are_parsed() {
        let loaded = load("id,y,row,col,x1,x2\nA,0.5,3,4,1.5,-2\nB,2,0,0,0,1e-3\n").unwrap();
        let pop = loaded.population;
        assert!(loaded.membership.is_none());
        assert_eq!(pop.covariate_names(), &["x1".to_string(), "x2".to_string()]);
        assert_eq!(pop.unit(0).cell, Some(Cell::new(3, 4)));
        assert_eq!(pop.unit(1).covariates, vec![0.0, 1e-3]);
        assert!(pop.is_gridded());
    }

    #[test]
    fn negative_grid_coordinates_are_rejected() {
        assert!(matches!(
            load("id,y,row,col\nA,1,-1,0\n"),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn population_stats_divides_by_n() {
        let pop = Population::from_values(&[1.0, 1.0, 0.0, 0.0]).unwrap();
        let s = population_stats(&pop);
        assert_eq!(s.mean, 0.5);
        assert_eq!(s.sd, 0.5);
        let constant = Population::from_values(&[3.25; 7]).unwrap();
        assert_eq!(population_stats(&constant).sd, 0.0);
    }

    #[test]
    fn sample_mean_of_the_two_ones() {
        let pop = Population::from_values(&[1.0, 1.0, 0.0, 0.0]).unwrap();
        let m = SampleMembership::from_flags(vec![true, true, false, false]);
        assert_eq!(sample_stats(&pop, &m).unwrap().mean, 1.0);
        let census = SampleMembership::census(4);
        assert_eq!(sample_stats(&pop, &census).unwrap().mean, 0.5);
        let empty = SampleMembership::from_flags(vec![false; 4]);
        assert!(matches!(
            sample_stats(&pop, &empty),
            Err(Error::EmptySample)
        ));
    }

    #[test]
    fn membership_table_aligns_by_id() {
        let pop = load("id,y\nA,1\nB,0\nC,1\n").unwrap().population;
        let m = load_membership("id,sampled\nC,1\nA,0\nB,1\n".as_bytes(), &pop).unwrap();
        assert_eq!(m.flags(), &[false, true, true]);
        assert!(load_membership("id,sampled\nA,1\n".as_bytes(), &pop).is_err());
        assert!(load_membership("id,sampled\nA,1\nB,1\nC,1\nZ,0\n".as_bytes(), &pop).is_err());

        let mut buf = Vec::new();
        write_membership(&mut buf, &pop, &m).unwrap();
        assert_eq!(buf, b"id,sampled\nA,0\nB,1\nC,1\n");
        assert_eq!(load_membership(buf.as_slice(), &pop).unwrap(), m);
    }

    #[test]
    fn from_indices_rejects_duplicates() {
        assert!(SampleMembership::from_indices(3, &[0, 0]).is_err());
        assert!(SampleMembership::from_indices(3, &[3]).is_err());
        assert_eq!(SampleMembership::from_indices(3, &[2, 0]).unwrap().n(), 2);
    }
}
