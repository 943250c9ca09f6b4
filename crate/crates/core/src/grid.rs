//! Resolution analysis for gridded occupancy populations.
//!
//! Coarsening by a factor `k` maps fine cell `(row, col)` to coarse cell
//! `(row / k, col / k)`. A coarse cell exists if any fine cell maps to it, is
//! occupied if any constituent is occupied, and counts as sampled if any
//! constituent was sampled. Changing resolution changes `N`, `n` and `f`,
//! and with them every diagnostic.

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, ErrorClass, Result};
use crate::metrics::{diagnose, DefectDiagnostics};
use crate::population::{Cell, Population, SampleMembership, Unit};

#[derive(Debug, Clone, PartialEq)]
pub struct GridPopulation {
    population: Population,
    resolution_label: String,
}

impl GridPopulation {
    /// Every unit needs a cell, and no two units may share one.
    pub fn new(population: Population, resolution_label: impl Into<String>) -> Result<Self> {
        let mut seen = HashMap::with_capacity(population.len());
        for unit in population.units() {
            let cell = unit
                .cell
                .ok_or_else(|| Error::NotGridded(unit.id.clone()))?;
            if seen.insert(cell, ()).is_some() {
                return Err(Error::DuplicateCell {
                    row: cell.row,
                    col: cell.col,
                });
            }
        }
        Ok(Self {
            population,
            resolution_label: resolution_label.into(),
        })
    }

    pub fn population(&self) -> &Population {
        &self.population
    }

    pub fn resolution_label(&self) -> &str {
        &self.resolution_label
    }

    pub fn into_population(self) -> Population {
        self.population
    }

    fn cell(&self, index: usize) -> Cell {
        self.population.unit(index).cell.expect("validated in new")
    }
}

/// Coarsens by `factor`. Coarse cells keep the order in which their first
/// constituent appears; covariates are dropped. `factor = 1` returns the
/// input unchanged.
pub fn aggregate(
    grid: &GridPopulation,
    membership: &SampleMembership,
    factor: u32,
) -> Result<(GridPopulation, SampleMembership)> {
    if factor == 0 {
        return Err(Error::invalid("aggregation factor must be at least 1"));
    }
    membership.check_aligned(grid.population())?;
    grid.population().require_binary()?;
    if factor == 1 {
        return Ok((grid.clone(), membership.clone()));
    }

    let mut slots: HashMap<Cell, usize> = HashMap::new();
    let mut coarse: Vec<(Cell, bool, bool)> = Vec::new();
    for i in 0..grid.population().len() {
        let fine = grid.cell(i);
        let cell = Cell::new(fine.row / factor, fine.col / factor);
        let slot = *slots.entry(cell).or_insert_with(|| {
            coarse.push((cell, false, false));
            coarse.len() - 1
        });
        let entry = &mut coarse[slot];
        entry.1 |= grid.population().y(i) == 1.0;
        entry.2 |= membership.contains(i);
    }

    let units = coarse
        .iter()
        .map(|&(cell, occupied, _)| {
            Unit::new(format!("r{}c{}", cell.row, cell.col), occupied as u8 as f64)
                .with_cell(cell.row, cell.col)
        })
        .collect();
    let flags = coarse.iter().map(|&(_, _, sampled)| sampled).collect();
    let label = format!("{} x{}", grid.resolution_label(), factor);
    Ok((
        GridPopulation::new(Population::new(units, Vec::new())?, label)?,
        SampleMembership::from_flags(flags),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionRow {
    pub factor: u32,
    pub population_size: usize,
    pub n: usize,
    pub f: f64,
    /// `"ok"`, or the reason the diagnostics are undefined.
    pub status: String,
    pub diagnostics: Option<DefectDiagnostics>,
}

pub fn diagnostics_by_resolution(
    grid: &GridPopulation,
    membership: &SampleMembership,
    factors: &[u32],
) -> Result<Vec<ResolutionRow>> {
    factors
        .iter()
        .map(|&k| {
            let (coarse, m) = aggregate(grid, membership, k)?;
            let size = coarse.population().len();
            let (status, diagnostics) = match diagnose(coarse.population(), &m) {
                Ok(d) => ("ok".to_string(), Some(d)),
                Err(e) if e.class() == ErrorClass::Degenerate => (e.to_string(), None),
                Err(e) => return Err(e),
            };
            Ok(ResolutionRow {
                factor: k,
                population_size: size,
                n: m.n(),
                f: m.n() as f64 / size as f64,
                status,
                diagnostics,
            })
        })
        .collect()
}

/// One row per factor: `factor,N,n,f,rho,n_eff,actual_error,status`.
/// Degenerate rows leave the diagnostic columns empty.
pub fn write_resolution_csv<W: Write>(sink: W, rows: &[ResolutionRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        "factor",
        "N",
        "n",
        "f",
        "rho",
        "n_eff",
        "actual_error",
        "status",
    ])?;
    for row in rows {
        let (rho, n_eff, err) = match &row.diagnostics {
            Some(d) => (
                d.rho.to_string(),
                d.n_eff.to_string(),
                d.actual_error.to_string(),
            ),
            None => Default::default(),
        };
        w.write_record([
            row.factor.to_string(),
            row.population_size.to_string(),
            row.n.to_string(),
            row.f.to_string(),
            rho,
            n_eff,
            err,
            row.status.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(cells: &[(u32, u32, f64)]) -> GridPopulation {
        let units = cells
            .iter()
            .enumerate()
            .map(|(i, &(r, c, y))| Unit::new(format!("u{i}"), y).with_cell(r, c))
            .collect();
        GridPopulation::new(Population::new(units, Vec::new()).unwrap(), "1km").unwrap()
    }

    #[test]
    fn factor_one_is_identity() {
        let g = grid(&[(0, 0, 1.0), (0, 1, 0.0), (5, 5, 1.0)]);
        let m = SampleMembership::from_flags(vec![false, true, false]);
        let (c, cm) = aggregate(&g, &m, 1).unwrap();
        assert_eq!(c, g);
        assert_eq!(cm, m);
    }

    #[test]
    fn block_of_zeros_with_one_sampled() {
        let g = grid(&[(0, 0, 0.0), (0, 1, 0.0), (1, 0, 0.0), (1, 1, 0.0)]);
        let m = SampleMembership::from_flags(vec![false, false, true, false]);
        let (c, cm) = aggregate(&g, &m, 2).unwrap();
        assert_eq!(c.population().len(), 1);
        assert_eq!(c.population().y(0), 0.0);
        assert_eq!(cm.flags(), &[true]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = grid(&[(0, 0, 0.5), (0, 1, 0.0)]);
        let m = SampleMembership::from_flags(vec![true, false]);
        assert!(matches!(aggregate(&g, &m, 2), Err(Error::NonBinary { .. })));
        let g = grid(&[(0, 0, 1.0), (0, 1, 0.0)]);
        assert!(aggregate(&g, &m, 0).is_err());

        let pop = Population::from_values(&[1.0, 0.0]).unwrap();
        assert!(matches!(
            GridPopulation::new(pop, "x"),
            Err(Error::NotGridded(_))
        ));
        let units = vec![
            Unit::new("a", 1.0).with_cell(0, 0),
            Unit::new("b", 0.0).with_cell(0, 0),
        ];
        let pop = Population::new(units, Vec::new()).unwrap();
        assert!(matches!(
            GridPopulation::new(pop, "x"),
            Err(Error::DuplicateCell { .. })
        ));
    }

    #[test]
    fn degenerate_rows_carry_a_status() {
        let g = grid(&[(0, 0, 1.0), (0, 1, 0.0), (1, 0, 0.0), (1, 1, 0.0)]);
        let m = SampleMembership::from_flags(vec![true, false, false, false]);
        let rows = diagnostics_by_resolution(&g, &m, &[1, 2]).unwrap();
        assert_eq!(rows[0].status, "ok");
        assert!(rows[1].diagnostics.is_none());
        assert!(rows[1].status.contains("no sampling variation"));
        let mut out = Vec::new();
        write_resolution_csv(&mut out, &rows).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("factor,N,n,f,rho,n_eff,actual_error,status\n"));
        assert!(text.lines().nth(2).unwrap().starts_with("2,1,1,1,,,,"));
    }
}
