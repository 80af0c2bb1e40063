//! Population and outcome files.

use std::io::{Read, Write};

use privalloc::{Partition, Population};

use crate::error::CliError;
use crate::sweep::fmt_real;

pub const POPULATION_HEADER: &str = "individual,welfare,unit";
pub const OUTCOME_HEADER: &str = "individual,noisy_welfare,treated";

pub fn write_population<W: Write>(pop: &Population, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{POPULATION_HEADER}")?;
    for (i, w) in pop.welfare().iter().enumerate() {
        writeln!(out, "{i},{},{}", fmt_real(*w), pop.partition().unit_of(i))?;
    }
    out.flush()
}

/// Reads a population file. Rows may come in any order but must cover `0..P` exactly once.
pub fn read_population<R: Read>(input: R, delta_w: f64) -> Result<Population, CliError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(input);
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != POPULATION_HEADER.split(',').collect::<Vec<_>>() {
        return Err(CliError::Csv(format!("expected header '{POPULATION_HEADER}'")));
    }
    let mut entries: Vec<(usize, f64, usize)> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let field = |j: usize| record.get(j).unwrap_or("");
        let bad = |what: &str| CliError::Csv(format!("row {}: invalid {what}", line + 1));
        let i: usize = field(0).parse().map_err(|_| bad("individual"))?;
        let w: f64 = field(1).parse().map_err(|_| bad("welfare"))?;
        let u: usize = field(2).parse().map_err(|_| bad("unit"))?;
        entries.push((i, w, u));
    }
    entries.sort_by_key(|e| e.0);
    for (expected, e) in entries.iter().enumerate() {
        if e.0 != expected {
            return Err(CliError::Csv(format!("individuals must be 0..{} without gaps", entries.len())));
        }
    }
    let welfare = entries.iter().map(|e| e.1).collect();
    let partition = Partition::from_labels(entries.iter().map(|e| e.2).collect())?;
    Ok(Population::with_partition(welfare, partition, delta_w)?)
}

pub fn write_outcome<W: Write>(
    population: usize,
    noisy: Option<&[f64]>,
    treated: &privalloc::Allocation,
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "{OUTCOME_HEADER}")?;
    for i in 0..population {
        let v = noisy.map(|n| fmt_real(n[i])).unwrap_or_else(|| "NA".into());
        writeln!(out, "{i},{v},{}", u8::from(treated.contains(i)))?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn population_round_trips() {
        let pop = Population::new(vec![0.1, 0.9, 0.25, 0.5], 2, 0.3).unwrap();
        let mut buf = Vec::new();
        write_population(&pop, &mut buf).unwrap();
        let back = read_population(buf.as_slice(), 0.3).unwrap();
        assert_eq!(back, pop);
    }

    #[test]
    fn rejects_gaps() {
        let text = "individual,welfare,unit\n0,0.1,0\n2,0.2,0\n";
        assert!(read_population(text.as_bytes(), 0.5).is_err());
    }
}
