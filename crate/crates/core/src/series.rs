//! CSV export and import of recorded trajectories.

use std::io::{BufRead, Write};

use crate::engine::{Ensemble, Record, Trajectory};
use crate::error::{Error, Result};
use crate::landscapes::norm;

pub const HEADER: &str = "n,rep,F_gap,grad_norm,theta_norm,gamma,min_F_gap,min_gradsq,M_norm";

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub n: u64,
    pub rep: usize,
    pub f_gap: f64,
    pub grad_norm: f64,
    pub theta_norm: f64,
    pub gamma: f64,
    pub min_f_gap: f64,
    pub min_gradsq: f64,
    pub m_norm: f64,
}

impl Row {
    pub fn from_record(rep: usize, r: &Record) -> Self {
        Row {
            n: r.n,
            rep,
            f_gap: r.f_gap,
            grad_norm: r.grad_norm,
            theta_norm: norm(&r.theta),
            gamma: r.gamma,
            min_f_gap: r.min_f_gap,
            min_gradsq: r.min_gradsq,
            m_norm: norm(&r.martingale),
        }
    }
}

pub fn rows(ens: &Ensemble) -> Vec<Row> {
    ens.replicates
        .iter()
        .flat_map(|t| t.records.iter().map(move |r| Row::from_record(t.replicate, r)))
        .collect()
}

pub fn write_row<W: Write>(out: &mut W, r: &Row) -> Result<()> {
    // 17 significant digits round-trip every f64
    writeln!(
        out,
        "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
        r.n, r.rep, r.f_gap, r.grad_norm, r.theta_norm, r.gamma, r.min_f_gap, r.min_gradsq, r.m_norm
    )?;
    Ok(())
}

pub fn write_trajectory<W: Write>(out: &mut W, t: &Trajectory) -> Result<()> {
    for r in &t.records {
        write_row(out, &Row::from_record(t.replicate, r))?;
    }
    Ok(())
}

pub fn write_csv<W: Write>(out: &mut W, ens: &Ensemble) -> Result<()> {
    writeln!(out, "{HEADER}")?;
    for t in &ens.replicates {
        write_trajectory(out, t)?;
    }
    Ok(())
}

pub fn read_csv<R: BufRead>(input: R) -> Result<Vec<Row>> {
    let mut rows = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if i == 0 {
            if line.trim() != HEADER {
                return Err(Error::Parse { line: lineno, message: format!("expected header `{HEADER}`") });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(Error::Parse { line: lineno, message: format!("expected 9 fields, got {}", fields.len()) });
        }
        let bad = |what: &str| Error::Parse { line: lineno, message: format!("cannot parse {what}") };
        let f = |k: usize| fields[k].trim().parse::<f64>().map_err(|_| bad(HEADER.split(',').nth(k).unwrap_or("?")));
        rows.push(Row {
            n: fields[0].trim().parse().map_err(|_| bad("n"))?,
            rep: fields[1].trim().parse().map_err(|_| bad("rep"))?,
            f_gap: f(2)?,
            grad_norm: f(3)?,
            theta_norm: f(4)?,
            gamma: f(5)?,
            min_f_gap: f(6)?,
            min_gradsq: f(7)?,
            m_norm: f(8)?,
        });
    }
    Ok(rows)
}
