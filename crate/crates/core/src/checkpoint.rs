//! Plain-text checkpoint format.
//!
//! ```text
//! sad-v1
//! <n_users>
//! <n_items>
//! <n_factors>
//! #XI
//! <k rows of n comma-separated values>
//! #H
//! <k rows of m values>
//! #T
//! <k rows of m values>
//! ```
//!
//! Values use the shortest representation that parses back to the same bits.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Result, SadError};
use crate::model::{FactorMatrix, FactorModel};
use crate::scalar::Scalar;

pub const MAGIC: &str = "sad-v1";

fn write_matrix<S: Scalar, W: Write>(out: &mut W, tag: &str, m: &FactorMatrix<S>) -> Result<()> {
    writeln!(out, "#{tag}")?;
    let mut line = String::new();
    for r in 0..m.rows() {
        line.clear();
        for c in 0..m.cols() {
            if c > 0 {
                line.push(',');
            }
            line.push_str(&format!("{:e}", m.get(r, c)));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn write_checkpoint<S: Scalar, W: Write>(out: &mut W, model: &FactorModel<S>) -> Result<()> {
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "{}", model.n_users())?;
    writeln!(out, "{}", model.n_items())?;
    writeln!(out, "{}", model.n_factors())?;
    write_matrix(out, "XI", model.user_factors())?;
    write_matrix(out, "H", model.left_item_factors())?;
    write_matrix(out, "T", model.right_item_factors())?;
    Ok(())
}

pub fn save_checkpoint<S: Scalar>(path: &Path, model: &FactorModel<S>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_checkpoint(&mut out, model)?;
    out.flush()?;
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    number: usize,
}

impl<R: BufRead> Lines<R> {
    fn next_line(&mut self) -> Result<String> {
        self.number += 1;
        match self.inner.next() {
            Some(line) => Ok(line?.trim_end().to_string()),
            None => Err(SadError::Checkpoint(format!(
                "unexpected end of file at line {}",
                self.number
            ))),
        }
    }

    fn next_count(&mut self, what: &str) -> Result<usize> {
        let line = self.next_line()?;
        line.trim().parse().map_err(|_| {
            SadError::Checkpoint(format!("line {}: bad {what} count {line:?}", self.number))
        })
    }

    fn read_matrix<S: Scalar>(&mut self, tag: &str, rows: usize, cols: usize) -> Result<FactorMatrix<S>> {
        let header = self.next_line()?;
        if header != format!("#{tag}") {
            return Err(SadError::Checkpoint(format!(
                "line {}: expected section #{tag}, found {header:?}",
                self.number
            )));
        }
        let mut values = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let line = self.next_line()?;
            let before = values.len();
            for field in line.split(',') {
                let v = field.trim().parse::<S>().map_err(|_| {
                    SadError::Checkpoint(format!("line {}: bad value {field:?}", self.number))
                })?;
                values.push(v);
            }
            if values.len() - before != cols {
                return Err(SadError::Checkpoint(format!(
                    "line {}: expected {cols} values, found {}",
                    self.number,
                    values.len() - before
                )));
            }
        }
        FactorMatrix::from_row_major(rows, cols, &values)
    }
}

pub fn read_checkpoint<S: Scalar, R: Read>(input: R) -> Result<FactorModel<S>> {
    let mut lines = Lines {
        inner: BufReader::new(input).lines(),
        number: 0,
    };
    let magic = lines.next_line()?;
    if magic != MAGIC {
        return Err(SadError::Checkpoint(format!("bad magic {magic:?}")));
    }
    let n = lines.next_count("user")?;
    let m = lines.next_count("item")?;
    let k = lines.next_count("factor")?;
    let xi = lines.read_matrix("XI", k, n)?;
    let h = lines.read_matrix("H", k, m)?;
    let t = lines.read_matrix("T", k, m)?;
    FactorModel::new(xi, h, t).map_err(|e| SadError::Checkpoint(e.to_string()))
}

pub fn load_checkpoint<S: Scalar>(path: &Path) -> Result<FactorModel<S>> {
    read_checkpoint(File::open(path)?)
}
