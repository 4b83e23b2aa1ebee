//! Plain-text problem dump for debugging.
//!
//! ```text
//! dims <s> <n_i> <n_e>
//! H
//! <s rows of s numbers>
//! g
//! <s numbers>
//! C
//! <n_i rows of s numbers>
//! d
//! <n_i numbers>
//! E
//! <n_e rows of s numbers>
//! f
//! <n_e numbers>
//! ```
//!
//! Matrices are row-major, one row per line. Blank lines and lines starting
//! with `#` are ignored.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use super::{QpError, QpProblem};

pub fn write_problem(problem: &QpProblem) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "dims {} {} {}", problem.dim(), problem.n_ineq(), problem.n_eq());
    write_matrix(&mut out, "H", &problem.h);
    write_vector(&mut out, "g", &problem.g);
    write_matrix(&mut out, "C", &problem.c);
    write_vector(&mut out, "d", &problem.d);
    write_matrix(&mut out, "E", &problem.e);
    write_vector(&mut out, "f", &problem.f);
    out
}

fn write_matrix(out: &mut String, name: &str, m: &DMatrix<f64>) {
    let _ = writeln!(out, "{name}");
    for r in 0..m.nrows() {
        let row: Vec<String> = m.row(r).iter().map(|v| format!("{v:e}")).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
}

fn write_vector(out: &mut String, name: &str, v: &DVector<f64>) {
    let _ = writeln!(out, "{name}");
    if !v.is_empty() {
        let vals: Vec<String> = v.iter().map(|x| format!("{x:e}")).collect();
        let _ = writeln!(out, "{}", vals.join(" "));
    }
}

struct Lines<'a> {
    inner: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

impl<'a> Lines<'a> {
    fn next_content(&mut self) -> Option<(usize, &'a str)> {
        for (i, line) in self.inner.by_ref() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            return Some((i + 1, t));
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<(usize, &'a str), QpError> {
        self.next_content().ok_or(QpError::Parse { line: 0, msg: format!("unexpected end of input, expected {what}") })
    }

    fn header(&mut self, name: &str) -> Result<(), QpError> {
        let (line, t) = self.expect(name)?;
        if t != name {
            return Err(QpError::Parse { line, msg: format!("expected section `{name}`, found `{t}`") });
        }
        Ok(())
    }

    fn numbers(&mut self, count: usize, what: &str) -> Result<Vec<f64>, QpError> {
        let (line, t) = self.expect(what)?;
        let vals = t
            .split_whitespace()
            .map(|tok| tok.parse::<f64>().map_err(|e| QpError::Parse { line, msg: format!("bad number `{tok}`: {e}") }))
            .collect::<Result<Vec<_>, _>>()?;
        if vals.len() != count {
            return Err(QpError::Parse { line, msg: format!("expected {count} numbers in {what}, found {}", vals.len()) });
        }
        Ok(vals)
    }

    fn matrix(&mut self, name: &str, rows: usize, cols: usize) -> Result<DMatrix<f64>, QpError> {
        self.header(name)?;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            data.extend(self.numbers(cols, name)?);
        }
        Ok(DMatrix::from_row_slice(rows, cols, &data))
    }

    fn vector(&mut self, name: &str, len: usize) -> Result<DVector<f64>, QpError> {
        self.header(name)?;
        if len == 0 {
            return Ok(DVector::zeros(0));
        }
        Ok(DVector::from_vec(self.numbers(len, name)?))
    }
}

pub fn read_problem(text: &str) -> Result<QpProblem, QpError> {
    let mut lines = Lines { inner: text.lines().enumerate().peekable() };
    let (line, t) = lines.expect("dims header")?;
    let parts: Vec<&str> = t.split_whitespace().collect();
    if parts.len() != 4 || parts[0] != "dims" {
        return Err(QpError::Parse { line, msg: "expected `dims <s> <n_i> <n_e>`".into() });
    }
    let dims = parts[1..]
        .iter()
        .map(|p| p.parse::<usize>().map_err(|e| QpError::Parse { line, msg: format!("bad dimension `{p}`: {e}") }))
        .collect::<Result<Vec<_>, _>>()?;
    let (s, ni, ne) = (dims[0], dims[1], dims[2]);
    let h = lines.matrix("H", s, s)?;
    let g = lines.vector("g", s)?;
    let c = lines.matrix("C", ni, s)?;
    let d = lines.vector("d", ni)?;
    let e = lines.matrix("E", ne, s)?;
    let f = lines.vector("f", ne)?;
    if let Some((line, t)) = lines.next_content() {
        return Err(QpError::Parse { line, msg: format!("trailing content `{t}`") });
    }
    QpProblem::new(h, g, c, d, e, f)
}
