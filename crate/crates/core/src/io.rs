//! Text formats for code matrices, state information and attack words.
//!
//! * Code matrix: a header `c3code N=<n> M=<m> P=<p>` followed by one line of
//!   `m` characters `0`/`1` per user.
//! * State: one line of `m` characters, `H` where `p_j = p` and `L` where
//!   `p_j = 1 - p`.
//! * Attack word: one line over `0`, `1`, `?`.
//!
//! `P` is printed in shortest round-trip form, so reading a written file
//! reproduces every value bit for bit.

use std::fmt::Write as _;

use crate::attacks::AttackWord;
use crate::bits::BitWord;
use crate::codegen::{CodeMatrix, StateInfo};
use crate::error::{Error, Result};

const MAGIC: &str = "c3code";

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

/// Nonblank lines with their 1-based numbers, `\r` stripped.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
}

pub fn write_code(w: &CodeMatrix, bias: f64) -> String {
    let mut out = String::with_capacity(w.n_users() * (w.code_length() + 1) + 64);
    writeln!(
        out,
        "{MAGIC} N={} M={} P={bias}",
        w.n_users(),
        w.code_length()
    )
    .expect("string write");
    for row in w.rows() {
        writeln!(out, "{row}").expect("string write");
    }
    out
}

/// Reads a code matrix file; returns the matrix and its bias `P`.
pub fn read_code(text: &str) -> Result<(CodeMatrix, f64)> {
    let mut lines = content_lines(text);
    let (hline, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty code file"))?;
    let mut fields = header.split_whitespace();
    if fields.next() != Some(MAGIC) {
        return Err(parse_err(
            hline,
            format!("expected header starting with '{MAGIC}'"),
        ));
    }
    let mut n = None;
    let mut m = None;
    let mut p = None;
    for f in fields {
        let (key, value) = f
            .split_once('=')
            .ok_or_else(|| parse_err(hline, format!("malformed header field '{f}'")))?;
        let bad = |_| parse_err(hline, format!("bad value in '{f}'"));
        match key {
            "N" => n = Some(value.parse::<usize>().map_err(|e| bad(e.to_string()))?),
            "M" => m = Some(value.parse::<usize>().map_err(|e| bad(e.to_string()))?),
            "P" => p = Some(value.parse::<f64>().map_err(|e| bad(e.to_string()))?),
            _ => return Err(parse_err(hline, format!("unknown header field '{key}'"))),
        }
    }
    let (Some(n), Some(m), Some(p)) = (n, m, p) else {
        return Err(parse_err(hline, "header needs N, M and P"));
    };
    let mut rows = Vec::with_capacity(n);
    for (ln, line) in lines {
        let row = BitWord::parse(line.trim())
            .ok_or_else(|| parse_err(ln, "codeword must contain only '0' and '1'"))?;
        if row.len() != m {
            return Err(parse_err(
                ln,
                format!("codeword has {} bits, header says M={m}", row.len()),
            ));
        }
        rows.push(row);
    }
    if rows.len() != n {
        return Err(parse_err(
            hline,
            format!("header says N={n} but {} codewords follow", rows.len()),
        ));
    }
    Ok((CodeMatrix::from_rows(rows)?, p))
}

pub fn write_state(st: &StateInfo) -> String {
    let mut out: String = (0..st.len())
        .map(|j| if st.is_high(j) { 'H' } else { 'L' })
        .collect();
    out.push('\n');
    out
}

/// Reads a state file; `H` maps to `bias`, `L` to `1 - bias`.
pub fn read_state(text: &str, bias: f64) -> Result<StateInfo> {
    let mut lines = content_lines(text);
    let (ln, line) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty state file"))?;
    let column_bias = line
        .trim()
        .chars()
        .map(|c| match c {
            'H' => Ok(bias),
            'L' => Ok(1.0 - bias),
            other => Err(parse_err(ln, format!("unexpected state symbol '{other}'"))),
        })
        .collect::<Result<Vec<f64>>>()?;
    if let Some((extra, _)) = lines.next() {
        return Err(parse_err(extra, "state file must hold a single line"));
    }
    Ok(StateInfo { bias, column_bias })
}

pub fn write_word(y: &AttackWord) -> String {
    format!("{y}\n")
}

pub fn read_word(text: &str) -> Result<AttackWord> {
    let mut lines = content_lines(text);
    let (ln, line) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty word file"))?;
    let y = AttackWord::parse(line.trim())
        .ok_or_else(|| parse_err(ln, "word must contain only '0', '1' and '?'"))?;
    if let Some((extra, _)) = lines.next() {
        return Err(parse_err(extra, "word file must hold a single line"));
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codegen::{generate_code, CodeParams};
    use crate::rng::{Seed, StreamLabel};

    #[test]
    fn code_and_state_round_trip() {
        for &p in &[0.5, 0.7, 0.9123456789] {
            let params = CodeParams::new(9, 70, p, 0.01).unwrap();
            let (w, st) = generate_code(&params, Seed::new(3, StreamLabel::Codegen)).unwrap();
            let text = write_code(&w, p);
            let (w2, p2) = read_code(&text).unwrap();
            assert_eq!(w2, w);
            assert_eq!(p2.to_bits(), p.to_bits());
            assert_eq!(write_code(&w2, p2), text);
            let st2 = read_state(&write_state(&st), p2).unwrap();
            assert_eq!(st2.bias.to_bits(), st.bias.to_bits());
            assert!(st2
                .column_bias
                .iter()
                .zip(&st.column_bias)
                .all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }

    #[test]
    fn header_is_literal() {
        let w = CodeMatrix::from_rows(vec![BitWord::parse("01").unwrap(); 4]).unwrap();
        assert!(write_code(&w, 0.5).starts_with("c3code N=4 M=2 P=0.5\n01\n"));
    }

    #[test]
    fn code_errors_carry_line_numbers() {
        let err = read_code("c3code N=2 M=3 P=0.5\n010\n0110\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = read_code("c3code N=3 M=3 P=0.5\n010\n011\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        assert!(read_code("code N=1 M=1 P=0.5\n0\n").is_err());
        assert!(read_code("c3code N=1 M=1\n0\n").is_err());
        assert!(read_code("c3code N=1 M=1 P=0.5\n2\n").is_err());
    }

    #[test]
    fn word_round_trip() {
        let y = AttackWord::parse("01?10?").unwrap();
        assert_eq!(read_word(&write_word(&y)).unwrap(), y);
        assert!(read_word("01x\n").is_err());
        assert!(read_word("01\n10\n").is_err());
        assert!(read_state("HLX\n", 0.6).is_err());
    }
}
