//! Plain-text pilot files.
//!
//! ```text
//! # comment lines and blank lines are ignored
//! m_r = 4
//! t = 4
//! p_max = 0.001
//! theta
//! <m_r lines of t phases in radians>
//! p
//! <one line of t amplitudes>
//! ```
//!
//! Numbers are written in Rust's shortest round-trip form, so a written
//! pilot reads back bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::estimation::PilotSequence;

/// A pilot together with the power budget it was designed for.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotFile {
    pub pilot: PilotSequence,
    pub p_max: f64,
}

pub fn format_pilot(pilot: &PilotSequence, p_max: f64) -> String {
    let theta = pilot.theta();
    let mut s = String::new();
    let _ = writeln!(s, "# ristx pilot");
    let _ = writeln!(s, "m_r = {}", pilot.m_r());
    let _ = writeln!(s, "t = {}", pilot.slots());
    let _ = writeln!(s, "p_max = {p_max:?}");
    s.push_str("theta\n");
    for i in 0..theta.nrows() {
        let row: Vec<String> = (0..theta.ncols()).map(|j| format!("{:?}", theta[(i, j)])).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s.push_str("p\n");
    let p: Vec<String> = pilot.p.iter().map(|x| format!("{x:?}")).collect();
    s.push_str(&p.join(" "));
    s.push('\n');
    s
}

pub fn write_pilot(path: &Path, pilot: &PilotSequence, p_max: f64) -> Result<()> {
    std::fs::write(path, format_pilot(pilot, p_max))?;
    Ok(())
}

pub fn read_pilot(path: &Path) -> Result<PilotFile> {
    parse_pilot(&std::fs::read_to_string(path)?)
}

pub fn parse_pilot(text: &str) -> Result<PilotFile> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let last_line = text.lines().count();
    let mut next = |what: &str| {
        lines.next().ok_or_else(|| Error::PilotFile {
            line: last_line + 1,
            message: format!("unexpected end of file, expected {what}"),
        })
    };

    let m_r = header(next("m_r")?, "m_r")?;
    let t = header(next("t")?, "t")?;
    let (pl, pv) = next("p_max")?;
    let p_max = parse_number(pl, key_value(pl, pv, "p_max")?)?;
    let m_r = positive_int(m_r)?;
    let t = positive_int(t)?;
    if !(p_max > 0.0 && p_max.is_finite()) {
        return Err(Error::PilotFile { line: pl, message: "p_max must be positive".into() });
    }

    expect_marker(next("theta")?, "theta")?;
    let mut theta = DMatrix::<f64>::zeros(m_r, t);
    for i in 0..m_r {
        let (line, row) = next(&format!("phase row {} of {m_r}", i + 1))?;
        let vals = parse_row(line, row, t)?;
        for (j, v) in vals.into_iter().enumerate() {
            theta[(i, j)] = v;
        }
    }
    expect_marker(next("p")?, "p")?;
    let (line, row) = next("amplitude row")?;
    let p = parse_row(line, row, t)?;
    if let Some((extra, _)) = lines.next() {
        return Err(Error::PilotFile { line: extra, message: "trailing content".into() });
    }
    let pilot = PilotSequence::from_phases(&theta, p)
        .map_err(|e| Error::PilotFile { line, message: e.to_string() })?;
    if !pilot.is_feasible(p_max) {
        return Err(Error::PilotFile {
            line,
            message: format!("pilot energy {} exceeds p_max {p_max}", pilot.energy()),
        });
    }
    Ok(PilotFile { pilot, p_max })
}

fn key_value<'a>(line: usize, text: &'a str, key: &str) -> Result<&'a str> {
    let (k, v) = text.split_once('=').ok_or_else(|| Error::PilotFile {
        line,
        message: format!("expected '{key} = <value>'"),
    })?;
    if k.trim() != key {
        return Err(Error::PilotFile {
            line,
            message: format!("expected key '{key}', found '{}'", k.trim()),
        });
    }
    Ok(v.trim())
}

fn header((line, text): (usize, &str), key: &str) -> Result<(usize, usize)> {
    let v = key_value(line, text, key)?;
    let n = v.parse::<usize>().map_err(|_| Error::PilotFile {
        line,
        message: format!("'{v}' is not a non-negative integer"),
    })?;
    Ok((line, n))
}

fn positive_int((line, n): (usize, usize)) -> Result<usize> {
    if n == 0 {
        return Err(Error::PilotFile { line, message: "dimension must be at least 1".into() });
    }
    Ok(n)
}

fn expect_marker((line, text): (usize, &str), marker: &str) -> Result<()> {
    if text == marker {
        Ok(())
    } else {
        Err(Error::PilotFile { line, message: format!("expected '{marker}', found '{text}'") })
    }
}

fn parse_number(line: usize, s: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|_| Error::PilotFile { line, message: format!("'{s}' is not a number") })
}

fn parse_row(line: usize, text: &str, expected: usize) -> Result<Vec<f64>> {
    let vals = text
        .split_whitespace()
        .map(|s| parse_number(line, s))
        .collect::<Result<Vec<_>>>()?;
    if vals.len() != expected {
        return Err(Error::PilotFile {
            line,
            message: format!("expected {expected} values, found {}", vals.len()),
        });
    }
    Ok(vals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::dft_pilot;

    #[test]
    fn dft_roundtrip_is_exact() {
        let pilot = dft_pilot(5, 0.01);
        let back = parse_pilot(&format_pilot(&pilot, 0.01)).unwrap();
        assert_eq!(back.p_max, 0.01);
        assert_eq!(back.pilot.p, pilot.p);
        assert_eq!(back.pilot.theta(), pilot.theta());
        let err = (&back.pilot.phi - &pilot.phi).iter().fold(0.0f64, |a, z| a.max(z.norm()));
        assert!(err < 1e-15);
    }

    #[test]
    fn truncated_file_names_a_line() {
        let text = format_pilot(&dft_pilot(3, 1.0), 1.0);
        let cut: Vec<&str> = text.lines().take(6).collect();
        match parse_pilot(&cut.join("\n")) {
            Err(Error::PilotFile { line, message }) => {
                assert_eq!(line, 7);
                assert!(message.contains("end of file"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_row_reports_its_line() {
        let text = format_pilot(&dft_pilot(3, 1.0), 1.0).replacen("theta\n", "theta\n1 2\n", 1);
        match parse_pilot(&text) {
            Err(Error::PilotFile { line, .. }) => assert_eq!(line, 6),
            other => panic!("unexpected {other:?}"),
        }
        let text = format_pilot(&dft_pilot(2, 1.0), 1.0).replace("t = 2", "t = x");
        assert!(matches!(parse_pilot(&text), Err(Error::PilotFile { line: 3, .. })));
    }

    #[test]
    fn over_budget_rejected() {
        let text = format_pilot(&dft_pilot(2, 1.0), 1.0).replace("p_max = 1.0", "p_max = 0.5");
        assert!(matches!(parse_pilot(&text), Err(Error::PilotFile { .. })));
    }
}
