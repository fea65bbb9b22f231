//! MPS and LP-text files for belief LPs.
//!
//! Both writers sort columns and rows by name and print numbers in the shortest
//! form that parses back to the same double, so the output is byte-stable and a
//! parse reproduces the canonical LP exactly. All columns have lower bound 0.
//!
//! MPS uses the fixed section layout (`NAME`, `ROWS`, `COLUMNS`, `RHS`, `BOUNDS`,
//! `ENDATA`) with whitespace-separated fields, since belief names are longer than
//! eight characters. The objective row is `obj`, the right-hand side vector `rhs`
//! and the bound vector `bnd`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use pcnf_core::lp::{LinearProgram, Row, RowKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Mps,
    LpText,
}

#[derive(Debug, thiserror::Error)]
pub enum LpIoError {
    #[error("{0}")]
    Invalid(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn parse_err(line: usize, message: impl Into<String>) -> LpIoError {
    LpIoError::Parse { line, message: message.into() }
}

/// Columns and rows sorted by name, coefficients sorted by column, zeros dropped.
pub fn canonical(lp: &LinearProgram) -> LinearProgram {
    let mut order: Vec<usize> = (0..lp.cols.len()).collect();
    order.sort_by(|&a, &b| lp.cols[a].cmp(&lp.cols[b]));
    let mut pos = vec![0; lp.cols.len()];
    for (new, &old) in order.iter().enumerate() {
        pos[old] = new;
    }
    let mut rows: Vec<Row> = lp
        .rows
        .iter()
        .map(|r| {
            let mut coeffs: Vec<(usize, f64)> = r.coeffs.iter().filter(|c| c.1 != 0.0).map(|&(c, a)| (pos[c], a)).collect();
            coeffs.sort_by_key(|c| c.0);
            Row { name: r.name.clone(), kind: r.kind, coeffs, rhs: r.rhs }
        })
        .collect();
    rows.sort_by(|a, b| a.name.cmp(&b.name));
    LinearProgram {
        name: lp.name.clone(),
        cols: order.iter().map(|&j| lp.cols[j].clone()).collect(),
        cost: order.iter().map(|&j| lp.cost[j]).collect(),
        upper: order.iter().map(|&j| lp.upper[j]).collect(),
        rows,
    }
}

fn checked(lp: &LinearProgram, reserved: &[&str]) -> Result<LinearProgram, LpIoError> {
    lp.check().map_err(|e| LpIoError::Invalid(e.to_string()))?;
    for n in lp.cols.iter().chain(lp.rows.iter().map(|r| &r.name)) {
        if reserved.contains(&n.as_str()) || n.contains(':') || n.starts_with(['+', '-', '<', '>', '=']) {
            return Err(LpIoError::Invalid(format!("name {n} cannot be written")));
        }
    }
    if lp.name.is_empty() || lp.name.contains(char::is_whitespace) {
        return Err(LpIoError::Invalid(format!("invalid problem name {:?}", lp.name)));
    }
    Ok(canonical(lp))
}

pub fn write_mps(lp: &LinearProgram) -> Result<String, LpIoError> {
    let lp = checked(lp, &["obj", "rhs", "bnd"])?;
    let w = lp.cols.iter().chain(lp.rows.iter().map(|r| &r.name)).map(|n| n.len()).max().unwrap_or(0).max(8);
    let mut s = String::new();
    writeln!(s, "NAME          {}", lp.name).unwrap();
    s.push_str("ROWS\n N  obj\n");
    for r in &lp.rows {
        let k = match r.kind {
            RowKind::Eq => 'E',
            RowKind::Le => 'L',
            RowKind::Ge => 'G',
        };
        writeln!(s, " {k}  {}", r.name).unwrap();
    }
    s.push_str("COLUMNS\n");
    let mut by_col: Vec<Vec<(&str, f64)>> = vec![Vec::new(); lp.cols.len()];
    for r in &lp.rows {
        for &(c, a) in &r.coeffs {
            by_col[c].push((&r.name, a));
        }
    }
    for (j, name) in lp.cols.iter().enumerate() {
        writeln!(s, "    {name:w$}  {:w$}  {}", "obj", lp.cost[j]).unwrap();
        for &(row, a) in &by_col[j] {
            writeln!(s, "    {name:w$}  {row:w$}  {a}").unwrap();
        }
    }
    s.push_str("RHS\n");
    for r in lp.rows.iter().filter(|r| r.rhs != 0.0) {
        writeln!(s, "    {:w$}  {:w$}  {}", "rhs", r.name, r.rhs).unwrap();
    }
    s.push_str("BOUNDS\n");
    for (j, name) in lp.cols.iter().enumerate() {
        if lp.upper[j].is_finite() {
            writeln!(s, " UP {:w$}  {name:w$}  {}", "bnd", lp.upper[j]).unwrap();
        }
    }
    s.push_str("ENDATA\n");
    Ok(s)
}

fn number(tok: &str, line: usize) -> Result<f64, LpIoError> {
    let v: f64 = tok.parse().map_err(|_| parse_err(line, format!("bad number {tok:?}")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("non-finite number {tok:?}")));
    }
    Ok(v)
}

pub fn parse_mps(text: &str) -> Result<LinearProgram, LpIoError> {
    #[derive(PartialEq)]
    enum Sec {
        Start,
        Rows,
        Columns,
        Rhs,
        Bounds,
        End,
    }
    let mut sec = Sec::Start;
    let mut lp = LinearProgram::new("");
    let mut obj: Option<String> = None;
    let mut row_index: BTreeMap<String, usize> = BTreeMap::new();
    let mut col_index: BTreeMap<String, usize> = BTreeMap::new();
    let mut last_col: Option<String> = None;
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        let f: Vec<&str> = raw.split_whitespace().collect();
        if !raw.starts_with(char::is_whitespace) {
            sec = match f[0] {
                "NAME" => {
                    lp.name = f.get(1).ok_or_else(|| parse_err(line, "missing problem name"))?.to_string();
                    Sec::Start
                }
                "ROWS" => Sec::Rows,
                "COLUMNS" => Sec::Columns,
                "RHS" => Sec::Rhs,
                "BOUNDS" => Sec::Bounds,
                "ENDATA" => Sec::End,
                s => return Err(parse_err(line, format!("unknown section {s}"))),
            };
            continue;
        }
        match sec {
            Sec::Rows => {
                let [kind, name] = f[..] else { return Err(parse_err(line, "expected row type and name")) };
                let kind = match kind {
                    "N" => {
                        if obj.replace(name.to_string()).is_some() {
                            return Err(parse_err(line, "second objective row"));
                        }
                        continue;
                    }
                    "E" => RowKind::Eq,
                    "L" => RowKind::Le,
                    "G" => RowKind::Ge,
                    t => return Err(parse_err(line, format!("unknown row type {t}"))),
                };
                if row_index.insert(name.to_string(), lp.rows.len()).is_some() {
                    return Err(parse_err(line, format!("duplicate row {name}")));
                }
                lp.add_row(name.to_string(), kind, Vec::new(), 0.0);
            }
            Sec::Columns => {
                if f.len() != 3 && f.len() != 5 {
                    return Err(parse_err(line, "expected column, row, value"));
                }
                let col = f[0];
                let j = match col_index.get(col) {
                    Some(&j) if last_col.as_deref() == Some(col) => j,
                    Some(_) => return Err(parse_err(line, format!("column {col} is not contiguous"))),
                    None => {
                        let j = lp.add_col(col.to_string(), 0.0, f64::INFINITY);
                        col_index.insert(col.to_string(), j);
                        last_col = Some(col.to_string());
                        j
                    }
                };
                for pair in f[1..].chunks(2) {
                    let v = number(pair[1], line)?;
                    if Some(pair[0]) == obj.as_deref() {
                        lp.cost[j] = v;
                    } else {
                        let r = *row_index.get(pair[0]).ok_or_else(|| parse_err(line, format!("unknown row {}", pair[0])))?;
                        if lp.rows[r].coeffs.iter().any(|c| c.0 == j) {
                            return Err(parse_err(line, format!("repeated entry {col} {}", pair[0])));
                        }
                        lp.rows[r].coeffs.push((j, v));
                    }
                }
            }
            Sec::Rhs => {
                if f.len() != 3 && f.len() != 5 {
                    return Err(parse_err(line, "expected vector, row, value"));
                }
                for pair in f[1..].chunks(2) {
                    let r = *row_index.get(pair[0]).ok_or_else(|| parse_err(line, format!("unknown row {}", pair[0])))?;
                    lp.rows[r].rhs = number(pair[1], line)?;
                }
            }
            Sec::Bounds => {
                let [kind, _, col, v] = f[..] else { return Err(parse_err(line, "expected type, vector, column, value")) };
                let j = *col_index.get(col).ok_or_else(|| parse_err(line, format!("unknown column {col}")))?;
                let v = number(v, line)?;
                match kind {
                    "UP" if v >= 0.0 => lp.upper[j] = v,
                    "LO" if v == 0.0 => {}
                    _ => return Err(parse_err(line, format!("unsupported bound {kind} {v}"))),
                }
            }
            Sec::Start | Sec::End => return Err(parse_err(line, "data outside a section")),
        }
    }
    if sec != Sec::End {
        return Err(parse_err(text.lines().count(), "missing ENDATA"));
    }
    lp.check().map_err(|e| LpIoError::Invalid(e.to_string()))?;
    Ok(canonical(&lp))
}

fn terms(s: &mut String, coeffs: &[(usize, f64)], cols: &[String]) {
    for (k, &(c, a)) in coeffs.iter().enumerate() {
        if k > 0 && k % 6 == 0 {
            s.push_str("\n   ");
        }
        let (sign, mag) = if a.is_sign_negative() { ("-", -a) } else { ("+", a) };
        if k == 0 && sign == "+" {
            write!(s, " {mag} {}", cols[c]).unwrap();
        } else {
            write!(s, " {sign} {mag} {}", cols[c]).unwrap();
        }
    }
}

pub fn write_lp_text(lp: &LinearProgram) -> Result<String, LpIoError> {
    let lp = checked(lp, &["obj"])?;
    let mut s = String::new();
    writeln!(s, "\\ Problem: {}", lp.name).unwrap();
    s.push_str("Minimize\n obj:");
    let obj: Vec<(usize, f64)> = lp.cost.iter().enumerate().filter(|c| *c.1 != 0.0).map(|(j, &c)| (j, c)).collect();
    terms(&mut s, &obj, &lp.cols);
    s.push_str("\nSubject To\n");
    for r in &lp.rows {
        write!(s, " {}:", r.name).unwrap();
        if r.coeffs.is_empty() {
            // an empty row still needs a left-hand side
            write!(s, " 0 {}", lp.cols.first().map_or("x", |c| c.as_str())).unwrap();
        }
        terms(&mut s, &r.coeffs, &lp.cols);
        let op = match r.kind {
            RowKind::Eq => "=",
            RowKind::Le => "<=",
            RowKind::Ge => ">=",
        };
        writeln!(s, " {op} {}", r.rhs).unwrap();
    }
    s.push_str("Bounds\n");
    for (j, c) in lp.cols.iter().enumerate() {
        if lp.upper[j].is_finite() {
            writeln!(s, " 0 <= {c} <= {}", lp.upper[j]).unwrap();
        } else {
            writeln!(s, " {c} >= 0").unwrap();
        }
    }
    s.push_str("End\n");
    Ok(s)
}

/// Reads the subset of the LP format produced by `write_lp_text`.
pub fn parse_lp_text(text: &str) -> Result<LinearProgram, LpIoError> {
    // (line, token) stream, comments removed
    let mut toks: Vec<(usize, &str)> = Vec::new();
    let mut name = None;
    for (k, raw) in text.lines().enumerate() {
        let line = match raw.find('\\') {
            Some(p) => {
                if let Some(n) = raw[p..].strip_prefix("\\ Problem:") {
                    name = Some(n.trim().to_string());
                }
                &raw[..p]
            }
            None => raw,
        };
        toks.extend(line.split_whitespace().map(|t| (k + 1, t)));
    }
    let mut lp = LinearProgram::new(name.as_deref().unwrap_or("lp"));
    let mut cols: BTreeMap<String, usize> = BTreeMap::new();
    let mut col = |lp: &mut LinearProgram, n: &str| -> usize {
        *cols.entry(n.to_string()).or_insert_with(|| lp.add_col(n.to_string(), 0.0, f64::INFINITY))
    };
    let mut i = 0;
    let at = |i: usize| toks.get(i).copied();
    let expect = |i: usize, want: &str| -> Result<(), LpIoError> {
        match toks.get(i) {
            Some((_, t)) if t.eq_ignore_ascii_case(want) => Ok(()),
            Some((l, t)) => Err(parse_err(*l, format!("expected {want}, found {t}"))),
            None => Err(parse_err(0, format!("expected {want} before end of file"))),
        }
    };
    // linear expression up to a relation, the end of the objective or a section
    let stop = |t: &str| matches!(t, "=" | "<=" | ">=") || t.ends_with(':') || t.eq_ignore_ascii_case("subject");
    let mut expr = |lp: &mut LinearProgram, i: &mut usize| -> Result<Vec<(usize, f64)>, LpIoError> {
        let mut out: Vec<(usize, f64)> = Vec::new();
        while let Some((line, t)) = at(*i) {
            if stop(t) {
                break;
            }
            let mut sign = 1.0;
            let mut t = t;
            if t == "+" || t == "-" {
                sign = if t == "-" { -1.0 } else { 1.0 };
                *i += 1;
                t = at(*i).ok_or_else(|| parse_err(line, "dangling sign"))?.1;
            }
            let a = number(t, line)?;
            *i += 1;
            let (_, n) = at(*i).ok_or_else(|| parse_err(line, "coefficient without a variable"))?;
            *i += 1;
            let j = col(lp, n);
            if out.iter().any(|c| c.0 == j) {
                return Err(parse_err(line, format!("variable {n} repeated in one row")));
            }
            out.push((j, sign * a));
        }
        Ok(out)
    };
    expect(i, "minimize")?;
    i += 1;
    expect(i, "obj:")?;
    i += 1;
    let obj = expr(&mut lp, &mut i)?;
    expect(i, "subject")?;
    expect(i + 1, "to")?;
    i += 2;
    let mut rows = std::collections::BTreeSet::new();
    while let Some((line, t)) = at(i) {
        if t.eq_ignore_ascii_case("bounds") || t.eq_ignore_ascii_case("end") {
            break;
        }
        let rname = t.strip_suffix(':').ok_or_else(|| parse_err(line, format!("expected a row name, found {t}")))?;
        if !rows.insert(rname.to_string()) {
            return Err(parse_err(line, format!("duplicate row {rname}")));
        }
        i += 1;
        let mut coeffs = expr(&mut lp, &mut i)?;
        coeffs.retain(|c| c.1 != 0.0);
        let (l2, op) = at(i).ok_or_else(|| parse_err(line, "row without relation"))?;
        let kind = match op {
            "=" => RowKind::Eq,
            "<=" => RowKind::Le,
            ">=" => RowKind::Ge,
            _ => return Err(parse_err(l2, format!("expected a relation, found {op}"))),
        };
        let (l3, rhs) = at(i + 1).ok_or_else(|| parse_err(l2, "missing right-hand side"))?;
        lp.add_row(rname.to_string(), kind, coeffs, number(rhs, l3)?);
        i += 2;
    }
    for (j, a) in obj {
        lp.cost[j] = a;
    }
    if at(i).is_some_and(|(_, t)| t.eq_ignore_ascii_case("bounds")) {
        i += 1;
        while let Some((line, t)) = at(i) {
            if t.eq_ignore_ascii_case("end") {
                break;
            }
            if t == "0" && at(i + 1).map(|x| x.1) == Some("<=") && at(i + 3).map(|x| x.1) == Some("<=") {
                let n = at(i + 2).unwrap().1;
                let (l, u) = at(i + 4).ok_or_else(|| parse_err(line, "missing upper bound"))?;
                let u = number(u, l)?;
                if u < 0.0 {
                    return Err(parse_err(l, "negative upper bound"));
                }
                let j = col(&mut lp, n);
                lp.upper[j] = u;
                i += 5;
            } else if at(i + 1).map(|x| x.1) == Some(">=") && at(i + 2).map(|x| x.1) == Some("0") {
                col(&mut lp, t);
                i += 3;
            } else {
                return Err(parse_err(line, format!("unsupported bound starting at {t}")));
            }
        }
    }
    expect(i, "end")?;
    lp.check().map_err(|e| LpIoError::Invalid(e.to_string()))?;
    Ok(canonical(&lp))
}

pub fn write(lp: &LinearProgram, format: Format) -> Result<String, LpIoError> {
    match format {
        Format::Mps => write_mps(lp),
        Format::LpText => write_lp_text(lp),
    }
}

pub fn parse(text: &str, format: Format) -> Result<LinearProgram, LpIoError> {
    match format {
        Format::Mps => parse_mps(text),
        Format::LpText => parse_lp_text(text),
    }
}

pub fn export_lp(lp: &LinearProgram, format: Format, path: &Path) -> Result<(), LpIoError> {
    let text = write(lp, format)?;
    std::fs::write(path, text).map_err(|source| LpIoError::Io { path: path.display().to_string(), source })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> LinearProgram {
        let mut lp = LinearProgram::new("tiny");
        let b = lp.add_col("b_i_v0_1".into(), 0.5, 1.0);
        let a = lp.add_col("b_i_v0_0".into(), 0.0, 1.0);
        let c = lp.add_col("x".into(), -1.25, f64::INFINITY);
        lp.add_row("norm_i_v0".into(), RowKind::Eq, vec![(b, 1.0), (a, 1.0)], 1.0);
        lp.add_row("cap".into(), RowKind::Le, vec![(c, 2.0), (a, -1.0)], 3.0);
        lp.add_row("low".into(), RowKind::Ge, vec![(c, 1.0)], -0.1);
        lp
    }

    #[test]
    fn mps_round_trip() {
        let lp = tiny();
        let text = write_mps(&lp).unwrap();
        let back = parse_mps(&text).unwrap();
        assert_eq!(back, canonical(&lp));
        assert_eq!(write_mps(&back).unwrap(), text);
        assert!(text.starts_with("NAME          tiny\nROWS\n N  obj\n L  cap\n"));
    }

    #[test]
    fn lp_text_round_trip() {
        let lp = tiny();
        let text = write_lp_text(&lp).unwrap();
        let back = parse_lp_text(&text).unwrap();
        assert_eq!(back, canonical(&lp));
        assert_eq!(write_lp_text(&back).unwrap(), text);
    }

    #[test]
    fn collisions_rejected() {
        let mut lp = tiny();
        lp.add_col("b_i_v0_0".into(), 0.0, 1.0);
        assert!(matches!(write_mps(&lp), Err(LpIoError::Invalid(_))));
        let mut lp = tiny();
        lp.rows[0].name = "x".into();
        assert!(matches!(write_lp_text(&lp), Err(LpIoError::Invalid(_))));
        let mut lp = tiny();
        lp.rows[0].name = "obj".into();
        assert!(write_mps(&lp).is_err());
    }

    #[test]
    fn duplicate_row_in_file() {
        let text = write_mps(&tiny()).unwrap().replace(" G  low", " G  cap");
        assert!(matches!(parse_mps(&text), Err(LpIoError::Parse { .. })));
    }
}
