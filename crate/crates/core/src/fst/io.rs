//! AT&T text format: `src dst ilabel olabel [weight]` per arc and
//! `state [weight]` per final state. The first line's source is the start.
//! Labels are numeric ids; symbol tables travel in separate files.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use super::{Arc, Fst, Semiring, StateId, SymbolTable};
use crate::error::{Error, Result};

fn write_weight<W: Write>(w: &mut W, weight: f64) -> Result<()> {
    if weight != 0.0 {
        write!(w, "\t{weight}")?;
    }
    Ok(())
}

pub fn write_text<W: Write>(f: &Fst, mut w: W) -> Result<()> {
    let Some(start) = f.start() else {
        return Ok(());
    };
    let order = std::iter::once(start).chain(f.states().filter(|&s| s != start));
    for s in order {
        for a in f.arcs(s) {
            write!(w, "{}\t{}\t{}\t{}", s, a.nextstate, a.ilabel, a.olabel)?;
            write_weight(&mut w, a.weight)?;
            writeln!(w)?;
        }
        if f.is_final(s) {
            write!(w, "{s}")?;
            write_weight(&mut w, f.final_weight(s))?;
            writeln!(w)?;
        } else if s == start && f.arcs(s).is_empty() {
            // A lone non-final start: keep it so the machine is not lost.
            writeln!(w, "{s}\tInfinity")?;
        }
    }
    Ok(())
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| Error::parse(line, format!("bad {what} '{tok}'")))
}

fn parse_weight(tok: &str, line: usize) -> Result<f64> {
    match tok {
        "Infinity" | "inf" => Ok(f64::INFINITY),
        _ => parse_num(tok, line, "weight"),
    }
}

pub fn read_text<R: BufRead>(
    r: R,
    semiring: Semiring,
    isyms: SymbolTable,
    osyms: SymbolTable,
) -> Result<Fst> {
    let mut arcs: Vec<(StateId, Arc)> = Vec::new();
    let mut finals: Vec<(StateId, f64)> = Vec::new();
    let mut start = None;
    let mut max_state: Option<StateId> = None;
    let mut seen = BTreeSet::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        let lineno = n + 1;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        let src: StateId = parse_num(toks[0], lineno, "state")?;
        start.get_or_insert(src);
        seen.insert(src);
        match toks.len() {
            1 | 2 => {
                let w = if toks.len() == 2 {
                    parse_weight(toks[1], lineno)?
                } else {
                    0.0
                };
                finals.push((src, w));
                max_state = max_state.max(Some(src));
            }
            4 | 5 => {
                let dst: StateId = parse_num(toks[1], lineno, "state")?;
                let il: u32 = parse_num(toks[2], lineno, "label")?;
                let ol: u32 = parse_num(toks[3], lineno, "label")?;
                if il as usize >= isyms.len() || ol as usize >= osyms.len() {
                    return Err(Error::parse(lineno, "label outside symbol table"));
                }
                let w = if toks.len() == 5 {
                    parse_weight(toks[4], lineno)?
                } else {
                    0.0
                };
                arcs.push((src, Arc::new(il, ol, w, dst)));
                max_state = max_state.max(Some(src.max(dst)));
            }
            _ => return Err(Error::parse(lineno, "expected 1, 2, 4 or 5 fields")),
        }
    }
    let mut f = Fst::new(semiring, isyms, osyms);
    let Some(max_state) = max_state else {
        return Ok(f);
    };
    for _ in 0..=max_state {
        f.add_state();
    }
    f.set_start(start.unwrap_or(0));
    for (s, w) in finals {
        f.set_final(s, w);
    }
    for (s, a) in arcs {
        f.add_arc(s, a);
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fst::shortest_path;

    #[test]
    fn round_trip_preserves_weights() {
        let mut t = SymbolTable::new();
        t.add("a");
        t.add("b");
        let mut f = Fst::acceptor(Semiring::Tropical, t.clone());
        let (s0, s1, s2) = (f.add_state(), f.add_state(), f.add_state());
        f.set_start(s1);
        f.set_final(s2, 0.123456789);
        f.add_arc(s1, Arc::new(1, 2, 1.0 / 3.0, s0));
        f.add_arc(s0, Arc::new(2, 1, -0.75, s2));
        let mut buf = Vec::new();
        write_text(&f, &mut buf).unwrap();
        let back = read_text(&buf[..], Semiring::Tropical, t.clone(), t).unwrap();
        assert_eq!(back.start(), Some(s1));
        let p1 = shortest_path(&f, 1).unwrap();
        let p2 = shortest_path(&back, 1).unwrap();
        assert_eq!(p1[0].ilabels, p2[0].ilabels);
        assert!((p1[0].weight - p2[0].weight).abs() < 1e-6);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let t = SymbolTable::new();
        let err = read_text("0 1 0 0\n1 2 3\n".as_bytes(), Semiring::Tropical, t.clone(), t)
            .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }
}
