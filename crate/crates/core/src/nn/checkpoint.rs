use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use super::{Matrix, Param, ParamStore};
use crate::error::{Error, Result};

const MAGIC: &str = "csasr-params 1";

/// Writes a self-describing text checkpoint. Values use the shortest
/// representation that parses back to the same bits.
pub fn write_params<W: Write>(store: &ParamStore, mut w: W) -> Result<()> {
    writeln!(w, "{MAGIC}")?;
    writeln!(w, "seed {}", store.seed())?;
    for (k, v) in &store.meta {
        if k.contains(char::is_whitespace) || v.contains('\n') {
            return Err(Error::config(format!("unserializable metadata key '{k}'")));
        }
        writeln!(w, "meta {k} {v}")?;
    }
    for (_, p) in store.iter() {
        let m = &p.value;
        writeln!(w, "param {} {} {} {}", p.name, m.rows(), m.cols(), u8::from(p.frozen))?;
        for r in 0..m.rows() {
            let row: Vec<String> = m.row(r).iter().map(|v| format!("{v:?}")).collect();
            writeln!(w, "{}", row.join(" "))?;
        }
    }
    writeln!(w, "end")?;
    Ok(())
}

pub fn read_params<R: BufRead>(r: R) -> Result<ParamStore> {
    let mut lines = r.lines().enumerate().map(|(i, l)| l.map(|l| (i + 1, l)));
    let mut next = || -> Result<(usize, String)> {
        lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::parse(0, "truncated checkpoint"))
    };
    let (n, l) = next()?;
    if l.trim() != MAGIC {
        return Err(Error::parse(n, "not a parameter checkpoint"));
    }
    let (n, l) = next()?;
    let seed: u64 = l
        .strip_prefix("seed ")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::parse(n, "expected seed line"))?;
    let mut meta = BTreeMap::new();
    let mut params = Vec::new();
    loop {
        let (n, l) = next()?;
        if l == "end" {
            break;
        }
        if let Some(rest) = l.strip_prefix("meta ") {
            let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
            meta.insert(k.to_string(), v.to_string());
            continue;
        }
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() != 5 || f[0] != "param" {
            return Err(Error::parse(n, "expected param header"));
        }
        let dim = |s: &str| -> Result<usize> { s.parse().map_err(|_| Error::parse(n, "bad dimension")) };
        let (rows, cols) = (dim(f[2])?, dim(f[3])?);
        let frozen = match f[4] {
            "0" => false,
            "1" => true,
            _ => return Err(Error::parse(n, "bad frozen flag")),
        };
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (n, l) = next()?;
            let before = data.len();
            for v in l.split_whitespace() {
                data.push(v.parse::<f64>().map_err(|_| Error::parse(n, "bad value"))?);
            }
            if data.len() - before != cols {
                return Err(Error::parse(n, format!("expected {cols} values")));
            }
        }
        params.push(Param {
            name: f[1].to_string(),
            value: Matrix::from_vec(rows, cols, data)?,
            frozen,
        });
    }
    ParamStore::restore(seed, params, meta)
}
