use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::fst::{Label, SymbolTable};

pub const BLANK: &str = "<blk>";
pub const SHARED_LANG: &str = "shared";

/// CTC unit inventory. Index 0 is the blank; units follow in file order.
///
/// Three label spaces meet here: CTC symbol indices (`0` = blank, as in a
/// posterior grid), token-FST input labels (`ctc index + 1`, since label 0
/// is epsilon) and unit labels (`1..=units`, no blank).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnitInventory {
    units: Vec<String>,
}

impl UnitInventory {
    pub fn new<S: AsRef<str>>(units: &[S]) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::with_capacity(units.len());
        for u in units {
            let u = u.as_ref();
            if u == BLANK || u == "<eps>" || u.is_empty() || u.contains(char::is_whitespace) {
                return Err(Error::config(format!("invalid unit '{u}'")));
            }
            if !seen.insert(u.to_string()) {
                return Err(Error::config(format!("duplicate unit '{u}'")));
            }
            out.push(u.to_string());
        }
        if out.is_empty() {
            return Err(Error::config("unit inventory needs at least one unit"));
        }
        Ok(UnitInventory { units: out })
    }

    /// Sorted set of all units used by the lexicon.
    pub fn from_lexicon(lex: &Lexicon) -> Result<Self> {
        let set: BTreeSet<&str> = lex
            .entries()
            .iter()
            .flat_map(|e| e.units.iter().map(String::as_str))
            .collect();
        Self::new(&set.into_iter().collect::<Vec<_>>())
    }

    pub fn units(&self) -> &[String] {
        &self.units
    }

    /// Number of CTC symbols including the blank.
    pub fn num_symbols(&self) -> usize {
        self.units.len() + 1
    }

    /// CTC symbol index of a unit (1-based; 0 is blank).
    pub fn ctc_index(&self, unit: &str) -> Option<usize> {
        self.units.iter().position(|u| u == unit).map(|i| i + 1)
    }

    /// Input table of the token FST: `<eps>`, `<blk>`, units.
    pub fn ctc_table(&self) -> SymbolTable {
        let mut t = SymbolTable::new();
        t.add(BLANK);
        for u in &self.units {
            t.add(u);
        }
        t
    }

    /// Unit table shared by token-FST output and lexicon-FST input.
    pub fn unit_table(&self) -> SymbolTable {
        let mut t = SymbolTable::new();
        for u in &self.units {
            t.add(u);
        }
        t
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = Vec::new();
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            if lines.is_empty() && n == 0 && t != BLANK {
                return Err(Error::parse(1, "unit inventory must start with <blk>"));
            }
            lines.push(t.to_string());
        }
        if lines.first().map(String::as_str) != Some(BLANK) {
            return Err(Error::parse(1, "unit inventory must start with <blk>"));
        }
        Self::new(&lines[1..])
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{BLANK}")?;
        for u in &self.units {
            writeln!(w, "{u}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LexiconEntry {
    pub word: String,
    pub lang: String,
    pub units: Vec<String>,
}

/// Pronunciation lexicon. A word may have several entries.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Lexicon {
    entries: Vec<LexiconEntry>,
}

impl Lexicon {
    pub fn new(entries: Vec<LexiconEntry>) -> Result<Self> {
        let mut langs = BTreeSet::new();
        for e in &entries {
            if e.units.is_empty() {
                return Err(Error::config(format!("word '{}' has no units", e.word)));
            }
            if e.word.is_empty() || e.word.starts_with('#') || e.word.starts_with('<') {
                return Err(Error::config(format!("reserved or empty word '{}'", e.word)));
            }
            if e.lang != SHARED_LANG {
                langs.insert(e.lang.as_str());
            }
        }
        if langs.len() > 2 {
            return Err(Error::config(format!(
                "lexicon holds more than two languages: {langs:?}"
            )));
        }
        Ok(Lexicon { entries })
    }

    /// Lexicon-free mode: every word spelled as its characters.
    pub fn spelled<'a, I>(words: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let entries = words
            .into_iter()
            .map(|(w, lang)| LexiconEntry {
                word: w.to_string(),
                lang: lang.to_string(),
                units: w.chars().map(|c| c.to_string()).collect(),
            })
            .collect();
        Self::new(entries)
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Word table in first-appearance order.
    pub fn word_table(&self) -> SymbolTable {
        let mut t = SymbolTable::new();
        for e in &self.entries {
            t.add(&e.word);
        }
        t
    }

    pub fn word_languages(&self) -> HashMap<String, String> {
        self.entries
            .iter()
            .map(|e| (e.word.clone(), e.lang.clone()))
            .collect()
    }

    /// The (at most two) non-shared language codes, in first-appearance order.
    pub fn languages(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for e in &self.entries {
            if e.lang != SHARED_LANG && !out.contains(&e.lang) {
                out.push(e.lang.clone());
            }
        }
        out
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut entries = Vec::new();
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(Error::parse(n + 1, "expected word<TAB>lang<TAB>units"));
            }
            let units: Vec<String> = cols[2].split_whitespace().map(str::to_string).collect();
            if units.is_empty() {
                return Err(Error::parse(n + 1, format!("word '{}' has no units", cols[0])));
            }
            entries.push(LexiconEntry {
                word: cols[0].trim().to_string(),
                lang: cols[1].trim().to_string(),
                units,
            });
        }
        Self::new(entries)
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        for e in &self.entries {
            writeln!(w, "{}\t{}\t{}", e.word, e.lang, e.units.join(" "))?;
        }
        Ok(())
    }

    pub(crate) fn unit_labels(&self, inv: &UnitInventory) -> Result<Vec<Vec<Label>>> {
        let table = inv.unit_table();
        self.entries
            .iter()
            .map(|e| {
                e.units
                    .iter()
                    .map(|u| {
                        table.find(u).ok_or_else(|| {
                            Error::config(format!(
                                "word '{}' uses unit '{u}' missing from the inventory",
                                e.word
                            ))
                        })
                    })
                    .collect()
            })
            .collect()
    }
}
