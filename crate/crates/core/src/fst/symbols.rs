use std::collections::HashMap;
use std::io::{BufRead, Write};

use super::Label;
use crate::error::{Error, Result};

pub const EPSILON_SYMBOL: &str = "<eps>";

/// Dense bidirectional mapping between label ids and token strings.
/// Id 0 is always `<eps>`.
#[derive(Clone, Debug)]
pub struct SymbolTable {
    symbols: Vec<String>,
    index: HashMap<String, Label>,
}

impl Default for SymbolTable {
    fn default() -> Self {
        Self::new()
    }
}

impl PartialEq for SymbolTable {
    fn eq(&self, other: &Self) -> bool {
        self.symbols == other.symbols
    }
}

impl Eq for SymbolTable {}

impl SymbolTable {
    pub fn new() -> Self {
        let mut t = SymbolTable {
            symbols: Vec::new(),
            index: HashMap::new(),
        };
        t.add(EPSILON_SYMBOL);
        t
    }

    /// Returns the existing id when the symbol is already present.
    pub fn add(&mut self, symbol: &str) -> Label {
        if let Some(&id) = self.index.get(symbol) {
            return id;
        }
        let id = self.symbols.len() as Label;
        self.symbols.push(symbol.to_string());
        self.index.insert(symbol.to_string(), id);
        id
    }

    pub fn find(&self, symbol: &str) -> Option<Label> {
        self.index.get(symbol).copied()
    }

    pub fn symbol(&self, id: Label) -> Option<&str> {
        self.symbols.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.len() <= 1
    }

    /// (id, symbol) pairs including epsilon.
    pub fn iter(&self) -> impl Iterator<Item = (Label, &str)> {
        self.symbols
            .iter()
            .enumerate()
            .map(|(i, s)| (i as Label, s.as_str()))
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        for (id, s) in self.iter() {
            writeln!(w, "{s} {id}")?;
        }
        Ok(())
    }

    /// Reads the two-column "token id" format; ids must be dense from 0.
    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut symbols = Vec::new();
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(tok), Some(id), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::parse(n + 1, "expected 'token id'"));
            };
            let id: usize = id
                .parse()
                .map_err(|_| Error::parse(n + 1, format!("bad id '{id}'")))?;
            if id != symbols.len() {
                return Err(Error::parse(n + 1, format!("ids must be dense, got {id}")));
            }
            symbols.push(tok.to_string());
        }
        if symbols.first().map(String::as_str) != Some(EPSILON_SYMBOL) {
            return Err(Error::parse(1, "id 0 must be <eps>"));
        }
        let index = symbols
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as Label))
            .collect::<HashMap<_, _>>();
        if index.len() != symbols.len() {
            return Err(Error::parse(0, "duplicate symbol in table"));
        }
        Ok(SymbolTable { symbols, index })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsilon_is_zero_and_add_is_idempotent() {
        let mut t = SymbolTable::new();
        assert_eq!(t.find("<eps>"), Some(0));
        let a = t.add("a");
        assert_eq!(t.add("a"), a);
        assert_eq!(t.symbol(a), Some("a"));
    }

    #[test]
    fn text_round_trip() {
        let mut t = SymbolTable::new();
        t.add("x");
        t.add("#tag:cs");
        let mut buf = Vec::new();
        t.write(&mut buf).unwrap();
        let back = SymbolTable::read(&buf[..]).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn sparse_ids_rejected() {
        let err = SymbolTable::read("<eps> 0\na 2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }
}
