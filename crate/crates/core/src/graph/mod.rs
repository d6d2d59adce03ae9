//! Token (T), lexicon (L) and grammar (G) transducers and the composed
//! `T∘L∘G` search graph, plus tagged multi-graph unions.
//!
//! Label spaces:
//! - T: CTC symbols (`<blk>` + units) → units
//! - L: units → words
//! - G: words → words (acceptor)
//!
//! A multigraph additionally emits one `#tag:<name>` output symbol at the
//! entry of each component.

mod grammar;
mod lexicon;

pub use grammar::build_grammar_fst;
pub use lexicon::{Lexicon, LexiconEntry, UnitInventory, BLANK, SHARED_LANG};

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::fst::{compose, connect, union, Arc, Fst, Label, Semiring, EPSILON};

pub const TAG_PREFIX: &str = "#tag:";

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GraphTag {
    name: String,
}

impl GraphTag {
    pub fn new(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(Error::config(format!("invalid graph tag '{name}'")));
        }
        Ok(GraphTag { name })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn symbol(&self) -> String {
        format!("{TAG_PREFIX}{}", self.name)
    }

    /// Parses a `#tag:<name>` symbol.
    pub fn from_symbol(sym: &str) -> Option<Self> {
        sym.strip_prefix(TAG_PREFIX)
            .and_then(|n| GraphTag::new(n).ok())
    }
}

impl std::fmt::Display for GraphTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.name)
    }
}

/// Token transducer realizing the CTC collapse: for every unit sequence
/// `z` it accepts exactly the frame paths `π` with `B(π) = z` and emits `z`.
///
/// State 0 means "after blank or at start"; state `u` means "last emitted
/// unit was `u`". Each path is unique, so the machine is also exact under
/// the log semiring.
pub fn build_token_fst(inv: &UnitInventory) -> Fst {
    let n = inv.units().len() as Label;
    let mut t = Fst::new(Semiring::Tropical, inv.ctc_table(), inv.unit_table());
    let blank_in: Label = 1;
    let unit_in = |u: Label| u + 1;
    let s0 = t.add_state();
    t.set_start(s0);
    t.set_final(s0, 0.0);
    for _ in 1..=n {
        let s = t.add_state();
        t.set_final(s, 0.0);
    }
    t.add_arc(s0, Arc::new(blank_in, EPSILON, 0.0, s0));
    for u in 1..=n {
        t.add_arc(s0, Arc::new(unit_in(u), u, 0.0, u));
        t.add_arc(u, Arc::new(unit_in(u), EPSILON, 0.0, u));
        t.add_arc(u, Arc::new(blank_in, EPSILON, 0.0, s0));
        for v in 1..=n {
            if v != u {
                t.add_arc(u, Arc::new(unit_in(v), v, 0.0, v));
            }
        }
    }
    t
}

/// Lexicon transducer: the closure over words of unit chains. The word is
/// emitted on the first arc of its chain; homophones yield parallel chains.
pub fn build_lexicon_fst(lex: &Lexicon, inv: &UnitInventory) -> Result<Fst> {
    if lex.is_empty() {
        return Err(Error::config("empty lexicon"));
    }
    let words = lex.word_table();
    let labels = lex.unit_labels(inv)?;
    let mut l = Fst::new(Semiring::Tropical, inv.unit_table(), words.clone());
    let root = l.add_state();
    l.set_start(root);
    l.set_final(root, 0.0);
    for (entry, units) in lex.entries().iter().zip(&labels) {
        let word = words.find(&entry.word).expect("word table built from lexicon");
        let mut prev = root;
        for (i, &u) in units.iter().enumerate() {
            let last = i + 1 == units.len();
            let next = if last { root } else { l.add_state() };
            let out = if i == 0 { word } else { EPSILON };
            l.add_arc(prev, Arc::new(u, out, 0.0, next));
            prev = next;
        }
    }
    Ok(l)
}

/// Connected `T∘(L∘G)`.
pub fn build_search_graph(t: &Fst, l: &Fst, g: &Fst) -> Result<Fst> {
    if t.osyms() != l.isyms() {
        return Err(Error::config("token output symbols differ from lexicon input symbols"));
    }
    if l.osyms() != g.isyms() {
        return Err(Error::config("lexicon output symbols differ from grammar input symbols"));
    }
    let lg = connect(&compose(l, g)?);
    Ok(connect(&compose(t, &lg)?))
}

/// Union of search graphs where each component is entered through an
/// arc that consumes nothing and emits that component's tag symbol.
pub fn build_multigraph(graphs: &[(Fst, GraphTag)]) -> Result<Fst> {
    if graphs.is_empty() {
        return Err(Error::config("multigraph needs at least one component"));
    }
    let mut seen = BTreeSet::new();
    for (_, tag) in graphs {
        if !seen.insert(tag.name()) {
            return Err(Error::config(format!("duplicate graph tag '{}'", tag.name())));
        }
    }
    let fsts: Vec<Fst> = graphs.iter().map(|(f, _)| f.clone()).collect();
    let mut u = union(&fsts)?;
    let mut osyms = u.osyms().clone();
    let mut tag_labels = Vec::new();
    for (f, tag) in graphs {
        let sym = tag.symbol();
        if osyms.find(&sym).is_some() {
            return Err(Error::config(format!("tag symbol {sym} already in output table")));
        }
        let id = osyms.add(&sym);
        if f.start().is_some() {
            tag_labels.push(id);
        }
    }
    u.set_osyms(osyms);
    let start = u.start().expect("union has a start state");
    let entry = u.arcs_mut(start);
    debug_assert_eq!(entry.len(), tag_labels.len());
    for (arc, label) in entry.iter_mut().zip(tag_labels) {
        arc.olabel = label;
    }
    Ok(u)
}
