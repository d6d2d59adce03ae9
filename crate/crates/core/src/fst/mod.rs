//! Weighted finite-state transducers.
//!
//! Weights are costs: negated natural logs of probabilities. Both supported
//! semirings share `times = +`, `zero = +inf` and `one = 0`; they differ in
//! `plus` (min for tropical, `-ln(e^-a + e^-b)` for log).

mod compose;
mod io;
mod ops;
mod shortest;
mod symbols;

pub use compose::compose;
pub use io::{read_text, write_text};
pub use ops::{connect, union};
pub use shortest::{shortest_path, Path};
pub use symbols::SymbolTable;

use crate::error::{Error, Result};

/// Symbol id. Label 0 is epsilon in every table.
pub type Label = u32;
pub type StateId = u32;

pub const EPSILON: Label = 0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Semiring {
    Tropical,
    Log,
}

impl Semiring {
    #[inline]
    pub fn zero(self) -> f64 {
        f64::INFINITY
    }

    #[inline]
    pub fn one(self) -> f64 {
        0.0
    }

    #[inline]
    pub fn plus(self, a: f64, b: f64) -> f64 {
        match self {
            Semiring::Tropical => a.min(b),
            Semiring::Log => {
                if a == f64::INFINITY {
                    b
                } else if b == f64::INFINITY {
                    a
                } else {
                    a.min(b) - (-(a - b).abs()).exp().ln_1p()
                }
            }
        }
    }

    #[inline]
    pub fn times(self, a: f64, b: f64) -> f64 {
        if a == f64::INFINITY || b == f64::INFINITY {
            f64::INFINITY
        } else {
            a + b
        }
    }

    /// Semiring sum over an iterator of weights.
    pub fn sum<I: IntoIterator<Item = f64>>(self, weights: I) -> f64 {
        weights
            .into_iter()
            .fold(self.zero(), |acc, w| self.plus(acc, w))
    }
}

/// A transition. Named after the OpenFst convention.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Arc {
    pub ilabel: Label,
    pub olabel: Label,
    pub weight: f64,
    pub nextstate: StateId,
}

impl Arc {
    pub fn new(ilabel: Label, olabel: Label, weight: f64, nextstate: StateId) -> Self {
        Arc {
            ilabel,
            olabel,
            weight,
            nextstate,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct FstState {
    pub arcs: Vec<Arc>,
    /// `+inf` for non-final states.
    pub final_weight: f64,
}

/// Mutable-by-construction, immutable-by-convention weighted transducer.
#[derive(Clone, Debug)]
pub struct Fst {
    semiring: Semiring,
    start: Option<StateId>,
    states: Vec<FstState>,
    isyms: SymbolTable,
    osyms: SymbolTable,
}

impl Fst {
    pub fn new(semiring: Semiring, isyms: SymbolTable, osyms: SymbolTable) -> Self {
        Fst {
            semiring,
            start: None,
            states: Vec::new(),
            isyms,
            osyms,
        }
    }

    /// Acceptor-style constructor sharing one table on both sides.
    pub fn acceptor(semiring: Semiring, syms: SymbolTable) -> Self {
        Fst::new(semiring, syms.clone(), syms)
    }

    pub fn semiring(&self) -> Semiring {
        self.semiring
    }

    pub fn isyms(&self) -> &SymbolTable {
        &self.isyms
    }

    pub fn osyms(&self) -> &SymbolTable {
        &self.osyms
    }

    pub(crate) fn set_osyms(&mut self, osyms: SymbolTable) {
        self.osyms = osyms;
    }

    pub fn start(&self) -> Option<StateId> {
        self.start
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_arcs(&self) -> usize {
        self.states.iter().map(|s| s.arcs.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.start.is_none()
    }

    pub fn add_state(&mut self) -> StateId {
        self.states.push(FstState {
            arcs: Vec::new(),
            final_weight: f64::INFINITY,
        });
        (self.states.len() - 1) as StateId
    }

    pub fn set_start(&mut self, s: StateId) {
        assert!((s as usize) < self.states.len(), "start state out of range");
        self.start = Some(s);
    }

    pub fn set_final(&mut self, s: StateId, weight: f64) {
        self.states[s as usize].final_weight = weight;
    }

    pub fn add_arc(&mut self, src: StateId, arc: Arc) {
        assert!(
            (arc.nextstate as usize) < self.states.len(),
            "arc destination {} out of range",
            arc.nextstate
        );
        self.states[src as usize].arcs.push(arc);
    }

    pub fn arcs(&self, s: StateId) -> &[Arc] {
        &self.states[s as usize].arcs
    }

    pub(crate) fn arcs_mut(&mut self, s: StateId) -> &mut Vec<Arc> {
        &mut self.states[s as usize].arcs
    }

    pub fn final_weight(&self, s: StateId) -> f64 {
        self.states[s as usize].final_weight
    }

    pub fn is_final(&self, s: StateId) -> bool {
        self.states[s as usize].final_weight < f64::INFINITY
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> {
        0..self.states.len() as StateId
    }

    /// Structural checks: arcs point at existing states, labels exist in
    /// the symbol tables, start exists when there are states.
    pub fn validate(&self) -> Result<()> {
        let n = self.states.len();
        if n > 0 && self.start.is_none() {
            return Err(Error::Invariant("non-empty fst without start".into()));
        }
        for (s, st) in self.states.iter().enumerate() {
            for a in &st.arcs {
                if a.nextstate as usize >= n {
                    return Err(Error::Invariant(format!(
                        "arc from {s} to missing state {}",
                        a.nextstate
                    )));
                }
                if a.ilabel as usize >= self.isyms.len() || a.olabel as usize >= self.osyms.len()
                {
                    return Err(Error::Invariant(format!(
                        "arc from {s} uses label outside symbol table"
                    )));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn check_compatible(&self, other: &Fst) -> Result<()> {
        if self.semiring != other.semiring {
            return Err(Error::config("semiring mismatch"));
        }
        if self.isyms != other.isyms || self.osyms != other.osyms {
            return Err(Error::config("symbol table mismatch"));
        }
        Ok(())
    }
}
