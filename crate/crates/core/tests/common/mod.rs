//! Oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

pub mod ctc;
pub mod decode;
pub mod fst;
pub mod lm;
pub mod ngram;
pub mod rescore;
pub mod run;
pub mod xling;
