//! Beam search over composed graphs, n-best lists, tag-routed rescoring
//! and WER scoring.

mod align;
mod nbest;
mod route;
mod search;
mod wer;

pub use align::{align, EditCounts};
pub use nbest::{read_nbest, write_nbest, Hypothesis, NBestList, TOTAL_TOLERANCE};
pub use route::{route_rescore, split_tag, RescoreModels, DEFAULT_TAG};
pub use search::{beam_decode, DecodeConfig};
pub use wer::{score_wer, SubsetScore, WerReport};
