//! Detection and diarization scoring.

mod assignment;
mod der;
mod roc;

pub use assignment::{hungarian_max, permutation_max};
pub use der::{der, optimal_speaker_mapping, DerBreakdown};
pub use roc::{auc, macro_micro_auc, roc_curve, AucReport, RocCurve};
