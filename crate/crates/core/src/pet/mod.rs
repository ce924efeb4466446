//! Cloze reformulation of NLI and the two ADAPET objectives: decoupled label
//! loss at the label slot and label-conditioned masked language modeling over
//! context tokens.

pub mod batch;
pub mod loss;
pub mod masking;
pub mod pattern;
pub mod toy;

pub use loss::{decoupled_label_loss, label_conditioned_mlm_loss, predict_from_row, LogitView};
pub use masking::{sample_cwwm_masks, sample_token_masks, MaskPlan, MaskStrategy};
pub use pattern::{build_pattern, ClozeInstance, Verbalizers};
pub use toy::{predict_label, toy_train, ToyScorer, ToyScorerConfig, TrainOutcome, Vocab};
