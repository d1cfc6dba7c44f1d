//! Score matrices, Sinkhorn transport, and cycle-consistent anchors.

pub mod anchors;
pub mod dump;
pub mod losses;
pub mod score;
pub mod sinkhorn;
pub mod sync;

pub use anchors::{extract_anchors, AnchorSet};
pub use losses::cycle_losses;
pub use score::{descriptors, score_matrix, ScoreMatrix};
pub use sinkhorn::{sinkhorn, Correspondence, CorrespondenceSet, SoftMatch};
pub use sync::{synchronize_matches, SyncedMatches};
