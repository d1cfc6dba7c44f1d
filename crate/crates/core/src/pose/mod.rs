//! Pose estimation: weighted Kabsch, recurrent updates, synchronization,
//! anchor refinement, and the inner/outer registration loop.

pub mod gru;
pub mod kabsch;
pub mod loss;
pub mod pipeline;
pub mod refine;
pub mod sync;

pub use gru::{gru_step, GruState, GruWeights};
pub use kabsch::{weighted_kabsch, WeightedCorrespondences3D};
pub use loss::{registration_loss, PairMatches3D};
pub use pipeline::{register, ClipState, Pipeline, PreparedFrame, Registration};
pub use refine::refine_anchors;
pub use sync::{synchronize_poses, RelativePose};
