//! RGB-D frames, descriptor providers, and window matching.

pub mod camera;
pub mod clip;
pub mod features;
pub mod frame;
pub mod oracle;
pub mod window;

pub use camera::Intrinsics;
pub use clip::{load_clip, write_clip, ClipOptions};
pub use features::{patch_descriptor, select_keypoints, FeatureGrid, FeatureSet};
pub use frame::{backproject, Frame};
pub use oracle::{oracle_descriptor, OracleFeatures};
pub use window::{crop_window, subpixel_match, SubpixelMatch, Window};
