//! Location preference optimization for GUI agents.
//!
//! The crate scores GUI actions with two location rewards, a window-entropy
//! factor and a type-gated distance factor, and optimizes a small softmax
//! click policy against those rewards with a clipped, KL-regularized
//! group-relative policy gradient.
//!
//! Modules, bottom up:
//!
//! * [`imaging`]: PGM/PPM/RAW decoding, longest-edge resize, grayscale.
//! * [`windowing`]: grid partition and per-window entropy.
//! * [`actions`]: action model and the JSONL record format.
//! * [`reward`]: `r_w`, `r_d` and their product.
//! * [`policy`]: softmax policy over `(type, cell)` with closed-form gradients.
//! * [`grpo`]: group-relative advantages, the clipped objective and training.
//! * [`synthenv`]: seeded synthetic screenshots with ground-truth clicks.
//! * [`config`]: JSON run configuration with dotted overrides.
//! * [`cli`]: the `lpo` command line.

pub mod actions;
pub mod cli;
pub mod config;
pub mod geometry;
pub mod grpo;
pub mod imaging;
pub mod policy;
pub mod reward;
pub mod stats;
pub mod synthenv;
pub mod windowing;

pub use actions::{Action, ActionType, StepRecord};
pub use geometry::{Point, Rect};
pub use imaging::{GrayImage, Screenshot};
pub use policy::{PolicyParams, PolicySample};
pub use reward::{RewardBreakdown, RewardConfig};
pub use windowing::{EntropyMap, GridConfig};
