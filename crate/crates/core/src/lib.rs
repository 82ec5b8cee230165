//! Signal processing, feature extraction, classification and decision-level
//! fusion for EEG/EMG upper-limb movement recognition.
//!
//! The crate is `no_std` and only needs an allocator. File formats, the
//! command line and anything touching the filesystem live in the `biofuse`
//! companion crate.
//!
//! ```text
//! Recording ─► slide_windows ─► features ─► FeatureMatrix ─► selection
//!                                                 │
//!                      fusion ◄─ DecisionVector ◄─ classify (kNN / MLP / LSTM)
//! ```

#![no_std]

extern crate alloc;

pub mod classify;
pub mod dsp;
pub mod erders;
mod error;
mod linalg;
pub mod features;
pub mod fusion;
pub mod rng;
pub mod selection;
pub mod signal;
pub mod synth;

pub use error::{Error, Result};
pub use signal::{
    FeatureMatrix, Modality, Recording, Scaler, Stage, StageSegmentation, Trial, Window,
    WindowSpec,
};

/// Items every module pulls in: the `alloc` collections and float math that
/// works without `std`.
pub(crate) mod prelude {
    pub use alloc::boxed::Box;
    pub use alloc::format;
    pub use alloc::string::{String, ToString};
    pub use alloc::vec;
    pub use alloc::vec::Vec;
    #[allow(unused_imports)]
    pub use num_traits::Float;
}
