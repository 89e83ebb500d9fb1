//! Conditional-entropy (CENT) features from convolutional network activations.
//!
//! The crate bundles everything needed to go from images to evaluated
//! CENT classifiers without external ML dependencies:
//!
//! * [`tensor`]: dense tensors and hand-differentiated layer primitives.
//! * [`net`]: layer stacks, SGD training, checkpoints, activation snapshots.
//! * [`infotheory`]: histogram entropy estimators, CENT extraction and
//!   executable checks of the conditioning, partition and data-processing
//!   inequalities.
//! * [`forest`]: a random-forest classifier.
//! * [`eval`]: k-fold plans, ROC/AUC and the label-permutation control.
//! * [`dataio`]: tensor files, manifests, synthetic data and activation dumps.

mod binio;
pub mod dataio;
pub mod error;
pub mod eval;
pub mod forest;
pub mod infotheory;
pub mod net;
pub mod tensor;

pub use error::{Error, FormatError, Result};
pub use tensor::Tensor;
