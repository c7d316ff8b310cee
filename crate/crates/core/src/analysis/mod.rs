//! Quality measures, the XIM cost, the PCA baseline and the subsampled
//! evaluation protocol.

pub mod cost;
pub mod metrics;
pub mod pca;
pub mod protocol;
