//! Problem data and the rate / MSE formulas everything else builds on.

pub mod channel;
pub mod codebook;
pub mod rate;

pub use channel::{complex_gaussian, generate_rayleigh, matrix_to_nested, nested_to_matrix, ChannelFile, ChannelSet};
pub use codebook::{generate_base_codebook, rate_set, CodebookKind, Element, ElementFile, GroundSet, RateTable};
pub use rate::{
    lmmse_filter, mse_matrix, rate, rate_gradient, surrogate, LogBase, Precoder, ReceiveFilter, SlackMatrix,
};
