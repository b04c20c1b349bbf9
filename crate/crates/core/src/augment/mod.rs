//! Time-domain augmentation: removal, noise injection, shifting and the two
//! mixes built from them.
//!
//! Every random draw comes from an [`RngStream`] keyed by
//! `(seed, epoch, sample index)`, so a sample's augmented view does not depend
//! on batch composition, worker count or processing order.

mod policy;
mod rng;
mod transforms;

pub use policy::{apply_policy, augment_window, AugmentKind, AugmentationPolicy, ChannelSubsetMode};
pub use rng::RngStream;
pub use transforms::{
    mix1, mix2, noise_injection, noise_injection_with, removal, removal_with, shift, shift_with,
    RemovalDraw,
};
