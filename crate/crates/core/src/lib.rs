//! Algorithmic core of the jumping adaptive multimodal sampler.
//!
//! The sampler runs on the augmented space `X × I`, where `I` indexes the
//! modes found during burn-in. Local random-walk moves keep the mode label,
//! jump moves relocate both the point and the label, and per-mode
//! covariances are learned online.
//!
//! This crate is `no_std` (it needs `alloc`). File formats, the CLI and the
//! thread pool live in the `jams` crate.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod adaptation;
pub mod augmented_target;
pub mod burnin;
pub mod error;
pub mod kernels;
pub mod numerics;
pub mod rng;
pub mod sampler;
pub mod targets;

pub use error::{Error, Result};

use alloc::vec::Vec;

/// Runs a batch of independent work items. Implementations must return the
/// outputs in input order.
pub trait Executor: Sync {
    fn map<I, O, F>(&self, items: Vec<I>, f: F) -> Vec<O>
    where
        I: Send,
        O: Send,
        F: Fn(I) -> O + Sync + Send;
}

/// Runs work items one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<I, O, F>(&self, items: Vec<I>, f: F) -> Vec<O>
    where
        I: Send,
        O: Send,
        F: Fn(I) -> O + Sync + Send,
    {
        items.into_iter().map(f).collect()
    }
}
