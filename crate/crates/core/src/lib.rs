//! Repeat detection in metagenomic assemblies.
//!
//! Reads are assembled into unitigs, unitigs are linked by read pairs into a
//! graph, and a graph neural network trained on coverage/length pseudo-labels
//! is combined with a random forest to classify every unitig as repeat or
//! non-repeat.

pub mod assembly;
pub mod baselines;
pub mod config;
pub mod dna;
pub mod error;
pub mod evaluate;
pub mod finetune;
pub mod forest;
pub mod graphfeat;
pub mod io;
pub mod pipeline;
pub mod pseudolabel;
pub mod sagenet;
pub mod seeds;
pub mod simdata;
pub mod stats;
pub mod unigraph;

pub use error::{Error, Result};
