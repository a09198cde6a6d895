//! Media sharing analysis of social-media users and news outlets.
//!
//! The pipeline turns raw share events into a user-by-outlet count matrix,
//! scores users and outlets on a single latent axis (the media sharing index,
//! MSI) through correspondence analysis, relates that axis to each user's
//! ideology valence, checks the MSI distribution for bimodality with the dip
//! test, and detects and profiles communities in the retweet network.
//!
//! Modules map onto pipeline stages:
//!
//! - [`ingest`]: event parsing, outlet selection, count matrix and retweet graph.
//! - [`ca`]: standardized residuals, truncated SVD, user and outlet MSI.
//! - [`ideology`]: label timelines and ideology valence.
//! - [`stats`]: dip test and Gaussian kernel density estimates.
//! - [`netcomm`]: symmetrization, Louvain, modularity and community profiles.
//! - [`synth`]: planted-structure data generator for end-to-end checks.
//! - [`artifacts`]: CSV/JSON artifact readers and writers shared by the CLI.

pub mod artifacts;
pub mod ca;
mod error;
pub mod ideology;
pub mod ingest;
pub mod netcomm;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
