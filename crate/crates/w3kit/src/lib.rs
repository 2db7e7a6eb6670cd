//! Factorized what-where-when video attention, a low-rank temporal-context
//! action scorer, logit-level multimodal fusion with Top-k metrics, and a
//! synthetic planted-signal harness that trains and evaluates all of it at
//! desk scale.

pub mod attention;
pub mod backbone;
pub mod checkpoint;
pub mod config;
pub mod ctxt;
pub mod data;
pub mod elem;
pub mod error;
pub mod experiment;
pub mod fusion;
pub mod gradsuite;
pub mod nn;
pub mod parallel;
pub mod params;
pub mod pipeline;
pub mod predictions;
pub mod report;
pub mod rng;
pub mod tensor;
pub mod train;

pub use elem::Elem;
pub use error::{Error, Result};
pub use tensor::{FeatureMap, Mat, Vol};
