//! Streaming hand-gesture recognition: segmentation, features, classifiers,
//! an online engine and an experiment harness.

pub mod api;
pub mod config;
pub mod dataset;
pub mod features;
pub mod preprocess;
pub mod segment;
pub mod models;
pub mod engine;
pub mod harness;
