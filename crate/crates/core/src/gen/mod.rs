//! Generative evaluative network: surrogate evaluator, joint
//! partition/parameter generator, offline dataset construction, two-stage
//! training and test-time adaptation.

pub mod dataset;
pub mod evaluator;
pub mod generator;

pub mod training;
pub mod tta;
