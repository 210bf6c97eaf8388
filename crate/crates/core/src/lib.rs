//! Scenario-based scene understanding.
//!
//! Binary object/view data is factorized into interpretable "scenarios"
//! (sets of co-occurring objects) with pseudo-Boolean matrix factorization.
//! Per-view scenario scores are max-pooled across views, classified
//! open-set with a Weibull-calibrated SVM, and a linear Q-learning agent
//! decides when to look around, predict, or reject a scene as unknown.
//!
//! Module map:
//!
//! * [`dataset`] synthetic multi-view corpora with planted scenarios
//! * [`pbmf`] dictionary learning, pruning, refinement and dynamic extension
//! * [`detector`] stand-in scenario recognizers plus average precision
//! * [`fusion`] max-pooling of view scores
//! * [`openset`] logistic baseline, OC-SVM, one-vs-rest SVM, Weibull calibration
//! * [`agent`] exploration MDP and linear Q-learning
//! * [`harness`] configuration, metrics and experiment drivers

pub mod agent;
pub mod dataset;
pub mod detector;
pub mod fusion;
pub mod harness;
pub mod openset;
pub mod pbmf;
pub mod rng;
