//! Random faulty scaled sector graphs.
//!
//! Vertices are uniform points in the unit square, each with a sector of
//! central angle `α`, radius `r` and a uniform random orientation. An arc
//! `(i, j)` exists when `j` lies in the sector of `i`. Vertices fail with
//! probability `v` and surviving arcs fail with probability `q`.
//!
//! The crate samples the graph, predicts the two consecutive values on
//! which its maximum out- and in-degree concentrate, checks that
//! prediction by simulation and evaluates Stein–Chen total-variation
//! bounds for the counts of vertices with degrees in a given set.

// Range checks are written as `!(x > 0.0)` on purpose so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cli;
pub mod config;
pub mod geometry;
pub mod harness;
pub mod model;
pub mod theory;

pub use bounds::{BoundsConfig, TVBoundReport};
pub use geometry::{Point2, Sector};
pub use harness::{ExperimentReport, TrialRecord};
pub use model::{DegreeSet, FaultySectorGraph, Mode, ModelParams, Side};
pub use theory::FocusingPrediction;
