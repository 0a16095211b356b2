//! Deterministic 2D toolkit for object-relative navigation: goal geometry,
//! scene simulation, expert planning, action tokenization, closed-loop
//! execution, dataset generation and evaluation.

pub mod codec;
pub mod config;
pub mod controller;
pub mod dataset;
pub mod eval;
pub mod geometry;
pub mod kinematics;
pub mod pipeline;
pub mod planner;
pub mod scene;
pub mod tokens;
