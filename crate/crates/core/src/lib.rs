//! Transition-based constituency parsing with three transition systems (bottom-up,
//! top-down and in-order) sharing one stack-LSTM scoring model.

pub mod decode;
pub mod eval;
pub mod model;
pub mod nn;
pub mod synth;
pub mod transition;
pub mod treebank;
