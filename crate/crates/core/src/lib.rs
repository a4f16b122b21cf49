//! Scene-aware human motion forecasting through human/scene mutual distances.

pub mod body;
pub mod geometry;
pub mod mutual;
pub mod spectral;
pub mod autodiff;
pub mod nets;
pub mod training;
pub mod cli;
