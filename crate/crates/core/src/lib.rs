#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` deliberately rejects NaN

pub mod acceptance;
pub mod calculus;
pub mod config;
pub mod diagnostics;
pub mod dynamics;
pub mod elliptic;
pub mod error;
pub mod grid;
pub mod io;
pub mod norms;
pub mod par;
pub mod params;
pub mod plot;
pub mod presets;
pub mod regularized;
pub mod runner;

pub use error::{Error, Result};
pub use grid::{make_grid, FaceField, Field, Grid, GridSpec};
pub use params::{ModelParams, ReactionLaw};
