//! Natural-steganography toolkit: estimate a camera's ISO-dependent sensor
//! noise model from flat-field stacks, then embed a payload into 16-bit
//! rasters by synthesizing a stego signal that makes the image look like it
//! was captured at a higher ISO, with the signal model propagated through
//! the developing steps (quantization, gamma, demosaicing, color transform,
//! downsampling).

pub mod develop;
pub mod error;
pub mod eval;
pub mod noise;
pub mod plan;
pub mod raster;
pub mod rng;
pub mod stego;

pub use error::{Error, Result};
pub use noise::{BinStats, NoiseModel};
pub use plan::{DevelopPlan, StageSpec};
pub use raster::{Raster16, TileSpec};
pub use stego::{ChangeProbMap, CostMap, StegoParams};
