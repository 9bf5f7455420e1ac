//! Dyadic tiles, wave packets, mass and energy functionals, tree selection and the operator
//! checks built on them, with seeded experiment ensembles.
pub mod bump;
pub mod error;
pub mod field;
pub mod functionals;
pub mod geometry;
pub mod grid;
pub mod harness;
pub mod multiplier;
pub mod operators;
pub mod oracle;
pub mod packets;
pub mod scalar;
pub mod selection;
pub mod testfn;
pub mod trees;
pub mod weights;

pub use error::{Error, Result};
pub use field::{DirectionField, SetIndicator};
pub use functionals::MassTable;
pub use geometry::{generate_universe, lex_compare, tile_leq, Dyadic, DyadicCube, SemitileIndex, Tile};
pub use grid::{Domain, Grid, GridFunction};
pub use harness::{run_experiment, Experiment, ExperimentConfig, Report};
pub use multiplier::Multiplier;
pub use packets::PacketContext;
pub use scalar::Real;
pub use selection::Instance;
pub use trees::Tree;
pub use weights::TileWeights;

pub type GridFunction32 = GridFunction<f32>;
pub type GridFunction64 = GridFunction<f64>;
pub type TileWeights32 = TileWeights<f32>;
pub type TileWeights64 = TileWeights<f64>;
