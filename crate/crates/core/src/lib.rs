pub mod cube;
pub mod decompose;
pub mod detect;
pub mod error;
pub mod eval;
pub mod io;
pub mod prox;
pub mod synth;

pub use cube::{BandMask, GroundTruthMask, HsiCube, Normalization, SceneMatrix, SpectralDictionary};
pub use decompose::{decompose, Decomposition, Profile, SolverConfig};
pub use detect::{DetectionMap, WindowSpec};
pub use error::{Error, Result};
