//! Simulation and analysis toolkit for atomic-frequency-comb quantum
//! memories in rare-earth doped crystals, their waveguide interfaces, and
//! the narrowband photon-pair sources that feed them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coherence;
pub mod counting;
pub mod dft;
pub mod error;
pub mod fit;
pub mod memory;
pub mod source;
pub mod spectral;
pub mod timetag;
pub mod waveguide;

pub use counting::{CSResult, CoincidenceHistogram, CorrelationResult, Measured};
pub use error::{Error, Result};
pub use fit::{Estimate, ExpFit, LineFit};
pub use memory::{AtomEnsemble, EchoWindows, FieldTrace, StorageResult, WindowIntegral};
pub use source::{
    BiphotonModel, DetectionChain, DutyCycle, GatingConfig, NoiseRates, SourceStreams,
};
pub use spectral::{AbsorptionProfile, CombSpec, FreqGrid, PitSpec, Spectrum, ToothShape};
pub use timetag::{Origin, TimeTagStream};
pub use waveguide::{GaussianMode, LossBudget, WaveguideKind};
