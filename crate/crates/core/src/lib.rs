//! Sparse packetized predictive control over erasure channels.
//!
//! The controller sends, at every step, a length-N packet of future inputs
//! chosen as the sparsest vector satisfying a state-dependent quadratic
//! constraint. The constraint weight is synthesized from a cheap-control
//! Riccati solution so that the networked loop is asymptotically stable under
//! bounded packet dropouts; orthogonal matching pursuit finds the packet.
//!
//! Modules, bottom-up: [`numerics`] → [`plant`] → [`lifting`] →
//! [`synthesis`] → [`solvers`] → [`netsim`].

pub mod error;
pub mod lifting;
pub mod netsim;
pub mod numerics;
pub mod plant;
pub mod solvers;
pub mod synthesis;

pub use error::{Error, Result};
pub use lifting::{build_horizon, HorizonData};
pub use netsim::{
    run_montecarlo, run_trial, BufferState, ChannelModel, MonteCarloResult, PacketSolver, SimTrace, StepRecord,
    TrialSpec, TrialSummary,
};
pub use numerics::Matrix;
pub use plant::PlantModel;
pub use solvers::{exhaustive_design, l1_design, omp_design, omp_design_with, ControlPacket, OmpSelection};
pub use synthesis::{synthesize, CInterpretation, InvariantCheck, SynthesisParams, SynthesisResult};

pub use num_complex::Complex64;
