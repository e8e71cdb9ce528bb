//! Two-stage robust secure beamforming for an aerial RIS: Stage 1 chooses the
//! hover position from a candidate grid, Stage 2 designs the BS precoder and RIS
//! phases slot by slot against CSI uncertainty and hardware impairments.

pub mod benchmarks;
pub mod channel;
pub mod config;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod impairments;
pub mod linalg;
pub mod metrics;
pub mod simulation;
pub mod stage1;
pub mod stage2;

pub use benchmarks::SchemeId;
pub use channel::{CascadeSet, ChannelParams, ChannelSet, Receiver, Snapshot};
pub use config::SystemConfig;
pub use error::{ConfigError, Error, Result};
pub use geometry::Position3;
pub use impairments::{ReflectionState, RisCodebook};
pub use linalg::{CMat, C64};
pub use metrics::{Precoder, SinrModel, SummaryStats};
pub use simulation::{Scenario, Simulator};
pub use stage2::{solve_slot, AoSettings, SlotOutcome, UncertaintySample};
