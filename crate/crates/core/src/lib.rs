//! Network-coded peer-to-peer live streaming under pollution attack.
//!
//! * [`codec`]: GF(2) blocks, encoding vectors and coded packets.
//! * [`decoder`]: on-the-fly Gaussian elimination with pollution detection.
//! * [`recombiner`]: uniform and age-weighted recombination strategies.
//! * [`model`]: closed-form pollution propagation model.
//! * [`sim`]: deterministic discrete-event overlay simulator.
//! * [`metrics`]: continuity index, pollution probability and overheads.

pub mod codec;
pub mod decoder;
pub mod metrics;
pub mod model;
pub mod recombiner;
pub mod sim;

pub use codec::{
    combine, encode_source, forge_packet, Block, CodecError, CodedPacket, EncodingVector,
    Generation, OriginKind,
};
pub use decoder::{DecodeError, DecoderState, InsertOutcome};
pub use metrics::{export_csv, MetricsReport};
pub use model::{ModelError, ModelParams};
pub use recombiner::{
    draw_coefficients, make_transmission, selection_weight, InputBuffer, Orientation,
    RecombineError, StrategyConfig, StrategyKind,
};
pub use sim::{run, Detector, ScenarioConfig, SimError};
