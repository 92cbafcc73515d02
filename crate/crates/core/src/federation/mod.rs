//! What crosses node boundaries: the versioned model format, wire frames,
//! metrics payloads and the soft-vote ensemble the server disseminates.

mod codec;
mod ensemble;
mod frame;

pub use codec::{deserialize_model, serialize_model, CodecError, FORMAT_VERSION, MODEL_MAGIC};
pub use ensemble::{deserialize_ensemble, serialize_ensemble, EnsembleModel};
pub use frame::{
    decode_frame, decode_header, encode_frame, FederatedMessage, FrameError, MessageType, MetricsPhase, MetricsReport,
    FRAME_HEADER_LEN, MAX_PAYLOAD,
};
