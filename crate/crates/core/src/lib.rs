//! A laboratory for smart-card remote user authentication schemes based on
//! discrete logarithms: Hwang-Li, Shen-Lin-Hwang, Awasthi-Lal, and an
//! improved variant that keys the card with `SID ‖ ID`, together with the
//! published forgery and masquerade attacks against them and a
//! deterministic simulator that records replayable transcripts.

pub mod attacks;
pub mod error;
pub mod modmath;
pub mod protocol;
pub mod rng;
pub mod schemes;
pub mod simulator;

pub use error::{AttackError, ModMathError, ProtocolError, SchemeError, SimError};
pub use modmath::Prime;
pub use num_bigint::BigUint;
pub use protocol::{ClaimedId, IdPolicy, Identity, LoginRequest, SchemeTag, ServerSecret, SystemParams, Timestamp};
pub use schemes::{CardInput, Credential, Server, SmartCard, VerifyResult};
