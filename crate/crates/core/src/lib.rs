//! Simulation core of the QGP testbed.
//!
//! * [`qkd`]: BB84 key channel with an intercept-resend eavesdropper.
//! * [`keyservice`]: the key-delivery control plane and its TCP wire protocol.
//! * [`codec`]: the signed, compressed, doubly encrypted message envelope.
//! * [`netsim`]: deterministic two-endpoint scenarios with adversaries.
//! * [`shor`]: statevector order finding and the factoring reduction.

#![forbid(unsafe_code)]

pub mod bits;
pub mod qkd;
pub mod keyservice;
pub mod codec;
pub mod netsim;
pub mod shor;
