//! Packet-level simulator of a programmable network with a slice-provisioning
//! control plane that can push compute (transcoding) into switches, plus the
//! scenario harness comparing in-network against edge placements for a
//! holographic streaming workload.

pub mod catalog;
pub mod dataplane;
pub mod monitor;
pub mod net;
pub mod scenario;
pub mod sim;
pub mod slice;
pub mod time;
