//! Symmetry structure of finite Kripke frames and exchangeable probability
//! measures on their valuation spaces.
//!
//! The pipeline: parse a frame ([`frame`]), compute its automorphisms and the
//! stabilizer of the designated world ([`group`]), partition the accessible
//! cluster into orbits, then either build exact measures on the full valuation
//! space ([`measure`]) or sample from hierarchical per-orbit specifications
//! ([`sampler`]) and check the observable consequences statistically
//! ([`verify`]).
//!
//! All randomized paths are seeded and schedule-independent: the same inputs
//! produce byte-identical outputs whether or not the `parallel` feature is
//! enabled.

pub mod frame;
pub mod group;
pub mod measure;
pub mod perm;
pub mod sampler;
pub mod stats;
pub mod verify;

mod fingerprint;

pub use fingerprint::fingerprint_bytes;

/// Worker-count cap for the data-parallel paths. No-op without the
/// `parallel` feature or if a global pool was already installed.
#[cfg(feature = "parallel")]
pub fn init_threads(n: usize) {
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
}

#[cfg(not(feature = "parallel"))]
pub fn init_threads(_n: usize) {}
