//! Gate-level hardware obfuscation toolkit.
//!
//! * [`netlist`]: IR, CAMO-v1 text format, validation, traversal.
//! * [`device`]: CMP, crosstalk and line-delay models mapped to effect classes.
//! * [`obfuscate`]: transforms producing (apparent netlist, secret) pairs and
//!   the realization that combines them.
//! * [`simulate`]: bit-parallel evaluation, truth tables, equivalence, oracles.
//! * [`attack`]: CDCL SAT engine, keyed circuit encoding and the oracle-guided
//!   deobfuscation loop.
//! * [`gen`]: seeded random benchmark circuits.
//! * [`exec`]: rayon-backed data parallelism with a sequential fallback.

pub mod attack;
pub mod device;
pub mod exec;
pub mod gen;
pub mod netlist;
pub mod obfuscate;
pub mod simulate;

pub use netlist::{parse_netlist, serialize_netlist, Gate, GateKind, Netlist};
pub use obfuscate::{realize, Obfuscated, Secret};
