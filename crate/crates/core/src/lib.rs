pub mod agents;
pub mod exam;
pub mod harness;
pub mod memory;
pub mod mmdp;
pub mod retrieval;
