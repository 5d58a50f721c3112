//! Capacity tools for channels with feedback whose transition law depends on
//! the previous output (POST channels), and for their memoryless references.
//!
//! * [`channel`]: channel models, proximity, the two parametric example families.
//! * [`memoryless`]: capacity iteration, surjectivity, indecomposability and
//!   connectivity checks for a fixed `W`.
//! * [`feedback`]: the feedback-capacity convex program.
//! * [`simulation`]: block-simulation plans and their verification.
//! * [`realizability`]: least-squares and LP feasibility of Markov output laws.
//! * [`cli`]: the `postcap` command line.

pub mod channel;
pub mod cli;
pub mod error;
pub mod feedback;
pub mod info;
pub mod linalg;
pub mod lp;
pub mod markov;
pub mod memoryless;
pub mod realizability;
pub mod simulation;
pub mod spec_file;

pub use channel::{build_example, MemorylessChannel, PostChannel};
pub use error::{Error, Result};
pub use feedback::{solve_fcap, FeedbackResult, JointInputState};
pub use memoryless::{capacity_iteration, CapacityProfile};
