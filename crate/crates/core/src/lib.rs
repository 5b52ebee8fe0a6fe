//! Learning classifiers from imprecise labels by expectation-maximization.
//!
//! The engine treats partial labels, missing labels, noisy labels, and their
//! mixtures uniformly: an E-step turns each annotation into a soft target
//! over the latent true class, and an M-step fits the classifier to those
//! targets with a consistency loss between weak and strong views.
//!
//! * [`model`]: softmax classifiers, losses, and their gradients
//! * [`labels`]: the annotation data model, corruption protocols, file I/O
//! * [`posterior`]: closed-form E-step targets for each annotation kind
//! * [`automaton`]: the same targets by forward–backward over a label automaton
//! * [`noise`]: the learnable class-transition model
//! * [`trainer`]: batch losses, the online EM loop, and exact-EM checking
//! * [`task`]: the registry of learning settings selectable by name

pub mod automaton;
pub mod error;
pub mod gradcheck;
pub mod labels;
pub mod model;
pub mod noise;
pub mod optim;
pub mod posterior;
pub mod rng;
pub mod simplex;
pub mod task;
pub mod trainer;

pub use error::{Error, Result};
pub use simplex::ProbVector;
