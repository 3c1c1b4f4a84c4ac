pub mod actor_critic;
pub mod data;
pub mod harness;
pub mod linalg;
pub mod lsvi;
pub mod mdp;
pub mod policy;
pub mod rng;
pub mod srle;
