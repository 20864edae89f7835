//! Automated OpenFOAM case configuration. Cases are generated by an LLM
//! with tutorial cases as references, then run and corrected in a loop
//! until the solver completes ten steps.
//!
//! Every LLM call goes through [`llm::Gateway`] and every external tool
//! through [`runner::Executor`], so the whole pipeline runs offline with
//! [`llm::MockProvider`] and [`runner::SimulatedExecutor`].

pub mod foam;
pub mod kb;
pub mod builder;
pub mod retrieval;
pub mod llm;
pub mod runner;
pub mod session;
pub mod config;
