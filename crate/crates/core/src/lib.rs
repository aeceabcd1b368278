//! Evaluation harness for prototypical commonsense QA with chat LLMs.
//!
//! - [`dataset`]: weighted-cluster and yes/no question files, few-shot exemplars
//! - [`prompt`]: the five prompt variants as staged message bundles
//! - [`gateway`]: chat-completion backends, response cache, in-flight limits
//! - [`decoding`]: answer extraction and per-variant execution
//! - [`scorer`]: Max Answers@k, Max Incorrect@k, accuracy
//! - [`wordnet`]: noun taxonomy and Wu–Palmer similarity for soft matching

pub mod dataset;
pub mod decoding;
pub mod gateway;
pub mod prompt;
pub mod scorer;
pub mod wordnet;
