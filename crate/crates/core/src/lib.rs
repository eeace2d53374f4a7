//! Subset-restricted adversarial robustness for evaluating and extracting
//! feature-based explanations of classifiers.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: a small fully-connected ReLU classifier with analytic input
//!   gradients, SGD training and a JSON file format.
//! - [`attack`]: PGD restricted to a feature subset, the binary search for the
//!   minimal perturbation norm and an exact oracle for linear models.
//! - [`explain`]: attribution baselines (Grad, IG, EG, LOO, Random) and the
//!   set explainers Greedy and Greedy-AS.
//! - [`criteria`]: robustness curves, Insertion/Deletion, AUC, sensitivity and
//!   the parameter-randomization sanity check.
//! - [`harness`]: the pieces behind the `robex` command line tool.

// `!(a <= b)` is used on purpose so NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attack;
pub mod criteria;
pub mod data;
mod error;
pub mod explain;
pub mod harness;
mod linalg;
pub mod model;

pub use attack::{AttackConfig, AttackGoal, AttackResult, FeatureSet};
pub use criteria::{Criterion, EvalCurve};
pub use data::Example;
pub use error::{Error, Result};
pub use explain::Attribution;
pub use model::{Activation, Layer, Model, ScalarHead};
