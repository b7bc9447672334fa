//! Optimal training-resource allocation and model-deployment scheduling for
//! systems whose data distribution changes abruptly at random times.
//!
//! Concepts last i.i.d. random durations `Y` ([`dist`]). Within a concept the
//! model's expected loss falls along a convex curve `ḡ` of the accumulated
//! training progress ([`loss`]). [`alloc`] chooses how much training resource
//! to spend over a concept's life under a cost-rate budget, [`deploy`] picks
//! when to push the server model to clients under a deployment-rate budget,
//! and [`sim`] checks the renewal-reward formulas by Monte Carlo.
//!
//! ```
//! use driftopt::{alloc, BudgetSpec, DurationModel, LossCurve};
//!
//! let d = DurationModel::exponential(1.0)?;
//! let g = LossCurve::exp_decay(1.0, 1.0)?;
//! let budget = BudgetSpec::new(10.0, 1.0, 20.0)?;
//! let t = alloc::front_loading_switch(&d, &budget)?;
//! let policy = alloc::AllocationPolicy::front_loading(20.0, t)?;
//! let j = alloc::time_average_loss(&policy, &g, &d)?.value();
//! assert!((j - 0.0476195).abs() < 1e-6);
//! # Ok::<(), driftopt::Error>(())
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alloc;
pub mod deploy;
pub mod dist;
pub mod error;
pub mod experiments;
pub mod loss;
pub mod par;
pub mod quad;
pub mod sim;
mod textform;

pub use alloc::{AllocationPolicy, BudgetSpec, Objective};
pub use deploy::{DeploymentSchedule, RandomizedSchedule};
pub use dist::{AgingClass, AgingTag, DurationModel, Family, HazardRate};
pub use error::{Error, Result};
pub use loss::LossCurve;
pub use par::Execution;
pub use sim::{SimConfig, SimOutcome};
