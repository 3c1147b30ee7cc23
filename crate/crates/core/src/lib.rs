//! Change-point detection in the latent causal network of a multivariate
//! Hawkes process.
//!
//! The pipeline slices a long event recording into (possibly overlapping)
//! windows, estimates the kernel-integral matrix `H` of each window by
//! matching integrated cumulants, turns the symmetric part of `H` into a
//! signed Laplacian, projects it onto the SPD cone and compares windows with
//! the Log-Euclidean metric. Distributional changes in the resulting
//! sequence are located with Fréchet-variance scan statistics calibrated by
//! the supremum of a squared standardized Brownian bridge.
//!
//! ```no_run
//! use hawkes_cpd::prelude::*;
//!
//! let scenario = reference_scenario(10, 3, 60_000.0, 0.3, 7).unwrap();
//! let (events, _truth) = simulate_scenario(&scenario).unwrap();
//! let config = PipelineConfig::default();
//! let output = run_pipeline(&config, &events).unwrap();
//! println!("{:?}", output.report.change_indices);
//! ```

pub mod changepoint;
pub mod cumulants;
mod error;
pub mod events;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod nphc;
pub mod pipeline;
pub mod report;
pub mod sim;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::changepoint::{
        bb_sup_quantile, detect_multiple, detect_single, CpConfig, CpReport, Detector,
    };
    pub use crate::cumulants::{estimate_cumulants, select_w, CumulantSet};
    pub use crate::events::{
        prices_to_events, slice_windows, EventStream, PriceSeries, WindowSpec,
    };
    pub use crate::geometry::{causal_snapshot, CausalSnapshot, SpdPoint};
    pub use crate::nphc::{fit_r, KernelMatrix, NphcConfig};
    pub use crate::pipeline::{run_pipeline, PipelineConfig, PipelineOutput, WMode};
    pub use crate::sim::{
        reference_params, reference_scenario, simulate, simulate_scenario, HawkesParams, Scenario,
    };
    pub use crate::{Error, Result};
}
