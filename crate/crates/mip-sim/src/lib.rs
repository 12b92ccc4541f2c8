//! Scenario harness around the balancing-robot library: configuration
//! files, closed-loop execution against either plant, CSV logging, run
//! metrics, and the contact-model comparison report.

pub mod compare;
pub mod csvlog;
pub mod metrics;
pub mod paramfile;
pub mod run;
pub mod scenario;
