//! Pipeline orchestration on top of the `catsim` core: end-to-end simulated
//! runs, squeezing-curve fits, theory tables, and loss-budget reports.

pub mod fit;
pub mod pipeline;
pub mod report;
pub mod theory;
