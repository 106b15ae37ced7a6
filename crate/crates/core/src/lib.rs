//! Gridded climate-economy simulation kernel.
//!
//! Computes the social cost of carbon (SCC) on a grid of cells under four
//! damage-function variants, splits it into non-urban, urban-exposure and
//! urban heat island contributions, and evaluates the social cost of the
//! urban heat island (SCUHI).
//!
//! The pipeline is:
//!
//! 1. [`scenario`]: gridded population and GDP, region assignment, urban mask.
//! 2. [`climate`]: pattern-scaled local warming plus UHI intensity.
//! 3. [`pulse`]: temperature response to a CO₂ pulse.
//! 4. [`damage`]: cell-level damage functions, calibration to a global
//!    damage function and persistence.
//! 5. [`scc`]: discounting, SCC, decomposition and SCUHI.
//! 6. [`runner`]: configuration, orchestration and report emission.

pub mod axis;
pub mod climate;
pub mod damage;
pub mod pulse;
pub mod region;
pub mod runner;
pub mod scc;
pub mod scenario;

pub use axis::YearAxis;
pub use region::Region;
