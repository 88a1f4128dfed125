//! Box counting, the cylinder covering bound, transversality probes,
//! energy integrals and the Lebesgue-positivity probe.

pub mod boxcount;
pub mod cloud;
pub mod cover;
pub mod energy;
pub mod positivity;
pub mod transversality;

pub use boxcount::{box_count, dyadic_radii, estimate_box_dimension, BoxDimensionEstimate, CoverMethod, CoverReport};
pub use cloud::{sample_cloud, PointCloud};
pub use cover::{cylinder_cover_bound, cylinder_cover_exceeds, CylinderCover};
pub use energy::{energy_estimate, energy_profile, EnergyEstimate};
pub use positivity::{lebesgue_positivity_probe, PositivityReport};
pub use transversality::{transversality_probe, transversality_suite, TransversalityConfig, TransversalityReport};
