//! Asymptotic solution of the 2D wave equation with variable velocity and a
//! localized, decaying source: ray fronts, wave profiles, transient and
//! propagating fields, plus a finite-difference reference solver.

pub mod chart;
pub mod field;
pub mod oracle;
pub mod quad;
pub mod rays;
pub mod sources;
pub mod special;
pub mod velocity;

pub type C64 = num_complex::Complex<f64>;

pub use chart::{default_band, locate_branches, Branch, ChartError, ChartPoint};
pub use field::{
    equivalent_source_grid, equivalent_sources, propagating_field, total_field, transient_field, transient_fields, Component, FieldError, FieldGrid, GridSpec,
    ProfileFn, ProfileMode, PropagatingOptions, TransientMode, TransientOptions,
};
pub use oracle::{energy, solve_fd, EnergySample, FdConfig, FdError, FdRun, FdSource};
pub use rays::{build_front, FrontOptions, FrontSample, FrontSet, RayError};
pub use sources::{ScaleParams, SourceError, SpatialSource, TemporalKind, TemporalSource};
pub use special::SpecialError;
pub use velocity::{Bump, VelocityError, VelocityField, VelocityTable};
