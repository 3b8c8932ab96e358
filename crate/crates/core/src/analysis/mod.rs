//! Checks on finite truncations of the two spans.

pub mod projection;
pub mod span;
pub mod uncomplemented;
pub mod vpl;

pub use projection::{
    build_projection, projection_norm_lower_bound, NormSearch, ProjectionOperator, RealProjection,
    PROJECTION_ATOM_CAP,
};
pub use span::{c_k_constant, isometry_check, span_norm, FiniteSpan, IsometryReport};
pub use uncomplemented::{uncomplemented_certificate, Divergence, UncomplementedCertificate, UpRow};
pub use vpl::{vpl_check, VplCheck};
