//! Domain geometry: curvature symbols, normal-coordinate expansions,
//! quadrature of quadratic forms, Bishop–Gromov profiles and model meshes.

mod ball;
mod chart;
mod curvature;
mod mesh;
pub mod quadrature;

pub use ball::{geodesic_ball_region, BallRegion};
pub use chart::{
    bishop_gromov_profile, curvature_ball_integrals, BishopGromovSample, DensityEvaluation,
    ExactModel, MetricEvaluation, NormalChart,
};
pub use curvature::CurvatureData;
pub use mesh::{build_mesh, DomainTag, MeshDomain, MeshEdge, MeshVertex};
pub use quadrature::{
    integrate_quadratic_ball, integrate_quadratic_product_sphere, integrate_quadratic_sphere,
    QuadraticForm,
};
