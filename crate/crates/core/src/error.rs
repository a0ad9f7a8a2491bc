use crate::C64;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("graph is not regular: vertex {vertex} has out-degree {out_degree} and in-degree {in_degree}, expected {expected}")]
    NotRegular {
        vertex: usize,
        out_degree: usize,
        in_degree: usize,
        expected: usize,
    },

    #[error(
        "self loops must be present on every vertex or on none; vertex {vertex} breaks the pattern"
    )]
    MixedSelfLoops { vertex: usize },

    #[error("invalid entry model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("z = {z} lies inside the elliptic region, where the exterior formula does not apply")]
    InsideRegion { z: C64 },

    #[error("X - zI is numerically singular at z = {z} (sigma_min = {sigma_min:e})")]
    NearSingular { z: C64, sigma_min: f64 },

    #[error("Dyson solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error(
        "eigendecomposition failed for a {n}x{n} matrix (Frobenius norm {frobenius:e}): {reason}"
    )]
    Eigen {
        n: usize,
        frobenius: f64,
        reason: String,
    },

    #[error("perturbation has numerical rank {rank}, above the cap {cap}")]
    RankTooLarge { rank: usize, cap: usize },

    #[error("perturbation factor norm {norm} exceeds the configured bound {bound}")]
    NormTooLarge { norm: f64, bound: f64 },

    #[error("perturbation eigenvalue {lambda} predicts {predicted}, inside the excluded belt between E(rho, eps) and E(rho, 3 eps)")]
    ForbiddenAnnulus { lambda: C64, predicted: C64 },

    #[error("contour around {center} (radius {radius}) passes too close to a root")]
    ContourHitsRoot { center: C64, radius: f64 },

    #[error("bisection could not bracket the spectral gap: {0}")]
    Bracket(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
