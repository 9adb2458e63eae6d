//! Exact dimension and codimension bookkeeping for the jet-space
//! singularity classes behind the generic-position assumptions: which
//! degeneracies a two-parameter family can exhibit is decided by comparing
//! these codimensions against the dimension of the relevant multijet
//! extension's domain.

use serde::{Deserialize, Serialize};

/// Dimension of the (s, theta, x) domain of a family member's iterate.
pub const DOMAIN_DIM: u64 = 3;

/// Singularity classes of fixed points of the iterate, as conditions on
/// (multi-)jet coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum SingularityClass {
    /// Fixed point with multiplier 1.
    Parabolic,
    /// Two parabolic fixed points at the same parameter.
    TwoParabolic,
    /// Three parabolic fixed points at the same parameter.
    ThreeParabolic,
    /// Parabolic with vanishing second derivative.
    DegenerateParabolic,
    /// Degenerate parabolic whose third derivative also vanishes.
    CubicDegenerate,
    /// Degenerate parabolic failing the parameter-transversality
    /// condition (stratified; this is the top-stratum codimension).
    ParameterDegenerate,
    /// A degenerate parabolic coexisting with another parabolic point.
    DegenerateWithParabolic,
    /// Two coexisting parabolic points whose fold branches project
    /// tangentially (stratified; top-stratum codimension).
    TangentialPair,
    /// Parabolic point where the fold tangent is horizontal (the
    /// theta-derivative vanishes).
    HorizontalTangent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DimensionTable {
    /// (k, dim J^k) for k = 1, 2, 3.
    pub jet_space_dims: Vec<(u32, u64)>,
    /// Codimension of each singularity class in its (multi-)jet space.
    pub codimensions: Vec<(SingularityClass, u32)>,
}

fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k.min(n));
    let mut out: u64 = 1;
    for m in 0..k {
        out = out * (n - m) / (m + 1);
    }
    out
}

/// `dim J^k = dim(domain) + C(dim(domain) + k, k)` for scalar-valued maps
/// of a 3-dimensional domain.
pub fn jet_space_dim(k: u32) -> u64 {
    DOMAIN_DIM + binomial(DOMAIN_DIM + k as u64, k as u64)
}

/// Multijet spaces are m-fold products of the jet space.
pub fn multijet_space_dim(m: u32, k: u32) -> u64 {
    m as u64 * jet_space_dim(k)
}

/// Codimension of the locus where the first l+1 phase derivatives of the
/// displacement vanish at a fixed point; its excess over l+1 is why
/// l-parameter families generically have isolated periodic points.
pub fn isolated_locus_codim(l: u32) -> u32 {
    l + 2
}

/// The exact integer table: jet-space dimensions for k = 1, 2, 3 and the
/// codimension of every tracked singularity class.
pub fn jet_dimension_table() -> DimensionTable {
    DimensionTable {
        jet_space_dims: (1..=3).map(|k| (k, jet_space_dim(k))).collect(),
        codimensions: vec![
            (SingularityClass::Parabolic, 2),
            (SingularityClass::TwoParabolic, 6),
            (SingularityClass::ThreeParabolic, 10),
            (SingularityClass::DegenerateParabolic, 3),
            (SingularityClass::CubicDegenerate, 4),
            (SingularityClass::ParameterDegenerate, 4),
            (SingularityClass::DegenerateWithParabolic, 7),
            (SingularityClass::TangentialPair, 7),
            (SingularityClass::HorizontalTangent, 3),
        ],
    }
}
