//! Separable attractive/repulsive force profiles.
//!
//! A profile is a pair of derivative functions on `(0, inf)`: `f(d_ij)` is
//! the derivative of the attractive loss, `g(d_ik)` the negated derivative of
//! the repulsive loss. Profiles that are non-negative, unimodal and vanish at
//! both ends of the domain induce triplet surfaces satisfying all six
//! principles.

use crate::error::{Error, Result};

type Deriv = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// A separable force profile: attractive derivative `f` and repulsive
/// derivative `g`, both defined on `(0, inf)`.
pub struct SeparableProfile {
    name: String,
    f: Deriv,
    g: Deriv,
}

impl SeparableProfile {
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        g: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            f: Box::new(f),
            g: Box::new(g),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Attractive derivative at distance `d`.
    pub fn f(&self, d: f64) -> f64 {
        (self.f)(d)
    }

    /// Repulsive derivative (negated, so non-negative for valid profiles).
    pub fn g(&self, d: f64) -> f64 {
        (self.g)(d)
    }
}

impl std::fmt::Debug for SeparableProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SeparableProfile").field("name", &self.name).finish()
    }
}

/// Built-in profile selector with parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ProfileSpec {
    /// The neighbor/further force pair of the pairwise loss used here.
    Pacmap,
    /// UMAP's forces with curve parameters `a`, `b` and repulsion stabilizer
    /// `eps` (constant factors dropped; the audits are scale-invariant).
    Umap { a: f64, b: f64, eps: f64 },
    /// The pairwise decomposition of t-SNE's force on a single pair, with
    /// attraction weight `p` and background similarity sum `b_sum`.
    TsnePair { p: f64, b_sum: f64 },
    /// ForceAtlas2 on a symmetric kNN graph of the given degree, repulsion
    /// coefficient `k_r`.
    ForceAtlas2 { degree: usize, k_r: f64 },
}

/// Constructs a built-in [`SeparableProfile`].
pub fn builtin_profile(spec: &ProfileSpec) -> Result<SeparableProfile> {
    match *spec {
        ProfileSpec::Pacmap => Ok(SeparableProfile::new(
            "pacmap",
            |d| 20.0 * d / ((11.0 + d * d) * (11.0 + d * d)),
            |d| 2.0 * d / ((2.0 + d * d) * (2.0 + d * d)),
        )),
        ProfileSpec::Umap { a, b, eps } => {
            if !(a > 0.0 && b > 0.0 && eps > 0.0) {
                return Err(Error::InvalidProfileParam(format!(
                    "umap needs a > 0, b > 0, eps > 0, got a={a}, b={b}, eps={eps}"
                )));
            }
            Ok(SeparableProfile::new(
                format!("umap(a={a},b={b},eps={eps})"),
                move |d| d.powf(2.0 * b - 1.0) / (1.0 + a * d.powf(2.0 * b)),
                move |d| d / ((eps + d * d) * (1.0 + a * d.powf(2.0 * b))),
            ))
        }
        ProfileSpec::TsnePair { p, b_sum } => {
            if !(p > 0.0 && b_sum > 0.0) {
                return Err(Error::InvalidProfileParam(format!(
                    "tsne_pair needs p > 0 and B > 0, got p={p}, B={b_sum}"
                )));
            }
            Ok(SeparableProfile::new(
                format!("tsne_pair(p={p},B={b_sum})"),
                move |d| 4.0 * p * d / (1.0 + d * d),
                move |d| {
                    let a = 1.0 / (1.0 + d * d);
                    4.0 * (a / (b_sum + a)) * d * a
                },
            ))
        }
        ProfileSpec::ForceAtlas2 { degree, k_r } => {
            if !(k_r > 0.0) {
                return Err(Error::InvalidProfileParam(format!("k_r must be > 0, got {k_r}")));
            }
            let coeff = k_r * ((degree + 1) * (degree + 1)) as f64;
            Ok(SeparableProfile::new(
                format!("forceatlas2(k={degree},k_r={k_r})"),
                |d| d,
                move |d| coeff / d,
            ))
        }
    }
}
