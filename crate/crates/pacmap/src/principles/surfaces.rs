//! Triplet loss surfaces: a loss over the pair of distances `(d_ij, d_ik)`
//! together with its partial derivatives (analytic where available, central
//! differences otherwise).

use crate::error::{Error, Result};

use super::profiles::SeparableProfile;

/// Relative step for central differences: `h = 1e-4 * coordinate`.
const FD_STEP_REL: f64 = 1e-4;

/// Degree and repulsion coefficient used by the built-in ForceAtlas2 surface.
pub const FA2_DEGREE: usize = 10;
pub const FA2_KR: f64 = 10.0;

/// Floor applied to the (possibly negative) argument of BadLoss 4's logarithm;
/// cells at or below the floor are masked.
pub const BADLOSS4_CLAMP: f64 = 1e-12;

type LossFn = Box<dyn Fn(f64, f64) -> f64 + Send + Sync>;
type PartialsFn = Box<dyn Fn(f64, f64) -> (f64, f64) + Send + Sync>;

/// A loss of two distances. Non-finite loss or partial values mark a grid
/// cell as masked during audits.
pub struct TripletLossSurface {
    name: String,
    loss: LossFn,
    partials: Option<PartialsFn>,
}

impl TripletLossSurface {
    /// Surface with derivative information supplied by central differences.
    pub fn new(
        name: impl Into<String>,
        loss: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            loss: Box::new(loss),
            partials: None,
        }
    }

    /// Surface with analytic partials.
    pub fn with_partials(
        name: impl Into<String>,
        loss: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        partials: impl Fn(f64, f64) -> (f64, f64) + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            loss: Box::new(loss),
            partials: Some(Box::new(partials)),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Loss value at `(d_ij, d_ik)`.
    pub fn loss(&self, d_ij: f64, d_ik: f64) -> f64 {
        (self.loss)(d_ij, d_ik)
    }

    /// `(dLoss/dd_ij, dLoss/dd_ik)`, analytic or by central differences with
    /// step `1e-4 * coordinate`.
    pub fn partials(&self, d_ij: f64, d_ik: f64) -> (f64, f64) {
        if let Some(p) = &self.partials {
            return p(d_ij, d_ik);
        }
        let h_ij = FD_STEP_REL * d_ij;
        let h_ik = FD_STEP_REL * d_ik;
        let g_ij = ((self.loss)(d_ij + h_ij, d_ik) - (self.loss)(d_ij - h_ij, d_ik)) / (2.0 * h_ij);
        let g_ik = ((self.loss)(d_ij, d_ik + h_ik) - (self.loss)(d_ij, d_ik - h_ik)) / (2.0 * h_ik);
        (g_ij, g_ik)
    }
}

impl std::fmt::Debug for TripletLossSurface {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TripletLossSurface").field("name", &self.name).finish()
    }
}

/// Numerically stable `ln(1 + e^u)`.
fn softplus(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

/// Numerically stable logistic function.
fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// BadLoss 4 support: `ln(1 + e^a - e^b)` factored as `m + ln(t)` with
/// `m = max(a, b, 0)`. Returns `(m, t)`; the argument is non-positive (or
/// clamped) when `t <= 1e-12 * e^-m`.
fn badloss4_parts(d_ij: f64, d_ik: f64) -> (f64, f64) {
    let a = d_ij * d_ij;
    let b = d_ik * d_ik;
    let m = a.max(b).max(0.0);
    let t = (-m).exp() + (a - m).exp() - (b - m).exp();
    (m, t)
}

fn badloss4_clamped(m: f64, t: f64) -> bool {
    t <= BADLOSS4_CLAMP * (-m).exp()
}

/// Returns a built-in [`TripletLossSurface`] by name.
///
/// Known names: `pacmap`, `badloss1` through `badloss4`, `forceatlas2`.
/// All carry analytic partials. BadLoss 4 has a domain hole where
/// `e^(d_ik^2) >= 1 + e^(d_ij^2)`: the loss is clamped there and the
/// partials are NaN so audits mask the region.
pub fn builtin_surface(name: &str) -> Result<TripletLossSurface> {
    match name {
        "pacmap" => Ok(TripletLossSurface::with_partials(
            "pacmap",
            |d_ij, d_ik| {
                let dt_ij = d_ij * d_ij + 1.0;
                let dt_ik = d_ik * d_ik + 1.0;
                dt_ij / (10.0 + dt_ij) + 1.0 / (1.0 + dt_ik)
            },
            |d_ij, d_ik| {
                let dt_ij = d_ij * d_ij + 1.0;
                let dt_ik = d_ik * d_ik + 1.0;
                (
                    20.0 * d_ij / ((10.0 + dt_ij) * (10.0 + dt_ij)),
                    -2.0 * d_ik / ((1.0 + dt_ik) * (1.0 + dt_ik)),
                )
            },
        )),
        "badloss1" => Ok(TripletLossSurface::with_partials(
            "badloss1",
            |d_ij, d_ik| softplus((d_ij * d_ij - d_ik * d_ik) / 10.0),
            |d_ij, d_ik| {
                let s = sigmoid((d_ij * d_ij - d_ik * d_ik) / 10.0);
                (0.2 * d_ij * s, -0.2 * d_ik * s)
            },
        )),
        "badloss2" => Ok(TripletLossSurface::with_partials(
            "badloss2",
            |d_ij, d_ik| (d_ij * d_ij + 1.0) / (d_ik * d_ik + 1.0),
            |d_ij, d_ik| {
                let num = d_ij * d_ij + 1.0;
                let den = d_ik * d_ik + 1.0;
                (2.0 * d_ij / den, -2.0 * d_ik * num / (den * den))
            },
        )),
        "badloss3" => Ok(TripletLossSurface::with_partials(
            "badloss3",
            |d_ij, d_ik| -(d_ik * d_ik + 1.0) / (d_ij * d_ij + 1.0),
            |d_ij, d_ik| {
                let num = d_ik * d_ik + 1.0;
                let den = d_ij * d_ij + 1.0;
                (2.0 * d_ij * num / (den * den), -2.0 * d_ik / den)
            },
        )),
        "badloss4" => Ok(TripletLossSurface::with_partials(
            "badloss4",
            |d_ij, d_ik| {
                let (m, t) = badloss4_parts(d_ij, d_ik);
                if badloss4_clamped(m, t) {
                    BADLOSS4_CLAMP.ln()
                } else {
                    m + t.ln()
                }
            },
            |d_ij, d_ik| {
                let (m, t) = badloss4_parts(d_ij, d_ik);
                if badloss4_clamped(m, t) {
                    (f64::NAN, f64::NAN)
                } else {
                    let a = d_ij * d_ij;
                    let b = d_ik * d_ik;
                    (
                        2.0 * d_ij * (a - m).exp() / t,
                        -2.0 * d_ik * (b - m).exp() / t,
                    )
                }
            },
        )),
        "forceatlas2" => {
            let coeff = FA2_KR * ((FA2_DEGREE + 1) * (FA2_DEGREE + 1)) as f64;
            Ok(TripletLossSurface::with_partials(
                "forceatlas2",
                move |d_ij, d_ik| 0.5 * d_ij * d_ij - coeff * d_ik.ln(),
                move |d_ij, d_ik| (d_ij, -coeff / d_ik),
            ))
        }
        other => Err(Error::UnknownLoss(other.to_string())),
    }
}

/// Induces a triplet surface from a separable profile: the partials are
/// `(f(d_ij), -g(d_ik))` and the loss is recovered by quadrature from the
/// reference point `d = 1` on each axis.
pub fn surface_from_profile(profile: SeparableProfile) -> TripletLossSurface {
    let profile = std::sync::Arc::new(profile);
    let p_loss = profile.clone();
    let name = format!("profile:{}", profile.name());
    TripletLossSurface::with_partials(
        name,
        move |d_ij, d_ik| {
            integrate_log(|d| p_loss.f(d), d_ij) - integrate_log(|d| p_loss.g(d), d_ik)
        },
        move |d_ij, d_ik| (profile.f(d_ij), -profile.g(d_ik)),
    )
}

/// Simpson quadrature of `func` over `[1, x]` under the substitution
/// `t = e^s`, which handles the log-scale domains the audits use.
fn integrate_log(func: impl Fn(f64) -> f64, x: f64) -> f64 {
    if x <= 0.0 {
        return f64::NAN;
    }
    let end = x.ln();
    if end == 0.0 {
        return 0.0;
    }
    let panels = 256;
    let h = end / panels as f64;
    let eval = |s: f64| {
        let t = s.exp();
        func(t) * t
    };
    let mut acc = eval(0.0) + eval(end);
    for i in 1..panels {
        let weight = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += weight * eval(i as f64 * h);
    }
    acc * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::principles::profiles::{builtin_profile, ProfileSpec};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn badloss_reference_values() {
        let b2 = builtin_surface("badloss2").unwrap();
        assert_eq!(b2.loss(0.0, 0.0), 1.0);
        let b1 = builtin_surface("badloss1").unwrap();
        assert_relative_eq!(b1.loss(3.3, 3.3), 2.0_f64.ln(), max_relative = 1e-12);
        let p = builtin_surface("pacmap").unwrap();
        assert_abs_diff_eq!(p.loss(0.0, 1e9), 1.0 / 11.0, epsilon = 1e-12);
    }

    #[test]
    fn unknown_name_is_an_error() {
        assert!(matches!(builtin_surface("goodloss"), Err(Error::UnknownLoss(_))));
    }

    #[test]
    fn badloss1_is_stable_at_extreme_distances() {
        let b1 = builtin_surface("badloss1").unwrap();
        // Naive evaluation overflows here; softplus keeps it finite.
        let l = b1.loss(100.0, 0.01);
        assert!((l - 999.99999).abs() < 1e-3, "loss {l}");
        let (gij, gik) = b1.partials(100.0, 0.01);
        assert_relative_eq!(gij, 20.0, max_relative = 1e-9);
        assert_abs_diff_eq!(gik, -0.002, epsilon = 1e-9);
        // Deep in the opposite tail both partials vanish outright.
        let (gij, gik) = b1.partials(0.01, 100.0);
        assert_eq!((gij, gik), (0.0, 0.0));
    }

    #[test]
    fn badloss4_domain_hole_is_masked() {
        let b4 = builtin_surface("badloss4").unwrap();
        // e^(d_ik^2) > 1 + e^(d_ij^2): clamped loss, NaN partials.
        assert_eq!(b4.loss(0.01, 2.0), BADLOSS4_CLAMP.ln());
        let (gij, gik) = b4.partials(0.01, 2.0);
        assert!(gij.is_nan() && gik.is_nan());
        // Valid region stays finite far beyond the naive overflow point.
        let l = b4.loss(50.0, 10.0);
        assert_relative_eq!(l, 2500.0, max_relative = 1e-9);
        let (gij, gik) = b4.partials(50.0, 10.0);
        assert_relative_eq!(gij, 100.0, max_relative = 1e-9);
        assert!(gik.abs() < 1e-12);
    }

    #[test]
    fn analytic_partials_match_central_differences() {
        // Checked away from masked cells. The oracle uses a smaller step
        // than the grid fallback to keep its truncation error below the
        // 1e-6 target, and allows for its own roundoff floor (cancellation
        // of the loss magnitude across the +/- h evaluations).
        let h_rel = 1e-5;
        let names = ["pacmap", "badloss1", "badloss2", "badloss3", "forceatlas2"];
        let points = [0.05, 0.3, 1.0, 4.0, 20.0, 90.0];
        for name in names {
            let s = builtin_surface(name).unwrap();
            for &d_ij in &points {
                for &d_ik in &points {
                    let (aij, aik) = s.partials(d_ij, d_ik);
                    let loss_scale = s.loss(d_ij, d_ik).abs();
                    let mut check = |analytic: f64, fd: f64, h: f64, axis: &str| {
                        let roundoff = 8.0 * f64::EPSILON * loss_scale / (2.0 * h);
                        let allowed = 1e-6 * analytic.abs().max(fd.abs()).max(1e-9) + roundoff;
                        assert!(
                            (analytic - fd).abs() <= allowed,
                            "{name} d/{axis} at ({d_ij},{d_ik}): {analytic} vs {fd}"
                        );
                    };
                    let h_ij = h_rel * d_ij;
                    let h_ik = h_rel * d_ik;
                    let fij = (s.loss(d_ij + h_ij, d_ik) - s.loss(d_ij - h_ij, d_ik)) / (2.0 * h_ij);
                    let fik = (s.loss(d_ij, d_ik + h_ik) - s.loss(d_ij, d_ik - h_ik)) / (2.0 * h_ik);
                    check(aij, fij, h_ij, "d_ij");
                    check(aik, fik, h_ik, "d_ik");
                }
            }
        }
    }

    #[test]
    fn induced_surface_partials_are_the_profile() {
        let s = surface_from_profile(builtin_profile(&ProfileSpec::Pacmap).unwrap());
        let reference = builtin_surface("pacmap").unwrap();
        for d in [0.1, 1.0, 10.0] {
            let (gij, gik) = s.partials(d, d);
            let (rij, rik) = reference.partials(d, d);
            assert_relative_eq!(gij, rij, max_relative = 1e-12);
            assert_relative_eq!(gik, rik, max_relative = 1e-12);
        }
    }

    #[test]
    fn induced_surface_loss_integrates_the_profile() {
        // The quadrature loss differs from the closed form only by a
        // constant, so loss differences must agree.
        let s = surface_from_profile(builtin_profile(&ProfileSpec::Pacmap).unwrap());
        let closed = builtin_surface("pacmap").unwrap();
        let quad = s.loss(2.0, 1.0) - s.loss(0.5, 1.0);
        let exact = closed.loss(2.0, 1.0) - closed.loss(0.5, 1.0);
        assert_relative_eq!(quad, exact, max_relative = 1e-8);
    }
}
