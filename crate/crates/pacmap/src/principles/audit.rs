//! Numeric audits: the six gradient-field principles over a rainbow grid,
//! and the separable-profile sufficient conditions.
//!
//! The principles are asymptotic statements; this auditor discharges their
//! quantifiers over a finite log-spaced grid. "Large" means the top decade of
//! an axis, "small" the bottom decade, and dominance ratios use a fixed
//! tolerance (default 0.05). The auditor is a falsifier at grid scale: a
//! surface whose thresholds lie beyond the grid can be misclassified, which
//! is why every verdict carries witnesses.

use super::surfaces::TripletLossSurface;
use super::{rainbow_grid, GridSpec, RainbowGrid, SeparableProfile};
use crate::error::{Error, Result};

/// Bound on stored witnesses per principle; further violations are counted
/// but not stored.
const MAX_WITNESSES: usize = 8;

/// Tolerances for the quantifier discharge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditTolerances {
    /// Dominance threshold for gradient-ratio checks (principles 2-4) and
    /// edge-decay checks (principle 6).
    pub ratio_tol: f64,
    /// Factor defining the "large" (top) and "small" (bottom) decades.
    pub decade: f64,
    /// Relative slack for sign and monotonicity comparisons.
    pub rel_slack: f64,
}

impl Default for AuditTolerances {
    fn default() -> Self {
        Self {
            ratio_tol: 0.05,
            decade: 10.0,
            rel_slack: 1e-9,
        }
    }
}

/// Outcome of one check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    /// Masked cells covered the region the check needed.
    Indeterminate,
}

/// A grid point at which a check failed (or was masked), with the measured
/// quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub d_ij: f64,
    pub d_ik: f64,
    pub detail: String,
}

/// Verdict and evidence for one principle.
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipleCheck {
    pub verdict: Verdict,
    pub witnesses: Vec<Witness>,
    /// Total violations found (may exceed the stored witnesses).
    pub violations: usize,
}

/// Per-principle verdicts for one surface.
#[derive(Debug, Clone)]
pub struct PrincipleReport {
    pub surface: String,
    /// Checks for principles 1 through 6, in order.
    pub checks: [PrincipleCheck; 6],
    pub masked_cells: usize,
    pub tolerances: AuditTolerances,
}

impl PrincipleReport {
    /// Verdict for principle `p` (1-based).
    pub fn verdict(&self, p: usize) -> Verdict {
        self.checks[p - 1].verdict
    }

    pub fn passes(&self, p: usize) -> bool {
        self.verdict(p) == Verdict::Pass
    }

    pub fn fails(&self, p: usize) -> bool {
        self.verdict(p) == Verdict::Fail
    }

    pub fn all_pass(&self) -> bool {
        (1..=6).all(|p| self.passes(p))
    }
}

struct CheckBuilder {
    witnesses: Vec<Witness>,
    violations: usize,
    masked_hits: usize,
    first_masked: Option<Witness>,
}

impl CheckBuilder {
    fn new() -> Self {
        Self {
            witnesses: Vec::new(),
            violations: 0,
            masked_hits: 0,
            first_masked: None,
        }
    }

    fn violation(&mut self, d_ij: f64, d_ik: f64, detail: String) {
        self.violations += 1;
        if self.witnesses.len() < MAX_WITNESSES {
            self.witnesses.push(Witness { d_ij, d_ik, detail });
        }
    }

    fn masked(&mut self, d_ij: f64, d_ik: f64) {
        self.masked_hits += 1;
        if self.first_masked.is_none() {
            self.first_masked = Some(Witness {
                d_ij,
                d_ik,
                detail: "required cell is masked".into(),
            });
        }
    }

    fn finish(mut self) -> PrincipleCheck {
        let verdict = if self.violations > 0 {
            Verdict::Fail
        } else if self.masked_hits > 0 {
            if let Some(w) = self.first_masked.take() {
                self.witnesses.push(w);
            }
            Verdict::Indeterminate
        } else {
            Verdict::Pass
        };
        PrincipleCheck {
            verdict,
            witnesses: self.witnesses,
            violations: self.violations,
        }
    }

    /// Variant for checks where coverage gaps only matter if nothing was
    /// verifiable at all.
    fn finish_requiring_coverage(mut self, covered: bool) -> PrincipleCheck {
        if self.violations == 0 && !covered {
            self.masked_hits += 1;
        } else if covered {
            self.masked_hits = 0;
        }
        self.finish()
    }
}

/// Strict rise beyond relative slack.
fn rises(a: f64, b: f64, rel: f64) -> bool {
    b > a + rel * a.abs().max(b.abs())
}

/// Index of the first peak-unimodality violation (a rise after a fall), if
/// any. `values` must be finite.
fn peak_unimodality_violation(values: &[f64], rel: f64) -> Option<usize> {
    let mut seen_fall = false;
    for i in 1..values.len() {
        if rises(values[i - 1], values[i], rel) {
            if seen_fall {
                return Some(i);
            }
        } else if rises(values[i], values[i - 1], rel) {
            seen_fall = true;
        }
    }
    None
}

/// Runs the six principle checks over a rainbow grid of the surface.
///
/// The grid must cover at least `[1e-2, 1e2]` on both axes.
pub fn check_principles(
    surface: &TripletLossSurface,
    spec: &GridSpec,
    tol: &AuditTolerances,
) -> Result<PrincipleReport> {
    if spec.d_min > 1e-2 * (1.0 + 1e-9) || spec.d_max < 1e2 * (1.0 - 1e-9) {
        return Err(Error::InvalidConfig(format!(
            "principle audit needs a grid covering [1e-2, 1e2], got [{}, {}]",
            spec.d_min, spec.d_max
        )));
    }
    let grid = rainbow_grid(surface, spec)?;
    let large_from = spec.d_max / tol.decade;
    let small_to = spec.d_min * tol.decade;

    let max_mag = grid
        .magnitude
        .iter()
        .filter(|m| m.is_finite())
        .fold(0.0_f64, |a, &b| a.max(b));

    let checks = [
        check_p1(&grid, tol, max_mag),
        check_p2(&grid, tol, large_from),
        check_p3(&grid, tol, small_to),
        check_p4(&grid, tol, large_from, max_mag),
        check_p5(&grid, tol, large_from),
        check_p6(&grid, tol, large_from),
    ];

    Ok(PrincipleReport {
        surface: surface.name().to_string(),
        checks,
        masked_cells: grid.masked_cells,
        tolerances: *tol,
    })
}

/// P1 monotonicity: the loss never decreases along `d_ij` nor increases along
/// `d_ik`, checked through the gradient signs at every unmasked cell.
fn check_p1(grid: &RainbowGrid, tol: &AuditTolerances, max_mag: f64) -> PrincipleCheck {
    let mut b = CheckBuilder::new();
    let slack = tol.rel_slack * max_mag;
    let mut any = false;
    for r in 0..grid.rows() {
        for c in 0..grid.cols() {
            if grid.mask[[r, c]] {
                continue;
            }
            any = true;
            let (gij, gik) = (grid.grad_ij[[r, c]], grid.grad_ik[[r, c]]);
            if gij < -slack {
                b.violation(grid.d_ij[c], grid.d_ik[r], format!("dL/dd_ij = {gij} < 0"));
            }
            if gik > slack {
                b.violation(grid.d_ij[c], grid.d_ik[r], format!("dL/dd_ik = {gik} > 0"));
            }
        }
    }
    b.finish_requiring_coverage(any)
}

/// P2: at the largest grid `d_ik`, the repulsive component must be dominated,
/// `|dL/dd_ik| < ratio_tol * |dL/dd_ij|`, for every `d_ij` below the top
/// decade (where the attractive force itself has decayed and principle 3
/// takes over).
fn check_p2(grid: &RainbowGrid, tol: &AuditTolerances, large_from: f64) -> PrincipleCheck {
    let mut b = CheckBuilder::new();
    let r = grid.rows() - 1;
    for c in 0..grid.cols() {
        if grid.d_ij[c] >= large_from {
            break;
        }
        if grid.mask[[r, c]] {
            b.masked(grid.d_ij[c], grid.d_ik[r]);
            continue;
        }
        let (gij, gik) = (grid.grad_ij[[r, c]], grid.grad_ik[[r, c]]);
        if !(gik.abs() < tol.ratio_tol * gij.abs()) {
            b.violation(
                grid.d_ij[c],
                grid.d_ik[r],
                format!("|dL/dd_ik|/|dL/dd_ij| = {}/{} not < {}", gik.abs(), gij.abs(), tol.ratio_tol),
            );
        }
    }
    b.finish()
}

/// P3: at the largest grid `d_ij`, the gradient must point mainly up in the
/// bottom area: `|dL/dd_ij| < ratio_tol * |dL/dd_ik|` for every `d_ik` in the
/// bottom decade.
fn check_p3(grid: &RainbowGrid, tol: &AuditTolerances, small_to: f64) -> PrincipleCheck {
    let mut b = CheckBuilder::new();
    let c = grid.cols() - 1;
    for r in 0..grid.rows() {
        if grid.d_ik[r] > small_to {
            break;
        }
        if grid.mask[[r, c]] {
            b.masked(grid.d_ij[c], grid.d_ik[r]);
            continue;
        }
        let (gij, gik) = (grid.grad_ij[[r, c]], grid.grad_ik[[r, c]]);
        if !(gij.abs() < tol.ratio_tol * gik.abs()) {
            b.violation(
                grid.d_ij[c],
                grid.d_ik[r],
                format!("|dL/dd_ij|/|dL/dd_ik| = {}/{} not < {}", gij.abs(), gik.abs(), tol.ratio_tol),
            );
        }
    }
    b.finish()
}

/// P4: at the smallest grid `d_ij` with `d_ik` in the top decade, both
/// partial magnitudes must be small relative to the grid's maximum gradient
/// magnitude.
fn check_p4(
    grid: &RainbowGrid,
    tol: &AuditTolerances,
    large_from: f64,
    max_mag: f64,
) -> PrincipleCheck {
    let mut b = CheckBuilder::new();
    let c = 0;
    let bound = tol.ratio_tol * max_mag;
    for r in 0..grid.rows() {
        if grid.d_ik[r] < large_from {
            continue;
        }
        if grid.mask[[r, c]] {
            b.masked(grid.d_ij[c], grid.d_ik[r]);
            continue;
        }
        let (gij, gik) = (grid.grad_ij[[r, c]], grid.grad_ik[[r, c]]);
        if gij.abs() > bound || gik.abs() > bound {
            b.violation(
                grid.d_ij[c],
                grid.d_ik[r],
                format!("partials ({gij}, {gik}) exceed {bound} at the small-d_ij edge"),
            );
        }
    }
    b.finish()
}

/// P5: for every fixed `d_ij` the gradient magnitude must become
/// non-increasing in `d_ik` from some threshold below the top decade onward.
/// Comparisons only cross adjacent unmasked cells; a column whose top decade
/// is masked cannot be certified.
fn check_p5(grid: &RainbowGrid, tol: &AuditTolerances, large_from: f64) -> PrincipleCheck {
    let mut b = CheckBuilder::new();
    for c in 0..grid.cols() {
        let mut last_rise_end: Option<usize> = None;
        for r in 1..grid.rows() {
            if grid.mask[[r, c]] || grid.mask[[r - 1, c]] {
                if grid.d_ik[r] >= large_from && grid.mask[[r, c]] {
                    b.masked(grid.d_ij[c], grid.d_ik[r]);
                }
                continue;
            }
            if rises(grid.magnitude[[r - 1, c]], grid.magnitude[[r, c]], tol.rel_slack) {
                last_rise_end = Some(r);
            }
        }
        if let Some(r) = last_rise_end {
            // The magnitude still rises at row r; a valid threshold must sit
            // at or above it, below the top decade.
            if grid.d_ik[r] > large_from {
                b.violation(
                    grid.d_ij[c],
                    grid.d_ik[r],
                    format!(
                        "gradient magnitude still increasing at d_ik = {} (threshold must be < {large_from})",
                        grid.d_ik[r]
                    ),
                );
            }
        }
    }
    b.finish()
}

/// P6: per fixed `d_ik` the gradient magnitude must be unimodal in `d_ij`
/// (single peak), and for `d_ik` in the top decade must decay at the right
/// edge relative to the row maximum.
fn check_p6(grid: &RainbowGrid, tol: &AuditTolerances, large_from: f64) -> PrincipleCheck {
    let mut b = CheckBuilder::new();
    let mut decay_covered = false;
    for r in 0..grid.rows() {
        // Unimodality within each contiguous unmasked run.
        let mut c = 0;
        while c < grid.cols() {
            if grid.mask[[r, c]] {
                c += 1;
                continue;
            }
            let start = c;
            while c < grid.cols() && !grid.mask[[r, c]] {
                c += 1;
            }
            let run: Vec<f64> = (start..c).map(|i| grid.magnitude[[r, i]]).collect();
            if let Some(offset) = peak_unimodality_violation(&run, tol.rel_slack) {
                b.violation(
                    grid.d_ij[start + offset],
                    grid.d_ik[r],
                    "gradient magnitude rises again after falling along d_ij".into(),
                );
            }
        }

        // Right-edge decay on "large d_ik" rows.
        if grid.d_ik[r] >= large_from {
            let unmasked: Vec<usize> = (0..grid.cols()).filter(|&i| !grid.mask[[r, i]]).collect();
            let Some(&edge) = unmasked.last() else {
                continue;
            };
            decay_covered = true;
            let row_max = unmasked
                .iter()
                .map(|&i| grid.magnitude[[r, i]])
                .fold(0.0_f64, f64::max);
            let edge_mag = grid.magnitude[[r, edge]];
            if edge_mag > tol.ratio_tol * row_max {
                b.violation(
                    grid.d_ij[edge],
                    grid.d_ik[r],
                    format!("edge magnitude {edge_mag} not below {} * row max {row_max}", tol.ratio_tol),
                );
            }
        }
    }
    b.finish_requiring_coverage(decay_covered)
}

/// Report for the separable-profile sufficient conditions.
#[derive(Debug, Clone)]
pub struct Prop1Report {
    pub profile: String,
    /// `f, g >= 0` over the sampled domain.
    pub nonnegative: Verdict,
    /// `f` and `g` each have a single peak.
    pub unimodal: Verdict,
    /// `f, g` vanish (relative to their maxima) at both domain endpoints.
    pub vanishing_limits: Verdict,
    pub witnesses: Vec<String>,
}

impl Prop1Report {
    pub fn verdict(&self) -> Verdict {
        let all = [self.nonnegative, self.unimodal, self.vanishing_limits];
        if all.contains(&Verdict::Fail) {
            Verdict::Fail
        } else if all.contains(&Verdict::Indeterminate) {
            Verdict::Indeterminate
        } else {
            Verdict::Pass
        }
    }

    pub fn passes(&self) -> bool {
        self.verdict() == Verdict::Pass
    }
}

/// Checks the sufficient conditions on a profile over log-spaced samples of
/// `domain` (conventionally `[1e-4, 1e4]`): non-negativity, single-peak shape,
/// and vanishing endpoints.
pub fn check_prop1(
    profile: &SeparableProfile,
    domain: &GridSpec,
    tol: &AuditTolerances,
) -> Result<Prop1Report> {
    let samples = domain.axis();
    let mut witnesses = Vec::new();

    let mut verdicts = Vec::new();
    let mut indeterminate = false;

    let evaluated: Vec<(&str, Vec<f64>)> = [
        ("f", samples.iter().map(|&d| profile.f(d)).collect::<Vec<f64>>()),
        ("g", samples.iter().map(|&d| profile.g(d)).collect::<Vec<f64>>()),
    ]
    .into_iter()
    .collect();

    for (which, values) in &evaluated {
        if values.iter().any(|v| !v.is_finite()) {
            witnesses.push(format!("{which} is non-finite on the domain"));
            indeterminate = true;
        }
    }

    // Non-negativity.
    let mut nonneg = Verdict::Pass;
    for (which, values) in &evaluated {
        let peak = values.iter().cloned().fold(0.0_f64, |a, b| a.max(b.abs()));
        for (i, &v) in values.iter().enumerate() {
            if v.is_finite() && v < -tol.rel_slack * peak {
                witnesses.push(format!("{which}({}) = {v} < 0", samples[i]));
                nonneg = Verdict::Fail;
                break;
            }
        }
    }
    verdicts.push(nonneg);

    // Unimodality.
    let mut unimodal = Verdict::Pass;
    for (which, values) in &evaluated {
        if values.iter().all(|v| v.is_finite()) {
            if let Some(i) = peak_unimodality_violation(values, tol.rel_slack) {
                witnesses.push(format!(
                    "{which} rises again after falling at d = {}",
                    samples[i]
                ));
                unimodal = Verdict::Fail;
            }
        }
    }
    verdicts.push(unimodal);

    // Vanishing limit proxies at both endpoints.
    let mut vanishing = Verdict::Pass;
    for (which, values) in &evaluated {
        if !values.iter().all(|v| v.is_finite()) {
            continue;
        }
        let peak = values.iter().cloned().fold(0.0_f64, f64::max);
        for (label, idx) in [("d -> 0", 0), ("d -> inf", values.len() - 1)] {
            if values[idx] > tol.ratio_tol * peak {
                witnesses.push(format!(
                    "{which} does not vanish as {label}: endpoint {} vs peak {peak}",
                    values[idx]
                ));
                vanishing = Verdict::Fail;
            }
        }
    }
    verdicts.push(vanishing);

    let adjust = |v: Verdict| {
        if indeterminate && v == Verdict::Pass {
            Verdict::Indeterminate
        } else {
            v
        }
    };

    Ok(Prop1Report {
        profile: profile.name().to_string(),
        nonnegative: adjust(verdicts[0]),
        unimodal: adjust(verdicts[1]),
        vanishing_limits: adjust(verdicts[2]),
        witnesses,
    })
}

/// Default 1-D domain for [`check_prop1`].
pub fn prop1_domain() -> GridSpec {
    GridSpec {
        d_min: 1e-4,
        d_max: 1e4,
        points: 400,
    }
}
