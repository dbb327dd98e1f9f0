//! Loss-function auditing: rainbow grids over `(d_ij, d_ik)`, the six
//! principles of local-structure-preserving losses, and the sufficient
//! separable-profile conditions.

mod audit;
mod profiles;
mod surfaces;

pub use audit::{
    check_principles, check_prop1, prop1_domain, AuditTolerances, PrincipleCheck, PrincipleReport,
    Prop1Report, Verdict, Witness,
};
pub use profiles::{builtin_profile, ProfileSpec, SeparableProfile};
pub use surfaces::{
    builtin_surface, surface_from_profile, TripletLossSurface, BADLOSS4_CLAMP, FA2_DEGREE, FA2_KR,
};

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Log-spaced axis specification shared by both rainbow grid axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub d_min: f64,
    pub d_max: f64,
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            d_min: 1e-2,
            d_max: 1e2,
            points: 200,
        }
    }
}

impl GridSpec {
    pub fn new(d_min: f64, d_max: f64, points: usize) -> Result<Self> {
        let spec = Self { d_min, d_max, points };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if !(self.d_min > 0.0 && self.d_max > self.d_min) || self.points < 2 {
            return Err(Error::InvalidConfig(format!(
                "grid must satisfy 0 < d_min < d_max with >= 2 points, got [{}, {}] x {}",
                self.d_min, self.d_max, self.points
            )));
        }
        Ok(())
    }

    /// Log-spaced samples including both endpoints.
    pub fn axis(&self) -> Vec<f64> {
        let ratio = self.d_max / self.d_min;
        (0..self.points)
            .map(|i| self.d_min * ratio.powf(i as f64 / (self.points - 1) as f64))
            .collect()
    }
}

/// Loss and gradient samples over a log-spaced `(d_ij, d_ik)` grid.
///
/// Storage is row-major with rows indexed by `d_ik` and columns by `d_ij`.
/// Cells whose loss or partials are non-finite are masked.
#[derive(Debug, Clone)]
pub struct RainbowGrid {
    pub d_ij: Vec<f64>,
    pub d_ik: Vec<f64>,
    pub loss: Array2<f64>,
    pub grad_ij: Array2<f64>,
    pub grad_ik: Array2<f64>,
    pub magnitude: Array2<f64>,
    pub mask: Array2<bool>,
    pub masked_cells: usize,
}

impl RainbowGrid {
    pub fn rows(&self) -> usize {
        self.d_ik.len()
    }

    pub fn cols(&self) -> usize {
        self.d_ij.len()
    }
}

/// Evaluates a surface on the grid, recording masked cells instead of
/// propagating non-finite values.
pub fn rainbow_grid(surface: &TripletLossSurface, spec: &GridSpec) -> Result<RainbowGrid> {
    spec.validate()?;
    let d_ij = spec.axis();
    let d_ik = spec.axis();
    let (rows, cols) = (d_ik.len(), d_ij.len());

    let cells: Vec<Vec<(f64, f64, f64)>> = d_ik
        .par_iter()
        .map(|&ik| {
            d_ij.iter()
                .map(|&ij| {
                    let loss = surface.loss(ij, ik);
                    let (gij, gik) = surface.partials(ij, ik);
                    (loss, gij, gik)
                })
                .collect()
        })
        .collect();

    let mut loss = Array2::zeros((rows, cols));
    let mut grad_ij = Array2::zeros((rows, cols));
    let mut grad_ik = Array2::zeros((rows, cols));
    let mut magnitude = Array2::zeros((rows, cols));
    let mut mask = Array2::from_elem((rows, cols), false);
    let mut masked_cells = 0;

    for (r, row) in cells.iter().enumerate() {
        for (c, &(l, gij, gik)) in row.iter().enumerate() {
            let bad = !l.is_finite() || !gij.is_finite() || !gik.is_finite();
            loss[[r, c]] = l;
            grad_ij[[r, c]] = gij;
            grad_ik[[r, c]] = gik;
            magnitude[[r, c]] = if bad { f64::NAN } else { gij.hypot(gik) };
            mask[[r, c]] = bad;
            masked_cells += bad as usize;
        }
    }

    Ok(RainbowGrid {
        d_ij,
        d_ik,
        loss,
        grad_ij,
        grad_ik,
        magnitude,
        mask,
        masked_cells,
    })
}

/// Writes the grid as CSV, one row per cell:
/// `d_ij,d_ik,loss,grad_ij,grad_ik,magnitude,mask`.
pub fn write_rainbow_csv<W: std::io::Write>(grid: &RainbowGrid, out: &mut W) -> Result<()> {
    writeln!(out, "d_ij,d_ik,loss,grad_ij,grad_ik,magnitude,mask")?;
    for r in 0..grid.rows() {
        for c in 0..grid.cols() {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                grid.d_ij[c],
                grid.d_ik[r],
                grid.loss[[r, c]],
                grid.grad_ij[[r, c]],
                grid.grad_ik[[r, c]],
                grid.magnitude[[r, c]],
                grid.mask[[r, c]] as u8,
            )?;
        }
    }
    Ok(())
}
