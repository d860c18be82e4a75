//! Radius sweeps: tube shape operators classified row by row.

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::construction::build_submanifold;
use crate::error::{Error, Result};
use crate::jacobi::{d_matrix, sech_cubed, special_radius, tube_shape_operator, MAX_RADIUS};
use crate::model::{ModelParams, DEFAULT_STEP};
use crate::spectral::{classify, hopf_frame_extract, principal_decomposition, DEFAULT_TOL};

pub const CSV_HEADER: &str = "r,lambda1,lambda2,lambda3,lambda4,mult1,mult2,mult3,mult4,b1sq,b2sq,g,h,detD,detD_expected,classify_status";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepConfig {
    pub n: usize,
    pub k: usize,
    pub c: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub rows: usize,
    /// ODE step for the Jacobi and geodesic integrations.
    pub step: f64,
    /// Eigenvalue grouping tolerance.
    pub tol: f64,
}

impl SweepConfig {
    pub fn new(n: usize, k: usize, c: f64, r_min: f64, r_max: f64, rows: usize) -> Self {
        Self { n, k, c, r_min, r_max, rows, step: DEFAULT_STEP, tol: DEFAULT_TOL }
    }

    pub fn validate(&self) -> Result<()> {
        let params = ModelParams::new(self.n, self.c)?;
        params.half_root()?;
        if self.k == 0 || self.k > self.n - 1 {
            return Err(Error::DimensionTooLarge { k: self.k, max: self.n - 1 });
        }
        if !(self.r_min > 0.0 && self.r_min <= self.r_max && self.r_max <= MAX_RADIUS) {
            return Err(Error::OutOfRange(format!(
                "radius range [{}, {}] must satisfy 0 < r_min <= r_max <= {MAX_RADIUS}",
                self.r_min, self.r_max
            )));
        }
        if self.rows == 0 {
            return Err(Error::InvalidParams("rows must be positive".into()));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::NonPositiveStep(self.step));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParams(format!("tolerance must be positive, got {}", self.tol)));
        }
        Ok(())
    }

    /// Evenly spaced radii. For `k ≥ 2` the grid point nearest to the
    /// special radius is moved onto it, so the degenerate spectrum is hit.
    pub fn radii(&self) -> Vec<f64> {
        let mut out: Vec<f64> = if self.rows == 1 {
            vec![self.r_min]
        } else {
            (0..self.rows)
                .map(|i| self.r_min + (self.r_max - self.r_min) * i as f64 / (self.rows - 1) as f64)
                .collect()
        };
        if self.k >= 2 {
            if let Ok(rs) = special_radius(self.c) {
                if rs >= self.r_min && rs <= self.r_max {
                    let nearest = (0..out.len())
                        .min_by(|&a, &b| (out[a] - rs).abs().total_cmp(&(out[b] - rs).abs()))
                        .expect("nonempty grid");
                    out[nearest] = rs;
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub r: f64,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub lambda3: Option<f64>,
    pub lambda4: Option<f64>,
    pub mult1: usize,
    pub mult2: usize,
    pub mult3: usize,
    pub mult4: usize,
    pub b1sq: Option<f64>,
    pub b2sq: Option<f64>,
    pub g: usize,
    pub h: usize,
    #[serde(rename = "detD")]
    pub det_d: Option<f64>,
    #[serde(rename = "detD_expected")]
    pub det_d_expected: f64,
    pub classify_status: String,
}

fn row(cfg: &SweepConfig, r: f64) -> Result<SweepRow> {
    let params = ModelParams::new(cfg.n, cfg.c)?;
    let spec = build_submanifold(params, cfg.k, FRAC_PI_2)?;
    let germ = tube_shape_operator(&spec, r, cfg.step)?;
    let result = classify(&germ, cfg.tol);
    let germ = if result.flipped { germ.flipped() } else { germ };
    let decomp = principal_decomposition(&germ, cfg.tol)?;
    let mut out = SweepRow {
        r,
        lambda1: None,
        lambda2: None,
        lambda3: None,
        lambda4: None,
        mult1: 0,
        mult2: 0,
        mult3: 0,
        mult4: 0,
        b1sq: None,
        b2sq: None,
        g: decomp.g,
        h: decomp.h,
        det_d: None,
        det_d_expected: sech_cubed(r, cfg.c)?,
        classify_status: serde_json::to_value(result.model)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default(),
    };
    if let Ok(frame) = hopf_frame_extract(&germ, &decomp) {
        let g3 = decomp.nearest_group(frame.lambda3);
        let ev = &decomp.eigenvalues;
        let m = &decomp.multiplicities;
        out.lambda1 = Some(ev[frame.group1]);
        out.lambda2 = Some(ev[frame.group2]);
        out.mult1 = m[frame.group1];
        out.mult2 = m[frame.group2];
        if g3 != frame.group1 && g3 != frame.group2 {
            out.lambda3 = Some(ev[g3]);
            out.mult3 = m[g3];
        }
        let rest: Vec<usize> = (0..decomp.g).filter(|&i| i != frame.group1 && i != frame.group2 && i != g3).collect();
        if let [i4] = rest.as_slice() {
            out.lambda4 = Some(ev[*i4]);
            out.mult4 = m[*i4];
        }
        out.b1sq = Some(frame.b1 * frame.b1);
        out.b2sq = Some(frame.b2 * frame.b2);
        let d = d_matrix(r, frame.b1, frame.b2, ev[frame.group1], ev[frame.group2], cfg.c)?;
        out.det_d = Some(d.determinant());
    }
    Ok(out)
}

/// Rows in increasing `r`, computed in parallel.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    cfg.radii().into_par_iter().map(|r| row(cfg, r)).collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV with header; floats in shortest round-trip form, missing values
/// empty.
pub fn to_csv(rows: &[SweepRow]) -> String {
    let mut s = String::with_capacity(64 * (rows.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.r,
            fmt_opt(r.lambda1),
            fmt_opt(r.lambda2),
            fmt_opt(r.lambda3),
            fmt_opt(r.lambda4),
            r.mult1,
            r.mult2,
            r.mult3,
            r.mult4,
            fmt_opt(r.b1sq),
            fmt_opt(r.b2sq),
            r.g,
            r.h,
            fmt_opt(r.det_d),
            r.det_d_expected,
            r.classify_status
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapping_only_for_tubes() {
        let rs = special_radius(-4.0).unwrap();
        let cfg = SweepConfig::new(3, 2, -4.0, 0.05, 2.0, 100);
        let radii = cfg.radii();
        assert_eq!(radii.iter().filter(|r| **r == rs).count(), 1);
        assert_eq!(radii.len(), 100);
        assert!(radii.windows(2).all(|w| w[0] < w[1]));
        let eq = SweepConfig { k: 1, ..cfg };
        assert!(!eq.radii().contains(&rs));
    }

    #[test]
    fn config_errors() {
        let cfg = SweepConfig::new(3, 2, -4.0, 0.05, 2.0, 10);
        assert!(SweepConfig { k: 3, ..cfg }.validate().is_err());
        assert!(SweepConfig { r_min: 0.0, ..cfg }.validate().is_err());
        assert!(SweepConfig { r_max: 4.0, ..cfg }.validate().is_err());
        assert!(SweepConfig { c: 4.0, ..cfg }.validate().is_err());
        assert!(SweepConfig { rows: 0, ..cfg }.validate().is_err());
    }

    #[test]
    fn small_sweep_columns() {
        let cfg = SweepConfig::new(3, 2, -4.0, 0.3, 0.9, 4);
        let rows = run_sweep(&cfg).unwrap();
        let csv = to_csv(&rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 5);
        assert!(lines.iter().all(|l| l.split(',').count() == 16));
        for r in &rows {
            assert_eq!(r.classify_status, "tube");
            assert!((r.det_d.unwrap() - r.det_d_expected).abs() < 1e-10);
        }
    }
}
