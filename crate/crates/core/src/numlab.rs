//! Finite-difference hypersurface laboratory.
//!
//! A [`ChartImmersion`] maps a parameter box into the model. Around a chart
//! point a [`GermField`] samples positions on nested central-difference
//! stencils and derives the induced metric, the unit normal, the shape
//! operator (Weingarten), the induced connection and its curvature. The
//! residual functions then evaluate the structure equations of a real
//! hypersurface and the eigen-frame identities of the `h = 2` catalog on
//! that data.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::construction::SubmanifoldSpec;
use crate::error::{Error, Result};
use crate::jacobi::MAX_RADIUS;
use crate::linalg;
use crate::model::{apply_j, ModelParams, ModelSpace, Point, TangentVector, IDX_B, IDX_Z};
use crate::spectral::{classify, principal_decomposition, ClassificationResult, HopfFrame, HypersurfaceGerm};

pub const DEFAULT_FD_STEP: f64 = 1e-3;
/// Eigenvalue grouping tolerance for finite-difference germs.
pub const DEFAULT_GROUP_TOL: f64 = 1e-4;
/// Residuals below this level are treated as converged in refinement
/// studies; rounding dominates truncation there.
pub const NOISE_FLOOR: f64 = 1e-8;

type ChartMap = dyn Fn(&[f64]) -> Result<Point> + Send + Sync;

/// A parametrized hypersurface patch `x: R^{2n-1} ⊃ box → CH^n`.
#[derive(Clone)]
pub struct ChartImmersion {
    pub dim: usize,
    pub fd_step: f64,
    pub center: Vec<f64>,
    /// Frame components of a vector on the side the normal should point to.
    pub normal_hint: DVector<f64>,
    model: ModelSpace,
    map: Arc<ChartMap>,
}

impl fmt::Debug for ChartImmersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChartImmersion")
            .field("dim", &self.dim)
            .field("fd_step", &self.fd_step)
            .field("center", &self.center)
            .field("normal_hint", &self.normal_hint.as_slice())
            .field("params", &self.model.params())
            .finish()
    }
}

impl ChartImmersion {
    pub fn new<F>(model: ModelSpace, center: Vec<f64>, normal_hint: DVector<f64>, fd_step: f64, map: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Result<Point> + Send + Sync + 'static,
    {
        let dim = model.dim() - 1;
        if center.len() != dim {
            return Err(Error::InvalidParams(format!("chart center has {} coordinates, need {dim}", center.len())));
        }
        if normal_hint.len() != model.dim() {
            return Err(Error::InvalidParams("normal hint has the wrong length".into()));
        }
        check_fd_step(fd_step)?;
        Ok(Self { dim, fd_step, center, normal_hint, model, map: Arc::new(map) })
    }

    pub fn eval(&self, params: &[f64]) -> Result<Point> {
        if params.len() != self.dim {
            return Err(Error::InvalidParams(format!("expected {} parameters, got {}", self.dim, params.len())));
        }
        (self.map)(params)
    }

    pub fn model(&self) -> &ModelSpace {
        &self.model
    }

    pub fn params(&self) -> ModelParams {
        self.model.params()
    }

    pub fn with_fd_step(&self, fd_step: f64) -> Result<Self> {
        check_fd_step(fd_step)?;
        Ok(Self { fd_step, ..self.clone() })
    }

    /// Numerical rank of the differential at `at` (frame components,
    /// relative singular value threshold `1e-8`).
    pub fn jacobian_rank(&self, at: &[f64]) -> Result<usize> {
        let h = self.fd_step;
        let p = self.eval(at)?;
        let mut cols = Vec::with_capacity(self.dim);
        for i in 0..self.dim {
            let mut plus = at.to_vec();
            let mut minus = at.to_vec();
            plus[i] += h;
            minus[i] -= h;
            let dp = (self.eval(&plus)?.coords - self.eval(&minus)?.coords) / (2.0 * h);
            cols.push(self.model.to_frame(&p, &dp));
        }
        let sv = linalg::columns(&cols, self.model.dim()).svd(false, false).singular_values;
        let top = sv.max();
        Ok(sv.iter().filter(|s| **s > 1e-8 * top).count())
    }
}

fn check_fd_step(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveStep(h))
    }
}

// ----- charts --------------------------------------------------------------

/// The horosphere `{s = 0}` through `o`, parametrized by `(z, u)`; its
/// normal `B` gives principal curvatures `√−c/2` (multiplicity `2n−2`) and
/// `√−c`.
pub fn horosphere_chart(params: ModelParams, fd_step: f64) -> Result<ChartImmersion> {
    let model = ModelSpace::new(params)?;
    let d = model.dim();
    let hint = model.b();
    ChartImmersion::new(model, vec![0.0; d - 1], hint, fd_step, move |p| {
        let mut coords = DVector::zeros(d);
        coords.rows_mut(1, d - 1).copy_from_slice(p);
        Ok(Point::new(coords))
    })
}

/// Point of the subgroup with Lie algebra `a ⊕ w ⊕ g_2α` with coordinates
/// `(s, z, w...)` in the tangent basis of `spec`.
fn orbit_point(spec: &SubmanifoldSpec, p: &[f64]) -> DVector<f64> {
    let d = spec.params.dim();
    let mut coords = DVector::zeros(d);
    coords[IDX_B] = p[0];
    coords[IDX_Z] = p[1];
    for (j, w) in spec.tangent.iter().skip(2).enumerate() {
        coords.axpy(p[2 + j], w, 1.0);
    }
    coords
}

/// The orbit `W^{2n-1}` itself (`k = 1`), with coordinates `(s, z, w...)`.
pub fn orbit_chart(spec: &SubmanifoldSpec, fd_step: f64) -> Result<ChartImmersion> {
    if spec.k() != 1 {
        return Err(Error::NotApplicable(format!("W has codimension {} (need 1)", spec.k())));
    }
    let model = spec.model();
    let d = model.dim();
    let hint = spec.normal()[0].clone();
    let spec = spec.clone();
    ChartImmersion::new(model, vec![0.0; d - 1], hint, fd_step, move |p| Ok(Point::new(orbit_point(&spec, p))))
}

/// Unit normal of `W` at `o` for the sphere coordinates `θ`:
/// `normalize(ξ_1 + Σ θ_j ξ_{j+1})`.
fn sphere_normal(spec: &SubmanifoldSpec, theta: &[f64]) -> DVector<f64> {
    let nb = spec.normal();
    let mut eta = nb[0].clone();
    for (j, t) in theta.iter().enumerate() {
        eta.axpy(*t, &nb[j + 1], 1.0);
    }
    eta.normalize()
}

/// Tube of radius `r` around `W^{2n-k}_φ`: `(s, z, w, θ) ↦ σ(s, z, w)·γ_η(θ)(r)`
/// where `σ` runs through the orbit and `γ_η` is the geodesic from `o` with
/// initial velocity `η(θ)`. Left translations are isometries, so the image
/// is `exp_{σ}(r dL_σ η)`. Geodesics are cached per `θ`.
pub fn tube_chart(spec: &SubmanifoldSpec, r: f64, step: f64, fd_step: f64) -> Result<ChartImmersion> {
    let model = spec.model();
    let k = spec.k();
    if !(r >= 0.0) || r > MAX_RADIUS || (r == 0.0 && k > 1) {
        return Err(Error::OutOfRange(format!("tube radius {r} outside the integration range (0, {MAX_RADIUS}]")));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::NonPositiveStep(step));
    }
    let d = model.dim();
    let nw = 2 * spec.params.n - k;
    let origin = model.identity();
    let eta0 = sphere_normal(spec, &[]);
    let (_, vel) = model.geodesic(&TangentVector { base: origin.clone(), vec: eta0 }, r, step)?;
    let hint = -vel.vec;
    let cache: Arc<Mutex<HashMap<Vec<u64>, Point>>> = Arc::new(Mutex::new(HashMap::new()));
    let spec = spec.clone();
    let inner = model.clone();
    ChartImmersion::new(model, vec![0.0; d - 1], hint, fd_step, move |p| {
        let theta = &p[nw..];
        let key: Vec<u64> = theta.iter().map(|t| t.to_bits()).collect();
        let cached = cache.lock().expect("cache lock").get(&key).cloned();
        let end = match cached {
            Some(q) => q,
            None => {
                let eta = sphere_normal(&spec, theta);
                let (q, _) = inner.geodesic(&TangentVector { base: origin.clone(), vec: eta }, r, step)?;
                cache.lock().expect("cache lock").insert(key, q.clone());
                q
            }
        };
        let sigma = Point::new(orbit_point(&spec, &p[..nw]));
        Ok(inner.group_multiply(&sigma, &end))
    })
}

/// Distance (global coordinates) between the orbit point `σ(s, z, w)` and
/// the endpoint of the geodesic run back from the tube chart image for time
/// `r`.
pub fn tube_back_projection(spec: &SubmanifoldSpec, r: f64, params: &[f64], step: f64) -> Result<f64> {
    let model = spec.model();
    let nw = 2 * spec.params.n - spec.k();
    if params.len() != model.dim() - 1 {
        return Err(Error::InvalidParams("wrong number of chart parameters".into()));
    }
    let eta = sphere_normal(spec, &params[nw..]);
    let sigma = Point::new(orbit_point(spec, &params[..nw]));
    let start = TangentVector { base: sigma.clone(), vec: eta };
    let (q, v) = model.geodesic(&start, r, step)?;
    let (back, _) = model.geodesic(&TangentVector { base: q, vec: -v.vec }, r, step)?;
    Ok((back.coords - sigma.coords).amax())
}

// ----- germ fields ---------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldOptions {
    /// Multiplies the numerically computed second fundamental form.
    pub shape_scale: f64,
    pub group_tol: f64,
}

impl Default for FieldOptions {
    fn default() -> Self {
        Self { shape_scale: 1.0, group_tol: DEFAULT_GROUP_TOL }
    }
}

/// Geometry at one stencil point.
#[derive(Debug, Clone)]
pub struct StencilSample {
    pub offset: Vec<i32>,
    pub germ: HypersurfaceGerm,
    /// Coordinate tangent vectors `X_i = ∂_i x` in frame components.
    pub tangent: DMatrix<f64>,
    pub metric: DMatrix<f64>,
    /// `h_ij = ⟨S X_i, X_j⟩`.
    pub second: DMatrix<f64>,
    /// `christoffel[k][(i, j)] = Γ^k_ij`.
    pub christoffel: Vec<DMatrix<f64>>,
}

impl StencilSample {
    /// Coordinates `α` with `v = Σ α_i X_i` for a tangent vector `v`.
    pub fn coordinates(&self, v: &DVector<f64>) -> DVector<f64> {
        let ginv = self.metric.clone().try_inverse().expect("metric checked at build");
        ginv * (self.tangent.transpose() * v)
    }

    /// `M` with orthonormal tangent vector `e_a = Σ_i M_ia X_i`.
    fn orthonormal_coords(&self) -> DMatrix<f64> {
        let ginv = self.metric.clone().try_inverse().expect("metric checked at build");
        ginv * self.tangent.transpose() * &self.germ.tangent_basis
    }
}

/// Result of [`numeric_geometry`].
#[derive(Debug, Clone)]
pub struct NumericGeometry {
    pub germ: HypersurfaceGerm,
    pub christoffel: Vec<DMatrix<f64>>,
    pub metric: DMatrix<f64>,
    pub tangent: DMatrix<f64>,
    pub point: Point,
}

/// Samples at the center and at `±h e_i` with the derived curvature data.
#[derive(Debug, Clone)]
pub struct GermField {
    pub params: ModelParams,
    pub fd_step: f64,
    pub options: FieldOptions,
    pub point: Point,
    /// Center first, then `−e_0, +e_0, −e_1, +e_1, ...`.
    pub samples: Vec<StencilSample>,
    model: ModelSpace,
    // R^l_ijk at ((i*m + j)*m + k)*m + l
    riemann: Vec<f64>,
    // (∇_i h)_jk at (i*m + j)*m + k
    nabla_h: Vec<f64>,
}

fn offsets(m: usize, radius: i32) -> Vec<Vec<i32>> {
    fn rec(m: usize, left: i32, prefix: &mut Vec<i32>, out: &mut Vec<Vec<i32>>) {
        if prefix.len() == m {
            out.push(prefix.clone());
            return;
        }
        for v in -left..=left {
            prefix.push(v);
            rec(m, left - v.abs(), prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(m, radius, &mut Vec::with_capacity(m), &mut out);
    out
}

fn shifted(o: &[i32], axis: usize, delta: i32) -> Vec<i32> {
    let mut v = o.to_vec();
    v[axis] += delta;
    v
}

fn unit_normal(x: &DMatrix<f64>) -> Result<DVector<f64>> {
    let (d, m) = x.shape();
    let cols: Vec<DVector<f64>> = (0..m).map(|j| x.column(j).into_owned()).collect();
    let scale = cols.iter().fold(0.0f64, |a, v| a.max(v.norm()));
    let q = linalg::gram_schmidt(&cols, 1e-8 * scale.max(f64::MIN_POSITIVE));
    if q.len() < m {
        return Err(Error::RankDeficient(format!("tangent vectors span {} of {m} dimensions", q.len())));
    }
    Ok(linalg::complement(&q, d).remove(0))
}

impl GermField {
    /// Samples the chart around `at` with the chart's `fd_step`.
    pub fn build(chart: &ChartImmersion, at: &[f64], options: FieldOptions) -> Result<Self> {
        let m = chart.dim;
        let d = m + 1;
        let h = chart.fd_step;
        if at.len() != m {
            return Err(Error::InvalidParams(format!("expected {m} parameters, got {}", at.len())));
        }
        if at.iter().any(|x| (*x + h) - *x < 0.5 * h) {
            return Err(Error::OutOfRange(format!("fd_step {h} underflows at the sample point")));
        }
        let model = chart.model().clone();
        let params = model.params();

        let all = offsets(m, 3);
        let evaluated: Vec<(Vec<i32>, Result<Point>)> = all
            .into_par_iter()
            .map(|o| {
                let p: Vec<f64> = at.iter().zip(&o).map(|(x, k)| x + *k as f64 * h).collect();
                let q = chart.eval(&p);
                (o, q)
            })
            .collect();
        let mut pos: HashMap<Vec<i32>, Point> = HashMap::with_capacity(evaluated.len());
        for (o, q) in evaluated {
            pos.insert(o, q?);
        }

        let mut xs: HashMap<Vec<i32>, DMatrix<f64>> = HashMap::new();
        let mut normals: HashMap<Vec<i32>, DVector<f64>> = HashMap::new();
        let zero = vec![0i32; m];
        let mut layer2 = offsets(m, 2);
        // center first so the remaining normals can follow its orientation
        layer2.sort_by_key(|o| o.iter().map(|v| v.abs()).sum::<i32>());
        for o in layer2 {
            let p = &pos[&o];
            let mut x = DMatrix::zeros(d, m);
            for i in 0..m {
                let dp = (&pos[&shifted(&o, i, 1)].coords - &pos[&shifted(&o, i, -1)].coords) / (2.0 * h);
                x.set_column(i, &model.to_frame(p, &dp));
            }
            let mut nu = unit_normal(&x)?;
            let reference = if o == zero { chart.normal_hint.clone() } else { normals[&zero].clone() };
            if nu.dot(&reference) < 0.0 {
                nu = -nu;
            }
            xs.insert(o.clone(), x);
            normals.insert(o, nu);
        }

        let mut sample_offsets = vec![zero.clone()];
        for i in 0..m {
            sample_offsets.push(shifted(&zero, i, -1));
            sample_offsets.push(shifted(&zero, i, 1));
        }
        let mut samples = Vec::with_capacity(sample_offsets.len());
        for o in &sample_offsets {
            let x = &xs[o];
            let nu = &normals[o];
            let metric = x.transpose() * x;
            let ginv = metric
                .clone()
                .try_inverse()
                .ok_or_else(|| Error::RankDeficient("induced metric is singular".into()))?;
            let mut christoffel = vec![DMatrix::zeros(m, m); m];
            let mut second = DMatrix::zeros(m, m);
            for i in 0..m {
                let xi_col = x.column(i).into_owned();
                let (xp, xm) = (&xs[&shifted(o, i, 1)], &xs[&shifted(o, i, -1)]);
                for j in 0..m {
                    let dxj = (xp.column(j) - xm.column(j)) / (2.0 * h);
                    let nb = dxj + model.koszul(&xi_col, &x.column(j).into_owned());
                    let low = x.transpose() * &nb;
                    let up = &ginv * low;
                    for k in 0..m {
                        christoffel[k][(i, j)] = up[k];
                    }
                }
                let dnu = (&normals[&shifted(o, i, 1)] - &normals[&shifted(o, i, -1)]) / (2.0 * h);
                let nb_nu = dnu + model.koszul(&xi_col, nu);
                for j in 0..m {
                    second[(i, j)] = -nb_nu.dot(&x.column(j));
                }
            }
            let second = (&second + second.transpose()) * (0.5 * options.shape_scale);
            let cols: Vec<DVector<f64>> = (0..m).map(|j| x.column(j).into_owned()).collect();
            let e = linalg::columns(&linalg::gram_schmidt(&cols, 0.0), d);
            let mcoef = &ginv * x.transpose() * &e;
            let shape = mcoef.transpose() * &second * &mcoef;
            let shape = (&shape + shape.transpose()) * 0.5;
            samples.push(StencilSample {
                offset: o.clone(),
                germ: HypersurfaceGerm::new(params, nu.clone(), e, shape),
                tangent: x.clone(),
                metric,
                second,
                christoffel,
            });
        }

        let c0 = &samples[0];
        let idx4 = |i: usize, j: usize, k: usize, l: usize| ((i * m + j) * m + k) * m + l;
        let d_gamma = |axis: usize, l: usize, a: usize, b: usize| {
            (samples[2 + 2 * axis].christoffel[l][(a, b)] - samples[1 + 2 * axis].christoffel[l][(a, b)]) / (2.0 * h)
        };
        let mut riemann = vec![0.0; m * m * m * m];
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    for l in 0..m {
                        let mut v = d_gamma(i, l, j, k) - d_gamma(j, l, i, k);
                        for q in 0..m {
                            v += c0.christoffel[q][(j, k)] * c0.christoffel[l][(i, q)]
                                - c0.christoffel[q][(i, k)] * c0.christoffel[l][(j, q)];
                        }
                        riemann[idx4(i, j, k, l)] = v;
                    }
                }
            }
        }
        let hc = &c0.second;
        let mut nabla_h = vec![0.0; m * m * m];
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    let mut v = (samples[2 + 2 * i].second[(j, k)] - samples[1 + 2 * i].second[(j, k)]) / (2.0 * h);
                    for l in 0..m {
                        v -= c0.christoffel[l][(i, j)] * hc[(l, k)] + c0.christoffel[l][(i, k)] * hc[(j, l)];
                    }
                    nabla_h[(i * m + j) * m + k] = v;
                }
            }
        }
        Ok(Self {
            params,
            fd_step: h,
            options,
            point: pos[&zero].clone(),
            samples,
            model,
            riemann,
            nabla_h,
        })
    }

    pub fn dim(&self) -> usize {
        self.samples[0].tangent.ncols()
    }

    pub fn center(&self) -> &StencilSample {
        &self.samples[0]
    }

    pub fn germ(&self) -> &HypersurfaceGerm {
        &self.samples[0].germ
    }

    /// Same field with the opposite unit normal.
    pub fn flipped(&self) -> Self {
        let mut out = self.clone();
        for s in &mut out.samples {
            s.germ = s.germ.flipped();
            s.second = -&s.second;
        }
        for v in &mut out.nabla_h {
            *v = -*v;
        }
        out
    }

    /// `⟨R(e_a, e_b) e_c, e_d⟩` of the induced metric in the orthonormal
    /// tangent basis of the center germ.
    pub fn intrinsic_curvature(&self) -> Vec<f64> {
        let m = self.dim();
        let c0 = self.center();
        let mut lowered = vec![0.0; m * m * m * m];
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    for l in 0..m {
                        let mut v = 0.0;
                        for q in 0..m {
                            v += self.riemann[((i * m + j) * m + k) * m + q] * c0.metric[(q, l)];
                        }
                        lowered[((i * m + j) * m + k) * m + l] = v;
                    }
                }
            }
        }
        contract(&lowered, m, 4, &c0.orthonormal_coords())
    }

    /// `⟨(∇_{e_a} S) e_b, e_c⟩` in the orthonormal tangent basis.
    pub fn shape_derivative(&self) -> Vec<f64> {
        let m = self.dim();
        contract(&self.nabla_h, m, 3, &self.center().orthonormal_coords())
    }
}

/// Changes every slot of a rank-`rank` tensor on `R^m` by `M`.
fn contract(t: &[f64], m: usize, rank: usize, mcoef: &DMatrix<f64>) -> Vec<f64> {
    let mut cur = t.to_vec();
    for slot in 0..rank {
        let stride = m.pow((rank - 1 - slot) as u32);
        let mut next = vec![0.0; cur.len()];
        for (idx, out) in next.iter_mut().enumerate() {
            let a = (idx / stride) % m;
            let base = idx - a * stride;
            let mut v = 0.0;
            for i in 0..m {
                v += cur[base + i * stride] * mcoef[(i, a)];
            }
            *out = v;
        }
        cur = next;
    }
    cur
}

/// Germ, Christoffel symbols, metric and tangent frame at `at`.
pub fn numeric_geometry(chart: &ChartImmersion, at: &[f64]) -> Result<NumericGeometry> {
    let field = GermField::build(chart, at, FieldOptions::default())?;
    let c0 = field.samples.into_iter().next().expect("center sample");
    Ok(NumericGeometry {
        germ: c0.germ,
        christoffel: c0.christoffel,
        metric: c0.metric,
        tangent: c0.tangent,
        point: field.point,
    })
}

// ----- structure equations ---------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussCodazziReport {
    pub gauss: f64,
    pub codazzi: f64,
    pub fd_step: f64,
    pub shape_scale: f64,
}

/// Max residuals of the Gauss and Codazzi equations over the orthonormal
/// tangent frame at the field center.
pub fn gauss_codazzi_residuals(field: &GermField) -> GaussCodazziReport {
    let m = field.dim();
    let germ = field.germ();
    let e: Vec<DVector<f64>> = (0..m).map(|a| germ.tangent_basis.column(a).into_owned()).collect();
    let s = &germ.shape;
    let r = field.intrinsic_curvature();
    let ds = field.shape_derivative();
    let mut gauss: f64 = 0.0;
    let mut codazzi: f64 = 0.0;
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                let rbar = field.params.curvature(&e[a], &e[b], &e[c]);
                for d in 0..m {
                    let lhs = rbar.dot(&e[d]);
                    let rhs = r[((a * m + b) * m + c) * m + d] - s[(b, c)] * s[(a, d)] + s[(a, c)] * s[(b, d)];
                    gauss = gauss.max((lhs - rhs).abs());
                }
                let lhs = rbar.dot(&germ.normal);
                let rhs = ds[(a * m + b) * m + c] - ds[(b * m + a) * m + c];
                codazzi = codazzi.max((lhs - rhs).abs());
            }
        }
    }
    GaussCodazziReport { gauss, codazzi, fd_step: field.fd_step, shape_scale: field.options.shape_scale }
}

// ----- eigen-frame identities ------------------------------------------------

#[derive(Debug, Clone)]
enum FieldKind {
    U1,
    U2,
    A,
    /// `P_g v0`, optionally normalized.
    Proj { group: usize, v0: DVector<f64>, unit: bool },
}

/// Eigen-distributions of a classified field sampled on the stencil.
struct EigenFrames {
    field: GermField,
    classification: ClassificationResult,
    frame: HopfFrame,
    eigenvalues: Vec<f64>,
    /// Orthonormal eigenbasis at the center, ambient components, per group.
    bases: Vec<Vec<DVector<f64>>>,
    group3: usize,
    /// `projectors[s][g]`, ambient.
    projectors: Vec<Vec<DMatrix<f64>>>,
    normals: Vec<DVector<f64>>,
    jxi: Vec<DVector<f64>>,
}

impl EigenFrames {
    fn new(field: &GermField) -> Result<Self> {
        let mut field = field.clone();
        let tol = field.options.group_tol;
        let mut classification = classify(field.germ(), tol);
        if !classification.is_classified() {
            return Err(Error::NotApplicable(format!(
                "field does not classify: {}",
                classification.reason.clone().unwrap_or_default()
            )));
        }
        if classification.flipped {
            field = field.flipped();
            classification = classify(field.germ(), tol);
        }
        let germ = field.germ().clone();
        let decomp = principal_decomposition(&germ, tol)?;
        let frame = crate::spectral::hopf_frame_extract(&germ, &decomp)?;
        let group3 = decomp.nearest_group(frame.lambda3);
        let bases: Vec<Vec<DVector<f64>>> = decomp
            .eigenspaces
            .iter()
            .map(|b| (0..b.ncols()).map(|j| germ.to_ambient(&b.column(j).into_owned())).collect())
            .collect();
        let mut projectors = Vec::with_capacity(field.samples.len());
        for s in &field.samples {
            let (_, vecs) = linalg::sym_eigen_sorted(&s.germ.shape);
            let amb = &s.germ.tangent_basis * vecs;
            let mut start = 0;
            let mut per = Vec::with_capacity(decomp.g);
            for &mult in &decomp.multiplicities {
                let block = amb.columns(start, mult);
                per.push(&block * block.transpose());
                start += mult;
            }
            projectors.push(per);
        }
        let normals: Vec<DVector<f64>> = field.samples.iter().map(|s| s.germ.normal.clone()).collect();
        let jxi = normals.iter().map(apply_j).collect();
        Ok(Self {
            eigenvalues: decomp.eigenvalues.clone(),
            field,
            classification,
            frame,
            bases,
            group3,
            projectors,
            normals,
            jxi,
        })
    }

    fn group_of(&self, kind: &FieldKind) -> usize {
        match kind {
            FieldKind::U1 => self.frame.group1,
            FieldKind::U2 => self.frame.group2,
            FieldKind::A => self.group3,
            FieldKind::Proj { group, .. } => *group,
        }
    }

    fn u_at(&self, s: usize, group: usize) -> DVector<f64> {
        (&self.projectors[s][group] * &self.jxi[s]).normalize()
    }

    fn value(&self, kind: &FieldKind, s: usize) -> DVector<f64> {
        match kind {
            FieldKind::U1 => self.u_at(s, self.frame.group1),
            FieldKind::U2 => self.u_at(s, self.frame.group2),
            FieldKind::A => {
                let u1 = self.u_at(s, self.frame.group1);
                let u2 = self.u_at(s, self.frame.group2);
                let b1 = u1.dot(&self.jxi[s]);
                let b2 = u2.dot(&self.jxi[s]);
                -(apply_j(&u1) + &self.normals[s] * b1) / b2
            }
            FieldKind::Proj { group, v0, unit } => {
                let v = &self.projectors[s][*group] * v0;
                if *unit {
                    v.normalize()
                } else {
                    v
                }
            }
        }
    }

    fn values(&self, kind: &FieldKind) -> Vec<DVector<f64>> {
        (0..self.field.samples.len()).map(|s| self.value(kind, s)).collect()
    }

    /// Directional derivative at the center along the tangent vector `x`
    /// of a function known on the stencil.
    fn ddir(&self, x: &DVector<f64>, f: &[f64]) -> f64 {
        let alpha = self.field.center().coordinates(x);
        let h = self.field.fd_step;
        alpha.iter().enumerate().map(|(m, a)| a * (f[2 + 2 * m] - f[1 + 2 * m]) / (2.0 * h)).sum()
    }

    /// `∇_x V` of the induced connection at the center.
    fn nabla(&self, x: &DVector<f64>, v: &[DVector<f64>]) -> DVector<f64> {
        let alpha = self.field.center().coordinates(x);
        let h = self.field.fd_step;
        let mut out = self.field.model.koszul(x, &v[0]);
        for (m, a) in alpha.iter().enumerate() {
            out.axpy(*a / (2.0 * h), &(&v[2 + 2 * m] - &v[1 + 2 * m]), 1.0);
        }
        let nu = &self.normals[0];
        let nn = out.dot(nu);
        out - nu * nn
    }

    /// `U1, U2, A` followed by unit fields completing an eigenbasis.
    fn frame_fields(&self) -> Vec<FieldKind> {
        let mut kinds = vec![FieldKind::U1, FieldKind::U2, FieldKind::A];
        let centre = [self.frame.u1.clone(), self.frame.u2.clone(), self.frame.a.clone()];
        for (g, basis) in self.bases.iter().enumerate() {
            let mut seeds: Vec<DVector<f64>> = (0..3)
                .filter(|&i| self.group_of(&kinds[i]) == g)
                .map(|i| centre[i].clone())
                .collect();
            let skip = seeds.len();
            seeds.extend(basis.iter().cloned());
            for v0 in linalg::gram_schmidt(&seeds, 1e-6).into_iter().skip(skip) {
                kinds.push(FieldKind::Proj { group: g, v0, unit: true });
            }
        }
        kinds
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LemmaCodazziReport {
    /// max |⟨Jv, w⟩| over `T_λ1` and `T_λ2`.
    pub real_subspaces: f64,
    /// `⟨∇_X Y, Z⟩` against the displayed expression, `X, Y ∈ T_α`, `Z ∈ T_β`.
    pub same_space: f64,
    /// `⟨R̄(X,Y)Z, ξ⟩ − (β−γ)⟨∇_X Y, Z⟩ + (α−γ)⟨∇_Y X, Z⟩`.
    pub three_spaces: f64,
    /// The `X = Y = Z` instances of the three-space identity.
    pub aligned: f64,
}

impl LemmaCodazziReport {
    pub fn max(&self) -> f64 {
        self.real_subspaces.max(self.same_space).max(self.three_spaces)
    }
}

pub fn lemma_codazzi_residuals(field: &GermField) -> Result<LemmaCodazziReport> {
    let ef = EigenFrames::new(field)?;
    let c = field.params.c;
    let xi = &ef.normals[0];
    let jxi = &ef.jxi[0];
    let mut vecs: Vec<(usize, DVector<f64>)> = Vec::new();
    for (g, basis) in ef.bases.iter().enumerate() {
        vecs.extend(basis.iter().map(|v| (g, v.clone())));
    }
    let fields: Vec<Vec<DVector<f64>>> = vecs
        .iter()
        .map(|(g, v)| ef.values(&FieldKind::Proj { group: *g, v0: v.clone(), unit: false }))
        .collect();
    let nabla: Vec<Vec<DVector<f64>>> =
        vecs.iter().map(|(_, x)| fields.iter().map(|y| ef.nabla(x, y)).collect()).collect();

    let mut real: f64 = 0.0;
    for g in [ef.frame.group1, ef.frame.group2] {
        for v in &ef.bases[g] {
            let jv = apply_j(v);
            for w in &ef.bases[g] {
                real = real.max(jv.dot(w).abs());
            }
        }
    }

    let mut same: f64 = 0.0;
    let mut three: f64 = 0.0;
    let mut aligned: f64 = 0.0;
    for (a, (ga, x)) in vecs.iter().enumerate() {
        let jx = apply_j(x);
        for (b, (gb, y)) in vecs.iter().enumerate() {
            let jy = apply_j(y);
            for (z_idx, (gc, z)) in vecs.iter().enumerate() {
                let (al, be, ga_) = (ef.eigenvalues[*ga], ef.eigenvalues[*gb], ef.eigenvalues[*gc]);
                if ga == gb && gc != ga {
                    let expected = c / (4.0 * (al - ga_))
                        * (jy.dot(z) * x.dot(jxi) + jx.dot(y) * z.dot(jxi) + 2.0 * jx.dot(z) * y.dot(jxi));
                    same = same.max((nabla[a][b].dot(z) - expected).abs());
                }
                let lhs = field.params.curvature(x, y, z).dot(xi);
                let rhs = (be - ga_) * nabla[a][b].dot(z) - (al - ga_) * nabla[b][a].dot(z);
                let res = (lhs - rhs).abs();
                three = three.max(res);
                if a == b && b == z_idx {
                    aligned = aligned.max(res);
                }
            }
        }
    }
    Ok(LemmaCodazziReport { real_subspaces: real, same_space: same, three_spaces: three, aligned })
}

#[derive(Debug, Clone, Serialize)]
pub struct LemmaGaussReport {
    pub u1_u2: f64,
    pub u1_a: f64,
    /// Max over all unit frame pairs from distinct eigenspaces.
    pub max: f64,
    pub pairs: usize,
}

pub fn lemma_gauss_residual(field: &GermField) -> Result<LemmaGaussReport> {
    let ef = EigenFrames::new(field)?;
    let c = field.params.c;
    let kinds = ef.frame_fields();
    let vals: Vec<Vec<DVector<f64>>> = kinds.iter().map(|k| ef.values(k)).collect();
    let groups: Vec<usize> = kinds.iter().map(|k| ef.group_of(k)).collect();
    let n = kinds.len();
    let nabla: Vec<Vec<DVector<f64>>> =
        (0..n).map(|p| (0..n).map(|q| ef.nabla(&vals[p][0], &vals[q])).collect()).collect();
    let samples = ef.field.samples.len();
    let pair = |p: usize, q: usize| -> f64 {
        let (x, y) = (&vals[p][0], &vals[q][0]);
        let (jx, jy) = (apply_j(x), apply_j(y));
        let jxi = &ef.jxi[0];
        let (al, be) = (ef.eigenvalues[groups[p]], ef.eigenvalues[groups[q]]);
        let jxy = jx.dot(y);
        let y_jxi: Vec<f64> = (0..samples).map(|s| vals[q][s].dot(&ef.jxi[s])).collect();
        let x_jxi: Vec<f64> = (0..samples).map(|s| vals[p][s].dot(&ef.jxi[s])).collect();
        let jx_y: Vec<f64> = (0..samples).map(|s| apply_j(&vals[p][s]).dot(&vals[q][s])).collect();
        let (nxy, nyx, nxx, nyy) = (&nabla[p][q], &nabla[q][p], &nabla[p][p], &nabla[q][q]);
        (be - al) * (-c - 4.0 * al * be - 2.0 * c * jxy * jxy + 8.0 * nxy.dot(nyx) - 4.0 * nxx.dot(nyy))
            - 4.0 * c * jxy * (ef.ddir(x, &y_jxi) + ef.ddir(y, &x_jxi))
            - c * x.dot(jxi) * (3.0 * ef.ddir(y, &jx_y) + nyx.dot(&jy) - 2.0 * nxy.dot(&jy))
            - c * y.dot(jxi) * (3.0 * ef.ddir(x, &jx_y) - nxy.dot(&jx) + 2.0 * nyx.dot(&jx))
    };
    let mut max: f64 = 0.0;
    let mut pairs = 0;
    for p in 0..n {
        for q in 0..n {
            if groups[p] != groups[q] {
                max = max.max(pair(p, q).abs());
                pairs += 1;
            }
        }
    }
    Ok(LemmaGaussReport { u1_u2: pair(0, 1).abs(), u1_a: pair(0, 2).abs(), max, pairs })
}

#[derive(Debug, Clone, Serialize)]
pub struct NablaFormulaReport {
    /// `∇_{U_i} U_i`, max over `i`.
    pub ui_ui: f64,
    pub ui_uj: f64,
    pub ui_a: f64,
    pub a_ui: f64,
    /// `|∇_A A|`.
    pub a_a: f64,
    /// `⟨∇_A U_i, U_j⟩` numerically and from the closed expression, `i = 1, 2`.
    pub a_ui_coefficient: [(f64, f64); 2],
}

impl NablaFormulaReport {
    pub fn max(&self) -> f64 {
        [self.ui_ui, self.ui_uj, self.ui_a, self.a_ui, self.a_a].into_iter().fold(0.0, f64::max)
    }
}

pub fn nabla_formula_residuals(field: &GermField) -> Result<NablaFormulaReport> {
    let ef = EigenFrames::new(field)?;
    let c = field.params.c;
    let u = [ef.values(&FieldKind::U1), ef.values(&FieldKind::U2)];
    let a = ef.values(&FieldKind::A);
    let fr = &ef.frame;
    let lam = [ef.eigenvalues[fr.group1], ef.eigenvalues[fr.group2]];
    let l3 = ef.eigenvalues[ef.group3];
    let b = [fr.b1, fr.b2];
    let sign = |k: usize| if k % 2 == 0 { 1.0 } else { -1.0 };
    let mut out = NablaFormulaReport { ui_ui: 0.0, ui_uj: 0.0, ui_a: 0.0, a_ui: 0.0, a_a: 0.0, a_ui_coefficient: [(0.0, 0.0); 2] };
    for i in 0..2 {
        let j = 1 - i;
        // 1-based parities
        let (si, sj) = (sign(i + 1), sign(j + 1));
        let ui = &u[i][0];
        let (uj, a0) = (&u[j][0], &a[0]);
        let q = 3.0 * c * b[0] * b[1] / (4.0 * (l3 - lam[i]));
        let p = lam[i] - 3.0 * c * b[i] * b[i] / (4.0 * (l3 - lam[i]));
        let n_uiui = ef.nabla(ui, &u[i]);
        out.ui_ui = out.ui_ui.max((n_uiui - a0 * (sj * q)).amax());
        let n_uiuj = ef.nabla(ui, &u[j]);
        out.ui_uj = out.ui_uj.max((n_uiuj - a0 * (sj * p)).amax());
        let n_uia = ef.nabla(ui, &a);
        out.ui_a = out.ui_a.max((n_uia - ui * (si * q) - uj * (si * p)).amax());
        let coef = sj / (lam[i] - lam[j]) * (c * (2.0 * b[j] * b[j] - b[i] * b[i]) / 4.0 + (lam[j] - l3) * p);
        let n_aui = ef.nabla(a0, &u[i]);
        out.a_ui_coefficient[i] = (n_aui.dot(uj), coef);
        out.a_ui = out.a_ui.max((n_aui - uj * coef).amax());
    }
    out.a_a = ef.nabla(&a[0], &a).norm();
    Ok(out)
}

// ----- suites and refinement -------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct ResidualSuite {
    pub fd_step: f64,
    pub gauss_codazzi: GaussCodazziReport,
    pub lemma_codazzi: LemmaCodazziReport,
    pub lemma_gauss: LemmaGaussReport,
    pub nabla: NablaFormulaReport,
    pub classification: ClassificationResult,
}

impl ResidualSuite {
    /// Named residuals in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("gauss", self.gauss_codazzi.gauss),
            ("codazzi", self.gauss_codazzi.codazzi),
            ("codazzi_real_subspaces", self.lemma_codazzi.real_subspaces),
            ("codazzi_same_space", self.lemma_codazzi.same_space),
            ("codazzi_three_spaces", self.lemma_codazzi.three_spaces),
            ("lemma_gauss", self.lemma_gauss.max),
            ("nabla_ui_ui", self.nabla.ui_ui),
            ("nabla_ui_uj", self.nabla.ui_uj),
            ("nabla_ui_a", self.nabla.ui_a),
            ("nabla_a_ui", self.nabla.a_ui),
            ("nabla_a_a", self.nabla.a_a),
        ]
    }

    pub fn max(&self) -> f64 {
        self.entries().into_iter().map(|(_, v)| v).fold(0.0, f64::max)
    }
}

pub fn residual_suite(field: &GermField) -> Result<ResidualSuite> {
    let ef = EigenFrames::new(field)?;
    Ok(ResidualSuite {
        fd_step: field.fd_step,
        gauss_codazzi: gauss_codazzi_residuals(field),
        lemma_codazzi: lemma_codazzi_residuals(field)?,
        lemma_gauss: lemma_gauss_residual(field)?,
        nabla: nabla_formula_residuals(field)?,
        classification: ef.classification,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub coarse: ResidualSuite,
    pub fine: ResidualSuite,
    /// `log2(coarse / fine)`; `None` where the fine residual is below
    /// [`NOISE_FLOOR`].
    pub orders: BTreeMap<String, Option<f64>>,
    pub min_order: Option<f64>,
}

impl ConvergenceReport {
    pub fn converged(&self, order: f64) -> bool {
        self.orders.values().all(|o| o.is_none_or(|o| o >= order))
    }
}

/// Residual suites at `2 fd_step` and `fd_step`.
pub fn convergence_study(chart: &ChartImmersion, at: &[f64], options: FieldOptions) -> Result<ConvergenceReport> {
    let fine_chart = chart.clone();
    let coarse_chart = chart.with_fd_step(2.0 * chart.fd_step)?;
    let coarse = residual_suite(&GermField::build(&coarse_chart, at, options)?)?;
    let fine = residual_suite(&GermField::build(&fine_chart, at, options)?)?;
    let mut orders = BTreeMap::new();
    let mut min_order: Option<f64> = None;
    for ((name, c), (_, f)) in coarse.entries().into_iter().zip(fine.entries()) {
        let order = (f >= NOISE_FLOOR).then(|| (c / f).log2());
        if let Some(o) = order {
            min_order = Some(min_order.map_or(o, |m: f64| m.min(o)));
        }
        orders.insert(name.to_string(), order);
    }
    Ok(ConvergenceReport { coarse, fine, orders, min_order })
}
