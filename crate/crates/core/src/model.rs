//! The solvable (Iwasawa) model `AN` of complex hyperbolic space `CH^n(c)`.
//!
//! Lie algebra elements are coordinate vectors of length `2n` in the
//! orthonormal basis `(B, Z, e_1, Je_1, ..., e_{n-1}, Je_{n-1})` of
//! `a ⊕ g_2α ⊕ g_α`. Points use the global chart `p = n(u, z) · exp(sB)`,
//! stored in the same slot order `(s, z, u_1, ..., u_{2n-2})`. Tangent
//! vectors are stored in the left-invariant frame, which is orthonormal, so
//! every inner product below is Euclidean in frame components.
//!
//! With `a = √−c / 2` the structure constants are
//! `[B, U] = aU`, `[B, Z] = 2aZ`, `[U, V] = 2a⟨JU, V⟩Z`, which makes the
//! holomorphic sectional curvature exactly `c`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode;

pub type AlgebraElement = DVector<f64>;

/// Slot of `B` (and of the `A`-coordinate `s`).
pub const IDX_B: usize = 0;
/// Slot of `Z` (and of the centre coordinate `z`).
pub const IDX_Z: usize = 1;

/// Tolerance of the curvature calibration gate.
pub const CURVATURE_TOL: f64 = 1e-10;
/// Default geodesic / transport integration step.
pub const DEFAULT_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Complex dimension.
    pub n: usize,
    /// Constant holomorphic sectional curvature.
    pub c: f64,
}

impl ModelParams {
    pub fn new(n: usize, c: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParams(format!("n must be at least 2, got {n}")));
        }
        if c == 0.0 || !c.is_finite() {
            return Err(Error::InvalidParams(format!("c must be finite and nonzero, got {c}")));
        }
        Ok(Self { n, c })
    }

    /// Real dimension `2n`.
    pub fn dim(&self) -> usize {
        2 * self.n
    }

    /// `√−c / 2`, the root-space constant.
    pub fn half_root(&self) -> Result<f64> {
        if self.c < 0.0 {
            Ok((-self.c).sqrt() / 2.0)
        } else {
            Err(Error::RequiresNegativeCurvature(self.c))
        }
    }

    pub fn j_matrix(&self) -> DMatrix<f64> {
        j_matrix(self.n)
    }

    /// Closed-form curvature tensor of a complex space form,
    /// `R(X,Y)Z = c/4 (⟨Y,Z⟩X − ⟨X,Z⟩Y + ⟨JY,Z⟩JX − ⟨JX,Z⟩JY − 2⟨JX,Y⟩JZ)`,
    /// for vectors given in an orthonormal frame in which `J` acts as
    /// [`j_matrix`]. Valid for either sign of `c`.
    pub fn curvature(&self, x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
        let jx = apply_j(x);
        let jy = apply_j(y);
        let jz = apply_j(z);
        let mut out = x * y.dot(z) - y * x.dot(z);
        out += &jx * jy.dot(z);
        out -= &jy * jx.dot(z);
        out -= jz * (2.0 * jx.dot(y));
        out * (self.c / 4.0)
    }
}

/// Matrix of the complex structure in the model basis.
pub fn j_matrix(n: usize) -> DMatrix<f64> {
    let d = 2 * n;
    let mut j = DMatrix::zeros(d, d);
    j[(IDX_Z, IDX_B)] = 1.0;
    j[(IDX_B, IDX_Z)] = -1.0;
    for i in 0..n - 1 {
        let e = 2 + 2 * i;
        j[(e + 1, e)] = 1.0;
        j[(e, e + 1)] = -1.0;
    }
    j
}

/// `J` applied to a vector in the model basis.
pub fn apply_j(v: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(v.len());
    out[IDX_Z] = v[IDX_B];
    out[IDX_B] = -v[IDX_Z];
    let mut e = 2;
    while e + 1 < v.len() {
        out[e + 1] = v[e];
        out[e] = -v[e + 1];
        e += 2;
    }
    out
}

/// A point of `AN` in global solvable coordinates `(s, z, u)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub coords: DVector<f64>,
}

impl Point {
    pub fn new(coords: DVector<f64>) -> Self {
        Self { coords }
    }

    fn same_as(&self, other: &Point) -> bool {
        self.coords.len() == other.coords.len()
            && (&self.coords - &other.coords).amax() <= 1e-12 * (1.0 + self.coords.amax())
    }
}

/// A tangent vector, stored in the left-invariant frame at `base`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentVector {
    pub base: Point,
    pub vec: DVector<f64>,
}

impl TangentVector {
    pub fn norm(&self) -> f64 {
        self.vec.norm()
    }
}

/// Result of integrating a geodesic while parallel transporting a set of
/// vectors along it.
#[derive(Debug, Clone)]
pub struct GeodesicTransport {
    pub point: Point,
    pub velocity: TangentVector,
    /// Transported vectors, frame components at `point`.
    pub carried: Vec<DVector<f64>>,
}

/// Summary of the curvature calibration run.
#[derive(Debug, Clone, Serialize)]
pub struct CurvatureReport {
    pub samples: usize,
    /// max |R_koszul − R_closed| over sampled triples.
    pub max_residual: f64,
    /// Torsion-freeness residual over basis pairs.
    pub torsion_residual: f64,
    /// Metric-compatibility residual over basis triples.
    pub metric_residual: f64,
    /// max |∇J| over basis pairs.
    pub kahler_residual: f64,
    pub min_sectional: f64,
    pub max_sectional: f64,
    /// max |K(X, JX) − c|.
    pub holomorphic_deviation: f64,
    /// max |K(X, Y) − c/4| over totally real planes.
    pub totally_real_deviation: f64,
}

/// `CH^n(c)` realized as the solvable group `AN` with its left-invariant
/// metric.
#[derive(Debug, Clone)]
pub struct ModelSpace {
    params: ModelParams,
    a: f64,
    dim: usize,
    // ⟨[e_i, e_j], e_k⟩ at index (i * d + j) * d + k
    brackets: Vec<f64>,
    // ⟨∇_{e_i} e_j, e_k⟩, same layout
    christoffel: Vec<f64>,
}

impl ModelSpace {
    pub fn new(params: ModelParams) -> Result<Self> {
        let params = ModelParams::new(params.n, params.c)?;
        let a = params.half_root()?;
        let d = params.dim();
        let mut brackets = vec![0.0; d * d * d];
        let idx = |i: usize, j: usize, k: usize| (i * d + j) * d + k;
        for u in 2..d {
            brackets[idx(IDX_B, u, u)] = a;
            brackets[idx(u, IDX_B, u)] = -a;
        }
        brackets[idx(IDX_B, IDX_Z, IDX_Z)] = 2.0 * a;
        brackets[idx(IDX_Z, IDX_B, IDX_Z)] = -2.0 * a;
        let mut e = 2;
        while e + 1 < d {
            // [e_i, Je_i] = 2a⟨Je_i, Je_i⟩ Z
            brackets[idx(e, e + 1, IDX_Z)] = 2.0 * a;
            brackets[idx(e + 1, e, IDX_Z)] = -2.0 * a;
            e += 2;
        }
        let mut christoffel = vec![0.0; d * d * d];
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    christoffel[idx(i, j, k)] = 0.5
                        * (brackets[idx(i, j, k)] - brackets[idx(j, k, i)] + brackets[idx(k, i, j)]);
                }
            }
        }
        Ok(Self { params, a, dim: d, brackets, christoffel })
    }

    pub fn params(&self) -> ModelParams {
        self.params
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `√−c / 2`.
    pub fn half_root(&self) -> f64 {
        self.a
    }

    pub fn basis(&self, i: usize) -> AlgebraElement {
        let mut v = DVector::zeros(self.dim);
        v[i] = 1.0;
        v
    }

    pub fn b(&self) -> AlgebraElement {
        self.basis(IDX_B)
    }

    pub fn z(&self) -> AlgebraElement {
        self.basis(IDX_Z)
    }

    /// `e_i` of `g_α`, 1-based as in `e_1, ..., e_{n-1}`.
    pub fn e(&self, i: usize) -> AlgebraElement {
        assert!(i >= 1 && i < self.params.n, "e_{i} out of range");
        self.basis(2 * i)
    }

    /// `Je_i`, 1-based.
    pub fn je(&self, i: usize) -> AlgebraElement {
        assert!(i >= 1 && i < self.params.n, "Je_{i} out of range");
        self.basis(2 * i + 1)
    }

    pub fn j_matrix(&self) -> DMatrix<f64> {
        j_matrix(self.params.n)
    }

    pub fn j_action(&self, x: &AlgebraElement) -> AlgebraElement {
        apply_j(x)
    }

    fn bilinear(&self, table: &[f64], x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        let d = self.dim;
        let mut out = DVector::zeros(d);
        for i in 0..d {
            if x[i] == 0.0 {
                continue;
            }
            for j in 0..d {
                let w = x[i] * y[j];
                if w == 0.0 {
                    continue;
                }
                let base = (i * d + j) * d;
                for k in 0..d {
                    out[k] += w * table[base + k];
                }
            }
        }
        out
    }

    pub fn bracket(&self, x: &AlgebraElement, y: &AlgebraElement) -> AlgebraElement {
        self.bilinear(&self.brackets, x, y)
    }

    /// Levi-Civita connection on left-invariant fields, from the Koszul
    /// formula `2⟨∇_X Y, W⟩ = ⟨[X,Y],W⟩ − ⟨[Y,W],X⟩ + ⟨[W,X],Y⟩`.
    pub fn koszul(&self, x: &AlgebraElement, y: &AlgebraElement) -> AlgebraElement {
        self.bilinear(&self.christoffel, x, y)
    }

    /// `R(X,Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_[X,Y] Z` on left-invariant fields.
    pub fn curvature_from_koszul(
        &self,
        x: &AlgebraElement,
        y: &AlgebraElement,
        z: &AlgebraElement,
    ) -> AlgebraElement {
        let yz = self.koszul(y, z);
        let xz = self.koszul(x, z);
        self.koszul(x, &yz) - self.koszul(y, &xz) - self.koszul(&self.bracket(x, y), z)
    }

    /// Closed-form curvature on tangent vectors at a common point.
    pub fn curvature_closed_form(
        &self,
        x: &TangentVector,
        y: &TangentVector,
        z: &TangentVector,
    ) -> Result<TangentVector> {
        if !x.base.same_as(&y.base) || !x.base.same_as(&z.base) {
            return Err(Error::MismatchedBasePoints);
        }
        Ok(TangentVector { base: x.base.clone(), vec: self.params.curvature(&x.vec, &y.vec, &z.vec) })
    }

    /// Sectional curvature of the plane spanned by `x`, `y`.
    pub fn sectional_curvature(&self, x: &AlgebraElement, y: &AlgebraElement) -> f64 {
        let num = self.curvature_from_koszul(x, y, y).dot(x);
        let den = x.norm_squared() * y.norm_squared() - x.dot(y).powi(2);
        num / den
    }

    /// Runs the calibration gate: Koszul curvature against the closed form
    /// on `samples` seeded random triples, plus pinching and structural
    /// checks.
    pub fn verify_curvature(&self, seed: u64, samples: usize) -> Result<CurvatureReport> {
        let d = self.dim;
        let c = self.params.c;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let random = |rng: &mut ChaCha8Rng| -> DVector<f64> {
            DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0))
        };

        let mut torsion: f64 = 0.0;
        let mut metric: f64 = 0.0;
        let mut kahler: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let (x, y) = (self.basis(i), self.basis(j));
                let t = self.koszul(&x, &y) - self.koszul(&y, &x) - self.bracket(&x, &y);
                torsion = torsion.max(t.amax());
                let dj = self.koszul(&x, &apply_j(&y)) - apply_j(&self.koszul(&x, &y));
                kahler = kahler.max(dj.amax());
                for k in 0..d {
                    let z = self.basis(k);
                    let m = self.koszul(&x, &y).dot(&z) + y.dot(&self.koszul(&x, &z));
                    metric = metric.max(m.abs());
                }
            }
        }

        let mut max_residual: f64 = 0.0;
        let mut min_sec = f64::INFINITY;
        let mut max_sec = f64::NEG_INFINITY;
        let mut holo: f64 = 0.0;
        let mut real: f64 = 0.0;
        for _ in 0..samples {
            let (x, y, z) = (random(&mut rng), random(&mut rng), random(&mut rng));
            let lhs = self.curvature_from_koszul(&x, &y, &z);
            let rhs = self.params.curvature(&x, &y, &z);
            let res = (&lhs - &rhs).amax();
            if res > CURVATURE_TOL || !res.is_finite() {
                return Err(Error::VerificationFailed(format!(
                    "curvature mismatch {res:e} at X={:?}, Y={:?}, Z={:?}",
                    x.as_slice(),
                    y.as_slice(),
                    z.as_slice()
                )));
            }
            max_residual = max_residual.max(res);

            let k = self.sectional_curvature(&x, &y);
            min_sec = min_sec.min(k);
            max_sec = max_sec.max(k);

            let xu = x.normalize();
            holo = holo.max((self.sectional_curvature(&xu, &apply_j(&xu)) - c).abs());

            let jx = apply_j(&xu);
            let mut w = y.clone() - &xu * y.dot(&xu) - &jx * y.dot(&jx);
            w.normalize_mut();
            real = real.max((self.sectional_curvature(&xu, &w) - c / 4.0).abs());
        }
        if min_sec < c - 1e-9 || max_sec > c / 4.0 + 1e-9 {
            return Err(Error::VerificationFailed(format!(
                "sectional curvature range [{min_sec}, {max_sec}] outside [{c}, {}]",
                c / 4.0
            )));
        }
        if holo > CURVATURE_TOL || real > CURVATURE_TOL {
            return Err(Error::VerificationFailed(format!(
                "holomorphic deviation {holo:e}, totally real deviation {real:e}"
            )));
        }
        Ok(CurvatureReport {
            samples,
            max_residual,
            torsion_residual: torsion,
            metric_residual: metric,
            kahler_residual: kahler,
            min_sectional: min_sec,
            max_sectional: max_sec,
            holomorphic_deviation: holo,
            totally_real_deviation: real,
        })
    }

    // ----- group structure ------------------------------------------------

    pub fn identity(&self) -> Point {
        Point::new(DVector::zeros(self.dim))
    }

    /// `⟨Ju, v⟩` for `u`, `v` in the `g_α` slots of a coordinate vector.
    fn omega(u: &[f64], v: &[f64]) -> f64 {
        let mut acc = 0.0;
        let mut e = 2;
        while e + 1 < u.len() {
            // Ju = (−u_{Je}, u_e) on the pair
            acc += -u[e + 1] * v[e] + u[e] * v[e + 1];
            e += 2;
        }
        acc
    }

    /// Group law of `N ⋊ A` in the global chart.
    pub fn group_multiply(&self, p: &Point, q: &Point) -> Point {
        let a = self.a;
        let (s1, s2) = (p.coords[IDX_B], q.coords[IDX_B]);
        let e1 = (a * s1).exp();
        let mut out = DVector::zeros(self.dim);
        out[IDX_B] = s1 + s2;
        let mut scaled = q.coords.clone();
        for i in 2..self.dim {
            scaled[i] *= e1;
            out[i] = p.coords[i] + scaled[i];
        }
        out[IDX_Z] = p.coords[IDX_Z]
            + e1 * e1 * q.coords[IDX_Z]
            + a * Self::omega(p.coords.as_slice(), scaled.as_slice());
        Point::new(out)
    }

    pub fn inverse(&self, p: &Point) -> Point {
        let a = self.a;
        let s = p.coords[IDX_B];
        let mut out = DVector::zeros(self.dim);
        out[IDX_B] = -s;
        out[IDX_Z] = -(-2.0 * a * s).exp() * p.coords[IDX_Z];
        for i in 2..self.dim {
            out[i] = -(-a * s).exp() * p.coords[i];
        }
        Point::new(out)
    }

    /// Coordinate components of the left-invariant frame at `p` (columns).
    pub fn frame_matrix(&self, p: &Point) -> DMatrix<f64> {
        let a = self.a;
        let s = p.coords[IDX_B];
        let (e1, e2) = ((a * s).exp(), (2.0 * a * s).exp());
        let u = p.coords.as_slice();
        let mut m = DMatrix::zeros(self.dim, self.dim);
        m[(IDX_B, IDX_B)] = 1.0;
        m[(IDX_Z, IDX_Z)] = e2;
        for j in 2..self.dim {
            m[(j, j)] = e1;
            let mut basis = vec![0.0; self.dim];
            basis[j] = 1.0;
            m[(IDX_Z, j)] = e1 * a * Self::omega(u, &basis);
        }
        m
    }

    /// Converts a coordinate vector at `p` into left-invariant frame
    /// components (inverse of [`Self::frame_matrix`]).
    pub fn to_frame(&self, p: &Point, dp: &DVector<f64>) -> DVector<f64> {
        let a = self.a;
        let s = p.coords[IDX_B];
        let (e1, e2) = ((a * s).exp(), (2.0 * a * s).exp());
        let mut w = DVector::zeros(self.dim);
        w[IDX_B] = dp[IDX_B];
        for j in 2..self.dim {
            w[j] = dp[j] / e1;
        }
        w[IDX_Z] = (dp[IDX_Z] - a * Self::omega(p.coords.as_slice(), dp.as_slice())) / e2;
        w
    }

    /// Riemannian metric at `p` in global coordinates.
    pub fn metric_at(&self, p: &Point) -> DMatrix<f64> {
        let inv = self
            .frame_matrix(p)
            .try_inverse()
            .expect("frame matrix is always invertible");
        inv.transpose() * inv
    }

    /// Coordinate Jacobian of the left translation `q ↦ p·q` (independent
    /// of `q`).
    pub fn left_translation_jacobian(&self, p: &Point) -> DMatrix<f64> {
        let a = self.a;
        let s = p.coords[IDX_B];
        let (e1, e2) = ((a * s).exp(), (2.0 * a * s).exp());
        let mut m = DMatrix::zeros(self.dim, self.dim);
        m[(IDX_B, IDX_B)] = 1.0;
        m[(IDX_Z, IDX_Z)] = e2;
        let ju = apply_j(&p.coords);
        for j in 2..self.dim {
            m[(j, j)] = e1;
            m[(IDX_Z, j)] = a * e1 * ju[j];
        }
        m
    }

    /// Differential of the left translation by `p` applied to an algebra
    /// element: the tangent vector at `p` whose frame components are `v`.
    pub fn left_translate_differential(&self, p: &Point, v: &AlgebraElement) -> TangentVector {
        TangentVector { base: p.clone(), vec: v.clone() }
    }

    // ----- geodesics ------------------------------------------------------

    fn check_step(step: f64) -> Result<()> {
        if step > 0.0 && step.is_finite() {
            Ok(())
        } else {
            Err(Error::NonPositiveStep(step))
        }
    }

    /// Integrates the geodesic with initial velocity `v` for parameter time
    /// `t`, parallel transporting every vector of `carried` along it.
    pub fn transport_along_geodesic(
        &self,
        v: &TangentVector,
        carried: &[DVector<f64>],
        t: f64,
        step: f64,
    ) -> Result<GeodesicTransport> {
        Self::check_step(step)?;
        if v.vec.norm() <= 1e-300 {
            return Err(Error::ZeroVector);
        }
        let d = self.dim;
        let mut state = Vec::with_capacity(d * (2 + carried.len()));
        state.extend_from_slice(v.base.coords.as_slice());
        state.extend_from_slice(v.vec.as_slice());
        for w in carried {
            state.extend_from_slice(w.as_slice());
        }
        let steps = ode::step_count(t, step);
        ode::rk4(&mut state, t, steps, |y, dy| self.geodesic_rhs(y, dy));
        let point = Point::new(DVector::from_column_slice(&state[0..d]));
        let velocity =
            TangentVector { base: point.clone(), vec: DVector::from_column_slice(&state[d..2 * d]) };
        let carried = (0..carried.len())
            .map(|m| DVector::from_column_slice(&state[(2 + m) * d..(3 + m) * d]))
            .collect();
        Ok(GeodesicTransport { point, velocity, carried })
    }

    fn geodesic_rhs(&self, y: &[f64], dy: &mut [f64]) {
        let d = self.dim;
        let a = self.a;
        let s = y[IDX_B];
        let (e1, e2) = ((a * s).exp(), (2.0 * a * s).exp());
        let p = &y[0..d];
        let w = &y[d..2 * d];
        // position: E(p) w
        dy[IDX_B] = w[IDX_B];
        for j in 2..d {
            dy[j] = e1 * w[j];
        }
        dy[IDX_Z] = e2 * w[IDX_Z] + e1 * a * Self::omega(p, w);
        // velocity and carried vectors: v' = −Γ(w, v)
        let blocks = y.len() / d - 1;
        for m in 0..blocks {
            let off = (1 + m) * d;
            for k in 0..d {
                dy[off + k] = 0.0;
            }
            for i in 0..d {
                if w[i] == 0.0 {
                    continue;
                }
                for j in 0..d {
                    let vj = y[off + j];
                    if vj == 0.0 {
                        continue;
                    }
                    let base = (i * d + j) * d;
                    let wv = w[i] * vj;
                    for k in 0..d {
                        dy[off + k] -= wv * self.christoffel[base + k];
                    }
                }
            }
        }
    }

    /// Position and velocity at parameter `t` along the geodesic with
    /// initial velocity `v`.
    pub fn geodesic(&self, v: &TangentVector, t: f64, step: f64) -> Result<(Point, TangentVector)> {
        let out = self.transport_along_geodesic(v, &[], t, step)?;
        Ok((out.point, out.velocity))
    }

    /// Parallel transport of `w` (frame components at the base of
    /// `velocity`) along the geodesic with initial velocity `velocity`.
    pub fn parallel_transport(
        &self,
        velocity: &TangentVector,
        w: &AlgebraElement,
        t: f64,
        step: f64,
    ) -> Result<TangentVector> {
        let out = self.transport_along_geodesic(velocity, std::slice::from_ref(w), t, step)?;
        Ok(TangentVector { base: out.point, vec: out.carried[0].clone() })
    }
}

/// Drift of the first integrals along sampled geodesics.
#[derive(Debug, Clone, Serialize)]
pub struct GeodesicReport {
    pub samples: usize,
    pub t: f64,
    pub step: f64,
    /// max |(|γ̇(t)| − |γ̇(0)|)|.
    pub speed_drift: f64,
    /// max |⟨P v, P w⟩ − ⟨v, w⟩| over transported pairs.
    pub inner_product_drift: f64,
    /// max |P(Jv) − J P(v)|.
    pub j_commutation: f64,
    /// max |P(γ̇(0)) − γ̇(t)|.
    pub self_parallel: f64,
}

impl GeodesicReport {
    pub fn max(&self) -> f64 {
        self.speed_drift.max(self.inner_product_drift).max(self.j_commutation).max(self.self_parallel)
    }
}

impl ModelSpace {
    /// Integrates `samples` seeded geodesics from random base points for time
    /// `t`, transporting a few vectors along each.
    pub fn verify_geodesics(&self, seed: u64, samples: usize, t: f64, step: f64) -> Result<GeodesicReport> {
        Self::check_step(step)?;
        let d = self.dim;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut random = |scale: f64| DVector::from_fn(d, |_, _| rng.gen_range(-scale..scale));
        let mut report = GeodesicReport {
            samples,
            t,
            step,
            speed_drift: 0.0,
            inner_product_drift: 0.0,
            j_commutation: 0.0,
            self_parallel: 0.0,
        };
        for _ in 0..samples {
            let base = Point::new(random(0.5));
            let v = random(1.0).normalize();
            let w1 = random(1.0);
            let w2 = random(1.0);
            let carried = [v.clone(), w1.clone(), w2.clone(), apply_j(&w1)];
            let out = self.transport_along_geodesic(&TangentVector { base, vec: v.clone() }, &carried, t, step)?;
            let vel = &out.velocity.vec;
            let [pv, p1, p2, pj] = [&out.carried[0], &out.carried[1], &out.carried[2], &out.carried[3]];
            report.speed_drift = report.speed_drift.max((vel.norm() - 1.0).abs());
            report.self_parallel = report.self_parallel.max((pv - vel).amax());
            report.inner_product_drift = report
                .inner_product_drift
                .max((p1.dot(p2) - w1.dot(&w2)).abs())
                .max((p1.dot(p1) - w1.dot(&w1)).abs());
            report.j_commutation = report.j_commutation.max((pj - apply_j(p1)).amax());
        }
        Ok(report)
    }
}
