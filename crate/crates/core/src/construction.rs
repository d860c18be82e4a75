//! Constant Kähler angle subspaces of `g_α` and the ruled minimal
//! submanifolds `W^{2n-k}_φ = S·o` they generate.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{apply_j, ModelParams, ModelSpace, IDX_B, IDX_Z};

/// Absolute tolerance for angle and closure checks.
pub const CONSTRUCTION_TOL: f64 = 1e-9;
/// Tolerance of [`rigidity_form_check`].
pub const RIGIDITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KahlerAngleSubspace {
    /// Orthonormal basis, model-basis coordinates.
    pub basis: Vec<DVector<f64>>,
    pub phi: f64,
    pub k: usize,
}

impl KahlerAngleSubspace {
    /// Max deviation of the Kähler angle from `phi` over `samples` seeded
    /// random unit vectors of the span.
    pub fn angle_deviation(&self, seed: u64, samples: usize) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let mut v = DVector::zeros(self.basis[0].len());
            for q in &self.basis {
                v.axpy(rng.gen_range(-1.0..1.0), q, 1.0);
            }
            if let Ok(angle) = kahler_angle(&v, &self.basis) {
                worst = worst.max((angle - self.phi).abs());
            }
        }
        worst
    }
}

/// Builds a `k`-dimensional subspace of `g_α` with constant Kähler angle
/// `phi`.
///
/// For `phi = π/2` this is `span{e_1, ..., e_k}`; otherwise `k` must be even
/// and the span is `span{e_{2m-1}, cos φ·Je_{2m-1} + sin φ·e_{2m}}`.
pub fn constant_kahler_angle_subspace(
    params: ModelParams,
    k: usize,
    phi: f64,
) -> Result<KahlerAngleSubspace> {
    let params = ModelParams::new(params.n, params.c)?;
    let n = params.n;
    if k == 0 {
        return Err(Error::InvalidParams("k must be at least 1".into()));
    }
    if k > n - 1 {
        return Err(Error::DimensionTooLarge { k, max: n - 1 });
    }
    if !(phi > 0.0 && phi <= FRAC_PI_2 + 1e-12) {
        return Err(Error::AngleOutOfRange(phi));
    }
    let d = params.dim();
    let unit = |i: usize| {
        let mut v = DVector::zeros(d);
        v[i] = 1.0;
        v
    };
    // slots of e_i and Je_i, 1-based i
    let e = |i: usize| unit(2 * i);
    let je = |i: usize| unit(2 * i + 1);
    let real = (phi - FRAC_PI_2).abs() <= 1e-12;
    let (basis, phi) = if real {
        ((1..=k).map(e).collect::<Vec<_>>(), FRAC_PI_2)
    } else {
        if k % 2 == 1 {
            return Err(Error::OddDimensionNonReal { k, phi });
        }
        let mut basis = Vec::with_capacity(k);
        for m in 0..k / 2 {
            let (i, i2) = (2 * m + 1, 2 * m + 2);
            basis.push(e(i));
            basis.push(je(i) * phi.cos() + e(i2) * phi.sin());
        }
        (basis, phi)
    };
    let sub = KahlerAngleSubspace { basis, phi, k };
    let dev = sub.angle_deviation(0x5eed, 64);
    if dev > CONSTRUCTION_TOL {
        return Err(Error::VerificationFailed(format!("Kähler angle deviation {dev:e}")));
    }
    Ok(sub)
}

/// Angle between `Jv` and the subspace spanned by the orthonormal `basis`.
pub fn kahler_angle(v: &DVector<f64>, basis: &[DVector<f64>]) -> Result<f64> {
    let norm = v.norm();
    if norm <= 1e-12 {
        return Err(Error::ZeroVector);
    }
    let off = (v - linalg::project(v, basis)).norm() / norm;
    if off > CONSTRUCTION_TOL {
        return Err(Error::NotInSubspace(off));
    }
    let jv = apply_j(v);
    let ratio = (linalg::project(&jv, basis).norm() / jv.norm()).clamp(0.0, 1.0);
    Ok(ratio.acos())
}

/// The submanifold `W^{2n-k}_φ`: tangent space `s = a ⊕ w ⊕ g_2α` and normal
/// space `w^⊥` at the base point `o`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmanifoldSpec {
    pub params: ModelParams,
    pub wperp: KahlerAngleSubspace,
    /// Orthonormal tangent basis ordered `(B, Z, w...)`.
    pub tangent: Vec<DVector<f64>>,
    pub zvec: DVector<f64>,
}

impl SubmanifoldSpec {
    pub fn k(&self) -> usize {
        self.wperp.k
    }

    pub fn phi(&self) -> f64 {
        self.wperp.phi
    }

    pub fn normal(&self) -> &[DVector<f64>] {
        &self.wperp.basis
    }

    pub fn model(&self) -> ModelSpace {
        ModelSpace::new(self.params).expect("spec params validated at construction")
    }

    /// Max distance of a bracket of tangent basis elements from the tangent
    /// span.
    pub fn closure_residual(&self) -> f64 {
        let model = self.model();
        let mut worst: f64 = 0.0;
        for x in &self.tangent {
            for y in &self.tangent {
                let b = model.bracket(x, y);
                worst = worst.max((&b - linalg::project(&b, &self.tangent)).amax());
            }
        }
        worst
    }

    /// Tangent part `P v` of `J v` for a normal vector `v`.
    pub fn tangent_part_of_j(&self, v: &DVector<f64>) -> DVector<f64> {
        linalg::project(&apply_j(v), &self.tangent)
    }

    /// Rows are basis vectors.
    pub fn to_json(&self) -> serde_json::Value {
        let rows = |vs: &[DVector<f64>]| -> Vec<Vec<f64>> { vs.iter().map(|v| v.as_slice().to_vec()).collect() };
        serde_json::json!({
            "n": self.params.n,
            "c": self.params.c,
            "k": self.k(),
            "phi": self.phi(),
            "tangent_basis": rows(&self.tangent),
            "normal_basis": rows(&self.wperp.basis),
            "J": crate::spectral::matrix_rows(&self.params.j_matrix()),
        })
    }
}

pub fn build_submanifold(params: ModelParams, k: usize, phi: f64) -> Result<SubmanifoldSpec> {
    params.half_root()?;
    let wperp = constant_kahler_angle_subspace(params, k, phi)?;
    let d = params.dim();
    let unit = |i: usize| {
        let mut v = DVector::zeros(d);
        v[i] = 1.0;
        v
    };
    let mut seeds = wperp.basis.clone();
    seeds.extend((2..d).map(unit));
    let w = linalg::gram_schmidt(&seeds, 1e-8).split_off(k);
    let mut tangent = vec![unit(IDX_B), unit(IDX_Z)];
    tangent.extend(w);
    let spec = SubmanifoldSpec { params, wperp, tangent, zvec: unit(IDX_Z) };
    if spec.tangent.len() != 2 * params.n - k {
        return Err(Error::VerificationFailed("tangent dimension mismatch".into()));
    }
    let closure = spec.closure_residual();
    if closure > CONSTRUCTION_TOL {
        return Err(Error::VerificationFailed(format!("tangent space not a subalgebra ({closure:e})")));
    }
    Ok(spec)
}

/// Second fundamental form at `o`: `tensor[m][(i, j)] = ⟨II(t_i, t_j), ξ_m⟩`
/// for the tangent basis `t` and normal basis `ξ` of the spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondFundamentalForm {
    pub tensor: Vec<DMatrix<f64>>,
}

impl SecondFundamentalForm {
    /// Shape operator `S_η` in the tangent basis, `η = Σ eta[m] ξ_m`.
    pub fn shape_operator(&self, eta: &[f64]) -> DMatrix<f64> {
        let dim = self.tensor[0].nrows();
        let mut s = DMatrix::zeros(dim, dim);
        for (m, t) in self.tensor.iter().enumerate() {
            s += t * eta[m];
        }
        s
    }

    /// Normal-coordinate vector of the trace.
    pub fn trace(&self) -> Vec<f64> {
        self.tensor.iter().map(|t| t.trace()).collect()
    }

    pub fn symmetry_residual(&self) -> f64 {
        self.tensor.iter().map(|t| (t - t.transpose()).amax()).fold(0.0, f64::max)
    }
}

pub fn orbit_second_fundamental_form(spec: &SubmanifoldSpec) -> SecondFundamentalForm {
    let model = spec.model();
    let dim = spec.tangent.len();
    let tensor = spec
        .normal()
        .iter()
        .map(|xi| {
            DMatrix::from_fn(dim, dim, |i, j| model.koszul(&spec.tangent[i], &spec.tangent[j]).dot(xi))
        })
        .collect();
    SecondFundamentalForm { tensor }
}

/// The trivial symmetric bilinear extension of
/// `II(Z, P̂ξ) = sin φ (√−c/2) ξ`, `P̂ξ` the unit tangent part of `Jξ`.
pub fn expected_second_fundamental_form(spec: &SubmanifoldSpec) -> SecondFundamentalForm {
    let a = spec.params.half_root().expect("spec requires c < 0");
    let scale = spec.phi().sin() * a;
    let dim = spec.tangent.len();
    let zc: Vec<f64> = spec.tangent.iter().map(|t| t.dot(&spec.zvec)).collect();
    let tensor = spec
        .normal()
        .iter()
        .map(|xi| {
            let p = spec.tangent_part_of_j(xi);
            let p = p.normalize();
            let pc: Vec<f64> = spec.tangent.iter().map(|t| t.dot(&p)).collect();
            DMatrix::from_fn(dim, dim, |i, j| scale * (zc[i] * pc[j] + zc[j] * pc[i]))
        })
        .collect();
    SecondFundamentalForm { tensor }
}

#[derive(Debug, Clone, Serialize)]
pub struct RigidityReport {
    pub pass: bool,
    pub residual: f64,
    pub trace_norm: f64,
    /// The nonzero entry magnitude `sin φ (√−c/2)`.
    pub entry: f64,
}

/// Compares `ii` with the trivial symmetric bilinear extension for `spec`.
pub fn rigidity_form_check(ii: &SecondFundamentalForm, spec: &SubmanifoldSpec) -> RigidityReport {
    let expected = expected_second_fundamental_form(spec);
    let mut residual: f64 = 0.0;
    if ii.tensor.len() != expected.tensor.len() {
        residual = f64::INFINITY;
    } else {
        for (a, b) in ii.tensor.iter().zip(&expected.tensor) {
            residual = residual.max(if a.shape() == b.shape() { (a - b).amax() } else { f64::INFINITY });
        }
    }
    let trace_norm = ii.trace().iter().map(|t| t * t).sum::<f64>().sqrt();
    let entry = spec.phi().sin() * spec.params.half_root().unwrap_or(f64::NAN);
    RigidityReport { pass: residual < RIGIDITY_TOL && trace_norm < RIGIDITY_TOL, residual, trace_norm, entry }
}
