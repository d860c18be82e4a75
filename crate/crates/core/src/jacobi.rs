//! Jacobi fields along normal geodesics: closed-form coefficients, the
//! focal matrices `D(t)` and `C(r)`, tube shape operators around
//! `W^{2n-k}_φ` and focal ranks.

use nalgebra::{DMatrix, DVector, Matrix2};
use serde::Serialize;

use crate::construction::{orbit_second_fundamental_form, SubmanifoldSpec};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{ModelParams, Point, TangentVector, DEFAULT_STEP};
use crate::ode;
use crate::spectral::{EigenStructure, HopfFrame, HypersurfaceGerm};

/// Largest tube radius accepted by the integrators.
pub const MAX_RADIUS: f64 = 3.0;

fn half_root(c: f64) -> Result<f64> {
    if c < 0.0 {
        Ok((-c).sqrt() / 2.0)
    } else {
        Err(Error::RequiresNegativeCurvature(c))
    }
}

/// Closed-form Jacobi coefficients for a principal curvature `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JacobiCoefficients {
    pub lambda: f64,
    pub c: f64,
    a: f64,
}

impl JacobiCoefficients {
    pub fn new(lambda: f64, c: f64) -> Result<Self> {
        Ok(Self { lambda, c, a: half_root(c)? })
    }

    /// `f(t) = cosh(at) − (λ/a) sinh(at)`, `a = √−c/2`.
    pub fn f(&self, t: f64) -> f64 {
        let x = self.a * t;
        x.cosh() - self.lambda / self.a * x.sinh()
    }

    pub fn f_prime(&self, t: f64) -> f64 {
        let x = self.a * t;
        self.a * x.sinh() - self.lambda * x.cosh()
    }

    /// `g(t) = (cosh(at) − 1)(1 + 2cosh(at) − (λ/a) sinh(at))`.
    pub fn g(&self, t: f64) -> f64 {
        let x = self.a * t;
        let (ch, sh) = (x.cosh(), x.sinh());
        (ch - 1.0) * (1.0 + 2.0 * ch - self.lambda / self.a * sh)
    }

    pub fn g_prime(&self, t: f64) -> f64 {
        let x = self.a * t;
        let (ch, sh) = (x.cosh(), x.sinh());
        self.a * sh * (1.0 + 2.0 * ch - self.lambda / self.a * sh)
            + (ch - 1.0) * (2.0 * self.a * sh - self.lambda * ch)
    }

    /// Residuals `(4f'' + cf, 4g'' + 4cg + 3cf)` at `t` by central
    /// differences of the analytic first derivatives with step `h`.
    pub fn ode_residuals(&self, t: f64, h: f64) -> (f64, f64) {
        let fpp = (self.f_prime(t + h) - self.f_prime(t - h)) / (2.0 * h);
        let gpp = (self.g_prime(t + h) - self.g_prime(t - h)) / (2.0 * h);
        let c = self.c;
        (4.0 * fpp + c * self.f(t), 4.0 * gpp + 4.0 * c * self.g(t) + 3.0 * c * self.f(t))
    }
}

pub fn f_function(lambda: f64, c: f64, t: f64) -> Result<f64> {
    Ok(JacobiCoefficients::new(lambda, c)?.f(t))
}

pub fn g_function(lambda: f64, c: f64, t: f64) -> Result<f64> {
    Ok(JacobiCoefficients::new(lambda, c)?.g(t))
}

/// Coefficients of `ζ_v(t) = f(t) B_v(t) + ⟨v, Jξ⟩ g(t) Jγ̇(t)` for `v` in
/// the `λ`-eigenspace: `(f(t), ⟨v, Jξ⟩ g(t))`.
pub fn jacobi_closed(lambda: f64, v_dot_jxi: f64, c: f64, t: f64) -> Result<(f64, f64)> {
    let j = JacobiCoefficients::new(lambda, c)?;
    Ok((j.f(t), v_dot_jxi * j.g(t)))
}

/// Matrix of `v ↦ R̄(v, ξ)ξ` in an orthonormal frame.
pub fn jacobi_operator(params: &ModelParams, xi: &DVector<f64>) -> DMatrix<f64> {
    let d = params.dim();
    let mut k = DMatrix::zeros(d, d);
    for j in 0..d {
        let mut e = DVector::zeros(d);
        e[j] = 1.0;
        k.set_column(j, &params.curvature(&e, xi, xi));
    }
    k
}

/// Integrates `Y'' = −K Y` (`K` constant) for a block of columns.
fn integrate_linear(k: &DMatrix<f64>, y0: &DMatrix<f64>, yp0: &DMatrix<f64>, t: f64, step: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::NonPositiveStep(step));
    }
    let (d, m) = y0.shape();
    let mut state = Vec::with_capacity(2 * d * m);
    state.extend_from_slice(y0.as_slice());
    state.extend_from_slice(yp0.as_slice());
    let half = d * m;
    ode::rk4(&mut state, t, ode::step_count(t, step), |s, ds| {
        ds[..half].copy_from_slice(&s[half..]);
        for col in 0..m {
            for i in 0..d {
                let mut acc = 0.0;
                for j in 0..d {
                    acc += k[(i, j)] * s[col * d + j];
                }
                ds[half + col * d + i] = -acc;
            }
        }
    });
    let y = DMatrix::from_column_slice(d, m, &state[..half]);
    let yp = DMatrix::from_column_slice(d, m, &state[half..]);
    Ok((y, yp))
}

/// Integrates the Jacobi equation `ζ'' + R̄(ζ, γ̇)γ̇ = 0` along the geodesic
/// with unit initial velocity `xi`, in a parallel frame. For `ζ ⟂ γ̇` this
/// reads `4ζ'' + cζ + 3c⟨ζ, Jγ̇⟩Jγ̇ = 0`.
pub fn jacobi_ode_oracle(
    params: &ModelParams,
    xi: &DVector<f64>,
    zeta0: &DVector<f64>,
    zeta_prime0: &DVector<f64>,
    t: f64,
    step: f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let k = jacobi_operator(params, xi);
    let y0 = DMatrix::from_column_slice(zeta0.len(), 1, zeta0.as_slice());
    let yp0 = DMatrix::from_column_slice(zeta0.len(), 1, zeta_prime0.as_slice());
    let (y, yp) = integrate_linear(&k, &y0, &yp0, t, step)?;
    Ok((y.column(0).into_owned(), yp.column(0).into_owned()))
}

/// `D(t)` with rows/columns indexed by `(u1, u2)`.
pub fn d_matrix(t: f64, b1: f64, b2: f64, lambda1: f64, lambda2: f64, c: f64) -> Result<Matrix2<f64>> {
    let j1 = JacobiCoefficients::new(lambda1, c)?;
    let j2 = JacobiCoefficients::new(lambda2, c)?;
    let b12 = b1 * b2;
    Ok(Matrix2::new(
        j1.f(t) + b1 * b1 * j1.g(t),
        b12 * j2.g(t),
        b12 * j1.g(t),
        j2.f(t) + b2 * b2 * j2.g(t),
    ))
}

pub fn d_prime_matrix(t: f64, b1: f64, b2: f64, lambda1: f64, lambda2: f64, c: f64) -> Result<Matrix2<f64>> {
    let j1 = JacobiCoefficients::new(lambda1, c)?;
    let j2 = JacobiCoefficients::new(lambda2, c)?;
    let b12 = b1 * b2;
    Ok(Matrix2::new(
        j1.f_prime(t) + b1 * b1 * j1.g_prime(t),
        b12 * j2.g_prime(t),
        b12 * j1.g_prime(t),
        j2.f_prime(t) + b2 * b2 * j2.g_prime(t),
    ))
}

/// `D(t)` for a catalog record.
pub fn d_matrix_for(es: &EigenStructure, c: f64, t: f64) -> Result<Matrix2<f64>> {
    d_matrix(t, es.b1, es.b2, es.lambda1, es.lambda2, c)
}

/// `sech³(t√−c/2)`.
pub fn sech_cubed(t: f64, c: f64) -> Result<f64> {
    let a = half_root(c)?;
    Ok((a * t).cosh().powi(-3))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CMatrix {
    /// `−D'(r) D(r)⁻¹`.
    pub numeric: Matrix2<f64>,
    /// `(√−c/2) [[−2b1b2, b1²−b2²], [b1²−b2², 2b1b2]]`.
    pub closed: Matrix2<f64>,
    /// Max entrywise difference.
    pub difference: f64,
}

pub fn c_closed_form(b1: f64, b2: f64, c: f64) -> Result<Matrix2<f64>> {
    let a = half_root(c)?;
    let d = b1 * b1 - b2 * b2;
    Ok(Matrix2::new(-2.0 * b1 * b2, d, d, 2.0 * b1 * b2) * a)
}

pub fn c_matrix(r: f64, b1: f64, b2: f64, lambda1: f64, lambda2: f64, c: f64) -> Result<CMatrix> {
    let d = d_matrix(r, b1, b2, lambda1, lambda2, c)?;
    let dp = d_prime_matrix(r, b1, b2, lambda1, lambda2, c)?;
    if d.determinant().abs() < 1e-14 {
        return Err(Error::Singular(format!("det D({r}) = {:e}", d.determinant())));
    }
    let inv = d.try_inverse().ok_or_else(|| Error::Singular(format!("D({r})")))?;
    let numeric = -dp * inv;
    let closed = c_closed_form(b1, b2, c)?;
    Ok(CMatrix { numeric, closed, difference: (numeric - closed).amax() })
}

/// Radius `r` with `λ3 = (√−c/2) tanh(r√−c/2)`.
pub fn focal_radius(lambda3: f64, c: f64) -> Result<f64> {
    let a = half_root(c)?;
    if !(lambda3 >= 0.0 && lambda3 < a) {
        return Err(Error::OutOfRange(format!("lambda3 = {lambda3} outside [0, {a})")));
    }
    Ok((lambda3 / a).atanh() / a)
}

/// `r* = log(2 + √3)/√−c`, where `λ4` merges with `λ2`.
pub fn special_radius(c: f64) -> Result<f64> {
    half_root(c)?;
    Ok((2.0 + 3f64.sqrt()).ln() / (-c).sqrt())
}

/// Rank of `Φ^r_*` from the closed forms: the `(u1, u2)` block through
/// `D(r)` and every other eigenspace through its `f`-value.
pub fn focal_rank(es: &EigenStructure, c: f64, r: f64) -> Result<usize> {
    let mults = es
        .multiplicities
        .as_ref()
        .ok_or_else(|| Error::InvalidParams("eigen structure needs multiplicities".into()))?;
    let eps = 1e-9;
    let alive = |lambda: f64| -> Result<bool> { Ok(f_function(lambda, c, r)?.abs() > eps) };
    let d = d_matrix_for(es, c, r)?;
    let rank_d = if d.determinant().abs() > eps {
        2
    } else {
        let sv = d.svd(false, false).singular_values;
        sv.iter().filter(|s| **s > eps).count()
    };
    let mut rank = rank_d;
    rank += (mults[0] - 1) * alive(es.lambda1)? as usize;
    rank += (mults[1] - 1) * alive(es.lambda2)? as usize;
    rank += mults[2] * alive(es.lambda3)? as usize;
    if let (Some(l4), Some(m4)) = (es.lambda4, mults.get(3)) {
        rank += m4 * alive(l4)? as usize;
    }
    Ok(rank)
}

#[derive(Debug, Clone, Serialize)]
pub struct FocalData {
    pub r: f64,
    pub d: Matrix2<f64>,
    pub c_matrix: CMatrix,
    pub rank: usize,
    pub k: Option<usize>,
}

/// Focal data of a catalog record at its focal radius.
pub fn focal_data(es: &EigenStructure, c: f64) -> Result<FocalData> {
    let r = focal_radius(es.lambda3, c)?;
    Ok(FocalData {
        r,
        d: d_matrix_for(es, c, r)?,
        c_matrix: c_matrix(r, es.b1, es.b2, es.lambda1, es.lambda2, c)?,
        rank: focal_rank(es, c, r)?,
        k: es.k,
    })
}

/// Numerical rank of `Φ^t_*` for a germ, from Jacobi fields integrated along
/// the normal geodesic.
pub fn jacobi_rank_numeric(germ: &HypersurfaceGerm, t: f64, step: f64) -> Result<usize> {
    let (y, _) = propagate_germ(germ, t, step)?;
    let sv = y.svd(false, false).singular_values;
    let top = sv.iter().fold(0.0f64, |a, s| a.max(*s));
    Ok(sv.iter().filter(|s| **s > 1e-6 * top.max(1.0)).count())
}

/// Jacobi fields `ζ_v(t)` and `ζ_v'(t)` for `v` running over the tangent
/// basis of the germ: `ζ(0) = v`, `ζ'(0) = −Sv`. Parallel-frame components.
fn propagate_germ(germ: &HypersurfaceGerm, t: f64, step: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let k = jacobi_operator(&germ.params, &germ.normal);
    let y0 = germ.tangent_basis.clone();
    let yp0 = -(&germ.tangent_basis * &germ.shape);
    integrate_linear(&k, &y0, &yp0, t, step)
}

#[derive(Debug, Clone, Serialize)]
pub struct FocalShapeReport {
    pub rank: usize,
    /// `|S^r Jη + (√−c/2) JA|`.
    pub jeta: f64,
    /// `|S^r JA + (√−c/2) Jη|`.
    pub ja: f64,
    /// max `|S^r w|` over the tangent space of the focal set orthogonal to
    /// `Jη, JA`.
    pub complement: f64,
}

impl FocalShapeReport {
    pub fn max(&self) -> f64 {
        self.jeta.max(self.ja).max(self.complement)
    }
}

/// Shape operator of the focal submanifold at distance `r` along the germ
/// normal, compared with `S^r Jη = −(√−c/2) JA` and zero on the rest.
pub fn focal_shape_operator(germ: &HypersurfaceGerm, frame: &HopfFrame, r: f64, step: f64) -> Result<FocalShapeReport> {
    let a = half_root(germ.params.c)?;
    let (y, yp) = propagate_germ(germ, r, step)?;
    let svd = y.clone().svd(true, true);
    let top = svd.singular_values.iter().fold(0.0f64, |m, s| m.max(*s));
    let u = svd.u.as_ref().expect("requested");
    let image: Vec<DVector<f64>> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > 1e-6 * top.max(1.0))
        .map(|i| u.column(i).into_owned())
        .collect();
    let q = linalg::columns(&image, y.nrows());
    let pinv = y.clone().pseudo_inverse(1e-6 * top.max(1.0)).map_err(|e| Error::Singular(e.to_string()))?;
    // S^r ζ(r) = −(ζ'(r))^⊤
    let sr = -(&q * q.transpose()) * &yp * pinv;
    let jeta = germ.jxi();
    let ja = germ.j(&frame.a);
    let mut rest: Vec<DVector<f64>> = vec![jeta.clone(), ja.clone()];
    rest.extend(image.iter().cloned());
    let rest = linalg::gram_schmidt(&rest, 1e-8).split_off(2);
    let complement = rest.iter().map(|w| (&sr * w).norm()).fold(0.0, f64::max);
    Ok(FocalShapeReport {
        rank: image.len(),
        jeta: (&sr * &jeta + &ja * a).norm(),
        ja: (&sr * &ja + &jeta * a).norm(),
        complement,
    })
}

// ----- tubes ---------------------------------------------------------------

/// A tube germ together with where it sits.
#[derive(Debug, Clone)]
pub struct TubeGerm {
    pub germ: HypersurfaceGerm,
    /// Unit normal of `W` at `o` the tube point lies over.
    pub eta: DVector<f64>,
    /// `γ_η(r)`.
    pub point: Point,
    pub radius: f64,
    /// `max |S − Sᵀ|` before symmetrization.
    pub asymmetry: f64,
}

/// Shape operator of the tube of radius `r` around `W^{2n-k}_φ` at the
/// point `γ_η(r)`, with respect to the inward normal `−γ̇(r)`, so that the
/// `λ3`-principal curvature is nonnegative.
pub fn tube_germ(spec: &SubmanifoldSpec, eta: &DVector<f64>, r: f64, step: f64) -> Result<TubeGerm> {
    let params = spec.params;
    params.half_root()?;
    if !(r >= 0.0) || r > MAX_RADIUS {
        return Err(Error::OutOfRange(format!("radius {r} outside [0, {MAX_RADIUS}]")));
    }
    let k = spec.k();
    if r == 0.0 && k > 1 {
        return Err(Error::Singular("r = 0 is a focal point for k > 1".into()));
    }
    let eta_c: Vec<f64> = spec.normal().iter().map(|x| x.dot(eta)).collect();
    let in_span = DVector::from_vec(eta_c.clone()).norm();
    if (in_span - 1.0).abs() > 1e-10 || (eta.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParams("eta must be a unit normal vector of W".into()));
    }
    let ii = orbit_second_fundamental_form(spec);
    let s_eta = ii.shape_operator(&eta_c);
    let d = params.dim();
    let m = d - 1;
    let tangent_w = linalg::columns(&spec.tangent, d);
    let mut seeds = vec![eta.clone()];
    seeds.extend(spec.normal().iter().cloned());
    let normal_rest = linalg::gram_schmidt(&seeds, 1e-8).split_off(1);
    let mut tcols: Vec<DVector<f64>> = spec.tangent.clone();
    tcols.extend(normal_rest.iter().cloned());
    let t = linalg::columns(&tcols, d);
    let mut y0 = DMatrix::zeros(d, m);
    let mut yp0 = DMatrix::zeros(d, m);
    let nt = spec.tangent.len();
    y0.columns_mut(0, nt).copy_from(&tangent_w);
    yp0.columns_mut(0, nt).copy_from(&(-(&tangent_w * &s_eta)));
    for (j, w) in normal_rest.iter().enumerate() {
        yp0.set_column(nt + j, w);
    }
    let kop = jacobi_operator(&params, eta);
    let (y, yp) = integrate_linear(&kop, &y0, &yp0, r, step)?;
    let yt = t.transpose() * y;
    let ypt = t.transpose() * yp;
    let inv = yt.clone().try_inverse().ok_or_else(|| Error::Singular(format!("Jacobi matrix at r = {r}")))?;
    let s = ypt * inv;
    let asymmetry = (&s - s.transpose()).amax();
    let s = (&s + s.transpose()) * 0.5;

    let model = spec.model();
    let origin = model.identity();
    let v = TangentVector { base: origin, vec: eta.clone() };
    let moved = model.transport_along_geodesic(&v, &tcols, r, step)?;
    let tangent_basis = linalg::columns(&moved.carried, d);
    let normal = -moved.velocity.vec.clone();
    Ok(TubeGerm {
        germ: HypersurfaceGerm::new(params, normal, tangent_basis, s),
        eta: eta.clone(),
        point: moved.point,
        radius: r,
        asymmetry,
    })
}

/// Tube germ over the first normal basis vector of `spec`.
pub fn tube_shape_operator(spec: &SubmanifoldSpec, r: f64, step: f64) -> Result<HypersurfaceGerm> {
    Ok(tube_germ(spec, &spec.normal()[0].clone(), r, step)?.germ)
}

/// [`tube_shape_operator`] with the default step.
pub fn tube_shape_operator_default(spec: &SubmanifoldSpec, r: f64) -> Result<HypersurfaceGerm> {
    tube_shape_operator(spec, r, DEFAULT_STEP)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::eigen_structure_from_lambda3;

    #[test]
    fn initial_values_and_focal_values() {
        for (l, c) in [(0.3, -4.0), (-1.2, -1.0)] {
            assert_eq!(f_function(l, c, 0.0).unwrap(), 1.0);
            assert_eq!(g_function(l, c, 0.0).unwrap(), 0.0);
        }
        let r = 0.8;
        let l3 = (r as f64).tanh();
        assert!((f_function(l3, -4.0, r).unwrap() - 1.0 / r.cosh()).abs() < 1e-15);
        let rs = special_radius(-4.0).unwrap();
        assert!(f_function(3f64.sqrt(), -4.0, rs).unwrap().abs() < 1e-14);
        assert!(f_function(0.1, 4.0, 1.0).is_err());
    }

    #[test]
    fn closed_forms_solve_their_equations() {
        for (l, c) in [(0.3, -4.0), (1.7, -4.0), (-0.4, -1.0)] {
            let j = JacobiCoefficients::new(l, c).unwrap();
            assert!((j.f_prime(0.0) + l).abs() < 1e-15 && j.g_prime(0.0) == 0.0);
            for t in [0.1, 0.9, 2.0] {
                let (rf, rg) = j.ode_residuals(t, 1e-5);
                assert!(rf.abs() < 1e-6 && rg.abs() < 1e-5, "{rf} {rg}");
            }
        }
    }

    #[test]
    fn radii() {
        assert_eq!(focal_radius(0.0, -4.0).unwrap(), 0.0);
        assert!((focal_radius(0.5, -4.0).unwrap() - 0.5493061443340549).abs() < 1e-15);
        assert!(matches!(focal_radius(1.0, -4.0), Err(Error::OutOfRange(_))));
        assert!((special_radius(-4.0).unwrap() - 0.658478948462408).abs() < 1e-14);
        assert!((special_radius(-1.0).unwrap() - 1.3169578969248166).abs() < 1e-14);
        let rs = special_radius(-4.0).unwrap();
        assert!((rs.tanh() - 1.0 / 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn d_and_c() {
        let es = eigen_structure_from_lambda3(0.5, -4.0, None).unwrap();
        assert_eq!(d_matrix_for(&es, -4.0, 0.0).unwrap(), Matrix2::identity());
        let r = 0.5f64.atanh();
        let det = d_matrix_for(&es, -4.0, r).unwrap().determinant();
        assert!((det - 0.649519052838329).abs() < 1e-12);
        let cm = c_matrix(r, es.b1, es.b2, es.lambda1, es.lambda2, -4.0).unwrap();
        assert!(cm.difference < 1e-12);
        let h = 2f64.sqrt() / 2.0;
        let c = c_closed_form(h, h, -4.0).unwrap();
        assert!((c - Matrix2::new(-1.0, 0.0, 0.0, 1.0)).amax() < 1e-15);
        assert!((c * c - Matrix2::identity()).amax() < 1e-15);
    }

    #[test]
    fn ode_oracle_basics() {
        let params = ModelParams::new(2, -4.0).unwrap();
        let xi = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        let zero = DVector::zeros(4);
        let (z, zp) = jacobi_ode_oracle(&params, &xi, &zero, &zero, 2.0, 1e-3).unwrap();
        assert_eq!((z.amax(), zp.amax()), (0.0, 0.0));
        // ζ(0) = Jξ: holomorphic plane, rate √−c
        let jxi = DVector::from_vec(vec![0.0, 1.0, 0.0, 0.0]);
        let (z, _) = jacobi_ode_oracle(&params, &xi, &jxi, &zero, 1.0, 1e-4).unwrap();
        assert!((z[1] - 2f64.cosh()).abs() < 1e-10);
        assert!(jacobi_ode_oracle(&params, &xi, &jxi, &zero, 1.0, -1.0).is_err());
    }
}
