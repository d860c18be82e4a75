//! Principal curvature catalog of real hypersurfaces with constant
//! principal curvatures and `h = 2`, pointwise hypersurface germs, their
//! spectral analysis and classification.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{j_matrix, ModelParams};

/// Default eigenvalue grouping tolerance.
pub const DEFAULT_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    #[serde(rename = "G4")]
    G4,
    #[serde(rename = "G3_K1")]
    G3K1,
    #[serde(rename = "G3_KBIG")]
    G3KBig,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::G4 => "G4",
            Branch::G3K1 => "G3_K1",
            Branch::G3KBig => "G3_KBIG",
        }
    }

    pub fn g(&self) -> usize {
        match self {
            Branch::G4 => 4,
            _ => 3,
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A record of the principal curvature catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenStructure {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: Option<f64>,
    pub b1: f64,
    pub b2: f64,
    pub g: usize,
    pub branch: Branch,
    pub k: Option<usize>,
    /// Multiplicities in the order `(λ1, λ2, λ3[, λ4])`.
    pub multiplicities: Option<Vec<usize>>,
}

/// `λ3` at which `λ4 = −c/(4λ3)` coincides with `λ2`.
pub fn special_lambda3(c: f64) -> f64 {
    (-c).sqrt() / (2.0 * 3f64.sqrt())
}

fn is_special(lambda3: f64, c: f64) -> bool {
    let s = special_lambda3(c);
    (lambda3 - s).abs() <= 1e-12 * (1.0 + s)
}

/// `(λ1, λ2, b1², b2²)` as functions of `λ3`.
pub fn catalog_values(lambda3: f64, c: f64) -> Result<(f64, f64, f64, f64)> {
    if c == 0.0 || !c.is_finite() {
        return Err(Error::InvalidParams(format!("c must be finite and nonzero, got {c}")));
    }
    if c > 0.0 {
        return Err(Error::NoRealSolution(format!("c = {c} > 0")));
    }
    if !(lambda3 >= 0.0) {
        return Err(Error::OutOfRange(format!("lambda3 = {lambda3} must be nonnegative")));
    }
    if lambda3 >= (-c).sqrt() / 2.0 {
        return Err(Error::NoRealSolution(format!(
            "lambda3 = {lambda3} must be below sqrt(-c)/2 = {}",
            (-c).sqrt() / 2.0
        )));
    }
    let s = (-c - 3.0 * lambda3 * lambda3).sqrt();
    let l1 = 0.5 * (3.0 * lambda3 - s);
    let l2 = 0.5 * (3.0 * lambda3 + s);
    let b1sq = -(s - lambda3).powi(3) / (2.0 * c * s);
    let b2sq = -(s + lambda3).powi(3) / (2.0 * c * s);
    Ok((l1, l2, b1sq, b2sq))
}

pub fn eigen_structure_from_lambda3(lambda3: f64, c: f64, hint: Option<Branch>) -> Result<EigenStructure> {
    let (l1, l2, b1sq, b2sq) = catalog_values(lambda3, c)?;
    let special = is_special(lambda3, c);
    let branch = match hint {
        Some(Branch::G3K1) => Branch::G3K1,
        Some(Branch::G3KBig) if special => Branch::G3KBig,
        Some(Branch::G3KBig) => {
            return Err(Error::InvalidParams(format!(
                "branch G3_KBIG requires lambda3 = {}",
                special_lambda3(c)
            )))
        }
        Some(Branch::G4) if lambda3 > 0.0 && !special => Branch::G4,
        Some(Branch::G4) => {
            return Err(Error::InvalidParams("branch G4 requires lambda3 outside {0, sqrt(-c)/(2 sqrt 3)}".into()))
        }
        None if lambda3 == 0.0 => Branch::G3K1,
        None if special => Branch::G3KBig,
        None => Branch::G4,
    };
    let lambda4 = (branch == Branch::G4).then(|| -c / (4.0 * lambda3));
    Ok(EigenStructure {
        lambda1: l1,
        lambda2: l2,
        lambda3,
        lambda4,
        b1: b1sq.sqrt(),
        b2: b2sq.sqrt(),
        g: branch.g(),
        branch,
        k: None,
        multiplicities: None,
    })
}

impl EigenStructure {
    /// Fixes the normal rank `k` and fills in multiplicities for `CH^n`.
    pub fn with_dimensions(mut self, n: usize, k: usize) -> Result<Self> {
        if n < 2 || k == 0 || k > n - 1 {
            return Err(Error::DimensionTooLarge { k, max: n.saturating_sub(1) });
        }
        if k == 1 {
            self.branch = Branch::G3K1;
            self.lambda4 = None;
            self.g = 3;
        } else if self.branch == Branch::G3K1 {
            return Err(Error::NotApplicable(format!(
                "lambda3 = {} describes the k = 1 family, got k = {k}",
                self.lambda3
            )));
        }
        let mults = match self.branch {
            Branch::G4 => vec![1, 1, 2 * n - 2 - k, k - 1],
            Branch::G3K1 => vec![1, 1, 2 * n - 3],
            Branch::G3KBig => vec![1, k, 2 * n - 2 - k],
        };
        self.k = Some(k);
        self.multiplicities = Some(mults);
        Ok(self)
    }

    pub fn b1sq(&self) -> f64 {
        self.b1 * self.b1
    }

    pub fn b2sq(&self) -> f64 {
        self.b2 * self.b2
    }

    /// Distinct principal curvatures with multiplicities, ascending.
    pub fn spectrum(&self) -> Option<Vec<(f64, usize)>> {
        let m = self.multiplicities.as_ref()?;
        let mut out = vec![(self.lambda1, m[0]), (self.lambda2, m[1]), (self.lambda3, m[2])];
        if let Some(l4) = self.lambda4 {
            out.push((l4, m[3]));
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        Some(out)
    }
}

/// Eigen-structure of the tube of radius `r` (equidistant hypersurface for
/// `k = 1`).
pub fn eigen_structure_for_radius(n: usize, k: usize, c: f64, r: f64) -> Result<EigenStructure> {
    if c >= 0.0 {
        return Err(Error::RequiresNegativeCurvature(c));
    }
    let a = (-c).sqrt() / 2.0;
    let lambda3 = a * (a * r).tanh();
    let hint = if k == 1 {
        Some(Branch::G3K1)
    } else if is_special(lambda3, c) {
        Some(Branch::G3KBig)
    } else {
        None
    };
    eigen_structure_from_lambda3(lambda3, c, hint)?.with_dimensions(n, k)
}

/// `b_i² = 4(λ_j − 2λ3)(λ_i − λ3)² / (c(λ_i − λ_j))`.
pub fn b_squared_formula(li: f64, lj: f64, l3: f64, c: f64) -> f64 {
    4.0 * (lj - 2.0 * l3) * (li - l3).powi(2) / (c * (li - lj))
}

/// `c − 4λ1λ2 + 8(λ1 + λ2)λ3 − 12λ3²`.
pub fn quadratic_relation(l1: f64, l2: f64, l3: f64, c: f64) -> f64 {
    c - 4.0 * l1 * l2 + 8.0 * (l1 + l2) * l3 - 12.0 * l3 * l3
}

/// The cubic relation between `λ_i`, `λ_j`, `λ3` that follows from the
/// Gauss equation on `(U_i, A)` after eliminating `b_i`.
pub fn cubic_relation(li: f64, lj: f64, l3: f64, c: f64) -> f64 {
    72.0 * l3.powi(3) - 48.0 * li * l3 * l3 - 108.0 * lj * l3 * l3 + 4.0 * li * li * l3
        + 32.0 * lj * lj * l3
        + 72.0 * li * lj * l3
        - 16.0 * li * lj * lj
        - c * li
        - 8.0 * li * li * lj
        + c * lj
}

fn cubic_scale(li: f64, lj: f64, l3: f64, c: f64) -> f64 {
    let m = li.abs().max(lj.abs()).max(l3.abs()).max(1.0);
    (72.0 + 48.0 + 108.0 + 4.0 + 32.0 + 72.0 + 16.0 + 8.0) * m.powi(3) + 2.0 * c.abs() * m
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintResiduals {
    pub quadratic: f64,
    pub b1_formula: f64,
    pub b2_formula: f64,
    pub b_sum: f64,
    /// `|c + 4λ3λ4|` for G4, `|c + 4λ2λ3|` for G3_KBIG.
    pub lambda4_relation: Option<f64>,
    pub ordered: bool,
}

impl ConstraintResiduals {
    pub fn max(&self) -> f64 {
        [self.quadratic, self.b1_formula, self.b2_formula, self.b_sum, self.lambda4_relation.unwrap_or(0.0)]
            .into_iter()
            .fold(0.0, f64::max)
    }

    pub fn flagged(&self, tol: f64) -> bool {
        !self.ordered || !(self.max() <= tol)
    }
}

pub fn constraint_residuals(es: &EigenStructure, c: f64) -> ConstraintResiduals {
    let (l1, l2, l3) = (es.lambda1, es.lambda2, es.lambda3);
    let lambda4_relation = match es.branch {
        Branch::G4 => es.lambda4.map(|l4| (c + 4.0 * l3 * l4).abs()),
        Branch::G3KBig => Some((c + 4.0 * l2 * l3).abs()),
        Branch::G3K1 => None,
    };
    ConstraintResiduals {
        quadratic: quadratic_relation(l1, l2, l3, c).abs(),
        b1_formula: (es.b1sq() - b_squared_formula(l1, l2, l3, c)).abs(),
        b2_formula: (es.b2sq() - b_squared_formula(l2, l1, l3, c)).abs(),
        b_sum: (es.b1sq() + es.b2sq() - 1.0).abs(),
        lambda4_relation,
        ordered: l1 < l3 && l3 < l2 && l3 >= 0.0,
    }
}

// ----- germs ---------------------------------------------------------------

/// Pointwise data of a real hypersurface: unit normal, orthonormal tangent
/// basis (columns), shape operator in that basis and the complex structure,
/// all in an orthonormal frame of the ambient tangent space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "GermJson", try_from = "GermJson")]
pub struct HypersurfaceGerm {
    pub params: ModelParams,
    pub normal: DVector<f64>,
    pub tangent_basis: DMatrix<f64>,
    pub shape: DMatrix<f64>,
    pub jmat: DMatrix<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GermJson {
    n: usize,
    c: f64,
    normal: Vec<f64>,
    tangent_basis: Vec<Vec<f64>>,
    shape: Vec<Vec<f64>>,
    #[serde(rename = "J")]
    j: Vec<Vec<f64>>,
}

pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn from_rows(rows: &[Vec<f64>], nrows: usize, ncols: usize, what: &str) -> std::result::Result<DMatrix<f64>, String> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(format!("{what} must be {nrows}x{ncols}"));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

impl From<HypersurfaceGerm> for GermJson {
    fn from(g: HypersurfaceGerm) -> Self {
        GermJson {
            n: g.params.n,
            c: g.params.c,
            normal: g.normal.as_slice().to_vec(),
            tangent_basis: matrix_rows(&g.tangent_basis.transpose()),
            shape: matrix_rows(&g.shape),
            j: matrix_rows(&g.jmat),
        }
    }
}

impl TryFrom<GermJson> for HypersurfaceGerm {
    type Error = String;

    fn try_from(j: GermJson) -> std::result::Result<Self, String> {
        let params = ModelParams::new(j.n, j.c).map_err(|e| e.to_string())?;
        let d = params.dim();
        if j.normal.len() != d {
            return Err(format!("normal must have length {d}"));
        }
        let tangent = from_rows(&j.tangent_basis, d - 1, d, "tangent_basis")?.transpose();
        let shape = from_rows(&j.shape, d - 1, d - 1, "shape")?;
        let jmat = from_rows(&j.j, d, d, "J")?;
        Ok(HypersurfaceGerm { params, normal: DVector::from_vec(j.normal), tangent_basis: tangent, shape, jmat })
    }
}

impl HypersurfaceGerm {
    pub fn new(params: ModelParams, normal: DVector<f64>, tangent_basis: DMatrix<f64>, shape: DMatrix<f64>) -> Self {
        Self { params, normal, tangent_basis, shape, jmat: j_matrix(params.n) }
    }

    /// `2n − 1`.
    pub fn dim(&self) -> usize {
        self.shape.nrows()
    }

    pub fn to_ambient(&self, coords: &DVector<f64>) -> DVector<f64> {
        &self.tangent_basis * coords
    }

    pub fn to_tangent(&self, v: &DVector<f64>) -> DVector<f64> {
        self.tangent_basis.transpose() * v
    }

    pub fn j(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.jmat * v
    }

    /// `Jξ`, ambient components.
    pub fn jxi(&self) -> DVector<f64> {
        self.j(&self.normal)
    }

    /// Shape operator applied to an ambient tangent vector.
    pub fn apply_shape(&self, v: &DVector<f64>) -> DVector<f64> {
        self.to_ambient(&(&self.shape * self.to_tangent(v)))
    }

    /// Same hypersurface with the opposite unit normal.
    pub fn flipped(&self) -> Self {
        let mut g = self.clone();
        g.normal = -&g.normal;
        g.shape = -&g.shape;
        g
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        let d = self.params.dim();
        if self.normal.len() != d
            || self.tangent_basis.shape() != (d, d - 1)
            || self.shape.shape() != (d - 1, d - 1)
            || self.jmat.shape() != (d, d)
        {
            return Err(Error::InvalidGerm("inconsistent dimensions".into()));
        }
        let checks = [
            ("shape not symmetric", (&self.shape - self.shape.transpose()).amax()),
            ("J^2 != -id", (&self.jmat * &self.jmat + DMatrix::identity(d, d)).amax()),
            ("J not orthogonal", (self.jmat.transpose() * &self.jmat - DMatrix::identity(d, d)).amax()),
            ("normal not unit", (self.normal.norm() - 1.0).abs()),
            (
                "tangent basis not orthonormal",
                (self.tangent_basis.transpose() * &self.tangent_basis - DMatrix::identity(d - 1, d - 1)).amax(),
            ),
            ("tangent basis not orthogonal to normal", (self.tangent_basis.transpose() * &self.normal).amax()),
        ];
        for (what, res) in checks {
            if !(res <= tol) {
                return Err(Error::InvalidGerm(format!("{what} ({res:e})")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PrincipalDecomposition {
    /// Distinct principal curvatures (group means), ascending.
    pub eigenvalues: Vec<f64>,
    pub multiplicities: Vec<usize>,
    /// Orthonormal eigenspace bases, tangent coordinates (columns).
    pub eigenspaces: Vec<DMatrix<f64>>,
    /// Projections of `Jξ` onto each eigenspace, tangent coordinates.
    pub projections: Vec<DVector<f64>>,
    pub projection_norms: Vec<f64>,
    pub g: usize,
    pub h: usize,
    pub tol: f64,
    pub warnings: Vec<String>,
}

impl PrincipalDecomposition {
    /// Index of the group whose eigenvalue is nearest to `value`.
    pub fn nearest_group(&self, value: f64) -> usize {
        let mut best = 0;
        for (i, v) in self.eigenvalues.iter().enumerate() {
            if (v - value).abs() < (self.eigenvalues[best] - value).abs() {
                best = i;
            }
        }
        best
    }

    /// Orthogonal projector onto group `i`, tangent coordinates.
    pub fn projector(&self, i: usize) -> DMatrix<f64> {
        &self.eigenspaces[i] * self.eigenspaces[i].transpose()
    }
}

pub fn principal_decomposition(germ: &HypersurfaceGerm, tol: f64) -> Result<PrincipalDecomposition> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParams(format!("tolerance must be positive, got {tol}")));
    }
    let (values, vectors) = linalg::sym_eigen_sorted(&germ.shape);
    let m = values.len();
    let scale = 1.0 + values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let threshold = tol * scale;
    let mut warnings = Vec::new();
    let mut groups: Vec<Vec<usize>> = vec![vec![0]];
    for i in 1..m {
        let gap = values[i] - values[i - 1];
        if gap > threshold && gap <= 2.0 * threshold {
            warnings.push(format!(
                "ambiguous grouping: gap {gap:e} between {} and {} is within a factor 2 of the tolerance",
                values[i - 1],
                values[i]
            ));
        }
        if gap > threshold {
            groups.push(vec![i]);
        } else {
            groups.last_mut().expect("nonempty").push(i);
        }
    }
    let jxi = germ.to_tangent(&germ.jxi());
    let mut out = PrincipalDecomposition {
        eigenvalues: Vec::new(),
        multiplicities: Vec::new(),
        eigenspaces: Vec::new(),
        projections: Vec::new(),
        projection_norms: Vec::new(),
        g: groups.len(),
        h: 0,
        tol,
        warnings,
    };
    for grp in groups {
        let mean = grp.iter().map(|&i| values[i]).sum::<f64>() / grp.len() as f64;
        let mut basis = DMatrix::zeros(m, grp.len());
        for (j, &i) in grp.iter().enumerate() {
            basis.set_column(j, &vectors.column(i));
        }
        let proj = &basis * (basis.transpose() * &jxi);
        let norm = proj.norm();
        if norm > tol {
            out.h += 1;
        }
        out.eigenvalues.push(mean);
        out.multiplicities.push(grp.len());
        out.eigenspaces.push(basis);
        out.projections.push(proj);
        out.projection_norms.push(norm);
    }
    Ok(out)
}

/// `Jξ = b1 U1 + b2 U2` together with the vector `A` of the complex
/// subbundle spanned by `U1, U2, A, ξ`. Ambient components.
#[derive(Debug, Clone, Serialize)]
pub struct HopfFrame {
    pub u1: DVector<f64>,
    pub u2: DVector<f64>,
    pub a: DVector<f64>,
    pub b1: f64,
    pub b2: f64,
    /// Principal curvatures of `U1` and `U2` (`⟨SU_i, U_i⟩`).
    pub lambda1: f64,
    pub lambda2: f64,
    /// `⟨SA, A⟩`.
    pub lambda3: f64,
    /// Eigen-group indices of `U1` and `U2`.
    pub group1: usize,
    pub group2: usize,
}

impl HopfFrame {
    /// Same frame with `U1` and `U2` relabelled (violates `λ1 < λ2`).
    pub fn swapped(&self, germ: &HypersurfaceGerm) -> Self {
        let a = -(germ.j(&self.u2) + &germ.normal * self.b2) / self.b1;
        HopfFrame {
            u1: self.u2.clone(),
            u2: self.u1.clone(),
            lambda3: germ.to_tangent(&a).dot(&(&germ.shape * germ.to_tangent(&a))),
            a,
            b1: self.b2,
            b2: self.b1,
            lambda1: self.lambda2,
            lambda2: self.lambda1,
            group1: self.group2,
            group2: self.group1,
        }
    }
}

pub fn hopf_frame_extract(germ: &HypersurfaceGerm, decomp: &PrincipalDecomposition) -> Result<HopfFrame> {
    if decomp.h != 2 {
        return Err(Error::NotApplicable(format!("h = {} (need 2)", decomp.h)));
    }
    let idx: Vec<usize> = (0..decomp.g).filter(|&i| decomp.projection_norms[i] > decomp.tol).collect();
    let (i1, i2) = (idx[0], idx[1]);
    let b1 = decomp.projection_norms[i1];
    let b2 = decomp.projection_norms[i2];
    let u1 = germ.to_ambient(&(&decomp.projections[i1] / b1));
    let u2 = germ.to_ambient(&(&decomp.projections[i2] / b2));
    let a = -(germ.j(&u1) + &germ.normal * b1) / b2;
    let quad = |v: &DVector<f64>| {
        let t = germ.to_tangent(v);
        t.dot(&(&germ.shape * &t))
    };
    Ok(HopfFrame {
        lambda1: quad(&u1),
        lambda2: quad(&u2),
        lambda3: quad(&a),
        u1,
        u2,
        a,
        b1,
        b2,
        group1: i1,
        group2: i2,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LemmaAReport {
    /// `|JU1 − (−b2 A − b1 ξ)|`.
    pub ju1: f64,
    /// `|JU2 − (b1 A − b2 ξ)|`.
    pub ju2: f64,
    /// `|JA − (b2 U1 − b1 U2)|`.
    pub ja: f64,
    /// `|SA − λ3 A|` with the tangential part of `A`.
    pub a_eigen: f64,
    /// Normal component and unit-length defect of `A`.
    pub a_tangent: f64,
    pub ju1_u2: f64,
    pub b_sum: f64,
    /// `|Jξ − b1 U1 − b2 U2|`.
    pub jxi: f64,
    /// `λ(U1) < λ(U2)`.
    pub label_order_ok: bool,
}

impl LemmaAReport {
    pub fn max(&self) -> f64 {
        [self.ju1, self.ju2, self.ja, self.a_eigen, self.a_tangent, self.ju1_u2, self.b_sum, self.jxi]
            .into_iter()
            .fold(0.0, f64::max)
    }

    pub fn pass(&self, tol: f64) -> bool {
        self.label_order_ok && self.max() <= tol
    }
}

pub fn lemma_a_check(germ: &HypersurfaceGerm, frame: &HopfFrame) -> LemmaAReport {
    let xi = &germ.normal;
    let (u1, u2, a) = (&frame.u1, &frame.u2, &frame.a);
    let (b1, b2) = (frame.b1, frame.b2);
    let at = germ.to_tangent(a);
    LemmaAReport {
        ju1: (germ.j(u1) - (-(a * b2) - xi * b1)).amax(),
        ju2: (germ.j(u2) - (a * b1 - xi * b2)).amax(),
        ja: (germ.j(a) - (u1 * b2 - u2 * b1)).amax(),
        a_eigen: (&germ.shape * &at - &at * frame.lambda3).amax(),
        a_tangent: a.dot(xi).abs().max((a.norm() - 1.0).abs()),
        ju1_u2: germ.j(u1).dot(u2).abs(),
        b_sum: (b1 * b1 + b2 * b2 - 1.0).abs(),
        jxi: (germ.jxi() - u1 * b1 - u2 * b2).amax(),
        label_order_ok: frame.lambda1 < frame.lambda2,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TotallyRealReport {
    pub branch: Branch,
    /// Dimension of the checked space.
    pub dim: usize,
    /// max |⟨Jv, w⟩| over the space.
    pub realness: f64,
    /// max |⟨Jv, A⟩|.
    pub a_overlap: f64,
    /// max distance of `Jv` from the `λ3`-eigenspace.
    pub outside_lambda3: f64,
    pub pass: bool,
}

/// Checks that `T_λ4` (G4) or `T_λ2 ⊖ U2` (G3_KBIG) is totally real with
/// `J` of it inside `T_λ3 ⊖ A`.
pub fn totally_real_check(
    germ: &HypersurfaceGerm,
    decomp: &PrincipalDecomposition,
    frame: &HopfFrame,
    tol: f64,
) -> Result<TotallyRealReport> {
    let g3 = decomp.nearest_group(frame.lambda3);
    let rest: Vec<usize> =
        (0..decomp.g).filter(|&i| i != frame.group1 && i != frame.group2 && i != g3).collect();
    let (branch, space): (Branch, Vec<DVector<f64>>) = if decomp.g == 4 && rest.len() == 1 {
        let basis = &decomp.eigenspaces[rest[0]];
        (Branch::G4, (0..basis.ncols()).map(|j| germ.to_ambient(&basis.column(j).into_owned())).collect())
    } else if decomp.g == 3 && rest.is_empty() && decomp.multiplicities[frame.group2] > 1 {
        let basis = &decomp.eigenspaces[frame.group2];
        let mut vs: Vec<DVector<f64>> = vec![frame.u2.clone()];
        vs.extend((0..basis.ncols()).map(|j| germ.to_ambient(&basis.column(j).into_owned())));
        let mut q = linalg::gram_schmidt(&vs, 1e-6);
        q.remove(0);
        (Branch::G3KBig, q)
    } else {
        return Err(Error::NotApplicable("no λ4 space or enlarged λ2 space".into()));
    };
    let p3 = decomp.projector(g3);
    let mut realness: f64 = 0.0;
    let mut a_overlap: f64 = 0.0;
    let mut outside: f64 = 0.0;
    for v in &space {
        let jv = germ.j(v);
        for w in &space {
            realness = realness.max(jv.dot(w).abs());
        }
        a_overlap = a_overlap.max(jv.dot(&frame.a).abs());
        let in3 = germ.to_ambient(&(&p3 * germ.to_tangent(&jv)));
        outside = outside.max((&jv - in3).norm());
    }
    Ok(TotallyRealReport {
        branch,
        dim: space.len(),
        realness,
        a_overlap,
        outside_lambda3: outside,
        pass: realness <= tol && a_overlap <= tol && outside <= tol,
    })
}

// ----- classification ------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Tube,
    Equidistant,
    Unclassified,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassificationResult {
    pub model: Model,
    pub g: usize,
    pub h: usize,
    pub k: usize,
    pub r: Option<f64>,
    #[serde(serialize_with = "ser_branch")]
    pub branch: Option<Branch>,
    pub residuals: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    /// Whether the input normal was reversed to reach `λ3 ≥ 0`.
    pub flipped: bool,
    pub eigenvalues: Vec<f64>,
    pub multiplicities: Vec<usize>,
    pub b1sq: Option<f64>,
    pub b2sq: Option<f64>,
    pub warnings: Vec<String>,
}

fn ser_branch<S: serde::Serializer>(b: &Option<Branch>, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(b.map(|b| b.as_str()).unwrap_or("none"))
}

impl ClassificationResult {
    fn unclassified(reason: impl Into<String>) -> Self {
        ClassificationResult {
            model: Model::Unclassified,
            g: 0,
            h: 0,
            k: 0,
            r: None,
            branch: None,
            residuals: BTreeMap::new(),
            reason: Some(reason.into()),
            flipped: false,
            eigenvalues: Vec::new(),
            multiplicities: Vec::new(),
            b1sq: None,
            b2sq: None,
            warnings: Vec::new(),
        }
    }

    pub fn is_classified(&self) -> bool {
        self.model != Model::Unclassified
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("classification result serializes")
    }
}

/// Residual tolerance used by [`classify`] for a grouping tolerance `tol`.
pub fn residual_tolerance(tol: f64, c: f64) -> f64 {
    (100.0 * tol).max(1e-9) * (1.0 + c.abs())
}

/// Matches a germ against the catalog.
pub fn classify(germ: &HypersurfaceGerm, tol: f64) -> ClassificationResult {
    classify_oriented(germ, tol, false)
}

fn classify_oriented(germ: &HypersurfaceGerm, tol: f64, flipped: bool) -> ClassificationResult {
    let c = germ.params.c;
    let res_tol = residual_tolerance(tol, c);
    if let Err(e) = germ.validate(res_tol) {
        return ClassificationResult::unclassified(e.to_string());
    }
    let decomp = match principal_decomposition(germ, tol) {
        Ok(d) => d,
        Err(e) => return ClassificationResult::unclassified(e.to_string()),
    };
    let mut out = ClassificationResult::unclassified("");
    out.flipped = flipped;
    out.g = decomp.g;
    out.h = decomp.h;
    out.eigenvalues = decomp.eigenvalues.clone();
    out.multiplicities = decomp.multiplicities.clone();
    out.warnings = decomp.warnings.clone();
    let fail = |mut out: ClassificationResult, reason: String| {
        out.reason = Some(reason);
        out
    };
    if decomp.h != 2 {
        let reason = if decomp.h == 1 { "hopf".to_string() } else { format!("h = {}", decomp.h) };
        return fail(out, reason);
    }
    if c >= 0.0 {
        return fail(out, format!("c = {c} admits no h = 2 examples"));
    }
    let frame = hopf_frame_extract(germ, &decomp).expect("h = 2 checked");
    if frame.lambda3 < -res_tol && !flipped {
        return classify_oriented(&germ.flipped(), tol, true);
    }
    out.b1sq = Some(frame.b1 * frame.b1);
    out.b2sq = Some(frame.b2 * frame.b2);
    let lemma = lemma_a_check(germ, &frame);
    let mut checks: Vec<(&str, f64)> = vec![
        ("lemma_a_ju1", lemma.ju1),
        ("lemma_a_ju2", lemma.ju2),
        ("lemma_a_ja", lemma.ja),
        ("lemma_a_ju1_u2", lemma.ju1_u2),
        ("lemma_a_jxi", lemma.jxi),
        ("a_tangent", lemma.a_tangent),
        ("a_eigen", lemma.a_eigen),
    ];
    let record = |out: &mut ClassificationResult, checks: &[(&str, f64)]| {
        for (k, v) in checks {
            out.residuals.insert((*k).to_string(), *v);
        }
    };
    let first_failure = |checks: &[(&str, f64)]| {
        checks.iter().find(|(_, v)| !(*v <= res_tol)).map(|(k, v)| format!("residual {k} = {v:e}"))
    };
    if decomp.g != 3 && decomp.g != 4 {
        record(&mut out, &checks);
        return fail(out, format!("g = {}", decomp.g));
    }
    if let Some(reason) = first_failure(&checks) {
        record(&mut out, &checks);
        return fail(out, reason);
    }
    let l3 = frame.lambda3.max(0.0);
    let g3 = decomp.nearest_group(frame.lambda3);
    if g3 == frame.group1 || g3 == frame.group2 {
        record(&mut out, &checks);
        return fail(out, "A shares an eigenspace with U1 or U2".into());
    }
    let n = germ.params.n;
    let rest: Vec<usize> =
        (0..decomp.g).filter(|&i| i != frame.group1 && i != frame.group2 && i != g3).collect();
    let m = &decomp.multiplicities;
    let (branch, k) = match (decomp.g, rest.as_slice()) {
        (4, [i4]) => (Branch::G4, m[*i4] + 1),
        (3, []) if m[frame.group2] == 1 => (Branch::G3K1, 1),
        (3, []) => (Branch::G3KBig, m[frame.group2]),
        _ => {
            record(&mut out, &checks);
            return fail(out, "eigenspace layout does not match the catalog".into());
        }
    };
    let mult_ok = m[frame.group1] == 1
        && (branch == Branch::G3KBig || m[frame.group2] == 1)
        && k <= n - 1
        && 2 * n >= 2 + k
        && m[g3] == 2 * n - 2 - k;
    checks.push(("multiplicities", if mult_ok { 0.0 } else { 1.0 }));
    let catalog = match catalog_values(l3, c) {
        Ok(v) => v,
        Err(e) => {
            record(&mut out, &checks);
            return fail(out, e.to_string());
        }
    };
    let (cl1, cl2, cb1, cb2) = catalog;
    let (l1, l2) = (frame.lambda1, frame.lambda2);
    let (b1sq, b2sq) = (frame.b1 * frame.b1, frame.b2 * frame.b2);
    checks.extend([
        ("lambda1", (l1 - cl1).abs()),
        ("lambda2", (l2 - cl2).abs()),
        ("b1sq", (b1sq - cb1).abs()),
        ("b2sq", (b2sq - cb2).abs()),
        ("quadratic", quadratic_relation(l1, l2, l3, c).abs()),
        ("prop_b_b1", (b1sq - b_squared_formula(l1, l2, l3, c)).abs()),
        ("prop_b_b2", (b2sq - b_squared_formula(l2, l1, l3, c)).abs()),
    ]);
    match branch {
        Branch::G4 => {
            let l4 = decomp.eigenvalues[rest[0]];
            checks.push(("lambda4_relation", (c + 4.0 * l3 * l4).abs()));
        }
        Branch::G3KBig => {
            checks.push(("lambda4_relation", (c + 4.0 * l2 * l3).abs()));
            checks.push(("special_lambda3", (l3 - special_lambda3(c)).abs()));
        }
        Branch::G3K1 => {}
    }
    record(&mut out, &checks);
    if let Some(reason) = first_failure(&checks) {
        return fail(out, reason);
    }
    let r = match crate::jacobi::focal_radius(l3, c) {
        Ok(r) => r,
        Err(e) => return fail(out, e.to_string()),
    };
    out.model = if k == 1 { Model::Equidistant } else { Model::Tube };
    out.k = k;
    out.r = Some(r);
    out.branch = Some(branch);
    out.reason = None;
    out
}

// ----- nonexistence scan ---------------------------------------------------

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScanGrid {
    pub lambda3_points: usize,
    pub lambda1_points: usize,
}

impl Default for ScanGrid {
    fn default() -> Self {
        ScanGrid { lambda3_points: 1000, lambda1_points: 1000 }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FeasiblePoint {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub b1sq: f64,
    pub b2sq: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NonexistenceReport {
    pub c: f64,
    pub grid_points: usize,
    /// Roots of the reduced system found by sign changes.
    pub candidates: usize,
    pub feasible: usize,
    pub points: Vec<FeasiblePoint>,
    /// Max |λ_i − λ_i(λ3)| over feasible points, against the closed form.
    pub max_curve_deviation: Option<f64>,
    pub certificate: Option<String>,
}

/// `λ2` solving the quadratic relation for given `λ1`, `λ3`.
fn lambda2_from_quadratic(l1: f64, l3: f64, c: f64) -> Option<f64> {
    let den = 4.0 * l1 - 8.0 * l3;
    (den != 0.0).then(|| (c + 8.0 * l1 * l3 - 12.0 * l3 * l3) / den)
}

/// Searches a `(λ3, λ1)` grid over `[0, 2√|c|] × [−2√|c|, 2√|c|]` for
/// solutions of the algebraic system satisfied by every `h = 2` example:
/// the quadratic relation (solved for `λ2`), both cubic relations, the
/// `b_i²` formulas with `b_i² ∈ (0, 1)` summing to one, and `λ1 < λ2`.
pub fn nonexistence_scan(c: f64, grid: ScanGrid) -> Result<NonexistenceReport> {
    if c == 0.0 || !c.is_finite() {
        return Err(Error::InvalidParams(format!("c must be finite and nonzero, got {c}")));
    }
    if grid.lambda3_points < 2 || grid.lambda1_points < 2 {
        return Err(Error::InvalidParams("grid needs at least 2 points per axis".into()));
    }
    let span = 2.0 * c.abs().sqrt();
    let n3 = grid.lambda3_points;
    let n1 = grid.lambda1_points;
    let rows: Vec<(usize, Vec<FeasiblePoint>)> = (0..n3)
        .into_par_iter()
        .map(|i| {
            let l3 = span * i as f64 / (n3 - 1) as f64;
            let pole = 2.0 * l3;
            let f = |l1: f64| lambda2_from_quadratic(l1, l3, c).map(|l2| cubic_relation(l1, l2, l3, c));
            let xs: Vec<f64> = (0..n1).map(|j| -span + 2.0 * span * j as f64 / (n1 - 1) as f64).collect();
            let mut candidates = 0;
            let mut found = Vec::new();
            for w in xs.windows(2) {
                let (x0, x1) = (w[0], w[1]);
                let guard = 1e-9 * span;
                if (x0 - pole) * (x1 - pole) <= 0.0 || (x0 - pole).abs() < guard || (x1 - pole).abs() < guard {
                    continue;
                }
                let (Some(f0), Some(f1)) = (f(x0), f(x1)) else { continue };
                if f0 == 0.0 && x0 != xs[0] {
                    // counted by the previous cell
                    continue;
                }
                if f0 * f1 > 0.0 {
                    continue;
                }
                let (mut lo, mut hi, mut flo) = (x0, x1, f0);
                let root = if f0 == 0.0 {
                    x0
                } else if f1 == 0.0 {
                    x1
                } else {
                    for _ in 0..200 {
                        let mid = 0.5 * (lo + hi);
                        if mid <= lo || mid >= hi {
                            break;
                        }
                        let fm = f(mid).unwrap_or(f64::NAN);
                        if fm == 0.0 {
                            lo = mid;
                            hi = mid;
                            break;
                        }
                        if (fm > 0.0) == (flo > 0.0) {
                            lo = mid;
                            flo = fm;
                        } else {
                            hi = mid;
                        }
                    }
                    0.5 * (lo + hi)
                };
                let l1 = root;
                let Some(l2) = lambda2_from_quadratic(l1, l3, c) else { continue };
                let scale = cubic_scale(l1, l2, l3, c);
                if !(cubic_relation(l1, l2, l3, c).abs() <= 1e-9 * scale) {
                    continue;
                }
                candidates += 1;
                if !(cubic_relation(l2, l1, l3, c).abs() <= 1e-9 * scale) || !(l1 < l2) {
                    continue;
                }
                let b1sq = b_squared_formula(l1, l2, l3, c);
                let b2sq = b_squared_formula(l2, l1, l3, c);
                let inside = |b: f64| b > 0.0 && b < 1.0;
                if inside(b1sq) && inside(b2sq) && (b1sq + b2sq - 1.0).abs() <= 1e-9 {
                    found.push(FeasiblePoint { lambda1: l1, lambda2: l2, lambda3: l3, b1sq, b2sq });
                }
            }
            (candidates, found)
        })
        .collect();
    let candidates = rows.iter().map(|r| r.0).sum();
    let points: Vec<FeasiblePoint> = rows.into_iter().flat_map(|r| r.1).collect();
    let max_curve_deviation = (!points.is_empty()).then(|| {
        points
            .iter()
            .map(|p| match catalog_values(p.lambda3, c) {
                Ok((l1, l2, _, _)) => (p.lambda1 - l1).abs().max((p.lambda2 - l2).abs()),
                Err(_) => f64::INFINITY,
            })
            .fold(0.0, f64::max)
    });
    let certificate = (c > 0.0).then(|| {
        format!(
            "for c = {c} > 0, -c - 3*lambda3^2 <= -c < 0 for every real lambda3, so lambda1,2 = \
             (3*lambda3 -/+ sqrt(-c - 3*lambda3^2))/2 has no real solution"
        )
    });
    Ok(NonexistenceReport {
        c,
        grid_points: n3 * n1,
        candidates,
        feasible: points.len(),
        points,
        max_curve_deviation,
        certificate,
    })
}
