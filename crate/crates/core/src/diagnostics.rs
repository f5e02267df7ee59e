//! Near-singularity diagnostics at network equilibria.
//!
//! Three views of the same degeneracy:
//!
//! - the corank of `H_ε` (how many directions of the state space are flat),
//! - the codimension of the image of the control projection `Dπ` restricted
//!   to the critical manifold `C_ε` (how many control directions are pinned),
//! - discriminant normals, the control-space gradients of `det H_ε` along
//!   `C_ε`, whose pairwise angles measure how aligned sector folds are.
//!
//! The tangent space of `C_ε` at `(x, α)` is the null space of `[H_ε | B]`
//! with `B = ∂²V_ε/∂x∂α`. A control direction `β` lifts to it iff
//! `Bβ ∈ Im H_ε`, so `codim Im Dπ = rank(Qᵀ B)` for `Q` an orthonormal basis
//! of `ker H_ε`. Restricting to a sector subset `I` replaces `H_ε` by
//! `[H_ε | B_{I^c}]`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{euclid, inf_norm, norm2, numerical_rank, singular_values, sym_eigen};
use crate::network::{newton, NetworkEquilibrium, NetworkSystem, NewtonSettings, TOL_EQUILIBRIUM};
use crate::{Error, Result};

/// Relative singular-value threshold for numerical rank.
pub const TOL_RANK: f64 = 1e-8;
/// Finite-difference step for discriminant normals, relative to control magnitude.
pub const NORMAL_STEP: f64 = 1e-5;

/// Number of singular values below `tol_rank · max(σ_max, 1)`.
pub fn corank(h: &DMatrix<f64>, tol_rank: f64) -> usize {
    h.nrows() - numerical_rank(h, tol_rank)
}

fn check_equilibrium(sys: &NetworkSystem, eq: &NetworkEquilibrium) -> Result<()> {
    let g = sys.gradient(&eq.x, &eq.alpha)?;
    let gn = inf_norm(&g);
    if gn >= TOL_EQUILIBRIUM {
        return Err(Error::Precondition(format!(
            "not an equilibrium: |grad V|_inf = {gn:e}"
        )));
    }
    Ok(())
}

/// Codimension of the image of `Dπ_I`, the projection of the tangent space
/// of `C_ε` onto the controls of the sectors in `sectors`.
pub fn projection_codim(
    sys: &NetworkSystem,
    eq: &NetworkEquilibrium,
    sectors: &[usize],
    tol_rank: f64,
) -> Result<usize> {
    check_equilibrium(sys, eq)?;
    if let Some(&bad) = sectors.iter().find(|&&i| i >= sys.k()) {
        return Err(Error::Precondition(format!("no sector {bad}")));
    }
    let n = sys.n();
    let h = sys.hessian(&eq.x, &eq.alpha)?;
    let b = sys.control_jacobian(&eq.x, &eq.alpha)?;

    let mut in_cols = Vec::new();
    let mut out_cols = Vec::new();
    for i in 0..sys.k() {
        let cols = sys.alpha_range(i);
        if sectors.contains(&i) {
            in_cols.extend(cols);
        } else {
            out_cols.extend(cols);
        }
    }
    if in_cols.is_empty() {
        return Ok(0);
    }

    // left null space of M = [H | B_out] from the SVD of Mᵀ
    let m_t = DMatrix::from_fn(n + out_cols.len(), n, |r, c| {
        if r < n {
            h[(c, r)]
        } else {
            b[(c, out_cols[r - n])]
        }
    });
    let svd = m_t.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let s_max = svd.singular_values.max();
    let cutoff = tol_rank * s_max.max(1.0);
    let null: Vec<usize> = (0..n).filter(|&i| svd.singular_values[i] < cutoff).collect();
    if null.is_empty() {
        return Ok(0);
    }
    let qtb = DMatrix::from_fn(null.len(), in_cols.len(), |r, c| {
        (0..n).map(|s| v_t[(null[r], s)] * b[(s, in_cols[c])]).sum()
    });
    Ok(numerical_rank(&qtb, tol_rank))
}

/// `p − rank(Dπ)` for the full control projection.
pub fn dpi_codim(sys: &NetworkSystem, eq: &NetworkEquilibrium, tol_rank: f64) -> Result<usize> {
    let all: Vec<usize> = (0..sys.k()).collect();
    projection_codim(sys, eq, &all, tol_rank)
}

/// Sectors in `sectors` are catastrophically correlated when the projection
/// onto their joint controls loses at least `|I| − 1` dimensions.
pub fn catastrophically_correlated(
    sys: &NetworkSystem,
    eq: &NetworkEquilibrium,
    sectors: &[usize],
    tol_rank: f64,
) -> Result<bool> {
    let need = sectors.len().saturating_sub(1);
    Ok(projection_codim(sys, eq, sectors, tol_rank)? >= need)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum NormalError {
    /// No control direction admits a smooth normal (e.g. the cusp vertex).
    #[error("discriminant normal undefined: degenerate isolated point")]
    DegenerateIsolated,
}

/// Mean of `det(H_ε)²` over the distinct equilibria near `x_ref` at `alpha`.
///
/// Near a fold the minimum and the saddle sit `O(√h)` apart on either side
/// of the fold point; Newton starts on both sides find both, and averaging
/// cancels the odd-order terms of the two branches.
fn branch_det_sq(
    sys: &NetworkSystem,
    x_ref: &[f64],
    soft_dir: &[f64],
    alpha: &[f64],
    h: f64,
) -> Option<f64> {
    let settings = NewtonSettings::default();
    let off = h.sqrt();
    let reach = 100.0 * off;
    let mut found: Vec<Vec<f64>> = Vec::new();
    for s in [0.0, 1.0, -1.0] {
        let start: Vec<f64> = x_ref
            .iter()
            .zip(soft_dir)
            .map(|(x, d)| x + s * off * d)
            .collect();
        if let Ok(x) = newton(sys, &start, alpha, &settings) {
            if euclid(&x, x_ref) <= reach && found.iter().all(|f| euclid(f, &x) > 1e-10) {
                found.push(x);
            }
        }
    }
    if found.is_empty() {
        return None;
    }
    let sum: f64 = found
        .iter()
        .map(|x| {
            let d = sys.hessian_unchecked(x, alpha).determinant();
            d * d
        })
        .sum();
    Some(sum / found.len() as f64)
}

/// Slope ratio between steps `h/10` and `h` below which the normal is
/// declared undefined.
const DEGENERATE_SLOPE_RATIO: f64 = 0.3;

/// Unit control-space normal of the discriminant for sector `sector`.
///
/// Finite differences of `det(H_ε)²` along the continued critical manifold,
/// central where the branch continues on both sides, one-sided on the
/// surviving side of a fold. The square has the same gradient direction as
/// `det H_ε` away from the discriminant and stays differentiable across it.
/// The sign is fixed so the first nonzero component is positive.
pub fn discriminant_normal(
    sys: &NetworkSystem,
    eq: &NetworkEquilibrium,
    sector: usize,
) -> std::result::Result<Vec<f64>, NormalError> {
    let range = sys.alpha_range(sector);
    let scale = eq.alpha[range.clone()]
        .iter()
        .fold(1.0_f64, |m, a| m.max(a.abs()));
    let h = NORMAL_STEP * scale;
    let hess = sys.hessian_unchecked(&eq.x, &eq.alpha);
    let eig = sym_eigen(&hess);
    let soft = (0..eig.values.len())
        .min_by(|&a, &b| eig.values[a].abs().total_cmp(&eig.values[b].abs()))
        .map(|c| eig.vectors.column(c).iter().copied().collect::<Vec<f64>>())
        .unwrap_or_default();
    let base = {
        let d = hess.determinant();
        d * d
    };

    let quotient = |h: f64| {
        let mut grad = Vec::with_capacity(range.len());
        let mut any = false;
        for k in range.clone() {
            let mut a = eq.alpha.clone();
            a[k] = eq.alpha[k] + h;
            let plus = branch_det_sq(sys, &eq.x, &soft, &a, h);
            a[k] = eq.alpha[k] - h;
            let minus = branch_det_sq(sys, &eq.x, &soft, &a, h);
            let comp = match (plus, minus) {
                (Some(p), Some(m)) => Some((p - m) / (2.0 * h)),
                (Some(p), None) => Some((p - base) / h),
                (None, Some(m)) => Some((base - m) / h),
                (None, None) => None,
            };
            any |= comp.is_some();
            grad.push(comp.unwrap_or(0.0));
        }
        any.then_some(grad)
    };
    let grad = quotient(h).ok_or(NormalError::DegenerateIsolated)?;
    let norm = norm2(&grad);
    if !(norm > 1e-10) {
        return Err(NormalError::DegenerateIsolated);
    }
    // A slope that shrinks with the step is an artefact of a point where
    // det² vanishes to second order in every direction.
    let fine = quotient(h / 10.0).map_or(0.0, |g| norm2(&g));
    if fine < DEGENERATE_SLOPE_RATIO * norm {
        return Err(NormalError::DegenerateIsolated);
    }
    let mut unit: Vec<f64> = grad.iter().map(|g| g / norm).collect();
    if let Some(first) = unit.iter().find(|v| v.abs() > 1e-12) {
        if *first < 0.0 {
            unit.iter_mut().for_each(|v| *v = -*v);
        }
    }
    Ok(unit)
}

/// Angle in degrees `[0, 90]` between the lines spanned by `u` and `v`.
/// The shorter vector is zero-padded.
pub fn normal_alignment_angle(u: &[f64], v: &[f64]) -> Result<f64> {
    let (nu, nv) = (norm2(u), norm2(v));
    if !(nu > 0.0) || !(nv > 0.0) {
        return Err(Error::Precondition("zero vector has no direction".into()));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let c = (dot.abs() / (nu * nv)).min(1.0);
    Ok(c.acos().to_degrees())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularityDiagnostics {
    /// Singular values of `H_ε`, descending.
    pub singular_values_h: Vec<f64>,
    pub corank: usize,
    pub dpi_codim: usize,
    /// Corank of each diagonal sector block.
    pub sector_coranks: Vec<usize>,
    pub discriminant_normals: Vec<Option<Vec<f64>>>,
    /// Degrees; `None` where either normal is undefined.
    pub pairwise_angles: Vec<Vec<Option<f64>>>,
}

impl SingularityDiagnostics {
    pub fn min_singular_value(&self) -> f64 {
        self.singular_values_h.last().copied().unwrap_or(0.0)
    }

    pub fn angle(&self, i: usize, j: usize) -> Option<f64> {
        self.pairwise_angles[i][j]
    }
}

pub fn diagnose(
    sys: &NetworkSystem,
    eq: &NetworkEquilibrium,
    tol_rank: f64,
) -> Result<SingularityDiagnostics> {
    let h = sys.hessian(&eq.x, &eq.alpha)?;
    let dpi = dpi_codim(sys, eq, tol_rank)?;
    let sector_coranks = (0..sys.k())
        .map(|i| {
            let r = sys.x_range(i);
            corank(
                &h.view((r.start, r.start), (r.len(), r.len())).clone_owned(),
                tol_rank,
            )
        })
        .collect();
    let normals: Vec<Option<Vec<f64>>> = (0..sys.k())
        .map(|i| discriminant_normal(sys, eq, i).ok())
        .collect();
    let k = sys.k();
    let mut angles = vec![vec![None; k]; k];
    for i in 0..k {
        angles[i][i] = Some(0.0);
        for j in i + 1..k {
            if let (Some(u), Some(v)) = (&normals[i], &normals[j]) {
                let a = normal_alignment_angle(u, v).ok();
                angles[i][j] = a;
                angles[j][i] = a;
            }
        }
    }
    Ok(SingularityDiagnostics {
        singular_values_h: singular_values(&h),
        corank: corank(&h, tol_rank),
        dpi_codim: dpi,
        sector_coranks,
        discriminant_normals: normals,
        pairwise_angles: angles,
    })
}
