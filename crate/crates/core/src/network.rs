//! Coupled network potential `V_ε = Σ V_i + ε W` with bilinear coupling
//! `W = Σ_{i<j} λ_ij ⟨x_i⟩⟨x_j⟩` on the first behavior coordinate of each
//! sector, plus the equilibrium machinery built on it.

use std::ops::Range;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::catastrophe::{NormalForm, SearchBox, TOL_DEGENERACY, TOL_MERGE};
use crate::linalg::{euclid, inf_norm, singular_values, sym_eigen};
use crate::{Error, Result};

/// `‖∇_x V_ε‖∞` below which a point is an equilibrium.
pub const TOL_EQUILIBRIUM: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingSpec {
    pub epsilon: f64,
    pub lambda: Vec<Vec<f64>>,
}

impl CouplingSpec {
    /// Validates `ε ≥ 0` and that `λ` is symmetric with a zero diagonal.
    pub fn new(epsilon: f64, lambda: Vec<Vec<f64>>) -> Result<Self> {
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidSpec(format!("epsilon must be >= 0, got {epsilon}")));
        }
        let k = lambda.len();
        for (i, row) in lambda.iter().enumerate() {
            if row.len() != k {
                return Err(Error::dim("lambda row", k, row.len()));
            }
            if row[i] != 0.0 {
                return Err(Error::InvalidSpec(format!("lambda[{i}][{i}] must be 0")));
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() || v != lambda[j][i] {
                    return Err(Error::InvalidSpec(format!(
                        "lambda must be symmetric and finite (entry {i},{j})"
                    )));
                }
            }
        }
        Ok(CouplingSpec { epsilon, lambda })
    }

    pub fn uncoupled(k: usize) -> Self {
        CouplingSpec {
            epsilon: 0.0,
            lambda: vec![vec![0.0; k]; k],
        }
    }

    /// Two sectors with `λ₁₂ = λ`.
    pub fn pair(epsilon: f64, lambda: f64) -> Self {
        CouplingSpec {
            epsilon,
            lambda: vec![vec![0.0, lambda], vec![lambda, 0.0]],
        }
    }

    /// Effective cross-block entry `ε λ_ij`.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.epsilon * self.lambda[i][j]
    }

    /// Weak-but-nontrivial coupling: `ε > 0` and some `λ_ij ≠ 0`.
    pub fn is_nontrivial(&self) -> bool {
        self.epsilon > 0.0 && self.lambda.iter().flatten().any(|&v| v != 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSystem {
    sectors: Vec<NormalForm>,
    coupling: CouplingSpec,
    x_off: Vec<usize>,
    a_off: Vec<usize>,
}

impl NetworkSystem {
    pub fn new(sectors: Vec<NormalForm>, coupling: CouplingSpec) -> Result<Self> {
        if sectors.is_empty() {
            return Err(Error::InvalidSpec("a network needs at least one sector".into()));
        }
        if coupling.lambda.len() != sectors.len() {
            return Err(Error::dim("lambda", sectors.len(), coupling.lambda.len()));
        }
        let coupling = CouplingSpec::new(coupling.epsilon, coupling.lambda)?;
        let mut x_off = vec![0];
        let mut a_off = vec![0];
        for s in &sectors {
            x_off.push(x_off.last().unwrap() + s.behavior_dim());
            a_off.push(a_off.last().unwrap() + s.control_dim());
        }
        Ok(NetworkSystem {
            sectors,
            coupling,
            x_off,
            a_off,
        })
    }

    /// `k` identical sectors with uniform coupling `λ` between every pair.
    pub fn uniform(form: NormalForm, k: usize, epsilon: f64, lambda: f64) -> Result<Self> {
        let lam = (0..k)
            .map(|i| (0..k).map(|j| if i == j { 0.0 } else { lambda }).collect())
            .collect();
        NetworkSystem::new(vec![form; k], CouplingSpec::new(epsilon, lam)?)
    }

    pub fn sectors(&self) -> &[NormalForm] {
        &self.sectors
    }

    pub fn coupling(&self) -> &CouplingSpec {
        &self.coupling
    }

    pub fn k(&self) -> usize {
        self.sectors.len()
    }

    /// Total behavior dimension.
    pub fn n(&self) -> usize {
        *self.x_off.last().unwrap()
    }

    /// Total control dimension.
    pub fn p(&self) -> usize {
        *self.a_off.last().unwrap()
    }

    pub fn x_range(&self, i: usize) -> Range<usize> {
        self.x_off[i]..self.x_off[i + 1]
    }

    pub fn alpha_range(&self, i: usize) -> Range<usize> {
        self.a_off[i]..self.a_off[i + 1]
    }

    /// Same sectors, different coupling.
    pub fn with_coupling(&self, coupling: CouplingSpec) -> Result<Self> {
        NetworkSystem::new(self.sectors.clone(), coupling)
    }

    fn check(&self, x: &[f64], alpha: &[f64]) -> Result<()> {
        if x.len() != self.n() {
            return Err(Error::dim("network state", self.n(), x.len()));
        }
        if alpha.len() != self.p() {
            return Err(Error::dim("network controls", self.p(), alpha.len()));
        }
        Ok(())
    }

    pub fn potential(&self, x: &[f64], alpha: &[f64]) -> Result<f64> {
        self.check(x, alpha)?;
        Ok(self.potential_unchecked(x, alpha))
    }

    pub fn gradient(&self, x: &[f64], alpha: &[f64]) -> Result<Vec<f64>> {
        self.check(x, alpha)?;
        let mut g = vec![0.0; self.n()];
        self.gradient_into(x, alpha, &mut g);
        Ok(g)
    }

    pub fn hessian(&self, x: &[f64], alpha: &[f64]) -> Result<DMatrix<f64>> {
        self.check(x, alpha)?;
        Ok(self.hessian_unchecked(x, alpha))
    }

    /// `B = ∂²V_ε/∂x∂α` (`n × p`). The coupling carries no control dependence,
    /// so `B` is block diagonal.
    pub fn control_jacobian(&self, x: &[f64], alpha: &[f64]) -> Result<DMatrix<f64>> {
        self.check(x, alpha)?;
        let mut b = DMatrix::zeros(self.n(), self.p());
        for (i, s) in self.sectors.iter().enumerate() {
            s.control_jacobian_into(&x[self.x_range(i)], &mut b, self.x_off[i], self.a_off[i]);
        }
        Ok(b)
    }

    pub(crate) fn potential_unchecked(&self, x: &[f64], alpha: &[f64]) -> f64 {
        let mut v = 0.0;
        for (i, s) in self.sectors.iter().enumerate() {
            v += s.potential_unchecked(&x[self.x_range(i)], &alpha[self.alpha_range(i)]);
        }
        let k = self.k();
        for i in 0..k {
            for j in i + 1..k {
                let w = self.coupling.weight(i, j);
                if w != 0.0 {
                    v += w * x[self.x_off[i]] * x[self.x_off[j]];
                }
            }
        }
        v
    }

    pub(crate) fn gradient_into(&self, x: &[f64], alpha: &[f64], g: &mut [f64]) {
        for (i, s) in self.sectors.iter().enumerate() {
            let r = self.x_range(i);
            s.gradient_into(&x[r.clone()], &alpha[self.alpha_range(i)], &mut g[r]);
        }
        let k = self.k();
        for i in 0..k {
            for j in 0..k {
                let w = self.coupling.weight(i, j);
                if i != j && w != 0.0 {
                    g[self.x_off[i]] += w * x[self.x_off[j]];
                }
            }
        }
    }

    pub(crate) fn hessian_unchecked(&self, x: &[f64], alpha: &[f64]) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.n(), self.n());
        for (i, s) in self.sectors.iter().enumerate() {
            s.hessian_into(&x[self.x_range(i)], &alpha[self.alpha_range(i)], &mut h, self.x_off[i]);
        }
        let k = self.k();
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    h[(self.x_off[i], self.x_off[j])] = self.coupling.weight(i, j);
                }
            }
        }
        h
    }

    /// Equilibrium record at `(x, α)`; the caller is responsible for `x`
    /// actually being critical.
    pub fn equilibrium_at(&self, x: Vec<f64>, alpha: Vec<f64>) -> Result<NetworkEquilibrium> {
        self.check(&x, &alpha)?;
        let h = self.hessian_unchecked(&x, &alpha);
        let sector_signatures = (0..self.k())
            .map(|i| {
                let r = self.x_range(i);
                let block = h.view((r.start, r.start), (r.len(), r.len())).clone_owned();
                Signature::of(&block)
            })
            .collect();
        let full = Signature::of(&h);
        let full_min_singular_value = singular_values(&h).last().copied().unwrap_or(0.0);
        Ok(NetworkEquilibrium {
            x,
            alpha,
            sector_signatures,
            negative_eigenvalues: full.negative_eigenvalues,
            full_min_singular_value,
        })
    }
}

/// Inertia summary of a symmetric block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Signature {
    pub negative_eigenvalues: usize,
    pub min_abs_eigenvalue: f64,
}

impl Signature {
    pub fn of(h: &DMatrix<f64>) -> Self {
        let eig = sym_eigen(h);
        Signature {
            negative_eigenvalues: eig.values.iter().filter(|&&l| l < 0.0).count(),
            min_abs_eigenvalue: eig.values.iter().fold(f64::INFINITY, |m, l| m.min(l.abs())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkEquilibrium {
    pub x: Vec<f64>,
    pub alpha: Vec<f64>,
    /// Signatures of the diagonal sector blocks of `H_ε`.
    pub sector_signatures: Vec<Signature>,
    /// Negative eigenvalues of the full `H_ε`.
    pub negative_eigenvalues: usize,
    pub full_min_singular_value: f64,
}

impl NetworkEquilibrium {
    pub fn is_minimum(&self) -> bool {
        self.negative_eigenvalues == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonSettings {
    pub max_iter: usize,
    pub tol: f64,
    /// Condition-number bailout for the Newton linear solve.
    pub max_condition: f64,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        NewtonSettings {
            max_iter: 50,
            tol: TOL_EQUILIBRIUM,
            max_condition: 1e12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NewtonFailure {
    NoConvergence,
    Singular,
    NonFinite,
}

/// Newton's method on `∇_x V_ε = 0`, polished past the tolerance until the
/// residual stagnates.
pub fn newton(
    sys: &NetworkSystem,
    x0: &[f64],
    alpha: &[f64],
    settings: &NewtonSettings,
) -> std::result::Result<Vec<f64>, NewtonFailure> {
    let n = sys.n();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut prev = f64::INFINITY;
    for _ in 0..settings.max_iter {
        sys.gradient_into(&x, alpha, &mut g);
        if !g.iter().all(|v| v.is_finite()) {
            return Err(NewtonFailure::NonFinite);
        }
        let gn = inf_norm(&g);
        // Once converged, keep polishing while the residual still shrinks;
        // degenerate roots converge only linearly.
        if gn < settings.tol && (gn == 0.0 || gn > 0.5 * prev) {
            return Ok(x);
        }
        prev = gn;
        let h = sys.hessian_unchecked(&x, alpha);
        let eig = sym_eigen(&h);
        let max_abs = eig.values.iter().fold(0.0_f64, |m, l| m.max(l.abs()));
        let min_abs = eig.values.iter().fold(f64::INFINITY, |m, l| m.min(l.abs()));
        if min_abs == 0.0 || max_abs / min_abs > settings.max_condition {
            return if gn < settings.tol {
                Ok(x)
            } else {
                Err(NewtonFailure::Singular)
            };
        }
        // dx = -V Λ⁻¹ Vᵀ g
        let coeffs: Vec<f64> = (0..n)
            .map(|c| {
                let dot: f64 = (0..n).map(|r| eig.vectors[(r, c)] * g[r]).sum();
                dot / eig.values[c]
            })
            .collect();
        for (r, xr) in x.iter_mut().enumerate() {
            *xr -= (0..n).map(|c| eig.vectors[(r, c)] * coeffs[c]).sum::<f64>();
        }
    }
    sys.gradient_into(&x, alpha, &mut g);
    if inf_norm(&g) < settings.tol {
        Ok(x)
    } else {
        Err(NewtonFailure::NoConvergence)
    }
}

/// All network equilibria reachable by Newton from a deterministic start set:
/// Cartesian products of the uncoupled sector critical points, plus the
/// corners and centre of the search box. Results are deduplicated at
/// [`TOL_MERGE`] and sorted lexicographically.
pub fn find_equilibria(
    sys: &NetworkSystem,
    alpha: &[f64],
    search_box: SearchBox,
) -> Result<Vec<NetworkEquilibrium>> {
    if alpha.len() != sys.p() {
        return Err(Error::dim("network controls", sys.p(), alpha.len()));
    }
    let mut starts: Vec<Vec<f64>> = vec![Vec::new()];
    for (i, s) in sys.sectors().iter().enumerate() {
        let cps = s.critical_points(&alpha[sys.alpha_range(i)], search_box)?;
        let mut next = Vec::with_capacity(starts.len() * cps.len());
        for prefix in &starts {
            for cp in &cps {
                let mut v = prefix.clone();
                v.extend_from_slice(&cp.point.x);
                next.push(v);
            }
        }
        starts = next;
    }
    let n = sys.n();
    if n <= 12 {
        for mask in 0..(1usize << n) {
            starts.push(
                (0..n)
                    .map(|d| if mask >> d & 1 == 1 { search_box.hi } else { search_box.lo })
                    .collect(),
            );
        }
    }
    starts.push(vec![0.5 * (search_box.lo + search_box.hi); n]);

    let settings = NewtonSettings::default();
    let mut found: Vec<Vec<f64>> = Vec::new();
    for s in &starts {
        if let Ok(x) = newton(sys, s, alpha, &settings) {
            if search_box.contains(&x) && found.iter().all(|f| euclid(f, &x) > TOL_MERGE) {
                found.push(x);
            }
        }
    }
    found.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(u, v)| u.total_cmp(v))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    found
        .into_iter()
        .map(|x| sys.equilibrium_at(x, alpha.to_vec()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuationSettings {
    pub newton: NewtonSettings,
    /// Largest accepted displacement of the corrected state; a longer Newton
    /// excursion means the branch ended and Newton found a different one.
    pub max_jump: f64,
}

impl Default for ContinuationSettings {
    fn default() -> Self {
        ContinuationSettings {
            newton: NewtonSettings::default(),
            max_jump: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldReason {
    NoConvergence,
    SingularHessian,
    BranchJump,
    Degenerate,
}

/// The continued branch terminated (fold birth/death).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSignal {
    pub reason: FoldReason,
    pub alpha: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Continuation {
    Continued(NetworkEquilibrium),
    Fold(FoldSignal),
}

pub fn continue_equilibrium(
    sys: &NetworkSystem,
    eq: &NetworkEquilibrium,
    alpha_new: &[f64],
) -> Result<Continuation> {
    continue_equilibrium_with(sys, eq, alpha_new, &ContinuationSettings::default())
}

/// Newton-corrects `eq` to the controls `alpha_new`.
pub fn continue_equilibrium_with(
    sys: &NetworkSystem,
    eq: &NetworkEquilibrium,
    alpha_new: &[f64],
    settings: &ContinuationSettings,
) -> Result<Continuation> {
    sys.check(&eq.x, alpha_new)?;
    let fold = |reason| {
        Ok(Continuation::Fold(FoldSignal {
            reason,
            alpha: alpha_new.to_vec(),
        }))
    };
    let x = match newton(sys, &eq.x, alpha_new, &settings.newton) {
        Ok(x) => x,
        Err(NewtonFailure::Singular) => return fold(FoldReason::SingularHessian),
        Err(_) => return fold(FoldReason::NoConvergence),
    };
    if euclid(&x, &eq.x) > settings.max_jump {
        return fold(FoldReason::BranchJump);
    }
    let next = sys.equilibrium_at(x, alpha_new.to_vec())?;
    if next.full_min_singular_value < TOL_DEGENERACY {
        return fold(FoldReason::Degenerate);
    }
    Ok(Continuation::Continued(next))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxSettings {
    pub tol: f64,
    pub max_iter: usize,
    pub escape_radius: f64,
}

impl Default for RelaxSettings {
    fn default() -> Self {
        RelaxSettings {
            tol: TOL_EQUILIBRIUM,
            max_iter: 200_000,
            escape_radius: 1e3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelaxFailure {
    Escaped,
    Budget,
}

/// Follows `dx/dt = −∇_x V_ε` to a local minimum.
///
/// Explicit Euler with the step bounded by `1/λ_max(H_ε)` and a per-step
/// displacement cap, so a stable direction is never overshot and the state
/// cannot hop over a barrier into a basin the true flow would not reach.
/// Steps are halved until `V_ε` decreases (Armijo). Close to rest the state
/// is polished by Newton; a state resting on a saddle is kicked along its
/// most negative curvature direction.
pub fn gradient_flow(
    sys: &NetworkSystem,
    x0: &[f64],
    alpha: &[f64],
    settings: &RelaxSettings,
) -> std::result::Result<Vec<f64>, RelaxFailure> {
    const SWITCH_TOL: f64 = 1e-6;
    const MAX_KICKS: usize = 8;
    const MAX_DISPLACEMENT: f64 = 0.05;
    let newton_settings = NewtonSettings::default();
    let n = sys.n();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut kicks = 0;
    sys.gradient_into(&x, alpha, &mut g);
    let mut v = sys.potential_unchecked(&x, alpha);

    for _ in 0..settings.max_iter {
        let gn = inf_norm(&g);
        if !gn.is_finite() || inf_norm(&x) > settings.escape_radius {
            return Err(RelaxFailure::Escaped);
        }
        if gn < SWITCH_TOL {
            if let Ok(xp) = newton(sys, &x, alpha, &newton_settings) {
                if euclid(&xp, &x) < 1e-3 {
                    let h = sys.hessian_unchecked(&xp, alpha);
                    let eig = sym_eigen(&h);
                    if eig.values[0] > 0.0 {
                        return Ok(xp);
                    }
                    if eig.values[0] < 0.0 && kicks < MAX_KICKS {
                        kicks += 1;
                        for (r, xr) in x.iter_mut().enumerate() {
                            *xr = xp[r] + 1e-3 * eig.vectors[(r, 0)];
                        }
                        sys.gradient_into(&x, alpha, &mut g);
                        v = sys.potential_unchecked(&x, alpha);
                        continue;
                    }
                }
            }
            if gn < settings.tol {
                return Ok(x);
            }
        }
        let h = sys.hessian_unchecked(&x, alpha);
        let lmax = sym_eigen(&h)
            .values
            .iter()
            .fold(0.0_f64, |m, l| m.max(l.abs()));
        let mut step = (1.0 / lmax.max(1e-12)).min(MAX_DISPLACEMENT / gn);
        let g2: f64 = g.iter().map(|gi| gi * gi).sum();
        loop {
            for r in 0..n {
                trial[r] = x[r] - step * g[r];
            }
            let vt = sys.potential_unchecked(&trial, alpha);
            if vt <= v - 1e-4 * step * g2 {
                std::mem::swap(&mut x, &mut trial);
                v = vt;
                sys.gradient_into(&x, alpha, &mut g);
                break;
            }
            step *= 0.5;
            if step < 1e-300 {
                break;
            }
        }
        if step < 1e-300 {
            break;
        }
    }
    if inf_norm(&g) < settings.tol {
        Ok(x)
    } else {
        Err(RelaxFailure::Budget)
    }
}
