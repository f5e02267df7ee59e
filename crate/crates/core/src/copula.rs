//! Archimedean copulas over per-sector event intensities.
//!
//! `C(u) = ψ⁻¹(ψ(u₁) + … + ψ(u_k))` for the independence, Clayton and
//! Gumbel generators. Sampling uses the Marshall–Olkin frailty construction;
//! fitting inverts the closed-form Kendall tau links.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma};
use serde::{Deserialize, Serialize};

use crate::cascade::CascadeReport;
use crate::{Error, Result};

/// Largest θ reported by [`fit_by_tau`].
pub const THETA_MAX: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Independence,
    Clayton,
    Gumbel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CopulaModel {
    pub family: Family,
    /// Ignored for [`Family::Independence`].
    pub theta: f64,
}

impl CopulaModel {
    pub const INDEPENDENCE: CopulaModel = CopulaModel {
        family: Family::Independence,
        theta: 0.0,
    };

    pub fn new(family: Family, theta: f64) -> Result<Self> {
        let ok = match family {
            Family::Independence => true,
            Family::Clayton => theta > 0.0 && theta.is_finite(),
            Family::Gumbel => theta >= 1.0 && theta.is_finite(),
        };
        if !ok {
            return Err(Error::InvalidSpec(format!("theta = {theta} is invalid for {family:?}")));
        }
        Ok(CopulaModel { family, theta })
    }

    pub fn clayton(theta: f64) -> Result<Self> {
        Self::new(Family::Clayton, theta)
    }

    pub fn gumbel(theta: f64) -> Result<Self> {
        Self::new(Family::Gumbel, theta)
    }

    /// Population Kendall tau.
    pub fn kendall_tau(&self) -> f64 {
        match self.family {
            Family::Independence => 0.0,
            Family::Clayton => self.theta / (self.theta + 2.0),
            Family::Gumbel => 1.0 - 1.0 / self.theta,
        }
    }
}

/// `ψ(t)` on `(0, 1]`.
pub fn generator(model: &CopulaModel, t: f64) -> Result<f64> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::Domain(format!("generator argument must be in (0,1], got {t}")));
    }
    Ok(match model.family {
        Family::Independence => -t.ln(),
        Family::Clayton => (t.powf(-model.theta) - 1.0) / model.theta,
        Family::Gumbel => (-t.ln()).powf(model.theta),
    })
}

/// `ψ⁻¹(s)` for `s ≥ 0`.
pub fn generator_inverse(model: &CopulaModel, s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::Domain(format!("generator inverse needs s >= 0, got {s}")));
    }
    Ok(inverse_unchecked(model, s))
}

fn inverse_unchecked(model: &CopulaModel, s: f64) -> f64 {
    match model.family {
        Family::Independence => (-s).exp(),
        Family::Clayton => (1.0 + model.theta * s).powf(-1.0 / model.theta),
        Family::Gumbel => (-s.powf(1.0 / model.theta)).exp(),
    }
}

/// `C(u)` on `[0, 1]^k`; any zero coordinate gives 0.
pub fn copula_cdf(model: &CopulaModel, u: &[f64]) -> Result<f64> {
    if let Some(bad) = u.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Domain(format!("copula argument must be in [0,1], got {bad}")));
    }
    if u.contains(&0.0) {
        return Ok(0.0);
    }
    let mut s = 0.0;
    for &ui in u {
        s += generator(model, ui)?;
    }
    generator_inverse(model, s)
}

/// `n × k` draws from `model`, deterministic in `seed`.
pub fn sample(model: &CopulaModel, k: usize, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n < 1 || k < 2 {
        return Err(Error::Precondition(format!("sampling needs n >= 1 and k >= 2, got n={n}, k={k}")));
    }
    let model = CopulaModel::new(model.family, model.theta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gamma = match model.family {
        Family::Clayton => Some(
            Gamma::new(1.0 / model.theta, model.theta).map_err(|e| Error::InvalidSpec(e.to_string()))?,
        ),
        _ => None,
    };
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let m = match model.family {
            Family::Independence => 1.0,
            Family::Clayton => gamma.as_ref().map_or(1.0, |g| g.sample(&mut rng)),
            Family::Gumbel => positive_stable(1.0 / model.theta, &mut rng),
        };
        let row: Vec<f64> = (0..k)
            .map(|_| {
                let e: f64 = Exp1.sample(&mut rng);
                inverse_unchecked(&model, e / m)
            })
            .collect();
        out.push(row);
    }
    Ok(out)
}

/// Positive `alpha`-stable variable with Laplace transform `exp(−s^alpha)`,
/// via Kanter's representation of the Chambers–Mallows–Stuck transform.
fn positive_stable<R: Rng>(alpha: f64, rng: &mut R) -> f64 {
    if alpha >= 1.0 {
        return 1.0;
    }
    let v = PI * rng.random::<f64>();
    let v = if v == 0.0 { f64::MIN_POSITIVE } else { v };
    let w: f64 = Exp1.sample(rng);
    let a = (alpha * v).sin() / v.sin().powf(1.0 / alpha);
    let b = (((1.0 - alpha) * v).sin() / w).powf((1.0 - alpha) / alpha);
    a * b
}

/// Kendall's tau-b between two columns.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::dim("kendall tau column", x.len(), y.len()));
    }
    let n = x.len();
    let (mut conc, mut disc, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = (x[i] - x[j]).partial_cmp(&0.0);
            let dy = (y[i] - y[j]).partial_cmp(&0.0);
            use std::cmp::Ordering::*;
            match (dx, dy) {
                (Some(Equal), Some(Equal)) => {}
                (Some(Equal), _) => tx += 1,
                (_, Some(Equal)) => ty += 1,
                (a, b) if a == b => conc += 1,
                _ => disc += 1,
            }
        }
    }
    let nx = (conc + disc + tx) as f64;
    let ny = (conc + disc + ty) as f64;
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::Estimation("kendall tau undefined for a constant column".into()));
    }
    Ok((conc - disc) as f64 / (nx * ny).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoObservations {
    /// Rows are observations, columns sectors.
    pub u: Vec<Vec<f64>>,
    /// Column had no variation (for intensities: no events at all).
    pub degenerate: Vec<bool>,
}

impl PseudoObservations {
    pub fn n(&self) -> usize {
        self.u.len()
    }

    pub fn k(&self) -> usize {
        self.degenerate.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.u.iter().map(|r| r[j]).collect()
    }
}

/// Average ranks scaled by `1/(n+1)`.
pub fn rank_column(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; n];
    let mut s = 0;
    while s < n {
        let mut e = s;
        while e + 1 < n && values[idx[e + 1]] == values[idx[s]] {
            e += 1;
        }
        let r = (s + e) as f64 / 2.0 + 1.0;
        for &i in &idx[s..=e] {
            out[i] = r / (n as f64 + 1.0);
        }
        s = e + 1;
    }
    out
}

/// Rank-transforms an `n × k` matrix column by column.
pub fn rank_transform(data: &[Vec<f64>]) -> Result<PseudoObservations> {
    let n = data.len();
    let k = data.first().map_or(0, Vec::len);
    if data.iter().any(|r| r.len() != k) {
        return Err(Error::Precondition("ragged observation matrix".into()));
    }
    let mut u = vec![vec![0.0; k]; n];
    let mut degenerate = vec![false; k];
    for j in 0..k {
        let col: Vec<f64> = data.iter().map(|r| r[j]).collect();
        degenerate[j] = col.iter().all(|&v| v == col[0]);
        for (i, r) in rank_column(&col).into_iter().enumerate() {
            u[i][j] = r;
        }
    }
    Ok(PseudoObservations { u, degenerate })
}

/// Largest jump per sector and replicate, rank-transformed. A column whose
/// sector never had an event is flagged degenerate.
pub fn intensities_from_reports(reports: &[CascadeReport], k: usize) -> Result<PseudoObservations> {
    if reports.len() < 10 {
        return Err(Error::Precondition(format!(
            "need at least 10 replicate reports, got {}",
            reports.len()
        )));
    }
    let raw: Vec<Vec<f64>> = reports
        .iter()
        .map(|r| {
            if r.k != k {
                return Err(Error::dim("report sectors", k, r.k));
            }
            Ok(r.sector_intensities())
        })
        .collect::<Result<_>>()?;
    let mut pseudo = rank_transform(&raw)?;
    for j in 0..k {
        pseudo.degenerate[j] |= raw.iter().all(|r| r[j] == 0.0);
    }
    Ok(pseudo)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOutcome {
    pub model: CopulaModel,
    /// Empirical tau (pairwise mean when `k > 2`).
    pub tau: f64,
    /// θ hit [`THETA_MAX`].
    pub saturated: bool,
    /// Requested family was replaced by independence because `τ` is not
    /// significantly positive.
    pub fell_back: bool,
}

/// Pairwise Kendall tau matrix.
pub fn tau_matrix(pseudo: &PseudoObservations) -> Result<Vec<Vec<f64>>> {
    let k = pseudo.k();
    let cols: Vec<Vec<f64>> = (0..k).map(|j| pseudo.column(j)).collect();
    let mut m = vec![vec![1.0; k]; k];
    for i in 0..k {
        for j in i + 1..k {
            let t = kendall_tau(&cols[i], &cols[j])?;
            m[i][j] = t;
            m[j][i] = t;
        }
    }
    Ok(m)
}

/// One-sided 95% critical value of Kendall's tau under independence,
/// from its null variance `2(2n+5) / (9n(n−1))`.
pub fn independence_tau_cutoff(n: usize) -> f64 {
    let n = n as f64;
    1.645 * (2.0 * (2.0 * n + 5.0) / (9.0 * n * (n - 1.0))).sqrt()
}

/// Moment-matching fit through the Kendall tau link. Falls back to
/// independence when `τ ≤ independence_tau_cutoff(n)`.
pub fn fit_by_tau(pseudo: &PseudoObservations, family: Family) -> Result<FitOutcome> {
    if pseudo.n() < 10 || pseudo.k() < 2 {
        return Err(Error::Precondition(format!(
            "fit needs n >= 10 and k >= 2, got n={}, k={}",
            pseudo.n(),
            pseudo.k()
        )));
    }
    if let Some(j) = pseudo.degenerate.iter().position(|&d| d) {
        return Err(Error::Estimation(format!("column {j} is degenerate")));
    }
    let m = tau_matrix(pseudo)?;
    let k = pseudo.k();
    let pairs = (k * (k - 1) / 2) as f64;
    let tau = (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).map(|(i, j)| m[i][j]).sum::<f64>() / pairs;
    let indep = FitOutcome {
        model: CopulaModel::INDEPENDENCE,
        tau,
        saturated: false,
        fell_back: family != Family::Independence,
    };
    if family == Family::Independence || tau <= independence_tau_cutoff(pseudo.n()) {
        return Ok(indep);
    }
    let raw = match family {
        Family::Clayton => 2.0 * tau / (1.0 - tau),
        _ => 1.0 / (1.0 - tau),
    };
    let saturated = !(raw < THETA_MAX);
    let theta = if saturated { THETA_MAX } else { raw };
    Ok(FitOutcome {
        model: CopulaModel::new(family, theta)?,
        tau,
        saturated,
        fell_back: false,
    })
}
