//! Control trajectories `α(t)`: deterministic ramps and Itô diffusions with
//! uniformly elliptic covariance, integrated by Euler–Maruyama.

use nalgebra::{Cholesky, DMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::linalg::{from_rows, sym_eigen};
use crate::{Error, Result};

pub const ELLIPTICITY_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PathKind {
    Ramp {
        start: Vec<f64>,
        end: Vec<f64>,
    },
    Diffusion {
        drift: Vec<f64>,
        covariance: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlPathSpec {
    #[serde(flatten)]
    pub kind: PathKind,
    pub horizon: f64,
    pub dt: f64,
    #[serde(default)]
    pub seed: u64,
}

impl ControlPathSpec {
    pub fn ramp(start: Vec<f64>, end: Vec<f64>, horizon: f64, dt: f64) -> Result<Self> {
        Self::new(PathKind::Ramp { start, end }, horizon, dt, 0)
    }

    pub fn diffusion(
        drift: Vec<f64>,
        covariance: Vec<Vec<f64>>,
        horizon: f64,
        dt: f64,
        seed: u64,
    ) -> Result<Self> {
        Self::new(PathKind::Diffusion { drift, covariance }, horizon, dt, seed)
    }

    pub fn new(kind: PathKind, horizon: f64, dt: f64, seed: u64) -> Result<Self> {
        let spec = ControlPathSpec {
            kind,
            horizon,
            dt,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Checks step sizes, dimensions and (for diffusions) ellipticity.
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::InvalidSpec(format!("horizon must be > 0, got {}", self.horizon)));
        }
        if !(self.dt > 0.0) || !(self.dt < self.horizon) {
            return Err(Error::InvalidSpec(format!(
                "dt must satisfy 0 < dt < horizon, got {}",
                self.dt
            )));
        }
        match &self.kind {
            PathKind::Ramp { start, end } => {
                if start.len() != end.len() {
                    return Err(Error::dim("ramp end", start.len(), end.len()));
                }
            }
            PathKind::Diffusion { drift, covariance } => {
                if covariance.len() != drift.len() || covariance.iter().any(|r| r.len() != drift.len()) {
                    return Err(Error::dim("covariance", drift.len(), covariance.len()));
                }
                if !ellipticity_check(&from_rows(covariance), ELLIPTICITY_FLOOR)? {
                    return Err(Error::InvalidSpec(format!(
                        "covariance is not uniformly elliptic (minimum eigenvalue below {ELLIPTICITY_FLOOR})"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            PathKind::Ramp { start, .. } => start.len(),
            PathKind::Diffusion { drift, .. } => drift.len(),
        }
    }

    /// `ceil(T/dt)`, ignoring rounding noise in the ratio.
    pub fn steps(&self) -> usize {
        let r = self.horizon / self.dt;
        let n = r.round();
        if (r - n).abs() <= 1e-9 * n.max(1.0) {
            n as usize
        } else {
            r.ceil() as usize
        }
    }

    /// Grid `0, dt, 2dt, …` with the last step truncated onto `T`.
    pub fn times(&self) -> Vec<f64> {
        let n = self.steps();
        let mut t: Vec<f64> = (0..n).map(|i| i as f64 * self.dt).collect();
        t.push(self.horizon);
        t
    }
}

/// `true` iff the smallest eigenvalue of the symmetric matrix is `≥ floor`.
pub fn ellipticity_check(covariance: &DMatrix<f64>, floor: f64) -> Result<bool> {
    if !covariance.is_square() {
        return Err(Error::Precondition("covariance must be square".into()));
    }
    let n = covariance.nrows();
    for i in 0..n {
        for j in 0..i {
            if (covariance[(i, j)] - covariance[(j, i)]).abs() > 1e-12 {
                return Err(Error::Precondition(format!(
                    "covariance is not symmetric at ({i},{j})"
                )));
            }
        }
    }
    let eig = sym_eigen(covariance);
    Ok(eig.values.first().is_some_and(|&l| l >= floor))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlPath {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl ControlPath {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    /// Adds a constant offset to every value.
    pub fn shifted(&self, offset: &[f64]) -> ControlPath {
        ControlPath {
            times: self.times.clone(),
            values: self
                .values
                .iter()
                .map(|v| v.iter().zip(offset).map(|(a, d)| a + d).collect())
                .collect(),
        }
    }
}

/// Realizes a path. Ramps carry their own endpoints; diffusions start at `alpha0`.
///
/// Diffusions use `α_{n+1} = α_n + μ Δt + L z √Δt` with `L` the Cholesky
/// factor of the covariance and `z` standard normals from a ChaCha8 stream
/// seeded with `spec.seed`, so the path is a pure function of its inputs.
pub fn simulate_path(spec: &ControlPathSpec, alpha0: &[f64]) -> Result<ControlPath> {
    spec.validate()?;
    let p = spec.dim();
    if alpha0.len() != p {
        return Err(Error::dim("alpha0", p, alpha0.len()));
    }
    let times = spec.times();
    let values = match &spec.kind {
        PathKind::Ramp { start, end } => times
            .iter()
            .map(|&t| {
                let s = t / spec.horizon;
                start.iter().zip(end).map(|(a, b)| a + s * (b - a)).collect()
            })
            .collect(),
        PathKind::Diffusion { drift, covariance } => {
            let chol = Cholesky::new(from_rows(covariance)).ok_or_else(|| {
                Error::InvalidSpec("covariance is not positive definite".into())
            })?;
            let l = chol.l();
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let mut values = Vec::with_capacity(times.len());
            let mut a = alpha0.to_vec();
            values.push(a.clone());
            let mut z = vec![0.0; p];
            for w in times.windows(2) {
                let h = w[1] - w[0];
                let sq = h.sqrt();
                for zi in z.iter_mut() {
                    *zi = StandardNormal.sample(&mut rng);
                }
                for r in 0..p {
                    let noise: f64 = (0..=r).map(|c| l[(r, c)] * z[c]).sum();
                    a[r] += drift[r] * h + noise * sq;
                }
                values.push(a.clone());
            }
            values
        }
    };
    Ok(ControlPath { times, values })
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of ensemble replicate `r`.
pub fn replicate_seed(base_seed: u64, replicate: u64) -> u64 {
    base_seed ^ splitmix64(replicate)
}
