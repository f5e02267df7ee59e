//! The seven elementary catastrophes.
//!
//! Potentials are the polynomial normal forms with their usual coefficient
//! convention (the `1/3`, `1/4`, … factors on the A-series), so the
//! equilibrium conditions `∇_x V = 0` are the monic polynomials
//!
//! ```text
//! fold         x² + a
//! cusp         x³ + a x + b
//! swallowtail  x⁴ + a x² + b x + c
//! butterfly    x⁵ + a x³ + b x² + c x + d
//! ```
//!
//! and the umbilics use `x³ − 3xy² + a(x²+y²) + bx + cy`,
//! `x³ + y³ + axy + bx + cy` and `x²y + y⁴ + ax² + by² + cx + dy`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::linalg::{inf_norm, sym_eigen};
use crate::poly;
use crate::{Error, Result};

/// Smallest absolute Hessian eigenvalue below which a critical point is degenerate.
pub const TOL_DEGENERACY: f64 = 1e-8;
/// Euclidean merge radius for deduplicating Newton roots.
pub const TOL_MERGE: f64 = 1e-6;
/// Newton starts per axis for the two-variable forms.
pub const NEWTON_GRID: usize = 21;

const NEWTON_MAX_ITER: usize = 50;
const NEWTON_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalForm {
    Fold,
    Cusp,
    Swallowtail,
    Butterfly,
    EllipticUmbilic,
    HyperbolicUmbilic,
    ParabolicUmbilic,
}

impl NormalForm {
    pub const ALL: [NormalForm; 7] = [
        NormalForm::Fold,
        NormalForm::Cusp,
        NormalForm::Swallowtail,
        NormalForm::Butterfly,
        NormalForm::EllipticUmbilic,
        NormalForm::HyperbolicUmbilic,
        NormalForm::ParabolicUmbilic,
    ];

    pub fn behavior_dim(self) -> usize {
        if self.is_a_series() {
            1
        } else {
            2
        }
    }

    pub fn control_dim(self) -> usize {
        match self {
            NormalForm::Fold => 1,
            NormalForm::Cusp => 2,
            NormalForm::Swallowtail => 3,
            NormalForm::Butterfly => 4,
            NormalForm::EllipticUmbilic => 3,
            NormalForm::HyperbolicUmbilic => 3,
            NormalForm::ParabolicUmbilic => 4,
        }
    }

    /// ADE label.
    pub fn symbol(self) -> &'static str {
        match self {
            NormalForm::Fold => "A2",
            NormalForm::Cusp => "A3",
            NormalForm::Swallowtail => "A4",
            NormalForm::Butterfly => "A5",
            NormalForm::EllipticUmbilic => "D4-",
            NormalForm::HyperbolicUmbilic => "D4+",
            NormalForm::ParabolicUmbilic => "D5",
        }
    }

    pub fn is_a_series(self) -> bool {
        matches!(
            self,
            NormalForm::Fold | NormalForm::Cusp | NormalForm::Swallowtail | NormalForm::Butterfly
        )
    }

    fn check(self, x: &[f64], alpha: &[f64]) -> Result<()> {
        if x.len() != self.behavior_dim() {
            return Err(Error::dim("behavior vector", self.behavior_dim(), x.len()));
        }
        if alpha.len() != self.control_dim() {
            return Err(Error::dim("control vector", self.control_dim(), alpha.len()));
        }
        Ok(())
    }

    pub fn potential(self, x: &[f64], alpha: &[f64]) -> Result<f64> {
        self.check(x, alpha)?;
        Ok(self.potential_unchecked(x, alpha))
    }

    pub fn gradient(self, x: &[f64], alpha: &[f64]) -> Result<Vec<f64>> {
        self.check(x, alpha)?;
        let mut g = vec![0.0; self.behavior_dim()];
        self.gradient_into(x, alpha, &mut g);
        Ok(g)
    }

    pub fn hessian(self, x: &[f64], alpha: &[f64]) -> Result<DMatrix<f64>> {
        self.check(x, alpha)?;
        let d = self.behavior_dim();
        let mut h = DMatrix::zeros(d, d);
        self.hessian_into(x, alpha, &mut h, 0);
        Ok(h)
    }

    /// Mixed derivatives `∂(∇_x V)/∂α`, a `behavior_dim × control_dim` matrix.
    pub fn control_jacobian(self, x: &[f64], alpha: &[f64]) -> Result<DMatrix<f64>> {
        self.check(x, alpha)?;
        let mut b = DMatrix::zeros(self.behavior_dim(), self.control_dim());
        self.control_jacobian_into(x, &mut b, 0, 0);
        Ok(b)
    }

    pub(crate) fn potential_unchecked(self, x: &[f64], a: &[f64]) -> f64 {
        match self {
            NormalForm::Fold => {
                let x = x[0];
                x * x * x / 3.0 + a[0] * x
            }
            NormalForm::Cusp => {
                let x = x[0];
                let x2 = x * x;
                x2 * x2 / 4.0 + 0.5 * a[0] * x2 + a[1] * x
            }
            NormalForm::Swallowtail => {
                let x = x[0];
                let x2 = x * x;
                x2 * x2 * x / 5.0 + a[0] * x2 * x / 3.0 + 0.5 * a[1] * x2 + a[2] * x
            }
            NormalForm::Butterfly => {
                let x = x[0];
                let x2 = x * x;
                x2 * x2 * x2 / 6.0
                    + 0.25 * a[0] * x2 * x2
                    + a[1] * x2 * x / 3.0
                    + 0.5 * a[2] * x2
                    + a[3] * x
            }
            NormalForm::EllipticUmbilic => {
                let (x, y) = (x[0], x[1]);
                x * x * x - 3.0 * x * y * y + a[0] * (x * x + y * y) + a[1] * x + a[2] * y
            }
            NormalForm::HyperbolicUmbilic => {
                let (x, y) = (x[0], x[1]);
                x * x * x + y * y * y + a[0] * x * y + a[1] * x + a[2] * y
            }
            NormalForm::ParabolicUmbilic => {
                let (x, y) = (x[0], x[1]);
                let y2 = y * y;
                x * x * y + y2 * y2 + a[0] * x * x + a[1] * y2 + a[2] * x + a[3] * y
            }
        }
    }

    pub(crate) fn gradient_into(self, x: &[f64], a: &[f64], out: &mut [f64]) {
        match self {
            NormalForm::Fold => out[0] = x[0] * x[0] + a[0],
            NormalForm::Cusp => {
                let x = x[0];
                out[0] = x * x * x + a[0] * x + a[1];
            }
            NormalForm::Swallowtail => {
                let x = x[0];
                out[0] = ((x * x + a[0]) * x + a[1]) * x + a[2];
            }
            NormalForm::Butterfly => {
                let x = x[0];
                out[0] = (((x * x + a[0]) * x + a[1]) * x + a[2]) * x + a[3];
            }
            NormalForm::EllipticUmbilic => {
                let (x, y) = (x[0], x[1]);
                out[0] = 3.0 * x * x - 3.0 * y * y + 2.0 * a[0] * x + a[1];
                out[1] = -6.0 * x * y + 2.0 * a[0] * y + a[2];
            }
            NormalForm::HyperbolicUmbilic => {
                let (x, y) = (x[0], x[1]);
                out[0] = 3.0 * x * x + a[0] * y + a[1];
                out[1] = 3.0 * y * y + a[0] * x + a[2];
            }
            NormalForm::ParabolicUmbilic => {
                let (x, y) = (x[0], x[1]);
                out[0] = 2.0 * x * y + 2.0 * a[0] * x + a[2];
                out[1] = x * x + 4.0 * y * y * y + 2.0 * a[1] * y + a[3];
            }
        }
    }

    /// Writes the sector Hessian into `h` at diagonal offset `off`.
    pub(crate) fn hessian_into(self, x: &[f64], a: &[f64], h: &mut DMatrix<f64>, off: usize) {
        match self {
            NormalForm::Fold => h[(off, off)] = 2.0 * x[0],
            NormalForm::Cusp => h[(off, off)] = 3.0 * x[0] * x[0] + a[0],
            NormalForm::Swallowtail => {
                let x = x[0];
                h[(off, off)] = 4.0 * x * x * x + 2.0 * a[0] * x + a[1];
            }
            NormalForm::Butterfly => {
                let x = x[0];
                let x2 = x * x;
                h[(off, off)] = 5.0 * x2 * x2 + 3.0 * a[0] * x2 + 2.0 * a[1] * x + a[2];
            }
            NormalForm::EllipticUmbilic => {
                let (x, y) = (x[0], x[1]);
                h[(off, off)] = 6.0 * x + 2.0 * a[0];
                h[(off, off + 1)] = -6.0 * y;
                h[(off + 1, off)] = -6.0 * y;
                h[(off + 1, off + 1)] = -6.0 * x + 2.0 * a[0];
            }
            NormalForm::HyperbolicUmbilic => {
                let (x, y) = (x[0], x[1]);
                h[(off, off)] = 6.0 * x;
                h[(off, off + 1)] = a[0];
                h[(off + 1, off)] = a[0];
                h[(off + 1, off + 1)] = 6.0 * y;
            }
            NormalForm::ParabolicUmbilic => {
                let (x, y) = (x[0], x[1]);
                h[(off, off)] = 2.0 * y + 2.0 * a[0];
                h[(off, off + 1)] = 2.0 * x;
                h[(off + 1, off)] = 2.0 * x;
                h[(off + 1, off + 1)] = 12.0 * y * y + 2.0 * a[1];
            }
        }
    }

    pub(crate) fn control_jacobian_into(
        self,
        x: &[f64],
        b: &mut DMatrix<f64>,
        row: usize,
        col: usize,
    ) {
        match self {
            NormalForm::Fold | NormalForm::Cusp | NormalForm::Swallowtail | NormalForm::Butterfly => {
                // control j multiplies x^{p-1-j} in the monic equilibrium polynomial
                let p = self.control_dim();
                for j in 0..p {
                    b[(row, col + j)] = x[0].powi((p - 1 - j) as i32);
                }
            }
            NormalForm::EllipticUmbilic => {
                b[(row, col)] = 2.0 * x[0];
                b[(row, col + 1)] = 1.0;
                b[(row + 1, col)] = 2.0 * x[1];
                b[(row + 1, col + 2)] = 1.0;
            }
            NormalForm::HyperbolicUmbilic => {
                b[(row, col)] = x[1];
                b[(row, col + 1)] = 1.0;
                b[(row + 1, col)] = x[0];
                b[(row + 1, col + 2)] = 1.0;
            }
            NormalForm::ParabolicUmbilic => {
                b[(row, col)] = 2.0 * x[0];
                b[(row, col + 2)] = 1.0;
                b[(row + 1, col + 1)] = 2.0 * x[1];
                b[(row + 1, col + 3)] = 1.0;
            }
        }
    }

    /// Ascending coefficients of the A-series equilibrium polynomial `V'(x)`.
    ///
    /// Panics for the two-variable forms.
    pub fn gradient_polynomial(self, a: &[f64]) -> Vec<f64> {
        match self {
            NormalForm::Fold => vec![a[0], 0.0, 1.0],
            NormalForm::Cusp => vec![a[1], a[0], 0.0, 1.0],
            NormalForm::Swallowtail => vec![a[2], a[1], a[0], 0.0, 1.0],
            NormalForm::Butterfly => vec![a[3], a[2], a[1], a[0], 0.0, 1.0],
            _ => panic!("{:?} has two behavior variables", self),
        }
    }

    /// All critical points inside `search_box`, classified by Hessian signature.
    ///
    /// One-variable forms are exact up to rounding: every real root of the
    /// equilibrium polynomial inside the box is returned. Two-variable forms
    /// run Newton from a `21 × 21` start grid on the box; roots outside the
    /// basins of every start are missed, so completeness there is best effort.
    pub fn critical_points(self, alpha: &[f64], search_box: SearchBox) -> Result<Vec<CriticalPoint>> {
        if alpha.len() != self.control_dim() {
            return Err(Error::dim("control vector", self.control_dim(), alpha.len()));
        }
        if !(search_box.lo < search_box.hi) {
            return Err(Error::Precondition(format!(
                "empty search box [{}, {}]",
                search_box.lo, search_box.hi
            )));
        }
        let points: Vec<Vec<f64>> = if self.is_a_series() {
            poly::real_roots(&self.gradient_polynomial(alpha), search_box.lo, search_box.hi)
                .into_iter()
                .map(|r| vec![r])
                .collect()
        } else {
            self.newton_grid_roots(alpha, search_box)
        };
        Ok(points
            .into_iter()
            .map(|x| {
                let class = classify(&self.hessian(&x, alpha).expect("dimensions checked"));
                CriticalPoint {
                    point: SectorPoint {
                        x,
                        alpha: alpha.to_vec(),
                    },
                    class,
                }
            })
            .collect())
    }

    fn newton_grid_roots(self, alpha: &[f64], sb: SearchBox) -> Vec<Vec<f64>> {
        let mut found: Vec<Vec<f64>> = Vec::new();
        let step = (sb.hi - sb.lo) / (NEWTON_GRID - 1) as f64;
        for i in 0..NEWTON_GRID {
            for j in 0..NEWTON_GRID {
                let start = [sb.lo + i as f64 * step, sb.lo + j as f64 * step];
                let Some(root) = self.newton2(start, alpha) else {
                    continue;
                };
                if !sb.contains(&root) {
                    continue;
                }
                if found
                    .iter()
                    .all(|f| crate::linalg::euclid(f, &root) > TOL_MERGE)
                {
                    found.push(root.to_vec());
                }
            }
        }
        found.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        found
    }

    fn newton2(self, start: [f64; 2], alpha: &[f64]) -> Option<[f64; 2]> {
        let mut x = start;
        let mut g = [0.0; 2];
        let mut h = DMatrix::zeros(2, 2);
        let mut converged_at = None;
        for it in 0..NEWTON_MAX_ITER {
            self.gradient_into(&x, alpha, &mut g);
            if !g.iter().all(|v| v.is_finite()) {
                return None;
            }
            if inf_norm(&g) < NEWTON_TOL {
                match converged_at {
                    // two polishing steps past the tolerance
                    Some(c) if it >= c + 2 => return Some(x),
                    None => converged_at = Some(it),
                    _ => {}
                }
            }
            self.hessian_into(&x, alpha, &mut h, 0);
            let det = h[(0, 0)] * h[(1, 1)] - h[(0, 1)] * h[(1, 0)];
            let scale = h.abs().max().max(1e-300);
            if det.abs() < 1e-14 * scale * scale {
                return converged_at.map(|_| x);
            }
            let dx = (h[(1, 1)] * g[0] - h[(0, 1)] * g[1]) / det;
            let dy = (-h[(1, 0)] * g[0] + h[(0, 0)] * g[1]) / det;
            x = [x[0] - dx, x[1] - dy];
        }
        self.gradient_into(&x, alpha, &mut g);
        (inf_norm(&g) < NEWTON_TOL).then_some(x)
    }
}

impl std::fmt::Display for NormalForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            NormalForm::Fold => "fold",
            NormalForm::Cusp => "cusp",
            NormalForm::Swallowtail => "swallowtail",
            NormalForm::Butterfly => "butterfly",
            NormalForm::EllipticUmbilic => "elliptic umbilic",
            NormalForm::HyperbolicUmbilic => "hyperbolic umbilic",
            NormalForm::ParabolicUmbilic => "parabolic umbilic",
        };
        write!(f, "{name} ({})", self.symbol())
    }
}

/// Square search region `[lo, hi]^d` applied to every behavior coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBox {
    pub lo: f64,
    pub hi: f64,
}

impl SearchBox {
    pub fn new(lo: f64, hi: f64) -> Self {
        SearchBox { lo, hi }
    }

    pub fn symmetric(r: f64) -> Self {
        SearchBox { lo: -r, hi: r }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().all(|&v| v >= self.lo && v <= self.hi)
    }
}

impl Default for SearchBox {
    fn default() -> Self {
        SearchBox::symmetric(10.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorPoint {
    pub x: Vec<f64>,
    pub alpha: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalKind {
    Minimum,
    Maximum,
    Saddle,
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalPointClass {
    pub kind: CriticalKind,
    pub negative_eigenvalues: usize,
    pub min_abs_eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub point: SectorPoint,
    pub class: CriticalPointClass,
}

/// Classifies a symmetric Hessian by its eigenvalue signs.
pub fn classify(h: &DMatrix<f64>) -> CriticalPointClass {
    let eig = sym_eigen(h);
    let dim = eig.values.len();
    let negative = eig.values.iter().filter(|&&l| l < 0.0).count();
    let min_abs = eig.values.iter().fold(f64::INFINITY, |m, l| m.min(l.abs()));
    let kind = if min_abs < TOL_DEGENERACY {
        CriticalKind::Degenerate
    } else if negative == 0 {
        CriticalKind::Minimum
    } else if negative == dim {
        CriticalKind::Maximum
    } else {
        CriticalKind::Saddle
    };
    CriticalPointClass {
        kind,
        negative_eigenvalues: negative,
        min_abs_eigenvalue: if dim == 0 { 0.0 } else { min_abs },
    }
}

/// `4a³ + 27b²`: negative with three real cusp equilibria, positive with one,
/// zero on the fold lines.
pub fn cusp_discriminant(a: f64, b: f64) -> f64 {
    4.0 * a * a * a + 27.0 * b * b
}

#[cfg(test)]
mod tests {
    use super::*;
    use CriticalKind::*;

    #[test]
    fn dims_by_kind() {
        let dims: Vec<(usize, usize)> = NormalForm::ALL
            .iter()
            .map(|f| (f.behavior_dim(), f.control_dim()))
            .collect();
        assert_eq!(
            dims,
            vec![(1, 1), (1, 2), (1, 3), (1, 4), (2, 3), (2, 3), (2, 4)]
        );
    }

    #[test]
    fn potential_examples() {
        assert_eq!(NormalForm::Fold.potential(&[0.0], &[0.0]).unwrap(), 0.0);
        assert_eq!(NormalForm::Cusp.potential(&[1.0], &[-3.0, 2.0]).unwrap(), 0.75);
        assert_eq!(
            NormalForm::EllipticUmbilic
                .potential(&[1.0, 1.0], &[0.0, 0.0, 0.0])
                .unwrap(),
            -2.0
        );
    }

    #[test]
    fn gradient_examples() {
        assert_eq!(NormalForm::Fold.gradient(&[1.0], &[-1.0]).unwrap(), vec![0.0]);
        assert_eq!(NormalForm::Cusp.gradient(&[1.0], &[-3.0, 2.0]).unwrap(), vec![0.0]);
        assert_eq!(
            NormalForm::Butterfly
                .gradient(&[0.0], &[0.0, 0.0, 0.0, 5.0])
                .unwrap(),
            vec![5.0]
        );
    }

    #[test]
    fn hessian_examples() {
        assert_eq!(NormalForm::Fold.hessian(&[0.0], &[7.0]).unwrap()[(0, 0)], 0.0);
        assert_eq!(NormalForm::Cusp.hessian(&[1.0], &[-3.0, 0.3]).unwrap()[(0, 0)], 0.0);
        let h = NormalForm::EllipticUmbilic
            .hessian(&[0.0, 0.0], &[1.0, 0.0, 0.0])
            .unwrap();
        assert_eq!(h, DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 2.0]));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        assert!(matches!(
            NormalForm::Cusp.potential(&[1.0], &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(NormalForm::EllipticUmbilic.gradient(&[1.0], &[0.0; 3]).is_err());
        assert!(NormalForm::Fold.hessian(&[1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn control_jacobian_matches_coefficients() {
        let x = 1.7;
        let b = NormalForm::Butterfly
            .control_jacobian(&[x], &[0.0; 4])
            .unwrap();
        let expect = [x * x * x, x * x, x, 1.0];
        for (j, e) in expect.iter().enumerate() {
            assert!((b[(0, j)] - e).abs() < 1e-14);
        }
        let b = NormalForm::Fold.control_jacobian(&[x], &[0.0]).unwrap();
        assert_eq!(b[(0, 0)], 1.0);
        let b = NormalForm::Cusp.control_jacobian(&[x], &[0.0; 2]).unwrap();
        assert_eq!((b[(0, 0)], b[(0, 1)]), (x, 1.0));
    }

    fn kinds(cps: &[CriticalPoint]) -> Vec<(f64, CriticalKind)> {
        cps.iter().map(|c| (c.point.x[0], c.class.kind)).collect()
    }

    #[test]
    fn fold_critical_points() {
        let cps = NormalForm::Fold
            .critical_points(&[-1.0], SearchBox::default())
            .unwrap();
        assert_eq!(kinds(&cps), vec![(-1.0, Maximum), (1.0, Minimum)]);
        assert!(NormalForm::Fold
            .critical_points(&[1.0], SearchBox::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn cusp_critical_points() {
        let cps = NormalForm::Cusp
            .critical_points(&[-1.0, 0.0], SearchBox::default())
            .unwrap();
        assert_eq!(
            kinds(&cps),
            vec![(-1.0, Minimum), (0.0, Maximum), (1.0, Minimum)]
        );
    }

    #[test]
    fn degenerate_at_fold_point() {
        let cps = NormalForm::Cusp
            .critical_points(&[-3.0, 2.0], SearchBox::default())
            .unwrap();
        assert_eq!(cps.len(), 2);
        assert_eq!(cps[1].class.kind, Degenerate);
    }

    #[test]
    fn elliptic_umbilic_has_three_saddles_and_an_extremum() {
        // a=-1: critical points of x³−3xy² − (x²+y²): origin (max) and three saddles
        let cps = NormalForm::EllipticUmbilic
            .critical_points(&[-1.0, 0.0, 0.0], SearchBox::symmetric(3.0))
            .unwrap();
        assert_eq!(cps.len(), 4);
        assert_eq!(cps.iter().filter(|c| c.class.kind == Saddle).count(), 3);
        assert_eq!(cps.iter().filter(|c| c.class.kind == Maximum).count(), 1);
    }

    #[test]
    fn bad_inputs_rejected() {
        assert!(NormalForm::Cusp
            .critical_points(&[0.0], SearchBox::default())
            .is_err());
        assert!(NormalForm::Cusp
            .critical_points(&[0.0, 0.0], SearchBox::new(1.0, 1.0))
            .is_err());
    }

    #[test]
    fn cusp_discriminant_examples() {
        assert_eq!(cusp_discriminant(0.0, 0.0), 0.0);
        assert_eq!(cusp_discriminant(-3.0, 2.0), 0.0);
        assert_eq!(cusp_discriminant(-1.0, 0.0), -4.0);
    }
}
