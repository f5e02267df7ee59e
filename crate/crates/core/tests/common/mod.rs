//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use catnet::catastrophe::NormalForm;
use catnet::network::{CouplingSpec, NetworkSystem};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// Central differences of a scalar function.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|i| {
            y[i] = x[i] + h;
            let p = f(&y);
            y[i] = x[i] - h;
            let m = f(&y);
            y[i] = x[i];
            (p - m) / (2.0 * h)
        })
        .collect()
}

/// Central-difference Jacobian `∂f_r/∂x_c` of a vector function.
pub fn fd_jacobian(f: impl Fn(&[f64]) -> Vec<f64>, x: &[f64], h: f64) -> DMatrix<f64> {
    let rows = f(x).len();
    let mut j = DMatrix::zeros(rows, x.len());
    let mut y = x.to_vec();
    for c in 0..x.len() {
        y[c] = x[c] + h;
        let p = f(&y);
        y[c] = x[c] - h;
        let m = f(&y);
        y[c] = x[c];
        for r in 0..rows {
            j[(r, c)] = (p[r] - m[r]) / (2.0 * h);
        }
    }
    j
}

/// `|a - b| / max(1, |a|, |b|)`.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

fn rank(m: &DMatrix<f64>, tol: f64) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.iter().fold(0.0_f64, |a, &b| a.max(b)).max(1.0);
    sv.iter().filter(|&&s| s > tol * top).count()
}

/// Codimension of the image of the projection `C_ε → control space`,
/// computed from scratch: the Jacobian of `(x, α) ↦ ∇_x V_ε` by finite
/// differences, its right null space from a dense SVD of the zero-padded
/// square matrix, and the rank of the null basis restricted to the `α` rows.
pub fn brute_force_dpi_codim(sys: &NetworkSystem, x: &[f64], alpha: &[f64], tol: f64) -> usize {
    let (n, p) = (sys.n(), sys.p());
    let mut z = x.to_vec();
    z.extend_from_slice(alpha);
    let field = |z: &[f64]| sys.gradient(&z[..n], &z[n..]).unwrap();
    let j = fd_jacobian(field, &z, 1e-6);
    let m = n + p;
    let mut padded = DMatrix::zeros(m, m);
    padded.view_mut((0, 0), (n, m)).copy_from(&j);
    let svd = padded.svd(false, true);
    let vt = svd.v_t.unwrap();
    let top = svd.singular_values.iter().fold(0.0_f64, |a, &b| a.max(b)).max(1.0);
    let null: Vec<usize> = (0..m)
        .filter(|&i| svd.singular_values[i] <= tol * top)
        .collect();
    let mut proj = DMatrix::zeros(p, null.len().max(1));
    for (c, &i) in null.iter().enumerate() {
        for r in 0..p {
            proj[(r, c)] = vt[(i, n + r)];
        }
    }
    p - rank(&proj, tol)
}

/// Real roots of an ascending-coefficient polynomial on `[lo, hi]` by a
/// uniform sign scan refined with bisection. Only sees simple roots.
pub fn bisection_roots(c: &[f64], lo: f64, hi: f64, cells: usize) -> Vec<f64> {
    let eval = |x: f64| c.iter().rev().fold(0.0, |acc, &k| acc * x + k);
    let mut roots = Vec::new();
    let step = (hi - lo) / cells as f64;
    let mut a = lo;
    let mut fa = eval(a);
    for i in 1..=cells {
        let b = lo + step * i as f64;
        let fb = eval(b);
        if fa == 0.0 {
            roots.push(a);
        } else if fa * fb < 0.0 {
            let (mut l, mut r, mut fl) = (a, b, fa);
            for _ in 0..200 {
                let mid = 0.5 * (l + r);
                let fm = eval(mid);
                if fm == 0.0 {
                    l = mid;
                    r = mid;
                    break;
                }
                if fl * fm < 0.0 {
                    r = mid;
                } else {
                    l = mid;
                    fl = fm;
                }
            }
            roots.push(0.5 * (l + r));
        }
        a = b;
        fa = fb;
    }
    if fa == 0.0 {
        roots.push(hi);
    }
    roots
}

/// Index of each sector's control coordinates that multiply the behavior
/// variables linearly (their gradient derivative is 1).
pub fn linear_controls(form: NormalForm) -> Vec<usize> {
    match form {
        NormalForm::Fold => vec![0],
        NormalForm::Cusp => vec![1],
        NormalForm::Swallowtail => vec![2],
        NormalForm::Butterfly => vec![3],
        NormalForm::EllipticUmbilic | NormalForm::HyperbolicUmbilic => vec![1, 2],
        NormalForm::ParabolicUmbilic => vec![2, 3],
    }
}

/// Shifts the linear-term controls so `x` is an exact equilibrium at the
/// returned controls.
pub fn make_equilibrium(sys: &NetworkSystem, x: &[f64], alpha: &[f64]) -> Vec<f64> {
    let g = sys.gradient(x, alpha).unwrap();
    let mut a = alpha.to_vec();
    for (i, form) in sys.sectors().iter().enumerate() {
        let xr = sys.x_range(i);
        let ar = sys.alpha_range(i);
        for (d, lin) in linear_controls(*form).into_iter().enumerate() {
            a[ar.start + lin] -= g[xr.start + d];
        }
    }
    a
}

pub fn system(forms: &[NormalForm], epsilon: f64, lambda: f64) -> NetworkSystem {
    let k = forms.len();
    let lam = (0..k)
        .map(|i| (0..k).map(|j| if i == j { 0.0 } else { lambda }).collect())
        .collect();
    NetworkSystem::new(forms.to_vec(), CouplingSpec::new(epsilon, lam).unwrap()).unwrap()
}

/// Bundled diagnostics fixtures with `k ≤ 3`: (label, system, x, alpha).
pub fn dpi_fixtures() -> Vec<(&'static str, NetworkSystem, Vec<f64>, Vec<f64>)> {
    use NormalForm::*;
    let mut out = Vec::new();
    let two = system(&[Cusp, Cusp], 0.0, 0.0);
    out.push(("double cusp point", two, vec![0.0, 0.0], vec![0.0; 4]));
    let one = system(&[Cusp], 0.0, 0.0);
    out.push(("cusp fold point", one.clone(), vec![1.0], vec![-3.0, 2.0]));
    out.push(("cusp vertex", one.clone(), vec![0.0], vec![0.0, 0.0]));
    out.push(("cusp regular minimum", one, vec![1.0], vec![-1.0, 0.0]));
    let three_folds = system(&[Fold, Fold, Fold], 0.0, 0.0);
    out.push(("three fold points", three_folds, vec![0.0; 3], vec![0.0; 3]));
    let three_cusps = system(&[Cusp, Cusp, Cusp], 0.0, 0.0);
    out.push(("triple cusp point", three_cusps, vec![0.0; 3], vec![0.0; 6]));
    let coupled = system(&[Cusp, Cusp], 0.3, 1.0);
    let a = make_equilibrium(&coupled, &[0.7, -0.4], &[-1.0, 0.0, -0.5, 0.0]);
    out.push(("coupled cusps, regular", coupled.clone(), vec![0.7, -0.4], a));
    // Joint fold: (3x1² + a1)(3x2² + a2) = ε²λ² with a2 = 0.09/(3x2²+a2) choice.
    let a = make_equilibrium(&coupled, &[0.5, 0.5], &[-0.75 + 0.3, 0.0, -0.75 + 0.3, 0.0]);
    out.push(("coupled cusps, joint fold", coupled, vec![0.5, 0.5], a));
    let mixed = system(&[Fold, Cusp, EllipticUmbilic], 0.2, 0.5);
    let a = make_equilibrium(&mixed, &[0.3, -0.2, 0.0, 0.0], &[0.0, -1.0, 0.0, 0.0, 0.0, 0.0]);
    out.push(("fold + cusp + elliptic umbilic", mixed, vec![0.3, -0.2, 0.0, 0.0], a));
    let umb = system(&[HyperbolicUmbilic, ParabolicUmbilic], 0.0, 0.0);
    out.push(("umbilic pair at origin", umb, vec![0.0; 4], vec![0.0; 7]));
    let wide = system(&[Swallowtail, Butterfly], 0.1, 1.0);
    let a = make_equilibrium(&wide, &[0.4, -0.6], &[-1.0, 0.2, 0.0, -0.5, 0.1, 0.3, 0.0]);
    out.push(("swallowtail + butterfly", wide, vec![0.4, -0.6], a));
    out
}
