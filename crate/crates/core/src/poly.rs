//! Real roots of low-degree univariate polynomials.
//!
//! Roots are isolated recursively with Rolle's theorem: between consecutive
//! real roots of `p'` the polynomial `p` is monotone, so each such interval
//! holds at most one root and a sign change locates it. A root of `p'` at
//! which `p` vanishes to rounding accuracy is a repeated root of `p` and is
//! reported once.
//!
//! Coefficients are stored in ascending order: `c[0] + c[1] x + …`.

/// Horner evaluation.
pub fn eval(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci)
}

/// Rounding bound on `|eval(c, x)|`, used as the "is zero" threshold.
fn eval_error_bound(c: &[f64], x: f64) -> f64 {
    let mag = c.iter().rev().fold(0.0, |acc, &ci| acc * x.abs() + ci.abs());
    16.0 * f64::EPSILON * (c.len() as f64) * mag
}

pub fn derivative(c: &[f64]) -> Vec<f64> {
    c.iter()
        .enumerate()
        .skip(1)
        .map(|(i, &ci)| i as f64 * ci)
        .collect()
}

fn trim(c: &[f64]) -> &[f64] {
    let mut end = c.len();
    while end > 0 && c[end - 1] == 0.0 {
        end -= 1;
    }
    &c[..end]
}

/// Distinct real roots of `c` in `[lo, hi]`, sorted ascending.
///
/// The zero polynomial has no isolated roots and yields an empty list.
pub fn real_roots(c: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    if !(lo <= hi) {
        return Vec::new();
    }
    let c = trim(c);
    match c.len() {
        0 | 1 => Vec::new(),
        2 => {
            let r = -c[0] / c[1];
            if (lo..=hi).contains(&r) {
                vec![r]
            } else {
                Vec::new()
            }
        }
        _ => {
            let crit = real_roots(&derivative(c), lo, hi);
            let mut knots = Vec::with_capacity(crit.len() + 2);
            knots.push(lo);
            knots.extend(crit.into_iter().filter(|&x| x > lo && x < hi));
            knots.push(hi);
            knots.dedup();

            let vals: Vec<f64> = knots
                .iter()
                .map(|&x| {
                    let v = eval(c, x);
                    if v.abs() <= eval_error_bound(c, x) {
                        0.0
                    } else {
                        v
                    }
                })
                .collect();

            let mut roots = Vec::new();
            for i in 0..knots.len() {
                if vals[i] == 0.0 {
                    roots.push(knots[i]);
                }
                if i + 1 < knots.len() && vals[i] * vals[i + 1] < 0.0 {
                    roots.push(bisect(c, knots[i], knots[i + 1], vals[i]));
                }
            }
            roots.sort_by(f64::total_cmp);
            roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * a.abs().max(1.0));
            roots
        }
    }
}

/// Bisection on a bracket with `sign(p(a)) = sign(fa) ≠ sign(p(b))`.
fn bisect(c: &[f64], mut a: f64, mut b: f64, fa: f64) -> f64 {
    let neg_at_a = fa < 0.0;
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = eval(c, m);
        if fm == 0.0 {
            return m;
        }
        if (fm < 0.0) == neg_at_a {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Cauchy bound: every root satisfies `|x| ≤ 1 + max |c_i / c_n|`.
pub fn cauchy_bound(c: &[f64]) -> f64 {
    let c = trim(c);
    match c.split_last() {
        None => 0.0,
        Some((lead, rest)) => 1.0 + rest.iter().fold(0.0_f64, |m, ci| m.max((ci / lead).abs())),
    }
}
