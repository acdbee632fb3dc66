//! Slice-level hyperboloid kernels and their vector-Jacobian products.
//!
//! Everything here works on raw ambient coordinates in `R^{d+1}` (last entry
//! is the time-like coordinate) and skips validation. The typed API in the
//! parent module and the network code are both built on top of these.
//!
//! The VJPs differentiate the ambient formulas as written, so they are exact
//! for perturbations that stay on the hyperboloid; callers that need a
//! Riemannian gradient project the result onto the tangent space.

use crate::error::{Error, Result};

/// Largest argument accepted by `cosh`/`sinh` before reporting overflow.
pub const MAX_HYPERBOLIC_ARG: f64 = 350.0;

const SMALL_NORM: f64 = 1e-3;
const SMALL_GAP: f64 = 1e-5;

#[inline]
pub fn mink(u: &[f64], v: &[f64]) -> f64 {
    let n = u.len() - 1;
    let mut acc = -u[n] * v[n];
    for i in 0..n {
        acc += u[i] * v[i];
    }
    acc
}

#[inline]
pub fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Applies the Minkowski signature `J = diag(1, .., 1, -1)` in place.
#[inline]
fn flip_time(v: &mut [f64]) {
    if let Some(last) = v.last_mut() {
        *last = -*last;
    }
}

fn check_arg(n: f64) -> Result<()> {
    if !n.is_finite() {
        return Err(Error::NonFinite("hyperbolic argument".into()));
    }
    if n > MAX_HYPERBOLIC_ARG {
        return Err(Error::Overflow(n));
    }
    Ok(())
}

/// `sinh(n)/n`, `cosh(n)` and `(cosh(n) - sinh(n)/n)/n^2`, the latter two
/// series-expanded near zero.
fn exp_coefficients(n: f64) -> (f64, f64, f64) {
    let c = n.cosh();
    if n < SMALL_NORM {
        let n2 = n * n;
        (1.0 + n2 / 6.0, c, 1.0 / 3.0 + n2 / 30.0)
    } else {
        let s = n.sinh() / n;
        (s, c, (c - s) / (n * n))
    }
}

/// Minkowski norm of a (spacelike) vector; small negative squares from
/// roundoff are clamped to zero.
#[inline]
pub fn mink_norm(v: &[f64]) -> f64 {
    mink(v, v).max(0.0).sqrt()
}

/// `Exp_x(v) = cosh(|v|) x + sinh(|v|) v / |v|`.
pub fn exp(x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    let n = mink_norm(v);
    check_arg(n)?;
    let (s, c, _) = exp_coefficients(n);
    Ok(x.iter().zip(v).map(|(xi, vi)| c * xi + s * vi).collect())
}

/// VJP of [`exp`]: returns `(x_bar, v_bar)`.
pub fn exp_vjp(x: &[f64], v: &[f64], g: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = mink_norm(v);
    let (s, c, q2) = exp_coefficients(n);
    let x_bar: Vec<f64> = g.iter().map(|gi| c * gi).collect();
    let k = dot(g, x) * s + dot(g, v) * q2;
    let mut jv = v.to_vec();
    flip_time(&mut jv);
    let v_bar = g.iter().zip(&jv).map(|(gi, ji)| s * gi + k * ji).collect();
    (x_bar, v_bar)
}

/// `acosh(s)/sqrt(s^2-1)` and its derivative in `s`, with `s >= 1`.
fn log_coefficients(s: f64) -> (f64, f64) {
    let e = s - 1.0;
    if e < SMALL_GAP {
        (1.0 - e / 3.0 + 2.0 * e * e / 15.0, -1.0 / 3.0 + 4.0 * e / 15.0)
    } else {
        let root = (e * (s + 1.0)).sqrt();
        let g = s.acosh() / root;
        (g, (1.0 - s * g) / (e * (s + 1.0)))
    }
}

/// `Log_a(x) = d(a,x) (x + <a|x> a) / |x + <a|x> a|_M`, written as
/// `g(s) (x - s a)` with `s = -<a|x>_M`.
pub fn log(a: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    let s_raw = -mink(a, x);
    if !s_raw.is_finite() {
        return Err(Error::NonFinite("Minkowski product in log map".into()));
    }
    let s = s_raw.max(1.0);
    let (g, _) = log_coefficients(s);
    Ok(x.iter().zip(a).map(|(xi, ai)| g * (xi - s * ai)).collect())
}

/// VJP of [`log`]: returns `(a_bar, x_bar)`.
pub fn log_vjp(a: &[f64], x: &[f64], gbar: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let s = (-mink(a, x)).max(1.0);
    let (g, gp) = log_coefficients(s);
    let y: Vec<f64> = x.iter().zip(a).map(|(xi, ai)| xi - s * ai).collect();
    let kappa = gp * dot(gbar, &y) - g * dot(gbar, a);
    let mut ja = a.to_vec();
    flip_time(&mut ja);
    let mut jx = x.to_vec();
    flip_time(&mut jx);
    let x_bar = gbar.iter().zip(&ja).map(|(gi, ji)| g * gi - kappa * ji).collect();
    let a_bar = gbar.iter().zip(&jx).map(|(gi, ji)| -g * s * gi - kappa * ji).collect();
    (a_bar, x_bar)
}

/// Parallel transport along the geodesic from `x` to `b`:
/// `u + <b|u>_M / (1 - <x|b>_M) (x + b)`.
pub fn transport(x: &[f64], b: &[f64], u: &[f64]) -> Vec<f64> {
    let denom = 1.0 - mink(x, b);
    let k = mink(b, u) / denom;
    u.iter()
        .zip(x.iter().zip(b))
        .map(|(ui, (xi, bi))| ui + k * (xi + bi))
        .collect()
}

/// VJP of [`transport`]: returns `(x_bar, b_bar, u_bar)`.
pub fn transport_vjp(
    x: &[f64],
    b: &[f64],
    u: &[f64],
    g: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let denom = 1.0 - mink(x, b);
    let bu = mink(b, u);
    let k = bu / denom;
    let q: f64 = g
        .iter()
        .zip(x.iter().zip(b))
        .map(|(gi, (xi, bi))| gi * (xi + bi))
        .sum();
    let last = u.len() - 1;
    let sig = |i: usize| if i == last { -1.0 } else { 1.0 };
    let r = q / denom;
    let r2 = q * bu / (denom * denom);
    let mut x_bar = Vec::with_capacity(u.len());
    let mut b_bar = Vec::with_capacity(u.len());
    let mut u_bar = Vec::with_capacity(u.len());
    for i in 0..u.len() {
        let s = sig(i);
        u_bar.push(g[i] + r * s * b[i]);
        b_bar.push(k * g[i] + r * s * u[i] + r2 * s * x[i]);
        x_bar.push(k * g[i] + r2 * s * b[i]);
    }
    (x_bar, b_bar, u_bar)
}

/// Unit-curvature distance from the polar form of the hyperbolic law of
/// cosines, `sinh^2(d/2) = sinh^2((r-s)/2) + sinh(r) sinh(s) sin^2(t/2)`,
/// where `r`, `s` are the distances to the basepoint and `t` is the angle
/// between the spatial parts. It equals `acosh(-<x|y>_M)` on the
/// hyperboloid but avoids cancelling large Minkowski terms, so it keeps
/// full relative precision for points far from the basepoint.
pub fn dist(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() - 1;
    let nx = x[..n].iter().map(|v| v * v).sum::<f64>().sqrt();
    let ny = y[..n].iter().map(|v| v * v).sum::<f64>().sqrt();
    let (r, s) = (nx.asinh(), ny.asinh());
    let mut chord2 = 0.0;
    if nx > 0.0 && ny > 0.0 {
        for i in 0..n {
            let diff = x[i] / nx - y[i] / ny;
            chord2 += diff * diff;
        }
    }
    let radial = ((r - s).abs() / 2.0).sinh();
    let angular = r.sinh().sqrt() * s.sinh().sqrt() * chord2.sqrt() / 2.0;
    2.0 * radial.hypot(angular).asinh()
}

/// Distance between `Exp_1(lift(z1))` and `Exp_1(lift(z2))`, computed from
/// the tangent coordinates with the same polar formula as [`dist`].
pub fn chart_dist(z1: &[f64], z2: &[f64]) -> f64 {
    let (r, s) = (norm(z1), norm(z2));
    let radial = ((r - s).abs() / 2.0).sinh();
    let angular = r.sinh().sqrt() * s.sinh().sqrt() * unit_chord(z1, r, z2, s) / 2.0;
    2.0 * radial.hypot(angular).asinh()
}

fn norm(z: &[f64]) -> f64 {
    z.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `|z1/r - z2/s|`, zero if either vector vanishes.
fn unit_chord(z1: &[f64], r: f64, z2: &[f64], s: f64) -> f64 {
    if r == 0.0 || s == 0.0 {
        return 0.0;
    }
    z1.iter()
        .zip(z2)
        .map(|(a, b)| (a / r - b / s) * (a / r - b / s))
        .sum::<f64>()
        .sqrt()
}

/// Gradient of [`chart_dist`] with respect to `z1`, given the distance `d`.
/// From `cosh d = cosh r cosh s - sinh r sinh s cos t`, split into the radial
/// part along `u1 = z1 / r` and the part turning `u1` towards `u2`.
fn chart_dist_grad_first(z1: &[f64], z2: &[f64], d: f64) -> Vec<f64> {
    let sh = d.sinh();
    let (r, s) = (norm(z1), norm(z2));
    if sh < 1e-12 {
        return vec![0.0; z1.len()];
    }
    if r == 0.0 {
        return z2.iter().map(|b| -b / s * s.sinh() / sh).collect();
    }
    let chord = unit_chord(z1, r, z2, s);
    let radial = ((r - s).sinh() + r.cosh() * s.sinh() * chord * chord / 2.0) / sh;
    let cos_t = if s == 0.0 {
        0.0
    } else {
        z1.iter().zip(z2).map(|(a, b)| (a / r) * (b / s)).sum::<f64>()
    };
    let turn = if s == 0.0 { 0.0 } else { r.sinh() / r * s.sinh() / sh };
    z1.iter()
        .zip(z2)
        .map(|(a, b)| {
            let u1 = a / r;
            let u2 = if s == 0.0 { 0.0 } else { b / s };
            radial * u1 - turn * (u2 - cos_t * u1)
        })
        .collect()
}

/// Gradients of [`chart_dist`] with respect to both arguments.
pub fn chart_dist_grad(z1: &[f64], z2: &[f64], d: f64) -> (Vec<f64>, Vec<f64>) {
    (chart_dist_grad_first(z1, z2, d), chart_dist_grad_first(z2, z1, d))
}

/// Textbook `acosh(-<x|y>_M)` (argument clamped at 1).
pub fn dist_acosh(x: &[f64], y: &[f64]) -> f64 {
    (-mink(x, y)).max(1.0).acosh()
}

/// Gradient of the unit-curvature distance with respect to both arguments,
/// given the already-computed distance `d`. Zero when the points coincide.
pub fn dist_grad(x: &[f64], y: &[f64], d: f64) -> (Vec<f64>, Vec<f64>) {
    let sh = d.sinh();
    if sh < 1e-12 {
        return (vec![0.0; x.len()], vec![0.0; y.len()]);
    }
    let mut gx: Vec<f64> = y.iter().map(|v| -v / sh).collect();
    let mut gy: Vec<f64> = x.iter().map(|v| -v / sh).collect();
    flip_time(&mut gx);
    flip_time(&mut gy);
    (gx, gy)
}

/// Relative hyperboloid residual `|1 + sum x_i^2 - x_{d+1}^2| / max(1, x_{d+1}^2)`.
pub fn hyperboloid_residual(x: &[f64]) -> f64 {
    let n = x.len() - 1;
    let last2 = x[n] * x[n];
    let spatial: f64 = x[..n].iter().map(|v| v * v).sum();
    (1.0 + spatial - last2).abs() / last2.max(1.0)
}

/// Recomputes the time coordinate from the spatial ones.
pub fn reproject(x: &mut [f64]) {
    let n = x.len() - 1;
    let spatial: f64 = x[..n].iter().map(|v| v * v).sum();
    x[n] = (1.0 + spatial).sqrt();
}

/// Projects an ambient vector onto the tangent space at `x`:
/// `v + <x|v>_M x`.
pub fn tangent_project(x: &[f64], v: &[f64]) -> Vec<f64> {
    let k = mink(x, v);
    v.iter().zip(x).map(|(vi, xi)| vi + k * xi).collect()
}

/// Riemannian gradient at `x` of a function whose Euclidean ambient
/// gradient is `g`: the tangent projection of `J g`.
pub fn riemannian_grad(x: &[f64], g: &[f64]) -> Vec<f64> {
    let mut jg = g.to_vec();
    flip_time(&mut jg);
    tangent_project(x, &jg)
}
