//! Hyperboloid model of hyperbolic space.
//!
//! Points of `H^d` live on the upper sheet
//! `{x in R^{d+1} : -x_{d+1}^2 + sum_i x_i^2 = -1, x_{d+1} > 0}`, with the
//! time-like coordinate stored last. Tangent vectors at `x` are the ambient
//! vectors Minkowski-orthogonal to `x`; the tangent space at the basepoint
//! `(0, .., 0, 1)` is identified with `R^d` by appending / dropping a zero
//! last coordinate.
//!
//! Distances are for curvature `-1` unless a [`Curvature`] is supplied, in
//! which case they are divided by `sqrt(|kappa|)`.

pub mod kernel;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

pub use kernel::MAX_HYPERBOLIC_ARG;

/// Relative tolerance on the hyperboloid constraint accepted by [`HPoint::new`].
pub const POINT_TOL: f64 = 1e-9;
/// Relative tolerance on the tangency condition accepted by [`TangentVec::new`].
pub const TANGENT_TOL: f64 = 1e-9;

/// A point on the hyperboloid `H^d`, stored as `d + 1` ambient coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct HPoint {
    coords: Vec<f64>,
}

impl HPoint {
    /// Validates `coords` against the hyperboloid constraint.
    ///
    /// The residual `|1 + sum x_i^2 - x_{d+1}^2|` is measured relative to
    /// `max(1, x_{d+1}^2)`: far from the basepoint the squared coordinates
    /// carry rounding error proportional to their magnitude.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::InvalidPoint(format!(
                "need at least 2 coordinates, got {}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("point coordinates".into()));
        }
        if *coords.last().unwrap() <= 0.0 {
            return Err(Error::InvalidPoint("time coordinate must be positive".into()));
        }
        let residual = kernel::hyperboloid_residual(&coords);
        if residual > POINT_TOL {
            return Err(Error::InvalidPoint(format!(
                "hyperboloid residual {residual:e}"
            )));
        }
        Ok(Self { coords })
    }

    pub(crate) fn from_coords_unchecked(coords: Vec<f64>) -> Self {
        Self { coords }
    }

    pub(crate) fn coords_mut(&mut self) -> &mut [f64] {
        &mut self.coords
    }

    /// The point whose spatial coordinates are `spatial`.
    pub fn from_spatial(spatial: &[f64]) -> Result<Self> {
        let mut v = spatial.to_vec();
        v.push(0.0);
        project_to_hyperboloid(&v)
    }

    pub fn basepoint(d: usize) -> Result<Self> {
        basepoint(d)
    }

    /// Dimension `d` of the hyperbolic space (one less than the ambient length).
    pub fn dim(&self) -> usize {
        self.coords.len() - 1
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn spatial(&self) -> &[f64] {
        &self.coords[..self.dim()]
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn is_basepoint(&self) -> bool {
        let d = self.dim();
        self.coords[..d].iter().all(|&c| c == 0.0) && self.coords[d] == 1.0
    }

    /// Embeds `H^d` into `H^{d'}` (`d' >= d`) by zero-padding the spatial part.
    pub fn pad_to(&self, dim: usize) -> Result<Self> {
        if dim < self.dim() {
            return Err(Error::InvalidArgument(format!(
                "cannot pad a point of H^{} into H^{dim}",
                self.dim()
            )));
        }
        let mut coords = self.spatial().to_vec();
        coords.resize(dim, 0.0);
        coords.push(self.coords[self.dim()]);
        Ok(Self { coords })
    }
}

impl TryFrom<Vec<f64>> for HPoint {
    type Error = Error;

    fn try_from(coords: Vec<f64>) -> Result<Self> {
        HPoint::new(coords)
    }
}

impl From<HPoint> for Vec<f64> {
    fn from(p: HPoint) -> Self {
        p.coords
    }
}

/// A vector in the tangent space at `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVec {
    base: HPoint,
    vec: Vec<f64>,
}

impl TangentVec {
    pub fn new(base: HPoint, vec: Vec<f64>) -> Result<Self> {
        check_len(base.coords.len(), vec.len())?;
        if vec.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("tangent vector".into()));
        }
        let scale = 1.0 + norm2(base.coords()) * norm2(&vec);
        let residual = kernel::mink(&vec, base.coords()).abs() / scale;
        if residual > TANGENT_TOL {
            return Err(Error::NotTangent(residual));
        }
        Ok(Self { base, vec })
    }

    #[cfg(test)]
    pub(crate) fn new_unchecked(base: HPoint, vec: Vec<f64>) -> Self {
        Self { base, vec }
    }

    pub fn zero(base: HPoint) -> Self {
        let vec = vec![0.0; base.coords.len()];
        Self { base, vec }
    }

    pub fn base(&self) -> &HPoint {
        &self.base
    }

    pub fn vec(&self) -> &[f64] {
        &self.vec
    }

    /// Minkowski norm `sqrt(<v|v>_M)`.
    pub fn norm(&self) -> f64 {
        kernel::mink_norm(&self.vec)
    }

    pub fn scale(&self, t: f64) -> Self {
        Self {
            base: self.base.clone(),
            vec: self.vec.iter().map(|v| v * t).collect(),
        }
    }
}

/// Sectional curvature `kappa < 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Curvature(f64);

impl Curvature {
    pub const UNIT: Curvature = Curvature(-1.0);

    pub fn new(kappa: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa < 0.0) {
            return Err(Error::InvalidCurvature(kappa));
        }
        Ok(Self(kappa))
    }

    /// The curvature `-tau^2` under which a configuration at scale `tau` in
    /// `H_{-1}` has unit-scale distances.
    pub fn from_scale(tau: f64) -> Result<Self> {
        Self::new(-tau * tau)
    }

    pub fn kappa(self) -> f64 {
        self.0
    }

    pub fn sqrt_abs(self) -> f64 {
        (-self.0).sqrt()
    }
}

impl TryFrom<f64> for Curvature {
    type Error = Error;

    fn try_from(k: f64) -> Result<Self> {
        Curvature::new(k)
    }
}

impl From<Curvature> for f64 {
    fn from(k: Curvature) -> Self {
        k.0
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Minkowski bilinear form `-u_{d+1} v_{d+1} + sum_{i<=d} u_i v_i`.
pub fn minkowski_inner(u: &[f64], v: &[f64]) -> Result<f64> {
    check_len(u.len(), v.len())?;
    if u.len() < 2 {
        return Err(Error::InvalidArgument(
            "Minkowski vectors need at least 2 entries".into(),
        ));
    }
    Ok(kernel::mink(u, v))
}

/// `(0, .., 0, 1)` in `R^{d+1}`.
pub fn basepoint(d: usize) -> Result<HPoint> {
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    let mut coords = vec![0.0; d + 1];
    coords[d] = 1.0;
    Ok(HPoint { coords })
}

/// Identifies `x in R^n` with the tangent vector `(x, 0)` at the basepoint.
pub fn lift(x: &[f64]) -> Result<TangentVec> {
    if x.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("lifted vector".into()));
    }
    let base = basepoint(x.len())?;
    let mut vec = x.to_vec();
    vec.push(0.0);
    Ok(TangentVec { base, vec })
}

/// Inverse of [`lift`]: drops the last coordinate of a tangent vector at the
/// basepoint.
pub fn unlift(t: &TangentVec) -> Result<Vec<f64>> {
    if !t.base.is_basepoint() {
        return Err(Error::NotAtBasepoint);
    }
    let d = t.base.dim();
    Ok(t.vec[..d].to_vec())
}

/// Distance `acosh(-<x|y>_M) / sqrt(|kappa|)`.
pub fn distance(x: &HPoint, y: &HPoint, k: Curvature) -> Result<f64> {
    check_len(x.coords.len(), y.coords.len())?;
    Ok(kernel::dist(&x.coords, &y.coords) / k.sqrt_abs())
}

pub fn exp_map(x: &HPoint, v: &TangentVec) -> Result<HPoint> {
    check_len(x.coords.len(), v.vec.len())?;
    let sq = kernel::mink(&v.vec, &v.vec);
    if sq < -1e-9 {
        return Err(Error::NonSpacelike(sq));
    }
    let out = kernel::exp(&x.coords, &v.vec)?;
    if out.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("exponential map".into()));
    }
    Ok(HPoint { coords: out })
}

pub fn log_map(x: &HPoint, y: &HPoint) -> Result<TangentVec> {
    check_len(x.coords.len(), y.coords.len())?;
    if x == y {
        return Ok(TangentVec::zero(x.clone()));
    }
    let v = kernel::log(&x.coords, &y.coords)?;
    Ok(TangentVec {
        base: x.clone(),
        vec: v,
    })
}

/// Transports `u in T_x` to `T_b` along the geodesic joining `x` and `b`.
pub fn parallel_transport(x: &HPoint, b: &HPoint, u: &TangentVec) -> Result<TangentVec> {
    check_len(x.coords.len(), b.coords.len())?;
    check_len(x.coords.len(), u.vec.len())?;
    if u.base != *x {
        return Err(Error::InvalidArgument(
            "tangent vector is not based at the transport source".into(),
        ));
    }
    if x == b {
        return Ok(u.clone());
    }
    Ok(TangentVec {
        base: b.clone(),
        vec: kernel::transport(&x.coords, &b.coords, &u.vec),
    })
}

/// Keeps the first `d` coordinates of `v` and recomputes the last as
/// `sqrt(1 + sum v_i^2)`.
pub fn project_to_hyperboloid(v: &[f64]) -> Result<HPoint> {
    if v.len() < 2 {
        return Err(Error::InvalidPoint(format!(
            "need at least 2 coordinates, got {}",
            v.len()
        )));
    }
    let d = v.len() - 1;
    if v[..d].iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("projected vector".into()));
    }
    let mut coords = v.to_vec();
    kernel::reproject(&mut coords);
    if !coords[d].is_finite() {
        return Err(Error::NonFinite("projected vector".into()));
    }
    Ok(HPoint { coords })
}

/// Moves `t` along the unit-speed geodesic leaving `x` with unit velocity
/// `dir`; returns the endpoint and the transported velocity there.
///
/// The velocity is `sinh(t) x + cosh(t) dir`, the parallel transport of
/// `dir`; unlike the general transport formula it involves no Minkowski
/// products, so it stays accurate far from the basepoint.
pub fn geodesic_step(x: &HPoint, dir: &[f64], t: f64) -> Result<(HPoint, Vec<f64>)> {
    check_len(x.coords.len(), dir.len())?;
    if !t.is_finite() || t.abs() > MAX_HYPERBOLIC_ARG {
        return Err(Error::Overflow(t));
    }
    let (sh, ch) = (t.sinh(), t.cosh());
    let mut point: Vec<f64> = x.coords.iter().zip(dir).map(|(a, b)| ch * a + sh * b).collect();
    let velocity = x.coords.iter().zip(dir).map(|(a, b)| sh * a + ch * b).collect();
    kernel::reproject(&mut point);
    if point.iter().any(|c| !c.is_finite()) {
        return Err(Error::Overflow(t));
    }
    Ok((HPoint { coords: point }, velocity))
}
