//! Distances, the rectangular domain and the voxel grid.
//!
//! Every squared distance in the crate is accumulated axis by axis starting
//! from the slowest axis (`d - 1`) and ending with axis 0. The ball scanner
//! reuses partial sums over the outer axes, so keeping one summation order
//! everywhere makes the brute-force and accelerated engines produce
//! bit-identical proximities.

use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    Periodic,
    NonPeriodic,
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Boundary::Periodic => "periodic",
            Boundary::NonPeriodic => "non-periodic",
        })
    }
}

impl FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "periodic" => Ok(Boundary::Periodic),
            "non-periodic" | "nonperiodic" => Ok(Boundary::NonPeriodic),
            other => Err(Error::invalid(format!("unknown boundary mode `{other}`"))),
        }
    }
}

/// The proximity function that decides cell membership.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Voronoi,
    JohnsonMehl,
    Laguerre,
}

impl Kind {
    /// Johnson-Mehl and Laguerre sites carry a birth time and a growth rate.
    pub fn is_timed(self) -> bool {
        !matches!(self, Kind::Voronoi)
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Voronoi => "voronoi",
            Kind::JohnsonMehl => "johnson-mehl",
            Kind::Laguerre => "laguerre",
        })
    }
}

impl FromStr for Kind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "voronoi" => Ok(Kind::Voronoi),
            "johnson-mehl" | "johnson_mehl" | "jm" | "jmak" => Ok(Kind::JohnsonMehl),
            "laguerre" | "power" => Ok(Kind::Laguerre),
            other => Err(Error::invalid(format!("unknown tessellation kind `{other}`"))),
        }
    }
}

/// Axis-aligned box `[0, L_1) x ... x [0, L_d)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    lengths: Vec<f64>,
    boundary: Boundary,
}

impl Domain {
    pub fn new(lengths: Vec<f64>, boundary: Boundary) -> Result<Self> {
        if lengths.is_empty() {
            return Err(Error::invalid("domain needs at least one axis"));
        }
        if let Some(bad) = lengths.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::invalid(format!("axis length must be positive, got {bad}")));
        }
        Ok(Domain { lengths, boundary })
    }

    /// Unit hypercube of dimension `d`.
    pub fn unit(d: usize, boundary: Boundary) -> Result<Self> {
        Domain::new(vec![1.0; d], boundary)
    }

    pub fn dim(&self) -> usize {
        self.lengths.len()
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn is_periodic(&self) -> bool {
        self.boundary == Boundary::Periodic
    }

    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    /// `sum L_i^2`, the squared main diagonal.
    pub fn diagonal_sq(&self) -> f64 {
        self.lengths.iter().map(|l| l * l).sum()
    }

    /// Radius of a ball centred anywhere in the box that covers the whole
    /// domain under the active distance.
    pub fn covering_radius(&self) -> f64 {
        match self.boundary {
            Boundary::Periodic => 0.5 * self.diagonal_sq().sqrt(),
            Boundary::NonPeriodic => self.diagonal_sq().sqrt(),
        }
    }

    /// True when `0 < x_i < L_i` on every axis.
    pub fn strictly_contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().zip(&self.lengths).all(|(&c, &l)| c > 0.0 && c < l)
    }

    /// Squared distance under the domain's boundary mode.
    pub fn distance_sq(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        check_dim(self.dim(), a.len())?;
        check_dim(self.dim(), b.len())?;
        Ok(self.distance_sq_unchecked(a, b))
    }

    pub(crate) fn distance_sq_unchecked(&self, a: &[f64], b: &[f64]) -> f64 {
        let periodic = self.is_periodic();
        let mut acc = 0.0;
        for i in (0..a.len()).rev() {
            acc += axis_offset_sq(periodic, self.lengths[i], a[i], b[i]);
        }
        acc
    }
}

/// `N(x) = floor(x + 1/2)`; half-integers round up.
#[inline]
pub fn nearest_integer(x: f64) -> f64 {
    (x + 0.5).floor()
}

/// Shortest signed representative of `delta` modulo `len`.
#[inline]
pub fn periodic_residual(delta: f64, len: f64) -> f64 {
    delta - nearest_integer(delta / len) * len
}

/// Squared offset `b - a` along one axis of length `len`.
#[inline]
pub(crate) fn axis_offset_sq(periodic: bool, len: f64, a: f64, b: f64) -> f64 {
    let delta = b - a;
    let r = if periodic { periodic_residual(delta, len) } else { delta };
    r * r
}

/// A position in the domain's coordinate system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point(pub Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl Deref for Point {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Point(v)
    }
}

pub fn euclidean_distance_sq(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dim(a.len(), b.len())?;
    let mut acc = 0.0;
    for i in (0..a.len()).rev() {
        acc += axis_offset_sq(false, 1.0, a[i], b[i]);
    }
    Ok(acc)
}

/// Squared L-periodic distance for orthogonal, axis-aligned periods given
/// by `domain.lengths()`. The domain's boundary mode is not consulted, so
/// this also works for points lying outside the unit cell.
pub fn l_periodic_distance_sq(a: &[f64], b: &[f64], domain: &Domain) -> Result<f64> {
    check_dim(domain.dim(), a.len())?;
    check_dim(domain.dim(), b.len())?;
    let mut acc = 0.0;
    for i in (0..a.len()).rev() {
        acc += axis_offset_sq(true, domain.lengths[i], a[i], b[i]);
    }
    Ok(acc)
}

/// Proximity value from a precomputed squared distance. Smaller is closer.
///
/// Voronoi keeps the squared distance, Johnson-Mehl is the arrival time
/// `d / G + t_s`, Laguerre the arrival time `d^2 / G + t_s`.
#[inline]
pub fn proximity_from_dist_sq(kind: Kind, dist_sq: f64, birth: f64, growth: f64) -> f64 {
    match kind {
        Kind::Voronoi => dist_sq,
        Kind::JohnsonMehl => dist_sq.sqrt() / growth + birth,
        Kind::Laguerre => dist_sq / growth + birth,
    }
}

/// Proximity of `a` to a site at `site` born at `birth`, using the domain's
/// distance. `birth` and `growth` are ignored for Voronoi.
pub fn proximity(
    kind: Kind,
    a: &[f64],
    site: &[f64],
    birth: f64,
    growth: f64,
    domain: &Domain,
) -> Result<f64> {
    if kind.is_timed() && !(growth.is_finite() && growth > 0.0) {
        return Err(Error::invalid(format!("growth rate must be positive, got {growth}")));
    }
    let d2 = domain.distance_sq(a, site)?;
    Ok(proximity_from_dist_sq(kind, d2, birth, growth))
}

/// Regular grid of `n_1 x ... x n_d` voxels over a domain.
///
/// Voxel `k` (0-based) has its centre at `(k_i + 1/2) L_i / n_i`. Linear
/// indices put axis 0 fastest: `k_0 + n_0 (k_1 + n_1 (k_2 + ...))`.
#[derive(Clone, Debug, PartialEq)]
pub struct VoxelGrid {
    counts: Vec<usize>,
    domain: Domain,
    strides: Vec<usize>,
    centers: Vec<Vec<f64>>,
    n_voxels: usize,
}

impl VoxelGrid {
    pub fn new(counts: Vec<usize>, domain: Domain) -> Result<Self> {
        check_dim(domain.dim(), counts.len())?;
        if counts.contains(&0) {
            return Err(Error::invalid("voxel counts must be positive"));
        }
        let mut strides = Vec::with_capacity(counts.len());
        let mut n_voxels: usize = 1;
        for &n in &counts {
            strides.push(n_voxels);
            n_voxels = n_voxels
                .checked_mul(n)
                .ok_or_else(|| Error::invalid("voxel count overflows usize"))?;
        }
        let centers = counts
            .iter()
            .zip(domain.lengths())
            .map(|(&n, &l)| {
                let h = l / n as f64;
                (0..n).map(|k| (k as f64 + 0.5) * h).collect()
            })
            .collect();
        Ok(VoxelGrid { counts, domain, strides, centers, n_voxels })
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn n_voxels(&self) -> usize {
        self.n_voxels
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.domain.lengths[axis] / self.counts[axis] as f64
    }

    /// Centre coordinates along one axis, indexed by voxel index.
    pub fn axis_centers(&self, axis: usize) -> &[f64] {
        &self.centers[axis]
    }

    pub fn center(&self, index: &[usize]) -> Point {
        Point(index.iter().enumerate().map(|(i, &k)| self.centers[i][k]).collect())
    }

    pub fn linear_index(&self, index: &[usize]) -> usize {
        index.iter().zip(&self.strides).map(|(k, s)| k * s).sum()
    }

    pub fn multi_index(&self, mut linear: usize) -> Vec<usize> {
        self.counts
            .iter()
            .map(|&n| {
                let k = linear % n;
                linear /= n;
                k
            })
            .collect()
    }
}
