//! Site sets: construction, uniform generation, sphere/time conversion and
//! removal of sites that can never own a voxel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::geometry::{Domain, Kind, Point};

/// Punctual sites of one tessellation kind.
///
/// Positions are stored flat (`n_sites * dim`). Voronoi sets carry no birth
/// times; internally they behave as if every site were born at `0`.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteSet {
    kind: Kind,
    dim: usize,
    positions: Vec<f64>,
    births: Vec<f64>,
    growth: f64,
}

impl SiteSet {
    /// Validates and builds a site set. `births` and `growth` are required
    /// for Johnson-Mehl and Laguerre and ignored for Voronoi.
    pub fn new(
        kind: Kind,
        domain: &Domain,
        positions: Vec<f64>,
        births: Option<Vec<f64>>,
        growth: Option<f64>,
    ) -> Result<Self> {
        let dim = domain.dim();
        if positions.is_empty() {
            return Err(Error::invalid("a site set needs at least one site"));
        }
        if !positions.len().is_multiple_of(dim) {
            return Err(Error::invalid(format!(
                "{} coordinates do not split into {dim}-dimensional points",
                positions.len()
            )));
        }
        let n = positions.len() / dim;
        for (s, p) in positions.chunks_exact(dim).enumerate() {
            if !domain.strictly_contains(p) {
                return Err(Error::invalid(format!(
                    "site {s} at {p:?} is not strictly inside the domain"
                )));
            }
        }
        let (births, growth) = if kind.is_timed() {
            let births = births
                .ok_or_else(|| Error::invalid(format!("{kind} sites need birth times")))?;
            check_dim(n, births.len())?;
            if let Some(t) = births.iter().find(|t| !t.is_finite()) {
                return Err(Error::invalid(format!("birth time must be finite, got {t}")));
            }
            let g = growth.ok_or_else(|| Error::invalid(format!("{kind} sites need a growth rate")))?;
            if !(g.is_finite() && g > 0.0) {
                return Err(Error::invalid(format!("growth rate must be positive, got {g}")));
            }
            (births, g)
        } else {
            (vec![0.0; n], 1.0)
        };
        Ok(SiteSet { kind, dim, positions, births, growth })
    }

    pub fn from_points(
        kind: Kind,
        domain: &Domain,
        points: &[Point],
        births: Option<Vec<f64>>,
        growth: Option<f64>,
    ) -> Result<Self> {
        let mut flat = Vec::with_capacity(points.len() * domain.dim());
        for p in points {
            check_dim(domain.dim(), p.dim())?;
            flat.extend_from_slice(p);
        }
        SiteSet::new(kind, domain, flat, births, growth)
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.births.len()
    }

    pub fn is_empty(&self) -> bool {
        self.births.is_empty()
    }

    pub fn position(&self, s: usize) -> &[f64] {
        &self.positions[s * self.dim..(s + 1) * self.dim]
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    /// Birth times, `None` for Voronoi.
    pub fn births(&self) -> Option<&[f64]> {
        self.kind.is_timed().then_some(&self.births[..])
    }

    /// Growth rate, `None` for Voronoi.
    pub fn growth(&self) -> Option<f64> {
        self.kind.is_timed().then_some(self.growth)
    }

    pub(crate) fn raw_births(&self) -> &[f64] {
        &self.births
    }

    pub(crate) fn raw_growth(&self) -> f64 {
        self.growth
    }

    pub fn earliest_birth(&self) -> f64 {
        self.births.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Same positions and times reinterpreted as another kind.
    pub fn with_kind(&self, kind: Kind, domain: &Domain) -> Result<SiteSet> {
        let births = kind.is_timed().then(|| self.births.clone());
        let growth = kind.is_timed().then_some(self.growth);
        SiteSet::new(kind, domain, self.positions.clone(), births, growth)
    }

    /// Subset of the sites, in the given order.
    pub fn select(&self, indices: &[usize]) -> SiteSet {
        let mut positions = Vec::with_capacity(indices.len() * self.dim);
        let mut births = Vec::with_capacity(indices.len());
        for &s in indices {
            positions.extend_from_slice(self.position(s));
            births.push(self.births[s]);
        }
        SiteSet { kind: self.kind, dim: self.dim, positions, births, growth: self.growth }
    }

    /// Checks that every position lies strictly inside `domain`.
    pub fn check_domain(&self, domain: &Domain) -> Result<()> {
        check_dim(domain.dim(), self.dim)?;
        for s in 0..self.len() {
            if !domain.strictly_contains(self.position(s)) {
                return Err(Error::invalid(format!(
                    "site {s} at {:?} is not strictly inside the domain",
                    self.position(s)
                )));
            }
        }
        Ok(())
    }

    /// Converts Laguerre sites back into spheres with
    /// `r_s = sqrt(-G (t_s - t_ref))`, `t_ref = max_s t_s`.
    pub fn to_spheres(&self) -> Result<LaguerreSpheres> {
        if self.kind != Kind::Laguerre {
            return Err(Error::invalid("only Laguerre sites convert to spheres"));
        }
        let t_ref = self.births.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let radii = self
            .births
            .iter()
            .map(|&t| (-self.growth * (t - t_ref)).max(0.0).sqrt())
            .collect();
        LaguerreSpheres::new(self.dim, self.positions.clone(), radii)
    }
}

/// Weighted points of a power diagram: centres and radii.
#[derive(Clone, Debug, PartialEq)]
pub struct LaguerreSpheres {
    dim: usize,
    positions: Vec<f64>,
    radii: Vec<f64>,
}

impl LaguerreSpheres {
    pub fn new(dim: usize, positions: Vec<f64>, radii: Vec<f64>) -> Result<Self> {
        if dim == 0 || positions.len() != dim * radii.len() {
            return Err(Error::invalid(format!(
                "{} coordinates do not match {} radii in dimension {dim}",
                positions.len(),
                radii.len()
            )));
        }
        if let Some(r) = radii.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
            return Err(Error::invalid(format!("sphere radius must be non-negative, got {r}")));
        }
        Ok(LaguerreSpheres { dim, positions, radii })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    pub fn position(&self, s: usize) -> &[f64] {
        &self.positions[s * self.dim..(s + 1) * self.dim]
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    /// Power distance `d^2(x, x_s) - r_s^2`.
    pub fn power_distance(&self, x: &[f64], s: usize, domain: &Domain) -> Result<f64> {
        let d2 = domain.distance_sq(x, self.position(s))?;
        Ok(d2 - self.radii[s] * self.radii[s])
    }
}

/// Uniformly distributed sites; birth times uniform over `[0, horizon)`.
///
/// Positions are drawn from the open box `(0, L_i)`. The stream is fully
/// determined by `seed`.
pub fn generate_uniform_sites(
    domain: &Domain,
    n_sites: usize,
    kind: Kind,
    growth: Option<f64>,
    horizon: f64,
    seed: u64,
) -> Result<SiteSet> {
    if n_sites == 0 {
        return Err(Error::invalid("number of sites must be at least 1"));
    }
    if kind.is_timed() && !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::invalid(format!("time horizon must be positive, got {horizon}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut positions = Vec::with_capacity(n_sites * domain.dim());
    for _ in 0..n_sites {
        for &len in domain.lengths() {
            positions.push(loop {
                let x = rng.gen::<f64>() * len;
                if x > 0.0 && x < len {
                    break x;
                }
            });
        }
    }
    let births = kind
        .is_timed()
        .then(|| (0..n_sites).map(|_| rng.gen_range(0.0..horizon)).collect());
    SiteSet::new(kind, domain, positions, births, growth)
}

/// Laguerre sites with `t_s = -r_s^2 / G`.
pub fn spheres_to_timed_sites(
    spheres: &LaguerreSpheres,
    growth: f64,
    domain: &Domain,
) -> Result<SiteSet> {
    if !(growth.is_finite() && growth > 0.0) {
        return Err(Error::invalid(format!("growth rate must be positive, got {growth}")));
    }
    let births = spheres.radii.iter().map(|r| -r * r / growth).collect();
    SiteSet::new(Kind::Laguerre, domain, spheres.positions.clone(), Some(births), Some(growth))
}

/// Birth times measured from `t_ref` instead of `0`. Leaves every cell
/// unchanged.
pub fn shift_time_reference(sites: &SiteSet, t_ref: f64) -> Result<SiteSet> {
    if !sites.kind.is_timed() {
        return Err(Error::invalid("time reference applies to Johnson-Mehl and Laguerre sites"));
    }
    if !t_ref.is_finite() {
        return Err(Error::invalid("time reference must be finite"));
    }
    let mut out = sites.clone();
    if t_ref != 0.0 {
        out.births.iter_mut().for_each(|t| *t -= t_ref);
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct PrunedSites {
    /// Surviving sites, in original order.
    pub sites: SiteSet,
    /// Original index of each surviving site.
    pub kept: Vec<usize>,
    /// Original indices of the removed sites, ascending.
    pub removed: Vec<usize>,
}

const PRUNE_MARGIN: f64 = 1e-9;

/// Removes sites that are overtaken by another crystal everywhere in the
/// domain, so they can never own a voxel.
///
/// Johnson-Mehl: site `s` goes when some `s'` reaches `x_s` strictly before
/// `t_s`; the triangle inequality then makes `s'` strictly earlier at
/// every point. Laguerre: reaching `x_s` first is necessary but not
/// sufficient (power cells need not contain their site), so candidates are
/// confirmed with a bound on `f_s - f_s'` over the whole box. Both tests
/// keep a small relative margin so ties stay with the full tie-break.
///
/// Pairwise, O(N_s^2).
pub fn prune_ineffective_sites(sites: &SiteSet, domain: &Domain) -> Result<PrunedSites> {
    if !sites.kind.is_timed() {
        return Err(Error::invalid("pruning applies to Johnson-Mehl and Laguerre sites"));
    }
    sites.check_domain(domain)?;
    let n = sites.len();
    let g = sites.growth;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| sites.births[a].total_cmp(&sites.births[b]).then(a.cmp(&b)));

    let mut removed_flag = vec![false; n];
    for (rank, &s) in order.iter().enumerate() {
        let ts = sites.births[s];
        let xs = sites.position(s);
        for &o in &order[..rank] {
            let to = sites.births[o];
            if to >= ts {
                break;
            }
            let d2 = domain.distance_sq_unchecked(xs, sites.position(o));
            let dominated = match sites.kind {
                Kind::JohnsonMehl => {
                    let reach = d2.sqrt() / g + to;
                    let margin = PRUNE_MARGIN * (ts.abs() + to.abs() + d2.sqrt() / g);
                    ts - reach > margin
                }
                Kind::Laguerre => {
                    let gap_at_site = g * (ts - to) - d2;
                    let scale = domain.diagonal_sq() + g * (ts.abs() + to.abs());
                    gap_at_site > PRUNE_MARGIN * scale
                        && laguerre_gap_lower_bound(xs, ts, sites.position(o), to, g, domain)
                            > PRUNE_MARGIN * scale
                }
                Kind::Voronoi => unreachable!(),
            };
            if dominated {
                removed_flag[s] = true;
                break;
            }
        }
    }

    let kept: Vec<usize> = (0..n).filter(|&s| !removed_flag[s]).collect();
    let removed: Vec<usize> = (0..n).filter(|&s| removed_flag[s]).collect();
    Ok(PrunedSites { sites: sites.select(&kept), kept, removed })
}

/// Lower bound of `min_{x in box} (d^2(x, a) + G t_a) - (d^2(x, b) + G t_b)`.
///
/// Without wrapping the difference is affine in `x`, so its minimum sits on
/// a box corner and splits per axis into `min(a^2 - b^2, (L-a)^2 - (L-b)^2)`.
/// With wrapping each squared distance is a minimum over the images
/// `a + k L`, `k in {-1, 0, 1}`; taking, per axis, the worst image of `a`
/// against the best image of `b` gives a valid bound.
fn laguerre_gap_lower_bound(a: &[f64], ta: f64, b: &[f64], tb: f64, g: f64, domain: &Domain) -> f64 {
    let mut total = g * (ta - tb);
    for (i, &len) in domain.lengths().iter().enumerate() {
        let corner_min = |ai: f64, bi: f64| {
            let lo = ai * ai - bi * bi;
            let hi = (len - ai) * (len - ai) - (len - bi) * (len - bi);
            lo.min(hi)
        };
        let term = if domain.is_periodic() {
            let shifts = [-len, 0.0, len];
            shifts
                .iter()
                .map(|ka| {
                    shifts
                        .iter()
                        .map(|kb| corner_min(a[i] + ka, b[i] + kb))
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .fold(f64::INFINITY, f64::min)
        } else {
            corner_min(a[i], b[i])
        };
        total += term;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Boundary;

    fn unit(d: usize, b: Boundary) -> Domain {
        Domain::unit(d, b).unwrap()
    }

    #[test]
    fn generation_is_deterministic() {
        let dom = unit(2, Boundary::Periodic);
        let a = generate_uniform_sites(&dom, 4, Kind::Voronoi, None, 1.0, 7).unwrap();
        let b = generate_uniform_sites(&dom, 4, Kind::Voronoi, None, 1.0, 7).unwrap();
        assert_eq!(a, b);
        let c = generate_uniform_sites(&dom, 4, Kind::Voronoi, None, 1.0, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn generation_moments_and_ranges() {
        let dom = unit(3, Boundary::Periodic);
        let n = 100_000;
        let s = generate_uniform_sites(&dom, n, Kind::Voronoi, None, 1.0, 3).unwrap();
        let sigma = 1.0 / (12.0 * n as f64).sqrt();
        for axis in 0..3 {
            let mean: f64 = (0..n).map(|i| s.position(i)[axis]).sum::<f64>() / n as f64;
            assert!((mean - 0.5).abs() < 5.0 * sigma, "axis {axis} mean {mean}");
        }
        let jm = generate_uniform_sites(&dom, 10_000, Kind::JohnsonMehl, Some(1.0), 1.0, 5).unwrap();
        assert!(jm.births().unwrap().iter().all(|&t| (0.0..1.0).contains(&t)));
    }

    #[test]
    fn generation_errors() {
        let dom = unit(2, Boundary::Periodic);
        assert!(generate_uniform_sites(&dom, 0, Kind::Voronoi, None, 1.0, 1).is_err());
        assert!(generate_uniform_sites(&dom, 3, Kind::JohnsonMehl, None, 1.0, 1).is_err());
        assert!(generate_uniform_sites(&dom, 3, Kind::Laguerre, Some(0.0), 1.0, 1).is_err());
    }

    #[test]
    fn boundary_positions_are_rejected() {
        let dom = unit(2, Boundary::NonPeriodic);
        assert!(SiteSet::new(Kind::Voronoi, &dom, vec![0.0, 0.5], None, None).is_err());
        assert!(SiteSet::new(Kind::Voronoi, &dom, vec![0.5, 1.0], None, None).is_err());
        assert!(SiteSet::new(Kind::Voronoi, &dom, vec![0.5, 0.5, 0.1], None, None).is_err());
        assert!(SiteSet::new(Kind::Voronoi, &dom, vec![], None, None).is_err());
        assert!(SiteSet::new(Kind::Laguerre, &dom, vec![0.5, 0.5], Some(vec![0.0, 1.0]), Some(1.0)).is_err());
    }

    #[test]
    fn sphere_conversion_examples() {
        let dom = unit(1, Boundary::NonPeriodic);
        let sph = LaguerreSpheres::new(1, vec![0.5], vec![0.0]).unwrap();
        assert_eq!(spheres_to_timed_sites(&sph, 1.0, &dom).unwrap().births().unwrap(), &[0.0]);
        let sph = LaguerreSpheres::new(1, vec![0.5], vec![2.0]).unwrap();
        assert_eq!(spheres_to_timed_sites(&sph, 4.0, &dom).unwrap().births().unwrap(), &[-1.0]);
        assert!(LaguerreSpheres::new(1, vec![0.5], vec![-1.0]).is_err());
    }

    #[test]
    fn shift_zero_is_identity() {
        let dom = unit(2, Boundary::Periodic);
        let s = generate_uniform_sites(&dom, 20, Kind::JohnsonMehl, Some(0.5), 1.0, 11).unwrap();
        assert_eq!(shift_time_reference(&s, 0.0).unwrap(), s);
        let v = generate_uniform_sites(&dom, 20, Kind::Voronoi, None, 1.0, 11).unwrap();
        assert!(shift_time_reference(&v, 1.0).is_err());
    }

    #[test]
    fn coincident_sites_later_one_is_pruned() {
        let dom = unit(2, Boundary::Periodic);
        for kind in [Kind::JohnsonMehl, Kind::Laguerre] {
            let s = SiteSet::new(kind, &dom, vec![0.3, 0.3, 0.3, 0.3], Some(vec![0.1, 0.4]), Some(1.0))
                .unwrap();
            let p = prune_ineffective_sites(&s, &dom).unwrap();
            assert_eq!(p.removed, vec![1], "{kind}");
            assert_eq!(p.kept, vec![0]);
        }
    }

    #[test]
    fn equal_births_prune_nothing() {
        let dom = unit(3, Boundary::NonPeriodic);
        let mut s = generate_uniform_sites(&dom, 200, Kind::JohnsonMehl, Some(10.0), 1.0, 2).unwrap();
        s.births.iter_mut().for_each(|t| *t = 0.25);
        assert!(prune_ineffective_sites(&s, &dom).unwrap().removed.is_empty());
        // identical births and positions: neither dominates the other
        let s = SiteSet::new(Kind::JohnsonMehl, &dom, vec![0.5; 6], Some(vec![0.2, 0.2]), Some(1.0)).unwrap();
        assert!(prune_ineffective_sites(&s, &dom).unwrap().removed.is_empty());
    }

    #[test]
    fn laguerre_site_inside_earlier_crystal_can_survive() {
        // x_b lies inside a's crystal at t_b, yet b wins for x > 1.25 on the line.
        let dom = Domain::new(vec![2.0], Boundary::NonPeriodic).unwrap();
        let s = SiteSet::new(Kind::Laguerre, &dom, vec![0.01, 1.0], Some(vec![0.0, 1.5]), Some(1.0)).unwrap();
        assert!(prune_ineffective_sites(&s, &dom).unwrap().removed.is_empty());
        // as Johnson-Mehl the same pair prunes b
        let s = s.with_kind(Kind::JohnsonMehl, &dom).unwrap();
        assert_eq!(prune_ineffective_sites(&s, &dom).unwrap().removed, vec![1]);
    }

    #[test]
    fn sphere_round_trip_keeps_radii_differences() {
        let dom = unit(2, Boundary::NonPeriodic);
        let sph = LaguerreSpheres::new(2, vec![0.2, 0.2, 0.7, 0.6, 0.4, 0.9], vec![0.1, 0.3, 0.0]).unwrap();
        let sites = spheres_to_timed_sites(&sph, 2.0, &dom).unwrap();
        let back = sites.to_spheres().unwrap();
        // r'^2 = r^2 - min r^2 since t_ref is the latest birth
        for s in 0..3 {
            let expect = sph.radii()[s].powi(2) - 0.0;
            assert!((back.radii()[s].powi(2) - expect).abs() < 1e-15);
        }
    }
}
