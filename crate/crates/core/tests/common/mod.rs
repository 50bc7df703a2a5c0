#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use voxellate::{t0_bracket, Boundary, Domain, FastOptions, Kind, SiteSet, VoxelGrid};

pub const KINDS: [Kind; 3] = [Kind::Voronoi, Kind::JohnsonMehl, Kind::Laguerre];
pub const BOUNDARIES: [Boundary; 2] = [Boundary::Periodic, Boundary::NonPeriodic];

pub struct Instance {
    pub sites: SiteSet,
    pub grid: VoxelGrid,
    pub opts: FastOptions,
    /// Sites and births on a coarse lattice (exact ties likely).
    pub lattice: bool,
}

impl Instance {
    pub fn describe(&self) -> String {
        format!(
            "{} {} dims {:?} lengths {:?} N_s {} opts {:?}",
            self.sites.kind(),
            self.grid.domain().boundary(),
            self.grid.counts(),
            self.grid.domain().lengths(),
            self.sites.len(),
            self.opts
        )
    }
}

/// Random tessellation problem. About a third of the instances put sites
/// and birth times on a coarse lattice so that exact ties occur.
pub fn random_instance(seed: u64, kind: Kind, boundary: Boundary, d: usize, max_side: usize, max_sites: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let counts: Vec<usize> = (0..d).map(|_| rng.gen_range(1..=max_side)).collect();
    let lengths: Vec<f64> = (0..d).map(|_| if rng.gen_bool(0.5) { 1.0 } else { rng.gen_range(0.5..2.0) }).collect();
    let domain = Domain::new(lengths.clone(), boundary).unwrap();
    let grid = VoxelGrid::new(counts, domain.clone()).unwrap();
    let n = rng.gen_range(1..=max_sites);
    let lattice = rng.gen_bool(0.35);
    let mut positions = Vec::with_capacity(n * d);
    for _ in 0..n {
        for &len in &lengths {
            positions.push(if lattice {
                len * rng.gen_range(1..8) as f64 / 8.0
            } else {
                loop {
                    let x = rng.gen::<f64>() * len;
                    if x > 0.0 && x < len {
                        break x;
                    }
                }
            });
        }
    }
    let births: Vec<f64> = (0..n)
        .map(|_| if lattice { rng.gen_range(0..8) as f64 / 8.0 } else { rng.gen::<f64>() })
        .collect();
    let growth = [0.1, 0.5, 1.0, 3.0, 10.0][rng.gen_range(0..5)];
    let sites = SiteSet::new(kind, &domain, positions, Some(births), Some(growth)).unwrap();

    let override_param = if rng.gen_bool(0.3) {
        Some(match kind {
            Kind::Voronoi => rng.gen_range(1e-3..=1.0) * domain.covering_radius() * 1.2,
            _ => {
                let (lo, hi) = t0_bracket(&sites, &domain).unwrap();
                lo + rng.gen_range(0.0..=1.2) * (hi - lo)
            }
        })
    } else {
        None
    };
    let opts = FastOptions { override_param, prune: rng.gen_bool(0.7) };
    Instance { sites, grid, opts, lattice }
}

/// Squared minimum over the 3^d shifted copies of `b`.
pub fn shift_oracle_sq(a: &[f64], b: &[f64], lengths: &[f64]) -> f64 {
    let d = a.len();
    let mut best = f64::INFINITY;
    for code in 0..3usize.pow(d as u32) {
        let mut c = code;
        let mut acc = 0.0;
        for i in 0..d {
            let k = (c % 3) as f64 - 1.0;
            c /= 3;
            let delta = b[i] + k * lengths[i] - a[i];
            acc += delta * delta;
        }
        best = best.min(acc);
    }
    best
}

/// Proximity of a voxel centre to site `s`, straightforward formulas.
pub fn naive_proximity(sites: &SiteSet, grid: &VoxelGrid, voxel: usize, s: usize) -> f64 {
    let x = grid.center(&grid.multi_index(voxel));
    let dom = grid.domain();
    let p = sites.position(s);
    let d2 = if dom.is_periodic() {
        shift_oracle_sq(&x, p, dom.lengths())
    } else {
        x.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum()
    };
    match sites.kind() {
        Kind::Voronoi => d2,
        Kind::JohnsonMehl => d2.sqrt() / sites.growth().unwrap() + sites.births().unwrap()[s],
        Kind::Laguerre => d2 / sites.growth().unwrap() + sites.births().unwrap()[s],
    }
}

/// Labels that differ must be near-ties under `prox`.
pub fn same_partition_up_to_ties(a: &[u32], b: &[u32], prox: impl Fn(usize, usize) -> f64) -> Result<(), String> {
    for (v, (&la, &lb)) in a.iter().zip(b).enumerate() {
        if la != lb {
            let (pa, pb) = (prox(v, la as usize), prox(v, lb as usize));
            if (pa - pb).abs() > 1e-9 * (1.0 + pa.abs().max(pb.abs())) {
                return Err(format!("voxel {v}: labels {la} ({pa}) and {lb} ({pb})"));
            }
        }
    }
    Ok(())
}
