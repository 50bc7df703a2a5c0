//! Rasterisation engines.
//!
//! [`tessellate_brute`] evaluates every site for every voxel.
//! [`tessellate_fast`] first investigates a ball around each site (step 1)
//! and then resolves the voxels left outside every ball by a full scan
//! (step 2). A voxel is taken in step 1 by site `s` only when its computed
//! proximity is below the common threshold (`r0^2` for Voronoi, `t0` for
//! timed sites), and every site that did not take it is strictly above the
//! threshold, so both engines pick the same minimum and resolve ties the
//! same way: smallest `(proximity, site index)` wins.
//!
//! Work is split into slabs along the slowest axis. Each slab owns a
//! contiguous block of the image, so there is no write contention and the
//! result does not depend on the number of threads.

use rayon::prelude::*;

use crate::cost::{growth_radius, optimal_r0, search_optimal_t0};
use crate::error::{check_dim, Error, Result};
use crate::geometry::{axis_offset_sq, proximity_from_dist_sq, Kind, VoxelGrid};
use crate::sites::{prune_ineffective_sites, SiteSet};

/// Label of a voxel not yet claimed by any site.
pub const UNASSIGNED: u32 = u32::MAX;

/// Winning site index per voxel, axis 0 fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelImage {
    grid: VoxelGrid,
    labels: Vec<u32>,
}

impl LabelImage {
    pub fn new(grid: VoxelGrid, labels: Vec<u32>) -> Result<Self> {
        check_dim(grid.n_voxels(), labels.len())?;
        Ok(LabelImage { grid, labels })
    }

    pub fn grid(&self) -> &VoxelGrid {
        &self.grid
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn labels_mut(&mut self) -> &mut [u32] {
        &mut self.labels
    }

    pub fn get(&self, index: &[usize]) -> u32 {
        self.labels[self.grid.linear_index(index)]
    }
}

/// Proximity of each voxel to its winning site: the true Euclidean (or
/// L-periodic) distance for Voronoi, the arrival time for Johnson-Mehl and
/// Laguerre.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceImage {
    grid: VoxelGrid,
    values: Vec<f64>,
}

impl DistanceImage {
    pub fn new(grid: VoxelGrid, values: Vec<f64>) -> Result<Self> {
        check_dim(grid.n_voxels(), values.len())?;
        Ok(DistanceImage { grid, values })
    }

    pub fn grid(&self) -> &VoxelGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.values[self.grid.linear_index(index)]
    }
}

/// Exact tallies of proximity evaluations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EvalCounters {
    /// Voxel/site pairs found inside an investigation ball.
    pub step1_evals: u64,
    /// `N_s` per voxel resolved by full scan.
    pub step2_evals: u64,
}

impl EvalCounters {
    pub fn total(&self) -> u64 {
        self.step1_evals + self.step2_evals
    }
}

#[derive(Clone, Debug)]
pub struct Tessellation {
    pub labels: LabelImage,
    pub distances: DistanceImage,
    pub counters: EvalCounters,
    /// `r0` (Voronoi) or `t0` (timed) used by the fast engine.
    pub param: Option<f64>,
    /// Sites taking part in the scans, after pruning.
    pub effective_sites: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Engine {
    Brute,
    Fast,
}

impl std::str::FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "brute" => Ok(Engine::Brute),
            "fast" => Ok(Engine::Fast),
            other => Err(Error::invalid(format!("unknown engine `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FastOptions {
    /// Fixes `r0` (Voronoi) or `t0` (timed) instead of the model optimum.
    pub override_param: Option<f64>,
    /// Drop ineffective Johnson-Mehl / Laguerre sites first.
    pub prune: bool,
}

impl Default for FastOptions {
    fn default() -> Self {
        FastOptions { override_param: None, prune: true }
    }
}

pub fn tessellate(sites: &SiteSet, grid: &VoxelGrid, engine: Engine, opts: &FastOptions) -> Result<Tessellation> {
    match engine {
        Engine::Brute => tessellate_brute(sites, grid),
        Engine::Fast => tessellate_fast(sites, grid, opts),
    }
}

#[derive(Clone, Copy)]
struct Kernel {
    kind: Kind,
    growth: f64,
}

impl Kernel {
    fn of(sites: &SiteSet) -> Self {
        Kernel { kind: sites.kind(), growth: sites.raw_growth() }
    }

    #[inline(always)]
    fn eval(&self, d2: f64, birth: f64) -> f64 {
        proximity_from_dist_sq(self.kind, d2, birth, self.growth)
    }
}

#[inline(always)]
fn better(p: f64, s: u32, cur_p: f64, cur_s: u32) -> bool {
    p < cur_p || (p == cur_p && s < cur_s)
}

fn check_inputs(sites: &SiteSet, grid: &VoxelGrid) -> Result<()> {
    sites.check_domain(grid.domain())?;
    if sites.len() >= UNASSIGNED as usize {
        return Err(Error::invalid("too many sites for 32-bit labels"));
    }
    Ok(())
}

/// Slabs along the slowest axis: `(first, end)` index pairs on that axis.
fn slabs(grid: &VoxelGrid) -> (usize, Vec<(usize, usize)>) {
    let last = grid.dim() - 1;
    let n = grid.counts()[last];
    let wanted = (4 * rayon::current_num_threads()).max(1);
    let rows = n.div_ceil(wanted.min(n));
    let list = (0..n).step_by(rows).map(|a| (a, (a + rows).min(n))).collect();
    (rows, list)
}

/// Full scan of all sites for selected voxels of one slab, updating the
/// slab's `(values, labels)` in place. Returns the number of voxels scanned.
fn full_scan_slab(
    sites: &SiteSet,
    grid: &VoxelGrid,
    kernel: Kernel,
    slab: (usize, usize),
    values: &mut [f64],
    labels: &mut [u32],
    only_unassigned: bool,
) -> u64 {
    let d = grid.dim();
    let dom = grid.domain();
    let periodic = dom.is_periodic();
    let lens = dom.lengths();
    let counts = grid.counts();
    let strides = grid.strides();
    let c0 = grid.axis_centers(0);
    let births = sites.raw_births();

    // rows run along axis 0; for d == 1 the slab itself is the row
    let (row_lo, row_hi) = if d == 1 { slab } else { (0, counts[0]) };
    let slab_base = slab.0 * strides[d - 1];
    let outer: usize = if d == 1 { 1 } else { values.len() / counts[0] };

    let mut picks: Vec<usize> = Vec::with_capacity(row_hi - row_lo);
    let mut outer_idx = vec![0usize; d];
    let mut scanned = 0u64;
    for r in 0..outer {
        // multi-index of the row on axes 1..d
        if d > 1 {
            let mut rem = r;
            for i in 1..d {
                let len_i = if i == d - 1 { slab.1 - slab.0 } else { counts[i] };
                outer_idx[i] = rem % len_i + if i == d - 1 { slab.0 } else { 0 };
                rem /= len_i;
            }
        }
        let row_abs: usize = (1..d).map(|i| outer_idx[i] * strides[i]).sum();
        picks.clear();
        for k0 in row_lo..row_hi {
            let o = row_abs + k0 - slab_base;
            if !only_unassigned || labels[o] == UNASSIGNED {
                picks.push(k0);
            }
        }
        if picks.is_empty() {
            continue;
        }
        scanned += picks.len() as u64;
        for (s, &birth) in births.iter().enumerate() {
            let x = sites.position(s);
            let mut partial = 0.0;
            for i in (1..d).rev() {
                partial += axis_offset_sq(periodic, lens[i], x[i], grid.axis_centers(i)[outer_idx[i]]);
            }
            let sid = s as u32;
            for &k0 in &picks {
                let d2 = partial + axis_offset_sq(periodic, lens[0], x[0], c0[k0]);
                let p = kernel.eval(d2, birth);
                let o = row_abs + k0 - slab_base;
                if better(p, sid, values[o], labels[o]) {
                    values[o] = p;
                    labels[o] = sid;
                }
            }
        }
    }
    scanned
}

fn full_scan(
    sites: &SiteSet,
    grid: &VoxelGrid,
    kernel: Kernel,
    values: &mut [f64],
    labels: &mut [u32],
    only_unassigned: bool,
) -> u64 {
    let (rows, list) = slabs(grid);
    let chunk = rows * grid.strides()[grid.dim() - 1];
    values
        .par_chunks_mut(chunk)
        .zip(labels.par_chunks_mut(chunk))
        .zip(list.par_iter())
        .map(|((v, l), &slab)| full_scan_slab(sites, grid, kernel, slab, v, l, only_unassigned))
        .sum()
}

fn finish(
    kind: Kind,
    grid: &VoxelGrid,
    mut values: Vec<f64>,
    labels: Vec<u32>,
    counters: EvalCounters,
    param: Option<f64>,
    effective_sites: usize,
) -> Result<Tessellation> {
    if kind == Kind::Voronoi {
        values.par_iter_mut().for_each(|v| *v = v.sqrt());
    }
    Ok(Tessellation {
        labels: LabelImage::new(grid.clone(), labels)?,
        distances: DistanceImage::new(grid.clone(), values)?,
        counters,
        param,
        effective_sites,
    })
}

/// Every site against every voxel.
pub fn tessellate_brute(sites: &SiteSet, grid: &VoxelGrid) -> Result<Tessellation> {
    check_inputs(sites, grid)?;
    let nv = grid.n_voxels();
    let mut values = vec![f64::INFINITY; nv];
    let mut labels = vec![UNASSIGNED; nv];
    let scanned = full_scan(sites, grid, Kernel::of(sites), &mut values, &mut labels, false);
    let counters = EvalCounters { step1_evals: 0, step2_evals: scanned * sites.len() as u64 };
    finish(sites.kind(), grid, values, labels, counters, None, sites.len())
}

/// Index/offset-squared pairs along one axis, walking away from the voxel
/// that contains the ball centre. Each list is monotone in the offset.
/// Voxel indices along one axis within the scan radius, sorted by squared
/// offset so that scans can stop at the first entry out of reach.
struct AxisRun {
    entries: Vec<(usize, f64)>,
}

impl AxisRun {
    fn build(grid: &VoxelGrid, axis: usize, x: f64, radius: f64) -> AxisRun {
        let dom = grid.domain();
        let periodic = dom.is_periodic();
        let len = dom.lengths()[axis];
        let n = grid.counts()[axis];
        let centers = grid.axis_centers(axis);
        let r2 = radius * radius;
        let xw = if periodic { x.rem_euclid(len) } else { x };
        let c = ((xw / grid.spacing(axis)).floor().max(0.0) as usize).min(n - 1);

        let mut fwd = Vec::new();
        let mut bwd = Vec::new();
        let reach = |idx: usize| axis_offset_sq(periodic, len, x, centers[idx]);
        for j in 0..n {
            let u = c + j;
            if !periodic && u >= n {
                break;
            }
            let idx = u % n;
            let d2 = reach(idx);
            if d2 > r2 {
                break;
            }
            fwd.push((idx, d2));
        }
        for j in 1..n {
            if periodic && fwd.len() + bwd.len() >= n {
                break;
            }
            let idx = if c >= j {
                c - j
            } else if periodic {
                c + n - j
            } else {
                break;
            };
            let d2 = reach(idx);
            if d2 > r2 {
                break;
            }
            bwd.push((idx, d2));
        }
        // past half a period the forward walk turns back towards x
        fwd.append(&mut bwd);
        fwd.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        AxisRun { entries: fwd }
    }
}

/// Per-site ball geometry: one run per axis and the squared scan radius.
struct BallScan {
    site: u32,
    axes: Vec<AxisRun>,
    r2: f64,
}

impl BallScan {
    fn new(grid: &VoxelGrid, site: u32, center: &[f64], radius: f64) -> BallScan {
        let axes = (0..grid.dim()).map(|i| AxisRun::build(grid, i, center[i], radius)).collect();
        BallScan { site, axes, r2: radius * radius }
    }

    /// Calls `visit(local_offset, d2)` for every voxel of the slab within
    /// the scan radius. `d2` is summed in the crate-wide axis order.
    fn for_each_in_slab(&self, grid: &VoxelGrid, slab: (usize, usize), mut visit: impl FnMut(usize, f64)) {
        let d = grid.dim();
        let strides = grid.strides();
        let base = slab.0 * strides[d - 1];
        let top = &self.axes[d - 1];
        for &(idx, dsq) in &top.entries {
            if dsq > self.r2 {
                break;
            }
            if idx < slab.0 || idx >= slab.1 {
                continue;
            }
            let off = idx * strides[d - 1] - base;
            if d == 1 {
                visit(off, dsq);
            } else {
                self.descend(d - 2, dsq, off, strides, &mut visit);
            }
        }
    }

    fn descend(&self, level: usize, partial: f64, off: usize, strides: &[usize], visit: &mut impl FnMut(usize, f64)) {
        let run = &self.axes[level];
        for &(idx, dsq) in &run.entries {
            let p = partial + dsq;
            if p > self.r2 {
                break;
            }
            if level == 0 {
                visit(off + idx, p);
            } else {
                self.descend(level - 1, p, off + idx * strides[level], strides, visit);
            }
        }
    }
}

/// Multi-indices of the voxels whose centres lie within `radius` of
/// `center` (L-periodic distance with wrapped indices in periodic mode,
/// Euclidean distance clipped to the grid otherwise). Each voxel appears
/// once.
pub fn scan_ball(center: &[f64], radius: f64, grid: &VoxelGrid) -> Result<impl Iterator<Item = Vec<usize>>> {
    check_dim(grid.dim(), center.len())?;
    if !(radius >= 0.0) || !radius.is_finite() || center.iter().any(|c| !c.is_finite()) {
        return Err(Error::invalid("ball needs a finite centre and a non-negative radius"));
    }
    let exact_r2 = radius * radius;
    let ball = BallScan::new(grid, 0, center, scan_radius(radius, grid));
    let n_last = grid.counts()[grid.dim() - 1];
    let mut found = Vec::new();
    ball.for_each_in_slab(grid, (0, n_last), |off, d2| {
        if d2 <= exact_r2 {
            found.push(off);
        }
    });
    let grid = grid.clone();
    Ok(found.into_iter().map(move |lin| grid.multi_index(lin)))
}

fn scan_radius(radius: f64, grid: &VoxelGrid) -> f64 {
    let h = (0..grid.dim()).map(|i| grid.spacing(i)).fold(0.0, f64::max);
    radius * (1.0 + 1e-9) + 1e-9 * h
}

/// Step 1 state: per-voxel running minimum over the investigation balls.
#[derive(Clone, Debug)]
pub struct BallPass {
    /// Proximity (squared distance for Voronoi), `+inf` where unassigned.
    pub values: Vec<f64>,
    /// Site index, [`UNASSIGNED`] where no ball reached.
    pub labels: Vec<u32>,
    pub evals: u64,
}

/// Runs step 1 with radius `r0` (Voronoi) or fictitious time `t0`.
pub fn investigate_balls(sites: &SiteSet, grid: &VoxelGrid, param: f64) -> Result<BallPass> {
    check_inputs(sites, grid)?;
    let kernel = Kernel::of(sites);
    let kind = sites.kind();
    let g = sites.raw_growth();
    let births = sites.raw_births();
    let (threshold, balls): (f64, Vec<BallScan>) = match kind {
        Kind::Voronoi => {
            if !(param.is_finite() && param > 0.0) {
                return Err(Error::invalid(format!("r0 must be positive, got {param}")));
            }
            let r = scan_radius(param, grid);
            let balls = (0..sites.len())
                .into_par_iter()
                .map(|s| BallScan::new(grid, s as u32, sites.position(s), r))
                .collect();
            (param * param, balls)
        }
        Kind::JohnsonMehl | Kind::Laguerre => {
            let t_min = sites.earliest_birth();
            if !(param.is_finite() && param >= t_min) {
                return Err(Error::invalid(format!("t0 must be at least the earliest birth {t_min}, got {param}")));
            }
            let balls = (0..sites.len())
                .into_par_iter()
                .filter(|&s| births[s] <= param)
                .map(|s| {
                    // slack covers rounding of `prox <= t0` against `d <= r_s`
                    let slack = g * 1e-12 * (param.abs() + births[s].abs());
                    let r = match kind {
                        Kind::JohnsonMehl => growth_radius(kind, g, param, births[s]) + slack,
                        _ => (g * (param - births[s]).max(0.0) + slack).sqrt(),
                    };
                    BallScan::new(grid, s as u32, sites.position(s), scan_radius(r, grid))
                })
                .collect();
            (param, balls)
        }
    };

    let (rows, list) = slabs(grid);
    let d = grid.dim();
    let last = d - 1;
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); list.len()];
    for (b, ball) in balls.iter().enumerate() {
        let run = &ball.axes[last];
        let mut touched: Vec<usize> = run.entries.iter().map(|&(idx, _)| idx / rows).collect();
        touched.sort_unstable();
        touched.dedup();
        for sl in touched {
            buckets[sl].push(b);
        }
    }

    let nv = grid.n_voxels();
    let mut values = vec![f64::INFINITY; nv];
    let mut labels = vec![UNASSIGNED; nv];
    let chunk = rows * grid.strides()[last];
    let evals = values
        .par_chunks_mut(chunk)
        .zip(labels.par_chunks_mut(chunk))
        .zip(list.par_iter().zip(buckets.par_iter()))
        .map(|((vals, labs), (&slab, bucket))| {
            let mut count = 0u64;
            for &b in bucket {
                let ball = &balls[b];
                let sid = ball.site;
                let birth = births[sid as usize];
                ball.for_each_in_slab(grid, slab, |o, d2| {
                    let p = kernel.eval(d2, birth);
                    if p <= threshold {
                        count += 1;
                        if better(p, sid, vals[o], labs[o]) {
                            vals[o] = p;
                            labs[o] = sid;
                        }
                    }
                });
            }
            count
        })
        .sum();
    Ok(BallPass { values, labels, evals })
}

/// Two-step engine. Labels are identical to [`tessellate_brute`]'s.
pub fn tessellate_fast(sites: &SiteSet, grid: &VoxelGrid, opts: &FastOptions) -> Result<Tessellation> {
    check_inputs(sites, grid)?;
    let kind = sites.kind();
    let pruned = if kind.is_timed() && opts.prune {
        Some(prune_ineffective_sites(sites, grid.domain())?)
    } else {
        None
    };
    let work = pruned.as_ref().map_or(sites, |p| &p.sites);

    let param = match (kind, opts.override_param) {
        (_, Some(p)) => p,
        (Kind::Voronoi, None) => optimal_r0(work.len(), grid.domain()),
        (_, None) => search_optimal_t0(work, grid)?,
    };

    let BallPass { mut values, mut labels, evals } = investigate_balls(work, grid, param)?;
    let unresolved = full_scan(work, grid, Kernel::of(work), &mut values, &mut labels, true);
    let counters = EvalCounters { step1_evals: evals, step2_evals: unresolved * work.len() as u64 };

    if let Some(p) = &pruned {
        let kept = &p.kept;
        labels.par_iter_mut().for_each(|l| *l = kept[*l as usize] as u32);
    }
    finish(kind, grid, values, labels, counters, Some(param), work.len())
}

/// Outcome of [`validate_partition`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub checked: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub voxel: usize,
    /// Label found in the image.
    pub found: u32,
    /// Site minimising the proximity under the tie-break.
    pub expected: u32,
    /// Present when a distance image was supplied and its value disagrees.
    pub value_mismatch: Option<(f64, f64)>,
}

/// Recomputes the minimising site of each checked voxel from scratch and
/// compares it (and optionally the stored proximity) with the images.
/// `sample = Some((count, seed))` checks a random subset instead of all
/// voxels.
pub fn validate_partition(
    labels: &LabelImage,
    distances: Option<&DistanceImage>,
    sites: &SiteSet,
    sample: Option<(usize, u64)>,
) -> Result<ValidationReport> {
    use rand::{Rng, SeedableRng};

    let grid = labels.grid();
    check_inputs(sites, grid)?;
    if let Some(dist) = distances {
        check_dim(grid.n_voxels(), dist.values().len())?;
    }
    let nv = grid.n_voxels();
    let voxels: Vec<usize> = match sample {
        Some((count, seed)) if count < nv => {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            (0..count).map(|_| rng.gen_range(0..nv)).collect()
        }
        _ => (0..nv).collect(),
    };
    let kernel = Kernel::of(sites);
    let dom = grid.domain();
    let births = sites.raw_births();
    let mut violations: Vec<Violation> = voxels
        .par_iter()
        .filter_map(|&v| {
            let x = grid.center(&grid.multi_index(v));
            let (mut best_p, mut best_s) = (f64::INFINITY, UNASSIGNED);
            for (s, &birth) in births.iter().enumerate() {
                let p = kernel.eval(dom.distance_sq_unchecked(sites.position(s), &x), birth);
                if better(p, s as u32, best_p, best_s) {
                    best_p = p;
                    best_s = s as u32;
                }
            }
            let expected_value = if kernel.kind == Kind::Voronoi { best_p.sqrt() } else { best_p };
            let found = labels.labels()[v];
            let value_mismatch = distances
                .map(|d| d.values()[v])
                .filter(|&stored| stored != expected_value)
                .map(|stored| (stored, expected_value));
            (found != best_s || value_mismatch.is_some()).then_some(Violation {
                voxel: v,
                found,
                expected: best_s,
                value_mismatch,
            })
        })
        .collect();
    violations.sort_by_key(|v| v.voxel);
    violations.dedup_by_key(|v| v.voxel);
    Ok(ValidationReport { checked: voxels.len(), violations })
}
