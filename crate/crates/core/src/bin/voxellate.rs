use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use voxellate::cost::{cost_curve, growth_cost, voronoi_cost_for_radius, CostModel};
use voxellate::io::{
    emit_metrics, export_distance_slice, export_label_slice, read_distance_image, read_label_image, read_sites,
    write_cost_curve, write_distance_image, write_label_image, write_sites, ImageMeta, MetricsRow,
};
use voxellate::{
    generate_uniform_sites, prune_ineffective_sites, tessellate, validate_partition, Boundary, Domain, Engine, Error,
    FastOptions, Kind, SiteSet, Tessellation, VoxelGrid,
};

#[derive(Parser)]
#[command(name = "voxellate", version, about = "Voxel images of Voronoi, Johnson-Mehl and Laguerre tessellations")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "VOXELLATE_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Voronoi tessellation.
    Voronoi(RunArgs),
    /// Johnson-Mehl tessellation (needs --growth when generating sites).
    JohnsonMehl(RunArgs),
    /// Laguerre tessellation (needs --growth when generating sites).
    Laguerre(RunArgs),
    /// Any kind, chosen with --kind or taken from --site-file.
    Run {
        #[arg(long)]
        kind: Option<Kind>,
        #[command(flatten)]
        args: RunArgs,
    },
    /// Model cost against r0 (Voronoi) or t0 (timed kinds) as `param,model_cost`.
    CostCurve {
        #[arg(long)]
        kind: Option<Kind>,
        #[command(flatten)]
        setup: Setup,
        #[arg(long, default_value_t = 33)]
        points: usize,
        /// Output CSV (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recomputes every (or a sample of) voxel label from the sites.
    Validate {
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        site_file: PathBuf,
        #[arg(long)]
        distances: Option<PathBuf>,
        /// Check this many random voxels instead of all.
        #[arg(long)]
        sample: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args, Clone)]
struct Setup {
    /// Voxels per axis, e.g. 64,64,64.
    #[arg(long, value_delimiter = ',', required = true)]
    dims: Vec<usize>,
    /// Domain edge lengths (default 1 per axis).
    #[arg(long, value_delimiter = ',')]
    lengths: Option<Vec<f64>>,
    #[arg(long)]
    periodic: bool,
    /// Number of uniformly drawn sites.
    #[arg(long, conflicts_with = "site_file", required_unless_present = "site_file")]
    sites: Option<usize>,
    #[arg(long)]
    site_file: Option<PathBuf>,
    /// Growth rate G of generated timed sites.
    #[arg(long, conflicts_with = "site_file")]
    growth: Option<f64>,
    /// Birth times of generated timed sites are drawn from [0, T).
    #[arg(long, default_value_t = 1.0)]
    horizon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Clone)]
struct RunArgs {
    #[command(flatten)]
    setup: Setup,
    #[arg(long, default_value = "fast")]
    engine: Engine,
    /// Fixed investigation radius (Voronoi, fast engine).
    #[arg(long, conflicts_with = "t0")]
    r0: Option<f64>,
    /// Fixed fictitious time (Johnson-Mehl / Laguerre, fast engine).
    #[arg(long)]
    t0: Option<f64>,
    /// Keep ineffective timed sites in the scans.
    #[arg(long)]
    no_prune: bool,
    /// Output prefix for `<out>.labels.bin`, `<out>.dist.bin`, `<out>.metrics.csv`.
    #[arg(long, default_value = "voxellate")]
    out: String,
    /// Also write `<out>.slice.ppm` and `<out>.dist.pgm` for AXIS:INDEX.
    #[arg(long)]
    slice: Option<String>,
    /// Fast-engine sweep `r0=a:b:n` or `t0=a:b:n`; writes metrics only.
    #[arg(long, conflicts_with_all = ["r0", "t0"])]
    sweep: Option<String>,
    #[arg(long, default_value = "run")]
    run_id: String,
    /// Palette seed for slices (defaults to --seed).
    #[arg(long)]
    palette_seed: Option<u64>,
}

struct Usage(String);

enum Failure {
    Usage(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidInput(m) => Failure::Usage(m),
            other => Failure::Run(other),
        }
    }
}

impl From<Usage> for Failure {
    fn from(u: Usage) -> Self {
        Failure::Usage(u.0)
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Voronoi(a) => run(Some(Kind::Voronoi), a),
        Command::JohnsonMehl(a) => run(Some(Kind::JohnsonMehl), a),
        Command::Laguerre(a) => run(Some(Kind::Laguerre), a),
        Command::Run { kind, args } => run(kind, args),
        Command::CostCurve { kind, setup, points, out } => curve(kind, &setup, points, out.as_deref()),
        Command::Validate { labels, site_file, distances, sample, seed } => {
            validate(&labels, &site_file, distances.as_deref(), sample, seed)
        }
    };
    match result {
        Ok(code) => code,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn build(kind: Option<Kind>, s: &Setup) -> Outcome<(SiteSet, VoxelGrid)> {
    let d = s.dims.len();
    let lengths = s.lengths.clone().unwrap_or_else(|| vec![1.0; d]);
    if lengths.len() != d {
        return Err(Usage(format!("--lengths has {} values, --dims has {d}", lengths.len())).into());
    }
    let boundary = if s.periodic { Boundary::Periodic } else { Boundary::NonPeriodic };
    let grid = VoxelGrid::new(s.dims.clone(), Domain::new(lengths, boundary)?)?;
    let sites = match (&s.site_file, s.sites) {
        (Some(path), _) => {
            let sites = read_sites(path, grid.domain())?;
            if let Some(k) = kind.filter(|&k| k != sites.kind()) {
                return Err(Usage(format!("site file holds {} sites, {k} requested", sites.kind())).into());
            }
            sites
        }
        (None, Some(n)) => {
            let kind = kind.ok_or_else(|| Usage("--kind is required when sites are generated".into()))?;
            if kind.is_timed() && s.growth.is_none() {
                return Err(Usage(format!("--growth is required for {kind} sites")).into());
            }
            generate_uniform_sites(grid.domain(), n, kind, s.growth, s.horizon, s.seed)?
        }
        (None, None) => return Err(Usage("either --sites or --site-file is required".into()).into()),
    };
    Ok((sites, grid))
}

fn parse_slice(spec: &str) -> Outcome<(usize, usize)> {
    let bad = || Usage(format!("--slice expects AXIS:INDEX, got `{spec}`"));
    let (a, i) = spec.split_once(':').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, i.trim().parse().map_err(|_| bad())?))
}

fn parse_sweep(spec: &str, kind: Kind) -> Outcome<Vec<f64>> {
    let bad = || Usage(format!("--sweep expects r0=a:b:n or t0=a:b:n, got `{spec}`"));
    let (name, range) = spec.split_once('=').ok_or_else(bad)?;
    let want = if kind.is_timed() { "t0" } else { "r0" };
    if name.trim() != want {
        return Err(Usage(format!("{kind} sweeps take {want}, got `{name}`")).into());
    }
    let parts: Vec<&str> = range.split(':').collect();
    if parts.len() != 3 {
        return Err(bad().into());
    }
    let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if n == 0 {
        return Err(bad().into());
    }
    Ok((0..n).map(|i| if n == 1 { a } else { a + (b - a) * i as f64 / (n - 1) as f64 }).collect())
}

fn model_cost(kind: Kind, param: f64, scan_sites: &SiteSet, grid: &VoxelGrid) -> Option<f64> {
    if kind.is_timed() {
        growth_cost(param, scan_sites, grid).ok()
    } else {
        voronoi_cost_for_radius(param, grid.dim(), &CostModel::for_grid(grid, scan_sites.len())).ok()
    }
}

fn metrics_row(run_id: &str, sites: &SiteSet, grid: &VoxelGrid, t: &Tessellation, model: Option<f64>, secs: f64) -> MetricsRow {
    MetricsRow {
        run_id: run_id.to_string(),
        kind: sites.kind(),
        n_voxels: grid.n_voxels() as u64,
        n_sites: sites.len() as u64,
        param: t.param,
        step1_evals: t.counters.step1_evals,
        step2_evals: t.counters.step2_evals,
        model_step12: model,
        wall_seconds: secs,
    }
}

fn with_suffix(prefix: &str, suffix: &str) -> PathBuf {
    PathBuf::from(format!("{prefix}.{suffix}"))
}

fn run(kind: Option<Kind>, a: RunArgs) -> Outcome<ExitCode> {
    let (sites, grid) = build(kind, &a.setup)?;
    let kind = sites.kind();
    let param = match (kind.is_timed(), a.r0, a.t0) {
        (true, Some(_), _) => return Err(Usage(format!("--r0 does not apply to {kind}; use --t0")).into()),
        (false, _, Some(_)) => return Err(Usage("--t0 does not apply to voronoi; use --r0".into()).into()),
        (_, r0, t0) => r0.or(t0),
    };
    if a.engine == Engine::Brute && (param.is_some() || a.sweep.is_some()) {
        return Err(Usage("--r0, --t0 and --sweep need the fast engine".into()).into());
    }
    let slice = a.slice.as_deref().map(parse_slice).transpose()?;
    let prune = !a.no_prune;
    // sites the fast engine scans, for the model column
    let scan_sites = if kind.is_timed() && prune { prune_ineffective_sites(&sites, grid.domain())?.sites } else { sites.clone() };
    let generated = a.setup.site_file.is_none();

    if let Some(spec) = &a.sweep {
        let params = parse_sweep(spec, kind)?;
        let mut rows = Vec::with_capacity(params.len());
        for (i, &p) in params.iter().enumerate() {
            let start = Instant::now();
            let t = tessellate(&sites, &grid, Engine::Fast, &FastOptions { override_param: Some(p), prune })?;
            let secs = start.elapsed().as_secs_f64();
            let model = model_cost(kind, p, &scan_sites, &grid);
            println!("{:>4}  param {p:.6}  evals {:>14}  model {:>14.0}  {secs:.3}s", i, t.counters.total(), model.unwrap_or(f64::NAN));
            rows.push(metrics_row(&format!("{}-{i}", a.run_id), &sites, &grid, &t, model, secs));
        }
        emit_metrics(&with_suffix(&a.out, "metrics.csv"), &rows)?;
        return Ok(ExitCode::SUCCESS);
    }

    let start = Instant::now();
    let t = tessellate(&sites, &grid, a.engine, &FastOptions { override_param: param, prune })?;
    let secs = start.elapsed().as_secs_f64();
    let model = t.param.and_then(|p| model_cost(kind, p, &scan_sites, &grid));

    let meta = ImageMeta { kind, n_sites: sites.len(), seed: generated.then_some(a.setup.seed) };
    write_label_image(&with_suffix(&a.out, "labels.bin"), &t.labels, &meta)?;
    write_distance_image(&with_suffix(&a.out, "dist.bin"), &t.distances, &meta)?;
    emit_metrics(&with_suffix(&a.out, "metrics.csv"), &[metrics_row(&a.run_id, &sites, &grid, &t, model, secs)])?;
    if generated {
        write_sites(&with_suffix(&a.out, "sites.txt"), &sites)?;
    }
    if let Some((axis, index)) = slice {
        export_label_slice(&t.labels, axis, index, a.palette_seed.unwrap_or(a.setup.seed), &with_suffix(&a.out, "slice.ppm"))?;
        export_distance_slice(&t.distances, axis, index, &with_suffix(&a.out, "dist.pgm"))?;
    }

    println!("kind        {kind}");
    println!("N_v         {}", grid.n_voxels());
    println!("N_s         {} ({} scanned)", sites.len(), t.effective_sites);
    match (t.param, kind.is_timed()) {
        (Some(p), false) => println!("r0          {p}"),
        (Some(p), true) => println!("t0          {p}"),
        (None, _) => println!("engine      brute"),
    }
    println!("step1       {}", t.counters.step1_evals);
    println!("step2       {}", t.counters.step2_evals);
    println!("total       {}", t.counters.total());
    if let Some(m) = model {
        println!("model       {m:.0}");
    }
    println!("wall        {secs:.3} s");
    Ok(ExitCode::SUCCESS)
}

fn curve(kind: Option<Kind>, setup: &Setup, points: usize, out: Option<&Path>) -> Outcome<ExitCode> {
    let (sites, grid) = build(kind, setup)?;
    let sites = if sites.kind().is_timed() { prune_ineffective_sites(&sites, grid.domain())?.sites } else { sites };
    let samples = cost_curve(&sites, &grid, points)?;
    match out {
        Some(p) => write_cost_curve(std::fs::File::create(p).map_err(Error::from)?, &samples)?,
        None => write_cost_curve(std::io::stdout().lock(), &samples)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn validate(labels: &Path, site_file: &Path, distances: Option<&Path>, sample: Option<usize>, seed: u64) -> Outcome<ExitCode> {
    let (image, _) = read_label_image(labels)?;
    let sites = read_sites(site_file, image.grid().domain())?;
    let dist = distances.map(read_distance_image).transpose()?.map(|(d, _)| d);
    if let Some(d) = &dist {
        if d.grid() != image.grid() {
            return Err(Failure::Run(Error::Format("distance and label images describe different grids".into())));
        }
    }
    let report = validate_partition(&image, dist.as_ref(), &sites, sample.map(|n| (n, seed)))?;
    println!("checked     {}", report.checked);
    println!("violations  {}", report.violations.len());
    for v in report.violations.iter().take(10) {
        match v.value_mismatch {
            Some((stored, want)) => println!("  voxel {}: label {} (expected {}), value {stored} (expected {want})", v.voxel, v.found, v.expected),
            None => println!("  voxel {}: label {} (expected {})", v.voxel, v.found, v.expected),
        }
    }
    Ok(if report.is_valid() { ExitCode::SUCCESS } else { ExitCode::from(3) })
}
