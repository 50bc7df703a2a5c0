//! Voxel images of Voronoi, Johnson-Mehl and Laguerre tessellations.
//!
//! Sites are arbitrary points of a `d`-dimensional box with periodic or
//! non-periodic boundaries. The accelerated engine investigates a ball
//! around every site and finishes the remaining voxels by brute force;
//! ball sizes come from an analytic model of the number of proximity
//! evaluations, which makes the total cost grow as `N_v ln N_s`.
//!
//! ```
//! use voxellate::{generate_uniform_sites, tessellate_fast, Boundary, Domain, FastOptions, Kind, VoxelGrid};
//!
//! let domain = Domain::unit(2, Boundary::Periodic).unwrap();
//! let sites = generate_uniform_sites(&domain, 50, Kind::Voronoi, None, 1.0, 1).unwrap();
//! let grid = VoxelGrid::new(vec![64, 64], domain).unwrap();
//! let tess = tessellate_fast(&sites, &grid, &FastOptions::default()).unwrap();
//! assert!(tess.labels.labels().iter().all(|&l| l < 50));
//! ```

pub mod cost;
pub mod error;
pub mod geometry;
pub mod io;
pub mod sites;
pub mod tessellate;

pub use cost::{
    asymptotic_voronoi_cost, ball_volume, growth_cost, optimal_r0, optimal_v0, radius_from_volume,
    search_optimal_t0, t0_bracket, voronoi_cost, CostModel,
};
pub use error::{Error, Result};
pub use geometry::{
    euclidean_distance_sq, l_periodic_distance_sq, proximity, Boundary, Domain, Kind, Point, VoxelGrid,
};
pub use sites::{
    generate_uniform_sites, prune_ineffective_sites, shift_time_reference, spheres_to_timed_sites,
    LaguerreSpheres, PrunedSites, SiteSet,
};
pub use tessellate::{
    scan_ball, tessellate, tessellate_brute, tessellate_fast, validate_partition, DistanceImage, Engine,
    EvalCounters, FastOptions, LabelImage, Tessellation, ValidationReport,
};
