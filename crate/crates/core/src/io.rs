//! File formats: site lists, binary label/distance images with a JSON
//! sidecar header, PPM/PGM slices and the metrics CSV.
//!
//! Image payloads are raw little-endian arrays (`u32` labels, `f64`
//! distances) in voxel order with axis 1 (the first axis) varying fastest.
//! The header lives next to the payload at `<payload>.json`.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Boundary, Domain, Kind, VoxelGrid};
use crate::sites::{spheres_to_timed_sites, LaguerreSpheres, SiteSet};
use crate::tessellate::{DistanceImage, LabelImage};

pub const FORMAT_VERSION: u32 = 1;

// ---------------------------------------------------------------- sites

/// Parses a site list.
///
/// ```text
/// <kind> <d> <N_s> [G]
/// x_1 ... x_d [t_s | r_s]
/// ```
///
/// `kind` is `voronoi`, `johnson-mehl`, `laguerre` or `spheres`. Timed
/// kinds need `G` and a trailing birth time; `spheres` lines end with a
/// radius and are converted with `t_s = -r_s^2 / G` (`G` defaults to 1,
/// which does not change the partition). Blank lines and lines starting
/// with `#` are skipped.
pub fn parse_sites(text: &str, domain: &Domain) -> Result<SiteSet> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hline, header) = lines.next().ok_or_else(|| Error::format("site file is empty"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if !(3..=4).contains(&fields.len()) {
        return Err(Error::format(format!("line {hline}: expected `kind d N_s [G]`")));
    }
    let spheres = fields[0] == "spheres";
    let kind = if spheres { Kind::Laguerre } else { fields[0].parse::<Kind>().map_err(|e| Error::format(e.to_string()))? };
    let d: usize = parse_field(fields[1], hline, "dimension")?;
    let n: usize = parse_field(fields[2], hline, "site count")?;
    let growth: Option<f64> = fields.get(3).map(|g| parse_field(g, hline, "growth rate")).transpose()?;
    if d != domain.dim() {
        return Err(Error::format(format!("site file is {d}-dimensional, domain is {}-dimensional", domain.dim())));
    }
    let per_line = if kind.is_timed() { d + 1 } else { d };
    let mut positions = Vec::with_capacity(n * d);
    let mut attrs = Vec::with_capacity(n);
    for (lno, line) in lines {
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| parse_field(t, lno, "coordinate"))
            .collect::<Result<_>>()?;
        if vals.len() != per_line {
            return Err(Error::format(format!("line {lno}: expected {per_line} values, found {}", vals.len())));
        }
        positions.extend_from_slice(&vals[..d]);
        if kind.is_timed() {
            attrs.push(vals[d]);
        }
    }
    if positions.len() != n * d {
        return Err(Error::format(format!("header announces {n} sites, found {}", positions.len() / d)));
    }
    if spheres {
        let sph = LaguerreSpheres::new(d, positions, attrs)?;
        spheres_to_timed_sites(&sph, growth.unwrap_or(1.0), domain)
    } else {
        SiteSet::new(kind, domain, positions, kind.is_timed().then_some(attrs), growth)
    }
}

fn parse_field<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse().map_err(|_| Error::format(format!("line {line}: bad {what} `{tok}`")))
}

pub fn read_sites(path: &Path, domain: &Domain) -> Result<SiteSet> {
    parse_sites(&fs::read_to_string(path)?, domain)
}

pub fn format_sites(sites: &SiteSet) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    let _ = write!(out, "{} {} {}", sites.kind(), sites.dim(), sites.len());
    if let Some(g) = sites.growth() {
        let _ = write!(out, " {g:e}");
    }
    out.push('\n');
    for s in 0..sites.len() {
        let coords: Vec<String> = sites.position(s).iter().map(|c| format!("{c:e}")).collect();
        out.push_str(&coords.join(" "));
        if let Some(b) = sites.births() {
            let _ = write!(out, " {:e}", b[s]);
        }
        out.push('\n');
    }
    out
}

pub fn write_sites(path: &Path, sites: &SiteSet) -> Result<()> {
    fs::write(path, format_sites(sites))?;
    Ok(())
}

// ---------------------------------------------------------------- images

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Payload {
    Labels,
    Distances,
}

impl Payload {
    fn dtype(self) -> &'static str {
        match self {
            Payload::Labels => "u32le",
            Payload::Distances => "f64le",
        }
    }

    fn width(self) -> usize {
        match self {
            Payload::Labels => 4,
            Payload::Distances => 8,
        }
    }
}

/// Sidecar header describing an image payload.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageHeader {
    pub format_version: u32,
    pub payload: Payload,
    pub dtype: String,
    pub order: String,
    pub d: usize,
    pub dims: Vec<usize>,
    pub lengths: Vec<f64>,
    pub boundary: Boundary,
    pub kind: Kind,
    pub n_sites: usize,
    pub seed: Option<u64>,
}

/// Run facts recorded in image headers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImageMeta {
    pub kind: Kind,
    pub n_sites: usize,
    pub seed: Option<u64>,
}

impl ImageHeader {
    fn new(grid: &VoxelGrid, payload: Payload, meta: &ImageMeta) -> Self {
        ImageHeader {
            format_version: FORMAT_VERSION,
            payload,
            dtype: payload.dtype().to_string(),
            order: "axis1-fastest".to_string(),
            d: grid.dim(),
            dims: grid.counts().to_vec(),
            lengths: grid.domain().lengths().to_vec(),
            boundary: grid.domain().boundary(),
            kind: meta.kind,
            n_sites: meta.n_sites,
            seed: meta.seed,
        }
    }

    pub fn grid(&self) -> Result<VoxelGrid> {
        if self.d != self.dims.len() || self.d != self.lengths.len() {
            return Err(Error::format("header d does not match dims/lengths"));
        }
        VoxelGrid::new(self.dims.clone(), Domain::new(self.lengths.clone(), self.boundary)?)
    }
}

pub fn header_path(payload: &Path) -> PathBuf {
    let mut s = payload.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn write_header(path: &Path, header: &ImageHeader) -> Result<()> {
    let json = serde_json::to_string_pretty(header).map_err(|e| Error::format(e.to_string()))?;
    fs::write(header_path(path), json + "\n")?;
    Ok(())
}

pub fn read_header(path: &Path) -> Result<ImageHeader> {
    let text = fs::read_to_string(header_path(path))?;
    serde_json::from_str(&text).map_err(|e| Error::format(format!("bad image header: {e}")))
}

pub fn encode_labels(labels: &[u32]) -> Vec<u8> {
    labels.iter().flat_map(|l| l.to_le_bytes()).collect()
}

pub fn encode_distances(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

fn write_payload(path: &Path, bytes: impl Iterator<Item = [u8; 8]>, width: usize) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for b in bytes {
        w.write_all(&b[..width])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_label_image(path: &Path, image: &LabelImage, meta: &ImageMeta) -> Result<()> {
    write_payload(
        path,
        image.labels().iter().map(|l| {
            let mut b = [0u8; 8];
            b[..4].copy_from_slice(&l.to_le_bytes());
            b
        }),
        4,
    )?;
    write_header(path, &ImageHeader::new(image.grid(), Payload::Labels, meta))
}

pub fn write_distance_image(path: &Path, image: &DistanceImage, meta: &ImageMeta) -> Result<()> {
    write_payload(path, image.values().iter().map(|v| v.to_le_bytes()), 8)?;
    write_header(path, &ImageHeader::new(image.grid(), Payload::Distances, meta))
}

fn read_payload(path: &Path, want: Payload) -> Result<(ImageHeader, VoxelGrid, Vec<u8>)> {
    let header = read_header(path)?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::format(format!("unsupported format version {}", header.format_version)));
    }
    if header.payload != want || header.dtype != want.dtype() {
        return Err(Error::format(format!("expected a {} payload, header says {}", want.dtype(), header.dtype)));
    }
    let grid = header.grid()?;
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    let expected = grid.n_voxels() * want.width();
    if bytes.len() != expected {
        return Err(Error::format(format!(
            "payload has {} bytes, header dims {:?} need {expected}",
            bytes.len(),
            header.dims
        )));
    }
    Ok((header, grid, bytes))
}

pub fn read_label_image(path: &Path) -> Result<(LabelImage, ImageHeader)> {
    let (header, grid, bytes) = read_payload(path, Payload::Labels)?;
    let labels = bytes.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((LabelImage::new(grid, labels)?, header))
}

pub fn read_distance_image(path: &Path) -> Result<(DistanceImage, ImageHeader)> {
    let (header, grid, bytes) = read_payload(path, Payload::Distances)?;
    let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((DistanceImage::new(grid, values)?, header))
}

// ---------------------------------------------------------------- slices

/// Voxels of a 2-D cut, row by row: `(width, height, linear indices)`.
///
/// For `d == 2` the cut is the whole image. Otherwise `axis` is fixed at
/// `index`, the first two remaining axes span the raster and any further
/// axes are fixed at their middle voxel.
pub fn slice_plane(grid: &VoxelGrid, axis: usize, index: usize) -> Result<(usize, usize, Vec<usize>)> {
    let d = grid.dim();
    if d < 2 {
        return Err(Error::invalid("slices need at least two dimensions"));
    }
    if axis >= d {
        return Err(Error::invalid(format!("axis {axis} out of range for dimension {d}")));
    }
    let counts = grid.counts();
    if index >= counts[axis] {
        return Err(Error::invalid(format!("index {index} out of range for axis {axis} ({} voxels)", counts[axis])));
    }
    let mut fixed: Vec<usize> = counts.iter().map(|n| n / 2).collect();
    let (ax_u, ax_v) = if d == 2 {
        (0, 1)
    } else {
        fixed[axis] = index;
        let mut rest = (0..d).filter(|&i| i != axis);
        (rest.next().unwrap(), rest.next().unwrap())
    };
    let (w, h) = (counts[ax_u], counts[ax_v]);
    let mut out = Vec::with_capacity(w * h);
    let mut k = fixed;
    for v in 0..h {
        for u in 0..w {
            k[ax_u] = u;
            k[ax_v] = v;
            out.push(grid.linear_index(&k));
        }
    }
    Ok((w, h, out))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Arbitrary but reproducible colour for a label.
pub fn label_color(label: u32, palette_seed: u64) -> [u8; 3] {
    let h = splitmix64(u64::from(label) ^ splitmix64(palette_seed));
    [(h >> 16) as u8, (h >> 24) as u8, (h >> 32) as u8]
}

/// Binary PPM (P6) of a label slice.
pub fn export_label_slice(image: &LabelImage, axis: usize, index: usize, palette_seed: u64, path: &Path) -> Result<()> {
    let (w, h, idx) = slice_plane(image.grid(), axis, index)?;
    let mut out = BufWriter::new(File::create(path)?);
    write!(out, "P6\n{w} {h}\n255\n")?;
    for &i in &idx {
        out.write_all(&label_color(image.labels()[i], palette_seed))?;
    }
    out.flush()?;
    Ok(())
}

/// Binary PGM (P5) of a distance slice, scaled so the slice maximum is white.
pub fn export_distance_slice(image: &DistanceImage, axis: usize, index: usize, path: &Path) -> Result<()> {
    let (w, h, idx) = slice_plane(image.grid(), axis, index)?;
    let vals: Vec<f64> = idx.iter().map(|&i| image.values()[i]).collect();
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut out = BufWriter::new(File::create(path)?);
    write!(out, "P5\n{w} {h}\n255\n")?;
    let px: Vec<u8> = vals.iter().map(|v| ((v - lo) / span * 255.0).round() as u8).collect();
    out.write_all(&px)?;
    out.flush()?;
    Ok(())
}

// ---------------------------------------------------------------- metrics

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub run_id: String,
    pub kind: Kind,
    #[serde(rename = "N_v")]
    pub n_voxels: u64,
    #[serde(rename = "N_s")]
    pub n_sites: u64,
    /// `r0` or `t0`; empty for the brute-force engine.
    pub param: Option<f64>,
    pub step1_evals: u64,
    pub step2_evals: u64,
    pub model_step12: Option<f64>,
    pub wall_seconds: f64,
}

pub fn write_metrics<W: Write>(out: W, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::format(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    write_metrics(File::create(path)?, rows)
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_reader(BufReader::new(File::open(path)?));
    r.deserialize().map(|row| row.map_err(|e| Error::format(e.to_string()))).collect()
}

/// `param,model_cost` CSV.
pub fn write_cost_curve<W: Write>(mut out: W, curve: &[(f64, f64)]) -> Result<()> {
    writeln!(out, "param,model_cost")?;
    for (p, c) in curve {
        writeln!(out, "{p},{c}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid2(n: usize) -> VoxelGrid {
        VoxelGrid::new(vec![n, n], Domain::unit(2, Boundary::Periodic).unwrap()).unwrap()
    }

    const META: ImageMeta = ImageMeta { kind: Kind::Voronoi, n_sites: 2, seed: Some(3) };

    #[test]
    fn label_payload_bytes() {
        let bytes = encode_labels(&[0, 1, 1, 0]);
        assert_eq!(bytes.len(), 16);
        assert_eq!(bytes, [0, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn image_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let img = LabelImage::new(grid2(2), vec![0, 1, 1, 0]).unwrap();
        let p = dir.path().join("l.bin");
        write_label_image(&p, &img, &META).unwrap();
        assert_eq!(fs::read(&p).unwrap(), encode_labels(&[0, 1, 1, 0]));
        let (back, header) = read_label_image(&p).unwrap();
        assert_eq!(back, img);
        assert_eq!(header.dims, vec![2, 2]);
        assert_eq!(header.seed, Some(3));

        let dist = DistanceImage::new(grid2(2), vec![0.5, 1.25, f64::MAX, 0.0]).unwrap();
        let q = dir.path().join("d.bin");
        write_distance_image(&q, &dist, &META).unwrap();
        assert_eq!(read_distance_image(&q).unwrap().0, dist);
        // wrong payload type
        assert!(read_label_image(&q).is_err());
    }

    #[test]
    fn header_dims_mismatch_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("l.bin");
        write_label_image(&p, &LabelImage::new(grid2(2), vec![0; 4]).unwrap(), &META).unwrap();
        let mut h = read_header(&p).unwrap();
        h.dims = vec![3, 2];
        fs::write(header_path(&p), serde_json::to_string(&h).unwrap()).unwrap();
        assert!(matches!(read_label_image(&p), Err(Error::Format(_))));
    }

    #[test]
    fn site_text_round_trip() {
        let dom = Domain::unit(3, Boundary::Periodic).unwrap();
        let s = crate::sites::generate_uniform_sites(&dom, 17, Kind::JohnsonMehl, Some(0.3), 2.0, 4).unwrap();
        assert_eq!(parse_sites(&format_sites(&s), &dom).unwrap(), s);
        let v = crate::sites::generate_uniform_sites(&dom, 5, Kind::Voronoi, None, 1.0, 4).unwrap();
        assert_eq!(parse_sites(&format_sites(&v), &dom).unwrap(), v);
    }

    #[test]
    fn site_text_errors_and_spheres() {
        let dom = Domain::unit(2, Boundary::NonPeriodic).unwrap();
        assert!(parse_sites("", &dom).is_err());
        assert!(parse_sites("voronoi 2 2\n0.5 0.5\n", &dom).is_err());
        assert!(parse_sites("voronoi 3 1\n0.5 0.5 0.5\n", &dom).is_err());
        assert!(parse_sites("voronoi 2 1\n0.5 abc\n", &dom).is_err());
        assert!(parse_sites("voronoi 2 1\n1.0 0.5\n", &dom).is_err());
        assert!(parse_sites("laguerre 2 1\n0.5 0.5 0.1\n", &dom).is_err());
        let s = parse_sites("# spheres\nspheres 2 2 4\n0.25 0.5 2\n0.75 0.5 0\n", &dom).unwrap();
        assert_eq!(s.kind(), Kind::Laguerre);
        assert_eq!(s.births().unwrap(), &[-1.0, 0.0]);
    }

    #[test]
    fn slices() {
        let g = grid2(4);
        let (w, h, idx) = slice_plane(&g, 0, 3).unwrap();
        assert_eq!((w, h), (4, 4));
        assert_eq!(idx, (0..16).collect::<Vec<_>>());
        let g3 = VoxelGrid::new(vec![5, 6, 7], Domain::unit(3, Boundary::Periodic).unwrap()).unwrap();
        let (w, h, idx) = slice_plane(&g3, 2, 3).unwrap();
        assert_eq!((w, h), (5, 6));
        assert_eq!(idx[0], g3.linear_index(&[0, 0, 3]));
        assert!(slice_plane(&g3, 3, 0).is_err());
        assert!(slice_plane(&g3, 1, 6).is_err());
        let g1 = VoxelGrid::new(vec![5], Domain::unit(1, Boundary::Periodic).unwrap()).unwrap();
        assert!(slice_plane(&g1, 0, 0).is_err());
    }

    #[test]
    fn constant_label_slice_is_uniform() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.ppm");
        export_label_slice(&LabelImage::new(grid2(3), vec![7; 9]).unwrap(), 0, 0, 1, &p).unwrap();
        let bytes = fs::read(&p).unwrap();
        let body = &bytes[b"P6\n3 3\n255\n".len()..];
        assert_eq!(body.len(), 27);
        assert!(body.chunks(3).all(|c| c == label_color(7, 1)));
    }

    #[test]
    fn metrics_header_and_row() {
        let row = MetricsRow {
            run_id: "r".into(),
            kind: Kind::Laguerre,
            n_voxels: 8,
            n_sites: 2,
            param: Some(0.5),
            step1_evals: 3,
            step2_evals: 4,
            model_step12: None,
            wall_seconds: 0.25,
        };
        let mut buf = Vec::new();
        write_metrics(&mut buf, &[row]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "run_id,kind,N_v,N_s,param,step1_evals,step2_evals,model_step12,wall_seconds"
        );
        assert_eq!(lines.next().unwrap(), "r,laguerre,8,2,0.5,3,4,,0.25");
        assert!(lines.next().is_none());
    }
}
