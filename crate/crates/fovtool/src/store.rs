//! Dataset ingestion and an in-memory R-tree over FoV MBRs.
//!
//! The index is a static sort-tile-recursive (STR) packed R-tree with a
//! fan-out of 16, bulk-loaded once at construction. The store is immutable
//! afterwards and safe for concurrent readers.
//!
//! Dataset CSV format (UTF-8, header required, one FoV per row):
//! `video_id,t,lat,lon,theta,r,alpha`
//! with `t` in integer epoch seconds, `lat`/`lon` in decimal degrees,
//! `theta` in [0,360), `r` in meters, `alpha` in (0,360]. MBRs are always
//! recomputed at load, never read from the file.

use std::io::BufRead;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geo::{FoV, GeoPoint, Mbr};

pub const DATASET_HEADER: &str = "video_id,t,lat,lon,theta,r,alpha";

const RTREE_FANOUT: usize = 16;

/// Inclusive time interval in UNIX epoch seconds.
#[derive(Copy, Clone, Debug, Serialize)]
pub struct TimeInterval {
    pub t_min: i64,
    pub t_max: i64,
}

impl TimeInterval {
    pub fn new(t_min: i64, t_max: i64) -> Result<Self> {
        if t_min > t_max {
            return Err(Error::invalid("time interval start exceeds its end"));
        }
        Ok(Self { t_min, t_max })
    }

    pub fn all() -> Self {
        Self {
            t_min: i64::MIN,
            t_max: i64::MAX,
        }
    }

    #[inline]
    pub fn contains(&self, t: i64) -> bool {
        t >= self.t_min && t <= self.t_max
    }
}

#[derive(Debug)]
struct Node {
    mbr: Mbr,
    /// Leaf nodes hold FoV array positions; inner nodes hold node indices.
    children: Vec<u32>,
    leaf: bool,
}

/// STR-packed R-tree; nodes live in an arena, `root` indexes into it.
#[derive(Debug)]
struct StrTree {
    nodes: Vec<Node>,
    root: Option<usize>,
}

impl StrTree {
    fn build(entries: &[(Mbr, u32)]) -> StrTree {
        let mut nodes = Vec::new();
        if entries.is_empty() {
            return StrTree { nodes, root: None };
        }

        // Pack the leaf level with sort-tile-recursive ordering.
        let order = str_order(entries.iter().map(|(m, _)| *m).collect());
        let mut level: Vec<usize> = Vec::new();
        for chunk in order.chunks(RTREE_FANOUT) {
            let children: Vec<u32> = chunk.iter().map(|&i| entries[i].1).collect();
            let mbr = chunk
                .iter()
                .map(|&i| entries[i].0)
                .reduce(|a, b| a.union(&b))
                .unwrap();
            nodes.push(Node {
                mbr,
                children,
                leaf: true,
            });
            level.push(nodes.len() - 1);
        }

        // Pack upper levels until a single root remains.
        while level.len() > 1 {
            let mbrs: Vec<Mbr> = level.iter().map(|&i| nodes[i].mbr).collect();
            let order = str_order(mbrs);
            let mut next: Vec<usize> = Vec::new();
            for chunk in order.chunks(RTREE_FANOUT) {
                let children: Vec<u32> = chunk.iter().map(|&i| level[i] as u32).collect();
                let mbr = chunk
                    .iter()
                    .map(|&i| nodes[level[i]].mbr)
                    .reduce(|a, b| a.union(&b))
                    .unwrap();
                nodes.push(Node {
                    mbr,
                    children,
                    leaf: false,
                });
                next.push(nodes.len() - 1);
            }
            level = next;
        }

        let root = Some(level[0]);
        StrTree { nodes, root }
    }

    fn query(&self, area: &Mbr, out: &mut Vec<u32>) {
        let Some(root) = self.root else { return };
        let mut stack = vec![root];
        while let Some(i) = stack.pop() {
            let node = &self.nodes[i];
            if !node.mbr.intersects(area) {
                continue;
            }
            if node.leaf {
                out.extend(node.children.iter().copied());
            } else {
                stack.extend(node.children.iter().map(|&c| c as usize));
            }
        }
    }
}

/// Sort-tile-recursive ordering: slice by longitude of the MBR center,
/// then sort each slice by latitude.
fn str_order(mbrs: Vec<Mbr>) -> Vec<usize> {
    let n = mbrs.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| {
        mbrs[a]
            .center()
            .lon
            .total_cmp(&mbrs[b].center().lon)
            .then(a.cmp(&b))
    });
    let leaves = n.div_ceil(RTREE_FANOUT);
    let slices = (leaves as f64).sqrt().ceil() as usize;
    let slice_len = n.div_ceil(slices).max(1);
    for slice in idx.chunks_mut(slice_len) {
        slice.sort_by(|&a, &b| {
            mbrs[a]
                .center()
                .lat
                .total_cmp(&mbrs[b].center().lat)
                .then(a.cmp(&b))
        });
    }
    idx
}

/// Immutable FoV collection with a spatial index over the cached MBRs.
#[derive(Debug)]
pub struct FovStore {
    fovs: Vec<FoV>,
    index: StrTree,
}

impl FovStore {
    /// Loads the dataset CSV format, validating every row. MBRs are
    /// recomputed and the index is bulk-loaded; file row order is kept.
    pub fn load(path: impl AsRef<Path>) -> Result<FovStore> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let reader = std::io::BufReader::new(file);
        let mut fovs = Vec::new();
        let mut lines = reader.lines().enumerate();

        let header = match lines.next() {
            Some((_, Ok(h))) => h,
            Some((_, Err(e))) => return Err(Error::io(path, e)),
            None => return Err(Error::parse(path, 1, "missing header")),
        };
        if header.trim() != DATASET_HEADER {
            return Err(Error::parse(
                path,
                1,
                format!("expected header `{DATASET_HEADER}`, got `{}`", header.trim()),
            ));
        }

        for (i, line) in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            let lineno = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            fovs.push(parse_row(path, lineno, &line)?);
        }
        Ok(Self::from_fovs(fovs))
    }

    /// Builds a store from already-validated FoVs (datagen, tests).
    pub fn from_fovs(fovs: Vec<FoV>) -> FovStore {
        let entries: Vec<(Mbr, u32)> = fovs
            .iter()
            .enumerate()
            .map(|(i, f)| (f.mbr, i as u32))
            .collect();
        let index = StrTree::build(&entries);
        FovStore { fovs, index }
    }

    pub fn len(&self) -> usize {
        self.fovs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fovs.is_empty()
    }

    pub fn fovs(&self) -> &[FoV] {
        &self.fovs
    }

    /// All FoVs whose MBR intersects `area` (closed intervals) and whose
    /// timestamp lies in `t`, in ascending storage order.
    pub fn get_fovs_in_range(&self, area: &Mbr, t: &TimeInterval) -> Vec<&FoV> {
        let mut hits: Vec<u32> = Vec::new();
        self.index.query(area, &mut hits);
        hits.sort_unstable();
        hits.into_iter()
            .map(|i| &self.fovs[i as usize])
            .filter(|f| f.mbr.intersects(area) && t.contains(f.t))
            .collect()
    }
}

fn parse_row(path: &Path, lineno: usize, line: &str) -> Result<FoV> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 7 {
        return Err(Error::parse(
            path,
            lineno,
            format!("expected 7 fields, got {}", fields.len()),
        ));
    }

    let field = |idx: usize, name: &str| -> Result<f64> {
        fields[idx].trim().parse::<f64>().map_err(|_| {
            Error::parse(path, lineno, format!("field `{name}`: not a number"))
        })
    };

    let video_id = fields[0].trim().to_string();
    let t: i64 = fields[1].trim().parse().map_err(|_| {
        Error::parse(path, lineno, "field `t`: not an integer timestamp")
    })?;
    let lat = field(2, "lat")?;
    let lon = field(3, "lon")?;
    let theta = field(4, "theta")?;
    let r = field(5, "r")?;
    let alpha = field(6, "alpha")?;

    let p = GeoPoint::new(lat, lon);
    if !p.is_valid() {
        return Err(Error::parse(
            path,
            lineno,
            format!("field `lat`/`lon`: ({lat}, {lon}) out of range"),
        ));
    }
    if !(0.0..360.0).contains(&theta) || !theta.is_finite() {
        return Err(Error::parse(
            path,
            lineno,
            format!("field `theta`: {theta} not in [0, 360)"),
        ));
    }
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::parse(
            path,
            lineno,
            format!("field `r`: {r} must be > 0"),
        ));
    }
    if !(alpha.is_finite() && alpha > 0.0 && alpha <= 360.0) {
        return Err(Error::parse(
            path,
            lineno,
            format!("field `alpha`: {alpha} not in (0, 360]"),
        ));
    }

    let fov = FoV::new(video_id, t, p, theta, r, alpha);
    // Antimeridian and polar wrap are rejected rather than handled.
    if fov.mbr.lat_min < -90.0
        || fov.mbr.lat_max > 90.0
        || fov.mbr.lon_min < -180.0
        || fov.mbr.lon_max > 180.0
    {
        return Err(Error::parse(
            path,
            lineno,
            "FoV extent crosses the antimeridian or a pole",
        ));
    }
    Ok(fov)
}
