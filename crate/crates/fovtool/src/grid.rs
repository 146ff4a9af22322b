//! Grid discretization, the dense capture-intention matrix, per-FoV
//! accumulation and top-k extraction.
//!
//! Cells are addressed by min-corner indices; a cell's extent is the
//! half-open square `[min + i*l, min + (i+1)*l)` on each axis and its
//! center is the midpoint. Accumulation iterates cells in row-major order
//! (y outer, x inner) per FoV, so the naive and MBR-filtered variants
//! produce bit-identical matrices.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geo::{FoV, GeoPoint, Mbr};
use crate::model::{ci, ci_literal, ModelParams};

/// Default cell cap: 2 GiB worth of 8-byte entries.
pub const DEFAULT_CELL_CAP: u64 = (2 * 1024 * 1024 * 1024) / 8;

/// The query area discretized into equally-spaced cells.
#[derive(Copy, Clone, Debug, Serialize)]
pub struct GridSpec {
    pub area: Mbr,
    /// Cell side length, degrees.
    pub cell_len: f64,
    /// Cell count along longitude.
    pub xdim: usize,
    /// Cell count along latitude.
    pub ydim: usize,
}

impl GridSpec {
    pub fn new(area: Mbr, cell_len: f64) -> Result<Self> {
        Self::with_cap(area, cell_len, DEFAULT_CELL_CAP)
    }

    pub fn with_cap(area: Mbr, cell_len: f64, cap: u64) -> Result<Self> {
        if !area.is_valid() {
            return Err(Error::invalid("invalid query area"));
        }
        if !(cell_len.is_finite() && cell_len > 0.0) {
            return Err(Error::invalid("cell length must be positive"));
        }
        let xdim = (((area.lon_max - area.lon_min) / cell_len).ceil() as usize).max(1);
        let ydim = (((area.lat_max - area.lat_min) / cell_len).ceil() as usize).max(1);
        let required = xdim as u64 * ydim as u64;
        if required > cap {
            return Err(Error::Capacity {
                required,
                allowed: cap,
            });
        }
        Ok(Self {
            area,
            cell_len,
            xdim,
            ydim,
        })
    }

    pub fn cell_count(&self) -> usize {
        self.xdim * self.ydim
    }

    #[inline]
    pub fn cell_center(&self, x: usize, y: usize) -> GeoPoint {
        GeoPoint::new(
            self.area.lat_min + (y as f64 + 0.5) * self.cell_len,
            self.area.lon_min + (x as f64 + 0.5) * self.cell_len,
        )
    }

    #[inline]
    pub fn row_major(&self, x: usize, y: usize) -> usize {
        y * self.xdim + x
    }

    /// Half-open index ranges of all cells whose extent overlaps `mbr`,
    /// clamped to the grid. A disjoint box yields an empty range.
    pub fn cell_range_for_mbr(&self, mbr: &Mbr) -> CellRange {
        if !mbr.intersects(&self.area) {
            return CellRange::EMPTY;
        }
        let l = self.cell_len;
        let clamp = |v: f64, hi: usize| -> usize {
            if v <= 0.0 {
                0
            } else if v >= hi as f64 {
                hi
            } else {
                v as usize
            }
        };
        let x_min = clamp(((mbr.lon_min - self.area.lon_min) / l).floor(), self.xdim);
        let x_max = clamp(
            ((mbr.lon_max - self.area.lon_min) / l).floor() + 1.0,
            self.xdim,
        );
        let y_min = clamp(((mbr.lat_min - self.area.lat_min) / l).floor(), self.ydim);
        let y_max = clamp(
            ((mbr.lat_max - self.area.lat_min) / l).floor() + 1.0,
            self.ydim,
        );
        CellRange {
            x_min,
            x_max: x_max.max(x_min),
            y_min,
            y_max: y_max.max(y_min),
        }
    }

    /// Full-grid range.
    pub fn full_range(&self) -> CellRange {
        CellRange {
            x_min: 0,
            x_max: self.xdim,
            y_min: 0,
            y_max: self.ydim,
        }
    }
}

/// Half-open cell index window `[x_min, x_max) × [y_min, y_max)`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CellRange {
    pub x_min: usize,
    pub x_max: usize,
    pub y_min: usize,
    pub y_max: usize,
}

impl CellRange {
    pub const EMPTY: CellRange = CellRange {
        x_min: 0,
        x_max: 0,
        y_min: 0,
        y_max: 0,
    };

    pub fn is_empty(&self) -> bool {
        self.x_min >= self.x_max || self.y_min >= self.y_max
    }

    pub fn width(&self) -> usize {
        self.x_max.saturating_sub(self.x_min)
    }

    pub fn height(&self) -> usize {
        self.y_max.saturating_sub(self.y_min)
    }

    pub fn cell_count(&self) -> usize {
        self.width() * self.height()
    }

    pub fn intersect(&self, other: &CellRange) -> CellRange {
        let r = CellRange {
            x_min: self.x_min.max(other.x_min),
            x_max: self.x_max.min(other.x_max),
            y_min: self.y_min.max(other.y_min),
            y_max: self.y_max.min(other.y_max),
        };
        if r.is_empty() {
            CellRange::EMPTY
        } else {
            r
        }
    }
}

/// One ranked grid cell.
#[derive(Clone, Debug, Serialize)]
pub struct CellRef {
    pub x: usize,
    pub y: usize,
    pub center: GeoPoint,
    pub score: f64,
}

/// Counters from an accumulation pass. `cell_updates` counts cell
/// evaluations (cells touched), not just positive additions.
#[derive(Copy, Clone, Debug, Default, Serialize)]
pub struct AccumStats {
    pub fovs_processed: u64,
    pub cell_updates: u64,
}

impl AccumStats {
    pub fn merge(&mut self, other: AccumStats) {
        self.fovs_processed += other.fovs_processed;
        self.cell_updates += other.cell_updates;
    }
}

/// Dense capture-intention accumulator over a grid.
#[derive(Clone, Debug)]
pub struct CiMatrix {
    pub spec: GridSpec,
    values: Vec<f64>,
}

impl CiMatrix {
    pub fn new(spec: GridSpec) -> Self {
        let values = vec![0.0; spec.cell_count()];
        Self { spec, values }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[self.spec.row_major(x, y)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        let i = self.spec.row_major(x, y);
        self.values[i] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Scale so the global maximum becomes 1; an all-zero matrix is
    /// returned unchanged. Used for heatmap export; detectors rank raw
    /// sums since ranking is invariant to positive scaling.
    pub fn normalized(&self) -> CiMatrix {
        let max = self.max_value();
        if max == 0.0 {
            return self.clone();
        }
        let mut out = self.clone();
        for v in &mut out.values {
            *v /= max;
        }
        out
    }

    /// Up to `k` cells with strictly positive score, descending; ties go
    /// to the smaller row-major index.
    pub fn top_k(&self, k: usize) -> Vec<CellRef> {
        top_k_from(
            self.values.iter().enumerate().map(|(i, &v)| (i, v)),
            &self.spec,
            k,
        )
    }
}

/// Shared top-k selection over (row-major index, score) pairs.
pub(crate) fn top_k_from(
    entries: impl Iterator<Item = (usize, f64)>,
    spec: &GridSpec,
    k: usize,
) -> Vec<CellRef> {
    // `beats`: higher score wins, then the smaller row-major index.
    #[inline]
    fn beats(a: (usize, f64), b: (usize, f64)) -> bool {
        a.1 > b.1 || (a.1 == b.1 && a.0 < b.0)
    }

    let mut best: Vec<(usize, f64)> = Vec::with_capacity(k + 1);
    for (i, v) in entries {
        if v <= 0.0 {
            continue;
        }
        if best.len() == k {
            if let Some(&worst) = best.last() {
                if !beats((i, v), worst) {
                    continue;
                }
            }
        }
        let pos = best.partition_point(|&e| beats(e, (i, v)));
        best.insert(pos, (i, v));
        if best.len() > k {
            best.pop();
        }
    }
    best.into_iter()
        .map(|(i, v)| {
            let x = i % spec.xdim;
            let y = i / spec.xdim;
            CellRef {
                x,
                y,
                center: spec.cell_center(x, y),
                score: v,
            }
        })
        .collect()
}

/// Adds one FoV's contributions over `window`, writing into `values`
/// (dense over the window, row-major). Returns cells touched.
pub(crate) fn accumulate_fov_window(
    values: &mut [f64],
    spec: &GridSpec,
    window: &CellRange,
    fov: &FoV,
    params: &ModelParams,
    literal: bool,
) -> u64 {
    let width = window.width();
    let mut touched = 0u64;
    for y in window.y_min..window.y_max {
        let row = (y - window.y_min) * width;
        for x in window.x_min..window.x_max {
            let center = spec.cell_center(x, y);
            let v = if literal {
                ci_literal(fov, center, params)
            } else {
                ci(fov, center, params)
            };
            touched += 1;
            if v > 0.0 {
                values[row + (x - window.x_min)] += v;
            }
        }
    }
    touched
}

/// Naive accumulation: every FoV against every cell of the full grid.
pub fn accumulate_naive(matrix: &mut CiMatrix, fovs: &[&FoV], params: &ModelParams) -> AccumStats {
    let full = matrix.spec.full_range();
    let spec = matrix.spec;
    let mut stats = AccumStats::default();
    for fov in fovs {
        stats.cell_updates += accumulate_fov_window(
            &mut matrix.values,
            &spec,
            &full,
            fov,
            params,
            false,
        );
        stats.fovs_processed += 1;
    }
    stats
}

/// MBR-filtered accumulation: per FoV, only the cells overlapping its
/// cached MBR are touched. Produces the same matrix as
/// [`accumulate_naive`] bit for bit, since skipped cells contribute zero.
pub fn accumulate_filtered(
    matrix: &mut CiMatrix,
    fovs: &[&FoV],
    params: &ModelParams,
) -> AccumStats {
    accumulate_filtered_inner(matrix, fovs, params, false)
}

/// MBR-filtered accumulation with the literal angular evaluation (no
/// circular-FoV shortcut); for measuring the shortcut's effect.
pub fn accumulate_filtered_literal(
    matrix: &mut CiMatrix,
    fovs: &[&FoV],
    params: &ModelParams,
) -> AccumStats {
    accumulate_filtered_inner(matrix, fovs, params, true)
}

fn accumulate_filtered_inner(
    matrix: &mut CiMatrix,
    fovs: &[&FoV],
    params: &ModelParams,
    literal: bool,
) -> AccumStats {
    let spec = matrix.spec;
    let mut stats = AccumStats::default();
    for fov in fovs {
        let range = spec.cell_range_for_mbr(&fov.mbr);
        if range.is_empty() {
            continue;
        }
        // The window is dense over the whole grid here, so write via a
        // full-grid window restricted to the FoV's range.
        stats.cell_updates += accumulate_window_into_grid(matrix, &range, fov, params, literal);
        stats.fovs_processed += 1;
    }
    stats
}

fn accumulate_window_into_grid(
    matrix: &mut CiMatrix,
    range: &CellRange,
    fov: &FoV,
    params: &ModelParams,
    literal: bool,
) -> u64 {
    let spec = matrix.spec;
    let mut touched = 0u64;
    for y in range.y_min..range.y_max {
        let row = y * spec.xdim;
        for x in range.x_min..range.x_max {
            let center = spec.cell_center(x, y);
            let v = if literal {
                ci_literal(fov, center, params)
            } else {
                ci(fov, center, params)
            };
            touched += 1;
            if v > 0.0 {
                matrix.values[row + x] += v;
            }
        }
    }
    touched
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn spec(lat_span: f64, lon_span: f64, l: f64) -> GridSpec {
        GridSpec::new(Mbr::new(0.0, lat_span, 0.0, lon_span), l).unwrap()
    }

    #[test]
    fn dims_use_ceil() {
        let s = spec(0.00025, 0.00025, 0.0001);
        assert_eq!((s.xdim, s.ydim), (3, 3));
        let s = spec(0.0003, 0.0002, 0.0001);
        assert_eq!((s.xdim, s.ydim), (2, 3));
    }

    #[test]
    fn capacity_cap_enforced() {
        let err = GridSpec::with_cap(Mbr::new(0.0, 1.0, 0.0, 1.0), 0.0001, 1000).unwrap_err();
        match err {
            Error::Capacity { required, allowed } => {
                assert_eq!(allowed, 1000);
                assert_eq!(required, 10_000 * 10_000);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn cell_range_full_grid() {
        let s = spec(0.001, 0.001, 0.0001);
        let r = s.cell_range_for_mbr(&s.area);
        assert_eq!(r, s.full_range());
    }

    #[test]
    fn cell_range_point_at_min_corner() {
        let s = spec(0.001, 0.001, 0.0001);
        let r = s.cell_range_for_mbr(&Mbr::new(0.0, 0.0, 0.0, 0.0));
        assert_eq!(
            r,
            CellRange {
                x_min: 0,
                x_max: 1,
                y_min: 0,
                y_max: 1
            }
        );
    }

    #[test]
    fn cell_range_two_and_a_half_cells() {
        let s = spec(0.001, 0.001, 0.0001);
        let r = s.cell_range_for_mbr(&Mbr::new(0.0, 0.0, 0.0, 0.00025));
        assert_eq!(r.x_min, 0);
        assert_eq!(r.x_max, 3);
    }

    #[test]
    fn cell_range_disjoint_is_empty() {
        let s = spec(0.001, 0.001, 0.0001);
        let r = s.cell_range_for_mbr(&Mbr::new(0.002, 0.003, 0.0, 0.001));
        assert!(r.is_empty());
    }

    #[test]
    fn top_k_skips_zero_scores() {
        let s = spec(0.0002, 0.0002, 0.0001);
        let m = CiMatrix::new(s);
        assert!(m.top_k(5).is_empty());
    }

    #[test]
    fn top_k_tie_goes_to_smaller_row_major_index() {
        let s = spec(0.0002, 0.0002, 0.0001);
        let mut m = CiMatrix::new(s);
        m.set(1, 0, 2.0); // row-major index 1
        m.set(0, 1, 2.0); // row-major index 2
        let top = m.top_k(1);
        assert_eq!(top.len(), 1);
        assert_eq!((top[0].x, top[0].y), (1, 0));
    }

    #[test]
    fn top_k_descending() {
        let s = spec(0.0003, 0.0003, 0.0001);
        let mut m = CiMatrix::new(s);
        m.set(0, 0, 1.0);
        m.set(1, 1, 3.0);
        m.set(2, 2, 2.0);
        let top = m.top_k(2);
        let scores: Vec<f64> = top.iter().map(|c| c.score).collect();
        assert_eq!(scores, vec![3.0, 2.0]);
    }

    #[test]
    fn normalize_guard_and_idempotence() {
        let s = spec(0.0002, 0.0002, 0.0001);
        let zero = CiMatrix::new(s);
        assert_eq!(zero.normalized().values(), zero.values());

        let mut m = CiMatrix::new(s);
        m.set(0, 0, 4.0);
        m.set(1, 1, 1.0);
        let n = m.normalized();
        assert_eq!(n.get(0, 0), 1.0);
        assert_eq!(n.get(1, 1), 0.25);
        assert_eq!(n.normalized().values(), n.values());
    }

    fn random_fovs(rng: &mut impl Rng, n: usize, area: &Mbr) -> Vec<FoV> {
        (0..n)
            .map(|i| {
                FoV::new(
                    format!("v{i}"),
                    0,
                    GeoPoint::new(
                        rng.gen_range(area.lat_min..area.lat_max),
                        rng.gen_range(area.lon_min..area.lon_max),
                    ),
                    rng.gen_range(0.0..360.0),
                    rng.gen_range(10.0..500.0),
                    if rng.gen_bool(0.3) {
                        360.0
                    } else {
                        rng.gen_range(20.0..180.0)
                    },
                )
            })
            .collect()
    }

    #[test]
    fn filtered_equals_naive_bitwise() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let params = ModelParams::default();
        for _ in 0..5 {
            let s = spec(0.005, 0.005, 0.0001); // 50x50
            let fovs = random_fovs(&mut rng, 60, &s.area);
            let refs: Vec<&FoV> = fovs.iter().collect();
            let mut naive = CiMatrix::new(s);
            let mut filt = CiMatrix::new(s);
            let ns = accumulate_naive(&mut naive, &refs, &params);
            let fs = accumulate_filtered(&mut filt, &refs, &params);
            assert_eq!(naive.values(), filt.values());
            assert!(fs.cell_updates < ns.cell_updates);
        }
    }

    #[test]
    fn accumulation_additive() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let params = ModelParams::default();
        let s = spec(0.003, 0.003, 0.0001);
        let fovs = random_fovs(&mut rng, 40, &s.area);
        let refs: Vec<&FoV> = fovs.iter().collect();
        let (first, second) = refs.split_at(20);

        let mut both = CiMatrix::new(s);
        accumulate_filtered(&mut both, &refs, &params);
        let mut a = CiMatrix::new(s);
        accumulate_filtered(&mut a, first, &params);
        let mut b = CiMatrix::new(s);
        accumulate_filtered(&mut b, second, &params);

        for (i, v) in both.values().iter().enumerate() {
            let sum = a.values()[i] + b.values()[i];
            let tol = 1e-12 * v.abs().max(1e-300);
            assert!((v - sum).abs() <= tol.max(1e-18), "cell {i}: {v} vs {sum}");
        }
    }

    #[test]
    fn duplicated_fov_doubles_matrix() {
        let params = ModelParams::default();
        let s = spec(0.002, 0.002, 0.0001);
        let f = FoV::new(
            "v".into(),
            0,
            GeoPoint::new(0.001, 0.001),
            0.0,
            150.0,
            360.0,
        );
        let mut one = CiMatrix::new(s);
        accumulate_naive(&mut one, &[&f], &params);
        let mut two = CiMatrix::new(s);
        accumulate_naive(&mut two, &[&f, &f], &params);
        for (a, b) in one.values().iter().zip(two.values()) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn circular_fov_peak_at_camera_cell() {
        let params = ModelParams::default();
        let s = spec(0.002, 0.002, 0.0001);
        // Camera sits on the center of cell (10, 10).
        let center = s.cell_center(10, 10);
        let f = FoV::new("v".into(), 0, center, 0.0, 200.0, 360.0);
        let mut m = CiMatrix::new(s);
        accumulate_naive(&mut m, &[&f], &params);
        let top = m.top_k(1);
        assert_eq!((top[0].x, top[0].y), (10, 10));
    }

    #[test]
    fn fov_outside_area_is_skipped() {
        let params = ModelParams::default();
        let s = spec(0.001, 0.001, 0.0001);
        let f = FoV::new("v".into(), 0, GeoPoint::new(0.5, 0.5), 0.0, 100.0, 360.0);
        let mut m = CiMatrix::new(s);
        let stats = accumulate_filtered(&mut m, &[&f], &params);
        assert_eq!(stats.fovs_processed, 0);
        assert!(m.values().iter().all(|&v| v == 0.0));
    }
}
