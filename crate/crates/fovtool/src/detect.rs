//! The four top-k POI detectors: naive baseline, MBR-optimized baseline,
//! single sampling, and clustering + incremental sampling (C&IS).
//!
//! All detectors are deterministic functions of (store, query, parameters,
//! seed). Stochastic detectors draw every random number from one seeded
//! ChaCha stream in a fixed order.

use std::collections::HashMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geo::{geo_distance, FoV, GeoPoint, Mbr, M_LAT};
use crate::grid::{
    accumulate_filtered, accumulate_filtered_literal, accumulate_naive, top_k_from, AccumStats,
    CellRange, CellRef, CiMatrix, GridSpec,
};
use crate::metrics::sum_min_distances;
use crate::model::ModelParams;
use crate::store::{FovStore, TimeInterval};

/// A top-k detection request.
#[derive(Copy, Clone, Debug, Serialize)]
pub struct Query {
    pub area: Mbr,
    pub t: TimeInterval,
    pub k: usize,
    /// Cell side length, degrees.
    pub cell_len: f64,
    pub model: ModelParams,
}

impl Query {
    pub fn grid_spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.area, self.cell_len)
    }
}

/// Which stopping rule ends a cluster's incremental sampling.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
pub enum StopKind {
    /// Difference in maximum capture intention between iterations.
    MaxCiDiff,
    /// Σd_min between consecutive top-k result sets.
    TopKDistance,
}

#[derive(Copy, Clone, Debug, Serialize)]
pub struct StopCriterion {
    pub kind: StopKind,
    /// Capture-intention units for `MaxCiDiff`, meters for `TopKDistance`.
    pub threshold: f64,
}

impl Default for StopCriterion {
    fn default() -> Self {
        Self {
            kind: StopKind::MaxCiDiff,
            threshold: 0.1,
        }
    }
}

/// Parameters of the C&IS detector.
#[derive(Copy, Clone, Debug, Serialize)]
pub struct CisParams {
    /// Cluster count.
    pub clusters: usize,
    /// Fraction of the FoV population used for cluster identification.
    pub f_c: f64,
    /// Fraction of each cluster's population sampled per iteration.
    pub f_i: f64,
    pub stop: StopCriterion,
    /// Cluster bbox half-width = rms_radius × expand.
    pub expand: f64,
    pub seed: u64,
}

impl Default for CisParams {
    fn default() -> Self {
        Self {
            clusters: 6,
            f_c: 0.5,
            f_i: 0.05,
            stop: StopCriterion::default(),
            expand: 1.0,
            seed: 0,
        }
    }
}

impl CisParams {
    pub fn max_iterations(&self) -> usize {
        (1.0 / self.f_i).ceil() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.clusters == 0 {
            return Err(Error::invalid("cluster count must be at least 1"));
        }
        if !(self.f_c > 0.0 && self.f_c <= 1.0) {
            return Err(Error::invalid("f_c must be in (0, 1]"));
        }
        if !(self.f_i > 0.0 && self.f_i <= 1.0) {
            return Err(Error::invalid("f_i must be in (0, 1]"));
        }
        if self.stop.threshold.is_nan() || self.stop.threshold <= 0.0 {
            return Err(Error::invalid("stop threshold must be > 0"));
        }
        if self.expand.is_nan() || self.expand <= 0.0 {
            return Err(Error::invalid("expand must be > 0"));
        }
        Ok(())
    }
}

/// Detector selector with its parameters.
#[derive(Clone, Debug)]
pub enum Algo {
    Naive,
    Optimized,
    SingleSampling { fraction: f64, seed: u64 },
    Cis(CisParams),
}

impl Algo {
    /// Same configuration with the seed replaced; no-op for the
    /// deterministic detectors.
    pub fn reseeded(&self, seed: u64) -> Algo {
        match self {
            Algo::Naive => Algo::Naive,
            Algo::Optimized => Algo::Optimized,
            Algo::SingleSampling { fraction, .. } => Algo::SingleSampling {
                fraction: *fraction,
                seed,
            },
            Algo::Cis(p) => {
                let mut p = *p;
                p.seed = seed;
                Algo::Cis(p)
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Algo::Naive => "naive",
            Algo::Optimized => "optimized",
            Algo::SingleSampling { .. } => "sample",
            Algo::Cis(_) => "cis",
        }
    }

    pub fn params_label(&self) -> String {
        match self {
            Algo::Naive | Algo::Optimized => String::new(),
            Algo::SingleSampling { fraction, .. } => format!("fraction={fraction}"),
            Algo::Cis(p) => format!(
                "c={} fc={} fi={} stop={:?} threshold={}",
                p.clusters, p.f_c, p.f_i, p.stop.kind, p.stop.threshold
            ),
        }
    }
}

/// Why a cluster's incremental sampling ended.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
pub enum StopReason {
    /// The configured stopping criterion fired.
    Criterion,
    /// The ceil(1/f_i) iteration cap was reached.
    MaxIterations,
    /// The cluster's FoV population was exhausted.
    Exhausted,
}

/// Per-cluster accounting in a C&IS run.
#[derive(Clone, Debug, Serialize)]
pub struct ClusterReport {
    pub center: GeoPoint,
    pub members: usize,
    pub rms_radius_m: f64,
    pub population: usize,
    pub iterations: usize,
    pub stop_reason: StopReason,
}

/// Timings and counters for one detection.
#[derive(Clone, Debug, Default, Serialize)]
pub struct DetectionReport {
    pub wall_ms: f64,
    pub range_query_ms: f64,
    pub fovs_in_range: usize,
    pub fovs_processed: u64,
    pub cell_updates: u64,
    /// C&IS only: one entry per processed cluster.
    pub clusters: Vec<ClusterReport>,
    /// C&IS only: clusters skipped for empty population or empty bbox.
    pub clusters_skipped: usize,
    /// C&IS only: the effective cluster count after any reduction.
    pub effective_clusters: usize,
}

/// Ranked cells plus the run report.
#[derive(Clone, Debug, Serialize)]
pub struct TopKResult {
    pub cells: Vec<CellRef>,
    pub report: DetectionReport,
}

/// Runs the selected detector. When `want_matrix` is set, the full
/// capture-intention matrix is also returned (for heatmap export); for
/// C&IS it holds the max-merged scaled cluster scores.
pub fn detect(
    store: &FovStore,
    query: &Query,
    algo: &Algo,
    want_matrix: bool,
) -> Result<(TopKResult, Option<CiMatrix>)> {
    match algo {
        Algo::Naive => baseline(store, query, BaselineMode::Naive, want_matrix),
        Algo::Optimized => baseline(store, query, BaselineMode::Filtered, want_matrix),
        Algo::SingleSampling { fraction, seed } => {
            single_sampling(store, query, *fraction, *seed, want_matrix)
        }
        Algo::Cis(params) => cis(store, query, params, want_matrix),
    }
}

/// Naive baseline: every FoV against every grid cell.
pub fn detect_naive(store: &FovStore, query: &Query) -> Result<TopKResult> {
    Ok(detect(store, query, &Algo::Naive, false)?.0)
}

/// Optimized baseline: MBR cell filtering plus the 360° shortcut.
pub fn detect_optimized(store: &FovStore, query: &Query) -> Result<TopKResult> {
    Ok(detect(store, query, &Algo::Optimized, false)?.0)
}

/// Single sampling: one uniform sample without repetitions, then the
/// optimized accumulation on the sample.
pub fn detect_single_sampling(
    store: &FovStore,
    query: &Query,
    fraction: f64,
    seed: u64,
) -> Result<TopKResult> {
    Ok(detect(store, query, &Algo::SingleSampling { fraction, seed }, false)?.0)
}

/// Clustering + incremental sampling.
pub fn detect_cis(store: &FovStore, query: &Query, params: &CisParams) -> Result<TopKResult> {
    Ok(detect(store, query, &Algo::Cis(*params), false)?.0)
}

#[derive(Copy, Clone, PartialEq, Eq)]
enum BaselineMode {
    Naive,
    Filtered,
    /// Filtered, but the angular factor is evaluated even for circular
    /// FoVs; only used to measure the shortcut.
    FilteredLiteral,
}

fn baseline(
    store: &FovStore,
    query: &Query,
    mode: BaselineMode,
    want_matrix: bool,
) -> Result<(TopKResult, Option<CiMatrix>)> {
    let start = Instant::now();
    let spec = query.grid_spec()?;

    let q0 = Instant::now();
    let fovs = store.get_fovs_in_range(&query.area, &query.t);
    let range_query_ms = q0.elapsed().as_secs_f64() * 1e3;

    let mut matrix = CiMatrix::new(spec);
    let stats = match mode {
        BaselineMode::Naive => accumulate_naive(&mut matrix, &fovs, &query.model),
        BaselineMode::Filtered => accumulate_filtered(&mut matrix, &fovs, &query.model),
        BaselineMode::FilteredLiteral => {
            accumulate_filtered_literal(&mut matrix, &fovs, &query.model)
        }
    };
    let cells = matrix.top_k(query.k);

    let result = TopKResult {
        cells,
        report: DetectionReport {
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            range_query_ms,
            fovs_in_range: fovs.len(),
            fovs_processed: stats.fovs_processed,
            cell_updates: stats.cell_updates,
            ..Default::default()
        },
    };
    Ok((result, want_matrix.then_some(matrix)))
}

/// Filtered baseline with literal (no-shortcut) angular evaluation.
/// Exposed for measuring the 360° shortcut; results are identical.
pub fn detect_optimized_literal(store: &FovStore, query: &Query) -> Result<TopKResult> {
    Ok(baseline(store, query, BaselineMode::FilteredLiteral, false)?.0)
}

/// Draws `m` elements uniformly without replacement, removing them from
/// `pool`. Partial Fisher-Yates; order of the remainder is perturbed but
/// deterministic.
fn draw_without_replacement<T: Copy>(rng: &mut ChaCha8Rng, pool: &mut Vec<T>, m: usize) -> Vec<T> {
    let m = m.min(pool.len());
    for j in 0..m {
        let pick = rng.gen_range(j..pool.len());
        pool.swap(j, pick);
    }
    pool.drain(..m).collect()
}

fn sample_size(fraction: f64, population: usize) -> usize {
    ((fraction * population as f64).round() as usize).clamp(1, population)
}

fn single_sampling(
    store: &FovStore,
    query: &Query,
    fraction: f64,
    seed: u64,
    want_matrix: bool,
) -> Result<(TopKResult, Option<CiMatrix>)> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid("sampling fraction must be in (0, 1]"));
    }
    let start = Instant::now();
    let spec = query.grid_spec()?;

    let q0 = Instant::now();
    let fovs = store.get_fovs_in_range(&query.area, &query.t);
    let range_query_ms = q0.elapsed().as_secs_f64() * 1e3;

    let mut matrix = CiMatrix::new(spec);
    let mut stats = AccumStats::default();
    if !fovs.is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pool: Vec<usize> = (0..fovs.len()).collect();
        let mut picked = draw_without_replacement(&mut rng, &mut pool, sample_size(fraction, fovs.len()));
        // Storage order keeps accumulation deterministic and makes
        // fraction = 1 bit-identical to the optimized baseline.
        picked.sort_unstable();
        let sample: Vec<&FoV> = picked.into_iter().map(|i| fovs[i]).collect();
        stats = accumulate_filtered(&mut matrix, &sample, &query.model);
    }
    let cells = matrix.top_k(query.k);

    let result = TopKResult {
        cells,
        report: DetectionReport {
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            range_query_ms,
            fovs_in_range: fovs.len(),
            fovs_processed: stats.fovs_processed,
            cell_updates: stats.cell_updates,
            ..Default::default()
        },
    };
    Ok((result, want_matrix.then_some(matrix)))
}

/// A k-means cluster over camera locations.
#[derive(Clone, Debug, Serialize)]
pub struct Cluster {
    pub center: GeoPoint,
    /// Indices into the clustered point set.
    pub members: Vec<usize>,
    pub rms_radius_m: f64,
    pub bbox: Option<Mbr>,
}

/// Lloyd's k-means with k-means++ initialization on equirectangular-
/// projected points. Stops when no centroid moves more than 0.1 m or
/// after 100 rounds; empty clusters are re-seeded from the point farthest
/// from its assigned centroid. `c` is reduced to the point count when it
/// exceeds it.
pub fn kmeans(points: &[GeoPoint], c: usize, rng: &mut ChaCha8Rng) -> (Vec<GeoPoint>, Vec<usize>) {
    assert!(!points.is_empty() && c >= 1);
    let c = c.min(points.len());

    // Project once; the reference latitude is the mean of the inputs.
    let ref_lat: f64 = points.iter().map(|p| p.lat).sum::<f64>() / points.len() as f64;
    let lon_scale = M_LAT * ref_lat.to_radians().cos();
    let proj: Vec<[f64; 2]> = points
        .iter()
        .map(|p| [p.lon * lon_scale, p.lat * M_LAT])
        .collect();

    let d2 = |a: [f64; 2], b: [f64; 2]| {
        let dx = a[0] - b[0];
        let dy = a[1] - b[1];
        dx * dx + dy * dy
    };

    // k-means++ seeding.
    let mut centers: Vec<[f64; 2]> = Vec::with_capacity(c);
    centers.push(proj[rng.gen_range(0..proj.len())]);
    let mut dist: Vec<f64> = proj.iter().map(|&p| d2(p, centers[0])).collect();
    while centers.len() < c {
        let total: f64 = dist.iter().sum();
        let next = if total <= 0.0 {
            // All remaining points coincide with a center; any index works.
            rng.gen_range(0..proj.len())
        } else {
            let mut u = rng.gen::<f64>() * total;
            let mut pick = proj.len() - 1;
            for (i, &w) in dist.iter().enumerate() {
                if u < w {
                    pick = i;
                    break;
                }
                u -= w;
            }
            pick
        };
        centers.push(proj[next]);
        for (i, &p) in proj.iter().enumerate() {
            dist[i] = dist[i].min(d2(p, centers[centers.len() - 1]));
        }
    }

    let mut assignment = vec![0usize; proj.len()];
    for _round in 0..100 {
        // Assign.
        for (i, &p) in proj.iter().enumerate() {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (ci, &ctr) in centers.iter().enumerate() {
                let d = d2(p, ctr);
                if d < best_d {
                    best_d = d;
                    best = ci;
                }
            }
            assignment[i] = best;
        }

        // Re-seed any empty cluster from the globally farthest point.
        loop {
            let mut counts = vec![0usize; centers.len()];
            for &a in &assignment {
                counts[a] += 1;
            }
            let Some(empty) = counts.iter().position(|&n| n == 0) else {
                break;
            };
            let far = (0..proj.len())
                .max_by(|&a, &b| {
                    d2(proj[a], centers[assignment[a]])
                        .total_cmp(&d2(proj[b], centers[assignment[b]]))
                        .then(b.cmp(&a)) // lowest index wins ties
                })
                .unwrap();
            centers[empty] = proj[far];
            assignment[far] = empty;
        }

        // Update.
        let mut sums = vec![[0.0f64; 2]; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for (i, &a) in assignment.iter().enumerate() {
            sums[a][0] += proj[i][0];
            sums[a][1] += proj[i][1];
            counts[a] += 1;
        }
        let mut moved = 0.0f64;
        for (ci, ctr) in centers.iter_mut().enumerate() {
            if counts[ci] == 0 {
                continue;
            }
            let new = [sums[ci][0] / counts[ci] as f64, sums[ci][1] / counts[ci] as f64];
            moved = moved.max(d2(*ctr, new).sqrt());
            *ctr = new;
        }
        if moved < 0.1 {
            break;
        }
    }

    let centers_geo: Vec<GeoPoint> = centers
        .iter()
        .map(|c| GeoPoint::new(c[1] / M_LAT, c[0] / lon_scale))
        .collect();
    (centers_geo, assignment)
}

/// Root-mean-square distance of the member camera locations to `center`.
pub fn rms_radius(center: GeoPoint, members: &[GeoPoint]) -> f64 {
    if members.is_empty() {
        return 0.0;
    }
    let sum_sq: f64 = members
        .iter()
        .map(|&p| {
            let d = geo_distance(p, center);
            d * d
        })
        .sum();
    (sum_sq / members.len() as f64).sqrt()
}

/// Square box of half-width `half_m` meters around `center`, intersected
/// with `area`.
fn bounding_rect(center: GeoPoint, half_m: f64, area: &Mbr) -> Option<Mbr> {
    let dlat = half_m / M_LAT;
    let dlon = half_m / (M_LAT * center.lat.to_radians().cos());
    let raw = Mbr::new(
        center.lat - dlat,
        center.lat + dlat,
        center.lon - dlon,
        center.lon + dlon,
    );
    raw.intersection(area)
}

/// State the stopping criteria compare between consecutive iterations.
#[derive(Clone, Debug)]
pub struct IterState {
    pub max_ci: f64,
    pub top_k: Vec<CellRef>,
}

/// Evaluates the stopping criterion. Without a previous iteration the
/// answer is always `false`.
pub fn stop_satisfied(
    criterion: &StopCriterion,
    prev: Option<&IterState>,
    cur: &IterState,
) -> bool {
    let Some(prev) = prev else {
        return false;
    };
    match criterion.kind {
        StopKind::MaxCiDiff => (cur.max_ci - prev.max_ci).abs() < criterion.threshold,
        StopKind::TopKDistance => {
            sum_min_distances(&prev.top_k, &cur.top_k).sum_min_distance < criterion.threshold
        }
    }
}

fn cis(
    store: &FovStore,
    query: &Query,
    params: &CisParams,
    want_matrix: bool,
) -> Result<(TopKResult, Option<CiMatrix>)> {
    params.validate()?;
    let start = Instant::now();
    let spec = query.grid_spec()?;

    let q0 = Instant::now();
    let fovs = store.get_fovs_in_range(&query.area, &query.t);
    let range_query_ms = q0.elapsed().as_secs_f64() * 1e3;

    let mut report = DetectionReport {
        range_query_ms,
        fovs_in_range: fovs.len(),
        ..Default::default()
    };

    if fovs.is_empty() {
        report.wall_ms = start.elapsed().as_secs_f64() * 1e3;
        let matrix = want_matrix.then(|| CiMatrix::new(spec));
        return Ok((TopKResult { cells: vec![], report }, matrix));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    // Cluster identification on an f_c sample of the camera locations.
    let mut pool: Vec<usize> = (0..fovs.len()).collect();
    let cluster_sample =
        draw_without_replacement(&mut rng, &mut pool, sample_size(params.f_c, fovs.len()));
    let points: Vec<GeoPoint> = cluster_sample.iter().map(|&i| fovs[i].p).collect();
    let (centers, assignment) = kmeans(&points, params.clusters, &mut rng);
    report.effective_clusters = centers.len();

    let max_iter = params.max_iterations();
    // Best scaled score seen per cell, max-merged across clusters.
    let mut global: HashMap<usize, f64> = HashMap::new();

    for (cluster_idx, &center) in centers.iter().enumerate() {
        let member_points: Vec<GeoPoint> = assignment
            .iter()
            .zip(&points)
            .filter(|(&a, _)| a == cluster_idx)
            .map(|(_, &p)| p)
            .collect();
        if member_points.is_empty() {
            report.clusters_skipped += 1;
            continue;
        }
        let radius = rms_radius(center, &member_points);
        let Some(bbox) = bounding_rect(center, radius * params.expand, &query.area) else {
            report.clusters_skipped += 1;
            continue;
        };
        let window = spec.cell_range_for_mbr(&bbox);
        if window.is_empty() {
            report.clusters_skipped += 1;
            continue;
        }

        // Cluster population: FoVs (of all in range) whose MBR overlaps
        // the cluster box.
        let population: Vec<usize> = (0..fovs.len())
            .filter(|&i| fovs[i].mbr.intersects(&bbox))
            .collect();
        if population.is_empty() {
            report.clusters_skipped += 1;
            continue;
        }

        let n0 = population.len();
        let per_iter = sample_size(params.f_i, n0);
        let mut remaining = population;
        let mut values = vec![0.0f64; window.cell_count()];
        let mut iter = 0usize;
        let mut prev: Option<IterState> = None;
        let stop_reason;

        loop {
            let mut drawn = draw_without_replacement(&mut rng, &mut remaining, per_iter);
            drawn.sort_unstable();
            for &fi in &drawn {
                let fov = fovs[fi];
                let fov_range = spec.cell_range_for_mbr(&fov.mbr).intersect(&window);
                if fov_range.is_empty() {
                    continue;
                }
                // Accumulate the FoV over the intersection, writing into
                // the window-local dense buffer.
                report.cell_updates +=
                    accumulate_window_local(&mut values, &spec, &window, &fov_range, fov, &query.model);
                report.fovs_processed += 1;
            }
            iter += 1;

            let cur = window_state(&values, &spec, &window, query.k);
            if stop_satisfied(&params.stop, prev.as_ref(), &cur) {
                stop_reason = StopReason::Criterion;
                break;
            }
            if iter >= max_iter {
                stop_reason = StopReason::MaxIterations;
                break;
            }
            if remaining.is_empty() {
                stop_reason = StopReason::Exhausted;
                break;
            }
            prev = Some(cur);
        }

        // Scale by the sampled population fraction so cluster scores are
        // comparable, then max-merge into the global cell scores.
        let p = (iter as f64 * params.f_i).min(1.0);
        let width = window.width();
        for (local, &v) in values.iter().enumerate() {
            if v <= 0.0 {
                continue;
            }
            let x = window.x_min + local % width;
            let y = window.y_min + local / width;
            let scaled = v / p;
            let slot = global.entry(spec.row_major(x, y)).or_insert(0.0);
            if scaled > *slot {
                *slot = scaled;
            }
        }

        report.clusters.push(ClusterReport {
            center,
            members: member_points.len(),
            rms_radius_m: radius,
            population: n0,
            iterations: iter,
            stop_reason,
        });
    }

    let mut entries: Vec<(usize, f64)> = global.iter().map(|(&i, &v)| (i, v)).collect();
    entries.sort_unstable_by_key(|&(i, _)| i);
    let cells = top_k_from(entries.iter().copied(), &spec, query.k);

    let matrix = want_matrix.then(|| {
        let mut m = CiMatrix::new(spec);
        for &(i, v) in &entries {
            m.set(i % spec.xdim, i / spec.xdim, v);
        }
        m
    });

    report.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok((TopKResult { cells, report }, matrix))
}

/// Accumulates one FoV over `fov_range` into the dense buffer that covers
/// `window` (row-major, window-local coordinates).
fn accumulate_window_local(
    values: &mut [f64],
    spec: &GridSpec,
    window: &CellRange,
    fov_range: &CellRange,
    fov: &FoV,
    params: &ModelParams,
) -> u64 {
    let width = window.width();
    let mut touched = 0u64;
    for y in fov_range.y_min..fov_range.y_max {
        let row = (y - window.y_min) * width;
        for x in fov_range.x_min..fov_range.x_max {
            let v = crate::model::ci(fov, spec.cell_center(x, y), params);
            touched += 1;
            if v > 0.0 {
                values[row + (x - window.x_min)] += v;
            }
        }
    }
    touched
}

fn window_state(values: &[f64], spec: &GridSpec, window: &CellRange, k: usize) -> IterState {
    let width = window.width();
    let max_ci = values.iter().copied().fold(0.0, f64::max);
    let entries = values.iter().enumerate().map(|(local, &v)| {
        let x = window.x_min + local % width;
        let y = window.y_min + local / width;
        (spec.row_major(x, y), v)
    });
    // Entries arrive window-row-major, not grid-row-major, but the
    // selection's tie rule orders by the grid index it is given.
    let top_k = top_k_from(entries, spec, k);
    IterState { max_ci, top_k }
}
