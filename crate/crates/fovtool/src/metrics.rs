//! Result-difference and accuracy metrics, plus the benchmark runner.
//!
//! Both the Σd_min difference metric and the correctness metric rest on
//! the same greedy closest-pair-first matching, so they cannot diverge.

use std::time::Instant;

use serde::Serialize;

use crate::detect::{detect, Algo, Query};
use crate::error::{Error, Result};
use crate::geo::geo_distance;
use crate::grid::CellRef;
use crate::store::FovStore;

/// One matched cross pair from the greedy matching.
#[derive(Clone, Debug, Serialize)]
pub struct MatchedPair {
    pub a: CellRef,
    pub b: CellRef,
    pub distance_m: f64,
}

/// Greedy closest-pair-first matching between two top-k cell sets.
#[derive(Clone, Debug, Serialize)]
pub struct MatchReport {
    pub pairs: Vec<MatchedPair>,
    pub sum_min_distance: f64,
}

/// Matches cells one-to-one, globally closest pair first, each cell used
/// at most once; the sum runs over `min(|a|, |b|)` pairs. Ties in pair
/// distance break on the (y, x) order of the a-cell, then the b-cell.
pub fn sum_min_distances(a: &[CellRef], b: &[CellRef]) -> MatchReport {
    let mut cross: Vec<(usize, usize, f64)> = Vec::with_capacity(a.len() * b.len());
    for (i, ca) in a.iter().enumerate() {
        for (j, cb) in b.iter().enumerate() {
            cross.push((i, j, geo_distance(ca.center, cb.center)));
        }
    }
    cross.sort_by(|p, q| {
        p.2.total_cmp(&q.2)
            .then_with(|| (a[p.0].y, a[p.0].x).cmp(&(a[q.0].y, a[q.0].x)))
            .then_with(|| (b[p.1].y, b[p.1].x).cmp(&(b[q.1].y, b[q.1].x)))
    });

    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut pairs = Vec::with_capacity(a.len().min(b.len()));
    let mut sum = 0.0;
    for (i, j, d) in cross {
        if used_a[i] || used_b[j] {
            continue;
        }
        used_a[i] = true;
        used_b[j] = true;
        sum += d;
        pairs.push(MatchedPair {
            a: a[i].clone(),
            b: b[j].clone(),
            distance_m: d,
        });
    }
    MatchReport {
        pairs,
        sum_min_distance: sum,
    }
}

/// Fraction of reference cells matched within `tol_m` meters by the
/// greedy matching.
pub fn correct_fraction(detected: &[CellRef], reference: &[CellRef], tol_m: f64) -> f64 {
    if reference.is_empty() {
        return 0.0;
    }
    let report = sum_min_distances(detected, reference);
    let hits = report
        .pairs
        .iter()
        .filter(|p| p.distance_m <= tol_m)
        .count();
    hits as f64 / reference.len() as f64
}

/// One detector configuration in a benchmark suite.
#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub name: String,
    pub algo: Algo,
}

/// One benchmark run, matching the CSV output schema.
#[derive(Clone, Debug, Serialize)]
pub struct BenchRow {
    pub detector: String,
    pub params: String,
    pub run: usize,
    pub seed: u64,
    pub wall_ms: f64,
    pub fovs_processed: u64,
    pub cell_updates: u64,
    pub sum_min_dist_m: f64,
    pub correct_frac: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchTable {
    pub reference: String,
    pub rows: Vec<BenchRow>,
}

impl BenchTable {
    pub const CSV_HEADER: &'static str =
        "detector,params,run,seed,wall_ms,fovs_processed,cell_updates,sum_min_dist_m,correct_frac";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{:.3},{},{},{:.6},{:.4}\n",
                r.detector,
                r.params,
                r.run,
                r.seed,
                r.wall_ms,
                r.fovs_processed,
                r.cell_updates,
                r.sum_min_dist_m,
                r.correct_frac
            ));
        }
        out
    }
}

/// Runs every suite config `repeats` times against the reference
/// detector's result. Stochastic detectors get seeds `seed..seed+repeats`;
/// the reference runs once, first, and its failure aborts the suite. Wall
/// time covers the detector call, range query included, dataset load
/// excluded.
pub fn run_benchmark(
    store: &FovStore,
    query: &Query,
    reference: &BenchConfig,
    suite: &[BenchConfig],
    repeats: usize,
    seed: u64,
    correct_tol_m: f64,
) -> Result<BenchTable> {
    if repeats == 0 {
        return Err(Error::invalid("repeats must be at least 1"));
    }
    let (ref_result, _) = detect(store, query, &reference.algo, false).map_err(|e| {
        Error::invalid(format!("reference detector `{}` failed: {e}", reference.name))
    })?;
    let ref_cells = ref_result.cells;

    let mut rows = Vec::new();
    for cfg in suite {
        for run in 0..repeats {
            let run_seed = seed + run as u64;
            let algo = cfg.algo.reseeded(run_seed);
            let start = Instant::now();
            let (result, _) = detect(store, query, &algo, false)?;
            let wall_ms = start.elapsed().as_secs_f64() * 1e3;
            let diff = sum_min_distances(&result.cells, &ref_cells);
            rows.push(BenchRow {
                detector: cfg.name.clone(),
                params: algo.params_label(),
                run,
                seed: run_seed,
                wall_ms,
                fovs_processed: result.report.fovs_processed,
                cell_updates: result.report.cell_updates,
                sum_min_dist_m: diff.sum_min_distance,
                correct_frac: correct_fraction(&result.cells, &ref_cells, correct_tol_m),
            });
        }
    }
    Ok(BenchTable {
        reference: reference.name.clone(),
        rows,
    })
}
