//! Synthetic FoV dataset generation.
//!
//! Videos are placed around weighted hotspots (plus a uniform background
//! share), aimed roughly at their hotspot, with Gamma-distributed visible
//! distances capped at `r_cap` and a configurable visible-angle mix.
//! Output is fully determined by (profile, area, n_videos, seed).

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};

use crate::error::{Error, Result};
use crate::geo::{bearing, FoV, GeoPoint, Mbr};
use crate::store::DATASET_HEADER;

/// A point of interest the generator aims cameras at.
#[derive(Copy, Clone, Debug)]
pub struct Hotspot {
    pub center: GeoPoint,
    /// Relative draw weight; need not be normalized.
    pub weight: f64,
}

/// Generation parameters. The visible-angle mix maps angle (degrees) to
/// relative weight.
#[derive(Clone, Debug)]
pub struct DatasetProfile {
    pub hotspots: Vec<Hotspot>,
    /// Std-dev of camera placement around a hotspot, meters.
    pub placement_sigma_m: f64,
    /// Std-dev of aiming noise on the azimuth, degrees.
    pub aim_noise_deg: f64,
    /// Gamma shape for the visible distance (drawn in km).
    pub r_shape: f64,
    /// Gamma scale for the visible distance, km.
    pub r_scale_km: f64,
    /// Hard cap on the visible distance, meters; draws above it are
    /// rejected and redrawn.
    pub r_cap_m: f64,
    /// (alpha, weight) pairs of the visible-angle mix.
    pub alpha_mix: Vec<(f64, f64)>,
    /// Share of videos placed and aimed uniformly at random.
    pub background_fraction: f64,
    /// FoVs per video (one per frame, a second apart).
    pub frames_per_video: usize,
}

impl Default for DatasetProfile {
    fn default() -> Self {
        Self {
            hotspots: Vec::new(),
            placement_sigma_m: 150.0,
            aim_noise_deg: 10.0,
            r_shape: 1.6,
            r_scale_km: 0.4,
            r_cap_m: 2_000.0,
            alpha_mix: vec![(60.0, 1.0)],
            background_fraction: 0.1,
            frames_per_video: 1,
        }
    }
}

/// The three visible-angle mixes used in the benchmark datasets.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum DatasetVariant {
    /// Every FoV has a 60° angle.
    Directional60,
    /// 30% at 160°, the rest circular.
    Wide160Minor,
    /// 70% at 160°, the rest circular.
    Wide160Major,
}

impl DatasetVariant {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "100pct60" => Ok(Self::Directional60),
            "30pct160" => Ok(Self::Wide160Minor),
            "70pct160" => Ok(Self::Wide160Major),
            other => Err(Error::invalid(format!(
                "unknown dataset variant `{other}` (expected 100pct60, 30pct160 or 70pct160)"
            ))),
        }
    }

    pub fn alpha_mix(&self) -> Vec<(f64, f64)> {
        match self {
            Self::Directional60 => vec![(60.0, 1.0)],
            Self::Wide160Minor => vec![(160.0, 0.3), (360.0, 0.7)],
            Self::Wide160Major => vec![(160.0, 0.7), (360.0, 0.3)],
        }
    }
}

/// Default profile for one of the standard variants: hotspots laid out on
/// a jittered grid inside `area` with strictly decreasing weights.
pub fn standard_profile(variant: DatasetVariant, area: &Mbr, hotspots: usize) -> DatasetProfile {
    DatasetProfile {
        hotspots: default_hotspots(area, hotspots),
        alpha_mix: variant.alpha_mix(),
        ..Default::default()
    }
}

/// Deterministic hotspot layout: points of a golden-ratio sequence inside
/// the central 80% of the area, with weights decaying geometrically so
/// the top-k ranking is unambiguous.
pub fn default_hotspots(area: &Mbr, n: usize) -> Vec<Hotspot> {
    let lat_span = area.lat_max - area.lat_min;
    let lon_span = area.lon_max - area.lon_min;
    (0..n)
        .map(|i| {
            let u = ((i as f64 + 1.0) * 0.618_033_988_749_895).fract();
            let v = ((i as f64 + 1.0) * 0.754_877_666_246_693).fract();
            Hotspot {
                center: GeoPoint::new(
                    area.lat_min + lat_span * (0.1 + 0.8 * u),
                    area.lon_min + lon_span * (0.1 + 0.8 * v),
                ),
                weight: 100.0 * 0.7f64.powi(i as i32),
            }
        })
        .collect()
}

fn weighted_pick(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

/// Generates `n_videos` videos inside `area`. Output order is by video,
/// then by frame.
pub fn generate(
    profile: &DatasetProfile,
    area: &Mbr,
    n_videos: usize,
    seed: u64,
) -> Result<Vec<FoV>> {
    if !area.is_valid() {
        return Err(Error::invalid("invalid generation area"));
    }
    if profile.frames_per_video == 0 {
        return Err(Error::invalid("frames_per_video must be at least 1"));
    }
    if !(0.0..=1.0).contains(&profile.background_fraction) {
        return Err(Error::invalid("background_fraction must be in [0, 1]"));
    }
    if profile.hotspots.is_empty() && profile.background_fraction < 1.0 {
        return Err(Error::invalid(
            "a profile without hotspots needs background_fraction = 1",
        ));
    }
    if profile.alpha_mix.is_empty() {
        return Err(Error::invalid("alpha mix must not be empty"));
    }
    for &(alpha, w) in &profile.alpha_mix {
        if !(alpha > 0.0 && alpha <= 360.0) {
            return Err(Error::invalid("alpha values must be in (0, 360]"));
        }
        if w.is_nan() || w <= 0.0 {
            return Err(Error::invalid("alpha mix weights must be positive"));
        }
    }
    let mix_sum: f64 = profile.alpha_mix.iter().map(|&(_, w)| w).sum();
    if (mix_sum - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "alpha mix fractions must sum to 1 (got {mix_sum})"
        )));
    }
    if let Some(h) = profile.hotspots.iter().find(|h| !area.contains(h.center)) {
        return Err(Error::invalid(format!(
            "hotspot at ({}, {}) lies outside the generation area",
            h.center.lat, h.center.lon
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gamma = Gamma::new(profile.r_shape, profile.r_scale_km)
        .map_err(|e| Error::invalid(format!("invalid gamma parameters: {e}")))?;
    let placement = Normal::new(0.0, profile.placement_sigma_m)
        .map_err(|e| Error::invalid(format!("invalid placement sigma: {e}")))?;
    let aim = Normal::new(0.0, profile.aim_noise_deg)
        .map_err(|e| Error::invalid(format!("invalid aim noise: {e}")))?;

    let hotspot_weights: Vec<f64> = profile.hotspots.iter().map(|h| h.weight).collect();
    let alpha_weights: Vec<f64> = profile.alpha_mix.iter().map(|&(_, w)| w).collect();

    let mut out = Vec::with_capacity(n_videos * profile.frames_per_video);
    for v in 0..n_videos {
        let background = rng.gen::<f64>() < profile.background_fraction;

        // Camera location: Gaussian around the hotspot (redrawn until it
        // lands inside the area) or uniform for background videos.
        let (p, theta0) = if background {
            let p = GeoPoint::new(
                rng.gen_range(area.lat_min..=area.lat_max),
                rng.gen_range(area.lon_min..=area.lon_max),
            );
            (p, rng.gen_range(0.0..360.0))
        } else {
            let spot = profile.hotspots[weighted_pick(&mut rng, &hotspot_weights)];
            let mid_cos = spot.center.lat.to_radians().cos();
            let p = loop {
                let dy = placement.sample(&mut rng);
                let dx = placement.sample(&mut rng);
                let cand = GeoPoint::new(
                    spot.center.lat + dy / crate::geo::M_LAT,
                    spot.center.lon + dx / (crate::geo::M_LAT * mid_cos),
                );
                if area.contains(cand) {
                    break cand;
                }
            };
            let theta = (bearing(p, spot.center) + aim.sample(&mut rng)).rem_euclid(360.0);
            (p, theta)
        };

        // Visible distance: Gamma in km, redrawn until under the cap.
        let r_m = loop {
            let km = gamma.sample(&mut rng);
            let m = km * 1_000.0;
            if m < profile.r_cap_m && m > 0.0 {
                break m;
            }
        };

        let alpha = profile.alpha_mix[weighted_pick(&mut rng, &alpha_weights)].0;

        let base_t = 1_400_000_000 + v as i64 * 60;
        for frame in 0..profile.frames_per_video {
            out.push(FoV::new(
                format!("v{v:06}"),
                base_t + frame as i64,
                p,
                theta0,
                r_m,
                alpha,
            ));
        }
    }
    Ok(out)
}

/// A fully-specified generation job: profile plus area, size and seed.
#[derive(Clone, Debug)]
pub struct GenSpec {
    pub profile: DatasetProfile,
    pub area: Mbr,
    pub n_videos: usize,
    pub seed: u64,
}

/// Parses the plain-text `key = value` profile format.
///
/// Blank lines and lines starting with `#` are skipped. Keys:
///
/// ```text
/// area                = latmin,lonmin,latmax,lonmax   (required)
/// n_videos            = 10000                          (required)
/// seed                = 42                             (default 0)
/// frames_per_video    = 1
/// hotspots            = lat,lon,weight; lat,lon,weight; ...
/// hotspots_auto       = 8          (deterministic layout, decaying weights)
/// alpha_mix           = 160:0.3, 360:0.7
/// variant             = 100pct60 | 30pct160 | 70pct160 (shorthand for alpha_mix)
/// gamma_shape         = 1.6
/// gamma_scale_km      = 0.4
/// r_cap_m             = 2000
/// aim_noise_deg       = 10
/// placement_sigma_m   = 150
/// background_fraction = 0.1
/// ```
pub fn parse_profile(text: &str) -> Result<GenSpec> {
    let mut area: Option<Mbr> = None;
    let mut n_videos: Option<usize> = None;
    let mut seed = 0u64;
    let mut profile = DatasetProfile::default();
    let mut hotspots_auto: Option<usize> = None;

    let bad = |line: usize, msg: String| Error::invalid(format!("profile line {line}: {msg}"));
    let num = |line: usize, key: &str, v: &str| -> Result<f64> {
        v.trim()
            .parse::<f64>()
            .map_err(|_| bad(line, format!("{key} expects a number, got `{v}`")))
    };

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((key, value)) = trimmed.split_once('=') else {
            return Err(bad(line, format!("expected `key = value`, got `{trimmed}`")));
        };
        let key = key.trim();
        let value = value.trim();
        match key {
            "area" => {
                let parts: Vec<&str> = value.split(',').collect();
                if parts.len() != 4 {
                    return Err(bad(line, "area expects latmin,lonmin,latmax,lonmax".into()));
                }
                let lat_min = num(line, "area", parts[0])?;
                let lon_min = num(line, "area", parts[1])?;
                let lat_max = num(line, "area", parts[2])?;
                let lon_max = num(line, "area", parts[3])?;
                let m = Mbr::new(lat_min, lat_max, lon_min, lon_max);
                if !m.is_valid() {
                    return Err(bad(line, "area has min > max or non-finite bounds".into()));
                }
                area = Some(m);
            }
            "n_videos" => {
                n_videos = Some(
                    value
                        .parse()
                        .map_err(|_| bad(line, format!("n_videos expects a count, got `{value}`")))?,
                );
            }
            "seed" => {
                seed = value
                    .parse()
                    .map_err(|_| bad(line, format!("seed expects an integer, got `{value}`")))?;
            }
            "frames_per_video" => {
                profile.frames_per_video = value
                    .parse()
                    .map_err(|_| bad(line, format!("frames_per_video expects a count, got `{value}`")))?;
            }
            "hotspots" => {
                let mut spots = Vec::new();
                for item in value.split(';') {
                    let parts: Vec<&str> = item.split(',').collect();
                    if parts.len() != 3 {
                        return Err(bad(line, "each hotspot is lat,lon,weight".into()));
                    }
                    spots.push(Hotspot {
                        center: GeoPoint::new(
                            num(line, "hotspot", parts[0])?,
                            num(line, "hotspot", parts[1])?,
                        ),
                        weight: num(line, "hotspot", parts[2])?,
                    });
                }
                profile.hotspots = spots;
            }
            "hotspots_auto" => {
                hotspots_auto = Some(value.parse().map_err(|_| {
                    bad(line, format!("hotspots_auto expects a count, got `{value}`"))
                })?);
            }
            "alpha_mix" => {
                let mut mix = Vec::new();
                for item in value.split(',') {
                    let Some((a, w)) = item.split_once(':') else {
                        return Err(bad(line, "alpha_mix entries are alpha:fraction".into()));
                    };
                    mix.push((num(line, "alpha_mix", a)?, num(line, "alpha_mix", w)?));
                }
                profile.alpha_mix = mix;
            }
            "variant" => {
                profile.alpha_mix = DatasetVariant::parse(value)
                    .map_err(|e| bad(line, e.to_string()))?
                    .alpha_mix();
            }
            "gamma_shape" => profile.r_shape = num(line, key, value)?,
            "gamma_scale_km" => profile.r_scale_km = num(line, key, value)?,
            "r_cap_m" => profile.r_cap_m = num(line, key, value)?,
            "aim_noise_deg" => profile.aim_noise_deg = num(line, key, value)?,
            "placement_sigma_m" => profile.placement_sigma_m = num(line, key, value)?,
            "background_fraction" => profile.background_fraction = num(line, key, value)?,
            other => return Err(bad(line, format!("unknown key `{other}`"))),
        }
    }

    let area = area.ok_or_else(|| Error::invalid("profile is missing `area`"))?;
    let n_videos = n_videos.ok_or_else(|| Error::invalid("profile is missing `n_videos`"))?;
    if let Some(n) = hotspots_auto {
        if !profile.hotspots.is_empty() {
            return Err(Error::invalid(
                "profile sets both `hotspots` and `hotspots_auto`",
            ));
        }
        profile.hotspots = default_hotspots(&area, n);
    }
    Ok(GenSpec {
        profile,
        area,
        n_videos,
        seed,
    })
}

/// Serializes FoVs in the on-disk CSV layout. Floats use Rust's shortest
/// round-trip formatting, so equal inputs give byte-identical files.
pub fn to_csv(fovs: &[FoV]) -> String {
    let mut out = String::with_capacity(64 * (fovs.len() + 1));
    out.push_str(DATASET_HEADER);
    out.push('\n');
    for f in fovs {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            f.video_id, f.t, f.p.lat, f.p.lon, f.theta, f.r, f.alpha
        )
        .expect("write to String cannot fail");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::FovStore;

    fn test_area() -> Mbr {
        // Roughly 3.2 km x 3.2 km near the equator.
        Mbr::new(0.0, 0.029, 0.0, 0.029)
    }

    #[test]
    fn deterministic_byte_identical() {
        let area = test_area();
        let profile = standard_profile(DatasetVariant::Directional60, &area, 4);
        let a = to_csv(&generate(&profile, &area, 300, 7).unwrap());
        let b = to_csv(&generate(&profile, &area, 300, 7).unwrap());
        assert_eq!(a, b);
        let c = to_csv(&generate(&profile, &area, 300, 8).unwrap());
        assert_ne!(a, c);
    }

    #[test]
    fn roundtrips_through_store() {
        let area = test_area();
        let profile = standard_profile(DatasetVariant::Wide160Minor, &area, 4);
        let fovs = generate(&profile, &area, 200, 1).unwrap();
        let csv = to_csv(&fovs);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.csv");
        std::fs::write(&path, &csv).unwrap();
        let store = FovStore::load(&path).unwrap();
        assert_eq!(store.len(), fovs.len());
        for (a, b) in store.fovs().iter().zip(&fovs) {
            assert_eq!(a.video_id, b.video_id);
            assert_eq!(a.t, b.t);
            assert_eq!(a.p, b.p);
            assert_eq!(a.theta, b.theta);
            assert_eq!(a.r, b.r);
            assert_eq!(a.alpha, b.alpha);
        }
    }

    #[test]
    fn r_distribution_mean_and_cap() {
        let area = test_area();
        let profile = standard_profile(DatasetVariant::Directional60, &area, 4);
        let fovs = generate(&profile, &area, 5_000, 42).unwrap();
        assert!(fovs.iter().all(|f| f.r < 2_000.0 && f.r > 0.0));
        let mean_km = fovs.iter().map(|f| f.r).sum::<f64>() / fovs.len() as f64 / 1_000.0;
        // Gamma(1.6, 0.4) has mean 0.64 km; the 2 km cap trims ~1%.
        assert!((mean_km - 0.64).abs() < 0.05, "mean R = {mean_km} km");
    }

    #[test]
    fn alpha_mix_proportions() {
        let area = test_area();
        let profile = standard_profile(DatasetVariant::Wide160Major, &area, 4);
        let fovs = generate(&profile, &area, 8_000, 11).unwrap();
        let wide = fovs.iter().filter(|f| f.alpha == 160.0).count() as f64;
        let circ = fovs.iter().filter(|f| f.alpha == 360.0).count() as f64;
        assert_eq!(wide + circ, fovs.len() as f64);
        let frac = wide / fovs.len() as f64;
        assert!((frac - 0.7).abs() < 0.02, "160° share = {frac}");
    }

    #[test]
    fn all_cameras_inside_area() {
        let area = test_area();
        let profile = standard_profile(DatasetVariant::Directional60, &area, 4);
        let fovs = generate(&profile, &area, 2_000, 3).unwrap();
        assert!(fovs.iter().all(|f| area.contains(f.p)));
    }

    #[test]
    fn hotspot_videos_aim_at_their_hotspot() {
        let area = test_area();
        let mut profile = standard_profile(DatasetVariant::Directional60, &area, 1);
        profile.background_fraction = 0.0;
        profile.aim_noise_deg = 1e-9;
        let spot = profile.hotspots[0].center;
        let fovs = generate(&profile, &area, 500, 5).unwrap();
        for f in &fovs {
            let b = bearing(f.p, spot);
            assert!(
                crate::geo::angular_difference(f.theta, b) < 1e-6,
                "theta {} vs bearing {b}",
                f.theta
            );
        }
    }

    #[test]
    fn frames_share_video_pose() {
        let area = test_area();
        let mut profile = standard_profile(DatasetVariant::Directional60, &area, 4);
        profile.frames_per_video = 3;
        let fovs = generate(&profile, &area, 10, 2).unwrap();
        assert_eq!(fovs.len(), 30);
        for chunk in fovs.chunks(3) {
            assert!(chunk.iter().all(|f| f.video_id == chunk[0].video_id));
            assert!(chunk.iter().all(|f| f.p == chunk[0].p));
            assert_eq!(chunk[1].t, chunk[0].t + 1);
            assert_eq!(chunk[2].t, chunk[0].t + 2);
        }
    }

    #[test]
    fn variant_parsing() {
        assert_eq!(
            DatasetVariant::parse("100pct60").unwrap(),
            DatasetVariant::Directional60
        );
        assert_eq!(
            DatasetVariant::parse("30pct160").unwrap(),
            DatasetVariant::Wide160Minor
        );
        assert_eq!(
            DatasetVariant::parse("70pct160").unwrap(),
            DatasetVariant::Wide160Major
        );
        assert!(DatasetVariant::parse("nope").is_err());
    }

    #[test]
    fn profile_parser_roundtrip() {
        let text = "\
# benchmark dataset
area = 0.0, 0.0, 0.029, 0.029
n_videos = 500
seed = 9
hotspots_auto = 4
variant = 30pct160
placement_sigma_m = 120
";
        let spec = parse_profile(text).unwrap();
        assert_eq!(spec.n_videos, 500);
        assert_eq!(spec.seed, 9);
        assert_eq!(spec.profile.hotspots.len(), 4);
        assert_eq!(spec.profile.placement_sigma_m, 120.0);
        assert_eq!(spec.profile.alpha_mix, vec![(160.0, 0.3), (360.0, 0.7)]);
        let fovs = generate(&spec.profile, &spec.area, spec.n_videos, spec.seed).unwrap();
        assert_eq!(fovs.len(), 500);
    }

    #[test]
    fn profile_parser_errors() {
        assert!(parse_profile("n_videos = 5").is_err()); // missing area
        assert!(parse_profile("area = 0,0,1,1").is_err()); // missing n_videos
        let bad_key = parse_profile("area = 0,0,1,1\nn_videos = 1\nwat = 3");
        assert!(bad_key.unwrap_err().to_string().contains("wat"));
        let bad_line = parse_profile("area 0,0,1,1");
        assert!(bad_line.unwrap_err().to_string().contains("line 1"));
    }

    #[test]
    fn mix_must_sum_to_one() {
        let area = test_area();
        let mut profile = standard_profile(DatasetVariant::Directional60, &area, 2);
        profile.alpha_mix = vec![(60.0, 0.5), (360.0, 0.4)];
        assert!(generate(&profile, &area, 10, 0).is_err());
    }

    #[test]
    fn hotspot_outside_area_rejected() {
        let area = test_area();
        let mut profile = standard_profile(DatasetVariant::Directional60, &area, 2);
        profile.hotspots[0].center = GeoPoint::new(5.0, 5.0);
        assert!(generate(&profile, &area, 10, 0).is_err());
    }

    #[test]
    fn zero_videos_gives_header_only_csv() {
        let area = test_area();
        let profile = standard_profile(DatasetVariant::Directional60, &area, 2);
        let fovs = generate(&profile, &area, 0, 0).unwrap();
        assert_eq!(to_csv(&fovs), format!("{DATASET_HEADER}\n"));
    }

    #[test]
    fn empty_mix_rejected() {
        let area = test_area();
        let mut profile = standard_profile(DatasetVariant::Directional60, &area, 2);
        profile.alpha_mix.clear();
        assert!(generate(&profile, &area, 10, 0).is_err());
    }
}
