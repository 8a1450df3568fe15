//! Synthetic city generation: reproducible hotspot layouts inside a
//! bounding box, standing in for real census/map ingestion.

use crate::graph::{Hotspot, NodeId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic city config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl BoundingBox {
    /// Roughly downtown-sized: about 11 km on each side.
    pub fn downtown() -> Self {
        Self { lat_min: 41.80, lat_max: 41.90, lon_min: -87.70, lon_max: -87.60 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Placement {
    UniformRandom,
    /// Hotspots near the cells of a square grid, each displaced by a
    /// uniform jitter of up to `cell_jitter_fraction` of the cell size.
    GridJitter { cell_jitter_fraction: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCityConfig {
    pub n_hotspots: u32,
    pub bbox: BoundingBox,
    pub placement: Placement,
    pub rng_seed: u64,
}

impl Default for SyntheticCityConfig {
    fn default() -> Self {
        Self {
            n_hotspots: 26,
            bbox: BoundingBox::downtown(),
            placement: Placement::UniformRandom,
            rng_seed: 0,
        }
    }
}

/// Generates `n_hotspots` unique coordinates inside the bounding box,
/// deterministically per seed.
pub fn generate_synthetic_city(cfg: &SyntheticCityConfig) -> Result<Vec<Hotspot>, SynthError> {
    if cfg.n_hotspots < 2 {
        return Err(SynthError::InvalidConfig(format!(
            "n_hotspots must be at least 2, got {}",
            cfg.n_hotspots
        )));
    }
    let b = cfg.bbox;
    if !(b.lat_min < b.lat_max && b.lon_min < b.lon_max) {
        return Err(SynthError::InvalidConfig(format!("degenerate bounding box: {b:?}")));
    }
    if !(-90.0..=90.0).contains(&b.lat_min)
        || !(-90.0..=90.0).contains(&b.lat_max)
        || !(-180.0..=180.0).contains(&b.lon_min)
        || !(-180.0..=180.0).contains(&b.lon_max)
    {
        return Err(SynthError::InvalidConfig(format!("bounding box out of range: {b:?}")));
    }
    if let Placement::GridJitter { cell_jitter_fraction } = cfg.placement {
        if !(0.0..=1.0).contains(&cell_jitter_fraction) {
            return Err(SynthError::InvalidConfig(format!(
                "cell_jitter_fraction must be in [0, 1], got {cell_jitter_fraction}"
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let n = cfg.n_hotspots as usize;
    let mut coords: Vec<(f64, f64)> = Vec::with_capacity(n);
    match cfg.placement {
        Placement::UniformRandom => {
            while coords.len() < n {
                let c = (rng.gen_range(b.lat_min..b.lat_max), rng.gen_range(b.lon_min..b.lon_max));
                if !coords.contains(&c) {
                    coords.push(c);
                }
            }
        }
        Placement::GridJitter { cell_jitter_fraction } => {
            let cells = (n as f64).sqrt().ceil() as usize;
            let cell_lat = (b.lat_max - b.lat_min) / cells as f64;
            let cell_lon = (b.lon_max - b.lon_min) / cells as f64;
            'grid: for row in 0..cells {
                for col in 0..cells {
                    if coords.len() == n {
                        break 'grid;
                    }
                    let center_lat = b.lat_min + (row as f64 + 0.5) * cell_lat;
                    let center_lon = b.lon_min + (col as f64 + 0.5) * cell_lon;
                    let jitter = cell_jitter_fraction / 2.0;
                    let c = (
                        center_lat + rng.gen_range(-jitter..=jitter) * cell_lat,
                        center_lon + rng.gen_range(-jitter..=jitter) * cell_lon,
                    );
                    if coords.contains(&c) {
                        // astronomically unlikely; nudge deterministically
                        coords.push((c.0 + cell_lat * 1e-9, c.1));
                    } else {
                        coords.push(c);
                    }
                }
            }
        }
    }
    Ok(coords
        .into_iter()
        .enumerate()
        .map(|(i, (lat, lon))| Hotspot::new(i as NodeId, lat, lon, format!("synthetic-{i:03}")))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_city_has_two_distinct_hotspots() {
        let cfg = SyntheticCityConfig { n_hotspots: 2, ..SyntheticCityConfig::default() };
        let city = generate_synthetic_city(&cfg).unwrap();
        assert_eq!(city.len(), 2);
        assert!(city[0].lat != city[1].lat || city[0].lon != city[1].lon);
    }

    #[test]
    fn default_city_feeds_clique_check() {
        let city = generate_synthetic_city(&SyntheticCityConfig::default()).unwrap();
        assert_eq!(city.len(), 26);
        let g = crate::graph::build_complete_graph(
            city,
            &crate::graph::HaversineProvider,
            30.0,
        )
        .unwrap();
        assert_eq!(g.edge_count(), 325);
    }

    #[test]
    fn same_seed_reproduces_identical_coordinates() {
        for placement in [Placement::UniformRandom, Placement::GridJitter { cell_jitter_fraction: 0.4 }] {
            let cfg = SyntheticCityConfig {
                n_hotspots: 20,
                placement,
                rng_seed: 77,
                ..SyntheticCityConfig::default()
            };
            let a = generate_synthetic_city(&cfg).unwrap();
            let b = generate_synthetic_city(&cfg).unwrap();
            assert_eq!(a, b);
            for h in &a {
                assert!(h.lat >= cfg.bbox.lat_min && h.lat <= cfg.bbox.lat_max);
                assert!(h.lon >= cfg.bbox.lon_min && h.lon <= cfg.bbox.lon_max);
            }
        }
    }

    #[test]
    fn rejects_bad_configs() {
        let bad_n = SyntheticCityConfig { n_hotspots: 1, ..SyntheticCityConfig::default() };
        assert!(generate_synthetic_city(&bad_n).is_err());
        let bad_box = SyntheticCityConfig {
            bbox: BoundingBox { lat_min: 42.0, lat_max: 41.0, lon_min: -87.0, lon_max: -86.0 },
            ..SyntheticCityConfig::default()
        };
        assert!(generate_synthetic_city(&bad_box).is_err());
        let bad_jitter = SyntheticCityConfig {
            placement: Placement::GridJitter { cell_jitter_fraction: 1.5 },
            ..SyntheticCityConfig::default()
        };
        assert!(generate_synthetic_city(&bad_jitter).is_err());
    }
}
