//! Great-circle distances and the embedding-vs-geography correlation metric,
//! global and radius-restricted.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::corpus::{LanguageId, LanguageRecord};
use crate::embed::{DistanceKind, DistanceMatrix};

/// Mean Earth radius in kilometers.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("sequence lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("distance matrices cover different language sets")]
    IdSetMismatch,
    #[error("radius must be positive, got {0}")]
    BadRadius(f64),
    #[error("need at least 2 languages, got {0}")]
    TooFewLanguages(usize),
    #[error(transparent)]
    Matrix(#[from] crate::embed::EmbedError),
}

/// Haversine great-circle distance in kilometers between two coordinates
/// given in degrees.
pub fn geo_distance_deg(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let rad = std::f64::consts::PI / 180.0;
    let (lat1, lon1, lat2, lon2) = (lat1 * rad, lon1 * rad, lat2 * rad, lon2 * rad);
    let half_dlat = (lat2 - lat1) / 2.0;
    let half_dlon = (lon2 - lon1) / 2.0;
    let a = half_dlat.sin().powi(2) + lat1.cos() * lat2.cos() * half_dlon.sin().powi(2);
    2.0 * EARTH_RADIUS_KM * a.sqrt().min(1.0).asin()
}

/// Great-circle distance between two languages' planted locations.
pub fn geo_distance(a: &LanguageRecord, b: &LanguageRecord) -> f64 {
    geo_distance_deg(a.lat, a.lon, b.lat, b.lon)
}

/// Pairwise geographic distance matrix, ids ordered lexicographically.
pub fn geo_distance_matrix(languages: &[LanguageRecord]) -> Result<DistanceMatrix, MetricError> {
    if languages.len() < 2 {
        return Err(MetricError::TooFewLanguages(languages.len()));
    }
    let mut sorted: Vec<&LanguageRecord> = languages.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let ids: Vec<LanguageId> = sorted.iter().map(|l| l.id.clone()).collect();
    Ok(DistanceMatrix::from_fn(
        ids,
        DistanceKind::Geographic,
        |i, j| geo_distance(sorted[i], sorted[j]),
    )?)
}

/// Pearson correlation coefficient: sample covariance over the product of
/// sample standard deviations. `Ok(None)` when the coefficient is undefined
/// (fewer than two points, or zero variance in either sequence).
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Option<f64>, MetricError> {
    if x.len() != y.len() {
        return Err(MetricError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 2 {
        return Ok(None);
    }
    let mean_x = x.iter().sum::<f64>() / n as f64;
    let mean_y = y.iter().sum::<f64>() / n as f64;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mean_x;
        let dy = b - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == 0.0 || var_y == 0.0 {
        return Ok(None);
    }
    Ok(Some((cov / (var_x.sqrt() * var_y.sqrt())).clamp(-1.0, 1.0)))
}

/// Per-language correlation between embedding and geographic distances, plus
/// the mean/std summary. A missing `radius_km` means the global metric.
#[derive(Debug, Clone)]
pub struct CorrelationReport {
    /// `None` marks languages whose coefficient is undefined (too few
    /// in-radius neighbors, or zero variance).
    pub per_language: BTreeMap<LanguageId, Option<f64>>,
    /// Mean of the defined coefficients; NaN if none are defined.
    pub mu: f64,
    /// Sample standard deviation of the defined coefficients; 0 when fewer
    /// than two are defined.
    pub sigma: f64,
    pub radius_km: Option<f64>,
    pub n_excluded: usize,
}

/// For each language i, correlate its embedding-distance row against its
/// geographic-distance row over all other languages (global) or over the
/// languages within `radius_km` (local). Languages with an undefined
/// coefficient are excluded from the summary and counted.
pub fn correlation_metric(
    emb: &DistanceMatrix,
    geo: &DistanceMatrix,
    radius_km: Option<f64>,
) -> Result<CorrelationReport, MetricError> {
    if emb.ids() != geo.ids() {
        return Err(MetricError::IdSetMismatch);
    }
    if let Some(r) = radius_km {
        if r <= 0.0 || r.is_nan() {
            return Err(MetricError::BadRadius(r));
        }
    }

    let n = emb.len();
    let mut per_language = BTreeMap::new();
    let mut defined = Vec::new();
    for i in 0..n {
        let mut e_row = Vec::with_capacity(n - 1);
        let mut g_row = Vec::with_capacity(n - 1);
        for j in 0..n {
            if j == i {
                continue;
            }
            let g = geo.get(i, j);
            if let Some(r) = radius_km {
                if g >= r {
                    continue;
                }
            }
            e_row.push(emb.get(i, j));
            g_row.push(g);
        }
        let c = pearson(&e_row, &g_row)?;
        if let Some(v) = c {
            defined.push(v);
        }
        per_language.insert(emb.ids()[i].clone(), c);
    }

    let n_excluded = n - defined.len();
    let mu = if defined.is_empty() {
        f64::NAN
    } else {
        defined.iter().sum::<f64>() / defined.len() as f64
    };
    let sigma = if defined.len() < 2 {
        0.0
    } else {
        let var =
            defined.iter().map(|c| (c - mu) * (c - mu)).sum::<f64>() / (defined.len() - 1) as f64;
        var.sqrt()
    };

    Ok(CorrelationReport {
        per_language,
        mu,
        sigma,
        radius_km,
        n_excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn record(id: &str, lat: f64, lon: f64) -> LanguageRecord {
        LanguageRecord {
            id: LanguageId::new(id).unwrap(),
            name: id.to_owned(),
            lat,
            lon,
            classifications: BTreeMap::new(),
            phonemes: None,
        }
    }

    #[test]
    fn zero_distance_for_identical_points() {
        let a = record("AAAAAA", 12.5, -33.0);
        assert_eq!(geo_distance(&a, &a), 0.0);
    }

    #[test]
    fn antipodal_points_are_half_circumference() {
        let a = record("AAAAAA", 0.0, 0.0);
        let b = record("BBBBBB", 0.0, 180.0);
        let expected = EARTH_RADIUS_KM * std::f64::consts::PI;
        assert!((geo_distance(&a, &b) - expected).abs() < 1e-6);
        assert!((geo_distance(&a, &b) - 20015.1).abs() < 0.1);
    }

    #[test]
    fn one_degree_along_equator() {
        let a = record("AAAAAA", 0.0, 0.0);
        let b = record("BBBBBB", 0.0, 1.0);
        // R * pi / 180, evaluated independently.
        let expected = 6371.0088 * std::f64::consts::PI / 180.0;
        assert!((geo_distance(&a, &b) - expected).abs() < 1e-9);
        assert!((geo_distance(&a, &b) - 111.195).abs() < 1e-3);
    }

    #[test]
    fn distance_is_symmetric_and_triangle_holds() {
        let pts = [
            record("AAAAAA", 10.0, 20.0),
            record("BBBBBB", -35.0, 140.0),
            record("CCCCCC", 62.0, -45.0),
        ];
        for a in &pts {
            for b in &pts {
                assert_eq!(geo_distance(a, b), geo_distance(b, a));
            }
        }
        let ab = geo_distance(&pts[0], &pts[1]);
        let bc = geo_distance(&pts[1], &pts[2]);
        let ac = geo_distance(&pts[0], &pts[2]);
        assert!(ac <= ab + bc + 1e-6);
    }

    #[test]
    fn matrix_matches_pairwise_loop() {
        let langs = vec![
            record("DDDDDD", 3.0, 4.0),
            record("AAAAAA", 0.0, 0.0),
            record("CCCCCC", -20.0, 60.0),
            record("BBBBBB", 45.0, -90.0),
        ];
        let m = geo_distance_matrix(&langs).unwrap();
        // ids come back sorted
        let ids: Vec<&str> = m.ids().iter().map(|i| i.as_str()).collect();
        assert_eq!(ids, ["AAAAAA", "BBBBBB", "CCCCCC", "DDDDDD"]);
        for i in 0..4 {
            for j in 0..4 {
                let a = langs.iter().find(|l| l.id == m.ids()[i]).unwrap();
                let b = langs.iter().find(|l| l.id == m.ids()[j]).unwrap();
                assert_eq!(m.get(i, j), geo_distance(a, b));
            }
        }
    }

    #[test]
    fn pearson_known_values() {
        let perfect = pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0])
            .unwrap()
            .unwrap();
        assert!((perfect - 1.0).abs() < 1e-12);
        let inverse = pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0])
            .unwrap()
            .unwrap();
        assert!((inverse + 1.0).abs() < 1e-12);
        let c = pearson(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0])
            .unwrap()
            .unwrap();
        assert!((c - 0.8).abs() < 1e-12);
    }

    #[test]
    fn pearson_undefined_cases() {
        assert_eq!(pearson(&[1.0], &[2.0]).unwrap(), None);
        assert_eq!(pearson(&[], &[]).unwrap(), None);
        assert_eq!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).unwrap(), None);
        assert!(matches!(
            pearson(&[1.0, 2.0], &[1.0]),
            Err(MetricError::LengthMismatch(2, 1))
        ));
    }

    #[test]
    fn isometric_embedding_gives_mu_one_sigma_zero() {
        let langs: Vec<LanguageRecord> = (0..5)
            .map(|i| record(&format!("L0000{i}"), 0.0, f64::from(i) * 2.0))
            .collect();
        let geo = geo_distance_matrix(&langs).unwrap();
        let emb = DistanceMatrix::from_fn(geo.ids().to_vec(), DistanceKind::Embedding, |i, j| {
            geo.get(i, j)
        })
        .unwrap();
        // Radii chosen so every in-radius row keeps at least two distinct
        // distances (languages sit 222.39 km apart along the equator).
        for radius in [None, Some(500.0), Some(1e9)] {
            let report = correlation_metric(&emb, &geo, radius).unwrap();
            assert!((report.mu - 1.0).abs() < 1e-12, "radius {radius:?}");
            assert!(report.sigma.abs() < 1e-12);
            assert_eq!(report.n_excluded, 0);
        }
    }

    #[test]
    fn local_with_infinite_radius_equals_global() {
        let langs: Vec<LanguageRecord> = (0..6)
            .map(|i| record(&format!("L0000{i}"), f64::from(i) * 3.0, f64::from(i * i)))
            .collect();
        let geo = geo_distance_matrix(&langs).unwrap();
        let emb = DistanceMatrix::from_fn(geo.ids().to_vec(), DistanceKind::Embedding, |i, j| {
            ((i * 7 + j * 13) % 17) as f64 + if i == j { 0.0 } else { 1.0 }
        })
        .unwrap();
        let global = correlation_metric(&emb, &geo, None).unwrap();
        let local = correlation_metric(&emb, &geo, Some(f64::INFINITY)).unwrap();
        assert_eq!(global.mu, local.mu);
        assert_eq!(global.sigma, local.sigma);
        assert_eq!(global.per_language, local.per_language);
    }

    #[test]
    fn hand_built_matrices_match_a_per_row_pearson_oracle() {
        let ids: Vec<LanguageId> = (0..4)
            .map(|i| LanguageId::new(&format!("L0000{i}")).unwrap())
            .collect();
        let e = [
            [0.0, 1.0, 4.0, 2.5],
            [1.0, 0.0, 3.0, 7.0],
            [4.0, 3.0, 0.0, 5.5],
            [2.5, 7.0, 5.5, 0.0],
        ];
        let g = [
            [0.0, 100.0, 450.0, 210.0],
            [100.0, 0.0, 310.0, 800.0],
            [450.0, 310.0, 0.0, 620.0],
            [210.0, 800.0, 620.0, 0.0],
        ];
        let emb =
            DistanceMatrix::from_fn(ids.clone(), DistanceKind::Embedding, |i, j| e[i][j]).unwrap();
        let geo =
            DistanceMatrix::from_fn(ids.clone(), DistanceKind::Geographic, |i, j| g[i][j]).unwrap();
        let report = correlation_metric(&emb, &geo, None).unwrap();

        // Direct per-row oracle: fetch the off-diagonal rows and evaluate
        // the Pearson formula from scratch.
        let mut expected = Vec::new();
        for i in 0..4 {
            let xs: Vec<f64> = (0..4).filter(|&j| j != i).map(|j| e[i][j]).collect();
            let ys: Vec<f64> = (0..4).filter(|&j| j != i).map(|j| g[i][j]).collect();
            let mx = xs.iter().sum::<f64>() / 3.0;
            let my = ys.iter().sum::<f64>() / 3.0;
            let cov: f64 = xs.iter().zip(&ys).map(|(a, b)| (a - mx) * (b - my)).sum();
            let vx: f64 = xs.iter().map(|a| (a - mx) * (a - mx)).sum();
            let vy: f64 = ys.iter().map(|b| (b - my) * (b - my)).sum();
            expected.push(cov / (vx.sqrt() * vy.sqrt()));
        }
        for (i, id) in ids.iter().enumerate() {
            let got = report.per_language[id].unwrap();
            assert!(
                (got - expected[i]).abs() < 1e-12,
                "{got} vs {}",
                expected[i]
            );
        }
        let mu = expected.iter().sum::<f64>() / 4.0;
        let sigma = (expected.iter().map(|c| (c - mu) * (c - mu)).sum::<f64>() / 3.0).sqrt();
        assert!((report.mu - mu).abs() < 1e-12);
        assert!((report.sigma - sigma).abs() < 1e-12);
    }

    #[test]
    fn languages_without_neighbors_are_excluded() {
        // Two tight pairs, far apart; radius covers only the partner, so each
        // language has exactly one in-radius neighbor: pearson undefined.
        let langs = vec![
            record("AAAAAA", 0.0, 0.0),
            record("BBBBBB", 0.0, 0.5),
            record("CCCCCC", 0.0, 90.0),
            record("DDDDDD", 0.0, 90.5),
        ];
        let geo = geo_distance_matrix(&langs).unwrap();
        let emb = DistanceMatrix::from_fn(geo.ids().to_vec(), DistanceKind::Embedding, |i, j| {
            (i as f64 - j as f64).abs()
        })
        .unwrap();
        let report = correlation_metric(&emb, &geo, Some(100.0)).unwrap();
        assert_eq!(report.n_excluded, 4);
        assert!(report.mu.is_nan());
        assert!(report.per_language.values().all(Option::is_none));
    }
}
