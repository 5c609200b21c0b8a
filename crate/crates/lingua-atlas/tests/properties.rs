//! Property tests over the library invariants.

use std::collections::BTreeMap;

use proptest::prelude::*;

use lingua_atlas::corpus::{
    split_corpus, CorpusManifest, LanguageId, LanguageRecord, Split, TreeSource, UtteranceEntry,
};
use lingua_atlas::dsp::{self, MelCepstrum};
use lingua_atlas::embed::{nearest_neighbors, DistanceKind, DistanceMatrix};
use lingua_atlas::familytree::parse_classification;
use lingua_atlas::geodesy::{correlation_metric, geo_distance_matrix, pearson};
use lingua_atlas::similarity::select_neighbor;

fn lang_id(index: usize) -> LanguageId {
    LanguageId::new(&format!("L{index:05}")).unwrap()
}

fn arb_label() -> impl Strategy<Value = String> {
    proptest::string::string_regex("[A-Za-z][A-Za-z0-9]{0,6}( [A-Za-z0-9]{1,3})?").unwrap()
}

fn arb_manifest() -> impl Strategy<Value = CorpusManifest> {
    let lang = (
        any::<u8>(),
        "[ -~&&[^\t]]{0,10}",
        -90.0..90.0f64,
        -180.0..180.0f64,
        proptest::collection::vec(arb_label(), 1..4),
    );
    proptest::collection::vec(lang, 1..6).prop_map(|raw| {
        let mut languages = Vec::new();
        let mut utterances = Vec::new();
        for (i, (n_utts, name, lat, lon, path)) in raw.into_iter().enumerate() {
            let id = lang_id(i);
            let mut classifications = BTreeMap::new();
            classifications.insert(TreeSource::Ethnologue, path.clone());
            if i % 2 == 0 {
                classifications.insert(TreeSource::Glottolog, path);
            }
            languages.push(LanguageRecord {
                id: id.clone(),
                name,
                lat,
                lon,
                classifications,
                phonemes: None,
            });
            for u in 0..(n_utts % 4) {
                utterances.push(UtteranceEntry {
                    language_id: id.clone(),
                    path: format!("audio/{id}/utt{u:03}.wav"),
                    split: if u % 3 == 0 {
                        Split::Train
                    } else {
                        Split::Test
                    },
                });
            }
        }
        CorpusManifest {
            languages,
            utterances,
            sample_rate: 16_000,
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn manifest_write_parse_write_is_stable(manifest in arb_manifest()) {
        let text = manifest.to_manifest_string();
        let parsed = CorpusManifest::parse(&text).unwrap();
        prop_assert_eq!(parsed.to_manifest_string(), text);
        prop_assert_eq!(parsed.languages, manifest.languages);
        prop_assert_eq!(parsed.utterances, manifest.utterances);
    }

    #[test]
    fn split_marginals_are_exact(utts in 2usize..12, frac in 0.05f64..0.95, seed in any::<u64>()) {
        let mut manifest = arb_fixed_manifest(3, utts);
        manifest.sample_rate = 16_000;
        let out = split_corpus(&manifest, frac, seed).unwrap();
        for lang in &manifest.languages {
            let total = out.utterances.iter().filter(|u| u.language_id == lang.id).count();
            prop_assert_eq!(total, utts);
            let train = out
                .utterances
                .iter()
                .filter(|u| u.language_id == lang.id && u.split == Split::Train)
                .count();
            let expected = ((utts as f64 * frac).round() as usize).clamp(1, utts - 1);
            prop_assert_eq!(train, expected);
        }
    }

    #[test]
    fn classification_parse_is_idempotent(labels in proptest::collection::vec(arb_label(), 1..5)) {
        let joined = labels.join(", ");
        let parsed = parse_classification(&joined).unwrap();
        prop_assert_eq!(&parsed, &labels);
        let again = parse_classification(&parsed.join(", ")).unwrap();
        prop_assert_eq!(again, labels);
    }

    #[test]
    fn pearson_is_invariant_under_positive_affine_maps(
        xs in proptest::collection::vec(-100.0f64..100.0, 3..12),
        scale in 0.01f64..50.0,
        shift in -100.0f64..100.0,
    ) {
        let ys: Vec<f64> = xs.iter().enumerate().map(|(i, x)| x * 0.5 + (i as f64).sin()).collect();
        let base = pearson(&xs, &ys).unwrap();
        let mapped: Vec<f64> = xs.iter().map(|x| x * scale + shift).collect();
        let transformed = pearson(&mapped, &ys).unwrap();
        match (base, transformed) {
            (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-9, "{a} vs {b}"),
            (a, b) => prop_assert_eq!(a, b),
        }
    }

    #[test]
    fn mcd_is_symmetric_nonnegative_and_zero_on_matched_tails(
        rows_a in proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, 4), 1..6),
        rows_b in proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, 4), 1..6),
        c0_offset in -5.0f64..5.0,
    ) {
        let a = MelCepstrum::from_rows(rows_a.clone(), 3).unwrap();
        let b = MelCepstrum::from_rows(rows_b, 3).unwrap();
        let ab = dsp::mcd(&a, &b).unwrap();
        let ba = dsp::mcd(&b, &a).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(ab, ba);
        // Same coefficients 1..D with shifted c0 and a duplicated last frame
        // still align at zero distortion.
        let mut rows_c = rows_a.clone();
        for row in &mut rows_c {
            row[0] += c0_offset;
        }
        rows_c.push(rows_c.last().unwrap().clone());
        let c = MelCepstrum::from_rows(rows_c, 3).unwrap();
        prop_assert_eq!(dsp::mcd(&a, &c).unwrap(), 0.0);
    }

    #[test]
    fn knn_prefix_property_and_triangle_inequality(
        vectors in proptest::collection::vec(proptest::collection::vec(-10.0f64..10.0, 3), 3..8),
        query in 0usize..8,
    ) {
        let n = vectors.len();
        let query = query % n;
        let ids: Vec<LanguageId> = (0..n).map(lang_id).collect();
        let matrix = DistanceMatrix::from_fn(ids.clone(), DistanceKind::Embedding, |i, j| {
            vectors[i]
                .iter()
                .zip(&vectors[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .unwrap();
        // L2 triangle inequality.
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    prop_assert!(matrix.get(i, j) <= matrix.get(i, k) + matrix.get(k, j) + 1e-9);
                }
            }
        }
        // k-neighbor lists are prefixes of (k+1)-neighbor lists.
        let full = nearest_neighbors(&matrix, &ids[query], n - 1).unwrap();
        for k in 1..n - 1 {
            let partial = nearest_neighbors(&matrix, &ids[query], k).unwrap();
            prop_assert_eq!(&full[..k], &partial[..]);
        }
        // select_neighbor enumerates every other language exactly once.
        let mut selected: Vec<LanguageId> = (1..n)
            .map(|k| select_neighbor(&matrix, &ids[query], k).unwrap())
            .collect();
        selected.sort();
        let mut expected: Vec<LanguageId> =
            ids.iter().filter(|id| **id != ids[query]).cloned().collect();
        expected.sort();
        prop_assert_eq!(selected, expected);
    }

    #[test]
    fn shrinking_the_radius_never_defines_more_correlations(
        lons in proptest::collection::vec(-30.0f64..30.0, 4..9),
        r1 in 100.0f64..4000.0,
        r2 in 100.0f64..4000.0,
    ) {
        let (small, large) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        let languages: Vec<LanguageRecord> = lons
            .iter()
            .enumerate()
            .map(|(i, &lon)| LanguageRecord {
                id: lang_id(i),
                name: String::new(),
                lat: 0.0,
                lon,
                classifications: BTreeMap::new(),
                phonemes: None,
            })
            .collect();
        let geo = geo_distance_matrix(&languages).unwrap();
        let emb = DistanceMatrix::from_fn(geo.ids().to_vec(), DistanceKind::Embedding, |i, j| {
            ((i * 31 + j * 17) % 13) as f64 + 1.0
        })
        .unwrap();
        let local_small = correlation_metric(&emb, &geo, Some(small)).unwrap();
        let local_large = correlation_metric(&emb, &geo, Some(large)).unwrap();
        prop_assert!(local_small.n_excluded >= local_large.n_excluded);
    }
}

fn arb_fixed_manifest(n_langs: usize, utts: usize) -> CorpusManifest {
    let mut languages = Vec::new();
    let mut utterances = Vec::new();
    for i in 0..n_langs {
        let id = lang_id(i);
        languages.push(LanguageRecord {
            id: id.clone(),
            name: format!("lang {i}"),
            lat: 0.0,
            lon: i as f64,
            classifications: BTreeMap::new(),
            phonemes: None,
        });
        for u in 0..utts {
            utterances.push(UtteranceEntry {
                language_id: id.clone(),
                path: format!("audio/{id}/utt{u:03}.wav"),
                split: Split::Train,
            });
        }
    }
    CorpusManifest {
        languages,
        utterances,
        sample_rate: 16_000,
    }
}
