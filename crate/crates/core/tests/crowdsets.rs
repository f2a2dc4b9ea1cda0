use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use socialnav::crowdsets::{
    extract_samples, read_archive, to_world_frame, write_archive, ExtractConfig, FormatSpec, Record, Scene,
};

/// Gap-free pedestrians: (id, first frame, length, start x, start y, step x, step y).
fn records_strategy() -> impl Strategy<Value = Vec<Record>> {
    prop::collection::vec((0usize..20, 1usize..30, -5.0..5.0f64, -5.0..5.0f64, -0.5..0.5f64, -0.5..0.5f64), 1..6)
        .prop_map(|peds| {
            let mut out = Vec::new();
            for (i, (start, len, x, y, dx, dy)) in peds.into_iter().enumerate() {
                for k in 0..len {
                    out.push(Record {
                        frame: 10.0 * (start + k) as f64,
                        ped_id: i as i64 + 1,
                        pos: [x + dx * k as f64 + 0.01 * (k as f64).sin(), y + dy * k as f64],
                    });
                }
            }
            out
        })
}

fn scene(records: &[Record]) -> Scene {
    Scene::from_records("p", records, &FormatSpec::default()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sample_count_matches_track_lengths(records in records_strategy()) {
        let s = scene(&records);
        let cfg = ExtractConfig::default();
        let want: usize = s.tracks.iter().map(|t| t.points.len().saturating_sub(cfg.n_obs + cfg.n_pred - 1)).sum();
        prop_assert_eq!(extract_samples(&s, &cfg).samples.len(), want);
    }

    #[test]
    fn samples_satisfy_frame_invariants(records in records_strategy()) {
        let s = scene(&records);
        let cfg = ExtractConfig::default();
        for smp in extract_samples(&s, &cfg).samples {
            let track = s.track_of(smp.ego_id).unwrap();
            let anchor = track.at(smp.t_anchor).unwrap();
            prop_assert_eq!(smp.anchor_world, anchor);
            prop_assert_eq!(smp.ego_future.len(), cfg.n_pred);
            prop_assert_eq!(*smp.ego_future.last().unwrap(), smp.goal);
            for (q, p) in smp.ego_future.iter().enumerate() {
                let w = track.at(smp.t_anchor + q + 1).unwrap();
                prop_assert!((p[0] - (w[0] - anchor[0])).abs() < 1e-12 && (p[1] - (w[1] - anchor[1])).abs() < 1e-12);
            }
            for n in &smp.neighbors {
                prop_assert_eq!(n.len(), cfg.n_obs);
                let last = n[cfg.n_obs - 1];
                prop_assert!(last[0].hypot(last[1]) <= cfg.radius);
            }
        }
    }

    #[test]
    fn extraction_ignores_record_order(records in records_strategy(), seed in 0u64..1000) {
        let mut shuffled = records.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let cfg = ExtractConfig::default();
        prop_assert_eq!(extract_samples(&scene(&records), &cfg).samples, extract_samples(&scene(&shuffled), &cfg).samples);
    }

    #[test]
    fn archive_round_trip(records in records_strategy()) {
        let samples = extract_samples(&scene(&records), &ExtractConfig::default()).samples;
        prop_assert_eq!(read_archive(&write_archive(&samples).unwrap()).unwrap(), samples);
    }

    #[test]
    fn world_frame_inverts_centering(pts in prop::collection::vec((-50.0..50.0f64, -50.0..50.0f64), 0..20),
                                     ax in -100.0..100.0f64, ay in -100.0..100.0f64) {
        let world: Vec<[f64; 2]> = pts.iter().map(|p| [p.0, p.1]).collect();
        let local: Vec<[f64; 2]> = world.iter().map(|p| [p[0] - ax, p[1] - ay]).collect();
        let back = to_world_frame(&local, [ax, ay]);
        prop_assert_eq!(back.len(), world.len());
        for (a, b) in back.iter().zip(&world) {
            prop_assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
        }
    }
}
