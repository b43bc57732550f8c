use mlsh::objective::{evaluate, ObjectiveConfig};
use mlsh::pairs::sample_pair_set;
use mlsh::prelude::*;
use proptest::prelude::*;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v[v.len() / 2]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn trained_count_beats_random_start(data_seed in any::<u64>(), seed in any::<u64>()) {
        let data = generate_gaussian_sign_dataset(200, RngSeed(data_seed)).unwrap();
        let sampling = SamplingConfig::balanced("randomhit-randommiss".parse().unwrap(), 400);
        let cfg = TrainConfig {
            bits: 32,
            batches: 3,
            steps_per_batch: 60,
            proposal_stddev: 0.05,
            objective: ObjectiveConfig::default(),
            sampling,
            seed: RngSeed(seed),
            shared_pairs: true,
            track_best: false,
            record_trajectory: false,
        };
        let (trained, _) = train(&data, &cfg).unwrap();
        let random = random_arrangement(3, 32, RngSeed(seed ^ 0x5eed)).unwrap();
        let held_out = sample_pair_set(&data, &sampling, RngSeed(seed.wrapping_add(1))).unwrap();
        let score = |a: &HyperplaneArrangement| {
            median(a.normals().map(|n| evaluate(n, &held_out, &cfg.objective, &data).unwrap().x).collect())
        };
        prop_assert!(score(&trained) > score(&random));
    }
}
