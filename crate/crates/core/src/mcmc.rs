//! Metropolis-Hastings training of hyperplane normals.
//!
//! Each normal is a particle on the unit sphere doing an independent random
//! walk whose stationary density is proportional to `exp(x / T)`. Training
//! runs in batches: a batch draws a fresh pair set, then every particle takes
//! a fixed number of steps against it. Particles start at the positions of
//! [`random_arrangement`] for the same seed and never interact.
//!
//! Every particle draws from its own stream derived from
//! `(seed, hyperplane, batch)`, so results do not depend on how many worker
//! threads execute the batch.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::hashing::{random_arrangement, HyperplaneArrangement};
use crate::objective::{ObjectiveConfig, PreparedPairs};
use crate::pairs::{PairSampler, SamplingConfig};
use crate::seed::{RngSeed, Stream};
use crate::vector;

/// Pair-stream index used for the batch-wide pair set.
const SHARED_PAIRS: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub bits: usize,
    pub batches: usize,
    pub steps_per_batch: usize,
    pub proposal_stddev: f64,
    pub objective: ObjectiveConfig,
    pub sampling: SamplingConfig,
    pub seed: RngSeed,
    /// One pair set per batch for all hyperplanes, instead of one per
    /// hyperplane.
    pub shared_pairs: bool,
    /// Also report the highest-`log U` position each particle visited.
    pub track_best: bool,
    /// Keep the per-step `log U` series of every particle.
    pub record_trajectory: bool,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.bits == 0 {
            return bad("bits must be at least 1".into());
        }
        if self.batches == 0 {
            return bad("batches must be at least 1".into());
        }
        if self.steps_per_batch == 0 {
            return bad("steps per batch must be at least 1".into());
        }
        if !(self.proposal_stddev > 0.0 && self.proposal_stddev.is_finite()) {
            return bad(format!(
                "proposal stddev must be positive, got {}",
                self.proposal_stddev
            ));
        }
        self.objective.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// `[hyperplane][batch]` fraction of accepted proposals.
    pub acceptance_rates: Vec<Vec<f64>>,
    /// `log U` of each final position under the last batch's pairs.
    pub final_log_u: Vec<f64>,
    /// `[hyperplane][batch * steps + step]` `log U` after each step.
    pub trajectories: Option<Vec<Vec<f64>>>,
    /// Highest-`log U` positions and their values, when tracked.
    pub best: Option<(HyperplaneArrangement, Vec<f64>)>,
}

impl TrainReport {
    pub fn mean_acceptance(&self) -> f64 {
        let all: Vec<f64> = self.acceptance_rates.iter().flatten().copied().collect();
        if all.is_empty() {
            0.0
        } else {
            all.iter().sum::<f64>() / all.len() as f64
        }
    }

    pub fn mean_final_log_u(&self) -> f64 {
        if self.final_log_u.is_empty() {
            0.0
        } else {
            self.final_log_u.iter().sum::<f64>() / self.final_log_u.len() as f64
        }
    }

    /// `hyperplane,batch,acceptance_rate`
    pub fn write_acceptance_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "hyperplane,batch,acceptance_rate")?;
        for (h, rates) in self.acceptance_rates.iter().enumerate() {
            for (b, r) in rates.iter().enumerate() {
                writeln!(w, "{h},{b},{r}")?;
            }
        }
        Ok(())
    }

    /// `hyperplane,batch,step,log_u`; header only when no trajectory was
    /// recorded.
    pub fn write_trajectory_csv<W: Write>(&self, mut w: W, steps_per_batch: usize) -> Result<()> {
        writeln!(w, "hyperplane,batch,step,log_u")?;
        if let Some(traj) = &self.trajectories {
            for (h, series) in traj.iter().enumerate() {
                for (t, v) in series.iter().enumerate() {
                    writeln!(w, "{h},{},{},{v}", t / steps_per_batch, t % steps_per_batch)?;
                }
            }
        }
        Ok(())
    }
}

/// `normalize(current + g)` with `g ~ N(0, stddev² I)`.
pub fn propose_move<R: Rng + ?Sized>(current: &[f64], stddev: f64, rng: &mut R) -> Vec<f64> {
    let g = Normal::new(0.0, stddev).expect("stddev validated positive");
    loop {
        let mut q: Vec<f64> = current.iter().map(|c| c + g.sample(rng)).collect();
        if vector::normalize(&mut q) >= 1e-12 {
            return q;
        }
    }
}

/// Metropolis rule on a log ratio: always accept uphill, otherwise accept
/// with probability `exp(log_ratio)`.
pub fn metropolis_accept<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> bool {
    log_ratio >= 0.0 || rng.random::<f64>() < log_ratio.exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next: Vec<f64>,
    pub accepted: bool,
    pub proposal_log_u: f64,
    /// `log U` at `next`.
    pub log_u: f64,
}

/// One Metropolis step from `current`, whose `log U` under `pairs` is
/// `current_log_u`. The projected Gaussian proposal is treated as
/// symmetric.
pub fn mh_step<R: Rng + ?Sized>(
    current: &[f64],
    current_log_u: f64,
    pairs: &PreparedPairs,
    objective: &ObjectiveConfig,
    stddev: f64,
    rng: &mut R,
) -> Result<StepOutcome> {
    let q = propose_move(current, stddev, rng);
    let proposal_log_u = pairs.evaluate(&q, objective)?.log_u;
    if metropolis_accept(proposal_log_u - current_log_u, rng) {
        Ok(StepOutcome {
            next: q,
            accepted: true,
            proposal_log_u,
            log_u: proposal_log_u,
        })
    } else {
        Ok(StepOutcome {
            next: current.to_vec(),
            accepted: false,
            proposal_log_u,
            log_u: current_log_u,
        })
    }
}

#[derive(Debug, Clone)]
struct Particle {
    position: Vec<f64>,
    log_u: f64,
    best: Option<(Vec<f64>, f64)>,
    trajectory: Vec<f64>,
    acceptance: Vec<f64>,
}

impl Particle {
    fn note_best(&mut self) {
        if let Some((pos, val)) = &mut self.best {
            if self.log_u > *val {
                pos.copy_from_slice(&self.position);
                *val = self.log_u;
            }
        }
    }

    fn run_batch<R: Rng>(&mut self, pairs: &PreparedPairs, cfg: &TrainConfig, rng: &mut R) -> Result<()> {
        self.log_u = pairs.evaluate(&self.position, &cfg.objective)?.log_u;
        self.note_best();
        let mut accepted = 0usize;
        for _ in 0..cfg.steps_per_batch {
            let step = mh_step(
                &self.position,
                self.log_u,
                pairs,
                &cfg.objective,
                cfg.proposal_stddev,
                rng,
            )?;
            if step.accepted {
                accepted += 1;
                self.position = step.next;
                self.log_u = step.log_u;
                self.note_best();
            }
            if cfg.record_trajectory {
                self.trajectory.push(self.log_u);
            }
        }
        self.acceptance.push(accepted as f64 / cfg.steps_per_batch as f64);
        Ok(())
    }
}

/// Learns `cfg.bits` hyperplanes on `data`.
pub fn train(data: &LabeledDataset, cfg: &TrainConfig) -> Result<(HyperplaneArrangement, TrainReport)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidParameter("training data is empty".into()));
    }
    data.ensure_nonzero_vectors()?;
    let dim = data.dim();
    let init = random_arrangement(dim, cfg.bits, cfg.seed)?;
    let sampler = PairSampler::new(data);

    let mut particles: Vec<Particle> = init
        .normals()
        .map(|n| Particle {
            position: n.to_vec(),
            log_u: f64::NEG_INFINITY,
            best: cfg.track_best.then(|| (n.to_vec(), f64::NEG_INFINITY)),
            trajectory: Vec::new(),
            acceptance: Vec::with_capacity(cfg.batches),
        })
        .collect();

    for batch in 0..cfg.batches {
        let b = batch as u64;
        let shared = if cfg.shared_pairs {
            let mut rng = cfg.seed.stream_rng(Stream::Pairs, b, SHARED_PAIRS);
            let set = sampler.sample_pair_set(&cfg.sampling, &mut rng)?;
            Some(PreparedPairs::new(data, &set)?)
        } else {
            None
        };
        particles
            .par_iter_mut()
            .enumerate()
            .try_for_each(|(h, p)| -> Result<()> {
                let own;
                let pairs = match &shared {
                    Some(s) => s,
                    None => {
                        let mut rng = cfg.seed.stream_rng(Stream::Pairs, b, h as u64);
                        let set = sampler.sample_pair_set(&cfg.sampling, &mut rng)?;
                        own = PreparedPairs::new(data, &set)?;
                        &own
                    }
                };
                let mut rng = cfg.seed.stream_rng(Stream::Walk, h as u64, b);
                p.run_batch(pairs, cfg, &mut rng)
            })?;
    }

    let mut normals = Vec::with_capacity(dim * cfg.bits);
    let mut best_normals = Vec::new();
    let mut best_values = Vec::new();
    let mut report = TrainReport {
        acceptance_rates: Vec::with_capacity(cfg.bits),
        final_log_u: Vec::with_capacity(cfg.bits),
        trajectories: cfg.record_trajectory.then(Vec::new),
        best: None,
    };
    for p in particles {
        normals.extend_from_slice(&p.position);
        report.acceptance_rates.push(p.acceptance);
        report.final_log_u.push(p.log_u);
        if let Some(t) = &mut report.trajectories {
            t.push(p.trajectory);
        }
        if let Some((pos, val)) = p.best {
            best_normals.extend_from_slice(&pos);
            best_values.push(val);
        }
    }
    if cfg.track_best {
        report.best = Some((
            HyperplaneArrangement::from_flat_unchecked(dim, best_normals),
            best_values,
        ));
    }
    Ok((HyperplaneArrangement::from_flat_unchecked(dim, normals), report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::ObjectiveKind;
    use crate::pairs::{NegativeMethod, PairSet, PositiveMethod, SamplingMethods};
    use crate::synth::generate_gaussian_sign_dataset;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            bits: 16,
            batches: 2,
            steps_per_batch: 20,
            proposal_stddev: 0.05,
            objective: ObjectiveConfig::default(),
            sampling: SamplingConfig::balanced(
                SamplingMethods::new(PositiveMethod::Randomhit, NegativeMethod::Randommiss),
                200,
            ),
            seed: RngSeed(1),
            shared_pairs: true,
            track_best: false,
            record_trajectory: false,
        }
    }

    #[test]
    fn proposals_are_unit() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut x = crate::hashing::random_unit_vector(30, &mut rng);
        for _ in 0..100_000 {
            x = propose_move(&x, 0.01, &mut rng);
            assert!((vector::norm(&x) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn tiny_stddev_barely_moves() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = crate::hashing::random_unit_vector(5, &mut rng);
        let q = propose_move(&x, 1e-9, &mut rng);
        assert!(vector::dot(&x, &q) > 1.0 - 1e-12);
    }

    #[test]
    fn mean_displacement_matches_chi_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 30;
        let sigma = 0.01;
        let trials = 20_000;
        let mut total = 0.0;
        for _ in 0..trials {
            let x = crate::hashing::random_unit_vector(n, &mut rng);
            let q = propose_move(&x, sigma, &mut rng);
            total += vector::dot(&x, &q).clamp(-1.0, 1.0).acos();
        }
        let mean_angle = total / trials as f64;
        // Only the tangential part of g rotates, so to first order the angle
        // is chi-distributed with N−1 degrees of freedom:
        // E = σ·√2·Γ(15)/Γ(14.5). The full ‖g‖ (chi, N dof) is an upper bound.
        let chi_mean_29 = sigma * 5.338949609749488;
        let chi_mean_30 = sigma * 30f64.sqrt();
        assert!((mean_angle - chi_mean_29).abs() < 0.02 * chi_mean_29, "{mean_angle}");
        assert!(mean_angle < chi_mean_30);
    }

    #[test]
    fn uphill_is_always_accepted() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            assert!(metropolis_accept(0.0, &mut rng));
            assert!(metropolis_accept(rng.random::<f64>() * 10.0, &mut rng));
        }
        assert!(!metropolis_accept(f64::NEG_INFINITY, &mut rng));
    }

    #[test]
    fn constant_objective_accepts_everything() {
        let data = generate_gaussian_sign_dataset(20, RngSeed(0)).unwrap();
        let pairs = PreparedPairs::new(&data, &PairSet::default()).unwrap();
        let obj = ObjectiveConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut x = vec![1.0, 0.0, 0.0];
        for _ in 0..1000 {
            let s = mh_step(&x, 0.0, &pairs, &obj, 0.1, &mut rng).unwrap();
            assert!(s.accepted);
            x = s.next;
        }
    }

    #[test]
    fn rejected_step_keeps_position() {
        let data = generate_gaussian_sign_dataset(50, RngSeed(0)).unwrap();
        let set = crate::pairs::sample_pair_set(&data, &small_cfg().sampling, RngSeed(2)).unwrap();
        let pairs = PreparedPairs::new(&data, &set).unwrap();
        let obj = ObjectiveConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = vec![1.0, 0.0, 0.0];
        let mut rejected = 0;
        for _ in 0..200 {
            // Pretend the current state is far better than anything reachable.
            let s = mh_step(&x, 1e6, &pairs, &obj, 0.5, &mut rng).unwrap();
            assert!(!s.accepted);
            assert_eq!(s.next, x);
            assert_eq!(s.log_u, 1e6);
            rejected += 1;
        }
        assert_eq!(rejected, 200);
    }

    #[test]
    fn config_validation() {
        let mut c = small_cfg();
        c.steps_per_batch = 0;
        assert!(c.validate().is_err());
        let mut c = small_cfg();
        c.batches = 0;
        assert!(c.validate().is_err());
        let mut c = small_cfg();
        c.proposal_stddev = 0.0;
        assert!(c.validate().is_err());
        let mut c = small_cfg();
        c.bits = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn one_batch_one_step_takes_b_steps() {
        let data = generate_gaussian_sign_dataset(40, RngSeed(9)).unwrap();
        let mut c = small_cfg();
        c.batches = 1;
        c.steps_per_batch = 1;
        c.record_trajectory = true;
        let (arr, report) = train(&data, &c).unwrap();
        assert_eq!(arr.bits(), 16);
        let traj = report.trajectories.unwrap();
        assert_eq!(traj.len(), 16);
        assert!(traj.iter().all(|t| t.len() == 1));
        assert!(report.acceptance_rates.iter().all(|r| r.len() == 1 && (r[0] == 0.0 || r[0] == 1.0)));
    }

    #[test]
    fn training_is_deterministic_and_unit() {
        let data = generate_gaussian_sign_dataset(60, RngSeed(2)).unwrap();
        for shared in [true, false] {
            let mut c = small_cfg();
            c.shared_pairs = shared;
            let (a, ra) = train(&data, &c).unwrap();
            let (b, rb) = train(&data, &c).unwrap();
            assert_eq!(a, b);
            assert_eq!(ra, rb);
            for n in a.normals() {
                assert!((vector::norm(n) - 1.0).abs() < 1e-9);
            }
            assert!(ra.acceptance_rates.iter().flatten().all(|r| (0.0..=1.0).contains(r)));
        }
    }

    #[test]
    fn track_best_is_at_least_final() {
        let data = generate_gaussian_sign_dataset(60, RngSeed(2)).unwrap();
        let mut c = small_cfg();
        c.batches = 1;
        c.track_best = true;
        let (_, report) = train(&data, &c).unwrap();
        let (best, values) = report.best.unwrap();
        assert_eq!(best.bits(), c.bits);
        for (v, f) in values.iter().zip(&report.final_log_u) {
            assert!(v >= f);
        }
    }

    #[test]
    fn ratio_without_negatives_fails() {
        let data = LabeledDataset::new(
            2,
            vec![
                (vec![1.0, 0.0], crate::data::LabelSet::single("a")),
                (vec![0.0, 1.0], crate::data::LabelSet::single("a")),
            ],
        )
        .unwrap();
        let mut c = small_cfg();
        c.objective.kind = ObjectiveKind::Ratio;
        assert!(matches!(train(&data, &c), Err(Error::NoNegativePair)));
    }

    #[test]
    fn csv_reports() {
        let data = generate_gaussian_sign_dataset(30, RngSeed(2)).unwrap();
        let mut c = small_cfg();
        c.bits = 2;
        c.steps_per_batch = 3;
        c.record_trajectory = true;
        let (_, report) = train(&data, &c).unwrap();
        let mut buf = Vec::new();
        report.write_acceptance_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 * 2);
        let mut buf = Vec::new();
        report.write_trajectory_csv(&mut buf, 3).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 * 2 * 3);
        assert!(text.lines().nth(4).unwrap().starts_with("0,1,0,"));
    }
}
