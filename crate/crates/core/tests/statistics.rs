//! Monte Carlo checks of the data model against the learners' assumptions.

use conlearn_core::losses::LossFamily;
use conlearn_core::metrics::{optimal_loss, StageAverage};
use conlearn_core::models::{generate_task, FeatureRegime, NoiseSpec, SeedKey};
use conlearn_core::streams::{build_stream, CaseSpec, StreamSpec, TaskOrder};
use conlearn_core::Vector;

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn g1_at_truth(family: LossFamily, noise: NoiseSpec) -> Vec<f64> {
    let w = Vector::from_vec(vec![0.8, -0.4, 0.3]);
    let regime = FeatureRegime::BoundedUniform { radius: 1.5 };
    let mut out = Vec::with_capacity(100_000);
    for k in 0..100u64 {
        let task = generate_task(&family, &w, 1000, &regime, &noise, SeedKey::new(2024, k)).unwrap();
        for (x, y) in task.samples() {
            out.push(family.g1(x.dot(&w), y).unwrap());
        }
    }
    out
}

#[test]
fn score_is_centered_at_the_truth_linear() {
    let g = g1_at_truth(LossFamily::Linear, NoiseSpec::Gaussian { sigma: 0.7 });
    let (m, se) = mean_and_se(&g);
    assert!(m.abs() <= 3.0 * se, "mean {m}, se {se}");
}

#[test]
fn score_is_centered_at_the_truth_heavy_tails() {
    let g = g1_at_truth(LossFamily::Linear, NoiseSpec::StudentT { dof: 3.0, scale: 0.5 });
    let (m, se) = mean_and_se(&g);
    assert!(m.abs() <= 3.0 * se, "mean {m}, se {se}");
}

#[test]
fn score_is_centered_at_the_truth_logistic() {
    let g = g1_at_truth(LossFamily::Logistic, NoiseSpec::Gaussian { sigma: 1.0 });
    let (m, se) = mean_and_se(&g);
    assert!(m.abs() <= 3.0 * se, "mean {m}, se {se}");
}

#[test]
fn optimal_loss_matches_noise_level() {
    // ℒ*_t per task ≈ n σ² / 2 for the squared loss at the generating parameter.
    let (sigma, n, m) = (0.5, 10usize, 4000usize);
    let spec = StreamSpec {
        case: CaseSpec::Shared {
            w_star: Vector::from_vec(vec![1.0, -2.0]),
        },
        dim: 2,
        num_tasks: m,
        samples_per_task: n,
        family: LossFamily::Linear,
        regime: FeatureRegime::BoundedUniform { radius: 1.0 },
        noise: NoiseSpec::Gaussian { sigma },
        logistic_observation: Default::default(),
        order: TaskOrder::Sequential,
        seed: 5,
    };
    let stream = build_stream(&spec).unwrap();
    let fam = LossFamily::Linear;
    let per_task: Vec<f64> = stream
        .tasks
        .iter()
        .map(|t| optimal_loss(std::slice::from_ref(t), &stream.w_star, &fam).unwrap())
        .collect();
    let (mean, se) = mean_and_se(&per_task);
    let expected = n as f64 * sigma * sigma / 2.0;
    assert!((mean - expected).abs() <= 3.0 * se, "{mean} vs {expected} (se {se})");

    let mut acc = StageAverage::new();
    for (k, t) in stream.tasks.iter().enumerate() {
        acc.observe(k + 1, &stream.w_star, t, &fam).unwrap();
    }
    let batch = optimal_loss(&stream.tasks, &stream.w_star, &fam).unwrap();
    assert!((acc.value() - batch).abs() <= 1e-10 * batch);
}
