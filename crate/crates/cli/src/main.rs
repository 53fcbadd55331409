use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use conlearn::checks::{far_stages, verify_suite, Level};
use conlearn::demo::{analytic_target, demo_config, DemoLearner, DemoOrder, DEMO_SEEDS, QUOTED_TARGET};
use conlearn::output::read_metrics_csv;
use conlearn::runner::{fit_rates, median, run_experiment};
use conlearn::{ExperimentConfig, HarnessError, RunStatus};
use conlearn_core::Vector;

#[derive(Parser)]
#[command(name = "conlearn", version, about = "Continual-learning experiments and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Quick,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum OrderArg {
    Sequential,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum LearnerArg {
    Alg2,
    Sgd,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Run only this seed, overriding the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the verification suite.
    Verify {
        #[arg(long, value_enum, default_value = "quick")]
        level: LevelArg,
    },
    /// Run the three-meta drifting demo over five seeds (or one).
    DemoFigure2 {
        #[arg(long, value_enum, default_value = "random")]
        order: OrderArg,
        #[arg(long, value_enum, default_value = "alg2")]
        learner: LearnerArg,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "demo-figure2")]
        output: PathBuf,
    },
    /// Fit log-log rates to the series in a metrics CSV.
    Rates { csv: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, seed } => run(config, seed),
        Command::Verify { level } => verify(match level {
            LevelArg::Quick => Level::Quick,
            LevelArg::Full => Level::Full,
        }),
        Command::DemoFigure2 {
            order,
            learner,
            seed,
            output,
        } => {
            let order = match order {
                OrderArg::Sequential => DemoOrder::Sequential,
                OrderArg::Random => DemoOrder::Random,
            };
            let learner = match learner {
                LearnerArg::Alg2 => DemoLearner::Alg2,
                LearnerArg::Sgd => DemoLearner::Sgd,
            };
            demo(order, learner, seed, output)
        }
        Command::Rates { csv } => rates(csv),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(path: PathBuf, seed: Option<u64>) -> Result<bool, HarnessError> {
    let mut cfg = ExperimentConfig::load(&path)?;
    if let Some(s) = seed {
        cfg.stream.seed = s;
        cfg.replicate_seeds = vec![s];
    }
    let resolved = cfg.resolve()?;
    let (runs, summary) = run_experiment(&resolved)?;
    for r in &runs {
        let last = r.records.last();
        println!(
            "seed {}: {} t={} est_err_sq={:.4e} regret={:.4e} forgetting={:.4e}{}",
            r.seed,
            r.learner,
            r.final_state.t,
            r.final_state.w.distance_sq(&r.w_star),
            last.map_or(f64::NAN, |x| x.regret),
            last.map_or(f64::NAN, |x| x.forgetting),
            if r.status == RunStatus::Diverged { " (diverged)" } else { "" }
        );
    }
    for (name, e) in &summary.median_exponents {
        println!("median exponent {name}: {e:.4}");
    }
    println!("wrote {}", resolved.output.display());
    Ok(true)
}

fn verify(level: Level) -> Result<bool, HarnessError> {
    let outcomes = verify_suite(level, |o| println!("{o}"));
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("{} checks, {failed} failed", outcomes.len());
    Ok(failed == 0)
}

fn demo(order: DemoOrder, learner: DemoLearner, seed: Option<u64>, output: PathBuf) -> Result<bool, HarnessError> {
    let seeds: Vec<u64> = seed.map_or(DEMO_SEEDS.to_vec(), |s| vec![s]);
    let cfg = demo_config(&seeds, order, learner, output);
    let (runs, _) = run_experiment(&cfg)?;
    let target = analytic_target();
    let quoted = Vector::from_vec(QUOTED_TARGET.to_vec());
    let mut good = 0;
    for r in &runs {
        let w = &r.final_state.w;
        let d = w.distance_sq(&target).sqrt();
        let far = far_stages(r, &target);
        let ok = match learner {
            DemoLearner::Alg2 => d < 0.2,
            DemoLearner::Sgd => far >= 10,
        };
        good += ok as usize;
        println!(
            "seed {}: final w = [{:.4}, {:.4}], distance to [25/6, -1/6] {d:.4}, to [4, -1/6] {:.4}, stages > 0.5 away in last 50: {far}",
            r.seed,
            w[0],
            w[1],
            w.distance_sq(&quoted).sqrt()
        );
    }
    let need = if runs.len() >= 5 { 4 } else { runs.len() };
    println!(
        "{good}/{} seeds meet the {} criterion; outputs in {}",
        runs.len(),
        match learner {
            DemoLearner::Alg2 => "convergence",
            DemoLearner::Sgd => "oscillation",
        },
        cfg.output.display()
    );
    Ok(good >= need)
}

fn rates(path: PathBuf) -> Result<bool, HarnessError> {
    let rows = read_metrics_csv(&path)?;
    let mut by_seed: BTreeMap<u64, Vec<_>> = BTreeMap::new();
    for r in rows {
        by_seed.entry(r.seed).or_default().push(r.record);
    }
    let mut exps: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (seed, mut records) in by_seed {
        records.sort_by_key(|r| r.t);
        let (fits, errors) = fit_rates(&records);
        for (name, f) in &fits {
            println!(
                "seed {seed} {name}: exponent {:.4} (r² {:.3}, t in [{}, {}], {} points)",
                f.exponent, f.r_squared, f.window.0, f.window.1, f.points
            );
            exps.entry(name.clone()).or_default().push(f.exponent);
        }
        for (name, e) in &errors {
            println!("seed {seed} {name}: n/a ({e})");
        }
    }
    if exps.values().any(|v| v.len() > 1) {
        for (name, v) in exps {
            if let Some(m) = median(v) {
                println!("median {name}: {m:.4}");
            }
        }
    }
    Ok(true)
}
