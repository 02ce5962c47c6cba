//! Trains unpruned and pruned federations on a planted-topic corpus and
//! prints the final accuracy and simulated time of each.
//!
//! `cargo run --release -p fedtopic --example synthetic_run -- [rounds] [hidden]`

use std::time::Instant;

use fedtopic::corpus::train_test_split;
use fedtopic::synthetic::{generate, SyntheticSpec};
use fedtopic::{federation, FederationConfig, ModelConfig, PruneSchedule, ScheduleKind};

fn main() -> fedtopic::Result<()> {
    let mut args = std::env::args().skip(1);
    let rounds: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(100);
    let hidden: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(100);

    let corpus = generate(&SyntheticSpec::new(2000, 200, 5, 7))?;
    let (train, test) = train_test_split(&corpus, 0.2, 7)?;
    let mut model = ModelConfig::new(200, 5);
    model.hidden_sizes = vec![hidden, hidden];

    let runs = [
        ("unpruned", None),
        ("normal-0.2", Some(ScheduleKind::Normal)),
        ("fast-0.2", Some(ScheduleKind::fast())),
    ];
    for (label, kind) in runs {
        let mut cfg = FederationConfig::new(model.clone(), rounds);
        cfg.eval_interval = (rounds / 5).max(1);
        cfg.seed = 7;
        cfg.schedule = kind.map(|kind| PruneSchedule {
            kind,
            final_density: 0.2,
            total_rounds: rounds,
            prune_interval: FederationConfig::default_prune_interval(rounds),
        });
        let start = Instant::now();
        let run = federation::run_federation(&cfg, &train, &test)?;
        for r in run.reports.iter().filter(|r| r.metrics.is_some()) {
            let m = r.metrics.expect("filtered");
            println!(
                "{label:>12}  round {:>4}  loss {:.2}  acc {:.3}  coherence {:.3}  diversity {:.3}",
                r.round,
                r.mean_loss,
                m.accuracy.unwrap_or(f64::NAN),
                m.coherence,
                m.diversity
            );
        }
        let last = run.reports.last().expect("at least one round");
        let acc = last.metrics.and_then(|m| m.accuracy).unwrap_or(f64::NAN);
        println!(
            "{label:>12}  acc {acc:.3}  density {:.3}  sim_time {:.3}s  loss {:.2}  wall {:.1}s",
            last.density,
            last.cum_time_s,
            last.mean_loss,
            start.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
