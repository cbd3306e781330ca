//! Desk-scale end-to-end run on a freshly generated synthetic corpus.
//!
//! ```text
//! cargo run --release -p pathovox --example desk_run -- [epochs] [lr] [seed]
//! ```

use std::time::Instant;

use pathovox::architecture::build_model;
use pathovox::config::RunConfig;
use pathovox::dataset::{generate_synthetic_corpus, SynthSpec};
use pathovox::nn::Rng;
use pathovox::trainer::{evaluate_split, load_segments, train_segmented_with};
use pathovox::Label;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).map_or(Ok(30), |s| s.parse())?;
    let mut run = RunConfig::desk_scale();
    let lr: f64 = args.get(2).map_or(Ok(run.train.initial_lr), |s| s.parse())?;
    let seed: u64 = args.get(3).map_or(Ok(1), |s| s.parse())?;

    let dir = std::env::temp_dir().join(format!("pathovox-desk-{seed}"));
    let spec = SynthSpec {
        n_healthy: 80,
        n_pathological: 80,
        seed,
        ..SynthSpec::default()
    };
    let manifest = generate_synthetic_corpus(&spec, &dir)?;
    let frame = run.frame;
    let files: Vec<(std::path::PathBuf, Label)> =
        manifest.entries.iter().map(|e| (manifest.resolve(e), e.label)).collect();
    // interleave classes: 50/15/15 per class
    let pick = |range: std::ops::Range<usize>| -> Vec<(std::path::PathBuf, Label)> {
        range.flat_map(|i| [files[i].clone(), files[80 + i].clone()]).collect()
    };
    let train = load_segments(&pick(0..50), &frame)?;
    let val = load_segments(&pick(50..65), &frame)?;
    let test = load_segments(&pick(65..80), &frame)?;

    run.train.max_epochs = epochs;
    run.train.seed = seed;
    run.train.initial_lr = lr;
    let model = build_model(&run.model, &mut Rng::new(seed))?;
    let cfg = run.train_config();
    let start = Instant::now();
    let outcome = train_segmented_with(model, &train, &val, &cfg, |log| {
        println!(
            "epoch {:>2} train {:.4}/{:.3} val {:.4}/{:.3} lr {:.1e} {:.1}s",
            log.epoch, log.train_loss, log.train_accuracy, log.val_loss, log.val_accuracy, log.learning_rate, log.seconds
        );
        if log.val_accuracy >= 0.9 {
            std::ops::ControlFlow::Break(())
        } else {
            std::ops::ControlFlow::Continue(())
        }
    })?;
    let eval = evaluate_split(&outcome.model, &test)?;
    println!(
        "best epoch {} test accuracy {:.3} total {:.1}s",
        outcome.best_epoch,
        eval.accuracy(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
