use super::given;
use crate::{input_err, CliError, CliResult, EvalArgs};
use clap::ArgMatches;
use perfrnn_core::preprocess::{Manifest, Split};
use perfrnn_core::train::{evaluate_report, load_checkpoint, TrainError};
use perfrnn_core::TrainingConfig;

/// Model label: `RNN` with `-NV` (no velocity), `-SUS` (pedal extension)
/// and `-30s` (30-second segments) suffixes.
pub fn label(cfg: &TrainingConfig, extend_pedal: bool) -> String {
    let mut s = String::from("RNN");
    if !cfg.quantization.has_velocity() {
        s.push_str("-NV");
    }
    if extend_pedal {
        s.push_str("-SUS");
    }
    if cfg.segment_len_s == 30.0 {
        s.push_str("-30s");
    }
    s
}

pub fn run(args: &EvalArgs, matches: &ArgMatches) -> CliResult {
    let ckpt = load_checkpoint(&args.checkpoint).map_err(input_err)?;
    let manifest = Manifest::load(&args.manifest).map_err(input_err)?;
    let heldout: Vec<_> = manifest
        .load_clips()
        .map_err(input_err)?
        .into_iter()
        .filter(|c| c.split == Split::Heldout)
        .map(|c| c.clip)
        .collect();
    if heldout.is_empty() {
        return Err(CliError::Input(format!("{}: no heldout clips", args.manifest.display())));
    }
    let mut cfg = ckpt.training;
    if given(matches, "segment_len_s") {
        cfg.segment_len_s = args.segment_len_s;
    }
    let report = evaluate_report(&ckpt.params, &heldout, &cfg).map_err(|e| match e {
        TrainError::Lstm(_) => CliError::Numeric(e.to_string()),
        _ => input_err(e),
    })?;
    if !report.mean_loss.is_finite() {
        return Err(CliError::Numeric(format!("loss is {}", report.mean_loss)));
    }
    println!(
        "{:<12} {:.4} nats per time step (heldout: {} clips, {} steps, checkpoint step {})",
        label(&cfg, manifest.extend_pedal),
        report.mean_loss,
        report.sequences,
        report.predictions,
        ckpt.step
    );
    Ok(())
}
