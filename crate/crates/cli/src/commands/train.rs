use super::given;
use crate::{input_err, CliError, CliResult, TrainArgs};
use clap::ArgMatches;
use perfrnn_core::preprocess::{Clip, Manifest, Split};
use perfrnn_core::train::{
    load_checkpoint, read_records, save_checkpoint, LogRecord, TrainError, TrainSession, TrainingLog,
};
use perfrnn_core::{ModelConfig, TrainingConfig};
use std::path::{Path, PathBuf};
use std::time::Instant;

fn train_err(e: TrainError) -> CliError {
    match e {
        TrainError::NonFiniteLoss { .. } | TrainError::Lstm(_) => CliError::Numeric(e.to_string()),
        _ => input_err(e),
    }
}

fn default_log_path(ckpt: &Path) -> PathBuf {
    let mut s = ckpt.as_os_str().to_owned();
    s.push(".log.csv");
    PathBuf::from(s)
}

/// Flags win over the manifest's recorded segment length and augmentation
/// only when given explicitly.
fn training_config(args: &TrainArgs, manifest: &Manifest, matches: &ArgMatches) -> TrainingConfig {
    let mut augmentation = manifest.augmentation;
    if given(matches, "augmentation") {
        augmentation.mode = args.augmentation.into();
    }
    if given(matches, "combination") {
        augmentation.combination = args.combination.into();
    }
    TrainingConfig {
        batch_size: args.batch_size,
        learning_rate: args.learning_rate,
        grad_clip_norm: args.grad_clip_norm,
        max_steps: args.max_steps,
        eval_interval: args.eval_interval,
        segment_len_s: if given(matches, "segment_len_s") {
            args.segment_len_s
        } else {
            manifest.segment_len_s
        },
        seed: args.seed,
        augmentation,
        quantization: args.codec.quantization(),
    }
}

fn split_clips(manifest: &Manifest) -> Result<(Vec<Clip>, Vec<Clip>), CliError> {
    let (mut train, mut heldout) = (Vec::new(), Vec::new());
    for c in manifest.load_clips().map_err(input_err)? {
        match c.split {
            Split::Train => train.push(c.clip),
            Split::Heldout => heldout.push(c.clip),
        }
    }
    Ok((train, heldout))
}

fn save(session: &TrainSession, path: &Path) -> CliResult {
    save_checkpoint(&session.checkpoint(), path).map_err(input_err)
}

pub fn run(args: &TrainArgs, matches: &ArgMatches) -> CliResult {
    let manifest = Manifest::load(&args.manifest).map_err(input_err)?;
    let (train, heldout) = split_clips(&manifest)?;
    if train.is_empty() {
        return Err(CliError::Input(format!("{}: no training clips", args.manifest.display())));
    }
    let log_path = args.log.clone().unwrap_or_else(|| default_log_path(&args.checkpoint));

    let resuming = args.resume && args.checkpoint.exists();
    let (mut session, mut log, wall_offset) = if resuming {
        let ckpt = load_checkpoint(&args.checkpoint).map_err(input_err)?;
        let mut session = TrainSession::from_checkpoint(ckpt);
        session.config.max_steps = args.max_steps;
        session.config.eval_interval = args.eval_interval;
        let offset = std::fs::read_to_string(&log_path)
            .map(|t| {
                read_records(&t)
                    .iter()
                    .filter(|r| r.step <= session.step)
                    .map(|r| r.wallclock_s)
                    .fold(0.0, f64::max)
            })
            .unwrap_or(0.0);
        let log = TrainingLog::resume(&log_path, session.step).map_err(input_err)?;
        println!("resuming at step {}", session.step);
        (session, log, offset)
    } else {
        let model = ModelConfig::new(args.layers, args.cells, args.codec.quantization().vocab_size());
        model.validate().map_err(input_err)?;
        let config = training_config(args, &manifest, matches);
        let session = TrainSession::new(model, config).map_err(train_err)?;
        let log = TrainingLog::create(&log_path).map_err(input_err)?;
        (session, log, 0.0)
    };
    save(&session, &args.checkpoint)?;

    let cfg = session.config;
    println!(
        "{} train clips, {} heldout; {}x{} LSTM, {} parameters",
        train.len(),
        heldout.len(),
        session.model.num_layers,
        session.model.cells_per_layer,
        session.model.parameter_count()
    );
    let start = Instant::now();
    while session.step < cfg.max_steps {
        let stats = session.step(&train).map_err(train_err)?;
        let step = session.step;
        let heldout_loss = if cfg.eval_interval > 0 && step % cfg.eval_interval == 0 && !heldout.is_empty() {
            Some(session.evaluate(&heldout).map_err(train_err)?)
        } else {
            None
        };
        let record = LogRecord {
            step,
            train_loss: stats.mean_loss,
            heldout_loss,
            wallclock_s: wall_offset + start.elapsed().as_secs_f64(),
        };
        log.append(&record).map_err(input_err)?;
        if let Some(h) = heldout_loss {
            println!("step {step}: train {:.4} heldout {h:.4} nats", stats.mean_loss);
        }
        if step == cfg.max_steps || (args.checkpoint_interval > 0 && step % args.checkpoint_interval == 0) {
            save(&session, &args.checkpoint)?;
        }
    }
    println!("done at step {}", session.step);
    Ok(())
}
