use super::write_bytes;
use crate::{input_err, CliError, CliResult, SampleArgs};
use perfrnn_core::midi_io::write_smf_until;
use perfrnn_core::sample::{sample_sequence, stochastic_beam_search, SampleError};
use perfrnn_core::train::load_checkpoint;
use perfrnn_core::vocab::{decode, to_text};
use perfrnn_core::SamplerConfig;

pub fn run(args: &SampleArgs) -> CliResult {
    let ckpt = load_checkpoint(&args.checkpoint).map_err(input_err)?;
    let q = ckpt.training.quantization;
    let scfg = SamplerConfig {
        temperature: args.temperature,
        greedy: args.greedy,
        beam_width: args.beam_width,
        branch_factor: args.branch_factor,
        max_events: args.max_events,
        max_seconds: args.seconds,
        seed: args.seed,
        primer: Vec::new(),
    };
    scfg.validate().map_err(input_err)?;
    let result = if scfg.beam_width == 1 {
        sample_sequence(&ckpt.params, &scfg, &q)
    } else {
        stochastic_beam_search(&ckpt.params, &scfg, &q)
    };
    let mut seq = result.map_err(|e| match e {
        SampleError::InvalidConfig(_) => input_err(e),
        SampleError::Lstm(_) => CliError::Numeric(e.to_string()),
    })?;
    seq.meta.source = args.checkpoint.display().to_string();
    let perf = decode(&seq, &q, false).map_err(input_err)?;
    write_bytes(&args.output, write_smf_until(&perf.notes, None, perf.end_s))?;
    if let Some(path) = &args.events_out {
        write_bytes(path, to_text(&seq, &q).map_err(input_err)?)?;
    }
    println!(
        "{} events, {} notes, {:.3} s",
        seq.len(),
        perf.notes.len(),
        perf.end_s
    );
    Ok(())
}
