use super::{read_bytes, write_bytes};
use crate::{input_err, CliResult, EncodeArgs};
use perfrnn_core::midi_io::{extract_performance, parse_smf};
use perfrnn_core::preprocess::extend_with_pedal;
use perfrnn_core::vocab::{encode, to_text};

pub fn run(args: &EncodeArgs) -> CliResult {
    let q = args.codec.quantization();
    let bytes = read_bytes(&args.midi)?;
    let file = parse_smf(&bytes).map_err(|e| input_err(format!("{}: {e}", args.midi.display())))?;
    let perf = extract_performance(&file);
    if perf.diagnostics.total() > 0 {
        eprintln!("warning: {} irregular MIDI events repaired", perf.diagnostics.total());
    }
    let notes = if args.extend_pedal {
        extend_with_pedal(&perf.notes, &perf.pedals)
    } else {
        perf.notes
    };
    let mut seq = encode(&notes, &q);
    seq.meta.source = args.midi.display().to_string();
    let text = to_text(&seq, &q).map_err(input_err)?;
    write_bytes(&args.output, text)?;
    println!("{} events, {:.3} s", seq.len(), seq.meta.duration_s);
    Ok(())
}
