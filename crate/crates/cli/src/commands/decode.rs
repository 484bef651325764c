use super::{read_bytes, write_bytes};
use crate::{input_err, CliResult, DecodeArgs};
use perfrnn_core::midi_io::write_smf_until;
use perfrnn_core::vocab::{decode, from_text};

pub fn run(args: &DecodeArgs) -> CliResult {
    let q = args.codec.quantization();
    let bytes = read_bytes(&args.events)?;
    let text = String::from_utf8(bytes).map_err(|_| input_err(format!("{}: not UTF-8", args.events.display())))?;
    let seq = from_text(&text, &q).map_err(|e| input_err(format!("{}: {e}", args.events.display())))?;
    let perf = decode(&seq, &q, args.strict).map_err(|e| input_err(format!("{}: {e}", args.events.display())))?;
    write_bytes(&args.output, write_smf_until(&perf.notes, None, perf.end_s))?;
    if perf.repairs.total() > 0 {
        eprintln!("warning: {} malformed events repaired", perf.repairs.total());
    }
    println!("{} notes, {:.3} s", perf.notes.len(), perf.end_s);
    Ok(())
}
