use super::read_bytes;
use crate::{input_err, CliError, CliResult, PrepArgs};
use perfrnn_core::preprocess::{clips_from_smf, AugmentationPolicy, Manifest, Split};
use std::path::{Path, PathBuf};
use walkdir::WalkDir;

/// `.mid`/`.midi` files under `root`, sorted, as paths relative to it.
pub fn midi_files(root: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(input_err)?;
        let is_midi = entry
            .path()
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("mid") || e.eq_ignore_ascii_case("midi"));
        if entry.file_type().is_file() && is_midi {
            out.push(entry.path().strip_prefix(root).unwrap_or(entry.path()).to_path_buf());
        }
    }
    Ok(out)
}

/// Manifest source id: the relative path with `/` separators.
fn source_id(rel: &Path) -> String {
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

fn validate(args: &PrepArgs) -> CliResult {
    let bad = |m: &str| Err(CliError::Input(m.to_string()));
    if !(args.clip_len_s > 0.0 && args.clip_len_s.is_finite()) {
        return bad("--clip-len-s must be positive");
    }
    if !(args.segment_len_s > 0.0 && args.segment_len_s <= args.clip_len_s) {
        return bad("--segment-len-s must be positive and at most --clip-len-s");
    }
    if !(0.0..=1.0).contains(&args.heldout_fraction) {
        return bad("--heldout-fraction must lie in [0, 1]");
    }
    Ok(())
}

pub fn run(args: &PrepArgs) -> CliResult {
    validate(args)?;
    let root = std::fs::canonicalize(&args.corpus)
        .map_err(|e| input_err(format!("{}: {e}", args.corpus.display())))?;
    let mut manifest = Manifest::new(&root, args.clip_len_s, args.extend_pedal, args.heldout_fraction);
    manifest.segment_len_s = args.segment_len_s;
    manifest.augmentation = AugmentationPolicy {
        mode: args.augmentation.into(),
        combination: args.combination.into(),
    };
    let files = midi_files(&root)?;
    let mut used = 0usize;
    for rel in &files {
        let source = source_id(rel);
        let bytes = read_bytes(&root.join(rel))?;
        match clips_from_smf(&bytes, &source, args.clip_len_s, args.extend_pedal) {
            Ok(clips) if !clips.is_empty() => {
                manifest.add_clips(&source, &clips);
                used += 1;
            }
            Ok(_) => eprintln!("warning: {source}: no notes, skipped"),
            Err(e) => eprintln!("warning: {source}: {e}, skipped"),
        }
    }
    if manifest.entries.is_empty() {
        return Err(CliError::Input(format!(
            "{}: no usable MIDI files ({} found)",
            args.corpus.display(),
            files.len()
        )));
    }
    manifest.save(&args.manifest).map_err(input_err)?;
    println!(
        "{used} files, {} clips: {} train, {} heldout",
        manifest.entries.len(),
        manifest.count(Split::Train),
        manifest.count(Split::Heldout)
    );
    Ok(())
}
