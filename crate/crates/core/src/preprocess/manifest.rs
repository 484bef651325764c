//! Dataset manifest.
//!
//! ```text
//! # perfrnn manifest v1
//! # root=/data/piano
//! # clip_len_s=30
//! # extend_pedal=false
//! # heldout_fraction=0.1
//! # segment_len_s=15
//! # augmentation=less
//! # combination=cross
//! chopin/op10no1.mid<TAB>0<TAB>train
//! chopin/op10no1.mid<TAB>1<TAB>train
//! ```
//!
//! Each entry names a source file relative to `root`, a clip index into that
//! file's split, and a split tag. The split is a function of the source path
//! only, so every clip of a performance lands on the same side.

use super::{clips_from_smf, AugmentationMode, AugmentationPolicy, Clip, Combination, PreprocessError};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Heldout,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Heldout => "heldout",
        }
    }
}

/// Deterministic split of a source id: held out when its CRC-32, read as a
/// fraction of 2³², is below `heldout_fraction`.
pub fn heldout_split(source: &str, heldout_fraction: f64) -> Split {
    let h = crc32fast::hash(source.as_bytes()) as f64 / 4_294_967_296.0;
    if h < heldout_fraction {
        Split::Heldout
    } else {
        Split::Train
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub source: String,
    pub clip_index: usize,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestClip {
    pub clip: Clip,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub root: PathBuf,
    pub clip_len_s: f64,
    pub extend_pedal: bool,
    pub heldout_fraction: f64,
    /// Training crop length recorded at preparation time.
    pub segment_len_s: f64,
    pub augmentation: AugmentationPolicy,
    pub entries: Vec<ManifestEntry>,
}

const MAGIC_LINE: &str = "# perfrnn manifest v1";

/// Default training crop length.
pub const DEFAULT_SEGMENT_LEN_S: f64 = 15.0;

fn mode_name(m: AugmentationMode) -> &'static str {
    match m {
        AugmentationMode::None => "none",
        AugmentationMode::Less => "less",
        AugmentationMode::More => "more",
    }
}

fn combination_name(c: Combination) -> &'static str {
    match c {
        Combination::Cross => "cross",
        Combination::Union => "union",
    }
}

impl Manifest {
    pub fn new(root: impl Into<PathBuf>, clip_len_s: f64, extend_pedal: bool, heldout_fraction: f64) -> Self {
        Self {
            root: root.into(),
            clip_len_s,
            extend_pedal,
            heldout_fraction,
            segment_len_s: DEFAULT_SEGMENT_LEN_S,
            augmentation: AugmentationPolicy::default(),
            entries: Vec::new(),
        }
    }

    /// Adds one entry per clip, split by the source id.
    pub fn add_clips(&mut self, source: &str, clips: &[Clip]) {
        let split = heldout_split(source, self.heldout_fraction);
        self.entries.extend(clips.iter().map(|c| ManifestEntry {
            source: source.to_string(),
            clip_index: c.index,
            split,
        }));
    }

    pub fn count(&self, split: Split) -> usize {
        self.entries.iter().filter(|e| e.split == split).count()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC_LINE}");
        let _ = writeln!(out, "# root={}", self.root.display());
        let _ = writeln!(out, "# clip_len_s={}", self.clip_len_s);
        let _ = writeln!(out, "# extend_pedal={}", self.extend_pedal);
        let _ = writeln!(out, "# heldout_fraction={}", self.heldout_fraction);
        let _ = writeln!(out, "# segment_len_s={}", self.segment_len_s);
        let _ = writeln!(out, "# augmentation={}", mode_name(self.augmentation.mode));
        let _ = writeln!(out, "# combination={}", combination_name(self.augmentation.combination));
        for e in &self.entries {
            let _ = writeln!(out, "{}\t{}\t{}", e.source, e.clip_index, e.split.as_str());
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, PreprocessError> {
        let err = |line: usize, reason: String| PreprocessError::Manifest { line, reason };
        let mut manifest = Manifest::new(PathBuf::new(), super::CLIP_LEN_S, false, 0.0);
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            if let Some(comment) = line.strip_prefix('#') {
                let Some((key, value)) = comment.split_once('=') else {
                    continue;
                };
                let value = value.trim();
                match key.trim() {
                    "root" => manifest.root = PathBuf::from(value),
                    "clip_len_s" => {
                        manifest.clip_len_s = value
                            .parse()
                            .map_err(|_| err(lineno, format!("bad clip_len_s {value:?}")))?
                    }
                    "extend_pedal" => {
                        manifest.extend_pedal = value
                            .parse()
                            .map_err(|_| err(lineno, format!("bad extend_pedal {value:?}")))?
                    }
                    "heldout_fraction" => {
                        manifest.heldout_fraction = value
                            .parse()
                            .map_err(|_| err(lineno, format!("bad heldout_fraction {value:?}")))?
                    }
                    "segment_len_s" => {
                        manifest.segment_len_s = value
                            .parse()
                            .map_err(|_| err(lineno, format!("bad segment_len_s {value:?}")))?
                    }
                    "augmentation" => {
                        manifest.augmentation.mode = match value {
                            "none" => AugmentationMode::None,
                            "less" => AugmentationMode::Less,
                            "more" => AugmentationMode::More,
                            _ => return Err(err(lineno, format!("bad augmentation {value:?}"))),
                        }
                    }
                    "combination" => {
                        manifest.augmentation.combination = match value {
                            "cross" => Combination::Cross,
                            "union" => Combination::Union,
                            _ => return Err(err(lineno, format!("bad combination {value:?}"))),
                        }
                    }
                    _ => {}
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [source, index, split] = fields[..] else {
                return Err(err(lineno, format!("expected 3 tab-separated fields, got {}", fields.len())));
            };
            let clip_index = index
                .trim()
                .parse()
                .map_err(|_| err(lineno, format!("bad clip index {index:?}")))?;
            let split = match split.trim() {
                "train" => Split::Train,
                "heldout" => Split::Heldout,
                other => return Err(err(lineno, format!("unknown split {other:?}"))),
            };
            manifest.entries.push(ManifestEntry {
                source: source.to_string(),
                clip_index,
                split,
            });
        }
        Ok(manifest)
    }

    pub fn load(path: &Path) -> Result<Self, PreprocessError> {
        let text = std::fs::read_to_string(path).map_err(|source| PreprocessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), PreprocessError> {
        std::fs::write(path, self.to_text()).map_err(|source| PreprocessError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Re-reads every referenced file and returns the listed clips in
    /// manifest order.
    pub fn load_clips(&self) -> Result<Vec<ManifestClip>, PreprocessError> {
        let mut by_source: BTreeMap<&str, Vec<Clip>> = BTreeMap::new();
        for e in &self.entries {
            if by_source.contains_key(e.source.as_str()) {
                continue;
            }
            let path = self.root.join(&e.source);
            let bytes = std::fs::read(&path).map_err(|source| PreprocessError::Io {
                path: path.clone(),
                source,
            })?;
            let clips = clips_from_smf(&bytes, &e.source, self.clip_len_s, self.extend_pedal)?;
            by_source.insert(&e.source, clips);
        }
        self.entries
            .iter()
            .enumerate()
            .map(|(i, e)| {
                by_source[e.source.as_str()]
                    .iter()
                    .find(|c| c.index == e.clip_index)
                    .map(|c| ManifestClip {
                        clip: c.clone(),
                        split: e.split,
                    })
                    .ok_or_else(|| PreprocessError::Manifest {
                        line: i + 1,
                        reason: format!("{} has no clip {}", e.source, e.clip_index),
                    })
            })
            .collect()
    }
}
