use super::{Clip, PreprocessError};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::ops::RangeInclusive;

/// Transpositions of the light policy: up and down to a major third.
pub const LESS_TRANSPOSITIONS: [i8; 8] = [-4, -3, -2, -1, 1, 2, 3, 4];
/// Stretches of the light policy: ±2.5% and ±5%.
pub const LESS_STRETCHES: [f64; 4] = [0.95, 0.975, 1.025, 1.05];
/// Transpositions of the heavy policy: a full octave of offsets.
pub const MORE_TRANSPOSITIONS: [i8; 11] = [-6, -5, -4, -3, -2, -1, 1, 2, 3, 4, 5];
/// Heavy-policy stretch factors are drawn uniformly from this range.
pub const MORE_STRETCH_RANGE: RangeInclusive<f64> = 0.9..=1.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AugmentationMode {
    /// No augmentation; the clip is used as is.
    None,
    #[default]
    Less,
    More,
}

/// How transpositions and stretches combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combination {
    /// Every transposition paired with every stretch.
    #[default]
    Cross,
    /// Transpositions and stretches applied separately, never together.
    Union,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AugmentationPolicy {
    pub mode: AugmentationMode,
    pub combination: Combination,
}

impl AugmentationPolicy {
    pub fn new(mode: AugmentationMode) -> Self {
        Self {
            mode,
            combination: Combination::Cross,
        }
    }

    fn transpositions(&self) -> Vec<i8> {
        let set: &[i8] = match self.mode {
            AugmentationMode::None => &[],
            AugmentationMode::Less => &LESS_TRANSPOSITIONS,
            AugmentationMode::More => &MORE_TRANSPOSITIONS,
        };
        std::iter::once(0).chain(set.iter().copied()).collect()
    }

    fn draw_stretch<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.mode {
            AugmentationMode::None => 1.0,
            AugmentationMode::Less => {
                let i = rng.random_range(0..=LESS_STRETCHES.len());
                if i == 0 {
                    1.0
                } else {
                    LESS_STRETCHES[i - 1]
                }
            }
            AugmentationMode::More => rng.random_range(MORE_STRETCH_RANGE),
        }
    }

    /// Draws one variant of the clip: a random (valid) transposition and a
    /// random stretch, respecting the combination rule.
    pub fn sample_variant<R: Rng + ?Sized>(&self, clip: &Clip, rng: &mut R) -> Clip {
        if self.mode == AugmentationMode::None {
            return clip.clone();
        }
        let valid: Vec<i8> = self
            .transpositions()
            .into_iter()
            .filter(|&k| transposition_fits(clip, k))
            .collect();
        let (shift, factor) = match self.combination {
            Combination::Cross => {
                let k = valid[rng.random_range(0..valid.len())];
                (k, self.draw_stretch(rng))
            }
            Combination::Union => {
                // Uniform over the enumerated union: transpositions (original
                // included), then the stretched originals.
                let stretches = match self.mode {
                    AugmentationMode::Less => LESS_STRETCHES.len(),
                    _ => 1,
                };
                let i = rng.random_range(0..valid.len() + stretches);
                if i < valid.len() {
                    (valid[i], 1.0)
                } else if self.mode == AugmentationMode::Less {
                    (0, LESS_STRETCHES[i - valid.len()])
                } else {
                    (0, rng.random_range(MORE_STRETCH_RANGE))
                }
            }
        };
        let transposed = transpose(clip, shift).expect("transposition pre-checked");
        time_stretch(&transposed, factor).expect("policy stretches are in range")
    }
}

fn transposition_fits(clip: &Clip, semitones: i8) -> bool {
    clip.notes.iter().all(|n| {
        let p = n.pitch as i16 + semitones as i16;
        (0..=127).contains(&p)
    })
}

/// Shifts every pitch by `semitones`. Returns `None` (the variant is
/// rejected) if any pitch would leave 0..=127.
pub fn transpose(clip: &Clip, semitones: i8) -> Option<Clip> {
    if !transposition_fits(clip, semitones) {
        return None;
    }
    let mut out = clip.clone();
    for n in &mut out.notes {
        n.pitch = (n.pitch as i16 + semitones as i16) as u8;
    }
    Some(out)
}

/// Scales all note times and the clip duration by `factor`.
pub fn time_stretch(clip: &Clip, factor: f64) -> Result<Clip, PreprocessError> {
    if !(0.5..=2.0).contains(&factor) {
        return Err(PreprocessError::FactorOutOfRange(factor));
    }
    let mut out = clip.clone();
    if factor != 1.0 {
        for n in &mut out.notes {
            n.onset_s *= factor;
            n.offset_s *= factor;
        }
        out.duration_s *= factor;
    }
    Ok(out)
}

/// All variants of a clip under a policy, the original included.
///
/// Light policy, cross mode: 9 transpositions (original + 8) times 5
/// stretches (original + 4), minus rejected transpositions. Heavy policy:
/// 12 transpositions, each stretched by a factor drawn from 0.9..=1.1.
pub fn enumerate_augmentations<R: Rng + ?Sized>(
    clip: &Clip,
    policy: &AugmentationPolicy,
    rng: &mut R,
) -> Vec<Clip> {
    let transposed: Vec<Clip> = policy
        .transpositions()
        .into_iter()
        .filter_map(|k| transpose(clip, k))
        .collect();
    let stretch = |c: &Clip, f: f64| time_stretch(c, f).expect("policy stretches are in range");

    match (policy.mode, policy.combination) {
        (AugmentationMode::None, _) => vec![clip.clone()],
        (AugmentationMode::Less, Combination::Cross) => transposed
            .iter()
            .flat_map(|c| {
                std::iter::once(1.0)
                    .chain(LESS_STRETCHES)
                    .map(move |f| stretch(c, f))
            })
            .collect(),
        (AugmentationMode::Less, Combination::Union) => transposed
            .into_iter()
            .chain(LESS_STRETCHES.iter().map(|&f| stretch(clip, f)))
            .collect(),
        (AugmentationMode::More, Combination::Cross) => transposed
            .iter()
            .map(|c| stretch(c, rng.random_range(MORE_STRETCH_RANGE)))
            .collect(),
        (AugmentationMode::More, Combination::Union) => {
            let f = rng.random_range(MORE_STRETCH_RANGE);
            let mut out = transposed;
            out.push(stretch(clip, f));
            out
        }
    }
}
