//! Synthetic clean videos with controllable patch recurrence and exactly
//! known toroidal motion, plus frame and sequence I/O.

pub mod pnm;
pub mod texture;

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RfrError};
use crate::frame::Frame;
use crate::rng::{self, domain};

pub use pnm::{load_frame, save_frame};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecurrenceLevel {
    High,
    Medium,
    Unique,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoSequence {
    pub frames: Vec<Frame>,
    /// Cumulative displacement of each frame relative to the first one.
    pub motion: Option<Vec<(i64, i64)>>,
    pub recurrence_level: RecurrenceLevel,
}

impl VideoSequence {
    pub fn new(frames: Vec<Frame>, motion: Option<Vec<(i64, i64)>>, recurrence_level: RecurrenceLevel) -> Result<Self> {
        if let Some(first) = frames.first() {
            if let Some(bad) = frames.iter().find(|f| f.shape() != first.shape()) {
                return Err(RfrError::shape("VideoSequence", first.shape(), bad.shape()));
            }
        }
        if let Some(m) = &motion {
            if m.len() != frames.len() {
                return Err(RfrError::InvalidArgument(format!(
                    "motion has {} entries for {} frames",
                    m.len(),
                    frames.len()
                )));
            }
        }
        Ok(VideoSequence {
            frames,
            motion,
            recurrence_level,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Replaces the frames, keeping motion metadata and recurrence tag.
    pub fn with_frames(&self, frames: Vec<Frame>) -> Result<Self> {
        Self::new(frames, self.motion.clone(), self.recurrence_level)
    }

    /// Displacement taking frame `t - 1` onto frame `t` (0-based `t >= 1`).
    pub fn step_motion(&self, t: usize) -> Option<(i64, i64)> {
        let m = self.motion.as_ref()?;
        Some((m[t].0 - m[t - 1].0, m[t].1 - m[t - 1].1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    #[serde(default = "one")]
    pub channels: usize,
    pub tile_bank_size: usize,
    pub tile_size: usize,
    pub max_shift: i64,
    pub seed: u64,
}

fn one() -> usize {
    1
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            frames: 30,
            height: 96,
            width: 96,
            channels: 1,
            tile_bank_size: 3,
            tile_size: 16,
            max_shift: 4,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn tile_grid(&self) -> (usize, usize) {
        (self.height / self.tile_size, self.width / self.tile_size)
    }

    pub fn n_tiles(&self) -> usize {
        let (gy, gx) = self.tile_grid();
        gy * gx
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(RfrError::InvalidArgument(m));
        if self.frames == 0 || self.height == 0 || self.width == 0 || self.tile_size == 0 {
            return bad("frames, size and tile size must be positive".into());
        }
        if self.channels != 1 && self.channels != 3 {
            return bad(format!("channels must be 1 or 3, got {}", self.channels));
        }
        if self.height % self.tile_size != 0 || self.width % self.tile_size != 0 {
            return bad(format!(
                "tile size {} must divide frame size {}x{}",
                self.tile_size, self.height, self.width
            ));
        }
        if self.tile_bank_size == 0 || self.tile_bank_size > self.n_tiles() {
            return bad(format!(
                "tile bank size must be in 1..={}, got {}",
                self.n_tiles(),
                self.tile_bank_size
            ));
        }
        if self.max_shift < 0 {
            return bad("max_shift must be >= 0".into());
        }
        Ok(())
    }

    pub fn recurrence_level(&self) -> RecurrenceLevel {
        let n = self.n_tiles();
        if self.tile_bank_size >= n {
            RecurrenceLevel::Unique
        } else if self.tile_bank_size * 4 <= n {
            RecurrenceLevel::High
        } else {
            RecurrenceLevel::Medium
        }
    }
}

fn quantize8(v: f64) -> f64 {
    (v.clamp(0.0, 1.0) * 255.0).round() / 255.0
}

fn color_texture(rng: &mut impl Rng, channels: usize, h: usize, w: usize) -> Vec<f64> {
    let gray = texture::procedural_texture(rng, h, w);
    if channels == 1 {
        return gray;
    }
    let mut out = Vec::with_capacity(channels * h * w);
    for _ in 0..channels {
        let tint = texture::procedural_texture(rng, h, w);
        out.extend(gray.iter().zip(&tint).map(|(g, t)| 0.65 * g + 0.35 * t));
    }
    out
}

/// Builds a tiled mosaic from a small texture bank and translates it
/// circularly over time. Pixel values are multiples of 1/255, so the result
/// survives an 8-bit round trip unchanged.
pub fn generate_recurrent_video(spec: &SynthSpec) -> Result<VideoSequence> {
    spec.validate()?;
    let (gy, gx) = spec.tile_grid();
    let n = gy * gx;
    let ts = spec.tile_size;
    let c = spec.channels;

    let mut tile_rng = rng::stream(spec.seed, rng::stream_id(&[domain::VIDEO, 0]));
    let bank: Vec<Vec<f64>> = (0..spec.tile_bank_size)
        .map(|_| color_texture(&mut tile_rng, c, ts, ts))
        .collect();

    let layout: Vec<usize> = if spec.tile_bank_size == n {
        (0..n).collect()
    } else {
        let mut cells: Vec<usize> = (0..n).collect();
        cells.shuffle(&mut tile_rng);
        let mut layout = vec![0; n];
        for (k, &cell) in cells.iter().enumerate() {
            layout[cell] = if k < spec.tile_bank_size {
                k
            } else {
                tile_rng.gen_range(0..spec.tile_bank_size)
            };
        }
        layout
    };

    let (h, w) = (spec.height, spec.width);
    let mut base = Frame::zeros(c, h, w);
    {
        let data = base.data_mut();
        for (cell, &b) in layout.iter().enumerate() {
            let (ty, tx) = (cell / gx, cell % gx);
            let tile = &bank[b];
            for ci in 0..c {
                for y in 0..ts {
                    for x in 0..ts {
                        data[(ci * h + ty * ts + y) * w + tx * ts + x] = quantize8(tile[(ci * ts + y) * ts + x]);
                    }
                }
            }
        }
    }

    let mut motion_rng = rng::stream(spec.seed, rng::stream_id(&[domain::VIDEO, 1]));
    let mut motion = Vec::with_capacity(spec.frames);
    let mut cum = (0i64, 0i64);
    motion.push(cum);
    for _ in 1..spec.frames {
        let dx = motion_rng.gen_range(-spec.max_shift..=spec.max_shift);
        let dy = motion_rng.gen_range(-spec.max_shift..=spec.max_shift);
        cum = (cum.0 + dx, cum.1 + dy);
        motion.push(cum);
    }
    let frames = motion.iter().map(|&(dx, dy)| base.shift(dx, dy)).collect();
    VideoSequence::new(frames, Some(motion), spec.recurrence_level())
}

/// Number of ordered pairs of distinct grid cells with identical content.
pub fn tile_match_count(frame: &Frame, tile_size: usize) -> usize {
    let (gy, gx) = (frame.height() / tile_size, frame.width() / tile_size);
    let tiles: Vec<Vec<u64>> = (0..gy * gx)
        .map(|cell| {
            let (ty, tx) = (cell / gx, cell % gx);
            let mut v = Vec::with_capacity(frame.channels() * tile_size * tile_size);
            for c in 0..frame.channels() {
                for y in 0..tile_size {
                    for x in 0..tile_size {
                        v.push(frame.get(c, ty * tile_size + y, tx * tile_size + x).to_bits());
                    }
                }
            }
            v
        })
        .collect();
    let mut count = 0;
    for i in 0..tiles.len() {
        for j in 0..tiles.len() {
            if i != j && tiles[i] == tiles[j] {
                count += 1;
            }
        }
    }
    count
}

/// Deterministic texture frames for supervised pretraining. Drawn from a
/// stream domain that video generation never touches.
pub fn build_texture_corpus(seed: u64, count: usize, size: usize) -> Result<Vec<Frame>> {
    if count == 0 || size == 0 {
        return Err(RfrError::InvalidArgument("corpus count and size must be >= 1".into()));
    }
    (0..count)
        .map(|i| {
            let mut r = rng::stream(seed, rng::stream_id(&[domain::CORPUS, i as u64]));
            Frame::from_vec(1, size, size, texture::procedural_texture(&mut r, size, size))
        })
        .collect()
}

/// On-disk description of a sequence directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceManifest {
    #[serde(rename = "T")]
    pub frames: usize,
    #[serde(rename = "H")]
    pub height: usize,
    #[serde(rename = "W")]
    pub width: usize,
    pub channels: usize,
    pub motion: Vec<(i64, i64)>,
    pub seed: u64,
    pub recurrence_level: RecurrenceLevel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthSpec>,
}

pub fn frame_file_name(t: usize, channels: usize) -> String {
    let ext = if channels == 1 { "pgm" } else { "ppm" };
    format!("frame_{:04}.{ext}", t + 1)
}

pub fn save_sequence(dir: &Path, seq: &VideoSequence, seed: u64, synth: Option<&SynthSpec>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| RfrError::io(dir, e))?;
    let first = seq
        .frames
        .first()
        .ok_or_else(|| RfrError::InvalidArgument("cannot save an empty sequence".into()))?;
    for (t, f) in seq.frames.iter().enumerate() {
        save_frame(&dir.join(frame_file_name(t, f.channels())), f)?;
    }
    let manifest = SequenceManifest {
        frames: seq.len(),
        height: first.height(),
        width: first.width(),
        channels: first.channels(),
        motion: seq.motion.clone().unwrap_or_else(|| vec![(0, 0); seq.len()]),
        seed,
        recurrence_level: seq.recurrence_level,
        synth: synth.cloned(),
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(&path, text + "\n").map_err(|e| RfrError::io(&path, e))
}

pub fn load_sequence(dir: &Path) -> Result<(VideoSequence, SequenceManifest)> {
    let path = dir.join("manifest.json");
    if !path.exists() {
        return Err(RfrError::MissingInput(path));
    }
    let text = fs::read_to_string(&path).map_err(|e| RfrError::io(&path, e))?;
    let manifest: SequenceManifest = serde_json::from_str(&text)?;
    let frames = (0..manifest.frames)
        .map(|t| load_frame(&dir.join(frame_file_name(t, manifest.channels))))
        .collect::<Result<Vec<_>>>()?;
    if let Some(f) = frames.first() {
        let expected = [manifest.channels, manifest.height, manifest.width];
        if f.shape() != expected {
            return Err(RfrError::shape("load_sequence", &expected, f.shape()));
        }
    }
    let seq = VideoSequence::new(frames, Some(manifest.motion.clone()), manifest.recurrence_level)?;
    Ok((seq, manifest))
}
