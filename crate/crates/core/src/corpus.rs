//! Synthetic desk corpus and corpus manifests.
//!
//! The desk corpus holds eight 1.5 s "sentences" at 8 kHz: sequences of voiced segments
//! (differentiated glottal pulses with jittered, drifting pitch plus aspiration noise, through
//! four-formant all-pole filters), unvoiced segments (resonant noise) and short pauses, over a
//! background noise floor about 50 dB below full scale. Four use low ("male") and four use high ("female") pitch. Every
//! sentence is rounded to 16-bit PCM so that the in-memory version and the WAV files written
//! by `nlpc gen-corpus` are identical.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::signal::{from_pcm16, load_wav, save_wav, Signal, NOMINAL_SAMPLE_RATE};

pub const DESK_SENTENCES: usize = 8;
const SENTENCE_SAMPLES: usize = 12_000;
const FS: f64 = NOMINAL_SAMPLE_RATE as f64;
/// Samples between formant-filter updates.
const FILTER_HOP: usize = 40;

/// Vowel-like formant frequencies (Hz); a fixed fourth formant is added at 3500 Hz.
const VOWELS: [[f64; 3]; 6] = [
    [730.0, 1090.0, 2440.0],
    [270.0, 2290.0, 3010.0],
    [300.0, 870.0, 2240.0],
    [530.0, 1840.0, 2480.0],
    [570.0, 840.0, 2410.0],
    [660.0, 1720.0, 2410.0],
];
const FORMANT_BANDWIDTHS: [f64; 4] = [90.0, 120.0, 180.0, 300.0];
const F4: f64 = 3500.0;
/// Relative pitch-period jitter (standard deviation per cycle).
const JITTER: f64 = 0.02;
/// Aspiration noise RMS relative to the glottal excitation.
const ASPIRATION: f64 = 0.3;
/// Background noise RMS relative to full scale.
const NOISE_FLOOR: f64 = 0.0025;

#[derive(Debug, Clone, Copy)]
enum Segment {
    Voiced { vowel: usize, gain: f64 },
    Unvoiced { gain: f64 },
    Pause,
}

/// Coefficients `a` of `y(n) = x(n) + sum_k a[k] y(n-1-k)` for resonators at `freqs`.
fn all_pole(freqs: &[f64], bandwidths: &[f64]) -> Vec<f64> {
    // polynomial 1 - sum a_k z^-k as a product of second-order sections
    let mut poly = vec![1.0];
    for (&f, &bw) in freqs.iter().zip(bandwidths) {
        let r = (-PI * bw / FS).exp();
        let theta = 2.0 * PI * f / FS;
        let sec = [1.0, -2.0 * r * theta.cos(), r * r];
        let mut next = vec![0.0; poly.len() + 2];
        for (i, p) in poly.iter().enumerate() {
            for (j, s) in sec.iter().enumerate() {
                next[i + j] += p * s;
            }
        }
        poly = next;
    }
    poly[1..].iter().map(|c| -c).collect()
}

fn filter_step(coeffs: &[f64], state: &mut [f64], input: f64) -> f64 {
    let mut y = input;
    for (a, s) in coeffs.iter().zip(state.iter()) {
        y += a * s;
    }
    state.rotate_right(1);
    state[0] = y;
    y
}

/// Glottal flow over one pitch cycle (`phase` in `[0, 1)`): raised-cosine opening, quarter-cosine
/// closing, then a closed phase.
fn glottal_flow(phase: f64) -> f64 {
    const OPEN: f64 = 0.42;
    const CLOSE: f64 = 0.15;
    if phase < OPEN {
        0.5 - 0.5 * (PI * phase / OPEN).cos()
    } else if phase < OPEN + CLOSE {
        (0.5 * PI * (phase - OPEN) / CLOSE).cos()
    } else {
        0.0
    }
}

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

fn tract(f: &[f64; 3]) -> Vec<f64> {
    all_pole(&[f[0], f[1], f[2], F4], &FORMANT_BANDWIDTHS)
}

/// One desk-corpus sentence (index `0..8`), as loaded from its WAV file.
pub fn desk_sentence(index: usize) -> Result<Signal> {
    if index >= DESK_SENTENCES {
        return Err(Error::InvalidArgument(format!("desk corpus has {DESK_SENTENCES} sentences")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0DE_0000 + index as u64);
    let female = index % 2 == 1;
    let base_period = if female { rng.random_range(34.0..44.0) } else { rng.random_range(58.0..80.0) };

    let mut segments = Vec::new();
    let mut total = 0;
    while total < SENTENCE_SAMPLES {
        let u: f64 = rng.random();
        let (len, seg) = if u < 0.75 {
            let seg = Segment::Voiced { vowel: rng.random_range(0..VOWELS.len()), gain: rng.random_range(0.4..1.0) };
            (rng.random_range(800..2000), seg)
        } else if u < 0.88 {
            (rng.random_range(400..1000), Segment::Unvoiced { gain: rng.random_range(0.1..0.3) })
        } else {
            (rng.random_range(200..500), Segment::Pause)
        };
        segments.push((total, len.min(SENTENCE_SAMPLES - total), seg));
        total += len;
    }

    // excitation tracks: differentiated glottal flow with cycle jitter, and white noise
    let mut excitation = Vec::with_capacity(SENTENCE_SAMPLES);
    let mut phase = 0.0f64;
    let mut jitter = 1.0f64;
    let mut prev_flow = 0.0f64;
    for t in 0..SENTENCE_SAMPLES {
        // slow intonation drift around the base period
        let period = base_period * jitter * (1.0 + 0.08 * (2.0 * PI * t as f64 / 9000.0 + index as f64).sin());
        phase += 1.0 / period;
        if phase >= 1.0 {
            phase -= 1.0;
            jitter = 1.0 + JITTER * Distribution::<f64>::sample(&StandardNormal, &mut rng);
        }
        let flow = glottal_flow(phase);
        excitation.push(flow - prev_flow);
        prev_flow = flow;
    }
    let scale = rms(&excitation);
    for e in &mut excitation {
        *e = *e / scale + ASPIRATION * Distribution::<f64>::sample(&StandardNormal, &mut rng);
    }

    let mut voiced = vec![0.0f64; SENTENCE_SAMPLES];
    let mut unvoiced = vec![0.0f64; SENTENCE_SAMPLES];
    let mut tract_state = [0.0f64; 8];
    let mut noise_state = [0.0f64; 4];
    let mut formants = VOWELS[0];
    let fricative = all_pole(&[rng.random_range(2400.0..3200.0), 3700.0], &[500.0, 700.0]);
    for &(start, len, seg) in &segments {
        let target = match seg {
            Segment::Voiced { vowel, .. } => Some(VOWELS[vowel]),
            _ => None,
        };
        let from = formants;
        let mut coeffs = tract(&formants);
        for i in 0..len {
            let t = start + i;
            if i % FILTER_HOP == 0 {
                if let Some(to) = target {
                    let a = (i as f64 / 400.0).min(1.0);
                    for k in 0..3 {
                        formants[k] = from[k] + (to[k] - from[k]) * a;
                    }
                    coeffs = tract(&formants);
                }
            }
            voiced[t] = filter_step(&coeffs, &mut tract_state, excitation[t]);
            unvoiced[t] = filter_step(&fricative, &mut noise_state, StandardNormal.sample(&mut rng));
        }
    }
    let (voiced_rms, unvoiced_rms) = (rms(&voiced), rms(&unvoiced));

    let mut out = vec![0.0f64; SENTENCE_SAMPLES];
    let mut prev_gain = 0.0f64;
    let mut prev_voicing = 0.0f64;
    for &(start, len, seg) in &segments {
        let (gain, voicing) = match seg {
            Segment::Voiced { gain, .. } => (gain, 1.0),
            Segment::Unvoiced { gain } => (gain, 0.0),
            Segment::Pause => (0.0, prev_voicing),
        };
        for i in 0..len {
            let t = start + i;
            let ramp = 0.5 - 0.5 * (PI * (i as f64 / 240.0).min(1.0)).cos();
            let g = prev_gain + (gain - prev_gain) * ramp;
            let v = prev_voicing + (voicing - prev_voicing) * ramp;
            out[t] = g * (v * voiced[t] / voiced_rms + (1.0 - v) * unvoiced[t] / unvoiced_rms);
        }
        prev_gain = gain;
        prev_voicing = voicing;
    }

    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let pcm: Vec<i16> = out
        .iter()
        .map(|v| {
            let floor: f64 = StandardNormal.sample(&mut rng);
            ((v / peak * 0.8 + NOISE_FLOOR * floor) * 32767.0).round() as i16
        })
        .collect();
    from_pcm16(&pcm, NOMINAL_SAMPLE_RATE)
}

pub fn desk_sentence_name(index: usize) -> String {
    format!("desk{:02}_{}", index + 1, if index % 2 == 1 { "f" } else { "m" })
}

/// All desk sentences with their names.
pub fn desk_corpus() -> Result<Vec<(String, Signal)>> {
    (0..DESK_SENTENCES).map(|i| Ok((desk_sentence_name(i), desk_sentence(i)?))).collect()
}

/// Writes the desk corpus as WAV files plus a `manifest.txt` listing them.
pub fn write_desk_corpus(dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let mut manifest = String::from("# synthetic desk corpus, 8 kHz PCM16 mono\n");
    for (name, signal) in desk_corpus()? {
        let file = format!("{name}.wav");
        save_wav(dir.join(&file), &signal)?;
        manifest.push_str(&file);
        manifest.push('\n');
    }
    let path = dir.join("manifest.txt");
    fs::write(&path, manifest)?;
    Ok(path)
}

/// Paths listed in a manifest: one per line, `#` starts a comment, relative paths are
/// resolved against the manifest's directory.
pub fn read_manifest(path: &Path) -> Result<Vec<PathBuf>> {
    let text = fs::read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let entries: Vec<PathBuf> = text
        .lines()
        .map(|l| l.split('#').next().unwrap().trim())
        .filter(|l| !l.is_empty())
        .map(|l| {
            let p = Path::new(l);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        })
        .collect();
    if entries.is_empty() {
        return Err(Error::InvalidArgument(format!("manifest {} lists no files", path.display())));
    }
    Ok(entries)
}

/// Loads every sentence of a manifest, named by file stem.
pub fn load_manifest(path: &Path) -> Result<Vec<(String, Signal)>> {
    read_manifest(path)?
        .into_iter()
        .map(|p| {
            let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            Ok((name, load_wav(&p)?))
        })
        .collect()
}

/// Normalized AR(2) process `x(n) = a1 x(n-1) + a2 x(n-2) + e(n)` driven by Gaussian noise.
pub fn ar2_signal(a1: f64, a2: f64, len: usize, seed: u64) -> Result<Signal> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0f64; len + 200];
    for n in 2..x.len() {
        let e: f64 = StandardNormal.sample(&mut rng);
        x[n] = a1 * x[n - 1] + a2 * x[n - 2] + e;
    }
    crate::signal::normalize(&x[200..], NOMINAL_SAMPLE_RATE)
}

/// Impulse train with the given period through a two-formant resonator, plus faint noise.
pub fn pulse_train_signal(period: usize, len: usize, seed: u64) -> Result<Signal> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = all_pole(&[500.0, 1500.0], &[100.0, 150.0]);
    let mut state = vec![0.0f64; a.len()];
    let mut x = Vec::with_capacity(len);
    for n in 0..len + 400 {
        let e = if n % period == 0 { 1.0 } else { 0.0 };
        let mut y = e;
        for (c, s) in a.iter().zip(&state) {
            y += c * s;
        }
        state.rotate_right(1);
        state[0] = y;
        if n >= 400 {
            let jitter: f64 = StandardNormal.sample(&mut rng);
            x.push(y + 1e-3 * jitter);
        }
    }
    crate::signal::normalize(&x, NOMINAL_SAMPLE_RATE)
}
