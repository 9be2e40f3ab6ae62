//! Corpus evaluation grids and one-axis parameter sweeps, emitted as CSV.

use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;

use crate::codec::{adpcm_encode, CodecConfig};
use crate::dsp::{mean_std, segsnr, SegSnrReport, DEFAULT_FRAME_LEN};
use crate::error::{Error, Result};
use crate::predictor::{fit_codec_predictor, PredictorConfig, PredictorKind};
use crate::rbf::Rbf2Config;
use crate::signal::Signal;

/// Sentence label used for corpus-aggregate rows.
pub const CORPUS_ROW: &str = "corpus";

/// A named predictor: one member, or several averaged as a committee.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorSetup {
    pub label: String,
    pub members: Vec<PredictorConfig>,
}

fn parse_member(text: &str, order: usize) -> Result<PredictorConfig> {
    let bad = |msg: String| Error::InvalidArgument(format!("predictor `{text}`: {msg}"));
    let (kind, opts) = text.split_once(':').unwrap_or((text, ""));
    let mut cfg = match kind.trim() {
        "lpc" => PredictorConfig::lpc(order),
        "rbf1" => PredictorConfig::rbf1(order, 20, 0.22),
        "rbf2" => PredictorConfig::rbf2(order, 20, 10),
        other => return Err(bad(format!("unknown kind `{other}` (expected lpc, rbf1 or rbf2)"))),
    };
    for opt in opts.split(',').map(str::trim).filter(|o| !o.is_empty()) {
        let (key, value) = opt.split_once('=').ok_or_else(|| bad(format!("option `{opt}` is not key=value")))?;
        let num = |v: &str| v.parse::<f64>().map_err(|_| bad(format!("`{v}` is not a number")));
        let int = |v: &str| v.parse::<usize>().map_err(|_| bad(format!("`{v}` is not an integer")));
        match (&mut cfg.kind, key.trim()) {
            (_, "rows") => cfg.max_train_rows = int(value)?,
            (_, "delta") => cfg.augmented = matches!(value, "1" | "true" | "on" | "yes"),
            (_, "noise") => cfg.input_noise = num(value)?,
            (PredictorKind::Rbf1 { neurons, .. }, "neurons") => *neurons = int(value)?,
            (PredictorKind::Rbf1 { spread, .. }, "spread") => *spread = num(value)?,
            (PredictorKind::Rbf1 { goal_mse, .. }, "goal") => *goal_mse = num(value)?,
            (PredictorKind::Rbf2(c), "neurons") => c.neurons = int(value)?,
            (PredictorKind::Rbf2(c), "epochs") => c.em_epochs = int(value)?,
            (PredictorKind::Rbf2(c), "kmeans") => c.kmeans_iters = int(value)?,
            (PredictorKind::Rbf2(c), "bias") => c.output_bias = !matches!(value, "0" | "false" | "off" | "no"),
            (_, k) => return Err(bad(format!("option `{k}` does not apply to {kind}"))),
        }
    }
    Ok(cfg)
}

impl PredictorSetup {
    /// Parses `kind[:key=value,...]` members joined by `+`, e.g. `rbf1:spread=0.22+rbf2`.
    ///
    /// Keys: `neurons`, `spread`, `goal` (rbf1); `neurons`, `epochs`, `kmeans`, `bias` (rbf2);
    /// `rows` (training-row cap), `noise` (relative input-noise power) and `delta` for any kind.
    pub fn parse(text: &str, order: usize) -> Result<Self> {
        let members =
            text.split('+').map(|m| parse_member(m.trim(), order)).collect::<Result<Vec<_>>>()?;
        Ok(Self { label: text.trim().to_string(), members })
    }

    pub fn single(label: impl Into<String>, config: PredictorConfig) -> Self {
        Self { label: label.into(), members: vec![config] }
    }

    pub fn with_delta(&self, augmented: bool) -> Self {
        Self {
            label: self.label.clone(),
            members: self.members.iter().map(|m| m.with_delta(augmented)).collect(),
        }
    }

    pub fn has_lpc(&self) -> bool {
        self.members.iter().any(|m| m.kind == PredictorKind::Lpc)
    }
}

/// Fits the setup on `signal` and returns the SEGSNR of the coded result for each Nq.
pub fn evaluate_sentence(
    signal: &Signal,
    setup: &PredictorSetup,
    nq_bits: &[u8],
    frame_len: usize,
    seed: u64,
) -> Result<Vec<SegSnrReport>> {
    let predictor = fit_codec_predictor(&setup.members, signal, seed)?;
    nq_bits
        .iter()
        .map(|&nq| {
            let enc = adpcm_encode(signal, &predictor, &CodecConfig::new(nq))?;
            segsnr(signal, &enc.reconstructed, frame_len)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct EvalSpec {
    pub setups: Vec<PredictorSetup>,
    pub deltas: Vec<bool>,
    pub nq_bits: Vec<u8>,
    pub frame_len: usize,
    pub seed: u64,
}

impl EvalSpec {
    pub fn new(setups: Vec<PredictorSetup>) -> Self {
        Self { setups, deltas: vec![false, true], nq_bits: vec![2, 3, 4, 5], frame_len: DEFAULT_FRAME_LEN, seed: crate::DEFAULT_SEED }
    }

    /// RBF-1 at spreads 0.22 and 0.4 and RBF-2, each with and without deltas.
    pub fn single_predictor_table(order: usize) -> Self {
        Self::new(vec![
            PredictorSetup::single("rbf1:spread=0.22", PredictorConfig::rbf1(order, 20, 0.22)),
            PredictorSetup::single("rbf1:spread=0.4", PredictorConfig::rbf1(order, 20, 0.4)),
            PredictorSetup::single("rbf2", PredictorConfig::rbf2(order, 20, 10)),
        ])
    }

    /// Committees of RBF-1 (spread 0.22 or 0.4) with RBF-2, with and without deltas.
    pub fn committee_table(order: usize) -> Self {
        let rbf2 = PredictorConfig::rbf2(order, 20, 10);
        Self::new(vec![
            PredictorSetup {
                label: "rbf1:spread=0.22+rbf2".into(),
                members: vec![PredictorConfig::rbf1(order, 20, 0.22), rbf2],
            },
            PredictorSetup {
                label: "rbf1:spread=0.4+rbf2".into(),
                members: vec![PredictorConfig::rbf1(order, 20, 0.4), rbf2],
            },
        ])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub sentence: String,
    pub predictor: String,
    pub delta: bool,
    pub nq: u8,
    pub mean_db: f64,
    pub std_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalTable {
    /// One row per (sentence, predictor, delta, nq).
    pub rows: Vec<EvalRow>,
    /// Mean of per-sentence means and deviation across sentences, per (predictor, delta, nq).
    pub aggregates: Vec<EvalRow>,
}

pub fn run_eval(corpus: &[(String, Signal)], spec: &EvalSpec) -> Result<EvalTable> {
    if corpus.is_empty() {
        return Err(Error::InvalidArgument("empty corpus".into()));
    }
    let mut jobs = Vec::new();
    for (si, setup) in spec.setups.iter().enumerate() {
        for &delta in &spec.deltas {
            if delta && setup.has_lpc() {
                log::warn!("skipping `{}` with deltas: delta inputs apply to RBF predictors only", setup.label);
                continue;
            }
            for (ci, _) in corpus.iter().enumerate() {
                jobs.push((ci, si, delta));
            }
        }
    }
    let results: Vec<Vec<SegSnrReport>> = jobs
        .par_iter()
        .map(|&(ci, si, delta)| {
            let setup = spec.setups[si].with_delta(delta);
            evaluate_sentence(&corpus[ci].1, &setup, &spec.nq_bits, spec.frame_len, spec.seed)
        })
        .collect::<Result<_>>()?;

    let mut keyed = Vec::new();
    for (&(ci, si, delta), reports) in jobs.iter().zip(results) {
        for (&nq, r) in spec.nq_bits.iter().zip(reports) {
            keyed.push(((corpus[ci].0.clone(), si, delta, nq), r));
        }
    }
    keyed.sort_by(|a, b| a.0.cmp(&b.0));
    let rows: Vec<EvalRow> = keyed
        .iter()
        .map(|((sentence, si, delta, nq), r)| EvalRow {
            sentence: sentence.clone(),
            predictor: spec.setups[*si].label.clone(),
            delta: *delta,
            nq: *nq,
            mean_db: r.mean_db,
            std_db: r.std_db,
        })
        .collect();

    let mut groups: Vec<(usize, bool, u8)> = keyed.iter().map(|((_, si, d, nq), _)| (*si, *d, *nq)).collect();
    groups.sort();
    groups.dedup();
    let aggregates = groups
        .into_iter()
        .map(|(si, delta, nq)| {
            let means: Vec<f64> = rows
                .iter()
                .filter(|r| r.predictor == spec.setups[si].label && r.delta == delta && r.nq == nq)
                .map(|r| r.mean_db)
                .collect();
            let (mean_db, std_db) = mean_std(&means);
            EvalRow {
                sentence: CORPUS_ROW.into(),
                predictor: spec.setups[si].label.clone(),
                delta,
                nq,
                mean_db,
                std_db,
            }
        })
        .collect();
    Ok(EvalTable { rows, aggregates })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl EvalTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sentence,predictor,delta,nq,segsnr_mean_db,segsnr_std_db\n");
        for r in self.rows.iter().chain(&self.aggregates) {
            writeln!(
                out,
                "{},{},{},{},{:.6},{:.6}",
                csv_field(&r.sentence),
                csv_field(&r.predictor),
                u8::from(r.delta),
                r.nq,
                r.mean_db,
                r.std_db
            )
            .unwrap();
        }
        out
    }
}

/// Inclusive `start:stop:step` range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl SweepRange {
    pub fn new(start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !start.is_finite() || !stop.is_finite() || stop < start {
            return Err(Error::InvalidArgument(format!("bad range {start}:{stop}:{step}")));
        }
        Ok(Self { start, stop, step })
    }

    pub fn values(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|i| ((self.start + i as f64 * self.step) * 1e9).round() / 1e9)
            .collect()
    }
}

impl FromStr for SweepRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let nums = parts
            .iter()
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::InvalidArgument(format!("range `{s}` is not start:stop:step")))?;
        match nums[..] {
            [start, stop, step] => Self::new(start, stop, step),
            _ => Err(Error::InvalidArgument(format!("range `{s}` is not start:stop:step"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Spread,
    Neurons,
    Order,
}

impl SweepAxis {
    pub fn default_range(self) -> SweepRange {
        match self {
            SweepAxis::Spread => SweepRange { start: 0.011, stop: 0.5, step: 0.01 },
            SweepAxis::Neurons => SweepRange { start: 5.0, stop: 100.0, step: 5.0 },
            SweepAxis::Order => SweepRange { start: 1.0, stop: 50.0, step: 1.0 },
        }
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spread" => Ok(SweepAxis::Spread),
            "neurons" => Ok(SweepAxis::Neurons),
            "order" => Ok(SweepAxis::Order),
            _ => Err(Error::InvalidArgument(format!("unknown sweep axis `{s}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub range: SweepRange,
    /// Configuration whose swept field is overridden at each point.
    pub base: PredictorConfig,
    pub nq_bits: u8,
    pub frame_len: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub axis_value: f64,
    pub mean_db: f64,
}

fn apply_axis(base: &PredictorConfig, axis: SweepAxis, value: f64) -> Result<PredictorConfig> {
    let mut cfg = *base;
    let count = || {
        if value >= 1.0 && value.fract() == 0.0 {
            Ok(value as usize)
        } else {
            Err(Error::InvalidArgument(format!("{value} is not a positive integer")))
        }
    };
    match (axis, &mut cfg.kind) {
        (SweepAxis::Spread, PredictorKind::Rbf1 { spread, .. }) => *spread = value,
        (SweepAxis::Neurons, PredictorKind::Rbf1 { neurons, .. }) => *neurons = count()?,
        (SweepAxis::Neurons, PredictorKind::Rbf2(Rbf2Config { neurons, .. })) => *neurons = count()?,
        (SweepAxis::Order, _) => cfg.order = count()?,
        (axis, _) => {
            return Err(Error::InvalidArgument(format!("cannot sweep {axis:?} for this predictor")));
        }
    }
    Ok(cfg)
}

/// SEGSNR (mean of per-sentence means) at every value of the swept axis.
pub fn run_sweep(corpus: &[(String, Signal)], spec: &SweepSpec) -> Result<Vec<SweepPoint>> {
    if corpus.is_empty() {
        return Err(Error::InvalidArgument("empty corpus".into()));
    }
    let values = spec.range.values();
    let configs = values.iter().map(|&v| apply_axis(&spec.base, spec.axis, v)).collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> =
        (0..values.len()).flat_map(|vi| (0..corpus.len()).map(move |ci| (vi, ci))).collect();
    let means: Vec<f64> = jobs
        .par_iter()
        .map(|&(vi, ci)| {
            let setup = PredictorSetup::single("", configs[vi]);
            let r = evaluate_sentence(&corpus[ci].1, &setup, &[spec.nq_bits], spec.frame_len, spec.seed)?;
            Ok(r[0].mean_db)
        })
        .collect::<Result<_>>()?;
    Ok(values
        .iter()
        .zip(means.chunks_exact(corpus.len()))
        .map(|(&axis_value, m)| SweepPoint { axis_value, mean_db: m.iter().sum::<f64>() / m.len() as f64 })
        .collect())
}

pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from("axis_value,segsnr_mean_db\n");
    for p in points {
        writeln!(out, "{},{:.6}", p.axis_value, p.mean_db).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ar2_signal;

    #[test]
    fn parses_setups() {
        let s = PredictorSetup::parse("rbf1:spread=0.4,neurons=7+rbf2:epochs=3,bias=off", 10).unwrap();
        assert_eq!(s.members.len(), 2);
        assert_eq!(s.members[0].kind, PredictorKind::Rbf1 { neurons: 7, spread: 0.4, goal_mse: 0.0 });
        match s.members[1].kind {
            PredictorKind::Rbf2(c) => {
                assert_eq!(c.em_epochs, 3);
                assert!(!c.output_bias);
                assert_eq!(c.neurons, 20);
            }
            _ => panic!(),
        }
        assert!(PredictorSetup::parse("mlp", 10).is_err());
        assert!(PredictorSetup::parse("lpc:spread=0.1", 10).is_err());
        assert!(PredictorSetup::parse("rbf1:spread", 10).is_err());
    }

    #[test]
    fn sweep_ranges() {
        assert_eq!(SweepAxis::Spread.default_range().values().len(), 49);
        assert_eq!(SweepAxis::Neurons.default_range().values().len(), 20);
        assert_eq!("0.011:1.2:0.01".parse::<SweepRange>().unwrap().values().len(), 119);
        let v = SweepAxis::Spread.default_range().values();
        assert_eq!(v[1], 0.021);
        assert_eq!(*v.last().unwrap(), 0.491);
        assert!("1:2".parse::<SweepRange>().is_err());
        assert!("1:2:0".parse::<SweepRange>().is_err());
    }

    #[test]
    fn table_layouts() {
        let corpus = vec![("a".to_string(), ar2_signal(1.2, -0.5, 800, 1).unwrap())];
        let mut spec = EvalSpec::single_predictor_table(4);
        for s in &mut spec.setups {
            for m in &mut s.members {
                match &mut m.kind {
                    PredictorKind::Rbf1 { neurons, .. } => *neurons = 3,
                    PredictorKind::Rbf2(c) => c.neurons = 3,
                    PredictorKind::Lpc => {}
                }
            }
        }
        let t = run_eval(&corpus, &spec).unwrap();
        assert_eq!(t.aggregates.len(), 24);
        assert_eq!(t.rows.len(), 24);

        let single = EvalSpec {
            setups: vec![PredictorSetup::parse("lpc", 4).unwrap()],
            deltas: vec![false],
            nq_bits: vec![4],
            frame_len: 160,
            seed: 0,
        };
        let t = run_eval(&corpus, &single).unwrap();
        assert_eq!((t.rows.len(), t.aggregates.len()), (1, 1));
        let csv = t.to_csv();
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.lines().nth(2).unwrap().starts_with("corpus,lpc,0,4,"));
    }

    #[test]
    fn aggregates_recompute_from_rows() {
        let corpus = vec![
            ("a".to_string(), ar2_signal(1.2, -0.5, 1200, 1).unwrap()),
            ("b".to_string(), ar2_signal(0.5, 0.2, 1200, 2).unwrap()),
        ];
        let spec = EvalSpec {
            setups: vec![PredictorSetup::parse("lpc", 4).unwrap(), PredictorSetup::parse("rbf2:neurons=4", 4).unwrap()],
            deltas: vec![false, true],
            nq_bits: vec![2, 5],
            frame_len: 160,
            seed: 0,
        };
        let t = run_eval(&corpus, &spec).unwrap();
        // lpc with deltas is skipped
        assert_eq!(t.aggregates.len(), 6);
        for agg in &t.aggregates {
            let means: Vec<f64> = t
                .rows
                .iter()
                .filter(|r| r.predictor == agg.predictor && r.delta == agg.delta && r.nq == agg.nq)
                .map(|r| r.mean_db)
                .collect();
            assert_eq!(means.len(), 2);
            let (m, s) = mean_std(&means);
            assert_eq!((m, s), (agg.mean_db, agg.std_db));
        }
    }

    #[test]
    fn committee_table_matches_combined_layout() {
        let corpus = vec![("a".to_string(), ar2_signal(1.2, -0.5, 800, 1).unwrap())];
        let mut spec = EvalSpec::committee_table(4);
        for s in &mut spec.setups {
            for m in &mut s.members {
                match &mut m.kind {
                    PredictorKind::Rbf1 { neurons, .. } => *neurons = 3,
                    PredictorKind::Rbf2(c) => c.neurons = 3,
                    PredictorKind::Lpc => {}
                }
            }
        }
        // two committees x {x, x+delta} x Nq 2..5
        assert_eq!(run_eval(&corpus, &spec).unwrap().aggregates.len(), 16);
    }

    #[test]
    fn order_sweep_rejects_fractional_values() {
        let base = PredictorConfig::lpc(2);
        assert!(apply_axis(&base, SweepAxis::Order, 2.5).is_err());
        assert!(apply_axis(&base, SweepAxis::Spread, 0.5).is_err());
        assert_eq!(apply_axis(&base, SweepAxis::Order, 7.0).unwrap().order, 7);
    }
}
