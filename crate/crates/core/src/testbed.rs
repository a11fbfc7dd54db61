//! Synthetic ERP recordings with known sources, plus trial averaging.
//!
//! A generated trial is the sum over source templates of
//! `topography ⊗ waveform × gain`, where `gain = 1 + jitter · N(0, 1)` is
//! drawn once per trial and template, plus i.i.d. Gaussian sensor noise.
//! Because the gain multiplies the whole template, each source stays rank-1
//! in channel space.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{NofError, Result};

pub const EPOCHS_FORMAT: &str = "nof-epochs/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelMontage {
    channels: Vec<String>,
    rois: Vec<String>,
}

impl ChannelMontage {
    pub fn new(channels: Vec<String>, rois: Vec<String>) -> Result<Self> {
        if channels.len() != rois.len() {
            return Err(NofError::invalid(format!(
                "montage has {} channels but {} ROI labels",
                channels.len(),
                rois.len()
            )));
        }
        if channels.len() < 2 {
            return Err(NofError::invalid("montage needs at least 2 channels"));
        }
        let mut seen = HashSet::new();
        for c in &channels {
            if !seen.insert(c.as_str()) {
                return Err(NofError::invalid(format!("duplicate channel name `{c}`")));
            }
        }
        Ok(ChannelMontage { channels, rois })
    }

    pub fn from_pairs<S: AsRef<str>>(pairs: &[(S, S)]) -> Result<Self> {
        let (c, r) = pairs
            .iter()
            .map(|(c, r)| (c.as_ref().to_string(), r.as_ref().to_string()))
            .unzip();
        Self::new(c, r)
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn channels(&self) -> &[String] {
        &self.channels
    }

    pub fn channel(&self, idx: usize) -> &str {
        &self.channels[idx]
    }

    pub fn roi(&self, idx: usize) -> &str {
        &self.rois[idx]
    }

    pub fn index_of(&self, channel: &str) -> Option<usize> {
        self.channels.iter().position(|c| c == channel)
    }

    pub fn roi_of(&self, channel: &str) -> Option<&str> {
        self.index_of(channel).map(|i| self.rois[i].as_str())
    }

    /// 32-channel 10-20 layout grouped into frontal, central, temporal,
    /// parietal and occipital regions.
    pub fn standard_32() -> Self {
        let pairs: Vec<(&str, &str)> = STANDARD_32.iter().map(|(c, r, _, _)| (*c, *r)).collect();
        Self::from_pairs(&pairs).expect("static montage is valid")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("channel,roi\n");
        for (c, r) in self.channels.iter().zip(&self.rois) {
            out.push_str(c);
            out.push(',');
            out.push_str(r);
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(text.as_bytes());
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["channel", "roi"] {
            return Err(NofError::Parse {
                line: 1,
                message: "montage header must be `channel,roi`".into(),
            });
        }
        let mut channels = Vec::new();
        let mut rois = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
            if rec.len() != 2 {
                return Err(NofError::Parse {
                    line,
                    message: "expected 2 fields".into(),
                });
            }
            channels.push(rec[0].to_string());
            rois.push(rec[1].to_string());
        }
        Self::new(channels, rois)
    }
}

/// (channel, roi, x, y) on a unit disk: x left→right, y back→front.
const STANDARD_32: [(&str, &str, f64, f64); 32] = [
    ("Fp1", "frontal", -0.31, 0.95),
    ("Fp2", "frontal", 0.31, 0.95),
    ("AF3", "frontal", -0.33, 0.78),
    ("AF4", "frontal", 0.33, 0.78),
    ("F7", "frontal", -0.81, 0.59),
    ("F3", "frontal", -0.41, 0.55),
    ("Fz", "frontal", 0.0, 0.5),
    ("F4", "frontal", 0.41, 0.55),
    ("F8", "frontal", 0.81, 0.59),
    ("FC5", "central", -0.68, 0.28),
    ("FC1", "central", -0.24, 0.25),
    ("FC2", "central", 0.24, 0.25),
    ("FC6", "central", 0.68, 0.28),
    ("T7", "temporal", -1.0, 0.0),
    ("C3", "central", -0.5, 0.0),
    ("Cz", "central", 0.0, 0.0),
    ("C4", "central", 0.5, 0.0),
    ("T8", "temporal", 1.0, 0.0),
    ("CP5", "parietal", -0.68, -0.28),
    ("CP1", "parietal", -0.24, -0.25),
    ("CP2", "parietal", 0.24, -0.25),
    ("CP6", "parietal", 0.68, -0.28),
    ("P7", "parietal", -0.81, -0.59),
    ("P3", "parietal", -0.41, -0.55),
    ("Pz", "parietal", 0.0, -0.5),
    ("P4", "parietal", 0.41, -0.55),
    ("P8", "parietal", 0.81, -0.59),
    ("PO3", "occipital", -0.33, -0.78),
    ("PO4", "occipital", 0.33, -0.78),
    ("O1", "occipital", -0.31, -0.95),
    ("Oz", "occipital", 0.0, -1.0),
    ("O2", "occipital", 0.31, -0.95),
];

/// Scalp position of a standard-32 channel, if the name is known.
pub fn standard_position(channel: &str) -> Option<(f64, f64)> {
    STANDARD_32
        .iter()
        .find(|(c, ..)| *c == channel)
        .map(|(_, _, x, y)| (*x, *y))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
}

/// Time base shared by every trial of a recording.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochWindow {
    /// Sampling rate in Hz.
    pub fs: f64,
    /// Latency of the first sample relative to the event, in ms.
    pub t0: f64,
    pub n_times: usize,
}

impl EpochWindow {
    pub fn new(fs: f64, t0: f64, n_times: usize) -> Result<Self> {
        if !(fs > 0.0) || !fs.is_finite() {
            return Err(NofError::invalid(format!("sampling rate must be > 0, got {fs}")));
        }
        if n_times == 0 {
            return Err(NofError::invalid("epoch must contain at least one sample"));
        }
        Ok(EpochWindow { fs, t0, n_times })
    }

    pub fn sample_period_ms(&self) -> f64 {
        1000.0 / self.fs
    }

    pub fn latency_ms(&self, idx: usize) -> f64 {
        self.t0 + idx as f64 * self.sample_period_ms()
    }

    pub fn duration_ms(&self) -> f64 {
        self.n_times as f64 * self.sample_period_ms()
    }

    pub fn contains_ms(&self, t: f64) -> bool {
        t >= self.t0 && t < self.t0 + self.duration_ms()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceTemplate {
    pub name: String,
    pub topography: Vec<f64>,
    pub waveform: Vec<f64>,
    pub window: EpochWindow,
    pub peak_latency: f64,
    pub polarity: Polarity,
}

impl SourceTemplate {
    pub fn new(
        name: impl Into<String>,
        topography: Vec<f64>,
        waveform: Vec<f64>,
        window: EpochWindow,
        peak_latency: f64,
        polarity: Polarity,
    ) -> Result<Self> {
        let t = SourceTemplate {
            name: name.into(),
            topography,
            waveform,
            window,
            peak_latency,
            polarity,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.waveform.len() != self.window.n_times {
            return Err(NofError::invalid(format!(
                "template `{}`: waveform has {} samples, window expects {}",
                self.name,
                self.waveform.len(),
                self.window.n_times
            )));
        }
        if !self.window.contains_ms(self.peak_latency) {
            return Err(NofError::invalid(format!(
                "template `{}`: peak latency {} ms outside the epoch window",
                self.name, self.peak_latency
            )));
        }
        let idx = ((self.peak_latency - self.window.t0) / self.window.sample_period_ms()).round()
            as usize;
        let v = self.waveform[idx.min(self.waveform.len() - 1)];
        let ok = match self.polarity {
            Polarity::Positive => v > 0.0,
            Polarity::Negative => v < 0.0,
        };
        if !ok {
            return Err(NofError::invalid(format!(
                "template `{}`: waveform value {v} at peak disagrees with {:?} polarity",
                self.name, self.polarity
            )));
        }
        Ok(())
    }

    /// Noise-free channels × timepoints contribution of this source.
    pub fn outer(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.topography.len(), self.waveform.len(), |c, t| {
            self.topography[c] * self.waveform[t]
        })
    }
}

/// Gaussian bump peaking at `peak_ms` with standard deviation `width_ms`.
pub fn bump_waveform(window: EpochWindow, peak_ms: f64, width_ms: f64, amplitude: f64) -> Vec<f64> {
    (0..window.n_times)
        .map(|i| {
            let d = (window.latency_ms(i) - peak_ms) / width_ms;
            amplitude * (-0.5 * d * d).exp()
        })
        .collect()
}

/// Smooth topography centered on `center` (a standard-32 channel), decaying
/// with scalp distance. Channels without a known position get zero weight.
pub fn blob_topography(montage: &ChannelMontage, center: &str, spread: f64) -> Result<Vec<f64>> {
    let (cx, cy) = standard_position(center)
        .ok_or_else(|| NofError::invalid(format!("no scalp position for channel `{center}`")))?;
    Ok(montage
        .channels()
        .iter()
        .map(|ch| match standard_position(ch) {
            Some((x, y)) => {
                let d2 = (x - cx).powi(2) + (y - cy).powi(2);
                (-d2 / (2.0 * spread * spread)).exp()
            }
            None => 0.0,
        })
        .collect())
}

/// Desk-scale default: 250 Hz, 1000 ms epochs starting at the event.
pub fn default_window() -> EpochWindow {
    EpochWindow::new(250.0, 0.0, 250).expect("static window is valid")
}

/// Positive deflection at 400 ms, maximal over Fz.
pub fn p300_template(montage: &ChannelMontage, window: EpochWindow) -> Result<SourceTemplate> {
    let topo = blob_topography(montage, "Fz", 0.45)?;
    let wave = bump_waveform(window, 400.0, 45.0, 5.0);
    SourceTemplate::new("P300", topo, wave, window, 400.0, Polarity::Positive)
}

/// Negative deflection at 170 ms, maximal over Oz.
pub fn n170_template(montage: &ChannelMontage, window: EpochWindow) -> Result<SourceTemplate> {
    let topo = blob_topography(montage, "Oz", 0.4)?;
    let wave = bump_waveform(window, 170.0, 25.0, -4.0);
    SourceTemplate::new("N170", topo, wave, window, 170.0, Polarity::Negative)
}

/// EVENT / STIM / MOD labels attached to each trial.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TrialMeta {
    pub event: String,
    pub stim: String,
    #[serde(rename = "mod")]
    pub modality: String,
}

impl TrialMeta {
    pub fn new(event: &str, stim: &str, modality: &str) -> Self {
        TrialMeta {
            event: event.into(),
            stim: stim.into(),
            modality: modality.into(),
        }
    }

    pub fn get(&self, key: MetaKey) -> &str {
        match key {
            MetaKey::Event => &self.event,
            MetaKey::Stim => &self.stim,
            MetaKey::Mod => &self.modality,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MetaKey {
    #[serde(rename = "EVENT")]
    Event,
    #[serde(rename = "STIM")]
    Stim,
    #[serde(rename = "MOD")]
    Mod,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochTensor {
    pub window: EpochWindow,
    pub montage: ChannelMontage,
    /// One channels × timepoints matrix per trial.
    pub trials: Vec<DMatrix<f64>>,
    pub meta: Vec<TrialMeta>,
}

impl EpochTensor {
    pub fn new(
        window: EpochWindow,
        montage: ChannelMontage,
        trials: Vec<DMatrix<f64>>,
        meta: Vec<TrialMeta>,
    ) -> Result<Self> {
        if trials.len() != meta.len() {
            return Err(NofError::invalid(format!(
                "{} trials but {} metadata records",
                trials.len(),
                meta.len()
            )));
        }
        for (i, t) in trials.iter().enumerate() {
            if t.nrows() != montage.len() || t.ncols() != window.n_times {
                return Err(NofError::invalid(format!(
                    "trial {i} has shape {}x{}, expected {}x{}",
                    t.nrows(),
                    t.ncols(),
                    montage.len(),
                    window.n_times
                )));
            }
        }
        Ok(EpochTensor {
            window,
            montage,
            trials,
            meta,
        })
    }

    pub fn n_trials(&self) -> usize {
        self.trials.len()
    }

    pub fn n_channels(&self) -> usize {
        self.montage.len()
    }

    pub fn n_times(&self) -> usize {
        self.window.n_times
    }

    /// Channels × (trials · timepoints), trials concatenated along time.
    pub fn concatenated(&self) -> DMatrix<f64> {
        let nt = self.n_times();
        let mut out = DMatrix::zeros(self.n_channels(), nt * self.n_trials());
        for (k, t) in self.trials.iter().enumerate() {
            out.columns_mut(k * nt, nt).copy_from(t);
        }
        out
    }

    /// Distinct metadata combinations present, in sorted order.
    pub fn conditions(&self) -> Vec<TrialMeta> {
        let mut c: Vec<TrialMeta> = self.meta.clone();
        c.sort();
        c.dedup();
        c
    }

    pub fn trials_matching(&self, cond: &TrialMeta) -> Vec<usize> {
        self.meta
            .iter()
            .enumerate()
            .filter(|(_, m)| *m == cond)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn scaled(&self, a: f64) -> EpochTensor {
        EpochTensor {
            trials: self.trials.iter().map(|t| t * a).collect(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    /// Per-trial multiplicative gain jitter, as a fraction of unit gain.
    pub jitter: f64,
    pub noise_std: f64,
    pub n_trials: usize,
    pub seed: u64,
    /// Trial labels assigned round-robin. Empty means a single
    /// `stimon/standard/visual` condition.
    #[serde(default)]
    pub conditions: Vec<TrialMeta>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            jitter: 0.1,
            noise_std: 1.0,
            n_trials: 100,
            seed: 0,
            conditions: Vec::new(),
        }
    }
}

pub fn generate_dataset(
    montage: &ChannelMontage,
    templates: &[SourceTemplate],
    cfg: &GeneratorConfig,
) -> Result<EpochTensor> {
    let first = templates
        .first()
        .ok_or_else(|| NofError::invalid("template list is empty"))?;
    if cfg.n_trials == 0 {
        return Err(NofError::invalid("n_trials must be >= 1"));
    }
    if !(cfg.noise_std >= 0.0) || !(cfg.jitter >= 0.0) {
        return Err(NofError::invalid("noise_std and jitter must be >= 0"));
    }
    let window = first.window;
    for t in templates {
        t.validate()?;
        if t.window != window {
            return Err(NofError::invalid(format!(
                "template `{}` window {:?} differs from `{}` window {:?}",
                t.name, t.window, first.name, window
            )));
        }
        if t.topography.len() != montage.len() {
            return Err(NofError::invalid(format!(
                "template `{}` topography has {} weights for {} channels",
                t.name,
                t.topography.len(),
                montage.len()
            )));
        }
    }
    let conditions = if cfg.conditions.is_empty() {
        vec![TrialMeta::new("stimon", "standard", "visual")]
    } else {
        cfg.conditions.clone()
    };

    let clean: Vec<DMatrix<f64>> = templates.iter().map(SourceTemplate::outer).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut trials = Vec::with_capacity(cfg.n_trials);
    let mut meta = Vec::with_capacity(cfg.n_trials);
    for k in 0..cfg.n_trials {
        let mut trial = DMatrix::zeros(montage.len(), window.n_times);
        for c in &clean {
            let z: f64 = StandardNormal.sample(&mut rng);
            trial += c * (1.0 + cfg.jitter * z);
        }
        // Noise is always drawn so the stream does not depend on noise_std.
        for v in trial.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v += cfg.noise_std * z;
        }
        trials.push(trial);
        meta.push(conditions[k % conditions.len()].clone());
    }
    EpochTensor::new(window, montage.clone(), trials, meta)
}

/// Mean signal power per sample (over channels and time) of the templates,
/// including the `1 + jitter²` factor contributed by the gain jitter.
pub fn signal_power(templates: &[SourceTemplate], jitter: f64) -> f64 {
    let Some(first) = templates.first() else {
        return 0.0;
    };
    let mut sum = first.outer() * 0.0;
    for t in templates {
        sum += t.outer();
    }
    // Gains are independent across templates, so cross terms only survive
    // with the unit mean gain.
    let mean_sq = sum.iter().map(|v| v * v).sum::<f64>() / sum.len() as f64;
    let own: f64 = templates
        .iter()
        .map(|t| t.outer().iter().map(|v| v * v).sum::<f64>() / sum.len() as f64)
        .sum();
    mean_sq + jitter * jitter * own
}

/// Noise standard deviation giving the requested signal/noise variance ratio.
pub fn noise_std_for_snr(templates: &[SourceTemplate], jitter: f64, snr: f64) -> Result<f64> {
    if !(snr > 0.0) {
        return Err(NofError::invalid(format!("SNR must be > 0, got {snr}")));
    }
    Ok((signal_power(templates, jitter) / snr).sqrt())
}

/// Per-group elementwise mean across trials, keyed by the requested
/// metadata values (in `group_by` order). An empty `group_by` averages
/// everything into a single group.
pub fn average_epochs(
    epochs: &EpochTensor,
    group_by: &[MetaKey],
) -> Result<BTreeMap<Vec<String>, DMatrix<f64>>> {
    if epochs.n_trials() == 0 {
        return Err(NofError::invalid("cannot average an empty epoch tensor"));
    }
    let mut sums: BTreeMap<Vec<String>, (DMatrix<f64>, usize)> = BTreeMap::new();
    for (trial, meta) in epochs.trials.iter().zip(&epochs.meta) {
        let key: Vec<String> = group_by.iter().map(|k| meta.get(*k).to_string()).collect();
        let entry = sums
            .entry(key)
            .or_insert_with(|| (DMatrix::zeros(trial.nrows(), trial.ncols()), 0));
        entry.0 += trial;
        entry.1 += 1;
    }
    Ok(sums
        .into_iter()
        .map(|(k, (s, n))| (k, s / n as f64))
        .collect())
}

pub fn rms(m: &DMatrix<f64>) -> f64 {
    (m.iter().map(|v| v * v).sum::<f64>() / m.len() as f64).sqrt()
}

#[derive(Debug, Serialize, Deserialize)]
struct EpochsMeta {
    format: String,
    fs: f64,
    t0: f64,
    n_channels: usize,
    n_times: usize,
    montage: String,
    trials: Vec<TrialFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TrialFile {
    file: String,
    event: String,
    stim: String,
    #[serde(rename = "mod")]
    modality: String,
}

fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format!("{}", m[(i, j)]));
        }
        out.push('\n');
    }
    out
}

fn matrix_from_csv(text: &str, rows: usize, cols: usize, file: &str) -> Result<DMatrix<f64>> {
    let mut data = Vec::with_capacity(rows * cols);
    let mut n_lines = 0;
    for (ln, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        n_lines += 1;
        let before = data.len();
        for tok in line.split(',') {
            let v: f64 = tok.trim().parse().map_err(|_| NofError::Parse {
                line: ln + 1,
                message: format!("{file}: bad number `{tok}`"),
            })?;
            data.push(v);
        }
        if data.len() - before != cols {
            return Err(NofError::Parse {
                line: ln + 1,
                message: format!("{file}: expected {cols} values, found {}", data.len() - before),
            });
        }
    }
    if n_lines != rows {
        return Err(NofError::invalid(format!(
            "{file}: expected {rows} rows, found {n_lines}"
        )));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

/// Writes `meta.json`, `montage.csv` and one `trial_NNNNN.csv` per trial
/// into `dir` (created if needed).
pub fn write_epochs(epochs: &EpochTensor, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("montage.csv"), epochs.montage.to_csv())?;
    let mut trials = Vec::with_capacity(epochs.n_trials());
    for (k, (t, m)) in epochs.trials.iter().zip(&epochs.meta).enumerate() {
        let file = format!("trial_{k:05}.csv");
        fs::write(dir.join(&file), matrix_to_csv(t))?;
        trials.push(TrialFile {
            file,
            event: m.event.clone(),
            stim: m.stim.clone(),
            modality: m.modality.clone(),
        });
    }
    let meta = EpochsMeta {
        format: EPOCHS_FORMAT.into(),
        fs: epochs.window.fs,
        t0: epochs.window.t0,
        n_channels: epochs.n_channels(),
        n_times: epochs.n_times(),
        montage: "montage.csv".into(),
        trials,
    };
    let mut json = serde_json::to_string_pretty(&meta)?;
    json.push('\n');
    fs::write(dir.join("meta.json"), json)?;
    Ok(())
}

pub fn read_epochs(dir: &Path) -> Result<EpochTensor> {
    let meta_path = dir.join("meta.json");
    if !meta_path.exists() {
        return Err(NofError::MissingInput(meta_path));
    }
    let meta: EpochsMeta = serde_json::from_str(&fs::read_to_string(&meta_path)?)?;
    if meta.format != EPOCHS_FORMAT {
        return Err(NofError::invalid(format!(
            "unsupported epochs format `{}`",
            meta.format
        )));
    }
    let montage = ChannelMontage::from_csv(&fs::read_to_string(dir.join(&meta.montage))?)?;
    if montage.len() != meta.n_channels {
        return Err(NofError::invalid(format!(
            "meta.json declares {} channels, montage has {}",
            meta.n_channels,
            montage.len()
        )));
    }
    let window = EpochWindow::new(meta.fs, meta.t0, meta.n_times)?;
    let mut trials = Vec::with_capacity(meta.trials.len());
    let mut labels = Vec::with_capacity(meta.trials.len());
    for tf in &meta.trials {
        let text = fs::read_to_string(dir.join(&tf.file))?;
        trials.push(matrix_from_csv(&text, meta.n_channels, meta.n_times, &tf.file)?);
        labels.push(TrialMeta {
            event: tf.event.clone(),
            stim: tf.stim.clone(),
            modality: tf.modality.clone(),
        });
    }
    EpochTensor::new(window, montage, trials, labels)
}
