//! Per-factor, per-condition summary attributes.
//!
//! Every row describes one factor under one condition with 13 columns:
//! spatial (`SP_*`, `ROI`), intensity (`IN_*`), temporal (`TI_max`) and the
//! condition labels. Intensities and latency are measured on the factor's
//! back-projected waveform averaged over the condition's trials.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::decomposition::FactorDecomposition;
use crate::error::{NofError, Result};
use crate::matrix::pearson;
use crate::testbed::{EpochTensor, TrialMeta};

pub const SUMMARY_HEADER: &str =
    "SP_max,SP_max_ROI,SP_min,SP_min_ROI,IN_min,IN_max,IN_mean,ROI,SP_cor,TI_max,EVENT,STIM,MOD";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttrKind {
    Numeric,
    Categorical,
}

/// Column names and kinds, in CSV order.
pub const ATTRIBUTES: [(&str, AttrKind); 13] = [
    ("SP_max", AttrKind::Categorical),
    ("SP_max_ROI", AttrKind::Categorical),
    ("SP_min", AttrKind::Categorical),
    ("SP_min_ROI", AttrKind::Categorical),
    ("IN_min", AttrKind::Numeric),
    ("IN_max", AttrKind::Numeric),
    ("IN_mean", AttrKind::Numeric),
    ("ROI", AttrKind::Categorical),
    ("SP_cor", AttrKind::Numeric),
    ("TI_max", AttrKind::Numeric),
    ("EVENT", AttrKind::Categorical),
    ("STIM", AttrKind::Categorical),
    ("MOD", AttrKind::Categorical),
];

pub fn attribute_kind(name: &str) -> Option<AttrKind> {
    ATTRIBUTES.iter().find(|(n, _)| *n == name).map(|(_, k)| *k)
}

#[derive(Debug, Clone, PartialEq)]
pub enum AttrValue<'a> {
    Num(f64),
    Cat(&'a str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorSummary {
    #[serde(rename = "SP_max")]
    pub sp_max: String,
    #[serde(rename = "SP_max_ROI")]
    pub sp_max_roi: String,
    #[serde(rename = "SP_min")]
    pub sp_min: String,
    #[serde(rename = "SP_min_ROI")]
    pub sp_min_roi: String,
    #[serde(rename = "IN_min")]
    pub in_min: f64,
    #[serde(rename = "IN_max")]
    pub in_max: f64,
    #[serde(rename = "IN_mean")]
    pub in_mean: f64,
    #[serde(rename = "ROI")]
    pub roi: String,
    #[serde(rename = "SP_cor")]
    pub sp_cor: f64,
    #[serde(rename = "TI_max")]
    pub ti_max: f64,
    #[serde(rename = "EVENT")]
    pub event: String,
    #[serde(rename = "STIM")]
    pub stim: String,
    #[serde(rename = "MOD")]
    pub modality: String,
}

impl FactorSummary {
    pub fn value(&self, attr: &str) -> Option<AttrValue<'_>> {
        use AttrValue::*;
        Some(match attr {
            "SP_max" => Cat(&self.sp_max),
            "SP_max_ROI" => Cat(&self.sp_max_roi),
            "SP_min" => Cat(&self.sp_min),
            "SP_min_ROI" => Cat(&self.sp_min_roi),
            "IN_min" => Num(self.in_min),
            "IN_max" => Num(self.in_max),
            "IN_mean" => Num(self.in_mean),
            "ROI" => Cat(&self.roi),
            "SP_cor" => Num(self.sp_cor),
            "TI_max" => Num(self.ti_max),
            "EVENT" => Cat(&self.event),
            "STIM" => Cat(&self.stim),
            "MOD" => Cat(&self.modality),
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureWarning {
    /// Several channels share the extreme topography weight; the lowest
    /// channel index was kept.
    ArgmaxTie { factor: String, which: &'static str, channels: Vec<String> },
    /// Several samples share the peak |amplitude|; the earliest was kept.
    LatencyTie { factor: String },
    ZeroActivation { factor: String, condition: TrialMeta },
}

impl fmt::Display for FeatureWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureWarning::ArgmaxTie { factor, which, channels } => write!(
                f,
                "{factor}: tie for {which} between {}; kept {}",
                channels.join(", "),
                channels[0]
            ),
            FeatureWarning::LatencyTie { factor } => {
                write!(f, "{factor}: tie for peak latency; kept the earliest sample")
            }
            FeatureWarning::ZeroActivation { factor, condition } => write!(
                f,
                "{factor}: zero activation under {}/{}/{}; TI_max set to the first sample",
                condition.event, condition.stim, condition.modality
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub summary: FactorSummary,
    pub warnings: Vec<FeatureWarning>,
}

/// Index of the extreme element (lowest index on ties) and every tied index.
fn extreme(values: &[f64], better: impl Fn(f64, f64) -> bool) -> (usize, Vec<usize>) {
    let mut best = 0;
    for i in 1..values.len() {
        if better(values[i], values[best]) {
            best = i;
        }
    }
    let ties = (0..values.len()).filter(|&i| values[i] == values[best]).collect();
    (best, ties)
}

pub fn extract_summary(
    dec: &FactorDecomposition,
    epochs: &EpochTensor,
    factor: &str,
    condition: &TrialMeta,
    template: &[f64],
    mean_channel_set: &[String],
) -> Result<Extraction> {
    let f = dec.index_of(factor)?;
    let montage = &epochs.montage;
    if dec.channels.as_slice() != montage.channels() {
        return Err(NofError::invalid(
            "decomposition channels do not match the epoch montage",
        ));
    }
    if template.len() != montage.len() {
        return Err(NofError::invalid(format!(
            "template has {} weights for {} channels",
            template.len(),
            montage.len()
        )));
    }
    let trials = epochs.trials_matching(condition);
    if trials.is_empty() {
        return Err(NofError::invalid(format!(
            "condition {}/{}/{} selects no trials",
            condition.event, condition.stim, condition.modality
        )));
    }

    let mut warnings = Vec::new();
    let topo = dec.topography(f);
    let (imax, ties) = extreme(&topo, |a, b| a > b);
    if ties.len() > 1 {
        warnings.push(FeatureWarning::ArgmaxTie {
            factor: factor.into(),
            which: "SP_max",
            channels: ties.iter().map(|&i| montage.channel(i).to_string()).collect(),
        });
    }
    let (imin, ties) = extreme(&topo, |a, b| a < b);
    if ties.len() > 1 {
        warnings.push(FeatureWarning::ArgmaxTie {
            factor: factor.into(),
            which: "SP_min",
            channels: ties.iter().map(|&i| montage.channel(i).to_string()).collect(),
        });
    }

    let mean_idx: Vec<usize> = if mean_channel_set.is_empty() {
        let roi = montage.roi(imax);
        (0..montage.len()).filter(|&i| montage.roi(i) == roi).collect()
    } else {
        mean_channel_set
            .iter()
            .map(|c| {
                montage
                    .index_of(c)
                    .ok_or_else(|| NofError::invalid(format!("unknown channel `{c}` in mean set")))
            })
            .collect::<Result<_>>()?
    };

    // Condition-averaged activation time course.
    let nt = epochs.n_times();
    let w = dec.unmixing.row(f);
    let mut act = vec![0.0; nt];
    for &k in &trials {
        let trial = &epochs.trials[k];
        for t in 0..nt {
            let mut s = 0.0;
            for c in 0..montage.len() {
                s += w[c] * (trial[(c, t)] - dec.mean[c]);
            }
            act[t] += s;
        }
    }
    for a in act.iter_mut() {
        *a /= trials.len() as f64;
    }

    let wave: Vec<f64> = act.iter().map(|a| topo[imax] * a + 0.0).collect();
    let in_min = wave.iter().copied().fold(f64::INFINITY, f64::min) + 0.0;
    let in_max = wave.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 0.0;
    let act_mean = act.iter().sum::<f64>() / nt as f64;
    let topo_mean = mean_idx.iter().map(|&c| topo[c]).sum::<f64>() / mean_idx.len() as f64;
    let in_mean = topo_mean * act_mean + 0.0;

    let abs: Vec<f64> = wave.iter().map(|v| v.abs()).collect();
    let (ipeak, ties) = extreme(&abs, |a, b| a > b);
    if abs[ipeak] == 0.0 {
        warnings.push(FeatureWarning::ZeroActivation {
            factor: factor.into(),
            condition: condition.clone(),
        });
    } else if ties.len() > 1 {
        warnings.push(FeatureWarning::LatencyTie { factor: factor.into() });
    }
    for w in &warnings {
        log::warn!("{w}");
    }

    let sp_max_roi = montage.roi(imax).to_string();
    Ok(Extraction {
        summary: FactorSummary {
            sp_max: montage.channel(imax).to_string(),
            sp_max_roi: sp_max_roi.clone(),
            sp_min: montage.channel(imin).to_string(),
            sp_min_roi: montage.roi(imin).to_string(),
            in_min,
            in_max,
            in_mean,
            roi: sp_max_roi,
            sp_cor: pearson(&topo, template),
            ti_max: epochs.window.latency_ms(ipeak),
            event: condition.event.clone(),
            stim: condition.stim.clone(),
            modality: condition.modality.clone(),
        },
        warnings,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SummaryConfig {
    /// Channels averaged for `IN_mean`; empty means the channels sharing the
    /// factor's `SP_max` ROI.
    #[serde(default)]
    pub mean_channels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTable {
    pub rows: Vec<FactorSummary>,
    pub warnings: Vec<FeatureWarning>,
}

/// One row per factor × condition, factor-major, conditions sorted.
pub fn summarize_dataset(
    dec: &FactorDecomposition,
    epochs: &EpochTensor,
    template: &[f64],
    cfg: &SummaryConfig,
) -> Result<SummaryTable> {
    let conditions = epochs.conditions();
    let mut rows = Vec::with_capacity(dec.n_factors() * conditions.len());
    let mut warnings = Vec::new();
    for id in &dec.ids {
        for cond in &conditions {
            let e = extract_summary(dec, epochs, id, cond, template, &cfg.mean_channels)?;
            rows.push(e.summary);
            warnings.extend(e.warnings);
        }
    }
    Ok(SummaryTable { rows, warnings })
}

pub fn write_summary_csv(rows: &[FactorSummary]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(SUMMARY_HEADER.split(','))?;
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| NofError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn read_summary_csv(text: &str) -> Result<Vec<FactorSummary>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != SUMMARY_HEADER {
        return Err(NofError::Parse {
            line: 1,
            message: format!("summary header must be `{SUMMARY_HEADER}`"),
        });
    }
    let mut rows = Vec::new();
    for r in rdr.deserialize() {
        rows.push(r?);
    }
    Ok(rows)
}
