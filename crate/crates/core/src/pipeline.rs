//! Stage orchestration: configuration, on-disk artifacts and the run
//! manifest.
//!
//! Every stage reads its inputs from and writes its outputs to the output
//! directory, so any stage can be rerun from the artifacts of the previous
//! one.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classification::{
    all_split_points, build_tree, extract_rules, summary_values, DecisionTree, LabeledTable, MissingPolicy,
    TreeConfig,
};
use crate::clustering::{
    agglomerative_hierarchy, divisive_hierarchy, em_fit, select_k_bic, taxonomy_to_classes, ClusterModel,
    CovarianceType, Cut, DivisiveConfig, EmConfig, EncodingConfig, Linkage, ObservationMatrix, OntologyClass,
    Taxonomy,
};
use crate::decomposition::{center_and_whiten, fastica, ComponentSelection, Contrast, FactorDecomposition, FastIcaConfig};
use crate::error::{NofError, Result};
use crate::features::{
    attribute_kind, read_summary_csv, summarize_dataset, write_summary_csv, AttrKind, FactorSummary, SummaryConfig,
    SUMMARY_HEADER,
};
use crate::ontology::{partition, MatchMode, OntologyRuleBase, PartitionReport, Thresholds};
use crate::rulemining::{
    apriori, discretize, generate_rules, read_rules_csv, with_cluster_labels, write_rules_csv, AprioriConfig,
    ItemValue, RuleConfig, CLUSTER_ATTRIBUTE,
};
use crate::testbed::{
    generate_dataset, n170_template, p300_template, read_epochs, write_epochs, ChannelMontage, EpochWindow,
    GeneratorConfig, SourceTemplate, TrialMeta,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Synth,
    Decompose,
    Extract,
    Cluster,
    Classify,
    Mine,
    Partition,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Synth,
        Stage::Decompose,
        Stage::Extract,
        Stage::Cluster,
        Stage::Classify,
        Stage::Mine,
        Stage::Partition,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Decompose => "decompose",
            Stage::Extract => "extract",
            Stage::Cluster => "cluster",
            Stage::Classify => "classify",
            Stage::Mine => "mine",
            Stage::Partition => "partition",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = NofError;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| NofError::config(format!("unknown stage `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// When false, `pipeline` starts from an existing `epochs/` directory.
    pub enabled: bool,
    /// `standard_32` or a path to a `channel,roi` CSV.
    pub montage: String,
    pub fs: f64,
    pub t0_ms: f64,
    pub n_times: usize,
    pub n_trials: usize,
    pub jitter: f64,
    pub noise_std: f64,
    /// Preset names: `P300`, `N170`.
    pub templates: Vec<String>,
    pub conditions: Vec<TrialMeta>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            enabled: true,
            montage: "standard_32".into(),
            fs: 250.0,
            t0_ms: 0.0,
            n_times: 250,
            n_trials: 200,
            jitter: 0.1,
            noise_std: 1.0,
            templates: vec!["P300".into(), "N170".into()],
            conditions: vec![
                TrialMeta::new("stimon", "target", "visual"),
                TrialMeta::new("stimon", "target", "auditory"),
                TrialMeta::new("stimon", "standard", "visual"),
                TrialMeta::new("stimon", "standard", "auditory"),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecomposeConfig {
    pub n_components: Option<usize>,
    /// Alternative to `n_components`: retained variance fraction.
    pub variance: Option<f64>,
    /// `logcosh` or `cube`.
    pub contrast: String,
    pub alpha: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for DecomposeConfig {
    fn default() -> Self {
        DecomposeConfig {
            n_components: Some(2),
            variance: None,
            contrast: "logcosh".into(),
            alpha: 1.0,
            tol: 1e-6,
            max_iter: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractConfig {
    /// Template whose topography `SP_cor` correlates against.
    pub template: String,
    pub mean_channels: Vec<String>,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig { template: "P300".into(), mean_channels: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    /// `em`, `divisive` or `agglomerative`.
    pub method: String,
    /// Fixed cluster count; unset selects k by BIC up to `k_max` (EM) or
    /// requires a cut (hierarchies).
    pub k: Option<usize>,
    pub k_max: usize,
    /// `diagonal` or `full`.
    pub covariance: String,
    pub n_restarts: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub cov_floor: f64,
    pub encoding: EncodingConfig,
    pub pca: Option<usize>,
    pub linkage: String,
    pub cut_height: Option<f64>,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub min_gain: f64,
    /// Name given to the cluster whose mean `SP_cor` is highest, when that
    /// mean reaches `label_min_cor`.
    pub target_name: String,
    pub label_min_cor: f64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        let em = EmConfig::default();
        let dv = DivisiveConfig::default();
        ClusterConfig {
            method: "em".into(),
            k: None,
            k_max: 6,
            covariance: "diagonal".into(),
            n_restarts: em.n_restarts,
            tol: em.tol,
            max_iter: em.max_iter,
            cov_floor: 0.01,
            encoding: EncodingConfig::default(),
            pca: None,
            linkage: "average".into(),
            cut_height: None,
            max_depth: dv.max_depth,
            min_leaf: dv.min_leaf,
            min_gain: dv.min_gain,
            target_name: "P300".into(),
            label_min_cor: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyConfig {
    pub min_leaf: usize,
    pub max_depth: usize,
    pub prune: bool,
    pub prune_cf: f64,
    pub missing: MissingPolicy,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        let t = TreeConfig::default();
        ClassifyConfig {
            min_leaf: t.min_leaf,
            max_depth: t.max_depth,
            prune: t.prune,
            prune_cf: t.prune_cf,
            missing: t.missing,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MineConfig {
    pub beta_sup: f64,
    pub beta_conf: f64,
    pub max_len: Option<usize>,
    pub include_cluster: bool,
    pub multi_consequent: bool,
    /// Leave `attr=ANY` items (attributes without split points) out of
    /// the mined transactions.
    pub drop_any: bool,
    /// Add the expert rule base's interval thresholds to the split points.
    pub expert_vocabulary: bool,
    pub extra_split_points: BTreeMap<String, Vec<f64>>,
}

impl Default for MineConfig {
    fn default() -> Self {
        MineConfig {
            beta_sup: 0.1,
            beta_conf: 0.5,
            max_len: Some(4),
            include_cluster: true,
            multi_consequent: false,
            drop_any: true,
            expert_vocabulary: true,
            extra_split_points: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartitionConfig {
    /// Expert rule base (JSON). Without one the ontology is empty.
    pub expert: Option<PathBuf>,
    /// Threshold overrides; unset values come from the rule base, then
    /// from the built-in defaults.
    pub beta_sup: Option<f64>,
    pub beta_conf: Option<f64>,
    pub pi_min: Option<f64>,
    pub match_mode: MatchMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub synth: SynthConfig,
    pub decompose: DecomposeConfig,
    pub extract: ExtractConfig,
    pub cluster: ClusterConfig,
    pub classify: ClassifyConfig,
    pub mine: MineConfig,
    pub partition: PartitionConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            out: PathBuf::from("nof-out"),
            synth: SynthConfig::default(),
            decompose: DecomposeConfig::default(),
            extract: ExtractConfig::default(),
            cluster: ClusterConfig::default(),
            classify: ClassifyConfig::default(),
            mine: MineConfig::default(),
            partition: PartitionConfig::default(),
        }
    }
}

/// `key.path=value` with the value read as a TOML literal, falling back to
/// a plain string.
pub fn parse_override(s: &str) -> Result<(String, toml::Value)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| NofError::config(format!("override `{s}` is not key=value")))?;
    let k = k.trim();
    if k.is_empty() {
        return Err(NofError::config(format!("override `{s}` has an empty key")));
    }
    let value = toml::from_str::<toml::Table>(&format!("v = {}", v.trim()))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(v.trim().to_string()));
    Ok((k.to_string(), value))
}

fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().expect("split yields one part");
    let mut cur = table;
    for p in parts {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| NofError::config(format!("`{key}`: `{p}` is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::layered(text, &[])
    }

    /// File contents with overrides applied on top; unset keys keep their
    /// defaults.
    pub fn layered(text: &str, overrides: &[(String, toml::Value)]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| NofError::config(e.to_string()))?;
        for (k, v) in overrides {
            set_path(&mut table, k, v.clone())?;
        }
        let cfg: PipelineConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| NofError::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &[(String, toml::Value)]) -> Result<Self> {
        let text = match path {
            Some(p) if !p.exists() => return Err(NofError::MissingInput(p.to_path_buf())),
            Some(p) => fs::read_to_string(p)?,
            None => String::new(),
        };
        Self::layered(&text, overrides)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.synth;
        if s.templates.is_empty() {
            return Err(NofError::config("synth.templates is empty"));
        }
        if s.n_trials == 0 || s.n_times == 0 || !(s.fs > 0.0) {
            return Err(NofError::config("synth needs n_trials, n_times and fs > 0"));
        }
        if !(s.noise_std >= 0.0 && s.jitter >= 0.0) {
            return Err(NofError::config("synth.noise_std and synth.jitter must be >= 0"));
        }
        let d = &self.decompose;
        if d.n_components.is_some() && d.variance.is_some() {
            return Err(NofError::config("set decompose.n_components or decompose.variance, not both"));
        }
        if d.n_components == Some(0) {
            return Err(NofError::config("decompose.n_components must be >= 1"));
        }
        if let Some(v) = d.variance {
            if !(v > 0.0 && v <= 1.0) {
                return Err(NofError::config("decompose.variance must lie in (0, 1]"));
            }
        }
        self.contrast()?;
        let c = &self.cluster;
        match c.method.as_str() {
            "em" => {
                self.covariance()?;
            }
            "divisive" | "agglomerative" => {
                c.linkage.parse::<Linkage>()?;
                if c.k.is_none() && c.cut_height.is_none() {
                    return Err(NofError::config("hierarchical clustering needs cluster.k or cluster.cut_height"));
                }
            }
            other => return Err(NofError::config(format!("unknown cluster.method `{other}`"))),
        }
        if c.k == Some(0) || c.k_max == 0 {
            return Err(NofError::config("cluster.k and cluster.k_max must be >= 1"));
        }
        if !(self.classify.prune_cf > 0.0 && self.classify.prune_cf < 1.0) {
            return Err(NofError::config("classify.prune_cf must lie in (0, 1)"));
        }
        let m = &self.mine;
        let unit = |v: f64| v > 0.0 && v <= 1.0;
        if !unit(m.beta_sup) || !unit(m.beta_conf) {
            return Err(NofError::config("mine.beta_sup and mine.beta_conf must lie in (0, 1]"));
        }
        for (attr, pts) in &m.extra_split_points {
            if attribute_kind(attr) != Some(AttrKind::Numeric) {
                return Err(NofError::config(format!("mine.extra_split_points: `{attr}` is not numeric")));
            }
            if pts.iter().any(|p| !p.is_finite()) {
                return Err(NofError::config(format!("mine.extra_split_points.{attr} has a non-finite value")));
            }
        }
        let p = &self.partition;
        for (name, v) in [("beta_sup", p.beta_sup), ("beta_conf", p.beta_conf)] {
            if v.is_some_and(|v| !unit(v)) {
                return Err(NofError::config(format!("partition.{name} must lie in (0, 1]")));
            }
        }
        if p.pi_min.is_some_and(|v| !(0.0..=1.0).contains(&v)) {
            return Err(NofError::config("partition.pi_min must lie in [0, 1]"));
        }
        Ok(())
    }

    fn contrast(&self) -> Result<Contrast> {
        match self.decompose.contrast.as_str() {
            "logcosh" => Ok(Contrast::LogCosh { alpha: self.decompose.alpha }),
            "cube" => Ok(Contrast::Cube),
            other => Err(NofError::config(format!("unknown decompose.contrast `{other}`"))),
        }
    }

    fn covariance(&self) -> Result<CovarianceType> {
        match self.cluster.covariance.as_str() {
            "diagonal" => Ok(CovarianceType::Diagonal),
            "full" => Ok(CovarianceType::Full),
            other => Err(NofError::config(format!("unknown cluster.covariance `{other}`"))),
        }
    }
}

/// Artifact locations inside the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub out: PathBuf,
}

impl Layout {
    pub fn new(out: &Path) -> Self {
        Layout { out: out.to_path_buf() }
    }
    pub fn epochs(&self) -> PathBuf {
        self.out.join("epochs")
    }
    pub fn templates(&self) -> PathBuf {
        self.out.join("templates.json")
    }
    pub fn decomposition(&self) -> PathBuf {
        self.out.join("decomposition.json")
    }
    pub fn summary(&self) -> PathBuf {
        self.out.join("summary.csv")
    }
    pub fn cluster_model(&self) -> PathBuf {
        self.out.join("cluster_model.json")
    }
    pub fn classes(&self) -> PathBuf {
        self.out.join("classes.json")
    }
    pub fn clustered(&self) -> PathBuf {
        self.out.join("summary_clustered.csv")
    }
    pub fn tree(&self) -> PathBuf {
        self.out.join("tree.json")
    }
    pub fn rules_json(&self) -> PathBuf {
        self.out.join("rules.json")
    }
    pub fn rules_txt(&self) -> PathBuf {
        self.out.join("rules.txt")
    }
    pub fn mined(&self) -> PathBuf {
        self.out.join("mined_rules.csv")
    }
    pub fn report_json(&self) -> PathBuf {
        self.out.join("report.json")
    }
    pub fn report_txt(&self) -> PathBuf {
        self.out.join("report.txt")
    }
    pub fn manifest(&self) -> PathBuf {
        self.out.join("run.json")
    }
}

fn tmp_sibling(path: &Path) -> PathBuf {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!(".{name}.tmp"))
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = tmp_sibling(path);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(NofError::MissingInput(path.to_path_buf()))
    }
}

fn read_text(path: &Path) -> Result<String> {
    require(path)?;
    Ok(fs::read_to_string(path)?)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&read_text(path)?)?)
}

/// SHA-256 of a file, or of a directory as the digest of its sorted
/// `name  digest` lines.
pub fn sha256_path(path: &Path) -> Result<String> {
    require(path)?;
    if path.is_dir() {
        let mut names: Vec<PathBuf> = fs::read_dir(path)?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        names.sort();
        let mut h = Sha256::new();
        for p in names {
            let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            h.update(format!("{name}  {}\n", sha256_path(&p)?).as_bytes());
        }
        Ok(hex::encode(h.finalize()))
    } else {
        Ok(hex::encode(Sha256::digest(fs::read(path)?)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub config_sha256: String,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub stages: Vec<StageRecord>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        if path.exists() {
            read_json(path)
        } else {
            Ok(Manifest::default())
        }
    }
}

fn digest(out: &Path, p: &Path) -> Result<FileDigest> {
    let shown = p.strip_prefix(out).unwrap_or(p);
    Ok(FileDigest {
        path: shown.to_string_lossy().replace('\\', "/"),
        sha256: sha256_path(p)?,
    })
}

fn stage_paths(cfg: &PipelineConfig, stage: Stage) -> (Vec<PathBuf>, Vec<PathBuf>) {
    let l = Layout::new(&cfg.out);
    let expert: Vec<PathBuf> = cfg.partition.expert.iter().cloned().collect();
    match stage {
        Stage::Synth => (vec![], vec![l.epochs(), l.templates()]),
        Stage::Decompose => (vec![l.epochs()], vec![l.decomposition()]),
        Stage::Extract => (vec![l.epochs(), l.decomposition(), l.templates()], vec![l.summary()]),
        Stage::Cluster => (vec![l.summary()], vec![l.cluster_model(), l.classes(), l.clustered()]),
        Stage::Classify => (vec![l.clustered()], vec![l.tree(), l.rules_json(), l.rules_txt()]),
        Stage::Mine => {
            let mut ins = vec![l.clustered(), l.tree()];
            if cfg.mine.expert_vocabulary {
                ins.extend(expert);
            }
            (ins, vec![l.mined()])
        }
        Stage::Partition => {
            let mut ins = vec![l.mined()];
            ins.extend(expert);
            (ins, vec![l.report_json(), l.report_txt()])
        }
    }
}

/// Runs one stage and appends its record to `run.json`.
pub fn run_stage(stage: Stage, cfg: &PipelineConfig) -> Result<StageRecord> {
    let start = Instant::now();
    info!("stage {stage}: start");
    let result = match stage {
        Stage::Synth => synth(cfg),
        Stage::Decompose => decompose(cfg),
        Stage::Extract => extract(cfg),
        Stage::Cluster => cluster(cfg),
        Stage::Classify => classify(cfg),
        Stage::Mine => mine(cfg),
        Stage::Partition => partition_stage(cfg).map(|_| ()),
    };
    result.map_err(|e| e.in_stage(stage.name()))?;
    let record = (|| {
        let (ins, outs) = stage_paths(cfg, stage);
        Ok::<_, NofError>(StageRecord {
            stage: stage.name().to_string(),
            config_sha256: hex::encode(Sha256::digest(cfg.to_toml_string().as_bytes())),
            inputs: ins.iter().map(|p| digest(&cfg.out, p)).collect::<Result<_>>()?,
            outputs: outs.iter().map(|p| digest(&cfg.out, p)).collect::<Result<_>>()?,
            wall_time_s: start.elapsed().as_secs_f64(),
        })
    })()
    .map_err(|e| e.in_stage(stage.name()))?;
    let path = Layout::new(&cfg.out).manifest();
    let mut manifest = Manifest::load(&path)?;
    manifest.stages.push(record.clone());
    write_json(&path, &manifest)?;
    info!("stage {stage}: done in {:.2}s", record.wall_time_s);
    Ok(record)
}

/// All stages in order (synth only when enabled), starting a fresh
/// manifest.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<(PartitionReport, Manifest)> {
    let layout = Layout::new(&cfg.out);
    fs::create_dir_all(&cfg.out)?;
    write_json(&layout.manifest(), &Manifest::default())?;
    for stage in Stage::ALL {
        if stage == Stage::Synth && !cfg.synth.enabled {
            continue;
        }
        run_stage(stage, cfg)?;
    }
    let report: PartitionReport = read_json(&layout.report_json())?;
    Ok((report, Manifest::load(&layout.manifest())?))
}

fn template_preset(name: &str, montage: &ChannelMontage, window: EpochWindow) -> Result<SourceTemplate> {
    match name {
        "P300" => p300_template(montage, window),
        "N170" => n170_template(montage, window),
        other => Err(NofError::config(format!("unknown template preset `{other}` (known: P300, N170)"))),
    }
}

fn synth(cfg: &PipelineConfig) -> Result<()> {
    let s = &cfg.synth;
    let montage = if s.montage == "standard_32" {
        ChannelMontage::standard_32()
    } else {
        ChannelMontage::from_csv(&read_text(Path::new(&s.montage))?)?
    };
    let window = EpochWindow::new(s.fs, s.t0_ms, s.n_times).map_err(|e| NofError::config(e.to_string()))?;
    let templates = s
        .templates
        .iter()
        .map(|t| template_preset(t, &montage, window))
        .collect::<Result<Vec<_>>>()?;
    let gen = GeneratorConfig {
        jitter: s.jitter,
        noise_std: s.noise_std,
        n_trials: s.n_trials,
        seed: cfg.seed,
        conditions: s.conditions.clone(),
    };
    let epochs = generate_dataset(&montage, &templates, &gen)?;
    let layout = Layout::new(&cfg.out);
    let dir = layout.epochs();
    let tmp = tmp_sibling(&dir);
    if tmp.exists() {
        fs::remove_dir_all(&tmp)?;
    }
    write_epochs(&epochs, &tmp)?;
    if dir.exists() {
        fs::remove_dir_all(&dir)?;
    }
    fs::rename(&tmp, &dir)?;
    write_json(&layout.templates(), &templates)
}

fn decompose(cfg: &PipelineConfig) -> Result<()> {
    let layout = Layout::new(&cfg.out);
    let epochs = read_epochs(&layout.epochs())?;
    let d = &cfg.decompose;
    let selection = match (d.n_components, d.variance) {
        (Some(k), _) => ComponentSelection::Count(k),
        (None, Some(v)) => ComponentSelection::Variance(v),
        (None, None) => ComponentSelection::All,
    };
    let white = center_and_whiten(&epochs, selection)?;
    let ica = FastIcaConfig {
        contrast: cfg.contrast()?,
        tol: d.tol,
        max_iter: d.max_iter,
        seed: cfg.seed,
        n_factors: None,
    };
    let dec = fastica(&white, &ica)?;
    if !dec.converged {
        warn!("FastICA stopped after {} iterations without converging", dec.n_iter);
    }
    write_json(&layout.decomposition(), &dec)
}

fn extract(cfg: &PipelineConfig) -> Result<()> {
    let layout = Layout::new(&cfg.out);
    let epochs = read_epochs(&layout.epochs())?;
    let dec: FactorDecomposition = read_json(&layout.decomposition())?;
    let templates: Vec<SourceTemplate> = read_json(&layout.templates())?;
    let target = templates
        .iter()
        .find(|t| t.name == cfg.extract.template)
        .ok_or_else(|| NofError::config(format!("extract.template `{}` not in templates.json", cfg.extract.template)))?;
    let table = summarize_dataset(
        &dec,
        &epochs,
        &target.topography,
        &SummaryConfig { mean_channels: cfg.extract.mean_channels.clone() },
    )?;
    write_atomic(&layout.summary(), write_summary_csv(&table.rows)?.as_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ClusterArtifact {
    Em {
        columns: Vec<String>,
        model: ClusterModel,
        /// (k, BIC) for every k tried; empty when k was fixed.
        bic: Vec<(usize, f64)>,
    },
    Divisive { columns: Vec<String>, taxonomy: Taxonomy },
    Agglomerative { columns: Vec<String>, taxonomy: Taxonomy },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassesArtifact {
    pub target: Option<String>,
    pub classes: Vec<OntologyClass>,
}

/// The cluster with the highest mean `SP_cor` takes `target` when that mean
/// reaches `min_cor`. Returns the renamed label, if any.
pub fn name_target_cluster(
    rows: &[FactorSummary],
    membership: &mut [String],
    classes: &mut [OntologyClass],
    target: &str,
    min_cor: f64,
) -> Option<String> {
    let mut sums: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for (r, m) in rows.iter().zip(membership.iter()) {
        let e = sums.entry(m.as_str()).or_insert((0.0, 0));
        e.0 += r.sp_cor;
        e.1 += 1;
    }
    let (best, mean) = sums
        .iter()
        .map(|(k, (s, n))| (k.to_string(), s / *n as f64))
        .fold(None::<(String, f64)>, |acc, (k, m)| match acc {
            Some((_, bm)) if bm >= m => acc,
            _ => Some((k, m)),
        })?;
    if mean < min_cor || sums.contains_key(target) {
        return None;
    }
    for m in membership.iter_mut().filter(|m| **m == best) {
        *m = target.to_string();
    }
    for c in classes.iter_mut() {
        if c.name == best {
            c.name = target.to_string();
        }
        if c.parent.as_deref() == Some(best.as_str()) {
            c.parent = Some(target.to_string());
        }
    }
    Some(target.to_string())
}

fn write_clustered_csv(rows: &[FactorSummary], labels: &[String]) -> Result<String> {
    let base = write_summary_csv(rows)?;
    let mut out = String::with_capacity(base.len() + labels.len() * 8);
    for (i, line) in base.lines().enumerate() {
        out.push_str(line);
        out.push(',');
        if i == 0 {
            out.push_str(CLUSTER_ATTRIBUTE);
        } else {
            out.push_str(&labels[i - 1]);
        }
        out.push('\n');
    }
    Ok(out)
}

/// Summary rows and their `CLUSTER` labels.
pub fn read_clustered_csv(text: &str) -> Result<(Vec<FactorSummary>, Vec<String>)> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let expected = format!("{SUMMARY_HEADER},{CLUSTER_ATTRIBUTE}");
    if header != expected {
        return Err(NofError::Parse { line: 1, message: format!("header must be `{expected}`") });
    }
    let mut base = String::from(SUMMARY_HEADER);
    base.push('\n');
    let mut labels = Vec::new();
    for (i, line) in lines.enumerate() {
        let (row, label) = line.rsplit_once(',').ok_or_else(|| NofError::Parse {
            line: i + 2,
            message: "missing CLUSTER column".into(),
        })?;
        base.push_str(row);
        base.push('\n');
        labels.push(label.to_string());
    }
    let rows = read_summary_csv(&base)?;
    Ok((rows, labels))
}

fn cluster(cfg: &PipelineConfig) -> Result<()> {
    let layout = Layout::new(&cfg.out);
    let rows = read_summary_csv(&read_text(&layout.summary())?)?;
    let c = &cfg.cluster;
    let mut x = ObservationMatrix::from_summaries(&rows, &c.encoding)?;
    if let Some(k) = c.pca {
        x = x.pca(k)?;
    }
    let columns = x.columns.clone();
    let (artifact, mut membership, mut classes) = match c.method.as_str() {
        "em" => {
            let em = EmConfig {
                seed: cfg.seed,
                tol: c.tol,
                max_iter: c.max_iter,
                n_restarts: c.n_restarts,
                covariance: cfg.covariance()?,
                cov_floor: c.cov_floor,
            };
            let (model, bic) = match c.k {
                Some(k) => (em_fit(&x, k, &em)?, Vec::new()),
                None => select_k_bic(&x, c.k_max, &em)?,
            };
            let membership: Vec<String> = model.assignments.iter().map(|a| format!("C{}", a + 1)).collect();
            let classes = (0..model.k)
                .map(|j| OntologyClass {
                    name: format!("C{}", j + 1),
                    parent: None,
                    members: (0..rows.len()).filter(|&i| model.assignments[i] == j).collect(),
                })
                .filter(|cl| !cl.members.is_empty())
                .collect();
            (ClusterArtifact::Em { columns, model, bic }, membership, classes)
        }
        method => {
            let taxonomy = if method == "divisive" {
                divisive_hierarchy(
                    &x,
                    &DivisiveConfig {
                        max_depth: c.max_depth,
                        min_leaf: c.min_leaf,
                        min_gain: c.min_gain,
                        seed: cfg.seed,
                        ..Default::default()
                    },
                )?
            } else {
                agglomerative_hierarchy(&x, c.linkage.parse()?)?
            };
            let cut = match (c.k, c.cut_height) {
                (Some(k), _) => Cut::Leaves(k.min(taxonomy.leaves().len())),
                (None, Some(h)) => Cut::Height(h),
                (None, None) => unreachable!("validated"),
            };
            let assignment = taxonomy_to_classes(&taxonomy, cut)?;
            let artifact = if method == "divisive" {
                ClusterArtifact::Divisive { columns, taxonomy }
            } else {
                ClusterArtifact::Agglomerative { columns, taxonomy }
            };
            (artifact, assignment.membership, assignment.classes)
        }
    };
    let target = name_target_cluster(&rows, &mut membership, &mut classes, &c.target_name, c.label_min_cor);
    if target.is_none() {
        warn!("no cluster reached mean SP_cor {} for `{}`", c.label_min_cor, c.target_name);
    }
    write_json(&layout.cluster_model(), &artifact)?;
    write_json(&layout.classes(), &ClassesArtifact { target, classes })?;
    write_atomic(&layout.clustered(), write_clustered_csv(&rows, &membership)?.as_bytes())
}

fn classify(cfg: &PipelineConfig) -> Result<()> {
    let layout = Layout::new(&cfg.out);
    let (rows, labels) = read_clustered_csv(&read_text(&layout.clustered())?)?;
    let table = LabeledTable::from_summaries(&rows, &labels)?;
    let k = &cfg.classify;
    let tree = build_tree(
        &table,
        &TreeConfig {
            min_leaf: k.min_leaf,
            max_depth: k.max_depth,
            prune: k.prune,
            prune_cf: k.prune_cf,
            missing: k.missing,
        },
    )?;
    let rules = extract_rules(&tree);
    let text: String = rules.iter().map(|r| format!("{r}\n")).collect();
    write_json(&layout.tree(), &tree)?;
    write_json(&layout.rules_json(), &rules)?;
    write_atomic(&layout.rules_txt(), text.as_bytes())
}

/// Tree split points, configured extras and (optionally) expert thresholds,
/// merged per attribute.
pub fn mining_vocabulary(
    tree: &DecisionTree,
    cfg: &MineConfig,
    expert: Option<&OntologyRuleBase>,
) -> BTreeMap<String, Vec<f64>> {
    let mut points = all_split_points(tree);
    let mut add = |attr: &str, v: &[f64]| {
        if attribute_kind(attr) == Some(AttrKind::Numeric) {
            points.entry(attr.to_string()).or_default().extend_from_slice(v);
        }
    };
    for (a, v) in &cfg.extra_split_points {
        add(a, v);
    }
    if let Some(base) = expert {
        for (a, v) in base.thresholds_by_attribute() {
            add(&a, &v);
        }
    }
    points.retain(|_, v| !v.is_empty());
    for v in points.values_mut() {
        v.sort_by(f64::total_cmp);
        v.dedup();
    }
    points
}

fn load_expert(cfg: &PipelineConfig) -> Result<Option<OntologyRuleBase>> {
    cfg.partition.expert.as_deref().map(OntologyRuleBase::load).transpose()
}

fn mine(cfg: &PipelineConfig) -> Result<()> {
    let layout = Layout::new(&cfg.out);
    let (rows, labels) = read_clustered_csv(&read_text(&layout.clustered())?)?;
    let tree: DecisionTree = read_json(&layout.tree())?;
    let m = &cfg.mine;
    let expert = if m.expert_vocabulary { load_expert(cfg)? } else { None };
    let vocab = mining_vocabulary(&tree, m, expert.as_ref());
    info!("discretization vocabulary: {vocab:?}");
    let values: Vec<_> = rows.iter().map(summary_values).collect();
    let mut tx = discretize(&crate::classification::summary_attributes(), &values, &vocab)?;
    if m.drop_any {
        for t in tx.iter_mut() {
            t.retain(|i| !matches!(i.value, ItemValue::Any));
        }
    }
    if m.include_cluster {
        tx = with_cluster_labels(tx, &labels)?;
    }
    let freq = apriori(&tx, &AprioriConfig { beta_sup: m.beta_sup, max_len: m.max_len })?;
    let rules = generate_rules(
        &freq,
        &RuleConfig { beta_conf: m.beta_conf, multi_consequent: m.multi_consequent },
    )?;
    info!("{} frequent itemsets, {} rules", freq.len(), rules.len());
    let mut buf = Vec::new();
    write_rules_csv(&rules, &mut buf)?;
    write_atomic(&layout.mined(), &buf)
}

fn partition_stage(cfg: &PipelineConfig) -> Result<PartitionReport> {
    let layout = Layout::new(&cfg.out);
    let mined = read_rules_csv(read_text(&layout.mined())?.as_bytes())?;
    let mut base = load_expert(cfg)?.unwrap_or_else(|| OntologyRuleBase {
        thresholds: Thresholds::default(),
        ..Default::default()
    });
    let p = &cfg.partition;
    if let Some(v) = p.beta_sup {
        base.thresholds.beta_sup = v;
    }
    if let Some(v) = p.beta_conf {
        base.thresholds.beta_conf = v;
    }
    if let Some(v) = p.pi_min {
        base.thresholds.pi_min = v;
    }
    let report = partition(&mined, &base, p.match_mode)?;
    write_atomic(&layout.report_json(), report.to_json_string().as_bytes())?;
    write_atomic(&layout.report_txt(), report.to_text().as_bytes())?;
    Ok(report)
}
