//! Gain-ratio decision trees over factor summaries.
//!
//! Induction follows the C4.5 recipe: numeric attributes split at the
//! midpoint between consecutive distinct values (best threshold by
//! information gain), categorical attributes split multiway, and the chosen
//! test maximizes gain ratio among tests whose gain is at least the average.
//! Subtrees are then pruned bottom-up with the pessimistic (upper binomial
//! confidence limit) error estimate.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{NofError, Result};
use crate::features::{AttrKind, AttrValue, FactorSummary, ATTRIBUTES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Num(f64),
    Cat(String),
    Missing,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub name: String,
    pub kind: AttrKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTable {
    pub attributes: Vec<AttributeSpec>,
    pub rows: Vec<Vec<Value>>,
    pub labels: Vec<String>,
}

impl LabeledTable {
    pub fn new(attributes: Vec<AttributeSpec>, rows: Vec<Vec<Value>>, labels: Vec<String>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(NofError::invalid(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != attributes.len() {
                return Err(NofError::invalid(format!(
                    "row {i} has {} values for {} attributes",
                    r.len(),
                    attributes.len()
                )));
            }
            for (v, a) in r.iter().zip(&attributes) {
                let ok = matches!(
                    (v, a.kind),
                    (Value::Missing, _) | (Value::Num(_), AttrKind::Numeric) | (Value::Cat(_), AttrKind::Categorical)
                );
                if !ok {
                    return Err(NofError::invalid(format!(
                        "row {i}: value {v:?} does not fit {} attribute `{}`",
                        kind_name(a.kind),
                        a.name
                    )));
                }
            }
        }
        Ok(LabeledTable { attributes, rows, labels })
    }

    /// The 13 summary attributes, labeled by cluster.
    pub fn from_summaries(rows: &[FactorSummary], labels: &[String]) -> Result<Self> {
        let attributes = summary_attributes();
        let values = rows.iter().map(summary_values).collect();
        Self::new(attributes, values, labels.to_vec())
    }

    pub fn numeric(names: &[&str], rows: Vec<Vec<f64>>, labels: &[&str]) -> Result<Self> {
        let attributes = names
            .iter()
            .map(|n| AttributeSpec { name: n.to_string(), kind: AttrKind::Numeric })
            .collect();
        let rows = rows.into_iter().map(|r| r.into_iter().map(Value::Num).collect()).collect();
        Self::new(attributes, rows, labels.iter().map(|l| l.to_string()).collect())
    }
}

fn kind_name(k: AttrKind) -> &'static str {
    match k {
        AttrKind::Numeric => "numeric",
        AttrKind::Categorical => "categorical",
    }
}

pub fn summary_attributes() -> Vec<AttributeSpec> {
    ATTRIBUTES
        .iter()
        .map(|(n, k)| AttributeSpec { name: n.to_string(), kind: *k })
        .collect()
}

pub fn summary_values(s: &FactorSummary) -> Vec<Value> {
    ATTRIBUTES
        .iter()
        .map(|(n, _)| match s.value(n).expect("known attribute") {
            AttrValue::Num(v) => Value::Num(v),
            AttrValue::Cat(c) => Value::Cat(c.to_string()),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    Error,
    MajorityChild,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub min_leaf: usize,
    pub max_depth: usize,
    pub prune: bool,
    /// Confidence factor of the pessimistic error estimate.
    pub prune_cf: f64,
    pub missing: MissingPolicy,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            min_leaf: 2,
            max_depth: 10,
            prune: true,
            prune_cf: 0.25,
            missing: MissingPolicy::Error,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        label: String,
        counts: BTreeMap<String, usize>,
        /// Pessimistic error estimate (observed errors plus the upper
        /// confidence correction).
        error_estimate: f64,
    },
    Numeric {
        attribute: usize,
        threshold: f64,
        counts: BTreeMap<String, usize>,
        le: Box<Node>,
        gt: Box<Node>,
    },
    Categorical {
        attribute: usize,
        counts: BTreeMap<String, usize>,
        branches: Vec<(String, Node)>,
        /// Branch taking unseen (and, by policy, missing) values.
        majority: usize,
    },
}

impl Node {
    pub fn counts(&self) -> &BTreeMap<String, usize> {
        match self {
            Node::Leaf { counts, .. } | Node::Numeric { counts, .. } | Node::Categorical { counts, .. } => counts,
        }
    }

    pub fn n(&self) -> usize {
        self.counts().values().sum()
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            Node::Leaf { .. } => 1,
            Node::Numeric { le, gt, .. } => le.leaf_count() + gt.leaf_count(),
            Node::Categorical { branches, .. } => branches.iter().map(|(_, c)| c.leaf_count()).sum(),
        }
    }

    fn subtree_estimate(&self) -> f64 {
        match self {
            Node::Leaf { error_estimate, .. } => *error_estimate,
            Node::Numeric { le, gt, .. } => le.subtree_estimate() + gt.subtree_estimate(),
            Node::Categorical { branches, .. } => branches.iter().map(|(_, c)| c.subtree_estimate()).sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub attributes: Vec<AttributeSpec>,
    pub root: Node,
    pub n_rows: usize,
    pub config: TreeConfig,
}

impl DecisionTree {
    pub fn leaf_count(&self) -> usize {
        self.root.leaf_count()
    }

    /// Sum of leaf pessimistic error estimates.
    pub fn error_estimate(&self) -> f64 {
        self.root.subtree_estimate()
    }

    pub fn attribute_index(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }
}

fn entropy_of(counts: impl IntoIterator<Item = usize>) -> f64 {
    let counts: Vec<usize> = counts.into_iter().filter(|&c| c > 0).collect();
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    counts
        .iter()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

fn label_counts<'a>(labels: impl Iterator<Item = &'a String>) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for l in labels {
        *m.entry(l.clone()).or_insert(0) += 1;
    }
    m
}

/// Most frequent label; ties go to the lexicographically smallest.
fn majority(counts: &BTreeMap<String, usize>) -> (String, usize) {
    let mut best: Option<(&String, usize)> = None;
    for (l, &c) in counts {
        if best.map_or(true, |(_, bc)| c > bc) {
            best = Some((l, c));
        }
    }
    best.map(|(l, c)| (l.clone(), c)).unwrap_or_default()
}

/// Extra errors predicted at confidence `cf` for a leaf with `n` cases and
/// `e` observed errors (upper binomial limit, C4.5 approximation).
pub fn added_errors(n: f64, e: f64, cf: f64) -> f64 {
    if n <= 0.0 {
        return 0.0;
    }
    if e < 1e-6 {
        return n * (1.0 - cf.powf(1.0 / n));
    }
    if e < 0.9999 {
        let v = n * (1.0 - cf.powf(1.0 / n));
        return v + e * (added_errors(n, 1.0, cf) - v);
    }
    if e + 0.5 >= n {
        return 0.67 * (n - e);
    }
    let z = Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(1.0 - cf);
    let coeff = z * z;
    let val = e + 0.5;
    let pr = (val + coeff / 2.0 + z * (val * (1.0 - val / n) + coeff / 4.0).sqrt()) / (n + coeff);
    n * pr - e
}

/// A candidate test on one attribute, scored on a row subset.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitCandidate {
    pub attribute: usize,
    /// `Some` for numeric tests.
    pub threshold: Option<f64>,
    pub gain: f64,
    pub gain_ratio: f64,
}

fn numeric_value(v: &Value) -> Option<f64> {
    match v {
        Value::Num(x) => Some(*x),
        _ => None,
    }
}

/// Best test per attribute (numeric: threshold with the highest gain,
/// ties to the lower threshold), restricted to tests with positive gain.
pub fn attribute_candidates(table: &LabeledTable, idx: &[usize], min_leaf: usize) -> Vec<SplitCandidate> {
    let base = entropy_of(label_counts(idx.iter().map(|&i| &table.labels[i])).into_values());
    let min_leaf = min_leaf.max(1);
    let mut out = Vec::new();
    for (a, spec) in table.attributes.iter().enumerate() {
        // Gain is measured on rows with a known value and scaled by their share.
        let known: Vec<usize> = idx.iter().copied().filter(|&i| table.rows[i][a] != Value::Missing).collect();
        if known.len() < 2 {
            continue;
        }
        let frac = known.len() as f64 / idx.len() as f64;
        let known_base = if known.len() == idx.len() {
            base
        } else {
            entropy_of(label_counts(known.iter().map(|&i| &table.labels[i])).into_values())
        };
        match spec.kind {
            AttrKind::Numeric => {
                let mut pairs: Vec<(f64, &String)> = known
                    .iter()
                    .map(|&i| (numeric_value(&table.rows[i][a]).expect("numeric"), &table.labels[i]))
                    .collect();
                pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
                let total = label_counts(pairs.iter().map(|p| p.1));
                let mut left: BTreeMap<String, usize> = BTreeMap::new();
                let n = pairs.len();
                let mut best: Option<(f64, f64, f64)> = None; // gain, ratio, threshold
                for k in 0..n - 1 {
                    *left.entry(pairs[k].1.clone()).or_insert(0) += 1;
                    if pairs[k].0 == pairs[k + 1].0 {
                        continue;
                    }
                    let nl = k + 1;
                    let nr = n - nl;
                    if nl < min_leaf || nr < min_leaf {
                        continue;
                    }
                    let right = total.iter().map(|(l, c)| c - left.get(l).copied().unwrap_or(0));
                    let h = (nl as f64 * entropy_of(left.values().copied()) + nr as f64 * entropy_of(right))
                        / n as f64;
                    let gain = frac * (known_base - h);
                    let split_info = entropy_of([nl, nr, idx.len() - n]);
                    let ratio = if split_info > 0.0 { gain / split_info } else { 0.0 };
                    let t = pairs[k].0 + (pairs[k + 1].0 - pairs[k].0) / 2.0;
                    if best.map_or(true, |(g, ..)| gain > g + 1e-12) {
                        best = Some((gain, ratio, t));
                    }
                }
                if let Some((gain, ratio, t)) = best {
                    if gain > 1e-12 {
                        out.push(SplitCandidate { attribute: a, threshold: Some(t), gain, gain_ratio: ratio });
                    }
                }
            }
            AttrKind::Categorical => {
                let mut groups: BTreeMap<&str, Vec<&String>> = BTreeMap::new();
                for &i in &known {
                    if let Value::Cat(c) = &table.rows[i][a] {
                        groups.entry(c.as_str()).or_default().push(&table.labels[i]);
                    }
                }
                if groups.values().filter(|g| g.len() >= min_leaf).count() < 2 {
                    continue;
                }
                let n = known.len() as f64;
                let h: f64 = groups
                    .values()
                    .map(|g| g.len() as f64 * entropy_of(label_counts(g.iter().copied()).into_values()))
                    .sum::<f64>()
                    / n;
                let gain = frac * (known_base - h);
                let mut sizes: Vec<usize> = groups.values().map(Vec::len).collect();
                sizes.push(idx.len() - known.len());
                let split_info = entropy_of(sizes);
                let ratio = if split_info > 0.0 { gain / split_info } else { 0.0 };
                if gain > 1e-12 {
                    out.push(SplitCandidate { attribute: a, threshold: None, gain, gain_ratio: ratio });
                }
            }
        }
    }
    out
}

/// Highest gain ratio among candidates whose gain reaches the average;
/// ties keep the earliest attribute.
pub fn choose_split(cands: &[SplitCandidate]) -> Option<&SplitCandidate> {
    if cands.is_empty() {
        return None;
    }
    let avg = cands.iter().map(|c| c.gain).sum::<f64>() / cands.len() as f64;
    let mut best: Option<&SplitCandidate> = None;
    for c in cands.iter().filter(|c| c.gain >= avg - 1e-12) {
        if best.map_or(true, |b| c.gain_ratio > b.gain_ratio + 1e-12) {
            best = Some(c);
        }
    }
    best
}

fn make_leaf(table: &LabeledTable, idx: &[usize], cf: f64) -> Node {
    let counts = label_counts(idx.iter().map(|&i| &table.labels[i]));
    leaf_from_counts(counts, cf)
}

fn leaf_from_counts(counts: BTreeMap<String, usize>, cf: f64) -> Node {
    let (label, hits) = majority(&counts);
    let n: usize = counts.values().sum();
    let e = (n - hits) as f64;
    Node::Leaf {
        label,
        counts,
        error_estimate: e + added_errors(n as f64, e, cf),
    }
}

fn grow(table: &LabeledTable, idx: &[usize], depth: usize, cfg: &TreeConfig) -> Node {
    let counts = label_counts(idx.iter().map(|&i| &table.labels[i]));
    if counts.len() <= 1 || depth >= cfg.max_depth || idx.len() < 2 * cfg.min_leaf.max(1) {
        return make_leaf(table, idx, cfg.prune_cf);
    }
    let cands = attribute_candidates(table, idx, cfg.min_leaf);
    let Some(split) = choose_split(&cands) else {
        return make_leaf(table, idx, cfg.prune_cf);
    };
    let a = split.attribute;
    match split.threshold {
        Some(t) => {
            let (mut le, mut gt): (Vec<usize>, Vec<usize>) = (Vec::new(), Vec::new());
            let mut missing = Vec::new();
            for &i in idx {
                match numeric_value(&table.rows[i][a]) {
                    Some(v) if v <= t => le.push(i),
                    Some(_) => gt.push(i),
                    None => missing.push(i),
                }
            }
            if le.len() >= gt.len() {
                le.extend(missing);
                le.sort_unstable();
            } else {
                gt.extend(missing);
                gt.sort_unstable();
            }
            Node::Numeric {
                attribute: a,
                threshold: t,
                counts,
                le: Box::new(grow(table, &le, depth + 1, cfg)),
                gt: Box::new(grow(table, &gt, depth + 1, cfg)),
            }
        }
        None => {
            let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
            let mut missing = Vec::new();
            for &i in idx {
                match &table.rows[i][a] {
                    Value::Cat(c) => groups.entry(c.clone()).or_default().push(i),
                    _ => missing.push(i),
                }
            }
            let majority = groups
                .values()
                .enumerate()
                .fold((0, 0), |(bi, bn), (k, g)| if g.len() > bn { (k, g.len()) } else { (bi, bn) })
                .0;
            let mut branches: Vec<(String, Vec<usize>)> = groups.into_iter().collect();
            branches[majority].1.extend(missing);
            branches[majority].1.sort_unstable();
            Node::Categorical {
                attribute: a,
                counts,
                branches: branches
                    .into_iter()
                    .map(|(v, rows)| {
                        let child = grow(table, &rows, depth + 1, cfg);
                        (v, child)
                    })
                    .collect(),
                majority,
            }
        }
    }
}

/// Subtree replacement: a subtree collapses to a leaf when the leaf's
/// pessimistic estimate does not exceed the subtree's by more than 0.1.
fn prune(node: Node, cf: f64) -> Node {
    let node = match node {
        Node::Numeric { attribute, threshold, counts, le, gt } => Node::Numeric {
            attribute,
            threshold,
            counts,
            le: Box::new(prune(*le, cf)),
            gt: Box::new(prune(*gt, cf)),
        },
        Node::Categorical { attribute, counts, branches, majority } => Node::Categorical {
            attribute,
            counts,
            branches: branches.into_iter().map(|(v, c)| (v, prune(c, cf))).collect(),
            majority,
        },
        leaf => return leaf,
    };
    let as_leaf = leaf_from_counts(node.counts().clone(), cf);
    let leaf_est = match &as_leaf {
        Node::Leaf { error_estimate, .. } => *error_estimate,
        _ => unreachable!(),
    };
    if leaf_est <= node.subtree_estimate() + 0.1 {
        as_leaf
    } else {
        node
    }
}

pub fn build_tree(table: &LabeledTable, cfg: &TreeConfig) -> Result<DecisionTree> {
    if table.rows.is_empty() {
        return Err(NofError::invalid("cannot build a tree from zero rows"));
    }
    if !(cfg.prune_cf > 0.0 && cfg.prune_cf < 1.0) {
        return Err(NofError::config("prune_cf must lie in (0, 1)"));
    }
    for (a, spec) in table.attributes.iter().enumerate() {
        let missing = table.rows.iter().filter(|r| r[a] == Value::Missing).count();
        if missing == table.rows.len() {
            return Err(NofError::invalid(format!("attribute `{}` is missing in every row", spec.name)));
        }
        if missing > 0 && cfg.missing == MissingPolicy::Error {
            return Err(NofError::invalid(format!(
                "attribute `{}` has {missing} missing values",
                spec.name
            )));
        }
    }
    let idx: Vec<usize> = (0..table.rows.len()).collect();
    let mut root = grow(table, &idx, 0, cfg);
    if cfg.prune {
        root = prune(root, cfg.prune_cf);
    }
    Ok(DecisionTree {
        attributes: table.attributes.clone(),
        root,
        n_rows: table.rows.len(),
        config: cfg.clone(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub label: String,
    /// Set when routing used a majority-child fallback.
    pub flagged: bool,
}

pub fn classify(tree: &DecisionTree, row: &[Value]) -> Result<Classification> {
    if row.len() != tree.attributes.len() {
        return Err(NofError::invalid(format!(
            "row has {} values, tree expects {}",
            row.len(),
            tree.attributes.len()
        )));
    }
    let mut node = &tree.root;
    let mut flagged = false;
    loop {
        match node {
            Node::Leaf { label, .. } => {
                return Ok(Classification { label: label.clone(), flagged });
            }
            Node::Numeric { attribute, threshold, le, gt, .. } => match &row[*attribute] {
                Value::Num(v) => node = if *v <= *threshold { le } else { gt },
                Value::Missing if tree.config.missing == MissingPolicy::MajorityChild => {
                    flagged = true;
                    node = if le.n() >= gt.n() { le } else { gt };
                }
                other => {
                    return Err(NofError::invalid(format!(
                        "attribute `{}` needs a numeric value, got {other:?}",
                        tree.attributes[*attribute].name
                    )))
                }
            },
            Node::Categorical { attribute, branches, majority, .. } => match &row[*attribute] {
                Value::Cat(c) => match branches.iter().find(|(v, _)| v == c) {
                    Some((_, child)) => node = child,
                    None => {
                        flagged = true;
                        node = &branches[*majority].1;
                    }
                },
                Value::Missing if tree.config.missing == MissingPolicy::MajorityChild => {
                    flagged = true;
                    node = &branches[*majority].1;
                }
                other => {
                    return Err(NofError::invalid(format!(
                        "attribute `{}` needs a categorical value, got {other:?}",
                        tree.attributes[*attribute].name
                    )))
                }
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Condition {
    Le { attribute: String, value: f64 },
    Gt { attribute: String, value: f64 },
    Eq { attribute: String, value: String },
}

impl Condition {
    pub fn attribute(&self) -> &str {
        match self {
            Condition::Le { attribute, .. } | Condition::Gt { attribute, .. } | Condition::Eq { attribute, .. } => {
                attribute
            }
        }
    }

    pub fn holds(&self, tree: &DecisionTree, row: &[Value]) -> bool {
        let Some(a) = tree.attribute_index(self.attribute()) else {
            return false;
        };
        match (self, &row[a]) {
            (Condition::Le { value, .. }, Value::Num(v)) => v <= value,
            (Condition::Gt { value, .. }, Value::Num(v)) => v > value,
            (Condition::Eq { value, .. }, Value::Cat(c)) => c == value,
            _ => false,
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::Le { attribute, value } => write!(f, "{attribute} <= {value}"),
            Condition::Gt { attribute, value } => write!(f, "{attribute} > {value}"),
            Condition::Eq { attribute, value } => write!(f, "{attribute} = {value}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationRule {
    pub antecedent: Vec<Condition>,
    pub consequent: String,
    pub coverage: usize,
    pub confidence: f64,
}

impl ClassificationRule {
    pub fn matches(&self, tree: &DecisionTree, row: &[Value]) -> bool {
        self.antecedent.iter().all(|c| c.holds(tree, row))
    }
}

impl fmt::Display for ClassificationRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("IF ")?;
        if self.antecedent.is_empty() {
            f.write_str("TRUE")?;
        }
        for (i, c) in self.antecedent.iter().enumerate() {
            if i > 0 {
                f.write_str(" AND ")?;
            }
            write!(f, "{c}")?;
        }
        write!(
            f,
            " THEN {} (cov={}, conf={:.2})",
            self.consequent, self.coverage, self.confidence
        )
    }
}

/// Keeps only the tightest bound per numeric attribute; order of first
/// appearance is preserved.
fn simplify(path: &[Condition]) -> Vec<Condition> {
    let mut out: Vec<Condition> = Vec::new();
    for c in path {
        let existing = out.iter_mut().find(|o| {
            o.attribute() == c.attribute() && std::mem::discriminant(*o) == std::mem::discriminant(c)
        });
        match (existing, c) {
            (Some(Condition::Le { value, .. }), Condition::Le { value: v, .. }) => *value = value.min(*v),
            (Some(Condition::Gt { value, .. }), Condition::Gt { value: v, .. }) => *value = value.max(*v),
            (Some(_), _) => {}
            (None, c) => out.push(c.clone()),
        }
    }
    out
}

pub fn extract_rules(tree: &DecisionTree) -> Vec<ClassificationRule> {
    fn walk(tree: &DecisionTree, node: &Node, path: &mut Vec<Condition>, out: &mut Vec<ClassificationRule>) {
        match node {
            Node::Leaf { label, counts, .. } => {
                let n: usize = counts.values().sum();
                let hits = counts.get(label).copied().unwrap_or(0);
                out.push(ClassificationRule {
                    antecedent: simplify(path),
                    consequent: label.clone(),
                    coverage: n,
                    confidence: if n > 0 { hits as f64 / n as f64 } else { 0.0 },
                });
            }
            Node::Numeric { attribute, threshold, le, gt, .. } => {
                let name = tree.attributes[*attribute].name.clone();
                path.push(Condition::Le { attribute: name.clone(), value: *threshold });
                walk(tree, le, path, out);
                path.pop();
                path.push(Condition::Gt { attribute: name, value: *threshold });
                walk(tree, gt, path, out);
                path.pop();
            }
            Node::Categorical { attribute, branches, .. } => {
                let name = &tree.attributes[*attribute].name;
                for (v, child) in branches {
                    path.push(Condition::Eq { attribute: name.clone(), value: v.clone() });
                    walk(tree, child, path, out);
                    path.pop();
                }
            }
        }
    }
    let mut out = Vec::new();
    walk(tree, &tree.root, &mut Vec::new(), &mut out);
    out
}

pub fn split_points(tree: &DecisionTree, attribute: &str) -> Result<Vec<f64>> {
    let a = tree
        .attribute_index(attribute)
        .ok_or_else(|| NofError::invalid(format!("tree has no attribute `{attribute}`")))?;
    if tree.attributes[a].kind != AttrKind::Numeric {
        return Err(NofError::invalid(format!("attribute `{attribute}` is categorical")));
    }
    fn collect(node: &Node, a: usize, out: &mut Vec<f64>) {
        match node {
            Node::Leaf { .. } => {}
            Node::Numeric { attribute, threshold, le, gt, .. } => {
                if *attribute == a {
                    out.push(*threshold);
                }
                collect(le, a, out);
                collect(gt, a, out);
            }
            Node::Categorical { branches, .. } => {
                for (_, c) in branches {
                    collect(c, a, out);
                }
            }
        }
    }
    let mut out = Vec::new();
    collect(&tree.root, a, &mut out);
    out.sort_by(f64::total_cmp);
    out.dedup();
    Ok(out)
}

/// Split points of every numeric attribute the tree knows, keyed by name.
pub fn all_split_points(tree: &DecisionTree) -> BTreeMap<String, Vec<f64>> {
    tree.attributes
        .iter()
        .filter(|a| a.kind == AttrKind::Numeric)
        .map(|a| (a.name.clone(), split_points(tree, &a.name).expect("numeric attribute")))
        .collect()
}
