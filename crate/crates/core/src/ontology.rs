//! Expert rule base and the partition of mined rules into knowledge
//! categories (novel, known strong/weak, missing, contradictory).

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clustering::OntologyClass;
use crate::error::{NofError, Result};
use crate::features::{attribute_kind, AttrKind};
use crate::rulemining::{format_items, AssociationRule, Item, ItemValue, CLUSTER_ATTRIBUTE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub beta_sup: f64,
    pub beta_conf: f64,
    pub pi_min: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { beta_sup: 0.1, beta_conf: 0.8, pi_min: 0.3 }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v <= 1.0;
        if !unit(self.beta_sup) {
            return Err(NofError::config(format!("beta_sup must lie in (0, 1], got {}", self.beta_sup)));
        }
        if !unit(self.beta_conf) {
            return Err(NofError::config(format!("beta_conf must lie in (0, 1], got {}", self.beta_conf)));
        }
        if !(0.0..=1.0).contains(&self.pi_min) {
            return Err(NofError::config(format!("pi_min must lie in [0, 1], got {}", self.pi_min)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ExpertRule {
    pub id: String,
    pub antecedent: Vec<Item>,
    pub consequent: Item,
    /// `antecedent → NOT consequent`.
    pub negated: bool,
}

impl ExpertRule {
    pub fn canonical(&self) -> String {
        let not = if self.negated { "NOT " } else { "" };
        format!("{} -> {not}{}", format_items(&self.antecedent), self.consequent)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OntologyRuleBase {
    pub thresholds: Thresholds,
    pub rules: Vec<ExpertRule>,
    pub classes: Vec<OntologyClass>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawThen {
    Plain(String),
    Not { not: String },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRule {
    id: String,
    #[serde(rename = "if")]
    antecedent: Vec<String>,
    then: RawThen,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBase {
    thresholds: Thresholds,
    rules: Vec<RawRule>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    classes: Vec<OntologyClass>,
}

/// `true` if the item names a declared attribute with a value of the right
/// shape (summary attributes plus `CLUSTER`).
fn check_declared(item: &Item) -> std::result::Result<(), String> {
    let kind = if item.attribute == CLUSTER_ATTRIBUTE {
        Some(AttrKind::Categorical)
    } else {
        attribute_kind(&item.attribute)
    };
    match (kind, &item.value) {
        (None, _) => Err(format!("undeclared attribute `{}`", item.attribute)),
        (Some(_), ItemValue::Any) => Ok(()),
        (Some(AttrKind::Numeric), ItemValue::Interval { .. }) => Ok(()),
        (Some(AttrKind::Categorical), ItemValue::Category(_)) => Ok(()),
        (Some(AttrKind::Numeric), _) => Err(format!("numeric attribute `{}` needs a threshold or interval", item.attribute)),
        (Some(AttrKind::Categorical), _) => Err(format!("categorical attribute `{}` needs `=value`", item.attribute)),
    }
}

/// 1-based line of the first occurrence of `needle` at or after `from`.
fn locate(text: &str, needle: &str, from: usize) -> usize {
    text.lines()
        .enumerate()
        .skip(from.saturating_sub(1))
        .find(|(_, l)| l.contains(needle))
        .map_or(from.max(1), |(i, _)| i + 1)
}

fn parse_then(s: &str) -> Result<Item> {
    if s.contains(['=', '>', '<', '≤', '∈']) {
        s.parse()
    } else if s.trim().is_empty() {
        Err(NofError::invalid("empty consequent"))
    } else {
        Ok(Item::cluster(s.trim()))
    }
}

impl OntologyRuleBase {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: RawBase = serde_json::from_str(text).map_err(|e| NofError::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        raw.thresholds.validate()?;
        let mut rules = Vec::new();
        let mut ids = BTreeSet::new();
        for r in raw.rules {
            let anchor = locate(text, &format!("\"{}\"", r.id), 1);
            let perr = |needle: &str, message: String| NofError::Parse { line: locate(text, needle, anchor), message };
            if !ids.insert(r.id.clone()) {
                return Err(perr(&r.id, format!("duplicate rule id `{}`", r.id)));
            }
            let mut antecedent = Vec::new();
            for s in &r.antecedent {
                let item: Item = s.parse().map_err(|e: NofError| perr(s, format!("rule `{}`: {e}", r.id)))?;
                check_declared(&item).map_err(|m| perr(s, format!("rule `{}`: {m}", r.id)))?;
                antecedent.push(item);
            }
            antecedent.sort();
            antecedent.dedup();
            let (then, negated) = match &r.then {
                RawThen::Plain(s) => (s, false),
                RawThen::Not { not } => (not, true),
            };
            let consequent = parse_then(then).map_err(|e| perr(then, format!("rule `{}`: {e}", r.id)))?;
            check_declared(&consequent).map_err(|m| perr(then, format!("rule `{}`: {m}", r.id)))?;
            if antecedent.contains(&consequent) {
                return Err(perr(then, format!("rule `{}`: consequent repeats an antecedent item", r.id)));
            }
            rules.push(ExpertRule { id: r.id, antecedent, consequent, negated });
        }
        Ok(OntologyRuleBase { thresholds: raw.thresholds, rules, classes: raw.classes })
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(NofError::MissingInput(path.to_path_buf()));
        }
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> String {
        let raw = RawBase {
            thresholds: self.thresholds,
            rules: self
                .rules
                .iter()
                .map(|r| {
                    let then = if r.consequent.attribute == CLUSTER_ATTRIBUTE {
                        match &r.consequent.value {
                            ItemValue::Category(c) if !c.contains(['=', '>', '<', '≤', '∈']) => c.clone(),
                            _ => r.consequent.canonical(),
                        }
                    } else {
                        r.consequent.canonical()
                    };
                    RawRule {
                        id: r.id.clone(),
                        antecedent: r.antecedent.iter().map(Item::canonical).collect(),
                        then: if r.negated { RawThen::Not { not: then } } else { RawThen::Plain(then) },
                    }
                })
                .collect(),
            classes: self.classes.clone(),
        };
        let mut s = serde_json::to_string_pretty(&raw).expect("rule base serializes");
        s.push('\n');
        s
    }

    /// Every finite threshold used by interval items, per attribute.
    pub fn thresholds_by_attribute(&self) -> std::collections::BTreeMap<String, Vec<f64>> {
        let mut out: std::collections::BTreeMap<String, Vec<f64>> = Default::default();
        for r in &self.rules {
            for it in r.antecedent.iter().chain(std::iter::once(&r.consequent)) {
                if let ItemValue::Interval { lo, hi } = it.value {
                    let e = out.entry(it.attribute.clone()).or_default();
                    e.extend([lo, hi].into_iter().filter(|v| v.is_finite()));
                }
            }
        }
        for v in out.values_mut() {
            v.sort_by(f64::total_cmp);
            v.dedup();
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// Antecedent sets equal after interval alignment.
    #[default]
    Exact,
    /// Every expert antecedent item aligns with some mined item.
    Subsumption,
}

/// A mined item equals an expert item once the mined interval's endpoints
/// are snapped to expert thresholds lying in its closure.
pub fn items_align(mined: &Item, expert: &Item) -> bool {
    if mined.attribute != expert.attribute {
        return false;
    }
    match (&mined.value, &expert.value) {
        (ItemValue::Interval { lo, hi }, ItemValue::Interval { lo: elo, hi: ehi }) => {
            let within = |v: f64| v >= *lo && v <= *hi;
            let lo2 = if within(*elo) { *elo } else { *lo };
            let hi2 = if within(*ehi) { *ehi } else { *hi };
            lo2 == *elo && hi2 == *ehi
        }
        _ => mined == expert,
    }
}

fn antecedents_match(mined: &[Item], expert: &[Item], mode: MatchMode) -> bool {
    let aligned = |e: &Item| mined.iter().any(|m| items_align(m, e));
    match mode {
        MatchMode::Exact => {
            mined.len() == expert.len()
                && expert.iter().all(aligned)
                && mined.iter().all(|m| expert.iter().any(|e| items_align(m, e)))
        }
        MatchMode::Subsumption => expert.iter().all(aligned),
    }
}

pub fn rule_match(mined: &AssociationRule, expert: &ExpertRule, mode: MatchMode) -> bool {
    !expert.negated
        && mined.consequent.len() == 1
        && mined.consequent[0] == expert.consequent
        && antecedents_match(&mined.antecedent, &expert.antecedent, mode)
}

pub fn contradicts(mined: &AssociationRule, expert: &ExpertRule, mode: MatchMode) -> bool {
    expert.negated
        && mined.consequent.len() == 1
        && mined.consequent[0] == expert.consequent
        && antecedents_match(&mined.antecedent, &expert.antecedent, mode)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportedRule {
    pub rule: String,
    pub support: f64,
    pub confidence: f64,
    pub reliability: f64,
    /// Expert rules this rule matches (or contradicts, in the contradiction set).
    pub expert_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportedExpertRule {
    pub id: String,
    pub rule: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionReport {
    pub thresholds: Thresholds,
    pub match_mode: MatchMode,
    pub arec: Vec<ReportedRule>,
    pub novel_hi_str: Vec<ReportedRule>,
    pub known_hi_str: Vec<ReportedRule>,
    pub known_lw_str: Vec<ReportedRule>,
    pub missing: Vec<ReportedExpertRule>,
    pub contr: Vec<ReportedRule>,
    /// Unmatched rules below `pi_min`; outside the five categories.
    pub residue: Vec<ReportedRule>,
}

fn report_rule(r: &AssociationRule, ids: Vec<String>) -> ReportedRule {
    ReportedRule {
        rule: r.canonical(),
        support: r.support,
        confidence: r.confidence,
        reliability: r.reliability,
        expert_ids: ids,
    }
}

pub fn partition(mined: &[AssociationRule], base: &OntologyRuleBase, mode: MatchMode) -> Result<PartitionReport> {
    let th = base.thresholds;
    th.validate()?;
    let arec: Vec<&AssociationRule> = mined
        .iter()
        .filter(|r| r.support >= th.beta_sup && r.confidence >= th.beta_conf)
        .collect();
    let mut report = PartitionReport {
        thresholds: th,
        match_mode: mode,
        arec: Vec::new(),
        novel_hi_str: Vec::new(),
        known_hi_str: Vec::new(),
        known_lw_str: Vec::new(),
        missing: Vec::new(),
        contr: Vec::new(),
        residue: Vec::new(),
    };
    let mut matched_experts = BTreeSet::new();
    for r in &arec {
        let matches: Vec<String> = base
            .rules
            .iter()
            .filter(|e| rule_match(r, e, mode))
            .map(|e| e.id.clone())
            .collect();
        let contradicted: Vec<String> = base
            .rules
            .iter()
            .filter(|e| contradicts(r, e, mode))
            .map(|e| e.id.clone())
            .collect();
        matched_experts.extend(matches.iter().cloned());
        report.arec.push(report_rule(r, matches.clone()));
        let strong = r.reliability >= th.pi_min;
        if !contradicted.is_empty() {
            report.contr.push(report_rule(r, contradicted));
        } else if !matches.is_empty() {
            let target = if strong { &mut report.known_hi_str } else { &mut report.known_lw_str };
            target.push(report_rule(r, matches));
        } else if strong {
            report.novel_hi_str.push(report_rule(r, vec![]));
        } else {
            report.residue.push(report_rule(r, vec![]));
        }
    }
    report.missing = base
        .rules
        .iter()
        .filter(|e| !matched_experts.contains(&e.id))
        .map(|e| ReportedExpertRule { id: e.id.clone(), rule: e.canonical() })
        .collect();
    for set in [
        &mut report.arec,
        &mut report.novel_hi_str,
        &mut report.known_hi_str,
        &mut report.known_lw_str,
        &mut report.contr,
        &mut report.residue,
    ] {
        set.sort_by(|a, b| a.rule.cmp(&b.rule));
    }
    report.missing.sort_by(|a, b| (&a.rule, &a.id).cmp(&(&b.rule, &b.id)));
    Ok(report)
}

impl PartitionReport {
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(NofError::MissingInput(path.to_path_buf()));
        }
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let th = &self.thresholds;
        let _ = writeln!(
            out,
            "thresholds: beta_sup={} beta_conf={} pi_min={}",
            th.beta_sup, th.beta_conf, th.pi_min
        );
        let sections: [(&str, &[ReportedRule]); 5] = [
            ("AREC (mined rules passing beta_sup and beta_conf)", &self.arec),
            ("novel-HiStr", &self.novel_hi_str),
            ("known-HiStr", &self.known_hi_str),
            ("known-LwStr", &self.known_lw_str),
            ("contr", &self.contr),
        ];
        for (title, rules) in sections {
            section(&mut out, title, rules);
        }
        let _ = writeln!(out, "\n== missing ({}) ==", self.missing.len());
        for m in &self.missing {
            let _ = writeln!(out, "{:<10} {}", m.id, m.rule);
        }
        section(&mut out, "residue: unmatched rules below pi_min (not one of the five categories)", &self.residue);
        out
    }

    /// Set sizes, with full listings only for the sets tied to expert rules.
    pub fn to_summary_text(&self) -> String {
        let mut out = String::new();
        let th = &self.thresholds;
        let _ = writeln!(
            out,
            "thresholds: beta_sup={} beta_conf={} pi_min={}",
            th.beta_sup, th.beta_conf, th.pi_min
        );
        let _ = writeln!(out, "AREC: {}", self.arec.len());
        let _ = writeln!(out, "novel-HiStr: {}", self.novel_hi_str.len());
        let _ = writeln!(out, "residue: {}", self.residue.len());
        section(&mut out, "known-HiStr", &self.known_hi_str);
        section(&mut out, "known-LwStr", &self.known_lw_str);
        section(&mut out, "contr", &self.contr);
        let _ = writeln!(out, "\n== missing ({}) ==", self.missing.len());
        for m in &self.missing {
            let _ = writeln!(out, "{:<10} {}", m.id, m.rule);
        }
        out
    }
}

fn section(out: &mut String, title: &str, rules: &[ReportedRule]) {
    let _ = writeln!(out, "\n== {title} ({}) ==", rules.len());
    if rules.is_empty() {
        return;
    }
    let _ = writeln!(out, "{:>8} {:>8} {:>8}  {:<12} rule", "support", "conf", "rel", "expert");
    for r in rules {
        let ids = if r.expert_ids.is_empty() { "-".to_string() } else { r.expert_ids.join(",") };
        let _ = writeln!(
            out,
            "{:>8.4} {:>8.4} {:>8.4}  {:<12} {}",
            r.support, r.confidence, r.reliability, ids, r.rule
        );
    }
}
