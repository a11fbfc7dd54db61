//! Discretization of summary rows into transactions, Apriori frequent
//! itemset mining, and association rules with reliability.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::classification::{AttributeSpec, Value};
use crate::error::{NofError, Result};
use crate::features::AttrKind;

pub const CLUSTER_ATTRIBUTE: &str = "CLUSTER";
pub const RULES_CSV_HEADER: &str = "antecedent;consequent;support;confidence;reliability";

#[derive(Debug, Clone)]
pub enum ItemValue {
    Category(String),
    /// Half-open `(lo, hi]`; `lo` may be `-inf`, `hi` may be `+inf`.
    Interval { lo: f64, hi: f64 },
    /// Attribute without split points.
    Any,
}

/// One `attribute / value` pair. Equality, ordering and hashing all follow
/// the canonical printed form.
#[derive(Debug, Clone)]
pub struct Item {
    pub attribute: String,
    pub value: ItemValue,
}

fn zero_sign(v: f64) -> f64 {
    v + 0.0
}

impl Item {
    pub fn category(attribute: impl Into<String>, value: impl Into<String>) -> Self {
        Item { attribute: attribute.into(), value: ItemValue::Category(value.into()) }
    }

    pub fn interval(attribute: impl Into<String>, lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo >= hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
            return Err(NofError::invalid(format!("bad interval ({lo}, {hi}]")));
        }
        if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
            return Ok(Item::any(attribute));
        }
        Ok(Item {
            attribute: attribute.into(),
            value: ItemValue::Interval { lo: zero_sign(lo), hi: zero_sign(hi) },
        })
    }

    pub fn any(attribute: impl Into<String>) -> Self {
        Item { attribute: attribute.into(), value: ItemValue::Any }
    }

    pub fn cluster(label: impl Into<String>) -> Self {
        Item::category(CLUSTER_ATTRIBUTE, label)
    }

    pub fn canonical(&self) -> String {
        self.to_string()
    }

    /// Whether a numeric value falls in this item's interval.
    pub fn contains(&self, v: f64) -> bool {
        match self.value {
            ItemValue::Interval { lo, hi } => v > lo && v <= hi,
            ItemValue::Any => true,
            ItemValue::Category(_) => false,
        }
    }
}

impl fmt::Display for Item {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let a = &self.attribute;
        match &self.value {
            ItemValue::Category(c) => write!(f, "{a}={c}"),
            ItemValue::Any => write!(f, "{a}=ANY"),
            ItemValue::Interval { lo, hi } if *lo == f64::NEG_INFINITY => write!(f, "{a}≤{hi}"),
            ItemValue::Interval { lo, hi } if *hi == f64::INFINITY => write!(f, "{a}>{lo}"),
            ItemValue::Interval { lo, hi } => write!(f, "{a}∈({lo},{hi}]"),
        }
    }
}

impl PartialEq for Item {
    fn eq(&self, other: &Self) -> bool {
        self.canonical() == other.canonical()
    }
}

impl Eq for Item {}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        self.canonical().cmp(&other.canonical())
    }
}

impl Hash for Item {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.canonical().hash(state)
    }
}

fn parse_bound(s: &str) -> Result<f64> {
    match s.trim() {
        "-inf" | "-∞" => Ok(f64::NEG_INFINITY),
        "inf" | "+inf" | "∞" | "+∞" => Ok(f64::INFINITY),
        t => t
            .parse::<f64>()
            .ok()
            .filter(|v| !v.is_nan())
            .ok_or_else(|| NofError::invalid(format!("bad number `{t}`"))),
    }
}

impl FromStr for Item {
    type Err = NofError;

    /// Accepts `attr=value`, `attr=ANY`, `attr≤v` / `attr<=v`, `attr>v`, and
    /// `attr∈(lo,hi]` (also `attr in (lo,hi]`, with `)` allowed for an
    /// infinite upper bound).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = |why: &str| NofError::invalid(format!("cannot parse item `{s}`: {why}"));
        let (pos, op) = s
            .char_indices()
            .find(|(_, c)| matches!(c, '∈' | '≤' | '<' | '>' | '='))
            .or_else(|| s.find(" in ").map(|i| (i, 'i')))
            .ok_or_else(|| bad("no operator"))?;
        let attribute = s[..pos].trim();
        if attribute.is_empty() {
            return Err(bad("empty attribute"));
        }
        let rest = match op {
            'i' => &s[pos + 4..],
            '<' => s[pos + 1..].strip_prefix('=').ok_or_else(|| bad("use `<=`, `>` or an interval"))?,
            c => &s[pos + c.len_utf8()..],
        };
        match op {
            '=' => {
                let v = rest.trim();
                if v.is_empty() {
                    return Err(bad("empty value"));
                }
                if v == "ANY" {
                    Ok(Item::any(attribute))
                } else {
                    Ok(Item::category(attribute, v))
                }
            }
            '≤' | '<' => Item::interval(attribute, f64::NEG_INFINITY, parse_bound(rest)?),
            '>' => {
                if rest.starts_with('=') {
                    return Err(bad("`>=` has no interval form"));
                }
                Item::interval(attribute, parse_bound(rest)?, f64::INFINITY)
            }
            _ => {
                let body = rest.trim();
                let inner = body
                    .strip_prefix('(')
                    .ok_or_else(|| bad("interval must open with `(`"))?;
                let (inner, closed) = if let Some(x) = inner.strip_suffix(']') {
                    (x, true)
                } else if let Some(x) = inner.strip_suffix(')') {
                    (x, false)
                } else {
                    return Err(bad("interval must close with `]`"));
                };
                let (lo, hi) = inner.split_once(',').ok_or_else(|| bad("interval needs `lo,hi`"))?;
                let (lo, hi) = (parse_bound(lo)?, parse_bound(hi)?);
                if !closed && hi != f64::INFINITY {
                    return Err(bad("finite upper bounds are closed"));
                }
                Item::interval(attribute, lo, hi)
            }
        }
    }
}

impl Serialize for Item {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.canonical())
    }
}

impl<'de> Deserialize<'de> for Item {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

pub type Transaction = BTreeSet<Item>;

pub fn format_items(items: &[Item]) -> String {
    items.iter().map(Item::canonical).collect::<Vec<_>>().join("&")
}

pub fn parse_items(s: &str) -> Result<Vec<Item>> {
    let mut out: Vec<Item> = s.split('&').map(str::parse).collect::<Result<_>>()?;
    out.sort();
    out.dedup();
    Ok(out)
}

fn check_split_points(attr: &str, points: &[f64]) -> Result<()> {
    if points.iter().any(|p| !p.is_finite()) {
        return Err(NofError::invalid(format!("non-finite split point for `{attr}`")));
    }
    if points.windows(2).any(|w| w[0] >= w[1]) {
        return Err(NofError::invalid(format!(
            "split points for `{attr}` are not strictly ascending: {points:?}"
        )));
    }
    Ok(())
}

/// Interval item for `v` given ascending split points.
pub fn interval_item(attr: &str, points: &[f64], v: f64) -> Result<Item> {
    if points.is_empty() {
        return Ok(Item::any(attr));
    }
    let i = points.partition_point(|p| *p < v);
    let lo = if i == 0 { f64::NEG_INFINITY } else { points[i - 1] };
    let hi = points.get(i).copied().unwrap_or(f64::INFINITY);
    Item::interval(attr, lo, hi)
}

/// One item per attribute per row; numeric attributes map to the interval
/// between consecutive split points, categoricals pass through.
pub fn discretize(
    attributes: &[AttributeSpec],
    rows: &[Vec<Value>],
    split_points: &BTreeMap<String, Vec<f64>>,
) -> Result<Vec<Transaction>> {
    for (attr, points) in split_points {
        match attributes.iter().find(|a| &a.name == attr) {
            None => return Err(NofError::invalid(format!("split points for unknown attribute `{attr}`"))),
            Some(a) if a.kind == AttrKind::Categorical => {
                return Err(NofError::invalid(format!("split points given for categorical `{attr}`")))
            }
            _ => check_split_points(attr, points)?,
        }
    }
    let empty = Vec::new();
    rows.iter()
        .enumerate()
        .map(|(r, row)| {
            if row.len() != attributes.len() {
                return Err(NofError::invalid(format!("row {r} has {} values", row.len())));
            }
            attributes
                .iter()
                .zip(row)
                .map(|(a, v)| match v {
                    Value::Num(x) if x.is_finite() => {
                        interval_item(&a.name, split_points.get(&a.name).unwrap_or(&empty), *x)
                    }
                    Value::Cat(c) => Ok(Item::category(&a.name, c)),
                    other => Err(NofError::invalid(format!("row {r}: cannot discretize `{}` = {other:?}", a.name))),
                })
                .collect()
        })
        .collect()
}

/// Adds a `CLUSTER=label` item to each transaction.
pub fn with_cluster_labels(mut transactions: Vec<Transaction>, labels: &[String]) -> Result<Vec<Transaction>> {
    if labels.len() != transactions.len() {
        return Err(NofError::invalid(format!(
            "{} labels for {} transactions",
            labels.len(),
            transactions.len()
        )));
    }
    for (t, l) in transactions.iter_mut().zip(labels) {
        t.insert(Item::cluster(l));
    }
    Ok(transactions)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequentItemsets {
    pub n_transactions: usize,
    pub beta_sup: f64,
    /// Itemset (sorted items) → number of containing transactions.
    pub counts: BTreeMap<Vec<Item>, usize>,
}

impl FrequentItemsets {
    pub fn support(&self, items: &[Item]) -> Option<f64> {
        self.counts.get(items).map(|&c| c as f64 / self.n_transactions as f64)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AprioriConfig {
    pub beta_sup: f64,
    /// Largest itemset size mined; `None` for no limit.
    pub max_len: Option<usize>,
}

fn is_subset(small: &[u32], big: &[u32]) -> bool {
    let mut it = big.iter();
    small.iter().all(|x| it.any(|y| y == x))
}

fn meets(count: usize, n: usize, beta: f64) -> bool {
    count as f64 / n as f64 >= beta - 1e-12
}

/// Level-wise Apriori with the join/prune candidate generation.
pub fn apriori(transactions: &[Transaction], cfg: &AprioriConfig) -> Result<FrequentItemsets> {
    if !(cfg.beta_sup > 0.0 && cfg.beta_sup <= 1.0) {
        return Err(NofError::config(format!("beta_sup must lie in (0, 1], got {}", cfg.beta_sup)));
    }
    if transactions.is_empty() {
        return Err(NofError::invalid("no transactions to mine"));
    }
    let n = transactions.len();
    let dictionary: Vec<&Item> = transactions.iter().flatten().collect::<BTreeSet<_>>().into_iter().collect();
    let index: BTreeMap<&Item, u32> = dictionary.iter().enumerate().map(|(i, it)| (*it, i as u32)).collect();
    let encoded: Vec<Vec<u32>> = transactions
        .iter()
        .map(|t| t.iter().map(|it| index[it]).collect())
        .collect();

    let mut counts: BTreeMap<Vec<u32>, usize> = BTreeMap::new();
    let mut singles = vec![0usize; dictionary.len()];
    for t in &encoded {
        for &i in t {
            singles[i as usize] += 1;
        }
    }
    let mut level: Vec<Vec<u32>> = singles
        .iter()
        .enumerate()
        .filter(|(_, &c)| meets(c, n, cfg.beta_sup))
        .map(|(i, _)| vec![i as u32])
        .collect();
    for l in &level {
        counts.insert(l.clone(), singles[l[0] as usize]);
    }

    let mut k = 1;
    while !level.is_empty() && cfg.max_len.map_or(true, |m| k < m) {
        let frequent: BTreeSet<&Vec<u32>> = level.iter().collect();
        let mut candidates = Vec::new();
        for (a, x) in level.iter().enumerate() {
            for y in &level[a + 1..] {
                if x[..k - 1] != y[..k - 1] {
                    break;
                }
                let mut c = x.clone();
                c.push(y[k - 1]);
                let all_subsets_frequent = (0..c.len()).all(|skip| {
                    let sub: Vec<u32> = c.iter().enumerate().filter(|(j, _)| *j != skip).map(|(_, v)| *v).collect();
                    frequent.contains(&sub)
                });
                if all_subsets_frequent {
                    candidates.push(c);
                }
            }
        }
        let mut next = Vec::new();
        for c in candidates {
            let count = encoded.iter().filter(|t| is_subset(&c, t)).count();
            if meets(count, n, cfg.beta_sup) {
                counts.insert(c.clone(), count);
                next.push(c);
            }
        }
        level = next;
        k += 1;
    }

    Ok(FrequentItemsets {
        n_transactions: n,
        beta_sup: cfg.beta_sup,
        counts: counts
            .into_iter()
            .map(|(set, c)| {
                let mut items: Vec<Item> = set.iter().map(|&i| dictionary[i as usize].clone()).collect();
                items.sort();
                (items, c)
            })
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationRule {
    pub antecedent: Vec<Item>,
    pub consequent: Vec<Item>,
    pub support: f64,
    pub confidence: f64,
    pub reliability: f64,
}

impl AssociationRule {
    pub fn canonical(&self) -> String {
        format!("{} -> {}", format_items(&self.antecedent), format_items(&self.consequent))
    }
}

impl fmt::Display for AssociationRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} (sup={:.3}, conf={:.3}, rel={:.3})",
            self.canonical(),
            self.support,
            self.confidence,
            self.reliability
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleConfig {
    pub beta_conf: f64,
    pub multi_consequent: bool,
}

/// Every antecedent/consequent split of every frequent itemset of size ≥ 2
/// with confidence ≥ `beta_conf`, ordered canonically.
pub fn generate_rules(freq: &FrequentItemsets, cfg: &RuleConfig) -> Result<Vec<AssociationRule>> {
    if !(cfg.beta_conf > 0.0 && cfg.beta_conf <= 1.0) {
        return Err(NofError::config(format!("beta_conf must lie in (0, 1], got {}", cfg.beta_conf)));
    }
    let n = freq.n_transactions as f64;
    let mut rules = Vec::new();
    for (items, &count) in &freq.counts {
        let m = items.len();
        if m < 2 {
            continue;
        }
        for mask in 1u64..(1u64 << m) - 1 {
            if !cfg.multi_consequent && mask.count_ones() != 1 {
                continue;
            }
            let (mut ante, mut cons) = (Vec::new(), Vec::new());
            for (j, it) in items.iter().enumerate() {
                if mask >> j & 1 == 1 {
                    cons.push(it.clone());
                } else {
                    ante.push(it.clone());
                }
            }
            let a_count = freq.counts[&ante];
            let c_count = freq.counts[&cons];
            let confidence = count as f64 / a_count as f64;
            if confidence < cfg.beta_conf - 1e-12 {
                continue;
            }
            rules.push(AssociationRule {
                antecedent: ante,
                consequent: cons,
                support: count as f64 / n,
                confidence,
                reliability: (confidence - c_count as f64 / n).abs(),
            });
        }
    }
    rules.sort_by(|a, b| (&a.antecedent, &a.consequent).cmp(&(&b.antecedent, &b.consequent)));
    Ok(rules)
}

/// `|confidence(A → C) − support(C)|` counted directly on `transactions`.
pub fn reliability(antecedent: &[Item], consequent: &[Item], transactions: &[Transaction]) -> Result<f64> {
    let has = |t: &Transaction, items: &[Item]| items.iter().all(|i| t.contains(i));
    let a = transactions.iter().filter(|t| has(t, antecedent)).count();
    if a == 0 {
        return Err(NofError::invalid(format!(
            "antecedent `{}` has zero support",
            format_items(antecedent)
        )));
    }
    let both = transactions.iter().filter(|t| has(t, antecedent) && has(t, consequent)).count();
    let c = transactions.iter().filter(|t| has(t, consequent)).count();
    Ok((both as f64 / a as f64 - c as f64 / transactions.len() as f64).abs())
}

pub fn write_rules_csv<W: Write>(rules: &[AssociationRule], w: W) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().delimiter(b';').has_headers(false).from_writer(w);
    wr.write_record(RULES_CSV_HEADER.split(';'))?;
    for r in rules {
        wr.write_record([
            format_items(&r.antecedent),
            format_items(&r.consequent),
            r.support.to_string(),
            r.confidence.to_string(),
            r.reliability.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_rules_csv<R: Read>(r: R) -> Result<Vec<AssociationRule>> {
    let mut rd = csv::ReaderBuilder::new().delimiter(b';').has_headers(false).from_reader(r);
    let mut out = Vec::new();
    let mut saw_header = false;
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let line = i + 1;
        let perr = |m: String| NofError::Parse { line, message: m };
        if i == 0 {
            if rec.iter().collect::<Vec<_>>().join(";") != RULES_CSV_HEADER {
                return Err(perr(format!("expected header `{RULES_CSV_HEADER}`")));
            }
            saw_header = true;
            continue;
        }
        if rec.len() != 5 {
            return Err(perr(format!("expected 5 fields, got {}", rec.len())));
        }
        let num = |k: usize| {
            rec[k]
                .parse::<f64>()
                .map_err(|_| perr(format!("bad number `{}`", &rec[k])))
        };
        out.push(AssociationRule {
            antecedent: parse_items(&rec[0]).map_err(|e| perr(e.to_string()))?,
            consequent: parse_items(&rec[1]).map_err(|e| perr(e.to_string()))?,
            support: num(2)?,
            confidence: num(3)?,
            reliability: num(4)?,
        });
    }
    if !saw_header {
        return Err(NofError::Parse { line: 1, message: "empty rules file".into() });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(items: &[&str]) -> Transaction {
        items.iter().map(|s| Item::category(*s, "1")).collect()
    }

    fn it(s: &str) -> Item {
        Item::category(s, "1")
    }

    #[test]
    fn item_forms_print_and_parse() {
        let cases = [
            ("TI_max≤350", "TI_max≤350"),
            ("TI_max<=350", "TI_max≤350"),
            ("TI_max>350", "TI_max>350"),
            ("TI_max∈(300,500]", "TI_max∈(300,500]"),
            ("TI_max in (300,500]", "TI_max∈(300,500]"),
            ("TI_max∈(350,+∞)", "TI_max>350"),
            ("TI_max∈(-inf,350]", "TI_max≤350"),
            ("SP_max_ROI=frontal", "SP_max_ROI=frontal"),
            ("IN_min=ANY", "IN_min=ANY"),
            ("x∈(-inf,inf)", "x=ANY"),
        ];
        for (input, canon) in cases {
            let item: Item = input.parse().unwrap();
            assert_eq!(item.to_string(), canon, "{input}");
            assert_eq!(canon.parse::<Item>().unwrap(), item);
        }
        for bad in ["TI_max", "=x", "TI_max>=3", "TI_max∈(5,3]", "TI_max∈(1,2)", "TI_max<3"] {
            assert!(bad.parse::<Item>().is_err(), "{bad}");
        }
    }

    #[test]
    fn discretize_maps_values_to_intervals() {
        let attrs = vec![
            AttributeSpec { name: "TI_max".into(), kind: AttrKind::Numeric },
            AttributeSpec { name: "IN_min".into(), kind: AttrKind::Numeric },
            AttributeSpec { name: "ROI".into(), kind: AttrKind::Categorical },
        ];
        let rows = vec![
            vec![Value::Num(300.0), Value::Num(1.0), Value::Cat("frontal".into())],
            vec![Value::Num(400.0), Value::Num(2.0), Value::Cat("occipital".into())],
            vec![Value::Num(350.0), Value::Num(2.0), Value::Cat("occipital".into())],
        ];
        let splits = BTreeMap::from([("TI_max".to_string(), vec![350.0])]);
        let tx = discretize(&attrs, &rows, &splits).unwrap();
        let show = |t: &Transaction| t.iter().map(Item::canonical).collect::<Vec<_>>();
        assert_eq!(show(&tx[0]), vec!["IN_min=ANY", "ROI=frontal", "TI_max≤350"]);
        assert_eq!(show(&tx[1]), vec!["IN_min=ANY", "ROI=occipital", "TI_max>350"]);
        assert!(tx[2].contains(&"TI_max≤350".parse().unwrap()));
        assert!(tx.iter().all(|t| t.len() == 3));

        let unsorted = BTreeMap::from([("TI_max".to_string(), vec![450.0, 350.0])]);
        assert!(discretize(&attrs, &rows, &unsorted).is_err());
        let cat = BTreeMap::from([("ROI".to_string(), vec![1.0])]);
        assert!(discretize(&attrs, &rows, &cat).is_err());
    }

    #[test]
    fn small_apriori_example() {
        let tx = vec![t(&["A", "B"]), t(&["A", "B"]), t(&["A", "C"])];
        let f = apriori(&tx, &AprioriConfig { beta_sup: 2.0 / 3.0, max_len: None }).unwrap();
        assert_eq!(f.len(), 3);
        assert_eq!(f.support(&[it("A")]), Some(1.0));
        assert_eq!(f.support(&[it("B")]), Some(2.0 / 3.0));
        assert_eq!(f.support(&[it("A"), it("B")]), Some(2.0 / 3.0));
        assert_eq!(f.support(&[it("C")]), None);

        let rules = generate_rules(&f, &RuleConfig { beta_conf: 0.8, multi_consequent: false }).unwrap();
        assert_eq!(rules.len(), 1);
        assert_eq!(rules[0].antecedent, vec![it("B")]);
        assert_eq!(rules[0].consequent, vec![it("A")]);
        assert_eq!(rules[0].confidence, 1.0);
        assert_eq!(rules[0].reliability, 0.0);

        let all = generate_rules(&f, &RuleConfig { beta_conf: 1e-9, multi_consequent: false }).unwrap();
        assert_eq!(all.len(), 2);
        let ab = all.iter().find(|r| r.antecedent == vec![it("A")]).unwrap();
        assert!((ab.confidence - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn no_common_item_at_full_support() {
        let tx = vec![t(&["A"]), t(&["B"])];
        let f = apriori(&tx, &AprioriConfig { beta_sup: 1.0, max_len: None }).unwrap();
        assert!(f.is_empty());
        assert!(apriori(&tx, &AprioriConfig { beta_sup: 0.0, max_len: None }).is_err());
        assert!(apriori(&[], &AprioriConfig { beta_sup: 0.5, max_len: None }).is_err());
    }

    #[test]
    fn max_len_caps_itemsets() {
        let tx = vec![t(&["A", "B", "C"]); 3];
        let f = apriori(&tx, &AprioriConfig { beta_sup: 0.5, max_len: Some(2) }).unwrap();
        assert_eq!(f.len(), 6);
    }

    #[test]
    fn reliability_arithmetic() {
        let tx = vec![t(&["A", "B"]), t(&["A", "B"]), t(&["A", "C"])];
        assert_eq!(reliability(&[it("B")], &[it("A")], &tx).unwrap(), 0.0);
        let r = reliability(&[it("A")], &[it("B")], &tx).unwrap();
        assert!((r - 0.0).abs() < 1e-15);
        assert!(reliability(&[it("Z")], &[it("A")], &tx).is_err());
    }

    #[test]
    fn rules_csv_round_trip() {
        let rules = vec![AssociationRule {
            antecedent: vec!["SP_max_ROI=frontal".parse().unwrap(), "TI_max∈(300,500]".parse().unwrap()],
            consequent: vec![Item::cluster("P300")],
            support: 0.1 + 0.2,
            confidence: 2.0 / 3.0,
            reliability: 0.5,
        }];
        let mut buf = Vec::new();
        write_rules_csv(&rules, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text,
            "antecedent;consequent;support;confidence;reliability\n\
             SP_max_ROI=frontal&TI_max∈(300,500];CLUSTER=P300;0.30000000000000004;0.6666666666666666;0.5\n"
        );
        assert_eq!(read_rules_csv(buf.as_slice()).unwrap(), rules);
        assert!(read_rules_csv("a;b\n".as_bytes()).is_err());
        let err = read_rules_csv(format!("{RULES_CSV_HEADER}\nx=1;y=1;0.5;nope;0\n").as_bytes()).unwrap_err();
        assert!(matches!(err, NofError::Parse { line: 2, .. }), "{err}");
    }
}
