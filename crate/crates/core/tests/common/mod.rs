#![allow(dead_code)]
//! Brute-force oracles shared by the integration and acceptance tests.

use std::collections::{BTreeMap, BTreeSet};

use nof_core::classification::{AttributeSpec, LabeledTable, Value};
use nof_core::features::AttrKind;
use nof_core::ontology::{ExpertRule, OntologyRuleBase, PartitionReport, ReportedRule, Thresholds};
use nof_core::rulemining::{format_items, AssociationRule, Item, Transaction};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn h(labels: &[&str]) -> f64 {
    let n = labels.len() as f64;
    let mut distinct: Vec<&str> = labels.to_vec();
    distinct.sort();
    distinct.dedup();
    distinct
        .iter()
        .map(|d| {
            let p = labels.iter().filter(|l| *l == d).count() as f64 / n;
            -p * p.log2()
        })
        .sum()
}

pub fn split_info(sizes: &[usize]) -> f64 {
    let n: usize = sizes.iter().sum();
    sizes
        .iter()
        .filter(|&&s| s > 0)
        .map(|&s| {
            let p = s as f64 / n as f64;
            -p * p.log2()
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Test {
    Num(usize, f64),
    Cat(usize),
}

/// Every admissible root test by direct enumeration, best-first per the
/// average-gain rule; returns all tests tied with the winner.
pub fn oracle_root(table: &LabeledTable) -> Vec<Test> {
    let labels: Vec<&str> = table.labels.iter().map(String::as_str).collect();
    let base = h(&labels);
    let mut per_attr: Vec<(Vec<Test>, f64, f64)> = Vec::new(); // ties, gain, ratio
    for (a, spec) in table.attributes.iter().enumerate() {
        match spec.kind {
            AttrKind::Numeric => {
                let mut vals: Vec<f64> = table
                    .rows
                    .iter()
                    .map(|r| match r[a] {
                        Value::Num(v) => v,
                        _ => unreachable!(),
                    })
                    .collect();
                vals.sort_by(f64::total_cmp);
                vals.dedup();
                let mut scored: Vec<(f64, f64, f64)> = Vec::new();
                for w in vals.windows(2) {
                    let t = w[0] + (w[1] - w[0]) / 2.0;
                    let (mut le, mut gt) = (Vec::new(), Vec::new());
                    for (r, l) in table.rows.iter().zip(&labels) {
                        match r[a] {
                            Value::Num(v) if v <= t => le.push(*l),
                            _ => gt.push(*l),
                        }
                    }
                    let n = labels.len() as f64;
                    let gain = base - (le.len() as f64 * h(&le) + gt.len() as f64 * h(&gt)) / n;
                    let ratio = gain / split_info(&[le.len(), gt.len()]);
                    scored.push((t, gain, ratio));
                }
                let Some(best) = scored.iter().map(|s| s.1).reduce(f64::max) else {
                    continue;
                };
                if best <= 1e-12 {
                    continue;
                }
                let ties: Vec<&(f64, f64, f64)> = scored.iter().filter(|s| s.1 >= best - 1e-9).collect();
                per_attr.push((ties.iter().map(|s| Test::Num(a, s.0)).collect(), best, ties[0].2));
            }
            AttrKind::Categorical => {
                let mut levels: Vec<&str> = table
                    .rows
                    .iter()
                    .map(|r| match &r[a] {
                        Value::Cat(c) => c.as_str(),
                        _ => unreachable!(),
                    })
                    .collect();
                levels.sort();
                levels.dedup();
                if levels.len() < 2 {
                    continue;
                }
                let mut rem = 0.0;
                let mut sizes = Vec::new();
                for lv in &levels {
                    let sub: Vec<&str> = table
                        .rows
                        .iter()
                        .zip(&labels)
                        .filter(|(r, _)| r[a] == Value::Cat(lv.to_string()))
                        .map(|(_, l)| *l)
                        .collect();
                    rem += sub.len() as f64 * h(&sub);
                    sizes.push(sub.len());
                }
                let gain = base - rem / labels.len() as f64;
                if gain <= 1e-12 {
                    continue;
                }
                per_attr.push((vec![Test::Cat(a)], gain, gain / split_info(&sizes)));
            }
        }
    }
    if per_attr.is_empty() {
        return vec![];
    }
    let avg = per_attr.iter().map(|p| p.1).sum::<f64>() / per_attr.len() as f64;
    let eligible: Vec<&(Vec<Test>, f64, f64)> = per_attr.iter().filter(|p| p.1 >= avg - 1e-9).collect();
    let best = eligible.iter().map(|p| p.2).fold(f64::NEG_INFINITY, f64::max);
    eligible
        .iter()
        .filter(|p| p.2 >= best - 1e-9)
        .flat_map(|p| p.0.clone())
        .collect()
}

pub fn random_transactions(rng: &mut ChaCha8Rng, n_items: usize, n_tx: usize) -> Vec<Transaction> {
    (0..n_tx)
        .map(|_| {
            (0..n_items)
                .filter(|_| rng.gen_bool(0.45))
                .map(|i| Item::category(format!("i{i:02}"), "1"))
                .collect()
        })
        .collect()
}

/// Every nonempty subset of the item universe with its support count.
pub fn apriori_brute_force(tx: &[Transaction], beta: f64) -> BTreeMap<Vec<Item>, usize> {
    let universe: Vec<Item> = tx
        .iter()
        .flatten()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut out = BTreeMap::new();
    for mask in 1u32..(1 << universe.len()) {
        let set: Vec<Item> = (0..universe.len())
            .filter(|j| mask >> j & 1 == 1)
            .map(|j| universe[j].clone())
            .collect();
        let count = tx.iter().filter(|t| set.iter().all(|i| t.contains(i))).count();
        if count as f64 / tx.len() as f64 >= beta - 1e-12 {
            out.insert(set, count);
        }
    }
    out
}

pub const POOL: [&str; 6] = ["ROI=a", "ROI=b", "STIM=x", "STIM=y", "TI_max≤300", "TI_max>300"];
pub const HEADS: [&str; 2] = ["CLUSTER=P300", "CLUSTER=N170"];

pub fn random_antecedent(rng: &mut ChaCha8Rng) -> Vec<Item> {
    let k = rng.gen_range(1..=2);
    let mut items: Vec<Item> = POOL.choose_multiple(rng, k).map(|s| s.parse().unwrap()).collect();
    items.sort();
    items
}

pub fn universe(seed: u64) -> (Vec<AssociationRule>, OntologyRuleBase) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_mined = rng.gen_range(0..=20);
    let mut mined = Vec::new();
    let mut seen = BTreeSet::new();
    for _ in 0..n_mined {
        let support = rng.gen_range(0.0..1.0);
        let rule = AssociationRule {
            antecedent: random_antecedent(&mut rng),
            consequent: vec![HEADS.choose(&mut rng).unwrap().parse().unwrap()],
            support,
            confidence: rng.gen_range(support..=1.0),
            reliability: rng.gen_range(0.0..1.0),
        };
        // Mined rule sets never repeat a rule.
        if seen.insert(rule.canonical()) {
            mined.push(rule);
        }
    }
    let n_expert = rng.gen_range(0..=20 - n_mined.min(20));
    let mut rules = Vec::new();
    for i in 0..n_expert {
        // Half the expert rules copy a mined rule's shape so matches occur.
        let (antecedent, consequent) = match mined.choose(&mut rng) {
            Some(m) if rng.gen_bool(0.5) => (m.antecedent.clone(), m.consequent[0].clone()),
            _ => (
                random_antecedent(&mut rng),
                HEADS.choose(&mut rng).unwrap().parse().unwrap(),
            ),
        };
        rules.push(ExpertRule {
            id: format!("e{i}"),
            antecedent,
            consequent,
            negated: rng.gen_bool(0.25),
        });
    }
    let thresholds = Thresholds {
        beta_sup: rng.gen_range(0.05..0.6),
        beta_conf: rng.gen_range(0.05..0.9),
        pi_min: rng.gen_range(0.0..1.0),
    };
    (
        mined,
        OntologyRuleBase {
            thresholds,
            rules,
            classes: vec![],
        },
    )
}

pub fn key(ante: &[Item], cons: &Item) -> String {
    format!("{} -> {}", format_items(ante), cons)
}

pub struct Expected {
    pub arec: BTreeSet<String>,
    pub novel: BTreeSet<String>,
    pub known_hi: BTreeSet<String>,
    pub known_lw: BTreeSet<String>,
    pub missing: BTreeSet<String>,
    pub contr: BTreeSet<String>,
}

/// The set formulas evaluated literally over canonical rule strings.
pub fn partition_brute_force(mined: &[AssociationRule], base: &OntologyRuleBase) -> Expected {
    let th = base.thresholds;
    let arec: Vec<&AssociationRule> = mined
        .iter()
        .filter(|r| r.support >= th.beta_sup && r.confidence >= th.beta_conf)
        .collect();
    let pre_known: BTreeSet<String> = base
        .rules
        .iter()
        .filter(|e| !e.negated)
        .map(|e| key(&e.antecedent, &e.consequent))
        .collect();
    let negations: BTreeSet<String> = base
        .rules
        .iter()
        .filter(|e| e.negated)
        .map(|e| key(&e.antecedent, &e.consequent))
        .collect();
    let k = |r: &AssociationRule| key(&r.antecedent, &r.consequent[0]);
    let arec_keys: BTreeSet<String> = arec.iter().map(|r| k(r)).collect();
    let contr: BTreeSet<String> = arec.iter().map(|r| k(r)).filter(|s| negations.contains(s)).collect();
    let clean: Vec<&&AssociationRule> = arec.iter().filter(|r| !contr.contains(&k(r))).collect();
    let known = |hi: bool| -> BTreeSet<String> {
        clean
            .iter()
            .filter(|r| pre_known.contains(&k(r)) && (r.reliability >= th.pi_min) == hi)
            .map(|r| k(r))
            .collect()
    };
    Expected {
        novel: clean
            .iter()
            .filter(|r| !pre_known.contains(&k(r)) && r.reliability >= th.pi_min)
            .map(|r| k(r))
            .collect(),
        known_hi: known(true),
        known_lw: known(false),
        missing: base
            .rules
            .iter()
            .filter(|e| e.negated || !arec_keys.contains(&key(&e.antecedent, &e.consequent)))
            .map(|e| e.id.clone())
            .collect(),
        contr,
        arec: arec_keys,
    }
}

pub fn rules_of(v: &[ReportedRule]) -> BTreeSet<String> {
    v.iter().map(|r| r.rule.clone()).collect()
}

pub fn check(rep: &PartitionReport, exp: &Expected, seed: u64) {
    assert_eq!(rules_of(&rep.arec), exp.arec, "arec, seed {seed}");
    assert_eq!(rules_of(&rep.novel_hi_str), exp.novel, "novel, seed {seed}");
    assert_eq!(rules_of(&rep.known_hi_str), exp.known_hi, "known-hi, seed {seed}");
    assert_eq!(rules_of(&rep.known_lw_str), exp.known_lw, "known-lw, seed {seed}");
    assert_eq!(rules_of(&rep.contr), exp.contr, "contr, seed {seed}");
    let missing: BTreeSet<String> = rep.missing.iter().map(|m| m.id.clone()).collect();
    assert_eq!(missing, exp.missing, "missing, seed {seed}");
}

/// Random table with two numeric attributes, one categorical, at most
/// `max_rows` rows and three labels.
pub fn random_table(rng: &mut ChaCha8Rng, max_rows: usize) -> LabeledTable {
    let n = rng.gen_range(2..=max_rows);
    let attributes = vec![
        AttributeSpec {
            name: "x".into(),
            kind: AttrKind::Numeric,
        },
        AttributeSpec {
            name: "y".into(),
            kind: AttrKind::Numeric,
        },
        AttributeSpec {
            name: "c".into(),
            kind: AttrKind::Categorical,
        },
    ];
    let rows = (0..n)
        .map(|_| {
            vec![
                Value::Num(rng.gen_range(0..4) as f64),
                Value::Num(rng.gen_range(0..4) as f64 * 1.5),
                Value::Cat(["u", "v", "w"][rng.gen_range(0..3)].to_string()),
            ]
        })
        .collect();
    let labels = (0..n)
        .map(|_| ["A", "B", "C"][rng.gen_range(0..3)].to_string())
        .collect();
    LabeledTable::new(attributes, rows, labels).unwrap()
}
