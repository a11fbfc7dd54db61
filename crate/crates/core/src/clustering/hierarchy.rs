//! Divisive and agglomerative taxonomies over observation rows.
//!
//! Node heights: agglomerative nodes carry their merge distance (leaves 0),
//! divisive nodes carry their within-cluster sum of squared errors. Both are
//! monotone along every root-to-leaf path, so a single "height cut" rule
//! serves both trees.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ObservationMatrix;
use crate::error::{NofError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyNode {
    pub name: String,
    /// Observation indices, ascending.
    pub members: Vec<usize>,
    pub height: f64,
    pub children: Option<(usize, usize)>,
    pub parent: Option<usize>,
}

impl TaxonomyNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    Single,
    Complete,
    Average,
}

impl std::str::FromStr for Linkage {
    type Err = NofError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(Linkage::Single),
            "complete" => Ok(Linkage::Complete),
            "average" => Ok(Linkage::Average),
            other => Err(NofError::config(format!("unknown linkage `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum TaxonomyKind {
    Agglomerative { linkage: Linkage },
    Divisive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Taxonomy {
    pub kind: TaxonomyKind,
    pub n_obs: usize,
    pub root: usize,
    pub nodes: Vec<TaxonomyNode>,
}

impl Taxonomy {
    pub fn leaves(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![self.root];
        while let Some(i) = stack.pop() {
            match self.nodes[i].children {
                Some((a, b)) => {
                    stack.push(b);
                    stack.push(a);
                }
                None => out.push(i),
            }
        }
        out
    }

    pub fn root_height(&self) -> f64 {
        self.nodes[self.root].height
    }

    /// Leaves become `C1..Cm` left to right; internal nodes `T1..` in
    /// preorder, root first.
    fn assign_names(&mut self) {
        let mut stack = vec![self.root];
        let (mut leaf, mut inner) = (0, 0);
        while let Some(i) = stack.pop() {
            match self.nodes[i].children {
                Some((a, b)) => {
                    inner += 1;
                    self.nodes[i].name = format!("T{inner}");
                    stack.push(b);
                    stack.push(a);
                }
                None => {
                    leaf += 1;
                    self.nodes[i].name = format!("C{leaf}");
                }
            }
        }
    }

    fn set_parents(&mut self) {
        for i in 0..self.nodes.len() {
            if let Some((a, b)) = self.nodes[i].children {
                self.nodes[a].parent = Some(i);
                self.nodes[b].parent = Some(i);
            }
        }
    }
}

fn sq_dist(x: &ObservationMatrix, a: usize, b: usize) -> f64 {
    (x.data.row(a) - x.data.row(b)).norm_squared()
}

pub fn agglomerative_hierarchy(x: &ObservationMatrix, linkage: Linkage) -> Result<Taxonomy> {
    let n = x.n_rows();
    if n == 0 {
        return Err(NofError::invalid("no observations to cluster"));
    }
    let mut nodes: Vec<TaxonomyNode> = (0..n)
        .map(|i| TaxonomyNode {
            name: String::new(),
            members: vec![i],
            height: 0.0,
            children: None,
            parent: None,
        })
        .collect();

    // Active clusters by node index; pairwise linkage distances.
    let mut active: Vec<usize> = (0..n).collect();
    let mut dist: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for a in 0..n {
        for b in (a + 1)..n {
            dist.insert((a, b), sq_dist(x, a, b).sqrt());
        }
    }
    let key = |a: usize, b: usize| if a < b { (a, b) } else { (b, a) };

    while active.len() > 1 {
        let mut best: Option<((usize, usize), f64)> = None;
        for (i, &a) in active.iter().enumerate() {
            for &b in &active[i + 1..] {
                let d = dist[&key(a, b)];
                if best.map_or(true, |(_, bd)| d < bd) {
                    best = Some((key(a, b), d));
                }
            }
        }
        let ((a, b), h) = best.expect("at least two active clusters");
        let (na, nb) = (nodes[a].members.len() as f64, nodes[b].members.len() as f64);
        let mut members = nodes[a].members.clone();
        members.extend_from_slice(&nodes[b].members);
        members.sort_unstable();
        let new = nodes.len();
        nodes.push(TaxonomyNode {
            name: String::new(),
            members,
            height: h,
            children: Some((a, b)),
            parent: None,
        });
        active.retain(|&c| c != a && c != b);
        for &c in &active {
            let da = dist[&key(a, c)];
            let db = dist[&key(b, c)];
            let d = match linkage {
                Linkage::Single => da.min(db),
                Linkage::Complete => da.max(db),
                Linkage::Average => (na * da + nb * db) / (na + nb),
            };
            dist.insert(key(c, new), d);
        }
        active.push(new);
    }

    let mut t = Taxonomy {
        kind: TaxonomyKind::Agglomerative { linkage },
        n_obs: n,
        root: nodes.len() - 1,
        nodes,
    };
    t.set_parents();
    t.assign_names();
    Ok(t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivisiveConfig {
    pub max_depth: usize,
    pub min_leaf: usize,
    /// A split must cut the node's SSE by at least this fraction.
    pub min_gain: f64,
    pub seed: u64,
    /// k-means restarts per split.
    pub n_init: usize,
}

impl Default for DivisiveConfig {
    fn default() -> Self {
        DivisiveConfig {
            max_depth: 8,
            min_leaf: 1,
            min_gain: 0.1,
            seed: 0,
            n_init: 10,
        }
    }
}

fn sse(x: &ObservationMatrix, members: &[usize]) -> f64 {
    if members.is_empty() {
        return 0.0;
    }
    let d = x.dim();
    let mut mean = vec![0.0; d];
    for &i in members {
        for j in 0..d {
            mean[j] += x.data[(i, j)];
        }
    }
    for m in mean.iter_mut() {
        *m /= members.len() as f64;
    }
    members
        .iter()
        .map(|&i| (0..d).map(|j| (x.data[(i, j)] - mean[j]).powi(2)).sum::<f64>())
        .sum()
}

/// Best of `n_init` seeded Lloyd runs with k = 2. Returns the two member
/// lists (the one holding the lowest index first) or `None` if every run
/// collapses to one side.
fn two_means(
    x: &ObservationMatrix,
    members: &[usize],
    rng: &mut ChaCha8Rng,
    n_init: usize,
) -> Option<(Vec<usize>, Vec<usize>)> {
    let d = x.dim();
    let mut best: Option<(f64, Vec<usize>, Vec<usize>)> = None;
    for _ in 0..n_init.max(1) {
        // k-means++ with two centers.
        let first = members[rng.gen_range(0..members.len())];
        let w: Vec<f64> = members.iter().map(|&i| sq_dist(x, i, first)).collect();
        let total: f64 = w.iter().sum();
        if total == 0.0 {
            return None;
        }
        let mut u = rng.gen::<f64>() * total;
        let mut second = *members.last().expect("non-empty");
        for (k, &i) in members.iter().enumerate() {
            if u < w[k] {
                second = i;
                break;
            }
            u -= w[k];
        }
        let mut centers = [x.row(first), x.row(second)];
        let mut assign = vec![0usize; members.len()];
        for _ in 0..100 {
            let mut changed = false;
            for (k, &i) in members.iter().enumerate() {
                let row = x.row(i);
                let d0: f64 = row.iter().zip(&centers[0]).map(|(a, b)| (a - b).powi(2)).sum();
                let d1: f64 = row.iter().zip(&centers[1]).map(|(a, b)| (a - b).powi(2)).sum();
                let c = usize::from(d1 < d0);
                if c != assign[k] {
                    assign[k] = c;
                    changed = true;
                }
            }
            let mut sums = [vec![0.0; d], vec![0.0; d]];
            let mut counts = [0usize; 2];
            for (k, &i) in members.iter().enumerate() {
                counts[assign[k]] += 1;
                for j in 0..d {
                    sums[assign[k]][j] += x.data[(i, j)];
                }
            }
            for c in 0..2 {
                if counts[c] > 0 {
                    centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
                }
            }
            if !changed {
                break;
            }
        }
        let a: Vec<usize> = members.iter().zip(&assign).filter(|(_, c)| **c == 0).map(|(i, _)| *i).collect();
        let b: Vec<usize> = members.iter().zip(&assign).filter(|(_, c)| **c == 1).map(|(i, _)| *i).collect();
        if a.is_empty() || b.is_empty() {
            continue;
        }
        let cost = sse(x, &a) + sse(x, &b);
        if best.as_ref().map_or(true, |(bc, ..)| cost < *bc) {
            best = Some((cost, a, b));
        }
    }
    best.map(|(_, a, b)| if a[0] < b[0] { (a, b) } else { (b, a) })
}

pub fn divisive_hierarchy(x: &ObservationMatrix, cfg: &DivisiveConfig) -> Result<Taxonomy> {
    let n = x.n_rows();
    if n == 0 {
        return Err(NofError::invalid("no observations to cluster"));
    }
    let all: Vec<usize> = (0..n).collect();
    let mut nodes = vec![TaxonomyNode {
        name: String::new(),
        height: sse(x, &all),
        members: all,
        children: None,
        parent: None,
    }];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    // (node, depth), processed breadth-first for a stable RNG stream.
    let mut queue = std::collections::VecDeque::from([(0usize, 0usize)]);
    while let Some((idx, depth)) = queue.pop_front() {
        let members = nodes[idx].members.clone();
        let parent_sse = nodes[idx].height;
        if depth >= cfg.max_depth || members.len() < 2 * cfg.min_leaf.max(1) || parent_sse <= 0.0 {
            continue;
        }
        let Some((a, b)) = two_means(x, &members, &mut rng, cfg.n_init) else {
            continue;
        };
        if a.len() < cfg.min_leaf || b.len() < cfg.min_leaf {
            continue;
        }
        let (sa, sb) = (sse(x, &a), sse(x, &b));
        if (parent_sse - sa - sb) < cfg.min_gain * parent_sse {
            continue;
        }
        let ia = nodes.len();
        nodes.push(TaxonomyNode { name: String::new(), members: a, height: sa, children: None, parent: Some(idx) });
        nodes.push(TaxonomyNode { name: String::new(), members: b, height: sb, children: None, parent: Some(idx) });
        nodes[idx].children = Some((ia, ia + 1));
        queue.push_back((ia, depth + 1));
        queue.push_back((ia + 1, depth + 1));
    }
    let mut t = Taxonomy {
        kind: TaxonomyKind::Divisive,
        n_obs: n,
        root: 0,
        nodes,
    };
    t.assign_names();
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cut {
    /// Nodes at or below this height become classes.
    Height(f64),
    /// Split the highest nodes until this many classes exist.
    Leaves(usize),
}

/// Ontology class declaration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OntologyClass {
    pub name: String,
    pub parent: Option<String>,
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAssignment {
    /// Cut classes, ordered left to right in the taxonomy.
    pub labels: Vec<String>,
    /// Class name of every observation.
    pub membership: Vec<String>,
    /// Declarations for the cut classes and every ancestor up to the root.
    pub classes: Vec<OntologyClass>,
}

pub fn taxonomy_to_classes(t: &Taxonomy, cut: Cut) -> Result<ClassAssignment> {
    let cut_nodes: Vec<usize> = match cut {
        Cut::Height(h) => {
            if !(h >= 0.0 && h <= t.root_height()) {
                return Err(NofError::invalid(format!(
                    "cut height {h} outside [0, {}]",
                    t.root_height()
                )));
            }
            let mut out = Vec::new();
            let mut stack = vec![t.root];
            while let Some(i) = stack.pop() {
                let node = &t.nodes[i];
                match node.children {
                    Some((a, b)) if node.height > h => {
                        stack.push(b);
                        stack.push(a);
                    }
                    _ => out.push(i),
                }
            }
            out
        }
        Cut::Leaves(m) => {
            let n_leaves = t.leaves().len();
            if m == 0 || m > n_leaves {
                return Err(NofError::invalid(format!(
                    "leaf-count cut {m} outside [1, {n_leaves}]"
                )));
            }
            let mut frontier = vec![t.root];
            while frontier.len() < m {
                let (pos, _) = frontier
                    .iter()
                    .enumerate()
                    .filter(|(_, &i)| !t.nodes[i].is_leaf())
                    .max_by(|(_, &a), (_, &b)| {
                        t.nodes[a].height.total_cmp(&t.nodes[b].height).then(b.cmp(&a))
                    })
                    .expect("fewer classes than leaves means a splittable node exists");
                let (a, b) = t.nodes[frontier[pos]].children.expect("internal node");
                frontier.splice(pos..=pos, [a, b]);
            }
            frontier
        }
    };

    let mut membership = vec![String::new(); t.n_obs];
    for &c in &cut_nodes {
        for &i in &t.nodes[c].members {
            membership[i] = t.nodes[c].name.clone();
        }
    }
    // Ancestors first, then cut classes, each list in taxonomy order.
    let mut declared: Vec<usize> = Vec::new();
    let mut stack = vec![t.root];
    while let Some(i) = stack.pop() {
        declared.push(i);
        if cut_nodes.contains(&i) {
            continue;
        }
        if let Some((a, b)) = t.nodes[i].children {
            stack.push(b);
            stack.push(a);
        }
    }
    let classes = declared
        .iter()
        .map(|&i| OntologyClass {
            name: t.nodes[i].name.clone(),
            parent: t.nodes[i].parent.map(|p| t.nodes[p].name.clone()),
            members: t.nodes[i].members.clone(),
        })
        .collect();
    Ok(ClassAssignment {
        labels: cut_nodes.iter().map(|&i| t.nodes[i].name.clone()).collect(),
        membership,
        classes,
    })
}
