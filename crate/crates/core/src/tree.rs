//! Survival-tree structure, leaf fitting under the proportional-hazards
//! likelihood, the saturated-model deviance used as node error, prediction,
//! and the JSON / DOT formats.
//!
//! Every tree carries the Nelson-Aalen baseline of its training set. Leaf
//! coefficients are `theta_k = deaths_k / sum(baseline(t_i))` over the leaf's
//! members and the node error is the log-likelihood gap between that fit and a
//! one-coefficient-per-observation model.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::survival::{
    kaplan_meier, nelson_aalen, CovariateMatrix, Dataset, Feature, FeatureKind, Observation,
    StepFunction,
};

/// Axis-parallel split. Threshold rules send `value <= threshold` left;
/// subset rules send the listed levels left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SplitRule {
    Threshold { feature: usize, threshold: f64 },
    Subset { feature: usize, levels: Vec<usize> },
}

impl SplitRule {
    pub fn feature(&self) -> usize {
        match self {
            SplitRule::Threshold { feature, .. } | SplitRule::Subset { feature, .. } => *feature,
        }
    }

    #[inline]
    pub fn goes_left(&self, value: f64) -> bool {
        match self {
            SplitRule::Threshold { threshold, .. } => value <= *threshold,
            SplitRule::Subset { levels, .. } => levels.contains(&(value as usize)),
        }
    }

    fn validate(&self, features: &[Feature]) -> std::result::Result<(), String> {
        let feature = features
            .get(self.feature())
            .ok_or_else(|| format!("split feature {} out of range", self.feature()))?;
        match self {
            SplitRule::Threshold { threshold, .. } if !threshold.is_finite() => {
                Err("threshold must be finite".into())
            }
            SplitRule::Threshold { .. } => Ok(()),
            SplitRule::Subset { levels, .. } => {
                let count = feature
                    .level_count()
                    .ok_or("subset split on a continuous feature")?;
                if levels.is_empty() || levels.len() >= count || levels.iter().any(|&l| l >= count) {
                    Err("subset split must be a nonempty proper set of levels".into())
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn describe(&self, features: &[Feature]) -> String {
        let feature = &features[self.feature()];
        match self {
            SplitRule::Threshold { threshold, .. } => match &feature.kind {
                FeatureKind::Categorical { levels, .. } if threshold.fract() == 0.0 => {
                    let idx = (*threshold as usize).min(levels.len() - 1);
                    format!("{} <= {}", feature.name, levels[idx])
                }
                _ => format!("{} <= {}", feature.name, fmt_num(*threshold)),
            },
            SplitRule::Subset { levels, .. } => {
                let names = match &feature.kind {
                    FeatureKind::Categorical { levels: names, .. } => levels
                        .iter()
                        .map(|&l| names[l].clone())
                        .collect::<Vec<_>>(),
                    FeatureKind::Continuous => levels.iter().map(|l| l.to_string()).collect(),
                };
                format!("{} in {{{}}}", feature.name, names.join(", "))
            }
        }
    }
}

fn fmt_num(x: f64) -> String {
    let s = format!("{x:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".into()
    } else {
        s.to_owned()
    }
}

/// Unfitted tree structure, used to build and rebuild fitted trees.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Leaf,
    Split {
        rule: SplitRule,
        left: Box<Shape>,
        right: Box<Shape>,
    },
}

impl Shape {
    pub fn split(rule: SplitRule, left: Shape, right: Shape) -> Shape {
        Shape::Split {
            rule,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn splits(&self) -> usize {
        match self {
            Shape::Leaf => 0,
            Shape::Split { left, right, .. } => 1 + left.splits() + right.splits(),
        }
    }

    pub fn leaves(&self) -> usize {
        self.splits() + 1
    }

    /// Depth with the root counted as depth 1.
    pub fn depth(&self) -> usize {
        match self {
            Shape::Leaf => 1,
            Shape::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    /// Leaf index (pre-order leaf numbering) for one row.
    pub fn leaf_index(&self, x: &CovariateMatrix, row: usize) -> usize {
        fn walk(shape: &Shape, x: &CovariateMatrix, row: usize, offset: usize) -> usize {
            match shape {
                Shape::Leaf => offset,
                Shape::Split { rule, left, right } => {
                    if rule.goes_left(x.value(row, rule.feature())) {
                        walk(left, x, row, offset)
                    } else {
                        walk(right, x, row, offset + left.leaves())
                    }
                }
            }
        }
        walk(self, x, row, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafFit {
    pub theta: f64,
    pub member_count: usize,
    pub death_count: usize,
    pub curve: StepFunction,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Internal {
        split: SplitRule,
        left: usize,
        right: usize,
    },
    Leaf(LeafFit),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    pub kind: NodeKind,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf(_))
    }

    pub fn leaf(&self) -> Option<&LeafFit> {
        match &self.kind {
            NodeKind::Leaf(fit) => Some(fit),
            NodeKind::Internal { .. } => None,
        }
    }
}

/// A fitted survival tree. Node ids are indices into `nodes`, assigned in
/// pre-order with the root at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalTree {
    features: Vec<Feature>,
    nodes: Vec<TreeNode>,
    root: usize,
    baseline: StepFunction,
    pooled_curve: StepFunction,
    alpha: f64,
    min_bucket: usize,
}

impl SurvivalTree {
    /// Builds and fits a tree with the given structure on `data`.
    pub fn build(shape: &Shape, data: &Dataset, alpha: f64, min_bucket: usize) -> Result<Self> {
        let baseline = nelson_aalen(&data.outcomes)?;
        Self::build_with_baseline(shape, data, baseline, alpha, min_bucket)
    }

    pub fn build_with_baseline(
        shape: &Shape,
        data: &Dataset,
        baseline: StepFunction,
        alpha: f64,
        min_bucket: usize,
    ) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if !(alpha >= 0.0) {
            return Err(Error::InvalidComplexity(alpha));
        }
        let mut nodes = Vec::with_capacity(2 * shape.leaves() - 1);
        fn push(shape: &Shape, parent: Option<usize>, depth: usize, nodes: &mut Vec<TreeNode>) -> usize {
            let id = nodes.len();
            nodes.push(TreeNode {
                id,
                parent,
                depth,
                kind: NodeKind::Leaf(LeafFit {
                    theta: 0.0,
                    member_count: 0,
                    death_count: 0,
                    curve: StepFunction::constant(1.0),
                }),
            });
            if let Shape::Split { rule, left, right } = shape {
                let l = push(left, Some(id), depth + 1, nodes);
                let r = push(right, Some(id), depth + 1, nodes);
                nodes[id].kind = NodeKind::Internal {
                    split: rule.clone(),
                    left: l,
                    right: r,
                };
            }
            id
        }
        push(shape, None, 1, &mut nodes);
        let tree = SurvivalTree {
            features: data.features().to_vec(),
            nodes,
            root: 0,
            pooled_curve: kaplan_meier(&data.outcomes)?,
            baseline,
            alpha,
            min_bucket: min_bucket.max(1),
        };
        for node in &tree.nodes {
            if let NodeKind::Internal { split, .. } = &node.kind {
                split.validate(&tree.features).map_err(Error::InvalidParams)?;
            }
        }
        fit_leaves(tree, data)
    }

    /// Single-leaf tree over `data`.
    pub fn null(data: &Dataset, min_bucket: usize) -> Result<Self> {
        Self::build(&Shape::Leaf, data, 0.0, min_bucket)
    }

    /// Single-leaf tree sharing this tree's baseline and pooled curve.
    pub fn null_of(&self) -> SurvivalTree {
        let deaths: usize = self.leaves().map(|n| n.leaf().unwrap().death_count).sum();
        let members: usize = self.leaves().map(|n| n.leaf().unwrap().member_count).sum();
        let mass: f64 = self
            .leaves()
            .map(|n| {
                let fit = n.leaf().unwrap();
                if fit.theta > 0.0 {
                    fit.death_count as f64 / fit.theta
                } else {
                    0.0
                }
            })
            .sum();
        let theta = if deaths == 0 || mass <= 0.0 {
            0.0
        } else {
            deaths as f64 / mass
        };
        SurvivalTree {
            features: self.features.clone(),
            nodes: vec![TreeNode {
                id: 0,
                parent: None,
                depth: 1,
                kind: NodeKind::Leaf(LeafFit {
                    theta,
                    member_count: members,
                    death_count: deaths,
                    curve: self.pooled_curve.clone(),
                }),
            }],
            root: 0,
            baseline: self.baseline.clone(),
            pooled_curve: self.pooled_curve.clone(),
            alpha: self.alpha,
            min_bucket: self.min_bucket,
        }
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn baseline(&self) -> &StepFunction {
        &self.baseline
    }

    /// Kaplan-Meier curve of the whole training set.
    pub fn pooled_curve(&self) -> &StepFunction {
        &self.pooled_curve
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn min_bucket(&self) -> usize {
        self.min_bucket
    }

    pub fn set_alpha(&mut self, alpha: f64) -> Result<()> {
        if !(alpha >= 0.0) {
            return Err(Error::InvalidComplexity(alpha));
        }
        self.alpha = alpha;
        Ok(())
    }

    pub fn leaves(&self) -> impl Iterator<Item = &TreeNode> {
        self.nodes.iter().filter(|n| n.is_leaf())
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves().count()
    }

    /// Number of splits (internal nodes).
    pub fn complexity(&self) -> usize {
        self.nodes.len() - self.leaf_count()
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(1)
    }

    pub fn shape(&self) -> Shape {
        fn walk(tree: &SurvivalTree, id: usize) -> Shape {
            match &tree.nodes[id].kind {
                NodeKind::Leaf(_) => Shape::Leaf,
                NodeKind::Internal { split, left, right } => {
                    Shape::split(split.clone(), walk(tree, *left), walk(tree, *right))
                }
            }
        }
        walk(self, self.root)
    }

    pub fn check_schema(&self, x: &CovariateMatrix) -> Result<()> {
        if x.features().len() != self.features.len() {
            return Err(Error::SchemaMismatch(format!(
                "model has {} features, data has {}",
                self.features.len(),
                x.features().len()
            )));
        }
        for (a, b) in self.features.iter().zip(x.features()) {
            if a != b {
                return Err(Error::SchemaMismatch(format!(
                    "feature {} does not match model feature {}",
                    b.name, a.name
                )));
            }
        }
        Ok(())
    }

    fn check_row(&self, row: &[f64]) -> Result<()> {
        if row.len() != self.features.len() {
            return Err(Error::SchemaMismatch(format!(
                "row has {} values, model has {} features",
                row.len(),
                self.features.len()
            )));
        }
        if let Some((f, v)) = self
            .features
            .iter()
            .zip(row)
            .find(|(f, &v)| !f.accepts(v))
        {
            return Err(Error::SchemaMismatch(format!(
                "value {v} is not valid for feature {}",
                f.name
            )));
        }
        Ok(())
    }

    #[inline]
    fn route(&self, value: impl Fn(usize) -> f64) -> usize {
        let mut id = self.root;
        loop {
            match &self.nodes[id].kind {
                NodeKind::Leaf(_) => return id,
                NodeKind::Internal { split, left, right } => {
                    id = if split.goes_left(value(split.feature())) {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    /// Leaf id for a single covariate row.
    pub fn assign_leaf(&self, row: &[f64]) -> Result<usize> {
        self.check_row(row)?;
        Ok(self.route(|f| row[f]))
    }

    /// Leaf id for row `row` of a matrix already checked with
    /// [`SurvivalTree::check_schema`].
    #[inline]
    pub fn leaf_of(&self, x: &CovariateMatrix, row: usize) -> usize {
        self.route(|f| x.value(row, f))
    }

    pub fn assign_leaves(&self, x: &CovariateMatrix) -> Result<Vec<usize>> {
        self.check_schema(x)?;
        Ok((0..x.rows()).map(|i| self.leaf_of(x, i)).collect())
    }

    pub fn leaf_fit(&self, id: usize) -> Option<&LeafFit> {
        self.nodes.get(id).and_then(TreeNode::leaf)
    }

    /// Kaplan-Meier curve of the leaf a row falls into.
    pub fn predict_curve(&self, row: &[f64]) -> Result<&StepFunction> {
        let leaf = self.assign_leaf(row)?;
        Ok(&self.nodes[leaf].leaf().unwrap().curve)
    }

    pub fn predict_theta(&self, row: &[f64]) -> Result<f64> {
        let leaf = self.assign_leaf(row)?;
        Ok(self.nodes[leaf].leaf().unwrap().theta)
    }
}

/// `theta = sum(deaths) / sum(baseline(t_i))`; zero when there are no deaths.
pub fn fit_leaf_coefficient(members: &[(f64, bool)]) -> Result<f64> {
    if members.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let deaths = members.iter().filter(|m| m.1).count();
    let mass: f64 = members.iter().map(|m| m.0).sum();
    if deaths == 0 {
        return Ok(0.0);
    }
    if !(mass > 0.0) {
        return Err(Error::DegenerateLeaf { deaths });
    }
    Ok(deaths as f64 / mass)
}

/// One coefficient per observation: `delta_i / baseline(t_i)`, zero for
/// censored observations.
pub fn saturated_coefficients(outcomes: &[Observation], baseline: &StepFunction) -> Result<Vec<f64>> {
    outcomes
        .iter()
        .map(|o| {
            if !o.event {
                return Ok(0.0);
            }
            let h = baseline.eval(o.time);
            if h > 0.0 {
                Ok(1.0 / h)
            } else {
                Err(Error::BaselineMismatch { time: o.time })
            }
        })
        .collect()
}

/// Contribution of one observation to the node error at coefficient `theta`.
#[inline]
pub(crate) fn error_term(hazard: f64, event: bool, theta: f64) -> f64 {
    if event {
        debug_assert!(theta > 0.0 && hazard > 0.0);
        -(hazard * theta).ln() - 1.0 + hazard * theta
    } else {
        hazard * theta
    }
}

/// Saturated-model deviance of a node:
/// `sum(delta*log(delta/H) - delta*log(theta) - delta + H*theta)`.
pub fn node_error(members: &[(f64, bool)], theta: f64) -> f64 {
    members.iter().map(|&(h, d)| error_term(h, d, theta)).sum()
}

/// Sum of leaf errors of `tree` on `data`, using the tree's stored baseline
/// and coefficients.
pub fn tree_error(tree: &SurvivalTree, data: &Dataset) -> Result<f64> {
    let leaves = tree.assign_leaves(&data.covariates)?;
    let mut per_leaf: BTreeMap<usize, f64> = BTreeMap::new();
    for (o, &leaf) in data.outcomes.iter().zip(&leaves) {
        let theta = tree.nodes[leaf].leaf().unwrap().theta;
        *per_leaf.entry(leaf).or_default() += error_term(tree.baseline.eval(o.time), o.event, theta);
    }
    Ok(per_leaf.values().sum())
}

/// `tree_error + alpha * splits`.
pub fn objective(tree: &SurvivalTree, data: &Dataset, alpha: f64) -> Result<f64> {
    if !(alpha >= 0.0) {
        return Err(Error::InvalidComplexity(alpha));
    }
    Ok(tree_error(tree, data)? + alpha * tree.complexity() as f64)
}

/// Refits every leaf's coefficient, Kaplan-Meier curve and counts on `data`
/// using the tree's stored baseline.
pub fn fit_leaves(mut tree: SurvivalTree, data: &Dataset) -> Result<SurvivalTree> {
    let leaves = tree.assign_leaves(&data.covariates)?;
    let mut members: BTreeMap<usize, Vec<usize>> = tree
        .nodes
        .iter()
        .filter(|n| n.is_leaf())
        .map(|n| (n.id, Vec::new()))
        .collect();
    for (i, &leaf) in leaves.iter().enumerate() {
        members.get_mut(&leaf).unwrap().push(i);
    }
    // a lone root leaf involves no split, so small samples still fit
    let split = tree.nodes.len() > 1;
    for (leaf, rows) in members {
        if split && rows.len() < tree.min_bucket {
            return Err(Error::MinBucketViolation {
                node: leaf,
                count: rows.len(),
                min_bucket: tree.min_bucket,
            });
        }
        let outcomes: Vec<Observation> = rows.iter().map(|&i| data.outcomes[i]).collect();
        let pairs: Vec<(f64, bool)> = outcomes
            .iter()
            .map(|o| (tree.baseline.eval(o.time), o.event))
            .collect();
        let fit = LeafFit {
            theta: fit_leaf_coefficient(&pairs)?,
            member_count: rows.len(),
            death_count: outcomes.iter().filter(|o| o.event).count(),
            curve: kaplan_meier(&outcomes)?,
        };
        tree.nodes[leaf].kind = NodeKind::Leaf(fit);
    }
    Ok(tree)
}

// ---------------------------------------------------------------------------
// JSON

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeDoc {
    root: usize,
    min_bucket: usize,
    alpha: f64,
    features: Vec<Feature>,
    baseline: StepFunction,
    pooled_curve: StepFunction,
    nodes: Vec<NodeDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDoc {
    id: usize,
    parent: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    split: Option<SplitRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    left: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    right: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    leaf: Option<LeafFit>,
}

impl SurvivalTree {
    pub fn to_json(&self) -> String {
        let doc = TreeDoc {
            root: self.root,
            min_bucket: self.min_bucket,
            alpha: self.alpha,
            features: self.features.clone(),
            baseline: self.baseline.clone(),
            pooled_curve: self.pooled_curve.clone(),
            nodes: self
                .nodes
                .iter()
                .map(|n| match &n.kind {
                    NodeKind::Internal { split, left, right } => NodeDoc {
                        id: n.id,
                        parent: n.parent,
                        split: Some(split.clone()),
                        left: Some(*left),
                        right: Some(*right),
                        leaf: None,
                    },
                    NodeKind::Leaf(fit) => NodeDoc {
                        id: n.id,
                        parent: n.parent,
                        split: None,
                        left: None,
                        right: None,
                        leaf: Some(fit.clone()),
                    },
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("tree serializes")
    }

    pub fn from_json(doc: &str) -> Result<Self> {
        let mut de = serde_json::Deserializer::from_str(doc);
        let doc: TreeDoc = serde_path_to_error::deserialize(&mut de).map_err(|e| Error::Parse {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        let parse = |path: String, message: &str| Error::Parse {
            path,
            message: message.to_owned(),
        };
        for f in &doc.features {
            f.validate()?;
        }
        let n = doc.nodes.len();
        if n == 0 {
            return Err(parse("nodes".into(), "tree has no nodes"));
        }
        for (idx, node) in doc.nodes.iter().enumerate() {
            if node.id != idx {
                return Err(parse(format!("nodes[{idx}].id"), "node ids must equal their position"));
            }
        }
        if doc.root >= n || doc.nodes[doc.root].parent.is_some() {
            return Err(parse("root".into(), "root must exist and have no parent"));
        }

        let mut nodes: Vec<Option<TreeNode>> = (0..n).map(|_| None).collect();
        let mut stack = vec![(doc.root, None::<usize>, 1usize)];
        while let Some((id, parent, depth)) = stack.pop() {
            if nodes[id].is_some() {
                return Err(parse(format!("nodes[{id}]"), "node reached twice"));
            }
            let node = &doc.nodes[id];
            if node.parent != parent {
                return Err(parse(format!("nodes[{id}].parent"), "parent does not match tree structure"));
            }
            let kind = match (&node.split, node.left, node.right, &node.leaf) {
                (Some(split), Some(l), Some(r), None) => {
                    split
                        .validate(&doc.features)
                        .map_err(|m| parse(format!("nodes[{id}].split"), &m))?;
                    if l >= n || r >= n || l == r {
                        return Err(parse(format!("nodes[{id}]"), "invalid child ids"));
                    }
                    stack.push((r, Some(id), depth + 1));
                    stack.push((l, Some(id), depth + 1));
                    NodeKind::Internal {
                        split: split.clone(),
                        left: l,
                        right: r,
                    }
                }
                (None, None, None, Some(fit)) => {
                    if !(fit.theta >= 0.0) || !fit.theta.is_finite() {
                        return Err(parse(format!("nodes[{id}].leaf.theta"), "theta must be finite and nonnegative"));
                    }
                    NodeKind::Leaf(fit.clone())
                }
                _ => {
                    return Err(parse(
                        format!("nodes[{id}]"),
                        "node must have either split/left/right or leaf",
                    ))
                }
            };
            nodes[id] = Some(TreeNode {
                id,
                parent,
                depth,
                kind,
            });
        }
        let nodes: Vec<TreeNode> = nodes
            .into_iter()
            .enumerate()
            .map(|(id, n)| n.ok_or_else(|| parse(format!("nodes[{id}]"), "node not reachable from root")))
            .collect::<Result<_>>()?;
        if !(doc.alpha >= 0.0) {
            return Err(parse("alpha".into(), "alpha must be nonnegative"));
        }
        Ok(SurvivalTree {
            features: doc.features,
            nodes,
            root: doc.root,
            baseline: doc.baseline,
            pooled_curve: doc.pooled_curve,
            alpha: doc.alpha,
            min_bucket: doc.min_bucket.max(1),
        })
    }

    /// Graphviz rendering. Leaves show population, death proportion, theta and
    /// five samples of their Kaplan-Meier curve.
    pub fn to_dot(&self) -> String {
        let horizon = self
            .pooled_curve
            .knots()
            .last()
            .copied()
            .or_else(|| self.baseline.knots().last().copied())
            .unwrap_or(1.0);
        let mut out = String::from("digraph survival_tree {\n  node [shape=box, fontname=\"Helvetica\"];\n");
        for node in &self.nodes {
            let label = match &node.kind {
                NodeKind::Internal { split, .. } => {
                    format!("node {}\\n{}", node.id, split.describe(&self.features))
                }
                NodeKind::Leaf(fit) => {
                    let share = if fit.member_count > 0 {
                        fit.death_count as f64 / fit.member_count as f64
                    } else {
                        0.0
                    };
                    let samples: Vec<String> = (0..5)
                        .map(|k| {
                            let t = horizon * k as f64 / 4.0;
                            format!("S({})={:.3}", fmt_num(t), fit.curve.eval(t))
                        })
                        .collect();
                    format!(
                        "leaf {}\\nn={} deaths={} ({:.1}%)\\ntheta={:.4}\\n{}",
                        node.id,
                        fit.member_count,
                        fit.death_count,
                        100.0 * share,
                        fit.theta,
                        samples.join(" ")
                    )
                }
            };
            let _ = writeln!(out, "  n{} [label=\"{}\"];", node.id, label.replace('"', "\\\""));
        }
        for node in &self.nodes {
            if let NodeKind::Internal { left, right, .. } = node.kind {
                let _ = writeln!(out, "  n{} -> n{} [label=\"yes\"];", node.id, left);
                let _ = writeln!(out, "  n{} -> n{} [label=\"no\"];", node.id, right);
            }
        }
        out.push_str("}\n");
        out
    }
}
