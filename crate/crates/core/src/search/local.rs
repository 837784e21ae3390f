//! Coordinate descent over single-node moves.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use super::context::{Context, TOL};
use crate::tree::{Shape, SplitRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MoveKind {
    Delete,
    Replace,
    Create,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MoveRecord {
    pub sweep: usize,
    pub node: usize,
    pub kind: MoveKind,
    pub delta: f64,
}

/// Objective after each sweep (index 0 is the starting tree) and every
/// accepted move.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SearchTrace {
    pub objectives: Vec<f64>,
    pub moves: Vec<MoveRecord>,
}

impl SearchTrace {
    pub fn sweeps(&self) -> usize {
        self.objectives.len().saturating_sub(1)
    }

    pub fn final_objective(&self) -> f64 {
        *self.objectives.last().unwrap_or(&f64::NAN)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("sweep,objective\n");
        for (s, v) in self.objectives.iter().enumerate() {
            out.push_str(&format!("{s},{v}\n"));
        }
        out
    }
}

enum Kind {
    Leaf,
    Split {
        rule: SplitRule,
        left: usize,
        right: usize,
    },
}

struct Node {
    parent: Option<usize>,
    depth: usize,
    members: Vec<u32>,
    kind: Kind,
    error: f64,
    splits: usize,
    /// Evaluated with no improving move since its subtree last changed.
    clean: bool,
    alive: bool,
}

pub(crate) struct Arena<'c, 'a> {
    ctx: &'c Context<'a>,
    nodes: Vec<Node>,
    root: usize,
}

impl<'c, 'a> Arena<'c, 'a> {
    pub fn new(ctx: &'c Context<'a>, shape: &Shape) -> Self {
        let mut arena = Arena {
            ctx,
            nodes: Vec::new(),
            root: 0,
        };
        let root = arena.alloc(None, 1);
        arena.instantiate(root, shape, ctx.all_rows());
        arena
    }

    fn alloc(&mut self, parent: Option<usize>, depth: usize) -> usize {
        self.nodes.push(Node {
            parent,
            depth,
            members: Vec::new(),
            kind: Kind::Leaf,
            error: 0.0,
            splits: 0,
            clean: false,
            alive: true,
        });
        self.nodes.len() - 1
    }

    fn kill_below(&mut self, id: usize) {
        if let Kind::Split { left, right, .. } = self.nodes[id].kind {
            for child in [left, right] {
                self.kill_below(child);
                self.nodes[child].alive = false;
                self.nodes[child].members = Vec::new();
            }
        }
        self.nodes[id].kind = Kind::Leaf;
    }

    fn instantiate(&mut self, id: usize, shape: &Shape, members: Vec<u32>) {
        self.kill_below(id);
        let depth = self.nodes[id].depth;
        let (kind, error, splits) = match shape {
            Shape::Leaf => (Kind::Leaf, self.ctx.leaf_error(&members), 0),
            Shape::Split { rule, left, right } => {
                let (lm, rm) = self.ctx.partition(rule, &members);
                let l = self.alloc(Some(id), depth + 1);
                self.instantiate(l, left, lm);
                let r = self.alloc(Some(id), depth + 1);
                self.instantiate(r, right, rm);
                let (ln, rn) = (&self.nodes[l], &self.nodes[r]);
                (
                    Kind::Split {
                        rule: rule.clone(),
                        left: l,
                        right: r,
                    },
                    ln.error + rn.error,
                    1 + ln.splits + rn.splits,
                )
            }
        };
        let node = &mut self.nodes[id];
        node.kind = kind;
        node.error = error;
        node.splits = splits;
        node.members = members;
        node.clean = false;
    }

    fn refresh_ancestors(&mut self, id: usize) {
        let mut cur = self.nodes[id].parent;
        while let Some(p) = cur {
            if let Kind::Split { left, right, .. } = self.nodes[p].kind {
                let error = self.nodes[left].error + self.nodes[right].error;
                let splits = 1 + self.nodes[left].splits + self.nodes[right].splits;
                let node = &mut self.nodes[p];
                node.error = error;
                node.splits = splits;
                node.clean = false;
            }
            cur = self.nodes[p].parent;
        }
    }

    pub fn shape(&self, id: usize) -> Shape {
        match &self.nodes[id].kind {
            Kind::Leaf => Shape::Leaf,
            Kind::Split { rule, left, right } => {
                Shape::split(rule.clone(), self.shape(*left), self.shape(*right))
            }
        }
    }

    pub fn root_shape(&self) -> Shape {
        self.shape(self.root)
    }

    pub fn objective(&self, alpha: f64) -> f64 {
        let root = &self.nodes[self.root];
        root.error + alpha * root.splits as f64
    }

    fn apply(&mut self, id: usize, shape: &Shape) {
        let members = std::mem::take(&mut self.nodes[id].members);
        self.instantiate(id, shape, members);
        self.refresh_ancestors(id);
    }

    /// Applies the best strictly improving move at `id`: delete or replace at
    /// a split, create at a leaf above the depth limit.
    fn improve(&mut self, id: usize, alpha: f64, max_depth: usize) -> Option<(MoveKind, f64)> {
        let ctx = self.ctx;
        let node = &self.nodes[id];
        let current = node.error + alpha * node.splits as f64;
        match node.kind {
            Kind::Split { left, right, .. } => {
                let members = &node.members;
                let ls = self.shape(left);
                let rs = self.shape(right);

                let mut best: Option<(f64, Shape)> = None;
                let leaf = ctx.leaf_error(members);
                let options = [
                    (Shape::Leaf, Some(leaf)),
                    (ls.clone(), ctx.shape_error(&ls, members)),
                    (rs.clone(), ctx.shape_error(&rs, members)),
                ];
                for (shape, error) in options {
                    if let Some(e) = error {
                        let cost = e + alpha * shape.splits() as f64;
                        if best.as_ref().map_or(true, |(c, _)| cost < *c) {
                            best = Some((cost, shape));
                        }
                    }
                }
                let delete = best.map(|(cost, shape)| (cost, shape, MoveKind::Delete));
                let replace = ctx.best_rule(members, &ls, &rs).and_then(|c| {
                    let shape = Shape::split(c.rule, ls, rs);
                    let e = ctx.shape_error(&shape, members)?;
                    Some((e + alpha * shape.splits() as f64, shape, MoveKind::Replace))
                });
                let chosen = match (delete, replace) {
                    (Some(d), Some(r)) => Some(if r.0 < d.0 { r } else { d }),
                    (d, r) => d.or(r),
                };
                match chosen {
                    Some((cost, shape, kind)) if cost < current - TOL => {
                        self.apply(id, &shape);
                        Some((kind, cost - current))
                    }
                    _ => None,
                }
            }
            Kind::Leaf if node.depth < max_depth => {
                let members = &node.members;
                let c = ctx.best_rule(members, &Shape::Leaf, &Shape::Leaf)?;
                let shape = Shape::split(c.rule, Shape::Leaf, Shape::Leaf);
                let cost = ctx.shape_error(&shape, members)? + alpha;
                if cost < current - TOL {
                    self.apply(id, &shape);
                    Some((MoveKind::Create, cost - current))
                } else {
                    None
                }
            }
            Kind::Leaf => None,
        }
    }

    /// Sweeps over the nodes in random order until a sweep accepts nothing
    /// or `max_sweeps` is reached.
    pub fn descend<R: Rng + ?Sized>(
        &mut self,
        alpha: f64,
        max_depth: usize,
        max_sweeps: usize,
        rng: &mut R,
    ) -> SearchTrace {
        let mut trace = SearchTrace {
            objectives: vec![self.objective(alpha)],
            moves: Vec::new(),
        };
        for sweep in 1..=max_sweeps {
            let mut order: Vec<usize> = (0..self.nodes.len()).filter(|&i| self.nodes[i].alive).collect();
            order.shuffle(rng);
            let mut accepted = 0;
            for id in order {
                let node = &self.nodes[id];
                if !node.alive || node.clean {
                    continue;
                }
                match self.improve(id, alpha, max_depth) {
                    Some((kind, delta)) => {
                        accepted += 1;
                        trace.moves.push(MoveRecord {
                            sweep,
                            node: id,
                            kind,
                            delta,
                        });
                    }
                    None => self.nodes[id].clean = true,
                }
            }
            trace.objectives.push(self.objective(alpha));
            if accepted == 0 {
                break;
            }
        }
        trace
    }

    /// True when no delete, replace or create move improves any live node.
    #[cfg(test)]
    pub fn is_local_optimum(&mut self, alpha: f64, max_depth: usize) -> bool {
        let ids: Vec<usize> = (0..self.nodes.len()).filter(|&i| self.nodes[i].alive).collect();
        ids.into_iter().all(|id| self.improve(id, alpha, max_depth).is_none())
    }
}
