//! Greedy top-down growth, optimal pruning at a fixed complexity penalty, and
//! random starting trees.

use rand::Rng;

use super::context::{Context, TOL};
use crate::tree::Shape;

/// Recursively applies the best error-reducing split until `max_depth`
/// (root is depth 1), the bucket limit, or no split reduces error.
pub(crate) fn grow(ctx: &Context, members: &[u32], depth: usize, max_depth: usize) -> Shape {
    if depth >= max_depth {
        return Shape::Leaf;
    }
    let Some(c) = ctx.best_rule(members, &Shape::Leaf, &Shape::Leaf) else {
        return Shape::Leaf;
    };
    if c.error >= ctx.leaf_error(members) - TOL {
        return Shape::Leaf;
    }
    let (l, r) = ctx.partition(&c.rule, members);
    let left = grow(ctx, &l, depth + 1, max_depth);
    let right = grow(ctx, &r, depth + 1, max_depth);
    Shape::split(c.rule, left, right)
}

/// Minimum-cost subtree of `shape` under `error + alpha * splits`, pruning
/// only by collapsing internal nodes to leaves. Returns the pruned shape and
/// its cost.
pub(crate) fn prune(ctx: &Context, shape: &Shape, members: &[u32], alpha: f64) -> (Shape, f64) {
    let leaf = ctx.leaf_error(members);
    match shape {
        Shape::Leaf => (Shape::Leaf, leaf),
        Shape::Split { rule, left, right } => {
            let (lm, rm) = ctx.partition(rule, members);
            let (ls, lc) = prune(ctx, left, &lm, alpha);
            let (rs, rc) = prune(ctx, right, &rm, alpha);
            let split = lc + rc + alpha;
            if split < leaf - TOL {
                (Shape::split(rule.clone(), ls, rs), split)
            } else {
                (Shape::Leaf, leaf)
            }
        }
    }
}

/// Random tree grown to a target depth drawn uniformly from `1..=max_depth`
/// using uniformly random feasible splits.
pub(crate) fn random_shape<R: Rng + ?Sized>(ctx: &Context, max_depth: usize, rng: &mut R) -> Shape {
    let target = max_depth.max(1);
    fn build<R: Rng + ?Sized>(ctx: &Context, members: &[u32], depth: usize, target: usize, rng: &mut R) -> Shape {
        if depth >= target {
            return Shape::Leaf;
        }
        match ctx.random_rule(members, rng) {
            Some(rule) => {
                let (l, r) = ctx.partition(&rule, members);
                let left = build(ctx, &l, depth + 1, target, rng);
                let right = build(ctx, &r, depth + 1, target, rng);
                Shape::split(rule, left, right)
            }
            None => Shape::Leaf,
        }
    }
    build(ctx, &ctx.all_rows(), 1, target, rng)
}
