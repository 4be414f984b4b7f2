//! Sequential leaf-insertion growth.
//!
//! From the one-leaf tree, each step picks an insertion site: a leaf edge
//! with weight `1 - alpha`, an inner edge (the edge above a branch point,
//! including the root edge) with weight `gamma`, or a branch point with `c`
//! children with weight `(c - 1) * alpha - gamma`. The weights always total
//! `n - alpha`. Inserting on an edge splits it with a new branch point that
//! takes the new leaf; inserting at a branch point attaches the new leaf
//! directly.
//!
//! Two samplers: [`grow_reference`] rebuilds the full weight table each step
//! (exact weights, any scalar type), while [`Grower`] keeps aggregate state
//! and draws each site in expected constant time, which is what the
//! Monte-Carlo drivers need at large sizes.

use crate::numerics::Scalar;
use crate::rng::RngStream;
use crate::tree::{LabelledTree, NodeId};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelParams<S> {
    pub alpha: S,
    pub gamma: S,
}

impl<S: Scalar> ModelParams<S> {
    /// Requires `0 <= gamma <= alpha <= 1`.
    pub fn new(alpha: S, gamma: S) -> Result<Self> {
        let zero = S::zero();
        let one = S::one();
        if gamma < zero || alpha < gamma || one < alpha {
            return Err(Error::Params(format!(
                "need 0 <= gamma <= alpha <= 1, got alpha = {alpha}, gamma = {gamma}"
            )));
        }
        Ok(ModelParams { alpha, gamma })
    }

    /// The binary subfamily `gamma = alpha`.
    pub fn ford(alpha: S) -> Result<Self> {
        ModelParams::new(alpha.clone(), alpha)
    }

    /// Binary parameters make every branch-point weight zero.
    pub fn is_binary(&self) -> bool {
        self.alpha == self.gamma
    }

    pub fn to_f64(&self) -> ModelParams<f64> {
        ModelParams { alpha: self.alpha.to_f64(), gamma: self.gamma.to_f64() }
    }
}

/// An insertion site: the edge above a node, or a branch point itself.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GrowthSite {
    /// The edge above this node (a leaf edge iff the node is a leaf).
    Edge(NodeId),
    /// Attach directly below this branch point.
    Vertex(NodeId),
}

/// All sites of a tree with their weights, in depth-first order.
pub fn growth_sites<S: Scalar>(
    tree: &LabelledTree,
    params: &ModelParams<S>,
) -> Vec<(GrowthSite, S)> {
    let one_minus_alpha = S::one() - params.alpha.clone();
    let mut sites = Vec::new();
    let mut stack = vec![tree.node(tree.root()).children[0]];
    while let Some(id) = stack.pop() {
        let node = tree.node(id);
        if node.label.is_some() {
            sites.push((GrowthSite::Edge(id), one_minus_alpha.clone()));
        } else {
            sites.push((GrowthSite::Edge(id), params.gamma.clone()));
            let c = S::from_int(node.children.len() as i64);
            let vertex_weight = (c - S::one()) * params.alpha.clone() - params.gamma.clone();
            sites.push((GrowthSite::Vertex(id), vertex_weight));
            // push in reverse so children come off the stack in stored order
            for &child in node.children.iter().rev() {
                stack.push(child);
            }
        }
    }
    sites
}

/// Total site weight; always equals `n - alpha`.
pub fn total_weight<S: Scalar>(tree: &LabelledTree, params: &ModelParams<S>) -> S {
    growth_sites(tree, params)
        .into_iter()
        .fold(S::zero(), |acc, (_, w)| acc + w)
}

/// Insert a new leaf at the site, in place.
pub fn apply_site_mut(tree: &mut LabelledTree, site: GrowthSite) -> NodeId {
    match site {
        GrowthSite::Edge(child) => {
            let b = tree.split_edge_above(child);
            tree.add_leaf_child(b)
        }
        GrowthSite::Vertex(v) => tree.add_leaf_child(v),
    }
}

/// Insert a new leaf at the site, returning a fresh tree.
pub fn apply_site(tree: &LabelledTree, site: GrowthSite) -> LabelledTree {
    let mut out = tree.clone();
    apply_site_mut(&mut out, site);
    out
}

/// One growth step using the explicit site table. The first step (one leaf)
/// is deterministic.
pub fn grow_step<S: Scalar>(
    tree: &mut LabelledTree,
    params: &ModelParams<S>,
    rng: &mut RngStream,
) {
    if tree.n_leaves() == 1 {
        let leaf = tree.leaf_id(1);
        apply_site_mut(tree, GrowthSite::Edge(leaf));
        return;
    }
    let sites = growth_sites(tree, params);
    let weights: Vec<f64> = sites.iter().map(|(_, w)| w.to_f64()).collect();
    let idx = rng.pick_weighted(&weights);
    apply_site_mut(tree, sites[idx].0);
}

/// Grow to `n` leaves with the table-based step. Exact weights, quadratic
/// time; intended for small trees and cross-checks.
pub fn grow_reference<S: Scalar>(
    params: &ModelParams<S>,
    n: u32,
    rng: &mut RngStream,
) -> LabelledTree {
    let mut tree = LabelledTree::single_leaf();
    while tree.n_leaves() < n {
        grow_step(&mut tree, params, rng);
    }
    tree
}

/// Incremental sampler drawing each insertion site in expected O(1).
///
/// The three site classes have aggregate weights `n(1-alpha)` (leaf edges),
/// `b*gamma` (inner edges, `b` branch points) and `(n-1)alpha - b*gamma`
/// (branch points). Within a class: leaves and inner edges are uniform;
/// branch points are drawn by rejection from the child-slot list (each
/// branch point appears once per child, so acceptance with probability
/// `((c-1)alpha - gamma) / (c*alpha)` lands on the correct law).
pub struct Grower {
    params: ModelParams<f64>,
    tree: LabelledTree,
    /// Branch points (internal non-root nodes).
    branch: Vec<NodeId>,
    /// One entry per (branch point, child) pair, storing the branch point.
    slots: Vec<NodeId>,
}

impl Grower {
    pub fn new(params: ModelParams<f64>) -> Grower {
        Grower {
            params,
            tree: LabelledTree::single_leaf(),
            branch: Vec::new(),
            slots: Vec::new(),
        }
    }

    pub fn tree(&self) -> &LabelledTree {
        &self.tree
    }

    pub fn into_tree(self) -> LabelledTree {
        self.tree
    }

    fn record_new_branch(&mut self, b: NodeId) {
        self.branch.push(b);
        self.slots.push(b);
        self.slots.push(b);
    }

    pub fn step(&mut self, rng: &mut RngStream) {
        let n = self.tree.n_leaves();
        if n == 1 {
            let leaf = self.tree.leaf_id(1);
            let b = self.tree.split_edge_above(leaf);
            self.tree.add_leaf_child(b);
            self.record_new_branch(b);
            return;
        }
        let alpha = self.params.alpha;
        let gamma = self.params.gamma;
        let b_count = self.branch.len() as f64;
        let w_leaf = n as f64 * (1.0 - alpha);
        let w_inner = b_count * gamma;
        let w_vertex = ((n as f64 - 1.0) * alpha - b_count * gamma).max(0.0);
        let class = rng.pick_weighted(&[w_leaf, w_inner, w_vertex]);
        match class {
            0 => {
                let label = rng.below(n as usize) as u32 + 1;
                let leaf = self.tree.leaf_id(label);
                let b = self.tree.split_edge_above(leaf);
                self.tree.add_leaf_child(b);
                self.record_new_branch(b);
            }
            1 => {
                let v = self.branch[rng.below(self.branch.len())];
                let b = self.tree.split_edge_above(v);
                self.tree.add_leaf_child(b);
                self.record_new_branch(b);
            }
            _ => {
                // rejection over child slots: slot multiplicity is c, target
                // weight (c-1)alpha - gamma, envelope c*alpha
                loop {
                    let v = self.slots[rng.below(self.slots.len())];
                    let c = self.tree.node(v).children.len() as f64;
                    let accept = ((c - 1.0) * alpha - gamma) / (c * alpha);
                    if rng.uniform() < accept {
                        self.tree.add_leaf_child(v);
                        self.slots.push(v);
                        break;
                    }
                }
            }
        }
    }

    pub fn grow_to(&mut self, n: u32, rng: &mut RngStream) {
        while self.tree.n_leaves() < n {
            self.step(rng);
        }
    }
}

/// Grow to `n` leaves with the O(1)-per-step sampler.
pub fn grow(params: &ModelParams<f64>, n: u32, rng: &mut RngStream) -> LabelledTree {
    let mut g = Grower::new(*params);
    g.grow_to(n, rng);
    g.into_tree()
}

/// Binary tree whose inner edges carry a two-colour mark, grown under the
/// binary rule (`gamma = alpha`). Colours evolve as follows: a split of a
/// leaf edge creates a blue inner edge; splitting a red edge leaves both
/// halves red; splitting a blue edge keeps the upper half blue and turns the
/// lower half red with probability `c` (else blue). The root edge of the
/// two-leaf tree starts blue, and the top edge provably stays blue forever.
/// Contracting the red edges ("crushing") produces a multifurcating tree.
#[derive(Clone, Debug)]
pub struct ColouredTree {
    pub tree: LabelledTree,
    /// Colour of the edge above each node; meaningful only above branch
    /// points (leaf edges carry no colour).
    blue: Vec<bool>,
}

impl ColouredTree {
    /// The two-leaf tree with a blue root edge.
    pub fn cherry() -> ColouredTree {
        let tree = LabelledTree::cherry();
        let mut blue = vec![false; tree.n_nodes()];
        let top = tree.node(tree.root()).children[0];
        blue[top] = true;
        ColouredTree { tree, blue }
    }

    pub fn is_blue(&self, id: NodeId) -> bool {
        self.blue[id]
    }

    /// Insertion sites under the binary rule: every edge, with weight
    /// `1 - alpha` on leaf edges and `alpha` on inner edges.
    pub fn sites<S: Scalar>(&self, alpha: &S) -> Vec<(GrowthSite, S)> {
        let one_minus = S::one() - alpha.clone();
        let mut out = Vec::new();
        let mut stack = vec![self.tree.node(self.tree.root()).children[0]];
        while let Some(id) = stack.pop() {
            let node = self.tree.node(id);
            if node.label.is_some() {
                out.push((GrowthSite::Edge(id), one_minus.clone()));
            } else {
                out.push((GrowthSite::Edge(id), alpha.clone()));
                for &child in node.children.iter().rev() {
                    stack.push(child);
                }
            }
        }
        out
    }

    /// Apply an edge insertion and return the possible outcomes with their
    /// probabilities: one outcome except on a blue edge, where the lower
    /// half turns red with probability `c`.
    pub fn apply_site<S: Scalar>(&self, site: GrowthSite, c: &S) -> Vec<(ColouredTree, S)> {
        let child = match site {
            GrowthSite::Edge(child) => child,
            GrowthSite::Vertex(_) => panic!("binary colour growth has no vertex sites"),
        };
        let child_is_leaf = self.tree.is_leaf(child);
        let child_was_blue = self.blue[child];
        let mut next = self.clone();
        let b = next.tree.split_edge_above(child);
        next.tree.add_leaf_child(b);
        next.blue.resize(next.tree.n_nodes(), false);
        if child_is_leaf {
            // fresh inner edge above the new branch point is blue
            next.blue[b] = true;
            return vec![(next, S::one())];
        }
        if !child_was_blue {
            // red edge: both halves red
            next.blue[b] = false;
            next.blue[child] = false;
            return vec![(next, S::one())];
        }
        // blue edge: upper half blue, lower half red w.p. c
        next.blue[b] = true;
        let mut red_low = next.clone();
        red_low.blue[child] = false;
        next.blue[child] = true;
        vec![(red_low, c.clone()), (next, S::one() - c.clone())]
    }

    /// Contract every red inner edge (absorb the child's children into its
    /// parent). Leaf labels are untouched.
    pub fn crush(&self) -> LabelledTree {
        let src = &self.tree;
        let mut text = String::new();
        fn emit(ct: &ColouredTree, id: NodeId, out: &mut String) {
            let node = ct.tree.node(id);
            if let Some(l) = node.label {
                out.push_str(&l.to_string());
                return;
            }
            // gather children, expanding through red-edged internal children
            let mut kids: Vec<NodeId> = Vec::new();
            let mut stack: Vec<NodeId> = node.children.iter().rev().copied().collect();
            while let Some(k) = stack.pop() {
                if ct.tree.node(k).label.is_none() && !ct.blue[k] {
                    for &g in ct.tree.node(k).children.iter().rev() {
                        stack.push(g);
                    }
                } else {
                    kids.push(k);
                }
            }
            out.push('(');
            for (i, k) in kids.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                emit(ct, *k, out);
            }
            out.push(')');
        }
        let top = src.node(src.root()).children[0];
        if src.is_leaf(top) {
            text.push_str("1;");
        } else {
            emit(self, top, &mut text);
            text.push(';');
        }
        LabelledTree::parse(&text).expect("crush output is well formed")
    }

    /// One sampled growth step.
    pub fn grow_step(&mut self, alpha: f64, c: f64, rng: &mut RngStream) {
        let sites = self.sites(&alpha);
        let weights: Vec<f64> = sites.iter().map(|(_, w)| *w).collect();
        let site = sites[rng.pick_weighted(&weights)].0;
        let outcomes = self.apply_site(site, &c);
        if outcomes.len() == 1 {
            *self = outcomes.into_iter().next().unwrap().0;
        } else {
            let idx = if rng.uniform() < outcomes[0].1 { 0 } else { 1 };
            *self = outcomes.into_iter().nth(idx).unwrap().0;
        }
    }
}

/// Grow a coloured binary tree to `n` leaves.
pub fn grow_coloured(alpha: f64, c: f64, n: u32, rng: &mut RngStream) -> ColouredTree {
    let mut t = ColouredTree::cherry();
    while t.tree.n_leaves() < n {
        t.grow_step(alpha, c, rng);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{chi_square_two_sample, parse_rational};
    use num_rational::BigRational;
    use num_traits::Zero;
    use std::collections::HashMap;

    fn params_exact(alpha: &str, gamma: &str) -> ModelParams<BigRational> {
        ModelParams::new(parse_rational(alpha).unwrap(), parse_rational(gamma).unwrap()).unwrap()
    }

    #[test]
    fn params_are_validated() {
        assert!(ModelParams::new(0.5, 0.25).is_ok());
        assert!(ModelParams::new(0.25, 0.5).is_err()); // gamma > alpha
        assert!(ModelParams::new(1.5, 0.5).is_err());
        assert!(ModelParams::new(0.5, -0.1).is_err());
        assert!(ModelParams::ford(0.5).unwrap().is_binary());
    }

    #[test]
    fn total_weight_is_n_minus_alpha() {
        let params = params_exact("1/2", "1/4");
        for text in ["(1,2);", "((1,2),3);", "(1,2,3);", "((1,4),(2,3));", "((1,2,5),3,4);"] {
            let t = LabelledTree::parse(text).unwrap();
            let n = BigRational::from_int(t.n_leaves() as i64);
            assert_eq!(total_weight(&t, &params), n - params.alpha.clone());
        }
    }

    #[test]
    fn cherry_step_probabilities() {
        // from the cherry: two leaf edges (1-a each), the root edge (g), the
        // top vertex (a-g); total 2-a
        let params = params_exact("1/2", "1/4");
        let t = LabelledTree::cherry();
        let sites = growth_sites(&t, &params);
        assert_eq!(sites.len(), 4);
        let mut by_kind: HashMap<&str, BigRational> = HashMap::new();
        for (site, w) in &sites {
            let kind = match site {
                GrowthSite::Edge(id) if t.is_leaf(*id) => "leaf",
                GrowthSite::Edge(_) => "inner",
                GrowthSite::Vertex(_) => "vertex",
            };
            *by_kind.entry(kind).or_insert_with(BigRational::zero) += w.clone();
        }
        assert_eq!(by_kind["leaf"], parse_rational("1").unwrap());
        assert_eq!(by_kind["inner"], parse_rational("1/4").unwrap());
        assert_eq!(by_kind["vertex"], parse_rational("1/4").unwrap());
    }

    #[test]
    fn ford_growth_stays_binary() {
        let params = ModelParams::ford(0.6).unwrap();
        let mut rng = RngStream::new(7);
        let t = grow_reference(&params, 40, &mut rng);
        t.validate().unwrap();
        for id in t.branch_points() {
            assert_eq!(t.node(id).children.len(), 2);
        }
    }

    #[test]
    fn degenerate_star_and_comb() {
        let mut rng = RngStream::new(1);
        // alpha = 1, gamma = 0: star
        let star = grow_reference(&ModelParams::new(1.0, 0.0).unwrap(), 12, &mut rng);
        assert_eq!(star.canonical_code(), format!("({})", "o".repeat(12)));
        // alpha = 1, gamma = 1: comb (every branch point has a leaf child,
        // shape code nests two at a time)
        let comb = grow_reference(&ModelParams::new(1.0, 1.0).unwrap(), 12, &mut rng);
        let mut expect = "(oo)".to_string();
        for _ in 0..10 {
            expect = format!("({expect}o)");
        }
        assert_eq!(comb.canonical_code(), expect);
    }

    #[test]
    fn fast_sampler_matches_reference_law() {
        let params = ModelParams::new(0.5, 0.25).unwrap();
        let reps = 4000;
        let mut counts_ref: HashMap<String, u64> = HashMap::new();
        let mut counts_fast: HashMap<String, u64> = HashMap::new();
        let mut rng = RngStream::new(2024);
        for _ in 0..reps {
            let t = grow_reference(&params, 5, &mut rng);
            *counts_ref.entry(t.labelled_key()).or_insert(0) += 1;
        }
        for _ in 0..reps {
            let t = grow(&params, 5, &mut rng);
            *counts_fast.entry(t.labelled_key()).or_insert(0) += 1;
        }
        let mut keys: Vec<String> = counts_ref.keys().chain(counts_fast.keys()).cloned().collect();
        keys.sort();
        keys.dedup();
        let a: Vec<u64> = keys.iter().map(|k| *counts_ref.get(k).unwrap_or(&0)).collect();
        let b: Vec<u64> = keys.iter().map(|k| *counts_fast.get(k).unwrap_or(&0)).collect();
        let (_, p) = chi_square_two_sample(&a, &b);
        assert!(p > 1e-4, "samplers disagree, p = {p}");
    }

    #[test]
    fn fast_sampler_handles_boundaries() {
        let mut rng = RngStream::new(3);
        for (a, g) in [(0.5, 0.5), (0.5, 0.0), (1.0, 0.0), (1.0, 1.0), (1.0, 0.5), (0.0, 0.0)] {
            let t = grow(&ModelParams::new(a, g).unwrap(), 30, &mut rng);
            t.validate().unwrap();
            assert_eq!(t.n_leaves(), 30);
        }
    }

    #[test]
    fn coloured_growth_keeps_top_edge_blue() {
        let mut rng = RngStream::new(11);
        for _ in 0..50 {
            let ct = grow_coloured(0.5, 0.5, 20, &mut rng);
            ct.tree.validate().unwrap();
            let top = ct.tree.node(ct.tree.root()).children[0];
            assert!(ct.is_blue(top));
            // binary throughout
            for id in ct.tree.branch_points() {
                assert_eq!(ct.tree.node(id).children.len(), 2);
            }
        }
    }

    #[test]
    fn crush_contracts_red_edges() {
        // build a 3-leaf coloured tree by hand: ((1,2),3) with the inner
        // edge above the cherry red -> crushing gives the star
        let ct = ColouredTree::cherry();
        let sites = ct.sites(&0.5f64);
        // find the leaf-1 edge
        let leaf1 = ct.tree.leaf_id(1);
        let site = sites
            .iter()
            .map(|(s, _)| *s)
            .find(|s| matches!(s, GrowthSite::Edge(id) if *id == leaf1))
            .unwrap();
        let grown = ct.apply_site(site, &0.5f64);
        assert_eq!(grown.len(), 1); // leaf edge: deterministic
        let ct3 = &grown[0].0;
        assert_eq!(ct3.tree.n_leaves(), 3);
        // the new inner edge is blue, so crush is the identity here
        assert_eq!(ct3.crush().labelled_key(), ct3.tree.labelled_key());
        // force the inner edge above the cherry red and crush to a star
        let mut red = ct3.clone();
        let top = red.tree.node(red.tree.root()).children[0];
        let inner = red
            .tree
            .node(top)
            .children
            .iter()
            .copied()
            .find(|&k| !red.tree.is_leaf(k))
            .unwrap();
        red.blue[inner] = false;
        assert_eq!(red.crush().canonical_code(), "(ooo)");
    }

    #[test]
    fn blue_edge_split_branches_in_two() {
        let ct = ColouredTree::cherry();
        let top = ct.tree.node(ct.tree.root()).children[0];
        let outcomes = ct.apply_site(GrowthSite::Edge(top), &0.25f64);
        assert_eq!(outcomes.len(), 2);
        let total: f64 = outcomes.iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-15);
        assert!((outcomes[0].1 - 0.25).abs() < 1e-15); // red outcome first
    }
}
