//! Reduced-tree statistics and Monte-Carlo suites for the scaling limits.
//!
//! Fix `k` and grow a tree to `n` leaves. The subtree spanned by the root and
//! leaves `1..=k` — keeping degree-2 vertices, so edges have integer lengths —
//! carries the statistics whose joint scaling limit this module verifies:
//!
//! * the reduced shape (delabelled, equal in law to the tree at size `k`);
//! * the split of the other `n - k` leaves into *white* ones (hanging in
//!   bushes off reduced-tree edges) and *black* ones (hanging directly off
//!   reduced-tree branch points);
//! * the total skeleton length and its split over the `k + ell` edges;
//! * the degrees of the reduced tree's branch points inside the big tree.
//!
//! Scaled by the appropriate powers of `n`, these converge jointly: the white
//! fraction to a beta law, edge proportions to a Dirichlet, total length over
//! `(whites)^gamma` to a size-biased stable factor, and total branch-point
//! degree over `(blacks)^alpha` to the analogous factor with `alpha` in place
//! of `gamma`. [`LimitLaws`] packages the limit parameters for a given shape;
//! `run_mc_*` estimate the statistics over seeded replicates and compare.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::crp::{crp_run, mittag_leffler_sample};
use crate::growth::{grow, Grower, ModelParams};
use crate::numerics::{
    beta_cdf, gamma_fn, gamma_ratio, ks_test, ks_two_sample, mean_stderr, normal_two_sided_p,
    KsResult,
};
use crate::rng::RngStream;
use crate::tree::{LabelledTree, TreeShape};
use crate::{Error, Result};

/// Give up on rejection sampling of a reduced shape after this many tries.
const MAX_SHAPE_REJECTIONS: u32 = 100_000;

/// Replicate-index offset separating the two groups of a two-sample run, so
/// both groups draw from disjoint, reproducible streams of one master seed.
const SECOND_GROUP_OFFSET: u64 = 1 << 32;

// ---------------------------------------------------------------------------
// reduced-tree bookkeeping
// ---------------------------------------------------------------------------

/// Everything measured on the subtree spanned by the root and leaves
/// `1..=k` inside a tree with `n` leaves.
#[derive(Clone, Debug)]
pub struct ReducedTreeStats {
    pub k: u32,
    pub n: u32,
    /// Canonical code of the reduced shape (degree-2 vertices suppressed).
    pub shape: String,
    /// Number of branch points of the reduced shape.
    pub ell: u32,
    /// White leaves: labels `> k` whose bush hangs off a reduced-tree edge.
    pub w_nk: u64,
    /// Black leaves: labels `> k` whose bush hangs off a branch point;
    /// `w_nk + w_bar_nk = n - k`.
    pub w_bar_nk: u64,
    /// Degree-2 skeleton vertices; each carries exactly one (white) bush.
    pub bush_count: u64,
    /// Total skeleton length, `sum(edge_lengths) = bush_count + k + ell`.
    pub skeleton_length: u64,
    /// Integer edge lengths, the `k` leaf edges first, then the `ell` inner
    /// edges, each group in depth-first order.
    pub edge_lengths: Vec<u64>,
    /// Degrees (in the big tree) of the reduced branch points, depth-first.
    pub branch_degrees: Vec<u64>,
}

impl ReducedTreeStats {
    /// Edge lengths divided by the total skeleton length.
    pub fn edge_proportions(&self) -> Vec<f64> {
        let total = self.skeleton_length as f64;
        self.edge_lengths.iter().map(|&l| l as f64 / total).collect()
    }

    /// Sum of the branch-point degrees.
    pub fn total_degree(&self) -> u64 {
        self.branch_degrees.iter().sum()
    }

    /// White leaves as a fraction of all `n` leaves.
    pub fn white_fraction(&self) -> f64 {
        self.w_nk as f64 / self.n as f64
    }
}

/// Measure the subtree spanned by the root and leaves `1..=k` of `tree`.
pub fn reduced_stats(tree: &LabelledTree, k: u32) -> Result<ReducedTreeStats> {
    let n = tree.n_leaves();
    if k < 2 || k > n {
        return Err(Error::Domain(format!(
            "reduced statistics need 2 <= k <= n, got k = {k}, n = {n}"
        )));
    }
    let nn = tree.n_nodes();
    let root = tree.root();

    // Mark the skeleton: union of the paths from leaves 1..=k to the root.
    let mut marked = vec![false; nn];
    marked[root] = true;
    for label in 1..=k {
        let mut v = tree.leaf_id(label);
        while !marked[v] {
            marked[v] = true;
            match tree.node(v).parent {
                Some(p) => v = p,
                None => break,
            }
        }
    }

    // Marked children per marked vertex. A marked vertex is a branch point of
    // the reduced tree iff it has >= 2 of them, a degree-2 skeleton vertex iff
    // exactly 1 (the root and the k marked leaves are neither).
    let mut skel_children = vec![0u32; nn];
    for id in 0..nn {
        if marked[id] {
            if let Some(p) = tree.node(id).parent {
                skel_children[p] += 1;
            }
        }
    }

    let mut ell = 0u32;
    let mut bush_count = 0u64;
    for id in 0..nn {
        if marked[id] && id != root && !tree.is_leaf(id) {
            if skel_children[id] >= 2 {
                ell += 1;
            } else {
                bush_count += 1;
            }
        }
    }

    // First marked ancestor of every vertex, by one preorder sweep. A leaf
    // with label > k is white iff that ancestor is a degree-2 skeleton vertex
    // and black iff it is a branch point (it is never the root or a marked
    // leaf: the root's only child lies on the path to leaf 1, and leaves have
    // no descendants).
    let mut anchor = vec![root; nn];
    let mut stack = vec![root];
    while let Some(v) = stack.pop() {
        for &c in &tree.node(v).children {
            anchor[c] = if marked[c] { c } else { anchor[v] };
            stack.push(c);
        }
    }
    let mut w_nk = 0u64;
    let mut w_bar_nk = 0u64;
    for label in (k + 1)..=n {
        let a = anchor[tree.leaf_id(label)];
        if skel_children[a] >= 2 {
            w_bar_nk += 1;
        } else {
            w_nk += 1;
        }
    }

    // Walk the skeleton from the root, contracting chains of degree-2
    // vertices into integer edge lengths.
    fn descend(
        tree: &LabelledTree,
        marked: &[bool],
        skel_children: &[u32],
        from: usize,
        leaf_lens: &mut Vec<u64>,
        inner_lens: &mut Vec<u64>,
        degrees: &mut Vec<u64>,
    ) {
        for &c in &tree.node(from).children {
            if !marked[c] {
                continue;
            }
            let mut len = 1u64;
            let mut cur = c;
            while !tree.is_leaf(cur) && skel_children[cur] == 1 {
                cur = *tree
                    .node(cur)
                    .children
                    .iter()
                    .find(|&&w| marked[w])
                    .expect("degree-2 skeleton vertex has a marked child");
                len += 1;
            }
            if tree.is_leaf(cur) {
                leaf_lens.push(len);
            } else {
                inner_lens.push(len);
                degrees.push(tree.node(cur).children.len() as u64 + 1);
                descend(tree, marked, skel_children, cur, leaf_lens, inner_lens, degrees);
            }
        }
    }
    let mut leaf_lens = Vec::with_capacity(k as usize);
    let mut inner_lens = Vec::with_capacity(ell as usize);
    let mut branch_degrees = Vec::with_capacity(ell as usize);
    descend(tree, &marked, &skel_children, root, &mut leaf_lens, &mut inner_lens, &mut branch_degrees);
    debug_assert_eq!(leaf_lens.len(), k as usize);
    debug_assert_eq!(inner_lens.len(), ell as usize);
    let mut edge_lengths = leaf_lens;
    edge_lengths.extend_from_slice(&inner_lens);
    let skeleton_length: u64 = edge_lengths.iter().sum();
    debug_assert_eq!(skeleton_length, bush_count + k as u64 + ell as u64);

    let shape = tree.reduced_subtree(k)?.canonical_code();
    Ok(ReducedTreeStats {
        k,
        n,
        shape,
        ell,
        w_nk,
        w_bar_nk,
        bush_count,
        skeleton_length,
        edge_lengths,
        branch_degrees,
    })
}

/// Grow a tree to `n` leaves and measure the subtree spanned by leaves
/// `1..=k`. The reduced shape never changes once the tree has `k` leaves, so
/// the returned shape is equal in law to a size-`k` tree.
pub fn track_reduced(
    params: &ModelParams<f64>,
    k: u32,
    n: u32,
    rng: &mut RngStream,
) -> Result<ReducedTreeStats> {
    if k < 2 || k > n {
        return Err(Error::Domain(format!(
            "track_reduced needs 2 <= k <= n, got k = {k}, n = {n}"
        )));
    }
    let mut grower = Grower::new(*params);
    grower.grow_to(k, rng);
    let at_k = grower.tree().canonical_code();
    grower.grow_to(n, rng);
    let stats = reduced_stats(grower.tree(), k)?;
    debug_assert_eq!(stats.shape, at_k, "reduced shape must match the size-k snapshot");
    Ok(stats)
}

/// Like [`track_reduced`], but restarts until the shape at size `k` equals
/// `target`, so the returned statistics are conditioned on that reduced
/// shape. Errors if the target is not hit within a large number of tries
/// (in particular when it is unreachable, e.g. a multifurcating shape under a
/// binary model).
pub fn track_reduced_conditional(
    params: &ModelParams<f64>,
    k: u32,
    n: u32,
    target: &TreeShape,
    rng: &mut RngStream,
) -> Result<ReducedTreeStats> {
    if k < 2 || k > n {
        return Err(Error::Domain(format!(
            "track_reduced_conditional needs 2 <= k <= n, got k = {k}, n = {n}"
        )));
    }
    if target.n_leaves() != k {
        return Err(Error::Domain(format!(
            "target shape {target} has {} leaves, expected {k}",
            target.n_leaves()
        )));
    }
    for _ in 0..MAX_SHAPE_REJECTIONS {
        let mut grower = Grower::new(*params);
        grower.grow_to(k, rng);
        if grower.tree().canonical_code() != target.0 {
            continue;
        }
        grower.grow_to(n, rng);
        return reduced_stats(grower.tree(), k);
    }
    Err(Error::Domain(format!(
        "shape {target} not reached in {MAX_SHAPE_REJECTIONS} tries; is it reachable under these parameters?"
    )))
}

// ---------------------------------------------------------------------------
// limit laws
// ---------------------------------------------------------------------------

/// Parameters of the joint scaling limit of the reduced-tree statistics,
/// conditional on a reduced shape with `k` leaves and `ell` branch points.
///
/// With `w = k(1 - alpha) + ell * gamma` and `w_bar = (k - 1)alpha -
/// ell * gamma` (the total leaf-edge and branch-point growth weights):
///
/// * white fraction: `beta(w, w_bar)` — degenerate at 1 when `w_bar = 0`;
/// * edge proportions: Dirichlet with weight `(1 - alpha)/gamma` per leaf
///   edge and `1` per inner edge;
/// * scaled length `L / whites^gamma`: moments from [`Self::length_moment`];
/// * scaled degree `total_degree / blacks^alpha`: moments from
///   [`Self::degree_moment`], with a Dirichlet split of weights
///   `c_i - 1 - gamma/alpha` over branch points (degenerate whenever some
///   `c_i - 1 - gamma/alpha <= 0`, e.g. for any binary model).
#[derive(Clone, Debug)]
pub struct LimitLaws {
    pub k: u32,
    pub ell: u32,
    pub alpha: f64,
    pub gamma: f64,
    /// Beta parameters of the white-fraction limit: `(w, w_bar)`.
    pub w_params: (f64, f64),
    /// The white fraction converges to the constant 1 (`w_bar = 0`).
    pub w_degenerate: bool,
    /// Dirichlet weights of the edge-proportion limit, leaf edges first.
    pub d_params: Vec<f64>,
    /// Dirichlet weights of the degree split over branch points, in the
    /// order of [`TreeShape::child_counts`].
    pub d_prime_params: Vec<f64>,
    /// The degree limit is degenerate (no black leaves, or some degree
    /// weight is non-positive).
    pub degree_degenerate: bool,
}

/// Limit-law parameters for the given model and reduced shape.
pub fn limit_laws(params: &ModelParams<f64>, shape: &TreeShape) -> Result<LimitLaws> {
    let (alpha, gamma) = (params.alpha, params.gamma);
    if !(alpha > 0.0 && alpha < 1.0) || gamma <= 0.0 {
        return Err(Error::Params(
            "scaling limits need 0 < alpha < 1 and 0 < gamma <= alpha".into(),
        ));
    }
    let k = shape.n_leaves();
    let ell = shape.n_branch_points();
    if k < 2 {
        return Err(Error::Domain("reduced shapes have at least 2 leaves".into()));
    }
    let w = k as f64 * (1.0 - alpha) + ell as f64 * gamma;
    let w_bar = (k - 1) as f64 * alpha - ell as f64 * gamma;
    if w_bar < -1e-12 {
        return Err(Error::Domain(format!(
            "shape {shape} has negative total branch weight under these parameters"
        )));
    }
    let w_degenerate = w_bar <= 1e-12;
    let mut d_params = vec![(1.0 - alpha) / gamma; k as usize];
    d_params.extend(std::iter::repeat(1.0).take(ell as usize));
    let d_prime_params: Vec<f64> = shape
        .child_counts()
        .iter()
        .map(|&c| (c - 1) as f64 - gamma / alpha)
        .collect();
    let degree_degenerate = w_degenerate || d_prime_params.iter().any(|&a| a <= 1e-12);
    Ok(LimitLaws {
        k,
        ell,
        alpha,
        gamma,
        w_params: (w, w_bar),
        w_degenerate,
        d_params,
        d_prime_params,
        degree_degenerate,
    })
}

impl LimitLaws {
    /// `p`-th moment of the scaled-length limit: with `w = w_params.0`,
    /// `Gamma(w + 1) Gamma(w/gamma + p + 1) / (Gamma(w/gamma + 1) Gamma(w + p*gamma + 1))`.
    pub fn length_moment(&self, p: f64) -> f64 {
        let w = self.w_params.0;
        let g = self.gamma;
        gamma_ratio(&[w + 1.0, w / g + p + 1.0], &[w / g + 1.0, w + p * g + 1.0])
    }

    /// `p`-th moment of the scaled-degree limit: same form with
    /// `w_bar = w_params.1` and `alpha` in place of `gamma`.
    pub fn degree_moment(&self, p: f64) -> f64 {
        let wb = self.w_params.1;
        let a = self.alpha;
        gamma_ratio(&[wb + 1.0, wb / a + p + 1.0], &[wb / a + 1.0, wb + p * a + 1.0])
    }

    /// Beta parameters of the `i`-th edge proportion (0-based, leaf edges
    /// first): a Dirichlet coordinate is beta(own weight, rest).
    pub fn edge_marginal(&self, i: usize) -> (f64, f64) {
        let total: f64 = self.d_params.iter().sum();
        (self.d_params[i], total - self.d_params[i])
    }

    /// Distribution function of the white-fraction limit.
    pub fn white_cdf(&self, x: f64) -> f64 {
        if self.w_degenerate {
            if x >= 1.0 {
                1.0
            } else {
                0.0
            }
        } else {
            beta_cdf(self.w_params.0, self.w_params.1, x)
        }
    }
}

/// `p`-th moment of the scaled number of tables in an `(a, theta)` seating
/// process, `tables / n^a`:
/// `[Gamma(theta + 1) / Gamma(theta/a + 1)] * Gamma(theta/a + p + 1) / Gamma(theta + p*a + 1)`.
/// At `theta = 0` this reduces to the Mittag-Leffler moments
/// `Gamma(p + 1) / Gamma(p*a + 1)`.
pub fn crp_scaling_moment(a: f64, theta: f64, p: f64) -> f64 {
    gamma_ratio(&[theta + 1.0, theta / a + p + 1.0], &[theta / a + 1.0, theta + p * a + 1.0])
}

/// Sizes of the subtrees hanging off the root-to-leaf-1 spine, in creation
/// order, divided by `n - 1`. The limit is the stick-breaking sequence
/// `(W_1, (1 - W_1)W_2, ...)` with independent `W_i ~ beta(1 - alpha,
/// 1 + (i - 1)alpha)` — free of `gamma`.
pub fn spine_frequencies(tree: &LabelledTree) -> Result<Vec<f64>> {
    let d = tree.spinal_decomposition()?;
    let denom = (tree.n_leaves() - 1) as f64;
    Ok(d.subtree_sizes_in_creation_order().iter().map(|&s| s as f64 / denom).collect())
}

// ---------------------------------------------------------------------------
// Monte-Carlo reports
// ---------------------------------------------------------------------------

/// Seating-process scaling run: tables at size `n` over `n^alpha`, plus
/// direct draws from the Mittag-Leffler sampler.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CrpMcConfig {
    pub alpha: f64,
    pub theta: f64,
    pub n: u64,
    pub replicates: u32,
    pub seed: u64,
}

/// Reduced-tree scaling run at fixed `k`, conditioned on a reduced shape
/// (`target_shape = None` is allowed only for `k = 2`, where the shape is
/// the cherry with certainty).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReducedMcConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub k: u32,
    pub n: u32,
    pub replicates: u32,
    pub seed: u64,
    #[serde(default)]
    pub target_shape: Option<String>,
}

/// Spine-frequency run: the first subtree frequency against its beta limit,
/// optionally a two-sample comparison against a second `gamma` to exhibit
/// that the spine law does not depend on `gamma`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpineMcConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub n: u32,
    pub replicates: u32,
    pub seed: u64,
    #[serde(default)]
    pub compare_gamma: Option<f64>,
}

/// One line of a Monte-Carlo report. For moment rows `estimate` is a sample
/// mean, `stderr` its standard error, and the row passes when the estimate
/// is within three standard errors of `target` (`p_value` is the two-sided
/// normal tail). For Kolmogorov-Smirnov rows `estimate` is the statistic,
/// `stderr` is null, `target` is the significance threshold, and the row
/// passes when `p_value` exceeds it. Informational rows carry `p_value`
/// null.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Statistic {
    pub name: String,
    pub estimate: f64,
    pub stderr: Option<f64>,
    pub target: f64,
    pub p_value: Option<f64>,
    pub pass: bool,
}

/// A Monte-Carlo run: the configuration it was produced from, one row per
/// checked statistic, and the conjunction of their verdicts.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct McReport {
    pub config: serde_json::Value,
    pub statistics: Vec<Statistic>,
    pub pass: bool,
}

impl McReport {
    fn new<C: Serialize>(config: &C, statistics: Vec<Statistic>) -> Result<McReport> {
        let config = serde_json::to_value(config)
            .map_err(|e| Error::Domain(format!("config serialization: {e}")))?;
        let pass = statistics.iter().all(|s| s.pass);
        Ok(McReport { config, statistics, pass })
    }
}

/// Run a closure on a dedicated pool of `threads` workers (shared global
/// pool when `None`). Replicates are indexed, and each draws its own stream
/// from the master seed, so reports are identical for every thread count.
fn with_pool<T: Send>(threads: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(job()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::Params(format!("thread pool: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

fn moment_row(name: &str, xs: &[f64], target: f64) -> Statistic {
    if xs.len() < 2 {
        return Statistic {
            name: name.into(),
            estimate: f64::NAN,
            stderr: None,
            target,
            p_value: None,
            pass: false,
        };
    }
    let (mean, se) = mean_stderr(xs);
    let z = if se > 0.0 {
        (mean - target) / se
    } else if mean == target {
        0.0
    } else {
        f64::INFINITY
    };
    Statistic {
        name: name.into(),
        estimate: mean,
        stderr: Some(se),
        target,
        p_value: Some(normal_two_sided_p(z)),
        pass: z.abs() <= 3.0,
    }
}

fn ks_row(name: &str, ks: KsResult, threshold: f64) -> Statistic {
    Statistic {
        name: name.into(),
        estimate: ks.statistic,
        stderr: None,
        target: threshold,
        p_value: Some(ks.p_value),
        pass: ks.p_value > threshold,
    }
}

fn info_row(name: &str, estimate: f64, target: f64) -> Statistic {
    Statistic { name: name.into(), estimate, stderr: None, target, p_value: None, pass: true }
}

/// Significance threshold for the Kolmogorov-Smirnov rows.
const KS_LEVEL: f64 = 0.001;

/// Seating-process scaling: mean of `tables / n^alpha` against the limit
/// mean, and first two moments of the Mittag-Leffler sampler against
/// `Gamma(p + 1) / Gamma(p*alpha + 1)`.
pub fn run_mc_crp(cfg: &CrpMcConfig, threads: Option<usize>) -> Result<McReport> {
    if cfg.replicates < 2 || cfg.n < 1 {
        return Err(Error::Params("need replicates >= 2 and n >= 1".into()));
    }
    let (alpha, theta) = (cfg.alpha, cfg.theta);
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Params("seating scaling needs 0 < alpha < 1".into()));
    }
    let samples: Vec<(f64, f64)> = with_pool(threads, || {
        (0..cfg.replicates)
            .into_par_iter()
            .map(|r| {
                let mut rng = RngStream::replicate(cfg.seed, r as u64);
                let state = crp_run(alpha, theta, cfg.n, &mut rng)?;
                let scaled = state.table_count() as f64 / (cfg.n as f64).powf(alpha);
                let ml = mittag_leffler_sample(alpha, &mut rng)?;
                Ok((scaled, ml))
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let tables: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let ml1: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let ml2: Vec<f64> = samples.iter().map(|s| s.1 * s.1).collect();
    let statistics = vec![
        moment_row("tables_scaled.mean", &tables, crp_scaling_moment(alpha, theta, 1.0)),
        moment_row("mittag_leffler.moment1", &ml1, gamma_fn(2.0) / gamma_fn(1.0 + alpha)),
        moment_row("mittag_leffler.moment2", &ml2, gamma_fn(3.0) / gamma_fn(1.0 + 2.0 * alpha)),
    ];
    McReport::new(cfg, statistics)
}

fn validate_shape_code(code: &str, k: u32) -> Result<TreeShape> {
    let mut depth = 0i64;
    for b in code.bytes() {
        match b {
            b'(' => depth += 1,
            b')' => depth -= 1,
            b'o' => {}
            other => {
                return Err(Error::Parse(format!(
                    "shape codes use only '(', ')', 'o'; found {:?}",
                    other as char
                )))
            }
        }
        if depth < 0 {
            return Err(Error::Parse(format!("unbalanced shape code {code:?}")));
        }
    }
    if depth != 0 {
        return Err(Error::Parse(format!("unbalanced shape code {code:?}")));
    }
    let shape = TreeShape(code.to_string());
    if shape.n_leaves() != k {
        return Err(Error::Domain(format!(
            "target shape {code} has {} leaves, expected {k}",
            shape.n_leaves()
        )));
    }
    Ok(shape)
}

/// Reduced-tree scaling at fixed `k`, conditioned on a reduced shape:
/// Kolmogorov-Smirnov tests of the white fraction and each edge proportion
/// against their beta limits, moments of the scaled skeleton length (and,
/// when non-degenerate, the scaled total branch-point degree), and the
/// correlation between white fraction and scaled length, which the limit
/// factorization forces to vanish.
///
/// Replicates where the relevant count (whites, respectively blacks) is zero
/// cannot be scaled by its `gamma`- or `alpha`-th power and are skipped; the
/// report carries their number in informational rows.
pub fn run_mc_reduced(cfg: &ReducedMcConfig, threads: Option<usize>) -> Result<McReport> {
    if cfg.replicates < 2 {
        return Err(Error::Params("need replicates >= 2".into()));
    }
    if cfg.n <= cfg.k {
        return Err(Error::Params("need n > k".into()));
    }
    let params = ModelParams::new(cfg.alpha, cfg.gamma)?;
    let target = match &cfg.target_shape {
        Some(code) => validate_shape_code(code, cfg.k)?,
        None if cfg.k == 2 => TreeShape("(oo)".into()),
        None => {
            return Err(Error::Params(
                "the limit laws are conditional on the reduced shape; pass a target shape for k > 2"
                    .into(),
            ))
        }
    };
    let laws = limit_laws(&params, &target)?;

    let stats: Vec<ReducedTreeStats> = with_pool(threads, || {
        (0..cfg.replicates)
            .into_par_iter()
            .map(|r| {
                let mut rng = RngStream::replicate(cfg.seed, r as u64);
                track_reduced_conditional(&params, cfg.k, cfg.n, &target, &mut rng)
            })
            .collect::<Result<Vec<_>>>()
    })??;

    let mut statistics = Vec::new();

    // white fraction against beta(w, w_bar)
    let whites: Vec<f64> = stats.iter().map(|s| s.white_fraction()).collect();
    if laws.w_degenerate {
        // all leaves beyond the first k are white, up to the k spanning ones
        let (mean, se) = mean_stderr(&whites);
        let slack = (cfg.k as f64 + 1.0) / cfg.n as f64;
        statistics.push(Statistic {
            name: "white_fraction.mean".into(),
            estimate: mean,
            stderr: Some(se),
            target: 1.0,
            p_value: None,
            pass: (mean - 1.0).abs() <= slack,
        });
    } else {
        let ks = ks_test(&whites, |x| laws.white_cdf(x));
        statistics.push(ks_row("white_fraction.ks", ks, KS_LEVEL));
    }

    // each edge proportion against its Dirichlet marginal
    for i in 0..(cfg.k + laws.ell) as usize {
        let xs: Vec<f64> = stats.iter().map(|s| s.edge_proportions()[i]).collect();
        let (a, b) = laws.edge_marginal(i);
        let ks = ks_test(&xs, |x| beta_cdf(a, b, x));
        statistics.push(ks_row(&format!("edge_proportion_{}.ks", i + 1), ks, KS_LEVEL));
    }

    // skeleton length over whites^gamma
    let scaled_len: Vec<f64> = stats
        .iter()
        .filter(|s| s.w_nk > 0)
        .map(|s| s.skeleton_length as f64 / (s.w_nk as f64).powf(cfg.gamma))
        .collect();
    let len_skipped = (stats.len() - scaled_len.len()) as f64;
    let squares: Vec<f64> = scaled_len.iter().map(|&x| x * x).collect();
    statistics.push(moment_row("length_scaled.moment1", &scaled_len, laws.length_moment(1.0)));
    statistics.push(moment_row("length_scaled.moment2", &squares, laws.length_moment(2.0)));
    statistics.push(info_row("length_scaled.skipped_replicates", len_skipped, 0.0));

    // total branch-point degree over blacks^alpha
    if laws.degree_degenerate {
        let max_black = stats.iter().map(|s| s.w_bar_nk).max().unwrap_or(0);
        statistics.push(Statistic {
            name: "degree_scaled.degenerate_blacks".into(),
            estimate: max_black as f64,
            stderr: None,
            target: 0.0,
            p_value: None,
            pass: max_black == 0,
        });
    } else {
        let scaled_deg: Vec<f64> = stats
            .iter()
            .filter(|s| s.w_bar_nk > 0)
            .map(|s| s.total_degree() as f64 / (s.w_bar_nk as f64).powf(cfg.alpha))
            .collect();
        let deg_skipped = (stats.len() - scaled_deg.len()) as f64;
        let deg_squares: Vec<f64> = scaled_deg.iter().map(|&x| x * x).collect();
        statistics.push(moment_row("degree_scaled.moment1", &scaled_deg, laws.degree_moment(1.0)));
        statistics
            .push(moment_row("degree_scaled.moment2", &deg_squares, laws.degree_moment(2.0)));
        statistics.push(info_row("degree_scaled.skipped_replicates", deg_skipped, 0.0));
    }

    // asymptotic independence: white fraction and scaled length decorrelate
    if !laws.w_degenerate && scaled_len.len() >= 2 {
        let paired_whites: Vec<f64> = stats
            .iter()
            .filter(|s| s.w_nk > 0)
            .map(|s| s.white_fraction())
            .collect();
        let corr = crate::numerics::correlation(&paired_whites, &scaled_len);
        let se = 1.0 / (scaled_len.len() as f64).sqrt();
        statistics.push(Statistic {
            name: "independence.white_length_correlation".into(),
            estimate: corr,
            stderr: Some(se),
            target: 0.0,
            p_value: Some(normal_two_sided_p(corr / se)),
            pass: corr.abs() <= 3.0 * se,
        });
    }

    McReport::new(cfg, statistics)
}

/// Spine frequencies: the first subtree frequency against its
/// `beta(1 - alpha, 1)` limit and, when `compare_gamma` is set, a two-sample
/// comparison showing the law does not change with `gamma`.
pub fn run_mc_spine(cfg: &SpineMcConfig, threads: Option<usize>) -> Result<McReport> {
    if cfg.replicates < 2 || cfg.n < 2 {
        return Err(Error::Params("need replicates >= 2 and n >= 2".into()));
    }
    let params = ModelParams::new(cfg.alpha, cfg.gamma)?;
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(Error::Params("the spine limit needs 0 < alpha < 1".into()));
    }
    let first_freq = |params: ModelParams<f64>, offset: u64| -> Result<Vec<f64>> {
        (0..cfg.replicates)
            .into_par_iter()
            .map(|r| {
                let mut rng = RngStream::replicate(cfg.seed, offset + r as u64);
                let tree = grow(&params, cfg.n, &mut rng);
                Ok(spine_frequencies(&tree)?[0])
            })
            .collect()
    };
    let report = with_pool(threads, || -> Result<Vec<Statistic>> {
        let p1 = first_freq(params, 0)?;
        let ks = ks_test(&p1, |x| beta_cdf(1.0 - cfg.alpha, 1.0, x));
        let mut statistics = vec![ks_row("first_spine_frequency.ks", ks, KS_LEVEL)];
        if let Some(gamma2) = cfg.compare_gamma {
            let params2 = ModelParams::new(cfg.alpha, gamma2)?;
            let p1b = first_freq(params2, SECOND_GROUP_OFFSET)?;
            let ks2 = ks_two_sample(&p1, &p1b);
            statistics.push(ks_row("gamma_invariance.two_sample_ks", ks2, KS_LEVEL));
        }
        Ok(statistics)
    })??;
    McReport::new(cfg, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(alpha: f64, gamma: f64) -> ModelParams<f64> {
        ModelParams::new(alpha, gamma).unwrap()
    }

    #[test]
    fn skeleton_bookkeeping_invariants() {
        let p = params(0.7, 0.3);
        let mut rng = RngStream::new(42);
        for _ in 0..5 {
            let mut grower = Grower::new(p);
            grower.grow_to(60, &mut rng);
            let t = grower.tree();
            for k in [2u32, 3, 4, 5] {
                let s = reduced_stats(t, k).unwrap();
                assert_eq!(s.n, 60);
                assert_eq!(s.w_nk + s.w_bar_nk, (60 - k) as u64);
                assert_eq!(s.edge_lengths.len() as u32, k + s.ell);
                assert_eq!(s.skeleton_length, s.edge_lengths.iter().sum::<u64>());
                assert_eq!(s.skeleton_length, s.bush_count + k as u64 + s.ell as u64);
                assert_eq!(s.branch_degrees.len() as u32, s.ell);
                assert!(s.branch_degrees.iter().all(|&d| d >= 3));
                // shape agrees with the independently computed reduced subtree
                assert_eq!(s.shape, t.reduced_subtree(k).unwrap().canonical_code());
                // a branch point's degree in the big tree is at least its
                // reduced degree
                let reduced_total: u64 = TreeShape(s.shape.clone())
                    .child_counts()
                    .iter()
                    .map(|&c| c as u64 + 1)
                    .sum();
                assert!(s.total_degree() >= reduced_total);
            }
        }
    }

    #[test]
    fn reduced_shape_is_frozen_at_size_k() {
        let p = params(0.5, 0.25);
        for seed in 0..6 {
            let mut rng = RngStream::new(seed);
            let mut grower = Grower::new(p);
            grower.grow_to(4, &mut rng);
            let at_k = grower.tree().canonical_code();
            for n in [10u32, 25, 60] {
                grower.grow_to(n, &mut rng);
                assert_eq!(reduced_stats(grower.tree(), 4).unwrap().shape, at_k);
            }
        }
    }

    #[test]
    fn spanning_everything_gives_unit_edges() {
        let p = params(0.6, 0.2);
        let mut rng = RngStream::new(9);
        let t = grow(&p, 7, &mut rng);
        let s = reduced_stats(&t, 7).unwrap();
        assert_eq!(s.w_nk, 0);
        assert_eq!(s.w_bar_nk, 0);
        assert_eq!(s.bush_count, 0);
        assert!(s.edge_lengths.iter().all(|&l| l == 1));
        assert_eq!(s.skeleton_length, 7 + s.ell as u64);
    }

    #[test]
    fn binary_models_have_no_black_leaves() {
        // at gamma = alpha the branch-point weight (c - 1)alpha - gamma
        // vanishes for c = 2, so bushes never attach to branch points
        let p = ModelParams::ford(0.5).unwrap();
        let mut rng = RngStream::new(7);
        for _ in 0..3 {
            let t = grow(&p, 300, &mut rng);
            let s = reduced_stats(&t, 4).unwrap();
            assert_eq!(s.w_bar_nk, 0);
            assert_eq!(s.w_nk, 296);
            assert!(s.branch_degrees.iter().all(|&d| d == 3));
        }
    }

    #[test]
    fn rejects_bad_k() {
        let t = grow(&params(0.5, 0.25), 5, &mut RngStream::new(1));
        assert!(reduced_stats(&t, 1).is_err());
        assert!(reduced_stats(&t, 6).is_err());
        assert!(track_reduced(&params(0.5, 0.25), 6, 5, &mut RngStream::new(1)).is_err());
    }

    #[test]
    fn conditional_tracking_hits_the_target() {
        let p = params(0.5, 0.25);
        let mut rng = RngStream::new(3);
        for code in ["(ooo)", "((oo)o)"] {
            let target = TreeShape(code.into());
            let s = track_reduced_conditional(&p, 3, 50, &target, &mut rng).unwrap();
            assert_eq!(s.shape, code);
        }
        // a multifurcating target is unreachable under a binary model
        let ford = ModelParams::ford(0.5).unwrap();
        let err =
            track_reduced_conditional(&ford, 3, 10, &TreeShape("(ooo)".into()), &mut rng);
        assert!(err.is_err());
    }

    #[test]
    fn limit_law_parameters_for_the_cherry() {
        let laws = limit_laws(&params(0.7, 0.3), &TreeShape("(oo)".into())).unwrap();
        assert_eq!((laws.k, laws.ell), (2, 1));
        assert_relative_eq!(laws.w_params.0, 0.9, max_relative = 1e-12);
        assert_relative_eq!(laws.w_params.1, 0.4, max_relative = 1e-12);
        assert!(!laws.w_degenerate);
        assert_eq!(laws.d_params.len(), 3);
        for &a in &laws.d_params {
            assert_relative_eq!(a, 1.0, max_relative = 1e-12);
        }
        assert_eq!(laws.edge_marginal(0).1, laws.d_params[1] + laws.d_params[2]);
        assert_relative_eq!(laws.d_prime_params[0], 1.0 - 3.0 / 7.0, max_relative = 1e-12);
        assert!(!laws.degree_degenerate);
        // E[L] = 4 Gamma(1.9) / Gamma(2.2), E[L^2] = 20 Gamma(1.9) / Gamma(2.5)
        assert_relative_eq!(
            laws.length_moment(1.0),
            4.0 * gamma_fn(1.9) / gamma_fn(2.2),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            laws.length_moment(2.0),
            20.0 * gamma_fn(1.9) / gamma_fn(2.5),
            max_relative = 1e-12
        );
        // degree factor: w_bar = 0.4, w_bar/alpha = 4/7
        let wb = 0.4;
        let r = 0.4 / 0.7;
        assert_relative_eq!(
            laws.degree_moment(1.0),
            gamma_fn(wb + 1.0) * gamma_fn(r + 2.0) / (gamma_fn(r + 1.0) * gamma_fn(wb + 1.7)),
            max_relative = 1e-12
        );
    }

    #[test]
    fn ford_limits_are_degenerate() {
        let laws = limit_laws(&ModelParams::ford(0.5).unwrap(), &TreeShape("(oo)".into())).unwrap();
        assert!(laws.w_degenerate);
        assert!(laws.degree_degenerate);
        assert!(laws.white_cdf(0.999) == 0.0 && laws.white_cdf(1.0) == 1.0);
        // gamma = 0 has no inner-edge growth at all
        assert!(limit_laws(&params(0.5, 0.0), &TreeShape("(oo)".into())).is_err());
    }

    #[test]
    fn branch_weight_identity_on_enumerated_shapes() {
        // (k - 1)alpha - ell*gamma equals the sum of the per-branch-point
        // weights (c_i - 1)alpha - gamma over every shape of up to 6 leaves
        let law = crate::oracle::exact_law(
            &ModelParams::new(
                num_rational::BigRational::new(1.into(), 2.into()),
                num_rational::BigRational::new(1.into(), 4.into()),
            )
            .unwrap(),
            6,
        )
        .unwrap();
        for (alpha, gamma) in [(0.7, 0.3), (0.55, 0.2)] {
            for shape in law.shape_law().keys() {
                let shape = TreeShape(shape.clone());
                let k = shape.n_leaves();
                let ell = shape.n_branch_points();
                let lhs = (k - 1) as f64 * alpha - ell as f64 * gamma;
                let rhs: f64 = shape
                    .child_counts()
                    .iter()
                    .map(|&c| (c - 1) as f64 * alpha - gamma)
                    .sum();
                assert_relative_eq!(lhs, rhs, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn crp_scaling_moment_closed_forms() {
        // (1/2, 1/2): E[S] = sqrt(pi)
        assert_relative_eq!(
            crp_scaling_moment(0.5, 0.5, 1.0),
            std::f64::consts::PI.sqrt(),
            max_relative = 1e-12
        );
        // theta = 0 reduces to Mittag-Leffler moments
        for p in [1.0, 2.0, 3.0] {
            assert_relative_eq!(
                crp_scaling_moment(0.3, 0.0, p),
                gamma_fn(p + 1.0) / gamma_fn(p * 0.3 + 1.0),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn spine_frequencies_of_known_trees() {
        let t = LabelledTree::parse("((1,2),3);").unwrap();
        assert_eq!(spine_frequencies(&t).unwrap(), vec![0.5, 0.5]);
        // subtree {2} is created before subtree {3,4}
        let t = LabelledTree::parse("((1,2),(3,4));").unwrap();
        let f = spine_frequencies(&t).unwrap();
        assert_relative_eq!(f[0], 1.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(f[1], 2.0 / 3.0, max_relative = 1e-12);
        // frequencies always sum to 1
        let t = grow(&params(0.6, 0.2), 50, &mut RngStream::new(4));
        let total: f64 = spine_frequencies(&t).unwrap().iter().sum();
        assert_relative_eq!(total, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn white_fraction_stabilizes_along_growth() {
        // the white fraction is an urn proportion; between sizes 10^4 and
        // 10^5 it should barely move in almost every replicate
        let p = params(0.7, 0.3);
        let mut close = 0;
        let reps = 20;
        for r in 0..reps {
            let mut rng = RngStream::replicate(99, r);
            let mut grower = Grower::new(p);
            grower.grow_to(10_000, &mut rng);
            let early = reduced_stats(grower.tree(), 2).unwrap().white_fraction();
            grower.grow_to(100_000, &mut rng);
            let late = reduced_stats(grower.tree(), 2).unwrap().white_fraction();
            if (early - late).abs() < 0.02 {
                close += 1;
            }
        }
        assert!(close >= reps * 9 / 10, "only {close}/{reps} replicates stayed within 0.02");
    }

    #[test]
    fn mc_crp_report_passes_and_is_thread_invariant() {
        let cfg = CrpMcConfig { alpha: 0.5, theta: 0.5, n: 2000, replicates: 200, seed: 11 };
        let r1 = run_mc_crp(&cfg, Some(2)).unwrap();
        let r2 = run_mc_crp(&cfg, Some(1)).unwrap();
        assert_eq!(
            serde_json::to_string(&r1).unwrap(),
            serde_json::to_string(&r2).unwrap()
        );
        assert_eq!(r1.statistics.len(), 3);
        assert!(r1.pass, "{:#?}", r1.statistics);
    }

    #[test]
    fn mc_reduced_report_small() {
        let cfg = ReducedMcConfig {
            alpha: 0.7,
            gamma: 0.3,
            k: 2,
            n: 10_000,
            replicates: 100,
            seed: 5,
            target_shape: None,
        };
        let r = run_mc_reduced(&cfg, Some(2)).unwrap();
        let names: Vec<&str> = r.statistics.iter().map(|s| s.name.as_str()).collect();
        assert!(names.contains(&"white_fraction.ks"));
        assert!(names.contains(&"edge_proportion_3.ks"));
        assert!(names.contains(&"length_scaled.moment1"));
        assert!(names.contains(&"degree_scaled.moment1"));
        assert!(names.contains(&"independence.white_length_correlation"));
        assert!(r.pass, "{:#?}", r.statistics);
    }

    #[test]
    fn mc_reduced_ford_degenerate_rows() {
        let cfg = ReducedMcConfig {
            alpha: 0.5,
            gamma: 0.5,
            k: 2,
            n: 400,
            replicates: 60,
            seed: 8,
            target_shape: None,
        };
        let r = run_mc_reduced(&cfg, Some(2)).unwrap();
        let white = r.statistics.iter().find(|s| s.name == "white_fraction.mean").unwrap();
        assert!(white.pass);
        let deg = r
            .statistics
            .iter()
            .find(|s| s.name == "degree_scaled.degenerate_blacks")
            .unwrap();
        assert_eq!(deg.estimate, 0.0);
        assert!(r.pass, "{:#?}", r.statistics);
        // reports do not depend on the number of worker threads
        let r2 = run_mc_reduced(&cfg, Some(3)).unwrap();
        assert_eq!(
            serde_json::to_string(&r.statistics).unwrap(),
            serde_json::to_string(&r2.statistics).unwrap()
        );
    }

    #[test]
    fn mc_reduced_requires_target_for_larger_k() {
        let cfg = ReducedMcConfig {
            alpha: 0.5,
            gamma: 0.25,
            k: 3,
            n: 100,
            replicates: 10,
            seed: 1,
            target_shape: None,
        };
        assert!(run_mc_reduced(&cfg, None).is_err());
        let bad = ReducedMcConfig { target_shape: Some("((oo)".into()), ..cfg.clone() };
        assert!(run_mc_reduced(&bad, None).is_err());
        let ok = ReducedMcConfig {
            target_shape: Some("(ooo)".into()),
            replicates: 40,
            ..cfg
        };
        let r = run_mc_reduced(&ok, Some(2)).unwrap();
        assert_eq!(r.statistics.iter().filter(|s| s.name.starts_with("edge_")).count(), 4);
    }

    #[test]
    fn mc_spine_report() {
        let cfg = SpineMcConfig {
            alpha: 0.6,
            gamma: 0.2,
            n: 800,
            replicates: 120,
            seed: 5,
            compare_gamma: Some(0.5),
        };
        let r = run_mc_spine(&cfg, Some(2)).unwrap();
        assert_eq!(r.statistics.len(), 2);
        assert!(r.pass, "{:#?}", r.statistics);
    }
}
