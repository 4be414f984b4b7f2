//! Rooted trees with labelled leaves.
//!
//! Trees live in an arena (`Vec` of nodes). The root is an auxiliary
//! degree-one vertex with a single child, so the edge above the top branch
//! point is a real edge that growth can split. Unlabelled internal vertices
//! have at least two children; leaves carry the labels `1..=n`. Each node
//! stores the integer length of the edge above it (always 1 for grown trees;
//! reduced subtrees accumulate path lengths there).
//!
//! Text format: a leaf is its decimal label, an internal vertex is a
//! parenthesised comma-list of two or more children, any vertex may be
//! followed by `:len`, and the tree ends with `;` — e.g. `((1,2):2,3);`.
//! Canonical shape codes use the alphabet `o ( )` with children sorted
//! lexicographically, so `((1,2),3)` has code `((oo)o)`.

use crate::{Error, Result};

pub type NodeId = usize;

#[derive(Clone, Debug)]
pub struct Node {
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    /// Leaf label (`1..=n`); `None` on internal vertices and the root.
    pub label: Option<u32>,
    /// Length of the edge above this node; unused on the root.
    pub edge_len: u32,
}

#[derive(Clone, Debug)]
pub struct LabelledTree {
    nodes: Vec<Node>,
    root: NodeId,
    /// `leaf_node[l - 1]` is the arena id of the leaf labelled `l`.
    leaf_node: Vec<NodeId>,
}

/// Block sizes sorted in decreasing order.
pub fn sorted_desc(parts: &[u32]) -> Vec<u32> {
    let mut v = parts.to_vec();
    v.sort_unstable_by(|a, b| b.cmp(a));
    v
}

/// Delabelled tree shape, represented by its canonical code.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TreeShape(pub String);

impl std::fmt::Display for TreeShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl TreeShape {
    pub fn n_leaves(&self) -> u32 {
        self.0.bytes().filter(|&b| b == b'o').count() as u32
    }

    /// Number of branch points (internal vertices).
    pub fn n_branch_points(&self) -> u32 {
        self.0.bytes().filter(|&b| b == b'(').count() as u32
    }

    /// Child counts of the branch points, in code order.
    pub fn child_counts(&self) -> Vec<u32> {
        let mut counts = Vec::new();
        let mut stack: Vec<u32> = Vec::new();
        let mut order: Vec<usize> = Vec::new(); // index into counts per open paren
        for b in self.0.bytes() {
            match b {
                b'(' => {
                    if let Some(top) = stack.last_mut() {
                        *top += 1;
                    }
                    stack.push(0);
                    order.push(counts.len());
                    counts.push(0);
                }
                b'o' => {
                    if let Some(top) = stack.last_mut() {
                        *top += 1;
                    }
                }
                b')' => {
                    let c = stack.pop().expect("balanced code");
                    let idx = order.pop().expect("balanced code");
                    counts[idx] = c;
                }
                _ => {}
            }
        }
        counts
    }
}

impl LabelledTree {
    /// The one-leaf tree: root joined to leaf 1.
    pub fn single_leaf() -> Self {
        let nodes = vec![
            Node { parent: None, children: vec![1], label: None, edge_len: 0 },
            Node { parent: Some(0), children: vec![], label: Some(1), edge_len: 1 },
        ];
        LabelledTree { nodes, root: 0, leaf_node: vec![1] }
    }

    /// The two-leaf tree: root, one branch point, leaves 1 and 2.
    pub fn cherry() -> Self {
        let nodes = vec![
            Node { parent: None, children: vec![1], label: None, edge_len: 0 },
            Node { parent: Some(0), children: vec![2, 3], label: None, edge_len: 1 },
            Node { parent: Some(1), children: vec![], label: Some(1), edge_len: 1 },
            Node { parent: Some(1), children: vec![], label: Some(2), edge_len: 1 },
        ];
        LabelledTree { nodes, root: 0, leaf_node: vec![2, 3] }
    }

    pub fn n_leaves(&self) -> u32 {
        self.leaf_node.len() as u32
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_leaf(&self, id: NodeId) -> bool {
        self.nodes[id].label.is_some()
    }

    pub fn leaf_id(&self, label: u32) -> NodeId {
        self.leaf_node[(label - 1) as usize]
    }

    /// Internal vertices (branch points), i.e. non-root nodes with children.
    pub fn branch_points(&self) -> Vec<NodeId> {
        (0..self.nodes.len())
            .filter(|&id| id != self.root && !self.nodes[id].children.is_empty())
            .collect()
    }

    /// Splits the edge above `child` with a fresh internal vertex and returns
    /// its id. Both halves of the split edge get length 1 (grown trees are
    /// unit-length).
    pub fn split_edge_above(&mut self, child: NodeId) -> NodeId {
        let parent = self.nodes[child].parent.expect("cannot split above the root");
        let b = self.nodes.len();
        self.nodes.push(Node { parent: Some(parent), children: vec![child], label: None, edge_len: 1 });
        let slot = self.nodes[parent]
            .children
            .iter()
            .position(|&c| c == child)
            .expect("parent/child link consistent");
        self.nodes[parent].children[slot] = b;
        self.nodes[child].parent = Some(b);
        self.nodes[child].edge_len = 1;
        b
    }

    /// Attaches a fresh leaf labelled `n + 1` below `v` and returns its id.
    pub fn add_leaf_child(&mut self, v: NodeId) -> NodeId {
        let label = self.n_leaves() + 1;
        let leaf = self.nodes.len();
        self.nodes.push(Node { parent: Some(v), children: vec![], label: Some(label), edge_len: 1 });
        self.nodes[v].children.push(leaf);
        self.leaf_node.push(leaf);
        leaf
    }

    /// Structural sanity: single root of degree one, no internal vertex of
    /// degree two, labels `1..=n` bijective, links consistent.
    pub fn validate(&self) -> Result<()> {
        let n = self.leaf_node.len();
        if self.nodes[self.root].parent.is_some() {
            return Err(Error::Domain("root must have no parent".into()));
        }
        if self.nodes[self.root].children.len() != 1 {
            return Err(Error::Domain("root must have exactly one child".into()));
        }
        let mut seen_labels = vec![false; n];
        let mut visited = 0usize;
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            visited += 1;
            let node = &self.nodes[id];
            for &c in &node.children {
                if self.nodes[c].parent != Some(id) {
                    return Err(Error::Domain(format!("broken parent link at node {c}")));
                }
                if self.nodes[c].edge_len == 0 {
                    return Err(Error::Domain(format!("zero-length edge above node {c}")));
                }
                stack.push(c);
            }
            match node.label {
                Some(l) => {
                    if !node.children.is_empty() {
                        return Err(Error::Domain(format!("labelled internal node {id}")));
                    }
                    let idx = (l as usize).wrapping_sub(1);
                    if idx >= n || seen_labels[idx] || self.leaf_node[idx] != id {
                        return Err(Error::Domain(format!("bad leaf label {l}")));
                    }
                    seen_labels[idx] = true;
                }
                None => {
                    if id != self.root && node.children.len() < 2 {
                        return Err(Error::Domain(format!("internal node {id} of degree two")));
                    }
                }
            }
        }
        if visited != self.nodes.len() {
            return Err(Error::Domain("arena contains unreachable nodes".into()));
        }
        if !seen_labels.iter().all(|&s| s) {
            return Err(Error::Domain("leaf labels are not 1..=n".into()));
        }
        Ok(())
    }

    /// Number of leaves in the subtree below `id` (inclusive if `id` is a leaf).
    pub fn leaf_count_below(&self, id: NodeId) -> u32 {
        let mut count = 0;
        let mut stack = vec![id];
        while let Some(v) = stack.pop() {
            if self.nodes[v].label.is_some() {
                count += 1;
            }
            stack.extend_from_slice(&self.nodes[v].children);
        }
        count
    }

    /// Smallest leaf label in the subtree below `id`.
    pub fn min_label_below(&self, id: NodeId) -> u32 {
        let mut min = u32::MAX;
        let mut stack = vec![id];
        while let Some(v) = stack.pop() {
            if let Some(l) = self.nodes[v].label {
                min = min.min(l);
            }
            stack.extend_from_slice(&self.nodes[v].children);
        }
        min
    }

    /// Leaf counts of the subtrees at the first branch point, decreasing.
    pub fn first_split(&self) -> Result<Vec<u32>> {
        if self.n_leaves() < 2 {
            return Err(Error::Domain("first_split needs at least two leaves".into()));
        }
        let top = self.nodes[self.root].children[0];
        let mut parts: Vec<u32> =
            self.nodes[top].children.iter().map(|&c| self.leaf_count_below(c)).collect();
        parts.sort_unstable_by(|a, b| b.cmp(a));
        Ok(parts)
    }

    fn code_below(&self, id: NodeId) -> String {
        if self.nodes[id].label.is_some() {
            return "o".into();
        }
        let mut parts: Vec<String> =
            self.nodes[id].children.iter().map(|&c| self.code_below(c)).collect();
        parts.sort_unstable();
        format!("({})", parts.concat())
    }

    /// Canonical shape code over `{o, (, )}`; label- and order-independent.
    pub fn canonical_code(&self) -> String {
        self.code_below(self.nodes[self.root].children[0])
    }

    pub fn shape(&self) -> TreeShape {
        TreeShape(self.canonical_code())
    }

    fn labelled_below(&self, id: NodeId, with_lengths: bool, out: &mut String) {
        if let Some(l) = self.nodes[id].label {
            out.push_str(&l.to_string());
        } else {
            let mut kids: Vec<NodeId> = self.nodes[id].children.clone();
            kids.sort_by_key(|&c| self.min_label_below(c));
            out.push('(');
            for (i, c) in kids.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                self.labelled_below(*c, with_lengths, out);
                if with_lengths && self.nodes[*c].edge_len != 1 {
                    out.push(':');
                    out.push_str(&self.nodes[*c].edge_len.to_string());
                }
            }
            out.push(')');
        }
    }

    /// Canonical labelled form without lengths, e.g. `((1,2),3)`. Two trees
    /// are equal as labelled trees iff their keys match.
    pub fn labelled_key(&self) -> String {
        let mut out = String::new();
        self.labelled_below(self.nodes[self.root].children[0], false, &mut out);
        out
    }

    /// Text form, `;`-terminated, children in min-label order; `:len`
    /// annotations appear only on edges of length != 1.
    pub fn serialize(&self) -> String {
        let top = self.nodes[self.root].children[0];
        let mut out = String::new();
        self.labelled_below(top, true, &mut out);
        if self.nodes[top].edge_len != 1 {
            out.push(':');
            out.push_str(&self.nodes[top].edge_len.to_string());
        }
        out.push(';');
        out
    }

    /// Parse the text format. Lengths default to 1 when omitted.
    pub fn parse(text: &str) -> Result<LabelledTree> {
        let text = text.trim();
        let body = text
            .strip_suffix(';')
            .ok_or_else(|| Error::Parse("tree text must end with ';'".into()))?;
        let mut nodes = vec![Node { parent: None, children: vec![], label: None, edge_len: 0 }];
        let mut labels: Vec<(u32, NodeId)> = Vec::new();
        let bytes = body.as_bytes();
        let mut pos = 0usize;

        fn parse_node(
            bytes: &[u8],
            pos: &mut usize,
            parent: NodeId,
            nodes: &mut Vec<Node>,
            labels: &mut Vec<(u32, NodeId)>,
        ) -> Result<NodeId> {
            if *pos >= bytes.len() {
                return Err(Error::Parse("unexpected end of tree text".into()));
            }
            if bytes[*pos] == b'(' {
                *pos += 1;
                let id = nodes.len();
                nodes.push(Node { parent: Some(parent), children: vec![], label: None, edge_len: 1 });
                loop {
                    let child = parse_node(bytes, pos, id, nodes, labels)?;
                    let len = parse_len(bytes, pos)?;
                    nodes[child].edge_len = len;
                    nodes[id].children.push(child);
                    match bytes.get(*pos) {
                        Some(b',') => *pos += 1,
                        Some(b')') => {
                            *pos += 1;
                            break;
                        }
                        _ => return Err(Error::Parse("expected ',' or ')'".into())),
                    }
                }
                if nodes[id].children.len() < 2 {
                    return Err(Error::Parse("internal vertex needs >= 2 children".into()));
                }
                Ok(id)
            } else if bytes[*pos].is_ascii_digit() {
                let start = *pos;
                while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
                    *pos += 1;
                }
                let label: u32 = std::str::from_utf8(&bytes[start..*pos])
                    .unwrap()
                    .parse()
                    .map_err(|_| Error::Parse("leaf label out of range".into()))?;
                if label == 0 {
                    return Err(Error::Parse("leaf labels start at 1".into()));
                }
                let id = nodes.len();
                nodes.push(Node {
                    parent: Some(parent),
                    children: vec![],
                    label: Some(label),
                    edge_len: 1,
                });
                labels.push((label, id));
                Ok(id)
            } else {
                Err(Error::Parse(format!("unexpected character {:?}", bytes[*pos] as char)))
            }
        }

        fn parse_len(bytes: &[u8], pos: &mut usize) -> Result<u32> {
            if bytes.get(*pos) != Some(&b':') {
                return Ok(1);
            }
            *pos += 1;
            let start = *pos;
            while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
                *pos += 1;
            }
            if start == *pos {
                return Err(Error::Parse("expected length after ':'".into()));
            }
            let len: u32 = std::str::from_utf8(&bytes[start..*pos])
                .unwrap()
                .parse()
                .map_err(|_| Error::Parse("edge length out of range".into()))?;
            if len == 0 {
                return Err(Error::Parse("edge lengths are positive".into()));
            }
            Ok(len)
        }

        let top = parse_node(bytes, &mut pos, 0, &mut nodes, &mut labels)?;
        let top_len = parse_len(bytes, &mut pos)?;
        nodes[top].edge_len = top_len;
        nodes[0].children.push(top);
        if pos != bytes.len() {
            return Err(Error::Parse("trailing characters after tree".into()));
        }

        labels.sort_unstable();
        let n = labels.len();
        let mut leaf_node = vec![usize::MAX; n];
        for (expect, &(label, id)) in labels.iter().enumerate() {
            if label as usize != expect + 1 {
                return Err(Error::Parse("leaf labels must be exactly 1..=n".into()));
            }
            leaf_node[expect] = id;
        }
        let tree = LabelledTree { nodes, root: 0, leaf_node };
        tree.validate()?;
        Ok(tree)
    }

    /// Relabel leaves: the leaf labelled `l` becomes `perm[l - 1]`.
    pub fn permute_labels(&self, perm: &[u32]) -> Result<LabelledTree> {
        let n = self.n_leaves() as usize;
        if perm.len() != n {
            return Err(Error::Domain("permutation length mismatch".into()));
        }
        let mut check = perm.to_vec();
        check.sort_unstable();
        if check != (1..=n as u32).collect::<Vec<_>>() {
            return Err(Error::Domain("not a permutation of 1..=n".into()));
        }
        let mut out = self.clone();
        let mut leaf_node = vec![usize::MAX; n];
        for old in 1..=n as u32 {
            let id = self.leaf_node[(old - 1) as usize];
            let new = perm[(old - 1) as usize];
            out.nodes[id].label = Some(new);
            leaf_node[(new - 1) as usize] = id;
        }
        out.leaf_node = leaf_node;
        Ok(out)
    }

    /// Rebuild the arena from the root so ids are dense and reachable.
    fn compact(&self) -> LabelledTree {
        let n = self.leaf_node.len();
        let mut nodes = Vec::with_capacity(self.nodes.len());
        let mut leaf_node = vec![usize::MAX; n];
        fn copy(
            src: &LabelledTree,
            id: NodeId,
            parent: Option<NodeId>,
            nodes: &mut Vec<Node>,
            leaf_node: &mut [NodeId],
        ) -> NodeId {
            let new_id = nodes.len();
            nodes.push(Node {
                parent,
                children: vec![],
                label: src.nodes[id].label,
                edge_len: src.nodes[id].edge_len,
            });
            if let Some(l) = src.nodes[id].label {
                leaf_node[(l - 1) as usize] = new_id;
            }
            for &c in &src.nodes[id].children {
                let nc = copy(src, c, Some(new_id), nodes, leaf_node);
                nodes[new_id].children.push(nc);
            }
            new_id
        }
        copy(self, self.root, None, &mut nodes, &mut leaf_node);
        LabelledTree { nodes, root: 0, leaf_node }
    }

    /// Delete the leaf with this label, suppress any degree-two vertex the
    /// deletion creates (edge lengths add), and shift higher labels down by
    /// one so the result is labelled `1..=n-1`.
    pub fn remove_leaf(&self, label: u32) -> Result<LabelledTree> {
        let n = self.n_leaves();
        if n < 2 {
            return Err(Error::Domain("cannot remove a leaf from the one-leaf tree".into()));
        }
        if label == 0 || label > n {
            return Err(Error::Domain(format!("no leaf labelled {label}")));
        }
        let mut t = self.clone();
        let lf = t.leaf_node[(label - 1) as usize];
        let p = t.nodes[lf].parent.expect("leaves have parents");
        t.nodes[p].children.retain(|&c| c != lf);
        if t.nodes[p].children.len() == 1 && p != t.root {
            // splice out the now-degree-two vertex
            let c = t.nodes[p].children[0];
            let gp = t.nodes[p].parent.expect("non-root has a parent");
            let slot = t.nodes[gp].children.iter().position(|&x| x == p).unwrap();
            t.nodes[gp].children[slot] = c;
            t.nodes[c].parent = Some(gp);
            t.nodes[c].edge_len += t.nodes[p].edge_len;
        }
        // relabel and drop the deleted leaf from the index
        for l in (label + 1)..=n {
            let id = t.leaf_node[(l - 1) as usize];
            t.nodes[id].label = Some(l - 1);
        }
        t.leaf_node.remove((label - 1) as usize);
        let out = t.compact();
        out.validate()?;
        Ok(out)
    }

    /// Reduced subtree spanned by the root and leaves `1..=k`: degree-two
    /// vertices are suppressed and each reduced edge records the total graph
    /// distance it spans in `self`.
    pub fn reduced_subtree(&self, k: u32) -> Result<LabelledTree> {
        let n = self.n_leaves();
        if k < 1 || k > n {
            return Err(Error::Domain(format!("reduced_subtree needs 1 <= k <= {n}")));
        }
        let mut marked = vec![false; self.nodes.len()];
        for l in 1..=k {
            let mut cur = Some(self.leaf_id(l));
            while let Some(id) = cur {
                if marked[id] {
                    break;
                }
                marked[id] = true;
                cur = self.nodes[id].parent;
            }
        }
        let mut nodes = vec![Node { parent: None, children: vec![], label: None, edge_len: 0 }];
        let mut leaf_node = vec![usize::MAX; k as usize];

        // descend from `old`, accumulating suppressed edge length, and attach
        // the next surviving vertex under `new_parent`
        fn build(
            src: &LabelledTree,
            marked: &[bool],
            mut old: NodeId,
            mut acc: u32,
            new_parent: NodeId,
            nodes: &mut Vec<Node>,
            leaf_node: &mut [NodeId],
        ) {
            loop {
                let marked_children: Vec<NodeId> = src.nodes[old]
                    .children
                    .iter()
                    .copied()
                    .filter(|&c| marked[c])
                    .collect();
                if src.nodes[old].label.is_some() || marked_children.len() >= 2 {
                    let id = nodes.len();
                    nodes.push(Node {
                        parent: Some(new_parent),
                        children: vec![],
                        label: src.nodes[old].label,
                        edge_len: acc,
                    });
                    nodes[new_parent].children.push(id);
                    if let Some(l) = src.nodes[old].label {
                        leaf_node[(l - 1) as usize] = id;
                    }
                    for c in marked_children {
                        build(src, marked, c, src.nodes[c].edge_len, id, nodes, leaf_node);
                    }
                    return;
                }
                // exactly one marked child: suppress this vertex
                let c = marked_children[0];
                acc += src.nodes[c].edge_len;
                old = c;
            }
        }

        let top = self.nodes[self.root].children[0];
        build(self, &marked, top, self.nodes[top].edge_len, 0, &mut nodes, &mut leaf_node);
        let out = LabelledTree { nodes, root: 0, leaf_node };
        out.validate()?;
        Ok(out)
    }

    /// Decomposition along the spine from the root to leaf 1; bushes in
    /// root-to-leaf order (the first bush sits at the branch point adjacent
    /// to the root).
    pub fn spinal_decomposition(&self) -> Result<SpinalDecomposition> {
        if self.n_leaves() < 2 {
            return Err(Error::Domain("spinal decomposition needs n >= 2".into()));
        }
        // path root -> leaf 1
        let mut path = vec![self.leaf_id(1)];
        while let Some(p) = self.nodes[*path.last().unwrap()].parent {
            path.push(p);
        }
        path.reverse(); // root ... leaf 1
        let on_path: std::collections::HashSet<NodeId> = path.iter().copied().collect();
        let mut bushes = Vec::new();
        for &v in &path[1..path.len() - 1] {
            let mut subtrees = Vec::new();
            for &c in &self.nodes[v].children {
                if !on_path.contains(&c) {
                    subtrees.push(SpinalSubtree {
                        size: self.leaf_count_below(c),
                        min_label: self.min_label_below(c),
                    });
                }
            }
            bushes.push(SpinalBush { subtrees });
        }
        Ok(SpinalDecomposition { bushes })
    }
}

/// One subtree hanging off a spine vertex.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpinalSubtree {
    pub size: u32,
    pub min_label: u32,
}

/// All subtrees at one spine vertex.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpinalBush {
    pub subtrees: Vec<SpinalSubtree>,
}

impl SpinalBush {
    pub fn size(&self) -> u32 {
        self.subtrees.iter().map(|s| s.size).sum()
    }

    /// Subtree sizes, decreasing.
    pub fn sorted_parts(&self) -> Vec<u32> {
        sorted_desc(&self.subtrees.iter().map(|s| s.size).collect::<Vec<_>>())
    }
}

/// Spinal decomposition of a tree: bushes along the root-to-leaf-1 spine.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpinalDecomposition {
    /// Root-end bush first.
    pub bushes: Vec<SpinalBush>,
}

impl SpinalDecomposition {
    /// Bush sizes in spine order (a composition of `n - 1`).
    pub fn composition(&self) -> Vec<u32> {
        self.bushes.iter().map(|b| b.size()).collect()
    }

    /// Sizes of all subtrees across bushes, in creation order (a subtree is
    /// created by its smallest leaf, so creation order = min-label order).
    pub fn subtree_sizes_in_creation_order(&self) -> Vec<u32> {
        let mut all: Vec<&SpinalSubtree> =
            self.bushes.iter().flat_map(|b| b.subtrees.iter()).collect();
        all.sort_by_key(|s| s.min_label);
        all.iter().map(|s| s.size).collect()
    }
}
