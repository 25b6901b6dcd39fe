//! Concept hierarchy: a DAG of concepts linked by sub→super edges.
//!
//! The DAG is immutable after construction. Loading validates the structure
//! (unique ids, known edge endpoints, acyclicity), detects roots and orphans,
//! and precomputes per-concept path statistics: counts and length
//! distributions of all upward paths (to roots) and downward paths (to
//! leaves), plus the normalized root-distance / leaf-separation pair used by
//! concept scoring. Multiple inheritance is path-sensitive throughout: a
//! concept reaching one leaf along two routes counts two downward paths.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use thiserror::Error;

/// Opaque concept identifier, unique within a taxonomy.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConceptId(String);

impl ConceptId {
    /// Panics on an empty id; identifiers come from validated input.
    pub fn new(id: impl Into<String>) -> Self {
        let id = id.into();
        assert!(!id.is_empty(), "concept id must be non-empty");
        ConceptId(id)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ConceptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ConceptId {
    fn from(s: &str) -> Self {
        ConceptId::new(s)
    }
}

#[derive(Debug, Clone)]
pub struct ConceptNode {
    pub id: ConceptId,
    pub headword: Option<String>,
    pub gloss: Option<String>,
}

impl ConceptNode {
    pub fn new(
        id: impl Into<String>,
        headword: Option<String>,
        gloss: Option<String>,
    ) -> Self {
        ConceptNode { id: ConceptId::new(id), headword, gloss }
    }

    /// Anonymous concepts carry neither headword nor gloss. They stay in the
    /// hierarchy for connectivity but are never reported to users.
    pub fn is_anonymous(&self) -> bool {
        self.headword.is_none() && self.gloss.is_none()
    }
}

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("duplicate concept id {0}")]
    DuplicateId(ConceptId),
    #[error("edge references unknown concept id {0}")]
    UnknownEdgeId(ConceptId),
    #[error("hierarchy contains a cycle: {0}")]
    Cycle(String),
    #[error("unknown concept id {0}")]
    UnknownId(ConceptId),
    #[error("concept {0} is an orphan (not linked to any other concept)")]
    Orphan(ConceptId),
    #[error("path count overflow at concept {0}")]
    PathCountOverflow(ConceptId),
}

/// Per-concept path statistics over the full hierarchy.
///
/// `root_distance` is the mean of `L/(L+l)` over the cross product of all
/// upward path lengths `L` and downward path lengths `l`; `leaf_separation`
/// is the mean of `l/(L+l)` over the same pairs. The two always sum to 1.
/// A leaf has `leaf_separation` 0, a root has 1.
#[derive(Debug, Clone)]
pub struct PathStats {
    pub concept: ConceptId,
    /// Number of distinct upward paths to any root.
    pub n_up: u64,
    /// Number of distinct downward paths to leaves (1 for a leaf itself).
    pub n_down: u64,
    /// Upward path length distribution: edge count → number of paths.
    pub up_lengths: BTreeMap<u32, u64>,
    /// Downward path length distribution: edge count → number of paths.
    pub down_lengths: BTreeMap<u32, u64>,
    /// Normalized distance from the roots, in [0,1]; 0 at a root.
    pub root_distance: f64,
    /// Normalized separation from the covered leaves, in [0,1]; 0 at a leaf.
    pub leaf_separation: f64,
}

/// For every concept, one `(leaf, edge_count)` record per distinct downward
/// path. Multiple inheritance yields repeated records for the same leaf.
#[derive(Debug, Clone)]
pub struct LeafDistanceTable {
    per_concept: BTreeMap<ConceptId, Vec<(ConceptId, u32)>>,
}

impl LeafDistanceTable {
    pub fn paths(&self, id: &ConceptId) -> Option<&[(ConceptId, u32)]> {
        self.per_concept.get(id).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ConceptId, &[(ConceptId, u32)])> {
        self.per_concept.iter().map(|(k, v)| (k, v.as_slice()))
    }
}

#[derive(Debug)]
pub struct ConceptDag {
    nodes: Vec<ConceptNode>,
    index: HashMap<String, usize>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    roots: Vec<usize>,
    orphans: Vec<usize>,
    /// Topological order, every parent before its children.
    topo: Vec<usize>,
    max_depth: u32,
    stats: Vec<Option<PathStats>>,
}

impl ConceptDag {
    /// Builds and validates a hierarchy from nodes and `(sub, super)` edges.
    /// Duplicate edges are collapsed; a repeated edge would otherwise double
    /// every path count through it.
    pub fn from_parts(
        nodes: Vec<ConceptNode>,
        edges: Vec<(ConceptId, ConceptId)>,
    ) -> Result<Self, TaxonomyError> {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, node) in nodes.iter().enumerate() {
            if index.insert(node.id.as_str().to_owned(), i).is_some() {
                return Err(TaxonomyError::DuplicateId(node.id.clone()));
            }
        }

        let mut edge_set = BTreeSet::new();
        for (sub, sup) in &edges {
            let s = *index
                .get(sub.as_str())
                .ok_or_else(|| TaxonomyError::UnknownEdgeId(sub.clone()))?;
            let p = *index
                .get(sup.as_str())
                .ok_or_else(|| TaxonomyError::UnknownEdgeId(sup.clone()))?;
            edge_set.insert((s, p));
        }

        let n = nodes.len();
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        for &(sub, sup) in &edge_set {
            parents[sub].push(sup);
            children[sup].push(sub);
        }

        let topo = toposort(&nodes, &parents, &children)?;
        let roots: Vec<usize> = (0..n).filter(|&v| parents[v].is_empty()).collect();
        let orphans: Vec<usize> = (0..n)
            .filter(|&v| parents[v].is_empty() && children[v].is_empty())
            .collect();

        let mut dag = ConceptDag {
            nodes,
            index,
            parents,
            children,
            roots,
            orphans,
            topo,
            max_depth: 0,
            stats: Vec::new(),
        };
        dag.max_depth = dag.compute_max_depth();
        dag.stats = dag.compute_all_stats()?;
        Ok(dag)
    }

    /// Parses the line-oriented taxonomy format:
    ///
    /// ```text
    /// N<TAB>id[<TAB>headword[<TAB>gloss]]
    /// E<TAB>sub_id<TAB>super_id
    /// ```
    ///
    /// Empty headword/gloss fields mean "absent". Blank lines and lines
    /// starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self, TaxonomyError> {
        let mut nodes = Vec::new();
        let mut edges = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            if raw.trim().is_empty() || raw.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = raw.split('\t').collect();
            let parse_err = |msg: String| TaxonomyError::Parse { line, msg };
            match fields[0] {
                "N" => {
                    if fields.len() < 2 || fields.len() > 4 {
                        return Err(parse_err(format!(
                            "node record needs 2-4 fields, got {}",
                            fields.len()
                        )));
                    }
                    if fields[1].is_empty() {
                        return Err(parse_err("empty concept id".into()));
                    }
                    let opt = |i: usize| {
                        fields.get(i).filter(|s| !s.is_empty()).map(|s| s.to_string())
                    };
                    nodes.push(ConceptNode::new(fields[1], opt(2), opt(3)));
                }
                "E" => {
                    if fields.len() != 3 {
                        return Err(parse_err(format!(
                            "edge record needs 3 fields, got {}",
                            fields.len()
                        )));
                    }
                    if fields[1].is_empty() || fields[2].is_empty() {
                        return Err(parse_err("empty concept id in edge".into()));
                    }
                    edges.push((ConceptId::new(fields[1]), ConceptId::new(fields[2])));
                }
                tag => {
                    return Err(parse_err(format!("unknown record tag {tag:?}")));
                }
            }
        }
        ConceptDag::from_parts(nodes, edges)
    }

    /// Serializes back to the `parse` format, nodes then edges, in stable
    /// order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for node in &self.nodes {
            out.push_str("N\t");
            out.push_str(node.id.as_str());
            let head = node.headword.as_deref().unwrap_or("");
            let gloss = node.gloss.as_deref().unwrap_or("");
            if !head.is_empty() || !gloss.is_empty() {
                out.push('\t');
                out.push_str(head);
            }
            if !gloss.is_empty() {
                out.push('\t');
                out.push_str(gloss);
            }
            out.push('\n');
        }
        for (sub, subs_parents) in self.parents.iter().enumerate() {
            for &sup in subs_parents {
                out.push_str("E\t");
                out.push_str(self.nodes[sub].id.as_str());
                out.push('\t');
                out.push_str(self.nodes[sup].id.as_str());
                out.push('\n');
            }
        }
        out
    }

    // ---- basic accessors ----

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, id: &ConceptId) -> bool {
        self.index.contains_key(id.as_str())
    }

    pub fn node(&self, id: &ConceptId) -> Option<&ConceptNode> {
        self.index.get(id.as_str()).map(|&i| &self.nodes[i])
    }

    pub fn ids(&self) -> impl Iterator<Item = &ConceptId> {
        self.nodes.iter().map(|n| &n.id)
    }

    pub fn roots(&self) -> Vec<&ConceptId> {
        self.roots.iter().map(|&i| &self.nodes[i].id).collect()
    }

    /// Orphans are isolated nodes: no parents and no children. They are kept
    /// in the DAG but excluded from path statistics and similarity.
    pub fn orphans(&self) -> Vec<&ConceptId> {
        self.orphans.iter().map(|&i| &self.nodes[i].id).collect()
    }

    pub fn is_orphan(&self, id: &ConceptId) -> Result<bool, TaxonomyError> {
        let i = self.require(id)?;
        Ok(self.parents[i].is_empty() && self.children[i].is_empty())
    }

    /// Node count of the longest root-to-leaf path (≥ 1 on a non-empty DAG).
    pub fn max_depth(&self) -> u32 {
        self.max_depth
    }

    // ---- path statistics ----

    /// Number of distinct downward paths from `id` to leaves; 1 for a leaf.
    pub fn leaf_path_count(&self, id: &ConceptId) -> Result<u64, TaxonomyError> {
        let i = self.require(id)?;
        // n_down is present even for orphans (an isolated node is its own
        // leaf), so recompute from the children lists rather than stats.
        let mut memo = vec![None; self.nodes.len()];
        self.down_paths(i, &mut memo)
    }

    fn down_paths(
        &self,
        v: usize,
        memo: &mut Vec<Option<u64>>,
    ) -> Result<u64, TaxonomyError> {
        if let Some(c) = memo[v] {
            return Ok(c);
        }
        let count = if self.children[v].is_empty() {
            1
        } else {
            let mut sum: u64 = 0;
            for &ch in &self.children[v] {
                let c = self.down_paths(ch, memo)?;
                sum = sum
                    .checked_add(c)
                    .ok_or_else(|| TaxonomyError::PathCountOverflow(self.nodes[v].id.clone()))?;
            }
            sum
        };
        memo[v] = Some(count);
        Ok(count)
    }

    /// Precomputed statistics; orphans have none (no usable paths).
    pub fn path_stats(&self, id: &ConceptId) -> Result<&PathStats, TaxonomyError> {
        let i = self.require(id)?;
        self.stats[i]
            .as_ref()
            .ok_or_else(|| TaxonomyError::Orphan(self.nodes[i].id.clone()))
    }

    /// Builds the full concept → leaf distance table by path enumeration.
    pub fn leaf_distances(&self) -> LeafDistanceTable {
        let n = self.nodes.len();
        let mut memo: Vec<Option<Vec<(usize, u32)>>> = vec![None; n];
        // Reverse topological order: children are resolved before parents.
        for &v in self.topo.iter().rev() {
            let recs = if self.children[v].is_empty() {
                vec![(v, 0)]
            } else {
                let mut recs = Vec::new();
                for &ch in &self.children[v] {
                    for &(leaf, len) in memo[ch].as_ref().expect("topo order") {
                        recs.push((leaf, len + 1));
                    }
                }
                recs
            };
            memo[v] = Some(recs);
        }
        let mut per_concept = BTreeMap::new();
        for (v, recs) in memo.into_iter().enumerate() {
            let mut rows: Vec<(ConceptId, u32)> = recs
                .unwrap()
                .into_iter()
                .map(|(leaf, len)| (self.nodes[leaf].id.clone(), len))
                .collect();
            rows.sort();
            per_concept.insert(self.nodes[v].id.clone(), rows);
        }
        LeafDistanceTable { per_concept }
    }

    // ---- similarity ----

    /// Shortest undirected path between two concepts, counted in nodes and
    /// inclusive of both endpoints; `shortest_node_path(a, a) == Some(1)`.
    /// `None` when the concepts live in disconnected components.
    pub fn shortest_node_path(
        &self,
        a: &ConceptId,
        b: &ConceptId,
    ) -> Result<Option<u32>, TaxonomyError> {
        let (s, t) = (self.require(a)?, self.require(b)?);
        if s == t {
            return Ok(Some(1));
        }
        let mut dist: Vec<Option<u32>> = vec![None; self.nodes.len()];
        dist[s] = Some(0);
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            let d = dist[v].unwrap();
            for &w in self.parents[v].iter().chain(&self.children[v]) {
                if dist[w].is_none() {
                    dist[w] = Some(d + 1);
                    if w == t {
                        return Ok(Some(d + 2)); // edges + 1 endpoint = nodes
                    }
                    queue.push_back(w);
                }
            }
        }
        Ok(None)
    }

    /// Leacock-Chodorow similarity `-ln(d / 2D)` over the shortest node path
    /// `d` and the hierarchy depth `D`. `None` for disconnected pairs; the
    /// caller decides how to report those (the evaluator maps them to 0).
    pub fn lch_similarity(
        &self,
        a: &ConceptId,
        b: &ConceptId,
    ) -> Result<Option<f64>, TaxonomyError> {
        Ok(self
            .shortest_node_path(a, b)?
            .map(|d| lch_from_distance(d, self.max_depth)))
    }

    // ---- crate-internal index-level access (used by the extractor) ----

    pub(crate) fn idx(&self, id: &ConceptId) -> Option<usize> {
        self.index.get(id.as_str()).copied()
    }

    pub(crate) fn node_at(&self, i: usize) -> &ConceptNode {
        &self.nodes[i]
    }

    pub(crate) fn parents_idx(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    pub(crate) fn children_idx(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    pub(crate) fn is_orphan_idx(&self, i: usize) -> bool {
        self.parents[i].is_empty() && self.children[i].is_empty()
    }

    // ---- construction helpers ----

    fn require(&self, id: &ConceptId) -> Result<usize, TaxonomyError> {
        self.index
            .get(id.as_str())
            .copied()
            .ok_or_else(|| TaxonomyError::UnknownId(id.clone()))
    }

    fn compute_max_depth(&self) -> u32 {
        let mut depth = vec![0u32; self.nodes.len()];
        let mut max = 0;
        for &v in &self.topo {
            let d = 1 + self.parents[v].iter().map(|&p| depth[p]).max().unwrap_or(0);
            depth[v] = d;
            max = max.max(d);
        }
        max
    }

    fn compute_all_stats(&self) -> Result<Vec<Option<PathStats>>, TaxonomyError> {
        let n = self.nodes.len();
        let overflow = |v: usize| TaxonomyError::PathCountOverflow(self.nodes[v].id.clone());

        // Length distributions by dynamic programming along the topo order.
        let mut up: Vec<BTreeMap<u32, u64>> = vec![BTreeMap::new(); n];
        for &v in &self.topo {
            if self.parents[v].is_empty() {
                up[v].insert(0, 1);
            } else {
                let mut dist = BTreeMap::new();
                for &p in &self.parents[v] {
                    for (&len, &cnt) in &up[p] {
                        let slot = dist.entry(len + 1).or_insert(0u64);
                        *slot = slot.checked_add(cnt).ok_or_else(|| overflow(v))?;
                    }
                }
                up[v] = dist;
            }
        }
        let mut down: Vec<BTreeMap<u32, u64>> = vec![BTreeMap::new(); n];
        for &v in self.topo.iter().rev() {
            if self.children[v].is_empty() {
                down[v].insert(0, 1);
            } else {
                let mut dist = BTreeMap::new();
                for &ch in &self.children[v] {
                    for (&len, &cnt) in &down[ch] {
                        let slot = dist.entry(len + 1).or_insert(0u64);
                        *slot = slot.checked_add(cnt).ok_or_else(|| overflow(v))?;
                    }
                }
                down[v] = dist;
            }
        }

        let mut out = Vec::with_capacity(n);
        for v in 0..n {
            if self.is_orphan_idx(v) {
                out.push(None);
                continue;
            }
            let n_up: u64 = up[v].values().try_fold(0u64, |a, &c| a.checked_add(c))
                .ok_or_else(|| overflow(v))?;
            let n_down: u64 = down[v].values().try_fold(0u64, |a, &c| a.checked_add(c))
                .ok_or_else(|| overflow(v))?;
            let mut root_sum = 0.0;
            let mut leaf_sum = 0.0;
            for (&lu, &cu) in &up[v] {
                for (&ld, &cd) in &down[v] {
                    // lu + ld == 0 would need the node to be root and leaf at
                    // once, i.e. an orphan, excluded above.
                    let weight = cu as f64 * cd as f64;
                    let total = (lu + ld) as f64;
                    root_sum += weight * lu as f64 / total;
                    leaf_sum += weight * ld as f64 / total;
                }
            }
            let pairs = n_up as f64 * n_down as f64;
            out.push(Some(PathStats {
                concept: self.nodes[v].id.clone(),
                n_up,
                n_down,
                up_lengths: up[v].clone(),
                down_lengths: down[v].clone(),
                root_distance: root_sum / pairs,
                leaf_separation: leaf_sum / pairs,
            }));
        }
        Ok(out)
    }
}

/// `-ln(d / 2D)`: similarity of two concepts at shortest node distance `d`
/// in a hierarchy of depth `depth`. Maximal at `d = 1` (identity), zero at
/// the theoretical ceiling `d = 2D`.
pub fn lch_from_distance(d: u32, depth: u32) -> f64 {
    assert!(d >= 1, "node distance starts at 1");
    assert!(depth >= 1, "hierarchy depth starts at 1");
    assert!(d <= 2 * depth, "node distance {d} exceeds 2 * depth {depth}");
    ((2 * depth) as f64 / d as f64).ln()
}

/// Kahn's algorithm; on failure names one concrete cycle.
fn toposort(
    nodes: &[ConceptNode],
    parents: &[Vec<usize>],
    children: &[Vec<usize>],
) -> Result<Vec<usize>, TaxonomyError> {
    let n = nodes.len();
    let mut indeg: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut queue: VecDeque<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(v) = queue.pop_front() {
        order.push(v);
        for &ch in &children[v] {
            indeg[ch] -= 1;
            if indeg[ch] == 0 {
                queue.push_back(ch);
            }
        }
    }
    if order.len() == n {
        return Ok(order);
    }
    // Every unprocessed node keeps an unprocessed parent; walking parent
    // links inside that set must revisit a node, closing a cycle.
    let remaining: Vec<bool> = {
        let mut r = vec![true; n];
        for &v in &order {
            r[v] = false;
        }
        r
    };
    let start = (0..n).find(|&v| remaining[v]).unwrap();
    let mut seen_at = HashMap::new();
    let mut path = vec![start];
    let mut v = start;
    loop {
        if let Some(&pos) = seen_at.get(&v) {
            let cycle: Vec<&str> = path[pos..].iter().map(|&w| nodes[w].id.as_str()).collect();
            let mut desc = cycle.join(" -> ");
            desc.push_str(" -> ");
            desc.push_str(nodes[v].id.as_str());
            return Err(TaxonomyError::Cycle(desc));
        }
        seen_at.insert(v, path.len() - 1);
        v = *parents[v].iter().find(|&&p| remaining[p]).expect("cyclic node");
        path.push(v);
    }
}

// ---------------------------------------------------------------------------
