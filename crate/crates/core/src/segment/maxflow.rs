//! s/t maximum flow with the search-tree augmenting-path algorithm of
//! Boykov and Kolmogorov, the usual choice for grid graphs in vision.
//!
//! Two search trees grow from the source and the sink; when they touch, the
//! connecting path is augmented, saturated edges turn their subtree roots
//! into orphans, and orphans are re-attached or freed. The result is exact
//! for the given capacities and, since every step is index ordered,
//! deterministic.

use std::collections::VecDeque;

/// Generic cut problem: every node has a source and a sink capacity, and
/// node pairs carry a capacity in each direction.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CutGraph {
    /// `(source → node, node → sink)` per node.
    pub terminals: Vec<(f64, f64)>,
    /// `(a, b, a → b, b → a)`.
    pub edges: Vec<(usize, usize, f64, f64)>,
}

impl CutGraph {
    pub fn new(nodes: usize) -> Self {
        Self {
            terminals: vec![(0.0, 0.0); nodes],
            edges: Vec::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.terminals.len()
    }

    pub fn set_terminals(&mut self, node: usize, source: f64, sink: f64) {
        self.terminals[node] = (source, sink);
    }

    pub fn add_edge(&mut self, a: usize, b: usize, cap: f64, rev_cap: f64) {
        self.edges.push((a, b, cap, rev_cap));
    }

    /// Capacity of the cut that puts `source_side[i]` nodes with the source.
    pub fn cut_value(&self, source_side: &[bool]) -> f64 {
        let mut v = 0.0;
        for (i, &(s, t)) in self.terminals.iter().enumerate() {
            v += if source_side[i] { t } else { s };
        }
        for &(a, b, ab, ba) in &self.edges {
            match (source_side[a], source_side[b]) {
                (true, false) => v += ab,
                (false, true) => v += ba,
                _ => {}
            }
        }
        v
    }
}

/// Maximum flow value and the minimal source set of a minimum cut.
#[derive(Debug, Clone, PartialEq)]
pub struct MinCut {
    pub flow: f64,
    /// `true` for nodes reachable from the source in the final residual graph.
    pub source_side: Vec<bool>,
}

pub fn min_cut(graph: &CutGraph) -> MinCut {
    let mut solver = Solver::new(graph);
    let flow = solver.run();
    let source_side = (0..graph.node_count()).map(|i| solver.in_source_tree(i)).collect();
    MinCut { flow, source_side }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Tree {
    Source,
    Sink,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Parent {
    Free,
    Terminal,
    Orphan,
    /// Edge whose `dst` is the parent node.
    Edge(usize),
}

struct Arc {
    dst: usize,
    next: usize,
    residual: f64,
}

struct Node {
    first: usize,
    /// Residual terminal capacity: `> 0` toward the source, `< 0` toward the sink.
    excess: f64,
    parent: Parent,
    tree: Tree,
    timestamp: u64,
    dist: u64,
    active: bool,
}

/// Arc indices come in pairs `e` / `e ^ 1`; index 0/1 is a sentinel so
/// that `0` terminates adjacency lists.
struct Solver {
    nodes: Vec<Node>,
    arcs: Vec<Arc>,
    flow: f64,
}

impl Solver {
    fn new(graph: &CutGraph) -> Self {
        let mut flow = 0.0;
        let nodes = graph
            .terminals
            .iter()
            .map(|&(s, t)| {
                assert!(s >= 0.0 && t >= 0.0 && s.is_finite() && t.is_finite(), "terminal capacities must be finite and non-negative");
                flow += s.min(t);
                Node {
                    first: 0,
                    excess: s - t,
                    parent: Parent::Free,
                    tree: Tree::Source,
                    timestamp: 0,
                    dist: 0,
                    active: false,
                }
            })
            .collect();
        let mut solver = Self {
            nodes,
            arcs: Vec::with_capacity(2 + 2 * graph.edges.len()),
            flow,
        };
        for _ in 0..2 {
            solver.arcs.push(Arc {
                dst: 0,
                next: 0,
                residual: 0.0,
            });
        }
        for &(a, b, ab, ba) in &graph.edges {
            assert!(a != b, "self loops are not allowed");
            assert!(ab >= 0.0 && ba >= 0.0 && ab.is_finite() && ba.is_finite(), "edge capacities must be finite and non-negative");
            let e = solver.arcs.len();
            solver.arcs.push(Arc {
                dst: b,
                next: solver.nodes[a].first,
                residual: ab,
            });
            solver.arcs.push(Arc {
                dst: a,
                next: solver.nodes[b].first,
                residual: ba,
            });
            solver.nodes[a].first = e;
            solver.nodes[b].first = e + 1;
        }
        solver
    }

    fn in_source_tree(&self, i: usize) -> bool {
        let n = &self.nodes[i];
        n.parent != Parent::Free && n.tree == Tree::Source
    }

    /// Residual of arc `e` as seen from a tree: source trees push along `e`,
    /// sink trees pull along its reverse.
    #[inline]
    fn tree_arc(e: usize, tree: Tree) -> usize {
        match tree {
            Tree::Source => e,
            Tree::Sink => e ^ 1,
        }
    }

    fn run(&mut self) -> f64 {
        let mut queue = VecDeque::new();
        for (i, n) in self.nodes.iter_mut().enumerate() {
            if n.excess != 0.0 {
                n.parent = Parent::Terminal;
                n.tree = if n.excess > 0.0 { Tree::Source } else { Tree::Sink };
                n.dist = 1;
                n.active = true;
                queue.push_back(i);
            }
        }
        let mut time = 0u64;
        let mut orphans = Vec::new();

        loop {
            // grow both trees until they meet
            let mut meeting = None;
            while let Some(&v) = queue.front() {
                if self.nodes[v].parent != Parent::Free {
                    let vt = self.nodes[v].tree;
                    let mut e = self.nodes[v].first;
                    while e != 0 {
                        let next = self.arcs[e].next;
                        if self.arcs[Self::tree_arc(e, vt)].residual > 0.0 {
                            let u = self.arcs[e].dst;
                            if self.nodes[u].parent == Parent::Free {
                                let (ts, dist) = (self.nodes[v].timestamp, self.nodes[v].dist + 1);
                                let un = &mut self.nodes[u];
                                un.tree = vt;
                                un.parent = Parent::Edge(e ^ 1);
                                un.timestamp = ts;
                                un.dist = dist;
                                if !un.active {
                                    un.active = true;
                                    queue.push_back(u);
                                }
                            } else if self.nodes[u].tree != vt {
                                meeting = Some(Self::tree_arc(e, vt));
                                break;
                            } else if self.nodes[u].dist > self.nodes[v].dist + 1
                                && self.nodes[u].timestamp <= self.nodes[v].timestamp
                            {
                                let (ts, dist) = (self.nodes[v].timestamp, self.nodes[v].dist + 1);
                                let un = &mut self.nodes[u];
                                un.parent = Parent::Edge(e ^ 1);
                                un.timestamp = ts;
                                un.dist = dist;
                            }
                        }
                        e = next;
                    }
                    if meeting.is_some() {
                        break;
                    }
                }
                queue.pop_front();
                self.nodes[v].active = false;
            }
            let Some(e0) = meeting else {
                break;
            };

            // bottleneck along source root ← ... ← a -e0-> b → ... → sink root
            let mut bottleneck = self.arcs[e0].residual;
            for side in [Tree::Source, Tree::Sink] {
                let mut v = self.arcs[self.endpoint_arc(e0, side)].dst;
                while let Parent::Edge(ei) = self.nodes[v].parent {
                    bottleneck = bottleneck.min(self.arcs[Self::toward_root(ei, side)].residual);
                    v = self.arcs[ei].dst;
                }
                bottleneck = bottleneck.min(self.nodes[v].excess.abs());
            }
            debug_assert!(bottleneck > 0.0);

            // augment
            self.arcs[e0].residual -= bottleneck;
            self.arcs[e0 ^ 1].residual += bottleneck;
            self.flow += bottleneck;
            for side in [Tree::Source, Tree::Sink] {
                let mut v = self.arcs[self.endpoint_arc(e0, side)].dst;
                while let Parent::Edge(ei) = self.nodes[v].parent {
                    let fwd = Self::toward_root(ei, side);
                    self.arcs[fwd ^ 1].residual += bottleneck;
                    self.arcs[fwd].residual -= bottleneck;
                    let parent = self.arcs[ei].dst;
                    if self.arcs[fwd].residual == 0.0 {
                        self.nodes[v].parent = Parent::Orphan;
                        orphans.push(v);
                    }
                    v = parent;
                }
                let n = &mut self.nodes[v];
                n.excess += match side {
                    Tree::Source => -bottleneck,
                    Tree::Sink => bottleneck,
                };
                if n.excess == 0.0 {
                    n.parent = Parent::Orphan;
                    orphans.push(v);
                }
            }

            // adopt orphans
            time += 1;
            while let Some(v) = orphans.pop() {
                self.adopt(v, time, &mut orphans, &mut queue);
            }
        }
        self.flow
    }

    /// Arc whose `dst` is the endpoint of `e0` lying in `side`'s tree.
    #[inline]
    fn endpoint_arc(&self, e0: usize, side: Tree) -> usize {
        match side {
            Tree::Source => e0 ^ 1,
            Tree::Sink => e0,
        }
    }

    /// For a node whose parent arc is `ei` (pointing at the parent), the arc
    /// that carries flow along the path: child → parent in the sink tree,
    /// parent → child in the source tree.
    #[inline]
    fn toward_root(ei: usize, side: Tree) -> usize {
        match side {
            Tree::Source => ei ^ 1,
            Tree::Sink => ei,
        }
    }

    fn adopt(&mut self, v: usize, time: u64, orphans: &mut Vec<usize>, queue: &mut VecDeque<usize>) {
        let vt = self.nodes[v].tree;
        let mut best: Option<(usize, u64)> = None;

        let mut e = self.nodes[v].first;
        while e != 0 {
            // residual from the candidate parent into v (source tree) or out of v (sink tree)
            let carry = match vt {
                Tree::Source => e ^ 1,
                Tree::Sink => e,
            };
            let u = self.arcs[e].dst;
            if self.arcs[carry].residual > 0.0 && self.nodes[u].tree == vt && self.nodes[u].parent != Parent::Free {
                if let Some(d) = self.root_distance(u, time) {
                    let d = d + 1;
                    if best.is_none_or(|(_, bd)| d < bd) {
                        best = Some((e, d));
                    }
                    // stamp the walked path
                    let mut w = u;
                    let mut dd = d;
                    while self.nodes[w].timestamp != time {
                        dd -= 1;
                        self.nodes[w].timestamp = time;
                        self.nodes[w].dist = dd;
                        match self.nodes[w].parent {
                            Parent::Edge(pe) => w = self.arcs[pe].dst,
                            _ => break,
                        }
                    }
                }
            }
            e = self.arcs[e].next;
        }

        if let Some((e, d)) = best {
            let n = &mut self.nodes[v];
            n.parent = Parent::Edge(e);
            n.timestamp = time;
            n.dist = d;
            return;
        }

        // no valid parent: free v, reactivate neighbors, orphan its children
        self.nodes[v].timestamp = 0;
        self.nodes[v].parent = Parent::Free;
        let mut e = self.nodes[v].first;
        while e != 0 {
            let u = self.arcs[e].dst;
            let up = self.nodes[u].parent;
            if self.nodes[u].tree == vt && up != Parent::Free {
                let carry = match vt {
                    Tree::Source => e ^ 1,
                    Tree::Sink => e,
                };
                if self.arcs[carry].residual > 0.0 && !self.nodes[u].active {
                    self.nodes[u].active = true;
                    queue.push_back(u);
                }
                if let Parent::Edge(pe) = up {
                    if self.arcs[pe].dst == v {
                        self.nodes[u].parent = Parent::Orphan;
                        orphans.push(u);
                    }
                }
            }
            e = self.arcs[e].next;
        }
    }

    /// Distance from `u` to its tree root, or `None` if the path hits an orphan.
    fn root_distance(&mut self, mut u: usize, time: u64) -> Option<u64> {
        let mut d = 0u64;
        loop {
            if self.nodes[u].timestamp == time {
                return Some(d + self.nodes[u].dist);
            }
            d += 1;
            match self.nodes[u].parent {
                Parent::Edge(pe) => u = self.arcs[pe].dst,
                Parent::Terminal => {
                    self.nodes[u].timestamp = time;
                    self.nodes[u].dist = 1;
                    return Some(d);
                }
                Parent::Orphan | Parent::Free => return None,
            }
        }
    }
}
