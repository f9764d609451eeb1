//! Successive-shortest-path min-cost flow over exact lexicographic costs.
//!
//! Every solver in the crate reduces to this engine. Costs are vectors of
//! integers compared lexicographically, which lets one network encode
//! prioritised objectives (lower-bound satisfaction, then exploration, then
//! weight, then a deterministic id tie-break) without big-M constants.
//! Real-valued weights are quantised to `2^-40`.

use std::ops::{Add, AddAssign, Neg, Sub};

const WEIGHT_SCALE: f64 = (1u64 << 40) as f64;

pub(crate) fn quantize(x: f64) -> i128 {
    (x * WEIGHT_SCALE).round() as i128
}

/// Objective levels, most significant first.
pub(crate) const SLACK: usize = 0;
pub(crate) const EXPLORE: usize = 1;
pub(crate) const WEIGHT: usize = 2;
pub(crate) const TIE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default, Hash)]
pub(crate) struct Cost(pub [i128; 4]);

impl Cost {
    pub const ZERO: Cost = Cost([0; 4]);

    pub fn at(level: usize, value: i128) -> Cost {
        let mut c = [0; 4];
        c[level] = value;
        Cost(c)
    }

    pub fn with(mut self, level: usize, value: i128) -> Cost {
        self.0[level] += value;
        self
    }

    pub fn scale(self, k: i64) -> Cost {
        let k = k as i128;
        Cost(self.0.map(|c| c * k))
    }
}

impl Add for Cost {
    type Output = Cost;
    fn add(self, rhs: Cost) -> Cost {
        Cost(std::array::from_fn(|i| self.0[i] + rhs.0[i]))
    }
}

impl AddAssign for Cost {
    fn add_assign(&mut self, rhs: Cost) {
        *self = *self + rhs;
    }
}

impl Sub for Cost {
    type Output = Cost;
    fn sub(self, rhs: Cost) -> Cost {
        Cost(std::array::from_fn(|i| self.0[i] - rhs.0[i]))
    }
}

impl Neg for Cost {
    type Output = Cost;
    fn neg(self) -> Cost {
        Cost(self.0.map(|c| -c))
    }
}

#[derive(Debug, Clone)]
struct Arc {
    to: usize,
    cap: i64,
    cost: Cost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Augment {
    /// Push flow while the cheapest path has negative cost (free flow value).
    WhileNegative,
    /// Push until no augmenting path remains (maximum flow, minimum cost).
    Maximum,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct FlowResult {
    pub flow: i64,
    pub cost: Cost,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct FlowNetwork {
    arcs: Vec<Arc>,
    adj: Vec<Vec<usize>>,
    batched: bool,
}

impl FlowNetwork {
    pub fn new() -> Self {
        Self::default()
    }

    /// Saturate all shortest paths per phase instead of one. Pays off when
    /// many paths share a cost, as in networks with few distinct arc costs.
    pub fn batched(mut self) -> Self {
        self.batched = true;
        self
    }

    pub fn add_node(&mut self) -> usize {
        self.adj.push(Vec::new());
        self.adj.len() - 1
    }

    pub fn add_nodes(&mut self, n: usize) -> std::ops::Range<usize> {
        let start = self.adj.len();
        self.adj.resize_with(start + n, Vec::new);
        start..start + n
    }

    /// Adds `from -> to` and its residual twin; returns the forward arc id.
    pub fn add_arc(&mut self, from: usize, to: usize, cap: i64, cost: Cost) -> usize {
        let id = self.arcs.len();
        self.arcs.push(Arc { to, cap, cost });
        self.arcs.push(Arc {
            to: from,
            cap: 0,
            cost: -cost,
        });
        self.adj[from].push(id);
        self.adj[to].push(id + 1);
        id
    }

    pub fn flow_on(&self, arc: usize) -> i64 {
        self.arcs[arc ^ 1].cap
    }

    pub fn residual(&self, arc: usize) -> i64 {
        self.arcs[arc].cap
    }

    fn initial_potentials(&self, source: usize) -> Vec<Cost> {
        let n = self.adj.len();
        let mut pot = vec![Cost::ZERO; n];
        if self.arcs.iter().step_by(2).all(|a| a.cost >= Cost::ZERO) {
            return pot;
        }
        // Bellman-Ford (queue based); the networks built here start acyclic.
        let mut dist: Vec<Option<Cost>> = vec![None; n];
        let mut in_queue = vec![false; n];
        let mut queue = std::collections::VecDeque::new();
        dist[source] = Some(Cost::ZERO);
        queue.push_back(source);
        in_queue[source] = true;
        while let Some(u) = queue.pop_front() {
            in_queue[u] = false;
            let du = dist[u].expect("queued nodes are reached");
            for &a in &self.adj[u] {
                let arc = &self.arcs[a];
                if arc.cap <= 0 {
                    continue;
                }
                let nd = du + arc.cost;
                if dist[arc.to].is_none_or(|d| nd < d) {
                    dist[arc.to] = Some(nd);
                    if !in_queue[arc.to] {
                        in_queue[arc.to] = true;
                        queue.push_back(arc.to);
                    }
                }
            }
        }
        for (p, d) in pot.iter_mut().zip(dist) {
            if let Some(d) = d {
                *p = d;
            }
        }
        pot
    }

    pub fn run(&mut self, source: usize, sink: usize, mode: Augment) -> FlowResult {
        let n = self.adj.len();
        let mut pot = self.initial_potentials(source);
        let mut total = FlowResult {
            flow: 0,
            cost: Cost::ZERO,
        };
        let mut dist: Vec<Option<Cost>> = vec![None; n];
        let mut prev_arc = vec![usize::MAX; n];
        let mut heap = IndexHeap::new(n);
        let mut settled = Vec::with_capacity(n);

        loop {
            dist.iter_mut().for_each(|d| *d = None);
            heap.reset();
            settled.clear();
            dist[source] = Some(Cost::ZERO);
            heap.push_or_decrease(source, &dist);
            while let Some(u) = heap.pop(&dist) {
                settled.push(u);
                if u == sink {
                    break;
                }
                let d = dist[u].expect("queued nodes have a distance");
                for &a in &self.adj[u] {
                    let arc = &self.arcs[a];
                    if arc.cap <= 0 || heap.is_settled(arc.to) {
                        continue;
                    }
                    let nd = d + arc.cost + pot[u] - pot[arc.to];
                    debug_assert!(nd >= d, "negative reduced cost");
                    if dist[arc.to].is_none_or(|old| nd < old) {
                        dist[arc.to] = Some(nd);
                        prev_arc[arc.to] = a;
                        heap.push_or_decrease(arc.to, &dist);
                    }
                }
            }
            let Some(d_sink) = dist[sink].filter(|_| heap.is_settled(sink)) else { break };
            let path_cost = d_sink + pot[sink] - pot[source];
            if mode == Augment::WhileNegative && path_cost >= Cost::ZERO {
                break;
            }
            // Nodes settled before the sink move by their own distance, all
            // others by the sink's; reduced costs stay nonnegative.
            for p in pot.iter_mut() {
                *p += d_sink;
            }
            for &v in &settled {
                pot[v] += dist[v].expect("settled") - d_sink;
            }
            let pushed = if self.batched {
                self.blocking_flow(source, sink, &pot)
            } else {
                self.push_path(source, sink, &prev_arc)
            };
            debug_assert!(pushed > 0, "the shortest path is admissible");
            total.flow += pushed;
            total.cost += path_cost.scale(pushed);
        }
        total
    }

    fn push_path(&mut self, source: usize, sink: usize, prev_arc: &[usize]) -> i64 {
        let mut push = i64::MAX;
        let mut v = sink;
        while v != source {
            let a = prev_arc[v];
            push = push.min(self.arcs[a].cap);
            v = self.arcs[a ^ 1].to;
        }
        let mut v = sink;
        while v != source {
            let a = prev_arc[v];
            self.arcs[a].cap -= push;
            self.arcs[a ^ 1].cap += push;
            v = self.arcs[a ^ 1].to;
        }
        push
    }

    fn admissible(&self, a: usize, from: usize, pot: &[Cost]) -> bool {
        let arc = &self.arcs[a];
        arc.cap > 0 && arc.cost + pot[from] - pot[arc.to] == Cost::ZERO
    }

    /// Saturates every shortest path at once: a Dinic blocking flow over the
    /// arcs whose reduced cost is zero. Each such path costs the same.
    fn blocking_flow(&mut self, source: usize, sink: usize, pot: &[Cost]) -> i64 {
        let n = self.adj.len();
        let mut total = 0;
        loop {
            let mut level = vec![usize::MAX; n];
            level[source] = 0;
            let mut queue = std::collections::VecDeque::from([source]);
            while let Some(u) = queue.pop_front() {
                for &a in &self.adj[u] {
                    let to = self.arcs[a].to;
                    if level[to] == usize::MAX && self.admissible(a, u, pot) {
                        level[to] = level[u] + 1;
                        queue.push_back(to);
                    }
                }
            }
            if level[sink] == usize::MAX {
                return total;
            }
            let mut next = vec![0usize; n];
            loop {
                let pushed = self.augment_along_levels(source, sink, i64::MAX, &level, &mut next, pot);
                if pushed == 0 {
                    break;
                }
                total += pushed;
            }
        }
    }

    fn augment_along_levels(
        &mut self,
        u: usize,
        sink: usize,
        limit: i64,
        level: &[usize],
        next: &mut [usize],
        pot: &[Cost],
    ) -> i64 {
        if u == sink {
            return limit;
        }
        while next[u] < self.adj[u].len() {
            let a = self.adj[u][next[u]];
            let to = self.arcs[a].to;
            if level[to] == level[u] + 1 && self.admissible(a, u, pot) {
                let pushed = self.augment_along_levels(to, sink, limit.min(self.arcs[a].cap), level, next, pot);
                if pushed > 0 {
                    self.arcs[a].cap -= pushed;
                    self.arcs[a ^ 1].cap += pushed;
                    return pushed;
                }
            }
            next[u] += 1;
        }
        0
    }
}

const ABSENT: usize = usize::MAX;
const SETTLED: usize = usize::MAX - 1;

/// Binary min-heap of node ids keyed by an external distance table, with
/// decrease-key. Ties pop the lower node id first.
#[derive(Debug)]
struct IndexHeap {
    nodes: Vec<usize>,
    pos: Vec<usize>,
}

impl IndexHeap {
    fn new(n: usize) -> Self {
        IndexHeap {
            nodes: Vec::with_capacity(n),
            pos: vec![ABSENT; n],
        }
    }

    fn reset(&mut self) {
        self.nodes.clear();
        self.pos.iter_mut().for_each(|p| *p = ABSENT);
    }

    fn is_settled(&self, v: usize) -> bool {
        self.pos[v] == SETTLED
    }

    fn less(dist: &[Option<Cost>], a: usize, b: usize) -> bool {
        (dist[a], a) < (dist[b], b)
    }

    fn push_or_decrease(&mut self, v: usize, dist: &[Option<Cost>]) {
        let i = match self.pos[v] {
            ABSENT => {
                self.nodes.push(v);
                self.nodes.len() - 1
            }
            i => i,
        };
        self.pos[v] = i;
        self.sift_up(i, dist);
    }

    fn pop(&mut self, dist: &[Option<Cost>]) -> Option<usize> {
        let top = *self.nodes.first()?;
        let last = self.nodes.pop().expect("nonempty");
        if !self.nodes.is_empty() {
            self.nodes[0] = last;
            self.pos[last] = 0;
            self.sift_down(0, dist);
        }
        self.pos[top] = SETTLED;
        Some(top)
    }

    fn sift_up(&mut self, mut i: usize, dist: &[Option<Cost>]) {
        let v = self.nodes[i];
        while i > 0 {
            let parent = (i - 1) / 2;
            let p = self.nodes[parent];
            if !Self::less(dist, v, p) {
                break;
            }
            self.nodes[i] = p;
            self.pos[p] = i;
            i = parent;
        }
        self.nodes[i] = v;
        self.pos[v] = i;
    }

    fn sift_down(&mut self, mut i: usize, dist: &[Option<Cost>]) {
        let v = self.nodes[i];
        let n = self.nodes.len();
        loop {
            let mut child = 2 * i + 1;
            if child >= n {
                break;
            }
            if child + 1 < n && Self::less(dist, self.nodes[child + 1], self.nodes[child]) {
                child += 1;
            }
            let c = self.nodes[child];
            if !Self::less(dist, c, v) {
                break;
            }
            self.nodes[i] = c;
            self.pos[c] = i;
            i = child;
        }
        self.nodes[i] = v;
        self.pos[v] = i;
    }
}
