//! Exact max-flow on arbitrary-precision integer capacities.
//!
//! Highest-label push-relabel with the gap heuristic and an initial
//! exact-distance labeling. Capacities are `BigInt` so closure and
//! transportation instances scaled up from rationals solve exactly.

use num_bigint::BigInt;
use num_traits::Zero;

#[derive(Debug, Clone)]
struct Edge {
    to: usize,
    rev: usize,
    cap: BigInt,
}

#[derive(Debug, Clone)]
pub struct FlowNetwork {
    n: usize,
    adj: Vec<Vec<Edge>>,
    // (node, slot) address of every forward edge, in insertion order
    handles: Vec<(usize, usize)>,
}

impl FlowNetwork {
    pub fn new(n: usize) -> Self {
        FlowNetwork {
            n,
            adj: vec![Vec::new(); n],
            handles: Vec::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Adds a directed edge and returns its handle. The reverse edge starts
    /// at zero capacity, so `flow_on` reads the shipped amount off it.
    pub fn add_edge(&mut self, u: usize, v: usize, cap: BigInt) -> usize {
        assert!(u < self.n && v < self.n && u != v);
        assert!(cap >= BigInt::zero());
        let (ru, rv) = (self.adj[u].len(), self.adj[v].len());
        self.adj[u].push(Edge {
            to: v,
            rev: rv,
            cap,
        });
        self.adj[v].push(Edge {
            to: u,
            rev: ru,
            cap: BigInt::zero(),
        });
        self.handles.push((u, ru));
        self.handles.len() - 1
    }

    pub fn flow_on(&self, handle: usize) -> &BigInt {
        let (u, slot) = self.handles[handle];
        let e = &self.adj[u][slot];
        &self.adj[e.to][e.rev].cap
    }

    pub fn residual_on(&self, handle: usize) -> &BigInt {
        let (u, slot) = self.handles[handle];
        &self.adj[u][slot].cap
    }

    /// Pushes as much additional flow from `s` to `t` as the residual
    /// network allows, returning the amount added by this call.
    ///
    /// Calling again after raising capacities extends the recorded flow, so
    /// staged constructions can reuse one network.
    pub fn max_flow(&mut self, s: usize, t: usize) -> BigInt {
        assert!(s != t);
        let n = self.n;
        let max_h = 2 * n + 1;
        let mut height = self.exact_heights(t);
        height[s] = n;
        let mut excess = vec![BigInt::zero(); n];
        let mut count = vec![0usize; max_h + 1];
        for h in height.iter() {
            count[*h] += 1;
        }
        // Buckets may hold stale duplicates; entries are validated on pop.
        let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); max_h + 1];
        let mut cur_arc = vec![0usize; n];
        let mut highest = 0usize;

        // Saturate source arcs.
        for i in 0..self.adj[s].len() {
            let cap = std::mem::take(&mut self.adj[s][i].cap);
            if cap.is_zero() {
                continue;
            }
            let (to, rev) = (self.adj[s][i].to, self.adj[s][i].rev);
            self.adj[to][rev].cap += &cap;
            excess[to] += cap;
            if to != t && to != s {
                buckets[height[to]].push(to);
                highest = highest.max(height[to]);
            }
        }

        loop {
            // Find the highest active node, dropping stale entries.
            let u = loop {
                if let Some(&u) = buckets[highest].last() {
                    if excess[u].is_zero() || height[u] != highest {
                        buckets[highest].pop();
                        continue;
                    }
                    break u;
                }
                if highest == 0 {
                    return excess[t].clone();
                }
                highest -= 1;
            };

            // Discharge u.
            while !excess[u].is_zero() {
                if cur_arc[u] == self.adj[u].len() {
                    // Relabel.
                    let old = height[u];
                    let mut best = max_h;
                    for e in &self.adj[u] {
                        if !e.cap.is_zero() {
                            best = best.min(height[e.to] + 1);
                        }
                    }
                    count[old] -= 1;
                    height[u] = best;
                    count[best] += 1;
                    cur_arc[u] = 0;
                    // Gap heuristic: no flow crosses an empty level below n.
                    if count[old] == 0 && old < n {
                        for v in 0..n {
                            if v != s && v != t && height[v] > old && height[v] < n {
                                count[height[v]] -= 1;
                                height[v] = n + 1;
                                count[n + 1] += 1;
                                if !excess[v].is_zero() {
                                    buckets[n + 1].push(v);
                                }
                            }
                        }
                        highest = highest.max(n + 1);
                    }
                    highest = highest.max(height[u]);
                    buckets[height[u]].push(u);
                    break;
                }
                let i = cur_arc[u];
                let (to, cap_ok) = {
                    let e = &self.adj[u][i];
                    (e.to, !e.cap.is_zero())
                };
                if cap_ok && height[u] == height[to] + 1 {
                    // Push.
                    let amount = if excess[u] <= self.adj[u][i].cap {
                        excess[u].clone()
                    } else {
                        self.adj[u][i].cap.clone()
                    };
                    let rev = self.adj[u][i].rev;
                    self.adj[u][i].cap -= &amount;
                    self.adj[to][rev].cap += &amount;
                    excess[u] -= &amount;
                    excess[to] += amount;
                    if to != s && to != t {
                        buckets[height[to]].push(to);
                    }
                } else {
                    cur_arc[u] += 1;
                }
            }
            if excess[u].is_zero() {
                buckets[highest].pop();
            }
        }
    }

    /// BFS distances to `t` in the residual network (arc u→v usable when it
    /// has residual capacity). Unreachable nodes get height `n + 1`.
    fn exact_heights(&self, t: usize) -> Vec<usize> {
        let n = self.n;
        let mut h = vec![usize::MAX; n];
        h[t] = 0;
        let mut queue = std::collections::VecDeque::from([t]);
        while let Some(v) = queue.pop_front() {
            // arc u→v exists with residual cap iff reverse slot on v has
            // a forward counterpart; scan v's adjacency for candidates u.
            for e in &self.adj[v] {
                let u = e.to;
                let back = &self.adj[u][e.rev];
                debug_assert_eq!(back.to, v);
                if h[u] == usize::MAX && !back.cap.is_zero() {
                    h[u] = h[v] + 1;
                    queue.push_back(u);
                }
            }
        }
        h.iter()
            .map(|&d| if d == usize::MAX { n + 1 } else { d })
            .collect()
    }

    /// Nodes that can still reach `t` in the residual network. Their
    /// complement is the source side of the sink-side-maximal minimum cut.
    pub fn residual_reaches_sink(&self, t: usize) -> Vec<bool> {
        let n = self.n;
        let mut reach = vec![false; n];
        reach[t] = true;
        let mut queue = std::collections::VecDeque::from([t]);
        while let Some(v) = queue.pop_front() {
            for e in &self.adj[v] {
                let u = e.to;
                let back = &self.adj[u][e.rev];
                if !reach[u] && !back.cap.is_zero() {
                    reach[u] = true;
                    queue.push_back(u);
                }
            }
        }
        reach
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    /// Straightforward Dinic used as an independent oracle.
    struct Dinic {
        adj: Vec<Vec<Edge>>,
    }

    impl Dinic {
        fn new(n: usize) -> Self {
            Dinic {
                adj: vec![Vec::new(); n],
            }
        }

        fn add_edge(&mut self, u: usize, v: usize, cap: BigInt) {
            let (ru, rv) = (self.adj[u].len(), self.adj[v].len());
            self.adj[u].push(Edge { to: v, rev: rv, cap });
            self.adj[v].push(Edge {
                to: u,
                rev: ru,
                cap: BigInt::zero(),
            });
        }

        fn bfs(&self, s: usize, t: usize) -> Option<Vec<i32>> {
            let mut level = vec![-1; self.adj.len()];
            level[s] = 0;
            let mut q = std::collections::VecDeque::from([s]);
            while let Some(u) = q.pop_front() {
                for e in &self.adj[u] {
                    if level[e.to] < 0 && !e.cap.is_zero() {
                        level[e.to] = level[u] + 1;
                        q.push_back(e.to);
                    }
                }
            }
            (level[t] >= 0).then_some(level)
        }

        fn dfs(
            &mut self,
            u: usize,
            t: usize,
            pushed: BigInt,
            level: &[i32],
            it: &mut [usize],
        ) -> BigInt {
            if u == t {
                return pushed;
            }
            while it[u] < self.adj[u].len() {
                let i = it[u];
                let (to, cap) = (self.adj[u][i].to, self.adj[u][i].cap.clone());
                if !cap.is_zero() && level[to] == level[u] + 1 {
                    let amt = self.dfs(to, t, pushed.clone().min(cap), level, it);
                    if !amt.is_zero() {
                        let rev = self.adj[u][i].rev;
                        self.adj[u][i].cap -= &amt;
                        self.adj[to][rev].cap += &amt;
                        return amt;
                    }
                }
                it[u] += 1;
            }
            BigInt::zero()
        }

        fn max_flow(&mut self, s: usize, t: usize) -> BigInt {
            let mut total = BigInt::zero();
            let huge = BigInt::from(1u8) << 512;
            while let Some(level) = self.bfs(s, t) {
                let mut it = vec![0usize; self.adj.len()];
                loop {
                    let f = self.dfs(s, t, huge.clone(), &level, &mut it);
                    if f.is_zero() {
                        break;
                    }
                    total += f;
                }
            }
            total
        }
    }

    #[test]
    fn textbook_instance() {
        let mut net = FlowNetwork::new(4);
        net.add_edge(0, 1, BigInt::from(3));
        net.add_edge(0, 2, BigInt::from(2));
        net.add_edge(1, 2, BigInt::from(5));
        net.add_edge(1, 3, BigInt::from(2));
        net.add_edge(2, 3, BigInt::from(3));
        assert_eq!(net.max_flow(0, 3), BigInt::from(5));
    }

    #[test]
    fn flow_on_reports_per_edge_flow() {
        let mut net = FlowNetwork::new(3);
        let a = net.add_edge(0, 1, BigInt::from(4));
        let b = net.add_edge(1, 2, BigInt::from(3));
        assert_eq!(net.max_flow(0, 2), BigInt::from(3));
        assert_eq!(net.flow_on(a), &BigInt::from(3));
        assert_eq!(net.flow_on(b), &BigInt::from(3));
        assert_eq!(net.residual_on(a), &BigInt::one());
    }

    #[test]
    fn resuming_after_capacity_additions_extends_the_flow() {
        let mut net = FlowNetwork::new(4);
        net.add_edge(0, 1, BigInt::from(2));
        net.add_edge(1, 3, BigInt::from(1));
        assert_eq!(net.max_flow(0, 3), BigInt::one());
        net.add_edge(1, 2, BigInt::from(5));
        net.add_edge(2, 3, BigInt::from(5));
        assert_eq!(net.max_flow(0, 3), BigInt::one());
    }

    #[test]
    fn sink_side_cut_is_maximal() {
        // Two parallel unit paths; after saturation nothing reaches t.
        let mut net = FlowNetwork::new(4);
        net.add_edge(0, 1, BigInt::one());
        net.add_edge(0, 2, BigInt::one());
        net.add_edge(1, 3, BigInt::one());
        net.add_edge(2, 3, BigInt::one());
        net.max_flow(0, 3);
        let reach = net.residual_reaches_sink(3);
        assert_eq!(reach, vec![false, false, false, true]);
    }

    #[test]
    fn agrees_with_dinic_on_random_instances() {
        let mut rng = StdRng::seed_from_u64(7);
        for trial in 0..60 {
            let n = rng.random_range(2..=9);
            let s = 0;
            let t = n - 1;
            let mut net = FlowNetwork::new(n);
            let mut oracle = Dinic::new(n);
            for u in 0..n {
                for v in 0..n {
                    if u == v || !rng.random_bool(0.45) {
                        continue;
                    }
                    let cap = BigInt::from(rng.random_range(0..=20u32));
                    net.add_edge(u, v, cap.clone());
                    oracle.add_edge(u, v, cap);
                }
            }
            let got = net.max_flow(s, t);
            let want = oracle.max_flow(s, t);
            assert_eq!(got, want, "trial {trial}");
        }
    }

    #[test]
    fn handles_huge_capacities_exactly() {
        let mut net = FlowNetwork::new(3);
        let big = BigInt::from(10u8).pow(40);
        net.add_edge(0, 1, big.clone());
        net.add_edge(1, 2, &big - 17);
        assert_eq!(net.max_flow(0, 2), &big - 17);
    }
}
