//! Dinic max-flow on real-valued capacities, used as the exact engine for
//! the capacitated fractional-matching linear program.

#[derive(Debug, Clone)]
struct Arc {
    to: usize,
    rev: usize,
    cap: f64,
}

/// Handle identifying a forward arc so its flow can be read back.
#[derive(Debug, Clone, Copy)]
pub struct ArcHandle {
    from: usize,
    index: usize,
}

#[derive(Debug)]
pub struct FlowNetwork {
    adj: Vec<Vec<Arc>>,
    level: Vec<i32>,
    cursor: Vec<usize>,
    eps: f64,
}

impl FlowNetwork {
    pub fn new(nodes: usize) -> Self {
        FlowNetwork {
            adj: vec![Vec::new(); nodes],
            level: vec![0; nodes],
            cursor: vec![0; nodes],
            eps: 0.0,
        }
    }

    pub fn add_arc(&mut self, from: usize, to: usize, cap: f64) -> ArcHandle {
        let fwd = self.adj[from].len();
        let bwd = self.adj[to].len();
        self.adj[from].push(Arc { to, rev: bwd, cap });
        self.adj[to].push(Arc {
            to: from,
            rev: fwd,
            cap: 0.0,
        });
        self.eps = self.eps.max(cap);
        ArcHandle { from, index: fwd }
    }

    /// Flow pushed through a forward arc, i.e. the residual on its reverse.
    pub fn flow(&self, handle: ArcHandle) -> f64 {
        let arc = &self.adj[handle.from][handle.index];
        self.adj[arc.to][arc.rev].cap
    }

    fn bfs(&mut self, source: usize, sink: usize, eps: f64) -> bool {
        self.level.fill(-1);
        self.level[source] = 0;
        let mut queue = std::collections::VecDeque::new();
        queue.push_back(source);
        while let Some(v) = queue.pop_front() {
            for arc in &self.adj[v] {
                if arc.cap > eps && self.level[arc.to] < 0 {
                    self.level[arc.to] = self.level[v] + 1;
                    queue.push_back(arc.to);
                }
            }
        }
        self.level[sink] >= 0
    }

    fn dfs(&mut self, v: usize, sink: usize, limit: f64, eps: f64) -> f64 {
        if v == sink {
            return limit;
        }
        while self.cursor[v] < self.adj[v].len() {
            let idx = self.cursor[v];
            let (to, cap, rev) = {
                let arc = &self.adj[v][idx];
                (arc.to, arc.cap, arc.rev)
            };
            if cap > eps && self.level[to] == self.level[v] + 1 {
                let pushed = self.dfs(to, sink, limit.min(cap), eps);
                if pushed > eps {
                    self.adj[v][idx].cap -= pushed;
                    self.adj[to][rev].cap += pushed;
                    return pushed;
                }
            }
            self.cursor[v] += 1;
        }
        0.0
    }

    pub fn max_flow(&mut self, source: usize, sink: usize) -> f64 {
        let eps = self.eps * 1e-12;
        let mut total = 0.0;
        while self.bfs(source, sink, eps) {
            self.cursor.fill(0);
            loop {
                let pushed = self.dfs(source, sink, f64::INFINITY, eps);
                if pushed <= eps {
                    break;
                }
                total += pushed;
            }
        }
        total
    }
}
