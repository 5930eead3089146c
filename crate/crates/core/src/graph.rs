//! Strongly connected components of explicit graphs.

/// SCC decomposition. Components are numbered in reverse topological order:
/// every edge goes from a component to one with an equal or smaller index.
#[derive(Clone, Debug)]
pub struct Sccs {
    pub comp: Vec<usize>,
    pub members: Vec<Vec<usize>>,
}

impl Sccs {
    pub fn count(&self) -> usize {
        self.members.len()
    }

    /// Whether component `c` contains a cycle (more than one node, or a self-loop).
    pub fn is_nontrivial(&self, c: usize, adj: &[Vec<usize>]) -> bool {
        let m = &self.members[c];
        m.len() > 1 || adj[m[0]].contains(&m[0])
    }

    /// Components with no edge leaving them.
    pub fn bottom(&self, adj: &[Vec<usize>]) -> Vec<bool> {
        let mut bottom = vec![true; self.count()];
        for (u, succ) in adj.iter().enumerate() {
            for &v in succ {
                if self.comp[u] != self.comp[v] {
                    bottom[self.comp[u]] = false;
                }
            }
        }
        bottom
    }
}

/// Iterative Tarjan.
pub fn scc(adj: &[Vec<usize>]) -> Sccs {
    const UNSEEN: usize = usize::MAX;
    let n = adj.len();
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comp = vec![UNSEEN; n];
    let mut members = Vec::new();
    let mut next_index = 0;
    let mut call: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        call.push((root, 0));
        while let Some(&mut (u, ref mut edge)) = call.last_mut() {
            if *edge == 0 && index[u] == UNSEEN {
                index[u] = next_index;
                low[u] = next_index;
                next_index += 1;
                stack.push(u);
                on_stack[u] = true;
            }
            if *edge < adj[u].len() {
                let v = adj[u][*edge];
                *edge += 1;
                if index[v] == UNSEEN {
                    call.push((v, 0));
                } else if on_stack[v] {
                    low[u] = low[u].min(index[v]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[u]);
            }
            if low[u] == index[u] {
                let id = members.len();
                let mut m = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack");
                    on_stack[w] = false;
                    comp[w] = id;
                    m.push(w);
                    if w == u {
                        break;
                    }
                }
                m.sort_unstable();
                members.push(m);
            }
        }
    }
    Sccs { comp, members }
}

/// Nodes reachable from `starts`.
pub fn reachable(adj: &[Vec<usize>], starts: impl IntoIterator<Item = usize>) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    let mut stack: Vec<usize> = starts.into_iter().collect();
    for &s in &stack {
        seen[s] = true;
    }
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen
}
