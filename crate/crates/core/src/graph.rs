//! Bipartite buyer/good graphs.
//!
//! Node ids: buyers are `0..m`, goods are `m..m+n`.

use std::collections::VecDeque;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BipartiteGraph {
    num_buyers: usize,
    num_goods: usize,
    adj: Vec<Vec<bool>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Node {
    Buyer(usize),
    Good(usize),
}

impl BipartiteGraph {
    pub fn empty(num_buyers: usize, num_goods: usize) -> Self {
        Self {
            num_buyers,
            num_goods,
            adj: vec![vec![false; num_goods]; num_buyers],
        }
    }

    pub fn complete(num_buyers: usize, num_goods: usize) -> Self {
        Self {
            num_buyers,
            num_goods,
            adj: vec![vec![true; num_goods]; num_buyers],
        }
    }

    pub fn from_edges(num_buyers: usize, num_goods: usize, edges: &[(usize, usize)]) -> Self {
        let mut g = Self::empty(num_buyers, num_goods);
        for &(i, j) in edges {
            g.adj[i][j] = true;
        }
        g
    }

    pub fn num_buyers(&self) -> usize {
        self.num_buyers
    }

    pub fn num_goods(&self) -> usize {
        self.num_goods
    }

    pub fn has_edge(&self, buyer: usize, good: usize) -> bool {
        self.adj[buyer][good]
    }

    pub fn set_edge(&mut self, buyer: usize, good: usize, present: bool) {
        self.adj[buyer][good] = present;
    }

    /// Edges as `(buyer, good)` pairs in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, row) in self.adj.iter().enumerate() {
            for (j, &e) in row.iter().enumerate() {
                if e {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn num_edges(&self) -> usize {
        self.adj.iter().flatten().filter(|&&e| e).count()
    }

    pub fn buyer_degree(&self, buyer: usize) -> usize {
        self.adj[buyer].iter().filter(|&&e| e).count()
    }

    pub fn good_degree(&self, good: usize) -> usize {
        self.adj.iter().filter(|row| row[good]).count()
    }

    pub fn goods_of(&self, buyer: usize) -> impl Iterator<Item = usize> + '_ {
        self.adj[buyer]
            .iter()
            .enumerate()
            .filter(|(_, &e)| e)
            .map(|(j, _)| j)
    }

    pub fn buyers_of(&self, good: usize) -> impl Iterator<Item = usize> + '_ {
        self.adj
            .iter()
            .enumerate()
            .filter(move |(_, row)| row[good])
            .map(|(i, _)| i)
    }

    pub fn is_subgraph_of(&self, other: &BipartiteGraph) -> bool {
        self.edges().iter().all(|&(i, j)| other.has_edge(i, j))
    }

    fn neighbors(&self, node: Node) -> Vec<Node> {
        match node {
            Node::Buyer(i) => self.goods_of(i).map(Node::Good).collect(),
            Node::Good(j) => self.buyers_of(j).map(Node::Buyer).collect(),
        }
    }

    /// Connected component label for every buyer and good.
    pub fn components(&self) -> (Vec<usize>, Vec<usize>) {
        let mut buyer_comp = vec![usize::MAX; self.num_buyers];
        let mut good_comp = vec![usize::MAX; self.num_goods];
        let mut label = 0;
        let starts: Vec<Node> = (0..self.num_buyers)
            .map(Node::Buyer)
            .chain((0..self.num_goods).map(Node::Good))
            .collect();
        for start in starts {
            let seen = match start {
                Node::Buyer(i) => buyer_comp[i] != usize::MAX,
                Node::Good(j) => good_comp[j] != usize::MAX,
            };
            if seen {
                continue;
            }
            let mut queue = VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                let slot = match v {
                    Node::Buyer(i) => &mut buyer_comp[i],
                    Node::Good(j) => &mut good_comp[j],
                };
                if *slot != usize::MAX {
                    continue;
                }
                *slot = label;
                queue.extend(self.neighbors(v));
            }
            label += 1;
        }
        (buyer_comp, good_comp)
    }

    /// True when `good` is reachable from `buyer` without using the edge between them.
    pub fn edge_on_cycle(&self, buyer: usize, good: usize) -> bool {
        if !self.has_edge(buyer, good) {
            return false;
        }
        let mut g = self.clone();
        g.set_edge(buyer, good, false);
        g.reachable(Node::Buyer(buyer)).contains(&Node::Good(good))
    }

    pub fn buyer_on_cycle(&self, buyer: usize) -> bool {
        self.goods_of(buyer).any(|j| self.edge_on_cycle(buyer, j))
    }

    pub fn is_forest(&self) -> bool {
        self.edges().iter().all(|&(i, j)| !self.edge_on_cycle(i, j))
    }

    pub fn reachable(&self, start: Node) -> Vec<Node> {
        let mut seen = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for w in self.neighbors(v) {
                if !seen.contains(&w) {
                    seen.push(w);
                    queue.push_back(w);
                }
            }
        }
        seen.sort();
        seen
    }
}
