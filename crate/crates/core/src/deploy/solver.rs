//! Exact weighted set cover: choose columns so that every row contains at
//! least one chosen column, at minimum total cost.

use std::time::{Duration, Instant};

use thiserror::Error;

/// A covering program. Each row lists the columns that satisfy it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverProblem {
    pub costs: Vec<u64>,
    pub rows: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverSolution {
    pub chosen: Vec<usize>,
    pub objective: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub nodes: u64,
    pub time: Duration,
}

impl Default for Limits {
    fn default() -> Self {
        Self { nodes: 5_000_000, time: Duration::from_secs(60) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolverError {
    #[error("row {0} has no columns")]
    Infeasible(usize),
    #[error("search limit reached; best known objective {best:?}, lower bound {bound}")]
    Limit { best: Option<u64>, bound: u64 },
}

/// True when `a` is preferred over `b` among equal-cost solutions: the
/// smallest column chosen by exactly one of them belongs to `a`.
pub fn preferred(a: &[usize], b: &[usize]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
            std::cmp::Ordering::Less => return true,
            std::cmp::Ordering::Greater => return false,
        }
    }
    i < a.len()
}

/// Minimum-cost cover; ties go to the [`preferred`] column set.
pub fn solve(problem: &CoverProblem, limits: Limits) -> Result<CoverSolution, SolverError> {
    let n = problem.costs.len();
    let mut rows: Vec<Vec<usize>> = Vec::with_capacity(problem.rows.len());
    for (ri, r) in problem.rows.iter().enumerate() {
        let mut r: Vec<usize> = r.iter().copied().filter(|&c| c < n).collect();
        r.sort_unstable();
        r.dedup();
        if r.is_empty() {
            return Err(SolverError::Infeasible(ri));
        }
        rows.push(r);
    }
    rows.sort();
    rows.dedup();

    let mut chosen = Vec::new();
    let mut search = Search { costs: &problem.costs, nodes: 0, limits, started: Instant::now() };
    for component in components(n, &rows) {
        chosen.extend(search.component(&component)?);
    }
    chosen.sort_unstable();
    let objective = chosen.iter().map(|&c| problem.costs[c]).sum();
    Ok(CoverSolution { chosen, objective })
}

/// Groups rows that share columns.
fn components(n: usize, rows: &[Vec<usize>]) -> Vec<Vec<Vec<usize>>> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut x = x;
        while p[x] != r {
            let next = p[x];
            p[x] = r;
            x = next;
        }
        r
    }
    for r in rows {
        for w in r.windows(2) {
            let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<Vec<usize>>> = Default::default();
    for r in rows {
        let root = find(&mut parent, r[0]);
        groups.entry(root).or_default().push(r.clone());
    }
    groups.into_values().collect()
}

struct Search<'a> {
    costs: &'a [u64],
    nodes: u64,
    limits: Limits,
    started: Instant,
}

struct Frame {
    chosen: Vec<usize>,
    cost: u64,
    banned: Vec<usize>,
}

impl Search<'_> {
    fn component(&mut self, rows: &[Vec<usize>]) -> Result<Vec<usize>, SolverError> {
        let rows = self.drop_dominated(rows);
        let mut best = self.greedy(&rows);
        let root_bound = self.lower_bound(&rows);
        let mut stack = vec![Frame { chosen: Vec::new(), cost: 0, banned: Vec::new() }];
        while let Some(mut f) = stack.pop() {
            self.nodes += 1;
            if self.nodes > self.limits.nodes || self.started.elapsed() > self.limits.time {
                return Err(SolverError::Limit { best: Some(self.cost_of(&best)), bound: root_bound });
            }
            // Unit propagation over rows left with a single usable column.
            let open = loop {
                let open: Vec<Vec<usize>> = rows
                    .iter()
                    .filter(|r| !r.iter().any(|c| f.chosen.contains(c)))
                    .map(|r| r.iter().copied().filter(|c| !f.banned.contains(c)).collect())
                    .collect();
                if open.iter().any(Vec::is_empty) {
                    break None;
                }
                match open.iter().find(|r| r.len() == 1) {
                    Some(r) => {
                        f.chosen.push(r[0]);
                        f.cost += self.costs[r[0]];
                    }
                    None => break Some(open),
                }
            };
            let Some(open) = open else { continue };
            let best_cost = self.cost_of(&best);
            if f.cost + self.lower_bound(&open) > best_cost {
                continue;
            }
            if open.is_empty() {
                let mut sol = f.chosen.clone();
                sol.sort_unstable();
                if f.cost < best_cost || preferred(&sol, &best) {
                    best = sol;
                }
                continue;
            }
            let branch = open.iter().min_by_key(|r| (r.len(), r[0])).unwrap();
            // Push in reverse so the smallest column is explored first.
            for (k, &c) in branch.iter().enumerate().rev() {
                let mut chosen = f.chosen.clone();
                chosen.push(c);
                let mut banned = f.banned.clone();
                banned.extend_from_slice(&branch[..k]);
                stack.push(Frame { chosen, cost: f.cost + self.costs[c], banned });
            }
        }
        Ok(best)
    }

    fn cost_of(&self, cols: &[usize]) -> u64 {
        cols.iter().map(|&c| self.costs[c]).sum()
    }

    /// Removes column v when some column u covers every row v covers and
    /// either costs strictly less or costs the same and is preferred.
    fn drop_dominated(&self, rows: &[Vec<usize>]) -> Vec<Vec<usize>> {
        let mut cols: Vec<usize> = rows.iter().flatten().copied().collect();
        cols.sort_unstable();
        cols.dedup();
        let cover = |c: usize| -> Vec<usize> { (0..rows.len()).filter(|&r| rows[r].binary_search(&c).is_ok()).collect() };
        let covers: Vec<Vec<usize>> = cols.iter().map(|&c| cover(c)).collect();
        let mut dropped = vec![false; cols.len()];
        for v in 0..cols.len() {
            for u in 0..cols.len() {
                if u == v || dropped[u] {
                    continue;
                }
                let (cu, cv) = (self.costs[cols[u]], self.costs[cols[v]]);
                let better = cu < cv || (cu == cv && u < v);
                if better && covers[v].iter().all(|r| covers[u].binary_search(r).is_ok()) {
                    dropped[v] = true;
                    break;
                }
            }
        }
        rows.iter()
            .map(|r| r.iter().copied().filter(|c| !dropped[cols.binary_search(c).unwrap()]).collect())
            .collect()
    }

    /// Greedy cover by cost per newly covered row.
    fn greedy(&self, rows: &[Vec<usize>]) -> Vec<usize> {
        let mut covered = vec![false; rows.len()];
        let mut chosen = Vec::new();
        while covered.iter().any(|c| !c) {
            let mut counts: std::collections::BTreeMap<usize, u64> = Default::default();
            for (_, row) in rows.iter().enumerate().filter(|(r, _)| !covered[*r]) {
                for &c in row {
                    *counts.entry(c).or_default() += 1;
                }
            }
            let (&c, _) = counts
                .iter()
                .min_by(|(a, na), (b, nb)| (self.costs[**a] * **nb).cmp(&(self.costs[**b] * **na)).then(a.cmp(b)))
                .unwrap();
            chosen.push(c);
            for (r, row) in rows.iter().enumerate() {
                if row.contains(&c) {
                    covered[r] = true;
                }
            }
        }
        chosen.sort_unstable();
        chosen
    }

    /// Sum of the cheapest column over a set of rows sharing no columns.
    fn lower_bound(&self, rows: &[Vec<usize>]) -> u64 {
        let mut order: Vec<&Vec<usize>> = rows.iter().collect();
        order.sort_by_key(|r| std::cmp::Reverse(r.iter().map(|&c| self.costs[c]).min().unwrap_or(0)));
        let mut used: Vec<usize> = Vec::new();
        let mut bound = 0;
        for r in order {
            if r.iter().any(|c| used.contains(c)) {
                continue;
            }
            bound += r.iter().map(|&c| self.costs[c]).min().unwrap_or(0);
            used.extend_from_slice(r);
        }
        bound
    }
}
