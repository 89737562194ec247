//! Picking-sequence problem for one order: visit every picking location once
//! on an open path from a start depot to an end depot at minimal cost.
//!
//! [`solve_cutting_planes`] closes the path with a zero-cost arc from the end
//! depot back to the start and repeatedly solves the successor/predecessor
//! assignment model, splits the chosen arcs into connected components and
//! adds a subtour-elimination cut for every component until a single tour
//! remains. The assignment model with cuts is solved exactly: the Hungarian
//! method gives the bound and violated cuts are branched on by forbidding
//! arcs. [`solve_oracle`] (Held-Karp) and [`solve_by_enumeration`] are
//! independent exact checks.
//!
//! Equal-cost optima resolve to the lexicographically smallest node sequence.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::graph::{crowdedness_matrix, distance_matrix, same_cost, CostMatrix, NodeId, RoutingBasis, StoreGraph};

pub const ORACLE_MAX_PICKS: usize = 15;
pub const ENUMERATION_MAX_PICKS: usize = 9;
/// Bitmask-backed arc sets cap the tour at 64 positions.
pub const CUTTING_PLANES_MAX_PICKS: usize = 62;

#[derive(Debug, Clone, PartialEq)]
pub struct SrpInstance {
    /// `[start, picks..., end]`, picks ascending by node id.
    nodes: Vec<NodeId>,
    costs: Vec<f64>,
}

impl SrpInstance {
    /// Restricts `matrix` to `start`, the picks and `end`. The start and end
    /// depot may be the same node.
    pub fn from_matrix(matrix: &CostMatrix, start: NodeId, picks: &[NodeId], end: NodeId) -> Result<Self> {
        let mut sorted = picks.to_vec();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != picks.len() {
            return Err(Error::Contract("picking locations must be distinct".into()));
        }
        if sorted.is_empty() {
            return Err(Error::Contract("an order needs at least one picking location".into()));
        }
        if sorted.contains(&start) || sorted.contains(&end) {
            return Err(Error::Contract("a depot cannot also be a picking location".into()));
        }
        let mut nodes = Vec::with_capacity(sorted.len() + 2);
        nodes.push(start);
        nodes.extend(sorted);
        nodes.push(end);
        let pos: Vec<usize> = nodes
            .iter()
            .map(|&n| matrix.position(n).ok_or(Error::UnknownNode(n)))
            .collect::<Result<_>>()?;
        let k = nodes.len();
        let mut costs = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                costs[i * k + j] = if i == j { 0.0 } else { matrix.at(pos[i], pos[j]) };
            }
        }
        Self::from_costs(nodes, costs)
    }

    /// Raw constructor: `nodes = [start, picks..., end]` with a row-major
    /// cost matrix over those positions.
    pub fn from_costs(nodes: Vec<NodeId>, costs: Vec<f64>) -> Result<Self> {
        let k = nodes.len();
        if k < 3 {
            return Err(Error::Contract("an order needs at least one picking location".into()));
        }
        if costs.len() != k * k {
            return Err(Error::Contract(format!("cost matrix has {} entries, expected {}", costs.len(), k * k)));
        }
        if costs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Contract("cost matrix entries must be finite".into()));
        }
        let picks = &nodes[1..k - 1];
        if picks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Contract("picks must be strictly ascending".into()));
        }
        Ok(Self { nodes, costs })
    }

    pub fn start(&self) -> NodeId {
        self.nodes[0]
    }

    pub fn end(&self) -> NodeId {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn picks(&self) -> &[NodeId] {
        &self.nodes[1..self.nodes.len() - 1]
    }

    fn k(&self) -> usize {
        self.nodes.len()
    }

    #[inline]
    fn c(&self, i: usize, j: usize) -> f64 {
        self.costs[i * self.nodes.len() + j]
    }

    /// Arc cost in the closed-tour model: the end depot returns to the
    /// start for free.
    #[inline]
    fn arc(&self, i: usize, j: usize) -> f64 {
        if i == self.k() - 1 && j == 0 {
            0.0
        } else {
            self.c(i, j)
        }
    }

    /// Left-to-right sum of consecutive entries along `sequence`.
    pub fn sequence_cost(&self, sequence: &[NodeId]) -> Option<f64> {
        let pos: HashMap<NodeId, usize> = self.nodes[1..self.k() - 1].iter().enumerate().map(|(i, &n)| (n, i + 1)).collect();
        let last = self.k() - 1;
        let mut idx = Vec::with_capacity(sequence.len());
        for (i, n) in sequence.iter().enumerate() {
            let p = if i == 0 && *n == self.start() {
                0
            } else if i + 1 == sequence.len() && *n == self.end() {
                last
            } else {
                *pos.get(n)?
            };
            idx.push(p);
        }
        Some(fold_cost(self, &idx))
    }

    /// True when `sequence` is start, a permutation of the picks, end.
    pub fn is_valid_sequence(&self, sequence: &[NodeId]) -> bool {
        if sequence.len() != self.k() || sequence[0] != self.start() || sequence[self.k() - 1] != self.end() {
            return false;
        }
        let mut inner = sequence[1..self.k() - 1].to_vec();
        inner.sort();
        inner == self.picks()
    }
}

fn fold_cost(inst: &SrpInstance, idx: &[usize]) -> f64 {
    idx.windows(2).fold(0.0, |acc, w| acc + inst.c(w[0], w[1]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SrpSolution {
    pub sequence: Vec<NodeId>,
    pub cost: f64,
    /// Rounds in which subtour cuts were added.
    pub cut_rounds: usize,
}

/// Builds the instance for an order on `graph`: picker depot (prep zone) to
/// itself, costs from the chosen routing basis.
pub fn build_instance(graph: &StoreGraph, picks: &[NodeId], basis: RoutingBasis, traffic: Option<&[f64]>) -> Result<SrpInstance> {
    let depot = graph.prep_zone().ok_or_else(|| Error::InvalidLayout("no prep_zone node".into()))?;
    let mut nodes = vec![depot];
    nodes.extend(picks.iter().copied());
    let matrix = basis_matrix(graph, &nodes, basis, traffic)?;
    SrpInstance::from_matrix(&matrix, depot, picks, depot)
}

pub fn basis_matrix(graph: &StoreGraph, nodes: &[NodeId], basis: RoutingBasis, traffic: Option<&[f64]>) -> Result<CostMatrix> {
    match basis {
        RoutingBasis::ArcDistance => distance_matrix(graph, nodes),
        RoutingBasis::ArcCrowdedness => {
            let traffic = traffic.ok_or_else(|| Error::Config("crowdedness basis needs a traffic profile".into()))?;
            crowdedness_matrix(graph, traffic, nodes)
        }
    }
}

// ---------------------------------------------------------------------------
// Assignment subproblem
// ---------------------------------------------------------------------------

/// Min-cost perfect assignment `row -> successor` over the arcs not set in
/// `forbid[row]`. Returns `None` when no perfect assignment exists.
fn assignment(inst: &SrpInstance, forbid: &[u64]) -> Option<(Vec<usize>, f64)> {
    let n = inst.k();
    let inf = f64::INFINITY;
    let cost = |i: usize, j: usize| if forbid[i] >> j & 1 == 1 { inf } else { inst.arc(i, j) };
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            if !delta.is_finite() {
                return None;
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut succ = vec![0usize; n];
    for j in 1..=n {
        succ[p[j] - 1] = j - 1;
    }
    let total = (0..n).map(|i| inst.arc(i, succ[i])).sum();
    Some((succ, total))
}

fn components(succ: &[usize]) -> Vec<u64> {
    let mut seen = 0u64;
    let mut out = Vec::new();
    for s in 0..succ.len() {
        if seen >> s & 1 == 1 {
            continue;
        }
        let mut set = 0u64;
        let mut cur = s;
        while set >> cur & 1 == 0 {
            set |= 1 << cur;
            cur = succ[cur];
        }
        seen |= set;
        out.push(set);
    }
    out
}

/// A subtour cut on node set `S` is violated when every member's successor
/// stays inside `S`.
fn violated(succ: &[usize], set: u64) -> bool {
    let mut rest = set;
    while rest != 0 {
        let i = rest.trailing_zeros() as usize;
        rest &= rest - 1;
        if set >> succ[i] & 1 == 0 {
            return false;
        }
    }
    true
}

struct CutPool {
    cuts: Vec<u64>,
}

impl CutPool {
    fn add(&mut self, set: u64) -> bool {
        if self.cuts.contains(&set) {
            false
        } else {
            self.cuts.push(set);
            true
        }
    }
}

/// Exact minimum of the assignment model subject to the pooled cuts, by
/// depth-first branch and bound over violated cuts. Branches whose bound
/// exceeds `upper` are dropped; any optimum is returned, ties are settled by
/// the caller.
fn solve_with_cuts(inst: &SrpInstance, forbid: &[u64], pool: &CutPool, upper: f64) -> Option<(Vec<usize>, f64)> {
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut stack = vec![forbid.to_vec()];
    while let Some(node) = stack.pop() {
        let Some((succ, bound)) = assignment(inst, &node) else { continue };
        if bound > upper && !same_cost(bound, upper) {
            continue;
        }
        if let Some((_, inc)) = &best {
            if bound > *inc || same_cost(bound, *inc) {
                continue;
            }
        }
        match pool.cuts.iter().find(|&&s| violated(&succ, s)) {
            None => best = Some((succ, bound)),
            Some(&set) => {
                // child t: members before t keep their successor inside S,
                // member t must leave S
                let members: Vec<usize> = (0..inst.k()).filter(|i| set >> i & 1 == 1).collect();
                let all = if inst.k() == 64 { u64::MAX } else { (1u64 << inst.k()) - 1 };
                let mut children = Vec::with_capacity(members.len());
                for (t, &m) in members.iter().enumerate() {
                    let mut child = node.clone();
                    for &q in &members[..t] {
                        child[q] |= all & !set;
                    }
                    child[m] |= set;
                    children.push(child);
                }
                // explore the first child first
                stack.extend(children.into_iter().rev());
            }
        }
    }
    best
}

/// Relax, separate components, cut, repeat. Returns the successor array of
/// the optimal tour under `forbid`, its cost and the number of cut rounds.
fn cut_loop(inst: &SrpInstance, forbid: &[u64], pool: &mut CutPool, upper: f64) -> Option<(Vec<usize>, f64, usize)> {
    let mut rounds = 0;
    loop {
        let (succ, cost) = solve_with_cuts(inst, forbid, pool, upper)?;
        let comps = components(&succ);
        if comps.len() == 1 {
            return Some((succ, cost, rounds));
        }
        rounds += 1;
        let mut added = false;
        for c in comps {
            added |= pool.add(c);
        }
        debug_assert!(added, "a violated cut must be new");
    }
}

fn base_forbid(inst: &SrpInstance) -> Vec<u64> {
    let k = inst.k();
    let (start, end) = (0, k - 1);
    let mut forbid = vec![0u64; k];
    for (i, f) in forbid.iter_mut().enumerate() {
        *f |= 1 << i;
    }
    // the end depot closes the tour back to the start
    for j in 0..k {
        if j != start {
            forbid[end] |= 1 << j;
        }
    }
    forbid[start] |= 1 << end;
    forbid
}

/// Greedy open path start, nearest unvisited pick, ..., end.
fn nearest_neighbor(inst: &SrpInstance) -> Vec<usize> {
    let k = inst.k();
    let mut seq = vec![0];
    let mut left: Vec<usize> = (1..k - 1).collect();
    while !left.is_empty() {
        let cur = *seq.last().unwrap();
        let (i, _) = left
            .iter()
            .enumerate()
            .min_by(|a, b| inst.c(cur, *a.1).total_cmp(&inst.c(cur, *b.1)))
            .unwrap();
        seq.push(left.remove(i));
    }
    seq.push(k - 1);
    seq
}

fn tour_positions(succ: &[usize]) -> Vec<usize> {
    let end = succ.len() - 1;
    let mut seq = vec![0];
    let mut cur = 0;
    while cur != end {
        cur = succ[cur];
        seq.push(cur);
    }
    seq
}

/// Exact solve by cutting planes on the assignment relaxation.
pub fn solve_cutting_planes(inst: &SrpInstance) -> Result<SrpSolution> {
    let k = inst.k();
    if k - 2 > CUTTING_PLANES_MAX_PICKS {
        return Err(Error::InstanceTooLarge { picks: k - 2, limit: CUTTING_PLANES_MAX_PICKS });
    }
    let mut pool = CutPool { cuts: Vec::new() };
    let forbid = base_forbid(inst);
    let upper = fold_cost(inst, &nearest_neighbor(inst));
    let (succ, opt, cut_rounds) = cut_loop(inst, &forbid, &mut pool, upper).ok_or_else(|| Error::Contract("instance has no feasible sequence".into()))?;
    let mut seq = tour_positions(&succ);

    // Canonicalize among equal-cost optima: fix the sequence position by
    // position, trying smaller node ids first.
    let mut fixed = forbid.clone();
    for pos in 1..k - 1 {
        let prev = seq[pos - 1];
        let current = seq[pos];
        let placed: u64 = seq[..pos].iter().fold(0, |m, &i| m | 1 << i);
        for cand in 1..current {
            if placed >> cand & 1 == 1 {
                continue;
            }
            let mut trial = fixed.clone();
            trial[prev] |= !(1u64 << cand);
            match assignment(inst, &trial) {
                Some((_, bound)) if bound < opt || same_cost(bound, opt) => {}
                _ => continue,
            }
            if let Some((s, c, _)) = cut_loop(inst, &trial, &mut pool, opt) {
                if same_cost(c, opt) {
                    seq = tour_positions(&s);
                    break;
                }
            }
        }
        fixed[prev] |= !(1u64 << seq[pos]);
    }

    let sequence = seq.iter().map(|&i| inst.nodes[i]).collect();
    Ok(SrpSolution { sequence, cost: fold_cost(inst, &seq), cut_rounds })
}

/// Held-Karp subset dynamic program over the open path.
pub fn solve_oracle(inst: &SrpInstance) -> Result<SrpSolution> {
    let m = inst.k() - 2;
    if m > ORACLE_MAX_PICKS {
        return Err(Error::InstanceTooLarge { picks: m, limit: ORACLE_MAX_PICKS });
    }
    let end = m + 1;
    let full = (1usize << m) - 1;
    // g[set][i]: cheapest completion from pick i (position i+1) through all
    // picks in `set` (which excludes i) to the end depot
    let mut g = vec![f64::INFINITY; (full + 1) * m];
    for i in 0..m {
        g[i] = inst.c(i + 1, end);
    }
    for set in 1..=full {
        for i in 0..m {
            if set >> i & 1 == 1 {
                continue;
            }
            let mut best = f64::INFINITY;
            let mut rest = set;
            while rest != 0 {
                let j = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                let v = inst.c(i + 1, j + 1) + g[(set & !(1 << j)) * m + j];
                if v < best {
                    best = v;
                }
            }
            g[set * m + i] = best;
        }
    }
    let opt = (0..m).map(|j| inst.c(0, j + 1) + g[(full & !(1 << j)) * m + j]).fold(f64::INFINITY, f64::min);

    let mut seq = vec![0usize];
    let mut remaining = full;
    let mut cur = 0usize;
    let mut target = opt;
    while remaining != 0 {
        // picks are ascending by node id, so the first match is the smallest
        let j = (0..m)
            .filter(|j| remaining >> j & 1 == 1)
            .find(|&j| same_cost(inst.c(cur, j + 1) + g[(remaining & !(1 << j)) * m + j], target))
            .expect("Held-Karp table is consistent");
        target = g[(remaining & !(1 << j)) * m + j];
        remaining &= !(1 << j);
        cur = j + 1;
        seq.push(cur);
    }
    seq.push(end);
    let sequence = seq.iter().map(|&i| inst.nodes[i]).collect();
    Ok(SrpSolution { sequence, cost: fold_cost(inst, &seq), cut_rounds: 0 })
}

/// Enumerates every permutation of the picks in lexicographic order.
pub fn solve_by_enumeration(inst: &SrpInstance) -> Result<SrpSolution> {
    let m = inst.k() - 2;
    if m > ENUMERATION_MAX_PICKS {
        return Err(Error::InstanceTooLarge { picks: m, limit: ENUMERATION_MAX_PICKS });
    }
    let mut perm: Vec<usize> = (1..=m).collect();
    let mut best: Option<(Vec<usize>, f64)> = None;
    loop {
        let mut idx = Vec::with_capacity(m + 2);
        idx.push(0);
        idx.extend(&perm);
        idx.push(m + 1);
        let c = fold_cost(inst, &idx);
        let replace = match &best {
            None => true,
            Some((_, b)) => c < *b && !same_cost(c, *b),
        };
        if replace {
            best = Some((idx, c));
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    let (idx, cost) = best.expect("at least one permutation");
    Ok(SrpSolution { sequence: idx.iter().map(|&i| inst.nodes[i]).collect(), cost, cut_rounds: 0 })
}

fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Sequences orders for the simulator from a precomputed depot-and-products
/// cost matrix.
#[derive(Debug, Clone)]
pub struct SrpSequencer {
    matrix: CostMatrix,
    depot: NodeId,
    /// Solved orders keyed by their sorted picks; shared between clones.
    memo: Arc<Mutex<HashMap<Vec<NodeId>, Vec<NodeId>>>>,
}

/// Orders remembered per sequencer before the memo stops growing.
pub const SEQUENCER_MEMO_LIMIT: usize = 1 << 16;

impl SrpSequencer {
    pub fn new(graph: &StoreGraph, basis: RoutingBasis, traffic: Option<&[f64]>) -> Result<Self> {
        let depot = graph.prep_zone().ok_or_else(|| Error::InvalidLayout("no prep_zone node".into()))?;
        let mut nodes = vec![depot];
        nodes.extend(graph.product_nodes());
        let matrix = basis_matrix(graph, &nodes, basis, traffic)?;
        Ok(Self { matrix, depot, memo: Arc::default() })
    }

    pub fn basis(&self) -> RoutingBasis {
        self.matrix.basis
    }

    /// Picking sequence for `picks`, depots stripped.
    pub fn sequence(&self, picks: &[NodeId]) -> Result<Vec<NodeId>> {
        let mut key = picks.to_vec();
        key.sort();
        if let Some(hit) = self.memo.lock().expect("memo lock").get(&key) {
            return Ok(hit.clone());
        }
        let inst = SrpInstance::from_matrix(&self.matrix, self.depot, picks, self.depot)?;
        let sol = solve_cutting_planes(&inst)?;
        let seq = sol.sequence[1..sol.sequence.len() - 1].to_vec();
        let mut memo = self.memo.lock().expect("memo lock");
        if memo.len() < SEQUENCER_MEMO_LIMIT {
            memo.insert(key, seq.clone());
        }
        Ok(seq)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn inst(k: usize, f: impl Fn(usize, usize) -> f64) -> SrpInstance {
        let nodes: Vec<NodeId> = (0..k).map(NodeId).collect();
        let mut costs = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    costs[i * k + j] = f(i, j);
                }
            }
        }
        SrpInstance::from_costs(nodes, costs).unwrap()
    }

    fn random_inst(rng: &mut ChaCha8Rng, m: usize, symmetric: bool) -> SrpInstance {
        let k = m + 2;
        let mut c = vec![vec![0.0; k]; k];
        for i in 0..k {
            for j in 0..k {
                if i != j && (!symmetric || i < j) {
                    c[i][j] = rng.random_range(1..30) as f64;
                    if symmetric {
                        c[j][i] = c[i][j];
                    }
                }
            }
        }
        inst(k, |i, j| c[i][j])
    }

    #[test]
    fn single_pick_is_forced() {
        let i = inst(3, |a, b| (10 * a + b) as f64);
        for sol in [solve_cutting_planes(&i).unwrap(), solve_oracle(&i).unwrap(), solve_by_enumeration(&i).unwrap()] {
            assert_eq!(sol.sequence, vec![NodeId(0), NodeId(1), NodeId(2)]);
            assert_eq!(sol.cost, 1.0 + 12.0);
        }
    }

    #[test]
    fn equilateral_costs_give_five_d() {
        // four picks, every pair (depots included) at distance d
        let d = 2.5;
        let i = inst(6, |_, _| d);
        for sol in [solve_cutting_planes(&i).unwrap(), solve_oracle(&i).unwrap(), solve_by_enumeration(&i).unwrap()] {
            assert_eq!(sol.cost, 5.0 * d);
            assert_eq!(sol.sequence, (0..6).map(NodeId).collect::<Vec<_>>());
        }
    }

    #[test]
    fn cheap_two_cycle_forces_a_cut() {
        // picks 1,2,3; c(1,2)+c(2,1) is nearly free so the relaxation pairs
        // them into a subtour
        let i = inst(5, |a, b| match (a, b) {
            (1, 2) | (2, 1) => 0.1,
            _ => 10.0,
        });
        let sol = solve_cutting_planes(&i).unwrap();
        assert!(sol.cut_rounds >= 1);
        assert_eq!(sol.cost, solve_oracle(&i).unwrap().cost);
        assert!(i.is_valid_sequence(&sol.sequence));
    }

    #[test]
    fn oracles_agree_with_each_other() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for m in 1..=8 {
            for _ in 0..20 {
                let i = random_inst(&mut rng, m, m % 2 == 0);
                let a = solve_oracle(&i).unwrap();
                let b = solve_by_enumeration(&i).unwrap();
                assert_eq!(a.cost, b.cost);
                assert_eq!(a.sequence, b.sequence);
            }
        }
    }

    #[test]
    fn cutting_planes_matches_oracle_with_lexicographic_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for m in 1..=8 {
            for _ in 0..30 {
                // small integer range makes ties frequent
                let k = m + 2;
                let c: Vec<f64> = (0..k * k).map(|_| rng.random_range(1..4) as f64).collect();
                let i = inst(k, |a, b| c[a * k + b]);
                let cp = solve_cutting_planes(&i).unwrap();
                let hk = solve_oracle(&i).unwrap();
                assert_eq!(cp.cost, hk.cost, "m={m}");
                assert_eq!(cp.sequence, hk.sequence, "m={m}");
            }
        }
    }

    #[test]
    fn oracle_rejects_large_instances() {
        let i = inst(ORACLE_MAX_PICKS + 3, |_, _| 1.0);
        assert!(matches!(solve_oracle(&i), Err(Error::InstanceTooLarge { .. })));
        let i = inst(ENUMERATION_MAX_PICKS + 3, |_, _| 1.0);
        assert!(matches!(solve_by_enumeration(&i), Err(Error::InstanceTooLarge { .. })));
    }

    #[test]
    fn instance_contracts() {
        assert!(SrpInstance::from_costs(vec![NodeId(0), NodeId(1)], vec![0.0; 4]).is_err());
        let nodes = vec![NodeId(0), NodeId(2), NodeId(1), NodeId(3)];
        assert!(SrpInstance::from_costs(nodes, vec![1.0; 16]).is_err());
        let nodes = vec![NodeId(0), NodeId(1), NodeId(2)];
        assert!(SrpInstance::from_costs(nodes, vec![f64::INFINITY; 9]).is_err());
    }

    #[test]
    fn scaling_keeps_the_argmin() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for m in 2..=7 {
            let i = random_inst(&mut rng, m, false);
            let scaled = SrpInstance::from_costs(i.nodes.clone(), i.costs.iter().map(|c| c * 4.0).collect()).unwrap();
            let a = solve_cutting_planes(&i).unwrap();
            let b = solve_cutting_planes(&scaled).unwrap();
            assert_eq!(a.sequence, b.sequence);
            assert_eq!(a.cost * 4.0, b.cost);
        }
    }
}
