//! Exact colourability, chromatic number, and exact colouring counts.
//!
//! Colours are labelled: counts are never divided by k!.

use std::collections::{HashMap, VecDeque};

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::Serialize;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lift::{expand, Lift, LiftedGraph};

pub const DEFAULT_NODE_BUDGET: u64 = 100_000_000;
pub const DEFAULT_COUNT_CAP: usize = 40;
pub const BUDGET_ENV_VAR: &str = "LIFTCHROMA_BUDGET";

/// Search-node budget; running out is reported as `Error::BudgetExhausted`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget(pub u64);

impl Default for Budget {
    fn default() -> Self {
        Budget(DEFAULT_NODE_BUDGET)
    }
}

impl Budget {
    /// Default budget, overridden by `LIFTCHROMA_BUDGET` when it parses.
    pub fn from_env() -> Self {
        std::env::var(BUDGET_ENV_VAR)
            .ok()
            .and_then(|s| s.trim().parse().ok())
            .map(Budget)
            .unwrap_or_default()
    }
}

struct Counter {
    used: u64,
    limit: u64,
}

impl Counter {
    fn new(b: Budget) -> Self {
        Self { used: 0, limit: b.0 }
    }

    fn tick(&mut self) -> Result<()> {
        self.used += 1;
        if self.used > self.limit {
            Err(Error::BudgetExhausted { nodes: self.limit })
        } else {
            Ok(())
        }
    }
}

/// Per-fiber quotas: colours `0..r` get `q + 1`, the rest get `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EquitableSpec {
    pub k: usize,
    pub n: usize,
    pub q: usize,
    pub r: usize,
}

impl EquitableSpec {
    pub fn new(k: usize, n: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be positive".into()));
        }
        Ok(Self { k, n, q: n / k, r: n % k })
    }

    pub fn quota(&self, colour: usize) -> usize {
        if colour < self.r {
            self.q + 1
        } else {
            self.q
        }
    }

    pub fn quotas(&self) -> Vec<usize> {
        (0..self.k).map(|c| self.quota(c)).collect()
    }
}

/// Simple graph view: deduplicated neighbour lists (colouring ignores multiplicity).
fn simple_adjacency(lg: &LiftedGraph) -> Vec<Vec<usize>> {
    lg.weighted_neighbours()
        .into_iter()
        .map(|nb| nb.into_iter().map(|(y, _)| y).collect())
        .collect()
}

fn components(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut comp = vec![usize::MAX; adj.len()];
    let mut out = Vec::new();
    for s in 0..adj.len() {
        if comp[s] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut members = vec![s];
        comp[s] = id;
        let mut queue = VecDeque::from([s]);
        while let Some(x) = queue.pop_front() {
            for &y in &adj[x] {
                if comp[y] == usize::MAX {
                    comp[y] = id;
                    members.push(y);
                    queue.push_back(y);
                }
            }
        }
        out.push(members);
    }
    out
}

/// Induced subgraph on `members` (in BFS order), relabelled 0..len.
fn induced(adj: &[Vec<usize>], members: &[usize]) -> Vec<Vec<usize>> {
    let index: HashMap<usize, usize> = members.iter().enumerate().map(|(i, &x)| (x, i)).collect();
    members
        .iter()
        .map(|x| adj[*x].iter().filter_map(|y| index.get(y).copied()).collect())
        .collect()
}

fn two_coloring(adj: &[Vec<usize>]) -> Option<Vec<usize>> {
    let mut colour = vec![usize::MAX; adj.len()];
    for s in 0..adj.len() {
        if colour[s] != usize::MAX {
            continue;
        }
        colour[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(x) = queue.pop_front() {
            for &y in &adj[x] {
                if colour[y] == usize::MAX {
                    colour[y] = 1 - colour[x];
                    queue.push_back(y);
                } else if colour[y] == colour[x] {
                    return None;
                }
            }
        }
    }
    Some(colour)
}

/// DSATUR greedy colouring; returns the colouring (colours 0..).
fn dsatur_greedy(adj: &[Vec<usize>]) -> Vec<usize> {
    let nv = adj.len();
    let mut colour = vec![usize::MAX; nv];
    let mut seen: Vec<Vec<bool>> = vec![Vec::new(); nv];
    let mut sat = vec![0usize; nv];
    for _ in 0..nv {
        let v = (0..nv)
            .filter(|&v| colour[v] == usize::MAX)
            .max_by_key(|&v| (sat[v], adj[v].len(), std::cmp::Reverse(v)))
            .unwrap();
        let c = (0..).find(|&c| !seen[v].get(c).copied().unwrap_or(false)).unwrap();
        colour[v] = c;
        for &y in &adj[v] {
            if seen[y].len() <= c {
                seen[y].resize(c + 1, false);
            }
            if !seen[y][c] {
                seen[y][c] = true;
                sat[y] += 1;
            }
        }
    }
    colour
}

/// Tabu search for a conflict-free k-colouring. Heuristic only: `None` proves nothing.
fn tabucol(adj: &[Vec<usize>], k: usize, start: &[usize], iterations: u64, seed: u64) -> Option<Vec<usize>> {
    let nv = adj.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut colour: Vec<usize> = start
        .iter()
        .map(|&c| if c < k { c } else { rng.gen_range(0..k) })
        .collect();
    let mut gamma = vec![0i32; nv * k];
    for v in 0..nv {
        for &y in &adj[v] {
            gamma[v * k + colour[y]] += 1;
        }
    }
    let mut conflicts: i64 = (0..nv).map(|v| gamma[v * k + colour[v]] as i64).sum::<i64>() / 2;
    let mut tabu = vec![0u64; nv * k];
    let mut best = conflicts;
    for it in 1..=iterations {
        if conflicts == 0 {
            return Some(colour);
        }
        let mut best_delta = i32::MAX;
        let mut moves: Vec<(usize, usize)> = Vec::new();
        for v in 0..nv {
            let cur = gamma[v * k + colour[v]];
            if cur == 0 {
                continue;
            }
            for c in 0..k {
                if c == colour[v] {
                    continue;
                }
                let delta = gamma[v * k + c] - cur;
                let allowed = tabu[v * k + c] < it || conflicts + (delta as i64) < best;
                if !allowed {
                    continue;
                }
                if delta < best_delta {
                    best_delta = delta;
                    moves.clear();
                }
                if delta == best_delta {
                    moves.push((v, c));
                }
            }
        }
        if moves.is_empty() {
            continue;
        }
        let (v, c) = moves[rng.gen_range(0..moves.len())];
        let old = colour[v];
        for &y in &adj[v] {
            gamma[y * k + old] -= 1;
            gamma[y * k + c] += 1;
        }
        colour[v] = c;
        conflicts += best_delta as i64;
        best = best.min(conflicts);
        let tenure = (0.6 * conflicts as f64) as u64 + rng.gen_range(0..10);
        tabu[v * k + old] = it + tenure;
    }
    (conflicts == 0).then_some(colour)
}

/// Exact backtracking for a k-colouring of a connected graph. Vertex choice is by
/// smallest remaining domain (DSATUR order), with forward checking and the rule that a
/// fresh colour may only be the lowest unused one.
struct ExactSearch<'a> {
    adj: &'a [Vec<usize>],
    k: usize,
    colour: Vec<usize>,
    blocked: Vec<u16>, // blocked[v * k + c] = coloured neighbours of v with colour c
    counter: Counter,
}

impl<'a> ExactSearch<'a> {
    fn new(adj: &'a [Vec<usize>], k: usize, budget: Budget) -> Self {
        Self {
            adj,
            k,
            colour: vec![usize::MAX; adj.len()],
            blocked: vec![0; adj.len() * k],
            counter: Counter::new(budget),
        }
    }

    fn domain_size(&self, v: usize, used: usize) -> usize {
        let row = &self.blocked[v * self.k..(v + 1) * self.k];
        let open = row[..used].iter().filter(|&&b| b == 0).count();
        open + usize::from(used < self.k)
    }

    fn assign(&mut self, v: usize, c: usize) {
        self.colour[v] = c;
        for &y in self.adj[v].iter() {
            self.blocked[y * self.k + c] += 1;
        }
    }

    fn unassign(&mut self, v: usize) {
        let c = std::mem::replace(&mut self.colour[v], usize::MAX);
        for &y in self.adj[v].iter() {
            self.blocked[y * self.k + c] -= 1;
        }
    }

    fn search(&mut self, remaining: usize, used: usize) -> Result<bool> {
        self.counter.tick()?;
        if remaining == 0 {
            return Ok(true);
        }
        let mut pick = None;
        let mut pick_key = (usize::MAX, 0usize);
        for v in 0..self.adj.len() {
            if self.colour[v] != usize::MAX {
                continue;
            }
            let dom = self.domain_size(v, used);
            if dom == 0 {
                return Ok(false);
            }
            let free = self.adj[v].iter().filter(|&&y| self.colour[y] == usize::MAX).count();
            if (dom, usize::MAX - free) < (pick_key.0, usize::MAX - pick_key.1) {
                pick_key = (dom, free);
                pick = Some(v);
            }
        }
        let v = pick.expect("remaining > 0");
        let top = (used + 1).min(self.k);
        for c in 0..top {
            if self.blocked[v * self.k + c] != 0 {
                continue;
            }
            self.assign(v, c);
            let new_used = used.max(c + 1);
            let wiped = self.adj[v].iter().any(|&y| {
                self.colour[y] == usize::MAX && self.domain_size(y, new_used) == 0
            });
            if !wiped && self.search(remaining - 1, new_used)? {
                return Ok(true);
            }
            self.unassign(v);
        }
        Ok(false)
    }
}

fn is_proper(adj: &[Vec<usize>], colour: &[usize]) -> bool {
    adj.iter()
        .enumerate()
        .all(|(x, nb)| nb.iter().all(|&y| colour[x] != colour[y]))
}

fn find_component_coloring(adj: &[Vec<usize>], k: usize, budget: Budget) -> Result<Option<Vec<usize>>> {
    let nv = adj.len();
    let has_edge = adj.iter().any(|nb| !nb.is_empty());
    match k {
        0 => return Ok((nv == 0).then(Vec::new)),
        1 => return Ok((!has_edge).then(|| vec![0; nv])),
        2 => return Ok(two_coloring(adj)),
        _ => {}
    }
    let greedy = dsatur_greedy(adj);
    if greedy.iter().all(|&c| c < k) {
        return Ok(Some(greedy));
    }
    let iterations = 2_000 + 200 * nv as u64;
    if let Some(c) = tabucol(adj, k, &greedy, iterations, nv as u64 ^ (k as u64) << 32) {
        debug_assert!(is_proper(adj, &c));
        return Ok(Some(c));
    }
    let mut search = ExactSearch::new(adj, k, budget);
    if search.search(nv, 0)? {
        Ok(Some(search.colour))
    } else {
        Ok(None)
    }
}

/// A proper k-colouring if one exists, `None` if none exists.
pub fn find_k_coloring(lg: &LiftedGraph, k: usize, budget: Budget) -> Result<Option<Vec<usize>>> {
    let adj = simple_adjacency(lg);
    let mut colour = vec![0usize; adj.len()];
    for members in components(&adj) {
        let sub = induced(&adj, &members);
        match find_component_coloring(&sub, k, budget)? {
            Some(c) => {
                for (i, &x) in members.iter().enumerate() {
                    colour[x] = c[i];
                }
            }
            None => return Ok(None),
        }
    }
    Ok(Some(colour))
}

pub fn is_k_colorable(lg: &LiftedGraph, k: usize) -> Result<bool> {
    is_k_colorable_with(lg, k, Budget::from_env())
}

pub fn is_k_colorable_with(lg: &LiftedGraph, k: usize, budget: Budget) -> Result<bool> {
    Ok(find_k_coloring(lg, k, budget)?.is_some())
}

/// Largest clique, by Bron-Kerbosch with pivoting inside each closed neighbourhood.
fn clique_number(adj: &[Vec<usize>]) -> usize {
    fn bk(adj: &[Vec<usize>], r: usize, mut p: Vec<usize>, mut x: Vec<usize>, best: &mut usize) {
        if p.is_empty() && x.is_empty() {
            *best = (*best).max(r);
            return;
        }
        if r + p.len() <= *best {
            return;
        }
        let pivot = p.iter().chain(&x).copied().max_by_key(|&u| adj[u].iter().filter(|w| p.contains(w)).count()).unwrap();
        let cands: Vec<usize> = p.iter().copied().filter(|v| !adj[pivot].contains(v)).collect();
        for v in cands {
            let np = p.iter().copied().filter(|w| adj[v].contains(w)).collect();
            let nx = x.iter().copied().filter(|w| adj[v].contains(w)).collect();
            bk(adj, r + 1, np, nx, best);
            p.retain(|&w| w != v);
            x.push(v);
        }
    }
    let mut best = usize::from(!adj.is_empty());
    for v in 0..adj.len() {
        let p = adj[v].iter().copied().filter(|&w| w > v).collect();
        let x = adj[v].iter().copied().filter(|&w| w < v).collect();
        bk(adj, 1, p, x, &mut best);
    }
    best
}

/// Bracket on the chromatic number. `lower == upper` means the value is exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ChromaticBounds {
    pub lower: usize,
    pub upper: usize,
}

impl ChromaticBounds {
    pub fn exact(&self) -> Option<usize> {
        (self.lower == self.upper).then_some(self.lower)
    }
}

fn component_bounds(adj: &[Vec<usize>], budget: Budget) -> ChromaticBounds {
    if adj.iter().all(Vec::is_empty) {
        return ChromaticBounds { lower: 1, upper: 1 };
    }
    if two_coloring(adj).is_some() {
        return ChromaticBounds { lower: 2, upper: 2 };
    }
    let mut lower = clique_number(adj).max(3);
    let mut upper = dsatur_greedy(adj).iter().max().unwrap() + 1;
    let mut k = lower;
    while k < upper {
        match find_component_coloring(adj, k, budget) {
            Ok(Some(_)) => upper = k,
            Ok(None) => {
                lower = k + 1;
                k += 1;
            }
            // undecided at k: keep `lower`, but a colouring with more colours can still
            // tighten `upper`
            Err(_) => k += 1,
        }
    }
    ChromaticBounds { lower, upper }
}

pub fn chromatic_bounds(lg: &LiftedGraph, budget: Budget) -> ChromaticBounds {
    let adj = simple_adjacency(lg);
    let mut out = ChromaticBounds { lower: 0, upper: 0 };
    for members in components(&adj) {
        let b = component_bounds(&induced(&adj, &members), budget);
        out.lower = out.lower.max(b.lower);
        out.upper = out.upper.max(b.upper);
    }
    out
}

pub fn chromatic_number(lg: &LiftedGraph) -> Result<usize> {
    chromatic_number_with(lg, Budget::from_env())
}

pub fn chromatic_number_with(lg: &LiftedGraph, budget: Budget) -> Result<usize> {
    chromatic_bounds(lg, budget)
        .exact()
        .ok_or(Error::BudgetExhausted { nodes: budget.0 })
}

fn falling_factorial(k: usize, m: usize) -> BigUint {
    (0..m).fold(BigUint::one(), |acc, i| acc * BigUint::from(k - i))
}

/// Canonical proper colourings of a connected graph, by number of colours used.
/// `order` is a BFS order so each vertex after the first has an earlier neighbour.
fn canonical_counts(adj: &[Vec<usize>], k: usize, counter: &mut Counter) -> Result<Vec<u64>> {
    let nv = adj.len();
    let mut by_used = vec![0u64; k + 1];
    let mut colour = vec![usize::MAX; nv];
    fn go(
        adj: &[Vec<usize>],
        k: usize,
        i: usize,
        used: usize,
        colour: &mut [usize],
        by_used: &mut [u64],
        counter: &mut Counter,
    ) -> Result<()> {
        counter.tick()?;
        if i == adj.len() {
            by_used[used] += 1;
            return Ok(());
        }
        for c in 0..(used + 1).min(k) {
            if adj[i].iter().any(|&y| colour[y] == c) {
                continue;
            }
            colour[i] = c;
            go(adj, k, i + 1, used.max(c + 1), colour, by_used, counter)?;
            colour[i] = usize::MAX;
        }
        Ok(())
    }
    go(adj, k, 0, 0, &mut colour, &mut by_used, counter)?;
    Ok(by_used)
}

fn check_count_cap(lg: &LiftedGraph, cap: usize) -> Result<()> {
    if lg.num_vertices() > cap {
        return Err(Error::TooLarge {
            what: "exact colouring count",
            size: lg.num_vertices() as f64,
            cap: cap as f64,
        });
    }
    Ok(())
}

pub fn count_proper_colorings(lg: &LiftedGraph, k: usize) -> Result<BigUint> {
    count_proper_colorings_with(lg, k, DEFAULT_COUNT_CAP, Budget::from_env())
}

pub fn count_proper_colorings_with(lg: &LiftedGraph, k: usize, cap: usize, budget: Budget) -> Result<BigUint> {
    check_count_cap(lg, cap)?;
    let adj = simple_adjacency(lg);
    let mut counter = Counter::new(budget);
    let mut total = BigUint::one();
    for members in components(&adj) {
        let sub = induced(&adj, &members);
        let by_used = canonical_counts(&sub, k, &mut counter)?;
        let comp: BigUint = by_used
            .iter()
            .enumerate()
            .map(|(m, &c)| falling_factorial(k, m) * BigUint::from(c))
            .sum();
        if comp.is_zero() {
            return Ok(comp);
        }
        total *= comp;
    }
    Ok(total)
}

pub fn count_strongly_equitable(l: &Lift<'_>, k: usize) -> Result<BigUint> {
    count_strongly_equitable_with(l, k, DEFAULT_COUNT_CAP, Budget::from_env())
}

/// Proper colourings in which every fiber meets the quotas of `EquitableSpec::new(k, n)`.
///
/// Components are enumerated separately, keyed by their per-fiber colour usage, and
/// the usage histograms are convolved across components.
pub fn count_strongly_equitable_with(l: &Lift<'_>, k: usize, cap: usize, budget: Budget) -> Result<BigUint> {
    let lg = expand(l);
    check_count_cap(&lg, cap)?;
    let spec = EquitableSpec::new(k, l.n())?;
    let n = l.n();
    let fibers = lg.base_vertices();
    let quotas = spec.quotas();
    let adj = simple_adjacency(&lg);
    let comps = components(&adj);
    let mut counter = Counter::new(budget);

    if comps.len() == 1 && spec.r == 0 {
        return symmetric_connected_count(&adj, &comps[0], n, fibers, &spec, &mut counter);
    }

    let full: Vec<u16> = (0..fibers).flat_map(|_| quotas.iter().map(|&q| q as u16)).collect();
    let mut acc: HashMap<Vec<u16>, BigUint> = HashMap::from([(vec![0u16; fibers * k], BigUint::one())]);
    for members in &comps {
        let sub = induced(&adj, members);
        let fiber_of: Vec<usize> = members.iter().map(|&x| x / n).collect();
        let hist = usage_histogram(&sub, &fiber_of, fibers, k, &quotas, &mut counter)?;
        let mut next: HashMap<Vec<u16>, BigUint> = HashMap::new();
        for (u, a) in &acc {
            for (w, b) in &hist {
                let s: Vec<u16> = u.iter().zip(w).map(|(x, y)| x + y).collect();
                if s.iter().zip(&full).all(|(x, q)| x <= q) {
                    *next.entry(s).or_default() += a * BigUint::from(*b);
                }
            }
        }
        acc = next;
        if acc.is_empty() {
            return Ok(BigUint::zero());
        }
    }
    Ok(acc.remove(&full).unwrap_or_default())
}

/// All colourings of one component within quotas, grouped by per-fiber usage vector.
fn usage_histogram(
    adj: &[Vec<usize>],
    fiber_of: &[usize],
    fibers: usize,
    k: usize,
    quotas: &[usize],
    counter: &mut Counter,
) -> Result<HashMap<Vec<u16>, u64>> {
    let mut usage = vec![0u16; fibers * k];
    let mut colour = vec![usize::MAX; adj.len()];
    let mut out = HashMap::new();
    #[allow(clippy::too_many_arguments)]
    fn go(
        adj: &[Vec<usize>],
        fiber_of: &[usize],
        k: usize,
        quotas: &[usize],
        i: usize,
        colour: &mut [usize],
        usage: &mut [u16],
        out: &mut HashMap<Vec<u16>, u64>,
        counter: &mut Counter,
    ) -> Result<()> {
        counter.tick()?;
        if i == adj.len() {
            *out.entry(usage.to_vec()).or_default() += 1;
            return Ok(());
        }
        let f = fiber_of[i];
        for c in 0..k {
            if usage[f * k + c] as usize >= quotas[c] || adj[i].iter().any(|&y| colour[y] == c) {
                continue;
            }
            colour[i] = c;
            usage[f * k + c] += 1;
            go(adj, fiber_of, k, quotas, i + 1, colour, usage, out, counter)?;
            usage[f * k + c] -= 1;
            colour[i] = usize::MAX;
        }
        Ok(())
    }
    go(adj, fiber_of, k, quotas, 0, &mut colour, &mut usage, &mut out, counter)?;
    Ok(out)
}

/// Connected lift with equal quotas: count colourings in canonical colour order and
/// multiply by k!, since every colour must appear.
fn symmetric_connected_count(
    adj: &[Vec<usize>],
    members: &[usize],
    n: usize,
    fibers: usize,
    spec: &EquitableSpec,
    counter: &mut Counter,
) -> Result<BigUint> {
    let k = spec.k;
    if spec.q == 0 {
        return Ok(BigUint::zero());
    }
    let sub = induced(adj, members);
    let fiber_of: Vec<usize> = members.iter().map(|&x| x / n).collect();
    let mut usage = vec![0usize; fibers * k];
    let mut colour = vec![usize::MAX; sub.len()];
    #[allow(clippy::too_many_arguments)]
    fn go(
        adj: &[Vec<usize>],
        fiber_of: &[usize],
        k: usize,
        q: usize,
        i: usize,
        used: usize,
        colour: &mut [usize],
        usage: &mut [usize],
        counter: &mut Counter,
    ) -> Result<u64> {
        counter.tick()?;
        if i == adj.len() {
            return Ok(1);
        }
        let f = fiber_of[i];
        let mut total = 0;
        for c in 0..(used + 1).min(k) {
            if usage[f * k + c] >= q || adj[i].iter().any(|&y| colour[y] == c) {
                continue;
            }
            colour[i] = c;
            usage[f * k + c] += 1;
            total += go(adj, fiber_of, k, q, i + 1, used.max(c + 1), colour, usage, counter)?;
            usage[f * k + c] -= 1;
            colour[i] = usize::MAX;
        }
        Ok(total)
    }
    let canonical = go(&sub, &fiber_of, k, spec.q, 0, 0, &mut colour, &mut usage, counter)?;
    Ok(falling_factorial(k, k) * BigUint::from(canonical))
}
