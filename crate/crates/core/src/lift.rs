//! n-lifts: one permutation of the fiber per base edge.
//!
//! Convention: `matchings[e][i] = j` joins `(tail, i)` to `(head, j)`. Lifted vertex
//! `(v, i)` has id `v * n + i`.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::base_graph::BaseGraph;
use crate::error::{Error, Result};

pub const DEFAULT_ENUMERATION_CAP: f64 = 1e7;
pub const MAX_CYCLE_LENGTH: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lift<'g> {
    base: &'g BaseGraph,
    n: usize,
    matchings: Vec<Vec<usize>>,
}

/// Serialized form of a lift; the base graph travels separately.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiftRecord {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub matchings: Vec<Vec<usize>>,
}

impl<'g> Lift<'g> {
    pub fn new(base: &'g BaseGraph, n: usize, matchings: Vec<Vec<usize>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("fiber size must be positive".into()));
        }
        if matchings.len() != base.num_edges() {
            return Err(Error::InvalidArgument(format!(
                "{} permutations for {} base edges",
                matchings.len(),
                base.num_edges()
            )));
        }
        for (e, p) in matchings.iter().enumerate() {
            let mut seen = vec![false; n];
            if p.len() != n || !p.iter().all(|&x| x < n && !std::mem::replace(&mut seen[x], true)) {
                return Err(Error::InvalidArgument(format!("matching {e} is not a permutation of [0,{n})")));
            }
        }
        Ok(Self { base, n, matchings })
    }

    pub fn identity(base: &'g BaseGraph, n: usize) -> Result<Self> {
        Self::new(base, n, vec![(0..n).collect(); base.num_edges()])
    }

    pub fn base(&self) -> &'g BaseGraph {
        self.base
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matchings(&self) -> &[Vec<usize>] {
        &self.matchings
    }

    pub fn to_record(&self, seed: Option<u64>) -> LiftRecord {
        LiftRecord { n: self.n, seed, matchings: self.matchings.clone() }
    }

    pub fn from_record(base: &'g BaseGraph, rec: LiftRecord) -> Result<Self> {
        Self::new(base, rec.n, rec.matchings)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-sample seed: `splitmix64(master ^ splitmix64(index))`. Shards that use disjoint
/// index ranges under one master seed never share a stream.
pub fn sample_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index))
}

/// Draws each permutation uniformly with Fisher-Yates. Edge `e` uses ChaCha stream `e`
/// of the generator keyed by `seed`, so the result does not depend on evaluation order.
pub fn sample_lift(g: &BaseGraph, n: usize, seed: u64) -> Result<Lift<'_>> {
    if n == 0 {
        return Err(Error::InvalidArgument("fiber size must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let matchings = (0..g.num_edges())
        .map(|e| {
            rng.set_stream(e as u64);
            rng.set_word_pos(0);
            let mut p: Vec<usize> = (0..n).collect();
            p.shuffle(&mut rng);
            p
        })
        .collect();
    Ok(Lift { base: g, n, matchings })
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// Number of lifts, n!^{|E|}, as a float (for cap checks).
pub fn lift_count(g: &BaseGraph, n: usize) -> f64 {
    (ln_factorial(n) * g.num_edges() as f64).exp()
}

/// All permutations of [0, n) in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut p: Vec<usize> = (0..n).collect();
    loop {
        out.push(p.clone());
        // next lexicographic permutation
        let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| p[i] < p[i + 1]) else {
            return out;
        };
        let j = (i + 1..n).rev().find(|&j| p[j] > p[i]).unwrap();
        p.swap(i, j);
        p[i + 1..].reverse();
    }
}

pub struct LiftEnumerator<'g> {
    base: &'g BaseGraph,
    n: usize,
    perms: Vec<Vec<usize>>,
    odometer: Vec<usize>,
    done: bool,
}

impl<'g> Iterator for LiftEnumerator<'g> {
    type Item = Lift<'g>;

    fn next(&mut self) -> Option<Lift<'g>> {
        if self.done {
            return None;
        }
        let matchings = self.odometer.iter().map(|&i| self.perms[i].clone()).collect();
        let lift = Lift { base: self.base, n: self.n, matchings };
        self.done = true;
        for slot in self.odometer.iter_mut().rev() {
            *slot += 1;
            if *slot < self.perms.len() {
                self.done = false;
                break;
            }
            *slot = 0;
        }
        Some(lift)
    }
}

pub fn enumerate_lifts(g: &BaseGraph, n: usize) -> Result<LiftEnumerator<'_>> {
    enumerate_lifts_capped(g, n, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_lifts_capped(g: &BaseGraph, n: usize, cap: f64) -> Result<LiftEnumerator<'_>> {
    if n == 0 {
        return Err(Error::InvalidArgument("fiber size must be positive".into()));
    }
    let size = lift_count(g, n).round();
    if size > cap {
        return Err(Error::TooLarge { what: "lift enumeration", size, cap });
    }
    Ok(LiftEnumerator {
        base: g,
        n,
        perms: permutations(n),
        odometer: vec![0; g.num_edges()],
        done: false,
    })
}

/// Explicit lifted multigraph. Parallel edges appear repeatedly in the adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LiftedGraph {
    base_vertices: usize,
    n: usize,
    adjacency: Vec<Vec<usize>>,
}

impl LiftedGraph {
    /// Builds from an explicit edge list over ids `v * n + i`.
    pub fn from_edges(base_vertices: usize, n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let total = base_vertices * n;
        let mut adjacency = vec![Vec::new(); total];
        for &(x, y) in edges {
            if x >= total || y >= total {
                return Err(Error::InvalidArgument(format!("edge ({x},{y}) out of range")));
            }
            adjacency[x].push(y);
            adjacency[y].push(x);
        }
        Ok(Self { base_vertices, n, adjacency })
    }

    /// A plain graph with no fiber structure (every vertex its own fiber, n = 1).
    pub fn plain(num_vertices: usize, edges: &[(usize, usize)]) -> Result<Self> {
        Self::from_edges(num_vertices, 1, edges)
    }

    pub fn num_vertices(&self) -> usize {
        self.adjacency.len()
    }

    pub fn num_edges(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn fiber_size(&self) -> usize {
        self.n
    }

    pub fn base_vertices(&self) -> usize {
        self.base_vertices
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }

    pub fn project(&self, x: usize) -> usize {
        x / self.n
    }

    /// Each edge once, as `(x, y)` with `x < y`, repeated for parallel edges.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.num_edges());
        for (x, nb) in self.adjacency.iter().enumerate() {
            out.extend(nb.iter().filter(|&&y| y > x).map(|&y| (x, y)));
        }
        out
    }

    /// Sorted, deduplicated neighbours paired with edge multiplicity.
    pub fn weighted_neighbours(&self) -> Vec<Vec<(usize, u64)>> {
        self.adjacency
            .iter()
            .map(|nb| {
                let mut s = nb.clone();
                s.sort_unstable();
                let mut out: Vec<(usize, u64)> = Vec::with_capacity(s.len());
                for y in s {
                    match out.last_mut() {
                        Some((z, m)) if *z == y => *m += 1,
                        _ => out.push((y, 1)),
                    }
                }
                out
            })
            .collect()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(Vec::len).collect()
    }
}

pub fn expand(l: &Lift<'_>) -> LiftedGraph {
    let n = l.n;
    let g = l.base;
    let mut adjacency = vec![Vec::with_capacity(g.degree()); g.num_vertices() * n];
    for (&(t, h), perm) in g.edges().iter().zip(&l.matchings) {
        for (i, &j) in perm.iter().enumerate() {
            adjacency[t * n + i].push(h * n + j);
            adjacency[h * n + j].push(t * n + i);
        }
    }
    LiftedGraph { base_vertices: g.num_vertices(), n, adjacency }
}

/// True iff `x -> x / n` maps `lg` onto `g` as a covering: the adjacency is symmetric
/// and at every lifted vertex the incident edges project bijectively onto the incident
/// base edges.
pub fn verify_covering(lg: &LiftedGraph, g: &BaseGraph) -> bool {
    if lg.base_vertices != g.num_vertices() || lg.n == 0 {
        return false;
    }
    let mut pair_count: HashMap<(usize, usize), i64> = HashMap::new();
    for (x, nb) in lg.adjacency.iter().enumerate() {
        for &y in nb {
            *pair_count.entry((x, y)).or_default() += 1;
            *pair_count.entry((y, x)).or_default() -= 1;
        }
    }
    if pair_count.values().any(|&c| c != 0) {
        return false;
    }
    let mut base_nb = g.neighbours();
    for nb in &mut base_nb {
        nb.sort_unstable();
    }
    lg.adjacency.iter().enumerate().all(|(x, nb)| {
        let mut proj: Vec<usize> = nb.iter().map(|&y| lg.project(y)).collect();
        proj.sort_unstable();
        proj == base_nb[lg.project(x)]
    })
}

/// Number of cycles of length exactly `j` (unrooted, unoriented). Parallel edges count
/// as distinct, so `j = 2` gives the number of pairs of parallel edges.
pub fn count_cycles(lg: &LiftedGraph, j: usize) -> Result<u64> {
    if !(2..=MAX_CYCLE_LENGTH).contains(&j) {
        return Err(Error::InvalidArgument(format!("cycle length {j} outside [2,{MAX_CYCLE_LENGTH}]")));
    }
    let wn = lg.weighted_neighbours();
    if j == 2 {
        let twice: u64 = wn
            .iter()
            .flatten()
            .map(|&(_, m)| m * m.saturating_sub(1) / 2)
            .sum();
        return Ok(twice / 2);
    }
    // Root each cycle at its smallest vertex; every cycle is then found once per direction.
    let mut on_path = vec![false; wn.len()];
    let mut total = 0u64;
    for s in 0..wn.len() {
        on_path[s] = true;
        total += extend(&wn, s, s, 1, j, 1, &mut on_path);
        on_path[s] = false;
    }
    Ok(total / 2)
}

fn extend(
    wn: &[Vec<(usize, u64)>],
    start: usize,
    at: usize,
    len: usize,
    target: usize,
    weight: u64,
    on_path: &mut [bool],
) -> u64 {
    let mut total = 0;
    if len == target {
        if let Ok(pos) = wn[at].binary_search_by_key(&start, |&(y, _)| y) {
            total += weight * wn[at][pos].1;
        }
        return total;
    }
    for &(y, m) in &wn[at] {
        if y > start && !on_path[y] {
            on_path[y] = true;
            total += extend(wn, start, y, len + 1, target, weight * m, on_path);
            on_path[y] = false;
        }
    }
    total
}
