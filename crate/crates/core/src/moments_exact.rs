//! Exact first and second moments of colouring counts over the uniform lift, as finite
//! sums in big-integer arithmetic, plus the brute-force enumeration oracle.

use std::collections::HashMap;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::base_graph::BaseGraph;
use crate::coloring::EquitableSpec;
use crate::error::{Error, Result};
use crate::lift::{enumerate_lifts_capped, Lift, DEFAULT_ENUMERATION_CAP};

pub const DEFAULT_PROFILE_CAP: f64 = 1e7;

fn factorials(n: usize) -> Vec<BigUint> {
    let mut f = Vec::with_capacity(n + 1);
    f.push(BigUint::one());
    for i in 1..=n {
        let next = &f[i - 1] * BigUint::from(i);
        f.push(next);
    }
    f
}

fn multinomial(fact: &[BigUint], parts: &[usize]) -> BigUint {
    let total: usize = parts.iter().sum();
    let denom = parts.iter().fold(BigUint::one(), |acc, &p| acc * &fact[p]);
    &fact[total] / denom
}

#[cfg(test)]
fn to_rational(x: BigUint) -> BigRational {
    BigRational::from_integer(BigInt::from(x))
}

fn binomial_f64(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Compositions of `total` into `parts` nonnegative integers, lexicographic.
pub fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    fn go(rem: usize, parts: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            cur.push(rem);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for x in 0..=rem {
            cur.push(x);
            go(rem - x, parts - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if parts > 0 {
        go(total, parts, &mut Vec::new(), &mut out);
    } else if total == 0 {
        out.push(Vec::new());
    }
    out
}

/// Nonnegative integer matrices (row-major) with the given margins and allowed cells.
pub fn masked_tables(rows: &[usize], cols: &[usize], allowed: &dyn Fn(usize, usize) -> bool) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for_each_table(rows, cols, allowed, &mut |t| out.push(t.to_vec()));
    out
}

/// Depth-first over cells with column-capacity pruning; the last allowed cell of each
/// row takes whatever the row still needs.
fn for_each_table(
    rows: &[usize],
    cols: &[usize],
    allowed: &dyn Fn(usize, usize) -> bool,
    visit: &mut dyn FnMut(&[usize]),
) {
    let (nr, nc) = (rows.len(), cols.len());
    if rows.iter().sum::<usize>() != cols.iter().sum::<usize>() {
        return;
    }
    let mut table = vec![0usize; nr * nc];
    let mut cap = cols.to_vec();
    #[allow(clippy::too_many_arguments)]
    fn cell(
        i: usize,
        j: usize,
        row_left: usize,
        rows: &[usize],
        nc: usize,
        allowed: &dyn Fn(usize, usize) -> bool,
        table: &mut [usize],
        cap: &mut [usize],
        visit: &mut dyn FnMut(&[usize]),
    ) {
        let nr = rows.len();
        if i == nr {
            if cap.iter().all(|&c| c == 0) {
                visit(table);
            }
            return;
        }
        if j == nc {
            if row_left == 0 {
                let next = if i + 1 < nr { rows[i + 1] } else { 0 };
                cell(i + 1, 0, next, rows, nc, allowed, table, cap, visit);
            }
            return;
        }
        if !allowed(i, j) {
            cell(i, j + 1, row_left, rows, nc, allowed, table, cap, visit);
            return;
        }
        let room: usize = (j + 1..nc).filter(|&jj| allowed(i, jj)).map(|jj| cap[jj]).sum();
        let lo = row_left.saturating_sub(room);
        let hi = row_left.min(cap[j]);
        for x in lo..=hi {
            if lo > hi {
                break;
            }
            table[i * nc + j] = x;
            cap[j] -= x;
            cell(i, j + 1, row_left - x, rows, nc, allowed, table, cap, visit);
            cap[j] += x;
        }
        table[i * nc + j] = 0;
    }
    if nr == 0 {
        visit(&table);
        return;
    }
    cell(0, 0, rows[0], rows, nc, allowed, &mut table, &mut cap, visit);
}

/// Σ_b r! c! / Π b! over masked tables b with margins (r, c). For fixed colourings of
/// two fibers with histograms r and c, this counts the matchings between them that
/// only join allowed colour pairs.
fn edge_weight(fact: &[BigUint], rows: &[usize], cols: &[usize], allowed: &dyn Fn(usize, usize) -> bool) -> BigUint {
    let nc = cols.len();
    let mut sum = BigUint::zero();
    for_each_table(rows, cols, allowed, &mut |t| {
        let mut term = BigUint::one();
        for (i, &r) in rows.iter().enumerate() {
            term *= multinomial_row(fact, r, &t[i * nc..(i + 1) * nc]);
        }
        sum += term;
    });
    let col_fact = cols.iter().fold(BigUint::one(), |acc, &c| acc * &fact[c]);
    sum * col_fact
}

fn multinomial_row(fact: &[BigUint], total: usize, parts: &[usize]) -> BigUint {
    let denom = parts.iter().fold(BigUint::one(), |acc, &p| acc * &fact[p]);
    &fact[total] / denom
}

fn check_cap(what: &'static str, size: f64, cap: f64) -> Result<()> {
    if size > cap {
        Err(Error::TooLarge { what, size, cap })
    } else {
        Ok(())
    }
}

/// Σ over assignments of one composition per vertex of Π_v multinom · Π_e weight(e).
fn profile_sum(
    g: &BaseGraph,
    fact: &[BigUint],
    per_vertex: &[Vec<usize>],
    weight: &mut dyn FnMut(usize, usize) -> BigUint,
) -> BigUint {
    let nv = g.num_vertices();
    let vertex_factor: Vec<BigUint> = per_vertex.iter().map(|p| multinomial(fact, p)).collect();
    let mut choice = vec![0usize; nv];
    let mut total = BigUint::zero();
    loop {
        let mut term = choice.iter().fold(BigUint::one(), |acc, &c| acc * &vertex_factor[c]);
        for &(t, h) in g.edges() {
            if term.is_zero() {
                break;
            }
            term *= weight(choice[t], choice[h]);
        }
        total += term;
        let mut carry = true;
        for slot in choice.iter_mut().rev() {
            *slot += 1;
            if *slot < per_vertex.len() {
                carry = false;
                break;
            }
            *slot = 0;
        }
        if carry {
            return total;
        }
    }
}

fn lift_count_big(fact: &[BigUint], n: usize, edges: usize) -> BigUint {
    num_traits::pow(fact[n].clone(), edges)
}

/// E[X] for X the number of proper k-colourings of a uniform n-lift of `g`.
pub fn expected_x_exact(g: &BaseGraph, n: usize, k: usize) -> Result<BigRational> {
    expected_x_exact_capped(g, n, k, DEFAULT_PROFILE_CAP)
}

pub fn expected_x_exact_capped(g: &BaseGraph, n: usize, k: usize, cap: f64) -> Result<BigRational> {
    if n == 0 || k == 0 {
        return Err(Error::InvalidArgument("n and k must be positive".into()));
    }
    let comps = compositions(n, k);
    check_cap("colour-profile lattice", (comps.len() as f64).powi(g.num_vertices() as i32), cap)?;
    let fact = factorials(n);
    let mut cache: HashMap<(usize, usize), BigUint> = HashMap::new();
    let allowed = |i: usize, j: usize| i != j;
    let total = profile_sum(g, &fact, &comps, &mut |a, b| {
        cache
            .entry((a, b))
            .or_insert_with(|| edge_weight(&fact, &comps[a], &comps[b], &allowed))
            .clone()
    });
    Ok(BigRational::new(
        BigInt::from(total),
        BigInt::from(lift_count_big(&fact, n, g.num_edges())),
    ))
}

/// Number of (lift, proper colouring) pairs in which vertex v's fiber has colour
/// histogram `hist[v]`.
pub fn x_profile_weight(g: &BaseGraph, n: usize, hist: &[Vec<usize>]) -> Result<BigUint> {
    if hist.len() != g.num_vertices() || hist.iter().any(|h| h.iter().sum::<usize>() != n) {
        return Err(Error::InvalidArgument("each fiber histogram must sum to n".into()));
    }
    let fact = factorials(n);
    let allowed = |i: usize, j: usize| i != j;
    let mut term = hist.iter().fold(BigUint::one(), |acc, h| acc * multinomial(&fact, h));
    for &(t, h) in g.edges() {
        term *= edge_weight(&fact, &hist[t], &hist[h], &allowed);
    }
    Ok(term)
}

/// E[Y] for Y the number of strongly equitable k-colourings; requires k | n.
pub fn expected_y_exact(g: &BaseGraph, n: usize, k: usize) -> Result<BigRational> {
    if k == 0 || n % k != 0 {
        return Err(Error::InvalidArgument(format!("{k} does not divide {n}")));
    }
    expected_y_exact_extended(g, n, k)
}

/// E[Y] with quotas q+1 for the first n mod k colours and q for the rest.
///
/// With the vertex histograms pinned, the sum factors over edges:
/// multinom(n; Q)^{|V|} · (W(Q,Q)/n!)^{|E|}.
pub fn expected_y_exact_extended(g: &BaseGraph, n: usize, k: usize) -> Result<BigRational> {
    let spec = EquitableSpec::new(k, n)?;
    let quotas = spec.quotas();
    let fact = factorials(n);
    let allowed = |i: usize, j: usize| i != j;
    let w = edge_weight(&fact, &quotas, &quotas, &allowed);
    let vertex = multinomial(&fact, &quotas);
    let num = num_traits::pow(vertex, g.num_vertices()) * num_traits::pow(w, g.num_edges());
    Ok(BigRational::new(
        BigInt::from(num),
        BigInt::from(lift_count_big(&fact, n, g.num_edges())),
    ))
}

/// The same quantity summed jointly over all per-edge tables, without factoring.
pub fn expected_y_exact_unfactorized(g: &BaseGraph, n: usize, k: usize, cap: f64) -> Result<BigRational> {
    let spec = EquitableSpec::new(k, n)?;
    let quotas = spec.quotas();
    let fact = factorials(n);
    let tables = masked_tables(&quotas, &quotas, &|i, j| i != j);
    check_cap("joint edge-table lattice", (tables.len() as f64).powi(g.num_edges() as i32), cap)?;
    let qfact = quotas.iter().fold(BigUint::one(), |acc, &q| acc * &fact[q]);
    let terms: Vec<BigUint> = tables
        .iter()
        .map(|t| {
            let denom = t.iter().fold(BigUint::one(), |acc, &b| acc * &fact[b]);
            &qfact * &qfact / denom
        })
        .collect();
    let vertex = num_traits::pow(multinomial(&fact, &quotas), g.num_vertices());
    let mut total = BigUint::zero();
    let mut choice = vec![0usize; g.num_edges()];
    if !terms.is_empty() {
        loop {
            total += choice.iter().fold(BigUint::one(), |acc, &c| acc * &terms[c]);
            let mut carry = true;
            for slot in choice.iter_mut().rev() {
                *slot += 1;
                if *slot < terms.len() {
                    carry = false;
                    break;
                }
                *slot = 0;
            }
            if carry {
                break;
            }
        }
    }
    Ok(BigRational::new(
        BigInt::from(vertex * total),
        BigInt::from(lift_count_big(&fact, n, g.num_edges())),
    ))
}

/// E[Y^2]: a sum over pairs of strongly equitable colourings, indexed by the k x k
/// overlap table of each fiber (row and column sums n/k).
pub fn expected_y2_exact(g: &BaseGraph, n: usize, k: usize) -> Result<BigRational> {
    expected_y2_exact_capped(g, n, k, DEFAULT_PROFILE_CAP)
}

pub fn expected_y2_exact_capped(g: &BaseGraph, n: usize, k: usize, cap: f64) -> Result<BigRational> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    let fact = factorials(n);
    let denom = BigInt::from(lift_count_big(&fact, n, g.num_edges()));
    if n % k != 0 {
        return Ok(BigRational::zero());
    }
    let q = n / k;
    let overlaps = masked_tables(&vec![q; k], &vec![q; k], &|_, _| true);
    check_cap("overlap-table lattice", (overlaps.len() as f64).powi(g.num_vertices() as i32), cap)?;
    // pair (i, j) is flattened to i * k + j; an edge may join (i, j) to (i', j') iff
    // both colourings are proper on it
    let allowed = |a: usize, b: usize| a / k != b / k && a % k != b % k;
    let mut cache: HashMap<(usize, usize), BigUint> = HashMap::new();
    let total = profile_sum(g, &fact, &overlaps, &mut |a, b| {
        cache
            .entry((a, b))
            .or_insert_with(|| edge_weight(&fact, &overlaps[a], &overlaps[b], &allowed))
            .clone()
    });
    Ok(BigRational::new(BigInt::from(total), denom))
}

/// Mean of `statistic` over every n-lift of `g`.
pub fn brute_force_moment<F>(g: &BaseGraph, n: usize, statistic: F) -> Result<BigRational>
where
    F: Fn(&Lift<'_>) -> Result<BigRational> + Sync,
{
    brute_force_moment_capped(g, n, DEFAULT_ENUMERATION_CAP, statistic)
}

pub fn brute_force_moment_capped<F>(g: &BaseGraph, n: usize, cap: f64, statistic: F) -> Result<BigRational>
where
    F: Fn(&Lift<'_>) -> Result<BigRational> + Sync,
{
    let lifts = enumerate_lifts_capped(g, n, cap)?;
    #[cfg(feature = "parallel")]
    let total = {
        use rayon::prelude::*;
        lifts
            .par_bridge()
            .map(|l| statistic(&l))
            .try_reduce(BigRational::zero, |a, b| Ok(a + b))?
    };
    #[cfg(not(feature = "parallel"))]
    let total = {
        let mut acc = BigRational::zero();
        for l in lifts {
            acc += statistic(&l)?;
        }
        acc
    };
    let fact = factorials(n);
    Ok(total / BigRational::from_integer(BigInt::from(lift_count_big(&fact, n, g.num_edges()))))
}

/// Number of nonnegative integer points in the colour-profile lattice for E[X], as a float.
pub fn x_lattice_size(g: &BaseGraph, n: usize, k: usize) -> f64 {
    binomial_f64(n + k - 1, k - 1).powi(g.num_vertices() as i32)
}

pub fn rational_to_string(x: &BigRational) -> String {
    format!("{}/{}", x.numer(), x.denom())
}
