//! Entropy and overlap functionals over stochastic matrices, the square and rectangular
//! stochastic-matrix inequalities, and a multi-start ascent that checks the uniform point
//! is the maximiser.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Gamma};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::asymptotics::{lambda_pair, log_growth_base};
use crate::base_graph::BaseGraph;
use crate::error::{Error, Result};
use crate::lift::sample_seed;
use crate::thresholds::{c_q, ell_threshold};

const ROW_TOL: f64 = 1e-9;
pub const ASCENT_MAX_ITERS: usize = 1000;
pub const ASCENT_TOL: f64 = 1e-10;

fn xlogx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Row-major q x k matrix with nonnegative rows summing to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StochasticMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl StochasticMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || entries.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "{} entries do not form a {rows} x {cols} matrix",
                entries.len()
            )));
        }
        if entries.iter().any(|&x| !(x >= 0.0)) {
            return Err(Error::InvalidArgument("entries must be nonnegative".into()));
        }
        for (i, row) in entries.chunks(cols).enumerate() {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-12 * cols as f64 {
                return Err(Error::InvalidArgument(format!("row {i} sums to {s}")));
            }
        }
        Ok(Self { rows, cols, entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn uniform(rows: usize, cols: usize) -> Self {
        Self { rows, cols, entries: vec![1.0 / cols as f64; rows * cols] }
    }

    /// Rows drawn from Dirichlet(concentration, ..., concentration).
    pub fn random<R: Rng>(rows: usize, cols: usize, concentration: f64, rng: &mut R) -> Self {
        let entries = (0..rows).flat_map(|_| dirichlet(cols, concentration, rng)).collect();
        Self { rows, cols, entries }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    pub fn rho(&self) -> f64 {
        self.entries.iter().map(|x| x * x).sum()
    }

    /// -sum m log m with 0 log 0 = 0.
    pub fn entropy(&self) -> f64 {
        -self.entries.iter().map(|&x| xlogx(x)).sum::<f64>()
    }
}

pub fn rho(m: &StochasticMatrix) -> f64 {
    m.rho()
}

pub fn entropy_h(m: &StochasticMatrix) -> f64 {
    m.entropy()
}

fn gamma_sample<R: Rng>(alpha: f64, rng: &mut R) -> f64 {
    Gamma::new(alpha, 1.0).expect("positive shape").sample(rng)
}

pub fn dirichlet<R: Rng>(len: usize, concentration: f64, rng: &mut R) -> Vec<f64> {
    loop {
        let mut x: Vec<f64> = (0..len).map(|_| gamma_sample(concentration, rng)).collect();
        let s: f64 = x.iter().sum();
        if s > 0.0 && s.is_finite() {
            x.iter_mut().for_each(|v| *v /= s);
            return x;
        }
    }
}

/// [log q + c log((q-1)^2)] - [h(M)/q + c log(q^2 - 2q + rho(M))]; nonnegative for c < c_q.
pub fn an_gap(m: &StochasticMatrix, c: f64) -> Result<f64> {
    let q = m.rows();
    if m.cols() != q {
        return Err(Error::InvalidArgument(format!("need a square matrix, got {q} x {}", m.cols())));
    }
    if q < 3 {
        return Err(Error::InvalidArgument(format!("need q >= 3, got {q}")));
    }
    let cq = c_q(q)?;
    if c >= cq {
        return Err(Error::OutOfRange(format!("c = {c} is not below c_{q} = {cq}")));
    }
    let qf = q as f64;
    let rhs = qf.ln() + c * ((qf - 1.0).powi(2)).ln();
    let lhs = m.entropy() / qf + c * (qf * qf - 2.0 * qf + m.rho()).ln();
    Ok(rhs - lhs)
}

/// Pads a q x k matrix to q x q: first k columns scaled by k/q, the rest set to 1/q.
pub fn extend_matrix(m: &StochasticMatrix) -> Result<StochasticMatrix> {
    let (q, k) = (m.rows(), m.cols());
    if q < k {
        return Err(Error::InvalidArgument(format!("need q >= k, got {q} x {k}")));
    }
    let scale = k as f64 / q as f64;
    let mut entries = Vec::with_capacity(q * q);
    for i in 0..q {
        entries.extend((0..k).map(|j| m.get(i, j) * scale));
        entries.extend(std::iter::repeat(1.0 / q as f64).take(q - k));
    }
    Ok(StochasticMatrix { rows: q, cols: q, entries })
}

fn rect_checks(m: &StochasticMatrix, c: f64) -> Result<(f64, f64)> {
    let (q, k) = (m.rows(), m.cols());
    if q < 3 || k < 2 || k > q {
        return Err(Error::InvalidArgument(format!("need q >= 3 and 2 <= k <= q, got {q} x {k}")));
    }
    let bound = (k as f64 - 1.0) / (q as f64 - 1.0) * c_q(q)?;
    if c >= bound {
        return Err(Error::OutOfRange(format!("c = {c} is not below {bound}")));
    }
    Ok((q as f64, k as f64))
}

/// log k + c log((q-1)(k-1)) - h(M)/q - c log(kq - k - q + (k/q) rho(M)).
pub fn rect_gap(m: &StochasticMatrix, c: f64) -> Result<f64> {
    let (q, k) = rect_checks(m, c)?;
    Ok(k.ln() + c * ((q - 1.0) * (k - 1.0)).ln()
        - m.entropy() / q
        - c * (k * q - k - q + k / q * m.rho()).ln())
}

/// The same inequality written as log k - h(M)/q - c log(1 + ((k/q) rho - 1)/((q-1)(k-1))).
pub fn rect_gap_second_form(m: &StochasticMatrix, c: f64) -> Result<f64> {
    let (q, k) = rect_checks(m, c)?;
    Ok(k.ln() - m.entropy() / q - c * (1.0 + (k / q * m.rho() - 1.0) / ((q - 1.0) * (k - 1.0))).ln())
}

/// Colour frequencies per fiber (|V| rows of length k) and per-edge colour-pair
/// frequencies b[e][i * k + i'] with the diagonal unused.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapProfile {
    pub k: usize,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
}

impl OverlapProfile {
    pub fn uniform(g: &BaseGraph, k: usize) -> Self {
        let kf = k as f64;
        let mut be = vec![1.0 / (kf * (kf - 1.0)); k * k];
        for i in 0..k {
            be[i * k + i] = 0.0;
        }
        Self { k, a: vec![vec![1.0 / kf; k]; g.num_vertices()], b: vec![be; g.num_edges()] }
    }

    /// Checks the row sums of a and both marginals of b.
    pub fn validate(&self, g: &BaseGraph) -> Result<()> {
        let k = self.k;
        if self.a.len() != g.num_vertices() || self.b.len() != g.num_edges() {
            return Err(Error::InvalidArgument("profile does not match the graph".into()));
        }
        for row in &self.a {
            if row.len() != k || row.iter().any(|&x| x < 0.0) || (row.iter().sum::<f64>() - 1.0).abs() > ROW_TOL {
                return Err(Error::InvalidArgument("a rows must be probability vectors".into()));
            }
        }
        for (e, &(t, h)) in g.edges().iter().enumerate() {
            let be = &self.b[e];
            if be.len() != k * k || be.iter().any(|&x| x < 0.0) {
                return Err(Error::InvalidArgument(format!("b[{e}] has the wrong shape or a negative entry")));
            }
            for i in 0..k {
                let out: f64 = (0..k).filter(|&j| j != i).map(|j| be[i * k + j]).sum();
                let inn: f64 = (0..k).filter(|&j| j != i).map(|j| be[j * k + i]).sum();
                if (out - self.a[t][i]).abs() > ROW_TOL || (inn - self.a[h][i]).abs() > ROW_TOL {
                    return Err(Error::InvalidArgument(format!("b[{e}] marginals disagree with a")));
                }
            }
        }
        Ok(())
    }
}

fn row_entropy(rows: &[Vec<f64>]) -> f64 {
    -rows.iter().flatten().map(|&x| xlogx(x)).sum::<f64>()
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// f(a, b) = h(a) + sum_e sum_{i != i'} b log(a_{v,i} a_{v',i'} / b).
pub fn f_ab(g: &BaseGraph, p: &OverlapProfile) -> Result<f64> {
    p.validate(g)?;
    let k = p.k;
    let mut total = row_entropy(&p.a);
    for (e, &(t, h)) in g.edges().iter().enumerate() {
        for i in 0..k {
            for j in (0..k).filter(|&j| j != i) {
                let b = p.b[e][i * k + j];
                if b > 0.0 {
                    total += b * (p.a[t][i] * p.a[h][j] / b).ln();
                }
            }
        }
    }
    Ok(total)
}

/// z_e = 1 - <a_v, a_v'> for each edge.
fn normalisers(g: &BaseGraph, a: &[Vec<f64>]) -> Result<Vec<f64>> {
    g.edges()
        .iter()
        .enumerate()
        .map(|(e, &(t, h))| {
            let z = 1.0 - dot(&a[t], &a[h]);
            if z <= 1e-15 {
                Err(Error::DegenerateEdge { edge: e })
            } else {
                Ok(z)
            }
        })
        .collect()
}

/// The b maximising f(a, .) under the relaxed constraints: a_{v,i} a_{v',i'} / z_e.
pub fn b_star(g: &BaseGraph, a: &[Vec<f64>]) -> Result<OverlapProfile> {
    let k = a.first().map_or(0, Vec::len);
    let z = normalisers(g, a)?;
    let b = g
        .edges()
        .iter()
        .zip(&z)
        .map(|(&(t, h), &ze)| {
            let mut be = vec![0.0; k * k];
            for i in 0..k {
                for j in (0..k).filter(|&j| j != i) {
                    be[i * k + j] = a[t][i] * a[h][j] / ze;
                }
            }
            be
        })
        .collect();
    Ok(OverlapProfile { k, a: a.to_vec(), b })
}

/// f(a, b*(a)) = h(a) + sum_e log z_e.
pub fn f_at_b_star(g: &BaseGraph, a: &[Vec<f64>]) -> Result<f64> {
    Ok(row_entropy(a) + normalisers(g, a)?.iter().map(|z| z.ln()).sum::<f64>())
}

/// h(a) + C(d+1, 2) log(1 - (d+1)/(dk) + rho(a)/(d(d+1))) for a profile on K_{d+1}.
pub fn g_of_a(a: &[Vec<f64>], d: usize, k: usize) -> Result<f64> {
    if a.len() != d + 1 {
        return Err(Error::InvalidArgument(format!("need d + 1 = {} rows, got {}", d + 1, a.len())));
    }
    let df = d as f64;
    let rho: f64 = a.iter().map(|r| dot(r, r)).sum();
    Ok(row_entropy(a) + df * (df + 1.0) / 2.0 * (1.0 - (df + 1.0) / (df * k as f64) + rho / (df * (df + 1.0))).ln())
}

/// Both sides of the pairwise AM-GM bound on K_{d+1}:
/// (sum_{v<v'} log(1 - <a_v, a_v'>), C(d+1,2) log(1 - (d+1)/(dk) + rho/(d(d+1)))).
pub fn pairwise_overlap_bound(a: &[Vec<f64>]) -> (f64, f64) {
    let m = a.len();
    let k = a.first().map_or(1, Vec::len) as f64;
    let df = m as f64 - 1.0;
    let mut lhs = 0.0;
    for v in 0..m {
        for w in v + 1..m {
            lhs += (1.0 - dot(&a[v], &a[w])).ln();
        }
    }
    let rho: f64 = a.iter().map(|r| dot(r, r)).sum();
    let rhs = df * (df + 1.0) / 2.0 * (1.0 - (df + 1.0) / (df * k) + rho / (df * (df + 1.0))).ln();
    (lhs, rhs)
}

/// Pair-colour frequencies a[v][i * k + j] and per-edge arrays b[e][((i k + j) k + i') k + j'],
/// entries outside i != i', j != j' unused.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairOverlapProfile {
    pub k: usize,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
}

impl PairOverlapProfile {
    pub fn uniform(g: &BaseGraph, k: usize) -> Self {
        let kf = k as f64;
        let mut be = vec![0.0; k.pow(4)];
        for (idx, x) in be.iter_mut().enumerate() {
            let (i, j, ip, jp) = (idx / k.pow(3), idx / (k * k) % k, idx / k % k, idx % k);
            if i != ip && j != jp {
                *x = 1.0 / (kf * kf * (kf - 1.0).powi(2));
            }
        }
        Self { k, a: vec![vec![1.0 / (kf * kf); k * k]; g.num_vertices()], b: vec![be; g.num_edges()] }
    }

    pub fn validate(&self, g: &BaseGraph) -> Result<()> {
        let k = self.k;
        if self.a.len() != g.num_vertices() || self.b.len() != g.num_edges() {
            return Err(Error::InvalidArgument("profile does not match the graph".into()));
        }
        for av in &self.a {
            check_transport(av, k)?;
        }
        let kk = k * k;
        for (e, &(t, h)) in g.edges().iter().enumerate() {
            let be = &self.b[e];
            if be.len() != kk * kk || be.iter().any(|&x| x < 0.0) {
                return Err(Error::InvalidArgument(format!("B[{e}] has the wrong shape or a negative entry")));
            }
            let mut out = vec![0.0; kk];
            let mut inn = vec![0.0; kk];
            for (idx, &x) in be.iter().enumerate() {
                let (s, t2) = (idx / kk, idx % kk);
                if s / k != t2 / k && s % k != t2 % k {
                    out[s] += x;
                    inn[t2] += x;
                }
            }
            for c in 0..kk {
                if (out[c] - self.a[t][c]).abs() > ROW_TOL || (inn[c] - self.a[h][c]).abs() > ROW_TOL {
                    return Err(Error::InvalidArgument(format!("B[{e}] marginals disagree with A")));
                }
            }
        }
        Ok(())
    }
}

fn check_transport(av: &[f64], k: usize) -> Result<()> {
    let target = 1.0 / k as f64;
    if av.len() != k * k || av.iter().any(|&x| x < 0.0) {
        return Err(Error::InvalidArgument("A_v must be k x k and nonnegative".into()));
    }
    for i in 0..k {
        let row: f64 = (0..k).map(|j| av[i * k + j]).sum();
        let col: f64 = (0..k).map(|j| av[j * k + i]).sum();
        if (row - target).abs() > ROW_TOL || (col - target).abs() > ROW_TOL {
            return Err(Error::InvalidArgument("A_v must have row and column sums 1/k".into()));
        }
    }
    Ok(())
}

/// f(A, B) = h(A) + sum_e sum_K b log(a_{v,ij} a_{v',i'j'} / b).
pub fn f_big_ab(g: &BaseGraph, p: &PairOverlapProfile) -> Result<f64> {
    p.validate(g)?;
    let kk = p.k * p.k;
    let k = p.k;
    let mut total = row_entropy(&p.a);
    for (e, &(t, h)) in g.edges().iter().enumerate() {
        for (idx, &b) in p.b[e].iter().enumerate() {
            let (s, t2) = (idx / kk, idx % kk);
            if s / k != t2 / k && s % k != t2 % k && b > 0.0 {
                total += b * (p.a[t][s] * p.a[h][t2] / b).ln();
            }
        }
    }
    Ok(total)
}

/// The outer-sum exponent F(A): (d-1) sum a log a minus the lambda/lambda' quadratic penalty.
pub fn f_big_a(g: &BaseGraph, a: &[Vec<f64>], k: usize) -> Result<f64> {
    if k < 3 {
        return Err(Error::InvalidArgument(format!("need k >= 3, got {k}")));
    }
    let kf = k as f64;
    let (l, lp) = lambda_pair(k);
    let centre = 2.0 / (kf * kf);
    let scale = kf * kf * (kf - 1.0).powi(2);
    let d = g.degree() as f64;
    let mut total = (d - 1.0) * a.iter().flatten().map(|&x| xlogx(x)).sum::<f64>();
    for &(t, h) in g.edges() {
        let (sum_sq, diff_sq) = a[t].iter().zip(&a[h]).fold((0.0, 0.0), |(s, df), (x, y)| {
            (s + (x + y - centre).powi(2), df + (x - y).powi(2))
        });
        total -= scale / 2.0 * (sum_sq / (2.0 * l) + diff_sq / (2.0 * lp) + 2.0 / scale * (1.0 / scale).ln());
    }
    Ok(total)
}

pub fn f_big_a_gradient(g: &BaseGraph, a: &[Vec<f64>], k: usize) -> Vec<Vec<f64>> {
    let kf = k as f64;
    let (l, lp) = lambda_pair(k);
    let centre = 2.0 / (kf * kf);
    let scale = kf * kf * (kf - 1.0).powi(2);
    let d = g.degree() as f64;
    let mut grad: Vec<Vec<f64>> = a
        .iter()
        .map(|row| row.iter().map(|&x| (d - 1.0) * (x.max(1e-300).ln() + 1.0)).collect())
        .collect();
    for &(t, h) in g.edges() {
        for c in 0..k * k {
            let (x, y) = (a[t][c], a[h][c]);
            let common = (x + y - centre) / l;
            grad[t][c] -= scale / 2.0 * (common + (x - y) / lp);
            grad[h][c] -= scale / 2.0 * (common + (y - x) / lp);
        }
    }
    grad
}

/// Hessian of F on the flattened variables a[v][c] -> v * k^2 + c.
pub fn f_big_a_hessian(g: &BaseGraph, a: &[Vec<f64>], k: usize) -> DMatrix<f64> {
    let kk = k * k;
    let nv = g.num_vertices();
    let kf = k as f64;
    let (l, lp) = lambda_pair(k);
    let scale = kf * kf * (kf - 1.0).powi(2);
    let d = g.degree() as f64;
    let mut hess = DMatrix::zeros(nv * kk, nv * kk);
    for (v, row) in a.iter().enumerate() {
        for (c, &x) in row.iter().enumerate() {
            hess[(v * kk + c, v * kk + c)] += (d - 1.0) / x;
        }
    }
    let same = scale / 2.0 * (1.0 / l + 1.0 / lp);
    let cross = scale / 2.0 * (1.0 / l - 1.0 / lp);
    for &(t, h) in g.edges() {
        for c in 0..kk {
            hess[(t * kk + c, t * kk + c)] -= same;
            hess[(h * kk + c, h * kk + c)] -= same;
            hess[(t * kk + c, h * kk + c)] -= cross;
            hess[(h * kk + c, t * kk + c)] -= cross;
        }
    }
    hess
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(x: &mut [f64], total: f64) {
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &s) in sorted.iter().enumerate() {
        cum += s;
        let t = (cum - total) / (i + 1) as f64;
        if s - t > 0.0 {
            theta = t;
        }
    }
    x.iter_mut().for_each(|v| *v = (*v - theta).max(0.0));
}

/// Euclidean projection onto {X >= 0, row and column sums all equal to `margin`} for a
/// row-major k x k matrix, by Dykstra's alternating projections.
pub fn project_transport(x: &mut [f64], k: usize, margin: f64) {
    project_transport_box(x, k, margin, 0.0, f64::INFINITY);
}

/// As `project_transport` with every entry also confined to [lo, hi].
pub fn project_transport_box(x: &mut [f64], k: usize, margin: f64, lo: f64, hi: f64) {
    let mut corr_affine = vec![0.0; x.len()];
    let mut corr_box = vec![0.0; x.len()];
    for _ in 0..10 * ASCENT_MAX_ITERS {
        let mut y: Vec<f64> = x.iter().zip(&corr_affine).map(|(a, b)| a + b).collect();
        let before = y.clone();
        project_affine_margins(&mut y, k, margin);
        corr_affine = before.iter().zip(&y).map(|(a, b)| a - b).collect();
        let mut z: Vec<f64> = y.iter().zip(&corr_box).map(|(a, b)| a + b).collect();
        let before = z.clone();
        z.iter_mut().for_each(|v| *v = v.clamp(lo, hi));
        corr_box = before.iter().zip(&z).map(|(a, b)| a - b).collect();
        let change = z.iter().zip(x.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        x.copy_from_slice(&z);
        if change < 1e-16 {
            break;
        }
    }
    // finish on the affine set; the correction is below the tolerance in practice
    project_affine_margins(x, k, margin);
    x.iter_mut().for_each(|v| *v = v.clamp(lo, hi));
}

fn project_affine_margins(x: &mut [f64], k: usize, margin: f64) {
    let kf = k as f64;
    let row_res: Vec<f64> = (0..k).map(|i| (0..k).map(|j| x[i * k + j]).sum::<f64>() - margin).collect();
    let col_res: Vec<f64> = (0..k).map(|j| (0..k).map(|i| x[i * k + j]).sum::<f64>() - margin).collect();
    let total: f64 = row_res.iter().sum();
    for i in 0..k {
        for j in 0..k {
            x[i * k + j] += -row_res[i] / kf - col_res[j] / kf + total / (kf * kf);
        }
    }
}

/// Sinkhorn-scaled random positive k x k matrix with margins 1/k.
pub fn random_transport<R: Rng>(k: usize, concentration: f64, rng: &mut R) -> Vec<f64> {
    let mut x: Vec<f64> = (0..k * k).map(|_| gamma_sample(concentration, rng).max(1e-12)).collect();
    let margin = 1.0 / k as f64;
    for _ in 0..10_000 {
        for i in 0..k {
            let s: f64 = (0..k).map(|j| x[i * k + j]).sum();
            (0..k).for_each(|j| x[i * k + j] *= margin / s);
        }
        let mut worst: f64 = 0.0;
        for j in 0..k {
            let s: f64 = (0..k).map(|i| x[i * k + j]).sum();
            worst = worst.max((s - margin).abs());
            (0..k).for_each(|i| x[i * k + j] *= margin / s);
        }
        if worst < 1e-15 {
            break;
        }
    }
    x
}

/// Moves a transportation matrix towards the uniform one until every entry lies in
/// [0.9/k^2, 1.1/k^2]; margins are preserved since both endpoints share them.
fn shrink_into_window(x: Vec<f64>, k: usize) -> Vec<f64> {
    let centre = 1.0 / (k * k) as f64;
    let t = x
        .iter()
        .map(|&v| {
            let dev = (v - centre).abs();
            if dev == 0.0 {
                1.0
            } else {
                0.1 * centre / dev
            }
        })
        .fold(1.0, f64::min);
    x.iter().map(|&v| centre + t * (v - centre)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// f(a, b*(a)) over row-stochastic a.
    FabStar,
    /// F(A) over transportation profiles with entries in [0.9/k^2, 1.1/k^2], the window
    /// on which F represents the second-moment exponent.
    BigF,
    /// F(A) over the whole transportation polytope.
    BigFUnrestricted,
    /// Left side of the rectangular inequality with q = |V|, c = d/2, over q x k matrices.
    RectLhs,
}

impl std::str::FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f" | "fab" | "fab_star" => Ok(Self::FabStar),
            "F" | "big_f" | "FA" => Ok(Self::BigF),
            "F-full" | "big_f_unrestricted" => Ok(Self::BigFUnrestricted),
            "rect" | "rect_lhs" => Ok(Self::RectLhs),
            _ => Err(Error::InvalidArgument(format!("unknown objective {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxSearch {
    pub objective: Objective,
    pub starts: usize,
    pub best_point: Vec<Vec<f64>>,
    pub best_value: f64,
    pub uniform_value: f64,
    /// uniform_value - best_value; negative means a point beat the uniform one.
    pub gap_to_uniform: f64,
    /// Max-norm distance of the best point from the uniform point.
    pub distance_to_uniform: f64,
}

struct Problem<'g> {
    objective: Objective,
    g: &'g BaseGraph,
    k: usize,
    rect_c: f64,
}

impl Problem<'_> {
    fn value(&self, x: &[Vec<f64>]) -> f64 {
        match self.objective {
            Objective::FabStar => f_at_b_star(self.g, x).unwrap_or(f64::NEG_INFINITY),
            Objective::BigF | Objective::BigFUnrestricted => f_big_a(self.g, x, self.k).unwrap_or(f64::NEG_INFINITY),
            Objective::RectLhs => {
                let q = x.len() as f64;
                let kf = self.k as f64;
                let rho: f64 = x.iter().map(|r| dot(r, r)).sum();
                row_entropy(x) / q + self.rect_c * (kf * q - kf - q + kf / q * rho).ln()
            }
        }
    }

    fn gradient(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let ent = |v: f64| -(v.max(1e-300).ln() + 1.0);
        match self.objective {
            Objective::FabStar => {
                let mut grad: Vec<Vec<f64>> = x.iter().map(|r| r.iter().map(|&v| ent(v)).collect()).collect();
                for &(t, h) in self.g.edges() {
                    let z = (1.0 - dot(&x[t], &x[h])).max(1e-300);
                    for i in 0..self.k {
                        grad[t][i] -= x[h][i] / z;
                        grad[h][i] -= x[t][i] / z;
                    }
                }
                grad
            }
            Objective::BigF | Objective::BigFUnrestricted => f_big_a_gradient(self.g, x, self.k),
            Objective::RectLhs => {
                let q = x.len() as f64;
                let kf = self.k as f64;
                let rho: f64 = x.iter().map(|r| dot(r, r)).sum();
                let inner = kf * q - kf - q + kf / q * rho;
                x.iter()
                    .map(|r| r.iter().map(|&v| ent(v) / q + self.rect_c * 2.0 * kf / q * v / inner).collect())
                    .collect()
            }
        }
    }

    fn project(&self, x: &mut [Vec<f64>]) {
        for row in x.iter_mut() {
            match self.objective {
                Objective::BigF => {
                    let centre = 1.0 / (self.k * self.k) as f64;
                    project_transport_box(row, self.k, 1.0 / self.k as f64, 0.9 * centre, 1.1 * centre)
                }
                Objective::BigFUnrestricted => project_transport(row, self.k, 1.0 / self.k as f64),
                _ => project_simplex(row, 1.0),
            }
        }
    }

    fn uniform(&self) -> Vec<Vec<f64>> {
        let kf = self.k as f64;
        match self.objective {
            Objective::BigF | Objective::BigFUnrestricted => vec![vec![1.0 / (kf * kf); self.k * self.k]; self.g.num_vertices()],
            _ => vec![vec![1.0 / kf; self.k]; self.g.num_vertices()],
        }
    }

    fn random_start(&self, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        let concentration = if rng.gen_bool(0.5) { 1.0 } else { 0.3 };
        (0..self.g.num_vertices())
            .map(|_| match self.objective {
                Objective::BigF => shrink_into_window(random_transport(self.k, concentration, rng), self.k),
                Objective::BigFUnrestricted => random_transport(self.k, concentration, rng),
                _ => dirichlet(self.k, concentration, rng),
            })
            .collect()
    }

    /// Projected gradient ascent with a backtracking step.
    fn ascend(&self, mut x: Vec<Vec<f64>>) -> (Vec<Vec<f64>>, f64) {
        let mut value = self.value(&x);
        let mut step = 0.1;
        for _ in 0..ASCENT_MAX_ITERS {
            let grad = self.gradient(&x);
            let mut improved = false;
            while step > 1e-16 {
                let mut y: Vec<Vec<f64>> = x
                    .iter()
                    .zip(&grad)
                    .map(|(r, gr)| r.iter().zip(gr).map(|(a, b)| a + step * b).collect())
                    .collect();
                self.project(&mut y);
                let vy = self.value(&y);
                if vy > value {
                    let moved = x.iter().flatten().zip(y.iter().flatten()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    let gain = vy - value;
                    x = y;
                    value = vy;
                    improved = gain > ASCENT_TOL * ASCENT_TOL || moved > ASCENT_TOL;
                    step *= 1.5;
                    break;
                }
                step *= 0.5;
            }
            if !improved {
                break;
            }
        }
        (x, value)
    }
}

/// Multi-start projected gradient ascent of one of the objectives, compared with the
/// value at the uniform point.
pub fn verify_max_uniform(objective: Objective, g: &BaseGraph, k: usize, starts: usize, seed: u64) -> Result<MaxSearch> {
    if starts == 0 {
        return Err(Error::InvalidArgument("need at least one start".into()));
    }
    let d = g.degree() as f64;
    let mut rect_c = 0.0;
    match objective {
        Objective::BigF | Objective::BigFUnrestricted => {
            let ell = ell_threshold(k)?;
            if d >= ell {
                return Err(Error::OutOfRange(format!("d = {d} is not below l_{k} = {ell}")));
            }
        }
        Objective::FabStar => {
            if k < 2 || (d * d - 1.0) / (d * d.ln()) >= 2.0 * (k as f64 - 1.0) {
                return Err(Error::OutOfRange(format!("degree-colour condition fails for d = {d}, k = {k}")));
            }
        }
        Objective::RectLhs => {
            let q = g.num_vertices();
            rect_c = d / 2.0;
            if q < 3 || k > q || rect_c >= (k as f64 - 1.0) / (q as f64 - 1.0) * c_q(q)? {
                return Err(Error::OutOfRange(format!("rectangular hypothesis fails for q = {q}, k = {k}, c = {rect_c}")));
            }
        }
    }
    let problem = Problem { objective, g, k, rect_c };
    let run = |i: usize| {
        let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(seed, i as u64));
        problem.ascend(problem.random_start(&mut rng))
    };
    #[cfg(feature = "parallel")]
    let results: Vec<(Vec<Vec<f64>>, f64)> = {
        use rayon::prelude::*;
        (0..starts).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<(Vec<Vec<f64>>, f64)> = (0..starts).map(run).collect();

    let (best_point, best_value) = results
        .into_iter()
        .fold(None, |acc: Option<(Vec<Vec<f64>>, f64)>, cur| match acc {
            Some(a) if a.1 >= cur.1 => Some(a),
            _ => Some(cur),
        })
        .expect("starts >= 1");
    let uniform = problem.uniform();
    let uniform_value = problem.value(&uniform);
    let distance_to_uniform = best_point
        .iter()
        .flatten()
        .zip(uniform.iter().flatten())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(MaxSearch {
        objective,
        starts,
        best_point,
        best_value,
        uniform_value,
        gap_to_uniform: uniform_value - best_value,
        distance_to_uniform,
    })
}

/// Norm of the gradient of F at A projected onto the tangent space of the margins.
pub fn f_big_a_projected_gradient_norm(g: &BaseGraph, a: &[Vec<f64>], k: usize) -> f64 {
    let grad = f_big_a_gradient(g, a, k);
    grad.into_iter()
        .map(|mut row| {
            project_affine_margins(&mut row, k, 0.0);
            row.iter().map(|x| x * x).sum::<f64>()
        })
        .sum::<f64>()
        .sqrt()
}

/// The growth exponent f at the uniform profile, log(k^|V| ((k-1)/k)^|E|).
pub fn uniform_f_value(g: &BaseGraph, k: usize) -> f64 {
    log_growth_base(g, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;
    use rand::Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn identity(q: usize) -> StochasticMatrix {
        let mut e = vec![0.0; q * q];
        for i in 0..q {
            e[i * q + i] = 1.0;
        }
        StochasticMatrix::new(q, q, e).unwrap()
    }

    #[test]
    fn rho_and_entropy() {
        let u = StochasticMatrix::uniform(4, 3);
        assert_abs_diff_eq!(u.rho(), 4.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(u.entropy(), 4.0 * 3f64.ln(), epsilon = 1e-12);
        let id = identity(3);
        assert_abs_diff_eq!(id.rho(), 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(id.entropy(), 0.0, epsilon = 1e-12);
        let half = StochasticMatrix::new(1, 3, vec![0.5, 0.5, 0.0]).unwrap();
        assert_abs_diff_eq!(half.rho(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(half.entropy(), 2f64.ln(), epsilon = 1e-12);
        assert!(StochasticMatrix::new(1, 2, vec![0.5, 0.6]).is_err());
        assert!(StochasticMatrix::new(1, 2, vec![1.5, -0.5]).is_err());
    }

    #[test]
    fn an_gap_examples() {
        assert_abs_diff_eq!(an_gap(&StochasticMatrix::uniform(3, 3), 1.0).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(an_gap(&identity(3), 1.0).unwrap(), 2f64.ln(), epsilon = 1e-12);
        assert!(matches!(an_gap(&StochasticMatrix::uniform(3, 3), 2.0), Err(Error::OutOfRange(_))));
        assert!(an_gap(&StochasticMatrix::uniform(3, 2), 1.0).is_err());
    }

    #[test]
    fn extension_examples() {
        let e = extend_matrix(&StochasticMatrix::uniform(4, 3)).unwrap();
        for &x in e.entries() {
            assert_abs_diff_eq!(x, 0.25, epsilon = 1e-15);
        }
        let m = StochasticMatrix::random(3, 3, 1.0, &mut rng(1));
        assert_eq!(extend_matrix(&m).unwrap(), m);
        let m = StochasticMatrix::from_rows(&[
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![0.5, 0.5, 0.0],
        ])
        .unwrap();
        let (q, k) = (4.0, 3.0);
        let e = extend_matrix(&m).unwrap();
        assert_abs_diff_eq!(e.rho(), k / q * (k / q * m.rho() - 1.0) + 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(k.ln() - m.entropy() / q, q / k * (q.ln() - e.entropy() / q), epsilon = 1e-12);
        assert!(extend_matrix(&StochasticMatrix::uniform(2, 3)).is_err());
    }

    #[test]
    fn rect_gap_examples() {
        let c = 0.99 * 2.0 / 3.0 * c_q(4).unwrap();
        assert_abs_diff_eq!(rect_gap(&StochasticMatrix::uniform(4, 3), c).unwrap(), 0.0, epsilon = 1e-12);
        let mut r = rng(3);
        for _ in 0..100 {
            let m = StochasticMatrix::random(3, 3, 1.0, &mut r);
            assert_abs_diff_eq!(rect_gap(&m, 1.0).unwrap(), an_gap(&m, 1.0).unwrap(), epsilon = 1e-12);
        }
        let rows: Vec<Vec<f64>> = (0..5).map(|i| (0..4).map(|j| f64::from(u8::from(j == i % 4))).collect()).collect();
        let m = StochasticMatrix::from_rows(&rows).unwrap();
        assert!(rect_gap(&m, 0.5).unwrap() > 0.0);
        assert!(matches!(rect_gap(&m, 10.0), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn random_inequalities_hold() {
        let mut r = rng(11);
        for &(q, c) in &[(3, 1.8), (4, 3.7), (5, 5.9)] {
            for _ in 0..2000 {
                let m = StochasticMatrix::random(q, q, 1.0, &mut r);
                assert!(an_gap(&m, c).unwrap() >= -1e-10);
            }
        }
        for &(q, k) in &[(4, 3), (5, 3), (5, 4)] {
            let c = 0.99 * (k as f64 - 1.0) / (q as f64 - 1.0) * c_q(q).unwrap();
            for _ in 0..2000 {
                let m = StochasticMatrix::random(q, k, 1.0, &mut r);
                let gap = rect_gap(&m, c).unwrap();
                assert!(gap >= -1e-10);
                assert_abs_diff_eq!(gap, rect_gap_second_form(&m, c).unwrap(), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn overlap_functionals_at_uniform() {
        for (m, k) in [(4, 3), (5, 3), (4, 4)] {
            let g = BaseGraph::complete(m).unwrap();
            let d = (m - 1) as f64;
            let kf = k as f64;
            let p = OverlapProfile::uniform(&g, k);
            let expect = (d + 1.0) / 2.0 * ((kf - 1.0).powf(d) / kf.powf(d - 2.0)).ln();
            assert_relative_eq!(f_ab(&g, &p).unwrap(), expect, max_relative = 1e-12);
            let star = b_star(&g, &p.a).unwrap();
            for (x, y) in star.b.iter().flatten().zip(p.b.iter().flatten()) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-15);
            }
            assert_relative_eq!(f_at_b_star(&g, &p.a).unwrap(), expect, max_relative = 1e-12);
            assert_relative_eq!(g_of_a(&p.a, m - 1, k).unwrap(), expect, max_relative = 1e-12);
        }
        let g = BaseGraph::complete(3).unwrap();
        let a = vec![vec![1.0, 0.0, 0.0]; 3];
        assert!(matches!(b_star(&g, &a), Err(Error::DegenerateEdge { .. })));
    }

    #[test]
    fn gibbs_inequality_on_random_profiles() {
        let g = BaseGraph::complete(4).unwrap();
        let k = 3;
        let mut r = rng(5);
        for _ in 0..10_000 {
            let a: Vec<Vec<f64>> = (0..4).map(|_| dirichlet(k, 1.0, &mut r)).collect();
            // b*(a) mixed with an arbitrary distribution on the off-diagonal pairs
            let star = b_star(&g, &a).unwrap();
            let fa = f_at_b_star(&g, &a).unwrap();
            let mut b = star.clone();
            for e in 0..g.num_edges() {
                let lam: f64 = r.gen_range(0.0..1.0);
                let w = dirichlet(k * (k - 1), 1.0, &mut r);
                let mut idx = 0;
                for i in 0..k {
                    for j in (0..k).filter(|&j| j != i) {
                        b.b[e][i * k + j] = lam * star.b[e][i * k + j] + (1.0 - lam) * w[idx];
                        idx += 1;
                    }
                }
            }
            // relaxed constraint only: sum of b is one
            let val = row_entropy(&a)
                + g.edges()
                    .iter()
                    .enumerate()
                    .map(|(e, &(t, h))| {
                        (0..k)
                            .flat_map(|i| (0..k).filter(move |&j| j != i).map(move |j| (i, j)))
                            .map(|(i, j)| {
                                let bb = b.b[e][i * k + j];
                                if bb > 0.0 {
                                    bb * (a[t][i] * a[h][j] / bb).ln()
                                } else {
                                    0.0
                                }
                            })
                            .sum::<f64>()
                    })
                    .sum::<f64>();
            assert!(val <= fa + 1e-12);
            let (lhs, rhs) = pairwise_overlap_bound(&a);
            assert!(lhs <= rhs + 1e-12);
        }
    }

    #[test]
    fn profile_validation() {
        let g = BaseGraph::complete(3).unwrap();
        let mut p = OverlapProfile::uniform(&g, 3);
        assert!(p.validate(&g).is_ok());
        p.b[0][1] += 0.01;
        assert!(f_ab(&g, &p).is_err());
        let pp = PairOverlapProfile::uniform(&g, 3);
        assert!(pp.validate(&g).is_ok());
    }

    #[test]
    fn pair_functionals_at_uniform() {
        for (g, k) in [(BaseGraph::complete(4).unwrap(), 3), (BaseGraph::complete(3).unwrap(), 3), (BaseGraph::petersen(), 4)] {
            let p = PairOverlapProfile::uniform(&g, k);
            let expect = 2.0 * log_growth_base(&g, k);
            assert_relative_eq!(f_big_ab(&g, &p).unwrap(), expect, max_relative = 1e-12);
            assert_relative_eq!(f_big_a(&g, &p.a, k).unwrap(), expect, max_relative = 1e-12);
            assert!(f_big_a_projected_gradient_norm(&g, &p.a, k) < 1e-8);
        }
    }

    #[test]
    fn big_f_gradient_and_hessian_match_differences() {
        let g = BaseGraph::complete(4).unwrap();
        let k = 3;
        let mut r = rng(8);
        let a: Vec<Vec<f64>> = (0..4).map(|_| random_transport(k, 2.0, &mut r)).collect();
        let grad = f_big_a_gradient(&g, &a, k);
        let hess = f_big_a_hessian(&g, &a, k);
        let eps = 1e-6;
        for v in 0..4 {
            for c in 0..9 {
                let mut up = a.clone();
                let mut dn = a.clone();
                up[v][c] += eps;
                dn[v][c] -= eps;
                let fd = (f_big_a(&g, &up, k).unwrap() - f_big_a(&g, &dn, k).unwrap()) / (2.0 * eps);
                assert_relative_eq!(grad[v][c], fd, max_relative = 1e-5, epsilon = 1e-7);
                let gu = f_big_a_gradient(&g, &up, k);
                let gd = f_big_a_gradient(&g, &dn, k);
                for w in 0..4 {
                    for c2 in 0..9 {
                        let fd2 = (gu[w][c2] - gd[w][c2]) / (2.0 * eps);
                        assert_relative_eq!(hess[(w * 9 + c2, v * 9 + c)], fd2, max_relative = 1e-4, epsilon = 1e-5);
                    }
                }
            }
        }
    }

    #[test]
    fn big_f_is_below_uniform_on_perturbations() {
        let g = BaseGraph::complete(4).unwrap();
        let k = 3;
        let top = f_big_a(&g, &PairOverlapProfile::uniform(&g, k).a, k).unwrap();
        let mut r = rng(21);
        for i in 0..10_000 {
            let conc = if i % 2 == 0 { 1.0 } else { 20.0 };
            let a: Vec<Vec<f64>> = (0..4).map(|_| random_transport(k, conc, &mut r)).collect();
            assert!(f_big_a(&g, &a, k).unwrap() < top);
        }
    }

    #[test]
    fn projections() {
        let mut x = vec![0.9, 0.5, -0.2];
        project_simplex(&mut x, 1.0);
        assert_abs_diff_eq!(x.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert!(x.iter().all(|&v| v >= 0.0));
        assert_abs_diff_eq!(x[0], 0.7, epsilon = 1e-12);
        let mut r = rng(2);
        for _ in 0..50 {
            let mut y: Vec<f64> = (0..9).map(|_| r.gen_range(-0.2..0.5)).collect();
            project_transport(&mut y, 3, 1.0 / 3.0);
            assert!(check_transport(&y, 3).is_ok(), "{y:?}");
        }
    }

    #[test]
    fn ascent_finds_uniform_maximum() {
        let g = BaseGraph::complete(4).unwrap();
        let s = verify_max_uniform(Objective::BigF, &g, 3, 40, 1).unwrap();
        assert!(s.gap_to_uniform >= -1e-9, "{s:?}");
        assert!(s.distance_to_uniform < 1e-5, "{s:?}");
        let s = verify_max_uniform(Objective::FabStar, &g, 3, 40, 2).unwrap();
        assert!(s.gap_to_uniform >= -1e-9 && s.distance_to_uniform < 1e-4, "{s:?}");
        assert_relative_eq!(s.uniform_value, uniform_f_value(&g, 3), max_relative = 1e-12);
        let s = verify_max_uniform(Objective::RectLhs, &g, 3, 40, 3).unwrap();
        assert!(s.gap_to_uniform >= -1e-9 && s.distance_to_uniform < 1e-4, "{s:?}");
        assert!(verify_max_uniform(Objective::BigF, &BaseGraph::complete(5).unwrap(), 3, 4, 1).is_err());
    }

    #[test]
    fn big_f_is_not_a_global_bound() {
        // Off the window the quadratic penalty no longer tracks the exponent: spreading
        // A_v evenly over the off-diagonal cells beats the uniform value.
        let g = BaseGraph::complete(4).unwrap();
        let k = 3;
        let mut av = vec![1.0 / 6.0; 9];
        for i in 0..3 {
            av[i * 3 + i] = 0.0;
        }
        let a = vec![av; 4];
        let top = f_big_a(&g, &PairOverlapProfile::uniform(&g, k).a, k).unwrap();
        assert!(f_big_a(&g, &a, k).unwrap() > top + 0.8);
        let s = verify_max_uniform(Objective::BigFUnrestricted, &g, k, 40, 1).unwrap();
        assert!(s.gap_to_uniform < 0.0);
    }

    proptest! {
        #[test]
        fn rho_bounds(q in 1usize..7, k in 1usize..7, seed in any::<u64>()) {
            let m = StochasticMatrix::random(q, k, 0.5, &mut rng(seed));
            prop_assert!(m.rho() >= q as f64 / k as f64 - 1e-12);
            prop_assert!(m.rho() <= q as f64 + 1e-12);
        }

        #[test]
        fn extension_identities(q in 3usize..7, k in 2usize..7, seed in any::<u64>()) {
            prop_assume!(k <= q);
            let m = StochasticMatrix::random(q, k, 1.0, &mut rng(seed));
            let e = extend_matrix(&m).unwrap();
            let (qf, kf) = (q as f64, k as f64);
            prop_assert!((e.rho() - (kf / qf * (kf / qf * m.rho() - 1.0) + 1.0)).abs() < 1e-10);
            prop_assert!((kf.ln() - m.entropy() / qf - qf / kf * (qf.ln() - e.entropy() / qf)).abs() < 1e-10);
        }
    }
}
