//! Constraint graphs for lattice sums: incidence matrices, integer kernel bases,
//! maximal-forest counts, restricted Hessian determinants and the Laplace estimate.

use std::collections::VecDeque;

use nalgebra::{DMatrix, SymmetricEigen};
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::asymptotics::{log_gamma_nk, log_growth_base, LogValue};
use crate::base_graph::BaseGraph;
use crate::error::{Error, Result};
use crate::stochastic_opt::{f_big_a, f_big_a_hessian};

pub const DEFAULT_LATTICE_CAP: f64 = 1e7;

/// A multigraph whose vertices are equations and whose edges are variables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConstraintGraph {
    vertex_labels: Vec<String>,
    edges: Vec<(usize, usize)>,
    edge_labels: Vec<String>,
}

impl ConstraintGraph {
    pub fn new(num_vertices: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let vertex_labels = (0..num_vertices).map(|i| format!("w{i}")).collect();
        let edge_labels = (0..edges.len()).map(|i| format!("x{i}")).collect();
        Self::with_labels(vertex_labels, edges, edge_labels)
    }

    pub fn with_labels(vertex_labels: Vec<String>, edges: Vec<(usize, usize)>, edge_labels: Vec<String>) -> Result<Self> {
        if edges.len() != edge_labels.len() {
            return Err(Error::InvalidArgument("one label per edge required".into()));
        }
        let nv = vertex_labels.len();
        if let Some(&(u, v)) = edges.iter().find(|&&(u, v)| u >= nv || v >= nv) {
            return Err(Error::InvalidArgument(format!("edge ({u},{v}) leaves the vertex range {nv}")));
        }
        Ok(Self { vertex_labels, edges, edge_labels })
    }

    pub fn num_vertices(&self) -> usize {
        self.vertex_labels.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn vertex_labels(&self) -> &[String] {
        &self.vertex_labels
    }

    pub fn edge_labels(&self) -> &[String] {
        &self.edge_labels
    }

    fn incident(&self) -> Vec<Vec<(usize, usize)>> {
        let mut inc = vec![Vec::new(); self.num_vertices()];
        for (e, &(u, v)) in self.edges.iter().enumerate() {
            inc[u].push((e, v));
            if u != v {
                inc[v].push((e, u));
            }
        }
        inc
    }

    /// Component id per vertex and the number of components.
    pub fn components(&self) -> (Vec<usize>, usize) {
        let inc = self.incident();
        let mut comp = vec![usize::MAX; self.num_vertices()];
        let mut count = 0;
        for s in 0..self.num_vertices() {
            if comp[s] != usize::MAX {
                continue;
            }
            comp[s] = count;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for &(_, w) in &inc[u] {
                    if comp[w] == usize::MAX {
                        comp[w] = count;
                        queue.push_back(w);
                    }
                }
            }
            count += 1;
        }
        (comp, count)
    }

    /// Side (false/true) per vertex, or None when an odd cycle or loop exists.
    pub fn bipartition(&self) -> Option<Vec<bool>> {
        let inc = self.incident();
        let mut side: Vec<Option<bool>> = vec![None; self.num_vertices()];
        for s in 0..self.num_vertices() {
            if side[s].is_some() {
                continue;
            }
            side[s] = Some(false);
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                let su = side[u].expect("visited");
                for &(_, w) in &inc[u] {
                    match side[w] {
                        None => {
                            side[w] = Some(!su);
                            queue.push_back(w);
                        }
                        Some(sw) if sw == su => return None,
                        _ => {}
                    }
                }
            }
        }
        Some(side.into_iter().map(|s| s.expect("all visited")).collect())
    }

    pub fn is_bipartite(&self) -> bool {
        self.bipartition().is_some()
    }
}

/// |V| x |E| 0/1 matrix (a loop contributes 2).
pub fn incidence_unsigned(g: &ConstraintGraph) -> DMatrix<i64> {
    let mut d = DMatrix::zeros(g.num_vertices(), g.num_edges());
    for (e, &(u, v)) in g.edges().iter().enumerate() {
        d[(u, e)] += 1;
        d[(v, e)] += 1;
    }
    d
}

/// +1 at the tail and -1 at the head; `reverse[e]` swaps the two.
pub fn incidence_signed(g: &ConstraintGraph, reverse: &[bool]) -> Result<DMatrix<i64>> {
    if reverse.len() != g.num_edges() {
        return Err(Error::InvalidArgument("orientation needs one flag per edge".into()));
    }
    let mut d = DMatrix::zeros(g.num_vertices(), g.num_edges());
    for (e, &(u, v)) in g.edges().iter().enumerate() {
        let (t, h) = if reverse[e] { (v, u) } else { (u, v) };
        d[(t, e)] += 1;
        d[(h, e)] -= 1;
    }
    Ok(d)
}

/// Orientation sending every edge from the `false` side to the `true` side.
pub fn bipartite_orientation(g: &ConstraintGraph) -> Option<Vec<bool>> {
    let side = g.bipartition()?;
    Some(g.edges().iter().map(|&(u, _)| side[u]).collect())
}

fn rational_rref(d: &DMatrix<i64>) -> (Vec<Vec<BigRational>>, Vec<usize>) {
    let (rows, cols) = d.shape();
    let mut m: Vec<Vec<BigRational>> = (0..rows)
        .map(|i| (0..cols).map(|j| BigRational::from_integer(BigInt::from(d[(i, j)]))).collect())
        .collect();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let inv = m[r][c].recip();
        for x in m[r].iter_mut() {
            *x = &*x * &inv;
        }
        for i in 0..rows {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                for j in 0..cols {
                    let delta = &f * &m[r][j];
                    m[i][j] -= delta;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    (m, pivots)
}

pub fn rank(d: &DMatrix<i64>) -> usize {
    rational_rref(d).1.len()
}

/// Integer basis of the rational kernel, one column per free variable of the reduced
/// row echelon form, scaled to primitive integer vectors.
pub fn kernel_basis(d: &DMatrix<i64>) -> DMatrix<i64> {
    let cols = d.ncols();
    let (m, pivots) = rational_rref(d);
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    let mut basis = DMatrix::zeros(cols, free.len());
    for (b, &f) in free.iter().enumerate() {
        let mut v: Vec<BigRational> = vec![BigRational::zero(); cols];
        v[f] = BigRational::one();
        for (row, &p) in pivots.iter().enumerate() {
            v[p] = -m[row][f].clone();
        }
        let lcm = v.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
        let ints: Vec<BigInt> = v.iter().map(|x| x.numer() * (&lcm / x.denom())).collect();
        let gcd = ints.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x));
        for (i, x) in ints.iter().enumerate() {
            basis[(i, b)] = (x / &gcd).to_i64().expect("kernel entries fit in i64");
        }
    }
    debug_assert_eq!(pivots.len() + free.len(), cols);
    basis
}

/// Fundamental-cycle basis of the kernel of the unsigned incidence matrix of a bipartite
/// graph: each non-forest edge closes an even cycle, signed alternately.
pub fn cycle_kernel_basis(g: &ConstraintGraph) -> Result<DMatrix<i64>> {
    if !g.is_bipartite() {
        return Err(Error::Domain("cycle basis needs a bipartite graph".into()));
    }
    let inc = g.incident();
    let nv = g.num_vertices();
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; nv];
    let mut depth = vec![usize::MAX; nv];
    let mut tree_edge = vec![false; g.num_edges()];
    for s in 0..nv {
        if depth[s] != usize::MAX {
            continue;
        }
        depth[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &(e, w) in &inc[u] {
                if depth[w] == usize::MAX {
                    depth[w] = depth[u] + 1;
                    parent[w] = Some((u, e));
                    tree_edge[e] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    let non_tree: Vec<usize> = (0..g.num_edges()).filter(|&e| !tree_edge[e]).collect();
    let mut basis = DMatrix::zeros(g.num_edges(), non_tree.len());
    for (col, &e) in non_tree.iter().enumerate() {
        let (u, v) = g.edges()[e];
        // path u -> lca and v -> lca
        let (mut a, mut b) = (u, v);
        let mut from_u = Vec::new();
        let mut from_v = Vec::new();
        while a != b {
            if depth[a] >= depth[b] {
                let (p, pe) = parent[a].expect("not a root");
                from_u.push(pe);
                a = p;
            } else {
                let (p, pe) = parent[b].expect("not a root");
                from_v.push(pe);
                b = p;
            }
        }
        // walk: e (v -> u), then u -> lca, then lca -> v
        let mut cycle = vec![e];
        cycle.extend(from_u);
        cycle.extend(from_v.into_iter().rev());
        for (pos, &edge) in cycle.iter().enumerate() {
            basis[(edge, col)] += if pos % 2 == 0 { 1 } else { -1 };
        }
    }
    Ok(basis)
}

/// Exact determinant by fraction-free (Bareiss) elimination.
pub fn bareiss_determinant(mut m: Vec<Vec<BigInt>>) -> BigInt {
    let n = m.len();
    if n == 0 {
        return BigInt::one();
    }
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n - 1 {
        if m[k][k].is_zero() {
            let Some(p) = (k + 1..n).find(|&i| !m[i][k].is_zero()) else {
                return BigInt::zero();
            };
            m.swap(k, p);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let val = (&m[i][j] * &m[k][k] - &m[i][k] * &m[k][j]) / &prev;
                m[i][j] = val;
            }
        }
        prev = m[k][k].clone();
    }
    sign * &m[n - 1][n - 1]
}

/// Number of maximal forests: the product of spanning-tree counts of the components,
/// each a reduced-Laplacian determinant. Parallel edges count separately; loops are ignored.
pub fn tau_maximal_forests(g: &ConstraintGraph) -> BigInt {
    let (comp, count) = g.components();
    let mut members = vec![Vec::new(); count];
    for (v, &c) in comp.iter().enumerate() {
        members[c].push(v);
    }
    let mut local = vec![0usize; g.num_vertices()];
    for list in &members {
        for (i, &v) in list.iter().enumerate() {
            local[v] = i;
        }
    }
    let dets = members.iter().enumerate().map(|(c, list)| {
        let size = list.len();
        if size <= 1 {
            return BigInt::one();
        }
        let mut lap = vec![vec![BigInt::zero(); size]; size];
        for &(u, v) in g.edges() {
            if u == v || comp[u] != c {
                continue;
            }
            let (a, b) = (local[u], local[v]);
            lap[a][a] += 1;
            lap[b][b] += 1;
            lap[a][b] -= 1;
            lap[b][a] -= 1;
        }
        let reduced: Vec<Vec<BigInt>> = lap[1..].iter().map(|row| row[1..].to_vec()).collect();
        bareiss_determinant(reduced)
    });
    dets.product()
}

/// det(U^T H U) / det(U^T U), independent of the basis U of the subspace.
pub fn det_restricted(h: &DMatrix<f64>, u: &DMatrix<f64>) -> Result<f64> {
    if u.ncols() == 0 {
        return Ok(1.0);
    }
    let gram = u.transpose() * u;
    let eig = SymmetricEigen::new(gram.clone());
    let max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min > 1e-12 * max) {
        return Err(Error::RankDeficient);
    }
    let restricted = u.transpose() * h * u;
    Ok(restricted.determinant() / gram.determinant())
}

pub fn to_f64_matrix(m: &DMatrix<i64>) -> DMatrix<f64> {
    m.map(|x| x as f64)
}

/// Labels w[e,1,i], w[e,2,i'] per base edge, one variable b[e,i,i'] for each i != i'.
pub fn build_gamma_b(g: &BaseGraph, k: usize) -> Result<ConstraintGraph> {
    if k < 3 {
        return Err(Error::InvalidArgument(format!("need k >= 3, got {k}")));
    }
    let mut vertex_labels = Vec::with_capacity(2 * k * g.num_edges());
    let mut edges = Vec::new();
    let mut edge_labels = Vec::new();
    for e in 0..g.num_edges() {
        vertex_labels.extend((0..k).map(|i| format!("w[{e},1,{i}]")));
        vertex_labels.extend((0..k).map(|i| format!("w[{e},2,{i}]")));
        for i in 0..k {
            for j in (0..k).filter(|&j| j != i) {
                edges.push((2 * k * e + i, 2 * k * e + k + j));
                edge_labels.push(format!("b[{e},{i},{j}]"));
            }
        }
    }
    let gamma = ConstraintGraph::with_labels(vertex_labels, edges, edge_labels)?;
    assert!(components_are_regular_bipartite(&gamma, k, k - 1), "each component is K_k,k minus a matching");
    Ok(gamma)
}

/// Labels w[v,1,i], w[v,2,j] per base vertex, one variable a[v,i,j] for each i, j.
pub fn build_gamma_a(g: &BaseGraph, k: usize) -> Result<ConstraintGraph> {
    if k < 3 {
        return Err(Error::InvalidArgument(format!("need k >= 3, got {k}")));
    }
    let mut vertex_labels = Vec::with_capacity(2 * k * g.num_vertices());
    let mut edges = Vec::new();
    let mut edge_labels = Vec::new();
    for v in 0..g.num_vertices() {
        vertex_labels.extend((0..k).map(|i| format!("w[{v},1,{i}]")));
        vertex_labels.extend((0..k).map(|i| format!("w[{v},2,{i}]")));
        for i in 0..k {
            for j in 0..k {
                edges.push((2 * k * v + i, 2 * k * v + k + j));
                edge_labels.push(format!("a[{v},{i},{j}]"));
            }
        }
    }
    let gamma = ConstraintGraph::with_labels(vertex_labels, edges, edge_labels)?;
    assert!(components_are_regular_bipartite(&gamma, k, k), "each component is K_k,k");
    Ok(gamma)
}

/// Every component is a simple bipartite graph with k vertices per side, all of degree
/// `degree`. With degree k this is K_{k,k}; with k - 1 it is K_{k,k} minus a perfect matching.
pub fn components_are_regular_bipartite(g: &ConstraintGraph, k: usize, degree: usize) -> bool {
    let Some(side) = g.bipartition() else {
        return false;
    };
    let (comp, count) = g.components();
    let mut deg = vec![0usize; g.num_vertices()];
    let mut seen = std::collections::HashSet::new();
    for &(u, v) in g.edges() {
        if !seen.insert((u.min(v), u.max(v))) {
            return false;
        }
        deg[u] += 1;
        deg[v] += 1;
    }
    let mut per_side = vec![(0usize, 0usize); count];
    for v in 0..g.num_vertices() {
        if deg[v] != degree {
            return false;
        }
        if side[v] {
            per_side[comp[v]].1 += 1;
        } else {
            per_side[comp[v]].0 += 1;
        }
    }
    per_side.iter().all(|&(a, b)| a == k && b == k)
}

type Callback = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type HessianCallback = Box<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;
type ScaleCallback = Box<dyn Fn(usize) -> f64 + Send + Sync>;

/// A sum over lattice points x in K with D x = y of psi(x) c_n e^{n phi(x)}.
pub struct LatticeProblem {
    pub gamma: ConstraintGraph,
    pub rhs: Vec<BigRational>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub phi: Callback,
    pub psi: Callback,
    /// Analytic Hessian of phi; finite differences are used when absent.
    pub hessian: Option<HessianCallback>,
    /// log c_n.
    pub log_scale: ScaleCallback,
    pub xhat: Vec<f64>,
}

impl std::fmt::Debug for LatticeProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LatticeProblem")
            .field("vertices", &self.gamma.num_vertices())
            .field("variables", &self.gamma.num_edges())
            .finish_non_exhaustive()
    }
}

impl LatticeProblem {
    /// Unsigned incidence for bipartite Gamma, signed (edges as listed) otherwise.
    pub fn constraint_matrix(&self) -> DMatrix<i64> {
        if self.gamma.is_bipartite() {
            incidence_unsigned(&self.gamma)
        } else {
            let flags = vec![false; self.gamma.num_edges()];
            incidence_signed(&self.gamma, &flags).expect("lengths agree")
        }
    }

    pub fn hessian_at(&self, x: &[f64]) -> DMatrix<f64> {
        if let Some(h) = &self.hessian {
            return h(x);
        }
        let n = x.len();
        let step = 1e-4;
        let mut hess = DMatrix::zeros(n, n);
        let eval = |i: usize, di: f64, j: usize, dj: f64| {
            let mut y = x.to_vec();
            y[i] += di;
            y[j] += dj;
            (self.phi)(&y)
        };
        for i in 0..n {
            for j in i..n {
                let v = (eval(i, step, j, step) - eval(i, step, j, -step) - eval(i, -step, j, step)
                    + eval(i, -step, j, -step))
                    / (4.0 * step * step);
                hess[(i, j)] = v;
                hess[(j, i)] = v;
            }
        }
        hess
    }

    fn check_xhat(&self) -> Result<()> {
        let d = self.constraint_matrix();
        for (row, y) in self.rhs.iter().enumerate() {
            let lhs: f64 = (0..d.ncols()).map(|c| d[(row, c)] as f64 * self.xhat[c]).sum();
            if (lhs - y.to_f64().unwrap_or(f64::NAN)).abs() > 1e-9 {
                return Err(Error::Domain(format!("xhat violates equation {row}")));
            }
        }
        let interior = self
            .xhat
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(x, (lo, hi))| lo < x && x < hi);
        if !interior {
            return Err(Error::Domain("maximiser is on the boundary of K".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LaplaceEstimate {
    pub estimate: LogValue,
    /// Kernel dimension.
    pub r: usize,
    pub tau: String,
    pub det_neg_hessian: f64,
}

/// psi(xhat) / (tau^{1/2} det(-H|_V)^{1/2}) (2 pi n)^{r/2} c_n e^{n phi(xhat)}.
pub fn laplace_estimate(p: &LatticeProblem, n: usize) -> Result<LaplaceEstimate> {
    p.check_xhat()?;
    let basis = to_f64_matrix(&kernel_basis(&p.constraint_matrix()));
    let r = basis.ncols();
    let neg_h = -p.hessian_at(&p.xhat);
    let det = det_restricted(&neg_h, &basis)?;
    if !(det > 0.0 && det.is_finite()) {
        return Err(Error::SingularHessian);
    }
    let tau = tau_maximal_forests(&p.gamma);
    let log_tau = log_bigint(&tau);
    let psi = LogValue::from_f64((p.psi)(&p.xhat));
    let nf = n as f64;
    let rest = -0.5 * log_tau - 0.5 * det.ln()
        + r as f64 / 2.0 * (2.0 * std::f64::consts::PI * nf).ln()
        + (p.log_scale)(n)
        + nf * (p.phi)(&p.xhat);
    let estimate = if psi.is_zero() { LogValue::zero() } else { psi.mul(&LogValue::from_log(rest)) };
    Ok(LaplaceEstimate { estimate, r, tau: tau.to_string(), det_neg_hessian: det })
}

fn log_bigint(x: &BigInt) -> f64 {
    let bits = x.bits();
    if bits < 1000 {
        x.to_f64().expect("finite").abs().ln()
    } else {
        let shift = bits - 900;
        (x.abs() >> shift).to_f64().expect("finite").ln() + shift as f64 * std::f64::consts::LN_2
    }
}

/// The first-moment problem over b-profiles of strongly equitable colourings.
pub fn ey_problem(g: &BaseGraph, k: usize) -> Result<LatticeProblem> {
    let gamma = build_gamma_b(g, k)?;
    let kf = k as f64;
    let (nv, ne) = (g.num_vertices() as f64, g.num_edges() as f64);
    let vars = gamma.num_edges();
    let r = (kf * kf - 3.0 * kf + 1.0) * ne;
    let rhs = vec![BigRational::new(BigInt::one(), BigInt::from(k)); gamma.num_vertices()];
    let phi = move |b: &[f64]| nv * kf.ln() - 2.0 * ne * kf.ln() - b.iter().map(|&x| if x > 0.0 { x * x.ln() } else { 0.0 }).sum::<f64>();
    let psi = |b: &[f64]| b.iter().map(|x| x.powf(-0.5)).product::<f64>();
    let hessian = |b: &[f64]| DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(b.len(), b.iter().map(|x| -1.0 / x)));
    let log_scale = move |n: usize| {
        (kf * nv / 2.0 - kf * ne) * kf.ln()
            - ((kf - 1.0) * nv / 2.0 + r / 2.0) * (2.0 * std::f64::consts::PI * n as f64).ln()
    };
    Ok(LatticeProblem {
        gamma,
        rhs,
        lower: vec![0.0; vars],
        upper: vec![1.0 / kf; vars],
        phi: Box::new(phi),
        psi: Box::new(psi),
        hessian: Some(Box::new(hessian)),
        log_scale: Box::new(log_scale),
        xhat: vec![1.0 / (kf * (kf - 1.0)); vars],
    })
}

/// The outer second-moment problem over A-profiles with exponent F(A).
pub fn ey2_problem(g: &BaseGraph, k: usize) -> Result<LatticeProblem> {
    let gamma = build_gamma_a(g, k)?;
    let kf = k as f64;
    let kk = k * k;
    let (nv, ne) = (g.num_vertices() as f64, g.num_edges() as f64);
    let d = g.degree() as f64;
    let vars = gamma.num_edges();
    let rhs = vec![BigRational::new(BigInt::one(), BigInt::from(k)); gamma.num_vertices()];
    let split = move |x: &[f64]| -> Vec<Vec<f64>> { x.chunks(kk).map(<[f64]>::to_vec).collect() };
    let g_phi = g.clone();
    let phi = move |x: &[f64]| f_big_a(&g_phi, &split(x), k).unwrap_or(f64::NEG_INFINITY);
    let psi = move |x: &[f64]| x.iter().map(|a| a.sqrt()).product::<f64>().powf(d - 1.0);
    let g_h = g.clone();
    let hessian = move |x: &[f64]| f_big_a_hessian(&g_h, &split(x), k);
    let log_scale = move |n: usize| {
        let two_pi_n = (2.0 * std::f64::consts::PI * n as f64).ln();
        ne / 2.0 * log_gamma_nk(n, k).unwrap_or(f64::NAN)
            + (-(kf * kf - 1.0) * nv / 2.0 + (2.0 * kf * kf - 1.0) * ne / 2.0) * two_pi_n
    };
    Ok(LatticeProblem {
        gamma,
        rhs,
        lower: vec![0.0; vars],
        upper: vec![1.0 / kf; vars],
        phi: Box::new(phi),
        psi: Box::new(psi),
        hessian: Some(Box::new(hessian)),
        log_scale: Box::new(log_scale),
        xhat: vec![1.0 / (kf * kf); vars],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowedSum {
    pub log_window: f64,
    pub log_full: f64,
    /// window / full.
    pub ratio: f64,
    pub window_points: u64,
    pub total_points: u64,
    pub radius: f64,
}

/// Lattice points m/n of the problem as integer vectors m, with D m = n y and
/// n lower <= m <= n upper. Requires a bipartite Gamma.
pub fn lattice_points(p: &LatticeProblem, n: usize, cap: f64) -> Result<Vec<Vec<u64>>> {
    if !p.gamma.is_bipartite() {
        return Err(Error::Domain("lattice enumeration needs a bipartite constraint graph".into()));
    }
    let targets: Vec<i64> = p
        .rhs
        .iter()
        .map(|y| {
            let v = y * BigRational::from_integer(BigInt::from(n));
            if v.is_integer() {
                v.to_integer().to_i64().ok_or_else(|| Error::InvalidArgument("target too large".into()))
            } else {
                Err(Error::InvalidArgument(format!("n y is not integral for n = {n}")))
            }
        })
        .collect::<Result<_>>()?;
    let lo: Vec<i64> = p.lower.iter().map(|x| (x * n as f64 - 1e-9).ceil().max(0.0) as i64).collect();
    let hi: Vec<i64> = p.upper.iter().map(|x| (x * n as f64 + 1e-9).floor() as i64).collect();
    let edges = p.gamma.edges().to_vec();
    let mut remaining_edges = vec![0usize; p.gamma.num_vertices()];
    for &(u, v) in &edges {
        remaining_edges[u] += 1;
        remaining_edges[v] += 1;
    }
    struct State<'a> {
        edges: &'a [(usize, usize)],
        lo: &'a [i64],
        hi: &'a [i64],
        residual: Vec<i64>,
        remaining: Vec<usize>,
        current: Vec<u64>,
        out: Vec<Vec<u64>>,
        cap: f64,
    }
    fn go(s: &mut State<'_>, e: usize) -> Result<()> {
        if e == s.edges.len() {
            if s.residual.iter().all(|&r| r == 0) {
                if s.out.len() as f64 >= s.cap {
                    return Err(Error::TooLarge { what: "lattice points", size: s.out.len() as f64 + 1.0, cap: s.cap });
                }
                s.out.push(s.current.clone());
            }
            return Ok(());
        }
        let (u, v) = s.edges[e];
        s.remaining[u] -= 1;
        s.remaining[v] -= 1;
        let mut low = s.lo[e];
        let mut high = s.hi[e].min(s.residual[u]).min(s.residual[v]);
        if s.remaining[u] == 0 {
            low = low.max(s.residual[u]);
            high = high.min(s.residual[u]);
        }
        if s.remaining[v] == 0 {
            low = low.max(s.residual[v]);
            high = high.min(s.residual[v]);
        }
        for x in low..=high {
            s.residual[u] -= x;
            s.residual[v] -= x;
            s.current[e] = x as u64;
            let res = go(s, e + 1);
            s.residual[u] += x;
            s.residual[v] += x;
            res?;
        }
        s.remaining[u] += 1;
        s.remaining[v] += 1;
        Ok(())
    }
    let mut state = State {
        edges: &edges,
        lo: &lo,
        hi: &hi,
        residual: targets,
        remaining: remaining_edges,
        current: vec![0; edges.len()],
        out: Vec::new(),
        cap,
    };
    go(&mut state, 0)?;
    Ok(state.out)
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Sums exp(log_term(m)) over all lattice points and over those with
/// |m/n - xhat|_inf < gamma log n / sqrt n. Points at the minimal distance from xhat
/// always count as inside, so gamma = 0 keeps just the rounded maximiser.
pub fn windowed_sum(p: &LatticeProblem, n: usize, gamma: f64, log_term: &dyn Fn(&[u64]) -> f64) -> Result<WindowedSum> {
    let points = lattice_points(p, n, DEFAULT_LATTICE_CAP)?;
    if points.is_empty() {
        return Err(Error::Domain(format!("no lattice points at n = {n}")));
    }
    let nf = n as f64;
    let radius = gamma * nf.ln() / nf.sqrt();
    let dist = |m: &[u64]| m.iter().zip(&p.xhat).map(|(&x, &h)| (x as f64 / nf - h).abs()).fold(0.0, f64::max);
    let dists: Vec<f64> = points.iter().map(|m| dist(m)).collect();
    let nearest = dists.iter().copied().fold(f64::INFINITY, f64::min);
    let logs: Vec<f64> = points.iter().map(|m| log_term(m)).collect();
    let inside: Vec<f64> = logs
        .iter()
        .zip(&dists)
        .filter(|(_, &dd)| dd < radius || dd <= nearest + 1e-12)
        .map(|(l, _)| *l)
        .collect();
    let log_full = log_sum_exp(&logs);
    let log_window = log_sum_exp(&inside);
    Ok(WindowedSum {
        log_window,
        log_full,
        ratio: (log_window - log_full).exp(),
        window_points: inside.len() as u64,
        total_points: points.len() as u64,
        radius,
    })
}

/// log (1/prod (m_i)!), the b-dependent part of the strongly equitable first-moment sum.
pub fn ey_log_term(n: usize) -> impl Fn(&[u64]) -> f64 {
    let log_fact = log_factorials(n);
    move |m: &[u64]| -m.iter().map(|&x| log_fact[x as usize]).sum::<f64>()
}

/// log m! for m = 0..=n.
pub fn log_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..=n {
        acc += (i as f64).ln();
        out.push(acc);
    }
    out
}

/// log E[Y] rebuilt from the full lattice sum of `ey_log_term`, for cross-checks.
pub fn ey_log_from_lattice_sum(g: &BaseGraph, n: usize, k: usize, log_sum: f64) -> f64 {
    let lf = log_factorials(n);
    let q = n / k;
    let (nv, ne) = (g.num_vertices() as f64, g.num_edges() as f64);
    let kf = k as f64;
    -ne * lf[n] + nv * (lf[n] - kf * lf[q]) + ne * 2.0 * kf * lf[q] + log_sum
}

/// Growth rate helper re-exported for callers building their own problems.
pub fn growth_exponent(g: &BaseGraph, k: usize) -> f64 {
    log_growth_base(g, k)
}
