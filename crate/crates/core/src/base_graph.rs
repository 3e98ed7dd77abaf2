//! Loopless regular multigraphs with a frozen edge orientation.

use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaseGraph {
    num_vertices: usize,
    edges: Vec<(usize, usize)>,
    degree: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralSummary {
    /// Sorted descending.
    pub eigenvalues: Vec<f64>,
    pub degree: usize,
}

/// Checks the regular-loopless-multigraph invariants on raw parts and returns the degree.
pub fn validate_edges(num_vertices: usize, edges: &[(usize, usize)]) -> Result<usize> {
    if num_vertices < 2 {
        return Err(Error::TooFewVertices);
    }
    let mut deg = vec![0usize; num_vertices];
    for (idx, &(t, h)) in edges.iter().enumerate() {
        if t >= num_vertices || h >= num_vertices {
            return Err(Error::InvalidArgument(format!(
                "edge {idx} = ({t},{h}) references a vertex outside [0,{num_vertices})"
            )));
        }
        if t == h {
            return Err(Error::Loop { edge: idx, vertex: t });
        }
        deg[t] += 1;
        deg[h] += 1;
    }
    let d = deg[0];
    if let Some((vertex, &found)) = deg.iter().enumerate().find(|(_, &x)| x != d) {
        return Err(Error::DegreeMismatch { vertex, expected: d, found });
    }
    if d < 2 {
        return Err(Error::TooFewVertices);
    }
    Ok(d)
}

impl BaseGraph {
    /// Edges are sorted by (tail, head) with insertion order breaking ties.
    pub fn new(num_vertices: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let degree = validate_edges(num_vertices, &edges)?;
        let mut edges = edges;
        edges.sort(); // stable on equal pairs, which are indistinguishable anyway
        Ok(Self { num_vertices, edges, degree })
    }

    pub fn complete(m: usize) -> Result<Self> {
        if m < 3 {
            return Err(Error::InvalidArgument(format!("K_{m} has degree below 2")));
        }
        let edges = (0..m)
            .flat_map(|u| (u + 1..m).map(move |v| (u, v)))
            .collect();
        Self::new(m, edges)
    }

    pub fn petersen() -> Self {
        let mut edges = Vec::with_capacity(15);
        for i in 0..5 {
            edges.push((i, (i + 1) % 5));
            edges.push((i, i + 5));
            edges.push((5 + i, 5 + (i + 2) % 5));
        }
        Self::new(10, edges).expect("Petersen graph is 3-regular")
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn validate(&self) -> Result<usize> {
        validate_edges(self.num_vertices, &self.edges)
    }

    /// Multiplicity-weighted adjacency.
    pub fn adjacency_matrix(&self) -> DMatrix<f64> {
        let n = self.num_vertices;
        let mut a = DMatrix::zeros(n, n);
        for &(t, h) in &self.edges {
            a[(t, h)] += 1.0;
            a[(h, t)] += 1.0;
        }
        a
    }

    pub fn adjacency_spectrum(&self) -> SpectralSummary {
        let eig = SymmetricEigen::new(self.adjacency_matrix());
        let mut eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        SpectralSummary { eigenvalues, degree: self.degree }
    }

    /// Neighbour list with repetition for parallel edges.
    pub fn neighbours(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::with_capacity(self.degree); self.num_vertices];
        for &(t, h) in &self.edges {
            adj[t].push(h);
            adj[h].push(t);
        }
        adj
    }

    pub fn is_simple(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        self.edges
            .iter()
            .all(|&(t, h)| seen.insert((t.min(h), t.max(h))))
    }

    /// Text format: a "V E" header line, then E lines "tail head".
    pub fn parse_text(text: &str) -> Result<Self> {
        let (v, edges) = parse_edge_list(text)?;
        Self::new(v, edges)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.num_vertices, self.edges.len());
        for (t, h) in &self.edges {
            out.push_str(&format!("{t} {h}\n"));
        }
        out
    }

    /// Accepts the shorthand "Km" (complete graph), "petersen", or a path to a text file.
    pub fn from_spec(spec: &str) -> Result<Self> {
        if let Some(m) = spec.strip_prefix('K').or_else(|| spec.strip_prefix('k')) {
            if let Ok(m) = m.parse::<usize>() {
                return Self::complete(m);
            }
        }
        if spec.eq_ignore_ascii_case("petersen") {
            return Ok(Self::petersen());
        }
        let text = std::fs::read_to_string(Path::new(spec))?;
        Self::parse_text(&text)
    }
}

/// Parses "V E" plus edge lines without imposing regularity.
pub fn parse_edge_list(text: &str) -> Result<(usize, Vec<(usize, usize)>)> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines.next().ok_or_else(|| Error::Parse("empty graph file".into()))?;
    let nums = parse_pair(header)?;
    let (v, e) = nums;
    let mut edges = Vec::with_capacity(e);
    for line in lines {
        edges.push(parse_pair(line)?);
    }
    if edges.len() != e {
        return Err(Error::Parse(format!("header promises {e} edges, found {}", edges.len())));
    }
    Ok((v, edges))
}

fn parse_pair(line: &str) -> Result<(usize, usize)> {
    let mut it = line.split_whitespace().map(str::parse::<usize>);
    match (it.next(), it.next(), it.next()) {
        (Some(Ok(a)), Some(Ok(b)), None) => Ok((a, b)),
        _ => Err(Error::Parse(format!("expected two integers, got {line:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn doubled_triangle() -> BaseGraph {
        BaseGraph::new(3, vec![(0, 1), (0, 1), (1, 2), (1, 2), (0, 2), (0, 2)]).unwrap()
    }

    #[test]
    fn complete_graphs() {
        let k4 = BaseGraph::complete(4).unwrap();
        assert_eq!((k4.num_vertices(), k4.num_edges(), k4.degree()), (4, 6, 3));
        let k3 = BaseGraph::complete(3).unwrap();
        assert_eq!((k3.num_vertices(), k3.num_edges(), k3.degree()), (3, 3, 2));
        assert!(matches!(BaseGraph::complete(2), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn validation_errors() {
        assert_eq!(BaseGraph::complete(4).unwrap().validate().unwrap(), 3);
        assert!(matches!(
            BaseGraph::new(2, vec![(0, 0), (1, 1)]),
            Err(Error::Loop { edge: 0, vertex: 0 })
        ));
        assert!(matches!(
            BaseGraph::new(3, vec![(0, 1), (1, 2)]),
            Err(Error::DegreeMismatch { .. })
        ));
        assert!(matches!(BaseGraph::new(1, vec![]), Err(Error::TooFewVertices)));
    }

    #[test]
    fn spectra() {
        let s = BaseGraph::complete(4).unwrap().adjacency_spectrum();
        for (x, y) in s.eigenvalues.iter().zip([3.0, -1.0, -1.0, -1.0]) {
            assert_abs_diff_eq!(*x, y, epsilon = 1e-10);
        }
        let s = BaseGraph::complete(3).unwrap().adjacency_spectrum();
        for (x, y) in s.eigenvalues.iter().zip([2.0, -1.0, -1.0]) {
            assert_abs_diff_eq!(*x, y, epsilon = 1e-10);
        }
        let s = doubled_triangle().adjacency_spectrum();
        assert_eq!(s.degree, 4);
        for (x, y) in s.eigenvalues.iter().zip([4.0, -2.0, -2.0]) {
            assert_abs_diff_eq!(*x, y, epsilon = 1e-10);
        }
    }

    #[test]
    fn petersen_spectrum() {
        let s = BaseGraph::petersen().adjacency_spectrum();
        let expected = [3.0, 1.0, 1.0, 1.0, 1.0, 1.0, -2.0, -2.0, -2.0, -2.0];
        for (x, y) in s.eigenvalues.iter().zip(expected) {
            assert_abs_diff_eq!(*x, y, epsilon = 1e-10);
        }
    }

    #[test]
    fn text_round_trip() {
        let g = doubled_triangle();
        assert_eq!(BaseGraph::parse_text(&g.to_text()).unwrap(), g);
        assert_eq!(BaseGraph::from_spec("K5").unwrap(), BaseGraph::complete(5).unwrap());
        assert!(BaseGraph::parse_text("3 2\n0 1\n").is_err());
    }

    fn relabel(g: &BaseGraph, perm: &[usize]) -> BaseGraph {
        let edges = g.edges().iter().map(|&(t, h)| (perm[t], perm[h])).collect();
        BaseGraph::new(g.num_vertices(), edges).unwrap()
    }

    proptest! {
        #[test]
        fn spectrum_trace_and_top(m in 3usize..9, perm_seed in any::<u64>()) {
            let g = BaseGraph::complete(m).unwrap();
            let mut perm: Vec<usize> = (0..m).collect();
            let mut s = perm_seed;
            for i in (1..m).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                perm.swap(i, (s >> 33) as usize % (i + 1));
            }
            let h = relabel(&g, &perm);
            let a = g.adjacency_spectrum();
            let b = h.adjacency_spectrum();
            prop_assert!((a.eigenvalues.iter().sum::<f64>()).abs() < 1e-9);
            prop_assert!((a.eigenvalues[0] - (m - 1) as f64).abs() < 1e-9);
            for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }
}
