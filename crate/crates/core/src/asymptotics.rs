//! Closed-form asymptotic constants: cycle statistics, first and second moment constants,
//! the saddle-point factor, and the small-subgraph-conditioning identity.

use nalgebra::{DMatrix, SymmetricEigen};
use num_bigint::{BigInt, BigUint};
use num_traits::Signed;
use serde::Serialize;

use crate::base_graph::BaseGraph;
use crate::error::{Error, Result};
use crate::thresholds::ell_threshold;

/// Default truncation order of the cycle series.
pub const DEFAULT_SERIES_ORDER: usize = 200;

/// A real number stored as log|x| plus a sign in {-1, 0, 1}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogValue {
    pub log_abs: f64,
    pub sign: i8,
}

impl LogValue {
    pub fn from_log(log_abs: f64) -> Self {
        Self { log_abs, sign: 1 }
    }

    pub fn zero() -> Self {
        Self { log_abs: f64::NEG_INFINITY, sign: 0 }
    }

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            Self::zero()
        } else {
            Self { log_abs: x.abs().ln(), sign: if x > 0.0 { 1 } else { -1 } }
        }
    }

    pub fn value(&self) -> f64 {
        f64::from(self.sign) * self.log_abs.exp()
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    /// self / other, finite whenever the logs are close even if the values overflow.
    pub fn ratio(&self, other: &LogValue) -> f64 {
        if other.sign == 0 {
            return f64::NAN;
        }
        if self.sign == 0 {
            return 0.0;
        }
        f64::from(self.sign * other.sign) * (self.log_abs - other.log_abs).exp()
    }

    pub fn mul(&self, other: &LogValue) -> LogValue {
        if self.sign == 0 || other.sign == 0 {
            return Self::zero();
        }
        Self { log_abs: self.log_abs + other.log_abs, sign: self.sign * other.sign }
    }
}

fn check_k(k: usize) -> Result<()> {
    if k < 3 {
        return Err(Error::InvalidArgument(format!("need k >= 3, got {k}")));
    }
    Ok(())
}

/// s_j = beta_+^j + beta_-^j for the roots of x^2 - alpha x + (d - 1), j = 1..=j_max.
pub fn power_sums(alpha: f64, d: usize, j_max: usize) -> Vec<f64> {
    let dm1 = d as f64 - 1.0;
    let mut out = Vec::with_capacity(j_max);
    let (mut prev, mut cur) = (2.0, alpha);
    for _ in 0..j_max {
        out.push(cur);
        let next = alpha * cur - dm1 * prev;
        prev = cur;
        cur = next;
    }
    out
}

fn excess(g: &BaseGraph) -> f64 {
    g.num_edges() as f64 - g.num_vertices() as f64
}

fn parity_term(j: usize) -> f64 {
    if j % 2 == 0 {
        2.0
    } else {
        0.0
    }
}

/// Number of closed non-backtracking walks of each length 1..=j_max, as floats.
pub fn walk_counts_float(g: &BaseGraph, j_max: usize) -> Vec<f64> {
    let spec = g.adjacency_spectrum();
    let mut c: Vec<f64> = (1..=j_max).map(|j| excess(g) * parity_term(j)).collect();
    for &alpha in &spec.eigenvalues {
        for (cj, s) in c.iter_mut().zip(power_sums(alpha, g.degree(), j_max)) {
            *cj += s;
        }
    }
    c
}

/// c_j rounded from the spectral formula.
pub fn walk_count_cj(g: &BaseGraph, j: usize) -> Result<u64> {
    if j == 0 {
        return Err(Error::InvalidArgument("walk length must be at least 1".into()));
    }
    let c = walk_counts_float(g, j)[j - 1];
    let rounded = c.round();
    let tol = 1e-6 * rounded.abs().max(1.0);
    if (c - rounded).abs() > tol || rounded < 0.0 || rounded > u64::MAX as f64 {
        return Err(Error::NumericInstability(format!("c_{j} = {c} is not near a nonnegative integer")));
    }
    Ok(rounded as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SscmConstants {
    /// lambda_j for j = 1..=j_max (index 0 is j = 1).
    pub lambda: Vec<f64>,
    pub delta: Vec<f64>,
    pub j_max: usize,
    /// (d-1)/(k-1)^2, the geometric rate of lambda_j delta_j^2.
    pub convergence_ratio: f64,
}

impl SscmConstants {
    pub fn lambda_at(&self, j: usize) -> f64 {
        self.lambda[j - 1]
    }

    pub fn delta_at(&self, j: usize) -> f64 {
        self.delta[j - 1]
    }
}

pub fn delta_j(k: usize, j: usize) -> f64 {
    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
    sign / (k as f64 - 1.0).powi(j as i32 - 1)
}

pub fn convergence_ratio(g: &BaseGraph, k: usize) -> f64 {
    (g.degree() as f64 - 1.0) / (k as f64 - 1.0).powi(2)
}

pub fn sscm_constants(g: &BaseGraph, k: usize, j_max: usize) -> Result<SscmConstants> {
    if j_max < 3 {
        return Err(Error::InvalidArgument(format!("truncation order must be >= 3, got {j_max}")));
    }
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need k >= 2, got {k}")));
    }
    let c = walk_counts_float(g, j_max);
    let lambda = c.iter().enumerate().map(|(i, cj)| cj / (2.0 * (i + 1) as f64)).collect();
    let delta = (1..=j_max).map(|j| delta_j(k, j)).collect();
    Ok(SscmConstants { lambda, delta, j_max, convergence_ratio: convergence_ratio(g, k) })
}

/// (lambda, lambda') = ((k-1)^2 + 1, (k-1)^2 - 1).
pub fn lambda_pair(k: usize) -> (f64, f64) {
    let s = (k as f64 - 1.0).powi(2);
    (s + 1.0, s - 1.0)
}

pub fn log_c1(g: &BaseGraph, k: usize) -> Result<f64> {
    check_k(k)?;
    let kf = k as f64;
    let nv = g.num_vertices() as f64;
    let ne = g.num_edges() as f64;
    Ok(kf * nv / 2.0 * kf.ln() + (kf - 1.0) * ne / 2.0 * ((kf - 1.0).powi(2) / (kf * (kf - 2.0))).ln())
}

pub fn c1(g: &BaseGraph, k: usize) -> Result<f64> {
    Ok(log_c1(g, k)?.exp())
}

/// Factors lambda lambda' + d - alpha_i (k-1)^2 over the adjacency spectrum.
fn h_factors(g: &BaseGraph, k: usize) -> Result<Vec<f64>> {
    let (l, lp) = lambda_pair(k);
    let s = (k as f64 - 1.0).powi(2);
    let d = g.degree() as f64;
    let factors: Vec<f64> = g.adjacency_spectrum().eigenvalues.iter().map(|a| l * lp + d - a * s).collect();
    if let Some(bad) = factors.iter().find(|&&f| f <= 0.0) {
        return Err(Error::Domain(format!("h(d,k) has a nonpositive factor {bad}")));
    }
    Ok(factors)
}

pub fn log_h(g: &BaseGraph, k: usize) -> Result<f64> {
    check_k(k)?;
    let (l, lp) = lambda_pair(k);
    let kf = k as f64;
    let nv = g.num_vertices() as f64;
    let prod: f64 = h_factors(g, k)?.iter().map(|f| f.ln()).sum();
    Ok(nv * (kf * kf / (l * lp)).ln() + prod)
}

pub fn h_dk(g: &BaseGraph, k: usize) -> Result<f64> {
    Ok(log_h(g, k)?.exp())
}

/// log C2. Evaluated whenever every factor of h is positive; it is the second-moment
/// constant only below the colourability threshold.
pub fn log_c2(g: &BaseGraph, k: usize) -> Result<f64> {
    check_k(k)?;
    let kf = k as f64;
    let nv = g.num_vertices() as f64;
    let ne = g.num_edges() as f64;
    let (l, lp) = lambda_pair(k);
    let s = (kf - 1.0).powi(2);
    let num = (kf * kf - kf + 1.0) * nv * kf.ln() + (2.0 * kf * kf - 2.0 * kf) * ne * (kf - 1.0).ln();
    let den = s * ne / 2.0 * l.ln() + (kf * kf - 1.0) * ne / 2.0 * lp.ln() + s / 2.0 * log_h(g, k)?;
    Ok(num - den)
}

pub fn c2(g: &BaseGraph, k: usize) -> Result<f64> {
    Ok(log_c2(g, k)?.exp())
}

/// log(C2/C1^2) via the product over the spectrum, without going through C1 and C2.
pub fn log_c2_over_c1_sq_closed_form(g: &BaseGraph, k: usize) -> Result<f64> {
    check_k(k)?;
    let kf = k as f64;
    let ne = g.num_edges() as f64;
    let (l, lp) = lambda_pair(k);
    let s = (kf - 1.0).powi(2);
    let prod: f64 = h_factors(g, k)?.iter().map(|f| f.ln()).sum();
    Ok(s / 2.0 * (4.0 * ne * (kf - 1.0).ln() - excess(g) * (l * lp).ln() - prod))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentConstants {
    pub c1: f64,
    pub c2: f64,
    pub h: f64,
    pub lambda_pair: (f64, f64),
}

/// All three constants; requires d below the colourability threshold.
pub fn moment_constants(g: &BaseGraph, k: usize) -> Result<MomentConstants> {
    check_k(k)?;
    let ell = ell_threshold(k)?;
    if g.degree() as f64 >= ell {
        return Err(Error::Domain(format!("d = {} is not below l_{k} = {ell}", g.degree())));
    }
    Ok(MomentConstants { c1: c1(g, k)?, c2: c2(g, k)?, h: h_dk(g, k)?, lambda_pair: lambda_pair(k) })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SscmCheck {
    /// log(C2/C1^2) from the constants.
    pub lhs: f64,
    /// sum_{j=1}^{J} lambda_j delta_j^2.
    pub partial: f64,
    pub gap: f64,
    /// log(C2/C1^2) from the spectral product.
    pub closed_form: f64,
    pub terms: usize,
    /// Bound on the omitted tail.
    pub tail_bound: f64,
}

/// Bound on sum_{j>J} lambda_j delta_j^2 from |c_j| <= 2|E|(d-1)^j.
fn tail_bound(g: &BaseGraph, k: usize, terms: usize) -> f64 {
    let rho = convergence_ratio(g, k);
    let s = (k as f64 - 1.0).powi(2);
    let next = terms as f64 + 1.0;
    g.num_edges() as f64 * s * rho.powf(next) / (next * (1.0 - rho))
}

/// Partial sums of lambda_j delta_j^2 computed with a rescaled recurrence so nothing overflows.
fn series_partial(g: &BaseGraph, k: usize, terms: usize) -> f64 {
    let s = (k as f64 - 1.0).powi(2);
    let dm1 = g.degree() as f64 - 1.0;
    let spec = g.adjacency_spectrum();
    // t_j = c_j / s^j
    let mut t = vec![0.0; terms];
    let mut scale = 1.0;
    for (j, tj) in t.iter_mut().enumerate() {
        scale /= s;
        *tj = excess(g) * parity_term(j + 1) * scale;
    }
    for &alpha in &spec.eigenvalues {
        let (mut prev, mut cur) = (2.0, alpha / s);
        for tj in t.iter_mut() {
            *tj += cur;
            let next = alpha / s * cur - dm1 / (s * s) * prev;
            prev = cur;
            cur = next;
        }
    }
    // lambda_j delta_j^2 = c_j / (2j (k-1)^{2j-2}) = t_j s / (2j)
    t.iter().enumerate().map(|(i, tj)| tj * s / (2.0 * (i + 1) as f64)).sum()
}

pub fn sscm_identity_check(g: &BaseGraph, k: usize, terms: usize) -> Result<SscmCheck> {
    check_k(k)?;
    let ratio = convergence_ratio(g, k);
    if ratio >= 1.0 {
        return Err(Error::DivergentSeries { ratio });
    }
    if terms == 0 {
        return Err(Error::InvalidArgument("need at least one term".into()));
    }
    let lhs = log_c2(g, k)? - 2.0 * log_c1(g, k)?;
    let closed_form = log_c2_over_c1_sq_closed_form(g, k)?;
    let partial = series_partial(g, k, terms);
    Ok(SscmCheck {
        lhs,
        partial,
        gap: (lhs - partial).abs(),
        closed_form,
        terms,
        tail_bound: tail_bound(g, k, terms),
    })
}

/// Starts at the default order and doubles until the tail bound drops below `tol`.
pub fn sscm_series(g: &BaseGraph, k: usize, tol: f64) -> Result<SscmCheck> {
    let mut terms = DEFAULT_SERIES_ORDER;
    let ratio = convergence_ratio(g, k);
    if ratio >= 1.0 {
        return Err(Error::DivergentSeries { ratio });
    }
    while tail_bound(g, k, terms) >= tol {
        if terms > 1 << 24 {
            return Err(Error::NumericInstability(format!("tail bound still above {tol} at {terms} terms")));
        }
        terms *= 2;
    }
    sscm_identity_check(g, k, terms)
}

/// Proper k-colourings of a rooted directed j-cycle: (k-1)^j + (k-1)(-1)^j.
pub fn cycle_colorings(j: usize, k: usize) -> Result<BigUint> {
    if j < 3 || k < 2 {
        return Err(Error::InvalidArgument(format!("need j >= 3 and k >= 2, got j = {j}, k = {k}")));
    }
    let km1 = BigInt::from(k - 1);
    let sign = if j % 2 == 0 { BigInt::from(1) } else { BigInt::from(-1) };
    let v = num_traits::pow(km1.clone(), j) + km1 * sign;
    Ok(v.abs().to_biguint().expect("nonnegative"))
}

/// log(k^|V| ((k-1)/k)^|E|), the exponential growth rate of E[Y].
pub fn log_growth_base(g: &BaseGraph, k: usize) -> f64 {
    let kf = k as f64;
    g.num_vertices() as f64 * kf.ln() + g.num_edges() as f64 * ((kf - 1.0) / kf).ln()
}

fn check_divisible(n: usize, k: usize) -> Result<()> {
    if n == 0 || n % k != 0 {
        return Err(Error::InvalidArgument(format!("need k | n, got n = {n}, k = {k}")));
    }
    Ok(())
}

/// C1 (2 pi n)^{-(k-1)|V|/2} (growth base)^n.
pub fn ey_asym(g: &BaseGraph, n: usize, k: usize) -> Result<LogValue> {
    check_k(k)?;
    check_divisible(n, k)?;
    let nf = n as f64;
    let two_pi_n = (2.0 * std::f64::consts::PI * nf).ln();
    let kf = k as f64;
    Ok(LogValue::from_log(
        log_c1(g, k)? - (kf - 1.0) * g.num_vertices() as f64 / 2.0 * two_pi_n + nf * log_growth_base(g, k),
    ))
}

/// C2 (2 pi n)^{-(k-1)|V|} (growth base)^{2n}; requires d < l_k.
pub fn ey2_asym(g: &BaseGraph, n: usize, k: usize) -> Result<LogValue> {
    check_k(k)?;
    check_divisible(n, k)?;
    let ell = ell_threshold(k)?;
    if g.degree() as f64 >= ell {
        return Err(Error::Domain(format!("d = {} is not below l_{k} = {ell}", g.degree())));
    }
    let nf = n as f64;
    let two_pi_n = (2.0 * std::f64::consts::PI * nf).ln();
    let kf = k as f64;
    Ok(LogValue::from_log(
        log_c2(g, k)? - (kf - 1.0) * g.num_vertices() as f64 * two_pi_n
            + 2.0 * nf * log_growth_base(g, k),
    ))
}

/// lambda_j (1 + delta_j), the limit of E[Y Z_j]/E[Y].
pub fn joint_moment_prediction(g: &BaseGraph, k: usize, j: usize) -> Result<f64> {
    joint_factorial_moment_prediction(g, k, &[(j, 1)])
}

/// prod (lambda_j (1 + delta_j))^{p_j} for a list of (j, p_j).
pub fn joint_factorial_moment_prediction(g: &BaseGraph, k: usize, powers: &[(usize, u32)]) -> Result<f64> {
    let j_max = powers.iter().map(|&(j, _)| j).max().unwrap_or(3);
    if let Some(&(j, _)) = powers.iter().find(|&&(j, _)| j < 3) {
        return Err(Error::InvalidArgument(format!("cycle length must be >= 3, got {j}")));
    }
    let consts = sscm_constants(g, k, j_max.max(3))?;
    Ok(powers
        .iter()
        .map(|&(j, p)| (consts.lambda_at(j) * (1.0 + consts.delta_at(j))).powi(p as i32))
        .product())
}

/// log gamma(n,k) = log of k^{3k^2+1}(k-1)^{4k(k-1)} / ((2 pi n)^{2k^2-1} lambda^{(k-1)^2} (k-2)^{k^2-1}).
pub fn log_gamma_nk(n: usize, k: usize) -> Result<f64> {
    check_k(k)?;
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    let kf = k as f64;
    let (l, _) = lambda_pair(k);
    let two_pi_n = (2.0 * std::f64::consts::PI * n as f64).ln();
    Ok((3.0 * kf * kf + 1.0) * kf.ln() + 4.0 * kf * (kf - 1.0) * (kf - 1.0).ln()
        - (2.0 * kf * kf - 1.0) * two_pi_n
        - (kf - 1.0).powi(2) * l.ln()
        - (kf * kf - 1.0) * (kf - 2.0).ln())
}

pub fn gamma_nk(n: usize, k: usize) -> Result<LogValue> {
    Ok(LogValue::from_log(log_gamma_nk(n, k)?))
}

/// log gamma(n,k) rebuilt from the nonzero spectrum of B, as the Gaussian integral over
/// the inner saddle produces it.
pub fn log_gamma_nk_from_spectrum(n: usize, k: usize) -> Result<f64> {
    check_k(k)?;
    let kf = k as f64;
    let s = (kf - 1.0).powi(2);
    let dim = 2.0 * kf * kf;
    let log_pdet: f64 = b_spectrum_expected(k)
        .iter()
        .filter(|&&x| x != 0.0)
        .map(|x| x.ln())
        .sum();
    let two_pi_n = (2.0 * std::f64::consts::PI * n as f64).ln();
    Ok((dim - 1.0) * ((kf * kf * s).ln() - two_pi_n) - (log_pdet - dim.ln()))
}

/// (k-1)^2 I + [[0,1],[1,0]] (x) (J-I) (x) (J-I), of size 2k^2.
pub fn build_b(k: usize) -> Result<DMatrix<f64>> {
    check_k(k)?;
    let jm = DMatrix::from_fn(k, k, |i, j| if i == j { 0.0 } else { 1.0 });
    let swap = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    let off = swap.kronecker(&jm.kronecker(&jm));
    let s = (k as f64 - 1.0).powi(2);
    Ok(DMatrix::identity(2 * k * k, 2 * k * k) * s + off)
}

/// The listed eigenvalue multiset of B, sorted ascending.
pub fn b_spectrum_expected(k: usize) -> Vec<f64> {
    let kf = k as f64;
    let s = (kf - 1.0).powi(2);
    let mut out = vec![2.0 * s, 0.0];
    out.extend(std::iter::repeat((kf - 1.0) * (kf - 2.0)).take(2 * k - 2));
    out.extend(std::iter::repeat(kf * (kf - 1.0)).take(2 * k - 2));
    out.extend(std::iter::repeat(s + 1.0).take((k - 1) * (k - 1)));
    out.extend(std::iter::repeat(s - 1.0).take((k - 1) * (k - 1)));
    out.sort_by(f64::total_cmp);
    out
}

pub fn b_spectrum_computed(k: usize) -> Result<Vec<f64>> {
    let mut ev: Vec<f64> = SymmetricEigen::new(build_b(k)?).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

pub fn b_spectrum_check(k: usize) -> Result<bool> {
    let got = b_spectrum_computed(k)?;
    let want = b_spectrum_expected(k);
    Ok(got.len() == want.len() && got.iter().zip(&want).all(|(a, b)| (a - b).abs() < 1e-8))
}

/// (growth base)^{2r}, the predicted E[Y_n^2]/E[Y_{n-r}^2].
pub fn scaling_factor(g: &BaseGraph, k: usize, r: usize) -> Result<f64> {
    if r >= k {
        return Err(Error::InvalidArgument(format!("need r < k, got r = {r}, k = {k}")));
    }
    Ok((2.0 * r as f64 * log_growth_base(g, k)).exp())
}

pub fn growth_base_f64(g: &BaseGraph, k: usize) -> f64 {
    let kf = k as f64;
    kf.powi(g.num_vertices() as i32) * ((kf - 1.0) / kf).powi(g.num_edges() as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coloring::count_proper_colorings;
    use crate::lift::LiftedGraph;
    use crate::moments_exact::expected_y_exact;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use num_traits::ToPrimitive;

    fn k(m: usize) -> BaseGraph {
        BaseGraph::complete(m).unwrap()
    }

    /// Closed non-backtracking walks of length j by direct enumeration over darts.
    fn brute_walks(g: &BaseGraph, j: usize) -> u64 {
        let darts: Vec<(usize, usize, usize)> = g
            .edges()
            .iter()
            .enumerate()
            .flat_map(|(e, &(t, h))| [(t, h, e), (h, t, e)])
            .collect();
        fn go(darts: &[(usize, usize, usize)], path: &mut Vec<usize>, j: usize) -> u64 {
            let last = darts[*path.last().unwrap()];
            if path.len() == j {
                let first = darts[path[0]];
                return u64::from(last.1 == first.0 && !(last.2 == first.2 && last.0 == first.1));
            }
            let mut total = 0;
            for (i, d) in darts.iter().enumerate() {
                if d.0 == last.1 && !(d.2 == last.2 && d.1 == last.0) {
                    path.push(i);
                    total += go(darts, path, j);
                    path.pop();
                }
            }
            total
        }
        (0..darts.len())
            .map(|s| {
                let mut path = vec![s];
                go(&darts, &mut path, j)
            })
            .sum()
    }

    #[test]
    fn power_sum_examples() {
        assert_eq!(power_sums(3.0, 3, 3), vec![3.0, 5.0, 9.0]);
        assert_eq!(power_sums(-1.0, 3, 3), vec![-1.0, -3.0, 5.0]);
        assert_eq!(power_sums(2.0, 2, 3), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn walk_count_examples() {
        assert_eq!(walk_count_cj(&k(4), 3).unwrap(), 24);
        assert_eq!(walk_count_cj(&k(3), 3).unwrap(), 6);
        assert_eq!(walk_count_cj(&k(4), 1).unwrap(), 0);
        assert_eq!(walk_count_cj(&k(4), 2).unwrap(), 0);
        assert!(walk_count_cj(&k(4), 0).is_err());
    }

    #[test]
    fn walk_counts_match_enumeration() {
        for g in [k(3), k(4), k(5), BaseGraph::petersen()] {
            for j in 1..=8 {
                assert_eq!(walk_count_cj(&g, j).unwrap(), brute_walks(&g, j), "{g:?} j = {j}");
            }
        }
        let doubled = BaseGraph::new(3, vec![(0, 1), (0, 1), (1, 2), (1, 2), (0, 2), (0, 2)]).unwrap();
        for j in 1..=6 {
            assert_eq!(walk_count_cj(&doubled, j).unwrap(), brute_walks(&doubled, j));
        }
        assert!(walk_count_cj(&doubled, 2).unwrap() > 0);
    }

    #[test]
    fn sscm_constant_examples() {
        let c = sscm_constants(&k(4), 3, 3).unwrap();
        assert_abs_diff_eq!(c.lambda_at(3), 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.delta_at(3), -0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(c.lambda_at(3) * (1.0 + c.delta_at(3)), 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.lambda_at(1), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.lambda_at(2), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.convergence_ratio, 0.5, epsilon = 1e-15);
        let c = sscm_constants(&k(3), 3, 5).unwrap();
        assert_abs_diff_eq!(c.lambda_at(3), 1.0, epsilon = 1e-12);
        assert!(sscm_constants(&k(3), 3, 2).is_err());
        for (j, d) in c.delta.iter().enumerate() {
            assert_eq!(d.is_sign_negative(), j % 2 == 0);
        }
        assert!(c.lambda.iter().all(|&l| l >= -1e-9));
    }

    #[test]
    fn c1_values() {
        assert_relative_eq!(c1(&k(3), 3).unwrap(), 3f64.powf(4.5) * (4.0f64 / 3.0).powi(3), max_relative = 1e-12);
        assert_relative_eq!(c1(&k(3), 3).unwrap(), 332.553_755, max_relative = 1e-8);
        assert_relative_eq!(c1(&k(4), 3).unwrap(), 4096.0, max_relative = 1e-12);
        for kk in 3..=10 {
            for m in 4..=8 {
                assert!(c1(&k(m), kk).unwrap() > 0.0);
            }
        }
        assert!(c1(&k(4), 2).is_err());
    }

    #[test]
    fn h_values() {
        assert_relative_eq!(h_dk(&k(4), 3).unwrap(), 0.1296 * 6.0 * 10648.0, max_relative = 1e-12);
        assert_relative_eq!(h_dk(&k(4), 3).unwrap(), 8279.885, max_relative = 1e-6);
        assert_relative_eq!(h_dk(&k(3), 3).unwrap(), 0.216 * 9.0 * 441.0, max_relative = 1e-12);
        let m = moment_constants(&k(4), 3).unwrap();
        assert!(m.c2 > 0.0 && m.c1 > 0.0);
        let (l, lp) = m.lambda_pair;
        assert_abs_diff_eq!(l * lp, 2f64.powi(4) - 1.0, epsilon = 1e-12);
        assert!(matches!(moment_constants(&k(5), 3), Err(Error::Domain(_))));
    }

    #[test]
    fn sscm_identity() {
        let c = sscm_identity_check(&k(4), 3, 200).unwrap();
        assert!(c.gap < 1e-8, "{c:?}");
        assert_relative_eq!(c.lhs, c.closed_form, max_relative = 1e-10);
        let c = sscm_identity_check(&k(5), 3, 400).unwrap();
        assert!(c.gap < 1e-8, "{c:?}");
        assert_relative_eq!(c.lhs, c.closed_form, max_relative = 1e-10);
        assert!(matches!(sscm_identity_check(&k(12), 3, 100), Err(Error::DivergentSeries { .. })));
        let c = sscm_series(&BaseGraph::petersen(), 4, 1e-12).unwrap();
        assert!(c.gap < 1e-10 && c.tail_bound < 1e-12);
    }

    #[test]
    fn sscm_partial_sums_match_direct_terms() {
        let g = k(4);
        let consts = sscm_constants(&g, 3, 30).unwrap();
        let direct: f64 = consts.lambda.iter().zip(&consts.delta).map(|(l, d)| l * d * d).sum();
        assert_relative_eq!(series_partial(&g, 3, 30), direct, max_relative = 1e-12);
    }

    #[test]
    fn sscm_gap_is_monotone() {
        for (g, kk) in [(k(4), 3), (k(5), 3), (k(5), 4)] {
            let mut prev = f64::INFINITY;
            for terms in (50..=500).step_by(50) {
                let gap = sscm_identity_check(&g, kk, terms).unwrap().gap;
                assert!(gap <= prev + 1e-15, "{terms}: {gap} > {prev}");
                prev = gap;
            }
        }
    }

    #[test]
    fn cycle_colouring_values() {
        assert_eq!(cycle_colorings(3, 3).unwrap(), BigUint::from(6u32));
        assert_eq!(cycle_colorings(4, 3).unwrap(), BigUint::from(18u32));
        assert_eq!(cycle_colorings(3, 2).unwrap(), BigUint::from(0u32));
        for j in 3..=8 {
            let edges: Vec<_> = (0..j).map(|i| (i, (i + 1) % j)).collect();
            let cyc = LiftedGraph::plain(j, &edges).unwrap();
            for kk in 2..=5 {
                assert_eq!(cycle_colorings(j, kk).unwrap(), count_proper_colorings(&cyc, kk).unwrap());
            }
        }
    }

    #[test]
    fn first_moment_trend() {
        let g = k(3);
        assert!(ey_asym(&g, 3, 3).unwrap().sign > 0);
        let ratio = |n| {
            let exact = expected_y_exact(&g, n, 3).unwrap();
            let log_exact = exact.numer().to_f64().unwrap().ln() - exact.denom().to_f64().unwrap().ln();
            (log_exact - ey_asym(&g, n, 3).unwrap().log_abs).exp()
        };
        let (r30, r60) = (ratio(30), ratio(60));
        assert!((r60 - 1.0).abs() < (r30 - 1.0).abs(), "{r30} {r60}");
        assert!((r60 - 1.0).abs() < 0.05, "{r60}");
        assert!(ey_asym(&g, 4, 3).is_err());
    }

    #[test]
    fn second_moment_ratio_is_constant() {
        for (g, kk) in [(k(4), 3), (BaseGraph::petersen(), 4), (k(5), 4)] {
            for n in [60, 300, 3000] {
                let r = ey2_asym(&g, n, kk).unwrap().log_abs - 2.0 * ey_asym(&g, n, kk).unwrap().log_abs;
                let expect = log_c2(&g, kk).unwrap() - 2.0 * log_c1(&g, kk).unwrap();
                assert_relative_eq!(r, expect, max_relative = 1e-9);
            }
        }
        assert!(ey2_asym(&k(5), 30, 3).is_err());
    }

    #[test]
    fn joint_predictions() {
        assert_abs_diff_eq!(joint_moment_prediction(&k(4), 3, 3).unwrap(), 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(joint_moment_prediction(&k(3), 3, 3).unwrap(), 0.75, epsilon = 1e-12);
        let c4 = brute_walks(&k(4), 4) as f64;
        assert_abs_diff_eq!(joint_moment_prediction(&k(4), 3, 4).unwrap(), c4 / 8.0 * 1.125, epsilon = 1e-12);
        let multi = joint_factorial_moment_prediction(&k(4), 3, &[(3, 2), (4, 1)]).unwrap();
        assert_abs_diff_eq!(multi, 9.0 * c4 / 8.0 * 1.125, epsilon = 1e-9);
        assert!(joint_moment_prediction(&k(4), 3, 2).is_err());
    }

    #[test]
    fn gamma_matches_spectrum_form() {
        for kk in 3..=6 {
            for n in [1, 30, 1000] {
                assert_relative_eq!(
                    log_gamma_nk(n, kk).unwrap(),
                    log_gamma_nk_from_spectrum(n, kk).unwrap(),
                    max_relative = 1e-12
                );
            }
        }
        assert!(gamma_nk(10, 3).unwrap().log_abs.is_finite());
    }

    #[test]
    fn b_matrix() {
        assert!(b_spectrum_check(3).unwrap());
        assert!(b_spectrum_check(4).unwrap());
        let b = build_b(3).unwrap();
        assert_eq!(b.nrows(), 18);
        assert_abs_diff_eq!(b.trace(), 72.0, epsilon = 1e-12);
        assert_eq!(b_spectrum_expected(4).len(), 32);
        assert!((&b - b.transpose()).abs().max() < 1e-15);
    }

    #[test]
    fn scaling_values() {
        assert_relative_eq!(scaling_factor(&k(3), 3, 1).unwrap(), 64.0, max_relative = 1e-12);
        assert_relative_eq!(scaling_factor(&k(3), 3, 2).unwrap(), 4096.0, max_relative = 1e-12);
        assert_abs_diff_eq!(scaling_factor(&k(3), 3, 0).unwrap(), 1.0, epsilon = 1e-15);
        assert!(scaling_factor(&k(3), 3, 3).is_err());
        assert_relative_eq!(growth_base_f64(&k(3), 3), 8.0, max_relative = 1e-12);
    }

    #[test]
    fn log_value_arithmetic() {
        let a = LogValue::from_f64(-3.0);
        let b = LogValue::from_f64(2.0);
        assert_abs_diff_eq!(a.mul(&b).value(), -6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a.ratio(&b), -1.5, epsilon = 1e-12);
        assert!(LogValue::from_f64(0.0).is_zero());
        assert_eq!(LogValue::zero().mul(&b).sign, 0);
    }
}
