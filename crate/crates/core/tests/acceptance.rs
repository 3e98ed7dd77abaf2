//! Acceptance suite: twelve criteria, one PASS/FAIL line each. Exits non-zero on any FAIL.

use std::time::{Duration, Instant};

use liftchroma::asymptotics::{b_spectrum_check, ey2_asym, ey_asym, h_dk, sscm_constants, sscm_identity_check, walk_count_cj};
use liftchroma::coloring::{chromatic_bounds, count_strongly_equitable, find_k_coloring, Budget};
use liftchroma::experiments::{joint_ratio_exact, mc_expectation, Limits, Statistic};
use liftchroma::lattice_tools::{
    cycle_kernel_basis, det_restricted, ey2_problem, ey_problem, incidence_unsigned, kernel_basis, laplace_estimate,
    tau_maximal_forests, to_f64_matrix, ConstraintGraph,
};
use liftchroma::lift::{count_cycles, expand, sample_lift, sample_seed};
use liftchroma::moments_exact::{brute_force_moment, expected_x_exact, expected_y2_exact, expected_y_exact};
use liftchroma::stochastic_opt::{an_gap, rect_gap, verify_max_uniform, Objective, StochasticMatrix};
use liftchroma::thresholds::{c_q, ell_threshold, k_d, u_threshold};
use liftchroma::BaseGraph;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn complete(m: usize) -> BaseGraph {
    BaseGraph::complete(m).expect("complete graph")
}

fn rat(x: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(x))
}

fn exact_oracles() -> Outcome {
    let k3 = complete(3);
    let x = expected_x_exact(&k3, 2, 3).map_err(e2s)?;
    let x_brute = brute_force_moment(&k3, 2, |l| {
        let lg = expand(l);
        liftchroma::coloring::count_proper_colorings(&lg, 3).map(|v| BigRational::from_integer(v.into()))
    })
    .map_err(e2s)?;
    ensure(x == rat(51) && x_brute == x, format!("E[X] = {x}, brute force {x_brute}"))?;

    let y_of = |l: &liftchroma::Lift<'_>| count_strongly_equitable(l, 3).map(|v| BigRational::from_integer(v.into()));
    let y = expected_y_exact(&k3, 3, 3).map_err(e2s)?;
    let y_brute = brute_force_moment(&k3, 3, y_of).map_err(e2s)?;
    ensure(y == rat(8) && y_brute == y, format!("E[Y] = {y}, brute force {y_brute}"))?;

    let y2 = expected_y2_exact(&k3, 3, 3).map_err(e2s)?;
    let y2_brute = brute_force_moment(&k3, 3, |l| y_of(l).map(|v| &v * &v)).map_err(e2s)?;
    ensure(y2 == y2_brute, format!("E[Y^2] = {y2}, brute force {y2_brute}"))?;

    let ratio = joint_ratio_exact(&k3, 3, 3, 3, Limits::default()).map_err(e2s)?;
    let yz = brute_force_moment(&k3, 3, |l| {
        let z = count_cycles(&expand(l), 3)?;
        y_of(l).map(|v| v * BigRational::from_integer(z.into()))
    })
    .map_err(e2s)?;
    ensure(!y_brute.is_zero() && ratio == &yz / &y_brute, format!("joint ratio {ratio} vs {}", &yz / &y_brute))?;
    Ok(format!("E[X]=51, E[Y]=8, E[Y^2]={y2}, E[YZ_3]/E[Y]={ratio}"))
}

fn bipartite_minus_matching(k: usize, minus: bool) -> ConstraintGraph {
    let edges = (0..k)
        .flat_map(|i| (0..k).map(move |j| (i, j)))
        .filter(|&(i, j)| !minus || i != j)
        .map(|(i, j)| (i, k + j))
        .collect();
    ConstraintGraph::new(2 * k, edges).expect("valid graph")
}

fn matrix_tree() -> Outcome {
    for k in 3..=6usize {
        let kb = BigInt::from(k);
        let minus = (&kb - 1) * num_traits::pow(kb.clone(), k - 2) * num_traits::pow(&kb - 2, k - 1);
        let full = num_traits::pow(kb, 2 * k - 2);
        let got_minus = tau_maximal_forests(&bipartite_minus_matching(k, true));
        let got_full = tau_maximal_forests(&bipartite_minus_matching(k, false));
        ensure(got_minus == minus, format!("k={k}: tau(K_kk - M) = {got_minus}, want {minus}"))?;
        ensure(got_full == full, format!("k={k}: tau(K_kk) = {got_full}, want {full}"))?;
    }
    Ok("k = 3..6 exact".into())
}

/// Closed non-backtracking walks of length j, counted dart by dart.
fn brute_walks(g: &BaseGraph, j: usize) -> u64 {
    let darts: Vec<(usize, usize, usize)> =
        g.edges().iter().enumerate().flat_map(|(e, &(t, h))| [(t, h, e), (h, t, e)]).collect();
    let follows = |a: (usize, usize, usize), b: (usize, usize, usize)| a.1 == b.0 && a.2 != b.2;
    fn go(darts: &[(usize, usize, usize)], follows: &dyn Fn((usize, usize, usize), (usize, usize, usize)) -> bool, first: usize, last: usize, left: usize) -> u64 {
        if left == 0 {
            return u64::from(follows(darts[last], darts[first]));
        }
        (0..darts.len())
            .filter(|&i| follows(darts[last], darts[i]))
            .map(|i| go(darts, follows, first, i, left - 1))
            .sum()
    }
    (0..darts.len()).map(|s| go(&darts, &follows, s, s, j - 1)).sum()
}

fn walk_counts() -> Outcome {
    let graphs = [("K3", complete(3)), ("K4", complete(4)), ("K5", complete(5)), ("Petersen", BaseGraph::petersen())];
    for (name, g) in &graphs {
        for j in 1..=8 {
            let want = brute_walks(g, j);
            let got = walk_count_cj(g, j).map_err(e2s)?;
            ensure(got == want, format!("{name} j={j}: {got} vs brute force {want}"))?;
        }
    }
    Ok("4 graphs, j = 1..8".into())
}

fn sscm_identity() -> Outcome {
    let mut worst = 0.0f64;
    for (m, terms) in [(4, 200), (5, 400)] {
        let c = sscm_identity_check(&complete(m), 3, terms).map_err(e2s)?;
        ensure(c.gap < 1e-8, format!("K{m}: gap {:e}", c.gap))?;
        let rel = ((c.lhs - c.closed_form) / c.closed_form).abs();
        ensure(rel < 1e-10, format!("K{m}: closed form off by {rel:e}"))?;
        worst = worst.max(c.gap);
    }
    Ok(format!("max gap {worst:.2e}"))
}

fn restricted_hessian() -> Outcome {
    for m in [3, 4] {
        let g = complete(m);
        let k = 3;
        let p = ey_problem(&g, k).map_err(e2s)?;
        let neg_h = -p.hessian_at(&p.xhat);
        let bases = [kernel_basis(&incidence_unsigned(&p.gamma)), cycle_kernel_basis(&p.gamma).map_err(e2s)?];
        let r = (k * k - 3 * k + 1) * g.num_edges();
        let want = ((k * (k - 1)) as f64).powi(r as i32);
        for u in &bases {
            ensure(u.ncols() == r, format!("K{m}: kernel dimension {} != {r}", u.ncols()))?;
            let det = det_restricted(&neg_h, &to_f64_matrix(u)).map_err(e2s)?;
            ensure(((det - want) / want).abs() < 1e-9, format!("K{m} first moment: {det} vs {want}"))?;
        }
        let p = ey2_problem(&g, k).map_err(e2s)?;
        let neg_h = -p.hessian_at(&p.xhat);
        let want = h_dk(&g, k).map_err(e2s)?.powi(((k - 1) * (k - 1)) as i32);
        let bases = [kernel_basis(&incidence_unsigned(&p.gamma)), cycle_kernel_basis(&p.gamma).map_err(e2s)?];
        for u in &bases {
            let det = det_restricted(&neg_h, &to_f64_matrix(u)).map_err(e2s)?;
            ensure(((det - want) / want).abs() < 1e-9, format!("K{m} second moment: {det} vs {want}"))?;
        }
    }
    Ok("(k(k-1))^r and h^{(k-1)^2}, RREF and cycle bases".into())
}

fn laplace_path() -> Outcome {
    let mut worst = 0.0f64;
    for m in [3, 4] {
        let g = complete(m);
        for n in [30, 60] {
            let a = laplace_estimate(&ey_problem(&g, 3).map_err(e2s)?, n).map_err(e2s)?;
            let r1 = a.estimate.ratio(&ey_asym(&g, n, 3).map_err(e2s)?);
            let b = laplace_estimate(&ey2_problem(&g, 3).map_err(e2s)?, n).map_err(e2s)?;
            let r2 = b.estimate.ratio(&ey2_asym(&g, n, 3).map_err(e2s)?);
            for r in [r1, r2] {
                worst = worst.max((r - 1.0).abs());
            }
        }
    }
    ensure(worst < 1e-9, format!("max relative error {worst:e}"))?;
    Ok(format!("max relative error {worst:.2e}"))
}

fn asymptotic_trend() -> Outcome {
    let g = complete(3);
    let mut dists = Vec::new();
    let mut ratios = Vec::new();
    for n in [30, 60, 120] {
        let exact = expected_y_exact(&g, n, 3).map_err(e2s)?;
        let log_exact = exact.numer().to_f64().map(f64::ln).unwrap_or_else(|| big_ln(exact.numer()))
            - exact.denom().to_f64().map(f64::ln).unwrap_or_else(|| big_ln(exact.denom()));
        let asym = ey_asym(&g, n, 3).map_err(e2s)?;
        let ratio = (log_exact - asym.log_abs).exp();
        ratios.push(ratio);
        dists.push((ratio - 1.0).abs());
    }
    ensure((0.95..=1.05).contains(&ratios[2]), format!("ratio at n=120 is {}", ratios[2]))?;
    ensure(dists[2] < dists[1] && dists[1] < dists[0], format!("not monotone: {ratios:?}"))?;
    Ok(format!("ratios n=30,60,120: {:.5}, {:.5}, {:.5}", ratios[0], ratios[1], ratios[2]))
}

fn big_ln(x: &BigInt) -> f64 {
    let bits = x.bits();
    let shift = bits.saturating_sub(900);
    (x >> shift).to_f64().expect("finite").ln() + shift as f64 * std::f64::consts::LN_2
}

/// Dirichlet rows at several concentrations, plus small perturbations of the uniform matrix.
fn random_matrix(rows: usize, cols: usize, i: usize, rng: &mut ChaCha8Rng) -> StochasticMatrix {
    match i % 4 {
        0 => StochasticMatrix::random(rows, cols, 1.0, rng),
        1 => StochasticMatrix::random(rows, cols, 0.2, rng),
        2 => StochasticMatrix::random(rows, cols, 5.0, rng),
        _ => {
            let eps = 10f64.powf(-rng.gen_range(1.0..4.0));
            let entries: Vec<f64> = (0..rows)
                .flat_map(|_| {
                    let mut row: Vec<f64> = (0..cols).map(|_| 1.0 / cols as f64 + eps * rng.gen_range(-1.0..1.0)).collect();
                    let s: f64 = row.iter().sum();
                    row.iter_mut().for_each(|x| *x = (*x / s).max(0.0));
                    let s: f64 = row.iter().sum();
                    row.into_iter().map(move |x| x / s)
                })
                .collect();
            StochasticMatrix::new(rows, cols, entries).expect("stochastic")
        }
    }
}

fn optimisation() -> Outcome {
    const DRAWS: usize = 100_000;
    let mut worst = f64::INFINITY;
    for (q, c) in [(3usize, 1.8), (4, 3.7)] {
        let mut rng = ChaCha8Rng::seed_from_u64(q as u64);
        for i in 0..DRAWS {
            let gap = an_gap(&random_matrix(q, q, i, &mut rng), c).map_err(e2s)?;
            ensure(gap >= -1e-10, format!("square q={q}: gap {gap:e}"))?;
            worst = worst.min(gap);
        }
    }
    for (q, k) in [(4usize, 3usize), (5, 4)] {
        let c = 0.99 * (k as f64 - 1.0) / (q as f64 - 1.0) * c_q(q).map_err(e2s)?;
        let mut rng = ChaCha8Rng::seed_from_u64(100 + q as u64);
        for i in 0..DRAWS {
            let gap = rect_gap(&random_matrix(q, k, i, &mut rng), c).map_err(e2s)?;
            ensure(gap >= -1e-10, format!("rectangular q={q} k={k}: gap {gap:e}"))?;
            worst = worst.min(gap);
        }
    }
    let search = verify_max_uniform(Objective::BigF, &complete(4), 3, 200, 2024).map_err(e2s)?;
    ensure(
        search.best_value <= search.uniform_value + 1e-9,
        format!("F_A ascent found {} > {}", search.best_value, search.uniform_value),
    )?;
    Ok(format!(
        "4x10^5 matrices, min gap {worst:.2e}; F_A ascent (entries within 10% of 1/k^2) best {:.9} vs uniform {:.9}",
        search.best_value, search.uniform_value
    ))
}

fn b_spectrum() -> Outcome {
    for k in [3, 4] {
        ensure(b_spectrum_check(k).map_err(e2s)?, format!("spectrum mismatch at k={k}"))?;
    }
    Ok("k = 3, 4".into())
}

fn monte_carlo_cycles() -> Outcome {
    let g = complete(4);
    let consts = sscm_constants(&g, 3, 4).map_err(e2s)?;
    let mut parts = Vec::new();
    for j in [3usize, 4] {
        let rec = mc_expectation(&g, 100, 3, Statistic::Cycles(j), 2000, 0x5eed + j as u64, Limits::default()).map_err(e2s)?;
        let lambda = consts.lambda_at(j);
        let z = (rec.mean - lambda).abs() / rec.stderr;
        ensure(z < 3.0, format!("Z_{j}: mean {} vs {lambda}, {z:.2} stderr", rec.mean))?;
        parts.push(format!("Z_{j} mean {:.4} (lambda {lambda}, {z:.2} se)", rec.mean));
    }
    Ok(parts.join("; "))
}

fn chromatic_window() -> Outcome {
    let budget = Budget::from_env();
    let g = complete(4);
    for i in 0..100 {
        let lift = sample_lift(&g, 200, sample_seed(3, i)).map_err(e2s)?;
        let b = chromatic_bounds(&expand(&lift), budget);
        ensure(b.exact() == Some(3), format!("K4 lift {i}: bounds {b:?}"))?;
    }
    // chi in {3, 4}: a failed 2-colouring (exact) gives chi >= 3 and a found 4-colouring
    // gives chi <= 4; an instance is censored only if the 4-colouring search runs out
    let g = complete(6);
    let mut censored = 0;
    for i in 0..30 {
        let lift = sample_lift(&g, 50, sample_seed(6, i)).map_err(e2s)?;
        let lg = expand(&lift);
        let bipartite = find_k_coloring(&lg, 2, budget).map_err(e2s)?.is_some();
        ensure(!bipartite, format!("K6 lift {i} is bipartite"))?;
        match find_k_coloring(&lg, 4, budget) {
            Ok(Some(_)) => {}
            Ok(None) => return Err(format!("K6 lift {i} has chi > 4")),
            Err(_) => censored += 1,
        }
    }
    ensure(censored * 10 < 30, format!("{censored}/30 K6 instances undecided"))?;
    Ok(format!("K4: 100/100 chi = 3; K6: {}/30 with chi in {{3,4}}, {censored} censored", 30 - censored))
}

fn threshold_table() -> Outcome {
    for k in 3..=50usize {
        let (u_prev, u, ell) = (u_threshold(k - 1).map_err(e2s)?, u_threshold(k).map_err(e2s)?, ell_threshold(k).map_err(e2s)?);
        let kf = k as f64;
        ensure(u_prev < ell && ell < u, format!("k={k}: u_(k-1)={u_prev}, l_k={ell}, u_k={u}"))?;
        ensure(u < (2.0 * kf - 1.0) * kf.ln(), format!("k={k}: u_k too large"))?;
        ensure(ell > 2.0 * (kf - 1.0) * (kf - 1.0).ln(), format!("k={k}: l_k too small"))?;
    }
    ensure(k_d(3) == 3 && k_d(7) == 4, format!("k_3 = {}, k_7 = {}", k_d(3), k_d(7)))?;
    Ok("k = 3..50; k_3 = 3, k_7 = 4".into())
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Outcome); 12] = [
        ("exact oracle equality", Duration::from_secs(10), exact_oracles),
        ("matrix-tree closed forms", Duration::from_secs(1), matrix_tree),
        ("walk counts", Duration::from_secs(30), walk_counts),
        ("small subgraph conditioning identity", Duration::from_secs(1), sscm_identity),
        ("restricted Hessian determinants", Duration::from_secs(5), restricted_hessian),
        ("Laplace path consistency", Duration::from_secs(5), laplace_path),
        ("asymptotic first-moment trend", Duration::from_secs(60), asymptotic_trend),
        ("optimisation inequalities", Duration::from_secs(300), optimisation),
        ("B-matrix spectrum", Duration::from_secs(1), b_spectrum),
        ("Monte Carlo cycle counts", Duration::from_secs(120), monte_carlo_cycles),
        ("chromatic window", Duration::from_secs(900), chromatic_window),
        ("threshold table", Duration::from_secs(1), threshold_table),
    ];
    let mut failures = 0;
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let outcome = outcome.and_then(|detail| {
            if elapsed <= *limit {
                Ok(detail)
            } else {
                Err(format!("{detail}; took {elapsed:.2?}, limit {limit:?}"))
            }
        });
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name} [{elapsed:.2?}]: {detail}", i + 1),
            Err(why) => {
                failures += 1;
                println!("FAIL {:>2} {name} [{elapsed:.2?}]: {why}", i + 1);
            }
        }
    }
    println!("{} of 12 criteria passed", 12 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
