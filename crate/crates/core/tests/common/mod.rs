//! Brute-force oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use inverse_lmp::grid::Grid;
use inverse_lmp::market::solve_dcopf;
use inverse_lmp::scenario::{sample_offers, OfferCurve};
use lp_kernel::{fix_binaries_and_resolve, LpProblem, MilpProblem, Sense};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// The seed list shipped with the repository.
pub fn seeds() -> Vec<u64> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/seeds.json");
    let text = std::fs::read_to_string(path).expect("data/seeds.json");
    let v: serde_json::Value = serde_json::from_str(&text).expect("seed list JSON");
    v["seeds"]
        .as_array()
        .expect("seeds array")
        .iter()
        .map(|s| s.as_u64().expect("integer seed"))
        .collect()
}

/// Line flows of a DC power flow solved directly from the nodal susceptance
/// system, without any PTDF.
pub fn dc_flows(grid: &Grid, injection: &[f64]) -> Vec<f64> {
    let x = grid.line_reactance.as_ref().expect("reactances");
    let m = grid.n_buses;
    let mut b = DMatrix::<f64>::zeros(m, m);
    for l in 0..grid.n_lines() {
        let (f, t, y) = (grid.line_from[l], grid.line_to[l], 1.0 / x[l]);
        b[(f, f)] += y;
        b[(t, t)] += y;
        b[(f, t)] -= y;
        b[(t, f)] -= y;
    }
    // pin the reference angle by replacing its equation
    let r = grid.reference_bus;
    let mut rhs = DVector::from_column_slice(injection);
    for c in 0..m {
        b[(r, c)] = 0.0;
    }
    b[(r, r)] = 1.0;
    rhs[r] = 0.0;
    let theta = b.lu().solve(&rhs).expect("connected grid");
    (0..grid.n_lines())
        .map(|l| (theta[grid.line_from[l]] - theta[grid.line_to[l]]) / x[l])
        .collect()
}

/// A random injection vector that sums to zero.
pub fn balanced_injection(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..m).map(|_| rng.gen_range(-50.0..50.0)).collect();
    let mean = v.iter().sum::<f64>() / m as f64;
    v.iter_mut().for_each(|x| *x -= mean);
    v
}

/// Cheapest commitment cost found by clearing every one of the `2ⁿ`
/// commitments with a fixed-commitment dispatch.
pub fn uc_enumeration(grid: &Grid, offers: &[OfferCurve], load: &[f64]) -> Option<(f64, Vec<bool>)> {
    let n = grid.n_gens();
    let mut best: Option<(f64, Vec<bool>)> = None;
    for mask in 0u32..(1 << n) {
        let u: Vec<bool> = (0..n).map(|k| mask & (1 << k) != 0).collect();
        if let Ok(d) = solve_dcopf(grid, offers, load, &u) {
            let cost = d.objective
                + offers
                    .iter()
                    .zip(&u)
                    .filter(|(_, &on)| on)
                    .map(|(o, _)| o.no_load)
                    .sum::<f64>();
            if best.as_ref().map_or(true, |(b, _)| cost < *b - 1e-9) {
                best = Some((cost, u));
            }
        }
    }
    best
}

/// Minimum objective of a MILP over every binary assignment.
pub fn milp_enumeration(milp: &MilpProblem) -> Option<f64> {
    let k = milp.binaries.len();
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << k) {
        let assignment: Vec<bool> = (0..k).map(|i| mask & (1 << i) != 0).collect();
        let sol = fix_binaries_and_resolve(milp, &assignment).expect("fixing binaries");
        if sol.is_optimal() && best.map_or(true, |b| sol.objective < b) {
            best = Some(sol.objective);
        }
    }
    best
}

/// Minimum objective over every basic solution of `lp`: each choice of
/// `n` hyperplanes among the rows and variable bounds (equality rows always
/// included) is solved as a square system and kept if feasible.
pub fn vertex_enumeration(lp: &LpProblem) -> Option<f64> {
    let n = lp.n_vars();
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut forced: Vec<(Vec<f64>, f64)> = Vec::new();
    for row in lp.rows() {
        let mut a = vec![0.0; n];
        for &(j, v) in &row.coefs {
            a[j] = v;
        }
        if row.sense == Sense::Eq {
            forced.push((a, row.rhs));
        } else {
            planes.push((a, row.rhs));
        }
    }
    for j in 0..n {
        for bound in [lp.var_lower()[j], lp.var_upper()[j]] {
            if bound.is_finite() {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                planes.push((e, bound));
            }
        }
    }
    let k = n.checked_sub(forced.len())?;
    if k > planes.len() {
        return None;
    }
    let mut best: Option<f64> = None;
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        let chosen: Vec<&(Vec<f64>, f64)> =
            forced.iter().chain(idx.iter().map(|&i| &planes[i])).collect();
        let a = DMatrix::from_fn(n, n, |r, c| chosen[r].0[c]);
        let b = DVector::from_fn(n, |r, _| chosen[r].1);
        if let Some(x) = a.lu().solve(&b) {
            let x: Vec<f64> = x.iter().copied().collect();
            if x.iter().all(|v| v.is_finite()) && lp.max_violation(&x) <= 1e-9 {
                let obj = lp.objective_value(&x);
                if best.map_or(true, |b| obj < b) {
                    best = Some(obj);
                }
            }
        }
        let mut i = k;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if idx[i] < planes.len() - k + i {
                idx[i] += 1;
                for t in i + 1..k {
                    idx[t] = idx[t - 1] + 1;
                }
                break;
            }
        }
    }
}

/// A bounded, feasible LP: random box plus rows that a random interior
/// point satisfies.
pub fn random_lp(rng: &mut ChaCha8Rng, n: usize, rows: usize) -> LpProblem {
    let mut lp = LpProblem::new();
    let mut anchor = Vec::with_capacity(n);
    for _ in 0..n {
        let lo = rng.gen_range(-5.0..0.0);
        let hi = rng.gen_range(1.0..6.0);
        anchor.push(rng.gen_range(lo..hi));
        lp.add_var(rng.gen_range(-4.0..4.0), lo, hi).unwrap();
    }
    for _ in 0..rows {
        let coefs: Vec<(usize, f64)> = (0..n).map(|j| (j, rng.gen_range(-3.0..3.0))).collect();
        let act: f64 = coefs.iter().map(|&(j, a)| a * anchor[j]).sum();
        let slack = rng.gen_range(0.0..2.0);
        if rng.gen_bool(0.5) {
            lp.add_row(coefs, Sense::Le, act + slack).unwrap();
        } else {
            lp.add_row(coefs, Sense::Ge, act - slack).unwrap();
        }
    }
    lp
}

/// Random 14-bus hour: sampled offers around `baseline` and a load at a
/// random share of capacity.
pub fn random_hour(
    grid: &Grid,
    baseline: &[OfferCurve],
    rng: &mut ChaCha8Rng,
) -> (Vec<OfferCurve>, Vec<f64>) {
    let offers = sample_offers(baseline, 2.0, rng).unwrap();
    let level = rng.gen_range(0.05..0.9) * grid.total_capacity();
    let shape: Vec<f64> = grid.base_load.iter().map(|b| b * rng.gen_range(0.8..1.2)).collect();
    let sum: f64 = shape.iter().sum();
    (offers, shape.iter().map(|s| s * level / sum).collect())
}
