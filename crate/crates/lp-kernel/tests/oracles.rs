//! Simplex and branch-and-bound checked against brute-force oracles.

use lp_kernel::{
    certify, fix_binaries_and_resolve, solve_lp, solve_milp, LpProblem, LpStatus, MilpProblem,
    MilpStatus, Sense,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A feasible, bounded LP: a box plus random rows that a random box point satisfies.
fn random_lp(rng: &mut ChaCha8Rng, n: usize, rows: usize) -> LpProblem {
    let mut lp = LpProblem::new();
    let mut anchor = Vec::with_capacity(n);
    for _ in 0..n {
        let lo = rng.gen_range(-5.0..0.0);
        let hi = rng.gen_range(1.0..6.0);
        anchor.push(rng.gen_range(lo..hi));
        lp.add_var(rng.gen_range(-4.0..4.0), lo, hi).unwrap();
    }
    let mut equalities = 0;
    for _ in 0..rows {
        let coefs: Vec<(usize, f64)> = (0..n).map(|j| (j, rng.gen_range(-3.0..3.0))).collect();
        let act: f64 = coefs.iter().map(|&(j, a)| a * anchor[j]).sum();
        let slack = rng.gen_range(0.0..2.0);
        match rng.gen_range(0..5) {
            0 | 1 => lp.add_row(coefs, Sense::Le, act + slack),
            4 if equalities + 1 < n => {
                equalities += 1;
                lp.add_row(coefs, Sense::Eq, act)
            }
            _ => lp.add_row(coefs, Sense::Ge, act - slack),
        }
        .unwrap();
    }
    lp
}

/// Minimum objective over every basic solution: all n-subsets of the row and
/// bound hyperplanes (equality rows always active) solved as square systems.
fn vertex_oracle(lp: &LpProblem) -> Option<f64> {
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
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), lp.var_lower()[j]));
        planes.push((e, lp.var_upper()[j]));
    }
    let k = n.checked_sub(forced.len())?;
    let mut best: Option<f64> = None;
    let mut idx: Vec<usize> = (0..k).collect();
    if k > planes.len() {
        return None;
    }
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
        // next combination
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

#[test]
fn six_by_eight_lp_matches_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let lp = random_lp(&mut rng, 6, 8);
    let sol = solve_lp(&lp).unwrap();
    let oracle = vertex_oracle(&lp).expect("feasible by construction");
    assert_eq!(sol.status, LpStatus::Optimal);
    assert!((sol.objective - oracle).abs() <= 1e-7 * oracle.abs().max(1.0));
}

#[test]
fn hundred_random_lps_match_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..100 {
        let n = rng.gen_range(1..=8);
        let rows = rng.gen_range(1..=(10 - n).max(2));
        let lp = random_lp(&mut rng, n, rows);
        let sol = solve_lp(&lp).unwrap();
        let oracle = vertex_oracle(&lp).expect("feasible by construction");
        assert_eq!(sol.status, LpStatus::Optimal, "case {case}");
        assert!(
            (sol.objective - oracle).abs() <= 1e-7 * oracle.abs().max(1.0),
            "case {case}: simplex {} vs oracle {}",
            sol.objective,
            oracle
        );
        let cert = certify(&lp, &sol);
        assert!(cert.holds(), "case {case}: {cert:?}");
    }
}

#[test]
fn solve_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let lp = random_lp(&mut rng, 7, 6);
    let a = solve_lp(&lp).unwrap();
    let b = solve_lp(&lp).unwrap();
    assert_eq!(a, b);
}

/// A fixed-charge covering problem: binary `u_k` enables up to `cap_k` of `x_k`.
fn random_milp(rng: &mut ChaCha8Rng, k: usize) -> MilpProblem {
    let mut lp = LpProblem::new();
    let mut binaries = Vec::new();
    let mut cover = Vec::new();
    let mut total_cap = 0.0;
    for _ in 0..k {
        let cap = rng.gen_range(5.0..20.0);
        total_cap += cap;
        let x = lp.add_var(rng.gen_range(1.0..10.0), 0.0, f64::INFINITY).unwrap();
        let u = lp.add_var(rng.gen_range(0.0..40.0), 0.0, 1.0).unwrap();
        let min_out = rng.gen_range(0.0..0.4) * cap;
        lp.add_row(vec![(x, 1.0), (u, -cap)], Sense::Le, 0.0).unwrap();
        lp.add_row(vec![(x, 1.0), (u, -min_out)], Sense::Ge, 0.0).unwrap();
        binaries.push(u);
        cover.push((x, 1.0));
    }
    let demand = rng.gen_range(0.1..0.9) * total_cap;
    lp.add_row(cover, Sense::Eq, demand).unwrap();
    MilpProblem::new(lp, binaries).unwrap()
}

fn enumerate(milp: &MilpProblem) -> Option<f64> {
    let k = milp.binaries.len();
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << k) {
        let assignment: Vec<bool> = (0..k).map(|i| mask & (1 << i) != 0).collect();
        let sol = fix_binaries_and_resolve(milp, &assignment).unwrap();
        if sol.is_optimal() && best.map_or(true, |b| sol.objective < b) {
            best = Some(sol.objective);
        }
    }
    best
}

#[test]
fn two_binaries_with_an_infeasible_assignment() {
    // x1 <= 10 u1, x2 <= 10 u2, x1 + x2 = 8: only (0,0) is infeasible.
    let mut lp = LpProblem::new();
    let x1 = lp.add_var(1.0, 0.0, f64::INFINITY).unwrap();
    let x2 = lp.add_var(2.0, 0.0, f64::INFINITY).unwrap();
    let u1 = lp.add_var(3.0, 0.0, 1.0).unwrap();
    let u2 = lp.add_var(1.0, 0.0, 1.0).unwrap();
    lp.add_row(vec![(x1, 1.0), (u1, -10.0)], Sense::Le, 0.0).unwrap();
    lp.add_row(vec![(x2, 1.0), (u2, -10.0)], Sense::Le, 0.0).unwrap();
    lp.add_row(vec![(x1, 1.0), (x2, 1.0)], Sense::Eq, 8.0).unwrap();
    let milp = MilpProblem::new(lp, vec![u1, u2]).unwrap();
    let sol = solve_milp(&milp).unwrap();
    let oracle = enumerate(&milp).unwrap();
    assert_eq!(sol.assignment, vec![true, false]);
    assert!((sol.objective - oracle).abs() < 1e-9);
    assert_eq!(
        fix_binaries_and_resolve(&milp, &[false, false]).unwrap().status,
        LpStatus::Infeasible
    );
}

#[test]
fn random_milps_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..40 {
        let k = rng.gen_range(1..=8);
        let milp = random_milp(&mut rng, k);
        let sol = solve_milp(&milp).unwrap();
        let oracle = enumerate(&milp);
        match oracle {
            None => assert_eq!(sol.status, MilpStatus::Infeasible, "case {case}"),
            Some(best) => {
                assert_eq!(sol.status, MilpStatus::Optimal, "case {case}");
                assert!(
                    (sol.objective - best).abs() <= 1e-7 * best.abs().max(1.0),
                    "case {case}: b&b {} vs enumeration {best}",
                    sol.objective
                );
                let fixed = fix_binaries_and_resolve(&milp, &sol.assignment).unwrap();
                assert_eq!(fixed.objective, sol.objective);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn optimal_solutions_carry_a_certificate(seed in any::<u64>(), n in 1usize..12, rows in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lp = random_lp(&mut rng, n, rows);
        let sol = solve_lp(&lp).unwrap();
        prop_assert_eq!(sol.status, LpStatus::Optimal);
        let cert = certify(&lp, &sol);
        prop_assert!(cert.holds(), "{:?}", cert);
        for (row, d) in lp.rows().iter().zip(&sol.duals) {
            if row.sense != Sense::Eq {
                prop_assert!(*d >= 0.0);
            }
        }
    }
}
