#![allow(dead_code)]

use billiard_bvp::dynamics::{ForceField, Monomial};
use billiard_bvp::geometry::BilliardTable;
use billiard_bvp::integrator::Problem;
use rand::Rng;

pub fn interval_problem(a: f64, field: ForceField) -> Problem {
    Problem::new(BilliardTable::interval(a).unwrap(), field).unwrap()
}

/// Interval of half-width 1/8, constant force 2, `T = 1`.
pub fn example21() -> Problem {
    interval_problem(0.125, ForceField::constant(&[2.0], 1.0).unwrap())
}

/// Interval of half-width 3/8, force `6t`, `T = 1`.
pub fn example22() -> Problem {
    let term = Monomial::new(0, 1, &[0], 6.0);
    interval_problem(0.375, ForceField::polynomial(vec![term], 1, 1.0).unwrap())
}

pub fn free_interval(a: f64) -> Problem {
    interval_problem(a, ForceField::zero(1, 1.0).unwrap())
}

pub fn ball_problem(r: f64, force: [f64; 2]) -> Problem {
    Problem::new(
        BilliardTable::ball(r, 2).unwrap(),
        ForceField::constant(&force, 1.0).unwrap(),
    )
    .unwrap()
}

/// Random 1-D problem: interval half-width in `[0.05, 0.5]`, polynomial
/// force of total degree at most 3 in `(t, x)` with sup bound at most 5,
/// `T = 1`; plus a signed speed in `(m + 0.5, m + 10]`, `m = ||m||_1`.
pub fn random_problem<R: Rng>(rng: &mut R) -> (Problem, f64) {
    let a = rng.gen_range(0.05..=0.5);
    let table = BilliardTable::interval(a).unwrap();
    let n_terms = rng.gen_range(1..=4);
    let raw: Vec<(u32, u32, f64)> = (0..n_terms)
        .map(|_| {
            let t_exp = rng.gen_range(0..=3u32);
            let x_exp = rng.gen_range(0..=3 - t_exp);
            (t_exp, x_exp, rng.gen_range(-1.0..=1.0))
        })
        .collect();
    let build = |scale: f64| {
        let terms = raw
            .iter()
            .map(|&(t, x, c)| Monomial::new(0, t, &[x], c * scale))
            .collect();
        ForceField::polynomial(terms, 1, 1.0).unwrap()
    };
    let sup = build(1.0).sup_bound(&table);
    let target = rng.gen_range(0.1..=5.0);
    let scale = if sup > 0.0 { target / sup } else { 1.0 };
    let problem = Problem::new(table, build(scale)).unwrap();
    let m = problem.m_l1();
    let speed = m + 0.5 + rng.gen_range(0.0..9.5f64).max(1e-9);
    let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    (problem, sign * speed)
}
