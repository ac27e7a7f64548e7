#![allow(dead_code)]

use dyngame::game::{solve_nash_iterate, CournotGame, CournotParams, NashPoint, SolverOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn cournot(a: f64, b: f64, c: &[f64], k: &[f64], q: &[f64]) -> CournotGame<f64> {
    CournotGame::validate(CournotParams {
        a,
        b,
        c: c.to_vec(),
        k: k.to_vec(),
        q: q.to_vec(),
    })
    .unwrap()
}

/// The stable duopoly: a = 10, b = 1, c = 1, K = 0, Q = 5.
pub fn duopoly() -> CournotGame<f64> {
    cournot(10.0, 1.0, &[1.0, 1.0], &[0.0, 0.0], &[5.0, 5.0])
}

/// Three equilibria: c = 8, K = -1.5.
pub fn triple() -> CournotGame<f64> {
    cournot(10.0, 1.0, &[8.0, 8.0], &[-1.5, -1.5], &[5.0, 5.0])
}

/// Largest subset product `Π_{i∈I} R_i (n-1)` over `|I| >= 2`, by brute force.
pub fn worst_subset_product(r: &[f64]) -> f64 {
    let n = r.len();
    let mut worst: f64 = 0.0;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() < 2 {
            continue;
        }
        let p: f64 = (0..n)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| r[i] * (n - 1) as f64)
            .product();
        worst = worst.max(p);
    }
    worst
}

/// Slopes with every subset product at most `cap`.
pub fn certified_slopes(rng: &mut ChaCha8Rng, n: usize, cap: f64) -> Vec<f64> {
    loop {
        let r: Vec<f64> = (0..n)
            .map(|_| rng.gen_range(0.02..1.6) / (n - 1) as f64)
            .collect();
        if worst_subset_product(&r) <= cap {
            return r;
        }
    }
}

/// Cournot game with prescribed `R_i`, random costs and capacities.
pub fn game_with_slopes(rng: &mut ChaCha8Rng, r: &[f64]) -> CournotGame<f64> {
    let b = rng.gen_range(0.5..2.0);
    let k: Vec<f64> = r.iter().map(|&ri| b / ri - 2.0 * b).collect();
    let q: Vec<f64> = r.iter().map(|_| rng.gen_range(1.0..5.0)).collect();
    let a = q.iter().sum::<f64>() + rng.gen_range(0.0..5.0);
    let c: Vec<f64> = r.iter().map(|_| rng.gen_range(0.0..0.9 * a * b)).collect();
    cournot(a, b, &c, &k, &q)
}

pub fn random_certified(seed: u64, cap: f64) -> (CournotGame<f64>, NashPoint<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=4);
    let r = certified_slopes(&mut rng, n, cap);
    let game = game_with_slopes(&mut rng, &r);
    let nash = solve_nash_iterate(
        &game,
        &vec![0.0; n],
        &SolverOptions {
            tol: 1e-13,
            ..Default::default()
        },
    )
    .unwrap();
    (game, nash)
}

/// Scaled-feasible initial deviation: a random point of `S` minus `q*`.
pub fn random_scaled_start(
    rng: &mut ChaCha8Rng,
    game: &CournotGame<f64>,
    nash: &NashPoint<f64>,
) -> Vec<f64> {
    (0..game.n())
        .map(|i| {
            let q = rng.gen_range(0.0..=game.capacity(i));
            (q - nash.q_star[i]) / game.capacity(i)
        })
        .collect()
}
