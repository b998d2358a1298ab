//! Deterministic expression corpus shared by the integration suites.

#![allow(dead_code)]

use lambdasym::expr::Expr;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn leaf(rng: &mut ChaCha8Rng) -> Expr {
    match rng.gen_range(0..6) {
        0 => Expr::rational(rng.gen_range(-5..=5), rng.gen_range(1..=4)),
        1 => Expr::h(),
        2 => Expr::x(rng.gen_range(-1..=1)),
        _ => Expr::u(rng.gen_range(-2..=2)),
    }
}

/// Random expression over `u[-2..2]`, `x[-1..1]`, `h` and small rationals.
/// Denominators and logarithm arguments are `2 + (..)^2`, so neither
/// vanishes identically.
pub fn random_expr(rng: &mut ChaCha8Rng, depth: u32) -> Expr {
    if depth == 0 || rng.gen_bool(0.25) {
        return leaf(rng);
    }
    let a = random_expr(rng, depth - 1);
    match rng.gen_range(0..9) {
        0 | 1 => a + random_expr(rng, depth - 1),
        2 => a - random_expr(rng, depth - 1),
        3 | 4 => a * random_expr(rng, depth - 1),
        5 => a / (Expr::int(2) + random_expr(rng, depth - 1).pow(2)),
        6 => a.pow(rng.gen_range(2..=3)),
        7 => (a * Expr::rational(1, 4)).exp(),
        _ => (Expr::int(2) + a.pow(2)).log(),
    }
}

pub fn corpus(n: usize, seed: u64) -> Vec<Expr> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| random_expr(&mut rng, 3)).collect()
}

/// Random nonzero χ, polynomial of degree ≤ 2 in `u[0]` with `h`.
pub fn random_chi(rng: &mut ChaCha8Rng) -> Expr {
    let c = |rng: &mut ChaCha8Rng| Expr::rational(rng.gen_range(-3..=3), rng.gen_range(1..=3));
    Expr::one() + Expr::h() * (c(rng) + c(rng) * Expr::u(0) + c(rng) * Expr::u(0).pow(2))
}
