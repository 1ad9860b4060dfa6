//! Deterministic fixtures shared by the benchmarks: seeded random systems of
//! the solubility bound `s = k² + 2` for each engine family.

use padic_diaglin::generators::uniform_nonzero_system;
use padic_diaglin::{DiagLinSystem, PadicContext};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Coefficient bound used by the fixtures.
pub const BOUND: i64 = 1_000_000;

/// The `(k, p)` pairs benchmarked, with the engine family each exercises.
pub const FAMILIES: &[(u32, u64, &str)] =
    &[(4, 2, "pow2"), (8, 2, "pow2"), (4, 5, "pm1"), (6, 7, "pm1"), (6, 3, "ppm1"), (4, 7, "contract")];

/// `n` seeded systems with `s = k² + 2` variables for `(k, p)`.
pub fn bound_size_systems(k: u32, p: u64, n: usize, seed: u64) -> (PadicContext, Vec<DiagLinSystem>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((k as u64) << 32) ^ p);
    let s = (k * k + 2) as usize;
    let systems = (0..n).map(|_| uniform_nonzero_system(s, BOUND, &mut rng)).collect();
    (PadicContext::small(p, k), systems)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_deterministic_and_sized() {
        let (ctx, a) = bound_size_systems(4, 5, 3, 7);
        let (_, b) = bound_size_systems(4, 5, 3, 7);
        assert_eq!(a, b);
        assert_eq!(ctx.k, 4);
        assert!(a.iter().all(|s| s.s() == 18));
    }
}
