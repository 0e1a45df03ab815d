//! Orthonormal pilot books, random pilot hopping and collision-distance statistics.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::seed::{stream_rng, Stream};

/// `K` orthonormal pilot sequences of length `tau`, stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotBook {
    tau: usize,
    data: Vec<Complex64>,
}

/// Builds a pilot book from the first `k` columns of the unitary `tau`-point DFT matrix.
pub fn make_pilot_book(tau: usize, k: usize) -> Result<PilotBook> {
    if k == 0 {
        return Err(Error::invalid("K", "need at least one pilot"));
    }
    if k > tau {
        return Err(Error::invalid("K", format!("{k} pilots do not fit in length {tau}")));
    }
    let scale = (tau as f64).sqrt().recip();
    let mut data = Vec::with_capacity(tau * k);
    for col in 0..k {
        for row in 0..tau {
            // reduce the index product first so the phase stays small
            let idx = (row * col) % tau;
            let theta = -2.0 * PI * idx as f64 / tau as f64;
            data.push(Complex64::from_polar(scale, theta));
        }
    }
    Ok(PilotBook { tau, data })
}

impl PilotBook {
    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.tau
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn pilot(&self, index: usize) -> &[Complex64] {
        &self.data[index * self.tau..(index + 1) * self.tau]
    }

    pub fn get(&self, index: usize) -> Option<&[Complex64]> {
        (index < self.len()).then(|| self.pilot(index))
    }

    /// `max |x_i^H x_j - delta_ij|` over all pairs.
    pub fn orthonormality_error(&self) -> f64 {
        let k = self.len();
        let mut worst: f64 = 0.0;
        for i in 0..k {
            for j in 0..k {
                let g = inner(self.pilot(i), self.pilot(j));
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).norm());
            }
        }
        worst
    }
}

/// `a^H b`.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Pilot assignment of one cell in one slot: `perm[user]` is the pilot index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HopAssignment {
    pub slot: u64,
    pub perm: Vec<usize>,
}

impl HopAssignment {
    pub fn identity(slot: u64, k: usize) -> Self {
        Self {
            slot,
            perm: (0..k).collect(),
        }
    }

    /// User holding `pilot`, if any.
    pub fn user_of(&self, pilot: usize) -> Option<usize> {
        self.perm.iter().position(|&p| p == pilot)
    }

    pub fn is_bijection(&self) -> bool {
        let mut seen = vec![false; self.perm.len()];
        for &p in &self.perm {
            if p >= seen.len() || std::mem::replace(&mut seen[p], true) {
                return false;
            }
        }
        true
    }
}

/// Uniform random permutation of `k` pilots (Fisher-Yates).
pub fn hop<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..k).collect();
    perm.shuffle(rng);
    perm
}

/// Per-cell, per-slot hopping schedule for one Monte Carlo realization.
///
/// Each `(cell, slot)` pair owns an independent generator derived from the
/// master seed, so slots can be produced in any order.
#[derive(Debug, Clone, Copy)]
pub struct HopSchedule {
    pub master_seed: u64,
    pub realization: u64,
    pub k: usize,
    pub enabled: bool,
}

impl HopSchedule {
    pub fn assignment(&self, cell: usize, slot: u64) -> HopAssignment {
        if !self.enabled {
            return HopAssignment::identity(slot, self.k);
        }
        let mut rng = stream_rng(
            self.master_seed,
            Stream::Hop,
            &[self.realization, cell as u64, slot],
        );
        HopAssignment {
            slot,
            perm: hop(&mut rng, self.k),
        }
    }
}

/// `P(t_c = d) = (1 - 1/K)^(d-1) / K`.
pub fn collision_pmf(d: u64, k: usize) -> Result<f64> {
    if d < 1 {
        return Err(Error::invalid("d", "collision distance starts at 1"));
    }
    if k == 0 {
        return Err(Error::invalid("K", "need at least one pilot"));
    }
    let p = 1.0 / k as f64;
    Ok((1.0 - p).powf((d - 1) as f64) * p)
}

/// Mean of the geometric collision distance, which is exactly `K`.
pub fn expected_collision_distance(k: usize) -> f64 {
    k as f64
}

/// Simulates hopping in the cell of interest and one neighbouring cell of `k`
/// users over `n_slots` slots and returns every observed collision distance.
///
/// A foreign user collides in a slot when it holds the same pilot as the user
/// of interest. For every foreign user the gap between consecutive collisions
/// is recorded; each user's gaps are geometric with parameter `1/k`.
pub fn simulate_collision_distances<R: Rng + ?Sized>(
    rng: &mut R,
    k: usize,
    n_slots: u64,
) -> Result<Vec<u64>> {
    if k == 0 {
        return Err(Error::invalid("K", "need at least one pilot"));
    }
    if n_slots < 2 {
        return Err(Error::invalid("n_slots", "need at least two slots"));
    }
    let mut last: Vec<Option<u64>> = vec![None; k];
    let mut out = Vec::with_capacity((n_slots as usize).saturating_sub(k));
    for slot in 0..n_slots {
        let own = hop(rng, k)[0];
        let neighbour = hop(rng, k);
        let hit = neighbour
            .iter()
            .position(|&p| p == own)
            .expect("permutation covers every pilot");
        if let Some(prev) = last[hit].replace(slot) {
            out.push(slot - prev);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn table_sized_book_is_orthonormal() {
        let book = make_pilot_book(96, 96).unwrap();
        assert_eq!(book.len(), 96);
        assert!(book.orthonormality_error() < 1e-12);
    }

    #[test]
    fn small_books() {
        let book = make_pilot_book(2, 2).unwrap();
        assert!(inner(book.pilot(0), book.pilot(1)).norm() < 1e-15);
        let tall = make_pilot_book(7, 3).unwrap();
        assert!(tall.orthonormality_error() < 1e-12);
        assert!(make_pilot_book(4, 5).is_err());
        assert!(make_pilot_book(4, 0).is_err());
        assert!(tall.get(3).is_none());
    }

    #[test]
    fn single_pilot_never_moves() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            assert_eq!(hop(&mut rng, 1), vec![0]);
        }
    }

    #[test]
    fn schedule_is_reproducible_and_cells_differ() {
        let s = HopSchedule { master_seed: 42, realization: 3, k: 96, enabled: true };
        assert_eq!(s.assignment(2, 17), s.assignment(2, 17));
        assert_ne!(s.assignment(1, 17).perm, s.assignment(2, 17).perm);
        let off = HopSchedule { enabled: false, ..s };
        assert_eq!(off.assignment(4, 99), HopAssignment::identity(99, 96));
    }

    #[test]
    fn pmf_values() {
        assert_eq!(collision_pmf(1, 1).unwrap(), 1.0);
        assert_eq!(collision_pmf(2, 1).unwrap(), 0.0);
        assert!((collision_pmf(1, 96).unwrap() - 0.0104167).abs() < 1e-7);
        assert!(collision_pmf(0, 96).is_err());
    }

    #[test]
    fn pmf_normalizes() {
        // partial sum to D plus the exact geometric tail (1 - p)^D
        for k in [1usize, 2, 8, 96] {
            let d_max = 5000u64;
            let partial: f64 = (1..=d_max).map(|d| collision_pmf(d, k).unwrap()).sum();
            let tail = (1.0 - 1.0 / k as f64).powf(d_max as f64);
            assert!((partial + tail - 1.0).abs() < 1e-9, "K={k}");
            assert!(tail < 1e-9);
        }
    }

    #[test]
    fn expected_distance() {
        assert_eq!(expected_collision_distance(96), 96.0);
        assert_eq!(expected_collision_distance(1), 1.0);
    }

    #[test]
    fn degenerate_collision_runs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = simulate_collision_distances(&mut rng, 1, 100).unwrap();
        assert_eq!(d.len(), 99);
        assert!(d.iter().all(|&x| x == 1));
        assert!(simulate_collision_distances(&mut rng, 4, 1).is_err());

        let d = simulate_collision_distances(&mut rng, 2, 20_000).unwrap();
        let mean = d.iter().sum::<u64>() as f64 / d.len() as f64;
        assert!((mean - 2.0).abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn first_user_pilot_is_uniform() {
        // 1e5 slots, K = 96: each count within 3 binomial sigma of n/K
        let k = 96;
        let n = 100_000;
        let mut counts = vec![0u32; k];
        let s = HopSchedule { master_seed: 5, realization: 0, k, enabled: true };
        for slot in 0..n {
            counts[s.assignment(0, slot).perm[0]] += 1;
        }
        let p = 1.0 / k as f64;
        let mean = n as f64 * p;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        // allow a 4 sigma envelope for the max over 96 bins
        for (pilot, &c) in counts.iter().enumerate() {
            assert!((c as f64 - mean).abs() < 4.0 * sigma, "pilot {pilot}: {c}");
        }
        let within3 = counts.iter().filter(|&&c| (c as f64 - mean).abs() < 3.0 * sigma).count();
        assert!(within3 >= 94);
    }

    proptest! {
        #[test]
        fn hops_are_bijections(seed in any::<u64>(), k in 1usize..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = HopAssignment { slot: 0, perm: hop(&mut rng, k) };
            prop_assert!(a.is_bijection());
            for pilot in 0..k {
                prop_assert_eq!(a.perm[a.user_of(pilot).unwrap()], pilot);
            }
        }
    }
}
