//! TDMA user scheduling.
//!
//! The slot constraints decouple, so the relaxed linear program over the
//! assignment matrix has an integral optimum given by a per-slot argmax.
//! Ties go to the lowest user index.

use num_complex::Complex64;
use serde::Serialize;

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::rate::{bits, norm_sqr};

/// Binary assignment `a_k[n]` with at most one user per slot.
///
/// Stored as one optional user per slot, so the per-slot constraint holds by
/// construction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ScheduleMatrix {
    num_users: usize,
    slots: Vec<Option<usize>>,
}

impl ScheduleMatrix {
    pub fn new(num_users: usize, slots: Vec<Option<usize>>) -> Result<Self> {
        if let Some(bad) = slots.iter().flatten().find(|&&k| k >= num_users) {
            return Err(Error::Dimension(format!("user {bad} out of range for {num_users} users")));
        }
        Ok(ScheduleMatrix { num_users, slots })
    }

    /// Every slot served by the same user.
    pub fn constant(num_users: usize, num_slots: usize, user: usize) -> Self {
        ScheduleMatrix {
            num_users,
            slots: vec![Some(user); num_slots],
        }
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_slots(&self) -> usize {
        self.slots.len()
    }

    pub fn user(&self, slot: usize) -> Option<usize> {
        self.slots[slot]
    }

    pub fn slots(&self) -> &[Option<usize>] {
        &self.slots
    }

    pub fn a(&self, k: usize, n: usize) -> u8 {
        u8::from(self.slots[n] == Some(k))
    }

    pub fn to_matrix(&self) -> Vec<Vec<u8>> {
        (0..self.num_users)
            .map(|k| (0..self.slots.len()).map(|n| self.a(k, n)).collect())
            .collect()
    }

    /// `sum_{k,n} a_k[n] table[k][n]`.
    pub fn objective(&self, table: &[Vec<f64>]) -> f64 {
        self.slots
            .iter()
            .enumerate()
            .filter_map(|(n, k)| k.map(|k| table[k][n]))
            .sum()
    }
}

#[derive(Clone, Debug, Default)]
pub struct ScheduleOptions {
    /// Leave a slot unserved when no user has a positive rate.
    pub allow_idle: bool,
    /// Minimum number of slots per user, repaired greedily after the argmax.
    /// Zero disables the constraint.
    pub min_slots_per_user: usize,
}

/// Maximizes `sum a_k[n] table[k][n]` over TDMA assignments; `table` is
/// `K x N` of nonnegative sample-average rates.
pub fn offline_schedule(table: &[Vec<f64>], opts: &ScheduleOptions) -> Result<ScheduleMatrix> {
    let k_users = table.len();
    if k_users == 0 {
        return Err(Error::Dimension("rate table has no users".into()));
    }
    let n_slots = table[0].len();
    if table.iter().any(|row| row.len() != n_slots) {
        return Err(Error::Dimension("rate table rows differ in length".into()));
    }
    if table.iter().flatten().any(|r| !(*r >= 0.0)) {
        return Err(Error::Numeric("rate table entries must be nonnegative".into()));
    }
    let mut slots: Vec<Option<usize>> = (0..n_slots)
        .map(|n| {
            let best = argmax((0..k_users).map(|k| table[k][n]));
            if opts.allow_idle && table[best][n] <= 0.0 {
                None
            } else {
                Some(best)
            }
        })
        .collect();
    if opts.min_slots_per_user > 0 {
        repair_min_slots(table, &mut slots, opts.min_slots_per_user);
    }
    ScheduleMatrix::new(k_users, slots)
}

/// Moves the cheapest slots to users below the quota. Greedy, so the result
/// meets the quota whenever `K * quota <= N` but is not guaranteed optimal.
fn repair_min_slots(table: &[Vec<f64>], slots: &mut [Option<usize>], quota: usize) {
    let k_users = table.len();
    let n_slots = slots.len();
    if k_users * quota > n_slots {
        return;
    }
    loop {
        let mut counts = vec![0usize; k_users];
        for k in slots.iter().flatten() {
            counts[*k] += 1;
        }
        let Some(needy) = (0..k_users).find(|&k| counts[k] < quota) else {
            break;
        };
        // Cheapest slot to hand over: idle, or owned by a user above quota.
        let mut best: Option<(usize, f64)> = None;
        for n in 0..n_slots {
            let loss = match slots[n] {
                None => -table[needy][n],
                Some(k) if k != needy && counts[k] > quota => table[k][n] - table[needy][n],
                _ => continue,
            };
            if best.is_none_or(|(_, l)| loss < l) {
                best = Some((n, loss));
            }
        }
        match best {
            Some((n, _)) => slots[n] = Some(needy),
            None => break,
        }
    }
}

fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, v) in values.enumerate() {
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    best
}

/// Online pick for one slot.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OnlinePick {
    pub user: usize,
    pub rate: f64,
    /// All effective channels were zero; user 0 is returned with rate 0.
    pub degenerate: bool,
}

/// Picks the user with the largest MRT rate, i.e. the largest `||h_k||`.
pub fn online_schedule(effective: &[Vec<Complex64>], cfg: &ScenarioConfig) -> OnlinePick {
    let norms: Vec<f64> = effective.iter().map(|h| norm_sqr(h)).collect();
    online_schedule_norms(&norms, cfg)
}

/// As [`online_schedule`], from precomputed `||h_k||^2`.
pub fn online_schedule_norms(norms_sqr: &[f64], cfg: &ScenarioConfig) -> OnlinePick {
    let user = argmax(norms_sqr.iter().copied());
    let best = norms_sqr.get(user).copied().unwrap_or(0.0);
    OnlinePick {
        user,
        rate: bits(cfg.snr_scale() * best),
        degenerate: !(best > 0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force(table: &[Vec<f64>]) -> f64 {
        // Enumerates every assignment of one user (or none) per slot.
        let k = table.len();
        let n = table[0].len();
        let choices = k + 1;
        let mut best = f64::NEG_INFINITY;
        let total = choices.pow(n as u32);
        for code in 0..total {
            let mut c = code;
            let mut val = 0.0;
            for slot in 0..n {
                let pick = c % choices;
                c /= choices;
                if pick < k {
                    val += table[pick][slot];
                }
            }
            best = best.max(val);
        }
        best
    }

    #[test]
    fn single_user_serves_every_slot() {
        let s = offline_schedule(&[vec![0.5, 0.0, 2.0]], &ScheduleOptions::default()).unwrap();
        assert_eq!(s.slots(), &[Some(0), Some(0), Some(0)]);
    }

    #[test]
    fn argmax_column() {
        let s = offline_schedule(&[vec![2.0], vec![1.0]], &ScheduleOptions::default()).unwrap();
        assert_eq!(s.user(0), Some(0));
        let s = offline_schedule(&[vec![1.0], vec![1.0]], &ScheduleOptions::default()).unwrap();
        assert_eq!(s.user(0), Some(0));
    }

    #[test]
    fn idle_only_when_allowed() {
        let t = [vec![0.0, 1.0], vec![0.0, 0.5]];
        let s = offline_schedule(&t, &ScheduleOptions { allow_idle: true, ..Default::default() }).unwrap();
        assert_eq!(s.slots(), &[None, Some(0)]);
        let s = offline_schedule(&t, &ScheduleOptions::default()).unwrap();
        assert_eq!(s.slots(), &[Some(0), Some(0)]);
    }

    #[test]
    fn matches_enumeration_on_random_4x10() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        // 5^10 assignments (including idle) cover all 4^10 full assignments.
        let table: Vec<Vec<f64>> = (0..4).map(|_| (0..10).map(|_| rng.random::<f64>() * 3.0).collect()).collect();
        let s = offline_schedule(&table, &ScheduleOptions::default()).unwrap();
        assert_eq!(s.objective(&table), brute_force(&table));
    }

    #[test]
    fn min_slots_quota_is_met() {
        let table = vec![vec![5.0; 6], vec![1.0, 2.0, 0.5, 3.0, 0.1, 0.2]];
        let opts = ScheduleOptions { allow_idle: false, min_slots_per_user: 2 };
        let s = offline_schedule(&table, &opts).unwrap();
        let served_by_1 = s.slots().iter().filter(|k| **k == Some(1)).count();
        assert_eq!(served_by_1, 2);
        // The two slots where user 0 loses least are the ones handed over.
        assert_eq!(s.user(3), Some(1));
        assert_eq!(s.user(1), Some(1));
    }

    #[test]
    fn online_argmax_and_ties() {
        let cfg = ScenarioConfig::desk();
        let c = |x: f64| Complex64::new(x, 0.0);
        let pick = online_schedule(&[vec![c(1.0), c(1.0)], vec![c(1.0), c(0.0)]], &cfg);
        assert_eq!(pick.user, 0);
        let pick = online_schedule(&[vec![c(1.0)], vec![c(1.0)]], &cfg);
        assert_eq!(pick.user, 0);
        let pick = online_schedule(&[vec![c(0.0)], vec![c(0.0)]], &cfg);
        assert!(pick.degenerate);
        assert_eq!((pick.user, pick.rate), (0, 0.0));
    }

    #[test]
    fn online_matches_objective_enumeration() {
        let mut cfg = ScenarioConfig::desk();
        cfg.sigma2 = 0.1;
        cfg.p_max = 1.0;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let hs: Vec<Vec<Complex64>> = (0..4)
                .map(|_| (0..3).map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect())
                .collect();
            let pick = online_schedule(&hs, &cfg);
            // P_C1 objective of serving each candidate with MRT.
            let objective: Vec<f64> = hs.iter().map(|h| bits(cfg.snr_scale() * norm_sqr(h))).collect();
            let best = objective.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(objective[pick.user], best);
            assert!((pick.rate - best).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn argmax_attains_lp_optimum(k in 1usize..=4, n in 1usize..=6, seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let table: Vec<Vec<f64>> = (0..k).map(|_| (0..n).map(|_| rng.random::<f64>()).collect()).collect();
            let s = offline_schedule(&table, &ScheduleOptions::default()).unwrap();
            prop_assert_eq!(s.objective(&table), brute_force(&table));
            for slot in 0..n {
                let col: u8 = (0..k).map(|u| s.a(u, slot)).sum();
                prop_assert!(col <= 1);
            }
        }

        #[test]
        fn assignment_scale_invariant(seed in 0u64..500, c in 0.001f64..1000.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let table: Vec<Vec<f64>> = (0..3).map(|_| (0..8).map(|_| rng.random::<f64>()).collect()).collect();
            let scaled: Vec<Vec<f64>> = table.iter().map(|r| r.iter().map(|x| x * c).collect()).collect();
            let a = offline_schedule(&table, &ScheduleOptions::default()).unwrap();
            let b = offline_schedule(&scaled, &ScheduleOptions::default()).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
