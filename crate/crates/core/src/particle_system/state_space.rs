use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::Configuration;

/// Largest state space [`StateSpace::enumerate`] will build.
pub const STATE_GUARD: u128 = 10_000_000;

/// `binomial(K + N - 1, N)`, saturating at `u128::MAX`.
pub fn state_count(k: usize, n: u64) -> u128 {
    let top = k as u128 + n as u128 - 1;
    let r = (n as u128).min(k as u128 - 1);
    let mut acc: u128 = 1;
    for i in 0..r {
        // acc * (top - i) / (i + 1) stays integral at every step
        acc = match acc.checked_mul(top - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// All configurations of `N` particles on `K` sites, in increasing
/// lexicographic order of the occupation vectors.
#[derive(Debug, Clone)]
pub struct StateSpace {
    k: usize,
    n: u64,
    states: Vec<Configuration>,
    index: HashMap<Configuration, usize>,
}

impl StateSpace {
    pub fn enumerate(k: usize, n: u64) -> Result<Self> {
        if k < 3 {
            return Err(Error::InvalidParams(format!("K must be at least 3, got {k}")));
        }
        if n < 2 {
            return Err(Error::InvalidParams(format!("N must be at least 2, got {n}")));
        }
        let count = state_count(k, n);
        if count > STATE_GUARD {
            return Err(Error::TooLarge { states: count, limit: STATE_GUARD });
        }
        let mut states = Vec::with_capacity(count as usize);
        let mut counts = vec![0u64; k];
        fill(&mut counts, 0, n, &mut states);
        let index = states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        Ok(Self { k, n, states, index })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[Configuration] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &Configuration {
        &self.states[i]
    }

    pub fn index_of(&self, c: &Configuration) -> Option<usize> {
        self.index.get(c).copied()
    }

    /// Orbits of the rotation group acting on the state space.
    pub fn rotation_orbits(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.len()];
        let mut orbits = Vec::new();
        for i in 0..self.len() {
            if seen[i] {
                continue;
            }
            let mut orbit = Vec::new();
            for l in 0..self.k as i64 {
                let j = self.index[&self.states[i].rotate(l)];
                if !seen[j] {
                    seen[j] = true;
                    orbit.push(j);
                }
            }
            orbits.push(orbit);
        }
        orbits
    }
}

fn fill(counts: &mut Vec<u64>, pos: usize, left: u64, out: &mut Vec<Configuration>) {
    let k = counts.len();
    if pos == k - 1 {
        counts[pos] = left;
        out.push(Configuration::from_counts_unchecked(counts.clone()));
        return;
    }
    for c in 0..=left {
        counts[pos] = c;
        fill(counts, pos + 1, left - c, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_match_binomials() {
        assert_eq!(StateSpace::enumerate(3, 2).unwrap().len(), 6);
        assert_eq!(StateSpace::enumerate(4, 2).unwrap().len(), 10);
        assert_eq!(StateSpace::enumerate(5, 6).unwrap().len(), 210);
        assert_eq!(state_count(5, 5), 126);
        assert_eq!(state_count(100, 100), u128::MAX.min(state_count(100, 100)));
        assert!(matches!(StateSpace::enumerate(3, 1), Err(Error::InvalidParams(_))));
        assert!(matches!(StateSpace::enumerate(30, 30), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn order_is_lexicographic_and_indexed() {
        let s = StateSpace::enumerate(4, 3).unwrap();
        assert!(s.states().windows(2).all(|w| w[0].counts() < w[1].counts()));
        assert_eq!(s.state(0).counts(), &[0, 0, 0, 3]);
        assert_eq!(s.states().last().unwrap().counts(), &[3, 0, 0, 0]);
        for (i, c) in s.states().iter().enumerate() {
            assert_eq!(s.index_of(c), Some(i));
            assert_eq!(c.n(), 3);
        }
    }

    #[test]
    fn orbits_partition_states() {
        let s = StateSpace::enumerate(4, 4).unwrap();
        let orbits = s.rotation_orbits();
        let total: usize = orbits.iter().map(Vec::len).sum();
        assert_eq!(total, s.len());
        // (1,1,1,1) is fixed by every rotation
        let fixed = s.index_of(&Configuration::new(vec![1, 1, 1, 1]).unwrap()).unwrap();
        assert!(orbits.iter().any(|o| o == &vec![fixed]));
    }
}
