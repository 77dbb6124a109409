//! Occupation-number basis of the truncated multi-site Fock space.
//!
//! States are little-endian occupation tuples: the packed code of `(n_0, …, n_{M-1})`
//! is `Σ_j n_j (n_max+1)^j`, so site 0 varies fastest. Flat indices follow ascending
//! packed code. Without a total-number cap the flat index equals the packed code.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    sites: usize,
    n_max: usize,
    max_total: Option<usize>,
    strides: Vec<u64>,
    /// Sorted packed codes, present only when a total-number cap filters the product basis.
    states: Option<Vec<u64>>,
    dim: usize,
}

impl Basis {
    /// Basis dimension, checked against `budget` without enumerating any state.
    pub fn count(sites: usize, n_max: usize, max_total: Option<usize>, budget: u64) -> Result<usize> {
        let radix = n_max as u128 + 1;
        let mut full: u128 = 1;
        for _ in 0..sites {
            full = full.saturating_mul(radix);
        }
        if full > u64::MAX as u128 / 2 {
            return Err(Error::DimensionBudget { dim: full, budget });
        }
        let dim = match max_total.filter(|&cap| cap < sites * n_max) {
            None => full,
            Some(cap) => count_capped(sites, n_max, cap),
        };
        if dim > budget as u128 {
            return Err(Error::DimensionBudget { dim, budget });
        }
        Ok(dim as usize)
    }

    pub fn new(sites: usize, n_max: usize, max_total: Option<usize>, budget: u64) -> Result<Self> {
        let dim = Self::count(sites, n_max, max_total, budget)?;
        let radix = n_max as u64 + 1;
        let strides: Vec<u64> = (0..sites).map(|j| radix.pow(j as u32)).collect();
        let cap = max_total.filter(|&cap| cap < sites * n_max);
        let states = cap.map(|cap| {
            let mut out = Vec::with_capacity(dim);
            enumerate_capped(n_max, cap, &strides, sites, 0, &mut out);
            out
        });
        Ok(Self {
            sites,
            n_max,
            max_total: cap,
            strides,
            states,
            dim,
        })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn max_total(&self) -> Option<usize> {
        self.max_total
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn stride(&self, site: usize) -> u64 {
        self.strides[site]
    }

    pub fn packed(&self, index: usize) -> u64 {
        match &self.states {
            None => index as u64,
            Some(states) => states[index],
        }
    }

    pub fn index_of_packed(&self, code: u64) -> Option<usize> {
        match &self.states {
            None => ((code as usize) < self.dim).then_some(code as usize),
            Some(states) => states.binary_search(&code).ok(),
        }
    }

    pub fn encode(&self, occupation: &[usize]) -> Option<u64> {
        if occupation.len() != self.sites || occupation.iter().any(|&n| n > self.n_max) {
            return None;
        }
        Some(
            occupation
                .iter()
                .zip(&self.strides)
                .map(|(&n, &s)| n as u64 * s)
                .sum(),
        )
    }

    pub fn index_of(&self, occupation: &[usize]) -> Option<usize> {
        self.index_of_packed(self.encode(occupation)?)
    }

    pub fn occupation_at(&self, index: usize, site: usize) -> usize {
        ((self.packed(index) / self.strides[site]) % (self.n_max as u64 + 1)) as usize
    }

    pub fn decode_into(&self, index: usize, out: &mut [usize]) {
        let radix = self.n_max as u64 + 1;
        let mut code = self.packed(index);
        for n in out.iter_mut().take(self.sites) {
            *n = (code % radix) as usize;
            code /= radix;
        }
    }

    pub fn occupations(&self, index: usize) -> Vec<usize> {
        let mut out = vec![0; self.sites];
        self.decode_into(index, &mut out);
        out
    }

    /// Index of the state with one particle removed from `site`, if occupied.
    pub fn lowered(&self, index: usize, site: usize) -> Option<usize> {
        if self.occupation_at(index, site) == 0 {
            return None;
        }
        let code = self.packed(index) - self.strides[site];
        match &self.states {
            None => Some(code as usize),
            Some(states) => states.binary_search(&code).ok(),
        }
    }

    /// Index of the state with one particle added at `site`, if it stays in the basis.
    pub fn raised(&self, index: usize, site: usize) -> Option<usize> {
        if self.occupation_at(index, site) == self.n_max {
            return None;
        }
        self.index_of_packed(self.packed(index) + self.strides[site])
    }
}

fn count_capped(sites: usize, n_max: usize, cap: usize) -> u128 {
    // ways[t] = number of prefixes with total t
    let mut ways = vec![0u128; cap + 1];
    ways[0] = 1;
    for _ in 0..sites {
        let mut next = vec![0u128; cap + 1];
        for (t, &w) in ways.iter().enumerate() {
            if w == 0 {
                continue;
            }
            for n in 0..=n_max.min(cap - t) {
                next[t + n] += w;
            }
        }
        ways = next;
    }
    ways.iter().sum()
}

/// Depth-first from the most significant site, so codes come out ascending.
fn enumerate_capped(
    n_max: usize,
    remaining: usize,
    strides: &[u64],
    depth: usize,
    prefix: u64,
    out: &mut Vec<u64>,
) {
    if depth == 0 {
        out.push(prefix);
        return;
    }
    let site = depth - 1;
    for n in 0..=n_max.min(remaining) {
        enumerate_capped(
            n_max,
            remaining - n,
            strides,
            depth - 1,
            prefix + n as u64 * strides[site],
            out,
        );
    }
}
