use rand::Rng;

use crate::error::{Error, Result};

/// Tolerance for a distribution's total mass.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Categorical distribution over ids, support sorted ascending by id.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    support: Vec<(u32, f64)>,
}

impl Distribution {
    /// Builds a validated distribution: ids distinct, every probability in
    /// `[0, 1]`, total within [`SUM_TOLERANCE`] of one.
    pub fn new(pairs: impl IntoIterator<Item = (u32, f64)>) -> Result<Self> {
        let dist = Self::unchecked(pairs);
        if let Some(w) = dist.support.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::domain(format!("id {} appears twice in a distribution", w[0].0)));
        }
        if let Some(&(id, p)) = dist.support.iter().find(|(_, p)| !(0.0..=1.0).contains(p)) {
            return Err(Error::domain(format!("probability {p} for id {id} is outside [0, 1]")));
        }
        let total = dist.total();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::domain(format!("probabilities sum to {total}, not 1")));
        }
        Ok(dist)
    }

    /// Sorts by id without checking anything. Used for tables that are
    /// validated separately.
    pub fn unchecked(pairs: impl IntoIterator<Item = (u32, f64)>) -> Self {
        let mut support: Vec<(u32, f64)> = pairs.into_iter().collect();
        support.sort_by_key(|&(id, _)| id);
        Distribution { support }
    }

    /// Relative frequencies `count / total`. Zero counts are dropped.
    pub fn from_counts(counts: impl IntoIterator<Item = (u32, u64)>) -> Result<Self> {
        let counts: Vec<(u32, u64)> = counts.into_iter().filter(|&(_, c)| c > 0).collect();
        let total: u64 = counts.iter().map(|&(_, c)| c).sum();
        if total == 0 {
            return Err(Error::domain("cannot normalize an empty count table"));
        }
        Ok(Self::unchecked(
            counts.into_iter().map(|(id, c)| (id, c as f64 / total as f64)),
        ))
    }

    pub fn support(&self) -> &[(u32, f64)] {
        &self.support
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn prob(&self, id: u32) -> f64 {
        self.support
            .binary_search_by_key(&id, |&(i, _)| i)
            .map_or(0.0, |i| self.support[i].1)
    }

    pub fn total(&self) -> f64 {
        self.support.iter().map(|&(_, p)| p).sum()
    }

    /// Highest-probability id; the smallest id wins ties.
    pub fn argmax(&self) -> Option<u32> {
        let mut best: Option<(u32, f64)> = None;
        for &(id, p) in &self.support {
            if best.is_none_or(|(_, bp)| p > bp) {
                best = Some((id, p));
            }
        }
        best.map(|(id, _)| id)
    }

    /// Inverse-CDF lookup for a uniform variate `u` in `[0, 1)`, walking the
    /// support in ascending id order.
    pub fn inverse_cdf(&self, u: f64) -> Option<u32> {
        let target = u * self.total();
        let mut cum = 0.0;
        let mut last_positive = None;
        for &(id, p) in &self.support {
            if p <= 0.0 {
                continue;
            }
            cum += p;
            last_positive = Some(id);
            if target < cum {
                return Some(id);
            }
        }
        last_positive
    }

    /// Draws one id, consuming exactly one uniform variate from `rng`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<u32> {
        let u: f64 = rng.random();
        self.inverse_cdf(u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates() {
        assert!(Distribution::new([(0, 0.5), (1, 0.5)]).is_ok());
        assert!(Distribution::new([(0, 0.5), (1, 0.4)]).is_err());
        assert!(Distribution::new([(0, 0.5), (0, 0.5)]).is_err());
        assert!(Distribution::new([(0, 1.5), (1, -0.5)]).is_err());
    }

    #[test]
    fn sorts_support() {
        let d = Distribution::new([(2, 0.25), (0, 0.75)]).unwrap();
        assert_eq!(d.support(), [(0, 0.75), (2, 0.25)]);
        assert_eq!(d.prob(2), 0.25);
        assert_eq!(d.prob(1), 0.0);
    }

    #[test]
    fn inverse_cdf_walks_ids_in_order() {
        let d = Distribution::new([(0, 0.2), (1, 0.4), (2, 0.4)]).unwrap();
        assert_eq!(d.inverse_cdf(0.0), Some(0));
        assert_eq!(d.inverse_cdf(0.19), Some(0));
        assert_eq!(d.inverse_cdf(0.2), Some(1));
        assert_eq!(d.inverse_cdf(0.59), Some(1));
        assert_eq!(d.inverse_cdf(0.61), Some(2));
        assert_eq!(d.inverse_cdf(0.999_999), Some(2));
    }

    #[test]
    fn inverse_cdf_skips_zero_mass() {
        let d = Distribution::unchecked([(0, 0.0), (1, 1.0), (2, 0.0)]);
        assert_eq!(d.inverse_cdf(0.0), Some(1));
        assert_eq!(d.inverse_cdf(0.99), Some(1));
        assert_eq!(Distribution::unchecked([]).inverse_cdf(0.5), None);
    }

    #[test]
    fn from_counts_is_relative_frequency() {
        let d = Distribution::from_counts([(3, 1), (1, 3), (2, 0)]).unwrap();
        assert_eq!(d.support(), [(1, 0.75), (3, 0.25)]);
        assert!(Distribution::from_counts([]).is_err());
    }

    #[test]
    fn argmax_prefers_lowest_id_on_ties() {
        let d = Distribution::unchecked([(4, 0.4), (1, 0.4), (2, 0.2)]);
        assert_eq!(d.argmax(), Some(1));
    }
}
