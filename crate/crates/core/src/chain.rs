//! Order-k Markov chains over a small named state set with an explicit
//! transition table, e.g. a weather model keyed on the last two days.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rand::Rng;

use crate::dist::{Distribution, SUM_TOLERANCE};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionTable {
    order: usize,
    states: Vec<String>,
    rows: BTreeMap<Vec<u32>, Distribution>,
}

/// One row that breaks row-stochasticity or refers to unknown states.
#[derive(Debug, Clone, PartialEq)]
pub struct RowViolation {
    pub history: Vec<u32>,
    pub sum: f64,
    pub problem: String,
}

impl fmt::Display for RowViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "row {:?} (sum {}): {}", self.history, self.sum, self.problem)
    }
}

impl TransitionTable {
    pub fn new<S: Into<String>>(order: usize, states: impl IntoIterator<Item = S>) -> Result<Self> {
        if order == 0 {
            return Err(Error::domain("chain order must be at least 1"));
        }
        let states: Vec<String> = states.into_iter().map(Into::into).collect();
        let mut seen = HashMap::new();
        for (i, s) in states.iter().enumerate() {
            if s.is_empty() || s.contains(char::is_whitespace) {
                return Err(Error::domain(format!("invalid state name {s:?}")));
            }
            if seen.insert(s.as_str(), i).is_some() {
                return Err(Error::domain(format!("duplicate state {s:?}")));
            }
        }
        Ok(TransitionTable {
            order,
            states,
            rows: BTreeMap::new(),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn state_id(&self, name: &str) -> Option<u32> {
        self.states.iter().position(|s| s == name).map(|i| i as u32)
    }

    pub fn state_name(&self, id: u32) -> Option<&str> {
        self.states.get(id as usize).map(String::as_str)
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[u32], &Distribution)> {
        self.rows.iter().map(|(h, d)| (h.as_slice(), d))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Stores a row as given. Nothing is checked here; see [`validate`](Self::validate).
    pub fn insert_row(&mut self, history: Vec<u32>, dist: Distribution) {
        self.rows.insert(history, dist);
    }

    /// Convenience over [`insert_row`](Self::insert_row) using state names.
    pub fn set_row(&mut self, history: &[&str], probs: &[(&str, f64)]) -> Result<()> {
        let history = self.ids(history)?;
        let pairs = probs
            .iter()
            .map(|&(s, p)| Ok((self.known(s)?, p)))
            .collect::<Result<Vec<_>>>()?;
        self.insert_row(history, Distribution::unchecked(pairs));
        Ok(())
    }

    fn known(&self, name: &str) -> Result<u32> {
        self.state_id(name)
            .ok_or_else(|| Error::domain(format!("unknown state {name:?}")))
    }

    /// Maps state names to ids.
    pub fn ids(&self, names: &[&str]) -> Result<Vec<u32>> {
        names.iter().map(|n| self.known(n)).collect()
    }

    pub fn names(&self, ids: &[u32]) -> Result<Vec<&str>> {
        ids.iter()
            .map(|&id| {
                self.state_name(id)
                    .ok_or_else(|| Error::domain(format!("unknown state id {id}")))
            })
            .collect()
    }

    /// Checks every row: arity equals the order, all ids are known states,
    /// each probability is in `[0, 1]`, and each row sums to one within 1e-9.
    /// An empty table is valid.
    pub fn validate(&self) -> Result<(), Vec<RowViolation>> {
        let n = self.states.len() as u32;
        let mut violations = Vec::new();
        for (history, dist) in &self.rows {
            let sum = dist.total();
            let mut report = |problem: String| {
                violations.push(RowViolation {
                    history: history.clone(),
                    sum,
                    problem,
                })
            };
            if history.len() != self.order {
                report(format!("history has {} states, order is {}", history.len(), self.order));
            }
            if history.iter().chain(dist.support().iter().map(|(id, _)| id)).any(|&id| id >= n) {
                report("refers to an unknown state id".into());
            }
            if dist.support().windows(2).any(|w| w[0].0 == w[1].0) {
                report("repeats a successor state".into());
            }
            if dist.support().iter().any(|(_, p)| !(0.0..=1.0).contains(p)) {
                report("has a probability outside [0, 1]".into());
            }
            if (sum - 1.0).abs() > SUM_TOLERANCE {
                report(format!("probabilities sum to {sum}"));
            }
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(violations)
        }
    }

    pub fn next_distribution(&self, history: &[&str]) -> Result<&Distribution> {
        self.next_distribution_ids(&self.ids(history)?)
    }

    pub fn next_distribution_ids(&self, history: &[u32]) -> Result<&Distribution> {
        self.check_history(history)?;
        self.rows.get(history).ok_or_else(|| Error::missing(history))
    }

    fn check_history(&self, history: &[u32]) -> Result<()> {
        if history.len() != self.order {
            return Err(Error::domain(format!(
                "history has {} states, chain order is {}",
                history.len(),
                self.order
            )));
        }
        if let Some(&bad) = history.iter().find(|&&id| id as usize >= self.states.len()) {
            return Err(Error::domain(format!("unknown state id {bad}")));
        }
        Ok(())
    }

    /// Walks the chain for `n` steps from `initial`, drawing each state by
    /// inverse CDF over the row for the trailing `order` states. One uniform
    /// variate is consumed per step.
    pub fn sample_sequence<R: Rng + ?Sized>(&self, initial: &[u32], n: usize, rng: &mut R) -> Result<Vec<u32>> {
        if let Err(v) = self.validate() {
            return Err(Error::domain(format!(
                "transition table is invalid: {}",
                v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
            )));
        }
        self.check_history(initial)?;
        let mut window = initial.to_vec();
        let mut out = Vec::with_capacity(n);
        for step in 0..n {
            let dist = self.rows.get(&window).ok_or_else(|| Error::MissingContext {
                context: crate::error::ContextDisplay(window.clone()),
                position: Some(step),
            })?;
            let next = dist
                .sample(rng)
                .ok_or_else(|| Error::domain(format!("row {window:?} has no positive mass")))?;
            out.push(next);
            window.remove(0);
            window.push(next);
        }
        Ok(out)
    }

    /// Maximum-likelihood chain from an observed state sequence: each row is
    /// `count(history, next) / count(history, *)`.
    pub fn estimate_from_history<S: Into<String>>(
        sequence: &[u32],
        order: usize,
        states: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        let mut table = TransitionTable::new(order, states)?;
        if sequence.len() < order + 1 {
            return Err(Error::InsufficientData {
                needed: order + 1,
                got: sequence.len(),
            });
        }
        if let Some(&bad) = sequence.iter().find(|&&id| id as usize >= table.states.len()) {
            return Err(Error::domain(format!("unknown state id {bad}")));
        }
        let mut counts: BTreeMap<&[u32], BTreeMap<u32, u64>> = BTreeMap::new();
        for w in sequence.windows(order + 1) {
            *counts.entry(&w[..order]).or_default().entry(w[order]).or_default() += 1;
        }
        for (history, next) in counts {
            table.insert_row(history.to_vec(), Distribution::from_counts(next)?);
        }
        Ok(table)
    }

    /// [`estimate_from_history`](Self::estimate_from_history) over named
    /// states, numbered in first-occurrence order.
    pub fn estimate_from_names(sequence: &[&str], order: usize) -> Result<Self> {
        let mut states: Vec<&str> = Vec::new();
        let ids: Vec<u32> = sequence
            .iter()
            .map(|s| match states.iter().position(|x| x == s) {
                Some(i) => i as u32,
                None => {
                    states.push(s);
                    (states.len() - 1) as u32
                }
            })
            .collect();
        Self::estimate_from_history(&ids, order, states)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;

    const S: &str = "soleado";
    const N: &str = "nublado";
    const L: &str = "lluvioso";

    fn weather() -> TransitionTable {
        let mut t = TransitionTable::new(2, [S, N, L]).unwrap();
        let rows = [
            ([S, S], [0.7, 0.2, 0.1]),
            ([S, N], [0.4, 0.4, 0.2]),
            ([S, L], [0.4, 0.3, 0.3]),
            ([N, S], [0.4, 0.4, 0.2]),
            ([N, N], [0.2, 0.5, 0.3]),
            ([N, L], [0.2, 0.4, 0.4]),
            ([L, S], [0.3, 0.5, 0.2]),
            ([L, N], [0.2, 0.5, 0.3]),
            ([L, L], [0.1, 0.3, 0.6]),
        ];
        for (h, p) in rows {
            t.set_row(&h, &[(S, p[0]), (N, p[1]), (L, p[2])]).unwrap();
        }
        t
    }

    #[test]
    fn weather_table_is_valid() {
        let t = weather();
        assert_eq!(t.len(), 9);
        assert_eq!(t.validate(), Ok(()));
    }

    #[test]
    fn reports_rows_that_do_not_sum_to_one() {
        let mut t = TransitionTable::new(1, ["a", "b"]).unwrap();
        t.set_row(&["a"], &[("a", 0.5), ("b", 0.4)]).unwrap();
        t.set_row(&["b"], &[("a", 1.0)]).unwrap();
        let v = t.validate().unwrap_err();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].history, [0]);
        assert!((v[0].sum - 0.9).abs() < 1e-12);
    }

    #[test]
    fn empty_table_is_valid() {
        assert_eq!(TransitionTable::new(2, [S]).unwrap().validate(), Ok(()));
    }

    #[test]
    fn looks_up_rows() {
        let t = weather();
        let d = t.next_distribution(&[N, L]).unwrap();
        assert_eq!(d.support(), [(0, 0.2), (1, 0.4), (2, 0.4)]);
        let d = t.next_distribution(&[L, L]).unwrap();
        assert_eq!(d.support(), [(0, 0.1), (1, 0.3), (2, 0.6)]);
        assert!(matches!(t.next_distribution(&[N, "nevado"]), Err(Error::Domain(_))));
        assert!(matches!(t.next_distribution(&[N]), Err(Error::Domain(_))));
    }

    #[test]
    fn missing_row_is_reported() {
        let mut t = TransitionTable::new(1, ["a", "b"]).unwrap();
        t.set_row(&["a"], &[("b", 1.0)]).unwrap();
        assert!(matches!(t.next_distribution(&["b"]), Err(Error::MissingContext { .. })));
        let err = t.sample_sequence(&[0], 3, &mut seeded_rng(1)).unwrap_err();
        assert!(matches!(err, Error::MissingContext { position: Some(1), .. }), "{err:?}");
    }

    #[test]
    fn single_state_chain_is_deterministic() {
        let mut t = TransitionTable::new(2, ["S"]).unwrap();
        t.set_row(&["S", "S"], &[("S", 1.0)]).unwrap();
        let out = t.sample_sequence(&[0, 0], 5, &mut seeded_rng(7)).unwrap();
        assert_eq!(out, [0; 5]);
        assert!(t.sample_sequence(&[0, 0], 0, &mut seeded_rng(7)).unwrap().is_empty());
    }

    #[test]
    fn refuses_to_sample_invalid_tables() {
        let mut t = TransitionTable::new(1, ["a"]).unwrap();
        t.set_row(&["a"], &[("a", 0.5)]).unwrap();
        assert!(t.sample_sequence(&[0], 1, &mut seeded_rng(0)).is_err());
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let t = weather();
        let init = t.ids(&[N, L]).unwrap();
        let a = t.sample_sequence(&init, 200, &mut seeded_rng(42)).unwrap();
        let b = t.sample_sequence(&init, 200, &mut seeded_rng(42)).unwrap();
        let c = t.sample_sequence(&init, 200, &mut seeded_rng(43)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn estimates_transition_counts() {
        let t = TransitionTable::estimate_from_names(&["S", "N", "S", "N"], 1).unwrap();
        assert_eq!(t.next_distribution(&["S"]).unwrap().support(), [(1, 1.0)]);
        assert_eq!(t.next_distribution(&["N"]).unwrap().support(), [(0, 1.0)]);
    }

    #[test]
    fn estimates_one_in_five_as_point_two() {
        // (N, L) is followed by S once and by L four times.
        let mut seq = vec![N, L, S];
        for _ in 0..4 {
            seq.extend([N, L, L]);
        }
        let t = TransitionTable::estimate_from_names(&seq, 2).unwrap();
        let d = t.next_distribution(&[N, L]).unwrap();
        let s = t.state_id(S).unwrap();
        assert_eq!(d.prob(s), 0.2);
        assert_eq!(t.validate(), Ok(()));
    }

    #[test]
    fn estimation_needs_k_plus_one_states() {
        let err = TransitionTable::estimate_from_names(&["A", "B"], 2).unwrap_err();
        assert_eq!(err, Error::InsufficientData { needed: 3, got: 2 });
    }
}
