use std::collections::HashMap;

use markovlm::model_file::{chain_to_bytes, parse_chain};
use markovlm::rng::seeded_rng;
use markovlm::TransitionTable;

const WEATHER: &str = include_str!("../../../data/weather_order2.markov");

#[test]
fn weather_file_is_valid_and_canonical() {
    let table = parse_chain(WEATHER).unwrap();
    assert_eq!(table.validate(), Ok(()));
    assert_eq!(table.len(), 9);
    let row = table.next_distribution(&["nublado", "lluvioso"]).unwrap();
    assert_eq!(row.support(), [(0, 0.2), (1, 0.4), (2, 0.4)]);
    assert_eq!(chain_to_bytes(&table), WEATHER.as_bytes());
}

/// Long walk, re-estimated: rows visited often enough come back within 0.01.
#[test]
fn sampling_then_estimating_recovers_rows() {
    let table = parse_chain(WEATHER).unwrap();
    let start = table.ids(&["soleado", "soleado"]).unwrap();
    let mut rng = seeded_rng(2024);
    let mut walk = start.clone();
    walk.extend(table.sample_sequence(&start, 1_000_000, &mut rng).unwrap());

    let estimated = TransitionTable::estimate_from_history(&walk, 2, table.states().iter().cloned()).unwrap();
    let mut visits: HashMap<&[u32], usize> = HashMap::new();
    for w in walk.windows(3) {
        *visits.entry(&w[..2]).or_default() += 1;
    }
    let mut checked = 0;
    for (history, row) in table.rows() {
        if visits.get(history).copied().unwrap_or(0) < 10_000 {
            continue;
        }
        checked += 1;
        let est = estimated.next_distribution_ids(history).unwrap();
        for &(id, p) in row.support() {
            let q = est.prob(id);
            assert!((p - q).abs() <= 0.01, "row {history:?} state {id}: {p} vs {q}");
        }
    }
    assert_eq!(checked, 9);
}
