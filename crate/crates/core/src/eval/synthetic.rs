//! Topic-grouped synthetic edits for benchmarks and tests.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ingest::EvalRecord;

const TOPICS: [&str; 24] = [
    "aurora", "basalt", "cobalt", "delta", "ember", "fjord", "garnet", "harbor", "indigo",
    "jasper", "kelp", "lumen", "mosaic", "nectar", "onyx", "prairie", "quartz", "raven", "sierra",
    "tundra", "umber", "violet", "willow", "zephyr",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCorpus {
    pub edits: Vec<String>,
    /// Topic group of each edit.
    pub groups: Vec<usize>,
    /// One query per edit, gold = that edit.
    pub records: Vec<EvalRecord>,
}

fn topic(g: usize) -> String {
    let base = TOPICS[g % TOPICS.len()];
    if g < TOPICS.len() {
        base.to_string()
    } else {
        format!("{base}{}", g / TOPICS.len())
    }
}

/// `groups * per_group` edits. Edits in a group share six topic tokens and
/// differ by one item token; queries restate the item plus two topic tokens.
/// Edit order is shuffled with `seed` so ids do not reveal the group.
pub fn synthetic_corpus(groups: usize, per_group: usize, seed: u64) -> SyntheticCorpus {
    let mut rows = Vec::with_capacity(groups * per_group);
    for g in 0..groups {
        let t = topic(g);
        for i in 0..per_group {
            let item = format!("{t}item{i}");
            let edit = format!("The {item} of {t}1 {t}2 is located in {t}3 {t}4 near {t}5 {t}6");
            let query = format!("Where is the {item} of {t}1 {t}2 found?");
            rows.push((edit, g, query));
        }
    }
    rows.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut corpus = SyntheticCorpus {
        edits: Vec::with_capacity(rows.len()),
        groups: Vec::with_capacity(rows.len()),
        records: Vec::with_capacity(rows.len()),
    };
    for (id, (edit, g, query)) in rows.into_iter().enumerate() {
        corpus.edits.push(edit);
        corpus.groups.push(g);
        let mut r = EvalRecord::new(query, Some(id));
        r.case_id = Some(id.to_string());
        corpus.records.push(r);
    }
    corpus
}
