mod common;

use offerner::corpus::TaggedSentence;
use offerner::greedy::{train_greedy, GreedyTrainConfig, PerceptronModel};
use offerner::token::tokens_from_texts;
use offerner::{Dataset, Tag, Tagger};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn one_sentence() -> TaggedSentence {
    use Tag::*;
    TaggedSentence::from_pairs(&[
        ("Get", O),
        ("20", Oamt),
        ("%", Oamt),
        ("off", Otype),
        ("on", O),
        ("pizzas", Prd),
        ("at", O),
        ("Dominos", Merch),
    ])
    .unwrap()
}

#[test]
fn overfits_one_sentence() {
    let s = one_sentence();
    let data = Dataset::new("rep", vec![s.clone(); 50]);
    let m = train_greedy(&data, &GreedyTrainConfig::default()).unwrap();
    assert_eq!(m.predict_hard(s.tokens()), s.tags());
}

#[test]
fn zero_epochs_gives_tie_rule() {
    let data = common::fixture_dataset(10, 0);
    let config = GreedyTrainConfig { epochs: 0, seed: 1 };
    let m = train_greedy(&data, &config).unwrap();
    assert!(m.weights().is_empty());
    for s in &data.sentences {
        assert!(m.tag(s.tokens()).iter().all(|&t| t == Tag::Oamt));
    }
}

#[test]
fn deterministic_and_learns_fixture() {
    let data = common::fixture_dataset(60, 2);
    let config = GreedyTrainConfig {
        epochs: 10,
        seed: 5,
    };
    let a = train_greedy(&data, &config).unwrap();
    let b = train_greedy(&data, &config).unwrap();
    assert_eq!(a, b);
    let correct: usize = data
        .sentences
        .iter()
        .map(|s| {
            a.tag(s.tokens())
                .iter()
                .zip(s.tags())
                .filter(|(p, g)| p == g)
                .count()
        })
        .sum();
    assert!(correct as f64 > 0.95 * data.token_count() as f64);
}

#[test]
fn output_length_matches_input() {
    let data = common::fixture_dataset(30, 3);
    let m = train_greedy(&data, &GreedyTrainConfig::default()).unwrap();
    let words = [
        "Get", "20", "%", "off", "at", "Amazon", "Rs", ".", "999", "max",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let len = rng.gen_range(0..15);
        let texts: Vec<&str> = (0..len)
            .map(|_| words[rng.gen_range(0..words.len())])
            .collect();
        assert_eq!(m.predict_hard(&tokens_from_texts(&texts)).len(), len);
    }
}

#[test]
fn file_round_trip() {
    let data = common::fixture_dataset(20, 6);
    let m = train_greedy(&data, &GreedyTrainConfig::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("greedy.model");
    m.save(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("OFFERNER-MODEL v1 GREEDY\ntag\t0\tOAMT\n"));
    assert_eq!(PerceptronModel::load(&path).unwrap(), m);
    let bumped = text.replace("v1 GREEDY", "v2 GREEDY");
    assert!(PerceptronModel::from_text(&bumped).is_err());
}

#[test]
fn rejects_empty_dataset() {
    assert!(train_greedy(&Dataset::new("e", vec![]), &GreedyTrainConfig::default()).is_err());
}
