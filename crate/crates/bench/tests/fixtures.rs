use seminmt_bench::{Fixture, Scale};

#[test]
fn fixtures_are_deterministic_and_in_range() {
    let a = Fixture::new(Scale::DESK, 9).unwrap();
    let b = Fixture::new(Scale::DESK, 9).unwrap();
    assert_eq!(a.pairs, b.pairs);
    assert_eq!(a.pairs.len(), Scale::DESK.batch);
    assert!(a.pairs.iter().all(|(x, y)| x.len() == Scale::DESK.sentence_len && !y.contains_unk()));
    assert_eq!(a.s2t.config().vocab_out, Scale::DESK.vocab);
    assert_eq!(a.t2s.direction(), a.s2t.direction().reverse());
}

#[test]
fn tiny_fixture_scores_finitely() {
    let f = Fixture::new(Scale::TINY, 1).unwrap();
    for (x, y) in &f.pairs {
        assert!(f.s2t.log_prob(x.ids(), y.ids()).unwrap().is_finite());
    }
}
