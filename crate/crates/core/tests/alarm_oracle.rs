mod common;

use optiagent::alarms::{self, PriorityConfig};
use optiagent::fixtures;
use optiagent::rag::HashingEmbedder;
use rand::seq::SliceRandom;
use rand::Rng;

#[test]
fn four_hundred_batches_against_the_oracles() {
    let o = common::check_alarm_pipeline();
    assert!(o.pass, "{}", o.detail);
}

#[test]
fn dense_batches_with_one_type() {
    let rb = fixtures::rulebase();
    let emb = HashingEmbedder::default();
    let mut r = common::rng(3);
    for i in 0..50 {
        let mut batch = common::random_batch(&mut r, i);
        for a in &mut batch {
            a.alarm_type = "LOS".into();
        }
        common::alarm_batch_check(&batch, &PriorityConfig::default(), &rb, &emb).unwrap();
    }
}

#[test]
fn windows_partition_the_stream() {
    let mut r = common::rng(4);
    for round in 0..200 {
        let stream: Vec<_> = (0..r.random_range(0..120))
            .map(|i| common::random_alarm(&mut r, format!("s{round}-{i:03}"), 0, 1_000_000))
            .collect();
        let window = r.random_range(1_000..300_000);
        let cap = r.random_range(1..30);
        let batches = alarms::window_batches(&stream, window, cap).unwrap();
        let mut sorted = stream.clone();
        sorted.sort_by(|a, b| (a.ts, &a.id).cmp(&(b.ts, &b.id)));
        let flat: Vec<_> = batches.iter().flat_map(|b| b.alarms.clone()).collect();
        assert_eq!(flat, sorted);
        for b in &batches {
            assert!(!b.alarms.is_empty() && b.alarms.len() <= cap);
            assert_eq!(b.window_start, b.alarms[0].ts);
            assert!(b.alarms.iter().all(|a| a.ts <= b.window_start + window));
        }
        let mut shuffled = stream.clone();
        shuffled.shuffle(&mut r);
        assert_eq!(alarms::window_batches(&shuffled, window, cap).unwrap(), batches);
    }
}
