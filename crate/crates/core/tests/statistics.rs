mod common;

use hawkes_core::statistics::{jitter, window_count};
use hawkes_core::{accumulate_all, bin_events, Event, EventLog};
use proptest::prelude::*;

use common::{naive_pair, random_log};

fn arb_log() -> impl Strategy<Value = (EventLog, f64)> {
    (
        2usize..5,
        prop::sample::select(vec![0.25, 0.5, 1.0]),
        3usize..30,
        any::<u64>(),
    )
        .prop_map(|(n, eps, bins, seed)| {
            let mut rng = hawkes_core::rng::from_seed(seed);
            (random_log(&mut rng, n, bins as f64 * eps, eps, true), eps)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn grid_pass_matches_timestamp_recount((log, eps) in arb_log()) {
        let grid = bin_events(&log, eps).unwrap();
        let all = accumulate_all(&grid);
        for i in 0..log.n {
            for j in (0..log.n).filter(|&j| j != i) {
                let s = all.get(i, j);
                prop_assert_eq!((s.d1, s.d2), naive_pair(&log, eps, grid.windows(), i, j));
            }
        }
    }

    #[test]
    fn other_nodes_never_change_a_pair((log, eps) in arb_log()) {
        let all = accumulate_all(&bin_events(&log, eps).unwrap());
        let pair = log.filter_nodes(|v| v < 2);
        let sub = accumulate_all(&bin_events(&pair, eps).unwrap());
        prop_assert_eq!(all.get(0, 1), sub.get(0, 1));
        prop_assert_eq!(all.get(1, 0), sub.get(1, 0));
    }
}

#[test]
fn windows_truncate_to_complete_ones() {
    assert_eq!(window_count(10.0, 1.0), 3);
    assert_eq!(window_count(0.9, 0.1), 3);
    assert_eq!(window_count(0.3, 0.1), 1);
    let log = EventLog::new(
        2,
        10.0,
        vec![
            Event { time: 9.5, node: 0 },
            Event {
                time: 10.0,
                node: 1,
            },
        ],
    )
    .unwrap();
    let grid = bin_events(&log, 1.0).unwrap();
    assert_eq!(grid.num_bins(), 10);
    assert_eq!(grid.count(1, 9), 1);
    // Bin 9 lies outside the three complete windows.
    let all = accumulate_all(&grid);
    assert_eq!((all.get(0, 1).d1, all.get(0, 1).d2), (0, 0));
}

#[test]
fn zero_jitter_is_identity_and_jitter_is_seeded() {
    let mut rng = hawkes_core::rng::from_seed(3);
    let log = random_log(&mut rng, 3, 30.0, 0.5, false);
    assert_eq!(jitter(&log, 0.0, 1).unwrap(), log);
    assert_eq!(
        jitter(&log, 0.01, 9).unwrap(),
        jitter(&log, 0.01, 9).unwrap()
    );
    assert!(jitter(&log, -1.0, 9).is_err());
}

#[test]
fn dump_has_one_row_per_ordered_pair() {
    let mut rng = hawkes_core::rng::from_seed(4);
    let log = random_log(&mut rng, 3, 12.0, 0.5, false);
    let all = accumulate_all(&bin_events(&log, 0.5).unwrap());
    let mut out = Vec::new();
    all.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "i,j,D1,D2,K,epsilon,T");
    assert_eq!(lines.len(), 1 + 6);
    assert!(lines[1].starts_with("0,1,") && lines[1].ends_with(",8,0.5,12"));
}
