//! Quantized event counts and the pair/triple difference statistics.
//!
//! Time is cut into half-open bins `[bε, (b+1)ε)` (the last bin also holds
//! events at exactly `T`). Window `w` covers bins `3w, 3w+1, 3w+2`; the
//! first-order statistic reads the first two bins and the second-order
//! statistic all three. An indicator fires only when each designated node has
//! exactly one event in its designated bin.

use std::io::Write;

use rand::Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::rng;
use crate::simulator::EventLog;

/// `x` snapped to the nearest integer when within floating-point noise of it.
fn snapped(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r
    } else {
        x
    }
}

/// Number of complete 3ε windows in `[0, T]`.
pub fn window_count(horizon: f64, epsilon: f64) -> usize {
    snapped(horizon / (3.0 * epsilon)).floor() as usize
}

/// Per-node occupancy counts over `⌈T/ε⌉` bins.
#[derive(Debug, Clone, PartialEq)]
pub struct BinGrid {
    epsilon: f64,
    horizon: f64,
    num_bins: usize,
    n: usize,
    counts: Vec<u32>,
}

impl BinGrid {
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Occupancy of `node` in every bin.
    pub fn counts(&self, node: usize) -> &[u32] {
        &self.counts[node * self.num_bins..(node + 1) * self.num_bins]
    }

    pub fn count(&self, node: usize, bin: usize) -> u32 {
        self.counts(node)[bin]
    }

    /// Number of non-overlapping windows `K = ⌊T / 3ε⌋`.
    pub fn windows(&self) -> usize {
        window_count(self.horizon, self.epsilon)
    }

    #[inline]
    fn single(&self, node: usize, bin: usize) -> bool {
        self.counts[node * self.num_bins + bin] == 1
    }

    fn check_nodes(&self, i: usize, j: usize) -> Result<()> {
        for node in [i, j] {
            if node >= self.n {
                return Err(Error::NodeOutOfRange { node, n: self.n });
            }
        }
        Ok(())
    }

    fn check_window(&self, w: usize) -> Result<()> {
        if w >= self.windows() {
            return Err(Error::WindowOutOfRange {
                window: w,
                windows: self.windows(),
            });
        }
        Ok(())
    }
}

/// Bin index of time `t` (half-open bins, clamped into the last bin).
#[inline]
pub fn bin_index(t: f64, epsilon: f64, num_bins: usize) -> usize {
    ((t / epsilon).floor() as usize).min(num_bins - 1)
}

/// Quantizes a log into ε-bins.
pub fn bin_events(log: &EventLog, epsilon: f64) -> Result<BinGrid> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(invalid(format!("bin width {epsilon} must be positive")));
    }
    let num_bins = (snapped(log.horizon / epsilon).ceil() as usize).max(1);
    let mut counts = vec![0u32; log.n * num_bins];
    for e in log.events() {
        counts[e.node * num_bins + bin_index(e.time, epsilon, num_bins)] += 1;
    }
    Ok(BinGrid {
        epsilon,
        horizon: log.horizon,
        num_bins,
        n: log.n,
        counts,
    })
}

/// `X_ij - X_ji` for window `w`.
pub fn delta1(grid: &BinGrid, i: usize, j: usize, w: usize) -> Result<i32> {
    grid.check_nodes(i, j)?;
    grid.check_window(w)?;
    Ok(delta1_at(grid, i, j, 3 * w))
}

#[inline]
fn delta1_at(grid: &BinGrid, i: usize, j: usize, b: usize) -> i32 {
    let x_ij = grid.single(i, b) && grid.single(j, b + 1);
    let x_ji = grid.single(j, b) && grid.single(i, b + 1);
    i32::from(x_ij) - i32::from(x_ji)
}

/// `X_iij - 2 X_iji + X_jii` for window `w`.
pub fn delta2(grid: &BinGrid, i: usize, j: usize, w: usize) -> Result<i32> {
    grid.check_nodes(i, j)?;
    grid.check_window(w)?;
    Ok(delta2_at(grid, i, j, 3 * w))
}

#[inline]
fn delta2_at(grid: &BinGrid, i: usize, j: usize, b: usize) -> i32 {
    let (i0, i1, i2) = (
        grid.single(i, b),
        grid.single(i, b + 1),
        grid.single(i, b + 2),
    );
    let (j0, j1, j2) = (
        grid.single(j, b),
        grid.single(j, b + 1),
        grid.single(j, b + 2),
    );
    let x_iij = i0 && i1 && j2;
    let x_iji = i0 && j1 && i2;
    let x_jii = j0 && i1 && i2;
    i32::from(x_iij) - 2 * i32::from(x_iji) + i32::from(x_jii)
}

/// Accumulated statistics for the ordered pair `(i, j)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairStatistics {
    pub i: usize,
    pub j: usize,
    pub d1: i64,
    pub d2: i64,
    pub windows: usize,
    pub epsilon: f64,
    pub horizon: f64,
}

/// `D1` and `D2` for one ordered pair, summed over all complete windows.
pub fn accumulate(grid: &BinGrid, i: usize, j: usize) -> Result<PairStatistics> {
    grid.check_nodes(i, j)?;
    if i == j {
        return Err(invalid("pair statistics need distinct nodes"));
    }
    let windows = grid.windows();
    let (mut d1, mut d2) = (0i64, 0i64);
    for w in 0..windows {
        d1 += i64::from(delta1_at(grid, i, j, 3 * w));
        d2 += i64::from(delta2_at(grid, i, j, 3 * w));
    }
    Ok(PairStatistics {
        i,
        j,
        d1,
        d2,
        windows,
        epsilon: grid.epsilon,
        horizon: grid.horizon,
    })
}

/// Statistics for every ordered pair of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AllPairStatistics {
    n: usize,
    windows: usize,
    epsilon: f64,
    horizon: f64,
    d1: Vec<i64>,
    d2: Vec<i64>,
}

impl AllPairStatistics {
    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn windows(&self) -> usize {
        self.windows
    }

    pub fn get(&self, i: usize, j: usize) -> PairStatistics {
        let k = i * self.n + j;
        PairStatistics {
            i,
            j,
            d1: self.d1[k],
            d2: self.d2[k],
            windows: self.windows,
            epsilon: self.epsilon,
            horizon: self.horizon,
        }
    }

    /// All ordered pairs `(i, j)`, `i ≠ j`, in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = PairStatistics> + '_ {
        (0..self.n).flat_map(move |i| {
            (0..self.n)
                .filter(move |&j| j != i)
                .map(move |j| self.get(i, j))
        })
    }

    /// Writes the delimited dump `i,j,D1,D2,K,epsilon,T`, one row per ordered pair.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["i", "j", "D1", "D2", "K", "epsilon", "T"])?;
        for s in self.iter() {
            w.write_record([
                s.i.to_string(),
                s.j.to_string(),
                s.d1.to_string(),
                s.d2.to_string(),
                s.windows.to_string(),
                s.epsilon.to_string(),
                s.horizon.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Statistics for all ordered pairs in one pass over the singly-occupied bins.
pub fn accumulate_all(grid: &BinGrid) -> AllPairStatistics {
    let n = grid.n;
    let windows = grid.windows();
    let used = 3 * windows;
    let mut singles: Vec<(u32, u32)> = Vec::new();
    for node in 0..n {
        for (b, &c) in grid.counts(node)[..used].iter().enumerate() {
            if c == 1 {
                singles.push((b as u32, node as u32));
            }
        }
    }
    singles.sort_unstable();

    let mut d1 = vec![0i64; n * n];
    let mut d2 = vec![0i64; n * n];
    let mut slots: [Vec<usize>; 3] = Default::default();
    let mut cursor = 0;
    while cursor < singles.len() {
        let w = singles[cursor].0 as usize / 3;
        for s in &mut slots {
            s.clear();
        }
        while cursor < singles.len() && singles[cursor].0 as usize / 3 == w {
            let (b, node) = singles[cursor];
            slots[b as usize % 3].push(node as usize);
            cursor += 1;
        }
        let [a0, a1, a2] = &slots;
        // X_ij: i single in bin 0, j single in bin 1.
        for &i in a0 {
            for &j in a1 {
                if i != j {
                    d1[i * n + j] += 1;
                    d1[j * n + i] -= 1;
                }
            }
        }
        for &i in a0 {
            let in1 = a1.contains(&i);
            let in2 = a2.contains(&i);
            if in1 {
                // X_iij
                for &j in a2 {
                    if j != i {
                        d2[i * n + j] += 1;
                    }
                }
            }
            if in2 {
                // X_iji
                for &j in a1 {
                    if j != i {
                        d2[i * n + j] -= 2;
                    }
                }
            }
        }
        for &i in a1 {
            if a2.contains(&i) {
                // X_jii
                for &j in a0 {
                    if j != i {
                        d2[i * n + j] += 1;
                    }
                }
            }
        }
    }
    AllPairStatistics {
        n,
        windows,
        epsilon: grid.epsilon,
        horizon: grid.horizon,
        d1,
        d2,
    }
}

/// Shifts every timestamp by an independent `U[-magnitude, magnitude]` draw,
/// clamps to `[0, T]` and re-sorts.
pub fn jitter(log: &EventLog, magnitude: f64, seed: u64) -> Result<EventLog> {
    if !(magnitude >= 0.0 && magnitude.is_finite()) {
        return Err(invalid(format!(
            "jitter magnitude {magnitude} must be non-negative"
        )));
    }
    if magnitude == 0.0 {
        return Ok(log.clone());
    }
    let mut rng = rng::from_seed(seed);
    let horizon = log.horizon;
    Ok(log.map_times(|e| (e.time + rng.random_range(-magnitude..=magnitude)).clamp(0.0, horizon)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::Event;
    use proptest::prelude::*;

    fn log(n: usize, horizon: f64, events: &[(f64, usize)]) -> EventLog {
        EventLog::new(
            n,
            horizon,
            events
                .iter()
                .map(|&(time, node)| Event { time, node })
                .collect(),
        )
        .unwrap()
    }

    /// Grid over 3 bins of width 1 with the given per-node occupancies.
    fn grid3(occupancy: &[[u32; 3]]) -> BinGrid {
        let mut events = Vec::new();
        for (node, occ) in occupancy.iter().enumerate() {
            for (b, &c) in occ.iter().enumerate() {
                for k in 0..c {
                    events.push((b as f64 + 0.1 + 0.1 * k as f64, node));
                }
            }
        }
        bin_events(&log(occupancy.len(), 3.0, &events), 1.0).unwrap()
    }

    #[test]
    fn binning_examples() {
        let g = bin_events(&log(1, 1.0, &[(0.05, 0), (0.15, 0)]), 0.1).unwrap();
        assert_eq!(&g.counts(0)[..3], &[1, 1, 0]);
        assert_eq!(g.num_bins(), 10);
        let g = bin_events(&log(1, 1.0, &[(0.1, 0)]), 0.1).unwrap();
        assert_eq!(g.count(0, 1), 1);
        assert_eq!(g.count(0, 0), 0);
        let g = bin_events(&log(2, 1.0, &[]), 0.1).unwrap();
        assert!(g.counts(0).iter().chain(g.counts(1)).all(|&c| c == 0));
        assert!(bin_events(&log(1, 1.0, &[]), 0.0).is_err());
        assert!(bin_events(&log(1, 1.0, &[]), -0.1).is_err());
    }

    #[test]
    fn event_at_horizon_lands_in_last_bin() {
        let g = bin_events(&log(1, 1.0, &[(1.0, 0)]), 0.1).unwrap();
        assert_eq!(g.count(0, 9), 1);
    }

    #[test]
    fn delta1_examples() {
        assert_eq!(delta1(&grid3(&[[1, 0, 0], [0, 1, 0]]), 0, 1, 0).unwrap(), 1);
        assert_eq!(
            delta1(&grid3(&[[0, 1, 0], [1, 0, 0]]), 0, 1, 0).unwrap(),
            -1
        );
        assert_eq!(delta1(&grid3(&[[2, 0, 0], [0, 1, 0]]), 0, 1, 0).unwrap(), 0);
        assert!(delta1(&grid3(&[[1, 0, 0], [0, 1, 0]]), 0, 1, 1).is_err());
        assert!(delta1(&grid3(&[[1, 0, 0], [0, 1, 0]]), 0, 2, 0).is_err());
    }

    #[test]
    fn delta2_examples() {
        assert_eq!(delta2(&grid3(&[[1, 1, 0], [0, 0, 1]]), 0, 1, 0).unwrap(), 1);
        assert_eq!(
            delta2(&grid3(&[[1, 0, 1], [0, 1, 0]]), 0, 1, 0).unwrap(),
            -2
        );
        assert_eq!(delta2(&grid3(&[[0, 1, 1], [1, 0, 0]]), 0, 1, 0).unwrap(), 1);
        assert_eq!(delta2(&grid3(&[[1, 2, 0], [0, 0, 1]]), 0, 1, 0).unwrap(), 0);
    }

    #[test]
    fn accumulate_examples() {
        let empty = bin_events(&log(2, 10.0, &[]), 0.1).unwrap();
        let s = accumulate(&empty, 0, 1).unwrap();
        assert_eq!((s.d1, s.d2, s.windows), (0, 0, 33));

        // Window 0: i then j (delta1 = +1). Window 1: i, j, i (delta2 = -2, delta1 = +1).
        // Window 2: j then i (delta1 = -1). Net D1 = 1, D2 = -2.
        let g = bin_events(
            &log(
                2,
                9.0,
                &[
                    (0.5, 0),
                    (1.5, 1),
                    (3.5, 0),
                    (4.5, 1),
                    (5.5, 0),
                    (6.5, 1),
                    (7.5, 0),
                ],
            ),
            1.0,
        )
        .unwrap();
        let s = accumulate(&g, 0, 1).unwrap();
        assert_eq!((s.d1, s.d2), (1, -2));
    }

    #[test]
    fn incomplete_trailing_window_is_dropped() {
        // T = 10, ε = 1: K = 3, bin 9 is never read.
        let g = bin_events(&log(2, 10.0, &[(9.2, 0), (9.9, 1)]), 1.0).unwrap();
        assert_eq!(g.windows(), 3);
        let s = accumulate(&g, 0, 1).unwrap();
        assert_eq!((s.d1, s.d2), (0, 0));
    }

    #[test]
    fn window_count_tolerates_rounding() {
        assert_eq!(window_count(2000.0, 0.02), 33333);
        assert_eq!(window_count(0.9, 0.1), 3);
        assert_eq!(window_count(0.3, 0.1), 1);
    }

    #[test]
    fn jitter_zero_is_identity() {
        let l = log(2, 5.0, &[(0.3, 0), (1.2, 1), (4.9, 0)]);
        assert_eq!(jitter(&l, 0.0, 1).unwrap(), l);
        let j = jitter(&l, 0.2, 1).unwrap();
        assert!(j.events().iter().all(|e| (0.0..=5.0).contains(&e.time)));
        assert!(jitter(&l, -1.0, 1).is_err());
    }

    #[test]
    fn csv_dump_layout() {
        let g = bin_events(&log(2, 3.0, &[(0.5, 0), (1.5, 1)]), 1.0).unwrap();
        let mut buf = Vec::new();
        accumulate_all(&g).write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "i,j,D1,D2,K,epsilon,T\n0,1,1,0,1,1,3\n1,0,-1,0,1,1,3\n"
        );
    }

    fn small_log() -> impl Strategy<Value = EventLog> {
        (
            2usize..5,
            proptest::collection::vec((0.0f64..6.0, 0usize..4), 0..60),
        )
            .prop_map(|(n, raw)| {
                let events = raw
                    .into_iter()
                    .map(|(time, node)| Event {
                        time,
                        node: node % n,
                    })
                    .collect();
                EventLog::new(n, 6.0, events).unwrap()
            })
    }

    proptest! {
        #[test]
        fn all_pairs_matches_single_pair(l in small_log(), eps in prop_oneof![Just(0.1), Just(0.25), Just(0.5)]) {
            let g = bin_events(&l, eps).unwrap();
            let all = accumulate_all(&g);
            for i in 0..l.n {
                for j in 0..l.n {
                    if i != j {
                        prop_assert_eq!(all.get(i, j), accumulate(&g, i, j).unwrap());
                    }
                }
            }
        }

        #[test]
        fn antisymmetry_and_bounds(l in small_log(), eps in prop_oneof![Just(0.1), Just(0.3)]) {
            let g = bin_events(&l, eps).unwrap();
            let all = accumulate_all(&g);
            for s in all.iter() {
                prop_assert_eq!(s.d1, -all.get(s.j, s.i).d1);
                prop_assert!(s.d1.unsigned_abs() as usize <= s.windows);
                prop_assert!(s.d2.unsigned_abs() as usize <= 2 * s.windows);
            }
        }

        #[test]
        fn counts_sum_to_events(l in small_log(), eps in 0.05f64..1.0) {
            let g = bin_events(&l, eps).unwrap();
            for node in 0..l.n {
                let total: u32 = g.counts(node).iter().sum();
                prop_assert_eq!(total as usize, l.count(node));
            }
        }
    }
}
