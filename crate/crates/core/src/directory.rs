//! Shared federation directory: one advertised quote per agent, answering
//! r-th cheapest / r-th fastest queries.
//!
//! The real system would back this with a decentralized index; here it is an
//! in-simulator sorted index, and each query charges the modeled message
//! budget of a logarithmic lookup (`ceil(log2 n)` messages, zero when a
//! single agent is subscribed). Query messages are accounted separately from
//! the scheduling protocol's own messages.

use thiserror::Error;

use crate::economy::{ClusterId, ClusterSpec, Money};

/// Directory entry: a cluster's advertised price and capability snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quote {
    pub cluster_id: ClusterId,
    /// Grid Dollars per compute-second.
    pub price: Money,
    pub speed_mips: f64,
    pub procs: u32,
    pub bandwidth_gbps: f64,
}

impl Quote {
    pub fn from_cluster(spec: &ClusterSpec) -> Quote {
        Quote {
            cluster_id: spec.id,
            price: spec.price,
            speed_mips: spec.speed_mips,
            procs: spec.procs,
            bandwidth_gbps: spec.bandwidth_gbps,
        }
    }
}

/// Query accounting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DirectoryStats {
    pub query_count: u64,
    pub modeled_query_messages: u64,
}

#[derive(Debug, Error, PartialEq)]
pub enum DirectoryError {
    #[error("cluster {0} already holds a subscription")]
    DuplicateSubscription(ClusterId),
    #[error("cluster {0} holds no subscription")]
    NotFound(ClusterId),
}

#[derive(Debug, Default)]
pub struct Directory {
    quotes: Vec<Quote>,
    by_price: Vec<usize>,
    by_speed: Vec<usize>,
    stats: DirectoryStats,
}

impl Directory {
    pub fn new() -> Directory {
        Directory::default()
    }

    pub fn len(&self) -> usize {
        self.quotes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quotes.is_empty()
    }

    pub fn stats(&self) -> DirectoryStats {
        self.stats
    }

    pub fn subscribe(&mut self, quote: Quote) -> Result<(), DirectoryError> {
        if self.quotes.iter().any(|q| q.cluster_id == quote.cluster_id) {
            return Err(DirectoryError::DuplicateSubscription(quote.cluster_id));
        }
        self.quotes.push(quote);
        self.rebuild();
        Ok(())
    }

    pub fn unsubscribe(&mut self, cluster_id: ClusterId) -> Result<(), DirectoryError> {
        let idx = self
            .quotes
            .iter()
            .position(|q| q.cluster_id == cluster_id)
            .ok_or(DirectoryError::NotFound(cluster_id))?;
        self.quotes.remove(idx);
        self.rebuild();
        Ok(())
    }

    /// r-th quote (1-based) in ascending price order, ties by ascending id.
    pub fn kth_cheapest(&mut self, r: usize) -> Option<Quote> {
        assert!(r >= 1, "rank is 1-based");
        self.charge_query();
        self.by_price.get(r - 1).map(|&i| self.quotes[i])
    }

    /// r-th quote (1-based) in descending speed order, ties by ascending id.
    pub fn kth_fastest(&mut self, r: usize) -> Option<Quote> {
        assert!(r >= 1, "rank is 1-based");
        self.charge_query();
        self.by_speed.get(r - 1).map(|&i| self.quotes[i])
    }

    fn charge_query(&mut self) {
        self.stats.query_count += 1;
        self.stats.modeled_query_messages += ceil_log2(self.quotes.len());
    }

    fn rebuild(&mut self) {
        self.by_price = (0..self.quotes.len()).collect();
        self.by_price.sort_by(|&a, &b| {
            let (qa, qb) = (&self.quotes[a], &self.quotes[b]);
            qa.price
                .value()
                .total_cmp(&qb.price.value())
                .then(qa.cluster_id.cmp(&qb.cluster_id))
        });
        self.by_speed = (0..self.quotes.len()).collect();
        self.by_speed.sort_by(|&a, &b| {
            let (qa, qb) = (&self.quotes[a], &self.quotes[b]);
            qb.speed_mips
                .total_cmp(&qa.speed_mips)
                .then(qa.cluster_id.cmp(&qb.cluster_id))
        });
    }
}

/// ceil(log2(n)) with n = 0 or 1 mapping to 0.
fn ceil_log2(n: usize) -> u64 {
    if n <= 1 {
        0
    } else {
        u64::from(n.next_power_of_two().trailing_zeros())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quote(id: ClusterId, price: f64, speed: f64) -> Quote {
        Quote {
            cluster_id: id,
            price: Money::new(price),
            speed_mips: speed,
            procs: 64,
            bandwidth_gbps: 1.0,
        }
    }

    /// The eight-cluster roster's published quotes and speeds.
    fn full_roster() -> Vec<Quote> {
        vec![
            quote(1, 4.84, 850.0),
            quote(2, 5.12, 900.0),
            quote(3, 3.98, 700.0),
            quote(4, 3.59, 630.0),
            quote(5, 5.3, 930.0),
            quote(6, 4.04, 710.0),
            quote(7, 4.16, 730.0),
            quote(8, 5.24, 920.0),
        ]
    }

    fn directory_with(quotes: Vec<Quote>) -> Directory {
        let mut d = Directory::new();
        for q in quotes {
            d.subscribe(q).unwrap();
        }
        d
    }

    #[test]
    fn subscribes_the_full_roster() {
        let d = directory_with(full_roster());
        assert_eq!(d.len(), 8);
    }

    #[test]
    fn duplicate_subscription_is_rejected() {
        let mut d = directory_with(full_roster());
        assert_eq!(
            d.subscribe(quote(3, 1.0, 1.0)),
            Err(DirectoryError::DuplicateSubscription(3))
        );
        assert_eq!(d.len(), 8);
    }

    #[test]
    fn cheapest_ranking_matches_roster() {
        let mut d = directory_with(full_roster());
        assert_eq!(d.kth_cheapest(1).unwrap().cluster_id, 4); // 3.59
        assert_eq!(d.kth_cheapest(2).unwrap().cluster_id, 3); // 3.98
        assert_eq!(d.kth_cheapest(9), None);
    }

    #[test]
    fn fastest_ranking_matches_roster() {
        let mut d = directory_with(full_roster());
        assert_eq!(d.kth_fastest(1).unwrap().cluster_id, 5); // 930
        assert_eq!(d.kth_fastest(2).unwrap().cluster_id, 8); // 920
        let mut single = directory_with(vec![quote(7, 1.0, 1.0)]);
        assert_eq!(single.kth_fastest(1).unwrap().cluster_id, 7);
    }

    #[test]
    fn unsubscribe_removes_from_both_orderings() {
        let mut d = directory_with(full_roster());
        d.unsubscribe(4).unwrap();
        assert_eq!(d.kth_cheapest(1).unwrap().cluster_id, 3);
        assert_eq!(d.len(), 7);
        assert_eq!(d.unsubscribe(4), Err(DirectoryError::NotFound(4)));
        for id in [1, 2, 3, 5, 6, 7, 8] {
            d.unsubscribe(id).unwrap();
        }
        assert_eq!(d.kth_cheapest(1), None);
    }

    #[test]
    fn subscribe_then_unsubscribe_leaves_size_unchanged() {
        let mut d = directory_with(full_roster());
        d.subscribe(quote(99, 1.0, 1.0)).unwrap();
        d.unsubscribe(99).unwrap();
        assert_eq!(d.len(), 8);
    }

    #[test]
    fn ties_break_by_cluster_id_and_are_stable() {
        let mut d = directory_with(vec![
            quote(20, 2.0, 500.0),
            quote(10, 2.0, 500.0),
            quote(30, 2.0, 500.0),
        ]);
        for _ in 0..3 {
            assert_eq!(d.kth_cheapest(1).unwrap().cluster_id, 10);
            assert_eq!(d.kth_cheapest(2).unwrap().cluster_id, 20);
            assert_eq!(d.kth_fastest(3).unwrap().cluster_id, 30);
        }
    }

    #[test]
    fn query_messages_follow_the_log_model() {
        let mut d = directory_with(vec![quote(1, 1.0, 1.0)]);
        d.kth_cheapest(1);
        assert_eq!(
            d.stats(),
            DirectoryStats {
                query_count: 1,
                modeled_query_messages: 0
            }
        );
        let mut d8 = directory_with(full_roster());
        d8.kth_cheapest(1);
        d8.kth_fastest(3);
        assert_eq!(d8.stats().modeled_query_messages, 6); // two queries, 3 each
        d8.subscribe(quote(9, 9.0, 9.0)).unwrap();
        d8.kth_cheapest(1); // nine entries: ceil(log2 9) = 4
        assert_eq!(d8.stats().modeled_query_messages, 10);
    }

    #[test]
    fn ceil_log2_closed_form() {
        let expected = [(0, 0), (1, 0), (2, 1), (3, 2), (4, 2), (8, 3), (9, 4), (50, 6)];
        for (n, want) in expected {
            assert_eq!(ceil_log2(n), want, "n = {n}");
        }
    }

    proptest::proptest! {
        #[test]
        fn rankings_enumerate_the_whole_quote_set(
            prices in proptest::collection::vec(0.5f64..10.0, 1..20),
        ) {
            let quotes: Vec<Quote> = prices
                .iter()
                .enumerate()
                .map(|(i, &p)| quote(i as ClusterId, p, p * 100.0))
                .collect();
            let mut d = directory_with(quotes.clone());
            let n = quotes.len();
            let mut cheap_ids: Vec<ClusterId> =
                (1..=n).map(|r| d.kth_cheapest(r).unwrap().cluster_id).collect();
            let mut fast_ids: Vec<ClusterId> =
                (1..=n).map(|r| d.kth_fastest(r).unwrap().cluster_id).collect();
            // Each ranking is a permutation of the subscribed set.
            let mut all: Vec<ClusterId> = quotes.iter().map(|q| q.cluster_id).collect();
            all.sort_unstable();
            cheap_ids.sort_unstable();
            fast_ids.sort_unstable();
            proptest::prop_assert_eq!(&cheap_ids, &all);
            proptest::prop_assert_eq!(&fast_ids, &all);
            // And the orderings are monotone.
            for r in 1..n {
                let a = d.kth_cheapest(r).unwrap();
                let b = d.kth_cheapest(r + 1).unwrap();
                proptest::prop_assert!(a.price.value() <= b.price.value());
                let fa = d.kth_fastest(r).unwrap();
                let fb = d.kth_fastest(r + 1).unwrap();
                proptest::prop_assert!(fa.speed_mips >= fb.speed_mips);
            }
        }
    }
}
