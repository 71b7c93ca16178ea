use std::collections::VecDeque;
use std::sync::Mutex;

use crate::value::{Cell, Column, Table};

/// Bounded ring buffer of rows. One writer pushes; readers take snapshots.
/// When full, the oldest row is evicted.
#[derive(Debug)]
pub struct DataQueue {
    capacity: usize,
    columns: Vec<Column>,
    rows: Mutex<VecDeque<Vec<Cell>>>,
}

impl DataQueue {
    pub fn new(capacity: usize, columns: Vec<Column>) -> Self {
        let capacity = capacity.max(1);
        DataQueue {
            capacity,
            columns,
            rows: Mutex::new(VecDeque::with_capacity(capacity)),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    /// Appends a row; returns true when an old row was evicted.
    pub fn push(&self, row: Vec<Cell>) -> bool {
        let mut rows = self.rows.lock().unwrap();
        let evicted = rows.len() == self.capacity;
        if evicted {
            rows.pop_front();
        }
        rows.push_back(row);
        evicted
    }

    pub fn len(&self) -> usize {
        self.rows.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The most recent `min(window, len)` rows, oldest first.
    pub fn dequeue_window(&self, window: usize) -> Table {
        let rows = self.rows.lock().unwrap();
        let skip = rows.len().saturating_sub(window);
        Table {
            columns: self.columns.clone(),
            rows: rows.iter().skip(skip).cloned().collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::ColumnType;
    use proptest::prelude::*;

    fn value_queue(capacity: usize) -> DataQueue {
        DataQueue::new(
            capacity,
            vec![Column {
                name: "value".into(),
                ty: ColumnType::Number,
            }],
        )
    }

    fn values(t: &Table) -> Vec<f64> {
        t.rows.iter().map(|r| r[0].as_f64().unwrap()).collect()
    }

    #[test]
    fn empty_queue_gives_empty_table() {
        let q = value_queue(8);
        let t = q.dequeue_window(10);
        assert_eq!(t.rows.len(), 0);
        assert_eq!(t.columns.len(), 1);
    }

    #[test]
    fn overflow_keeps_latest_in_order() {
        let q = value_queue(64);
        for i in 1..=100 {
            q.push(vec![Cell::Number(i as f64)]);
        }
        let expected: Vec<f64> = (37..=100).map(|i| i as f64).collect();
        assert_eq!(values(&q.dequeue_window(64)), expected);
    }

    #[test]
    fn window_of_one_is_latest() {
        let q = value_queue(64);
        for i in 1..=5 {
            q.push(vec![Cell::Number(i as f64)]);
        }
        assert_eq!(values(&q.dequeue_window(1)), vec![5.0]);
    }

    proptest! {
        // Oracle: a plain Vec holding every push; the window is its tail.
        #[test]
        fn window_matches_tail_of_full_history(
            capacity in 1usize..40,
            pushes in 0usize..120,
            window in 0usize..60,
        ) {
            let q = value_queue(capacity);
            let mut history = Vec::new();
            for i in 0..pushes {
                q.push(vec![Cell::Number(i as f64)]);
                history.push(i as f64);
            }
            let keep = window.min(capacity).min(history.len());
            let expected = history[history.len() - keep..].to_vec();
            let got = values(&q.dequeue_window(window));
            prop_assert!(got.len() <= capacity);
            prop_assert_eq!(got, expected);
        }
    }
}
