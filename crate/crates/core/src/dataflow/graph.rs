use std::cmp::Ordering;
use std::collections::{BTreeSet, HashSet, VecDeque};
use std::hash::Hash;

/// Numeric-aware id order: shorter ids first, then lexicographic, so `n2`
/// sorts before `n10` for server-minted ids.
pub fn id_cmp(a: &str, b: &str) -> Ordering {
    a.len().cmp(&b.len()).then_with(|| a.cmp(b))
}

/// Whether `goal` is reachable from `start` (a node reaches itself).
pub fn reaches<T, I>(start: &T, goal: &T, mut successors: impl FnMut(&T) -> I) -> bool
where
    T: Clone + Eq + Hash,
    I: IntoIterator<Item = T>,
{
    if start == goal {
        return true;
    }
    let mut seen = HashSet::new();
    let mut queue = VecDeque::from([start.clone()]);
    seen.insert(start.clone());
    while let Some(n) = queue.pop_front() {
        for next in successors(&n) {
            if next == *goal {
                return true;
            }
            if seen.insert(next.clone()) {
                queue.push_back(next);
            }
        }
    }
    false
}

/// `start` plus everything reachable from it.
pub fn closure<T, I>(start: &T, mut successors: impl FnMut(&T) -> I) -> BTreeSet<T>
where
    T: Clone + Ord,
    I: IntoIterator<Item = T>,
{
    let mut seen = BTreeSet::from([start.clone()]);
    let mut stack = vec![start.clone()];
    while let Some(n) = stack.pop() {
        for next in successors(&n) {
            if seen.insert(next.clone()) {
                stack.push(next);
            }
        }
    }
    seen
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numeric_aware_order() {
        let mut ids = vec!["n10", "n2", "n1", "n11"];
        ids.sort_by(|a, b| id_cmp(a, b));
        assert_eq!(ids, vec!["n1", "n2", "n10", "n11"]);
    }

    #[test]
    fn reachability_on_a_chain() {
        let next = |n: &u32| if *n < 5 { vec![n + 1] } else { vec![] };
        assert!(reaches(&1, &5, next));
        assert!(!reaches(&5, &1, next));
        assert!(reaches(&3, &3, next));
        assert_eq!(closure(&3, next), BTreeSet::from([3, 4, 5]));
    }
}
