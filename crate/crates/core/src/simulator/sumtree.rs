//! Binary sum tree over nonnegative weights with `O(log n)` update and
//! weighted selection.

#[derive(Debug, Clone)]
pub struct SumTree {
    leaves: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    pub fn new(values: &[f64]) -> Self {
        let leaves = values.len().next_power_of_two().max(1);
        let mut nodes = vec![0.0; 2 * leaves];
        nodes[leaves..leaves + values.len()].copy_from_slice(values);
        for i in (1..leaves).rev() {
            nodes[i] = nodes[2 * i] + nodes[2 * i + 1];
        }
        Self { leaves, nodes }
    }

    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    pub fn get(&self, index: usize) -> f64 {
        self.nodes[self.leaves + index]
    }

    /// Sets one leaf and recomputes its ancestors from their children, so the
    /// root carries no accumulated rounding from past updates.
    pub fn set(&mut self, index: usize, value: f64) {
        let mut i = self.leaves + index;
        self.nodes[i] = value;
        while i > 1 {
            i /= 2;
            self.nodes[i] = self.nodes[2 * i] + self.nodes[2 * i + 1];
        }
    }

    /// Leaf `i` with `Σ_{k<i} w_k ≤ target < Σ_{k≤i} w_k`, for `target ∈ [0, total)`.
    ///
    /// Never returns a zero-weight leaf, even when rounding pushes `target`
    /// to the boundary.
    pub fn find(&self, mut target: f64) -> usize {
        let mut i = 1;
        while i < self.leaves {
            let left = self.nodes[2 * i];
            if target < left || self.nodes[2 * i + 1] <= 0.0 {
                i *= 2;
            } else {
                target -= left;
                i = 2 * i + 1;
            }
        }
        i - self.leaves
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn selects_by_cumulative_weight() {
        let t = SumTree::new(&[1.0, 0.0, 2.0, 3.0, 0.5]);
        assert_eq!(t.total(), 6.5);
        assert_eq!(t.find(0.0), 0);
        assert_eq!(t.find(0.999), 0);
        assert_eq!(t.find(1.0), 2);
        assert_eq!(t.find(2.999), 2);
        assert_eq!(t.find(3.0), 3);
        assert_eq!(t.find(6.2), 4);
        assert_eq!(t.find(6.5), 4);
    }

    proptest! {
        #[test]
        fn root_matches_sum_after_updates(
            init in prop::collection::vec(0.0f64..10.0, 1..40),
            updates in prop::collection::vec((0usize..40, 0.0f64..10.0), 0..60),
        ) {
            let mut v = init.clone();
            let mut t = SumTree::new(&v);
            for (i, x) in updates {
                let i = i % v.len();
                v[i] = x;
                t.set(i, x);
            }
            let s: f64 = v.iter().sum();
            prop_assert!((t.total() - s).abs() <= 1e-12 * s.max(1.0));
            for (i, &x) in v.iter().enumerate() {
                prop_assert_eq!(t.get(i), x);
            }
            if s > 0.0 {
                let mut acc = 0.0;
                for (i, &x) in v.iter().enumerate() {
                    if x > 0.0 {
                        prop_assert_eq!(t.find(acc + 0.5 * x), i);
                    }
                    acc += x;
                }
            }
        }
    }
}
