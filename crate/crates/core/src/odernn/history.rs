use serde::{Deserialize, Serialize};

/// Value substituted for `Y_{l−d}` before `d + 1` states have been seen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Padding {
    #[default]
    Zero,
    RepeatFirst,
}

/// Ring buffer of the last `t + 1` states `Y_l, Y_{l−1}, …, Y_{l−t}`.
#[derive(Clone, Debug, PartialEq)]
pub struct InputHistory {
    dim: usize,
    slots: Vec<Vec<f64>>,
    head: usize,
    len: usize,
    first: Option<Vec<f64>>,
    zero: Vec<f64>,
    padding: Padding,
}

impl InputHistory {
    pub fn new(t: usize, dim: usize, padding: Padding) -> Self {
        InputHistory {
            dim,
            slots: vec![vec![0.0; dim]; t + 1],
            head: 0,
            len: 0,
            first: None,
            zero: vec![0.0; dim],
            padding,
        }
    }

    pub fn capacity(&self) -> usize {
        self.slots.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of states pushed so far, saturating at the capacity.
    pub fn filled(&self) -> usize {
        self.len
    }

    pub fn padding(&self) -> Padding {
        self.padding
    }

    pub fn push(&mut self, y: &[f64]) {
        debug_assert_eq!(y.len(), self.dim);
        self.head = (self.head + 1) % self.slots.len();
        self.slots[self.head].copy_from_slice(y);
        if self.first.is_none() {
            self.first = Some(y.to_vec());
        }
        self.len = (self.len + 1).min(self.slots.len());
    }

    /// `Y_{l−d}`; `d` beyond what has been pushed resolves through the padding policy.
    pub fn get(&self, d: usize) -> &[f64] {
        assert!(d < self.slots.len(), "delay {d} exceeds history of {}", self.slots.len() - 1);
        if d < self.len {
            let cap = self.slots.len();
            &self.slots[(self.head + cap - d) % cap]
        } else {
            match (self.padding, &self.first) {
                (Padding::RepeatFirst, Some(f)) => f,
                _ => &self.zero,
            }
        }
    }

    pub fn latest(&self) -> &[f64] {
        self.get(0)
    }

    pub fn clear(&mut self) {
        self.len = 0;
        self.first = None;
    }
}
