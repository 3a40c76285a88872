use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::random::rng_from_seed;

/// Inputs with per-position targets; masked positions do not enter the loss.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sequence {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
    pub mask: Vec<bool>,
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn active(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Positions `start..end`, with the first `warmup` of them masked out.
    fn window(&self, start: usize, end: usize, warmup: usize) -> Sequence {
        let mut mask = self.mask[start..end].to_vec();
        mask.iter_mut().take(warmup).for_each(|m| *m = false);
        Sequence {
            inputs: self.inputs[start..end].to_vec(),
            targets: self.targets[start..end].to_vec(),
            mask,
        }
    }
}

/// Mean squared error over unmasked positions and components.
pub fn masked_mse(predictions: &[Vec<f64>], seq: &Sequence) -> Result<f64> {
    if predictions.len() != seq.len() {
        return Err(Error::dims("predictions", seq.len(), predictions.len()));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for ((p, t), &m) in predictions.iter().zip(&seq.targets).zip(&seq.mask) {
        if !m {
            continue;
        }
        if p.len() != t.len() {
            return Err(Error::dims("prediction dim", t.len(), p.len()));
        }
        sum += p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        count += t.len();
    }
    if count == 0 {
        return Err(Error::InvalidConfig("sequence has no unmasked targets".into()));
    }
    Ok(sum / count as f64)
}

/// Loss of the best constant predictor (the mean unmasked target).
pub fn constant_baseline(seq: &Sequence) -> Result<f64> {
    let active: Vec<&Vec<f64>> = seq.targets.iter().zip(&seq.mask).filter(|(_, &m)| m).map(|(t, _)| t).collect();
    let Some(first) = active.first() else {
        return Err(Error::InvalidConfig("sequence has no unmasked targets".into()));
    };
    let mut mean = vec![0.0; first.len()];
    for t in &active {
        for (m, v) in mean.iter_mut().zip(t.iter()) {
            *m += v / active.len() as f64;
        }
    }
    masked_mse(&vec![mean; seq.len()], seq)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskKind {
    /// One-hot symbols; the prediction after input `i` should be input `i + 1 − lag`.
    DelayedCopy { lag: usize, alphabet: usize },
    /// `x'' + 2ζω·x' + ω²·x = 0` sampled every `dt`; the state `(x, x')` predicts the next one.
    DampedOscillator { omega: f64, zeta: f64, dt: f64 },
    /// `sin(2πk/period + φ)` with a seeded phase; each value predicts the next.
    SinePrediction { period: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Task {
    #[serde(flatten)]
    pub kind: TaskKind,
    pub length: usize,
    #[serde(default = "default_split")]
    pub train_fraction: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_split() -> f64 {
    0.75
}

impl Task {
    pub fn dim(&self) -> usize {
        match self.kind {
            TaskKind::DelayedCopy { alphabet, .. } => alphabet,
            TaskKind::DampedOscillator { .. } => 2,
            TaskKind::SinePrediction { .. } => 1,
        }
    }

    /// Number of leading positions whose target is not determined by the sequence.
    pub fn warmup(&self) -> usize {
        match self.kind {
            TaskKind::DelayedCopy { lag, .. } => lag - 1,
            _ => 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            TaskKind::DelayedCopy { lag, alphabet } if lag == 0 || alphabet < 2 => {
                return Err(Error::InvalidConfig("delayed_copy needs lag >= 1 and alphabet >= 2".into()))
            }
            TaskKind::DampedOscillator { omega, zeta, dt } if !(omega > 0.0 && zeta >= 0.0 && dt > 0.0) => {
                return Err(Error::InvalidConfig("damped_oscillator needs omega > 0, zeta >= 0, dt > 0".into()))
            }
            TaskKind::SinePrediction { period } if period <= 0.0 => {
                return Err(Error::InvalidConfig("sine_prediction needs period > 0".into()))
            }
            _ => {}
        }
        if !(0.0..1.0).contains(&self.train_fraction) || self.train_fraction == 0.0 {
            return Err(Error::InvalidConfig("train_fraction must lie in (0, 1)".into()));
        }
        if self.length < 2 * (self.warmup() + 1) {
            return Err(Error::InvalidConfig("sequence too short for the split".into()));
        }
        Ok(())
    }

    /// The full generated sequence.
    pub fn sequence(&self) -> Result<Sequence> {
        self.validate()?;
        let mut rng = rng_from_seed(self.seed);
        Ok(match self.kind {
            TaskKind::DelayedCopy { lag, alphabet } => {
                let symbols: Vec<usize> = (0..self.length).map(|_| rng.random_range(0..alphabet)).collect();
                delayed_copy_sequence(&symbols, alphabet, lag)
            }
            TaskKind::DampedOscillator { omega, zeta, dt } => {
                let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                let mut state = [angle.cos(), omega * angle.sin()];
                let mut states = Vec::with_capacity(self.length + 1);
                for _ in 0..=self.length {
                    states.push(state.to_vec());
                    state = oscillator_advance(state, omega, zeta, dt);
                }
                next_value_sequence(states)
            }
            TaskKind::SinePrediction { period } => {
                let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                let values = (0..=self.length)
                    .map(|k| vec![(std::f64::consts::TAU * k as f64 / period + phase).sin()])
                    .collect();
                next_value_sequence(values)
            }
        })
    }

    /// Contiguous train/test split; the test part starts `warmup` positions
    /// early so its first unmasked target has full context.
    pub fn generate(&self) -> Result<TaskData> {
        let seq = self.sequence()?;
        let w = self.warmup();
        let cut = ((self.length as f64 * self.train_fraction) as usize).clamp(w + 1, self.length - 1);
        Ok(TaskData {
            train: seq.window(0, cut, 0),
            test: seq.window(cut - w, self.length, w),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskData {
    pub train: Sequence,
    pub test: Sequence,
}

pub fn one_hot(symbol: usize, alphabet: usize) -> Vec<f64> {
    let mut v = vec![0.0; alphabet];
    v[symbol] = 1.0;
    v
}

/// Target after input `i` is input `i + 1 − lag`; the first `lag − 1`
/// positions are masked.
pub fn delayed_copy_sequence(symbols: &[usize], alphabet: usize, lag: usize) -> Sequence {
    let inputs: Vec<Vec<f64>> = symbols.iter().map(|&s| one_hot(s, alphabet)).collect();
    let targets = (0..inputs.len())
        .map(|i| {
            if i + 1 >= lag {
                inputs[i + 1 - lag].clone()
            } else {
                vec![0.0; alphabet]
            }
        })
        .collect();
    let mask = (0..inputs.len()).map(|i| i + 1 >= lag).collect();
    Sequence { inputs, targets, mask }
}

fn next_value_sequence(values: Vec<Vec<f64>>) -> Sequence {
    let n = values.len() - 1;
    Sequence {
        inputs: values[..n].to_vec(),
        targets: values[1..].to_vec(),
        mask: vec![true; n],
    }
}

/// One `dt` of the damped oscillator by 16 classical RK4 substeps.
fn oscillator_advance(state: [f64; 2], omega: f64, zeta: f64, dt: f64) -> [f64; 2] {
    let f = |s: [f64; 2]| [s[1], -2.0 * zeta * omega * s[1] - omega * omega * s[0]];
    let h = dt / 16.0;
    let mut s = state;
    for _ in 0..16 {
        let k1 = f(s);
        let k2 = f([s[0] + 0.5 * h * k1[0], s[1] + 0.5 * h * k1[1]]);
        let k3 = f([s[0] + 0.5 * h * k2[0], s[1] + 0.5 * h * k2[1]]);
        let k4 = f([s[0] + h * k3[0], s[1] + h * k3[1]]);
        for i in 0..2 {
            s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    s
}

/// Cyclic de Bruijn sequence `B(k, n)`: every length-`n` word over `k`
/// symbols occurs exactly once as a cyclic window.
pub fn de_bruijn(k: usize, n: usize) -> Vec<usize> {
    fn rec(t: usize, p: usize, k: usize, n: usize, a: &mut [usize], out: &mut Vec<usize>) {
        if t > n {
            if n % p == 0 {
                out.extend_from_slice(&a[1..=p]);
            }
        } else {
            a[t] = a[t - p];
            rec(t + 1, p, k, n, a, out);
            for j in a[t - p] + 1..k {
                a[t] = j;
                rec(t + 1, t, k, n, a, out);
            }
        }
    }
    let mut a = vec![0; n + 1];
    let mut out = Vec::with_capacity(k.pow(n as u32));
    rec(1, 1, k, n, &mut a, &mut out);
    out
}

/// Delayed-copy evaluation over all `alphabet^lag` windows of the cyclic de
/// Bruijn sequence, preceded by `context` symbols of cyclic history (at least
/// `lag − 1`). Exactly the `alphabet^lag` positions with full windows are unmasked.
pub fn de_bruijn_eval_sequence(alphabet: usize, lag: usize, context: usize) -> Sequence {
    let db = de_bruijn(alphabet, lag);
    let m = db.len();
    let context = context.max(lag - 1);
    let symbols: Vec<usize> = (0..context + m).map(|i| db[(i + m * context - context) % m]).collect();
    let mut seq = delayed_copy_sequence(&symbols, alphabet, lag);
    seq.mask.iter_mut().take(context).for_each(|v| *v = false);
    seq
}

/// `(1 − 1/A)/A`: the constant-predictor loss on one-hot targets with
/// uniform symbol frequencies.
pub fn uniform_one_hot_baseline(alphabet: usize) -> f64 {
    let a = alphabet as f64;
    (1.0 - 1.0 / a) / a
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn delayed_copy_targets() {
        let task = Task {
            kind: TaskKind::DelayedCopy { lag: 3, alphabet: 4 },
            length: 40,
            train_fraction: 0.75,
            seed: 9,
        };
        let seq = task.sequence().unwrap();
        for i in 0..seq.len() {
            assert_eq!(seq.mask[i], i >= 2);
            if seq.mask[i] {
                assert_eq!(seq.targets[i], seq.inputs[i - 2]);
            }
        }
        assert_eq!(task.sequence().unwrap(), seq);
        let data = task.generate().unwrap();
        assert_eq!(data.train.len(), 30);
        assert_eq!(data.test.len(), 12);
        assert_eq!(data.test.active(), 10);
        assert_eq!(data.test.targets[2], data.test.inputs[0]);
    }

    #[test]
    fn de_bruijn_windows_are_distinct() {
        for (k, n) in [(2, 3), (2, 4), (3, 2), (3, 3)] {
            let db = de_bruijn(k, n);
            assert_eq!(db.len(), k.pow(n as u32));
            let words: HashSet<Vec<usize>> = (0..db.len()).map(|i| (0..n).map(|j| db[(i + j) % db.len()]).collect()).collect();
            assert_eq!(words.len(), db.len());
        }
        assert_eq!(de_bruijn(2, 3), vec![0, 0, 0, 1, 0, 1, 1, 1]);
    }

    #[test]
    fn de_bruijn_baseline_is_exact() {
        for (a, lag) in [(2, 4), (3, 2)] {
            let seq = de_bruijn_eval_sequence(a, lag, lag + 1);
            assert_eq!(seq.active(), a.pow(lag as u32));
            let b = constant_baseline(&seq).unwrap();
            assert!((b - uniform_one_hot_baseline(a)).abs() <= 1e-15);
            // Every unmasked target is the input lag − 1 positions back.
            for i in 0..seq.len() {
                if seq.mask[i] {
                    assert_eq!(seq.targets[i], seq.inputs[i + 1 - lag]);
                }
            }
        }
    }

    #[test]
    fn oscillator_decays_and_sine_is_periodic() {
        let osc = Task {
            kind: TaskKind::DampedOscillator {
                omega: 2.0,
                zeta: 0.1,
                dt: 0.1,
            },
            length: 200,
            train_fraction: 0.5,
            seed: 1,
        };
        let seq = osc.sequence().unwrap();
        let energy = |s: &[f64]| 4.0 * s[0] * s[0] + s[1] * s[1];
        assert!(energy(&seq.inputs[199]) < energy(&seq.inputs[0]));
        // Closed form of the underdamped solution from the same start.
        let (w, z) = (2.0f64, 0.1f64);
        let wd = w * (1.0 - z * z).sqrt();
        let (x0, v0) = (seq.inputs[0][0], seq.inputs[0][1]);
        let t = 5.0;
        let exact = (-z * w * t).exp() * (x0 * (wd * t).cos() + (v0 + z * w * x0) / wd * (wd * t).sin());
        assert!((seq.inputs[50][0] - exact).abs() <= 1e-9);

        let sine = Task {
            kind: TaskKind::SinePrediction { period: 8.0 },
            length: 32,
            train_fraction: 0.5,
            seed: 2,
        };
        let s = sine.sequence().unwrap();
        assert!((s.inputs[0][0] - s.inputs[8][0]).abs() < 1e-12);
        assert_eq!(s.targets[3], s.inputs[4]);
    }

    #[test]
    fn baseline_and_masking() {
        let seq = Sequence {
            inputs: vec![vec![0.0]; 3],
            targets: vec![vec![1.0], vec![3.0], vec![100.0]],
            mask: vec![true, true, false],
        };
        assert_eq!(constant_baseline(&seq).unwrap(), 1.0);
        assert_eq!(masked_mse(&[vec![1.0], vec![1.0], vec![0.0]], &seq).unwrap(), 2.0);
        let bad = Task {
            kind: TaskKind::DelayedCopy { lag: 0, alphabet: 2 },
            length: 10,
            train_fraction: 0.5,
            seed: 0,
        };
        assert!(matches!(bad.validate(), Err(Error::InvalidConfig(_))));
    }
}
