use std::f64::consts::PI;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::ad::Array;
use crate::losses::{TaskKind, Targets};
use crate::{Error, Result};

pub const TWO_MOONS_NOISE: f64 = 0.1;
pub const SINUSOID_NOISE: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    TwoMoons,
    Sinusoid,
}

impl Task {
    pub const ALL: [Task; 2] = [Task::TwoMoons, Task::Sinusoid];

    pub fn name(self) -> &'static str {
        match self {
            Task::TwoMoons => "two_moons",
            Task::Sinusoid => "sinusoid",
        }
    }

    pub fn input_dim(self) -> usize {
        match self {
            Task::TwoMoons => 2,
            Task::Sinusoid => 1,
        }
    }

    /// Width of the model output.
    pub fn outputs(self) -> usize {
        match self {
            Task::TwoMoons => 2,
            Task::Sinusoid => 1,
        }
    }

    pub fn loss(self) -> TaskKind {
        match self {
            Task::TwoMoons => TaskKind::CrossEntropyWithLogits,
            Task::Sinusoid => TaskKind::MeanSquaredError,
        }
    }

    pub fn default_noise(self) -> f64 {
        match self {
            Task::TwoMoons => TWO_MOONS_NOISE,
            Task::Sinusoid => SINUSOID_NOISE,
        }
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Unknown { kind: "task", name: s.to_string() })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub task: Task,
    /// `[n, task.input_dim()]`.
    pub inputs: Array,
    pub targets: Targets,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Inputs zero-padded on the right to width `d`.
    pub fn padded_inputs(&self, d: usize) -> Result<Array> {
        let (n, w) = self.inputs.dims2()?;
        if d < w {
            return Err(Error::Dimension(format!("cannot pad {w}-wide inputs to width {d}")));
        }
        let mut data = Vec::with_capacity(n * d);
        for i in 0..n {
            data.extend_from_slice(self.inputs.row(i));
            data.extend(std::iter::repeat_n(0.0, d - w));
        }
        Ok(Array::matrix(n, d, data)?)
    }
}

fn linspace_pi(n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| if n > 1 { PI * i as f64 / (n - 1) as f64 } else { 0.0 })
}

pub fn make_dataset(task: Task, n: usize, seed: u64) -> Result<Dataset> {
    make_dataset_with_noise(task, n, seed, task.default_noise())
}

/// As [`make_dataset`] with an explicit Gaussian noise level.
pub fn make_dataset_with_noise(task: Task, n: usize, seed: u64, noise: f64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::EmptyBatch("dataset size must be positive"));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::Invalid(format!("noise must be finite and non-negative, got {noise}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    match task {
        Task::TwoMoons => {
            let n_outer = n / 2;
            let n_inner = n - n_outer;
            let mut points: Vec<([f64; 2], usize)> = linspace_pi(n_outer)
                .map(|t| ([t.cos(), t.sin()], 0))
                .chain(linspace_pi(n_inner).map(|t| ([1.0 - t.cos(), 0.5 - t.sin()], 1)))
                .collect();
            points.shuffle(&mut rng);
            let mut data = Vec::with_capacity(2 * n);
            let mut labels = Vec::with_capacity(n);
            for (p, label) in points {
                for c in p {
                    data.push(c + noise * normal.sample(&mut rng));
                }
                labels.push(label);
            }
            Ok(Dataset { task, inputs: Array::matrix(n, 2, data)?, targets: Targets::Labels(labels) })
        }
        Task::Sinusoid => {
            let mut xs = Vec::with_capacity(n);
            let mut ys = Vec::with_capacity(n);
            for _ in 0..n {
                let x = rng.random_range(-PI..=PI);
                let eps = normal.sample(&mut rng);
                xs.push(x);
                ys.push(x.sin() + noise * eps);
            }
            Ok(Dataset {
                task,
                inputs: Array::matrix(n, 1, xs)?,
                targets: Targets::Values(Array::matrix(n, 1, ys)?),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moons_balanced() {
        let d = make_dataset(Task::TwoMoons, 4, 3).unwrap();
        let Targets::Labels(l) = &d.targets else { panic!() };
        assert_eq!(l.iter().filter(|&&c| c == 0).count(), 2);
        assert_eq!(l.iter().filter(|&&c| c == 1).count(), 2);
        assert_eq!(d.inputs.shape(), &[4, 2]);
    }

    #[test]
    fn noiseless_moons_on_circles() {
        let d = make_dataset_with_noise(Task::TwoMoons, 50, 1, 0.0).unwrap();
        let Targets::Labels(l) = &d.targets else { panic!() };
        for (i, &c) in l.iter().enumerate() {
            let p = d.inputs.row(i);
            let (cx, cy) = if c == 0 { (0.0, 0.0) } else { (1.0, 0.5) };
            assert!(((p[0] - cx).hypot(p[1] - cy) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn noiseless_sinusoid_exact() {
        let d = make_dataset_with_noise(Task::Sinusoid, 100, 9, 0.0).unwrap();
        let Targets::Values(y) = &d.targets else { panic!() };
        for i in 0..100 {
            let x = d.inputs.data()[i];
            assert!((-PI..=PI).contains(&x));
            assert_eq!(y.data()[i], x.sin());
        }
    }

    #[test]
    fn seeded() {
        for t in Task::ALL {
            assert_eq!(make_dataset(t, 30, 5).unwrap(), make_dataset(t, 30, 5).unwrap());
            assert_ne!(make_dataset(t, 30, 5).unwrap(), make_dataset(t, 30, 6).unwrap());
        }
    }

    #[test]
    fn errors() {
        assert!(matches!(make_dataset(Task::TwoMoons, 0, 1), Err(Error::EmptyBatch(_))));
        assert!(matches!("spirals".parse::<Task>(), Err(Error::Unknown { kind: "task", .. })));
        assert_eq!("sinusoid".parse::<Task>().unwrap(), Task::Sinusoid);
    }

    #[test]
    fn padding() {
        let d = make_dataset(Task::Sinusoid, 3, 0).unwrap();
        let p = d.padded_inputs(3).unwrap();
        assert_eq!(p.shape(), &[3, 3]);
        assert_eq!(p.row(1), &[d.inputs.data()[1], 0.0, 0.0]);
        assert!(make_dataset(Task::TwoMoons, 3, 0).unwrap().padded_inputs(1).is_err());
    }
}
