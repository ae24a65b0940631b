use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NORMALIZATION_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub size: usize,
    /// Index of the designated `⋆` setting on an input axis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub star: Option<usize>,
    /// Outcome axis whose value 0 heralds a successful preparation.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub herald: bool,
}

impl Axis {
    pub fn new(name: &str, size: usize) -> Self {
        Self {
            name: name.to_string(),
            size,
            star: None,
            herald: false,
        }
    }

    pub fn with_star(mut self, star: usize) -> Self {
        self.star = Some(star);
        self
    }

    pub fn heralding(mut self) -> Self {
        self.herald = true;
        self
    }
}

/// Conditional distribution `P(outcomes | inputs)`; values are stored
/// input-major, each block row-major over its axes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTensor {
    inputs: Vec<Axis>,
    outcomes: Vec<Axis>,
    values: Vec<f64>,
}

fn count(axes: &[Axis]) -> usize {
    axes.iter().map(|a| a.size).product()
}

fn digits(mut i: usize, axes: &[Axis]) -> Vec<usize> {
    let mut out = vec![0; axes.len()];
    for k in (0..axes.len()).rev() {
        out[k] = i % axes[k].size;
        i /= axes[k].size;
    }
    out
}

fn flat(idx: &[usize], axes: &[Axis]) -> usize {
    idx.iter().zip(axes).fold(0, |acc, (&i, a)| acc * a.size + i)
}

fn find(axes: &[Axis], name: &str) -> Result<usize> {
    axes.iter()
        .position(|a| a.name == name)
        .ok_or_else(|| Error::InvalidArgument(format!("no axis `{}`", name)))
}

impl CorrelationTensor {
    pub fn new(inputs: Vec<Axis>, outcomes: Vec<Axis>, values: Vec<f64>) -> Result<Self> {
        let t = Self {
            inputs,
            outcomes,
            values,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn from_fn(inputs: Vec<Axis>, outcomes: Vec<Axis>, f: impl Fn(&[usize], &[usize]) -> f64) -> Result<Self> {
        let (ni, no) = (count(&inputs), count(&outcomes));
        let mut values = Vec::with_capacity(ni * no);
        for x in 0..ni {
            let xs = digits(x, &inputs);
            for a in 0..no {
                values.push(f(&xs, &digits(a, &outcomes)));
            }
        }
        Self::new(inputs, outcomes, values)
    }

    pub fn uniform(inputs: Vec<Axis>, outcomes: Vec<Axis>) -> Result<Self> {
        let p = 1.0 / count(&outcomes) as f64;
        Self::from_fn(inputs, outcomes, |_, _| p)
    }

    fn validate(&self) -> Result<()> {
        if self.inputs.iter().chain(&self.outcomes).any(|a| a.size == 0) {
            return Err(Error::Shape("axes must be nonempty".into()));
        }
        for a in &self.inputs {
            if a.star.is_some_and(|s| s >= a.size) {
                return Err(Error::Shape(format!("star setting out of range on `{}`", a.name)));
            }
        }
        let (ni, no) = (self.input_count(), self.outcome_count());
        if self.values.len() != ni * no {
            return Err(Error::Shape(format!("{} values for {}x{} entries", self.values.len(), ni, no)));
        }
        for x in 0..ni {
            let row = &self.values[x * no..(x + 1) * no];
            if let Some(v) = row.iter().find(|v| !v.is_finite() || **v < -NORMALIZATION_TOL) {
                return Err(Error::InvalidArgument(format!("invalid probability {}", v)));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > NORMALIZATION_TOL {
                return Err(Error::InvalidArgument(format!(
                    "distribution for inputs {:?} sums to {}",
                    digits(x, &self.inputs),
                    s
                )));
            }
        }
        Ok(())
    }

    pub fn inputs(&self) -> &[Axis] {
        &self.inputs
    }

    pub fn outcomes(&self) -> &[Axis] {
        &self.outcomes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn input_count(&self) -> usize {
        count(&self.inputs)
    }

    pub fn outcome_count(&self) -> usize {
        count(&self.outcomes)
    }

    pub fn input_axis(&self, name: &str) -> Result<usize> {
        find(&self.inputs, name)
    }

    pub fn outcome_axis(&self, name: &str) -> Result<usize> {
        find(&self.outcomes, name)
    }

    pub fn get(&self, inputs: &[usize], outcomes: &[usize]) -> f64 {
        self.values[flat(inputs, &self.inputs) * self.outcome_count() + flat(outcomes, &self.outcomes)]
    }

    /// Row of the distribution for a flat input index.
    pub fn row(&self, x: usize) -> &[f64] {
        let no = self.outcome_count();
        &self.values[x * no..(x + 1) * no]
    }

    /// Sums out every outcome axis not listed in `keep` (kept in the given order).
    pub fn marginal(&self, keep: &[&str]) -> Result<Self> {
        let pos: Vec<usize> = keep.iter().map(|n| self.outcome_axis(n)).collect::<Result<_>>()?;
        let outcomes: Vec<Axis> = pos.iter().map(|&k| self.outcomes[k].clone()).collect();
        let (ni, no, nk) = (self.input_count(), self.outcome_count(), count(&outcomes));
        let mut values = vec![0.0; ni * nk];
        for a in 0..no {
            let d = digits(a, &self.outcomes);
            let kept: Vec<usize> = pos.iter().map(|&k| d[k]).collect();
            let j = flat(&kept, &outcomes);
            for x in 0..ni {
                values[x * nk + j] += self.values[x * no + a];
            }
        }
        Self::new(self.inputs.clone(), outcomes, values)
    }

    /// Restricts an input axis to one value and drops it.
    pub fn fix_input(&self, name: &str, value: usize) -> Result<Self> {
        let k = self.input_axis(name)?;
        if value >= self.inputs[k].size {
            return Err(Error::InvalidArgument(format!("input `{}` has no value {}", name, value)));
        }
        let mut inputs = self.inputs.clone();
        inputs.remove(k);
        let no = self.outcome_count();
        let mut values = Vec::with_capacity(count(&inputs) * no);
        for x in 0..count(&inputs) {
            let mut d = digits(x, &inputs);
            d.insert(k, value);
            values.extend_from_slice(self.row(flat(&d, &self.inputs)));
        }
        Self::new(inputs, self.outcomes.clone(), values)
    }

    /// Keeps only the listed values of an input axis, in the given order.
    pub fn select_input(&self, name: &str, keep: &[usize]) -> Result<Self> {
        let k = self.input_axis(name)?;
        if keep.is_empty() || keep.iter().any(|&v| v >= self.inputs[k].size) {
            return Err(Error::InvalidArgument(format!("bad selection {:?} on `{}`", keep, name)));
        }
        let mut inputs = self.inputs.clone();
        inputs[k].size = keep.len();
        inputs[k].star = self.inputs[k].star.and_then(|s| keep.iter().position(|&v| v == s));
        let mut values = Vec::with_capacity(count(&inputs) * self.outcome_count());
        for x in 0..count(&inputs) {
            let mut d = digits(x, &inputs);
            d[k] = keep[d[k]];
            values.extend_from_slice(self.row(flat(&d, &self.inputs)));
        }
        Self::new(inputs, self.outcomes.clone(), values)
    }

    /// Renames all axes; names are given in axis order.
    pub fn with_axis_names(&self, inputs: &[&str], outcomes: &[&str]) -> Result<Self> {
        if inputs.len() != self.inputs.len() || outcomes.len() != self.outcomes.len() {
            return Err(Error::Shape("wrong number of axis names".into()));
        }
        let mut out = self.clone();
        for (a, n) in out.inputs.iter_mut().zip(inputs) {
            a.name = n.to_string();
        }
        for (a, n) in out.outcomes.iter_mut().zip(outcomes) {
            a.name = n.to_string();
        }
        Ok(out)
    }

    /// Bayes conditioning on an outcome; the axis is dropped.
    pub fn condition_outcome(&self, name: &str, value: usize) -> Result<Self> {
        let k = self.outcome_axis(name)?;
        let mut outcomes = self.outcomes.clone();
        outcomes.remove(k);
        let (no, nr) = (self.outcome_count(), count(&outcomes));
        let mut values = Vec::with_capacity(self.input_count() * nr);
        for x in 0..self.input_count() {
            let row = self.row(x);
            let mut cond = vec![0.0; nr];
            for (a, &p) in row.iter().enumerate().take(no) {
                let mut d = digits(a, &self.outcomes);
                if d[k] == value {
                    d.remove(k);
                    cond[flat(&d, &outcomes)] += p;
                }
            }
            let z: f64 = cond.iter().sum();
            if z <= 1e-15 {
                let named: Vec<String> = self
                    .inputs
                    .iter()
                    .zip(digits(x, &self.inputs))
                    .map(|(a, v)| format!("{}={}", a.name, v))
                    .collect();
                return Err(Error::ZeroHeralding(format!("{} ({}={})", named.join(", "), name, value)));
            }
            values.extend(cond.iter().map(|p| p / z));
        }
        Self::new(self.inputs.clone(), outcomes, values)
    }

    /// Probability of `outcome = value` for each flat input.
    pub fn outcome_probability(&self, name: &str, value: usize) -> Result<Vec<f64>> {
        let m = self.marginal(&[name])?;
        Ok((0..m.input_count()).map(|x| m.row(x)[value]).collect())
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        if self.inputs.len() != other.inputs.len()
            || self.outcomes.len() != other.outcomes.len()
            || self.inputs.iter().zip(&other.inputs).any(|(a, b)| a.size != b.size)
            || self.outcomes.iter().zip(&other.outcomes).any(|(a, b)| a.size != b.size)
        {
            return Err(Error::Shape("tensors have different axes".into()));
        }
        Ok(self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let t: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        t.validate()?;
        Ok(t)
    }
}

/// `P⋆`: every starred input fixed to its star and every heralding outcome
/// conditioned on 0.
pub fn condition_star(p: &CorrelationTensor) -> Result<CorrelationTensor> {
    if p.inputs().iter().all(|a| a.star.is_none()) {
        return Err(Error::InvalidArgument("no starred input axis".into()));
    }
    let mut out = p.clone();
    for a in p.inputs().iter().filter(|a| a.star.is_some()) {
        out = out.fix_input(&a.name, a.star.unwrap())?;
    }
    for a in p.outcomes().iter().filter(|a| a.herald) {
        out = out.condition_outcome(&a.name, 0)?;
    }
    Ok(out)
}
