use serde::{Deserialize, Serialize};

use super::correlation::CorrelationTensor;
use crate::error::{Error, Result};

pub const DRF_CLASSICAL_BOUND: f64 = 1.75;

pub const DRF_INPUT_CONVENTION: &str = "inputs not fixed by a term's conditioning are averaged uniformly";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrfReport {
    pub value: f64,
    pub terms: [f64; 3],
    pub classical_bound: f64,
    pub input_convention: String,
}

impl DrfReport {
    pub fn violates(&self) -> bool {
        self.value > self.classical_bound
    }
}

/// `P(e=0, b=z | t=0) + P(e=1, a=w | t=0) + P(f⊕e = v·t | z=w=0)` on a
/// binary tensor with outcome axes `e, a, b, f` and input axes `t, z, w, v`.
pub fn drf_value(p: &CorrelationTensor) -> Result<DrfReport> {
    let outs = ["e", "a", "b", "f"].map(|n| p.outcome_axis(n));
    let ins = ["t", "z", "w", "v"].map(|n| p.input_axis(n));
    let outs: Vec<usize> = outs.into_iter().collect::<Result<_>>()?;
    let ins: Vec<usize> = ins.into_iter().collect::<Result<_>>()?;
    if outs.iter().map(|&k| &p.outcomes()[k]).chain(ins.iter().map(|&k| &p.inputs()[k])).any(|a| a.size != 2) {
        return Err(Error::Shape("DRF axes must be binary".into()));
    }
    if p.inputs().len() != 4 {
        return Err(Error::Shape("DRF tensor must have exactly the inputs t, z, w, v".into()));
    }
    let m = p.marginal(&["e", "a", "b", "f"])?;
    let mut terms = [0.0; 3];
    let mut xs = vec![0; 4];
    for t in 0..2 {
        for z in 0..2 {
            for w in 0..2 {
                for v in 0..2 {
                    xs[ins[0]] = t;
                    xs[ins[1]] = z;
                    xs[ins[2]] = w;
                    xs[ins[3]] = v;
                    for e in 0..2 {
                        for a in 0..2 {
                            for b in 0..2 {
                                for f in 0..2 {
                                    let pr = m.get(&xs, &[e, a, b, f]);
                                    if t == 0 && e == 0 && b == z {
                                        terms[0] += pr / 8.0;
                                    }
                                    if t == 0 && e == 1 && a == w {
                                        terms[1] += pr / 8.0;
                                    }
                                    if z == 0 && w == 0 && (f ^ e) == v * t {
                                        terms[2] += pr / 4.0;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(DrfReport {
        value: terms.iter().sum(),
        terms,
        classical_bound: DRF_CLASSICAL_BOUND,
        input_convention: DRF_INPUT_CONVENTION.to_string(),
    })
}
