use serde::{Deserialize, Serialize};

use super::correlation::{Axis, CorrelationTensor};
use crate::error::{Error, Result};
use crate::tensor_core::{link_product, maximally_entangled, pauli, pauli_tomographic_set, CMat, LabeledOperator, MeasurementFamily, SystemLabel, C64};

/// Signed correlator terms `(z, x, sign)` of the three-block CHSH sum.
pub const EXTENDED_CHSH_TERMS: [(usize, usize, f64); 12] = [
    (0, 0, 1.0),
    (0, 1, 1.0),
    (1, 0, 1.0),
    (1, 1, -1.0),
    (0, 2, 1.0),
    (0, 3, 1.0),
    (2, 2, -1.0),
    (2, 3, 1.0),
    (1, 4, 1.0),
    (1, 5, 1.0),
    (2, 4, -1.0),
    (2, 5, 1.0),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BellFunctional {
    pub terms: Vec<(usize, usize, f64)>,
    pub preparer_settings: usize,
    pub party_settings: usize,
    pub local_bound: f64,
    pub quantum_bound: f64,
}

impl BellFunctional {
    pub fn extended_chsh() -> Self {
        Self {
            terms: EXTENDED_CHSH_TERMS.to_vec(),
            preparer_settings: 3,
            party_settings: 6,
            local_bound: 6.0,
            quantum_bound: 6.0 * std::f64::consts::SQRT_2,
        }
    }

    /// `Σ sign · (P(c=a) - P(c≠a))` over a tensor `P(c, a | z, x)`.
    pub fn value(&self, p: &CorrelationTensor) -> Result<f64> {
        let sizes = |axes: &[Axis]| axes.iter().map(|a| a.size).collect::<Vec<_>>();
        if sizes(p.inputs()) != [self.preparer_settings, self.party_settings] || sizes(p.outcomes()) != [2, 2] {
            return Err(Error::Shape(format!(
                "expected P(c,a|z,x) with {}x{} binary settings, got inputs {:?} outcomes {:?}",
                self.preparer_settings,
                self.party_settings,
                sizes(p.inputs()),
                sizes(p.outcomes())
            )));
        }
        Ok(self
            .terms
            .iter()
            .map(|&(z, x, s)| s * (p.get(&[z, x], &[0, 0]) + p.get(&[z, x], &[1, 1]) - p.get(&[z, x], &[0, 1]) - p.get(&[z, x], &[1, 0])))
            .sum())
    }

    /// Maximum over deterministic assignments `c(z)`, `a(x)`.
    pub fn best_deterministic_value(&self) -> f64 {
        let (nz, nx) = (self.preparer_settings, self.party_settings);
        let mut best = f64::NEG_INFINITY;
        for cz in 0..1usize << nz {
            for ax in 0..1usize << nx {
                let v: f64 = self
                    .terms
                    .iter()
                    .map(|&(z, x, s)| {
                        let (c, a) = ((cz >> z) & 1, (ax >> x) & 1);
                        s * if c == a { 1.0 } else { -1.0 }
                    })
                    .sum();
                best = best.max(v);
            }
        }
        best
    }
}

pub fn extended_chsh_value(p: &CorrelationTensor) -> Result<f64> {
    BellFunctional::extended_chsh().value(p)
}

/// The six optimal party observables against Z, X, Y on `|φ+⟩`, in Choi form:
/// setting `x` outcome `a` is `((1 + (-1)^a O_x)/2)ᵀ`.
pub fn optimal_party_settings(label: SystemLabel) -> Result<MeasurementFamily> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let (z, x, y) = (pauli(0), pauli(1), pauli(2));
    let obs: [CMat; 6] = [
        (&z + &x) * C64::new(s, 0.0),
        (&z - &x) * C64::new(s, 0.0),
        (&z + &y) * C64::new(s, 0.0),
        (&z - &y) * C64::new(s, 0.0),
        (&x + &y) * C64::new(s, 0.0),
        (&x - &y) * C64::new(s, 0.0),
    ];
    let id = CMat::identity(2, 2);
    let mut elements = Vec::with_capacity(6);
    for o in &obs {
        let row = [1.0, -1.0]
            .iter()
            .map(|&sg| LabeledOperator::new(vec![label.clone()], ((&id + o * C64::new(sg, 0.0)) * C64::new(0.5, 0.0)).transpose()))
            .collect::<Result<Vec<_>>>()?;
        elements.push(row);
    }
    MeasurementFamily::new(label, elements)
}

/// Born-rule correlations `P(c, a | z, x) = (M_{c|z} ⊗ N_{a|x}) * ψ`.
pub fn bell_correlations(preparer: &MeasurementFamily, party: &MeasurementFamily, shared: &LabeledOperator) -> Result<CorrelationTensor> {
    let inputs = vec![Axis::new("z", preparer.setting_count()), Axis::new("x", party.setting_count())];
    let outcomes = vec![Axis::new("c", preparer.outcome_count()), Axis::new("a", party.outcome_count())];
    let mut values = Vec::new();
    for z in 0..preparer.setting_count() {
        for x in 0..party.setting_count() {
            for c in 0..preparer.outcome_count() {
                for a in 0..party.outcome_count() {
                    let m = preparer.element(z, c).tensor(party.element(x, a))?;
                    values.push(link_product(&m, shared)?.as_scalar().unwrap().re);
                }
            }
        }
    }
    CorrelationTensor::new(inputs, outcomes, values)
}

/// Pauli measurements against the optimal settings on `|φ+⟩`.
pub fn reference_bell_correlations() -> Result<CorrelationTensor> {
    let (c, a) = (SystemLabel::new("C'", 2), SystemLabel::new("A'", 2));
    let phi = maximally_entangled(c.clone(), a.clone())?;
    bell_correlations(&pauli_tomographic_set(1, "C'")?, &optimal_party_settings(a)?, &phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::random::random_state;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn local_bound_is_six() {
        assert_eq!(BellFunctional::extended_chsh().best_deterministic_value(), 6.0);
    }

    #[test]
    fn reference_reaches_quantum_bound() {
        let v = extended_chsh_value(&reference_bell_correlations().unwrap()).unwrap();
        assert!((v - 6.0 * std::f64::consts::SQRT_2).abs() < 1e-9, "{}", v);
    }

    #[test]
    fn uniform_is_zero() {
        let p = CorrelationTensor::uniform(vec![Axis::new("z", 3), Axis::new("x", 6)], vec![Axis::new("c", 2), Axis::new("a", 2)]).unwrap();
        assert_eq!(extended_chsh_value(&p).unwrap(), 0.0);
    }

    #[test]
    fn wrong_shape_is_rejected() {
        let p = CorrelationTensor::uniform(vec![Axis::new("z", 3), Axis::new("x", 5)], vec![Axis::new("c", 2), Axis::new("a", 2)]).unwrap();
        assert!(extended_chsh_value(&p).is_err());
    }

    fn random_projective(label: &SystemLabel, settings: usize, rng: &mut impl Rng) -> MeasurementFamily {
        let mut rows = vec![];
        for _ in 0..settings {
            let (th, ph): (f64, f64) = (rng.gen_range(0.0..std::f64::consts::PI), rng.gen_range(0.0..std::f64::consts::TAU));
            let ket = [C64::new((th / 2.0).cos(), 0.0), C64::from_polar((th / 2.0).sin(), ph)];
            let p = LabeledOperator::from_ket(vec![label.clone()], &ket).unwrap();
            let q = LabeledOperator::identity(vec![label.clone()]).unwrap().sub(&p).unwrap();
            rows.push(vec![p, q]);
        }
        MeasurementFamily::new(label.clone(), rows).unwrap()
    }

    #[test]
    fn random_quantum_realizations_respect_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (c, a) = (SystemLabel::new("C'", 2), SystemLabel::new("A'", 2));
        let bound = 6.0 * std::f64::consts::SQRT_2 + 1e-9;
        for _ in 0..1000 {
            let psi = random_state(vec![c.clone(), a.clone()], &mut rng).unwrap();
            let mc = random_projective(&c, 3, &mut rng);
            let ma = random_projective(&a, 6, &mut rng);
            let v = extended_chsh_value(&bell_correlations(&mc, &ma, &psi).unwrap()).unwrap();
            assert!(v <= bound, "{}", v);
        }
    }
}
