//! Static polynomial potentials `V(x) = sum_p c_p x^p`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub const MAX_DEGREE: usize = 8;

/// Polynomial potential, `coeffs[p]` multiplying `x^p`. Trailing zeros are
/// trimmed, so the zero potential has an empty coefficient list.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PolynomialPotential {
    coeffs: Vec<f64>,
}

impl PolynomialPotential {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(invalid("coeffs", "potential coefficients must be finite"));
        }
        let mut coeffs = coeffs;
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.len() > MAX_DEGREE + 1 {
            return Err(invalid(
                "coeffs",
                format!(
                    "degree {} exceeds the supported maximum {MAX_DEGREE}",
                    coeffs.len() - 1
                ),
            ));
        }
        Ok(Self { coeffs })
    }

    /// Builds from `(power, coefficient)` pairs; repeated powers add up.
    pub fn from_terms(terms: &[(usize, f64)]) -> Result<Self> {
        let degree = terms.iter().map(|t| t.0).max().unwrap_or(0);
        if degree > MAX_DEGREE {
            return Err(invalid(
                "terms",
                format!("power {degree} exceeds the supported maximum {MAX_DEGREE}"),
            ));
        }
        let mut coeffs = vec![0.0; degree + 1];
        for &(p, c) in terms {
            coeffs[p] += c;
        }
        Self::new(coeffs)
    }

    pub fn zero() -> Self {
        Self::default()
    }

    /// `c x^2`.
    pub fn harmonic(c: f64) -> Result<Self> {
        Self::new(vec![0.0, 0.0, c])
    }

    /// `c x^2 + K x^4`.
    pub fn anharmonic(c: f64, k: f64) -> Result<Self> {
        Self::new(vec![0.0, 0.0, c, 0.0, k])
    }

    /// Same polynomial as [`Self::anharmonic`]; a double well when `c < 0 < K`.
    pub fn double_well(c: f64, k: f64) -> Result<Self> {
        Self::anharmonic(c, k)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Degree of the polynomial, `None` for the zero potential.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `(power, coefficient)` pairs of the nonzero terms.
    pub fn terms(&self) -> Vec<(usize, f64)> {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0.0)
            .map(|(p, &c)| (p, c))
            .collect()
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self, order: usize) -> Self {
        if order >= self.coeffs.len() {
            return Self::zero();
        }
        let coeffs = (order..self.coeffs.len())
            .map(|p| {
                let falling: f64 = ((p - order + 1)..=p).map(|f| f as f64).product();
                falling * self.coeffs[p]
            })
            .collect();
        Self::new(coeffs).expect("derivative of a valid polynomial")
    }

    /// `V(x + eps*eta/2) - V(x - eps*eta/2)`.
    pub fn delta_v(&self, x: f64, eta: f64, epsilon: f64) -> f64 {
        let h = 0.5 * epsilon * eta;
        self.eval(x + h) - self.eval(x - h)
    }
}

/// How a potential is written in run configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    Free,
    Harmonic {
        c: f64,
    },
    Anharmonic {
        c: f64,
        k: f64,
    },
    DoubleWell {
        c: f64,
        k: f64,
    },
    /// Raw `(power, coefficient)` pairs.
    Polynomial {
        terms: Vec<(usize, f64)>,
    },
}

impl PotentialSpec {
    pub fn build(&self) -> Result<PolynomialPotential> {
        match *self {
            PotentialSpec::Free => Ok(PolynomialPotential::zero()),
            PotentialSpec::Harmonic { c } => PolynomialPotential::harmonic(c),
            PotentialSpec::Anharmonic { c, k } => PolynomialPotential::anharmonic(c, k),
            PotentialSpec::DoubleWell { c, k } => PolynomialPotential::double_well(c, k),
            PotentialSpec::Polynomial { ref terms } => PolynomialPotential::from_terms(terms),
        }
    }

    /// `(c, K)` when the potential is of the form `c x^2 + K x^4`.
    pub fn quartic_parameters(&self) -> Option<(f64, f64)> {
        match *self {
            PotentialSpec::Free => Some((0.0, 0.0)),
            PotentialSpec::Harmonic { c } => Some((c, 0.0)),
            PotentialSpec::Anharmonic { c, k } | PotentialSpec::DoubleWell { c, k } => Some((c, k)),
            PotentialSpec::Polynomial { .. } => {
                let p = self.build().ok()?;
                let only_even_quartic =
                    p.terms().iter().all(|&(power, _)| power == 2 || power == 4);
                if !only_even_quartic {
                    return None;
                }
                let c = p.coeffs().get(2).copied().unwrap_or(0.0);
                let k = p.coeffs().get(4).copied().unwrap_or(0.0);
                Some((c, k))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn derivative_examples() {
        let v = PolynomialPotential::anharmonic(0.5, 0.5).unwrap();
        assert_eq!(v.derivative(3).coeffs(), &[0.0, 12.0]);
        let h = PolynomialPotential::harmonic(0.5).unwrap();
        assert_eq!(h.derivative(1).coeffs(), &[0.0, 1.0]);
        assert!(v.derivative(5).is_zero());
        assert_eq!(v.derivative(0), v);
    }

    #[test]
    fn delta_v_examples() {
        let sq = PolynomialPotential::harmonic(1.0).unwrap();
        assert_eq!(sq.delta_v(1.0, 2.0, 1.0), 4.0);
        assert_eq!(sq.delta_v(0.7, 0.0, 0.3), 0.0);
    }

    #[test]
    fn construction_rules() {
        let p = PolynomialPotential::new(vec![1.0, 0.0, 2.0, 0.0, 0.0]).unwrap();
        assert_eq!(p.degree(), Some(2));
        assert!(PolynomialPotential::new(vec![0.0; 3]).unwrap().is_zero());
        assert!(PolynomialPotential::new(vec![1.0; 10]).is_err());
        assert!(PolynomialPotential::new(vec![f64::NAN]).is_err());
        let t = PolynomialPotential::from_terms(&[(2, 0.25), (4, 0.05), (2, 0.25)]).unwrap();
        assert_eq!(t, PolynomialPotential::anharmonic(0.5, 0.05).unwrap());
    }

    #[test]
    fn quartic_parameters_from_terms() {
        let spec = PotentialSpec::Polynomial {
            terms: vec![(2, -0.4), (4, 0.05)],
        };
        assert_eq!(spec.quartic_parameters(), Some((-0.4, 0.05)));
        let odd = PotentialSpec::Polynomial {
            terms: vec![(3, 1.0)],
        };
        assert_eq!(odd.quartic_parameters(), None);
    }

    fn poly() -> impl Strategy<Value = PolynomialPotential> {
        prop::collection::vec(-2.0f64..2.0, 1..=MAX_DEGREE + 1)
            .prop_map(|c| PolynomialPotential::new(c).unwrap())
    }

    proptest! {
        #[test]
        fn delta_v_is_odd_in_eta(p in poly(), x in -4.0f64..4.0, eta in -6.0f64..6.0, eps in 0.1f64..2.0) {
            let a = p.delta_v(x, eta, eps);
            let b = p.delta_v(x, -eta, eps);
            prop_assert!((a + b).abs() <= 1e-13);
        }

        #[test]
        fn derivative_orders_compose(p in poly(), a in 0usize..5, b in 0usize..5) {
            let lhs = p.derivative(a).derivative(b);
            let rhs = p.derivative(a + b);
            prop_assert_eq!(lhs.coeffs().len(), rhs.coeffs().len());
            for (x, y) in lhs.coeffs().iter().zip(rhs.coeffs()) {
                prop_assert!((x - y).abs() <= 1e-14 * y.abs());
            }
        }

        #[test]
        fn taylor_form_of_delta_v_terminates(p in poly(), x in -3.0f64..3.0, eta in -3.0f64..3.0, eps in 0.1f64..1.5) {
            // only odd derivatives up to the degree contribute
            let mut sum = 0.0;
            let mut order = 1;
            while order <= p.degree().unwrap_or(0) {
                let fact: f64 = (1..=order).map(|f| f as f64).product();
                sum += 2.0 * (0.5 * eps * eta).powi(order as i32) * p.derivative(order).eval(x) / fact;
                order += 2;
            }
            let direct = p.delta_v(x, eta, eps);
            prop_assert!((sum - direct).abs() <= 1e-10 * (1.0 + direct.abs()));
        }
    }
}
