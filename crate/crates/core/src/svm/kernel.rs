use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Kernel family for the dual classifier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    Linear,
    /// `(<x, y> + offset)^degree`
    Polynomial {
        degree: u32,
        offset: f64,
    },
    /// `tanh(<x, y> + theta)`; not positive semi-definite in general.
    Sigmoid {
        theta: f64,
    },
    /// `exp(-|x - y|^2 / (2 delta^2))`
    Rbf {
        delta: f64,
    },
    /// `sum_k exp(-sigma (x_k - y_k)^2)^degree`
    Anova {
        sigma: f64,
        degree: u32,
    },
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec::Polynomial { degree: 2, offset: 1.0 }
    }
}

#[inline]
fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            KernelSpec::Linear => true,
            KernelSpec::Polynomial { degree, offset } => degree >= 1 && offset.is_finite(),
            KernelSpec::Sigmoid { theta } => theta.is_finite(),
            KernelSpec::Rbf { delta } => delta > 0.0 && delta.is_finite(),
            KernelSpec::Anova { sigma, degree } => sigma > 0.0 && sigma.is_finite() && degree >= 1,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid kernel parameters: {self}")))
        }
    }

    /// Kernel value for equal-length inputs. Callers guarantee the lengths.
    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            KernelSpec::Linear => dot(x, y),
            KernelSpec::Polynomial { degree, offset } => (dot(x, y) + offset).powi(degree as i32),
            KernelSpec::Sigmoid { theta } => (dot(x, y) + theta).tanh(),
            KernelSpec::Rbf { delta } => {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2 / (2.0 * delta * delta)).exp()
            }
            KernelSpec::Anova { sigma, degree } => {
                x.iter().zip(y).map(|(a, b)| (-sigma * (a - b) * (a - b)).exp().powi(degree as i32)).sum()
            }
        }
    }

    /// Whether Gram matrices of this kernel are positive semi-definite for
    /// every input set.
    pub fn is_positive_definite(&self) -> bool {
        !matches!(self, KernelSpec::Sigmoid { .. })
    }

    /// Short family name used in reports.
    pub fn family(&self) -> &'static str {
        match self {
            KernelSpec::Linear => "linear",
            KernelSpec::Polynomial { .. } => "polynomial",
            KernelSpec::Sigmoid { .. } => "sigmoid",
            KernelSpec::Rbf { .. } => "rbf",
            KernelSpec::Anova { .. } => "anova",
        }
    }
}

pub fn kernel_eval(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Domain(format!("kernel inputs have dimensions {} and {}", x.len(), y.len())));
    }
    Ok(spec.eval_unchecked(x, y))
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Linear => write!(f, "linear"),
            KernelSpec::Polynomial { degree, offset } => write!(f, "polynomial:{degree}:{offset}"),
            KernelSpec::Sigmoid { theta } => write!(f, "sigmoid:{theta}"),
            KernelSpec::Rbf { delta } => write!(f, "rbf:{delta}"),
            KernelSpec::Anova { sigma, degree } => write!(f, "anova:{sigma}:{degree}"),
        }
    }
}

impl serde::Serialize for KernelSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for KernelSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Parses the `Display` form: `linear`, `polynomial[:degree[:offset]]`,
/// `sigmoid[:theta]`, `rbf[:delta]`, `anova[:sigma[:degree]]`.
impl FromStr for KernelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.trim().split(':');
        let family = parts.next().unwrap_or_default().to_ascii_lowercase();
        let params: Vec<&str> = parts.collect();
        let bad = || Error::Usage(format!("cannot parse kernel `{s}`"));
        let real = |i: usize, default: f64| -> Result<f64> {
            params.get(i).map_or(Ok(default), |p| p.parse().map_err(|_| bad()))
        };
        let int = |i: usize, default: u32| -> Result<u32> {
            params.get(i).map_or(Ok(default), |p| p.parse().map_err(|_| bad()))
        };
        let (spec, max_params) = match family.as_str() {
            "linear" => (KernelSpec::Linear, 0),
            "polynomial" | "poly" => (KernelSpec::Polynomial { degree: int(0, 2)?, offset: real(1, 1.0)? }, 2),
            "sigmoid" | "mlp" => (KernelSpec::Sigmoid { theta: real(0, -1.0)? }, 1),
            "rbf" | "gaussian" => (KernelSpec::Rbf { delta: real(0, 1.0)? }, 1),
            "anova" => (KernelSpec::Anova { sigma: real(0, 1.0)?, degree: int(1, 1)? }, 2),
            _ => return Err(bad()),
        };
        if params.len() > max_params {
            return Err(bad());
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    const POLY: KernelSpec = KernelSpec::Polynomial { degree: 2, offset: 1.0 };

    #[test]
    fn polynomial_values() {
        assert_eq!(kernel_eval(&POLY, &[1.0, 0.0], &[1.0, 1.0]).unwrap(), 4.0);
        assert_eq!(kernel_eval(&POLY, &[0.0, 0.0], &[0.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn rbf_at_zero_distance_is_one() {
        for delta in [0.1, 1.0, 7.5] {
            assert_eq!(kernel_eval(&KernelSpec::Rbf { delta }, &[0.3, -2.0], &[0.3, -2.0]).unwrap(), 1.0);
        }
    }

    #[test]
    fn other_formulas() {
        let x = [1.0, 2.0];
        let y = [0.5, -1.0];
        assert_eq!(kernel_eval(&KernelSpec::Linear, &x, &y).unwrap(), -1.5);
        assert_eq!(kernel_eval(&KernelSpec::Sigmoid { theta: 0.5 }, &x, &y).unwrap(), (-1.0f64).tanh());
        let rbf = kernel_eval(&KernelSpec::Rbf { delta: 2.0 }, &x, &y).unwrap();
        assert!((rbf - (-9.25f64 / 8.0).exp()).abs() < 1e-15);
        let anova = kernel_eval(&KernelSpec::Anova { sigma: 0.5, degree: 2 }, &x, &y).unwrap();
        assert!((anova - ((-0.25f64).exp() + (-9.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(kernel_eval(&KernelSpec::Linear, &[1.0], &[1.0, 2.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn parse_display_round_trip() {
        for spec in [
            KernelSpec::Linear,
            POLY,
            KernelSpec::Polynomial { degree: 3, offset: 0.25 },
            KernelSpec::Sigmoid { theta: -1.0 },
            KernelSpec::Rbf { delta: 0.7 },
            KernelSpec::Anova { sigma: 0.1, degree: 3 },
        ] {
            assert_eq!(spec.to_string().parse::<KernelSpec>().unwrap(), spec);
        }
        assert_eq!("poly".parse::<KernelSpec>().unwrap(), POLY);
        assert!("rbf:-1".parse::<KernelSpec>().is_err());
        assert!("polynomial:0".parse::<KernelSpec>().is_err());
        assert!("cubic".parse::<KernelSpec>().is_err());
    }

    fn any_kernel() -> impl Strategy<Value = KernelSpec> {
        prop_oneof![
            Just(KernelSpec::Linear),
            (1u32..5, -1.0f64..2.0).prop_map(|(degree, offset)| KernelSpec::Polynomial { degree, offset }),
            (-2.0f64..2.0).prop_map(|theta| KernelSpec::Sigmoid { theta }),
            (0.1f64..5.0).prop_map(|delta| KernelSpec::Rbf { delta }),
            (0.1f64..2.0, 1u32..4).prop_map(|(sigma, degree)| KernelSpec::Anova { sigma, degree }),
        ]
    }

    proptest! {
        #[test]
        fn kernels_are_symmetric(spec in any_kernel(), xy in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 1..6)) {
            let (x, y): (Vec<f64>, Vec<f64>) = xy.into_iter().unzip();
            let a = kernel_eval(&spec, &x, &y).unwrap();
            let b = kernel_eval(&spec, &y, &x).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }
}
