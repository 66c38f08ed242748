use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelFamily {
    #[serde(rename = "power-exponential")]
    PowerExponential,
    #[serde(rename = "matern-1/2")]
    Matern12,
    #[serde(rename = "matern-3/2")]
    Matern32,
    #[serde(rename = "matern-5/2")]
    Matern52,
}

/// Stationary kernel `amplitude * g(r)` with the weighted squared distance
/// `r^2 = sum_i inv_sq_lengthscales[i] * (x_i - x'_i)^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub amplitude: f64,
    pub inv_sq_lengthscales: Vec<f64>,
}

const SQRT3: f64 = 1.732_050_807_568_877_2;
const SQRT5: f64 = 2.236_067_977_499_79;

impl KernelSpec {
    pub fn new(family: KernelFamily, amplitude: f64, inv_sq_lengthscales: Vec<f64>) -> Result<Self> {
        let spec = Self { family, amplitude, inv_sq_lengthscales };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(Error::invalid(format!("kernel amplitude must be > 0, got {}", self.amplitude)));
        }
        if self.inv_sq_lengthscales.is_empty() {
            return Err(Error::invalid("kernel needs at least one inverse squared lengthscale"));
        }
        if let Some(a) = self.inv_sq_lengthscales.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
            return Err(Error::invalid(format!("inverse squared lengthscales must be > 0, got {a}")));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.inv_sq_lengthscales.len()
    }

    pub fn sq_dist(&self, x: &[f64], x2: &[f64]) -> f64 {
        self.inv_sq_lengthscales
            .iter()
            .zip(x.iter().zip(x2))
            .map(|(a, (u, v))| a * (u - v) * (u - v))
            .sum()
    }

    /// Kernel value as a function of the weighted squared distance.
    pub fn profile(&self, r2: f64) -> f64 {
        let a0 = self.amplitude;
        match self.family {
            KernelFamily::PowerExponential => a0 * (-r2).exp(),
            KernelFamily::Matern12 => a0 * (-r2.sqrt()).exp(),
            KernelFamily::Matern32 => {
                let s = SQRT3 * r2.sqrt();
                a0 * (1.0 + s) * (-s).exp()
            }
            KernelFamily::Matern52 => {
                let s = SQRT5 * r2.sqrt();
                a0 * (1.0 + s + 5.0 * r2 / 3.0) * (-s).exp()
            }
        }
    }

    /// Derivative of [`profile`](Self::profile) with respect to `r^2`.
    ///
    /// Matérn-1/2 is not differentiable at `r = 0`; the derivative is reported
    /// as zero there.
    pub fn profile_slope(&self, r2: f64) -> f64 {
        let a0 = self.amplitude;
        match self.family {
            KernelFamily::PowerExponential => -a0 * (-r2).exp(),
            KernelFamily::Matern12 => {
                if r2 <= 0.0 {
                    0.0
                } else {
                    let r = r2.sqrt();
                    -a0 * (-r).exp() / (2.0 * r)
                }
            }
            KernelFamily::Matern32 => -1.5 * a0 * (-SQRT3 * r2.sqrt()).exp(),
            KernelFamily::Matern52 => {
                let s = SQRT5 * r2.sqrt();
                -(5.0 / 6.0) * a0 * (1.0 + s) * (-s).exp()
            }
        }
    }

    /// `k(x, x2)` without dimension checks.
    pub fn value(&self, x: &[f64], x2: &[f64]) -> f64 {
        self.profile(self.sq_dist(x, x2))
    }

    /// `k(x, x2)` and its gradient with respect to `x2`.
    pub fn value_and_grad(&self, x: &[f64], x2: &[f64]) -> (f64, Vec<f64>) {
        let r2 = self.sq_dist(x, x2);
        let slope = self.profile_slope(r2);
        let grad = self
            .inv_sq_lengthscales
            .iter()
            .zip(x.iter().zip(x2))
            .map(|(a, (u, v))| 2.0 * slope * a * (v - u))
            .collect();
        (self.profile(r2), grad)
    }
}

/// Kernel evaluation with argument validation.
pub fn kernel_eval(spec: &KernelSpec, x: &[f64], x2: &[f64]) -> Result<f64> {
    if x.len() != spec.dim() || x2.len() != spec.dim() {
        return Err(Error::invalid(format!(
            "kernel of dimension {} evaluated at points of dimension {} and {}",
            spec.dim(),
            x.len(),
            x2.len()
        )));
    }
    Ok(spec.value(x, x2))
}

#[cfg(test)]
mod tests {
    use super::*;

    const FAMILIES: [KernelFamily; 4] = [
        KernelFamily::PowerExponential,
        KernelFamily::Matern12,
        KernelFamily::Matern32,
        KernelFamily::Matern52,
    ];

    #[test]
    fn self_covariance_is_amplitude() {
        for f in FAMILIES {
            let k = KernelSpec::new(f, 2.5, vec![0.3, 4.0]).unwrap();
            assert_eq!(kernel_eval(&k, &[0.1, 0.2], &[0.1, 0.2]).unwrap(), 2.5);
        }
    }

    #[test]
    fn power_exponential_unit_distance() {
        let k = KernelSpec::new(KernelFamily::PowerExponential, 1.0, vec![1.0]).unwrap();
        let v = kernel_eval(&k, &[0.0], &[1.0]).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        assert!((v - 0.367879).abs() < 1e-6);
    }

    // Reference values of the Bessel-form Matérn
    // alpha0 * 2^(1-nu)/Gamma(nu) * (sqrt(2 nu) r)^nu * K_nu(sqrt(2 nu) r)
    // computed offline with mpmath at 30 digits.
    #[test]
    fn matern_matches_bessel_form() {
        let cases = [
            (KernelFamily::Matern12, 1.0, 0.367_879_441_171_442_3),
            (KernelFamily::Matern32, 1.0, 0.483_357_724_596_507_65),
            (KernelFamily::Matern52, 1.0, 0.523_994_108_831_820_3),
            (KernelFamily::Matern32, 0.5, 0.784_887_653_957_450_7),
            (KernelFamily::Matern52, 2.0, 0.138_660_219_138_504_28),
        ];
        for (family, r, expected) in cases {
            let k = KernelSpec::new(family, 1.0, vec![1.0]).unwrap();
            let v = k.value(&[0.0], &[r]);
            assert!((v - expected).abs() < 1e-14, "{family:?} r={r}: {v} vs {expected}");
        }
    }

    #[test]
    fn dimension_mismatch_is_invalid() {
        let k = KernelSpec::new(KernelFamily::Matern52, 1.0, vec![1.0, 1.0]).unwrap();
        assert!(matches!(kernel_eval(&k, &[0.0], &[0.0, 1.0]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn rejects_nonpositive_parameters() {
        assert!(KernelSpec::new(KernelFamily::Matern52, 0.0, vec![1.0]).is_err());
        assert!(KernelSpec::new(KernelFamily::Matern52, 1.0, vec![1.0, -1.0]).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for f in FAMILIES {
            let k = KernelSpec::new(f, 1.7, vec![0.8, 2.0]).unwrap();
            let x = [0.3, -0.4];
            let x2 = [0.9, 0.1];
            let (_, g) = k.value_and_grad(&x, &x2);
            for i in 0..2 {
                let h = 1e-6;
                let mut p = x2;
                let mut m = x2;
                p[i] += h;
                m[i] -= h;
                let fd = (k.value(&x, &p) - k.value(&x, &m)) / (2.0 * h);
                assert!((fd - g[i]).abs() < 1e-7, "{f:?}: {fd} vs {}", g[i]);
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn symmetric(a in proptest::collection::vec(-3.0f64..3.0, 3),
                     b in proptest::collection::vec(-3.0f64..3.0, 3),
                     fam in 0usize..4) {
            let k = KernelSpec::new(FAMILIES[fam], 1.3, vec![0.5, 1.0, 2.0]).unwrap();
            proptest::prop_assert_eq!(k.value(&a, &b), k.value(&b, &a));
        }
    }
}
