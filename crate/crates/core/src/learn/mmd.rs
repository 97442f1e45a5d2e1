use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    /// `exp(-|x - y|_2^2 / (2 sigma^2))`
    Gaussian { sigma: f64 },
    /// `exp(-|x - y|_1 / sigma)`
    Laplacian { sigma: f64 },
}

impl Kernel {
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            Kernel::Gaussian { sigma } => {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2 / (2.0 * sigma * sigma)).exp()
            }
            Kernel::Laplacian { sigma } => {
                let d1: f64 = x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum();
                (-d1 / sigma).exp()
            }
        }
    }

    fn sigma(&self) -> f64 {
        match *self {
            Kernel::Gaussian { sigma } | Kernel::Laplacian { sigma } => sigma,
        }
    }
}

fn mean_kernel<X: AsRef<[f64]>, Y: AsRef<[f64]>>(k: &Kernel, xs: &[X], ys: &[Y]) -> f64 {
    let mut acc = 0.0;
    for x in xs {
        for y in ys {
            acc += k.eval(x.as_ref(), y.as_ref());
        }
    }
    acc / (xs.len() as f64 * ys.len() as f64)
}

/// Biased (V-statistic) estimate of the squared maximum mean discrepancy
/// between two sample sets, clamped at zero.
pub fn mmd_squared<X: AsRef<[f64]>, Y: AsRef<[f64]>>(x: &[X], y: &[Y], kernel: Kernel) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::param("MMD needs non-empty sample sets"));
    }
    let sigma = kernel.sigma();
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::param(format!("kernel bandwidth {sigma} must be positive")));
    }
    let dim = x[0].as_ref().len();
    if x.iter().any(|v| v.as_ref().len() != dim) || y.iter().any(|v| v.as_ref().len() != dim) {
        return Err(Error::param("MMD sample vectors differ in arity"));
    }
    let value = mean_kernel(&kernel, x, x) + mean_kernel(&kernel, y, y) - 2.0 * mean_kernel(&kernel, x, y);
    Ok(value.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    const G: Kernel = Kernel::Gaussian { sigma: 1.0 };

    #[test]
    fn identical_sets_are_zero() {
        let x = vec![vec![0.0, 1.0], vec![2.0, -1.0], vec![0.5, 0.5]];
        assert!(mmd_squared(&x, &x, G).unwrap() <= 1e-12);
    }

    #[test]
    fn singleton_closed_form() {
        let x = [vec![0.0, 0.0]];
        let y = [vec![1.0, 1.0]];
        let expected = 2.0 - 2.0 * (-2.0f64 / 2.0).exp();
        assert!((mmd_squared(&x, &y, G).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn far_clusters_approach_two() {
        let x = [vec![0.0]];
        let y = [vec![100.0]];
        let v = mmd_squared(&x, &y, Kernel::Gaussian { sigma: 0.1 }).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
        let v = mmd_squared(&x, &y, Kernel::Laplacian { sigma: 0.1 }).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric() {
        let x = vec![vec![0.0], vec![1.0]];
        let y = vec![vec![0.3], vec![2.0], vec![-1.0]];
        let a = mmd_squared(&x, &y, G).unwrap();
        let b = mmd_squared(&y, &x, G).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        let empty: Vec<Vec<f64>> = vec![];
        assert!(mmd_squared(&empty, &[vec![1.0]], G).is_err());
        assert!(mmd_squared(&[vec![1.0]], &[vec![1.0, 2.0]], G).is_err());
        assert!(mmd_squared(&[vec![1.0]], &[vec![1.0]], Kernel::Gaussian { sigma: 0.0 }).is_err());
    }
}
