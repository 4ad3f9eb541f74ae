use rand::Rng;

use super::{Component, Density, Mixture};
use crate::error::{Error, Result};
use crate::points::Points;

/// Gaussian kernel density estimator: one `N(x_i, eps I)` kernel per data
/// point with uniform weights `1/n`.
#[derive(Clone, Debug)]
pub struct Kde {
    points: Points,
    bandwidth: f64,
    mixture: Mixture,
}

impl Kde {
    pub fn build(points: &Points, bandwidth: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InsufficientData("KDE of an empty point set".into()));
        }
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::param("bandwidth", format!("{bandwidth} is not positive")));
        }
        let d = points.dim();
        let comps = points
            .rows()
            .map(|x| Component::gaussian_diag(x.to_vec(), vec![bandwidth; d]))
            .collect::<Result<Vec<_>>>()?;
        let n = comps.len();
        let mixture = Mixture::new(vec![1.0 / n as f64; n], comps)?;
        Ok(Kde {
            points: points.clone(),
            bandwidth,
            mixture,
        })
    }

    pub fn points(&self) -> &Points {
        &self.points
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn mixture(&self) -> &Mixture {
        &self.mixture
    }

    pub fn kernels(&self) -> &[Component] {
        self.mixture.components()
    }

    /// Differential entropy of a single kernel `N(x, eps I)`.
    pub fn kernel_entropy(&self) -> f64 {
        let d = self.points.dim() as f64;
        0.5 * d * (2.0 * std::f64::consts::PI * std::f64::consts::E * self.bandwidth).ln()
    }
}

impl Density for Kde {
    fn dim(&self) -> usize {
        self.points.dim()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        self.mixture.log_density(x)
    }

    fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        self.mixture.draw_into(rng, out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_kde() {
        let p = Points::from_rows(&[[1.0, -2.0]]).unwrap();
        let kde = Kde::build(&p, 0.25).unwrap();
        assert_eq!(kde.mixture().weights(), &[1.0]);
        assert_eq!(
            kde.kernels()[0],
            Component::gaussian_diag(vec![1.0, -2.0], vec![0.25, 0.25]).unwrap()
        );
    }

    #[test]
    fn weights_and_variances() {
        let p = Points::from_rows(&[[0.0], [1.0], [5.0]]).unwrap();
        let kde = Kde::build(&p, 0.1).unwrap();
        assert!(kde.mixture().weights().iter().all(|w| *w == 1.0 / 3.0));
        for c in kde.kernels() {
            assert_eq!(c.gaussian_params().unwrap().1, vec![0.1]);
        }
    }

    #[test]
    fn log_pdf_equals_direct_kernel_sum() {
        let rows: Vec<[f64; 2]> = (0..40)
            .map(|i| [(i as f64 * 0.37).sin() * 3.0, (i as f64 * 1.3).cos()])
            .collect();
        let p = Points::from_rows(&rows).unwrap();
        let eps = 0.3;
        let kde = Kde::build(&p, eps).unwrap();
        let x = [0.2, -0.4];
        let direct: f64 = rows
            .iter()
            .map(|r| {
                let d2 = (x[0] - r[0]).powi(2) + (x[1] - r[1]).powi(2);
                (-d2 / (2.0 * eps)).exp() / (2.0 * std::f64::consts::PI * eps)
            })
            .sum::<f64>()
            / rows.len() as f64;
        assert!((kde.log_density(&x) - direct.ln()).abs() < 1e-12);
    }

    #[test]
    fn peaks_at_data() {
        let p = Points::from_rows(&[[0.0], [1.0]]).unwrap();
        let eps = 1e-4;
        let kde = Kde::build(&p, eps).unwrap();
        let far = 1.0 + 10.0 * eps.sqrt();
        assert!(kde.log_density(&[0.0]) >= kde.log_density(&[far]));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Kde::build(&Points::with_dim(2), 1.0).is_err());
        let p = Points::from_rows(&[[0.0]]).unwrap();
        assert!(Kde::build(&p, 0.0).is_err());
    }
}
