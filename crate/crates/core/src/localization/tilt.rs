use nalgebra::{DMatrix, DVector};

use super::state::{LocalizationState, Localizer};
use crate::error::{Error, Result};

impl Localizer {
    /// Root-mean-square residual of `log(f_t / f_0)(x) ≈ c + <b, x> - <B x, x>/2`
    /// over the atoms, with `B` fixed to the accumulated `∫ A_s⁻¹ ds` and `(c, b)`
    /// fitted by least squares.
    ///
    /// Needs at least `n + 2` atoms so the fit is over-determined.
    pub fn tilt_residual(&self, st: &LocalizationState) -> Result<f64> {
        let n = self.dim();
        let mu = self.measure();
        let m = mu.len();
        if m < n + 2 {
            return Err(Error::Capability(format!(
                "tilt fit needs at least {} atoms with positive weight, got {m}",
                n + 2
            )));
        }
        if st.log_weights.len() != m || st.b_accum.nrows() != n {
            return Err(Error::Input("state does not belong to this measure".into()));
        }
        let mut design = DMatrix::zeros(m, n + 1);
        let mut rhs = DVector::zeros(m);
        for (i, (x, w0)) in mu.iter().enumerate() {
            let xv = DVector::from_column_slice(x);
            design[(i, 0)] = 1.0;
            for k in 0..n {
                design[(i, k + 1)] = x[k];
            }
            rhs[i] = st.log_weights[i] - w0.ln() + 0.5 * xv.dot(&(&st.b_accum * &xv));
        }
        let svd = design.clone().svd(true, true);
        let coef = svd
            .solve(&rhs, 1e-12)
            .map_err(|e| Error::Numerical(format!("tilt least squares failed: {e}")))?;
        let resid = rhs - design * coef;
        Ok((resid.norm_squared() / m as f64).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::DiscreteMeasure;
    use crate::rng::RngStream;
    use rand_distr::{Distribution, StandardNormal};

    fn ten_atoms() -> Localizer {
        let atoms: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 * 0.3 - 1.2 + 0.01 * (i * i) as f64]).collect();
        let masses: Vec<f64> = (0..10).map(|i| 1.0 + (i % 3) as f64).collect();
        Localizer::new(&DiscreteMeasure::normalized(atoms, masses).unwrap(), Default::default()).unwrap()
    }

    #[test]
    fn zero_at_start() {
        let loc = ten_atoms();
        assert!(loc.tilt_residual(&loc.init()).unwrap() < 1e-13);
    }

    #[test]
    fn stays_tiny_along_a_path() {
        let loc = ten_atoms();
        let mut st = loc.init();
        let mut rng = RngStream::root(5).rng();
        for _ in 0..500 {
            let dw: f64 = StandardNormal.sample(&mut rng);
            st = loc.step(&st, 1e-3, &[dw * 1e-3_f64.sqrt()]).unwrap();
        }
        assert!(loc.tilt_residual(&st).unwrap() < 1e-8);
    }

    #[test]
    fn too_few_atoms() {
        let loc = Localizer::new(&DiscreteMeasure::two_point(0.5).unwrap(), Default::default()).unwrap();
        assert!(matches!(loc.tilt_residual(&loc.init()), Err(Error::Capability(_))));
    }
}
