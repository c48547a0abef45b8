use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{gaussian_norm_expectation, isotropic_constant, mean_width_m, mean_width_mstar, BodySpec, NormSpec};
use crate::constants::estimate_tau;
use crate::error::{Error, Result};
use crate::measures::DistributionFamily;
use crate::rng::RngStream;
use crate::stats::MeanEstimate;

/// `E‖X‖` against `E‖Γ‖` for an isotropic `X`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub family: String,
    pub norm: String,
    pub n: usize,
    pub sample_count: usize,
    pub e_x: MeanEstimate,
    pub e_gamma: MeanEstimate,
    pub ratio: f64,
    /// Delta-method standard error of the ratio.
    pub ratio_se: f64,
    pub tau_hat: f64,
    pub constant: f64,
    /// `C · sqrt(log n) · τ̂`
    pub bound: f64,
    pub seed: u64,
}

impl CompareReport {
    pub const CSV_HEADER: &'static str = "n,family,norm,E_X,E_Gamma,ratio,tau_hat,bound";

    pub fn write_csv_row<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "{},{},{},{:e},{:e},{:e},{:e},{:e}",
            self.n, self.family, self.norm, self.e_x.mean, self.e_gamma.mean, self.ratio, self.tau_hat, self.bound
        )
    }
}

/// Compare the norm expectations of `X ~ family` and `Γ`; `tau_hat` defaults to
/// the family's own τ̂ from `samples.max(10⁴)` draws.
pub fn compare_norms_experiment(
    family: &DistributionFamily,
    spec: &NormSpec,
    samples: usize,
    stream: RngStream,
    tau_hat: Option<f64>,
    constant: f64,
) -> Result<CompareReport> {
    if !family.is_isotropic() {
        return Err(Error::Precondition(format!("{} is not isotropic", family.name())));
    }
    if spec.dim != family.dim {
        return Err(Error::Input("norm and family dimensions differ".into()));
    }
    let failed = std::sync::Mutex::new(None);
    let e_x = family.expectation(samples, stream.purpose("x"), |x| {
        spec.gauge(x).unwrap_or_else(|e| {
            failed.lock().expect("poisoned").get_or_insert(e);
            f64::NAN
        })
    })?;
    if let Some(e) = failed.into_inner().expect("poisoned") {
        return Err(e);
    }
    let e_gamma = gaussian_norm_expectation(spec, samples, stream.purpose("gamma"))?;
    let ratio = e_x.mean / e_gamma.mean;
    let ratio_se = ratio.abs() * (e_x.std_error / e_x.mean).hypot(e_gamma.std_error / e_gamma.mean);
    if !ratio.is_finite() || !ratio_se.is_finite() {
        return Err(Error::Numerical(format!("non-finite ratio {ratio} (se {ratio_se})")));
    }
    let tau_hat = match tau_hat {
        Some(t) => t,
        None => estimate_tau(family, samples.max(crate::constants::MIN_TAU_SAMPLES), stream.purpose("tau"))?.tau,
    };
    let n = family.dim as f64;
    Ok(CompareReport {
        family: family.name(),
        norm: spec.name(),
        n: family.dim,
        sample_count: samples,
        e_x,
        e_gamma,
        ratio,
        ratio_se,
        tau_hat,
        constant,
        bound: constant * n.ln().sqrt() * tau_hat,
        seed: stream.seed,
    })
}

/// Both sides of an inequality `lhs >= rhs` that is reported, not asserted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sides {
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorollaryReport {
    pub body: String,
    pub n: usize,
    pub sample_count: usize,
    /// `E‖X‖_K` for `X` uniform on `K`.
    pub gauge_mean: MeanEstimate,
    /// `E‖X‖_K >= 1/4`
    pub quarter_holds: bool,
    /// `E‖X‖_{K°}`
    pub polar_mean: MeanEstimate,
    /// `E|X|²`
    pub square_norm_mean: MeanEstimate,
    /// `E‖X‖_{K°} >= n - 2 SE`
    pub polar_holds: bool,
    pub m: MeanEstimate,
    pub m_star: MeanEstimate,
    /// τ used in the right-hand sides.
    pub tau: f64,
    pub constant: f64,
    /// `M(K) >= c / (sqrt(n log n) τ)`; absent for `n = 1`.
    pub mean_width: Option<Sides>,
    /// `M*(K) >= c sqrt(n) / (sqrt(log n) τ)`; absent for `n = 1`.
    pub dual_mean_width: Option<Sides>,
    /// `L_K` next to `τ (log n)^{3/2}`.
    pub isotropic_constant: Option<Sides>,
    pub seed: u64,
}

/// Monte-Carlo checks of the steps `E‖X‖_K >= 1/4` and `E‖X‖_{K°} >= E|X|² = n`,
/// with the corollary's mean-width bounds reported for a given `tau`.
pub fn corollary_checks(
    body: &BodySpec,
    samples: usize,
    stream: RngStream,
    tau: f64,
    constant: f64,
) -> Result<CorollaryReport> {
    if !body.isotropic {
        return Err(Error::Precondition(format!("body '{}' is not isotropic", body.name)));
    }
    let family = body.uniform()?;
    let polar = body.gauge.polar()?;
    let n = body.dim();
    let failed = std::sync::Mutex::new(None);
    let est = family.expectations(samples, stream.purpose("uniform"), 3, |x, out| {
        match (body.gauge.gauge(x), polar.gauge(x)) {
            (Ok(a), Ok(b)) => {
                out[0] = a;
                out[1] = b;
            }
            (Err(e), _) | (_, Err(e)) => {
                failed.lock().expect("poisoned").get_or_insert(e);
                out[0] = f64::NAN;
                out[1] = f64::NAN;
            }
        }
        out[2] = x.iter().map(|v| v * v).sum();
    })?;
    if let Some(e) = failed.into_inner().expect("poisoned") {
        return Err(e);
    }
    let (gauge_mean, polar_mean, square_norm_mean) = (est[0], est[1], est[2]);
    let m = mean_width_m(&body.gauge, samples, stream.purpose("m"))?;
    let m_star = mean_width_mstar(&body.gauge, samples, stream.purpose("m-star"))?;
    let nf = n as f64;
    let log_n = nf.ln();
    let (mean_width, dual_mean_width, iso) = if n >= 2 {
        let l_k = isotropic_constant(body).ok();
        (
            Some(Sides { lhs: m.mean, rhs: constant / ((nf * log_n).sqrt() * tau) }),
            Some(Sides { lhs: m_star.mean, rhs: constant * nf.sqrt() / (log_n.sqrt() * tau) }),
            l_k.map(|l| Sides { lhs: l, rhs: tau * log_n.powf(1.5) }),
        )
    } else {
        (None, None, None)
    };
    Ok(CorollaryReport {
        body: body.name.clone(),
        n,
        sample_count: samples,
        gauge_mean,
        quarter_holds: gauge_mean.mean >= 0.25,
        polar_mean,
        square_norm_mean,
        polar_holds: polar_mean.mean >= nf - 2.0 * polar_mean.std_error,
        m,
        m_star,
        tau,
        constant,
        mean_width,
        dual_mean_width,
        isotropic_constant: iso,
        seed: stream.seed,
    })
}
