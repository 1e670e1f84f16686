//! Self-checks comparing the analytic and simulated engines.

use serde::Serialize;

use crate::analytic::{Analytic, HandoffQuery, Movement};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::geometry::sample_deployment;
use crate::montecarlo::{
    mc_agreement_table, mc_association, mc_coverage_curve, mc_handoff_probability, mc_interference_laplace,
    mc_unique_coverage, McSettings, BEAM_PAIRS_DEG,
};
use crate::quadrature::{integrate_finite, QuadSpec};
use crate::scalar::db_to_linear;
use crate::special::csc;
use crate::tessellation::{default_extent, fractal_cells, voronoi_reference};

/// Agreement allowed between an estimate and its analytic twin.
pub const SIGMA_MULTIPLE: f64 = 3.0;
pub const ABSOLUTE_FLOOR: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, pass: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            pass,
            detail,
        }
    }

    /// `PASS name: detail` or `FAIL name: detail`.
    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.pass { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

/// `∫₀^∞ u^{2/α−1}/(1+u) du` against `π csc(2π/α)`, worst relative error.
pub fn beta_identity_error(alphas: &[f64]) -> Result<f64> {
    let spec = QuadSpec::new(1e-12, 1e-300);
    let mut worst = 0.0f64;
    for &alpha in alphas {
        let a = 2.0 / alpha;
        // u = v^{1/a} on [0, 1] and u = w^{−1/(1−a)} on [1, ∞)
        let head = integrate_finite(|v: f64| 1.0 / (1.0 + v.powf(1.0 / a)), 0.0, 1.0, &spec)?.value / a;
        let tail = integrate_finite(|w: f64| 1.0 / (1.0 + w.powf(1.0 / (1.0 - a))), 0.0, 1.0, &spec)?.value / (1.0 - a);
        let exact = std::f64::consts::PI * csc(std::f64::consts::PI * a);
        worst = worst.max(((head + tail) / exact - 1.0).abs());
    }
    Ok(worst)
}

/// Integral of the exponent density over its support, minus one.
pub fn exponent_law_error(mu: f64, sigma: f64) -> Result<f64> {
    if sigma == 0.0 {
        return Ok(0.0);
    }
    let half = 3f64.sqrt() * sigma;
    let density = 1.0 / (2.0 * half);
    let total = integrate_finite(|_| density, mu - half, mu + half, &QuadSpec::new(1e-13, 1e-300))?.value;
    Ok((total - 1.0).abs())
}

fn agree(name: &str, analytic: f64, est: &crate::montecarlo::Estimate) -> Check {
    let pass = est.agrees_with(analytic, SIGMA_MULTIPLE, ABSOLUTE_FLOOR);
    Check::new(
        name,
        pass,
        format!("analytic {analytic:.4}, simulated {:.4} ± {:.4} (n = {})", est.value, est.std_error, est.samples),
    )
}

/// Runs every check on `config` with `drops` samples per estimate.
pub fn run_suite(config: &ExperimentConfig, seed: u64, drops: usize) -> Result<Vec<Check>> {
    let model = config.model;
    let antenna = config.antenna;
    let settings = McSettings::new(drops, seed);
    let an = Analytic::new(model, antenna)?;
    let mut out = Vec::new();

    let e = beta_identity_error(&[2.2, 3.0, 4.0, 6.0])?;
    out.push(Check::new("quadrature beta identity", e < 1e-8, format!("max rel error {e:.2e}")));
    let e = exponent_law_error(model.mu, model.sigma)?;
    out.push(Check::new("exponent law normalisation", e < 1e-10, format!("error {e:.2e}")));

    let tau = 1.01 * antenna.unique_coverage_threshold();
    let u = mc_unique_coverage(tau, &model, &antenna, settings)?;
    out.push(Check::new(
        "at most one station above the gain-ratio threshold",
        u.violations == 0,
        format!("{} of {} snapshots with ≥ 2 stations", u.violations, u.snapshots),
    ));

    let rows = mc_agreement_table(50.0, &BEAM_PAIRS_DEG, &model, &antenna, settings)?;
    let low = rows.iter().filter(|r| r.agreement.value < r.bound).count();
    out.push(Check::new(
        "max-power agreement bound",
        low == 0,
        format!("{low} of {} beam pairs below the bound", rows.len()),
    ));

    let iso = config.model.with_sigma(0.0);
    let extent = default_extent(&iso);
    let dep = sample_deployment(&iso, extent, seed)?;
    let agreement = fractal_cells(&dep, &iso, extent, 256)?.agreement(&voronoi_reference(&dep, extent, 256)?)?;
    out.push(Check::new(
        "isotropic cells match nearest-station cells",
        agreement >= 0.99,
        format!("{:.4} of grid cells agree", agreement),
    ));

    let s = 1.0 / (model.tx_power * 1e-6);
    out.push(agree(
        "interference Laplace transform",
        an.interference_laplace(s)?,
        &mc_interference_laplace(s, &model, &antenna, settings)?,
    ));

    let taus_db = [20.0, 25.0, 30.0];
    let taus: Vec<f64> = taus_db.iter().map(|&d| db_to_linear(d)).collect();
    let mc = mc_coverage_curve(&taus, &model, &antenna, settings)?;
    for ((db, tau), est) in taus_db.iter().zip(&taus).zip(&mc) {
        out.push(agree(&format!("coverage at {db} dB"), an.coverage(*tau)?.value, est));
    }

    let assoc = mc_association(50.0, &model, &antenna, settings)?;
    out.push(agree("max-power association at 50 m", an.association(50.0)?, &assoc.max_power));

    let vt = 30.0;
    let threshold = config.mobility.handoff_threshold;
    let h = an.handoff_probability(&HandoffQuery::new(vt, threshold, Movement::Away)?)?;
    let est = mc_handoff_probability(vt, Movement::Away, &model, &antenna, &config.mobility, settings)?;
    out.push(agree("handoff probability moving away, 30 m", h, &est));

    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_identities() {
        assert!(beta_identity_error(&[2.2, 3.0, 4.0, 6.0]).unwrap() < 1e-8);
        assert!(exponent_law_error(4.0, 1.0).unwrap() < 1e-10);
    }

    #[test]
    fn check_lines() {
        let c = Check::new("x", false, "y".into());
        assert_eq!(c.line(), "FAIL x: y");
    }
}
