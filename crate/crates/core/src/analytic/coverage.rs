use crate::config::{AntennaPattern, NetworkModel};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::Analytic;

/// A coverage threshold together with the parameters it is evaluated under.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageQuery<F> {
    pub tau: F,
    pub model: NetworkModel<F>,
    pub antenna: AntennaPattern<F>,
}

impl<F: Scalar> CoverageQuery<F> {
    pub fn new(tau: F, model: NetworkModel<F>, antenna: AntennaPattern<F>) -> Result<Self> {
        if !(tau >= F::zero() && tau.is_finite()) {
            return Err(Error::invalid(format!("threshold tau = {tau} must be finite and ≥ 0")));
        }
        Ok(Self { tau, model, antenna })
    }

    /// True when `tau` is above `M_tM_r/(m_t m_r)`, where at most one station
    /// can exceed it and the coverage integral is an exact probability.
    pub fn is_exact(&self) -> bool {
        self.tau > self.antenna.unique_coverage_threshold()
    }
}

/// Rate threshold `gamma` (bit/s) over bandwidth `bandwidth` (Hz).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateQuery<F> {
    pub gamma: F,
    pub bandwidth: F,
}

impl<F: Scalar> RateQuery<F> {
    pub fn new(gamma: F, bandwidth: F) -> Result<Self> {
        if !(gamma >= F::zero() && gamma.is_finite()) {
            return Err(Error::invalid(format!("rate threshold {gamma} must be ≥ 0")));
        }
        if !(bandwidth > F::zero() && bandwidth.is_finite()) {
            return Err(Error::invalid(format!("bandwidth {bandwidth} must be > 0")));
        }
        Ok(Self { gamma, bandwidth })
    }

    /// The equivalent SINR threshold `2^{γ/B} − 1`.
    pub fn sinr_threshold(&self) -> F {
        (self.gamma / self.bandwidth * F::LN_2()).exp_m1()
    }
}

/// Result of the coverage integral at one threshold.
///
/// When `upper_bound` is set the threshold lies at or below `M_tM_r/(m_t m_r)`
/// and `value` counts every station above threshold, which bounds the coverage
/// probability from above and may exceed one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coverage<F> {
    pub tau: F,
    pub value: F,
    pub upper_bound: bool,
}

impl<F: Scalar> Coverage<F> {
    /// `value`, capped at one in the upper-bound regime.
    pub fn probability(&self) -> F {
        if self.upper_bound {
            self.value.min(F::one())
        } else {
            self.value
        }
    }
}

impl<F: Scalar> Analytic<F> {
    /// Mean number of stations whose SINR exceeds `tau`:
    /// `2πλ ∫ r E_α[L_I(s) e^{−s σ_n²}] dr` with `s = τ r^α / (P_T M_t M_r)`.
    pub fn expected_count_above(&self, tau: F) -> Result<F> {
        if !(tau > F::zero() && tau.is_finite()) {
            return Err(Error::invalid(format!("threshold tau = {tau} must be finite and > 0")));
        }
        let m = &self.model;
        let gd = self.antenna.desired_gain();
        let ln_base = tau.ln() - (m.tx_power * gd).ln();
        let noise = tau * m.noise_power / (m.tx_power * gd);
        let total = self.expect_exponent(&self.outer, |alpha| {
            self.radial(&self.middle, m.cell_radius(), |r| {
                let lr = alpha * r.ln();
                let e = self.interference_exponent_ln(ln_base + lr)?;
                let n = if noise > F::zero() { noise * lr.exp() } else { F::zero() };
                Ok(r * (-(e + n)).exp())
            })
        })?;
        Ok(F::TAU() * m.lambda * total)
    }

    /// Coverage at SINR threshold `tau` (linear).
    pub fn coverage(&self, tau: F) -> Result<Coverage<F>> {
        if tau == F::zero() {
            return Ok(Coverage {
                tau,
                value: F::one(),
                upper_bound: false,
            });
        }
        let value = self.expected_count_above(tau)?;
        Ok(Coverage {
            tau,
            value,
            upper_bound: tau <= self.antenna.unique_coverage_threshold(),
        })
    }

    /// `(lower, upper)` bracket on the coverage probability. Exact thresholds
    /// give a degenerate bracket; otherwise the lower end is the exact value at
    /// `M_tM_r/(m_t m_r)`, using monotonicity in `tau`.
    pub fn coverage_bracket(&self, tau: F) -> Result<(F, F)> {
        let c = self.coverage(tau)?;
        if !c.upper_bound {
            return Ok((c.value, c.value));
        }
        let lower = self.expected_count_above(self.antenna.unique_coverage_threshold())?;
        Ok((lower.min(F::one()), c.probability()))
    }

    /// Rate coverage, the coverage at `2^{γ/B} − 1`.
    pub fn rate_coverage(&self, q: &RateQuery<F>) -> Result<Coverage<F>> {
        self.coverage(q.sinr_threshold())
    }
}
