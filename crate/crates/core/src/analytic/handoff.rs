use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::Analytic;

/// Direction of the user's displacement relative to the serving link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Movement {
    /// Straight away from the serving station; the section never changes.
    #[default]
    Away,
    /// At a right angle to the serving link; the section changes when the
    /// bearing swing crosses a section boundary.
    Perpendicular,
}

/// One point of a handoff-probability curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandoffQuery<F> {
    /// Condition on this serving distance; `None` averages over the serving
    /// distance law.
    pub r: Option<F>,
    /// Displacement `v·t` in metres.
    pub vt: F,
    /// Linear SINR trigger level, hysteresis included.
    pub threshold: F,
    pub movement: Movement,
}

impl<F: Scalar> HandoffQuery<F> {
    pub fn new(vt: F, threshold: F, movement: Movement) -> Result<Self> {
        let q = Self {
            r: None,
            vt,
            threshold,
            movement,
        };
        q.check()?;
        Ok(q)
    }

    pub fn at_distance(mut self, r: F) -> Self {
        self.r = Some(r);
        self
    }

    fn check(&self) -> Result<()> {
        if !(self.vt >= F::zero() && self.vt.is_finite()) {
            return Err(Error::invalid(format!("displacement vt = {} must be ≥ 0", self.vt)));
        }
        if !(self.threshold >= F::zero() && self.threshold.is_finite()) {
            return Err(Error::invalid(format!("handoff threshold {} must be ≥ 0", self.threshold)));
        }
        if let Some(r) = self.r {
            if !(r > F::zero() && r.is_finite()) {
                return Err(Error::invalid(format!("serving distance r = {r} must be > 0")));
            }
        }
        Ok(())
    }
}

/// Probability that the perpendicular move swings the bearing across a section
/// boundary: `min(1, atan(vt / r)·M / 2π)`.
pub(crate) fn section_change_probability<F: Scalar>(r: F, vt: F, sections: usize) -> F {
    let swing = vt.atan2(r);
    (swing * F::from_usize_lossy(sections) / F::TAU()).min(F::one())
}

impl<F: Scalar> Analytic<F> {
    /// Probability that the SINR of a serving link of length `d` and exponent
    /// `alpha` is below `threshold` after fading is re-drawn.
    pub fn outage_at(&self, d: F, alpha: F, threshold: F) -> Result<F> {
        if threshold == F::zero() {
            return Ok(F::zero());
        }
        let m = &self.model;
        let ln_s = threshold.ln() + alpha * d.ln() - (m.tx_power * self.antenna.desired_gain()).ln();
        let noise = if m.noise_power > F::zero() {
            (ln_s + m.noise_power.ln()).exp()
        } else {
            F::zero()
        };
        let x = noise + self.interference_exponent_ln(ln_s)?;
        Ok(-(-x).exp_m1())
    }

    /// Joint density term `E_{α_r}[Pr{A2 | r, α_r} · P_A(r | α_r)]`.
    fn handoff_kernel(&self, r: F, q: &HandoffQuery<F>, direct: bool) -> Result<F> {
        let ln_r = r.ln();
        let assoc = |alpha: F| {
            if direct {
                self.association_at(alpha * ln_r)
            } else {
                self.association_fast(alpha * ln_r)
            }
        };
        match q.movement {
            Movement::Away => {
                let d = r + q.vt;
                self.expect_exponent(&self.middle, |alpha| {
                    Ok(self.outage_at(d, alpha, q.threshold)? * assoc(alpha)?)
                })
            }
            Movement::Perpendicular => {
                let d = r.hypot(q.vt);
                let changed = section_change_probability(r, q.vt, self.model.sections);
                let redrawn = if changed > F::zero() && !self.model.is_isotropic() {
                    self.expect_exponent(&self.middle, |alpha| self.outage_at(d, alpha, q.threshold))?
                } else {
                    F::zero()
                };
                self.expect_exponent(&self.middle, |alpha| {
                    let kept = self.outage_at(d, alpha, q.threshold)?;
                    let a2 = if self.model.is_isotropic() {
                        kept
                    } else {
                        changed * redrawn + (F::one() - changed) * kept
                    };
                    Ok(a2 * assoc(alpha)?)
                })
            }
        }
    }

    /// Probability that Event A2 fires after the displacement in `q`.
    ///
    /// Without `q.r` the result is averaged over the serving distance, whose
    /// density is `2πλ r P_A(r)`.
    pub fn handoff_probability(&self, q: &HandoffQuery<F>) -> Result<F> {
        q.check()?;
        if let Some(r) = q.r {
            let joint = self.handoff_kernel(r, q, true)?;
            let pa = self.association(r)?;
            if pa == F::zero() {
                return Err(Error::invalid(format!("a server at r = {r} has zero association probability")));
            }
            return Ok(joint / pa);
        }
        let total = self.radial(&self.outer, self.model.cell_radius(), |r| {
            Ok(r * self.handoff_kernel(r, q, false)?)
        })?;
        Ok(F::TAU() * self.model.lambda * total)
    }
}
