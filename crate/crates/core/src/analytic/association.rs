use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::special::gamma;

use super::chebyshev::{nodes, PiecewiseChebyshev};
use super::{finite, Analytic};

const PANEL_NODES: usize = 16;

/// Tabulated association probability as a function of `w = α_r ln r`.
#[derive(Debug, Clone)]
pub(super) struct AssociationTable<F> {
    lo: F,
    hi: F,
    at_lo: F,
    cheb: PiecewiseChebyshev<F>,
}

impl<F: Scalar> AssociationTable<F> {
    fn eval(&self, w: F) -> F {
        if w <= self.lo {
            self.at_lo
        } else if w >= self.hi {
            F::zero()
        } else {
            debug_assert!(self.cheb.contains(w));
            self.cheb.eval(w).max(F::zero()).min(F::one())
        }
    }
}

impl<F: Scalar> Analytic<F> {
    /// `E_α[e^{−2u/α} Γ(2/α) / α]`, the PPP void term for a power ratio `e^u`.
    fn void_kernel(&self, u: F) -> Result<F> {
        let (a_lo, a_hi) = self.model.exponent_support();
        let worst = if u < F::zero() { a_lo } else { a_hi };
        if -F::lit(2.0) * u / worst > Self::exp_cap() {
            return Ok(F::infinity());
        }
        let two = F::lit(2.0);
        self.expect_exponent(&self.inner, |alpha| {
            let x = two / alpha;
            Ok((-x * u).exp() * gamma(x) / alpha)
        })
    }

    /// Association probability given `w = α_r ln r` of the candidate link.
    pub(super) fn association_at(&self, w: F) -> Result<F> {
        let h_max = -F::epsilon().ln() + F::lit(10.0);
        let c = F::TAU() * self.model.lambda;
        let mut void = vec![F::zero(); self.log_ratios.len()];
        finite(F::zero(), h_max, &self.middle, |h| {
            let ln_h = h.ln();
            for (v, &lr) in void.iter_mut().zip(&self.log_ratios) {
                *v = self.void_kernel(lr + ln_h - w)?;
            }
            let mut acc = F::zero();
            for (m, lm) in self.levels.iter().enumerate() {
                let s = self
                    .levels
                    .iter()
                    .enumerate()
                    .fold(F::zero(), |s, (n, ln_)| s + ln_.probability * void[self.ratio_index[m][n]]);
                acc = acc + lm.probability * (-h - c * s).exp();
            }
            Ok(acc)
        })
    }

    /// Probability that a station at distance `r` whose link exponent is
    /// `alpha_r` has the largest received power at the user.
    pub fn conditional_association(&self, r: F, alpha_r: F) -> Result<F> {
        if !(r > F::zero() && r.is_finite()) {
            return Err(Error::invalid(format!("distance r = {r} must be finite and > 0")));
        }
        let (lo, hi) = self.model.exponent_support();
        let slack = F::epsilon() * F::lit(16.0) * hi;
        if !(alpha_r >= lo - slack && alpha_r <= hi + slack) {
            return Err(Error::invalid(format!(
                "alpha_r = {alpha_r} outside the exponent support [{lo}, {hi}]"
            )));
        }
        self.association_at(alpha_r * r.ln())
    }

    /// [`Self::conditional_association`] averaged over the exponent law.
    pub fn association(&self, r: F) -> Result<F> {
        if !(r > F::zero() && r.is_finite()) {
            return Err(Error::invalid(format!("distance r = {r} must be finite and > 0")));
        }
        let ln_r = r.ln();
        self.expect_exponent(&self.outer, |alpha| self.association_at(alpha * ln_r))
    }

    /// Tabulated [`Self::association_at`]. Below the table the value is held at
    /// its end value; above it the function is below `1e-13` and returns zero.
    pub(super) fn association_fast(&self, w: F) -> Result<F> {
        if let Some(t) = self.table.get() {
            return Ok(t.eval(w));
        }
        let t = self.build_table()?;
        let _ = self.table.set(t);
        Ok(self.table.get().expect("table just set").eval(w))
    }

    fn build_table(&self) -> Result<AssociationTable<F>> {
        let step = F::lit(2.0);
        let tiny = F::lit(1e-13).max(F::epsilon() * F::lit(4.0));
        let centre = (self.model.mu * self.model.cell_radius().ln()).round();
        let mut lo = centre;
        for _ in 0..200 {
            if F::one() - self.association_at(lo)? < tiny {
                break;
            }
            lo = lo - step;
        }
        let mut hi = centre;
        for _ in 0..200 {
            if self.association_at(hi)? < tiny {
                break;
            }
            hi = hi + step;
        }
        let panels = ((hi - lo) / F::lit(0.5)).to_usize().unwrap_or(1).max(1);
        let bounds = PiecewiseChebyshev::panel_bounds(lo, hi, panels);
        let values = bounds
            .par_iter()
            .map(|&(a, b)| nodes(a, b, PANEL_NODES).into_iter().map(|w| self.association_at(w)).collect())
            .collect::<Result<Vec<Vec<F>>>>()?;
        Ok(AssociationTable {
            lo,
            hi,
            at_lo: self.association_at(lo)?,
            cheb: PiecewiseChebyshev::from_panel_values(lo, hi, values),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{AntennaPattern, NetworkModel};

    fn eval(sigma: f64) -> Analytic<f64> {
        Analytic::new(NetworkModel::default().with_sigma(sigma), AntennaPattern::default()).unwrap()
    }

    #[test]
    fn sparse_network_always_associates() {
        let a = Analytic::new(NetworkModel::<f64>::default().with_lambda(1e-14), AntennaPattern::default()).unwrap();
        assert!(a.association(50.0).unwrap() > 1.0 - 1e-6);
        assert!(a.conditional_association(50.0, 4.0).unwrap() > 1.0 - 1e-6);
    }

    #[test]
    fn single_gain_isotropic_closed_form() {
        // one gain level, α = 4: P_A(r) = ∫ e^{−h − 2πλ Γ(1/2) r² / (4 √h)} dh
        let mut ant = AntennaPattern::<f64>::default();
        ant.beam_tx = std::f64::consts::TAU * (1.0 - 1e-15);
        ant.beam_rx = std::f64::consts::TAU * (1.0 - 1e-15);
        let a = Analytic::new(NetworkModel::default(), ant).unwrap();
        let r: f64 = 40.0;
        let c = std::f64::consts::TAU * 1e-4 * std::f64::consts::PI.sqrt() / 4.0 * r * r;
        let n = 400_000;
        let h_max = 60.0;
        let mut acc = 0.0;
        for i in 0..n {
            let h = h_max * (i as f64 + 0.5) / n as f64;
            acc += (-h - c / h.sqrt()).exp();
        }
        let expect = acc * h_max / n as f64;
        let got = a.association(r).unwrap();
        assert!((got - expect).abs() < 1e-6, "{got} vs {expect}");
    }

    #[test]
    fn decreasing_in_distance() {
        let a = eval(0.5);
        let mut prev = 1.0;
        for r in [10.0, 30.0, 60.0, 100.0, 160.0] {
            let p = a.association(r).unwrap();
            assert!(p < prev && p > 0.0, "r = {r}: {p}");
            prev = p;
        }
    }

    #[test]
    fn degenerate_law_matches_conditional() {
        let a = eval(0.0);
        assert_eq!(a.association(50.0).unwrap(), a.conditional_association(50.0, 4.0).unwrap());
        assert!(a.conditional_association(50.0, 4.5).is_err());
    }

    #[test]
    fn conditional_average_reproduces_marginal() {
        let a = eval(0.6);
        let (lo, hi) = a.model.exponent_support();
        let n = 64;
        let (xs, ws) = gauss_legendre(n);
        let mut acc = 0.0;
        for (x, w) in xs.iter().zip(&ws) {
            let alpha = 0.5 * (lo + hi) + 0.5 * (hi - lo) * x;
            acc += 0.5 * w * a.conditional_association(80.0, alpha).unwrap();
        }
        let marginal = a.association(80.0).unwrap();
        assert!((acc / marginal - 1.0).abs() < 1e-4, "{acc} vs {marginal}");
    }

    #[test]
    fn serving_density_integrates_to_one() {
        // 2πλ ∫ r P_A(r) dr = 1 for max-power association
        let a = eval(0.5);
        let total = a
            .radial(&a.outer, a.model.cell_radius(), |r| a.association(r).map(|p| r * p))
            .unwrap();
        let total = total * std::f64::consts::TAU * 1e-4;
        assert!((total - 1.0).abs() < 1e-4, "{total}");
    }

    #[test]
    fn table_tracks_direct_evaluation() {
        let a = eval(0.8);
        for i in 0..60 {
            let w = -10.0 + i as f64 * 0.77;
            let d = a.association_at(w).unwrap();
            let t = a.association_fast(w).unwrap();
            assert!((d - t).abs() < 5e-8, "w = {w}: {d} vs {t}");
        }
    }

    fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
        let mut xs = vec![0.0; n];
        let mut ws = vec![0.0; n];
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    ws[i] = 2.0 / ((1.0 - x * x) * dp * dp);
                    break;
                }
            }
            xs[i] = x;
        }
        (xs, ws)
    }
}
