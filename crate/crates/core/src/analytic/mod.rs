//! Quadrature evaluators for coverage, rate coverage, association and handoff
//! probabilities of the anisotropic small-cell model.
//!
//! Everything here is generic over the scalar type. Expectations over the
//! exponent law collapse to a point evaluation when `sigma = 0`.

mod association;
mod chebyshev;
mod coverage;
mod handoff;

use std::sync::OnceLock;

use crate::config::{validate, AntennaPattern, GainLevel, NetworkModel};
use crate::error::{Error, Result};
use crate::quadrature::{integrate_finite, QuadError, QuadSpec};
use crate::scalar::Scalar;

pub use coverage::{Coverage, CoverageQuery, RateQuery};
pub use handoff::{HandoffQuery, Movement};

use association::AssociationTable;

/// Evaluator bound to one parameter set.
///
/// Cheap to construct; the association table used by the handoff integrals is
/// built on first use and cached.
#[derive(Debug)]
pub struct Analytic<F: Scalar> {
    model: NetworkModel<F>,
    antenna: AntennaPattern<F>,
    /// Gain levels with nonzero probability.
    levels: Vec<GainLevel<F>>,
    /// Distinct `ln(g_m / g_n)` over pairs of levels.
    log_ratios: Vec<F>,
    /// `ratio_index[m][n]` points into `log_ratios`.
    ratio_index: Vec<Vec<usize>>,
    outer: QuadSpec<F>,
    middle: QuadSpec<F>,
    inner: QuadSpec<F>,
    table: OnceLock<AssociationTable<F>>,
}

impl<F: Scalar> Clone for Analytic<F> {
    fn clone(&self) -> Self {
        Self {
            model: self.model,
            antenna: self.antenna,
            levels: self.levels.clone(),
            log_ratios: self.log_ratios.clone(),
            ratio_index: self.ratio_index.clone(),
            outer: self.outer,
            middle: self.middle,
            inner: self.inner,
            table: OnceLock::new(),
        }
    }
}

fn tolerance_floor<F: Scalar>() -> F {
    F::epsilon() * F::lit(64.0)
}

impl<F: Scalar> Analytic<F> {
    pub fn new(model: NetworkModel<F>, antenna: AntennaPattern<F>) -> Result<Self> {
        validate(&model, &antenna).into_result()?;
        let levels: Vec<GainLevel<F>> = antenna
            .gain_distribution()
            .into_iter()
            .filter(|l| l.probability > F::zero())
            .collect();
        let mut log_ratios: Vec<F> = Vec::new();
        let mut ratio_index = vec![vec![0; levels.len()]; levels.len()];
        for (m, lm) in levels.iter().enumerate() {
            for (n, ln_) in levels.iter().enumerate() {
                let v = (lm.gain / ln_.gain).ln();
                let scale = F::one().max(v.abs());
                let k = match log_ratios.iter().position(|&x| (x - v).abs() <= F::epsilon() * scale * F::lit(4.0)) {
                    Some(k) => k,
                    None => {
                        log_ratios.push(v);
                        log_ratios.len() - 1
                    }
                };
                ratio_index[m][n] = k;
            }
        }
        let mut out = Self {
            model,
            antenna,
            levels,
            log_ratios,
            ratio_index,
            outer: QuadSpec::default(),
            middle: QuadSpec::default(),
            inner: QuadSpec::default(),
            table: OnceLock::new(),
        };
        out.set_tolerance(F::lit(1e-6));
        Ok(out)
    }

    /// Relative tolerance of the outermost integral; nested integrals run
    /// two and four orders tighter (never below the type's resolution).
    pub fn with_tolerance(mut self, rel_tol: F) -> Self {
        self.set_tolerance(rel_tol);
        self.table = OnceLock::new();
        self
    }

    fn set_tolerance(&mut self, rel_tol: F) {
        let floor = tolerance_floor::<F>();
        let abs = F::lit(1e-14).max(F::min_positive_value());
        let spec = |rel: F| QuadSpec::new(rel.max(floor), abs).with_max_depth(50);
        self.outer = spec(rel_tol);
        self.middle = spec(rel_tol * F::lit(1e-2));
        self.inner = spec(rel_tol * F::lit(1e-4));
    }

    pub fn model(&self) -> &NetworkModel<F> {
        &self.model
    }

    pub fn antenna(&self) -> &AntennaPattern<F> {
        &self.antenna
    }

    /// Largest argument passed to `exp` before a term counts as infinite.
    fn exp_cap() -> F {
        F::max_value().ln() * F::lit(0.9)
    }

    /// `E_α[f(α)]` under the uniform exponent law.
    fn expect_exponent(&self, spec: &QuadSpec<F>, f: impl FnMut(F) -> Result<F>) -> Result<F> {
        let mut f = f;
        let (a, b) = self.model.exponent_support();
        if b <= a {
            return f(self.model.mu);
        }
        Ok(finite(a, b, spec, f)? / (b - a))
    }

    /// `∫₀^∞ f(r) dr`, evaluated in `u = ln r`. The lower end starts 18 e-folds
    /// below `scale`; the upper end is bracketed outward until the integrand
    /// drops below a negligible fraction of its running peak.
    fn radial(&self, spec: &QuadSpec<F>, scale: F, f: impl FnMut(F) -> Result<F>) -> Result<F> {
        let mut f = f;
        let mut g = |u: F| -> Result<F> {
            let r = u.exp();
            Ok(f(r)? * r)
        };
        let step = F::lit(0.5);
        let start = scale.ln();
        let lo = start - F::lit(18.0);
        let cut = F::epsilon() * F::lit(1e-3);
        let mut peak = F::zero();
        let mut u = lo;
        while u < start {
            peak = peak.max(g(u)?);
            u = u + step;
        }
        let mut hi = start;
        for _ in 0..600 {
            let v = g(hi)?;
            if !v.is_finite() {
                return Err(QuadError::NonFinite { at: hi.exp().as_f64() }.into());
            }
            peak = peak.max(v);
            if hi > start + F::one() && v <= peak * cut {
                if peak == F::zero() {
                    return Ok(F::zero());
                }
                return finite(lo, hi, spec, g);
            }
            hi = hi + step;
        }
        Err(QuadError::NonDecay {
            value: f64::NAN,
            tail: peak.as_f64(),
        }
        .into())
    }

    /// `−ln L_I(s)` for `ln_s = ln s`:
    /// `2π²λ Σ_l p_l E_α[(s P_T g_l)^{2/α} csc(2π/α) / α]`.
    pub fn interference_exponent_ln(&self, ln_s: F) -> Result<F> {
        if ln_s == F::neg_infinity() {
            return Ok(F::zero());
        }
        if ln_s.is_nan() {
            return Err(Error::invalid("interference transform argument is NaN"));
        }
        let ln_p = self.model.tx_power.ln();
        let (a_lo, a_hi) = self.model.exponent_support();
        let top = self
            .levels
            .iter()
            .fold(F::neg_infinity(), |acc, l| acc.max(l.gain.ln()))
            + ln_s
            + ln_p;
        let worst = if top > F::zero() { a_lo } else { a_hi };
        if F::lit(2.0) * top / worst > Self::exp_cap() {
            return Ok(F::infinity());
        }
        let two = F::lit(2.0);
        let sum = self.expect_exponent(&self.inner, |alpha| {
            let k = crate::special::csc(F::TAU() / alpha) / alpha;
            let acc = self.levels.iter().fold(F::zero(), |acc, l| {
                acc + l.probability * (two / alpha * (ln_s + ln_p + l.gain.ln())).exp()
            });
            Ok(acc * k)
        })?;
        Ok(two * F::PI() * F::PI() * self.model.lambda * sum)
    }

    /// Laplace transform of the aggregate interference at the origin, `E[e^{−sI}]`.
    pub fn interference_laplace(&self, s: F) -> Result<F> {
        if !(s >= F::zero()) {
            return Err(Error::invalid(format!("Laplace argument s = {s} must be ≥ 0")));
        }
        Ok((-self.interference_exponent_ln(s.ln())?).exp())
    }
}

/// Adaptive Gauss–Kronrod over `[a, b]` for an integrand that may itself fail.
fn finite<F: Scalar>(a: F, b: F, spec: &QuadSpec<F>, f: impl FnMut(F) -> Result<F>) -> Result<F> {
    let mut f = f;
    let mut failure: Option<Error> = None;
    let out = integrate_finite(
        |x| match f(x) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                F::nan()
            }
        },
        a,
        b,
        spec,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(out?.value)
}

/// `E[e^{−sI}]` for one parameter set.
pub fn interference_laplace<F: Scalar>(s: F, model: &NetworkModel<F>, antenna: &AntennaPattern<F>) -> Result<F> {
    Analytic::new(*model, *antenna)?.interference_laplace(s)
}

/// Coverage probability at the query's threshold.
pub fn coverage_probability<F: Scalar>(q: &CoverageQuery<F>) -> Result<Coverage<F>> {
    Analytic::new(q.model, q.antenna)?.coverage(q.tau)
}

/// Probability that the Shannon rate of the best link exceeds `q.gamma`.
pub fn rate_coverage<F: Scalar>(q: &RateQuery<F>, cq: &CoverageQuery<F>) -> Result<Coverage<F>> {
    Analytic::new(cq.model, cq.antenna)?.rate_coverage(q)
}

/// Probability that a station at distance `r` serves the typical user.
pub fn association_probability<F: Scalar>(r: F, model: &NetworkModel<F>, antenna: &AntennaPattern<F>) -> Result<F> {
    Analytic::new(*model, *antenna)?.association(r)
}

/// [`association_probability`] given the serving link's exponent.
pub fn conditional_association<F: Scalar>(
    r: F,
    alpha_r: F,
    model: &NetworkModel<F>,
    antenna: &AntennaPattern<F>,
) -> Result<F> {
    Analytic::new(*model, *antenna)?.conditional_association(r, alpha_r)
}

/// Handoff probability for a user moving straight away from its server.
pub fn handoff_probability_case1<F: Scalar>(
    q: &HandoffQuery<F>,
    model: &NetworkModel<F>,
    antenna: &AntennaPattern<F>,
) -> Result<F> {
    let q = HandoffQuery {
        movement: Movement::Away,
        ..*q
    };
    Analytic::new(*model, *antenna)?.handoff_probability(&q)
}

/// Handoff probability for a user moving perpendicular to the serving link,
/// with `model.sections` sections per station.
pub fn handoff_probability_case2<F: Scalar>(
    q: &HandoffQuery<F>,
    model: &NetworkModel<F>,
    antenna: &AntennaPattern<F>,
) -> Result<F> {
    let q = HandoffQuery {
        movement: Movement::Perpendicular,
        ..*q
    };
    Analytic::new(*model, *antenna)?.handoff_probability(&q)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn defaults() -> Analytic<f64> {
        Analytic::new(NetworkModel::default(), AntennaPattern::default()).unwrap()
    }

    #[test]
    fn laplace_limits() {
        let a = defaults();
        assert_eq!(a.interference_laplace(0.0).unwrap(), 1.0);
        assert!(a.interference_laplace(1e-30).unwrap() > 1.0 - 1e-9);
        let sparse = Analytic::new(NetworkModel::default().with_lambda(1e-14), AntennaPattern::default()).unwrap();
        assert!(sparse.interference_laplace(1e-3 / 1000.0).unwrap() > 1.0 - 1e-6);
        assert!(a.interference_laplace(1e300).unwrap() == 0.0);
    }

    #[test]
    fn laplace_isotropic_closed_form() {
        // σ = 0, α = 4: −ln L = 2π²λ Σ p_l √(s P g_l) / 4
        let a = defaults();
        let s = 1e-3 / 1000.0;
        let expect: f64 = AntennaPattern::<f64>::default()
            .gain_distribution()
            .iter()
            .map(|l| l.probability * (s * 1000.0 * l.gain).sqrt())
            .sum::<f64>()
            * 2.0
            * std::f64::consts::PI.powi(2)
            * 1e-4
            / 4.0;
        let got = -a.interference_laplace(s).unwrap().ln();
        assert!((got - expect).abs() < 1e-11 * expect, "{got} vs {expect}");
    }

    #[test]
    fn laplace_sigma_averages_over_exponents() {
        let m = NetworkModel::<f64>::default().with_sigma(0.5);
        let a = Analytic::new(m, AntennaPattern::default()).unwrap();
        let ln_s = -6.0;
        // midpoint rule on the exponent law, independently
        let (lo, hi) = m.exponent_support();
        let n = 20_000;
        let mut acc = 0.0;
        for i in 0..n {
            let alpha = lo + (hi - lo) * (i as f64 + 0.5) / n as f64;
            let k = 1.0 / (std::f64::consts::TAU / alpha).sin() / alpha;
            for l in AntennaPattern::<f64>::default().gain_distribution() {
                acc += l.probability * (2.0 / alpha * (ln_s + 1000f64.ln() + l.gain.ln())).exp() * k;
            }
        }
        let expect = 2.0 * std::f64::consts::PI.powi(2) * 1e-4 * acc / n as f64;
        let got = a.interference_exponent_ln(ln_s).unwrap();
        assert!((got / expect - 1.0).abs() < 1e-7, "{got} vs {expect}");
    }

    #[test]
    fn rejects_invalid_model() {
        let bad = NetworkModel::<f64>::default().with_sigma(1.2);
        assert!(matches!(
            Analytic::new(bad, AntennaPattern::default()),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn works_in_single_precision() {
        let a = Analytic::<f32>::new(NetworkModel::default(), AntennaPattern::default()).unwrap();
        let b = defaults();
        let s32 = a.coverage(100.0).unwrap().value;
        let s64 = b.coverage(100.0).unwrap().value;
        assert!(((s32 as f64) - s64).abs() < 1e-4, "{s32} vs {s64}");
    }
}
