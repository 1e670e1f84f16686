use super::{Integral, QuadError, QuadSpec};
use crate::scalar::Scalar;

/// Exp-sinh rule on `[a, ∞)`: `x = a + exp(π/2 · sinh t)`, trapezoidal sums
/// with step halving until successive levels agree.
pub(super) fn exp_sinh<F, G>(mut f: G, a: F, spec: &QuadSpec<F>) -> Result<Integral<F>, QuadError>
where
    F: Scalar,
    G: FnMut(F) -> F,
{
    let half_pi = F::FRAC_PI_2();
    let headroom = F::lit(0.9);
    let t_hi = ((F::max_value().ln() * headroom) / half_pi).asinh();
    let t_lo = ((F::min_positive_value().ln() * headroom) / half_pi).asinh();
    let max_level = spec.max_depth.clamp(2, 12);

    let mut term = |t: F| -> Result<F, QuadError> {
        let e = (half_pi * t.sinh()).exp();
        let x = a + e;
        if x <= a {
            return Ok(F::zero());
        }
        let y = f(x);
        if y == F::zero() {
            return Ok(F::zero());
        }
        let v = y * half_pi * t.cosh() * e;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(QuadError::NonFinite { at: x.as_f64() })
        }
    };

    let mut sum = F::zero();
    let mut evaluations = 0usize;
    let mut previous: Option<F> = None;
    for level in 0..=max_level {
        let h = F::lit(0.5).powi(level as i32);
        let j_lo = (t_lo / h).ceil().to_i64().unwrap_or(0);
        let j_hi = (t_hi / h).floor().to_i64().unwrap_or(0);
        let step = if level == 0 { 1 } else { 2 };
        let start = if level == 0 || j_lo.rem_euclid(2) == 1 { j_lo } else { j_lo + 1 };
        let mut j = start;
        while j <= j_hi {
            sum = sum + term(F::from_i64(j).unwrap() * h)?;
            evaluations += 1;
            j += step;
        }
        let estimate = sum * h;
        if let Some(prev) = previous {
            let diff = (estimate - prev).abs();
            if level >= 3 && diff <= spec.tolerance(estimate) {
                // The outermost node measures how much mass lies past the cutoff.
                let j_last = j_hi;
                let tail = (term(F::from_i64(j_last).unwrap() * h)? * h).abs();
                if tail > spec.tolerance(estimate) {
                    return Err(QuadError::NonDecay {
                        value: estimate.as_f64(),
                        tail: tail.as_f64(),
                    });
                }
                return Ok(Integral {
                    value: estimate,
                    error: diff,
                    evaluations,
                });
            }
            if level == max_level {
                let tail = (term(F::from_i64(j_hi).unwrap() * h)? * h).abs();
                if tail > spec.tolerance(estimate) {
                    return Err(QuadError::NonDecay {
                        value: estimate.as_f64(),
                        tail: tail.as_f64(),
                    });
                }
                return Err(QuadError::MaxDepth {
                    value: estimate.as_f64(),
                    error: diff.as_f64(),
                });
            }
        }
        previous = Some(estimate);
    }
    unreachable!("loop returns at max_level")
}
