use crate::scalar::Scalar;

/// Piecewise Chebyshev interpolant on `[lo, hi]` split into equal panels.
#[derive(Debug, Clone)]
pub(crate) struct PiecewiseChebyshev<F> {
    lo: F,
    width: F,
    coeffs: Vec<Vec<F>>,
}

/// Chebyshev points of the first kind mapped to `[a, b]`.
pub(crate) fn nodes<F: Scalar>(a: F, b: F, n: usize) -> Vec<F> {
    let half = F::lit(0.5);
    let (mid, rad) = (half * (a + b), half * (b - a));
    (0..n)
        .map(|k| {
            let t = (F::PI() * (F::from_usize_lossy(k) + half) / F::from_usize_lossy(n)).cos();
            mid + rad * t
        })
        .collect()
}

fn coefficients<F: Scalar>(values: &[F]) -> Vec<F> {
    let n = values.len();
    let nf = F::from_usize_lossy(n);
    let half = F::lit(0.5);
    (0..n)
        .map(|j| {
            let jf = F::from_usize_lossy(j);
            let s = values.iter().enumerate().fold(F::zero(), |acc, (k, &v)| {
                acc + v * (F::PI() * jf * (F::from_usize_lossy(k) + half) / nf).cos()
            });
            let c = F::lit(2.0) * s / nf;
            if j == 0 {
                c * half
            } else {
                c
            }
        })
        .collect()
}

impl<F: Scalar> PiecewiseChebyshev<F> {
    /// Builds the interpolant from values at [`nodes`] of each panel, panel by
    /// panel in increasing order.
    pub(crate) fn from_panel_values(lo: F, hi: F, panel_values: Vec<Vec<F>>) -> Self {
        let width = (hi - lo) / F::from_usize_lossy(panel_values.len());
        Self {
            lo,
            width,
            coeffs: panel_values.iter().map(|v| coefficients(v)).collect(),
        }
    }

    pub(crate) fn panel_bounds(lo: F, hi: F, panels: usize) -> Vec<(F, F)> {
        let width = (hi - lo) / F::from_usize_lossy(panels);
        (0..panels)
            .map(|p| {
                let a = lo + width * F::from_usize_lossy(p);
                (a, if p + 1 == panels { hi } else { a + width })
            })
            .collect()
    }

    pub(crate) fn contains(&self, x: F) -> bool {
        x >= self.lo && x <= self.lo + self.width * F::from_usize_lossy(self.coeffs.len())
    }

    pub(crate) fn eval(&self, x: F) -> F {
        let pos = ((x - self.lo) / self.width).floor();
        let p = pos.to_usize().unwrap_or(0).min(self.coeffs.len() - 1);
        let a = self.lo + self.width * F::from_usize_lossy(p);
        let t = F::lit(2.0) * (x - a) / self.width - F::one();
        // Clenshaw recurrence
        let c = &self.coeffs[p];
        let (mut b1, mut b2) = (F::zero(), F::zero());
        for &ck in c.iter().skip(1).rev() {
            let b0 = F::lit(2.0) * t * b1 - b2 + ck;
            b2 = b1;
            b1 = b0;
        }
        t * b1 - b2 + c[0]
    }
}
