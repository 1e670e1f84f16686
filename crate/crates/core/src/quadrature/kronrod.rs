use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{Integral, QuadError, QuadSpec};
use crate::scalar::Scalar;

// 21-point Kronrod extension of the 10-point Gauss rule (QUADPACK qk21).
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_119_677_280,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];
// Gauss weights for XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

// Hard cap on the number of live subintervals.
const MAX_SEGMENTS: usize = 20_000;

#[derive(Debug, Clone, Copy)]
struct Segment<F> {
    a: F,
    b: F,
    value: F,
    error: F,
    depth: u32,
}

impl<F: Scalar> PartialEq for Segment<F> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<F: Scalar> Eq for Segment<F> {}
impl<F: Scalar> PartialOrd for Segment<F> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<F: Scalar> Ord for Segment<F> {
    // Largest error first; ties broken by position so the order is total.
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .partial_cmp(&other.error)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.a.partial_cmp(&self.a).unwrap_or(Ordering::Equal))
    }
}

/// One 21-point panel: returns (Kronrod value, rescaled error estimate).
pub(super) fn single_panel<F, G>(f: &mut G, a: F, b: F) -> Result<(F, F), QuadError>
where
    F: Scalar,
    G: FnMut(F) -> F,
{
    let half = F::lit(0.5);
    let center = half * (a + b);
    let half_len = half * (b - a);
    let mut eval = |x: F| {
        let y = f(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(QuadError::NonFinite { at: x.as_f64() })
        }
    };

    let f_center = eval(center)?;
    let mut res_k = f_center * F::lit(WGK[10]);
    let mut res_g = F::zero();
    let mut res_abs = res_k.abs();
    let mut fv1 = [F::zero(); 10];
    let mut fv2 = [F::zero(); 10];
    for j in 0..10 {
        let dx = half_len * F::lit(XGK[j]);
        let y1 = eval(center - dx)?;
        let y2 = eval(center + dx)?;
        fv1[j] = y1;
        fv2[j] = y2;
        let w = F::lit(WGK[j]);
        res_k = res_k + w * (y1 + y2);
        res_abs = res_abs + w * (y1.abs() + y2.abs());
        if j % 2 == 1 {
            res_g = res_g + F::lit(WG[j / 2]) * (y1 + y2);
        }
    }
    let mean = res_k * half;
    let mut res_asc = F::lit(WGK[10]) * (f_center - mean).abs();
    for j in 0..10 {
        res_asc = res_asc + F::lit(WGK[j]) * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let scale = half_len.abs();
    let value = res_k * half_len;
    let res_abs = res_abs * scale;
    let res_asc = res_asc * scale;
    let mut err = ((res_k - res_g) * half_len).abs();
    if res_asc != F::zero() && err != F::zero() {
        let ratio = (F::lit(200.0) * err / res_asc).powf(F::lit(1.5));
        err = if ratio < F::one() { res_asc * ratio } else { res_asc };
    }
    let floor = F::lit(50.0) * F::epsilon() * res_abs;
    if res_abs > F::min_positive_value() / (F::lit(50.0) * F::epsilon()) && floor > err {
        err = floor;
    }
    Ok((value, err))
}

/// Globally adaptive bisection: always refines the panel with the largest
/// error estimate until the summed error meets the tolerance.
pub(super) fn adaptive<F, G>(mut f: G, a: F, b: F, spec: &QuadSpec<F>) -> Result<Integral<F>, QuadError>
where
    F: Scalar,
    G: FnMut(F) -> F,
{
    let (value, error) = single_panel(&mut f, a, b)?;
    let mut evaluations = 21;
    let mut heap = BinaryHeap::new();
    heap.push(Segment {
        a,
        b,
        value,
        error,
        depth: 0,
    });
    loop {
        let (total, total_err) = heap
            .iter()
            .fold((F::zero(), F::zero()), |(v, e), s| (v + s.value, e + s.error));
        if total_err <= spec.tolerance(total) {
            return Ok(Integral {
                value: total,
                error: total_err,
                evaluations,
            });
        }
        let worst = *heap.peek().expect("at least one segment");
        let mid = F::lit(0.5) * (worst.a + worst.b);
        if worst.depth >= spec.max_depth || heap.len() >= MAX_SEGMENTS || mid <= worst.a || mid >= worst.b {
            return Err(QuadError::MaxDepth {
                value: total.as_f64(),
                error: total_err.as_f64(),
            });
        }
        heap.pop();
        let (v1, e1) = single_panel(&mut f, worst.a, mid)?;
        let (v2, e2) = single_panel(&mut f, mid, worst.b)?;
        evaluations += 42;
        let depth = worst.depth + 1;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
            depth,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
            depth,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_weights_sum_to_two() {
        let s: f64 = WGK[..10].iter().sum::<f64>() * 2.0 + WGK[10];
        assert!((s - 2.0).abs() < 1e-14);
        let g: f64 = WG.iter().sum::<f64>() * 2.0;
        assert!((g - 2.0).abs() < 1e-14);
    }

    #[test]
    fn single_panel_is_exact_for_low_degree() {
        let mut f = |x: f64| 3.0 * x.powi(5) - x.powi(2) + 7.0;
        let (v, _) = single_panel(&mut f, -1.0, 2.0).unwrap();
        let exact = 0.5 * (64.0 - 1.0) - (8.0 + 1.0) / 3.0 + 21.0;
        assert!((v - exact).abs() < 1e-12);
    }
}
