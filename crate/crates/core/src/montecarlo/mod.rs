//! Seeded Monte-Carlo estimators.
//!
//! Every drop (or run) draws from its own ChaCha8 stream: the master seed
//! selects the key and the drop index the stream, so results do not depend on
//! how rayon schedules the work. Per-drop outcomes are collected in index
//! order before aggregation.

mod association;
mod handoff;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{AntennaPattern, NetworkModel};
use crate::error::{Error, Result};
use crate::geometry::sample_exponent;
use crate::propagation::{argmax, count_above, sinr_from_powers, GainSampler};

pub use association::{mc_association, mc_agreement_table, AgreementRow, AssociationEstimate, BEAM_PAIRS_DEG};
pub use handoff::{
    mc_handoff_probability, mc_handoff_probability_both, mc_handoff_probability_curve, mc_handoff_rate, HandoffCounting, HandoffEvent,
    HandoffRate, HandoffTrace,
};

const Z95: f64 = 1.959_963_984_540_054;

/// A Monte-Carlo result with its 95% confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub half_width: f64,
    pub lower: f64,
    pub upper: f64,
    pub std_error: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Estimate {
    /// Proportion `successes / trials` with a Wilson score interval.
    pub fn proportion(successes: usize, trials: usize, seed: u64) -> Self {
        if trials == 0 {
            return Self {
                value: f64::NAN,
                half_width: f64::NAN,
                lower: 0.0,
                upper: 1.0,
                std_error: f64::NAN,
                samples: 0,
                seed,
            };
        }
        let n = trials as f64;
        let p = successes as f64 / n;
        let z2 = Z95 * Z95;
        let denom = 1.0 + z2 / n;
        let centre = (p + z2 / (2.0 * n)) / denom;
        let half_width = Z95 / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
        Self {
            value: p,
            half_width,
            lower: if successes == 0 { 0.0 } else { (centre - half_width).max(0.0) },
            upper: if successes == trials { 1.0 } else { (centre + half_width).min(1.0) },
            std_error: (p * (1.0 - p) / n).sqrt(),
            samples: trials,
            seed,
        }
    }

    /// Sample mean with a normal-approximation interval.
    pub fn mean(values: &[f64], seed: u64) -> Self {
        let n = values.len();
        if n == 0 {
            return Self::proportion(0, 0, seed);
        }
        let nf = n as f64;
        let mean = values.iter().sum::<f64>() / nf;
        let var = if n > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0)
        } else {
            0.0
        };
        let std_error = (var / nf).sqrt();
        let half_width = Z95 * std_error;
        Self {
            value: mean,
            half_width,
            lower: mean - half_width,
            upper: mean + half_width,
            std_error,
            samples: n,
            seed,
        }
    }

    /// `|reference − value| ≤ max(floor, k·std_error)`.
    pub fn agrees_with(&self, reference: f64, k: f64, floor: f64) -> bool {
        (reference - self.value).abs() <= floor.max(k * self.std_error)
    }
}

/// Drop-count, seed and window shared by the estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McSettings {
    pub drops: usize,
    pub seed: u64,
    /// Radius of the simulated disc; `None` picks [`coverage_window`].
    pub window: Option<f64>,
}

impl McSettings {
    pub fn new(drops: usize, seed: u64) -> Self {
        Self {
            drops,
            seed,
            window: None,
        }
    }

    pub fn with_window(mut self, radius: f64) -> Self {
        self.window = Some(radius);
        self
    }

    fn radius(&self, model: &NetworkModel<f64>) -> Result<f64> {
        let r = self.window.unwrap_or_else(|| coverage_window(model));
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::invalid(format!("simulation window radius {r} must be > 0")));
        }
        Ok(r)
    }

    fn check(&self, minimum: usize) -> Result<()> {
        if self.drops < minimum {
            return Err(Error::invalid(format!("at least {minimum} drops required, got {}", self.drops)));
        }
        Ok(())
    }
}

/// Disc radius for coverage-type estimators: the distance beyond which the
/// mean far-field interference falls below `1e-3` of the level at one cell
/// radius, clamped to `[20, 180]` cell radii.
pub fn coverage_window(model: &NetworkModel<f64>) -> f64 {
    let (lo, _) = model.exponent_support();
    let factor = if lo > 2.0 { 1e-3_f64.powf(1.0 / (2.0 - lo)) } else { f64::INFINITY };
    model.cell_radius() * factor.clamp(20.0, 180.0)
}

/// Independent RNG for drop `index` under master `seed`.
pub fn drop_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// One station→origin link of a PPP drop. The exponent is the one of the
/// section that faces the origin, which has the same law as a fresh draw.
#[derive(Debug, Clone, Copy)]
pub(crate) struct OriginLink {
    pub distance: f64,
    pub exponent: f64,
    /// Uniform variate mapped to a gain through a [`GainSampler`].
    pub gain_u: f64,
    pub fade: f64,
}

impl OriginLink {
    #[inline]
    pub fn path(&self) -> f64 {
        self.fade * self.distance.powf(-self.exponent)
    }
}

pub(crate) fn sample_origin_links<R: Rng + ?Sized>(
    model: &NetworkModel<f64>,
    radius: f64,
    rng: &mut R,
    out: &mut Vec<OriginLink>,
) {
    out.clear();
    let mean = model.lambda * std::f64::consts::PI * radius * radius;
    let count = rand_distr::Poisson::new(mean)
        .map(|p| rand_distr::Distribution::sample(&p, rng) as usize)
        .unwrap_or(0);
    let (lo, hi) = model.exponent_support();
    for _ in 0..count {
        let distance = radius * rng.random::<f64>().sqrt();
        let exponent = sample_exponent(lo, hi, rng);
        let gain_u = rng.random::<f64>();
        let fade: f64 = rng.sample(Exp1);
        out.push(OriginLink {
            distance,
            exponent,
            gain_u,
            fade,
        });
    }
}

/// Per-station SINRs of the links in `links` for the gains of `sampler`.
pub(crate) fn origin_sinr(
    links: &[OriginLink],
    sampler: &GainSampler,
    model: &NetworkModel<f64>,
    desired_gain: f64,
    powers: &mut Vec<f64>,
    paths: &mut Vec<f64>,
    sinr: &mut Vec<f64>,
) {
    paths.clear();
    powers.clear();
    for l in links {
        let p = l.path();
        paths.push(p);
        powers.push(model.tx_power * sampler.gain_for(l.gain_u) * p);
    }
    sinr_from_powers(powers, paths, model.noise_power, model.tx_power, desired_gain, sinr);
}

/// Max-SINR coverage at each threshold of `taus`, all from the same drops.
pub fn mc_coverage_curve(
    taus: &[f64],
    model: &NetworkModel<f64>,
    antenna: &AntennaPattern<f64>,
    settings: McSettings,
) -> Result<Vec<Estimate>> {
    crate::config::validate(model, antenna).into_result()?;
    settings.check(1)?;
    let radius = settings.radius(model)?;
    let sampler = GainSampler::new(antenna);
    let desired = antenna.desired_gain();
    let unique = antenna.unique_coverage_threshold();
    let best: Vec<f64> = (0..settings.drops)
        .into_par_iter()
        .map_init(
            || (Vec::new(), Vec::new(), Vec::new(), Vec::new()),
            |(links, powers, paths, sinr), i| {
                let mut rng = drop_rng(settings.seed, i as u64);
                sample_origin_links(model, radius, &mut rng, links);
                if links.is_empty() {
                    return 0.0;
                }
                origin_sinr(links, &sampler, model, desired, powers, paths, sinr);
                debug_assert!(count_above(sinr, unique * (1.0 + 1e-12)) <= 1);
                sinr[argmax(sinr)]
            },
        )
        .collect();
    Ok(taus
        .iter()
        .map(|&tau| Estimate::proportion(best.iter().filter(|&&b| b > tau).count(), best.len(), settings.seed))
        .collect())
}

/// Probability that the best SINR exceeds `tau`.
pub fn mc_coverage(
    tau: f64,
    model: &NetworkModel<f64>,
    antenna: &AntennaPattern<f64>,
    drops: usize,
    seed: u64,
) -> Result<Estimate> {
    if drops < 100 {
        return Err(Error::invalid(format!("at least 100 drops required, got {drops}")));
    }
    Ok(mc_coverage_curve(&[tau], model, antenna, McSettings::new(drops, seed))?[0])
}

/// Brute-force `E[e^{−sI}]` for the interference at the origin.
pub fn mc_interference_laplace(
    s: f64,
    model: &NetworkModel<f64>,
    antenna: &AntennaPattern<f64>,
    settings: McSettings,
) -> Result<Estimate> {
    settings.check(1)?;
    let radius = settings.radius(model)?;
    let sampler = GainSampler::new(antenna);
    let values: Vec<f64> = (0..settings.drops)
        .into_par_iter()
        .map_init(Vec::new, |links, i| {
            let mut rng = drop_rng(settings.seed, i as u64);
            sample_origin_links(model, radius, &mut rng, links);
            let total: f64 = links
                .iter()
                .map(|l| model.tx_power * sampler.gain_for(l.gain_u) * l.path())
                .sum();
            (-s * total).exp()
        })
        .collect();
    Ok(Estimate::mean(&values, settings.seed))
}

/// Outcome of the unique-coverage check over many snapshots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub tau: f64,
    pub snapshots: usize,
    /// Snapshots with two or more stations above `tau`.
    pub violations: usize,
    pub max_count: usize,
}

/// Counts snapshots in which more than one station exceeds `tau`.
pub fn mc_unique_coverage(
    tau: f64,
    model: &NetworkModel<f64>,
    antenna: &AntennaPattern<f64>,
    settings: McSettings,
) -> Result<UniquenessReport> {
    settings.check(1)?;
    let radius = settings.radius(model)?;
    let sampler = GainSampler::new(antenna);
    let desired = antenna.desired_gain();
    let counts: Vec<usize> = (0..settings.drops)
        .into_par_iter()
        .map_init(
            || (Vec::new(), Vec::new(), Vec::new(), Vec::new()),
            |(links, powers, paths, sinr), i| {
                let mut rng = drop_rng(settings.seed, i as u64);
                sample_origin_links(model, radius, &mut rng, links);
                origin_sinr(links, &sampler, model, desired, powers, paths, sinr);
                count_above(sinr, tau)
            },
        )
        .collect();
    Ok(UniquenessReport {
        tau,
        snapshots: counts.len(),
        violations: counts.iter().filter(|&&c| c >= 2).count(),
        max_count: counts.iter().copied().max().unwrap_or(0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_interval_brackets_estimate() {
        let e = Estimate::proportion(30, 100, 1);
        assert_eq!(e.value, 0.3);
        assert!(e.lower < 0.3 && e.upper > 0.3);
        assert!((e.half_width - 0.0887).abs() < 1e-3);
        let z = Estimate::proportion(0, 100, 1);
        assert_eq!(z.lower, 0.0);
        assert!(z.upper > 0.0 && z.upper < 0.05);
    }

    #[test]
    fn mean_estimate() {
        let e = Estimate::mean(&[1.0, 2.0, 3.0, 4.0], 0);
        assert_eq!(e.value, 2.5);
        assert!((e.std_error - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert!(e.agrees_with(2.6, 3.0, 0.0));
        assert!(!e.agrees_with(10.0, 3.0, 0.0));
    }

    #[test]
    fn drop_streams_are_distinct_and_reproducible() {
        let a: u64 = drop_rng(5, 0).random();
        let b: u64 = drop_rng(5, 1).random();
        let c: u64 = drop_rng(5, 0).random();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn window_grows_as_exponents_approach_two() {
        let m = NetworkModel::<f64>::default();
        let r0 = coverage_window(&m);
        assert!((r0 / m.cell_radius() - 31.62).abs() < 0.01);
        let r1 = coverage_window(&m.with_sigma(0.8));
        assert!((r1 / m.cell_radius() - 180.0).abs() < 1e-9);
    }

    #[test]
    fn coverage_limits() {
        let m = NetworkModel::<f64>::default();
        let a = AntennaPattern::<f64>::default();
        let s = McSettings::new(200, 3).with_window(500.0);
        let e = mc_coverage_curve(&[0.0, f64::INFINITY], &m, &a, s).unwrap();
        assert_eq!(e[0].value, 1.0);
        assert_eq!(e[1].value, 0.0);
        let sparse = m.with_lambda(1e-12);
        let e = mc_coverage_curve(&[1.0], &sparse, &a, s).unwrap();
        assert_eq!(e[0].value, 0.0);
        assert!(mc_coverage(1.0, &m, &a, 10, 0).is_err());
    }

    #[test]
    fn coverage_is_deterministic() {
        let m = NetworkModel::<f64>::default();
        let a = AntennaPattern::<f64>::default();
        let s = McSettings::new(300, 11).with_window(600.0);
        let x = mc_coverage_curve(&[10.0, 100.0], &m, &a, s).unwrap();
        let y = mc_coverage_curve(&[10.0, 100.0], &m, &a, s).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn laplace_matches_isotropic_closed_form() {
        let m = NetworkModel::<f64>::default();
        let a = AntennaPattern::<f64>::default();
        let s = 1e-3 / m.tx_power;
        let an = crate::analytic::interference_laplace(s, &m, &a).unwrap();
        let mc = mc_interference_laplace(s, &m, &a, McSettings::new(4000, 2).with_window(1000.0)).unwrap();
        assert!((mc.value - an).abs() < 0.01 * an, "{} vs {an}", mc.value);
    }

    #[test]
    fn unique_coverage_above_gain_ratio() {
        let m = NetworkModel::<f64>::default().with_sigma(0.5);
        let a = AntennaPattern::<f64>::default();
        let tau = 1.01 * a.unique_coverage_threshold();
        let r = mc_unique_coverage(tau, &m, &a, McSettings::new(2000, 4).with_window(800.0)).unwrap();
        assert_eq!(r.violations, 0);
        // below the ratio, several stations may clear a low threshold
        let low = mc_unique_coverage(0.01, &m, &a, McSettings::new(200, 4).with_window(800.0)).unwrap();
        assert!(low.max_count >= 2);
    }
}
