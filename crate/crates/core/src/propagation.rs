//! Received power and SINR of every station at a user location.
//!
//! A candidate serving link always gets the beam-aligned gain `M_t·M_r`; the
//! same station appears in other candidates' interference with a random gain
//! from the four-point sectored-antenna distribution.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::config::{AntennaPattern, GainLevel, NetworkModel};
use crate::error::{Error, Result};
use crate::geometry::{Deployment, Point2};

/// How interferer gains are drawn within one snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GainSharing {
    /// One gain per station, used by every candidate it interferes with.
    #[default]
    Shared,
    /// Fresh gains for every (candidate, interferer) pair.
    PerCandidate,
}

/// Inverse-CDF sampler over the four antenna gain levels.
#[derive(Debug, Clone, Copy)]
pub struct GainSampler {
    levels: [f64; 4],
    cumulative: [f64; 4],
}

impl GainSampler {
    pub fn new(antenna: &AntennaPattern<f64>) -> Self {
        Self::from_levels(&antenna.gain_distribution())
    }

    pub fn from_levels(dist: &[GainLevel<f64>; 4]) -> Self {
        let mut cumulative = [0.0; 4];
        let mut acc = 0.0;
        for (c, l) in cumulative.iter_mut().zip(dist) {
            acc += l.probability;
            *c = acc;
        }
        cumulative[3] = f64::INFINITY;
        Self {
            levels: dist.map(|l| l.gain),
            cumulative,
        }
    }

    /// Maps a uniform variate in `[0, 1)` to a gain.
    #[inline]
    pub fn gain_for(&self, u: f64) -> f64 {
        let k = self.cumulative.iter().position(|&c| u < c).unwrap_or(3);
        self.levels[k]
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.gain_for(rng.random::<f64>())
    }
}

/// One station→user link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkSample {
    pub station: usize,
    pub distance: f64,
    pub exponent: f64,
    /// Realized antenna gain when this link interferes.
    pub gain: f64,
    /// Rayleigh power gain.
    pub fade: f64,
    /// `P_T · gain · fade · distance^(−exponent)`, mW.
    pub rx_power: f64,
}

/// SINR of every station at one user location.
#[derive(Debug, Clone, PartialEq)]
pub struct SinrSnapshot {
    pub links: Vec<LinkSample>,
    pub noise: f64,
    pub sinr: Vec<f64>,
}

/// Computes `SINR_i = P_T·G_d·h_i·r_i^−α_i / (Σ_{j≠i} P_j + σ_n²)` for all `i`,
/// where `rx_power` already carries the interferer gain.
///
/// The interference sum excludes the strongest link by accumulation rather
/// than subtraction, so the dominant station keeps full precision.
pub fn sinr_from_powers(rx_power: &[f64], path: &[f64], noise: f64, tx_power: f64, desired_gain: f64, out: &mut Vec<f64>) {
    out.clear();
    if rx_power.is_empty() {
        return;
    }
    let strongest = argmax(rx_power);
    let others: f64 = rx_power
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != strongest)
        .map(|(_, p)| p)
        .sum();
    let top = rx_power[strongest];
    out.extend(rx_power.iter().zip(path).enumerate().map(|(i, (&p, &l))| {
        let interference = if i == strongest { others } else { others - p + top };
        tx_power * desired_gain * l / (interference.max(0.0) + noise)
    }));
}

/// Index of the largest value; ties resolve to the lowest index.
#[inline]
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Draws fading and gains for every station of `dep` and evaluates the SINR
/// seen at `user`.
pub fn sample_snapshot_with<R: Rng + ?Sized>(
    dep: &Deployment,
    user: &Point2,
    model: &NetworkModel<f64>,
    antenna: &AntennaPattern<f64>,
    sharing: GainSharing,
    rng: &mut R,
) -> Result<SinrSnapshot> {
    if dep.is_empty() {
        return Err(Error::invalid("deployment has no stations"));
    }
    if user.norm() > dep.radius {
        return Err(Error::invalid(format!(
            "user at distance {} lies outside the deployment disc of radius {}",
            user.norm(),
            dep.radius
        )));
    }
    let sampler = GainSampler::new(antenna);
    let desired = antenna.desired_gain();
    let mut links = Vec::with_capacity(dep.len());
    for i in 0..dep.len() {
        let (distance, _, exponent) = dep.link_geometry(i, user)?;
        let gain = sampler.sample(rng);
        let fade: f64 = rng.sample(Exp1);
        let rx_power = model.tx_power * gain * fade * distance.powf(-exponent);
        links.push(LinkSample {
            station: i,
            distance,
            exponent,
            gain,
            fade,
            rx_power,
        });
    }
    let path: Vec<f64> = links.iter().map(|l| l.fade * l.distance.powf(-l.exponent)).collect();
    let mut sinr = Vec::with_capacity(links.len());
    match sharing {
        GainSharing::Shared => {
            let powers: Vec<f64> = links.iter().map(|l| l.rx_power).collect();
            sinr_from_powers(&powers, &path, model.noise_power, model.tx_power, desired, &mut sinr);
        }
        GainSharing::PerCandidate => {
            for (i, &l) in path.iter().enumerate() {
                let mut interference = 0.0;
                for (j, &lj) in path.iter().enumerate() {
                    if j != i {
                        interference += model.tx_power * sampler.sample(rng) * lj;
                    }
                }
                sinr.push(model.tx_power * desired * l / (interference + model.noise_power));
            }
        }
    }
    Ok(SinrSnapshot {
        links,
        noise: model.noise_power,
        sinr,
    })
}

/// [`sample_snapshot_with`] with shared gains and an RNG seeded from `seed`.
pub fn sample_snapshot(
    dep: &Deployment,
    user: &Point2,
    model: &NetworkModel<f64>,
    antenna: &AntennaPattern<f64>,
    seed: u64,
) -> Result<SinrSnapshot> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_snapshot_with(dep, user, model, antenna, GainSharing::Shared, &mut rng)
}

impl SinrSnapshot {
    /// The max-SINR station and its SINR.
    pub fn max_sinr_association(&self) -> Option<(usize, f64)> {
        if self.sinr.is_empty() {
            return None;
        }
        let k = argmax(&self.sinr);
        Some((k, self.sinr[k]))
    }

    /// The station with the largest received power.
    pub fn max_power_station(&self) -> Option<usize> {
        if self.links.is_empty() {
            return None;
        }
        let powers: Vec<f64> = self.links.iter().map(|l| l.rx_power).collect();
        Some(argmax(&powers))
    }

    /// Number of stations whose SINR exceeds `tau`.
    pub fn count_above(&self, tau: f64) -> usize {
        count_above(&self.sinr, tau)
    }

    /// `Σ_i 1/(1 + G_d/(G_i·SINR_i)) + σ_n²/(ΣP + σ_n²)`, which equals one for
    /// any consistent snapshot.
    pub fn power_share_identity(&self, desired_gain: f64) -> f64 {
        let total: f64 = self.links.iter().map(|l| l.rx_power).sum();
        let shares: f64 = self
            .links
            .iter()
            .zip(&self.sinr)
            .map(|(l, &s)| 1.0 / (1.0 + desired_gain / (l.gain * s)))
            .sum();
        shares + self.noise / (total + self.noise)
    }

    /// Debug dump: `station,r,alpha,G,h,P,SINR`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "station,r,alpha,G,h,P,SINR")?;
        for (l, s) in self.links.iter().zip(&self.sinr) {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                l.station, l.distance, l.exponent, l.gain, l.fade, l.rx_power, s
            )?;
        }
        Ok(())
    }
}

#[inline]
pub fn count_above(sinr: &[f64], tau: f64) -> usize {
    sinr.iter().filter(|&&s| s > tau).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{sample_deployment, PolarPoint};

    fn single(r: f64, alpha: f64) -> Deployment {
        Deployment::from_parts(vec![PolarPoint::new(r, 0.0)], vec![vec![alpha]], 1000.0, 0).unwrap()
    }

    #[test]
    fn lone_station_is_noise_limited() {
        let dep = single(10.0, 4.0);
        let powers = [1000.0 * 100.0 * 1e-4];
        let path = [1e-4];
        let mut out = Vec::new();
        sinr_from_powers(&powers, &path, 1e-6, 1000.0, 100.0, &mut out);
        assert!((out[0] - 100.0 * 1000.0 * 1e-4 / 1e-6).abs() < 1e-3);

        let model = NetworkModel::<f64>::default().with_noise_power(1e-6);
        let snap = sample_snapshot(&dep, &Point2::ORIGIN, &model, &AntennaPattern::default(), 1).unwrap();
        let h = snap.links[0].fade;
        assert!(((snap.sinr[0] - 1e7 * h) / snap.sinr[0]).abs() < 1e-12);
    }

    #[test]
    fn symmetric_pair_has_equal_sinr() {
        let powers = [2.0, 2.0];
        let path = [0.5, 0.5];
        let mut out = Vec::new();
        sinr_from_powers(&powers, &path, 0.1, 1.0, 100.0, &mut out);
        assert_eq!(out[0], out[1]);
    }

    #[test]
    fn association_picks_argmax_and_lowest_tie() {
        let snap = SinrSnapshot {
            links: vec![],
            noise: 0.0,
            sinr: vec![0.1, 5.0, 0.3],
        };
        assert_eq!(snap.max_sinr_association(), Some((1, 5.0)));
        let tie = SinrSnapshot {
            links: vec![],
            noise: 0.0,
            sinr: vec![2.0, 2.0],
        };
        assert_eq!(tie.max_sinr_association().unwrap().0, 0);
        assert_eq!(snap.count_above(0.0), 3);
        assert_eq!(snap.count_above(f64::INFINITY), 0);
    }

    #[test]
    fn isotropic_equal_gain_association_is_nearest() {
        let model = NetworkModel::<f64>::default();
        let dep = sample_deployment(&model, 500.0, 5).unwrap();
        let user = Point2::ORIGIN;
        // with fades fixed to one, the strongest link is the nearest
        let path: Vec<f64> = (0..dep.len())
            .map(|i| {
                let (d, _, a) = dep.link_geometry(i, &user).unwrap();
                d.powf(-a)
            })
            .collect();
        let powers: Vec<f64> = path.iter().map(|l| model.tx_power * 100.0 * l).collect();
        let mut sinr = Vec::new();
        sinr_from_powers(&powers, &path, model.noise_power, model.tx_power, 100.0, &mut sinr);
        let nearest = (0..dep.len())
            .min_by(|&a, &b| dep.stations[a].r.partial_cmp(&dep.stations[b].r).unwrap())
            .unwrap();
        assert_eq!(argmax(&sinr), nearest);
    }

    #[test]
    fn empty_deployment_and_outside_user_rejected() {
        let model = NetworkModel::<f64>::default();
        let empty = Deployment::from_parts(vec![], vec![], 100.0, 0).unwrap();
        assert!(sample_snapshot(&empty, &Point2::ORIGIN, &model, &AntennaPattern::default(), 0).is_err());
        let dep = single(10.0, 4.0);
        assert!(sample_snapshot(&dep, &Point2::new(2000.0, 0.0), &model, &AntennaPattern::default(), 0).is_err());
    }

    #[test]
    fn power_share_identity_and_unique_winner_per_snapshot() {
        let antenna = AntennaPattern::<f64>::default();
        let threshold = 1.01 * antenna.unique_coverage_threshold();
        for seed in 0..200 {
            let model = NetworkModel::<f64>::default().with_sigma(0.6).with_sections(5);
            let dep = sample_deployment(&model, 600.0, seed).unwrap();
            let snap = sample_snapshot(&dep, &Point2::new(3.0, -4.0), &model, &antenna, seed + 1000).unwrap();
            let id = snap.power_share_identity(antenna.desired_gain());
            assert!((id - 1.0).abs() < 1e-9, "seed {seed}: {id}");
            assert!(snap.count_above(threshold) <= 1);
        }
    }

    #[test]
    fn per_candidate_gains_still_satisfy_bounds() {
        let model = NetworkModel::<f64>::default();
        let antenna = AntennaPattern::<f64>::default();
        let dep = sample_deployment(&model, 300.0, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let snap =
            sample_snapshot_with(&dep, &Point2::ORIGIN, &model, &antenna, GainSharing::PerCandidate, &mut rng).unwrap();
        assert_eq!(snap.sinr.len(), dep.len());
        assert!(snap.sinr.iter().all(|s| s.is_finite() && *s > 0.0));
    }

    #[test]
    fn gain_sampler_inverse_cdf() {
        let s = GainSampler::new(&AntennaPattern::default());
        assert_eq!(s.gain_for(0.0), 100.0);
        assert_eq!(s.gain_for(0.004), 10.0);
        assert_eq!(s.gain_for(0.1), 10.0);
        assert_eq!(s.gain_for(0.5), 1.0);
        assert_eq!(s.gain_for(0.999_999), 1.0);
    }

    #[test]
    fn csv_dump_has_row_per_station() {
        let dep = single(10.0, 4.0);
        let snap = sample_snapshot(&dep, &Point2::ORIGIN, &NetworkModel::default(), &AntennaPattern::default(), 3).unwrap();
        let mut buf = Vec::new();
        snap.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with("station,r,alpha,G,h,P,SINR"));
    }
}
