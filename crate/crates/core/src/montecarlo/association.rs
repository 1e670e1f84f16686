use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{AntennaPattern, NetworkModel};
use crate::error::{Error, Result};
use crate::geometry::sample_exponent;
use crate::propagation::{argmax, GainSampler};

use super::{drop_rng, origin_sinr, sample_origin_links, Estimate, McSettings, OriginLink};

/// The six `(φ_t, φ_r)` pairs, in degrees, of the agreement table.
pub const BEAM_PAIRS_DEG: [(f64, f64); 6] = [(7.0, 60.0), (20.0, 60.0), (60.0, 60.0), (60.0, 20.0), (20.0, 10.0), (7.0, 10.0)];

/// Association of a probe station planted at a fixed distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssociationEstimate {
    pub r: f64,
    /// Pr{probe has the largest SINR}.
    pub max_sinr: Estimate,
    /// Pr{probe has the largest received power}.
    pub max_power: Estimate,
    /// Pr{largest SINR | largest received power}.
    pub agreement: Estimate,
}

/// One column of the agreement table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgreementRow {
    pub beam_tx_deg: f64,
    pub beam_rx_deg: f64,
    pub agreement: Estimate,
    /// `(1 − φ_t/2π)(1 − φ_r/2π)`.
    pub bound: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Outcome {
    max_sinr: bool,
    max_power: bool,
}

fn probe_link<R: Rng + ?Sized>(r: f64, model: &NetworkModel<f64>, rng: &mut R) -> OriginLink {
    let (lo, hi) = model.exponent_support();
    OriginLink {
        distance: r,
        exponent: sample_exponent(lo, hi, rng),
        gain_u: rng.random(),
        fade: rng.sample(Exp1),
    }
}

/// Shared drops for all antenna variants: the probe is link 0.
fn outcomes(
    r: f64,
    model: &NetworkModel<f64>,
    variants: &[AntennaPattern<f64>],
    settings: McSettings,
) -> Result<Vec<Vec<Outcome>>> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::invalid(format!("probe distance r = {r} must be > 0")));
    }
    settings.check(1)?;
    for a in variants {
        crate::config::validate(model, a).into_result()?;
    }
    let radius = settings.radius(model)?.max(4.0 * r);
    let samplers: Vec<GainSampler> = variants.iter().map(GainSampler::new).collect();
    Ok((0..settings.drops)
        .into_par_iter()
        .map_init(
            || (Vec::new(), Vec::new(), Vec::new(), Vec::new()),
            |(links, powers, paths, sinr), i| {
                let mut rng = drop_rng(settings.seed, i as u64);
                let probe = probe_link(r, model, &mut rng);
                sample_origin_links(model, radius, &mut rng, links);
                links.insert(0, probe);
                variants
                    .iter()
                    .zip(&samplers)
                    .map(|(a, s)| {
                        origin_sinr(links, s, model, a.desired_gain(), powers, paths, sinr);
                        Outcome {
                            max_sinr: argmax(sinr) == 0,
                            max_power: argmax(powers) == 0,
                        }
                    })
                    .collect()
            },
        )
        .collect())
}

fn summarize(r: f64, column: impl Iterator<Item = Outcome> + Clone, seed: u64) -> AssociationEstimate {
    let n = column.clone().count();
    let sinr = column.clone().filter(|o| o.max_sinr).count();
    let power = column.clone().filter(|o| o.max_power).count();
    let both = column.filter(|o| o.max_power && o.max_sinr).count();
    AssociationEstimate {
        r,
        max_sinr: Estimate::proportion(sinr, n, seed),
        max_power: Estimate::proportion(power, n, seed),
        agreement: Estimate::proportion(both, power, seed),
    }
}

/// Plants a probe station at distance `r` with a random exponent among the
/// PPP and estimates how often it wins under max-SINR and max-power
/// association.
pub fn mc_association(
    r: f64,
    model: &NetworkModel<f64>,
    antenna: &AntennaPattern<f64>,
    settings: McSettings,
) -> Result<AssociationEstimate> {
    let out = outcomes(r, model, std::slice::from_ref(antenna), settings)?;
    Ok(summarize(r, out.iter().map(|v| v[0]), settings.seed))
}

/// Pr{largest SINR | largest power} for each `(φ_t, φ_r)` pair in degrees,
/// with the other antenna parameters from `antenna`. Variants share every
/// random draw.
pub fn mc_agreement_table(
    r: f64,
    beams_deg: &[(f64, f64)],
    model: &NetworkModel<f64>,
    antenna: &AntennaPattern<f64>,
    settings: McSettings,
) -> Result<Vec<AgreementRow>> {
    let variants: Vec<AntennaPattern<f64>> = beams_deg
        .iter()
        .map(|&(t, rx)| antenna.with_beams_deg(t, rx))
        .collect();
    let out = outcomes(r, model, &variants, settings)?;
    Ok(variants
        .iter()
        .zip(beams_deg)
        .enumerate()
        .map(|(k, (a, &(t, rx)))| AgreementRow {
            beam_tx_deg: t,
            beam_rx_deg: rx,
            agreement: summarize(r, out.iter().map(|v| v[k]), settings.seed).agreement,
            bound: a.max_power_agreement_bound(),
        })
        .collect())
}
