use std::f64::consts::{FRAC_PI_2, TAU};
use std::io::Write;

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::Movement;
use crate::config::{AntennaPattern, MobilityModel, NetworkModel};
use crate::error::{Error, Result};
use crate::geometry::{guard_width, walk_step, Deployment, Point2, UserState};
use crate::propagation::{argmax, sinr_from_powers, GainSampler};

use super::{drop_rng, Estimate, McSettings};

/// What counts as a handoff when Event A2 fires.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HandoffCounting {
    /// Every trigger counts, even if the best station is the current one.
    #[default]
    EveryTrigger,
    /// Only triggers that move the user to a different station count.
    ChangedServer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HandoffEvent {
    pub time: f64,
    pub from: usize,
    pub to: usize,
    /// Serving SINR that fired the trigger.
    pub sinr: f64,
}

/// Handoff events of one random-walk run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct HandoffTrace {
    pub events: Vec<HandoffEvent>,
    pub handoff_count: usize,
    pub duration: f64,
}

impl HandoffTrace {
    pub fn rate(&self) -> f64 {
        self.handoff_count as f64 / self.duration
    }

    /// `time,from,to,sinr` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "time,from,to,sinr")?;
        for e in &self.events {
            writeln!(out, "{},{},{},{}", e.time, e.from, e.to, e.sinr)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandoffRate {
    /// Handoffs per second, averaged over runs.
    pub rate: Estimate,
    pub traces: Vec<HandoffTrace>,
}

/// Fresh fading and interferer gains for every station at `user`.
struct Evaluator<'a> {
    dep: &'a Deployment,
    model: &'a NetworkModel<f64>,
    sampler: GainSampler,
    desired: f64,
    powers: Vec<f64>,
    paths: Vec<f64>,
    bearings: Vec<f64>,
}

impl<'a> Evaluator<'a> {
    fn new(dep: &'a Deployment, model: &'a NetworkModel<f64>, antenna: &AntennaPattern<f64>) -> Self {
        Self {
            dep,
            model,
            sampler: GainSampler::new(antenna),
            desired: antenna.desired_gain(),
            powers: Vec::with_capacity(dep.len()),
            paths: Vec::with_capacity(dep.len()),
            bearings: Vec::with_capacity(dep.len()),
        }
    }

    fn draw<R: Rng + ?Sized>(&mut self, user: &Point2, rng: &mut R) -> Result<()> {
        self.powers.clear();
        self.paths.clear();
        self.bearings.clear();
        for i in 0..self.dep.len() {
            let (d, bearing, alpha) = self.dep.link_geometry(i, user)?;
            let fade: f64 = rng.sample(Exp1);
            let g = self.sampler.sample(rng);
            let p = fade * d.powf(-alpha);
            self.paths.push(p);
            self.powers.push(self.model.tx_power * g * p);
            self.bearings.push(bearing);
        }
        Ok(())
    }

    fn serving_sinr(&self, k: usize) -> f64 {
        let total: f64 = self
            .powers
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != k)
            .map(|(_, p)| p)
            .sum();
        self.model.tx_power * self.desired * self.paths[k] / (total + self.model.noise_power)
    }

    fn best(&self, sinr: &mut Vec<f64>) -> usize {
        sinr_from_powers(
            &self.powers,
            &self.paths,
            self.model.noise_power,
            self.model.tx_power,
            self.desired,
            sinr,
        );
        argmax(sinr)
    }
}

/// A2 outcomes for every displacement and both movement cases from one drop.
fn handoff_drop<R: Rng + ?Sized>(
    vts: &[f64],
    model: &NetworkModel<f64>,
    antenna: &AntennaPattern<f64>,
    threshold: f64,
    radius: f64,
    seed: u64,
    rng: &mut R,
) -> Result<Option<Vec<[bool; 2]>>> {
    let dep = Deployment::sample(model, radius, seed, rng);
    if dep.is_empty() {
        return Ok(None);
    }
    let mut ev = Evaluator::new(&dep, model, antenna);
    let mut sinr = Vec::new();
    ev.draw(&Point2::ORIGIN, rng)?;
    let k = ev.best(&mut sinr);
    let heading = ev.bearings[k];
    let mut out = Vec::with_capacity(vts.len());
    for &vt in vts {
        let mut pair = [false; 2];
        for (slot, turn) in [0.0, FRAC_PI_2].into_iter().enumerate() {
            let h = heading + turn;
            let user = Point2::new(vt * h.cos(), vt * h.sin());
            ev.draw(&user, rng)?;
            pair[slot] = ev.serving_sinr(k) < threshold;
        }
        out.push(pair);
    }
    Ok(Some(out))
}

/// Event-A2 probability after each displacement in `vts` for one movement
/// case. Drops associate the user at the origin by max SINR, move it, re-draw
/// fading and interferer gains and test the serving SINR against
/// `mobility.handoff_threshold`. Drops without stations are discarded.
pub fn mc_handoff_probability_curve(
    vts: &[f64],
    movement: Movement,
    model: &NetworkModel<f64>,
    antenna: &AntennaPattern<f64>,
    mobility: &MobilityModel<f64>,
    settings: McSettings,
) -> Result<Vec<Estimate>> {
    let both = mc_handoff_probability_both(vts, model, antenna, mobility, settings)?;
    let slot = match movement {
        Movement::Away => 0,
        Movement::Perpendicular => 1,
    };
    Ok(both.into_iter().map(|p| p[slot]).collect())
}

/// Both movement cases from the same drops: `[away, perpendicular]` per `vt`.
pub fn mc_handoff_probability_both(
    vts: &[f64],
    model: &NetworkModel<f64>,
    antenna: &AntennaPattern<f64>,
    mobility: &MobilityModel<f64>,
    settings: McSettings,
) -> Result<Vec<[Estimate; 2]>> {
    crate::config::validate(model, antenna).into_result()?;
    mobility.validate().into_result()?;
    settings.check(1)?;
    if let Some(vt) = vts.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
        return Err(Error::invalid(format!("displacement vt = {vt} must be ≥ 0")));
    }
    let radius = settings.radius(model)?;
    let drops = (0..settings.drops)
        .into_par_iter()
        .map(|i| {
            let mut rng = drop_rng(settings.seed, i as u64);
            handoff_drop(vts, model, antenna, mobility.handoff_threshold, radius, settings.seed, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let valid: Vec<&Vec<[bool; 2]>> = drops.iter().flatten().collect();
    Ok((0..vts.len())
        .map(|j| {
            let count = |slot: usize| valid.iter().filter(|d| d[j][slot]).count();
            [
                Estimate::proportion(count(0), valid.len(), settings.seed),
                Estimate::proportion(count(1), valid.len(), settings.seed),
            ]
        })
        .collect())
}

/// [`mc_handoff_probability_curve`] at a single displacement.
pub fn mc_handoff_probability(
    vt: f64,
    movement: Movement,
    model: &NetworkModel<f64>,
    antenna: &AntennaPattern<f64>,
    mobility: &MobilityModel<f64>,
    settings: McSettings,
) -> Result<Estimate> {
    Ok(mc_handoff_probability_curve(&[vt], movement, model, antenna, mobility, settings)?[0])
}

fn reflect(p: Point2, radius: f64) -> Point2 {
    let n = p.norm();
    if n <= radius {
        return p;
    }
    let folded = (2.0 * radius - n).max(0.0);
    Point2::new(p.x * folded / n, p.y * folded / n)
}

fn walk_run<R: Rng + ?Sized>(
    model: &NetworkModel<f64>,
    antenna: &AntennaPattern<f64>,
    mobility: &MobilityModel<f64>,
    counting: HandoffCounting,
    seed: u64,
    rng: &mut R,
) -> Result<HandoffTrace> {
    let radius = mobility.arena_radius + guard_width(model);
    let dep = Deployment::sample(model, radius, seed, rng);
    let steps = mobility.steps();
    let duration = steps as f64 * mobility.detect_interval;
    let mut trace = HandoffTrace {
        events: Vec::new(),
        handoff_count: 0,
        duration,
    };
    if dep.is_empty() {
        return Ok(trace);
    }
    let mut ev = Evaluator::new(&dep, model, antenna);
    let mut sinr = Vec::new();
    let mut user = UserState::at(Point2::ORIGIN);
    ev.draw(&user.position, rng)?;
    let mut serving = ev.best(&mut sinr);
    for step in 1..=steps {
        let heading = TAU * rng.random::<f64>();
        user = walk_step(&user, mobility.speed, mobility.detect_interval, heading);
        user.position = reflect(user.position, mobility.arena_radius);
        ev.draw(&user.position, rng)?;
        let current = ev.serving_sinr(serving);
        if current < mobility.handoff_threshold {
            let target = ev.best(&mut sinr);
            if counting == HandoffCounting::EveryTrigger || target != serving {
                trace.handoff_count += 1;
                trace.events.push(HandoffEvent {
                    time: step as f64 * mobility.detect_interval,
                    from: serving,
                    to: target,
                    sinr: current,
                });
            }
            serving = target;
        }
    }
    Ok(trace)
}

/// Handoff rate of a random walker: each detection interval the user moves
/// `v·t_d` in a uniform direction (reflected at the arena edge), fading and
/// gains are re-drawn, and Event A2 re-associates to the max-SINR station.
pub fn mc_handoff_rate(
    model: &NetworkModel<f64>,
    antenna: &AntennaPattern<f64>,
    mobility: &MobilityModel<f64>,
    counting: HandoffCounting,
    runs: usize,
    seed: u64,
) -> Result<HandoffRate> {
    crate::config::validate(model, antenna).into_result()?;
    mobility.validate().into_result()?;
    if runs == 0 {
        return Err(Error::invalid("at least one run required"));
    }
    let traces = (0..runs)
        .into_par_iter()
        .map(|i| {
            let mut rng = drop_rng(seed, i as u64);
            walk_run(model, antenna, mobility, counting, seed, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let rates: Vec<f64> = traces.iter().map(HandoffTrace::rate).collect();
    Ok(HandoffRate {
        rate: Estimate::mean(&rates, seed),
        traces,
    })
}
