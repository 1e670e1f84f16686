//! Model parameters, validation, and the JSON experiment description.
//!
//! All powers are linear (mW) and all gains linear ratios; decibel values only
//! appear in the JSON keys carrying a `_db` suffix, which are converted on load.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{db_to_linear, Scalar};

/// Speed of light used by the 3GPP breakpoint formula.
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Parameters of the stochastic network model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkModel<F> {
    /// Station density per m².
    pub lambda: F,
    /// Transmit power, mW.
    pub tx_power: F,
    /// Noise power, mW.
    pub noise_power: F,
    /// Mean path-loss exponent.
    pub mu: F,
    /// Standard deviation of the path-loss exponent.
    pub sigma: F,
    /// Angular sections per station.
    pub sections: usize,
}

impl<F: Scalar> Default for NetworkModel<F> {
    /// P_T = 30 dBm, σ_n² = −87 dBm, λ = 1e-4 m⁻², μ = 4, σ = 0, M = 3.
    fn default() -> Self {
        Self {
            lambda: F::lit(1e-4),
            tx_power: db_to_linear(F::lit(30.0)),
            noise_power: db_to_linear(F::lit(-87.0)),
            mu: F::lit(4.0),
            sigma: F::zero(),
            sections: 3,
        }
    }
}

impl<F: Scalar> NetworkModel<F> {
    /// Half-width `√3·σ` of the uniform exponent law.
    #[inline]
    pub fn exponent_half_width(&self) -> F {
        F::lit(3.0).sqrt() * self.sigma
    }

    /// `[μ − √3σ, μ + √3σ]`.
    pub fn exponent_support(&self) -> (F, F) {
        let w = self.exponent_half_width();
        (self.mu - w, self.mu + w)
    }

    #[inline]
    pub fn is_isotropic(&self) -> bool {
        self.sigma == F::zero()
    }

    /// Mean cell radius `1/√(πλ)`.
    pub fn cell_radius(&self) -> F {
        (F::PI() * self.lambda).sqrt().recip()
    }

    pub fn with_sigma(mut self, sigma: F) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn with_mu(mut self, mu: F) -> Self {
        self.mu = mu;
        self
    }

    pub fn with_lambda(mut self, lambda: F) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_sections(mut self, sections: usize) -> Self {
        self.sections = sections;
        self
    }

    pub fn with_noise_power(mut self, noise_power: F) -> Self {
        self.noise_power = noise_power;
        self
    }

    pub fn cast<G: Scalar>(&self) -> NetworkModel<G> {
        NetworkModel {
            lambda: G::lit(self.lambda.as_f64()),
            tx_power: G::lit(self.tx_power.as_f64()),
            noise_power: G::lit(self.noise_power.as_f64()),
            mu: G::lit(self.mu.as_f64()),
            sigma: G::lit(self.sigma.as_f64()),
            sections: self.sections,
        }
    }
}

/// Two-level sectored antenna at both ends of a link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AntennaPattern<F> {
    pub main_tx: F,
    pub main_rx: F,
    pub side_tx: F,
    pub side_rx: F,
    /// Main-lobe width at the station, radians.
    pub beam_tx: F,
    /// Main-lobe width at the user, radians.
    pub beam_rx: F,
}

impl<F: Scalar> Default for AntennaPattern<F> {
    /// M = 10 dB, m = 0 dB at both ends; φ_t = 7°, φ_r = 60°.
    fn default() -> Self {
        Self {
            main_tx: F::lit(10.0),
            main_rx: F::lit(10.0),
            side_tx: F::one(),
            side_rx: F::one(),
            beam_tx: F::lit(7.0).to_radians(),
            beam_rx: F::lit(60.0).to_radians(),
        }
    }
}

/// One atom of the interferer gain distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainLevel<F> {
    pub gain: F,
    pub probability: F,
}

impl<F: Scalar> AntennaPattern<F> {
    pub fn with_beams_deg(mut self, tx_deg: F, rx_deg: F) -> Self {
        self.beam_tx = tx_deg.to_radians();
        self.beam_rx = rx_deg.to_radians();
        self
    }

    /// Gain of a beam-aligned serving link, `M_t·M_r`.
    #[inline]
    pub fn desired_gain(&self) -> F {
        self.main_tx * self.main_rx
    }

    /// `M_t·M_r / (m_t·m_r)`: above this SINR threshold at most one station
    /// can exceed it.
    #[inline]
    pub fn unique_coverage_threshold(&self) -> F {
        self.desired_gain() / (self.side_tx * self.side_rx)
    }

    /// Lower bound on Pr{max SINR | max received power}: `(1 − φ_t/2π)(1 − φ_r/2π)`.
    #[inline]
    pub fn max_power_agreement_bound(&self) -> F {
        let tau = F::TAU();
        (F::one() - self.beam_tx / tau) * (F::one() - self.beam_rx / tau)
    }

    /// The four-point distribution of an interfering link's gain, ordered
    /// `M_tM_r, M_t m_r, m_t M_r, m_t m_r`.
    pub fn gain_distribution(&self) -> [GainLevel<F>; 4] {
        let tau = F::TAU();
        let qt = self.beam_tx / tau;
        let qr = self.beam_rx / tau;
        let one = F::one();
        [
            GainLevel {
                gain: self.main_tx * self.main_rx,
                probability: qt * qr,
            },
            GainLevel {
                gain: self.main_tx * self.side_rx,
                probability: qt * (one - qr),
            },
            GainLevel {
                gain: self.side_tx * self.main_rx,
                probability: (one - qt) * qr,
            },
            GainLevel {
                gain: self.side_tx * self.side_rx,
                probability: (one - qt) * (one - qr),
            },
        ]
    }

    pub fn cast<G: Scalar>(&self) -> AntennaPattern<G> {
        AntennaPattern {
            main_tx: G::lit(self.main_tx.as_f64()),
            main_rx: G::lit(self.main_rx.as_f64()),
            side_tx: G::lit(self.side_tx.as_f64()),
            side_rx: G::lit(self.side_rx.as_f64()),
            beam_tx: G::lit(self.beam_tx.as_f64()),
            beam_rx: G::lit(self.beam_rx.as_f64()),
        }
    }
}

/// Random-walk user and Event-A2 trigger.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobilityModel<F> {
    /// m/s
    pub speed: F,
    /// Detection interval, s.
    pub detect_interval: F,
    /// Effective A2 threshold `τ_h − τ_hys`, linear SINR.
    pub handoff_threshold: F,
    /// s
    pub sim_duration: F,
    /// m
    pub arena_radius: F,
}

impl<F: Scalar> Default for MobilityModel<F> {
    /// v = 5 m/s, t_d = 1 s, threshold 0 dB, 1000 s in a 1000 m disc.
    fn default() -> Self {
        Self {
            speed: F::lit(5.0),
            detect_interval: F::one(),
            handoff_threshold: F::one(),
            sim_duration: F::lit(1000.0),
            arena_radius: F::lit(1000.0),
        }
    }
}

impl<F: Scalar> MobilityModel<F> {
    /// Number of detection intervals in one run.
    pub fn steps(&self) -> usize {
        (self.sim_duration / self.detect_interval)
            .floor()
            .to_usize()
            .unwrap_or(0)
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        if !(self.speed >= F::zero()) {
            report.push("speed", format!("speed = {} must be ≥ 0", self.speed));
        }
        if !(self.detect_interval > F::zero()) {
            report.push(
                "detect_interval",
                format!("detect_interval = {} must be > 0", self.detect_interval),
            );
        }
        if !(self.sim_duration > F::zero()) {
            report.push("sim_duration", format!("sim_duration = {} must be > 0", self.sim_duration));
        }
        if !(self.arena_radius > F::zero()) {
            report.push("arena_radius", format!("arena_radius = {} must be > 0", self.arena_radius));
        }
        if !(self.handoff_threshold >= F::zero()) {
            report.push(
                "handoff_threshold",
                format!("handoff_threshold = {} must be ≥ 0", self.handoff_threshold),
            );
        }
        report
    }
}

/// One violated invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

/// Result of [`validate`]: empty means every invariant holds.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_pass(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn push(&mut self, field: &str, message: String) {
        self.violations.push(Violation {
            field: field.to_string(),
            message,
        });
    }

    pub fn merge(mut self, other: ValidationReport) -> Self {
        self.violations.extend(other.violations);
        self
    }

    /// `Ok(())` on pass, otherwise the report as an error.
    pub fn into_result(self) -> Result<()> {
        if self.is_pass() {
            Ok(())
        } else {
            Err(Error::Validation(self))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_pass() {
            return f.write_str("pass");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{}: {}", v.field, v.message)?;
        }
        Ok(())
    }
}

/// Checks every parameter invariant of the model and antenna.
pub fn validate<F: Scalar>(model: &NetworkModel<F>, antenna: &AntennaPattern<F>) -> ValidationReport {
    let mut r = ValidationReport::default();
    let zero = F::zero();
    if !(model.lambda > zero && model.lambda.is_finite()) {
        r.push("lambda", format!("lambda = {} must be > 0", model.lambda));
    }
    if !(model.tx_power > zero && model.tx_power.is_finite()) {
        r.push("tx_power", format!("tx_power = {} must be > 0", model.tx_power));
    }
    if !(model.noise_power >= zero && model.noise_power.is_finite()) {
        r.push("noise_power", format!("noise_power = {} must be ≥ 0", model.noise_power));
    }
    if model.sections < 1 {
        r.push("sections", "sections must be ≥ 1".to_string());
    }
    if !(model.sigma >= zero && model.sigma.is_finite()) {
        r.push("sigma", format!("sigma = {} must be ≥ 0", model.sigma));
    } else {
        let (lo, _) = model.exponent_support();
        if !(lo > F::lit(2.0)) {
            r.push(
                "mu",
                format!("mu − √3·sigma = {:.2} ≤ 2", lo.as_f64()),
            );
        }
    }

    if !(antenna.side_tx > zero) {
        r.push("side_tx", format!("side_tx = {} must be > 0", antenna.side_tx));
    }
    if !(antenna.side_rx > zero) {
        r.push("side_rx", format!("side_rx = {} must be > 0", antenna.side_rx));
    }
    if !(antenna.main_tx >= antenna.side_tx) {
        r.push("main_tx", format!("main_tx = {} < side_tx = {}", antenna.main_tx, antenna.side_tx));
    }
    if !(antenna.main_rx >= antenna.side_rx) {
        r.push("main_rx", format!("main_rx = {} < side_rx = {}", antenna.main_rx, antenna.side_rx));
    }
    let tau = F::TAU();
    for (name, w) in [("beam_tx", antenna.beam_tx), ("beam_rx", antenna.beam_rx)] {
        if !(w > zero && w < tau) {
            r.push(name, format!("{name} = {w} rad outside (0, 2π)"));
        }
    }
    if r.is_pass() {
        let total = antenna
            .gain_distribution()
            .iter()
            .fold(zero, |acc, l| acc + l.probability);
        if (total - F::one()).abs() > F::lit(1e-12).max(F::epsilon() * F::lit(8.0)) {
            r.push("beam_tx", format!("gain probabilities sum to {total}"));
        }
    }
    r
}

/// 3GPP breakpoint distance `4·(h_bs − 1)·(h_ut − 1)·f_c / c` with 1 m
/// effective environment height.
pub fn breakpoint_distance<F: Scalar>(carrier_hz: F, h_bs: F, h_ut: F) -> Result<F> {
    let one = F::one();
    if !(h_bs > one && h_ut > one) {
        return Err(Error::invalid(format!(
            "antenna heights must exceed 1 m (h_bs = {h_bs}, h_ut = {h_ut})"
        )));
    }
    if !(carrier_hz > F::zero()) {
        return Err(Error::invalid(format!("carrier frequency {carrier_hz} must be > 0")));
    }
    Ok(F::lit(4.0) * (h_bs - one) * (h_ut - one) * carrier_hz / F::lit(SPEED_OF_LIGHT))
}

/// Model, antenna and mobility parameters of one experiment, in linear units.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ExperimentConfig {
    pub model: NetworkModel<f64>,
    pub antenna: AntennaPattern<f64>,
    pub mobility: MobilityModel<f64>,
    /// Bandwidth for rate coverage, Hz.
    pub bandwidth: f64,
}

impl ExperimentConfig {
    /// The default parameter set with a 500 MHz bandwidth.
    pub fn standard() -> Self {
        Self {
            bandwidth: 500e6,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> ValidationReport {
        let mut r = validate(&self.model, &self.antenna).merge(self.mobility.validate());
        if !(self.bandwidth > 0.0) {
            r.push("bandwidth", format!("bandwidth = {} must be > 0", self.bandwidth));
        }
        r
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ConfigDoc = serde_json::from_str(text)?;
        doc.resolve()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ConfigDoc::from(self))?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }
}

// On-disk form: every field optional (missing ⇒ default); a quantity may be
// given either linearly or in dB (`_db`, dBm for powers), not both.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDoc {
    #[serde(default)]
    model: ModelDoc,
    #[serde(default)]
    antenna: AntennaDoc,
    #[serde(default)]
    mobility: MobilityDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bandwidth: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tx_power: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tx_power_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    noise_power: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    noise_power_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sections: Option<usize>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AntennaDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    main_tx: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    main_tx_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    main_rx: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    main_rx_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    side_tx: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    side_tx_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    side_rx: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    side_rx_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beam_tx: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beam_tx_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beam_rx: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beam_rx_deg: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MobilityDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    speed: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    detect_interval: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    handoff_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    handoff_threshold_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sim_duration: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    arena_radius: Option<f64>,
}

fn either(name: &str, linear: Option<f64>, alt: Option<f64>, convert: fn(f64) -> f64, default: f64) -> Result<f64> {
    match (linear, alt) {
        (Some(_), Some(_)) => Err(Error::Parse(format!(
            "`{name}` given both linearly and in alternate units"
        ))),
        (Some(v), None) => Ok(v),
        (None, Some(v)) => Ok(convert(v)),
        (None, None) => Ok(default),
    }
}

fn db(v: f64) -> f64 {
    db_to_linear(v)
}

impl ConfigDoc {
    fn resolve(self) -> Result<ExperimentConfig> {
        let d = ExperimentConfig::standard();
        let m = self.model;
        let model = NetworkModel {
            lambda: m.lambda.unwrap_or(d.model.lambda),
            tx_power: either("tx_power", m.tx_power, m.tx_power_db, db, d.model.tx_power)?,
            noise_power: either("noise_power", m.noise_power, m.noise_power_db, db, d.model.noise_power)?,
            mu: m.mu.unwrap_or(d.model.mu),
            sigma: m.sigma.unwrap_or(d.model.sigma),
            sections: m.sections.unwrap_or(d.model.sections),
        };
        let a = self.antenna;
        let antenna = AntennaPattern {
            main_tx: either("main_tx", a.main_tx, a.main_tx_db, db, d.antenna.main_tx)?,
            main_rx: either("main_rx", a.main_rx, a.main_rx_db, db, d.antenna.main_rx)?,
            side_tx: either("side_tx", a.side_tx, a.side_tx_db, db, d.antenna.side_tx)?,
            side_rx: either("side_rx", a.side_rx, a.side_rx_db, db, d.antenna.side_rx)?,
            beam_tx: either("beam_tx", a.beam_tx, a.beam_tx_deg, f64::to_radians, d.antenna.beam_tx)?,
            beam_rx: either("beam_rx", a.beam_rx, a.beam_rx_deg, f64::to_radians, d.antenna.beam_rx)?,
        };
        let u = self.mobility;
        let mobility = MobilityModel {
            speed: u.speed.unwrap_or(d.mobility.speed),
            detect_interval: u.detect_interval.unwrap_or(d.mobility.detect_interval),
            handoff_threshold: either(
                "handoff_threshold",
                u.handoff_threshold,
                u.handoff_threshold_db,
                db,
                d.mobility.handoff_threshold,
            )?,
            sim_duration: u.sim_duration.unwrap_or(d.mobility.sim_duration),
            arena_radius: u.arena_radius.unwrap_or(d.mobility.arena_radius),
        };
        Ok(ExperimentConfig {
            model,
            antenna,
            mobility,
            bandwidth: self.bandwidth.unwrap_or(d.bandwidth),
        })
    }
}

impl From<&ExperimentConfig> for ConfigDoc {
    fn from(c: &ExperimentConfig) -> Self {
        ConfigDoc {
            model: ModelDoc {
                lambda: Some(c.model.lambda),
                tx_power: Some(c.model.tx_power),
                noise_power: Some(c.model.noise_power),
                mu: Some(c.model.mu),
                sigma: Some(c.model.sigma),
                sections: Some(c.model.sections),
                ..ModelDoc::default()
            },
            antenna: AntennaDoc {
                main_tx: Some(c.antenna.main_tx),
                main_rx: Some(c.antenna.main_rx),
                side_tx: Some(c.antenna.side_tx),
                side_rx: Some(c.antenna.side_rx),
                beam_tx: Some(c.antenna.beam_tx),
                beam_rx: Some(c.antenna.beam_rx),
                ..AntennaDoc::default()
            },
            mobility: MobilityDoc {
                speed: Some(c.mobility.speed),
                detect_interval: Some(c.mobility.detect_interval),
                handoff_threshold: Some(c.mobility.handoff_threshold),
                sim_duration: Some(c.mobility.sim_duration),
                arena_radius: Some(c.mobility.arena_radius),
                ..MobilityDoc::default()
            },
            bandwidth: Some(c.bandwidth),
        }
    }
}
