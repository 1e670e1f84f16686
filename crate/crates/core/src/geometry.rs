//! Station deployments, angular sections, and user motion.
//!
//! Stations live in polar coordinates about the origin; the user moves in
//! Cartesian coordinates. All conversions between the two happen here.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::config::NetworkModel;
use crate::error::{Error, Result};

/// Wraps an angle into `[0, 2π)`.
#[inline]
pub fn normalize_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if t >= TAU {
        0.0
    } else {
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// A station location `(r, θ)` about the origin, `θ ∈ [0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarPoint {
    pub r: f64,
    pub theta: f64,
}

impl PolarPoint {
    pub fn new(r: f64, theta: f64) -> Self {
        debug_assert!(r >= 0.0);
        Self {
            r,
            theta: normalize_angle(theta),
        }
    }

    pub fn to_cartesian(&self) -> Point2 {
        Point2::new(self.r * self.theta.cos(), self.r * self.theta.sin())
    }
}

/// Angle in `[0, 2π)` of the vector from `station` to `user`.
pub fn bearing_to_user(station: &PolarPoint, user: &Point2) -> Result<f64> {
    bearing_between(&station.to_cartesian(), user)
}

pub(crate) fn bearing_between(station: &Point2, user: &Point2) -> Result<f64> {
    let dx = user.x - station.x;
    let dy = user.y - station.y;
    if dx == 0.0 && dy == 0.0 {
        return Err(Error::invalid("user coincides with station"));
    }
    Ok(normalize_angle(dy.atan2(dx)))
}

/// Zero-based section holding `bearing` when the circle is split into
/// `sections` equal arcs, left-closed and right-open; index `m` covers
/// `[2πm/M, 2π(m+1)/M)`.
#[inline]
pub fn section_index(bearing: f64, sections: usize) -> usize {
    debug_assert!(sections >= 1);
    let b = normalize_angle(bearing);
    let idx = (b * sections as f64 / TAU).floor() as usize;
    idx.min(sections - 1)
}

/// Distance and bearing of a link after the user moves `step` metres in
/// direction `heading`, from the law of cosines.
pub fn displaced_link(r: f64, bearing: f64, step: f64, heading: f64) -> (f64, f64) {
    let d = heading - bearing;
    let r_new = (r * r + step * step + 2.0 * step * r * d.cos()).max(0.0).sqrt();
    let turn = (step * d.sin()).atan2(r + step * d.cos());
    (r_new, normalize_angle(bearing + turn))
}

/// One realized deployment: a Poisson point set on a disc plus an
/// independent exponent per angular section of every station.
#[derive(Debug, Clone, PartialEq)]
pub struct Deployment {
    pub stations: Vec<PolarPoint>,
    positions: Vec<Point2>,
    // row-major, `sections` exponents per station
    exponents: Vec<f64>,
    pub sections: usize,
    pub radius: f64,
    pub seed: u64,
}

impl Deployment {
    /// Builds a deployment from explicit stations and exponent rows.
    pub fn from_parts(stations: Vec<PolarPoint>, exponents: Vec<Vec<f64>>, radius: f64, seed: u64) -> Result<Self> {
        if stations.len() != exponents.len() {
            return Err(Error::invalid("one exponent row per station required"));
        }
        let sections = exponents.first().map_or(1, Vec::len);
        if sections == 0 || exponents.iter().any(|row| row.len() != sections) {
            return Err(Error::invalid("every station needs the same non-zero number of sections"));
        }
        let positions = stations.iter().map(PolarPoint::to_cartesian).collect();
        Ok(Self {
            stations,
            positions,
            exponents: exponents.into_iter().flatten().collect(),
            sections,
            radius,
            seed,
        })
    }

    /// Samples a deployment on a disc of `radius` using `rng`.
    pub fn sample<R: Rng + ?Sized>(model: &NetworkModel<f64>, radius: f64, seed: u64, rng: &mut R) -> Self {
        let mean = model.lambda * std::f64::consts::PI * radius * radius;
        let count = if mean > 0.0 {
            Poisson::new(mean).map(|p| p.sample(rng) as usize).unwrap_or(0)
        } else {
            0
        };
        let sections = model.sections.max(1);
        let (lo, hi) = model.exponent_support();
        let mut stations = Vec::with_capacity(count);
        let mut positions = Vec::with_capacity(count);
        let mut exponents = Vec::with_capacity(count * sections);
        for _ in 0..count {
            let r = radius * rng.random::<f64>().sqrt();
            let theta = TAU * rng.random::<f64>();
            let p = PolarPoint::new(r, theta);
            positions.push(p.to_cartesian());
            stations.push(p);
            for _ in 0..sections {
                exponents.push(sample_exponent(lo, hi, rng));
            }
        }
        Self {
            stations,
            positions,
            exponents,
            sections,
            radius,
            seed,
        }
    }

    pub fn len(&self) -> usize {
        self.stations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stations.is_empty()
    }

    pub fn position(&self, station: usize) -> Point2 {
        self.positions[station]
    }

    pub fn positions(&self) -> &[Point2] {
        &self.positions
    }

    /// The `M` section exponents of one station.
    pub fn exponents_of(&self, station: usize) -> &[f64] {
        let m = self.sections;
        &self.exponents[station * m..(station + 1) * m]
    }

    /// Path-loss exponent of the link from `station` towards a user whose
    /// bearing (station → user) is `bearing`.
    #[inline]
    pub fn exponent_towards(&self, station: usize, bearing: f64) -> f64 {
        self.exponents[station * self.sections + section_index(bearing, self.sections)]
    }

    /// Distance, bearing and exponent of the link from `station` to `user`.
    pub fn link_geometry(&self, station: usize, user: &Point2) -> Result<(f64, f64, f64)> {
        let p = self.positions[station];
        let bearing = bearing_between(&p, user)?;
        Ok((p.distance(user), bearing, self.exponent_towards(station, bearing)))
    }

    /// Writes one CSV row per station: `r,theta,alpha_1..alpha_M`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# seed={} radius={}", self.seed, self.radius)?;
        let mut header = String::from("r,theta");
        for m in 1..=self.sections {
            write!(header, ",alpha_{m}").unwrap();
        }
        writeln!(out, "{header}")?;
        for (i, s) in self.stations.iter().enumerate() {
            let mut line = format!("{},{}", s.r, s.theta);
            for a in self.exponents_of(i) {
                write!(line, ",{a}").unwrap();
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    /// Reads the format produced by [`Deployment::write_csv`].
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut seed = 0u64;
        let mut radius = 0.0f64;
        let mut stations = Vec::new();
        let mut rows = Vec::new();
        let mut saw_header = false;
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                for kv in meta.split_whitespace() {
                    match kv.split_once('=') {
                        Some(("seed", v)) => seed = v.parse().map_err(|_| Error::Parse(format!("bad seed `{v}`")))?,
                        Some(("radius", v)) => {
                            radius = v.parse().map_err(|_| Error::Parse(format!("bad radius `{v}`")))?
                        }
                        _ => {}
                    }
                }
                continue;
            }
            if !saw_header {
                saw_header = true;
                if line.starts_with("r,") {
                    continue;
                }
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
            if vals.len() < 3 {
                return Err(Error::Parse(format!("line {}: expected r,theta,alpha...", lineno + 1)));
            }
            radius = radius.max(vals[0]);
            stations.push(PolarPoint::new(vals[0], vals[1]));
            rows.push(vals[2..].to_vec());
        }
        Self::from_parts(stations, rows, radius, seed)
    }
}

#[inline]
pub(crate) fn sample_exponent<R: Rng + ?Sized>(lo: f64, hi: f64, rng: &mut R) -> f64 {
    if hi > lo {
        lo + (hi - lo) * rng.random::<f64>()
    } else {
        lo
    }
}

/// Samples a deployment on a disc of `radius`, deterministic in `seed`.
pub fn sample_deployment(model: &NetworkModel<f64>, radius: f64, seed: u64) -> Result<Deployment> {
    if !(radius > 0.0) {
        return Err(Error::invalid(format!("deployment radius {radius} must be > 0")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(Deployment::sample(model, radius, seed, &mut rng))
}

/// Extra ring of stations beyond the arena, `5/√(πλ)`.
pub fn guard_width(model: &NetworkModel<f64>) -> f64 {
    5.0 * model.cell_radius()
}

/// A mobile user.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UserState {
    pub position: Point2,
    pub serving: Option<usize>,
    /// Current fading power gain on the serving link.
    pub serving_fade: f64,
}

impl UserState {
    pub fn at(position: Point2) -> Self {
        Self {
            position,
            serving: None,
            serving_fade: 1.0,
        }
    }
}

/// Moves the user `speed · duration` metres in direction `heading`.
pub fn walk_step(user: &UserState, speed: f64, duration: f64, heading: f64) -> UserState {
    let step = speed * duration;
    UserState {
        position: Point2::new(
            user.position.x + step * heading.cos(),
            user.position.y + step * heading.sin(),
        ),
        ..*user
    }
}
