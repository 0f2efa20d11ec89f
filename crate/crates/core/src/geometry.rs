//! Room deployment and bi-static propagation paths.
//!
//! Scatterers are points in a 2D room. Each path from transmitter to
//! receiver through a scatterer is built from two legs; a leg is either the
//! straight segment or a single specular bounce off one wall, constructed
//! with the image method.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerology::SPEED_OF_LIGHT;

/// Reflection loss of a wall bounce, dB.
pub const WALL_REFLECTION_LOSS_DB: f64 = 3.0;

/// Minimum distance between a randomly placed target and the tx or rx.
pub const TARGET_STANDOFF_M: f64 = 0.5;
/// Minimum distance between clutter and the tx or rx.
pub const CLUTTER_STANDOFF_M: f64 = 1.0;

const DEGENERATE_EPS: f64 = 1e-9;
const MAX_REJECTION_DRAWS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    pub fn unit(self) -> Vec2 {
        self * (1.0 / self.norm())
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(a: [f64; 2]) -> Self {
        Vec2::new(a[0], a[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scatterer {
    pub position: Vec2,
    pub velocity: Vec2,
    pub rcs_m2: f64,
    pub is_target: bool,
}

impl Scatterer {
    pub fn clutter(position: Vec2, rcs_m2: f64) -> Self {
        Self {
            position,
            velocity: Vec2::default(),
            rcs_m2,
            is_target: false,
        }
    }

    pub fn target(position: Vec2, velocity: Vec2, rcs_m2: f64) -> Self {
        Self {
            position,
            velocity,
            rcs_m2,
            is_target: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wall {
    pub a: Vec2,
    pub b: Vec2,
    #[serde(default = "default_reflection_loss")]
    pub reflection_loss_db: f64,
}

fn default_reflection_loss() -> f64 {
    WALL_REFLECTION_LOSS_DB
}

impl Wall {
    pub fn new(a: Vec2, b: Vec2) -> Self {
        Self {
            a,
            b,
            reflection_loss_db: WALL_REFLECTION_LOSS_DB,
        }
    }

    fn amplitude_factor(&self) -> f64 {
        10f64.powf(-self.reflection_loss_db / 20.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Los,
    Nlos,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Los => "los",
            Scenario::Nlos => "nlos",
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "los" => Ok(Scenario::Los),
            "nlos" => Ok(Scenario::Nlos),
            other => Err(Error::Config(format!("unknown scenario '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Hypothesis {
    H0,
    H1,
}

impl Hypothesis {
    pub fn from_bit(b: bool) -> Self {
        if b {
            Hypothesis::H1
        } else {
            Hypothesis::H0
        }
    }

    pub fn is_h1(self) -> bool {
        self == Hypothesis::H1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deployment {
    pub room_extent: Vec2,
    pub tx_pos: Vec2,
    pub rx_pos: Vec2,
    pub tx_gain: f64,
    pub rx_gain: f64,
    pub clutter: Vec<Scatterer>,
    pub target: Option<Scatterer>,
    pub walls: Vec<Wall>,
}

impl Deployment {
    pub fn contains(&self, p: Vec2) -> bool {
        (0.0..=self.room_extent.x).contains(&p.x) && (0.0..=self.room_extent.y).contains(&p.y)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tx_pos.dist(self.rx_pos) < DEGENERATE_EPS {
            return Err(Error::DegenerateGeometry("tx and rx coincide".into()));
        }
        let scatterers = self.clutter.iter().chain(self.target.iter());
        for p in [self.tx_pos, self.rx_pos]
            .into_iter()
            .chain(scatterers.map(|s| s.position))
        {
            if !self.contains(p) {
                return Err(Error::Config(format!("position ({}, {}) lies outside the room", p.x, p.y)));
            }
        }
        for s in self.clutter.iter().chain(self.target.iter()) {
            if !(s.rcs_m2 > 0.0) {
                return Err(Error::Config(format!("rcs must be positive, got {}", s.rcs_m2)));
            }
        }
        if self.clutter.iter().any(|s| s.velocity != Vec2::default() || s.is_target) {
            return Err(Error::Config("clutter must be stationary non-target scatterers".into()));
        }
        for w in &self.walls {
            if w.a.dist(w.b) < DEGENERATE_EPS {
                return Err(Error::DegenerateGeometry("wall endpoints coincide".into()));
            }
        }
        Ok(())
    }

    /// Iterates clutter first, then the target if present.
    pub fn scatterers(&self) -> impl Iterator<Item = &Scatterer> {
        self.clutter.iter().chain(self.target.iter())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Direct,
    Clutter,
    Target,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationPath {
    /// Linear amplitude gain b_l.
    pub gain_amplitude: f64,
    pub delay_s: f64,
    pub doppler_hz: f64,
    /// Length of the transmitter leg (straight or unfolded bounce).
    pub dist_tx_m: f64,
    pub dist_rx_m: f64,
    pub num_reflections: u8,
    pub source_kind: SourceKind,
    pub reflection_points: Vec<Vec2>,
}

pub type PathSet = Vec<PropagationPath>;

/// Free-space gain of the direct link, `G_t G_r λ² / (4π d²)`.
pub fn direct_gain(d: &Deployment, center_freq_hz: f64) -> f64 {
    let lambda = SPEED_OF_LIGHT / center_freq_hz;
    let d0 = d.tx_pos.dist(d.rx_pos);
    d.tx_gain * d.rx_gain * lambda * lambda / (4.0 * PI * d0 * d0)
}

/// The line-of-sight tx to rx path, ignoring walls.
pub fn direct_path(d: &Deployment, center_freq_hz: f64) -> PropagationPath {
    let d0 = d.tx_pos.dist(d.rx_pos);
    PropagationPath {
        gain_amplitude: direct_gain(d, center_freq_hz),
        delay_s: d0 / SPEED_OF_LIGHT,
        doppler_hz: 0.0,
        dist_tx_m: d0,
        dist_rx_m: 0.0,
        num_reflections: 0,
        source_kind: SourceKind::Direct,
        reflection_points: Vec::new(),
    }
}

fn radar_gain(d: &Deployment, rcs: f64, leg_tx: f64, leg_rx: f64, center_freq_hz: f64) -> f64 {
    let lambda = SPEED_OF_LIGHT / center_freq_hz;
    d.tx_gain * d.rx_gain * rcs * lambda * lambda
        / ((4.0 * PI).powi(3) * leg_tx * leg_tx * leg_rx * leg_rx)
}

/// One half of a bi-static path, seen from the scatterer.
#[derive(Debug, Clone, Copy)]
struct Leg {
    length: f64,
    /// Unit vector from the scatterer toward where the leg leaves it.
    toward: Vec2,
    bounce: Option<(Vec2, f64)>,
}

fn bistatic_doppler(s: &Scatterer, u_tx: Vec2, u_rx: Vec2, center_freq_hz: f64) -> f64 {
    // Positive when the range sum shrinks.
    center_freq_hz / SPEED_OF_LIGHT * (s.velocity.dot(u_tx) + s.velocity.dot(u_rx))
}

fn source_kind(s: &Scatterer) -> SourceKind {
    if s.is_target {
        SourceKind::Target
    } else {
        SourceKind::Clutter
    }
}

fn combine(d: &Deployment, s: &Scatterer, tx: &Leg, rx: &Leg, center_freq_hz: f64) -> PropagationPath {
    let mut gain = radar_gain(d, s.rcs_m2, tx.length, rx.length, center_freq_hz);
    let mut reflection_points = Vec::new();
    for (p, loss) in tx.bounce.iter().chain(rx.bounce.iter()) {
        gain *= loss;
        reflection_points.push(*p);
    }
    PropagationPath {
        gain_amplitude: gain,
        delay_s: (tx.length + rx.length) / SPEED_OF_LIGHT,
        doppler_hz: bistatic_doppler(s, tx.toward, rx.toward, center_freq_hz),
        dist_tx_m: tx.length,
        dist_rx_m: rx.length,
        num_reflections: reflection_points.len() as u8,
        source_kind: source_kind(s),
        reflection_points,
    }
}

/// Straight-leg scattered path via the radar equation, ignoring walls.
pub fn scatter_path(d: &Deployment, s: &Scatterer, center_freq_hz: f64) -> Result<PropagationPath> {
    let tx = straight_leg(s.position, d.tx_pos)?;
    let rx = straight_leg(s.position, d.rx_pos)?;
    Ok(combine(d, s, &tx, &rx, center_freq_hz))
}

fn straight_leg(from: Vec2, to: Vec2) -> Result<Leg> {
    let delta = to - from;
    let length = delta.norm();
    if length < DEGENERATE_EPS {
        return Err(Error::DegenerateGeometry(format!(
            "scatterer at ({}, {}) coincides with an antenna",
            from.x, from.y
        )));
    }
    Ok(Leg {
        length,
        toward: delta * (1.0 / length),
        bounce: None,
    })
}

/// Mirror image of `p` across the infinite line through `w`.
pub fn reflect_point(p: Vec2, w: &Wall) -> Vec2 {
    let u = (w.b - w.a).unit();
    let foot = w.a + u * (p - w.a).dot(u);
    foot * 2.0 - p
}

fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).cross(c - a)
}

fn strictly_crosses(a: Vec2, b: Vec2, w: &Wall) -> bool {
    let o1 = orient(a, b, w.a);
    let o2 = orient(a, b, w.b);
    let o3 = orient(w.a, w.b, a);
    let o4 = orient(w.a, w.b, b);
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

/// Whether the open segment `a`-`b` properly crosses any wall. Grazing a
/// wall endpoint, or running along a wall, does not count.
pub fn segment_occluded(a: Vec2, b: Vec2, walls: &[Wall]) -> bool {
    walls.iter().any(|w| strictly_crosses(a, b, w))
}

fn occluded_except(a: Vec2, b: Vec2, walls: &[Wall], skip: usize) -> bool {
    walls
        .iter()
        .enumerate()
        .any(|(i, w)| i != skip && strictly_crosses(a, b, w))
}

/// All legs linking scatterer position `s` with antenna `ant`.
fn legs(s: Vec2, ant: Vec2, walls: &[Wall]) -> Result<Vec<Leg>> {
    let mut out = Vec::new();
    let straight = straight_leg(s, ant)?;
    if !segment_occluded(s, ant, walls) {
        out.push(straight);
    }
    for (i, w) in walls.iter().enumerate() {
        let side_s = orient(w.a, w.b, s);
        let side_a = orient(w.a, w.b, ant);
        if side_s * side_a <= 0.0 {
            continue;
        }
        let image = reflect_point(ant, w);
        // Intersection of segment s -> image with the wall line.
        let t = side_s / (side_s - orient(w.a, w.b, image));
        let p = s + (image - s) * t;
        let along = (p - w.a).dot(w.b - w.a) / (w.b - w.a).dot(w.b - w.a);
        if !(0.0..=1.0).contains(&along) {
            continue;
        }
        if occluded_except(s, p, walls, i) || occluded_except(p, ant, walls, i) {
            continue;
        }
        let to_p = p - s;
        out.push(Leg {
            length: s.dist(image),
            toward: to_p.unit(),
            bounce: Some((p, w.amplitude_factor())),
        });
    }
    Ok(out)
}

/// Direct path (when unblocked) plus every valid leg combination for each
/// scatterer. Clutter paths come first, target paths last.
pub fn enumerate_paths(d: &Deployment, center_freq_hz: f64) -> Result<PathSet> {
    let mut paths = Vec::new();
    if !segment_occluded(d.tx_pos, d.rx_pos, &d.walls) {
        paths.push(direct_path(d, center_freq_hz));
    }
    for s in d.scatterers() {
        let tx_legs = legs(s.position, d.tx_pos, &d.walls)?;
        let rx_legs = legs(s.position, d.rx_pos, &d.walls)?;
        for tx in &tx_legs {
            for rx in &rx_legs {
                paths.push(combine(d, s, tx, rx, center_freq_hz));
            }
        }
    }
    Ok(paths)
}

/// Axis-aligned rectangle, `min` and `max` corners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub min: Vec2,
    pub max: Vec2,
}

impl Region {
    fn sample(&self, rng: &mut impl Rng) -> Vec2 {
        Vec2::new(
            rng.random_range(self.min.x..self.max.x),
            rng.random_range(self.min.y..self.max.y),
        )
    }

    fn bounding(walls: &[Wall]) -> Option<Region> {
        let mut pts = walls.iter().flat_map(|w| [w.a, w.b]);
        let first = pts.next()?;
        let (min, max) = pts.fold((first, first), |(lo, hi), p| {
            (Vec2::new(lo.x.min(p.x), lo.y.min(p.y)), Vec2::new(hi.x.max(p.x), hi.y.max(p.y)))
        });
        Some(Region { min, max })
    }
}

/// Serialized scenario descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    pub hypothesis: Hypothesis,
    pub num_clutter: usize,
    /// Clutter RCS is log-uniform over this range, m².
    pub clutter_rcs_range: [f64; 2],
    pub target_rcs: f64,
    /// Target speed is uniform over this range with uniform heading; `[0, 0]`
    /// gives a stationary target.
    pub target_speed_range: [f64; 2],
    #[serde(default)]
    pub walls: Vec<Wall>,
    /// Where NLOS targets are dropped. Defaults to the bounding box of the walls.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nlos_region: Option<Region>,
    /// Seeds the clutter layout; fixed for a whole experiment.
    pub seed: u64,
}

pub const ROOM_EXTENT: Vec2 = Vec2::new(10.0, 10.0);
pub const TX_POS: Vec2 = Vec2::new(0.0, 0.0);
pub const RX_POS: Vec2 = Vec2::new(10.0, 0.0);

/// The two-wall layout used for NLOS experiments: parallel walls at x = 4 m
/// and x = 6 m over y in [6, 9] m. Every point between them that is
/// hidden from both antennas can still be reached by a one-bounce leg on
/// each side.
pub fn default_nlos_walls() -> Vec<Wall> {
    vec![
        Wall::new(Vec2::new(4.0, 6.0), Vec2::new(4.0, 9.0)),
        Wall::new(Vec2::new(6.0, 6.0), Vec2::new(6.0, 9.0)),
    ]
}

impl ScenarioSpec {
    pub fn new(scenario: Scenario, hypothesis: Hypothesis, moving: bool, seed: u64) -> Self {
        let walls = match scenario {
            Scenario::Los => Vec::new(),
            Scenario::Nlos => default_nlos_walls(),
        };
        Self {
            scenario,
            hypothesis,
            num_clutter: 8,
            clutter_rcs_range: [1.0, 20.0],
            target_rcs: 1.0,
            target_speed_range: if moving { [0.5, 2.0] } else { [0.0, 0.0] },
            walls,
            nlos_region: None,
            seed,
        }
    }

    pub fn is_moving(&self) -> bool {
        self.target_speed_range[1] > 0.0
    }

    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.clutter_rcs_range;
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::Config(format!("bad clutter rcs range [{lo}, {hi}]")));
        }
        if !(self.target_rcs > 0.0) {
            return Err(Error::Config("target rcs must be positive".into()));
        }
        let [slo, shi] = self.target_speed_range;
        if !(slo >= 0.0 && shi >= slo) {
            return Err(Error::Config(format!("bad target speed range [{slo}, {shi}]")));
        }
        if self.scenario == Scenario::Nlos && self.walls.is_empty() {
            return Err(Error::Config("nlos scenario requires walls".into()));
        }
        Ok(())
    }

    fn target_region(&self) -> Option<Region> {
        self.nlos_region.or_else(|| Region::bounding(&self.walls))
    }
}

fn log_uniform(rng: &mut impl Rng, [lo, hi]: [f64; 2]) -> f64 {
    if hi == lo {
        return lo;
    }
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

fn uniform(rng: &mut impl Rng, [lo, hi]: [f64; 2]) -> f64 {
    if hi == lo {
        return lo;
    }
    rng.random_range(lo..hi)
}

fn clear_of_antennas(p: Vec2, standoff: f64) -> bool {
    p.dist(TX_POS) >= standoff && p.dist(RX_POS) >= standoff
}

/// Clutter layout for a scenario seed. LOS and NLOS share it.
pub fn sample_clutter(spec: &ScenarioSpec) -> Vec<Scatterer> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let room = Region {
        min: Vec2::new(0.0, 0.0),
        max: ROOM_EXTENT,
    };
    let mut clutter = Vec::with_capacity(spec.num_clutter);
    while clutter.len() < spec.num_clutter {
        let p = room.sample(&mut rng);
        let rcs = log_uniform(&mut rng, spec.clutter_rcs_range);
        if clear_of_antennas(p, CLUTTER_STANDOFF_M) {
            clutter.push(Scatterer::clutter(p, rcs));
        }
    }
    clutter
}

/// Builds a deployment: fixed corner antennas, clutter keyed on
/// `spec.seed`, and (under H1) a target keyed on `rng_seed`.
pub fn sample_deployment(spec: &ScenarioSpec, rng_seed: u64) -> Result<Deployment> {
    spec.validate()?;
    let mut d = Deployment {
        room_extent: ROOM_EXTENT,
        tx_pos: TX_POS,
        rx_pos: RX_POS,
        tx_gain: 1.0,
        rx_gain: 1.0,
        clutter: sample_clutter(spec),
        target: None,
        walls: spec.walls.clone(),
    };
    if spec.hypothesis == Hypothesis::H1 {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let position = match spec.scenario {
            Scenario::Los => draw_until(&mut rng, &Region { min: Vec2::default(), max: ROOM_EXTENT }, |p| {
                clear_of_antennas(p, TARGET_STANDOFF_M)
            })?,
            Scenario::Nlos => {
                let region = spec
                    .target_region()
                    .ok_or_else(|| Error::Config("nlos scenario requires walls".into()))?;
                draw_until(&mut rng, &region, |p| {
                    clear_of_antennas(p, TARGET_STANDOFF_M)
                        && segment_occluded(p, TX_POS, &spec.walls)
                        && segment_occluded(p, RX_POS, &spec.walls)
                })?
            }
        };
        let speed = uniform(&mut rng, spec.target_speed_range);
        let heading = rng.random_range(0.0..2.0 * PI);
        let velocity = if speed > 0.0 {
            Vec2::new(speed * heading.cos(), speed * heading.sin())
        } else {
            Vec2::default()
        };
        d.target = Some(Scatterer::target(position, velocity, spec.target_rcs));
    }
    d.validate()?;
    Ok(d)
}

fn draw_until(rng: &mut impl Rng, region: &Region, accept: impl Fn(Vec2) -> bool) -> Result<Vec2> {
    for _ in 0..MAX_REJECTION_DRAWS {
        let p = region.sample(rng);
        if accept(p) {
            return Ok(p);
        }
    }
    Err(Error::Config("could not place a target satisfying the scenario constraints".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const FC: f64 = 28e9;

    fn room(clutter: Vec<Scatterer>, target: Option<Scatterer>, walls: Vec<Wall>) -> Deployment {
        Deployment {
            room_extent: ROOM_EXTENT,
            tx_pos: TX_POS,
            rx_pos: RX_POS,
            tx_gain: 1.0,
            rx_gain: 1.0,
            clutter,
            target,
            walls,
        }
    }

    #[test]
    fn direct_delay_of_the_baseline() {
        let p = direct_path(&room(vec![], None, vec![]), FC);
        assert!((p.delay_s - 33.356e-9).abs() < 1e-12);
        assert_eq!(p.doppler_hz, 0.0);
    }

    #[test]
    fn scatter_delay_from_room_centre() {
        let d = room(vec![], None, vec![]);
        let s = Scatterer::clutter(Vec2::new(5.0, 5.0), 1.0);
        let p = scatter_path(&d, &s, FC).unwrap();
        assert!((p.delay_s - 47.17e-9).abs() < 0.01e-9);
        assert_eq!(p.num_reflections, 0);
    }

    #[test]
    fn unit_direct_gain_distance() {
        let lambda = SPEED_OF_LIGHT / FC;
        let mut d = room(vec![], None, vec![]);
        d.rx_pos = Vec2::new(lambda * (1.0 / (4.0 * PI)).sqrt(), 0.0);
        assert!((direct_gain(&d, FC) - 1.0).abs() < 1e-12);
        let g1 = direct_gain(&d, FC);
        d.rx_pos = d.rx_pos * 2.0;
        assert!((direct_gain(&d, FC) - g1 / 4.0).abs() < 1e-12);
    }

    #[test]
    fn los_path_count_and_hypotheses() {
        let clutter: Vec<_> = (1..=5).map(|i| Scatterer::clutter(Vec2::new(i as f64, 6.0), 2.0)).collect();
        let t = Scatterer::target(Vec2::new(3.0, 2.0), Vec2::new(1.0, 0.0), 1.0);
        let h1 = enumerate_paths(&room(clutter.clone(), Some(t), vec![]), FC).unwrap();
        assert_eq!(h1.len(), 5 + 2);
        assert_eq!(h1[0].source_kind, SourceKind::Direct);
        assert_eq!(h1.last().unwrap().source_kind, SourceKind::Target);
        let h0 = enumerate_paths(&room(clutter, None, vec![]), FC).unwrap();
        assert_eq!(h0.len(), 6);
        assert!(h0.iter().all(|p| p.source_kind != SourceKind::Target));
    }

    #[test]
    fn doppler_sign_follows_range_rate() {
        let d = room(vec![], None, vec![]);
        // Moving straight down toward the tx-rx baseline shortens both legs.
        let s = Scatterer::target(Vec2::new(5.0, 5.0), Vec2::new(0.0, -1.0), 1.0);
        let p = scatter_path(&d, &s, FC).unwrap();
        let want = FC / SPEED_OF_LIGHT * 2.0 * (5.0 / 50f64.sqrt());
        assert!((p.doppler_hz - want).abs() < 1e-9);
    }

    #[test]
    fn coincident_scatterer_is_degenerate() {
        let d = room(vec![], None, vec![]);
        let s = Scatterer::clutter(TX_POS, 1.0);
        assert!(matches!(scatter_path(&d, &s, FC), Err(Error::DegenerateGeometry(_))));
    }

    #[test]
    fn occlusion_examples() {
        let w = [Wall::new(Vec2::new(5.0, -1.0), Vec2::new(5.0, 1.0))];
        assert!(segment_occluded(TX_POS, RX_POS, &w));
        assert!(!segment_occluded(TX_POS, Vec2::new(4.0, 3.0), &w));
        // Touching the wall endpoint is not a crossing.
        assert!(!segment_occluded(Vec2::new(4.0, 1.0), Vec2::new(6.0, 1.0), &w));
        // Parallel along the wall is not a crossing.
        assert!(!segment_occluded(Vec2::new(5.0, -3.0), Vec2::new(5.0, 3.0), &w));
    }

    #[test]
    fn blocked_direct_path_is_dropped() {
        let w = vec![Wall::new(Vec2::new(5.0, -1.0), Vec2::new(5.0, 1.0))];
        let paths = enumerate_paths(&room(vec![], None, w), FC).unwrap();
        assert!(paths.iter().all(|p| p.source_kind != SourceKind::Direct));
    }

    /// A low wall hides the scatterer from both antennas; a long wall above
    /// gives each leg one bounce.
    #[test]
    fn double_bounce_fixture() {
        let walls = vec![
            Wall::new(Vec2::new(2.0, 0.5), Vec2::new(8.0, 0.5)),
            Wall::new(Vec2::new(-10.0, 3.0), Vec2::new(20.0, 3.0)),
        ];
        let t = Scatterer::target(Vec2::new(5.0, 1.0), Vec2::default(), 1.0);
        let paths = enumerate_paths(&room(vec![], Some(t), walls), FC).unwrap();
        assert_eq!(paths.len(), 2);
        assert_eq!(paths[0].source_kind, SourceKind::Direct);
        let p = &paths[1];
        assert_eq!(p.num_reflections, 2);
        // Image of tx across y = 3 is (0, 6); unfolded leg to (5, 1).
        let leg = (25.0f64 + 25.0).sqrt();
        assert!((p.dist_tx_m - leg).abs() < 1e-12 && (p.dist_rx_m - leg).abs() < 1e-12);
        let d = room(vec![], None, vec![]);
        let free = radar_gain(&d, 1.0, leg, leg, FC);
        assert!((p.gain_amplitude / free - 10f64.powf(-6.0 / 20.0)).abs() < 1e-12);
        for q in &p.reflection_points {
            assert!((q.y - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn nlos_targets_are_hidden_and_reflected() {
        let spec = ScenarioSpec::new(Scenario::Nlos, Hypothesis::H1, true, 3);
        for seed in 0..50 {
            let d = sample_deployment(&spec, seed).unwrap();
            let t = d.target.unwrap();
            assert!(segment_occluded(t.position, TX_POS, &d.walls));
            assert!(segment_occluded(t.position, RX_POS, &d.walls));
            let paths = enumerate_paths(&d, FC).unwrap();
            let target: Vec<_> = paths.iter().filter(|p| p.source_kind == SourceKind::Target).collect();
            assert!(!target.is_empty(), "seed {seed}: hidden target has no path");
            assert!(target.iter().all(|p| p.num_reflections >= 1));
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let spec = ScenarioSpec::new(Scenario::Los, Hypothesis::H1, true, 8);
        assert_eq!(sample_deployment(&spec, 4).unwrap(), sample_deployment(&spec, 4).unwrap());
        assert_ne!(sample_deployment(&spec, 4).unwrap(), sample_deployment(&spec, 5).unwrap());
        let h0 = ScenarioSpec {
            hypothesis: Hypothesis::H0,
            ..spec.clone()
        };
        let d = sample_deployment(&h0, 4).unwrap();
        assert!(d.target.is_none());
        assert_eq!(d.clutter, sample_deployment(&spec, 99).unwrap().clutter);
    }

    #[test]
    fn stationary_spec_gives_zero_velocity() {
        let spec = ScenarioSpec::new(Scenario::Los, Hypothesis::H1, false, 1);
        let t = sample_deployment(&spec, 2).unwrap().target.unwrap();
        assert_eq!(t.velocity, Vec2::default());
    }

    #[test]
    fn nlos_without_walls_is_rejected() {
        let mut spec = ScenarioSpec::new(Scenario::Nlos, Hypothesis::H1, true, 1);
        spec.walls.clear();
        assert!(matches!(sample_deployment(&spec, 0), Err(Error::Config(_))));
    }

    fn point() -> impl Strategy<Value = Vec2> {
        (0.5f64..9.5, 0.5f64..9.5).prop_map(|(x, y)| Vec2::new(x, y))
    }

    fn wall() -> impl Strategy<Value = Wall> {
        (point(), point())
            .prop_filter("non-degenerate", |(a, b)| a.dist(*b) > 0.1)
            .prop_map(|(a, b)| Wall::new(a, b))
    }

    proptest! {
        #[test]
        fn reflect_is_an_involution(p in point(), w in wall()) {
            let back = reflect_point(reflect_point(p, &w), &w);
            prop_assert!(back.dist(p) < 1e-9);
        }

        #[test]
        fn swapping_antennas_keeps_delay_and_gain(s in point(), v in point(), walls in prop::collection::vec(wall(), 0..3)) {
            let t = Scatterer::target(s, v - Vec2::new(5.0, 5.0), 1.0);
            let d = room(vec![], Some(t), walls);
            let mut swapped = d.clone();
            std::mem::swap(&mut swapped.tx_pos, &mut swapped.rx_pos);
            prop_assume!(d.tx_pos.dist(s) > 1e-3 && d.rx_pos.dist(s) > 1e-3);
            let sorted = |mut ps: PathSet| {
                ps.sort_by(|a, b| a.delay_s.total_cmp(&b.delay_s).then(a.gain_amplitude.total_cmp(&b.gain_amplitude)));
                ps
            };
            let a = sorted(enumerate_paths(&d, FC).unwrap());
            let b = sorted(enumerate_paths(&swapped, FC).unwrap());
            prop_assert_eq!(a.len(), b.len());
            for (p, q) in a.iter().zip(&b) {
                prop_assert!((p.delay_s - q.delay_s).abs() <= 1e-12 * p.delay_s);
                prop_assert!((p.gain_amplitude - q.gain_amplitude).abs() <= 1e-9 * p.gain_amplitude);
                prop_assert!((p.doppler_hz - q.doppler_hz).abs() <= 1e-9 * (1.0 + p.doppler_hz.abs()));
            }
        }

        #[test]
        fn farther_scatterers_are_weaker(x in 1.0f64..9.0, y in 1.0f64..5.0, dy in 0.1f64..4.0) {
            let d = room(vec![], None, vec![]);
            let near = scatter_path(&d, &Scatterer::clutter(Vec2::new(x, y), 1.0), FC).unwrap();
            let far = scatter_path(&d, &Scatterer::clutter(Vec2::new(x, y + dy), 1.0), FC).unwrap();
            prop_assert!(far.gain_amplitude < near.gain_amplitude);
            prop_assert!(far.delay_s > near.delay_s);
        }

        #[test]
        fn reflection_points_lie_on_their_walls(s in point(), walls in prop::collection::vec(wall(), 1..4)) {
            prop_assume!(TX_POS.dist(s) > 1e-3 && RX_POS.dist(s) > 1e-3);
            let d = room(vec![Scatterer::clutter(s, 1.0)], None, walls.clone());
            for p in enumerate_paths(&d, FC).unwrap().into_iter().filter(|p| p.source_kind != SourceKind::Direct) {
                prop_assert_eq!(p.reflection_points.len(), p.num_reflections as usize);
                for q in &p.reflection_points {
                    let on_some = walls.iter().any(|w| {
                        let len = w.a.dist(w.b);
                        (q.dist(w.a) + q.dist(w.b) - len).abs() < 1e-9 * len.max(1.0)
                    });
                    prop_assert!(on_some);
                }
                // An unfolded leg is never shorter than the straight one.
                prop_assert!(p.dist_tx_m >= s.dist(TX_POS) - 1e-9);
                prop_assert!(p.dist_rx_m >= s.dist(RX_POS) - 1e-9);
            }
        }
    }
}
