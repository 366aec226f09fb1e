//! Flat spacetime in units with c = 1: events, causal classification, past
//! light cones, boosts along x, and the frame-relative branching cascade.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Intervals with |Δs²| at or below this are lightlike.
pub const LIGHTLIKE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpacetimeError {
    #[error("frame velocity {0} must satisfy |v| < 1")]
    Frame(f64),
    #[error("event {0} has non-finite coordinates")]
    NonFinite(String),
    #[error("trigger event {id} at x = {x} is not on the first world line (expected x = {expected})")]
    TriggerOffLine { id: String, x: f64, expected: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub id: String,
    pub t: f64,
    pub x: f64,
    #[serde(default)]
    pub y: f64,
    #[serde(default)]
    pub z: f64,
}

impl Event {
    pub fn new(id: impl Into<String>, t: f64, x: f64) -> Self {
        Event { id: id.into(), t, x, y: 0.0, z: 0.0 }
    }

    pub fn validate(&self) -> Result<(), SpacetimeError> {
        if [self.t, self.x, self.y, self.z].iter().all(|c| c.is_finite()) {
            Ok(())
        } else {
            Err(SpacetimeError::NonFinite(self.id.clone()))
        }
    }

    /// Squared interval (Δt)² − |Δr|², positive for timelike separation.
    pub fn interval_sqr(&self, other: &Event) -> f64 {
        let (dt, dx, dy, dz) = (self.t - other.t, self.x - other.x, self.y - other.y, self.z - other.z);
        dt * dt - dx * dx - dy * dy - dz * dz
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(t={}, x={})", self.id, self.t, self.x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntervalClass {
    Timelike,
    Spacelike,
    Lightlike,
}

impl fmt::Display for IntervalClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IntervalClass::Timelike => "timelike",
            IntervalClass::Spacelike => "spacelike",
            IntervalClass::Lightlike => "lightlike",
        })
    }
}

pub fn interval_class(a: &Event, b: &Event) -> IntervalClass {
    let s = a.interval_sqr(b);
    if s.abs() <= LIGHTLIKE_TOLERANCE {
        IntervalClass::Lightlike
    } else if s > 0.0 {
        IntervalClass::Timelike
    } else {
        IntervalClass::Spacelike
    }
}

/// Whether `cause` lies in the closed past light cone of `effect`.
pub fn in_past_light_cone(cause: &Event, effect: &Event) -> bool {
    cause.t <= effect.t + LIGHTLIKE_TOLERANCE && interval_class(cause, effect) != IntervalClass::Spacelike
}

/// Candidates in the closed past light cone of `e` (lightlike boundary included).
pub fn past_light_cone<'a, I>(e: &Event, candidates: I) -> Vec<Event>
where
    I: IntoIterator<Item = &'a Event>,
{
    candidates.into_iter().filter(|c| in_past_light_cone(c, e)).cloned().collect()
}

/// Inertial frame moving with velocity `v` along x relative to the base frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    v: f64,
}

impl Frame {
    pub fn new(v: f64) -> Result<Self, SpacetimeError> {
        if v.is_finite() && v.abs() < 1.0 {
            Ok(Frame { v })
        } else {
            Err(SpacetimeError::Frame(v))
        }
    }

    pub fn rest() -> Self {
        Frame { v: 0.0 }
    }

    pub fn velocity(&self) -> f64 {
        self.v
    }

    pub fn gamma(&self) -> f64 {
        1.0 / (1.0 - self.v * self.v).sqrt()
    }

    /// Time coordinate of `e` in this frame.
    pub fn time_of(&self, e: &Event) -> f64 {
        self.gamma() * (e.t - self.v * e.x)
    }
}

/// Coordinates of `e` in frame `f`. y and z are unchanged.
pub fn boost(e: &Event, f: &Frame) -> Event {
    let g = f.gamma();
    Event { id: e.id.clone(), t: g * (e.t - f.v * e.x), x: g * (e.x - f.v * e.t), y: e.y, z: e.z }
}

/// Inverse of [`boost`].
pub fn unboost(e: &Event, f: &Frame) -> Event {
    boost(e, &Frame { v: -f.v })
}

/// Constant-velocity world line `x(t) = x0 + v t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldLine {
    pub x0: f64,
    pub v: f64,
}

impl WorldLine {
    pub fn new(x0: f64, v: f64) -> Result<Self, SpacetimeError> {
        Frame::new(v)?;
        if !x0.is_finite() {
            return Err(SpacetimeError::NonFinite("world line".into()));
        }
        Ok(WorldLine { x0, v })
    }

    pub fn x_at(&self, t: f64) -> f64 {
        self.x0 + self.v * t
    }

    pub fn rest_frame(&self) -> Frame {
        Frame { v: self.v }
    }

    /// The point of this line simultaneous with `e` in frame `f`.
    pub fn simultaneous_with(&self, e: &Event, f: &Frame, id: impl Into<String>) -> Event {
        // t − v x = τ along the hyperplane through e
        let tau = e.t - f.v * e.x;
        let t = (tau + f.v * self.x0) / (1.0 - f.v * self.v);
        Event::new(id, t, self.x_at(t))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CascadeStep {
    pub event: Event,
    /// 1 or 2: which world line branches here.
    pub line: u8,
    /// "trigger", or the name of the frame whose simultaneity induced it.
    pub induced_in: String,
    /// Time coordinate in the inducing frame (shared with the inducing event).
    pub frame_time: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CascadeStop {
    Depth,
    TimeFloor,
    /// The two frames share a simultaneity hyperplane; nothing further is induced.
    Degenerate,
}

/// Finite prefix of the branching regress.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cascade {
    pub steps: Vec<CascadeStep>,
    pub stop: CascadeStop,
    /// Whether the frame order was swapped to follow the past-directed branch.
    pub swapped: bool,
}

impl Cascade {
    pub fn is_degenerate(&self) -> bool {
        self.stop == CascadeStop::Degenerate
    }

    pub fn events(&self) -> Vec<&Event> {
        self.steps.iter().map(|s| &s.event).collect()
    }
}

impl fmt::Display for Cascade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<5} {:>4} {:>8} {:>14} {:>14} {:>14}", "event", "line", "frame", "t", "x", "frame time")?;
        for s in &self.steps {
            writeln!(
                f,
                "{:<5} {:>4} {:>8} {:>14.9} {:>14.9} {:>14.9}",
                s.event.id, s.line, s.induced_in, s.event.t, s.event.x, s.frame_time
            )?;
        }
        let stop = match self.stop {
            CascadeStop::Depth => "depth limit reached",
            CascadeStop::TimeFloor => "time floor reached",
            CascadeStop::Degenerate => "degenerate: frames share simultaneity, no regress",
        };
        writeln!(f, "finite prefix of {} events; {stop}", self.steps.len())
    }
}

fn run_cascade(lines: [WorldLine; 2], frames: [(Frame, &str); 2], trigger: &Event, depth: usize, floor: f64) -> Cascade {
    let mut steps = vec![CascadeStep { event: trigger.clone(), line: 1, induced_in: "trigger".into(), frame_time: trigger.t }];
    let degenerate = (frames[0].0.v - frames[1].0.v).abs() <= LIGHTLIKE_TOLERANCE;
    let mut stop = CascadeStop::Depth;
    while steps.len() < depth {
        let k = steps.len();
        if degenerate && k >= 2 {
            stop = CascadeStop::Degenerate;
            break;
        }
        let (frame, name) = frames[(k - 1) % 2];
        let line_idx = k % 2;
        let prev = &steps[k - 1].event;
        let e = lines[line_idx].simultaneous_with(prev, &frame, format!("E{}", k + 1));
        if e.t < floor {
            stop = CascadeStop::TimeFloor;
            break;
        }
        let frame_time = frame.time_of(&e);
        steps.push(CascadeStep { event: e, line: line_idx as u8 + 1, induced_in: name.into(), frame_time });
    }
    if degenerate && steps.len() == 2 && depth == 2 {
        stop = CascadeStop::Degenerate;
    }
    Cascade { steps, stop, swapped: false }
}

/// Applies "branching anywhere is branching everywhere on the simultaneity
/// hyperplane" alternately in two frames: E1 on line 1 induces E2 on line 2
/// (simultaneous in the first frame), E2 induces E3 on line 1 (simultaneous in
/// the second frame), and so on.
///
/// The rule generates a future-directed and a past-directed chain; the frame
/// order is swapped when needed so the returned chain is the past-directed
/// one. Stops after `depth` events or when an induced time drops below
/// `time_floor`. Lines at rest in a common frame give a degenerate two-event
/// cascade.
pub fn branching_cascade_demo(
    line1: WorldLine,
    line2: WorldLine,
    frames: (Frame, Frame),
    trigger: &Event,
    depth: usize,
    time_floor: f64,
) -> Result<Cascade, SpacetimeError> {
    trigger.validate()?;
    let expected = line1.x_at(trigger.t);
    if (trigger.x - expected).abs() > 1e-9 {
        return Err(SpacetimeError::TriggerOffLine { id: trigger.id.clone(), x: trigger.x, expected });
    }
    let depth = depth.max(1);
    let lines = [line1, line2];
    let forward = run_cascade(lines, [(frames.0, "S"), (frames.1, "S'")], trigger, depth, time_floor);
    if forward.is_degenerate() || forward.steps.len() < 3 || forward.steps[2].event.t < trigger.t {
        return Ok(forward);
    }
    let mut swapped = run_cascade(lines, [(frames.1, "S'"), (frames.0, "S")], trigger, depth, time_floor);
    swapped.swapped = true;
    Ok(swapped)
}

/// Cascade using the rest frames of the two world lines as S and S'.
pub fn rest_frame_cascade(
    line1: WorldLine,
    line2: WorldLine,
    trigger: &Event,
    depth: usize,
    time_floor: f64,
) -> Result<Cascade, SpacetimeError> {
    branching_cascade_demo(line1, line2, (line1.rest_frame(), line2.rest_frame()), trigger, depth, time_floor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn classification() {
        let o = Event::new("o", 0.0, 0.0);
        assert_eq!(interval_class(&o, &Event::new("a", 1.0, 0.0)), IntervalClass::Timelike);
        assert_eq!(interval_class(&o, &Event::new("b", 0.0, 1.0)), IntervalClass::Spacelike);
        assert_eq!(interval_class(&o, &Event::new("c", 1.0, 1.0)), IntervalClass::Lightlike);
    }

    #[test]
    fn light_cone() {
        let e = Event::new("e", 2.0, 0.0);
        let c = [Event::new("a", 0.0, 0.0), Event::new("b", 0.0, 3.0)];
        let ids: Vec<String> = past_light_cone(&e, &c).into_iter().map(|e| e.id).collect();
        assert_eq!(ids, vec!["a"]);
        assert_eq!(past_light_cone(&Event::new("e", 1.0, 0.0), &[Event::new("c", 0.0, 1.0)]).len(), 1);
        assert!(past_light_cone(&e, &[]).is_empty());
        // future events are excluded
        assert!(past_light_cone(&e, &[Event::new("f", 3.0, 0.0)]).is_empty());
    }

    #[test]
    fn boosts() {
        let f = Frame::new(0.6).unwrap();
        assert_eq!(boost(&Event::new("o", 0.0, 0.0), &f), Event::new("o", 0.0, 0.0));
        let a = boost(&Event::new("a", 0.0, -1.0), &f);
        let b = boost(&Event::new("b", 0.0, 1.0), &f);
        assert!((a.t - b.t).abs() > 1.0);
        assert!(matches!(Frame::new(1.0), Err(SpacetimeError::Frame(_))));
        assert!(matches!(Frame::new(-1.5), Err(SpacetimeError::Frame(_))));
        let e = Event::new("e", 0.3, -2.0);
        let back = unboost(&boost(&e, &f), &f);
        assert!((back.t - e.t).abs() < 1e-12 && (back.x - e.x).abs() < 1e-12);
    }

    #[test]
    fn receding_cascade() {
        let l1 = WorldLine::new(0.0, 0.0).unwrap();
        let l2 = WorldLine::new(1.0, 0.5).unwrap();
        let c = rest_frame_cascade(l1, l2, &Event::new("E1", 0.0, 0.0), 6, -1e6).unwrap();
        let times: Vec<f64> = c.steps.iter().map(|s| s.event.t).collect();
        let expect = [0.0, 0.0, -0.5, -0.5, -0.875, -0.875];
        for (t, e) in times.iter().zip(expect) {
            assert!((t - e).abs() < 1e-12, "{times:?}");
        }
        assert!(!c.swapped);
        let frames: Vec<&str> = c.steps.iter().map(|s| s.induced_in.as_str()).collect();
        assert_eq!(frames, ["trigger", "S", "S'", "S", "S'", "S"]);
    }

    #[test]
    fn approaching_cascade_is_swapped() {
        let l1 = WorldLine::new(0.0, 0.0).unwrap();
        let l2 = WorldLine::new(1.0, -0.5).unwrap();
        let c = rest_frame_cascade(l1, l2, &Event::new("E1", 0.0, 0.0), 5, -1e6).unwrap();
        assert!(c.swapped);
        assert!(c.steps[2].event.t < c.steps[0].event.t);
        assert!(c.steps[3].event.t < c.steps[1].event.t);
    }

    #[test]
    fn degenerate_and_floor() {
        let l1 = WorldLine::new(0.0, 0.3).unwrap();
        let l2 = WorldLine::new(2.0, 0.3).unwrap();
        let c = rest_frame_cascade(l1, l2, &Event::new("E1", 0.0, 0.0), 10, -1e6).unwrap();
        assert_eq!(c.steps.len(), 2);
        assert!(c.is_degenerate());
        let l2 = WorldLine::new(1.0, 0.5).unwrap();
        let c = rest_frame_cascade(WorldLine::new(0.0, 0.0).unwrap(), l2, &Event::new("E1", 0.0, 0.0), 50, -0.6).unwrap();
        assert_eq!(c.stop, CascadeStop::TimeFloor);
        assert_eq!(c.steps.len(), 4);
        let off = rest_frame_cascade(WorldLine::new(0.0, 0.0).unwrap(), l2, &Event::new("E1", 0.0, 0.5), 3, -1.0);
        assert!(matches!(off, Err(SpacetimeError::TriggerOffLine { .. })));
    }

    proptest! {
        #[test]
        fn classification_is_boost_invariant(
            t1 in -10.0f64..10.0, x1 in -10.0f64..10.0,
            t2 in -10.0f64..10.0, x2 in -10.0f64..10.0,
            v in -0.95f64..0.95,
        ) {
            let a = Event::new("a", t1, x1);
            let b = Event::new("b", t2, x2);
            let s = a.interval_sqr(&b);
            prop_assume!(s.abs() > 1e-6);
            let f = Frame::new(v).unwrap();
            prop_assert_eq!(interval_class(&a, &b), interval_class(&boost(&a, &f), &boost(&b, &f)));
        }

        #[test]
        fn cone_never_spacelike(t in -5.0f64..5.0, x in -5.0f64..5.0, pts in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 0..20)) {
            let e = Event::new("e", t, x);
            let cands: Vec<Event> = pts.iter().enumerate().map(|(i, (a, b))| Event::new(format!("c{i}"), *a, *b)).collect();
            for c in past_light_cone(&e, &cands) {
                prop_assert_ne!(interval_class(&c, &e), IntervalClass::Spacelike);
                prop_assert!(c.t <= e.t + LIGHTLIKE_TOLERANCE);
            }
        }
    }
}
