//! Scenario files: sensor tracks plus a script of device actions.

use std::collections::BTreeMap;
use std::path::Path;

use immerflow_core::dataflow::ParamMap;
use immerflow_core::grammar::{Link, Mark};
use immerflow_core::sensor::SensorKind;
use immerflow_core::transform::{distance, RigidTransform, Vec3};
use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::scene::SimScene;
use crate::track::{DepthSource, PoseTrack};

fn default_poll_ms() -> u64 {
    100
}

fn default_tolerance() -> f64 {
    1e-6
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    /// Access code used by `refresh_node`.
    #[serde(default)]
    pub workspace: Option<String>,
    #[serde(default = "default_poll_ms")]
    pub poll_interval_ms: u64,
    #[serde(default)]
    pub tracks: BTreeMap<SensorKind, PoseTrack>,
    #[serde(default)]
    pub depth: Option<DepthSource>,
    /// Marker poses reported as soon as the device is connected.
    #[serde(default)]
    pub markers: BTreeMap<String, RigidTransform>,
    #[serde(default)]
    pub script: Vec<Step>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step {
    /// Device clock at which the action fires; defaults to "now".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at: Option<f64>,
    #[serde(flatten)]
    pub action: Action,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    /// Let simulated time pass: poll, stream.
    AdvanceClock { seconds: f64 },
    /// Pinch at a world position, injected into the hand stream.
    AirTap { position: Vec3 },
    MoveMarker { marker_id: String, pose: RigidTransform },
    ExpectSpec(SpecExpectation),
    /// Re-executes a workspace node, optionally patching its params.
    RefreshNode {
        node: String,
        #[serde(default)]
        params: ParamMap,
    },
    /// Fetches the workspace's spatial anchors into the scene.
    ResolveAnchors,
}

/// A predicate over the placed specs. Filters narrow the candidate set; the
/// expectation then asks for `count` matches, none (`absent`), or at least one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpecExpectation {
    pub name: String,
    #[serde(default)]
    pub spec_id: Option<String>,
    #[serde(default)]
    pub mark: Option<Mark>,
    /// `TargetLink`, `AxisLink`, `ObjectLink` or `none`.
    #[serde(default)]
    pub link: Option<String>,
    #[serde(default)]
    pub link_target: Option<String>,
    /// World translation.
    #[serde(default)]
    pub position: Option<Vec3>,
    /// Largest allowed gap between axis-linked domain endpoints.
    #[serde(default)]
    pub axis_aligned: Option<f64>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub count: Option<usize>,
    #[serde(default)]
    pub absent: bool,
}

fn link_name(link: &Option<Link>) -> &'static str {
    match link {
        None => "none",
        Some(Link::TargetLink { .. }) => "TargetLink",
        Some(Link::AxisLink { .. }) => "AxisLink",
        Some(Link::ObjectLink { .. }) => "ObjectLink",
    }
}

impl SpecExpectation {
    /// Ids of the placed specs passing every filter.
    pub fn matches(&self, scene: &SimScene) -> Vec<String> {
        scene
            .placed
            .iter()
            .filter(|(id, p)| {
                self.spec_id.as_ref().is_none_or(|s| s == *id)
                    && self.mark.is_none_or(|m| m == p.spec.mark)
                    && self.link.as_deref().is_none_or(|l| l == link_name(&p.spec.link))
                    && self.link_target.as_deref().is_none_or(|t| {
                        p.spec.link.as_ref().and_then(Link::target_spec) == Some(t)
                    })
                    && self
                        .position
                        .is_none_or(|want| distance(want, p.world.translation) <= self.tolerance)
                    && self
                        .axis_aligned
                        .is_none_or(|tol| scene.axis_link_gap(id).is_some_and(|g| g <= tol))
            })
            .map(|(id, _)| id.clone())
            .collect()
    }

    /// `Err` carries a human-readable reason.
    pub fn evaluate(&self, scene: &SimScene) -> Result<Vec<String>, String> {
        let found = self.matches(scene);
        let ok = match (self.count, self.absent) {
            (Some(n), _) => found.len() == n,
            (None, true) => found.is_empty(),
            (None, false) => !found.is_empty(),
        };
        if ok {
            Ok(found)
        } else {
            let want = match (self.count, self.absent) {
                (Some(n), _) => format!("{n}"),
                (None, true) => "0".into(),
                (None, false) => "at least 1".into(),
            };
            Err(format!(
                "expected {want} matching spec(s), found {} {:?}; placed: {:?}",
                found.len(),
                found,
                scene.placed.keys().collect::<Vec<_>>()
            ))
        }
    }
}

impl Scenario {
    pub fn idle() -> Self {
        Scenario {
            name: "idle".into(),
            workspace: None,
            poll_interval_ms: default_poll_ms(),
            tracks: BTreeMap::new(),
            depth: None,
            markers: BTreeMap::new(),
            script: Vec::new(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| SimError::InvalidScenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::InvalidScenario(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            SimError::InvalidScenario(m) => SimError::InvalidScenario(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn poll_interval_s(&self) -> f64 {
        self.poll_interval_ms as f64 / 1000.0
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidScenario(m));
        if self.poll_interval_ms == 0 {
            return bad("poll interval must be positive".into());
        }
        for (kind, track) in &self.tracks {
            if !matches!(kind, SensorKind::HeadPose | SensorKind::EyeGaze | SensorKind::HandJoints) {
                return bad(format!("{kind} is not a pose track"));
            }
            track.validate()?;
        }
        if let Some(d) = &self.depth {
            d.validate()?;
        }
        let mut last = 0.0;
        for (i, step) in self.script.iter().enumerate() {
            if let Some(at) = step.at {
                if !(at >= last) {
                    return bad(format!("step {i}: time {at} precedes {last}"));
                }
                last = at;
            }
            match &step.action {
                Action::AdvanceClock { seconds } if !(*seconds >= 0.0) => {
                    return bad(format!("step {i}: cannot advance by {seconds}"));
                }
                Action::RefreshNode { .. } if self.workspace.is_none() => {
                    return bad(format!("step {i}: refresh_node needs a workspace"));
                }
                Action::ResolveAnchors if self.workspace.is_none() => {
                    return bad(format!("step {i}: resolve_anchors needs a workspace"));
                }
                Action::MoveMarker { pose, .. } if pose.orthonormality_error().0 > 1e-6 => {
                    return bad(format!("step {i}: marker rotation is not orthonormal"));
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Sensor kinds the device streams.
    pub fn stream_kinds(&self) -> Vec<SensorKind> {
        let mut kinds: Vec<SensorKind> = self.tracks.keys().copied().collect();
        let taps = self.script.iter().any(|s| matches!(s.action, Action::AirTap { .. }));
        if taps && !kinds.contains(&SensorKind::HandJoints) {
            kinds.push(SensorKind::HandJoints);
        }
        if self.depth.is_some() {
            kinds.push(SensorKind::DepthFrame);
        }
        kinds.sort();
        kinds
    }

    pub fn expectations(&self) -> impl Iterator<Item = &SpecExpectation> {
        self.script.iter().filter_map(|s| match &s.action {
            Action::ExpectSpec(e) => Some(e),
            _ => None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_script() {
        let s = Scenario::from_json(
            r#"{
              "name": "t", "workspace": "demo1",
              "tracks": {"HeadPose": {"rate_hz": 60, "keyframes": [{"t": 0, "position": [0, 1.6, 0]}]}},
              "script": [
                {"action": "advance_clock", "seconds": 0.5},
                {"at": 1.0, "action": "air_tap", "position": [0.1, 1.2, 0.4]},
                {"action": "refresh_node", "node": "n4"},
                {"action": "expect_spec", "name": "scatter placed", "mark": "point", "count": 1}
              ]
            }"#,
        )
        .unwrap();
        assert_eq!(s.poll_interval_ms, 100);
        assert_eq!(s.script.len(), 4);
        assert_eq!(s.stream_kinds(), vec![SensorKind::HeadPose, SensorKind::HandJoints]);
        assert_eq!(s.expectations().count(), 1);
    }

    #[test]
    fn rejects_decreasing_times_and_orphan_refresh() {
        let err = Scenario::from_json(
            r#"{"script": [{"at": 2, "action": "advance_clock", "seconds": 1}, {"at": 1, "action": "advance_clock", "seconds": 1}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, SimError::InvalidScenario(m) if m.contains("precedes")));
        let err = Scenario::from_json(r#"{"script": [{"action": "refresh_node", "node": "n1"}]}"#).unwrap_err();
        assert!(matches!(err, SimError::InvalidScenario(_)));
    }
}
