//! The device's in-memory scene graph.

use std::collections::BTreeMap;

use immerflow_core::grammar::{axis_point, parse_spec, resolve_link, Link, LinkError, SpecRegistry, VisSpec};
use immerflow_core::sensor::SensorKind;
use immerflow_core::transform::{distance, RigidTransform, Similarity, Vec3};
use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::track::PoseTrack;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskKind {
    RenderSpec,
    ClearScene,
    CaptureRequest,
}

/// A scheduler task as delivered by a poll.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub task_id: String,
    pub kind: TaskKind,
    #[serde(default)]
    pub payload: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlacedSpec {
    pub spec: VisSpec,
    /// The payload exactly as received.
    pub payload: String,
    /// Output of link resolution. For `view` specs this is relative to the
    /// head pose rather than the world.
    pub world: Similarity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "effect", rename_all = "snake_case")]
pub enum Applied {
    Placed { spec_id: String, replaced: bool },
    Cleared { removed: usize },
    CaptureAcknowledged,
}

#[derive(Clone, Debug, Default)]
pub struct SimScene {
    pub placed: BTreeMap<String, PlacedSpec>,
    pub markers: BTreeMap<String, RigidTransform>,
    pub actors: BTreeMap<SensorKind, PoseTrack>,
    /// Shared world anchors by id, as last resolved from the workspace.
    pub anchors: BTreeMap<String, Vec3>,
    /// Simulated seconds; never decreases.
    pub clock: f64,
    registry: SpecRegistry,
}

fn link_error(e: LinkError) -> SimError {
    match e {
        LinkError::DanglingLink(id) => SimError::DanglingLink(id),
        other => SimError::MalformedSpec(other.to_string()),
    }
}

impl SimScene {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_clock(&mut self, t: f64) {
        if t > self.clock {
            self.clock = t;
        }
    }

    pub fn apply_task(&mut self, task: &Task) -> Result<Applied, SimError> {
        match task.kind {
            TaskKind::RenderSpec => {
                let (spec_id, replaced) = self.apply_spec_text(&task.payload)?;
                Ok(Applied::Placed { spec_id, replaced })
            }
            TaskKind::ClearScene => {
                let removed = self.placed.len();
                self.placed.clear();
                self.registry = SpecRegistry::new();
                Ok(Applied::Cleared { removed })
            }
            TaskKind::CaptureRequest => Ok(Applied::CaptureAcknowledged),
        }
    }

    /// Places or replaces a spec by id. On any error the scene is unchanged.
    pub fn apply_spec_text(&mut self, payload: &str) -> Result<(String, bool), SimError> {
        let spec = parse_spec(payload).map_err(|e| SimError::MalformedSpec(e.to_string()))?;
        if let Some(target) = spec.link.as_ref().and_then(Link::target_spec) {
            if target != spec.spec_id && self.registry.get(target).is_none() {
                return Err(SimError::DanglingLink(target.to_string()));
            }
        }
        let mut registry = self.registry.clone();
        registry.place(spec.clone()).map_err(link_error)?;
        let mut worlds = BTreeMap::new();
        for (id, s) in registry.specs() {
            worlds.insert(id.clone(), resolve_link(s, registry.specs()).map_err(link_error)?);
        }
        let id = spec.spec_id.clone();
        let replaced = self.placed.contains_key(&id);
        self.placed.insert(
            id.clone(),
            PlacedSpec {
                spec,
                payload: payload.to_string(),
                world: Similarity::identity(),
            },
        );
        for (sid, w) in worlds {
            if let Some(p) = self.placed.get_mut(&sid) {
                p.world = w;
            }
        }
        self.registry = registry;
        Ok((id, replaced))
    }

    pub fn world(&self, spec_id: &str) -> Option<&Similarity> {
        self.placed.get(spec_id).map(|p| &p.world)
    }

    /// For an axis-linked spec, the largest world distance between the two
    /// charts' positions of the shared field's domain endpoints.
    pub fn axis_link_gap(&self, spec_id: &str) -> Option<f64> {
        let own = self.placed.get(spec_id)?;
        let Some(Link::AxisLink { spec_id: target, field }) = &own.spec.link else {
            return None;
        };
        let tgt = self.placed.get(target)?;
        let (own_ch, _) = own.spec.channel_for_field(field)?;
        let (tgt_ch, enc) = tgt.spec.channel_for_field(field)?;
        let domain = match &enc.scale {
            immerflow_core::grammar::Scale::Linear { domain, .. } => *domain,
            _ => return None,
        };
        let mut gap: f64 = 0.0;
        for v in domain {
            let a = tgt.world.apply(axis_point(&tgt.spec, tgt_ch, v)?);
            let b = own.world.apply(axis_point(&own.spec, own_ch, v)?);
            gap = gap.max(distance(a, b));
        }
        Some(gap)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use immerflow_core::grammar::serialize_spec;
    use serde_json::json;

    fn spec(id: &str, link: serde_json::Value, translation: [f64; 3]) -> String {
        json!({
            "schema_version": 1, "spec_id": id, "mark": "point", "data_ref": "d",
            "channels": {}, "coordinate_type": "world",
            "transform": {"rotation": [1.0,0.0,0.0,0.0,1.0,0.0,0.0,0.0,1.0], "translation": translation, "scale": 1.0},
            "link": link, "filters": []
        })
        .to_string()
    }

    fn render(id: &str, payload: String) -> Task {
        Task {
            task_id: id.into(),
            kind: TaskKind::RenderSpec,
            payload,
        }
    }

    #[test]
    fn target_link_places_at_anchor() {
        let mut s = SimScene::new();
        let t = render("t1", spec("a", json!({"kind": "TargetLink", "position": [2.0, 0.0, 3.0]}), [0.0; 3]));
        s.apply_task(&t).unwrap();
        assert_eq!(s.world("a").unwrap().translation, [2.0, 0.0, 3.0]);
    }

    #[test]
    fn resend_replaces() {
        let mut s = SimScene::new();
        s.apply_task(&render("t1", spec("a", json!(null), [0.0; 3]))).unwrap();
        let out = s.apply_task(&render("t2", spec("a", json!(null), [1.0, 0.0, 0.0]))).unwrap();
        assert_eq!(out, Applied::Placed { spec_id: "a".into(), replaced: true });
        assert_eq!(s.placed.len(), 1);
        assert_eq!(s.world("a").unwrap().translation, [1.0, 0.0, 0.0]);
    }

    #[test]
    fn dangling_link_leaves_scene_unchanged() {
        let mut s = SimScene::new();
        s.apply_task(&render("t1", spec("a", json!(null), [0.0; 3]))).unwrap();
        let before = s.placed.clone();
        let err = s
            .apply_task(&render("t2", spec("b", json!({"kind": "ObjectLink", "spec_id": "zz"}), [0.0; 3])))
            .unwrap_err();
        assert_eq!(err, SimError::DanglingLink("zz".into()));
        assert_eq!(s.placed, before);
        let err = s.apply_task(&render("t3", "{".into())).unwrap_err();
        assert!(matches!(err, SimError::MalformedSpec(_)));
    }

    #[test]
    fn moving_the_root_moves_the_chain() {
        let mut s = SimScene::new();
        let root = |p: [f64; 3]| spec("a", json!({"kind": "TargetLink", "position": p}), [0.0; 3]);
        s.apply_task(&render("t1", root([0.0; 3]))).unwrap();
        s.apply_task(&render("t2", spec("b", json!({"kind": "ObjectLink", "spec_id": "a"}), [0.0, 1.0, 0.0]))).unwrap();
        s.apply_task(&render("t3", spec("c", json!({"kind": "ObjectLink", "spec_id": "b"}), [0.0, 0.0, 1.0]))).unwrap();
        s.apply_task(&render("t4", root([5.0, 0.0, 0.0]))).unwrap();
        assert_eq!(s.world("c").unwrap().translation, [5.0, 1.0, 1.0]);
        let cleared = s
            .apply_task(&Task {
                task_id: "t5".into(),
                kind: TaskKind::ClearScene,
                payload: String::new(),
            })
            .unwrap();
        assert_eq!(cleared, Applied::Cleared { removed: 3 });
        assert!(s.placed.is_empty());
        // The payload is kept verbatim.
        let text = root([1.0; 3]);
        s.apply_spec_text(&text).unwrap();
        assert_eq!(s.placed["a"].payload, text);
        assert_ne!(serialize_spec(&s.placed["a"].spec), "");
    }
}
