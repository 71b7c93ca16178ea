use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};

use super::{Channel, Link, LinkError, Scale, ScaleRange, VisSpec};
use crate::transform::{matrix_to_rows, Similarity, Vec3};

/// Local position of `value` along a linear positional channel.
pub fn axis_point(spec: &VisSpec, channel: Channel, value: f64) -> Option<Vec3> {
    let axis = channel.axis()?;
    let enc = spec.channels.get(&channel)?;
    let Scale::Linear {
        domain,
        range: ScaleRange::Numeric(range),
    } = &enc.scale
    else {
        return None;
    };
    let t = (value - domain[0]) / (domain[1] - domain[0]);
    let d = range[0] + t * (range[1] - range[0]);
    Some(axis.map(|a| a * d))
}

fn linear_axis(
    spec: &VisSpec,
    field: &str,
) -> Result<(Channel, [f64; 2], [f64; 2]), LinkError> {
    let missing = || LinkError::SharedFieldMissing {
        spec_id: spec.spec_id.clone(),
        field: field.to_string(),
    };
    let (channel, enc) = spec.channel_for_field(field).ok_or_else(missing)?;
    match &enc.scale {
        Scale::Linear {
            domain,
            range: ScaleRange::Numeric(range),
        } if range[0] != range[1] => Ok((channel, *domain, *range)),
        _ => Err(missing()),
    }
}

/// True when an axis link joins two axes whose domains differ. Equal domain
/// values are still aligned; the caller may want to surface a warning.
pub fn axis_domains_differ(spec: &VisSpec, registry: &BTreeMap<String, VisSpec>) -> bool {
    let Some(Link::AxisLink { spec_id, field }) = &spec.link else {
        return false;
    };
    let Some(target) = registry.get(spec_id) else {
        return false;
    };
    match (linear_axis(spec, field), linear_axis(target, field)) {
        (Ok((_, a, _)), Ok((_, b, _))) => a != b,
        _ => false,
    }
}

/// Rotation taking unit vector `a` to unit vector `b`, both coordinate axes
/// up to sign. Opposite vectors turn about Y, or Z when they lie on Y.
fn axis_rotation(a: Vector3<f64>, b: Vector3<f64>) -> Matrix3<f64> {
    let c = a.dot(&b);
    if c > 1.0 - 1e-12 {
        return Matrix3::identity();
    }
    if c < -1.0 + 1e-12 {
        let about = if a.y.abs() > 0.5 {
            Vector3::z()
        } else {
            Vector3::y()
        };
        return *Rotation3::from_axis_angle(&Unit::new_normalize(about), std::f64::consts::PI)
            .matrix();
    }
    *Rotation3::rotation_between(&a, &b)
        .expect("non-opposite vectors")
        .matrix()
}

fn resolve_inner(
    spec: &VisSpec,
    registry: &BTreeMap<String, VisSpec>,
    visiting: &mut BTreeSet<String>,
) -> Result<Similarity, LinkError> {
    if !visiting.insert(spec.spec_id.clone()) {
        return Err(LinkError::Cycle(spec.spec_id.clone()));
    }
    let local = &spec.transform;
    let target_of = |id: &str| {
        registry
            .get(id)
            .ok_or_else(|| LinkError::DanglingLink(id.to_string()))
    };
    let world = match &spec.link {
        None => *local,
        Some(Link::TargetLink { position, rotation }) => {
            let anchor = Similarity {
                rotation: rotation.unwrap_or(Similarity::identity().rotation),
                translation: *position,
                scale: 1.0,
            };
            anchor.compose(local)
        }
        Some(Link::ObjectLink { spec_id }) => {
            let target = target_of(spec_id)?;
            resolve_inner(target, registry, visiting)?.compose(local)
        }
        Some(Link::AxisLink { spec_id, field }) => {
            let target = target_of(spec_id)?;
            let target_world = resolve_inner(target, registry, visiting)?;
            let (own_ch, own_dom, own_rng) = linear_axis(spec, field)?;
            let (tgt_ch, _, tgt_rng) = linear_axis(target, field)?;

            // Two domain values pin the map: equal values land on equal
            // world points along the target's axis.
            let (e0, e1) = (own_dom[0], own_dom[1]);
            let q0 = Vector3::from(axis_point(spec, own_ch, e0).expect("linear axis"));
            let q1 = Vector3::from(axis_point(spec, own_ch, e1).expect("linear axis"));
            let p0 = Vector3::from(
                target_world.apply(axis_point(target, tgt_ch, e0).expect("linear axis")),
            );
            let p1 = Vector3::from(
                target_world.apply(axis_point(target, tgt_ch, e1).expect("linear axis")),
            );
            let own_dir = Vector3::from(own_ch.axis().unwrap()) * (own_rng[1] - own_rng[0]).signum();
            let tgt_dir = Vector3::from(tgt_ch.axis().unwrap()) * (tgt_rng[1] - tgt_rng[0]).signum();
            let r = target_world.rotation_matrix() * axis_rotation(own_dir, tgt_dir);
            let scale = (p1 - p0).norm() / (q1 - q0).norm();
            let t = p0 - r * (q0 * scale);
            // The link fixes the whole placement; the local transform is unused.
            Similarity {
                rotation: matrix_to_rows(&r),
                translation: [t.x, t.y, t.z],
                scale,
            }
        }
    };
    visiting.remove(&spec.spec_id);
    Ok(world)
}

/// World placement of `spec` given the other placed specs.
pub fn resolve_link(
    spec: &VisSpec,
    registry: &BTreeMap<String, VisSpec>,
) -> Result<Similarity, LinkError> {
    resolve_inner(spec, registry, &mut BTreeSet::new())
}

/// Specs placed on one device, keyed by id.
#[derive(Clone, Debug, Default)]
pub struct SpecRegistry {
    specs: BTreeMap<String, VisSpec>,
}

impl SpecRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert or replace a spec. Rejected if its link would close a cycle;
    /// the registry is unchanged in that case.
    pub fn place(&mut self, spec: VisSpec) -> Result<(), LinkError> {
        let id = spec.spec_id.clone();
        if let Some(target) = spec.link.as_ref().and_then(Link::target_spec) {
            let specs = &self.specs;
            let next = |s: &String| -> Vec<String> {
                specs
                    .get(s)
                    .and_then(|v| v.link.as_ref())
                    .and_then(Link::target_spec)
                    .map(|t| vec![t.to_string()])
                    .unwrap_or_default()
            };
            if crate::dataflow::reaches(&target.to_string(), &id, next) {
                return Err(LinkError::Cycle(id));
            }
        }
        self.specs.insert(id, spec);
        Ok(())
    }

    pub fn remove(&mut self, spec_id: &str) -> Option<VisSpec> {
        self.specs.remove(spec_id)
    }

    pub fn get(&self, spec_id: &str) -> Option<&VisSpec> {
        self.specs.get(spec_id)
    }

    pub fn specs(&self) -> &BTreeMap<String, VisSpec> {
        &self.specs
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn world(&self, spec_id: &str) -> Result<Similarity, LinkError> {
        let spec = self
            .specs
            .get(spec_id)
            .ok_or_else(|| LinkError::DanglingLink(spec_id.to_string()))?;
        resolve_link(spec, &self.specs)
    }
}

#[cfg(test)]
mod tests {
    use super::super::{ChannelEncoding, CoordinateType, Mark};
    use super::*;
    use crate::transform::RigidTransform;

    fn chart(id: &str, channel: Channel, field: &str, domain: [f64; 2], range: [f64; 2]) -> VisSpec {
        let mut channels = BTreeMap::new();
        channels.insert(
            channel,
            ChannelEncoding {
                field: field.into(),
                scale: Scale::Linear {
                    domain,
                    range: ScaleRange::Numeric(range),
                },
                legend: false,
            },
        );
        VisSpec {
            schema_version: 1,
            spec_id: id.into(),
            mark: Mark::Point,
            data_ref: "d".into(),
            channels,
            coordinate_type: CoordinateType::World,
            transform: Similarity::identity(),
            link: None,
            filters: vec![],
            detail_fields: vec![],
            transfer_function: None,
        }
    }

    fn dist(a: Vec3, b: Vec3) -> f64 {
        crate::transform::distance(a, b)
    }

    #[test]
    fn axis_link_aligns_equal_values() {
        let mut a = chart("a", Channel::X, "year", [1990.0, 2020.0], [0.0, 0.8]);
        a.transform = Similarity::new(
            RigidTransform::from_axis_angle([0.0, 1.0, 0.0], 0.7, [1.0, 0.5, -2.0]),
            1.5,
        );
        let mut b = chart("b", Channel::Y, "year", [1990.0, 2020.0], [0.0, 0.3]);
        b.link = Some(Link::AxisLink {
            spec_id: "a".into(),
            field: "year".into(),
        });
        let mut reg = BTreeMap::new();
        reg.insert("a".to_string(), a.clone());
        let wa = resolve_link(&a, &reg).unwrap();
        let wb = resolve_link(&b, &reg).unwrap();
        for v in [1990.0, 2001.5, 2020.0] {
            let pa = wa.apply(axis_point(&a, Channel::X, v).unwrap());
            let pb = wb.apply(axis_point(&b, Channel::Y, v).unwrap());
            assert!(dist(pa, pb) < 1e-9, "{v}: {pa:?} vs {pb:?}");
        }
        assert!(!axis_domains_differ(&b, &reg));
    }

    #[test]
    fn target_link_places_origin_at_anchor() {
        let mut s = chart("s", Channel::X, "f", [0.0, 1.0], [0.0, 1.0]);
        s.link = Some(Link::TargetLink {
            position: [1.0, 2.0, 3.0],
            rotation: None,
        });
        let w = resolve_link(&s, &BTreeMap::new()).unwrap();
        assert_eq!(w.apply([0.0; 3]), [1.0, 2.0, 3.0]);
    }

    #[test]
    fn cycles_are_detected() {
        let mut a = chart("a", Channel::X, "f", [0.0, 1.0], [0.0, 1.0]);
        let mut b = a.clone();
        b.spec_id = "b".into();
        a.link = Some(Link::ObjectLink { spec_id: "b".into() });
        b.link = Some(Link::ObjectLink { spec_id: "a".into() });
        let mut reg = BTreeMap::new();
        reg.insert("a".to_string(), a.clone());
        reg.insert("b".to_string(), b.clone());
        assert!(matches!(resolve_link(&a, &reg), Err(LinkError::Cycle(_))));

        let mut placed = SpecRegistry::new();
        placed.place(a).unwrap();
        assert_eq!(placed.place(b), Err(LinkError::Cycle("b".into())));
        assert_eq!(placed.len(), 1);
    }

    #[test]
    fn dangling_target_is_reported() {
        let mut a = chart("a", Channel::X, "f", [0.0, 1.0], [0.0, 1.0]);
        a.link = Some(Link::ObjectLink { spec_id: "ghost".into() });
        assert_eq!(
            resolve_link(&a, &BTreeMap::new()),
            Err(LinkError::DanglingLink("ghost".into()))
        );
    }
}
