use immerflow_sim::{Keyframe, PoseTrack, Scenario};
use proptest::prelude::*;

fn keyframes() -> impl Strategy<Value = Vec<Keyframe>> {
    prop::collection::vec(
        (0.01f64..2.0, prop::array::uniform3(-5.0f64..5.0), prop::array::uniform4(-1.0f64..1.0)),
        2..8,
    )
    .prop_filter("rotations need a direction", |v| {
        v.iter().all(|(_, _, q)| q.iter().map(|c| c * c).sum::<f64>() > 1e-3)
    })
    .prop_map(|v| {
        let mut t = 0.0;
        v.into_iter()
            .map(|(dt, position, rotation)| {
                t += dt;
                Keyframe { t, position, rotation }
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn samples_stay_on_the_segments(keys in keyframes(), u in 0.0f64..=1.0) {
        let track = PoseTrack { rate_hz: 60.0, keyframes: keys.clone() };
        track.validate().unwrap();
        let (first, last) = (keys[0].t, keys[keys.len() - 1].t);
        let t = first + u * (last - first);
        let (q, p) = track.sample(t).unwrap();
        let norm = q.iter().map(|c| c * c).sum::<f64>().sqrt();
        prop_assert!((norm - 1.0).abs() < 1e-12);
        let i = keys.windows(2).position(|w| t <= w[1].t).unwrap();
        for k in 0..3 {
            let (a, b) = (keys[i].position[k], keys[i + 1].position[k]);
            prop_assert!(p[k] >= a.min(b) - 1e-12 && p[k] <= a.max(b) + 1e-12);
        }
        prop_assert!(track.sample(last + 0.5).is_err());
    }

    #[test]
    fn keyframes_are_hit_exactly(keys in keyframes()) {
        let track = PoseTrack { rate_hz: 30.0, keyframes: keys.clone() };
        for k in &keys {
            let (_, p) = track.sample(k.t).unwrap();
            prop_assert_eq!(p, k.position);
        }
    }

    #[test]
    fn scenarios_round_trip_through_json(keys in keyframes(), interval in 1u64..500) {
        let mut sc = Scenario::idle();
        sc.poll_interval_ms = interval;
        sc.tracks.insert(
            immerflow_core::sensor::SensorKind::HeadPose,
            PoseTrack { rate_hz: 60.0, keyframes: keys },
        );
        let text = serde_json::to_string(&sc).unwrap();
        prop_assert_eq!(Scenario::from_json(&text).unwrap(), sc);
    }
}
