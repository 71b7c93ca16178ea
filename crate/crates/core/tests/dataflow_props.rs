use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use immerflow_core::dataflow::{
    deserialize_workspace, serialize_workspace, Category, DataflowError, EvalOutput, ExecContext,
    NodeSpec, ParamMap, ParamType, ParamValue, Registry, Workflow, WorkspaceDocument,
};
use immerflow_core::value::{DataKind, DataValue};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PORTS: [&str; 4] = ["a", "b", "c", "d"];

/// `Mix` adds its param to whatever inputs are connected.
fn registry() -> Arc<Registry> {
    let mut r = Registry::new();
    r.register(
        NodeSpec::new("Mix", Category::Data, |req| {
            let mut sum = req.params.number("value")?;
            for p in PORTS {
                if let Some(DataValue::Scalar(v)) = req.opt_input(p) {
                    sum += v;
                }
            }
            Ok(EvalOutput::single("out", DataValue::Scalar(sum)))
        })
        .optional_input("a", DataKind::Scalar)
        .optional_input("b", DataKind::Scalar)
        .optional_input("c", DataKind::Scalar)
        .optional_input("d", DataKind::Scalar)
        .param("value", ParamType::Number, 0.0)
        .param("label", ParamType::Text, "")
        .output("out", DataKind::Scalar),
    );
    Arc::new(r)
}

fn params(value: f64) -> ParamMap {
    BTreeMap::from([("value".to_string(), ParamValue::Number(value))])
}

/// Random DAG: every node may feed later nodes only.
fn random_dag(rng: &mut ChaCha8Rng, n: usize) -> Workflow {
    let mut wf = Workflow::new(registry());
    let ids: Vec<String> = (0..n)
        .map(|i| wf.add_node("Mix", params(i as f64)).unwrap())
        .collect();
    for (i, dst) in ids.iter().enumerate().skip(1) {
        let fan_in = rng.gen_range(0..=PORTS.len().min(i));
        let mut parents = BTreeSet::new();
        while parents.len() < fan_in {
            parents.insert(rng.gen_range(0..i));
        }
        for (port, p) in PORTS.iter().zip(parents) {
            wf.connect((&ids[p], "out"), (dst, port)).unwrap();
        }
    }
    wf
}

fn bfs_closure(wf: &Workflow, start: &str) -> BTreeSet<String> {
    let mut seen = BTreeSet::from([start.to_string()]);
    let mut queue = VecDeque::from([start.to_string()]);
    while let Some(n) = queue.pop_front() {
        for e in wf.edges().iter().filter(|e| e.src == n) {
            if seen.insert(e.dst.clone()) {
                queue.push_back(e.dst.clone());
            }
        }
    }
    seen
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn executed_set_is_the_dirty_closure(seed in any::<u64>(), n in 1usize..=64, edits in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut wf = random_dag(&mut rng, n);
        let ctx = ExecContext::default();
        let first = wf.execute(&ctx);
        prop_assert_eq!(first.executed.len(), n);
        for _ in 0..edits {
            let target = format!("n{}", rng.gen_range(1..=n));
            let dirty = if rng.gen_bool(0.5) {
                wf.invalidate(&target).unwrap()
            } else {
                wf.set_params(&target, params(rng.gen_range(-5.0..5.0))).unwrap()
            };
            let oracle = bfs_closure(&wf, &target);
            prop_assert_eq!(&dirty, &oracle);
            let report = wf.execute(&ctx);
            let executed: BTreeSet<String> = report.executed.iter().cloned().collect();
            prop_assert_eq!(executed.len(), report.executed.len(), "node executed twice");
            prop_assert_eq!(executed, oracle);
            prop_assert_eq!(report.skipped.len() + report.executed.len(), n);
        }
    }

    #[test]
    fn connect_accepts_exactly_the_acyclic_edges(seed in any::<u64>(), n in 2usize..16, attempts in 1usize..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut wf = Workflow::new(registry());
        let ids: Vec<String> = (0..n).map(|_| wf.add_node("Mix", ParamMap::new()).unwrap()).collect();
        let mut adj = vec![BTreeSet::new(); n];
        let mut occupied = BTreeSet::new();
        for _ in 0..attempts {
            let (s, d) = (rng.gen_range(0..n), rng.gen_range(0..n));
            let port = PORTS[rng.gen_range(0..PORTS.len())];
            // Brute force: does d already reach s?
            let mut stack = vec![d];
            let mut seen = BTreeSet::new();
            let mut cycle = false;
            while let Some(x) = stack.pop() {
                if x == s {
                    cycle = true;
                    break;
                }
                if seen.insert(x) {
                    stack.extend(adj[x].iter().copied());
                }
            }
            let res = wf.connect((&ids[s], "out"), (&ids[d], port));
            if occupied.contains(&(d, port)) {
                let is_occupied = matches!(res, Err(DataflowError::PortOccupied { .. }));
                prop_assert!(is_occupied);
            } else if cycle {
                prop_assert_eq!(res, Err(DataflowError::CycleDetected));
            } else {
                prop_assert!(res.is_ok());
                adj[s].insert(d);
                occupied.insert((d, port));
            }
        }
        // The accepted graph always has a complete topological order.
        prop_assert_eq!(wf.topological_order().len(), n);
    }

    #[test]
    fn workspace_documents_round_trip(seed in any::<u64>(), n in 0usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut wf = random_dag(&mut rng, n);
        for id in wf.node_ids() {
            if rng.gen_bool(0.3) {
                let label = ParamMap::from([("label".to_string(), ParamValue::Text(format!("x{}", rng.gen::<u16>())))]);
                wf.set_params(&id, label).unwrap();
            }
        }
        let doc = serialize_workspace(&wf, "code");
        let text = doc.to_json();
        let parsed = WorkspaceDocument::from_json(&text).unwrap();
        prop_assert_eq!(&parsed, &doc);
        let back = deserialize_workspace(&parsed, registry()).unwrap();
        let a: Vec<_> = wf.nodes().iter().map(|n| (n.id.clone(), n.kind.clone(), n.params.clone())).collect();
        let b: Vec<_> = back.nodes().iter().map(|n| (n.id.clone(), n.kind.clone(), n.params.clone())).collect();
        prop_assert_eq!(a, b);
        let ends = |w: &Workflow| -> BTreeSet<(String, String, String, String)> {
            w.edges().iter().map(|e| (e.src.clone(), e.src_port.clone(), e.dst.clone(), e.dst_port.clone())).collect()
        };
        prop_assert_eq!(ends(&wf), ends(&back));
        prop_assert_eq!(serialize_workspace(&back, "code").to_json(), text);
    }
}

#[test]
fn clean_workflow_reexecutes_nothing() {
    let mut wf = random_dag(&mut ChaCha8Rng::seed_from_u64(3), 12);
    let ctx = ExecContext::default();
    wf.execute(&ctx);
    // A node kind that is not registered cannot be added.
    assert_eq!(
        wf.add_node("Nope", ParamMap::new()),
        Err(DataflowError::UnknownNodeKind("Nope".into()))
    );
    let report = wf.execute(&ctx);
    assert!(report.executed.is_empty());
    assert_eq!(report.skipped.len(), 12);
}
