use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::graph::{closure, id_cmp, reaches};
use super::registry::{EvalRequest, ParamMap, Registry};
use super::{DataflowError, EdgeId, ExecContext, NodeError, NodeId};
use crate::value::{DataKind, DataValue};

#[derive(Clone, Debug, PartialEq)]
pub struct NodeInstance {
    pub id: NodeId,
    pub kind: String,
    pub params: ParamMap,
    pub dirty: bool,
    pub output_cache: BTreeMap<String, DataValue>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub id: EdgeId,
    pub src: NodeId,
    pub src_port: String,
    pub dst: NodeId,
    pub dst_port: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeFailure {
    pub node: NodeId,
    pub error: String,
}

/// Display summary of one cached output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputSummary {
    pub kind: DataKind,
    pub detail: String,
}

impl OutputSummary {
    pub fn of(value: &DataValue) -> Self {
        let detail = match value {
            DataValue::Table(t) => format!("{} rows x {} columns", t.len(), t.columns.len()),
            DataValue::Image2D(i) => format!("{}x{} image", i.width, i.height),
            DataValue::Volume3D(v) => format!("{:?} voxels, spacing {:?}", v.dims, v.spacing),
            DataValue::Mesh(m) => format!(
                "{} vertices, {} triangles",
                m.vertices.len(),
                m.triangles.len()
            ),
            DataValue::PointCloud(p) => format!("{} points", p.len()),
            DataValue::Pose(p) => format!("translation {:?}", p.translation),
            DataValue::VisSpec(s) => format!("{} spec `{}`, data {}", s.mark, s.spec_id, s.data_ref),
            DataValue::DeviceKey(k) => k.clone(),
            DataValue::StreamHandle(h) => format!("{} of {}", h.kind, h.device_key),
            DataValue::Scalar(v) => format!("{v}"),
            DataValue::Text(t) => t.clone(),
        };
        OutputSummary {
            kind: value.kind(),
            detail,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExecutionReport {
    /// Nodes whose evaluator ran, in evaluation order (failures included).
    pub executed: Vec<NodeId>,
    /// Clean nodes served from cache.
    pub skipped: Vec<NodeId>,
    /// Dirty nodes not evaluated because an upstream node failed.
    pub blocked: Vec<NodeId>,
    pub errors: Vec<NodeFailure>,
    pub warnings: Vec<NodeFailure>,
    /// Seconds per executed node.
    pub wall_time: BTreeMap<NodeId, f64>,
    pub outputs: BTreeMap<NodeId, BTreeMap<String, OutputSummary>>,
    pub version: u64,
}

impl ExecutionReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }
}

/// A typed DAG of node instances.
#[derive(Clone)]
pub struct Workflow {
    registry: Arc<Registry>,
    nodes: BTreeMap<NodeId, NodeInstance>,
    edges: Vec<Edge>,
    version: u64,
    next_node: u64,
    next_edge: u64,
}

impl std::fmt::Debug for Workflow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Workflow")
            .field("nodes", &self.nodes)
            .field("edges", &self.edges)
            .field("version", &self.version)
            .finish()
    }
}

fn numeric_suffix(id: &str, prefix: char) -> Option<u64> {
    id.strip_prefix(prefix)?.parse().ok()
}

impl Workflow {
    pub fn new(registry: Arc<Registry>) -> Self {
        Workflow {
            registry,
            nodes: BTreeMap::new(),
            edges: Vec::new(),
            version: 0,
            next_node: 1,
            next_edge: 1,
        }
    }

    pub fn registry(&self) -> &Arc<Registry> {
        &self.registry
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub(crate) fn set_version(&mut self, version: u64) {
        self.version = version;
    }

    pub fn node(&self, id: &str) -> Option<&NodeInstance> {
        self.nodes.get(id)
    }

    /// Nodes in id order.
    pub fn nodes(&self) -> Vec<&NodeInstance> {
        let mut v: Vec<_> = self.nodes.values().collect();
        v.sort_by(|a, b| id_cmp(&a.id, &b.id));
        v
    }

    pub fn node_ids(&self) -> Vec<NodeId> {
        self.nodes().into_iter().map(|n| n.id.clone()).collect()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Cached value of one output port.
    pub fn output(&self, node: &str, port: &str) -> Option<&DataValue> {
        self.nodes.get(node)?.output_cache.get(port)
    }

    fn successors(&self, id: &str) -> Vec<NodeId> {
        let mut out: Vec<NodeId> = self
            .edges
            .iter()
            .filter(|e| e.src == id)
            .map(|e| e.dst.clone())
            .collect();
        out.sort_by(|a, b| id_cmp(a, b));
        out.dedup();
        out
    }

    /// Direct downstream neighbors.
    pub fn children(&self, id: &str) -> Vec<NodeId> {
        self.successors(id)
    }

    fn require(&self, id: &str) -> Result<&NodeInstance, DataflowError> {
        self.nodes
            .get(id)
            .ok_or_else(|| DataflowError::UnknownNode(id.to_string()))
    }

    pub fn add_node(&mut self, kind: &str, params: ParamMap) -> Result<NodeId, DataflowError> {
        let id = format!("n{}", self.next_node);
        self.insert_node(id.clone(), kind, params)?;
        Ok(id)
    }

    /// Inserts a node under a caller-chosen id (used when loading documents).
    pub(crate) fn insert_node(
        &mut self,
        id: NodeId,
        kind: &str,
        params: ParamMap,
    ) -> Result<(), DataflowError> {
        let spec = self
            .registry
            .get(kind)
            .ok_or_else(|| DataflowError::UnknownNodeKind(kind.to_string()))?;
        spec.check_params(&params)?;
        if self.nodes.contains_key(&id) {
            return Err(DataflowError::MalformedDocument(format!("duplicate node id `{id}`")));
        }
        if let Some(n) = numeric_suffix(&id, 'n') {
            self.next_node = self.next_node.max(n + 1);
        }
        self.nodes.insert(
            id.clone(),
            NodeInstance {
                id,
                kind: kind.to_string(),
                params,
                dirty: true,
                output_cache: BTreeMap::new(),
            },
        );
        self.version += 1;
        Ok(())
    }

    /// Removes a node and its edges; former children are invalidated.
    pub fn remove_node(&mut self, id: &str) -> Result<BTreeSet<NodeId>, DataflowError> {
        self.require(id)?;
        let children = self.successors(id);
        self.edges.retain(|e| e.src != id && e.dst != id);
        self.nodes.remove(id);
        let mut dirty = BTreeSet::new();
        for c in children {
            dirty.extend(self.mark_dirty(&c));
        }
        self.version += 1;
        Ok(dirty)
    }

    pub fn connect(
        &mut self,
        src: (&str, &str),
        dst: (&str, &str),
    ) -> Result<EdgeId, DataflowError> {
        let id = format!("e{}", self.next_edge);
        self.insert_edge(id.clone(), src, dst)?;
        Ok(id)
    }

    pub(crate) fn insert_edge(
        &mut self,
        id: EdgeId,
        (src, src_port): (&str, &str),
        (dst, dst_port): (&str, &str),
    ) -> Result<(), DataflowError> {
        let src_node = self.require(src)?;
        let dst_node = self.require(dst)?;
        let src_spec = self.registry.get(&src_node.kind).expect("registered kind");
        let dst_spec = self.registry.get(&dst_node.kind).expect("registered kind");
        let out = src_spec
            .output_port(src_port)
            .ok_or_else(|| DataflowError::UnknownPort {
                node: src.to_string(),
                port: src_port.to_string(),
                direction: "output",
            })?;
        let inp = dst_spec
            .input_port(dst_port)
            .ok_or_else(|| DataflowError::UnknownPort {
                node: dst.to_string(),
                port: dst_port.to_string(),
                direction: "input",
            })?;
        if out.kind != inp.kind {
            return Err(DataflowError::TypeMismatch {
                from: out.kind,
                to: inp.kind,
            });
        }
        if self.edges.iter().any(|e| e.dst == dst && e.dst_port == dst_port) {
            return Err(DataflowError::PortOccupied {
                node: dst.to_string(),
                port: dst_port.to_string(),
            });
        }
        if reaches(&dst.to_string(), &src.to_string(), |n: &NodeId| self.successors(n)) {
            return Err(DataflowError::CycleDetected);
        }
        if let Some(n) = numeric_suffix(&id, 'e') {
            self.next_edge = self.next_edge.max(n + 1);
        }
        self.edges.push(Edge {
            id,
            src: src.to_string(),
            src_port: src_port.to_string(),
            dst: dst.to_string(),
            dst_port: dst_port.to_string(),
        });
        self.mark_dirty(dst);
        self.version += 1;
        Ok(())
    }

    pub fn disconnect(&mut self, edge: &str) -> Result<BTreeSet<NodeId>, DataflowError> {
        let pos = self
            .edges
            .iter()
            .position(|e| e.id == edge)
            .ok_or_else(|| DataflowError::UnknownEdge(edge.to_string()))?;
        let removed = self.edges.remove(pos);
        let dirty = self.mark_dirty(&removed.dst);
        self.version += 1;
        Ok(dirty)
    }

    /// Merges `patch` into the node's params and invalidates it.
    pub fn set_params(&mut self, id: &str, patch: ParamMap) -> Result<BTreeSet<NodeId>, DataflowError> {
        let kind = self.require(id)?.kind.clone();
        self.registry
            .get(&kind)
            .expect("registered kind")
            .check_params(&patch)?;
        let node = self.nodes.get_mut(id).unwrap();
        node.params.extend(patch);
        let dirty = self.mark_dirty(id);
        self.version += 1;
        Ok(dirty)
    }

    fn mark_dirty(&mut self, id: &str) -> BTreeSet<NodeId> {
        let set = closure(&id.to_string(), |n: &NodeId| self.successors(n));
        for n in &set {
            if let Some(node) = self.nodes.get_mut(n) {
                node.dirty = true;
            }
        }
        set
    }

    /// Marks the node and its descendants dirty. Caches stay until
    /// re-execution overwrites them.
    pub fn invalidate(&mut self, id: &str) -> Result<BTreeSet<NodeId>, DataflowError> {
        self.require(id)?;
        Ok(self.mark_dirty(id))
    }

    /// Kahn's algorithm; ready nodes leave in ascending id order.
    pub fn topological_order(&self) -> Vec<NodeId> {
        let mut indegree: HashMap<&str, usize> =
            self.nodes.keys().map(|k| (k.as_str(), 0)).collect();
        for e in &self.edges {
            *indegree.get_mut(e.dst.as_str()).unwrap() += 1;
        }
        let mut ready: BTreeSet<OrderedId> = indegree
            .iter()
            .filter(|(_, d)| **d == 0)
            .map(|(k, _)| OrderedId(k.to_string()))
            .collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(next) = ready.pop_first() {
            for e in self.edges.iter().filter(|e| e.src == next.0) {
                let d = indegree.get_mut(e.dst.as_str()).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.insert(OrderedId(e.dst.clone()));
                }
            }
            order.push(next.0);
        }
        order
    }

    /// Evaluates every dirty node whose upstream succeeded, in topological
    /// order. A failure blocks only its descendants.
    pub fn execute(&mut self, ctx: &ExecContext) -> ExecutionReport {
        let mut report = ExecutionReport::default();
        let mut failed: BTreeSet<NodeId> = BTreeSet::new();
        for id in self.topological_order() {
            let node = &self.nodes[&id];
            if !node.dirty {
                report.skipped.push(id);
                continue;
            }
            let incoming: Vec<&Edge> = self.edges.iter().filter(|e| e.dst == id).collect();
            if incoming.iter().any(|e| failed.contains(&e.src)) {
                failed.insert(id.clone());
                report.blocked.push(id);
                continue;
            }
            let spec = self.registry.get(&node.kind).expect("registered kind").clone();
            let mut inputs = BTreeMap::new();
            for e in &incoming {
                if let Some(v) = self.nodes[&e.src].output_cache.get(&e.src_port) {
                    inputs.insert(e.dst_port.clone(), v.clone());
                }
            }
            let start = Instant::now();
            let result = (|| {
                for port in &spec.inputs {
                    match inputs.get(&port.name) {
                        None if !port.optional => {
                            return Err(NodeError::MissingInput(port.name.clone()))
                        }
                        Some(v) if v.kind() != port.kind => {
                            return Err(NodeError::BadInput {
                                port: port.name.clone(),
                                expected: port.kind,
                                got: v.kind(),
                            })
                        }
                        _ => {}
                    }
                }
                let params = spec.resolve_params(&node.params)?;
                let out = (spec.evaluator)(&EvalRequest {
                    node_id: &id,
                    inputs: &inputs,
                    params: &params,
                    ctx,
                })?;
                for port in &spec.outputs {
                    match out.outputs.get(&port.name) {
                        None => {
                            return Err(NodeError::Failed(format!(
                                "evaluator produced no `{}` output",
                                port.name
                            )))
                        }
                        Some(v) if v.kind() != port.kind => {
                            return Err(NodeError::Failed(format!(
                                "output `{}` is {}, declared {}",
                                port.name,
                                v.kind(),
                                port.kind
                            )))
                        }
                        _ => {}
                    }
                }
                Ok(out)
            })();
            report
                .wall_time
                .insert(id.clone(), start.elapsed().as_secs_f64());
            report.executed.push(id.clone());
            match result {
                Ok(out) => {
                    for w in out.warnings {
                        report.warnings.push(NodeFailure {
                            node: id.clone(),
                            error: w,
                        });
                    }
                    report.outputs.insert(
                        id.clone(),
                        out.outputs
                            .iter()
                            .map(|(p, v)| (p.clone(), OutputSummary::of(v)))
                            .collect(),
                    );
                    let node = self.nodes.get_mut(&id).unwrap();
                    node.output_cache = out.outputs;
                    node.dirty = false;
                }
                Err(e) => {
                    tracing::debug!(node = %id, error = %e, "node failed");
                    report.errors.push(NodeFailure {
                        node: id.clone(),
                        error: e.to_string(),
                    });
                    failed.insert(id);
                }
            }
        }
        report.version = self.version;
        report
    }
}

#[derive(PartialEq, Eq)]
struct OrderedId(String);

impl PartialOrd for OrderedId {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrderedId {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        id_cmp(&self.0, &other.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataflow::{Category, EvalOutput, NodeSpec};

    fn registry() -> Arc<Registry> {
        let mut r = Registry::new();
        r.register(
            NodeSpec::new("Const", Category::Input, |req| {
                Ok(EvalOutput::single("out", DataValue::Scalar(req.params.number("value")?)))
            })
            .param("value", super::super::ParamType::Number, 1.0)
            .output("out", DataKind::Scalar),
        );
        r.register(
            NodeSpec::new("Add", Category::Data, |req| {
                let a = match req.input("a")? {
                    DataValue::Scalar(v) => *v,
                    _ => unreachable!(),
                };
                let b = match req.opt_input("b") {
                    Some(DataValue::Scalar(v)) => *v,
                    _ => 0.0,
                };
                if a + b < 0.0 {
                    return Err(NodeError::Failed("negative".into()));
                }
                Ok(EvalOutput::single("out", DataValue::Scalar(a + b)))
            })
            .input("a", DataKind::Scalar)
            .optional_input("b", DataKind::Scalar)
            .output("out", DataKind::Scalar),
        );
        r.register(
            NodeSpec::new("Text", Category::Input, |_| {
                Ok(EvalOutput::single("out", DataValue::Text("t".into())))
            })
            .output("out", DataKind::Text),
        );
        Arc::new(r)
    }

    #[test]
    fn ids_and_version_count_up() {
        let mut wf = Workflow::new(registry());
        let ids: BTreeSet<_> = (0..100)
            .map(|_| wf.add_node("Const", ParamMap::new()).unwrap())
            .collect();
        assert_eq!(ids.len(), 100);
        assert_eq!(wf.version(), 100);
        assert!(ids.contains("n1") && ids.contains("n100"));
    }

    #[test]
    fn connect_checks_types_occupancy_and_cycles() {
        let mut wf = Workflow::new(registry());
        let t = wf.add_node("Text", ParamMap::new()).unwrap();
        let a = wf.add_node("Add", ParamMap::new()).unwrap();
        let b = wf.add_node("Add", ParamMap::new()).unwrap();
        assert!(matches!(
            wf.connect((&t, "out"), (&a, "a")),
            Err(DataflowError::TypeMismatch { .. })
        ));
        wf.connect((&a, "out"), (&b, "a")).unwrap();
        assert_eq!(
            wf.connect((&b, "out"), (&a, "a")),
            Err(DataflowError::CycleDetected)
        );
        let c = wf.add_node("Const", ParamMap::new()).unwrap();
        assert!(matches!(
            wf.connect((&c, "out"), (&b, "a")),
            Err(DataflowError::PortOccupied { .. })
        ));
        assert!(matches!(
            wf.add_node("Const", ParamMap::from([("value".into(), "abc".into())])),
            Err(DataflowError::InvalidParam { .. })
        ));
        assert_eq!(
            wf.add_node("Nope", ParamMap::new()),
            Err(DataflowError::UnknownNodeKind("Nope".into()))
        );
    }

    #[test]
    fn diamond_with_failing_branch() {
        let mut wf = Workflow::new(registry());
        let a = wf
            .add_node("Const", ParamMap::from([("value".into(), (-1.0).into())]))
            .unwrap();
        let k = wf
            .add_node("Const", ParamMap::from([("value".into(), 5.0.into())]))
            .unwrap();
        let b = wf.add_node("Add", ParamMap::new()).unwrap();
        let c = wf.add_node("Add", ParamMap::new()).unwrap();
        let d = wf.add_node("Add", ParamMap::new()).unwrap();
        wf.connect((&a, "out"), (&b, "a")).unwrap();
        wf.connect((&a, "out"), (&c, "a")).unwrap();
        wf.connect((&k, "out"), (&c, "b")).unwrap();
        wf.connect((&b, "out"), (&d, "a")).unwrap();
        wf.connect((&c, "out"), (&d, "b")).unwrap();
        let r = wf.execute(&ExecContext::default());
        assert_eq!(r.errors.len(), 1);
        assert_eq!(r.errors[0].node, b);
        assert!(r.executed.contains(&c));
        assert_eq!(r.blocked, vec![d.clone()]);
        assert!(wf.node(&d).unwrap().dirty);
        assert_eq!(wf.output(&c, "out"), Some(&DataValue::Scalar(4.0)));
    }

    #[test]
    fn param_change_reruns_closure_only() {
        let mut wf = Workflow::new(registry());
        let a = wf.add_node("Const", ParamMap::new()).unwrap();
        let b = wf.add_node("Add", ParamMap::new()).unwrap();
        let c = wf.add_node("Add", ParamMap::new()).unwrap();
        wf.connect((&a, "out"), (&b, "a")).unwrap();
        wf.connect((&b, "out"), (&c, "a")).unwrap();
        let ctx = ExecContext::default();
        assert_eq!(wf.execute(&ctx).executed, vec![a.clone(), b.clone(), c.clone()]);
        let again = wf.execute(&ctx);
        assert!(again.executed.is_empty());
        assert_eq!(again.skipped.len(), 3);
        wf.set_params(&b, ParamMap::new()).unwrap();
        let r = wf.execute(&ctx);
        assert_eq!(r.executed, vec![b, c]);
        assert_eq!(r.skipped, vec![a]);
    }

    #[test]
    fn missing_required_input_is_a_node_error() {
        let mut wf = Workflow::new(registry());
        let b = wf.add_node("Add", ParamMap::new()).unwrap();
        let r = wf.execute(&ExecContext::default());
        assert_eq!(r.errors[0].node, b);
        assert!(r.errors[0].error.contains("not connected"));
    }
}
