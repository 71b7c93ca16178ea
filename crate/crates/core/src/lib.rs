//! Reactive dataflow engine for immersive analytics workflows.
//!
//! Workflows are DAGs of typed nodes. Editing a node marks it and its
//! descendants dirty; executing re-evaluates only dirty nodes in
//! topological order and feeds encoded specs to XR devices or the web.

pub mod dataflow;
pub mod grammar;
pub mod hub;
pub mod kernels;
pub mod nodes;
pub mod sensor;
pub mod store;
pub mod transform;
pub mod value;
