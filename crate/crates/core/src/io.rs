//! JSON interchange formats.
//!
//! A field is `{"dim": n, "cells": [N_1..N_n], "order": "row-major-last-axis-fastest",
//! "values": [...]}`. Resource fields add `"constraints": {"kappa", "m0"}`, steady states
//! add `"diagnostics"`, gradient bundles hold two fields `p` and `grad`.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::adjoint::GradientBundle;
use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::optimizer::OptimRun;
use crate::resource::{ConstraintSet, ResourceField};
use crate::scalar::Real;
use crate::steady::SteadySolution;

pub const FIELD_ORDER: &str = "row-major-last-axis-fastest";

#[derive(Debug, Serialize, Deserialize)]
struct FieldDoc {
    dim: usize,
    cells: Vec<usize>,
    order: String,
    values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConstraintsDoc {
    pub kappa: f64,
    pub m0: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SteadyDiagnostics {
    pub mu: f64,
    pub residual_norm: f64,
    pub iterations: usize,
    pub total_population: f64,
}

pub fn field_json<T: Real>(f: &ScalarField<T>) -> Value {
    let g = f.grid();
    json!({
        "dim": g.dim(),
        "cells": g.cells_per_axis(),
        "order": FIELD_ORDER,
        "values": f.values().iter().map(|v| v.to_f64_lossy()).collect::<Vec<_>>(),
    })
}

pub fn field_from_json<T: Real>(value: &Value) -> Result<ScalarField<T>> {
    let doc: FieldDoc = serde_json::from_value(strip(value, &["dim", "cells", "order", "values"]))?;
    if doc.order != FIELD_ORDER {
        return Err(Error::InvalidArgument(format!("unsupported field order {:?}", doc.order)));
    }
    let grid = Grid::new(doc.dim, &doc.cells)?;
    ScalarField::new(&grid, doc.values.into_iter().map(T::lit).collect())
}

fn strip(value: &Value, keys: &[&str]) -> Value {
    match value {
        Value::Object(map) => Value::Object(
            map.iter()
                .filter(|(k, _)| keys.contains(&k.as_str()))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        ),
        other => other.clone(),
    }
}

pub fn resource_json<T: Real>(m: &ResourceField<T>) -> Value {
    let mut v = field_json(m.field());
    let c = m.constraints();
    v["constraints"] = json!(ConstraintsDoc {
        kappa: c.kappa().to_f64_lossy(),
        m0: c.m0().to_f64_lossy(),
    });
    v
}

/// Parses a resource field and checks admissibility.
pub fn resource_from_json<T: Real>(value: &Value) -> Result<ResourceField<T>> {
    let field = field_from_json(value)?;
    let doc: ConstraintsDoc = serde_json::from_value(
        value
            .get("constraints")
            .cloned()
            .ok_or_else(|| Error::InvalidArgument("missing \"constraints\" member".into()))?,
    )?;
    let c = ConstraintSet::new(T::lit(doc.kappa), T::lit(doc.m0))?;
    ResourceField::new(field, c)
}

pub fn steady_diagnostics<T: Real>(sol: &SteadySolution<T>) -> SteadyDiagnostics {
    SteadyDiagnostics {
        mu: sol.mu.to_f64_lossy(),
        residual_norm: sol.residual_norm.to_f64_lossy(),
        iterations: sol.iterations,
        total_population: sol.total_population.to_f64_lossy(),
    }
}

pub fn steady_json<T: Real>(sol: &SteadySolution<T>) -> Value {
    let mut v = field_json(&sol.theta);
    v["diagnostics"] = json!(steady_diagnostics(sol));
    v
}

pub fn gradient_json<T: Real>(bundle: &GradientBundle<T>) -> Value {
    json!({
        "p": field_json(&bundle.p),
        "grad": field_json(&bundle.grad),
        "diagnostics": steady_diagnostics(&bundle.theta_ref),
    })
}

/// Optimization run: `f_history`, `termination`, `metrics` and the final resource field
/// under `final_m`.
pub fn optim_run_json<T: Real>(run: &OptimRun<T>) -> Value {
    json!({
        "f_history": run.f_history.iter().map(|v| v.to_f64_lossy()).collect::<Vec<_>>(),
        "termination": run.termination.as_str(),
        "metrics": {
            "final_f": run.final_f.to_f64_lossy(),
            "bang_bang": run.bang_bang.to_f64_lossy(),
            "iterations": run.iterations,
            "steady": steady_diagnostics(&run.final_state),
        },
        "final_m": resource_json(&run.final_m),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resource::make_random;
    use proptest::prelude::*;

    #[test]
    fn field_layout() {
        let g = Grid::<f64>::new(2, &[2, 3]).unwrap();
        let f = ScalarField::new(&g, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.5]).unwrap();
        let v = field_json(&f);
        assert_eq!(v["dim"], 2);
        assert_eq!(v["cells"], json!([2, 3]));
        assert_eq!(v["order"], FIELD_ORDER);
        assert_eq!(v["values"][5], 5.5);
    }

    #[test]
    fn rejects_malformed_fields() {
        let bad_order = json!({"dim": 1, "cells": [2], "order": "column-major", "values": [0.0, 1.0]});
        assert!(field_from_json::<f64>(&bad_order).is_err());
        let short = json!({"dim": 1, "cells": [3], "order": FIELD_ORDER, "values": [0.0, 1.0]});
        assert!(field_from_json::<f64>(&short).is_err());
        let no_constraints = json!({"dim": 1, "cells": [2], "order": FIELD_ORDER, "values": [0.5, 0.5]});
        assert!(resource_from_json::<f64>(&no_constraints).is_err());
    }

    #[test]
    fn optim_run_layout() {
        let g = Grid::<f64>::line(16).unwrap();
        let c = ConstraintSet::new(1.0, 0.25).unwrap();
        let init = make_random(&g, c, 2);
        let run = crate::optimizer::optimize(&g, c, 1.0, &init, &Default::default()).unwrap();
        let v = optim_run_json(&run);
        assert_eq!(v["f_history"].as_array().unwrap().len(), run.f_history.len());
        assert_eq!(v["termination"], run.termination.as_str());
        assert_eq!(v["metrics"]["final_f"], run.final_f);
        let back: ResourceField<f64> = resource_from_json(&v["final_m"]).unwrap();
        assert_eq!(back, run.final_m);
    }

    proptest! {
        #[test]
        fn resource_round_trip(seed in any::<u64>(), n in 2usize..40, m0 in 0.05f64..0.95) {
            let g = Grid::<f64>::line(n).unwrap();
            let c = ConstraintSet::new(1.0, m0).unwrap();
            let m = make_random(&g, c, seed);
            let text = serde_json::to_string(&resource_json(&m)).unwrap();
            let back: ResourceField<f64> = resource_from_json(&serde_json::from_str(&text).unwrap()).unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
