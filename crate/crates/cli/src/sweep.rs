use anyhow::{anyhow, bail, Result};
use rayon::prelude::*;
use serde_json::Value;

use crate::config::{sweep_cells, ExperimentConfig, SweepSpec};
use crate::pipeline::{any_passed, nash_point, simulate, small_gain};

/// One grid cell. `None` fields are written as empty cells.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub values: Vec<f64>,
    /// `pass`, `fail` or `error`.
    pub small_gain: &'static str,
    pub worst_margin: Option<f64>,
    /// `true`, `false` or `error`.
    pub converged: &'static str,
    pub convergence_time: Option<f64>,
}

/// Cell parameters in grid-lexicographic order, the first axis slowest.
pub fn grid(spec: &SweepSpec) -> Vec<Vec<f64>> {
    if sweep_cells(spec) == 0 {
        return Vec::new();
    }
    let axes: Vec<Vec<f64>> = spec.axes.iter().map(|a| a.values.points()).collect();
    let mut cells = vec![Vec::new()];
    for axis in &axes {
        cells = cells
            .into_iter()
            .flat_map(|prefix: Vec<f64>| {
                axis.iter().map(move |&v| {
                    let mut c = prefix.clone();
                    c.push(v);
                    c
                })
            })
            .collect();
    }
    cells
}

fn cell_config(base: &Value, spec: &SweepSpec, values: &[f64]) -> Result<ExperimentConfig> {
    let mut value = base.clone();
    for (axis, &v) in spec.axes.iter().zip(values) {
        let slot = value
            .pointer_mut(&axis.path)
            .ok_or_else(|| anyhow!("sweep path {} does not exist", axis.path))?;
        *slot = serde_json::json!(v);
    }
    let config: ExperimentConfig = serde_json::from_value(value)?;
    config.validate()?;
    Ok(config)
}

fn evaluate(config: &ExperimentConfig, values: Vec<f64>) -> SweepRow {
    let mut row = SweepRow {
        values,
        small_gain: "error",
        worst_margin: None,
        converged: "error",
        convergence_time: None,
    };
    let Ok(game) = config.game.build() else {
        return row;
    };
    if let Ok(reports) = small_gain(&game) {
        row.small_gain = if any_passed(&reports) { "pass" } else { "fail" };
        row.worst_margin = Some(reports[0].worst_margin());
    }
    let sim = nash_point(config, &game).and_then(|nash| simulate(config, &game, &nash));
    if let Ok(sim) = sim {
        row.converged = if sim.verdict.converged {
            "true"
        } else {
            "false"
        };
        row.convergence_time = sim.verdict.convergence_time;
    }
    row
}

/// Evaluates every cell in parallel; rows come back in grid order.
pub fn run_sweep(config: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let Some(spec) = &config.sweep else {
        bail!("config has no sweep section")
    };
    let cells = sweep_cells(spec);
    if cells > spec.budget {
        return Err(dyngame::Error::BudgetExceeded {
            requested: cells,
            budget: spec.budget,
        }
        .into());
    }
    let mut base = serde_json::to_value(config)?;
    base.as_object_mut()
        .expect("config is an object")
        .remove("sweep");
    for axis in &spec.axes {
        if base.pointer(&axis.path).is_none_or(|v| !v.is_number()) {
            bail!(
                "sweep path {} does not name a number in the config",
                axis.path
            );
        }
    }
    grid(spec)
        .into_par_iter()
        .map(|values| {
            let cell = cell_config(&base, spec, &values);
            Ok(match cell {
                Ok(cell) => evaluate(&cell, values),
                Err(_) => SweepRow {
                    values,
                    small_gain: "error",
                    worst_margin: None,
                    converged: "error",
                    convergence_time: None,
                },
            })
        })
        .collect()
}

pub fn to_csv(spec: &SweepSpec, rows: &[SweepRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = spec.axes.iter().map(|a| a.path.clone()).collect();
    header.extend(
        [
            "small_gain",
            "worst_margin",
            "converged",
            "convergence_time",
        ]
        .map(String::from),
    );
    w.write_record(&header)?;
    let num = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for row in rows {
        let mut record: Vec<String> = row.values.iter().map(f64::to_string).collect();
        record.push(row.small_gain.into());
        record.push(num(row.worst_margin));
        record.push(row.converged.into());
        record.push(num(row.convergence_time));
        w.write_record(&record)?;
    }
    w.into_inner().map_err(|e| anyhow!("{e}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Axis, AxisValues};

    #[test]
    fn grid_order_is_lexicographic() {
        let spec = SweepSpec {
            axes: vec![
                Axis {
                    path: "/a".into(),
                    values: AxisValues::List(vec![1.0, 2.0]),
                },
                Axis {
                    path: "/b".into(),
                    values: AxisValues::List(vec![10.0, 20.0, 30.0]),
                },
            ],
            budget: 6,
        };
        let cells = grid(&spec);
        assert_eq!(cells.len(), 6);
        assert_eq!(cells[0], vec![1.0, 10.0]);
        assert_eq!(cells[2], vec![1.0, 30.0]);
        assert_eq!(cells[3], vec![2.0, 10.0]);
    }

    #[test]
    fn empty_grid_has_header_only() {
        let spec = SweepSpec {
            axes: vec![Axis {
                path: "/a".into(),
                values: AxisValues::List(vec![]),
            }],
            budget: 1,
        };
        assert!(grid(&spec).is_empty());
        let csv = String::from_utf8(to_csv(&spec, &[]).unwrap()).unwrap();
        assert_eq!(
            csv,
            "/a,small_gain,worst_margin,converged,convergence_time\n"
        );
    }
}
