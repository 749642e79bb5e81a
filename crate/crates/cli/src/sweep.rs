//! Difficulty-level sweeps: every method at every region point.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use succmax_core::{
    bruteforce, criterion_closed_form, greedy_1d, greedy_value, linprog_mckp, mixedint_mckp, run, Allocation,
    KnapsackProblem, KnapsackSolution, OptimizerConfig, PolicyCellStats, SuccessRegion,
};

use crate::config::Method;
use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub region: SuccessRegion<f64>,
    pub method: Method,
    /// `None` when the method failed at this point; see `error`.
    pub criterion: Option<f64>,
    pub stalled: bool,
    pub wall_time_ms: f64,
    pub psi: Option<Allocation<f64>>,
    pub error: Option<String>,
}

pub struct SweepSettings<'a> {
    pub methods: &'a [Method],
    pub value_projection: bool,
    /// Zero the timing column so reruns are byte-identical.
    pub deterministic: bool,
}

/// Runs every method at every point. Points are processed in parallel; rows
/// come back ordered by point, then by method as listed.
pub fn run_sweep<O>(
    stats: &PolicyCellStats<f64>,
    points: &[SuccessRegion<f64>],
    settings: &SweepSettings,
    optimizer_for_point: O,
) -> Vec<SweepRow>
where
    O: Fn(usize) -> OptimizerConfig<f64> + Sync,
{
    points
        .par_iter()
        .enumerate()
        .map(|(i, region)| {
            settings
                .methods
                .iter()
                .map(|&method| {
                    let start = Instant::now();
                    let outcome = evaluate(stats, region, method, settings.value_projection, || optimizer_for_point(i));
                    let ms = if settings.deterministic { 0.0 } else { start.elapsed().as_secs_f64() * 1e3 };
                    let (criterion, stalled, psi, error) = match outcome {
                        Ok((psi, p, stalled)) => (Some(p), stalled, Some(psi), None),
                        Err(e) => (None, false, None, Some(e)),
                    };
                    SweepRow { region: *region, method, criterion, stalled, wall_time_ms: ms, psi, error }
                })
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

fn evaluate(
    stats: &PolicyCellStats<f64>,
    region: &SuccessRegion<f64>,
    method: Method,
    value_projection: bool,
    optimizer: impl FnOnce() -> OptimizerConfig<f64>,
) -> std::result::Result<(Allocation<f64>, f64, bool), String> {
    let err = |e: succmax_core::Error| e.to_string();
    let score = |psi: Allocation<f64>| {
        let p = criterion_closed_form(stats, &psi, region).map_err(err)?.p;
        Ok((psi, p, false))
    };
    match method {
        Method::Spm => {
            let mut cfg = optimizer();
            // Sweeps only report the end point.
            cfg.trace_every = cfg.n_steps;
            let out = run(stats, region, &cfg).map_err(err)?;
            Ok((out.psi_final, out.criterion_final.p, out.stalled))
        }
        Method::Bruteforce => {
            let (psi, c) = bruteforce(stats, region).map_err(err)?;
            Ok((psi, c.p, false))
        }
        Method::Greedy1d => match (stats.dim(), value_projection) {
            (1, _) => score(greedy_1d(stats).map_err(err)?),
            (_, true) => score(greedy_value(stats)),
            _ => Err("greedy1d needs a 1-D outcome; set value_projection to rank by value".into()),
        },
        Method::Linprog | Method::Mixedint => {
            let problem = KnapsackProblem::from_region(stats, region).map_err(err)?;
            let solution = if method == Method::Linprog {
                linprog_mckp(&problem)
            } else {
                mixedint_mckp(&problem)
            }
            .map_err(err)?;
            match solution {
                KnapsackSolution::Feasible { allocation, .. } => score(allocation),
                KnapsackSolution::Infeasible { min_cost } => Err(format!(
                    "infeasible: cheapest selection costs {min_cost}, budget is {}",
                    problem.budget()
                )),
            }
        }
    }
}

fn region_header(dim: usize) -> Vec<String> {
    if dim == 1 {
        vec!["r".into()]
    } else {
        vec!["r_v".into(), "r_c".into()]
    }
}

fn region_fields(region: &SuccessRegion<f64>) -> Vec<String> {
    region.thresholds().iter().map(|t| t.to_string()).collect()
}

/// Columns: region coordinates, method, criterion, stall, wall_time_ms,
/// `psi_g_k` for every cell. Failed rows leave criterion and weights empty.
pub fn write_csv<W: Write>(out: W, rows: &[SweepRow], n_buckets: usize, n_policies: usize, dim: usize) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = region_header(dim);
    header.extend(["method", "criterion", "stall", "wall_time_ms"].map(String::from));
    for g in 0..n_buckets {
        for k in 0..n_policies {
            header.push(format!("psi_{g}_{k}"));
        }
    }
    w.write_record(&header).map_err(csv_err)?;
    for row in rows {
        let mut rec = region_fields(&row.region);
        rec.push(row.method.name().into());
        rec.push(row.criterion.map_or(String::new(), |c| c.to_string()));
        rec.push(row.stalled.to_string());
        rec.push(row.wall_time_ms.to_string());
        match &row.psi {
            Some(psi) => rec.extend(psi.as_slice().iter().map(|x| x.to_string())),
            None => rec.extend(std::iter::repeat_n(String::new(), n_buckets * n_policies)),
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::Data(e.to_string()))
}

/// One line per failed row: region, method, message.
pub fn write_errors_csv<W: Write>(out: W, rows: &[SweepRow], dim: usize) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = region_header(dim);
    header.extend(["method", "error"].map(String::from));
    w.write_record(&header).map_err(csv_err)?;
    for row in rows {
        if let Some(e) = &row.error {
            let mut rec = region_fields(&row.region);
            rec.push(row.method.name().into());
            rec.push(e.clone());
            w.write_record(&rec).map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| CliError::Data(e.to_string()))
}

#[derive(Serialize)]
struct JsonRow<'a> {
    region: &'a SuccessRegion<f64>,
    method: &'static str,
    criterion: Option<f64>,
    stall: bool,
    wall_time_ms: f64,
    psi: Option<Vec<Vec<f64>>>,
    error: Option<&'a str>,
}

pub fn to_json(rows: &[SweepRow]) -> String {
    let rows: Vec<JsonRow> = rows
        .iter()
        .map(|r| JsonRow {
            region: &r.region,
            method: r.method.name(),
            criterion: r.criterion,
            stall: r.stalled,
            wall_time_ms: r.wall_time_ms,
            psi: r.psi.as_ref().map(|p| p.to_rows()),
            error: r.error.as_deref(),
        })
        .collect();
    serde_json::to_string_pretty(&rows).expect("sweep rows serialize")
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Data(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table1() -> PolicyCellStats<f64> {
        PolicyCellStats::univariate(
            &[vec![2.0, 1.9, 0.0], vec![2.0, 1.0, 0.0], vec![2.0, 1.0, 0.0]],
            &[vec![9.0, 1.0, 9.0], vec![9.0, 1.0, 9.0], vec![1.0, 1.0, 1.0]],
        )
        .unwrap()
    }

    #[test]
    fn rows_follow_grid_then_method_order() {
        let points: Vec<_> = [0.0, 3.0, 6.0].map(SuccessRegion::value_above).to_vec();
        let methods = [Method::Greedy1d, Method::Bruteforce, Method::Mixedint];
        let settings = SweepSettings { methods: &methods, value_projection: false, deterministic: true };
        let rows = run_sweep(&table1(), &points, &settings, |_| unreachable!());
        assert_eq!(rows.len(), 9);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.region, points[i / 3]);
            assert_eq!(row.method, methods[i % 3]);
            assert_eq!(row.wall_time_ms, 0.0);
        }
        // Unconstrained knapsack on a 1-D outcome picks the greedy allocation.
        assert_eq!(rows[0].psi, rows[2].psi);
    }

    #[test]
    fn incompatible_methods_become_error_rows() {
        let stats = PolicyCellStats::bivariate(
            &[vec![2.0, 1.0]],
            &[vec![9.0, 1.0]],
            &[vec![1.0, 1.5]],
            &[vec![4.0, 1.0]],
            &[vec![0.5, 0.5]],
        )
        .unwrap();
        let points = vec![SuccessRegion::value_above_cost_below(0.0, 0.5)];
        let methods = [Method::Greedy1d, Method::Mixedint, Method::Bruteforce];
        let settings = SweepSettings { methods: &methods, value_projection: false, deterministic: true };
        let rows = run_sweep(&stats, &points, &settings, |_| unreachable!());
        assert!(rows[0].error.as_deref().unwrap().contains("greedy1d"));
        assert!(rows[1].error.as_deref().unwrap().starts_with("infeasible"));
        assert!(rows[2].criterion.is_some());
        let mut buf = Vec::new();
        write_csv(&mut buf, &rows, 1, 2, 2).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "r_v,r_c,method,criterion,stall,wall_time_ms,psi_0_0,psi_0_1");
        assert_eq!(text.lines().nth(1).unwrap(), "0,0.5,greedy1d,,false,0,,");
        let mut buf = Vec::new();
        write_errors_csv(&mut buf, &rows, 2).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 3);
    }
}
