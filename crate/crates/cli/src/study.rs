//! Convergence studies: error tables over dyadic levels or mollifier widths
//! with observed orders.

use std::fmt::Write as _;

use roughfrob::rates::{convergence_order, fit_power_law};
use roughfrob::signals::mollify;
use roughfrob::solvers::{solve_frobenius_diagonal, solve_frobenius_wedge_null, solve_yde, DiagonalOptions, YdeOptions, YdeProblem};
use roughfrob::{germ_remainder_sweep, young_integral_segment, Error, Field64, Grid64, PfaffProblem64, Result, Segment64, SolveResult64, YoungOptions};
use serde::Serialize;
use serde_json::{json, Value};

use crate::commands::{val, wedge_options, Artifact, Outcome};
use crate::config::ExperimentConfig;

#[derive(Clone, Debug, Serialize)]
pub struct Row {
    /// Dyadic level, or mollifier width for `mollify`.
    pub x: f64,
    pub error: f64,
    /// Local order against the previous row.
    pub order: Option<f64>,
}

fn rows_from(xs: &[f64], errors: &[f64], by_level: bool) -> Vec<Row> {
    xs.iter()
        .zip(errors)
        .enumerate()
        .map(|(i, (&x, &e))| {
            let order = (i > 0).then(|| {
                let (px, pe) = (xs[i - 1], errors[i - 1]);
                let step = if by_level { (x - px) * std::f64::consts::LN_2 } else { (px / x).ln() };
                (pe / e).ln() / step
            });
            Row { x, error: e, order: order.filter(|o| o.is_finite()) }
        })
        .collect()
}

fn csv(rows: &[Row], by_level: bool) -> String {
    let mut s = String::from(if by_level { "level,error,order\n" } else { "eps,error,order\n" });
    for r in rows {
        let order = r.order.map(|o| o.to_string()).unwrap_or_default();
        if by_level {
            let _ = writeln!(s, "{},{},{}", r.x as u32, r.error, order);
        } else {
            let _ = writeln!(s, "{},{},{}", r.x, r.error, order);
        }
    }
    s
}

fn levels(cfg: &ExperimentConfig) -> Result<Vec<u32>> {
    let mut l = cfg.study.levels.clone();
    l.sort_unstable();
    l.dedup();
    if l.len() < 3 {
        return Err(Error::Config(format!("a convergence study needs at least 3 levels, got {:?}", cfg.study.levels)));
    }
    Ok(l)
}

/// Errors against `reference`, or against the finest entry, which is then dropped.
fn against_reference(values: Vec<f64>, levels: Vec<u32>, reference: Option<f64>) -> Result<(Vec<u32>, Vec<f64>, f64)> {
    match reference {
        Some(r) => Ok((levels, values.iter().map(|v| (v - r).abs()).collect(), r)),
        None => {
            if levels.len() < 4 {
                return Err(Error::Config("self-referenced studies need at least 4 levels".into()));
            }
            let r = *values.last().expect("levels are not empty");
            let n = levels.len() - 1;
            Ok((levels[..n].to_vec(), values[..n].iter().map(|v| (v - r).abs()).collect(), r))
        }
    }
}

fn solve_pfaff_at(cfg: &ExperimentConfig, p: &PfaffProblem64, level: u32) -> Result<SolveResult64> {
    match cfg.problem.mode.as_deref().unwrap_or("wedge-null") {
        "diagonal" => solve_frobenius_diagonal(
            p,
            &DiagonalOptions { level, axis_order: cfg.problem.axis_order.clone(), diagnostics: false, ..Default::default() },
        ),
        "wedge-null" | "wedge_null" => {
            let opts = wedge_options(cfg)?;
            solve_frobenius_wedge_null(p, &roughfrob::solvers::WedgeNullOptions { level, diagnostics: false, ..opts })
        }
        m => Err(Error::Config(format!("unknown solve-pfaff mode {m:?}"))),
    }
}

fn pfaff_problem(cfg: &ExperimentConfig, g: Field64) -> Result<PfaffProblem64> {
    let theta0 = cfg.problem.theta0.clone().unwrap_or_else(|| vec![1.0]);
    let driver = match &cfg.problem.driver {
        Some(_) => cfg.driver(None, g.rows())?,
        None => roughfrob::driver::linear_z(g.rows(), theta0.len()),
    };
    let p0 = cfg.problem.p0.clone().unwrap_or_else(|| g.domain().lower().to_vec());
    PfaffProblem64::new(g, driver, p0, theta0)
}

/// Sup over the coarse nodes of `|θ_coarse - θ_fine|`.
fn nested_error(coarse: &SolveResult64, fine: &SolveResult64) -> Result<f64> {
    let d = coarse.nodes.len() / coarse.grid.len();
    let mut err: f64 = 0.0;
    for i in 0..coarse.grid.len() {
        let v = fine.theta.eval(&coarse.grid.point_flat(i))?;
        for c in 0..d {
            err = err.max((coarse.nodes[i * d + c] - v[c]).abs());
        }
    }
    Ok(err)
}

fn exp_sum_error(g: &Field64, p: &PfaffProblem64, grid: &Grid64, nodes: &[f64]) -> Result<f64> {
    let g0: f64 = g.eval(&p.p0)?.iter().sum();
    let gs = g.sample_values(grid);
    let k = g.ncomp();
    Ok((0..grid.len()).fold(0.0f64, |m, i| {
        let dg: f64 = gs[i * k..(i + 1) * k].iter().sum::<f64>() - g0;
        m.max((nodes[i] - p.theta0[0] * dg.exp()).abs())
    }))
}

pub fn converge(cfg: &ExperimentConfig) -> Result<Outcome> {
    let kind = cfg
        .study
        .kind
        .clone()
        .ok_or_else(|| Error::Config("converge needs [study] kind (young, germ, pfaff, yde or mollify)".into()))?;
    let mut extra = json!({});
    let (xs, errors, by_level): (Vec<f64>, Vec<f64>, bool) = match kind.as_str() {
        "young" => {
            let f = cfg.require("f")?;
            let g = cfg.require("g")?;
            let dom = f.domain();
            let seg = Segment64::new(
                vec![cfg.problem.a.unwrap_or(dom.lower()[0])],
                vec![cfg.problem.b.unwrap_or(dom.upper()[0])],
            )?;
            let ls = levels(cfg)?;
            let rule = cfg.rule()?;
            let values = ls
                .iter()
                .map(|&l| Ok(young_integral_segment(&f, &g, &seg, &YoungOptions::fixed(l).with_rule(rule))?.scalar()))
                .collect::<Result<Vec<f64>>>()?;
            let (ls, errs, r) = against_reference(values, ls, cfg.study.reference)?;
            extra["reference"] = json!(r);
            (ls.iter().map(|&l| l as f64).collect(), errs, true)
        }
        "germ" => {
            let f = cfg.require("f")?;
            let g = cfg.require("g")?;
            let ls = levels(cfg)?;
            let fine = cfg.study.fine_level.unwrap_or(18);
            let sweep = germ_remainder_sweep(&f, &g, &ls, fine)?;
            let target = sweep.target;
            extra["target"] = json!(target);
            extra["max_fit"] = val(&sweep.fit);
            extra["rms_fit"] = val(&sweep.rms_fit);
            extra["sweep"] = val(&sweep);
            extra["rate_pass"] = json!(sweep.fit.as_ref().is_some_and(|f| f.exponent >= target - 0.1));
            let errs = sweep.rows.iter().map(|r| r.max_remainder).collect();
            (ls.iter().map(|&l| l as f64).collect(), errs, true)
        }
        "pfaff" => {
            let g = cfg.require("g")?;
            let p = pfaff_problem(cfg, g.clone())?;
            let ls = levels(cfg)?;
            let sols = ls.iter().map(|&l| solve_pfaff_at(cfg, &p, l)).collect::<Result<Vec<_>>>()?;
            let (ls, errs) = match cfg.problem.oracle.as_deref() {
                Some("exp_sum") => {
                    let errs = sols
                        .iter()
                        .map(|s| exp_sum_error(&g, &p, &s.grid, &s.nodes))
                        .collect::<Result<Vec<_>>>()?;
                    (ls, errs)
                }
                None => {
                    if ls.len() < 4 {
                        return Err(Error::Config("self-referenced studies need at least 4 levels".into()));
                    }
                    let fine = sols.last().expect("levels are not empty");
                    let errs = sols[..sols.len() - 1]
                        .iter()
                        .map(|s| nested_error(s, fine))
                        .collect::<Result<Vec<_>>>()?;
                    (ls[..ls.len() - 1].to_vec(), errs)
                }
                Some(o) => return Err(Error::Config(format!("unknown oracle {o:?}"))),
            };
            (ls.iter().map(|&l| l as f64).collect(), errs, true)
        }
        "yde" => {
            let y = match cfg.signal("y")? {
                Some(y) => y,
                None => cfg.require("g")?,
            };
            let theta0 = cfg.problem.theta0.clone().unwrap_or_else(|| vec![1.0]);
            let driver = match &cfg.problem.driver {
                Some(_) => cfg.driver(None, 1)?,
                None => roughfrob::driver::linear_z(1, theta0.len()),
            };
            let problem = YdeProblem::new(driver, y, theta0)?;
            let ls = levels(cfg)?;
            if ls.len() < 4 {
                return Err(Error::Config("self-referenced studies need at least 4 levels".into()));
            }
            let sols = ls
                .iter()
                .map(|&level| solve_yde(&problem, &YdeOptions { level, picard: false, ..Default::default() }))
                .collect::<Result<Vec<_>>>()?;
            let fine = sols.last().expect("levels are not empty");
            let errs = sols[..sols.len() - 1].iter().map(|s| nested_error(s, fine)).collect::<Result<Vec<_>>>()?;
            (ls[..ls.len() - 1].iter().map(|&l| l as f64).collect(), errs, true)
        }
        "mollify" => {
            let mut eps = cfg.study.eps.clone();
            if eps.len() < 3 {
                return Err(Error::Config(format!("a mollification sweep needs at least 3 widths, got {eps:?}")));
            }
            eps.sort_by(|a, b| b.total_cmp(a));
            let g = cfg.require("g")?;
            let level = cfg.numeric.level.unwrap_or(8);
            let fine = cfg.study.fine_level.unwrap_or(10);
            let rough = solve_pfaff_at(cfg, &pfaff_problem(cfg, g.clone())?, level)?;
            let errs = eps
                .iter()
                .map(|&e| {
                    let gm = mollify(&g, e, fine)?;
                    solve_pfaff_at(cfg, &pfaff_problem(cfg, gm)?, level)?.sup_distance(&rough)
                })
                .collect::<Result<Vec<_>>>()?;
            let monotone = errs.windows(2).all(|w| w[1] <= 1.1 * w[0]);
            extra["monotone"] = json!(monotone);
            (eps, errs, false)
        }
        k => return Err(Error::Config(format!("unknown study kind {k:?}"))),
    };
    let rows = rows_from(&xs, &errors, by_level);
    let fit = if by_level {
        let ls: Vec<u32> = xs.iter().map(|&x| x as u32).collect();
        convergence_order(&ls, &errors)
    } else {
        fit_power_law(&xs, &errors)
    };
    let mut result = json!({
        "kind": kind,
        "rows": val(&rows),
        "fitted_order": fit.as_ref().map(|f| f.exponent),
        "fit": val(&fit),
    });
    if let Value::Object(m) = extra {
        for (k, v) in m {
            result[k] = v;
        }
    }
    let flag = |key: &str| result.get(key).and_then(Value::as_bool).unwrap_or(true);
    let pass = flag("monotone") && flag("rate_pass");
    Ok(Outcome { pass, result, artifacts: vec![Artifact::Csv { name: "converge.csv".into(), text: csv(&rows, by_level) }] })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn local_orders() {
        let rows = rows_from(&[4.0, 5.0, 7.0], &[1e-2, 2.5e-3, 1.5625e-4], true);
        assert!(rows[0].order.is_none());
        assert!((rows[1].order.unwrap() - 2.0).abs() < 1e-12);
        assert!((rows[2].order.unwrap() - 2.0).abs() < 1e-12);
        let by_eps = rows_from(&[0.1, 0.05], &[4e-2, 1e-2], false);
        assert!((by_eps[1].order.unwrap() - 2.0).abs() < 1e-12);
        assert!(csv(&rows, true).starts_with("level,error,order\n4,0.01,\n5,"));
    }

    #[test]
    fn too_few_levels() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            command = "converge"
            [signals]
            f = "poly:t"
            g = "poly:t2"
            [study]
            kind = "young"
            levels = [4, 5]
            reference = 0.6666666666666666
            "#,
        )
        .unwrap();
        assert!(matches!(converge(&cfg), Err(Error::Config(_))));
    }
}
