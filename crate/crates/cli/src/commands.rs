//! The three subcommands.

use std::path::{Path, PathBuf};

use hyperuni_core::energy::{
    iid_expected_wce_squared, l2_discrepancy, l2_discrepancy_distance, stolarsky_residual,
    stolarsky_residual_closed_form, strength_spec, wce_squared_auto,
};
use hyperuni_core::pointset::{
    fibonacci_sphere, format_pointset, load_pointset, maximize_distance_sum, random_uniform,
};
use hyperuni_core::structure::{
    classify_large_caps, classify_small_caps, classify_threshold, estimate_strength, IidEnsemble,
    IidExpectation, RegimeReport, Verdict, VerdictRules, WindowRule, MIN_SETS,
};
use hyperuni_core::variance::{iid_variance, variance_profile, weyl_sums, ProfileMethod, VarianceMethod};
use hyperuni_core::{Error, OptimizerOptions, PointSet, PointSetSequence, SequenceSource, SphereDim, TruncationConfig};
use serde_json::{json, Value};

use crate::output::{csv, Outputs};
use crate::{CliError, Outcome, RunConfig};

const STOLARSKY_TOL: f64 = 1e-6;
/// Default L² tolerance relative to the closed-form D²; the certified
/// truncation degree grows like 1/tol.
const L2_REL_TOL: f64 = 0.1;

fn dim_of(config: &RunConfig) -> Result<SphereDim, CliError> {
    Ok(SphereDim::new(config.d)?)
}

pub fn generate(config: &RunConfig) -> Result<Outcome, CliError> {
    let dim = dim_of(config)?;
    let family = config.family.as_deref().unwrap_or_default();
    let mut outputs = Outputs::new();
    let mut unconverged = false;
    for &n in &config.sizes {
        let (points, optimizer) = match family {
            "random" => (random_uniform(dim, n, config.seed)?, Value::Null),
            "fibonacci" => (fibonacci_sphere(n)?, Value::Null),
            "maxdist" => {
                let opts = OptimizerOptions {
                    max_iterations: config.max_iterations,
                    restarts: config.restarts,
                    seed: config.seed,
                    ..OptimizerOptions::default()
                };
                let tau = config.tau.expect("resolved");
                let result = maximize_distance_sum(dim, n, tau, &opts)?;
                unconverged |= !result.converged();
                let best = &result.best;
                let info = json!({
                    "converged": best.converged,
                    "objective": best.objective,
                    "iterations": best.iterations,
                    "gradient_norm": best.gradient_norm,
                    "best_restart": result.best_restart,
                    "restart_objectives": result.restart_objectives,
                });
                (result.best.points, info)
            }
            other => return Err(CliError::Config(format!("unknown family {other:?}"))),
        };
        let stem = format!("{family}_d{}_n{n:06}", dim.get());
        outputs.raw(format!("{stem}.txt"), format_pointset(&points).into_bytes());
        let sidecar = json!({
            "file": format!("{stem}.txt"),
            "dim": dim.get(),
            "n_points": points.len(),
            "provenance": points.provenance(),
            "optimizer": optimizer,
        });
        outputs.json(format!("{stem}.json"), "pointset", &sidecar, config)?;
    }
    Ok(Outcome {
        written: outputs.commit(&config.out)?,
        unconverged,
    })
}

/// Expands directories into their `.txt` files, sorted by name.
fn input_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(Error::from)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.is_file() && f.extension().is_some_and(|e| e == "txt"))
                .collect();
            if found.is_empty() {
                return Err(CliError::Config(format!("{} holds no .txt point-set files", p.display())));
            }
            found.sort();
            files.extend(found);
        } else if p.is_file() {
            files.push(p.clone());
        } else {
            return Err(CliError::Config(format!("{} does not exist", p.display())));
        }
    }
    files
        .into_iter()
        .map(|f| std::fs::canonicalize(&f).map_err(|e| CliError::Config(format!("{}: {e}", f.display()))))
        .collect()
}

/// Loads every input and returns the config with canonical input paths.
fn load_inputs(config: &RunConfig) -> Result<(RunConfig, Vec<PointSet>), CliError> {
    let files = input_files(&config.input)?;
    let sets = files.iter().map(load_pointset).collect::<Result<Vec<_>, _>>()?;
    let mut resolved = config.clone();
    resolved.input = files;
    Ok((resolved, sets))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "input".into())
}

pub fn analyze(config: &RunConfig) -> Result<Outcome, CliError> {
    let (config, sets) = load_inputs(config)?;
    let mut stems: Vec<String> = config.input.iter().map(|p| stem(p)).collect();
    stems.sort();
    if stems.windows(2).any(|w| w[0] == w[1]) {
        return Err(CliError::Config("input files must have distinct names".into()));
    }
    let cfg = TruncationConfig::default();
    let method = match config.method {
        VarianceMethod::Spectral => ProfileMethod::Spectral {
            tol: config.variance_tol,
            cfg: cfg.clone(),
        },
        VarianceMethod::MonteCarlo => ProfileMethod::MonteCarlo {
            centers: config.centers,
            seed: config.seed,
            sampling: config.sampling,
        },
        VarianceMethod::PairKernel => ProfileMethod::PairKernel,
    };
    let mut outputs = Outputs::new();
    for (path, x) in config.input.iter().zip(&sets) {
        let dim = x.dim();
        let n = x.len();
        let profile = variance_profile(x, &config.phi_grid, &method)?;
        let iid = config
            .phi_grid
            .iter()
            .map(|&phi| iid_variance(dim, n, phi))
            .collect::<Result<Vec<_>, _>>()?;
        let w = weyl_sums(x, config.weyl_degree);
        let n2 = (n as f64).powi(2);
        let weyl: Vec<Value> = (1..=config.weyl_degree)
            .map(|k| json!({ "n": k, "value": w[k], "normalized": w[k] / n2 }))
            .collect();
        let mut wce = Vec::new();
        let default_s = [0.5 * (dim.get() as f64 + 1.0)];
        let s_grid = if config.s.is_empty() { &default_s[..] } else { &config.s[..] };
        for &s in s_grid {
            let spec = strength_spec(dim, s)?;
            let report = wce_squared_auto(x, &spec, &cfg)?;
            wce.push(json!({
                "s": s,
                "wce": report.wce(),
                "report": report,
                "iid_expected_wce_squared": iid_expected_wce_squared(&spec, n)?,
            }));
        }
        let mut checks = serde_json::Map::new();
        for check in &config.check {
            let value = match check.as_str() {
                "stolarsky" => {
                    let tol = config.tol.unwrap_or(STOLARSKY_TOL);
                    let series = stolarsky_residual(x, tol, &cfg)?;
                    json!({
                        "residual": series.residual,
                        "tail_bound": series.tail_bound,
                        "max_degree": series.max_degree,
                        "residual_closed_form": stolarsky_residual_closed_form(x),
                        "tol": tol,
                        "passed": series.residual.abs() <= tol,
                    })
                }
                "l2" => {
                    let closed = l2_discrepancy_distance(x);
                    let tol = config.tol.unwrap_or(L2_REL_TOL * closed.powi(2).max(1e-6));
                    let mut nodes = 256;
                    let d = loop {
                        match l2_discrepancy(x, nodes, tol, &cfg) {
                            Err(Error::QuadratureNotConverged(_)) if nodes < 1 << 16 => nodes *= 2,
                            other => break other?,
                        }
                    };
                    json!({ "series": d, "distance_route": closed, "tol": tol })
                }
                other => return Err(CliError::Config(format!("unknown check {other:?}"))),
            };
            checks.insert(check.clone(), value);
        }
        let stem = stem(path);
        if config.format.json() {
            let payload = json!({
                "input": path,
                "dim": dim.get(),
                "n_points": n,
                "provenance": x.provenance(),
                "variance": {
                    "method": profile.method,
                    "angles": profile.angles,
                    "values": profile.values,
                    "errors": profile.errors,
                    "max_degrees": profile.max_degrees,
                    "iid": iid,
                },
                "weyl": weyl,
                "wce": wce,
                "checks": checks,
            });
            outputs.json(format!("{stem}.analysis.json"), "analysis", &payload, &config)?;
        }
        if config.format.csv() {
            outputs.raw(format!("{stem}.variance.csv"), profile.to_csv().into_bytes());
            let rows = (1..=config.weyl_degree).map(|k| vec![k as f64, w[k], w[k] / n2]);
            outputs.raw(format!("{stem}.weyl.csv"), csv(&["n", "weyl", "normalized"], rows));
        }
    }
    Ok(Outcome {
        written: outputs.commit(&config.out)?,
        unconverged: false,
    })
}

fn source(config: &RunConfig) -> Result<(RunConfig, Box<dyn SequenceSource>), CliError> {
    let dim = dim_of(config)?;
    let sizes = config.sizes.clone();
    let src: Box<dyn SequenceSource> = match config.family.as_deref() {
        Some("fibonacci") => {
            let members = sizes.iter().map(|&n| fibonacci_sphere(n)).collect::<Result<Vec<_>, _>>()?;
            Box::new(PointSetSequence::new("fibonacci", members)?)
        }
        Some("random") => Box::new(IidEnsemble::new(dim, sizes, config.replicas, config.seed)?),
        Some("iid-expectation") => Box::new(IidExpectation::new(dim, sizes)?),
        Some(other) => return Err(CliError::Config(format!("unknown family {other:?}"))),
        None => {
            let (resolved, mut sets) = load_inputs(config)?;
            sets.sort_by_key(|x| x.len());
            let mut resolved = resolved;
            resolved.d = sets[0].dim().get();
            resolved.sizes = sets.iter().map(|x| x.len()).collect();
            return Ok((resolved, Box::new(PointSetSequence::new("input", sets)?)));
        }
    };
    Ok((config.clone(), src))
}

fn regime_csvs(outputs: &mut Outputs, report: &RegimeReport) {
    let name = report.regime.as_str();
    let fit = report
        .fit_points
        .iter()
        .map(|p| vec![p.param.unwrap_or(f64::NAN), p.x, p.y]);
    outputs.raw(format!("classify_{name}_fit.csv"), csv(&["param", "log_n", "log_value"], fit));
    let table = report
        .table
        .iter()
        .map(|r| vec![r.n_points as f64, r.param, r.angle, r.value, r.normalized]);
    outputs.raw(
        format!("classify_{name}_table.csv"),
        csv(&["n_points", "param", "angle", "value", "normalized"], table),
    );
}

pub fn classify(config: &RunConfig) -> Result<Outcome, CliError> {
    let (config, src) = source(config)?;
    let sizes = src.sizes();
    if sizes.len() < MIN_SETS {
        return Err(CliError::Config(format!(
            "classify needs at least {MIN_SETS} point sets, got {}",
            sizes.len()
        )));
    }
    let rules = VerdictRules::default();
    let window = WindowRule::Log {
        scale: config.window_scale,
    };
    let reports = [
        classify_large_caps(src.as_ref(), &config.phi_grid, &rules)?,
        classify_small_caps(src.as_ref(), &window, &rules)?,
        classify_threshold(src.as_ref(), &config.t_grid, &rules)?,
    ];
    let strength = if config.s.is_empty() {
        None
    } else {
        Some(estimate_strength(src.as_ref(), &config.s, &rules)?)
    };
    let mut outputs = Outputs::new();
    for report in &reports {
        let name = report.regime.as_str();
        if config.format.json() {
            outputs.json(format!("classify_{name}.json"), "regime-report", report, &config)?;
        }
        if config.format.csv() {
            regime_csvs(&mut outputs, report);
        }
    }
    if let Some(table) = &strength {
        if config.format.json() {
            outputs.json("classify_strength.json", "strength-table", table, &config)?;
        }
        if config.format.csv() {
            let rows = table.rows.iter().map(|r| {
                vec![r.s, r.slope, r.stderr.unwrap_or(f64::NAN), r.predicted, r.passes as u8 as f64]
            });
            outputs.raw(
                "classify_strength.csv",
                csv(&["s", "slope", "stderr", "predicted", "passes"], rows),
            );
        }
    }
    let verdicts: Vec<Verdict> = reports.iter().map(|r| r.verdict).collect();
    let combined = if verdicts.iter().all(|v| *v == Verdict::Consistent) {
        Verdict::Consistent
    } else if verdicts.contains(&Verdict::Inconsistent) {
        Verdict::Inconsistent
    } else {
        Verdict::Inconclusive
    };
    let summary = json!({
        "family": src.family(),
        "dim": src.dim().get(),
        "sizes": sizes,
        "source": src.describe(),
        "verdicts": {
            "large": reports[0].verdict,
            "small": reports[1].verdict,
            "threshold": reports[2].verdict,
        },
        "combined": combined,
        "threshold_exponent": reports[2].exponents.first().map(|e| e.slope),
        "s_star_hat": strength.as_ref().and_then(|t| t.s_star_hat),
    });
    outputs.json("classify_summary.json", "classify-summary", &summary, &config)?;
    Ok(Outcome {
        written: outputs.commit(&config.out)?,
        unconverged: false,
    })
}
