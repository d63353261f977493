use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use fracld::intersection::{intersection_scaling_exponent, sample_alpha};
use fracld::ldconst::{
    c_bounds, j_integral, k_bounds, k_tilde_bounds, l_bounds, lil_constants, theta_bounds,
    tilde_theta_bounds, KnownConstants,
};
use fracld::localtime::{sample_local_time, tail_curve, KernelParams};
use fracld::moments::{
    estimate_l_theta, exp_moment_bracket, exp_moments, intersection_exp_moment_bound, unit_moments,
    weight_bound,
};
use fracld::process_sim::{
    auto_sampler, compute_c_h, uniform_grid, write_binary, write_csv_many, FactorSampler,
    PathSampler,
};
use fracld::report::{format_float, to_json_string, SCHEMA_VERSION};
use fracld::rkhs::{build_z_a, estimate_k_a_on, rkhs_norm, rkhs_order, RkhsFunction};
use fracld::stats::Summary;
use fracld::{CovKind, CovModel, GridPath};

use crate::config::{Command, ExperimentConfig, Format, ModelArg, RkhsMode};
use crate::{exit, verify, CliError};

pub fn dispatch(cmd: &Command, out: &mut dyn Write) -> Result<i32, CliError> {
    if let Command::Verify { common, suite } = cmd {
        return verify::run_suite(suite, common, out);
    }
    let cfg = ExperimentConfig::resolve(cmd)?;
    let dest = cmd.common().out.as_deref();
    match cmd {
        Command::Simulate { model, .. } => simulate(&cfg, *model, dest, out),
        Command::Localtime {
            model, x, levels, ..
        } => localtime(&cfg, *model, x, levels, dest, out),
        Command::Intersect { model, .. } => intersect(&cfg, *model, dest, out),
        Command::Moments { .. } => moments(&cfg, dest, out),
        Command::Constants { .. } => constants(&cfg, dest, out),
        Command::Rkhs { mode, input, a, .. } => rkhs(&cfg, *mode, input.as_deref(), *a, dest, out),
        Command::Verify { .. } => unreachable!("handled above"),
    }
    .map(|()| exit::OK)
}

/// Writes `bytes` to `dest`, or to `out` when no file is given.
pub(crate) fn emit(dest: Option<&Path>, bytes: &[u8], out: &mut dyn Write) -> Result<(), CliError> {
    match dest {
        Some(p) => std::fs::write(p, bytes)?,
        None => out.write_all(bytes)?,
    }
    Ok(())
}

fn json_doc<S: Serialize>(cfg: &ExperimentConfig, body: S) -> String {
    let mut v = serde_json::to_value(body).expect("serializable body");
    if let Value::Object(map) = &mut v {
        map.insert("schema_version".into(), json!(SCHEMA_VERSION));
        map.insert(
            "config".into(),
            serde_json::to_value(cfg).expect("serializable config"),
        );
    }
    to_json_string(&v)
}

fn no_binary(cfg: &ExperimentConfig) -> Result<(), CliError> {
    if cfg.format == Format::Binary {
        return Err(CliError::Usage(format!(
            "--format binary is only supported by simulate, not {}",
            cfg.subcommand
        )));
    }
    Ok(())
}

/// Default width `max(10 Δ^{2H}, 1e-4)` on the unit interval, carried to
/// `[0, T]` by self-similarity.
fn kernel_for(cfg: &ExperimentConfig) -> Result<KernelParams, CliError> {
    Ok(match cfg.eps {
        Some(e) => KernelParams::new(e)?,
        None => KernelParams::default_for(1.0 / cfg.n as f64, cfg.h).rescaled(cfg.horizon, cfg.h),
    })
}

fn values_csv(values: &[f64]) -> String {
    let mut s = String::from("replica,value\n");
    for (i, v) in values.iter().enumerate() {
        let _ = writeln!(s, "{i},{}", format_float(*v));
    }
    s
}

fn simulate(
    cfg: &ExperimentConfig,
    model: ModelArg,
    dest: Option<&Path>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let model = CovModel::new(model.into(), cfg.params())?;
    let sampler = auto_sampler(&model, cfg.n, cfg.horizon, cfg.seed)?;
    let paths: Vec<GridPath> = (0..cfg.replicas as u64)
        .into_par_iter()
        .map(|r| sampler.path(r))
        .collect();
    let mut buf = Vec::new();
    match cfg.format {
        Format::Csv => write_csv_many(&mut buf, &paths)?,
        Format::Binary => {
            if dest.is_none() {
                return Err(CliError::Usage("--format binary needs --out".into()));
            }
            write_binary(&mut buf, &paths)?;
        }
        Format::Json => {
            let body = json!({
                "model": model.kind.name(),
                "times": sampler.times(),
                "paths": paths.iter().map(|p| &p.values).collect::<Vec<_>>(),
            });
            buf = json_doc(cfg, body).into_bytes();
        }
    }
    emit(dest, &buf, out)
}

fn localtime(
    cfg: &ExperimentConfig,
    model: ModelArg,
    x: &[f64],
    levels: &[f64],
    dest: Option<&Path>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    no_binary(cfg)?;
    let params = cfg.params();
    params.validate_local_time()?;
    let model = CovModel::new(model.into(), params)?;
    let x = if x.is_empty() {
        vec![0.0; cfg.d]
    } else {
        x.to_vec()
    };
    let kernel = kernel_for(cfg)?;
    let sample = sample_local_time(
        &model,
        cfg.horizon,
        &x,
        kernel,
        cfg.n,
        cfg.seed,
        cfg.replicas,
    )?;
    let curve = tail_curve(&sample, levels);
    let text = match cfg.format {
        Format::Csv if !levels.is_empty() => {
            let mut s =
                String::from("a,exceedances,log_p,log_p_low,log_p_high,normalized,flagged\n");
            for c in &curve {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{}",
                    format_float(c.a),
                    c.exceedances,
                    format_float(c.log_p),
                    format_float(c.log_p_low),
                    format_float(c.log_p_high),
                    format_float(c.normalized),
                    c.flagged
                );
            }
            s
        }
        Format::Csv => values_csv(&sample.values),
        _ => {
            let s = Summary::from_slice(&sample.values);
            json_doc(
                cfg,
                json!({
                    "model": model.kind.name(),
                    "params": params,
                    "kernel": kernel,
                    "x": x,
                    "replicas": sample.len(),
                    "mean": s.mean,
                    "stderr": s.stderr(),
                    "values": sample.values,
                    "curve": curve,
                }),
            )
        }
    };
    emit(dest, text.as_bytes(), out)
}

fn intersect(
    cfg: &ExperimentConfig,
    model: ModelArg,
    dest: Option<&Path>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    no_binary(cfg)?;
    let params = cfg.params();
    params.validate_intersection()?;
    let model = CovModel::new(model.into(), params)?;
    let kernel = kernel_for(cfg)?;
    let sample = sample_alpha(
        &model,
        cfg.p,
        cfg.horizon,
        kernel,
        cfg.n,
        cfg.seed,
        cfg.replicas,
    )?;
    let text = match cfg.format {
        Format::Csv => values_csv(&sample.values),
        _ => {
            let s = Summary::from_slice(&sample.values);
            json_doc(
                cfg,
                json!({
                    "model": model.kind.name(),
                    "params": params,
                    "kernel": kernel,
                    "region": sample.region,
                    "replicas": sample.values.len(),
                    "scaling_exponent": intersection_scaling_exponent(&params),
                    "mean": s.mean,
                    "stderr": s.stderr(),
                    "values": sample.values,
                }),
            )
        }
    };
    emit(dest, text.as_bytes(), out)
}

fn moments(
    cfg: &ExperimentConfig,
    dest: Option<&Path>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    no_binary(cfg)?;
    let params = cfg.params();
    params.validate_fbm()?;
    params.validate_local_time()?;
    let unit = unit_moments(&params, cfg.m_max, cfg.budget, cfg.seed)?;
    let exp = exp_moments(&params, cfg.m_max, cfg.budget, cfg.seed)?;
    let brackets = (1..=cfg.m_max)
        .map(|m| exp_moment_bracket(m, &params))
        .collect::<fracld::Result<Vec<_>>>()?;
    let text = match cfg.format {
        Format::Csv => {
            let mut s = String::from("m,unit,unit_stderr,exp,exp_stderr,exp_lower,exp_upper\n");
            for ((u, e), (lo, hi)) in unit.iter().zip(&exp).zip(&brackets) {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{}",
                    u.m,
                    format_float(u.value),
                    format_float(u.stderr),
                    format_float(e.value),
                    format_float(e.stderr),
                    format_float(*lo),
                    format_float(*hi)
                );
            }
            s
        }
        _ => {
            let l_theta = estimate_l_theta(&params, cfg.m_max, cfg.budget, cfg.seed)?;
            let weight_bounds = (1..=cfg.m_max)
                .map(|m| weight_bound(m, &params))
                .collect::<fracld::Result<Vec<_>>>()?;
            let intersection_bounds: Option<Vec<f64>> = params
                .validate_intersection()
                .ok()
                .map(|()| {
                    (1..=cfg.m_max)
                        .map(|m| intersection_exp_moment_bound(m, &params))
                        .collect::<fracld::Result<Vec<_>>>()
                })
                .transpose()?;
            json_doc(
                cfg,
                json!({
                    "params": params,
                    "unit_time": unit,
                    "exp_time": exp,
                    "exp_brackets": brackets,
                    "weight_bounds": weight_bounds,
                    "l_theta": l_theta,
                    "intersection_exp_bounds": intersection_bounds,
                }),
            )
        }
    };
    emit(dest, text.as_bytes(), out)
}

fn constants(
    cfg: &ExperimentConfig,
    dest: Option<&Path>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    if cfg.format != Format::Json {
        return Err(CliError::Usage("constants only writes JSON".into()));
    }
    let params = cfg.params();
    params.validate_fbm()?;
    let local = params.validate_local_time().is_ok();
    let inter = params.validate_intersection().is_ok();
    if !local && !inter {
        // reports the local-time condition, the weaker of the two
        params.validate_local_time()?;
    }
    let c = compute_c_h(cfg.h)?;
    let gate = |ok: bool, v: fracld::Result<Value>| -> fracld::Result<Value> {
        if ok {
            v
        } else {
            Ok(Value::Null)
        }
    };
    let to_v = |x: fracld::Result<fracld::ldconst::RateBounds>| {
        x.map(|b| serde_json::to_value(b).expect("bounds"))
    };
    let body = json!({
        "params": params,
        "kappa": params.kappa(),
        "p_star": params.p_star(),
        "c_H": c,
        "c_H_squared": c * c,
        "theta": gate(local, to_v(theta_bounds(&params)))?,
        "theta_tilde": gate(local, to_v(tilde_theta_bounds(&params)))?,
        "L": gate(local, to_v(l_bounds(&params)))?,
        "J": j_integral(cfg.h, cfg.d),
        "K_tilde": gate(inter, to_v(k_tilde_bounds(&params)))?,
        "K": gate(inter, to_v(k_bounds(&params)))?,
        "C": gate(inter, to_v(c_bounds(&params)))?,
        "lil": lil_constants(&params, KnownConstants::default())?,
    });
    emit(dest, json_doc(cfg, body).as_bytes(), out)
}

/// Reads `t,f` or `f` columns; a non-numeric first line is a header.
fn read_function(path: &Path, horizon: f64) -> Result<(f64, Vec<f64>), CliError> {
    let text = std::fs::read_to_string(path)?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(v) if v.len() == 1 => values.push(v[0]),
            Ok(v) if v.len() == 2 => {
                times.push(v[0]);
                values.push(v[1]);
            }
            Ok(_) => {
                return Err(CliError::Usage(format!(
                    "{}: line {} needs one or two columns",
                    path.display(),
                    i + 1
                )))
            }
            Err(_) if i == 0 => continue,
            Err(e) => {
                return Err(CliError::Usage(format!(
                    "{}: line {}: {e}",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    if !times.is_empty() && times.len() != values.len() {
        return Err(CliError::Usage("mixed one- and two-column rows".into()));
    }
    if values.len() < 3 {
        return Err(CliError::Usage("need at least three samples".into()));
    }
    if times.is_empty() {
        return Ok((horizon, values));
    }
    let n = times.len() - 1;
    let t_end = times[n];
    let step = t_end / n as f64;
    let uniform = times
        .iter()
        .enumerate()
        .all(|(i, &t)| (t - i as f64 * step).abs() <= 1e-9 * t_end.max(1.0));
    if !uniform {
        return Err(CliError::Usage(
            "the t column must be a uniform grid starting at 0".into(),
        ));
    }
    Ok((t_end, values))
}

fn rkhs(
    cfg: &ExperimentConfig,
    mode: RkhsMode,
    input: Option<&Path>,
    a: f64,
    dest: Option<&Path>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    no_binary(cfg)?;
    let params = cfg.params();
    params.validate_fbm()?;
    let text = match mode {
        RkhsMode::Norm => {
            let path: PathBuf = input
                .ok_or_else(|| CliError::Usage("rkhs --mode norm needs --input".into()))?
                .to_path_buf();
            let (horizon, values) = read_function(&path, cfg.horizon)?;
            let n = values.len() - 1;
            let f = RkhsFunction::from_samples(cfg.h, horizon, values)?;
            let norm = rkhs_norm(&f)?;
            if cfg.format == Format::Csv {
                format!(
                    "n,T,norm\n{n},{},{}\n",
                    format_float(horizon),
                    format_float(norm)
                )
            } else {
                json_doc(
                    cfg,
                    json!({ "mode": mode, "n": n, "T": horizon, "order": rkhs_order(cfg.h), "norm": norm }),
                )
            }
        }
        RkhsMode::Za => {
            let model = CovModel::new(CovKind::Remainder, fracld::ModelParams::new(cfg.h, 1))?;
            let times = uniform_grid(cfg.n, cfg.horizon);
            let step = cfg.horizon / cfg.n as f64;
            let i = (a / step).round() as usize;
            if i == 0 || i >= cfg.n {
                return Err(CliError::Usage(format!(
                    "--a must lie strictly inside (0, T), got {a}"
                )));
            }
            let path = FactorSampler::new(model, times.clone(), cfg.seed)?.path(0);
            let v = &path.values;
            let zdot = (rkhs_order(cfg.h) == 2).then(|| (v[i + 1] - v[i - 1]) / (2.0 * step));
            let (fill, pasted) = build_z_a(v[i], zdot, times[i], cfg.h, &times, v)?;
            if cfg.format == Format::Csv {
                let mut s = String::from("t,z,z_a\n");
                for ((t, z), za) in times.iter().zip(v).zip(&pasted) {
                    let _ = writeln!(
                        s,
                        "{},{},{}",
                        format_float(*t),
                        format_float(*z),
                        format_float(*za)
                    );
                }
                s
            } else {
                json_doc(
                    cfg,
                    json!({ "mode": mode, "a": times[i], "fill": fill,
                        "fill_norm_sq": fill.norm_sq_on_fill(),
                        "times": times, "z": v, "z_a": pasted }),
                )
            }
        }
        RkhsMode::Ka => {
            let n_tail = cfg.n + cfg.n % 2;
            let k = estimate_k_a_on(cfg.h, a, cfg.replicas, cfg.seed, n_tail)?;
            if cfg.format == Format::Csv {
                format!(
                    "a,K_a,stderr\n{},{},{}\n",
                    format_float(a),
                    format_float(k.value),
                    format_float(k.stderr)
                )
            } else {
                json_doc(
                    cfg,
                    json!({ "mode": mode, "a": a, "tail_grid": n_tail, "K_a": k }),
                )
            }
        }
    };
    emit(dest, text.as_bytes(), out)
}
