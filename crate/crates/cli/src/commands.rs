use std::fs;
use std::path::{Path, PathBuf};

use memloss::coupling::{check_stail_bound, max_z_score, s_tail_dp, s_tail_mc, ModelConfig};
use memloss::partitions::return_time_tail_mc;
use memloss::sequences::{check_frequency, good_prefix_counts, theta_profile, SequenceConfig};
use memloss::tail::fmt_f64;
use memloss::transfer::{evolve as push_n, make_density, memory_loss_curve, mixing_floor, mixing_mass};
use memloss::{return_time_tail, DensityKind, Family, MapParams, ParamSequence, TailBase, TailTable};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::args::*;
use crate::output::{csv, slopes, summarize_text, write_atomic};
use crate::CliError;

fn config_err(msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("config error: {msg}"))
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Library errors from a config file, prefixed with its path.
fn in_file(path: &Path, e: memloss::Error) -> CliError {
    match e {
        memloss::Error::Config(m) => config_err(format!("{}: {m}", path.display())),
        other => config_err(format!("{}: {other}", path.display())),
    }
}

fn sequence(a: &SeqArgs) -> Result<ParamSequence, CliError> {
    if let Some(path) = &a.config {
        if a.family.is_some() || a.gamma.is_some() {
            return Err(config_err("--config cannot be combined with --family or --gamma"));
        }
        let cfg = SequenceConfig::from_json(&read(path)?).map_err(|e| in_file(path, e))?;
        return cfg.build().map_err(|e| in_file(path, e));
    }
    let Some(name) = &a.family else {
        return Err(config_err("either --config or --family is required"));
    };
    let family: Family = serde_json::from_value(Value::String(name.clone()))
        .map_err(|_| config_err(format!("unknown family '{name}' (lsv, cui, pikovsky or gh)")))?;
    let params = match (family, a.gamma) {
        (Family::GrossmannHorner, _) => MapParams::grossmann_horner(),
        (_, None) => return Err(config_err(format!("--gamma is required for family '{name}'"))),
        (Family::Cui, Some(g)) => MapParams::cui(g, a.beta.unwrap_or(1.0)),
        (f, Some(g)) => MapParams::new(f, g),
    };
    Ok(ParamSequence::constant(params)?)
}

fn density_kind(s: &str) -> Result<DensityKind, CliError> {
    let bad = || config_err(format!("bad density '{s}' (uniform, holder:<exponent>:<cos|sin> or cone:<beta>)"));
    let parts: Vec<&str> = s.split(':').collect();
    let num = |t: &str| t.parse::<f64>().map_err(|_| bad());
    match parts.as_slice() {
        ["uniform"] => Ok(DensityKind::Uniform),
        ["holder", e, p] => {
            let profile = match *p {
                "cos" => 0,
                "sin" => 1,
                _ => return Err(bad()),
            };
            Ok(DensityKind::Holder { exponent: num(e)?, profile })
        }
        ["cone", b] => Ok(DensityKind::ConeSample { beta: num(b)? }),
        _ => Err(bad()),
    }
}

fn base_of(s: &str) -> Result<(TailBase, &'static str), CliError> {
    match s {
        "m_k" | "mk" => Ok((TailBase::Mk, "m_k")),
        "lebesgue" => Ok((TailBase::Lebesgue, "lebesgue")),
        _ => Err(config_err(format!("unknown base '{s}' (m_k or lebesgue)"))),
    }
}

fn tail_rows(t: &TailTable) -> Vec<(String, Vec<Option<f64>>)> {
    let se = t.stderr();
    (0..t.len()).map(|n| (n.to_string(), vec![Some(t[n]), se.map(|s| s[n])])).collect()
}

/// Writes one CSV and returns its summary, computed from the written text.
fn emit(dir: &Path, name: &str, text: &str, c: Option<&Common>) -> Result<Value, CliError> {
    write_atomic(&dir.join(name), text)?;
    summarize_text(text, name, c.and_then(|c| c.fit_min), c.and_then(|c| c.fit_max))
}

/// Applies the slope gate, writes `<command>_summary.json` and prints it.
fn finish(
    command: &str,
    dir: &Path,
    files: Vec<Value>,
    common: Option<&Common>,
    mut extra: Map<String, Value>,
    mut pass: bool,
) -> Result<bool, CliError> {
    if let Some(want) = common.and_then(|c| c.expect_slope) {
        let tol = common.map_or(0.0, |c| c.tol);
        let got: Vec<Option<f64>> = files.iter().flat_map(slopes).collect();
        let ok = !got.is_empty() && got.iter().all(|s| s.is_some_and(|s| (s - want).abs() <= tol));
        extra.insert("expect_slope".into(), json!({ "value": want, "tol": tol, "pass": ok }));
        pass &= ok;
    }
    let mut summary = Map::new();
    summary.insert("command".into(), json!(command));
    summary.insert("files".into(), Value::Array(files));
    summary.extend(extra);
    summary.insert("pass".into(), json!(pass));
    let text = serde_json::to_string_pretty(&Value::Object(summary)).expect("summary serializes") + "\n";
    write_atomic(&dir.join(format!("{command}_summary.json")), &text)?;
    print!("{text}");
    Ok(pass)
}

pub fn tails(a: TailsArgs) -> Result<bool, CliError> {
    let seq = sequence(&a.seq)?;
    let bases = a.base.iter().map(|b| base_of(b)).collect::<Result<Vec<_>, _>>()?;
    if a.k.contains(&0) {
        return Err(config_err("--k must be at least 1"));
    }
    let jobs: Vec<(usize, TailBase, &str)> =
        a.k.iter().flat_map(|&k| bases.iter().map(move |&(b, name)| (k, b, name))).collect();
    let tables = jobs
        .par_iter()
        .map(|&(k, base, name)| {
            let exact = return_time_tail(&seq, k, a.n_max, base)?;
            let mc = match a.samples {
                Some(s) => Some(return_time_tail_mc(&seq, k, a.n_max, base, s, a.common.seed)?),
                None => None,
            };
            Ok((format!("tails_k{k}_{name}"), exact, mc))
        })
        .collect::<Result<Vec<_>, memloss::Error>>()?;
    let mut files = Vec::new();
    for (stem, exact, mc) in &tables {
        files.push(emit(&a.common.out, &format!("{stem}.csv"), &csv("n,value,stderr", tail_rows(exact)), Some(&a.common))?);
        if let Some(mc) = mc {
            files.push(emit(&a.common.out, &format!("{stem}_mc.csv"), &csv("n,value,stderr", tail_rows(mc)), Some(&a.common))?);
        }
    }
    finish("tails", &a.common.out, files, Some(&a.common), Map::new(), true)
}

pub fn evolve(a: EvolveArgs) -> Result<bool, CliError> {
    let seq = sequence(&a.seq)?;
    let f = make_density(density_kind(&a.density)?, seq.family().state_interval(), a.grid)?;
    let g = push_n(&seq, &f, a.steps)?;
    let rows = (0..g.cells()).map(|i| (fmt_f64(g.midpoint(i)), vec![Some(g.values()[i])]));
    let file = emit(&a.common.out, "evolve.csv", &csv("x,density", rows), Some(&a.common))?;
    let mut extra = Map::new();
    extra.insert("steps".into(), json!(a.steps));
    finish("evolve", &a.common.out, vec![file], Some(&a.common), extra, true)
}

pub fn memloss(a: MemlossArgs) -> Result<bool, CliError> {
    let seq = sequence(&a.seq)?;
    let interval = seq.family().state_interval();
    let f = make_density(density_kind(&a.f)?, interval, a.grid)?;
    let g = make_density(density_kind(&a.g)?, interval, a.grid)?;
    let t = memory_loss_curve(&seq, &f, &g, a.n_max)?;
    let rows = (0..t.len()).map(|n| (n.to_string(), vec![Some(t[n])]));
    let file = emit(&a.common.out, "memloss.csv", &csv("n,tv", rows), Some(&a.common))?;
    finish("memloss", &a.common.out, vec![file], Some(&a.common), Map::new(), true)
}

pub fn mixing(a: MixingArgs) -> Result<bool, CliError> {
    let seq = sequence(&a.seq)?;
    let t = mixing_mass(&seq, a.k, a.n_max, a.grid)?;
    let rows = (0..t.len()).map(|n| (n.to_string(), vec![Some(t[n])]));
    let file = emit(&a.common.out, "mixing.csv", &csv("n,mass", rows), Some(&a.common))?;
    let mut extra = Map::new();
    let mut pass = true;
    if let Some(want) = a.expect_floor {
        let (floor, _) = mixing_floor(&t, 2)?;
        let ok = floor >= want;
        extra.insert("expect_floor".into(), json!({ "value": want, "pass": ok }));
        pass = ok;
    }
    finish("mixing", &a.common.out, vec![file], Some(&a.common), extra, pass)
}

pub fn coupling(a: CouplingArgs) -> Result<bool, CliError> {
    let cfg = ModelConfig::from_json(&read(&a.config)?).map_err(|e| in_file(&a.config, e))?;
    let dir = a.config.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    let (fam, model) = cfg.build(a.n_max, &dir).map_err(|e| in_file(&a.config, e))?;
    for w in &fam.warnings {
        eprintln!("warning: {w}");
    }
    let dp = s_tail_dp(&model, a.n_max)?;
    let mc = if a.samples > 0 { Some(s_tail_mc(&model, a.n_max, a.samples, a.common.seed)?) } else { None };
    let bound = check_stail_bound(&dp, fam.beta_prime, fam.theta_star(), fam.k);
    let rows = (0..dp.len()).map(|n| {
        let (p, se) = match &mc {
            Some(m) => (Some(m[n]), m.stderr().map(|s| s[n])),
            None => (None, None),
        };
        (n.to_string(), vec![Some(dp[n]), p, se, Some(bound.ratio[n])])
    });
    let file = emit(&a.common.out, "coupling.csv", &csv("n,p_dp,p_mc,stderr,ratio", rows), Some(&a.common))?;
    let mut extra = Map::new();
    extra.insert("warnings".into(), json!(fam.warnings));
    extra.insert("theta_star".into(), json!(fam.theta_star()));
    extra.insert("nonincreasing_after_max".into(), json!(bound.nonincreasing_after_max));
    if let Some(m) = &mc {
        extra.insert("samples".into(), json!(a.samples));
        extra.insert("max_z".into(), json!(max_z_score(&dp, m, a.samples, 1e-4)));
    }
    finish("coupling", &a.common.out, vec![file], Some(&a.common), extra, true)
}

pub fn frequency(a: FrequencyArgs) -> Result<bool, CliError> {
    let seq = sequence(&a.seq)?;
    let est = check_frequency(&seq, a.threshold, a.n_max)?;
    let b = a.b.unwrap_or(est.a);
    let prof = theta_profile(&seq, a.threshold, b, a.n_max)?;
    let counts = good_prefix_counts(&seq, a.threshold, a.n_max)?;
    let rows = (0..=a.n_max).map(|n| {
        if n == 0 {
            return (n.to_string(), vec![None, None, None]);
        }
        let ratio = counts[n] as f64 / n as f64;
        (n.to_string(), vec![Some(ratio), Some(prof.theta[n]), Some(prof.sup_tail[n])])
    });
    let file = emit(&a.out, "frequency.csv", &csv("n,ratio,theta,theta_sup", rows), None)?;
    let mut extra = Map::new();
    extra.insert("a".into(), json!(est.a));
    extra.insert("kappa".into(), json!(est.kappa));
    extra.insert("n_start".into(), json!(est.n_start));
    extra.insert("b".into(), json!(b));
    finish("frequency", &a.out, vec![file], None, extra, true)
}

pub fn summarize(a: SummarizeArgs) -> Result<bool, CliError> {
    if a.files.is_empty() {
        return Err(config_err("no CSV files given"));
    }
    let mut out = Vec::new();
    for path in &a.files {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        out.push(summarize_text(&read(path)?, &name, a.fit_min, a.fit_max)?);
    }
    let text = serde_json::to_string_pretty(&json!({ "files": out })).expect("summary serializes");
    println!("{text}");
    Ok(true)
}
