mod config;
mod table;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Parser, Subcommand};
use serde_json::json;

use oprisk::invariance::{phase_grid, ExponentForm};
use oprisk::montecarlo::MIN_REPS;
use oprisk::{Engine, ModelSpec, Schedule, ScheduleMode, SeverityFamily};

use config::{invalid, Invalid, Params, DEFAULT_SEED};
use table::{Cell, Table};

#[derive(Parser)]
#[command(name = "oprisk", version, about = "Classification-invariant operational-risk laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Curves A, C, B, D of the (rho, lambda) phase diagram
    PhaseDiagram(Params),
    /// mu_N, t_N, rho_N over a list of cell counts
    Schedule(Params),
    /// Moments and quantiles of the bank loss at one cell count
    Simulate(Params),
    /// Law of the normalized fluctuation against stable and Gaussian fits
    Fluctuations(Params),
    /// Diversification ratio of the value at risk
    Diversification(Params),
    /// Pair correlation of cell losses under the one-factor model
    Correlation(Params),
}

impl Command {
    fn split(self) -> (&'static str, Params) {
        match self {
            Command::PhaseDiagram(p) => ("phase-diagram", p),
            Command::Schedule(p) => ("schedule", p),
            Command::Simulate(p) => ("simulate", p),
            Command::Fluctuations(p) => ("fluctuations", p),
            Command::Diversification(p) => ("diversification", p),
            Command::Correlation(p) => ("correlation", p),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_status(&e))
        }
    }
}

fn exit_status(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<Invalid>() {
            return 2;
        }
        if let Some(err) = cause.downcast_ref::<oprisk::Error>() {
            return if err.is_validation() { 2 } else { 3 };
        }
        if cause.is::<io::Error>() || cause.is::<csv::Error>() || cause.is::<serde_json::Error>() {
            return 4;
        }
    }
    1
}

fn powers_of_two(lo: u32, hi: u32) -> Vec<u64> {
    (lo..=hi).map(|k| 1u64 << k).collect()
}

/// Fills unset options with the defaults of `command`.
fn with_defaults(command: &str, mut p: Params) -> anyhow::Result<Params> {
    p.command = Some(command.to_string());
    if command == "phase-diagram" {
        p.rho_min.get_or_insert(1.5);
        p.rho_max.get_or_insert(4.0);
        p.steps.get_or_insert(251);
        return Ok(p);
    }
    let rho = *p.rho.get_or_insert(2.0);
    let family = p
        .family
        .get_or_insert_with(|| if rho == 2.0 { "gaussian" } else { "weibull" }.to_string())
        .clone();
    if family == "weibull" {
        p.c.get_or_insert(1.0 / rho);
    }
    p.lambda.get_or_insert(2.0);
    p.schedule.get_or_insert_with(|| "exact-normalized".to_string());
    p.a.get_or_insert(1.0);
    p.b.get_or_insert(1.0);
    p.c0.get_or_insert(if command == "correlation" { 1.0 } else { 0.0 });
    p.q.get_or_insert(0.99);
    match command {
        "schedule" => {
            p.n_list.get_or_insert_with(|| powers_of_two(1, 20));
        }
        "simulate" => {
            p.n.get_or_insert(1024);
            p.levels.get_or_insert_with(|| vec![0.5, 0.9, 0.99, 0.999]);
            p.reps.get_or_insert(100_000);
        }
        "fluctuations" => {
            p.n_list.get_or_insert_with(|| vec![256, 1024, 4096, 16384]);
            p.reps.get_or_insert(50_000);
        }
        "diversification" => {
            p.n_list.get_or_insert_with(|| powers_of_two(6, 14));
            p.reps.get_or_insert(200_000);
        }
        "correlation" => {
            p.n_list.get_or_insert_with(|| powers_of_two(4, 14));
            p.reps.get_or_insert(100_000);
        }
        _ => {}
    }
    if command != "schedule" {
        p.seed.get_or_insert(DEFAULT_SEED);
    }
    Ok(p)
}

fn build_family(p: &Params) -> anyhow::Result<SeverityFamily> {
    let rho = p.rho.expect("defaulted");
    match p.family.as_deref() {
        Some("gaussian") => {
            if rho != 2.0 {
                return Err(invalid(format!("the gaussian family has rho = 2, got --rho {rho}")));
            }
            if p.c.is_some() {
                return Err(invalid("--c applies to the weibull family only"));
            }
            Ok(SeverityFamily::Gaussian)
        }
        Some("weibull") => Ok(SeverityFamily::weibull(rho, p.c.expect("defaulted"))?),
        other => Err(invalid(format!("unknown family {other:?}; expected gaussian or weibull"))),
    }
}

fn build_spec(p: &Params) -> anyhow::Result<ModelSpec> {
    let mode = match p.schedule.as_deref() {
        Some("asymptotic") => ScheduleMode::Asymptotic,
        Some("exact-lognormal") => ScheduleMode::ExactLognormal,
        Some("exact-normalized") => ScheduleMode::ExactNormalized,
        other => {
            return Err(invalid(format!(
                "unknown schedule {other:?}; expected asymptotic, exact-lognormal or exact-normalized"
            )))
        }
    };
    let family = build_family(p)?;
    let mut schedule = Schedule::new(
        mode,
        family,
        p.lambda.expect("defaulted"),
        p.a.expect("defaulted"),
        p.b.expect("defaulted"),
        p.c0.expect("defaulted"),
    )?;
    if let Some(t) = p.t_fixed {
        schedule = schedule.with_fixed_t(t)?;
    }
    Ok(ModelSpec::new(schedule, p.q.expect("defaulted"))?)
}

fn check_cells(spec: &ModelSpec, n_list: &[u64], min: u64) -> anyhow::Result<()> {
    if n_list.is_empty() {
        return Err(invalid("--n-list is empty"));
    }
    for &n in n_list {
        if n < min {
            return Err(invalid(format!("cell count {n} must be at least {min}")));
        }
        spec.schedule().evaluate(n as f64)?;
    }
    Ok(())
}

fn check_reps(p: &Params) -> anyhow::Result<usize> {
    let reps = p.reps.expect("defaulted");
    if reps < MIN_REPS {
        return Err(invalid(format!("--reps must be at least {MIN_REPS}, got {reps}")));
    }
    Ok(reps)
}

fn engine(p: &Params) -> anyhow::Result<Engine> {
    let workers = match p.workers {
        Some(w) => w,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    if workers == 0 {
        return Err(invalid("--workers must be at least 1"));
    }
    Ok(Engine::new(workers)?)
}

enum Format {
    Csv,
    Json,
}

fn output_format(p: &Params) -> anyhow::Result<Format> {
    match p.format.as_deref() {
        Some("csv") => Ok(Format::Csv),
        Some("json") => Ok(Format::Json),
        Some(other) => Err(invalid(format!("unknown format {other:?}; expected csv or json"))),
        None => Ok(match &p.output {
            Some(path) if path.extension().is_some_and(|e| e == "json") => Format::Json,
            _ => Format::Csv,
        }),
    }
}

fn run(command: Command) -> anyhow::Result<()> {
    let (name, params) = command.split();
    let params = with_defaults(name, params.merge_config_file(name)?)?;
    let format = output_format(&params)?;
    let start = Instant::now();
    let (table, note) = match name {
        "phase-diagram" => (phase_diagram(&params)?, None),
        "schedule" => (schedule_table(&params)?, None),
        "simulate" => (simulate(&params)?, None),
        "fluctuations" => (fluctuations(&params)?, None),
        "diversification" => diversification(&params)?,
        "correlation" => (correlation(&params)?, None),
        _ => unreachable!("clap restricts commands"),
    };
    let elapsed = start.elapsed().as_secs_f64();
    write_table(&table, &params, format)?;
    let mut summary = format!("{name}: {} rows in {elapsed:.3} s", table.rows.len());
    if let Some(seed) = params.seed {
        summary.push_str(&format!(", seed {seed}"));
    }
    if let Some(note) = note {
        summary.push_str(&format!(", {note}"));
    }
    if params.output.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    Ok(())
}

fn write_table(table: &Table, params: &Params, format: Format) -> anyhow::Result<()> {
    let sink: Box<dyn Write> = match &params.output {
        Some(path) => Box::new(create(path)?),
        None => Box::new(io::stdout().lock()),
    };
    let mut sink = BufWriter::new(sink);
    match format {
        Format::Csv => table.write_csv(&mut sink)?,
        Format::Json => {
            let doc = json!({
                "config": params,
                "rows": table.json_rows(),
                "seed": params.seed,
                "version": env!("CARGO_PKG_VERSION"),
            });
            serde_json::to_writer_pretty(&mut sink, &doc)?;
            sink.write_all(b"\n")?;
        }
    }
    sink.flush()?;
    Ok(())
}

fn create(path: &Path) -> anyhow::Result<File> {
    File::create(path).with_context(|| format!("cannot create {}", path.display()))
}

fn phase_diagram(p: &Params) -> anyhow::Result<Table> {
    let form = if p.exponent_printed_forms {
        ExponentForm::Printed
    } else {
        ExponentForm::Derived
    };
    let rows = phase_grid(
        p.rho_min.expect("defaulted"),
        p.rho_max.expect("defaulted"),
        p.steps.expect("defaulted"),
        form,
    )?;
    let mut t = Table::new(&["rho", "lambda_A", "lambda_C", "lambda_B", "lambda_D"]);
    for r in rows {
        t.push(vec![r.rho.into(), r.lambda_a.into(), r.lambda_c.into(), r.lambda_b.into(), r.lambda_d.into()]);
    }
    Ok(t)
}

fn schedule_table(p: &Params) -> anyhow::Result<Table> {
    let spec = build_spec(p)?;
    let n_list = p.n_list.clone().expect("defaulted");
    check_cells(&spec, &n_list, 1)?;
    let mut t = Table::new(&["N", "mu_N", "t_N", "rho_N"]);
    for n in n_list {
        let v = spec.schedule().evaluate(n as f64)?;
        t.push(vec![n.into(), v.mu.into(), v.t.into(), v.rho.into()]);
    }
    Ok(t)
}

fn simulate(p: &Params) -> anyhow::Result<Table> {
    let spec = build_spec(p)?;
    let n = p.n.expect("defaulted");
    check_cells(&spec, &[n], 1)?;
    let reps = check_reps(p)?;
    let mut levels = p.levels.clone().expect("defaulted");
    levels.sort_by(f64::total_cmp);
    for &q in &levels {
        if !(q > 0.0 && q < 1.0) {
            return Err(invalid(format!("quantile level {q} outside (0, 1)")));
        }
    }
    let est = engine(p)?.simulate_bank_loss(&spec, n, reps, p.seed.expect("defaulted"), &levels)?;
    let mut header: Vec<String> = ["N", "n_reps", "mean", "mean_se", "variance", "variance_se", "flagged"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut row: Vec<Cell> = vec![
        est.n.into(),
        est.n_reps.into(),
        est.mean.into(),
        est.mean_se.into(),
        est.variance.into(),
        est.variance_se.into(),
        est.flagged.into(),
    ];
    for q in &est.quantiles {
        header.push(format!("q{}", q.level));
        header.push(format!("q{}_se", q.level));
        row.push(q.value.into());
        row.push(q.se.into());
    }
    let mut t = Table {
        header,
        rows: Vec::new(),
    };
    t.push(row);
    Ok(t)
}

fn fluctuations(p: &Params) -> anyhow::Result<Table> {
    let spec = build_spec(p)?;
    let n_list = p.n_list.clone().expect("defaulted");
    check_cells(&spec, &n_list, 2)?;
    let reps = check_reps(p)?;
    let rows = engine(p)?.fluctuation_study(&spec, &n_list, reps, p.seed.expect("defaulted"))?;
    let mut t = Table::new(&["N", "eps_var_mc", "eps_var_analytic", "ks_stable", "ks_normal", "gamma_fit", "delta_fit"]);
    for r in rows {
        t.push(vec![
            r.n.into(),
            r.eps_var_mc.into(),
            r.eps_var_analytic.into(),
            r.ks_stable.into(),
            r.ks_normal.into(),
            r.gamma_fit.into(),
            r.delta_fit.into(),
        ]);
    }
    Ok(t)
}

fn diversification(p: &Params) -> anyhow::Result<(Table, Option<String>)> {
    let spec = build_spec(p)?;
    let n_list = p.n_list.clone().expect("defaulted");
    check_cells(&spec, &n_list, 1)?;
    let reps = check_reps(p)?;
    let q = spec.q();
    if !(q > 0.5 && q < 1.0) {
        return Err(invalid(format!("--q must lie in (0.5, 1), got {q}")));
    }
    let rows = engine(p)?.dr_study(&spec, &n_list, reps, p.seed.expect("defaulted"))?;
    let mut t = Table::new(&[
        "N",
        "var_bank_mc",
        "var_bank_se",
        "sum_cell_var_analytic",
        "dr_mc",
        "dr_se",
        "dr_eq15_derived",
        "dr_eq15_printed",
    ]);
    for r in &rows {
        t.push(vec![
            r.n.into(),
            r.var_bank_mc.into(),
            r.var_bank_se.into(),
            r.sum_cell_var_analytic.into(),
            r.dr_mc.into(),
            r.dr_se.into(),
            r.dr_eq15_derived.into(),
            r.dr_eq15_printed.into(),
        ]);
    }
    let note = rows.last().and_then(|r| {
        let (value, label) = if p.eq15_printed_sign {
            (r.dr_eq15_printed, "printed")
        } else {
            (r.dr_eq15_derived, "derived")
        };
        value.map(|v| format!("asymptotic ratio at N = {} is {v} ({label} sign)", r.n))
    });
    Ok((t, note))
}

fn correlation(p: &Params) -> anyhow::Result<Table> {
    let spec = build_spec(p)?;
    if !spec.family().is_gaussian() {
        return Err(invalid("the correlation study needs --family gaussian"));
    }
    let n_list = p.n_list.clone().expect("defaulted");
    check_cells(&spec, &n_list, 2)?;
    let reps = check_reps(p)?;
    let rows = engine(p)?.correlation_study(&spec, &n_list, reps, p.seed.expect("defaulted"))?;
    let mut t = Table::new(&["N", "rho_N", "corr_mc", "corr_se", "corr_closed_form", "bank_mean", "bank_var"]);
    for r in rows {
        t.push(vec![
            r.n.into(),
            r.rho_n.into(),
            r.corr_mc.into(),
            r.corr_se.into(),
            r.corr_closed_form.into(),
            r.bank_mean.into(),
            r.bank_var.into(),
        ]);
    }
    Ok(t)
}
