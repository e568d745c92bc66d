use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use num_rational::BigRational;
use permswap::budget::census::{census_report, SwapStrata, ZcdpConstants, COUNTERFACTUAL_RATES};
use permswap::budget::{min_budget, psa_budget, LowerBound};
use permswap::data::{max_stratum_b, write_csv, ContingencyTable, Dataset};
use permswap::psa::{run_psa_detailed, PsaParams};
use permswap::rational::{parse_rational, to_f64};
use permswap::synth::{role_config_for, synthesize, SynthSpec};
use permswap::utility::{utility_experiment_on, write_long_csv, UtilityMetadata, UtilitySummary};
use permswap::verify::{
    applicable_lower_bounds, enumerate_universe, exhaustive_sweep, verify_universe, SweepConfig,
    VERDICT_TOLERANCE,
};
use permswap::Epsilon;
use serde_json::{json, Value};

use crate::config::{check_rate, missing, Resolver};
use crate::output::{fix_json, sink, to_json, write_json, Cell, Format, Table};
use crate::{BudgetArgs, Cli, Command, CurveArgs, SwapArgs, SynthArgs, TdaArgs, UtilityArgs, VerifyArgs};

/// Output was written but at least one check failed.
#[derive(Debug)]
pub struct VerificationFailed(pub String);

impl fmt::Display for VerificationFailed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "verification failed: {}", self.0)
    }
}

impl std::error::Error for VerificationFailed {}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = Resolver::new(cli.config.as_deref())?;
    match cli.command {
        Command::Swap(a) => swap(&cfg, a),
        Command::Budget(a) => budget(&cfg, a),
        Command::Curve(a) => curve(&cfg, a),
        Command::Verify(a) => verify(&cfg, a),
        Command::TdaReport(a) => tda_report(&cfg, a),
        Command::Synth(a) => synth(&cfg, a),
        Command::Utility(a) => utility(&cfg, a),
    }
}

struct Labels {
    m: Vec<String>,
    h: Vec<String>,
    s: Vec<String>,
}

impl Labels {
    fn of(x: &Dataset) -> Self {
        let d = x.domain();
        let index = |n: usize| (0..n).map(|i| i.to_string()).collect::<Vec<_>>();
        match x.schema() {
            Some(s) => Labels {
                m: s.match_labels.clone(),
                h: s.hold_labels.clone(),
                s: s.swap_labels.clone(),
            },
            None => Labels {
                m: index(d.match_levels),
                h: index(d.hold_levels),
                s: index(d.swap_levels),
            },
        }
    }
}

fn cell_table(t: &ContingencyTable, l: &Labels) -> Table {
    let d = t.domain();
    let mut out = Table::new(&["match", "hold", "swap", "count"]);
    for m in 0..d.match_levels {
        for h in 0..d.hold_levels {
            for s in 0..d.swap_levels {
                out.push(vec![
                    l.m[m].as_str().into(),
                    l.h[h].as_str().into(),
                    l.s[s].as_str().into(),
                    t.get(m, h, s).into(),
                ]);
            }
        }
    }
    out
}

fn margins(t: &ContingencyTable, l: &Labels) -> Value {
    let inv = t.invariants();
    let d = t.domain();
    let mut mh = Vec::new();
    let mut ms = Vec::new();
    for m in 0..d.match_levels {
        for h in 0..d.hold_levels {
            mh.push(json!({"match": l.m[m], "hold": l.h[h], "count": inv.mh(m, h)}));
        }
        for s in 0..d.swap_levels {
            ms.push(json!({"match": l.m[m], "swap": l.s[s], "count": inv.ms(m, s)}));
        }
    }
    json!({"match_hold": mh, "match_swap": ms})
}

fn sidecar_path(a: &SwapArgs) -> Option<PathBuf> {
    a.sidecar.clone().or_else(|| {
        a.out.output.as_ref().map(|o| {
            let mut s = o.as_os_str().to_owned();
            s.push(".sidecar.json");
            PathBuf::from(s)
        })
    })
}

fn swap(cfg: &Resolver, a: SwapArgs) -> Result<()> {
    let x = cfg.dataset(a.data.input.as_ref(), a.data.roles.as_ref())?;
    let p = cfg.p(a.p)?.ok_or_else(|| missing("p"))?;
    let seed = cfg.seed(a.seed)?;
    let out = run_psa_detailed(&x, &PsaParams::new(p, seed)?);
    let labels = Labels::of(&x);
    let table = cell_table(&out.table, &labels);
    table.emit(cfg.format(a.out.format), a.out.output.as_deref(), None)?;

    if let Some(path) = &a.records {
        let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        write_csv(&out.swapped, io::BufWriter::new(f))?;
    }

    let b = max_stratum_b(&x);
    let budget = psa_budget(p, b)?;
    let d = &out.diagnostics;
    let report = fix_json(json!({
        "p": p,
        "seed": seed,
        "records": d.records,
        "b": b,
        "epsilon": budget.epsilon,
        "regime": budget.regime.to_string(),
        "selected": d.selected,
        "changed": d.changed,
        "selection_rate": d.selection_rate(),
        "effective_rate": d.effective_rate(),
        "selection_retries": d.selection_retries,
        "derangement_rejections": d.derangement_rejections,
        "c_swap": margins(&out.table, &labels),
    }));
    match sidecar_path(&a) {
        Some(path) => write_json(sink(Some(&path))?, &report),
        None => write_json(io::stderr().lock(), &report),
    }
}

fn read_strata(path: Option<&Path>) -> Result<SwapStrata> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            SwapStrata::parse(&text).with_context(|| format!("strata file {}", p.display()))
        }
        None => Ok(SwapStrata::builtin()),
    }
}

fn budget(cfg: &Resolver, a: BudgetArgs) -> Result<()> {
    let rates: Vec<f64> = if a.p.is_empty() {
        cfg.p(None)?.into_iter().collect()
    } else {
        a.p.iter().map(|&p| check_rate("p", p)).collect::<Result<_>>()?
    };
    let format = cfg.format(a.out.format);

    if a.table5 {
        let strata = read_strata(a.strata.as_deref())?;
        let rates = if a.p.is_empty() { COUNTERFACTUAL_RATES.to_vec() } else { rates };
        let mut t = Table::new(&["match_var", "swap_var", "largest_stratum", "b", "p", "epsilon", "regime"]);
        for row in &strata.rows {
            for &p in &rates {
                let r = psa_budget(p, row.b)?;
                t.push(vec![
                    row.match_var.as_str().into(),
                    row.swap_var.as_str().into(),
                    row.largest_stratum.as_str().into(),
                    row.b.into(),
                    p.into(),
                    r.epsilon.into(),
                    r.regime.to_string().into(),
                ]);
            }
        }
        return t.emit(format, a.out.output.as_deref(), None);
    }

    let bs = if !a.b.is_empty() {
        a.b.clone()
    } else if cfg.input(a.data.input.as_ref()).is_some() {
        vec![max_stratum_b(&cfg.dataset(a.data.input.as_ref(), a.data.roles.as_ref())?)]
    } else {
        return Err(anyhow!("missing required value `b`: pass --b, --input or --table5"));
    };
    if rates.is_empty() {
        return Err(missing("p"));
    }
    let mut t = Table::new(&["b", "p", "epsilon", "regime"]);
    for &b in &bs {
        for &p in &rates {
            let r = psa_budget(p, b)?;
            t.push(vec![b.into(), p.into(), r.epsilon.into(), r.regime.to_string().into()]);
        }
    }
    t.emit(format, a.out.output.as_deref(), None)
}

fn curve(cfg: &Resolver, a: CurveArgs) -> Result<()> {
    let rates: Vec<f64> = if a.p.is_empty() {
        if a.grid == 0 {
            bail!("invalid value for `grid`: needs at least one rate");
        }
        (1..=a.grid).map(|k| k as f64 / (a.grid + 1) as f64).collect()
    } else {
        let mut r = a.p.iter().map(|&p| check_rate("p", p)).collect::<Result<Vec<_>>>()?;
        r.sort_by(f64::total_cmp);
        r.dedup();
        r
    };
    let bs: BTreeSet<u64> = a.b.iter().copied().collect();
    let mut t = Table::new(&["b", "p", "epsilon", "point"]);
    for &b in &bs {
        let (eps, p_min) = min_budget(b).map_err(|e| anyhow!("invalid value for `b`: {e}"))?;
        for &p in &rates {
            t.push(vec![b.into(), p.into(), psa_budget(p, b)?.epsilon.into(), "curve".into()]);
        }
        t.push(vec![b.into(), p_min.into(), eps.into(), "minimum".into()]);
    }
    t.emit(cfg.format(a.out.format), a.out.output.as_deref(), None)
}

const FIXTURE_RATES: &str = "0,1/10,1/4,1/2,3/4,9/10,1";
const SWEEP_RATES: &str = "1/10,3/10,1/2,7/10,9/10";

fn exact_rates(given: &[String], default: &str) -> Result<Vec<(String, BigRational)>> {
    let texts: Vec<String> = if given.is_empty() {
        default.split(',').map(String::from).collect()
    } else {
        given.to_vec()
    };
    texts
        .into_iter()
        .map(|t| {
            let q = parse_rational(&t).map_err(|e| anyhow!("invalid value for `p`: {e}"))?;
            check_rate("p", to_f64(&q))?;
            Ok((t, q))
        })
        .collect()
}

/// Strongest bound witnessed by any member of the universe.
fn strongest_bound(universe: &BTreeSet<ContingencyTable>, p: &BigRational) -> Option<LowerBound> {
    universe
        .iter()
        .flat_map(|t| applicable_lower_bounds(t, universe.len(), p))
        .max_by(|a, b| a.value.value().total_cmp(&b.value.value()))
}

fn at_most(a: Epsilon, b: Epsilon) -> bool {
    b.is_infinite() || (!a.is_infinite() && a.value() <= b.value() + VERDICT_TOLERANCE)
}

fn verify(cfg: &Resolver, a: VerifyArgs) -> Result<()> {
    if a.exhaustive {
        return sweep(cfg, a);
    }
    let x = cfg
        .dataset(a.data.input.as_ref(), a.data.roles.as_ref())
        .context("verify needs --input or --exhaustive")?;
    let universe = enumerate_universe(&x)?;
    let b = max_stratum_b(&x);
    let mut t = Table::new(&[
        "p",
        "universe_size",
        "b",
        "budget",
        "measured_optimal",
        "lower_bound",
        "lower_bound_kind",
        "expected_infinite",
        "pairs",
        "failing_pairs",
        "pass",
    ]);
    let mut details = Vec::new();
    let mut failures = 0;
    for (text, p) in exact_rates(&a.p, FIXTURE_RATES)? {
        let budget = match a.budget {
            Some(e) if e.is_infinite() => Epsilon::INFINITY,
            Some(e) if e >= 0.0 => Epsilon::finite(e),
            Some(e) => bail!("invalid value for `budget`: must be >= 0, got {e}"),
            None => psa_budget(to_f64(&p), b)?.epsilon,
        };
        let uv = verify_universe(&universe, &p, budget)?;
        let measured = uv.optimal.epsilon;
        let bound = strongest_bound(&universe, &p);
        let bound_ok = bound.as_ref().is_none_or(|l| at_most(l.value, measured));
        let failing = uv.verdicts.iter().filter(|v| !v.pass).count();
        let pass = failing == 0 && bound_ok && at_most(measured, budget);
        let expected_infinite = budget.is_infinite() || bound.as_ref().is_some_and(|l| l.value.is_infinite());
        failures += usize::from(!pass);
        t.push(vec![
            text.as_str().into(),
            universe.len().into(),
            b.into(),
            budget.into(),
            measured.into(),
            bound.as_ref().map(|l| l.value).into(),
            bound.as_ref().map(|l| format!("{:?}", l.kind)).into(),
            expected_infinite.into(),
            uv.verdicts.len().into(),
            failing.into(),
            pass.into(),
        ]);
        let pairs: Vec<Value> = uv
            .verdicts
            .iter()
            .map(|v| {
                json!({
                    "x": v.witness.x.to_string(),
                    "x_prime": v.witness.x_prime.to_string(),
                    "hamming": v.distance.finite(),
                    "measured": v.measured,
                    "bound": v.bound,
                    "witness_output": v.witness.output.to_string(),
                    "events_consistent": v.events_consistent,
                    "pass": v.pass,
                })
            })
            .collect();
        details.push(json!({ "pairs": pairs }));
    }
    let mut rows = t.json();
    if let Value::Array(rows) = &mut rows {
        for (row, extra) in rows.iter_mut().zip(details) {
            if let (Value::Object(r), Value::Object(e)) = (row, extra) {
                r.extend(e);
            }
        }
    }
    t.emit(cfg.format(a.out.format), a.out.output.as_deref(), Some(fix_json(rows)))?;
    if failures > 0 {
        return Err(VerificationFailed(format!("{failures} swap rate(s) failed")).into());
    }
    Ok(())
}

fn sweep(cfg: &Resolver, a: VerifyArgs) -> Result<()> {
    let &[m, h, s] = a.domain.as_slice() else {
        bail!("invalid value for `domain`: expected three level counts, got {}", a.domain.len());
    };
    let domain = permswap::data::Domain::new(m, h, s);
    let rates = exact_rates(&a.p, SWEEP_RATES)?.into_iter().map(|(_, q)| q).collect();
    let report = exhaustive_sweep(&SweepConfig {
        domain,
        max_records: a.max_records,
        rates,
        check_connecting: true,
    })?;
    let mut t = Table::new(&["metric", "value"]);
    let metrics: [(&str, Cell); 8] = [
        ("datasets", report.datasets.into()),
        ("universes", report.universes.into()),
        ("ordered_pairs", report.ordered_pairs.into()),
        ("dp_checks", report.dp_checks.into()),
        ("lower_bound_checks", report.lower_bound_checks.into()),
        ("connecting_checks", report.connecting_checks.into()),
        ("max_bound_ratio", report.max_bound_ratio.into()),
        ("failures", report.failures.len().into()),
    ];
    for (k, v) in metrics {
        t.push(vec![k.into(), v]);
    }
    for f in &report.failures {
        t.push(vec![format!("failure:{}", f.check).into(), format!("x={} p={} {}", f.x, f.p, f.detail).into()]);
    }
    t.emit(cfg.format(a.out.format), a.out.output.as_deref(), Some(to_json(&report)))?;
    if !report.passed() {
        return Err(VerificationFailed(format!("{} sweep check(s) failed", report.failures.len())).into());
    }
    Ok(())
}

fn tda_report(cfg: &Resolver, a: TdaArgs) -> Result<()> {
    let constants = match &a.constants {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            ZcdpConstants::parse(&text).with_context(|| format!("constants file {}", p.display()))?
        }
        None => ZcdpConstants::builtin(),
    };
    let strata = read_strata(a.strata.as_deref())?;
    let report = census_report(&constants, &strata)?;
    let mut t = Table::new(&[
        "section",
        "key",
        "label",
        "rho_squared",
        "epsilon",
        "published_epsilon",
        "b",
        "p",
        "note",
    ]);
    for r in &report.products {
        t.push(vec![
            "product".into(),
            r.key.as_str().into(),
            format!("{} / {} / {}", r.product, r.mechanism, r.resolution).into(),
            r.rho_squared.into(),
            r.epsilon.into(),
            r.published_epsilon.into(),
            Cell::Empty,
            Cell::Empty,
            r.note.clone().into(),
        ]);
    }
    for c in &report.composites {
        t.push(vec![
            "composite".into(),
            Cell::Empty,
            c.label.as_str().into(),
            c.rho_squared.into(),
            c.epsilon.into(),
            Cell::Empty,
            Cell::Empty,
            Cell::Empty,
            Cell::Empty,
        ]);
    }
    for r in &report.psa {
        for &(p, eps) in &r.budgets {
            t.push(vec![
                "swapping".into(),
                format!("{} x {}", r.match_var, r.swap_var).into(),
                r.largest_stratum.as_str().into(),
                Cell::Empty,
                eps.into(),
                Cell::Empty,
                r.b.into(),
                p.into(),
                Cell::Empty,
            ]);
        }
    }
    t.emit(cfg.format(a.out.format), a.out.output.as_deref(), Some(to_json(&report)))
}

fn synth(cfg: &Resolver, a: SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        strata: a.strata,
        hold_levels: a.hold,
        swap_levels: a.swap_levels,
        seed: cfg.seed(a.seed)?,
    };
    let x = synthesize(&spec)?;
    let mut w = sink(a.output.as_deref())?;
    write_csv(&x, &mut w)?;
    w.flush()?;
    if let Some(path) = &a.roles_out {
        fs::write(path, role_config_for(spec.domain()).to_toml())
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn utility(cfg: &Resolver, a: UtilityArgs) -> Result<()> {
    let x = cfg.dataset(a.data.input.as_ref(), a.data.roles.as_ref())?;
    let seed = cfg.seed(a.seed)?;
    for &p in &a.rates {
        check_rate("rates", p)?;
    }
    let axis = a.axis.into();
    let reports = utility_experiment_on(&x, &a.rates, a.reps, seed, axis)?;
    let summary = to_json(&UtilitySummary {
        metadata: UtilityMetadata::new(axis, seed),
        reports: reports.clone(),
    });
    if let Some(path) = &a.summary {
        write_json(sink(Some(path))?, &summary)?;
    }
    let mut w = sink(a.out.output.as_deref())?;
    match cfg.format(a.out.format) {
        Format::Csv => write_long_csv(&reports, &mut w)?,
        Format::Json => write_json(&mut w, &summary)?,
    }
    w.flush()?;
    Ok(())
}
