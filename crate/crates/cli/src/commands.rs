use std::time::Instant;

use anyhow::{bail, Context, Result};
use ehmac::battery::simulate_trajectory;
use ehmac::gaussmi::{epi_lower_bound, sum_uniform_awgn_mi};
use ehmac::policies::{check_admissibility, exact_output_entropy};
use ehmac::regions::{
    awgn_outer, gap_report, inner_tx, inner_txrx, region_contains, shifted_region,
    FIXED_FRACTION_GAP, STRUCTURE_TOLERANCE,
};
use ehmac::throughput::{
    exact_throughput, mc_throughput, subset_mask, throughput_set_function, Estimator,
};
use ehmac::verify::{acceptance_suite, SUITE_SEED};
use ehmac::{Error, Method, RateRegion};
use serde_json::{json, Value};

use crate::output::{Csv, Sink};
use crate::scenario::{self, Loaded, RegionKind};
use crate::{Cli, Command, GlobalOpts, InvariantFailure};

const MI_SLACK: f64 = ehmac::gaussmi::MI_TOLERANCE_BITS;

pub fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    if let Some(w) = g.workers {
        if w == 0 {
            bail!("--workers must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let start = Instant::now();
    let (name, outcome) = match &cli.command {
        Command::Simulate { n } => ("simulate", simulate(g, *n)?),
        Command::Throughput {
            subset,
            n,
            method,
            paths,
        } => (
            "throughput",
            throughput(g, subset.as_deref(), n.as_deref(), *method, *paths)?,
        ),
        Command::Region {
            kind,
            n,
            gamma,
            method,
            paths,
        } => ("region", region(g, *kind, *n, *gamma, *method, *paths)?),
        Command::GapSweep {
            gamma,
            mean_e,
            users,
        } => ("gap_sweep", gap_sweep(*gamma, *mean_e, users)?),
        Command::MiCheck { powers, users } => ("mi_check", mi_check(powers, *users)?),
        Command::Entropy { n } => ("entropy", entropy(g, n.as_deref())?),
        Command::Verify { scenario_only } => ("verify", verify(g, *scenario_only)?),
    };
    let meta = json!({
        "tool": "ehmac",
        "version": env!("CARGO_PKG_VERSION"),
        "command": name,
        "scenario": outcome.scenario,
        "seed": outcome.seed,
        "workers": rayon::current_num_threads(),
        "rows": outcome.csv.rows(),
        "elapsed_ms": start.elapsed().as_secs_f64() * 1e3,
        "details": outcome.details,
    });
    Sink::resolve(g.out.as_deref(), name)?.write(&outcome.csv.into_string(), &meta)?;
    match outcome.violation {
        Some(msg) => Err(InvariantFailure(msg).into()),
        None => Ok(()),
    }
}

struct Outcome {
    csv: Csv,
    scenario: Option<String>,
    seed: Option<u64>,
    details: Value,
    violation: Option<String>,
}

impl Outcome {
    fn new(csv: Csv) -> Self {
        Outcome {
            csv,
            scenario: None,
            seed: None,
            details: Value::Null,
            violation: None,
        }
    }

    fn from_scenario(csv: Csv, loaded: &Loaded) -> Self {
        Outcome {
            scenario: Some(loaded.source.clone()),
            ..Outcome::new(csv)
        }
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn seed_for(g: &GlobalOpts, loaded: &Loaded) -> Result<u64> {
    g.seed.or(loaded.scenario.estimator.seed).context(
        "Monte Carlo and simulation runs need a seed: pass --seed or set `estimator.seed`",
    )
}

fn estimator_for(
    g: &GlobalOpts,
    loaded: &Loaded,
    method: Option<Method>,
    paths: Option<usize>,
) -> Result<Estimator> {
    let method = method.unwrap_or(loaded.scenario.estimator.method);
    Ok(match method {
        Method::Exact => Estimator::exact(),
        Method::MonteCarlo => {
            let paths = paths.unwrap_or(loaded.scenario.estimator.paths);
            if paths < 2 {
                bail!("--paths must be at least 2");
            }
            Estimator::monte_carlo(paths, seed_for(g, loaded)?)
        }
    })
}

fn simulate(g: &GlobalOpts, n: Option<usize>) -> Result<Outcome> {
    let loaded = scenario::load(g.scenario.as_deref())?;
    let n = n.unwrap_or_else(|| loaded.first_horizon());
    let seed = seed_for(g, &loaded)?;
    let traj = simulate_trajectory(&loaded.model, &loaded.policies, n, seed)?;
    let mut buf = Vec::new();
    traj.write_csv(&mut buf)?;
    let text = String::from_utf8(buf).expect("csv is utf-8");
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
    let mut csv = Csv::new(&header);
    for line in lines {
        csv.row(&line.split(',').map(str::to_string).collect::<Vec<_>>());
    }
    let mut out = Outcome::from_scenario(csv, &loaded);
    out.seed = Some(seed);
    out.details = json!({ "n": n });
    Ok(out)
}

fn parse_subset(subset: Option<&[usize]>, users: usize) -> Result<Vec<usize>> {
    let Some(subset) = subset else {
        return Ok((0..users).collect());
    };
    let mut idx = Vec::with_capacity(subset.len());
    for &u in subset {
        if u == 0 || u > users {
            bail!("--subset entries must be in 1..={users}, got {u}");
        }
        if !idx.contains(&(u - 1)) {
            idx.push(u - 1);
        }
    }
    idx.sort_unstable();
    Ok(idx)
}

fn throughput(
    g: &GlobalOpts,
    subset: Option<&[usize]>,
    horizons: Option<&[usize]>,
    method: Option<Method>,
    paths: Option<usize>,
) -> Result<Outcome> {
    let loaded = scenario::load(g.scenario.as_deref())?;
    let users = parse_subset(subset, loaded.model.users())?;
    let mask = subset_mask(&users);
    let label = users
        .iter()
        .map(|u| (u + 1).to_string())
        .collect::<Vec<_>>()
        .join(";");
    let horizons = horizons.map_or_else(|| loaded.horizons(), <[usize]>::to_vec);
    let est = estimator_for(g, &loaded, method, paths)?;
    let mut csv = Csv::new(&["subset", "n", "method", "value", "half_width"]);
    for &n in &horizons {
        let r = match est.method {
            Method::Exact => exact_throughput(&loaded.policies, &loaded.model, mask, n)?,
            Method::MonteCarlo => mc_throughput(
                &loaded.policies,
                &loaded.model,
                mask,
                n,
                est.paths,
                est.seed,
            )?,
        };
        csv.row(&[
            label.clone(),
            n.to_string(),
            r.method.as_str().to_string(),
            num(r.value),
            num(r.half_width),
        ]);
    }
    let mut out = Outcome::from_scenario(csv, &loaded);
    if est.method == Method::MonteCarlo {
        out.seed = Some(est.seed);
        out.details = json!({ "paths": est.paths });
    }
    Ok(out)
}

fn region(
    g: &GlobalOpts,
    kind: Option<RegionKind>,
    n: Option<usize>,
    gamma: Option<f64>,
    method: Option<Method>,
    paths: Option<usize>,
) -> Result<Outcome> {
    let loaded = scenario::load(g.scenario.as_deref())?;
    let cfg = &loaded.scenario.region;
    let kind = kind.or(cfg.kind).unwrap_or(RegionKind::Outer);
    let n = n.or(cfg.n).unwrap_or_else(|| loaded.first_horizon());
    let means = loaded.model.means();
    let mut seed = None;
    let mut details = json!({ "kind": kind.as_str() });
    let throughput_fn = |seed: &mut Option<u64>| -> Result<ehmac::SetFunction> {
        let est = estimator_for(g, &loaded, method, paths)?;
        if est.method == Method::MonteCarlo {
            *seed = Some(est.seed);
        }
        Ok(throughput_set_function(&loaded.policies, &loaded.model, n, &est)?.values)
    };
    let region: RateRegion = match kind {
        RegionKind::Outer => awgn_outer(&means)?,
        RegionKind::Shifted => {
            let gamma = gamma.or(cfg.gamma).unwrap_or(FIXED_FRACTION_GAP);
            details["gamma"] = json!(gamma);
            shifted_region(&awgn_outer(&means)?, gamma)?
        }
        RegionKind::Throughput => RateRegion::new(throughput_fn(&mut seed)?),
        RegionKind::InnerTxrx => inner_txrx(&throughput_fn(&mut seed)?),
        RegionKind::InnerTx => {
            let f = throughput_fn(&mut seed)?;
            let h = exact_output_entropy(&loaded.policies, &loaded.model, n)?;
            details["entropy_rate"] = json!(h);
            inner_tx(&f, h)?
        }
    };
    if !matches!(kind, RegionKind::Outer | RegionKind::Shifted) {
        details["n"] = json!(n);
    }
    details["polymatroid"] = json!(region.is_polymatroid());
    details["clamped"] = json!(region.clamped());
    let mut csv = Csv::new(&["subset_mask", "bound_bits"]);
    for (mask, v) in region.set_function().values().iter().enumerate().skip(1) {
        csv.row(&[mask.to_string(), num(*v)]);
    }
    let mut out = Outcome::from_scenario(csv, &loaded);
    out.seed = seed;
    out.details = details;
    Ok(out)
}

/// Parses `a:b:geometric`, `a:b:linear`, `a:b:<step>` or `k1,k2,...`.
pub fn parse_user_counts(spec: &str) -> Result<Vec<usize>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let int = |s: &str| -> Result<usize> {
        s.trim()
            .parse::<usize>()
            .with_context(|| format!("bad user count `{s}` in `{spec}`"))
    };
    let counts = match parts.as_slice() {
        [list] => list.split(',').map(int).collect::<Result<Vec<_>>>()?,
        [a, b, mode] => {
            let (a, b) = (int(a)?, int(b)?);
            if a == 0 || b < a {
                bail!("range `{spec}` needs 1 <= a <= b");
            }
            match mode.trim() {
                "geometric" => std::iter::successors(Some(a), |&k| k.checked_mul(2))
                    .take_while(|&k| k <= b)
                    .collect(),
                "linear" => (a..=b).collect(),
                step => {
                    let s = int(step)?;
                    if s == 0 {
                        bail!("step must be positive in `{spec}`");
                    }
                    (a..=b).step_by(s).collect()
                }
            }
        }
        _ => bail!("user counts `{spec}`: expected `a:b:mode` or a comma list"),
    };
    if counts.is_empty() || counts.contains(&0) {
        bail!("user counts `{spec}` must be positive");
    }
    Ok(counts)
}

fn gap_sweep(gamma: f64, mean_e: f64, spec: &str) -> Result<Outcome> {
    let users = parse_user_counts(spec)?;
    let reports = gap_report(gamma, mean_e, &users)?;
    let mut csv = Csv::new(&["K", "upper", "lower", "relative"]);
    let mut violation = None;
    for (i, r) in reports.iter().enumerate() {
        csv.row(&[
            r.users.to_string(),
            num(r.upper),
            num(r.lower),
            num(r.relative_gap),
        ]);
        if i > 0 && r.users > reports[i - 1].users && r.relative_gap > reports[i - 1].relative_gap
        {
            violation = Some(format!("relative gap increased at K = {}", r.users));
        }
    }
    let mut out = Outcome::new(csv);
    out.details = json!({ "gamma": gamma, "meanE": mean_e });
    out.violation = violation;
    Ok(out)
}

fn mi_check(powers: &[f64], users: usize) -> Result<Outcome> {
    if users == 0 {
        bail!("--users must be at least 1");
    }
    let mut csv = Csv::new(&["P", "mi", "epi_floor", "gauss_ceiling"]);
    let mut violation = None;
    for &p in powers {
        if !(p > 0.0 && p.is_finite()) {
            bail!("powers must be positive and finite, got {p}");
        }
        let mi = sum_uniform_awgn_mi(&vec![p / users as f64; users])?;
        let floor = epi_lower_bound(p)?.loose;
        let ceiling = ehmac::half_log2_1p(p);
        csv.row(&[num(p), num(mi), num(floor), num(ceiling)]);
        if mi < floor - MI_SLACK || mi > ceiling + MI_SLACK {
            violation.get_or_insert(format!(
                "P = {p}: mi {mi} outside [{floor}, {ceiling}]"
            ));
        }
    }
    let mut out = Outcome::new(csv);
    out.details = json!({ "users": users });
    out.violation = violation;
    Ok(out)
}

fn entropy(g: &GlobalOpts, horizons: Option<&[usize]>) -> Result<Outcome> {
    let loaded = scenario::load(g.scenario.as_deref())?;
    let horizons = horizons.map_or_else(|| loaded.horizons(), <[usize]>::to_vec);
    let mut csv = Csv::new(&["n", "entropy_rate"]);
    for &n in &horizons {
        let h = exact_output_entropy(&loaded.policies, &loaded.model, n)?;
        csv.row(&[n.to_string(), num(h)]);
    }
    Ok(Outcome::from_scenario(csv, &loaded))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Pass,
    Fail,
    Skip,
}

impl Status {
    fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        }
    }
}

struct Row {
    id: String,
    name: &'static str,
    status: Status,
    detail: String,
}

fn row(id: &str, name: &'static str, result: Result<(bool, String)>) -> Row {
    let (status, detail) = match result {
        Ok((true, d)) => (Status::Pass, d),
        Ok((false, d)) => (Status::Fail, d),
        Err(e) => match e.downcast_ref::<Error>() {
            Some(Error::BudgetExceeded { .. }) => (Status::Skip, format!("{e}")),
            _ => (Status::Fail, format!("error: {e:#}")),
        },
    };
    Row {
        id: id.to_string(),
        name,
        status,
        detail,
    }
}

/// Re-raises an earlier failure for a check that depends on it.
fn upstream<T>(r: &std::result::Result<T, Error>) -> Result<&T> {
    r.as_ref().map_err(|e| match e {
        Error::BudgetExceeded { required, budget } => Error::BudgetExceeded {
            required: *required,
            budget: *budget,
        }
        .into(),
        other => anyhow::anyhow!("{other}"),
    })
}

fn scenario_checks(g: &GlobalOpts, loaded: &Loaded) -> Vec<Row> {
    let (policies, model) = (&loaded.policies, &loaded.model);
    let n = loaded.first_horizon();
    let mut rows = Vec::new();

    rows.push(row(
        "S1",
        "policies admissible",
        (|| -> Result<(bool, String)> {
            let mut bad = Vec::new();
            for (i, p) in policies.iter().enumerate() {
                if !check_admissibility(p, model, i, n)? {
                    bad.push(i + 1);
                }
            }
            Ok((bad.is_empty(), format!("n={n} overspending users {bad:?}")))
        })(),
    ));

    let tput = throughput_set_function(policies, model, n, &Estimator::exact()).map(|t| t.values);
    rows.push(row(
        "S2",
        "throughput is a polymatroid",
        upstream(&tput).map(|f| {
                let ok = f.is_monotone(STRUCTURE_TOLERANCE) && f.is_submodular(STRUCTURE_TOLERANCE);
                (ok, format!("n={n} K={}", f.users()))
            }),
    ));
    rows.push(row(
        "S3",
        "throughput inside AWGN outer",
        (|| -> Result<(bool, String)> {
            let f = upstream(&tput)?;
            let outer = awgn_outer(&model.means())?;
            let ok = region_contains(&RateRegion::new(f.clone()), &outer)?;
            Ok((ok, format!("n={n}")))
        })(),
    ));
    rows.push(row(
        "S4",
        "inner_tx inside inner_txrx",
        (|| -> Result<(bool, String)> {
            let f = upstream(&tput)?;
            let h = exact_output_entropy(policies, model, n)?;
            let ok = region_contains(&inner_tx(f, h)?, &inner_txrx(f))?;
            Ok((ok, format!("n={n} H/n={h:.4}")))
        })(),
    ));
    rows.push(row(
        "S5",
        "Monte Carlo agrees with exact",
        (|| -> Result<(bool, String)> {
            let full = (1usize << model.users()) - 1;
            let exact = exact_throughput(policies, model, full, n)?;
            let seed = g
                .seed
                .or(loaded.scenario.estimator.seed)
                .unwrap_or(SUITE_SEED);
            let paths = loaded.scenario.estimator.paths;
            let mc = mc_throughput(policies, model, full, n, paths, seed)?;
            let diff = (mc.value - exact.value).abs();
            let allowed = 3.0 * mc.standard_error() + 1e-9;
            Ok((
                diff <= allowed,
                format!("|diff|={diff:.2e} allowed={allowed:.2e} paths={paths}"),
            ))
        })(),
    ));
    rows
}

fn verify(g: &GlobalOpts, scenario_only: bool) -> Result<Outcome> {
    let loaded = scenario::load(g.scenario.as_deref())?;
    let mut rows = Vec::new();
    if !scenario_only {
        for c in acceptance_suite() {
            rows.push(Row {
                id: format!("A{}", c.id),
                name: c.name,
                status: if c.passed { Status::Pass } else { Status::Fail },
                detail: c.detail,
            });
        }
    }
    rows.extend(scenario_checks(g, &loaded));

    let mut csv = Csv::new(&["id", "name", "status", "detail"]);
    for r in &rows {
        eprintln!("[{}] {:<4} {:<34} {}", r.status.as_str(), r.id, r.name, r.detail);
        csv.row(&[
            r.id.clone(),
            r.name.to_string(),
            r.status.as_str().to_string(),
            format!("\"{}\"", r.detail.replace('"', "\"\"")),
        ]);
    }
    let failed: Vec<&str> = rows
        .iter()
        .filter(|r| r.status == Status::Fail)
        .map(|r| r.id.as_str())
        .collect();
    let mut out = Outcome::from_scenario(csv, &loaded);
    out.details = json!({
        "passed": rows.iter().filter(|r| r.status == Status::Pass).count(),
        "failed": failed.len(),
        "skipped": rows.iter().filter(|r| r.status == Status::Skip).count(),
    });
    if !failed.is_empty() {
        out.violation = Some(format!("failed checks: {}", failed.join(", ")));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn user_count_specs() {
        assert_eq!(parse_user_counts("1:16:geometric").unwrap(), vec![1, 2, 4, 8, 16]);
        assert_eq!(parse_user_counts("3:10:geometric").unwrap(), vec![3, 6]);
        assert_eq!(parse_user_counts("2:5:linear").unwrap(), vec![2, 3, 4, 5]);
        assert_eq!(parse_user_counts("1:10:4").unwrap(), vec![1, 5, 9]);
        assert_eq!(parse_user_counts("1,3,7").unwrap(), vec![1, 3, 7]);
        for bad in ["0:4:linear", "5:2:linear", "1:4:0", "1,0", "x", "1:2"] {
            assert!(parse_user_counts(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn subsets_are_one_based() {
        assert_eq!(parse_subset(Some(&[3, 1, 3]), 3).unwrap(), vec![0, 2]);
        assert_eq!(parse_subset(None, 2).unwrap(), vec![0, 1]);
        assert!(parse_subset(Some(&[0]), 2).is_err());
        assert!(parse_subset(Some(&[3]), 2).is_err());
    }
}
