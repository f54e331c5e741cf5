use std::path::{Path, PathBuf};
use std::time::Instant;

use potapprox::diagnostics::{self, RateEstimate, RateOptions};
use potapprox::multistart::{self, BatchJob};
use potapprox::problems::{self, GroundTruth, SCHEMA};
use potapprox::report::{self, RunInfo, SolveResult};
use potapprox::solver::{self, Kappa, SolveStatus, SolverConfig, FEASIBILITY_TOL};
use potapprox::{rng, tensor, tns, DenseTensor, Error};
use serde::Serialize;
use serde_json::json;

use crate::{BenchArgs, GenerateArgs, RateArgs, SolveArgs, VerifyArgs};

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::ZeroTensor | Error::Initialization(_) => 3,
            _ => 2,
        };
        Self { code, message: e.to_string() }
    }
}

type Outcome = Result<(), Failure>;

fn emit(text: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Outcome {
    std::fs::write(path, text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Outcome {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::usage(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    serde_json::from_str(&read_text(path)?).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn read_tensor(path: &Path) -> Result<DenseTensor, Failure> {
    tns::read_file(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn with_extension(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

pub fn generate(args: &GenerateArgs) -> Outcome {
    let p = problems::plant(&args.dims, args.r, args.s, &args.sigmas, args.noise, args.seed)?;
    let tns_path = with_extension(&args.out, "tns");
    let json_path = with_extension(&args.out, "json");
    tns::write_file(&tns_path, &p.tensor).map_err(|e| Failure::usage(format!("{}: {e}", tns_path.display())))?;
    write_json(&json_path, &p.ground_truth())?;
    emit(&format!("wrote {} and {}", tns_path.display(), json_path.display()));
    Ok(())
}

fn solver_config(args: &SolveArgs) -> SolverConfig {
    SolverConfig {
        epsilon: args.epsilon,
        kappa: args.kappa.map_or(Kappa::Auto, Kappa::Fixed),
        max_sweeps: args.max_sweeps,
        stop_tol: args.stop_tol,
        seed: args.seed,
        record_inner: false,
        track_kkt: args.track_kkt,
    }
}

pub fn solve(args: &SolveArgs) -> Outcome {
    let a = read_tensor(&args.input)?;
    let cfg = solver_config(args);
    let m = multistart::solve_restarts(&a, args.r, args.s, &cfg, args.restarts as usize)?;
    let info = RunInfo {
        seed: args.seed,
        restarts: args.restarts as usize,
        best_restart: m.best_index,
        max_sweeps: args.max_sweeps,
    };
    let result = SolveResult::from_output(&a, &m.best, info)?;
    if let Some(path) = &args.log {
        write_text(path, &report::log_to_csv(&m.best.records, args.s, args.timing))?;
    }
    if let Some(path) = &args.result {
        write_json(path, &result)?;
    }
    emit(&format!(
        "status {} after {} sweeps, f = {:e}, relative residual {:e}, rank {}",
        match result.status {
            SolveStatus::Converged => "converged",
            SolveStatus::Cap => "cap",
        },
        result.sweeps,
        result.objective,
        result.relative_residual,
        result.active_rank
    ));
    Ok(())
}

#[derive(Serialize)]
struct BenchRun {
    index: usize,
    s: usize,
    status: Option<SolveStatus>,
    sweeps: usize,
    objective: f64,
    error: Option<String>,
}

pub fn bench(args: &BenchArgs) -> Outcome {
    if args.count == 0 {
        return Err(Failure::usage("--count must be positive"));
    }
    let len: usize = args.dims.iter().product();
    let jobs = (0..args.count)
        .map(|i| {
            let seed = rng::run_seed(args.seed, i);
            let data = rng::gaussian_vec(&mut rng::stream(seed, &[0x42]), len);
            Ok(BatchJob {
                tensor: DenseTensor::new(&args.dims, data)?,
                r: args.r,
                s: args.s,
                config: SolverConfig { max_sweeps: args.max_sweeps, seed, ..SolverConfig::default() },
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let started = Instant::now();
    let outs = if args.sequential { multistart::solve_batch_sequential(&jobs) } else { multistart::solve_batch(&jobs) };
    let total_ms = started.elapsed().as_secs_f64() * 1e3;
    let runs: Vec<BenchRun> = outs
        .into_iter()
        .enumerate()
        .map(|(index, o)| match o {
            Ok(o) => BenchRun {
                index,
                s: args.s,
                status: Some(o.status),
                sweeps: o.records.last().map_or(0, |r| r.sweep),
                objective: o.objective(),
                error: None,
            },
            Err(e) => BenchRun { index, s: args.s, status: None, sweeps: 0, objective: 0.0, error: Some(e.to_string()) },
        })
        .collect();
    let report = json!({
        "schema": SCHEMA,
        "mode": if args.sequential { "sequential" } else { "parallel" },
        "threads": if args.sequential { 1 } else { rayon::current_num_threads() },
        "dims": args.dims,
        "r": args.r,
        "count": args.count,
        "total_ms": total_ms,
        "runs": runs,
    });
    if let Some(path) = &args.out {
        write_json(path, &report)?;
    }
    emit(&format!("{} problems in {:.1} ms ({})", args.count, total_ms, report["mode"].as_str().unwrap_or("")));
    Ok(())
}

#[derive(Serialize)]
struct Check<T: Serialize> {
    passed: bool,
    #[serde(flatten)]
    detail: T,
}

pub fn verify(args: &VerifyArgs) -> Outcome {
    let a = read_tensor(&args.input)?;
    let mut records = report::parse_csv_log(&read_text(&args.log)?)?;
    let result: SolveResult = read_json(&args.result)?;
    if result.schema != SCHEMA {
        return Err(Failure::usage(format!("unsupported result schema {:?}", result.schema)));
    }
    if result.dims != a.dims() {
        return Err(Failure::usage(format!("result dims {:?} do not match tensor {:?}", result.dims, a.dims())));
    }
    let factors = result.factor_set()?;
    result.annotate(&mut records);
    let norm_a = tensor::hs_norm(&a);
    let last = records.last().expect("parsed logs are non-empty");

    let consistent = last.sweep == result.sweeps
        && last.active_rank == result.active_rank
        && (last.objective_f - result.objective).abs() <= 1e-10 * norm_a * norm_a;
    let increase = diagnostics::assert_sufficient_increase(&records, result.epsilon, result.kappa, norm_a);
    let monotone = diagnostics::assert_monotone_after_truncation(&records, norm_a);
    let budget = diagnostics::assert_truncation_budget(&records, result.initial_rank, result.kappa, norm_a);
    let kkt = diagnostics::kkt_residual(&a, &factors)?;
    let kkt_required = result.status == SolveStatus::Converged;
    let kkt_ok = !kkt_required || kkt.total <= args.kkt_tol * norm_a;
    let infeasibility = factors.feasibility_error();

    let mut checks = serde_json::Map::new();
    let mut passed = consistent && increase.passed && monotone.passed && budget.passed && kkt_ok;
    passed &= infeasibility <= FEASIBILITY_TOL;
    let mut put = |name: &str, v: serde_json::Value| {
        checks.insert(name.into(), v);
    };
    put(
        "log_matches_result",
        json!({"passed": consistent, "log_sweeps": last.sweep, "log_objective": last.objective_f, "result_objective": result.objective}),
    );
    put("sufficient_increase", serde_json::to_value(Check { passed: increase.passed, detail: summarize(&increase) }).unwrap());
    put("monotone_after_truncation", json!({"passed": monotone.passed, "last_truncation": monotone.last_truncation}));
    put("truncation_budget", serde_json::to_value(&budget).unwrap());
    put(
        "kkt",
        json!({"passed": kkt_ok, "required": kkt_required, "total": kkt.total, "bound": args.kkt_tol * norm_a}),
    );
    put("feasibility", json!({"passed": infeasibility <= FEASIBILITY_TOL, "error": infeasibility}));

    if !args.no_replay {
        let cfg = SolverConfig {
            epsilon: Some(result.epsilon),
            kappa: Kappa::Fixed(result.kappa),
            max_sweeps: result.max_sweeps,
            stop_tol: Some(result.stop_tol),
            seed: multistart::restart_seed(result.seed, result.best_restart),
            record_inner: true,
            track_kkt: records[0].kkt_residual.is_some(),
        };
        let (matches, chain) = match solver::solve(&a, result.r, result.s, &cfg) {
            Ok(out) => {
                let same = report::log_to_csv(&out.records, result.s, false) == report::log_to_csv(&records, result.s, false);
                (same, Some(diagnostics::assert_lambda_chain(&out.traces)))
            }
            Err(_) => (false, None),
        };
        let chain_ok = chain.as_ref().is_some_and(|c| c.passed);
        passed &= matches && chain_ok;
        put("replay", json!({"passed": matches}));
        put("lambda_chain", json!({"passed": chain_ok, "report": chain}));
    }

    let report = json!({"schema": SCHEMA, "passed": passed, "checks": checks});
    if let Some(path) = &args.out {
        write_json(path, &report)?;
    }
    emit(&serde_json::to_string_pretty(&report).unwrap());
    if passed {
        Ok(())
    } else {
        Err(Failure { code: 1, message: "verification failed".into() })
    }
}

#[derive(Serialize)]
struct IncreaseSummary {
    constant: f64,
    checked: usize,
    exempt: Vec<usize>,
    failed: Vec<usize>,
    worst_margin: Option<f64>,
}

fn summarize(r: &diagnostics::SweepReport) -> IncreaseSummary {
    use diagnostics::CheckStatus;
    let with = |s: CheckStatus| r.checks.iter().filter(|c| c.status == s).map(|c| c.sweep).collect::<Vec<_>>();
    IncreaseSummary {
        constant: r.constant,
        checked: r.checks.iter().filter(|c| c.status != CheckStatus::Exempt).count(),
        exempt: with(CheckStatus::Exempt),
        failed: with(CheckStatus::Fail),
        worst_margin: r.checks.iter().filter(|c| c.status != CheckStatus::Exempt).map(|c| c.margin).reduce(f64::min),
    }
}

#[derive(Serialize)]
struct RateReport {
    schema: &'static str,
    #[serde(flatten)]
    estimate: RateEstimate,
}

pub fn rate(args: &RateArgs) -> Outcome {
    let records = report::parse_csv_log(&read_text(&args.log)?)?;
    let f_star = match (&args.truth, args.f_star) {
        (Some(path), _) => Some(read_json::<GroundTruth>(path)?.objective()),
        (None, f) => f,
    };
    let mut opts = RateOptions::default();
    if let Some(path) = &args.input {
        opts.norm_sq = Some(tensor::hs_norm(&read_tensor(path)?).powi(2));
    }
    let estimate = diagnostics::estimate_rate_with(&records, f_star, &opts)?;
    let report = RateReport { schema: SCHEMA, estimate };
    if let Some(path) = &args.out {
        write_json(path, &report)?;
    }
    emit(&serde_json::to_string_pretty(&report).unwrap());
    Ok(())
}
