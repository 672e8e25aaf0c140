use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use eulersums::constants::eval_atom;
use eulersums::pslq::{default_digits, DEFAULT_MAX_HEIGHT};
use eulersums::verify::{select_conventions, DEFAULT_LEMMA_KMAX};
use eulersums::{
    check_finite_lemma, consistency_check, discover, evaluate_sum, verify_all, weight_basis, zeta_basis, Atom,
    Catalog, ClosedForm, DiscoverConfig, Error, EvalConfig, Filter, HarmonicCache, Kind, Monomial, Status,
    SumDescriptor, Verdict, VerifyOptions,
};

#[derive(Parser, Debug)]
#[command(name = "eulersums", version, about = "Evaluate and verify nonlinear Euler sums")]
struct Cli {
    /// identity catalog (JSON); defaults to the shipped one
    #[arg(long, global = true)]
    catalog: Option<PathBuf>,
    /// working decimal digits (default: per precision class, or 60)
    #[arg(long, global = true, env = "EULERSUMS_DIGITS")]
    digits: Option<u32>,
    /// head cutoff K
    #[arg(long, global = true)]
    k: Option<u64>,
    /// asymptotic expansion order B
    #[arg(long, global = true)]
    order: Option<u32>,
    #[arg(long, global = true, value_enum, default_value = "table")]
    format: Format,
    /// worker threads
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// write the report here instead of stdout
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// leave timing fields out of reports
    #[arg(long, global = true)]
    no_timing: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Table,
    Jsonl,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Evaluate Σ_{k≥1} d(k) for a summand descriptor
    Eval {
        descriptor: String,
        /// parameter value for descriptors using p
        #[arg(long)]
        p: Option<i64>,
    },
    /// Verify catalog entries by id
    Verify {
        #[arg(required = true)]
        ids: Vec<String>,
    },
    /// Verify every catalog entry matching the filter
    VerifyAll {
        #[arg(long)]
        family: Option<String>,
        #[arg(long)]
        identity_order: Option<u32>,
        #[arg(long)]
        kind: Option<String>,
        #[arg(long)]
        status: Option<String>,
    },
    /// Check a derived entry against its sources in exact arithmetic
    Consistency { id: String },
    /// Exact sweep of the finite identities for k = 1..=kmax
    Lemmas {
        #[arg(long, default_value_t = DEFAULT_LEMMA_KMAX)]
        kmax: u64,
    },
    /// Find a rational closed form over a weight-graded basis
    Discover {
        descriptor: String,
        #[arg(long)]
        weight: Option<u32>,
        /// atoms for the weight basis (default: zeta values only)
        #[arg(long, value_delimiter = ',')]
        atoms: Option<Vec<String>>,
        /// explicit basis monomials, e.g. "z6,z3^2"
        #[arg(long, value_delimiter = ',')]
        basis: Option<Vec<String>>,
        #[arg(long, default_value_t = DEFAULT_MAX_HEIGHT)]
        max_height: u64,
    },
    /// Print every atom value
    Constants,
}

enum Failure {
    Usage(String),
    Verdicts,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if n == 0 || rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            eprintln!("error: bad --jobs value {n}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verdicts) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn eval_config(cli: &Cli) -> EvalConfig {
    let mut c = EvalConfig::default();
    if let Some(k) = cli.k {
        c.k = k;
    }
    if let Some(b) = cli.order {
        c.order = b;
    }
    if let Some(d) = cli.digits {
        c.digits = d;
    }
    c
}

fn load_catalog(cli: &Cli) -> Result<Catalog, Failure> {
    let cat = match &cli.catalog {
        Some(p) => Catalog::load(p)?,
        None => Catalog::builtin(),
    };
    for w in &cat.warnings {
        eprintln!("warning: {w}");
    }
    Ok(cat)
}

fn emit(cli: &Cli, text: &str) -> Result<(), Failure> {
    match &cli.output {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Usage(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn verify_options(cli: &Cli) -> Result<VerifyOptions, Failure> {
    let eval = eval_config(cli);
    eval.validate()?;
    Ok(VerifyOptions { eval, digits: cli.digits, timing: !cli.no_timing, ..VerifyOptions::default() })
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.cmd {
        Cmd::Eval { descriptor, p } => {
            let d = SumDescriptor::parse(descriptor)?;
            let cfg = eval_config(cli);
            let r = evaluate_sum(&d, &cfg, *p)?;
            let text = match cli.format {
                Format::Table => format!("{} ± {}\n", r.value.to_sci(cfg.digits), r.bound.to_sci(3)),
                Format::Jsonl => {
                    let v = json!({
                        "descriptor": d.to_string(),
                        "p": p,
                        "value": r.value.to_sci(cfg.digits),
                        "bound": r.bound.to_sci(3),
                        "k": r.diagnostics.k_used,
                        "order": r.diagnostics.order_used,
                        "retried": r.diagnostics.retried,
                    });
                    format!("{v}\n")
                }
            };
            emit(cli, &text)
        }
        Cmd::Verify { ids } => {
            let cat = load_catalog(cli)?;
            for id in ids {
                if cat.get(id).is_none() {
                    return Err(Failure::Usage(format!("no catalog entry '{id}'")));
                }
            }
            let filter = Filter { ids: Some(ids.clone()), ..Filter::default() };
            report(cli, &cat, &filter)
        }
        Cmd::VerifyAll { family, identity_order, kind, status } => {
            let cat = load_catalog(cli)?;
            let filter = Filter {
                family: family.clone(),
                order: *identity_order,
                kind: kind.as_deref().map(str::parse::<Kind>).transpose()?,
                status: status.as_deref().map(str::parse::<Status>).transpose()?,
                ids: None,
            };
            report(cli, &cat, &filter)
        }
        Cmd::Consistency { id } => {
            let cat = load_catalog(cli)?;
            let r = consistency_check(&cat, id)?;
            let text = match cli.format {
                Format::Table => {
                    let coefs: Vec<String> = r.coefficients.iter().map(|(s, c)| format!("{c} * {s}")).collect();
                    format!(
                        "{}: {} from {} (residual {})\n",
                        r.id,
                        if r.pass { "consistent" } else { "inconsistent" },
                        coefs.join(" + "),
                        r.residual
                    )
                }
                Format::Jsonl => format!("{}\n", serde_json::to_string(&r).expect("serializable")),
            };
            emit(cli, &text)?;
            if r.pass {
                Ok(())
            } else {
                Err(Failure::Verdicts)
            }
        }
        Cmd::Lemmas { kmax } => lemmas(cli, *kmax),
        Cmd::Discover { descriptor, weight, atoms, basis, max_height } => {
            let d = SumDescriptor::parse(descriptor)?;
            let basis: Vec<Monomial> = match (basis, weight) {
                (Some(b), _) => b
                    .iter()
                    .map(|s| {
                        let cf = ClosedForm::parse(s)?;
                        match cf.terms.keys().next() {
                            Some(m) if cf.terms.len() == 1 => Ok(m.clone()),
                            _ => Err(Error::Parse(format!("basis element '{s}' is not a monomial"))),
                        }
                    })
                    .collect::<Result<_, Error>>()?,
                (None, Some(w)) => match atoms {
                    Some(a) => {
                        let a: Vec<Atom> = a.iter().map(|s| Atom::parse(s)).collect::<Result<_, _>>()?;
                        weight_basis(*w, &a)
                    }
                    None => zeta_basis(*w),
                },
                (None, None) => return Err(Failure::Usage("discover needs --weight or --basis".into())),
            };
            if basis.is_empty() {
                return Err(Failure::Usage("empty basis".into()));
            }
            let mut eval = eval_config(cli);
            eval.digits = cli.digits.unwrap_or(default_digits(basis.len()));
            let cat = load_catalog(cli)?;
            let conv = select_conventions(&cat, &verify_options(cli)?).conventions;
            let cfg = DiscoverConfig { eval, digits: cli.digits, max_height: *max_height, conv };
            let cf = discover(&d, &basis, &cfg)?;
            let b: Vec<String> = basis.iter().map(|m| m.to_string()).collect();
            let text = match cli.format {
                Format::Table => format!("[{d}] = {cf}\n"),
                Format::Jsonl => format!("{}\n", json!({"descriptor": d.to_string(), "basis": b, "closed_form": cf.to_string()})),
            };
            emit(cli, &text)
        }
        Cmd::Constants => {
            let digits = cli.digits.unwrap_or(60);
            let cat = load_catalog(cli)?;
            let conv = select_conventions(&cat, &verify_options(cli)?).conventions;
            let mut text = String::new();
            for a in Atom::all() {
                let (v, b) = eval_atom(a, digits, &conv)?;
                text += &match cli.format {
                    Format::Table => format!("{:<7} {}\n", a.name(), v.to_sci(digits)),
                    Format::Jsonl => {
                        format!("{}\n", json!({"atom": a.name(), "value": v.to_sci(digits), "bound": b.to_sci(3)}))
                    }
                };
            }
            if let Format::Table = cli.format {
                text += &format!("conventions: {}\n", conv.describe());
            }
            emit(cli, &text)
        }
    }
}

fn report(cli: &Cli, cat: &Catalog, filter: &Filter) -> Result<(), Failure> {
    let opts = verify_options(cli)?;
    let r = verify_all(cat, filter, &opts);
    let text = match cli.format {
        Format::Table => r.to_table(),
        Format::Jsonl => r.to_jsonl(),
    };
    emit(cli, &text)?;
    if cli.output.is_some() {
        let s = &r.summary;
        println!("{} entries: {} pass, {} fail, {} inconclusive", s.total, s.pass, s.fail, s.inconclusive);
    }
    if r.records.iter().any(|x| x.verdict == Verdict::Fail) {
        Err(Failure::Verdicts)
    } else {
        Ok(())
    }
}

fn lemmas(cli: &Cli, kmax: u64) -> Result<(), Failure> {
    let cat = load_catalog(cli)?;
    let entries = cat.query(&Filter { kind: Some(Kind::FiniteIdentity), ..Filter::default() });
    let mut text = String::new();
    let mut failed = false;
    for e in entries {
        let mut cache = HarmonicCache::new();
        let mut pass = 0u64;
        let mut first_fail = None;
        for k in 1..=kmax {
            if check_finite_lemma(e, k, &mut cache)?.pass {
                pass += 1;
            } else if first_fail.is_none() {
                first_fail = Some(k);
            }
        }
        failed |= first_fail.is_some();
        text += &match cli.format {
            Format::Table => match first_fail {
                None => format!("{:<7} {pass}/{kmax} pass\n", e.id),
                Some(k) => format!("{:<7} {pass}/{kmax} pass, first failure at k = {k}\n", e.id),
            },
            Format::Jsonl => {
                format!("{}\n", json!({"id": e.id, "kmax": kmax, "pass": pass, "first_failure": first_fail}))
            }
        };
    }
    emit(cli, &text)?;
    if failed {
        Err(Failure::Verdicts)
    } else {
        Ok(())
    }
}
