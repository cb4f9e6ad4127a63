use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fermat_jets::delta_calculus::{Conversion, Flavor, Trunc};
use fermat_jets::jet_series::{
    dump, log_series, overconvergence_defect, parse_dump, radius_estimate, series_ring,
    SeriesTruncation,
};
use fermat_jets::modular_forms::{
    expansion_fsharp_pi, expansion_tau_and_fsharp_p, hecke_t_coeffs, ingest, random_split_system,
    read_coefficients, synthesize, HeckeSystem,
};
use fermat_jets::suites::{run_suite, PiChoice, Report, SuiteConfig, SUITES};
use fermat_jets::Error;
use rand::SeedableRng;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(
    name = "fjet",
    version,
    about = "δ-jet expansions, overconvergence and Hecke checks"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a named verification suite (`list` prints the names).
    Run {
        suite: String,
        #[command(flatten)]
        opts: Common,
    },
    /// Print a series in the dump format.
    Expand {
        /// psi-p, psi-pi, sharp-pi or sharp-p (the last two read --in).
        what: String,
        /// Jet-degree cap (defaults to --jet-deg).
        #[arg(long)]
        terms: Option<u32>,
        #[command(flatten)]
        opts: Common,
    },
    /// Apply a Hecke operator to a coefficient file.
    Hecke {
        #[arg(long, default_value = "T")]
        op: String,
        #[arg(long, default_value_t = 2)]
        kappa: u32,
        #[arg(long = "M")]
        m: u64,
        #[arg(long)]
        n: u64,
        #[command(flatten)]
        opts: Common,
    },
    /// Overconvergence defect of a dumped δ_p series, with the δ_π witness.
    Overconv {
        #[arg(long, default_value_t = i32::MIN)]
        q_min: i32,
        #[command(flatten)]
        opts: Common,
    },
    /// Valuation profile, lower hull and final slope of a dumped series.
    Radius {
        #[arg(long, default_value_t = i32::MIN)]
        q_min: i32,
        #[command(flatten)]
        opts: Common,
    },
    /// Write a synthetic Hecke eigen-system as a coefficient file.
    Synth {
        #[arg(long, default_value_t = 2)]
        kappa: u32,
        /// Prime values `l=a_l,...`; without it a random split system of level Np is drawn.
        #[arg(long)]
        primes: Option<String>,
        #[command(flatten)]
        opts: Common,
    },
    /// Check a coefficient file against the Hecke relations.
    Ingest {
        #[command(flatten)]
        opts: Common,
    },
}

#[derive(Args, Clone, Default)]
struct Common {
    #[arg(long)]
    p: Option<u32>,
    #[arg(long = "N")]
    level: Option<u64>,
    /// `cyclotomic` or `eisenstein:E_0,...,E_e` (full monic coefficient list).
    #[arg(long)]
    pi: Option<String>,
    /// Ramification index; with no --pi it selects `x^e - p` (or the cyclotomic case for e = p-1).
    #[arg(long)]
    e: Option<usize>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    precision: Option<u32>,
    #[arg(long)]
    q_prec: Option<i32>,
    #[arg(long)]
    jet_deg: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Flat `key = value` file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
}

enum Fail {
    Config(String),
    Assertion(String),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Malformed { .. } => Fail::Config(e.to_string()),
            _ => Fail::Assertion(e.to_string()),
        }
    }
}

type Outcome = std::result::Result<bool, Fail>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Run { suite, opts } => cmd_run(&suite, &opts),
        Cmd::Expand { what, terms, opts } => cmd_expand(&what, terms, &opts),
        Cmd::Hecke {
            op,
            kappa,
            m,
            n,
            opts,
        } => cmd_hecke(&op, kappa, m, n, &opts),
        Cmd::Overconv { q_min, opts } => cmd_overconv(q_min, &opts),
        Cmd::Radius { q_min, opts } => cmd_radius(q_min, &opts),
        Cmd::Synth {
            kappa,
            primes,
            opts,
        } => cmd_synth(kappa, primes.as_deref(), &opts),
        Cmd::Ingest { opts } => cmd_ingest(&opts),
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Fail::Assertion(msg)) => {
            eprintln!("fjet: {msg}");
            ExitCode::from(1)
        }
        Err(Fail::Config(msg)) => {
            eprintln!("fjet: {msg}");
            ExitCode::from(2)
        }
    }
}

/// Settings after merging the config file under the flags.
struct Settings {
    cfg: SuiteConfig,
    input: Option<PathBuf>,
    out: Option<PathBuf>,
}

fn read_config(path: &Path) -> Result<BTreeMap<String, String>, Fail> {
    let text =
        fs::read_to_string(path).map_err(|e| Fail::Config(format!("{}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Fail::Config(format!(
                "{}:{}: expected key = value",
                path.display(),
                i + 1
            ))
        })?;
        map.insert(k.trim().replace('_', "-"), v.trim().to_string());
    }
    Ok(map)
}

fn settings(o: &Common) -> Result<Settings, Fail> {
    let mut file = match &o.config {
        Some(path) => read_config(path)?,
        None => BTreeMap::new(),
    };
    fn pick<T: std::str::FromStr>(
        flag: Option<T>,
        file: &mut BTreeMap<String, String>,
        key: &str,
    ) -> Result<Option<T>, Fail> {
        let from_file = file.remove(key);
        if flag.is_some() {
            return Ok(flag);
        }
        from_file
            .map(|v| {
                v.parse()
                    .map_err(|_| Fail::Config(format!("bad value `{v}` for `{key}`")))
            })
            .transpose()
    }
    let d = SuiteConfig::default();
    let p = pick(o.p, &mut file, "p")?.unwrap_or(d.p);
    let level = pick(o.level, &mut file, "N")?.unwrap_or(d.level);
    let e = pick(o.e, &mut file, "e")?;
    let pi_text: Option<String> = pick(o.pi.clone(), &mut file, "pi")?;
    let pi = match (pi_text, e) {
        (Some(t), _) => PiChoice::parse(&t)?,
        (None, Some(e)) if e + 1 != p as usize => {
            let mut c = vec![0i64; e + 1];
            c[0] = -(p as i64);
            c[e] = 1;
            PiChoice::Eisenstein(c.into_iter().map(Into::into).collect())
        }
        (None, _) => PiChoice::Cyclotomic,
    };
    let cfg = SuiteConfig {
        p,
        level,
        pi,
        precision: pick(o.precision, &mut file, "precision")?.unwrap_or(d.precision),
        q_prec: pick(o.q_prec, &mut file, "q-prec")?,
        jet_deg: pick(o.jet_deg, &mut file, "jet-deg")?,
        r: pick(o.r, &mut file, "r")?.unwrap_or(d.r),
        seed: pick(o.seed, &mut file, "seed")?.unwrap_or(d.seed),
    };
    let input = pick(o.input.clone(), &mut file, "in")?;
    let out = pick(o.out.clone(), &mut file, "out")?;
    if let Some(k) = file.keys().next() {
        return Err(Fail::Config(format!("unknown config key `{k}`")));
    }
    if let Some(e) = e {
        let f = cfg.field()?;
        if f.e() != e {
            return Err(Fail::Config(format!(
                "--e {e} disagrees with the uniformizer (e = {})",
                f.e()
            )));
        }
    }
    Ok(Settings { cfg, input, out })
}

fn read_input(s: &Settings) -> Result<String, Fail> {
    let path = s
        .input
        .as_ref()
        .ok_or_else(|| Fail::Config("--in is required".into()))?;
    fs::read_to_string(path).map_err(|e| Fail::Config(format!("{}: {e}", path.display())))
}

/// Writes to `--out` (appending JSON lines, replacing other files) or stdout.
fn emit(s: &Settings, text: &str, append: bool) -> Result<(), Fail> {
    match &s.out {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(path) => {
            let mut f = fs::OpenOptions::new()
                .create(true)
                .write(true)
                .append(append)
                .truncate(!append)
                .open(path)
                .map_err(|e| Fail::Config(format!("{}: {e}", path.display())))?;
            f.write_all(text.as_bytes())
                .map_err(|e| Fail::Config(format!("{}: {e}", path.display())))
        }
    }
}

fn report_lines(rep: &Report) -> String {
    let params: serde_json::Map<String, Value> = rep
        .params
        .iter()
        .map(|(k, v)| (k.clone(), json!(v)))
        .collect();
    let mut out = String::new();
    let mut line = |v: Value| {
        out.push_str(&v.to_string());
        out.push('\n');
    };
    line(json!({"record": "suite", "suite": rep.suite, "params": params}));
    for c in &rep.checks {
        line(
            json!({"record": "check", "suite": rep.suite, "check": c.name, "pass": c.pass, "detail": c.detail}),
        );
    }
    let failed = rep.failures().len();
    line(
        json!({"record": "summary", "suite": rep.suite, "pass": rep.pass(), "checks": rep.checks.len(), "failed": failed}),
    );
    out
}

fn cmd_run(suite: &str, o: &Common) -> Outcome {
    if suite == "list" {
        for s in SUITES {
            println!("{s}");
        }
        return Ok(true);
    }
    let s = settings(o)?;
    let rep = match run_suite(suite, &s.cfg) {
        Ok(rep) => rep,
        Err(Error::Config(msg)) => return Err(Fail::Config(msg)),
        Err(e) => {
            let mut rep = Report::new(suite);
            rep.check("suite completed", false, e.to_string());
            rep
        }
    };
    emit(&s, &report_lines(&rep), true)?;
    Ok(rep.pass())
}

fn load_system(s: &Settings, verify: bool) -> Result<HeckeSystem, Fail> {
    let text = read_input(s)?;
    Ok(if verify {
        ingest(&text)?
    } else {
        read_coefficients(&text)?
    })
}

fn cmd_expand(what: &str, terms: Option<u32>, o: &Common) -> Outcome {
    let s = settings(o)?;
    let f = s.cfg.field()?;
    let p = s.cfg.p;
    let series = match what {
        "psi-p" | "psi-pi" => {
            let d = terms.or(s.cfg.jet_deg).unwrap_or(3 * p);
            let flavor = if what == "psi-p" {
                Flavor::P
            } else {
                Flavor::Pi
            };
            log_series(&series_ring(&f, flavor, 1), d)
        }
        "sharp-pi" | "sharp-p" => {
            let h = load_system(&s, true)?;
            if h.p != p as u64 {
                return Err(Fail::Config(format!(
                    "the coefficient file is for p = {}, not {p}",
                    h.p
                )));
            }
            let d = terms.or(s.cfg.jet_deg).unwrap_or(p + 1);
            let q = s.cfg.q_prec.unwrap_or(h.q_max() as i32 + 1);
            let conv = Conversion::new(&f, 1, Trunc::jets(d))?;
            let sharp = expansion_fsharp_pi(&h, &conv, &SeriesTruncation::new(q, d))?;
            if what == "sharp-pi" {
                sharp.series
            } else {
                expansion_tau_and_fsharp_p(&h, &sharp, &conv)?.fsharp_p
            }
        }
        _ => {
            return Err(Fail::Config(format!(
                "unknown expansion `{what}` (psi-p, psi-pi, sharp-pi, sharp-p)"
            )))
        }
    };
    emit(&s, &dump(&series), false)?;
    Ok(true)
}

fn cmd_hecke(op: &str, kappa: u32, m: u64, n: u64, o: &Common) -> Outcome {
    if op != "T" {
        return Err(Fail::Config(format!("unknown operator `{op}`")));
    }
    if n == 0 || m == 0 {
        return Err(Fail::Config("--n and --M must be positive".into()));
    }
    let s = settings(o)?;
    let h = load_system(&s, false)?;
    let b = hecke_t_coeffs(kappa, m, n, &h.a);
    let mut out = format!(
        "{} {} {} {} {}\n",
        h.level,
        h.p,
        kappa,
        b.len() - 1,
        h.source.as_str()
    );
    for (i, c) in b.iter().enumerate().skip(1) {
        out.push_str(&format!("{i} {c}\n"));
    }
    emit(&s, &out, false)?;
    Ok(true)
}

/// `r` and `D` from a dump header unless given on the command line.
fn dump_shape(
    text: &str,
    s: &Settings,
    r_flag: Option<usize>,
) -> Result<(usize, Option<u32>), Fail> {
    let mut r = None;
    let mut d = None;
    if let Some(h) = text.lines().find(|l| l.trim_start().starts_with('#')) {
        for w in h.trim_start_matches(['#', ' ']).split_whitespace() {
            if let Some(v) = w.strip_prefix("r=") {
                r = v.parse().ok();
            } else if let Some(v) = w.strip_prefix("D=") {
                d = v.parse().ok();
            }
        }
    }
    let r = r_flag.or(r).unwrap_or(1);
    Ok((r, s.cfg.jet_deg.or(d)))
}

fn cmd_overconv(q_min: i32, o: &Common) -> Outcome {
    let s = settings(o)?;
    let text = read_input(&s)?;
    let (r, d) = dump_shape(&text, &s, o.r)?;
    let d = d.ok_or_else(|| Fail::Config("jet-degree cap unknown; pass --jet-deg".into()))?;
    let f = s.cfg.field()?;
    let series = parse_dump(&series_ring(&f, Flavor::P, r), &text, q_min)?;
    let conv = Conversion::new(&f, r, Trunc::jets(d))?;
    let rep = overconvergence_defect(&series, &conv)?;
    let (q, dd, k) = rep.stamp;
    let line = json!({
        "record": "overconv",
        "pi": s.cfg.pi.label(),
        "defect": rep.defect,
        "min_valuation": rep.min_valuation.map(|v| v.to_string()),
        "Q": q,
        "D": dd,
        "K": k,
        "witness": dump(&rep.witness),
    });
    emit(&s, &format!("{line}\n"), false)?;
    Ok(true)
}

fn cmd_radius(q_min: i32, o: &Common) -> Outcome {
    let s = settings(o)?;
    let text = read_input(&s)?;
    let (r, _) = dump_shape(&text, &s, o.r)?;
    let f = s.cfg.field()?;
    let ring = series_ring(&f, Flavor::P, r);
    let series = parse_dump(&ring, &text, q_min)?;
    let est = radius_estimate(&series)?;
    fn pts<T: ToString>(v: &[(i64, T)]) -> Vec<Value> {
        v.iter().map(|(d, m)| json!([d, m.to_string()])).collect()
    }
    let line = json!({
        "record": "radius",
        "points": pts(&est.points),
        "hull": pts(&est.hull),
        "slope": est.slope.to_string(),
        "intercept": est.intercept.to_string(),
        "best_slope": est.best_slope(Default::default()).map(|v| v.to_string()),
    });
    emit(&s, &format!("{line}\n"), false)?;
    Ok(true)
}

fn cmd_synth(kappa: u32, primes: Option<&str>, o: &Common) -> Outcome {
    let s = settings(o)?;
    let p = s.cfg.p as u64;
    let q = s.cfg.q_prec.unwrap_or((p * p + 5 * p) as i32);
    if q < 1 {
        return Err(Fail::Config("--q-prec must be positive".into()));
    }
    let h = match primes {
        Some(list) => {
            let mut vals = BTreeMap::new();
            for item in list.split(',').filter(|x| !x.trim().is_empty()) {
                let (l, v) = item
                    .split_once('=')
                    .ok_or_else(|| Fail::Config(format!("expected l=a_l, got `{item}`")))?;
                let l: u64 = l
                    .trim()
                    .parse()
                    .map_err(|_| Fail::Config(format!("bad prime `{l}`")))?;
                let v: i64 = v
                    .trim()
                    .parse()
                    .map_err(|_| Fail::Config(format!("bad value `{v}`")))?;
                vals.insert(l, v);
            }
            synthesize(s.cfg.level, p, kappa, &vals, q as usize, true)?
        }
        None => {
            if kappa != 2 {
                return Err(Fail::Config("random systems have weight 2".into()));
            }
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(s.cfg.seed);
            random_split_system(s.cfg.level, p, q as usize, &mut rng)?
        }
    };
    emit(&s, &h.to_file(), false)?;
    Ok(true)
}

fn cmd_ingest(o: &Common) -> Outcome {
    let s = settings(o)?;
    let text = read_input(&s)?;
    let (line, ok) = match ingest(&text) {
        Ok(h) => (
            json!({"record": "ingest", "pass": true, "N": h.level, "p": h.p, "kappa": h.kappa, "Q": h.q_max(), "source": h.source.as_str()}),
            true,
        ),
        Err(e @ Error::RelationViolation { .. }) => (
            json!({"record": "ingest", "pass": false, "detail": e.to_string()}),
            false,
        ),
        Err(e) => return Err(e.into()),
    };
    emit(&s, &format!("{line}\n"), true)?;
    Ok(ok)
}
