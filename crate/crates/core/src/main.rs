//! Command-line surface: single evaluations as JSON, scan tables as TSV,
//! verification suites with exit status 0 (pass) / 1 (failures, one JSON
//! line per failure on stderr) / 2 (config error).

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use plocal::characters::{is_atypical, parse_char_spec, MultChar};
use plocal::degenerate::{self, EvalMode};
use plocal::dualweight::{
    classify_bounds, dual_weight, dual_weight_exhaustive, rho_uv_brute, rho_uv_closed,
    rho_uv_fast, rho_uv_vanishes,
};
use plocal::error::Error;
use plocal::integrate::SchwartzBruhat;
use plocal::lfactors::{gauss_sum, verify_tate};
use plocal::padic::{Fx, ValuedUnit};
use plocal::scalar::{Cx, R};
use plocal::transforms::DeformParams;

const SCHEMA_VERSION: &str = "1";

#[derive(Parser, Debug, Serialize, Deserialize)]
#[command(name = "plocal", version, about = "p-adic character sums and local factors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output format for tables; single evaluations are always JSON.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Rayon thread-pool size (0 = library default).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Also write the report stream to this file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
enum Format {
    Json,
    Tsv,
}

#[derive(Subcommand, Debug, Serialize, Deserialize)]
enum Command {
    /// Gauss sum of chi at |xi| = p^-val, with the support/magnitude laws.
    Gauss {
        #[arg(long)]
        chi: String,
        /// Valuation of xi (the law concentrates at val = -n).
        #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
        val: i32,
    },
    /// Randomized functional-equation residuals for the local zeta integral.
    TateCheck {
        #[arg(long, default_value_t = 5)]
        p: u64,
        #[arg(long, default_value_t = 200)]
        cases: u32,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// One dyadic integral rho_{U,V}.
    Rho {
        #[arg(long)]
        p: u64,
        /// U as a power of q.
        #[arg(long, short = 'U')]
        u: u64,
        /// V as a power of q.
        #[arg(long, short = 'V')]
        v: u64,
        /// Conductor of chi as a power of q.
        #[arg(long, short = 'Q')]
        q: u64,
        /// chi spec; default: least even primitive character of conductor Q.
        #[arg(long)]
        chi: Option<String>,
        #[arg(long, default_value_t = false)]
        omega_trivial: bool,
        /// omega spec when not trivial.
        #[arg(long)]
        omega: Option<String>,
    },
    /// Assembled dual weight h~(omega) with bound classification.
    DualWeight {
        #[arg(long)]
        chi: String,
        #[arg(long)]
        omega: String,
        /// Evaluate every piece by the brute-force double sum.
        #[arg(long, default_value_t = false)]
        exhaustive: bool,
    },
    /// Classify h~(omega) for every omega of conductor up to q^max_cond_exp.
    AtypicalScan {
        #[arg(long)]
        chi: String,
        #[arg(long)]
        max_cond_exp: Option<u32>,
    },
    /// Normalized degenerate factor D*(nu) and the c-constants.
    Dfstar {
        #[arg(long)]
        chi: String,
        /// Complex parameters as re[,im].
        #[arg(long, default_value = "0")]
        s1: String,
        #[arg(long, default_value = "0")]
        s2: String,
        #[arg(long, default_value = "0")]
        s3: String,
        #[arg(long, default_value = "0")]
        nu1: String,
        #[arg(long, default_value = "0")]
        nu2: String,
        /// Cross-check the closed form against the direct double integral.
        #[arg(long, default_value_t = false)]
        check: bool,
    },
    /// Golden suite: single-variable and exhaustive-table laws at prime p.
    VerifyAppendix {
        #[arg(long)]
        p: u64,
        #[arg(long, default_value_t = 3)]
        max_cond_exp: u32,
    },
    /// Agreement plus timing of the stationary-phase path vs brute force.
    Bench {
        #[arg(long, default_value_t = 5)]
        p: u64,
        #[arg(long, default_value_t = 4)]
        cond_exp: u32,
        #[arg(long, default_value_t = 20)]
        samples: u32,
    },
}

fn tol(name: &str, default: R) -> R {
    std::env::var(format!("PLOCAL_TOL_{name}"))
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(default)
}

fn parse_cx(s: &str) -> Result<Cx, Error> {
    let mut it = s.split(',');
    let re: R = it
        .next()
        .unwrap_or("")
        .trim()
        .parse()
        .map_err(|_| Error::BadSpec(format!("bad complex literal {s}")))?;
    let im: R = match it.next() {
        None => 0.0,
        Some(t) => t
            .trim()
            .parse()
            .map_err(|_| Error::BadSpec(format!("bad complex literal {s}")))?,
    };
    if it.next().is_some() {
        return Err(Error::BadSpec(format!("bad complex literal {s}")));
    }
    Ok(Cx::new(re, im))
}

fn q_log(p: u64, x: u64) -> Result<u32, Error> {
    let mut e = 0;
    let mut v = 1u64;
    while v < x {
        v = v
            .checked_mul(p)
            .ok_or_else(|| Error::BadSpec(format!("{x} is not a power of {p}")))?;
        e += 1;
    }
    if v == x {
        Ok(e)
    } else {
        Err(Error::BadSpec(format!("{x} is not a power of {p}")))
    }
}

struct Sink {
    file: Option<std::fs::File>,
}

impl Sink {
    fn new(path: &Option<PathBuf>) -> std::io::Result<Self> {
        Ok(Self {
            file: match path {
                Some(p) => Some(std::fs::File::create(p)?),
                None => None,
            },
        })
    }

    fn line(&mut self, s: &str) {
        // a closed pipe (e.g. `| head`) is not an error worth a panic
        let _ = writeln!(std::io::stdout(), "{s}");
        if let Some(f) = &mut self.file {
            writeln!(f, "{s}").expect("write --out file");
        }
    }

    fn json(&mut self, v: &serde_json::Value) {
        self.line(&serde_json::to_string_pretty(v).expect("serialize report"));
    }
}

fn fail(ledger: &mut Vec<serde_json::Value>, check: &str, detail: String) {
    ledger.push(json!({"schema": SCHEMA_VERSION, "check": check, "detail": detail}));
}

fn main() {
    let cli = Cli::parse();
    if cli.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
            .expect("rayon pool");
    }
    let mut sink = match Sink::new(&cli.out) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("cannot open --out file: {e}");
            std::process::exit(2);
        }
    };
    let mut ledger = Vec::new();
    let run = run(&cli, &mut sink, &mut ledger);
    match run {
        Err(e) => {
            eprintln!("config error: {e}");
            std::process::exit(2);
        }
        Ok(()) if ledger.is_empty() => {}
        Ok(()) => {
            for l in &ledger {
                eprintln!("{l}");
            }
            std::process::exit(1);
        }
    }
}

fn run(cli: &Cli, sink: &mut Sink, ledger: &mut Vec<serde_json::Value>) -> Result<(), Error> {
    match &cli.command {
        Command::Gauss { chi, val } => cmd_gauss(chi, *val, sink, ledger),
        Command::TateCheck { p, cases, seed } => cmd_tate(*p, *cases, *seed, sink, ledger),
        Command::Rho {
            p,
            u,
            v,
            q,
            chi,
            omega_trivial,
            omega,
        } => cmd_rho(*p, *u, *v, *q, chi, *omega_trivial, omega, sink, ledger),
        Command::DualWeight {
            chi,
            omega,
            exhaustive,
        } => cmd_dual_weight(chi, omega, *exhaustive, sink, ledger),
        Command::AtypicalScan { chi, max_cond_exp } => {
            cmd_atypical_scan(chi, *max_cond_exp, cli.format, sink, ledger)
        }
        Command::Dfstar {
            chi,
            s1,
            s2,
            s3,
            nu1,
            nu2,
            check,
        } => cmd_dfstar(chi, s1, s2, s3, nu1, nu2, *check, sink, ledger),
        Command::VerifyAppendix { p, max_cond_exp } => {
            cmd_verify_appendix(*p, *max_cond_exp, cli.format, sink, ledger)
        }
        Command::Bench {
            p,
            cond_exp,
            samples,
        } => cmd_bench(*p, *cond_exp, *samples, sink, ledger),
    }
}

fn cmd_gauss(
    spec: &str,
    val: i32,
    sink: &mut Sink,
    ledger: &mut Vec<serde_json::Value>,
) -> Result<(), Error> {
    let chi = parse_char_spec(spec)?;
    if chi.n == 0 {
        return Err(Error::BadSpec("gauss needs ramified chi".into()));
    }
    let prec = chi.n + val.unsigned_abs() + 1;
    let xi = ValuedUnit::new(chi.p, val, 1, prec)?;
    let g = gauss_sum(&chi, &xi);
    let expected_abs = if val == -(chi.n as i32) {
        (chi.p as R).powf(-(chi.n as R) / 2.0)
    } else {
        0.0
    };
    if (g.norm() - expected_abs).abs() > tol("GAUSS", 1e-10) {
        fail(
            ledger,
            "gauss-magnitude",
            format!("|g| = {} expected {expected_abs}", g.norm()),
        );
    }
    sink.json(&json!({
        "schema": SCHEMA_VERSION,
        "chi": chi.spec_string(),
        "xi_val": val,
        "re": g.re,
        "im": g.im,
        "abs": g.norm(),
        "expected_abs": expected_abs,
        "tolerance": tol("GAUSS", 1e-10),
    }));
    Ok(())
}

fn random_phi(rng: &mut ChaCha8Rng, p: u64) -> Result<SchwartzBruhat, Error> {
    let mut phi = SchwartzBruhat::unit_ball(p).scale(Cx::new(
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
    ));
    for _ in 0..rng.gen_range(0..3) {
        let center = if rng.gen_bool(0.3) {
            Fx::Zero
        } else {
            let mut u = rng.gen_range(1..p.pow(2));
            if u % p == 0 {
                u += 1;
            }
            Fx::NonZero(ValuedUnit::new(p, rng.gen_range(-2..2), u, 8)?)
        };
        let ball = SchwartzBruhat::indicator_ball(p, center, rng.gen_range(-1..3)).scale(
            Cx::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
        );
        phi = phi.add(&ball);
    }
    Ok(phi)
}

fn cmd_tate(
    p: u64,
    cases: u32,
    seed: u64,
    sink: &mut Sink,
    ledger: &mut Vec<serde_json::Value>,
) -> Result<(), Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = tol("TATE", 1e-8);
    let mut max_res: R = 0.0;
    for i in 0..cases {
        let phi = random_phi(&mut rng, p)?;
        let n = rng.gen_range(0..3u32);
        let k = if n == 0 { 0 } else { rng.gen_range(0..p.pow(n - 1) * (p - 1)) };
        let chi = MultChar::new(p, n, k, rng.gen_range(0.0..1.0), 0.0)?;
        let s = Cx::new(rng.gen_range(0.2..0.8), rng.gen_range(-1.0..1.0));
        let res = match verify_tate(&phi, &chi, s) {
            Ok(r) => r,
            // a draw can land near the unramified L-factor pole; skip it
            Err(Error::NearPole(_)) => continue,
            Err(e) => return Err(e),
        };
        max_res = max_res.max(res);
        if res > t {
            fail(
                ledger,
                "tate-residual",
                format!("case {i}: residual {res:.3e} > {t:.1e} for chi={}", chi.spec_string()),
            );
        }
    }
    sink.json(&json!({
        "schema": SCHEMA_VERSION,
        "p": p,
        "cases": cases,
        "seed": seed,
        "max_residual": max_res,
        "tolerance": t,
        "pass": ledger.is_empty(),
    }));
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_rho(
    p: u64,
    u: u64,
    v: u64,
    q: u64,
    chi_spec: &Option<String>,
    omega_trivial: bool,
    omega_spec: &Option<String>,
    sink: &mut Sink,
    ledger: &mut Vec<serde_json::Value>,
) -> Result<(), Error> {
    let n = q_log(p, q)?;
    let (ju, jv) = (q_log(p, u)?, q_log(p, v)?);
    let chi = match chi_spec {
        Some(s) => {
            let c = parse_char_spec(s)?;
            if c.p != p || c.conductor() != q {
                return Err(Error::BadSpec("--chi disagrees with --p/--Q".into()));
            }
            c
        }
        None => MultChar::new(p, n, 2, 0.0, 0.0)?,
    };
    let omega = match (omega_trivial, omega_spec) {
        (true, None) => MultChar::trivial(p),
        (false, Some(s)) => parse_char_spec(s)?,
        _ => {
            return Err(Error::BadSpec(
                "give exactly one of --omega-trivial or --omega".into(),
            ))
        }
    };
    let level = chi.n.max(omega.n) + ju + jv;
    let brute = rho_uv_brute(&chi, &omega, ju, jv, level)?;
    let closed = rho_uv_closed(&chi, &omega, ju, jv);
    if let Some(c) = closed {
        if (c - brute).norm() > tol("RHO", 1e-9) {
            fail(
                ledger,
                "rho-closed-vs-brute",
                format!("closed {c} vs brute {brute}"),
            );
        }
    }
    sink.json(&json!({
        "schema": SCHEMA_VERSION,
        "chi": chi.spec_string(),
        "omega": omega.spec_string(),
        "U": u,
        "V": v,
        "re": brute.re,
        "im": brute.im,
        "closed_form_available": closed.is_some(),
        "vanishes_by_support": rho_uv_vanishes(&chi, &omega, ju, jv),
        "level": level,
    }));
    Ok(())
}

fn cmd_dual_weight(
    chi_spec: &str,
    omega_spec: &str,
    exhaustive: bool,
    sink: &mut Sink,
    ledger: &mut Vec<serde_json::Value>,
) -> Result<(), Error> {
    let chi = parse_char_spec(chi_spec)?;
    let omega = parse_char_spec(omega_spec)?;
    let report = if exhaustive {
        dual_weight_exhaustive(&chi, &omega)?
    } else {
        dual_weight(&chi, &omega)?
    };
    let (pass, lines) = classify_bounds(&report);
    for l in lines {
        fail(ledger, "dual-weight-bound", l);
    }
    let mut v = serde_json::to_value(&report).expect("serialize report");
    v["schema"] = json!(SCHEMA_VERSION);
    v["bound_pass"] = json!(pass);
    sink.json(&v);
    Ok(())
}

fn cmd_atypical_scan(
    chi_spec: &str,
    max_cond_exp: Option<u32>,
    format: Format,
    sink: &mut Sink,
    ledger: &mut Vec<serde_json::Value>,
) -> Result<(), Error> {
    let chi = parse_char_spec(chi_spec)?;
    if chi.n == 0 {
        return Err(Error::BadSpec("scan needs ramified chi".into()));
    }
    let emax = max_cond_exp.unwrap_or(chi.n + 1);
    let mut omegas = vec![MultChar::trivial(chi.p)];
    for c in 1..=emax {
        omegas.extend(MultChar::all_primitive(chi.p, c)?);
    }
    if format == Format::Tsv {
        sink.line("omega\tclass\tre\tim\tmax_ratio\tatypical\tn_alpha\tbound_pass");
    }
    let mut rows = Vec::new();
    for omega in &omegas {
        let report = dual_weight(&chi, omega)?;
        let (pass, lines) = classify_bounds(&report);
        for l in lines {
            fail(ledger, "atypical-scan-bound", l);
        }
        let (atyp, cls) = is_atypical(&chi, omega);
        let n_alpha = cls.map_or(0, |c| c.n_alpha);
        match format {
            Format::Tsv => sink.line(&format!(
                "{}\t{:?}\t{:.12e}\t{:.12e}\t{:.6e}\t{}\t{}\t{}",
                report.omega,
                report.bound_class,
                report.value_re,
                report.value_im,
                report.max_ratio,
                atyp,
                n_alpha,
                pass
            )),
            Format::Json => rows.push(json!({
                "omega": report.omega,
                "class": report.bound_class,
                "re": report.value_re,
                "im": report.value_im,
                "max_ratio": report.max_ratio,
                "atypical": atyp,
                "n_alpha": n_alpha,
                "bound_pass": pass,
            })),
        }
    }
    if format == Format::Json {
        sink.json(&json!({
            "schema": SCHEMA_VERSION,
            "chi": chi.spec_string(),
            "max_cond_exp": emax,
            "rows": rows,
        }));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_dfstar(
    chi_spec: &str,
    s1: &str,
    s2: &str,
    s3: &str,
    nu1: &str,
    nu2: &str,
    check: bool,
    sink: &mut Sink,
    ledger: &mut Vec<serde_json::Value>,
) -> Result<(), Error> {
    let chi = parse_char_spec(chi_spec)?;
    let s = DeformParams::new(parse_cx(s1)?, parse_cx(s2)?, parse_cx(s3)?);
    let nu = (parse_cx(nu1)?, parse_cx(nu2)?);
    let eval = degenerate::degen_eval(&chi, &s, nu)?;
    let mut v = serde_json::to_value(&eval).expect("serialize report");
    v["schema"] = json!(SCHEMA_VERSION);
    if check {
        let closed = Cx::new(eval.d_star_re, eval.d_star_im);
        let brute = degenerate::d_f_star(&chi, &s, nu, EvalMode::Brute)?;
        let rel = (closed - brute).norm() / (1.0 + closed.norm());
        let t = tol("DFSTAR", 1e-6);
        v["brute_re"] = json!(brute.re);
        v["brute_im"] = json!(brute.im);
        v["rel_err"] = json!(rel);
        if rel > t {
            fail(
                ledger,
                "dfstar-closed-vs-brute",
                format!("relative error {rel:.3e} > {t:.1e}"),
            );
        }
    }
    sink.json(&v);
    Ok(())
}

fn cmd_verify_appendix(
    p: u64,
    max_cond_exp: u32,
    format: Format,
    sink: &mut Sink,
    ledger: &mut Vec<serde_json::Value>,
) -> Result<(), Error> {
    let t = tol("APPENDIX", 1e-8);
    let mut rows = Vec::new();
    if format == Format::Tsv {
        sink.line("chi\tomega\tU\tV\texpected_re\tcomputed_re\tcomputed_im\terr");
    }
    for n in 1..=max_cond_exp {
        for chi in MultChar::all_primitive(p, n)? {
            // single-variable law rides along via the (ju, n) column
            let triv = MultChar::trivial(p);
            for ju in 0..=n + 1 {
                for jv in 0..=n + 1 {
                    let closed = rho_uv_closed(&chi, &triv, ju, jv)
                        .ok_or_else(|| Error::BadSpec("closed table unavailable".into()))?;
                    let brute = rho_uv_brute(&chi, &triv, ju, jv, n + ju + jv)?;
                    let err = (closed - brute).norm();
                    if err > t {
                        fail(
                            ledger,
                            "appendix-table",
                            format!(
                                "chi={} (U,V)=(q^{ju},q^{jv}): expected {closed}, got {brute}",
                                chi.spec_string()
                            ),
                        );
                    }
                    match format {
                        Format::Tsv => sink.line(&format!(
                            "{}\ttrivial\t{}\t{}\t{:.12e}\t{:.12e}\t{:.12e}\t{:.3e}",
                            chi.spec_string(),
                            p.pow(ju),
                            p.pow(jv),
                            closed.re,
                            brute.re,
                            brute.im,
                            err
                        )),
                        Format::Json => rows.push(json!({
                            "chi": chi.spec_string(),
                            "U": p.pow(ju),
                            "V": p.pow(jv),
                            "expected_re": closed.re,
                            "computed_re": brute.re,
                            "computed_im": brute.im,
                            "err": err,
                        })),
                    }
                }
            }
        }
    }
    if format == Format::Json {
        sink.json(&json!({
            "schema": SCHEMA_VERSION,
            "p": p,
            "max_cond_exp": max_cond_exp,
            "tolerance": t,
            "rows": rows,
            "pass": ledger.is_empty(),
        }));
    }
    Ok(())
}

fn cmd_bench(
    p: u64,
    cond_exp: u32,
    samples: u32,
    sink: &mut Sink,
    ledger: &mut Vec<serde_json::Value>,
) -> Result<(), Error> {
    let n = cond_exp;
    if n < 3 {
        return Err(Error::BadSpec("bench needs cond_exp >= 3".into()));
    }
    let chis = MultChar::all_primitive(p, n)?;
    let mut cases = Vec::new();
    'outer: for c in 1..n {
        for omega in MultChar::all_primitive(p, c)? {
            let (ju, jv) = (n - c, n - c);
            if c + jv <= n && jv < n && n - ju >= 2 {
                cases.push((chis[cases.len() % chis.len()].clone(), omega, ju, jv));
                if cases.len() as u32 >= samples {
                    break 'outer;
                }
            }
        }
    }
    let mut t_brute = 0.0;
    let mut t_fast = 0.0;
    for (chi, omega, ju, jv) in &cases {
        let start = Instant::now();
        let fast = rho_uv_fast(chi, omega, *ju, *jv)?;
        t_fast += start.elapsed().as_secs_f64();
        let start = Instant::now();
        let brute = rho_uv_brute(chi, omega, *ju, *jv, n.max(omega.n) + ju + jv)?;
        t_brute += start.elapsed().as_secs_f64();
        let rel = (fast - brute).norm() / (1.0 + brute.norm());
        if rel > tol("BENCH", 1e-8) {
            fail(
                ledger,
                "bench-agreement",
                format!("chi={} omega={}: rel err {rel:.3e}", chi.spec_string(), omega.spec_string()),
            );
        }
    }
    let speedup = if t_fast > 0.0 { t_brute / t_fast } else { R::INFINITY };
    sink.json(&json!({
        "schema": SCHEMA_VERSION,
        "p": p,
        "cond_exp": cond_exp,
        "samples": cases.len(),
        "t_brute_s": t_brute,
        "t_fast_s": t_fast,
        "speedup": speedup,
        "agreement_pass": ledger.is_empty(),
    }));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_literals_parse() {
        assert_eq!(parse_cx("0.25").unwrap(), Cx::new(0.25, 0.0));
        assert_eq!(parse_cx("-1,2.5").unwrap(), Cx::new(-1.0, 2.5));
        assert!(parse_cx("x").is_err());
        assert!(parse_cx("1,2,3").is_err());
    }

    #[test]
    fn q_log_accepts_only_powers() {
        assert_eq!(q_log(5, 1).unwrap(), 0);
        assert_eq!(q_log(5, 125).unwrap(), 3);
        assert!(q_log(5, 10).is_err());
    }

    #[test]
    fn config_round_trips_through_serialization() {
        let cli = Cli::parse_from([
            "plocal",
            "dual-weight",
            "--chi",
            "p=5,n=3,k=1",
            "--omega",
            "p=5,n=4,k=1",
            "--jobs",
            "4",
        ]);
        let s = serde_json::to_string(&cli).unwrap();
        let back: Cli = serde_json::from_str(&s).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), s);
    }
}
