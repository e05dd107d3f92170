use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ozf::io::{
    self, AnalysisRecord, CertificateFile, FdiFile, GainFile, MultiplierFile, VerifyFile,
};
use ozf::lti::{nyquist_value, StateSpaceModel};
use ozf::lure::{
    destabilize, gain_lower_bound, simulate_lifted_loop, verify_certificate, DestabilizeOptions,
};
use ozf::margin::{build_margin_problem, solve_margin_lp_with, MarginOptions};
use ozf::multiplier::{
    certify_fdi_adaptive, fir_truncate, plot_data, synth_oversampled, verify_fdi_grid,
    AdaptiveOptions, ZFMultiplier,
};
use ozf::signal::Signal;
use ozf::sweep::{
    assess_kappa, certify_kappa, first_degenerate_n, kappa_threshold, SweepOptions, Verdict,
};
use ozf::{plants, Error};
use serde_json::json;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_NEGATIVE: u8 = 2;
const EXIT_VERIFY_FAILED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "ozf",
    version,
    about = "Zames-Falb multiplier analysis for discrete-time Lur'e systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Margin LP over N, or a threshold sweep over kappa when --kappa is omitted.
    Analyze(AnalyzeArgs),
    /// Largest kappa before the Nyquist plot of G reaches 1/kappa.
    NyquistValue(PlantArg),
    /// Synthesize and certify a piecewise-linear multiplier.
    Synth(SynthArgs),
    /// Construct, verify and emit a destabilizing nonlinearity.
    Destabilize(DestabilizeArgs),
    /// Re-check a certificate file.
    Verify(VerifyArgs),
    /// Simulate the loop of a certificate.
    Simulate(SimulateArgs),
    /// Emit Nyquist-style plot data.
    Plot(PlotArgs),
    /// Reproduce the reference example end to end.
    ReproduceExample(ReproduceArgs),
}

#[derive(Args)]
struct PlantArg {
    /// Plant JSON file.
    #[arg(long)]
    plant: PathBuf,
}

#[derive(Args, Clone)]
struct LpArgs {
    /// Below this t* the exact rational recheck runs.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Always recheck in exact arithmetic.
    #[arg(long)]
    exact: bool,
}

impl LpArgs {
    fn options(&self) -> MarginOptions {
        MarginOptions {
            exact: self.exact,
            zero_threshold: self.tol,
            ..Default::default()
        }
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    plant: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    kappa: Option<f64>,
    #[arg(long, conflicts_with = "nmax")]
    n: Option<usize>,
    #[arg(long, default_value_t = 12)]
    nmax: usize,
    #[command(flatten)]
    lp: LpArgs,
    /// Refine the threshold bracket to 1e-3.
    #[arg(long)]
    refine: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    plant: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    kappa: f64,
    /// Fixed node count; otherwise the ladder 10, 20, ..., 320 is tried.
    #[arg(long)]
    n: Option<usize>,
    /// Constraint points per arc.
    #[arg(long, default_value_t = 4)]
    oversample: usize,
    /// FIR window KMIN:KMAX attached to the emitted multiplier.
    #[arg(long, value_parser = parse_window, allow_hyphen_values = true)]
    fir: Option<(i64, i64)>,
    #[command(flatten)]
    lp: LpArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DestabilizeArgs {
    #[arg(long)]
    plant: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    kappa: f64,
    #[arg(long, conflicts_with = "nmax")]
    n: Option<usize>,
    #[arg(long, default_value_t = 12)]
    nmax: usize,
    /// Largest acceptable t*.
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    #[command(flatten)]
    lp: LpArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Certificate JSON file.
    #[arg(long)]
    cert: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    cert: PathBuf,
    /// Steps to simulate; defaults to 10 periods.
    #[arg(long)]
    steps: Option<usize>,
    /// Horizon of the gain estimate; defaults to 200 periods.
    #[arg(long)]
    horizon: Option<usize>,
    /// Signal CSV replacing the certificate's u1 channel.
    #[arg(long)]
    u1: Option<PathBuf>,
    /// Signal CSV replacing the certificate's u2 channel.
    #[arg(long)]
    u2: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    plant: PathBuf,
    /// Multiplier JSON file; otherwise one is synthesized from --kappa and --n.
    #[arg(long, conflicts_with_all = ["kappa", "n"])]
    multiplier: Option<PathBuf>,
    #[arg(long, requires = "n", allow_hyphen_values = true)]
    kappa: Option<f64>,
    #[arg(long, requires = "kappa")]
    n: Option<usize>,
    #[arg(long, default_value_t = 4)]
    oversample: usize,
    /// FIR windows KMIN:KMAX, one curve each.
    #[arg(long, value_parser = parse_window, allow_hyphen_values = true)]
    fir: Vec<(i64, i64)>,
    #[arg(long, default_value_t = 2048)]
    points: usize,
    /// Also write SVG polylines.
    #[arg(long)]
    svg: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReproduceArgs {
    /// Check only kappa = 1.80 and 2.00 instead of sweeping.
    #[arg(long)]
    quick: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_window(s: &str) -> std::result::Result<(i64, i64), String> {
    let (a, b) = s.split_once(':').ok_or("expected KMIN:KMAX")?;
    let kmin: i64 = a.trim().parse().map_err(|e| format!("KMIN: {e}"))?;
    let kmax: i64 = b.trim().parse().map_err(|e| format!("KMAX: {e}"))?;
    if kmin > kmax {
        return Err("KMIN must not exceed KMAX".into());
    }
    Ok((kmin, kmax))
}

fn check_kappa(kappa: f64) -> Result<()> {
    if !(kappa > 0.0) {
        bail!("kappa must be positive, got {kappa}");
    }
    Ok(())
}

fn check_n(n: usize) -> Result<()> {
    if !(1..=512).contains(&n) {
        bail!("N must lie in 1..=512, got {n}");
    }
    Ok(())
}

fn load_plant(path: &Path) -> Result<StateSpaceModel> {
    io::read_plant(path).with_context(|| format!("reading plant {}", path.display()))
}

fn out_dir(out: &Option<PathBuf>) -> Result<Option<&Path>> {
    if let Some(dir) = out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(out.as_deref())
}

fn emit<T: serde::Serialize>(value: &T, dir: Option<&Path>, file: &str) -> Result<()> {
    let text = io::to_json(value)?;
    if let Some(d) = dir {
        fs::write(d.join(file), &text)?;
    }
    print!("{text}");
    Ok(())
}

fn verdict_json(kappa: f64, v: &Verdict) -> serde_json::Value {
    match v {
        Verdict::Certified {
            n,
            report,
            lp_margin,
            ..
        } => json!({
            "kappa": kappa, "verdict": "certified", "N": n,
            "lp_margin": lp_margin, "certified_margin": report.certified_margin,
        }),
        Verdict::Refuted { n } => json!({"kappa": kappa, "verdict": "refuted", "N": n}),
        Verdict::Undecided => json!({"kappa": kappa, "verdict": "undecided"}),
    }
}

fn analyze(a: AnalyzeArgs) -> Result<u8> {
    let ss = load_plant(&a.plant)?;
    let dir = out_dir(&a.out)?;
    let Some(kappa) = a.kappa else {
        let opts = SweepOptions {
            refine: a.refine,
            margin: a.lp.options(),
            ..Default::default()
        };
        let r = kappa_threshold(&ss, &opts)?;
        eprintln!(
            "largest certified kappa {}, smallest refuted {:?}, threshold {}",
            r.largest_certified, r.smallest_refuted, r.threshold
        );
        let evals: Vec<_> = r
            .evaluations
            .iter()
            .map(|(k, v)| verdict_json(*k, v))
            .collect();
        let doc = json!({
            "largest_certified": r.largest_certified,
            "smallest_refuted": r.smallest_refuted,
            "threshold": r.threshold,
            "evaluations": evals,
        });
        emit(&doc, dir, "sweep.json")?;
        return Ok(0);
    };
    check_kappa(kappa)?;
    let ns: Vec<usize> = match a.n {
        Some(n) => vec![n],
        None => (1..=a.nmax).collect(),
    };
    for &n in &ns {
        check_n(n)?;
    }
    let opts = a.lp.options();
    let mut records = Vec::new();
    let mut degenerate = None;
    for n in ns {
        let p = build_margin_problem(&ss, n, kappa)?;
        let s = solve_margin_lp_with(&p, &opts)?;
        eprintln!(
            "N = {n:3}  t* = {:.6e}{}",
            s.primal.t_star,
            if s.certified_zero {
                "  (certified zero)"
            } else {
                ""
            }
        );
        records.push(AnalysisRecord::new(&p, &s));
        if s.certified_zero {
            degenerate = Some(n);
            break;
        }
    }
    emit(&records, dir, "analysis.json")?;
    Ok(match degenerate {
        Some(n) => {
            eprintln!("t* = 0 at N = {n}: no multiplier of this class certifies kappa = {kappa}");
            EXIT_NEGATIVE
        }
        None => 0,
    })
}

fn nyquist(a: PlantArg) -> Result<u8> {
    let ss = load_plant(&a.plant)?;
    println!("{}", io::fmt17(nyquist_value(&ss, 1 << 14)?));
    Ok(0)
}

fn synth(a: SynthArgs) -> Result<u8> {
    check_kappa(a.kappa)?;
    let ss = load_plant(&a.plant)?;
    let dir = out_dir(&a.out)?;
    let margin = a.lp.options();
    let found = match a.n {
        Some(n) => {
            check_n(n)?;
            match synth_oversampled(&ss, a.kappa, n, a.oversample, &margin) {
                Ok((m, t)) => {
                    let report =
                        certify_fdi_adaptive(&m, &ss, a.kappa, &AdaptiveOptions::default())?;
                    Some((n, m, report, t))
                }
                Err(Error::NoMultiplier { .. }) | Err(Error::DegenerateMultiplier) => None,
                Err(e) => return Err(e.into()),
            }
        }
        None => {
            let opts = SweepOptions {
                oversample: a.oversample,
                margin,
                ..Default::default()
            };
            match certify_kappa(&ss, a.kappa, &opts)? {
                Some(Verdict::Certified {
                    n,
                    multiplier,
                    report,
                    lp_margin,
                }) => Some((n, multiplier, report, lp_margin)),
                _ => None,
            }
        }
    };
    let Some((n, mut m, report, t)) = found else {
        eprintln!("no multiplier found for kappa = {}", a.kappa);
        return Ok(EXIT_NEGATIVE);
    };
    if let Some((kmin, kmax)) = a.fir {
        m = fir_truncate(&m, kmin, kmax);
    }
    let grid = verify_fdi_grid(&m, &ss, a.kappa, 2048)?;
    eprintln!(
        "N = {n}, LP margin {t:.6e}, grid margin {:.6e}, certified margin {:.6e}, {}",
        grid.worst_margin,
        report.certified_margin,
        if report.pass {
            "certified"
        } else {
            "not certified"
        }
    );
    let mf = MultiplierFile::from_multiplier(&m);
    let ff = FdiFile::from(&report);
    if let Some(d) = dir {
        io::write_json(&d.join("multiplier.json"), &mf)?;
        io::write_json(&d.join("fdi.json"), &ff)?;
    }
    let doc = json!({"kappa": a.kappa, "N": n, "lp_margin": t, "multiplier": mf, "fdi": ff, "grid": FdiFile::from(&grid)});
    emit(&doc, None, "")?;
    Ok(if report.pass { 0 } else { EXIT_NEGATIVE })
}

fn destabilize_cmd(a: DestabilizeArgs) -> Result<u8> {
    check_kappa(a.kappa)?;
    if let Some(n) = a.n {
        check_n(n)?;
    }
    let ss = load_plant(&a.plant)?;
    let dir = out_dir(&a.out)?;
    let opts = DestabilizeOptions {
        eps: a.eps,
        nmax: a.nmax,
        n: a.n,
        margin: a.lp.options(),
        ..Default::default()
    };
    let c = match destabilize(&ss, a.kappa, &opts) {
        Ok(c) => c,
        Err(e @ Error::NoDestabilizingCertificate { .. }) => {
            eprintln!("refused: {e}");
            return Ok(EXIT_NEGATIVE);
        }
        Err(e) => return Err(e.into()),
    };
    let report = verify_certificate(&c)?;
    let gain = gain_lower_bound(&c, 200 * c.period)?;
    eprintln!(
        "N = {}, d = {}, t* = {:e}, gain lower bound {}, worst residual {:.3e}",
        c.period,
        c.d,
        c.t_star,
        io::fmt17(gain.lower_bound),
        report.worst_residual
    );
    if let Some(d) = dir {
        io::write_json(&d.join("gain.json"), &GainFile::from(&gain))?;
        io::write_json(&d.join("verify.json"), &VerifyFile::from(&report))?;
    }
    emit(
        &CertificateFile::from_certificate(&c),
        dir,
        "certificate.json",
    )?;
    if !report.pass {
        eprintln!("verification failed; certificate dumped for inspection");
        return Ok(EXIT_VERIFY_FAILED);
    }
    Ok(0)
}

fn load_certificate(path: &Path) -> Result<ozf::lure::LoopCertificate> {
    let file: CertificateFile =
        io::read_json(path).with_context(|| format!("reading certificate {}", path.display()))?;
    Ok(file.to_certificate()?)
}

fn verify_cmd(a: VerifyArgs) -> Result<u8> {
    let c = load_certificate(&a.cert)?;
    let dir = out_dir(&a.out)?;
    let report = verify_certificate(&c)?;
    eprintln!(
        "{}: worst residual {:.3e}{}",
        if report.pass { "valid" } else { "invalid" },
        report.worst_residual,
        if report.trivial { " (trivial)" } else { "" }
    );
    emit(&VerifyFile::from(&report), dir, "verify.json")?;
    Ok(if report.pass { 0 } else { EXIT_VERIFY_FAILED })
}

fn simulate_cmd(a: SimulateArgs) -> Result<u8> {
    let c = load_certificate(&a.cert)?;
    let dir = out_dir(&a.out)?;
    let steps = a.steps.unwrap_or(10 * c.period);
    let read =
        |p: &Option<PathBuf>, default: Signal| -> Result<Signal> {
            match p {
                Some(path) => Ok(io::read_signal_csv(path)
                    .with_context(|| format!("reading {}", path.display()))?),
                None => Ok(default),
            }
        };
    let u1 = read(&a.u1, c.u1())?;
    let u2 = read(&a.u2, c.u2())?;
    for (name, s) in [("u1", &u1), ("u2", &u2)] {
        if s.dim() != c.d {
            bail!(
                "{name} has {} components, the loop has d = {}",
                s.dim(),
                c.d
            );
        }
    }
    let (e1, e2) = simulate_lifted_loop(&c.plant, &c.nonlinearity, &u1, &u2, &c.xi0, steps)?;
    let (p1, p2) = (c.e1(), c.e2());
    let drift = (0..steps)
        .map(|k| {
            (e1.at(k) - p1.at(k))
                .amax()
                .max((e2.at(k) - p2.at(k)).amax())
        })
        .fold(0.0f64, f64::max);
    eprintln!("{steps} steps, largest deviation from the certified oscillation {drift:.3e}");
    let gain = gain_lower_bound(&c, a.horizon.unwrap_or(200 * c.period))?;
    if let Some(d) = dir {
        io::write_trajectory_csv(&d.join("trajectory.csv"), &e1, &e2)?;
    }
    emit(&GainFile::from(&gain), dir, "gain.json")?;
    Ok(0)
}

fn plot_cmd(a: PlotArgs) -> Result<u8> {
    let ss = load_plant(&a.plant)?;
    fs::create_dir_all(&a.out)?;
    let m: ZFMultiplier = match (&a.multiplier, a.kappa, a.n) {
        (Some(path), _, _) => io::read_json::<MultiplierFile>(path)?.to_multiplier()?,
        (None, Some(kappa), Some(n)) => {
            check_kappa(kappa)?;
            check_n(n)?;
            synth_oversampled(&ss, kappa, n, a.oversample, &MarginOptions::default())?.0
        }
        _ => bail!("plot needs --multiplier or both --kappa and --n"),
    };
    if a.points == 0 {
        bail!("--points must be positive");
    }
    let mut files = vec![
        "plant.csv".to_string(),
        "multiplier.csv".to_string(),
        "multiplier.json".to_string(),
    ];
    io::write_response_csv(&a.out.join("plant.csv"), &ss, a.points)?;
    let rows = plot_data(&m, &ss, a.points)?;
    io::write_plot_csv(&a.out.join("multiplier.csv"), &rows)?;
    io::write_json(
        &a.out.join("multiplier.json"),
        &MultiplierFile::from_multiplier(&m),
    )?;
    if a.svg {
        fs::write(a.out.join("multiplier.svg"), io::plot_svg(&rows))?;
        files.push("multiplier.svg".into());
    }
    let mut windows = Vec::new();
    for &(kmin, kmax) in &a.fir {
        let f = fir_truncate(&m, kmin, kmax);
        let rows = plot_data(&f, &ss, a.points)?;
        let name = format!("fir_{kmin}_{kmax}");
        io::write_plot_csv(&a.out.join(format!("{name}.csv")), &rows)?;
        files.push(format!("{name}.csv"));
        if a.svg {
            fs::write(a.out.join(format!("{name}.svg")), io::plot_svg(&rows))?;
            files.push(format!("{name}.svg"));
        }
        let tail = f.fir.as_ref().map_or(0.0, |w| w.tail_bound);
        windows.push(json!({"kmin": kmin, "kmax": kmax, "tail_bound": tail}));
    }
    emit(
        &json!({"points": a.points, "files": files, "fir": windows}),
        None,
        "",
    )?;
    Ok(0)
}

fn reproduce(a: ReproduceArgs) -> Result<u8> {
    let ss = plants::example();
    let dir = out_dir(&a.out)?;
    let mut ok = true;
    let mut line = |name: &str, value: String, expected: &str, pass: bool| {
        ok &= pass;
        println!(
            "{name:<28} {value:<24} {expected:<26} {}",
            if pass { "ok" } else { "MISMATCH" }
        );
    };
    let nyq = nyquist_value(&ss, 1 << 14)?;
    line(
        "nyquist value",
        format!("{nyq:.4}"),
        "2.17 +/- 0.02",
        (nyq - 2.17).abs() <= 0.02,
    );
    let opts = SweepOptions::default();
    let threshold = if a.quick {
        let low = assess_kappa(&ss, 1.80, &opts)?.is_certified();
        let high = assess_kappa(&ss, 2.00, &opts)?.is_refuted();
        line(
            "kappa 1.80 / 2.00",
            format!(
                "{} / {}",
                verdict(low, "certified"),
                verdict(high, "refuted")
            ),
            "certified / refuted",
            low && high,
        );
        None
    } else {
        let r = kappa_threshold(&ss, &opts)?;
        line(
            "largest certified kappa",
            format!("{:.2}", r.largest_certified),
            "1.86 +/- 0.02",
            (r.largest_certified - 1.86).abs() <= 0.02 + 1e-12,
        );
        Some(r.largest_certified)
    };
    let first = first_degenerate_n(&ss, 2.0, 12, &MarginOptions::default())?;
    line(
        "first N with t* = 0 at 2.0",
        first.map_or("none".into(), |n| n.to_string()),
        "5",
        first == Some(5),
    );
    let c = destabilize(&ss, 2.0, &DestabilizeOptions::default())?;
    line("certificate dimension d", c.d.to_string(), "<= 5", c.d <= 5);
    let report = verify_certificate(&c)?;
    line(
        "oscillation residual",
        format!("{:.3e}", report.worst_residual),
        "<= 1e-8, verified",
        report.pass,
    );
    if let Some(d) = dir {
        let doc = json!({
            "nyquist_value": nyq,
            "largest_certified": threshold,
            "first_degenerate_n": first,
            "d": c.d,
            "worst_residual": report.worst_residual,
            "pass": ok,
        });
        io::write_json(&d.join("reproduce.json"), &doc)?;
        io::write_json(
            &d.join("certificate.json"),
            &CertificateFile::from_certificate(&c),
        )?;
    }
    Ok(if ok { 0 } else { 1 })
}

fn verdict(b: bool, word: &str) -> String {
    if b {
        word.to_string()
    } else {
        format!("not {word}")
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Analyze(a) => analyze(a),
        Command::NyquistValue(a) => nyquist(a),
        Command::Synth(a) => synth(a),
        Command::Destabilize(a) => destabilize_cmd(a),
        Command::Verify(a) => verify_cmd(a),
        Command::Simulate(a) => simulate_cmd(a),
        Command::Plot(a) => plot_cmd(a),
        Command::ReproduceExample(a) => reproduce(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
