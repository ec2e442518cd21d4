use std::error::Error;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use quadlab::constructions::{
    build_divergent_energy, build_for_scan, build_frostman_necessity, default_ladder,
    verify_lower_bound, ConstructionKind, MixtureParams,
};
use quadlab::harness::{
    fit_exponent, init_worker_pool, ladder_for, parse_dyadic, parse_ladder, run_scan,
    write_report, MeasureSpec, ScanConfig, ScanReport,
};
use quadlab::incidence::{count_incidences, count_incidences_brute, LineFamily, PointSet2D};
use quadlab::measure::{nonconcentration_check, DiscreteMeasure};
use quadlab::quadpoly::{Class, CriticalSet, QuadPoly};

#[derive(Parser)]
#[command(
    name = "quadlab",
    version,
    about = "Quadratic images of product measures: discretized measures, smoothed L2 energies, incidence counts, exponent scans"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify a quadratic polynomial and report its critical set.
    Classify {
        /// Preset name or JSON coefficient object.
        #[arg(long)]
        poly: String,
    },
    /// Build or inspect discretized measures.
    #[command(subcommand)]
    Measure(MeasureCmd),
    /// Energy pipeline scans.
    #[command(subcommand)]
    Energy(EnergyCmd),
    /// Point-line incidence counting.
    #[command(subcommand)]
    Incidence(IncidenceCmd),
    /// Build an obstruction measure and write it as CSV.
    Construct {
        /// frostman-necessity | unbounded-support | divergent-energy
        #[arg(long)]
        kind: String,
        #[arg(long, default_value_t = 0.25)]
        alpha: f64,
        /// Dyadic pitch, e.g. 2^-12.
        #[arg(long)]
        delta: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a construction down a ladder and test its claimed exponent.
    Verify {
        /// frostman-necessity | unbounded-support | divergent-energy
        #[arg(long)]
        kind: String,
        #[arg(long, default_value_t = 0.25)]
        alpha: f64,
        /// Dyadic range like 2^-6..2^-12; defaults to the kind's ladder.
        #[arg(long)]
        ladder: Option<String>,
        #[arg(long, default_value_t = 0.25)]
        kappa: f64,
        #[arg(long)]
        timings: bool,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Fit a log-log slope to a column of a scan CSV.
    Fit {
        #[arg(long)]
        file: PathBuf,
        #[arg(long, default_value = "energy")]
        column: String,
    },
}

#[derive(Subcommand)]
enum MeasureCmd {
    /// Build the self-similar measure at the given depth.
    Build {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        depth: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Report concentration statistics of a measure CSV.
    Check {
        #[arg(long)]
        file: PathBuf,
        /// Exponent to test; defaults to the file's alpha hint.
        #[arg(long)]
        alpha: Option<f64>,
    },
}

#[derive(Subcommand)]
enum EnergyCmd {
    /// Run the pushforward/energy/coincidence pipeline down a ladder.
    Scan(ScanArgs),
}

#[derive(Args)]
struct ScanArgs {
    /// JSON config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    poly: Option<String>,
    /// cantor | frostman-necessity | unbounded-support | divergent-energy | file
    #[arg(long)]
    measure: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Measure CSV path when --measure file.
    #[arg(long)]
    file: Option<PathBuf>,
    #[arg(long)]
    delta_max: Option<String>,
    #[arg(long)]
    delta_min: Option<String>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    timings: bool,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Subcommand)]
enum IncidenceCmd {
    /// Count delta-incidences between a point CSV and a line CSV.
    Count {
        #[arg(long)]
        points: PathBuf,
        #[arg(long)]
        lines: PathBuf,
        /// Incidence scale, e.g. 2^-8.
        #[arg(long)]
        delta: String,
        /// Also run the quadratic-time count and require exact agreement.
        #[arg(long)]
        check: bool,
    },
    /// Time the grid count against brute force on a random instance.
    Bench {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 600)]
        points: usize,
        #[arg(long, default_value_t = 400)]
        lines: usize,
        #[arg(long, default_value = "2^-8")]
        delta: String,
    },
}

fn main() {
    init_worker_pool();
    let cli = Cli::parse();
    if let Err(e) = run(cli.command) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn run(command: Command) -> Result<(), Box<dyn Error>> {
    match command {
        Command::Classify { poly } => classify(&poly),
        Command::Measure(cmd) => measure(cmd),
        Command::Energy(EnergyCmd::Scan(args)) => scan(args),
        Command::Incidence(cmd) => incidence(cmd),
        Command::Construct { kind, alpha, delta, out } => construct(&kind, alpha, &delta, out),
        Command::Verify { kind, alpha, ladder, kappa, timings, csv, svg } => {
            verify(&kind, alpha, ladder.as_deref(), kappa, timings, csv, svg)
        }
        Command::Fit { file, column } => fit(&file, &column),
    }
}

fn classify(text: &str) -> Result<(), Box<dyn Error>> {
    let f = QuadPoly::parse(text)?;
    let class = f.classify()?;
    let label = match class {
        Class::NonDegenerate => "non-degenerate",
        Class::Degenerate => "degenerate",
        Class::MissingVariable => "variable-dropping",
    };
    println!("class: {label}");
    if class == Class::NonDegenerate {
        match f.critical_set(None)? {
            CriticalSet::Empty => println!("critical set: empty"),
            CriticalSet::Point(p) => {
                println!("critical set: point ({:.6}, {:.6}, {:.6})", p[0], p[1], p[2])
            }
            CriticalSet::Line { point, direction } => println!(
                "critical set: line through ({:.6}, {:.6}, {:.6}) along ({:.6}, {:.6}, {:.6})",
                point[0], point[1], point[2], direction[0], direction[1], direction[2]
            ),
        }
    }
    Ok(())
}

fn measure(cmd: MeasureCmd) -> Result<(), Box<dyn Error>> {
    match cmd {
        MeasureCmd::Build { alpha, depth, out } => {
            let mu = DiscreteMeasure::build_cantor(alpha, depth)?;
            let csv = mu.to_csv(Some(alpha));
            match out {
                Some(path) => {
                    fs::write(&path, csv)?;
                    println!(
                        "wrote {} atoms at pitch {:e} to {}",
                        mu.len(),
                        mu.delta(),
                        path.display()
                    );
                }
                None => print!("{csv}"),
            }
            Ok(())
        }
        MeasureCmd::Check { file, alpha } => {
            let text = fs::read_to_string(&file)?;
            let (mu, hint) = DiscreteMeasure::from_csv(&text)?;
            let alpha = alpha.or(hint).ok_or("no alpha given and the file has no hint")?;
            println!("atoms: {}", mu.len());
            println!("pitch: {:e}", mu.delta());
            println!("total mass: {:.12}", mu.total_mass());
            println!("support diameter: {:.6}", mu.support_diameter());
            println!("frostman constant at alpha {alpha}: {:.6}", mu.frostman_constant(alpha));
            let (lower, upper) = mu.ad_regular_check(alpha);
            println!(
                "ad-regular sandwich: (2r)^a / {:.6} <= window mass <= {:.6} (2r)^a",
                lower, upper
            );
            let report =
                nonconcentration_check(&mu.index_set(), mu.delta(), alpha, f64::INFINITY);
            println!("support window ratio sup: {:.6}", report.max_ratio);
            Ok(())
        }
    }
}

fn parse_measure_spec(
    kind: &str,
    alpha: Option<f64>,
    file: Option<&PathBuf>,
) -> Result<MeasureSpec, Box<dyn Error>> {
    let need_alpha = || alpha.ok_or(format!("--measure {kind} needs --alpha"));
    Ok(match kind {
        "cantor" => MeasureSpec::Cantor { alpha: need_alpha()? },
        "frostman-necessity" => MeasureSpec::FrostmanNecessity { alpha: need_alpha()? },
        "unbounded-support" => MeasureSpec::UnboundedSupport,
        "divergent-energy" => MeasureSpec::DivergentEnergy { alpha: need_alpha()? },
        "file" => MeasureSpec::File {
            path: file
                .ok_or("--measure file needs --file")?
                .to_string_lossy()
                .into_owned(),
            alpha,
        },
        other => return Err(format!("unknown measure kind {other:?}").into()),
    })
}

fn scan(args: ScanArgs) -> Result<(), Box<dyn Error>> {
    let mut cfg = match &args.config {
        Some(path) => ScanConfig::from_json(&fs::read_to_string(path)?)?,
        None => ScanConfig {
            poly: String::new(),
            measure: MeasureSpec::Cantor { alpha: 0.5 },
            delta_max: "2^-6".into(),
            delta_min: "2^-12".into(),
            kappa: 0.25,
            seed: 0,
            timings: false,
        },
    };
    if let Some(poly) = args.poly {
        cfg.poly = poly;
    }
    if let Some(kind) = &args.measure {
        cfg.measure = parse_measure_spec(kind, args.alpha, args.file.as_ref())?;
    } else if let Some(alpha) = args.alpha {
        match &mut cfg.measure {
            MeasureSpec::Cantor { alpha: a }
            | MeasureSpec::FrostmanNecessity { alpha: a }
            | MeasureSpec::DivergentEnergy { alpha: a } => *a = alpha,
            MeasureSpec::File { alpha: a, .. } => *a = Some(alpha),
            MeasureSpec::UnboundedSupport => {}
        }
    }
    if let Some(d) = args.delta_max {
        cfg.delta_max = d;
    }
    if let Some(d) = args.delta_min {
        cfg.delta_min = d;
    }
    if let Some(k) = args.kappa {
        cfg.kappa = k;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if args.timings {
        cfg.timings = true;
    }
    if cfg.poly.is_empty() {
        return Err("no polynomial: pass --poly or a config file".into());
    }
    let report = run_scan(&cfg)?;
    print_report(&report);
    write_report(&report, args.csv.as_deref(), args.svg.as_deref())?;
    Ok(())
}

fn print_report(report: &ScanReport) {
    println!("delta       energy        energy/delta^claimed  cover");
    for (row, (_, ratio)) in report.rows.iter().zip(report.ratios()) {
        println!(
            "{:<11e} {:<13.6} {:<21.6} {}",
            row.delta, row.energy, ratio, row.cover_holds
        );
    }
    match report.fit {
        Some(fit) => println!(
            "slope: {:.4} (claimed {:.4}, r2 {:.4})",
            fit.slope, report.claimed_exponent, fit.r_squared
        ),
        None => println!("slope: not fitted (fewer than 3 ladder points)"),
    }
    if let Some(eps) = report.epsilon_hat {
        println!("epsilon-hat: {:.4}", eps);
    }
    println!("verdict: {}", report.verdict);
}

fn incidence(cmd: IncidenceCmd) -> Result<(), Box<dyn Error>> {
    match cmd {
        IncidenceCmd::Count { points, lines, delta, check } => {
            let p = PointSet2D::from_csv(&fs::read_to_string(&points)?)?;
            let l = LineFamily::from_csv(&fs::read_to_string(&lines)?)?;
            let delta = parse_dyadic(&delta)?;
            let count = count_incidences(&p, &l, delta);
            println!("incidences: {count}");
            if check {
                let brute = count_incidences_brute(&p, &l, delta);
                if brute != count {
                    return Err(
                        format!("grid count {count} disagrees with brute {brute}").into()
                    );
                }
                println!("brute agreement: ok");
            }
            Ok(())
        }
        IncidenceCmd::Bench { seed, points, lines, delta } => {
            let delta = parse_dyadic(&delta)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<(f64, f64)> =
                (0..points).map(|_| (rng.gen::<f64>(), rng.gen::<f64>())).collect();
            let p = PointSet2D::from_points(pts);
            let ls: Vec<quadlab::incidence::PlanarLine> = (0..lines)
                .map(|_| {
                    quadlab::incidence::PlanarLine::new(
                        rng.gen::<f64>() * std::f64::consts::TAU,
                        rng.gen::<f64>() * std::f64::consts::SQRT_2,
                    )
                })
                .collect();
            let l = LineFamily::from_lines(ls);
            let t0 = Instant::now();
            let grid = count_incidences(&p, &l, delta);
            let grid_ms = t0.elapsed().as_secs_f64() * 1e3;
            let t0 = Instant::now();
            let brute = count_incidences_brute(&p, &l, delta);
            let brute_ms = t0.elapsed().as_secs_f64() * 1e3;
            println!("grid:  {grid} incidences in {grid_ms:.2} ms");
            println!("brute: {brute} incidences in {brute_ms:.2} ms");
            if grid != brute {
                return Err("grid and brute force disagree".into());
            }
            println!("agreement: ok");
            Ok(())
        }
    }
}

fn construct(
    kind: &str,
    alpha: f64,
    delta: &str,
    out: Option<PathBuf>,
) -> Result<(), Box<dyn Error>> {
    let kind: ConstructionKind = kind.parse()?;
    let delta = parse_dyadic(delta)?;
    let params = MixtureParams::default_for_kernel();
    let mu = build_for_scan(kind, alpha, delta, &params)?;
    match kind {
        ConstructionKind::FrostmanNecessity => {
            let (_, report) = build_frostman_necessity(alpha, delta, &params)?;
            eprintln!(
                "window admissibility: {:.3e} <= {:.3e}: {}",
                report.lhs, report.rhs, report.holds
            );
        }
        ConstructionKind::DivergentEnergy => {
            let (_, family) = build_divergent_energy(alpha, delta)?;
            eprintln!(
                "interval family: {} intervals of length {:e}, masses [{:.3e}, {:.3e}]",
                family.count, family.length, family.mass_min, family.mass_max
            );
        }
        ConstructionKind::UnboundedSupport => {
            eprintln!("support diameter: {:.1}", mu.support_diameter());
        }
    }
    let hint = match kind {
        ConstructionKind::UnboundedSupport => 0.5,
        _ => alpha,
    };
    let csv = mu.to_csv(Some(hint));
    match out {
        Some(path) => {
            fs::write(&path, csv)?;
            println!("wrote {} atoms at pitch {:e} to {}", mu.len(), mu.delta(), path.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn verify(
    kind: &str,
    alpha: f64,
    ladder: Option<&str>,
    kappa: f64,
    timings: bool,
    csv: Option<PathBuf>,
    svg: Option<PathBuf>,
) -> Result<(), Box<dyn Error>> {
    let kind: ConstructionKind = kind.parse()?;
    let points = match ladder {
        Some(text) => {
            let (delta_max, delta_min) = parse_ladder(text)?;
            let spec = match kind {
                ConstructionKind::FrostmanNecessity => MeasureSpec::FrostmanNecessity { alpha },
                ConstructionKind::UnboundedSupport => MeasureSpec::UnboundedSupport,
                ConstructionKind::DivergentEnergy => MeasureSpec::DivergentEnergy { alpha },
            };
            ladder_for(&spec, delta_max, delta_min)
        }
        None => default_ladder(kind, alpha),
    };
    let report = verify_lower_bound(
        kind,
        alpha,
        &points,
        &MixtureParams::default_for_kernel(),
        kappa,
        timings,
    )?;
    print_report(&report);
    write_report(&report, csv.as_deref(), svg.as_deref())?;
    Ok(())
}

fn fit(file: &PathBuf, column: &str) -> Result<(), Box<dyn Error>> {
    let text = fs::read_to_string(file)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty file")?;
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    let delta_idx = names
        .iter()
        .position(|&n| n == "delta")
        .ok_or("no delta column in header")?;
    let value_idx = names
        .iter()
        .position(|&n| n == column)
        .ok_or_else(|| format!("no column {column:?} in header"))?;
    let mut pairs = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let get = |idx: usize| -> Result<f64, Box<dyn Error>> {
            Ok(fields
                .get(idx)
                .ok_or(format!("line {}: missing field {idx}", lineno + 2))?
                .trim()
                .parse::<f64>()?)
        };
        pairs.push((get(delta_idx)?, get(value_idx)?));
    }
    let fit = fit_exponent(&pairs)?;
    println!("points: {}", pairs.len());
    println!("slope: {:.6}", fit.slope);
    println!("intercept: {:.6}", fit.intercept);
    println!("r2: {:.6}", fit.r_squared);
    Ok(())
}
