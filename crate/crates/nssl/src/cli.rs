//! Command-line front end.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nssl_core::detector::{concentration_series, oscillation_series, Criterion, Thresholds, DEFAULT_C_EMB};
use nssl_core::field::BallStencil;
use nssl_core::invariants::invariants;
use nssl_core::lorentz::DistributionCurve;
use nssl_core::morrey::{level_set_floor_measure, morrey_sup, DEFAULT_LEVEL_SET_FLOOR_CELLS};
use nssl_core::synth::generate;
use nssl_core::{BallSpec, CylinderSpec, SampledField};

use crate::config::{Exponent, GenSpecJson, Lattice, RunConfig};
use crate::io::{load, save};
use crate::records::{
    write_distribution_csv, write_json_line, write_morrey_csv, write_series_csv, InvariantRecord, VerdictRecord,
};
use crate::scan::scan;
use crate::spectral::with_spectral_pressure;
use crate::verify::{run_verify, VerifyOptions};

#[derive(Debug, Parser)]
#[command(name = "nssl", version, about = "Scale-invariant diagnostics and concentration detectors for sampled velocity fields")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Input file (generator JSON for `gen`, NSSF1 otherwise).
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    #[arg(long, global = true)]
    pub eps_star: Option<f64>,
    /// Defaults to δ / C_emb.
    #[arg(long, global = true)]
    pub delta_star: Option<f64>,
    #[arg(long, global = true)]
    pub c_cal: Option<f64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Lattice JSON, inline or a path.
    #[arg(long, global = true)]
    pub lattice: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write an NSSF1 field from a generator spec.
    Gen,
    /// Weak, Lorentz and Morrey norms as CSV.
    Norms(NormsArgs),
    /// A, B, C, D on each lattice cylinder as JSON lines.
    Invariants,
    /// Detector verdicts over the lattice as JSON lines.
    Scan(CurveArgs),
    /// Run the property-oracle suite and report measured constants.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Args)]
pub struct NormsArgs {
    /// Time (without --lattice); defaults to the last sample.
    #[arg(long)]
    pub t: Option<f64>,
    /// Ball centre `x,y,z` (without --lattice); defaults to the box centre.
    #[arg(long, value_parser = parse_point)]
    pub x0: Option<[f64; 3]>,
    /// Ball radius (without --lattice).
    #[arg(long)]
    pub r: Option<f64>,
    /// Exponent, `inf` allowed (without --lattice).
    #[arg(long, default_value = "3")]
    pub p: String,
    #[command(flatten)]
    pub curves: CurveArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CurveArgs {
    /// Directory for per-point CSV curves.
    #[arg(long)]
    pub curves: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = DEFAULT_C_EMB)]
    pub c_emb: f64,
    /// Number of random divergence-free fields in the embedding corpus.
    #[arg(long, default_value_t = 100)]
    pub random_fields: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Nssf(#[from] crate::io::NssfError),
    #[error(transparent)]
    Core(#[from] nssl_core::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

impl Common {
    pub fn thresholds(&self) -> Result<Thresholds, CliError> {
        let mut th = Thresholds::default();
        if let Some(d) = self.delta {
            th.delta = d;
            th.delta_star = d / DEFAULT_C_EMB;
        }
        if let Some(e) = self.eps_star {
            th.eps_star = e;
            th.wolf_eps = e.cbrt();
        }
        if let Some(d) = self.delta_star {
            th.delta_star = d;
        }
        if let Some(c) = self.c_cal {
            th.c_cal = c;
        }
        th.validate()?;
        Ok(th)
    }

    fn lattice(&self) -> Result<Option<Lattice>, CliError> {
        let Some(raw) = &self.lattice else { return Ok(None) };
        let text = if raw.trim_start().starts_with('{') { raw.clone() } else { fs::read_to_string(raw)? };
        let l: Lattice = serde_json::from_str(&text)?;
        l.validate().map_err(CliError::Usage)?;
        Ok(Some(l))
    }

    fn require_lattice(&self) -> Result<Lattice, CliError> {
        self.lattice()?.ok_or_else(|| CliError::Usage("--lattice is required".into()))
    }

    fn input(&self) -> Result<&Path, CliError> {
        self.input.as_deref().ok_or_else(|| CliError::Usage("--input is required".into()))
    }

    fn field(&self) -> Result<SampledField, CliError> {
        let path = self.input()?;
        let f = load(path)?;
        log::info!("loaded {} ({:?} x {})", path.display(), f.grid().dims, f.grid().nt);
        Ok(f)
    }

    fn writer(&self) -> Result<Box<dyn Write>, CliError> {
        Ok(match &self.output {
            Some(p) => Box::new(BufWriter::new(File::create(p)?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }

    fn config(&self, command: &str, lattice: Option<Lattice>) -> Result<RunConfig, CliError> {
        Ok(RunConfig {
            command: command.into(),
            input: self.input.as_ref().map(|p| p.display().to_string()),
            thresholds: (&self.thresholds()?).into(),
            seed: self.seed,
            lattice,
            tool_version: env!("CARGO_PKG_VERSION"),
        })
    }
}

fn parse_exponent(s: &str) -> Result<f64, CliError> {
    serde_json::from_str::<Exponent>(&format!("\"{s}\""))
        .map(|e| e.0)
        .or_else(|_| s.parse::<f64>())
        .map_err(|_| CliError::Usage(format!("bad exponent {s:?}")))
}

fn parse_point(s: &str) -> Result<[f64; 3], String> {
    let v: Vec<f64> = s.split(',').map(|c| c.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    v.try_into().map_err(|v: Vec<f64>| format!("expected x,y,z, got {} values", v.len()))
}

fn curve_file(dir: &Path, name: String) -> Result<BufWriter<File>, CliError> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Runs one command; `Ok(false)` reports a failed verification suite or an
/// invariants run where no cylinder could be evaluated.
pub fn run(cli: &Cli) -> Result<bool, CliError> {
    let c = &cli.common;
    match &cli.command {
        Command::Gen => {
            let text = fs::read_to_string(c.input()?)?;
            let spec: GenSpecJson = serde_json::from_str(&text)?;
            let mut field = generate(&spec.to_spec(c.seed)?)?;
            if spec.spectral_pressure {
                field = with_spectral_pressure(field)?;
            }
            let out = c.output.as_deref().ok_or_else(|| CliError::Usage("gen needs --output".into()))?;
            save(out, &field)?;
            log::info!("wrote {}", out.display());
            Ok(true)
        }
        Command::Norms(args) => norms(c, args),
        Command::Invariants => {
            let lattice = c.require_lattice()?;
            let field = c.field()?;
            let hash = c.config("invariants", Some(lattice.clone()))?.hash();
            let mut w = c.writer()?;
            let mut written = 0;
            for pt in lattice.points().iter().filter(|p| p.p_slot == 0 && p.nu_slot == 0) {
                match CylinderSpec::new(pt.t0, pt.x0, pt.r).and_then(|cyl| invariants(&field, &cyl)) {
                    Ok(rep) => {
                        write_json_line(&mut w, &InvariantRecord::new(&rep, &hash))?;
                        written += 1;
                    }
                    Err(e) => log::warn!("skipping t0={} x0={:?} r={}: {e}", pt.t0, pt.x0, pt.r),
                }
            }
            w.flush()?;
            Ok(written > 0)
        }
        Command::Scan(args) => {
            let lattice = c.require_lattice()?;
            let field = c.field()?;
            let th = c.thresholds()?;
            let hash = c.config("scan", Some(lattice.clone()))?.hash();
            let outcomes = scan(&field, &lattice, &th, c.jobs)?;
            let mut w = c.writer()?;
            for o in &outcomes {
                write_json_line(&mut w, &VerdictRecord::new(&o.point, o.criterion.as_str(), &o.result, (&th).into(), &hash))?;
            }
            w.flush()?;
            if let Some(dir) = &args.curves {
                for o in outcomes.iter().filter(|o| o.result.is_ok()) {
                    let pt = &o.point;
                    let series = match o.criterion {
                        Criterion::ConcentrationGeneral => concentration_series(&field, pt.t0, pt.x0, pt.r, pt.p, pt.nu)?,
                        Criterion::ConcentrationP3 => {
                            oscillation_series(&field, pt.t0, pt.x0, pt.r, lattice.level_floor_cells)?
                        }
                        _ => continue,
                    };
                    let mut f = curve_file(dir, format!("q_{:05}_{}.csv", pt.index, o.criterion.as_str()))?;
                    write_series_csv(&mut f, &series, &hash)?;
                    f.flush()?;
                }
            }
            let detected = outcomes
                .iter()
                .filter(|o| matches!(&o.result, Ok(v) if v.verdict == nssl_core::detector::Verdict::ConcentrationDetected))
                .count();
            log::info!("{} records, {detected} concentration_detected", outcomes.len());
            Ok(true)
        }
        Command::Verify(args) => {
            let th = c.thresholds()?;
            let input = match &c.input {
                Some(p) => Some(load(p)?),
                None => None,
            };
            let opts = VerifyOptions {
                seed: c.seed,
                c_emb: args.c_emb,
                c_cal: th.c_cal,
                random_fields: args.random_fields,
                input,
                ..VerifyOptions::default()
            };
            let report = run_verify(&opts)?;
            let hash = c.config("verify", None)?.hash();
            let mut w = c.writer()?;
            let mut json = serde_json::to_value(&report)?;
            json["config_hash"] = hash.into();
            serde_json::to_writer_pretty(&mut w, &json)?;
            writeln!(w)?;
            w.flush()?;
            for s in &report.suites {
                eprintln!("{} {}: {}", if s.passed { "PASS" } else { "FAIL" }, s.name, s.detail);
            }
            Ok(report.passed)
        }
    }
}

fn norms(c: &Common, args: &NormsArgs) -> Result<bool, CliError> {
    let given = c.lattice()?;
    let field = c.field()?;
    let g = field.grid().clone();
    let lattice = match given {
        Some(l) => l,
        None => {
            let r = args.r.ok_or_else(|| CliError::Usage("norms needs --r or --lattice".into()))?;
            let x0 = match args.x0 {
                Some(v) => v,
                None => [0, 1, 2].map(|a| 0.5 * (g.lower[a] + g.upper[a])),
            };
            Lattice {
                t0: vec![args.t.unwrap_or(g.time.1)],
                x0: vec![x0],
                r: vec![r],
                p: vec![Exponent(parse_exponent(&args.p)?)],
                nu: vec![2.0],
                criteria: Vec::new(),
                level_floor_cells: 0.0,
            }
        }
    };
    let hash = c.config("norms", Some(lattice.clone()))?.hash();
    let mut w = c.writer()?;
    writeln!(w, "# config_hash={hash}")?;
    writeln!(w, "index,t,x,y,z,r,p,weak,weak_resolved,lp,lorentz_p_2,morrey,morrey_osc")?;
    let floor = level_set_floor_measure(&g, DEFAULT_LEVEL_SET_FLOOR_CELLS);
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.10e}"));
    for pt in lattice.points().iter().filter(|p| p.nu_slot == 0) {
        let kt = g.time_index_at_or_below(pt.t0)?;
        let st = BallStencil::new(&g, &BallSpec::new(pt.x0, pt.r)?)?;
        let speed = field.speed_slice(kt);
        let curve = DistributionCurve::from_weighted(st.weighted(&speed))?;
        let finite = pt.p.is_finite();
        let lp = finite.then(|| curve.lorentz_norm(pt.p, pt.p)).transpose()?;
        let l2 = finite.then(|| curve.lorentz_norm(pt.p, 2.0)).transpose()?;
        let (morrey, osc) = if pt.p >= 1.0 {
            (
                Some(morrey_sup(&field, pt.t0, pt.x0, pt.r, pt.p, false)?.supremum),
                Some(morrey_sup(&field, pt.t0, pt.x0, pt.r, pt.p, true)?.supremum),
            )
        } else {
            (None, None)
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{:.10e},{:.10e},{},{},{},{}",
            pt.index,
            g.time_at(kt),
            pt.x0[0],
            pt.x0[1],
            pt.x0[2],
            pt.r,
            if finite { pt.p.to_string() } else { "inf".into() },
            curve.weak_norm(pt.p)?,
            curve.weak_norm_resolved(pt.p, floor)?,
            opt(lp),
            opt(l2),
            opt(morrey),
            opt(osc),
        )?;
        if let Some(dir) = &args.curves.curves {
            let mut f = curve_file(dir, format!("distribution_{:05}.csv", pt.index))?;
            write_distribution_csv(&mut f, &curve, &hash)?;
            f.flush()?;
            if let Ok(prof) = morrey_sup(&field, pt.t0, pt.x0, pt.r, pt.p.max(1.0), false) {
                let mut f = curve_file(dir, format!("morrey_{:05}.csv", pt.index))?;
                write_morrey_csv(&mut f, &prof, &hash)?;
                f.flush()?;
            }
        }
    }
    w.flush()?;
    Ok(true)
}
