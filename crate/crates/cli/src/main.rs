use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fractal_sumset::angle::{classify_angle, predict_sumset, ThetaSpec};
use fractal_sumset::experiment::{
    run_audit, run_ifs_build, run_mc_circle, run_projection_experiment, run_sumset_experiment, CurveConfig,
    ExperimentConfig, McTarget, Report, SetSpec, OUT_DIR_ENV,
};

#[derive(Parser)]
#[command(name = "fractal-sumset", version, about = "Sums of self-similar sets and curves")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (also settable through FRACTAL_SUMSET_OUT).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    eps_start: Option<f64>,
    #[arg(long, global = true)]
    eps_stop: Option<f64>,
    #[arg(long, global = true)]
    eps_factor: Option<f64>,
    /// Fixed cover depth (sumset) or maximum depth (project).
    #[arg(long, global = true)]
    depth: Option<u32>,
    #[arg(long, global = true)]
    trials: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Rasterize set + curve over an eps ladder and fit the scaling.
    Sumset {
        /// Four-corner contraction ratio, e.g. 1/9 or 0.3.
        #[arg(long)]
        gamma: Option<String>,
        /// Read the set from an IFS text file instead.
        #[arg(long, conflicts_with = "gamma")]
        ifs: Option<PathBuf>,
        /// Use N_theta with this angle (p/q, sqrt(k) or rad:x) as the curve.
        #[arg(long)]
        ntheta: Option<String>,
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        no_pgm: bool,
    },
    /// Projection ladders of C(gamma) and interior probes of C(gamma) + N_theta.
    Project {
        #[arg(long)]
        gamma: Option<String>,
        /// Angles as p/q, sqrt(k) or rad:x; repeatable.
        #[arg(long = "angle")]
        angles: Vec<String>,
    },
    /// Print `p*,q*,class,prediction` for tan theta = p/q.
    ClassifyAngle {
        #[arg(allow_hyphen_values = true)]
        p: i64,
        #[arg(allow_hyphen_values = true)]
        q: i64,
        #[arg(long)]
        header: bool,
    },
    /// Random unit circles against a disk or the configured set.
    McCircle {
        #[arg(long, value_parser = ["disk", "set"])]
        target: Option<String>,
        #[arg(long)]
        gamma: Option<String>,
        #[arg(long, value_delimiter = ',')]
        depths: Vec<u32>,
    },
    /// Slice-map bound audits; nonzero exit on any violation.
    Audit {
        #[arg(long)]
        samples: Option<u64>,
        #[arg(long)]
        pairs: Option<u64>,
        /// Run the transversality audit on a straight segment.
        #[arg(long)]
        segment: bool,
    },
    /// Build a self-similar set whose pairs of maps share projections.
    IfsBuild {
        #[arg(long, value_parser = ["a-prime", "b-prime"])]
        mode: Option<String>,
        #[arg(long)]
        lambda: Option<String>,
        #[arg(long = "angle")]
        angles: Vec<String>,
        #[arg(long)]
        maps: Option<usize>,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig, fractal_sumset::Error> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        // the flag beats the environment override
        std::env::remove_var(OUT_DIR_ENV);
        cfg.out_dir = Some(o.clone());
    }
    if let Some(e) = common.eps_start {
        cfg.ladder.eps_start = e;
    }
    if let Some(e) = common.eps_stop {
        cfg.ladder.eps_stop = e;
    }
    if let Some(f) = common.eps_factor {
        cfg.ladder.eps_factor = f;
    }
    if let Some(t) = common.trials {
        cfg.mc.trials = t;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<ExitCode, fractal_sumset::Error> {
    if let Cmd::ClassifyAngle { p, q, header } = cli.cmd {
        let c = classify_angle(p, q)?;
        let pred = predict_sumset(ThetaSpec::Rational { p, q })?;
        if header {
            println!("p*,q*,class,prediction");
        }
        println!("{},{},{},{}", c.p_star, c.q_star, c.kind, pred.summary());
        return Ok(ExitCode::SUCCESS);
    }
    let mut cfg = load(&cli.common)?;
    let report: Report = match cli.cmd {
        Cmd::Sumset { gamma, ifs, ntheta, radius, no_pgm } => {
            if let Some(g) = gamma {
                cfg.set = SetSpec::FourCorner { gamma: g };
            }
            if let Some(path) = ifs {
                cfg.set = SetSpec::IfsFile { path };
            }
            if let Some(a) = ntheta {
                cfg.curve = CurveConfig::Ntheta { angle: a };
            }
            if let Some(r) = radius {
                cfg.curve = CurveConfig::Circle { center: [0.0, 0.0], radius: r };
            }
            if cli.common.depth.is_some() {
                cfg.ladder.depth = cli.common.depth;
            }
            if no_pgm {
                cfg.ladder.write_pgm = false;
            }
            run_sumset_experiment(&cfg)?
        }
        Cmd::Project { gamma, angles } => {
            if let Some(g) = gamma {
                cfg.set = SetSpec::FourCorner { gamma: g };
            }
            if !angles.is_empty() {
                cfg.projection.angles = angles;
            }
            if let Some(d) = cli.common.depth {
                cfg.projection.max_depth = d;
            }
            run_projection_experiment(&cfg)?
        }
        Cmd::McCircle { target, gamma, depths } => {
            match target.as_deref() {
                Some("disk") => cfg.mc.target = McTarget::Disk,
                Some("set") => cfg.mc.target = McTarget::Set,
                _ => {}
            }
            if let Some(g) = gamma {
                cfg.set = SetSpec::FourCorner { gamma: g };
            }
            if !depths.is_empty() {
                cfg.mc.depths = depths;
            }
            run_mc_circle(&cfg)?
        }
        Cmd::Audit { samples, pairs, segment } => {
            if let Some(s) = samples {
                cfg.audit.psi_samples = s;
            }
            if let Some(p) = pairs {
                cfg.audit.pairs = p;
            }
            if segment {
                cfg.audit.curve = CurveConfig::Polyline { vertices: vec![[0.0, 0.0], [1.0, 1.0]] };
            }
            run_audit(&cfg)?
        }
        Cmd::IfsBuild { mode, lambda, angles, maps } => {
            if let Some(m) = mode {
                cfg.ifs_build.mode = m;
            }
            if let Some(l) = lambda {
                cfg.ifs_build.lambda = l;
            }
            if !angles.is_empty() {
                cfg.ifs_build.angles = angles;
            }
            if maps.is_some() {
                cfg.ifs_build.maps = maps;
            }
            run_ifs_build(&cfg)?
        }
        Cmd::ClassifyAngle { .. } => unreachable!(),
    };
    print!("{}", report.summary);
    eprintln!("wrote {} files to {}", report.files.len(), report.out_dir.display());
    Ok(if report.ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
