//! `admhd`: batch driver for the deconvolution MHD solver.
//!
//! Exit status: 0 success, 1 I/O failure, 2 invalid configuration or input,
//! 3 numerical blow-up, 4 failed property.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use admhd::checks::{operator_suite, CheckOutcome};
use admhd::config::{make_initial_state, SimConfig};
use admhd::diagnostics::{limit_study, DiagnosticsRecord, DiagnosticsSink, NdjsonSink, StudySetup};
use admhd::filter_ops::apply_helmholtz_power;
use admhd::snapshot::{load_state, save_state, write_scalar};
use admhd::{run, Error, MhdModel, MhdState};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "admhd", version, about = "Approximate-deconvolution MHD on the periodic 3-torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Artifact directory. Falls back to `output.directory`, then $ADMHD_OUTPUT_DIR, then `.`.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Replaces the random initial-condition seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory, writing diagnostics.ndjson and snapshots.
    Simulate(Common),
    /// Deconvolution-order sweep against the limit model, writing convergence.csv.
    #[command(name = "sweep_n")]
    SweepN {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,4")]
        n_list: Vec<u32>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Sobolev index for the `w` error.
        #[arg(long, default_value_t = 1.0)]
        s_w: f64,
        /// Sobolev index for the `B` error.
        #[arg(long, default_value_t = 0.5)]
        s_b: f64,
    },
    /// Operator property suite, writing operator_check.json.
    #[command(name = "operator_check")]
    OperatorCheck(Common),
    /// Pressure of a saved state (or of the configured initial state), written to pressure.bin.
    Pressure {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
}

enum Failure {
    Error(Error),
    BlowUp(String),
    Property(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Error(e.into())
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Error(Error::Config(_) | Error::Snapshot(_)) => 2,
            Failure::Error(Error::BlowUp { .. }) | Failure::BlowUp(_) => 3,
            Failure::Error(Error::InvariantViolation(_)) | Failure::Property(_) => 4,
            Failure::Error(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Error(e) => write!(f, "{e}"),
            Failure::BlowUp(m) => write!(f, "numerical blow-up: {m}"),
            Failure::Property(p) => write!(f, "property failed: {p}"),
        }
    }
}

struct Context {
    cfg: SimConfig,
    out: PathBuf,
    quiet: bool,
}

impl Context {
    fn new(common: &Common) -> Result<Self, Failure> {
        let mut cfg = SimConfig::load(&common.config).map_err(|e| match e {
            Error::Io(io) => Error::Config(vec![format!("cannot read {}: {io}", common.config.display())]),
            e => e,
        })?;
        if let Some(seed) = common.seed {
            cfg.override_seed(seed);
            cfg.validate()?;
        }
        let out = common
            .output_dir
            .clone()
            .or_else(|| cfg.output.directory.clone())
            .or_else(|| std::env::var_os("ADMHD_OUTPUT_DIR").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));
        fs::create_dir_all(&out)?;
        Ok(Self { cfg, out, quiet: common.quiet })
    }

    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }

    fn model(&self) -> Result<MhdModel, Failure> {
        Ok(MhdModel::new(
            self.cfg.grid_spec()?,
            self.cfg.filter_params()?,
            self.cfg.deconv_params(),
            self.cfg.physical_params()?,
        ))
    }
}

/// NDJSON output plus periodic snapshots; remembers the last good state.
struct SimulateSink<'a> {
    ndjson: NdjsonSink<BufWriter<File>>,
    dir: &'a Path,
    snapshot_interval: usize,
    last: Option<MhdState>,
}

impl DiagnosticsSink for SimulateSink<'_> {
    fn record(&mut self, rec: &DiagnosticsRecord, state: &MhdState) -> admhd::Result<()> {
        self.ndjson.record(rec, state)
    }

    fn after_step(&mut self, step: usize, state: &MhdState) -> admhd::Result<()> {
        if self.snapshot_interval > 0 && step % self.snapshot_interval == 0 {
            save_state(&self.dir.join(format!("snapshot_{step:06}.bin")), state)?;
        }
        self.last = Some(state.clone());
        Ok(())
    }

    fn flush(&mut self) -> admhd::Result<()> {
        self.ndjson.flush()
    }
}

fn simulate(ctx: &Context) -> Result<(), Failure> {
    let model = ctx.model()?;
    let initial = make_initial_state(&ctx.cfg)?;
    fs::write(ctx.out.join("config.toml"), ctx.cfg.render())?;
    let mut sink = SimulateSink {
        ndjson: NdjsonSink::new(BufWriter::new(File::create(ctx.out.join("diagnostics.ndjson"))?)),
        dir: &ctx.out,
        snapshot_interval: ctx.cfg.output.snapshot_interval,
        last: None,
    };
    match run(&initial, &model, &ctx.cfg.integrator_config(), &mut sink) {
        Ok(outcome) => {
            save_state(&ctx.out.join("final.bin"), &outcome.state)?;
            ctx.say(format!(
                "t = {} after {} steps, {} records, worst invariant residual {:.3e}",
                outcome.state.t,
                outcome.steps,
                outcome.records,
                outcome.watch.worst()
            ));
            Ok(())
        }
        Err(e) => {
            let last = sink.last.as_ref().unwrap_or(&initial);
            save_state(&ctx.out.join("last_valid.bin"), last)?;
            Err(e.into())
        }
    }
}

fn sweep_n(ctx: &Context, n_list: &[u32], workers: usize, s_w: f64, s_b: f64) -> Result<(), Failure> {
    let fp = ctx.cfg.filter_params()?;
    let initial = make_initial_state(&ctx.cfg)?;
    let setup = StudySetup {
        grid: ctx.cfg.grid_spec()?,
        fp,
        pp: ctx.cfg.physical_params()?,
        integrator: ctx.cfg.integrator_config(),
        v0: apply_helmholtz_power(&initial.w, &fp, 1.0),
        b0: initial.b,
    };
    let table = limit_study(&setup, n_list, s_w, s_b, workers)?;
    table.write_csv(BufWriter::new(File::create(ctx.out.join("convergence.csv"))?))?;
    for r in &table.rows {
        ctx.say(format!("N = {:3}  err_w = {:.6e}  err_B = {:.6e}{}", r.n, r.err_w, r.err_b, if r.blew_up { "  (blew up)" } else { "" }));
    }
    if let Some(r) = table.rows.iter().find(|r| r.blew_up) {
        return Err(Failure::BlowUp(format!("member N = {} blew up; table is partial", r.n)));
    }
    if !table.strictly_decreasing() {
        return Err(Failure::Property("errors not strictly decreasing in N".into()));
    }
    Ok(())
}

fn operator_check(ctx: &Context, seed: u64) -> Result<(), Failure> {
    let results: Vec<CheckOutcome> =
        operator_suite(ctx.cfg.grid_spec()?, &ctx.cfg.filter_params()?, &ctx.cfg.deconv_params(), seed)?;
    let mut report = BufWriter::new(File::create(ctx.out.join("operator_check.json"))?);
    serde_json::to_writer_pretty(&mut report, &results).map_err(Error::from)?;
    report.write_all(b"\n")?;
    report.flush()?;
    for r in &results {
        ctx.say(format!(
            "{} {:<22} worst = {:.3e} (tolerance {:.0e}) {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.worst,
            r.tolerance,
            r.detail
        ));
    }
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Property(failed.join(", ")))
    }
}

fn pressure(ctx: &Context, snapshot: Option<&Path>) -> Result<(), Failure> {
    let model = ctx.model()?;
    let state = match snapshot {
        Some(p) => load_state(p, Some(model.grid()))?,
        None => make_initial_state(&ctx.cfg)?,
    };
    let q = model.recover_pressure(&state)?;
    write_scalar(BufWriter::new(File::create(ctx.out.join("pressure.bin"))?), &q, state.t)?;
    ctx.say(format!("pressure at t = {}: ‖q‖₂ = {:.6e}", state.t, q.l2_norm()));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = (|| match &cli.command {
        Command::Simulate(c) => simulate(&Context::new(c)?),
        Command::SweepN { common, n_list, workers, s_w, s_b } => {
            sweep_n(&Context::new(common)?, n_list, *workers, *s_w, *s_b)
        }
        Command::OperatorCheck(c) => operator_check(&Context::new(c)?, c.seed.unwrap_or(0)),
        Command::Pressure { common, snapshot } => pressure(&Context::new(common)?, snapshot.as_deref()),
    })();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("admhd: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
