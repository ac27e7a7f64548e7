//! JSON-configured experiments over the `dyngame` library: condition checks,
//! equilibria, simulations with diagnostics, and parameter sweeps.

pub mod config;
pub mod pipeline;
pub mod report;
pub mod sweep;

use std::path::PathBuf;

use anyhow::Result;

use config::ExperimentConfig;
use report::{write_atomic, MonitorSummary, RunReport};

pub const EXIT_PASS: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_FAIL: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Check,
    Nash,
    Simulate,
    Sweep,
    FixedPoints,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Nash => "nash",
            Command::Simulate => "simulate",
            Command::Sweep => "sweep",
            Command::FixedPoints => "fixed-points",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Options {
    pub config: PathBuf,
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub quiet: bool,
}

/// Runs one command and returns its exit code; errors map to [`EXIT_ERROR`].
pub fn execute(command: Command, opts: &Options) -> Result<u8> {
    let mut config = ExperimentConfig::load(&opts.config)?;
    if let Some(seed) = opts.seed {
        config.sim.seed = seed;
    }
    let say = |line: String| {
        if !opts.quiet {
            println!("{line}");
        }
    };
    let game = config.game.build()?;
    let mut report = RunReport::new(command.name(), &config);
    let mut code = EXIT_PASS;
    match command {
        Command::Check => {
            report.small_gain = pipeline::small_gain(&game)?;
            let pass = pipeline::any_passed(&report.small_gain);
            report.conditions_pass = Some(pass);
            for r in &report.small_gain {
                say(format!(
                    "{:?}: {} conditions, {:?}",
                    r.family,
                    r.conditions.len(),
                    r.verdict
                ));
            }
            code = if pass { EXIT_PASS } else { EXIT_FAIL };
        }
        Command::Nash => {
            let nash = pipeline::nash_point(&config, &game)?;
            say(format!(
                "q* = {:?}, residual {:e}",
                nash.q_star, nash.residual
            ));
            report.nash = Some(nash);
        }
        Command::FixedPoints => {
            let points = pipeline::fixed_points(&config, &game)?;
            for p in &points {
                say(format!("{:?} residual {:e}", p.q_star, p.residual));
            }
            report.fixed_points = Some(points);
        }
        Command::Simulate => {
            let nash = pipeline::nash_point(&config, &game)?;
            report.small_gain = pipeline::small_gain(&game)?;
            report.conditions_pass = Some(pipeline::any_passed(&report.small_gain));
            let sim = pipeline::simulate(&config, &game, &nash)?;
            let mut csv = Vec::new();
            sim.trajectory
                .write_csv(&mut csv, sim.functionals.as_deref())?;
            write_atomic(&opts.out_dir.join(&config.outputs.trajectory_csv), &csv)?;
            say(format!(
                "conditions {}, converged {}, convergence time {:?}",
                if report.conditions_pass == Some(true) {
                    "pass"
                } else {
                    "fail"
                },
                sim.verdict.converged,
                sim.verdict.convergence_time
            ));
            report.nash = Some(nash);
            report.monitor = sim.monitor.as_ref().map(MonitorSummary::from);
            report.verdict = Some(sim.verdict);
            report.trajectory_csv = Some(config.outputs.trajectory_csv.clone());
        }
        Command::Sweep => {
            let rows = sweep::run_sweep(&config)?;
            let spec = config.sweep.as_ref().expect("checked by run_sweep");
            write_atomic(
                &opts.out_dir.join(&config.outputs.sweep_csv),
                &sweep::to_csv(spec, &rows)?,
            )?;
            say(format!("{} cells", rows.len()));
            return Ok(EXIT_PASS);
        }
    }
    write_atomic(
        &opts.out_dir.join(&config.outputs.report_json),
        report.to_json()?.as_bytes(),
    )?;
    Ok(code)
}
