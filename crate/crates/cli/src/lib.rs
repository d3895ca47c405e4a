//! Batch front end: loads a [`RunConfig`], runs one command and writes CSV and
//! JSON artifacts into the output directory.
//!
//! Exit codes: 0 success, 1 invalid configuration or input, 2 non-convergence,
//! 3 failed consistency check.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use weakkam_core::critical::{critical_classes, critical_value, write_cycle_points};
use weakkam_core::mather::{conjugate_pair, gradient_consistency, mather_set_approx};
use weakkam_core::oracle::{compare_to_reference, write_reference_csv, Branch, ReferenceSolution};
use weakkam_core::semigroup::{
    backward_orbit, check_domination, fixed_point_residual, solve_weak_kam, write_history_csv, Direction,
};
use weakkam_core::symmetry::{average, check_invariance, invariance_harness, verify_symmetry};
use weakkam_core::{karp_min_mean_cycle, GridFunction};

pub mod config;

pub use config::{ConfigError, RunConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    /// Weak KAM solution and residual history.
    Solve,
    /// Critical value by Karp and by value iteration, cross-checked.
    Critical,
    /// Conjugate pair, gap and Mather set approximation.
    Mather,
    /// Kernel symmetry, averaging and the invariance harness.
    SymmetryCheck,
    /// Pendulum solution against the closed-form reference.
    PendulumDemo,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Critical => "critical",
            Command::Mather => "mather",
            Command::SymmetryCheck => "symmetry-check",
            Command::PendulumDemo => "pendulum-demo",
        }
    }
}

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Core(weakkam_core::Error),
    /// A harness check whose bound is asserted did not hold.
    Check(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 1,
            RunError::Core(weakkam_core::Error::NonConvergence { .. }) => 2,
            RunError::Core(weakkam_core::Error::Consistency { .. }) => 3,
            RunError::Core(_) => 1,
            RunError::Check(_) => 3,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Core(e) => write!(f, "{e}"),
            RunError::Check(m) => write!(f, "check failed: {m}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<weakkam_core::Error> for RunError {
    fn from(e: weakkam_core::Error) -> Self {
        RunError::Core(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Core(e.into())
    }
}

type Result<T> = std::result::Result<T, RunError>;

struct Out {
    dir: PathBuf,
    files: Vec<String>,
}

impl Out {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        self.files.push(name.to_string());
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }

    fn csv(&mut self, name: &str) -> Result<csv::Writer<BufWriter<File>>> {
        Ok(csv::Writer::from_writer(self.create(name)?))
    }
}

fn fmt(x: f64) -> String {
    format!("{x:e}")
}

fn csv_err(e: csv::Error) -> RunError {
    RunError::Core(e.into())
}

/// Runs `command` and returns the summary that was written to `summary.json`.
pub fn run(command: Command, config: &RunConfig) -> Result<Value> {
    config.validate()?;
    let mut out = Out::new(&config.output_dir)?;
    let body = match command {
        Command::Solve => solve(config, &mut out)?,
        Command::Critical => critical(config, &mut out)?,
        Command::Mather => mather(config, &mut out)?,
        Command::SymmetryCheck => symmetry_check(config, &mut out)?,
        Command::PendulumDemo => pendulum_demo(config, &mut out)?,
    };
    let mut summary = json!({
        "command": command.name(),
        "config": config,
    });
    summary["results"] = body;
    out.files.push("summary.json".into());
    summary["files"] = json!(out.files);
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(out.dir.join("summary.json"), text + "\n")?;
    Ok(summary)
}

fn solve(config: &RunConfig, out: &mut Out) -> Result<Value> {
    let (_, kernel) = config.build_kernel()?;
    let grid = kernel.grid();
    let seed = config.seed_function(grid);
    let direction = config.options.direction;
    let sol = solve_weak_kam(&kernel, direction, &seed, config.tol, config.max_iter)?;
    let residual = fixed_point_residual(&kernel, direction, &sol.u, sol.c_est)?;
    sol.u.write_csv(out.create("u.csv")?)?;
    write_history_csv(&sol.history, out.create("history.csv")?)?;
    let mut body = json!({
        "direction": direction,
        "c_est": sol.c_est,
        "iterations": sol.iterations,
        "residual": residual,
        "final_change": sol.history.last().map(|r| r.sup_change),
        "boundary_argmins": sol.boundary_argmins,
        "vmax": kernel.vmax(),
        "offsets": kernel.n_offsets(),
    });
    if direction == Direction::Backward && config.options.orbit_steps > 0 {
        let start = (0..sol.u.len())
            .max_by(|&a, &b| sol.u.get(a).total_cmp(&sol.u.get(b)).then(b.cmp(&a)))
            .unwrap_or(0);
        let orbit = backward_orbit(&sol.u, &kernel, sol.c_est, start, config.options.orbit_steps)?;
        orbit.write_csv(grid, out.create("orbit.csv")?)?;
        body["orbit_start"] = json!(start);
        body["orbit_max_defect"] = json!(orbit.defects.iter().cloned().fold(0.0, f64::max));
    }
    Ok(body)
}

fn critical(config: &RunConfig, out: &mut Out) -> Result<Value> {
    let (_, kernel) = config.build_kernel()?;
    let seed = config.seed_function(kernel.grid());
    let report = critical_value(&kernel, &seed, config.tol, config.max_iter)?;
    let karp = karp_min_mean_cycle(&kernel);
    karp.write_csv(&kernel, out.create("cycle.csv")?)?;
    let sol = solve_weak_kam(&kernel, Direction::Backward, &seed, config.tol, config.max_iter)?;
    let eps = 1e3 * config.tol;
    let classes = critical_classes(&kernel, &sol.u, report.c_karp, eps)?;
    let mut w = out.csv("classes.csv")?;
    let mut header = vec!["class".to_string()];
    header.extend((0..kernel.grid().ndim()).map(|a| format!("x{a}")));
    w.write_record(&header).map_err(csv_err)?;
    for (i, class) in classes.iter().enumerate() {
        for &p in class {
            let mut row = vec![i.to_string()];
            row.extend(kernel.grid().coordinates(p).iter().map(|&c| fmt(c)));
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(json!({
        "report": report,
        "critical_classes": classes.len(),
        "unique_fixed_point": classes.len() == 1,
    }))
}

fn mather(config: &RunConfig, out: &mut Out) -> Result<Value> {
    let (model, kernel) = config.build_kernel()?;
    let grid = kernel.grid();
    let seed = config.seed_function(grid);
    let pair = conjugate_pair(&kernel, &seed, config.tol, config.max_iter)?;
    let set = mather_set_approx(&pair, &kernel, config.options.mather_tol);
    let karp = karp_min_mean_cycle(&kernel);
    let mut w = out.csv("pair.csv")?;
    let mut header: Vec<String> = (0..grid.ndim()).map(|a| format!("x{a}")).collect();
    header.extend(["u_minus", "u_plus", "gap"].map(String::from));
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..grid.len() {
        let mut row: Vec<String> = grid.coordinates(i).iter().map(|&c| fmt(c)).collect();
        row.extend([pair.u_minus.get(i), pair.u_plus.get(i), pair.gap.get(i)].map(fmt));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    set.write_csv(grid, out.create("mather_set.csv")?)?;
    let mut body = json!({
        "c": pair.c,
        "c_minus": pair.c_minus,
        "c_plus": pair.c_plus,
        "c_karp": karp.critical_value(kernel.dt()),
        "mather_points": set.points.len(),
        "mather_set": set.points,
        "gradient_consistency": gradient_consistency(&pair, &model, &kernel, &karp.cycle)?,
    });
    if let Some(group) = config.build_group(grid)? {
        let invariant = group.elements().iter().all(|g| set.is_invariant_under(g));
        body["set_invariant"] = json!(invariant);
    }
    Ok(body)
}

fn symmetry_check(config: &RunConfig, out: &mut Out) -> Result<Value> {
    let (_, kernel) = config.build_kernel()?;
    let grid = kernel.grid();
    let group = config
        .build_group(grid)?
        .ok_or_else(|| ConfigError {
            field: "symmetry".into(),
            message: "symmetry-check needs at least one generator".into(),
        })?;
    let kernel_deviation = verify_symmetry(&group, &kernel)?;

    // Averaging: one backward sweep of random data is dominated at its sharp
    // constant; the group average must stay dominated at the same constant.
    let w = GridFunction::random(grid, config.seed, 1.0);
    let u = kernel.apply_backward(&w)?;
    let sharp = check_domination(&u, 0.0, &kernel)?.worst / kernel.dt();
    let before = check_domination(&u, sharp, &kernel)?;
    let averaged = average(&u, &group)?;
    let after = check_domination(&averaged, sharp, &kernel)?;

    let seeds: Vec<u64> = (0..config.options.harness_seeds as u64)
        .map(|i| config.seed.wrapping_add(i))
        .collect();
    let amplitude = if config.seed_amplitude > 0.0 {
        config.seed_amplitude
    } else {
        1.0
    };
    let report = invariance_harness(&kernel, &group, &seeds, amplitude, config.tol, config.max_iter)?;
    let mut tw = out.csv("trials.csv")?;
    tw.write_record(["seed", "direction", "c_est", "iterations", "seed_deviation", "deviation"])
        .map_err(csv_err)?;
    for t in &report.trials {
        let dir = match t.direction {
            Direction::Backward => "backward",
            Direction::Forward => "forward",
        };
        tw.write_record(&[
            t.seed.to_string(),
            dir.to_string(),
            fmt(t.c_est),
            t.iterations.to_string(),
            fmt(t.seed_deviation),
            fmt(t.deviation),
        ])
        .map_err(csv_err)?;
    }
    tw.flush()?;
    let body = json!({
        "group_order": group.order(),
        "kernel_deviation": kernel_deviation,
        "averaging": {
            "domination_constant": sharp,
            "violations_before": before.violations.len(),
            "violations_after": after.violations.len(),
            "worst_after": after.worst,
            "invariance_after": check_invariance(&averaged, &group),
        },
        "harness": {
            "kind": report.kind,
            "critical_classes": report.critical_classes,
            "unique": report.unique,
            "asserted": report.asserted,
            "bound": report.bound,
            "max_deviation": report.max_deviation(),
            "holds": report.holds(),
        },
    });
    if !report.holds() {
        return Err(RunError::Check(format!(
            "invariance deviation {:.3e} exceeds {:.3e}",
            report.max_deviation(),
            report.bound
        )));
    }
    if !after.violations.is_empty() {
        return Err(RunError::Check(format!(
            "{} domination violations after averaging",
            after.violations.len()
        )));
    }
    Ok(body)
}

fn pendulum_demo(config: &RunConfig, out: &mut Out) -> Result<Value> {
    let (_, kernel) = config.build_kernel()?;
    let grid = kernel.grid();
    let seed = config.seed_function(grid);
    let minus = solve_weak_kam(&kernel, Direction::Backward, &seed, config.tol, config.max_iter)?;
    let plus = solve_weak_kam(&kernel, Direction::Forward, &seed, config.tol, config.max_iter)?;
    let sup_minus = compare_to_reference(&minus.u, &ReferenceSolution::plus())?;
    let sup_plus = compare_to_reference(&plus.u, &ReferenceSolution::minus())?;
    let karp = karp_min_mean_cycle(&kernel);

    let anchor = grid.nearest_index(&[0.0]);
    let mut w = out.csv("comparison.csv")?;
    w.write_record(["theta", "u_minus", "reference_plus", "u_plus", "reference_minus"])
        .map_err(csv_err)?;
    for i in 0..grid.len() {
        let theta = grid.coordinates(i)[0];
        w.write_record(&[
            fmt(theta),
            fmt(minus.u.get(i) - minus.u.get(anchor)),
            fmt(ReferenceSolution::plus().eval(theta)?),
            fmt(plus.u.get(i) - plus.u.get(anchor)),
            fmt(ReferenceSolution::minus().eval(theta)?),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    write_reference_csv(config.options.reference_points, out.create("reference.csv")?)?;
    write_cycle_points(grid, &karp.cycle, out.create("cycle.csv")?)?;
    Ok(json!({
        "c_est": minus.c_est,
        "c_est_forward": plus.c_est,
        "c_karp": karp.critical_value(kernel.dt()),
        "sup_norm": sup_minus,
        "sup_norm_forward": sup_plus,
        "reference_branch": Branch::Plus,
        "iterations": minus.iterations,
        "boundary_argmins": minus.boundary_argmins,
    }))
}
