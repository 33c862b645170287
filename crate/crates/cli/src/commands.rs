use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use tdco_core::config::RunConfig;
use tdco_core::kernel::{kernel_grid, solve_modes, Propagator};
use tdco_core::oracle::snapshot::{format_f64, write_provenance, write_snapshot};
use tdco_core::oracle::{propagate_with_kernel, split_step_evolve};
use tdco_core::system::{find_decoupling_angle, scan_decoupling_angle, SystemSpec};
use tdco_core::verify::{self, Criterion};
use tdco_core::Error;

const DEFAULT_OUTPUT: &str = "tdco-out";
const RESIDUAL_CHECKS: usize = 201;

/// A failed run: exit code, machine-readable kind, message.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub kind: String,
    pub message: String,
    pub details: Option<Value>,
}

impl Failure {
    pub fn input(kind: &str, message: &str) -> Self {
        Self { code: 1, kind: kind.into(), message: message.into(), details: None }
    }

    fn numerical(kind: &str, message: String, details: Value) -> Self {
        Self { code: 2, kind: kind.into(), message, details: Some(details) }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self { code: if e.is_input_error() { 1 } else { 2 }, kind: e.kind().into(), message: e.to_string(), details: None }
    }
}

type Outcome = std::result::Result<(), Failure>;

pub struct Context {
    config: RunConfig,
    base: PathBuf,
    hash: String,
    output: PathBuf,
    hbar: Option<f64>,
}

impl Context {
    /// Reads, hashes, parses and validates the configuration. Without
    /// `--config` an empty configuration is used (only `verify` can run).
    pub fn load(path: Option<&Path>, output: Option<PathBuf>, hbar: Option<f64>) -> Result<Self, Failure> {
        let (text, base) = match path {
            Some(p) => {
                let text = fs::read(p)
                    .map_err(|e| Failure::input("config", &format!("cannot read {}: {e}", p.display())))?;
                (text, p.parent().map(Path::to_path_buf).unwrap_or_default())
            }
            None => (b"{}".to_vec(), PathBuf::from(".")),
        };
        let hash = format!("{:x}", Sha256::digest(&text));
        let text = String::from_utf8(text).map_err(|_| Failure::input("config", "configuration is not UTF-8"))?;
        let config = RunConfig::from_json(&text)?;
        config.validate(&base)?;
        let output = output
            .or_else(|| config.output.directory.as_ref().map(|d| base.join(d)))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT));
        Ok(Self { config, base, hash, output, hbar })
    }

    fn system(&self) -> Result<SystemSpec, Failure> {
        Ok(self.config.build_system(&self.base, self.hbar)?)
    }

    fn provenance(&self) -> Value {
        let mut v = json!({ "config_hash": self.hash });
        if let Some(h) = self.hbar {
            v["hbar_override"] = json!(h);
        }
        v
    }

    fn write_json(&self, name: &str, mut body: Value) -> Result<Value, Failure> {
        if let (Some(b), Some(p)) = (body.as_object_mut(), self.provenance().as_object()) {
            for (k, v) in p {
                b.insert(k.clone(), v.clone());
            }
        }
        fs::create_dir_all(&self.output).map_err(Error::from)?;
        let text = serde_json::to_string_pretty(&body).expect("serialisable") + "\n";
        fs::write(self.output.join(name), &text).map_err(Error::from)?;
        Ok(body)
    }
}

pub fn decouple(ctx: &Context) -> Outcome {
    let spec = ctx.system()?;
    let task = ctx.config.decouple.clone().unwrap_or_default();
    let dec = scan_decoupling_angle(&spec, task.tolerance);
    let (t0, t1) = spec.interval();
    let n = task.samples.max(2);
    let times: Vec<f64> = (0..n).map(|k| t0 + (t1 - t0) * k as f64 / (n - 1) as f64).collect();
    let omega_sq = |j: usize| times.iter().map(|&t| dec.omega_sq(j, t)).collect::<Vec<_>>();
    let decision = if dec.accepted() { "decoupled" } else { "not_decouplable" };
    let body = ctx.write_json(
        "decouple.json",
        json!({
            "alpha": dec.alpha(),
            "residual": dec.gamma_residual(),
            "threshold": dec.threshold(),
            "decision": decision,
            "omega_sq": { "t": times, "mode1": omega_sq(0), "mode2": omega_sq(1) },
        }),
    )?;
    println!("{}", serde_json::to_string_pretty(&body).expect("serialisable"));
    match find_decoupling_angle(&spec, task.tolerance) {
        Ok(_) => Ok(()),
        Err(e) => Err(Failure::numerical(
            e.kind(),
            e.to_string(),
            json!({ "residual": dec.gamma_residual(), "threshold": dec.threshold() }),
        )),
    }
}

pub fn kernel(ctx: &Context) -> Outcome {
    let spec = ctx.system()?;
    let task = ctx
        .config
        .kernel
        .clone()
        .ok_or_else(|| Failure::input("config", "the kernel command needs a `kernel` section"))?;
    let dec = find_decoupling_angle(&spec, task.tolerance)?;
    let (t0, t1) = spec.interval();
    let sols = solve_modes(&dec, t0, t1, task.gauge_scale)?;
    let prop = Propagator::new(&dec, [&sols[0], &sols[1]], t0, t1)?;
    let initial: Vec<(f64, f64)> = task.initial.iter().map(|p| (p[0], p[1])).collect();
    let samples = kernel_grid(&prop, &task.final_x1.points(), &task.final_x2.points(), &initial);

    fs::create_dir_all(&ctx.output).map_err(Error::from)?;
    if ctx.config.output.wants_csv() {
        let file = fs::File::create(ctx.output.join("kernel.csv")).map_err(Error::from)?;
        let mut out = BufWriter::new(file);
        let io = |e: std::io::Error| Failure::from(Error::from(e));
        write_provenance(&mut out, &ctx.provenance())?;
        writeln!(out, "x1_final,x2_final,x1_initial,x2_initial,re,im,maslov").map_err(io)?;
        for s in &samples {
            let maslov: i64 = s.kernel.maslov_indices().iter().sum();
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                format_f64(s.x_f.0),
                format_f64(s.x_f.1),
                format_f64(s.x_i.0),
                format_f64(s.x_i.1),
                format_f64(s.kernel.value.re),
                format_f64(s.kernel.value.im),
                maslov
            )
            .map_err(io)?;
        }
        out.flush().map_err(io)?;
    }
    let mut modes = Vec::new();
    for (j, sol) in sols.iter().enumerate() {
        let m = prop.mode(j);
        modes.push(json!({
            "omega0": m.omega0,
            "phase": m.phase(),
            "maslov_index": m.branch.maslov_index,
            "ermakov_residual": sol.max_residual(&dec.omega_sq_profile(j), RESIDUAL_CHECKS)?,
            "drive_integrals": [m.drive.i1, m.drive.i2, m.drive.i3],
        }));
    }
    ctx.write_json(
        "kernel.json",
        json!({
            "alpha": dec.alpha(),
            "decoupling_residual": dec.gamma_residual(),
            "interval": [t0, t1],
            "hbar": spec.hbar(),
            "modes": modes,
            "samples": samples.len(),
            "data": if ctx.config.output.wants_csv() { json!("kernel.csv") } else { Value::Null },
        }),
    )?;
    Ok(())
}

pub fn propagate(ctx: &Context) -> Outcome {
    let spec = ctx.system()?;
    let task = ctx
        .config
        .propagate
        .clone()
        .ok_or_else(|| Failure::input("config", "the propagate command needs a `propagate` section"))?;
    let dec = find_decoupling_angle(&spec, task.tolerance)?;
    let (t0, t1) = spec.interval();
    let prop = Propagator::build(&dec, t0, t1)?;
    let lab = task.lab_grid.grid()?;
    let psi = task.packet.sample(lab, t0, spec.hbar());
    let evolved = propagate_with_kernel(&psi, &prop, task.mode_grid.grid()?)?;
    let oracle = if task.oracle.enabled { Some(split_step_evolve(&psi, &spec, t1, task.oracle.dt)?) } else { None };

    let prov = ctx.provenance();
    if ctx.config.output.wants_csv() {
        write_snapshot(&psi, &ctx.output, "psi_initial", &prov)?;
        write_snapshot(&evolved, &ctx.output, "psi_kernel", &prov)?;
        if let Some(o) = &oracle {
            write_snapshot(o, &ctx.output, "psi_oracle", &prov)?;
        }
    }
    let mut summary = json!({
        "alpha": dec.alpha(),
        "interval": [t0, t1],
        "initial_norm": psi.norm(),
        "kernel_norm_drift": (evolved.norm() - psi.norm()).abs(),
        "maslov_indices": [prop.mode(0).branch.maslov_index, prop.mode(1).branch.maslov_index],
    });
    if let Some(o) = &oracle {
        summary["oracle_norm_drift"] = json!((o.norm() - psi.norm()).abs());
        summary["l2_error"] = json!(evolved.l2_distance(o)?);
        summary["linf_error"] = json!(evolved.values.iter().zip(&o.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max));
        summary["linf_relative"] = json!(evolved.linf_relative(o)?);
    }
    let body = ctx.write_json("propagate.json", summary)?;
    println!("{}", serde_json::to_string_pretty(&body).expect("serialisable"));
    Ok(())
}

pub fn verify(ctx: &Context) -> Outcome {
    let task = ctx.config.verify.clone().unwrap_or_default();
    let criteria: Vec<Criterion> = task.criteria()?;
    let reports = verify::run_all(&criteria, &task.settings);
    let passed = reports.iter().all(|r| r.passed);
    let body = ctx.write_json(
        "verify.json",
        json!({
            "passed": passed,
            "criteria": reports,
        }),
    )?;
    println!("{}", serde_json::to_string_pretty(&body).expect("serialisable"));
    if passed {
        Ok(())
    } else {
        let failed: Vec<&str> = reports.iter().filter(|r| !r.passed).map(|r| r.criterion.name()).collect();
        Err(Failure::numerical("acceptance", format!("failed criteria: {}", failed.join(", ")), json!({ "failed": failed })))
    }
}
