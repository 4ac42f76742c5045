use std::path::{Path, PathBuf};

use kmse_core::harness::{self, output, ExperimentConfig};
use kmse_core::parzen::{self, ParzenConfig};
use kmse_core::KmseError;
use log::info;

use crate::manifest::{load_config, sha256_hex, LoadedConfig, Manifest};
use crate::{Common, Failure};

fn classify(e: KmseError) -> Failure {
    match e {
        KmseError::Config(_)
        | KmseError::Data(_)
        | KmseError::InvalidArgument(_)
        | KmseError::DimensionMismatch { .. }
        | KmseError::InsufficientClass { .. } => Failure::Validation(e.to_string()),
        _ => Failure::Runtime(e.to_string()),
    }
}

fn io_fail(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(format!("{}: {e}", path.display()))
}

struct Run<'a> {
    sub: &'a str,
    args: &'a Common,
    loaded: LoadedConfig,
    seed: u64,
    workers: usize,
    outputs: Vec<String>,
    data: Option<(PathBuf, String)>,
}

impl Run<'_> {
    fn write(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut std::io::BufWriter<std::fs::File>) -> kmse_core::Result<()>,
    ) -> Result<(), Failure> {
        output::write_file(&self.args.out.join(name), body).map_err(classify)?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    fn finish(self) -> Result<(), Failure> {
        let m = Manifest {
            subcommand: self.sub.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_path: self.loaded.path.display().to_string(),
            config_sha256: sha256_hex(self.loaded.text.as_bytes()),
            config_text: self.loaded.text.clone(),
            master_seed: self.seed,
            seed_override: self.args.seed,
            workers: self.workers,
            data_path: self.data.as_ref().map(|(p, _)| p.display().to_string()),
            data_sha256: self.data.map(|(_, h)| h),
            outputs: self.outputs,
        };
        let path = self.args.out.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&m).map_err(|e| io_fail(&path, e))?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| io_fail(&path, e))
    }
}

pub fn run(sub: &str, args: &Common) -> Result<(), Failure> {
    let loaded = load_config(&args.config, sub)?;
    let workers = match args.workers {
        Some(0) => return Err(Failure::Validation("--workers must be >= 1".into())),
        Some(w) => w,
        None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    std::fs::create_dir_all(&args.out).map_err(|e| io_fail(&args.out, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    info!("{sub}: config {}, {workers} workers", loaded.path.display());

    let run = Run { sub, args, loaded, seed: 0, workers, outputs: Vec::new(), data: None };
    pool.install(|| if sub == "parzen" { run_parzen(run) } else { run_experiment(run) })
}

fn run_experiment(mut run: Run) -> Result<(), Failure> {
    let mut cfg = ExperimentConfig::from_toml_str(&run.loaded.text).map_err(classify)?;
    if let Some(s) = run.args.seed.or(run.loaded.replay_seed) {
        cfg.master_seed = s;
    }
    run.seed = cfg.master_seed;
    match run.sub {
        "risk-sweep" => match cfg.sweep.clone() {
            Some(sw) => {
                let rep = harness::sweep(&cfg, sw.axis, &sw.values).map_err(classify)?;
                run.write("sweep.csv", |w| output::write_sweep(w, &rep))?;
                run.write("sweep_records.csv", |w| output::write_sweep_records(w, &rep))?;
            }
            None => {
                let rep = harness::estimate_risk(&cfg.scenario().map_err(classify)?).map_err(classify)?;
                run.write("records.csv", |w| output::write_records(w, &rep.records))?;
                run.write("summary.csv", |w| output::write_summary(w, &rep.summaries))?;
            }
        },
        "tradeoff" => {
            let rep = harness::tradeoff(&cfg).map_err(classify)?;
            run.write("tradeoff.csv", |w| output::write_sweep(w, &rep))?;
            run.write("tradeoff_records.csv", |w| output::write_sweep_records(w, &rep))?;
        }
        "improvement-grid" => {
            let rep = harness::improvement_grid(&cfg).map_err(classify)?;
            run.write("grid_cells.csv", |w| output::write_grid_cells(w, &rep))?;
            run.write("grid_summary.csv", |w| output::write_grid_summary(w, &rep))?;
        }
        "loocv-check" => {
            let section = cfg.loocv_check.clone().unwrap_or_default();
            let rep = harness::loocv_check(&section, cfg.master_seed).map_err(classify)?;
            run.write("loocv_check.csv", |w| output::write_loocv_check(w, &rep))?;
            let passed = rep.passed();
            let (max, tol) = (rep.max_rel_diff, rep.tolerance);
            run.finish()?;
            if !passed {
                return Err(Failure::Runtime(format!(
                    "closed-form and naive LOOCV disagree: max relative difference {max:e} > {tol:e}"
                )));
            }
            println!("loocv-check: max relative difference {max:e} (tolerance {tol:e})");
            return Ok(());
        }
        other => unreachable!("unknown subcommand {other}"),
    }
    run.finish()
}

fn run_parzen(mut run: Run) -> Result<(), Failure> {
    let mut cfg = ParzenConfig::from_toml_str(&run.loaded.text).map_err(classify)?;
    if let Some(s) = run.args.seed.or(run.loaded.replay_seed) {
        cfg.master_seed = s;
    }
    run.seed = cfg.master_seed;
    cfg.validate().map_err(classify)?;
    let data_path = if cfg.data.is_absolute() { cfg.data.clone() } else { run.loaded.base_dir.join(&cfg.data) };
    let bytes = std::fs::read(&data_path)
        .map_err(|e| Failure::Validation(format!("cannot read {}: {e}", data_path.display())))?;
    let data = parzen::read_csv(bytes.as_slice(), &cfg.label_column).map_err(|e| match e {
        KmseError::Data(m) => Failure::Validation(format!("{}: {m}", data_path.display())),
        other => classify(other),
    })?;
    run.data = Some((data_path, sha256_hex(&bytes)));

    let rep = parzen::run_parzen(&cfg, &data).map_err(classify)?;
    if let Some(rows) = &rep.per_estimator {
        run.write("parzen_per_estimator.csv", |w| parzen::write_rows(w, rows))?;
    }
    if let Some(rows) = &rep.shared {
        run.write("parzen_shared.csv", |w| parzen::write_rows(w, rows))?;
    }
    run.write("parzen_sigma.csv", |w| parzen::write_sigmas(w, &rep))?;
    run.finish()
}
