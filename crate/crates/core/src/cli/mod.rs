//! Command-line front end. Every subcommand is a pure function of the
//! config file, the input files and the seed.

mod config;

pub use config::{Paths, RunConfig};

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::classify::Model;
use crate::dataset::{synth_generate, Dataset};
use crate::domain::NoiseTypePolicy;
use crate::error::{Error, Result};
use crate::eval::{
    baseline_sweep, defend_dataset, evasion_benchmark, make_folds, noise_stats, phase_one, recsys_eval, sweep_budget,
    target_for, train_defender, write_baseline_csv, write_recsys_csv, write_sweep_csv, AttackSuite, BaselineDefense,
    Folds,
};
use crate::evade::{panda_traced, EvasionMethod, TraceStep};
use crate::gametheory::{solve_game_lp, write_solution_csv, GameInstance};
use crate::seed::SeedSpec;

#[derive(Debug, Parser)]
#[command(name = "attrishield", version, about = "Defend public data against attribute inference")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration; every field is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `master_seed` from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, env = "ATTRISHIELD_THREADS")]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the synthetic dataset as JSON lines.
    GenData,
    /// Train the defender's classifier on its fold and write it as JSON.
    Train,
    /// Defend the test users at `beta`; writes the defended set and a
    /// per-user noise CSV next to it.
    Defend {
        /// Also write every PANDA move to this CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Score the configured attackers on a (defended) dataset.
    Attack,
    /// Attacker accuracy and noise cost for every budget, plus baselines.
    Sweep,
    /// PANDA vs JSMA vs FGSM and the three noise-type policies.
    CompareEvasion,
    /// Solve a small obfuscation game as a linear program.
    GameLp,
    /// Top-N precision of matrix factorization on clean and defended data.
    RecsysEval,
}

/// Parses `args` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    cfg.validate()?;
    let threads = match cli.threads {
        Some(0) => return Err(Error::InvalidConfig("--threads must be >= 1".into())),
        Some(n) => n,
        None => 0,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let ctx = Ctx {
        seed: SeedSpec::new(cfg.master_seed),
        cfg,
        out: cli.out,
    };
    pool.install(|| match cli.command {
        Command::GenData => gen_data(&ctx),
        Command::Train => train(&ctx),
        Command::Defend { trace } => defend(&ctx, trace.as_deref()),
        Command::Attack => attack(&ctx),
        Command::Sweep => sweep(&ctx),
        Command::CompareEvasion => compare_evasion(&ctx),
        Command::GameLp => game_lp(&ctx),
        Command::RecsysEval => recsys(&ctx),
    })
}

struct Ctx {
    cfg: RunConfig,
    seed: SeedSpec,
    out: Option<PathBuf>,
}

impl Ctx {
    fn out(&self, fallback: Option<&PathBuf>, what: &str) -> Result<PathBuf> {
        self.out
            .clone()
            .or_else(|| fallback.cloned())
            .ok_or_else(|| Error::InvalidConfig(format!("{what} needs --out")))
    }

    fn data(&self) -> Result<Dataset> {
        let ds = match &self.cfg.paths.data {
            Some(path) => Dataset::load(path)?,
            None => synth_generate(&self.cfg.synth, &self.cfg.grid, self.seed.derive("synth"))?,
        };
        if ds.m() < 2 {
            return Err(Error::InvalidConfig("the dataset needs at least two labels".into()));
        }
        Ok(ds)
    }

    fn folds(&self, ds: &Dataset) -> Result<Folds> {
        make_folds(ds, self.cfg.test_fraction, self.cfg.overlap_pct, self.seed)
    }

    fn defender(&self, folds: &Folds) -> Result<Model> {
        let model = match &self.cfg.paths.model {
            Some(path) => Model::from_json(&std::fs::read_to_string(path)?)?,
            None => train_defender(&folds.defender, self.cfg.defender, &self.cfg.train, self.cfg.defender_hidden)?,
        };
        let (d, m) = match &model {
            Model::Linear(l) => (l.d, l.m),
            Model::Mlp(n) => (n.d, n.m),
        };
        if d != folds.test.d() || m != folds.test.m() {
            return Err(Error::InvalidConfig(format!(
                "model is {m} labels x {d} inputs, data is {} x {}",
                folds.test.m(),
                folds.test.d()
            )));
        }
        Ok(model)
    }

    fn attackers(&self, folds: &Folds) -> Result<AttackSuite> {
        AttackSuite::train(
            &self.cfg.attackers,
            &folds.attacker,
            self.cfg.attacker,
            self.seed.derive("attackers"),
        )
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// `dir/stem.<suffix>.csv` next to `path`.
fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}.csv"))
}

fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

fn gen_data(ctx: &Ctx) -> Result<()> {
    let out = ctx.out(ctx.cfg.paths.data.as_ref(), "gen-data")?;
    let ds = synth_generate(&ctx.cfg.synth, &ctx.cfg.grid, ctx.seed.derive("synth"))?;
    let mut w = create(&out)?;
    ds.write_jsonl(&mut w)?;
    w.flush()?;
    Ok(())
}

fn train(ctx: &Ctx) -> Result<()> {
    let out = ctx.out(ctx.cfg.paths.model.as_ref(), "train")?;
    let ds = ctx.data()?;
    let folds = ctx.folds(&ds)?;
    let model = train_defender(&folds.defender, ctx.cfg.defender, &ctx.cfg.train, ctx.cfg.defender_hidden)?;
    let mut w = create(&out)?;
    w.write_all(model.to_json()?.as_bytes())?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn defend(ctx: &Ctx, trace: Option<&Path>) -> Result<()> {
    let out = ctx.out(None, "defend")?;
    let ds = ctx.data()?;
    let folds = ctx.folds(&ds)?;
    let model = ctx.defender(&folds)?;
    let p = target_for(ctx.cfg.target, &folds.defender)?;
    let cache = phase_one(&model, &folds.test, &ctx.cfg.panda);
    let defended = defend_dataset(&folds.test, &cache, &p, ctx.cfg.beta, ctx.seed)?;

    let mut w = create(&out)?;
    defended.data.write_jsonl(&mut w)?;
    w.flush()?;

    let mut csv = csv::Writer::from_writer(create(&sidecar(&out, "noise"))?);
    csv.write_record(["user_id", "chosen_index", "l0_cost", "binding", "mu0", "lambda"])?;
    for (row, o) in folds.test.rows().iter().zip(&defended.outcomes) {
        csv.write_record([
            row.user_id.clone(),
            (o.chosen + 1).to_string(),
            o.l0_cost.to_string(),
            o.report.binding.to_string(),
            fmt(o.report.mu0),
            fmt(o.report.lambda),
        ])?;
    }
    csv.flush()?;

    if let Some(path) = trace {
        let mut csv = csv::Writer::from_writer(create(path)?);
        csv.write_record(["user_id", "target", "iteration", "index", "direction", "margin"])?;
        for row in folds.test.rows() {
            for target in 0..crate::classify::Classifier::m(&model) {
                let mut steps: Vec<TraceStep> = Vec::new();
                panda_traced(&model, &row.x, target, &ctx.cfg.panda, ds.grid(), Some(&mut steps));
                for s in steps {
                    csv.write_record([
                        row.user_id.clone(),
                        (target + 1).to_string(),
                        s.iteration.to_string(),
                        (s.index + 1).to_string(),
                        s.direction.to_string(),
                        fmt(s.margin),
                    ])?;
                }
            }
        }
        csv.flush()?;
    }
    Ok(())
}

fn attack(ctx: &Ctx) -> Result<()> {
    let out = ctx.out(None, "attack")?;
    let ds = ctx.data()?;
    let folds = ctx.folds(&ds)?;
    let suite = ctx.attackers(&folds)?;
    let scored = match &ctx.cfg.paths.defended {
        Some(path) => Dataset::load(path)?,
        None => folds.test.clone(),
    };
    if scored.d() != ds.d() || scored.m() != ds.m() {
        return Err(Error::InvalidConfig("defended data does not match the training data".into()));
    }
    let defended_fold = if suite.needs_adversarial_training() {
        let model = ctx.defender(&folds)?;
        let p = target_for(ctx.cfg.target, &folds.defender)?;
        let cache = phase_one(&model, &folds.attacker, &ctx.cfg.panda);
        Some(defend_dataset(&folds.attacker, &cache, &p, ctx.cfg.beta, ctx.seed.derive("attacker-fold"))?.data)
    } else {
        None
    };
    let mut csv = csv::Writer::from_writer(create(&out)?);
    csv.write_record(["attack", "accuracy"])?;
    for (kind, acc) in suite.evaluate(&scored, defended_fold.as_ref())? {
        csv.write_record([kind.name().to_string(), fmt(acc)])?;
    }
    csv.flush()?;
    Ok(())
}

fn sweep(ctx: &Ctx) -> Result<()> {
    let out = ctx.out(ctx.cfg.sweep_out.as_ref(), "sweep")?;
    let ds = ctx.data()?;
    let folds = ctx.folds(&ds)?;
    let model = ctx.defender(&folds)?;
    let suite = ctx.attackers(&folds)?;
    let p = target_for(ctx.cfg.target, &folds.defender)?;
    let result = sweep_budget(
        &model,
        &suite,
        &folds.attacker,
        &folds.test,
        &ctx.cfg.betas,
        &p,
        &ctx.cfg.panda,
        ctx.seed,
    )?;
    let mut w = create(&out)?;
    write_sweep_csv(&mut w, &result)?;
    w.flush()?;

    // Mean applied noise per chosen target at every budget.
    let cache = phase_one(&model, &folds.test, &ctx.cfg.panda);
    let mut csv = csv::Writer::from_writer(create(&sidecar(&out, "targets"))?);
    csv.write_record(["beta", "target", "users", "mean_l0"])?;
    for &beta in &ctx.cfg.betas {
        let defended = defend_dataset(&folds.test, &cache, &p, beta, ctx.seed)?;
        let stats = noise_stats(defended.outcomes.iter().map(|o| (o.chosen, o.l0_cost)));
        for (target, mean_l0) in stats {
            let users = defended.outcomes.iter().filter(|o| o.chosen == target).count();
            csv.write_record([fmt(beta), (target + 1).to_string(), users.to_string(), fmt(mean_l0)])?;
        }
    }
    csv.flush()?;

    let b = &ctx.cfg.baselines;
    if !(b.rr_epsilons.is_empty() && b.correlation_ks.is_empty() && b.qpm_betas.is_empty()) {
        let linear = match &model {
            Model::Linear(l) => l.clone(),
            Model::Mlp(_) => crate::classify::train_linear(&folds.defender, &ctx.cfg.train)?,
        };
        let rows = baseline_sweep(&suite, &folds, &linear, b, ctx.seed.derive("baselines"))?;
        let mut w = create(&sidecar(&out, "baselines"))?;
        write_baseline_csv(&mut w, &rows)?;
        w.flush()?;
    }
    Ok(())
}

fn compare_evasion(ctx: &Ctx) -> Result<()> {
    let out = ctx.out(None, "compare-evasion")?;
    let ds = ctx.data()?;
    let folds = ctx.folds(&ds)?;
    let model = ctx.defender(&folds)?;
    let n = match ctx.cfg.evasion_users {
        0 => folds.test.len(),
        k => k.min(folds.test.len()),
    };
    let users = folds.test.subset(&(0..n).collect::<Vec<_>>());
    let policy = ctx.cfg.panda.policy;
    let mut configs = vec![
        (EvasionMethod::Panda, policy),
        (EvasionMethod::Jsma, NoiseTypePolicy::ModifyAdd),
        (EvasionMethod::Fgsm, NoiseTypePolicy::ModifyAdd),
    ];
    for other in [NoiseTypePolicy::ModifyAdd, NoiseTypePolicy::AddNew, NoiseTypePolicy::ModifyExist] {
        if other != policy {
            configs.push((EvasionMethod::Panda, other));
        }
    }
    let summaries = evasion_benchmark(&model, &users, &configs, &ctx.cfg.panda, ctx.cfg.fgsm_epsilon)?;
    let mut csv = csv::Writer::from_writer(create(&out)?);
    csv.write_record([
        "method",
        "policy",
        "attempts",
        "successes",
        "success_rate",
        "paired_mean_l0",
        "mean_l0",
    ])?;
    for s in summaries {
        csv.write_record([
            s.method.name().to_string(),
            policy_name(s.policy).to_string(),
            s.attempts.to_string(),
            s.successes.to_string(),
            fmt(s.success_rate),
            fmt(s.paired_mean_l0),
            fmt(s.mean_l0_success),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

fn policy_name(p: NoiseTypePolicy) -> &'static str {
    match p {
        NoiseTypePolicy::ModifyExist => "modify_exist",
        NoiseTypePolicy::AddNew => "add_new",
        NoiseTypePolicy::ModifyAdd => "modify_add",
    }
}

fn game_lp(ctx: &Ctx) -> Result<()> {
    let out = ctx.out(None, "game-lp")?;
    let path = ctx
        .cfg
        .paths
        .game
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("game-lp needs paths.game".into()))?;
    let instance: GameInstance = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let (joint, losses) = instance.parts()?;
    let (f, objective) = solve_game_lp(&joint, &losses, instance.beta)?;
    let mut w = create(&out)?;
    write_solution_csv(&mut w, &f, objective)?;
    w.flush()?;
    Ok(())
}

fn recsys(ctx: &Ctx) -> Result<()> {
    let out = ctx.out(None, "recsys-eval")?;
    let ds = ctx.data()?;
    let folds = ctx.folds(&ds)?;
    let model = ctx.defender(&folds)?;
    let p = target_for(ctx.cfg.target, &folds.defender)?;
    let cache = phase_one(&model, &folds.test, &ctx.cfg.panda);
    let mut sets = Vec::new();
    for &beta in &ctx.cfg.recsys_betas {
        let d = defend_dataset(&folds.test, &cache, &p, beta, ctx.seed)?;
        sets.push((format!("attriguard:beta={}", fmt(beta)), d.data));
    }
    for &epsilon in &ctx.cfg.recsys_rr_epsilons {
        let rr = BaselineDefense::Rr(crate::baselines::RrConfig {
            epsilon,
            grid: ds.grid().clone(),
        });
        let (d, _) = rr.apply(&folds.test, ctx.seed.derive("baselines"))?;
        sets.push((format!("rr:epsilon={}", fmt(epsilon)), d));
    }
    let rows = recsys_eval(&folds.test, &sets, &ctx.cfg.mf, ctx.cfg.top_n, ctx.seed)?;
    let mut w = create(&out)?;
    write_recsys_csv(&mut w, &rows)?;
    w.flush()?;
    Ok(())
}

