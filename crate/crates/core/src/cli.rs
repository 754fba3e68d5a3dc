//! The `wsp4` command line: argument parsing, configuration, output
//! formatting and exit codes. `main.rs` only forwards to [`run`].

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::characters::{
    self, check_psi, lowest_layer_ok, nonnegative_integral, universal_pbw_character, verify_twisted_identity, CharacterCache,
    CharacterError,
};
use crate::classifier::{
    self, classify_level, enumerate_modules, h_system, phi_label, psi_eigenvalues, psi_label, psi_orbits, ClassifierError, Form,
    LabelRef, Level, LevelClass, ModuleLabel, ModuleRow,
};
use crate::mode_algebra::{commutator, jacobi_check, modes_up_to};
use crate::qz_series::compare_up_to;
use crate::rat::{parse_q, q, qi, to_display, to_frac_string, Q};

pub const CACHE_ENV: &str = "WSP4_CACHE_DIR";

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Text,
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Classifier,
    Modes,
    Characters,
    All,
}

#[derive(Parser, Debug)]
#[command(name = "wsp4", version, about = "Exact computations for the subregular W-algebra of sp4")]
struct Cli {
    /// key=value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    /// Compute characters without reading or writing the cache.
    #[arg(long, global = true)]
    no_cache: bool,
    #[arg(long, global = true)]
    parallelism: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Admissible levels k = −3 + p/q for one denominator.
    Levels {
        #[arg(long = "q")]
        denominator: i64,
        #[arg(long, default_value_t = 1)]
        p_min: i64,
        #[arg(long)]
        p_max: i64,
    },
    /// The simple modules at a level with their ψ- and Φ-images.
    Modules {
        #[arg(long, allow_hyphen_values = true)]
        k: String,
    },
    /// A truncated character.
    Character {
        #[arg(long, allow_hyphen_values = true)]
        k: String,
        /// s,i,j with s one of 1, 2, 3, 1', 2'.
        #[arg(long)]
        label: String,
        #[arg(long)]
        order: Option<usize>,
    },
    /// Run an invariant suite and report PASS or FAIL.
    Verify {
        #[arg(long, value_enum)]
        suite: Suite,
        #[arg(long, allow_hyphen_values = true)]
        k: Option<String>,
        #[arg(long)]
        order: Option<usize>,
        #[arg(long, default_value_t = 3)]
        bound: i64,
        #[arg(long, default_value_t = 4)]
        depth: i64,
    },
}

/// Settings after merging defaults, the config file, the environment and
/// flags, in that order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Config {
    pub cache_dir: PathBuf,
    pub default_order: usize,
    pub parallelism: usize,
    pub output_format: OutputFormat,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            cache_dir: std::env::temp_dir().join("wsp4-cache"),
            default_order: 8,
            parallelism: 1,
            output_format: OutputFormat::Text,
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Internal(String),
}

impl From<ClassifierError> for CliError {
    fn from(e: ClassifierError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<CharacterError> for CliError {
    fn from(e: CharacterError) -> Self {
        match e {
            CharacterError::Classifier(c) => c.into(),
            other => CliError::Internal(other.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

impl Config {
    /// Parse `key = value` lines; `#` starts a comment.
    pub fn parse_into(&mut self, text: &str) -> CliResult<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |what: &str| CliError::Usage(format!("config line {}: {what}", n + 1));
            let (key, val) = line.split_once('=').ok_or_else(|| bad("expected key=value"))?;
            let val = val.trim();
            match key.trim() {
                "cache_dir" => self.cache_dir = PathBuf::from(val),
                "default_order" => self.default_order = val.parse().map_err(|_| bad("default_order must be a nonnegative integer"))?,
                "parallelism" => {
                    self.parallelism = val.parse().map_err(|_| bad("parallelism must be a positive integer"))?;
                    if self.parallelism == 0 {
                        return Err(bad("parallelism must be at least 1"));
                    }
                }
                "output_format" => {
                    self.output_format = OutputFormat::from_str(val, true).map_err(|_| bad("output_format is text, json or csv"))?
                }
                other => return Err(bad(&format!("unknown key {other:?}"))),
            }
        }
        Ok(())
    }

    pub fn load(path: Option<&Path>, env_cache: Option<String>) -> CliResult<Config> {
        let mut c = Config::default();
        if let Some(p) = path {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("config {}: {e}", p.display())))?;
            c.parse_into(&text)?;
        }
        if let Some(d) = env_cache.filter(|d| !d.is_empty()) {
            c.cache_dir = PathBuf::from(d);
        }
        Ok(c)
    }
}

/// What a command produced: text for stdout and the exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Parse `args` (including the program name) and run the command.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let text = e.to_string();
            return if code == EXIT_PASS {
                Outcome { code, stdout: text, stderr: String::new() }
            } else {
                Outcome { code, stdout: String::new(), stderr: text }
            };
        }
    };
    match execute(cli) {
        Ok((pass, stdout)) => Outcome { code: if pass { EXIT_PASS } else { EXIT_FAIL }, stdout, stderr: String::new() },
        Err(CliError::Usage(m)) => Outcome { code: EXIT_USAGE, stdout: String::new(), stderr: format!("error: {m}\n") },
        Err(CliError::Internal(m)) => Outcome { code: EXIT_INTERNAL, stdout: String::new(), stderr: format!("internal error: {m}\n") },
    }
}

fn execute(cli: Cli) -> CliResult<(bool, String)> {
    let mut cfg = Config::load(cli.config.as_deref(), std::env::var(CACHE_ENV).ok())?;
    if let Some(f) = cli.format {
        cfg.output_format = f;
    }
    if let Some(d) = cli.cache_dir {
        cfg.cache_dir = d;
    }
    if let Some(p) = cli.parallelism {
        if p == 0 {
            return Err(CliError::Usage("parallelism must be at least 1".into()));
        }
        cfg.parallelism = p;
    }
    // A global pool can be installed once per process; later calls keep it.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.parallelism).build_global();
    let cache = (!cli.no_cache).then(|| CharacterCache::new(cfg.cache_dir.clone()));
    match cli.cmd {
        Cmd::Levels { denominator, p_min, p_max } => cmd_levels(denominator, p_min, p_max, &cfg).map(|s| (true, s)),
        Cmd::Modules { k } => cmd_modules(&parse_level(&k)?, &cfg).map(|s| (true, s)),
        Cmd::Character { k, label, order } => {
            let level = parse_level(&k)?;
            let lab = parse_label(&label, &level)?;
            cmd_character(&lab, &level, order.unwrap_or(cfg.default_order), cache.as_ref(), &cfg).map(|s| (true, s))
        }
        Cmd::Verify { suite, k, order, bound, depth } => {
            let levels = match k {
                Some(k) => vec![parse_level(&k)?],
                None => vec![classify_level(&q(-5, 3)), classify_level(&q(-7, 4))],
            };
            cmd_verify(suite, &levels, order.unwrap_or(cfg.default_order), bound, depth, &cfg)
        }
    }
}

fn parse_level(k: &str) -> CliResult<Level> {
    let kq = parse_q(k).ok_or_else(|| CliError::Usage(format!("cannot parse level {k:?}")))?;
    let level = classify_level(&kq);
    match level.class {
        LevelClass::Critical => Err(CliError::Usage("CriticalLevel: k = -3 is excluded".into())),
        LevelClass::Principal { .. } | LevelClass::Coprincipal { .. } => Ok(level),
        _ => Err(ClassifierError::UnsupportedLevel(to_display(&kq)).into()),
    }
}

fn valid_ranges(level: &Level) -> String {
    let labels = enumerate_modules(level).unwrap_or_default();
    let forms: BTreeSet<Form> = labels.iter().map(|l| l.s).collect();
    let mut out = String::new();
    for f in forms {
        let pairs: Vec<String> = labels.iter().filter(|l| l.s == f).map(|l| format!("({},{})", l.i, l.j)).collect();
        let _ = write!(out, "\n  s={f}: (i,j) in {}", pairs.join(" "));
    }
    out
}

fn parse_label(text: &str, level: &Level) -> CliResult<ModuleLabel> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let bad = || CliError::Usage(format!("label {text:?} must be s,i,j"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let s: Form = parts[0].parse().map_err(CliError::Usage)?;
    let i: i64 = parts[1].parse().map_err(|_| bad())?;
    let j: i64 = parts[2].parse().map_err(|_| bad())?;
    ModuleLabel::new(s, i, j, level).map_err(|e| CliError::Usage(format!("{e}; valid labels:{}", valid_ranges(level))))
}

/// Right-aligned columns.
fn table(rows: &[Vec<String>]) -> String {
    let ncol = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..ncol).map(|c| rows.iter().filter_map(|r| r.get(c)).map(String::len).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for r in rows {
        let cells: Vec<String> = r.iter().enumerate().map(|(c, s)| format!("{:>w$}", s, w = widths[c])).collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

fn csv(rows: &[Vec<String>]) -> String {
    let esc = |s: &String| if s.contains(',') || s.contains('"') { format!("\"{}\"", s.replace('"', "\"\"")) } else { s.clone() };
    rows.iter().map(|r| r.iter().map(esc).collect::<Vec<_>>().join(",") + "\n").collect()
}

fn json<T: Serialize>(v: &T) -> CliResult<String> {
    serde_json::to_string_pretty(v).map(|s| s + "\n").map_err(|e| CliError::Internal(e.to_string()))
}

fn render<T: Serialize>(cfg: &Config, value: &T, rows: &[Vec<String>]) -> CliResult<String> {
    match cfg.output_format {
        OutputFormat::Text => Ok(table(rows)),
        OutputFormat::Csv => Ok(csv(rows)),
        OutputFormat::Json => json(value),
    }
}

#[derive(Serialize)]
struct LevelRow {
    k: String,
    class: &'static str,
    p: i64,
    q: i64,
    modules: usize,
}

fn cmd_levels(qq: i64, p_min: i64, p_max: i64, cfg: &Config) -> CliResult<String> {
    if qq != 3 && qq != 4 {
        return Err(CliError::Usage(format!("UnsupportedDenominator: q = {qq}; only 3 (principal) and 4 (coprincipal) are handled")));
    }
    if p_min > p_max {
        return Err(CliError::Usage(format!("empty range p_min = {p_min} > p_max = {p_max}")));
    }
    let mut out = Vec::new();
    for p in p_min.max(1)..=p_max {
        let level = classify_level(&(q(p, qq) - qi(3)));
        let class = match level.class {
            LevelClass::Principal { .. } if qq == 3 => "principal",
            LevelClass::Coprincipal { .. } if qq == 4 => "coprincipal",
            _ => continue,
        };
        out.push(LevelRow { k: to_frac_string(&level.k), class, p, q: qq, modules: enumerate_modules(&level)?.len() });
    }
    let mut rows = vec![vec!["k".into(), "class".into(), "p".into(), "q".into(), "modules".into()]];
    for r in &out {
        rows.push(vec![r.k.clone(), r.class.into(), r.p.to_string(), r.q.to_string(), r.modules.to_string()]);
    }
    render(cfg, &out, &rows)
}

fn label_ref(l: &LabelRef) -> String {
    format!("{}_{{{},{}}}", l.s, l.i, l.j)
}

fn cmd_modules(level: &Level, cfg: &Config) -> CliResult<String> {
    let table_rows: Vec<ModuleRow> = classifier::module_table(level)?;
    let mut rows = vec![["s", "i", "j", "xi", "chi", "top_dim", "psi", "phi"].iter().map(|s| s.to_string()).collect::<Vec<_>>()];
    for r in &table_rows {
        rows.push(vec![
            r.s.to_string(),
            r.i.to_string(),
            r.j.to_string(),
            r.xi.clone(),
            r.chi.clone(),
            r.top_dim.to_string(),
            label_ref(&r.psi_image),
            label_ref(&r.phi_image),
        ]);
    }
    render(cfg, &table_rows, &rows)
}

#[derive(Serialize)]
struct CharacterOut {
    k: String,
    label: LabelRef,
    xi: String,
    chi: String,
    series: crate::qz_series::SeriesJson,
}

fn cmd_character(lab: &ModuleLabel, level: &Level, order: usize, cache: Option<&CharacterCache>, cfg: &Config) -> CliResult<String> {
    let ch = match cache {
        Some(c) => c.character(lab, level, order)?,
        None => characters::character(lab, level, order)?,
    };
    match cfg.output_format {
        OutputFormat::Json => json(&CharacterOut {
            k: to_frac_string(&level.k),
            label: lab.into(),
            xi: to_frac_string(&lab.xi),
            chi: to_frac_string(&lab.chi),
            series: ch.to_json(),
        }),
        OutputFormat::Csv => {
            let mut rows = vec![vec!["q_exp".to_string(), "z_exp".into(), "coeff".into()]];
            for (n, m, c) in ch.terms() {
                rows.push(vec![to_frac_string(&(ch.q_offset() + qi(n))), to_frac_string(&(ch.z_offset() + qi(m))), to_frac_string(&c)]);
            }
            Ok(csv(&rows))
        }
        OutputFormat::Text => Ok(format!(
            "{lab} at k = {}\nq_offset {}  z_offset {}  order {}\n{}",
            to_display(&level.k),
            to_display(ch.q_offset()),
            to_display(ch.z_offset()),
            ch.order(),
            ch.text_table()
        )),
    }
}

/// Result of one verification suite.
#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub level: Option<String>,
    pub passed: bool,
    pub checks: usize,
    pub summary: String,
    pub failures: Vec<String>,
}

impl SuiteReport {
    fn new(suite: &str, level: Option<&Level>) -> Self {
        SuiteReport {
            suite: suite.into(),
            level: level.map(|l| to_frac_string(&l.k)),
            passed: true,
            checks: 0,
            summary: String::new(),
            failures: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.passed = false;
            self.failures.push(what());
        }
    }
}

/// ψ-orbit closure, Φ² = id and the three h-conditions for every label.
pub fn verify_classifier(level: &Level) -> CliResult<SuiteReport> {
    let mut r = SuiteReport::new("classifier", Some(level));
    let labels = enumerate_modules(level)?;
    let orbits = psi_orbits(level)?;
    r.check(orbits.iter().map(Vec::len).sum::<usize>() == labels.len(), || "orbits do not partition the labels".into());
    for lab in &labels {
        let img = psi_label(lab, level)?;
        let (xi2, chi2) = psi_eigenvalues(&lab.xi, &lab.chi, lab.top_dim, &level.k);
        r.check((img.xi.clone(), img.chi.clone()) == (xi2, chi2), || format!("ψ eigenvalues at {lab}"));
        let phi2 = phi_label(&phi_label(lab, level)?, level)?;
        r.check(phi2.key() == lab.key(), || format!("Φ² ≠ id at {lab}"));
        let h = h_system(lab, &level.k);
        r.check(h.iter().all(|x| *x == Q::from_integer(0.into())), || format!("h-system at {lab}"));
    }
    r.summary = format!("{} labels, {} orbits", labels.len(), orbits.len());
    Ok(r)
}

/// Bracket antisymmetry and the Jacobi identity on a truncated module.
pub fn verify_modes(bound: i64, depth: i64) -> SuiteReport {
    let mut r = SuiteReport::new("modes", None);
    let k = q(-5, 3);
    let modes = modes_up_to(bound.max(4));
    for &a in &modes {
        for &b in &modes {
            let mut sum = commutator(a, b, &k);
            sum.add(&commutator(b, a, &k));
            r.check(sum.is_zero(), || format!("[{a:?},{b:?}] not antisymmetric"));
        }
    }
    let rep = jacobi_check(bound, depth, q(1, 3), q(2, 7), k, 1);
    r.checks += rep.checked;
    for v in rep.violations.iter().take(5) {
        r.failures.push(format!("Jacobi violation at {:?} on {:?}", v.triple, v.state));
    }
    r.passed &= rep.violations.is_empty();
    r.summary = format!(
        "{} Jacobi violations, {} evaluations, {} skipped outside the truncation",
        rep.violations.len(),
        rep.checked,
        rep.skipped
    );
    r
}

/// The character invariants and twisted identities at one level.
pub fn verify_characters(level: &Level, order: usize) -> CliResult<SuiteReport> {
    let mut r = SuiteReport::new("characters", Some(level));
    let labels = enumerate_modules(level)?;
    let mut twisted = 0;
    for lab in &labels {
        let ch = characters::character(lab, level, order)?;
        r.check(nonnegative_integral(&ch), || format!("negative or fractional coefficient in {lab}"));
        r.check(lowest_layer_ok(&ch, lab), || format!("lowest layer of {lab}"));
        let psi = check_psi(lab, level, order)?;
        r.check(psi.passed(), || format!("ψ-compatibility at {lab}: {:?}", psi.discrepancy));
        let phi = characters::character(&phi_label(lab, level)?, level, order)?.invert_z();
        let ok = compare_up_to(&ch, &phi, &(&lab.chi + qi(order as i64))).is_ok();
        r.check(ok, || format!("Φ-compatibility at {lab}"));
        if !matches!(lab.s, Form::S1 | Form::S1p) {
            let t = verify_twisted_identity(lab, level, order)?;
            twisted += 1;
            r.check(t.agree, || format!("twisted identity at {lab}: {:?}", t.discrepancy));
        }
    }
    let vac = characters::character(&labels[0], level, order)?;
    let pbw = universal_pbw_character(order, vac.window())?;
    let below = vac.terms().iter().all(|(n, m, c)| *c <= pbw.get(*n, *m));
    r.check(below && vac.layer(1) == pbw.layer(1), || "vacuum exceeds the PBW bound".into());
    r.summary = format!("{} characters to order {order}, {twisted} twisted identities", labels.len());
    if r.passed && twisted > 0 {
        r.summary.push_str(" agree");
    }
    Ok(r)
}

fn cmd_verify(suite: Suite, levels: &[Level], order: usize, bound: i64, depth: i64, cfg: &Config) -> CliResult<(bool, String)> {
    let mut reports = Vec::new();
    if matches!(suite, Suite::Classifier | Suite::All) {
        for l in levels {
            reports.push(verify_classifier(l)?);
        }
    }
    if matches!(suite, Suite::Modes | Suite::All) {
        reports.push(verify_modes(bound, depth));
    }
    if matches!(suite, Suite::Characters | Suite::All) {
        for l in levels {
            reports.push(verify_characters(l, order)?);
        }
    }
    let pass = reports.iter().all(|r| r.passed);
    let rows: Vec<Vec<String>> = std::iter::once(vec!["result".into(), "suite".into(), "k".into(), "checks".into(), "summary".into()])
        .chain(reports.iter().map(|r| {
            vec![
                if r.passed { "PASS" } else { "FAIL" }.into(),
                r.suite.clone(),
                r.level.clone().unwrap_or_else(|| "-".into()),
                r.checks.to_string(),
                r.summary.clone(),
            ]
        }))
        .collect();
    let mut out = match cfg.output_format {
        OutputFormat::Text => {
            let mut s = String::new();
            for r in &reports {
                let lv = r.level.as_deref().map(|k| format!(" k={k}")).unwrap_or_default();
                let _ = writeln!(s, "{} {}{lv}: {} ({} checks)", if r.passed { "PASS" } else { "FAIL" }, r.suite, r.summary, r.checks);
                for f in &r.failures {
                    let _ = writeln!(s, "  {f}");
                }
            }
            s
        }
        _ => render(cfg, &reports, &rows)?,
    };
    if cfg.output_format == OutputFormat::Text {
        let _ = writeln!(out, "{}", if pass { "PASS" } else { "FAIL" });
    }
    Ok((pass, out))
}
