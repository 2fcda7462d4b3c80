//! Command-line front end for `beatmap`.
//!
//! Every run resolves its parameters (preset, then config file, then explicit
//! flags), executes one command and writes a CSV or JSON file whose header
//! holds the resolved parameters and options, so the file can be recomputed
//! with `beatmap rerun`.

pub mod calibration;
pub mod commands;
pub mod options;
pub mod output;
pub mod presets;


use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use beatmap::ModelParams;
use clap::Parser;
use serde::Deserialize;

use options::{Cli, Command, Common, Format, Options, RerunArgs};
use output::{Meta, TAU_NOTE};
use presets::Preset;

/// Name of the environment variable that fixes the worker-pool size.
pub const WORKERS_ENV: &str = "BEATMAP_WORKERS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DYNAMICAL: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Domain(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Internal(_) => 1,
            _ => EXIT_CONFIG,
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }
}

/// Parse `args` (program name first) and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("beatmap: {e}");
            e.exit_code()
        }
    }
}

fn configure_workers() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("{WORKERS_ENV} must be a positive integer, got `{raw}`")))?;
    // the global pool can only be set once per process
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn dispatch(command: Command) -> Result<i32, CliError> {
    configure_workers()?;
    match command {
        Command::Rerun(args) => rerun(&args),
        Command::Presets => {
            let mut out = std::io::stdout().lock();
            for name in presets::names() {
                let q = presets::get(name)?;
                let _ = writeln!(
                    out,
                    "{name:12} tau={} t_stim={} delta_t={} delta_phi={}",
                    q.tau, q.t_stim, q.delta_t, q.delta_phi
                );
            }
            Ok(EXIT_OK)
        }
        other => {
            let (common, opts) = other.into_parts().expect("run command");
            let (mut meta, preset) = resolve_params(&common)?;
            let mut opts = opts;
            opts.resolve(&meta.params, preset.as_ref())?;
            meta.command = opts.name().to_string();
            let format = common.format.unwrap_or_else(|| format_for(common.out.as_deref()));
            let (bytes, code) = produce(meta, &opts, format)?;
            emit(&bytes, common.out.as_deref())?;
            Ok(code)
        }
    }
}

fn format_for(out: Option<&Path>) -> Format {
    match out.and_then(Path::extension).and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
        _ => Format::Csv,
    }
}

/// Run a fully resolved request and encode the result.
pub fn produce(mut meta: Meta, opts: &Options, format: Format) -> Result<(Vec<u8>, i32), CliError> {
    let produced = commands::execute(opts, &meta.params)?;
    meta.options = opts.to_value();
    meta.outcome = produced.outcome;
    let bytes = output::render(format, &meta, &produced.table)?;
    let code = if produced.dynamical { EXIT_DYNAMICAL } else { EXIT_OK };
    Ok((bytes, code))
}

fn emit(bytes: &[u8], out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, bytes).map_err(|e| CliError::io(path, e)),
        None => std::io::stdout().lock().write_all(bytes).map_err(|e| CliError::io(Path::new("<stdout>"), e)),
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamOverrides {
    tau: Option<f64>,
    t_stim: Option<f64>,
    delta_t: Option<f64>,
    delta_phi: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    preset: Option<String>,
    #[serde(default)]
    params: ParamOverrides,
}

/// A config file is either a hand-written TOML file or a previous output,
/// whose header supplies the preset name and the full parameter set.
fn load_config(path: &Path) -> Result<ConfigFile, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let first = bytes.iter().find(|b| !b.is_ascii_whitespace()).copied();
    if matches!(first, Some(b'#') | Some(b'{')) {
        let (meta, _) = output::read_meta(&bytes)?;
        let p = meta.params;
        return Ok(ConfigFile {
            preset: meta.preset,
            params: ParamOverrides {
                tau: Some(p.tau),
                t_stim: Some(p.t_stim),
                delta_t: Some(p.delta_t),
                delta_phi: Some(p.delta_phi),
            },
        });
    }
    let text = String::from_utf8(bytes).map_err(|_| CliError::Config(format!("{}: not UTF-8", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Layer defaults, the preset (flag, else config), config parameters and
/// explicit flags, in that order.
fn resolve_params(common: &Common) -> Result<(Meta, Option<Preset>), CliError> {
    let config = common.config.as_deref().map(load_config).transpose()?.unwrap_or_default();
    let preset_name = common.preset.clone().or(config.preset);
    let preset = preset_name.as_deref().map(presets::get).transpose()?;

    let mut p = ModelParams { tau: 1000.0, t_stim: 500.0, delta_t: 0.0, delta_phi: 0.0 };
    let mut tau_source = "default";
    if let Some(q) = &preset {
        p = ModelParams { tau: q.tau, t_stim: q.t_stim, delta_t: q.delta_t, delta_phi: q.delta_phi };
        tau_source = "preset";
    }
    let layer = |p: &mut ModelParams, o: &ParamOverrides| {
        p.tau = o.tau.unwrap_or(p.tau);
        p.t_stim = o.t_stim.unwrap_or(p.t_stim);
        p.delta_t = o.delta_t.unwrap_or(p.delta_t);
        p.delta_phi = o.delta_phi.unwrap_or(p.delta_phi);
    };
    layer(&mut p, &config.params);
    if config.params.tau.is_some() {
        tau_source = "config";
    }
    let flags = ParamOverrides { tau: common.tau, t_stim: common.t_stim, delta_t: common.delta_t, delta_phi: common.delta_phi };
    layer(&mut p, &flags);
    if flags.tau.is_some() {
        tau_source = "flag";
    }
    p.validate().map_err(|e| CliError::Config(e.to_string()))?;

    let meta = Meta {
        tool: "beatmap".to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: String::new(),
        preset: preset_name,
        tau_source: tau_source.to_string(),
        tau_note: TAU_NOTE.to_string(),
        outcome: None,
        params: p,
        options: serde_json::Value::Null,
    };
    Ok((meta, preset))
}

fn rerun(args: &RerunArgs) -> Result<i32, CliError> {
    let original = std::fs::read(&args.file).map_err(|e| CliError::io(&args.file, e))?;
    let (meta, format) = output::read_meta(&original)?;
    meta.params.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let opts = Options::from_value(&meta.command, meta.options.clone())?;
    let mut meta = meta;
    meta.version = env!("CARGO_PKG_VERSION").to_string();
    let (bytes, code) = produce(meta, &opts, format)?;
    if args.check {
        if bytes != original {
            return Err(CliError::Domain(format!("{} is not reproduced", args.file.display())));
        }
        eprintln!("{}: reproduced", args.file.display());
        return Ok(code);
    }
    emit(&bytes, args.out.as_deref())?;
    Ok(code)
}
