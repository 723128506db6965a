//! Flat `key = value` configuration files with `#` comments, merged with
//! command-line overrides and the `HEI_SEED` environment variable.
//! Unknown keys are rejected so typos fail loudly before anything runs.

use std::collections::BTreeMap;
use std::path::Path;

use hei_core::{builtin, Domain, KernelFamily, Method, RunConfig, TestFunction};

use crate::CliError;

/// Parse a config file into a key/value map. Lines are `key = value`;
/// blank lines and `#` comments are skipped.
pub fn parse_file(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::config(format!(
                "{}:{}: expected `key = value`, got `{raw}`",
                path.display(),
                lineno + 1
            )));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() {
            return Err(CliError::config(format!(
                "{}:{}: empty key",
                path.display(),
                lineno + 1
            )));
        }
        if map.insert(key.clone(), value).is_some() {
            return Err(CliError::config(format!(
                "{}:{}: duplicate key `{key}`",
                path.display(),
                lineno + 1
            )));
        }
    }
    Ok(map)
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse::<T>()
        .map_err(|_| CliError::config(format!("key `{key}`: cannot parse `{value}`")))
}

fn parse_f64_list(key: &str, value: &str) -> Result<Vec<f64>, CliError> {
    value
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::config(format!("key `{key}`: cannot parse `{s}` as a number")))
        })
        .collect()
}

/// Everything a `run` invocation needs, before resolution.
#[derive(Debug, Default, Clone)]
pub struct RunSettings {
    pub function: Option<String>,
    pub command: Option<String>,
    pub method: Option<String>,
    pub seed: Option<u64>,
    pub n_ini: Option<usize>,
    pub n_tot: Option<usize>,
    pub kernel: Option<String>,
    pub out: Option<String>,
    pub format: Option<String>,
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
    pub timeout_secs: Option<u64>,
}

impl RunSettings {
    /// Read settings from a parsed key/value map, rejecting unknown keys.
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self, CliError> {
        let mut s = RunSettings::default();
        for (key, value) in map {
            match key.as_str() {
                "function" => s.function = Some(value.clone()),
                "command" => s.command = Some(value.clone()),
                "method" => s.method = Some(value.clone()),
                "seed" => s.seed = Some(parse_num(key, value)?),
                "n_ini" => s.n_ini = Some(parse_num(key, value)?),
                "n_tot" => s.n_tot = Some(parse_num(key, value)?),
                "kernel" => s.kernel = Some(value.clone()),
                "out" => s.out = Some(value.clone()),
                "format" => s.format = Some(value.clone()),
                "lower" => s.lower = Some(parse_f64_list(key, value)?),
                "upper" => s.upper = Some(parse_f64_list(key, value)?),
                "timeout_secs" => s.timeout_secs = Some(parse_num(key, value)?),
                other => {
                    return Err(CliError::config(format!("unknown config key `{other}`")));
                }
            }
        }
        Ok(s)
    }

    /// Overlay `other` (command-line flags win over file values).
    pub fn overlay(&mut self, other: RunSettings) {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(
            function, command, method, seed, n_ini, n_tot, kernel, out, format, lower, upper,
            timeout_secs
        );
    }
}

/// A fully resolved run: the core configuration plus how to evaluate.
pub struct ResolvedRun {
    pub config: RunConfig,
    pub method: Method,
    pub source: ObjectiveSource,
    pub out: String,
    pub timeout_secs: u64,
}

/// Where the objective values come from.
pub enum ObjectiveSource {
    Builtin(TestFunction),
    External { command: String },
}

pub const DEFAULT_SEED: u64 = 2024;
pub const DEFAULT_TIMEOUT_SECS: u64 = 600;

fn seed_from_env() -> Result<Option<u64>, CliError> {
    match std::env::var("HEI_SEED") {
        Ok(v) => v
            .parse::<u64>()
            .map(Some)
            .map_err(|_| CliError::config(format!("HEI_SEED: cannot parse `{v}` as an integer"))),
        Err(_) => Ok(None),
    }
}

pub fn resolve_run(settings: RunSettings) -> Result<ResolvedRun, CliError> {
    if let Some(fmt) = settings.format.as_deref() {
        if fmt != "csv" {
            return Err(CliError::config(format!("unsupported output format `{fmt}`")));
        }
    }
    let method = Method::parse(settings.method.as_deref().unwrap_or("hei-dsd"))
        .map_err(CliError::config_from)?;
    let kernel = KernelFamily::parse(settings.kernel.as_deref().unwrap_or("matern52"))
        .map_err(CliError::config_from)?;
    let seed = match seed_from_env()? {
        Some(s) => s,
        None => settings.seed.unwrap_or(DEFAULT_SEED),
    };

    let (source, domain) = match (&settings.function, &settings.command) {
        (Some(_), Some(_)) => {
            return Err(CliError::config(
                "config sets both `function` and `command`; pick one objective",
            ));
        }
        (Some(name), None) => {
            if settings.lower.is_some() || settings.upper.is_some() {
                return Err(CliError::config(
                    "`lower`/`upper` only apply to external objectives; built-ins fix their domain",
                ));
            }
            let f = builtin(name).map_err(CliError::config_from)?;
            let domain = f.domain().clone();
            (ObjectiveSource::Builtin(f), domain)
        }
        (None, Some(cmd)) => {
            let (Some(lower), Some(upper)) = (settings.lower.clone(), settings.upper.clone())
            else {
                return Err(CliError::config(
                    "external objectives need `lower` and `upper` domain bounds",
                ));
            };
            let domain = Domain::new(lower, upper).map_err(CliError::config_from)?;
            (ObjectiveSource::External { command: cmd.clone() }, domain)
        }
        (None, None) => {
            return Err(CliError::config(
                "config needs an objective: set `function` or `command`",
            ));
        }
    };

    let mut config = RunConfig::for_method(method, domain, seed);
    config.kernel = kernel;
    if let Some(n) = settings.n_ini {
        config.n_ini = n;
    }
    if let Some(n) = settings.n_tot {
        config.n_tot = n;
    }
    config.validate().map_err(CliError::config_from)?;

    Ok(ResolvedRun {
        config,
        method,
        source,
        out: settings.out.unwrap_or_else(|| "trace.csv".to_string()),
        timeout_secs: settings.timeout_secs.unwrap_or(DEFAULT_TIMEOUT_SECS),
    })
}

/// Suite settings before resolution.
#[derive(Debug, Default, Clone)]
pub struct SuiteSettings {
    pub function: Option<String>,
    pub methods: Option<Vec<String>>,
    pub replications: Option<usize>,
    pub seed: Option<u64>,
    pub n_ini: Option<usize>,
    pub n_tot: Option<usize>,
    pub kernel: Option<String>,
    pub out: Option<String>,
    pub workers: Option<usize>,
}

impl SuiteSettings {
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self, CliError> {
        let mut s = SuiteSettings::default();
        for (key, value) in map {
            match key.as_str() {
                "function" => s.function = Some(value.clone()),
                "methods" => {
                    s.methods =
                        Some(value.split(',').map(|m| m.trim().to_string()).collect())
                }
                "replications" => s.replications = Some(parse_num(key, value)?),
                "seed" => s.seed = Some(parse_num(key, value)?),
                "n_ini" => s.n_ini = Some(parse_num(key, value)?),
                "n_tot" => s.n_tot = Some(parse_num(key, value)?),
                "kernel" => s.kernel = Some(value.clone()),
                "out" => s.out = Some(value.clone()),
                "workers" => s.workers = Some(parse_num(key, value)?),
                other => {
                    return Err(CliError::config(format!("unknown config key `{other}`")));
                }
            }
        }
        Ok(s)
    }

    pub fn overlay(&mut self, other: SuiteSettings) {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(function, methods, replications, seed, n_ini, n_tot, kernel, out, workers);
    }
}

pub struct ResolvedSuite {
    pub function: TestFunction,
    pub methods: Vec<Method>,
    pub replications: usize,
    pub seed: u64,
    pub n_ini: Option<usize>,
    pub n_tot: Option<usize>,
    pub kernel: KernelFamily,
    pub out: String,
    pub workers: usize,
}

pub fn resolve_suite(settings: SuiteSettings) -> Result<ResolvedSuite, CliError> {
    let Some(name) = settings.function else {
        return Err(CliError::config(
            "suites need a built-in `function` (gap tables require a known minimum)",
        ));
    };
    let function = builtin(&name).map_err(CliError::config_from)?;
    let names = settings.methods.unwrap_or_default();
    if names.is_empty() {
        return Err(CliError::config("suite needs a non-empty `methods` list"));
    }
    let methods = names
        .iter()
        .map(|n| Method::parse(n).map_err(CliError::config_from))
        .collect::<Result<Vec<_>, _>>()?;
    let kernel = KernelFamily::parse(settings.kernel.as_deref().unwrap_or("matern52"))
        .map_err(CliError::config_from)?;
    let seed = match seed_from_env()? {
        Some(s) => s,
        None => settings.seed.unwrap_or(DEFAULT_SEED),
    };
    let workers = match settings.workers {
        Some(0) => return Err(CliError::config("`workers` must be at least 1")),
        Some(w) => w,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    Ok(ResolvedSuite {
        function,
        methods,
        replications: settings.replications.unwrap_or(20),
        seed,
        n_ini: settings.n_ini,
        n_tot: settings.n_tot,
        kernel,
        out: settings.out.unwrap_or_else(|| "gaps.csv".to_string()),
        workers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_str(text: &str) -> Result<BTreeMap<String, String>, CliError> {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, text).unwrap();
        parse_file(&path)
    }

    #[test]
    fn file_parsing_skips_comments_and_trims() {
        let map = parse_str(
            "# a comment\n\nfunction = camel3  # trailing comment\n  n_tot=25\nseed = 7\n",
        )
        .unwrap();
        assert_eq!(map.len(), 3);
        assert_eq!(map["function"], "camel3");
        assert_eq!(map["n_tot"], "25");
        assert_eq!(map["seed"], "7");
    }

    #[test]
    fn file_parsing_rejects_malformed_lines() {
        for bad in ["just a token\n", "= value\n", "seed = 1\nseed = 2\n"] {
            assert!(parse_str(bad).is_err(), "accepted {bad:?}");
        }
    }

    #[test]
    fn unknown_and_unparsable_keys_are_rejected() {
        let mut map = BTreeMap::new();
        map.insert("functon".to_string(), "camel3".to_string());
        let err = RunSettings::from_map(&map).unwrap_err();
        assert!(err.to_string().contains("functon"));

        let mut map = BTreeMap::new();
        map.insert("n_tot".to_string(), "twelve".to_string());
        let err = RunSettings::from_map(&map).unwrap_err();
        assert!(err.to_string().contains("n_tot"));
    }

    #[test]
    fn overlay_prefers_flag_values_and_keeps_the_rest() {
        let mut base = RunSettings {
            function: Some("branin".to_string()),
            seed: Some(1),
            n_tot: Some(50),
            ..RunSettings::default()
        };
        base.overlay(RunSettings { seed: Some(9), ..RunSettings::default() });
        assert_eq!(base.seed, Some(9));
        assert_eq!(base.function.as_deref(), Some("branin"));
        assert_eq!(base.n_tot, Some(50));
    }

    #[test]
    fn resolve_run_fills_defaults_for_a_builtin() {
        let settings = RunSettings {
            function: Some("camel3".to_string()),
            n_ini: Some(10),
            n_tot: Some(25),
            ..RunSettings::default()
        };
        let resolved = resolve_run(settings).unwrap();
        assert_eq!(resolved.method, Method::HeiDsd);
        assert_eq!(resolved.config.n_ini, 10);
        assert_eq!(resolved.config.n_tot, 25);
        assert_eq!(resolved.out, "trace.csv");
        assert_eq!(resolved.timeout_secs, DEFAULT_TIMEOUT_SECS);
        assert!(matches!(resolved.source, ObjectiveSource::Builtin(_)));
    }

    #[test]
    fn resolve_run_rejects_bad_objective_combinations() {
        let both = RunSettings {
            function: Some("camel3".to_string()),
            command: Some("./obj".to_string()),
            ..RunSettings::default()
        };
        assert!(resolve_run(both).is_err());
        assert!(resolve_run(RunSettings::default()).is_err());

        let bounds_on_builtin = RunSettings {
            function: Some("camel3".to_string()),
            lower: Some(vec![0.0, 0.0]),
            ..RunSettings::default()
        };
        assert!(resolve_run(bounds_on_builtin).is_err());

        let external_without_bounds = RunSettings {
            command: Some("./obj".to_string()),
            ..RunSettings::default()
        };
        assert!(resolve_run(external_without_bounds).is_err());

        let bad_format = RunSettings {
            function: Some("camel3".to_string()),
            format: Some("json".to_string()),
            ..RunSettings::default()
        };
        assert!(resolve_run(bad_format).is_err());
    }

    #[test]
    fn resolve_suite_validates_function_methods_and_workers() {
        let ok = SuiteSettings {
            function: Some("camel3".to_string()),
            methods: Some(vec!["ei-ok".to_string(), "hei-dsd".to_string()]),
            workers: Some(2),
            ..SuiteSettings::default()
        };
        let resolved = resolve_suite(ok).unwrap();
        assert_eq!(resolved.methods, vec![Method::EiOk, Method::HeiDsd]);
        assert_eq!(resolved.replications, 20);
        assert_eq!(resolved.workers, 2);
        assert_eq!(resolved.out, "gaps.csv");

        assert!(resolve_suite(SuiteSettings::default()).is_err());
        let empty_methods = SuiteSettings {
            function: Some("camel3".to_string()),
            methods: Some(vec![]),
            ..SuiteSettings::default()
        };
        assert!(resolve_suite(empty_methods).is_err());
        let zero_workers = SuiteSettings {
            function: Some("camel3".to_string()),
            methods: Some(vec!["ei-ok".to_string()]),
            workers: Some(0),
            ..SuiteSettings::default()
        };
        assert!(resolve_suite(zero_workers).is_err());
    }
}
