//! Run configuration: an optional INI-style file overridden by flags.
//!
//! ```text
//! [model]
//! n = 6
//! boundary = periodic
//! A = 0.1
//! B = 40
//!
//! [command]
//! seed = all
//! grid_a = 0:1:21
//!
//! [output]
//! dir = out
//! format = csv
//! precision = 10
//! ```
//!
//! The model takes either dimensionless `A`, `B`, `C` or a physical set
//! `epsilon`, `sigma`, `b`, `k`, `q`, `m` that is rescaled; never both.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chainlab::equilibria::NewtonOptions;
use chainlab::potential::{rescale_physical, Boundary, ChainModel, ForceFieldParams, PhysicalParams, Rescaling};
use ini::Ini;

use crate::error::CliError;
use crate::format::{Format, Sink};

const DIMENSIONLESS_KEYS: [&str; 3] = ["A", "B", "C"];
const PHYSICAL_KEYS: [&str; 6] = ["epsilon", "sigma", "b", "k", "q", "m"];
const MODEL_KEYS: [&str; 12] = ["n", "boundary", "A", "B", "C", "epsilon", "sigma", "b", "k", "q", "m", "rescale"];
const OUTPUT_KEYS: [&str; 3] = ["dir", "format", "precision"];
const COMMAND_KEYS: [&str; 13] = [
    "tol",
    "max_iter",
    "grid_a",
    "grid_b",
    "seed",
    "amplitude",
    "max_steps",
    "max_amplitude",
    "max_period",
    "corrector",
    "shoot_tol",
    "dump_trajectory",
    "params",
];

/// Raw key/value pairs per section, before validation.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    pub model: BTreeMap<String, String>,
    pub command: BTreeMap<String, String>,
    pub output: BTreeMap<String, String>,
    /// Physical constants supplied through `--physical`.
    pub physical: BTreeMap<String, String>,
}

fn load_ini(path: &Path) -> Result<Ini, CliError> {
    Ini::load_from_file(path).map_err(|e| match e {
        ini::Error::Io(io) => CliError::Config(format!("cannot read {}: {io}", path.display())),
        ini::Error::Parse(p) => CliError::Config(format!("{}: {p}", path.display())),
    })
}

impl RawConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let ini = load_ini(path)?;
        let mut raw = RawConfig::default();
        for (section, props) in ini.iter() {
            let (map, allowed): (&mut BTreeMap<String, String>, &[&str]) = match section {
                Some("model") => (&mut raw.model, &MODEL_KEYS),
                Some("command") => (&mut raw.command, &COMMAND_KEYS),
                Some("output") => (&mut raw.output, &OUTPUT_KEYS),
                None if props.is_empty() => continue,
                None => {
                    return Err(CliError::Config(format!(
                        "{}: keys must be inside a [model], [command] or [output] section",
                        path.display()
                    )))
                }
                Some(other) => {
                    return Err(CliError::Config(format!("{}: unknown section [{other}]", path.display())))
                }
            };
            for (key, value) in props.iter() {
                if !allowed.contains(&key) {
                    return Err(CliError::Config(format!(
                        "{}: unknown key '{key}' in [{}]",
                        path.display(),
                        section.unwrap_or_default()
                    )));
                }
                map.insert(key.to_string(), value.trim().to_string());
            }
        }
        Ok(raw)
    }

    /// Reads a physical parameter file; `carbon` names the built-in set.
    pub fn load_physical(&mut self, source: &str) -> Result<(), CliError> {
        if source.eq_ignore_ascii_case("carbon") {
            let c = PhysicalParams::CARBON;
            for (k, v) in [
                ("epsilon", c.epsilon),
                ("sigma", c.sigma),
                ("b", c.bond_length),
                ("k", c.stiffness),
                ("q", c.charge),
                ("m", c.mass),
            ] {
                self.physical.insert(k.into(), v.to_string());
            }
            return Ok(());
        }
        let path = Path::new(source);
        let ini = load_ini(path)?;
        for (_, props) in ini.iter() {
            for (key, value) in props.iter() {
                if !PHYSICAL_KEYS.contains(&key) {
                    return Err(CliError::Config(format!(
                        "{}: unknown physical parameter '{key}' (expected one of {})",
                        path.display(),
                        PHYSICAL_KEYS.join(", ")
                    )));
                }
                self.physical.insert(key.to_string(), value.trim().to_string());
            }
        }
        Ok(())
    }

    pub fn set<T: ToString>(map: &mut BTreeMap<String, String>, key: &str, value: Option<T>) {
        if let Some(v) = value {
            map.insert(key.to_string(), v.to_string());
        }
    }
}

fn parse<T: FromStr>(section: &str, key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| CliError::Config(format!("invalid value for {section}.{key}: '{value}' ({e})")))
}

/// The validated configuration of one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub n: Option<usize>,
    pub boundary: Option<Boundary>,
    pub params: Option<ForceFieldParams>,
    /// Present when the parameters came from physical constants.
    pub rescaling: Option<(PhysicalParams, Rescaling)>,
    pub newton: NewtonOptions,
    pub sink: Sink,
    command: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn resolve(raw: RawConfig) -> Result<Self, CliError> {
        let model = &raw.model;
        let n = model.get("n").map(|v| parse::<usize>("model", "n", v)).transpose()?;
        let boundary = model
            .get("boundary")
            .map(|v| v.parse::<Boundary>().map_err(|e| CliError::Config(e.to_string())))
            .transpose()?;

        let mut physical = raw.physical.clone();
        for key in PHYSICAL_KEYS {
            if let Some(v) = model.get(key) {
                physical.entry(key.to_string()).or_insert_with(|| v.clone());
            }
        }
        let dimensionless: Vec<&str> = DIMENSIONLESS_KEYS.into_iter().filter(|k| model.contains_key(*k)).collect();
        let physical_given: Vec<&str> = PHYSICAL_KEYS.into_iter().filter(|k| physical.contains_key(*k)).collect();
        if let (Some(d), Some(p)) = (dimensionless.first(), physical_given.first()) {
            return Err(CliError::Config(format!(
                "conflicting force-field parameters: {d} (dimensionless) and {p} (physical) are both given; \
                 use either A/B/C or a physical parameter set"
            )));
        }
        let rescale = model
            .get("rescale")
            .map(|v| parse::<bool>("model", "rescale", v))
            .transpose()?
            .unwrap_or(true);

        let (params, rescaling) = if !physical_given.is_empty() {
            if !rescale {
                return Err(CliError::Config(
                    "physical parameters need rescale = true; the model only runs in dimensionless form".into(),
                ));
            }
            let get = |key: &str, default: Option<f64>| -> Result<f64, CliError> {
                match physical.get(key) {
                    Some(v) => parse("model", key, v),
                    None => default.ok_or_else(|| CliError::Config(format!("physical parameter set is missing '{key}'"))),
                }
            };
            let p = PhysicalParams {
                epsilon: get("epsilon", None)?,
                sigma: get("sigma", None)?,
                bond_length: get("b", None)?,
                stiffness: get("k", None)?,
                charge: get("q", Some(0.0))?,
                mass: get("m", Some(1.0))?,
            };
            let r = rescale_physical(&p).map_err(|e| CliError::Config(e.to_string()))?;
            (Some(r.params), Some((p, r)))
        } else if !dimensionless.is_empty() {
            let get = |key: &str| -> Result<f64, CliError> {
                model.get(key).map_or(Ok(0.0), |v| parse("model", key, v))
            };
            let p = ForceFieldParams::new(get("A")?, get("B")?, get("C")?).map_err(|e| CliError::Config(e.to_string()))?;
            (Some(p), None)
        } else {
            (None, None)
        };

        let out = &raw.output;
        let dir = PathBuf::from(out.get("dir").map_or("out", String::as_str));
        let format = out
            .get("format")
            .map(|v| v.parse::<Format>().map_err(CliError::Config))
            .transpose()?
            .unwrap_or(Format::Csv);
        let precision = out
            .get("precision")
            .map(|v| parse::<usize>("output", "precision", v))
            .transpose()?
            .unwrap_or(10);
        if !(6..=17).contains(&precision) {
            return Err(CliError::Config(format!("precision must be in [6, 17], got {precision}")));
        }

        let mut newton = NewtonOptions::default();
        if let Some(v) = raw.command.get("tol") {
            newton.tol = parse("command", "tol", v)?;
        }
        if let Some(v) = raw.command.get("max_iter") {
            newton.max_iter = parse("command", "max_iter", v)?;
        }
        if !(newton.tol > 0.0) || newton.max_iter == 0 {
            return Err(CliError::Config("tol must be > 0 and max-iter >= 1".into()));
        }

        Ok(RunConfig {
            n,
            boundary,
            params,
            rescaling,
            newton,
            sink: Sink::new(dir, format, precision),
            command: raw.command,
        })
    }

    pub fn model(&self) -> Result<ChainModel, CliError> {
        let n = self.n.ok_or_else(|| CliError::Config("missing --n".into()))?;
        let boundary = self.boundary.ok_or_else(|| CliError::Config("missing --boundary".into()))?;
        let params = self.params.ok_or_else(|| {
            CliError::Config("missing force-field parameters: give --A/--B/--C or --physical".into())
        })?;
        ChainModel::new(n, boundary, params).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn command_str(&self, key: &str) -> Option<&str> {
        self.command.get(key).map(String::as_str)
    }

    /// A typed value from the `[command]` section (already merged with flags).
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.command.get(key).map(|v| parse("command", key, v)).transpose()
    }
}
