use std::path::{Path, PathBuf};

use apfit_core::dataio::{load_voltage_file, parse_apd_list};
use apfit_core::model::ModelId;
use apfit_core::orchestrator::{load_config, DatasetConfig, FitConfig};
use apfit_core::stimulus::StimulusConfig;
use clap::{Args, ValueEnum};

/// Failure that maps to exit status 2: bad flags, unreadable inputs or an
/// invalid configuration.
#[derive(Debug)]
pub struct Invalid(pub String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    Invalid(msg.into()).into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StimKind {
    Square,
    Biphasic,
}

#[derive(Debug, Clone, Default, Args)]
pub struct StimArgs {
    /// Stimulus waveform
    #[arg(long, value_enum)]
    pub stim: Option<StimKind>,
    /// Square pulse amplitude, 1/ms
    #[arg(long, value_name = "X")]
    pub stim_magnitude: Option<f64>,
    /// Pulse duration, ms
    #[arg(long, value_name = "MS")]
    pub stim_duration: Option<f64>,
    /// Biphasic amplitude i_mag
    #[arg(long, value_name = "X")]
    pub stim_imag: Option<f64>,
    /// Biphasic time scale a
    #[arg(long, value_name = "X")]
    pub stim_a: Option<f64>,
    /// Biphasic zero-crossing offset b
    #[arg(long, value_name = "X")]
    pub stim_b: Option<f64>,
    /// Biphasic peak offset c
    #[arg(long, value_name = "X")]
    pub stim_c: Option<f64>,
}

impl StimArgs {
    pub fn apply(&self, base: StimulusConfig) -> anyhow::Result<StimulusConfig> {
        let mut stim = match (self.stim, base) {
            (Some(StimKind::Square), StimulusConfig::Biphasic { .. }) => {
                StimulusConfig::default_square()
            }
            (Some(StimKind::Biphasic), StimulusConfig::Square { .. }) => {
                StimulusConfig::default_biphasic()
            }
            _ => base,
        };
        match &mut stim {
            StimulusConfig::Square {
                magnitude,
                duration,
            } => {
                let stray = [
                    ("--stim-imag", self.stim_imag),
                    ("--stim-a", self.stim_a),
                    ("--stim-b", self.stim_b),
                    ("--stim-c", self.stim_c),
                ];
                if let Some((flag, _)) = stray.iter().find(|(_, v)| v.is_some()) {
                    return Err(invalid(format!("{flag} applies only to --stim biphasic")));
                }
                if let Some(m) = self.stim_magnitude {
                    *magnitude = m;
                }
                if let Some(d) = self.stim_duration {
                    *duration = d;
                }
            }
            StimulusConfig::Biphasic {
                i_mag,
                a,
                b,
                c,
                duration,
            } => {
                if self.stim_magnitude.is_some() {
                    return Err(invalid(
                        "--stim-magnitude applies only to --stim square; use --stim-imag",
                    ));
                }
                for (slot, flag) in [
                    (i_mag, self.stim_imag),
                    (a, self.stim_a),
                    (b, self.stim_b),
                    (c, self.stim_c),
                    (duration, self.stim_duration),
                ] {
                    if let Some(v) = flag {
                        *slot = v;
                    }
                }
            }
        }
        stim.validate()
            .map_err(|e| invalid(format!("stimulus: {e}")))?;
        Ok(stim)
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct ProtocolArgs {
    /// Recorded stimuli per cycle length
    #[arg(long, value_name = "N")]
    pub num_stimuli: Option<usize>,
    /// Unrecorded stimuli applied first to settle the model
    #[arg(long, value_name = "N")]
    pub pre_stimuli: Option<usize>,
    /// Spacing of data samples, ms
    #[arg(long, value_name = "MS")]
    pub sample_interval: Option<f64>,
    /// Peak value data is scaled to; 0 leaves data unscaled
    #[arg(long, value_name = "X")]
    pub normalize_to: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct FitArgs {
    /// Model id (mfhn, ms, mms, fk, bocf, bbocf)
    #[arg(long)]
    pub model: Option<ModelId>,
    /// Voltage data file, one sample per line: PATH:CL_MS[:WEIGHT] (repeatable)
    #[arg(long = "data", value_name = "PATH:CL[:W]")]
    pub data: Vec<String>,
    /// APD targets: "LIST":CL_MS:THRESHOLD[:WEIGHT], LIST comma-separated ms (repeatable)
    #[arg(long = "apd", value_name = "LIST:CL:THR[:W]")]
    pub apd: Vec<String>,
    #[command(flatten)]
    pub protocol: ProtocolArgs,
    #[command(flatten)]
    pub stim: StimArgs,
    /// Swarm size
    #[arg(long, value_name = "N")]
    pub particles: Option<usize>,
    /// PSO iterations after initialization
    #[arg(long, value_name = "N")]
    pub iterations: Option<usize>,
    /// Personal-best attraction
    #[arg(long, value_name = "X")]
    pub phi1: Option<f64>,
    /// Global-best attraction
    #[arg(long, value_name = "X")]
    pub phi2: Option<f64>,
    /// Constriction coefficient; derived from phi1 + phi2 when omitted
    #[arg(long, value_name = "X")]
    pub chi: Option<f64>,
    /// Learning rate
    #[arg(long, value_name = "X")]
    pub gamma: Option<f64>,
    /// RNG seed; random when omitted and printed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores)
    #[arg(long, value_name = "N")]
    pub threads: Option<usize>,
    /// Hold a parameter at a value: NAME=VALUE (repeatable)
    #[arg(long = "fix", value_name = "NAME=VALUE")]
    pub fix: Vec<String>,
    /// Search range for a parameter: NAME=MIN:MAX (repeatable)
    #[arg(long = "bounds", value_name = "NAME=MIN:MAX")]
    pub bounds: Vec<String>,
    /// Write the fitted parameters (TSV, three decimals)
    #[arg(long, value_name = "PATH")]
    pub out_params: Option<PathBuf>,
    /// Write the run-details JSON document
    #[arg(long, value_name = "PATH")]
    pub out_details: Option<PathBuf>,
    /// Write best-fit traces as CSV
    #[arg(long, value_name = "PATH")]
    pub out_trace: Option<PathBuf>,
    /// Write the lowest error per iteration as CSV
    #[arg(long, value_name = "PATH")]
    pub out_convergence: Option<PathBuf>,
    /// Start from a config or run-details JSON file; flags take precedence
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
}

fn parse_f64(text: &str, what: &str, whole: &str) -> anyhow::Result<f64> {
    text.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| invalid(format!("'{whole}': {what} '{text}' is not a number")))
}

/// `PATH:CL[:WEIGHT]`, splitting from the right so paths may contain colons.
pub fn parse_data_spec(spec: &str) -> anyhow::Result<(PathBuf, f64, f64)> {
    let parts: Vec<&str> = spec.rsplitn(3, ':').collect();
    let numeric = |s: &str| s.trim().parse::<f64>().is_ok();
    match parts.as_slice() {
        [w, cl, path] if numeric(w) && numeric(cl) => Ok((
            PathBuf::from(path),
            parse_f64(cl, "cycle length", spec)?,
            parse_f64(w, "weight", spec)?,
        )),
        _ => match spec.rsplit_once(':') {
            Some((path, cl)) if !path.is_empty() => Ok((
                PathBuf::from(path),
                parse_f64(cl, "cycle length", spec)?,
                1.0,
            )),
            _ => Err(invalid(format!(
                "--data '{spec}': expected PATH:CL[:WEIGHT]"
            ))),
        },
    }
}

/// `LIST:CL:THRESHOLD[:WEIGHT]`.
pub fn parse_apd_spec(spec: &str) -> anyhow::Result<(Vec<f64>, f64, f64, f64)> {
    let parts: Vec<&str> = spec.split(':').collect();
    let (list, cl, thr, w) = match parts.as_slice() {
        [list, cl, thr] => (*list, *cl, *thr, None),
        [list, cl, thr, w] => (*list, *cl, *thr, Some(*w)),
        _ => {
            return Err(invalid(format!(
                "--apd '{spec}': expected LIST:CL:THRESHOLD[:WEIGHT]"
            )))
        }
    };
    let targets = parse_apd_list(list).map_err(|e| invalid(format!("--apd '{spec}': {e}")))?;
    let weight = match w {
        Some(w) => parse_f64(w, "weight", spec)?,
        None => 1.0,
    };
    Ok((
        targets,
        parse_f64(cl, "cycle length", spec)?,
        parse_f64(thr, "threshold", spec)?,
        weight,
    ))
}

fn split_assignment<'a>(
    spec: &'a str,
    flag: &str,
    shape: &str,
) -> anyhow::Result<(&'a str, &'a str)> {
    spec.split_once('=')
        .map(|(n, v)| (n.trim(), v))
        .filter(|(n, _)| !n.is_empty())
        .ok_or_else(|| invalid(format!("{flag} '{spec}': expected {shape}")))
}

pub fn read_voltage(path: &Path) -> anyhow::Result<Vec<f64>> {
    let bytes =
        std::fs::read(path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
    load_voltage_file(&bytes).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

impl FitArgs {
    /// Merges the optional config file with the flags.
    pub fn to_config(&self) -> anyhow::Result<FitConfig> {
        let mut config = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
                let mut c =
                    load_config(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
                if let Some(m) = self.model {
                    if m != c.model {
                        c.model = m;
                        c.parameters.clear();
                    }
                }
                c
            }
            None => {
                let model = self
                    .model
                    .ok_or_else(|| invalid("--model is required unless --config is given"))?;
                let mut c = FitConfig::new(model);
                c.seed = rand::random();
                c
            }
        };

        for spec in &self.data {
            let (path, cl, weight) = parse_data_spec(spec)?;
            let samples = read_voltage(&path)?;
            config.datasets.push(DatasetConfig::Voltage {
                label: Some(path.display().to_string()),
                samples,
                cycle_length: cl,
                weight,
            });
        }
        for spec in &self.apd {
            let (targets, cl, threshold, weight) = parse_apd_spec(spec)?;
            config.datasets.push(DatasetConfig::Apd {
                label: None,
                targets,
                cycle_length: cl,
                threshold,
                weight,
            });
        }

        let p = &self.protocol;
        if let Some(n) = p.num_stimuli {
            config.protocol.num_stimuli = n;
        }
        if let Some(n) = p.pre_stimuli {
            config.protocol.pre_stimuli = n;
        }
        if let Some(si) = p.sample_interval {
            config.protocol.sample_interval = si;
        }
        if let Some(n) = p.normalize_to {
            config.normalize_to = Some(n);
        }
        config.stimulus = self.stim.apply(config.stimulus)?;

        let h = &mut config.hyper;
        if let Some(v) = self.particles {
            h.particles = v;
        }
        if let Some(v) = self.iterations {
            h.iterations = v;
        }
        if let Some(v) = self.phi1 {
            h.phi1 = v;
        }
        if let Some(v) = self.phi2 {
            h.phi2 = v;
        }
        if let Some(v) = self.chi {
            h.chi = Some(v);
        }
        if let Some(v) = self.gamma {
            h.gamma = v;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }

        for spec in &self.fix {
            let (name, value) = split_assignment(spec, "--fix", "NAME=VALUE")?;
            config.fix(name, parse_f64(value, "value", spec)?);
        }
        for spec in &self.bounds {
            let (name, range) = split_assignment(spec, "--bounds", "NAME=MIN:MAX")?;
            let (lo, hi) = range
                .split_once(':')
                .ok_or_else(|| invalid(format!("--bounds '{spec}': expected NAME=MIN:MAX")))?;
            config.set_bounds(
                name,
                parse_f64(lo, "min", spec)?,
                parse_f64(hi, "max", spec)?,
            );
        }
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn data_specs() {
        assert_eq!(
            parse_data_spec("trace.txt:500").unwrap(),
            (PathBuf::from("trace.txt"), 500.0, 1.0)
        );
        assert_eq!(
            parse_data_spec("trace.txt:500:2.5").unwrap(),
            (PathBuf::from("trace.txt"), 500.0, 2.5)
        );
        assert_eq!(
            parse_data_spec("dir:x/t.txt:300").unwrap(),
            (PathBuf::from("dir:x/t.txt"), 300.0, 1.0)
        );
        assert!(parse_data_spec("trace.txt").is_err());
        assert!(parse_data_spec("trace.txt:abc").is_err());
    }

    #[test]
    fn apd_specs() {
        assert_eq!(
            parse_apd_spec("210,195:500:0.8").unwrap(),
            (vec![210.0, 195.0], 500.0, 0.8, 1.0)
        );
        assert_eq!(parse_apd_spec("210:500:0.8:3").unwrap().3, 3.0);
        assert!(parse_apd_spec("210:500").is_err());
        assert!(parse_apd_spec("210,x:500:0.8").is_err());
    }

    #[test]
    fn stimulus_flags() {
        let args = StimArgs {
            stim: Some(StimKind::Biphasic),
            stim_imag: Some(0.5),
            ..StimArgs::default()
        };
        match args.apply(StimulusConfig::default()).unwrap() {
            StimulusConfig::Biphasic { i_mag, a, .. } => {
                assert_eq!(i_mag, 0.5);
                assert_eq!(a, 0.725);
            }
            other => panic!("{other:?}"),
        }
        let args = StimArgs {
            stim_a: Some(1.0),
            ..StimArgs::default()
        };
        assert!(args.apply(StimulusConfig::default()).is_err());
    }
}
