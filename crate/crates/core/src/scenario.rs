//! Scenario, trajectory and manifest files.
//!
//! Scenario files use 1-based individual and source indices. Trajectories
//! are written twice: a CSV with one row per step and a JSON document that
//! also stores the low words of every double-double state, so a reloaded
//! JSON trajectory is bit-identical to the simulated one.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dynamics::{Regime, Trajectory};
use crate::network::{BiasModel, NetworkError, NetworkSpec, Source, ValidatedNetwork, validate_network};
use crate::real::{Precision, from_parts, real};

pub const SCHEMA_VERSION: u32 = 1;

pub const TOY12_JSON: &str = include_str!("../scenarios/toy12.json");
pub const KRACKHARDT_JSON: &str = include_str!("../scenarios/krackhardt.json");

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{context}, line {line}: {msg}")]
    Csv { context: String, line: usize, msg: String },
    #[error("{0}")]
    Invalid(String),
    #[error("invalid network: {}", join_errors(.0))]
    Validation(Vec<NetworkError>),
}

fn join_errors(errs: &[NetworkError]) -> String {
    errs.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

pub fn read_file(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), IoError> {
    std::fs::write(path, contents).map_err(|source| IoError::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceEntry {
    pub u: f64,
    /// 1-based.
    pub followers: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationDefaults {
    pub horizon: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferenceDefaults {
    pub m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    pub zero_tol: f64,
    pub agree_tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_tol: Option<f64>,
}

impl Default for InferenceDefaults {
    fn default() -> Self {
        InferenceDefaults {
            m: 2,
            p: None,
            zero_tol: 1e-7,
            agree_tol: 1e-7,
            rank_tol: None,
        }
    }
}

/// On-disk scenario document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub n: usize,
    pub weights: Vec<Vec<f64>>,
    #[serde(default)]
    pub sources: Vec<SourceEntry>,
    /// Keyed by 1-based individual index.
    #[serde(default)]
    pub bias: BTreeMap<String, BiasModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    pub simulation: SimulationDefaults,
    #[serde(default)]
    pub inference: InferenceDefaults,
}

impl ScenarioFile {
    pub fn parse(text: &str, context: &str) -> Result<Self, IoError> {
        serde_json::from_str(text).map_err(|source| IoError::Json {
            context: context.to_owned(),
            source,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// SHA-256 of the compact canonical serialization.
    pub fn hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("scenario serializes").as_bytes())
    }

    pub fn to_spec(&self) -> Result<NetworkSpec, IoError> {
        if self.schema != SCHEMA_VERSION {
            return Err(IoError::Invalid(format!(
                "unsupported schema {} (expected {SCHEMA_VERSION})",
                self.schema
            )));
        }
        if self.weights.len() != self.n {
            return Err(IoError::Invalid(format!(
                "n = {} but weights has {} rows",
                self.n,
                self.weights.len()
            )));
        }
        let one_based = |v: usize, what: &str| {
            v.checked_sub(1)
                .ok_or_else(|| IoError::Invalid(format!("{what} indices are 1-based, got 0")))
        };
        let mut sources = Vec::with_capacity(self.sources.len());
        for s in &self.sources {
            let followers = s
                .followers
                .iter()
                .map(|&f| one_based(f, "follower"))
                .collect::<Result<_, _>>()?;
            sources.push(Source {
                opinion: s.u,
                followers,
            });
        }
        let mut bias = BTreeMap::new();
        for (key, model) in &self.bias {
            let idx: usize = key
                .trim()
                .parse()
                .map_err(|_| IoError::Invalid(format!("bias key {key:?} is not an individual index")))?;
            bias.insert(one_based(idx, "bias")?, model.clone());
        }
        Ok(NetworkSpec {
            weights: self.weights.clone(),
            sources,
            bias,
        })
    }

    pub fn from_spec(name: &str, spec: &NetworkSpec, simulation: SimulationDefaults) -> Self {
        ScenarioFile {
            schema: SCHEMA_VERSION,
            name: name.to_owned(),
            description: String::new(),
            n: spec.n(),
            weights: spec.weights.clone(),
            sources: spec
                .sources
                .iter()
                .map(|s| SourceEntry {
                    u: s.opinion,
                    followers: s.followers.iter().map(|f| f + 1).collect(),
                })
                .collect(),
            bias: spec
                .bias
                .iter()
                .map(|(i, m)| ((i + 1).to_string(), m.clone()))
                .collect(),
            x0: None,
            simulation,
            inference: InferenceDefaults::default(),
        }
    }
}

/// A parsed and validated scenario.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub network: ValidatedNetwork,
}

impl Scenario {
    pub fn from_file(file: ScenarioFile) -> Result<Self, IoError> {
        let network = validate_network(file.to_spec()?).map_err(IoError::Validation)?;
        if let Some(x0) = &file.x0
            && x0.len() != file.n
        {
            return Err(IoError::Invalid(format!(
                "x0 has {} entries, expected {}",
                x0.len(),
                file.n
            )));
        }
        Ok(Scenario { file, network })
    }

    pub fn parse(text: &str, context: &str) -> Result<Self, IoError> {
        Self::from_file(ScenarioFile::parse(text, context)?)
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        Self::parse(&read_file(path)?, &path.display().to_string())
    }

    /// Loads a path, or a bundled scenario by name when no such file exists.
    pub fn resolve(arg: &str) -> Result<Self, IoError> {
        let path = Path::new(arg);
        if !path.exists()
            && let Some(s) = bundled(arg)
        {
            return s;
        }
        Self::load(path)
    }

    pub fn name(&self) -> &str {
        &self.file.name
    }
}

pub fn bundled(name: &str) -> Option<Result<Scenario, IoError>> {
    let text = match name {
        "toy12" => TOY12_JSON,
        "krackhardt" => KRACKHARDT_JSON,
        _ => return None,
    };
    Some(Scenario::parse(text, name))
}

pub fn toy12() -> Scenario {
    bundled("toy12").unwrap().expect("bundled toy12 scenario is valid")
}

pub fn krackhardt() -> Scenario {
    bundled("krackhardt")
        .unwrap()
        .expect("bundled krackhardt scenario is valid")
}

/// Advice relation among the 21 managers: `[i][j] = 1` when `i` asks `j`.
pub const KRACKHARDT_ADVICE: [[u8; 21]; 21] = [
    [0, 1, 0, 1, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 1, 0, 1, 0, 0, 1],
    [0, 0, 0, 0, 0, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1],
    [1, 1, 0, 1, 0, 1, 1, 1, 1, 1, 1, 1, 0, 1, 0, 0, 1, 1, 0, 1, 1],
    [1, 1, 0, 0, 0, 1, 0, 1, 0, 1, 1, 1, 0, 0, 0, 1, 1, 1, 0, 1, 1],
    [1, 1, 0, 0, 0, 1, 1, 1, 0, 1, 1, 0, 1, 1, 0, 1, 1, 1, 1, 1, 1],
    [0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1],
    [0, 1, 0, 0, 0, 1, 0, 0, 0, 0, 1, 1, 0, 1, 0, 0, 1, 1, 0, 0, 1],
    [0, 1, 0, 1, 0, 1, 1, 0, 0, 1, 1, 0, 0, 0, 0, 0, 0, 1, 0, 0, 1],
    [1, 1, 0, 0, 0, 1, 1, 1, 0, 1, 1, 1, 0, 1, 0, 1, 1, 1, 0, 0, 1],
    [1, 1, 1, 1, 1, 0, 0, 1, 0, 0, 1, 0, 1, 0, 1, 1, 1, 1, 1, 1, 0],
    [1, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1],
    [1, 1, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0],
    [0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 1],
    [1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 1, 1, 1, 1, 1, 1],
    [1, 1, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0],
    [1, 1, 0, 1, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 1],
    [1, 1, 1, 1, 1, 0, 1, 1, 1, 1, 1, 0, 1, 1, 1, 1, 0, 0, 1, 1, 1],
    [1, 1, 1, 0, 1, 0, 1, 0, 0, 1, 1, 0, 0, 1, 1, 0, 0, 1, 0, 1, 0],
    [1, 1, 0, 0, 0, 1, 0, 1, 0, 0, 1, 1, 0, 1, 1, 1, 1, 1, 1, 0, 1],
    [0, 1, 1, 1, 0, 1, 1, 1, 0, 0, 0, 1, 0, 1, 0, 0, 1, 1, 0, 1, 0],
];

/// Followers of the information source (0-based).
pub const KRACKHARDT_FOLLOWERS: [usize; 4] = [2, 3, 18, 19];

/// Weights derived from [`KRACKHARDT_ADVICE`]: `w_ij > 0` when `j` asks
/// `i`, `1/Γ_i` for non-followers and `1/(1.125 Γ_i + 0.155)` for
/// followers, with `Γ_i` the number of managers asking `i`.
pub fn krackhardt_weights() -> Vec<Vec<f64>> {
    let n = KRACKHARDT_ADVICE.len();
    let gamma: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| f64::from(KRACKHARDT_ADVICE[j][i])).sum())
        .collect();
    (0..n)
        .map(|i| {
            let w = if KRACKHARDT_FOLLOWERS.contains(&i) {
                1.0 / (1.125 * gamma[i] + 0.155)
            } else {
                1.0 / gamma[i]
            };
            (0..n)
                .map(|j| if KRACKHARDT_ADVICE[j][i] == 1 { w } else { 0.0 })
                .collect()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrajectoryFile {
    schema: u32,
    n: usize,
    horizon: usize,
    #[serde(default)]
    regime: Option<Regime>,
    #[serde(default)]
    source_opinions: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    spec_hash: Option<String>,
    /// High words of each state.
    states: Vec<Vec<f64>>,
    /// Low words; absent for plain double data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    states_lo: Option<Vec<Vec<f64>>>,
}

pub fn trajectory_to_json(traj: &Trajectory, spec_hash: Option<&str>) -> String {
    let keep_lo = traj.precision == Precision::DoubleDouble;
    let file = TrajectoryFile {
        schema: SCHEMA_VERSION,
        n: traj.n(),
        horizon: traj.horizon(),
        regime: traj.regime,
        source_opinions: traj.source_opinions.clone(),
        spec_hash: spec_hash.map(str::to_owned),
        states: traj.states.iter().map(|s| s.iter().map(|v| v.0).collect()).collect(),
        states_lo: keep_lo.then(|| traj.states.iter().map(|s| s.iter().map(|v| v.1).collect()).collect()),
    };
    serde_json::to_string_pretty(&file).expect("trajectory serializes")
}

pub fn trajectory_from_json(text: &str, context: &str) -> Result<(Trajectory, Option<String>), IoError> {
    let file: TrajectoryFile = serde_json::from_str(text).map_err(|source| IoError::Json {
        context: context.to_owned(),
        source,
    })?;
    if file.states.len() != file.horizon + 1 || file.states.iter().any(|s| s.len() != file.n) {
        return Err(IoError::Invalid(format!(
            "{context}: states do not match n and horizon"
        )));
    }
    let (states, precision) = match &file.states_lo {
        Some(lo) => {
            if lo.len() != file.states.len() || lo.iter().zip(&file.states).any(|(a, b)| a.len() != b.len()) {
                return Err(IoError::Invalid(format!(
                    "{context}: states_lo shape differs from states"
                )));
            }
            let s = file
                .states
                .iter()
                .zip(lo)
                .map(|(h, l)| h.iter().zip(l).map(|(&h, &l)| from_parts(h, l)).collect())
                .collect();
            (s, Precision::DoubleDouble)
        }
        None => (
            file.states
                .iter()
                .map(|s| s.iter().copied().map(real).collect())
                .collect(),
            Precision::Double,
        ),
    };
    Ok((
        Trajectory {
            states,
            regime: file.regime,
            source_opinions: file.source_opinions,
            precision,
        },
        file.spec_hash,
    ))
}

/// Header `k,x1,...,xn`; values at full `f64` precision.
pub fn trajectory_to_csv(traj: &Trajectory) -> String {
    let mut out = String::from("k");
    for i in 1..=traj.n() {
        write!(out, ",x{i}").unwrap();
    }
    out.push('\n');
    for (k, s) in traj.to_f64_states().iter().enumerate() {
        write!(out, "{k}").unwrap();
        for v in s {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn trajectory_from_csv(text: &str, context: &str) -> Result<Trajectory, IoError> {
    let csv_err = |line: usize, msg: String| IoError::Csv {
        context: context.to_owned(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| csv_err(1, "empty file".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.first() != Some(&"k") {
        return Err(csv_err(1, "header must start with k".into()));
    }
    let n = cols.len() - 1;
    for (i, c) in cols[1..].iter().enumerate() {
        if *c != format!("x{}", i + 1) {
            return Err(csv_err(1, format!("expected column x{}, found {c:?}", i + 1)));
        }
    }
    let mut states = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != n + 1 {
            return Err(csv_err(
                lineno,
                format!("expected {} fields, found {}", n + 1, fields.len()),
            ));
        }
        let k: usize = fields[0]
            .parse()
            .map_err(|_| csv_err(lineno, format!("bad step index {:?}", fields[0])))?;
        if k != states.len() {
            return Err(csv_err(lineno, format!("expected step {}, found {k}", states.len())));
        }
        let row = fields[1..]
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map(real)
                    .map_err(|_| csv_err(lineno, format!("bad number {f:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        states.push(row);
    }
    if states.is_empty() {
        return Err(csv_err(1, "no data rows".into()));
    }
    Ok(Trajectory::from_states(states, Precision::Double))
}

/// Loads a trajectory from `.json` (double-double) or `.csv` (double).
pub fn load_trajectory(path: &Path) -> Result<Trajectory, IoError> {
    let text = read_file(path)?;
    let ctx = path.display().to_string();
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => trajectory_from_json(&text, &ctx).map(|(t, _)| t),
        Some("csv") => trajectory_from_csv(&text, &ctx),
        _ => Err(IoError::Invalid(format!("{ctx}: expected a .json or .csv trajectory"))),
    }
}

/// Parses innate opinions from a JSON array or comma/whitespace separated numbers.
pub fn parse_x0(text: &str, context: &str) -> Result<Vec<f64>, IoError> {
    let t = text.trim();
    if t.starts_with('[') {
        return serde_json::from_str(t).map_err(|source| IoError::Json {
            context: context.to_owned(),
            source,
        });
    }
    t.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| IoError::Invalid(format!("{context}: bad number {s:?}")))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    /// Input path to SHA-256.
    pub input_hashes: BTreeMap<String, String>,
    pub parameters: BTreeMap<String, serde_json::Value>,
    pub outputs: Vec<String>,
    pub tool_version: String,
    pub started_unix: u64,
    pub finished_unix: u64,
}

impl RunManifest {
    pub fn new(command: &str, args: &[String]) -> Self {
        RunManifest {
            command: command.to_owned(),
            args: args.to_vec(),
            input_hashes: BTreeMap::new(),
            parameters: BTreeMap::new(),
            outputs: Vec::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            started_unix: unix_now(),
            finished_unix: 0,
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) {
        self.parameters.insert(
            key.to_owned(),
            serde_json::to_value(value).expect("parameter serializes"),
        );
    }

    pub fn input(&mut self, name: &str, bytes: &[u8]) {
        self.input_hashes.insert(name.to_owned(), sha256_hex(bytes));
    }

    /// Stamps the finish time and writes `manifest.json` into `dir`.
    pub fn finish(mut self, dir: &Path) -> Result<(), IoError> {
        self.finished_unix = unix_now();
        write_file(
            &dir.join("manifest.json"),
            &serde_json::to_string_pretty(&self).expect("manifest serializes"),
        )
    }
}

fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::simulate;

    #[test]
    fn bundled_scenarios_validate() {
        assert_eq!(toy12().network.n(), 12);
        let k = krackhardt();
        assert_eq!(k.network.followers(), KRACKHARDT_FOLLOWERS.to_vec());
    }

    #[test]
    fn bundled_krackhardt_matches_advice_relation() {
        assert_eq!(krackhardt().file.weights, krackhardt_weights());
        let ties: usize = KRACKHARDT_ADVICE.iter().flatten().map(|&v| v as usize).sum();
        assert_eq!(ties, 192);
    }

    #[test]
    fn scenario_round_trip() {
        let f = toy12().file;
        assert_eq!(ScenarioFile::parse(&f.to_json(), "rt").unwrap(), f);
    }

    #[test]
    fn unknown_fields_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(TOY12_JSON).unwrap();
        v["colour"] = serde_json::json!("red");
        let err = ScenarioFile::parse(&v.to_string(), "x").unwrap_err();
        assert!(err.to_string().contains("colour"));
    }

    #[test]
    fn zero_based_follower_rejected() {
        let mut f = toy12().file;
        f.sources[0].followers = vec![0];
        assert!(matches!(Scenario::from_file(f), Err(IoError::Invalid(_))));
    }

    #[test]
    fn json_trajectory_is_lossless() {
        let s = toy12();
        let t = simulate(&s.network, s.file.x0.as_ref().unwrap(), 13).unwrap();
        let (back, hash) = trajectory_from_json(&trajectory_to_json(&t, Some("abc")), "t").unwrap();
        assert_eq!(back, t);
        assert_eq!(hash.as_deref(), Some("abc"));
    }

    #[test]
    fn csv_trajectory_round_trips_to_double() {
        let s = toy12();
        let t = simulate(&s.network, s.file.x0.as_ref().unwrap(), 5).unwrap();
        let back = trajectory_from_csv(&trajectory_to_csv(&t), "t").unwrap();
        assert_eq!(back.precision, Precision::Double);
        assert_eq!(back.to_f64_states(), t.to_f64_states());
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        let err = trajectory_from_csv("k,x1\n0,0.5\n1,abc\n", "t").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn x0_formats() {
        assert_eq!(parse_x0("[0.1, 0.2]", "x").unwrap(), vec![0.1, 0.2]);
        assert_eq!(parse_x0("0.1,0.2\n0.3", "x").unwrap(), vec![0.1, 0.2, 0.3]);
    }
}
