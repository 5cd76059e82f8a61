//! Flat `key = value` experiment configuration with `[section]` headers.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::dynamics::{RunOptions, SimState, CFL};
use crate::error::{Error, Result};
use crate::grid::{Grid, GridSpec};
use crate::params::{ModelParams, ReactionLaw};
use crate::presets::{InitPreset, PresetKind};

/// Every accepted key, per section, and whether it is required.
const SCHEMA: &[(&str, &[(&str, bool)])] = &[
    ("grid", &[("d", true), ("N", true), ("L", true)]),
    (
        "model",
        &[
            ("gamma", true),
            ("sigma", false),
            ("sigmas", false),
            ("p_h", false),
            ("alpha", false),
            ("reaction", false),
            ("split_ratio", false),
        ],
    ),
    (
        "init",
        &[
            ("preset", true),
            ("amplitude", false),
            ("width", false),
            ("offset", false),
            ("peak_pressure", false),
            ("split", false),
        ],
    ),
    (
        "time",
        &[
            ("T", true),
            ("output_every", false),
            ("C_cfl", false),
            ("dt", false),
            ("max_steps", false),
        ],
    ),
    (
        "regularized",
        &[("sigma", false), ("eps", true), ("delta", false), ("couple_potential", false)],
    ),
    ("diagnostics", &[("q_list", false), ("max_shift", false)]),
    ("output", &[("dir", false), ("binary", false), ("plots", false)]),
];

/// Number of output intervals used when `output_every` is not given.
const DEFAULT_OUTPUTS: f64 = 50.0;

#[derive(Debug, Clone, PartialEq)]
pub enum SigmaSpec {
    Single(f64),
    List(Vec<f64>),
}

impl SigmaSpec {
    pub fn values(&self) -> Vec<f64> {
        match self {
            SigmaSpec::Single(s) => vec![*s],
            SigmaSpec::List(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeConfig {
    pub t_final: f64,
    pub output_every: f64,
    pub cfl: f64,
    pub dt: Option<f64>,
    pub max_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularizedConfig {
    pub sigma: f64,
    pub eps: Vec<f64>,
    /// Same length as `eps`.
    pub delta: Vec<f64>,
    pub couple_potential: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub binary: bool,
    pub plots: bool,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub grid: Grid,
    /// Model with `sigma` set to the single sigma (or the first of the list).
    pub model: ModelParams,
    pub sigma: SigmaSpec,
    pub init: InitPreset,
    pub time: TimeConfig,
    pub regularized: Option<RegularizedConfig>,
    pub q_list: Vec<f64>,
    pub max_shift: usize,
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn initial_state(&self) -> Result<SimState> {
        self.init.build(self.grid, &self.model)
    }

    pub fn run_options(&self) -> RunOptions {
        let mut o = RunOptions::new(self.time.t_final, self.time.output_every);
        o.max_steps = self.time.max_steps;
        match self.time.dt {
            Some(dt) => o.fixed(dt),
            None => o,
        }
    }

    /// The fully resolved configuration, defaults included, in the same
    /// format `parse_config` accepts.
    pub fn effective(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(", ");
        let mut s = String::new();
        let g = &self.grid;
        let _ = writeln!(s, "[grid]\nd = {}\nN = {}\nL = {}\n", g.dim(), g.n(), g.half_width());
        let m = &self.model;
        let _ = writeln!(s, "[model]\ngamma = {}", m.gamma);
        match &self.sigma {
            SigmaSpec::Single(x) => {
                let _ = writeln!(s, "sigma = {x}");
            }
            SigmaSpec::List(v) => {
                let _ = writeln!(s, "sigmas = {}", list(v));
            }
        }
        let _ = writeln!(s, "p_h = {}\nalpha = {}\nreaction = {}", m.p_h, m.alpha, m.reaction.id());
        if let ReactionLaw::Split { ratio } = m.reaction {
            let _ = writeln!(s, "split_ratio = {ratio}");
        }
        let i = &self.init;
        let _ = writeln!(
            s,
            "\n[init]\npreset = {}\namplitude = {}\nwidth = {}\noffset = {}\nsplit = {}",
            i.kind, i.amplitude, i.width, i.offset, i.split
        );
        if let Some(pp) = i.peak_pressure {
            let _ = writeln!(s, "peak_pressure = {pp}");
        }
        let t = &self.time;
        let _ = writeln!(
            s,
            "\n[time]\nT = {}\noutput_every = {}\nC_cfl = {}\nmax_steps = {}",
            t.t_final, t.output_every, t.cfl, t.max_steps
        );
        if let Some(dt) = t.dt {
            let _ = writeln!(s, "dt = {dt}");
        }
        if let Some(r) = &self.regularized {
            let _ = writeln!(
                s,
                "\n[regularized]\nsigma = {}\neps = {}\ndelta = {}\ncouple_potential = {}",
                r.sigma,
                list(&r.eps),
                list(&r.delta),
                r.couple_potential
            );
        }
        let _ = writeln!(
            s,
            "\n[diagnostics]\nq_list = {}\nmax_shift = {}",
            list(&self.q_list),
            self.max_shift
        );
        let _ = writeln!(
            s,
            "\n[output]\ndir = {}\nbinary = {}\nplots = {}",
            self.output.dir.display(),
            self.output.binary,
            self.output.plots
        );
        s
    }
}

type Raw = BTreeMap<(String, String), (usize, String)>;

struct Reader<'a> {
    raw: &'a Raw,
    errors: Vec<String>,
}

impl Reader<'_> {
    fn get(&self, sec: &str, key: &str) -> Option<&str> {
        self.raw
            .get(&(sec.to_string(), key.to_string()))
            .map(|(_, v)| v.as_str())
    }

    fn has_section(&self, sec: &str) -> bool {
        self.raw.keys().any(|(s, _)| s == sec)
    }

    fn parse<T: FromStr>(&mut self, sec: &str, key: &str) -> Option<T> {
        let text = self.get(sec, key)?;
        match text.parse::<T>() {
            Ok(v) => Some(v),
            Err(_) => {
                self.errors
                    .push(format!("[{sec}] {key}: cannot parse '{text}'"));
                None
            }
        }
    }

    fn num(&mut self, sec: &str, key: &str, default: f64) -> f64 {
        self.parse(sec, key).unwrap_or(default)
    }

    fn list(&mut self, sec: &str, key: &str) -> Option<Vec<f64>> {
        let text = self.get(sec, key)?.to_string();
        let mut out = Vec::new();
        for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part.parse::<f64>() {
                Ok(v) => out.push(v),
                Err(_) => {
                    self.errors
                        .push(format!("[{sec}] {key}: cannot parse '{part}' as a number"));
                    return None;
                }
            }
        }
        if out.is_empty() {
            self.errors.push(format!("[{sec}] {key}: empty list"));
            return None;
        }
        Some(out)
    }

    fn flag(&mut self, sec: &str, key: &str, default: bool) -> bool {
        self.parse(sec, key).unwrap_or(default)
    }
}

fn tokenize(text: &str, errors: &mut Vec<String>) -> Raw {
    let mut raw = Raw::new();
    let mut section: Option<String> = None;
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.split(['#', ';']).next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = name.trim();
            if SCHEMA.iter().any(|(s, _)| *s == name) {
                section = Some(name.to_string());
            } else {
                errors.push(format!("line {lineno}: unknown section [{name}]"));
                section = None;
            }
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            errors.push(format!("line {lineno}: expected 'key = value', got '{line}'"));
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        let Some(sec) = &section else {
            errors.push(format!("line {lineno}: key '{key}' outside a known section"));
            continue;
        };
        let known = SCHEMA
            .iter()
            .find(|(s, _)| s == sec)
            .is_some_and(|(_, keys)| keys.iter().any(|(k, _)| *k == key));
        if !known {
            errors.push(format!("line {lineno}: unknown key '{key}' in [{sec}]"));
            continue;
        }
        if let Some((first, _)) = raw.insert((sec.clone(), key.to_string()), (lineno, value.to_string())) {
            errors.push(format!(
                "line {lineno}: duplicate key '{key}' in [{sec}] (first set on line {first})"
            ));
        }
    }
    raw
}

/// Parses and validates a configuration, collecting every violation.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut errors = Vec::new();
    let raw = tokenize(text, &mut errors);
    let mut r = Reader { raw: &raw, errors };

    for (sec, keys) in SCHEMA {
        let optional_section = *sec == "regularized" && !r.has_section(sec);
        if optional_section {
            continue;
        }
        for (key, required) in keys.iter() {
            if *required && r.get(sec, key).is_none() {
                r.errors.push(format!("missing required key '{key}' in [{sec}]"));
            }
        }
    }

    // grid
    let d: Option<usize> = r.parse("grid", "d");
    let n: Option<usize> = r.parse("grid", "N");
    let l: Option<f64> = r.parse("grid", "L");
    let grid = match (d, n, l) {
        (Some(d), Some(n), Some(l)) => match Grid::new(GridSpec::new(d, l, n)) {
            Ok(g) => Some(g),
            Err(e) => {
                r.errors.push(format!("[grid] {e}"));
                None
            }
        },
        _ => None,
    };

    // model
    let gamma = r.parse::<f64>("model", "gamma");
    if let Some(g) = gamma {
        if !(g > 1.0) {
            r.errors.push(format!(
                "[model] gamma = {g}: the model requires gamma > 1"
            ));
        }
    }
    let sigma = match (r.get("model", "sigma").is_some(), r.get("model", "sigmas").is_some()) {
        (true, true) => {
            r.errors.push("[model] give exactly one of 'sigma' or 'sigmas', not both".into());
            None
        }
        (false, false) => {
            r.errors.push("[model] missing 'sigma' (or 'sigmas' for a sweep)".into());
            None
        }
        (true, false) => r.parse("model", "sigma").map(SigmaSpec::Single),
        (false, true) => r.list("model", "sigmas").map(SigmaSpec::List),
    };
    if let Some(sp) = &sigma {
        for s in sp.values() {
            if !(s >= 0.0) || !s.is_finite() {
                r.errors.push(format!("[model] sigma must be >= 0, got {s}"));
            }
        }
    }
    let reaction = match r.get("model", "reaction").unwrap_or("linear") {
        "linear" => ReactionLaw::Linear,
        "split" => ReactionLaw::Split {
            ratio: r.num("model", "split_ratio", 2.0),
        },
        other => {
            r.errors.push(format!(
                "[model] unknown reaction '{other}' (expected linear or split)"
            ));
            ReactionLaw::Linear
        }
    };
    let model = ModelParams {
        gamma: gamma.unwrap_or(2.0),
        p_h: r.num("model", "p_h", 1.0),
        sigma: sigma.as_ref().map_or(0.0, |s| s.values()[0]),
        alpha: r.num("model", "alpha", 1.0),
        reaction,
    };
    let model_ok = match model.validate() {
        Ok(()) => true,
        Err(e) => {
            // gamma is reported above with its own message
            if gamma.is_some_and(|g| g > 1.0) && sigma.is_some() {
                r.errors.push(format!("[model] {e}"));
            }
            false
        }
    };

    // init
    let kind = r.get("init", "preset").map(|p| p.parse::<PresetKind>());
    let mut init = InitPreset::default();
    match &kind {
        Some(Ok(k)) => init.kind = *k,
        Some(Err(e)) => r.errors.push(format!("[init] {e}")),
        None => {}
    }
    init.amplitude = r.num("init", "amplitude", init.amplitude);
    init.width = r.num("init", "width", init.width);
    init.offset = r.num("init", "offset", init.offset);
    init.split = r.num("init", "split", init.split);
    init.peak_pressure = r.parse("init", "peak_pressure");
    if let (Some(g), true, Some(Ok(_))) = (grid, model_ok, &kind) {
        for v in init.violations(g, &model) {
            r.errors.push(format!("[init] {v}"));
        }
    }

    // time
    let t_final = r.parse::<f64>("time", "T");
    if let Some(t) = t_final {
        if !(t > 0.0) || !t.is_finite() {
            r.errors.push(format!("[time] T must be positive, got {t}"));
        }
    }
    let t_final = t_final.unwrap_or(1.0);
    let time = TimeConfig {
        t_final,
        output_every: r.num("time", "output_every", t_final / DEFAULT_OUTPUTS),
        cfl: r.num("time", "C_cfl", CFL),
        dt: r.parse("time", "dt"),
        max_steps: r.parse("time", "max_steps").unwrap_or(RunOptions::new(1.0, 1.0).max_steps),
    };
    if !(time.output_every > 0.0) || time.output_every > time.t_final {
        r.errors.push(format!(
            "[time] output_every must be in (0, T], got {}",
            time.output_every
        ));
    }
    if !(time.cfl > 0.0 && time.cfl <= 1.0) {
        r.errors.push(format!("[time] C_cfl must be in (0, 1], got {}", time.cfl));
    }
    if let Some(dt) = time.dt {
        if !(dt > 0.0) {
            r.errors.push(format!("[time] dt must be positive, got {dt}"));
        }
    }

    // regularized
    let regularized = if r.has_section("regularized") {
        let reg_sigma: f64 = r
            .parse("regularized", "sigma")
            .unwrap_or(model.sigma);
        if !(reg_sigma > 0.0) {
            r.errors.push(format!(
                "[regularized] sigma must be > 0, got {reg_sigma}"
            ));
        }
        let eps = r.list("regularized", "eps").unwrap_or_default();
        let delta = if r.get("regularized", "delta").is_some() {
            r.list("regularized", "delta").unwrap_or_default()
        } else {
            eps.clone()
        };
        if delta.len() != eps.len() && !eps.is_empty() && !delta.is_empty() {
            r.errors.push(format!(
                "[regularized] eps has {} entries but delta has {}",
                eps.len(),
                delta.len()
            ));
        }
        for x in eps.iter().chain(&delta) {
            if !(*x >= 0.0) {
                r.errors.push(format!("[regularized] eps and delta must be >= 0, got {x}"));
            }
        }
        Some(RegularizedConfig {
            sigma: reg_sigma,
            eps,
            delta,
            couple_potential: r.flag("regularized", "couple_potential", true),
        })
    } else {
        None
    };

    // diagnostics
    let q_list = r.list("diagnostics", "q_list").unwrap_or_else(|| vec![1.0, 2.0]);
    for q in &q_list {
        if !(*q >= 1.0) {
            r.errors.push(format!("[diagnostics] q must be >= 1, got {q}"));
        }
    }
    let max_shift: usize = r.parse("diagnostics", "max_shift").unwrap_or(8);
    if let Some(g) = grid {
        if max_shift == 0 || max_shift >= g.n() / 2 {
            r.errors.push(format!(
                "[diagnostics] max_shift must be in [1, N/2), got {max_shift}"
            ));
        }
    }

    let output = OutputConfig {
        dir: PathBuf::from(r.get("output", "dir").unwrap_or("out")),
        binary: r.flag("output", "binary", true),
        plots: r.flag("output", "plots", false),
    };

    if !r.errors.is_empty() {
        return Err(Error::ConfigViolations(r.errors));
    }
    Ok(ExperimentConfig {
        grid: grid.expect("grid validated"),
        model,
        sigma: sigma.expect("sigma validated"),
        init,
        time,
        regularized,
        q_list,
        max_shift,
        output,
    })
}
