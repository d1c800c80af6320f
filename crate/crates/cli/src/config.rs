//! Strict `section.key = value` run configuration.
//!
//! Feature-scale lengths are in nm (`_nm` keys), domain-scale lengths in µm (`_um` keys).

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use faid_core::em::{Materials, Pml};
use faid_core::geometry::{DeviceKind, DeviceSpec, Layout, StraightLayout, SwgLayout, YBranchLayout};
use faid_core::litho::{ExternalConfig, ExternalPredictor, GaussianThreshold, GaussianThresholdParams, Identity, LithoModel};
use faid_core::optim::OptConfig;
use sha2::{Digest, Sha256};

use crate::CliError;

/// Every accepted key with its unit and meaning.
pub const KEYS: &[(&str, &str)] = &[
    ("device.kind", "ybranch | swg | straight"),
    ("device.min_feature_nm", "minimum mask feature, nm"),
    ("device.control_points", "Y-branch boundary control points"),
    ("device.offset_bound_um", "Y-branch symmetric offset bound, µm"),
    ("device.taper_length_um", "Y-branch taper length, µm"),
    ("device.teeth", "SWG tooth count"),
    ("device.bridge_points", "SWG bridge control points"),
    ("device.region_length_um", "SWG design region length, µm"),
    ("device.period_nm", "SWG period, nm"),
    ("device.max_duty", "SWG largest tooth length / period"),
    ("device.bridge_tip_half_width_nm", "SWG bridge half-width at the center, nm"),
    ("device.tooth_width_min_um", "SWG tooth width lower bound, µm"),
    ("device.tooth_width_max_um", "SWG tooth width upper bound, µm"),
    ("device.bridge_offset_min_um", "SWG bridge offset lower bound, µm"),
    ("device.bridge_offset_max_um", "SWG bridge offset upper bound, µm"),
    ("device.length_um", "straight guide length, µm"),
    ("device.width_um", "straight guide width, µm"),
    ("grid.dx_nm", "cell size, nm"),
    ("grid.pml_cells", "PML thickness in cells"),
    ("grid.pml_reflection", "PML design reflection"),
    ("materials.n_core", "core refractive index"),
    ("materials.n_clad", "cladding refractive index"),
    ("wavelengths.values_um", "comma-separated wavelengths, µm"),
    ("wavelengths.start_um", "sweep start, µm"),
    ("wavelengths.stop_um", "sweep stop, µm"),
    ("wavelengths.count", "sweep samples"),
    ("litho.model", "identity | gaussian | external"),
    ("litho.preset", "duv | ebl (gaussian defaults)"),
    ("litho.sigma_nm", "gaussian blur sigma, nm"),
    ("litho.eta", "threshold level"),
    ("litho.beta", "projection steepness"),
    ("litho.eta_offset", "uniform threshold shift"),
    ("litho.command", "external predictor command with {input} and {output}"),
    ("litho.exchange_dir", "external exchange directory (default <out>/exchange)"),
    ("litho.timeout_s", "external predictor timeout, s"),
    ("optimizer.max_iterations", "iteration cap"),
    ("optimizer.history", "L-BFGS memory"),
    ("optimizer.grad_tol", "projected-gradient tolerance"),
    ("optimizer.initial_step_nm", "largest parameter move of the first step, nm"),
    ("optimizer.c1", "Armijo constant"),
    ("optimizer.max_line_search", "backtracking steps"),
    ("optimizer.perturbation_nm", "parameter step for numeric and brute gradients, nm"),
    ("gradcheck.threshold", "max relative error for exit 0"),
    ("gradcheck.floor", "ignore components below this fraction of the largest"),
    ("output.dir", "output directory"),
    ("output.binary", "write density grids in binary (true | false)"),
    ("run.seed", "seed recorded in the fingerprint"),
    ("run.threads", "worker threads"),
];

#[derive(Debug, Clone, PartialEq)]
pub enum LithoSpec {
    Identity,
    Gaussian(GaussianThresholdParams<f64>),
    External { command: String, exchange_dir: Option<PathBuf>, timeout: Duration },
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub device: DeviceSpec<f64>,
    /// µm.
    pub dx: f64,
    pub pml: Pml<f64>,
    pub materials: Materials<f64>,
    pub wavelengths: Vec<f64>,
    pub litho: LithoSpec,
    pub optimizer: OptConfig<f64>,
    /// Parameter step for numeric and brute gradients, µm.
    pub perturbation: f64,
    pub gradcheck_threshold: f64,
    pub gradcheck_floor: f64,
    pub out_dir: PathBuf,
    pub binary: bool,
    pub seed: u64,
    pub threads: usize,
    /// Sorted `key = value` lines, the basis of the fingerprint.
    pub canonical: String,
}

struct Entries {
    map: BTreeMap<String, (usize, String)>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self, CliError> {
        let mut map = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let lineno = n + 1;
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Config(format!("line {lineno}: expected `section.key = value`, got `{line}`")));
            };
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.iter().any(|(k, _)| *k == key) {
                return Err(CliError::Config(format!("line {lineno}: unknown key `{key}`")));
            }
            if value.is_empty() {
                return Err(CliError::Config(format!("line {lineno}: `{key}` has no value")));
            }
            if map.insert(key.to_string(), (lineno, value.to_string())).is_some() {
                return Err(CliError::Config(format!("line {lineno}: duplicate key `{key}`")));
            }
        }
        Ok(Self { map })
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|(_, v)| v.as_str())
    }

    fn get<V: std::str::FromStr>(&self, key: &str) -> Result<Option<V>, CliError> {
        match self.map.get(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::Config(format!("line {line}: cannot parse `{key}` value `{v}`"))),
        }
    }

    fn or<V: std::str::FromStr>(&self, key: &str, default: V) -> Result<V, CliError> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    fn required<V: std::str::FromStr>(&self, key: &str) -> Result<V, CliError> {
        self.get(key)?.ok_or_else(|| CliError::Config(format!("missing required key `{key}`")))
    }

    /// Keys that only make sense for another device kind are rejected rather than ignored.
    fn only_for(&self, keys: &[&str], kind: &str) -> Result<(), CliError> {
        match self.map.iter().find(|(k, _)| k.starts_with("device.") && k.as_str() != "device.kind" && k.as_str() != "device.min_feature_nm" && !keys.contains(&k.as_str())) {
            Some((k, (line, _))) => Err(CliError::Config(format!("line {line}: `{k}` does not apply to device kind `{kind}`"))),
            None => Ok(()),
        }
    }
}

fn bad(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("`{key}`: {msg}"))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let e = Entries::parse(text)?;
        let kind: String = e.required("device.kind")?;
        let mut device = match DeviceKind::parse(&kind) {
            Some(DeviceKind::YBranch) => {
                e.only_for(&["device.control_points", "device.offset_bound_um", "device.taper_length_um"], &kind)?;
                let d = YBranchLayout::default();
                DeviceSpec::ybranch(YBranchLayout {
                    control_points: e.or("device.control_points", d.control_points)?,
                    offset_bound: e.or("device.offset_bound_um", d.offset_bound)?,
                    taper_length: e.or("device.taper_length_um", d.taper_length)?,
                    ..d
                })
            }
            Some(DeviceKind::SwgToStripConverter) => {
                e.only_for(
                    &[
                        "device.teeth",
                        "device.bridge_points",
                        "device.region_length_um",
                        "device.period_nm",
                        "device.max_duty",
                        "device.bridge_tip_half_width_nm",
                        "device.tooth_width_min_um",
                        "device.tooth_width_max_um",
                        "device.bridge_offset_min_um",
                        "device.bridge_offset_max_um",
                    ],
                    &kind,
                )?;
                let d = SwgLayout::default();
                DeviceSpec::swg_converter(SwgLayout {
                    teeth: e.or("device.teeth", d.teeth)?,
                    bridge_points: e.or("device.bridge_points", d.bridge_points)?,
                    region_length: e.or("device.region_length_um", d.region_length)?,
                    period: e.or("device.period_nm", d.period * 1e3)? * 1e-3,
                    max_duty: e.or("device.max_duty", d.max_duty)?,
                    bridge_tip_half_width: e.or("device.bridge_tip_half_width_nm", d.bridge_tip_half_width * 1e3)? * 1e-3,
                    tooth_width_bounds: (
                        e.or("device.tooth_width_min_um", d.tooth_width_bounds.0)?,
                        e.or("device.tooth_width_max_um", d.tooth_width_bounds.1)?,
                    ),
                    bridge_offset_bounds: (
                        e.or("device.bridge_offset_min_um", d.bridge_offset_bounds.0)?,
                        e.or("device.bridge_offset_max_um", d.bridge_offset_bounds.1)?,
                    ),
                    ..d
                })
            }
            Some(DeviceKind::Straight) => {
                e.only_for(&["device.length_um", "device.width_um"], &kind)?;
                let d = StraightLayout::default();
                DeviceSpec::straight(StraightLayout {
                    length: e.or("device.length_um", d.length)?,
                    width: e.or("device.width_um", d.width)?,
                })
            }
            None => return Err(bad("device.kind", format!("unknown device kind `{kind}`"))),
        };
        if let Some(f) = e.get::<f64>("device.min_feature_nm")? {
            device.min_feature = f * 1e-3;
        }
        check_layout(&device)?;

        let dx_nm: f64 = e.required("grid.dx_nm")?;
        if !(dx_nm > 0.0) {
            return Err(bad("grid.dx_nm", "must be positive"));
        }
        let mut pml = Pml::new(e.or("grid.pml_cells", 10usize)?);
        pml.reflection = e.or("grid.pml_reflection", pml.reflection)?;

        let n_core: f64 = e.required("materials.n_core")?;
        let n_clad: f64 = e.required("materials.n_clad")?;
        let materials = Materials::from_indices(n_clad, n_core).map_err(|err| bad("materials.n_core", err))?;

        let wavelengths = parse_wavelengths(&e)?;
        let litho = parse_litho(&e)?;

        let d = OptConfig::default();
        let optimizer = OptConfig {
            max_iterations: e.or("optimizer.max_iterations", d.max_iterations)?,
            history: e.or("optimizer.history", d.history)?,
            grad_tol: e.or("optimizer.grad_tol", d.grad_tol)?,
            initial_step: e.or("optimizer.initial_step_nm", d.initial_step * 1e3)? * 1e-3,
            c1: e.or("optimizer.c1", d.c1)?,
            max_line_search: e.or("optimizer.max_line_search", d.max_line_search)?,
        };
        optimizer.validate().map_err(|m| CliError::Config(format!("optimizer section: {m}")))?;
        let perturbation = e.or("optimizer.perturbation_nm", 1.0)? * 1e-3;
        if !(perturbation > 0.0) {
            return Err(bad("optimizer.perturbation_nm", "must be positive"));
        }
        let gradcheck_threshold = e.or("gradcheck.threshold", 0.01)?;
        let gradcheck_floor = e.or("gradcheck.floor", 1e-4)?;
        let threads: usize = e.or("run.threads", 1)?;
        if threads == 0 {
            return Err(bad("run.threads", "must be at least 1"));
        }

        let canonical = e.map.iter().map(|(k, (_, v))| format!("{k} = {v}\n")).collect();
        Ok(Self {
            device,
            dx: dx_nm * 1e-3,
            pml,
            materials,
            wavelengths,
            litho,
            optimizer,
            perturbation,
            gradcheck_threshold,
            gradcheck_floor,
            out_dir: e.or("output.dir", PathBuf::from("out"))?,
            binary: e.or("output.binary", false)?,
            seed: e.or("run.seed", 0)?,
            threads,
            canonical,
        })
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|err| CliError::Config(format!("cannot read config {}: {err}", path.display())))?;
        Self::parse(&text)
    }

    /// Short hash of the effective configuration and seed.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.canonical.as_bytes());
        h.update(format!("seed={}", self.seed).as_bytes());
        hex::encode(&h.finalize()[..8])
    }

    pub fn litho_model(&self) -> Result<Arc<dyn LithoModel<f64>>, CliError> {
        Ok(match &self.litho {
            LithoSpec::Identity => Arc::new(Identity),
            LithoSpec::Gaussian(p) => {
                Arc::new(GaussianThreshold::new(*p).map_err(|err| bad("litho.sigma_nm", err))?)
            }
            LithoSpec::External { command, exchange_dir, timeout } => {
                let dir = exchange_dir.clone().unwrap_or_else(|| self.out_dir.join("exchange"));
                std::fs::create_dir_all(&dir)
                    .map_err(|err| CliError::Runtime(format!("cannot create exchange dir {}: {err}", dir.display())))?;
                Arc::new(
                    ExternalPredictor::new(ExternalConfig { command: command.clone(), exchange_dir: dir, timeout: *timeout })
                        .map_err(|err| bad("litho.command", err))?,
                )
            }
        })
    }
}

fn check_layout(device: &DeviceSpec<f64>) -> Result<(), CliError> {
    match &device.layout {
        Layout::YBranch(l) if l.control_points < 2 => Err(bad("device.control_points", "need at least 2")),
        Layout::Swg(l) if l.teeth == 0 => Err(bad("device.teeth", "need at least one tooth")),
        Layout::Swg(l) if l.tooth_width_bounds.0 >= l.tooth_width_bounds.1 => {
            Err(bad("device.tooth_width_min_um", "lower bound must be below the upper bound"))
        }
        Layout::Swg(l) if l.bridge_offset_bounds.0 >= l.bridge_offset_bounds.1 => {
            Err(bad("device.bridge_offset_min_um", "lower bound must be below the upper bound"))
        }
        Layout::Swg(l) if !(l.max_duty > 0.0 && l.max_duty < 1.0) => Err(bad("device.max_duty", "must lie in (0, 1)")),
        _ => Ok(()),
    }
}

fn parse_wavelengths(e: &Entries) -> Result<Vec<f64>, CliError> {
    let list = e.raw("wavelengths.values_um");
    let sweep = ["wavelengths.start_um", "wavelengths.stop_um", "wavelengths.count"].map(|k| e.raw(k).is_some());
    let wl: Vec<f64> = match (list, sweep) {
        (Some(v), [false, false, false]) => v
            .split(',')
            .map(|s| s.trim().parse().map_err(|_| bad("wavelengths.values_um", format!("cannot parse `{s}`"))))
            .collect::<Result<_, _>>()?,
        (None, [true, true, true]) => {
            let (a, b): (f64, f64) = (e.required("wavelengths.start_um")?, e.required("wavelengths.stop_um")?);
            let n: usize = e.required("wavelengths.count")?;
            match n {
                0 => return Err(bad("wavelengths.count", "must be at least 1")),
                1 => vec![a],
                _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
            }
        }
        (None, [false, false, false]) => {
            return Err(CliError::Config("missing required key `wavelengths.values_um` (or a start/stop/count sweep)".into()))
        }
        _ => {
            return Err(CliError::Config(
                "wavelengths: give either `values_um` or all of `start_um`, `stop_um`, `count`".into(),
            ))
        }
    };
    if wl.iter().any(|w| !(*w > 0.0)) {
        return Err(bad("wavelengths", "all wavelengths must be positive"));
    }
    Ok(wl)
}

fn parse_litho(e: &Entries) -> Result<LithoSpec, CliError> {
    let model: String = e.required("litho.model")?;
    let gaussian_keys = ["litho.preset", "litho.sigma_nm", "litho.eta", "litho.beta", "litho.eta_offset"];
    let external_keys = ["litho.command", "litho.exchange_dir", "litho.timeout_s"];
    let reject = |keys: &[&str]| match keys.iter().find(|k| e.raw(k).is_some()) {
        Some(k) => Err(bad(k, format!("does not apply to litho model `{model}`"))),
        None => Ok(()),
    };
    match model.as_str() {
        "identity" => {
            reject(&gaussian_keys)?;
            reject(&external_keys)?;
            Ok(LithoSpec::Identity)
        }
        "gaussian" => {
            reject(&external_keys)?;
            let base = match e.raw("litho.preset") {
                None | Some("duv") => GaussianThresholdParams::duv(),
                Some("ebl") => GaussianThresholdParams::ebl(),
                Some(other) => return Err(bad("litho.preset", format!("unknown preset `{other}`"))),
            };
            let p = GaussianThresholdParams {
                sigma_nm: e.or("litho.sigma_nm", base.sigma_nm)?,
                eta: e.or("litho.eta", base.eta)?,
                beta: e.or("litho.beta", base.beta)?,
                eta_offset: e.or("litho.eta_offset", base.eta_offset)?,
            };
            p.validate().map_err(|err| bad("litho", err))?;
            Ok(LithoSpec::Gaussian(p))
        }
        "external" => {
            reject(&gaussian_keys)?;
            let command: String = e.required("litho.command")?;
            let timeout: f64 = e.or("litho.timeout_s", 60.0)?;
            if !(timeout > 0.0) {
                return Err(bad("litho.timeout_s", "must be positive"));
            }
            Ok(LithoSpec::External {
                command,
                exchange_dir: e.get("litho.exchange_dir")?,
                timeout: Duration::from_secs_f64(timeout),
            })
        }
        other => Err(bad("litho.model", format!("unknown model `{other}`"))),
    }
}
