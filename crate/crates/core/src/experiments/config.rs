//! Experiment configuration: presets, file parsing, and validation.
//!
//! A config file is a JSON document naming an `experiment` kind plus any
//! subset of the remaining fields.  Parsing starts from the preset for that
//! kind and overlays whatever the file provides, so a file containing only
//! `{"experiment": "profile_comparison_equal"}` is complete.  Validation
//! collects every violated constraint instead of stopping at the first.

use serde::{Deserialize, Serialize};

use crate::continuum::MobilityModel;
use crate::lattice::{InitMode, PotentialSpec, Species, SpeciesParams};

/// Named experiment families.  Each comes with a full set of defaults.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Tagged-particle diffusivity vs density, equal diffusivities, no drift.
    SelfdiffSweepEqual,
    /// Tagged-particle diffusivity in a dilute two-species mixture, sweeping
    /// the diffusivity contrast at fixed `d_red + d_blue = 2`.
    SelfdiffSweepMixture,
    /// Segregated-blocks relaxation, equal diffusivities with opposite
    /// drifts: stochastic histograms vs continuum profiles.
    ProfileComparisonEqual,
    /// Free-energy decay from a uniform start under opposite drifts.
    EnergyTrace,
    /// Segregated-blocks relaxation with unequal diffusivities.
    ProfileComparisonUnequal,
    /// Transport-coefficient constants and the lattice kernel table.
    CoefficientsReport,
    /// No preset physics; the config file supplies everything.
    Custom,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::SelfdiffSweepEqual => "selfdiff_sweep_equal",
            ExperimentKind::SelfdiffSweepMixture => "selfdiff_sweep_mixture",
            ExperimentKind::ProfileComparisonEqual => "profile_comparison_equal",
            ExperimentKind::EnergyTrace => "energy_trace",
            ExperimentKind::ProfileComparisonUnequal => "profile_comparison_unequal",
            ExperimentKind::CoefficientsReport => "coefficients_report",
            ExperimentKind::Custom => "custom",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "selfdiff_sweep_equal" => Some(ExperimentKind::SelfdiffSweepEqual),
            "selfdiff_sweep_mixture" => Some(ExperimentKind::SelfdiffSweepMixture),
            "profile_comparison_equal" => Some(ExperimentKind::ProfileComparisonEqual),
            "energy_trace" => Some(ExperimentKind::EnergyTrace),
            "profile_comparison_unequal" => Some(ExperimentKind::ProfileComparisonUnequal),
            "coefficients_report" => Some(ExperimentKind::CoefficientsReport),
            "custom" => Some(ExperimentKind::Custom),
            _ => None,
        }
    }

    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::SelfdiffSweepEqual,
        ExperimentKind::SelfdiffSweepMixture,
        ExperimentKind::ProfileComparisonEqual,
        ExperimentKind::EnergyTrace,
        ExperimentKind::ProfileComparisonUnequal,
        ExperimentKind::CoefficientsReport,
        ExperimentKind::Custom,
    ];
}

/// Initial-condition description as written in config files.  Identical to
/// [`InitMode`] except that `axis` counts from 1, matching how the axes are
/// labelled in output columns (`x1`, `x2`, ...).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum InitSpec {
    FixedCountUniform { n_red: usize, n_blue: usize },
    BernoulliUniform { p_red: f64, p_blue: f64 },
    AxisBlocks { phi: f64, axis: usize, split: f64 },
}

impl InitSpec {
    /// Convert to the internal representation (0-based axis).
    pub fn to_mode(&self) -> Result<InitMode, String> {
        match *self {
            InitSpec::FixedCountUniform { n_red, n_blue } => {
                Ok(InitMode::FixedCountUniform { n_red, n_blue })
            }
            InitSpec::BernoulliUniform { p_red, p_blue } => {
                Ok(InitMode::BernoulliUniform { p_red, p_blue })
            }
            InitSpec::AxisBlocks { phi, axis, split } => {
                if axis == 0 {
                    return Err("init.axis counts from 1".to_string());
                }
                Ok(InitMode::AxisBlocks { phi, axis: axis - 1, split })
            }
        }
    }

    pub fn from_mode(mode: &InitMode) -> Self {
        match *mode {
            InitMode::FixedCountUniform { n_red, n_blue } => {
                InitSpec::FixedCountUniform { n_red, n_blue }
            }
            InitMode::BernoulliUniform { p_red, p_blue } => {
                InitSpec::BernoulliUniform { p_red, p_blue }
            }
            InitMode::AxisBlocks { phi, axis, split } => {
                InitSpec::AxisBlocks { phi, axis: axis + 1, split }
            }
        }
    }
}

/// Fully resolved experiment description.  Every field has a value; emitting
/// and re-parsing a config reproduces it exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Spatial dimension, 2 or 3.
    pub dim: usize,
    /// Sites per axis; the grid spacing is `1 / side`.
    pub side: usize,
    pub species: [SpeciesParams; 2],
    pub init: InitSpec,
    /// Densities visited by `selfdiff_sweep_equal` (red only, no blue).
    pub phi_grid: Vec<f64>,
    /// Red diffusivities visited by `selfdiff_sweep_mixture`; the blue
    /// diffusivity is `2 - d_red` so the mean stays at 1.
    pub d_red_grid: Vec<f64>,
    /// Per-species density of each mixture-sweep component.
    pub mixture_phi: f64,
    /// Independent stochastic realizations per sweep point / snapshot set.
    pub realizations: usize,
    pub master_seed: u64,
    /// Time-step safety factor for the finite-volume solver, in (0, 1/2].
    pub cfl: f64,
    /// Continuum closures to run alongside the stochastic data.
    pub models: Vec<MobilityModel>,
    /// Histogram bin width for density profiles.
    pub bin_width: f64,
    /// Tagged-displacement observation window in units of the hop timescale
    /// `1/side^2`; diffusivity estimates average over `msd_samples` read-out
    /// times spaced evenly across the window.
    pub msd_window: [f64; 2],
    pub msd_samples: usize,
    /// Snapshot times (macroscopic units) for profile and energy output.
    pub times: Vec<f64>,
    /// Output directory; the CLI `--out` flag overrides it.
    pub out_dir: String,
}

/// What a config file may contain: the kind plus optional overrides.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDoc {
    experiment: Option<String>,
    dim: Option<usize>,
    side: Option<usize>,
    species: Option<[SpeciesParams; 2]>,
    init: Option<InitSpec>,
    phi_grid: Option<Vec<f64>>,
    d_red_grid: Option<Vec<f64>>,
    mixture_phi: Option<f64>,
    realizations: Option<usize>,
    master_seed: Option<u64>,
    cfl: Option<f64>,
    models: Option<Vec<MobilityModel>>,
    bin_width: Option<f64>,
    msd_window: Option<[f64; 2]>,
    msd_samples: Option<usize>,
    times: Option<Vec<f64>>,
    out_dir: Option<String>,
}

/// Config-stage failures, distinguished from runtime failures so the CLI can
/// exit with the right status.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config:\n{}", .0.join("\n"))]
    Validation(Vec<String>),
}

fn zero_potential() -> PotentialSpec {
    PotentialSpec::Zero
}

fn sinusoidal(amplitude: f64) -> PotentialSpec {
    PotentialSpec::Sinusoidal { amplitude, wavevector: [1, 0, 0] }
}

impl ExperimentConfig {
    /// Defaults for one experiment kind at desk scale.
    pub fn preset(kind: ExperimentKind) -> Self {
        let mut cfg = ExperimentConfig {
            experiment: kind,
            dim: 2,
            side: 50,
            species: [
                SpeciesParams::new(Species::Red, 1.0, zero_potential()),
                SpeciesParams::new(Species::Blue, 1.0, zero_potential()),
            ],
            init: InitSpec::FixedCountUniform { n_red: 625, n_blue: 625 },
            phi_grid: Vec::new(),
            d_red_grid: Vec::new(),
            mixture_phi: 0.05,
            realizations: 10,
            master_seed: 123_456_789,
            cfl: 0.2,
            models: Vec::new(),
            bin_width: 0.08,
            msd_window: [250.0, 300.0],
            msd_samples: 6,
            times: Vec::new(),
            out_dir: "results".to_string(),
        };
        match kind {
            ExperimentKind::SelfdiffSweepEqual => {
                cfg.side = 100;
                cfg.phi_grid = vec![0.1, 0.3, 0.5, 0.7, 0.9];
                cfg.init = InitSpec::FixedCountUniform { n_red: 0, n_blue: 0 };
            }
            ExperimentKind::SelfdiffSweepMixture => {
                cfg.side = 100;
                cfg.d_red_grid = vec![0.25, 0.5, 1.0, 1.5, 1.75];
                // dilute enough that the linear-in-phi theory applies within
                // its few-percent window; realizations sized so the noise
                // floor sits well below that
                cfg.mixture_phi = 0.025;
                cfg.realizations = 60;
                cfg.init = InitSpec::FixedCountUniform { n_red: 250, n_blue: 250 };
            }
            ExperimentKind::ProfileComparisonEqual => {
                cfg.species[0].potential = sinusoidal(1.0);
                cfg.species[1].potential = sinusoidal(-1.0);
                cfg.init = InitSpec::AxisBlocks { phi: 0.5, axis: 1, split: 0.5 };
                cfg.realizations = 30;
                cfg.times = vec![0.02, 0.08, 0.3];
                cfg.models = vec![
                    MobilityModel::MeanField,
                    MobilityModel::MatchedLowDensity { mu_variant: crate::coefficients::MuVariant::Standard },
                    MobilityModel::CompositeQuastel,
                ];
            }
            ExperimentKind::EnergyTrace => {
                cfg.species[0].potential = sinusoidal(1.0);
                cfg.species[1].potential = sinusoidal(-1.0);
                cfg.init = InitSpec::FixedCountUniform { n_red: 625, n_blue: 625 };
                cfg.realizations = 60;
                cfg.times = (0..=40).map(|i| i as f64 * 0.005).collect();
                cfg.models = vec![
                    MobilityModel::MeanField,
                    MobilityModel::CompositeQuastel,
                ];
            }
            ExperimentKind::ProfileComparisonUnequal => {
                cfg.species[0].d_coef = 1.5;
                cfg.species[1].d_coef = 0.5;
                // Drifts chosen so D_red * V_red = -D_blue * V_blue = sin(2 pi x1).
                cfg.species[0].potential = sinusoidal(1.0 / 1.5);
                cfg.species[1].potential = sinusoidal(-2.0);
                cfg.init = InitSpec::AxisBlocks { phi: 0.1, axis: 1, split: 0.5 };
                cfg.realizations = 60;
                cfg.times = vec![0.01, 0.02, 0.04];
                cfg.models = vec![
                    MobilityModel::MeanField,
                    MobilityModel::MatchedLowDensity { mu_variant: crate::coefficients::MuVariant::Standard },
                ];
            }
            ExperimentKind::CoefficientsReport | ExperimentKind::Custom => {}
        }
        cfg
    }

    /// Parse a JSON document, fill gaps from the kind's preset, validate.
    pub fn parse_str(text: &str) -> Result<Self, ConfigError> {
        let doc: ConfigDoc =
            serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        Self::from_doc(doc)
    }

    /// Same as [`parse_str`](Self::parse_str) but with the kind supplied by
    /// the caller (e.g. a CLI subcommand); the file may omit or repeat it.
    pub fn parse_str_with_kind(text: &str, kind: ExperimentKind) -> Result<Self, ConfigError> {
        let mut doc: ConfigDoc =
            serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        match &doc.experiment {
            Some(name) if ExperimentKind::from_name(name) != Some(kind) => {
                return Err(ConfigError::Validation(vec![format!(
                    "config names experiment '{}' but '{}' was requested",
                    name,
                    kind.name()
                )]));
            }
            _ => doc.experiment = Some(kind.name().to_string()),
        }
        Self::from_doc(doc)
    }

    fn from_doc(doc: ConfigDoc) -> Result<Self, ConfigError> {
        let kind_name = doc
            .experiment
            .ok_or_else(|| ConfigError::Validation(vec!["missing field 'experiment'".into()]))?;
        let kind = ExperimentKind::from_name(&kind_name).ok_or_else(|| {
            ConfigError::Validation(vec![format!(
                "unknown experiment '{}'; expected one of: {}",
                kind_name,
                ExperimentKind::ALL.map(|k| k.name()).join(", ")
            )])
        })?;
        let mut cfg = Self::preset(kind);
        if let Some(v) = doc.dim {
            cfg.dim = v;
        }
        if let Some(v) = doc.side {
            cfg.side = v;
        }
        if let Some(v) = doc.species {
            cfg.species = v;
        }
        if let Some(v) = doc.init {
            cfg.init = v;
        }
        if let Some(v) = doc.phi_grid {
            cfg.phi_grid = v;
        }
        if let Some(v) = doc.d_red_grid {
            cfg.d_red_grid = v;
        }
        if let Some(v) = doc.mixture_phi {
            cfg.mixture_phi = v;
        }
        if let Some(v) = doc.realizations {
            cfg.realizations = v;
        }
        if let Some(v) = doc.master_seed {
            cfg.master_seed = v;
        }
        if let Some(v) = doc.cfl {
            cfg.cfl = v;
        }
        if let Some(v) = doc.models {
            cfg.models = v;
        }
        if let Some(v) = doc.bin_width {
            cfg.bin_width = v;
        }
        if let Some(v) = doc.msd_window {
            cfg.msd_window = v;
        }
        if let Some(v) = doc.msd_samples {
            cfg.msd_samples = v;
        }
        if let Some(v) = doc.times {
            cfg.times = v;
        }
        if let Some(v) = doc.out_dir {
            cfg.out_dir = v;
        }
        cfg.validate().map(|()| cfg)
    }

    /// Serialize the fully resolved config.  `parse_str(to_json(c)) == c`.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization cannot fail")
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.side as f64
    }

    pub fn n_sites(&self) -> usize {
        self.side.pow(self.dim as u32)
    }

    /// Check every constraint and report all violations together.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut errs = Vec::new();
        if self.dim != 2 && self.dim != 3 {
            errs.push(format!("dim must be 2 or 3, got {}", self.dim));
        }
        if self.side < 2 {
            errs.push(format!("side must be at least 2, got {}", self.side));
        }
        if self.species[0].name != Species::Red || self.species[1].name != Species::Blue {
            errs.push("species must be listed as [red, blue]".to_string());
        }
        for sp in &self.species {
            if !(sp.d_coef > 0.0 && sp.d_coef.is_finite()) {
                errs.push(format!(
                    "{:?} diffusivity must be positive and finite, got {}",
                    sp.name, sp.d_coef
                ));
            }
            if let PotentialSpec::Tabulated { values } = &sp.potential {
                if self.dim == 2 || self.dim == 3 {
                    let expect = self.n_sites();
                    if values.len() != expect {
                        errs.push(format!(
                            "{:?} tabulated potential has {} entries, lattice has {} sites",
                            sp.name,
                            values.len(),
                            expect
                        ));
                    }
                }
            }
        }
        match self.init.to_mode() {
            Err(msg) => errs.push(msg),
            Ok(mode) => match mode {
                InitMode::FixedCountUniform { n_red, n_blue } => {
                    if (self.dim == 2 || self.dim == 3) && n_red + n_blue > self.n_sites() {
                        errs.push(format!(
                            "init asks for {} particles on {} sites",
                            n_red + n_blue,
                            self.n_sites()
                        ));
                    }
                }
                InitMode::BernoulliUniform { p_red, p_blue } => {
                    if !(0.0..=1.0).contains(&p_red)
                        || !(0.0..=1.0).contains(&p_blue)
                        || p_red + p_blue > 1.0
                    {
                        errs.push(format!(
                            "init probabilities must lie in [0,1] with p_red + p_blue <= 1, \
                             got ({p_red}, {p_blue})"
                        ));
                    }
                }
                InitMode::AxisBlocks { phi, axis, split } => {
                    if !(0.0..=1.0).contains(&phi) {
                        errs.push(format!("init.phi must lie in [0,1], got {phi}"));
                    }
                    if axis >= self.dim && (self.dim == 2 || self.dim == 3) {
                        errs.push(format!(
                            "init.axis must lie in 1..={}, got {}",
                            self.dim,
                            axis + 1
                        ));
                    }
                    if !(0.0..=1.0).contains(&split) {
                        errs.push(format!("init.split must lie in [0,1], got {split}"));
                    }
                }
            },
        }
        for phi in &self.phi_grid {
            if !(0.0..=1.0).contains(phi) {
                errs.push(format!("phi_grid entries must lie in [0,1], got {phi}"));
            }
        }
        for d in &self.d_red_grid {
            if !(*d > 0.0 && *d < 2.0) {
                errs.push(format!(
                    "d_red_grid entries must lie in (0,2) so both diffusivities stay positive, \
                     got {d}"
                ));
            }
        }
        if !(0.0..=0.5).contains(&self.mixture_phi) {
            errs.push(format!(
                "mixture_phi must lie in [0, 0.5] (two species share the lattice), got {}",
                self.mixture_phi
            ));
        }
        if self.realizations == 0 {
            errs.push("realizations must be at least 1".to_string());
        }
        if !(self.cfl > 0.0 && self.cfl <= 0.5) {
            errs.push(format!("cfl must lie in (0, 0.5], got {}", self.cfl));
        }
        if self.side >= 2 && !(self.bin_width >= self.spacing() - 1e-12 && self.bin_width <= 1.0) {
            errs.push(format!(
                "bin_width must lie in [1/side, 1] = [{}, 1], got {}",
                self.spacing(),
                self.bin_width
            ));
        }
        if !(self.msd_window[0] >= 0.0 && self.msd_window[1] > self.msd_window[0]) {
            errs.push(format!(
                "msd_window must satisfy 0 <= start < end, got [{}, {}]",
                self.msd_window[0], self.msd_window[1]
            ));
        }
        if self.msd_samples == 0 {
            errs.push("msd_samples must be at least 1".to_string());
        }
        for pair in self.times.windows(2) {
            // NaN entries are reported by the finiteness check below
            if pair[1] <= pair[0] {
                errs.push(format!(
                    "times must be strictly increasing, got {} then {}",
                    pair[0], pair[1]
                ));
            }
        }
        for t in &self.times {
            if !(t.is_finite() && *t >= 0.0) {
                errs.push(format!("times must be finite and nonnegative, got {t}"));
            }
        }
        let needs_times = matches!(
            self.experiment,
            ExperimentKind::ProfileComparisonEqual
                | ExperimentKind::ProfileComparisonUnequal
                | ExperimentKind::EnergyTrace
        );
        if needs_times && self.times.is_empty() {
            errs.push(format!("{} requires a nonempty times list", self.experiment.name()));
        }
        for model in &self.models {
            if *model == MobilityModel::CompositeQuastel
                && self.species[0].d_coef != self.species[1].d_coef
            {
                errs.push(
                    "composite_quastel requires equal diffusivities for the two species"
                        .to_string(),
                );
            }
        }
        if self.out_dir.is_empty() {
            errs.push("out_dir must not be empty".to_string());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Validation(errs))
        }
    }
}
