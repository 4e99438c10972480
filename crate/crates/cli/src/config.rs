//! Run configuration: a flat JSON document whose keys mirror the flags.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use cvtele::fock::{cat_state, coherent_state, number_state, squeezed_vacuum, STATE_LEAKAGE_LIMIT};
use cvtele::verify::BasisKind;
use cvtele::{ChannelParams, ComplexPoint, Error, FockVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::output::Format;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum StateKind {
    Vacuum,
    Number,
    Coherent,
    Cat,
    Squeezed,
}

impl StateKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StateKind::Vacuum => "vacuum",
            StateKind::Number => "number",
            StateKind::Coherent => "coherent",
            StateKind::Cat => "cat",
            StateKind::Squeezed => "squeezed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub state: StateKind,
    /// Photon number for `number` states.
    pub n: usize,
    /// Amplitude for `coherent` and `cat` states.
    pub alpha_re: f64,
    pub alpha_im: f64,
    /// Cat parity, `+1` or `-1`.
    pub sign: i32,
    /// Squeezing parameter.
    pub r: f64,
    pub q: f64,
    pub cutoff: usize,
    /// Half-width of the β grid; `null` picks one from the input state.
    pub extent: Option<f64>,
    pub points: usize,
    pub seed: u64,
    pub shots: usize,
    pub q_list: Vec<f64>,
    /// Add sampled fidelities to `sweep-q`.
    pub sampled: bool,
    pub basis: BasisKind,
    /// Direction of the `fidelity` β ray, in radians.
    pub ray_angle: f64,
    pub ray_length: f64,
    pub ray_points: usize,
    pub chi_bins: usize,
    pub format: Format,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            state: StateKind::Vacuum,
            n: 0,
            alpha_re: 0.0,
            alpha_im: 0.0,
            sign: 1,
            r: 0.0,
            q: 0.5,
            cutoff: 40,
            extent: None,
            points: 101,
            seed: 0,
            shots: 10_000,
            q_list: Vec::new(),
            sampled: false,
            basis: BasisKind::HomodyneX,
            ray_angle: 0.0,
            ray_length: 4.0,
            ray_points: 41,
            chi_bins: 20,
            format: Format::Csv,
            out: None,
        }
    }
}

/// Flags shared by every subcommand. Each overrides the config-file key of
/// the same name.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Flat JSON config file
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub state: Option<StateKind>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha_re: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha_im: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub sign: Option<i32>,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub q: Option<f64>,
    #[arg(long)]
    pub cutoff: Option<usize>,
    #[arg(long)]
    pub extent: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub shots: Option<usize>,
    /// Comma-separated q values
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub q_list: Option<Vec<f64>>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub sampled: Option<bool>,
    /// homodyne-x, homodyne-y, eight-port or number
    #[arg(long)]
    pub basis: Option<BasisKind>,
    #[arg(long, allow_hyphen_values = true)]
    pub ray_angle: Option<f64>,
    #[arg(long)]
    pub ray_length: Option<f64>,
    #[arg(long)]
    pub ray_points: Option<usize>,
    #[arg(long)]
    pub chi_bins: Option<usize>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Worker threads; does not affect results
    #[arg(long)]
    pub threads: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        macro_rules! set {
            ($($f:ident),*) => {$(
                if let Some(v) = &self.$f {
                    cfg.$f = v.clone();
                }
            )*};
        }
        set!(
            state, n, alpha_re, alpha_im, sign, r, q, cutoff, points, seed, shots, q_list, sampled,
            basis, ray_angle, ray_length, ray_points, chi_bins, format
        );
        if self.extent.is_some() {
            cfg.extent = self.extent;
        }
        if self.out.is_some() {
            cfg.out = self.out.clone();
        }
    }

    /// File values (if any), then flags, then validation.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        self.apply(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("bad config: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the compact JSON form, ignoring the output path.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        let text = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn alpha(&self) -> ComplexPoint {
        ComplexPoint::new(self.alpha_re, self.alpha_im)
    }

    /// The input is a coherent state (vacuum included).
    pub fn is_coherent(&self) -> bool {
        matches!(self.state, StateKind::Vacuum | StateKind::Coherent)
            || (self.state == StateKind::Number && self.n == 0)
            || (self.state == StateKind::Squeezed && self.r == 0.0)
    }

    /// Amplitude of a coherent input.
    pub fn coherent_amplitude(&self) -> Option<ComplexPoint> {
        match self.state {
            StateKind::Coherent => Some(self.alpha()),
            _ if self.is_coherent() => Some(ComplexPoint::ZERO),
            _ => None,
        }
    }

    pub fn params(&self) -> Result<ChannelParams, CliError> {
        Ok(ChannelParams::new(self.q, self.cutoff)?)
    }

    pub fn params_for(&self, q: f64) -> Result<ChannelParams, CliError> {
        Ok(ChannelParams::new(q, self.cutoff)?)
    }

    pub fn input_state(&self) -> Result<FockVector, CliError> {
        let cutoff = self.cutoff;
        let psi = match self.state {
            StateKind::Vacuum => number_state(0, cutoff)?,
            StateKind::Number => number_state(self.n, cutoff)?,
            StateKind::Coherent => {
                let v = coherent_state(self.alpha(), cutoff);
                let leakage = v.leakage();
                if leakage > STATE_LEAKAGE_LIMIT {
                    return Err(Error::CutoffTooSmall {
                        cutoff,
                        leakage,
                        limit: STATE_LEAKAGE_LIMIT,
                    }
                    .into());
                }
                v.normalized()?
            }
            StateKind::Cat => cat_state(self.alpha(), self.sign, cutoff)?,
            StateKind::Squeezed => squeezed_vacuum(self.r, cutoff)?,
        };
        Ok(psi)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Core(Error::Domain(msg)));
        let finite = [
            ("alpha_re", self.alpha_re),
            ("alpha_im", self.alpha_im),
            ("r", self.r),
            ("q", self.q),
            ("ray_angle", self.ray_angle),
            ("ray_length", self.ray_length),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return bad(format!("{name} must be finite"));
            }
        }
        if self.sign != 1 && self.sign != -1 {
            return bad(format!("sign must be +1 or -1, got {}", self.sign));
        }
        if self.r < 0.0 {
            return bad(format!("squeezing r must be >= 0, got {}", self.r));
        }
        if let Some(e) = self.extent {
            if !(e > 0.0 && e.is_finite()) {
                return bad(format!("extent must be positive, got {e}"));
            }
        }
        if self.points < 3 || self.points.is_multiple_of(2) {
            return bad(format!("points must be odd and >= 3, got {}", self.points));
        }
        if self.shots == 0 {
            return bad("shots must be >= 1".into());
        }
        if self.ray_points < 2 {
            return bad("ray_points must be >= 2".into());
        }
        if self.ray_length < 0.0 {
            return bad("ray_length must be >= 0".into());
        }
        if self.chi_bins < 2 {
            return bad("chi_bins must be >= 2".into());
        }
        self.params()?;
        for &q in &self.q_list {
            self.params_for(q)?;
        }
        self.input_state()?;
        Ok(())
    }
}
