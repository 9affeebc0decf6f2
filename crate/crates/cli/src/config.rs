//! Run configuration: JSON document, dotted overrides and content hash.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use diracloc::dynamics::{DecayModel, RadialShape};
use diracloc::fields::{make_profile, Family, FieldProfile, Regime, TabulatedSamples};
use diracloc::operators::{default_grid, m_of, Channel};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    pub family: Family,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<TabulatedSamples>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub magnetic: Option<Box<ProfileSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub electric: Option<Box<ProfileSpec>>,
}

impl ProfileSpec {
    pub fn build(&self) -> Result<FieldProfile> {
        Ok(match self.family {
            Family::Tabulated => {
                let s = self
                    .samples
                    .as_ref()
                    .ok_or_else(|| anyhow!("tabulated profile needs `samples`"))?;
                FieldProfile::tabulated(s)?
            }
            Family::Composite => {
                let (m, e) = self
                    .magnetic
                    .as_ref()
                    .zip(self.electric.as_ref())
                    .ok_or_else(|| anyhow!("composite profile needs `magnetic` and `electric`"))?;
                FieldProfile::composite(m.build()?, e.build()?)
            }
            family => make_profile(family, &self.params)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelRange {
    pub j_min: i64,
    pub j_max: i64,
    #[serde(default = "one")]
    pub step: i64,
}

fn one() -> i64 {
    1
}

impl ChannelRange {
    pub fn channels(&self) -> Vec<Channel> {
        if self.step < 1 {
            return Vec::new();
        }
        (self.j_min..=self.j_max)
            .step_by(self.step as usize)
            .map(Channel::new)
            .collect()
    }
}

/// Explicit box: `n` nodes per component with spacing `r_max / n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSize {
    pub r_max: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub t_min: f64,
    pub t_max: f64,
    pub per_decade: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketSpec {
    pub shape: RadialShape,
    pub decay: DecayModel,
    pub j_max: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    pub r_start: f64,
    pub r_end: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySpec {
    pub theta_points: usize,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub profile: ProfileSpec,
    pub channels: ChannelRange,
    /// `None` selects the automatic box.
    pub grid: Option<GridSize>,
    pub window: [f64; 2],
    /// Half-width `E` of the counting window `[−E, E]`; defaults to the
    /// larger endpoint magnitude of `window`.
    pub count_energy: Option<f64>,
    pub kappa: f64,
    pub delta0: f64,
    pub gamma: f64,
    /// Parameter ε of the count bound; `None` derives it from the field.
    pub delta_eps: Option<f64>,
    pub times: TimeSpec,
    pub wavepacket: PacketSpec,
    pub probe: ProbeSpec,
    /// Regime `verify` must confirm for exit status 0.
    pub expect_regime: Regime,
    /// Re-run `localize` in a box of twice the radius and report the change.
    pub box_check: bool,
    pub density: Option<DensitySpec>,
    pub out_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            profile: ProfileSpec {
                family: Family::Linear,
                params: vec![1.0, 0.3],
                samples: None,
                magnetic: None,
                electric: None,
            },
            channels: ChannelRange {
                j_min: -20,
                j_max: 20,
                step: 1,
            },
            grid: None,
            window: [-2.0, 2.0],
            count_energy: None,
            kappa: 2.0,
            delta0: 0.1,
            gamma: 0.1,
            delta_eps: None,
            times: TimeSpec {
                t_min: 0.1,
                t_max: 200.0,
                per_decade: 64,
            },
            wavepacket: PacketSpec {
                shape: RadialShape::Gaussian {
                    center: 1.0,
                    width: 0.5,
                },
                decay: DecayModel::Geometric { q: 0.5 },
                j_max: 20,
            },
            probe: ProbeSpec {
                r_start: 1.0,
                r_end: 1e3,
                n: 64,
            },
            expect_regime: Regime::Localized,
            box_check: false,
            density: None,
            out_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

/// Replaces the value at a dotted path. Missing intermediate objects are
/// taken from `defaults` when it has them and are empty otherwise. The value
/// is parsed as JSON and falls back to a plain string.
pub fn apply_override(doc: &mut Value, defaults: &Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| anyhow!("override `{spec}` is not of the form key=value"))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = doc;
    let mut def = Some(defaults);
    let keys: Vec<&str> = path.split('.').collect();
    for (i, key) in keys.iter().enumerate() {
        if key.is_empty() {
            bail!("override path `{path}` has an empty segment");
        }
        let obj = match cur {
            Value::Object(map) => map,
            Value::Null => {
                *cur = Value::Object(Default::default());
                cur.as_object_mut().unwrap()
            }
            _ => bail!(
                "override path `{path}`: `{}` is not an object",
                keys[..i].join(".")
            ),
        };
        if i + 1 == keys.len() {
            obj.insert(key.to_string(), value);
            return Ok(());
        }
        def = def.and_then(|d| d.get(key));
        let seed = def
            .filter(|d| d.is_object())
            .cloned()
            .unwrap_or(Value::Null);
        cur = obj.entry(key.to_string()).or_insert(seed);
    }
    unreachable!("split always yields at least one segment")
}

/// Parses a config document with field-path diagnostics.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let mut doc: Value = serde_json::from_str(text).map_err(|e| {
        anyhow!(
            "config is not valid JSON (line {}, column {}): {e}",
            e.line(),
            e.column()
        )
    })?;
    let defaults = serde_json::to_value(RunConfig::default())?;
    for o in overrides {
        apply_override(&mut doc, &defaults, o)?;
    }
    let cfg: RunConfig = serde_path_to_error::deserialize(doc).map_err(|e| {
        let path = e.path().to_string();
        anyhow!("config field `{path}`: {}", e.into_inner())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig> {
    let text = match path {
        Some(p) => {
            std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?
        }
        None => "{}".to_string(),
    };
    parse_config(&text, overrides)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.window;
        if !(lo < hi) {
            bail!("window must satisfy lo < hi, got [{lo}, {hi}]");
        }
        if let Some(e) = self.count_energy {
            if !(e > 0.0) {
                bail!("count_energy must be positive, got {e}");
            }
        }
        if !(self.kappa >= 0.0) {
            bail!("kappa must be nonnegative, got {}", self.kappa);
        }
        if !(self.delta0 > 0.0 && self.delta0 < 1.0) {
            bail!("delta0 must lie in (0,1), got {}", self.delta0);
        }
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            bail!("gamma must lie in [0,1), got {}", self.gamma);
        }
        if let Some(eps) = self.delta_eps {
            if !(eps > 0.0 && eps < 1.0) {
                bail!("delta_eps must lie in (0,1), got {eps}");
            }
        }
        let t = self.times;
        if !(t.t_min > 0.0 && t.t_max > t.t_min && t.per_decade >= 1) {
            bail!("times need 0 < t_min < t_max and per_decade ≥ 1");
        }
        if let Some(g) = self.grid {
            if !(g.r_max > 0.0 && g.n >= 4) {
                bail!("grid needs r_max > 0 and n ≥ 4, got {g:?}");
            }
        }
        if self.channels.step < 1 {
            bail!("channels.step must be at least 1");
        }
        let p = self.probe;
        if !(p.r_start > 0.0 && p.r_end > p.r_start && p.n >= 8) {
            bail!("probe needs 0 < r_start < r_end and n ≥ 8");
        }
        if let Some(d) = self.density {
            if !(d.time >= 0.0) {
                bail!("density.time must be nonnegative");
            }
        }
        Ok(())
    }

    pub fn count_energy(&self) -> f64 {
        self.count_energy
            .unwrap_or(self.window[0].abs().max(self.window[1].abs()))
    }

    /// Spacing and nodes per component for channels up to `max_abs_m`.
    pub fn grid_for(&self, profile: &FieldProfile, max_abs_m: f64) -> Result<(f64, usize)> {
        match self.grid {
            Some(g) => Ok((g.r_max / g.n as f64, g.n)),
            None => default_grid(profile, max_abs_m, self.delta0).context(
                "automatic grid needs a turning radius; set `grid` explicitly for this profile",
            ),
        }
    }

    pub fn max_abs_m(channels: &[Channel]) -> f64 {
        channels.iter().map(|c| m_of(c.j).abs()).fold(0.5, f64::max)
    }

    /// Hex SHA-256 of the canonical serialization. The output directory is
    /// not part of the experiment and is left out.
    pub fn hash(&self) -> String {
        let canonical = RunConfig {
            out_dir: PathBuf::new(),
            ..self.clone()
        };
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }
}
