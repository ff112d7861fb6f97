//! JSON inputs: generator specs, scan lattices and the hashed run config.

use nssl_core::detector::{Criterion, Thresholds};
use nssl_core::synth::{GeneratorSpec, Profile, RadialShape};
use nssl_core::Grid;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridJson {
    pub dims: [usize; 3],
    pub nt: usize,
    pub lower: [f64; 3],
    pub upper: [f64; 3],
    pub time: [f64; 2],
    #[serde(default)]
    pub periodic: [bool; 3],
}

impl GridJson {
    pub fn to_grid(&self) -> nssl_core::Result<Grid> {
        Grid::new(self.dims, self.nt, self.lower, self.upper, (self.time[0], self.time[1]), self.periodic)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeJson {
    #[default]
    Radial,
    Scalar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileJson {
    BeltramiAbc {
        a: f64,
        b: f64,
        c: f64,
    },
    InverseRadial {
        c: f64,
        #[serde(default)]
        shape: ShapeJson,
    },
    #[serde(rename = "leray_selfsimilar")]
    LeraySelfSimilar {
        blowup_time: f64,
        a: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    RandomDivfree {
        /// Falls back to the run's `--seed`.
        seed: Option<u64>,
        k_max: usize,
        slope: f64,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default)]
        decay: bool,
    },
    Constant {
        velocity: [f64; 3],
        #[serde(default)]
        pressure: f64,
    },
}

fn one() -> f64 {
    1.0
}

/// `gen` input: a profile, its grid, and whether to replace the pressure by
/// the spectral solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpecJson {
    #[serde(flatten)]
    pub profile: ProfileJson,
    pub grid: GridJson,
    #[serde(default)]
    pub spectral_pressure: bool,
}

impl GenSpecJson {
    pub fn to_spec(&self, default_seed: u64) -> nssl_core::Result<GeneratorSpec> {
        let profile = match self.profile.clone() {
            ProfileJson::BeltramiAbc { a, b, c } => Profile::BeltramiAbc { a, b, c },
            ProfileJson::InverseRadial { c, shape } => Profile::InverseRadial {
                c,
                shape: match shape {
                    ShapeJson::Radial => RadialShape::Radial,
                    ShapeJson::Scalar => RadialShape::Scalar,
                },
            },
            ProfileJson::LeraySelfSimilar { blowup_time, a, amplitude } => {
                Profile::LeraySelfSimilar { blowup_time, a, amplitude }
            }
            ProfileJson::RandomDivfree { seed, k_max, slope, amplitude, decay } => {
                Profile::RandomDivfree { seed: seed.unwrap_or(default_seed), k_max, slope, amplitude, decay }
            }
            ProfileJson::Constant { velocity, pressure } => Profile::Constant { velocity, pressure },
        };
        Ok(GeneratorSpec { profile, grid: self.grid.to_grid()? })
    }
}

/// A real exponent that may be `"inf"` in JSON.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponent(pub f64);

impl Serialize for Exponent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Exponent(v)),
            Raw::Str(s) if matches!(s.as_str(), "inf" | "infinity" | "∞") => Ok(Exponent(f64::INFINITY)),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("bad exponent {s:?}"))),
        }
    }
}

pub const ALL_CRITERIA: [Criterion; 5] = [
    Criterion::MorreyOscillation,
    Criterion::MorreyPlain,
    Criterion::Wolf,
    Criterion::ConcentrationP3,
    Criterion::ConcentrationGeneral,
];

pub fn criterion_from_str(s: &str) -> Option<Criterion> {
    ALL_CRITERIA.into_iter().find(|c| c.as_str() == s)
}

/// Cartesian product `t0 × x0 × r × p × ν`, in that nesting order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lattice {
    pub t0: Vec<f64>,
    pub x0: Vec<[f64; 3]>,
    pub r: Vec<f64>,
    #[serde(default = "default_p")]
    pub p: Vec<Exponent>,
    #[serde(default = "default_nu")]
    pub nu: Vec<f64>,
    /// Criterion names; all when empty.
    #[serde(default)]
    pub criteria: Vec<String>,
    /// Level-set floor for the oscillation weak norm, in cells.
    #[serde(default)]
    pub level_floor_cells: f64,
}

fn default_p() -> Vec<Exponent> {
    vec![Exponent(3.0)]
}

fn default_nu() -> Vec<f64> {
    vec![2.0]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticePoint {
    pub index: usize,
    pub t0: f64,
    pub x0: [f64; 3],
    pub r: f64,
    pub p: f64,
    pub nu: f64,
    /// Positions of `p` and `ν` in their lists; criteria that ignore them
    /// run only at slot 0.
    pub p_slot: usize,
    pub nu_slot: usize,
}

impl Lattice {
    pub fn validate(&self) -> Result<(), String> {
        if self.points().is_empty() {
            return Err("scan lattice is empty".into());
        }
        if let Some(bad) = self.criteria.iter().find(|c| criterion_from_str(c).is_none()) {
            return Err(format!("unknown criterion {bad:?}"));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<LatticePoint> {
        let mut out = Vec::new();
        for &t0 in &self.t0 {
            for &x0 in &self.x0 {
                for &r in &self.r {
                    for (p_slot, &Exponent(p)) in self.p.iter().enumerate() {
                        for (nu_slot, &nu) in self.nu.iter().enumerate() {
                            out.push(LatticePoint { index: out.len(), t0, x0, r, p, nu, p_slot, nu_slot });
                        }
                    }
                }
            }
        }
        out
    }

    pub fn criteria(&self) -> Vec<Criterion> {
        if self.criteria.is_empty() {
            ALL_CRITERIA.to_vec()
        } else {
            self.criteria.iter().filter_map(|c| criterion_from_str(c)).collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdsJson {
    pub delta: f64,
    pub eps_star: f64,
    pub delta_star: f64,
    pub c_cal: f64,
    pub wolf_eps: f64,
}

impl From<&Thresholds> for ThresholdsJson {
    fn from(t: &Thresholds) -> Self {
        Self { delta: t.delta, eps_star: t.eps_star, delta_star: t.delta_star, c_cal: t.c_cal, wolf_eps: t.wolf_eps }
    }
}

/// Everything that determines a run's output, hashed for provenance.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub input: Option<String>,
    pub thresholds: ThresholdsJson,
    pub seed: u64,
    pub lattice: Option<Lattice>,
    pub tool_version: &'static str,
}

impl RunConfig {
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}
