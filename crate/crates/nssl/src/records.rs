//! JSON-lines records and CSV curves. Every record carries the config hash.

use std::io::{self, Write};

use nssl_core::detector::DetectionVerdict;
use nssl_core::invariants::InvariantReport;
use nssl_core::lorentz::DistributionCurve;
use nssl_core::morrey::MorreyProfile;
use serde::Serialize;

use crate::config::{Exponent, LatticePoint, ThresholdsJson};

#[derive(Debug, Clone, Serialize)]
pub struct InvariantRecord<'a> {
    pub t0: f64,
    pub x0: [f64; 3],
    pub r: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "D")]
    pub d: Option<f64>,
    #[serde(rename = "G")]
    pub g: f64,
    pub samples_used: usize,
    pub clipped: bool,
    pub config_hash: &'a str,
}

impl<'a> InvariantRecord<'a> {
    pub fn new(rep: &InvariantReport, config_hash: &'a str) -> Self {
        Self {
            t0: rep.t0,
            x0: rep.x0,
            r: rep.r,
            a: rep.a,
            b: rep.b,
            c: rep.c,
            d: rep.d,
            g: rep.g(),
            samples_used: rep.samples_used,
            clipped: rep.clipped,
            config_hash,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceEntry<'a> {
    pub name: &'a str,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Z0 {
    pub t0: f64,
    pub x0: [f64; 3],
}

#[derive(Debug, Clone, Serialize)]
pub struct VerdictRecord<'a> {
    pub lattice_index: usize,
    pub z0: Z0,
    pub r: f64,
    pub p: Exponent,
    pub nu: f64,
    pub criterion: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measured: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<&'static str>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<TraceEntry<'a>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub thresholds: ThresholdsJson,
    pub config_hash: &'a str,
}

impl<'a> VerdictRecord<'a> {
    pub fn new(
        pt: &LatticePoint,
        criterion: &'static str,
        outcome: &'a Result<DetectionVerdict, nssl_core::Error>,
        thresholds: ThresholdsJson,
        config_hash: &'a str,
    ) -> Self {
        let mut rec = Self {
            lattice_index: pt.index,
            z0: Z0 { t0: pt.t0, x0: pt.x0 },
            r: pt.r,
            p: Exponent(pt.p),
            nu: pt.nu,
            criterion,
            measured: None,
            threshold: None,
            verdict: None,
            trace: Vec::new(),
            error: None,
            thresholds,
            config_hash,
        };
        match outcome {
            Ok(v) => {
                rec.measured = Some(v.measured);
                rec.threshold = Some(v.threshold);
                rec.verdict = Some(v.verdict.as_str());
                rec.trace = v.trace.iter().map(|(n, x)| TraceEntry { name: n, value: *x }).collect();
            }
            Err(e) => rec.error = Some(e.to_string()),
        }
        rec
    }
}

pub fn write_json_line<W: Write, T: Serialize>(w: &mut W, rec: &T) -> io::Result<()> {
    serde_json::to_writer(&mut *w, rec)?;
    w.write_all(b"\n")
}

fn hash_line<W: Write>(w: &mut W, config_hash: &str) -> io::Result<()> {
    writeln!(w, "# config_hash={config_hash}")
}

/// `sigma,measure` breakpoints of `m(σ) = |{|f| > σ}|`.
pub fn write_distribution_csv<W: Write>(w: &mut W, curve: &DistributionCurve, config_hash: &str) -> io::Result<()> {
    hash_line(w, config_hash)?;
    writeln!(w, "sigma,measure")?;
    for &(s, m) in curve.breakpoints() {
        writeln!(w, "{s:e},{m:e}")?;
    }
    Ok(())
}

/// `eta,value` along the dyadic ladder.
pub fn write_morrey_csv<W: Write>(w: &mut W, profile: &MorreyProfile, config_hash: &str) -> io::Result<()> {
    hash_line(w, config_hash)?;
    writeln!(w, "eta,value")?;
    for (eta, v) in profile.radii.iter().zip(&profile.values) {
        writeln!(w, "{eta:e},{v:e}")?;
    }
    Ok(())
}

/// `t,q` proxy series.
pub fn write_series_csv<W: Write>(w: &mut W, series: &[(f64, f64)], config_hash: &str) -> io::Result<()> {
    hash_line(w, config_hash)?;
    writeln!(w, "t,q")?;
    for (t, q) in series {
        writeln!(w, "{t:e},{q:e}")?;
    }
    Ok(())
}
