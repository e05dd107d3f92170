//! JSON and CSV interchange formats.
//!
//! Reals are written with 17 significant digits so that every value round-trips
//! exactly. Non-finite reals are written as the strings `"inf"`, `"-inf"` and
//! `"nan"`.

use crate::destabilizer::{InterpolationData, RefinedPairs};
use crate::error::{Error, Result};
use crate::lti::StateSpaceModel;
use crate::lure::{GainEstimate, LoopCertificate, VerifyReport};
use crate::margin::{MarginProblem, MarginSolution};
use crate::multiplier::{FdiReport, FirWindow, PlotRow, ZFMultiplier};
use crate::polyhedral::PolyhedralConvexFunction;
use crate::signal::Signal;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::ser::{Formatter, PrettyFormatter};
use std::fs;
use std::io::{self, Write};
use std::path::Path;

/// `x` with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

/// A real that may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Real(pub f64);

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else {
            s.serialize_str(&fmt17(self.0))
        }
    }
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(Real(x)),
            Raw::Str(s) => match s.as_str() {
                "inf" | "Infinity" => Ok(Real(f64::INFINITY)),
                "-inf" | "-Infinity" => Ok(Real(f64::NEG_INFINITY)),
                "nan" | "NaN" => Ok(Real(f64::NAN)),
                other => other.parse().map(Real).map_err(serde::de::Error::custom),
            },
        }
    }
}

struct Digits17(PrettyFormatter<'static>);

impl Formatter for Digits17 {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        w.write_all(fmt17(v).as_bytes())
    }
    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, v as f64)
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser =
        serde_json::Serializer::with_formatter(&mut buf, Digits17(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("json is utf-8"))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_json(value)?)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

fn matrix(rows: &[Vec<f64>], nrows: usize, ncols: usize, name: &str) -> Result<DMatrix<f64>> {
    if nrows == 0 || ncols == 0 {
        return Ok(DMatrix::zeros(nrows, ncols));
    }
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Dimension(format!(
            "matrix {name} must be {nrows}x{ncols}"
        )));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferFunction {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSpaceData {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    pub d: Vec<Vec<f64>>,
}

/// Plant file: a transfer function in descending powers of `z` or a realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tf: Option<TransferFunction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ss: Option<StateSpaceData>,
}

impl PlantFile {
    pub fn from_model(name: Option<String>, ss: &StateSpaceModel) -> Self {
        let ss = StateSpaceData {
            a: rows_of(&ss.a),
            b: rows_of(&ss.b),
            c: rows_of(&ss.c),
            d: rows_of(&ss.d),
        };
        Self {
            name,
            tf: None,
            ss: Some(ss),
        }
    }

    pub fn to_model(&self) -> Result<StateSpaceModel> {
        match (&self.tf, &self.ss) {
            (Some(tf), None) => StateSpaceModel::from_transfer_function(&tf.num, &tf.den),
            (None, Some(s)) => {
                let n = s.a.len();
                let p = s.d.len();
                let m = s.d.first().map_or(0, |r| r.len());
                StateSpaceModel::new(
                    matrix(&s.a, n, n, "A")?,
                    matrix(&s.b, n, m, "B")?,
                    matrix(&s.c, p, n, "C")?,
                    matrix(&s.d, p, m, "D")?,
                )
            }
            _ => Err(Error::InvalidInput(
                "plant file needs exactly one of \"tf\" or \"ss\"".into(),
            )),
        }
    }
}

pub fn read_plant(path: &Path) -> Result<StateSpaceModel> {
    read_json::<PlantFile>(path)?.to_model()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirFile {
    pub kmin: i64,
    pub kmax: i64,
    pub h: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierFile {
    #[serde(rename = "N")]
    pub n: usize,
    pub nodes: Vec<[f64; 2]>,
    #[serde(rename = "H1")]
    pub h1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fir: Option<FirFile>,
}

impl MultiplierFile {
    pub fn from_multiplier(m: &ZFMultiplier) -> Self {
        Self {
            n: m.n(),
            nodes: m.nodes().iter().map(|z| [z.re, z.im]).collect(),
            h1: m.h1,
            fir: m.fir.as_ref().map(|f| FirFile {
                kmin: f.kmin,
                kmax: f.kmax,
                h: f.h.clone(),
            }),
        }
    }

    pub fn to_multiplier(&self) -> Result<ZFMultiplier> {
        if self.nodes.len() != self.n || self.n == 0 {
            return Err(Error::Dimension(format!(
                "{} nodes for N = {}",
                self.nodes.len(),
                self.n
            )));
        }
        let mut m = ZFMultiplier::from_nodes(
            self.nodes
                .iter()
                .map(|p| Complex64::new(p[0], p[1]))
                .collect(),
        );
        m.h1 = self.h1;
        if let Some(f) = &self.fir {
            if f.kmax < f.kmin || f.h.len() as i64 != f.kmax - f.kmin + 1 {
                return Err(Error::Dimension(
                    "FIR window does not match its coefficients".into(),
                ));
            }
            let tail_bound = self.h1 - f.h.iter().sum::<f64>();
            m.fir = Some(FirWindow {
                kmin: f.kmin,
                kmax: f.kmax,
                h: f.h.clone(),
                tail_bound,
            });
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisRecord {
    pub kappa: Real,
    #[serde(rename = "N")]
    pub n: usize,
    pub t_star: f64,
    pub alpha: Vec<f64>,
    pub mu: Vec<f64>,
    pub eta: f64,
    pub gap: f64,
    pub certified_zero: bool,
}

impl AnalysisRecord {
    pub fn new(p: &MarginProblem, s: &MarginSolution) -> Self {
        Self {
            kappa: Real(p.kappa),
            n: p.n(),
            t_star: s.primal.t_star,
            alpha: s.primal.alpha.clone(),
            mu: s.dual.mu.clone(),
            eta: s.dual.eta,
            gap: s.dual.gap,
            certified_zero: s.certified_zero,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdiFile {
    pub grid: usize,
    pub worst_margin: f64,
    pub certified_margin: Real,
    pub pass: bool,
    pub arg_z: [f64; 2],
}

impl From<&FdiReport> for FdiFile {
    fn from(r: &FdiReport) -> Self {
        Self {
            grid: r.grid,
            worst_margin: r.worst_margin,
            certified_margin: Real(r.certified_margin),
            pass: r.pass,
            arg_z: [r.arg_z.re, r.arg_z.im],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecesFile {
    pub g: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

/// Certificate file. Besides the construction data it records the plant, the
/// refined pairs and the base index so that it can be verified on its own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateFile {
    #[serde(rename = "N")]
    pub n: usize,
    pub d: usize,
    pub t_star: f64,
    pub rho: f64,
    pub mu: Vec<f64>,
    pub ybar: Vec<Vec<f64>>,
    pub xbar: Vec<Vec<f64>>,
    pub pieces: PiecesFile,
    pub kappa: Real,
    pub xi0: Vec<f64>,
    pub xhat: Vec<Vec<f64>>,
    pub yhat: Vec<Vec<f64>>,
    pub base_index: usize,
    pub plant: PlantFile,
}

impl CertificateFile {
    pub fn from_certificate(c: &LoopCertificate) -> Self {
        Self {
            n: c.period,
            d: c.d,
            t_star: c.t_star,
            rho: c.rho,
            mu: c.mu.clone(),
            ybar: c.data.ybar.clone(),
            xbar: c.data.xbar.clone(),
            pieces: PiecesFile {
                g: c.potential.g.clone(),
                b: c.potential.b.clone(),
            },
            kappa: Real(c.kappa),
            xi0: c.xi0.iter().copied().collect(),
            xhat: c.refined.xhat.clone(),
            yhat: c.refined.yhat.clone(),
            base_index: c.base_index,
            plant: PlantFile::from_model(None, &c.plant),
        }
    }

    pub fn to_certificate(&self) -> Result<LoopCertificate> {
        let rows = self.n + 1;
        for (name, v) in [
            ("xbar", &self.xbar),
            ("ybar", &self.ybar),
            ("xhat", &self.xhat),
            ("yhat", &self.yhat),
        ] {
            if v.len() != rows || v.iter().any(|r| r.len() != self.d) {
                return Err(Error::Dimension(format!(
                    "{name} must hold {rows} vectors of length {}",
                    self.d
                )));
            }
        }
        let ss = self.plant.to_model()?;
        if self.xi0.len() != ss.order() * self.d {
            return Err(Error::Dimension(
                "xi0 does not match the lifted plant".into(),
            ));
        }
        let data = InterpolationData {
            xbar: self.xbar.clone(),
            ybar: self.ybar.clone(),
            rho: self.rho,
        };
        let worst_dist_sq = (0..rows)
            .map(|k| {
                crate::linalg::dist_sq(&self.xhat[k], &self.xbar[k])
                    .max(crate::linalg::dist_sq(&self.yhat[k], &self.ybar[k]))
            })
            .fold(0.0f64, f64::max);
        let refined = RefinedPairs {
            xhat: self.xhat.clone(),
            yhat: self.yhat.clone(),
            worst_dist_sq,
            worst_gap: f64::NAN,
        };
        let potential =
            PolyhedralConvexFunction::new(self.pieces.g.clone(), self.pieces.b.clone())?;
        Ok(LoopCertificate::from_parts(
            &ss,
            self.kappa.0,
            self.mu.clone(),
            self.t_star,
            data,
            refined,
            potential,
            self.base_index,
            DVector::from_vec(self.xi0.clone()),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainFile {
    pub pow_out: Real,
    pub pow_in: Real,
    pub lower_bound: Real,
    pub horizon: usize,
}

impl From<&GainEstimate> for GainFile {
    fn from(g: &GainEstimate) -> Self {
        Self {
            pow_out: Real(g.pow_output),
            pow_in: Real(g.pow_input),
            lower_bound: Real(g.lower_bound),
            horizon: g.horizon,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyFile {
    pub pass: bool,
    pub trivial: bool,
    pub worst_residual: f64,
    pub lti_residual: f64,
    pub graph_gap: f64,
    pub eval_residual: f64,
    pub norm_identity: f64,
    pub power_excess: [f64; 2],
}

impl From<&VerifyReport> for VerifyFile {
    fn from(r: &VerifyReport) -> Self {
        Self {
            pass: r.pass,
            trivial: r.trivial,
            worst_residual: r.worst_residual,
            lti_residual: r.lti_residual,
            graph_gap: r.graph_gap,
            eval_residual: r.eval_residual,
            norm_identity: r.norm_identity,
            power_excess: r.power_excess,
        }
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::Writer::from_path(path)?)
}

/// Signal CSV with header `k,comp_0,…`; `steps` rows (periodic signals wrap).
pub fn write_signal_csv(path: &Path, sig: &Signal, steps: usize) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["k".to_string()];
    header.extend((0..sig.dim()).map(|i| format!("comp_{i}")));
    w.write_record(&header)?;
    for k in 0..steps {
        let mut row = vec![k.to_string()];
        row.extend(sig.at(k).iter().map(|&v| fmt17(v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_signal_csv(path: &Path) -> Result<Signal> {
    let mut r = csv::Reader::from_path(path)?;
    let mut samples = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let k: usize = rec
            .get(0)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::InvalidInput(format!("row {i}: bad step index")))?;
        if k != i {
            return Err(Error::InvalidInput(format!(
                "row {i}: step index {k} out of order"
            )));
        }
        let vals = rec
            .iter()
            .skip(1)
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::InvalidInput(format!("row {i}: {e}")))?;
        samples.push(DVector::from_vec(vals));
    }
    if samples.windows(2).any(|w| w[0].len() != w[1].len()) {
        return Err(Error::Dimension("rows of different width".into()));
    }
    Ok(Signal::new(samples))
}

/// Trajectory CSV with header `k,e1_0,…,e2_0,…`.
pub fn write_trajectory_csv(path: &Path, e1: &Signal, e2: &Signal) -> Result<()> {
    let mut w = csv_writer(path)?;
    let d = e1.dim();
    let mut header = vec!["k".to_string()];
    header.extend((0..d).map(|i| format!("e1_{i}")));
    header.extend((0..d).map(|i| format!("e2_{i}")));
    w.write_record(&header)?;
    for k in 0..e1.len() {
        let mut row = vec![k.to_string()];
        row.extend(e1.at(k).iter().chain(e2.at(k).iter()).map(|&v| fmt17(v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Plot CSV with header `omega,ReM,ImM,ReGM,ImGM`.
pub fn write_plot_csv(path: &Path, rows: &[PlotRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["omega", "ReM", "ImM", "ReGM", "ImGM"])?;
    for r in rows {
        w.write_record([
            fmt17(r.omega),
            fmt17(r.m.re),
            fmt17(r.m.im),
            fmt17(r.gm.re),
            fmt17(r.gm.im),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Frequency response CSV with header `omega,ReG,ImG`.
pub fn write_response_csv(path: &Path, ss: &StateSpaceModel, points: usize) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["omega", "ReG", "ImG"])?;
    for i in 0..points {
        let omega = 2.0 * std::f64::consts::PI * i as f64 / points as f64;
        let g = ss.eval_angle(omega)?;
        w.write_record([fmt17(omega), fmt17(g.re), fmt17(g.im)])?;
    }
    w.flush()?;
    Ok(())
}

/// Two polylines (`M` and `G·M`) in the complex plane.
pub fn plot_svg(rows: &[PlotRow]) -> String {
    let pts = rows.iter().flat_map(|r| [r.m, r.gm]);
    let (mut lo, mut hi) = (
        Complex64::new(f64::INFINITY, f64::INFINITY),
        Complex64::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
    );
    for p in pts {
        lo = Complex64::new(lo.re.min(p.re), lo.im.min(p.im));
        hi = Complex64::new(hi.re.max(p.re), hi.im.max(p.im));
    }
    let span = (hi.re - lo.re).max(hi.im - lo.im).max(1e-12);
    let size = 600.0;
    let map = |z: Complex64| {
        (
            (z.re - lo.re) / span * size + 20.0,
            (hi.im - z.im) / span * size + 20.0,
        )
    };
    let line = |sel: &dyn Fn(&PlotRow) -> Complex64, color: &str| {
        let coords: Vec<String> = rows
            .iter()
            .map(|r| {
                let (x, y) = map(sel(r));
                format!("{x:.3},{y:.3}")
            })
            .collect();
        format!(
            "<polyline fill=\"none\" stroke=\"{color}\" points=\"{}\"/>\n",
            coords.join(" ")
        )
    };
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{w}\">\n{}{}</svg>\n",
        line(&|r| r.m, "black"),
        line(&|r| r.gm, "red"),
        w = size + 40.0
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0] {
            let s = fmt17(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let mantissa = s
                .split('e')
                .next()
                .unwrap()
                .trim_start_matches('-')
                .replace('.', "");
            assert_eq!(mantissa.len(), 17);
        }
        assert_eq!(fmt17(f64::INFINITY), "inf");
    }

    #[test]
    fn infinite_reals() {
        let g = GainFile {
            pow_out: Real(0.5),
            pow_in: Real(0.0),
            lower_bound: Real(f64::INFINITY),
            horizon: 10,
        };
        let s = to_json(&g).unwrap();
        assert!(s.contains("\"lower_bound\": \"inf\""), "{s}");
        let back: GainFile = serde_json::from_str(&s).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn plant_formats() {
        let tf: PlantFile = serde_json::from_str(
            r#"{"name": "ex", "tf": {"num": [1.1, 0.6], "den": [1, 1.8, 0.9]}}"#,
        )
        .unwrap();
        let g = tf.to_model().unwrap();
        let back: PlantFile =
            serde_json::from_str(&to_json(&PlantFile::from_model(None, &g)).unwrap()).unwrap();
        assert_eq!(back.to_model().unwrap(), g);
        let stat: PlantFile =
            serde_json::from_str(r#"{"ss": {"A": [], "B": [], "C": [[]], "D": [[2.0]]}}"#).unwrap();
        assert_eq!(stat.to_model().unwrap().d[(0, 0)], 2.0);
        let bad: PlantFile = serde_json::from_str(r#"{"name": "none"}"#).unwrap();
        assert!(bad.to_model().is_err());
    }
}
