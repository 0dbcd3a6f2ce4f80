//! ROC curves over the region tested, AUC and scenario comparison reports.
//!
//! For a threshold η, `Pd(η)` is the fraction of target pixels scoring above η
//! and `Pfa(η)` the number of non-target pixels scoring above η divided by
//! the number of pixels in the region tested (or, optionally, by the number of
//! non-target pixels). Thresholds are every distinct score plus `+∞` and `−∞`.
//! Because the all-pixel denominator stops `Pfa` short of 1, the curve is
//! closed with the point `(1, Pd_max)` and the AUC is the trapezoid area over
//! the whole unit interval.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::cube::{GroundTruthMask, HsiCube, SpectralDictionary};
use crate::detect::{run_srbbh, DetectionMap, WindowSpec};
use crate::error::{Error, Result};

/// Denominator of the false-alarm rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PfaDenominator {
    /// Every pixel of the region tested, targets included.
    #[default]
    AllPixels,
    /// Non-target pixels only.
    Background,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// Descending, from `+∞` to `−∞`.
    pub thresholds: Vec<f64>,
    pub pd: Vec<f64>,
    pub pfa: Vec<f64>,
    pub auc: f64,
}

impl RocCurve {
    /// Builds a curve from per-threshold rates and computes its AUC.
    pub fn from_points(thresholds: Vec<f64>, pd: Vec<f64>, pfa: Vec<f64>) -> Result<Self> {
        if thresholds.len() != pd.len() || pd.len() != pfa.len() || pd.is_empty() {
            return Err(Error::Dimension("ROC columns must be nonempty and equally long".into()));
        }
        let mut curve = Self {
            thresholds,
            pd,
            pfa,
            auc: 0.0,
        };
        curve.auc = auc(&curve);
        Ok(curve)
    }

    /// `(Pfa, Pd)` points in threshold order, starting at `(0, 0)` and ending at `(1, Pd_max)`.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let mut pts = Vec::with_capacity(self.pd.len() + 2);
        pts.push((0.0, 0.0));
        pts.extend(self.pfa.iter().copied().zip(self.pd.iter().copied()));
        let pd_max = self.pd.iter().copied().fold(0.0, f64::max);
        pts.push((1.0, pd_max));
        pts
    }
}

/// Trapezoid area under [`RocCurve::points`].
pub fn auc(curve: &RocCurve) -> f64 {
    curve
        .points()
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

/// ROC of `map` against `truth`, counting only pixels in the region tested.
pub fn roc(map: &DetectionMap, truth: &GroundTruthMask, denominator: PfaDenominator) -> Result<RocCurve> {
    if map.row_offset + map.height > truth.height() || map.col_offset + map.width > truth.width() {
        return Err(Error::Dimension(format!(
            "{}x{} truth mask does not cover the region tested ({}x{} at {},{})",
            truth.height(),
            truth.width(),
            map.height,
            map.width,
            map.row_offset,
            map.col_offset
        )));
    }
    let mut labeled: Vec<(f64, bool)> = map.iter_image().map(|(r, c, s)| (s, truth.get(r, c))).collect();
    if labeled.iter().any(|(s, _)| s.is_nan()) {
        return Err(Error::InvalidValue("detection map contains NaN".into()));
    }
    let n = labeled.len();
    let targets = labeled.iter().filter(|(_, t)| *t).count();
    if targets == 0 {
        return Err(Error::Empty("no target pixels inside the region tested".into()));
    }
    let pfa_den = match denominator {
        PfaDenominator::AllPixels => n,
        PfaDenominator::Background => n - targets,
    };
    labeled.sort_by(|a, b| b.0.total_cmp(&a.0));

    let rate = |k: usize, den: usize| if den == 0 { 0.0 } else { k as f64 / den as f64 };
    let mut thresholds = vec![f64::INFINITY];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut pd = vec![0.0];
    let mut pfa = vec![0.0];
    let mut i = 0;
    while i < n {
        let eta = labeled[i].0;
        // pixels scoring exactly eta are not above it
        thresholds.push(eta);
        pd.push(rate(tp, targets));
        pfa.push(rate(fp, pfa_den));
        while i < n && labeled[i].0 == eta {
            if labeled[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
    }
    thresholds.push(f64::NEG_INFINITY);
    pd.push(rate(tp, targets));
    pfa.push(rate(fp, pfa_den));
    RocCurve::from_points(thresholds, pd, pfa)
}

/// Dictionary sources compared by [`compare_scenarios`].
pub const SCENARIOS: [&str; 3] = ["background", "original", "lowrank"];

/// One ROC per scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioReport {
    pub curves: Vec<(String, RocCurve)>,
}

impl ScenarioReport {
    pub fn get(&self, scenario: &str) -> Option<&RocCurve> {
        self.curves.iter().find(|(n, _)| n == scenario).map(|(_, c)| c)
    }

    pub fn auc(&self, scenario: &str) -> Option<f64> {
        self.get(scenario).map(|c| c.auc)
    }
}

/// Runs the binary-hypothesis detector on `image` with background windows
/// drawn from `d_b` ("background"), `image` itself ("original") and `l`
/// ("lowrank").
#[allow(clippy::too_many_arguments)]
pub fn compare_scenarios(
    image: &HsiCube,
    d_b: &HsiCube,
    l: &HsiCube,
    targets: &SpectralDictionary,
    win: WindowSpec,
    k0: usize,
    truth: &GroundTruthMask,
    denominator: PfaDenominator,
) -> Result<ScenarioReport> {
    let mut curves = Vec::with_capacity(3);
    for (name, source) in SCENARIOS.iter().zip([d_b, image, l]) {
        let map = run_srbbh(image, source, targets, win, k0)?;
        curves.push((name.to_string(), roc(&map, truth, denominator)?));
    }
    Ok(ScenarioReport { curves })
}

pub fn write_roc_csv(curve: &RocCurve, path: &Path) -> Result<()> {
    let mut text = String::from("eta,pd,pfa\n");
    for ((e, d), f) in curve.thresholds.iter().zip(&curve.pd).zip(&curve.pfa) {
        let _ = writeln!(text, "{e},{d},{f}");
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_roc_csv(path: &Path) -> Result<RocCurve> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (mut t, mut d, mut f) = (Vec::new(), Vec::new(), Vec::new());
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::parse(path, format!("line {}: expected eta,pd,pfa", i + 1)))?;
        if vals.len() != 3 {
            return Err(Error::parse(path, format!("line {}: expected 3 fields", i + 1)));
        }
        t.push(vals[0]);
        d.push(vals[1]);
        f.push(vals[2]);
    }
    RocCurve::from_points(t, d, f).map_err(|_| Error::parse(path, "empty ROC file"))
}

/// One `scenario,alpha,auc` line; `alpha` is blank for real scenes.
#[derive(Debug, Clone, PartialEq, serde::Deserialize, serde::Serialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub alpha: Option<f64>,
    pub auc: f64,
}

pub fn write_summary_csv(rows: &[SummaryRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::parse(path, e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::parse(path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_summary_csv(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, format!("{other:?}")),
    })?;
    r.deserialize()
        .map(|row| row.map_err(|e| Error::parse(path, e.to_string())))
        .collect()
}

/// Minimal SVG line plot of several ROC curves on the unit square.
pub fn roc_svg(curves: &[(&str, &RocCurve)]) -> String {
    const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
    let (size, pad) = (400.0, 50.0);
    let x = |v: f64| pad + v * size;
    let y = |v: f64| pad + (1.0 - v) * size;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{w}" font-family="sans-serif" font-size="12">"#,
        w = size + 2.0 * pad
    );
    let _ = writeln!(
        s,
        r#"<rect x="{pad}" y="{pad}" width="{size}" height="{size}" fill="none" stroke="black"/>"#
    );
    for k in 0..=5 {
        let v = k as f64 / 5.0;
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{v}</text>"#, x(v), y(0.0) + 18.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{v}</text>"#, x(0.0) - 6.0, y(v) + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">Pfa</text>"#, x(0.5), y(0.0) + 38.0);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" transform="rotate(-90 {} {})">Pd</text>"#,
        x(0.0) - 34.0,
        y(0.5),
        x(0.0) - 34.0,
        y(0.5)
    );
    for (i, (name, curve)) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = curve
            .points()
            .iter()
            .map(|&(f, d)| format!("{:.2},{:.2}", x(f), y(d)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = y(0.0) - 14.0 * (curves.len() - i) as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{ly}" fill="{color}">{name} (AUC {:.4})</text>"#,
            x(0.45),
            curve.auc
        );
    }
    s.push_str("</svg>\n");
    s
}
