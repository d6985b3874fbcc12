//! Synthetic domain adaptation tasks, label-shift resampling and CSV files.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::divergence::{analytic_gamma_js, FiniteDistribution};
use crate::error::{io_err, Error, Result};
use crate::models::fmt_f64;
use crate::rng::{self, Rng};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Source,
    Target,
}

impl Domain {
    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Source => "source",
            Domain::Target => "target",
        }
    }
}

/// Labels that only the evaluation path may read. Every read is counted;
/// clones share the counter.
#[derive(Clone, Debug)]
pub struct Sequestered {
    labels: Vec<usize>,
    reads: Arc<AtomicUsize>,
}

impl Sequestered {
    pub fn new(labels: Vec<usize>) -> Self {
        Self {
            labels,
            reads: Arc::new(AtomicUsize::new(0)),
        }
    }

    pub fn reveal(&self) -> &[usize] {
        self.reads.fetch_add(1, Ordering::SeqCst);
        &self.labels
    }

    pub fn reads(&self) -> usize {
        self.reads.load(Ordering::SeqCst)
    }
}

impl PartialEq for Sequestered {
    fn eq(&self, other: &Self) -> bool {
        self.labels == other.labels
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Labels {
    Labeled(Vec<usize>),
    Sequestered(Sequestered),
    Unlabeled,
}

/// Generator name, parameters and seed, echoed into the CSV sidecar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub generator: String,
    pub params: BTreeMap<String, serde_json::Value>,
    pub seed: Option<u64>,
    pub num_classes: usize,
    pub domain: Domain,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DADataset {
    features: Tensor,
    labels: Labels,
    domain: Domain,
    metadata: Metadata,
}

impl DADataset {
    pub fn new(features: Tensor, labels: Labels, domain: Domain, metadata: Metadata) -> Result<Self> {
        if features.shape().len() != 2 {
            return Err(Error::Dataset(format!(
                "features must be a matrix, got shape {:?}",
                features.shape()
            )));
        }
        if let Some((i, v)) = features.data().iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Dataset(format!(
                "feature ({}, {}) is {v}",
                i / features.cols(),
                i % features.cols()
            )));
        }
        let k = metadata.num_classes;
        let raw = match &labels {
            Labels::Labeled(l) => Some(l.as_slice()),
            Labels::Sequestered(s) => Some(s.labels.as_slice()),
            Labels::Unlabeled => None,
        };
        if let Some(l) = raw {
            if l.len() != features.rows() {
                return Err(Error::Dataset(format!(
                    "{} labels for {} rows",
                    l.len(),
                    features.rows()
                )));
            }
            if let Some((i, y)) = l.iter().enumerate().find(|(_, &y)| y >= k) {
                return Err(Error::Dataset(format!("row {i} has label {y} outside [0, {k})")));
            }
        }
        Ok(Self {
            features,
            labels,
            domain,
            metadata,
        })
    }

    pub fn features(&self) -> &Tensor {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn metadata(&self) -> &Metadata {
        &self.metadata
    }

    pub fn num_classes(&self) -> usize {
        self.metadata.num_classes
    }

    pub fn label_state(&self) -> &Labels {
        &self.labels
    }

    /// Labels usable for training; `None` unless openly labeled.
    pub fn train_labels(&self) -> Option<&[usize]> {
        match &self.labels {
            Labels::Labeled(l) => Some(l),
            _ => None,
        }
    }

    /// Labels for evaluation. Sequestered labels are counted on every call.
    pub fn eval_labels(&self) -> Option<&[usize]> {
        match &self.labels {
            Labels::Labeled(l) => Some(l),
            Labels::Sequestered(s) => Some(s.reveal()),
            Labels::Unlabeled => None,
        }
    }

    /// Number of sequestered-label reads so far; zero for other states.
    pub fn label_reads(&self) -> usize {
        match &self.labels {
            Labels::Sequestered(s) => s.reads(),
            _ => 0,
        }
    }

    /// Moves open labels behind a read counter.
    pub fn sequester(self) -> Self {
        let labels = match self.labels {
            Labels::Labeled(l) => Labels::Sequestered(Sequestered::new(l)),
            other => other,
        };
        Self { labels, ..self }
    }

    fn raw_labels(&self) -> Option<&[usize]> {
        match &self.labels {
            Labels::Labeled(l) => Some(l),
            Labels::Sequestered(s) => Some(&s.labels),
            Labels::Unlabeled => None,
        }
    }

    /// Rows in the given order, keeping the label state kind. The result
    /// gets a fresh read counter.
    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        let features = self.features.select_rows(idx);
        let pick = |l: &[usize]| idx.iter().map(|&i| l[i]).collect::<Vec<_>>();
        let labels = match &self.labels {
            Labels::Labeled(l) => Labels::Labeled(pick(l)),
            Labels::Sequestered(s) => Labels::Sequestered(Sequestered::new(pick(&s.labels))),
            Labels::Unlabeled => Labels::Unlabeled,
        };
        DADataset::new(features, labels, self.domain, self.metadata.clone())
    }
}

fn meta(generator: &str, params: &[(&str, serde_json::Value)], seed: u64, k: usize, domain: Domain) -> Metadata {
    Metadata {
        generator: generator.to_string(),
        params: params.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
        seed: Some(seed),
        num_classes: k,
        domain,
    }
}

fn shuffled_rows(rows: Vec<[f64; 2]>, labels: Vec<usize>, rng: &mut Rng) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.shuffle(rng);
    let data = order.iter().flat_map(|&i| rows[i]).collect();
    let labels = order.iter().map(|&i| labels[i]).collect();
    (data, labels)
}

/// Centre of the two-moons layout, the pivot for target rotation.
pub const MOONS_CENTROID: [f64; 2] = [0.5, 0.25];

fn sample_moons(n: usize, noise: f64, rng: &mut Rng) -> Result<(Vec<[f64; 2]>, Vec<usize>)> {
    let normal = Normal::new(0.0, noise).map_err(|e| Error::Dataset(e.to_string()))?;
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = usize::from(i >= n / 2);
        let theta = rng.random_range(0.0..PI);
        let (x0, x1) = if y == 0 {
            (theta.cos(), theta.sin())
        } else {
            (1.0 - theta.cos(), 0.5 - theta.sin())
        };
        rows.push([x0 + normal.sample(rng), x1 + normal.sample(rng)]);
        labels.push(y);
    }
    Ok((rows, labels))
}

/// Two interleaved half circles. The target is an independent sample of
/// the same layout rotated by `rotation_deg` about [`MOONS_CENTROID`];
/// its labels are sequestered.
pub fn make_rotated_moons(n: usize, rotation_deg: f64, noise_sigma: f64, seed: u64) -> Result<(DADataset, DADataset)> {
    if n < 2 || !(noise_sigma >= 0.0) || !rotation_deg.is_finite() {
        return Err(Error::Dataset(format!(
            "need n >= 2 and noise >= 0, got n = {n}, noise = {noise_sigma}"
        )));
    }
    let params = [
        ("n", serde_json::json!(n)),
        ("rotation_deg", serde_json::json!(rotation_deg)),
        ("noise_sigma", serde_json::json!(noise_sigma)),
    ];
    let mut rs = rng::stream(seed, rng::streams::SOURCE);
    let (rows, labels) = sample_moons(n, noise_sigma, &mut rs)?;
    let (data, labels) = shuffled_rows(rows, labels, &mut rs);
    let source = DADataset::new(
        Tensor::matrix(n, 2, data)?,
        Labels::Labeled(labels),
        Domain::Source,
        meta("rotated_moons", &params, seed, 2, Domain::Source),
    )?;

    let mut rt = rng::stream(seed, rng::streams::TARGET);
    let (rows, labels) = sample_moons(n, noise_sigma, &mut rt)?;
    let (s, c) = rotation_deg.to_radians().sin_cos();
    let [cx, cy] = MOONS_CENTROID;
    let rows = rows
        .into_iter()
        .map(|[x, y]| {
            let (dx, dy) = (x - cx, y - cy);
            [cx + c * dx - s * dy, cy + s * dx + c * dy]
        })
        .collect();
    let (data, labels) = shuffled_rows(rows, labels, &mut rt);
    let target = DADataset::new(
        Tensor::matrix(n, 2, data)?,
        Labels::Sequestered(Sequestered::new(labels)),
        Domain::Target,
        meta("rotated_moons", &params, seed, 2, Domain::Target),
    )?;
    Ok((source, target))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianShift {
    pub n: usize,
    pub d: usize,
    /// Added to every coordinate of both target class means.
    pub mean_shift: f64,
    /// Target covariance is `cov_scale · I`; the source uses `I`.
    pub cov_scale: f64,
    /// Distance between the two class means along the first axis.
    pub separation: f64,
}

impl GaussianShift {
    pub fn new(n: usize, d: usize, mean_shift: f64, cov_scale: f64) -> Self {
        Self {
            n,
            d,
            mean_shift,
            cov_scale,
            separation: 2.0,
        }
    }
}

/// Two Gaussian classes with means `±separation/2 · e₁`. The target means
/// move by `mean_shift` on every axis and the covariance is scaled.
pub fn make_gaussian_shift(cfg: &GaussianShift, seed: u64) -> Result<(DADataset, DADataset)> {
    if cfg.d == 0 || cfg.n < 2 || !(cfg.cov_scale > 0.0) {
        return Err(Error::Dataset(format!(
            "need d >= 1, n >= 2 and cov_scale > 0: {cfg:?}"
        )));
    }
    let params = [
        ("n", serde_json::json!(cfg.n)),
        ("d", serde_json::json!(cfg.d)),
        ("mean_shift", serde_json::json!(cfg.mean_shift)),
        ("cov_scale", serde_json::json!(cfg.cov_scale)),
        ("separation", serde_json::json!(cfg.separation)),
    ];
    let draw = |stream: u64, shift: f64, sd: f64, domain: Domain| -> Result<DADataset> {
        let mut r = rng::stream(seed, stream);
        let normal = Normal::new(0.0, sd).map_err(|e| Error::Dataset(e.to_string()))?;
        let mut order: Vec<usize> = (0..cfg.n).collect();
        order.shuffle(&mut r);
        let mut data = Vec::with_capacity(cfg.n * cfg.d);
        let mut labels = Vec::with_capacity(cfg.n);
        for &i in &order {
            let y = usize::from(i >= cfg.n / 2);
            let centre = if y == 0 { -cfg.separation / 2.0 } else { cfg.separation / 2.0 };
            for j in 0..cfg.d {
                let mu = shift + if j == 0 { centre } else { 0.0 };
                data.push(mu + normal.sample(&mut r));
            }
            labels.push(y);
        }
        let labels = match domain {
            Domain::Source => Labels::Labeled(labels),
            Domain::Target => Labels::Sequestered(Sequestered::new(labels)),
        };
        DADataset::new(
            Tensor::matrix(cfg.n, cfg.d, data)?,
            labels,
            domain,
            meta("gaussian_shift", &params, seed, 2, domain),
        )
    };
    Ok((
        draw(rng::streams::SOURCE, 0.0, 1.0, Domain::Source)?,
        draw(rng::streams::TARGET, cfg.mean_shift, cfg.cov_scale.sqrt(), Domain::Target)?,
    ))
}

/// Class counts for `n` draws under `marginal` by largest remainder; ties
/// go to the lower class index.
pub fn largest_remainder_counts(n: usize, marginal: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = marginal.iter().map(|p| p * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut left = n - counts.iter().sum::<usize>().min(n);
    let mut order: Vec<usize> = (0..marginal.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

/// Resamples rows with replacement, within each class, so that the class
/// frequencies follow `marginal`. Features of a class are only ever copied
/// from rows of that class.
pub fn resample_label_shift(ds: &DADataset, marginal: &FiniteDistribution, seed: u64) -> Result<DADataset> {
    let labels = ds
        .raw_labels()
        .ok_or_else(|| Error::Dataset("label shift needs labels".into()))?;
    let k = ds.num_classes();
    if marginal.len() != k {
        return Err(Error::Dataset(format!(
            "marginal has {} classes, dataset has {k}",
            marginal.len()
        )));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &y) in labels.iter().enumerate() {
        by_class[y].push(i);
    }
    let counts = largest_remainder_counts(ds.len(), marginal.probs());
    let mut r = rng::stream(seed, rng::streams::RESAMPLE);
    let mut idx = Vec::with_capacity(ds.len());
    for (y, &c) in counts.iter().enumerate() {
        if c > 0 && by_class[y].is_empty() {
            return Err(Error::Dataset(format!(
                "class {y} is requested but absent from the dataset"
            )));
        }
        for _ in 0..c {
            idx.push(by_class[y][r.random_range(0..by_class[y].len())]);
        }
    }
    idx.shuffle(&mut r);
    let mut out = ds.select(&idx)?;
    out.metadata.params.insert(
        "label_marginal".into(),
        serde_json::json!(marginal.probs()),
    );
    out.metadata.params.insert("resample_seed".into(), serde_json::json!(seed));
    Ok(out)
}

/// Jensen–Shannon divergence in nats: `½KL(p‖m) + ½KL(q‖m)`, `m = (p+q)/2`.
pub fn js_label_distance(p: &FiniteDistribution, q: &FiniteDistribution) -> Result<f64> {
    Ok(analytic_gamma_js(p, q, 1.0)?)
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Writes `x0..x{d-1},y,domain` rows plus a `.meta.json` sidecar. The y
/// cell is empty for unlabeled data; sequestered labels are written without
/// being counted as a read.
pub fn save_csv(ds: &DADataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    let mut header: Vec<String> = (0..ds.dim()).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    header.push("domain".into());
    w.write_record(&header).map_err(|e| csv_io(path, e))?;
    let labels = ds.raw_labels();
    for i in 0..ds.len() {
        let mut rec: Vec<String> = ds.features.row(i).iter().map(|&v| fmt_f64(v)).collect();
        rec.push(labels.map(|l| l[i].to_string()).unwrap_or_default());
        rec.push(ds.domain.as_str().into());
        w.write_record(&rec).map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(io_err(path))?;
    let side = sidecar_path(path);
    let json = serde_json::to_string_pretty(&ds.metadata).map_err(|e| Error::Dataset(e.to_string()))?;
    std::fs::write(&side, json + "\n").map_err(io_err(side))
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line: e.position().map(|p| p.line() as usize).unwrap_or(0),
        message: e.to_string(),
    }
}

/// Reads a file written by [`save_csv`] or by hand. Target rows with labels
/// load as sequestered, target rows without as unlabeled.
pub fn load_csv(path: &Path) -> Result<DADataset> {
    let origin = path.display().to_string();
    let perr = |line: usize, message: String| Error::Parse {
        path: origin.clone(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_io(path, e))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_io(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let d = header.len().saturating_sub(2);
    let expected: Vec<String> = (0..d)
        .map(|j| format!("x{j}"))
        .chain(["y".to_string(), "domain".to_string()])
        .collect();
    if d == 0 || header != expected {
        return Err(perr(1, format!("header must be {}", expected.join(","))));
    }
    let mut data = Vec::new();
    let mut labels: Vec<Option<usize>> = Vec::new();
    let mut domain: Option<Domain> = None;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_io(path, e))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() != d + 2 {
            return Err(perr(line, format!("expected {} cells, found {}", d + 2, rec.len())));
        }
        for j in 0..d {
            let cell = rec[j].trim();
            let v: f64 = cell
                .parse()
                .map_err(|_| perr(line, format!("column x{j}: `{cell}` is not a number")))?;
            if !v.is_finite() {
                return Err(perr(line, format!("column x{j}: non-finite value")));
            }
            data.push(v);
        }
        let y = rec[d].trim();
        labels.push(if y.is_empty() {
            None
        } else {
            Some(y.parse().map_err(|_| perr(line, format!("column y: `{y}` is not a class index")))?)
        });
        let dom = match rec[d + 1].trim() {
            "source" => Domain::Source,
            "target" => Domain::Target,
            other => return Err(perr(line, format!("column domain: unknown domain `{other}`"))),
        };
        match domain {
            None => domain = Some(dom),
            Some(prev) if prev != dom => {
                return Err(perr(line, "rows from both domains in one file".into()))
            }
            _ => {}
        }
    }
    let domain = domain.ok_or_else(|| perr(2, "no data rows".into()))?;
    let n = labels.len();
    let labeled = labels.iter().filter(|l| l.is_some()).count();
    if labeled != 0 && labeled != n {
        return Err(perr(1, "either every row or no row may carry a label".into()));
    }
    let raw: Option<Vec<usize>> = labels.into_iter().collect();
    let side = sidecar_path(path);
    let metadata = if side.exists() {
        let text = std::fs::read_to_string(&side).map_err(io_err(&side))?;
        serde_json::from_str::<Metadata>(&text).map_err(|e| Error::Parse {
            path: side.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })?
    } else {
        let k = raw.as_ref().and_then(|l| l.iter().max()).map_or(2, |m| (m + 1).max(2));
        Metadata {
            generator: "csv".into(),
            params: BTreeMap::from([("path".to_string(), serde_json::json!(origin))]),
            seed: None,
            num_classes: k,
            domain,
        }
    };
    let labels = match (raw, domain) {
        (None, _) => Labels::Unlabeled,
        (Some(l), Domain::Source) => Labels::Labeled(l),
        (Some(l), Domain::Target) => Labels::Sequestered(Sequestered::new(l)),
    };
    DADataset::new(Tensor::matrix(n, d, data)?, labels, domain, metadata)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(p: &[f64]) -> FiniteDistribution {
        FiniteDistribution::new(p.to_vec()).unwrap()
    }

    fn counts(ds: &DADataset) -> Vec<usize> {
        let mut c = vec![0; ds.num_classes()];
        for &y in ds.raw_labels().unwrap() {
            c[y] += 1;
        }
        c
    }

    #[test]
    fn moons_are_balanced_and_seeded() {
        let (s, t) = make_rotated_moons(101, 30.0, 0.1, 4).unwrap();
        assert_eq!(counts(&s), vec![50, 51]);
        assert!(matches!(t.label_state(), Labels::Sequestered(_)));
        let (s2, _) = make_rotated_moons(101, 30.0, 0.1, 4).unwrap();
        assert_eq!(s, s2);
        let (s3, _) = make_rotated_moons(101, 30.0, 0.1, 5).unwrap();
        assert_ne!(s, s3);
    }

    #[test]
    fn half_turn_maps_outer_arc_onto_inner() {
        let (_, t) = make_rotated_moons(200, 180.0, 0.0, 1).unwrap();
        let labels = t.raw_labels().unwrap();
        for i in 0..t.len() {
            let r = t.features().row(i);
            // After a half turn about the centroid, class 0 sits on the
            // inner arc (1 - cos, 0.5 - sin) and class 1 on the outer one.
            let on_unit = (r[0] * r[0] + r[1] * r[1] - 1.0).abs() < 1e-9 && r[1] >= -1e-9;
            assert_eq!(on_unit, labels[i] == 1, "row {i}: {r:?}");
        }
    }

    #[test]
    fn gaussian_shift_zero_is_same_law() {
        let cfg = GaussianShift::new(400, 3, 0.0, 1.0);
        let (s, t) = make_gaussian_shift(&cfg, 2).unwrap();
        assert_eq!(s.dim(), 3);
        let mean = |ds: &DADataset| ds.features().data().iter().sum::<f64>() / ds.features().len() as f64;
        assert!((mean(&s) - mean(&t)).abs() < 0.15);
        assert!(make_gaussian_shift(&GaussianShift::new(10, 0, 0.0, 1.0), 0).is_err());
    }

    #[test]
    fn resample_hits_marginal() {
        let (s, _) = make_rotated_moons(1000, 0.0, 0.1, 3).unwrap();
        let r = resample_label_shift(&s, &dist(&[0.9, 0.1]), 7).unwrap();
        assert_eq!(r.len(), 1000);
        assert_eq!(counts(&r), vec![900, 100]);
        let same = resample_label_shift(&s, &dist(&[0.5, 0.5]), 7).unwrap();
        assert_eq!(counts(&same), counts(&s));
    }

    #[test]
    fn resample_rejects_missing_class() {
        let (s, _) = make_rotated_moons(10, 0.0, 0.1, 3).unwrap();
        let only0: Vec<usize> = (0..10).filter(|&i| s.raw_labels().unwrap()[i] == 0).collect();
        let s0 = s.select(&only0).unwrap();
        assert!(resample_label_shift(&s0, &dist(&[0.5, 0.5]), 0).is_err());
    }

    #[test]
    fn largest_remainder_sums() {
        assert_eq!(largest_remainder_counts(10, &[1.0 / 3.0; 3]), vec![4, 3, 3]);
        assert_eq!(largest_remainder_counts(7, &[0.5, 0.5]), vec![4, 3]);
    }

    #[test]
    fn js_distance_examples() {
        assert_eq!(js_label_distance(&dist(&[0.3, 0.7]), &dist(&[0.3, 0.7])).unwrap(), 0.0);
        let v = js_label_distance(&dist(&[1.0, 0.0]), &dist(&[0.0, 1.0])).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-15);
        let a = js_label_distance(&dist(&[0.2, 0.8]), &dist(&[0.6, 0.4])).unwrap();
        let b = js_label_distance(&dist(&[0.6, 0.4]), &dist(&[0.2, 0.8])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sequestered_reads_are_counted() {
        let (_, t) = make_rotated_moons(10, 0.0, 0.1, 3).unwrap();
        assert!(t.train_labels().is_none());
        assert_eq!(t.label_reads(), 0);
        let _ = t.eval_labels();
        let clone = t.clone();
        let _ = clone.eval_labels();
        assert_eq!(t.label_reads(), 2);
    }
}
