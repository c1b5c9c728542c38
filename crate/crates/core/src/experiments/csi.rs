//! Pilot-ratio study: recover the full antenna × subcarrier CSI grid from a
//! subset of noisy pilot observations, with and without WEI side
//! information.

use num_complex::Complex32;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::neuralnet::{build_model, fit, Example, Examples, LayerSpec, Model, ModelInput, ModelSpec, Standardizer, TrainConfig};
use crate::propagation::CsiGrid;
use crate::seed::{derive_seed, fingerprint};
use crate::wei::Step;

/// Reported NMSE for an exact reconstruction.
pub const NMSE_FLOOR_DB: f64 = -300.0;

/// Deterministic equispaced pilot positions over the flattened
/// antenna-major grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PilotMask {
    pub antennas: usize,
    pub subcarriers: usize,
    /// Ascending flat indices `m * subcarriers + n`.
    pub indices: Vec<usize>,
}

impl PilotMask {
    pub fn equispaced(ratio: f64, antennas: usize, subcarriers: usize) -> Result<Self> {
        if !(ratio > 0.0 && ratio <= 1.0) {
            return Err(Error::InvalidConfig(format!("pilot ratio {ratio} outside (0, 1]")));
        }
        let total = antennas * subcarriers;
        if total == 0 {
            return Err(Error::InvalidConfig("empty CSI grid".into()));
        }
        let count = (ratio * total as f64).round() as usize;
        if count == 0 {
            return Err(Error::InvalidConfig(format!("pilot ratio {ratio} rounds to no pilots on a {antennas} x {subcarriers} grid")));
        }
        let indices = (0..count).map(|k| k * total / count).collect();
        Ok(Self { antennas, subcarriers, indices })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn ratio(&self) -> f64 {
        self.len() as f64 / (self.antennas * self.subcarriers) as f64
    }
}

/// A grid with only the pilot entries observed.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialCsi {
    pub antennas: usize,
    pub subcarriers: usize,
    /// `None` marks an unobserved entry.
    pub entries: Vec<Option<Complex32>>,
}

impl PartialCsi {
    pub fn observed(&self) -> impl Iterator<Item = (usize, Complex32)> + '_ {
        self.entries.iter().enumerate().filter_map(|(i, e)| e.map(|v| (i, v)))
    }

    /// Observed values as interleaved `(re, im)`, in index order.
    pub fn pilot_features(&self) -> Vec<f32> {
        self.observed().flat_map(|(_, v)| [v.re, v.im]).collect()
    }
}

/// Scales the grid to unit mean power per entry; an all-zero grid is
/// returned unchanged.
pub fn normalize_csi(grid: &CsiGrid) -> CsiGrid {
    let mean = grid.power() / grid.len().max(1) as f64;
    let mut out = grid.clone();
    if mean > 0.0 {
        let s = (1.0 / mean.sqrt()) as f32;
        for h in &mut out.data {
            *h *= s;
        }
    }
    out
}

/// Least-squares pilot observation: truth plus circular complex Gaussian
/// noise whose power sits `snr_db` below the grid's mean entry power.
/// `snr_db = None` observes the truth exactly.
pub fn ls_pilot_estimate<R: Rng>(truth: &CsiGrid, mask: &PilotMask, snr_db: Option<f64>, rng: &mut R) -> Result<PartialCsi> {
    if mask.antennas != truth.antennas || mask.subcarriers != truth.subcarriers {
        return Err(Error::ShapeMismatch {
            expected: vec![truth.antennas, truth.subcarriers],
            got: vec![mask.antennas, mask.subcarriers],
        });
    }
    let sigma = snr_db.map(|snr| {
        let mean = truth.power() / truth.len().max(1) as f64;
        (mean * 10f64.powf(-snr / 10.0) / 2.0).sqrt()
    });
    let mut entries = vec![None; truth.len()];
    for &i in &mask.indices {
        let mut v = truth.data[i];
        if let Some(s) = sigma {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            v += Complex32::new((s * re) as f32, (s * im) as f32);
        }
        entries[i] = Some(v);
    }
    Ok(PartialCsi { antennas: truth.antennas, subcarriers: truth.subcarriers, entries })
}

/// Piecewise-linear fill of `row` from its known points, constant beyond
/// the outermost ones. Rows without any known point are left untouched.
fn fill_line(known: &[(usize, Complex32)], out: &mut [Complex32]) {
    let Some(&(first, v0)) = known.first() else { return };
    let &(last, v1) = known.last().expect("non-empty");
    for (n, o) in out.iter_mut().enumerate() {
        *o = if n <= first {
            v0
        } else if n >= last {
            v1
        } else {
            let k = known.partition_point(|(i, _)| *i <= n);
            let (a, va) = known[k - 1];
            let (b, vb) = known[k];
            let t = (n - a) as f32 / (b - a) as f32;
            va + (vb - va) * t
        };
    }
}

/// Baseline estimator: linear interpolation along subcarriers within each
/// antenna row, then across antennas for rows that hold no pilot.
pub fn interpolate_baseline(partial: &PartialCsi) -> CsiGrid {
    let (m_count, n_count) = (partial.antennas, partial.subcarriers);
    let mut out = CsiGrid::zeros(m_count, n_count);
    let mut has_row = vec![false; m_count];
    for m in 0..m_count {
        let row = &partial.entries[m * n_count..(m + 1) * n_count];
        let known: Vec<(usize, Complex32)> = row.iter().enumerate().filter_map(|(n, e)| e.map(|v| (n, v))).collect();
        has_row[m] = !known.is_empty();
        fill_line(&known, &mut out.data[m * n_count..(m + 1) * n_count]);
    }
    if has_row.iter().all(|h| *h) {
        return out;
    }
    let mut column = vec![Complex32::new(0.0, 0.0); m_count];
    for n in 0..n_count {
        let known: Vec<(usize, Complex32)> = (0..m_count).filter(|m| has_row[*m]).map(|m| (m, out.data[m * n_count + n])).collect();
        fill_line(&known, &mut column);
        for m in (0..m_count).filter(|m| !has_row[*m]) {
            out.data[m * n_count + n] = column[m];
        }
    }
    out
}

/// `10 log10(Σ|Ĥ − H|² / Σ|H|²)`, floored at [`NMSE_FLOOR_DB`].
pub fn nmse_db<'a>(pairs: impl IntoIterator<Item = (&'a CsiGrid, &'a CsiGrid)>) -> f64 {
    let (mut err, mut pow) = (0.0f64, 0.0f64);
    for (est, truth) in pairs {
        err += est.data.iter().zip(&truth.data).map(|(a, b)| (a - b).norm_sqr() as f64).sum::<f64>();
        pow += truth.power();
    }
    if pow <= 0.0 {
        return if err > 0.0 { f64::INFINITY } else { NMSE_FLOOR_DB };
    }
    if err <= 0.0 {
        return NMSE_FLOOR_DB;
    }
    (10.0 * (err / pow).log10()).max(NMSE_FLOOR_DB)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CsiMethod {
    #[serde(rename = "baseline-interp")]
    BaselineInterp,
    #[serde(rename = "wei-s2")]
    WeiS2,
    #[serde(rename = "wei-s4")]
    WeiS4,
}

impl CsiMethod {
    pub const ALL: [CsiMethod; 3] = [CsiMethod::BaselineInterp, CsiMethod::WeiS2, CsiMethod::WeiS4];

    pub fn name(self) -> &'static str {
        match self {
            CsiMethod::BaselineInterp => "baseline-interp",
            CsiMethod::WeiS2 => "wei-s2",
            CsiMethod::WeiS4 => "wei-s4",
        }
    }

    pub fn step(self) -> Option<Step> {
        match self {
            CsiMethod::BaselineInterp => None,
            CsiMethod::WeiS2 => Some(Step::S2),
            CsiMethod::WeiS4 => Some(Step::S4),
        }
    }
}

impl std::fmt::Display for CsiMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsiConfig {
    /// Ascending, each in `(0, 1]`. The default steps one pilot at a time
    /// from one pilot per antenna up to two (on the default 4 × 64 grid),
    /// then coarsens.
    pub ratios: Vec<f64>,
    pub target_nmse_db: f64,
    /// Pilot SNR; `None` disables noise.
    pub snr_db: Option<f64>,
    /// Width of the hidden layer of the WEI-aided estimators.
    pub hidden: usize,
    pub train: TrainConfig,
    pub model_seed: u64,
    pub noise_seed: u64,
}

impl Default for CsiConfig {
    fn default() -> Self {
        Self {
            ratios: [4, 5, 6, 7, 8, 10, 12, 16, 24, 32, 48, 64, 96, 128, 256].iter().map(|&k| k as f64 / 256.0).collect(),
            target_nmse_db: -10.0,
            snr_db: Some(20.0),
            hidden: 64,
            train: TrainConfig { epochs: 100, ..TrainConfig::default() },
            model_seed: 0,
            noise_seed: 0,
        }
    }
}

impl CsiConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ratios.is_empty() {
            return Err(Error::InvalidConfig("csi.ratios is empty".into()));
        }
        if self.ratios.iter().any(|r| !(*r > 0.0 && *r <= 1.0)) {
            return Err(Error::InvalidConfig("csi.ratios must lie in (0, 1]".into()));
        }
        if self.ratios.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("csi.ratios must be strictly ascending".into()));
        }
        if self.hidden == 0 {
            return Err(Error::InvalidConfig("csi.hidden must be at least 1".into()));
        }
        self.train.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsiPoint {
    pub ratio: f64,
    pub pilots: usize,
    pub nmse_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsiCurve {
    pub method: CsiMethod,
    pub points: Vec<CsiPoint>,
    /// Smallest ratio whose NMSE meets the target; `None` when no ratio does.
    pub min_ratio: Option<f64>,
}

impl CsiCurve {
    pub fn nmse_at(&self, ratio: f64) -> Option<f64> {
        self.points.iter().find(|p| p.ratio == ratio).map(|p| p.nmse_db)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsiReport {
    pub curves: Vec<CsiCurve>,
    pub target_nmse_db: f64,
    pub test_count: usize,
    pub config: CsiConfig,
    pub config_hash: String,
    pub dataset_seed: u64,
    pub scene_seed: u64,
}

impl CsiReport {
    pub fn curve(&self, method: CsiMethod) -> &CsiCurve {
        self.curves.iter().find(|c| c.method == method).expect("all methods are reported")
    }

    /// The method's minimum pilot ratio, or `TargetUnreachable`.
    pub fn min_ratio(&self, method: CsiMethod) -> Result<f64> {
        self.curve(method).min_ratio.ok_or_else(|| {
            Error::TargetUnreachable(format!("{method} never reaches {} dB NMSE", self.target_nmse_db))
        })
    }

    /// One row per (method, ratio).
    pub fn to_csv(&self) -> String {
        let mut s = String::from("method,ratio,nmse_db\n");
        for c in &self.curves {
            for p in &c.points {
                s.push_str(&format!("{},{},{:.6}\n", c.method, p.ratio, p.nmse_db));
            }
        }
        s
    }

    pub fn table(&self) -> String {
        let mut s = format!("{:<8}", "ratio");
        for c in &self.curves {
            s.push_str(&format!(" {:>16}", c.method.name()));
        }
        s.push('\n');
        let ratios: Vec<f64> = self.curves.first().map(|c| c.points.iter().map(|p| p.ratio).collect()).unwrap_or_default();
        for r in ratios {
            s.push_str(&format!("{r:<8.5}"));
            for c in &self.curves {
                s.push_str(&format!(" {:>16.3}", c.nmse_at(r).unwrap_or(f64::NAN)));
            }
            s.push('\n');
        }
        for c in &self.curves {
            match c.min_ratio {
                Some(r) => s.push_str(&format!("{}: min pilot ratio for {} dB = {r}\n", c.method, self.target_nmse_db)),
                None => s.push_str(&format!("{}: target {} dB not reached\n", c.method, self.target_nmse_db)),
            }
        }
        s
    }
}

/// Normalized truth and noisy pilots for every link at one ratio.
struct Observations {
    truth: Vec<CsiGrid>,
    partial: Vec<PartialCsi>,
    baseline: Vec<CsiGrid>,
}

fn observe(ds: &Dataset, mask: &PilotMask, ratio_index: usize, cfg: &CsiConfig) -> Result<Observations> {
    let stream = derive_seed(cfg.noise_seed, &format!("pilot-noise/{ratio_index}"));
    let per_link: Vec<(CsiGrid, PartialCsi)> = ds
        .records
        .par_iter()
        .enumerate()
        .map(|(i, rec)| {
            let truth = normalize_csi(&rec.truth.csi);
            let mut rng = ChaCha8Rng::seed_from_u64(stream);
            rng.set_stream(i as u64);
            let partial = ls_pilot_estimate(&truth, mask, cfg.snr_db, &mut rng)?;
            Ok((truth, partial))
        })
        .collect::<Result<_>>()?;
    let (truth, partial): (Vec<_>, Vec<_>) = per_link.into_iter().unzip();
    let baseline = partial.iter().map(interpolate_baseline).collect();
    Ok(Observations { truth, partial, baseline })
}

/// Observed entries keep their pilot values; the rest come from `fill`.
fn keep_pilots(partial: &PartialCsi, mut fill: CsiGrid) -> CsiGrid {
    for (i, v) in partial.observed() {
        fill.data[i] = v;
    }
    fill
}

/// Network estimator: the baseline grid corrected by a two-layer network
/// that sees the pilot values and the standardized WEI vector.
struct WeiEstimator {
    model: Model<f32>,
    wei_norm: Standardizer,
    step: Step,
}

impl WeiEstimator {
    fn features(&self, ds: &Dataset, link: usize, partial: &PartialCsi) -> Vec<f32> {
        let mut f = partial.pilot_features();
        f.extend(self.wei_norm.apply(&ds.wei(link, self.step).expect("step present").vector()));
        f
    }

    fn estimate(&self, ds: &Dataset, link: usize, partial: &PartialCsi, baseline: &CsiGrid) -> Result<CsiGrid> {
        let feats = self.features(ds, link, partial);
        let delta = self.model.forward(&ModelInput { raster: None, features: &feats })?;
        let mut out = baseline.clone();
        for (k, h) in out.data.iter_mut().enumerate() {
            *h += Complex32::new(delta[2 * k], delta[2 * k + 1]);
        }
        Ok(keep_pilots(partial, out))
    }
}

fn train_estimator(ds: &Dataset, step: Step, obs: &Observations, cfg: &CsiConfig, tag: &str) -> Result<WeiEstimator> {
    let rows: Vec<Vec<f32>> = ds.split.train.iter().map(|&i| ds.wei(i, step).expect("step present").vector()).collect();
    let wei_norm = Standardizer::fit(rows.iter().map(Vec::as_slice));
    let inputs = 2 * obs.partial[0].observed().count() + rows.first().map_or(0, Vec::len);
    let outputs = 2 * obs.truth[0].len();
    let spec = ModelSpec {
        step: None,
        raster: None,
        extractor: vec![],
        features: inputs,
        head: vec![
            LayerSpec::Linear { inputs, outputs: cfg.hidden },
            LayerSpec::Relu,
            LayerSpec::Linear { inputs: cfg.hidden, outputs },
        ],
        param_init_seed: derive_seed(cfg.model_seed, tag),
    };
    let mut est = WeiEstimator { model: build_model::<f32>(&spec)?, wei_norm, step };
    let examples = |idx: &[usize]| Examples {
        rasters: vec![],
        items: idx
            .iter()
            .map(|&i| {
                let residual: Vec<f32> =
                    obs.truth[i].data.iter().zip(&obs.baseline[i].data).flat_map(|(t, b)| [t.re - b.re, t.im - b.im]).collect();
                Example { raster: None, features: est.features(ds, i, &obs.partial[i]), target: residual }
            })
            .collect(),
    };
    let train = examples(&ds.split.train);
    let val = examples(&ds.split.val);
    fit(&mut est.model, &train, &val, &cfg.train)?;
    Ok(est)
}

/// Pilot-ratio sweep over the baseline and the two WEI-aided estimators,
/// evaluated on the test split.
pub fn run_csi_experiment(ds: &Dataset, cfg: &CsiConfig) -> Result<CsiReport> {
    cfg.validate()?;
    if !ds.has_steps(&[Step::S2, Step::S4]) {
        return Err(Error::InvalidConfig("the CSI experiment needs WEI steps S2 and S4".into()));
    }
    if ds.split.train.is_empty() || ds.split.test.is_empty() {
        return Err(Error::InvalidConfig("dataset split has an empty train or test part".into()));
    }
    let (antennas, subcarriers) = (ds.config.channel.antennas.count, ds.config.channel.ofdm.subcarriers);
    let mut points: Vec<Vec<CsiPoint>> = vec![Vec::new(); CsiMethod::ALL.len()];
    for (ri, &ratio) in cfg.ratios.iter().enumerate() {
        let mask = PilotMask::equispaced(ratio, antennas, subcarriers)?;
        let obs = observe(ds, &mask, ri, cfg)?;
        let full = mask.len() == antennas * subcarriers;
        for (mi, method) in CsiMethod::ALL.iter().enumerate() {
            let estimates: Vec<CsiGrid> = match method.step() {
                // every entry is a pilot: there is nothing left to estimate
                _ if full => ds.split.test.iter().map(|&i| keep_pilots(&obs.partial[i], obs.baseline[i].clone())).collect(),
                None => ds.split.test.iter().map(|&i| obs.baseline[i].clone()).collect(),
                Some(step) => {
                    let est = train_estimator(ds, step, &obs, cfg, &format!("csi/{method}/{ri}"))?;
                    ds.split.test.iter().map(|&i| est.estimate(ds, i, &obs.partial[i], &obs.baseline[i])).collect::<Result<_>>()?
                }
            };
            let nmse = nmse_db(estimates.iter().zip(ds.split.test.iter().map(|&i| &obs.truth[i])));
            points[mi].push(CsiPoint { ratio, pilots: mask.len(), nmse_db: nmse });
        }
    }
    let curves = CsiMethod::ALL
        .iter()
        .zip(points)
        .map(|(&method, points)| {
            let min_ratio = points.iter().find(|p| p.nmse_db <= cfg.target_nmse_db).map(|p| p.ratio);
            CsiCurve { method, points, min_ratio }
        })
        .collect();
    Ok(CsiReport {
        curves,
        target_nmse_db: cfg.target_nmse_db,
        test_count: ds.split.test.len(),
        config: cfg.clone(),
        config_hash: fingerprint(&serde_json::to_vec(cfg)?),
        dataset_seed: ds.seed,
        scene_seed: ds.scene.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(m: usize, n: usize) -> CsiGrid {
        let mut g = CsiGrid::zeros(m, n);
        for (k, h) in g.data.iter_mut().enumerate() {
            *h = Complex32::new((k as f32 * 0.3).cos(), (k as f32 * 0.7).sin());
        }
        g
    }

    #[test]
    fn mask_counts() {
        let m = PilotMask::equispaced(0.5, 4, 64).unwrap();
        assert_eq!(m.len(), 128);
        let m = PilotMask::equispaced(1.0 / 3.0, 4, 64).unwrap();
        assert_eq!(m.len(), 85);
        let mut u = m.indices.clone();
        u.dedup();
        assert_eq!(u.len(), 85);
        assert!(PilotMask::equispaced(0.0, 4, 64).is_err());
        assert!(PilotMask::equispaced(1.5, 4, 64).is_err());
    }

    #[test]
    fn full_noiseless_observation_is_exact() {
        let g = grid(4, 16);
        let mask = PilotMask::equispaced(1.0, 4, 16).unwrap();
        let p = ls_pilot_estimate(&g, &mask, None, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(interpolate_baseline(&p), g);
        assert_eq!(nmse_db([(&g, &g)]), NMSE_FLOOR_DB);
    }

    #[test]
    fn interpolation_is_linear_between_pilots() {
        let mut p = PartialCsi { antennas: 2, subcarriers: 5, entries: vec![None; 10] };
        p.entries[1] = Some(Complex32::new(1.0, 0.0));
        p.entries[3] = Some(Complex32::new(3.0, 2.0));
        let g = interpolate_baseline(&p);
        let want = [1.0, 1.0, 2.0, 3.0, 3.0];
        for (n, w) in want.iter().enumerate() {
            assert_eq!(g.get(0, n).re, *w);
            // second row has no pilot and copies the only observed row
            assert_eq!(g.get(1, n), g.get(0, n));
        }
        assert_eq!(g.get(0, 2).im, 1.0);
    }

    #[test]
    fn rows_without_pilots_interpolate_across_antennas() {
        let mut p = PartialCsi { antennas: 3, subcarriers: 2, entries: vec![None; 6] };
        p.entries[0] = Some(Complex32::new(0.0, 0.0));
        p.entries[4] = Some(Complex32::new(4.0, 0.0));
        let g = interpolate_baseline(&p);
        assert_eq!(g.get(1, 0).re, 2.0);
        assert_eq!(g.get(1, 1).re, 2.0);
    }

    #[test]
    fn normalized_grid_has_unit_mean_power() {
        let g = normalize_csi(&grid(4, 64));
        assert!((g.power() / g.len() as f64 - 1.0).abs() < 1e-5);
    }
}
