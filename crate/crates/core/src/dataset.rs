//! NARMAX regressor construction, min-max normalization, chronological
//! splitting and CSV ingestion.

use std::ops::Range;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Rows};

pub mod synth;

/// Scalar input/output record of a plant.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    u: Vec<f64>,
    y: Vec<f64>,
}

impl TimeSeries {
    pub fn new(u: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if u.len() != y.len() {
            return Err(Error::Data(format!("input has {} samples but output has {}", u.len(), y.len())));
        }
        if u.is_empty() {
            return Err(Error::Data("empty time series".into()));
        }
        if let Some(k) = u.iter().chain(&y).position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite value at flat index {k}")));
        }
        Ok(TimeSeries { u, y })
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Samples `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(Error::Data(format!("slice {start}..{end} out of range for length {}", self.len())));
        }
        TimeSeries::new(self.u[start..end].to_vec(), self.y[start..end].to_vec())
    }
}

/// Output and input delay counts of the regressor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RegressorConfig {
    pub n_y: usize,
    pub n_u: usize,
}

/// Which raw channel a regressor column is a delayed copy of.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Input,
    Output,
}

impl RegressorConfig {
    pub fn new(n_y: usize, n_u: usize) -> Self {
        RegressorConfig { n_y, n_u }
    }

    /// Regressor width `n = n_y + n_u + 1`.
    pub fn width(&self) -> usize {
        self.n_y + self.n_u + 1
    }

    /// Index of the earliest sample with every delayed term available.
    pub fn lag(&self) -> usize {
        self.n_y.max(self.n_u)
    }

    pub fn channel(&self, column: usize) -> Channel {
        if column < self.n_y {
            Channel::Output
        } else {
            Channel::Input
        }
    }
}

/// Un-normalized regressor rows `x(k)` with targets `y(k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Regressors {
    pub x: Rows,
    pub y: Vec<f64>,
    pub cfg: RegressorConfig,
    /// Raw time index of the first row.
    pub first_index: usize,
}

impl Regressors {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Chronological split: the first `n_train` rows and the rest.
    pub fn split(&self, n_train: usize) -> Result<(Regressors, Regressors)> {
        check_split(n_train, self.len())?;
        let head = Regressors {
            x: self.x.slice(0, n_train),
            y: self.y[..n_train].to_vec(),
            cfg: self.cfg,
            first_index: self.first_index,
        };
        let tail = Regressors {
            x: self.x.slice(n_train, self.len()),
            y: self.y[n_train..].to_vec(),
            cfg: self.cfg,
            first_index: self.first_index + n_train,
        };
        Ok((head, tail))
    }
}

fn check_split(n_train: usize, n: usize) -> Result<()> {
    if n_train == 0 || n_train >= n {
        return Err(Error::Data(format!("training row count {n_train} must lie in 1..{n}")));
    }
    Ok(())
}

/// Row `k` is `[y(k-1)..y(k-n_y), u(k), u(k-1)..u(k-n_u)]` with target `y(k)`,
/// starting at `k = max(n_y, n_u)`.
pub fn build_regressors(ts: &TimeSeries, cfg: RegressorConfig) -> Result<Regressors> {
    let lag = cfg.lag();
    if ts.len() <= lag {
        return Err(Error::Data(format!(
            "series of length {} is too short for n_y={}, n_u={}",
            ts.len(),
            cfg.n_y,
            cfg.n_u
        )));
    }
    let width = cfg.width();
    let rows = ts.len() - lag;
    let mut data = Vec::with_capacity(rows * width);
    let mut y = Vec::with_capacity(rows);
    for k in lag..ts.len() {
        data.extend((1..=cfg.n_y).map(|d| ts.y[k - d]));
        data.extend((0..=cfg.n_u).map(|d| ts.u[k - d]));
        y.push(ts.y[k]);
    }
    Ok(Regressors { x: Rows::new(data, width)?, y, cfg, first_index: lag })
}

/// Per-channel min-max statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    pub u_min: f64,
    pub u_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

/// Which rows the normalization statistics are computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormScope {
    #[default]
    Train,
    All,
}

impl std::str::FromStr for NormScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(NormScope::Train),
            "all" => Ok(NormScope::All),
            other => Err(Error::Config(format!("unknown normalization scope `{other}`"))),
        }
    }
}

impl NormParams {
    /// Statistics over every value that appears in the regressor rows and
    /// targets.
    pub fn fit(reg: &Regressors) -> Result<Self> {
        let (mut u_min, mut u_max) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
        for row in reg.x.iter() {
            for (j, &v) in row.iter().enumerate() {
                match reg.cfg.channel(j) {
                    Channel::Input => {
                        u_min = u_min.min(v);
                        u_max = u_max.max(v);
                    }
                    Channel::Output => {
                        y_min = y_min.min(v);
                        y_max = y_max.max(v);
                    }
                }
            }
        }
        for &v in &reg.y {
            y_min = y_min.min(v);
            y_max = y_max.max(v);
        }
        let norm = NormParams { u_min, u_max, y_min, y_max };
        norm.validate()?;
        Ok(norm)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.u_max > self.u_min) {
            return Err(Error::Data("input channel is constant; cannot normalize".into()));
        }
        if !(self.y_max > self.y_min) {
            return Err(Error::Data("output channel is constant; cannot normalize".into()));
        }
        Ok(())
    }

    pub fn scale_u(&self, v: f64) -> f64 {
        (v - self.u_min) / (self.u_max - self.u_min)
    }

    pub fn scale_y(&self, v: f64) -> f64 {
        (v - self.y_min) / (self.y_max - self.y_min)
    }

    pub fn unscale_y(&self, v: f64) -> f64 {
        v * (self.y_max - self.y_min) + self.y_min
    }

    /// Span of the output channel in engineering units.
    pub fn y_span(&self) -> f64 {
        self.y_max - self.y_min
    }
}

/// Normalized regressors. Every entry of `x` lies in `[0, 1]`; targets do
/// too unless the dataset was built by [`Dataset::extrapolated`].
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Rows,
    y: Vec<f64>,
    norm: NormParams,
    clamped: usize,
}

impl Dataset {
    pub fn new(x: Rows, y: Vec<f64>, norm: NormParams) -> Result<Self> {
        check_rows(&x, &y)?;
        if let Some(v) = x.as_slice().iter().chain(&y).find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Data(format!("normalized value {v} outside [0, 1]")));
        }
        Ok(Dataset { x, y, norm, clamped: 0 })
    }

    /// Rows scaled with statistics from another split: regressors are
    /// clamped to `[0, 1]` for the RBM, targets are kept as-is for error
    /// computation.
    pub fn extrapolated(mut x: Rows, y: Vec<f64>, norm: NormParams) -> Result<Self> {
        check_rows(&x, &y)?;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite target".into()));
        }
        let mut clamped = 0;
        for k in 0..x.len() {
            for v in x.row_mut(k) {
                if *v < 0.0 || *v > 1.0 {
                    *v = v.clamp(0.0, 1.0);
                    clamped += 1;
                }
            }
        }
        Ok(Dataset { x, y, norm, clamped })
    }

    pub fn x(&self) -> &Rows {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn norm(&self) -> &NormParams {
        &self.norm
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn width(&self) -> usize {
        self.x.width()
    }

    /// Number of regressor entries that were clamped into `[0, 1]`.
    pub fn clamped_entries(&self) -> usize {
        self.clamped
    }

    /// Chronological split: first `n_train` rows train, remainder test.
    pub fn split(&self, n_train: usize) -> Result<(Dataset, Dataset)> {
        check_split(n_train, self.len())?;
        let head = Dataset { x: self.x.slice(0, n_train), y: self.y[..n_train].to_vec(), norm: self.norm, clamped: 0 };
        let tail = Dataset {
            x: self.x.slice(n_train, self.len()),
            y: self.y[n_train..].to_vec(),
            norm: self.norm,
            clamped: 0,
        };
        Ok((head, tail))
    }
}

fn check_rows(x: &Rows, y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Dimension { expected: x.len(), got: y.len() });
    }
    Ok(())
}

fn scale_rows(reg: &Regressors, norm: &NormParams) -> Result<(Rows, Vec<f64>)> {
    let x = reg.x.map(|row| {
        row.iter()
            .enumerate()
            .map(|(j, &v)| match reg.cfg.channel(j) {
                Channel::Input => norm.scale_u(v),
                Channel::Output => norm.scale_y(v),
            })
            .collect()
    })?;
    let y = reg.y.iter().map(|&v| norm.scale_y(v)).collect();
    Ok((x, y))
}

/// Min-max normalize with statistics of `reg` itself.
pub fn normalize(reg: &Regressors) -> Result<Dataset> {
    let norm = NormParams::fit(reg)?;
    let (x, y) = scale_rows(reg, &norm)?;
    // Exact endpoints can drift by an ulp for some spans; pin them.
    let x = x.map(|r| r.iter().map(|v| v.clamp(0.0, 1.0)).collect())?;
    let y = y.into_iter().map(|v: f64| v.clamp(0.0, 1.0)).collect();
    Dataset::new(x, y, norm)
}

/// Normalize with externally supplied statistics.
pub fn normalize_with(reg: &Regressors, norm: &NormParams) -> Result<Dataset> {
    norm.validate()?;
    let (x, y) = scale_rows(reg, norm)?;
    Dataset::extrapolated(x, y, *norm)
}

/// Map normalized outputs back to engineering units.
pub fn denormalize(yhat: &[f64], norm: &NormParams) -> Vec<f64> {
    yhat.iter().map(|&v| norm.unscale_y(v)).collect()
}

/// Train/test datasets ready for the pipeline.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: Dataset,
    pub test: Dataset,
    pub norm: NormParams,
    pub raw_pairs: usize,
    pub regressor_rows: usize,
    /// Raw time index of the first training and first test row.
    pub train_start: usize,
    pub test_start: usize,
}

/// Regressors, split chronologically by row, then normalized with
/// statistics from the chosen scope.
pub fn prepare(ts: &TimeSeries, cfg: RegressorConfig, n_train: usize, scope: NormScope) -> Result<Prepared> {
    let n = build_regressors(ts, cfg)?.len();
    check_split(n_train, n)?;
    prepare_ranges(ts, cfg, 0..n_train, n_train..n, scope)
}

/// Like [`prepare`] with explicit regressor-row ranges. Under
/// [`NormScope::All`] the statistics cover every regressor row.
pub fn prepare_ranges(
    ts: &TimeSeries,
    cfg: RegressorConfig,
    train: Range<usize>,
    test: Range<usize>,
    scope: NormScope,
) -> Result<Prepared> {
    let reg = build_regressors(ts, cfg)?;
    let n = reg.len();
    if train.is_empty() || test.is_empty() || train.end > n || test.end > n {
        return Err(Error::Data(format!(
            "row ranges {train:?} and {test:?} must be non-empty and lie within the {n} regressor rows"
        )));
    }
    if train.start < test.end && test.start < train.end {
        return Err(Error::Data(format!("training rows {train:?} overlap test rows {test:?}")));
    }
    let pick = |r: &Range<usize>| Regressors {
        x: reg.x.slice(r.start, r.end),
        y: reg.y[r.clone()].to_vec(),
        cfg,
        first_index: reg.first_index + r.start,
    };
    let (train_reg, test_reg) = (pick(&train), pick(&test));
    let norm = match scope {
        NormScope::Train => NormParams::fit(&train_reg)?,
        NormScope::All => NormParams::fit(&reg)?,
    };
    let (x, y) = scale_rows(&train_reg, &norm)?;
    let x = x.map(|r| r.iter().map(|v| v.clamp(0.0, 1.0)).collect())?;
    let y = y.into_iter().map(|v: f64| v.clamp(0.0, 1.0)).collect();
    let train_ds = Dataset::new(x, y, norm)?;
    let test_ds = normalize_with(&test_reg, &norm)?;
    Ok(Prepared {
        train: train_ds,
        test: test_ds,
        norm,
        raw_pairs: ts.len(),
        regressor_rows: n,
        train_start: train_reg.first_index,
        test_start: test_reg.first_index,
    })
}

/// Read two named numeric columns from a CSV file with a header row.
pub fn load_csv(path: impl AsRef<Path>, u_column: &str, y_column: &str) -> Result<TimeSeries> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, path, u_column, y_column)
}

/// [`load_csv`] over any reader; `origin` names the source in errors.
pub fn read_csv(reader: impl std::io::Read, origin: &Path, u_column: &str, y_column: &str) -> Result<TimeSeries> {
    let fmt = |msg: String| Error::Format { path: origin.into(), msg };
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = reader.headers().map_err(|e| fmt(e.to_string()))?.clone();
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| fmt(format!("missing column `{name}`")))
    };
    let (ui, yi) = (find(u_column)?, find(y_column)?);
    let (mut u, mut y) = (Vec::new(), Vec::new());
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let bad = |msg: String| Error::Csv { path: origin.into(), row, msg };
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let cell = |idx: usize, name: &str| -> Result<f64> {
            let raw = rec.get(idx).unwrap_or("");
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(bad(format!("column `{name}`: `{raw}` is not a finite number"))),
            }
        };
        u.push(cell(ui, u_column)?);
        y.push(cell(yi, y_column)?);
    }
    TimeSeries::new(u, y).map_err(|e| fmt(e.to_string()))
}

const GAS_FURNACE_CSV: &str = include_str!("../data/gas_furnace.csv");

/// The Box-Jenkins gas furnace record: 296 pairs of input gas rate `u` and
/// output CO2 concentration `y`.
pub fn gas_furnace() -> TimeSeries {
    read_csv(GAS_FURNACE_CSV.as_bytes(), Path::new("gas_furnace.csv"), "u", "y").expect("bundled data parses")
}

/// Candidate delay pairs for [`random_search_delays`].
#[derive(Debug, Clone, PartialEq)]
pub enum DelaySpace {
    /// `(n_y, n_u)` drawn uniformly from `[lo, hi]^2`.
    Range { lo: usize, hi: usize },
    /// Drawn uniformly from an explicit list.
    Candidates(Vec<RegressorConfig>),
}

impl DelaySpace {
    fn draw(&self, rng: &mut impl Rng) -> Result<RegressorConfig> {
        match self {
            DelaySpace::Range { lo, hi } if lo <= hi => {
                Ok(RegressorConfig::new(rng.random_range(*lo..=*hi), rng.random_range(*lo..=*hi)))
            }
            DelaySpace::Range { lo, hi } => Err(Error::Config(format!("empty delay range [{lo}, {hi}]"))),
            DelaySpace::Candidates(c) if !c.is_empty() => Ok(c[rng.random_range(0..c.len())]),
            DelaySpace::Candidates(_) => Err(Error::Config("empty candidate list".into())),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DelaySearch {
    pub best: RegressorConfig,
    pub best_mse: f64,
    /// Every trial in draw order.
    pub trials: Vec<(RegressorConfig, f64)>,
}

/// Random search over regressor delays.
///
/// Each trial draws a config and scores it with `evaluate(ts, cfg,
/// split_index)`, where samples before `split_index` train and the rest
/// validate. Repeated draws are scored once. The lowest validation MSE wins;
/// ties go to the earlier trial.
pub fn random_search_delays<F>(
    ts: &TimeSeries,
    space: &DelaySpace,
    n_trials: usize,
    split_index: usize,
    seed: u64,
    mut evaluate: F,
) -> Result<DelaySearch>
where
    F: FnMut(&TimeSeries, RegressorConfig, usize) -> Result<f64>,
{
    if n_trials == 0 {
        return Err(Error::Config("delay search needs at least one trial".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trials: Vec<(RegressorConfig, f64)> = Vec::with_capacity(n_trials);
    for _ in 0..n_trials {
        let cfg = space.draw(&mut rng)?;
        let mse = match trials.iter().find(|(c, _)| *c == cfg) {
            Some((_, m)) => *m,
            None => evaluate(ts, cfg, split_index)?,
        };
        log::debug!("delay trial n_y={} n_u={} mse={mse:.6e}", cfg.n_y, cfg.n_u);
        trials.push((cfg, mse));
    }
    let (best, best_mse) = trials
        .iter()
        .copied()
        .fold(None::<(RegressorConfig, f64)>, |acc, (c, m)| match acc {
            Some((_, bm)) if bm <= m || m.is_nan() => acc,
            _ => Some((c, m)),
        })
        .expect("at least one trial");
    Ok(DelaySearch { best, best_mse, trials })
}
