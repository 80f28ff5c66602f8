//! Artificial missingness under the MCAR, MAR, and MNAR mechanisms.
//!
//! Amputation here is deterministic rank/quota based rather than
//! probabilistic: a run labeled "10% missing" realizes exactly its quota, so
//! every method faces identical missingness. Quotas round half away from
//! zero and never drop below one cell. MCAR draws a single global quota
//! across eligible features; MAR and MNAR apply a per-feature quota of
//! round(rate x n_rows), mirroring their feature-conditioned definitions.
//! The target column is never amputated.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tabular::{Cell, Dataset, FeatureKind, GroundTruthStore, MaskOrigin, MissingMask};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mechanism {
    Mcar,
    Mar,
    Mnar,
}

impl Mechanism {
    pub const ALL: [Mechanism; 3] = [Mechanism::Mcar, Mechanism::Mar, Mechanism::Mnar];

    pub fn as_str(self) -> &'static str {
        match self {
            Mechanism::Mcar => "MCAR",
            Mechanism::Mar => "MAR",
            Mechanism::Mnar => "MNAR",
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "MCAR" => Ok(Mechanism::Mcar),
            "MAR" => Ok(Mechanism::Mar),
            "MNAR" => Ok(Mechanism::Mnar),
            other => Err(Error::Config(format!("unknown mechanism '{other}'"))),
        }
    }
}

/// Which columns may receive missingness.
///
/// For MAR, an explicit list is read as flattened (x_obs, x_miss) pairs and
/// must have even length; `AllNonTarget` derives pairs from target
/// correlation via [`pair_features`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FeaturePolicy {
    AllNonTarget,
    Columns(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmputationSpec {
    pub mechanism: Mechanism,
    pub rate: f64,
    pub seed: u64,
    pub feature_policy: FeaturePolicy,
}

impl AmputationSpec {
    pub fn new(mechanism: Mechanism, rate: f64, seed: u64) -> Self {
        AmputationSpec { mechanism, rate, seed, feature_policy: FeaturePolicy::AllNonTarget }
    }

    fn validate(&self, data: &Dataset) -> Result<Vec<usize>> {
        if !(self.rate > 0.0 && self.rate < 1.0) {
            return Err(Error::Amputation(format!(
                "rate must lie strictly between 0 and 1, got {}",
                self.rate
            )));
        }
        let target = data.target_col();
        match &self.feature_policy {
            FeaturePolicy::AllNonTarget => Ok(data.feature_cols()),
            FeaturePolicy::Columns(cols) => {
                if cols.is_empty() {
                    return Err(Error::Amputation("empty column list".into()));
                }
                let mut seen = vec![false; data.n_cols()];
                for &c in cols {
                    if c >= data.n_cols() {
                        return Err(Error::Amputation(format!("column {c} out of range")));
                    }
                    if c == target {
                        return Err(Error::Amputation("column list includes the target".into()));
                    }
                    if seen[c] {
                        return Err(Error::Amputation(format!("column {c} listed twice")));
                    }
                    seen[c] = true;
                }
                Ok(cols.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmputationOutcome {
    /// Origin is always `Amputated`.
    pub mask: MissingMask,
    /// Realized masked-cell count per column.
    pub quota_per_feature: BTreeMap<usize, usize>,
    /// (x_obs, x_miss) pairs; empty unless mechanism = MAR.
    pub pairing: Vec<(usize, usize)>,
}

// Quota rounding: half away from zero, floor of one cell so a positive rate
// always produces missingness.
fn quota(rate: f64, cells: usize) -> usize {
    ((rate * cells as f64).round() as usize).max(1)
}

/// Dispatches on `spec.mechanism`.
pub fn ampute(data: &Dataset, spec: &AmputationSpec) -> Result<AmputationOutcome> {
    match spec.mechanism {
        Mechanism::Mcar => ampute_mcar(data, spec),
        Mechanism::Mar => ampute_mar(data, spec),
        Mechanism::Mnar => ampute_mnar(data, spec),
    }
}

/// Masks round(rate x n_rows x n_eligible) cells drawn uniformly without
/// replacement from the observed cells of eligible features.
pub fn ampute_mcar(data: &Dataset, spec: &AmputationSpec) -> Result<AmputationOutcome> {
    let eligible = spec.validate(data)?;
    let m = quota(spec.rate, data.n_rows() * eligible.len());

    // Row-major over eligible features, so the draw depends only on shape and
    // observedness, never on cell values.
    let observed: Vec<(usize, usize)> = (0..data.n_rows())
        .flat_map(|r| eligible.iter().map(move |&c| (r, c)))
        .filter(|&(r, c)| !data.is_missing(r, c))
        .collect();
    if m > observed.len() {
        return Err(Error::Amputation(format!(
            "quota {m} exceeds the {} observed eligible cells",
            observed.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let picks = rand::seq::index::sample(&mut rng, observed.len(), m);
    let mut mask = MissingMask::new(data.n_rows(), data.n_cols(), MaskOrigin::Amputated);
    let mut quota_per_feature = BTreeMap::new();
    for i in picks {
        let (r, c) = observed[i];
        mask.set(r, c);
        *quota_per_feature.entry(c).or_insert(0) += 1;
    }
    Ok(AmputationOutcome { mask, quota_per_feature, pairing: Vec::new() })
}

fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Pairs non-target features for MAR amputation.
///
/// Features are ranked by |Pearson correlation with the label-encoded
/// target| descending (ties by ascending column index, undefined
/// correlations rank as zero) and paired greedily down the ranking. The
/// first member of each pair, the more target-correlated one, drives
/// missingness in the second. An odd leftover feature is excluded.
pub fn pair_features(data: &Dataset) -> Result<Vec<(usize, usize)>> {
    let features = data.feature_cols();
    if features.len() < 2 {
        return Err(Error::Amputation("pairing needs at least two non-target features".into()));
    }
    let target = data.target_col();
    let mut ranked: Vec<(usize, f64)> = Vec::with_capacity(features.len());
    let mut any_defined = false;
    for &c in &features {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for r in 0..data.n_rows() {
            if let (Some(x), Some(y)) = (data.cell(r, c), data.cell(r, target)) {
                xs.push(x.encoded());
                ys.push(y.encoded());
            }
        }
        let r = pearson(&xs, &ys);
        any_defined |= r.is_some();
        ranked.push((c, r.map_or(0.0, f64::abs)));
    }
    if !any_defined {
        return Err(Error::Amputation(
            "no feature has a defined correlation with the target".into(),
        ));
    }
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(ranked.chunks_exact(2).map(|pair| (pair[0].0, pair[1].0)).collect())
}

/// Per (x_obs, x_miss) pair, masks x_miss in the round(rate x n_rows) rows
/// holding the highest x_obs values, so lower x_obs means lower missingness.
/// Candidate rows observe both pair members; ties break by ascending row
/// index. x_obs itself is never masked.
pub fn ampute_mar(data: &Dataset, spec: &AmputationSpec) -> Result<AmputationOutcome> {
    let eligible = spec.validate(data)?;
    let pairing = match &spec.feature_policy {
        FeaturePolicy::AllNonTarget => pair_features(data)?,
        FeaturePolicy::Columns(_) => {
            if eligible.len() % 2 != 0 {
                return Err(Error::Amputation(
                    "explicit MAR column list must pair up (even length)".into(),
                ));
            }
            eligible.chunks_exact(2).map(|pair| (pair[0], pair[1])).collect()
        }
    };

    let m = quota(spec.rate, data.n_rows());
    let mut mask = MissingMask::new(data.n_rows(), data.n_cols(), MaskOrigin::Amputated);
    let mut quota_per_feature = BTreeMap::new();
    for &(x_obs, x_miss) in &pairing {
        let mut candidates: Vec<(usize, f64)> = (0..data.n_rows())
            .filter_map(|r| match (data.cell(r, x_obs), data.cell(r, x_miss)) {
                (Some(driver), Some(_)) => Some((r, driver.encoded())),
                _ => None,
            })
            .collect();
        if m > candidates.len() {
            return Err(Error::Amputation(format!(
                "quota {m} exceeds the {} maskable cells of column {x_miss}",
                candidates.len()
            )));
        }
        candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        for &(r, _) in &candidates[..m] {
            mask.set(r, x_miss);
        }
        quota_per_feature.insert(x_miss, m);
    }
    Ok(AmputationOutcome { mask, quota_per_feature, pairing })
}

/// Self-censoring: per eligible feature, masks its round(rate x n_rows)
/// largest observed values (label codes for categorical features), ties by
/// ascending row index.
pub fn ampute_mnar(data: &Dataset, spec: &AmputationSpec) -> Result<AmputationOutcome> {
    let eligible = spec.validate(data)?;
    let m = quota(spec.rate, data.n_rows());
    let mut mask = MissingMask::new(data.n_rows(), data.n_cols(), MaskOrigin::Amputated);
    let mut quota_per_feature = BTreeMap::new();
    for &c in &eligible {
        let mut candidates: Vec<(usize, f64)> =
            data.observed_in_col(c).map(|(r, v)| (r, v.encoded())).collect();
        if m > candidates.len() {
            return Err(Error::Amputation(format!(
                "quota {m} exceeds the {} observed cells of column {c}",
                candidates.len()
            )));
        }
        candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        for &(r, _) in &candidates[..m] {
            mask.set(r, c);
        }
        quota_per_feature.insert(c, m);
    }
    Ok(AmputationOutcome { mask, quota_per_feature, pairing: Vec::new() })
}

/// Writes a mask as (row, column, original_value) triples so a run can be
/// replayed bit-exactly. Continuous values render in shortest round-trip
/// form; categorical values render as their labels.
pub fn export_mask_csv<W: Write>(
    data: &Dataset,
    store: &GroundTruthStore,
    mut out: W,
) -> Result<()> {
    writeln!(out, "row,column,original_value")?;
    for (r, c, value) in store.iter() {
        let rendered = match value {
            Cell::Num(v) => format!("{v}"),
            Cell::Cat(code) => data.feature(c).categories().map_or_else(
                || code.to_string(),
                |cats| cats[code as usize].clone(),
            ),
        };
        writeln!(out, "{r},{c},{rendered}")?;
    }
    Ok(())
}

/// Reads (row, column, original_value) triples back into a mask over the
/// complete dataset, verifying each stored value against the cell it claims
/// to have come from.
pub fn import_mask_csv<R: Read>(data: &Dataset, reader: R) -> Result<MissingMask> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut mask = MissingMask::new(data.n_rows(), data.n_cols(), MaskOrigin::Amputated);
    for record in rdr.records() {
        let record = record?;
        if record.len() != 3 {
            return Err(Error::Ingest(format!("mask row has {} fields, expected 3", record.len())));
        }
        let r: usize = record[0]
            .parse()
            .map_err(|_| Error::Ingest(format!("bad row index '{}'", &record[0])))?;
        let c: usize = record[1]
            .parse()
            .map_err(|_| Error::Ingest(format!("bad column index '{}'", &record[1])))?;
        if r >= data.n_rows() || c >= data.n_cols() {
            return Err(Error::Ingest(format!("mask entry ({r},{c}) out of range")));
        }
        let expected = match &data.feature(c).kind {
            FeatureKind::Continuous => record[2].parse::<f64>().ok().map(Cell::Num),
            FeatureKind::Categorical(cats) => cats
                .iter()
                .position(|label| label == &record[2])
                .map(|i| Cell::Cat(i as u32)),
        };
        if expected.is_none() || data.cell(r, c) != expected {
            return Err(Error::Ingest(format!(
                "stored value '{}' at ({r},{c}) does not match the dataset",
                &record[2]
            )));
        }
        mask.set(r, c);
    }
    Ok(mask)
}
