//! Synthetic classification datasets with known structure.
//!
//! Rows are Gaussian clusters centered on hypercube vertices scaled by the
//! class separation, one or more clusters per class. The informative block
//! is passed through a random linear mixing; repeated features are exact
//! copies of randomly chosen earlier columns; leftover features are
//! standard-normal noise; the target is the class label. The nine-dataset
//! suite regenerates bit-identically from a master seed: every random draw
//! comes from one counter-based stream per dataset, in a fixed order
//! (label shuffle, informative noise, mixing matrix, noise block, repeat
//! sources).

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::derive_seed;
use crate::tabular::{write_csv, Cell, Dataset, FeatureSchema};

/// Bin count used when a feature mix asks for categorical columns.
pub const DEFAULT_BINS: usize = 4;

const SUITE_CONFIG: &str = include_str!("../config/synthetic_suite.toml");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureMix {
    Continuous,
    Categorical,
    Mixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub name: String,
    pub n_samples: usize,
    pub n_features: usize,
    pub n_informative: usize,
    pub n_repeated: usize,
    pub n_clusters_per_class: usize,
    pub class_sep: f64,
    pub n_classes: usize,
    pub feature_mix: FeatureMix,
    #[serde(default)]
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let centroids = self.n_classes * self.n_clusters_per_class;
        if self.name.is_empty() {
            return Err(Error::Config("synthetic spec needs a name".into()));
        }
        if self.n_classes < 2 || self.n_clusters_per_class < 1 {
            return Err(Error::Config(format!(
                "{}: need at least 2 classes and 1 cluster per class",
                self.name
            )));
        }
        if self.n_informative < 1 || self.n_informative + self.n_repeated > self.n_features {
            return Err(Error::Config(format!(
                "{}: informative ({}) + repeated ({}) must fit in {} features",
                self.name, self.n_informative, self.n_repeated, self.n_features
            )));
        }
        if self.n_samples < centroids {
            return Err(Error::Config(format!(
                "{}: {} samples cannot cover {} cluster centroids",
                self.name, self.n_samples, centroids
            )));
        }
        // Each centroid sits on its own hypercube vertex.
        if self.n_informative < usize::BITS as usize
            && centroids > (1usize << self.n_informative)
        {
            return Err(Error::Config(format!(
                "{}: {} centroids need more than {} informative dimensions",
                self.name, centroids, self.n_informative
            )));
        }
        if !(self.class_sep.is_finite() && self.class_sep > 0.0) {
            return Err(Error::Config(format!("{}: class_sep must be positive", self.name)));
        }
        Ok(())
    }
}

pub fn generate_classification(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n_samples;
    let k = spec.n_informative;
    let n_noise = spec.n_features - k - spec.n_repeated;

    let mut labels: Vec<u32> = (0..n).map(|i| (i % spec.n_classes) as u32).collect();
    labels.shuffle(&mut rng);
    let mut cluster_cursor = vec![0usize; spec.n_classes];
    let centroid_of: Vec<usize> = labels
        .iter()
        .map(|&class| {
            let cluster = cluster_cursor[class as usize] % spec.n_clusters_per_class;
            cluster_cursor[class as usize] += 1;
            class as usize * spec.n_clusters_per_class + cluster
        })
        .collect();

    let mut informative = DMatrix::zeros(n, k);
    for r in 0..n {
        let m = centroid_of[r];
        for j in 0..k {
            let sign = if (m >> j) & 1 == 1 { 1.0 } else { -1.0 };
            let noise: f64 = rng.sample(StandardNormal);
            informative[(r, j)] = sign * spec.class_sep + noise;
        }
    }
    let mixing = DMatrix::from_fn(k, k, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mixed = informative * mixing;

    let mut columns: Vec<Vec<f64>> = (0..k).map(|j| mixed.column(j).iter().copied().collect()).collect();
    for _ in 0..n_noise {
        columns.push((0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect());
    }
    for _ in 0..spec.n_repeated {
        let source = rng.random_range(0..columns.len());
        columns.push(columns[source].clone());
    }

    let mut schema: Vec<FeatureSchema> = (0..spec.n_features)
        .map(|j| FeatureSchema::continuous(format!("f{j}")))
        .collect();
    schema.push(
        FeatureSchema::categorical(
            "label",
            (0..spec.n_classes).map(|c| format!("class_{c}")).collect(),
        )
        .into_target(),
    );
    let rows: Vec<Vec<Option<Cell>>> = (0..n)
        .map(|r| {
            let mut row: Vec<Option<Cell>> =
                columns.iter().map(|col| Some(Cell::Num(col[r]))).collect();
            row.push(Some(Cell::Cat(labels[r])));
            row
        })
        .collect();
    let data = Dataset::from_rows(&spec.name, schema, rows)?;

    let to_bin: Vec<usize> = match spec.feature_mix {
        FeatureMix::Continuous => Vec::new(),
        FeatureMix::Categorical => (0..spec.n_features).collect(),
        FeatureMix::Mixed => (0..spec.n_features).step_by(2).collect(),
    };
    if to_bin.is_empty() {
        return Ok(data);
    }
    let (binned, _) = discretize_to_categorical(&data, &to_bin, DEFAULT_BINS)?;
    Ok(binned)
}

/// What equal-frequency binning actually did to one column; `used_bins`
/// drops below the request when the column has too few distinct values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiscretizationNote {
    pub column: usize,
    pub requested_bins: usize,
    pub used_bins: usize,
}

impl DiscretizationNote {
    pub fn reduced(&self) -> bool {
        self.used_bins < self.requested_bins
    }
}

/// Equal-frequency binning of continuous columns into ordered labeled
/// categories ("bin_0" lowest). Ties never straddle a bin boundary, so
/// counts can deviate from n/bins only through ties; missing cells stay
/// missing.
pub fn discretize_to_categorical(
    data: &Dataset,
    columns: &[usize],
    n_bins: usize,
) -> Result<(Dataset, Vec<DiscretizationNote>)> {
    if n_bins < 2 {
        return Err(Error::Config("discretization needs at least 2 bins".into()));
    }
    for &c in columns {
        if c >= data.n_cols() {
            return Err(Error::Config(format!("column {c} out of range")));
        }
        if data.feature(c).is_categorical() {
            return Err(Error::Config(format!(
                "column {c} ({}) is already categorical",
                data.feature(c).name
            )));
        }
    }

    let mut schema = data.schema().to_vec();
    let mut rows: Vec<Vec<Option<Cell>>> = (0..data.n_rows())
        .map(|r| (0..data.n_cols()).map(|c| data.cell(r, c)).collect())
        .collect();
    let mut notes = Vec::with_capacity(columns.len());

    for &c in columns {
        let mut observed: Vec<(f64, usize)> = (0..data.n_rows())
            .filter_map(|r| data.cell(r, c).and_then(|cell| cell.as_num()).map(|v| (v, r)))
            .collect();
        if observed.is_empty() {
            return Err(Error::Config(format!("column {c} has no observed values to bin")));
        }
        observed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let n = observed.len();

        let mut raw_bin = vec![0usize; n];
        for i in 0..n {
            raw_bin[i] = if i > 0 && observed[i].0 == observed[i - 1].0 {
                raw_bin[i - 1]
            } else {
                i * n_bins / n
            };
        }
        // Renumber so bins are consecutive even when ties swallowed one.
        let mut used: Vec<usize> = raw_bin.clone();
        used.dedup();
        let remap = |b: usize| used.iter().position(|&u| u == b).unwrap() as u32;

        let labels: Vec<String> = (0..used.len()).map(|b| format!("bin_{b}")).collect();
        for (i, &(_, r)) in observed.iter().enumerate() {
            rows[r][c] = Some(Cell::Cat(remap(raw_bin[i])));
        }
        let was_target = schema[c].is_target;
        schema[c] = FeatureSchema::categorical(schema[c].name.clone(), labels);
        if was_target {
            schema[c] = schema[c].clone().into_target();
        }
        notes.push(DiscretizationNote { column: c, requested_bins: n_bins, used_bins: used.len() });
    }
    let binned = Dataset::from_rows(data.name(), schema, rows)?;
    Ok((binned, notes))
}

fn suite_template() -> Result<Vec<SynthSpec>> {
    #[derive(Deserialize)]
    struct SuiteFile {
        dataset: Vec<SynthSpec>,
    }
    let file: SuiteFile = toml::from_str(SUITE_CONFIG)?;
    Ok(file.dataset)
}

/// The nine dataset specs with per-dataset seeds derived from the master
/// seed, in a fixed suite order.
pub fn suite_specs(master_seed: u64) -> Result<Vec<SynthSpec>> {
    let mut specs = suite_template()?;
    for spec in &mut specs {
        spec.seed = derive_seed(master_seed, &["synth", &spec.name]);
    }
    Ok(specs)
}

pub fn table1_suite(master_seed: u64) -> Result<Vec<Dataset>> {
    suite_specs(master_seed)?.iter().map(generate_classification).collect()
}

#[derive(Serialize)]
struct ManifestEntry<'a> {
    spec: &'a SynthSpec,
    rows: usize,
    features: usize,
    file: String,
}

/// Writes the suite as one CSV per dataset plus `manifest.json` recording
/// the master seed and every spec. Returns the written paths.
pub fn export_suite(master_seed: u64, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::from(e).with_path(dir))?;
    let specs = suite_specs(master_seed)?;
    let mut paths = Vec::new();
    let mut entries = Vec::new();
    let datasets: Vec<Dataset> = specs.iter().map(generate_classification).collect::<Result<_>>()?;
    for (spec, data) in specs.iter().zip(&datasets) {
        let file = format!("{}.csv", spec.name);
        let path = dir.join(&file);
        let out = std::fs::File::create(&path).map_err(|e| Error::from(e).with_path(&path))?;
        write_csv(data, out)?;
        entries.push(ManifestEntry {
            spec,
            rows: data.n_rows(),
            features: data.feature_cols().len(),
            file,
        });
        paths.push(path);
    }
    let manifest = dir.join("manifest.json");
    let body = serde_json::json!({
        "master_seed": master_seed,
        "datasets": entries,
    });
    std::fs::write(&manifest, format!("{:#}\n", body))
        .map_err(|e| Error::from(e).with_path(&manifest))?;
    paths.push(manifest);
    Ok(paths)
}
