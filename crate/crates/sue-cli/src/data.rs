//! CSV ingestion and the two vendored reproduction datasets.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use sue_core::regression::CountDataset;

const FERTILITY_CSV: &str = include_str!("../../../data/fertility.csv");
const TAKEOVER_BIDS_CSV: &str = include_str!("../../../data/takeover_bids.csv");

/// Which columns of a CSV file form the regression dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSchema {
    pub response_column: String,
    pub covariate_columns: Vec<String>,
    pub exposure: f64,
}

impl DatasetSchema {
    pub fn validate(&self) -> Result<()> {
        if self.covariate_columns.iter().any(|c| c == &self.response_column) {
            bail!("response column '{}' also listed as a covariate", self.response_column);
        }
        Ok(())
    }
}

/// A bundled dataset: its CSV text and default schema.
pub struct BundledDataset {
    pub name: &'static str,
    pub csv: &'static str,
    pub response: &'static str,
    pub covariates: &'static [&'static str],
}

pub const BUNDLED: &[BundledDataset] = &[
    BundledDataset {
        name: "fertility",
        csv: FERTILITY_CSV,
        response: "children",
        covariates: &[
            "german",
            "years_school",
            "voc_train",
            "university",
            "catholic",
            "protestant",
            "muslim",
            "rural",
            "year_birth",
            "age_marriage",
        ],
    },
    BundledDataset {
        name: "takeover_bids",
        csv: TAKEOVER_BIDS_CSV,
        response: "numbids",
        covariates: &[
            "leglrest",
            "rearest",
            "finrest",
            "whtknght",
            "bidprem",
            "insthold",
            "size",
            "sizesq",
            "regulatn",
        ],
    },
];

/// Looks up a bundled dataset by name (a few aliases accepted).
pub fn bundled(name: &str) -> Option<&'static BundledDataset> {
    let key = name.trim_end_matches(".csv");
    BUNDLED.iter().find(|d| {
        d.name == key || (d.name == "takeover_bids" && (key == "bids" || key == "takeover-bids"))
    })
}

/// Parses CSV text under a schema. Cell problems are reported with 1-based
/// data row numbers and column names; empty cells are errors, not NAs.
pub fn parse_csv(text: &str, schema: &DatasetSchema) -> Result<CountDataset> {
    schema.validate()?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .context("reading CSV header")?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    let col_index = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| anyhow!("column '{name}' not found in CSV header ({})", headers.join(", ")))
    };
    let response_idx = col_index(&schema.response_column)?;
    let covariate_idx: Vec<usize> = schema
        .covariate_columns
        .iter()
        .map(|c| col_index(c))
        .collect::<Result<_>>()?;

    let mut counts = Vec::new();
    let mut x = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.with_context(|| format!("row {row}: malformed CSV record"))?;
        let cell = |idx: usize, name: &str| -> Result<&str> {
            let v = record
                .get(idx)
                .ok_or_else(|| anyhow!("row {row} column '{name}': missing field"))?
                .trim();
            if v.is_empty() {
                bail!("row {row} column '{name}': empty value");
            }
            Ok(v)
        };
        let resp = cell(response_idx, &schema.response_column)?;
        let count: u64 = resp.parse().map_err(|_| {
            anyhow!(
                "row {row} column '{}': '{resp}' is not a non-negative integer",
                schema.response_column
            )
        })?;
        counts.push(count);
        for (idx, name) in covariate_idx.iter().zip(&schema.covariate_columns) {
            let raw = cell(*idx, name)?;
            let value: f64 = raw
                .parse()
                .map_err(|_| anyhow!("row {row} column '{name}': '{raw}' is not a number"))?;
            if !value.is_finite() {
                bail!("row {row} column '{name}': non-finite value");
            }
            x.push(value);
        }
    }
    if counts.is_empty() {
        bail!("dataset is empty (no data rows after the header)");
    }
    CountDataset::new(counts, x, schema.covariate_columns.clone(), schema.exposure)
        .map_err(|e| anyhow!("invalid dataset: {e}"))
}

/// Loads a dataset: `source` is either a bundled dataset name or a CSV path.
/// `response`/`covariates` override the schema; for external files `response`
/// is required and covariates default to every other column.
pub fn load_dataset(
    source: &str,
    response: Option<&str>,
    covariates: Option<&[String]>,
    exposure: f64,
) -> Result<CountDataset> {
    if let Some(b) = bundled(source) {
        let default_cov: Vec<String> = b.covariates.iter().map(|s| s.to_string()).collect();
        let schema = DatasetSchema {
            response_column: response.unwrap_or(b.response).to_string(),
            covariate_columns: covariates.map(<[String]>::to_vec).unwrap_or(default_cov),
            exposure,
        };
        return parse_csv(b.csv, &schema);
    }
    let path = Path::new(source);
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading '{source}' (not a bundled dataset name either)"))?;
    let response = response
        .ok_or_else(|| anyhow!("--response is required for non-bundled data files"))?;
    let covariate_columns = match covariates {
        Some(c) => c.to_vec(),
        None => {
            // Everything except the response, in file order.
            let mut reader =
                csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
            reader
                .headers()
                .context("reading CSV header")?
                .iter()
                .map(|h| h.trim().to_string())
                .filter(|h| h != response)
                .collect()
        }
    };
    let schema = DatasetSchema {
        response_column: response.to_string(),
        covariate_columns,
        exposure,
    };
    parse_csv(&text, &schema)
}

/// Serializes a dataset back to CSV text so that
/// `parse_csv(write_csv(ds)) == ds` exactly (shortest-round-trip floats).
pub fn write_csv(dataset: &CountDataset, response_column: &str) -> String {
    let mut out = String::new();
    out.push_str(response_column);
    for name in dataset.covariate_names() {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for j in 0..dataset.n_obs() {
        let _ = write!(out, "{}", dataset.counts()[j]);
        for v in dataset.row(j) {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}
