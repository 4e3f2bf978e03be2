//! Self-describing key-value files for models, cluster summaries and
//! configs.
//!
//! Every file is TOML with a `[header]` table naming the content kind and
//! format version, followed by a `[body]` table. Floats are written in
//! shortest round-trip form, so a load returns bit-identical values.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::crbm::RbmModel;
use crate::fuzzy::FuzzyModel;
use crate::probcluster::ClusterSummary;
use crate::{Error, Result};

pub const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    kind: String,
    version: u32,
}

#[derive(Serialize)]
struct EnvelopeOut<'a, T> {
    header: Header,
    body: &'a T,
}

#[derive(Deserialize)]
struct EnvelopeIn<T> {
    header: Header,
    body: T,
}

/// Serialize `value` under `kind`.
pub fn to_string<T: Serialize>(kind: &str, value: &T) -> Result<String> {
    let env = EnvelopeOut { header: Header { kind: kind.into(), version: VERSION }, body: value };
    toml::to_string(&env).map_err(|e| Error::Numerical(format!("cannot serialize {kind}: {e}")))
}

/// Parse text written by [`to_string`], checking kind and version. `origin`
/// names the source in error messages.
pub fn from_str<T: DeserializeOwned>(kind: &str, text: &str, origin: &Path) -> Result<T> {
    let fail = |msg: String| Error::Format { path: origin.into(), msg };
    let env: EnvelopeIn<T> = toml::from_str(text).map_err(|e| fail(e.to_string()))?;
    if env.header.kind != kind {
        return Err(fail(format!("expected a `{kind}` file, found `{}`", env.header.kind)));
    }
    if env.header.version != VERSION {
        return Err(fail(format!("unsupported format version {}", env.header.version)));
    }
    Ok(env.body)
}

pub fn save<T: Serialize>(path: impl AsRef<Path>, kind: &str, value: &T) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_string(kind, value)?).map_err(|e| Error::io(path, e))
}

pub fn load<T: DeserializeOwned>(path: impl AsRef<Path>, kind: &str) -> Result<T> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_str(kind, &text, path)
}

pub const RBM: &str = "rbm";
pub const CLUSTERS: &str = "clusters";
pub const FUZZY: &str = "fuzzy";

pub fn save_rbm(path: impl AsRef<Path>, model: &RbmModel) -> Result<()> {
    save(path, RBM, model)
}

pub fn load_rbm(path: impl AsRef<Path>) -> Result<RbmModel> {
    let path = path.as_ref();
    let model: RbmModel = load(path, RBM)?;
    model.validate().map_err(|e| Error::Format { path: path.into(), msg: e.to_string() })?;
    Ok(model)
}

pub fn save_clusters(path: impl AsRef<Path>, summary: &ClusterSummary) -> Result<()> {
    save(path, CLUSTERS, summary)
}

pub fn load_clusters(path: impl AsRef<Path>) -> Result<ClusterSummary> {
    let path = path.as_ref();
    let s: ClusterSummary = load(path, CLUSTERS)?;
    let m = s.centers.first().map_or(0, Vec::len);
    if s.counts.len() != s.centers.len() || s.centers.iter().any(|c| c.len() != m) {
        return Err(Error::Format { path: path.into(), msg: "ragged cluster summary".into() });
    }
    Ok(s)
}

pub fn save_fuzzy(path: impl AsRef<Path>, model: &FuzzyModel) -> Result<()> {
    save(path, FUZZY, model)
}

pub fn load_fuzzy(path: impl AsRef<Path>) -> Result<FuzzyModel> {
    let path = path.as_ref();
    let model: FuzzyModel = load(path, FUZZY)?;
    model.validate().map_err(|e| Error::Format { path: path.into(), msg: e.to_string() })?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_roundtrip_bit_exact() {
        let awkward = vec![0.1, 1.0 / 3.0, -2.5e-300, 1e300, f64::MIN_POSITIVE, 123456789.12345679, 0.0];
        let text = to_string("floats", &awkward).unwrap();
        let back: Vec<f64> = from_str("floats", &text, Path::new("mem")).unwrap();
        assert_eq!(awkward.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), back.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn wrong_kind_rejected() {
        let text = to_string("a", &vec![1.0]).unwrap();
        assert!(matches!(from_str::<Vec<f64>>("b", &text, Path::new("mem")), Err(Error::Format { .. })));
    }
}
