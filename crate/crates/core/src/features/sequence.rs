use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::manifest::{lookup_extractor, Extractor, FeatureManifest, PacketContext};
use super::FeatureError;
use crate::capture::SessionRecord;
use crate::exec::{map_ordered, Execution};
use crate::nncore::Tensor2;

/// Fixed-shape `T × F` session fingerprint with its class label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMatrix {
    pub values: Tensor2,
    pub label: usize,
    pub device_name: String,
    pub session_id: String,
}

impl SessionMatrix {
    pub fn seq_len(&self) -> usize {
        self.values.rows()
    }

    pub fn feature_count(&self) -> usize {
        self.values.cols()
    }

    /// Rows before the trailing all-zero padding.
    pub fn valid_rows(&self) -> usize {
        let mut n = self.values.rows();
        while n > 0 && self.values.row(n - 1).iter().all(|&v| v == 0.0) {
            n -= 1;
        }
        n
    }
}

/// Bijection between device names and class ids `0..C`. Codecs built from
/// names assign ids in sorted name order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCodec {
    names: Vec<String>,
}

impl LabelCodec {
    pub fn from_names<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = names.into_iter().map(Into::into).collect();
        Self {
            names: set.into_iter().collect(),
        }
    }

    /// Recover the codec stored implicitly in a labeled dataset. Ids must be
    /// contiguous from 0 and each id must map to one name.
    pub fn from_dataset(data: &[SessionMatrix]) -> Result<Self, FeatureError> {
        let classes = data.iter().map(|m| m.label + 1).max().unwrap_or(0);
        let mut names: Vec<Option<&str>> = vec![None; classes];
        for m in data {
            match names[m.label] {
                None => names[m.label] = Some(&m.device_name),
                Some(n) if n == m.device_name => {}
                Some(n) => {
                    return Err(FeatureError::InvalidLabels(format!(
                        "class {} names both {n:?} and {:?}",
                        m.label, m.device_name
                    )))
                }
            }
        }
        let names = names
            .into_iter()
            .enumerate()
            .map(|(id, n)| {
                n.map(str::to_string)
                    .ok_or_else(|| FeatureError::InvalidLabels(format!("class id {id} has no sessions")))
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { names })
    }

    pub fn class_count(&self) -> usize {
        self.names.len()
    }

    pub fn encode(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn decode(&self, id: usize) -> Option<&str> {
        self.names.get(id).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// One `F`-vector per packet in the session. Absent fields take the
/// manifest default; the first packet's inter-arrival time is 0.
pub fn extract_features(session: &SessionRecord, manifest: &FeatureManifest) -> Result<Vec<Vec<f64>>, FeatureError> {
    let extractors: Vec<(Extractor, f64)> = manifest
        .features
        .iter()
        .map(|f| {
            lookup_extractor(&f.extractor)
                .map(|e| (e, f.default))
                .ok_or_else(|| FeatureError::UnknownExtractor(f.extractor.clone()))
        })
        .collect::<Result<_, _>>()?;

    Ok(session
        .packets
        .iter()
        .enumerate()
        .map(|(i, packet)| {
            let ctx = PacketContext {
                packet,
                prev: i.checked_sub(1).map(|j| &session.packets[j]),
            };
            extractors
                .iter()
                .map(|(ex, default)| ex(&ctx).filter(|v| v.is_finite()).unwrap_or(*default))
                .collect()
        })
        .collect())
}

/// Keep the first `seq_len` vectors, appending all-zero rows when the
/// session is shorter.
pub fn build_sequence(vectors: &[Vec<f64>], seq_len: usize) -> Result<Tensor2, FeatureError> {
    let first = vectors.first().ok_or(FeatureError::EmptySession)?;
    let width = first.len();
    if let Some(bad) = vectors.iter().find(|v| v.len() != width) {
        return Err(FeatureError::RaggedVectors {
            expected: width,
            got: bad.len(),
        });
    }
    let mut out = Tensor2::zeros(seq_len, width);
    for (t, v) in vectors.iter().take(seq_len).enumerate() {
        out.row_mut(t).copy_from_slice(v);
    }
    Ok(out)
}

/// Extract every session into a labeled matrix. Class ids come from the
/// sorted set of device labels.
pub fn build_dataset(
    sessions: &[SessionRecord],
    manifest: &FeatureManifest,
    exec: Execution,
) -> Result<(Vec<SessionMatrix>, LabelCodec), FeatureError> {
    manifest.validate()?;
    let codec = LabelCodec::from_names(sessions.iter().map(|s| s.device_label.clone()));
    let matrices = map_ordered(exec, sessions, |s| -> Result<SessionMatrix, FeatureError> {
        let vectors = extract_features(s, manifest)?;
        Ok(SessionMatrix {
            values: build_sequence(&vectors, manifest.seq_len)?,
            label: codec.encode(&s.device_label).expect("label in codec"),
            device_name: s.device_label.clone(),
            session_id: s.session_id.clone(),
        })
    });
    Ok((matrices.into_iter().collect::<Result<_, _>>()?, codec))
}
