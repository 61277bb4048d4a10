//! Feature store file: line 1 is a JSON header, every following line is
//! `{"tweet_id": .., "mask": [t, i, s], "fusion": [..]}`. Social blocks are
//! stored raw (before normalization) because the normalizer depends on the
//! training split chosen at evaluation time.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FeatureBundle, FeatureError, FusionDims, Modality, ModalityMask};

pub const FEATURE_STORE_VERSION: u32 = 1;
const FORMAT_TAG: &str = "misinfo-features";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStoreHeader {
    pub format: String,
    pub version: u32,
    pub social_schema_version: u32,
    pub dims: FusionDims,
    pub text_encoder: String,
    pub image_encoder: String,
}

impl FeatureStoreHeader {
    pub fn new(social_schema_version: u32, dims: FusionDims, text_encoder: &str, image_encoder: &str) -> Self {
        Self {
            format: FORMAT_TAG.into(),
            version: FEATURE_STORE_VERSION,
            social_schema_version,
            dims,
            text_encoder: text_encoder.into(),
            image_encoder: image_encoder.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoredFeatures {
    pub header: FeatureStoreHeader,
    pub bundles: Vec<FeatureBundle>,
}

#[derive(Serialize, Deserialize)]
struct Row {
    tweet_id: String,
    mask: [bool; 3],
    fusion: Vec<f64>,
}

pub fn write_feature_store(path: &Path, header: &FeatureStoreHeader, bundles: &[FeatureBundle]) -> Result<(), FeatureError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    let json = |e: serde_json::Error| FeatureError::Store(e.to_string());
    serde_json::to_writer(&mut w, header).map_err(json)?;
    w.write_all(b"\n")?;
    for b in bundles {
        if b.fusion_vec.len() != header.dims.total() {
            return Err(FeatureError::Store(format!("{}: fusion length {} != {}", b.tweet_id, b.fusion_vec.len(), header.dims.total())));
        }
        let row = Row { tweet_id: b.tweet_id.clone(), mask: b.modality_mask.0, fusion: b.fusion_vec.clone() };
        serde_json::to_writer(&mut w, &row).map_err(json)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_feature_store(path: &Path) -> Result<StoredFeatures, FeatureError> {
    let mut lines = BufReader::new(fs::File::open(path)?).lines();
    let first = lines.next().ok_or_else(|| FeatureError::Store("empty feature store".into()))??;
    let header: FeatureStoreHeader = serde_json::from_str(&first).map_err(|e| FeatureError::Store(format!("header: {e}")))?;
    if header.format != FORMAT_TAG || header.version > FEATURE_STORE_VERSION {
        return Err(FeatureError::Store(format!("unsupported store {} v{}", header.format, header.version)));
    }
    let dims = header.dims;
    let mut bundles = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Row = serde_json::from_str(&line).map_err(|e| FeatureError::Store(format!("line {}: {e}", i + 2)))?;
        if row.fusion.len() != dims.total() {
            return Err(FeatureError::Store(format!("line {}: fusion length {}", i + 2, row.fusion.len())));
        }
        let mask = ModalityMask(row.mask);
        let block = |m: Modality| mask.has(m).then(|| row.fusion[dims.block(m)].to_vec());
        bundles.push(FeatureBundle {
            tweet_id: row.tweet_id.clone(),
            text_vec: block(Modality::Text),
            image_vec: block(Modality::Image),
            social_vec: block(Modality::Social),
            modality_mask: mask,
            fusion_vec: row.fusion,
        });
    }
    Ok(StoredFeatures { header, bundles })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::assemble_fusion;

    #[test]
    fn round_trip() {
        let dims = FusionDims { text: 3, image: 2, social: 2 };
        let bundles = vec![
            assemble_fusion("a", Some(vec![0.1, -0.2, 1e-17]), None, Some(vec![5.0, 1.0]), dims).unwrap(),
            assemble_fusion("b", Some(vec![1.0 / 3.0, 0.0, 2.0]), Some(vec![0.5, 0.25]), Some(vec![0.0, 0.0]), dims).unwrap(),
        ];
        let header = FeatureStoreHeader::new(1, dims, "hash-text", "histogram");
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.jsonl");
        write_feature_store(&p, &header, &bundles).unwrap();
        let back = read_feature_store(&p).unwrap();
        assert_eq!(back.header, header);
        assert_eq!(back.bundles, bundles);
    }

    #[test]
    fn rejects_foreign_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.jsonl");
        fs::write(&p, "{\"format\":\"other\",\"version\":1,\"social_schema_version\":1,\"dims\":{\"text\":1,\"image\":1,\"social\":1},\"text_encoder\":\"a\",\"image_encoder\":\"b\"}\n").unwrap();
        assert!(matches!(read_feature_store(&p), Err(FeatureError::Store(_))));
    }
}
