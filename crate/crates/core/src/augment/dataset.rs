//! JSON-lines dataset files: one header record with the capture config,
//! then one record per demonstration.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::render::{PointCloud, SensorConfig};
use super::{AugmentError, Demonstration, FeatureGrid, Pose};

pub const DATASET_SCHEMA_VERSION: u32 = 1;

/// Clouds are stored rounded to this resolution; micrometers are far below
/// anything the grid featurizer or the labels can see.
const CLOUD_RESOLUTION: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub schema_version: u32,
    pub sensor: SensorConfig,
    pub grid: FeatureGrid,
    pub horizon: usize,
    pub waypoint_dim: usize,
}

/// One stored demonstration; the cloud is flattened x0,y0,z0,x1,…
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub pose: Pose,
    pub cloud: Vec<f64>,
    pub waypoints: Vec<[f64; 2]>,
    pub augmented: bool,
}

impl DatasetRecord {
    pub fn from_demo(demo: &Demonstration, augmented: bool) -> Self {
        let mut cloud = Vec::with_capacity(demo.cloud.points.len() * 3);
        for p in &demo.cloud.points {
            for &c in p {
                cloud.push((c / CLOUD_RESOLUTION).round() * CLOUD_RESOLUTION);
            }
        }
        Self {
            pose: demo.pose,
            cloud,
            waypoints: demo.waypoints.clone(),
            augmented,
        }
    }

    pub fn to_demo(&self) -> Result<Demonstration, AugmentError> {
        if self.cloud.len() % 3 != 0 {
            return Err(AugmentError::Format(
                "flattened cloud length not divisible by 3".into(),
            ));
        }
        let points = self
            .cloud
            .chunks_exact(3)
            .map(|c| [c[0], c[1], c[2]])
            .collect();
        Ok(Demonstration {
            pose: self.pose,
            cloud: PointCloud { points },
            waypoints: self.waypoints.clone(),
        })
    }
}

pub fn write_dataset(
    path: &Path,
    header: &DatasetHeader,
    records: &[DatasetRecord],
) -> Result<(), AugmentError> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut out, header)?;
    out.write_all(b"\n")?;
    for rec in records {
        serde_json::to_writer(&mut out, rec)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<(DatasetHeader, Vec<DatasetRecord>), AugmentError> {
    let mut lines = BufReader::new(File::open(path)?).lines();
    let header_line = lines
        .next()
        .ok_or_else(|| AugmentError::Format("empty dataset file".into()))??;
    let header: DatasetHeader = serde_json::from_str(&header_line)?;
    if header.schema_version != DATASET_SCHEMA_VERSION {
        return Err(AugmentError::Format(format!(
            "dataset schema {} unsupported (expected {})",
            header.schema_version, DATASET_SCHEMA_VERSION
        )));
    }
    let mut records = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line)?);
    }
    Ok((header, records))
}
