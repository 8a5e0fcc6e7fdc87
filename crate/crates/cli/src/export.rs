//! Frame sink that writes point clouds to a directory.
//!
//! `csv` and `pcd` write one file per frame (`detections_000000.csv`,
//! `objects_000000.csv`, ...); `jsonl` appends one line per frame to
//! `detections.jsonl`, `objects.jsonl` and `status.jsonl`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use ars548::cloud::{detections_to_cloud, objects_to_cloud, write_csv_file, write_json_cloud, write_pcd_file, PointCloud};
use ars548::filter::{filter_objects, ObjectPredicate};
use ars548::FramePayload;

use crate::args::ExportFormat;

struct Jsonl {
    detections: BufWriter<File>,
    objects: BufWriter<File>,
    status: BufWriter<File>,
}

pub struct Exporter {
    format: ExportFormat,
    dir: PathBuf,
    jsonl: Option<Jsonl>,
    pub detection_frames: u64,
    pub object_frames: u64,
    pub status_frames: u64,
}

fn create(path: PathBuf) -> Result<BufWriter<File>> {
    let f = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

impl Exporter {
    pub fn new(format: ExportFormat, dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        let jsonl = match format {
            ExportFormat::Jsonl => Some(Jsonl {
                detections: create(dir.join("detections.jsonl"))?,
                objects: create(dir.join("objects.jsonl"))?,
                status: create(dir.join("status.jsonl"))?,
            }),
            _ => None,
        };
        Ok(Exporter { format, dir: dir.to_path_buf(), jsonl, detection_frames: 0, object_frames: 0, status_frames: 0 })
    }

    fn write_cloud(&self, prefix: &str, index: u64, cloud: &PointCloud) -> Result<()> {
        match self.format {
            ExportFormat::Csv => write_csv_file(cloud, &self.dir.join(format!("{prefix}_{index:06}.csv")))?,
            ExportFormat::Pcd => write_pcd_file(cloud, &self.dir.join(format!("{prefix}_{index:06}.pcd")))?,
            ExportFormat::Jsonl => unreachable!("jsonl clouds are appended"),
        }
        Ok(())
    }

    /// Writes one decoded frame; object lists pass through `filter` first.
    pub fn write(&mut self, payload: &FramePayload, filter: Option<&ObjectPredicate>) -> Result<()> {
        match payload {
            FramePayload::Detections(list) => {
                let cloud = detections_to_cloud(list);
                match &mut self.jsonl {
                    Some(j) => {
                        write_json_cloud(&cloud, &mut j.detections)?;
                        writeln!(j.detections)?;
                    }
                    None => self.write_cloud("detections", self.detection_frames, &cloud)?,
                }
                self.detection_frames += 1;
            }
            FramePayload::Objects(list) => {
                let cloud = match filter {
                    Some(p) => objects_to_cloud(&filter_objects(list, p)),
                    None => objects_to_cloud(list),
                };
                match &mut self.jsonl {
                    Some(j) => {
                        write_json_cloud(&cloud, &mut j.objects)?;
                        writeln!(j.objects)?;
                    }
                    None => self.write_cloud("objects", self.object_frames, &cloud)?,
                }
                self.object_frames += 1;
            }
            FramePayload::Status(status) => {
                // Point-cloud formats have nothing to say about status.
                if let Some(j) = &mut self.jsonl {
                    serde_json::to_writer(&mut j.status, status)?;
                    writeln!(j.status)?;
                }
                self.status_frames += 1;
            }
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        if let Some(j) = &mut self.jsonl {
            j.detections.flush()?;
            j.objects.flush()?;
            j.status.flush()?;
        }
        Ok(())
    }
}
