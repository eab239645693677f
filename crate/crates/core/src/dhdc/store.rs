//! Dataset directories: `manifest.txt`, `frames/NNNNNN.rdf`,
//! `labels/NNNNNN.csv`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::format::{read_frame_file, write_frame_file, RdfFrame};
use super::{frame_stream, Dataset, DhdcParams, LabeledFrame, TargetTruth};
use crate::error::{Error, Result};
use crate::signal::{RadarConfig, TargetSpec};

pub const MANIFEST_FORMAT: &str = "hdrlab-dataset/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Eval,
}

impl Split {
    pub fn code(self) -> u8 {
        match self {
            Split::Train => 1,
            Split::Val => 2,
            Split::Eval => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameEntry {
    pub index: usize,
    pub split: Split,
    pub stream_id: u64,
    pub file: String,
    pub labels: String,
}

/// Everything needed to regenerate a dataset bit for bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub format: String,
    pub radar: RadarConfig,
    pub dhdc: DhdcParams,
    #[serde(default)]
    pub notes: BTreeMap<String, String>,
    pub frames: Vec<FrameEntry>,
}

impl DatasetManifest {
    /// Frame index for the train and validation splits of `p`.
    pub fn plan(cfg: &RadarConfig, p: &DhdcParams) -> Self {
        let mut frames = Vec::with_capacity(p.frames + p.val_frames);
        let splits = [(Split::Train, p.frames), (Split::Val, p.val_frames)];
        for (split, count) in splits {
            for i in 0..count {
                let index = frames.len();
                frames.push(FrameEntry {
                    index,
                    split,
                    stream_id: frame_stream(split, i),
                    file: format!("frames/{index:06}.rdf"),
                    labels: format!("labels/{index:06}.csv"),
                });
            }
        }
        Self {
            format: MANIFEST_FORMAT.to_string(),
            radar: cfg.clone(),
            dhdc: p.clone(),
            notes: BTreeMap::new(),
            frames,
        }
    }

    pub fn to_text(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("manifest serialization: {e}")))
    }

    pub fn from_text(text: &str, path: &Path) -> Result<Self> {
        let m: Self = toml::from_str(text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        if m.format != MANIFEST_FORMAT {
            return Err(Error::Format {
                path: path.to_path_buf(),
                reason: format!("unsupported manifest format {:?}", m.format),
            });
        }
        Ok(m)
    }
}

const LABEL_HEADER: [&str; 7] = [
    "range_m",
    "velocity_mps",
    "gamma_db",
    "amplitude",
    "is_strong",
    "range_bin",
    "doppler_bins",
];

pub fn write_labels(path: &Path, truth: &[TargetTruth]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(LABEL_HEADER).map_err(|e| csv_err(path, e))?;
    for t in truth {
        let bins: Vec<String> = t.peaks.doppler_bins.iter().map(|d| d.to_string()).collect();
        w.write_record([
            t.spec.range_m.to_string(),
            t.spec.velocity_mps.to_string(),
            t.spec.gamma_db.to_string(),
            t.spec.amplitude.re.to_string(),
            t.is_strong.to_string(),
            t.peaks.range_bin.to_string(),
            bins.join(";"),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

/// Read a label file, rebuilding peak predictions from `cfg` and checking
/// the stored bins against them (Doppler bins may sit one bin off, see
/// [`TargetTruth::snapped`]).
pub fn read_labels(path: &Path, cfg: &RadarConfig) -> Result<Vec<TargetTruth>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let bad = |what: &str| Error::Format {
        path: path.to_path_buf(),
        reason: format!("bad {what}"),
    };
    let headers = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if headers.iter().ne(LABEL_HEADER.iter().copied()) {
        return Err(bad("header"));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let num = |i: usize| rec[i].parse::<f64>().map_err(|_| bad(LABEL_HEADER[i]));
        let spec = TargetSpec::new(num(0)?, num(1)?, num(2)?).with_amplitude(Complex64::new(num(3)?, 0.0));
        let is_strong: bool = rec[4].parse().map_err(|_| bad("is_strong"))?;
        let range_bin: usize = rec[5].parse().map_err(|_| bad("range_bin"))?;
        let bins = rec[6]
            .split(';')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<usize>().map_err(|_| bad("doppler_bins")))
            .collect::<Result<Vec<_>>>()?;
        let mut peaks = crate::signal::predict_peaks(cfg, &spec);
        let rows = cfg.pulses;
        let near = |a: usize, b: usize| {
            let d = a.abs_diff(b);
            d.min(rows - d) <= 1
        };
        if peaks.range_bin != range_bin
            || peaks.doppler_bins.len() != bins.len()
            || peaks.doppler_bins.iter().zip(&bins).any(|(&a, &b)| !near(a, b))
        {
            return Err(bad("peak bins (inconsistent with radar config)"));
        }
        peaks.doppler_bins = bins;
        out.push(TargetTruth { spec, peaks, is_strong });
    }
    Ok(out)
}

fn mkdir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

pub fn write_dataset(ds: &Dataset, dir: &Path) -> Result<()> {
    if ds.frames.len() != ds.manifest.frames.len() {
        return Err(Error::Dimension("manifest and frame count differ".into()));
    }
    mkdir(&dir.join("frames"))?;
    mkdir(&dir.join("labels"))?;
    let text = ds.manifest.to_text()?;
    let mpath = dir.join("manifest.txt");
    fs::write(&mpath, text).map_err(|e| Error::io(&mpath, e))?;
    for (entry, frame) in ds.manifest.frames.iter().zip(&ds.frames) {
        let rdf = RdfFrame {
            frame: frame.rdm.clone(),
            mask: Some(frame.mask.clone()),
            mode: Some(frame.mode),
            index: entry.index as u32,
        };
        write_frame_file(&dir.join(&entry.file), &rdf)?;
        write_labels(&dir.join(&entry.labels), &frame.truth)?;
    }
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<DatasetManifest> {
    let mpath: PathBuf = dir.join("manifest.txt");
    let text = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    DatasetManifest::from_text(&text, &mpath)
}

pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let manifest = read_manifest(dir)?;
    let mut frames = Vec::with_capacity(manifest.frames.len());
    for entry in &manifest.frames {
        let path = dir.join(&entry.file);
        let rdf = read_frame_file(&path, entry.index)?;
        let mask = rdf.mask.ok_or_else(|| Error::Format {
            path: path.clone(),
            reason: "dataset frame without mask".into(),
        })?;
        let mode = rdf.mode.ok_or_else(|| Error::Format {
            path: path.clone(),
            reason: "dataset frame without mode tag".into(),
        })?;
        let truth = read_labels(&dir.join(&entry.labels), &manifest.radar)?;
        frames.push(LabeledFrame {
            rdm: rdf.frame,
            truth,
            mask,
            mode,
        });
    }
    Ok(Dataset { manifest, frames })
}
