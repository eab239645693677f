//! Mixed strong/weak dataset construction.
//!
//! Targets are drawn from a two-branch SNR law (strong targets above the
//! `w_db` threshold, non-strong below it), rendered through the signal
//! model and superimposed on white Gaussian noise. Each frame carries a
//! mask with every DDMA peak of every target.

mod format;
mod store;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{complex_gaussian_noise, ComplexFrame, DomainTag, Fft2d, SeededRng};
use crate::signal::{calibrate_with, is_hdr, predict_peaks, PeakPrediction, RadarConfig, TargetSpec};

pub use format::{read_frame_file, read_frame_bytes, write_frame_bytes, write_frame_file, RdfFrame, RDF_VERSION};
pub use store::{read_dataset, read_labels, read_manifest, write_dataset, write_labels, DatasetManifest, FrameEntry, Split, MANIFEST_FORMAT};

/// Which branch of the SNR mixture the probability `p_strong` weights.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchWeight {
    /// `p_strong` is the proportion of strong targets.
    #[default]
    StrongFraction,
    /// The mixture as typeset: `p_strong` multiplies the `gamma < w` branch.
    WeakFraction,
}

/// Training-data mode tag.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataMode {
    /// Strong and non-strong targets mixed.
    #[default]
    Mm,
    /// Non-strong targets only.
    Ntm,
}

impl DataMode {
    pub fn code(self) -> u8 {
        match self {
            DataMode::Mm => 0,
            DataMode::Ntm => 1,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(DataMode::Mm),
            1 => Some(DataMode::Ntm),
            _ => None,
        }
    }
}

/// Domain in which white noise is injected.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseDomain {
    #[default]
    Rdm,
    Ifs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DhdcParams {
    /// Probability of the strong branch.
    pub p_strong: f64,
    /// Strong / non-strong SNR threshold (dB).
    pub w_db: f64,
    pub gamma_min: f64,
    pub gamma_max: f64,
    /// Maximum target range (m).
    pub r_max: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub n_min: u32,
    pub n_max: u32,
    /// Training frames.
    pub frames: usize,
    /// Validation frames.
    pub val_frames: usize,
    pub seed: u64,
    pub branch_weight: BranchWeight,
    pub mode: DataMode,
    pub noise_domain: NoiseDomain,
    /// Noise power per RDM cell, `M N sigma2`.
    pub rdm_noise_power: f64,
}

impl Default for DhdcParams {
    fn default() -> Self {
        Self {
            p_strong: 0.7,
            w_db: 14.0,
            gamma_min: 6.0,
            gamma_max: 60.0,
            r_max: 150.0,
            v_min: -20.0,
            v_max: 20.0,
            n_min: 1,
            n_max: 10,
            frames: 300,
            val_frames: 150,
            seed: 0,
            branch_weight: BranchWeight::StrongFraction,
            mode: DataMode::Mm,
            noise_domain: NoiseDomain::Rdm,
            rdm_noise_power: 1.0,
        }
    }
}

impl DhdcParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_strong) {
            return Err(Error::Parameter(format!("p_strong {} outside [0, 1]", self.p_strong)));
        }
        if !(self.gamma_min < self.w_db && self.w_db < self.gamma_max) {
            return Err(Error::Parameter(format!(
                "need gamma_min < w_db < gamma_max, got {} / {} / {}",
                self.gamma_min, self.w_db, self.gamma_max
            )));
        }
        if !(self.v_min < self.v_max) {
            return Err(Error::Parameter("need v_min < v_max".into()));
        }
        if !(self.r_max > 0.0) {
            return Err(Error::Parameter("r_max must be positive".into()));
        }
        if self.frames == 0 {
            return Err(Error::Parameter("frames must be positive".into()));
        }
        if self.n_min > self.n_max {
            return Err(Error::Parameter("need n_min <= n_max".into()));
        }
        if !(self.rdm_noise_power > 0.0) {
            return Err(Error::Parameter("rdm_noise_power must be positive".into()));
        }
        Ok(())
    }

    /// Per-sample IF noise power for a radar config.
    pub fn sigma2(&self, cfg: &RadarConfig) -> f64 {
        self.rdm_noise_power / cfg.cells() as f64
    }

    /// Probability of drawing from the strong branch in mixed mode.
    pub fn strong_probability(&self) -> f64 {
        match self.branch_weight {
            BranchWeight::StrongFraction => self.p_strong,
            BranchWeight::WeakFraction => 1.0 - self.p_strong,
        }
    }
}

/// SNR draw for one target.
pub fn sample_gamma(p: &DhdcParams, mode: DataMode, rng: &mut SeededRng) -> f64 {
    let strong = match mode {
        DataMode::Mm => rng.bernoulli(p.strong_probability()),
        DataMode::Ntm => false,
    };
    if strong {
        rng.uniform(p.w_db, p.gamma_max)
    } else {
        // upper end excluded so non-strong draws never reach w_db
        let g = rng.uniform(p.gamma_min, p.w_db);
        if g >= p.w_db {
            p.gamma_min
        } else {
            g
        }
    }
}

/// Targets for one frame.
pub fn sample_scenario(p: &DhdcParams, mode: DataMode, rng: &mut SeededRng) -> Vec<TargetSpec> {
    let n = rng.uniform_int(p.n_min as u64, p.n_max as u64);
    (0..n)
        .map(|_| {
            let r = rng.uniform(0.0, p.r_max);
            let v = rng.uniform(p.v_min, p.v_max);
            let g = sample_gamma(p, mode, rng);
            TargetSpec::new(r, v, g)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct TargetTruth {
    pub spec: TargetSpec,
    pub peaks: PeakPrediction,
    pub is_strong: bool,
}

impl TargetTruth {
    pub fn new(cfg: &RadarConfig, spec: TargetSpec, w_db: f64) -> Self {
        Self {
            peaks: predict_peaks(cfg, &spec),
            is_strong: spec.gamma_db >= w_db,
            spec,
        }
    }

    /// Like [`TargetTruth::new`], but each Doppler bin is moved to the
    /// strongest of its two row neighbours in the noise-free render `clean`
    /// when that beats it. Near half-bin offsets the sidelobes of the other
    /// sub-band tones can tip the balance by about a percent.
    pub fn snapped(cfg: &RadarConfig, spec: TargetSpec, w_db: f64, clean: &ComplexFrame) -> Self {
        let mut t = Self::new(cfg, spec, w_db);
        let rows = cfg.pulses;
        let c = t.peaks.range_bin;
        for d in t.peaks.doppler_bins.iter_mut() {
            let best = [*d, (*d + rows - 1) % rows, (*d + 1) % rows]
                .into_iter()
                .fold(*d, |b, r| if clean.power(r, c) > clean.power(b, c) { r } else { b });
            *d = best;
        }
        t
    }
}

/// Binary cell mask, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            bits: vec![false; rows * cols],
        }
    }

    pub fn from_bits(rows: usize, cols: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != rows * cols {
            return Err(Error::Dimension("mask length does not match shape".into()));
        }
        Ok(Self { rows, cols, bits })
    }

    pub fn from_truth(rows: usize, cols: usize, truth: &[TargetTruth]) -> Self {
        let mut m = Self::new(rows, cols);
        for t in truth {
            for (r, c) in t.peaks.cells() {
                m.set(r, c, true);
            }
        }
        m
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.bits[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        self.bits[r * self.cols + c] = v;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }

    /// Chebyshev dilation by `radius`; rows wrap (Doppler), columns clamp.
    pub fn dilate(&self, radius: usize) -> Mask {
        let mut out = Mask::new(self.rows, self.cols);
        let rad = radius as isize;
        for r in 0..self.rows {
            for c in 0..self.cols {
                if !self.get(r, c) {
                    continue;
                }
                for dr in -rad..=rad {
                    let rr = (r as isize + dr).rem_euclid(self.rows as isize) as usize;
                    for dc in -rad..=rad {
                        let cc = c as isize + dc;
                        if cc >= 0 && (cc as usize) < self.cols {
                            out.set(rr, cc as usize, true);
                        }
                    }
                }
            }
        }
        out
    }

    pub fn crop(&self, row0: usize, col0: usize, rows: usize, cols: usize) -> Mask {
        let mut out = Mask::new(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                out.set(r, c, self.get(row0 + r, col0 + c));
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledFrame {
    pub rdm: ComplexFrame,
    pub truth: Vec<TargetTruth>,
    pub mask: Mask,
    pub mode: DataMode,
}

impl LabeledFrame {
    pub fn gammas(&self) -> Vec<f64> {
        self.truth.iter().map(|t| t.spec.gamma_db).collect()
    }

    pub fn is_hdr(&self) -> bool {
        is_hdr(&self.gammas())
    }
}

/// Round every sample to single precision (the on-disk representation).
pub fn quantize_f32(frame: &mut ComplexFrame) {
    for z in frame.data_mut() {
        *z = Complex64::new(z.re as f32 as f64, z.im as f32 as f64);
    }
}

/// Calibrate, render and superimpose `specs` on white noise.
///
/// `sigma2` is the per-sample IF noise power; RDM cells then carry
/// `M N sigma2`. The returned RDM keeps double precision.
pub fn build_frame(
    cfg: &RadarConfig,
    specs: &[TargetSpec],
    sigma2: f64,
    w_db: f64,
    noise_domain: NoiseDomain,
    mode: DataMode,
    rng: &mut SeededRng,
    fft: &Fft2d,
) -> Result<LabeledFrame> {
    let (rows, cols) = cfg.shape();
    let mut rdm = match noise_domain {
        NoiseDomain::Rdm => complex_gaussian_noise(rng, rows, cols, cfg.cells() as f64 * sigma2, DomainTag::Rdm)?,
        NoiseDomain::Ifs => {
            let mut n = complex_gaussian_noise(rng, rows, cols, sigma2, DomainTag::Ifs)?;
            fft.forward_in_place(&mut n)?;
            n
        }
    };
    let mut truth = Vec::with_capacity(specs.len());
    for spec in specs {
        let cal = calibrate_with(cfg, spec, sigma2, fft)?;
        rdm.add_scaled(&cal.unit_rdm, cal.amplitude)?;
        truth.push(TargetTruth::snapped(cfg, spec.with_amplitude(cal.amplitude), w_db, &cal.unit_rdm));
    }
    rdm.ensure_finite("build_frame")?;
    let mask = Mask::from_truth(rows, cols, &truth);
    Ok(LabeledFrame { rdm, truth, mask, mode })
}

/// Noise-free render of `specs` with calibrated amplitudes (label checks).
pub fn build_clean(cfg: &RadarConfig, specs: &[TargetSpec], sigma2: f64, fft: &Fft2d) -> Result<ComplexFrame> {
    let (rows, cols) = cfg.shape();
    let mut rdm = ComplexFrame::zeros(rows, cols, DomainTag::Rdm);
    for spec in specs {
        let cal = calibrate_with(cfg, spec, sigma2, fft)?;
        rdm.add_scaled(&cal.unit_rdm, cal.amplitude)?;
    }
    Ok(rdm)
}

/// Stream id for frame `index` of `split`.
pub fn frame_stream(split: Split, index: usize) -> u64 {
    ((split.code() as u64) << 32) | index as u64
}

/// Generate one frame from its RNG address.
pub fn generate_frame(
    cfg: &RadarConfig,
    p: &DhdcParams,
    stream_id: u64,
    fft: &Fft2d,
) -> Result<LabeledFrame> {
    let base = SeededRng::new(p.seed, stream_id);
    let mut scenario_rng = base.derive(0);
    let mut noise_rng = base.derive(1);
    let specs = sample_scenario(p, p.mode, &mut scenario_rng);
    let mut frame = build_frame(cfg, &specs, p.sigma2(cfg), p.w_db, p.noise_domain, p.mode, &mut noise_rng, fft)?;
    quantize_f32(&mut frame.rdm);
    Ok(frame)
}

/// Train and validation frames plus the manifest that regenerates them.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub frames: Vec<LabeledFrame>,
}

impl Dataset {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &LabeledFrame> {
        self.manifest
            .frames
            .iter()
            .zip(&self.frames)
            .filter(move |(e, _)| e.split == split)
            .map(|(_, f)| f)
    }
}

pub fn generate_dataset(cfg: &RadarConfig, p: &DhdcParams) -> Result<Dataset> {
    cfg.validate()?;
    p.validate()?;
    let manifest = DatasetManifest::plan(cfg, p);
    regenerate(&manifest)
}

/// Rebuild every frame listed in a manifest.
pub fn regenerate(manifest: &DatasetManifest) -> Result<Dataset> {
    let cfg = &manifest.radar;
    let p = &manifest.dhdc;
    let fft = Fft2d::new(cfg.pulses, cfg.range_cells)?;
    let frames = manifest
        .frames
        .par_iter()
        .map(|e| generate_frame(cfg, p, e.stream_id, &fft))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        manifest: manifest.clone(),
        frames,
    })
}
