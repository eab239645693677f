//! DDMA-MIMO LFMCW signal model.
//!
//! Each transmitter `q` carries a slow-time phase ramp of `s_q / K` cycles
//! per pulse, where `s_q` is its Doppler sub-band. The de-chirped IF sample
//! of one target is
//!
//! ```text
//! S_q(m, n) = A exp(j2pi (m s_q / K + f_c tau_m + k tau_m n / f_s)),
//! tau_m = 2 (R0 + m V T_p) / c
//! ```
//!
//! Summing over transmitters and taking the unnormalized 2D DFT gives the
//! range-Doppler map, where one physical target shows up as `Q` peaks spaced
//! `M / K` Doppler bins apart.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ComplexFrame, DomainTag, Fft2d};

/// Window applied along both axes before the FFT.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    #[default]
    Rectangular,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadarConfig {
    /// Carrier frequency f_c (Hz).
    pub carrier_hz: f64,
    /// Chirp slope k (Hz/s).
    pub chirp_slope: f64,
    /// Pulse repetition interval T_p (s).
    pub pri_s: f64,
    /// ADC sampling rate f_s (Hz).
    pub sample_rate_hz: f64,
    /// Pulses per frame, M.
    pub pulses: usize,
    /// Fast-time samples (range cells), N.
    pub range_cells: usize,
    pub speed_of_light: f64,
    /// Doppler sub-bands, K.
    pub subbands: usize,
    /// Sub-band index of each transmitter; its length is the transmitter count Q.
    pub subband_assignment: Vec<usize>,
    #[serde(default)]
    pub window: Window,
}

impl Default for RadarConfig {
    fn default() -> Self {
        Self {
            carrier_hz: 77e9,
            chirp_slope: 29e12,
            pri_s: 45.6e-6,
            sample_rate_hz: 30e6,
            pulses: 256,
            range_cells: 512,
            speed_of_light: 3e8,
            subbands: 8,
            subband_assignment: vec![0, 1, 2, 3, 4, 5],
            window: Window::Rectangular,
        }
    }
}

impl RadarConfig {
    pub fn tx_count(&self) -> usize {
        self.subband_assignment.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.pulses, self.range_cells)
    }

    pub fn cells(&self) -> usize {
        self.pulses * self.range_cells
    }

    /// Doppler bins between adjacent sub-bands, M / K.
    pub fn subband_spacing(&self) -> usize {
        self.pulses / self.subbands
    }

    /// Largest range whose beat frequency stays below f_s.
    pub fn unambiguous_range(&self) -> f64 {
        self.sample_rate_hz * self.speed_of_light / (2.0 * self.chirp_slope)
    }

    /// Metres per range bin.
    pub fn range_resolution(&self) -> f64 {
        self.unambiguous_range() / self.range_cells as f64
    }

    /// Radial velocity that advances the Doppler index by one bin.
    pub fn velocity_per_bin(&self) -> f64 {
        1.0 / (self.pulses as f64 * self.doppler_cycles_per_velocity())
    }

    /// Slow-time phase advance per pulse (cycles) per m/s, taken at the
    /// centre fast-time sample.
    fn doppler_cycles_per_velocity(&self) -> f64 {
        let c = self.speed_of_light;
        let n_mid = (self.range_cells as f64 - 1.0) / 2.0;
        2.0 * self.pri_s / c * (self.carrier_hz + self.chirp_slope * n_mid / self.sample_rate_hz)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("carrier_hz", self.carrier_hz),
            ("chirp_slope", self.chirp_slope),
            ("pri_s", self.pri_s),
            ("sample_rate_hz", self.sample_rate_hz),
            ("speed_of_light", self.speed_of_light),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Parameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.pulses.is_power_of_two() || !self.range_cells.is_power_of_two() {
            return Err(Error::Dimension(format!(
                "pulses ({}) and range_cells ({}) must be powers of two",
                self.pulses, self.range_cells
            )));
        }
        if self.subbands == 0 || self.pulses % self.subbands != 0 {
            return Err(Error::Parameter(format!(
                "subbands ({}) must divide pulses ({})",
                self.subbands, self.pulses
            )));
        }
        let q = self.tx_count();
        if q == 0 || q > self.subbands {
            return Err(Error::Parameter(format!(
                "transmitter count {q} must lie in [1, {}]",
                self.subbands
            )));
        }
        for (i, &s) in self.subband_assignment.iter().enumerate() {
            if s >= self.subbands {
                return Err(Error::Parameter(format!("sub-band index {s} out of range")));
            }
            if self.subband_assignment[..i].contains(&s) {
                return Err(Error::Parameter(format!("sub-band index {s} assigned twice")));
            }
        }
        Ok(())
    }
}

/// One point target. `amplitude` is derived by [`calibrate_amplitude`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TargetSpec {
    pub range_m: f64,
    pub velocity_mps: f64,
    pub gamma_db: f64,
    pub amplitude: Complex64,
}

impl TargetSpec {
    pub fn new(range_m: f64, velocity_mps: f64, gamma_db: f64) -> Self {
        Self {
            range_m,
            velocity_mps,
            gamma_db,
            amplitude: Complex64::new(1.0, 0.0),
        }
    }

    /// Target whose frame-centre range and Doppler fall exactly on bin
    /// centres (`doppler_bin` may be negative).
    pub fn on_grid(cfg: &RadarConfig, range_bin: usize, doppler_bin: i64, gamma_db: f64) -> Self {
        let v = doppler_bin as f64 * cfg.velocity_per_bin();
        let centre = range_bin as f64 * cfg.range_resolution();
        let r0 = centre - v * cfg.pri_s * (cfg.pulses as f64 - 1.0) / 2.0;
        Self::new(r0, v, gamma_db)
    }

    pub fn with_amplitude(mut self, a: Complex64) -> Self {
        self.amplitude = a;
        self
    }

    pub fn validate(&self, cfg: &RadarConfig) -> Result<()> {
        let r_max = cfg.unambiguous_range();
        if !(0.0..=r_max).contains(&self.range_m) {
            return Err(Error::Parameter(format!(
                "range {} m outside [0, {r_max:.2}] m",
                self.range_m
            )));
        }
        if !self.velocity_mps.is_finite() || !self.gamma_db.is_finite() {
            return Err(Error::Parameter("non-finite target parameter".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PeakPrediction {
    pub range_bin: usize,
    /// One Doppler bin per transmitter, in assignment order.
    pub doppler_bins: Vec<usize>,
    /// Fractional bin positions the integers were rounded from.
    pub range_pos: f64,
    pub doppler_pos: f64,
    pub straddle_loss_db: f64,
}

impl PeakPrediction {
    /// (row, col) of every peak.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.doppler_bins.iter().map(move |&d| (d, self.range_bin))
    }
}

/// Fractional (doppler, range) bin of the target's frame-centre response.
///
/// The range term is taken at the middle pulse and the Doppler term at the
/// middle fast-time sample, which is where the sheared peak of a moving
/// target sits. For a stationary target both reduce to the textbook
/// `N (2 k R0 / c) / f_s` and zero.
pub fn fractional_bins(cfg: &RadarConfig, t: &TargetSpec) -> (f64, f64) {
    let c = cfg.speed_of_light;
    let m_mid = (cfg.pulses as f64 - 1.0) / 2.0;
    let r_mid = t.range_m + t.velocity_mps * cfg.pri_s * m_mid;
    let range_pos = cfg.range_cells as f64 * (2.0 * cfg.chirp_slope * r_mid / c) / cfg.sample_rate_hz;
    let doppler_pos = cfg.pulses as f64 * t.velocity_mps * cfg.doppler_cycles_per_velocity();
    (doppler_pos, range_pos)
}

fn dirichlet_gain(frac: f64, len: usize) -> f64 {
    if frac.abs() < 1e-15 {
        return 1.0;
    }
    let num = (PI * frac).sin();
    let den = len as f64 * (PI * frac / len as f64).sin();
    (num / den).powi(2)
}

pub fn predict_peaks(cfg: &RadarConfig, t: &TargetSpec) -> PeakPrediction {
    let (doppler_pos, range_pos) = fractional_bins(cfg, t);
    let n = cfg.range_cells as i64;
    let m = cfg.pulses as i64;
    let rb = range_pos.round();
    let db = doppler_pos.round();
    let range_bin = (rb as i64).rem_euclid(n) as usize;
    let base = (db as i64).rem_euclid(m);
    let spacing = cfg.subband_spacing() as i64;
    let doppler_bins = cfg
        .subband_assignment
        .iter()
        .map(|&s| (base + s as i64 * spacing).rem_euclid(m) as usize)
        .collect();
    let gain = dirichlet_gain(range_pos - rb, cfg.range_cells) * dirichlet_gain(doppler_pos - db, cfg.pulses);
    PeakPrediction {
        range_bin,
        doppler_bins,
        range_pos,
        doppler_pos,
        straddle_loss_db: -10.0 * gain.log10(),
    }
}

#[inline]
fn cis_cycles(cycles: f64) -> Complex64 {
    let f = cycles - cycles.floor();
    let (s, c) = (2.0 * PI * f).sin_cos();
    Complex64::new(c, s)
}

/// Accumulate one target's IF samples into `frame`, with per-pulse factor
/// `ddma(m)` standing in for the transmitter phase code.
fn accumulate_target(
    cfg: &RadarConfig,
    t: &TargetSpec,
    frame: &mut ComplexFrame,
    ddma: impl Fn(usize) -> Complex64,
) {
    let c = cfg.speed_of_light;
    let cols = cfg.range_cells;
    for m in 0..cfg.pulses {
        let tau = 2.0 * (t.range_m + m as f64 * t.velocity_mps * cfg.pri_s) / c;
        let slow = cfg.carrier_hz * tau;
        let beat = cfg.chirp_slope * tau / cfg.sample_rate_hz;
        let row_scale = t.amplitude * ddma(m);
        let slow_frac = slow - slow.floor();
        let row = &mut frame.data_mut()[m * cols..(m + 1) * cols];
        for (n, z) in row.iter_mut().enumerate() {
            *z += row_scale * cis_cycles(slow_frac + beat * n as f64);
        }
    }
}

/// IF signal of transmitter `q` for every target (noise-free).
pub fn synth_ifs(cfg: &RadarConfig, targets: &[TargetSpec], q: usize) -> Result<ComplexFrame> {
    if q >= cfg.tx_count() {
        return Err(Error::Parameter(format!(
            "transmitter {q} out of range (Q = {})",
            cfg.tx_count()
        )));
    }
    let (rows, cols) = cfg.shape();
    let mut frame = ComplexFrame::zeros(rows, cols, DomainTag::Ifs);
    let sq = cfg.subband_assignment[q] as f64;
    let k = cfg.subbands as f64;
    for t in targets {
        t.validate(cfg)?;
        accumulate_target(cfg, t, &mut frame, |m| cis_cycles(m as f64 * sq / k));
    }
    Ok(frame)
}

/// IF signal summed over all transmitters.
pub fn synth_ifs_sum(cfg: &RadarConfig, targets: &[TargetSpec]) -> Result<ComplexFrame> {
    let (rows, cols) = cfg.shape();
    let k = cfg.subbands as f64;
    let code: Vec<Complex64> = (0..rows)
        .map(|m| {
            cfg.subband_assignment
                .iter()
                .map(|&s| cis_cycles(m as f64 * s as f64 / k))
                .sum()
        })
        .collect();
    let mut frame = ComplexFrame::zeros(rows, cols, DomainTag::Ifs);
    for t in targets {
        t.validate(cfg)?;
        accumulate_target(cfg, t, &mut frame, |m| code[m]);
    }
    Ok(frame)
}

/// Sum per-transmitter IF frames and pulse-compress to a range-Doppler map.
pub fn form_rdm(cfg: &RadarConfig, per_tx: &[ComplexFrame]) -> Result<ComplexFrame> {
    let (rows, cols) = cfg.shape();
    let mut sum = ComplexFrame::zeros(rows, cols, DomainTag::Ifs);
    for f in per_tx {
        if f.shape() != (rows, cols) {
            return Err(Error::Dimension(format!(
                "IF frame is {:?}, radar expects {rows}x{cols}",
                f.shape()
            )));
        }
        sum.add_assign(f)?;
    }
    let fft = Fft2d::new(rows, cols)?;
    fft.forward_in_place(&mut sum)?;
    Ok(sum)
}

/// Noise-free RDM of `targets` with their current amplitudes.
pub fn render_rdm(cfg: &RadarConfig, targets: &[TargetSpec], fft: &Fft2d) -> Result<ComplexFrame> {
    let mut f = synth_ifs_sum(cfg, targets)?;
    fft.forward_in_place(&mut f)?;
    Ok(f)
}

/// Result of the two-pass amplitude calibration.
#[derive(Clone, Debug)]
pub struct Calibration {
    pub amplitude: Complex64,
    /// Peak-cell power of the unit-amplitude render.
    pub unit_peak_power: f64,
    /// Unit-amplitude noise-free RDM, reusable by linearity.
    pub unit_rdm: ComplexFrame,
}

/// Amplitude that puts the strongest predicted peak `gamma_db` above the
/// per-cell RDM noise power `M N sigma2`.
pub fn calibrate_amplitude(cfg: &RadarConfig, t: &TargetSpec, sigma2: f64) -> Result<Complex64> {
    let fft = Fft2d::new(cfg.pulses, cfg.range_cells)?;
    Ok(calibrate_with(cfg, t, sigma2, &fft)?.amplitude)
}

pub fn calibrate_with(cfg: &RadarConfig, t: &TargetSpec, sigma2: f64, fft: &Fft2d) -> Result<Calibration> {
    if !(sigma2 > 0.0) {
        return Err(Error::Parameter(format!("noise power must be positive, got {sigma2}")));
    }
    let unit = t.with_amplitude(Complex64::new(1.0, 0.0));
    let unit_rdm = render_rdm(cfg, &[unit], fft)?;
    let peaks = predict_peaks(cfg, t);
    let p1 = peaks
        .cells()
        .map(|(r, c)| unit_rdm.power(r, c))
        .fold(0.0, f64::max);
    if !(p1 > 0.0) || !p1.is_finite() {
        return Err(Error::Calibration(format!(
            "degenerate unit render (peak power {p1})"
        )));
    }
    let noise_cell = cfg.cells() as f64 * sigma2;
    let a = (10f64.powf(t.gamma_db / 10.0) * noise_cell / p1).sqrt();
    Ok(Calibration {
        amplitude: Complex64::new(a, 0.0),
        unit_peak_power: p1,
        unit_rdm,
    })
}

/// `10 log10(|rdm[cell]|^2 / mean |rdm[noise_region]|^2)`.
pub fn measure_snr(rdm: &ComplexFrame, cell: (usize, usize), noise_region: &[(usize, usize)]) -> Result<f64> {
    if noise_region.is_empty() {
        return Err(Error::Parameter("empty noise region".into()));
    }
    let noise = noise_region.iter().map(|&(r, c)| rdm.power(r, c)).sum::<f64>() / noise_region.len() as f64;
    Ok(10.0 * (rdm.power(cell.0, cell.1) / noise).log10())
}

/// Cells farther than `guard` bins (Chebyshev, Doppler wrapping) from every
/// listed peak.
pub fn noise_region(shape: (usize, usize), peaks: &[(usize, usize)], guard: usize) -> Vec<(usize, usize)> {
    let (rows, cols) = shape;
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let near = peaks.iter().any(|&(pr, pc)| {
                let dr = r.abs_diff(pr);
                let dr = dr.min(rows - dr);
                dr <= guard && c.abs_diff(pc) <= guard
            });
            if !near {
                out.push((r, c));
            }
        }
    }
    out
}

/// Cells whose Doppler row and range column are both farther than `guard`
/// bins from every peak. Moving targets leak energy along their own rows and
/// columns through range-Doppler coupling; this region avoids that skirt.
pub fn noise_region_cross(shape: (usize, usize), peaks: &[(usize, usize)], guard: usize) -> Vec<(usize, usize)> {
    let (rows, cols) = shape;
    let row_ok: Vec<bool> = (0..rows)
        .map(|r| {
            peaks.iter().all(|&(pr, _)| {
                let d = r.abs_diff(pr);
                d.min(rows - d) > guard
            })
        })
        .collect();
    let col_ok: Vec<bool> = (0..cols)
        .map(|c| peaks.iter().all(|&(_, pc)| c.abs_diff(pc) > guard))
        .collect();
    let mut out = Vec::new();
    for r in (0..rows).filter(|&r| row_ok[r]) {
        for c in (0..cols).filter(|&c| col_ok[c]) {
            out.push((r, c));
        }
    }
    out
}

/// Span of target SNRs in dB.
pub fn snr_span_db(gammas: &[f64]) -> f64 {
    let lo = gammas.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = gammas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if gammas.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

pub const HDR_SPAN_DB: f64 = 30.0;

/// High dynamic range: target SNRs span more than 30 dB.
pub fn is_hdr(gammas: &[f64]) -> bool {
    snr_span_db(gammas) > HDR_SPAN_DB
}
