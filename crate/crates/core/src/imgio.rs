//! Image, metadata and curve files.
//!
//! Images are binary greyscale NetPBM: `P5` PGM with 8- or 16-bit samples
//! (big-endian), mapped to `[0, 1]` through `maxval`, and `Pf` PFM with
//! 32-bit floats whose byte order follows the sign of the scale line. PFM
//! rows are stored bottom to top.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::ImageGrid;
use crate::metrics::QualityReport;
use crate::tuning::{MuGrid, Strategy};
use crate::whiteness::{CurvePoint, WhitenessCurve};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Pgm8,
    Pgm16,
    Pfm,
}

impl FromStr for ImageFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pgm8" => Ok(Self::Pgm8),
            "pgm16" => Ok(Self::Pgm16),
            "pfm" => Ok(Self::Pfm),
            other => Err(Error::InvalidParameter(format!("unknown image format {other:?}"))),
        }
    }
}

impl ImageFormat {
    /// Guesses the format from a file extension: `.pfm` or PGM (16-bit).
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("pfm") => Self::Pfm,
            _ => Self::Pgm16,
        }
    }
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderReader<'a> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn token(&mut self) -> Result<&'a str> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::MalformedHeader {
                offset: start,
                reason: "unexpected end of header".into(),
            });
        }
        std::str::from_utf8(&self.bytes[start..self.pos]).map_err(|_| Error::MalformedHeader {
            offset: start,
            reason: "header is not ASCII".into(),
        })
    }

    fn number<T: FromStr>(&mut self, what: &str) -> Result<T> {
        let start = {
            self.skip_space_and_comments();
            self.pos
        };
        let tok = self.token()?;
        tok.parse().map_err(|_| Error::MalformedHeader {
            offset: start,
            reason: format!("invalid {what} {tok:?}"),
        })
    }

    /// Consumes the single whitespace byte that ends a header.
    fn end_of_header(&mut self) -> Result<usize> {
        match self.bytes.get(self.pos) {
            Some(c) if c.is_ascii_whitespace() => Ok(self.pos + 1),
            _ => Err(Error::MalformedHeader {
                offset: self.pos,
                reason: "missing whitespace after header".into(),
            }),
        }
    }
}

fn positive_dim(v: usize, offset: usize) -> Result<usize> {
    if v == 0 {
        return Err(Error::MalformedHeader {
            offset,
            reason: "zero image dimension".into(),
        });
    }
    Ok(v)
}

/// Decodes a PGM (`P5`) or PFM (`Pf`) byte stream.
pub fn decode_image(bytes: &[u8]) -> Result<ImageGrid> {
    let mut hdr = HeaderReader { bytes, pos: 0 };
    let magic = hdr.token()?;
    match magic {
        "P5" => {
            let width = positive_dim(hdr.number("width")?, hdr.pos)?;
            let height = positive_dim(hdr.number("height")?, hdr.pos)?;
            let maxval_at = hdr.pos;
            let maxval: u32 = hdr.number("maxval")?;
            if maxval == 0 || maxval > 65535 {
                return Err(Error::MalformedHeader {
                    offset: maxval_at,
                    reason: format!("maxval {maxval} outside 1..=65535"),
                });
            }
            let start = hdr.end_of_header()?;
            let bps = if maxval < 256 { 1 } else { 2 };
            let need = width * height * bps;
            let body = bytes.get(start..start + need).ok_or(Error::TruncatedData {
                offset: bytes.len(),
                expected: start + need,
            })?;
            let scale = 1.0 / maxval as f64;
            let data = if bps == 1 {
                body.iter().map(|&v| v as f64 * scale).collect()
            } else {
                body.chunks_exact(2)
                    .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 * scale)
                    .collect()
            };
            ImageGrid::new(height, width, data)
        }
        "Pf" => {
            let width = positive_dim(hdr.number("width")?, hdr.pos)?;
            let height = positive_dim(hdr.number("height")?, hdr.pos)?;
            let scale_at = hdr.pos;
            let scale: f64 = hdr.number("scale")?;
            if scale == 0.0 || !scale.is_finite() {
                return Err(Error::MalformedHeader {
                    offset: scale_at,
                    reason: "scale must be non-zero".into(),
                });
            }
            let start = hdr.end_of_header()?;
            let need = width * height * 4;
            let body = bytes.get(start..start + need).ok_or(Error::TruncatedData {
                offset: bytes.len(),
                expected: start + need,
            })?;
            let little = scale < 0.0;
            let mut data = vec![0.0; width * height];
            for (k, c) in body.chunks_exact(4).enumerate() {
                let raw = [c[0], c[1], c[2], c[3]];
                let v = if little { f32::from_le_bytes(raw) } else { f32::from_be_bytes(raw) };
                let (file_row, col) = (k / width, k % width);
                data[(height - 1 - file_row) * width + col] = v as f64;
            }
            ImageGrid::new(height, width, data)
        }
        other => Err(Error::UnsupportedFormat {
            offset: 0,
            reason: format!("magic {other:?}; expected P5 or Pf"),
        }),
    }
}

pub fn read_image(path: impl AsRef<Path>) -> Result<ImageGrid> {
    decode_image(&fs::read(path)?)
}

/// Clamp to `[0, 1]`, then round half up onto `0..=maxval`.
fn quantise(v: f64, maxval: f64) -> u32 {
    (v.clamp(0.0, 1.0) * maxval + 0.5).floor() as u32
}

pub fn encode_image(grid: &ImageGrid, format: ImageFormat) -> Vec<u8> {
    let (h, w) = grid.shape();
    match format {
        ImageFormat::Pgm8 => {
            let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
            out.extend(grid.data().iter().map(|&v| quantise(v, 255.0) as u8));
            out
        }
        ImageFormat::Pgm16 => {
            let mut out = format!("P5\n{w} {h}\n65535\n").into_bytes();
            for &v in grid.data() {
                out.extend_from_slice(&(quantise(v, 65535.0) as u16).to_be_bytes());
            }
            out
        }
        ImageFormat::Pfm => {
            let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
            for row in (0..h).rev() {
                for col in 0..w {
                    out.extend_from_slice(&(grid.get(row, col) as f32).to_le_bytes());
                }
            }
            out
        }
    }
}

pub fn write_image(grid: &ImageGrid, path: impl AsRef<Path>, format: ImageFormat) -> Result<()> {
    fs::write(path, encode_image(grid, format))?;
    Ok(())
}

/// Full-precision field; `None` leaves it empty.
fn push_number(out: &mut String, v: Option<f64>) {
    if let Some(v) = v {
        write!(out, "{v:.16e}").expect("writing to a String");
    }
}

/// CSV with header `mu,tau,W` (plus `psnr,isnr,ssim` when metrics are given),
/// 17 significant digits, LF line endings. Unknown `tau` is an empty field.
pub fn format_curve(curve: &WhitenessCurve, metrics: Option<&[QualityReport]>) -> Result<String> {
    if let Some(m) = metrics {
        if m.len() != curve.len() {
            return Err(Error::InvalidParameter(format!(
                "{} metric rows for {} curve points",
                m.len(),
                curve.len()
            )));
        }
    }
    let mut out = String::from(if metrics.is_some() { "mu,tau,W,psnr,isnr,ssim\n" } else { "mu,tau,W\n" });
    for (k, p) in curve.points().iter().enumerate() {
        push_number(&mut out, Some(p.mu));
        out.push(',');
        push_number(&mut out, p.tau);
        out.push(',');
        push_number(&mut out, Some(p.whiteness));
        if let Some(m) = metrics {
            for v in [m[k].psnr, m[k].isnr, m[k].ssim] {
                out.push(',');
                push_number(&mut out, Some(v));
            }
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_curve(curve: &WhitenessCurve, metrics: Option<&[QualityReport]>, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_curve(curve, metrics)?)?;
    Ok(())
}

/// Parses the output of [`format_curve`]; metric columns are returned as raw
/// rows when present.
pub fn parse_curve(text: &str) -> Result<(WhitenessCurve, Vec<[f64; 3]>)> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let with_metrics = match header {
        "mu,tau,W" => false,
        "mu,tau,W,psnr,isnr,ssim" => true,
        other => {
            return Err(Error::MalformedMeta {
                line: 1,
                reason: format!("unexpected header {other:?}"),
            })
        }
    };
    let mut points = Vec::new();
    let mut metrics = Vec::new();
    for (k, line) in lines.enumerate() {
        let bad = |reason: String| Error::MalformedMeta { line: k + 2, reason };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != if with_metrics { 6 } else { 3 } {
            return Err(bad(format!("{} fields", fields.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("{s:?}: {e}")));
        let tau = if fields[1].is_empty() { None } else { Some(num(fields[1])?) };
        points.push(CurvePoint {
            mu: num(fields[0])?,
            tau,
            whiteness: num(fields[2])?,
        });
        if with_metrics {
            metrics.push([num(fields[3])?, num(fields[4])?, num(fields[5])?]);
        }
    }
    Ok((WhitenessCurve::new(points)?, metrics))
}

/// Sidecar describing how an observation was produced and solved.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentMeta {
    pub psf_band: usize,
    pub psf_sigma: f64,
    pub decim_rows: usize,
    pub decim_cols: usize,
    pub noise_sigma: Option<f64>,
    pub seed: Option<u64>,
    pub epsilon: f64,
    pub grid: MuGrid,
    pub mu_star: Option<f64>,
    pub tau_star: Option<f64>,
    pub strategy: Option<Strategy>,
}

impl Default for ExperimentMeta {
    fn default() -> Self {
        Self {
            psf_band: 1,
            psf_sigma: 1.0,
            decim_rows: 1,
            decim_cols: 1,
            noise_sigma: None,
            seed: None,
            epsilon: crate::linops::DEFAULT_EPSILON,
            grid: MuGrid::default(),
            mu_star: None,
            tau_star: None,
            strategy: None,
        }
    }
}

/// Keys that carry knowledge of the noise level.
const NOISE_KEYS: [&str; 2] = ["noise_sigma", "tau_star"];

impl ExperimentMeta {
    /// Flat `key=value` text, one entry per line, fixed key order.
    pub fn serialise(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            out.push_str(k);
            out.push('=');
            out.push_str(&v);
            out.push('\n');
        };
        kv("psf_band", self.psf_band.to_string());
        kv("psf_sigma", self.psf_sigma.to_string());
        kv("decim_rows", self.decim_rows.to_string());
        kv("decim_cols", self.decim_cols.to_string());
        if let Some(s) = self.noise_sigma {
            kv("noise_sigma", s.to_string());
        }
        if let Some(s) = self.seed {
            kv("seed", s.to_string());
        }
        kv("epsilon", self.epsilon.to_string());
        kv("grid_min", self.grid.mu_min().to_string());
        kv("grid_max", self.grid.mu_max().to_string());
        kv("grid_count", self.grid.count().to_string());
        if let Some(m) = self.mu_star {
            kv("mu_star", m.to_string());
        }
        if let Some(t) = self.tau_star {
            kv("tau_star", t.to_string());
        }
        if let Some(s) = self.strategy {
            kv("strategy", s.as_str().to_string());
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_filtered(text, |_| true)
    }

    /// Parses everything except entries that reveal the noise level; they are
    /// dropped before any value is interpreted.
    pub fn parse_without_noise(text: &str) -> Result<Self> {
        Self::parse_filtered(text, |k| !NOISE_KEYS.contains(&k))
    }

    fn parse_filtered(text: &str, keep: impl Fn(&str) -> bool) -> Result<Self> {
        let mut meta = Self::default();
        let (mut gmin, mut gmax, mut gcount) = (meta.grid.mu_min(), meta.grid.mu_max(), meta.grid.count());
        for (k, raw) in text.lines().enumerate() {
            let line_no = k + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(Error::MalformedMeta {
                line: line_no,
                reason: "expected key=value".into(),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !keep(key) {
                continue;
            }
            fn num<T: FromStr>(v: &str, line: usize) -> Result<T> {
                v.parse().map_err(|_| Error::MalformedMeta {
                    line,
                    reason: format!("invalid value {v:?}"),
                })
            }
            match key {
                "psf_band" => meta.psf_band = num(value, line_no)?,
                "psf_sigma" => meta.psf_sigma = num(value, line_no)?,
                "decim_rows" => meta.decim_rows = num(value, line_no)?,
                "decim_cols" => meta.decim_cols = num(value, line_no)?,
                "noise_sigma" => meta.noise_sigma = Some(num(value, line_no)?),
                "seed" => meta.seed = Some(num(value, line_no)?),
                "epsilon" => meta.epsilon = num(value, line_no)?,
                "grid_min" => gmin = num(value, line_no)?,
                "grid_max" => gmax = num(value, line_no)?,
                "grid_count" => gcount = num(value, line_no)?,
                "mu_star" => meta.mu_star = Some(num(value, line_no)?),
                "tau_star" => meta.tau_star = Some(num(value, line_no)?),
                "strategy" => meta.strategy = Some(value.parse()?),
                other => {
                    return Err(Error::MalformedMeta {
                        line: line_no,
                        reason: format!("unknown key {other:?}"),
                    })
                }
            }
        }
        meta.grid = MuGrid::new(gmin, gmax, gcount)?;
        Ok(meta)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn read_without_noise(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_without_noise(&fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.serialise())?;
        Ok(())
    }
}
