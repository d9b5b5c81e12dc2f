//! Reading and writing grayscale images, plus the machine-readable run
//! report.
//!
//! Supported image containers: portable graymaps (`P2` text and `P5`
//! binary, maxval 255 or 65535, 16-bit samples big-endian) and
//! single-channel PNG at 8 or 16 bits. Readers dispatch on the file's magic
//! bytes, writers on the file extension. Samples map to intensities as
//! `value / (2^depth - 1)`; writing quantizes by rounding to the nearest
//! sample and clamps (and counts) values outside `[0, 1]`.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{denormalize_samples, BitDepth, Image};

/// Read a grayscale image and normalize it to `[0, 1]`.
///
/// The container is detected from the magic bytes: `P2`/`P5` graymaps and
/// grayscale PNG are accepted; color or paletted PNG and other formats are
/// not.
pub fn read_grayscale(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;

    match bytes.first() {
        Some(b'P') if bytes.get(1) == Some(&b'2') || bytes.get(1) == Some(&b'5') => {
            read_pgm(path, &bytes)
        }
        Some(0x89) if bytes.starts_with(&[0x89, b'P', b'N', b'G']) => read_png(path, &bytes),
        _ => Err(Error::unsupported(path, "not a PGM or PNG file")),
    }
}

/// Quantize an image to the given bit depth and write it.
///
/// The format follows the extension: `.pgm`/`.pnm` write binary `P5`,
/// `.png` writes grayscale PNG. Returns how many pixels fell outside
/// `[0, 1]` and were clamped.
pub fn write_grayscale(img: &Image, path: impl AsRef<Path>, depth: BitDepth) -> Result<usize> {
    let path = path.as_ref();
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    let (samples, clamped) = denormalize_samples(img.data(), depth);
    match ext.as_str() {
        "pgm" | "pnm" => write_pgm(img, path, depth, &samples)?,
        "png" => write_png(img, path, depth, &samples)?,
        other => {
            return Err(Error::unsupported(
                path,
                format!("cannot infer output format from extension '{other}'"),
            ))
        }
    }
    Ok(clamped)
}

fn read_pgm(path: &Path, bytes: &[u8]) -> Result<Image> {
    let binary = bytes[1] == b'5';
    let mut pos = 2usize;

    let next_token = |pos: &mut usize| -> Result<u64> {
        // Whitespace and '#' comments separate header tokens.
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
                continue;
            }
            break;
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if start == *pos {
            return Err(Error::format(path, "unexpected end of header"));
        }
        std::str::from_utf8(&bytes[start..*pos])
            .ok()
            .and_then(|s| s.parse::<u64>().ok())
            .ok_or_else(|| Error::format(path, "malformed header token"))
    };

    let width = next_token(&mut pos)? as usize;
    let height = next_token(&mut pos)? as usize;
    let maxval = next_token(&mut pos)?;
    let depth = match maxval {
        255 => BitDepth::Eight,
        65535 => BitDepth::Sixteen,
        other => {
            return Err(Error::unsupported(path, format!("maxval {other} (supported: 255, 65535)")))
        }
    };
    if width == 0 || height == 0 {
        return Err(Error::format(path, format!("invalid dimensions {width}x{height}")));
    }
    let count = width
        .checked_mul(height)
        .ok_or_else(|| Error::format(path, "dimensions overflow"))?;

    let mut samples: Vec<u16> = Vec::with_capacity(count);
    if binary {
        // A single whitespace byte separates the maxval from the raster.
        if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
            return Err(Error::format(path, "missing whitespace before raster"));
        }
        pos += 1;
        let per_sample = if depth == BitDepth::Sixteen { 2 } else { 1 };
        let need = count
            .checked_mul(per_sample)
            .ok_or_else(|| Error::format(path, "dimensions overflow"))?;
        let raster = bytes
            .get(pos..pos + need)
            .ok_or_else(|| Error::format(path, "truncated raster"))?;
        match depth {
            BitDepth::Eight => samples.extend(raster.iter().map(|&b| u16::from(b))),
            BitDepth::Sixteen => {
                samples.extend(raster.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])))
            }
        }
    } else {
        for _ in 0..count {
            let v = next_token(&mut pos)?;
            if v > u64::from(depth.max_value()) {
                return Err(Error::format(path, format!("sample {v} exceeds maxval {maxval}")));
            }
            samples.push(v as u16);
        }
    }

    Image::from_samples(width, height, &samples, depth).map_err(|e| match e {
        Error::SampleOutOfRange { value, max } => {
            Error::format(path, format!("sample {value} exceeds maxval {max}"))
        }
        other => other,
    })
}

fn write_pgm(img: &Image, path: &Path, depth: BitDepth, samples: &[u16]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let write = |out: &mut BufWriter<File>, data: &[u8]| {
        out.write_all(data).map_err(|e| Error::io(path, e))
    };
    let header = format!("P5\n{} {}\n{}\n", img.width(), img.height(), depth.max_value());
    write(&mut out, header.as_bytes())?;
    match depth {
        BitDepth::Eight => {
            let raster: Vec<u8> = samples.iter().map(|&s| s as u8).collect();
            write(&mut out, &raster)?;
        }
        BitDepth::Sixteen => {
            let mut raster = Vec::with_capacity(samples.len() * 2);
            for &s in samples {
                raster.extend_from_slice(&s.to_be_bytes());
            }
            write(&mut out, &raster)?;
        }
    }
    out.flush().map_err(|e| Error::io(path, e))
}

fn read_png(path: &Path, bytes: &[u8]) -> Result<Image> {
    let mut decoder = png::Decoder::new(bytes);
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(|e| Error::format(path, e.to_string()))?;
    let mut buf = vec![0u8; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf).map_err(|e| Error::format(path, e.to_string()))?;

    if info.color_type != png::ColorType::Grayscale {
        return Err(Error::unsupported(
            path,
            format!("{:?} color type (only single-channel grayscale is supported)", info.color_type),
        ));
    }
    let depth = match info.bit_depth {
        png::BitDepth::Eight => BitDepth::Eight,
        png::BitDepth::Sixteen => BitDepth::Sixteen,
        other => return Err(Error::unsupported(path, format!("{other:?} bit depth"))),
    };

    let (width, height) = (info.width as usize, info.height as usize);
    let data = &buf[..info.buffer_size()];
    let samples: Vec<u16> = match depth {
        BitDepth::Eight => data.iter().map(|&b| u16::from(b)).collect(),
        BitDepth::Sixteen => data
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect(),
    };
    if samples.len() != width * height {
        return Err(Error::format(path, "pixel count does not match dimensions"));
    }
    Image::from_samples(width, height, &samples, depth)
}

fn write_png(img: &Image, path: &Path, depth: BitDepth, samples: &[u16]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), img.width() as u32, img.height() as u32);
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(match depth {
        BitDepth::Eight => png::BitDepth::Eight,
        BitDepth::Sixteen => png::BitDepth::Sixteen,
    });
    let mut writer = encoder
        .write_header()
        .map_err(|e| Error::format(path, e.to_string()))?;
    let raster: Vec<u8> = match depth {
        BitDepth::Eight => samples.iter().map(|&s| s as u8).collect(),
        BitDepth::Sixteen => samples.iter().flat_map(|&s| s.to_be_bytes()).collect(),
    };
    writer
        .write_image_data(&raster)
        .map_err(|e| Error::format(path, e.to_string()))
}

/// Wall-clock seconds per pipeline stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    /// Obtaining the mask (automatic generation or loading a mask file).
    pub mask_s: f64,
    /// The Laplace solve.
    pub solve_s: f64,
    /// The post-solve algebra: clamping, normalization, bone layer, stats.
    pub decompose_s: f64,
    /// The whole run including image I/O.
    pub total_s: f64,
}

/// Machine-readable summary of one decomposition run.
///
/// Serialized as JSON; floating-point fields round-trip exactly through
/// [`write_report`] / [`read_report`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub input_path: String,
    pub width: usize,
    pub height: usize,
    /// Bone normalization constant (1 when degenerate).
    pub alpha: f64,
    /// Final max-norm stencil residual of the solve.
    pub solver_residual: f64,
    /// V-cycles (or sweeps) the solve used.
    pub solver_iterations: usize,
    /// Background pixels clamped during the model inversion.
    pub clamped_pixel_count: usize,
    /// Median `|grad bone| / |grad input|` over informative mask pixels.
    pub contrast_gain_median: f64,
    /// False when the solver hit its iteration cap before the tolerance.
    pub converged: bool,
    /// True when the input never rose above the background.
    pub degenerate: bool,
    pub timings: Timings,
}

/// Serialize a report as pretty-printed JSON (with a trailing newline).
pub fn report_to_json(report: &Report) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serialization cannot fail");
    s.push('\n');
    s
}

/// Write a report as JSON.
pub fn write_report(report: &Report, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, report_to_json(report)).map_err(|e| Error::io(path, e))
}

/// Read a report back from JSON.
pub fn read_report(path: impl AsRef<Path>) -> Result<Report> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}
