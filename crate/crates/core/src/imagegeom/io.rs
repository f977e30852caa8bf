//! Image ingestion: 8/16-bit PNG (gray, gray+alpha, RGB, RGBA) and the raw
//! `IMGF` float format.
//!
//! Raw layout: ASCII `IMGF`, then width, height, channels as u32 LE, then
//! `width * height * channels` f32 LE intensities, row-major interleaved.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::{GeomError, Image};

const RAW_MAGIC: &[u8; 4] = b"IMGF";

pub fn read_raw(mut r: impl Read) -> Result<Image, GeomError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != RAW_MAGIC {
        return Err(GeomError::Format("missing IMGF magic".into()));
    }
    let mut header = [0u8; 12];
    r.read_exact(&mut header)?;
    let field = |i: usize| u32::from_le_bytes(header[i * 4..i * 4 + 4].try_into().unwrap()) as usize;
    let (w, h, c) = (field(0), field(1), field(2));
    let n = w
        .checked_mul(h)
        .and_then(|v| v.checked_mul(c))
        .ok_or_else(|| GeomError::Format("raw dimensions overflow".into()))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != n * 4 {
        return Err(GeomError::PixelCount { expected: n, got: bytes.len() / 4 });
    }
    let pixels = bytes.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect();
    Image::new(w, h, c, pixels)
}

pub fn write_raw(img: &Image, mut w: impl Write) -> Result<(), GeomError> {
    w.write_all(RAW_MAGIC)?;
    for v in [img.width(), img.height(), img.channels()] {
        w.write_all(&(v as u32).to_le_bytes())?;
    }
    for v in img.pixels() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_png(bytes: &[u8]) -> Result<Image, GeomError> {
    let mut decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(|e| GeomError::Format(e.to_string()))?;
    let mut buf = vec![0; reader.output_buffer_size().ok_or_else(|| GeomError::Format("png too large".into()))?];
    let info = reader.next_frame(&mut buf).map_err(|e| GeomError::Format(e.to_string()))?;
    let (w, h) = (info.width as usize, info.height as usize);
    let src_channels = info.color_type.samples();
    let data = &buf[..info.buffer_size()];
    let samples: Vec<f32> = match info.bit_depth {
        png::BitDepth::Sixteen => data
            .chunks_exact(2)
            .map(|b| u16::from_be_bytes([b[0], b[1]]) as f32 / 65535.0)
            .collect(),
        png::BitDepth::Eight => data.iter().map(|&b| b as f32 / 255.0).collect(),
        other => return Err(GeomError::Format(format!("unsupported png bit depth {other:?}"))),
    };
    // alpha is dropped
    let (keep, out_c) = match src_channels {
        1 | 2 => (1, 1),
        3 | 4 => (3, 3),
        n => return Err(GeomError::Channels(n)),
    };
    let pixels = samples.chunks_exact(src_channels).flat_map(|px| px[..keep].iter().copied()).collect();
    Image::new(w, h, out_c, pixels)
}

/// Writes an 8-bit PNG (intensities are clamped and rounded).
pub fn write_png(img: &Image, w: impl Write) -> Result<(), GeomError> {
    let mut enc = png::Encoder::new(BufWriter::new(w), img.width() as u32, img.height() as u32);
    enc.set_color(if img.channels() == 1 { png::ColorType::Grayscale } else { png::ColorType::Rgb });
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc.write_header().map_err(|e| GeomError::Format(e.to_string()))?;
    let bytes: Vec<u8> = img.pixels().iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
    writer.write_image_data(&bytes).map_err(|e| GeomError::Format(e.to_string()))?;
    writer.finish().map_err(|e| GeomError::Format(e.to_string()))
}

/// Loads an image, choosing the decoder by content (`IMGF` magic or PNG).
pub fn load_image(path: impl AsRef<Path>) -> Result<Image, GeomError> {
    let bytes = std::fs::read(path.as_ref())?;
    if bytes.starts_with(RAW_MAGIC) {
        read_raw(&bytes[..])
    } else {
        read_png(&bytes)
    }
}

/// Saves by extension: `.png` for PNG, anything else as raw `IMGF`.
pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<(), GeomError> {
    let path = path.as_ref();
    let f = BufWriter::new(File::create(path)?);
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("png") => write_png(img, f),
        _ => write_raw(img, f),
    }
}
