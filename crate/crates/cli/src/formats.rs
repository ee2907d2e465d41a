//! Depth, mask, normal-map and intrinsics files.
//!
//! Depth: PFM (`Pf`, 32-bit float, rows stored bottom-up, endianness from
//! the sign of the scale line; written little-endian) and 16-bit PGM or PNG
//! with `depth = raw / 256` meters, `0` meaning no depth. Masks: 8-bit PNG
//! or PGM, nonzero is masked-in. Normals: RGB PNG with `[-1, 1] → [0, 255]`.
//! Intrinsics: JSON `{fx, fy, cx, cy, width, height}`.

use std::fs;
use std::path::Path;

use dgc_core::geometry::Vec3;
use dgc_core::{CameraIntrinsics, DepthKind, DepthMap, Grid, NormalMap};
use image::{GrayImage, ImageBuffer, Luma, Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Meters per raw unit in 16-bit depth images.
pub const DEPTH_PGM_SCALE: f64 = 256.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DepthFormat {
    Pfm,
    Pgm,
    Png,
}

impl DepthFormat {
    pub fn from_path(path: &Path) -> CliResult<Self> {
        match extension(path).as_deref() {
            Some("pfm") => Ok(Self::Pfm),
            Some("pgm") => Ok(Self::Pgm),
            Some("png") => Ok(Self::Png),
            _ => Err(CliError::Validation(format!(
                "{}: unsupported depth format (expected .pfm, .pgm or .png)",
                path.display()
            ))),
        }
    }
}

fn extension(path: &Path) -> Option<String> {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
}

fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path.display().to_string(), e))
}

/// Writes via a sibling temp file and rename so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let ctx = || path.display().to_string();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(ctx(), e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, bytes).map_err(|e| CliError::io(ctx(), e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(ctx(), e))
}

/// Minimal tokenizer for the ASCII headers of PFM and PGM.
struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Header<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn token(&mut self) -> Option<&'a str> {
        loop {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.bytes.get(self.pos) == Some(&b'#') {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
                continue;
            }
            break;
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return None;
        }
        std::str::from_utf8(&self.bytes[start..self.pos]).ok()
    }

    fn number<T: std::str::FromStr>(&mut self, what: &str) -> Result<T, String> {
        self.token()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| format!("bad {what} in header"))
    }

    /// Skips the single whitespace byte that ends the header.
    fn payload(mut self) -> &'a [u8] {
        if self.pos < self.bytes.len() {
            self.pos += 1;
        }
        &self.bytes[self.pos..]
    }
}

pub fn decode_pfm(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>), String> {
    let mut h = Header::new(bytes);
    let channels = match h.token() {
        Some("Pf") => 1,
        Some("PF") => 3,
        _ => return Err("not a PFM file".into()),
    };
    let width: usize = h.number("width")?;
    let height: usize = h.number("height")?;
    let scale: f64 = h.number("scale")?;
    if scale == 0.0 || !scale.is_finite() {
        return Err("PFM scale must be non-zero".into());
    }
    let little = scale < 0.0;
    let payload = h.payload();
    let need = width * height * channels * 4;
    if payload.len() < need {
        return Err(format!("PFM payload has {} bytes, need {need}", payload.len()));
    }
    let mut values = vec![0.0; width * height];
    for file_row in 0..height {
        let row = height - 1 - file_row;
        for col in 0..width {
            // first channel only for colour PFMs
            let off = ((file_row * width + col) * channels) * 4;
            let b = [payload[off], payload[off + 1], payload[off + 2], payload[off + 3]];
            let v = if little {
                f32::from_le_bytes(b)
            } else {
                f32::from_be_bytes(b)
            };
            values[row * width + col] = v as f64;
        }
    }
    Ok((width, height, values))
}

pub fn encode_pfm(width: usize, height: usize, values: &[f64]) -> Vec<u8> {
    let mut out = format!("Pf\n{width} {height}\n-1.0\n").into_bytes();
    out.reserve(width * height * 4);
    for row in (0..height).rev() {
        for col in 0..width {
            out.extend_from_slice(&(values[row * width + col] as f32).to_le_bytes());
        }
    }
    out
}

/// Decodes binary PGM (`P5`) to raw samples and the max value.
pub fn decode_pgm(bytes: &[u8]) -> Result<(usize, usize, u16, Vec<u16>), String> {
    let mut h = Header::new(bytes);
    if h.token() != Some("P5") {
        return Err("not a binary PGM file".into());
    }
    let width: usize = h.number("width")?;
    let height: usize = h.number("height")?;
    let maxval: u16 = h.number("maxval")?;
    if maxval == 0 {
        return Err("PGM maxval must be positive".into());
    }
    let payload = h.payload();
    let n = width * height;
    let raw = if maxval < 256 {
        if payload.len() < n {
            return Err("truncated PGM payload".into());
        }
        payload[..n].iter().map(|&b| b as u16).collect()
    } else {
        if payload.len() < 2 * n {
            return Err("truncated PGM payload".into());
        }
        payload[..2 * n]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect()
    };
    Ok((width, height, maxval, raw))
}

pub fn encode_pgm16(width: usize, height: usize, raw: &[u16]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n65535\n").into_bytes();
    for v in raw {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out
}

pub fn encode_pgm8(width: usize, height: usize, raw: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(raw);
    out
}

fn depth_to_u16(d: Option<f64>) -> u16 {
    d.map_or(0, |d| (d * DEPTH_PGM_SCALE).round().clamp(1.0, 65535.0) as u16)
}

pub fn read_depth(path: &Path, kind: DepthKind) -> CliResult<DepthMap> {
    let format = DepthFormat::from_path(path)?;
    let bytes = read_bytes(path)?;
    let bad = |e: String| CliError::Validation(format!("{}: {e}", path.display()));
    let (w, h, values) = match format {
        DepthFormat::Pfm => decode_pfm(&bytes).map_err(bad)?,
        DepthFormat::Pgm => {
            let (w, h, _, raw) = decode_pgm(&bytes).map_err(bad)?;
            (w, h, raw.iter().map(|&r| r as f64 / DEPTH_PGM_SCALE).collect())
        }
        DepthFormat::Png => {
            let img = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)
                .map_err(|e| bad(e.to_string()))?
                .into_luma16();
            let (w, h) = img.dimensions();
            let values = img.pixels().map(|p| p.0[0] as f64 / DEPTH_PGM_SCALE).collect();
            (w as usize, h as usize, values)
        }
    };
    Ok(DepthMap::from_raw(w, h, values, kind))
}

pub fn encode_depth(format: DepthFormat, depth: &DepthMap) -> CliResult<Vec<u8>> {
    let (w, h) = depth.dims();
    match format {
        DepthFormat::Pfm => Ok(encode_pfm(w, h, &depth.to_raw())),
        DepthFormat::Pgm => {
            let raw: Vec<u16> = depth.grid().iter().map(|&d| depth_to_u16(d)).collect();
            Ok(encode_pgm16(w, h, &raw))
        }
        DepthFormat::Png => {
            let raw: Vec<u16> = depth.grid().iter().map(|&d| depth_to_u16(d)).collect();
            let img: ImageBuffer<Luma<u16>, Vec<u16>> =
                ImageBuffer::from_raw(w as u32, h as u32, raw).expect("buffer size matches");
            encode_png(&image::DynamicImage::ImageLuma16(img))
        }
    }
}

pub fn write_depth(path: &Path, depth: &DepthMap) -> CliResult<()> {
    let bytes = encode_depth(DepthFormat::from_path(path)?, depth)?;
    write_atomic(path, &bytes)
}

fn encode_png(img: &image::DynamicImage) -> CliResult<Vec<u8>> {
    let mut buf = std::io::Cursor::new(Vec::new());
    img.write_to(&mut buf, image::ImageFormat::Png)
        .map_err(|e| CliError::io("png encode", e))?;
    Ok(buf.into_inner())
}

pub fn read_mask(path: &Path) -> CliResult<Grid<bool>> {
    let bytes = read_bytes(path)?;
    let bad = |e: String| CliError::Validation(format!("{}: {e}", path.display()));
    match extension(path).as_deref() {
        Some("pgm") => {
            let (w, h, _, raw) = decode_pgm(&bytes).map_err(bad)?;
            Ok(Grid::from_vec(w, h, raw.iter().map(|&v| v != 0).collect()))
        }
        Some("png") => {
            let img = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)
                .map_err(|e| bad(e.to_string()))?
                .into_luma8();
            let (w, h) = img.dimensions();
            Ok(Grid::from_vec(
                w as usize,
                h as usize,
                img.pixels().map(|p| p.0[0] != 0).collect(),
            ))
        }
        _ => Err(bad("unsupported mask format (expected .png or .pgm)".into())),
    }
}

pub fn encode_mask(path: &Path, mask: &Grid<bool>) -> CliResult<Vec<u8>> {
    let (w, h) = mask.dims();
    let raw: Vec<u8> = mask.iter().map(|&m| if m { 255 } else { 0 }).collect();
    match extension(path).as_deref() {
        Some("pgm") => Ok(encode_pgm8(w, h, &raw)),
        Some("png") => {
            let img = GrayImage::from_raw(w as u32, h as u32, raw).expect("buffer size matches");
            encode_png(&image::DynamicImage::ImageLuma8(img))
        }
        _ => Err(CliError::Validation(format!(
            "{}: unsupported mask format (expected .png or .pgm)",
            path.display()
        ))),
    }
}

pub fn write_mask(path: &Path, mask: &Grid<bool>) -> CliResult<()> {
    let bytes = encode_mask(path, mask)?;
    write_atomic(path, &bytes)
}

/// `[-1, 1] → [0, 255]` per component; invalid normals are black.
pub fn normal_to_rgb(n: Option<Vec3>) -> [u8; 3] {
    match n {
        Some(n) => [n.x, n.y, n.z].map(|c| (((c + 1.0) / 2.0) * 255.0).round().clamp(0.0, 255.0) as u8),
        None => [0, 0, 0],
    }
}

pub fn encode_normals(normals: &NormalMap) -> CliResult<Vec<u8>> {
    let (w, h) = normals.dims();
    let mut img = RgbImage::new(w as u32, h as u32);
    for (row, col, n) in normals.grid().indexed() {
        img.put_pixel(col as u32, row as u32, Rgb(normal_to_rgb(*n)));
    }
    encode_png(&image::DynamicImage::ImageRgb8(img))
}

pub fn write_normals(path: &Path, normals: &NormalMap) -> CliResult<()> {
    if extension(path).as_deref() != Some("png") {
        return Err(CliError::Validation(format!(
            "{}: normal maps are written as .png",
            path.display()
        )));
    }
    write_atomic(path, &encode_normals(normals)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntrinsicsFile {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl IntrinsicsFile {
    pub fn new(k: &CameraIntrinsics, width: usize, height: usize) -> Self {
        Self {
            fx: k.fx,
            fy: k.fy,
            cx: k.cx,
            cy: k.cy,
            width,
            height,
        }
    }

    pub fn intrinsics(&self) -> CameraIntrinsics {
        CameraIntrinsics {
            fx: self.fx,
            fy: self.fy,
            cx: self.cx,
            cy: self.cy,
        }
    }

    /// Validated intrinsics for a map of the given size.
    pub fn for_depth(&self, depth: &DepthMap) -> CliResult<CameraIntrinsics> {
        if (self.width, self.height) != depth.dims() {
            return Err(CliError::Validation(format!(
                "intrinsics are for {}x{}, depth map is {}x{}",
                self.width,
                self.height,
                depth.width(),
                depth.height()
            )));
        }
        let k = self.intrinsics();
        k.validate_for(self.width, self.height)?;
        Ok(k)
    }
}

pub fn read_intrinsics(path: &Path) -> CliResult<IntrinsicsFile> {
    let bytes = read_bytes(path)?;
    let file: IntrinsicsFile = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    file.intrinsics().validate()?;
    Ok(file)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::io("json", e))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// 8-bit or 16-bit PNG as grayscale or RGB intensities in `[0, 1]`.
pub fn read_image(path: &Path) -> CliResult<dgc_core::photometric::Image> {
    let bytes = read_bytes(path)?;
    let img = image::load_from_memory(&bytes)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let result = if img.color().channel_count() < 3 {
        let g = img.into_luma16();
        dgc_core::photometric::Image::new(w, h, 1, g.pixels().map(|p| p.0[0] as f64 / 65535.0).collect())
    } else {
        let rgb = img.into_rgb16();
        dgc_core::photometric::Image::new(
            w,
            h,
            3,
            rgb.pixels().flat_map(|p| p.0.map(|c| c as f64 / 65535.0)).collect(),
        )
    };
    Ok(result?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pfm_rows_are_bottom_up() {
        let bytes = encode_pfm(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let header = b"Pf\n2 2\n-1.0\n";
        assert_eq!(&bytes[..header.len()], header);
        let first = f32::from_le_bytes(bytes[header.len()..header.len() + 4].try_into().unwrap());
        assert_eq!(first, 3.0);
        assert_eq!(decode_pfm(&bytes).unwrap(), (2, 2, vec![1.0, 2.0, 3.0, 4.0]));
    }

    #[test]
    fn pfm_big_endian_and_errors() {
        let mut bytes = b"Pf\n1 1\n1.0\n".to_vec();
        bytes.extend_from_slice(&2.5f32.to_be_bytes());
        assert_eq!(decode_pfm(&bytes).unwrap().2, vec![2.5]);
        assert!(decode_pfm(b"P6\n1 1\n255\n").is_err());
        assert!(decode_pfm(b"Pf\n2 2\n-1.0\n\0\0").is_err());
    }

    #[test]
    fn pgm_depth_encoding() {
        let depth = DepthMap::from_raw(3, 1, vec![0.0, 1.5, 300.0], DepthKind::Absolute);
        let bytes = encode_depth(DepthFormat::Pgm, &depth).unwrap();
        let (w, h, maxval, raw) = decode_pgm(&bytes).unwrap();
        assert_eq!((w, h, maxval), (3, 1, 65535));
        assert_eq!(raw, vec![0, 384, 65535]);
    }

    #[test]
    fn pgm_header_comments() {
        let mut bytes = b"P5\n# made by hand\n2 1\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 7]);
        assert_eq!(decode_pgm(&bytes).unwrap().3, vec![0, 7]);
    }

    #[test]
    fn normal_colors() {
        assert_eq!(normal_to_rgb(Some(Vec3::new(0.0, 1.0, 0.0))), [128, 255, 128]);
        assert_eq!(normal_to_rgb(Some(Vec3::new(-1.0, 0.0, 1.0))), [0, 128, 255]);
        assert_eq!(normal_to_rgb(None), [0, 0, 0]);
    }

    proptest! {
        #[test]
        fn pfm_round_trips_f32(values in prop::collection::vec(-1e6f32..1e6, 12)) {
            let as_f64: Vec<f64> = values.iter().map(|&v| v as f64).collect();
            let bytes = encode_pfm(4, 3, &as_f64);
            prop_assert_eq!(decode_pfm(&bytes).unwrap(), (4, 3, as_f64));
        }

        #[test]
        fn pgm16_round_trips(raw in prop::collection::vec(any::<u16>(), 6)) {
            let bytes = encode_pgm16(3, 2, &raw);
            prop_assert_eq!(decode_pgm(&bytes).unwrap().3, raw);
        }
    }
}
