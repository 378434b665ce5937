//! 8-bit PGM (P5) and PNG reading/writing. Samples map to `v / 255` on load
//! and to `round(v * 255)` on save.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, GrayImage, ImageEncoder, RgbImage as Rgb8};

use super::{ImageGray, RgbImage};
use crate::error::{Error, Result};

/// A decoded file: grayscale or colour.
#[derive(Debug, Clone, PartialEq)]
pub enum LoadedImage {
    Gray(ImageGray),
    Rgb(RgbImage),
}

impl LoadedImage {
    /// The luminance plane (BT.601) for colour inputs, the image itself otherwise.
    pub fn luma(&self) -> ImageGray {
        match self {
            LoadedImage::Gray(g) => g.clone(),
            LoadedImage::Rgb(rgb) => super::rgb_to_ycbcr(rgb).y,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        match self {
            LoadedImage::Gray(g) => (g.height(), g.width()),
            LoadedImage::Rgb(c) => (c.height(), c.width()),
        }
    }
}

fn codec_err(path: &Path, e: image::ImageError) -> Error {
    match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Codec {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    }
}

#[inline]
fn to_u8(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

fn plane_from_u8(h: usize, w: usize, bytes: impl Iterator<Item = u8>) -> Result<ImageGray> {
    ImageGray::new(h, w, bytes.map(|b| b as f64 / 255.0).collect())
}

/// Loads a PGM/PNG file. Gray and gray+alpha files load as gray; everything
/// else is converted to 8-bit RGB.
pub fn load(path: impl AsRef<Path>) -> Result<LoadedImage> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|e| codec_err(path, e))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma8(_) | DynamicImage::ImageLumaA8(_) | DynamicImage::ImageLuma16(_) => {
            let g = img.to_luma8();
            Ok(LoadedImage::Gray(plane_from_u8(h, w, g.into_raw().into_iter())?))
        }
        other => {
            let rgb = other.to_rgb8().into_raw();
            let chan = |k: usize| plane_from_u8(h, w, rgb.iter().skip(k).step_by(3).copied());
            Ok(LoadedImage::Rgb(RgbImage::new(chan(0)?, chan(1)?, chan(2)?)?))
        }
    }
}

/// Loads a file as a single gray plane (luminance for colour files).
pub fn load_gray(path: impl AsRef<Path>) -> Result<ImageGray> {
    Ok(load(path)?.luma())
}

fn is_pgm(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.eq_ignore_ascii_case("pgm"))
        .unwrap_or(false)
}

/// Writes a gray image; `.pgm` paths produce binary P5 with maxval 255,
/// anything else is written as PNG.
pub fn save_gray(image: &ImageGray, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes: Vec<u8> = image.data().iter().map(|&v| to_u8(v)).collect();
    let (w, h) = (image.width() as u32, image.height() as u32);
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let out = BufWriter::new(file);
    let res = if is_pgm(path) {
        PnmEncoder::new(out)
            .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
            .write_image(&bytes, w, h, image::ExtendedColorType::L8)
    } else {
        let buf = GrayImage::from_raw(w, h, bytes).expect("buffer size");
        buf.write_with_encoder(image::codecs::png::PngEncoder::new(out))
    };
    res.map_err(|e| codec_err(path, e))
}

/// Writes an RGB image as PNG.
pub fn save_rgb(image: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = Vec::with_capacity(image.height() * image.width() * 3);
    for ((&r, &g), &b) in image.r.data().iter().zip(image.g.data()).zip(image.b.data()) {
        bytes.extend_from_slice(&[to_u8(r), to_u8(g), to_u8(b)]);
    }
    let buf = Rgb8::from_raw(image.width() as u32, image.height() as u32, bytes).expect("buffer size");
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    buf.write_with_encoder(image::codecs::png::PngEncoder::new(BufWriter::new(file)))
        .map_err(|e| codec_err(path, e))
}

/// Rounds an image onto the 8-bit grid, i.e. what a save/load cycle yields.
pub fn quantize(image: &ImageGray) -> ImageGray {
    let data = image.data().iter().map(|&v| to_u8(v) as f64 / 255.0).collect();
    ImageGray::new(image.height(), image.width(), data).expect("same dims")
}
